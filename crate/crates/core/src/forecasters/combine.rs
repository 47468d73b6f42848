//! Forecast combinations: the pointwise mean and constrained least squares
//! weights on the probability simplex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITER: usize = 5000;
const GRAD_TOL: f64 = 1e-10;

fn check_members(members: &[Vec<f64>]) -> Result<usize> {
    let first = members.first().ok_or_else(|| Error::Fit("no forecasts to combine".into()))?;
    let h = first.len();
    if let Some(m) = members.iter().find(|m| m.len() != h) {
        return Err(Error::shape(format!("{h} steps"), m.len().to_string()));
    }
    Ok(h)
}

pub fn combine_mean(members: &[Vec<f64>]) -> Result<Vec<f64>> {
    let h = check_members(members)?;
    let k = members.len() as f64;
    Ok((0..h).map(|t| members.iter().map(|m| m[t]).sum::<f64>() / k).collect())
}

pub fn combine_weighted(members: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let h = check_members(members)?;
    if weights.len() != members.len() {
        return Err(Error::shape(format!("{} weights", members.len()), weights.len().to_string()));
    }
    Ok((0..h).map(|t| members.iter().zip(weights).map(|(m, w)| w * m[t]).sum()).collect())
}

/// Euclidean projection onto `{b : b >= 0, sum b = 1}` (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `sum_t (y_t - sum_i b_i f_{i,t})^2`.
pub fn cls_objective(members: &[Vec<f64>], actual: &[f64], weights: &[f64]) -> f64 {
    actual
        .iter()
        .enumerate()
        .map(|(t, y)| {
            let f: f64 = members.iter().zip(weights).map(|(m, w)| w * m[t]).sum();
            (y - f).powi(2)
        })
        .sum()
}

/// Weights minimizing the squared error of the combination over a held-out
/// window, subject to non-negativity and summing to one.
///
/// Accelerated projected gradient on the simplex, then an exact solve of the
/// equality-constrained problem on the support found, kept when feasible and
/// no worse. Identical members get uniform weights.
pub fn cls_weights(members: &[Vec<f64>], actual: &[f64]) -> Result<Vec<f64>> {
    let t = check_members(members)?;
    let k = members.len();
    if t != actual.len() {
        return Err(Error::shape(format!("{t} actuals"), actual.len().to_string()));
    }
    if t == 0 {
        return Err(Error::Fit("CLS needs at least one held-out point".into()));
    }
    if members.iter().flatten().chain(actual).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite value in CLS inputs".into()));
    }
    let uniform = vec![1.0 / k as f64; k];
    let scale = members.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let degenerate = members[1..].iter().all(|m| m.iter().zip(&members[0]).all(|(a, b)| (a - b).abs() <= 1e-12 * scale));
    if degenerate {
        return Ok(uniform);
    }
    let f = DMatrix::from_fn(t, k, |r, c| members[c][r]);
    let y = DVector::from_column_slice(actual);
    let q = f.transpose() * &f;
    let c = f.transpose() * &y;
    let lipschitz = 2.0 * q.symmetric_eigenvalues().max();
    if !(lipschitz > 0.0) {
        return Ok(uniform);
    }
    let grad = |b: &DVector<f64>| 2.0 * (&q * b - &c);

    let mut x = DVector::from_vec(uniform.clone());
    let mut z = x.clone();
    let mut s = 1.0f64;
    for _ in 0..MAX_ITER {
        let g = grad(&z);
        let step: Vec<f64> = (&z - &g / lipschitz).iter().copied().collect();
        let next = DVector::from_vec(project_simplex(&step));
        let mapping = (&z - &next).norm() * lipschitz;
        let s_next = (1.0 + (1.0 + 4.0 * s * s).sqrt()) / 2.0;
        z = &next + (&next - &x) * ((s - 1.0) / s_next);
        x = next;
        s = s_next;
        if mapping < GRAD_TOL {
            break;
        }
    }
    let mut best: Vec<f64> = x.iter().copied().collect();
    let support: Vec<usize> = (0..k).filter(|&i| best[i] > 1e-9).collect();
    if let Some(polished) = solve_on_support(&q, &c, &support, k) {
        if cls_objective(members, actual, &polished) <= cls_objective(members, actual, &best) {
            best = polished;
        }
    }
    Ok(best)
}

/// Minimizer of the objective over weights supported on `support` with the
/// sum constraint only, if it is non-negative.
fn solve_on_support(q: &DMatrix<f64>, c: &DVector<f64>, support: &[usize], k: usize) -> Option<Vec<f64>> {
    let n = support.len();
    if n == 0 {
        return None;
    }
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for (i, &si) in support.iter().enumerate() {
        for (j, &sj) in support.iter().enumerate() {
            a[(i, j)] = 2.0 * q[(si, sj)];
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        rhs[i] = 2.0 * c[si];
    }
    rhs[n] = 1.0;
    let sol = a.lu().solve(&rhs)?;
    let mut w = vec![0.0; k];
    for (i, &si) in support.iter().enumerate() {
        if !(sol[i] >= 0.0) || !sol[i].is_finite() {
            return None;
        }
        w[si] = sol[i];
    }
    let total: f64 = w.iter().sum();
    Some(w.iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn on_simplex(w: &[f64]) -> bool {
        w.iter().all(|v| *v >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() < 1e-8
    }

    #[test]
    fn mean_examples() {
        assert_eq!(combine_mean(&[vec![2.0, 2.0], vec![4.0, 4.0]]).unwrap(), vec![3.0, 3.0]);
        assert_eq!(combine_mean(&[vec![1.5, -2.0]]).unwrap(), vec![1.5, -2.0]);
        let m = [vec![1.0, 5.0], vec![2.0, 7.0], vec![6.0, 0.0]];
        let got = combine_mean(&m).unwrap();
        for t in 0..2 {
            let want = (m[0][t] + m[1][t] + m[2][t]) / 3.0;
            assert!((got[t] - want).abs() < 1e-12);
        }
        assert!(combine_mean(&[]).is_err());
        assert!(combine_mean(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn single_point_two_members() {
        let w = cls_weights(&[vec![1.0], vec![3.0]], &[2.0]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-9 && (w[1] - 0.5).abs() < 1e-9, "{w:?}");
        assert!(cls_weights(&[vec![], vec![]], &[]).is_err());
    }

    #[test]
    fn exact_member_gets_all_weight() {
        let mut rng = rng_from_seed(1);
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..10.0)).collect();
        let noisy = |rng: &mut crate::rng::Rng| y.iter().map(|v| v + rng.random_range(-3.0..3.0)).collect::<Vec<_>>();
        let members = vec![noisy(&mut rng), y.clone(), noisy(&mut rng)];
        let w = cls_weights(&members, &y).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-6, "{w:?}");
        assert!(w[0].abs() < 1e-6 && w[2].abs() < 1e-6);
    }

    #[test]
    fn identical_members_are_uniform() {
        let m = vec![vec![1.0, 2.0, 3.0]; 3];
        assert_eq!(cls_weights(&m, &[0.0, 5.0, 1.0]).unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn two_members_match_grid_oracle() {
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let y: Vec<f64> = (0..12).map(|_| rng.random_range(50.0..150.0)).collect();
            let members: Vec<Vec<f64>> = (0..2).map(|_| y.iter().map(|v| v + rng.random_range(-20.0..25.0)).collect()).collect();
            let w = cls_weights(&members, &y).unwrap();
            let got = cls_objective(&members, &y, &w);
            let oracle = (0..=10_000)
                .map(|i| {
                    let b = i as f64 / 10_000.0;
                    cls_objective(&members, &y, &[b, 1.0 - b])
                })
                .fold(f64::INFINITY, f64::min);
            assert!(got <= oracle + 1e-8 * oracle.max(1.0), "{got} vs {oracle}");
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_simplex(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn weights_are_feasible_and_beat_simple_choices(
            seed in 0u64..1000,
            k in 1usize..5,
            t in 5usize..25,
        ) {
            let mut rng = rng_from_seed(seed);
            let y: Vec<f64> = (0..t).map(|_| rng.random_range(-10.0..100.0)).collect();
            let members: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let bias = rng.random_range(-10.0..10.0);
                    y.iter().map(|v| v + bias + rng.random_range(-15.0..15.0)).collect()
                })
                .collect();
            let w = cls_weights(&members, &y).unwrap();
            prop_assert!(on_simplex(&w));
            let obj = cls_objective(&members, &y, &w);
            let tol = 1e-9 * obj.max(1.0);
            prop_assert!(obj <= cls_objective(&members, &y, &vec![1.0 / k as f64; k]) + tol);
            for i in 0..k {
                let mut e = vec![0.0; k];
                e[i] = 1.0;
                prop_assert!(obj <= cls_objective(&members, &y, &e) + tol);
            }
        }

        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!(on_simplex(&p));
        }
    }
}
