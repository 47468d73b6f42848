//! Aggregation hierarchies and the summing matrix.
//!
//! Nodes are kept in canonical order: by level, then by lexicographic id.
//! Every vector and matrix in the crate that is indexed by node uses this
//! order, and every bottom-level vector uses the order of the bottom rows.

mod panel;

pub use panel::{regular_timestamps, CalendarSpec, ExogBlock, SeriesPanel, DEFAULT_DATA_EPS};

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a hierarchy file: `node_id,parent_id,level`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: String,
    pub parent_id: Option<String>,
    pub level: usize,
}

impl NodeSpec {
    pub fn new(node_id: impl Into<String>, parent_id: Option<&str>, level: usize) -> Self {
        Self {
            node_id: node_id.into(),
            parent_id: parent_id.map(str::to_owned),
            level,
        }
    }
}

/// A strict aggregation tree whose leaves all sit on the bottom level.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    nodes: Vec<NodeSpec>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    levels: Vec<Range<usize>>,
    /// Bottom-column indices below each node.
    bottom_cols: Vec<Vec<usize>>,
    summing: SummingMatrix,
}

impl Hierarchy {
    /// Validates the node list and builds the canonical hierarchy.
    ///
    /// The input order is irrelevant: any permutation of the same nodes
    /// produces an identical hierarchy.
    pub fn new(mut nodes: Vec<NodeSpec>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Structure {
                node: String::new(),
                reason: "hierarchy has no nodes".into(),
            });
        }
        nodes.sort_by(|a, b| (a.level, &a.node_id).cmp(&(b.level, &b.node_id)));

        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.node_id.is_empty() {
                return Err(Error::Structure {
                    node: n.node_id.clone(),
                    reason: "empty node id".into(),
                });
            }
            if index.insert(n.node_id.clone(), i).is_some() {
                return Err(Error::Structure {
                    node: n.node_id.clone(),
                    reason: "duplicate node id".into(),
                });
            }
        }

        let roots: Vec<&NodeSpec> = nodes.iter().filter(|n| n.level == 0).collect();
        if roots.len() != 1 {
            return Err(Error::Structure {
                node: roots.first().map(|n| n.node_id.clone()).unwrap_or_default(),
                reason: format!("expected exactly one level-0 node, found {}", roots.len()),
            });
        }

        let mut parent = vec![None; nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            match (&n.parent_id, n.level) {
                (None, 0) => {}
                (Some(_), 0) => {
                    return Err(Error::Structure {
                        node: n.node_id.clone(),
                        reason: "the level-0 node must not have a parent".into(),
                    })
                }
                (None, _) => {
                    return Err(Error::Structure {
                        node: n.node_id.clone(),
                        reason: "orphan node: missing parent".into(),
                    })
                }
                (Some(p), level) => {
                    let &pi = index.get(p).ok_or_else(|| Error::Structure {
                        node: n.node_id.clone(),
                        reason: format!("orphan node: parent `{p}` does not exist"),
                    })?;
                    if nodes[pi].level + 1 != level {
                        return Err(Error::Structure {
                            node: n.node_id.clone(),
                            reason: format!(
                                "level gap: node at level {level} has parent `{p}` at level {}",
                                nodes[pi].level
                            ),
                        });
                    }
                    parent[i] = Some(pi);
                    children[pi].push(i);
                }
            }
        }

        let n_levels = nodes.last().map(|n| n.level + 1).unwrap_or(1);
        let mut levels = Vec::with_capacity(n_levels);
        let mut start = 0;
        for k in 0..n_levels {
            let end = start + nodes[start..].iter().take_while(|n| n.level == k).count();
            if end == start {
                return Err(Error::Structure {
                    node: nodes[start].node_id.clone(),
                    reason: format!("level gap: level {k} is empty"),
                });
            }
            levels.push(start..end);
            start = end;
        }

        let bottom = levels[n_levels - 1].clone();
        for (i, n) in nodes.iter().enumerate() {
            if children[i].is_empty() && !bottom.contains(&i) {
                return Err(Error::Structure {
                    node: n.node_id.clone(),
                    reason: format!(
                        "leaf at level {} but the bottom level is {}",
                        n.level,
                        n_levels - 1
                    ),
                });
            }
        }

        // Bottom descendants, filled bottom-up; parents always precede
        // children in canonical order.
        let mut bottom_cols: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for i in (0..nodes.len()).rev() {
            if bottom.contains(&i) {
                bottom_cols[i] = vec![i - bottom.start];
            } else {
                let mut cols: Vec<usize> = children[i]
                    .iter()
                    .flat_map(|&c| bottom_cols[c].iter().copied())
                    .collect();
                cols.sort_unstable();
                bottom_cols[i] = cols;
            }
        }

        let mut matrix = DMatrix::zeros(nodes.len(), bottom.len());
        for (i, cols) in bottom_cols.iter().enumerate() {
            for &c in cols {
                matrix[(i, c)] = 1.0;
            }
        }
        let summing = SummingMatrix {
            matrix,
            row_ids: nodes.iter().map(|n| n.node_id.clone()).collect(),
            col_ids: nodes[bottom].iter().map(|n| n.node_id.clone()).collect(),
        };

        Ok(Self {
            nodes,
            index,
            parent,
            children,
            levels,
            bottom_cols,
            summing,
        })
    }

    /// Builds a hierarchy from child counts per level.
    ///
    /// `counts[k][j]` is the number of children of the `j`-th node at level
    /// `k`. The root is named `T`, and a child of `p` is named `p_jjj`, so
    /// canonical order coincides with construction order.
    pub fn from_child_counts(counts: &[Vec<usize>]) -> Result<Self> {
        let mut nodes = vec![NodeSpec::new("T", None, 0)];
        let mut frontier = vec!["T".to_string()];
        for (k, level_counts) in counts.iter().enumerate() {
            if level_counts.len() != frontier.len() {
                return Err(Error::Config(format!(
                    "level {k} has {} nodes but {} child counts were given",
                    frontier.len(),
                    level_counts.len()
                )));
            }
            let mut next = Vec::new();
            for (parent, &n) in frontier.iter().zip(level_counts) {
                for j in 0..n {
                    let id = format!("{parent}_{j:03}");
                    nodes.push(NodeSpec::new(id.clone(), Some(parent), k + 1));
                    next.push(id);
                }
            }
            frontier = next;
        }
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    /// Total number of series, `M`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of levels, `K`.
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Series count per level, `m_k`.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Range::len).collect()
    }

    /// Canonical index range of the nodes at `level`.
    pub fn level_range(&self, level: usize) -> Range<usize> {
        self.levels[level].clone()
    }

    pub fn bottom_range(&self) -> Range<usize> {
        self.levels[self.levels.len() - 1].clone()
    }

    pub fn n_bottom(&self) -> usize {
        self.bottom_range().len()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn id(&self, node: usize) -> &str {
        &self.nodes[node].node_id
    }

    pub fn level(&self, node: usize) -> usize {
        self.nodes[node].level
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Bottom-column indices (positions within the bottom level) below `node`.
    pub fn bottom_columns(&self, node: usize) -> &[usize] {
        &self.bottom_cols[node]
    }

    /// Canonical node indices of the bottom descendants of `node`.
    pub fn bottom_descendants(&self, node: usize) -> Vec<usize> {
        let start = self.bottom_range().start;
        self.bottom_cols[node].iter().map(|c| start + c).collect()
    }

    /// Nodes that have children, in canonical order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_leaf(i)).collect()
    }

    pub fn summing_matrix(&self) -> &SummingMatrix {
        &self.summing
    }

    /// Maximum over rows and interior nodes of
    /// `|value(node) - sum(value(children))|`.
    ///
    /// `values` is `H x M`, one row per time step.
    pub fn coherence_violation(&self, values: &DMatrix<f64>) -> Result<f64> {
        if values.ncols() != self.len() {
            return Err(Error::shape(
                format!("{} columns", self.len()),
                format!("{} columns", values.ncols()),
            ));
        }
        let mut worst: f64 = 0.0;
        for node in 0..self.len() {
            let kids = &self.children[node];
            if kids.is_empty() {
                continue;
            }
            for t in 0..values.nrows() {
                let sum: f64 = kids.iter().map(|&c| values[(t, c)]).sum();
                let v = (values[(t, node)] - sum).abs();
                if v.is_nan() {
                    return Ok(f64::NAN);
                }
                worst = worst.max(v);
            }
        }
        Ok(worst)
    }

    /// Stable content hash of the structure (canonical ids and parents).
    pub fn structure_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for n in &self.nodes {
            hasher.update(n.node_id.as_bytes());
            hasher.update([0u8]);
            hasher.update(n.parent_id.as_deref().unwrap_or("").as_bytes());
            hasher.update([0u8]);
            hasher.update((n.level as u64).to_le_bytes());
        }
        hex_digest(&hasher.finalize())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Dense `M x m_{K-1}` 0/1 matrix with `y_t = S y_t^{bottom}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummingMatrix {
    matrix: DMatrix<f64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
}

impl SummingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Maps a `T x m_{K-1}` bottom matrix to the `T x M` matrix of all nodes.
    pub fn aggregate(&self, bottom: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if bottom.ncols() != self.n_cols() {
            return Err(Error::shape(
                format!("{} bottom columns", self.n_cols()),
                format!("{} columns", bottom.ncols()),
            ));
        }
        Ok(bottom * self.matrix.transpose())
    }

    /// `S b` for a single bottom vector.
    pub fn aggregate_vector(&self, bottom: &[f64]) -> Result<Vec<f64>> {
        if bottom.len() != self.n_cols() {
            return Err(Error::shape(
                format!("{} bottom values", self.n_cols()),
                format!("{}", bottom.len()),
            ));
        }
        Ok((0..self.n_rows())
            .map(|i| (0..self.n_cols()).map(|j| self.matrix[(i, j)] * bottom[j]).sum())
            .collect())
    }
}

/// Free-function form of [`Hierarchy::summing_matrix`].
pub fn build_summing_matrix(h: &Hierarchy) -> SummingMatrix {
    h.summing_matrix().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn tiny() -> Hierarchy {
        Hierarchy::new(vec![
            NodeSpec::new("b", Some("root"), 1),
            NodeSpec::new("root", None, 0),
            NodeSpec::new("a", Some("root"), 1),
        ])
        .unwrap()
    }

    #[test]
    fn smallest_hierarchy_summing_matrix() {
        let s = tiny().summing_matrix().matrix().clone();
        assert_eq!(s, dmatrix![1.0, 1.0; 1.0, 0.0; 0.0, 1.0]);
    }

    #[test]
    fn italian_and_walmart_shapes() {
        let italian = Hierarchy::from_child_counts(&[vec![4], vec![42, 45, 10, 21]]).unwrap();
        let s = italian.summing_matrix();
        assert_eq!((s.n_rows(), s.n_cols()), (123, 118));
        assert_eq!(italian.level_sizes(), vec![1, 4, 118]);

        let walmart =
            Hierarchy::from_child_counts(&[vec![3], vec![4, 3, 3], vec![3; 10]]).unwrap();
        let s = walmart.summing_matrix();
        assert_eq!((s.n_rows(), s.n_cols()), (44, 30));
        assert_eq!(walmart.level_sizes(), vec![1, 3, 10, 30]);
    }

    #[test]
    fn bottom_rows_are_identity_and_rows_sum_children() {
        let h = Hierarchy::from_child_counts(&[vec![3], vec![2, 1, 3]]).unwrap();
        let s = h.summing_matrix().matrix();
        let b = h.bottom_range();
        for (r, i) in b.clone().enumerate() {
            for c in 0..h.n_bottom() {
                assert_eq!(s[(i, c)], if r == c { 1.0 } else { 0.0 });
            }
        }
        for node in h.interior_nodes() {
            for c in 0..h.n_bottom() {
                let sum: f64 = h.children(node).iter().map(|&k| s[(k, c)]).sum();
                assert_eq!(s[(node, c)], sum);
            }
        }
    }

    #[test]
    fn structural_errors_name_the_node() {
        let orphan = Hierarchy::new(vec![
            NodeSpec::new("r", None, 0),
            NodeSpec::new("x", Some("ghost"), 1),
        ]);
        match orphan {
            Err(Error::Structure { node, .. }) => assert_eq!(node, "x"),
            other => panic!("unexpected {other:?}"),
        }
        let gap = Hierarchy::new(vec![
            NodeSpec::new("r", None, 0),
            NodeSpec::new("a", Some("r"), 1),
            NodeSpec::new("x", Some("r"), 2),
        ]);
        match gap {
            Err(Error::Structure { node, reason }) => {
                assert_eq!(node, "x");
                assert!(reason.contains("level gap"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let shallow_leaf = Hierarchy::new(vec![
            NodeSpec::new("r", None, 0),
            NodeSpec::new("a", Some("r"), 1),
            NodeSpec::new("b", Some("r"), 1),
            NodeSpec::new("a1", Some("a"), 2),
        ]);
        assert!(matches!(shallow_leaf, Err(Error::Structure { node, .. }) if node == "b"));
        let two_roots = Hierarchy::new(vec![NodeSpec::new("r", None, 0), NodeSpec::new("s", None, 0)]);
        assert!(two_roots.is_err());
        let dup = Hierarchy::new(vec![
            NodeSpec::new("r", None, 0),
            NodeSpec::new("a", Some("r"), 1),
            NodeSpec::new("a", Some("r"), 1),
        ]);
        assert!(matches!(dup, Err(Error::Structure { node, .. }) if node == "a"));
    }

    #[test]
    fn aggregate_examples() {
        let h = tiny();
        let s = h.summing_matrix();
        let out = s.aggregate(&dmatrix![4.0, 5.0; 0.0, 0.0]).unwrap();
        assert_eq!(out, dmatrix![9.0, 4.0, 5.0; 0.0, 0.0, 0.0]);
        assert!(s.aggregate(&dmatrix![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn aggregate_matches_descendant_sums() {
        // Two-level tree with four leaves, checked against a walk over the
        // parent links rather than the summing matrix.
        let h = Hierarchy::new(vec![
            NodeSpec::new("r", None, 0),
            NodeSpec::new("a", Some("r"), 1),
            NodeSpec::new("b", Some("r"), 1),
            NodeSpec::new("a1", Some("a"), 2),
            NodeSpec::new("a2", Some("a"), 2),
            NodeSpec::new("b1", Some("b"), 2),
            NodeSpec::new("b2", Some("b"), 2),
        ])
        .unwrap();
        let mut rng = crate::rng::rng_from_seed(3);
        let bottom = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-10.0..10.0));
        let all = h.summing_matrix().aggregate(&bottom).unwrap();
        let b0 = h.bottom_range().start;
        for t in 0..5 {
            for node in 0..h.len() {
                let mut expected = 0.0;
                for (c, leaf) in h.bottom_range().enumerate() {
                    let mut cur = Some(leaf);
                    while let Some(x) = cur {
                        if x == node {
                            expected += bottom[(t, c)];
                            break;
                        }
                        cur = h.parent(x);
                    }
                }
                assert!((all[(t, node)] - expected).abs() < 1e-12, "t={t} node={node}");
            }
            assert_eq!(all[(t, b0)], bottom[(t, 0)]);
        }
    }

    #[test]
    fn coherence_violation_examples() {
        let h = tiny();
        assert_eq!(h.coherence_violation(&dmatrix![9.0, 4.0, 5.0]).unwrap(), 0.0);
        assert_eq!(h.coherence_violation(&dmatrix![9.5, 4.0, 5.0]).unwrap(), 0.5);
        assert!(h.coherence_violation(&dmatrix![9.0, 4.0]).is_err());
    }

    fn random_nodes(seed: u64) -> Vec<NodeSpec> {
        let mut rng = crate::rng::rng_from_seed(seed);
        let k1 = rng.random_range(1..5);
        let counts: Vec<usize> = (0..k1).map(|_| rng.random_range(1..4)).collect();
        Hierarchy::from_child_counts(&[vec![k1], counts]).unwrap().nodes().to_vec()
    }

    proptest! {
        #[test]
        fn permuting_input_gives_identical_matrix(seed in 0u64..500, shuffle in 0u64..500) {
            let nodes = random_nodes(seed);
            let reference = Hierarchy::new(nodes.clone()).unwrap();
            let mut shuffled = nodes;
            shuffled.shuffle(&mut crate::rng::rng_from_seed(shuffle));
            let again = Hierarchy::new(shuffled).unwrap();
            prop_assert_eq!(reference.summing_matrix(), again.summing_matrix());
            prop_assert_eq!(build_summing_matrix(&again), build_summing_matrix(&again));
        }

        #[test]
        fn aggregated_bottom_is_coherent(seed in 0u64..500, t in 1usize..6) {
            let h = Hierarchy::new(random_nodes(seed)).unwrap();
            let mut rng = crate::rng::rng_from_seed(seed ^ 0xabc);
            let bottom = DMatrix::from_fn(t, h.n_bottom(), |_, _| rng.random_range(-1e3..1e3));
            let all = h.summing_matrix().aggregate(&bottom).unwrap();
            prop_assert!(h.coherence_violation(&all).unwrap() <= 1e-9);
        }
    }
}
