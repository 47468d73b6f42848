//! Plain SVG output: forecast-versus-actual line charts and Nemenyi
//! mean-rank interval plots. Coordinates are printed with fixed precision
//! so the files are byte-stable.

use std::fmt::Write;

use crate::evaluate::RankTest;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#222222", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// One named line of a chart.
pub struct Line<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of several equally long series against a shared x axis.
/// The first and last `labels` are printed under the axis.
pub fn line_chart(title: &str, labels: &[String], lines: &[Line]) -> String {
    let n = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let finite = lines.iter().flat_map(|l| l.values.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n.max(2) - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<path d="M{MARGIN} {MARGIN} V{b} H{r}" fill="none" stroke="#888"/>"##,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{hi:.2}</text>"#, MARGIN - 4.0, y(hi) + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{lo:.2}</text>"#, MARGIN - 4.0, y(lo) + 4.0);
    if let (Some(first), Some(last)) = (labels.first(), labels.last()) {
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">{}</text>"#, HEIGHT - MARGIN + 18.0, escape(first));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            HEIGHT - MARGIN + 18.0,
            escape(last)
        );
    }
    for (k, line) in lines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (i, v) in line.values.iter().enumerate() {
            if !v.is_finite() {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, x(i), y(*v));
            pen_down = true;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            escape(line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Mean ranks with `rank ± CD/2` intervals, one row per method, best
/// (lowest mean rank) on top.
pub fn nemenyi_chart(test: &RankTest) -> String {
    let nem = &test.nemenyi;
    let k = test.methods.len();
    let lo = nem.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min).min(1.0);
    let hi = nem.intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max).max(k as f64);
    let row_h = 24.0;
    let height = 2.0 * MARGIN + row_h * k as f64;
    let left = 120.0;
    let x = |r: f64| left + (WIDTH - left - MARGIN) * (r - lo) / (hi - lo).max(1e-12);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} mean ranks, Friedman p = {:.4}, CD = {:.3}</text>"#,
        WIDTH / 2.0,
        test.metric.name(),
        test.friedman.p_value,
        nem.critical_distance
    );
    for (row, &m) in nem.order.iter().enumerate() {
        let yy = MARGIN + row_h * (row as f64 + 0.5);
        let (a, b) = nem.intervals[m];
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 10.0, yy + 4.0, escape(&test.methods[m]));
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#1f77b4" stroke-width="2"/>"##,
            x(a),
            x(b)
        );
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{yy:.2}" r="4" fill="#d62728"/>"##, x(nem.mean_ranks[m]));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{:.2}</text>"#, x(b) + 6.0, yy + 4.0, nem.mean_ranks[m]);
    }
    let base = height - MARGIN + 10.0;
    let _ = writeln!(s, r##"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="#888"/>"##, WIDTH - MARGIN);
    for r in (lo.ceil() as i64)..=(hi.floor() as i64) {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{r}</text>"#, x(r as f64), base + 16.0);
    }
    s.push_str("</svg>\n");
    s
}
