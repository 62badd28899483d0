//! Static SVG line charts of simulated MSE against sample size.
//!
//! One chart per covariate count `p`: the x axis is `n` on a log scale, the
//! y axis is MSE on a log scale, and each `(estimator, ρ)` pair is a line.
//! Colour encodes the estimator, dash pattern encodes `ρ`.

use std::fmt::Write as _;

use crate::simulation::{CellResult, Estimator};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const DASHES: [&str; 4] = ["", "8 4", "2 3", "10 3 2 3"];

fn colour(e: Estimator) -> &'static str {
    match e {
        Estimator::Mle => COLOURS[0],
        Estimator::Liu(r) => COLOURS[1 + r as usize],
    }
}

/// Linear map from `[lo, hi]` (in log10 units) to `[a, b]` pixels.
struct Axis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Axis {
    fn new(min: f64, max: f64, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = (min.log10(), max.log10());
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v.log10() - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the cells with covariate count `p`. Returns `None` when none of
/// them has a positive MSE to plot.
pub fn mse_chart(results: &[CellResult], p: usize) -> Option<String> {
    let cells: Vec<&CellResult> = results.iter().filter(|c| c.cell.p == p).collect();
    let points = || cells.iter().flat_map(|c| c.mse.iter().map(move |&(_, v)| (c.cell.n as f64, v)));
    let positive = || points().filter(|&(_, v)| v > 0.0 && v.is_finite());
    let (ymin, ymax) = positive().fold((f64::INFINITY, 0.0_f64), |(lo, hi), (_, v)| (lo.min(v), hi.max(v)));
    if !ymin.is_finite() {
        return None;
    }
    let (xmin, xmax) = positive().fold((f64::INFINITY, 0.0_f64), |(lo, hi), (n, _)| (lo.min(n), hi.max(n)));
    let ymin = 10f64.powf(ymin.log10().floor());
    let ymax = 10f64.powf(ymax.log10().ceil());
    let xa = Axis::new(xmin, xmax, LEFT, WIDTH - RIGHT);
    let ya = Axis::new(ymin, ymax, HEIGHT - BOTTOM, TOP);

    let mut rhos: Vec<f64> = cells.iter().map(|c| c.cell.rho).collect();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    let mut ns: Vec<usize> = cells.iter().map(|c| c.cell.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let estimators: Vec<Estimator> = cells[0].mse.iter().map(|&(e, _)| e).collect();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" font-size="16" text-anchor="middle">Simulated MSE, p = {p}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0
    );

    // y grid at each decade
    let mut decade = ymin;
    while decade <= ymax * 1.000_001 {
        let y = ya.map(decade);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            format_tick(decade)
        );
        decade *= 10.0;
    }
    for &n in &ns {
        let x = xa.map(n as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#eeeeee"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{n}</text>"##,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        WIDTH - RIGHT - LEFT,
        HEIGHT - BOTTOM - TOP
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n (log scale)</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">MSE (log scale)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    let mut legend_y = TOP + 10.0;
    for (ri, &rho) in rhos.iter().enumerate() {
        let dash = DASHES[ri % DASHES.len()];
        for &est in &estimators {
            let mut line: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.cell.rho == rho)
                .filter_map(|c| c.mse_of(est).map(|v| (c.cell.n as f64, v)))
                .filter(|&(_, v)| v > 0.0 && v.is_finite())
                .collect();
            if line.is_empty() {
                continue;
            }
            line.sort_by(|a, b| a.0.total_cmp(&b.0));
            let pts: Vec<String> =
                line.iter().map(|&(n, v)| format!("{:.2},{:.2}", xa.map(n), ya.map(v))).collect();
            let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash_attr}/>"#,
                pts.join(" "),
                colour(est)
            );
            for &(n, v) in &line {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                    xa.map(n),
                    ya.map(v),
                    colour(est)
                );
            }
            let lx = WIDTH - RIGHT + 15.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{legend_y}" x2="{}" y2="{legend_y}" stroke="{}" stroke-width="2"{dash_attr}/><text x="{}" y="{}">{} ρ={}</text>"#,
                lx + 30.0,
                colour(est),
                lx + 36.0,
                legend_y + 4.0,
                escape(est.name()),
                rho
            );
            legend_y += 18.0;
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn format_tick(v: f64) -> String {
    if (1e-3..1e5).contains(&v) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
