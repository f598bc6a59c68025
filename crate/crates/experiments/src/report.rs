//! Study outputs: CSV tables, JSON traces and SVG density plots.
//!
//! Numbers are written with fixed decimals so that a fixed seed block gives
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sem_core::mechanism::RunTrace;

use crate::convergence::ConvergenceReport;
use crate::perturbation::{PerturbationReport, PerturbationSummary};
use crate::table1::{CellSummary, RunSummary, Table1};

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub const TABLE1_HEADER: [&str; 5] = ["mechanism", "n", "mean", "sd", "seeds"];
pub const RUNS_HEADER: [&str; 5] = ["mechanism", "n", "seed", "placement_rate", "max_residual"];
pub const CONVERGENCE_HEADER: [&str; 5] = ["n", "seeds", "median", "tail", "epsilon"];
pub const PERTURBATION_HEADER: [&str; 7] =
    ["market", "perturbations", "failures", "base_ties", "average_distance", "preserved_ties", "average_clearing_error"];

pub fn write_table1<W: Write>(cells: &[CellSummary], w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TABLE1_HEADER)?;
    for c in cells {
        out.write_record([c.mechanism.name().to_string(), c.n.to_string(), f6(c.mean), f6(c.sd), c.seeds.to_string()])?;
    }
    out.flush()
}

/// One row per run. Wall time is left out so the file is reproducible.
pub fn write_runs<W: Write>(runs: &[RunSummary], w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RUNS_HEADER)?;
    for r in runs {
        let worst = r.residuals.iter().copied().fold(0.0, f64::max);
        out.write_record([r.mechanism.name().to_string(), r.n.to_string(), r.seed.to_string(), f6(r.placement_rate), format!("{worst:.3e}")])?;
    }
    out.flush()
}

pub fn write_convergence<W: Write>(report: &ConvergenceReport, w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CONVERGENCE_HEADER)?;
    for r in &report.rows {
        out.write_record([r.n.to_string(), r.distances.len().to_string(), f6(r.median), f6(r.tail), f6(report.epsilon)])?;
    }
    out.flush()
}

/// Per-market rows followed by an `all` row with the aggregate.
pub fn write_perturbation<W: Write>(reports: &[PerturbationReport], summary: &PerturbationSummary, w: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PERTURBATION_HEADER)?;
    for r in reports {
        out.write_record([
            r.market.to_string(),
            r.perturbations.len().to_string(),
            r.failures.to_string(),
            r.base_ties.len().to_string(),
            f6(r.average_distance()),
            r.preserved_share().map(f6).unwrap_or_default(),
            f6(r.average_clearing_error()),
        ])?;
    }
    if !reports.is_empty() {
        let done: usize = reports.iter().map(|r| r.perturbations.len()).sum();
        let ties: usize = reports.iter().map(|r| r.base_ties.len()).sum();
        out.write_record([
            "all".to_string(),
            done.to_string(),
            summary.failures.to_string(),
            ties.to_string(),
            f6(summary.average_distance),
            f6(summary.preserved_ties),
            f6(summary.average_clearing_error),
        ])?;
    }
    out.flush()
}

/// Writes each trace as `<mechanism>-n<n>-seed<seed>.json` under `dir`.
pub fn write_traces(dir: &Path, runs: &[RunSummary], traces: &[RunTrace]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (r, t) in runs.iter().zip(traces) {
        fs::write(dir.join(format!("{}-n{}-seed{}.json", r.mechanism.name(), r.n, r.seed)), t.to_json())?;
    }
    Ok(())
}

/// Gaussian kernel density with Silverman's bandwidth, evaluated on `grid`.
pub fn kernel_density(xs: &[f64], grid: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return vec![0.0; grid.len()];
    }
    let s = crate::stats::sd(xs);
    let h = if s > 0.0 { 1.06 * s * (xs.len() as f64).powf(-0.2) } else { 0.01 };
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter().map(|g| norm * xs.iter().map(|x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>()).collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Density curves of placement rates on [lo, hi], one per labelled series.
pub fn density_svg(title: &str, series: &[(String, Vec<f64>)], lo: f64, hi: f64) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let grid: Vec<f64> = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect();
    let curves: Vec<Vec<f64>> = series.iter().map(|(_, xs)| kernel_density(xs, &grid)).collect();
    let top = curves.iter().flatten().copied().fold(0.0, f64::max).max(1e-9);
    let px = |x: f64| pad + (x - lo) / (hi - lo) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - y / top * (h - 2.0 * pad);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - pad, w - pad);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    for k in 0..=4 {
        let x = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{x:.2}</text>"#, px(x), h - pad + 18.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">placement rate</text>"#, w / 2.0, h - 10.0);
    let _ = writeln!(svg, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {0})">density</text>"#, h / 2.0);
    for (k, ((label, _), ys)) in series.iter().zip(&curves).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = grid.iter().zip(ys).map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "));
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - pad - 120.0, w - pad - 100.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{label}</text>"#, w - pad - 95.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// `table1.csv`, `runs.csv`, one density plot per replica size and, when
/// kept, the traces.
pub fn emit_table1(dir: &Path, t: &Table1) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_table1(&t.cells, fs::File::create(dir.join("table1.csv"))?)?;
    write_runs(&t.runs, fs::File::create(dir.join("runs.csv"))?)?;
    let mut ns: Vec<u64> = t.cells.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut mechanisms = Vec::new();
    for c in &t.cells {
        if !mechanisms.contains(&c.mechanism) {
            mechanisms.push(c.mechanism);
        }
    }
    for n in ns {
        let series: Vec<(String, Vec<f64>)> = mechanisms.iter().map(|&m| (m.name().to_string(), t.rates(m, n))).collect();
        fs::write(dir.join(format!("density_n{n}.svg")), density_svg(&format!("Density of placement rates, n = {n}"), &series, 0.0, 1.0))?;
    }
    if !t.traces.is_empty() {
        write_traces(&dir.join("traces"), &t.runs, &t.traces)?;
    }
    Ok(())
}
