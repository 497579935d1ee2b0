//! Command-line front end: subcommands, file formats and SVG figures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::actions::LinearOrthogonalAction;
use crate::blowup::{desingularize, exceptional_leaf_check, DesingularizeOptions};
use crate::error::{Error, Result};
use crate::metrics::{
    base_blowup_metric, check_isometry_outside, check_riemannian_submersion, exceptional_submersion_samples, nerve_metric_check,
    CheckReport, Euclidean, Field,
};
use crate::quotient::{self, CompareOptions, FiniteMetricSpace, GhMode, OrbitLabel, SamplingOptions};
use crate::strata;

#[derive(Parser, Debug)]
#[command(name = "desing", version, about = "Desingularize compact linear actions and compare orbit spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Action specification (JSON).
    #[arg(long)]
    pub action: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, default_value_t = 8)]
    pub max_stages: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum CheckKind {
    Submersion,
    Isometry,
    Nerve,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ModeArg {
    Exact,
    Bounds,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check an action specification.
    Validate {
        #[arg(long)]
        action: PathBuf,
    },
    /// Orbit-type stratification on a grid.
    Stratify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterated blow-up until the action is regular.
    Desingularize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metric verification on the first blow-up.
    MetricCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: CheckKind,
        #[arg(long, default_value_t = 1)]
        stage: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled orbit space as a CSV distance matrix.
    Quotient {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = quotient::DEFAULT_NEIGHBORS)]
        neighbors: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gromov-Hausdorff distance between two CSV distance matrices.
    Gh {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value = "bounds")]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quotient comparison over a schedule of tolerances.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG figure from a report or a distance matrix.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Settings shared by the numeric subcommands.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub action: PathBuf,
    pub radius: f64,
    pub grid: usize,
    pub max_stages: usize,
    pub seed: u64,
    pub metric_tol: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn new(c: &Common, metric_tol: f64, out: &Option<PathBuf>) -> Result<Self> {
        if !(c.radius > 0.0) || !(metric_tol > 0.0) {
            return Err(Error::Parse("radius and tolerances must be positive".into()));
        }
        if c.grid == 0 {
            return Err(Error::Parse("grid must be positive".into()));
        }
        Ok(RunConfig {
            action: c.action.clone(),
            radius: c.radius,
            grid: c.grid,
            max_stages: c.max_stages,
            seed: c.seed,
            metric_tol,
            out: out.clone(),
        })
    }

    fn load(&self) -> Result<LinearOrthogonalAction> {
        LinearOrthogonalAction::from_json(&std::fs::read_to_string(&self.action)?)
    }

    fn desing_options(&self, samples: usize) -> DesingularizeOptions {
        DesingularizeOptions {
            radius: self.radius,
            grid: self.grid,
            max_stages: self.max_stages,
            rho: None,
            regularity_samples: samples,
            seed: self.seed,
        }
    }
}

/// JSON text with every float written to 17 significant digits.
pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|i| i.is_number()) {
                out.push('[');
                for (k, i) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, i, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, i) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, i, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, val)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, val, indent + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn label_text(l: &OrbitLabel) -> String {
    let coords: Vec<String> = l.point.iter().map(|x| format_f64(*x)).collect();
    format!("s{}:{}", l.stage, coords.join(";"))
}

pub fn space_to_csv(x: &FiniteMetricSpace) -> String {
    let mut s = String::from("label");
    for l in &x.labels {
        s.push(',');
        s.push_str(&label_text(l));
    }
    s.push('\n');
    for (l, row) in x.labels.iter().zip(&x.distances) {
        s.push_str(&label_text(l));
        for d in row {
            s.push(',');
            s.push_str(&format_f64(*d));
        }
        s.push('\n');
    }
    s
}

pub fn space_from_csv(text: &str) -> Result<FiniteMetricSpace> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    lines.next().ok_or_else(|| Error::Parse("empty distance matrix".into()))?;
    let mut labels = Vec::new();
    let mut distances = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        let label = cells.next().unwrap_or_default();
        let (stage, point) = parse_label(label);
        labels.push(OrbitLabel { stage, point });
        let row = cells
            .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad distance {c:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        distances.push(row);
    }
    let n = distances.len();
    if distances.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("distance matrix is not square".into()));
    }
    Ok(FiniteMetricSpace { labels, distances })
}

fn parse_label(s: &str) -> (usize, Vec<f64>) {
    let Some((stage, coords)) = s.strip_prefix('s').and_then(|r| r.split_once(':')) else {
        return (0, Vec::new());
    };
    let point = coords.split(';').filter_map(|c| c.parse().ok()).collect();
    (stage.parse().unwrap_or(0), point)
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

fn tagged(kind: &str, body: Value) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("report".into(), Value::String(kind.into()));
    if let Value::Object(m) = body {
        obj.extend(m);
    }
    Value::Object(obj)
}

fn validate(path: &Path) -> Result<String> {
    let a = LinearOrthogonalAction::from_json(&std::fs::read_to_string(path)?)?;
    Ok(format!(
        "valid: n={} algebra_dim={} finite_elements={} haar_nodes={}",
        a.dim(),
        a.algebra_dim(),
        a.group.finite_elements.len(),
        a.group.haar_nodes.len()
    ))
}

fn stratify_cmd(cfg: &RunConfig) -> Result<String> {
    let a = cfg.load()?;
    let s = strata::stratify(&a, cfg.radius, cfg.grid)?;
    let frontier = strata::check_frontier(&s);
    let codim_one = strata::check_no_codim_one(&s);
    let last = s.ambient_dim - 1;
    let slice: Vec<Value> = s
        .samples
        .iter()
        .zip(&s.codims)
        .filter(|(p, _)| s.ambient_dim < 3 || p.point[last] == 0.0)
        .map(|(p, c)| json!({ "point": p.point, "codim": c }))
        .collect();
    let mut body = to_value(&s);
    body["frontier"] = to_value(&frontier);
    body["no_codim_one"] = to_value(&codim_one);
    body["codim_classes"] = to_value(&s.codim_classes());
    body["slice"] = Value::Array(slice);
    write_out(&cfg.out, &to_json(&tagged("stratification", body)))?;
    Ok(format!("stratify: {} strata, codims {:?}", s.strata.len(), s.codim_classes()))
}

fn desing_cmd(cfg: &RunConfig, samples: usize) -> Result<String> {
    let a = cfg.load()?;
    let r = desingularize(&a, &cfg.desing_options(samples))?;
    let m = r.manifold();
    let stages: Vec<Value> = m
        .stages
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let centers: Vec<Value> = st
                .centers
                .iter()
                .map(|c| json!({ "chart": m.chart(c.chart).name, "dim": c.dim(), "codim": c.codim() }))
                .collect();
            json!({ "stage": i + 1, "rho": st.rho, "charts": st.chart_count(), "centers": centers })
        })
        .collect();
    let leaf = exceptional_leaf_check(m, 200, cfg.seed, 1e-9)?;
    let max_codims: Vec<usize> = r.snapshots.iter().map(|s| s.max_codim).collect();
    let body = json!({
        "stages": r.stage_count(),
        "orbit_dim": r.orbit_dim(),
        "chart_count": m.chart_count(),
        "stage_details": stages,
        "max_codim_per_stage": max_codims,
        "final_check": to_value(&r.final_check),
        "exceptional_leaf": to_value(&leaf),
    });
    write_out(&cfg.out, &to_json(&tagged("desingularization", body)))?;
    Ok(format!("desingularize: stages={} orbit_dim={:?}", r.stage_count(), r.orbit_dim()))
}

fn metric_check_cmd(cfg: &RunConfig, kind: CheckKind, stage: usize, samples: usize) -> Result<String> {
    let a = cfg.load()?;
    let r = desingularize(&a, &cfg.desing_options(2000))?;
    let base: Field = Arc::new(Euclidean(a.dim()));
    let report: Value = if stage == 0 || r.stage_count() == 0 {
        match kind {
            CheckKind::Nerve => {
                let space = Arc::new(r.base.clone());
                let smp = strata::random_samples(&space, samples, cfg.seed);
                to_value(&nerve_metric_check(space, base, 2, &smp, cfg.seed, cfg.metric_tol)?)
            }
            _ => return Err(Error::Unsupported("submersion and isometry checks need a blown-up stage".into())),
        }
    } else {
        if stage > 1 {
            return Err(Error::Unsupported(format!("metric checks on stage {stage}")));
        }
        let space = Arc::new(r.stages[0].clone());
        let metric = base_blowup_metric(space.clone(), base.clone())?;
        let smp = strata::random_samples(&space, samples, cfg.seed);
        match kind {
            CheckKind::Submersion => {
                let rep: CheckReport = check_riemannian_submersion(&exceptional_submersion_samples(&metric, &smp)?, cfg.metric_tol)?;
                to_value(&rep)
            }
            CheckKind::Isometry => {
                let (rep, excluded) = check_isometry_outside(&space, &metric, base.as_ref(), metric.rho, &smp)?;
                let mut v = to_value(&rep);
                v["excluded"] = json!(excluded);
                v
            }
            CheckKind::Nerve => to_value(&nerve_metric_check(space, Arc::new(metric), 2, &smp, cfg.seed, cfg.metric_tol)?),
        }
    };
    let pass = report["pass"].as_bool().unwrap_or(false);
    let max = report["max_defect"].as_f64().unwrap_or(f64::NAN);
    write_out(&cfg.out, &to_json(&tagged("metric_check", report)))?;
    Ok(format!("metric-check: pass={pass} max_defect={max:e}"))
}

fn quotient_cmd(cfg: &RunConfig, samples: usize, neighbors: usize) -> Result<String> {
    let a = cfg.load()?;
    let opts = SamplingOptions { radius: cfg.radius, samples, neighbors, seed: cfg.seed, anchors: Vec::new() };
    let x = quotient::sample_orbit_space(&a, &Euclidean(a.dim()), &opts)?;
    write_out(&cfg.out, &space_to_csv(&x))?;
    Ok(format!("quotient: {} orbits, diameter {:e}", x.len(), x.diameter()))
}

fn gh_cmd(a: &Path, b: &Path, mode: ModeArg, out: &Option<PathBuf>) -> Result<String> {
    let xa = space_from_csv(&std::fs::read_to_string(a)?)?;
    let xb = space_from_csv(&std::fs::read_to_string(b)?)?;
    let mode = match mode {
        ModeArg::Exact => GhMode::Exact,
        ModeArg::Bounds => GhMode::Bounds,
    };
    let gh = quotient::gh_distance(&xa, &xb, mode, None)?;
    write_out(out, &to_json(&tagged("gh", to_value(&gh))))?;
    Ok(format!("gh: [{:e}, {:e}]", gh.lower, gh.upper))
}

fn compare_cmd(cfg: &RunConfig, eps: &[f64], samples: usize) -> Result<String> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parse("eps values must be positive".into()));
    }
    let a = cfg.load()?;
    let opts = CompareOptions {
        sampling: SamplingOptions { radius: cfg.radius, samples, seed: cfg.seed, ..Default::default() },
        grid: cfg.grid.min(8),
    };
    let r = quotient::compare_quotients(&a, Arc::new(Euclidean(a.dim())), eps, &opts)?;
    write_out(&cfg.out, &to_json(&tagged("compare", to_value(&r))))?;
    Ok(format!("compare: pass={} monotone={}", r.pass, r.monotone))
}

// ---------------------------------------------------------------------------
// SVG figures

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let span = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Axes { x: span(xs), y: span(ys) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn svg_frame(title: &str, xlabel: &str, ylabel: &str, axes: &Axes, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor, x, y) in [
        (axes.x.0, "start", MARGIN, H - MARGIN + 16.0),
        (axes.x.1, "end", W - MARGIN, H - MARGIN + 16.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#);
    }
    for (v, y) in [(axes.y.0, H - MARGIN), (axes.y.1, MARGIN + 8.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{v:.3}</text>"#, MARGIN - 4.0);
    }
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn plot_stratification(v: &Value) -> String {
    let pts: Vec<(f64, f64, u64)> = v["slice"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|e| {
                    let p = e["point"].as_array()?;
                    let x = p.first()?.as_f64()?;
                    let y = p.get(1).and_then(|y| y.as_f64()).unwrap_or(0.0);
                    Some((x, y, e["codim"].as_u64()?))
                })
                .collect()
        })
        .unwrap_or_default();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let axes = Axes::fit(&xs, &ys);
    let mut classes: Vec<u64> = pts.iter().map(|p| p.2).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut body = String::new();
    for (x, y, c) in &pts {
        let color = PALETTE[classes.iter().position(|k| k == c).unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(body, r#"<circle cx="{:.3}" cy="{:.3}" r="2" fill="{color}"/>"#, axes.px(*x), axes.py(*y));
    }
    for (i, c) in classes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN + 14.0 + 14.0 * i as f64;
        let _ = writeln!(body, r#"<circle cx="{}" cy="{}" r="4" fill="{color}"/>"#, W - MARGIN - 70.0, y - 4.0);
        let _ = writeln!(body, r#"<text x="{}" y="{y}" font-size="10">codim {c}</text>"#, W - MARGIN - 62.0);
    }
    svg_frame("stratification slice", "x", "y", &axes, &body)
}

fn polyline(axes: &Axes, pts: &[(f64, f64)], color: &str) -> String {
    let mut body = String::new();
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.3},{:.3}", axes.px(*x), axes.py(*y))).collect();
    if !path.is_empty() {
        let _ = writeln!(body, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
    }
    for (x, y) in pts {
        let _ = writeln!(body, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{color}"/>"#, axes.px(*x), axes.py(*y));
    }
    body
}

fn plot_compare(v: &Value) -> String {
    let mut pts: Vec<(f64, f64)> = v["rows"]
        .as_array()
        .map(|rows| rows.iter().filter_map(|r| Some((r["eps"].as_f64()?, r["gh_upper"].as_f64()?))).collect())
        .unwrap_or_default();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.extend(xs.iter().cloned());
    let axes = Axes::fit(&xs, &ys);
    let diag: Vec<(f64, f64)> = xs.iter().map(|&x| (x, x)).collect();
    let mut body = polyline(&axes, &diag, "#999999");
    body.push_str(&polyline(&axes, &pts, PALETTE[0]));
    svg_frame("GH upper bound vs eps", "eps", "gh upper", &axes, &body)
}

fn plot_quotient(x: &FiniteMetricSpace) -> String {
    let pts: Vec<(f64, f64)> = (0..x.len())
        .map(|j| {
            let r = x.labels[j].point.iter().map(|c| c * c).sum::<f64>().sqrt();
            (r, x.d(0, j))
        })
        .collect();
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let axes = Axes::fit(&sorted.iter().map(|p| p.0).collect::<Vec<_>>(), &sorted.iter().map(|p| p.1).collect::<Vec<_>>());
    let mut body = String::new();
    for (r, d) in &sorted {
        let _ = writeln!(body, r#"<circle cx="{:.3}" cy="{:.3}" r="2" fill="{}"/>"#, axes.px(*r), axes.py(*d), PALETTE[0]);
    }
    svg_frame("distance from the first orbit", "|x|", "d_X", &axes, &body)
}

fn empty_plot() -> String {
    svg_frame("", "", "", &Axes { x: (0.0, 1.0), y: (0.0, 1.0) }, "")
}

pub fn plot(input: &Path, out: &Path) -> Result<String> {
    let text = std::fs::read_to_string(input)?;
    let (svg, kind) = if text.trim().is_empty() {
        (empty_plot(), "empty")
    } else if input.extension().is_some_and(|e| e == "csv") {
        (plot_quotient(&space_from_csv(&text)?), "quotient")
    } else {
        let v: Value = serde_json::from_str(&text)?;
        match v.get("report").and_then(|k| k.as_str()) {
            None if v.as_object().is_some_and(|o| o.is_empty()) => (empty_plot(), "empty"),
            Some("stratification") => (plot_stratification(&v), "stratification"),
            Some("compare") => (plot_compare(&v), "gh-vs-eps"),
            other => return Err(Error::UnknownReportKind(other.unwrap_or("missing").into())),
        }
    };
    std::fs::write(out, svg)?;
    Ok(format!("plot: {kind} -> {}", out.display()))
}

pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Validate { action } => validate(&action),
        Command::Stratify { common, out } => stratify_cmd(&RunConfig::new(&common, 1e-9, &out)?),
        Command::Desingularize { common, samples, out } => desing_cmd(&RunConfig::new(&common, 1e-9, &out)?, samples),
        Command::MetricCheck { common, kind, stage, tol, samples, out } => {
            metric_check_cmd(&RunConfig::new(&common, tol, &out)?, kind, stage, samples)
        }
        Command::Quotient { common, samples, neighbors, out } => quotient_cmd(&RunConfig::new(&common, 1e-9, &out)?, samples, neighbors),
        Command::Gh { a, b, mode, out } => gh_cmd(&a, &b, mode, &out),
        Command::Compare { common, eps, samples, out } => compare_cmd(&RunConfig::new(&common, 1e-9, &out)?, &eps, samples),
        Command::Plot { input, out } => plot(&input, &out),
    }
}

pub fn error_json(e: &Error) -> String {
    let v = json!({ "error": { "code": e.code(), "message": e.to_string(), "context": e.context() } });
    serde_json::to_string(&v).expect("error object serializes")
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    crate::par::init_from_env();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}
