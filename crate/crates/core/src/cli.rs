//! Config-driven experiment runner: solve (or reload cached snapshots), run
//! the configured checks, and write reports, plots and a summary.
//!
//! Exit codes: 0 when every assert-mode check passes, 1 when one fails, 2
//! when the run cannot be carried out (bad config, I/O, solver failure).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::convexity::{
    blowup_convergence, blowup_runs, check_borell_inequality, check_monotonicity, check_segment_monotonicity, scan_no_interior_max,
    search_p_violation, verify_parabolic_convexity, verify_strong_convexity, BlowupResolution, BlowupSet, CaloricFunction, CheckOptions,
    ConvexityReport, OptimizerSpec, PatchSpec,
};
use crate::dump::{self, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::field::{extract_level, ScalarField};
use crate::geometry::{Point, RingDomain, RingSpec, SpaceTimePoint};
use crate::solver::{solve_heat, GridSpec, SpaceTimeField};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Failures count toward the exit status.
    #[default]
    Assert,
    /// Outcomes are reported only.
    Exploratory,
}

/// Top-level experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Snapshot cache directory; `None` means `<output>/cache`.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub mode: Mode,
    pub ring: RingSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub plots: PlotSpec,
    pub checks: Vec<CheckConfig>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSpec {
    pub enabled: bool,
    /// Slice times of the spatial plots; empty means three evenly spaced
    /// times in the admissible window.
    pub times: Vec<f64>,
    pub levels: Vec<f64>,
    /// Time samples of the `(x₁, t)` curve in one dimension.
    pub space_time_samples: usize,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            enabled: true,
            times: Vec::new(),
            levels: vec![0.2, 0.5, 0.8],
            space_time_samples: 64,
        }
    }
}

/// One configured check. Common keys sit beside the check's own keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCheck")]
pub struct CheckConfig {
    /// Report file stem; defaults to the check tag.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Overrides the run mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Overrides `ε_conv(h)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub negate: bool,
    #[serde(flatten)]
    pub kind: CheckKind,
}

#[derive(Deserialize)]
struct RawCheck {
    name: Option<String>,
    mode: Option<Mode>,
    tolerance: Option<f64>,
    #[serde(default)]
    negate: bool,
    #[serde(flatten)]
    rest: toml::Table,
}

impl TryFrom<RawCheck> for CheckConfig {
    type Error = String;

    fn try_from(raw: RawCheck) -> std::result::Result<Self, String> {
        let kind = CheckKind::deserialize(toml::Value::Table(raw.rest)).map_err(|e| e.message().to_string())?;
        Ok(CheckConfig {
            name: raw.name,
            mode: raw.mode,
            tolerance: raw.tolerance,
            negate: raw.negate,
            kind,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    Monotonicity {
        #[serde(default = "default_budget")]
        budget: usize,
    },
    Borell {
        #[serde(default = "default_budget")]
        budget: usize,
    },
    SegmentMonotonicity {
        x: [f64; 2],
        y: [f64; 2],
        s: f64,
        t: f64,
        #[serde(default = "default_segment_budget")]
        budget: usize,
    },
    ParabolicConvexity {
        #[serde(default = "default_levels")]
        levels: Vec<f64>,
        #[serde(default)]
        window: Option<(f64, f64)>,
        /// Pairs per level.
        #[serde(default = "default_pair_budget")]
        budget: usize,
    },
    StrongConvexity {
        patch: PatchSpec,
    },
    NoInteriorMax {
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_scan_budget")]
        budget: usize,
        #[serde(default)]
        caloric: Vec<CaloricFunction>,
        #[serde(default)]
        optimizer: OptimizerSpec,
    },
    PViolation {
        p: f64,
        #[serde(default = "default_search_budget")]
        budget: usize,
        #[serde(default)]
        optimizer: OptimizerSpec,
    },
    Blowup {
        z: [f64; 2],
        #[serde(default = "default_scales")]
        scales: Vec<f64>,
        #[serde(default)]
        set: BlowupSet,
        #[serde(default)]
        resolution: BlowupResolution,
    },
}

fn default_budget() -> usize {
    10_000
}

fn default_segment_budget() -> usize {
    200
}

fn default_levels() -> Vec<f64> {
    vec![0.2, 0.5, 0.8]
}

fn default_pair_budget() -> usize {
    4000
}

fn default_p() -> f64 {
    2.0
}

fn default_delta() -> f64 {
    1e-3
}

fn default_scan_budget() -> usize {
    200
}

fn default_search_budget() -> usize {
    2000
}

fn default_scales() -> Vec<f64> {
    vec![0.5, 0.25, 0.125, 0.0625]
}

impl CheckKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CheckKind::Monotonicity { .. } => "monotonicity",
            CheckKind::Borell { .. } => "borell",
            CheckKind::SegmentMonotonicity { .. } => "segment_monotonicity",
            CheckKind::ParabolicConvexity { .. } => "parabolic_convexity",
            CheckKind::StrongConvexity { .. } => "strong_convexity",
            CheckKind::NoInteriorMax { .. } => "no_interior_max",
            CheckKind::PViolation { .. } => "p_violation",
            CheckKind::Blowup { .. } => "blowup",
        }
    }
}

/// Parse and validate a TOML config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn valid_stem(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.checks.is_empty() {
            return bad("at least one check is required".into());
        }
        self.grid.validate()?;
        if self.ring.outer.dim() != self.ring.inner.dim() {
            return bad("outer and inner bodies have different dimensions".into());
        }
        let mut seen = BTreeSet::new();
        for name in self.check_names() {
            if !valid_stem(&name) {
                return bad(format!("check name {name:?} must be 1-64 characters from [A-Za-z0-9_-]"));
            }
            if !seen.insert(name.clone()) {
                return bad(format!("duplicate check name {name:?}"));
            }
        }
        for c in &self.checks {
            if c.tolerance.is_some_and(|t| !t.is_finite()) {
                return bad(format!("tolerance of {} must be finite", c.kind.tag()));
            }
        }
        let p = &self.plots;
        if p.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) || p.times.iter().any(|t| !t.is_finite()) {
            return bad("plot levels must lie in (0, 1) and plot times must be finite".into());
        }
        Ok(())
    }

    /// Report stems, one per check, in order. Unnamed checks take their tag,
    /// with `_2`, `_3`, ... appended on repeats.
    pub fn check_names(&self) -> Vec<String> {
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        self.checks
            .iter()
            .map(|c| match &c.name {
                Some(n) => n.clone(),
                None => {
                    let tag = c.kind.tag();
                    let k = count.entry(tag).or_insert(0);
                    *k += 1;
                    if *k == 1 {
                        tag.to_string()
                    } else {
                        format!("{tag}_{k}")
                    }
                }
            })
            .collect()
    }
}

/// SHA-256 of the canonical JSON of `(format version, ring, grid)`.
pub fn cache_key(ring: &RingSpec, grid: &GridSpec) -> String {
    let body = serde_json::to_vec(&json!({ "version": FORMAT_VERSION, "ring": ring, "grid": grid })).expect("specs serialize");
    hex::encode(Sha256::digest(&body))
}

/// Reload the snapshot dump keyed by `(ring, grid)` from `dir`, or solve and
/// store it. The flag tells whether the cache was hit.
pub fn load_or_solve(ring: &RingDomain, grid: &GridSpec, dir: &Path) -> Result<(SpaceTimeField, bool)> {
    let spec = ring.spec();
    let path = dir.join(format!("{}.rhsnap", cache_key(&spec, grid)));
    if let Ok(field) = dump::read_dump(&path) {
        if field.ring().spec() == spec && field.grid() == grid && !field.is_exploratory() {
            return Ok((field, true));
        }
    }
    let field = solve_heat(ring, grid, None)?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    dump::write_dump(&tmp, &field)?;
    std::fs::rename(&tmp, &path)?;
    Ok((field, false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        ErrorInfo {
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub check: String,
    pub mode: Mode,
    pub asserted: bool,
    pub pass: bool,
    pub worst: Option<f64>,
    pub tolerance: Option<f64>,
    pub margin: Option<f64>,
    pub samples: usize,
    pub report: String,
    pub csv: Option<String>,
    pub error: Option<ErrorInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub dim: usize,
    pub spacing: f64,
    pub window: (f64, f64),
    pub snapshots: usize,
    pub fluid_nodes: usize,
    pub cache_key: String,
}

/// Timing and cache facts; the only part of the summary that may differ
/// between identical runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub cache_hit: bool,
    pub solve_s: f64,
    pub checks_s: Vec<f64>,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub mode: Mode,
    pub ring: RingSpec,
    pub grid: GridSpec,
    pub field: FieldSummary,
    pub checks: Vec<CheckSummary>,
    pub plots: Vec<String>,
    pub passed: bool,
    pub exit_code: i32,
    pub runtime: RuntimeInfo,
}

impl Summary {
    /// JSON without the runtime block.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.runtime = RuntimeInfo::default();
        serde_json::to_string(&c).expect("summary serializes")
    }
}

fn run_check(field: &SpaceTimeField, kind: &CheckKind, opts: &CheckOptions) -> Result<ConvexityReport> {
    match kind {
        CheckKind::Monotonicity { budget } => Ok(check_monotonicity(field, *budget, opts)),
        CheckKind::Borell { budget } => Ok(check_borell_inequality(field, *budget, opts)),
        CheckKind::SegmentMonotonicity { x, y, s, t, budget } => {
            check_segment_monotonicity(field, Point::new(x[0], x[1]), SpaceTimePoint::at(y[0], y[1], *t), *s, *budget, opts)
        }
        CheckKind::ParabolicConvexity { levels, window, budget } => verify_parabolic_convexity(field, levels, *window, *budget, opts),
        CheckKind::StrongConvexity { patch } => verify_strong_convexity(field, patch, opts),
        CheckKind::NoInteriorMax {
            p,
            delta,
            budget,
            caloric,
            optimizer,
        } => scan_no_interior_max(field, *p, caloric, *delta, *budget, optimizer, opts),
        CheckKind::PViolation { p, budget, optimizer } => search_p_violation(field, *p, *budget, optimizer, opts),
        CheckKind::Blowup { z, scales, set, resolution } => {
            let runs = blowup_runs(field.ring(), scales, set, resolution)?;
            let r = blowup_convergence(&runs, Point::new(z[0], z[1]), set)?;
            Ok(r.to_report(field, opts))
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Run a parsed experiment, writing everything under `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    let started = Instant::now();
    cfg.validate()?;
    let out = &cfg.output;
    std::fs::create_dir_all(out)?;
    let ring = RingDomain::from_spec(&cfg.ring)?;
    let cache_dir = cfg.cache.clone().unwrap_or_else(|| out.join("cache"));
    let solve_started = Instant::now();
    let (field, cache_hit) = load_or_solve(&ring, &cfg.grid, &cache_dir)?;
    let solve_s = solve_started.elapsed().as_secs_f64();
    eprintln!(
        "field: h = {}, {} snapshots, {} ({:.1} s)",
        cfg.grid.h,
        field.snapshot_count(),
        if cache_hit { "cached" } else { "solved" },
        solve_s
    );
    for w in field.warnings() {
        eprintln!("warning: {w}");
    }

    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut checks_s = Vec::new();
    for (c, name) in cfg.checks.iter().zip(cfg.check_names()) {
        let mode = c.mode.unwrap_or(cfg.mode);
        let opts = CheckOptions {
            seed: cfg.seed,
            tolerance: c.tolerance,
            negate: c.negate,
        };
        let t0 = Instant::now();
        let outcome = run_check(&field, &c.kind, &opts);
        checks_s.push(t0.elapsed().as_secs_f64());
        let report_file = format!("{name}.json");
        let summary = match outcome {
            Ok(mut r) => {
                r.asserted = r.asserted && mode == Mode::Assert;
                let csv_file = format!("{name}_worst.csv");
                write_json(&out.join(&report_file), &r)?;
                std::fs::write(out.join(&csv_file), r.worst_csv())?;
                let s = CheckSummary {
                    name: name.clone(),
                    check: r.check.clone(),
                    mode,
                    asserted: r.asserted,
                    pass: r.pass,
                    worst: Some(r.worst),
                    tolerance: Some(r.tolerance),
                    margin: r.margin,
                    samples: r.samples,
                    report: report_file,
                    csv: Some(csv_file),
                    error: None,
                };
                reports.push(r);
                s
            }
            Err(e) => {
                let info = ErrorInfo::from(&e);
                let asserted = mode == Mode::Assert;
                write_json(
                    &out.join(&report_file),
                    &json!({ "check": c.kind.tag(), "name": name, "pass": false, "asserted": asserted, "error": info }),
                )?;
                CheckSummary {
                    name: name.clone(),
                    check: c.kind.tag().into(),
                    mode,
                    asserted,
                    pass: false,
                    worst: None,
                    tolerance: None,
                    margin: None,
                    samples: 0,
                    report: report_file,
                    csv: None,
                    error: Some(info),
                }
            }
        };
        eprintln!(
            "{:<24} {:<12} {:<4} worst {}",
            summary.name,
            if summary.asserted { "assert" } else { "exploratory" },
            if summary.pass { "PASS" } else { "FAIL" },
            summary.worst.map_or_else(|| "error".to_string(), |w| format!("{w:.3e}")),
        );
        checks.push(summary);
    }

    let plots = if cfg.plots.enabled { write_plots(&field, &cfg.plots, &reports, out)? } else { Vec::new() };
    let passed = checks.iter().all(|c| c.pass || !c.asserted);
    let (lo, hi) = field.time_window();
    let summary = Summary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        mode: cfg.mode,
        ring: cfg.ring.clone(),
        grid: cfg.grid.clone(),
        field: FieldSummary {
            dim: field.dim(),
            spacing: field.spacing(),
            window: (lo, hi),
            snapshots: field.snapshot_count(),
            fluid_nodes: field.classification().fluid_count(),
            cache_key: cache_key(&cfg.ring, &cfg.grid),
        },
        checks,
        plots,
        passed,
        exit_code: if passed { EXIT_PASS } else { EXIT_FAIL },
        runtime: RuntimeInfo {
            cache_hit,
            solve_s,
            checks_s,
            total_s: started.elapsed().as_secs_f64(),
        },
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Machine-readable failure document for runs that could not complete.
pub fn failure_report(e: &Error) -> serde_json::Value {
    json!({ "status": "error", "error": ErrorInfo::from(e), "exit_code": EXIT_ERROR })
}

/// `run` subcommand: exit code plus the summary when the run completed.
pub fn run(config: &Path, output: Option<&Path>) -> (i32, Option<Summary>) {
    let result = load_config(config).and_then(|mut cfg| {
        if let Some(o) = output {
            cfg.output = o.to_path_buf();
        }
        run_experiment(&cfg).map_err(|e| (e, Some(cfg.output.clone()))).map_err(|(e, dir)| {
            if let Some(dir) = dir {
                let _ = std::fs::create_dir_all(&dir).and_then(|_| {
                    std::fs::write(dir.join("failure.json"), serde_json::to_string_pretty(&failure_report(&e)).unwrap_or_default())
                });
            }
            e
        })
    });
    match result {
        Ok(s) => (s.exit_code, Some(s)),
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", failure_report(&e));
            (EXIT_ERROR, None)
        }
    }
}

/// Pretty-print `summary.json` in `dir`.
pub fn render_summary(dir: &Path) -> Result<String> {
    let text = std::fs::read_to_string(dir.join("summary.json"))?;
    let s: Summary = serde_json::from_str(&text)?;
    let mut out = String::new();
    let _ = writeln!(out, "{} (seed {}, {:?} mode)", s.name, s.seed, s.mode);
    let _ = writeln!(
        out,
        "field: n = {}, h = {}, t in [{:.4}, {:.4}], {} snapshots, {} fluid nodes",
        s.field.dim, s.field.spacing, s.field.window.0, s.field.window.1, s.field.snapshots, s.field.fluid_nodes
    );
    let _ = writeln!(out, "{:<24} {:<22} {:<12} {:<6} {:>12} {:>12}", "name", "check", "mode", "result", "worst", "tolerance");
    for c in &s.checks {
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
        let result = match (&c.error, c.pass) {
            (Some(_), _) => "ERROR",
            (None, true) => "PASS",
            (None, false) => "FAIL",
        };
        let _ = writeln!(
            out,
            "{:<24} {:<22} {:<12} {:<6} {:>12} {:>12}",
            c.name,
            c.check,
            if c.asserted { "assert" } else { "exploratory" },
            result,
            num(c.worst),
            num(c.tolerance)
        );
        if let Some(e) = &c.error {
            let _ = writeln!(out, "    {}: {}", e.kind, e.message);
        }
    }
    let _ = writeln!(out, "overall: {} (exit {})", if s.passed { "PASS" } else { "FAIL" }, s.exit_code);
    Ok(out)
}

/// `compare` subcommand output.
pub fn compare_dumps(a: &Path, b: &Path, t_from: f64) -> Result<dump::CompareReport> {
    let fa = dump::read_dump(a)?;
    let fb = dump::read_dump(b)?;
    dump::compare_with(&fa, &fb, t_from)
}

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const SIZE: f64 = 520.0;
const PAD: f64 = 30.0;

struct Frame {
    lo: [f64; 2],
    scale: f64,
    height: f64,
}

impl Frame {
    fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let scale = (SIZE - 2.0 * PAD) / span;
        Frame {
            lo,
            scale,
            height: (hi[1] - lo[1]) * scale + 2.0 * PAD,
        }
    }

    fn width(&self, hi: f64) -> f64 {
        (hi - self.lo[0]) * self.scale + 2.0 * PAD
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (PAD + (x - self.lo[0]) * self.scale, self.height - PAD - (y - self.lo[1]) * self.scale)
    }
}

fn polyline(frame: &Frame, pts: &[Point], closed: bool, style: &str) -> String {
    let mut d = String::new();
    for (k, p) in pts.iter().enumerate() {
        let (x, y) = frame.map(p[0], p[1]);
        let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
    }
    if closed {
        d.push('Z');
    }
    format!("<path d=\"{}\" {style}/>\n", d.trim_end())
}

fn svg_document(width: f64, height: f64, title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">{title}</text>\n{body}</svg>\n"
    )
}

/// Spatial level curves at time `t` over the ring, with the argmax pairs of
/// the given reports.
pub fn spatial_svg(field: &SpaceTimeField, levels: &[f64], t: f64, reports: &[ConvexityReport]) -> Result<String> {
    let ring = field.ring();
    let outline = ring.outer().boundary_samples();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in outline {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let frame = Frame::new(lo, hi);
    let mut body = String::new();
    body += &polyline(&frame, outline, true, "fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"");
    body += &polyline(&frame, ring.inner().boundary_samples(), true, "fill=\"#dddddd\" stroke=\"black\" stroke-width=\"1.5\"");
    for (k, &mu) in levels.iter().enumerate() {
        let c = extract_level(field, mu, t)?;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(body, "<g stroke=\"{color}\" stroke-width=\"1.2\"><title>u = {mu}</title>");
        for s in &c.segments {
            let (a, b) = (frame.map(s[0][0], s[0][1]), frame.map(s[1][0], s[1][1]));
            let _ = writeln!(body, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/>", a.0, a.1, b.0, b.1);
        }
        body += "</g>\n";
    }
    body += &markers(&frame, reports);
    let width = frame.width(hi[0]);
    Ok(svg_document(width, frame.height, &format!("level curves at t = {t:.4}"), &body))
}

fn markers(frame: &Frame, reports: &[ConvexityReport]) -> String {
    let mut body = String::new();
    for r in reports {
        let Some(w) = r.argmax else { continue };
        let _ = writeln!(body, "<g fill=\"none\" stroke=\"black\"><title>{} worst {:.3e}</title>", r.check, r.worst);
        let a = frame.map(w.x.x[0], w.x.x[1]);
        let _ = writeln!(body, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\"/>", a.0, a.1);
        if let Some(y) = w.y {
            let b = frame.map(y.x[0], y.x[1]);
            let _ = writeln!(body, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"7\" height=\"7\"/>", b.0 - 3.5, b.1 - 3.5);
            let _ = writeln!(
                body,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke-dasharray=\"3,3\"/>",
                a.0, a.1, b.0, b.1
            );
        }
        body += "</g>\n";
    }
    body
}

/// Level curves of a one-dimensional run in the `(x₁, t)` plane.
pub fn space_time_svg(field: &SpaceTimeField, levels: &[f64], samples: usize, reports: &[ConvexityReport]) -> Result<String> {
    let (t0, t1) = field.time_window();
    let outline = field.ring().outer().boundary_samples();
    let lo_x = outline.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi_x = outline.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let centre = field.ring().inner().reference_point()[0];
    let frame = Frame::new([lo_x, 0.0], [hi_x, t1]);
    let mut body = String::new();
    let n = samples.max(2);
    for (k, &mu) in levels.iter().enumerate() {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for i in 0..n {
            let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
            let c = extract_level(field, mu, t)?;
            for p in c.points {
                let side = if p[0] < centre { &mut left } else { &mut right };
                side.push(Point::new(p[0], t));
            }
        }
        let style = format!("fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"", PALETTE[k % PALETTE.len()]);
        for side in [left, right] {
            if side.len() >= 2 {
                body += &polyline(&frame, &side, false, &style);
            }
        }
    }
    let mapped: Vec<ConvexityReport> = reports
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(w) = r.argmax.as_mut() {
                w.x.x[1] = w.x.t;
                if let Some(y) = w.y.as_mut() {
                    y.x[1] = y.t;
                }
            }
            r
        })
        .collect();
    body += &markers(&frame, &mapped);
    let width = frame.width(hi_x);
    Ok(svg_document(width, frame.height, "level curves in the (x1, t) plane", &body))
}

fn plot_times(field: &SpaceTimeField, spec: &PlotSpec) -> Vec<f64> {
    let (lo, hi) = field.time_window();
    if spec.times.is_empty() {
        vec![lo + 0.25 * (hi - lo), lo + 0.5 * (hi - lo), hi]
    } else {
        spec.times.iter().map(|t| t.clamp(lo, hi)).collect()
    }
}

fn write_plots(field: &SpaceTimeField, spec: &PlotSpec, reports: &[ConvexityReport], out: &Path) -> Result<Vec<String>> {
    let pairs: Vec<ConvexityReport> = reports.iter().filter(|r| r.argmax.is_some_and(|w| w.y.is_some())).cloned().collect();
    let mut files = Vec::new();
    if field.dim() == 1 {
        let name = "level_xt.svg".to_string();
        std::fs::write(out.join(&name), space_time_svg(field, &spec.levels, spec.space_time_samples, &pairs)?)?;
        files.push(name);
    } else {
        for (k, t) in plot_times(field, spec).into_iter().enumerate() {
            let name = format!("levels_t{k}.svg");
            std::fs::write(out.join(&name), spatial_svg(field, &spec.levels, t, &pairs)?)?;
            files.push(name);
        }
    }
    Ok(files)
}

#[derive(Parser, Debug)]
#[command(name = "ringheat", version, about = "Heat equation on convex rings: solve, verify, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Nodal L∞/L² differences between two snapshot dumps.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Ignore snapshots before this time.
        #[arg(long, default_value_t = 0.0)]
        from: f64,
    },
    /// Pretty-print the summary of a finished run.
    Report { dir: PathBuf },
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { config, output } => run(&config, output.as_deref()).0,
        Command::Compare { a, b, from } => match compare_dumps(&a, &b, from) {
            Ok(r) => {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("error: {e}");
                println!("{}", failure_report(&e));
                EXIT_ERROR
            }
        },
        Command::Report { dir } => match render_summary(&dir) {
            Ok(s) => {
                print!("{s}");
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("error: {e}");
                println!("{}", failure_report(&e));
                EXIT_ERROR
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [ring]
        outer = { kind = "disk", radius = 1.0 }
        inner = { kind = "disk", radius = 0.3 }
        [grid]
        h = 0.05
        dt = 0.01
        t_final = 0.2
        [[checks]]
        check = "monotonicity"
        budget = 100
        [[checks]]
        check = "p_violation"
        p = 3.0
        mode = "exploratory"
        [[checks]]
        check = "monotonicity"
        negate = true
    "#;

    #[test]
    fn parses_common_and_specific_keys() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.checks.len(), 3);
        assert_eq!(cfg.checks[1].mode, Some(Mode::Exploratory));
        assert!(matches!(cfg.checks[1].kind, CheckKind::PViolation { budget: 2000, .. }));
        assert!(cfg.checks[2].negate);
        assert_eq!(cfg.check_names(), ["monotonicity", "p_violation", "monotonicity_2"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("budget = 100", "budgett = 100");
        let e = parse_config(&bad).unwrap_err();
        assert_eq!(e.kind(), "Config");
        assert!(e.to_string().contains("budgett"), "{e}");
        let bad = MINIMAL.replace("seed = 3", "seed = 3\ncolour = 1");
        assert!(parse_config(&bad).is_err());
        let bad = MINIMAL.replace("\"monotonicity\"\n        budget", "\"monotony\"\n        budget");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn documented_config_parses() {
        let readme = include_str!("../../../README.md");
        let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
        let cfg = parse_config(block).unwrap();
        assert_eq!(cfg.checks.len(), 1);
        parse_config(include_str!("../../../configs/disks.toml")).unwrap();
    }

    #[test]
    fn cache_key_depends_on_ring_and_grid() {
        let cfg = parse_config(MINIMAL).unwrap();
        let k = cache_key(&cfg.ring, &cfg.grid);
        assert_eq!(k.len(), 64);
        assert_eq!(k, cache_key(&cfg.ring, &cfg.grid));
        let mut g = cfg.grid.clone();
        g.h = 0.04;
        assert_ne!(k, cache_key(&cfg.ring, &g));
    }
}
