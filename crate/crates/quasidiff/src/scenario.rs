//! Scenario-driven experiment runner: plain-text configs in, seeded runs out.
//!
//! A scenario file is a set of `[section]` blocks holding `key = value` lines
//! (`#` starts a comment). Every run validates its coefficient field with a
//! 10⁴-sample ellipticity sweep, executes one experiment, and writes
//! `report.json`, `summary.txt`, and tab-separated plot data into the output
//! directory. Reports are byte-identical across reruns of the same config and
//! seed, up to the timestamp field.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::coefficients::{
    validate_ellipticity, CoefficientField, EllipticityCertificate, FieldRegistry, SampleBox,
};
use crate::error::{Error, Result};
use crate::estimators::{
    feller_scenario, harmonic_measure, harmonic_measure_report, hitting_profile,
    martingale_residual, parabolic_exit_report, parabolic_kernel, regularity_probe, semigroup,
    semigroup_on_points, BoundaryTarget, HittingParams, ParabolicTarget, Payoff, SpaceTimePayoff,
    TestFunction, Verdict,
};
use crate::geometry::{Ball, Domain, GammaSet, ParabolicCylinder, SpaceTime};
use crate::rng::{derive_seed, CounterStream};
use crate::sde::{simulate_path, SimConfig};
use crate::stats::Estimate;
use crate::verifiers::{
    barrier_check, cascade_exponent, cascade_ratios, harnack_sup_inf, holder_fit,
    lemma_paraboloid_drift_check, ObliqueBarrier,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Exit-status taxonomy for CI pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Everything ran and no reliability flags were raised.
    Success,
    /// Config malformed, field invalid, or an estimator precondition failed.
    PreconditionFailure,
    /// The run completed but carries warnings (censoring, inconclusive
    /// verdicts, unstable fits).
    ReliabilityWarning,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::PreconditionFailure => 2,
            RunStatus::ReliabilityWarning => 3,
        }
    }
}

/// Options injected by the CLI on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dump_paths: bool,
}

/// Outcome handed back to the CLI.
#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub report_path: PathBuf,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

type Section = BTreeMap<String, String>;

/// Raw parsed config: section name -> key -> value.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, Section>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::ConfigParse {
                    line: lineno + 1,
                    detail: "unterminated section header".into(),
                })?;
                let name = name.trim().to_string();
                if name.is_empty() {
                    return Err(Error::ConfigParse {
                        line: lineno + 1,
                        detail: "empty section name".into(),
                    });
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::ConfigParse {
                line: lineno + 1,
                detail: format!("expected `key = value`, got `{line}`"),
            })?;
            let section = current.clone().ok_or(Error::ConfigParse {
                line: lineno + 1,
                detail: "key before any [section]".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::ConfigParse {
                    line: lineno + 1,
                    detail: "empty key".into(),
                });
            }
            sections
                .get_mut(&section)
                .unwrap()
                .insert(key, value.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .get(name)
            .ok_or_else(|| Error::input(format!("missing [{name}] section")))
    }

    fn section_or_empty(&self, name: &str) -> Section {
        self.sections.get(name).cloned().unwrap_or_default()
    }

    /// Canonical serialization: sections and keys sorted, one `key = value`
    /// per line. Basis of the platform-stable config hash.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (sec, kv) in &self.sections {
            let _ = writeln!(out, "[{sec}]");
            for (k, v) in kv {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut s = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            let _ = write!(s, "{byte:02x}");
        }
        s
    }
}

fn get_str<'a>(sec: &'a Section, key: &str) -> Result<&'a str> {
    sec.get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::input(format!("missing key `{key}`")))
}

fn get_f64(sec: &Section, key: &str) -> Result<f64> {
    get_str(sec, key)?
        .parse()
        .map_err(|_| Error::input(format!("key `{key}` is not a number")))
}

fn get_f64_or(sec: &Section, key: &str, default: f64) -> Result<f64> {
    match sec.get(key) {
        None => Ok(default),
        Some(_) => get_f64(sec, key),
    }
}

fn get_u64_or(sec: &Section, key: &str, default: u64) -> Result<u64> {
    match sec.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::input(format!("key `{key}` is not an integer"))),
    }
}

fn get_usize(sec: &Section, key: &str) -> Result<usize> {
    get_str(sec, key)?
        .parse()
        .map_err(|_| Error::input(format!("key `{key}` is not an integer")))
}

fn get_bool_or(sec: &Section, key: &str, default: bool) -> Result<bool> {
    match sec.get(key).map(|s| s.as_str()) {
        None => Ok(default),
        Some("true") | Some("1") | Some("yes") => Ok(true),
        Some("false") | Some("0") | Some("no") => Ok(false),
        Some(other) => Err(Error::input(format!("key `{key}`: bad bool `{other}`"))),
    }
}

fn get_vec(sec: &Section, key: &str) -> Result<DVector<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = get_str(sec, key)?
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect();
    let vals = vals.map_err(|_| Error::input(format!("key `{key}` is not a vector")))?;
    if vals.is_empty() {
        return Err(Error::input(format!("key `{key}` is empty")));
    }
    Ok(DVector::from_vec(vals))
}

fn get_vec_or_zeros(sec: &Section, key: &str, d: usize) -> Result<DVector<f64>> {
    match sec.get(key) {
        None => Ok(DVector::zeros(d)),
        Some(_) => {
            let v = get_vec(sec, key)?;
            if v.len() != d {
                return Err(Error::input(format!(
                    "key `{key}` has {} entries, expected {d}",
                    v.len()
                )));
            }
            Ok(v)
        }
    }
}

fn get_f64_list(sec: &Section, key: &str) -> Result<Vec<f64>> {
    Ok(get_vec(sec, key)?.as_slice().to_vec())
}

// ---------------------------------------------------------------------------
// Scenario model
// ---------------------------------------------------------------------------

/// A parsed scenario: field + experiment + simulation parameters.
pub struct Scenario {
    pub name: String,
    pub tags: Vec<String>,
    pub experiment: String,
    pub output_dir: PathBuf,
    pub sim: SimConfig,
    pub field: CoefficientField,
    raw: RawConfig,
}

impl Scenario {
    pub fn from_text(text: &str) -> Result<Scenario> {
        Self::from_text_with_registry(text, &FieldRegistry::new())
    }

    /// Parse with a registry supplying `family = custom` fields by name.
    pub fn from_text_with_registry(text: &str, registry: &FieldRegistry) -> Result<Scenario> {
        let raw = RawConfig::parse(text)?;
        let meta = raw.section("scenario")?;
        let name = get_str(meta, "name")?.to_string();
        let experiment = get_str(meta, "experiment")?.to_string();
        let tags = meta
            .get("tags")
            .map(|t| {
                t.split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(|s| s.to_string())
                    .collect()
            })
            .unwrap_or_default();

        let field = build_field(raw.section("field")?, registry)?;

        let sim_sec = raw.section("sim")?;
        let sim = SimConfig::new(
            get_f64(sim_sec, "dt")?,
            get_f64(sim_sec, "max_time")?,
            get_u64_or(sim_sec, "seed", 0)?,
            get_bool_or(sim_sec, "bridge", true)?,
            get_u64_or(sim_sec, "paths", 10_000)?,
        )?;

        let out_sec = raw.section_or_empty("output");
        let output_dir = PathBuf::from(
            out_sec
                .get("dir")
                .cloned()
                .unwrap_or_else(|| format!("runs/{name}")),
        );

        Ok(Scenario {
            name,
            tags,
            experiment,
            output_dir,
            sim,
            field,
            raw,
        })
    }

    pub fn config_hash(&self) -> String {
        self.raw.hash()
    }
}

fn build_field(sec: &Section, registry: &FieldRegistry) -> Result<CoefficientField> {
    let family = get_str(sec, "family")?;
    let dim = get_usize(sec, "dim")?;
    let nu = get_f64_or(sec, "nu", 1.0)?;
    let k = get_f64_or(sec, "k", 0.0)?;
    let cert = EllipticityCertificate::new(nu, k, dim)?;
    match family {
        "constant" => {
            let a = match sec.get("a") {
                None => DMatrix::identity(dim, dim) * get_f64_or(sec, "iso", 1.0)?,
                Some(_) => {
                    let flat = get_f64_list(sec, "a")?;
                    if flat.len() != dim * dim {
                        return Err(Error::input(format!(
                            "key `a` needs {} entries for dim {dim}",
                            dim * dim
                        )));
                    }
                    DMatrix::from_row_slice(dim, dim, &flat)
                }
            };
            let b = get_vec_or_zeros(sec, "b", dim)?;
            CoefficientField::constant(cert, a, b)
        }
        "checkerboard" => CoefficientField::checkerboard(cert, get_f64(sec, "cell")?),
        "radial_jump" => CoefficientField::radial_jump(cert, get_f64(sec, "radius")?),
        "time_oscillating" => CoefficientField::time_oscillating(cert, get_f64(sec, "period")?),
        "custom" => {
            let name = get_str(sec, "name")?;
            let mut params = BTreeMap::new();
            for (key, val) in sec {
                if let Ok(v) = val.parse::<f64>() {
                    params.insert(key.clone(), v);
                }
            }
            registry.build(name, &cert, &params)
        }
        other => Err(Error::Registry(format!("unknown field family `{other}`"))),
    }
}

fn build_payoff(sec: &Section, dim: usize) -> Result<Payoff> {
    match sec.get("payoff").map(|s| s.as_str()).unwrap_or("constant") {
        "constant" => Ok(Payoff::Constant(get_f64_or(sec, "value", 1.0)?)),
        "cosine" => Ok(Payoff::Cosine {
            xi: get_vec(sec, "xi")?,
        }),
        "halfspace" => Ok(Payoff::IndicatorHalfspace {
            normal: get_vec_or_zeros(sec, "normal", dim)?,
            offset: get_f64_or(sec, "offset", 0.0)?,
        }),
        "ball" => Ok(Payoff::IndicatorBall(Ball::new(
            get_vec_or_zeros(sec, "payoff_center", dim)?,
            get_f64(sec, "payoff_radius")?,
        )?)),
        other => Err(Error::Registry(format!("unknown payoff `{other}`"))),
    }
}

fn build_boundary_target(sec: &Section, dim: usize) -> Result<BoundaryTarget> {
    match sec.get("target").map(|s| s.as_str()).unwrap_or("all") {
        "all" => Ok(BoundaryTarget::All),
        "halfspace" => Ok(BoundaryTarget::Halfspace {
            normal: get_vec_or_zeros(sec, "normal", dim)?,
            offset: get_f64_or(sec, "offset", 0.0)?,
        }),
        "sector" => Ok(BoundaryTarget::AngularSector {
            theta_lo: get_f64(sec, "theta_lo")?,
            theta_hi: get_f64(sec, "theta_hi")?,
        }),
        other => Err(Error::Registry(format!("unknown target `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Run a scenario file and emit its reports.
pub fn run_scenario_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let text = fs::read_to_string(path)?;
    let scenario = Scenario::from_text(&text)?;
    run_scenario(scenario, opts)
}

/// Run a parsed scenario: validate the field, dispatch the experiment, and
/// write `report.json`, `summary.txt` and plot data.
pub fn run_scenario(mut scenario: Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    if let Some(seed) = opts.seed_override {
        scenario.sim.seed = seed;
    }
    let out_dir = opts
        .out_override
        .clone()
        .unwrap_or_else(|| scenario.output_dir.clone());

    let started = Instant::now();
    let run = |scenario: &Scenario| -> Result<(Value, Vec<String>, Vec<PlotFile>)> {
        // Field validation sweep gates every run.
        let sweep_box = SampleBox::centered(scenario.field.dimension(), 3.0, 2.0);
        let mut stream = CounterStream::new(derive_seed(scenario.sim.seed, 0xa11), 0);
        let validation = validate_ellipticity(&scenario.field, 10_000, &sweep_box, &mut stream)?;
        if !validation.pass {
            return Err(Error::precondition(format!(
                "field failed the ellipticity sweep: quotients in [{:.6}, {:.6}] vs [{}, {}], \
                 max |b| = {:.6}",
                validation.min_quotient,
                validation.max_quotient,
                validation.nu,
                1.0 / validation.nu,
                validation.max_drift_component,
            )));
        }
        let (results, warnings, plots) = dispatch(scenario)?;
        let mut with_validation = serde_json::Map::new();
        with_validation.insert("validation".into(), serde_json::to_value(&validation)?);
        with_validation.insert("experiment".into(), results);
        Ok((Value::Object(with_validation), warnings, plots))
    };

    let outcome = match opts.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::precondition(format!("worker pool: {e}")))?;
            pool.install(|| run(&scenario))
        }
        None => run(&scenario),
    };

    let (results, warnings, plots) = outcome?;

    fs::create_dir_all(&out_dir)?;
    if opts.dump_paths {
        dump_paths(&scenario, &out_dir)?;
    }

    let elapsed = started.elapsed().as_secs_f64();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);

    let report = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "name": scenario.name,
        "experiment": scenario.experiment,
        "config_hash": scenario.config_hash(),
        "seed": scenario.sim.seed,
        "timestamp": timestamp,
        "results": results,
        "warnings": warnings,
    });
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "scenario: {}", scenario.name);
    let _ = writeln!(summary, "experiment: {}", scenario.experiment);
    let _ = writeln!(summary, "seed: {}", scenario.sim.seed);
    let _ = writeln!(summary, "config_hash: {}", scenario.config_hash());
    let _ = writeln!(summary, "runtime_seconds: {elapsed:.3}");
    let _ = writeln!(
        summary,
        "throughput: {:.0} paths/s over {} paths",
        scenario.sim.n_paths as f64 / elapsed.max(1e-9),
        scenario.sim.n_paths,
    );
    let _ = writeln!(
        summary,
        "status: {}",
        if warnings.is_empty() {
            "ok".to_string()
        } else {
            format!("warnings: {}", warnings.join("; "))
        }
    );
    let _ = writeln!(summary, "results: {}", serde_json::to_string(&results)?);
    fs::write(out_dir.join("summary.txt"), summary)?;

    for plot in &plots {
        let mut text = String::new();
        let _ = writeln!(text, "{}", plot.header.join("\t"));
        for row in &plot.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(text, "{}", cells.join("\t"));
        }
        fs::write(out_dir.join(&plot.filename), text)?;
    }

    let status = if warnings.is_empty() {
        RunStatus::Success
    } else {
        RunStatus::ReliabilityWarning
    };
    Ok(RunOutcome {
        status,
        report_path,
        warnings,
    })
}

fn dump_paths(scenario: &Scenario, out_dir: &Path) -> Result<()> {
    let dir = out_dir.join("paths");
    fs::create_dir_all(&dir)?;
    let sec = scenario.raw.section_or_empty("experiment");
    let d = scenario.field.dimension();
    let start = get_vec_or_zeros(&sec, "start", d)?;
    let s = get_f64_or(&sec, "s", 0.0)?;
    // Short trajectories are enough for debugging dumps.
    let mut cfg = scenario.sim.clone();
    cfg.max_time = cfg.max_time.min(1024.0 * cfg.dt);
    for i in 0..scenario.sim.n_paths.min(8) {
        let path = simulate_path(&scenario.field, s, &start, &cfg, i)?;
        let mut file = fs::File::create(dir.join(format!("path_{i:03}.bin")))?;
        path.dump(cfg.dt, &mut file)?;
    }
    Ok(())
}

struct PlotFile {
    filename: String,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn estimate_json(e: &Estimate) -> Value {
    serde_json::to_value(e).unwrap_or(Value::Null)
}

fn dispatch(scenario: &Scenario) -> Result<(Value, Vec<String>, Vec<PlotFile>)> {
    let sec = scenario.raw.section_or_empty("experiment");
    let field = &scenario.field;
    let cfg = &scenario.sim;
    let d = field.dimension();
    let mut warnings = Vec::new();
    let mut plots = Vec::new();

    let results = match scenario.experiment.as_str() {
        "semigroup" => {
            let t = get_f64(&sec, "t")?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let payoff = build_payoff(&sec, d)?;
            let est = semigroup(field, &start, t, &payoff, cfg)?;
            json!({ "estimate": estimate_json(&est), "t": t })
        }
        "kernel" => {
            let s = get_f64_or(&sec, "s", 0.0)?;
            let horizon = get_f64(&sec, "horizon")?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let payoff = build_payoff(&sec, d)?;
            let est = parabolic_kernel(field, s, &start, horizon, &payoff, cfg)?;
            json!({ "estimate": estimate_json(&est), "s": s, "horizon": horizon })
        }
        "feller" => {
            let horizon = get_f64_or(&sec, "horizon", 1.0)?;
            let threshold = get_f64_or(&sec, "threshold", 1.0)?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let s_values = get_f64_list(&sec, "s_values")?;
            let payoff = SpaceTimePayoff::TimeStep { threshold };
            let mut rows = Vec::new();
            let mut vals = Vec::new();
            for &s in &s_values {
                let est = feller_scenario(field, &payoff, s, &start, horizon, cfg)?;
                rows.push(vec![s, est.value, est.stderr]);
                vals.push(json!({ "s": s, "estimate": estimate_json(&est) }));
            }
            plots.push(PlotFile {
                filename: "feller.tsv".into(),
                header: vec!["s".into(), "value".into(), "stderr".into()],
                rows,
            });
            json!({ "horizon": horizon, "threshold": threshold, "values": vals })
        }
        "harmonic_measure" => {
            let radius = get_f64_or(&sec, "radius", 1.0)?;
            let center = get_vec_or_zeros(&sec, "center", d)?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let ball = Ball::new(center, radius)?;
            let target = build_boundary_target(&sec, d)?;
            let report = harmonic_measure_report(field, &start, &ball, &target, cfg)?;
            if !report.reliable() {
                warnings.push(format!(
                    "censored fraction {:.4} exceeds 1%",
                    report.censored_fraction
                ));
            }
            json!({
                "probability": estimate_json(&report.probability),
                "mean_exit_time": estimate_json(&report.mean_exit_time),
                "censored_fraction": report.censored_fraction,
                "corrected_fraction": report.corrected_fraction,
            })
        }
        "parabolic_exit" => {
            let r = get_f64_or(&sec, "r", 1.0)?;
            let t0 = get_f64_or(&sec, "t0", 0.0)?;
            let center = get_vec_or_zeros(&sec, "center", d)?;
            let s = get_f64_or(&sec, "s", t0)?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let q = ParabolicCylinder::standard(t0, center, r)?;
            let target = match sec.get("target").map(|s| s.as_str()).unwrap_or("all") {
                "all" => ParabolicTarget::AllParabolic,
                "top" => ParabolicTarget::TopFace,
                "lateral" => ParabolicTarget::LateralFace,
                other => return Err(Error::Registry(format!("unknown target `{other}`"))),
            };
            let report = parabolic_exit_report(field, s, &start, &q, &target, cfg)?;
            if !report.reliable() {
                warnings.push(format!(
                    "censored fraction {:.4} exceeds 1%",
                    report.censored_fraction
                ));
            }
            json!({
                "probability": estimate_json(&report.probability),
                "mean_exit_time": estimate_json(&report.mean_exit_time),
                "censored_fraction": report.censored_fraction,
            })
        }
        "hitting" => {
            let r = get_f64_or(&sec, "r", 1.0)?;
            let q = ParabolicCylinder::standard(0.0, DVector::zeros(d), r)?;
            let params = HittingParams {
                gamma_fraction: get_f64_or(&sec, "gamma_fraction", 3.0 / 8.0)?,
                probe_shrink: get_f64_or(&sec, "probe_shrink", 3.0 / 4.0)?,
                qmc_samples: 200_000,
            };
            let gamma = GammaSet::Slab {
                t_lo: get_f64_or(&sec, "gamma_t_lo", 0.0)?,
                t_hi: get_f64_or(&sec, "gamma_t_hi", 0.5 * r * r)?,
                ball: Ball::new(
                    DVector::zeros(d),
                    get_f64_or(&sec, "gamma_radius", 0.9 * r)?,
                )?,
            };
            let s = get_f64_or(&sec, "s", 0.0)?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let est = hitting_profile(field, s, &start, &q, &[gamma], &params, cfg)?
                .pop()
                .unwrap();
            let lower = est.ci95.0;
            json!({
                "delta_hat": estimate_json(&est),
                "wilson_lower": lower,
                "positive": lower > 0.0,
            })
        }
        "regularity" => {
            let domain = match get_str(&sec, "domain")? {
                "ball" => Domain::Ball(Ball::new(
                    get_vec_or_zeros(&sec, "center", d)?,
                    get_f64_or(&sec, "radius", 1.0)?,
                )?),
                "punctured_ball" => Domain::PuncturedBall {
                    ball: Ball::new(
                        get_vec_or_zeros(&sec, "center", d)?,
                        get_f64_or(&sec, "radius", 1.0)?,
                    )?,
                    puncture: get_vec_or_zeros(&sec, "puncture", d)?,
                },
                "half_ball" => Domain::HalfBall {
                    ball: Ball::new(
                        get_vec_or_zeros(&sec, "center", d)?,
                        get_f64_or(&sec, "radius", 1.0)?,
                    )?,
                    axis: get_u64_or(&sec, "axis", (d - 1) as u64)? as usize,
                },
                other => return Err(Error::Registry(format!("unknown domain `{other}`"))),
            };
            let point = get_vec_or_zeros(&sec, "point", d)?;
            let schedule = get_f64_list(&sec, "h_schedule")?;
            let threshold = get_f64_or(&sec, "threshold", 0.1)?;
            let verdict = regularity_probe(field, &domain, &point, &schedule, threshold, cfg)?;
            if verdict.verdict == Verdict::Inconclusive {
                warnings.push("regularity probe inconclusive".into());
            }
            plots.push(PlotFile {
                filename: "regularity.tsv".into(),
                header: vec!["h".into(), "p_hat".into(), "ci_lo".into(), "ci_hi".into()],
                rows: verdict
                    .probe_values
                    .iter()
                    .map(|(h, e)| vec![*h, e.value, e.ci95.0, e.ci95.1])
                    .collect(),
            });
            serde_json::to_value(&verdict)?
        }
        "holder" => {
            let t = get_f64_or(&sec, "t", 0.0625)?;
            let pattern_radius = get_f64_or(&sec, "pattern_radius", 0.5)?;
            let payoff = build_payoff(&sec, d)?;
            let points = cross_pattern(d, pattern_radius);
            let ests = semigroup_on_points(field, &points, t, &payoff, cfg)?;
            let samples: Vec<(SpaceTime, Estimate)> = points
                .iter()
                .zip(&ests)
                .map(|(p, e)| (SpaceTime::new(0.0, p.clone()), e.clone()))
                .collect();
            let fit = holder_fit(&samples)?;
            if fit.r_squared < 0.8 {
                warnings.push(format!("holder fit r² = {:.3} below 0.8", fit.r_squared));
            }
            plots.push(PlotFile {
                filename: "holder_pairs.tsv".into(),
                header: vec!["rho".into(), "delta_u".into()],
                rows: pair_rows(&samples),
            });
            json!({
                "fit": serde_json::to_value(&fit)?,
                "t": t,
                "points": points.len(),
            })
        }
        "harnack" => {
            let domain_radius = get_f64_or(&sec, "domain_radius", 1.5)?;
            let pattern_radius = get_f64_or(&sec, "pattern_radius", 0.5)?;
            let ball = Ball::centered(d, domain_radius)?;
            let target = build_boundary_target(&sec, d)?;
            let points = compass_pattern(d, pattern_radius);
            let mut ests = Vec::new();
            for (i, p) in points.iter().enumerate() {
                let cfg_i = cfg.clone().with_seed(derive_seed(cfg.seed, 100 + i as u64));
                ests.push(harmonic_measure(field, p, &ball, &target, &cfg_i)?);
            }
            let ratio = harnack_sup_inf(&ests, "compass over B_{r/2}")?;
            if ratio.unbounded {
                warnings.push("harnack comparison minimum indistinguishable from 0".into());
            }
            json!({ "ratio": serde_json::to_value(&ratio)? })
        }
        "oscillation" => {
            let horizon = get_f64_or(&sec, "horizon", 0.5)?;
            let payoff = build_payoff(&sec, d)?;
            let schedule = get_f64_list(&sec, "r_schedule")?;
            let center_x = get_vec_or_zeros(&sec, "center", d)?;
            let center = SpaceTime::new(0.0, center_x);
            let mut counter = 0u64;
            let levels = crate::verifiers::oscillation_cascade(
                |t, x| {
                    counter += 1;
                    let cfg_i = cfg.clone().with_seed(derive_seed(cfg.seed, 500 + counter));
                    parabolic_kernel(field, t, x, t + horizon, &payoff, &cfg_i)
                },
                &center,
                &schedule,
            )?;
            let ratios = cascade_ratios(&levels);
            let exponent = cascade_exponent(&levels);
            if levels.len() < schedule.len() {
                warnings.push(format!(
                    "cascade truncated at level {} of {}",
                    levels.len(),
                    schedule.len()
                ));
            }
            plots.push(PlotFile {
                filename: "oscillation.tsv".into(),
                header: vec!["radius".into(), "osc".into(), "noise_floor".into()],
                rows: levels
                    .iter()
                    .map(|l| vec![l.radius, l.osc, l.noise_floor])
                    .collect(),
            });
            json!({
                "levels": serde_json::to_value(&levels)?,
                "ratios": ratios,
                "exponent": exponent,
            })
        }
        "barrier" => {
            let kind = sec.get("kind").map(|s| s.as_str()).unwrap_or("oblique");
            let grid = get_u64_or(&sec, "grid", 64)? as usize;
            match kind {
                "oblique" => {
                    let cert = field.certificate();
                    let epsilon = get_f64_or(&sec, "epsilon", 0.5)?;
                    let kappa = get_f64_or(&sec, "kappa", 0.25)?;
                    let barrier =
                        ObliqueBarrier::centered(d, cert.nu, cert.k_bound, epsilon, kappa)?;
                    let check = barrier_check(field, &barrier, grid)?;
                    let refined = barrier_check(field, &barrier, grid * 2)?;
                    let control =
                        barrier_check(field, &barrier.clone().with_exponent(1.0), grid)?;
                    if !check.pass || control.pass {
                        warnings.push("barrier certificate failed".into());
                    }
                    json!({
                        "params": serde_json::to_value(&barrier)?,
                        "check": serde_json::to_value(&check)?,
                        "refined": serde_json::to_value(&refined)?,
                        "negative_control": serde_json::to_value(&control)?,
                    })
                }
                "paraboloid" => {
                    let check = lemma_paraboloid_drift_check(field, grid)?;
                    if check.grid_min < check.analytic_bound - 1e-12 {
                        warnings.push("paraboloid drift bound violated".into());
                    }
                    serde_json::to_value(&check)?
                }
                other => return Err(Error::Registry(format!("unknown barrier kind `{other}`"))),
            }
        }
        "martingale_residual" => {
            let t = get_f64_or(&sec, "t", 0.1)?;
            let start = get_vec_or_zeros(&sec, "start", d)?;
            let widths = sec
                .get("widths")
                .map(|_| get_f64_list(&sec, "widths"))
                .transpose()?
                .unwrap_or_else(|| vec![0.8, 1.2]);
            let bias_coeff = get_f64_or(&sec, "bias_coeff", 50.0)?;
            let mut rows = Vec::new();
            let mut residuals = Vec::new();
            let mut all_pass = true;
            for (i, &w) in widths.iter().enumerate() {
                let tf = TestFunction::new(1.0, start.clone(), w)?;
                let cfg_i = cfg.clone().with_seed(derive_seed(cfg.seed, 900 + i as u64));
                let est = martingale_residual(field, 0.0, &start, &tf, t, &cfg_i)?;
                let allowance = 3.0 * est.stderr + bias_coeff * cfg.dt;
                let pass = est.value.abs() <= allowance;
                all_pass &= pass;
                rows.push(vec![w, est.value, est.stderr, allowance]);
                residuals.push(json!({
                    "width": w,
                    "estimate": estimate_json(&est),
                    "allowance": allowance,
                    "pass": pass,
                }));
            }
            if !all_pass {
                warnings.push("martingale residual outside allowance".into());
            }
            plots.push(PlotFile {
                filename: "residuals.tsv".into(),
                header: vec![
                    "width".into(),
                    "residual".into(),
                    "stderr".into(),
                    "allowance".into(),
                ],
                rows,
            });
            json!({ "t": t, "residuals": residuals })
        }
        "scaling_conjugacy" => {
            let s0 = get_f64_or(&sec, "s0", 0.0)?;
            let x0 = get_vec_or_zeros(&sec, "x0", d)?;
            let r = get_f64_or(&sec, "r", 0.5)?;
            let (orig, hat) = scaling_conjugacy_pair(field, s0, &x0, r, cfg)?;
            let diff = (orig.value - hat.value).abs();
            let budget = 2.0 * (orig.stderr + hat.stderr);
            if diff > budget {
                warnings.push(format!(
                    "scaling conjugacy gap {diff:.5} exceeds 2 stderr budget {budget:.5}"
                ));
            }
            json!({
                "original": estimate_json(&orig),
                "conjugated": estimate_json(&hat),
                "difference": diff,
                "two_sigma_budget": budget,
            })
        }
        other => {
            return Err(Error::Registry(format!(
                "unknown experiment `{other}`; run the list command for the catalog"
            )))
        }
    };

    Ok((results, warnings, plots))
}

/// Top-face exit probability of `Q_r(s0, x0)` from its bottom center,
/// computed directly and through the hat transform with independent seeds.
pub fn scaling_conjugacy_pair(
    field: &CoefficientField,
    s0: f64,
    x0: &DVector<f64>,
    r: f64,
    cfg: &SimConfig,
) -> Result<(Estimate, Estimate)> {
    let q_orig = ParabolicCylinder::standard(s0, x0.clone(), r)?;
    let mut cfg_orig = cfg.clone();
    cfg_orig.dt = cfg.dt * r * r; // matching grids: dt scales like time
    cfg_orig.max_time = q_orig.duration + cfg_orig.dt;
    let orig = crate::estimators::parabolic_exit_distribution(
        field,
        s0,
        x0,
        &q_orig,
        &ParabolicTarget::TopFace,
        &cfg_orig,
    )?;

    let hat_field = field.conjugate(s0, x0, r)?;
    let q_hat = ParabolicCylinder::unit(x0.len());
    let mut cfg_hat = cfg.clone();
    cfg_hat.seed = derive_seed(cfg.seed, 0x5ca1e); // independent seeds
    cfg_hat.max_time = q_hat.duration + cfg_hat.dt;
    let hat = crate::estimators::parabolic_exit_distribution(
        &hat_field,
        0.0,
        &DVector::zeros(x0.len()),
        &q_hat,
        &ParabolicTarget::TopFace,
        &cfg_hat,
    )?;
    Ok((orig, hat))
}

/// Nine-point pattern in d = 2 (center plus axis points at r/2 and r); the
/// analogous cross in other dimensions.
pub fn cross_pattern(d: usize, r: f64) -> Vec<DVector<f64>> {
    let mut pts = vec![DVector::zeros(d)];
    for axis in 0..d {
        for &(scale, sign) in &[(1.0, 1.0), (1.0, -1.0), (0.5, 1.0), (0.5, -1.0)] {
            let mut p = DVector::zeros(d);
            p[axis] = r * scale * sign;
            pts.push(p);
        }
    }
    pts
}

/// Center plus the 2d compass points at radius `r`.
pub fn compass_pattern(d: usize, r: f64) -> Vec<DVector<f64>> {
    let mut pts = vec![DVector::zeros(d)];
    for axis in 0..d {
        for sign in [1.0, -1.0] {
            let mut p = DVector::zeros(d);
            p[axis] = r * sign;
            pts.push(p);
        }
    }
    pts
}

fn pair_rows(samples: &[(SpaceTime, Estimate)]) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let rho = crate::geometry::parabolic_distance(&samples[i].0, &samples[j].0);
            let du = (samples[i].1.value - samples[j].1.value).abs();
            if rho > 0.0 {
                rows.push(vec![rho, du]);
            }
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// Bundled catalog
// ---------------------------------------------------------------------------

/// A bundled scenario: name, tags and the config text itself.
pub struct CatalogEntry {
    pub name: &'static str,
    pub tags: &'static [&'static str],
    pub description: &'static str,
    pub text: &'static str,
}

macro_rules! bundled {
    ($name:literal, $desc:literal, $tags:expr) => {
        CatalogEntry {
            name: $name,
            tags: $tags,
            description: $desc,
            text: include_str!(concat!("../scenarios/", $name, ".cfg")),
        }
    };
}

pub fn catalog() -> &'static [CatalogEntry] {
    static CATALOG: &[CatalogEntry] = &[
        bundled!(
            "bm_exit_time",
            "Mean exit time of the Laplacian process from the unit disk",
            &["calibration", "engine", "exit"]
        ),
        bundled!(
            "characteristic_function",
            "E[cos(xi.x_t)] against the closed-form Gaussian decay",
            &["calibration", "semigroup"]
        ),
        bundled!(
            "martingale_residual",
            "Centered-martingale residual for cosine-bump test functions",
            &["martingale", "generator"]
        ),
        bundled!(
            "barrier_oblique",
            "Grid certification of the slanted-paraboloid barrier",
            &["barrier", "certificate"]
        ),
        bundled!(
            "barrier_paraboloid",
            "Drift lower bound for the unit paraboloid over Q_1",
            &["barrier", "certificate"]
        ),
        bundled!(
            "krylov_safonov",
            "Positive hitting probability of a bulky compact set",
            &["hitting", "krylov-safonov"]
        ),
        bundled!(
            "holder_checkerboard",
            "Hoelder exponent fit of T_t f for the checkerboard field",
            &["holder", "regularity"]
        ),
        bundled!(
            "harnack_checkerboard",
            "Sup/inf Harnack ratio of a harmonic measure on B_{3/2}",
            &["harnack"]
        ),
        bundled!(
            "regularity_sphere",
            "Regular boundary point probe at the sphere",
            &["regularity", "dichotomy"]
        ),
        bundled!(
            "regularity_puncture",
            "Irregular probe at the center of a punctured disk",
            &["regularity", "dichotomy"]
        ),
        bundled!(
            "scaling_conjugacy",
            "Exit distribution before and after the parabolic rescaling",
            &["scaling"]
        ),
        bundled!(
            "feller_counterexample",
            "Exact 0/1 discontinuity of the time-indicator kernel",
            &["feller", "counterexample"]
        ),
        bundled!(
            "parabolic_survival",
            "Top-cap exit probability of Q_1 against the heat-kernel series",
            &["parabolic", "exit"]
        ),
        bundled!(
            "oscillation_cascade",
            "Oscillation decay over nested cylinders for the checkerboard field",
            &["oscillation", "holder"]
        ),
    ];
    CATALOG
}

/// Catalog entries, optionally filtered by tag. Unknown tags yield an empty
/// list, not an error.
pub fn list_scenarios(tag: Option<&str>) -> Vec<&'static CatalogEntry> {
    catalog()
        .iter()
        .filter(|e| tag.is_none_or(|t| e.tags.contains(&t)))
        .collect()
}

pub fn find_scenario(name: &str) -> Option<&'static CatalogEntry> {
    catalog().iter().find(|e| e.name == name)
}
