//! Monte Carlo estimators over seeded path ensembles: semigroup averages,
//! space-time kernel values, exit distributions, hitting probabilities of
//! positive-measure sets, boundary-regularity probes, and the martingale
//! residual check.
//!
//! All estimators are deterministic given `cfg.seed` and orchestrate
//! [`run_ensemble`](crate::sde::run_ensemble) with pure per-path functionals;
//! they are thread-safe by construction.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coefficients::{CoefficientField, StepCoeffs};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Domain, GammaSet, ParabolicCylinder};
use crate::sde::{
    run_ensemble, CollectReduction, ExitFace, ExitRegion, ExitStatus, MeanReduction,
    Reduction, SimConfig,
};
use crate::stats::{Estimate, MeanAcc};

/// Registered bounded Borel payoffs evaluated at a spatial point.
#[derive(Clone)]
pub enum Payoff {
    Constant(f64),
    /// `1` on the closed box `[lo, hi]`.
    IndicatorBox { lo: DVector<f64>, hi: DVector<f64> },
    /// `1` where `normal · x > offset`.
    IndicatorHalfspace { normal: DVector<f64>, offset: f64 },
    /// `1` inside the open ball.
    IndicatorBall(Ball),
    /// `cos(ξ · x)`.
    Cosine { xi: DVector<f64> },
    Custom {
        name: String,
        f: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    },
}

impl Payoff {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Payoff::Constant(c) => *c,
            Payoff::IndicatorBox { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(v, (l, h))| *v >= *l && *v <= *h);
                f64::from(inside)
            }
            Payoff::IndicatorHalfspace { normal, offset } => f64::from(normal.dot(x) > *offset),
            Payoff::IndicatorBall(b) => f64::from(b.contains(x)),
            Payoff::Cosine { xi } => xi.dot(x).cos(),
            Payoff::Custom { f, .. } => f(x),
        }
    }
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Payoff::Constant(c) => write!(f, "Constant({c})"),
            Payoff::IndicatorBox { .. } => write!(f, "IndicatorBox"),
            Payoff::IndicatorHalfspace { .. } => write!(f, "IndicatorHalfspace"),
            Payoff::IndicatorBall(_) => write!(f, "IndicatorBall"),
            Payoff::Cosine { .. } => write!(f, "Cosine"),
            Payoff::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Payoffs over space-time points, for the non-autonomous kernel scenarios.
#[derive(Clone)]
pub enum SpaceTimePayoff {
    /// `1_{t ≥ threshold}`, constant in space: the payoff exhibiting the
    /// failure of the strong Feller property in the time coordinate.
    TimeStep { threshold: f64 },
    /// Ignores the time coordinate.
    Spatial(Payoff),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>,
    },
}

impl SpaceTimePayoff {
    pub fn eval(&self, t: f64, x: &DVector<f64>) -> f64 {
        match self {
            SpaceTimePayoff::TimeStep { threshold } => f64::from(t >= *threshold),
            SpaceTimePayoff::Spatial(p) => p.eval(x),
            SpaceTimePayoff::Custom { f, .. } => f(t, x),
        }
    }
}

fn checked(value: f64, index: u64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::PayoffContract { value, index })
    }
}

/// `T_t f(x) = E_x f(x_t)` for a time-homogeneous field.
pub fn semigroup(
    field: &CoefficientField,
    x: &DVector<f64>,
    t: f64,
    payoff: &Payoff,
    cfg: &SimConfig,
) -> Result<Estimate> {
    if !field.time_homogeneous() {
        return Err(Error::precondition(
            "semigroup requires a time-homogeneous field; use parabolic_kernel",
        ));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::input(format!("semigroup time must be > 0, got {t}")));
    }
    let out = run_ensemble(
        field,
        0.0,
        x,
        cfg,
        |idx, walker| checked(payoff.eval(walker.run_to(t)?), idx),
        &MeanReduction,
    )?;
    Ok(out.value.estimate())
}

/// `H(s, x) = E_{s,x} f(x_{T-s})`: the parabolic kernel with coefficients
/// read along `(s + η, x_η)`.
pub fn parabolic_kernel(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    horizon: f64,
    payoff: &Payoff,
    cfg: &SimConfig,
) -> Result<Estimate> {
    if !(s < horizon) {
        return Err(Error::input(format!(
            "parabolic_kernel requires s < T, got s = {s}, T = {horizon}"
        )));
    }
    let run_time = horizon - s;
    let out = run_ensemble(
        field,
        s,
        x,
        cfg,
        |idx, walker| checked(payoff.eval(walker.run_to(run_time)?), idx),
        &MeanReduction,
    )?;
    Ok(out.value.estimate())
}

/// `u(s, x) = E_{s,x} f(s + T, x_T)` for a space-time payoff. For payoffs
/// depending only on time the estimate is exact: the time coordinate of the
/// space-time process is deterministic, `x⁰_T = s + T`.
pub fn feller_scenario(
    field: &CoefficientField,
    payoff: &SpaceTimePayoff,
    s: f64,
    x: &DVector<f64>,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    if !s.is_finite() {
        return Err(Error::input("feller_scenario requires finite s"));
    }
    if !(horizon > 0.0) {
        return Err(Error::input("feller_scenario requires T > 0"));
    }
    let out = run_ensemble(
        field,
        s,
        x,
        cfg,
        |idx, walker| checked(payoff.eval(s + horizon, walker.run_to(horizon)?), idx),
        &MeanReduction,
    )?;
    Ok(out.value.estimate())
}

/// Subsets of a spatial boundary, for exit-distribution targets.
#[derive(Clone)]
pub enum BoundaryTarget {
    All,
    /// Exit points with `normal · y > offset`.
    Halfspace { normal: DVector<f64>, offset: f64 },
    /// d = 2 only: polar angle of `y - center` in `(theta_lo, theta_hi)`.
    AngularSector { theta_lo: f64, theta_hi: f64 },
    Custom {
        name: String,
        f: Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>,
    },
}

impl BoundaryTarget {
    pub fn contains(&self, center: &DVector<f64>, y: &DVector<f64>) -> bool {
        match self {
            BoundaryTarget::All => true,
            BoundaryTarget::Halfspace { normal, offset } => normal.dot(y) > *offset,
            BoundaryTarget::AngularSector { theta_lo, theta_hi } => {
                let theta = (y[1] - center[1]).atan2(y[0] - center[0]);
                theta > *theta_lo && theta < *theta_hi
            }
            BoundaryTarget::Custom { f, .. } => f(y),
        }
    }
}

/// Subsets of a cylinder's parabolic boundary.
#[derive(Clone)]
pub enum ParabolicTarget {
    AllParabolic,
    TopFace,
    LateralFace,
    /// Top-face exits with the spatial point in the target.
    TopWithin(BoundaryTarget),
    /// Lateral exits with the spatial point in the target.
    LateralWithin(BoundaryTarget),
}

impl ParabolicTarget {
    pub fn contains(&self, q: &ParabolicCylinder, face: ExitFace, y: &DVector<f64>) -> bool {
        match self {
            ParabolicTarget::AllParabolic => true,
            ParabolicTarget::TopFace => face == ExitFace::Top,
            ParabolicTarget::LateralFace => face == ExitFace::Lateral,
            ParabolicTarget::TopWithin(t) => face == ExitFace::Top && t.contains(&q.x0, y),
            ParabolicTarget::LateralWithin(t) => face == ExitFace::Lateral && t.contains(&q.x0, y),
        }
    }
}

/// Aggregated outcome of a first-exit ensemble.
#[derive(Debug, Clone, Default)]
struct ExitAcc {
    hits: u64,
    exited: u64,
    censored: u64,
    corrected: u64,
    exit_time: MeanAcc,
}

struct ExitReduction;

impl Reduction for ExitReduction {
    type Item = Option<(bool, f64, bool)>;
    type Acc = ExitAcc;
    fn identity(&self) -> ExitAcc {
        ExitAcc::default()
    }
    fn accumulate(&self, acc: &mut ExitAcc, item: Self::Item) {
        match item {
            Some((hit, time, corrected)) => {
                acc.exited += 1;
                acc.hits += u64::from(hit);
                acc.corrected += u64::from(corrected);
                acc.exit_time.push(time);
            }
            None => acc.censored += 1,
        }
    }
    fn merge(&self, into: &mut ExitAcc, other: ExitAcc) {
        into.hits += other.hits;
        into.exited += other.exited;
        into.censored += other.censored;
        into.corrected += other.corrected;
        into.exit_time.merge(&other.exit_time);
    }
}

/// Exit-distribution results: the target probability among exits, the mean
/// exit time, and bookkeeping fractions.
#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub probability: Estimate,
    pub mean_exit_time: Estimate,
    pub censored_fraction: f64,
    pub corrected_fraction: f64,
}

impl ExitReport {
    /// Censoring above 1% makes a proportion estimate unreliable.
    pub fn reliable(&self) -> bool {
        self.censored_fraction <= 0.01
    }
}

fn exit_survey<H>(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    region: &ExitRegion,
    cfg: &SimConfig,
    hit: H,
) -> Result<ExitReport>
where
    H: Fn(ExitFace, &DVector<f64>) -> bool + Sync,
{
    let out = run_ensemble(
        field,
        s,
        x,
        cfg,
        |_, walker| {
            Ok(match walker.run_exit(region, cfg.max_time)? {
                ExitStatus::Exited(rec) => {
                    Some((hit(rec.face, &rec.exit_point), rec.exit_time, rec.corrected))
                }
                ExitStatus::Censored { .. } => None,
            })
        },
        &ExitReduction,
    )?;
    let acc = out.value;
    let total = acc.exited + acc.censored;
    let probability =
        Estimate::from_proportion(acc.hits, acc.exited).with_censoring(acc.censored, total);
    let censored_fraction = probability.censored_fraction;
    let mean_exit_time = acc.exit_time.estimate().with_censoring(acc.censored, total);
    Ok(ExitReport {
        probability,
        mean_exit_time,
        censored_fraction,
        corrected_fraction: if acc.exited == 0 {
            0.0
        } else {
            acc.corrected as f64 / acc.exited as f64
        },
    })
}

/// `π_G(x, A)`: the probability that the exit position from the ball `G`
/// lands in `A ⊂ ∂G`. Censored paths are excluded and reported in
/// `censored_fraction`; above 1% the report flags itself unreliable.
pub fn harmonic_measure(
    field: &CoefficientField,
    x: &DVector<f64>,
    ball: &Ball,
    target: &BoundaryTarget,
    cfg: &SimConfig,
) -> Result<Estimate> {
    Ok(harmonic_measure_report(field, x, ball, target, cfg)?.probability)
}

/// Full exit report behind [`harmonic_measure`].
pub fn harmonic_measure_report(
    field: &CoefficientField,
    x: &DVector<f64>,
    ball: &Ball,
    target: &BoundaryTarget,
    cfg: &SimConfig,
) -> Result<ExitReport> {
    if !field.time_homogeneous() {
        return Err(Error::precondition(
            "harmonic_measure requires a time-homogeneous field",
        ));
    }
    if !ball.contains(x) {
        return Err(Error::precondition("harmonic_measure requires x in G"));
    }
    let center = ball.center.clone();
    let region = ExitRegion::Spatial(Domain::Ball(ball.clone()));
    exit_survey(field, 0.0, x, &region, cfg, move |_, y| {
        target.contains(&center, y)
    })
}

/// `π_Q(s, x, A)`: the parabolic exit distribution over `∂_p Q`.
pub fn parabolic_exit_distribution(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    q: &ParabolicCylinder,
    target: &ParabolicTarget,
    cfg: &SimConfig,
) -> Result<Estimate> {
    Ok(parabolic_exit_report(field, s, x, q, target, cfg)?.probability)
}

pub fn parabolic_exit_report(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    q: &ParabolicCylinder,
    target: &ParabolicTarget,
    cfg: &SimConfig,
) -> Result<ExitReport> {
    if !q.contains(s, x) {
        return Err(Error::precondition(
            "parabolic_exit_distribution requires (s, x) in Q",
        ));
    }
    let region = ExitRegion::Cylinder(q.clone());
    let qc = q.clone();
    // A cylinder exit happens by the duration; keep max_time above it so the
    // top cap is reached before censoring can trigger.
    let mut cfg = cfg.clone();
    cfg.max_time = cfg.max_time.max(q.duration + cfg.dt);
    exit_survey(field, s, x, &region, &cfg, move |face, y| {
        target.contains(&qc, face, y)
    })
}

/// Knobs of the hitting-probability experiment. The measure fraction `q` and
/// the probe-cylinder shrink `ϰ` are independent; their default coupling
/// `q = 3/8, ϰ = 3/4` is the one the oscillation argument uses.
#[derive(Debug, Clone, Copy)]
pub struct HittingParams {
    pub gamma_fraction: f64,
    pub probe_shrink: f64,
    /// Sample count for the quasi-Monte Carlo volume estimate of `|Γ|`.
    pub qmc_samples: usize,
}

impl Default for HittingParams {
    fn default() -> Self {
        HittingParams {
            gamma_fraction: 3.0 / 8.0,
            probe_shrink: 3.0 / 4.0,
            qmc_samples: 200_000,
        }
    }
}

impl HittingParams {
    /// The probe cylinder `Q_{qϰr², ϰr}` sharing the corner of `q_r`.
    pub fn probe_cylinder(&self, q_r: &ParabolicCylinder) -> ParabolicCylinder {
        ParabolicCylinder::new(
            q_r.t0,
            q_r.x0.clone(),
            self.gamma_fraction * self.probe_shrink * q_r.radius * q_r.radius,
            self.probe_shrink * q_r.radius,
        )
        .expect("probe cylinder parameters are positive")
    }
}

/// `P(γ_s < τ_s)`: the probability that a path started at `(s, x)` hits the
/// compact set `Γ` strictly before leaving `Q_r`. Γ membership is tested at
/// grid points, so the estimate is biased low by `O(√dt)`; that direction is
/// conservative for positivity checks.
pub fn hitting_probability(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    q_r: &ParabolicCylinder,
    gamma: &GammaSet,
    params: &HittingParams,
    cfg: &SimConfig,
) -> Result<Estimate> {
    Ok(
        hitting_profile(field, s, x, q_r, std::slice::from_ref(gamma), params, cfg)?
            .pop()
            .expect("one gamma produces one estimate"),
    )
}

/// Hitting probabilities of several obstacle sets evaluated on *shared*
/// paths: each path is simulated once in `Q_r` and its first entry into every
/// `Γ` is recorded. For nested sets the estimates are monotone exactly,
/// pathwise.
pub fn hitting_profile(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    q_r: &ParabolicCylinder,
    gammas: &[GammaSet],
    params: &HittingParams,
    cfg: &SimConfig,
) -> Result<Vec<Estimate>> {
    if gammas.is_empty() {
        return Err(Error::input("hitting_profile requires at least one Γ"));
    }
    let probe = params.probe_cylinder(q_r);
    let in_probe_closure = s >= probe.t0 - 1e-12
        && s <= probe.t0 + probe.duration + 1e-12
        && (x - &probe.x0).norm() <= probe.radius + 1e-12;
    if !in_probe_closure {
        return Err(Error::precondition(format!(
            "start (s = {s}) outside the closure of the probe cylinder \
             Q_{{qϰr², ϰr}} with duration {:.6} and radius {:.6}",
            probe.duration, probe.radius
        )));
    }
    let q_vol = q_r.volume();
    for (i, gamma) in gammas.iter().enumerate() {
        let vol = gamma
            .volume_exact()
            .unwrap_or_else(|| gamma.volume_in_cylinder_qmc(q_r, params.qmc_samples));
        if vol <= params.gamma_fraction * q_vol {
            return Err(Error::precondition(format!(
                "|Γ[{i}]| = {vol:.6} does not exceed q·|Q_r| = {:.6}",
                params.gamma_fraction * q_vol
            )));
        }
    }

    let region = ExitRegion::Cylinder(q_r.clone());
    let n_gammas = gammas.len();
    let mut cfg = cfg.clone();
    cfg.max_time = cfg.max_time.max(q_r.duration + cfg.dt);
    let max_time = cfg.max_time;
    let out = run_ensemble(
        field,
        s,
        x,
        &cfg,
        |_, walker| {
            // Drive the walk step by step: Γ membership is checked at every
            // grid point strictly before the exit from Q_r.
            let mut hit = vec![false; n_gammas];
            loop {
                let t_abs = walker.absolute_time();
                let state = walker.state();
                if !q_r.contains(t_abs, state) {
                    break;
                }
                let mut all = true;
                for (h, g) in hit.iter_mut().zip(gammas) {
                    if !*h && g.contains(t_abs, state) {
                        *h = true;
                    }
                    all &= *h;
                }
                if all {
                    break; // every Γ already hit; the exit no longer matters
                }
                match walker.step_exit(&region, max_time)? {
                    None => continue,
                    Some(_) => break,
                }
            }
            Ok(hit)
        },
        &CollectReduction::default(),
    )?;
    let per_path = out.value;
    let n = per_path.len() as u64;
    Ok((0..n_gammas)
        .map(|g| {
            let hits = per_path.iter().filter(|p| p[g]).count() as u64;
            Estimate::from_proportion(hits, n)
        })
        .collect())
}

/// Boundary-regularity verdict for one probe point.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityVerdict {
    /// `(h, p̂(h))` along the decreasing schedule.
    pub probe_values: Vec<(f64, Estimate)>,
    pub verdict: Verdict,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    Irregular,
    Inconclusive,
}

/// Estimate `p̂(h) = P_x(τ'_G ≤ h)` along a decreasing schedule of `h` and
/// extrapolate towards `P_x(τ'_G = 0)`, which the zero-one law pins at 0 or 1.
///
/// `P_x(τ' = 0)` itself is not samplable; since `{τ' = 0} = ∩_h {τ' ≤ h}`,
/// the probe values decrease to it as `h ↓ 0`. All `h` are evaluated on
/// shared paths (each path yields one `τ'`), so `p̂` is nonincreasing along
/// the schedule exactly, pathwise.
pub fn regularity_probe(
    field: &CoefficientField,
    domain: &Domain,
    x: &DVector<f64>,
    h_schedule: &[f64],
    threshold: f64,
    cfg: &SimConfig,
) -> Result<RegularityVerdict> {
    if h_schedule.is_empty() {
        return Err(Error::input("regularity_probe requires a nonempty schedule"));
    }
    if h_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input("h_schedule must be strictly decreasing"));
    }
    let h_max = h_schedule[0];
    let h_min = *h_schedule.last().unwrap();
    if !(h_min > 0.0) || h_max > 1.0 {
        return Err(Error::input("h_schedule must lie in (0, 1]"));
    }
    if cfg.dt > h_min / 10.0 {
        return Err(Error::precondition(format!(
            "regularity probe needs dt << h: dt = {} vs smallest h = {h_min}",
            cfg.dt
        )));
    }
    if !on_boundary(domain, x) {
        return Err(Error::precondition("probe point must lie on ∂G"));
    }

    let region = ExitRegion::Spatial(domain.clone());
    let out = run_ensemble(
        field,
        0.0,
        x,
        cfg,
        |_, walker| {
            Ok(match walker.run_exit_after_start(&region, h_max)? {
                ExitStatus::Exited(rec) => rec.exit_time,
                ExitStatus::Censored { .. } => f64::INFINITY,
            })
        },
        &CollectReduction::default(),
    )?;
    let taus = out.value;
    let n = taus.len() as u64;
    let probe_values: Vec<(f64, Estimate)> = h_schedule
        .iter()
        .map(|&h| {
            let hits = taus.iter().filter(|&&tau| tau <= h).count() as u64;
            (h, Estimate::from_proportion(hits, n))
        })
        .collect();

    // Shared paths make p̂ monotone by construction; the guard below only
    // fires if estimates from different runs get stitched together.
    let mut verdict = Verdict::Inconclusive;
    let monotone = probe_values
        .windows(2)
        .all(|w| w[1].1.value <= w[0].1.value + 3.0 * (w[0].1.stderr + w[1].1.stderr));
    if monotone {
        let last = &probe_values.last().unwrap().1;
        if probe_values.iter().all(|(_, e)| e.value >= 1.0 - threshold) {
            verdict = Verdict::Regular;
        } else if last.value <= threshold {
            verdict = Verdict::Irregular;
        }
    }
    Ok(RegularityVerdict {
        probe_values,
        verdict,
        threshold,
    })
}

fn on_boundary(domain: &Domain, x: &DVector<f64>) -> bool {
    let tol = 1e-9 * domain.scale().max(1.0);
    match domain {
        Domain::Ball(b) => b.boundary_distance(x).abs() <= tol,
        Domain::PuncturedBall { ball, puncture } => {
            ball.boundary_distance(x).abs() <= tol || (x - puncture).norm() <= tol
        }
        Domain::HalfBall { ball, axis } => {
            let in_ball = (x - &ball.center).norm() <= ball.radius + tol;
            let on_plane = (x[*axis] - ball.center[*axis]).abs() <= tol;
            let on_sphere =
                ball.boundary_distance(x).abs() <= tol && x[*axis] >= ball.center[*axis] - tol;
            (on_plane && in_ball) || on_sphere
        }
    }
}

/// A compactly supported C² test function with closed-form derivatives: the
/// tensor cosine bump `φ(x) = A·Π_i ψ((x_i - c_i)/w)` with
/// `ψ(u) = (1 + cos πu)²/4` on `|u| < 1` and `0` outside.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub amplitude: f64,
    pub center: DVector<f64>,
    pub width: f64,
}

impl TestFunction {
    pub fn new(amplitude: f64, center: DVector<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::input("test function width must be > 0"));
        }
        Ok(TestFunction {
            amplitude,
            center,
            width,
        })
    }

    fn psi(u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let c = (std::f64::consts::PI * u).cos();
        (1.0 + c) * (1.0 + c) / 4.0
    }

    fn psi_d1(u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let pu = std::f64::consts::PI * u;
        -std::f64::consts::PI * (1.0 + pu.cos()) * pu.sin() / 2.0
    }

    fn psi_d2(u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let pu = std::f64::consts::PI * u;
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        -pi2 * (pu.cos() + (2.0 * pu).cos()) / 2.0
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.amplitude;
        for i in 0..x.len() {
            v *= Self::psi((x[i] - self.center[i]) / self.width);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x.len();
        let us: Vec<f64> = (0..d)
            .map(|i| (x[i] - self.center[i]) / self.width)
            .collect();
        let psis: Vec<f64> = us.iter().map(|&u| Self::psi(u)).collect();
        DVector::from_fn(d, |i, _| {
            let mut g = self.amplitude * Self::psi_d1(us[i]) / self.width;
            for (j, &p) in psis.iter().enumerate() {
                if j != i {
                    g *= p;
                }
            }
            g
        })
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = x.len();
        let us: Vec<f64> = (0..d)
            .map(|i| (x[i] - self.center[i]) / self.width)
            .collect();
        let psis: Vec<f64> = us.iter().map(|&u| Self::psi(u)).collect();
        let d1s: Vec<f64> = us.iter().map(|&u| Self::psi_d1(u)).collect();
        let w2 = self.width * self.width;
        DMatrix::from_fn(d, d, |i, j| {
            let mut h = self.amplitude / w2;
            if i == j {
                h *= Self::psi_d2(us[i]);
                for (k, &p) in psis.iter().enumerate() {
                    if k != i {
                        h *= p;
                    }
                }
            } else {
                h *= d1s[i] * d1s[j];
                for (k, &p) in psis.iter().enumerate() {
                    if k != i && k != j {
                        h *= p;
                    }
                }
            }
            h
        })
    }

    /// `Lφ = aⁱʲ D_ij φ + bⁱ D_i φ` with the coefficients at `(t, x)`.
    pub fn l_value(&self, coeffs: &StepCoeffs<'_>, x: &DVector<f64>) -> f64 {
        let grad = self.gradient(x);
        let hess = self.hessian(x);
        let contract = |a: &DMatrix<f64>| {
            let mut sum = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    sum += a[(i, j)] * hess[(i, j)];
                }
            }
            sum
        };
        match coeffs {
            StepCoeffs::Iso { scale, drift } => {
                let c = scale * scale / 2.0;
                c * hess.trace() + drift.dot(&grad)
            }
            StepCoeffs::Full { a, drift, .. } => contract(a) + drift.dot(&grad),
            StepCoeffs::Owned { a, drift, .. } => contract(a) + drift.dot(&grad),
        }
    }
}

/// Mean of the martingale residual
/// `φ(x_t) − φ(x) − ∫₀ᵗ Lφ(x_η) dη` over the ensemble; the integral is a
/// trapezoidal quadrature along the simulated grid. For a true quasi-diffusion
/// the residual is centered; the estimate carries `O(dt)` discretization bias.
pub fn martingale_residual(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    test_fn: &TestFunction,
    t: f64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::input("martingale_residual requires t > 0"));
    }
    let phi0 = test_fn.value(x);
    let out = run_ensemble(
        field,
        s,
        x,
        cfg,
        |_, walker| {
            let mut integral = 0.0;
            let mut prev = test_fn.l_value(
                &field.step_coeffs(walker.absolute_time(), walker.state())?,
                walker.state(),
            );
            while walker.time() < t - 1e-15 {
                let h = walker.dt().min(t - walker.time());
                walker.advance(h)?;
                let cur = test_fn.l_value(
                    &field.step_coeffs(walker.absolute_time(), walker.state())?,
                    walker.state(),
                );
                integral += 0.5 * (prev + cur) * h;
                prev = cur;
            }
            Ok(test_fn.value(walker.state()) - phi0 - integral)
        },
        &MeanReduction,
    )?;
    Ok(out.value.estimate())
}

/// Evaluate `T_t f` on a pattern of points with per-point derived seeds;
/// grist for the Hölder fit and the oscillation cascade.
pub fn semigroup_on_points(
    field: &CoefficientField,
    points: &[DVector<f64>],
    t: f64,
    payoff: &Payoff,
    cfg: &SimConfig,
) -> Result<Vec<Estimate>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cfg_i = cfg
                .clone()
                .with_seed(crate::rng::derive_seed(cfg.seed, i as u64));
            semigroup(field, p, t, payoff, &cfg_i)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::EllipticityCertificate;

    fn cfg(dt: f64, max_time: f64, seed: u64, n: u64) -> SimConfig {
        SimConfig::new(dt, max_time, seed, true, n).unwrap()
    }

    #[test]
    fn semigroup_of_constant_payoff_is_exact() {
        let field = CoefficientField::identity(2);
        let est = semigroup(
            &field,
            &DVector::zeros(2),
            0.1,
            &Payoff::Constant(3.25),
            &cfg(1e-2, 1.0, 1, 300),
        )
        .unwrap();
        assert_eq!(est.value, 3.25);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn semigroup_halfspace_symmetry() {
        // a = I, b = 0, d = 1, f = 1_{x>0}, start 0: value 1/2 within 3 stderr.
        let field = CoefficientField::identity(1);
        let est = semigroup(
            &field,
            &DVector::zeros(1),
            0.25,
            &Payoff::IndicatorHalfspace {
                normal: DVector::from_vec(vec![1.0]),
                offset: 0.0,
            },
            &cfg(1e-3, 1.0, 7, 20_000),
        )
        .unwrap();
        assert!(
            est.within_sigmas(0.5, 3.0),
            "got {} ± {}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn semigroup_characteristic_function() {
        // E[cos(ξ·x_t)] = cos(ξ·x)·exp(−|ξ|²t) for a = I, b = 0.
        let field = CoefficientField::identity(2);
        let xi = DVector::from_vec(vec![1.0, 2.0]);
        let x0 = DVector::from_vec(vec![0.3, -0.1]);
        let t = 0.2;
        let est = semigroup(
            &field,
            &x0,
            t,
            &Payoff::Cosine { xi: xi.clone() },
            &cfg(1e-3, 1.0, 11, 20_000),
        )
        .unwrap();
        let want = xi.dot(&x0).cos() * (-xi.norm_squared() * t).exp();
        assert!(
            est.within_sigmas(want, 3.0),
            "got {} ± {}, want {want}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn semigroup_rejects_time_dependent_fields() {
        let cert = EllipticityCertificate::new(0.5, 0.0, 1).unwrap();
        let field = CoefficientField::time_oscillating(cert, 1.0).unwrap();
        assert!(semigroup(
            &field,
            &DVector::zeros(1),
            0.1,
            &Payoff::Constant(1.0),
            &cfg(1e-3, 1.0, 1, 10),
        )
        .is_err());
    }

    #[test]
    fn payoff_contract_violation_is_reported() {
        let field = CoefficientField::identity(1);
        let bad = Payoff::Custom {
            name: "unbounded".into(),
            f: Arc::new(|x: &DVector<f64>| 1.0 / (x[0] - x[0])),
        };
        let err = semigroup(&field, &DVector::zeros(1), 0.1, &bad, &cfg(1e-2, 1.0, 1, 10));
        assert!(err.is_err());
    }

    #[test]
    fn kernel_matches_semigroup_for_autonomous_fields() {
        let cert = EllipticityCertificate::new(0.5, 0.0, 1).unwrap();
        let field = CoefficientField::checkerboard(cert, 0.5).unwrap();
        let payoff = Payoff::IndicatorHalfspace {
            normal: DVector::from_vec(vec![1.0]),
            offset: 0.25,
        };
        let c = cfg(1e-3, 1.0, 21, 8000);
        let t_total = 0.3;
        let s = 0.1;
        let a = semigroup(&field, &DVector::zeros(1), t_total - s, &payoff, &c).unwrap();
        let b = parabolic_kernel(&field, s, &DVector::zeros(1), t_total, &payoff, &c).unwrap();
        // Shared seeds and an autonomous field: identical draws, identical
        // grids, so the two estimates coincide exactly.
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn kernel_requires_s_before_horizon() {
        let field = CoefficientField::identity(1);
        assert!(parabolic_kernel(
            &field,
            1.0,
            &DVector::zeros(1),
            1.0,
            &Payoff::Constant(1.0),
            &cfg(1e-3, 1.0, 1, 10)
        )
        .is_err());
    }

    #[test]
    fn kernel_periodicity_for_time_oscillating_field() {
        let cert = EllipticityCertificate::new(0.5, 0.0, 1).unwrap();
        let period = 0.25;
        let field = CoefficientField::time_oscillating(cert, period).unwrap();
        let payoff = Payoff::Cosine {
            xi: DVector::from_vec(vec![1.5]),
        };
        let c = cfg(1e-3, 1.0, 33, 12_000);
        let h1 =
            parabolic_kernel(&field, 0.05, &DVector::zeros(1), 0.05 + 0.3, &payoff, &c).unwrap();
        let h2 = parabolic_kernel(
            &field,
            0.05 + period,
            &DVector::zeros(1),
            0.05 + period + 0.3,
            &payoff,
            &c,
        )
        .unwrap();
        // Same horizon, phases aligned by one full period: equal in law; and
        // with shared seeds the sampled grids align, so exactly equal.
        assert_eq!(h1.value, h2.value);
    }

    #[test]
    fn feller_time_step_payoff_is_exact() {
        let field = CoefficientField::identity(1);
        let payoff = SpaceTimePayoff::TimeStep { threshold: 1.0 };
        let c = cfg(1e-2, 2.0, 3, 200);
        let below = feller_scenario(&field, &payoff, -0.5, &DVector::zeros(1), 1.0, &c).unwrap();
        assert_eq!(below.value, 0.0);
        assert_eq!(below.stderr, 0.0);
        let above = feller_scenario(&field, &payoff, 0.5, &DVector::zeros(1), 1.0, &c).unwrap();
        assert_eq!(above.value, 1.0);
        assert_eq!(above.stderr, 0.0);
    }

    #[test]
    fn harmonic_measure_of_full_boundary_is_one() {
        let field = CoefficientField::identity(2);
        let ball = Ball::unit(2);
        let est = harmonic_measure(
            &field,
            &DVector::zeros(2),
            &ball,
            &BoundaryTarget::All,
            &cfg(1e-3, 64.0, 5, 500),
        )
        .unwrap();
        assert_eq!(est.value, 1.0);
        assert!(est.censored_fraction < 0.01);
    }

    #[test]
    fn harmonic_measure_hemisphere_symmetry() {
        let field = CoefficientField::identity(2);
        let ball = Ball::unit(2);
        let est = harmonic_measure(
            &field,
            &DVector::zeros(2),
            &ball,
            &BoundaryTarget::Halfspace {
                normal: DVector::from_vec(vec![0.0, 1.0]),
                offset: 0.0,
            },
            &cfg(1e-3, 64.0, 17, 4000),
        )
        .unwrap();
        assert!(
            est.within_sigmas(0.5, 3.0),
            "got {} ± {}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn harmonic_measure_additivity_is_exact_on_shared_seeds() {
        let cert = EllipticityCertificate::new(0.5, 0.0, 2).unwrap();
        let field = CoefficientField::checkerboard(cert, 0.5).unwrap();
        let ball = Ball::unit(2);
        let x = DVector::from_vec(vec![0.2, 0.1]);
        let c = cfg(2e-3, 64.0, 29, 2000);
        let up = BoundaryTarget::Halfspace {
            normal: DVector::from_vec(vec![0.0, 1.0]),
            offset: 0.0,
        };
        let down = BoundaryTarget::Custom {
            name: "lower-closed".into(),
            f: Arc::new(|y: &DVector<f64>| y[1] <= 0.0),
        };
        let pa = harmonic_measure(&field, &x, &ball, &up, &c).unwrap();
        let pb = harmonic_measure(&field, &x, &ball, &down, &c).unwrap();
        assert_eq!(pa.value + pb.value, 1.0);
    }

    #[test]
    fn parabolic_exit_of_full_boundary_is_one_and_uncensored() {
        let cert = EllipticityCertificate::new(0.5, 0.0, 1).unwrap();
        let field = CoefficientField::checkerboard(cert, 0.3).unwrap();
        let q = ParabolicCylinder::unit(1);
        let est = parabolic_exit_distribution(
            &field,
            0.0,
            &DVector::zeros(1),
            &q,
            &ParabolicTarget::AllParabolic,
            &cfg(1e-3, 0.5, 3, 400), // max_time below duration gets raised internally
        )
        .unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.censored_fraction, 0.0);
    }

    #[test]
    fn hitting_probability_trivial_cases() {
        let field = CoefficientField::identity(1);
        let q = ParabolicCylinder::unit(1);
        let params = HittingParams::default();
        let c = cfg(1e-3, 2.0, 9, 400);
        // Γ covering all of Q̄_r: hit immediately.
        let gamma = GammaSet::Slab {
            t_lo: 0.0,
            t_hi: 1.0,
            ball: Ball::centered(1, 1.0).unwrap(),
        };
        let est =
            hitting_probability(&field, 0.0, &DVector::zeros(1), &q, &gamma, &params, &c).unwrap();
        assert_eq!(est.value, 1.0);
        // Start inside Γ = [0, r²/2] × [−r/2, r/2]; hit at time zero. This Γ
        // fills a quarter of Q_1, so probe it with a smaller measure fraction.
        let params = HittingParams {
            gamma_fraction: 0.2,
            ..HittingParams::default()
        };
        let gamma = GammaSet::Box(
            crate::geometry::SpaceTimeBox::new(
                0.0,
                0.5,
                DVector::from_vec(vec![-0.5]),
                DVector::from_vec(vec![0.5]),
            )
            .unwrap(),
        );
        let est =
            hitting_probability(&field, 0.0, &DVector::zeros(1), &q, &gamma, &params, &c).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn hitting_rejects_small_gamma_and_bad_start() {
        let field = CoefficientField::identity(1);
        let q = ParabolicCylinder::unit(1);
        let params = HittingParams::default();
        let c = cfg(1e-3, 2.0, 9, 100);
        let thin = GammaSet::Box(
            crate::geometry::SpaceTimeBox::new(
                0.0,
                0.01,
                DVector::from_vec(vec![-0.1]),
                DVector::from_vec(vec![0.1]),
            )
            .unwrap(),
        );
        assert!(matches!(
            hitting_probability(&field, 0.0, &DVector::zeros(1), &q, &thin, &params, &c),
            Err(Error::Precondition(_))
        ));
        let big = GammaSet::Slab {
            t_lo: 0.0,
            t_hi: 0.6,
            ball: Ball::centered(1, 0.9).unwrap(),
        };
        // Start outside the probe cylinder closure (qϰr² = 0.28125).
        assert!(matches!(
            hitting_probability(&field, 0.9, &DVector::zeros(1), &q, &big, &params, &c),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn hitting_profile_is_monotone_on_nested_slabs() {
        let cert = EllipticityCertificate::new(0.5, 0.0, 1).unwrap();
        let field = CoefficientField::checkerboard(cert, 0.4).unwrap();
        let q = ParabolicCylinder::unit(1);
        let params = HittingParams {
            gamma_fraction: 0.05,
            ..Default::default()
        };
        let c = cfg(1e-3, 2.0, 13, 500);
        let slab = |h: f64| GammaSet::Slab {
            t_lo: 0.2,
            t_hi: 0.2 + h,
            ball: Ball::centered(1, 0.8).unwrap(),
        };
        let gammas = vec![slab(0.15), slab(0.3), slab(0.6)];
        let ests =
            hitting_profile(&field, 0.0, &DVector::zeros(1), &q, &gammas, &params, &c).unwrap();
        assert!(ests[0].value <= ests[1].value);
        assert!(ests[1].value <= ests[2].value);
    }

    #[test]
    fn test_function_derivatives_match_finite_differences() {
        let tf = TestFunction::new(1.5, DVector::from_vec(vec![0.1, -0.2]), 0.9).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.2]);
        let h = 1e-6;
        let grad = tf.gradient(&x);
        let hess = tf.hessian(&x);
        for i in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (tf.value(&xp) - tf.value(&xm)) / (2.0 * h);
            assert!((grad[i] - fd).abs() < 1e-7, "grad[{i}]: {} vs {fd}", grad[i]);
            for j in 0..2 {
                let mut xpp = x.clone();
                xpp[i] += h;
                let gp = tf.gradient(&xpp)[j];
                let mut xmm = x.clone();
                xmm[i] -= h;
                let gm = tf.gradient(&xmm)[j];
                let fd2 = (gp - gm) / (2.0 * h);
                assert!(
                    (hess[(i, j)] - fd2).abs() < 1e-6,
                    "hess[({i},{j})]: {} vs {fd2}",
                    hess[(i, j)]
                );
            }
        }
        // Compact support and C² decay at the edge.
        assert_eq!(tf.value(&DVector::from_vec(vec![1.1, 0.0])), 0.0);
        let edge = DVector::from_vec(vec![0.1 + 0.9 * (1.0 - 1e-9), -0.2]);
        assert!(tf.gradient(&edge).norm() < 1e-6);
    }

    #[test]
    fn martingale_residual_vanishes_for_identity_field() {
        let field = CoefficientField::identity(1);
        let tf = TestFunction::new(1.0, DVector::zeros(1), 1.0).unwrap();
        let c = cfg(1e-3, 1.0, 41, 8000);
        let est = martingale_residual(&field, 0.0, &DVector::zeros(1), &tf, 0.1, &c).unwrap();
        let allowance = 3.0 * est.stderr + 50.0 * c.dt;
        assert!(
            est.value.abs() <= allowance,
            "residual {} exceeds allowance {allowance}",
            est.value
        );
    }

    #[test]
    fn regularity_probe_flat_sphere_point_is_regular() {
        let field = CoefficientField::identity(2);
        let g = Domain::Ball(Ball::unit(2));
        let mut x = DVector::zeros(2);
        x[0] = 1.0;
        let schedule = [0.25, 0.125, 0.0625];
        let v =
            regularity_probe(&field, &g, &x, &schedule, 0.1, &cfg(1e-3, 1.0, 6, 400)).unwrap();
        assert_eq!(v.verdict, Verdict::Regular);
        for (_, e) in &v.probe_values {
            assert!(e.value > 0.9);
        }
    }

    #[test]
    fn regularity_probe_punctured_disk_center_is_irregular() {
        let field = CoefficientField::identity(2);
        let g = Domain::PuncturedBall {
            ball: Ball::unit(2),
            puncture: DVector::zeros(2),
        };
        let schedule = [0.25, 0.0625, 0.015625];
        let v = regularity_probe(
            &field,
            &g,
            &DVector::zeros(2),
            &schedule,
            0.1,
            &cfg(1e-4, 1.0, 8, 600),
        )
        .unwrap();
        assert_eq!(v.verdict, Verdict::Irregular);
        // p̂ decreasing pathwise.
        assert!(v.probe_values[0].1.value >= v.probe_values[2].1.value);
    }

    #[test]
    fn regularity_probe_rejects_interior_points_and_coarse_dt() {
        let field = CoefficientField::identity(2);
        let g = Domain::Ball(Ball::unit(2));
        assert!(regularity_probe(
            &field,
            &g,
            &DVector::zeros(2),
            &[0.5, 0.25],
            0.1,
            &cfg(1e-3, 1.0, 1, 10)
        )
        .is_err());
        let mut x = DVector::zeros(2);
        x[0] = 1.0;
        assert!(
            regularity_probe(&field, &g, &x, &[0.5, 0.01], 0.1, &cfg(1e-2, 1.0, 1, 10)).is_err()
        );
    }
}
