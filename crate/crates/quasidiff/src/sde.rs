//! Euler-Maruyama engine for `dx = b(s+t, x) dt + √(2a(s+t, x)) dw` with
//! first-exit detection and deterministic seeded parallelism.
//!
//! Every path reads its randomness from a counter-based stream keyed by
//! `(seed, path_index)`; inside a path, step `k` owns the counter range
//! `[k·stride, (k+1)·stride)` with a fixed slot layout (two uniforms per
//! Gaussian component, one uniform reserved for the boundary-crossing test).
//! Trajectories are therefore bit-identical regardless of worker count,
//! scheduling, or whether the crossing correction consumed its slot.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::coefficients::{CoefficientField, StepCoeffs};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryClass, Domain, ParabolicCylinder, SpaceTime};
use crate::rng::CounterStream;
use crate::stats::{Histogram, MeanAcc};

/// Paths per work block. Blocks are reduced in index order, so the reduced
/// value does not depend on how rayon schedules them.
const BLOCK: u64 = 256;

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Euler step.
    pub dt: f64,
    /// Censoring horizon (per-path time).
    pub max_time: f64,
    pub seed: u64,
    /// Sample a Brownian-bridge crossing of the locally flattened boundary
    /// inside each step; kills the O(√dt) exit-time bias.
    pub bridge_correction: bool,
    pub n_paths: u64,
}

impl SimConfig {
    pub fn new(dt: f64, max_time: f64, seed: u64, bridge_correction: bool, n_paths: u64) -> Result<Self> {
        let cfg = SimConfig {
            dt,
            max_time,
            seed,
            bridge_correction,
            n_paths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for a domain of spatial scale `r`: `dt = 1e-4·min(1, r²)`,
    /// horizon `64·r²`, bridge correction on.
    pub fn for_scale(r: f64, seed: u64, n_paths: u64) -> Result<Self> {
        SimConfig::new(1e-4 * (r * r).min(1.0), 64.0 * r * r, seed, true, n_paths)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::input(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.max_time >= self.dt) || !self.max_time.is_finite() {
            return Err(Error::input("max_time must be >= dt"));
        }
        if self.n_paths == 0 {
            return Err(Error::input("n_paths must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_paths(mut self, n: u64) -> Self {
        self.n_paths = n;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

/// A simulated trajectory on a uniform grid (final step may be partial).
/// States are stored flat, `d` components per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub start_time: f64,
    pub dimension: usize,
    /// Elapsed times, `times[0] = 0`.
    pub times: Vec<f64>,
    states: Vec<f64>,
    pub stream_id: u64,
}

impl Path {
    pub fn n_states(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.n_states() - 1)
    }

    /// Binary dump: little-endian header `{d: u32, n_states: u64, dt: f64}`
    /// followed by the states as f64, one grid point after another.
    pub fn dump<W: Write>(&self, dt: f64, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.n_states() as u64).to_le_bytes())?;
        w.write_all(&dt.to_le_bytes())?;
        for v in &self.states {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Which face of the region a path exited through. Spatial domains only have
/// lateral exits; cylinders also exit through the top cap, detected exactly
/// in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExitFace {
    Lateral,
    Top,
}

/// One first-exit observation.
#[derive(Debug, Clone)]
pub struct ExitRecord {
    /// `τ`, in path time (elapsed since the start).
    pub exit_time: f64,
    pub exit_point: DVector<f64>,
    pub face: ExitFace,
    /// Whether the bridge correction triggered the exit.
    pub corrected: bool,
}

/// Exit detection outcome; censoring is the caller's problem by design.
#[derive(Debug, Clone)]
pub enum ExitStatus {
    Exited(ExitRecord),
    Censored { time: f64, state: DVector<f64> },
}

enum StepOutcome {
    Done(ExitStatus),
    Inside { dist_after: f64 },
}

impl ExitStatus {
    pub fn record(&self) -> Option<&ExitRecord> {
        match self {
            ExitStatus::Exited(r) => Some(r),
            ExitStatus::Censored { .. } => None,
        }
    }
}

/// Region a path exits from.
#[derive(Debug, Clone)]
pub enum ExitRegion {
    /// Elliptic: exit when `x_t` leaves the spatial domain.
    Spatial(Domain),
    /// Parabolic: exit when `(s + t, x_t)` leaves the cylinder.
    Cylinder(ParabolicCylinder),
}

impl ExitRegion {
    pub fn contains_start(&self, s: f64, x: &DVector<f64>) -> bool {
        match self {
            ExitRegion::Spatial(g) => g.contains(x),
            ExitRegion::Cylinder(q) => q.contains(s, x),
        }
    }
}

/// One path in flight: the Euler-Maruyama stepping core. Estimators drive it
/// directly when they need the whole trajectory (quadrature along the grid);
/// everything else goes through [`run_ensemble`].
pub struct PathWalker<'a> {
    field: &'a CoefficientField,
    start_time: f64,
    dt: f64,
    bridge: bool,
    stream: CounterStream,
    stride: u64,
    step_index: u64,
    t: f64,
    x: DVector<f64>,
    x_prev: DVector<f64>,
    z: DVector<f64>,
    work: DVector<f64>,
}

impl<'a> PathWalker<'a> {
    pub fn new(
        field: &'a CoefficientField,
        s: f64,
        x0: &DVector<f64>,
        cfg: &SimConfig,
        path_index: u64,
    ) -> Self {
        let d = field.dimension();
        PathWalker {
            field,
            start_time: s,
            dt: cfg.dt,
            bridge: cfg.bridge_correction,
            stream: CounterStream::new(cfg.seed, path_index),
            stride: 2 * d as u64 + 2,
            step_index: 0,
            t: 0.0,
            x: x0.clone(),
            x_prev: DVector::zeros(d),
            z: DVector::zeros(d),
            work: DVector::zeros(d),
        }
    }

    /// Elapsed path time.
    pub fn time(&self) -> f64 {
        self.t
    }

    /// Absolute time `s + t` the coefficients see.
    pub fn absolute_time(&self) -> f64 {
        self.start_time + self.t
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn draw_gaussians(&mut self) {
        self.stream.seek(self.step_index * self.stride);
        for i in 0..self.z.len() {
            self.z[i] = self.stream.gaussian();
        }
    }

    /// The uniform reserved for a step's crossing test (slot `2d` of that
    /// step's counter range).
    fn bridge_uniform(&mut self, step_index: u64) -> f64 {
        self.stream
            .seek(step_index * self.stride + 2 * self.z.len() as u64);
        self.stream.uniform()
    }

    /// One Euler-Maruyama step of size `h`:
    /// `x ← x + b(s+t, x)·h + σ(s+t, x)·√h·Z`.
    pub fn advance(&mut self, h: f64) -> Result<()> {
        debug_assert!(h > 0.0);
        self.draw_gaussians();
        let sqrt_h = h.sqrt();
        let coeffs = self.field.step_coeffs(self.absolute_time(), &self.x)?;
        match coeffs {
            StepCoeffs::Iso { scale, drift } => {
                let s = scale * sqrt_h;
                for i in 0..self.x.len() {
                    self.x[i] += drift[i] * h + s * self.z[i];
                }
            }
            StepCoeffs::Full { sigma, drift, .. } => {
                self.work.gemv(sqrt_h, sigma, &self.z, 0.0);
                for i in 0..self.x.len() {
                    self.x[i] += drift[i] * h + self.work[i];
                }
            }
            StepCoeffs::Owned { sigma, drift, .. } => {
                self.work.gemv(sqrt_h, &sigma, &self.z, 0.0);
                for i in 0..self.x.len() {
                    self.x[i] += drift[i] * h + self.work[i];
                }
            }
        }
        self.t += h;
        self.step_index += 1;
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                step: self.step_index,
                detail: "state became non-finite".into(),
            });
        }
        Ok(())
    }

    /// Run to the exact elapsed time `t_target` with full steps of `dt` and
    /// one final partial step.
    pub fn run_to(&mut self, t_target: f64) -> Result<&DVector<f64>> {
        while self.t < t_target - 1e-15 {
            let h = self.dt.min(t_target - self.t);
            self.advance(h)?;
        }
        Ok(&self.x)
    }

    /// First-exit detection against `region`, censored at `max_time`.
    /// Requires the start inside the region.
    pub fn run_exit(&mut self, region: &ExitRegion, max_time: f64) -> Result<ExitStatus> {
        if !region.contains_start(self.start_time, &self.x) {
            return Ok(self.immediate_exit(region));
        }
        self.exit_loop(region, max_time)
    }

    /// Exit detection that skips the start-membership test; used by the
    /// regularity probe, which launches paths from boundary points and asks
    /// for the first exit after time 0+.
    pub fn run_exit_after_start(
        &mut self,
        region: &ExitRegion,
        max_time: f64,
    ) -> Result<ExitStatus> {
        self.exit_loop(region, max_time)
    }

    fn immediate_exit(&self, region: &ExitRegion) -> ExitStatus {
        let face = match region {
            ExitRegion::Spatial(_) => ExitFace::Lateral,
            ExitRegion::Cylinder(q) => {
                match q.classify(&SpaceTime::new(self.start_time, self.x.clone())) {
                    BoundaryClass::Top => ExitFace::Top,
                    _ => ExitFace::Lateral,
                }
            }
        };
        let exit_point = match region {
            ExitRegion::Spatial(g) => g.project_to_boundary(&self.x),
            ExitRegion::Cylinder(q) => match face {
                ExitFace::Top => self.x.clone(),
                ExitFace::Lateral => q.ball().project_to_boundary(&self.x),
            },
        };
        ExitStatus::Exited(ExitRecord {
            exit_time: 0.0,
            exit_point,
            face,
            corrected: false,
        })
    }

    fn spatial_distance(&self, region: &ExitRegion, x: &DVector<f64>) -> f64 {
        match region {
            ExitRegion::Spatial(g) => g.boundary_distance(x),
            ExitRegion::Cylinder(q) => {
                crate::geometry::ball_radial_distance(&q.x0, q.radius, x)
            }
        }
    }

    /// How far the step advanced toward the tangent plane frozen at the
    /// previous position's nearest boundary point.
    fn normal_advance(&self, region: &ExitRegion, x_prev: &DVector<f64>) -> f64 {
        match region {
            ExitRegion::Spatial(g) => g.normal_advance(x_prev, &self.x),
            ExitRegion::Cylinder(q) => {
                crate::geometry::ball_normal_advance(&q.x0, x_prev, &self.x)
            }
        }
    }

    fn exit_loop(&mut self, region: &ExitRegion, max_time: f64) -> Result<ExitStatus> {
        // Lateral stopping data for the current position.
        let mut dist_before = self.spatial_distance(region, &self.x).max(0.0);
        loop {
            match self.exit_step_inner(region, max_time, dist_before)? {
                StepOutcome::Done(status) => return Ok(status),
                StepOutcome::Inside { dist_after } => dist_before = dist_after,
            }
        }
    }

    /// Advance one grid step with exit detection. `None` means the path is
    /// still strictly inside the region and the clock has not run out.
    pub fn step_exit(&mut self, region: &ExitRegion, max_time: f64) -> Result<Option<ExitStatus>> {
        let dist_before = self.spatial_distance(region, &self.x).max(0.0);
        Ok(match self.exit_step_inner(region, max_time, dist_before)? {
            StepOutcome::Done(status) => Some(status),
            StepOutcome::Inside { .. } => None,
        })
    }

    fn exit_step_inner(
        &mut self,
        region: &ExitRegion,
        max_time: f64,
        dist_before: f64,
    ) -> Result<StepOutcome> {
        let remaining = max_time - self.t;
        if remaining <= 1e-12 {
            return Ok(StepOutcome::Done(ExitStatus::Censored {
                time: self.t,
                state: self.x.clone(),
            }));
        }
        let mut h = self.dt.min(remaining);
        let mut hits_top = false;
        if let ExitRegion::Cylinder(q) = region {
            let top_time = q.t_end() - self.start_time;
            if self.t + h >= top_time - 1e-15 {
                h = top_time - self.t;
                hits_top = true;
                if h <= 0.0 {
                    // Already at the cap (possible when s + t rounds up).
                    return Ok(StepOutcome::Done(self.top_exit()));
                }
            }
        }

        // The crossing test freezes the diffusion at the step's left end:
        // σ_n² = 2 nᵀ a(s+t, x_k) n along the outward normal at x_k.
        let sigma_n_sq = if self.bridge {
            let coeffs = self.field.step_coeffs(self.absolute_time(), &self.x)?;
            match &coeffs {
                StepCoeffs::Iso { scale, .. } => scale * scale,
                _ => {
                    let n = match region {
                        ExitRegion::Spatial(g) => g.outward_normal(&self.x),
                        ExitRegion::Cylinder(q) => q.ball().outward_normal(&self.x),
                    };
                    coeffs.normal_variance(&n)
                }
            }
        } else {
            0.0
        };

        let this_step = self.step_index;
        self.x_prev.copy_from(&self.x);
        self.advance(h)?;

        let dist_after = self.spatial_distance(region, &self.x);
        if dist_after <= 0.0 {
            return Ok(StepOutcome::Done(self.lateral_exit(region, false, self.t)));
        }
        if self.bridge && sigma_n_sq > 0.0 {
            // Signed distances to the tangent plane frozen at the step's
            // start: d1 is exact there, d2 follows from the normal advance.
            // Both endpoints sit inside, so on balls and half-balls
            // (convex domains) d2 stays positive.
            let plane_after = (dist_before - self.normal_advance(region, &self.x_prev)).max(0.0);
            let exponent = -2.0 * dist_before * plane_after / (sigma_n_sq * h);
            if exponent > -40.0 {
                let u = self.bridge_uniform(this_step);
                if u < exponent.exp() {
                    let theta = if dist_before + plane_after > 0.0 {
                        dist_before / (dist_before + plane_after)
                    } else {
                        0.0
                    };
                    let crossing_time = self.t - h + theta * h;
                    return Ok(StepOutcome::Done(self.lateral_exit(
                        region,
                        true,
                        crossing_time,
                    )));
                }
            }
        }
        if hits_top {
            return Ok(StepOutcome::Done(self.top_exit()));
        }
        Ok(StepOutcome::Inside { dist_after })
    }

    fn lateral_exit(&self, region: &ExitRegion, corrected: bool, exit_time: f64) -> ExitStatus {
        let exit_point = match region {
            ExitRegion::Spatial(g) => g.project_to_boundary(&self.x),
            ExitRegion::Cylinder(q) => q.ball().project_to_boundary(&self.x),
        };
        ExitStatus::Exited(ExitRecord {
            exit_time,
            exit_point,
            face: ExitFace::Lateral,
            corrected,
        })
    }

    fn top_exit(&self) -> ExitStatus {
        ExitStatus::Exited(ExitRecord {
            exit_time: self.t,
            exit_point: self.x.clone(),
            face: ExitFace::Top,
            corrected: false,
        })
    }
}

/// Simulate one full trajectory over `[0, max_time]`.
pub fn simulate_path(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<Path> {
    cfg.validate()?;
    if !s.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("simulate_path requires finite (s, x)"));
    }
    let mut walker = PathWalker::new(field, s, x, cfg, path_index);
    let d = field.dimension();
    let n_steps = (cfg.max_time / cfg.dt).ceil() as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity((n_steps + 1) * d);
    times.push(0.0);
    states.extend_from_slice(x.as_slice());
    while walker.time() < cfg.max_time - 1e-15 {
        let h = cfg.dt.min(cfg.max_time - walker.time());
        walker.advance(h)?;
        times.push(walker.time());
        states.extend_from_slice(walker.state().as_slice());
    }
    Ok(Path {
        start_time: s,
        dimension: d,
        times,
        states,
        stream_id: path_index,
    })
}

/// First-exit record for one path.
pub fn exit_sample(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    region: &ExitRegion,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<ExitStatus> {
    cfg.validate()?;
    let mut walker = PathWalker::new(field, s, x, cfg, path_index);
    walker.run_exit(region, cfg.max_time)
}

/// A mergeable reduction over per-path values. Accumulation happens inside a
/// block; blocks merge in index order, making the result exact regardless of
/// the worker count.
pub trait Reduction: Sync {
    type Item: Send;
    type Acc: Send;
    fn identity(&self) -> Self::Acc;
    fn accumulate(&self, acc: &mut Self::Acc, item: Self::Item);
    fn merge(&self, into: &mut Self::Acc, other: Self::Acc);
}

/// Sum / sum-of-squares reduction producing a [`MeanAcc`].
pub struct MeanReduction;

impl Reduction for MeanReduction {
    type Item = f64;
    type Acc = MeanAcc;
    fn identity(&self) -> MeanAcc {
        MeanAcc::default()
    }
    fn accumulate(&self, acc: &mut MeanAcc, item: f64) {
        acc.push(item);
    }
    fn merge(&self, into: &mut MeanAcc, other: MeanAcc) {
        into.merge(&other);
    }
}

/// Count of `true` items along with the total.
pub struct CountReduction;

impl Reduction for CountReduction {
    type Item = bool;
    type Acc = (u64, u64);
    fn identity(&self) -> (u64, u64) {
        (0, 0)
    }
    fn accumulate(&self, acc: &mut (u64, u64), item: bool) {
        acc.0 += u64::from(item);
        acc.1 += 1;
    }
    fn merge(&self, into: &mut (u64, u64), other: (u64, u64)) {
        into.0 += other.0;
        into.1 += other.1;
    }
}

/// Histogram reduction with fixed binning.
pub struct HistogramReduction {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Reduction for HistogramReduction {
    type Item = f64;
    type Acc = Histogram;
    fn identity(&self) -> Histogram {
        Histogram::new(self.lo, self.hi, self.bins)
    }
    fn accumulate(&self, acc: &mut Histogram, item: f64) {
        acc.push(item);
    }
    fn merge(&self, into: &mut Histogram, other: Histogram) {
        into.merge(&other);
    }
}

/// Collects per-path items in path order.
pub struct CollectReduction<T>(std::marker::PhantomData<fn() -> T>);

impl<T> Default for CollectReduction<T> {
    fn default() -> Self {
        CollectReduction(std::marker::PhantomData)
    }
}

impl<T: Send> Reduction for CollectReduction<T> {
    type Item = T;
    type Acc = Vec<T>;
    fn identity(&self) -> Vec<T> {
        Vec::new()
    }
    fn accumulate(&self, acc: &mut Vec<T>, item: T) {
        acc.push(item);
    }
    fn merge(&self, into: &mut Vec<T>, mut other: Vec<T>) {
        into.append(&mut other);
    }
}

/// Reduced ensemble value plus throughput accounting.
#[derive(Debug, Clone)]
pub struct EnsembleOutput<A> {
    pub value: A,
    pub n_paths: u64,
    pub elapsed_seconds: f64,
    pub paths_per_second: f64,
}

/// Run `functional` over `cfg.n_paths` independent paths and reduce.
///
/// The functional must be pure: everything it needs beyond the walker should
/// be captured immutably. It receives a fresh walker positioned at `(s, x)`
/// with the path's own random stream.
pub fn run_ensemble<T, R, F>(
    field: &CoefficientField,
    s: f64,
    x: &DVector<f64>,
    cfg: &SimConfig,
    functional: F,
    reduction: &R,
) -> Result<EnsembleOutput<R::Acc>>
where
    T: Send,
    R: Reduction<Item = T>,
    F: Fn(u64, &mut PathWalker) -> Result<T> + Sync,
{
    cfg.validate()?;
    let started = Instant::now();
    let n_blocks = cfg.n_paths.div_ceil(BLOCK);
    let block_results: Vec<Result<R::Acc>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * BLOCK;
            let hi = ((blk + 1) * BLOCK).min(cfg.n_paths);
            let mut acc = reduction.identity();
            for path_index in lo..hi {
                let mut walker = PathWalker::new(field, s, x, cfg, path_index);
                let item = functional(path_index, &mut walker).map_err(|e| {
                    Error::Precondition(format!(
                        "path functional failed at path {path_index} of {}: {e}",
                        cfg.n_paths
                    ))
                })?;
                reduction.accumulate(&mut acc, item);
            }
            Ok(acc)
        })
        .collect();

    let mut total = reduction.identity();
    for r in block_results {
        reduction.merge(&mut total, r?);
    }
    let elapsed = started.elapsed().as_secs_f64();
    Ok(EnsembleOutput {
        value: total,
        n_paths: cfg.n_paths,
        elapsed_seconds: elapsed,
        paths_per_second: cfg.n_paths as f64 / elapsed.max(1e-12),
    })
}
