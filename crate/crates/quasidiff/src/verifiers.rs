//! Analytic barrier certification and statistical regularity verification.
//!
//! The barrier half certifies, by exhaustive grid evaluation with closed-form
//! derivatives, that the slanted-paraboloid supersolution really satisfies
//! `(D_t + L)v ≥ 0` once its exponent comes out of the printed formula — and
//! that the certificate fails for an exponent that is too small. The
//! statistical half extracts Hölder exponents, Harnack ratios, and
//! oscillation-decay rates from Monte Carlo estimates of harmonic functions.

use nalgebra::DVector;
use serde::Serialize;

use crate::coefficients::{CoefficientField, StepCoeffs};
use crate::error::{Error, Result};
use crate::geometry::{parabolic_distance, SpaceTime};
use crate::stats::{linear_fit, Estimate};

/// Pass threshold for the grid minimum of the barrier inequality.
pub const BARRIER_TOL: f64 = -1e-10;

/// `N₁(d, ν, K, ε, ϰ)`: an explicit upper bound for `|B(t, x)|` over the
/// slanted paraboloid, assembled from the ingredient bounds
/// `μ ≤ ε²`, `T ≥ ϰ`, `|ξ| ≤ 1 − ε + ϰ⁻¹`, `|z| ≤ ε`, `tr a ≤ dν⁻¹`, and
/// `|b·z| ≤ K√d·|z|` (the `√d` comes from the componentwise bound `|bⁱ| < K`).
pub fn barrier_drift_bound(d: usize, nu: f64, k: f64, epsilon: f64, kappa: f64) -> f64 {
    let xi_max = 1.0 - epsilon + 1.0 / kappa;
    2.0 * epsilon * epsilon / kappa
        + (4.0 / kappa) * xi_max * epsilon
        + 4.0 * d as f64 / nu
        + 4.0 * k * (d as f64).sqrt() * epsilon
}

/// The printed exponent formula:
/// `n = 2 + (4/3)·ε⁻²·N₁·(ϰ + ϰ·N₁/(8ν))`.
pub fn barrier_exponent(n1: f64, epsilon: f64, kappa: f64, nu: f64) -> f64 {
    2.0 + (4.0 / 3.0) / (epsilon * epsilon) * n1 * (kappa + kappa * n1 / (8.0 * nu))
}

/// Compute `(N₁, n)` for the oblique barrier from the class parameters.
pub fn barrier_n(d: usize, nu: f64, k: f64, epsilon: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::input("barrier_n requires nu in (0, 1]"));
    }
    if !(k >= 0.0) {
        return Err(Error::input("barrier_n requires K >= 0"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::input("barrier_n requires epsilon in (0, 1)"));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::input("barrier_n requires kappa in (0, 1)"));
    }
    if d == 0 {
        return Err(Error::input("barrier_n requires d >= 1"));
    }
    let n1 = barrier_drift_bound(d, nu, k, epsilon, kappa);
    Ok((n1, barrier_exponent(n1, epsilon, kappa, nu)))
}

/// The oblique-cylinder barrier in its `r = 1` normalization:
/// `φ(t, x) = μ(1 − t/T) − |x − y + ξ t/T|² + γ²` over `t ∈ [0, T]`,
/// `v = φ²·(μ(1 − t/T) + γ²)^{-n}`, `μ = ε² − γ²`, `ξ = y − x0`.
///
/// The slanted tube `Q = {φ > 0}` interpolates between the ball `B_ε(y)` at
/// `t = 0` and `B_γ(x0)` at `t = T`.
#[derive(Debug, Clone, Serialize)]
pub struct ObliqueBarrier {
    pub t_span: f64,
    pub x0: Vec<f64>,
    pub y: Vec<f64>,
    pub gamma: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub mu: f64,
    pub xi: Vec<f64>,
    pub n: f64,
    pub n1: f64,
}

impl ObliqueBarrier {
    /// Build the barrier for the class `(d, ν, K)`, with `n` and `N₁`
    /// computed from the printed formulas.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d: usize,
        nu: f64,
        k: f64,
        t_span: f64,
        x0: DVector<f64>,
        y: DVector<f64>,
        gamma: f64,
        epsilon: f64,
        kappa: f64,
    ) -> Result<Self> {
        let (n1, n) = barrier_n(d, nu, k, epsilon, kappa)?;
        if !(t_span >= kappa && t_span <= 1.0 / kappa) {
            return Err(Error::input("barrier requires T in [kappa, 1/kappa]"));
        }
        if x0.norm() > 1.0 / kappa {
            return Err(Error::input("barrier requires |x0| <= 1/kappa"));
        }
        if y.norm() > 1.0 - epsilon {
            return Err(Error::input("barrier start center must lie in B_{1-eps}"));
        }
        if !(gamma > 0.0 && gamma <= epsilon / 2.0) {
            return Err(Error::input(
                "barrier requires gamma in (0, eps/2] (the proof's normalization)",
            ));
        }
        let mu = epsilon * epsilon - gamma * gamma;
        debug_assert!(mu > 0.0);
        let xi = &y - &x0;
        Ok(ObliqueBarrier {
            t_span,
            x0: x0.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
            gamma,
            epsilon,
            kappa,
            mu,
            xi: xi.as_slice().to_vec(),
            n,
            n1,
        })
    }

    /// Centered barrier: slant target and start center both at the origin,
    /// the configuration the Harnack argument uses.
    pub fn centered(d: usize, nu: f64, k: f64, epsilon: f64, kappa: f64) -> Result<Self> {
        ObliqueBarrier::new(
            d,
            nu,
            k,
            1.0f64.clamp(kappa, 1.0 / kappa),
            DVector::zeros(d),
            DVector::zeros(d),
            epsilon / 2.0,
            epsilon,
            kappa,
        )
    }

    /// Replace the exponent, e.g. with an undersized one as a negative
    /// control of the certificate.
    pub fn with_exponent(mut self, n: f64) -> Self {
        self.n = n;
        self
    }

    pub fn dimension(&self) -> usize {
        self.y.len()
    }

    /// `w(t) = μ(1 − t/T) + γ²`, the denominator weight; positive on `[0, T]`.
    pub fn weight(&self, t: f64) -> f64 {
        self.mu * (1.0 - t / self.t_span) + self.gamma * self.gamma
    }

    /// Slant displacement `z(t, x) = x − y + ξ t/T`.
    pub fn displacement(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            x[i] - self.y[i] + self.xi[i] * t / self.t_span
        })
    }

    pub fn phi(&self, t: f64, x: &DVector<f64>) -> f64 {
        self.weight(t) - self.displacement(t, x).norm_squared()
    }

    /// `v = φ² w^{-n}`. Overflows for production-size exponents; meant for
    /// boundary-value checks at small `n`.
    pub fn v_value(&self, t: f64, x: &DVector<f64>) -> f64 {
        let phi = self.phi(t, x).max(0.0);
        phi * phi * self.weight(t).powf(-self.n)
    }

    /// `wⁿ·(D_t + L)v`, assembled from the closed-form derivatives of `v` in
    /// the `wⁿ` gauge:
    /// `wⁿ D_t v = 2φφ_t + A φ²`, `wⁿ D_i v = −4φ z_i`,
    /// `wⁿ D_ij v = 8 z_i z_j − 4φ δ_ij`, with `A = nμ/(T w)`.
    ///
    /// The weight `wⁿ` is strictly positive, so the sign of the returned
    /// value is the sign of `(D_t + L)v`; the unscaled value overflows f64
    /// for realistic exponents.
    pub fn scaled_generator_value(
        &self,
        coeffs: &StepCoeffs<'_>,
        t: f64,
        x: &DVector<f64>,
    ) -> f64 {
        let w = self.weight(t);
        let z = self.displacement(t, x);
        let phi = w - z.norm_squared();
        let a_t = self.n * self.mu / (self.t_span * w);
        let xi_dot_z = self
            .xi
            .iter()
            .zip(z.iter())
            .map(|(xi, zi)| xi * zi)
            .sum::<f64>();
        let (trace_a, z_a_z, b_dot_z) = match coeffs {
            StepCoeffs::Iso { scale, drift } => {
                let c = scale * scale / 2.0;
                (c * x.len() as f64, c * z.norm_squared(), drift.dot(&z))
            }
            StepCoeffs::Full { a, drift, .. } => {
                (a.trace(), (z.transpose() * *a * &z)[0], drift.dot(&z))
            }
            StepCoeffs::Owned { a, drift, .. } => {
                (a.trace(), (z.transpose() * a * &z)[0], drift.dot(&z))
            }
        };
        let b_term = 2.0 * self.mu / self.t_span
            + (4.0 / self.t_span) * xi_dot_z
            + 4.0 * trace_a
            + 4.0 * b_dot_z;
        a_t * phi * phi - b_term * phi + 8.0 * z_a_z
    }
}

/// Result of a barrier grid sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierCheck {
    pub n: f64,
    pub n1: f64,
    pub grid_resolution: usize,
    pub points_checked: u64,
    /// Grid minimum of `wⁿ·(D_t + L)v`.
    pub min_value: f64,
    pub argmin: (f64, Vec<f64>),
    pub pass: bool,
}

/// Evaluate `wⁿ·(D_t + L)v` at every grid point of the tube `Q = {φ > 0}`
/// and report the minimum. Certification passes iff the minimum clears
/// [`BARRIER_TOL`]; grid points outside `Q` are skipped.
pub fn barrier_check(
    field: &CoefficientField,
    barrier: &ObliqueBarrier,
    grid_resolution: usize,
) -> Result<BarrierCheck> {
    if grid_resolution < 2 {
        return Err(Error::input("barrier_check requires grid_resolution >= 2"));
    }
    let d = barrier.dimension();
    if field.dimension() != d {
        return Err(Error::input("field and barrier dimensions differ"));
    }

    let mut min_value = f64::INFINITY;
    let mut argmin = (0.0, vec![0.0; d]);
    let mut checked: u64 = 0;

    let res = grid_resolution;
    let mut x = DVector::zeros(d);
    let mut idx = vec![0usize; d];
    for ti in 0..=res {
        let t = barrier.t_span * ti as f64 / res as f64;
        let w = barrier.weight(t);
        let half = w.sqrt();
        // Spatial box around the slanted section center.
        let center: Vec<f64> = (0..d)
            .map(|i| barrier.y[i] - barrier.xi[i] * t / barrier.t_span)
            .collect();
        idx.fill(0);
        'grid: loop {
            for i in 0..d {
                x[i] = center[i] - half + 2.0 * half * idx[i] as f64 / res as f64;
            }
            if barrier.phi(t, &x) > 0.0 {
                let coeffs = field.step_coeffs(t, &x)?;
                let s = barrier.scaled_generator_value(&coeffs, t, &x);
                checked += 1;
                if s < min_value {
                    min_value = s;
                    argmin = (t, x.as_slice().to_vec());
                }
            }
            // Odometer over the spatial grid.
            let mut carry = 0;
            while carry < d {
                idx[carry] += 1;
                if idx[carry] <= res {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == d {
                break 'grid;
            }
        }
    }
    if checked == 0 {
        return Err(Error::precondition("barrier grid contained no points of Q"));
    }
    Ok(BarrierCheck {
        n: barrier.n,
        n1: barrier.n1,
        grid_resolution,
        points_checked: checked,
        min_value,
        argmin,
        pass: min_value >= BARRIER_TOL,
    })
}

/// Outcome of the paraboloid drift-bound sweep over `Q_1`.
#[derive(Debug, Clone, Serialize)]
pub struct ParaboloidDriftCheck {
    pub grid_min: f64,
    pub analytic_bound: f64,
    pub points_checked: u64,
}

/// Sweep `Lφ` for `φ(t, x) = 1 − t − |x|²` over a grid of `Q_1` (the time
/// derivative `D_t φ = −1` is folded in):
/// `Lφ = −1 − 2 bⁱxⁱ − 2 tr a`, alongside the analytic lower bound
/// `−1 − K d − 2 d ν⁻¹`.
pub fn lemma_paraboloid_drift_check(
    field: &CoefficientField,
    grid_resolution: usize,
) -> Result<ParaboloidDriftCheck> {
    if grid_resolution < 2 {
        return Err(Error::input("drift check requires grid_resolution >= 2"));
    }
    let d = field.dimension();
    let cert = field.certificate();
    let analytic_bound =
        -1.0 - field.effective_drift_bound() * d as f64 - 2.0 * d as f64 / cert.nu;

    let res = grid_resolution;
    let mut grid_min = f64::INFINITY;
    let mut checked = 0u64;
    let mut x = DVector::zeros(d);
    let mut idx = vec![0usize; d];
    for ti in 0..res {
        // Q_1 is half-open in time.
        let t = ti as f64 / res as f64;
        idx.fill(0);
        'grid: loop {
            for i in 0..d {
                x[i] = -1.0 + 2.0 * idx[i] as f64 / res as f64;
            }
            if x.norm_squared() < 1.0 {
                let coeffs = field.step_coeffs(t, &x)?;
                let (trace_a, b_dot_x) = match &coeffs {
                    StepCoeffs::Iso { scale, drift } => {
                        let c = scale * scale / 2.0;
                        (c * d as f64, drift.dot(&x))
                    }
                    StepCoeffs::Full { a, drift, .. } => (a.trace(), drift.dot(&x)),
                    StepCoeffs::Owned { a, drift, .. } => (a.trace(), drift.dot(&x)),
                };
                let l_phi = -1.0 - 2.0 * b_dot_x - 2.0 * trace_a;
                checked += 1;
                grid_min = grid_min.min(l_phi);
            }
            let mut carry = 0;
            while carry < d {
                idx[carry] += 1;
                if idx[carry] <= res {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == d {
                break 'grid;
            }
        }
    }
    if checked == 0 {
        return Err(Error::precondition("drift-check grid contained no points"));
    }
    Ok(ParaboloidDriftCheck {
        grid_min,
        analytic_bound,
        points_checked: checked,
    })
}

/// Least-squares Hölder surrogate fitted on `log ρ` vs `log |Δu|` pairs.
#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    pub alpha_hat: f64,
    pub n_hat: f64,
    pub r_squared: f64,
    pub pair_count: usize,
}

/// Fit `|u(p) − u(q)| ≈ N̂·ρ(p, q)^α̂` over all sample pairs whose difference
/// clears the noise floor `3·(stderr_p + stderr_q)`. Pairs below the floor
/// measure Monte Carlo noise, not regularity, and are excluded. At least 20
/// usable pairs must remain.
pub fn holder_fit(samples: &[(SpaceTime, Estimate)]) -> Result<HolderFit> {
    if samples.len() < 2 {
        return Err(Error::precondition("holder_fit requires at least 2 samples"));
    }
    let mut pts = Vec::new();
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let (pi, ei) = &samples[i];
            let (pj, ej) = &samples[j];
            let du = (ei.value - ej.value).abs();
            let floor = 3.0 * (ei.stderr + ej.stderr);
            let rho = parabolic_distance(pi, pj);
            if du > floor && du > 0.0 && rho > 0.0 {
                pts.push((rho.ln(), du.ln()));
            }
        }
    }
    if pts.len() < 20 {
        return Err(Error::FitDegenerate(format!(
            "only {} of {} pairs exceed the noise floor (need 20)",
            pts.len(),
            samples.len() * (samples.len() - 1) / 2
        )));
    }
    let (slope, intercept, r2) = linear_fit(&pts)
        .ok_or_else(|| Error::FitDegenerate("all pair distances coincide".into()))?;
    Ok(HolderFit {
        alpha_hat: slope,
        n_hat: intercept.exp(),
        r_squared: r2,
        pair_count: pts.len(),
    })
}

/// Harnack comparison with propagated error bars.
#[derive(Debug, Clone, Serialize)]
pub struct HarnackRatio {
    pub ratio: f64,
    pub stderr: f64,
    pub numerator: Estimate,
    pub denominator: Estimate,
    /// Set when the comparison minimum is statistically indistinguishable
    /// from zero (within 3 standard errors), making the ratio meaningless.
    pub unbounded: bool,
    pub pattern: String,
}

/// Elliptic mode: `sup / inf` over one evaluation pattern of nonnegative
/// estimates.
pub fn harnack_sup_inf(values: &[Estimate], pattern: &str) -> Result<HarnackRatio> {
    if values.is_empty() {
        return Err(Error::precondition("harnack ratio needs estimates"));
    }
    if values.iter().any(|e| e.value < 0.0) {
        return Err(Error::precondition("harnack ratio requires nonnegative u"));
    }
    let max = values
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap()
        .clone();
    let min = values
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap()
        .clone();
    Ok(ratio_of(max, min, pattern))
}

/// Parabolic mode: the center value at the later time against the infimum
/// over the earlier-time comparison ball.
pub fn harnack_center_vs_inf(
    center_later: &Estimate,
    earlier_ball: &[Estimate],
    pattern: &str,
) -> Result<HarnackRatio> {
    if earlier_ball.is_empty() {
        return Err(Error::precondition("harnack ratio needs comparison points"));
    }
    let min = earlier_ball
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .unwrap()
        .clone();
    Ok(ratio_of(center_later.clone(), min, pattern))
}

fn ratio_of(num: Estimate, den: Estimate, pattern: &str) -> HarnackRatio {
    let unbounded = den.value <= 3.0 * den.stderr;
    let ratio = if den.value > 0.0 {
        num.value / den.value
    } else {
        f64::INFINITY
    };
    let stderr = if den.value > 0.0 && num.value != 0.0 {
        ratio.abs() * ((num.stderr / num.value).powi(2) + (den.stderr / den.value).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    HarnackRatio {
        ratio,
        stderr,
        numerator: num,
        denominator: den,
        unbounded,
        pattern: pattern.to_string(),
    }
}

/// One level of the oscillation cascade.
#[derive(Debug, Clone, Serialize)]
pub struct CascadeLevel {
    pub radius: f64,
    pub osc: f64,
    /// `3·(stderr at the max + stderr at the min)`; oscillations under this
    /// floor are Monte Carlo noise.
    pub noise_floor: f64,
}

/// Oscillation of `u` over nested cylinders `Q̄_R(center)` along a geometric
/// radius schedule. Each level uses a fixed pattern: three time slices
/// crossed with the center and the axis points at radii `R/2` and `R`. The
/// schedule truncates at the first level whose oscillation falls under its
/// noise floor.
pub fn oscillation_cascade<U>(
    mut u: U,
    center: &SpaceTime,
    r_schedule: &[f64],
) -> Result<Vec<CascadeLevel>>
where
    U: FnMut(f64, &DVector<f64>) -> Result<Estimate>,
{
    if r_schedule.is_empty() || r_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input(
            "oscillation cascade requires a decreasing radius schedule",
        ));
    }
    let d = center.x.len();
    let mut levels = Vec::new();
    for &r in r_schedule {
        let mut best: Option<(Estimate, Estimate)> = None; // (max, min)
        for ti in 0..3 {
            let t = center.t + r * r * ti as f64 / 2.0;
            for k in 0..(1 + 4 * d) {
                let mut x = center.x.clone();
                if k > 0 {
                    let axis = (k - 1) % d;
                    let step =
                        [(r, 1.0), (r, -1.0), (r / 2.0, 1.0), (r / 2.0, -1.0)][(k - 1) / d];
                    x[axis] += step.0 * step.1;
                }
                let e = u(t, &x)?;
                best = Some(match best {
                    None => (e.clone(), e),
                    Some((mx, mn)) => (
                        if e.value > mx.value { e.clone() } else { mx },
                        if e.value < mn.value { e } else { mn },
                    ),
                });
            }
        }
        let (mx, mn) = best.unwrap();
        let osc = mx.value - mn.value;
        let floor = 3.0 * (mx.stderr + mn.stderr);
        levels.push(CascadeLevel {
            radius: r,
            osc,
            noise_floor: floor,
        });
        if osc <= floor {
            break; // below the noise floor: deeper levels are unresolvable
        }
    }
    Ok(levels)
}

/// Successive ratios `osc(2R)/osc(R)` of a cascade.
pub fn cascade_ratios(levels: &[CascadeLevel]) -> Vec<f64> {
    levels.windows(2).map(|w| w[0].osc / w[1].osc).collect()
}

/// Decay exponent fitted on `log osc` against `log R`.
pub fn cascade_exponent(levels: &[CascadeLevel]) -> Option<f64> {
    if levels.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.osc > 0.0)
        .map(|l| (l.radius.ln(), l.osc.ln()))
        .collect();
    linear_fit(&pts).map(|(slope, _, _)| slope)
}
