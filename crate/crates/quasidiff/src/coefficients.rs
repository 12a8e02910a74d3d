//! Coefficient fields for second-order operators in non-divergence form with
//! merely bounded measurable coefficients.
//!
//! A field is a pair `(a(t,x), b(t,x))` together with an ellipticity
//! certificate `(ν, K)`: every admissible field satisfies the two-sided bound
//! `ν|ξ|² ≤ ξᵀ a ξ ≤ ν⁻¹|ξ|²`, exact symmetry of `a`, and `|bⁱ| < K`
//! componentwise. No continuity whatsoever is assumed; the built-in families
//! are deliberately discontinuous.
//!
//! Values on discontinuity interfaces (a Lebesgue-null set) follow a fixed
//! half-open convention, lower-inclusive in each coordinate, so that runs are
//! reproducible bit for bit.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterStream;

/// How strictly `|bⁱ| < K` is enforced by validation: sampling cannot certify
/// a strict inequality, so we demand `|bⁱ| ≤ K·(1 − STRICTNESS_MARGIN)`.
pub const STRICTNESS_MARGIN: f64 = 1e-9;

/// Tolerance on symmetry and eigenvalue checks of coefficient matrices.
const MATRIX_TOL: f64 = 1e-12;

/// The `(ν, K, d)` data every admissible field carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityCertificate {
    /// Ellipticity constant in (0, 1]; eigenvalues of `a` live in [ν, ν⁻¹].
    pub nu: f64,
    /// Componentwise drift bound: `|bⁱ| < K`.
    pub k_bound: f64,
    pub dimension: usize,
}

impl EllipticityCertificate {
    pub fn new(nu: f64, k_bound: f64, dimension: usize) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) || !nu.is_finite() {
            return Err(Error::input(format!("nu must lie in (0, 1], got {nu}")));
        }
        if !(k_bound >= 0.0) || !k_bound.is_finite() {
            return Err(Error::input(format!("k_bound must be >= 0, got {k_bound}")));
        }
        if dimension == 0 {
            return Err(Error::input("dimension must be >= 1"));
        }
        Ok(EllipticityCertificate {
            nu,
            k_bound,
            dimension,
        })
    }

    pub fn nu_inv(&self) -> f64 {
        1.0 / self.nu
    }
}

/// Family tag plus parameters, the serializable identity of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldDescriptor {
    /// Constant `(a, b)`; `a` stored row-major.
    Constant { a: Vec<f64>, b: Vec<f64> },
    /// `a = νI` on cells of even floor-coordinate parity, `ν⁻¹I` on odd; `b = 0`.
    Checkerboard { cell: f64 },
    /// `a = νI` for `|x| < radius`, `ν⁻¹I` for `|x| ≥ radius`; `b = 0`.
    RadialJump { radius: f64 },
    /// Square wave in time: `a = νI` while `frac(t/period) < 1/2`, else `ν⁻¹I`.
    TimeOscillating { period: f64 },
    /// Registered by name in a [`FieldRegistry`].
    Custom { name: String },
    /// Result of a parabolic rescaling of a base field.
    Scaled {
        base: Box<FieldDescriptor>,
        s0: f64,
        x0: Vec<f64>,
        r: f64,
    },
}

/// Affine substitution `(t, x) ↦ (s0 + r²t, x0 + r·x)` applied before a field
/// is consulted. Composition of two substitutions is again one.
#[derive(Debug, Clone)]
struct AffineMap {
    s0: f64,
    x0: DVector<f64>,
    r: f64,
}

impl AffineMap {
    fn time(&self, t: f64) -> f64 {
        self.s0 + self.r * self.r * t
    }

    fn coord(&self, x: &DVector<f64>, i: usize) -> f64 {
        self.x0[i] + self.r * x[i]
    }

    fn space(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x * self.r;
        y += &self.x0;
        y
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    fn after(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            s0: self.s0 + self.r * self.r * other.s0,
            x0: &self.x0 + &other.x0 * self.r,
            r: self.r * other.r,
        }
    }
}

/// One constant coefficient regime of a piecewise field, with its diffusion
/// factor precomputed.
#[derive(Debug, Clone)]
struct Regime {
    a: DMatrix<f64>,
    b: DVector<f64>,
    sigma: DMatrix<f64>,
    /// `Some(√(2c))` when `a = c·I`; lets the engine skip the matrix multiply.
    iso_scale: Option<f64>,
}

impl Regime {
    fn new(
        cert: &EllipticityCertificate,
        drift_bound: f64,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let d = cert.dimension;
        if a.nrows() != d || a.ncols() != d || b.len() != d {
            return Err(Error::input("coefficient shapes do not match the dimension"));
        }
        let sym_res = symmetry_residual(&a);
        if sym_res > MATRIX_TOL {
            return Err(Error::numeric(format!(
                "a must be exactly symmetric (residual {sym_res:.3e})"
            )));
        }
        let eigen = a.clone().symmetric_eigen();
        for &lam in eigen.eigenvalues.iter() {
            if lam < cert.nu - 1e-9 || lam > cert.nu_inv() + 1e-9 {
                return Err(Error::numeric(format!(
                    "eigenvalue {lam} outside [{}, {}]",
                    cert.nu,
                    cert.nu_inv()
                )));
            }
        }
        for &bi in b.iter() {
            if bi.abs() > drift_bound * (1.0 - STRICTNESS_MARGIN) {
                return Err(Error::numeric(format!(
                    "|b^i| = {} violates the strict bound K = {drift_bound}",
                    bi.abs()
                )));
            }
        }
        let sigma = diffusion_sqrt(&a)?;
        let iso_scale = isotropic_scale(&a).map(|c| (2.0 * c).sqrt());
        Ok(Regime {
            a,
            b,
            sigma,
            iso_scale,
        })
    }

    /// Same regime with `b` multiplied by `r`; admissible for the bound `r·K`.
    fn scaled_drift(
        &self,
        cert: &EllipticityCertificate,
        new_drift_bound: f64,
        r: f64,
    ) -> Result<Self> {
        Regime::new(cert, new_drift_bound, self.a.clone(), &self.b * r)
    }
}

/// Regime selector of a piecewise field.
#[derive(Debug, Clone)]
enum Selector {
    Constant,
    Checkerboard { cell: f64 },
    RadialJump { radius: f64 },
    TimeOscillating { period: f64 },
}

impl Selector {
    /// Index into the regime list. `pre`, when present, is applied on the fly
    /// so selection allocates nothing.
    fn index(&self, t: f64, x: &DVector<f64>, pre: Option<&AffineMap>) -> usize {
        match self {
            Selector::Constant => 0,
            Selector::Checkerboard { cell } => {
                let mut parity = 0i64;
                for i in 0..x.len() {
                    let xi = pre.map_or(x[i], |m| m.coord(x, i));
                    parity += (xi / cell).floor() as i64;
                }
                (parity.rem_euclid(2)) as usize
            }
            Selector::RadialJump { radius } => {
                let mut norm_sq = 0.0;
                for i in 0..x.len() {
                    let xi = pre.map_or(x[i], |m| m.coord(x, i));
                    norm_sq += xi * xi;
                }
                usize::from(norm_sq >= radius * radius)
            }
            Selector::TimeOscillating { period } => {
                let tt = pre.map_or(t, |m| m.time(t));
                let phase = tt / period - (tt / period).floor();
                usize::from(phase >= 0.5)
            }
        }
    }
}

type CoeffFn<T> = Arc<dyn Fn(f64, &DVector<f64>) -> T + Send + Sync>;

enum FieldKind {
    Piecewise {
        regimes: Vec<Regime>,
        selector: Selector,
        pre: Option<AffineMap>,
    },
    Custom {
        a_fn: CoeffFn<DMatrix<f64>>,
        b_fn: CoeffFn<DVector<f64>>,
        pre: Option<AffineMap>,
    },
}

impl std::fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldKind::Piecewise { regimes, .. } => {
                write!(f, "Piecewise({} regimes)", regimes.len())
            }
            FieldKind::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// Step-time view of the coefficients, borrowed from the field when possible.
pub enum StepCoeffs<'a> {
    /// `a = c·I`: `scale = √(2c)`, so the increment is `scale·√h·Z + b·h`.
    Iso { scale: f64, drift: &'a DVector<f64> },
    /// General symmetric `a` with its precomputed factor `σ = √(2a)`.
    Full {
        sigma: &'a DMatrix<f64>,
        a: &'a DMatrix<f64>,
        drift: &'a DVector<f64>,
    },
    /// Custom fields evaluate fresh matrices each step.
    Owned {
        sigma: DMatrix<f64>,
        a: DMatrix<f64>,
        drift: DVector<f64>,
    },
}

impl StepCoeffs<'_> {
    /// Normal diffusion variance `2 nᵀ a n` for a unit vector `n`.
    pub fn normal_variance(&self, n: &DVector<f64>) -> f64 {
        match self {
            StepCoeffs::Iso { scale, .. } => scale * scale,
            StepCoeffs::Full { a, .. } => 2.0 * (n.transpose() * *a * n)[0],
            StepCoeffs::Owned { a, .. } => 2.0 * (n.transpose() * a * n)[0],
        }
    }
}

/// An evaluable coefficient pair with its certificate.
#[derive(Debug)]
pub struct CoefficientField {
    certificate: EllipticityCertificate,
    time_homogeneous: bool,
    descriptor: FieldDescriptor,
    /// Scale factor already applied to drifts by rescalings; the effective
    /// drift bound is `k_bound * drift_scale`.
    drift_scale: f64,
    kind: FieldKind,
}

impl CoefficientField {
    /// Constant field `a = I`, `b = 0` — the Laplacian's coefficients.
    pub fn identity(dimension: usize) -> Self {
        let cert = EllipticityCertificate::new(1.0, 0.0, dimension).unwrap();
        Self::isotropic(cert, 1.0).unwrap()
    }

    /// Constant isotropic field `a = c·I`, `b = 0` with `c ∈ [ν, ν⁻¹]`.
    pub fn isotropic(certificate: EllipticityCertificate, c: f64) -> Result<Self> {
        let d = certificate.dimension;
        Self::constant(
            certificate,
            DMatrix::identity(d, d) * c,
            DVector::zeros(d),
        )
    }

    /// Constant field with arbitrary admissible `(a, b)`.
    pub fn constant(
        certificate: EllipticityCertificate,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let descriptor = FieldDescriptor::Constant {
            a: a.transpose().as_slice().to_vec(), // row-major
            b: b.as_slice().to_vec(),
        };
        let regime = Regime::new(&certificate, certificate.k_bound, a, b)?;
        Ok(CoefficientField {
            certificate,
            time_homogeneous: true,
            descriptor,
            drift_scale: 1.0,
            kind: FieldKind::Piecewise {
                regimes: vec![regime],
                selector: Selector::Constant,
                pre: None,
            },
        })
    }

    /// The canonical hard discontinuous field: `νI` and `ν⁻¹I` alternating by
    /// the parity of summed floor-coordinates; cells are half-open.
    pub fn checkerboard(certificate: EllipticityCertificate, cell: f64) -> Result<Self> {
        if !(cell > 0.0) || !cell.is_finite() {
            return Err(Error::input(format!("cell must be > 0, got {cell}")));
        }
        let regimes = two_isotropic_regimes(&certificate)?;
        Ok(CoefficientField {
            descriptor: FieldDescriptor::Checkerboard { cell },
            certificate,
            time_homogeneous: true,
            drift_scale: 1.0,
            kind: FieldKind::Piecewise {
                regimes,
                selector: Selector::Checkerboard { cell },
                pre: None,
            },
        })
    }

    /// `νI` inside the sphere `|x| < radius`, `ν⁻¹I` on and outside it.
    pub fn radial_jump(certificate: EllipticityCertificate, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::input(format!("radius must be > 0, got {radius}")));
        }
        let regimes = two_isotropic_regimes(&certificate)?;
        Ok(CoefficientField {
            descriptor: FieldDescriptor::RadialJump { radius },
            certificate,
            time_homogeneous: true,
            drift_scale: 1.0,
            kind: FieldKind::Piecewise {
                regimes,
                selector: Selector::RadialJump { radius },
                pre: None,
            },
        })
    }

    /// Time square wave with the given period; constant in space.
    pub fn time_oscillating(certificate: EllipticityCertificate, period: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::input(format!("period must be > 0, got {period}")));
        }
        let regimes = two_isotropic_regimes(&certificate)?;
        Ok(CoefficientField {
            descriptor: FieldDescriptor::TimeOscillating { period },
            certificate,
            time_homogeneous: false,
            drift_scale: 1.0,
            kind: FieldKind::Piecewise {
                regimes,
                selector: Selector::TimeOscillating { period },
                pre: None,
            },
        })
    }

    /// A random constant admissible field: `a` has a uniformly random
    /// orientation with eigenvalues drawn from the interior of `[ν, ν⁻¹]`,
    /// and each drift component is drawn from `(-K, K)` strictly.
    pub fn random_constant(certificate: EllipticityCertificate, seed: u64) -> Result<Self> {
        let d = certificate.dimension;
        let mut stream = CounterStream::new(seed, 0x7a_fe);
        let m = DMatrix::from_fn(d, d, |_, _| stream.gaussian());
        let q = m.qr().q();
        let lo = certificate.nu;
        let hi = certificate.nu_inv();
        // Stay inside the band so rounding in the eigendecomposition cannot
        // push an eigenvalue past the certificate.
        let vals = DVector::from_fn(d, |_, _| lo + (hi - lo) * (0.05 + 0.9 * stream.uniform()));
        let a = &q * DMatrix::from_diagonal(&vals) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let b = DVector::from_fn(d, |_, _| {
            certificate.k_bound * 0.9 * (2.0 * stream.uniform() - 1.0)
        });
        Self::constant(certificate, a, b)
    }

    /// A field given by arbitrary evaluation closures. Not validated at
    /// construction; run [`validate_ellipticity`] before trusting it.
    pub fn custom(
        certificate: EllipticityCertificate,
        name: impl Into<String>,
        time_homogeneous: bool,
        a_fn: impl Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        b_fn: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        CoefficientField {
            certificate,
            time_homogeneous,
            descriptor: FieldDescriptor::Custom { name: name.into() },
            drift_scale: 1.0,
            kind: FieldKind::Custom {
                a_fn: Arc::new(a_fn),
                b_fn: Arc::new(b_fn),
                pre: None,
            },
        }
    }

    pub fn certificate(&self) -> &EllipticityCertificate {
        &self.certificate
    }

    pub fn dimension(&self) -> usize {
        self.certificate.dimension
    }

    pub fn time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.descriptor
    }

    /// Effective componentwise drift bound, accounting for rescalings.
    pub fn effective_drift_bound(&self) -> f64 {
        self.certificate.k_bound * self.drift_scale
    }

    /// Evaluate `(a(t,x), b(t,x))`.
    pub fn eval_coeffs(&self, t: f64, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("eval_coeffs requires finite (t, x)"));
        }
        if x.len() != self.dimension() {
            return Err(Error::input(format!(
                "point has dimension {}, field expects {}",
                x.len(),
                self.dimension()
            )));
        }
        match &self.kind {
            FieldKind::Piecewise {
                regimes,
                selector,
                pre,
            } => {
                let reg = &regimes[selector.index(t, x, pre.as_ref())];
                Ok((reg.a.clone(), reg.b.clone()))
            }
            FieldKind::Custom { a_fn, b_fn, pre } => {
                let (tt, xx) = match pre {
                    None => (t, x.clone()),
                    Some(m) => (m.time(t), m.space(x)),
                };
                Ok((a_fn(tt, &xx), b_fn(tt, &xx)))
            }
        }
    }

    /// Engine-facing view that borrows precomputed regime data when possible.
    pub fn step_coeffs(&self, t: f64, x: &DVector<f64>) -> Result<StepCoeffs<'_>> {
        match &self.kind {
            FieldKind::Piecewise {
                regimes,
                selector,
                pre,
            } => {
                let reg = &regimes[selector.index(t, x, pre.as_ref())];
                Ok(match reg.iso_scale {
                    Some(scale) => StepCoeffs::Iso {
                        scale,
                        drift: &reg.b,
                    },
                    None => StepCoeffs::Full {
                        sigma: &reg.sigma,
                        a: &reg.a,
                        drift: &reg.b,
                    },
                })
            }
            FieldKind::Custom { a_fn, b_fn, pre } => {
                let (tt, xx) = match pre {
                    None => (t, x.clone()),
                    Some(m) => (m.time(t), m.space(x)),
                };
                let a = a_fn(tt, &xx);
                let sigma = diffusion_sqrt(&a)?;
                Ok(StepCoeffs::Owned {
                    sigma,
                    a,
                    drift: b_fn(tt, &xx),
                })
            }
        }
    }

    /// The rescaled field `â(t,x) = a(s0 + r²t, x0 + rx)`,
    /// `b̂(t,x) = r·b(s0 + r²t, x0 + rx)`, an admissible member of the class
    /// with drift bound `rK`.
    pub fn conjugate(&self, s0: f64, x0: &DVector<f64>, r: f64) -> Result<CoefficientField> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::input(format!("scaling ratio must be > 0, got {r}")));
        }
        if x0.len() != self.dimension() {
            return Err(Error::input("scaling center has the wrong dimension"));
        }
        let map = AffineMap {
            s0,
            x0: x0.clone(),
            r,
        };
        let descriptor = FieldDescriptor::Scaled {
            base: Box::new(self.descriptor.clone()),
            s0,
            x0: x0.as_slice().to_vec(),
            r,
        };
        let new_drift_bound = self.effective_drift_bound() * r;
        let kind = match &self.kind {
            FieldKind::Piecewise {
                regimes,
                selector,
                pre,
            } => FieldKind::Piecewise {
                regimes: regimes
                    .iter()
                    .map(|reg| reg.scaled_drift(&self.certificate, new_drift_bound, r))
                    .collect::<Result<_>>()?,
                selector: selector.clone(),
                pre: Some(match pre {
                    None => map,
                    Some(p) => p.after(&map),
                }),
            },
            FieldKind::Custom { a_fn, b_fn, pre } => {
                let b_inner = b_fn.clone();
                FieldKind::Custom {
                    a_fn: a_fn.clone(),
                    b_fn: Arc::new(move |t, x| b_inner(t, x) * r),
                    pre: Some(match pre {
                        None => map,
                        Some(p) => p.after(&map),
                    }),
                }
            }
        };
        Ok(CoefficientField {
            certificate: self.certificate.clone(),
            time_homogeneous: self.time_homogeneous,
            descriptor,
            drift_scale: self.drift_scale * r,
            kind,
        })
    }
}

fn two_isotropic_regimes(cert: &EllipticityCertificate) -> Result<Vec<Regime>> {
    let d = cert.dimension;
    let low = Regime::new(
        cert,
        cert.k_bound,
        DMatrix::identity(d, d) * cert.nu,
        DVector::zeros(d),
    )?;
    let high = Regime::new(
        cert,
        cert.k_bound,
        DMatrix::identity(d, d) * cert.nu_inv(),
        DVector::zeros(d),
    )?;
    Ok(vec![low, high])
}

fn symmetry_residual(a: &DMatrix<f64>) -> f64 {
    let mut res: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            res = res.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    res
}

fn isotropic_scale(a: &DMatrix<f64>) -> Option<f64> {
    let c = a[(0, 0)];
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let want = if i == j { c } else { 0.0 };
            if a[(i, j)] != want {
                return None;
            }
        }
    }
    Some(c)
}

/// The symmetric positive-definite square root `σ` of `2a`, so that
/// `σσᵀ = 2a`. Computed by symmetric eigendecomposition and re-symmetrized,
/// which keeps `σ = σᵀ` exact.
pub fn diffusion_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::numeric("diffusion_sqrt requires a square matrix"));
    }
    let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if symmetry_residual(a) > 1e-9 * scale {
        return Err(Error::numeric("diffusion_sqrt requires a symmetric matrix"));
    }
    let eigen = a.clone().symmetric_eigen();
    if eigen.eigenvalues.iter().any(|&lam| lam <= 0.0) {
        return Err(Error::numeric(
            "diffusion_sqrt requires a positive-definite matrix",
        ));
    }
    let sqrt_vals = eigen.eigenvalues.map(|lam| (2.0 * lam).sqrt());
    let q = &eigen.eigenvectors;
    let sigma = q * DMatrix::from_diagonal(&sqrt_vals) * q.transpose();
    let mut sigma = (&sigma + sigma.transpose()) * 0.5;

    // Babylonian polish: the eigendecomposition alone does not always reach
    // the 1e-12 reconstruction contract.
    let m = a * 2.0;
    let m_norm = m.norm();
    for _ in 0..8 {
        let resid = (&sigma * &sigma - &m).norm() / m_norm;
        if resid <= 1e-14 {
            break;
        }
        let Some(chol) = nalgebra::Cholesky::new(sigma.clone()) else {
            break;
        };
        let next = (&sigma + chol.solve(&m)) * 0.5;
        sigma = (&next + next.transpose()) * 0.5;
    }
    Ok(sigma)
}

/// Space-time box used for validation sweeps.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: DVector<f64>,
    pub x_hi: DVector<f64>,
}

impl SampleBox {
    /// Symmetric box `[-half, half]^d` over the time window `[0, t_hi]`.
    pub fn centered(dimension: usize, half: f64, t_hi: f64) -> Self {
        SampleBox {
            t_lo: 0.0,
            t_hi,
            x_lo: DVector::from_element(dimension, -half),
            x_hi: DVector::from_element(dimension, half),
        }
    }

    fn sample(&self, stream: &mut CounterStream) -> (f64, DVector<f64>) {
        let t = self.t_lo + (self.t_hi - self.t_lo) * stream.uniform();
        let x = DVector::from_fn(self.x_lo.len(), |i, _| {
            self.x_lo[i] + (self.x_hi[i] - self.x_lo[i]) * stream.uniform()
        });
        (t, x)
    }
}

/// Outcome of an ellipticity sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub samples: u64,
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub max_drift_component: f64,
    pub symmetry_residual: f64,
    pub nu: f64,
    pub k_bound: f64,
    pub pass: bool,
}

/// Sample Rayleigh quotients `ξᵀaξ/|ξ|²`, drift components and symmetry
/// residuals of `field` over `bounds`. A violation is reported, not raised;
/// only evaluation failures propagate as errors.
pub fn validate_ellipticity(
    field: &CoefficientField,
    n_samples: u64,
    bounds: &SampleBox,
    stream: &mut CounterStream,
) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(Error::input("validate_ellipticity requires n_samples >= 1"));
    }
    let d = field.dimension();
    let cert = field.certificate();
    let mut min_q = f64::INFINITY;
    let mut max_q = f64::NEG_INFINITY;
    let mut max_b: f64 = 0.0;
    let mut sym_res: f64 = 0.0;

    for _ in 0..n_samples {
        let (t, x) = bounds.sample(stream);
        let (a, b) = field.eval_coeffs(t, &x)?;
        sym_res = sym_res.max(symmetry_residual(&a));
        for &bi in b.iter() {
            max_b = max_b.max(bi.abs());
        }
        // Random direction plus the coordinate axes; the axes catch diagonal
        // extremes exactly instead of only in the sampling limit.
        let mut xi = DVector::from_fn(d, |_, _| stream.gaussian());
        let norm = xi.norm();
        if norm > 0.0 {
            xi /= norm;
            let q = (xi.transpose() * &a * &xi)[0];
            min_q = min_q.min(q);
            max_q = max_q.max(q);
        }
        for i in 0..d {
            let q = a[(i, i)];
            min_q = min_q.min(q);
            max_q = max_q.max(q);
        }
    }

    let drift_bound = field.effective_drift_bound();
    let pass = min_q >= cert.nu - MATRIX_TOL
        && max_q <= cert.nu_inv() + MATRIX_TOL
        && (drift_bound == 0.0 && max_b == 0.0
            || max_b <= drift_bound * (1.0 - STRICTNESS_MARGIN))
        && sym_res <= MATRIX_TOL;

    Ok(ValidationReport {
        samples: n_samples,
        min_quotient: min_q,
        max_quotient: max_q,
        max_drift_component: max_b,
        symmetry_residual: sym_res,
        nu: cert.nu,
        k_bound: drift_bound,
        pass,
    })
}

type FieldBuilder =
    Arc<dyn Fn(&EllipticityCertificate, &BTreeMap<String, f64>) -> Result<CoefficientField> + Send + Sync>;

/// Registry of custom field families addressable by name from scenario configs.
#[derive(Default, Clone)]
pub struct FieldRegistry {
    builders: BTreeMap<String, FieldBuilder>,
}

impl FieldRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        builder: impl Fn(&EllipticityCertificate, &BTreeMap<String, f64>) -> Result<CoefficientField>
            + Send
            + Sync
            + 'static,
    ) {
        self.builders.insert(name.into(), Arc::new(builder));
    }

    pub fn build(
        &self,
        name: &str,
        cert: &EllipticityCertificate,
        params: &BTreeMap<String, f64>,
    ) -> Result<CoefficientField> {
        match self.builders.get(name) {
            Some(b) => b(cert, params),
            None => Err(Error::Registry(format!("unknown custom field '{name}'"))),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(|s| s.as_str())
    }
}
