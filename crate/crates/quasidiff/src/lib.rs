//! Monte Carlo laboratory for quasi-diffusions whose generators have merely
//! bounded, measurable, possibly discontinuous coefficients.
//!
//! The crate simulates the SDE `dx = b(s+t, x) dt + √(2a(s+t, x)) dw` for
//! coefficient fields satisfying only a two-sided ellipticity bound and a
//! drift bound, and builds estimators and verifiers for the regularity theory
//! of such processes: semigroup and parabolic-kernel averages, harmonic
//! measure and parabolic exit distributions, hitting probabilities of
//! positive-measure sets, boundary-regularity probes, Hölder-exponent fits,
//! Harnack ratios, oscillation cascades, and analytic barrier certificates.
//!
//! Entry points:
//! - [`coefficients`]: coefficient fields and ellipticity validation
//! - [`geometry`]: balls, parabolic cylinders, boundary classification, scaling
//! - [`sde`]: the Euler-Maruyama engine with exit detection
//! - [`estimators`]: Monte Carlo estimators over path ensembles
//! - [`verifiers`]: barrier certificates and statistical regularity checks
//! - [`scenario`]: config-driven experiment runner behind the CLI
//!
//! Every estimator is deterministic given its seed: paths draw from
//! counter-based streams keyed by `(seed, path_index)`, so results are
//! independent of worker count and scheduling.

pub mod coefficients;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod rng;
pub mod scenario;
pub mod sde;
pub mod stats;
pub mod verifiers;

pub use coefficients::{
    diffusion_sqrt, validate_ellipticity, CoefficientField, EllipticityCertificate,
    FieldDescriptor, FieldRegistry, SampleBox, ValidationReport,
};
pub use error::{Error, Result};
pub use geometry::{
    classify_boundary_point, parabolic_distance, Ball, BoundaryClass, Domain, GammaSet,
    MapDirection, ParabolicCylinder, ScalingMap, SpaceTime, SpaceTimeBox,
};
pub use sde::{
    exit_sample, run_ensemble, simulate_path, ExitFace, ExitRecord, ExitRegion, ExitStatus,
    Path, PathWalker, SimConfig,
};
pub use stats::Estimate;
