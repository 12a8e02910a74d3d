//! Harnack comparability of a nonnegative harmonic function: u = π_G(·, A)
//! on G = B_{3/2}, compared over a pattern in B̄_{1/2}. For a = I the values
//! also admit an independent oracle, the Poisson-kernel quadrature for the
//! disk, which the Monte Carlo ratio must reproduce.
//!
//! ```bash
//! cargo run --release --example harnack_ratio
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::{CoefficientField, EllipticityCertificate};
use quasidiff::estimators::{harmonic_measure, BoundaryTarget};
use quasidiff::geometry::Ball;
use quasidiff::rng::derive_seed;
use quasidiff::scenario::compass_pattern;
use quasidiff::sde::SimConfig;
use quasidiff::verifiers::harnack_sup_inf;

/// Harmonic measure of the upper boundary half of B_R(0) in the plane, seen
/// from x: Simpson quadrature of the Poisson kernel
/// (1/2π)·(R² − |x|²)/|R·e^{iθ} − x|².
fn poisson_upper_half(x: &DVector<f64>, radius: f64) -> f64 {
    let n = 20_000;
    let lo = 0.0;
    let hi = std::f64::consts::PI;
    let h = (hi - lo) / n as f64;
    let integrand = |theta: f64| {
        let bx = radius * theta.cos();
        let by = radius * theta.sin();
        let dist_sq = (bx - x[0]).powi(2) + (by - x[1]).powi(2);
        (radius * radius - x.norm_squared()) / dist_sq
    };
    let mut sum = integrand(lo) + integrand(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(lo + k as f64 * h);
    }
    sum * h / 3.0 / (2.0 * std::f64::consts::PI)
}

fn main() -> quasidiff::Result<()> {
    let ball = Ball::centered(2, 1.5)?;
    let target = BoundaryTarget::Halfspace {
        normal: DVector::from_vec(vec![0.0, 1.0]),
        offset: 0.0,
    };
    let points = compass_pattern(2, 0.5);
    let cfg = SimConfig::new(2e-4, 144.0, 161_803, true, 6000)?;

    let run = |field: &CoefficientField| -> quasidiff::Result<Vec<quasidiff::Estimate>> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let cfg_i = cfg.clone().with_seed(derive_seed(cfg.seed, i as u64));
                harmonic_measure(field, p, &ball, &target, &cfg_i)
            })
            .collect()
    };

    // a = I: compare point values against the Poisson-kernel oracle.
    let flat = CoefficientField::identity(2);
    let ests = run(&flat)?;
    println!("a = I on B_{{3/2}}, u = harmonic measure of the upper half:");
    for (p, e) in points.iter().zip(&ests) {
        let oracle = poisson_upper_half(p, 1.5);
        println!(
            "  x = ({:+.1}, {:+.1}): {:.4} ± {:.4}  (oracle {:.4}, {:+.2}σ)",
            p[0],
            p[1],
            e.value,
            e.stderr,
            oracle,
            (e.value - oracle) / e.stderr
        );
    }
    let ratio = harnack_sup_inf(&ests, "compass B_{1/2}")?;
    println!("  sup/inf ratio: {:.4} ± {:.4}\n", ratio.ratio, ratio.stderr);

    // The checkerboard field: no closed form, but the ratio must stay finite
    // and stable.
    let cert = EllipticityCertificate::new(0.5, 0.0, 2)?;
    let cb = CoefficientField::checkerboard(cert, 0.5)?;
    let ests = run(&cb)?;
    let ratio = harnack_sup_inf(&ests, "compass B_{1/2}")?;
    println!(
        "checkerboard: sup/inf ratio {:.4} ± {:.4} (unbounded flag: {})",
        ratio.ratio, ratio.stderr, ratio.unbounded
    );
    Ok(())
}
