//! Oscillation decay over nested cylinders, the mechanism behind Hölder
//! continuity: osc over Q_R shrinks geometrically as R halves, so the
//! successive ratios osc(2R)/osc(R) stay above 1 and the fitted decay
//! exponent is positive.
//!
//! ```bash
//! cargo run --release --example oscillation_cascade
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::{CoefficientField, EllipticityCertificate};
use quasidiff::estimators::{parabolic_kernel, Payoff};
use quasidiff::geometry::SpaceTime;
use quasidiff::rng::derive_seed;
use quasidiff::sde::SimConfig;
use quasidiff::verifiers::{cascade_exponent, cascade_ratios, oscillation_cascade};

fn main() -> quasidiff::Result<()> {
    let cert = EllipticityCertificate::new(0.5, 0.0, 2)?;
    let field = CoefficientField::checkerboard(cert, 0.25)?;
    let payoff = Payoff::IndicatorHalfspace {
        normal: DVector::from_vec(vec![1.0, 0.0]),
        offset: 0.0,
    };
    let horizon = 0.25;
    let cfg = SimConfig::new(5e-4, 1.0, 141_421, false, 4000)?;
    let center = SpaceTime::new(0.0, DVector::zeros(2));

    let mut call = 0u64;
    let levels = oscillation_cascade(
        |t, x| {
            call += 1;
            let cfg_i = cfg.clone().with_seed(derive_seed(cfg.seed, call));
            parabolic_kernel(&field, t, x, t + horizon, &payoff, &cfg_i)
        },
        &center,
        &[0.4, 0.2, 0.1],
    )?;

    for level in &levels {
        println!(
            "R = {:.2}: osc = {:.4} (noise floor {:.4})",
            level.radius, level.osc, level.noise_floor
        );
    }
    println!("ratios osc(2R)/osc(R): {:?}", cascade_ratios(&levels));
    if let Some(alpha) = cascade_exponent(&levels) {
        println!("fitted decay exponent: {alpha:.3}");
    }
    Ok(())
}
