//! Empirical Hölder regularity of T_t f for a genuinely discontinuous
//! coefficient field. The theory guarantees some positive exponent depending
//! only on (d, ν, K); the fit extracts a surrogate α̂ from Monte Carlo values
//! of T_t f on a nine-point pattern.
//!
//! ```bash
//! cargo run --release --example holder_exponent
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::{CoefficientField, EllipticityCertificate};
use quasidiff::estimators::{semigroup_on_points, Payoff};
use quasidiff::geometry::SpaceTime;
use quasidiff::scenario::cross_pattern;
use quasidiff::sde::SimConfig;
use quasidiff::stats::Estimate;
use quasidiff::verifiers::holder_fit;

fn main() -> quasidiff::Result<()> {
    let cert = EllipticityCertificate::new(0.5, 0.0, 2)?;
    let field = CoefficientField::checkerboard(cert, 0.25)?;
    let payoff = Payoff::IndicatorHalfspace {
        normal: DVector::from_vec(vec![1.0, 0.0]),
        offset: 0.0,
    };
    let t = 0.0625;
    let points = cross_pattern(2, 0.5);

    for dt in [1e-4, 5e-5] {
        let cfg = SimConfig::new(dt, 1.0, 314_159, false, 15_000)?;
        let ests = semigroup_on_points(&field, &points, t, &payoff, &cfg)?;
        let samples: Vec<(SpaceTime, Estimate)> = points
            .iter()
            .zip(&ests)
            .map(|(p, e)| (SpaceTime::new(0.0, p.clone()), e.clone()))
            .collect();
        let fit = holder_fit(&samples)?;
        println!(
            "dt = {dt:.0e}: α̂ = {:.3}, N̂ = {:.3}, R² = {:.3} ({} usable pairs)",
            fit.alpha_hat, fit.n_hat, fit.r_squared, fit.pair_count
        );
    }
    println!("(α̂ in (0, 1] with high R², stable across dt: Hölder but not Lipschitz)");
    Ok(())
}
