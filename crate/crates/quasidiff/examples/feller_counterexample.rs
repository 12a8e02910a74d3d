//! The space-time process is Feller but not strong Feller: averaging cannot
//! smooth the deterministic time coordinate. For f(t, y) = 1_{t ≥ 1} and
//! horizon T = 1 the kernel value is exactly f(s + 1), jumping from 0 to 1
//! as the start time s crosses 0 — with zero sampling variance.
//!
//! ```bash
//! cargo run --release --example feller_counterexample
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::CoefficientField;
use quasidiff::estimators::{feller_scenario, SpaceTimePayoff};
use quasidiff::sde::SimConfig;

fn main() -> quasidiff::Result<()> {
    let field = CoefficientField::identity(1);
    let payoff = SpaceTimePayoff::TimeStep { threshold: 1.0 };
    let cfg = SimConfig::new(1e-2, 2.0, 1, false, 500)?;
    println!("u(s, x) = E_{{s,x}} 1_{{s + T ≥ 1}} with T = 1:");
    for s in [-0.5, -0.1, -1e-9, 0.0, 0.1, 0.5] {
        let est = feller_scenario(&field, &payoff, s, &DVector::zeros(1), 1.0, &cfg)?;
        println!(
            "  s = {s:+.9}: u = {} (stderr {} — degenerate in the time coordinate)",
            est.value, est.stderr
        );
    }
    println!("discontinuous at s = 0 no matter how many paths are drawn");
    Ok(())
}
