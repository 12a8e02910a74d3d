//! Weak-order sanity of the engine: for a = I, b = 0 the SDE's diffusion
//! factor is √2, so E[cos(ξ·x_t)] = cos(ξ·x)·exp(-|ξ|²t) in closed form.
//!
//! ```bash
//! cargo run --release --example characteristic_function
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::CoefficientField;
use quasidiff::estimators::{semigroup, Payoff};
use quasidiff::sde::SimConfig;

fn main() -> quasidiff::Result<()> {
    let field = CoefficientField::identity(2);
    let x0 = DVector::from_vec(vec![0.3, -0.1]);
    let t = 0.2;
    let cfg = SimConfig::new(1e-3, 1.0, 424_242, false, 40_000)?;
    println!("E[cos(ξ·x_t)] vs cos(ξ·x)·exp(-|ξ|²t) at t = {t}");
    for xi in [
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![1.0, 2.0]),
        DVector::from_vec(vec![0.0, 3.0]),
    ] {
        let est = semigroup(&field, &x0, t, &Payoff::Cosine { xi: xi.clone() }, &cfg)?;
        let exact = xi.dot(&x0).cos() * (-xi.norm_squared() * t).exp();
        println!(
            "  ξ = ({:+.0}, {:+.0}): {:+.5} ± {:.5}  (exact {:+.5}, {:+.2}σ)",
            xi[0],
            xi[1],
            est.value,
            est.stderr,
            exact,
            (est.value - exact) / est.stderr,
        );
    }
    Ok(())
}
