//! The defining property of a quasi-diffusion, checked statistically: for
//! smooth compactly supported φ the process
//! φ(x_t) − φ(x) − ∫₀ᵗ Lφ(x_η) dη is a centered martingale, so its sample
//! mean must vanish within sampling error plus a dt-bias allowance.
//!
//! ```bash
//! cargo run --release --example martingale_residual
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::{CoefficientField, EllipticityCertificate};
use quasidiff::estimators::{martingale_residual, TestFunction};
use quasidiff::sde::SimConfig;

fn main() -> quasidiff::Result<()> {
    let cert = || EllipticityCertificate::new(0.5, 0.0, 2).unwrap();
    let fields = vec![
        ("identity", CoefficientField::identity(2)),
        ("checkerboard", CoefficientField::checkerboard(cert(), 0.5)?),
        ("radial_jump", CoefficientField::radial_jump(cert(), 0.7)?),
        (
            "time_oscillating",
            CoefficientField::time_oscillating(cert(), 0.3)?,
        ),
    ];
    let cfg = SimConfig::new(1e-3, 1.0, 987, false, 20_000)?;
    let t = 0.1;
    println!("martingale residual at t = {t}, allowance = 3σ + 50·dt");
    for (name, field) in &fields {
        for width in [0.8, 1.2] {
            let tf = TestFunction::new(1.0, DVector::zeros(2), width)?;
            let est = martingale_residual(field, 0.0, &DVector::zeros(2), &tf, t, &cfg)?;
            let allowance = 3.0 * est.stderr + 50.0 * cfg.dt;
            println!(
                "  {name:<16} w={width}: residual {:+.3e} (allowance {:.3e}) {}",
                est.value,
                allowance,
                if est.value.abs() <= allowance {
                    "ok"
                } else {
                    "VIOLATED"
                }
            );
        }
    }
    Ok(())
}
