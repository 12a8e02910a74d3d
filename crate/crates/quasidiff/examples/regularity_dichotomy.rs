//! The zero-one dichotomy at boundary points: P_x(τ'_G = 0) is either 0
//! or 1. The probe estimates p̂(h) = P_x(τ' ≤ h) along a decreasing schedule;
//! the limit is 1 at a regular point (sphere) and 0 at an irregular one (the
//! puncture of a planar disk, which the process never re-hits).
//!
//! ```bash
//! cargo run --release --example regularity_dichotomy
//! ```

use nalgebra::DVector;
use quasidiff::coefficients::{CoefficientField, EllipticityCertificate};
use quasidiff::estimators::regularity_probe;
use quasidiff::geometry::{Ball, Domain};
use quasidiff::sde::SimConfig;

fn main() -> quasidiff::Result<()> {
    let sphere_point = DVector::from_vec(vec![1.0, 0.0]);
    let origin = DVector::zeros(2);

    let cases: Vec<(&str, CoefficientField, Domain, DVector<f64>, Vec<f64>, f64)> = vec![
        (
            "sphere point, a = I",
            CoefficientField::identity(2),
            Domain::Ball(Ball::unit(2)),
            sphere_point.clone(),
            vec![0.25, 0.125, 0.0625, 0.03125],
            1e-3,
        ),
        (
            "sphere point, checkerboard",
            CoefficientField::checkerboard(EllipticityCertificate::new(0.5, 0.0, 2)?, 0.3)?,
            Domain::Ball(Ball::unit(2)),
            sphere_point,
            vec![0.25, 0.125, 0.0625, 0.03125],
            1e-3,
        ),
        (
            "puncture of B_1 \\ {0}, a = I",
            CoefficientField::identity(2),
            Domain::PuncturedBall {
                ball: Ball::unit(2),
                puncture: origin.clone(),
            },
            origin.clone(),
            vec![0.25, 0.0625, 0.015625],
            1e-4,
        ),
        (
            "center of the half-disk's flat face, a = I",
            CoefficientField::identity(2),
            Domain::HalfBall {
                ball: Ball::unit(2),
                axis: 1,
            },
            origin,
            vec![0.25, 0.125, 0.0625],
            1e-3,
        ),
    ];

    for (name, field, domain, point, schedule, dt) in cases {
        let cfg = SimConfig::new(dt, 1.0, 271_828, true, 5000)?;
        let verdict = regularity_probe(&field, &domain, &point, &schedule, 0.1, &cfg)?;
        let values: Vec<String> = verdict
            .probe_values
            .iter()
            .map(|(h, e)| format!("p̂({h:.4}) = {:.4}", e.value))
            .collect();
        println!("{name}:");
        println!("  {}", values.join(", "));
        println!("  verdict: {:?}\n", verdict.verdict);
    }
    Ok(())
}
