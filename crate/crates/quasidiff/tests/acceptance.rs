//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Statistical criteria run at fixed seeds, so every run of this suite is
//! bit-for-bit reproducible; analytic criteria carry zero or rounding-level
//! tolerances only. Expected values come from independent oracles computed
//! in this file (closed forms, quadrature, eigenfunction series), never from
//! the estimators under test.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use nalgebra::{DMatrix, DVector};
use quasidiff::coefficients::{CoefficientField, EllipticityCertificate};
use quasidiff::estimators::{
    harmonic_measure, harmonic_measure_report, hitting_profile, martingale_residual,
    parabolic_exit_distribution, regularity_probe, semigroup_on_points, BoundaryTarget,
    HittingParams, ParabolicTarget, Payoff, SpaceTimePayoff, TestFunction, Verdict,
};
use quasidiff::geometry::{Ball, Domain, GammaSet, ParabolicCylinder, SpaceTime};
use quasidiff::rng::derive_seed;
use quasidiff::scenario::{compass_pattern, cross_pattern, scaling_conjugacy_pair};
use quasidiff::sde::{run_ensemble, MeanReduction, Reduction, SimConfig};
use quasidiff::stats::{Estimate, MeanAcc};
use quasidiff::verifiers::{
    barrier_check, harnack_sup_inf, holder_fit, lemma_paraboloid_drift_check, ObliqueBarrier,
};

fn verdict(pass: bool, criterion: &str, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

fn checkerboard(nu: f64, cell: f64, d: usize) -> CoefficientField {
    CoefficientField::checkerboard(EllipticityCertificate::new(nu, 0.0, d).unwrap(), cell).unwrap()
}

/// The four built-in field families at a common (ν, d).
fn built_in_fields(d: usize) -> Vec<(&'static str, CoefficientField)> {
    let cert = || EllipticityCertificate::new(0.5, 0.0, d).unwrap();
    vec![
        ("constant", CoefficientField::isotropic(cert(), 1.0).unwrap()),
        (
            "checkerboard",
            CoefficientField::checkerboard(cert(), 0.4).unwrap(),
        ),
        (
            "radial_jump",
            CoefficientField::radial_jump(cert(), 0.6).unwrap(),
        ),
        (
            "time_oscillating",
            CoefficientField::time_oscillating(cert(), 0.2).unwrap(),
        ),
    ]
}

#[test]
fn criterion_01_engine_calibration_mean_exit_time() {
    // a = I, b = 0: mean exit time from B_1 at the center is 1/(2d).
    let mut all = true;
    let mut details = Vec::new();
    for d in 1..=3usize {
        let started = std::time::Instant::now();
        let field = CoefficientField::identity(d);
        let cfg = SimConfig::new(1e-4, 64.0, 8_104_001 + d as u64, true, 100_000).unwrap();
        let report = harmonic_measure_report(
            &field,
            &DVector::zeros(d),
            &Ball::unit(d),
            &BoundaryTarget::All,
            &cfg,
        )
        .unwrap();
        let elapsed = started.elapsed().as_secs_f64();
        let tau = &report.mean_exit_time;
        let exact = 1.0 / (2.0 * d as f64);
        let ok = tau.within_sigmas(exact, 3.0)
            && report.censored_fraction < 0.001
            && elapsed <= 120.0;
        all &= ok;
        details.push(format!(
            "d={d}: {:.5}±{:.5} vs {exact:.5} ({:+.2}σ, censored {:.1e}, {:.0}s)",
            tau.value,
            tau.stderr,
            (tau.value - exact) / tau.stderr,
            report.censored_fraction,
            elapsed
        ));
    }
    verdict(all, "criterion 1 (engine calibration)", &details.join("; "));
}

struct TripleMean;

impl Reduction for TripleMean {
    type Item = [f64; 3];
    type Acc = [MeanAcc; 3];
    fn identity(&self) -> Self::Acc {
        [MeanAcc::default(), MeanAcc::default(), MeanAcc::default()]
    }
    fn accumulate(&self, acc: &mut Self::Acc, item: [f64; 3]) {
        for (a, v) in acc.iter_mut().zip(item) {
            a.push(v);
        }
    }
    fn merge(&self, into: &mut Self::Acc, other: Self::Acc) {
        for (a, b) in into.iter_mut().zip(other) {
            a.merge(&b);
        }
    }
}

#[test]
fn criterion_02_characteristic_function_identity() {
    // E[cos(ξ·x_t)] = cos(ξ·x)·exp(−|ξ|²t) for the √2-diffusion; dt = 1e-4.
    let field = CoefficientField::identity(2);
    let x0 = DVector::from_vec(vec![0.3, -0.1]);
    let t = 0.25;
    let xis = [
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![1.0, 1.0]),
        DVector::from_vec(vec![0.0, 2.0]),
    ];
    let cfg = SimConfig::new(1e-4, 1.0, 20_260_202, false, 60_000).unwrap();
    let out = run_ensemble(
        &field,
        0.0,
        &x0,
        &cfg,
        |_, w| {
            let x = w.run_to(t)?;
            Ok([xis[0].dot(x).cos(), xis[1].dot(x).cos(), xis[2].dot(x).cos()])
        },
        &TripleMean,
    )
    .unwrap();
    let mut all = true;
    let mut details = Vec::new();
    for (xi, acc) in xis.iter().zip(out.value.iter()) {
        let est = acc.estimate();
        let exact = xi.dot(&x0).cos() * (-xi.norm_squared() * t).exp();
        let ok = est.within_sigmas(exact, 3.0);
        all &= ok;
        details.push(format!(
            "|ξ|²={:.0}: {:+.4}±{:.4} vs {exact:+.4} ({:+.2}σ)",
            xi.norm_squared(),
            est.value,
            est.stderr,
            (est.value - exact) / est.stderr
        ));
    }
    verdict(all, "criterion 2 (characteristic function)", &details.join("; "));
}

#[test]
fn criterion_03_martingale_residual() {
    // Five test functions × four built-in fields, 1e5 paths each:
    // |residual| ≤ 3σ + 50·dt.
    let d = 2;
    let fields = built_in_fields(d);
    let test_fns = vec![
        TestFunction::new(1.0, DVector::zeros(d), 0.8).unwrap(),
        TestFunction::new(1.0, DVector::zeros(d), 1.2).unwrap(),
        TestFunction::new(0.7, DVector::from_vec(vec![0.2, 0.0]), 1.0).unwrap(),
        TestFunction::new(1.5, DVector::from_vec(vec![0.0, -0.15]), 0.9).unwrap(),
        TestFunction::new(1.0, DVector::from_vec(vec![0.1, 0.1]), 1.1).unwrap(),
    ];
    let dt = 1e-3;
    let t = 0.1;
    let mut all = true;
    let mut worst: (f64, String) = (0.0, String::new());
    for (fi, (fname, field)) in fields.iter().enumerate() {
        for (ti, tf) in test_fns.iter().enumerate() {
            let seed = derive_seed(31_337, (fi * 8 + ti) as u64);
            let cfg = SimConfig::new(dt, 1.0, seed, false, 100_000).unwrap();
            let est = martingale_residual(field, 0.0, &DVector::zeros(d), tf, t, &cfg).unwrap();
            let allowance = 3.0 * est.stderr + 50.0 * dt;
            let ok = est.value.abs() <= allowance;
            all &= ok;
            let ratio = est.value.abs() / allowance;
            if ratio > worst.0 {
                worst = (
                    ratio,
                    format!("{fname}/φ{ti}: |{:.2e}| vs {:.2e}", est.value, allowance),
                );
            }
        }
    }
    verdict(
        all,
        "criterion 3 (martingale residual)",
        &format!("20 combinations, worst case {}", worst.1),
    );
}

#[test]
fn criterion_04_barrier_certificate() {
    // Ten random admissible fields: the barrier with the printed exponent
    // certifies on the 64-grid and the doubled grid announces the same
    // verdict; the n = 1 control fails.
    let nu = 0.5;
    let k = 0.4;
    let mut all = true;
    let mut details = Vec::new();
    let dims = [1usize, 2, 2, 2, 2, 2, 2, 2, 2, 3];
    for (i, &d) in dims.iter().enumerate() {
        let cert = EllipticityCertificate::new(nu, k, d).unwrap();
        let field = CoefficientField::random_constant(cert, 9000 + i as u64).unwrap();
        let barrier = ObliqueBarrier::centered(d, nu, k, 0.5, 0.25).unwrap();
        let coarse = barrier_check(&field, &barrier, 64).unwrap();
        let fine = barrier_check(&field, &barrier, 128).unwrap();
        let control = barrier_check(&field, &barrier.clone().with_exponent(1.0), 64).unwrap();
        let ok = coarse.pass && fine.pass && !control.pass && control.min_value < 0.0;
        all &= ok;
        if i == 0 || !ok {
            details.push(format!(
                "field {i} (d={d}): min64 {:.3e}, min128 {:.3e}, control {:.3e}",
                coarse.min_value, fine.min_value, control.min_value
            ));
        }
    }
    verdict(
        all,
        "criterion 4 (oblique barrier certificate)",
        &format!("10 random fields refinement-stable; {}", details.join("; ")),
    );
}

#[test]
fn criterion_05_paraboloid_drift_bound() {
    // Grid minimum of Lφ for φ = 1 − t − |x|² stays above −1 − Kd − 2d/ν,
    // exactly (1e-12 rounding only).
    let mut all = true;
    let mut details = Vec::new();
    let mut cases: Vec<(String, CoefficientField)> = Vec::new();
    for d in 1..=3 {
        cases.push((format!("identity d={d}"), CoefficientField::identity(d)));
    }
    for (name, field) in built_in_fields(2) {
        cases.push((format!("{name} d=2"), field));
    }
    // A drifted constant field in d = 2 with vector norm close to K.
    let k = 0.4;
    let cert = EllipticityCertificate::new(0.5, k, 2).unwrap();
    let b = DVector::from_vec(vec![k * (1.0 - 1e-6) / 2f64.sqrt(); 2]);
    cases.push((
        "drifted constant d=2".into(),
        CoefficientField::constant(cert, DMatrix::identity(2, 2), b).unwrap(),
    ));
    for (name, field) in &cases {
        let check = lemma_paraboloid_drift_check(field, 64).unwrap();
        let ok = check.grid_min >= check.analytic_bound - 1e-12;
        all &= ok;
        details.push(format!(
            "{name}: min {:.4} ≥ {:.4}",
            check.grid_min, check.analytic_bound
        ));
    }
    verdict(
        all,
        "criterion 5 (paraboloid drift bound)",
        &details.join("; "),
    );
}

#[test]
fn criterion_06_krylov_safonov_positivity() {
    // q = 3/8, ϰ = 3/4: the hitting probability of Γ with |Γ| > q|Q_1|
    // clears zero by ≥ 5 Wilson half-widths for every built-in field and
    // five probe starts; δ̂ grows monotonically along a nested Γ chain,
    // exactly, on shared paths.
    let d = 2;
    let q_r = ParabolicCylinder::unit(d);
    let params = HittingParams::default();
    let probe = params.probe_cylinder(&q_r); // Q_{9/32, 3/4}
    let slab = |radius: f64, t_hi: f64| GammaSet::Slab {
        t_lo: 0.0,
        t_hi,
        ball: Ball::centered(d, radius).unwrap(),
    };
    // |Γ| = t_hi·π·radius² must exceed (3/8)·π: the smallest is
    // 0.62·0.64π = 0.397π > 0.375π.
    let gammas = vec![slab(0.8, 0.62), slab(0.9, 0.7), slab(0.95, 0.8)];
    let starts: Vec<(f64, DVector<f64>)> = vec![
        (0.0, DVector::zeros(d)),
        (0.0, DVector::from_vec(vec![0.5, 0.0])),
        (probe.duration, DVector::zeros(d)),
        (probe.duration / 2.0, DVector::from_vec(vec![0.0, -0.7])),
        (probe.duration, DVector::from_vec(vec![0.74, 0.0])),
    ];
    let mut all = true;
    let mut min_ratio = f64::INFINITY;
    for (fi, (fname, field)) in built_in_fields(d).iter().enumerate() {
        for (si, (s, x)) in starts.iter().enumerate() {
            let seed = derive_seed(606, (fi * 16 + si) as u64);
            let cfg = SimConfig::new(2e-4, 2.0, seed, true, 4000).unwrap();
            let ests = hitting_profile(field, *s, x, &q_r, &gammas, &params, &cfg).unwrap();
            let monotone = ests.windows(2).all(|w| w[0].value <= w[1].value);
            for est in &ests {
                let ratio = est.value / est.half_width();
                min_ratio = min_ratio.min(ratio);
                let ok = ratio >= 5.0;
                if !ok {
                    println!("  {fname} start {si}: δ̂ = {:.4}, ratio {ratio:.1}", est.value);
                }
                all &= ok;
            }
            all &= monotone;
        }
    }
    verdict(
        all,
        "criterion 6 (hitting probability positivity)",
        &format!(
            "4 fields × 5 starts × 3 nested Γ, min δ̂/half-width = {min_ratio:.1} (need ≥ 5), monotone chains exact"
        ),
    );
}

fn holder_alpha(field: &CoefficientField, dt: f64, seed: u64) -> quasidiff::verifiers::HolderFit {
    let payoff = Payoff::IndicatorHalfspace {
        normal: DVector::from_vec(vec![1.0, 0.0]),
        offset: 0.0,
    };
    let points = cross_pattern(2, 0.5);
    let cfg = SimConfig::new(dt, 1.0, seed, false, 25_000).unwrap();
    let ests = semigroup_on_points(field, &points, 0.0625, &payoff, &cfg).unwrap();
    let samples: Vec<(SpaceTime, Estimate)> = points
        .iter()
        .zip(&ests)
        .map(|(p, e)| (SpaceTime::new(0.0, p.clone()), e.clone()))
        .collect();
    holder_fit(&samples).unwrap()
}

#[test]
fn criterion_07_holder_regularity() {
    // Checkerboard field, T_t of a half-space indicator over the nine-point
    // pattern: α̂ ∈ (0, 1] with R² ≥ 0.8, stable within ±0.1 across
    // dt ∈ {1e-4, 5e-5}.
    let field = checkerboard(0.5, 0.25, 2);
    let fit_a = holder_alpha(&field, 1e-4, 2_001);
    let fit_b = holder_alpha(&field, 5e-5, 2_002);
    let ok = fit_a.alpha_hat > 0.0
        && fit_a.alpha_hat <= 1.0
        && fit_b.alpha_hat > 0.0
        && fit_b.alpha_hat <= 1.0
        && fit_a.r_squared >= 0.8
        && fit_b.r_squared >= 0.8
        && (fit_a.alpha_hat - fit_b.alpha_hat).abs() <= 0.1;
    verdict(
        ok,
        "criterion 7 (Hölder regularity)",
        &format!(
            "α̂ = {:.3} (R² {:.3}) at dt 1e-4 vs α̂ = {:.3} (R² {:.3}) at dt 5e-5, |Δα̂| = {:.3}",
            fit_a.alpha_hat,
            fit_a.r_squared,
            fit_b.alpha_hat,
            fit_b.r_squared,
            (fit_a.alpha_hat - fit_b.alpha_hat).abs()
        ),
    );
}

/// Harmonic measure of the upper boundary half of B_R in the plane from x:
/// Simpson quadrature of the Poisson kernel — the independent oracle.
fn poisson_upper_half(x: &DVector<f64>, radius: f64) -> f64 {
    let n = 40_000;
    let h = std::f64::consts::PI / n as f64;
    let integrand = |theta: f64| {
        let bx = radius * theta.cos();
        let by = radius * theta.sin();
        let dist_sq = (bx - x[0]).powi(2) + (by - x[1]).powi(2);
        (radius * radius - x.norm_squared()) / dist_sq
    };
    let mut sum = integrand(0.0) + integrand(std::f64::consts::PI);
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(k as f64 * h);
    }
    sum * h / 3.0 / (2.0 * std::f64::consts::PI)
}

fn harnack_values(field: &CoefficientField, dt: f64, seed: u64) -> Vec<Estimate> {
    let ball = Ball::centered(2, 1.5).unwrap();
    let target = BoundaryTarget::Halfspace {
        normal: DVector::from_vec(vec![0.0, 1.0]),
        offset: 0.0,
    };
    compass_pattern(2, 0.5)
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cfg = SimConfig::new(dt, 144.0, derive_seed(seed, i as u64), true, 10_000).unwrap();
            harmonic_measure(field, p, &ball, &target, &cfg).unwrap()
        })
        .collect()
}

#[test]
fn criterion_08_harnack_ratio() {
    // Nonnegative u = harmonic measure on B_{3/2}: the sup/inf ratio over
    // B̄_{1/2} is finite (min ≥ 10σ above 0) and stable within 20% across
    // two resolutions; for a = I the ratio matches the Poisson oracle.
    let cb = checkerboard(0.5, 0.5, 2);
    let vals_coarse = harnack_values(&cb, 2e-4, 606_001);
    let vals_fine = harnack_values(&cb, 1e-4, 606_002);
    let r_coarse = harnack_sup_inf(&vals_coarse, "compass").unwrap();
    let r_fine = harnack_sup_inf(&vals_fine, "compass").unwrap();
    let min_sigmas = vals_coarse
        .iter()
        .chain(&vals_fine)
        .map(|e| e.value / e.stderr)
        .fold(f64::INFINITY, f64::min);
    let stability = (r_coarse.ratio - r_fine.ratio).abs() / r_coarse.ratio;

    let flat = CoefficientField::identity(2);
    let flat_vals = harnack_values(&flat, 2e-4, 606_003);
    let flat_ratio = harnack_sup_inf(&flat_vals, "compass").unwrap();
    let oracle_vals: Vec<f64> = compass_pattern(2, 0.5)
        .iter()
        .map(|p| poisson_upper_half(p, 1.5))
        .collect();
    let oracle_ratio = oracle_vals.iter().cloned().fold(f64::MIN, f64::max)
        / oracle_vals.iter().cloned().fold(f64::MAX, f64::min);
    let oracle_ok = (flat_ratio.ratio - oracle_ratio).abs() <= 3.0 * flat_ratio.stderr;

    let ok = min_sigmas >= 10.0 && stability <= 0.2 && !r_coarse.unbounded && oracle_ok;
    verdict(
        ok,
        "criterion 8 (Harnack ratio)",
        &format!(
            "checkerboard ratio {:.3} vs {:.3} (stability {:.1}%, min {min_sigmas:.0}σ > 0); \
             a=I ratio {:.3}±{:.3} vs Poisson oracle {:.3}",
            r_coarse.ratio,
            r_fine.ratio,
            100.0 * stability,
            flat_ratio.ratio,
            flat_ratio.stderr,
            oracle_ratio
        ),
    );
}

#[test]
fn criterion_09_zero_one_dichotomy() {
    // Regular verdict (p̂ above 0.9) at the sphere point for a = I and for
    // the checkerboard field; irregular (below 0.1) at the punctured-disk
    // center for a = I.
    let sphere = Domain::Ball(Ball::unit(2));
    let mut point = DVector::zeros(2);
    point[0] = 1.0;
    let schedule = [0.25, 0.125, 0.0625, 0.03125];

    let mut all = true;
    let mut details = Vec::new();
    for (name, field) in [
        ("a=I sphere", CoefficientField::identity(2)),
        ("checkerboard sphere", checkerboard(0.5, 0.3, 2)),
    ] {
        let cfg = SimConfig::new(1e-3, 1.0, 41_000, true, 10_000).unwrap();
        let v = regularity_probe(&field, &sphere, &point, &schedule, 0.1, &cfg).unwrap();
        let p_last = v.probe_values.last().unwrap().1.value;
        all &= v.verdict == Verdict::Regular && p_last > 0.9;
        details.push(format!("{name}: {:?} (p̂ at h_min = {p_last:.3})", v.verdict));
    }

    let punctured = Domain::PuncturedBall {
        ball: Ball::unit(2),
        puncture: DVector::zeros(2),
    };
    let cfg = SimConfig::new(1e-4, 1.0, 41_001, true, 5_000).unwrap();
    let v = regularity_probe(
        &CoefficientField::identity(2),
        &punctured,
        &DVector::zeros(2),
        &[0.25, 0.0625, 0.015625],
        0.1,
        &cfg,
    )
    .unwrap();
    let p_last = v.probe_values.last().unwrap().1.value;
    all &= v.verdict == Verdict::Irregular && p_last < 0.1;
    details.push(format!(
        "a=I puncture: {:?} (p̂ at h_min = {p_last:.3})",
        v.verdict
    ));
    verdict(all, "criterion 9 (zero-one dichotomy)", &details.join("; "));
}

#[test]
fn criterion_10_scaling_conjugacy() {
    // Exit-distribution estimates agree before/after the hat transform for
    // 3 (s0, x0, r) triples × 2 fields, independent seeds, within 2 combined
    // standard errors.
    let fields = [
        ("checkerboard", checkerboard(0.5, 0.4, 2)),
        (
            "radial_jump",
            CoefficientField::radial_jump(
                EllipticityCertificate::new(0.5, 0.0, 2).unwrap(),
                0.6,
            )
            .unwrap(),
        ),
    ];
    let triples = [
        (0.0, DVector::from_vec(vec![0.0, 0.0]), 0.5),
        (0.3, DVector::from_vec(vec![0.2, -0.1]), 0.5),
        (1.0, DVector::from_vec(vec![-0.3, 0.4]), 0.75),
    ];
    let mut all = true;
    let mut worst = 0.0f64;
    for (fi, (fname, field)) in fields.iter().enumerate() {
        for (ti, (s0, x0, r)) in triples.iter().enumerate() {
            let seed = derive_seed(10_010, (fi * 4 + ti) as u64);
            let cfg = SimConfig::new(4e-4, 4.0, seed, true, 10_000).unwrap();
            let (orig, hat) = scaling_conjugacy_pair(field, *s0, x0, *r, &cfg).unwrap();
            let gap = (orig.value - hat.value).abs();
            let sigma = (orig.stderr.powi(2) + hat.stderr.powi(2)).sqrt();
            let sigmas = gap / sigma;
            worst = worst.max(sigmas);
            if sigmas > 2.0 {
                println!("  {fname} triple {ti}: {:.4} vs {:.4} ({sigmas:.2}σ)", orig.value, hat.value);
            }
            all &= sigmas <= 2.0;
        }
    }
    verdict(
        all,
        "criterion 10 (scaling conjugacy)",
        &format!("6 comparisons, worst gap {worst:.2}σ (budget 2σ)"),
    );
}

#[test]
fn criterion_11_feller_counterexample() {
    // f(t, y) = 1_{t ≥ 1}, T = 1: exactly 0 at s = −0.5 and exactly 1 at
    // s = 0.5 — the non-strong-Feller discontinuity, with zero variance.
    let field = CoefficientField::identity(1);
    let payoff = SpaceTimePayoff::TimeStep { threshold: 1.0 };
    let cfg = SimConfig::new(1e-2, 2.0, 7, false, 500).unwrap();
    let below = quasidiff::estimators::feller_scenario(
        &field,
        &payoff,
        -0.5,
        &DVector::zeros(1),
        1.0,
        &cfg,
    )
    .unwrap();
    let above = quasidiff::estimators::feller_scenario(
        &field,
        &payoff,
        0.5,
        &DVector::zeros(1),
        1.0,
        &cfg,
    )
    .unwrap();
    let ok = below.value == 0.0 && below.stderr == 0.0 && above.value == 1.0 && above.stderr == 0.0;
    verdict(
        ok,
        "criterion 11 (Feller counterexample)",
        &format!(
            "u(-0.5) = {} exactly, u(0.5) = {} exactly",
            below.value, above.value
        ),
    );
}
