//! Parabolic cylinders, balls, boundary classification, the parabolic
//! distance, and the rescaling map that sends `Q_r(s0, x0)` onto `Q_1(0, 0)`.
//!
//! Conventions, fixed once so membership tests are reproducible:
//! a cylinder with corner `(t0, x0)`, duration `T` and radius `r` is the set
//! `[t0, t0 + T) × B_r(x0)` with `B_r` an open ball. Its parabolic boundary is
//! the lateral surface `(t0, t0 + T) × ∂B_r(x0)` plus the top cap
//! `{t0 + T} × B̄_r(x0)`; the bottom face is *not* part of it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points landing within this distance of a face are assigned to the face;
/// simulated exits land near boundaries, never exactly on them.
pub const FACE_TOL: f64 = 1e-9;

/// A point of space-time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTime {
    pub t: f64,
    pub x: DVector<f64>,
}

impl SpaceTime {
    pub fn new(t: f64, x: DVector<f64>) -> Self {
        SpaceTime { t, x }
    }
}

/// The parabolic distance `ρ((t1,x1),(t2,x2)) = |t1 − t2|^{1/2} + |x1 − x2|`.
pub fn parabolic_distance(p: &SpaceTime, q: &SpaceTime) -> f64 {
    (p.t - q.t).abs().sqrt() + (&p.x - &q.x).norm()
}

/// Open ball `B_r(center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::input(format!("ball radius must be > 0, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn unit(dimension: usize) -> Self {
        Ball {
            center: DVector::zeros(dimension),
            radius: 1.0,
        }
    }

    pub fn centered(dimension: usize, radius: f64) -> Result<Self> {
        Ball::new(DVector::zeros(dimension), radius)
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (x - &self.center).norm_squared() < self.radius * self.radius
    }

    /// Distance from an interior point to the sphere (negative outside).
    pub fn boundary_distance(&self, x: &DVector<f64>) -> f64 {
        self.radius - (x - &self.center).norm()
    }

    /// Radial projection onto the sphere. The center projects to `center + r·e1`.
    pub fn project_to_boundary(&self, x: &DVector<f64>) -> DVector<f64> {
        let rel = x - &self.center;
        let n = rel.norm();
        if n == 0.0 {
            let mut e = DVector::zeros(self.dimension());
            e[0] = self.radius;
            return &self.center + e;
        }
        &self.center + rel * (self.radius / n)
    }

    /// Outward unit normal at the sphere point nearest to `x`.
    pub fn outward_normal(&self, x: &DVector<f64>) -> DVector<f64> {
        let rel = x - &self.center;
        let n = rel.norm();
        if n == 0.0 {
            let mut e = DVector::zeros(self.dimension());
            e[0] = 1.0;
            return e;
        }
        rel / n
    }

    /// d-dimensional Lebesgue volume.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dimension()) * self.radius.powi(self.dimension() as i32)
    }
}

/// Volume of the unit ball in `R^d`: `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    // Vol(B_1, d) = Vol(B_1, d-2) * 2π/d, seeded with Vol_0 = 1, Vol_1 = 2.
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Space-time cylinder `[t0, t0 + duration) × B_radius(x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicCylinder {
    pub t0: f64,
    pub x0: DVector<f64>,
    pub duration: f64,
    pub radius: f64,
}

impl ParabolicCylinder {
    pub fn new(t0: f64, x0: DVector<f64>, duration: f64, radius: f64) -> Result<Self> {
        if !(duration > 0.0 && radius > 0.0) || !duration.is_finite() || !radius.is_finite() {
            return Err(Error::input(
                "cylinder requires duration > 0 and radius > 0",
            ));
        }
        Ok(ParabolicCylinder {
            t0,
            x0,
            duration,
            radius,
        })
    }

    /// The standard cylinder `Q_r(t0, x0)` with duration `r²`.
    pub fn standard(t0: f64, x0: DVector<f64>, r: f64) -> Result<Self> {
        ParabolicCylinder::new(t0, x0, r * r, r)
    }

    /// `Q_1(0, 0)`.
    pub fn unit(dimension: usize) -> Self {
        ParabolicCylinder::standard(0.0, DVector::zeros(dimension), 1.0).unwrap()
    }

    pub fn dimension(&self) -> usize {
        self.x0.len()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.duration
    }

    pub fn ball(&self) -> Ball {
        Ball {
            center: self.x0.clone(),
            radius: self.radius,
        }
    }

    pub fn contains(&self, t: f64, x: &DVector<f64>) -> bool {
        t >= self.t0 && t < self.t_end() && self.ball().contains(x)
    }

    /// Space-time Lebesgue measure.
    pub fn volume(&self) -> f64 {
        self.duration * self.ball().volume()
    }

    pub fn classify(&self, p: &SpaceTime) -> BoundaryClass {
        classify_boundary_point(self, p)
    }
}

/// Where a point sits relative to a cylinder's parabolic boundary. The bottom
/// face `{t0} × B_r` is classified `Interior`: it is not parabolic boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryClass {
    Interior,
    Lateral,
    Top,
    Outside,
}

/// Classify `p` against `∂_p Q`: the top cap `{t_end} × B̄_r` wins at the
/// edge where it meets the lateral surface; the bottom corners belong to
/// neither face.
pub fn classify_boundary_point(q: &ParabolicCylinder, p: &SpaceTime) -> BoundaryClass {
    let spatial = (&p.x - &q.x0).norm();
    let on_top_time = (p.t - q.t_end()).abs() <= FACE_TOL;
    if on_top_time && spatial <= q.radius + FACE_TOL {
        return BoundaryClass::Top;
    }
    if p.t > q.t_end() || p.t < q.t0 - FACE_TOL {
        return BoundaryClass::Outside;
    }
    if (spatial - q.radius).abs() <= FACE_TOL {
        // Lateral surface is open in time: exclude the bottom edge.
        if p.t > q.t0 + FACE_TOL {
            return BoundaryClass::Lateral;
        }
        return BoundaryClass::Outside;
    }
    if spatial < q.radius && p.t >= q.t0 - FACE_TOL {
        return BoundaryClass::Interior;
    }
    BoundaryClass::Outside
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    Forward,
    Inverse,
}

/// The parabolic rescaling `(t, x) ↦ ((t − s0)/r², (x − x0)/r)` (forward) and
/// its inverse. Forward maps `Q_r(s0, x0)` onto `Q_1(0, 0)`.
#[derive(Debug, Clone)]
pub struct ScalingMap {
    pub s0: f64,
    pub x0: DVector<f64>,
    pub r: f64,
    pub direction: MapDirection,
}

impl ScalingMap {
    pub fn forward(s0: f64, x0: DVector<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::input(format!("scaling ratio must be > 0, got {r}")));
        }
        Ok(ScalingMap {
            s0,
            x0,
            r,
            direction: MapDirection::Forward,
        })
    }

    /// Same map with the direction flipped.
    pub fn inverted(&self) -> Self {
        ScalingMap {
            s0: self.s0,
            x0: self.x0.clone(),
            r: self.r,
            direction: match self.direction {
                MapDirection::Forward => MapDirection::Inverse,
                MapDirection::Inverse => MapDirection::Forward,
            },
        }
    }

    pub fn apply(&self, p: &SpaceTime) -> SpaceTime {
        match self.direction {
            MapDirection::Forward => SpaceTime {
                t: (p.t - self.s0) / (self.r * self.r),
                x: (&p.x - &self.x0) / self.r,
            },
            MapDirection::Inverse => SpaceTime {
                t: self.s0 + self.r * self.r * p.t,
                x: &self.x0 + &p.x * self.r,
            },
        }
    }
}

/// Spatial domains supported by the exit engine. General shapes are out of
/// scope; these cover the regularity probe's registry.
#[derive(Debug, Clone)]
pub enum Domain {
    Ball(Ball),
    /// A ball minus one interior point. The puncture has zero capacity, so
    /// simulated paths never hit it; it exists to make its center a boundary
    /// point of the domain.
    PuncturedBall { ball: Ball, puncture: DVector<f64> },
    /// `ball ∩ {x[axis] > center[axis]}`: a half-ball whose flat face passes
    /// through the center.
    HalfBall { ball: Ball, axis: usize },
}

impl Domain {
    pub fn dimension(&self) -> usize {
        match self {
            Domain::Ball(b) => b.dimension(),
            Domain::PuncturedBall { ball, .. } => ball.dimension(),
            Domain::HalfBall { ball, .. } => ball.dimension(),
        }
    }

    /// Scale of the domain, used for default step sizes and exit tolerances.
    pub fn scale(&self) -> f64 {
        match self {
            Domain::Ball(b) => b.radius,
            Domain::PuncturedBall { ball, .. } => ball.radius,
            Domain::HalfBall { ball, .. } => ball.radius,
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Domain::Ball(b) => b.contains(x),
            Domain::PuncturedBall { ball, puncture } => ball.contains(x) && x != puncture,
            Domain::HalfBall { ball, axis } => {
                ball.contains(x) && x[*axis] > ball.center[*axis]
            }
        }
    }

    /// Distance from an interior point to the effective boundary used by the
    /// crossing correction. The puncture is ignored: a single point carries
    /// no harmonic measure.
    pub fn boundary_distance(&self, x: &DVector<f64>) -> f64 {
        match self {
            Domain::Ball(b) => b.boundary_distance(x),
            Domain::PuncturedBall { ball, .. } => ball.boundary_distance(x),
            Domain::HalfBall { ball, axis } => {
                let sphere = ball.boundary_distance(x);
                let plane = x[*axis] - ball.center[*axis];
                sphere.min(plane)
            }
        }
    }

    /// Outward unit normal of the nearest boundary face.
    pub fn outward_normal(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Domain::Ball(b) => b.outward_normal(x),
            Domain::PuncturedBall { ball, .. } => ball.outward_normal(x),
            Domain::HalfBall { ball, axis } => {
                let sphere = ball.boundary_distance(x);
                let plane = x[*axis] - ball.center[*axis];
                if plane < sphere {
                    let mut n = DVector::zeros(ball.dimension());
                    n[*axis] = -1.0;
                    n
                } else {
                    ball.outward_normal(x)
                }
            }
        }
    }

    /// `n·(y − x)` with `n` the outward unit normal at the boundary point
    /// nearest to `x`: how far the step `x → y` advanced toward the tangent
    /// plane frozen at `x`. Allocation-free; the crossing test calls this
    /// every step.
    pub fn normal_advance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            Domain::Ball(b) => ball_normal_advance(&b.center, x, y),
            Domain::PuncturedBall { ball, .. } => ball_normal_advance(&ball.center, x, y),
            Domain::HalfBall { ball, axis } => {
                let sphere = ball.boundary_distance(x);
                let plane = x[*axis] - ball.center[*axis];
                if plane < sphere {
                    -(y[*axis] - x[*axis])
                } else {
                    ball_normal_advance(&ball.center, x, y)
                }
            }
        }
    }

    /// Nearest-face projection of a point onto the boundary.
    pub fn project_to_boundary(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Domain::Ball(b) => b.project_to_boundary(x),
            Domain::PuncturedBall { ball, .. } => ball.project_to_boundary(x),
            Domain::HalfBall { ball, axis } => {
                let sphere = ball.boundary_distance(x);
                let plane = x[*axis] - ball.center[*axis];
                if plane < sphere {
                    let mut y = x.clone();
                    y[*axis] = ball.center[*axis];
                    y
                } else {
                    ball.project_to_boundary(x)
                }
            }
        }
    }
}

pub(crate) fn ball_normal_advance(
    center: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let mut dot = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..x.len() {
        let rel = x[i] - center[i];
        dot += rel * (y[i] - x[i]);
        norm_sq += rel * rel;
    }
    if norm_sq == 0.0 {
        return y[0] - x[0];
    }
    dot / norm_sq.sqrt()
}

/// `radius − |x − center|` without temporaries.
pub(crate) fn ball_radial_distance(center: &DVector<f64>, radius: f64, x: &DVector<f64>) -> f64 {
    let mut norm_sq = 0.0;
    for i in 0..x.len() {
        let rel = x[i] - center[i];
        norm_sq += rel * rel;
    }
    radius - norm_sq.sqrt()
}

/// Closed space-time box `[t_lo, t_hi] × Π [lo_i, hi_i]`.
#[derive(Debug, Clone)]
pub struct SpaceTimeBox {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: DVector<f64>,
    pub x_hi: DVector<f64>,
}

impl SpaceTimeBox {
    pub fn new(t_lo: f64, t_hi: f64, x_lo: DVector<f64>, x_hi: DVector<f64>) -> Result<Self> {
        if t_hi < t_lo || x_lo.iter().zip(x_hi.iter()).any(|(l, h)| h < l) {
            return Err(Error::input("degenerate space-time box"));
        }
        Ok(SpaceTimeBox {
            t_lo,
            t_hi,
            x_lo,
            x_hi,
        })
    }

    pub fn contains(&self, t: f64, x: &DVector<f64>) -> bool {
        t >= self.t_lo
            && t <= self.t_hi
            && x
                .iter()
                .zip(self.x_lo.iter().zip(self.x_hi.iter()))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn volume(&self) -> f64 {
        let mut v = self.t_hi - self.t_lo;
        for (l, h) in self.x_lo.iter().zip(self.x_hi.iter()) {
            v *= h - l;
        }
        v
    }
}

/// Compact obstacle sets `Γ ⊂ Q̄_r`: finite unions of closed boxes and closed
/// time-slab × ball sectors. Membership is exact; so are single-shape volumes.
#[derive(Debug, Clone)]
pub enum GammaSet {
    Box(SpaceTimeBox),
    /// `[t_lo, t_hi] × B̄(center, radius)`.
    Slab {
        t_lo: f64,
        t_hi: f64,
        ball: Ball,
    },
    Union(Vec<GammaSet>),
}

impl GammaSet {
    pub fn contains(&self, t: f64, x: &DVector<f64>) -> bool {
        match self {
            GammaSet::Box(b) => b.contains(t, x),
            GammaSet::Slab { t_lo, t_hi, ball } => {
                t >= *t_lo
                    && t <= *t_hi
                    && (x - &ball.center).norm_squared() <= ball.radius * ball.radius
            }
            GammaSet::Union(parts) => parts.iter().any(|p| p.contains(t, x)),
        }
    }

    /// Exact Lebesgue measure when the shape is analytic; `None` for unions,
    /// whose overlaps require the quasi-Monte Carlo estimate instead.
    pub fn volume_exact(&self) -> Option<f64> {
        match self {
            GammaSet::Box(b) => Some(b.volume()),
            GammaSet::Slab { t_lo, t_hi, ball } => Some((t_hi - t_lo) * ball.volume()),
            GammaSet::Union(_) => None,
        }
    }

    /// Measure of `Γ ∩ Q` by a Halton low-discrepancy sweep over `Q`.
    pub fn volume_in_cylinder_qmc(&self, q: &ParabolicCylinder, n: usize) -> f64 {
        let d = q.dimension();
        let mut hits = 0usize;
        let mut total = 0usize;
        let mut x = DVector::zeros(d);
        for k in 0..n {
            // Halton point in [0,1]^{d+1}: dimension 0 is time.
            let t = q.t0 + q.duration * halton(k as u64 + 1, 2);
            for i in 0..d {
                x[i] = q.x0[i] + q.radius * (2.0 * halton(k as u64 + 1, PRIMES[i + 1]) - 1.0);
            }
            if (&x - &q.x0).norm_squared() >= q.radius * q.radius {
                continue; // outside the cylinder's ball, not part of Q
            }
            total += 1;
            if self.contains(t, &x) {
                hits += 1;
            }
        }
        if total == 0 {
            return 0.0;
        }
        // Fraction of Q occupied, times |Q|.
        q.volume() * hits as f64 / total as f64
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse in the given base.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, coords: &[f64]) -> SpaceTime {
        SpaceTime::new(t, DVector::from_vec(coords.to_vec()))
    }

    #[test]
    fn parabolic_distance_displayed_values() {
        assert_eq!(parabolic_distance(&pt(0.0, &[0.0]), &pt(0.0, &[0.0])), 0.0);
        let d = parabolic_distance(&pt(0.0, &[0.0, 0.0]), &pt(0.25, &[0.5, 0.0]));
        assert!((d - 1.0).abs() < 1e-15);
        let d = parabolic_distance(&pt(0.0, &[0.0]), &pt(1.0, &[1.0]));
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn parabolic_distance_is_a_metric_on_samples() {
        use crate::rng::CounterStream;
        let mut s = CounterStream::new(3, 0);
        let rand_pt = |s: &mut CounterStream| {
            pt(
                2.0 * (s.uniform() - 0.5),
                &[s.uniform() - 0.5, s.uniform() - 0.5],
            )
        };
        for _ in 0..2000 {
            let (p, q, w) = (rand_pt(&mut s), rand_pt(&mut s), rand_pt(&mut s));
            let pq = parabolic_distance(&p, &q);
            let pw = parabolic_distance(&p, &w);
            let wq = parabolic_distance(&w, &q);
            assert!(pq <= pw + wq + 1e-12, "triangle inequality failed");
            assert_eq!(pq, parabolic_distance(&q, &p));
        }
    }

    #[test]
    fn classify_faces_of_unit_cylinder() {
        let q = ParabolicCylinder::unit(2);
        assert_eq!(q.classify(&pt(1.0, &[0.0, 0.0])), BoundaryClass::Top);
        assert_eq!(q.classify(&pt(0.5, &[1.0, 0.0])), BoundaryClass::Lateral);
        // Bottom face is not parabolic boundary.
        assert_eq!(q.classify(&pt(0.0, &[0.0, 0.0])), BoundaryClass::Interior);
        assert_eq!(q.classify(&pt(0.5, &[0.2, 0.1])), BoundaryClass::Interior);
        assert_eq!(q.classify(&pt(1.5, &[0.0, 0.0])), BoundaryClass::Outside);
        assert_eq!(q.classify(&pt(-0.1, &[0.0, 0.0])), BoundaryClass::Outside);
        assert_eq!(q.classify(&pt(0.5, &[2.0, 0.0])), BoundaryClass::Outside);
        // Top edge (corner with the lateral surface) belongs to the top cap.
        assert_eq!(q.classify(&pt(1.0, &[1.0, 0.0])), BoundaryClass::Top);
        // Bottom corner belongs to neither face.
        assert_eq!(q.classify(&pt(0.0, &[1.0, 0.0])), BoundaryClass::Outside);
        // Face tolerance.
        assert_eq!(
            q.classify(&pt(0.5, &[1.0 - 5e-10, 0.0])),
            BoundaryClass::Lateral
        );
    }

    #[test]
    fn scaling_map_examples_and_round_trip() {
        let m = ScalingMap::forward(1.0, DVector::zeros(2), 2.0).unwrap();
        let image = m.apply(&pt(5.0, &[2.0, 0.0]));
        assert_eq!(image.t, 1.0);
        assert_eq!(image.x, DVector::from_vec(vec![1.0, 0.0]));
        // Corner maps to the origin.
        let corner = m.apply(&pt(1.0, &[0.0, 0.0]));
        assert_eq!(corner.t, 0.0);
        assert_eq!(corner.x, DVector::zeros(2));

        use crate::rng::CounterStream;
        let mut s = CounterStream::new(8, 0);
        let inv = m.inverted();
        for _ in 0..200 {
            let p = pt(4.0 * s.uniform(), &[s.uniform(), s.uniform()]);
            let back = inv.apply(&m.apply(&p));
            assert!((back.t - p.t).abs() < 1e-12);
            assert!((&back.x - &p.x).norm() < 1e-12);
        }
    }

    #[test]
    fn scaling_map_preserves_face_labels() {
        use crate::rng::CounterStream;
        let s0 = 0.7;
        let x0 = DVector::from_vec(vec![0.4, -0.2]);
        let r = 0.5;
        let q = ParabolicCylinder::standard(s0, x0.clone(), r).unwrap();
        let unit = ParabolicCylinder::unit(2);
        let m = ScalingMap::forward(s0, x0, r).unwrap();
        let mut st = CounterStream::new(21, 0);
        for k in 0..400 {
            // Alternate lateral and top samples of ∂_p Q_r(s0, x0).
            let p = if k % 2 == 0 {
                let theta = st.uniform() * std::f64::consts::TAU;
                let t = s0 + (0.01 + 0.98 * st.uniform()) * r * r;
                pt(
                    t,
                    &[
                        q.x0[0] + r * theta.cos(),
                        q.x0[1] + r * theta.sin(),
                    ],
                )
            } else {
                let rho = r * st.uniform().sqrt();
                let theta = st.uniform() * std::f64::consts::TAU;
                pt(
                    q.t_end(),
                    &[q.x0[0] + rho * theta.cos(), q.x0[1] + rho * theta.sin()],
                )
            };
            let before = q.classify(&p);
            let after = unit.classify(&m.apply(&p));
            assert_eq!(before, after, "face label changed under scaling");
        }
    }

    #[test]
    fn half_ball_membership_and_faces() {
        let ball = Ball::unit(2);
        let g = Domain::HalfBall { ball, axis: 1 };
        assert!(g.contains(&DVector::from_vec(vec![0.2, 0.3])));
        assert!(!g.contains(&DVector::from_vec(vec![0.2, -0.3])));
        assert!(!g.contains(&DVector::from_vec(vec![0.2, 0.0])));
        // Nearest face from a point close to the plane is the plane.
        let x = DVector::from_vec(vec![0.1, 0.05]);
        assert!((g.boundary_distance(&x) - 0.05).abs() < 1e-15);
        let n = g.outward_normal(&x);
        assert_eq!(n[1], -1.0);
        let p = g.project_to_boundary(&x);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn punctured_ball_excludes_only_the_puncture() {
        let g = Domain::PuncturedBall {
            ball: Ball::unit(2),
            puncture: DVector::zeros(2),
        };
        assert!(!g.contains(&DVector::zeros(2)));
        assert!(g.contains(&DVector::from_vec(vec![1e-300, 0.0])));
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn gamma_volume_qmc_agrees_with_exact_slab() {
        let q = ParabolicCylinder::unit(2);
        let slab = GammaSet::Slab {
            t_lo: 0.0,
            t_hi: 0.5,
            ball: Ball::centered(2, 0.8).unwrap(),
        };
        let exact = slab.volume_exact().unwrap();
        let qmc = slab.volume_in_cylinder_qmc(&q, 200_000);
        assert!(
            (qmc - exact).abs() / exact < 0.01,
            "qmc {qmc} vs exact {exact}"
        );
    }

    #[test]
    fn gamma_union_membership() {
        let u = GammaSet::Union(vec![
            GammaSet::Box(
                SpaceTimeBox::new(
                    0.0,
                    0.25,
                    DVector::from_vec(vec![-0.5]),
                    DVector::from_vec(vec![0.5]),
                )
                .unwrap(),
            ),
            GammaSet::Slab {
                t_lo: 0.5,
                t_hi: 0.75,
                ball: Ball::centered(1, 0.25).unwrap(),
            },
        ]);
        assert!(u.contains(0.1, &DVector::from_vec(vec![0.0])));
        assert!(u.contains(0.6, &DVector::from_vec(vec![0.2])));
        assert!(!u.contains(0.4, &DVector::from_vec(vec![0.0])));
        assert!(u.volume_exact().is_none());
    }
}
