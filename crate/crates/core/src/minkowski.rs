//! Minkowski vectors (signature +,−,−,−), the unit hyperboloid H₊ with its
//! invariant measure d³v/v⁰, Lorentz transformations and a few elementary
//! inequalities between points of bounded velocity.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector {
    pub x0: f64,
    pub xs: [f64; 3],
}

impl FourVector {
    pub const ZERO: FourVector = FourVector { x0: 0.0, xs: [0.0; 3] };

    pub fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Self {
        FourVector { x0, xs: [x1, x2, x3] }
    }

    pub fn is_finite(&self) -> bool {
        self.x0.is_finite() && self.xs.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &FourVector) -> f64 {
        minkowski_dot(self, other)
    }

    pub fn square(&self) -> f64 {
        self.dot(self)
    }

    pub fn spatial_norm(&self) -> f64 {
        norm3(&self.xs)
    }

    /// True for p⁰ > |p⃗| (open forward cone).
    pub fn in_forward_cone(&self) -> bool {
        self.x0 > self.spatial_norm()
    }

    pub fn is_spacelike_or_null(&self) -> bool {
        self.spatial_norm() >= self.x0.abs()
    }

    fn components(&self) -> [f64; 4] {
        [self.x0, self.xs[0], self.xs[1], self.xs[2]]
    }

    fn from_components(c: [f64; 4]) -> Self {
        FourVector { x0: c[0], xs: [c[1], c[2], c[3]] }
    }
}

pub fn minkowski_dot(a: &FourVector, b: &FourVector) -> f64 {
    a.x0 * b.x0 - (a.xs[0] * b.xs[0] + a.xs[1] * b.xs[1] + a.xs[2] * b.xs[2])
}

pub(crate) fn norm3(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector { x0: self.x0 + o.x0, xs: [self.xs[0] + o.xs[0], self.xs[1] + o.xs[1], self.xs[2] + o.xs[2]] }
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector { x0: self.x0 - o.x0, xs: [self.xs[0] - o.xs[0], self.xs[1] - o.xs[1], self.xs[2] - o.xs[2]] }
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector { x0: -self.x0, xs: [-self.xs[0], -self.xs[1], -self.xs[2]] }
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        FourVector { x0: self * v.x0, xs: [self * v.xs[0], self * v.xs[1], self * v.xs[2]] }
    }
}

/// Point of the future unit hyperboloid, stored through its spatial part.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperboloidPoint {
    pub vs: [f64; 3],
}

impl HyperboloidPoint {
    pub const ORIGIN: HyperboloidPoint = HyperboloidPoint { vs: [0.0; 3] };

    pub fn new(vs: [f64; 3]) -> Self {
        HyperboloidPoint { vs }
    }

    /// Point at geodesic distance `rapidity` from the origin along `direction`.
    pub fn from_rapidity(direction: [f64; 3], rapidity: f64) -> Self {
        let n = norm3(&direction);
        if n == 0.0 || rapidity == 0.0 {
            return Self::ORIGIN;
        }
        let s = rapidity.sinh() / n;
        HyperboloidPoint { vs: [s * direction[0], s * direction[1], s * direction[2]] }
    }

    /// Normalizes a forward-timelike vector onto H₊.
    pub fn from_timelike(p: &FourVector) -> Option<Self> {
        if !p.in_forward_cone() {
            return None;
        }
        let mass = p.square().sqrt();
        Some(HyperboloidPoint { vs: [p.xs[0] / mass, p.xs[1] / mass, p.xs[2] / mass] })
    }

    pub fn v0(&self) -> f64 {
        (1.0 + self.spatial_norm_sq()).sqrt()
    }

    pub fn spatial_norm(&self) -> f64 {
        norm3(&self.vs)
    }

    fn spatial_norm_sq(&self) -> f64 {
        self.vs[0] * self.vs[0] + self.vs[1] * self.vs[1] + self.vs[2] * self.vs[2]
    }

    pub fn as_four_vector(&self) -> FourVector {
        FourVector { x0: self.v0(), xs: self.vs }
    }

    /// Hyperbolic geodesic distance arccosh(v·u), evaluated as
    /// 2·asinh(√(−(v−u)²)/2) to keep full precision for nearby points.
    pub fn distance(&self, other: &HyperboloidPoint) -> f64 {
        let dv = [self.vs[0] - other.vs[0], self.vs[1] - other.vs[1], self.vs[2] - other.vs[2]];
        let dv2 = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
        if dv2 == 0.0 {
            return 0.0;
        }
        let sum = [self.vs[0] + other.vs[0], self.vs[1] + other.vs[1], self.vs[2] + other.vs[2]];
        let d0 = (dv[0] * sum[0] + dv[1] * sum[1] + dv[2] * sum[2]) / (self.v0() + other.v0());
        let interval = (dv2 - d0 * d0).max(0.0);
        2.0 * (0.5 * interval.sqrt()).asinh()
    }
}

/// Density of the invariant measure dμ(v) against d³v.
pub fn measure_weight(v: &HyperboloidPoint) -> f64 {
    1.0 / v.v0()
}

/// Orthochronous Lorentz transformation acting on column four-vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzBoost {
    pub matrix: [[f64; 4]; 4],
}

const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

impl LorentzBoost {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        LorentzBoost { matrix: m }
    }

    /// Accepts a general matrix if it preserves the metric to 1e-10 and is
    /// orthochronous.
    pub fn new(matrix: [[f64; 4]; 4]) -> Result<Self> {
        let b = LorentzBoost { matrix };
        let defect = b.metric_defect();
        if !(defect <= 1e-10) {
            return invalid(format!("matrix violates the Lorentz condition by {defect:.3e}"));
        }
        if matrix[0][0] < 1.0 - 1e-10 {
            return invalid("matrix is not orthochronous");
        }
        Ok(b)
    }

    /// max |ΛᵀgΛ − g| entrywise.
    pub fn metric_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| m[k][i] * METRIC[k] * m[k][j]).sum();
                let target = if i == j { METRIC[i] } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Pure boost of rapidity `rapidity` along `axis`.
    pub fn along(axis: [f64; 3], rapidity: f64) -> Self {
        Self::to_point(&HyperboloidPoint::from_rapidity(axis, rapidity))
    }

    /// Pure boost taking the rest frame (1,0,0,0) to `v`.
    pub fn to_point(v: &HyperboloidPoint) -> Self {
        let v0 = v.v0();
        let mut m = [[0.0; 4]; 4];
        m[0][0] = v0;
        for i in 0..3 {
            m[0][i + 1] = v.vs[i];
            m[i + 1][0] = v.vs[i];
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                m[i + 1][j + 1] = delta + v.vs[i] * v.vs[j] / (1.0 + v0);
            }
        }
        LorentzBoost { matrix: m }
    }

    /// Spatial rotation by `angle` about `axis` (Rodrigues).
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let n = norm3(&axis);
        let mut m = Self::identity().matrix;
        if n == 0.0 {
            return LorentzBoost { matrix: m };
        }
        let k = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let cross = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                m[i + 1][j + 1] = c * delta + s * cross[i][j] + (1.0 - c) * k[i] * k[j];
            }
        }
        LorentzBoost { matrix: m }
    }

    pub fn compose(&self, other: &LorentzBoost) -> LorentzBoost {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..4).map(|k| self.matrix[i][k] * other.matrix[k][j]).sum();
            }
        }
        LorentzBoost { matrix: m }
    }

    /// Λ⁻¹ = g Λᵀ g.
    pub fn inverse(&self) -> LorentzBoost {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = METRIC[i] * self.matrix[j][i] * METRIC[j];
            }
        }
        LorentzBoost { matrix: m }
    }

    pub fn apply(&self, x: &FourVector) -> FourVector {
        let c = x.components();
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|k| self.matrix[i][k] * c[k]).sum();
        }
        FourVector::from_components(out)
    }

    pub fn apply_point(&self, v: &HyperboloidPoint) -> HyperboloidPoint {
        let image = self.apply(&v.as_four_vector());
        HyperboloidPoint { vs: image.xs }
    }
}

/// One inequality `smaller ≤ larger` evaluated on concrete numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub smaller: f64,
    pub larger: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(name: &'static str, smaller: f64, larger: f64) -> Self {
        let slack = 1e-12 * (1.0 + smaller.abs().max(larger.abs()));
        InequalityCheck { name, smaller, larger, holds: smaller <= larger + slack }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeomReport {
    pub beta: f64,
    pub checks: Vec<InequalityCheck>,
    /// Whether the hypotheses of the conditional inequality were met.
    pub conditional_applicable: bool,
    pub satisfied: bool,
}

/// β = ν/√(ν²+1), the largest |v⃗|/v⁰ on {|v⃗| ≤ ν}.
pub fn velocity_bound(nu: f64) -> f64 {
    nu / (nu * nu + 1.0).sqrt()
}

/// Evaluates, for λᵢ > 0 and |v⃗ᵢ| ≤ ν, with w = λ₁v⃗₁ − λ₂v⃗₂:
///
/// * |λ₁v₁⁰ − λ₂v₂⁰| ≤ |λ₁ − λ₂| + β|w|
/// * |w| − |λ₁v₁⁰ − λ₂v₂⁰| ≥ (1 − β)|w| − |λ₁ − λ₂|
/// * if |λ₁ − λ₂| ≤ σ and |w| ≥ 2σ/(1 − β):  |w| − |λ₁v₁⁰ − λ₂v₂⁰| ≥ ½(1 − β)|w| ≥ σ
///
/// `sigma = None` uses σ = |λ₁ − λ₂|.
pub fn geom_bounds(
    v1: &HyperboloidPoint,
    v2: &HyperboloidPoint,
    lam1: f64,
    lam2: f64,
    nu: f64,
    sigma: Option<f64>,
) -> Result<GeomReport> {
    if !(lam1 > 0.0 && lam2 > 0.0 && nu > 0.0) {
        return invalid("geom_bounds needs positive λ₁, λ₂ and ν");
    }
    let tol = 1e-12 * (1.0 + nu);
    if v1.spatial_norm() > nu + tol || v2.spatial_norm() > nu + tol {
        return invalid(format!("velocity outside the ball |v| ≤ ν = {nu}"));
    }
    let beta = velocity_bound(nu);
    let w = [
        lam1 * v1.vs[0] - lam2 * v2.vs[0],
        lam1 * v1.vs[1] - lam2 * v2.vs[1],
        lam1 * v1.vs[2] - lam2 * v2.vs[2],
    ];
    let wn = norm3(&w);
    let dt = (lam1 * v1.v0() - lam2 * v2.v0()).abs();
    let dl = (lam1 - lam2).abs();

    let mut checks = vec![
        InequalityCheck::new("time difference", dt, dl + beta * wn),
        InequalityCheck::new("spacelike margin", (1.0 - beta) * wn - dl, wn - dt),
    ];
    let sigma = sigma.unwrap_or(dl);
    let applicable = dl <= sigma && wn >= 2.0 * sigma / (1.0 - beta);
    if applicable {
        checks.push(InequalityCheck::new("conditional margin", 0.5 * (1.0 - beta) * wn, wn - dt));
        checks.push(InequalityCheck::new("conditional sigma", sigma, 0.5 * (1.0 - beta) * wn));
    }
    let satisfied = checks.iter().all(|c| c.holds);
    Ok(GeomReport { beta, checks, conditional_applicable: applicable, satisfied })
}

/// Region |q⁰| ≤ ratio_max·|q⃗|, |q⃗| ≤ radius_max containing D_ν − D_ν,
/// where D_ν = {v ∈ H₊ : |v⃗| ≤ ν}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifferenceRegion {
    pub ratio_max: f64,
    pub radius_max: f64,
}

impl DifferenceRegion {
    pub fn contains(&self, q: &FourVector) -> bool {
        let qs = q.spatial_norm();
        let slack = 1e-12 * (1.0 + qs);
        q.x0.abs() <= self.ratio_max * qs + slack && qs <= self.radius_max + slack
    }
}

pub fn support_difference_bound(nu: f64) -> DifferenceRegion {
    DifferenceRegion { ratio_max: velocity_bound(nu), radius_max: 2.0 * nu }
}

/// v − u with the time component computed as (|v⃗|² − |u⃗|²)/(v⁰ + u⁰).
pub fn hyperboloid_difference(v: &HyperboloidPoint, u: &HyperboloidPoint) -> FourVector {
    let dv = [v.vs[0] - u.vs[0], v.vs[1] - u.vs[1], v.vs[2] - u.vs[2]];
    let sum = [v.vs[0] + u.vs[0], v.vs[1] + u.vs[1], v.vs[2] + u.vs[2]];
    let d0 = (dv[0] * sum[0] + dv[1] * sum[1] + dv[2] * sum[2]) / (v.v0() + u.v0());
    FourVector { x0: d0, xs: dv }
}

/// Uniform sample of the ball |v⃗| ≤ ν.
pub fn sample_ball<R: Rng>(rng: &mut R, nu: f64) -> HyperboloidPoint {
    loop {
        let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
        if norm3(&x) <= 1.0 {
            return HyperboloidPoint { vs: [nu * x[0], nu * x[1], nu * x[2]] };
        }
    }
}

/// Counts sampled pairs u, v ∈ D_ν whose difference leaves the region.
pub fn difference_violations<R: Rng>(rng: &mut R, nu: f64, samples: usize) -> usize {
    let region = support_difference_bound(nu);
    (0..samples)
        .filter(|_| {
            let v = sample_ball(rng, nu);
            let u = sample_ball(rng, nu);
            !region.contains(&hyperboloid_difference(&v, &u))
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dot_products() {
        let e0 = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(e0.dot(&e0), 1.0);
        let null = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(null.dot(&null), 0.0);
    }

    #[test]
    fn measure_weight_values() {
        assert_eq!(measure_weight(&HyperboloidPoint::ORIGIN), 1.0);
        assert_relative_eq!(measure_weight(&HyperboloidPoint::new([0.75, 0.0, 0.0])), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn distance_matches_arccosh() {
        let v = HyperboloidPoint::new([0.3, -0.2, 1.1]);
        let u = HyperboloidPoint::new([-0.5, 0.4, 0.2]);
        let naive = v.as_four_vector().dot(&u.as_four_vector()).acosh();
        assert_relative_eq!(v.distance(&u), naive, epsilon = 1e-12);
        assert_relative_eq!(HyperboloidPoint::from_rapidity([0.0, 1.0, 0.0], 0.7).distance(&HyperboloidPoint::ORIGIN), 0.7, epsilon = 1e-14);
    }

    #[test]
    fn boost_construction_and_inverse() {
        let b = LorentzBoost::along([1.0, 2.0, -0.5], 0.9).compose(&LorentzBoost::rotation([0.0, 0.0, 1.0], 0.4));
        assert!(b.metric_defect() < 1e-12);
        assert!(LorentzBoost::new(b.matrix).is_ok());
        let id = b.compose(&b.inverse());
        for i in 0..4 {
            for j in 0..4 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((id.matrix[i][j] - t).abs() < 1e-12);
            }
        }
        let mut bad = b.matrix;
        bad[1][2] += 1e-3;
        assert!(LorentzBoost::new(bad).is_err());
        let mut flipped = LorentzBoost::identity().matrix;
        flipped[0][0] = -1.0;
        assert!(LorentzBoost::new(flipped).is_err());
    }

    #[test]
    fn boost_maps_origin_to_target() {
        let v = HyperboloidPoint::new([0.2, 0.7, -1.3]);
        let img = LorentzBoost::to_point(&v).apply_point(&HyperboloidPoint::ORIGIN);
        for i in 0..3 {
            assert_relative_eq!(img.vs[i], v.vs[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn geom_trivial_and_beta() {
        let v = HyperboloidPoint::new([0.2, 0.1, 0.0]);
        let r = geom_bounds(&v, &v, 3.0, 3.0, 1.0, None).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.checks[0].smaller, 0.0);
        assert_relative_eq!(r.beta, 0.707_106_781_186_547_5, epsilon = 1e-15);
        assert!(geom_bounds(&HyperboloidPoint::new([2.0, 0.0, 0.0]), &v, 1.0, 1.0, 1.0, None).is_err());
    }

    #[test]
    fn difference_region_values() {
        let r = support_difference_bound(1.0);
        assert_relative_eq!(r.ratio_max, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_eq!(r.radius_max, 2.0);
        let z = support_difference_bound(0.0);
        assert_eq!((z.ratio_max, z.radius_max), (0.0, 0.0));
    }
}
