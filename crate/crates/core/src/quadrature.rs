//! Gauss–Legendre rules, graded composite rules for flat-edged integrands,
//! and an adaptive Gauss–Kronrod (7/15) integrator for complex integrands.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, pairwise_sum_real};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Maps the rule to [a, b] and returns (node, weight) pairs.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const CACHED_ORDERS: usize = 65;

/// Shared rule of order `n` (cached for n ≤ 64).
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static CACHE: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    assert!((1..CACHED_ORDERS).contains(&n), "cached Gauss-Legendre orders are 1..=64");
    &CACHE.get_or_init(|| (1..CACHED_ORDERS).map(GaussLegendre::new).collect())[n - 1]
}

/// Panel edges for an integrand on [a, b] that is flat (all derivatives
/// vanish) at both ends, such as a C∞ bump. The middle is uniform and the
/// panels shrink geometrically towards each end.
pub fn graded_panels(a: f64, b: f64, uniform: usize, graded: usize) -> Vec<f64> {
    let mut unit = Vec::with_capacity(uniform + 2 * graded + 1);
    // Edges on [0, 1] symmetric about 1/2: uniform on [0.125, 0.875],
    // geometric grading by halves towards the ends.
    let inner_lo = 0.125;
    let inner_hi = 0.875;
    let mut left = Vec::new();
    let mut gap = inner_lo;
    for _ in 0..graded {
        gap *= 0.5;
        left.push(gap);
    }
    unit.push(0.0);
    unit.extend(left.iter().rev().copied());
    for i in 0..=uniform {
        unit.push(inner_lo + (inner_hi - inner_lo) * i as f64 / uniform as f64);
    }
    unit.extend(left.iter().map(|g| 1.0 - g));
    unit.push(1.0);
    unit.iter().map(|u| a + (b - a) * u).collect()
}

/// Composite Gauss–Legendre sum over the given panel edges.
pub fn integrate_panels<F: Fn(f64) -> f64>(edges: &[f64], order: usize, f: F) -> f64 {
    let rule = gauss_legendre(order);
    let parts: Vec<f64> = edges
        .windows(2)
        .map(|w| rule.mapped(w[0], w[1]).map(|(x, wt)| wt * f(x)).sum())
        .collect();
    pairwise_sum_real(&parts)
}

pub fn integrate_panels_complex<F: Fn(f64) -> Complex64>(edges: &[f64], order: usize, f: F) -> Complex64 {
    let rule = gauss_legendre(order);
    let parts: Vec<Complex64> = edges
        .windows(2)
        .map(|w| rule.mapped(w[0], w[1]).map(|(x, wt)| f(x) * wt).sum())
        .collect();
    pairwise_sum(&parts)
}

// Kronrod nodes and weights as published, with more digits than an f64 holds
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Abscissae of the 15-point Kronrod rule on [a, b], left to right.
pub fn gk15_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [c; 15];
    for j in 0..7 {
        x[j] = c - h * XGK[j];
        x[14 - j] = c + h * XGK[j];
    }
    x
}

/// Kronrod estimate and its error from integrand values at
/// [`gk15_nodes`], with the QUADPACK scaling
/// err = I_asc·min(1, (200|K − G|/I_asc)^{3/2}).
pub fn gk15_combine(fv: &[Complex64; 15], a: f64, b: f64) -> (Complex64, f64) {
    let h = 0.5 * (b - a);
    let weight = |i: usize| if i <= 7 { WGK[i] } else { WGK[14 - i] };
    let mut kron = Complex64::new(0.0, 0.0);
    let mut gauss = fv[7] * WG[3];
    for (i, v) in fv.iter().enumerate() {
        kron += v * weight(i);
    }
    for j in (1..7).step_by(2) {
        gauss += (fv[j] + fv[14 - j]) * WG[j / 2];
    }
    let mean = kron * 0.5;
    let resasc: f64 = fv.iter().enumerate().map(|(i, v)| weight(i) * (v - mean).norm()).sum::<f64>() * h.abs();
    let resabs: f64 = fv.iter().enumerate().map(|(i, v)| weight(i) * v.norm()).sum::<f64>() * h.abs();
    let mut err = ((kron - gauss) * h).norm();
    if resasc > 0.0 && err > 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    err = err.max(f64::EPSILON * resabs);
    (kron * h, err)
}

pub fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let x = gk15_nodes(a, b);
    let fv: [Complex64; 15] = std::array::from_fn(|i| f(x[i]));
    gk15_combine(&fv, a, b)
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub value: Complex64,
    pub error: f64,
    pub subdivisions: usize,
    /// Final partition.
    pub edges: Vec<f64>,
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    id: usize,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Globally adaptive GK15 over the initial panel edges: the segment with the
/// largest error estimate is bisected until the summed estimate drops below
/// `abs_tol`. Deterministic (ties broken by creation order, final sum taken
/// pairwise in left-endpoint order).
pub fn adaptive_gk15<F: Fn(f64) -> Complex64>(
    f: F,
    edges: &[f64],
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<AdaptiveOutcome> {
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    for w in edges.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        heap.push(Segment { a: w[0], b: w[1], value, error, id: next_id });
        next_id += 1;
    }
    let mut subdivisions = 0;
    let total_error = |heap: &BinaryHeap<Segment>| -> f64 {
        let mut errs: Vec<f64> = heap.iter().map(|s| s.error).collect();
        errs.sort_by(f64::total_cmp);
        pairwise_sum_real(&errs)
    };
    let mut error = total_error(&heap);
    while error > abs_tol && subdivisions < max_subdivisions {
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk15(&f, a, b);
            heap.push(Segment { a, b, value, error: err, id: next_id });
            next_id += 1;
        }
        subdivisions += 1;
        error = total_error(&heap);
    }
    let mut segments = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let values: Vec<Complex64> = segments.iter().map(|s| s.value).collect();
    let value = pairwise_sum(&values);
    if error > abs_tol {
        return Err(Error::Quadrature { value, achieved: error, requested: abs_tol, subdivisions });
    }
    let mut edges: Vec<f64> = segments.iter().map(|s| s.a).collect();
    edges.push(segments.last().map_or(0.0, |s| s.b));
    Ok(AdaptiveOutcome { value, error, subdivisions, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33] {
            let rule = GaussLegendre::new(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert_relative_eq!(wsum, 2.0, epsilon = 1e-14);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-13, "n={n}");
            let even = (2 * n - 2) as i32;
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(even)).sum();
            assert_relative_eq!(got, 2.0 / (even as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn graded_rule_handles_flat_bump() {
        // ∫_{-1}^{1} exp(-1/(1-x²)) dx = 0.443993816168079...
        let edges = graded_panels(-1.0, 1.0, 4, 6);
        let v = integrate_panels(&edges, 16, |x| {
            let t = 1.0 - x * x;
            if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() }
        });
        assert_relative_eq!(v, 0.443_993_816_168_079_4, epsilon = 1e-13);
    }

    #[test]
    fn adaptive_oscillatory_integral() {
        // ∫_0^1 e^{i 200 x²} x dx = (e^{200 i} - 1)/(400 i)
        let out = adaptive_gk15(
            |x| Complex64::from_polar(x, 200.0 * x * x),
            &[0.0, 0.5, 1.0],
            1e-12,
            500,
        )
        .unwrap();
        let exact = (Complex64::from_polar(1.0, 200.0) - 1.0) / Complex64::new(0.0, 400.0);
        assert!((out.value - exact).norm() < 1e-12);
    }

    #[test]
    fn adaptive_reports_failure_with_best_value() {
        let err = adaptive_gk15(|x| Complex64::new(x.sin() * 1e3, 0.0).powf(0.5), &[0.0, 100.0], 1e-30, 3);
        assert!(matches!(err, Err(Error::Quadrature { subdivisions: 3, .. })));
    }
}
