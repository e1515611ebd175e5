//! The oscillatory hyperboloid integral
//!
//! ```text
//! I(ρ, v) = ∫ f(u) e^{iρ v·u} dμ(u)
//!         ~ e^{i3π/4} (2π/ρ)^{3/2} e^{iρ} Σ_k ρ^{-k} L_k f(v)
//! ```
//!
//! For radial f the integral reduces to one dimension in the geodesic
//! distance t from v: the angular average of f over the sphere of radius t
//! around v is 2π·S(|t−d|, t+d)/(sinh t sinh d), where d = dist(v, center)
//! and S(a, b) = ∫_a^b f(σ) sinh σ dσ.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::minkowski::{norm3, HyperboloidPoint, LorentzBoost};
use crate::profiles::{CorrectedProfile, HyperboloidProfile, RadialProfile};
use crate::quadrature::{adaptive_gk15, gauss_legendre, gk15_combine, gk15_nodes, graded_panels};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Absolute tolerance, measured in units of the stationary-phase scale
    /// (2π/ρ)^{3/2}.
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Minimum number of nodes per period of the phase.
    pub oscillation_resolution: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-9, max_subdivisions: 4000, oscillation_resolution: 16 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return invalid("abs_tol must be positive");
        }
        if self.oscillation_resolution < 8 {
            return invalid("oscillation_resolution must be at least 8");
        }
        Ok(())
    }
}

/// Result of one oscillatory integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavepacketIntegral {
    /// I(ρ, v).
    pub value: Complex64,
    /// I divided by the stationary-phase prefactor; → f(v) as ρ → ∞.
    pub normalized: Complex64,
    /// Error estimate of `normalized`.
    pub error: f64,
    pub subdivisions: usize,
}

/// e^{i3π/4}(2π/ρ)^{3/2}e^{iρ}.
pub fn stationary_prefactor(rho: f64) -> Complex64 {
    Complex64::from_polar((2.0 * PI / rho).powf(1.5), 0.75 * PI + rho)
}

pub fn integrate_wavepacket(
    f: &dyn RadialProfile,
    rho: f64,
    v: &HyperboloidPoint,
    spec: &QuadratureSpec,
) -> Result<WavepacketIntegral> {
    integrate_wavepacket_signed(f, rho, v, 1.0, spec)
}

/// ∫ f(u) e^{i·sign·ρ v·u} dμ(u) with sign = ±1; for sign = −1 the
/// prefactor used in `normalized` is conjugated.
pub fn integrate_wavepacket_signed(
    f: &dyn RadialProfile,
    rho: f64,
    v: &HyperboloidPoint,
    sign: f64,
    spec: &QuadratureSpec,
) -> Result<WavepacketIntegral> {
    if !(rho > 0.0) {
        return invalid(format!("ρ must be positive (got {rho})"));
    }
    spec.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let d = f.center().distance(v);
    let r = f.support_radius();
    let lo = (d - r).max(0.0);
    let hi = d + r;
    if f.is_zero() {
        return Ok(WavepacketIntegral { value: zero, normalized: zero, error: 0.0, subdivisions: 0 });
    }

    // Phase relative to e^{iρ}: ρ(cosh t − 1) = 2ρ sinh²(t/2).
    let integrand = |t: f64| -> Complex64 {
        let half = (0.5 * t).sinh();
        angular_weight(f, d, t) * Complex64::from_polar(1.0, sign * 2.0 * rho * half * half)
    };
    let edges = initial_panels(d, lo, hi, rho, spec);

    let scale = (2.0 * PI / rho).powf(1.5);
    let tol = spec.abs_tol * scale;
    let prefactor_sign = Complex64::from_polar(1.0, sign * 0.75 * PI);
    let outcome = adaptive_gk15(integrand, &edges, tol, spec.max_subdivisions).map_err(|e| match e {
        Error::Quadrature { value, achieved, requested, subdivisions } => Error::Quadrature {
            value: value / (prefactor_sign * scale),
            achieved: achieved / scale,
            requested: requested / scale,
            subdivisions,
        },
        other => other,
    })?;
    let value = outcome.value * Complex64::from_polar(1.0, sign * rho);
    Ok(WavepacketIntegral {
        value,
        normalized: outcome.value / (prefactor_sign * scale),
        error: outcome.error / scale,
        subdivisions: outcome.subdivisions,
    })
}

/// sinh²t times the angular average of f over the sphere of radius t
/// around a point at distance d from the profile center.
fn angular_weight(f: &dyn RadialProfile, d: f64, t: f64) -> Complex64 {
    let sh = t.sinh();
    if d < 1e-6 {
        4.0 * PI * f.radial_value(t) * sh * sh
    } else {
        2.0 * PI * f.shell_integral((t - d).abs(), t + d) * sh / d.sinh()
    }
}

/// Uniform panels resolving the oscillation at ρ, plus a break at t = d.
fn initial_panels(d: f64, lo: f64, hi: f64, rho: f64, spec: &QuadratureSpec) -> Vec<f64> {
    let phase_span = 2.0 * rho * ((0.5 * hi).sinh().powi(2) - (0.5 * lo).sinh().powi(2));
    let periods = phase_span / (2.0 * PI);
    let panels = 4usize.max((periods * spec.oscillation_resolution as f64 / 15.0).ceil() as usize);
    let mut edges: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect();
    if d > lo && d < hi && !edges.contains(&d) {
        edges.push(d);
        edges.sort_by(f64::total_cmp);
    }
    edges
}

/// The signed integral for many ρ at once. The ρ-independent factor is
/// evaluated once on GK15 panels sized for the largest ρ; a ρ whose summed
/// error estimate misses the tolerance is redone adaptively.
pub fn integrate_wavepacket_many(
    f: &dyn RadialProfile,
    rhos: &[f64],
    v: &HyperboloidPoint,
    sign: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<WavepacketIntegral>> {
    if rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return invalid("ρ must be positive");
    }
    spec.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    if f.is_zero() || rhos.is_empty() {
        return Ok(vec![WavepacketIntegral { value: zero, normalized: zero, error: 0.0, subdivisions: 0 }; rhos.len()]);
    }
    let d = f.center().distance(v);
    let r = f.support_radius();
    let (lo, hi) = ((d - r).max(0.0), d + r);
    // Partition adapted (with headroom) to the most oscillatory case.
    let rho_max = rhos.iter().copied().fold(0.0, f64::max);
    let scale_max = (2.0 * PI / rho_max).powf(1.5);
    let probe = |t: f64| -> Complex64 {
        let half = (0.5 * t).sinh();
        angular_weight(f, d, t) * Complex64::from_polar(1.0, sign * 2.0 * rho_max * half * half)
    };
    let edges = match adaptive_gk15(probe, &initial_panels(d, lo, hi, rho_max, spec), 0.25 * spec.abs_tol * scale_max, spec.max_subdivisions) {
        Ok(outcome) => outcome.edges,
        Err(_) => initial_panels(d, lo, hi, rho_max, spec),
    };
    let panels: Vec<([f64; 15], [Complex64; 15], [f64; 15])> = edges
        .windows(2)
        .map(|w| {
            let x = gk15_nodes(w[0], w[1]);
            let amp = std::array::from_fn(|i| angular_weight(f, d, x[i]));
            let q = std::array::from_fn(|i| 2.0 * (0.5 * x[i]).sinh().powi(2));
            (x, amp, q)
        })
        .collect();
    let prefactor_sign = Complex64::from_polar(1.0, sign * 0.75 * PI);
    rhos.iter()
        .map(|&rho| {
            let scale = (2.0 * PI / rho).powf(1.5);
            let tol = spec.abs_tol * scale;
            let mut parts = Vec::with_capacity(panels.len());
            let mut error = 0.0;
            for (w, (_, amp, q)) in edges.windows(2).zip(&panels) {
                let fv = std::array::from_fn(|i| amp[i] * Complex64::from_polar(1.0, sign * rho * q[i]));
                let (val, err) = gk15_combine(&fv, w[0], w[1]);
                parts.push(val);
                error += err;
            }
            if error > tol {
                return integrate_wavepacket_signed(f, rho, v, sign, spec);
            }
            let raw = pairwise_sum(&parts);
            Ok(WavepacketIntegral {
                value: raw * Complex64::from_polar(1.0, sign * rho),
                normalized: raw / (prefactor_sign * scale),
                error: error / scale,
                subdivisions: panels.len(),
            })
        })
        .collect()
}

/// Independent scheme: tensor grid in normal coordinates (t, cos θ, φ)
/// around v, evaluating f directly at the boosted points. The polar axis
/// points towards the profile center, and cos θ is restricted to the part
/// of each sphere that meets the support.
pub fn integrate_wavepacket_tensor(
    f: &dyn RadialProfile,
    rho: f64,
    v: &HyperboloidPoint,
    t_order: usize,
    theta_panels: usize,
    n_phi: usize,
) -> Complex64 {
    let d = f.center().distance(v);
    let r = f.support_radius();
    let lo = (d - r).max(0.0);
    let hi = d + r;
    let boost = LorentzBoost::to_point(v);
    let center_rest = boost.inverse().apply_point(&f.center());
    let axis = {
        let n = norm3(&center_rest.vs);
        if n > 0.0 {
            [center_rest.vs[0] / n, center_rest.vs[1] / n, center_rest.vs[2] / n]
        } else {
            [0.0, 0.0, 1.0]
        }
    };
    let helper = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(helper, axis));
    let e2 = cross(axis, e1);

    let phase_span = rho * (hi.cosh() - lo.cosh());
    let t_panels = 4usize.max((phase_span / (2.0 * PI) * 2.0).ceil() as usize);
    let t_edges = graded_panels(lo, hi, t_panels, 8);
    let t_rule = gauss_legendre(t_order);
    let c_rule = gauss_legendre(20);
    let mut total = Complex64::new(0.0, 0.0);
    for w in t_edges.windows(2) {
        for (t, wt) in t_rule.mapped(w[0], w[1]) {
            let (sh, ch) = (t.sinh(), t.cosh());
            let cmin = if d > 0.0 && sh > 0.0 {
                ((ch * d.cosh() - r.cosh()) / (sh * d.sinh())).max(-1.0)
            } else {
                -1.0
            };
            if cmin >= 1.0 {
                continue;
            }
            let c_edges = graded_panels(cmin, 1.0, theta_panels, 6);
            let mut shell = Complex64::new(0.0, 0.0);
            for cw in c_edges.windows(2) {
                for (c, wc) in c_rule.mapped(cw[0], cw[1]) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for j in 0..n_phi {
                        let phi = 2.0 * PI * j as f64 / n_phi as f64;
                        let (sp, cp) = phi.sin_cos();
                        let n = [
                            c * axis[0] + s * (cp * e1[0] + sp * e2[0]),
                            c * axis[1] + s * (cp * e1[1] + sp * e2[1]),
                            c * axis[2] + s * (cp * e1[2] + sp * e2[2]),
                        ];
                        let u_rest = HyperboloidPoint::new([sh * n[0], sh * n[1], sh * n[2]]);
                        let u = boost.apply_point(&u_rest);
                        shell += f.value_at(&u) * (wc * 2.0 * PI / n_phi as f64);
                    }
                }
            }
            total += shell * Complex64::from_polar(wt * sh * sh, rho * ch);
        }
    }
    total
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Coefficients C[k][n] with L_k = Σ_{n≤k} C[k][n] (Δ+1)ⁿ, obtained from
/// the Laplace expansion of the integral in geodesic polar coordinates.
pub fn stationary_phase_coefficients(kmax: usize) -> Vec<Vec<Complex64>> {
    // sinh-to-arcsinh series: t(w) = Σ_j (−1)^j c_j (w/2)^j with
    // c_j = (2j)!/(4^j (j!)² (2j+1)).
    let mut tau = vec![0.0; kmax + 1];
    let mut central = 1.0; // (2j)!/(4^j (j!)²)
    for (j, t) in tau.iter_mut().enumerate() {
        if j > 0 {
            central *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *t = sign * central / (2 * j + 1) as f64 / 2f64.powi(j as i32);
    }
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; kmax + 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j <= kmax {
                    out[i + j] += x * y;
                }
            }
        }
        out
    };
    // Γ(k + 3/2) = (2k+1)!! √π / 2^{k+1}
    let gamma_half = |k: usize| -> f64 {
        let mut df = 1.0;
        let mut i = 2 * k + 1;
        while i > 1 {
            df *= i as f64;
            i -= 2;
        }
        df * PI.sqrt() / 2f64.powi(k as i32 + 1)
    };
    let factorial = |n: usize| -> f64 { (1..=n).map(|i| i as f64).product() };
    let i_pow = |k: usize| -> Complex64 {
        match k % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    };
    let mut powers = Vec::with_capacity(kmax + 1); // τ^{2n+1}
    let tau2 = mul(&tau, &tau);
    let mut current = tau.clone();
    for _ in 0..=kmax {
        powers.push(current.clone());
        current = mul(&current, &tau2);
    }
    (0..=kmax)
        .map(|k| {
            (0..=k)
                .map(|n| {
                    let beta = powers[n][k - n];
                    let real = 4.0 * PI * 2f64.powf(n as f64 + 0.5) * gamma_half(k) * beta
                        / ((2.0 * PI).powf(1.5) * factorial(2 * n + 1));
                    i_pow(k) * real
                })
                .collect()
        })
        .collect()
}

/// L_k f(v) for k = 0..=kmax from the closed-form coefficients.
pub fn stationary_terms(f: &dyn RadialProfile, v: &HyperboloidPoint, kmax: usize) -> Vec<Complex64> {
    let sigma = f.center().distance(v);
    let table = stationary_phase_coefficients(kmax);
    table
        .iter()
        .map(|row| row.iter().enumerate().map(|(n, c)| c * f.shifted_laplacian_power(n, sigma)).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionResult {
    pub rho: f64,
    pub v: HyperboloidPoint,
    /// ρ^{-k} L_k f(v), k = 0..=N.
    pub terms: Vec<Complex64>,
    /// Normalized oracle value I/prefactor.
    pub oracle: Complex64,
    /// |oracle − Σ terms|.
    pub remainder_estimate: f64,
    pub quadrature_error: f64,
}

pub fn expansion_at(
    f: &dyn RadialProfile,
    rho: f64,
    v: &HyperboloidPoint,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<ExpansionResult> {
    let integral = integrate_wavepacket(f, rho, v, spec)?;
    let coeffs = stationary_terms(f, v, n);
    let terms: Vec<Complex64> = coeffs.iter().enumerate().map(|(k, c)| c * rho.powi(-(k as i32))).collect();
    let partial: Complex64 = terms.iter().sum();
    Ok(ExpansionResult {
        rho,
        v: *v,
        terms,
        oracle: integral.normalized,
        remainder_estimate: (integral.normalized - partial).norm(),
        quadrature_error: integral.error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFit {
    /// Fitted L_k f(v), k = 0..=kmax.
    pub coeffs: Vec<Complex64>,
    pub residual_rms: f64,
    pub condition: f64,
}

pub const FIT_CONDITION_LIMIT: f64 = 1e12;

/// Least-squares fit of the normalized oracle over `rho_grid` to
/// Σ_{k≤kmax} c_k ρ^{-k}.
pub fn extract_lk(
    f: &dyn RadialProfile,
    v: &HyperboloidPoint,
    kmax: usize,
    rho_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<CoefficientFit> {
    if kmax > 3 {
        return invalid("kmax is capped at 3");
    }
    if rho_grid.len() < kmax + 2 {
        return invalid("ρ grid too short for the requested order");
    }
    let lo = rho_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rho_grid.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-12) {
        return invalid("ρ grid must be positive and span at least one decade");
    }
    let values = Execution::current().map(rho_grid, |rho| integrate_wavepacket(f, *rho, v, spec).map(|i| i.normalized));
    let values: Vec<Complex64> = values.into_iter().collect::<Result<_>>()?;
    fit_inverse_powers(rho_grid, &values, kmax)
}

/// Fit of samples y(ρ) to Σ_{k≤kmax} c_k ρ^{-k} (columns scaled by ρ_min^k).
pub fn fit_inverse_powers(rho: &[f64], values: &[Complex64], kmax: usize) -> Result<CoefficientFit> {
    let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let rows = rho.len();
    let a = DMatrix::from_fn(rows, kmax + 1, |i, k| (lo / rho[i]).powi(k as i32));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= FIT_CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition, limit: FIT_CONDITION_LIMIT });
    }
    let solve = |b: DMatrix<f64>| svd.solve(&b, 0.0).expect("thin SVD with U and V");
    let re = solve(DMatrix::from_fn(rows, 1, |i, _| values[i].re));
    let im = solve(DMatrix::from_fn(rows, 1, |i, _| values[i].im));
    let coeffs: Vec<Complex64> = (0..=kmax).map(|k| Complex64::new(re[k], im[k]) * lo.powi(k as i32)).collect();
    let mut ss = 0.0;
    for (i, r) in rho.iter().enumerate() {
        let model: Complex64 = coeffs.iter().enumerate().map(|(k, c)| c * r.powi(-(k as i32))).sum();
        ss += (model - values[i]).norm_sqr();
    }
    Ok(CoefficientFit { coeffs, residual_rms: (ss / rows as f64).sqrt(), condition })
}

/// Corrections f_0 = f, f_k = −Σ_{j<k} L_{k−j} f_j.
#[derive(Debug, Clone)]
pub struct Corrections {
    pub profiles: Vec<CorrectedProfile>,
    /// Largest relative disagreement between the closed-form f_k and the
    /// values rebuilt from ρ-grid fits on `v_grid` (0 when not checked).
    pub fit_discrepancy: f64,
}

pub const CORRECTION_FIT_BUDGET: f64 = 0.05;

/// Builds f_1..f_N as polynomials in (Δ+1) applied to f. For every point
/// of `v_grid`, f_1 (and f_2 when N ≥ 2) is rebuilt from fitted
/// coefficients of the previously built corrections and compared.
pub fn recursive_corrections(
    f: &HyperboloidProfile,
    n: usize,
    v_grid: &[HyperboloidPoint],
    rho_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<Corrections> {
    if n > 3 {
        return invalid("correction order is capped at 3");
    }
    let table = stationary_phase_coefficients(n);
    let mut polys: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]];
    for k in 1..=n {
        let mut next = vec![Complex64::new(0.0, 0.0); k + 1];
        for (j, pj) in polys.iter().enumerate() {
            for (a, ca) in table[k - j].iter().enumerate() {
                for (b, cb) in pj.iter().enumerate() {
                    next[a + b] -= ca * cb;
                }
            }
        }
        polys.push(next);
    }
    let profiles: Vec<CorrectedProfile> = polys
        .into_iter()
        .map(|coeffs| CorrectedProfile { base: f.clone(), coeffs })
        .collect();

    let mut discrepancy: f64 = 0.0;
    let checked = n.min(2);
    if checked > 0 && !v_grid.is_empty() {
        let scale: Vec<f64> = (1..=checked)
            .map(|k| v_grid.iter().map(|v| profiles[k].value_at(v).norm()).fold(0.0, f64::max).max(1e-300))
            .collect();
        for v in v_grid {
            let fits: Vec<CoefficientFit> = (0..checked)
                .map(|j| extract_lk(&profiles[j], v, 3, rho_grid, spec))
                .collect::<Result<_>>()?;
            for k in 1..=checked {
                let rebuilt: Complex64 = -(0..k).map(|j| fits[j].coeffs[k - j]).sum::<Complex64>();
                let exact = profiles[k].value_at(v);
                discrepancy = discrepancy.max((rebuilt - exact).norm() / scale[k - 1]);
            }
        }
        if discrepancy > CORRECTION_FIT_BUDGET {
            return Err(Error::BudgetExceeded { discrepancy, budget: CORRECTION_FIT_BUDGET });
        }
    }
    Ok(Corrections { profiles, fit_discrepancy: discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_table_low_orders() {
        let c = stationary_phase_coefficients(3);
        let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-8;
        assert!(close(c[0][0], Complex64::new(1.0, 0.0)));
        assert!(close(c[1][0], Complex64::new(0.0, -0.125)));
        assert!(close(c[1][1], Complex64::new(0.0, 0.5)));
        assert!(close(c[2][0], Complex64::new(-0.0703125, 0.0)));
        assert!(close(c[2][1], Complex64::new(0.3125, 0.0)));
        assert!(close(c[2][2], Complex64::new(-0.125, 0.0)));
        assert!(close(c[3][0], Complex64::new(0.0, 0.07324219)));
        assert!(close(c[3][3], Complex64::new(0.0, -0.02083333)));
    }

    #[test]
    fn reduced_and_tensor_schemes_agree_off_center() {
        let f = HyperboloidProfile::new(HyperboloidPoint::new([0.2, 0.0, 0.1]), 0.6, 1.0).unwrap();
        let v = HyperboloidPoint::new([0.35, -0.1, 0.0]);
        let spec = QuadratureSpec { abs_tol: 1e-12, ..Default::default() };
        let a = integrate_wavepacket(&f, 20.0, &v, &spec).unwrap().value;
        let b = integrate_wavepacket_tensor(&f, 20.0, &v, 16, 6, 24);
        assert!((a - b).norm() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn zero_profile_gives_zero() {
        let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 0.5, 0.0).unwrap();
        let out = integrate_wavepacket(&f, 50.0, &HyperboloidPoint::ORIGIN, &QuadratureSpec::default()).unwrap();
        assert_eq!(out.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fit_recovers_exact_series() {
        let rho: Vec<f64> = (0..16).map(|i| 30.0 * 10f64.powf(i as f64 / 15.0)).collect();
        let c = [Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.3), Complex64::new(-0.2, 0.1)];
        let vals: Vec<Complex64> = rho.iter().map(|r| c[0] + c[1] / r + c[2] / (r * r)).collect();
        let fit = fit_inverse_powers(&rho, &vals, 2).unwrap();
        for (k, (got, want)) in fit.coeffs.iter().zip(&c).enumerate() {
            assert!((got - want).norm() < 1e-9, "{k}: {got} vs {want} cond {}", fit.condition);
        }
    }
}
