//! Test functions: compactly supported bumps on H₊ (with exact derivatives
//! of the shifted Laplacian), momentum-space smearings supported in the
//! forward cone, the diamond multiplier (p²)^{3/4}, and time kernels.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::minkowski::{FourVector, HyperboloidPoint};
use crate::oscillatory::{integrate_wavepacket_signed, QuadratureSpec};
use crate::quadrature::{gauss_legendre, graded_panels, integrate_panels};

/// exp(−1/(1−τ²)) on |τ| < 1, zero elsewhere.
pub fn bump(tau: f64) -> f64 {
    let t = 1.0 - tau * tau;
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// ∫_{-1}^{1} exp(−1/(1−τ²)) dτ.
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_4;

/// Derivatives B⁽⁰⁾..B⁽ⁿ⁾ of the bump at τ, via B' = q'B with
/// q = −1/(1−τ²) and the Leibniz rule.
pub fn bump_derivatives(tau: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let b = bump(tau);
    if b == 0.0 {
        return out;
    }
    // q^{(i)} = −½ i! [(1−τ)^{−(i+1)} + (−1)^i (1+τ)^{−(i+1)}]
    let a = 1.0 / (1.0 - tau);
    let c = 1.0 / (1.0 + tau);
    let mut q = vec![0.0; n + 1];
    let (mut pa, mut pc, mut fact) = (a, c, 1.0);
    for (i, qi) in q.iter_mut().enumerate() {
        if i > 0 {
            pa *= a;
            pc *= c;
            fact *= i as f64;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        *qi = -0.5 * fact * (pa + sign * pc);
    }
    out[0] = b;
    for k in 0..n {
        // B^{(k+1)} = Σ_{i=0}^{k} C(k,i) q^{(i+1)} B^{(k−i)}
        let mut s = 0.0;
        let mut binom = 1.0;
        for i in 0..=k {
            s += binom * q[i + 1] * out[k - i];
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        out[k + 1] = s;
    }
    out
}

/// Smooth step: 0 for x ≤ 0, 1 for x ≥ 1, C∞ in between.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// 1 on [0, inner], 0 beyond `outer`, smooth in between.
pub fn smooth_plateau(x: f64, inner: f64, outer: f64) -> f64 {
    if x <= inner {
        1.0
    } else if x >= outer {
        0.0
    } else {
        1.0 - smooth_step((x - inner) / (outer - inner))
    }
}

/// A function on H₊ depending only on the geodesic distance σ from a center.
pub trait RadialProfile: Send + Sync {
    fn center(&self) -> HyperboloidPoint;
    /// Value vanishes for σ ≥ support_radius.
    fn support_radius(&self) -> f64;
    fn radial_value(&self, sigma: f64) -> Complex64;
    /// ∫_a^b φ(σ) sinh σ dσ for 0 ≤ a ≤ b.
    fn shell_integral(&self, a: f64, b: f64) -> Complex64;
    /// ((Δ + 1)ⁿ φ)(σ) with Δ the Laplace–Beltrami operator of H₊.
    fn shifted_laplacian_power(&self, n: usize, sigma: f64) -> Complex64;

    fn value_at(&self, v: &HyperboloidPoint) -> Complex64 {
        let d = self.center().distance(v);
        if d >= self.support_radius() {
            return Complex64::new(0.0, 0.0);
        }
        self.radial_value(d)
    }

    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    SmoothBump,
}

/// Cumulative table of ∫_0^σ B(s/R) sinh s ds on a fixed graded mesh.
#[derive(Debug)]
struct ShellTable {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

const SHELL_ORDER: usize = 16;

impl ShellTable {
    fn new(radius: f64) -> Self {
        let mut unit: Vec<f64> = (0..=6).map(|i| 0.75 * i as f64 / 6.0).collect();
        let mut gap = 0.25;
        for _ in 0..14 {
            gap *= 0.5;
            unit.push(1.0 - gap);
        }
        unit.push(1.0);
        let edges: Vec<f64> = unit.iter().map(|u| u * radius).collect();
        let mut cumulative = vec![0.0; edges.len()];
        for i in 1..edges.len() {
            cumulative[i] = cumulative[i - 1] + Self::panel(radius, edges[i - 1], edges[i]);
        }
        ShellTable { edges, cumulative }
    }

    fn panel(radius: f64, a: f64, b: f64) -> f64 {
        gauss_legendre(SHELL_ORDER)
            .mapped(a, b)
            .map(|(s, w)| w * bump(s / radius) * s.sinh())
            .sum()
    }

    fn antiderivative(&self, radius: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let last = *self.cumulative.last().expect("nonempty");
        if x >= radius {
            return last;
        }
        let i = self.edges.partition_point(|e| *e <= x) - 1;
        self.cumulative[i] + Self::panel(radius, self.edges[i], x)
    }
}

/// f(v) = amplitude·exp(−1/(1−t²)), t = dist(v, center)/radius.
#[derive(Debug, Clone)]
pub struct HyperboloidProfile {
    pub center: HyperboloidPoint,
    pub radius: f64,
    pub amplitude: f64,
    pub kind: ProfileKind,
    table: Arc<ShellTable>,
}

impl PartialEq for HyperboloidProfile {
    fn eq(&self, o: &Self) -> bool {
        self.center == o.center && self.radius == o.radius && self.amplitude == o.amplitude
    }
}

impl HyperboloidProfile {
    pub fn new(center: HyperboloidPoint, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !amplitude.is_finite() {
            return invalid(format!("bump needs a finite positive radius (got {radius}) and finite amplitude"));
        }
        if center.vs.iter().any(|x| !x.is_finite()) {
            return invalid("bump center must be finite");
        }
        Ok(HyperboloidProfile { center, radius, amplitude, kind: ProfileKind::SmoothBump, table: Arc::new(ShellTable::new(radius)) })
    }

    pub fn from_spec(spec: &HyperboloidProfileSpec) -> Result<Self> {
        Self::new(HyperboloidPoint::new(spec.center), spec.radius, spec.amplitude)
    }

    pub fn spec(&self) -> HyperboloidProfileSpec {
        HyperboloidProfileSpec { center: self.center.vs, radius: self.radius, amplitude: self.amplitude }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        HyperboloidProfile { amplitude, ..self.clone() }
    }

    pub fn value(&self, v: &HyperboloidPoint) -> f64 {
        self.radial(self.center.distance(v))
    }

    pub fn radial(&self, sigma: f64) -> f64 {
        self.amplitude * bump(sigma / self.radius)
    }

    /// The support lies inside |v⃗| ≤ ν for the returned ν.
    pub fn nu(&self) -> f64 {
        (self.center.distance(&HyperboloidPoint::ORIGIN) + self.radius).sinh()
    }

    pub fn support_contains(&self, v: &HyperboloidPoint) -> bool {
        self.center.distance(v) < self.radius
    }

    /// σ-derivatives of the radial function, orders 0..=n.
    pub fn radial_derivatives(&self, sigma: f64, n: usize) -> Vec<f64> {
        let mut d = bump_derivatives(sigma / self.radius, n);
        let mut scale = self.amplitude;
        for x in d.iter_mut() {
            *x *= scale;
            scale /= self.radius;
        }
        d
    }

    /// Derivatives of h(σ) = sinh σ · φ(σ), orders 0..=n.
    fn sinh_weighted_derivatives(&self, sigma: f64, n: usize) -> Vec<f64> {
        let g = self.radial_derivatives(sigma, n);
        let (sh, ch) = (sigma.sinh(), sigma.cosh());
        (0..=n)
            .map(|k| {
                let mut s = 0.0;
                let mut binom = 1.0;
                for (j, gj) in g.iter().enumerate().take(k + 1) {
                    // d^{k−j} sinh
                    let trig = if (k - j) % 2 == 0 { sh } else { ch };
                    s += binom * trig * gj;
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                s
            })
            .collect()
    }

    /// ((Δ+1)ⁿ φ)(σ) = h^{(2n)}(σ)/sinh σ, and h^{(2n+1)}(0) at the center.
    pub fn shifted_laplacian(&self, n: usize, sigma: f64) -> f64 {
        if n == 0 {
            return self.radial(sigma);
        }
        if sigma >= self.radius {
            return 0.0;
        }
        if sigma < 1e-7 {
            return self.sinh_weighted_derivatives(0.0, 2 * n + 1)[2 * n + 1];
        }
        self.sinh_weighted_derivatives(sigma, 2 * n)[2 * n] / sigma.sinh()
    }

    /// h^{(k)}(σ) for h = sinh·φ.
    pub fn sinh_weighted_derivative(&self, k: usize, sigma: f64) -> f64 {
        if sigma >= self.radius {
            return 0.0;
        }
        self.sinh_weighted_derivatives(sigma, k)[k]
    }

    /// ∫_a^b φ(σ) sinh σ dσ.
    pub fn shell(&self, a: f64, b: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (self.table.antiderivative(self.radius, b) - self.table.antiderivative(self.radius, a))
    }
}

impl RadialProfile for HyperboloidProfile {
    fn center(&self) -> HyperboloidPoint {
        self.center
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
    fn radial_value(&self, sigma: f64) -> Complex64 {
        Complex64::new(self.radial(sigma), 0.0)
    }
    fn shell_integral(&self, a: f64, b: f64) -> Complex64 {
        Complex64::new(self.shell(a, b), 0.0)
    }
    fn shifted_laplacian_power(&self, n: usize, sigma: f64) -> Complex64 {
        Complex64::new(self.shifted_laplacian(n, sigma), 0.0)
    }
    fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// φ = Σₙ cₙ (Δ+1)ⁿ g for a bump g: the form taken by the stationary-phase
/// corrections.
#[derive(Debug, Clone)]
pub struct CorrectedProfile {
    pub base: HyperboloidProfile,
    pub coeffs: Vec<Complex64>,
}

impl CorrectedProfile {
    pub fn identity(base: HyperboloidProfile) -> Self {
        CorrectedProfile { base, coeffs: vec![Complex64::new(1.0, 0.0)] }
    }
}

impl RadialProfile for CorrectedProfile {
    fn center(&self) -> HyperboloidPoint {
        self.base.center
    }
    fn support_radius(&self) -> f64 {
        self.base.radius
    }
    fn radial_value(&self, sigma: f64) -> Complex64 {
        self.shifted_laplacian_power(0, sigma)
    }
    fn shell_integral(&self, a: f64, b: f64) -> Complex64 {
        // ∫ (Δ+1)ⁿ g · sinh = [h^{(2n−1)}] for n ≥ 1.
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| {
                let v = if n == 0 {
                    self.base.shell(a, b)
                } else {
                    let hi = b.min(self.base.radius);
                    let lo = a.min(self.base.radius);
                    self.base.sinh_weighted_derivative(2 * n - 1, hi) - self.base.sinh_weighted_derivative(2 * n - 1, lo)
                };
                c * v
            })
            .sum()
    }
    fn shifted_laplacian_power(&self, m: usize, sigma: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * self.base.shifted_laplacian(n + m, sigma))
            .sum()
    }
    fn is_zero(&self) -> bool {
        self.base.amplitude == 0.0 || self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperboloidProfileSpec {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

/// A function of four-momentum.
pub trait MomentumSmearing: Send + Sync {
    fn hat(&self, p: &FourVector) -> Complex64;
}

impl<F> MomentumSmearing for F
where
    F: Fn(&FourVector) -> Complex64 + Send + Sync,
{
    fn hat(&self, p: &FourVector) -> Complex64 {
        self(p)
    }
}

/// Plateau region on which a momentum profile equals 1 exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// |√p² − m| ≤ shell_inner.
    pub shell_inner: f64,
    /// dist(p/√p², angular center) ≤ angular_inner.
    pub angular_inner: f64,
}

/// χ̂(p) = M(√p²)·A(p/√p²) supported in √p² ∈ [m−δ, m+δ] and an angular bump.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumProfile {
    pub mass_center: f64,
    pub shell_halfwidth: f64,
    pub angular: HyperboloidProfile,
    pub plateau: Option<Plateau>,
}

impl MomentumProfile {
    pub fn new(mass_center: f64, shell_halfwidth: f64, angular: HyperboloidProfile, plateau: Option<Plateau>) -> Result<Self> {
        let chi = MomentumProfile { mass_center, shell_halfwidth, angular, plateau };
        chi.forward_cone_margin()?;
        if let Some(p) = plateau {
            if !(p.shell_inner >= 0.0 && p.shell_inner < shell_halfwidth && p.angular_inner >= 0.0 && p.angular_inner < chi.angular.radius) {
                return invalid("plateau region must lie strictly inside the support");
            }
        }
        Ok(chi)
    }

    /// Default shape: δ = 0.2m, no plateau.
    pub fn smooth(mass: f64, angular: HyperboloidProfile) -> Result<Self> {
        Self::new(mass, 0.2 * mass, angular, None)
    }

    /// Equal to 1 on |√p² − m| ≤ 0.1m and on directions within
    /// dist ≤ f.radius + margin of f's center; support reaches 2·margin
    /// beyond f's support.
    pub fn plateau_around(mass: f64, f: &HyperboloidProfile, margin: f64) -> Result<Self> {
        let angular = HyperboloidProfile::new(f.center, f.radius + 2.0 * margin, 1.0)?;
        Self::new(mass, 0.2 * mass, angular, Some(Plateau { shell_inner: 0.1 * mass, angular_inner: f.radius + margin }))
    }

    pub fn from_spec(spec: &MomentumProfileSpec) -> Result<Self> {
        let angular = HyperboloidProfile::from_spec(&spec.angular)?;
        let delta = spec.shell_halfwidth.unwrap_or(0.2 * spec.mass_center);
        let plateau = if spec.plateau {
            Some(Plateau {
                shell_inner: spec.plateau_shell.unwrap_or(0.1 * spec.mass_center),
                angular_inner: spec.plateau_angular.unwrap_or(0.5 * angular.radius),
            })
        } else {
            None
        };
        Self::new(spec.mass_center, delta, angular, plateau)
    }

    /// min over the support of p⁰ − |p⃗|; rejected unless positive.
    pub fn forward_cone_margin(&self) -> Result<f64> {
        let m = self.mass_center;
        let d = self.shell_halfwidth;
        if !(m > 0.0 && d > 0.0 && d < m) {
            return invalid(format!("momentum profile needs 0 < δ < m (m = {m}, δ = {d})"));
        }
        let reach = self.angular.center.distance(&HyperboloidPoint::ORIGIN) + self.angular.radius;
        Ok((m - d) * (-reach).exp())
    }

    pub fn value(&self, p: &FourVector) -> f64 {
        if !p.in_forward_cone() {
            return 0.0;
        }
        let mu = p.square().sqrt();
        let offset = (mu - self.mass_center).abs();
        if offset >= self.shell_halfwidth {
            return 0.0;
        }
        let v = HyperboloidPoint { vs: [p.xs[0] / mu, p.xs[1] / mu, p.xs[2] / mu] };
        let dist = self.angular.center.distance(&v);
        match self.plateau {
            None => {
                let shell = bump(offset / self.shell_halfwidth) * std::f64::consts::E;
                shell * self.angular.radial(dist)
            }
            Some(pl) => {
                smooth_plateau(offset, pl.shell_inner, self.shell_halfwidth)
                    * smooth_plateau(dist, pl.angular_inner, self.angular.radius)
            }
        }
    }

    pub fn in_plateau(&self, p: &FourVector) -> bool {
        let Some(pl) = self.plateau else { return false };
        let Some(v) = HyperboloidPoint::from_timelike(p) else { return false };
        (p.square().sqrt() - self.mass_center).abs() <= pl.shell_inner && self.angular.center.distance(&v) <= pl.angular_inner
    }
}

impl MomentumSmearing for MomentumProfile {
    fn hat(&self, p: &FourVector) -> Complex64 {
        Complex64::new(self.value(p), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumProfileSpec {
    pub mass_center: f64,
    #[serde(default)]
    pub shell_halfwidth: Option<f64>,
    pub angular: HyperboloidProfileSpec,
    #[serde(default)]
    pub plateau: bool,
    #[serde(default)]
    pub plateau_shell: Option<f64>,
    #[serde(default)]
    pub plateau_angular: Option<f64>,
}

/// p ↦ (p²)^power · χ̂(p); power 3/4 is the diamond map, −3/4 its inverse.
#[derive(Debug, Clone)]
pub struct Powered<S> {
    pub inner: S,
    pub power: f64,
}

impl<S: MomentumSmearing> MomentumSmearing for Powered<S> {
    fn hat(&self, p: &FourVector) -> Complex64 {
        let c = self.inner.hat(p);
        if c == Complex64::new(0.0, 0.0) {
            return c;
        }
        let p2 = p.square();
        assert!(p2 > 0.0, "smearing with support touching the light cone");
        c * p2.powf(self.power)
    }
}

pub fn diamond_transform(chi: &MomentumProfile) -> Result<Powered<MomentumProfile>> {
    let margin = chi.forward_cone_margin()?;
    if !(margin > 0.0) {
        return invalid("support touches the light cone");
    }
    Ok(Powered { inner: chi.clone(), power: 0.75 })
}

pub fn inverse_diamond<S: MomentumSmearing>(chi: S) -> Powered<S> {
    Powered { inner: chi, power: -0.75 }
}

/// (λ/2π)^{3/2} χ̂(p) ∫ f(v) e^{iλp·v} dμ(v) for p in the forward or backward cone.
pub fn f_lambda_hat(
    chi: &dyn MomentumSmearing,
    f: &dyn RadialProfile,
    lambda: f64,
    p: &FourVector,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    if !(lambda > 0.0) {
        return invalid("λ must be positive");
    }
    let c = chi.hat(p);
    if c == Complex64::new(0.0, 0.0) || f.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (q, sign) = if p.in_forward_cone() {
        (*p, 1.0)
    } else if (-*p).in_forward_cone() {
        (-*p, -1.0)
    } else {
        return invalid("smearing is nonzero outside the open double cone");
    };
    let mass = q.square().sqrt();
    let v = HyperboloidPoint { vs: [q.xs[0] / mass, q.xs[1] / mass, q.xs[2] / mass] };
    let integral = integrate_wavepacket_signed(f, lambda * mass, &v, sign, spec)?;
    Ok((lambda / (2.0 * std::f64::consts::PI)).powf(1.5) * c * integral.value)
}

/// Normalized bump h on ⟨τ₁, τ₂⟩ ⊂ (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeKernel {
    pub tau1: f64,
    pub tau2: f64,
    norm: f64,
}

impl TimeKernel {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self> {
        if !(tau1 > 0.0 && tau2 > tau1 && tau2.is_finite()) {
            return invalid(format!("time kernel support [{tau1}, {tau2}] must lie in (0, ∞)"));
        }
        let mut k = TimeKernel { tau1, tau2, norm: 1.0 };
        let edges = k.panels(4, 8);
        k.norm = integrate_panels(&edges, 16, |x| k.value(x));
        Ok(k)
    }

    pub fn value(&self, lambda: f64) -> f64 {
        let c = 0.5 * (self.tau1 + self.tau2);
        let half = 0.5 * (self.tau2 - self.tau1);
        bump((lambda - c) / half) / self.norm
    }

    fn panels(&self, uniform: usize, graded: usize) -> Vec<f64> {
        graded_panels(self.tau1, self.tau2, uniform, graded)
    }

    /// h̃(ω) = ∫ e^{iωλ} h(λ) dλ.
    pub fn fourier(&self, omega: f64) -> Complex64 {
        let periods = omega.abs() * (self.tau2 - self.tau1) / std::f64::consts::PI;
        let uniform = 4usize.max(periods.ceil() as usize);
        let edges = self.panels(uniform, 10);
        let rule = gauss_legendre(16);
        let parts: Vec<Complex64> = edges
            .windows(2)
            .map(|w| rule.mapped(w[0], w[1]).map(|(x, wt)| Complex64::from_polar(wt * self.value(x), omega * x)).sum())
            .collect();
        crate::exec::pairwise_sum(&parts)
    }

    pub fn scaled(&self, lambda: f64, eta: f64, mass: f64) -> Result<ScaledTimeKernel> {
        if !(lambda > 0.0 && eta > 0.0 && eta <= 1.0 && mass > 0.0) {
            return invalid("scaled kernel needs Λ > 0, 0 < η ≤ 1, m > 0");
        }
        let s = (mass * lambda).powf(eta) / mass;
        Ok(ScaledTimeKernel { kernel: *self, lambda, scale: s })
    }
}

/// h^η_Λ(λ) = s⁻¹ h(s⁻¹(λ − Λ) + 1), s = (mΛ)^η/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTimeKernel {
    pub kernel: TimeKernel,
    pub lambda: f64,
    pub scale: f64,
}

impl ScaledTimeKernel {
    pub fn value(&self, x: f64) -> f64 {
        self.kernel.value((x - self.lambda) / self.scale + 1.0) / self.scale
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.lambda + (self.kernel.tau1 - 1.0) * self.scale,
            self.lambda + (self.kernel.tau2 - 1.0) * self.scale,
        )
    }

    /// Quadrature nodes (λⱼ, wⱼ h(λⱼ)) over the support.
    pub fn nodes(&self, uniform: usize, graded: usize, order: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.support();
        let edges = graded_panels(a, b, uniform, graded);
        let rule = gauss_legendre(order);
        edges
            .windows(2)
            .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
            .map(|(x, w)| (x, w * self.value(x)))
            .collect()
    }
}

/// h_Λ(λ) = Λ⁻¹ h(λ/Λ).
pub fn time_kernel_plain(h: &TimeKernel, lambda: f64, x: f64) -> f64 {
    h.value(x / lambda) / lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for &tau in &[-0.7, -0.2, 0.0, 0.35, 0.8] {
            let d = bump_derivatives(tau, 9);
            let h = 1e-5;
            for k in 0..8 {
                let p = bump_derivatives(tau + h, 8)[k];
                let m = bump_derivatives(tau - h, 8)[k];
                let fd = (p - m) / (2.0 * h);
                let scale = d[k + 1].abs().max(1e-3 * (1.0 + d[k].abs()));
                assert!((fd - d[k + 1]).abs() <= 1e-5 * scale.max(1.0), "tau={tau} k={k}: {fd} vs {}", d[k + 1]);
            }
        }
        assert!(bump_derivatives(1.0, 5).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn shell_table_matches_direct_quadrature() {
        let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 1.3, 2.0).unwrap();
        let direct = integrate_panels(&graded_panels(0.2, 1.3, 8, 12), 20, |s| f.radial(s) * s.sinh());
        assert_relative_eq!(f.shell(0.2, 5.0), direct, epsilon = 1e-14, max_relative = 1e-12);
    }

    #[test]
    fn shifted_laplacian_matches_radial_formula() {
        // (Δ+1)φ = φ'' + 2 coth σ φ' + φ
        let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 1.5, 1.0).unwrap();
        for &s in &[0.1, 0.6, 1.1] {
            let d = f.radial_derivatives(s, 2);
            let expected = d[2] + 2.0 * d[1] / s.tanh() + d[0];
            assert_relative_eq!(f.shifted_laplacian(1, s), expected, epsilon = 1e-12, max_relative = 1e-10);
        }
        // Smooth at the center.
        let c = f.shifted_laplacian(2, 0.0);
        assert_relative_eq!(f.shifted_laplacian(2, 1e-4), c, max_relative = 1e-6);
    }

    #[test]
    fn corrected_shell_integral_uses_exact_antiderivative() {
        let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 1.0, 1.0).unwrap();
        let g = CorrectedProfile { base: f.clone(), coeffs: vec![Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.5), Complex64::new(-0.1, 0.2)] };
        let direct = integrate_panels(&graded_panels(0.1, 1.0, 8, 12), 20, |s| g.radial_value(s).re * s.sinh());
        let direct_im = integrate_panels(&graded_panels(0.1, 1.0, 8, 12), 20, |s| g.radial_value(s).im * s.sinh());
        let exact = g.shell_integral(0.1, 1.0);
        assert_relative_eq!(exact.re, direct, epsilon = 1e-11);
        assert_relative_eq!(exact.im, direct_im, epsilon = 1e-11);
    }

    #[test]
    fn plateau_is_exactly_one() {
        let f = HyperboloidProfile::new(HyperboloidPoint::new([0.1, 0.0, 0.0]), 0.4, 1.0).unwrap();
        let chi = MomentumProfile::plateau_around(1.0, &f, 0.15).unwrap();
        let v = HyperboloidPoint::new([0.2, 0.05, 0.0]);
        let p = 1.05 * v.as_four_vector();
        assert!(chi.in_plateau(&p));
        assert_eq!(chi.value(&p), 1.0);
        assert_eq!(chi.value(&(0.5 * v.as_four_vector())), 0.0);
    }

    #[test]
    fn time_kernel_normalization_and_scaling() {
        let h = TimeKernel::new(0.5, 1.5).unwrap();
        let edges = graded_panels(0.5, 1.5, 6, 10);
        assert_relative_eq!(integrate_panels(&edges, 20, |x| h.value(x)), 1.0, epsilon = 1e-12);
        assert_relative_eq!(h.fourier(0.0).re, 1.0, epsilon = 1e-12);
        let k = h.scaled(10.0, 1.0, 1.0).unwrap();
        assert_eq!(k.support(), (5.0, 15.0));
        assert_relative_eq!(k.value(10.0), h.value(1.0) / 10.0, epsilon = 1e-15);
    }
}
