//! Limits of hyperboloid-averaged fields on the free instance: the smeared
//! operators at finite λ, their time averages over a kernel h, the on-shell
//! ("primed") operator, out-field extrapolation and rate fits.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::freefield::{FockBasis, LinearField, ModeGrid, OperatorMatrix, Projector, TWO_PI_SQ};
use crate::minkowski::FourVector;
use crate::oscillatory::{integrate_wavepacket_many, QuadratureSpec};
use crate::profiles::{diamond_transform, MomentumProfile, MomentumSmearing, RadialProfile, TimeKernel};

/// Least-squares line through (ln x, ln y); points with y = 0 are excluded
/// and counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub excluded_zeros: usize,
}

impl RateFit {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
        if xs.len() != ys.len() {
            return invalid("rate fit needs matching x and y");
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !(*x > 0.0)) {
            return invalid("rate fit needs positive, strictly increasing x");
        }
        if ys.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
            return invalid("rate fit needs finite non-negative y");
        }
        let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
        let excluded_zeros = xs.len() - pts.len();
        if pts.len() < 2 {
            return Ok(RateFit { xs: xs.to_vec(), ys: ys.to_vec(), slope: f64::NEG_INFINITY, intercept: f64::NEG_INFINITY, r2: 1.0, excluded_zeros });
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
        Ok(RateFit { xs: xs.to_vec(), ys: ys.to_vec(), slope, intercept, r2, excluded_zeros })
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Richardson estimate assuming y(λ) = L + a/λ + O(λ⁻²), from the last two
/// points; the error is the change against the estimate from the two
/// points before.
pub fn richardson(lambdas: &[f64], values: &[Vec<Complex64>]) -> Result<(Vec<Complex64>, f64)> {
    let n = lambdas.len();
    if n < 3 || values.len() != n {
        return invalid("Richardson extrapolation needs at least three points");
    }
    let pair = |i: usize, j: usize| -> Vec<Complex64> {
        let (a, b) = (lambdas[i], lambdas[j]);
        values[i].iter().zip(&values[j]).map(|(x, y)| (b * y - a * x) / (b - a)).collect()
    };
    let last = pair(n - 2, n - 1);
    let prev = pair(n - 3, n - 2);
    let err = last.iter().zip(&prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok((last, err))
}

/// A field Ψ = φ(g) of the free instance together with the numerical
/// settings of every hyperboloid integral. `base = None` is the bare field
/// ((2π)²ĝ ≡ 1).
#[derive(Clone)]
pub struct FieldSpec {
    pub grid: ModeGrid,
    pub base: Option<Arc<dyn MomentumSmearing>>,
    pub quadrature: QuadratureSpec,
}

impl FieldSpec {
    pub fn bare(grid: ModeGrid, quadrature: QuadratureSpec) -> Self {
        FieldSpec { grid, base: None, quadrature }
    }

    pub fn with_base(grid: ModeGrid, base: Arc<dyn MomentumSmearing>, quadrature: QuadratureSpec) -> Self {
        FieldSpec { grid, base: Some(base), quadrature }
    }

    pub fn mass(&self) -> f64 {
        self.grid.mass
    }

    /// (2π)² ĝ(p).
    pub fn base_factor(&self, p: &FourVector) -> Complex64 {
        match &self.base {
            None => Complex64::new(1.0, 0.0),
            Some(g) => TWO_PI_SQ * g.hat(p),
        }
    }

    /// Ψ itself.
    pub fn base_field(&self) -> LinearField {
        self.field_from(|_| Complex64::new(1.0, 0.0) / TWO_PI_SQ)
    }

    /// Ψ(χ) for a momentum function χ̂ (coefficients (2π)²√w·(2π)²ĝ·χ̂ on
    /// both shells).
    pub fn field_from(&self, chi: impl Fn(&FourVector) -> Complex64 + Sync) -> LinearField {
        let coeffs = Execution::current().map(&self.grid.modes, |m| {
            let s = TWO_PI_SQ * m.weight.sqrt();
            let p = m.momentum();
            let c = chi(&p);
            let d = chi(&-p);
            let zero = Complex64::new(0.0, 0.0);
            let cc = if c == zero { zero } else { s * self.base_factor(&p) * c };
            let dd = if d == zero { zero } else { s * self.base_factor(&-p) * d };
            (cc, dd)
        });
        LinearField { creation: coeffs.iter().map(|c| c.0).collect(), annihilation: coeffs.iter().map(|c| c.1).collect() }
    }
}

/// Mode-resolved raw integrals ∫ f(u) e^{±iλ p_k·u} dμ(u) for every λ and
/// every mode with nonzero smearing, grouped by distance from the profile
/// center (modes at equal distance share one integral).
fn shell_integrals(
    spec: &FieldSpec,
    f: &dyn RadialProfile,
    lambdas: &[f64],
    needed: &[(bool, bool)],
) -> Result<Vec<Vec<(Complex64, Complex64)>>> {
    let m = spec.mass();
    let zero = Complex64::new(0.0, 0.0);
    let mut groups: BTreeMap<i64, usize> = BTreeMap::new();
    let mut mode_group = vec![usize::MAX; spec.grid.len()];
    let mut reps = Vec::new();
    for (k, mode) in spec.grid.modes.iter().enumerate() {
        if !(needed[k].0 || needed[k].1) {
            continue;
        }
        let d = f.center().distance(&mode.velocity(m));
        let key = (d * 1e12).round() as i64;
        let g = *groups.entry(key).or_insert_with(|| {
            reps.push(mode.velocity(m));
            reps.len() - 1
        });
        mode_group[k] = g;
    }
    let neg_needed = needed.iter().any(|n| n.1);
    let pos_needed = needed.iter().any(|n| n.0);
    let jobs: Vec<(usize, f64)> = (0..reps.len()).flat_map(|g| [(g, 1.0), (g, -1.0)]).collect();
    let rhos: Vec<f64> = lambdas.iter().map(|l| l * m).collect();
    let values = Execution::current().map(&jobs, |&(g, sign)| {
        if (sign > 0.0 && !pos_needed) || (sign < 0.0 && !neg_needed) {
            return Ok(vec![zero; lambdas.len()]);
        }
        integrate_wavepacket_many(f, &rhos, &reps[g], sign, &spec.quadrature).map(|v| v.into_iter().map(|i| i.value).collect::<Vec<_>>())
    });
    let values: Vec<Vec<Complex64>> = values.into_iter().collect::<Result<_>>()?;
    Ok((0..lambdas.len())
        .map(|l| {
            mode_group
                .iter()
                .map(|&g| if g == usize::MAX { (zero, zero) } else { (values[2 * g][l], values[2 * g + 1][l]) })
                .collect()
        })
        .collect())
}

/// Ψ(χ)[λ, f] for each λ: the field smeared with
/// F̂_λ(p) = (λ/2π)^{3/2} χ̂(p) ∫ f(v) e^{iλp·v} dμ(v).
pub fn hyperboloid_smear_many(
    spec: &FieldSpec,
    chi: &dyn MomentumSmearing,
    f: &dyn RadialProfile,
    lambdas: &[f64],
) -> Result<Vec<LinearField>> {
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return invalid("λ must be positive");
    }
    let n = spec.grid.len();
    if f.is_zero() {
        return Ok(vec![LinearField::zero(n); lambdas.len()]);
    }
    let zero = Complex64::new(0.0, 0.0);
    let chis: Vec<(Complex64, Complex64)> = spec.grid.modes.iter().map(|m| (chi.hat(&m.momentum()), chi.hat(&-m.momentum()))).collect();
    let needed: Vec<(bool, bool)> = chis.iter().map(|c| (c.0 != zero, c.1 != zero)).collect();
    let integrals = shell_integrals(spec, f, lambdas, &needed)?;
    Ok(lambdas
        .iter()
        .zip(&integrals)
        .map(|(&lambda, ints)| {
            let pre = (lambda / (2.0 * PI)).powf(1.5);
            let fhat: Vec<(Complex64, Complex64)> = chis
                .iter()
                .zip(ints)
                .map(|(c, i)| (if c.0 == zero { zero } else { pre * c.0 * i.0 }, if c.1 == zero { zero } else { pre * c.1 * i.1 }))
                .collect();
            let mut field = LinearField::zero(n);
            for (k, mode) in spec.grid.modes.iter().enumerate() {
                let s = TWO_PI_SQ * mode.weight.sqrt();
                let p = mode.momentum();
                if fhat[k].0 != zero {
                    field.creation[k] = s * spec.base_factor(&p) * fhat[k].0;
                }
                if fhat[k].1 != zero {
                    field.annihilation[k] = s * spec.base_factor(&-p) * fhat[k].1;
                }
            }
            field
        })
        .collect())
}

pub fn hyperboloid_smear(spec: &FieldSpec, chi: &dyn MomentumSmearing, f: &dyn RadialProfile, lambda: f64) -> Result<LinearField> {
    Ok(hyperboloid_smear_many(spec, chi, f, &[lambda])?.remove(0))
}

/// e^{−i(λm+3π/4)} Ψ(χ◇)[λ, f].
pub fn rephased_smear_many(spec: &FieldSpec, chi: &MomentumProfile, f: &dyn RadialProfile, lambdas: &[f64]) -> Result<Vec<LinearField>> {
    let diamond = diamond_transform(chi)?;
    let m = spec.mass();
    let fields = hyperboloid_smear_many(spec, &diamond, f, lambdas)?;
    Ok(fields
        .into_iter()
        .zip(lambdas)
        .map(|(fl, &l)| fl.scale(Complex64::from_polar(1.0, -(l * m + 0.75 * PI))))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimedField {
    pub field: LinearField,
    /// Always true on the free instance: every mode lies exactly on the
    /// shell, where h̃(Λ(√p² − m)) = h̃(0) = 1.
    pub lambda_independent: bool,
}

/// Ψ'_Λ[f] = ∫ h̃(Λ[√p² − m]) χ̂(p) f(p/√p²) Ψ̌(p) dp.
pub fn primed_field(spec: &FieldSpec, chi: &dyn MomentumSmearing, f: &dyn RadialProfile, h: &TimeKernel, lambda: f64) -> Result<PrimedField> {
    if !(lambda > 0.0) {
        return invalid("Λ must be positive");
    }
    let m = spec.mass();
    // Grid modes are constructed on the shell, so √p² − m is exactly 0.
    let shell_factor = h.fourier(lambda * 0.0);
    let n = spec.grid.len();
    let mut field = LinearField::zero(n);
    let zero = Complex64::new(0.0, 0.0);
    for (k, mode) in spec.grid.modes.iter().enumerate() {
        let p = mode.momentum();
        let c = chi.hat(&p);
        if c != zero {
            let s = TWO_PI_SQ * mode.weight.sqrt();
            field.creation[k] = s * spec.base_factor(&p) * shell_factor * c * f.value_at(&mode.velocity(m));
        }
        if chi.hat(&-p) != zero {
            return invalid("primed field needs a smearing supported in the forward cone");
        }
    }
    Ok(PrimedField { field, lambda_independent: true })
}

/// Quadrature layout of the time average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRule {
    pub uniform: usize,
    pub graded: usize,
    pub order: usize,
}

impl Default for KernelRule {
    fn default() -> Self {
        KernelRule { uniform: 4, graded: 4, order: 6 }
    }
}

/// Ψ^η_Λ[f] = ∫ h^η_Λ(λ) e^{−i(λm+3π/4)} Ψ(χ◇)[λ, f] dλ for each Λ.
pub fn time_averaged_fields(
    spec: &FieldSpec,
    chi: &MomentumProfile,
    f: &dyn RadialProfile,
    h: &TimeKernel,
    lambdas: &[f64],
    eta: f64,
    rule: KernelRule,
) -> Result<Vec<LinearField>> {
    let m = spec.mass();
    let mut out = Vec::with_capacity(lambdas.len());
    for &big in lambdas {
        let kernel = h.scaled(big, eta, m)?;
        let nodes = kernel.nodes(rule.uniform, rule.graded, rule.order);
        let xs: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let fields = rephased_smear_many(spec, chi, f, &xs)?;
        let mut acc = LinearField::zero(spec.grid.len());
        for (fl, (_, w)) in fields.iter().zip(&nodes) {
            acc = acc.add(&fl.scale(Complex64::new(*w, 0.0)));
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn time_averaged_field(
    spec: &FieldSpec,
    chi: &MomentumProfile,
    f: &dyn RadialProfile,
    h: &TimeKernel,
    lambda: f64,
    eta: f64,
) -> Result<LinearField> {
    Ok(time_averaged_fields(spec, chi, f, h, &[lambda], eta, KernelRule::default())?.remove(0))
}

/// Two kernel scalings η compared along Λ, and their extrapolated limits.
#[derive(Debug, Clone, Serialize)]
pub struct KernelComparison {
    pub lambdas: Vec<f64>,
    pub etas: (f64, f64),
    /// field_distance(Ψ^{η₁}_Λ, Ψ^{η₂}_Λ) per Λ.
    pub differences: Vec<f64>,
    /// Coefficient distance between the two Richardson limits.
    pub limit_difference: f64,
    pub extrapolation_errors: (f64, f64),
    /// Distances of the two limits from the exact shell operator.
    pub shell_distances: (f64, f64),
    /// limit_difference ≤ 10·(sum of extrapolation errors).
    pub agree: bool,
}

fn richardson_field(lambdas: &[f64], fields: &[LinearField]) -> Result<(LinearField, f64)> {
    let (creation, ec) = richardson(lambdas, &fields.iter().map(|f| f.creation.clone()).collect::<Vec<_>>())?;
    let (annihilation, ea) = richardson(lambdas, &fields.iter().map(|f| f.annihilation.clone()).collect::<Vec<_>>())?;
    Ok((LinearField { creation, annihilation }, (ec * ec + ea * ea).sqrt()))
}

/// Ψ^{η₁}_Λ[f] against Ψ^{η₂}_Λ[f]: both sequences must approach the same
/// limit.
#[allow(clippy::too_many_arguments)]
pub fn kernel_independence_check(
    spec: &FieldSpec,
    chi: &MomentumProfile,
    f: &dyn RadialProfile,
    h: &TimeKernel,
    lambdas: &[f64],
    etas: (f64, f64),
    rule: KernelRule,
) -> Result<KernelComparison> {
    let a = time_averaged_fields(spec, chi, f, h, lambdas, etas.0, rule)?;
    let b = time_averaged_fields(spec, chi, f, h, lambdas, etas.1, rule)?;
    let differences = a.iter().zip(&b).map(|(x, y)| field_distance(x, y)).collect();
    let (la, ea) = richardson_field(lambdas, &a)?;
    let (lb, eb) = richardson_field(lambdas, &b)?;
    let limit_difference = field_distance(&la, &lb);
    let shell = primed_field(spec, chi, f, h, 1.0)?.field;
    Ok(KernelComparison {
        lambdas: lambdas.to_vec(),
        etas,
        differences,
        limit_difference,
        extrapolation_errors: (ea, eb),
        shell_distances: (field_distance(&la, &shell), field_distance(&lb, &shell)),
        agree: limit_difference <= 10.0 * (ea + eb),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimedDifference {
    pub lambdas: Vec<f64>,
    /// ‖(Ψ_Λ[f] − Ψ'_Λ[f]) E(Δ)‖ per Λ.
    pub norms: Vec<f64>,
    pub rate: RateFit,
}

/// Decay of the time-averaged field towards its on-shell counterpart.
#[allow(clippy::too_many_arguments)]
pub fn primed_difference(
    spec: &FieldSpec,
    chi: &MomentumProfile,
    f: &dyn RadialProfile,
    h: &TimeKernel,
    lambdas: &[f64],
    basis: &FockBasis,
    window: &Projector,
    rule: KernelRule,
) -> Result<PrimedDifference> {
    let fields = time_averaged_fields(spec, chi, f, h, lambdas, 1.0, rule)?;
    let mut norms = Vec::with_capacity(lambdas.len());
    for (fl, &l) in fields.iter().zip(lambdas) {
        let primed = primed_field(spec, chi, f, h, l)?.field;
        norms.push(projected_norm(&fl.sub(&primed), basis, window));
    }
    let rate = RateFit::fit(lambdas, &norms)?;
    Ok(PrimedDifference { lambdas: lambdas.to_vec(), norms, rate })
}

/// ‖X E(Δ)‖ for a field X on the truncated Fock space.
pub fn projected_norm(field: &LinearField, basis: &FockBasis, window: &Projector) -> f64 {
    field.to_matrix(basis, "X").project_columns(&window.mask).opnorm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutFieldVerdict {
    Converges,
    NoAsymptoticField,
}

#[derive(Debug, Clone)]
pub struct OutFieldResult {
    /// The exact shell operator: creation coefficients (2π)²√w (2π)²ĝ χ̂ f(k/m).
    pub limit: LinearField,
    pub lambdas: Vec<f64>,
    /// ‖(e^{−i(λm+3π/4)}Ψ(χ◇)[λ,f] − limit) E(Δ)‖.
    pub norms: Vec<f64>,
    pub rate: RateFit,
    /// Richardson limit of the finite-λ sequence and its error estimate.
    pub extrapolated: LinearField,
    pub extrapolation_error: f64,
    pub verdict: OutFieldVerdict,
}

/// Checks that χ̂ = 1 on m·supp f (plateau covering the support).
pub fn require_plateau_cover(chi: &MomentumProfile, f: &dyn RadialProfile, mass: f64) -> Result<()> {
    let Some(pl) = chi.plateau else {
        return invalid("out-field construction needs a plateau momentum profile");
    };
    let reach = chi.angular.center.distance(&f.center()) + f.support_radius();
    if reach > pl.angular_inner || (chi.mass_center - mass).abs() > pl.shell_inner {
        return invalid("plateau does not cover m·supp f");
    }
    Ok(())
}

pub fn out_field(
    spec: &FieldSpec,
    chi: &MomentumProfile,
    f: &dyn RadialProfile,
    lambdas: &[f64],
    basis: &FockBasis,
    window: &Projector,
) -> Result<OutFieldResult> {
    let m = spec.mass();
    require_plateau_cover(chi, f, m)?;
    let h = TimeKernel::new(0.5, 1.5)?;
    let limit = primed_field(spec, chi, f, &h, 1.0)?.field;
    let seq = rephased_smear_many(spec, chi, f, lambdas)?;
    let norms: Vec<f64> = seq.iter().map(|s| projected_norm(&s.sub(&limit), basis, window)).collect();
    let rate = RateFit::fit(lambdas, &norms)?;
    let (creation, err_c) = richardson(lambdas, &seq.iter().map(|s| s.creation.clone()).collect::<Vec<_>>())?;
    let (annihilation, err_a) = richardson(lambdas, &seq.iter().map(|s| s.annihilation.clone()).collect::<Vec<_>>())?;
    let verdict = if rate.slope < 0.0 { OutFieldVerdict::Converges } else { OutFieldVerdict::NoAsymptoticField };
    Ok(OutFieldResult {
        limit,
        lambdas: lambdas.to_vec(),
        norms,
        rate,
        extrapolated: LinearField { creation, annihilation },
        extrapolation_error: (err_c * err_c + err_a * err_a).sqrt(),
        verdict,
    })
}

/// Range of p⁰ over m·supp f.
pub fn shell_energy_range(f: &dyn RadialProfile, mass: f64) -> (f64, f64) {
    let d = f.center().distance(&crate::minkowski::HyperboloidPoint::ORIGIN);
    let r = f.support_radius();
    (mass * (d - r).max(0.0).cosh(), mass * (d + r).cosh())
}

/// Basis states with p⁰ in [lo, hi].
pub fn energy_band(basis: &FockBasis, lo: f64, hi: f64) -> Projector {
    Projector { mask: basis.momenta.iter().map(|p| p.x0 >= lo && p.x0 <= hi).collect() }
}

/// max |entry| of E(Δ₂) X E(Δ₁).
pub fn transfer_residual(op: &OperatorMatrix, delta1: &Projector, delta2: &Projector) -> f64 {
    op.project_columns(&delta1.mask).project_rows(&delta2.mask).max_abs()
}

/// Coefficient-space distance ‖(A − B)Ω‖ + ‖(A − B)*Ω‖.
pub fn field_distance(a: &LinearField, b: &LinearField) -> f64 {
    let d = a.sub(b);
    d.vacuum_norm() + d.adjoint().vacuum_norm()
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorCombination {
    pub label: String,
    pub norms: Vec<f64>,
    pub rate: Option<RateFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub lambdas: Vec<f64>,
    pub gap_cosh: f64,
    pub combinations: Vec<CommutatorCombination>,
    /// ‖[[Ψ₁*, Ψ₂], Ψ₃] E(Δ)‖ per Λ.
    pub double_commutator: Vec<f64>,
}

/// Commutators of time-averaged fields with disjointly supported profiles,
/// for all four combinations of adjoints, projected on `window`. The
/// window should only contain layers at least two below the truncation.
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_commutator_check(
    spec: &FieldSpec,
    chi1: &MomentumProfile,
    chi2: &MomentumProfile,
    f1: &dyn RadialProfile,
    f2: &dyn RadialProfile,
    f3: &dyn RadialProfile,
    h: &TimeKernel,
    lambdas: &[f64],
    basis: &FockBasis,
    window: &Projector,
) -> Result<CommutatorReport> {
    let gap = f1.center().distance(&f2.center()) - f1.support_radius() - f2.support_radius();
    if !(gap > 0.0) {
        return invalid("profiles must have disjoint supports");
    }
    let rule = KernelRule::default();
    let p1 = time_averaged_fields(spec, chi1, f1, h, lambdas, 1.0, rule)?;
    let p2 = time_averaged_fields(spec, chi2, f2, h, lambdas, 1.0, rule)?;
    let p3 = time_averaged_fields(spec, chi1, f3, h, lambdas, 1.0, rule)?;
    let mut combinations = Vec::new();
    for (s1, s2) in [(false, false), (true, false), (false, true), (true, true)] {
        let norms: Vec<f64> = p1
            .iter()
            .zip(&p2)
            .map(|(a, b)| {
                let a = if s1 { a.adjoint() } else { a.clone() };
                let b = if s2 { b.adjoint() } else { b.clone() };
                let c = a.to_matrix(basis, "A").commutator(&b.to_matrix(basis, "B"));
                c.project_columns(&window.mask).opnorm()
            })
            .collect();
        let rate = if norms.iter().filter(|n| **n > 0.0).count() >= 2 { Some(RateFit::fit(lambdas, &norms)?) } else { None };
        let label = format!("[{}, {}]", if s1 { "Psi1*" } else { "Psi1" }, if s2 { "Psi2*" } else { "Psi2" });
        combinations.push(CommutatorCombination { label, norms, rate });
    }
    let double_commutator = (0..lambdas.len())
        .map(|i| {
            let a = p1[i].adjoint().to_matrix(basis, "A");
            let b = p2[i].to_matrix(basis, "B");
            let c = p3[i].to_matrix(basis, "C");
            a.commutator(&b).commutator(&c).project_columns(&window.mask).opnorm()
        })
        .collect();
    Ok(CommutatorReport { lambdas: lambdas.to_vec(), gap_cosh: gap.max(0.0).cosh(), combinations, double_commutator })
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoProductReport {
    pub lambdas: Vec<f64>,
    /// (Ω, Ψ₁*Ψ₂Ω) per Λ.
    pub lhs: Vec<Complex64>,
    /// ‖E_Ω⊥ Ψ₁*Ψ₂Ω‖ per Λ.
    pub orthogonal: Vec<f64>,
    /// (2π)⁴ (Ψ₁Ω, (f̄₁f₂)(P/m) E₀ Ψ₂Ω).
    pub rhs: Complex64,
    /// |lhs − rhs| / max(|rhs|, scale) per Λ, scale = ‖Ψ₁Ω‖‖Ψ₂Ω‖(2π)⁴.
    pub residuals: Vec<f64>,
}

/// Ψ^η₁Λ[f₁]* Ψ^η₂Λ[f₂]Ω against its limit (2π)⁴(Ψ₁Ω,(f̄₁f₂)(P/m)E₀Ψ₂Ω)Ω.
#[allow(clippy::too_many_arguments)]
pub fn two_operator_product_check(
    spec1: &FieldSpec,
    spec2: &FieldSpec,
    chi: &MomentumProfile,
    f1: &dyn RadialProfile,
    f2: &dyn RadialProfile,
    h: &TimeKernel,
    lambdas: &[f64],
    eta: f64,
    basis: &FockBasis,
) -> Result<TwoProductReport> {
    let m = spec1.mass();
    require_plateau_cover(chi, f1, m)?;
    require_plateau_cover(chi, f2, m)?;
    let rule = KernelRule::default();
    let a = time_averaged_fields(spec1, chi, f1, h, lambdas, eta, rule)?;
    let b = if std::ptr::eq(spec1, spec2) && f1.center() == f2.center() && f1.support_radius() == f2.support_radius() && f1.radial_value(0.0) == f2.radial_value(0.0) {
        a.clone()
    } else {
        time_averaged_fields(spec2, chi, f2, h, lambdas, eta, rule)?
    };
    let omega = basis.vacuum_vector();
    let mut lhs = Vec::new();
    let mut orthogonal = Vec::new();
    for (x, y) in a.iter().zip(&b) {
        let v = x.adjoint().to_matrix(basis, "A*").apply(&y.to_matrix(basis, "B").apply(&omega));
        lhs.push(v[FockBasis::VACUUM]);
        let mut rest = v.clone();
        rest[FockBasis::VACUUM] = Complex64::new(0.0, 0.0);
        orthogonal.push(rest.norm());
    }
    let psi1 = spec1.base_field().to_matrix(basis, "Psi1").apply(&omega);
    let psi2 = spec2.base_field().to_matrix(basis, "Psi2").apply(&omega);
    let rhs = TWO_PI_SQ * TWO_PI_SQ * shell_inner_product(basis, m, &psi1, &psi2, |v| f1.value_at(v).conj() * f2.value_at(v));
    let scale = TWO_PI_SQ * TWO_PI_SQ * psi1.norm() * psi2.norm();
    let residuals = lhs.iter().map(|l| (l - rhs).norm() / rhs.norm().max(1e-3 * scale)).collect();
    Ok(TwoProductReport { lambdas: lambdas.to_vec(), lhs, orthogonal, rhs, residuals })
}

/// (x, F(P/m) E₀ y) for a function F on H₊.
pub fn shell_inner_product(
    basis: &FockBasis,
    mass: f64,
    x: &DVector<Complex64>,
    y: &DVector<Complex64>,
    func: impl Fn(&crate::minkowski::HyperboloidPoint) -> Complex64,
) -> Complex64 {
    let e0 = crate::freefield::shell_projector(basis, mass, 1e-9);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..basis.dim() {
        if !e0.mask[i] {
            continue;
        }
        let p = basis.momenta[i];
        let v = crate::minkowski::HyperboloidPoint::new([p.xs[0] / mass, p.xs[1] / mass, p.xs[2] / mass]);
        acc += x[i].conj() * func(&v) * y[i];
    }
    acc
}

/// Operator-level version of a linear field (for reports).
pub fn field_matrix(field: &LinearField, basis: &FockBasis, label: &str) -> OperatorMatrix {
    field.to_matrix(basis, label)
}
