//! Decay estimates on the free instance: smeared commutator functions and
//! their spacelike decay, commutators of hyperboloid-smeared fields, the
//! four-point cluster function of Wick squares and the Araki-Hepp-Ruelle
//! envelope.
//!
//! Position-space smearings g(x) = A·T(x⁰ − t_c)·S(|x⃗ − c⃗|) with unit
//! normalized T and S have transforms
//! ĝ(p) = (2π)^{-2}·A·e^{ip·x_c}·T̃(p⁰)·S̃(|p⃗|)/S̃(0). Two-point functions
//! W_ij(a) = ⟨Ω|φ(g_i)φ(g_j)(a)Ω⟩ = (2π)⁴∫dk̃ ĝ_i(−k)ĝ_j(k)e^{ik·a} are
//! evaluated either on a momentum lattice or by radial quadrature after the
//! angular integral, 4π²∫(k²/ω)·sinc(k|b⃗|)·e^{iωb⁰}·T̃_i(−ω)T̃_j(ω)R_iR_j dk
//! with b = a + x_j − x_i.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{hyperboloid_smear_many, FieldSpec, RateFit};
use crate::error::{invalid, Result};
use crate::exec::{pairwise_sum, pairwise_sum_real, Execution};
use crate::freefield::{translation_phases, wick_square, FockBasis, LinearField, ModeGrid, TWO_PI_SQ};
use crate::minkowski::{FourVector, HyperboloidPoint, LorentzBoost};
use crate::profiles::{bump, MomentumSmearing, RadialProfile};
use crate::quadrature::{gauss_legendre, integrate_panels};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Temporal {
    /// δ(x⁰ − t_c).
    Sharp,
    /// Unit-normalized Gaussian of standard deviation `width`.
    Gaussian { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Spatial {
    Gaussian { width: f64 },
    /// exp(−1/(1 − r²/a²)) inside r < a.
    Bump { radius: f64 },
}

impl Spatial {
    fn scale(&self) -> f64 {
        match *self {
            Spatial::Gaussian { width } => width,
            Spatial::Bump { radius } => radius,
        }
    }

    /// S̃(k)/S̃(0).
    pub fn transform_ratio(&self, k: f64) -> f64 {
        match *self {
            Spatial::Gaussian { width } => (-0.5 * width * width * k * k).exp(),
            Spatial::Bump { radius } => bump_radial_moment(k * radius) / bump_radial_moment(0.0),
        }
    }

    /// Radius containing all but a 1e-8 fraction of the profile (exact for the bump).
    pub fn localization_radius(&self) -> f64 {
        match *self {
            Spatial::Gaussian { width } => width * (2.0 * 1e8f64.ln()).sqrt(),
            Spatial::Bump { radius } => radius,
        }
    }

    /// Momentum beyond which the transform is below ~1e-10 of its peak.
    pub fn momentum_cutoff(&self) -> f64 {
        match *self {
            Spatial::Gaussian { width } => (2.0 * 1e10f64.ln()).sqrt() / width,
            Spatial::Bump { radius } => 100.0 / radius,
        }
    }
}

/// ∫₀¹ τ² bump(τ) sinc(κτ) dτ.
fn bump_radial_moment(kappa: f64) -> f64 {
    let panels = 4 + 2 * (kappa.abs() / PI).ceil() as usize;
    let edges: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
    integrate_panels(&edges, 16, |t| {
        let x = kappa * t;
        let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        t * t * bump(t) * sinc
    })
}

/// Smearing with a spherically symmetric spatial transform, written as
/// ĝ(p) = e^{ip·x_c}·temporal(p⁰)·radial(|p⃗|).
pub trait SphericalSmearing: Send + Sync {
    fn center(&self) -> FourVector;
    fn temporal(&self, omega: f64) -> Complex64;
    /// Includes the (2π)^{-2} normalization and the amplitude.
    fn radial(&self, k: f64) -> f64;
    fn radial_cutoff(&self) -> f64;
    /// Identifies the radial factor so tables can be shared between
    /// smearings differing only by their center.
    fn radial_key(&self) -> String;

    fn spherical_hat(&self, p: &FourVector) -> Complex64 {
        let r = self.radial(p.spatial_norm());
        if r == 0.0 {
            return ZERO;
        }
        Complex64::from_polar(1.0, p.dot(&self.center())) * self.temporal(p.x0) * r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeBump {
    pub center: FourVector,
    pub temporal: Temporal,
    pub spatial: Spatial,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl SpacetimeBump {
    pub fn new(center: FourVector, temporal: Temporal, spatial: Spatial, amplitude: f64) -> Result<Self> {
        let b = SpacetimeBump { center, temporal, spatial, amplitude };
        b.validate()?;
        Ok(b)
    }

    pub fn sharp(center: FourVector, spatial: Spatial) -> Result<Self> {
        Self::new(center, Temporal::Sharp, spatial, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.spatial.scale();
        let t_ok = match self.temporal {
            Temporal::Sharp => true,
            Temporal::Gaussian { width } => width > 0.0 && width.is_finite(),
        };
        if !(s > 0.0 && s.is_finite() && t_ok && self.amplitude.is_finite() && self.center.is_finite()) {
            return invalid("smearing needs positive finite widths and finite center/amplitude");
        }
        Ok(())
    }

    pub fn translated(&self, a: &FourVector) -> Self {
        SpacetimeBump { center: self.center + *a, ..*self }
    }

    /// Spatial radius outside of which the operator is localized (in time
    /// the support is sharp or Gaussian).
    pub fn localization_radius(&self) -> f64 {
        self.spatial.localization_radius()
    }
}

impl SphericalSmearing for SpacetimeBump {
    fn center(&self) -> FourVector {
        self.center
    }

    fn temporal(&self, omega: f64) -> Complex64 {
        match self.temporal {
            Temporal::Sharp => Complex64::new(1.0, 0.0),
            Temporal::Gaussian { width } => Complex64::new((-0.5 * width * width * omega * omega).exp(), 0.0),
        }
    }

    fn radial(&self, k: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude / TWO_PI_SQ * self.spatial.transform_ratio(k)
    }

    fn radial_cutoff(&self) -> f64 {
        self.spatial.momentum_cutoff()
    }

    fn radial_key(&self) -> String {
        format!("{:?}/{:e}", self.spatial, self.amplitude)
    }
}

impl MomentumSmearing for SpacetimeBump {
    fn hat(&self, p: &FourVector) -> Complex64 {
        self.spherical_hat(p)
    }
}

/// g*φ for two smearings: transform (2π)²ĝφ̂.
#[derive(Clone)]
pub struct Convolved {
    pub first: Arc<dyn SphericalSmearing>,
    pub second: Arc<dyn SphericalSmearing>,
}

impl SphericalSmearing for Convolved {
    fn center(&self) -> FourVector {
        self.first.center() + self.second.center()
    }

    fn temporal(&self, omega: f64) -> Complex64 {
        self.first.temporal(omega) * self.second.temporal(omega)
    }

    fn radial(&self, k: f64) -> f64 {
        TWO_PI_SQ * self.first.radial(k) * self.second.radial(k)
    }

    fn radial_cutoff(&self) -> f64 {
        self.first.radial_cutoff().min(self.second.radial_cutoff())
    }

    fn radial_key(&self) -> String {
        format!("({})*({})", self.first.radial_key(), self.second.radial_key())
    }
}

impl MomentumSmearing for Convolved {
    fn hat(&self, p: &FourVector) -> Complex64 {
        self.spherical_hat(p)
    }
}

/// Radial rule on the mass shell: uniform panels short enough that the
/// oscillation over one panel stays below π for |b⃗| + |b⁰| ≤ `reach`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumShell {
    pub mass: f64,
    pub k_max: f64,
    pub reach: f64,
    nodes: Vec<(f64, f64)>,
}

impl ContinuumShell {
    pub fn new(mass: f64, k_max: f64, reach: f64, order: usize) -> Result<Self> {
        if !(mass > 0.0 && k_max > 0.0 && reach >= 0.0 && k_max.is_finite() && reach.is_finite()) {
            return invalid("continuum shell needs m > 0, k_max > 0, reach ≥ 0");
        }
        let panels = ((k_max * (reach + 1.0) / PI).ceil() as usize).max(32);
        let rule = gauss_legendre(order.clamp(2, 64));
        let mut nodes = Vec::with_capacity(panels * rule.order());
        for i in 0..panels {
            let a = k_max * i as f64 / panels as f64;
            let b = k_max * (i + 1) as f64 / panels as f64;
            nodes.extend(rule.mapped(a, b));
        }
        Ok(ContinuumShell { mass, k_max, reach, nodes })
    }

    /// Rule covering the radial cutoffs of all `smearings`.
    pub fn for_smearings(mass: f64, smearings: &[&dyn SphericalSmearing], reach: f64) -> Result<Self> {
        let k_max = smearings.iter().map(|g| g.radial_cutoff()).fold(0.0, f64::max);
        Self::new(mass, k_max, reach, 12)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShellMeasure {
    Lattice(ModeGrid),
    Continuum(ContinuumShell),
}

/// A smearing evaluated at the nodes of a [`ShellMeasure`].
#[derive(Debug, Clone)]
pub enum PreparedSmearing {
    /// (ĝ(p_k), ĝ(−p_k)) per lattice mode.
    Lattice(Vec<(Complex64, Complex64)>),
    Continuum {
        center: FourVector,
        /// (T̃(ω), T̃(−ω)) per node.
        temporal: Vec<(Complex64, Complex64)>,
        radial: Arc<Vec<f64>>,
    },
}

impl ShellMeasure {
    pub fn mass(&self) -> f64 {
        match self {
            ShellMeasure::Lattice(g) => g.mass,
            ShellMeasure::Continuum(c) => c.mass,
        }
    }

    /// Lattice evaluation of an arbitrary momentum smearing.
    pub fn prepare_momentum(&self, chi: &dyn MomentumSmearing) -> Result<PreparedSmearing> {
        match self {
            ShellMeasure::Lattice(grid) => Ok(PreparedSmearing::Lattice(
                Execution::current().map(&grid.modes, |m| (chi.hat(&m.momentum()), chi.hat(&-m.momentum()))),
            )),
            ShellMeasure::Continuum(_) => invalid("continuum quadrature needs a spherically symmetric smearing"),
        }
    }

    pub fn prepare(&self, g: &dyn SphericalSmearing) -> Result<PreparedSmearing> {
        Ok(self.prepare_all(&[g])?.remove(0))
    }

    /// Prepares several smearings, sharing radial tables by key.
    pub fn prepare_all(&self, gs: &[&dyn SphericalSmearing]) -> Result<Vec<PreparedSmearing>> {
        match self {
            ShellMeasure::Lattice(grid) => Ok(gs
                .iter()
                .map(|g| {
                    PreparedSmearing::Lattice(grid.modes.iter().map(|m| (g.spherical_hat(&m.momentum()), g.spherical_hat(&-m.momentum()))).collect())
                })
                .collect()),
            ShellMeasure::Continuum(shell) => {
                let mut tables: HashMap<String, Arc<Vec<f64>>> = HashMap::new();
                let mut out = Vec::with_capacity(gs.len());
                for g in gs {
                    let key = g.radial_key();
                    let radial = match tables.get(&key) {
                        Some(t) => t.clone(),
                        None => {
                            let t = Arc::new(Execution::current().map(&shell.nodes, |&(k, _)| g.radial(k)));
                            tables.insert(key, t.clone());
                            t
                        }
                    };
                    let m = shell.mass;
                    let temporal = shell
                        .nodes
                        .iter()
                        .map(|&(k, _)| {
                            let w = (k * k + m * m).sqrt();
                            (g.temporal(w), g.temporal(-w))
                        })
                        .collect();
                    out.push(PreparedSmearing::Continuum { center: g.center(), temporal, radial });
                }
                Ok(out)
            }
        }
    }

    /// W_ij(a) = ⟨Ω|φ(g_i) φ(g_j)(a) Ω⟩.
    pub fn two_point(&self, gi: &PreparedSmearing, gj: &PreparedSmearing, a: &FourVector) -> Result<Complex64> {
        match (self, gi, gj) {
            (ShellMeasure::Lattice(grid), PreparedSmearing::Lattice(hi), PreparedSmearing::Lattice(hj)) => {
                let terms: Vec<Complex64> = grid
                    .modes
                    .iter()
                    .zip(hi.iter().zip(hj))
                    .map(|(m, (ci, cj))| {
                        let p = m.momentum();
                        TWO_PI_SQ * TWO_PI_SQ * m.weight * ci.1 * cj.0 * Complex64::from_polar(1.0, p.dot(a))
                    })
                    .collect();
                Ok(pairwise_sum(&terms))
            }
            (
                ShellMeasure::Continuum(shell),
                PreparedSmearing::Continuum { center: xi, temporal: ti, radial: ri },
                PreparedSmearing::Continuum { center: xj, temporal: tj, radial: rj },
            ) => {
                let b = *a + *xj - *xi;
                let bs = b.spatial_norm();
                if bs + b.x0.abs() > shell.reach * (1.0 + 1e-12) {
                    return invalid(format!("offset {:?} outside the quadrature reach {}", b, shell.reach));
                }
                let m = shell.mass;
                let terms: Vec<Complex64> = shell
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(n, &(k, w))| {
                        let r = ri[n] * rj[n];
                        if r == 0.0 {
                            return ZERO;
                        }
                        let omega = (k * k + m * m).sqrt();
                        let x = k * bs;
                        let sinc = if x < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                        Complex64::from_polar(w * k * k / omega * sinc * r, omega * b.x0) * ti[n].1 * tj[n].0
                    })
                    .collect();
                Ok(4.0 * PI * PI * pairwise_sum(&terms))
            }
            _ => invalid("smearings were prepared for a different measure"),
        }
    }

    /// C_ij(a) = ⟨Ω|[φ(g_i), φ(g_j)(a)]Ω⟩ = W_ij(a) − W_ji(−a).
    pub fn commutator(&self, gi: &PreparedSmearing, gj: &PreparedSmearing, a: &FourVector) -> Result<Complex64> {
        Ok(self.two_point(gi, gj, a)? - self.two_point(gj, gi, &-*a)?)
    }

    /// (2π)⁴∫dk̃ ωⁿ|ĝ(±k)|², i.e. Σ ωⁿ|c_k|² for the creation (`+`) or
    /// annihilation (`−`) coefficients.
    pub fn moment(&self, g: &PreparedSmearing, n: i32, negative: bool) -> Result<f64> {
        match (self, g) {
            (ShellMeasure::Lattice(grid), PreparedSmearing::Lattice(h)) => {
                let terms: Vec<f64> = grid
                    .modes
                    .iter()
                    .zip(h)
                    .map(|(m, c)| {
                        let v = if negative { c.1 } else { c.0 };
                        TWO_PI_SQ * TWO_PI_SQ * m.weight * m.omega.powi(n) * v.norm_sqr()
                    })
                    .collect();
                Ok(pairwise_sum_real(&terms))
            }
            (ShellMeasure::Continuum(shell), PreparedSmearing::Continuum { temporal, radial, .. }) => {
                let m = shell.mass;
                let terms: Vec<f64> = shell
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(i, &(k, w))| {
                        let omega = (k * k + m * m).sqrt();
                        let t = if negative { temporal[i].1 } else { temporal[i].0 };
                        w * k * k * omega.powi(n - 1) * t.norm_sqr() * radial[i] * radial[i]
                    })
                    .collect();
                Ok(4.0 * PI * PI * pairwise_sum_real(&terms))
            }
            _ => invalid("smearing was prepared for a different measure"),
        }
    }
}

/// ⟨Ω|[φ(χ₁), φ(χ₂)(a)]Ω⟩ by direct shell quadrature.
pub fn pauli_jordan_smeared(g1: &dyn SphericalSmearing, g2: &dyn SphericalSmearing, a: &FourVector, measure: &ShellMeasure) -> Result<Complex64> {
    let p = measure.prepare_all(&[g1, g2])?;
    measure.commutator(&p[0], &p[1], a)
}

/// Same for arbitrary momentum smearings on a lattice.
pub fn pauli_jordan_lattice(grid: &ModeGrid, chi1: &dyn MomentumSmearing, chi2: &dyn MomentumSmearing, a: &FourVector) -> Result<Complex64> {
    let measure = ShellMeasure::Lattice(grid.clone());
    let p1 = measure.prepare_momentum(chi1)?;
    let p2 = measure.prepare_momentum(chi2)?;
    measure.commutator(&p1, &p2, a)
}

/// Scan of commutator values against the template c/(r + |a⃗| − |a⁰|)^κ.
#[derive(Debug, Clone, Serialize)]
pub struct DecayScanResult {
    pub offsets: Vec<FourVector>,
    /// |a⃗| − |a⁰| per offset.
    pub separations: Vec<f64>,
    pub values: Vec<f64>,
    pub kappa: f64,
    pub r: f64,
    /// Smallest c for which the template dominates every value.
    pub c: f64,
    pub template: Vec<f64>,
    /// template − value (non-negative where dominated).
    pub residuals: Vec<f64>,
    /// value·(r+s)^κ/c at the largest separation: below 1 when the data
    /// decays faster than the template at the far end of the scan.
    pub saturation: f64,
    pub satisfied: bool,
}

pub fn spacelike_separation(a: &FourVector) -> f64 {
    a.spatial_norm() - a.x0.abs()
}

/// Dominance of the decay template over scanned values. Offsets must be
/// spacelike and span at least 1.5 decades of |a⃗| − |a⁰|.
pub fn fit_decay_template(offsets: &[FourVector], values: &[f64], kappa: f64, r: f64) -> Result<DecayScanResult> {
    if offsets.len() != values.len() || offsets.is_empty() {
        return invalid("scan needs one value per offset");
    }
    if !(kappa > 0.0 && r > 0.0) {
        return invalid("template needs κ > 0 and r > 0");
    }
    let separations: Vec<f64> = offsets.iter().map(spacelike_separation).collect();
    if let Some(i) = separations.iter().position(|s| *s < 0.0) {
        return invalid(format!("offset {:?} is timelike", offsets[i]));
    }
    let positive: Vec<f64> = separations.iter().copied().filter(|s| *s > 0.0).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    if !(hi / lo >= 10f64.powf(1.5) * (1.0 - 1e-12)) {
        return invalid("scan must span at least 1.5 decades of spacelike separation");
    }
    let scaled: Vec<f64> = values.iter().zip(&separations).map(|(v, s)| v * (r + s).powf(kappa)).collect();
    let c = scaled.iter().copied().fold(0.0, f64::max);
    let finite = values.iter().all(|v| v.is_finite() && *v >= 0.0);
    let far = (0..separations.len()).fold(0, |best, i| if separations[i] > separations[best] { i } else { best });
    let saturation = if c > 0.0 { scaled[far] / c } else { 0.0 };
    let template: Vec<f64> = separations.iter().map(|s| c / (r + s).powf(kappa)).collect();
    let residuals = template.iter().zip(values).map(|(t, v)| t - v).collect();
    Ok(DecayScanResult {
        offsets: offsets.to_vec(),
        separations,
        values: values.to_vec(),
        kappa,
        r,
        c,
        template,
        residuals,
        saturation,
        satisfied: finite && c.is_finite() && saturation < 1.0,
    })
}

/// |C₁₂(a)| on the offsets, then the template fit.
pub fn commutator_decay_scan(
    measure: &ShellMeasure,
    g1: &dyn SphericalSmearing,
    g2: &dyn SphericalSmearing,
    offsets: &[FourVector],
    kappa: f64,
    r: f64,
) -> Result<DecayScanResult> {
    let p = measure.prepare_all(&[g1, g2])?;
    let values: Vec<f64> =
        Execution::current().map(offsets, |a| measure.commutator(&p[0], &p[1], a).map(|c| c.norm())).into_iter().collect::<Result<_>>()?;
    fit_decay_template(offsets, &values, kappa, r)
}

/// The scan seen from a boosted frame: the data at frame offsets a are
/// the original commutator at Λ⁻¹a.
pub fn boosted_decay_scan(
    measure: &ShellMeasure,
    g1: &dyn SphericalSmearing,
    g2: &dyn SphericalSmearing,
    offsets: &[FourVector],
    boost: &LorentzBoost,
    kappa: f64,
    r: f64,
) -> Result<DecayScanResult> {
    let inv = boost.inverse();
    let p = measure.prepare_all(&[g1, g2])?;
    let values: Vec<f64> = Execution::current()
        .map(offsets, |a| measure.commutator(&p[0], &p[1], &inv.apply(a)).map(|c| c.norm()))
        .into_iter()
        .collect::<Result<_>>()?;
    fit_decay_template(offsets, &values, kappa, r)
}

#[derive(Debug, Clone, Serialize)]
pub struct PreservationReport {
    pub base: DecayScanResult,
    pub smeared: DecayScanResult,
    /// c(smeared)/c(base).
    pub c_ratio: f64,
}

/// Re-runs the template fit after convolving both smearings with `extra`.
pub fn smearing_preservation_check(
    measure: &ShellMeasure,
    g1: Arc<dyn SphericalSmearing>,
    g2: Arc<dyn SphericalSmearing>,
    extra: Arc<dyn SphericalSmearing>,
    offsets: &[FourVector],
    kappa: f64,
    r: f64,
) -> Result<PreservationReport> {
    let base = commutator_decay_scan(measure, g1.as_ref(), g2.as_ref(), offsets, kappa, r)?;
    let s1 = Convolved { first: g1, second: extra.clone() };
    let s2 = Convolved { first: g2, second: extra };
    let smeared = commutator_decay_scan(measure, &s1, &s2, offsets, kappa, r)?;
    let c_ratio = if base.c > 0.0 { smeared.c / base.c } else { f64::NAN };
    Ok(PreservationReport { base, smeared, c_ratio })
}

/// Support gap of two profiles, γ₁₂ with cosh γ₁₂ = inf v₁·v₂.
pub fn support_gap(f1: &dyn RadialProfile, f2: &dyn RadialProfile) -> f64 {
    f1.center().distance(&f2.center()) - f1.support_radius() - f2.support_radius()
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioScan {
    pub ratio: f64,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fit of the norm against λ₁λ₂.
    pub rate: RateFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperboloidScan {
    pub gap: f64,
    pub gamma: f64,
    pub rows: Vec<RatioScan>,
}

impl HyperboloidScan {
    pub fn worst_slope(&self) -> f64 {
        self.rows.iter().map(|r| r.rate.slope).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// |[Ψ[λ₁,f₁], Ψ[λ₂,f₂]]| (a c-number on the free field) for disjoint
/// profiles, with λ₁/λ₂ taking `n_ratios` values spread over [e^{−γ}, e^{γ}].
pub fn hyperboloid_commutator_scan(
    spec: &FieldSpec,
    f1: &dyn RadialProfile,
    f2: &dyn RadialProfile,
    lambdas: &[f64],
    gamma: f64,
    n_ratios: usize,
) -> Result<HyperboloidScan> {
    let gap = support_gap(f1, f2);
    if !(gap > 0.0) {
        return invalid("profiles must have disjoint supports");
    }
    if !(gamma >= 0.0 && gamma < gap) {
        return invalid(format!("ratio range γ = {gamma} must lie in [0, γ₁₂ = {gap})"));
    }
    if n_ratios == 0 || lambdas.len() < 2 {
        return invalid("scan needs at least one ratio and two λ values");
    }
    let ratios: Vec<f64> = if n_ratios == 1 {
        vec![1.0]
    } else {
        (0..n_ratios).map(|j| (gamma * (2.0 * j as f64 / (n_ratios - 1) as f64 - 1.0)).exp()).collect()
    };
    let unit = |_: &FourVector| Complex64::new(1.0, 0.0);
    let lambda1: Vec<f64> = ratios.iter().flat_map(|r| lambdas.iter().map(move |l| r * l)).collect();
    let psi1 = hyperboloid_smear_many(spec, &unit, f1, &lambda1)?;
    let psi2 = hyperboloid_smear_many(spec, &unit, f2, lambdas)?;
    let mut rows = Vec::new();
    for (j, &ratio) in ratios.iter().enumerate() {
        let l1: Vec<f64> = lambdas.iter().map(|l| ratio * l).collect();
        let norms: Vec<f64> = (0..lambdas.len()).map(|i| psi1[j * lambdas.len() + i].commutator(&psi2[i]).norm()).collect();
        let products: Vec<f64> = l1.iter().zip(lambdas).map(|(a, b)| a * b).collect();
        let rate = RateFit::fit(&products, &norms)?;
        rows.push(RatioScan { ratio, lambda1: l1, lambda2: lambdas.to_vec(), norms, rate });
    }
    Ok(HyperboloidScan { gap, gamma, rows })
}

/// ∫|f₁f₂|(v⁰)³dμ(v) over supp f₁, in geodesic polar coordinates around
/// the center of f₁.
pub fn overlap_weight(f1: &dyn RadialProfile, f2: &dyn RadialProfile) -> f64 {
    let to_center = LorentzBoost::to_point(&f1.center());
    let radius = f1.support_radius();
    let t_rule = gauss_legendre(16);
    let th_rule = gauss_legendre(32);
    let n_phi = 48;
    let t_panels = 8;
    let mut total = 0.0;
    for p in 0..t_panels {
        let a = radius * p as f64 / t_panels as f64;
        let b = radius * (p + 1) as f64 / t_panels as f64;
        for (t, wt) in t_rule.mapped(a, b) {
            let ft = f1.radial_value(t);
            if ft == ZERO {
                continue;
            }
            for (th, wth) in th_rule.mapped(0.0, PI) {
                for j in 0..n_phi {
                    let ph = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                    let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                    let u = HyperboloidPoint::new([t.sinh() * n[0], t.sinh() * n[1], t.sinh() * n[2]]);
                    let v = to_center.apply_point(&u);
                    let val = (ft * f2.value_at(&v)).norm() * v.v0().powi(3);
                    total += wt * wth * (2.0 * PI / n_phi as f64) * t.sinh().powi(2) * th.sin() * val;
                }
            }
        }
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagonalReport {
    pub lambdas: Vec<f64>,
    /// ∫|f₁f₂|(v⁰)³dμ per pair.
    pub weights: Vec<f64>,
    /// |[Ψ[λ,f₁], Ψ[λ,f₂]]| per pair and λ.
    pub norms: Vec<Vec<f64>>,
    /// max norm/weight over all pairs and every λ but the last.
    pub constant: f64,
    /// norm/(constant·weight) at the last λ per pair.
    pub final_ratios: Vec<f64>,
    pub satisfied: bool,
}

/// Equal-λ commutators for overlapping profile pairs, bounded at the
/// largest λ by one constant times ∫|f₁f₂|(v⁰)³dμ calibrated on the
/// smaller λ values.
pub fn diagonal_commutator_check(spec: &FieldSpec, pairs: &[(&dyn RadialProfile, &dyn RadialProfile)], lambdas: &[f64]) -> Result<DiagonalReport> {
    if lambdas.len() < 2 || pairs.is_empty() {
        return invalid("diagonal check needs two λ values and at least one pair");
    }
    let unit = |_: &FourVector| Complex64::new(1.0, 0.0);
    let mut weights = Vec::new();
    let mut norms = Vec::new();
    for (f1, f2) in pairs {
        let w = overlap_weight(*f1, *f2);
        if !(w > 0.0) {
            return invalid("diagonal check needs overlapping profiles");
        }
        weights.push(w);
        let a = hyperboloid_smear_many(spec, &unit, *f1, lambdas)?;
        let b = hyperboloid_smear_many(spec, &unit, *f2, lambdas)?;
        norms.push(a.iter().zip(&b).map(|(x, y)| x.commutator(y).norm()).collect::<Vec<f64>>());
    }
    let last = lambdas.len() - 1;
    let constant = norms.iter().zip(&weights).flat_map(|(n, w)| n[..last].iter().map(move |v| v / w)).fold(0.0, f64::max);
    let final_ratios: Vec<f64> = norms.iter().zip(&weights).map(|(n, w)| n[last] / (constant * w)).collect();
    let satisfied = constant.is_finite() && final_ratios.iter().all(|r| *r <= 1.0);
    Ok(DiagonalReport { lambdas: lambdas.to_vec(), weights, norms, constant, final_ratios, satisfied })
}

/// Localized operator built from φ(g).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalOperator {
    Elementary,
    WickSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterPoint {
    pub y1: FourVector,
    pub y2: FourVector,
    pub y: FourVector,
    pub d: f64,
    pub value: Complex64,
}

fn euclidean_norm(a: &FourVector) -> f64 {
    (a.x0 * a.x0 + a.xs.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// |y₁|, |y₂| ≤ d and |y⃗| ≥ |y⁰| + c₁d.
pub fn in_cluster_region(y1: &FourVector, y2: &FourVector, y: &FourVector, d: f64, c1: f64) -> bool {
    euclidean_norm(y1) <= d && euclidean_norm(y2) <= d && y.spatial_norm() >= y.x0.abs() + c1 * d
}

fn cluster_positions(y1: &FourVector, y2: &FourVector, y: &FourVector) -> [FourVector; 4] {
    [0.5 * *y1, -0.5 * *y1, 0.5 * *y2 - *y, -0.5 * *y2 - *y]
}

/// K(y₁, y₂, y) = (Ω, B₁₂(y₁) E_Ω⊥ U(−y) B₃₄(y₂) Ω) for Wick squares
/// Ψ_i = :φ(g_i)²: by Wick contraction:
/// 16·C₁₂·C₃₄·[W₁₃W₂₄ + W₁₄W₂₃] at the positions x₁ = y₁/2, x₂ = −y₁/2,
/// x₃ = y₂/2 − y, x₄ = −y₂/2 − y.
pub fn cluster_function_k(measure: &ShellMeasure, g: &[PreparedSmearing; 4], y1: &FourVector, y2: &FourVector, y: &FourVector) -> Result<Complex64> {
    let x = cluster_positions(y1, y2, y);
    let c12 = measure.commutator(&g[0], &g[1], &(x[1] - x[0]))?;
    let c34 = measure.commutator(&g[2], &g[3], &(x[3] - x[2]))?;
    if c12 == ZERO || c34 == ZERO {
        return Ok(ZERO);
    }
    let w = |i: usize, j: usize| measure.two_point(&g[i], &g[j], &(x[j] - x[i]));
    Ok(16.0 * c12 * c34 * (w(0, 2)? * w(1, 3)? + w(0, 3)? * w(1, 2)?))
}

/// The same correlator by matrix products on a truncated Fock space. For
/// Wick squares the vacuum component is exact once n_max ≥ 4.
#[allow(clippy::too_many_arguments)]
pub fn cluster_function_k_fock(
    grid: &ModeGrid,
    basis: &FockBasis,
    chis: [&dyn MomentumSmearing; 4],
    kind: LocalOperator,
    y1: &FourVector,
    y2: &FourVector,
    y: &FourVector,
) -> Result<Complex64> {
    let needed = match kind {
        LocalOperator::Elementary => 2,
        LocalOperator::WickSquare => 4,
    };
    if basis.n_max < needed {
        return invalid(format!("cluster function needs n_max ≥ {needed}"));
    }
    // Unlike the closed form, B₃₄ sits at ±y₂/2 and is moved by U(−y).
    let x = [0.5 * *y1, -0.5 * *y1, 0.5 * *y2, -0.5 * *y2];
    let ops: Vec<_> = (0..4)
        .map(|i| {
            let f = LinearField::from_smearing(grid, chis[i]).translated(grid, &x[i]);
            match kind {
                LocalOperator::Elementary => f.to_matrix(basis, "phi"),
                LocalOperator::WickSquare => wick_square(&f, basis),
            }
        })
        .collect();
    let b12 = ops[0].commutator(&ops[1]);
    let b34 = ops[2].commutator(&ops[3]);
    let mut v = b34.apply(&basis.vacuum_vector());
    v[FockBasis::VACUUM] = ZERO;
    let phases = translation_phases(basis, &-*y);
    for (vi, p) in v.iter_mut().zip(&phases) {
        *vi *= p;
    }
    Ok(b12.apply(&v)[FockBasis::VACUUM])
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterScan {
    pub points: Vec<ClusterPoint>,
    pub c1: f64,
    /// Exponents of the template c₂d^M/(|y⃗| − |y⁰|)^ε.
    pub m_exponent: i32,
    pub epsilon: f64,
    pub c2: f64,
    pub template: Vec<f64>,
    /// |K|(s)^ε/(c₂d^M) at the point of largest separation.
    pub saturation: f64,
    pub satisfied: bool,
}

/// Smallest c₂ with |K| ≤ c₂d³/(|y⃗| − |y⁰|)² on the points (all of which
/// must lie in the hypothesis region for their d).
pub fn cluster_template_fit(points: &[ClusterPoint], c1: f64) -> Result<ClusterScan> {
    if points.is_empty() {
        return invalid("no cluster points");
    }
    for p in points {
        if !in_cluster_region(&p.y1, &p.y2, &p.y, p.d, c1) {
            return invalid(format!("point y = {:?} lies outside the hypothesis region for d = {}", p.y, p.d));
        }
    }
    let (m_exponent, epsilon) = (3, 2.0);
    let scaled: Vec<f64> = points.iter().map(|p| p.value.norm() * spacelike_separation(&p.y).powf(epsilon) / p.d.powi(m_exponent)).collect();
    let c2 = scaled.iter().copied().fold(0.0, f64::max);
    let far = (0..points.len()).fold(0, |best, i| if spacelike_separation(&points[i].y) > spacelike_separation(&points[best].y) { i } else { best });
    let saturation = if c2 > 0.0 { scaled[far] / c2 } else { 0.0 };
    let template = points.iter().map(|p| c2 * p.d.powi(m_exponent) / spacelike_separation(&p.y).powf(epsilon)).collect();
    let finite = points.iter().all(|p| p.value.norm().is_finite());
    Ok(ClusterScan { points: points.to_vec(), c1, m_exponent, epsilon, c2, template, saturation, satisfied: finite && c2.is_finite() && saturation < 1.0 })
}

/// φ(g)-based operator for the Araki-Hepp-Ruelle check: the Wick square,
/// or only its two-annihilator part.
#[derive(Clone)]
pub struct QuadraticSpec {
    pub smearing: Arc<dyn SphericalSmearing>,
    pub annihilator_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AhrPoint {
    pub y: FourVector,
    pub separation: f64,
    pub value: f64,
    /// r³C/(|y⃗| − |y⁰|)².
    pub envelope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AhrReport {
    pub r: f64,
    /// ‖B₁Ω‖‖B₂*Ω‖ + ‖B₂Ω‖‖B₁*Ω‖.
    pub c0: f64,
    /// ‖∂₀B₁Ω‖‖B₂*Ω‖ + ‖∂₀B₂Ω‖‖B₁*Ω‖.
    pub c1: f64,
    /// C = C₁ + C₀/2r.
    pub c: f64,
    /// max value/envelope.
    pub constant: f64,
    pub points: Vec<AhrPoint>,
    pub skipped: Vec<(FourVector, String)>,
    /// (s, value(2s)/value(s)) for pairs on a common ray.
    pub doubling_ratios: Vec<(f64, f64)>,
    pub quartering_holds: bool,
}

struct QuadraticNorms {
    vacuum: f64,
    adjoint: f64,
    time_derivative: f64,
}

fn quadratic_norms(measure: &ShellMeasure, g: &PreparedSmearing, annihilator_only: bool) -> Result<QuadraticNorms> {
    // ‖C²Ω‖² = 2(Σ|c|²)², ‖∂₀(C²)Ω‖² = 4(S₂S₀ + S₁²) with S_n = Σωⁿ|c|².
    let s = [measure.moment(g, 0, false)?, measure.moment(g, 1, false)?, measure.moment(g, 2, false)?];
    let adjoint = 2f64.sqrt() * measure.moment(g, 0, true)?;
    if annihilator_only {
        return Ok(QuadraticNorms { vacuum: 0.0, adjoint, time_derivative: 0.0 });
    }
    Ok(QuadraticNorms { vacuum: 2f64.sqrt() * s[0], adjoint, time_derivative: 2.0 * (s[2] * s[0] + s[1] * s[1]).sqrt() })
}

/// |(Ω, B₁ E_Ω⊥ U(y) B₂ Ω)| = 2|W₁₂(y)|² for Wick squares (zero when B₂
/// annihilates the vacuum) against r³C/(|y⃗| − |y⁰|)². Points with
/// |y⃗| < |y⁰| + 2r are skipped.
pub fn ahr_bound_check(measure: &ShellMeasure, b1: &QuadraticSpec, b2: &QuadraticSpec, ys: &[FourVector], r: f64) -> Result<AhrReport> {
    if !(r > 0.0) {
        return invalid("localization radius must be positive");
    }
    let g = measure.prepare_all(&[b1.smearing.as_ref(), b2.smearing.as_ref()])?;
    let n1 = quadratic_norms(measure, &g[0], b1.annihilator_only)?;
    let n2 = quadratic_norms(measure, &g[1], b2.annihilator_only)?;
    let c0 = n1.vacuum * n2.adjoint + n2.vacuum * n1.adjoint;
    let c1 = n1.time_derivative * n2.adjoint + n2.time_derivative * n1.adjoint;
    let c = c1 + c0 / (2.0 * r);
    let mut skipped = Vec::new();
    let mut admissible = Vec::new();
    for y in ys {
        if y.spatial_norm() >= y.x0.abs() + 2.0 * r {
            admissible.push(*y);
        } else {
            skipped.push((*y, "violates |y⃗| ≥ |y⁰| + 2r".to_string()));
        }
    }
    let values: Vec<f64> = Execution::current()
        .map(&admissible, |y| -> Result<f64> {
            if b2.annihilator_only {
                return Ok(0.0);
            }
            let w = measure.two_point(&g[0], &g[1], y)?;
            Ok(2.0 * w.norm_sqr())
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let points: Vec<AhrPoint> = admissible
        .iter()
        .zip(&values)
        .map(|(y, v)| {
            let s = spacelike_separation(y);
            AhrPoint { y: *y, separation: s, value: *v, envelope: r.powi(3) * c / (s * s) }
        })
        .collect();
    let constant = points.iter().map(|p| if p.envelope > 0.0 { p.value / p.envelope } else { 0.0 }).fold(0.0, f64::max);
    let floor = 1e-15 * c0.max(f64::MIN_POSITIVE);
    let mut doubling_ratios = Vec::new();
    let mut quartering_holds = true;
    for p in &points {
        for q in &points {
            if (q.y.x0 - p.y.x0).abs() > 1e-12 || p.separation <= 0.0 {
                continue;
            }
            let same_ray = {
                let (a, b) = (p.y.spatial_norm(), q.y.spatial_norm());
                (0..3).all(|i| (p.y.xs[i] / a - q.y.xs[i] / b).abs() < 1e-9)
            };
            if same_ray && (q.separation / p.separation - 2.0).abs() < 1e-9 {
                let ratio = if p.value > 0.0 { q.value / p.value } else { 0.0 };
                doubling_ratios.push((p.separation, ratio));
                if q.value > 0.25 * p.value && q.value > floor {
                    quartering_holds = false;
                }
            }
        }
    }
    Ok(AhrReport { r, c0, c1, c, constant, points, skipped, doubling_ratios, quartering_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freefield::build_field_operator;

    fn gauss(center: FourVector, width: f64) -> SpacetimeBump {
        SpacetimeBump::sharp(center, Spatial::Gaussian { width }).unwrap()
    }

    #[test]
    fn bump_transform_is_normalized_and_decays() {
        let s = Spatial::Bump { radius: 1.0 };
        assert!((s.transform_ratio(0.0) - 1.0).abs() < 1e-15);
        assert!(s.transform_ratio(100.0).abs() < 1e-6);
        // 4π∫r² bump sinc at k → 0 against the direct integral.
        let direct = integrate_panels(&[0.0, 0.25, 0.5, 0.75, 1.0], 32, |t| t * t * bump(t));
        assert!((bump_radial_moment(0.0) - direct).abs() < 1e-10, "{}", bump_radial_moment(0.0) - direct);
    }

    #[test]
    fn continuum_matches_fine_lattice_for_gaussians() {
        let g1 = gauss(FourVector::ZERO, 0.8);
        let g2 = gauss(FourVector::new(0.0, 0.3, 0.0, 0.0), 0.8);
        let a = FourVector::new(0.4, 0.5, 0.2, 0.0);
        let shell = ContinuumShell::for_smearings(1.0, &[&g1, &g2], 5.0).unwrap();
        let cont = pauli_jordan_smeared(&g1, &g2, &a, &ShellMeasure::Continuum(shell)).unwrap();
        let grid = ModeGrid::new(1.0, 0.15, 9.0).unwrap();
        let lat = pauli_jordan_smeared(&g1, &g2, &a, &ShellMeasure::Lattice(grid)).unwrap();
        assert!((cont - lat).norm() < 1e-6 * cont.norm().max(1e-3), "{cont} vs {lat}");
    }

    #[test]
    fn lattice_commutator_matches_fock_matrix() {
        let grid = ModeGrid::new(1.0, 0.5, 1.0).unwrap();
        let basis = FockBasis::new(&grid, 2, 5000).unwrap();
        let g1 = gauss(FourVector::ZERO, 0.7);
        let g2 = gauss(FourVector::new(0.2, 0.1, 0.0, 0.3), 0.5);
        let a = FourVector::new(0.3, 0.2, -0.4, 0.1);
        let value = pauli_jordan_lattice(&grid, &g1, &g2, &a).unwrap();
        let a1 = build_field_operator(&grid, &basis, &g1);
        let a2 = build_field_operator(&grid, &basis, &g2.translated(&a));
        let m = a1.commutator(&a2);
        assert!((m.entry(0, 0) - value).norm() < 1e-12);
    }

    #[test]
    fn commutator_is_antisymmetric_and_local() {
        let g1 = SpacetimeBump::sharp(FourVector::ZERO, Spatial::Bump { radius: 0.5 }).unwrap();
        let g2 = SpacetimeBump::sharp(FourVector::ZERO, Spatial::Bump { radius: 0.5 }).unwrap();
        let shell = ContinuumShell::for_smearings(1.0, &[&g1, &g2], 4.0).unwrap();
        let m = ShellMeasure::Continuum(shell);
        let p = m.prepare_all(&[&g1, &g2]).unwrap();
        let a = FourVector::new(0.2, 0.4, 0.0, 0.0);
        let c12 = m.commutator(&p[0], &p[1], &a).unwrap();
        let c21 = m.commutator(&p[1], &p[0], &-a).unwrap();
        assert!((c12 + c21).norm() < 1e-12 * c12.norm().max(1.0));
        let c0 = m.commutator(&p[0], &p[0], &FourVector::ZERO).unwrap();
        assert!(c0.re.abs() < 1e-13 * c0.norm().max(1e-3));
        let far = m.commutator(&p[0], &p[1], &FourVector::new(0.0, 1.5, 0.0, 0.0)).unwrap();
        let near = m.commutator(&p[0], &p[1], &FourVector::new(0.5, 0.3, 0.0, 0.0)).unwrap();
        assert!(far.norm() < 1e-9 * near.norm(), "{far} vs {near}");
    }

    #[test]
    fn zero_smearing_gives_zero() {
        let z = SpacetimeBump::new(FourVector::ZERO, Temporal::Sharp, Spatial::Gaussian { width: 1.0 }, 0.0).unwrap();
        let g = gauss(FourVector::ZERO, 1.0);
        let grid = ModeGrid::new(1.0, 0.5, 1.0).unwrap();
        assert_eq!(pauli_jordan_smeared(&z, &g, &FourVector::ZERO, &ShellMeasure::Lattice(grid)).unwrap(), ZERO);
    }

    #[test]
    fn timelike_offsets_are_rejected() {
        let offs = [FourVector::new(2.0, 1.0, 0.0, 0.0)];
        assert!(fit_decay_template(&offs, &[1.0], 4.0, 1.0).is_err());
    }
}
