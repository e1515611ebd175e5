//! Free massive scalar field on a cubic momentum lattice, truncated to at
//! most `n_max` particles.
//!
//! Convention: with w_k = Δk³/((2π)³ 2ω_k) the smeared field is
//!
//! ```text
//! φ(χ) = Σ_k (2π)² √w_k [ χ̂(ω_k, k⃗) a_k† + χ̂(−ω_k, −k⃗) a_k ]
//! ```
//!
//! so that ‖φ(χ)Ω‖² = (2π)⁴ Σ_k w_k |χ̂(ω_k, k⃗)|².

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::minkowski::{FourVector, HyperboloidPoint};
use crate::profiles::MomentumSmearing;

pub const TWO_PI_SQ: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
pub const DEFAULT_MAX_DIMENSION: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: [f64; 3],
    pub omega: f64,
    pub weight: f64,
}

impl Mode {
    pub fn momentum(&self) -> FourVector {
        FourVector { x0: self.omega, xs: self.k }
    }

    pub fn velocity(&self, mass: f64) -> HyperboloidPoint {
        HyperboloidPoint::new([self.k[0] / mass, self.k[1] / mass, self.k[2] / mass])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub spacing: f64,
    pub cutoff: f64,
    pub n_max: usize,
    #[serde(default = "default_max_dimension")]
    pub max_dimension: usize,
}

fn default_max_dimension() -> usize {
    DEFAULT_MAX_DIMENSION
}

/// Lattice points n·Δk with |n·Δk| ≤ K, in lexicographic order of n.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    pub mass: f64,
    pub spacing: f64,
    pub cutoff: f64,
    pub modes: Vec<Mode>,
}

impl ModeGrid {
    pub fn new(mass: f64, spacing: f64, cutoff: f64) -> Result<Self> {
        if !(mass > 0.0 && spacing > 0.0 && cutoff >= 0.0 && cutoff.is_finite()) {
            return invalid("mode grid needs m > 0, Δk > 0, K ≥ 0");
        }
        let n = (cutoff / spacing).floor() as i64;
        let cell = spacing.powi(3);
        let mut modes = Vec::new();
        for i in -n..=n {
            for j in -n..=n {
                for l in -n..=n {
                    let k = [i as f64 * spacing, j as f64 * spacing, l as f64 * spacing];
                    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                    if k2.sqrt() <= cutoff * (1.0 + 1e-12) {
                        let omega = (mass * mass + k2).sqrt();
                        let weight = cell / ((2.0 * std::f64::consts::PI).powi(3) * 2.0 * omega);
                        modes.push(Mode { k, omega, weight });
                    }
                }
            }
        }
        Ok(ModeGrid { mass, spacing, cutoff, modes })
    }

    /// Keeps only the modes accepted by `keep` (same spacing and weights).
    pub fn filtered(&self, keep: impl Fn(&Mode) -> bool) -> ModeGrid {
        ModeGrid { modes: self.modes.iter().copied().filter(|m| keep(m)).collect(), ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// Number of multisets of size ≤ n_max over `modes` symbols.
pub fn fock_dimension(modes: usize, n_max: usize) -> u128 {
    let mut total: u128 = 0;
    let mut layer: u128 = 1; // C(modes + n − 1, n)
    for n in 0..=n_max {
        if n > 0 {
            layer = layer * (modes as u128 + n as u128 - 1) / n as u128;
        }
        total += layer;
    }
    total
}

/// Occupation-number basis, ordered by particle number and then
/// lexicographically by the sorted list of occupied modes.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub n_max: usize,
    pub n_modes: usize,
    pub states: Vec<Vec<u32>>,
    pub momenta: Vec<FourVector>,
    index: HashMap<Vec<u32>, usize>,
}

impl FockBasis {
    pub fn new(grid: &ModeGrid, n_max: usize, max_dimension: usize) -> Result<Self> {
        let m = grid.len();
        let dim = fock_dimension(m, n_max);
        if dim > max_dimension as u128 {
            return Err(Error::DimensionOverflow { dim: dim.min(usize::MAX as u128) as usize, limit: max_dimension });
        }
        let mut states: Vec<Vec<u32>> = vec![vec![]];
        let mut layer: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..n_max {
            let mut next = Vec::new();
            for s in &layer {
                let start = s.last().copied().unwrap_or(0);
                for k in start..m as u32 {
                    let mut t = s.clone();
                    t.push(k);
                    next.push(t);
                }
            }
            states.extend(next.iter().cloned());
            layer = next;
        }
        let momenta = states
            .iter()
            .map(|s| s.iter().fold(FourVector::ZERO, |acc, &k| acc + grid.modes[k as usize].momentum()))
            .collect();
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockBasis { n_max, n_modes: m, states, momenta, index })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub const VACUUM: usize = 0;

    pub fn index_of(&self, state: &[u32]) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn particle_number(&self, i: usize) -> usize {
        self.states[i].len()
    }

    pub fn occupation(&self, i: usize, mode: u32) -> usize {
        self.states[i].iter().filter(|&&k| k == mode).count()
    }

    /// Index of the one-particle state of `mode`.
    pub fn one_particle(&self, mode: usize) -> usize {
        1 + mode
    }

    pub fn vacuum_vector(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        v[Self::VACUUM] = Complex64::new(1.0, 0.0);
        v
    }

    fn raised(&self, i: usize, mode: u32) -> Option<usize> {
        let s = &self.states[i];
        if s.len() >= self.n_max {
            return None;
        }
        let mut t = s.clone();
        let pos = t.partition_point(|&k| k <= mode);
        t.insert(pos, mode);
        self.index_of(&t)
    }

    fn lowered(&self, i: usize, mode: u32) -> Option<usize> {
        let s = &self.states[i];
        let pos = s.iter().position(|&k| k == mode)?;
        let mut t = s.clone();
        t.remove(pos);
        self.index_of(&t)
    }
}

/// Sparse complex matrix (compressed rows) on a Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub dim: usize,
    pub label: String,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    Commutator,
    Anticommutator,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize, label: impl Into<String>) -> Self {
        OperatorMatrix { dim, label: label.into(), row_ptr: vec![0; dim + 1], cols: vec![], vals: vec![] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); dim], "identity")
    }

    pub fn diagonal(values: &[Complex64], label: impl Into<String>) -> Self {
        let triplets = values.iter().enumerate().map(|(i, v)| (i, i, *v)).collect();
        Self::from_triplets(values.len(), label, triplets)
    }

    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(dim: usize, label: impl Into<String>, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry outside the basis");
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().expect("nonempty") += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let zero = Complex64::new(0.0, 0.0);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] != zero).collect();
        let mut out_cols = Vec::with_capacity(keep.len());
        let mut out_vals = Vec::with_capacity(keep.len());
        for &i in &keep {
            row_ptr[rows[i] + 1] += 1;
            out_cols.push(cols[i]);
            out_vals.push(vals[i]);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        OperatorMatrix { dim, label: label.into(), row_ptr, cols: out_cols, vals: out_vals }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |i| (r, self.cols[i], self.vals[i])))
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(i) => self.vals[range.start + i],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        let t = self.entries().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, format!("({})*", self.label), t)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self.entries().chain(other.entries()).collect();
        Self::from_triplets(self.dim, format!("{} + {}", self.label, other.label), t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self.entries().chain(other.entries().map(|(r, c, v)| (r, c, -v))).collect();
        Self::from_triplets(self.dim, format!("{} - {}", self.label, other.label), t)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let zero = Complex64::new(0.0, 0.0);
        let rows = Execution::current().map_range(self.dim, |r| {
            let mut acc: Vec<(usize, Complex64)> = Vec::new();
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (k, a) = (self.cols[i], self.vals[i]);
                for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                    acc.push((other.cols[j], a * other.vals[j]));
                }
            }
            acc.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, Complex64)> = Vec::new();
            for (c, v) in acc {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|e| e.1 != zero);
            merged
        });
        let mut row_ptr = vec![0; self.dim + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (r, row) in rows.into_iter().enumerate() {
            row_ptr[r + 1] = row_ptr[r] + row.len();
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
        }
        OperatorMatrix { dim: self.dim, label: format!("{}·{}", self.label, other.label), row_ptr, cols, vals }
    }

    pub fn bracket(&self, other: &Self, kind: Bracket) -> Self {
        let ab = self.mul(other);
        let ba = other.mul(self);
        match kind {
            Bracket::Commutator => ab.sub(&ba),
            Bracket::Anticommutator => ab.add(&ba),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.bracket(other, Bracket::Commutator)
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(x.len(), self.dim);
        let out = Execution::current().map_range(self.dim, |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(|i| self.vals[i] * x[self.cols[i]]).sum::<Complex64>()
        });
        DVector::from_vec(out)
    }

    /// Keeps columns with `mask[c]` (right multiplication by a projector).
    pub fn project_columns(&self, mask: &[bool]) -> Self {
        let t = self.entries().filter(|e| mask[e.1]).collect();
        Self::from_triplets(self.dim, format!("{}·E", self.label), t)
    }

    pub fn project_rows(&self, mask: &[bool]) -> Self {
        let t = self.entries().filter(|e| mask[e.0]).collect();
        Self::from_triplets(self.dim, format!("E·{}", self.label), t)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest singular value: dense SVD for small matrices, otherwise
    /// Lanczos on A*A with full reorthogonalization.
    pub fn opnorm(&self) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        if self.dim <= 300 {
            return self.to_dense().singular_values().max();
        }
        self.lanczos_norm()
    }

    fn lanczos_norm(&self) -> f64 {
        let adj = self.adjoint();
        let n = self.dim;
        let steps = n.min(90);
        let mut q = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.5 * ((i as f64) * 0.7548776662).fract(), 0.3 * ((i as f64) * 0.5698402910).fract()));
        q /= Complex64::new(q.norm(), 0.0);
        let mut basis: Vec<DVector<Complex64>> = vec![q.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut last = 0.0;
        for step in 0..steps {
            let mut w = adj.apply(&self.apply(&basis[step]));
            let a = basis[step].dotc(&w).re;
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&w);
                    w -= b * c;
                }
            }
            let bnorm = w.norm();
            let ritz = tridiagonal_max(&alpha, &beta);
            let converged = step > 4 && (ritz - last).abs() <= 1e-14 * ritz.abs();
            last = ritz;
            if converged || bnorm <= 1e-13 * ritz.abs().max(1e-300) || step + 1 == steps {
                break;
            }
            beta.push(bnorm);
            basis.push(w / Complex64::new(bnorm, 0.0));
        }
        last.max(0.0).sqrt()
    }
}

fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().max()
}

/// Field linear in the ladder operators: Σ_k c_k a_k† + d_k a_k.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub creation: Vec<Complex64>,
    pub annihilation: Vec<Complex64>,
}

impl LinearField {
    pub fn zero(n_modes: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_modes];
        LinearField { creation: z.clone(), annihilation: z }
    }

    /// φ(χ) in the convention of the module documentation.
    pub fn from_smearing(grid: &ModeGrid, chi: &dyn MomentumSmearing) -> Self {
        let coeffs = Execution::current().map(&grid.modes, |m| {
            let s = TWO_PI_SQ * m.weight.sqrt();
            (s * chi.hat(&m.momentum()), s * chi.hat(&-m.momentum()))
        });
        LinearField { creation: coeffs.iter().map(|c| c.0).collect(), annihilation: coeffs.iter().map(|c| c.1).collect() }
    }

    pub fn n_modes(&self) -> usize {
        self.creation.len()
    }

    pub fn adjoint(&self) -> Self {
        LinearField {
            creation: self.annihilation.iter().map(|c| c.conj()).collect(),
            annihilation: self.creation.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        LinearField { creation: self.creation.iter().map(|c| c * s).collect(), annihilation: self.annihilation.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        LinearField {
            creation: self.creation.iter().zip(&o.creation).map(|(a, b)| a + b).collect(),
            annihilation: self.annihilation.iter().zip(&o.annihilation).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn creation_part(&self) -> Self {
        LinearField { creation: self.creation.clone(), annihilation: vec![Complex64::new(0.0, 0.0); self.n_modes()] }
    }

    pub fn annihilation_part(&self) -> Self {
        LinearField { creation: vec![Complex64::new(0.0, 0.0); self.n_modes()], annihilation: self.annihilation.clone() }
    }

    /// Coefficients translated by a: c_k e^{ik·a}, d_k e^{−ik·a}.
    pub fn translated(&self, grid: &ModeGrid, a: &FourVector) -> Self {
        let phases: Vec<Complex64> = grid.modes.iter().map(|m| Complex64::from_polar(1.0, m.momentum().dot(a))).collect();
        LinearField {
            creation: self.creation.iter().zip(&phases).map(|(c, p)| c * p).collect(),
            annihilation: self.annihilation.iter().zip(&phases).map(|(c, p)| c * p.conj()).collect(),
        }
    }

    /// The c-number [A, B] = Σ_k (d^A_k c^B_k − c^A_k d^B_k).
    pub fn commutator(&self, other: &Self) -> Complex64 {
        let terms: Vec<Complex64> = (0..self.n_modes())
            .map(|k| self.annihilation[k] * other.creation[k] - self.creation[k] * other.annihilation[k])
            .collect();
        crate::exec::pairwise_sum(&terms)
    }

    /// ‖AΩ‖ = ‖c‖₂.
    pub fn vacuum_norm(&self) -> f64 {
        self.creation.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_matrix(&self, basis: &FockBasis, label: impl Into<String>) -> OperatorMatrix {
        assert_eq!(basis.n_modes, self.n_modes());
        let zero = Complex64::new(0.0, 0.0);
        let columns = Execution::current().map_range(basis.dim(), |col| {
            let mut out = Vec::new();
            for k in 0..self.n_modes() {
                let mode = k as u32;
                if self.creation[k] != zero {
                    if let Some(r) = basis.raised(col, mode) {
                        let n = basis.occupation(col, mode) as f64;
                        out.push((r, col, self.creation[k] * (n + 1.0).sqrt()));
                    }
                }
                if self.annihilation[k] != zero {
                    if let Some(r) = basis.lowered(col, mode) {
                        let n = basis.occupation(col, mode) as f64;
                        out.push((r, col, self.annihilation[k] * n.sqrt()));
                    }
                }
            }
            out
        });
        OperatorMatrix::from_triplets(basis.dim(), label, columns.into_iter().flatten().collect())
    }
}

pub fn annihilator(basis: &FockBasis, mode: usize) -> OperatorMatrix {
    let mut f = LinearField::zero(basis.n_modes);
    f.annihilation[mode] = Complex64::new(1.0, 0.0);
    f.to_matrix(basis, format!("a[{mode}]"))
}

pub fn creator(basis: &FockBasis, mode: usize) -> OperatorMatrix {
    let mut f = LinearField::zero(basis.n_modes);
    f.creation[mode] = Complex64::new(1.0, 0.0);
    f.to_matrix(basis, format!("a*[{mode}]"))
}

pub fn build_field_operator(grid: &ModeGrid, basis: &FockBasis, chi: &dyn MomentumSmearing) -> OperatorMatrix {
    LinearField::from_smearing(grid, chi).to_matrix(basis, "phi(chi)")
}

/// :A²: = C² + 2CD + D² for A = C + D split into creation and annihilation parts.
pub fn wick_square(field: &LinearField, basis: &FockBasis) -> OperatorMatrix {
    let c = field.creation_part().to_matrix(basis, "C");
    let d = field.annihilation_part().to_matrix(basis, "D");
    let cc = c.mul(&c);
    let cd = c.mul(&d).scale(Complex64::new(2.0, 0.0));
    let dd = d.mul(&d);
    cc.add(&cd).add(&dd).with_label(":phi^2:")
}

pub fn build_wick_square(grid: &ModeGrid, basis: &FockBasis, chi: &dyn MomentumSmearing) -> OperatorMatrix {
    wick_square(&LinearField::from_smearing(grid, chi), basis)
}

/// Diagonal 0/1 projector selected per basis state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projector {
    pub mask: Vec<bool>,
}

impl Projector {
    pub fn to_matrix(&self) -> OperatorMatrix {
        let d: Vec<Complex64> = self.mask.iter().map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)).collect();
        OperatorMatrix::diagonal(&d, "E")
    }

    pub fn complement(&self) -> Self {
        Projector { mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Projector { mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect() }
    }

    pub fn rank(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_fn(x.len(), |i, _| if self.mask[i] { x[i] } else { Complex64::new(0.0, 0.0) })
    }
}

pub fn spectral_projector(basis: &FockBasis, region: impl Fn(&FourVector) -> bool) -> Projector {
    Projector { mask: basis.momenta.iter().map(region).collect() }
}

/// E_Ω⊥ = 1 − |Ω⟩⟨Ω|.
pub fn vacuum_complement(basis: &FockBasis) -> Projector {
    Projector { mask: (0..basis.dim()).map(|i| i != FockBasis::VACUUM).collect() }
}

/// E_μ: |√p² − m| ≤ μ, p⁰ > 0.
pub fn shell_projector(basis: &FockBasis, mass: f64, mu: f64) -> Projector {
    spectral_projector(basis, |p| p.x0 > 0.0 && p.square() > 0.0 && (p.square().sqrt() - mass).abs() <= mu)
}

/// States with 0 < P⁰ ≤ e_max and at most `max_particles` particles (the
/// layers on which products of `depth` raising operators are not truncated).
pub fn energy_window(basis: &FockBasis, e_max: f64, max_particles: usize) -> Projector {
    Projector { mask: (0..basis.dim()).map(|i| basis.momenta[i].x0 <= e_max && basis.particle_number(i) <= max_particles).collect() }
}

pub fn translation_phases(basis: &FockBasis, a: &FourVector) -> Vec<Complex64> {
    basis.momenta.iter().map(|p| Complex64::from_polar(1.0, p.dot(a))).collect()
}

/// U(a) A U(−a) with U(a) = diag(e^{iP·a}).
pub fn translate_operator(basis: &FockBasis, op: &OperatorMatrix, a: &FourVector) -> OperatorMatrix {
    let ph = translation_phases(basis, a);
    let t = op.entries().map(|(r, c, v)| (r, c, v * ph[r] * ph[c].conj())).collect();
    OperatorMatrix::from_triplets(basis.dim(), op.label.clone() + "(a)", t)
}

/// Threshold for deciding the kernel of Aⁿ: singular values at or below
/// `threshold` count as zero. With `band`, values inside
/// (threshold, band] make the decision ambiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    pub threshold: f64,
    pub band: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaReport {
    /// ‖AP‖².
    pub lhs1: f64,
    /// (n−1)‖[A, A*]‖.
    pub rhs1: f64,
    /// ‖A*P‖².
    pub lhs2: f64,
    /// n‖[A, A*]‖.
    pub rhs2: f64,
    pub kernel_dim: usize,
    pub satisfied: bool,
}

/// Checks ‖AP‖² ≤ (n−1)‖[A,A*]‖ and ‖A*P‖² ≤ n‖[A,A*]‖ for P the
/// orthogonal projector onto ker Aⁿ.
pub fn kernel_projector_lemma_check(a: &DMatrix<Complex64>, n: usize, tol: Option<RankTolerance>) -> Result<LemmaReport> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return invalid("lemma check needs a nonempty square matrix");
    }
    if n < 1 {
        return invalid("power n must be at least 1");
    }
    let dim = a.nrows();
    let mut an = a.clone();
    for _ in 1..n {
        an = &an * a;
    }
    let scale = a.norm().max(1e-300).powi(n as i32);
    let tol = tol.unwrap_or(RankTolerance { threshold: 1e-12 * scale * dim as f64, band: Some(1e-6 * scale) });
    // Right singular vectors of Aⁿ via the Hermitian eigenproblem of (Aⁿ)*Aⁿ
    // would square the conditioning; use a full SVD of a padded square matrix.
    let svd = an.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut kernel_rows = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol.threshold {
            kernel_rows.push(i);
        } else if let Some(band) = tol.band {
            if *s <= band {
                return Err(Error::AmbiguousRank { value: *s, lo: tol.threshold, hi: band });
            }
        }
    }
    let mut p = DMatrix::<Complex64>::zeros(dim, dim);
    for &i in &kernel_rows {
        let row = vt.row(i);
        // V has columns v_i = conj(row_i of Vᵀ*)... v_t is V*, so v_i = row_iᴴ.
        let v: DVector<Complex64> = DVector::from_iterator(dim, row.iter().map(|x| x.conj()));
        p += &v * v.adjoint();
    }
    let comm = a * a.adjoint() - a.adjoint() * a;
    let cn = comm.singular_values().max();
    let ap = (a * &p).singular_values().max();
    let asp = (a.adjoint() * &p).singular_values().max();
    let lhs1 = ap * ap;
    let lhs2 = asp * asp;
    let rhs1 = (n as f64 - 1.0) * cn;
    let rhs2 = n as f64 * cn;
    let slack = |r: f64| 1e-12 * (1.0 + r);
    let satisfied = lhs1 <= rhs1 + slack(rhs1) && lhs2 <= rhs2 + slack(rhs2);
    Ok(LemmaReport { lhs1, rhs1, lhs2, rhs2, kernel_dim: kernel_rows.len(), satisfied })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_count() {
        assert_eq!(fock_dimension(3, 2), 1 + 3 + 6);
        let g = ModeGrid::new(1.0, 0.25, 0.6).unwrap();
        assert_eq!(g.len(), 57);
        let b = FockBasis::new(&g, 2, 5000).unwrap();
        assert_eq!(b.dim() as u128, fock_dimension(57, 2));
        assert!(matches!(FockBasis::new(&ModeGrid::new(1.0, 0.25, 2.0).unwrap(), 2, 5000), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn sparse_product_matches_dense() {
        let g = ModeGrid::new(1.0, 0.5, 0.5).unwrap();
        let b = FockBasis::new(&g, 3, 1000).unwrap();
        let a = annihilator(&b, 2).add(&creator(&b, 4).scale(Complex64::new(0.3, 0.2)));
        let c = creator(&b, 1);
        let dense = a.to_dense() * c.to_dense();
        let diff = (a.mul(&c).to_dense() - dense).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn lanczos_norm_matches_svd() {
        let g = ModeGrid::new(1.0, 0.25, 0.6).unwrap();
        let b = FockBasis::new(&g, 1, 5000).unwrap();
        let mut f = LinearField::zero(g.len());
        for (k, c) in f.creation.iter_mut().enumerate() {
            *c = Complex64::new((k as f64 * 0.37).sin(), 0.1);
        }
        let m = f.to_matrix(&b, "x");
        let dense = m.to_dense().singular_values().max();
        assert!((m.lanczos_norm() - dense).abs() < 1e-10 * dense);
    }

    #[test]
    fn jordan_block_equality() {
        let mut a = DMatrix::<Complex64>::zeros(2, 2);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        let r = kernel_projector_lemma_check(&a, 2, None).unwrap();
        assert_eq!(r.kernel_dim, 2);
        assert!((r.lhs1 - r.rhs1).abs() < 1e-12);
        assert!(r.satisfied);
    }
}
