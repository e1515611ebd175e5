//! One function per subcommand. Each evaluates its claims, appends CSV
//! tables and verdicts to the run context, and maps library errors to the
//! claim being computed.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use hyperlab::asymptotic::*;
use hyperlab::decay::*;
use hyperlab::freefield::*;
use hyperlab::minkowski::{difference_violations, geom_bounds, sample_ball};
use hyperlab::oscillatory::{expansion_at, extract_lk, recursive_corrections, ExpansionResult, QuadratureSpec};
use hyperlab::profiles::{HyperboloidProfile, HyperboloidProfileSpec, MomentumProfile, MomentumSmearing, RadialProfile, TimeKernel};
use hyperlab::{Error, Execution, FourVector, HyperboloidPoint, LorentzBoost};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ExperimentConfig, Grid};
use crate::output::{Comparison, CsvTable, Verdict};
use crate::row;

/// Library failure while computing a claim.
#[derive(Debug)]
pub struct NumericalFailure {
    pub claim: String,
    pub message: String,
}

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.claim, self.message)
    }
}

type Step<T> = Result<T, NumericalFailure>;

trait ForClaim<T> {
    fn claim(self, id: &str) -> Step<T>;
}

impl<T> ForClaim<T> for hyperlab::Result<T> {
    fn claim(self, id: &str) -> Step<T> {
        self.map_err(|e| NumericalFailure { claim: id.to_string(), message: e.to_string() })
    }
}

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub selected: Option<BTreeSet<String>>,
    pub tables: Vec<CsvTable>,
    pub verdicts: Vec<Verdict>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a ExperimentConfig, seed: u64, selected: Option<BTreeSet<String>>) -> Self {
        Context { config, seed, selected, tables: Vec::new(), verdicts: Vec::new() }
    }

    fn wants(&self, ids: &[&str]) -> bool {
        match &self.selected {
            None => true,
            Some(s) => ids.iter().any(|id| s.contains(*id)),
        }
    }

    /// Independent random stream per claim group, so running a subset of
    /// claims reproduces the numbers of a full run.
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn verdict(&mut self, v: Verdict) {
        if self.selected.as_ref().is_none_or(|s| s.contains(&v.claim)) {
            self.verdicts.push(v);
        }
    }
}

fn profile(spec: &HyperboloidProfileSpec, claim: &str) -> Step<HyperboloidProfile> {
    HyperboloidProfile::from_spec(spec).claim(claim)
}

fn grid(cfg: &ExperimentConfig, g: &Grid, claim: &str) -> Step<ModeGrid> {
    ModeGrid::new(cfg.mass, g.spacing, g.cutoff).claim(claim)
}

fn basis(grid: &ModeGrid, n_max: usize, claim: &str) -> Step<FockBasis> {
    FockBasis::new(grid, n_max, DEFAULT_MAX_DIMENSION).claim(claim)
}

fn fv(a: &[f64; 4]) -> FourVector {
    FourVector::new(a[0], a[1], a[2], a[3])
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let x: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [x[0] / n, x[1] / n, x[2] / n];
        }
    }
}

pub fn expand(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let x = &cfg.expand;
    let rate_ids: Vec<String> = (0..=x.max_order).map(|n| format!("expand.rate.n{n}")).collect();
    let mut ids: Vec<&str> = rate_ids.iter().map(String::as_str).collect();
    ids.extend(["expand.leading", "expand.runtime"]);
    let spec = QuadratureSpec { abs_tol: x.abs_tol, ..cfg.quadrature };
    if ctx.wants(&ids) {
        let t = Instant::now();
        let rhos = x.rho.values();
        let mut table = CsvTable::new("expand", &["case", "rho", "order", "oracle_re", "oracle_im", "partial_re", "partial_im", "remainder"]);
        let mut fits = CsvTable::new("expand_fit", &["case", "k", "coeff_re", "coeff_im", "profile_value"]);
        let mut worst = vec![f64::NEG_INFINITY; x.max_order + 1];
        let mut slopes = Vec::new();
        let mut leading: f64 = 0.0;
        for (ci, case) in x.cases.iter().enumerate() {
            let f = profile(&case.profile, "expand.rate.n0")?;
            let v = HyperboloidPoint::new(case.v);
            let rows: Vec<ExpansionResult> = Execution::current()
                .map(&rhos, |r| expansion_at(&f, *r, &v, x.max_order, &spec))
                .into_iter()
                .collect::<hyperlab::Result<_>>()
                .claim("expand.rate.n0")?;
            let mut case_slopes = Vec::new();
            for n in 0..=x.max_order {
                let partials: Vec<Complex64> = rows.iter().map(|e| e.terms[..=n].iter().sum()).collect();
                let ys: Vec<f64> = rows.iter().zip(&partials).map(|(e, p)| (e.oracle - p).norm()).collect();
                for (e, (p, y)) in rows.iter().zip(partials.iter().zip(&ys)) {
                    table.push(row![ci, e.rho, n, e.oracle.re, e.oracle.im, p.re, p.im, *y]);
                }
                let slope = RateFit::fit(&rhos, &ys).claim(&rate_ids[n])?.slope;
                worst[n] = worst[n].max(slope);
                case_slopes.push(slope);
            }
            slopes.push(case_slopes);
            let fit = extract_lk(&f, &v, 3, &rhos, &spec).claim("expand.leading")?;
            let fv = f.value_at(&v);
            for (k, c) in fit.coeffs.iter().enumerate() {
                fits.push(row![ci, k, c.re, c.im, if k == 0 { fv.re } else { 0.0 }]);
            }
            leading = leading.max((fit.coeffs[0] - fv).norm());
        }
        let runtime = secs(t);
        for n in 0..=x.max_order {
            let threshold = -(n as f64 + 1.0) + x.slope_slack;
            let per_case: Vec<f64> = slopes.iter().map(|s| s[n]).collect();
            ctx.verdict(Verdict::new(&rate_ids[n], worst[n], Comparison::AtMost, threshold, runtime).with_details(json!({ "slopes": per_case })));
        }
        ctx.verdict(Verdict::new("expand.leading", leading, Comparison::AtMost, x.leading_tol, runtime));
        ctx.verdict(Verdict::new("expand.runtime", runtime, Comparison::Below, x.runtime_budget_s, runtime));
        ctx.tables.push(table);
        ctx.tables.push(fits);
    }
    if ctx.wants(&["expand.corrections"]) {
        let t = Instant::now();
        let f = profile(&x.cases[0].profile, "expand.corrections")?;
        let vs: Vec<HyperboloidPoint> = x.corrections.v.iter().map(|v| HyperboloidPoint::new(*v)).collect();
        let order = x.max_order.max(1);
        let discrepancy = match recursive_corrections(&f, order, &vs, &x.corrections.rho.values(), &spec) {
            Ok(c) => c.fit_discrepancy,
            Err(Error::BudgetExceeded { discrepancy, .. }) => discrepancy,
            Err(e) => return Err(e).claim("expand.corrections"),
        };
        ctx.verdict(Verdict::new("expand.corrections", discrepancy, Comparison::AtMost, hyperlab::oscillatory::CORRECTION_FIT_BUDGET, secs(t)));
    }
    Ok(())
}

pub fn outfield(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let o = &cfg.outfield;
    let m = cfg.mass;
    if ctx.wants(&["outfield.rate"]) {
        let id = "outfield.rate";
        let t = Instant::now();
        let g = grid(cfg, &cfg.grid, id)?;
        let b = basis(&g, cfg.grid.n_max, id)?;
        let spec = FieldSpec::bare(g, cfg.quadrature);
        let f = profile(&o.profile, id)?;
        let chi = MomentumProfile::plateau_around(m, &f, o.plateau_margin).claim(id)?;
        let window = energy_window(&b, o.window_energy, cfg.grid.n_max.saturating_sub(1));
        let out = out_field(&spec, &chi, &f, &o.lambda.values(), &b, &window).claim(id)?;
        let mut table = CsvTable::new("outfield", &["lambda", "norm"]);
        for (l, n) in out.lambdas.iter().zip(&out.norms) {
            table.push(row![*l, *n]);
        }
        ctx.tables.push(table);
        let miss = field_distance(&out.extrapolated, &out.limit);
        ctx.verdict(Verdict::new(id, out.rate.slope, Comparison::AtMost, o.slope_max, secs(t)).with_details(json!({
            "r2": out.rate.r2,
            "verdict": out.verdict,
            "extrapolated_distance": miss,
            "extrapolation_error": out.extrapolation_error,
        })));
    }
    if ctx.wants(&["outfield.vacuum"]) {
        let id = "outfield.vacuum";
        let t = Instant::now();
        let g = grid(cfg, &cfg.grid, id)?;
        let b = basis(&g, cfg.grid.n_max, id)?;
        let spec = FieldSpec::bare(g, cfg.quadrature);
        let h = TimeKernel::new(0.5, 1.5).claim(id)?;
        let omega = b.vacuum_vector();
        let e0 = shell_projector(&b, m, 1e-9);
        let mut rng = ctx.rng(1);
        let mut table = CsvTable::new("outfield_vacuum", &["case", "center_x", "center_y", "center_z", "radius", "residual", "scale"]);
        let mut worst: f64 = 0.0;
        for case in 0..o.random_profiles {
            let center = HyperboloidPoint::from_rapidity(random_direction(&mut rng), rng.gen_range(0.0..0.5));
            let radius = rng.gen_range(0.5..1.5);
            let f = HyperboloidProfile::new(center, radius, 1.0).claim(id)?;
            let chi = MomentumProfile::plateau_around(m, &f, o.plateau_margin).claim(id)?;
            let lambda = rng.gen_range(o.lambda.lo..o.lambda.hi);
            let lhs = primed_field(&spec, &chi, &f, &h, lambda).claim(id)?.field.to_matrix(&b, "Psi'").apply(&omega);
            // (2π)² f(P/m) E₀ ΨΩ, state by state
            let mut rhs = e0.apply(&spec.base_field().to_matrix(&b, "Psi").apply(&omega));
            for i in 0..b.dim() {
                if e0.mask[i] {
                    let p = b.momenta[i];
                    rhs[i] *= TWO_PI_SQ * f.value(&HyperboloidPoint::new([p.xs[0] / m, p.xs[1] / m, p.xs[2] / m]));
                }
            }
            let residual = (lhs - &rhs).norm();
            worst = worst.max(residual);
            table.push(row![case, center.vs[0], center.vs[1], center.vs[2], radius, residual, rhs.norm()]);
        }
        ctx.tables.push(table);
        ctx.verdict(Verdict::new(id, worst, Comparison::AtMost, o.vacuum_tol, secs(t)));
    }
    if ctx.wants(&["outfield.transfer"]) {
        let id = "outfield.transfer";
        let t = Instant::now();
        let g = grid(cfg, &cfg.grid, id)?;
        // two layers, so a one-particle Δ₁ still has somewhere to go
        let n_max = cfg.grid.n_max.max(2);
        let b = basis(&g, n_max, id)?;
        let spec = FieldSpec::bare(g, cfg.quadrature);
        let h = TimeKernel::new(0.5, 1.5).claim(id)?;
        let below_top: Vec<f64> = (0..b.dim()).filter(|&i| b.particle_number(i) < n_max).map(|i| b.momenta[i].x0).collect();
        let mut rng = ctx.rng(2);
        let mut table = CsvTable::new("outfield_transfer", &["pair", "shell_lo", "shell_hi", "d1_lo", "d1_hi", "d2_kind", "d2_lo", "d2_hi", "residual", "reachable_residual"]);
        let mut worst: f64 = 0.0;
        let mut nonvacuous = 0;
        for pair in 0..o.transfer_pairs {
            let center = HyperboloidPoint::from_rapidity(random_direction(&mut rng), rng.gen_range(0.0..0.4));
            let f = HyperboloidProfile::new(center, rng.gen_range(0.2..0.5), 1.0).claim(id)?;
            let chi = MomentumProfile::plateau_around(m, &f, o.plateau_margin).claim(id)?;
            let op = primed_field(&spec, &chi, &f, &h, o.lambda.hi).claim(id)?.field.to_matrix(&b, "Psi'");
            let (lo, hi) = shell_energy_range(&f, m);
            // Δ₁ always contains the energy of some state below the top layer
            let w = rng.gen_range(0.05..1.0);
            let a = below_top[rng.gen_range(0..below_top.len())] - rng.gen_range(0.0..w);
            let d1 = energy_band(&b, a, a + w);
            let (reach_lo, reach_hi) = (a + lo, a + w + hi);
            let kind = rng.gen_range(0..3);
            let (kind_name, d2, b_lo, b_hi) = match kind {
                0 => {
                    let b_hi = reach_lo - rng.gen_range(1e-6..0.5);
                    let b_lo = b_hi - rng.gen_range(0.05..2.0);
                    ("below", energy_band(&b, b_lo, b_hi), b_lo, b_hi)
                }
                1 => {
                    let b_lo = reach_hi + rng.gen_range(1e-6..0.5);
                    let b_hi = b_lo + rng.gen_range(0.05..2.0);
                    ("above", energy_band(&b, b_lo, b_hi), b_lo, b_hi)
                }
                _ => ("complement", energy_band(&b, reach_lo, reach_hi).complement(), reach_lo, reach_hi),
            };
            let residual = transfer_residual(&op, &d1, &d2);
            let reachable = transfer_residual(&op, &d1, &energy_band(&b, reach_lo, reach_hi));
            if reachable > 0.0 {
                nonvacuous += 1;
            }
            worst = worst.max(residual);
            table.push(row![pair, lo, hi, a, a + w, kind_name, b_lo, b_hi, residual, reachable]);
        }
        ctx.tables.push(table);
        ctx.verdict(Verdict::new(id, worst, Comparison::AtMost, o.transfer_tol, secs(t)).with_details(json!({ "pairs_with_nonzero_reachable_block": nonvacuous })));
    }
    Ok(())
}

pub fn rates(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let r = &cfg.rates;
    let based = |id: &str| -> Step<FieldSpec> {
        let g = grid(cfg, &r.grid, id)?;
        let base = SpacetimeBump::sharp(FourVector::ZERO, Spatial::Bump { radius: r.base_radius }).claim(id)?;
        Ok(FieldSpec::with_base(g, Arc::new(base), cfg.quadrature))
    };
    if ctx.wants(&["rates.disjoint"]) {
        let id = "rates.disjoint";
        let t = Instant::now();
        let spec = based(id)?;
        let f1 = profile(&r.disjoint.f1, id)?;
        let f2 = profile(&r.disjoint.f2, id)?;
        let gap = support_gap(&f1, &f2);
        let scan = hyperboloid_commutator_scan(&spec, &f1, &f2, &r.disjoint.lambda.values(), gap / 2.0, r.disjoint.ratios).claim(id)?;
        let mut table = CsvTable::new("rates_disjoint", &["ratio", "lambda1", "lambda2", "norm"]);
        for row in &scan.rows {
            for i in 0..row.norms.len() {
                table.push(row![row.ratio, row.lambda1[i], row.lambda2[i], row.norms[i]]);
            }
        }
        ctx.tables.push(table);
        let slopes: Vec<f64> = scan.rows.iter().map(|row| row.rate.slope).collect();
        ctx.verdict(
            Verdict::new(id, scan.worst_slope(), Comparison::AtMost, r.disjoint.slope_max, secs(t))
                .with_details(json!({ "gap": gap, "gamma": scan.gamma, "slopes": slopes })),
        );
    }
    if ctx.wants(&["rates.diagonal"]) {
        let id = "rates.diagonal";
        let t = Instant::now();
        let spec = based(id)?;
        let owned: Vec<(HyperboloidProfile, HyperboloidProfile)> =
            r.diagonal.pairs.iter().map(|[a, b]| Ok((profile(a, id)?, profile(b, id)?))).collect::<Step<_>>()?;
        let pairs: Vec<(&dyn RadialProfile, &dyn RadialProfile)> = owned.iter().map(|(a, b)| (a as &dyn RadialProfile, b as &dyn RadialProfile)).collect();
        let rep = diagonal_commutator_check(&spec, &pairs, &r.diagonal.lambda.values()).claim(id)?;
        let mut table = CsvTable::new("rates_diagonal", &["pair", "weight", "lambda", "norm"]);
        for (p, (w, norms)) in rep.weights.iter().zip(&rep.norms).enumerate() {
            for (l, n) in rep.lambdas.iter().zip(norms) {
                table.push(row![p, *w, *l, *n]);
            }
        }
        ctx.tables.push(table);
        let worst = rep.final_ratios.iter().copied().fold(0.0, f64::max);
        ctx.verdict(
            Verdict::new(id, worst, Comparison::AtMost, 1.0, secs(t))
                .with_details(json!({ "constant": rep.constant, "final_ratios": rep.final_ratios }))
                .require(rep.satisfied),
        );
    }
    let p = &r.product;
    let shell_setup = |id: &str| -> Step<(FieldSpec, HyperboloidProfile, MomentumProfile, TimeKernel)> {
        let g = grid(cfg, &cfg.grid, id)?;
        let f = profile(&p.profile, id)?;
        let chi = MomentumProfile::plateau_around(cfg.mass, &f, p.plateau_margin).claim(id)?;
        let h = TimeKernel::new(p.kernel[0], p.kernel[1]).claim(id)?;
        Ok((FieldSpec::bare(g, cfg.quadrature), f, chi, h))
    };
    let lambdas = p.lambda.values();
    if ctx.wants(&["rates.product"]) {
        let id = "rates.product";
        let t = Instant::now();
        let (spec, f, chi, h) = shell_setup(id)?;
        let b = basis(&spec.grid, 1, id)?;
        let rep = two_operator_product_check(&spec, &spec, &chi, &f, &f, &h, &lambdas, p.eta, &b).claim(id)?;
        let mut table = CsvTable::new("rates_product", &["Lambda", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "orthogonal"]);
        for (i, l) in lambdas.iter().enumerate() {
            table.push(row![*l, rep.lhs[i].re, rep.lhs[i].im, rep.rhs.re, rep.rhs.im, rep.residuals[i], rep.orthogonal[i]]);
        }
        ctx.tables.push(table);
        let last = *rep.residuals.last().expect("non-empty Λ grid");
        ctx.verdict(Verdict::new(id, last, Comparison::AtMost, p.residual_max, secs(t)));
    }
    if ctx.wants(&["rates.kernel"]) {
        let id = "rates.kernel";
        let t = Instant::now();
        let (spec, f, chi, h) = shell_setup(id)?;
        let k = kernel_independence_check(&spec, &chi, &f, &h, &lambdas, (p.compare_etas[0], p.compare_etas[1]), KernelRule::default()).claim(id)?;
        let mut table = CsvTable::new("rates_kernel", &["Lambda", "difference"]);
        for (l, d) in k.lambdas.iter().zip(&k.differences) {
            table.push(row![*l, *d]);
        }
        ctx.tables.push(table);
        let budget = k.extrapolation_errors.0 + k.extrapolation_errors.1;
        let ratio = if budget > 0.0 { k.limit_difference / budget } else if k.limit_difference == 0.0 { 0.0 } else { f64::INFINITY };
        ctx.verdict(Verdict::new(id, ratio, Comparison::AtMost, p.agreement_factor, secs(t)).with_details(json!({
            "limit_difference": k.limit_difference,
            "extrapolation_errors": [k.extrapolation_errors.0, k.extrapolation_errors.1],
            "shell_distances": [k.shell_distances.0, k.shell_distances.1],
        })));
    }
    if ctx.wants(&["rates.primed"]) {
        let id = "rates.primed";
        let t = Instant::now();
        let (spec, f, chi, h) = shell_setup(id)?;
        let b = basis(&spec.grid, 2, id)?;
        let window = energy_window(&b, p.window_energy, 1);
        let pd = primed_difference(&spec, &chi, &f, &h, &lambdas, &b, &window, KernelRule::default()).claim(id)?;
        let mut table = CsvTable::new("rates_primed", &["Lambda", "norm"]);
        for (l, n) in pd.lambdas.iter().zip(&pd.norms) {
            table.push(row![*l, *n]);
        }
        ctx.tables.push(table);
        ctx.verdict(Verdict::new(id, pd.rate.slope, Comparison::AtMost, p.primed_slope_max, secs(t)));
    }
    Ok(())
}

fn scan_rows(table: &mut CsvTable, label: &str, scan: &DecayScanResult) {
    for i in 0..scan.offsets.len() {
        let a = scan.offsets[i];
        table.push(row![label, a.x0, a.xs[0], a.xs[1], a.xs[2], scan.separations[i], scan.values[i], scan.template[i]]);
    }
}

pub fn decay(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let d = &cfg.decay;
    // two time slices off the equal-time plane, where sharp-time smearings commute trivially
    let offsets: Vec<FourVector> = d
        .separation
        .values()
        .into_iter()
        .flat_map(|s| [FourVector::new(0.5, s + 0.5, 0.0, 0.0), FourVector::new(1.0, 0.0, 0.6 * (s + 1.0), 0.8 * (s + 1.0))])
        .collect();
    let gauss = |w: f64, id: &str| SpacetimeBump::sharp(FourVector::ZERO, Spatial::Gaussian { width: w }).claim(id);
    let header = ["scan", "t", "x", "y", "z", "separation", "value", "template"];
    let mut table = CsvTable::new("decay", &header);
    if ctx.wants(&["decay.template"]) {
        let id = "decay.template";
        let t = Instant::now();
        let (g1, g2) = (gauss(d.widths[0], id)?, gauss(d.widths[1], id)?);
        let measure = ShellMeasure::Continuum(ContinuumShell::for_smearings(cfg.mass, &[&g1, &g2], d.reach).claim(id)?);
        let mut worst: f64 = 0.0;
        let mut constants = Vec::new();
        for &kappa in &d.kappas {
            let scan = commutator_decay_scan(&measure, &g1, &g2, &offsets, kappa, d.r).claim(id)?;
            scan_rows(&mut table, &format!("kappa={kappa}"), &scan);
            worst = worst.max(scan.saturation);
            constants.push(scan.c);
        }
        ctx.verdict(Verdict::new(id, worst, Comparison::Below, 1.0, secs(t)).with_details(json!({ "kappas": d.kappas, "c": constants })));
    }
    if ctx.wants(&["decay.boosted"]) {
        let id = "decay.boosted";
        let t = Instant::now();
        let (g1, g2) = (gauss(d.widths[0], id)?, gauss(d.widths[1], id)?);
        let boost = LorentzBoost::along([0.0, 0.0, 1.0], d.boost_rapidity);
        let inv = boost.inverse();
        let needed = offsets.iter().map(|a| { let b = inv.apply(a); b.spatial_norm() + b.x0.abs() }).fold(0.0, f64::max) + 1.0;
        let measure = ShellMeasure::Continuum(ContinuumShell::for_smearings(cfg.mass, &[&g1, &g2], d.reach.max(needed)).claim(id)?);
        let scan = boosted_decay_scan(&measure, &g1, &g2, &offsets, &boost, d.kappas[0], d.r).claim(id)?;
        scan_rows(&mut table, "boosted", &scan);
        ctx.verdict(Verdict::new(id, scan.saturation, Comparison::Below, 1.0, secs(t)).with_details(json!({ "c": scan.c })));
    }
    if ctx.wants(&["decay.preserved"]) {
        let id = "decay.preserved";
        let t = Instant::now();
        let g1: Arc<dyn SphericalSmearing> = Arc::new(gauss(d.widths[0], id)?);
        let g2: Arc<dyn SphericalSmearing> = Arc::new(gauss(d.widths[1], id)?);
        let narrow = gauss(d.narrow_width, id)?;
        let wide = gauss(d.wide_width, id)?;
        let zero = SpacetimeBump::new(FourVector::ZERO, Temporal::Sharp, Spatial::Gaussian { width: d.widths[0] }, 0.0).claim(id)?;
        let measure = ShellMeasure::Continuum(
            ContinuumShell::for_smearings(cfg.mass, &[g1.as_ref(), g2.as_ref(), &narrow, &wide], d.reach).claim(id)?,
        );
        let extras: [(&str, Arc<dyn SphericalSmearing>); 3] = [("narrow", Arc::new(narrow)), ("wide", Arc::new(wide)), ("zero", Arc::new(zero))];
        let mut worst: f64 = 0.0;
        let mut ratios = serde_json::Map::new();
        for (label, extra) in extras {
            let rep = smearing_preservation_check(&measure, g1.clone(), g2.clone(), extra, &offsets, d.kappas[0], d.r).claim(id)?;
            scan_rows(&mut table, &format!("smeared_{label}"), &rep.smeared);
            worst = worst.max(rep.smeared.saturation).max(rep.base.saturation);
            ratios.insert(label.to_string(), json!(rep.c_ratio));
        }
        ctx.verdict(Verdict::new(id, worst, Comparison::Below, 1.0, secs(t)).with_details(json!({ "c_ratio": ratios })));
    }
    if !table.is_empty() {
        ctx.tables.push(table);
    }
    Ok(())
}

pub fn cluster(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let c = &cfg.cluster;
    let bump = |id: &str| SpacetimeBump::sharp(FourVector::ZERO, Spatial::Bump { radius: c.bump_radius }).claim(id);
    if ctx.wants(&["cluster.wick"]) {
        let id = "cluster.wick";
        let t = Instant::now();
        let gs: Vec<SpacetimeBump> = (0..4).map(|_| bump(id)).collect::<Step<_>>()?;
        let refs: Vec<&dyn SphericalSmearing> = gs.iter().map(|g| g as &dyn SphericalSmearing).collect();
        let measure = ShellMeasure::Continuum(ContinuumShell::for_smearings(cfg.mass, &refs, c.reach).claim(id)?);
        let prepared: [PreparedSmearing; 4] = measure.prepare_all(&refs).claim(id)?.try_into().map_err(|_| NumericalFailure { claim: id.into(), message: "prepared smearings".into() })?;
        let (y1, y2) = (fv(&c.y1), fv(&c.y2));
        let points: Vec<ClusterPoint> = c
            .separations
            .iter()
            .map(|s| {
                let y = FourVector::new(c.time_offset, s + c.time_offset, 0.0, 0.0);
                Ok(ClusterPoint { y1, y2, y, d: c.bump_radius, value: cluster_function_k(&measure, &prepared, &y1, &y2, &y).claim(id)? })
            })
            .collect::<Step<_>>()?;
        let scan = cluster_template_fit(&points, c.c1).claim(id)?;
        let mut table = CsvTable::new("cluster", &["separation", "k_re", "k_im", "template"]);
        for (p, tpl) in scan.points.iter().zip(&scan.template) {
            table.push(row![spacelike_separation(&p.y), p.value.re, p.value.im, *tpl]);
        }
        ctx.tables.push(table);
        ctx.verdict(Verdict::new(id, scan.saturation, Comparison::Below, 1.0, secs(t)).with_details(json!({ "c2": scan.c2, "c1": scan.c1 })).require(scan.satisfied));
    }
    if ctx.wants(&["cluster.elementary", "cluster.fock"]) {
        let id = "cluster.fock";
        let t = Instant::now();
        let f = &c.fock;
        let g = grid(cfg, &f.grid, id)?;
        let b = basis(&g, f.grid.n_max, id)?;
        let gs: Vec<SpacetimeBump> = f
            .widths
            .iter()
            .enumerate()
            .map(|(i, w)| SpacetimeBump::sharp(FourVector::new(0.0, 0.1 * i as f64, 0.0, 0.0), Spatial::Gaussian { width: *w }).claim(id))
            .collect::<Step<_>>()?;
        let refs: Vec<&dyn SphericalSmearing> = gs.iter().map(|g| g as &dyn SphericalSmearing).collect();
        let measure = ShellMeasure::Lattice(g.clone());
        let prepared: [PreparedSmearing; 4] = measure.prepare_all(&refs).claim(id)?.try_into().map_err(|_| NumericalFailure { claim: id.into(), message: "prepared smearings".into() })?;
        let chis: [&dyn MomentumSmearing; 4] = [&gs[0], &gs[1], &gs[2], &gs[3]];
        let mut table = CsvTable::new("cluster_fock", &["point", "closed_re", "closed_im", "fock_re", "fock_im", "elementary_abs"]);
        let (mut worst_rel, mut worst_elem): (f64, f64) = (0.0, 0.0);
        for (i, [y1, y2, y]) in f.points.iter().enumerate() {
            let (y1, y2, y) = (fv(y1), fv(y2), fv(y));
            let closed = cluster_function_k(&measure, &prepared, &y1, &y2, &y).claim(id)?;
            let fock = cluster_function_k_fock(&g, &b, chis, LocalOperator::WickSquare, &y1, &y2, &y).claim(id)?;
            let elementary = cluster_function_k_fock(&g, &b, chis, LocalOperator::Elementary, &y1, &y2, &y).claim("cluster.elementary")?;
            let scale = closed.norm();
            worst_rel = worst_rel.max(if scale > 0.0 { (closed - fock).norm() / scale } else { f64::INFINITY });
            worst_elem = worst_elem.max(if scale > 0.0 { elementary.norm() / scale } else { f64::INFINITY });
            table.push(row![i, closed.re, closed.im, fock.re, fock.im, elementary.norm()]);
        }
        ctx.tables.push(table);
        let runtime = secs(t);
        ctx.verdict(Verdict::new("cluster.fock", worst_rel, Comparison::AtMost, f.rel_tol, runtime));
        // relative to the Wick-square value at the same point
        ctx.verdict(Verdict::new("cluster.elementary", worst_elem, Comparison::AtMost, 1e-12, runtime));
    }
    if ctx.wants(&["cluster.ahr", "cluster.ahr_annihilator"]) {
        let id = "cluster.ahr";
        let t = Instant::now();
        let g: Arc<dyn SphericalSmearing> = Arc::new(bump(id)?);
        let measure = ShellMeasure::Continuum(ContinuumShell::for_smearings(cfg.mass, &[g.as_ref()], c.reach).claim(id)?);
        let full = QuadraticSpec { smearing: g.clone(), annihilator_only: false };
        let lowering = QuadraticSpec { smearing: g, annihilator_only: true };
        let ys: Vec<FourVector> =
            c.ahr.separations.iter().flat_map(|s| [FourVector::new(0.0, *s, 0.0, 0.0), FourVector::new(1.0, 0.0, s + 1.0, 0.0)]).collect();
        let rep = ahr_bound_check(&measure, &full, &full, &ys, c.ahr.r).claim(id)?;
        let zero = ahr_bound_check(&measure, &full, &lowering, &ys, c.ahr.r).claim("cluster.ahr_annihilator")?;
        let mut table = CsvTable::new("ahr", &["operator", "t", "x", "y", "z", "separation", "value", "envelope"]);
        for (label, r) in [("wick", &rep), ("annihilator", &zero)] {
            for p in &r.points {
                table.push(row![label, p.y.x0, p.y.xs[0], p.y.xs[1], p.y.xs[2], p.separation, p.value, p.envelope]);
            }
        }
        ctx.tables.push(table);
        let runtime = secs(t);
        let worst = rep.doubling_ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        ctx.verdict(
            Verdict::new("cluster.ahr", worst, Comparison::AtMost, 0.25, runtime)
                .with_details(json!({ "c0": rep.c0, "c1": rep.c1, "constant": rep.constant, "skipped": rep.skipped.len() }))
                .require(rep.quartering_holds && !rep.doubling_ratios.is_empty()),
        );
        let largest = zero.points.iter().map(|p| p.value).fold(0.0, f64::max);
        ctx.verdict(Verdict::new("cluster.ahr_annihilator", largest, Comparison::AtMost, 0.0, runtime));
    }
    Ok(())
}

pub fn geom(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let g = &cfg.geom;
    let mut table = CsvTable::new("geom", &["check", "evaluated", "violations", "min_margin"]);
    if ctx.wants(&["geom.bounds"]) {
        let id = "geom.bounds";
        let t = Instant::now();
        let mut rng = ctx.rng(3);
        let names = ["time difference", "spacelike margin", "conditional margin", "conditional sigma"];
        let mut evaluated = [0usize; 4];
        let mut violations = [0usize; 4];
        let mut margins = [f64::INFINITY; 4];
        let (lo, hi) = (g.lambda_range[0].ln(), g.lambda_range[1].ln());
        for i in 0..g.samples {
            let v1 = sample_ball(&mut rng, g.nu);
            let v2 = sample_ball(&mut rng, g.nu);
            let l1 = rng.gen_range(lo..hi).exp();
            // half of the samples with nearby scales, where the conditional bound applies
            let l2 = if i % 2 == 0 { rng.gen_range(lo..hi).exp() } else { l1 * (1.0 + rng.gen_range(-0.05..0.05)) };
            let sigma = if i % 4 == 3 { Some((l1 - l2).abs() * rng.gen_range(1.0..3.0)) } else { None };
            let rep = geom_bounds(&v1, &v2, l1, l2, g.nu, sigma).claim(id)?;
            for c in &rep.checks {
                let k = names.iter().position(|n| *n == c.name).expect("known inequality");
                evaluated[k] += 1;
                if !c.holds {
                    violations[k] += 1;
                }
                let scale = 1.0 + c.smaller.abs().max(c.larger.abs());
                margins[k] = margins[k].min((c.larger - c.smaller) / scale);
            }
        }
        for k in 0..4 {
            table.push(row![names[k], evaluated[k], violations[k], margins[k]]);
        }
        let total: usize = violations.iter().sum();
        ctx.verdict(Verdict::new(id, total as f64, Comparison::AtMost, 0.0, secs(t)).with_details(json!({ "evaluated": evaluated, "conditional_applicable": evaluated[2] })));
    }
    if ctx.wants(&["geom.difference"]) {
        let id = "geom.difference";
        let t = Instant::now();
        let mut rng = ctx.rng(4);
        let v = difference_violations(&mut rng, g.nu, g.samples);
        table.push(row!["difference region", g.samples, v, f64::NAN]);
        ctx.verdict(Verdict::new(id, v as f64, Comparison::AtMost, 0.0, secs(t)));
    }
    if !table.is_empty() {
        ctx.tables.push(table);
    }
    Ok(())
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// U (N ⊕ M) U* with N strictly upper triangular of size k, M generic and
/// U unitary.
fn nilpotent_mixture(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> DMatrix<Complex64> {
    let mut block = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..k {
        for j in i + 1..k {
            block[(i, j)] = random_complex(rng);
        }
    }
    for i in k..dim {
        for j in k..dim {
            block[(i, j)] = random_complex(rng);
        }
        // keep the generic block away from singular
        block[(i, i)] += Complex64::from_polar(2.0, rng.gen_range(0.0..std::f64::consts::TAU));
    }
    let z = DMatrix::from_fn(dim, dim, |_, _| random_complex(rng));
    let u = z.qr().q();
    &u * block * u.adjoint()
}

pub fn lemma(ctx: &mut Context) -> Step<()> {
    let cfg = ctx.config;
    let l = &cfg.lemma;
    if ctx.wants(&["lemma.random"]) {
        let id = "lemma.random";
        let t = Instant::now();
        let mut rng = ctx.rng(5);
        let mut table = CsvTable::new("lemma", &["index", "dim", "nilpotent_block", "n", "lhs1", "rhs1", "lhs2", "rhs2", "kernel_dim", "status"]);
        let (mut violations, mut ambiguous) = (0usize, 0usize);
        let mut tightest: f64 = 0.0;
        for i in 0..l.matrices {
            let dim = rng.gen_range(2..=l.max_dim);
            let k = rng.gen_range(1..=dim);
            let n = l.powers[i % l.powers.len()];
            let a = nilpotent_mixture(&mut rng, dim, k);
            match kernel_projector_lemma_check(&a, n, None) {
                Ok(r) => {
                    if !r.satisfied {
                        violations += 1;
                    }
                    if r.rhs1 > 0.0 {
                        tightest = tightest.max(r.lhs1 / r.rhs1);
                    }
                    if r.rhs2 > 0.0 {
                        tightest = tightest.max(r.lhs2 / r.rhs2);
                    }
                    table.push(row![i, dim, k, n, r.lhs1, r.rhs1, r.lhs2, r.rhs2, r.kernel_dim, if r.satisfied { "ok" } else { "violated" }]);
                }
                Err(Error::AmbiguousRank { .. }) => {
                    ambiguous += 1;
                    table.push(row![i, dim, k, n, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0usize, "ambiguous"]);
                }
                Err(e) => return Err(e).claim(id),
            }
        }
        ctx.tables.push(table);
        ctx.verdict(
            Verdict::new(id, violations as f64, Comparison::AtMost, 0.0, secs(t))
                .with_details(json!({ "matrices": l.matrices, "ambiguous_rank_skipped": ambiguous, "largest_lhs_over_rhs": tightest })),
        );
    }
    if ctx.wants(&["lemma.jordan"]) {
        let id = "lemma.jordan";
        let t = Instant::now();
        let mut j = DMatrix::<Complex64>::zeros(2, 2);
        j[(0, 1)] = Complex64::new(1.0, 0.0);
        let two = kernel_projector_lemma_check(&j, 2, None).claim(id)?;
        let one = kernel_projector_lemma_check(&j, 1, None).claim(id)?;
        let gap = (two.lhs1 - two.rhs1).abs().max((one.lhs2 - one.rhs2).abs());
        ctx.verdict(
            Verdict::new(id, gap, Comparison::AtMost, l.equality_tol, secs(t))
                .with_details(json!({ "n2": two, "n1": one }))
                .require(two.satisfied && one.satisfied),
        );
    }
    Ok(())
}
