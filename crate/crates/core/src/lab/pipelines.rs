use rayon::prelude::*;

use crate::ensemble::{sample_de_prefix, sample_quadratic_de, MalaChain, McmcConfig, ModelSpec};
use crate::error::{Error, Result};
use crate::local_equilibrium::{equilibrium_table, scaling_constants, solve_local_minimizer, ScalingConstants};
use crate::minimizer::{
    boundary_decay_rate, fekete_stationarity, fit_quadrature_slack, minimize_h, quadrature_bound_check,
    truncation_bound_margin,
};
use crate::potential::Potential;
use crate::rng::stream_rng;
use crate::sao::sample_tw_beta;
use crate::stats::{effective_sample_size, mean, quantile, variance};
use crate::tridiag::TridiagonalSym;

use super::config::{EdgeReference, Experiment, ExperimentKind, FieldNormalization, McmcSettings};
use super::report::{ks_report, num, Check, DataTable, Relation, Report, Status};

/// Stream offsets keeping the random sources of one run disjoint; operator
/// realizations use streams `0..N`.
const MATRIX_STREAMS: u64 = 1 << 40;
const REFERENCE_STREAMS: u64 = 2 << 40;

pub fn run_experiment(exp: &Experiment) -> Result<Report> {
    match exp.kind {
        ExperimentKind::TwReference => tw_reference_pipeline(exp),
        ExperimentKind::EdgeUniversality => edge_universality_pipeline(exp),
        ExperimentKind::FieldClt => field_clt_pipeline(exp),
        ExperimentKind::BoundChecks => bound_checks_pipeline(exp),
        ExperimentKind::EquilibriumTables => equilibrium_tables_pipeline(exp),
    }
}

fn summary_stats(report: &mut Report, prefix: &str, xs: &[f64]) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    report.stat(&format!("{prefix}_count"), xs.len());
    report.stat(&format!("{prefix}_mean"), mean(xs));
    report.stat(&format!("{prefix}_variance"), variance(xs));
    report.stat(
        &format!("{prefix}_quantiles"),
        [0.05, 0.25, 0.5, 0.75, 0.95].map(|p| (p, quantile(&sorted, p))),
    );
}

pub fn tw_reference_pipeline(exp: &Experiment) -> Result<Report> {
    let cfg = exp.sao.as_ref().ok_or_else(|| Error::config("sao", "missing"))?;
    let batch = sample_tw_beta(cfg, exp.sao_samples)?;
    let mut report = Report::new(ExperimentKind::TwReference.name());
    report.conjectural = cfg.k > 0;
    summary_stats(&mut report, "sample", &batch.values);
    report.stat("beta", cfg.beta);
    report.stat("k", cfg.k);
    report.stat("h", cfg.h);
    report.stat("length", cfg.length);
    for (j, col) in batch.higher.iter().enumerate() {
        report.stat(&format!("eigenvalue{}_mean", j + 1), mean(col));
    }
    if let Some(gap) = batch.min_gap {
        report.check(Check::new("min_eigenvalue_gap", gap, Relation::Gt, 0.0));
    }

    let mut buf = Vec::new();
    batch.write_csv(&mut buf)?;
    report.data = parse_table(&buf);
    Ok(report)
}

/// Rebuild a [`DataTable`] from CSV text with a `# ` preamble.
fn parse_table(bytes: &[u8]) -> DataTable {
    let text = String::from_utf8_lossy(bytes);
    let mut t = DataTable::default();
    for line in text.lines() {
        if let Some(p) = line.strip_prefix("# ") {
            t.preamble.push(p.to_string());
        } else if t.header.is_empty() {
            t.header = line.split(',').map(str::to_string).collect();
        } else {
            t.rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    t
}

/// Eigenvalue `from_top` (0 = largest) of `count` exact samples of the
/// quadratic model; sample `i` uses stream `stream_base + i`.
pub fn exact_edge_samples(
    v: &Potential,
    beta: f64,
    n: usize,
    count: usize,
    seed: u64,
    stream_base: u64,
    from_top: usize,
) -> Result<Vec<f64>> {
    if from_top >= n {
        return Err(Error::config("edge.eigenvalue", "index exceeds the matrix size"));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, stream_base + i as u64);
            let t = sample_quadratic_de(v, n, beta, &mut rng)?;
            Ok(t.kth_eigenvalue(n - 1 - from_top))
        })
        .collect()
}

/// Final state of an independent chain plus mixing diagnostics.
#[derive(Debug, Clone)]
pub struct Replica {
    pub t: TridiagonalSym,
    /// Effective sample size of the traced eigenvalue over the production run.
    pub ess: f64,
    pub acceptance: f64,
}

/// `count` independent MALA replicas; replica `i` uses stream
/// `stream_base + i`. The eigenvalue `from_top` is traced for the ESS.
pub fn mcmc_replicas(
    spec: &ModelSpec,
    settings: &McmcSettings,
    count: usize,
    seed: u64,
    stream_base: u64,
    from_top: usize,
) -> Result<Vec<Replica>> {
    let n = spec.n;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let cfg = McmcConfig {
                initial_step: settings.initial_step,
                burn_in: settings.burn_in,
                thinning: settings.thinning,
                seed,
                stream: stream_base + i as u64,
                parametrization: settings.parametrization,
            };
            let chain = MalaChain::new(spec.clone(), &cfg)?;
            let states: Vec<_> = chain.take(settings.production / settings.thinning).collect();
            let last = states.last().ok_or_else(|| Error::numerical("empty chain"))?;
            let trace: Vec<f64> = states.iter().map(|s| s.t.kth_eigenvalue(n - 1 - from_top)).collect();
            Ok(Replica {
                t: last.t.clone(),
                ess: effective_sample_size(&trace),
                acceptance: last.acceptance_rate,
            })
        })
        .collect()
}

/// `γ n^{2/3} (λ - ℰ)`: on the Tracy-Widom scale, comparable with `-Λ`.
fn tw_scale(consts: &ScalingConstants, n: usize, lambda: f64) -> f64 {
    -consts.scale_eigenvalue(n, lambda)
}

pub fn edge_universality_pipeline(exp: &Experiment) -> Result<Report> {
    let v = &exp.potential;
    let consts = scaling_constants(v)?;
    let spec = exp.model()?;
    let (n, j) = (exp.n, exp.eigenvalue);
    let mut report = Report::new(ExperimentKind::EdgeUniversality.name());

    let exact = v.as_quadratic().is_some();
    let (raw, ess) = if exact {
        (exact_edge_samples(v, exp.beta, n, exp.matrices, exp.seed, MATRIX_STREAMS, j)?, None)
    } else {
        let reps = mcmc_replicas(&spec, &exp.mcmc, exp.matrices, exp.seed, MATRIX_STREAMS, j)?;
        let raw = reps.iter().map(|r| r.t.kth_eigenvalue(n - 1 - j)).collect();
        let ess: Vec<f64> = reps.iter().map(|r| r.ess).collect();
        let acc: Vec<f64> = reps.iter().map(|r| r.acceptance).collect();
        report.stat("mean_acceptance", mean(&acc));
        (raw, Some(ess))
    };
    let scaled: Vec<f64> = raw.iter().map(|l| tw_scale(&consts, n, *l)).collect();

    let reference: Vec<f64> = match exp.reference {
        EdgeReference::Sao => {
            let cfg = exp.sao.as_ref().ok_or_else(|| Error::config("sao", "missing"))?;
            let batch = sample_tw_beta(cfg, exp.sao_samples)?;
            report.conjectural = cfg.k > 0;
            if j == 0 {
                batch.values
            } else {
                batch.higher[j - 1].clone()
            }
        }
        EdgeReference::HermiteDe => {
            let h = Potential::hermite();
            let hc = scaling_constants(&h)?;
            exact_edge_samples(&h, exp.beta, n, exp.sao_samples, exp.seed, REFERENCE_STREAMS, j)?
                .into_iter()
                .map(|l| tw_scale(&hc, n, l))
                .collect()
        }
    };

    report.stat("sampler", if exact { "exact" } else { "mcmc" });
    report.stat("reference", format!("{:?}", exp.reference).to_lowercase());
    report.stat("eigenvalue_from_top", j);
    report.stat("edge", consts.edge);
    report.stat("gamma", consts.gamma);
    report.stat("tau", consts.tau);
    summary_stats(&mut report, "matrix", &scaled);
    summary_stats(&mut report, "reference", &reference);
    let ks = ks_report(&scaled, &reference)?;
    report.stat("ks", &ks);

    let tol = &exp.tolerances;
    let mean_diff = (mean(&scaled) - mean(&reference)).abs();
    let mut checks = vec![
        Check::new("ks_distance", ks.statistic, Relation::Le, tol.ks),
        Check::new("mean_difference", mean_diff, Relation::Le, tol.mean),
    ];
    if let Some(vt) = tol.variance {
        let vd = (variance(&scaled) - variance(&reference)).abs();
        checks.push(Check::new("variance_difference", vd, Relation::Le, vt));
    }
    if let Some(ess) = &ess {
        let min_ess = ess.iter().copied().fold(f64::INFINITY, f64::min);
        report.stat("min_ess", min_ess);
        report.stat("mean_ess", mean(ess));
        let mut gate = Check::new("min_replica_ess", min_ess, Relation::Ge, exp.mcmc.min_ess);
        if gate.status == Status::Fail {
            gate = gate.inconclusive("chains did not reach the ESS threshold; the comparison is unreliable");
            checks = checks
                .into_iter()
                .map(|c| c.inconclusive("unreliable: ESS gate failed"))
                .collect();
        }
        checks.push(gate);
    }
    for c in checks {
        report.check(c);
    }

    let mut data = DataTable::new(&["source", "index", "value"]);
    for (i, x) in scaled.iter().enumerate() {
        data.push(vec!["matrix".into(), i.to_string(), num(*x)]);
    }
    for (i, x) in reference.iter().enumerate() {
        data.push(vec!["reference".into(), i.to_string(), num(*x)]);
    }
    report.data = data;
    Ok(report)
}

/// Partial sums of the combined entry field along a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPath {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// `⌊c log n⌋`, at least 1.
pub fn field_lower_index(n: usize, c: f64) -> usize {
    ((c * (n as f64).ln()).floor() as usize).max(1)
}

/// Spacing `m` and unit `u` of the field: value at `x` is
/// `m Σ_{k=lower}^{⌊x m⌋} [(a0 - A_k) + 2(b0 - B_k)] / u`.
pub fn field_scaling(consts: &ScalingConstants, n: usize, norm: FieldNormalization) -> (f64, f64) {
    match norm {
        FieldNormalization::Scaled => (consts.m_n(n), consts.b0),
        FieldNormalization::Simple => ((n as f64).cbrt(), 1.0),
    }
}

/// Field path from one-based entries `A_k = a[k-1]`, `B_k = b[k-1]`.
pub fn field_path(a: &[f64], b: &[f64], center: (f64, f64), scaling: (f64, f64), lower: usize, xs: &[f64]) -> Result<FieldPath> {
    let (m, unit) = scaling;
    let top = xs.iter().map(|x| (x * m).floor() as usize).max().unwrap_or(0);
    if top > a.len() || top > b.len() {
        return Err(Error::validation(format!("field needs {top} entries, have {}", a.len().min(b.len()))));
    }
    let mut values = Vec::with_capacity(xs.len());
    for &x in xs {
        let upper = (x * m).floor() as usize;
        let s: f64 = (lower..=upper)
            .map(|k| (center.0 - a[k - 1]) + 2.0 * (center.1 - b[k - 1]))
            .sum();
        values.push(m * s / unit);
    }
    Ok(FieldPath { x: xs.to_vec(), values })
}

pub fn field_clt_pipeline(exp: &Experiment) -> Result<Report> {
    let v = &exp.potential;
    let consts = scaling_constants(v)?;
    let n = exp.n;
    let fs = &exp.field;
    let scaling = field_scaling(&consts, n, fs.normalization);
    let lower = field_lower_index(n, fs.cutoff_c);
    let top = (fs.x_max * scaling.0).floor() as usize;
    if top < lower {
        return Err(Error::config(
            "field.cutoff_c",
            format!("lower index {lower} exceeds the last summed index {top}"),
        ));
    }
    if top >= n {
        return Err(Error::config("field.x_max", "summation range exceeds the matrix"));
    }
    let xs: Vec<f64> = (1..=fs.points).map(|i| fs.x_max * i as f64 / fs.points as f64).collect();
    let center = (consts.a0, consts.b0);
    let mut report = Report::new(ExperimentKind::FieldClt.name());

    let paths: Vec<FieldPath> = if exp.beta.is_infinite() {
        let t = minimize_h(v, n, f64::INFINITY)?.t;
        vec![field_path(t.diag(), t.offdiag(), center, scaling, lower, &xs)?]
    } else if v.as_quadratic().is_some() {
        (0..exp.matrices)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(exp.seed, MATRIX_STREAMS + i as u64);
                let p = sample_de_prefix(v, n, exp.beta, top, &mut rng)?;
                field_path(&p.a, &p.b, center, scaling, lower, &xs)
            })
            .collect::<Result<_>>()?
    } else {
        let reps = mcmc_replicas(&exp.model()?, &exp.mcmc, exp.matrices, exp.seed, MATRIX_STREAMS, 0)?;
        let ess: Vec<f64> = reps.iter().map(|r| r.ess).collect();
        report.stat("min_ess", ess.iter().copied().fold(f64::INFINITY, f64::min));
        reps.iter()
            .map(|r| field_path(r.t.diag(), r.t.offdiag(), center, scaling, lower, &xs))
            .collect::<Result<_>>()?
    };

    let (mean_target, var_target) = match fs.normalization {
        FieldNormalization::Scaled => (0.5, if exp.beta.is_infinite() { 0.0 } else { 4.0 / exp.beta }),
        FieldNormalization::Simple => (0.5 * consts.tau, if exp.beta.is_infinite() { 0.0 } else { consts.sigma2(exp.beta) }),
    };
    // lattice forms of the limit curves: the drift of term k is k/m², so the
    // mean is C g(x) with g(x) = 2 Σ_{k=lower}^{⌊xm⌋} k/m² → x² - x_c² and C = 1/2; the
    // variance grows with the lattice time t(x) = #terms/m
    let m = scaling.0;
    let upper = |x: f64| (x * m).floor() as usize;
    let g: Vec<f64> = xs
        .iter()
        .map(|&x| (lower..=upper(x)).map(|k| 2.0 * k as f64 / (m * m)).sum())
        .collect();
    let time: Vec<f64> = xs
        .iter()
        .map(|&x| (upper(x) + 1).saturating_sub(lower) as f64 / m)
        .collect();
    let mut means = Vec::with_capacity(xs.len());
    let mut vars = Vec::with_capacity(xs.len());
    let mut incr_vars = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let col: Vec<f64> = paths.iter().map(|p| p.values[i]).collect();
        let inc: Vec<f64> = paths
            .iter()
            .map(|p| p.values[i] - if i > 0 { p.values[i - 1] } else { 0.0 })
            .collect();
        let spread = |v: &[f64]| if v.len() > 1 { variance(v) } else { 0.0 };
        means.push(mean(&col));
        vars.push(spread(&col));
        incr_vars.push(spread(&inc));
    }
    // generalized least squares on the independent increments of a Brownian
    // path with drift
    let (mut num_c, mut den_c, mut inc_var_sum, mut t_sum) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        let prev = |v: &[f64]| if i > 0 { v[i - 1] } else { 0.0 };
        let (dm, dg, dt) = (means[i] - prev(&means), g[i] - prev(&g), time[i] - prev(&time));
        if dt > 0.0 {
            num_c += dm * dg / dt;
            den_c += dg * dg / dt;
            inc_var_sum += incr_vars[i];
            t_sum += dt;
        }
    }
    let mean_coef = num_c / den_c;
    let var_slope = inc_var_sum / t_sum;

    report.stat("normalization", format!("{:?}", fs.normalization).to_lowercase());
    report.stat("lower_index", lower);
    report.stat("summed_terms", top + 1 - lower);
    report.stat("samples", paths.len());
    report.stat("mean_coefficient", mean_coef);
    report.stat("mean_coefficient_target", mean_target);
    report.stat(
        "mean_coefficient_standard_error",
        (var_slope / (paths.len() as f64 * den_c)).sqrt(),
    );
    report.stat("variance_slope", var_slope);
    report.stat("variance_slope_target", var_target);
    let tol = exp.tolerances.field_relative;
    report.check(Check::new(
        "mean_coefficient_relative_error",
        (mean_coef / mean_target - 1.0).abs(),
        Relation::Le,
        tol,
    ));
    if exp.beta.is_infinite() {
        let vmax = vars.iter().copied().fold(0.0, f64::max);
        report.check(Check::new("deterministic_variance", vmax, Relation::Le, 1e-12));
    } else {
        report.check(Check::new(
            "variance_slope_relative_error",
            (var_slope / var_target - 1.0).abs(),
            Relation::Le,
            tol,
        ));
    }

    let mut data = DataTable::new(&["x", "mean", "variance", "target_mean", "target_variance"]);
    for i in 0..xs.len() {
        let x = xs[i];
        data.push(vec![
            num(x),
            num(means[i]),
            num(vars[i]),
            num(mean_target * g[i]),
            num(var_target * time[i]),
        ]);
    }
    report.data = data;
    Ok(report)
}

pub fn bound_checks_pipeline(exp: &Experiment) -> Result<Report> {
    let v = &exp.potential;
    let b = &exp.bounds;
    let tol = &exp.tolerances;
    let mut report = Report::new(ExperimentKind::BoundChecks.name());
    let mut data = DataTable::new(&["check", "parameter", "value"]);

    let quad: Vec<_> = b
        .quadrature_m
        .par_iter()
        .map(|&m| quadrature_bound_check(v, m))
        .collect::<Result<_>>()?;
    let slack = fit_quadrature_slack(&quad);
    report.stat("quadrature_slack", slack);
    for q in &quad {
        data.push(vec!["quadrature_lambda_max".into(), q.m.to_string(), num(q.lambda_max)]);
        data.push(vec!["quadrature_bound".into(), q.m.to_string(), num(q.bound)]);
        data.push(vec!["quadrature_scaled_gap".into(), q.m.to_string(), num(q.scaled_gap)]);
        data.push(vec!["quadrature_reflecting_lambda_max".into(), q.m.to_string(), num(q.lambda_max_reflecting)]);
        report.check(Check::new(
            format!("quadrature_scaled_gap_m{}", q.m),
            q.scaled_gap,
            Relation::Ge,
            tol.quadrature_gap,
        ));
    }

    let fek = minimize_h(v, b.fekete_n, f64::INFINITY)?;
    let fc = fekete_stationarity(v, &fek.t)?;
    report.stat("fekete_min_gap", fc.min_gap);
    data.push(vec!["fekete_residual".into(), b.fekete_n.to_string(), num(fc.max_residual)]);
    data.push(vec!["fekete_weight_deviation".into(), b.fekete_n.to_string(), num(fc.max_weight_deviation)]);
    let mut res = Check::new("fekete_stationarity", fc.max_residual, Relation::Le, tol.fekete_residual);
    if fc.clustered {
        res = res.with_note("clustered eigenvalues: residual ill-conditioned");
    }
    report.check(res);
    report.check(Check::new("fekete_equal_weights", fc.max_weight_deviation, Relation::Le, tol.fekete_weights));

    let decay = boundary_decay_rate(v, b.decay_ell, b.decay_delta)?;
    for (k, d) in decay.differences.iter().enumerate() {
        data.push(vec!["decay_difference".into(), (k + 1).to_string(), num(*d)]);
    }
    report.stat("decay_saturated", decay.saturated);
    let mut dc = Check::new("boundary_decay_slope", decay.slope, Relation::Lt, tol.decay_slope);
    if decay.saturated {
        dc = dc.with_note("boundary response below rounding at every distance: decay faster than measurable");
    }
    report.check(dc);

    if v.as_quadratic().is_some() {
        let consts = scaling_constants(v)?;
        // the configured m plus a sweep around n^{1/3}, where the order is
        // expected to hold
        let third = (b.truncation_n as f64).cbrt().floor() as usize;
        let mut ms = vec![b.truncation_m, (third / 2).max(2), third.max(2), 2 * third];
        ms.sort_unstable();
        ms.dedup();
        ms.retain(|m| *m <= b.truncation_n);
        let margins: Vec<Vec<f64>> = (0..exp.matrices)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(exp.seed, MATRIX_STREAMS + i as u64);
                let t = sample_quadratic_de(v, b.truncation_n, exp.beta, &mut rng)?;
                ms.iter()
                    .map(|&m| truncation_bound_margin(&t, &consts, m, b.truncation_kappa))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let count = margins.len().max(1) as f64;
        let mut by_m = Vec::new();
        for (j, &m) in ms.iter().enumerate() {
            let ok = margins.iter().filter(|r| r[j] >= -1e-8).count();
            by_m.push((m, ok as f64 / count));
        }
        report.stat("truncation_frequency_by_m", &by_m);
        let jm = ms.iter().position(|m| *m == b.truncation_m).expect("configured m is in the sweep");
        for (i, r) in margins.iter().enumerate() {
            data.push(vec!["truncation_margin".into(), i.to_string(), num(r[jm])]);
        }
        report.stat("truncation_margin_min", margins.iter().map(|r| r[jm]).fold(f64::INFINITY, f64::min));
        report.check(Check::new(
            "truncation_domination_frequency",
            by_m[jm].1,
            Relation::Ge,
            tol.truncation_frequency,
        ));
    } else {
        report.stat("truncation_margin", "skipped: needs an exact sampler (quadratic V)");
    }
    report.data = data;
    Ok(report)
}

pub fn equilibrium_tables_pipeline(exp: &Experiment) -> Result<Report> {
    let v = &exp.potential;
    let eq = &exp.equilibrium;
    let rows = equilibrium_table(v, &eq.x)?;
    let mut report = Report::new(ExperimentKind::EquilibriumTables.name());
    let mut data = DataTable::new(&[
        "x", "a", "b", "a_prime", "b_prime", "edge", "left", "right", "s11", "s12", "s22",
    ]);
    for r in &rows {
        let m = &r.minimizer;
        data.push(
            [m.x, m.a, m.b, m.a_prime, m.b_prime, m.edge(), m.left_edge(), m.edge(), r.sigma.s11, r.sigma.s12, r.sigma.s22]
                .iter()
                .map(|x| num(*x))
                .collect(),
        );
    }
    report.data = data;

    let m0 = solve_local_minimizer(v, 0.0)?;
    let (l0, r0) = (m0.left_edge(), m0.edge());
    report.stat("support_left", l0);
    report.stat("support_right", r0);

    let t = minimize_h(v, eq.histogram_n, f64::INFINITY)?.t;
    let ev = t.eigenvalues();
    let outside = ev.iter().filter(|l| **l < l0 - eq.margin || **l > r0 + eq.margin).count();
    let frac = outside as f64 / ev.len() as f64;
    report.stat("histogram_n", eq.histogram_n);
    report.stat("spectrum_min", ev[0]);
    report.stat("spectrum_max", ev[ev.len() - 1]);
    report.check(Check::new("mass_outside_support", frac, Relation::Le, exp.tolerances.outside_mass));

    let pad = 0.1 * (r0 - l0);
    let (lo, hi) = (l0 - pad, r0 + pad);
    let bins = eq.histogram_bins;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for l in &ev {
        let k = ((l - lo) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let mut hist = DataTable::new(&["bin_left", "bin_right", "density"]);
    for (k, c) in counts.iter().enumerate() {
        let left = lo + k as f64 * width;
        hist.push(vec![num(left), num(left + width), num(*c as f64 / (ev.len() as f64 * width))]);
    }
    report.extra.push(("histogram.csv".into(), hist));
    Ok(report)
}
