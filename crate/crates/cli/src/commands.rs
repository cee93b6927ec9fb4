//! One function per subcommand: run the experiment, collect tables,
//! criteria and a JSON summary.

use std::time::Instant;

use serde_json::{json, Value};

use kpzlab::experiments::{
    self, cross_validation, geodesic_batch, limit_diagnostics, Criterion, Quantity,
};
use kpzlab::limit::{limit_samples, mu_from, nu_from, MomentEstimate};
use kpzlab::selftest::{check_composition, check_geodesics, check_oracle, run_estimator_gates};
use kpzlab::stats::KsResult;
use kpzlab::{Rng, SampledPath};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{num, write_outputs, Table};

/// Fork of the master generator used by the boundary problem.
pub const TAG_LIMIT: u64 = 0x11E1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Experiment {
    /// Exact grid identities and estimator gates.
    Selftest,
    /// Mean alpha-variation of pi or W across scales.
    Variation,
    /// Tail exponents of |pi(s)|, |I| and |W|.
    Tails,
    /// Rescaled environment against Bessel-3 and Brownian laws.
    Environment,
    /// Boundary problem samples and the nu, mu cross-validation.
    #[command(name = "limit-env")]
    LimitEnv,
    /// Correlation of increments at two separated times.
    Independence,
    /// Hölder statistics on nested resolutions.
    Holder,
    /// One-point laws under the 1:2:3 rescaling and the flip symmetry.
    Invariance,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Selftest,
        Experiment::Variation,
        Experiment::Tails,
        Experiment::Environment,
        Experiment::LimitEnv,
        Experiment::Independence,
        Experiment::Holder,
        Experiment::Invariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Selftest => "selftest",
            Experiment::Variation => "variation",
            Experiment::Tails => "tails",
            Experiment::Environment => "environment",
            Experiment::LimitEnv => "limit-env",
            Experiment::Independence => "independence",
            Experiment::Holder => "holder",
            Experiment::Invariance => "invariance",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub criteria: Vec<Criterion>,
    pub results: Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        experiments::all_passed(&self.criteria)
    }
}

pub fn master(cfg: &ExperimentConfig) -> Rng {
    Rng::new(cfg.seed, 0)
}

fn ks_json(k: &KsResult) -> Value {
    json!({"statistic": k.statistic, "threshold": k.threshold, "level": k.level})
}

fn moment_json(m: &MomentEstimate) -> Value {
    json!({"mean": m.mean, "std_error": m.std_error, "n_samples": m.n_samples, "exponent": m.exponent})
}

pub fn run_experiment(e: Experiment, cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    match e {
        Experiment::Selftest => selftest(cfg),
        Experiment::Variation => variation(cfg, workers),
        Experiment::Tails => tails(cfg, workers),
        Experiment::Environment => environment(cfg, workers),
        Experiment::LimitEnv => limit_env(cfg, workers),
        Experiment::Independence => independence(cfg, workers),
        Experiment::Holder => holder(cfg, workers),
        Experiment::Invariance => invariance(cfg, workers),
    }
}

/// Runs, writes outputs and returns the outcome.
pub fn run(e: Experiment, cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let out = run_experiment(e, cfg, workers)?;
    write_outputs(
        e.name(),
        cfg,
        &out.tables,
        &out.criteria,
        out.results.clone(),
        start.elapsed().as_secs_f64(),
    )?;
    Ok(out)
}

fn selftest(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let rng = master(cfg);
    let mut checks = vec![check_oracle(&rng, cfg.oracle_instances)?];
    let (comp, tri) = check_composition(&rng, cfg.triples)?;
    let (value, add, ovl) = check_geodesics(&rng, cfg.geodesics)?;
    checks.extend([comp, tri, value, add, ovl]);
    checks.extend(run_estimator_gates(
        &rng,
        cfg.gate_samples,
        cfg.meander_samples,
        cfg.ks_repeats,
        cfg.tail_method.into(),
    )?);
    let mut t = Table::new(&["check", "instances", "failures", "max_error", "tolerance"]);
    for c in &checks {
        t.push(vec![
            c.name.clone(),
            c.instances.to_string(),
            c.failures.to_string(),
            num(c.max_error),
            num(c.tolerance),
        ]);
    }
    Ok(Outcome {
        tables: vec![t],
        criteria: checks.iter().map(|c| c.criterion()).collect(),
        results: Value::Null,
    })
}

fn path_table(suffix: &str, paths: &[SampledPath], count: usize) -> Table {
    let mut t = Table::named(suffix, &["t", "value", "replica"]);
    for (i, p) in paths.iter().take(count).enumerate() {
        for (k, v) in p.values().iter().enumerate() {
            t.push(vec![num(p.time(k)), num(*v), i.to_string()]);
        }
    }
    t
}

fn variation(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let batch = geodesic_batch(&master(cfg), &cfg.field_params(), cfg.n_samples, workers)?;
    let q = Quantity::from(cfg.quantity);
    let table = batch.variation_table(q, &cfg.alphas, &cfg.eps_list, (cfg.interval[0], cfg.interval[1]))?;
    let mut t = Table::new(&["alpha", "eps", "mean_V", "se_V", "n"]);
    for r in &table.rows {
        t.push(vec![num(r.alpha), num(r.eps), num(r.mean), num(r.se), r.n.to_string()]);
    }
    let slopes: Vec<Value> = cfg
        .alphas
        .iter()
        .map(|&a| json!({"alpha": a, "slope": table.slope(a).ok()}))
        .collect();
    let constant = table.constant().map(|(m, se)| json!({"estimate": m, "std_error": se}));
    Ok(Outcome {
        tables: vec![
            t,
            path_table("paths-pi", &batch.pi, cfg.stored_paths),
            path_table("paths-W", &batch.w, cfg.stored_paths),
        ],
        criteria: table.criteria(),
        results: json!({
            "quantity": q.name(),
            "slopes": slopes,
            "constant": constant,
            "additivity_error": batch.additivity_error,
        }),
    })
}

fn tails(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let batch = geodesic_batch(&master(cfg), &cfg.field_params(), cfg.n_samples, workers)?;
    let inc = batch.increments(cfg.s, cfg.eps)?;
    let report = inc.tails((cfg.band[0], cfg.band[1]), cfg.tail_method.into())?;
    let mut surv = Table::new(&["quantity", "m", "survival"]);
    let mut fit = Table::named("fit", &["quantity", "beta_hat", "r_squared", "band_lo", "band_hi"]);
    for r in &report.rows {
        for &(m, s) in &r.survival {
            surv.push(vec![r.quantity.to_string(), num(m), num(s)]);
        }
        fit.push(vec![
            r.quantity.to_string(),
            num(r.fit.beta_hat),
            num(r.fit.r_squared),
            num(r.fit.band.0),
            num(r.fit.band.1),
        ]);
    }
    let mut incs = Table::named("increments", &["replica", "I", "W"]);
    for (k, (i, w)) in inc.i.iter().zip(&inc.w).enumerate() {
        incs.push(vec![k.to_string(), num(*i), num(*w)]);
    }
    let fits: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "quantity": r.quantity,
                "beta_hat": r.fit.beta_hat,
                "intercept": r.fit.intercept,
                "r_squared": r.fit.r_squared,
                "target": [r.target.0, r.target.1],
            })
        })
        .collect();
    Ok(Outcome {
        tables: vec![surv, fit, incs],
        criteria: report.criteria(),
        results: json!({
            "s": inc.s,
            "eps": inc.eps,
            "lines": inc.lines,
            "fits": fits,
            "additivity_error": inc.additivity_error,
        }),
    })
}

fn environment(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let rep = experiments::environment_experiment(
        &master(cfg),
        &cfg.field_params(),
        cfg.r,
        cfg.eps,
        cfg.n_samples,
        &cfg.probes,
        cfg.level,
        workers,
    )?;
    let mut t = Table::new(&["z", "stat_bessel", "stat_brownian", "threshold"]);
    for r in &rep.rows {
        t.push(vec![
            num(r.z),
            num(r.bessel.statistic),
            num(r.brownian.statistic),
            num(r.bessel.threshold),
        ]);
    }
    let rows: Vec<Value> = rep
        .rows
        .iter()
        .map(|r| json!({"z_requested": r.z_requested, "z": r.z, "bessel": ks_json(&r.bessel), "brownian": ks_json(&r.brownian)}))
        .collect();
    Ok(Outcome {
        tables: vec![t],
        criteria: rep.criteria(),
        results: json!({
            "r": rep.r,
            "eps": rep.eps,
            "rows": rows,
            "sign_violations": rep.sign_violations,
            "centering_violations": rep.centering_violations,
        }),
    })
}

fn limit_env(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let rng = master(cfg).fork(TAG_LIMIT);
    let lp = cfg.limit_params();
    let samples = limit_samples(&rng, &lp, cfg.limit_samples, workers)?;
    let (nu, mu) = (nu_from(&samples)?, mu_from(&samples)?);
    let diag = limit_diagnostics(
        &rng,
        &lp,
        &samples,
        cfg.truncation_checked,
        cfg.truncation_extra,
        cfg.level,
        workers,
    )?;

    // variation route at the smallest scale of eps_list
    let batch = geodesic_batch(&master(cfg), &cfg.field_params(), cfg.n_samples, workers)?;
    let eps = cfg.eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let interval = (cfg.interval[0], cfg.interval[1]);
    let route = |q: Quantity| -> Result<(f64, f64), CliError> {
        let t = batch.variation_table(q, &[q.critical_alpha()], &[eps], interval)?;
        Ok(t.constant().expect("one row per table"))
    };
    let (nu_var, mu_var) = (route(Quantity::Path)?, route(Quantity::Weight)?);

    let mut t = Table::new(&["replica", "X", "Y", "length"]);
    for (i, s) in samples.iter().enumerate() {
        t.push(vec![i.to_string(), num(s.x), num(s.y), num(s.length)]);
    }
    let mut summary = Table::named("summary", &["nu_hat", "nu_se", "mu_hat", "mu_se"]);
    summary.push(vec![num(nu.mean), num(nu.std_error), num(mu.mean), num(mu.std_error)]);

    let mut criteria = vec![
        cross_validation("nu", nu_var, &nu),
        cross_validation("mu", mu_var, &mu),
    ];
    criteria.extend(diag.criteria());
    Ok(Outcome {
        tables: vec![t, summary],
        criteria,
        results: json!({
            "nu_limit": moment_json(&nu),
            "mu_limit": moment_json(&mu),
            "nu_variation": {"estimate": nu_var.0, "std_error": nu_var.1, "eps": eps},
            "mu_variation": {"estimate": mu_var.0, "std_error": mu_var.1, "eps": eps},
            "truncation": {"checked": diag.truncation_checked, "changed": diag.truncation_changed, "extra": diag.extra},
            "flip": ks_json(&diag.flip),
            "mean_length": {"mean": diag.mean_length.0, "std_error": diag.mean_length.1},
        }),
    })
}

fn independence(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let rng = master(cfg);
    let res = experiments::independence_experiment(
        &rng,
        &cfg.field_params(),
        (cfg.times[0], cfg.times[1]),
        cfg.eps,
        cfg.n_samples,
        cfg.resamples,
        workers,
    )?;
    let mut t = Table::new(&["t1", "t2", "eps", "corr", "ci_lo", "ci_hi"]);
    t.push(vec![
        num(res.t1),
        num(res.t2),
        num(res.eps),
        num(res.ci.estimate),
        num(res.ci.lo),
        num(res.ci.hi),
    ]);
    Ok(Outcome {
        tables: vec![t],
        criteria: res.criteria(),
        results: json!({"corr": res.ci.estimate, "ci": [res.ci.lo, res.ci.hi], "resamples": res.ci.resamples}),
    })
}

fn holder(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let rep = experiments::holder_experiment(&master(cfg), &cfg.field_params(), &cfg.resolutions, cfg.n_samples, workers)?;
    let mut t = Table::new(&[
        "resolution",
        "median_ratio_pi",
        "median_ratio_W",
        "median_logcorrected_pi",
        "median_logcorrected_W",
    ]);
    for r in &rep.rows {
        t.push(vec![
            r.resolution.to_string(),
            num(r.median_ratio_pi),
            num(r.median_ratio_w),
            num(r.median_logcorrected_pi),
            num(r.median_logcorrected_w),
        ]);
    }
    Ok(Outcome {
        tables: vec![t],
        criteria: rep.criteria(),
        results: json!({"refinement_violations": rep.refinement_violations}),
    })
}

fn invariance(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome, CliError> {
    let [x, s, y, tt] = cfg.flip_query;
    let rep = experiments::invariance_experiment(
        &master(cfg),
        &cfg.field_params(),
        (cfg.scaling_times[0], cfg.scaling_times[1]),
        (x, s, y, tt),
        cfg.n_samples,
        cfg.level,
        workers,
    )?;
    let mut t = Table::new(&["test", "statistic", "threshold"]);
    t.push(vec!["scaling".into(), num(rep.scaling.statistic), num(rep.scaling.threshold)]);
    t.push(vec!["flip".into(), num(rep.flip.statistic), num(rep.flip.threshold)]);
    Ok(Outcome {
        tables: vec![t],
        criteria: rep.criteria(),
        results: json!({"scaling": ks_json(&rep.scaling), "flip": ks_json(&rep.flip)}),
    })
}
