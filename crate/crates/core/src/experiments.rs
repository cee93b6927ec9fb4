//! Replica runner and the experiments assembled from the other modules.
//!
//! Replica `i` of an experiment with master generator `rng` draws all of its
//! randomness from `rng.replica(i)` (auxiliary draws from forks of it), and
//! results are merged in replica order, so every output is independent of
//! the worker count.

use rayon::prelude::*;

use crate::analysis::{holder_statistic, rescale_environment, variation, weight_function};
use crate::error::{arg, range, Error, Result};
use crate::field::{FieldParams, LandscapeQuery, LppField, TieBreak};
use crate::path::SampledPath;
use crate::process::{sample_bessel3, sample_brownian};
use crate::rng::Rng;
use crate::limit::{LimitParams, LimitSample, MomentEstimate};
use crate::stats::{
    bootstrap_pearson, empirical_survival, fit_tail_exponent_with, linear_fit, median, two_sample_distance,
    BootstrapCi, KsResult, Moments, TailFit, TailMethod,
};

const TAG_REFERENCE: u64 = 0x5EF0;
const TAG_BOOTSTRAP: u64 = 0xB007;

/// Runs `job(0..n)` on `workers` threads (0 = all cores) and returns the
/// results in index order. The first error in index order wins.
pub fn replicate<T, F>(n: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers == 1 {
        return (0..n).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(job).collect())
}

/// One named pass/fail check.
#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn all_passed(c: &[Criterion]) -> bool {
    c.iter().all(|c| c.passed)
}

/// The leftmost geodesic `(0, 0) -> (0, 1)` of a fresh field.
pub fn sample_geodesic(rng: &Rng, params: &FieldParams) -> Result<(LppField, crate::field::Geodesic)> {
    let field = LppField::build(rng, params)?;
    let g = field.landscape_geodesic(LandscapeQuery::new(0.0, 0.0, 0.0, 1.0)?, TieBreak::Leftmost)?;
    Ok((field, g))
}

/// Geodesic paths and weight functions of independent replicas.
#[derive(Clone, Debug)]
pub struct GeodesicBatch {
    pub params: FieldParams,
    pub pi: Vec<SampledPath>,
    pub w: Vec<SampledPath>,
    /// Largest deviation of a partition sum of weight increments from the
    /// geodesic value, over replicas.
    pub additivity_error: f64,
}

/// Number of lines in a time window `eps^3` (at least one).
pub fn kpz_lines(n: usize, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return arg(format!("scale must be positive, got {eps}"));
    }
    let x = eps.powi(3) * n as f64;
    if x < 1.0 - 1e-9 {
        return arg(format!(
            "eps^3 = {} is below the line spacing 1/{n}",
            eps.powi(3)
        ));
    }
    Ok(x.round() as usize)
}

/// `eps` with `eps^3` rounded to whole lines.
pub fn effective_eps(n: usize, eps: f64) -> Result<f64> {
    Ok((kpz_lines(n, eps)? as f64 / n as f64).cbrt())
}

pub fn geodesic_batch(rng: &Rng, params: &FieldParams, n_samples: usize, workers: usize) -> Result<GeodesicBatch> {
    params.validate()?;
    let out = replicate(n_samples, workers, |i| {
        let (field, g) = sample_geodesic(&rng.replica(i as u64), params)?;
        let w = weight_function(&field, &g)?;
        // partition into blocks of 8 lines
        let v = w.values();
        let mut total = 0.0;
        let mut k = 0;
        while k + 1 < v.len() {
            let next = (k + 8).min(v.len() - 1);
            total += v[next] - v[k];
            k = next;
        }
        Ok((g.path, w, (total - g.value).abs()))
    })?;
    let mut batch = GeodesicBatch {
        params: *params,
        pi: Vec::with_capacity(n_samples),
        w: Vec::with_capacity(n_samples),
        additivity_error: 0.0,
    };
    for (p, w, e) in out {
        batch.pi.push(p);
        batch.w.push(w);
        batch.additivity_error = batch.additivity_error.max(e);
    }
    Ok(batch)
}

/// Rescaled increments at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementSamples {
    pub s: f64,
    /// Effective scale.
    pub eps: f64,
    pub lines: usize,
    /// `eps^-2 (pi(s) - pi(s + eps^3))`.
    pub i: Vec<f64>,
    /// `eps^-1 (W(s + eps^3) - W(s))`.
    pub w: Vec<f64>,
    /// `pi(s)`.
    pub pi_s: Vec<f64>,
    pub additivity_error: f64,
}

impl GeodesicBatch {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn increments(&self, s: f64, eps: f64) -> Result<IncrementSamples> {
        let n = self.params.n;
        let lines = kpz_lines(n, eps)?;
        let eps = (lines as f64 / n as f64).cbrt();
        let k = (s * n as f64 + 1e-9).floor() as usize;
        if !(0.0..=1.0).contains(&s) || k + lines > n {
            return range(format!("window [{s}, {s} + eps^3] leaves [0, 1]"));
        }
        let (e1, e2) = (eps, eps * eps);
        let mut out = IncrementSamples {
            s,
            eps,
            lines,
            i: Vec::with_capacity(self.len()),
            w: Vec::with_capacity(self.len()),
            pi_s: Vec::with_capacity(self.len()),
            additivity_error: self.additivity_error,
        };
        for (p, w) in self.pi.iter().zip(&self.w) {
            let (p, w) = (p.values(), w.values());
            out.i.push((p[k] - p[k + lines]) / e2);
            out.w.push((w[k + lines] - w[k]) / e1);
            out.pi_s.push(p[k]);
        }
        Ok(out)
    }
}

pub fn increment_samples(
    rng: &Rng,
    params: &FieldParams,
    s: f64,
    eps: f64,
    n_samples: usize,
    workers: usize,
) -> Result<IncrementSamples> {
    kpz_lines(params.n, eps)?;
    geodesic_batch(rng, params, n_samples, workers)?.increments(s, eps)
}

/// Tail fit of one increment quantity against its target exponent band.
#[derive(Clone, Debug, PartialEq)]
pub struct TailRow {
    pub quantity: &'static str,
    pub fit: TailFit,
    pub target: (f64, f64),
    /// Full empirical survival curve `(m, P(Z > m))`.
    pub survival: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub s: f64,
    pub eps: f64,
    pub lines: usize,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        self.rows
            .iter()
            .map(|r| {
                Criterion::new(
                    format!("tail exponent |{}|", r.quantity),
                    (r.target.0..=r.target.1).contains(&r.fit.beta_hat),
                    format!(
                        "beta_hat {:.4} (target [{}, {}]), r^2 {:.4}",
                        r.fit.beta_hat, r.target.0, r.target.1, r.fit.r_squared
                    ),
                )
            })
            .collect()
    }
}

impl IncrementSamples {
    /// Tail exponents of `|pi(s)|`, `|I|` and `|W|`.
    pub fn tails(&self, band: (f64, f64), method: TailMethod) -> Result<TailReport> {
        let abs = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x.abs()).collect() };
        let mut rows = Vec::new();
        for (quantity, data, target) in [
            ("pi", abs(&self.pi_s), (2.2, 3.8)),
            ("I", abs(&self.i), (2.2, 3.8)),
            ("W", abs(&self.w), (1.1, 1.9)),
        ] {
            rows.push(TailRow {
                quantity,
                fit: fit_tail_exponent_with(&data, band, method)?,
                target,
                survival: empirical_survival(&data, (0.0, 1.0)),
            });
        }
        Ok(TailReport {
            s: self.s,
            eps: self.eps,
            lines: self.lines,
            rows,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// The geodesic path `pi`.
    Path,
    /// The weight function `W`.
    Weight,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Path => "pi",
            Quantity::Weight => "W",
        }
    }

    /// Exponent at which the variation has a nontrivial limit.
    pub fn critical_alpha(self) -> f64 {
        match self {
            Quantity::Path => 1.5,
            Quantity::Weight => 3.0,
        }
    }

    fn path<'a>(self, b: &'a GeodesicBatch, i: usize) -> &'a SampledPath {
        match self {
            Quantity::Path => &b.pi[i],
            Quantity::Weight => &b.w[i],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationRow {
    pub alpha: f64,
    pub eps: f64,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    /// Same statistics on the first half of the interval.
    pub half_mean: f64,
    pub half_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationTable {
    pub quantity: Quantity,
    pub interval: (f64, f64),
    pub rows: Vec<VariationRow>,
}

impl VariationTable {
    /// Least-squares slope of `log mean V` against `log eps` for `alpha`.
    pub fn slope(&self, alpha: f64) -> Result<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| r.alpha == alpha)
            .map(|r| (r.eps.ln(), r.mean.ln()))
            .unzip();
        if x.len() < 2 || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Estimation(format!(
                "no usable slope for alpha = {alpha}"
            )));
        }
        Ok(linear_fit(&x, &y)?.slope)
    }

    pub fn row(&self, alpha: f64, eps: f64) -> Option<&VariationRow> {
        self.rows.iter().find(|r| r.alpha == alpha && r.eps == eps)
    }

    pub fn smallest_eps(&self) -> f64 {
        self.rows.iter().map(|r| r.eps).fold(f64::INFINITY, f64::min)
    }

    /// Estimate of the variation constant per unit time: the mean critical
    /// variation at the smallest scale divided by the interval length.
    pub fn constant(&self) -> Option<(f64, f64)> {
        let r = self.row(self.quantity.critical_alpha(), self.smallest_eps())?;
        let len = self.interval.1 - self.interval.0;
        Some((r.mean / len, r.se / len))
    }

    /// Slope window and half-interval criteria: the critical exponent has
    /// `|slope| <= 0.25`; the exponents below and above it have slopes
    /// `<= -0.3` and `>= 0.3`.
    pub fn criteria(&self) -> Vec<Criterion> {
        let crit = self.quantity.critical_alpha();
        let q = self.quantity.name();
        let mut alphas: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !alphas.contains(&r.alpha) {
                alphas.push(r.alpha);
            }
        }
        let mut out = Vec::new();
        for &a in &alphas {
            let slope = self.slope(a);
            let (passed, rule) = match slope {
                Ok(s) if a == crit => (s.abs() <= 0.25, "|slope| <= 0.25"),
                Ok(s) if a < crit => (s <= -0.3, "slope <= -0.3"),
                Ok(s) => (s >= 0.3, "slope >= 0.3"),
                Err(_) => (false, "slope undefined"),
            };
            out.push(Criterion::new(
                format!("variation slope {q} alpha={a}"),
                passed,
                format!("slope {:.4} ({rule})", slope.unwrap_or(f64::NAN)),
            ));
        }
        if let Some(r) = self.row(crit, self.smallest_eps()) {
            let diff = r.half_mean - r.mean / 2.0;
            let tol = 1.96 * (r.half_se * r.half_se + r.se * r.se / 4.0).sqrt();
            out.push(Criterion::new(
                format!("variation linearity {q} alpha={crit}"),
                diff.abs() <= tol,
                format!(
                    "V(half) = {:.5} +- {:.5}, V(full)/2 = {:.5} +- {:.5}",
                    r.half_mean,
                    1.96 * r.half_se,
                    r.mean / 2.0,
                    1.96 * r.se / 2.0
                ),
            ));
        }
        out
    }
}

impl GeodesicBatch {
    pub fn variation_table(
        &self,
        quantity: Quantity,
        alphas: &[f64],
        eps_list: &[f64],
        interval: (f64, f64),
    ) -> Result<VariationTable> {
        let (a, b) = interval;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return arg(format!("interval [{a}, {b}] must lie in [0, 1]"));
        }
        if self.len() < 2 {
            return arg("a variation table needs at least two replicas");
        }
        if alphas.iter().any(|&x| !(x > 0.0)) {
            return arg("variation exponents must be positive");
        }
        let mid = (a + b) / 2.0;
        let mut rows = Vec::new();
        for &eps in eps_list {
            crate::analysis::scale_steps(1.0 / self.params.n as f64, eps)?;
            let mut full = vec![Moments::default(); alphas.len()];
            let mut half = vec![Moments::default(); alphas.len()];
            for i in 0..self.len() {
                let p = quantity.path(self, i);
                let pf = p.restrict(a, b)?;
                let ph = p.restrict(a, mid)?;
                for (k, &alpha) in alphas.iter().enumerate() {
                    full[k].push(variation(&pf, alpha, eps)?);
                    half[k].push(variation(&ph, alpha, eps)?);
                }
            }
            for (k, &alpha) in alphas.iter().enumerate() {
                rows.push(VariationRow {
                    alpha,
                    eps,
                    mean: full[k].mean(),
                    se: full[k].std_error(),
                    n: full[k].count as usize,
                    half_mean: half[k].mean(),
                    half_se: half[k].std_error(),
                });
            }
        }
        Ok(VariationTable {
            quantity,
            interval,
            rows,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn variation_sweep(
    rng: &Rng,
    params: &FieldParams,
    quantity: Quantity,
    alphas: &[f64],
    eps_list: &[f64],
    interval: (f64, f64),
    n_samples: usize,
    workers: usize,
) -> Result<VariationTable> {
    for &eps in eps_list {
        crate::analysis::scale_steps(1.0 / params.n as f64, eps)?;
    }
    geodesic_batch(rng, params, n_samples, workers)?.variation_table(quantity, alphas, eps_list, interval)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndependenceResult {
    pub t1: f64,
    pub t2: f64,
    pub eps: f64,
    pub ci: BootstrapCi,
}

impl IndependenceResult {
    pub fn criteria(&self) -> Vec<Criterion> {
        vec![Criterion::new(
            "independence",
            self.ci.estimate.abs() < 0.1 && self.ci.covers(0.0),
            format!(
                "corr {:.4}, 95% CI [{:.4}, {:.4}]",
                self.ci.estimate, self.ci.lo, self.ci.hi
            ),
        )]
    }
}

impl GeodesicBatch {
    /// Correlation of `|I_{t1, eps}|` and `|I_{t2, eps}|` with a percentile
    /// bootstrap interval drawn from a fork of `rng`.
    pub fn independence(&self, rng: &Rng, times: (f64, f64), eps: f64, resamples: usize) -> Result<IndependenceResult> {
        let (t1, t2) = times;
        let lines = kpz_lines(self.params.n, eps)? as f64 / self.params.n as f64;
        if !(0.0 < t1 && t1 + lines < t2 && t2 + lines <= 1.0) {
            return arg(format!(
                "times must satisfy 0 < t1, t1 + eps^3 < t2, t2 + eps^3 <= 1; got {t1}, {t2}"
            ));
        }
        let a = self.increments(t1, eps)?;
        let b = self.increments(t2, eps)?;
        let xa: Vec<f64> = a.i.iter().map(|v| v.abs()).collect();
        let xb: Vec<f64> = b.i.iter().map(|v| v.abs()).collect();
        let ci = bootstrap_pearson(&xa, &xb, resamples, 0.95, &rng.fork(TAG_BOOTSTRAP))?;
        Ok(IndependenceResult {
            t1,
            t2,
            eps: a.eps,
            ci,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn independence_experiment(
    rng: &Rng,
    params: &FieldParams,
    times: (f64, f64),
    eps: f64,
    n_samples: usize,
    resamples: usize,
    workers: usize,
) -> Result<IndependenceResult> {
    kpz_lines(params.n, eps)?;
    geodesic_batch(rng, params, n_samples, workers)?.independence(rng, times, eps, resamples)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderRow {
    /// Grid points per unit time.
    pub resolution: usize,
    pub median_ratio_pi: f64,
    pub median_ratio_w: f64,
    pub median_logcorrected_pi: f64,
    pub median_logcorrected_w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub rows: Vec<HolderRow>,
    /// Replicas on which a statistic decreased under refinement.
    pub refinement_violations: usize,
}

impl HolderReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        let inc = |f: fn(&HolderRow) -> f64| self.rows.windows(2).all(|w| f(&w[1]) > f(&w[0]));
        let spread = |f: fn(&HolderRow) -> f64| {
            let v: Vec<f64> = self.rows.iter().map(f).collect();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi / lo - 1.0
        };
        let list = |f: fn(&HolderRow) -> f64| {
            self.rows
                .iter()
                .map(|r| format!("{:.4}", f(r)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let ok = self.rows.len() >= 3;
        let (sp, sw) = (spread(|r| r.median_logcorrected_pi), spread(|r| r.median_logcorrected_w));
        vec![
            Criterion::new(
                "holder plain pi increasing",
                ok && inc(|r| r.median_ratio_pi),
                format!("medians [{}]", list(|r| r.median_ratio_pi)),
            ),
            Criterion::new(
                "holder log-corrected pi stable",
                ok && sp < 0.5,
                format!("medians [{}], change {:.3}", list(|r| r.median_logcorrected_pi), sp),
            ),
            Criterion::new(
                "holder plain W increasing",
                ok && inc(|r| r.median_ratio_w),
                format!("medians [{}]", list(|r| r.median_ratio_w)),
            ),
            Criterion::new(
                "holder log-corrected W stable",
                ok && sw < 0.5,
                format!("medians [{}], change {:.3}", list(|r| r.median_logcorrected_w), sw),
            ),
            Criterion::new(
                "holder refinement monotone",
                self.refinement_violations == 0,
                format!("{} violating replicas", self.refinement_violations),
            ),
        ]
    }
}

impl GeodesicBatch {
    /// Hölder statistics of `pi` (exponent 2/3, log power 1/3) and `W`
    /// (exponent 1/3, log power 2/3) on nested subgrids with the given
    /// numbers of points per unit time.
    pub fn holder(&self, resolutions: &[usize]) -> Result<HolderReport> {
        let n = self.params.n;
        if resolutions.is_empty() || resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return arg("resolutions must be nonempty and increasing");
        }
        for &r in resolutions {
            if r == 0 || n % r != 0 {
                return arg(format!("resolution {r} does not divide the line count {n}"));
            }
        }
        if self.is_empty() {
            return arg("no replicas");
        }
        const SPECS: [(f64, f64); 4] = [(2.0 / 3.0, 0.0), (1.0 / 3.0, 0.0), (2.0 / 3.0, 1.0 / 3.0), (1.0 / 3.0, 2.0 / 3.0)];
        let mut stats = vec![vec![Vec::with_capacity(self.len()); SPECS.len()]; resolutions.len()];
        let mut violations = 0;
        for i in 0..self.len() {
            let mut prev: Option<[f64; 4]> = None;
            let mut bad = false;
            for (ri, &r) in resolutions.iter().enumerate() {
                let p = self.pi[i].subsample(n / r)?;
                let w = self.w[i].subsample(n / r)?;
                let mut cur = [0.0; 4];
                for (k, &(e, lp)) in SPECS.iter().enumerate() {
                    let f = if k % 2 == 0 { &p } else { &w };
                    cur[k] = holder_statistic(f, e, lp)?;
                    stats[ri][k].push(cur[k]);
                }
                if let Some(pv) = prev {
                    bad |= cur.iter().zip(&pv).any(|(c, p)| c < p);
                }
                prev = Some(cur);
            }
            violations += bad as usize;
        }
        let rows = resolutions
            .iter()
            .zip(&stats)
            .map(|(&resolution, s)| {
                Ok(HolderRow {
                    resolution,
                    median_ratio_pi: median(&s[0])?,
                    median_ratio_w: median(&s[1])?,
                    median_logcorrected_pi: median(&s[2])?,
                    median_logcorrected_w: median(&s[3])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HolderReport {
            rows,
            refinement_violations: violations,
        })
    }
}

pub fn holder_experiment(
    rng: &Rng,
    params: &FieldParams,
    resolutions: &[usize],
    n_samples: usize,
    workers: usize,
) -> Result<HolderReport> {
    geodesic_batch(rng, params, n_samples, workers)?.holder(resolutions)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvironmentRow {
    pub z_requested: f64,
    /// Grid node used for the probe.
    pub z: f64,
    /// `-(F + G) / 2` against `R(z)`.
    pub bessel: KsResult,
    /// `(F - G) / 2` against `B(z)`.
    pub brownian: KsResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentReport {
    pub r: f64,
    pub eps: f64,
    pub n_samples: usize,
    pub rows: Vec<EnvironmentRow>,
    /// Replicas with `F(z) + G(z) > 0` at some grid `z`.
    pub sign_violations: usize,
    /// Replicas with `F(0)`, `G(0)` or `W(0)` nonzero.
    pub centering_violations: usize,
}

impl EnvironmentReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        let mut out = vec![
            Criterion::new(
                "environment sign",
                self.sign_violations == 0,
                format!("{} of {} replicas violate F + G <= 0", self.sign_violations, self.n_samples),
            ),
            Criterion::new(
                "environment centering",
                self.centering_violations == 0,
                format!("{} replicas off-centre", self.centering_violations),
            ),
        ];
        for r in self.rows.iter().filter(|r| r.z != 0.0) {
            out.push(Criterion::new(
                format!("environment bessel z={}", r.z_requested),
                r.bessel.passes(),
                format!("z = {:.5}, KS {:.4} vs threshold {:.4}", r.z, r.bessel.statistic, r.bessel.threshold),
            ));
            out.push(Criterion::new(
                format!("environment brownian z={}", r.z_requested),
                r.brownian.passes(),
                format!("z = {:.5}, KS {:.4} vs threshold {:.4}", r.z, r.brownian.statistic, r.brownian.threshold),
            ));
        }
        out
    }
}

/// Reference draws of `(R(z), B(z))` for replica `i`.
fn reference_pair(rng: &Rng, i: usize, z: f64) -> Result<(f64, f64)> {
    if z == 0.0 {
        return Ok((0.0, 0.0));
    }
    let g = rng.fork(TAG_REFERENCE).replica(i as u64);
    let (t0, dt) = if z > 0.0 { (0.0, z) } else { (z, -z) };
    let k = if z > 0.0 { 1 } else { 0 };
    let r = sample_bessel3(&g.fork(0), t0, dt, 2)?.values()[k];
    let b = sample_brownian(&g.fork(1), t0, dt, 2, 0.0, 1.0)?.values()[k];
    Ok((r, b))
}

#[allow(clippy::too_many_arguments)]
pub fn environment_experiment(
    rng: &Rng,
    params: &FieldParams,
    r: f64,
    eps: f64,
    n_samples: usize,
    probes: &[f64],
    level: f64,
    workers: usize,
) -> Result<EnvironmentReport> {
    params.validate()?;
    let eps_eff = effective_eps(params.n, eps)?;
    let dz = params.delta / (eps_eff * eps_eff);
    let nodes: Vec<i64> = probes.iter().map(|z| (z / dz).round() as i64).collect();
    let per = replicate(n_samples, workers, |i| {
        let (field, g) = sample_geodesic(&rng.replica(i as u64), params)?;
        let env = rescale_environment(&field, &g, r, eps)?;
        let (f, gg) = (env.f.values(), env.g.values());
        let centre = (-env.f.t0() / dz).round() as i64;
        let sign = f.iter().zip(gg).any(|(a, b)| a + b > 0.0);
        let centred = f[centre as usize] == 0.0 && gg[centre as usize] == 0.0 && env.w.values()[0] == 0.0;
        let mut vals = Vec::with_capacity(nodes.len());
        for (&k, &z) in nodes.iter().zip(probes) {
            let idx = centre + k;
            if idx < 0 || idx as usize >= f.len() {
                return range(format!("probe z = {z} lies outside the rescaled window of replica {i}"));
            }
            let (a, b) = (f[idx as usize], gg[idx as usize]);
            let (rr, bb) = reference_pair(rng, i, k as f64 * dz)?;
            vals.push((-(a + b) / 2.0, (a - b) / 2.0, rr, bb));
        }
        Ok((sign, centred, vals))
    })?;
    let mut rows = Vec::with_capacity(probes.len());
    for (p, (&k, &z)) in nodes.iter().zip(probes).enumerate() {
        let col = |c: usize| -> Vec<f64> {
            per.iter()
                .map(|(_, _, v)| match c {
                    0 => v[p].0,
                    1 => v[p].1,
                    2 => v[p].2,
                    _ => v[p].3,
                })
                .collect()
        };
        rows.push(EnvironmentRow {
            z_requested: z,
            z: k as f64 * dz,
            bessel: two_sample_distance(&col(0), &col(2), level)?,
            brownian: two_sample_distance(&col(1), &col(3), level)?,
        });
    }
    Ok(EnvironmentReport {
        r,
        eps: eps_eff,
        n_samples,
        rows,
        sign_violations: per.iter().filter(|p| p.0).count(),
        centering_violations: per.iter().filter(|p| !p.1).count(),
    })
}

/// One-point laws under the 1:2:3 rescaling and the flip symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    /// `T1^(-1/3) L(0, 0; 0, T1)` against `T2^(-1/3) L(0, T1; 0, T1 + T2)`.
    pub scaling: KsResult,
    /// `L(x, s; y, t)` against `L(-y, 1 - t; -x, 1 - s)`.
    pub flip: KsResult,
    pub times: (f64, f64),
    pub flip_query: (f64, f64, f64, f64),
}

impl InvarianceReport {
    pub fn criteria(&self) -> Vec<Criterion> {
        vec![
            Criterion::new(
                "invariance 1:2:3 scaling",
                self.scaling.passes(),
                format!("KS {:.4} vs threshold {:.4}", self.scaling.statistic, self.scaling.threshold),
            ),
            Criterion::new(
                "invariance flip",
                self.flip.passes(),
                format!("KS {:.4} vs threshold {:.4}", self.flip.statistic, self.flip.threshold),
            ),
        ]
    }
}

/// All four queries use disjoint line ranges of one field per replica.
/// Point-to-point values have both endpoints pinned to the grid, so the
/// per-line grid correction is removed once from each before rescaling.
pub fn invariance_experiment(
    rng: &Rng,
    params: &FieldParams,
    times: (f64, f64),
    flip_query: (f64, f64, f64, f64),
    n_samples: usize,
    level: f64,
    workers: usize,
) -> Result<InvarianceReport> {
    let (t1, t2) = times;
    if !(t1 > 0.0 && t2 > 0.0 && t1 + t2 <= 1.0) {
        return arg(format!("scaling times {t1}, {t2} must be positive with sum at most 1"));
    }
    let (x, s, y, t) = flip_query;
    let fq = LandscapeQuery::new(x, s, y, t)?;
    let gq = LandscapeQuery::new(-y, 1.0 - t, -x, 1.0 - s)?;
    let pairs = replicate(n_samples, workers, |i| {
        let field = LppField::build(&rng.replica(i as u64), params)?;
        let pin = field.bonus() - field.b();
        let a = field.landscape_approx(LandscapeQuery::new(0.0, 0.0, 0.0, t1)?)? - pin;
        let b = field.landscape_approx(LandscapeQuery::new(0.0, t1, 0.0, t1 + t2)?)? - pin;
        let f = field.landscape_approx(fq)?;
        let g = field.landscape_approx(gq)?;
        Ok((a / t1.cbrt(), b / t2.cbrt(), f, g))
    })?;
    let col = |k: usize| -> Vec<f64> {
        pairs
            .iter()
            .map(|p| [p.0, p.1, p.2, p.3][k])
            .collect()
    };
    Ok(InvarianceReport {
        scaling: two_sample_distance(&col(0), &col(1), level)?,
        flip: two_sample_distance(&col(2), &col(3), level)?,
        times,
        flip_query,
    })
}

/// Agreement of a variation-route constant with a limit-route moment: within
/// 20% of the limit estimate, or overlapping 95% intervals.
pub fn cross_validation(name: &str, variation: (f64, f64), limit: &MomentEstimate) -> Criterion {
    let (v, vse) = variation;
    let (lo, hi) = limit.ci95();
    let rel = (v - limit.mean).abs() / limit.mean.abs();
    let overlap = v - 1.96 * vse <= hi && lo <= v + 1.96 * vse;
    Criterion::new(
        format!("{name} cross-validation"),
        rel <= 0.2 || overlap,
        format!(
            "variation route {v:.4} +- {:.4}, limit route {:.4} +- {:.4}, relative gap {rel:.3}",
            1.96 * vse,
            limit.mean,
            1.96 * limit.std_error
        ),
    )
}

/// Stability and symmetry checks of the boundary problem.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitDiagnostics {
    /// Replicas re-solved with window `M + extra`.
    pub truncation_checked: usize,
    /// Of those, replicas whose `(X, Y)` moved.
    pub truncation_changed: usize,
    pub extra: f64,
    /// `X` against `-Y`.
    pub flip: KsResult,
    /// Mean and standard error of the unpowered length; no pass/fail.
    pub mean_length: (f64, f64),
}

impl LimitDiagnostics {
    pub fn criteria(&self) -> Vec<Criterion> {
        let frac = self.truncation_changed as f64 / self.truncation_checked.max(1) as f64;
        vec![
            Criterion::new(
                "limit truncation stability",
                self.truncation_checked > 0 && frac < 0.05,
                format!(
                    "{} of {} maximizers moved with window +{}",
                    self.truncation_changed, self.truncation_checked, self.extra
                ),
            ),
            Criterion::new(
                "limit flip symmetry",
                self.flip.passes(),
                format!("KS(X, -Y) {:.4} vs threshold {:.4}", self.flip.statistic, self.flip.threshold),
            ),
        ]
    }
}

/// Re-solves the first `checked` replicas with the window enlarged by
/// `extra` (same realization, extended) and compares maximizers.
pub fn limit_diagnostics(
    rng: &Rng,
    params: &LimitParams,
    samples: &[LimitSample],
    checked: usize,
    extra: f64,
    level: f64,
    workers: usize,
) -> Result<LimitDiagnostics> {
    let checked = checked.min(samples.len());
    let wide = LimitParams {
        window: params.window + extra,
        ..*params
    };
    let again = crate::limit::limit_samples(rng, &wide, checked, workers)?;
    let changed = samples
        .iter()
        .zip(&again)
        .filter(|(a, b)| a.x != b.x || a.y != b.y)
        .count();
    let x: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let y: Vec<f64> = samples.iter().map(|s| -s.y).collect();
    let len = Moments::from_slice(&samples.iter().map(|s| s.length).collect::<Vec<_>>());
    Ok(LimitDiagnostics {
        truncation_checked: checked,
        truncation_changed: changed,
        extra,
        flip: two_sample_distance(&x, &y, level)?,
        mean_length: (len.mean(), len.std_error()),
    })
}
