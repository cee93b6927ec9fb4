//! Generic estimators: moments, quantiles, two-sample distance, bootstrap
//! correlation, least squares and tail-exponent fits.

use statrs::function::gamma::{digamma, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::Rng;

fn estimation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Estimation(msg.into()))
}

/// Running `(count, sum, sum of squares)`; merging is a plain sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, other: Moments) -> Moments {
        Moments {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance (0 for fewer than two values).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let v = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        // below the rounding floor of the one-pass formula
        let floor = 4.0 * n * f64::EPSILON * self.sum_sq / (n - 1.0);
        if v <= floor {
            0.0
        } else {
            v
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Mean, unbiased variance and standard error of the mean (two-pass).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary> {
    if xs.is_empty() {
        return estimation("no samples to summarize");
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(Summary {
        n: xs.len(),
        mean,
        variance,
        std_error: (variance / n).sqrt(),
    })
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return estimation("median of an empty sample");
    }
    Ok(quantile_sorted(&sorted(xs), 0.5))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return estimation("correlation needs two equal-length samples of size >= 3");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return estimation("correlation of a constant sample");
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Two-sample Kolmogorov-Smirnov statistic with its asymptotic critical value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub threshold: f64,
    pub level: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic < self.threshold
    }
}

/// `sqrt(-ln(level / 2) / 2) * sqrt((n_a + n_b) / (n_a n_b))`.
pub fn ks_threshold(level: f64, n_a: usize, n_b: usize) -> f64 {
    let (a, b) = (n_a as f64, n_b as f64);
    (-(level / 2.0).ln() / 2.0).sqrt() * ((a + b) / (a * b)).sqrt()
}

pub fn two_sample_distance(a: &[f64], b: &[f64], level: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("two-sample distance needs nonempty samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument(format!("level must lie in (0, 1), got {level}")));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        threshold: ks_threshold(level, sa.len(), sb.len()),
        level,
    })
}

/// Percentile bootstrap interval for the Pearson correlation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub resamples: usize,
}

impl BootstrapCi {
    pub fn covers(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub fn bootstrap_pearson(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    level: f64,
    rng: &Rng,
) -> Result<BootstrapCi> {
    let estimate = pearson(xs, ys)?;
    if resamples < 10 {
        return estimation("bootstrap needs at least 10 resamples");
    }
    let n = xs.len();
    let mut stats = Vec::with_capacity(resamples);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    for r in 0..resamples {
        let mut g = rng.fork(r as u64);
        for k in 0..n {
            let i = g.below(n);
            bx[k] = xs[i];
            by[k] = ys[i];
        }
        // a degenerate resample carries no information about the spread
        if let Ok(c) = pearson(&bx, &by) {
            stats.push(c);
        }
    }
    if stats.len() < resamples / 2 {
        return estimation("too many degenerate bootstrap resamples");
    }
    let s = sorted(&stats);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        estimate,
        lo: quantile_sorted(&s, alpha),
        hi: quantile_sorted(&s, 1.0 - alpha),
        level,
        resamples,
    })
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return estimation("regression needs two equal-length samples of size >= 2");
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return estimation("regression on a constant regressor");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_se = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_se,
        n: x.len(),
    })
}

/// How the stretch exponent of `P(Z > m) ~ c exp(-d m^beta)` is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TailMethod {
    /// Least squares of `log(-log S(m))` on `log m` over the quantile band.
    SurvivalRegression,
    /// Maximum likelihood over all positive samples in the generalized gamma
    /// family `f(m) ∝ m^(k beta - 1) exp(-(m / lambda)^beta)`, whose survival
    /// function decays like `exp(-d m^beta)` up to a power prefactor.
    #[default]
    GeneralizedGamma,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFit {
    pub beta_hat: f64,
    /// `log d`.
    pub intercept: f64,
    /// Agreement of the fitted `log(-log S)` with the empirical one on the band.
    pub r_squared: f64,
    pub band: (f64, f64),
    pub n_samples: usize,
    pub method: TailMethod,
}

pub const DEFAULT_BAND: (f64, f64) = (0.5, 0.99);
const MIN_TAIL_SAMPLES: usize = 500;

/// `(m, S(m))` at the distinct sample values inside the quantile band, with
/// `S(m)` the fraction of samples strictly above `m`.
pub fn empirical_survival(samples: &[f64], band: (f64, f64)) -> Vec<(f64, f64)> {
    let s = sorted(samples);
    let n = s.len();
    let lo = (band.0 * n as f64).ceil() as usize;
    let hi = ((band.1 * n as f64).floor() as usize).min(n);
    let mut out = Vec::new();
    let mut i = lo;
    while i < hi {
        let x = s[i];
        let mut j = i;
        while j < n && s[j] == x {
            j += 1;
        }
        out.push((x, (n - j) as f64 / n as f64));
        i = j;
    }
    out
}

fn band_points(samples: &[f64], band: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    empirical_survival(samples, band)
        .into_iter()
        .filter(|&(m, s)| m > 0.0 && s > 0.0 && s < 1.0)
        .map(|(m, s)| (m.ln(), (-s.ln()).ln()))
        .unzip()
}

fn check_tail_input(samples: &[f64], band: (f64, f64)) -> Result<()> {
    if !(band.0 > 0.0 && band.0 < band.1 && band.1 < 1.0) {
        return Err(Error::Argument(format!(
            "quantile band must satisfy 0 < lo < hi < 1, got {band:?}"
        )));
    }
    if samples.len() < MIN_TAIL_SAMPLES {
        return estimation(format!(
            "tail fit needs at least {MIN_TAIL_SAMPLES} samples, got {}",
            samples.len()
        ));
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return estimation("tail samples must be finite and nonnegative");
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return estimation("tail samples are constant");
    }
    Ok(())
}

pub fn fit_tail_exponent(samples: &[f64], band: (f64, f64)) -> Result<TailFit> {
    fit_tail_exponent_with(samples, band, TailMethod::default())
}

pub fn fit_tail_exponent_with(samples: &[f64], band: (f64, f64), method: TailMethod) -> Result<TailFit> {
    check_tail_input(samples, band)?;
    let (lx, ly) = band_points(samples, band);
    if lx.len() < 3 {
        return estimation("fewer than three distinct positive values in the band");
    }
    let (beta_hat, intercept, r_squared) = match method {
        TailMethod::SurvivalRegression => {
            let fit = linear_fit(&lx, &ly)?;
            (fit.slope, fit.intercept, fit.r_squared)
        }
        TailMethod::GeneralizedGamma => {
            let g = gen_gamma_mle(samples)?;
            let pred: Vec<f64> = lx
                .iter()
                .map(|&l| {
                    let s = gamma_ur(g.k, (l.exp() / g.lambda).powf(g.beta));
                    (-s.ln()).ln()
                })
                .collect();
            let my = ly.iter().sum::<f64>() / ly.len() as f64;
            let tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
            let res: f64 = ly.iter().zip(&pred).map(|(y, p)| (y - p).powi(2)).sum();
            let r2 = if tot > 0.0 && res.is_finite() {
                (1.0 - res / tot).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (g.beta, -g.beta * g.lambda.ln(), r2)
        }
    };
    if !(beta_hat > 0.0) || !beta_hat.is_finite() {
        return estimation(format!("fitted exponent {beta_hat} is not positive"));
    }
    Ok(TailFit {
        beta_hat,
        intercept,
        r_squared,
        band,
        n_samples: samples.len(),
        method,
    })
}

/// Generalized gamma parameters: `(m / lambda)^beta ~ Gamma(k, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenGamma {
    pub beta: f64,
    pub k: f64,
    pub lambda: f64,
    pub log_likelihood: f64,
}

/// Shape `k` of a gamma MLE given `s = log(mean y) - mean(log y) > 0`,
/// i.e. the root of `log k - digamma(k) = s`.
fn gamma_shape(s: f64) -> f64 {
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k = mid.exp();
        if k.ln() - digamma(k) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

struct Profile {
    log_m: Vec<f64>,
    sum_log_m: f64,
}

impl Profile {
    /// Profile log-likelihood at exponent `beta` with `k` and the scale at
    /// their conditional maxima; data are scaled to unit median.
    fn eval(&self, beta: f64) -> (f64, f64, f64) {
        let n = self.log_m.len() as f64;
        let mean_y = self.log_m.iter().map(|l| (beta * l).exp()).sum::<f64>() / n;
        let mean_log_y = beta * self.sum_log_m / n;
        let s = (mean_y.ln() - mean_log_y).max(1e-300);
        let k = gamma_shape(s);
        let theta = mean_y / k;
        let ll_gamma = n * ((k - 1.0) * mean_log_y - mean_y / theta - k * theta.ln() - ln_gamma(k));
        let ll = ll_gamma + n * beta.ln() + (beta - 1.0) * self.sum_log_m;
        (ll, k, theta)
    }
}

pub fn gen_gamma_mle(samples: &[f64]) -> Result<GenGamma> {
    let pos: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.len() < MIN_TAIL_SAMPLES {
        return estimation(format!(
            "generalized gamma fit needs {MIN_TAIL_SAMPLES} positive samples, got {}",
            pos.len()
        ));
    }
    let scale = quantile_sorted(&sorted(&pos), 0.5);
    let log_m: Vec<f64> = pos.iter().map(|x| (x / scale).ln()).collect();
    let sum_log_m = log_m.iter().sum();
    let prof = Profile { log_m, sum_log_m };
    // coarse scan in log beta, then golden section around the best node
    let grid: Vec<f64> = (0..=60).map(|i| -2.0 + i as f64 * 0.1).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| prof.eval(g.exp()).0).collect();
    let best = (0..grid.len())
        .max_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (prof.eval(c.exp()).0, prof.eval(d.exp()).0);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = prof.eval(c.exp()).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = prof.eval(d.exp()).0;
        }
    }
    let beta = (0.5 * (a + b)).exp();
    let (ll, k, theta) = prof.eval(beta);
    if !ll.is_finite() {
        return estimation("generalized gamma likelihood is not finite");
    }
    let n = pos.len() as f64;
    Ok(GenGamma {
        beta,
        k,
        lambda: scale * theta.powf(1.0 / beta),
        log_likelihood: ll - n * scale.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut r = Rng::new(seed, 0);
        (0..n).map(|_| r.standard_normal()).collect()
    }

    #[test]
    fn moments_merge_and_summary() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let m = Moments::from_slice(&xs[..2]).merge(Moments::from_slice(&xs[2..]));
        assert_eq!(m.count, 4);
        assert_eq!(m.mean(), 3.5);
        let s = summarize(&xs).unwrap();
        assert!((m.variance() - s.variance).abs() < 1e-12);
        assert!((s.variance - 7.0).abs() < 1e-12);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.125), 1.5);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]).unwrap(), 2.5);
    }

    #[test]
    fn ks_basic() {
        let a = normals(1, 100);
        assert_eq!(two_sample_distance(&a, &a, 0.01).unwrap().statistic, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        assert_eq!(two_sample_distance(&a, &b, 0.01).unwrap().statistic, 1.0);
        assert!(two_sample_distance(&[], &b, 0.01).is_err());
        assert!((ks_threshold(0.01, 10_000, 10_000) - 1.627_6 * (2e-4f64).sqrt()).abs() < 1e-5);
        // hand example: a = {1, 2, 3}, b = {2.5}: max |F_a - F_b| at x = 2 is 2/3
        let r = two_sample_distance(&[1.0, 2.0, 3.0], &[2.5], 0.05).unwrap();
        assert!((r.statistic - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ks_ties_across_samples() {
        let r = two_sample_distance(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0], 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn linear_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn pearson_self_is_one() {
        let a = normals(2, 500);
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let ci = bootstrap_pearson(&a, &a, 200, 0.95, &Rng::new(1, 0)).unwrap();
        assert!((ci.lo - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let a = normals(3, 300);
        let b = normals(4, 300);
        let c1 = bootstrap_pearson(&a, &b, 300, 0.95, &Rng::new(9, 0)).unwrap();
        let c2 = bootstrap_pearson(&a, &b, 300, 0.95, &Rng::new(9, 0)).unwrap();
        assert_eq!(c1, c2);
        assert!(c1.lo < c1.estimate && c1.estimate < c1.hi);
    }

    #[test]
    fn tail_input_errors() {
        assert!(fit_tail_exponent(&[1.0; 100], DEFAULT_BAND).is_err());
        assert!(fit_tail_exponent(&[1.0; 1000], DEFAULT_BAND).is_err());
        let a: Vec<f64> = normals(5, 1000).iter().map(|x| x.abs()).collect();
        assert!(fit_tail_exponent(&a, (0.0, 0.99)).is_err());
        assert!(fit_tail_exponent(&a, (0.5, 1.0)).is_err());
        assert!(fit_tail_exponent(&a, DEFAULT_BAND).is_ok());
    }

    #[test]
    fn gamma_shape_root() {
        for k in [0.3, 1.0, 2.5, 40.0] {
            let s = f64::ln(k) - digamma(k);
            assert!((gamma_shape(s) / k - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn regression_recovers_exact_weibull_survival() {
        // S(m) = exp(-m^3): the regression line is exact up to sampling noise
        let mut r = Rng::new(6, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| (-(1.0 - r.uniform()).ln()).cbrt()).collect();
        let f = fit_tail_exponent_with(&xs, DEFAULT_BAND, TailMethod::SurvivalRegression).unwrap();
        assert!((f.beta_hat - 3.0).abs() < 0.2, "{f:?}");
        assert!(f.r_squared > 0.99);
    }
}
