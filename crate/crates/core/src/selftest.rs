//! Exact grid identities checked on random small fields: DP against
//! exhaustive enumeration, metric composition, the reverse triangle
//! inequality, geodesic value identity, weight additivity and the overlap
//! structure of leftmost geodesics. Also the estimator gates: tail
//! exponents of synthetic laws, meander weights and null calibration of the
//! two-sample distance.


use crate::analysis::{overlap, weight_function};
use crate::error::Result;
use crate::experiments::Criterion;
use crate::field::{FieldParams, GridPoint, LandscapeQuery, LppField, TieBreak};
use crate::process::{meander_weight, sample_bessel3};
use crate::rng::Rng;
use crate::stats::{fit_tail_exponent_with, two_sample_distance, Moments, TailMethod, DEFAULT_BAND};

/// Tolerance of every identity.
pub const TOLERANCE: f64 = 1e-9;

/// Outcome of one family of checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub allowed_failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            instances: 0,
            failures: 0,
            allowed_failures: 0,
            max_error: 0.0,
            tolerance: TOLERANCE,
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.failures <= self.allowed_failures && self.max_error <= self.tolerance
    }

    fn record(&mut self, err: f64) {
        self.instances += 1;
        if !(err <= self.tolerance) {
            self.failures += 1;
        }
        if err.is_nan() || err > self.max_error {
            self.max_error = err;
        }
    }

    fn record_bool(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { f64::INFINITY });
    }

    pub fn criterion(&self) -> Criterion {
        Criterion::new(
            format!("selftest {}", self.name),
            self.passed(),
            format!(
                "{} instances, {} failures (allowed {}), max error {:e} (tolerance {:e})",
                self.instances, self.failures, self.allowed_failures, self.max_error, self.tolerance
            ),
        )
    }
}

/// `|a - b|`, with equal infinities counting as agreement.
fn gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Maximal raw passage value from entry cell `entry` on line `first` to
/// node `end` on line `last`, by enumerating every exit sequence.
pub fn brute_force_passage(field: &LppField, first: usize, entry: isize, last: usize, end: usize) -> f64 {
    fn go(f: &LppField, line: usize, e: isize, last: usize, end: usize) -> f64 {
        let margin = f.margin() as isize;
        let row = f.row(line);
        let seg = |p: isize| -> f64 { (e..p).map(|c| row[(c + margin) as usize]).sum() };
        if line == last {
            return if end as isize >= e { seg(end as isize) } else { f64::NEG_INFINITY };
        }
        let mut best = f64::NEG_INFINITY;
        for p in e.max(0)..=f.cells() as isize {
            let rest = go(f, line + 1, p - f.shift(line + 1) as isize, last, end);
            best = best.max(seg(p) + rest);
        }
        best
    }
    go(field, first, entry, last, end)
}

fn random_small_field(rng: &mut Rng) -> Result<LppField> {
    let lines = 1 + rng.below(4);
    let cells = 1 + rng.below(8);
    let shift = rng.below(3);
    let rows = (0..lines)
        .map(|_| (0..cells + shift).map(|_| rng.standard_normal()).collect())
        .collect();
    LppField::from_rows(rows, shift, 0.0)
}

/// DP values and profiles against exhaustive enumeration.
pub fn check_oracle(rng: &Rng, instances: usize) -> Result<CheckResult> {
    let mut out = CheckResult::new("oracle-equivalence");
    let mut g = rng.fork(1);
    for _ in 0..instances {
        let f = random_small_field(&mut g)?;
        let last = f.n() - 1;
        let h = f.shift(0) as isize;
        let entry = g.below(f.cells() + 1 + h as usize) as isize - h;
        let start = GridPoint::new(entry, 0);
        let profile = f.passage_profile(start, last)?;
        let mut worst: f64 = 0.0;
        for end in 0..=f.cells() {
            let brute = brute_force_passage(&f, 0, entry, last, end);
            if last == 0 && (end as isize) < entry {
                worst = worst.max(gap(profile[end], brute));
                continue;
            }
            let dp = f.raw_last_passage(start, GridPoint::new(end as isize, last))?;
            worst = worst.max(gap(dp, brute)).max(gap(profile[end], brute));
            if dp > f64::NEG_INFINITY {
                let geo = f.extract_geodesic(start, GridPoint::new(end as isize, last), TieBreak::Leftmost)?;
                worst = worst.max(gap(geo.value, dp));
            }
        }
        out.record(worst);
    }
    Ok(out)
}

fn check_field(rng: &Rng) -> Result<LppField> {
    LppField::build(rng, &FieldParams::symmetric(32, 1.0, 1.0 / 32.0))
}

/// Random sorted node triple in the middle half of the window.
fn triple(g: &mut Rng, f: &LppField) -> [f64; 3] {
    let m = f.cells();
    let mut k = [m / 4 + g.below(m / 2 + 1), m / 4 + g.below(m / 2 + 1), m / 4 + g.below(m / 2 + 1)];
    k.sort_unstable();
    k.map(|k| f.position(k as isize))
}

/// Random boundary times `j0 < j1 < j2`.
fn times(g: &mut Rng, f: &LppField) -> [f64; 3] {
    let n = f.n();
    let mut j = [0; 3];
    loop {
        for x in &mut j {
            *x = g.below(n + 1);
        }
        j.sort_unstable();
        if j[0] < j[1] && j[1] < j[2] {
            return j.map(|j| f.boundary_time(j));
        }
    }
}

/// Metric composition and the reverse triangle inequality at random grid
/// triples.
pub fn check_composition(rng: &Rng, triples: usize) -> Result<(CheckResult, CheckResult)> {
    let mut comp = CheckResult::new("metric-composition");
    let mut tri = CheckResult::new("triangle-inequality");
    let f = check_field(&rng.fork(2))?;
    let mut g = rng.fork(3);
    for _ in 0..triples {
        let ([x, z, y], [r, s, t], direct) = loop {
            let (p, q) = (triple(&mut g, &f), times(&mut g, &f));
            let d = f.landscape_approx(LandscapeQuery::new(p[0], q[0], p[2], q[2])?)?;
            if d > f64::NEG_INFINITY {
                break (p, q, d);
            }
        };
        let left = f.landscape_profile(x, r, s)?;
        let right = f.landscape_profile_to(s, y, t)?;
        let best = left
            .iter()
            .zip(&right)
            .map(|(a, b)| a + b)
            .fold(f64::NEG_INFINITY, f64::max);
        comp.record(gap(direct, best));
        let a = f.landscape_approx(LandscapeQuery::new(x, r, z, s)?)?;
        let b = f.landscape_approx(LandscapeQuery::new(z, s, y, t)?)?;
        tri.record((a + b - direct).max(0.0));
    }
    Ok((comp, tri))
}

/// Geodesic value identity, weight additivity along geodesics and the
/// initial-interval overlap of leftmost geodesics from a shared start.
pub fn check_geodesics(rng: &Rng, geodesics: usize) -> Result<(CheckResult, CheckResult, CheckResult)> {
    let mut value = CheckResult::new("geodesic-value");
    let mut additivity = CheckResult::new("weight-additivity");
    let mut overlaps = CheckResult::new("overlap-interval");
    let f = check_field(&rng.fork(4))?;
    let mut g = rng.fork(5);
    for _ in 0..geodesics {
        // redraw pairs that no staircase connects
        let q = loop {
            let [x, _, y] = triple(&mut g, &f);
            let [s, _, t] = times(&mut g, &f);
            let q = LandscapeQuery::new(x, s, y, t)?;
            if f.landscape_approx(q)? > f64::NEG_INFINITY {
                break q;
            }
        };
        let (x, s, t) = (q.x, q.s, q.t);
        let geo = f.landscape_geodesic(q, TieBreak::Leftmost)?;
        value.record(gap(geo.value, f.landscape_approx(q)?));

        let w = weight_function(&f, &geo)?;
        let (wv, pv) = (w.values(), geo.path.values());
        let i = g.below(wv.len() - 1);
        let j = i + 1 + g.below(wv.len() - 1 - i);
        let sub = f.landscape_approx(LandscapeQuery::new(pv[i], w.time(i), pv[j], w.time(j))?)?;
        additivity.record(gap(wv[j] - wv[i], sub));

        let q2 = loop {
            let y2 = f.position(f.cells() as isize / 4 + g.below(f.cells() / 2 + 1) as isize);
            let q2 = LandscapeQuery::new(x, s, y2, t)?;
            if f.landscape_approx(q2)? > f64::NEG_INFINITY {
                break q2;
            }
        };
        let other = f.landscape_geodesic(q2, TieBreak::Leftmost)?;
        let o = overlap(&geo, &other)?;
        let first = geo.first_line;
        overlaps.record_bool(o.contiguous && o.boundaries.first() == Some(&first));
    }
    Ok((value, additivity, overlaps))
}

/// All checks at the default sizes: 200 oracle instances, 1000 triples and
/// 200 geodesics.
pub fn run_selftest(rng: &Rng) -> Result<Vec<CheckResult>> {
    let oracle = check_oracle(rng, 200)?;
    let (comp, tri) = check_composition(rng, 1000)?;
    let (val, add, ovl) = check_geodesics(rng, 200)?;
    Ok(vec![oracle, comp, tri, val, add, ovl])
}

/// Tail exponent of a synthetic law `P(Z > m) = exp(-m^beta)`-type sample
/// recovered within `tol`.
pub fn check_tail_gate(rng: &Rng, beta: u32, n: usize, tol: f64, method: TailMethod) -> Result<CheckResult> {
    let mut g = rng.fork(100 + beta as u64);
    let xs: Vec<f64> = (0..n)
        .map(|_| match beta {
            // standard exponential
            1 => -(1.0 - g.uniform()).ln(),
            // half-normal
            2 => g.standard_normal().abs(),
            _ => (-(1.0 - g.uniform()).ln()).powf(1.0 / beta as f64),
        })
        .collect();
    let fit = fit_tail_exponent_with(&xs, DEFAULT_BAND, method)?;
    let mut out = CheckResult::new(&format!("tail-exponent-beta{beta}"));
    out.tolerance = tol;
    out.record((fit.beta_hat - beta as f64).abs());
    out.instances = n;
    Ok(out)
}

/// Meander weights `sqrt(pi/2) / R(1)` of Bessel-3 paths on `[0, 1]` average
/// to 1 within three standard errors.
pub fn check_meander_weights(rng: &Rng, n: usize) -> Result<CheckResult> {
    let g = rng.fork(6);
    let mut m = Moments::default();
    for i in 0..n {
        let path = sample_bessel3(&g.replica(i as u64), 0.0, 1.0 / 64.0, 65)?;
        m.push(meander_weight(&path)?);
    }
    let mut out = CheckResult::new("meander-weight-mean");
    out.tolerance = 3.0 * m.std_error();
    out.record((m.mean() - 1.0).abs());
    out.instances = n;
    Ok(out)
}

/// Null calibration: two independent normal samples of size `size` per
/// repeat; at most 5% of repeats may exceed the 1% threshold.
pub fn check_ks_calibration(rng: &Rng, repeats: usize, size: usize) -> Result<CheckResult> {
    let g = rng.fork(7);
    let mut out = CheckResult::new("two-sample-calibration");
    out.allowed_failures = repeats / 20;
    out.tolerance = f64::INFINITY;
    for r in 0..repeats {
        let mut h = g.replica(r as u64);
        let a: Vec<f64> = (0..size).map(|_| h.standard_normal()).collect();
        let b: Vec<f64> = (0..size).map(|_| h.standard_normal()).collect();
        let ks = two_sample_distance(&a, &b, 0.01)?;
        out.instances += 1;
        out.failures += !ks.passes() as usize;
        out.max_error = out.max_error.max(ks.statistic / ks.threshold);
    }
    Ok(out)
}

/// Estimator gates at the acceptance sizes: `tail_n` samples per synthetic
/// law, `meander_n` weights and `ks_repeats` null repeats of 10^4 each.
pub fn run_estimator_gates(
    rng: &Rng,
    tail_n: usize,
    meander_n: usize,
    ks_repeats: usize,
    method: TailMethod,
) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_tail_gate(rng, 1, tail_n, 0.1, method)?,
        check_tail_gate(rng, 2, tail_n, 0.2, method)?,
        check_tail_gate(rng, 3, tail_n, 0.15, method)?,
        check_meander_weights(rng, meander_n)?,
        check_ks_calibration(rng, ks_repeats, 10_000)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_selftest_passes() {
        let rng = Rng::new(9, 0);
        let o = check_oracle(&rng, 50).unwrap();
        assert_eq!(o.failures, 0, "{o:?}");
        let (c, t) = check_composition(&rng, 50).unwrap();
        assert_eq!((c.failures, t.failures), (0, 0), "{c:?} {t:?}");
        let (v, a, ov) = check_geodesics(&rng, 30).unwrap();
        assert_eq!((v.failures, a.failures, ov.failures), (0, 0, 0), "{v:?} {a:?} {ov:?}");
    }

    #[test]
    fn brute_force_two_by_three() {
        let f = LppField::from_rows(vec![vec![1.0, 0.0, 2.0], vec![3.0, 1.0, 0.0]], 0, 0.0).unwrap();
        assert_eq!(brute_force_passage(&f, 0, 0, 1, 3), 4.0);
    }

    #[test]
    fn detects_a_broken_identity() {
        let mut r = CheckResult::new("x");
        r.record(1e-3);
        r.record(f64::NAN);
        assert_eq!(r.failures, 2);
        assert!(!r.criterion().passed);
    }
}
