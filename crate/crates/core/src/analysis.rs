//! Weight functions, α-variation, local environments, overlaps and Hölder
//! statistics.


use crate::error::{arg, range, Result};
use crate::field::{Geodesic, LppField};
use crate::path::SampledPath;

/// Running landscape value along `g` at its line boundaries, starting at 0.
pub fn weight_function(field: &LppField, g: &Geodesic) -> Result<SampledPath> {
    let w = field.running_values(g)?;
    SampledPath::new(g.path.t0(), g.path.dt(), w)
}

/// Number of grid steps in a scale `eps` of a path with step `dt`.
pub fn scale_steps(dt: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return arg(format!("scale must be positive, got {eps}"));
    }
    let k = (eps / dt).round();
    if k < 1.0 || (eps / dt - k).abs() > 1e-6 * k {
        return arg(format!(
            "scale {eps} is not a positive integer multiple of the grid step {dt}"
        ));
    }
    Ok(k as usize)
}

/// `sum over u in [s + eps, t] ∩ eps Z of |f(u) - f(u - eps)|^alpha`.
pub fn variation(f: &SampledPath, alpha: f64, eps: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return arg(format!("variation exponent must be positive, got {alpha}"));
    }
    Ok(block_increments(f, eps)?
        .iter()
        .map(|d| d.abs().powf(alpha))
        .sum())
}

/// Block increments `f(u) - f(u - eps)` for `u` in `[s + eps, t] ∩ eps Z`.
pub fn block_increments(f: &SampledPath, eps: f64) -> Result<Vec<f64>> {
    let step = scale_steps(f.dt(), eps)?;
    let v = f.values();
    // first node on eps Z
    let origin = (f.t0() / f.dt()).round() as i64;
    let offset = ((step as i64 - origin.rem_euclid(step as i64)) % step as i64) as usize;
    Ok((offset + step..v.len())
        .step_by(step)
        .map(|i| v[i] - v[i - step])
        .collect())
}

/// The rescaled landscape around an environment centre: `L_eps(x, s; y, t) =
/// eps^-1 L(X + eps^2 x, r + eps^3 s; X + eps^2 y, r + eps^3 t)`.
#[derive(Clone, Copy, Debug)]
pub struct LandscapeWindow<'a> {
    pub field: &'a LppField,
    pub centre: f64,
    pub r: f64,
    pub eps: f64,
}

impl LandscapeWindow<'_> {
    pub fn value(&self, x: f64, s: f64, y: f64, t: f64) -> Result<f64> {
        let e2 = self.eps * self.eps;
        let e3 = e2 * self.eps;
        let q = crate::field::LandscapeQuery::new(
            self.centre + e2 * x,
            self.r + e3 * s,
            self.centre + e2 * y,
            self.r + e3 * t,
        )?;
        Ok(self.field.landscape_approx(q)? / self.eps)
    }
}

/// `(F, G, L, pi, W)` rescaled around the geodesic's passage through the
/// time window `[r, r + eps^3]`.
#[derive(Clone, Debug)]
pub struct EnvironmentQuintuple<'a> {
    /// Recentring location.
    pub x_eps: f64,
    /// Effective scale: `eps^3` rounded to whole lines.
    pub eps: f64,
    pub f: SampledPath,
    pub g: SampledPath,
    pub landscape: LandscapeWindow<'a>,
    pub pi: SampledPath,
    pub w: SampledPath,
}

/// Node range around `centre` on which `v` is finite.
fn finite_run(v: &[f64], centre: usize) -> (usize, usize) {
    let mut lo = centre;
    while lo > 0 && v[lo - 1] > f64::NEG_INFINITY {
        lo -= 1;
    }
    let mut hi = centre;
    while hi + 1 < v.len() && v[hi + 1] > f64::NEG_INFINITY {
        hi += 1;
    }
    (lo, hi)
}

pub fn rescale_environment<'a>(
    field: &'a LppField,
    g: &Geodesic,
    r: f64,
    eps: f64,
) -> Result<EnvironmentQuintuple<'a>> {
    if g.field_id != field.id() {
        return arg("geodesic belongs to a different field");
    }
    if !(eps > 0.0) {
        return arg(format!("scale must be positive, got {eps}"));
    }
    let n = field.n() as f64;
    let j_lo = field.line_boundary(r)?;
    let lines = (eps.powi(3) * n).round() as usize;
    if lines == 0 {
        return arg(format!("eps^3 = {} is below one line spacing", eps.powi(3)));
    }
    let j_hi = j_lo + lines;
    if j_lo <= g.first_line || j_hi > g.last_line {
        return range(format!(
            "window [{r}, {r} + eps^3] is not interior to the geodesic's time span"
        ));
    }
    let eps = (lines as f64 / n).cbrt();
    let e2 = eps * eps;

    // L(p; x, r) and L(x, r + eps^3; q) on all nodes
    let start = crate::field::GridPoint::new(g.entry, g.first_line);
    let fwd = field.sweep_forward(g.first_line, j_lo - 1, &field.point_init(start), g.bonus, None);
    let f_raw = fwd.values().to_vec();
    let mut term = vec![f64::NEG_INFINITY; field.cells() + 1];
    term[g.exit_on(g.last_line)] = 0.0;
    let g_raw = field.sweep_backward(j_hi, g.last_line, &term, g.bonus);

    let mut best = f64::NEG_INFINITY;
    let mut xk = usize::MAX;
    for k in 0..=field.cells() {
        let v = f_raw[k] + g_raw[k];
        if v > best {
            best = v;
            xk = k;
        }
    }
    if xk == usize::MAX {
        return range("no node connects both halves of the geodesic");
    }
    let x_eps = field.position(xk as isize);
    let (lo_f, hi_f) = finite_run(&f_raw, xk);
    let (lo_g, hi_g) = finite_run(&g_raw, xk);
    let (lo, hi) = (lo_f.max(lo_g), hi_f.min(hi_g));
    let dz = field.delta() / e2;
    let z0 = -((xk - lo) as f64) * dz;
    let f = SampledPath::new(
        z0,
        dz,
        (lo..=hi).map(|k| (f_raw[k] - f_raw[xk]) / eps).collect(),
    )?;
    let gg = SampledPath::new(
        z0,
        dz,
        (lo..=hi).map(|k| (g_raw[k] - g_raw[xk]) / eps).collect(),
    )?;

    let w_all = field.running_values(g)?;
    let base = j_lo - g.first_line;
    let w0 = w_all[base];
    let w = SampledPath::new(
        0.0,
        1.0 / lines as f64,
        (0..=lines).map(|i| (w_all[base + i] - w0) / eps).collect(),
    )?;
    let pi = SampledPath::new(
        0.0,
        1.0 / lines as f64,
        (0..=lines)
            .map(|i| (g.path.values()[base + i] - x_eps) / e2)
            .collect(),
    )?;
    Ok(EnvironmentQuintuple {
        x_eps,
        eps,
        f,
        g: gg,
        landscape: LandscapeWindow {
            field,
            centre: x_eps,
            r: field.boundary_time(j_lo),
            eps,
        },
        pi,
        w,
    })
}

/// Line boundaries at which two geodesics of one field sit at the same node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Overlap {
    pub boundaries: Vec<usize>,
    pub contiguous: bool,
}

pub fn overlap(g1: &Geodesic, g2: &Geodesic) -> Result<Overlap> {
    if g1.field_id != g2.field_id {
        return arg("geodesics belong to different fields");
    }
    let lo = g1.first_line.max(g2.first_line);
    let hi = (g1.last_line + 1).min(g2.last_line + 1);
    let boundaries: Vec<usize> = if lo > hi {
        Vec::new()
    } else {
        (lo..=hi)
            .filter(|&j| g1.node_at_boundary(j) == g2.node_at_boundary(j))
            .collect()
    };
    let contiguous = boundaries.windows(2).all(|w| w[1] == w[0] + 1);
    Ok(Overlap {
        boundaries,
        contiguous,
    })
}

/// Precomputed pair-statistic denominators, one per lag.
fn inverse_denominators(n: usize, dt: f64, exponent: f64, log_power: f64) -> Result<Vec<f64>> {
    (0..n)
        .map(|k| {
            if k == 0 {
                return Ok(0.0);
            }
            let h = k as f64 * dt;
            let lg = (2.0 / h).ln();
            if log_power != 0.0 && lg <= 0.0 {
                return arg(format!("log correction needs spans below 2, got {h}"));
            }
            Ok(1.0 / (h.powf(exponent) * lg.powf(log_power)))
        })
        .collect()
}

const HOLDER_EXHAUSTIVE: usize = 4096;

/// `sup over grid pairs s != t of |f(t) - f(s)| / (|t - s|^exponent
/// log^log_power(2 / |t - s|))`.
pub fn holder_statistic(f: &SampledPath, exponent: f64, log_power: f64) -> Result<f64> {
    if !(exponent > 0.0) {
        return arg(format!("Hölder exponent must be positive, got {exponent}"));
    }
    if f.len() < 2 {
        return arg("Hölder statistic needs at least two points");
    }
    let v = f.values();
    let inv = inverse_denominators(v.len(), f.dt(), exponent, log_power)?;
    if v.len() <= HOLDER_EXHAUSTIVE {
        let mut best: f64 = 0.0;
        for k in 1..v.len() {
            best = best.max(max_lag_increment(v, k) * inv[k]);
        }
        return Ok(best);
    }
    Ok(holder_pruned(v, &inv))
}

fn max_lag_increment(v: &[f64], k: usize) -> f64 {
    v.iter()
        .zip(&v[k..])
        .map(|(a, b)| (b - a).abs())
        .fold(0.0, f64::max)
}

/// Sparse tables of range minima and maxima.
struct RangeTable {
    min: Vec<Vec<f64>>,
    max: Vec<Vec<f64>>,
}

impl RangeTable {
    fn new(v: &[f64]) -> Self {
        let mut min = vec![v.to_vec()];
        let mut max = vec![v.to_vec()];
        let mut w = 1;
        while 2 * w <= v.len() {
            let (pmin, pmax) = (min.last().unwrap(), max.last().unwrap());
            let nmin: Vec<f64> = (0..=v.len() - 2 * w).map(|i| pmin[i].min(pmin[i + w])).collect();
            let nmax: Vec<f64> = (0..=v.len() - 2 * w).map(|i| pmax[i].max(pmax[i + w])).collect();
            min.push(nmin);
            max.push(nmax);
            w *= 2;
        }
        Self { min, max }
    }

    /// max - min over `v[i..i + len]`.
    fn spread(&self, i: usize, len: usize) -> f64 {
        let p = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let j = i + len - (1 << p);
        self.max[p][i].max(self.max[p][j]) - self.min[p][i].min(self.min[p][j])
    }
}

/// Exact sup with lag pruning: the largest lag-`k` increment is bounded by
/// the largest spread over windows of `K + 1` points for any `K >= k`; lags
/// are visited by decreasing bound and the scan stops once no bound can beat
/// the running sup.
fn holder_pruned(v: &[f64], inv: &[f64]) -> f64 {
    let n = v.len();
    let table = RangeTable::new(v);
    // window spreads at lag 2^p, capped at n - 1
    let mut caps = Vec::new();
    let mut lag = 1;
    loop {
        let l = lag.min(n - 1);
        let spread = (0..n - l).map(|i| table.spread(i, l + 1)).fold(0.0, f64::max);
        caps.push((l, spread));
        if l == n - 1 {
            break;
        }
        lag *= 2;
    }
    let mut bounds: Vec<(f64, usize)> = (1..n)
        .map(|k| {
            let cap = caps.iter().find(|(l, _)| *l >= k).unwrap().1;
            (cap * inv[k], k)
        })
        .collect();
    bounds.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: f64 = 0.0;
    for (bound, k) in bounds {
        if bound <= best {
            break;
        }
        best = best.max(max_lag_increment(v, k) * inv[k]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldParams, LandscapeQuery, TieBreak};
    use crate::Rng;

    fn line(n: usize) -> SampledPath {
        SampledPath::new(0.0, 1.0 / n as f64, (0..=n).map(|k| k as f64 / n as f64).collect()).unwrap()
    }

    #[test]
    fn variation_examples() {
        let c = SampledPath::new(0.0, 0.1, vec![2.0; 11]).unwrap();
        assert_eq!(variation(&c, 1.5, 0.2).unwrap(), 0.0);
        let f = line(64);
        for m in [1usize, 2, 4, 8, 64] {
            let eps = 1.0 / m as f64;
            assert!((variation(&f, 1.0, eps).unwrap() - 1.0).abs() < 1e-12);
            assert!((variation(&f, 2.0, eps).unwrap() - 1.0 / m as f64).abs() < 1e-12);
        }
        assert!(variation(&f, 1.0, 1.0 / 128.0).is_err());
        assert!(variation(&f, 1.0, 1.5 / 64.0).is_err());
        assert!(variation(&f, 0.0, 1.0 / 64.0).is_err());
    }

    #[test]
    fn variation_uses_absolute_lattice() {
        // path on [0.25, 1] with dt = 1/8; eps = 1/2 uses u = 1 only (u - eps = 0.5)
        let f = SampledPath::new(0.25, 0.125, vec![0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!(variation(&f, 1.0, 0.5).unwrap(), 7.0);
        assert_eq!(block_increments(&f, 0.5).unwrap(), vec![7.0]);
    }

    #[test]
    fn holder_examples() {
        let c = SampledPath::new(0.0, 0.1, vec![1.0; 11]).unwrap();
        assert_eq!(holder_statistic(&c, 2.0 / 3.0, 0.0).unwrap(), 0.0);
        let f = line(100);
        assert!((holder_statistic(&f, 2.0 / 3.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(holder_statistic(&SampledPath::new(0.0, 1.0, vec![1.0]).unwrap(), 0.5, 0.0).is_err());
    }

    #[test]
    fn holder_pruning_is_exact() {
        let p = crate::process::sample_brownian(&Rng::new(4, 0), 0.0, 1.0 / 5000.0, 5001, 0.0, 1.0).unwrap();
        let v = p.values();
        let inv = inverse_denominators(v.len(), p.dt(), 0.5, 0.5).unwrap();
        let exhaustive = (1..v.len())
            .map(|k| max_lag_increment(v, k) * inv[k])
            .fold(0.0, f64::max);
        assert_eq!(holder_statistic(&p, 0.5, 0.5).unwrap(), exhaustive);
    }

    #[test]
    fn weight_function_endpoints() {
        let f = LppField::build(&Rng::new(2, 0), &FieldParams::symmetric(64, 2.0, 1.0 / 64.0)).unwrap();
        let q = LandscapeQuery::new(0.0, 0.0, 0.25, 1.0).unwrap();
        let g = f.landscape_geodesic(q, TieBreak::Leftmost).unwrap();
        let w = weight_function(&f, &g).unwrap();
        assert_eq!(w.values()[0], 0.0);
        assert_eq!(*w.values().last().unwrap(), g.value);
        let other = LppField::build(&Rng::new(3, 0), &FieldParams::symmetric(64, 2.0, 1.0 / 64.0)).unwrap();
        assert!(weight_function(&other, &g).is_err());
    }

    #[test]
    fn environment_centering_and_argmax() {
        let f = LppField::build(&Rng::new(8, 0), &FieldParams::symmetric(128, 3.0, 1.0 / 64.0)).unwrap();
        let q = LandscapeQuery::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let g = f.landscape_geodesic(q, TieBreak::Leftmost).unwrap();
        let env = rescale_environment(&f, &g, 0.5, 0.25).unwrap();
        assert_eq!(env.f.value_at(0.0).unwrap(), 0.0);
        assert_eq!(env.g.value_at(0.0).unwrap(), 0.0);
        assert_eq!(env.w.values()[0], 0.0);
        assert_eq!(env.pi.t0(), 0.0);
        assert!((env.pi.t_end() - 1.0).abs() < 1e-12);
        for (a, b) in env.f.values().iter().zip(env.g.values()) {
            assert!(a + b <= 0.0);
        }
        let j = f.line_boundary(0.5).unwrap();
        let expect = (f.position(g.node_at_boundary(j)) - env.x_eps) / (env.eps * env.eps);
        assert_eq!(env.pi.values()[0], expect);
        // the window landscape reproduces the weight increment over the window
        let end = *env.pi.values().last().unwrap();
        let l = env.landscape.value(env.pi.values()[0], 0.0, end, 1.0).unwrap();
        assert!((l - env.w.values().last().unwrap()).abs() < 1e-9);
        assert!(rescale_environment(&f, &g, 0.99, 0.5).is_err());
        assert!(rescale_environment(&f, &g, 0.5, 0.01).is_err());
    }

    #[test]
    fn overlap_cases() {
        let f = LppField::build(&Rng::new(9, 0), &FieldParams::symmetric(32, 3.0, 1.0 / 32.0)).unwrap();
        let g = f
            .landscape_geodesic(LandscapeQuery::new(0.0, 0.0, 0.0, 1.0).unwrap(), TieBreak::Leftmost)
            .unwrap();
        let o = overlap(&g, &g).unwrap();
        assert_eq!(o.boundaries, (0..=32).collect::<Vec<_>>());
        assert!(o.contiguous);
        let far = f
            .landscape_geodesic(LandscapeQuery::new(2.5, 0.0, 2.5, 1.0).unwrap(), TieBreak::Leftmost)
            .unwrap();
        assert!(overlap(&g, &far).unwrap().boundaries.is_empty());
    }
}
