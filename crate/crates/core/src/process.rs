//! Samplers for the boundary and reference processes.
//!
//! All samplers are pure functions of an [`Rng`] identity and their
//! parameters: they fork private child streams and never advance the caller's
//! generator. Time 0 is the anchor of every process (value 0 there).
//! Two-sided paths are two independent one-sided walks glued at the anchor.

use std::f64::consts::PI;

use crate::error::{arg, Result};
use crate::path::SampledPath;
use crate::rng::Rng;

const FORWARD: u64 = 0;
const BACKWARD: u64 = 1;

fn check_grid(dt: f64, n: usize) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return arg(format!("grid step must be positive, got {dt}"));
    }
    if n == 0 {
        return arg("sample count must be at least 1");
    }
    Ok(())
}

/// Brownian motion with the given drift and diffusion (variance per unit
/// time), anchored at `B(0) = 0`, sampled at `t0 + k*dt` for `k < n`.
///
/// If 0 lies inside the sampled window it must be a grid node.
pub fn sample_brownian(
    rng: &Rng,
    t0: f64,
    dt: f64,
    n: usize,
    drift: f64,
    diffusion: f64,
) -> Result<SampledPath> {
    check_grid(dt, n)?;
    if !(diffusion >= 0.0) {
        return arg(format!("diffusion must be non-negative, got {diffusion}"));
    }
    if !t0.is_finite() {
        return arg("start time must be finite");
    }
    let sd = (diffusion * dt).sqrt();
    let mean = drift * dt;
    let mut values = vec![0.0; n];
    let t_end = t0 + (n - 1) as f64 * dt;

    if t0 >= 0.0 {
        // Whole window at or after the anchor.
        let mut fwd = rng.fork(FORWARD);
        let mut v = drift * t0 + (diffusion * t0).sqrt() * fwd.standard_normal();
        if t0 == 0.0 {
            v = 0.0;
        }
        values[0] = v;
        for k in 1..n {
            v += mean + sd * fwd.standard_normal();
            values[k] = v;
        }
    } else if t_end <= 0.0 {
        // Whole window at or before the anchor: walk backwards from t_end.
        let mut bwd = rng.fork(BACKWARD);
        let gap = -t_end;
        let mut v = -drift * gap + (diffusion * gap).sqrt() * bwd.standard_normal();
        if t_end == 0.0 {
            v = 0.0;
        }
        values[n - 1] = v;
        for k in (0..n - 1).rev() {
            v += -mean + sd * bwd.standard_normal();
            values[k] = v;
        }
    } else {
        let x = -t0 / dt;
        let anchor = x.round();
        if (x - anchor).abs() > 1e-7 * (1.0 + anchor.abs()) {
            return arg(format!(
                "the anchor time 0 must be a grid node (t0 = {t0}, dt = {dt})"
            ));
        }
        let anchor = anchor as usize;
        let mut fwd = rng.fork(FORWARD);
        let mut v = 0.0;
        for value in values.iter_mut().skip(anchor + 1) {
            v += mean + sd * fwd.standard_normal();
            *value = v;
        }
        let mut bwd = rng.fork(BACKWARD);
        let mut v = 0.0;
        for k in (0..anchor).rev() {
            v += -mean + sd * bwd.standard_normal();
            values[k] = v;
        }
    }
    SampledPath::new(t0, dt, values)
}

/// Bessel-3 process: the Euclidean norm of a standard 3-dimensional Brownian
/// motion (two-sided around the anchor).
pub fn sample_bessel3(rng: &Rng, t0: f64, dt: f64, n: usize) -> Result<SampledPath> {
    check_grid(dt, n)?;
    let coords = (0..3)
        .map(|i| sample_brownian(&rng.fork(10 + i), t0, dt, n, 0.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..n)
        .map(|k| {
            coords
                .iter()
                .map(|c| c.values()[k] * c.values()[k])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    SampledPath::new(t0, dt, values)
}

/// Brownian bridge on `[0, 1]` pinned at both ends: `n` steps, `n + 1` values.
pub fn sample_brownian_bridge(rng: &Rng, dt: f64, n: usize, diffusion: f64) -> Result<SampledPath> {
    check_grid(dt, n)?;
    if !(diffusion > 0.0) {
        return arg(format!("bridge diffusion must be positive, got {diffusion}"));
    }
    if (dt * n as f64 - 1.0).abs() > 1e-9 {
        return arg(format!("bridge grid must span [0, 1], got dt*n = {}", dt * n as f64));
    }
    let w = sample_brownian(&rng.fork(20), 0.0, dt, n + 1, 0.0, diffusion)?;
    let end = w.values()[n];
    let values = w
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == n { 0.0 } else { v - (k as f64 / n as f64) * end })
        .collect();
    SampledPath::new(0.0, dt, values)
}

/// Radon-Nikodym weight of the Brownian meander on `[0, 1]` against the
/// Bessel-3 law: `sqrt(pi/2) / R(1)`.
pub fn meander_weight(bessel_path: &SampledPath) -> Result<f64> {
    let r1 = match bessel_path.value_at(1.0) {
        Ok(v) => v,
        Err(_) => return arg("Bessel path does not cover time 1 on its grid"),
    };
    if !(r1 > 0.0) {
        return arg(format!("meander weight needs R(1) > 0, got {r1}"));
    }
    Ok((PI / 2.0).sqrt() / r1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn single_point_is_anchor() {
        let p = sample_brownian(&Rng::new(1, 0), 0.0, 0.1, 1, -2.0, 2.0).unwrap();
        assert_eq!(p.values(), &[0.0]);
    }

    #[test]
    fn argument_errors() {
        let r = Rng::new(1, 0);
        assert!(sample_brownian(&r, 0.0, 0.0, 5, 0.0, 1.0).is_err());
        assert!(sample_brownian(&r, 0.0, 0.1, 0, 0.0, 1.0).is_err());
        assert!(sample_brownian(&r, 0.0, 0.1, 5, 0.0, -1.0).is_err());
        assert!(sample_bessel3(&r, 0.0, -0.1, 5).is_err());
        // anchor strictly inside the window but off-grid
        assert!(sample_brownian(&r, -0.05, 0.1, 5, 0.0, 1.0).is_err());
        assert!(sample_brownian_bridge(&r, 0.1, 5, 1.0).is_err());
    }

    #[test]
    fn deterministic_per_identity() {
        let a = sample_brownian(&Rng::new(9, 4), -1.0, 0.01, 201, 0.3, 2.0).unwrap();
        let b = sample_brownian(&Rng::new(9, 4), -1.0, 0.01, 201, 0.3, 2.0).unwrap();
        assert_eq!(a, b);
        let c = sample_brownian(&Rng::new(9, 5), -1.0, 0.01, 201, 0.3, 2.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_sided_anchor_is_zero() {
        let p = sample_brownian(&Rng::new(2, 0), -1.0, 0.25, 9, 0.0, 1.0).unwrap();
        assert_eq!(p.value_at(0.0).unwrap(), 0.0);
        let r = sample_bessel3(&Rng::new(2, 0), -1.0, 0.25, 9).unwrap();
        assert_eq!(r.value_at(0.0).unwrap(), 0.0);
        assert!(r.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn brownian_mean_at_one() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                let p = sample_brownian(&Rng::new(5, i), 0.0, 0.1, 11, -2.0, 2.0).unwrap();
                p.value_at(1.0).unwrap()
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m + 2.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn window_right_of_anchor_has_correct_law() {
        // B(2) - B(1) and B(1) for a window starting at t0 = 1.
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                let p = sample_brownian(&Rng::new(6, i), 1.0, 0.5, 3, 1.0, 1.0).unwrap();
                p.values()[0]
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn gaussian_increment_moments() {
        // 10^5 standardized increments: |mean| < 4 SE, variance within 5%.
        let (drift, diff, dt) = (-1.5, 2.0, 0.01);
        let p = sample_brownian(&Rng::new(8, 0), 0.0, dt, 100_001, drift, diff).unwrap();
        let z: Vec<f64> = p
            .values()
            .windows(2)
            .map(|w| (w[1] - w[0] - drift * dt) / (diff * dt).sqrt())
            .collect();
        let (m, se) = mean_se(&z);
        let var = z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (z.len() - 1) as f64;
        assert!(m.abs() < 4.0 * se, "mean {m}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn bessel_second_moment() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                let r = sample_bessel3(&Rng::new(3, i), 0.0, 0.25, 5).unwrap();
                r.value_at(1.0).unwrap().powi(2)
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 3.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn bridge_pinned_with_right_variance() {
        let mids: Vec<f64> = (0..10_000)
            .map(|i| {
                let b = sample_brownian_bridge(&Rng::new(4, i), 0.125, 8, 1.0).unwrap();
                assert_eq!(b.values()[0], 0.0);
                assert_eq!(b.values()[8], 0.0);
                b.value_at(0.5).unwrap()
            })
            .collect();
        let (m, se) = mean_se(&mids);
        assert!(m.abs() < 3.0 * se);
        let sq: Vec<f64> = mids.iter().map(|x| x * x).collect();
        let (v, vse) = mean_se(&sq);
        assert!((v - 0.25).abs() < 3.0 * vse, "var {v}");
    }

    #[test]
    fn meander_weight_formula() {
        let p = SampledPath::new(0.0, 0.5, vec![0.0, 0.7, 1.0]).unwrap();
        assert!((meander_weight(&p).unwrap() - 1.253_314_137_315_500_3).abs() < 1e-12);
        let p = SampledPath::new(0.0, 0.5, vec![0.0, 0.7, 2.0]).unwrap();
        assert!((meander_weight(&p).unwrap() - 0.626_657_068_657_750_1).abs() < 1e-12);
        let zero = SampledPath::new(0.0, 0.5, vec![0.0, 0.7, 0.0]).unwrap();
        assert!(meander_weight(&zero).is_err());
        let short = SampledPath::new(0.0, 0.5, vec![0.0, 0.7]).unwrap();
        assert!(meander_weight(&short).is_err());
    }

    #[test]
    fn meander_weights_average_to_one() {
        let ws: Vec<f64> = (0..10_000)
            .map(|i| {
                let r = sample_bessel3(&Rng::new(12, i), 0.0, 0.25, 5).unwrap();
                meander_weight(&r).unwrap()
            })
            .collect();
        let (m, se) = mean_se(&ws);
        assert!((m - 1.0).abs() < 3.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn brownian_scaling_matches_in_distribution() {
        // sigma * B(t / sigma^2) has the same increments as B.
        use crate::stats::two_sample_distance;
        let sigma: f64 = 2.0;
        let n = 10_000;
        let direct: Vec<f64> = (0..n)
            .map(|i| {
                let p = sample_brownian(&Rng::new(21, i), 0.0, 0.5, 3, 0.0, 1.0).unwrap();
                p.values()[2] - p.values()[1]
            })
            .collect();
        let scaled: Vec<f64> = (0..n)
            .map(|i| {
                let dt = 0.5 / (sigma * sigma);
                let p = sample_brownian(&Rng::new(22, i), 0.0, dt, 3, 0.0, 1.0).unwrap();
                sigma * (p.values()[2] - p.values()[1])
            })
            .collect();
        let ks = two_sample_distance(&direct, &scaled, 0.01).unwrap();
        assert!(ks.statistic < ks.threshold, "{ks:?}");
    }
}
