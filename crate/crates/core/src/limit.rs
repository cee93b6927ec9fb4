//! The boundary maximization problem
//! `max over x, y of B(x) - R(x) + L(x, 0; y, 1) - B(y) - R(y)`
//! with two-sided Brownian `B` and Bessel-3 `R` (diffusion 1), and the
//! moment estimators built on its maximizers.
//!
//! All `(x, y)` pairs are searched exactly on the grid with a single traced
//! forward sweep: starting the sweep from the profile `h0 = B - R` gives
//! `h1(y) = max_x h0(x) + L(x, 0; y, 1)` for every `y` at once, and the
//! maximizing `x` for the optimal `y` is recovered by backtracking.

use crate::error::{arg, Result};
use crate::field::{FieldParams, LppField, TieBreak};
use crate::path::SampledPath;
use crate::process::{sample_bessel3, sample_brownian};
use crate::rng::Rng;
use crate::stats::Moments;

const TAG_B: u64 = u64::MAX - 1;
const TAG_R: u64 = u64::MAX - 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitParams {
    /// Lines of the approximating landscape.
    pub n: usize,
    /// Truncation half-width `M`.
    pub window: f64,
    pub delta: f64,
    pub grid_correction: bool,
}

impl LimitParams {
    pub fn new(n: usize, window: f64, delta: f64) -> Self {
        Self {
            n,
            window,
            delta,
            grid_correction: true,
        }
    }

    fn validate(&self) -> Result<usize> {
        if self.n == 0 {
            return arg("the landscape needs at least one line");
        }
        if !(self.window > 0.0) || !(self.delta > 0.0) {
            return arg(format!(
                "window and grid step must be positive, got M = {}, delta = {}",
                self.window, self.delta
            ));
        }
        let half = self.window / self.delta;
        if (half - half.round()).abs() > 1e-9 * half.max(1.0) {
            return arg(format!(
                "window {} is not a whole number of grid steps {}",
                self.window, self.delta
            ));
        }
        Ok(half.round() as usize)
    }

    fn field_params(&self) -> FieldParams {
        FieldParams {
            grid_correction: self.grid_correction,
            ..FieldParams::symmetric(self.n, self.window, self.delta)
        }
    }
}

impl Default for LimitParams {
    fn default() -> Self {
        Self::new(64, 6.0, 1.0 / 64.0)
    }
}

/// Maximizers and values of one boundary problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitSample {
    pub x: f64,
    pub y: f64,
    /// `L(X, 0; Y, 1)`.
    pub length: f64,
    pub objective: f64,
    pub window: f64,
}

/// Maximizes the boundary problem for explicit boundary arrays on the nodes
/// of `field` (over the field's full time span). Ties resolve to the
/// leftmost `y`, then the leftmost `x`.
pub fn maximize_boundary(field: &LppField, b: &[f64], r: &[f64]) -> Result<LimitSample> {
    let nodes = field.cells() + 1;
    if b.len() != nodes || r.len() != nodes {
        return arg(format!(
            "boundary arrays need {nodes} values, got {} and {}",
            b.len(),
            r.len()
        ));
    }
    let h0: Vec<f64> = b.iter().zip(r).map(|(b, r)| b - r).collect();
    let sweep = field.kpz_sweep(&h0, 0.0, 1.0, Some(TieBreak::Leftmost))?;
    let h1 = sweep.values();
    let mut best = f64::NEG_INFINITY;
    let mut yk = 0;
    for k in 0..nodes {
        let v = h1[k] - b[k] - r[k];
        if v > best {
            best = v;
            yk = k;
        }
    }
    let (entry, _) = sweep.backtrack(field, yk)?;
    let xk = (entry + field.shift(0) as isize) as usize;
    Ok(LimitSample {
        x: field.position(xk as isize),
        y: field.position(yk as isize),
        length: h1[yk] - h0[xk],
        objective: best,
        window: (field.x_max() - field.x_min()) / 2.0,
    })
}

/// Boundary processes of a replica: `(B, R)` on the window nodes.
pub fn sample_boundaries(rng: &Rng, params: &LimitParams) -> Result<(SampledPath, SampledPath)> {
    let half = params.validate()?;
    let nodes = 2 * half + 1;
    let b = sample_brownian(&rng.fork(TAG_B), -params.window, params.delta, nodes, 0.0, 1.0)?;
    let r = sample_bessel3(&rng.fork(TAG_R), -params.window, params.delta, nodes)?;
    Ok((b, r))
}

/// One sample of the truncated boundary problem.
///
/// The landscape is built from `rng` and the boundaries from forks of it,
/// all anchored at the origin, so enlarging `M` at a fixed seed extends the
/// same realization.
pub fn sample_limit_environment(rng: &Rng, params: &LimitParams) -> Result<LimitSample> {
    params.validate()?;
    let field = LppField::build(rng, &params.field_params())?;
    let (b, r) = sample_boundaries(rng, params)?;
    maximize_boundary(&field, b.values(), r.values())
}

/// Monte-Carlo mean of `|Z|^exponent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub exponent: f64,
}

impl MomentEstimate {
    pub fn from_moments(m: &Moments, exponent: f64) -> Result<Self> {
        if m.count < 2 {
            return Err(crate::Error::Estimation(
                "a moment estimate needs at least two samples".into(),
            ));
        }
        Ok(Self {
            mean: m.mean(),
            std_error: m.std_error(),
            n_samples: m.count as usize,
            exponent,
        })
    }

    pub fn from_values(values: &[f64], exponent: f64) -> Result<Self> {
        let mut m = Moments::default();
        for v in values {
            m.push(v.abs().powf(exponent));
        }
        Self::from_moments(&m, exponent)
    }

    /// Normal-approximation interval at 95%.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)
    }
}

/// Independent replicas `0..n_samples` (stream = replica index).
pub fn limit_samples(rng: &Rng, params: &LimitParams, n_samples: usize, workers: usize) -> Result<Vec<LimitSample>> {
    params.validate()?;
    crate::experiments::replicate(n_samples, workers, |i| {
        sample_limit_environment(&rng.replica(i as u64), params)
    })
}

/// `E |Y - X|^(3/2)`.
pub fn estimate_nu(rng: &Rng, params: &LimitParams, n_samples: usize, workers: usize) -> Result<MomentEstimate> {
    if n_samples < 2 {
        return arg("a moment estimate needs at least two samples");
    }
    let s = limit_samples(rng, params, n_samples, workers)?;
    nu_from(&s)
}

/// `E |L(X, 0; Y, 1)|^3`.
pub fn estimate_mu(rng: &Rng, params: &LimitParams, n_samples: usize, workers: usize) -> Result<MomentEstimate> {
    if n_samples < 2 {
        return arg("a moment estimate needs at least two samples");
    }
    let s = limit_samples(rng, params, n_samples, workers)?;
    mu_from(&s)
}

pub fn nu_from(samples: &[LimitSample]) -> Result<MomentEstimate> {
    let d: Vec<f64> = samples.iter().map(|s| s.y - s.x).collect();
    MomentEstimate::from_values(&d, 1.5)
}

pub fn mu_from(samples: &[LimitSample]) -> Result<MomentEstimate> {
    let l: Vec<f64> = samples.iter().map(|s| s.length).collect();
    MomentEstimate::from_values(&l, 3.0)
}

/// Raw arrays `|X|`, `|Y - X|` and `|length|` for tail fitting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LimitTails {
    pub abs_x: Vec<f64>,
    pub abs_y_minus_x: Vec<f64>,
    pub abs_length: Vec<f64>,
}

pub fn tails_from(samples: &[LimitSample]) -> LimitTails {
    LimitTails {
        abs_x: samples.iter().map(|s| s.x.abs()).collect(),
        abs_y_minus_x: samples.iter().map(|s| (s.y - s.x).abs()).collect(),
        abs_length: samples.iter().map(|s| s.length.abs()).collect(),
    }
}

pub fn tail_samples_boundary_argmax(
    rng: &Rng,
    params: &LimitParams,
    n_samples: usize,
    workers: usize,
) -> Result<LimitTails> {
    Ok(tails_from(&limit_samples(rng, params, n_samples, workers)?))
}
