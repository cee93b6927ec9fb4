//! The discretized Brownian LPP field.
//!
//! Lines are indexed `0..n` (line `l` carries the Brownian motion of the
//! `(l + 1)`-th time step, so a time `s` maps to the line boundary
//! `floor(s * n)`). Space is a uniform grid of nodes `x_min + k * delta`,
//! `k = 0..=m`. A path entering line `l` after leaving the previous line at
//! node `p` starts on line `l` at the extended cell `p - shift[l]`, so every
//! line stores `margin = max(shift)` extra increments to the left of the
//! window. Cell `e` of a line (`-margin <= e <= m`) lives at storage index
//! `e + margin`, and increment `i` of a row joins storage indices `i` and
//! `i + 1`.
//!
//! The per-line shift follows the cumulative rounding
//! `shift[l] = round((l + 1) * a / delta) - round(l * a / delta)`, which
//! keeps the total staircase shift within half a cell of `n * a`.

mod checkpoint;
mod dp;
mod geodesic;

use std::sync::Arc;

use crate::error::{arg, range, Result};
use crate::rng::{mix64, Rng};

pub use dp::Sweep;
pub use geodesic::Geodesic;

/// Tolerance used when mapping a time onto a line boundary.
const TIME_TOL: f64 = 1e-9;

/// Tie-break rule for geodesic backtracking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TieBreak {
    #[default]
    Leftmost,
    Rightmost,
}

/// A point of the staircase: cell `cell` on line `line`.
///
/// As a start point `cell` may be negative (down to `-shift[line]`): it is the
/// extended cell where the path enters the line. As an end point it is the
/// node in `0..=m` where the path leaves the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridPoint {
    pub cell: isize,
    pub line: usize,
}

impl GridPoint {
    pub fn new(cell: isize, line: usize) -> Self {
        Self { cell, line }
    }
}

/// Rescaled landscape coordinates `(x, s; y, t)` with `s < t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandscapeQuery {
    pub x: f64,
    pub s: f64,
    pub y: f64,
    pub t: f64,
}

impl LandscapeQuery {
    pub fn new(x: f64, s: f64, y: f64, t: f64) -> Result<Self> {
        if ![x, s, y, t].iter().all(|v| v.is_finite()) {
            return arg("landscape coordinates must be finite");
        }
        if !(s < t) {
            return arg(format!("landscape query needs s < t, got s = {s}, t = {t}"));
        }
        Ok(Self { x, s, y, t })
    }
}

/// Shift `a` and per-line constant `b` of the rescaled field with `n` lines:
/// `a = n^(-2/3) / 2`, `b = -n^(-1/3)`.
pub fn scaling_constants(n: usize) -> (f64, f64) {
    let n = n as f64;
    (0.5 * n.powf(-2.0 / 3.0), -n.powf(-1.0 / 3.0))
}

/// Drift and diffusion of the line Brownian motions for `n` lines.
pub fn line_law(n: usize) -> (f64, f64) {
    (-2.0 * (n as f64).cbrt(), 2.0)
}

/// Mean value lost per line when breakpoints are restricted to a grid with
/// step `delta` and per-line shift `r = a / delta` cells:
/// `kappa(r) * sqrt(delta)` with `kappa(r) = K - c / (r + r0)`.
///
/// `K = -2 zeta(1/2) / sqrt(2 pi)` is the continuity correction of a
/// discretely monitored maximum of a diffusion-4 Brownian motion; `c` and `r0`
/// are fitted to exact point-to-point means over `r` in `[1.26, 10]`.
pub fn grid_bias(n: usize, delta: f64) -> f64 {
    let (a, _) = scaling_constants(n);
    let r = a / delta;
    (GRID_BIAS_LIMIT - GRID_BIAS_C / (r + GRID_BIAS_R0)).max(0.0) * delta.sqrt()
}

const GRID_BIAS_LIMIT: f64 = 1.165_245_289_717_386;
const GRID_BIAS_C: f64 = 0.309;
const GRID_BIAS_R0: f64 = 0.648;

/// Per-line shifts under cumulative rounding.
pub fn line_shifts(n: usize, delta: f64) -> Vec<usize> {
    let (a, _) = scaling_constants(n);
    let r = a / delta;
    (0..n)
        .map(|l| ((l + 1) as f64 * r).round() as usize - (l as f64 * r).round() as usize)
        .collect()
}

/// Construction parameters of a random field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldParams {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub delta: f64,
    /// Add [`grid_bias`] to the per-line constant.
    pub grid_correction: bool,
}

impl FieldParams {
    pub fn new(n: usize, x_min: f64, x_max: f64, delta: f64) -> Self {
        Self {
            n,
            x_min,
            x_max,
            delta,
            grid_correction: true,
        }
    }

    /// Symmetric window `[-half_width, half_width]`.
    pub fn symmetric(n: usize, half_width: f64, delta: f64) -> Self {
        Self::new(n, -half_width, half_width, delta)
    }

    pub fn uncorrected(mut self) -> Self {
        self.grid_correction = false;
        self
    }

    /// Number of grid intervals in the window.
    pub fn cells(&self) -> usize {
        ((self.x_max - self.x_min) / self.delta).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return arg("a field needs at least one line");
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return arg(format!("grid step must be positive, got {}", self.delta));
        }
        if !self.x_min.is_finite() || !self.x_max.is_finite() || !(self.x_min < self.x_max) {
            return arg(format!(
                "window needs x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            ));
        }
        let shifts = line_shifts(self.n, self.delta);
        let need = shifts.iter().copied().max().unwrap_or(0).max(1);
        if self.cells() < need {
            return arg(format!(
                "window [{}, {}] holds {} cells but the per-line shift needs at least {} \
                 (minimum width {})",
                self.x_min,
                self.x_max,
                self.cells(),
                need,
                need as f64 * self.delta
            ));
        }
        Ok(())
    }
}

/// Immutable LPP field; rows are shared between a field and its resamplings.
#[derive(Clone, Debug)]
pub struct LppField {
    n: usize,
    x_min: f64,
    x_max: f64,
    delta: f64,
    m: usize,
    margin: usize,
    shifts: Arc<[usize]>,
    drift: f64,
    diffusion: f64,
    a: f64,
    b: f64,
    bonus: f64,
    seed: u64,
    rows: Vec<Arc<[f64]>>,
    row_tags: Vec<u64>,
    id: u64,
}

impl LppField {
    /// Samples a field. Line `l` uses `rng.fork(l)`; within a line, cells are
    /// drawn outwards from the spatial origin so that fields over nested
    /// windows on the same grid share their common increments.
    pub fn build(rng: &Rng, params: &FieldParams) -> Result<Self> {
        params.validate()?;
        let shifts: Vec<usize> = line_shifts(params.n, params.delta);
        let margin = shifts.iter().copied().max().unwrap_or(0);
        let m = params.cells();
        let (drift, diffusion) = line_law(params.n);
        let rows: Vec<Arc<[f64]>> = (0..params.n)
            .map(|l| sample_row(rng, l, params, m, margin, drift, diffusion))
            .collect();
        let row_tags = (0..params.n).map(|l| row_tag(rng, l)).collect();
        let (a, b) = scaling_constants(params.n);
        let bonus = if params.grid_correction {
            b + grid_bias(params.n, params.delta)
        } else {
            b
        };
        Ok(Self::assemble(
            params.n,
            params.x_min,
            params.x_max,
            params.delta,
            m,
            margin,
            shifts.into(),
            (drift, diffusion),
            (a, b, bonus),
            rng.seed(),
            rows,
            row_tags,
        ))
    }

    /// Field with explicit rows of `m` increments each, a uniform per-line
    /// shift and a per-line constant. Rows carry `shift` extra increments on
    /// the left (length `m + shift`). Grid step is 1 and the window `[0, m]`.
    pub fn from_rows(rows: Vec<Vec<f64>>, shift: usize, bonus: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return arg("a field needs at least one line");
        }
        let len = rows[0].len();
        if len <= shift {
            return arg(format!("rows of length {len} leave no cells beside a shift of {shift}"));
        }
        if rows.iter().any(|r| r.len() != len) {
            return arg("all rows must have the same length");
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return arg("increments must be finite");
        }
        if !bonus.is_finite() {
            return arg("per-line constant must be finite");
        }
        let m = len - shift;
        let row_tags: Vec<u64> = rows
            .iter()
            .map(|r| r.iter().fold(0x0F1E_1D00_u64, |h, v| mix64(h ^ v.to_bits())))
            .collect();
        let rows = rows.into_iter().map(Arc::from).collect();
        let (a, b) = scaling_constants(n);
        Ok(Self::assemble(
            n,
            0.0,
            m as f64,
            1.0,
            m,
            shift,
            vec![shift; n].into(),
            (0.0, 0.0),
            (a, b, bonus),
            0,
            rows,
            row_tags,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        n: usize,
        x_min: f64,
        x_max: f64,
        delta: f64,
        m: usize,
        margin: usize,
        shifts: Arc<[usize]>,
        (drift, diffusion): (f64, f64),
        (a, b, bonus): (f64, f64, f64),
        seed: u64,
        rows: Vec<Arc<[f64]>>,
        row_tags: Vec<u64>,
    ) -> Self {
        let mut field = Self {
            n,
            x_min,
            x_max,
            delta,
            m,
            margin,
            shifts,
            drift,
            diffusion,
            a,
            b,
            bonus,
            seed,
            rows,
            row_tags,
            id: 0,
        };
        field.id = field.compute_id();
        field
    }

    fn compute_id(&self) -> u64 {
        let mut h = mix64(self.n as u64 ^ 0x00F1_E1D0);
        for v in [self.x_min, self.x_max, self.delta, self.bonus] {
            h = mix64(h ^ v.to_bits());
        }
        for (&s, &t) in self.shifts.iter().zip(&self.row_tags) {
            h = mix64(h ^ s as u64);
            h = mix64(h ^ t);
        }
        h
    }

    /// Same increments with a different per-line constant.
    pub fn with_bonus(&self, bonus: f64) -> Self {
        let mut f = self.clone();
        f.bonus = bonus;
        f.id = f.compute_id();
        f
    }

    /// Replaces the lines covering times `[time_lo, time_hi)` with lines
    /// sampled from `rng`; the other rows are shared with `self`.
    pub fn resample(&self, rng: &Rng, time_lo: f64, time_hi: f64) -> Result<Self> {
        if !(0.0 <= time_lo && time_lo < time_hi) {
            return arg(format!("empty resampling interval [{time_lo}, {time_hi})"));
        }
        let lo = self.line_boundary(time_lo)?;
        let hi = self.line_boundary(time_hi.min(1.0))?;
        if lo >= hi {
            return arg(format!(
                "resampling interval [{time_lo}, {time_hi}) contains no line"
            ));
        }
        let params = FieldParams::new(self.n, self.x_min, self.x_max, self.delta);
        let mut f = self.clone();
        for l in lo..hi {
            f.rows[l] = sample_row(rng, l, &params, self.m, self.margin, self.drift, self.diffusion);
            f.row_tags[l] = row_tag(rng, l);
        }
        f.id = f.compute_id();
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of grid intervals; nodes are `0..=m`.
    pub fn cells(&self) -> usize {
        self.m
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn shift(&self, line: usize) -> usize {
        self.shifts[line]
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// The per-line constant actually added by landscape sweeps.
    pub fn bonus(&self) -> f64 {
        self.bonus
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Increments of line `l`, storage order (`m + margin` values).
    pub fn row(&self, line: usize) -> &[f64] {
        &self.rows[line]
    }

    #[cfg(test)]
    pub(crate) fn row_arc(&self, line: usize) -> &Arc<[f64]> {
        &self.rows[line]
    }

    /// Position of node `k`.
    pub fn position(&self, node: isize) -> f64 {
        self.x_min + node as f64 * self.delta
    }

    /// Nearest node to `x`.
    pub fn node(&self, x: f64) -> Result<usize> {
        let k = ((x - self.x_min) / self.delta).round();
        if !(k >= 0.0 && k <= self.m as f64) {
            return range(format!(
                "position {x} is outside the window [{}, {}]",
                self.x_min, self.x_max
            ));
        }
        Ok(k as usize)
    }

    /// Line boundary `floor(s * n)` of time `s` in `[0, 1]`.
    pub fn line_boundary(&self, s: f64) -> Result<usize> {
        if !(s >= -TIME_TOL && s <= 1.0 + TIME_TOL) {
            return range(format!("time {s} is outside [0, 1]"));
        }
        Ok(((s * self.n as f64 + TIME_TOL).floor().max(0.0) as usize).min(self.n))
    }

    /// Time of line boundary `j`.
    pub fn boundary_time(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    /// Sum of increments of `line` from cell `from` to cell `to` (`from <= to`).
    pub fn line_increment(&self, line: usize, from: isize, to: isize) -> f64 {
        let row = &self.rows[line];
        let lo = (from + self.margin as isize) as usize;
        let hi = (to + self.margin as isize) as usize;
        row[lo..hi].iter().fold(0.0, |s, v| s + v)
    }
}

fn row_tag(rng: &Rng, line: usize) -> u64 {
    mix64(mix64(rng.seed() ^ mix64(line as u64)) ^ rng.stream())
}

fn sample_row(
    rng: &Rng,
    line: usize,
    params: &FieldParams,
    m: usize,
    margin: usize,
    drift: f64,
    diffusion: f64,
) -> Arc<[f64]> {
    let len = m + margin;
    let mean = drift * params.delta;
    let sd = (diffusion * params.delta).sqrt();
    let line_rng = rng.fork(line as u64);
    // Absolute index of storage cell 0: cell i covers [x0 + i*delta, x0 + (i+1)*delta].
    let first = (params.x_min / params.delta).round() as i64 - margin as i64;
    let last = first + len as i64; // exclusive
    let mut row = vec![0.0; len];
    if last > 0 {
        let mut right = line_rng.fork(0);
        for k in 0..last {
            let v = mean + sd * right.standard_normal();
            if k >= first {
                row[(k - first) as usize] = v;
            }
        }
    }
    if first < 0 {
        let mut left = line_rng.fork(1);
        for k in (first..0).rev() {
            let v = mean + sd * left.standard_normal();
            if k < last {
                row[(k - first) as usize] = v;
            }
        }
    }
    row.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_consistent() {
        let (a, b) = scaling_constants(8);
        assert_eq!(a, 0.125);
        assert_eq!(b, -0.5);
        let (a, b) = scaling_constants(1);
        assert_eq!((a, b), (0.5, -1.0));
        let f = LppField::build(&Rng::new(1, 0), &FieldParams::symmetric(8, 1.0, 1.0 / 32.0)).unwrap();
        assert_eq!((f.a(), f.b()), scaling_constants(8));
        assert_eq!(line_law(8), (-4.0, 2.0));
    }

    #[test]
    fn shifts_track_total() {
        let n = 100;
        let delta = 1.0 / 64.0;
        let s = line_shifts(n, delta);
        let (a, _) = scaling_constants(n);
        let total: usize = s.iter().sum();
        assert!((total as f64 - n as f64 * a / delta).abs() <= 0.5);
        assert_eq!(line_shifts(512, 1.0 / 256.0), vec![2; 512]);
    }

    #[test]
    fn window_too_small_reports_minimum() {
        let p = FieldParams::new(8, 0.0, 0.05, 1.0 / 64.0);
        let err = LppField::build(&Rng::new(0, 0), &p).unwrap_err().to_string();
        assert!(err.contains("minimum width"), "{err}");
        assert!(LppField::build(&Rng::new(0, 0), &FieldParams::new(0, 0.0, 1.0, 0.1)).is_err());
        assert!(LppField::build(&Rng::new(0, 0), &FieldParams::new(4, 1.0, 0.0, 0.1)).is_err());
        assert!(LppField::build(&Rng::new(0, 0), &FieldParams::new(4, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn deterministic_and_shared_on_nested_windows() {
        let rng = Rng::new(42, 3);
        let small = FieldParams::symmetric(16, 1.0, 1.0 / 32.0);
        let big = FieldParams::symmetric(16, 2.0, 1.0 / 32.0);
        let f1 = LppField::build(&rng, &small).unwrap();
        let f2 = LppField::build(&rng, &small).unwrap();
        assert_eq!(f1.id(), f2.id());
        for l in 0..16 {
            assert_eq!(f1.row(l), f2.row(l));
        }
        let g = LppField::build(&rng, &big).unwrap();
        let off = 32; // one unit of extra window on the left
        for l in 0..16 {
            assert_eq!(f1.row(l), &g.row(l)[off..off + f1.row(l).len()]);
        }
    }

    #[test]
    fn increments_have_line_law() {
        let f = LppField::build(&Rng::new(5, 0), &FieldParams::symmetric(64, 4.0, 1.0 / 64.0)).unwrap();
        let all: Vec<f64> = (0..64).flat_map(|l| f.row(l).to_vec()).collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let d = 1.0 / 64.0;
        assert!((mean - f.drift() * d).abs() < 4.0 * (2.0 * d / n).sqrt());
        assert!((var / (2.0 * d) - 1.0).abs() < 0.02);
    }

    #[test]
    fn time_and_space_indexing() {
        let f = LppField::build(&Rng::new(1, 0), &FieldParams::symmetric(8, 1.0, 1.0 / 32.0)).unwrap();
        assert_eq!(f.line_boundary(0.0).unwrap(), 0);
        assert_eq!(f.line_boundary(1.0).unwrap(), 8);
        assert_eq!(f.line_boundary(0.375).unwrap(), 3);
        assert!(f.line_boundary(1.5).is_err());
        assert_eq!(f.node(0.0).unwrap(), 32);
        assert!(f.node(1.5).is_err());
    }

    #[test]
    fn resample_replaces_only_interval() {
        let f = LppField::build(&Rng::new(1, 0), &FieldParams::symmetric(16, 1.0, 1.0 / 32.0)).unwrap();
        let g = f.resample(&Rng::new(99, 0), 0.25, 0.5).unwrap();
        for l in 0..16 {
            let same = f.row(l) == g.row(l);
            assert_eq!(same, !(4..8).contains(&l), "line {l}");
            if same {
                assert!(Arc::ptr_eq(f.row_arc(l), g.row_arc(l)));
            }
        }
        assert_ne!(f.id(), g.id());
        assert!(f.resample(&Rng::new(99, 0), 0.5, 0.5).is_err());
    }
}
