//! Real-valued functions sampled on a uniform time grid.

use crate::error::{arg, range, Result};

/// Relative tolerance used when matching a time against grid nodes.
const GRID_TOL: f64 = 1e-7;

/// `values[k]` is the function at time `t0 + k * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return arg(format!("grid step must be positive, got {dt}"));
        }
        if !t0.is_finite() {
            return arg("start time must be finite");
        }
        if values.is_empty() {
            return arg("a sampled path needs at least one value");
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return arg(format!("non-finite value {} at index {k}", values[k]));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Grid index of time `t`, if `t` is a node of the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() > GRID_TOL * (1.0 + k.abs()) || k < 0.0 {
            return None;
        }
        let k = k as usize;
        (k < self.values.len()).then_some(k)
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        match self.index_of(t) {
            Some(k) => Ok(self.values[k]),
            None => range(format!(
                "time {t} is not a grid node of [{}, {}] with step {}",
                self.t0,
                self.t_end(),
                self.dt
            )),
        }
    }

    /// The path restricted to the grid nodes in `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<SampledPath> {
        if !(a <= b) {
            return arg(format!("empty interval [{a}, {b}]"));
        }
        let lo = ((a - self.t0) / self.dt - GRID_TOL).ceil().max(0.0) as usize;
        let hi_f = ((b - self.t0) / self.dt + GRID_TOL).floor();
        if hi_f < 0.0 || lo >= self.values.len() {
            return range(format!("[{a}, {b}] does not meet the path's grid"));
        }
        let hi = (hi_f as usize).min(self.values.len() - 1);
        if lo > hi {
            return range(format!("[{a}, {b}] contains no grid node"));
        }
        Ok(SampledPath {
            t0: self.time(lo),
            dt: self.dt,
            values: self.values[lo..=hi].to_vec(),
        })
    }

    /// Every `step`-th node, starting from the first.
    pub fn subsample(&self, step: usize) -> Result<SampledPath> {
        if step == 0 {
            return arg("subsampling step must be positive");
        }
        Ok(SampledPath {
            t0: self.t0,
            dt: self.dt * step as f64,
            values: self.values.iter().step_by(step).copied().collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> SampledPath {
        SampledPath {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Pointwise combination of two paths on the same grid.
    pub fn zip_with(
        &self,
        other: &SampledPath,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<SampledPath> {
        if self.values.len() != other.values.len()
            || (self.t0 - other.t0).abs() > GRID_TOL * self.dt
            || (self.dt - other.dt).abs() > GRID_TOL * self.dt
        {
            return arg("paths live on different grids");
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        SampledPath::new(self.t0, self.dt, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> SampledPath {
        let dt = 1.0 / n as f64;
        SampledPath::new(0.0, dt, (0..=n).map(|k| k as f64 * dt).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SampledPath::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(SampledPath::new(0.0, 0.1, vec![]).is_err());
        assert!(SampledPath::new(0.0, 0.1, vec![f64::NAN]).is_err());
        assert!(SampledPath::new(0.0, 0.1, vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn lookup_and_restrict() {
        let p = ramp(10);
        assert_eq!(p.index_of(0.3), Some(3));
        assert_eq!(p.index_of(0.35), None);
        assert_eq!(p.index_of(1.1), None);
        let r = p.restrict(0.25, 0.75).unwrap();
        assert_eq!(r.len(), 5);
        assert!((r.t0() - 0.3).abs() < 1e-12);
        assert!((r.value_at(0.7).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn subsample_keeps_grid() {
        let p = ramp(8).subsample(4).unwrap();
        assert_eq!(p.values(), &[0.0, 0.5, 1.0]);
        assert_eq!(p.dt(), 0.5);
    }
}
