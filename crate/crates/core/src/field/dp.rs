//! Dynamic-programming sweeps over the field.
//!
//! Forward sweeps carry `V(p)`, the best value of a path leaving the current
//! line at node `p`. On line `l` with shift `h`, the path may enter at any
//! extended cell `e >= -h`, and
//!
//! ```text
//! run(e) = max(run(e - 1) + inc(e - 1 -> e), V_prev(e + h) + bonus)
//! V(p)   = run(p)
//! ```
//!
//! Backward sweeps carry `U(p)`, the best value from node `p` at a line
//! boundary to the fixed end:
//!
//! ```text
//! D(e) = max(inc(e -> e + 1) + D(e + 1), bonus + U_next(e))
//! U(p) = D(p - h)
//! ```
//!
//! Both recurrences update a single buffer in place. Unreachable cells hold
//! negative infinity.


use super::{GridPoint, LandscapeQuery, LppField, TieBreak};
use crate::error::{arg, range, Result};

/// A recorded forward sweep: final exit values plus per-cell choice bits.
#[derive(Clone, Debug)]
pub struct Sweep {
    first_line: usize,
    last_line: usize,
    bonus: f64,
    values: Vec<f64>,
    words: usize,
    bits: Vec<u64>,
}

impl Sweep {
    /// Exit values on the last line, nodes `0..=m`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_line(&self) -> usize {
        self.first_line
    }

    pub fn last_line(&self) -> usize {
        self.last_line
    }

    pub fn bonus(&self) -> f64 {
        self.bonus
    }

    fn jumped(&self, line: usize, storage: usize) -> bool {
        let base = (line - self.first_line) * self.words;
        self.bits[base + storage / 64] >> (storage % 64) & 1 == 1
    }

    /// Entry cell on the first line and exit node of every line for the
    /// recorded path ending at node `end`.
    pub fn backtrack(&self, field: &LppField, end: usize) -> Result<(isize, Vec<usize>)> {
        if end > field.m {
            return range(format!("end node {end} is outside 0..={}", field.m));
        }
        if self.values[end] == f64::NEG_INFINITY {
            return range(format!("end node {end} is not reachable"));
        }
        let margin = field.margin as isize;
        let lines = self.last_line - self.first_line + 1;
        let mut exits = vec![0; lines];
        let mut e = end as isize;
        for line in (self.first_line..=self.last_line).rev() {
            exits[line - self.first_line] = e as usize;
            let h = field.shifts[line] as isize;
            while !self.jumped(line, (e + margin) as usize) {
                e -= 1;
                debug_assert!(e >= -h);
            }
            if line > self.first_line {
                e += h;
            }
        }
        Ok((e, exits))
    }
}

fn forward_line(
    row: &[f64],
    margin: usize,
    h: usize,
    m: usize,
    v: &mut [f64],
    bonus: f64,
    mut bits: Option<(&mut [u64], TieBreak)>,
) {
    let start = margin - h;
    let end = m + margin;
    let mut run = f64::NEG_INFINITY;
    for idx in start..=end {
        let ent = v[idx - start] + bonus;
        let cont = if idx > start { run + row[idx - 1] } else { f64::NEG_INFINITY };
        run = match bits {
            None => ent.max(cont),
            Some((ref mut b, tie)) => {
                let take = match tie {
                    TieBreak::Leftmost => ent > cont,
                    TieBreak::Rightmost => ent >= cont,
                };
                if take {
                    b[idx / 64] |= 1 << (idx % 64);
                    ent
                } else {
                    cont
                }
            }
        };
        if idx >= margin {
            v[idx - margin] = run;
        }
    }
    for x in &mut v[m + 1..] {
        *x = f64::NEG_INFINITY;
    }
}

fn backward_line(row: &[f64], margin: usize, h: usize, m: usize, u: &mut [f64], bonus: f64) {
    let mut d = f64::NEG_INFINITY;
    for e in (-(h as isize)..=m as isize).rev() {
        let idx = (e + margin as isize) as usize;
        let cont = if e < m as isize { row[idx] + d } else { f64::NEG_INFINITY };
        let ext = if e >= 0 { u[e as usize] + bonus } else { f64::NEG_INFINITY };
        d = cont.max(ext);
        let p = (e + h as isize) as usize;
        if p <= m {
            u[p] = d;
        }
    }
}

impl LppField {
    /// Forward sweep over lines `first..=last`. `init[i]` is the value of
    /// entering the first line at extended cell `i - shift[first]`, before the
    /// per-line constant is added; `init` may be shorter than the line.
    pub(crate) fn sweep_forward(
        &self,
        first: usize,
        last: usize,
        init: &[f64],
        bonus: f64,
        tie: Option<TieBreak>,
    ) -> Sweep {
        let m = self.m;
        let mut v = vec![f64::NEG_INFINITY; m + self.margin + 1];
        let n0 = init.len().min(m + self.shifts[first] + 1);
        v[..n0].copy_from_slice(&init[..n0]);
        let words = (m + self.margin + 1).div_ceil(64);
        let lines = last - first + 1;
        let mut bits = if tie.is_some() {
            vec![0u64; lines * words]
        } else {
            Vec::new()
        };
        for line in first..=last {
            let rec = tie.map(|t| {
                let k = line - first;
                (&mut bits[k * words..(k + 1) * words], t)
            });
            forward_line(&self.rows[line], self.margin, self.shifts[line], m, &mut v, bonus, rec);
        }
        v.truncate(m + 1);
        Sweep {
            first_line: first,
            last_line: last,
            bonus,
            values: v,
            words,
            bits,
        }
    }

    /// Backward sweep over lines `last..=first` from terminal values `term`
    /// on nodes `0..=m`; returns the values at the boundary before `first`.
    pub(crate) fn sweep_backward(&self, first: usize, last: usize, term: &[f64], bonus: f64) -> Vec<f64> {
        let mut u = term.to_vec();
        for line in (first..=last).rev() {
            backward_line(&self.rows[line], self.margin, self.shifts[line], self.m, &mut u, bonus);
        }
        u
    }

    pub(crate) fn check_start(&self, start: GridPoint) -> Result<()> {
        if start.line >= self.n {
            return range(format!("line {} is outside 0..{}", start.line, self.n));
        }
        let h = self.shifts[start.line] as isize;
        if start.cell < -h || start.cell > self.m as isize {
            return range(format!(
                "start cell {} is outside {}..={} on line {}",
                start.cell, -h, self.m, start.line
            ));
        }
        Ok(())
    }

    pub(crate) fn check_pair(&self, start: GridPoint, end: GridPoint) -> Result<()> {
        self.check_start(start)?;
        if end.line >= self.n || end.line < start.line {
            return range(format!(
                "end line {} must lie in {}..{}",
                end.line, start.line, self.n
            ));
        }
        if end.cell < 0 || end.cell > self.m as isize {
            return range(format!("end cell {} is outside 0..={}", end.cell, self.m));
        }
        if end.line == start.line && end.cell < start.cell {
            return arg(format!(
                "end cell {} lies before start cell {} on the same line",
                end.cell, start.cell
            ));
        }
        Ok(())
    }

    pub(crate) fn point_init(&self, start: GridPoint) -> Vec<f64> {
        let h = self.shifts[start.line] as isize;
        let mut init = vec![f64::NEG_INFINITY; (start.cell + h) as usize + 1];
        init[(start.cell + h) as usize] = 0.0;
        init
    }

    /// Maximal sum of increments over staircases from `start` to `end`.
    pub fn raw_last_passage(&self, start: GridPoint, end: GridPoint) -> Result<f64> {
        self.check_pair(start, end)?;
        let s = self.sweep_forward(start.line, end.line, &self.point_init(start), 0.0, None);
        Ok(s.values[end.cell as usize])
    }

    /// `raw_last_passage(start, (k, end_line))` for every node `k` in one sweep.
    pub fn passage_profile(&self, start: GridPoint, end_line: usize) -> Result<Vec<f64>> {
        self.check_pair(start, GridPoint::new(self.m as isize, end_line))?;
        let s = self.sweep_forward(start.line, end_line, &self.point_init(start), 0.0, None);
        Ok(s.values)
    }

    /// Lines `first..=last` used by the time interval `[s, t]`.
    pub fn line_span(&self, s: f64, t: f64) -> Result<(usize, usize)> {
        let j0 = self.line_boundary(s)?;
        let j1 = self.line_boundary(t)?;
        if j1 <= j0 {
            return range(format!("times [{s}, {t}] span no line of a {}-line field", self.n));
        }
        Ok((j0, j1 - 1))
    }

    /// Start point of a landscape path leaving node `node` at the boundary
    /// before `line`.
    pub fn landscape_start(&self, node: usize, line: usize) -> GridPoint {
        GridPoint::new(node as isize - self.shifts[line] as isize, line)
    }

    /// Approximate directed landscape value `L(x, s; y, t)`.
    pub fn landscape_approx(&self, q: LandscapeQuery) -> Result<f64> {
        let (first, last) = self.line_span(q.s, q.t)?;
        let kx = self.node(q.x)?;
        let ky = self.node(q.y)?;
        let start = self.landscape_start(kx, first);
        let s = self.sweep_forward(first, last, &self.point_init(start), self.bonus, None);
        Ok(s.values[ky])
    }

    /// `y -> L(x, s; y, t)` on all nodes.
    pub fn landscape_profile(&self, x: f64, s: f64, t: f64) -> Result<Vec<f64>> {
        let (first, last) = self.line_span(s, t)?;
        let start = self.landscape_start(self.node(x)?, first);
        Ok(self
            .sweep_forward(first, last, &self.point_init(start), self.bonus, None)
            .values)
    }

    /// `x -> L(x, s; y, t)` on all nodes.
    pub fn landscape_profile_to(&self, s: f64, y: f64, t: f64) -> Result<Vec<f64>> {
        let (first, last) = self.line_span(s, t)?;
        let mut term = vec![f64::NEG_INFINITY; self.m + 1];
        term[self.node(y)?] = 0.0;
        Ok(self.sweep_backward(first, last, &term, self.bonus))
    }

    fn check_profile(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.m + 1 {
            return arg(format!(
                "profile has {} values, the grid has {} nodes",
                h.len(),
                self.m + 1
            ));
        }
        if h.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return arg("profile values must be finite or negative infinity");
        }
        if h.iter().all(|&v| v == f64::NEG_INFINITY) {
            return arg("initial profile is identically bottom");
        }
        Ok(())
    }

    /// KPZ fixed point step `h_t(y) = max_x h0(x) + L(x, s; y, t)`; bottom
    /// values are negative infinity.
    pub fn kpz_evolve(&self, h0: &[f64], s: f64, t: f64) -> Result<Vec<f64>> {
        Ok(self.kpz_sweep(h0, s, t, None)?.values)
    }

    /// [`LppField::kpz_evolve`] with choice bits recorded for backtracking.
    pub fn kpz_sweep(&self, h0: &[f64], s: f64, t: f64, tie: Option<TieBreak>) -> Result<Sweep> {
        self.check_profile(h0)?;
        let (first, last) = self.line_span(s, t)?;
        Ok(self.sweep_forward(first, last, h0, self.bonus, tie))
    }

    /// Backward step `g_s(x) = max_y L(x, s; y, t) + g(y)`.
    pub fn kpz_evolve_backward(&self, g: &[f64], s: f64, t: f64) -> Result<Vec<f64>> {
        self.check_profile(g)?;
        let (first, last) = self.line_span(s, t)?;
        Ok(self.sweep_backward(first, last, g, self.bonus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> LppField {
        LppField::from_rows(vec![vec![1.0, 0.0, 2.0], vec![3.0, 1.0, 0.0]], 0, 0.0).unwrap()
    }

    #[test]
    fn two_by_three_example() {
        let f = example();
        let v = f
            .raw_last_passage(GridPoint::new(0, 0), GridPoint::new(3, 1))
            .unwrap();
        assert_eq!(v, 4.0);
    }

    #[test]
    fn profile_matches_pointwise() {
        let f = example();
        let p = f.passage_profile(GridPoint::new(0, 0), 1).unwrap();
        // jump node k' <= k: line0[0..k'] + line1[k'..k]
        assert_eq!(p, vec![0.0, 3.0, 4.0, 4.0]);
        for k in 0..=3 {
            let v = f
                .raw_last_passage(GridPoint::new(0, 0), GridPoint::new(k, 1))
                .unwrap();
            assert_eq!(p[k as usize], v);
        }
    }

    #[test]
    fn single_line_prefix_sums() {
        let f = example();
        let p = f.passage_profile(GridPoint::new(1, 1), 1).unwrap();
        assert_eq!(p[0], f64::NEG_INFINITY);
        assert_eq!(&p[1..], &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_field_is_zero() {
        let f = LppField::from_rows(vec![vec![0.0; 6]; 3], 1, 0.0).unwrap();
        for k in 0..=5 {
            let v = f
                .raw_last_passage(GridPoint::new(-1, 0), GridPoint::new(k, 2))
                .unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn range_checks() {
        let f = example();
        assert!(f.raw_last_passage(GridPoint::new(0, 0), GridPoint::new(4, 1)).is_err());
        assert!(f.raw_last_passage(GridPoint::new(-1, 0), GridPoint::new(3, 1)).is_err());
        assert!(f.raw_last_passage(GridPoint::new(0, 1), GridPoint::new(3, 0)).is_err());
        assert!(f.raw_last_passage(GridPoint::new(2, 0), GridPoint::new(1, 0)).is_err());
        assert!(f.raw_last_passage(GridPoint::new(0, 2), GridPoint::new(1, 2)).is_err());
    }

    #[test]
    fn backward_profile_matches_forward() {
        let rows = vec![
            vec![0.3, -1.2, 0.8, 0.1, -0.4, 0.9],
            vec![-0.2, 0.5, 0.7, -0.9, 0.3, 0.2],
            vec![1.1, -0.3, 0.4, 0.6, -0.8, 0.05],
        ];
        let f = LppField::from_rows(rows, 1, -0.25).unwrap();
        let m = f.cells();
        let end = 3;
        let mut term = vec![f64::NEG_INFINITY; m + 1];
        term[end] = 0.0;
        let back = f.sweep_backward(0, 2, &term, f.bonus());
        for p in 0..=m {
            let start = f.landscape_start(p, 0);
            let fwd = f.sweep_forward(0, 2, &f.point_init(start), f.bonus(), None);
            let a = fwd.values()[end];
            let b = back[p];
            assert!(
                (a == b) || (a - b).abs() < 1e-12,
                "node {p}: forward {a}, backward {b}"
            );
        }
    }

    #[test]
    fn kpz_point_initial_condition() {
        let f = LppField::build(
            &crate::Rng::new(3, 0),
            &super::super::FieldParams::symmetric(16, 1.0, 1.0 / 16.0),
        )
        .unwrap();
        let x0 = f.node(0.25).unwrap();
        let mut h0 = vec![f64::NEG_INFINITY; f.cells() + 1];
        h0[x0] = 0.0;
        let ht = f.kpz_evolve(&h0, 0.25, 0.75).unwrap();
        let prof = f.landscape_profile(0.25, 0.25, 0.75).unwrap();
        assert_eq!(ht, prof);
        assert!(f.kpz_evolve(&vec![f64::NEG_INFINITY; f.cells() + 1], 0.0, 1.0).is_err());
        assert!(f.kpz_evolve(&h0[1..], 0.0, 1.0).is_err());
    }
}
