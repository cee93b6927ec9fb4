use super::{GridPoint, LandscapeQuery, LppField, TieBreak};
use crate::error::{arg, Result};
use crate::path::SampledPath;

/// A maximizing staircase.
///
/// The path enters line `first_line` at extended cell `entry` and leaves line
/// `l` at node `exits[l - first_line]`. `value` includes `bonus` once per line.
#[derive(Clone, Debug)]
pub struct Geodesic {
    pub field_id: u64,
    pub first_line: usize,
    pub last_line: usize,
    pub entry: isize,
    pub exits: Vec<usize>,
    pub bonus: f64,
    pub value: f64,
    pub tie: TieBreak,
    /// Node at the boundary before `first_line` (`entry + shift[first_line]`).
    pub start_node: isize,
    /// Position at the line boundaries `first_line..=last_line + 1`,
    /// time step `1 / n`.
    pub path: SampledPath,
}

impl Geodesic {
    pub fn lines(&self) -> usize {
        self.last_line - self.first_line + 1
    }

    /// Entry cell on `line`.
    pub fn entry_on(&self, field: &LppField, line: usize) -> isize {
        if line == self.first_line {
            self.entry
        } else {
            self.exits[line - 1 - self.first_line] as isize - field.shift(line) as isize
        }
    }

    /// Exit node on `line`.
    pub fn exit_on(&self, line: usize) -> usize {
        self.exits[line - self.first_line]
    }

    /// Node at line boundary `j` (`first_line <= j <= last_line + 1`).
    pub fn node_at_boundary(&self, j: usize) -> isize {
        if j == self.first_line {
            self.start_node
        } else {
            self.exits[j - 1 - self.first_line] as isize
        }
    }

    pub fn start_time(&self) -> f64 {
        self.path.t0()
    }

    pub fn end_time(&self) -> f64 {
        self.path.t_end()
    }
}

impl LppField {
    fn trace(
        &self,
        start: GridPoint,
        end_line: usize,
        end_node: usize,
        bonus: f64,
        tie: TieBreak,
    ) -> Result<Geodesic> {
        let sweep = self.sweep_forward(start.line, end_line, &self.point_init(start), bonus, Some(tie));
        let value = sweep.values()[end_node];
        let (entry, exits) = sweep.backtrack(self, end_node)?;
        debug_assert_eq!(entry, start.cell);
        let start_node = entry + self.shift(start.line) as isize;
        let mut positions = Vec::with_capacity(exits.len() + 1);
        positions.push(self.position(start_node));
        positions.extend(exits.iter().map(|&k| self.position(k as isize)));
        let path = SampledPath::new(self.boundary_time(start.line), 1.0 / self.n() as f64, positions)?;
        Ok(Geodesic {
            field_id: self.id(),
            first_line: start.line,
            last_line: end_line,
            entry,
            exits,
            bonus,
            value,
            tie,
            start_node,
            path,
        })
    }

    /// Geodesic of the raw (constant-free) passage problem; its value equals
    /// [`LppField::raw_last_passage`].
    pub fn extract_geodesic(&self, start: GridPoint, end: GridPoint, tie: TieBreak) -> Result<Geodesic> {
        self.check_pair(start, end)?;
        self.trace(start, end.line, end.cell as usize, 0.0, tie)
    }

    /// Geodesic of the landscape query; its value equals
    /// [`LppField::landscape_approx`].
    pub fn landscape_geodesic(&self, q: LandscapeQuery, tie: TieBreak) -> Result<Geodesic> {
        let (first, last) = self.line_span(q.s, q.t)?;
        let start = self.landscape_start(self.node(q.x)?, first);
        self.trace(start, last, self.node(q.y)?, self.bonus(), tie)
    }

    /// Replays the staircase and returns the running value after each line
    /// (`lines + 1` values starting at 0). Additions happen in the same order
    /// as in the forward sweep, so the last value equals `g.value` exactly.
    pub fn running_values(&self, g: &Geodesic) -> Result<Vec<f64>> {
        if g.field_id != self.id() {
            return arg("geodesic belongs to a different field");
        }
        let margin = self.margin() as isize;
        let mut out = Vec::with_capacity(g.lines() + 1);
        let mut w = 0.0;
        out.push(w);
        for line in g.first_line..=g.last_line {
            let row = self.row(line);
            let e = g.entry_on(self, line);
            let x = g.exit_on(line) as isize;
            w += g.bonus;
            for idx in (e + margin)..(x + margin) {
                w += row[idx as usize];
            }
            out.push(w);
        }
        Ok(out)
    }
}
