//! Vector quantizers over unions of axis-aligned rectangles, and their
//! composition into superquantizers.
//!
//! Cells are half-open: a point belongs to a rectangle when `lo <= x < hi`
//! on every axis. At most one cell of a quantizer may be the complement of
//! all the others; it also absorbs whatever boundary points the half-open
//! rule leaves uncovered.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bound::Bound;
use crate::error::{Error, Result};

/// Cap on the number of elementary grid cells visited by the coverage check.
const COVERAGE_CHECK_LIMIT: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.lo
            .total_cmp(&other.lo)
            .then(self.hi.total_cmp(&other.hi))
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [Bound(self.lo), Bound(self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[Bound; 2]>::deserialize(d)?;
        Ok(Self { lo: lo.0, hi: hi.0 })
    }
}

/// Axis-aligned rectangle, one interval per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rect(pub Vec<Interval>);

impl Rect {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.0.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    /// Positive-measure overlap of two half-open rectangles.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .all(|(a, b)| a.lo.max(b.lo) < a.hi.min(b.hi))
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.cmp_total(b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

/// One quantization region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    /// Disjoint union of rectangles.
    Rects(Vec<Rect>),
    /// Everything not covered by the sibling cells.
    Complement,
}

impl Cell {
    pub fn is_complement(&self) -> bool {
        matches!(self, Cell::Complement)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorQuantizer {
    /// Dimension of the subvector this quantizer reads.
    pub dim: usize,
    /// Number of levels `R`; must equal `cells.len()`.
    pub levels: usize,
    pub cells: Vec<Cell>,
}

impl VectorQuantizer {
    pub fn new(dim: usize, cells: Vec<Cell>) -> Result<Self> {
        let q = Self {
            dim,
            levels: cells.len(),
            cells,
        };
        let issues = q.check();
        if issues.is_empty() {
            Ok(q)
        } else {
            Err(Error::InvalidQuantizer(issues.join("; ")))
        }
    }

    /// Binary scalar quantizer with `I1 = [a, b)` and `I2` its complement.
    pub fn binary_interval(a: f64, b: f64) -> Result<Self> {
        Self::new(
            1,
            vec![Cell::Rects(vec![Rect(vec![Interval::new(a, b)])]), Cell::Complement],
        )
    }

    /// Binary quantizer with one rectangle as level 1 and its complement as level 2.
    pub fn binary_rect(rect: Rect) -> Result<Self> {
        Self::new(rect.dim(), vec![Cell::Rects(vec![rect]), Cell::Complement])
    }

    /// Scalar quantizer from increasing thresholds `t_1 < ... < t_{R-1}`:
    /// level `r` is `[t_{r-1}, t_r)` with `t_0 = -inf`, `t_R = inf`.
    pub fn thresholds(ts: &[f64]) -> Result<Self> {
        let mut edges = Vec::with_capacity(ts.len() + 2);
        edges.push(f64::NEG_INFINITY);
        edges.extend_from_slice(ts);
        edges.push(f64::INFINITY);
        let cells = edges
            .windows(2)
            .map(|w| Cell::Rects(vec![Rect(vec![Interval::new(w[0], w[1])])]))
            .collect();
        Self::new(1, cells)
    }

    pub fn levels(&self) -> usize {
        self.cells.len()
    }

    pub fn complement_index(&self) -> Option<usize> {
        self.cells.iter().position(Cell::is_complement)
    }

    /// Human-readable structural problems; empty when the quantizer is valid.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push("dim must be at least 1".into());
        }
        if self.levels == 0 {
            out.push("levels must be at least 1".into());
        }
        if self.levels != self.cells.len() {
            out.push(format!(
                "levels = {} but {} cells are listed",
                self.levels,
                self.cells.len()
            ));
        }
        let n_comp = self.cells.iter().filter(|c| c.is_complement()).count();
        if n_comp > 1 {
            out.push(format!("{n_comp} complement cells; at most one is allowed"));
        }
        let mut rects: Vec<(usize, &Rect)> = Vec::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            if let Cell::Rects(rs) = cell {
                if rs.is_empty() {
                    out.push(format!("cell {} is empty", ci + 1));
                }
                for (ri, r) in rs.iter().enumerate() {
                    if r.dim() != self.dim {
                        out.push(format!(
                            "cell {} rect {ri} has {} axes, expected {}",
                            ci + 1,
                            r.dim(),
                            self.dim
                        ));
                        continue;
                    }
                    if let Some(iv) = r.0.iter().find(|iv| iv.lo.is_nan() || iv.hi.is_nan() || !(iv.lo < iv.hi)) {
                        out.push(format!(
                            "cell {} rect {ri} has empty interval [{}, {})",
                            ci + 1,
                            iv.lo,
                            iv.hi
                        ));
                        continue;
                    }
                    rects.push((ci, r));
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                if rects[i].1.overlaps(rects[j].1) {
                    out.push(format!(
                        "rectangles in cells {} and {} overlap",
                        rects[i].0 + 1,
                        rects[j].0 + 1
                    ));
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        match self.uncovered_witness(&rects) {
            Some(Some(x)) if n_comp == 0 => {
                out.push(format!("cells do not cover the domain; e.g. {x:?} is uncovered"))
            }
            Some(None) if n_comp == 1 => out.push("complement cell is empty".into()),
            _ => {}
        }
        out
    }

    /// Exact coverage test on the grid of rectangle breakpoints. Returns
    /// `Some(Some(x))` with an uncovered point, `Some(None)` when the
    /// rectangles cover everything, and `None` when the grid is too large.
    fn uncovered_witness(&self, rects: &[(usize, &Rect)]) -> Option<Option<Vec<f64>>> {
        let reps: Vec<Vec<f64>> = (0..self.dim)
            .map(|axis| {
                let mut b: Vec<f64> = rects
                    .iter()
                    .flat_map(|(_, r)| [r.0[axis].lo, r.0[axis].hi])
                    .filter(|v| v.is_finite())
                    .collect();
                b.sort_by(f64::total_cmp);
                b.dedup();
                // One representative per elementary half-open interval.
                let mut pts = Vec::with_capacity(b.len() + 1);
                match b.first() {
                    // Below the first breakpoint, then each breakpoint starts an interval.
                    Some(&first) => {
                        pts.push(first - 1.0);
                        pts.extend_from_slice(&b);
                    }
                    None => pts.push(0.0),
                }
                pts
            })
            .collect();
        let total: u128 = reps.iter().map(|r| r.len() as u128).product();
        if total > COVERAGE_CHECK_LIMIT {
            return None;
        }
        let mut idx = vec![0usize; self.dim];
        let mut x = vec![0.0; self.dim];
        loop {
            for (a, &i) in idx.iter().enumerate() {
                x[a] = reps[a][i];
            }
            if !rects.iter().any(|(_, r)| r.contains(&x)) {
                return Some(Some(x));
            }
            let mut a = self.dim;
            loop {
                if a == 0 {
                    return Some(None);
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < reps[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Level index in `1..=R` of the cell containing `x`.
    pub fn quantize(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "quantizer input",
                expected: self.dim,
                got: x.len(),
            });
        }
        for (ci, cell) in self.cells.iter().enumerate() {
            if let Cell::Rects(rs) = cell {
                if rs.iter().any(|r| r.contains(x)) {
                    return Ok(ci + 1);
                }
            }
        }
        self.complement_index()
            .map(|c| c + 1)
            .ok_or_else(|| Error::Unquantizable(x.to_vec()))
    }

    /// Copy with the rectangles of each cell in a canonical order. Cell order
    /// (the level labels) is preserved.
    pub fn canonical(&self) -> Self {
        let cells = self
            .cells
            .iter()
            .map(|c| match c {
                Cell::Rects(rs) => {
                    let mut rs = rs.clone();
                    rs.sort_by(Rect::cmp_total);
                    Cell::Rects(rs)
                }
                Cell::Complement => Cell::Complement,
            })
            .collect();
        Self {
            dim: self.dim,
            levels: self.levels,
            cells,
        }
    }

    /// Region-list equality after canonical ordering.
    pub fn same_as(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

/// Outcome `[s_1, ..., s_L]` of a superquantizer, each `s_l` in `1..=R_l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeVector(pub Vec<usize>);

impl OutcomeVector {
    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for OutcomeVector {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for OutcomeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "({})", parts.join(" "))
    }
}

/// Ordered list of vector quantizers applied to consecutive subvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SuperQuantizer {
    pub quantizers: Vec<VectorQuantizer>,
}

impl SuperQuantizer {
    pub fn new(quantizers: Vec<VectorQuantizer>) -> Result<Self> {
        if quantizers.is_empty() {
            return Err(Error::InvalidQuantizer(
                "a superquantizer needs at least one vector quantizer".into(),
            ));
        }
        Ok(Self { quantizers })
    }

    pub fn single(q: VectorQuantizer) -> Self {
        Self {
            quantizers: vec![q],
        }
    }

    /// Subvector lengths.
    pub fn partition(&self) -> Vec<usize> {
        self.quantizers.iter().map(|q| q.dim).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.quantizers.iter().map(|q| q.dim).sum()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.quantizers.iter().map(|q| q.levels()).collect()
    }

    /// `|S_j| = prod_l R_jl`.
    pub fn alphabet_size(&self) -> u128 {
        self.quantizers.iter().map(|q| q.levels() as u128).product()
    }

    /// Offset of subvector `l` within the observation vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.quantizers
            .iter()
            .map(|q| {
                let o = off;
                off += q.dim;
                o
            })
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<OutcomeVector> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "superquantizer input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut off = 0;
        let mut symbols = Vec::with_capacity(self.quantizers.len());
        for q in &self.quantizers {
            symbols.push(q.quantize(&x[off..off + q.dim])?);
            off += q.dim;
        }
        Ok(OutcomeVector(symbols))
    }

    /// Every outcome, in lexicographic order (last symbol varies fastest).
    pub fn outcome_alphabet(&self) -> Vec<OutcomeVector> {
        let levels = self.levels();
        let n = self.alphabet_size() as usize;
        (0..n).map(|i| self.outcome_at(i, &levels)).collect()
    }

    fn outcome_at(&self, mut index: usize, levels: &[usize]) -> OutcomeVector {
        let mut s = vec![0; levels.len()];
        for l in (0..levels.len()).rev() {
            s[l] = index % levels[l] + 1;
            index /= levels[l];
        }
        OutcomeVector(s)
    }

    /// Position of `s` in [`outcome_alphabet`](Self::outcome_alphabet).
    pub fn outcome_index(&self, s: &OutcomeVector) -> Option<usize> {
        if s.0.len() != self.quantizers.len() {
            return None;
        }
        let mut idx = 0usize;
        for (q, &sym) in self.quantizers.iter().zip(&s.0) {
            if sym == 0 || sym > q.levels() {
                return None;
            }
            idx = idx * q.levels() + (sym - 1);
        }
        Some(idx)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.quantizers.len() == other.quantizers.len()
            && self
                .quantizers
                .iter()
                .zip(&other.quantizers)
                .all(|(a, b)| a.same_as(b))
    }
}

/// Free-function form of [`VectorQuantizer::quantize`].
pub fn quantize(q: &VectorQuantizer, x: &[f64]) -> Result<usize> {
    q.quantize(x)
}

/// Free-function form of [`SuperQuantizer::apply`].
pub fn apply_super(sq: &SuperQuantizer, x: &[f64]) -> Result<OutcomeVector> {
    sq.apply(x)
}

/// Free-function form of [`SuperQuantizer::outcome_alphabet`].
pub fn outcome_alphabet(sq: &SuperQuantizer) -> Vec<OutcomeVector> {
    sq.outcome_alphabet()
}
