//! Rectangular grids over the parameter space.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ParameterPoint;

/// `n` evenly spaced values on `[lo, hi]`, or on `(lo, hi]` when `left_open`
/// (then the values are `lo + (hi - lo) k / n` for `k = 1..=n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub left_open: bool,
}

impl Axis {
    pub fn closed(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, left_open: false }
    }

    pub fn left_open(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n, left_open: true }
    }

    /// A one-point axis.
    pub fn point(x: f64) -> Self {
        Self::closed(x, x, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.n;
        if self.left_open {
            return (1..=n)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / n as f64)
                .collect();
        }
        if n == 1 {
            return vec![self.lo];
        }
        // Written so that a grid symmetric about zero is exactly symmetric.
        let d = (n - 1) as f64;
        (0..n)
            .map(|i| (self.lo * (n - 1 - i) as f64 + self.hi * i as f64) / d)
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `lo:hi:n`, or `(lo:hi:n` for a left-open axis, or a single number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("bad grid axis '{s}', expected lo:hi:n or (lo:hi:n"));
        let (left_open, body) = match s.strip_prefix('(') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('[').unwrap_or(s)),
        };
        let parts: Vec<&str> = body.split(':').collect();
        let axis = match parts.as_slice() {
            [x] => Axis::point(x.trim().parse().map_err(|_| bad())?),
            [lo, hi, n] => Axis {
                lo: lo.trim().parse().map_err(|_| bad())?,
                hi: hi.trim().parse().map_err(|_| bad())?,
                n: n.trim().parse().map_err(|_| bad())?,
                left_open,
            },
            _ => return Err(bad()),
        };
        if axis.n == 0 || !axis.lo.is_finite() || !axis.hi.is_finite() || axis.hi < axis.lo {
            return Err(bad());
        }
        if axis.left_open && axis.hi == axis.lo {
            return Err(bad());
        }
        Ok(axis)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.left_open { "(" } else { "" };
        write!(f, "{open}{}:{}:{}", self.lo, self.hi, self.n)
    }
}

/// Cartesian product of axes; the first axis varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaGrid {
    pub axes: Vec<Axis>,
}

impl ThetaGrid {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<ParameterPoint> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut out = vec![Vec::with_capacity(self.dim())];
        for vs in &values {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vs.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(ParameterPoint).collect()
    }
}

impl FromStr for ThetaGrid {
    type Err = Error;

    /// Comma-separated axes, e.g. `-6:6:121,(0:10:100`.
    fn from_str(s: &str) -> Result<Self> {
        let axes = s.split(',').map(str::parse).collect::<Result<Vec<Axis>>>()?;
        Ok(Self { axes })
    }
}

impl fmt::Display for ThetaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axes.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_axis_is_exactly_symmetric() {
        let v = Axis::closed(-6.0, 6.0, 121).values();
        assert_eq!(v[0], -6.0);
        assert_eq!(v[120], 6.0);
        assert_eq!(v[60], 0.0);
        for i in 0..121 {
            assert_eq!(v[i], -v[120 - i]);
        }
    }

    #[test]
    fn left_open_axis_skips_lower_end() {
        let v: Axis = "(0:10:4".parse().unwrap();
        assert_eq!(v.values(), vec![2.5, 5.0, 7.5, 10.0]);
    }

    #[test]
    fn parse_grid() {
        let g: ThetaGrid = "-1:1:3,0.5".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].0, vec![-1.0, 0.5]);
        assert_eq!(pts[2].0, vec![1.0, 0.5]);
        let g: ThetaGrid = "0:1:2,0:1:3".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts[1].0, vec![0.0, 0.5]);
        assert_eq!(pts[3].0, vec![1.0, 0.0]);
        assert!("1:0:3".parse::<ThetaGrid>().is_err());
        assert!("0:1:0".parse::<ThetaGrid>().is_err());
        assert!("a:b".parse::<ThetaGrid>().is_err());
    }
}
