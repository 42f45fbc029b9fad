//! Fisher information of the quantized data, its numerical rank, the
//! per-sensor rank bounds, and the Cramer-Rao bound when it exists.
//!
//! `J(theta) = sum_j sum_s (1/q_j^(s)) grad q_j^(s) grad q_j^(s)^T`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::cellprob::{self, CellProbabilityTable};
use crate::error::{Error, Result};
use crate::idqd;
use crate::models::ParameterPoint;
use crate::quantizers::OutcomeVector;
use crate::spec::SystemSpec;

/// Cells with probability below this are dropped from the sum.
pub const Q_FLOOR: f64 = 1e-300;
/// Cells with probability below this are kept but flagged.
pub const Q_FLAG: f64 = 1e-12;
/// Relative factor in the rank tolerance `sigma_max * D * RANK_RTOL`.
pub const RANK_RTOL: f64 = 1e-10;

fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    rows.serialize(s)
}

/// A cell whose probability was tiny enough to be reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedCell {
    pub sensor: usize,
    pub outcome: OutcomeVector,
    pub probability: f64,
    /// False when the cell fell below [`Q_FLOOR`] and was left out of the sum.
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherReport {
    pub theta: ParameterPoint,
    /// `D x D`, emitted row-major.
    #[serde(serialize_with = "ser_matrix")]
    pub matrix: DMatrix<f64>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    pub rank_tolerance: f64,
    pub per_sensor_ranks: Vec<usize>,
    /// `lambda(N, {R_jl})`.
    pub theorem1_bound: u64,
    /// True when `numerical_rank < D`.
    pub singular_verdict: bool,
    pub flagged_cells: Vec<FlaggedCell>,
    #[serde(skip)]
    pub sensor_terms: Vec<DMatrix<f64>>,
}

impl FisherReport {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `sigma_k / sigma_1` (1-based `k`); zero when the matrix vanishes.
    pub fn singular_ratio(&self, k: usize) -> f64 {
        let s1 = self.singular_values.first().copied().unwrap_or(0.0);
        if s1 == 0.0 {
            return 0.0;
        }
        self.singular_values.get(k - 1).copied().unwrap_or(0.0) / s1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Descending singular values, tolerance, and numerical rank of a square matrix.
pub fn numerical_rank(m: &DMatrix<f64>) -> (Vec<f64>, f64, usize) {
    let d = m.nrows();
    if d == 0 {
        return (Vec::new(), 0.0, 0);
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv[0];
    let tol = smax * d as f64 * RANK_RTOL;
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > tol).count()
    };
    (sv, tol, rank)
}

fn sensor_term(t: &CellProbabilityTable, d: usize, flagged: &mut Vec<FlaggedCell>) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(d, d);
    for e in &t.entries {
        let q = e.probability;
        if q < Q_FLAG {
            flagged.push(FlaggedCell {
                sensor: t.sensor,
                outcome: e.outcome.clone(),
                probability: q,
                included: q >= Q_FLOOR,
            });
        }
        if q < Q_FLOOR {
            continue;
        }
        let w = 1.0 / q;
        for a in 0..d {
            let ga = e.gradient[a] * w;
            if ga == 0.0 {
                continue;
            }
            for b in 0..d {
                j[(a, b)] += ga * e.gradient[b];
            }
        }
    }
    // Exact symmetry; the outer products are symmetric up to rounding.
    let jt = j.transpose();
    (j + jt) * 0.5
}

/// Fisher information report from precomputed tables.
pub fn fim_from_tables(spec: &SystemSpec, theta: &ParameterPoint, tables: &[CellProbabilityTable]) -> FisherReport {
    let d = spec.dim_theta;
    let mut flagged = Vec::new();
    let terms: Vec<DMatrix<f64>> = tables
        .iter()
        .map(|t| sensor_term(t, d, &mut flagged))
        .collect();
    let mut total = DMatrix::zeros(d, d);
    for t in &terms {
        total += t;
    }
    let (singular_values, rank_tolerance, rank) = numerical_rank(&total);
    let per_sensor_ranks = terms.iter().map(|t| numerical_rank(t).2).collect();
    FisherReport {
        theta: theta.clone(),
        matrix: total,
        singular_values,
        numerical_rank: rank,
        rank_tolerance,
        per_sensor_ranks,
        theorem1_bound: idqd::idqd(spec),
        singular_verdict: rank < d,
        flagged_cells: flagged,
        sensor_terms: terms,
    }
}

pub fn fim(spec: &SystemSpec, theta: &ParameterPoint) -> Result<FisherReport> {
    spec.check_theta(theta)?;
    let tables = (0..spec.n_sensors())
        .into_par_iter()
        .map(|j| cellprob::table(spec, j, theta))
        .collect::<Result<Vec<_>>>()?;
    Ok(fim_from_tables(spec, theta, &tables))
}

/// `sum_j ln q_j^(u_j)(theta)` for one snapshot of quantized data.
pub fn log_likelihood(spec: &SystemSpec, u: &[OutcomeVector], theta: &ParameterPoint) -> Result<f64> {
    if u.len() != spec.n_sensors() {
        return Err(Error::DimensionMismatch {
            what: "outcomes per sensor",
            expected: spec.n_sensors(),
            got: u.len(),
        });
    }
    let mut ll = 0.0;
    for (j, s) in u.iter().enumerate() {
        let q = cellprob::cell_prob(spec, j, s, theta)?;
        if q <= 0.0 {
            return Err(Error::ZeroProbability { sensor: j });
        }
        ll += q.ln();
    }
    Ok(ll)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorBound {
    pub sensor: usize,
    pub rank: usize,
    /// `prod_l R_jl - 1`.
    pub bound: u64,
    pub slack: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankBoundCheck {
    pub per_sensor: Vec<SensorBound>,
    pub total_rank: usize,
    /// Sum of the per-sensor ranks; sits between the total rank and `lambda`.
    pub sum_of_sensor_ranks: usize,
    pub lambda: u64,
    pub slack: i64,
    pub holds: bool,
}

/// Checks `rank(J_j) <= |S_j| - 1` for each sensor and
/// `rank(J) <= sum_j rank(J_j) <= lambda`.
pub fn verify_rank_bounds_report(spec: &SystemSpec, report: &FisherReport) -> RankBoundCheck {
    let per_sensor: Vec<SensorBound> = spec
        .sensors
        .iter()
        .zip(&report.per_sensor_ranks)
        .enumerate()
        .map(|(j, (s, &rank))| {
            let bound = (s.superquantizer.alphabet_size() - 1) as u64;
            SensorBound {
                sensor: j,
                rank,
                bound,
                slack: bound as i64 - rank as i64,
            }
        })
        .collect();
    let sum_of_sensor_ranks = report.per_sensor_ranks.iter().sum();
    let lambda = report.theorem1_bound;
    let slack = lambda as i64 - report.numerical_rank as i64;
    let holds = per_sensor.iter().all(|b| b.slack >= 0)
        && report.numerical_rank <= sum_of_sensor_ranks
        && sum_of_sensor_ranks as u64 <= lambda;
    RankBoundCheck {
        per_sensor,
        total_rank: report.numerical_rank,
        sum_of_sensor_ranks,
        lambda,
        slack,
        holds,
    }
}

pub fn verify_rank_bounds(spec: &SystemSpec, theta: &ParameterPoint) -> Result<RankBoundCheck> {
    let report = fim(spec, theta)?;
    Ok(verify_rank_bounds_report(spec, &report))
}

/// `J^{-1}` when the report is numerically full rank; never a pseudo-inverse.
pub fn crb(report: &FisherReport) -> Result<DMatrix<f64>> {
    let d = report.dim();
    if report.numerical_rank < d {
        return Err(Error::SingularFim {
            rank: report.numerical_rank,
            dim: d,
        });
    }
    let inv = match report.matrix.clone().cholesky() {
        Some(c) => c.inverse(),
        None => report.matrix.clone().try_inverse().ok_or(Error::SingularFim {
            rank: report.numerical_rank,
            dim: d,
        })?,
    };
    let t = inv.transpose();
    Ok((inv + t) * 0.5)
}
