//! Observational equivalence: the global outcome distribution `phi(theta)`,
//! its reduced form `psi(theta)`, equivalence-curve tracing for the scalar
//! mean/variance design, the identifiable point of the rectangle design, and
//! level-set grids.

use rayon::prelude::*;
use serde::Serialize;

use crate::cellprob;
use crate::error::{Error, Result};
use crate::fmt17;
use crate::grid::ThetaGrid;
use crate::models::{ObservationModel, ParameterPoint};
use crate::normal;
use crate::quantizers::{Cell, OutcomeVector};
use crate::spec::SystemSpec;

/// Default sup-norm tolerance for calling two distributions equal.
pub const EQUIV_TOL: f64 = 1e-10;
/// Residual target for the equivalence-curve root finder.
pub const TRACE_RESIDUAL: f64 = 1e-12;
/// Largest bracket end the root finder will try.
pub const BRACKET_LIMIT: f64 = 1e6;
/// Largest global alphabet [`phi`] will materialize.
pub const MAX_PHI_LEN: u128 = 1 << 24;

/// Probability of every global outcome `(u_1, ..., u_N)`, sensor 1 varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiVector {
    pub values: Vec<f64>,
}

/// Per-sensor cell probabilities with each sensor's last outcome dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiVector {
    pub values: Vec<f64>,
    /// `|S_j| - 1` for each sensor.
    pub block_lengths: Vec<usize>,
}

impl PsiVector {
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut off = 0;
        self.block_lengths
            .iter()
            .map(|&n| {
                let b = &self.values[off..off + n];
                off += n;
                b
            })
            .collect()
    }
}

/// `max_i |a_i - b_i|`; infinite if the lengths differ.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn sensor_probabilities(spec: &SystemSpec, theta: &ParameterPoint) -> Result<Vec<Vec<f64>>> {
    spec.check_theta(theta)?;
    (0..spec.n_sensors())
        .map(|j| cellprob::probabilities(spec, j, theta))
        .collect()
}

pub fn phi(spec: &SystemSpec, theta: &ParameterPoint) -> Result<PhiVector> {
    let du = spec.global_alphabet_size();
    if du > MAX_PHI_LEN {
        return Err(Error::AlphabetTooLarge(du));
    }
    let per_sensor = sensor_probabilities(spec, theta)?;
    let mut values = vec![1.0];
    for q in &per_sensor {
        values = values
            .iter()
            .flat_map(|&p| q.iter().map(move |&x| p * x))
            .collect();
    }
    Ok(PhiVector { values })
}

pub fn psi(spec: &SystemSpec, theta: &ParameterPoint) -> Result<PsiVector> {
    let per_sensor = sensor_probabilities(spec, theta)?;
    let block_lengths = per_sensor.iter().map(|q| q.len() - 1).collect();
    let values = per_sensor
        .iter()
        .flat_map(|q| q[..q.len() - 1].iter().copied())
        .collect();
    Ok(PsiVector { values, block_lengths })
}

/// True iff `phi(theta1)` and `phi(theta2)` agree within `tol` in sup norm.
pub fn obs_equivalent(spec: &SystemSpec, theta1: &ParameterPoint, theta2: &ParameterPoint, tol: f64) -> Result<bool> {
    let a = phi(spec, theta1)?;
    let b = phi(spec, theta2)?;
    Ok(sup_distance(&a.values, &b.values) <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Check {
    pub phi_distance: f64,
    pub psi_distance: f64,
    pub phi_equal: bool,
    pub psi_equal: bool,
}

impl Lemma1Check {
    /// Whether the two equality verdicts coincide.
    pub fn agrees(&self) -> bool {
        self.phi_equal == self.psi_equal
    }
}

/// Compares `theta1` and `theta2` through both `phi` and `psi`.
pub fn lemma1_check(spec: &SystemSpec, theta1: &ParameterPoint, theta2: &ParameterPoint, tol: f64) -> Result<Lemma1Check> {
    let phi_distance = sup_distance(&phi(spec, theta1)?.values, &phi(spec, theta2)?.values);
    let psi_distance = sup_distance(&psi(spec, theta1)?.values, &psi(spec, theta2)?.values);
    Ok(Lemma1Check {
        phi_distance,
        psi_distance,
        phi_equal: phi_distance <= tol,
        psi_equal: psi_distance <= tol,
    })
}

/// `g(alpha, beta) = Pr(a <= x < b)` for `x ~ N(alpha, beta)`.
pub fn g(alpha: f64, beta: f64, a: f64, b: f64) -> f64 {
    let s = beta.sqrt();
    normal::interval_prob((a - alpha) / s, (b - alpha) / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub rho: f64,
    pub alpha_rho: f64,
    pub beta_rho: f64,
    /// `|g(alpha_rho, rho beta0) - g(alpha0, beta0)|`.
    pub residual: f64,
}

impl TraceSample {
    pub fn theta(&self) -> ParameterPoint {
        ParameterPoint(vec![self.alpha_rho, self.beta_rho])
    }
}

/// Points `(alpha_rho, rho beta0)` with the same interval probability as `theta0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceTrace {
    pub theta0: ParameterPoint,
    pub a: f64,
    pub b: f64,
    pub samples: Vec<TraceSample>,
}

impl EquivalenceTrace {
    pub fn csv(&self) -> String {
        let mut out = String::from("rho,alpha_rho,beta_rho,residual\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(s.rho),
                fmt17(s.alpha_rho),
                fmt17(s.beta_rho),
                fmt17(s.residual)
            ));
        }
        out
    }
}

/// Interval `[a, b)` and parameter indices of a single-sensor design whose
/// only quantizer is binary with a single interval as level 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDesign {
    pub a: f64,
    pub b: f64,
    pub mean_index: usize,
    pub var_index: usize,
}

pub fn interval_design(spec: &SystemSpec) -> Result<IntervalDesign> {
    let bad = || Error::InvalidArgument("expected one scalar mean/variance sensor with a binary interval quantizer".into());
    let [sensor] = spec.sensors.as_slice() else {
        return Err(bad());
    };
    let ObservationModel::ScalarGaussianMeanVar { mean_index, var_index } = sensor.model else {
        return Err(bad());
    };
    let [q] = sensor.superquantizer.quantizers.as_slice() else {
        return Err(bad());
    };
    if q.levels() != 2 {
        return Err(bad());
    }
    let Cell::Rects(rects) = &q.cells[0] else {
        return Err(bad());
    };
    let [rect] = rects.as_slice() else {
        return Err(bad());
    };
    let iv = rect.0[0];
    Ok(IntervalDesign {
        a: iv.lo,
        b: iv.hi,
        mean_index,
        var_index,
    })
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rho: f64) -> Result<(f64, f64)> {
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok((lo, 0.0));
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return Ok((hi, 0.0));
    }
    let (mut best, mut best_r) = if flo.abs() < fhi.abs() { (lo, flo.abs()) } else { (hi, fhi.abs()) };
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best_r {
            best = mid;
            best_r = fm.abs();
        }
        if best_r <= TRACE_RESIDUAL * 1e-3 {
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if best_r > TRACE_RESIDUAL {
        return Err(Error::RootNotConverged { rho, residual: best_r });
    }
    Ok((best, best_r))
}

fn trace_one(alpha0: f64, beta0: f64, rho: f64, a: f64, b: f64) -> Result<TraceSample> {
    let target = g(alpha0, beta0, a, b);
    let beta = rho * beta0;
    let f = |alpha: f64| g(alpha, beta, a, b) - target;
    let (lo, hi) = if a.is_finite() && b.is_finite() {
        // The centre maximizes g for every beta, and a smaller beta only
        // raises it, so f(mid) >= 0; far to the right g vanishes.
        let mid = 0.5 * (a + b);
        let mut step = 1.0;
        loop {
            let hi = mid + step;
            if f(hi) < 0.0 {
                break (mid, hi);
            }
            step *= 2.0;
            if step > BRACKET_LIMIT {
                return Err(Error::NoBracket { rho, limit: BRACKET_LIMIT });
            }
        }
    } else {
        // g is monotone in alpha with limits 0 and 1, so widening finds a change.
        let mut m = 1.0;
        loop {
            if (f(-m) > 0.0) != (f(m) > 0.0) {
                break (-m, m);
            }
            m *= 4.0;
            if m > BRACKET_LIMIT {
                return Err(Error::NoBracket { rho, limit: BRACKET_LIMIT });
            }
        }
    };
    let (alpha, residual) = bisect(f, lo, hi, rho)?;
    Ok(TraceSample {
        rho,
        alpha_rho: alpha,
        beta_rho: beta,
        residual,
    })
}

/// For each `rho` solves `g(alpha_rho, rho beta0) = g(alpha0, beta0)` by bisection.
pub fn trace_example1(theta0: (f64, f64), rho_grid: &[f64], a: f64, b: f64) -> Result<EquivalenceTrace> {
    let (alpha0, beta0) = theta0;
    if !(beta0 > 0.0 && beta0.is_finite() && alpha0.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite alpha0 and beta0 > 0, got ({alpha0}, {beta0})")));
    }
    if a.is_nan() || b.is_nan() || a >= b || (a.is_infinite() && b.is_infinite()) {
        return Err(Error::InvalidArgument(format!(
            "need a < b with at most one end infinite, got [{a}, {b})"
        )));
    }
    if let Some(r) = rho_grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {r}")));
    }
    let samples = rho_grid
        .par_iter()
        .map(|&rho| trace_one(alpha0, beta0, rho, a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivalenceTrace {
        theta0: ParameterPoint(vec![alpha0, beta0]),
        a,
        b,
        samples,
    })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn rho_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::grid::Axis::closed(lo, hi, n).values()
}

/// The maximizer of the rectangle probability under `N(theta, I_2)`, with
/// the numerical evidence that it is a strict global maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiablePoint {
    pub theta: ParameterPoint,
    pub probability: f64,
    /// Gradient of `ln Pr(u = 1 | theta)` at `theta`.
    pub log_prob_gradient: [f64; 2],
    /// Largest probability among the eight neighbours at distance `step`.
    pub max_neighbour_probability: f64,
    pub step: f64,
    pub certified: bool,
}

/// `Pr(x in [a1, b1) x [a2, b2))` for `x ~ N(theta, I_2)`.
pub fn rect_probability(theta: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (0..2)
        .map(|i| normal::interval_prob(a[i] - theta[i], b[i] - theta[i]))
        .product()
}

fn rect_log_prob_gradient(theta: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = |i: usize| {
        let p = normal::interval_prob(a[i] - theta[i], b[i] - theta[i]);
        (normal::pdf(a[i] - theta[i]) - normal::pdf(b[i] - theta[i])) / p
    };
    [d(0), d(1)]
}

/// Returns `theta* = ((a1 + b1)/2, (a2 + b2)/2)` and certifies that the
/// log-probability gradient vanishes there and that every grid neighbour at
/// step `0.05` has strictly lower probability.
pub fn identifiable_point_example2(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<IdentifiablePoint> {
    let a = [a1, a2];
    let b = [b1, b2];
    if !(a.iter().chain(&b).all(|x| x.is_finite()) && a1 < b1 && a2 < b2) {
        return Err(Error::InvalidArgument(format!(
            "need a finite rectangle, got [{a1}, {b1}) x [{a2}, {b2})"
        )));
    }
    let theta = [0.5 * (a1 + b1), 0.5 * (a2 + b2)];
    let p = rect_probability(theta, a, b);
    let grad = rect_log_prob_gradient(theta, a, b);
    let step = 0.05;
    let mut max_nb = f64::NEG_INFINITY;
    for di in -1i32..=1 {
        for dj in -1i32..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let t = [theta[0] + step * di as f64, theta[1] + step * dj as f64];
            max_nb = max_nb.max(rect_probability(t, a, b));
        }
    }
    let certified = grad.iter().all(|g| g.abs() <= 1e-10) && max_nb < p;
    Ok(IdentifiablePoint {
        theta: ParameterPoint(theta.to_vec()),
        probability: p,
        log_prob_gradient: grad,
        max_neighbour_probability: max_nb,
        step,
        certified,
    })
}

/// `Pr(outcome | theta)` of one sensor at every grid point, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSet {
    pub sensor: usize,
    pub outcome: OutcomeVector,
    pub points: Vec<(ParameterPoint, f64)>,
}

impl LevelSet {
    pub fn csv(&self) -> String {
        let d = self.points.first().map_or(0, |(t, _)| t.dim());
        let mut header: Vec<String> = (1..=d).map(|i| format!("theta{i}")).collect();
        header.push("prob".into());
        let mut out = header.join(",");
        out.push('\n');
        for (t, p) in &self.points {
            let mut row: Vec<String> = t.0.iter().map(|&x| fmt17(x)).collect();
            row.push(fmt17(*p));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn level_set_grid(spec: &SystemSpec, sensor: usize, outcome: &OutcomeVector, grid: &ThetaGrid) -> Result<LevelSet> {
    if grid.dim() != spec.dim_theta {
        return Err(Error::DimensionMismatch {
            what: "grid axes",
            expected: spec.dim_theta,
            got: grid.dim(),
        });
    }
    let sq = &spec.sensor(sensor)?.superquantizer;
    let idx = sq.outcome_index(outcome).ok_or_else(|| Error::UnknownOutcome {
        sensor,
        outcome: outcome.0.clone(),
    })?;
    let points = grid
        .points()
        .into_par_iter()
        .map(|t| {
            spec.check_theta(&t)?;
            let q = cellprob::probabilities(spec, sensor, &t)?;
            Ok((t, q[idx]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelSet {
        sensor,
        outcome: outcome.clone(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalentPair {
    pub i: usize,
    pub j: usize,
    pub theta1: ParameterPoint,
    pub theta2: ParameterPoint,
    pub distance: f64,
}

/// Every unordered pair of distinct grid points whose `phi` vectors agree within `tol`.
pub fn injectivity_scan(spec: &SystemSpec, grid: &ThetaGrid, tol: f64) -> Result<Vec<EquivalentPair>> {
    let points = grid.points();
    let phis = points
        .par_iter()
        .map(|t| phi(spec, t).map(|p| p.values))
        .collect::<Result<Vec<_>>>()?;
    let pairs = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (points, phis) = (&points, &phis);
            (i + 1..points.len()).filter_map(move |j| {
                if points[i] == points[j] {
                    return None;
                }
                let d = sup_distance(&phis[i], &phis[j]);
                (d <= tol).then(|| EquivalentPair {
                    i,
                    j,
                    theta1: points[i].clone(),
                    theta2: points[j].clone(),
                    distance: d,
                })
            })
        })
        .collect();
    Ok(pairs)
}
