//! Seeded sampling of i.i.d. quantized snapshots and multi-start maximum
//! likelihood fitting, used to expose ridges of equally likely parameters.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::Serialize;

use crate::cellprob;
use crate::error::{Error, Result};
use crate::fmt17;
use crate::grid::{Axis, ThetaGrid};
use crate::identifiability::{self, sup_distance};
use crate::models::ParameterPoint;
use crate::sampling::{sensor_rng, ObservationSampler};
use crate::spec::{SearchBox, SystemSpec};

/// Log-likelihood gap (nats) within which two maxima count as tied.
pub const TIE_TOLERANCE: f64 = 1e-6;
/// Default points per axis of the seeding grid.
pub const GRID_POINTS: usize = 41;
/// Default number of simplex starts.
pub const N_STARTS: usize = 8;
/// Cap on seeding grid size; per-axis counts shrink to respect it.
const MAX_GRID: usize = 200_000;

/// Outcome counts of `n_snapshots` i.i.d. snapshots, per sensor in alphabet order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuantizedDataset {
    pub n_snapshots: u64,
    pub seed: u64,
    pub counts: Vec<Vec<u64>>,
}

impl QuantizedDataset {
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&k| if self.n_snapshots == 0 { 0.0 } else { k as f64 / self.n_snapshots as f64 })
                    .collect()
            })
            .collect()
    }

    /// Pools two datasets over the same system.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let shape = |d: &Self| d.counts.iter().map(Vec::len).collect::<Vec<_>>();
        if shape(self) != shape(other) {
            return Err(Error::InvalidArgument("datasets come from different systems".into()));
        }
        Ok(Self {
            n_snapshots: self.n_snapshots + other.n_snapshots,
            seed: self.seed,
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }
}

/// Draws `n` snapshots at `theta_true`. Sensor `j` uses its own generator
/// stream derived from `(seed, j)`, so results do not depend on scheduling.
pub fn sample(spec: &SystemSpec, theta_true: &ParameterPoint, n: u64, seed: u64) -> Result<QuantizedDataset> {
    spec.check_theta(theta_true)?;
    let counts = (0..spec.n_sensors())
        .into_par_iter()
        .map(|j| {
            let sensor = &spec.sensors[j];
            let sq = &sensor.superquantizer;
            let mut counts = vec![0u64; sq.alphabet_size() as usize];
            if n == 0 {
                return Ok(counts);
            }
            let mut sampler = ObservationSampler::new(&sensor.model, theta_true)?;
            let mut rng = sensor_rng(seed, j);
            let mut x = vec![0.0; sensor.model.dim_x()];
            for _ in 0..n {
                sampler.draw(&mut rng, &mut x);
                let s = sq.apply(&x)?;
                counts[sq.outcome_index(&s).expect("quantizer output is in its alphabet")] += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedDataset {
        n_snapshots: n,
        seed,
        counts,
    })
}

/// `sum_j sum_s count_js ln q_js(theta)`; `-inf` where an observed cell has
/// zero probability.
pub fn log_likelihood(spec: &SystemSpec, data: &QuantizedDataset, theta: &ParameterPoint) -> Result<f64> {
    spec.check_theta(theta)?;
    if data.counts.len() != spec.n_sensors() {
        return Err(Error::DimensionMismatch {
            what: "sensors in dataset",
            expected: spec.n_sensors(),
            got: data.counts.len(),
        });
    }
    let mut ll = 0.0;
    for (j, c) in data.counts.iter().enumerate() {
        let q = cellprob::probabilities(spec, j, theta)?;
        if q.len() != c.len() {
            return Err(Error::DimensionMismatch {
                what: "outcomes in dataset",
                expected: q.len(),
                got: c.len(),
            });
        }
        for (&k, &p) in c.iter().zip(&q) {
            if k > 0 {
                if p <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                ll += k as f64 * p.ln();
            }
        }
    }
    Ok(ll)
}

/// Sup-norm gap between empirical frequencies and the cell probabilities at `theta`.
pub fn frequency_error(spec: &SystemSpec, data: &QuantizedDataset, theta: &ParameterPoint) -> Result<f64> {
    let freq = data.frequencies();
    let mut worst = 0.0f64;
    for (j, f) in freq.iter().enumerate() {
        let q = cellprob::probabilities(spec, j, theta)?;
        worst = worst.max(sup_distance(f, &q));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    pub search_box: SearchBox,
    pub grid_points: usize,
    pub n_starts: usize,
    pub tie_tolerance: f64,
}

impl FitOptions {
    pub fn new(search_box: SearchBox) -> Self {
        Self {
            search_box,
            grid_points: GRID_POINTS,
            n_starts: N_STARTS,
            tie_tolerance: TIE_TOLERANCE,
        }
    }

    /// Options using the spec's own search box.
    pub fn for_spec(spec: &SystemSpec) -> Result<Self> {
        spec.search_box
            .clone()
            .map(Self::new)
            .ok_or_else(|| Error::InvalidArgument("the spec declares no search_box".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Maximizer {
    pub theta: ParameterPoint,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Local maxima within `tie_tolerance` of the best, best first.
    pub maximizers: Vec<Maximizer>,
    pub spread_diameter: f64,
    pub tie_tolerance: f64,
    pub grid_best: Maximizer,
    /// No simplex run improved on the best grid point; `maximizers` holds it alone.
    pub no_improvement: bool,
    /// The best maximizer sits on the search-box boundary, or some sensor
    /// observed a single outcome in every snapshot.
    pub degenerate: bool,
}

impl FitResult {
    pub fn best(&self) -> &Maximizer {
        &self.maximizers[0]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

struct NegLogLik<'a> {
    spec: &'a SystemSpec,
    data: &'a QuantizedDataset,
    lower: &'a [f64],
    upper: &'a [f64],
}

impl NegLogLik<'_> {
    fn eval(&self, p: &[f64]) -> f64 {
        let inside = p
            .iter()
            .zip(self.lower.iter().zip(self.upper))
            .all(|(x, (lo, hi))| x >= lo && x <= hi);
        if !inside {
            return f64::INFINITY;
        }
        match log_likelihood(self.spec, self.data, &ParameterPoint(p.to_vec())) {
            Ok(ll) if !ll.is_nan() => -ll,
            _ => f64::INFINITY,
        }
    }
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

fn check_box(spec: &SystemSpec, b: &SearchBox) -> Result<()> {
    let d = spec.dim_theta;
    if b.lower.len() != d || b.upper.len() != d {
        return Err(Error::DimensionMismatch {
            what: "search box",
            expected: d,
            got: b.lower.len().min(b.upper.len()),
        });
    }
    let ok = b
        .lower
        .iter()
        .zip(&b.upper)
        .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi);
    if !ok {
        return Err(Error::InvalidArgument("search box needs finite bounds with lower < upper".into()));
    }
    let corners_inside = spec.parameter_space.contains(&ParameterPoint(b.lower.clone()))
        && spec.parameter_space.contains(&ParameterPoint(b.upper.clone()));
    if !corners_inside {
        return Err(Error::InvalidArgument("search box is not inside the parameter space".into()));
    }
    Ok(())
}

/// Nelder-Mead from `start`, restarted twice from its own optimum with a
/// shrinking simplex.
fn refine(f: &NegLogLik<'_>, start: &[f64], step: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut x = start.to_vec();
    let mut fx = f.eval(&x);
    let mut scale = 1.0;
    for _ in 0..3 {
        let mut simplex = vec![x.clone()];
        for i in 0..x.len() {
            let mut v = x.clone();
            let h = step[i] * scale;
            v[i] = if v[i] + h <= f.upper[i] { v[i] + h } else { v[i] - h };
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-12)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let res = Executor::new(
            NegLogLik {
                spec: f.spec,
                data: f.data,
                lower: f.lower,
                upper: f.upper,
            },
            solver,
        )
        .configure(|s| s.max_iters(4000))
        .run()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let state = res.state;
        if let Some(p) = state.best_param {
            if state.best_cost < fx {
                x = p;
                fx = state.best_cost;
            }
        }
        scale *= 0.05;
    }
    Ok((x, fx))
}

/// Coarse grid over the search box, then simplex refinement from the best
/// well-separated grid points; returns every local maximum within the tie
/// tolerance of the best.
pub fn fit(spec: &SystemSpec, data: &QuantizedDataset, opts: &FitOptions) -> Result<FitResult> {
    check_box(spec, &opts.search_box)?;
    let d = spec.dim_theta;
    let (lower, upper) = (&opts.search_box.lower, &opts.search_box.upper);
    let mut per_axis = opts.grid_points.max(2);
    while per_axis > 2 && (per_axis as f64).powi(d as i32) > MAX_GRID as f64 {
        per_axis -= 1;
    }
    let grid = ThetaGrid::new((0..d).map(|i| Axis::closed(lower[i], upper[i], per_axis)).collect());
    let f = NegLogLik {
        spec,
        data,
        lower,
        upper,
    };
    let pts = grid.points();
    let vals: Vec<f64> = pts.par_iter().map(|p| -f.eval(&p.0)).collect();
    let mut order: Vec<usize> = (0..pts.len()).filter(|&i| vals[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::InvalidArgument("log-likelihood is -inf on the whole seeding grid".into()));
    }
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let spacing: Vec<f64> = (0..d).map(|i| (upper[i] - lower[i]) / (per_axis - 1) as f64).collect();

    // Greedy selection of starts at least two grid cells apart.
    let mut starts: Vec<usize> = Vec::new();
    for &i in &order {
        if starts.len() >= opts.n_starts.max(1) {
            break;
        }
        let far = starts.iter().all(|&s| {
            (0..d).any(|k| (pts[i].0[k] - pts[s].0[k]).abs() > 1.5 * spacing[k])
        });
        if far {
            starts.push(i);
        }
    }
    let grid_best = Maximizer {
        theta: pts[order[0]].clone(),
        log_likelihood: vals[order[0]],
    };

    let refined = starts
        .par_iter()
        .map(|&i| refine(&f, &pts[i].0, &spacing))
        .collect::<Result<Vec<_>>>()?;
    let best_ll = refined.iter().map(|(_, c)| -c).fold(f64::NEG_INFINITY, f64::max);
    let no_improvement = !(best_ll > grid_best.log_likelihood);

    let mut maximizers: Vec<Maximizer> = if no_improvement {
        vec![grid_best.clone()]
    } else {
        refined
            .into_iter()
            .filter(|(_, c)| -c >= best_ll - opts.tie_tolerance)
            .map(|(x, c)| Maximizer {
                theta: ParameterPoint(x),
                log_likelihood: -c,
            })
            .collect()
    };
    maximizers.sort_by(|a, b| {
        b.log_likelihood
            .total_cmp(&a.log_likelihood)
            .then_with(|| a.theta.0.iter().zip(&b.theta.0).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y))))
    });
    maximizers.dedup_by(|a, b| a.theta == b.theta);

    let mut spread = 0.0f64;
    for (i, a) in maximizers.iter().enumerate() {
        for b in &maximizers[i + 1..] {
            spread = spread.max(a.theta.distance(&b.theta));
        }
    }
    let best = &maximizers[0].theta;
    let on_boundary = (0..d).any(|k| {
        let tol = 1e-6 * (upper[k] - lower[k]);
        best.0[k] - lower[k] <= tol || upper[k] - best.0[k] <= tol
    });
    let saturated = data.n_snapshots > 0 && data.counts.iter().any(|c| c.contains(&data.n_snapshots));
    Ok(FitResult {
        maximizers,
        spread_diameter: spread,
        tie_tolerance: opts.tie_tolerance,
        grid_best,
        no_improvement,
        degenerate: on_boundary || saturated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub seed: u64,
    pub fit: FitResult,
    /// All tied maximizers are pairwise observationally equivalent.
    pub all_equivalent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyStudy {
    pub theta_true: ParameterPoint,
    pub n_snapshots: u64,
    pub equivalence_tol: f64,
    pub rows: Vec<StudyRow>,
    pub median_spread: f64,
    pub all_equivalent: bool,
}

impl DegeneracyStudy {
    pub fn csv(&self) -> String {
        let d = self.theta_true.dim();
        let mut header = vec!["seed".to_string(), "n_maximizers".into(), "spread_diameter".into(), "best_log_likelihood".into()];
        header.extend((1..=d).map(|i| format!("theta_hat{i}")));
        header.extend(["all_equivalent".into(), "degenerate".into(), "no_improvement".into()]);
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.rows {
            let best = r.fit.best();
            let mut row = vec![
                r.seed.to_string(),
                r.fit.maximizers.len().to_string(),
                fmt17(r.fit.spread_diameter),
                fmt17(best.log_likelihood),
            ];
            row.extend(best.theta.0.iter().map(|&x| fmt17(x)));
            row.extend([r.all_equivalent.to_string(), r.fit.degenerate.to_string(), r.fit.no_improvement.to_string()]);
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Repeats sample and fit for every seed and checks that each seed's tied
/// maximizers are observationally equivalent at `equivalence_tol`.
pub fn degeneracy_study(
    spec: &SystemSpec,
    theta_true: &ParameterPoint,
    n: u64,
    seeds: &[u64],
    opts: &FitOptions,
    equivalence_tol: f64,
) -> Result<DegeneracyStudy> {
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let data = sample(spec, theta_true, n, seed)?;
            let fit = fit(spec, &data, opts)?;
            let mut all_equivalent = true;
            for (i, a) in fit.maximizers.iter().enumerate() {
                for b in &fit.maximizers[i + 1..] {
                    all_equivalent &= identifiability::obs_equivalent(spec, &a.theta, &b.theta, equivalence_tol)?;
                }
            }
            Ok(StudyRow {
                seed,
                fit,
                all_equivalent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spreads: Vec<f64> = rows.iter().map(|r| r.fit.spread_diameter).collect();
    Ok(DegeneracyStudy {
        theta_true: theta_true.clone(),
        n_snapshots: n,
        equivalence_tol,
        median_spread: median(&spreads),
        all_equivalent: rows.iter().all(|r| r.all_equivalent),
        rows,
    })
}
