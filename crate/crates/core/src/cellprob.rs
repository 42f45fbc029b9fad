//! Cell probabilities `q_j^(s)(theta) = P(Gamma_j(x_j) = s)` and their
//! `theta`-gradients.
//!
//! The analytic path treats each subvector cell as a disjoint union of
//! rectangles and multiplies per-axis normal-CDF differences. A complement
//! cell gets `1 - sum(siblings)` and the negated sibling gradient sum, so
//! every table normalizes by construction. Models with correlated
//! coordinates fall back to seeded sampling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{Marginal, ObservationModel, ParameterPoint};
use crate::quantizers::{Cell, OutcomeVector, SuperQuantizer};
use crate::sampling::{sensor_rng, ObservationSampler};
use crate::spec::SystemSpec;

/// Normalization tolerance for analytic tables.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Gradient-sum tolerance, relative to the largest gradient entry (floored at 1).
pub const GRAD_SUM_TOL: f64 = 1e-10;
/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Analytic,
    MonteCarlo { seed: u64, samples: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellEntry {
    pub outcome: OutcomeVector,
    pub probability: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellProbabilityTable {
    pub sensor: usize,
    pub method: Method,
    /// One entry per outcome, in alphabet order.
    pub entries: Vec<CellEntry>,
}

impl CellProbabilityTable {
    pub fn probability_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn gradient_sum(&self) -> Vec<f64> {
        let d = self.entries.first().map_or(0, |e| e.gradient.len());
        let mut g = vec![0.0; d];
        for e in &self.entries {
            for (a, b) in g.iter_mut().zip(&e.gradient) {
                *a += b;
            }
        }
        g
    }

    pub fn get(&self, s: &OutcomeVector) -> Option<&CellEntry> {
        self.entries.iter().find(|e| &e.outcome == s)
    }

    /// CSV rows `sensor,outcome,probability,grad_1..grad_D`, without header.
    pub fn csv_rows(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| {
                let outcome: Vec<String> = e.outcome.0.iter().map(ToString::to_string).collect();
                let mut row = vec![
                    self.sensor.to_string(),
                    outcome.join(" "),
                    crate::fmt17(e.probability),
                ];
                row.extend(e.gradient.iter().map(|&g| crate::fmt17(g)));
                row.join(",")
            })
            .collect()
    }

    pub fn csv_header(dim_theta: usize) -> String {
        let mut h = vec!["sensor".to_string(), "outcome".into(), "probability".into()];
        h.extend((1..=dim_theta).map(|i| format!("grad_{i}")));
        h.join(",")
    }
}

fn needs_sampling(model: &ObservationModel) -> bool {
    !model.has_diagonal_covariance()
}

/// Method that [`table`] will use for `sensor`.
pub fn method_for(spec: &SystemSpec, sensor: usize) -> Result<Method> {
    let s = spec.sensor(sensor)?;
    if !needs_sampling(&s.model) {
        return Ok(Method::Analytic);
    }
    match spec.monte_carlo {
        Some(mc) => Ok(Method::MonteCarlo {
            seed: mc.seed,
            samples: mc.samples,
        }),
        None => Err(Error::NoMonteCarloBudget { sensor }),
    }
}

/// Probability and gradient of each cell of each vector quantizer,
/// `out[l][r] = (P(x_l in cell r), grad)`.
fn subvector_cells(
    marginals: &[Marginal],
    sq: &SuperQuantizer,
    dim_theta: usize,
    with_grad: bool,
) -> Vec<Vec<(f64, Vec<f64>)>> {
    let gdim = if with_grad { dim_theta } else { 0 };
    let mut out = Vec::with_capacity(sq.quantizers.len());
    let mut off = 0;
    for q in &sq.quantizers {
        let ms = &marginals[off..off + q.dim];
        off += q.dim;
        let mut cells: Vec<(f64, Vec<f64>)> = Vec::with_capacity(q.cells.len());
        let mut axis_p = vec![0.0; q.dim];
        let mut axis_g = vec![vec![0.0; gdim]; q.dim];
        for cell in &q.cells {
            let mut p = 0.0;
            let mut g = vec![0.0; gdim];
            if let Cell::Rects(rects) = cell {
                for rect in rects {
                    for (a, (m, iv)) in ms.iter().zip(&rect.0).enumerate() {
                        let (pa, dmean, dvar) = m.interval(iv);
                        axis_p[a] = pa;
                        if with_grad {
                            m.theta_grad(dmean, dvar, &mut axis_g[a]);
                        }
                    }
                    p += axis_p.iter().product::<f64>();
                    if with_grad {
                        accumulate_product_grad(&axis_p, &axis_g, &mut g);
                    }
                }
            }
            cells.push((p, g));
        }
        if let Some(c) = q.complement_index() {
            let mut p = 1.0;
            let mut g = vec![0.0; gdim];
            for (i, (pi, gi)) in cells.iter().enumerate() {
                if i == c {
                    continue;
                }
                p -= pi;
                for (a, b) in g.iter_mut().zip(gi) {
                    *a -= b;
                }
            }
            cells[c] = (p.max(0.0), g);
        }
        out.push(cells);
    }
    out
}

/// `g += d/dtheta prod_a p_a` via the product rule.
fn accumulate_product_grad(p: &[f64], grads: &[Vec<f64>], g: &mut [f64]) {
    let n = p.len();
    for (a, ga) in grads.iter().enumerate().take(n) {
        let others: f64 = p
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(_, v)| v)
            .product();
        if others == 0.0 {
            continue;
        }
        for (gk, dk) in g.iter_mut().zip(ga) {
            *gk += others * dk;
        }
    }
}

/// Joint outcome probability (and gradient) from per-subvector cells.
fn joint(
    cells: &[Vec<(f64, Vec<f64>)>],
    s: &OutcomeVector,
    dim_theta: usize,
    with_grad: bool,
) -> (f64, Vec<f64>) {
    let parts: Vec<&(f64, Vec<f64>)> = cells
        .iter()
        .zip(&s.0)
        .map(|(c, &sym)| &c[sym - 1])
        .collect();
    let p: f64 = parts.iter().map(|x| x.0).product();
    if !with_grad {
        return (p, Vec::new());
    }
    let ps: Vec<f64> = parts.iter().map(|x| x.0).collect();
    let gs: Vec<Vec<f64>> = parts.iter().map(|x| x.1.clone()).collect();
    let mut g = vec![0.0; dim_theta];
    accumulate_product_grad(&ps, &gs, &mut g);
    (p, g)
}

fn analytic_table(
    spec: &SystemSpec,
    sensor: usize,
    theta: &ParameterPoint,
    with_grad: bool,
) -> Result<Vec<CellEntry>> {
    let s = spec.sensor(sensor)?;
    let marginals = s.model.marginals(theta)?;
    let cells = subvector_cells(&marginals, &s.superquantizer, spec.dim_theta, with_grad);
    Ok(s.superquantizer
        .outcome_alphabet()
        .into_iter()
        .map(|outcome| {
            let (probability, gradient) = joint(&cells, &outcome, spec.dim_theta, with_grad);
            CellEntry {
                outcome,
                probability,
                gradient,
            }
        })
        .collect())
}

/// Sampling estimate: frequencies for probabilities and a centered
/// score-function estimator for gradients, which sums to zero over outcomes.
fn monte_carlo_table(
    spec: &SystemSpec,
    sensor: usize,
    theta: &ParameterPoint,
    seed: u64,
    samples: u64,
    with_grad: bool,
) -> Result<Vec<CellEntry>> {
    let s = spec.sensor(sensor)?;
    let sq = &s.superquantizer;
    let alphabet = sq.outcome_alphabet();
    let d = spec.dim_theta;
    let mut rng = sensor_rng(seed, sensor);
    let mut sampler = ObservationSampler::new(&s.model, theta)?;
    let mut x = vec![0.0; s.model.dim_x()];
    let mut counts = vec![0u64; alphabet.len()];
    let mut score_sums = vec![vec![0.0; if with_grad { d } else { 0 }]; alphabet.len()];
    let mut score_total = vec![0.0; if with_grad { d } else { 0 }];
    for _ in 0..samples {
        sampler.draw(&mut rng, &mut x);
        let outcome = sq.apply(&x)?;
        let idx = sq.outcome_index(&outcome).expect("outcome from apply is in alphabet");
        counts[idx] += 1;
        if with_grad {
            let sc = s.model.score(&x, theta)?;
            for k in 0..d {
                score_sums[idx][k] += sc[k];
                score_total[k] += sc[k];
            }
        }
    }
    let n = samples as f64;
    let mean_score: Vec<f64> = score_total.iter().map(|v| v / n).collect();
    Ok(alphabet
        .into_iter()
        .enumerate()
        .map(|(i, outcome)| {
            let probability = counts[i] as f64 / n;
            let gradient = if with_grad {
                (0..d)
                    .map(|k| (score_sums[i][k] - counts[i] as f64 * mean_score[k]) / n)
                    .collect()
            } else {
                Vec::new()
            };
            CellEntry {
                outcome,
                probability,
                gradient,
            }
        })
        .collect())
}

fn entries(
    spec: &SystemSpec,
    sensor: usize,
    theta: &ParameterPoint,
    with_grad: bool,
) -> Result<(Method, Vec<CellEntry>)> {
    spec.check_theta(theta)?;
    let method = method_for(spec, sensor)?;
    let e = match method {
        Method::Analytic => analytic_table(spec, sensor, theta, with_grad)?,
        Method::MonteCarlo { seed, samples } => {
            monte_carlo_table(spec, sensor, theta, seed, samples, with_grad)?
        }
    };
    Ok((method, e))
}

fn lookup<'a>(spec: &SystemSpec, sensor: usize, e: &'a [CellEntry], s: &OutcomeVector) -> Result<&'a CellEntry> {
    let idx = spec
        .sensor(sensor)?
        .superquantizer
        .outcome_index(s)
        .ok_or_else(|| Error::UnknownOutcome {
            sensor,
            outcome: s.0.clone(),
        })?;
    Ok(&e[idx])
}

/// Cell probabilities of `sensor` in alphabet order, without gradients.
pub fn probabilities(spec: &SystemSpec, sensor: usize, theta: &ParameterPoint) -> Result<Vec<f64>> {
    let (_, e) = entries(spec, sensor, theta, false)?;
    Ok(e.into_iter().map(|c| c.probability).collect())
}

pub fn cell_prob(spec: &SystemSpec, sensor: usize, s: &OutcomeVector, theta: &ParameterPoint) -> Result<f64> {
    let (_, e) = entries(spec, sensor, theta, false)?;
    Ok(lookup(spec, sensor, &e, s)?.probability)
}

/// Analytic gradient on the analytic path; score-function estimate on the sampling path.
pub fn cell_grad(
    spec: &SystemSpec,
    sensor: usize,
    s: &OutcomeVector,
    theta: &ParameterPoint,
) -> Result<Vec<f64>> {
    let (_, e) = entries(spec, sensor, theta, true)?;
    Ok(lookup(spec, sensor, &e, s)?.gradient.clone())
}

/// Central finite differences with step `1e-6 * max(1, |theta_i|)`.
pub fn cell_grad_fd(
    spec: &SystemSpec,
    sensor: usize,
    s: &OutcomeVector,
    theta: &ParameterPoint,
) -> Result<Vec<f64>> {
    spec.check_theta(theta)?;
    spec.sensor(sensor)?
        .superquantizer
        .outcome_index(s)
        .ok_or_else(|| Error::UnknownOutcome {
            sensor,
            outcome: s.0.clone(),
        })?;
    let mut grad = Vec::with_capacity(theta.dim());
    for i in 0..theta.dim() {
        let h = FD_STEP * theta.0[i].abs().max(1.0);
        let mut up = theta.clone();
        let mut down = theta.clone();
        up.0[i] += h;
        down.0[i] -= h;
        if !spec.parameter_space.contains(&up) || !spec.parameter_space.contains(&down) {
            return Err(Error::BoundaryTheta { coord: i });
        }
        let fu = cell_prob(spec, sensor, s, &up)?;
        let fd = cell_prob(spec, sensor, s, &down)?;
        grad.push((fu - fd) / (up.0[i] - down.0[i]));
    }
    Ok(grad)
}

/// Full table for one sensor, with the normalization and gradient-sum
/// invariants enforced.
pub fn table(spec: &SystemSpec, sensor: usize, theta: &ParameterPoint) -> Result<CellProbabilityTable> {
    let (method, entries) = entries(spec, sensor, theta, true)?;
    let t = CellProbabilityTable {
        sensor,
        method,
        entries,
    };
    if let Some(bad) = t.entries.iter().find(|e| !(0.0..=1.0).contains(&e.probability)) {
        return Err(Error::TableInvariant {
            sensor,
            what: "probability range",
            value: bad.probability,
        });
    }
    let norm = (t.probability_sum() - 1.0).abs();
    if norm > NORMALIZATION_TOL {
        return Err(Error::TableInvariant {
            sensor,
            what: "normalization",
            value: norm,
        });
    }
    let scale = t
        .entries
        .iter()
        .flat_map(|e| e.gradient.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let gsum = t.gradient_sum().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gsum > GRAD_SUM_TOL * scale {
        return Err(Error::TableInvariant {
            sensor,
            what: "gradient sum",
            value: gsum,
        });
    }
    Ok(t)
}

/// Tables for every sensor.
pub fn tables(spec: &SystemSpec, theta: &ParameterPoint) -> Result<Vec<CellProbabilityTable>> {
    (0..spec.n_sensors()).map(|j| table(spec, j, theta)).collect()
}
