//! Random system generators for property tests, acceptance runs and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::models::{ObservationModel, ParameterPoint, ParameterSpace};
use crate::quantizers::{Cell, Interval, Rect, SuperQuantizer, VectorQuantizer};
use crate::spec::{Assumption, GroupingIndepIsm, GroupingIsm, Sensor, SystemSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Limits for [`grouped_system`].
#[derive(Debug, Clone, Copy)]
pub struct GroupedLimits {
    pub max_sensors: usize,
    pub max_subvectors: usize,
    pub min_levels: usize,
    pub max_levels: usize,
    /// Distinct scalar means subvectors can observe.
    pub dim_theta: usize,
}

impl Default for GroupedLimits {
    fn default() -> Self {
        Self {
            max_sensors: 8,
            max_subvectors: 4,
            min_levels: 1,
            max_levels: 6,
            dim_theta: 3,
        }
    }
}

/// A system whose sensors share models and quantizers by construction, with
/// both groupings filled in.
#[derive(Debug, Clone)]
pub struct GroupedSystem {
    pub spec: SystemSpec,
    /// `R_jl` for every sensor and subvector.
    pub levels: Vec<Vec<usize>>,
}

fn threshold_quantizer(levels: usize, salt: usize) -> VectorQuantizer {
    // Distinct salts give distinct region lists for the same level count.
    let base = salt as f64 * 0.125;
    let ts: Vec<f64> = (1..levels).map(|i| base + i as f64).collect();
    VectorQuantizer::thresholds(&ts).expect("increasing thresholds")
}

/// Quantizer key and members of one subgroup under construction.
type SubgroupDraft<K, M> = (K, Vec<M>);

/// Model key and the subgroups drafted under it.
type GroupDraft<K, Q, M> = (K, Vec<SubgroupDraft<Q, M>>);

/// Scalar subvectors `x_jl ~ N(theta[m_jl], 1)` with threshold quantizers
/// drawn from a small palette, so that equal models and quantizers recur.
/// Sensors are grouped by identical model and superquantizer; subvectors by
/// mean index and quantizer. Subgroups are sometimes split further, which
/// the groupings allow.
pub fn grouped_system(rng: &mut impl Rng, lim: GroupedLimits) -> GroupedSystem {
    let n = rng.random_range(1..=lim.max_sensors);
    let palette: Vec<(usize, usize)> = (0..rng.random_range(1..=4))
        .map(|k| (rng.random_range(lim.min_levels..=lim.max_levels), k))
        .collect();
    let n_templates = rng.random_range(1..=n);
    let templates: Vec<Vec<usize>> = (0..n_templates)
        .map(|_| {
            let l = rng.random_range(1..=lim.max_subvectors);
            (0..l).map(|_| rng.random_range(0..lim.dim_theta)).collect()
        })
        .collect();
    let draw_sq = |rng: &mut dyn rand::RngCore, l: usize| -> Vec<usize> {
        (0..l).map(|_| rng.random_range(0..palette.len())).collect()
    };
    let sq_templates: Vec<Vec<usize>> = templates.iter().map(|t| draw_sq(rng, t.len())).collect();

    let mut means = Vec::with_capacity(n);
    let mut quant = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(0..n_templates);
        means.push(templates[t].clone());
        if rng.random_bool(0.5) {
            quant.push(sq_templates[t].clone());
        } else {
            quant.push(draw_sq(rng, templates[t].len()));
        }
    }
    let sensors: Vec<Sensor> = means
        .iter()
        .zip(&quant)
        .map(|(m, q)| {
            Sensor::new(
                ObservationModel::IsotropicGaussianMeanVector { mean_indices: m.clone() },
                SuperQuantizer::new(
                    q.iter()
                        .map(|&k| threshold_quantizer(palette[k].0, palette[k].1))
                        .collect(),
                )
                .expect("nonempty"),
            )
        })
        .collect();
    let levels: Vec<Vec<usize>> = quant.iter().map(|q| q.iter().map(|&k| palette[k].0).collect()).collect();

    // Sensor grouping: by mean vector, then by superquantizer.
    let mut ism: Vec<GroupDraft<Vec<usize>, Vec<usize>, usize>> = Vec::new();
    for j in 0..n {
        let gi = match ism.iter().position(|(m, _)| *m == means[j]) {
            Some(i) => i,
            None => {
                ism.push((means[j].clone(), Vec::new()));
                ism.len() - 1
            }
        };
        let subs = &mut ism[gi].1;
        let split = rng.random_bool(0.15);
        match subs.iter_mut().find(|(q, _)| *q == quant[j]) {
            Some((_, members)) if !split => members.push(j),
            _ => subs.push((quant[j].clone(), vec![j])),
        }
    }
    let ism = GroupingIsm {
        groups: ism
            .into_iter()
            .map(|(_, subs)| subs.into_iter().map(|(_, m)| m).collect())
            .collect(),
    };

    // Subvector grouping: by mean index, then by quantizer.
    let mut indep: Vec<GroupDraft<usize, usize, (usize, usize)>> = Vec::new();
    for j in 0..n {
        for l in 0..means[j].len() {
            let m = means[j][l];
            let gi = match indep.iter().position(|(k, _)| *k == m) {
                Some(i) => i,
                None => {
                    indep.push((m, Vec::new()));
                    indep.len() - 1
                }
            };
            let subs = &mut indep[gi].1;
            let split = rng.random_bool(0.15);
            match subs.iter_mut().find(|(q, _)| *q == quant[j][l]) {
                Some((_, members)) if !split => members.push((j, l)),
                _ => subs.push((quant[j][l], vec![(j, l)])),
            }
        }
    }
    let total: usize = means.iter().map(Vec::len).sum();
    let indep_ism = GroupingIndepIsm {
        groups: indep
            .into_iter()
            .map(|(_, subs)| subs.into_iter().map(|(_, m)| m).collect())
            .collect(),
    };

    let mut assumptions = vec![Assumption::A1, Assumption::A2, Assumption::A3, Assumption::A5];
    if ism.groups.len() < n {
        assumptions.push(Assumption::A4);
    }
    if indep_ism.groups.len() < total {
        assumptions.push(Assumption::A6);
    }
    let mut spec = SystemSpec::new(ParameterSpace::unbounded(lim.dim_theta), sensors).with_assumptions(assumptions);
    spec.groupings.ism = Some(ism);
    spec.groupings.indep_ism = Some(indep_ism);
    GroupedSystem { spec, levels }
}

/// Limits for [`linear_system`].
#[derive(Debug, Clone, Copy)]
pub struct LinearLimits {
    pub max_sensors: usize,
    pub max_subvectors: usize,
    pub max_levels: usize,
    pub max_subvector_dim: usize,
    /// Resample until `lambda` is at most this.
    pub max_lambda: u64,
}

impl Default for LinearLimits {
    fn default() -> Self {
        Self {
            max_sensors: 3,
            max_subvectors: 2,
            max_levels: 3,
            max_subvector_dim: 2,
            max_lambda: 10,
        }
    }
}

/// Quantizer on a `dim`-vector: `levels - 1` disjoint slabs along the first
/// axis with edges in `[-1.5, 1.5]`, plus their complement.
pub fn slab_quantizer(rng: &mut impl Rng, dim: usize, levels: usize) -> VectorQuantizer {
    if levels == 1 {
        return VectorQuantizer::new(dim, vec![Cell::Complement]).expect("whole space");
    }
    let mut cuts: Vec<f64> = (0..levels).map(|_| rng.random_range(-1.5..1.5)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    while cuts.len() < levels {
        let last = *cuts.last().expect("nonempty");
        cuts.push(last + 0.01);
    }
    let mut cells: Vec<Cell> = cuts
        .windows(2)
        .map(|w| {
            let mut r = vec![Interval::new(w[0], w[1])];
            r.extend(std::iter::repeat_n(Interval::REAL_LINE, dim - 1));
            Cell::Rects(vec![Rect(r)])
        })
        .collect();
    cells.push(Cell::Complement);
    VectorQuantizer::new(dim, cells).expect("disjoint slabs")
}

/// `N(H theta, Sigma)` sensors with diagonal `Sigma` in `[0.5, 2]`,
/// `H ~ N(0, 1/D)` and `D_theta = lambda + 1`.
pub fn linear_system(rng: &mut impl Rng, lim: LinearLimits) -> SystemSpec {
    loop {
        let n = rng.random_range(1..=lim.max_sensors);
        let shapes: Vec<Vec<(usize, usize)>> = (0..n)
            .map(|_| {
                (0..rng.random_range(1..=lim.max_subvectors))
                    .map(|_| (rng.random_range(1..=lim.max_subvector_dim), rng.random_range(1..=lim.max_levels)))
                    .collect()
            })
            .collect();
        let lambda: u64 = shapes
            .iter()
            .map(|s| s.iter().map(|&(_, r)| r as u64).product::<u64>() - 1)
            .sum();
        if lambda > lim.max_lambda {
            continue;
        }
        let d = lambda as usize + 1;
        let scale = 1.0 / (d as f64).sqrt();
        let sensors = shapes
            .iter()
            .map(|s| {
                let k: usize = s.iter().map(|&(dim, _)| dim).sum();
                let design = (0..k)
                    .map(|_| {
                        (0..d)
                            .map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z })
                            .collect::<Vec<f64>>()
                    })
                    .collect();
                let covariance = (0..k)
                    .map(|i| (0..k).map(|j| if i == j { rng.random_range(0.5..2.0) } else { 0.0 }).collect())
                    .collect();
                let sq = SuperQuantizer::new(s.iter().map(|&(dim, r)| slab_quantizer(rng, dim, r)).collect())
                    .expect("nonempty");
                Sensor::new(ObservationModel::GaussianLinear { design, covariance }, sq)
            })
            .collect();
        return SystemSpec::new(ParameterSpace::unbounded(d), sensors)
            .with_assumptions([Assumption::A1, Assumption::A2, Assumption::A3]);
    }
}

/// Uniform point in `[lo, hi]^d`.
pub fn uniform_point(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> ParameterPoint {
    ParameterPoint((0..d).map(|_| rng.random_range(lo..=hi)).collect())
}

/// Shuffles sensor order; groupings are dropped since indices change.
pub fn shuffled_sensors(rng: &mut impl Rng, spec: &SystemSpec) -> SystemSpec {
    let mut out = spec.clone();
    out.sensors.shuffle(rng);
    out.groupings = Default::default();
    out.assumptions.remove(&Assumption::A4);
    out.assumptions.remove(&Assumption::A6);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouped_systems_validate() {
        let mut r = rng(1);
        for _ in 0..200 {
            let g = grouped_system(&mut r, GroupedLimits::default());
            g.spec.validate().unwrap();
            assert_eq!(g.levels.len(), g.spec.n_sensors());
        }
    }

    #[test]
    fn linear_systems_validate() {
        let mut r = rng(2);
        for _ in 0..50 {
            let s = linear_system(&mut r, LinearLimits::default());
            s.validate().unwrap();
            assert_eq!(s.dim_theta as u64, crate::idqd::idqd(&s) + 1);
        }
    }
}
