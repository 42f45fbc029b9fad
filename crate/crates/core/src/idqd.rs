//! Inestimable dimension for quantized data (IDQD) and its refinements under
//! shared-model and independent-subvector assumptions, plus the verdict of
//! which singularity/nonidentifiability theorems a design triggers.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spec::{Assumption, GroupingIndepIsm, GroupingIsm, SystemSpec};

/// `lambda(N, {R_jl}) = sum_j prod_l R_jl - N`.
pub fn idqd(spec: &SystemSpec) -> u64 {
    spec.sensors
        .iter()
        .map(|s| (s.superquantizer.alphabet_size() - 1) as u64)
        .sum()
}

/// `D_u = prod_j prod_l R_jl`, the number of realizations of all quantized data.
pub fn global_outcomes(spec: &SystemSpec) -> u128 {
    spec.global_alphabet_size()
}

fn check_partition(n: usize, members: impl Iterator<Item = usize>, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    for m in members {
        if m >= n {
            return Err(Error::InvalidGrouping(format!("{what} index {m} out of range")));
        }
        if seen[m] {
            return Err(Error::InvalidGrouping(format!("{what} {m} appears more than once")));
        }
        seen[m] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::InvalidGrouping(format!("{what} {missing} is not in any group")));
    }
    Ok(())
}

/// Checks that `g` partitions the sensors, that every group shares one model,
/// and that every subgroup also shares one superquantizer.
pub fn validate_ism(spec: &SystemSpec, g: &GroupingIsm) -> Result<()> {
    let n = spec.n_sensors();
    for (p, group) in g.groups.iter().enumerate() {
        if group.is_empty() || group.iter().any(Vec::is_empty) {
            return Err(Error::InvalidGrouping(format!("group {p} has an empty subgroup")));
        }
    }
    check_partition(n, g.groups.iter().flatten().flatten().copied(), "sensor")?;
    for (p, group) in g.groups.iter().enumerate() {
        let first = group[0][0];
        let model = &spec.sensors[first].model;
        for (m, sub) in group.iter().enumerate() {
            let sq = &spec.sensors[sub[0]].superquantizer;
            for &j in sub {
                if &spec.sensors[j].model != model {
                    return Err(Error::InvalidGrouping(format!(
                        "sensor {j} in group {p} does not share the model of sensor {first}"
                    )));
                }
                if !spec.sensors[j].superquantizer.same_as(sq) {
                    return Err(Error::InvalidGrouping(format!(
                        "sensor {j} in group {p} subgroup {m} does not share the superquantizer of sensor {}",
                        sub[0]
                    )));
                }
            }
        }
    }
    if spec.declares(Assumption::A4) && g.groups.len() >= n {
        return Err(Error::InvalidGrouping(format!(
            "A4 claims fewer distinct models than sensors, but the grouping has {} groups for {n} sensors",
            g.groups.len()
        )));
    }
    Ok(())
}

/// Checks that `g` partitions the subvectors `(j, l)`, that every group shares
/// one subvector model, and that every subgroup also shares one quantizer.
pub fn validate_indep_ism(spec: &SystemSpec, g: &GroupingIndepIsm) -> Result<()> {
    let offsets: Vec<usize> = spec
        .sensors
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.superquantizer.quantizers.len();
            Some(o)
        })
        .collect();
    let total: usize = spec.sensors.iter().map(|s| s.superquantizer.quantizers.len()).sum();
    for (w, group) in g.groups.iter().enumerate() {
        if group.is_empty() || group.iter().any(Vec::is_empty) {
            return Err(Error::InvalidGrouping(format!("group {w} has an empty subgroup")));
        }
        for &(j, l) in group.iter().flatten() {
            let ok = spec
                .sensors
                .get(j)
                .is_some_and(|s| l < s.superquantizer.quantizers.len());
            if !ok {
                return Err(Error::InvalidGrouping(format!("subvector ({j}, {l}) does not exist")));
            }
        }
    }
    check_partition(
        total,
        g.groups.iter().flatten().flatten().map(|&(j, l)| offsets[j] + l),
        "subvector",
    )?;
    let sub_model = |j: usize, l: usize| {
        let sq = &spec.sensors[j].superquantizer;
        let off = sq.offsets()[l];
        spec.sensors[j].model.sub_model(off, sq.quantizers[l].dim)
    };
    for (w, group) in g.groups.iter().enumerate() {
        let (j0, l0) = group[0][0];
        let model = sub_model(j0, l0);
        for (t, sub) in group.iter().enumerate() {
            let (js, ls) = sub[0];
            let q = &spec.sensors[js].superquantizer.quantizers[ls];
            for &(j, l) in sub {
                if sub_model(j, l) != model {
                    return Err(Error::InvalidGrouping(format!(
                        "subvector ({j}, {l}) in group {w} does not share the model of ({j0}, {l0})"
                    )));
                }
                if !spec.sensors[j].superquantizer.quantizers[l].same_as(q) {
                    return Err(Error::InvalidGrouping(format!(
                        "subvector ({j}, {l}) in group {w} subgroup {t} does not share the quantizer of ({js}, {ls})"
                    )));
                }
            }
        }
    }
    if spec.declares(Assumption::A6) && g.groups.len() >= total {
        return Err(Error::InvalidGrouping(format!(
            "A6 claims fewer distinct subvector models than subvectors, but the grouping has {} groups for {total} subvectors",
            g.groups.len()
        )));
    }
    Ok(())
}

/// `lambda_ISM = sum_p sum_m (prod_l R_pl^(m) - 1)`.
pub fn ridqd_ism(spec: &SystemSpec, g: &GroupingIsm) -> Result<u64> {
    validate_ism(spec, g)?;
    Ok(g.groups
        .iter()
        .flatten()
        .map(|sub| (spec.sensors[sub[0]].superquantizer.alphabet_size() - 1) as u64)
        .sum())
}

/// `lambda_Indep = sum_j sum_l R_jl - sum_j L_j`; requires A5.
pub fn ridqd_indep(spec: &SystemSpec) -> Result<u64> {
    if !spec.declares(Assumption::A5) && !spec.declares(Assumption::A6) {
        return Err(Error::AssumptionNotDeclared("A5"));
    }
    Ok(ridqd_indep_unchecked(spec))
}

/// The `lambda_Indep` formula without the assumption gate.
pub fn ridqd_indep_unchecked(spec: &SystemSpec) -> u64 {
    spec.sensors
        .iter()
        .flat_map(|s| s.superquantizer.quantizers.iter())
        .map(|q| (q.levels() - 1) as u64)
        .sum()
}

/// `lambda_Indep^ISM = sum_w sum_t (R_w^(t) - 1)`; requires A6.
pub fn ridqd_indep_ism(spec: &SystemSpec, g: &GroupingIndepIsm) -> Result<u64> {
    if !spec.declares(Assumption::A6) {
        return Err(Error::AssumptionNotDeclared("A6"));
    }
    validate_indep_ism(spec, g)?;
    Ok(ridqd_indep_ism_unchecked(spec, g))
}

fn ridqd_indep_ism_unchecked(spec: &SystemSpec, g: &GroupingIndepIsm) -> u64 {
    g.groups
        .iter()
        .flatten()
        .map(|sub| {
            let (j, l) = sub[0];
            (spec.sensors[j].superquantizer.quantizers[l].levels() - 1) as u64
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Theorem {
    /// FIM singular when `D_theta > lambda` (A1, A2).
    T1,
    /// Parameter space not identifiable when `D_theta > lambda` (A1, A3).
    T2,
    /// Shared models: `D_theta > lambda_ISM` (A1, A4, and A2 or A3).
    T3,
    /// Independent subvectors: `D_theta > lambda_Indep` (A1, A5, and A2 or A3).
    T4,
    /// Both: `D_theta > lambda_Indep^ISM` (A1, A6, and A2 or A3).
    T5,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub dim_theta: usize,
    pub lambda: u64,
    pub lambda_ism: Option<u64>,
    pub lambda_indep: Option<u64>,
    pub lambda_indep_ism: Option<u64>,
    /// `D_u`, for reference against `lambda`.
    pub global_outcomes: u128,
    pub triggered_theorems: BTreeSet<Theorem>,
    pub assumptions_declared: BTreeSet<Assumption>,
}

impl Verdict {
    pub fn triggers(&self, t: Theorem) -> bool {
        self.triggered_theorems.contains(&t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }

    /// Plain-text table of all four quantities.
    pub fn table(&self) -> String {
        let show = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        let mark = |v: Option<u64>| match v {
            Some(x) if self.dim_theta as u64 > x => "D_theta > limit",
            Some(_) => "within limit",
            None => "not applicable",
        };
        let assumptions: Vec<String> = self.assumptions_declared.iter().map(ToString::to_string).collect();
        let theorems: Vec<String> = self.triggered_theorems.iter().map(ToString::to_string).collect();
        let mut out = String::new();
        out.push_str(&format!("D_theta            {}\n", self.dim_theta));
        out.push_str(&format!("D_u                {}\n", self.global_outcomes));
        out.push_str(&format!("{:<18} {:>8}  {}\n", "quantity", "value", "status"));
        out.push_str(&format!("{:<18} {:>8}  {}\n", "lambda", self.lambda, mark(Some(self.lambda))));
        out.push_str(&format!("{:<18} {:>8}  {}\n", "lambda_ISM", show(self.lambda_ism), mark(self.lambda_ism)));
        out.push_str(&format!("{:<18} {:>8}  {}\n", "lambda_Indep", show(self.lambda_indep), mark(self.lambda_indep)));
        out.push_str(&format!(
            "{:<18} {:>8}  {}\n",
            "lambda_Indep^ISM",
            show(self.lambda_indep_ism),
            mark(self.lambda_indep_ism)
        ));
        out.push_str(&format!("assumptions        {{{}}}\n", assumptions.join(", ")));
        out.push_str(&format!("triggered          {{{}}}\n", theorems.join(", ")));
        out
    }
}

/// Evaluates every applicable limit and lists the theorems whose assumptions
/// are declared and whose dimension condition holds.
pub fn verdict(
    spec: &SystemSpec,
    dim_theta: usize,
    ism: Option<&GroupingIsm>,
    indep_ism: Option<&GroupingIndepIsm>,
) -> Result<Verdict> {
    let has = |a| spec.declares(a);
    let d = dim_theta as u64;
    let lambda = idqd(spec);
    let lambda_ism = match ism {
        Some(g) => Some(ridqd_ism(spec, g)?),
        None => None,
    };
    let lambda_indep = if has(Assumption::A5) || has(Assumption::A6) {
        Some(ridqd_indep_unchecked(spec))
    } else {
        None
    };
    let lambda_indep_ism = match indep_ism {
        Some(g) if has(Assumption::A6) => Some(ridqd_indep_ism(spec, g)?),
        Some(g) => {
            validate_indep_ism(spec, g)?;
            None
        }
        None => None,
    };
    let smooth_or_cont = has(Assumption::A2) || has(Assumption::A3);
    let mut t = BTreeSet::new();
    if has(Assumption::A1) && d > lambda {
        if has(Assumption::A2) {
            t.insert(Theorem::T1);
        }
        if has(Assumption::A3) {
            t.insert(Theorem::T2);
        }
    }
    if has(Assumption::A1) && smooth_or_cont {
        if has(Assumption::A4) && lambda_ism.is_some_and(|l| d > l) {
            t.insert(Theorem::T3);
        }
        if has(Assumption::A5) && lambda_indep.is_some_and(|l| d > l) {
            t.insert(Theorem::T4);
        }
        if has(Assumption::A6) && lambda_indep_ism.is_some_and(|l| d > l) {
            t.insert(Theorem::T5);
        }
    }
    Ok(Verdict {
        dim_theta,
        lambda,
        lambda_ism,
        lambda_indep,
        lambda_indep_ism,
        global_outcomes: spec.global_alphabet_size(),
        triggered_theorems: t,
        assumptions_declared: spec.assumptions.clone(),
    })
}

/// [`verdict`] with the groupings declared in the spec.
pub fn verdict_for_spec(spec: &SystemSpec, dim_theta: usize) -> Result<Verdict> {
    verdict(
        spec,
        dim_theta,
        spec.groupings.ism.as_ref(),
        spec.groupings.indep_ism.as_ref(),
    )
}
