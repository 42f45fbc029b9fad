//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use quantlim_core::cellprob;
use quantlim_core::fim;
use quantlim_core::grid::{Axis, ThetaGrid};
use quantlim_core::identifiability::{self, g, lemma1_check, obs_equivalent, trace_example1};
use quantlim_core::idqd::{self, Theorem};
use quantlim_core::mle::{self, FitOptions};
use quantlim_core::synth::{self, GroupedLimits, LinearLimits};
use quantlim_core::{parse_spec, Assumption, OutcomeVector, ParameterPoint, SystemSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn shipped(name: &str) -> SystemSpec {
    parse_spec(specs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn shipped_all() -> Vec<(String, SystemSpec)> {
    let mut names: Vec<String> = std::fs::read_dir(specs_dir())
        .expect("specs directory")
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".json") && !n.ends_with(".schema.json"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), shipped(&n))).collect()
}

fn pt(v: &[f64]) -> ParameterPoint {
    ParameterPoint(v.to_vec())
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail.push_str(&format!("; {:.2}s", took.as_secs_f64()));
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail.push_str(&format!(" exceeds {}s", limit.as_secs()));
        }
    }
    o
}

// Oracle arithmetic straight from the level table.
fn prod(v: &[usize]) -> u64 {
    v.iter().map(|&r| r as u64).product()
}

fn criterion1() -> Outcome {
    let mut failures = Vec::new();
    let mut a6_instances = 0;
    let mut check_batch = |seed: u64, lim: GroupedLimits, literal: bool, failures: &mut Vec<String>| {
        let mut rng = synth::rng(seed);
        for k in 0..1000 {
            let sys = synth::grouped_system(&mut rng, lim);
            let spec = &sys.spec;
            let lv = &sys.levels;
            let n = lv.len() as u64;
            let ism = spec.groupings.ism.as_ref().unwrap();
            let indep = spec.groupings.indep_ism.as_ref().unwrap();

            let lambda = lv.iter().map(|r| prod(r)).sum::<u64>() - n;
            let lambda_ism: u64 = ism.groups.iter().flatten().map(|sub| prod(&lv[sub[0]]) - 1).sum();
            let lambda_indep: u64 = lv.iter().flatten().map(|&r| r as u64 - 1).sum();
            let lambda_indep_ism: u64 = indep
                .groups
                .iter()
                .flatten()
                .map(|sub| lv[sub[0].0][sub[0].1] as u64 - 1)
                .sum();
            let du: u128 = lv.iter().flatten().map(|&r| r as u128).product();

            let mut bad = |what: &str| failures.push(format!("seed {seed} #{k}: {what}"));
            if idqd::idqd(spec) != lambda {
                bad("idqd");
            }
            if idqd::ridqd_ism(spec, ism).ok() != Some(lambda_ism) {
                bad("ridqd_ism");
            }
            if idqd::ridqd_indep(spec).ok() != Some(lambda_indep) {
                bad("ridqd_indep");
            }
            if spec.declares(Assumption::A6) {
                a6_instances += 1;
                if idqd::ridqd_indep_ism(spec, indep).ok() != Some(lambda_indep_ism) {
                    bad("ridqd_indep_ism");
                }
            }
            if !(lambda >= lambda_ism && lambda >= lambda_indep && lambda_indep >= lambda_indep_ism) {
                bad("inequality chain");
            }
            if du <= lambda as u128 {
                bad("D_u > lambda");
            }
            // Equality exactly when every shared subgroup contributes nothing extra.
            let ism_trivial = ism
                .groups
                .iter()
                .flatten()
                .all(|sub| sub.len() == 1 || prod(&lv[sub[0]]) == 1);
            if (lambda == lambda_ism) != ism_trivial {
                bad("lambda == lambda_ISM characterization");
            }
            let indep_trivial = indep
                .groups
                .iter()
                .flatten()
                .all(|sub| sub.len() == 1 || lv[sub[0].0][sub[0].1] == 1);
            if (lambda_indep == lambda_indep_ism) != indep_trivial {
                bad("lambda_Indep == lambda_Indep^ISM characterization");
            }
            let indep_eq = lv.iter().all(|r| r.iter().filter(|&&x| x > 1).count() <= 1);
            if (lambda == lambda_indep) != indep_eq {
                bad("lambda == lambda_Indep characterization");
            }
            if literal {
                let ism_singletons = ism.groups.iter().flatten().all(|s| s.len() == 1);
                let indep_singletons = indep.groups.iter().flatten().all(|s| s.len() == 1);
                if (lambda == lambda_ism) != ism_singletons || (lambda_indep == lambda_indep_ism) != indep_singletons {
                    bad("equality iff singleton subgroups");
                }
            }
        }
    };
    check_batch(1, GroupedLimits::default(), false, &mut failures);
    check_batch(
        2,
        GroupedLimits {
            min_levels: 2,
            ..GroupedLimits::default()
        },
        true,
        &mut failures,
    );
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "2x1000 specs (R in 1..=6, and R in 2..=6 for the singleton form), {} with A6 claimable, {} mismatches{}",
            a6_instances,
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    }
}

fn criterion2() -> Outcome {
    let mut rng = synth::rng(3);
    let mut worst_ratio = 0.0f64;
    let mut rank_violations = 0;
    let mut errors = Vec::new();
    for _ in 0..200 {
        let spec = synth::linear_system(&mut rng, LinearLimits::default());
        let lambda = idqd::idqd(&spec) as usize;
        let theta = synth::uniform_point(&mut rng, spec.dim_theta, -1.0, 1.0);
        match fim::fim(&spec, &theta) {
            Ok(r) => {
                let ratio = if lambda == 0 { r.singular_ratio(1) } else { r.singular_ratio(lambda + 1) };
                worst_ratio = worst_ratio.max(ratio);
                if r.numerical_rank > lambda {
                    rank_violations += 1;
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    Outcome {
        pass: worst_ratio < 1e-8 && rank_violations == 0 && errors.is_empty(),
        detail: format!(
            "200 specs, max sigma_(lambda+1)/sigma_1 = {worst_ratio:.3e}, rank > lambda on {rank_violations}, errors {}",
            errors.len()
        ),
    }
}

fn criterion3() -> Outcome {
    let spec = shipped("example1.json");
    let v = idqd::verdict_for_spec(&spec, spec.dim_theta).unwrap();
    let r = fim::fim(&spec, &pt(&[0.0, 1.0])).unwrap();
    let ratio = r.singular_ratio(2);
    let theorems: Vec<Theorem> = v.triggered_theorems.iter().copied().collect();
    let pass = v.lambda == 1
        && spec.dim_theta == 2
        && r.numerical_rank == 1
        && ratio < 1e-10
        && theorems == vec![Theorem::T1, Theorem::T2];
    Outcome {
        pass,
        detail: format!(
            "lambda = {}, D_theta = {}, rank = {}, sigma_2/sigma_1 = {ratio:.3e}, verdict {theorems:?}",
            v.lambda, spec.dim_theta, r.numerical_rank
        ),
    }
}

fn rho_values() -> Vec<f64> {
    identifiability::rho_grid(0.02, 0.98, 50)
}

fn criterion4() -> Outcome {
    let spec = shipped("example1.json");
    let design = identifiability::interval_design(&spec).unwrap();
    let rhos = rho_values();
    let tr = match trace_example1((0.0, 1.0), &rhos, design.a, design.b) {
        Ok(t) => t,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("trace failed: {e}"),
            }
        }
    };
    let target = g(0.0, 1.0, design.a, design.b);
    let t0 = pt(&[0.0, 1.0]);
    let mut worst = 0.0f64;
    let mut not_equiv = 0;
    for s in &tr.samples {
        worst = worst.max((g(s.alpha_rho, s.beta_rho, design.a, design.b) - target).abs());
        if !obs_equivalent(&spec, &t0, &s.theta(), 1e-9).unwrap() {
            not_equiv += 1;
        }
    }
    let mut coincident = 0;
    for (i, a) in tr.samples.iter().enumerate() {
        for b in &tr.samples[i + 1..] {
            if a.theta() == b.theta() {
                coincident += 1;
            }
        }
        if a.theta() == t0 {
            coincident += 1;
        }
    }
    Outcome {
        pass: tr.samples.len() == 50 && worst <= 1e-12 && not_equiv == 0 && coincident == 0,
        detail: format!(
            "{} points, max residual {worst:.3e}, {not_equiv} not equivalent at 1e-9, {coincident} coincident pairs",
            tr.samples.len()
        ),
    }
}

fn criterion5() -> Outcome {
    let spec = shipped("example2.json");
    let p = identifiability::identifiable_point_example2(-1.0, 1.0, -1.0, 1.0).unwrap();
    let s = OutcomeVector(vec![1]);
    let p0 = cellprob::cell_prob(&spec, 0, &s, &pt(&[0.0, 0.0])).unwrap();
    let mut worst_gap = f64::INFINITY;
    let mut count = 0;
    for i in -100i32..=100 {
        for j in -100i32..=100 {
            if i.abs().max(j.abs()) < 2 {
                continue;
            }
            let t = pt(&[0.05 * i as f64, 0.05 * j as f64]);
            let q = cellprob::cell_prob(&spec, 0, &s, &t).unwrap();
            worst_gap = worst_gap.min(p0 - q);
            count += 1;
        }
    }
    let r = fim::fim(&spec, &pt(&[0.0, 0.0])).unwrap();
    Outcome {
        pass: p.theta.0 == vec![0.0, 0.0] && p.certified && worst_gap >= 1e-6 && r.numerical_rank == 0,
        detail: format!(
            "theta* = {:?}, min Pr gap over {count} grid points = {worst_gap:.3e}, FIM rank at theta* = {}",
            p.theta.0, r.numerical_rank
        ),
    }
}

fn random_in_box(rng: &mut impl Rng, spec: &SystemSpec) -> ParameterPoint {
    let b = spec.search_box.as_ref().expect("shipped specs declare a search box");
    ParameterPoint(b.lower.iter().zip(&b.upper).map(|(&lo, &hi)| rng.random_range(lo..=hi)).collect())
}

fn criterion6() -> Outcome {
    let mut rng = synth::rng(6);
    let mut disagreements = 0;
    let mut pairs = 0;
    let mut length_failures = Vec::new();
    for (name, spec) in shipped_all() {
        let lambda = idqd::idqd(&spec);
        let du = spec.global_alphabet_size();
        let t = random_in_box(&mut rng, &spec);
        let psi_len = identifiability::psi(&spec, &t).unwrap().values.len() as u64;
        let phi_len = identifiability::phi(&spec, &t).unwrap().values.len() as u128;
        if !(psi_len == lambda && (lambda as u128) < du && phi_len == du) {
            length_failures.push(name.clone());
        }
        for _ in 0..500 {
            let a = random_in_box(&mut rng, &spec);
            let b = random_in_box(&mut rng, &spec);
            if !lemma1_check(&spec, &a, &b, 1e-10).unwrap().agrees() {
                disagreements += 1;
            }
            pairs += 1;
        }
    }
    let spec = shipped("example1.json");
    let tr = trace_example1((0.0, 1.0), &rho_values(), -2.0, 2.0).unwrap();
    let mut constructed_equal = 0;
    for s in &tr.samples {
        let c = lemma1_check(&spec, &pt(&[0.0, 1.0]), &s.theta(), 1e-10).unwrap();
        if !c.agrees() {
            disagreements += 1;
        }
        if c.phi_equal && c.psi_equal {
            constructed_equal += 1;
        }
        pairs += 1;
    }
    Outcome {
        pass: disagreements == 0 && length_failures.is_empty(),
        detail: format!(
            "{pairs} pairs ({constructed_equal}/50 constructed pairs equal under both maps), {disagreements} disagreements, length failures {length_failures:?}"
        ),
    }
}

fn criterion7() -> Outcome {
    let mut rng = synth::rng(7);
    let (mut worst_norm, mut worst_gsum, mut worst_rel) = (0.0f64, 0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for (name, spec) in shipped_all() {
        // Interior sampling region; the variance coordinate stays away from 0.
        let (lo, hi): (Vec<f64>, Vec<f64>) = if name == "example1.json" {
            (vec![-3.0, 0.25], vec![3.0, 4.0])
        } else {
            (vec![-3.0; spec.dim_theta], vec![3.0; spec.dim_theta])
        };
        for _ in 0..100 {
            let t = ParameterPoint((0..spec.dim_theta).map(|i| rng.random_range(lo[i]..=hi[i])).collect());
            for j in 0..spec.n_sensors() {
                let table = match cellprob::table(&spec, j, &t) {
                    Ok(tb) => tb,
                    Err(e) => {
                        errors.push(format!("{name}: {e}"));
                        continue;
                    }
                };
                worst_norm = worst_norm.max((table.probability_sum() - 1.0).abs());
                worst_gsum = worst_gsum.max(table.gradient_sum().iter().fold(0.0, |m: f64, v| m.max(v.abs())));
                let scale = table
                    .entries
                    .iter()
                    .flat_map(|e| e.gradient.iter())
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                for e in &table.entries {
                    let fd = cellprob::cell_grad_fd(&spec, j, &e.outcome, &t).unwrap();
                    for (a, b) in e.gradient.iter().zip(&fd) {
                        let rel = if scale > 0.0 { (a - b).abs() / scale } else { (a - b).abs() };
                        worst_rel = worst_rel.max(rel);
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst_norm <= 1e-12 && worst_gsum <= 1e-10 && worst_rel <= 1e-5 && errors.is_empty(),
        detail: format!(
            "max |sum q - 1| = {worst_norm:.3e}, max |sum grad q| = {worst_gsum:.3e}, max relative FD gap = {worst_rel:.3e}, errors {}",
            errors.len()
        ),
    }
}

fn criterion8() -> Outcome {
    let s = OutcomeVector(vec![1]);
    let ex1 = shipped("example1.json");
    let (na, nb) = (121, 100);
    let grid = ThetaGrid::new(vec![Axis::closed(-6.0, 6.0, na), Axis::left_open(0.0, 10.0, nb)]);
    let ls = identifiability::level_set_grid(&ex1, 0, &s, &grid).unwrap();
    let at = |i: usize, k: usize| ls.points[i * nb + k].1;
    let mut asym = 0.0f64;
    for i in 0..na {
        for k in 0..nb {
            asym = asym.max((at(i, k) - at(na - 1 - i, k)).abs());
        }
    }
    let mid = (na - 1) / 2;
    let decreasing = (1..nb).all(|k| at(mid, k) < at(mid, k - 1));

    let ex2 = shipped("example2.json");
    let n = 81;
    let grid = ThetaGrid::new(vec![Axis::closed(-4.0, 4.0, n), Axis::closed(-4.0, 4.0, n)]);
    let ls2 = identifiability::level_set_grid(&ex2, 0, &s, &grid).unwrap();
    let at2 = |i: usize, j: usize| ls2.points[i * n + j].1;
    let (mut neg, mut swap) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            neg = neg.max((at2(i, j) - at2(n - 1 - i, n - 1 - j)).abs());
            swap = swap.max((at2(i, j) - at2(j, i)).abs());
        }
    }
    Outcome {
        pass: asym <= 1e-12 && decreasing && neg <= 1e-12 && swap <= 1e-12,
        detail: format!(
            "alpha-asymmetry {asym:.3e}, decreasing in beta at alpha=0: {decreasing}, negation gap {neg:.3e}, swap gap {swap:.3e}"
        ),
    }
}

fn criterion9() -> Outcome {
    let seeds: Vec<u64> = (1..=20).collect();
    let ex1 = shipped("example1.json");
    let study = mle::degeneracy_study(
        &ex1,
        &pt(&[0.0, 1.0]),
        10_000,
        &seeds,
        &FitOptions::for_spec(&ex1).unwrap(),
        1e-6,
    )
    .unwrap();
    let control = shipped("two_threshold.json");
    let cstudy = mle::degeneracy_study(
        &control,
        &pt(&[0.0]),
        10_000,
        &seeds,
        &FitOptions::for_spec(&control).unwrap(),
        1e-6,
    )
    .unwrap();
    Outcome {
        pass: study.median_spread > 0.1 && study.all_equivalent && cstudy.median_spread < 1e-3,
        detail: format!(
            "scalar mean/variance median spread {:.4}, tied maximizers equivalent: {}; two-threshold median spread {:.3e}",
            study.median_spread, study.all_equivalent, cstudy.median_spread
        ),
    }
}

type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("IDQD exactness", Some(1), criterion1),
        ("FIM singular above the IDQD", Some(30), criterion2),
        ("scalar mean/variance instance", None, criterion3),
        ("equivalence curve witness", Some(5), criterion4),
        ("identifiable point with singular FIM", None, criterion5),
        ("phi/psi equality biconditional", None, criterion6),
        ("cell-probability analytics", None, criterion7),
        ("level-set symmetries", None, criterion8),
        ("MLE degeneracy study", Some(120), criterion9),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let o = timed(limit.map(Duration::from_secs), f);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("criterion {}: {tag} {name}: {}", i + 1, o.detail);
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
