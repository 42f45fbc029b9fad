use quantlim_core::mle::{frequency_error, sample};
use quantlim_core::{systems, ParameterPoint};

/// Empirical cell frequencies approach the analytic probabilities at the
/// `n^(-1/2)` rate.
#[test]
fn frequency_error_decays_at_root_n() {
    let spec = systems::two_threshold(-0.5, 0.5).unwrap();
    let theta = ParameterPoint(vec![0.2]);
    let ns = [1_000u64, 10_000, 100_000];
    let seeds: Vec<u64> = (1..=40).collect();
    let mean_err: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let total: f64 = seeds
                .iter()
                .map(|&s| frequency_error(&spec, &sample(&spec, &theta, n, s).unwrap(), &theta).unwrap())
                .sum();
            total / seeds.len() as f64
        })
        .collect();
    // Least-squares slope of log error on log n.
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mean_err.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((-0.65..=-0.35).contains(&slope), "slope {slope}, errors {mean_err:?}");
}
