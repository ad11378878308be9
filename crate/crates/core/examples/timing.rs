use fluidbeam::channel::sample_scenario;
use fluidbeam::config::ScenarioConfig;
use fluidbeam::solver::{run_baseline, Scheme, SolverOptions};
use rayon::prelude::*;

fn mean_rate(cfg: &ScenarioConfig, scheme: Scheme, trials: u64, seed0: u64) -> f64 {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let real = sample_scenario(cfg, seed0 + t);
            let opts = SolverOptions { seed: seed0 + t, ..Default::default() };
            run_baseline(scheme, &real, cfg, &opts).final_rate
        })
        .sum::<f64>() / trials as f64
}

fn main() {
    let base = ScenarioConfig::default();
    // C1 exact batch: 50 trials from the default base seed.
    let flat: usize = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let real = sample_scenario(&base, base.base_seed + t);
            let opts = SolverOptions { seed: base.base_seed + t, ..Default::default() };
            let rep = run_baseline(Scheme::FpBcd, &real, &base, &opts);
            let r = &rep.iteration_rates;
            let n = r.len();
            usize::from((r[n - 1] - r[n - 2]).abs() / r[n - 1].abs().max(1e-12) < 0.01)
        })
        .sum();
    println!("C1 flat 9->10: {flat}/50");

    // C3 exact batch: 32 trials per cell.
    for scheme in [Scheme::FpBcd, Scheme::RxFas, Scheme::TxFas, Scheme::Fpa] {
        let mut means = Vec::new();
        for delta in [0.0f64, 2.0, 4.0, 6.0, 8.0] {
            let cfg = ScenarioConfig { delta_deg: delta, ..base.clone() };
            means.push(mean_rate(&cfg, scheme, 32, base.base_seed));
        }
        let drop = (means[0] - means[4]) / means[0];
        println!("C3 {:8}: {:?} drop {:.4}", scheme.name(),
                 means.iter().map(|m| (m*1000.0).round()/1000.0).collect::<Vec<_>>(), drop);
    }

    // C4 exact batch: 48 trials per size.
    let mut means = Vec::new();
    for a in [1.0f64, 2.0, 3.0, 4.0, 6.0] {
        let cfg = ScenarioConfig {
            side_tx_wl: a.max(1.5),
            side_rx_wl: a,
            ..base.clone()
        };
        means.push(mean_rate(&cfg, Scheme::FpBcd, 48, base.base_seed));
    }
    println!("C4 sizes {{1,2,3,4,6}}: {:?}",
             means.iter().map(|m| (m*1000.0).round()/1000.0).collect::<Vec<_>>());
    println!("C4 gain 1->4 {:.3}; 4->6 {:.3}", means[3]-means[0], means[4]-means[3]);
}
