//! Monte Carlo checks of the estimators against exact model quantities.
//!
//! Each check draws independent Example 1 paths, estimates, and compares the
//! replicate mean with the oracle using the replicate standard error.

use std::f64::consts::PI;

use ldp_spectral::bench::{
    run_experiment_with_threads, DensityNormalization, ExperimentConfig, MechanismFamily, Task,
};
use ldp_spectral::estim::{
    baseline_nonprivate, est_cov_ni, est_cov_si, est_sdf_ni, est_sdf_point_si,
    tapered_spectral_sum, BaselineTask,
};
use ldp_spectral::mech::{privatize_ni, privatize_si_cov, privatize_si_point};
use ldp_spectral::model::{
    bandwidth, spectral_from_cov, truncation_schedule, BandwidthTask, CovarianceSequence,
    MechanismKind, PrivacyBudget, SmoothnessClass,
};
use ldp_spectral::procgen::{covs_of, GaussianSampler, ProcessSpec, SeededRng};

const N: usize = 100_000;
const REPLICATES: u64 = 50;
const SE_MULTIPLE: f64 = 4.0;

fn example_one() -> (CovarianceSequence, GaussianSampler) {
    let covs = covs_of(&ProcessSpec::example(1, 1000).unwrap()).unwrap();
    let sampler = GaussianSampler::new(&covs, N).unwrap();
    (covs, sampler)
}

/// Replicate mean and its standard error.
fn replicate<F: FnMut(&[f64], &mut SeededRng) -> f64>(
    sampler: &GaussianSampler,
    seed: u64,
    mut estimate: F,
) -> (f64, f64) {
    let values: Vec<f64> = (0..REPLICATES)
        .map(|r| {
            let path = sampler.sample(&mut SeededRng::new(seed, 2 * r));
            estimate(&path, &mut SeededRng::new(seed, 2 * r + 1))
        })
        .collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn assert_within(label: &str, (mean, se): (f64, f64), truth: f64) {
    assert!(
        (mean - truth).abs() <= SE_MULTIPLE * se,
        "{label}: mean {mean} vs {truth}, se {se}"
    );
}

#[test]
fn ni_lag_two_covariance() {
    let (_, sampler) = example_one();
    let alpha = 5.0;
    let budget = PrivacyBudget::new(alpha, 0.001).unwrap();
    let sched = truncation_schedule(N, &budget, MechanismKind::Ni, None).unwrap();
    let r = replicate(&sampler, 101, |path, rng| {
        let t = privatize_ni(path, &sched, alpha, rng).unwrap();
        est_cov_ni(&t, 2, &sched, alpha).unwrap()
    });
    assert_within("NI sigma_2", r, 0.9216);
}

#[test]
fn ni_spectral_point() {
    let (covs, sampler) = example_one();
    let alpha = 5.0;
    let budget = PrivacyBudget::new(alpha, 0.001).unwrap();
    let sched = truncation_schedule(N, &budget, MechanismKind::Ni, None).unwrap();
    let class = SmoothnessClass::hoelder(3.0, 1.0, 1.0).unwrap();
    let m = bandwidth(N, &budget, 3.0, &sched, BandwidthTask::ni_point(&class)).unwrap();
    let omega = PI / 5.0;
    let r = replicate(&sampler, 102, |path, rng| {
        let t = privatize_ni(path, &sched, alpha, rng).unwrap();
        est_sdf_ni(&t, m, &sched, alpha, omega).unwrap()
    });
    // The estimator targets the order-m partial sum; at this bandwidth the
    // truncation bias against the full density is far larger than the SE.
    let partial = spectral_from_cov(&covs.with_max_lag(m), omega);
    assert_within("NI f_m(pi/5)", r, partial);
    let full = spectral_from_cov(&covs, omega);
    assert!(
        (partial - full).abs() > SE_MULTIPLE * r.1,
        "bias {} vs se {}",
        partial - full,
        r.1
    );
}

#[test]
fn si_lag_two_covariance() {
    let (_, sampler) = example_one();
    let alpha = 1.0;
    let budget = PrivacyBudget::new(alpha, 0.001).unwrap();
    let sched = truncation_schedule(N, &budget, MechanismKind::SiCov, None).unwrap();
    let r = replicate(&sampler, 103, |path, rng| {
        let t = privatize_si_cov(path, 2, &sched, alpha, rng).unwrap();
        est_cov_si(&t, 2).unwrap()
    });
    assert_within("SI sigma_2", r, 0.9216);
}

#[test]
fn si_spectral_point_targets_tapered_sum() {
    let (covs, sampler) = example_one();
    let alpha = 1.0;
    let budget = PrivacyBudget::new(alpha, 0.001).unwrap();
    let probe = truncation_schedule(N, &budget, MechanismKind::SiPoint, Some(1)).unwrap();
    let class = SmoothnessClass::hoelder(3.0, 1.0, 1.0).unwrap();
    let k = bandwidth(N, &budget, 3.0, &probe, BandwidthTask::si_point(&class)).unwrap();
    let sched = truncation_schedule(N, &budget, MechanismKind::SiPoint, Some(k)).unwrap();
    let omega = PI / 5.0;
    let r = replicate(&sampler, 104, |path, rng| {
        let t = privatize_si_point(path, omega, k, &sched, alpha, rng).unwrap();
        est_sdf_point_si(&t, k, omega).unwrap()
    });
    let oracle = tapered_spectral_sum(covs.values(), omega, k).unwrap();
    assert_within("SI tapered f(pi/5)", r, oracle);
}

#[test]
fn nonprivate_lag_two_covariance() {
    let (_, sampler) = example_one();
    let r = replicate(&sampler, 105, |path, _| {
        baseline_nonprivate(path, BaselineTask::Cov { j: 2 }).unwrap()
    });
    assert_within("sample sigma_2", r, 0.9216);
}

#[test]
fn mse_nonincreasing_in_alpha() {
    let cfg = ExperimentConfig {
        example: Some(1),
        process: None,
        n: 500,
        replications: 100,
        alphas: vec![0.1, 0.2, 0.5, 1.0, 2.0],
        tasks: vec![Task::Cov(0), Task::Cov(2)],
        mechanisms: vec![MechanismFamily::Ni, MechanismFamily::Si],
        s: 3.0,
        delta_log: 0.001,
        tau_override: None,
        tau_tilde_override: None,
        seed: 5,
        density_normalization: DensityNormalization::Eq1,
    };
    let res = run_experiment_with_threads(&cfg, None).unwrap();
    for task in &cfg.tasks {
        for mech in &cfg.mechanisms {
            let rows: Vec<_> = res
                .rows
                .iter()
                .filter(|r| r.task == *task && r.mechanism == *mech)
                .collect();
            let violations = rows
                .windows(2)
                .filter(|w| w[1].mse > w[0].mse)
                .filter(|w| w[1].mse - w[0].mse > 2.0 * (w[0].mse_se + w[1].mse_se))
                .count();
            let minor = rows.windows(2).filter(|w| w[1].mse > w[0].mse).count();
            assert_eq!(violations, 0, "{task} {}", mech.as_str());
            assert!(minor <= 1, "{task} {}: {minor} increases", mech.as_str());
        }
    }
}
