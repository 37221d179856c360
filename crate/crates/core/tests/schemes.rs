//! Statistical agreement between the two trajectory samplers and across
//! step sizes.

use qjcal::commands::run_ensemble;
use qjcal::config::RunConfig;
use qjcal::ensemble::model_se_ee;
use qjcal::model::{Rates, ZERO_TEMPERATURE};
use qjcal::trajectory::default_dt;
use qjcal::{PureState, QubitBathParams, Scheme, TrajectorySimulator};

/// Two-sample Kolmogorov–Smirnov statistic; `f64::INFINITY` marks "no jump".
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1% critical value of the two-sample KS statistic for equal sizes `n`.
fn ks_critical_1pct(n: usize) -> f64 {
    1.628 * (2.0 / n as f64).sqrt()
}

fn first_jumps(sim: &TrajectorySimulator, seed: u64, n: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            sim.run(seed, i)
                .unwrap()
                .first_event()
                .map_or(f64::INFINITY, |e| e.time)
        })
        .collect()
}

#[test]
fn fixed_step_and_waiting_time_first_jumps_agree() {
    let n = 10_000;
    for (beta, prob_e) in [(0.5, 0.9), (ZERO_TEMPERATURE, 0.7), (2.0, 0.3)] {
        let params = QubitBathParams {
            beta_hw: beta,
            ..QubitBathParams::default()
        };
        let s = PureState::from_excited_population(prob_e, 0.4).unwrap();
        let fixed = TrajectorySimulator::new(&params, s, 5.0).unwrap();
        let waiting = TrajectorySimulator::new(&params, s, 5.0).unwrap().waiting_time();
        let d = ks_statistic(first_jumps(&fixed, 1, n), first_jumps(&waiting, 2, n));
        assert!(d < ks_critical_1pct(n as usize), "beta {beta}: D = {d}");
    }
}

#[test]
fn ks_statistic_detects_rescaled_times() {
    // Sanity of the KS helper itself: clearly different rates are detected.
    let params = QubitBathParams::default();
    let e = TrajectorySimulator::new(&params, PureState::excited(), 5.0)
        .unwrap()
        .waiting_time();
    let a = first_jumps(&e, 1, 5_000);
    let b: Vec<f64> = a.iter().map(|t| t * 1.2).collect();
    assert!(ks_statistic(a, b) > ks_critical_1pct(5_000));
}

fn ensemble(beta: f64, n: u64, seed: u64, scheme: Scheme, dt: Option<f64>) -> qjcal::commands::EnsembleOutput {
    let cfg = RunConfig {
        beta_hw: beta,
        prob_e: 0.9,
        n,
        seed,
        scheme,
        dt,
        ..RunConfig::default()
    };
    run_ensemble(&cfg, 0).unwrap()
}

#[test]
fn fixed_step_large_ensemble_tracks_master_equation() {
    let out = ensemble(0.5, 100_000, 77, Scheme::FixedStep, None);
    let cmp = &out.report.comparison;
    assert!(cmp.max_abs_dev_ee <= 0.01, "{cmp:?}");
    assert!(cmp.max_abs_z <= 4.0, "max z {}", cmp.max_abs_z);
    assert!(out.report.max_abs_survival_z <= 3.0, "{:?}", out.report.survival);
}

#[test]
fn halving_the_step_changes_nothing_beyond_noise() {
    let n = 20_000;
    let rates = Rates::from_beta_hw(0.5).unwrap();
    let dt = default_dt(&rates);
    let a = ensemble(0.5, n, 3, Scheme::FixedStep, Some(dt));
    let b = ensemble(0.5, n, 4, Scheme::FixedStep, Some(0.5 * dt));
    let s0 = PureState::from_excited_population(0.9, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &t) in a.stats.t.iter().enumerate() {
        let se = model_se_ee(&rates, &s0, t, n) * 2f64.sqrt();
        if se > 0.0 {
            worst = worst.max((a.stats.j_ee[i] - b.stats.j_ee[i]).abs() / se);
        }
    }
    assert!(worst <= 4.0, "max z between dt and dt/2: {worst}");
}
