//! Sampled estimators against their exact-path values, 100 seeds at N = 10⁶.

use qcert_core::certify::{cglmp, cglmp_exact, eof_bound_from_observations, eof_bound_from_state, witness, witness_exact};
use qcert_core::counting::{simulate_plan, Acquisition};
use qcert_core::plan::{cglmp_settings, tomo_settings, witness_settings, Setting};
use qcert_core::source::{noisy_state, SourceConfig};
use qcert_core::tomo::{reconstruct_exact, reconstruct_from_table};
use qcert_core::{CountMode, ModeSpace, Observations};

const N: u64 = 1_000_000;
const SEEDS: u64 = 100;

fn setup() -> (qcert_core::DensityOperator, Acquisition) {
    let cfg = SourceConfig::uniform(4).unwrap().with_phases_deg(&[0.0, 20.0, -10.0, 35.0]).unwrap().with_noise(0.1).unwrap();
    (noisy_state(&cfg), Acquisition::new(0.01, 0.3, 0.002).unwrap())
}

struct Running {
    sum: f64,
    var: f64,
}

impl Running {
    fn new() -> Self {
        Running { sum: 0.0, var: 0.0 }
    }

    fn push(&mut self, value: f64, err: f64) {
        self.sum += value;
        self.var += err * err;
    }

    fn check(&self, exact: f64, what: &str) {
        let mean = self.sum / SEEDS as f64;
        let sigma = self.var.sqrt() / SEEDS as f64;
        assert!((mean - exact).abs() <= 3.0 * sigma, "{what}: mean {mean} vs exact {exact} (sigma {sigma})");
    }
}

#[test]
fn witness_and_cglmp_converge_to_exact_values() {
    let (rho, acq) = setup();
    let mut settings: Vec<Setting> = witness_settings(ModeSpace::X, 4).unwrap();
    settings.extend(cglmp_settings(3, 4).unwrap());
    let plan: Vec<(Setting, u64)> = settings.iter().cloned().map(|s| (s, N)).collect();

    let exact_w = witness_exact(&rho, ModeSpace::X, 1.0).unwrap().w;
    let exact_s = cglmp_exact(&rho, 3).unwrap().s;
    let expected_raw = Observations::from_expected(&rho, &plan, &acq, CountMode::Raw).unwrap();
    let raw_w = witness(&expected_raw, ModeSpace::X, 4, 1.0).unwrap().w;
    let raw_s = cglmp(&expected_raw, 3).unwrap().s;

    let (mut w_sub, mut s_sub, mut w_raw, mut s_raw) = (Running::new(), Running::new(), Running::new(), Running::new());
    for seed in 0..SEEDS {
        let table = simulate_plan(&rho, &plan, &acq, seed).unwrap();
        let sub = Observations::from_table(&table, CountMode::Subtracted).unwrap();
        let raw = Observations::from_table(&table, CountMode::Raw).unwrap();
        let (w, s) = (witness(&sub, ModeSpace::X, 4, 1.0).unwrap(), cglmp(&sub, 3).unwrap());
        w_sub.push(w.w, w.w_err);
        s_sub.push(s.s, s.s_err);
        let (w, s) = (witness(&raw, ModeSpace::X, 4, 1.0).unwrap(), cglmp(&raw, 3).unwrap());
        w_raw.push(w.w, w.w_err);
        s_raw.push(s.s, s.s_err);
    }
    w_sub.check(exact_w, "subtracted W");
    s_sub.check(exact_s, "subtracted S_3");
    w_raw.check(raw_w, "raw W");
    s_raw.check(raw_s, "raw S_3");
}

#[test]
fn eof_bound_converges_to_exact_value() {
    let (rho, acq) = setup();
    let plan: Vec<(Setting, u64)> = witness_settings(ModeSpace::X, 4).unwrap().into_iter().map(|s| (s, N)).collect();
    let exact = eof_bound_from_observations(&Observations::from_model(&rho, &plan.iter().map(|p| p.0.clone()).collect::<Vec<_>>()).unwrap(), ModeSpace::X, 4, None)
        .unwrap()
        .b;
    assert!(exact <= eof_bound_from_state(&rho, None).unwrap().b + 1e-12);
    let values: Vec<f64> = (0..SEEDS)
        .map(|seed| {
            let table = simulate_plan(&rho, &plan, &acq, seed).unwrap();
            let obs = Observations::from_table(&table, CountMode::Subtracted).unwrap();
            eof_bound_from_observations(&obs, ModeSpace::X, 4, None).unwrap().b
        })
        .collect();
    let mean = values.iter().sum::<f64>() / SEEDS as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (SEEDS - 1) as f64).sqrt();
    let sigma = sd / (SEEDS as f64).sqrt();
    assert!((mean - exact).abs() <= 3.0 * sigma, "B: mean {mean} vs exact {exact} (sigma {sigma})");
}

#[test]
fn sampled_tomography_fidelity_within_bootstrap_error() {
    let (rho, acq) = setup();
    let (j, k) = (0, 2);
    let exact = reconstruct_exact(&rho, ModeSpace::X, j, k).unwrap().fidelity;
    let plan: Vec<(Setting, u64)> = tomo_settings(ModeSpace::X, j, k, 4).unwrap().into_iter().map(|s| (s, N)).collect();
    let mut outside = Vec::new();
    for seed in 0..SEEDS {
        let table = simulate_plan(&rho, &plan, &acq, seed).unwrap();
        let r = reconstruct_from_table(&table, CountMode::Subtracted, ModeSpace::X, j, k, 100, seed).unwrap();
        let err = r.fidelity_err.unwrap();
        if (r.fidelity - exact).abs() > 3.0 * err {
            outside.push((seed, r.fidelity, err));
        }
    }
    assert!(outside.is_empty(), "exact {exact}; outside 3 bootstrap sigma: {outside:?}");
}
