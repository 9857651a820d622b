//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qcert_core::bases::cglmp_basis;
use qcert_core::certify::{cglmp, cglmp_exact, eof_bound_from_observations, eof_bound_from_state, witness, witness_bound, witness_exact};
use qcert_core::config::{TOMOGRAPHY_FIDELITY_TARGET, RAW_WITNESS_TARGET};
use qcert_core::counting::{simulate_setting, subtract_accidentals, Acquisition};
use qcert_core::linalg::random::{ginibre_density, haar_ket};
use qcert_core::linalg::{Projector, C64};
use qcert_core::plan::{cglmp_settings, witness_setting_name};
use qcert_core::run::{expected_observations, simulate, violation_curve};
use qcert_core::source::{ideal_state, noisy_state, SourceConfig};
use qcert_core::tomo::{fit_noise_to_pair_fidelity, reconstruct_exact};
use qcert_core::{Axis, CountMode, ModeSpace, Observations, OutcomeModel, Result, RunConfig, Setting, Side};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_1() -> Outcome {
    let table: Vec<f64> = (1..=10).map(|d| witness_bound(10, d).unwrap()).collect();
    let expected: Vec<f64> = (0..10).map(|i| 45.0 + 10.0 * i as f64).collect();
    check(
        table == expected && table[6] == 105.0,
        format!("f(10, 1..=10) = {table:?}"),
    )
}

fn criterion_2() -> Outcome {
    let psi = ideal_state(&SourceConfig::uniform(10).unwrap());
    let mut msg = Vec::new();
    let mut ok = true;
    for space in [ModeSpace::X, ModeSpace::K] {
        let r = witness_exact(&psi, space, 1.0).unwrap();
        ok &= (r.w - 135.0).abs() <= 1e-9 && r.certified_dimension == 10;
        msg.push(format!("W_{space} = {:.12} (d = {})", r.w, r.certified_dimension));
    }
    check(ok, msg.join(", "))
}

fn criterion_3() -> Outcome {
    let mut cfg = RunConfig::default_calibrated();
    cfg.spaces = vec![ModeSpace::X];
    cfg.bell_dimensions.clear();
    cfg.tomography_pairs.clear();
    let expected = expected_observations(&cfg, Some(CountMode::Raw)).unwrap();
    let w_expected = witness(&expected, ModeSpace::X, 10, cfg.margin).unwrap();
    let (mut raw_ok, mut increased, mut sigma) = (0, 0, 0.0);
    let seeds = 100;
    for seed in 0..seeds {
        cfg.seed = seed;
        let table = simulate(&cfg).unwrap();
        let raw = witness(&Observations::from_table(&table, CountMode::Raw).unwrap(), ModeSpace::X, 10, cfg.margin).unwrap();
        let sub = witness(&Observations::from_table(&table, CountMode::Subtracted).unwrap(), ModeSpace::X, 10, cfg.margin).unwrap();
        raw_ok += (raw.certified_dimension >= 8) as usize;
        increased += (sub.certified_dimension > raw.certified_dimension) as usize;
        sigma += raw.w_err / seeds as f64;
    }
    check(
        (w_expected.w - RAW_WITNESS_TARGET).abs() < 0.01 && raw_ok >= 95 && increased >= 95,
        format!(
            "expected raw W_X = {:.3}, mean sigma_W = {sigma:.3}; raw certifies >= 8 in {raw_ok}/100 seeds, \
             subtraction raises the dimension in {increased}/100",
            w_expected.w
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 2..=10 {
        let r = eof_bound_from_state(&noisy_state(&SourceConfig::uniform(d).unwrap()), None).unwrap();
        worst = worst.max((r.e_f_lower - (d as f64).log2()).abs());
    }
    let cfg = RunConfig::default_calibrated();
    let obs = expected_observations(&cfg, Some(CountMode::Subtracted)).unwrap();
    let e_f = eof_bound_from_observations(&obs, ModeSpace::X, 10, None).unwrap().e_f_lower;

    // Sampled spread, reported for context.
    let mut small = cfg.clone();
    small.spaces = vec![ModeSpace::X];
    small.bell_dimensions.clear();
    small.tomography_pairs.clear();
    let samples: Vec<f64> = (0..20)
        .map(|seed| {
            small.seed = seed;
            let obs = Observations::from_table(&simulate(&small).unwrap(), CountMode::Subtracted).unwrap();
            eof_bound_from_observations(&obs, ModeSpace::X, 10, None).unwrap().e_f_lower
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    check(
        worst <= 1e-9 && (1.6..=2.1).contains(&e_f) && e_f > 3f64.log2(),
        format!(
            "max |E_F - log2 d| = {worst:.2e}; calibrated E_F = {e_f:.4} ebits (> log2 3 = {:.4}), \
             sampled mean over 20 seeds {mean:.3}",
            3f64.log2()
        ),
    )
}

/// Pure product state `|a⟩ ⊗ |b⟩`.
struct Product {
    a: Vec<C64>,
    b: Vec<C64>,
}

fn overlap(p: &Projector, v: &[C64]) -> f64 {
    p.vector().iter().zip(v).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

impl OutcomeModel for Product {
    fn dim_signal(&self) -> usize {
        self.a.len()
    }
    fn dim_idler(&self) -> usize {
        self.b.len()
    }
    fn joint_probability(&self, s: &Projector, i: &Projector) -> Result<f64> {
        Ok(overlap(s, &self.a) * overlap(i, &self.b))
    }
    fn signal_marginal(&self, s: &Projector) -> Result<f64> {
        Ok(overlap(s, &self.a))
    }
    fn idler_marginal(&self, i: &Projector) -> Result<f64> {
        Ok(overlap(i, &self.b))
    }
}

fn criterion_5() -> Outcome {
    let bell = ideal_state(&SourceConfig::uniform(2).unwrap());
    let s2 = cglmp_exact(&bell, 2).unwrap().s;

    // Independent value: correlators ⟨A_s B_i⟩ taken straight from the basis vectors.
    let corr = |s: usize, i: usize| -> f64 {
        let u = cglmp_basis(Side::Signal, s, 2).unwrap();
        let v = cglmp_basis(Side::Idler, i, 2).unwrap();
        let mut e = 0.0;
        for (k, a) in u.vectors().iter().enumerate() {
            for (l, b) in v.vectors().iter().enumerate() {
                let amp: C64 = (0..2).map(|x| a.vector()[x].conj() * b.vector()[x].conj()).sum::<C64>() / 2f64.sqrt();
                e += if k == l { 1.0 } else { -1.0 } * amp.norm_sqr();
            }
        }
        e
    };
    // CHSH value, independent of which correlator carries the minus sign.
    let e = [[corr(0, 0), corr(0, 1)], [corr(1, 0), corr(1, 1)]];
    let total: f64 = e.iter().flatten().sum();
    let chsh = (0..4).map(|m| (total - 2.0 * e[m / 2][m % 2]).abs()).fold(0.0, f64::max);
    let oracle = 2.0 * 2f64.sqrt();

    let mut mixed_max: f64 = 0.0;
    for d in 2..=10 {
        let rho = noisy_state(&SourceConfig::uniform(d).unwrap().with_noise(1.0).unwrap());
        mixed_max = mixed_max.max(cglmp_exact(&rho, d).unwrap().s.abs());
    }

    let mut product_max = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in 2..=10 {
        let settings: Vec<Setting> = cglmp_settings(d, d).unwrap();
        for _ in 0..10_000 {
            let m = Product { a: haar_ket(d, &mut rng), b: haar_ket(d, &mut rng) };
            let s = cglmp(&Observations::from_model(&m, &settings).unwrap(), d).unwrap().s;
            product_max = product_max.max(s);
        }
    }
    check(
        (s2 - oracle).abs() <= 1e-9 && (chsh - oracle).abs() <= 1e-9 && mixed_max <= 1e-12 && product_max <= 2.0 + 1e-9,
        format!(
            "S_2 = {s2:.12} (2*sqrt2 = {oracle:.12}, CHSH oracle {:.12}); max |S_d(I/d^2)| = {mixed_max:.1e}; \
             max S_d over 9 x 10^4 product states = {product_max:.6}",
            chsh
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut cfg = RunConfig::default_calibrated();
    cfg.spaces.clear();
    cfg.tomography_pairs.clear();
    let dims = cfg.bell_dimensions.clone();
    let (mut raw_ok, mut sub_ok) = (0, 0);
    for seed in 0..100 {
        cfg.seed = seed;
        let table = simulate(&cfg).unwrap();
        let raw = violation_curve(&Observations::from_table(&table, CountMode::Raw).unwrap(), &dims).unwrap();
        let sub = violation_curve(&Observations::from_table(&table, CountMode::Subtracted).unwrap(), &dims).unwrap();
        raw_ok += raw.iter().all(|e| e.violated == (e.d <= 6)) as usize;
        sub_ok += sub.iter().all(|e| e.violated) as usize;
    }
    check(
        raw_ok >= 90 && sub_ok >= 90,
        format!("raw curve violates exactly up to d = 6 in {raw_ok}/100 seeds; subtracted up to d = 10 in {sub_ok}/100"),
    )
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig::default_calibrated();
    let (j, k) = (0, 6);
    let p = fit_noise_to_pair_fidelity(&cfg.source, ModeSpace::X, j, k, TOMOGRAPHY_FIDELITY_TARGET).unwrap();
    let source = cfg.source.clone().with_noise(p).unwrap();
    let r = reconstruct_exact(&noisy_state(&source), ModeSpace::X, j, k).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = ginibre_density(2, 2, &mut rng);
        let back = reconstruct_exact(&rho, ModeSpace::X, 0, 1).unwrap().rho();
        let err = (back - rho.matrix()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(err);
    }
    check(
        (r.fidelity - 0.878).abs() <= 0.005 && (r.relative_phase_deg - 17.0).abs() <= 0.5 && worst < 1e-9,
        format!(
            "pair X({j},{k}) at noise {p:.4}: fidelity {:.4}, phase {:.3} deg; max round-trip error {worst:.1e}",
            r.fidelity, r.relative_phase_deg
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = RunConfig::default_calibrated();
    let rho = noisy_state(&cfg.source);
    let acq = Acquisition::new(cfg.acquisition.p_s, 0.0, cfg.acquisition.p_bg_idler).unwrap();
    let setting = qcert_core::plan::witness_settings(ModeSpace::X, 10)
        .unwrap()
        .into_iter()
        .find(|s| s.name == witness_setting_name(ModeSpace::X, 0, 1, Axis::X))
        .unwrap();
    let seeds = 1000;
    let (mut sum, mut var) = (0.0, 0.0);
    for seed in 0..seeds {
        for r in simulate_setting(&rho, &setting, 5_000_000, &acq, seed).unwrap() {
            let c = subtract_accidentals(&r).unwrap();
            sum += c.value;
            var += c.std_error * c.std_error;
        }
    }
    let mean = sum / seeds as f64;
    let sigma = var.sqrt() / seeds as f64;
    check(
        mean.abs() <= 3.0 * sigma,
        format!("mean subtracted coincidences per run {mean:.4} (combined sigma {sigma:.4})"),
    )
}

fn run_qcert(dir: &Path, threads: usize, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_qcert"))
        .current_dir(dir)
        .env_remove("QCERT_SEED")
        .args(["--no-timestamp", "--threads", &threads.to_string()])
        .args(args)
        .output()
        .unwrap();
    assert!(status.status.success(), "qcert {args:?} failed: {}", String::from_utf8_lossy(&status.stderr));
}

fn run_all(dir: &Path, threads: usize) {
    run_qcert(dir, threads, &["simulate", "--seed", "11", "--out", "counts.csv"]);
    run_qcert(dir, threads, &["certify", "--counts", "counts.csv", "--out", "cert_x.json"]);
    run_qcert(dir, threads, &["certify", "--counts", "counts.csv", "--space", "K", "--subtract-accidentals", "--out", "cert_k.json"]);
    run_qcert(dir, threads, &["bell", "--counts", "counts.csv", "--out", "bell_raw.csv"]);
    run_qcert(dir, threads, &["bell", "--counts", "counts.csv", "--subtract-accidentals", "--out", "bell_sub.csv"]);
    run_qcert(dir, threads, &["bell", "--out", "bell_exact.csv"]);
    run_qcert(dir, threads, &["tomo", "--counts", "counts.csv", "--pair", "0,6", "--resamples", "40", "--out", "tomo.json"]);
    run_qcert(dir, threads, &["tomo", "--pair", "0,5", "--space", "K", "--out", "tomo_exact.json"]);
    run_qcert(dir, threads, &["sweep", "--grid", "0:0.2:5", "--out", "sweep.csv"]);
}

fn criterion_9() -> Outcome {
    let runs: Vec<(usize, tempfile::TempDir)> =
        [1, 4, 4].into_iter().map(|t| (t, tempfile::tempdir().unwrap())).collect();
    for (threads, dir) in &runs {
        run_all(dir.path(), *threads);
    }
    let mut names: Vec<String> = std::fs::read_dir(runs[0].1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut mismatched = Vec::new();
    for name in &names {
        let first = std::fs::read(runs[0].1.path().join(name)).unwrap();
        for (_, dir) in &runs[1..] {
            if std::fs::read(dir.path().join(name)).ok().as_ref() != Some(&first) {
                mismatched.push(name.clone());
            }
        }
    }
    check(
        mismatched.is_empty() && names.len() == 19,
        format!("{} files compared across 1/4/4 threads, mismatched: {mismatched:?}", names.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("witness bound table", criterion_1),
        ("ideal-state witness", criterion_2),
        ("calibrated operating point", criterion_3),
        ("entanglement of formation", criterion_4),
        ("CGLMP exact values", criterion_5),
        ("violation curve shape", criterion_6),
        ("tomography", criterion_7),
        ("counting null test", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {} ({name}, {secs:.1} s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}, {secs:.1} s): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} acceptance criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", criteria.len());
}
