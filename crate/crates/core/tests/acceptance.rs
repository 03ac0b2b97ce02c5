//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qrc_core::circuit::{build_canonical_unitary, compose, CircuitPhases, Gate, GateList};
use qrc_core::experiment::{run, ExperimentConfig, ReadoutChoice};
use qrc_core::fock::{enumerate_basis, permanent, DistributionEngine, PhotonInput};
use qrc_core::hyperopt::{
    evaluate_config, objective_value, optimize, Params, RandomSampler, SearchSpace,
};
use qrc_core::presets::{find, PhotonConfig, PresetTask};
use qrc_core::readout::{
    predict, ridge_fit, MetricsReport, ReadoutSettings, SplitSpec,
};
use qrc_core::reservoir::{FeatureMatrix, FeedbackMode, ReservoirConfig, ShotBudget};
use qrc_core::tasks::{integrate_mackey_glass, MackeyGlassParams, TaskKind, TaskSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn v1() -> PhotonInput {
    PhotonInput::two_photon(1.0)
}

fn v0() -> PhotonInput {
    PhotonInput::two_photon(0.0)
}

fn outcomes(photon: &PhotonInput) -> usize {
    DistributionEngine::new(4, photon.clone()).unwrap().outcomes()
}

fn noiseless(mode: FeedbackMode) -> ReservoirConfig {
    ReservoirConfig {
        feedback_mode: mode,
        n_shot: ShotBudget::Infinite,
        ..ReservoirConfig::default()
    }
}

/// 200-trial random search over the full space, then re-evaluation of the best point.
fn tuned(
    task: &TaskSpec,
    photon: &PhotonInput,
    base: &ReservoirConfig,
    split: &SplitSpec,
    search_seed: u64,
) -> MetricsReport {
    let objective = |p: &Params, _seed: u64| {
        let report = evaluate_config(task, &p.apply(base), photon, split, &p.readout(false))?;
        Ok(objective_value(task.kind, &report))
    };
    let result = optimize(
        &SearchSpace::default(),
        outcomes(photon),
        objective,
        200,
        search_seed,
        &RandomSampler,
    )
    .expect("search produced no finite trial");
    let p = result.best.params;
    evaluate_config(task, &p.apply(base), photon, split, &p.readout(false)).unwrap()
}

fn random_unitary(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(m, m, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    g.qr().q()
}

fn brute_force_permanent(a: &DMatrix<Complex64>) -> Complex64 {
    fn rec(a: &DMatrix<Complex64>, row: usize, used: &mut Vec<bool>) -> Complex64 {
        let n = a.nrows();
        if row == n {
            return Complex64::new(1.0, 0.0);
        }
        let mut total = Complex64::new(0.0, 0.0);
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                total += a[(row, c)] * rec(a, row + 1, used);
                used[c] = false;
            }
        }
        total
    }
    rec(a, 0, &mut vec![false; a.nrows()])
}

fn unitarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let phases = CircuitPhases::new(
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        );
        worst = worst.max(build_canonical_unitary(&phases).deviation());
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && elapsed < Duration::from_secs(1),
        format!("max |U^dag U - I| = {worst:.2e} over 1000 draws in {elapsed:.2?}"),
    )
}

fn zero_phase_transfer() -> Outcome {
    let engine = DistributionEngine::new(4, PhotonInput::single_photon()).unwrap();
    let u = build_canonical_unitary(&CircuitPhases::new(0.0, 0.0, 0.0));
    let p = engine.mixed(&u).unwrap();
    let idx = engine.basis().labels().iter().position(|l| l == "0001").unwrap();
    let err = (p.get(idx) - 1.0).abs();
    outcome(err <= 1e-12, format!("P(mode 0 -> mode 3) = 1 - {err:.1e}"))
}

fn hong_ou_mandel() -> Outcome {
    let splitter = compose(&GateList::new(vec![Gate::beam_splitter(0, 1)]).unwrap(), 2).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (v, expected) in [(1.0, 0.0), (0.0, 0.5), (0.5, 0.25)] {
        let engine = DistributionEngine::new(2, PhotonInput::new(vec![0, 1], v)).unwrap();
        let idx = engine.basis().labels().iter().position(|l| l == "11").unwrap();
        let p = engine.mixed(&splitter).unwrap().get(idx);
        ok &= (p - expected).abs() <= 1e-12;
        parts.push(format!("V={v}: P(11)={p:.3e}"));
    }
    outcome(ok, parts.join(", "))
}

fn permanent_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for (order, count) in [(3usize, 200usize), (4, 50)] {
        for _ in 0..count {
            let u = random_unitary(6, &mut rng);
            let rows: Vec<usize> = (0..order).map(|_| rng.random_range(0..6)).collect();
            let cols: Vec<usize> = (0..order).map(|_| rng.random_range(0..6)).collect();
            let sub = DMatrix::from_fn(order, order, |r, c| u[(rows[r], cols[c])]);
            let fast = permanent(&sub).unwrap();
            let slow = brute_force_permanent(&sub);
            let rel = (fast - slow).norm() / slow.norm().max(1e-300);
            worst = worst.max(if slow.norm() < 1e-14 { (fast - slow).norm() } else { rel });
        }
    }
    outcome(worst < 1e-10, format!("worst relative error {worst:.2e} over 250 submatrices"))
}

fn basis_sizes() -> Outcome {
    let sizes: Vec<usize> = (1..=3).map(|n| enumerate_basis(4, n).len()).collect();
    outcome(sizes == [4, 10, 20], format!("(4,1),(4,2),(4,3) -> {sizes:?}"))
}

fn ridge_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut fits = 0;
    for trial in 0..60 {
        let rows = rng.random_range(20..200);
        let cols = rng.random_range(2..12);
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                let mut r: Vec<f64> = (0..cols).map(|_| rng.random::<f64>()).collect();
                if trial % 2 == 0 {
                    // probability-like rows: the columns sum to one
                    let s: f64 = r.iter().sum();
                    r.iter_mut().for_each(|x| *x /= s);
                }
                r
            })
            .collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.random::<f64>()).collect();
        let x = FeatureMatrix::from_rows(&data);
        for alpha in [0.0, 1e-25, 1e-12, 1e-6, 1e-1, 10.0] {
            let m = ridge_fit(&x, &y, alpha, 0).unwrap();
            worst = worst.max(m.residual);
            fits += 1;
        }
    }

    // Determined system: as many rows as unknowns (weights plus bias).
    let cols = 5;
    let data: Vec<Vec<f64>> = (0..cols + 1)
        .map(|_| (0..cols).map(|_| rng.random::<f64>()).collect())
        .collect();
    let y: Vec<f64> = (0..cols + 1).map(|_| rng.random::<f64>()).collect();
    let x = FeatureMatrix::from_rows(&data);
    let m = ridge_fit(&x, &y, 0.0, 0).unwrap();
    let pred = predict(&m, &x).unwrap();
    let interp = pred.iter().zip(&y).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max);
    outcome(
        worst < 1e-9 && interp < 1e-9,
        format!("worst residual {worst:.2e} over {fits} fits; interpolation error {interp:.2e}"),
    )
}

fn memory_without_feedback() -> Outcome {
    let mut worst = 0.0f64;
    for photon in [PhotonInput::single_photon(), v0(), v1()] {
        for a_in in [0.5, 1.5, PI] {
            for seed in 0..2 {
                let task = TaskSpec::new(TaskKind::Memory(4), 497, seed);
                let cfg = ReservoirConfig {
                    a_in,
                    ..noiseless(FeedbackMode::Off)
                };
                let r = evaluate_config(&task, &cfg, &photon, &SplitSpec::new(0.8), &ReadoutSettings::default())
                    .unwrap();
                let per = r.per_delay_r2.unwrap();
                worst = worst.max(per[1..].iter().copied().fold(0.0, f64::max));
            }
        }
    }
    outcome(worst < 0.1, format!("max R2_d (d=1..4) = {worst:.3} over 18 configurations"))
}

fn memory_with_feedback() -> Outcome {
    let r2: Vec<f64> = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let task = TaskSpec::new(TaskKind::Memory(4), 497, seed);
            let r = tuned(&task, &v1(), &noiseless(FeedbackMode::TwoStep), &SplitSpec::new(0.8), seed);
            r.per_delay_r2.unwrap()[1]
        })
        .collect();
    let m = median(&r2);
    outcome(m > 0.8, format!("V=1 two-step median R2_1 = {m:.3} over 5 seeds {r2:.3?}"))
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn expressivity() -> Outcome {
    let degrees: Vec<u32> = (2..=13).collect();
    let split = SplitSpec::new(0.8);
    let base = noiseless(FeedbackMode::OneStep);
    let run_config = |photon: PhotonInput| -> Vec<f64> {
        degrees
            .par_iter()
            .map(|&n| {
                let task = TaskSpec::new(TaskKind::Monomial(n), 150, 0);
                let mse: Vec<f64> = (0..5u64)
                    .map(|seed| tuned(&task, &photon, &base, &split, seed).mse)
                    .collect();
                median(&mse)
            })
            .collect()
    };
    let m1 = run_config(v1());
    let m0 = run_config(v0());
    let late_ok = degrees
        .iter()
        .zip(m1.iter().zip(&m0))
        .filter(|(n, _)| **n >= 8)
        .all(|(_, (a, b))| a <= b);
    let ns: Vec<f64> = degrees.iter().map(|&n| n as f64).collect();
    let rho = spearman(&ns, &m0);
    let grows = rho >= 0.8 && m0[m0.len() - 1] > m0[0];
    // Reported for information: at n=2 both sit at the rounding floor.
    let below_everywhere = m1.iter().zip(&m0).all(|(a, b)| a <= b);
    let table: Vec<String> = degrees
        .iter()
        .enumerate()
        .map(|(i, n)| format!("n={n}: {:.2e}/{:.2e}", m1[i], m0[i]))
        .collect();
    outcome(
        late_ok && grows,
        format!(
            "V1<=V0 for n>=8: {late_ok}; V0 trend rank corr {rho:.2}; V1<=V0 for all n: {below_everywhere}; median MSE V1/V0 {}",
            table.join(", ")
        ),
    )
}

fn temporal_xor() -> Outcome {
    let split = SplitSpec::new(0.8);
    let base = noiseless(FeedbackMode::TwoStep);
    let accuracy = |photon: &PhotonInput, d: usize| -> Vec<f64> {
        (0..5u64)
            .into_par_iter()
            .map(|seed| tuned(&TaskSpec::new(TaskKind::Xor(d), 300, seed), photon, &base, &split, seed).accuracy.unwrap())
            .collect()
    };
    let mut d1 = Vec::new();
    for photon in [PhotonInput::single_photon(), v0(), v1()] {
        d1.push(median(&accuracy(&photon, 1)));
    }
    let a1 = median(&accuracy(&v1(), 3));
    let a0 = median(&accuracy(&v0(), 3));
    let ok = d1.iter().all(|&a| a >= 0.95) && a1 > a0;
    outcome(
        ok,
        format!("d=1 median accuracy single/V0/V1 = {d1:.3?}; d=3 V1 {a1:.3} vs V0 {a0:.3}"),
    )
}

fn narma_ordering() -> Outcome {
    let split = SplitSpec::new(0.8);
    let base = noiseless(FeedbackMode::TwoStep);
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=5usize {
        let mse = |photon: &PhotonInput| -> Vec<f64> {
            (0..30u64)
                .into_par_iter()
                .map(|seed| tuned(&TaskSpec::new(TaskKind::Narma(n), 500, seed), photon, &base, &split, seed).mse)
                .collect()
        };
        let (m1, m0) = (median(&mse(&v1())), median(&mse(&v0())));
        ok &= m1 <= m0;
        parts.push(format!("N={n}: {m1:.4e}/{m0:.4e}"));
    }
    outcome(ok, format!("median MSE V1/V0 over 30 seeds: {}", parts.join(", ")))
}

fn shot_noise() -> Outcome {
    let task = TaskSpec::new(TaskKind::Monomial(3), 150, 0);
    let photon = v1();
    let split = SplitSpec::new(0.8);
    let readout = ReadoutSettings {
        alpha: 1e-8,
        washout: 5,
        standardize: false,
    };
    let base = find(PresetTask::Expressivity, PhotonConfig::Indistinguishable)
        .unwrap()
        .reservoir_config();
    let mut medians = Vec::new();
    for n_shot in [100u64, 1_000, 10_000] {
        let mse: Vec<f64> = (0..10u64)
            .map(|rep| {
                let cfg = ReservoirConfig {
                    n_shot: ShotBudget::Finite(n_shot),
                    seed: rep,
                    ..base.clone()
                };
                evaluate_config(&task, &cfg, &photon, &split, &readout).unwrap().mse
            })
            .collect();
        medians.push(median(&mse));
    }
    let infinite: Vec<f64> = (0..10u64)
        .map(|rep| {
            let cfg = ReservoirConfig {
                n_shot: ShotBudget::Infinite,
                seed: rep,
                ..base.clone()
            };
            evaluate_config(&task, &cfg, &photon, &split, &readout).unwrap().mse
        })
        .collect();
    let inf = median(&infinite);
    medians.push(inf);

    // Independent exact-probability reference built straight from the engine.
    let engine = DistributionEngine::new(4, photon.clone()).unwrap();
    let dataset = qrc_core::tasks::generate(&task).unwrap();
    let mut prev = vec![0.0; engine.outcomes()];
    let mut rows = Vec::new();
    for &s in &dataset.inputs {
        let phases = CircuitPhases::new(
            qrc_core::reservoir::quantize_phase(base.a_in * s, base.phase_step),
            qrc_core::reservoir::quantize_phase(base.a_fb_d * prev[base.mu_prime], base.phase_step),
            qrc_core::reservoir::quantize_phase(base.a_fb_4 * prev[base.mu_dprime], base.phase_step),
        );
        let p = engine.mixed(&build_canonical_unitary(&phases)).unwrap().into_vec();
        prev.clone_from(&p);
        rows.push(p);
    }
    let exact = qrc_core::hyperopt::score_features(
        task.kind,
        &dataset,
        &FeatureMatrix::from_rows(&rows),
        &split,
        &readout,
    )
    .unwrap()
    .report
    .mse;
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let matches = (inf - exact).abs() <= 1e-12;
    outcome(
        monotone && matches,
        format!(
            "median MSE at 1e2/1e3/1e4/inf = {:.3e}/{:.3e}/{:.3e}/{:.3e}; |inf - exact| = {:.1e}",
            medians[0],
            medians[1],
            medians[2],
            medians[3],
            (inf - exact).abs()
        ),
    )
}

fn mackey_glass() -> Outcome {
    let still = MackeyGlassParams {
        history: 1.0,
        transient: 0.0,
        ..MackeyGlassParams::default()
    };
    let series = integrate_mackey_glass(100, &still).unwrap();
    let drift = series.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);

    let split = SplitSpec::new(0.5);
    let base = noiseless(FeedbackMode::TwoStep);
    let mse = |photon: &PhotonInput, horizon: usize| -> f64 {
        let task = TaskSpec::new(TaskKind::MackeyGlass(horizon), 390, 0);
        let v: Vec<f64> = (0..5u64)
            .into_par_iter()
            .map(|seed| tuned(&task, photon, &base, &split, seed).mse)
            .collect();
        median(&v)
    };
    let identity = mse(&v1(), 0);
    let (m1, m0) = (mse(&v1(), 3), mse(&v0(), 3));
    outcome(
        drift < 1e-9 && identity < 1e-3 && m1 <= m0,
        format!(
            "equilibrium drift {drift:.1e}; t_f=0 MSE {identity:.2e}; t_f=3 median MSE V1 {m1:.3e} vs V0 {m0:.3e}"
        ),
    )
}

fn determinism() -> Outcome {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/narma_indistinguishable.json"
    ))
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json_str(&text).unwrap();
    cfg.replicas = 8;
    cfg.readout = ReadoutChoice::Fixed(ReadoutSettings::default());
    cfg.hyperopt = Some(qrc_core::experiment::HyperoptSettings {
        budget: 16,
        ..Default::default()
    });
    cfg.output_dir = tmp.path().join("out");
    let files = ["results.json", "predictions.csv", "trace.csv", "trials.jsonl"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        run(&cfg).unwrap();
        let snap: Vec<Vec<u8>> = files.iter().map(|f| fs::read(cfg.output_dir.join(f)).unwrap()).collect();
        snapshots.push(snap);
        fs::remove_dir_all(&cfg.output_dir).unwrap();
    }
    let same = snapshots[0] == snapshots[1];
    outcome(same, format!("two runs of {} files identical: {same}", files.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("unitarity", unitarity),
        ("zero-phase transfer", zero_phase_transfer),
        ("hong-ou-mandel", hong_ou_mandel),
        ("permanent oracle", permanent_oracle),
        ("basis sizes", basis_sizes),
        ("ridge correctness", ridge_correctness),
        ("memory collapse without feedback", memory_without_feedback),
        ("memory with two-step feedback", memory_with_feedback),
        ("expressivity indistinguishability advantage", expressivity),
        ("temporal xor", temporal_xor),
        ("narma ordering", narma_ordering),
        ("shot-noise convergence", shot_noise),
        ("mackey-glass sanity", mackey_glass),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("{status} {name} ({:.1?}): {}", start.elapsed(), result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
