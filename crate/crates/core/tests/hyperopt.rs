use std::f64::consts::PI;

use qrc_core::fock::{DistributionEngine, PhotonInput};
use qrc_core::hyperopt::{
    evaluate_config, objective_value, optimize, Dim, KdeSampler, Params, RandomSampler,
    SearchSpace, TrialStatus,
};
use qrc_core::presets::{PhotonConfig, PRESETS};
use qrc_core::readout::{ReadoutSettings, SplitSpec};
use qrc_core::reservoir::{FeedbackMode, ReservoirConfig, ShotBudget};
use qrc_core::tasks::{TaskKind, TaskSpec};

fn outcomes(photon: &PhotonInput) -> usize {
    DistributionEngine::new(4, photon.clone()).unwrap().outcomes()
}

#[test]
fn every_preset_lies_inside_the_default_space() {
    let space = SearchSpace::default();
    for p in &PRESETS {
        let config = p.reservoir_config();
        let photon = p.photon.photon_input();
        let params = Params::from_config(&config, &ReadoutSettings::default());
        assert!(space.contains(&params, outcomes(&photon)), "{}", p.name());
        for w in [config.a_in, config.a_fb_d, config.a_fb_4] {
            assert!((-PI..=PI).contains(&w));
        }
    }
}

#[test]
fn preset_settings_evaluate_on_their_tasks() {
    for p in &PRESETS {
        let task = TaskSpec::new(p.task.default_kind(), p.samples, 5);
        let report = evaluate_config(
            &task,
            &p.reservoir_config(),
            &p.photon.photon_input(),
            &p.split(),
            &ReadoutSettings::default(),
        )
        .unwrap_or_else(|e| panic!("{}: {e}", p.name()));
        assert!(report.mse.is_finite(), "{}", p.name());
        assert!(objective_value(task.kind, &report).is_finite());
    }
}

#[test]
fn memory_without_feedback_forgets_past_inputs() {
    let photon = PhotonConfig::Indistinguishable.photon_input();
    let config = ReservoirConfig {
        a_in: 2.0,
        feedback_mode: FeedbackMode::Off,
        ..ReservoirConfig::default()
    };
    for d in 1..=3 {
        let task = TaskSpec::new(TaskKind::Memory(d), 1000, 9);
        let report = evaluate_config(
            &task,
            &config,
            &photon,
            &SplitSpec::new(0.8),
            &ReadoutSettings::default(),
        )
        .unwrap();
        let delayed = report.per_delay_r2.unwrap()[d];
        assert!(delayed < 0.1, "d={d}: {delayed}");
    }
}

#[test]
fn linear_target_is_fitted_almost_exactly_after_search() {
    let photon = PhotonConfig::Indistinguishable.photon_input();
    let base = ReservoirConfig::default();
    let task = TaskSpec::new(TaskKind::Monomial(1), 150, 0);
    let split = SplitSpec::new(0.8);
    let objective = |p: &Params, _: u64| {
        let report = evaluate_config(&task, &p.apply(&base), &photon, &split, &p.readout(false))?;
        Ok(objective_value(task.kind, &report))
    };
    let result = optimize(
        &SearchSpace::default(),
        outcomes(&photon),
        objective,
        60,
        1,
        &RandomSampler,
    )
    .unwrap();
    let mse = result.best.objective.unwrap();
    assert!(mse < 1e-8, "{mse:e}");
}

#[test]
fn short_search_on_xor_finds_a_good_classifier() {
    let photon = PhotonConfig::Indistinguishable.photon_input();
    let base = ReservoirConfig {
        n_shot: ShotBudget::Infinite,
        ..ReservoirConfig::default()
    };
    let task = TaskSpec::new(TaskKind::Xor(1), 300, 2);
    let split = SplitSpec::new(0.8);
    let objective = |p: &Params, _: u64| {
        let report = evaluate_config(&task, &p.apply(&base), &photon, &split, &p.readout(false))?;
        Ok(objective_value(task.kind, &report))
    };
    let result = optimize(
        &SearchSpace::default(),
        outcomes(&photon),
        objective,
        60,
        7,
        &RandomSampler,
    )
    .unwrap();
    assert_eq!(result.trials.len(), 60);
    assert!(-result.best.objective.unwrap() >= 0.95, "{:?}", result.best);
}

#[test]
fn searches_repeat_exactly_and_respect_pinned_dimensions() {
    let photon = PhotonInput::new(vec![0], 1.0);
    let base = ReservoirConfig {
        feedback_mode: FeedbackMode::Off,
        ..ReservoirConfig::default()
    };
    let task = TaskSpec::new(TaskKind::Memory(1), 200, 4);
    let split = SplitSpec::new(0.8);
    let space = SearchSpace {
        a_fb_d: Dim::Fixed(0.5),
        mu_prime: Some(vec![1, 2]),
        ..SearchSpace::default()
    };
    let objective = |p: &Params, _: u64| {
        let report = evaluate_config(&task, &p.apply(&base), &photon, &split, &p.readout(false))?;
        Ok(objective_value(task.kind, &report))
    };
    let kde = KdeSampler::default();
    let a = optimize(&space, 4, objective, 40, 11, &kde).unwrap();
    let b = optimize(&space, 4, objective, 40, 11, &kde).unwrap();
    assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
    for t in &a.trials {
        assert!(space.contains(&t.params, 4));
        assert_eq!(t.params.a_fb_d, 0.5);
        assert_eq!(t.status, TrialStatus::Completed);
        assert!(a.best.objective.unwrap() <= t.objective.unwrap());
    }
}
