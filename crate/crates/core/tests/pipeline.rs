use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spyrank::bundle::ModelBundle;
use spyrank::classifiers::{auc, train, ClassifierKind, Hyperparams, ScoreSet};
use spyrank::data::validate_dataset;
use spyrank::evaluation::experiment::used_channels;
use spyrank::evaluation::{fit_all, generate_synthetic, make_cv_plan, run_experiment, run_experiment_with_folds};
use spyrank::evaluation::{Cohort, ExperimentConfig, ExperimentReport, SyntheticSpec};
use spyrank::fusion::{grid_search_weights, select_channel_subset, select_dims};
use spyrank::sampling::{schedule_clips, SamplingPolicy};
use spyrank::{Error, Matrix};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn small_spec(games: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_games: games,
        duration_s: (300.0, 420.0),
        seed,
        ..SyntheticSpec::default()
    }
}

fn fast_config(folds: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        folds,
        ..ExperimentConfig::default()
    };
    cfg.ensemble_search.enabled = false;
    cfg
}

#[test]
fn schedule_counts_follow_the_window_formula() {
    let p = SamplingPolicy::default();
    // 46 minutes: floor((2760 - 10) / 30) + 1
    assert_eq!(schedule_clips(2760.0, &p).unwrap().windows.len(), 92);
    assert!(schedule_clips(1800.0, &p).unwrap().windows.len() >= 59);
    assert!(matches!(schedule_clips(9.0, &p), Err(Error::VideoTooShort { .. })));
}

#[test]
fn subset_search_prefers_the_informative_channel_alone() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let labels: Vec<u8> = (0..120).map(|i| (i % 2) as u8).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| vec![10.0 * f64::from(y) + normal(&mut rng), normal(&mut rng), normal(&mut rng)])
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let (tr, te): (Vec<usize>, Vec<usize>) = (0..120).partition(|i| i % 5 != 0);
    let names = vec!["A".to_string(), "B".to_string(), "C".to_string()];
    let search = select_channel_subset(&names, &[ClassifierKind::LogisticRegression], |subset, kind| {
        let xtr = x.select_rows(&tr).select_columns(subset);
        let xte = x.select_rows(&te).select_columns(subset);
        let ytr: Vec<u8> = tr.iter().map(|&i| labels[i]).collect();
        let yte: Vec<u8> = te.iter().map(|&i| labels[i]).collect();
        let m = train(kind, &xtr, &ytr, &Hyperparams::default(), 0)?;
        Ok((auc(&m.predict(&xte)?, &yte)?, ()))
    })
    .unwrap();
    let best = search.best().unwrap();
    assert_eq!(search.subset_names(&best.subset), vec!["A"]);
    assert_eq!(search.evaluations.len(), 7);
}

#[test]
fn dim_filter_keeps_the_planted_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            (0..51)
                .map(|j| normal(&mut rng) + if j == 37 { 3.0 * f64::from(y) } else { 0.0 })
                .collect()
        })
        .collect();
    let keep = select_dims(&Matrix::from_rows(&rows).unwrap(), &labels, 5).unwrap();
    assert_eq!(keep.len(), 5);
    assert!(keep.contains(&37));
}

#[test]
fn grid_search_puts_all_weight_on_a_perfect_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ids: Vec<String> = (0..40).map(|i| format!("p{i}")).collect();
    let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
    let mut sets = Vec::new();
    for f in 0..4 {
        let scores = if f == 2 {
            labels.iter().map(|&y| 0.2 + 0.6 * f64::from(y)).collect()
        } else {
            (0..40).map(|_| rng.gen()).collect()
        };
        sets.push(ScoreSet::new(ids.clone(), scores, labels.clone()).unwrap());
    }
    let refs: Vec<&ScoreSet> = sets.iter().collect();
    let r = grid_search_weights(&refs, 0.1, &[]).unwrap();
    assert_eq!(r.weights.alpha, vec![0.0, 0.0, 1.0, 0.0]);
    assert_eq!(r.auc, 1.0);
    assert_eq!(r.candidates, 286);
}

/// Mean over players of each player's average value of `ch[dim]`, split by role.
fn role_means(ds: &spyrank::data::GameDataset, ch: &str, dim: usize) -> (f64, f64) {
    let spec = ds.channel(ch).unwrap().clone();
    let (mut s, mut r) = (Vec::new(), Vec::new());
    for (_, p) in ds.players() {
        let series = ds.read_series(p, &spec).unwrap();
        let m = (0..series.len()).map(|i| series.row(i)[dim]).sum::<f64>() / series.len() as f64;
        if p.role.label() == 1 {
            s.push(m);
        } else {
            r.push(m);
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (avg(&s), avg(&r))
}

#[test]
fn generator_plants_the_requested_gap() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_games: 40,
        duration_s: (60.0, 90.0),
        seed: 9,
        ..SyntheticSpec::default()
    }
    .with_effects(&["fau[0]"], 2.0);
    let ds = generate_synthetic(&spec, dir.path()).unwrap();
    assert!(validate_dataset(&ds).errors.is_empty());
    // player means carry unit between-player spread; about 260 players
    // put three standard errors near 0.4
    let (s, r) = role_means(&ds, "fau", 0);
    assert!((s - r - 2.0).abs() < 0.4, "gap {}", s - r);
    let (s, r) = role_means(&ds, "fau", 1);
    assert!((s - r).abs() < 0.4, "null gap {}", s - r);
}

#[test]
fn encoders_only_see_training_games() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&small_spec(6, 21).with_effects(&["fau[0]"], 1.5), dir.path()).unwrap();
    let report = run_experiment(&ds, &fast_config(3)).unwrap();
    assert_eq!(report.folds.len(), 3);
    for fold in &report.folds {
        for fam in &fold.families {
            assert!(!fam.fitted_on.is_empty());
            for g in &fam.fitted_on {
                assert!(fold.train_games.contains(g), "{} fitted on {g}", fam.family);
                assert!(!fold.test_games.contains(g));
            }
        }
    }
    let back = ExperimentReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.metrics_table().lines().count(), report.folds.len() + 2);
}

#[test]
fn corrupted_plan_trips_the_leakage_guard() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&small_spec(6, 22), dir.path()).unwrap();
    let ids: Vec<&str> = ds.games.iter().map(|g| g.game_id.as_str()).collect();
    let mut folds = make_cv_plan(&ids, 3, 1).unwrap().folds();
    let moved = folds[1].test_games[0].clone();
    folds[1].train_games.push(moved);
    let err = run_experiment_with_folds(&ds, &fast_config(3), &folds).unwrap_err();
    assert!(matches!(err, Error::Leakage(_)), "{err}");
}

#[test]
fn bundle_round_trips_and_scores_every_player() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&small_spec(4, 23).with_effects(&["emotion[0]"], 2.0), dir.path()).unwrap();
    let cfg = fast_config(2);
    let cohort = Cohort::load(&ds, &used_channels(&ds, &cfg), &cfg.sampling).unwrap();
    let fit = fit_all(&ds, &cohort, &cfg).unwrap();
    let channels: Vec<Vec<String>> = cfg.families.iter().map(|f| f.channels.clone()).collect();
    let bundle = ModelBundle::from_fit(&fit, &channels, &cfg.sampling, cfg.seed);
    let path = dir.path().join("bundle.json");
    bundle.save(&path).unwrap();
    let back = ModelBundle::load(&path).unwrap();
    assert_eq!(back, bundle);
    let scores = back.score(&ds).unwrap();
    assert_eq!(scores.fused.len(), ds.player_count());
    assert_eq!(scores.families.len(), cfg.families.len());
    assert!(matches!(
        ModelBundle::load(&dir.path().join("missing.json")),
        Err(Error::MissingFile(_))
    ));
}
