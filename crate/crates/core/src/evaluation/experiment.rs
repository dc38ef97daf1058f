//! Nested, game-disjoint cross-validated experiments.
//!
//! Every selection step (histogram mode and bins, dim subsets, classifier
//! kind, fusion weights) runs on inner folds of the outer training games.
//! Outer test games are only ever encoded and scored.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{train as train_model, ClassifierKind, MetricReport, ScoreSet, TrainedModel};
use crate::data::{DimRef, GameDataset};
use crate::encoders::histogram::HistogramMode;
use crate::error::{Error, Result};
use crate::evaluation::config::{EncoderConfig, ExperimentConfig, FamilyConfig};
use crate::evaluation::cv::{check_disjoint, make_cv_plan, Fold};
use crate::evaluation::features::{Cohort, FisherEncoder, FisherParams, FittedEncoder};
use crate::evaluation::report::{self, ExperimentReport};
use crate::fusion::{enumerate_subsets, evaluate_assignments, fuse, grid_search_weights, FamilyScores, FusionWeights};
use crate::matrix::Matrix;

/// Mixes `parts` into `base` (splitmix64 finalizer per part).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(p.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const TAG_GMM: u64 = 1;
const TAG_MODEL: u64 = 2;
const TAG_INNER_PLAN: u64 = 3;
/// Fold index used when fitting on every game.
pub const FULL_FIT: u64 = 1 << 32;

/// The encoding picked for one (family, classifier kind) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoder", rename_all = "snake_case")]
pub enum EncodingChoice {
    Histogram {
        mode: HistogramMode,
        bins: usize,
        dims: Vec<String>,
    },
    FisherVector {
        components: usize,
        /// Number of FV dims kept by the filter, if any.
        kept_dims: Option<usize>,
        liarrank: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SearchConfig {
    Histogram { mode: HistogramMode, bins: usize },
    Fisher,
}

/// A classifier kind with its selected encoding, refitted on the whole
/// training split.
#[derive(Debug, Clone)]
pub struct KindFit {
    pub kind: ClassifierKind,
    pub choice: EncodingChoice,
    /// Mean AUC over the inner validation folds.
    pub inner_auc: f64,
    /// Pooled out-of-fold scores of the training players.
    pub validation: ScoreSet,
    pub encoder: FittedEncoder,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct FamilyFit {
    pub family: String,
    pub chosen: ClassifierKind,
    pub kinds: Vec<KindFit>,
}

impl FamilyFit {
    pub fn kind(&self, kind: ClassifierKind) -> &KindFit {
        self.kinds.iter().find(|k| k.kind == kind).expect("every configured kind is fitted")
    }

    pub fn chosen_fit(&self) -> &KindFit {
        self.kind(self.chosen)
    }
}

/// Everything fitted on one training split.
#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub train_games: Vec<String>,
    pub families: Vec<FamilyFit>,
    pub weights: FusionWeights,
    pub validation_auc: f64,
}

struct Ctx<'a> {
    cohort: &'a Cohort,
    ds: &'a GameDataset,
    cfg: &'a ExperimentConfig,
}

struct Evaluation {
    config: usize,
    subset: Vec<usize>,
    kind: ClassifierKind,
    cv_auc: f64,
    oof: Vec<f64>,
}

fn eval_order(a: &Evaluation, b: &Evaluation) -> std::cmp::Ordering {
    b.cv_auc
        .total_cmp(&a.cv_auc)
        .then(a.subset.len().cmp(&b.subset.len()))
        .then_with(|| a.subset.cmp(&b.subset))
        .then(a.config.cmp(&b.config))
        .then(a.kind.cmp(&b.kind))
}

fn fisher_params(enc: &EncoderConfig) -> FisherParams {
    match enc {
        EncoderConfig::FisherVector {
            components,
            normalize,
            select_dims,
            liarrank,
            liarrank_normalize,
            max_points,
            max_iters,
        } => FisherParams {
            components: *components,
            normalize: *normalize,
            select_dims: *select_dims,
            liarrank: *liarrank,
            liarrank_normalize: *liarrank_normalize,
            max_points: *max_points,
            max_iters: *max_iters,
        },
        EncoderConfig::Histogram { .. } => unreachable!("histogram family has no Fisher params"),
    }
}

impl Ctx<'_> {
    fn search_configs(&self, fam: &FamilyConfig) -> Vec<SearchConfig> {
        match &fam.encoder {
            EncoderConfig::Histogram { modes, bins, .. } => modes
                .iter()
                .flat_map(|&mode| bins.iter().map(move |&bins| SearchConfig::Histogram { mode, bins }))
                .collect(),
            EncoderConfig::FisherVector { .. } => vec![SearchConfig::Fisher],
        }
    }

    /// Fits the encoder of `config` restricted to `subset` of the candidate
    /// dims on the players `train`.
    fn fit_encoder(
        &self,
        fam: &FamilyConfig,
        candidates: &[DimRef],
        config: SearchConfig,
        subset: &[usize],
        train: &[usize],
        seed: u64,
    ) -> Result<FittedEncoder> {
        match (config, &fam.encoder) {
            (SearchConfig::Histogram { mode, bins }, EncoderConfig::Histogram { normalize, .. }) => {
                let dims = subset.iter().map(|&i| candidates[i].clone()).collect();
                FittedEncoder::fit_histogram(self.cohort, train, mode, dims, bins, *normalize)
            }
            (SearchConfig::Fisher, enc) => Ok(FittedEncoder::Fisher(Box::new(FisherEncoder::fit(
                self.cohort,
                train,
                &fam.channels,
                &fisher_params(enc),
                seed,
            )?))),
            _ => unreachable!("search config matches the family encoder"),
        }
    }

    fn choice(&self, fam: &FamilyConfig, candidates: &[DimRef], config: SearchConfig, subset: &[usize]) -> EncodingChoice {
        match config {
            SearchConfig::Histogram { mode, bins } => EncodingChoice::Histogram {
                mode,
                bins,
                dims: subset.iter().map(|&i| candidates[i].to_string()).collect(),
            },
            SearchConfig::Fisher => {
                let p = fisher_params(&fam.encoder);
                EncodingChoice::FisherVector {
                    components: p.components,
                    kept_dims: p.select_dims,
                    liarrank: p.liarrank,
                }
            }
        }
    }

    /// Fits one family on the players `train` (cohort indices) using the
    /// inner folds `inner` (positions into `train`).
    fn fit_family(
        &self,
        fam_index: usize,
        train: &[usize],
        inner: &[(Vec<usize>, Vec<usize>)],
        fold_tag: u64,
    ) -> Result<FamilyFit> {
        let fam = &self.cfg.families[fam_index];
        let candidates = fam.candidate_dims(self.ds)?;
        let configs = self.search_configs(fam);
        let fam_tag = fam_index as u64;
        let seed = self.cfg.seed;
        let labels = self.cohort.labels(train);

        // Per config and inner fold: every training row encoded with an
        // encoder fitted on the inner-train rows, over all candidate dims.
        let all: Vec<usize> = (0..candidates.len().max(1)).collect();
        let jobs: Vec<(usize, usize)> = (0..configs.len())
            .flat_map(|c| (0..inner.len()).map(move |i| (c, i)))
            .collect();
        let encoded = jobs
            .par_iter()
            .map(|&(c, i)| {
                let inner_train: Vec<usize> = inner[i].0.iter().map(|&p| train[p]).collect();
                let enc = self.fit_encoder(
                    fam,
                    &candidates,
                    configs[c],
                    &all,
                    &inner_train,
                    derive_seed(seed, &[TAG_GMM, fold_tag, fam_tag, i as u64]),
                )?;
                if !enc.fitted_on().iter().all(|g| self.cohort.games_of(&inner_train).contains(g)) {
                    return Err(Error::Leakage(format!("family {} fitted outside its inner split", fam.name)));
                }
                enc.encode_rows(self.cohort, train)
            })
            .collect::<Result<Vec<Matrix>>>()?;
        let matrix = |c: usize, i: usize| &encoded[c * inner.len() + i];

        let subsets = match configs[0] {
            SearchConfig::Histogram { .. } => enumerate_subsets(candidates.len()),
            SearchConfig::Fisher => vec![vec![0]],
        };
        let columns = |c: usize, subset: &[usize]| -> Option<Vec<usize>> {
            match configs[c] {
                SearchConfig::Histogram { mode, bins } => {
                    let w = if mode == HistogramMode::Combined { 2 * bins } else { bins };
                    Some(subset.iter().flat_map(|&d| d * w..(d + 1) * w).collect())
                }
                SearchConfig::Fisher => None,
            }
        };

        let items: Vec<(usize, Vec<usize>, ClassifierKind)> = (0..configs.len())
            .flat_map(|c| {
                subsets
                    .iter()
                    .flat_map(move |s| self.cfg.classifier_kinds.iter().map(move |&k| (c, s.clone(), k)))
            })
            .collect();
        let evaluations = items
            .into_par_iter()
            .map(|(c, subset, kind)| {
                let cols = columns(c, &subset);
                let mut oof = vec![0.0; train.len()];
                let mut aucs = Vec::with_capacity(inner.len());
                for (i, (tr, va)) in inner.iter().enumerate() {
                    let m = matrix(c, i);
                    let m = match &cols {
                        Some(cols) => std::borrow::Cow::Owned(m.select_columns(cols)),
                        None => std::borrow::Cow::Borrowed(m),
                    };
                    let ytr: Vec<u8> = tr.iter().map(|&p| labels[p]).collect();
                    let yva: Vec<u8> = va.iter().map(|&p| labels[p]).collect();
                    let model = train_model(
                        kind,
                        &m.select_rows(tr),
                        &ytr,
                        &self.cfg.hyperparams,
                        derive_seed(seed, &[TAG_MODEL, fold_tag, fam_tag, i as u64, kind as u64]),
                    )?;
                    let scores = model.predict(&m.select_rows(va))?;
                    match crate::classifiers::auc(&scores, &yva) {
                        Ok(a) => aucs.push(a),
                        Err(Error::SingleClassEval) => {}
                        Err(e) => return Err(e),
                    }
                    for (&p, s) in va.iter().zip(scores) {
                        oof[p] = s;
                    }
                }
                if aucs.is_empty() {
                    return Err(Error::SingleClassEval);
                }
                let cv_auc = aucs.iter().sum::<f64>() / aucs.len() as f64;
                Ok(Evaluation {
                    config: c,
                    subset,
                    kind,
                    cv_auc,
                    oof,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        // Best (config, subset) per kind, then refit each on all of `train`.
        let best: Vec<&Evaluation> = self
            .cfg
            .classifier_kinds
            .iter()
            .map(|&k| {
                evaluations
                    .iter()
                    .filter(|e| e.kind == k)
                    .min_by(|a, b| eval_order(a, b))
                    .expect("each kind is evaluated")
            })
            .collect();
        let keys: BTreeSet<(usize, Vec<usize>)> = best.iter().map(|e| (e.config, e.subset.clone())).collect();
        let train_games = self.cohort.games_of(train);
        let fitted: BTreeMap<(usize, Vec<usize>), (FittedEncoder, Matrix)> = keys
            .into_par_iter()
            .map(|(c, subset)| {
                let enc = self.fit_encoder(
                    fam,
                    &candidates,
                    configs[c],
                    &subset,
                    train,
                    derive_seed(seed, &[TAG_GMM, fold_tag, fam_tag, u64::MAX]),
                )?;
                if !enc.fitted_on().iter().all(|g| train_games.contains(g)) {
                    return Err(Error::Leakage(format!("family {} fitted outside its training split", fam.name)));
                }
                let x = enc.encode_rows(self.cohort, train)?;
                Ok(((c, subset), (enc, x)))
            })
            .collect::<Result<_>>()?;
        let ids = self.cohort.player_ids(train);
        let kinds = best
            .par_iter()
            .map(|e| {
                let (enc, x) = &fitted[&(e.config, e.subset.clone())];
                let model = train_model(
                    e.kind,
                    x,
                    &labels,
                    &self.cfg.hyperparams,
                    derive_seed(seed, &[TAG_MODEL, fold_tag, fam_tag, u64::MAX, e.kind as u64]),
                )?;
                Ok(KindFit {
                    kind: e.kind,
                    choice: self.choice(fam, &candidates, configs[e.config], &e.subset),
                    inner_auc: e.cv_auc,
                    validation: ScoreSet::new(ids.clone(), e.oof.clone(), labels.clone())?,
                    encoder: enc.clone(),
                    model,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let chosen = best
            .iter()
            .copied()
            .min_by(|a, b| eval_order(a, b))
            .expect("at least one kind")
            .kind;
        Ok(FamilyFit {
            family: fam.name.clone(),
            chosen,
            kinds,
        })
    }

    fn fit_pipeline(&self, train: &[usize], fold_tag: u64) -> Result<PipelineFit> {
        let train_games = self.cohort.games_of(train);
        let plan = make_cv_plan(
            &train_games,
            self.cfg.inner_folds,
            derive_seed(self.cfg.seed, &[TAG_INNER_PLAN, fold_tag]),
        )?;
        let position: BTreeMap<usize, usize> = train.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let inner: Vec<(Vec<usize>, Vec<usize>)> = plan
            .folds()
            .iter()
            .map(|f| {
                let pos = |games: &[String]| -> Vec<usize> {
                    self.cohort.indices_of(games).iter().map(|i| position[i]).collect()
                };
                (pos(&f.train_games), pos(&f.test_games))
            })
            .collect();
        let families = (0..self.cfg.families.len())
            .into_par_iter()
            .map(|j| self.fit_family(j, train, &inner, fold_tag))
            .collect::<Result<Vec<_>>>()?;
        let validation: Vec<&ScoreSet> = families.iter().map(|f| &f.chosen_fit().validation).collect();
        let grid = grid_search_weights(&validation, self.cfg.grid_step, &[])?;
        Ok(PipelineFit {
            train_games,
            families,
            weights: grid.weights,
            validation_auc: grid.auc,
        })
    }
}

/// Scores of the cohort players `idx` under a fitted encoder and model.
pub fn score_players(encoder: &FittedEncoder, model: &TrainedModel, cohort: &Cohort, idx: &[usize]) -> Result<ScoreSet> {
    let x = encoder.encode_rows(cohort, idx)?;
    let scores = model.predict(&x)?;
    ScoreSet::new(cohort.player_ids(idx), scores, cohort.labels(idx))
}

/// Fits every family and the fusion weights on all games of the cohort.
pub fn fit_all(ds: &GameDataset, cohort: &Cohort, cfg: &ExperimentConfig) -> Result<PipelineFit> {
    cfg.validate(ds)?;
    let ctx = Ctx { cohort, ds, cfg };
    let all: Vec<usize> = (0..cohort.players.len()).collect();
    ctx.fit_pipeline(&all, FULL_FIT)
}

/// Result of one outer fold, before aggregation.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: Fold,
    pub fit: PipelineFit,
    /// Test scores per family, one per configured kind (config order).
    pub test_scores: Vec<Vec<(ClassifierKind, ScoreSet)>>,
    pub fused: ScoreSet,
    pub test: MetricReport,
    /// Per family: fusion without it.
    pub ablation: Vec<(FusionWeights, MetricReport)>,
    pub ensemble: Vec<crate::fusion::AssignmentOutcome>,
}

fn run_fold(ctx: &Ctx, fold: &Fold) -> Result<FoldOutcome> {
    let cfg = ctx.cfg;
    let train = ctx.cohort.indices_of(&fold.train_games);
    let test = ctx.cohort.indices_of(&fold.test_games);
    let fit = ctx.fit_pipeline(&train, fold.index as u64)?;
    for f in &fit.families {
        for k in &f.kinds {
            if let Some(g) = k.encoder.fitted_on().iter().find(|g| fold.test_games.contains(g)) {
                return Err(Error::Leakage(format!("fold {}: {} encoder saw test game {g}", fold.index, f.family)));
            }
        }
    }
    let test_scores = fit
        .families
        .par_iter()
        .map(|f| {
            f.kinds
                .iter()
                .map(|k| Ok((k.kind, score_players(&k.encoder, &k.model, ctx.cohort, &test)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let chosen: Vec<&ScoreSet> = fit
        .families
        .iter()
        .zip(&test_scores)
        .map(|(f, t)| &t.iter().find(|(k, _)| *k == f.chosen).expect("chosen kind scored").1)
        .collect();
    let fused = fuse(&chosen, &fit.weights)?;
    let test_metrics = fused.metrics(cfg.threshold)?;

    let n = fit.families.len();
    let ablation = if cfg.ablation && n > 1 {
        let validation: Vec<&ScoreSet> = fit.families.iter().map(|f| &f.chosen_fit().validation).collect();
        (0..n)
            .into_par_iter()
            .map(|drop| {
                let mut excluded = vec![false; n];
                excluded[drop] = true;
                let w = grid_search_weights(&validation, cfg.grid_step, &excluded)?.weights;
                let m = fuse(&chosen, &w)?.metrics(cfg.threshold)?;
                Ok((w, m))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let ensemble = if cfg.ensemble_search.enabled {
        let families: Vec<FamilyScores> = fit
            .families
            .iter()
            .zip(&test_scores)
            .map(|(f, t)| FamilyScores {
                family: f.family.clone(),
                validation: f.kinds.iter().map(|k| (k.kind, k.validation.clone())).collect(),
                test: t.clone(),
            })
            .collect();
        evaluate_assignments(&families, &cfg.classifier_kinds, cfg.ensemble_search.grid_step, cfg.threshold)
    } else {
        Vec::new()
    };

    Ok(FoldOutcome {
        fold: fold.clone(),
        fit,
        test_scores,
        fused,
        test: test_metrics,
        ablation,
        ensemble,
    })
}

/// Channels used by any family, in dataset order.
pub fn used_channels(ds: &GameDataset, cfg: &ExperimentConfig) -> Vec<String> {
    ds.feature_channels
        .iter()
        .filter(|c| cfg.families.iter().any(|f| f.channels.contains(&c.name)))
        .map(|c| c.name.clone())
        .collect()
}

/// Runs the full cross-validated experiment on `cfg.folds` seeded folds.
pub fn run_experiment(ds: &GameDataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(ds)?;
    let ids: Vec<&str> = ds.games.iter().map(|g| g.game_id.as_str()).collect();
    let plan = make_cv_plan(&ids, cfg.folds, cfg.seed)?;
    run_experiment_with_folds(ds, cfg, &plan.folds())
}

/// Runs the experiment on explicit folds. Every fold is checked for
/// train/test disjointness before any fitting starts.
pub fn run_experiment_with_folds(ds: &GameDataset, cfg: &ExperimentConfig, folds: &[Fold]) -> Result<ExperimentReport> {
    cfg.validate(ds)?;
    for f in folds {
        check_disjoint(f, ds)?;
    }
    let cohort = Cohort::load(ds, &used_channels(ds, cfg), &cfg.sampling)?;
    let ctx = Ctx {
        cohort: &cohort,
        ds,
        cfg,
    };
    let results: Vec<Result<FoldOutcome>> = folds.par_iter().map(|f| run_fold(&ctx, f)).collect();
    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut outcomes = Vec::with_capacity(results.len());
    for (f, r) in folds.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                return Err(Error::FoldFailed {
                    fold: f.index,
                    completed,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(report::build_report(ds, cfg, &outcomes))
}
