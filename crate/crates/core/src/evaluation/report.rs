//! Experiment report: per-fold choices, aggregate metrics, ensemble and
//! ablation tables, and their text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, MetricReport};
use crate::data::{GameDataset, Role};
use crate::error::{Error, Result};
use crate::evaluation::config::ExperimentConfig;
use crate::evaluation::experiment::{EncodingChoice, FoldOutcome};
use crate::fusion::FusionWeights;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub games: usize,
    pub players: usize,
    pub spies: usize,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindFoldReport {
    pub kind: ClassifierKind,
    pub choice: EncodingChoice,
    pub inner_auc: f64,
    pub test_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFoldReport {
    pub family: String,
    pub chosen_kind: ClassifierKind,
    pub kinds: Vec<KindFoldReport>,
    /// Game ids every encoder of this family was fitted on.
    pub fitted_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationFold {
    pub removed: String,
    pub weights: FusionWeights,
    pub test: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub index: usize,
    pub train_games: Vec<String>,
    pub test_games: Vec<String>,
    pub families: Vec<FamilyFoldReport>,
    pub weights: FusionWeights,
    /// AUC of the fused out-of-fold training scores at the chosen weights.
    pub validation_auc: f64,
    pub test: MetricReport,
    pub ablation: Vec<AblationFold>,
}

/// Mean test AUC of one (family, kind) pair across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: String,
    pub kind: ClassifierKind,
    pub mean_test_auc: f64,
    pub mean_inner_auc: f64,
    pub times_chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub kinds: Vec<ClassifierKind>,
    pub mean: MetricReport,
    pub fold_auc: Vec<f64>,
}

impl EnsembleRow {
    pub fn label(&self) -> String {
        self.kinds.iter().map(|k| k.short_name()).collect::<Vec<_>>().join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub removed: String,
    pub mean: MetricReport,
    /// Mean AUC without the family minus the full mean AUC.
    pub delta_auc: f64,
    /// Per-fold paired AUC differences, same sign convention.
    pub fold_deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub seed: u64,
    pub dataset: DatasetSummary,
    pub folds: Vec<FoldReport>,
    /// Arithmetic mean of the fold test AUCs.
    pub mean_auc: f64,
    pub mean_metrics: MetricReport,
    pub family_table: Vec<FamilyRow>,
    /// Best classifier assignments by mean test AUC, at most `top_n` rows.
    pub ensemble: Vec<EnsembleRow>,
    pub ensemble_evaluated: usize,
    pub ensemble_failed: usize,
    pub ablation: Vec<AblationRow>,
    pub config: ExperimentConfig,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub(crate) fn build_report(ds: &GameDataset, cfg: &ExperimentConfig, outcomes: &[FoldOutcome]) -> ExperimentReport {
    let names: Vec<String> = cfg.families.iter().map(|f| f.name.clone()).collect();
    let folds: Vec<FoldReport> = outcomes
        .iter()
        .map(|o| FoldReport {
            index: o.fold.index,
            train_games: o.fold.train_games.clone(),
            test_games: o.fold.test_games.clone(),
            families: o
                .fit
                .families
                .iter()
                .zip(&o.test_scores)
                .map(|(f, t)| {
                    let mut fitted: Vec<String> =
                        f.kinds.iter().flat_map(|k| k.encoder.fitted_on().iter().cloned()).collect();
                    fitted.sort();
                    fitted.dedup();
                    FamilyFoldReport {
                        family: f.family.clone(),
                        chosen_kind: f.chosen,
                        kinds: f
                            .kinds
                            .iter()
                            .zip(t)
                            .map(|(k, (_, s))| KindFoldReport {
                                kind: k.kind,
                                choice: k.choice.clone(),
                                inner_auc: k.inner_auc,
                                test_auc: s.auc().unwrap_or(f64::NAN),
                            })
                            .collect(),
                        fitted_on: fitted,
                    }
                })
                .collect(),
            weights: o.fit.weights.clone(),
            validation_auc: o.fit.validation_auc,
            test: o.test,
            ablation: o
                .ablation
                .iter()
                .zip(&names)
                .map(|((w, m), n)| AblationFold {
                    removed: n.clone(),
                    weights: w.clone(),
                    test: *m,
                })
                .collect(),
        })
        .collect();

    let fold_metrics: Vec<MetricReport> = folds.iter().map(|f| f.test).collect();
    let mean_metrics = MetricReport::mean(&fold_metrics);
    let mean_auc = mean(fold_metrics.iter().map(|m| m.auc));

    let mut family_table = Vec::new();
    for (j, name) in names.iter().enumerate() {
        for (ki, &kind) in cfg.classifier_kinds.iter().enumerate() {
            let per_fold = || folds.iter().map(move |f| &f.families[j].kinds[ki]);
            family_table.push(FamilyRow {
                family: name.clone(),
                kind,
                mean_test_auc: mean(per_fold().map(|k| k.test_auc)),
                mean_inner_auc: mean(per_fold().map(|k| k.inner_auc)),
                times_chosen: folds.iter().filter(|f| f.families[j].chosen_kind == kind).count(),
            });
        }
    }

    let n_assign = outcomes.first().map_or(0, |o| o.ensemble.len());
    let mut rows = Vec::new();
    let mut failed = 0;
    for a in 0..n_assign {
        let per: Option<Vec<MetricReport>> = outcomes.iter().map(|o| o.ensemble[a].test).collect();
        match per {
            Some(ms) => rows.push(EnsembleRow {
                kinds: outcomes[0].ensemble[a].kinds.clone(),
                mean: MetricReport::mean(&ms),
                fold_auc: ms.iter().map(|m| m.auc).collect(),
            }),
            None => failed += 1,
        }
    }
    // stable sort keeps enumeration order among equal AUCs
    rows.sort_by(|a, b| b.mean.auc.total_cmp(&a.mean.auc));
    rows.truncate(cfg.ensemble_search.top_n);

    let ablation = if folds.iter().all(|f| f.ablation.len() == names.len()) && !folds.is_empty() {
        names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let ms: Vec<MetricReport> = folds.iter().map(|f| f.ablation[j].test).collect();
                let fold_deltas: Vec<f64> = folds.iter().map(|f| f.ablation[j].test.auc - f.test.auc).collect();
                let m = MetricReport::mean(&ms);
                AblationRow {
                    removed: name.clone(),
                    mean: m,
                    delta_auc: m.auc - mean_auc,
                    fold_deltas,
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    ExperimentReport {
        format_version: REPORT_VERSION,
        seed: cfg.seed,
        dataset: DatasetSummary {
            games: ds.games.len(),
            players: ds.player_count(),
            spies: ds.players().filter(|(_, p)| p.role == Role::Spy).count(),
            channels: ds.feature_channels.iter().map(|c| c.name.clone()).collect(),
        },
        folds,
        mean_auc,
        mean_metrics,
        family_table,
        ensemble: rows,
        ensemble_evaluated: n_assign,
        ensemble_failed: failed,
        ablation,
        config: cfg.clone(),
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(text)?;
        if r.format_version != REPORT_VERSION {
            return Err(Error::schema(
                "report",
                format!("unsupported format_version {}", r.format_version),
            ));
        }
        Ok(r)
    }

    /// One-line summary of the mean test AUC.
    pub fn summary_line(&self) -> String {
        format!(
            "mean AUC {:.3} over {} folds ({} games, {} players)",
            self.mean_auc,
            self.folds.len(),
            self.dataset.games,
            self.dataset.players
        )
    }

    /// Tab-separated flat metrics, one row per fold plus the mean.
    pub fn metrics_table(&self) -> String {
        let mut out = String::from("fold\tauc\tf1\tfnr\tfpr\tprecision\trecall\n");
        let mut row = |name: &str, m: &MetricReport| {
            let _ = writeln!(
                out,
                "{name}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                m.auc, m.f1, m.fnr, m.fpr, m.precision, m.recall
            );
        };
        for f in &self.folds {
            row(&f.index.to_string(), &f.test);
        }
        row("mean", &self.mean_metrics);
        out
    }
}

pub const METRIC_COLUMNS: [&str; 6] = ["AUC", "F1", "FNR", "FPR", "Precision", "Recall"];

/// Aligned text table with `|` separators and a rule under the header.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let mut out = line(header.to_vec()) + "\n";
    out += &widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-|-");
    out += "\n";
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
        out += "\n";
    }
    out
}

fn metric_cells(m: &MetricReport) -> Vec<String> {
    [m.auc, m.f1, m.fnr, m.fpr, m.precision, m.recall]
        .iter()
        .map(|v| format!("{v:.3}"))
        .collect()
}

/// Top ensemble assignments, columns `Classifiers | AUC | F1 | FNR | FPR |
/// Precision | Recall`.
pub fn render_ensemble(report: &ExperimentReport, top: usize) -> String {
    let rows: Vec<Vec<String>> = report
        .ensemble
        .iter()
        .take(top)
        .map(|r| {
            let mut cells = vec![r.label()];
            cells.extend(metric_cells(&r.mean));
            cells
        })
        .collect();
    let mut header = vec!["Classifiers"];
    header.extend(METRIC_COLUMNS);
    render_table(&header, &rows)
}

/// Leave-one-family-out table, columns `Removed feature | AUC | F1 | FNR |
/// FPR | Precision | Recall`, by descending AUC.
pub fn render_ablation(report: &ExperimentReport) -> String {
    let mut rows: Vec<&AblationRow> = report.ablation.iter().collect();
    rows.sort_by(|a, b| b.mean.auc.total_cmp(&a.mean.auc));
    let rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|r| {
            let mut cells = vec![r.removed.clone()];
            cells.extend(metric_cells(&r.mean));
            cells
        })
        .collect();
    let mut header = vec!["Removed feature"];
    header.extend(METRIC_COLUMNS);
    render_table(&header, &rows)
}

/// Mean test AUC per family (rows) and classifier kind (columns).
pub fn render_families(report: &ExperimentReport) -> String {
    let kinds = &report.config.classifier_kinds;
    let mut header = vec!["Feature"];
    header.extend(kinds.iter().map(|k| k.short_name()));
    header.push("Chosen");
    let rows: Vec<Vec<String>> = report
        .config
        .families
        .iter()
        .map(|f| {
            let mut cells = vec![f.name.clone()];
            let mut chosen: Vec<(usize, ClassifierKind)> = Vec::new();
            for &k in kinds {
                let row = report.family_table.iter().find(|r| r.family == f.name && r.kind == k);
                cells.push(row.map_or("-".into(), |r| format!("{:.3}", r.mean_test_auc)));
                if let Some(r) = row.filter(|r| r.times_chosen > 0) {
                    chosen.push((r.times_chosen, k));
                }
            }
            chosen.sort_by_key(|c| std::cmp::Reverse(c.0));
            cells.push(
                chosen
                    .iter()
                    .map(|(n, k)| format!("{}x{n}", k.short_name()))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            cells
        })
        .collect();
    render_table(&header, &rows)
}

/// Every table of the report as one text document.
pub fn render_report(report: &ExperimentReport, top: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", report.summary_line());
    let m = &report.mean_metrics;
    let _ = writeln!(
        out,
        "main ensemble: AUC {:.3}  F1 {:.3}  FNR {:.3}  FPR {:.3}  Precision {:.3}  Recall {:.3}\n",
        m.auc, m.f1, m.fnr, m.fpr, m.precision, m.recall
    );
    out += "Per-family mean test AUC\n";
    out += &render_families(report);
    if !report.ensemble.is_empty() {
        let _ = writeln!(
            out,
            "\nTop {} ensembles ({} assignments evaluated, {} failed)",
            top.min(report.ensemble.len()),
            report.ensemble_evaluated,
            report.ensemble_failed
        );
        out += &render_ensemble(report, top);
    }
    if !report.ablation.is_empty() {
        out += "\nLeave-one-family-out\n";
        out += &render_ablation(report);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = render_table(&["A", "Num"], &[vec!["long name".into(), "1.000".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "A         |   Num");
        assert_eq!(lines[1], "----------|------");
        assert_eq!(lines[2], "long name | 1.000");
    }
}
