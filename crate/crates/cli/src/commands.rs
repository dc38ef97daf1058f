//! Subcommand bodies. Each returns a `CliError` that maps onto the exit
//! code: 1 for bad input, 2 for failures while computing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use spyrank::bundle::ModelBundle;
use spyrank::data::{load_manifest, validate_dataset, GameDataset};
use spyrank::evaluation::experiment::used_channels;
use spyrank::evaluation::report::{render_ablation, render_report};
use spyrank::evaluation::{fit_all, generate_synthetic, run_experiment, Cohort, ExperimentConfig, ExperimentReport};
use spyrank::evaluation::{FittedEncoder, SyntheticSpec};
use spyrank::Error;

use crate::{DatasetArgs, EncodeArgs, GlobalOpts, OutArgs, ReportArgs, SynthArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

macro_rules! progress {
    ($g:expr, $($arg:tt)*) => {
        if $g.verbose > 0 {
            eprintln!($($arg)*);
        }
    };
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("manifest.json")
    } else {
        p.to_path_buf()
    }
}

fn load_dataset(g: &GlobalOpts, args: &DatasetArgs) -> CliResult<GameDataset> {
    let path = manifest_path(&args.dataset);
    progress!(g, "loading {}", path.display());
    Ok(load_manifest(&path)?)
}

/// Config file (or defaults) with the command-line overrides applied.
fn experiment_config(g: &GlobalOpts) -> CliResult<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
        cfg.sampling.rng_seed = seed;
    }
    if let Some(k) = g.folds {
        cfg.folds = k;
    }
    if let Some(l) = g.clip_len {
        cfg.sampling.clip_len_s = l;
    }
    if let Some(i) = g.clip_interval {
        cfg.sampling.clip_interval_s = i;
    }
    for (name, count) in &g.frames_per_clip {
        cfg.sampling.frames_per_clip.insert(name.clone(), *count);
    }
    cfg.sampling.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path, outputs: &[&str], force: bool) -> CliResult {
    if !force {
        if let Some(f) = outputs.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(CliError::Usage(format!(
                "{} already exists (use --force to overwrite)",
                f.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn synth(g: &GlobalOpts, a: &SynthArgs) -> CliResult {
    let mut spec = match &a.spec {
        Some(p) => {
            if !p.is_file() {
                return Err(Error::MissingFile(p.clone()).into());
            }
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(n) = a.games {
        spec.n_games = n;
    }
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    if let Some(effect) = a.effect {
        let keys: Vec<&str> = a.effect_on.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
        spec = spec.with_effects(&keys, effect);
    }
    spec.validate()?;
    prepare_out(&a.out, &["manifest.json"], a.force)?;
    progress!(g, "writing {} games to {}", spec.n_games, a.out.display());
    let ds = generate_synthetic(&spec, &a.out)?;
    let players = ds.player_count();
    let spies: usize = ds.players().filter(|(_, p)| p.role.label() == 1).count();
    println!("games {} players {} spies {}", ds.games.len(), players, spies);
    Ok(())
}

pub fn validate(g: &GlobalOpts, a: &DatasetArgs) -> CliResult {
    let ds = load_dataset(g, a)?;
    let report = validate_dataset(&ds);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for e in &report.errors {
        println!("error: {e}");
    }
    println!(
        "{} games, {} players, {} series checked: {} warnings, {} errors",
        ds.games.len(),
        ds.player_count(),
        report.coverage.len() + report.errors.len(),
        report.warnings.len(),
        report.errors.len()
    );
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} series failed validation", report.errors.len())))
    }
}

/// One CSV row per player: ids, label, then the encoded vector.
fn feature_table(encoder: &FittedEncoder, cohort: &Cohort) -> CliResult<String> {
    let idx: Vec<usize> = (0..cohort.players.len()).collect();
    let x = encoder.encode_rows(cohort, &idx)?;
    let mut out = String::from("game_id,player_id,label");
    for j in 0..x.cols() {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (p, row) in cohort.players.iter().zip(x.iter_rows()) {
        let _ = write!(out, "{},{},{}", p.game_id, p.player_id, p.label);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn encode(g: &GlobalOpts, a: &EncodeArgs) -> CliResult {
    let t = &a.target;
    let ds = load_dataset(g, &t.data)?;
    prepare_out(&t.out, &["encoders.json", "features"], t.force)?;
    let (cohort, encoders): (Cohort, Vec<(String, FittedEncoder)>) = match &a.bundle {
        Some(path) => {
            let bundle = ModelBundle::load(path)?;
            let cohort = Cohort::load(&ds, &bundle.channels(), &bundle.sampling)?;
            let enc = bundle
                .families
                .into_iter()
                .map(|f| (f.name, f.encoder))
                .collect();
            (cohort, enc)
        }
        None => {
            let cfg = experiment_config(g)?;
            let cohort = Cohort::load(&ds, &used_channels(&ds, &cfg), &cfg.sampling)?;
            progress!(g, "fitting encoders on {} players", cohort.players.len());
            let fit = fit_all(&ds, &cohort, &cfg)?;
            let enc = fit
                .families
                .iter()
                .map(|f| (f.family.clone(), f.chosen_fit().encoder.clone()))
                .collect();
            (cohort, enc)
        }
    };
    let dir = t.out.join("features");
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    for (name, enc) in &encoders {
        let path = dir.join(format!("{name}.csv"));
        write(&path, &feature_table(enc, &cohort)?)?;
        progress!(g, "wrote {}", path.display());
    }
    let json = serde_json::to_string_pretty(&encoders).map_err(Error::from)?;
    write(&t.out.join("encoders.json"), &(json + "\n"))?;
    println!("encoded {} players for {} families", cohort.players.len(), encoders.len());
    Ok(())
}

pub fn train(g: &GlobalOpts, a: &OutArgs) -> CliResult {
    let ds = load_dataset(g, &a.data)?;
    let cfg = experiment_config(g)?;
    prepare_out(&a.out, &["bundle.json"], a.force)?;
    let cohort = Cohort::load(&ds, &used_channels(&ds, &cfg), &cfg.sampling)?;
    progress!(g, "training on {} players", cohort.players.len());
    let fit = fit_all(&ds, &cohort, &cfg)?;
    let channels: Vec<Vec<String>> = cfg.families.iter().map(|f| f.channels.clone()).collect();
    let bundle = ModelBundle::from_fit(&fit, &channels, &cfg.sampling, cfg.seed);
    bundle.save(&a.out.join("bundle.json"))?;
    for f in &bundle.families {
        println!("{}: {} (inner AUC {:.3})", f.name, f.kind, f.inner_auc);
    }
    let alpha: Vec<String> = bundle.weights.alpha.iter().map(|w| format!("{w:.2}")).collect();
    println!("fusion weights [{}], validation AUC {:.3}", alpha.join(", "), bundle.validation_auc);
    Ok(())
}

fn run_and_write(g: &GlobalOpts, a: &OutArgs, cfg: &ExperimentConfig, stem: &str) -> CliResult<ExperimentReport> {
    let ds = load_dataset(g, &a.data)?;
    let json = format!("{stem}.json");
    prepare_out(&a.out, &[&json], a.force)?;
    progress!(g, "running {}-fold cross-validation on {} games", cfg.folds, ds.games.len());
    let report = run_experiment(&ds, cfg)?;
    write(&a.out.join(json), &(report.to_json()? + "\n"))?;
    Ok(report)
}

pub fn evaluate(g: &GlobalOpts, a: &OutArgs) -> CliResult {
    let cfg = experiment_config(g)?;
    let report = run_and_write(g, a, &cfg, "report")?;
    write(&a.out.join("metrics.tsv"), &report.metrics_table())?;
    write(&a.out.join("report.txt"), &render_report(&report, cfg.ensemble_search.top_n))?;
    println!("{}", report.summary_line());
    Ok(())
}

pub fn ablate(g: &GlobalOpts, a: &OutArgs) -> CliResult {
    let mut cfg = experiment_config(g)?;
    cfg.ablation = true;
    cfg.ensemble_search.enabled = false;
    let report = run_and_write(g, a, &cfg, "ablation")?;
    let table = render_ablation(&report);
    write(&a.out.join("ablation.txt"), &table)?;
    println!("{}", report.summary_line());
    print!("{table}");
    Ok(())
}

pub fn report(a: &ReportArgs) -> CliResult {
    if !a.file.is_file() {
        return Err(Error::MissingFile(a.file.clone()).into());
    }
    let text = fs::read_to_string(&a.file).map_err(|e| io_error(&a.file, e))?;
    let report = ExperimentReport::from_json(&text).map_err(|e| match e {
        Error::Serde(s) => Error::SchemaViolation {
            entity: a.file.display().to_string(),
            message: s.to_string(),
        },
        other => other,
    })?;
    print!("{}", render_report(&report, a.top));
    Ok(())
}
