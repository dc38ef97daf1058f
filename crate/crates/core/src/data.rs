//! Dataset schema: games, players, role labels and per-channel feature files.
//!
//! A dataset is described by a JSON manifest. Every (player, channel) pair
//! points at a comma-delimited text file whose first column is a timestamp
//! in seconds and whose remaining `dim` columns are feature values. Paths in
//! the manifest are relative to the directory containing it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Expected number of players in one game.
pub const PLAYERS_PER_GAME: (usize, usize) = (5, 8);
/// Expected number of spies in one game.
pub const SPIES_PER_GAME: (usize, usize) = (2, 3);
/// Relative gap between declared duration and observed series end that
/// triggers a warning.
pub const DURATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Spy,
    Resistance,
}

impl Role {
    /// Binary label, 1 = spy.
    pub fn label(self) -> u8 {
        match self {
            Role::Spy => 1,
            Role::Resistance => 0,
        }
    }
}

/// Temporal resolution of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum SampleRate {
    Frame { fps: f64 },
    SubSecond { hop_s: f64 },
}

impl SampleRate {
    /// Seconds between consecutive samples.
    pub fn period_s(&self) -> f64 {
        match *self {
            SampleRate::Frame { fps } => 1.0 / fps,
            SampleRate::SubSecond { hop_s } => hop_s,
        }
    }

    pub fn is_frame(&self) -> bool {
        matches!(self, SampleRate::Frame { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub dim: usize,
    #[serde(flatten)]
    pub rate: SampleRate,
}

impl ChannelSpec {
    pub fn frame(name: &str, dim: usize, fps: f64) -> Self {
        ChannelSpec {
            name: name.to_string(),
            dim,
            rate: SampleRate::Frame { fps },
        }
    }

    pub fn sub_second(name: &str, dim: usize, hop_s: f64) -> Self {
        ChannelSpec {
            name: name.to_string(),
            dim,
            rate: SampleRate::SubSecond { hop_s },
        }
    }

    fn check(&self) -> Result<()> {
        let entity = format!("channel {}", self.name);
        if self.name.is_empty() {
            return Err(Error::schema("channel", "empty channel name"));
        }
        if self.dim == 0 {
            return Err(Error::schema(entity, "dim must be >= 1"));
        }
        let rate = match self.rate {
            SampleRate::Frame { fps } => fps,
            SampleRate::SubSecond { hop_s } => hop_s,
        };
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::schema(entity, "fps / hop_s must be > 0"));
        }
        Ok(())
    }
}

/// One scalar feature: dimension `index` of channel `channel`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DimRef {
    pub channel: String,
    pub index: usize,
}

impl DimRef {
    pub fn new(channel: &str, index: usize) -> Self {
        DimRef {
            channel: channel.to_string(),
            index,
        }
    }

    /// Parses `name[index]`.
    pub fn parse(s: &str) -> Option<Self> {
        let (name, rest) = s.split_once('[')?;
        let index = rest.strip_suffix(']')?.parse().ok()?;
        if name.is_empty() {
            return None;
        }
        Some(DimRef::new(name, index))
    }
}

impl fmt::Display for DimRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.channel, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub player_id: String,
    pub role: Role,
    /// Channel name to file path, relative to the dataset directory.
    #[serde(rename = "files")]
    pub channel_files: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub game_id: String,
    pub duration_s: f64,
    pub players: Vec<PlayerRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameDataset {
    pub games: Vec<Game>,
    pub feature_channels: Vec<ChannelSpec>,
    pub source_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    format_version: u32,
    channels: Vec<ChannelSpec>,
    games: Vec<Game>,
}

impl GameDataset {
    pub fn channel(&self, name: &str) -> Option<&ChannelSpec> {
        self.feature_channels.iter().find(|c| c.name == name)
    }

    pub fn players(&self) -> impl Iterator<Item = (&Game, &PlayerRecord)> {
        self.games
            .iter()
            .flat_map(|g| g.players.iter().map(move |p| (g, p)))
    }

    pub fn player_count(&self) -> usize {
        self.games.iter().map(|g| g.players.len()).sum()
    }

    pub fn game(&self, game_id: &str) -> Option<&Game> {
        self.games.iter().find(|g| g.game_id == game_id)
    }

    pub fn file_path(&self, player: &PlayerRecord, channel: &str) -> Result<PathBuf> {
        player
            .channel_files
            .get(channel)
            .map(|rel| self.source_dir.join(rel))
            .ok_or_else(|| {
                Error::schema(
                    format!("player {}", player.player_id),
                    format!("no file for channel {channel}"),
                )
            })
    }

    pub fn read_series(&self, player: &PlayerRecord, channel: &ChannelSpec) -> Result<FrameFeatureSeries> {
        let path = self.file_path(player, &channel.name)?;
        read_series(&path, &player.player_id, channel)
    }

    /// Checks every structural invariant and that referenced files exist.
    pub fn check(&self) -> Result<()> {
        let mut channel_names = BTreeSet::new();
        for c in &self.feature_channels {
            c.check()?;
            if !channel_names.insert(c.name.as_str()) {
                return Err(Error::schema(format!("channel {}", c.name), "declared twice"));
            }
        }
        let mut game_ids = BTreeSet::new();
        let mut player_ids = BTreeSet::new();
        for game in &self.games {
            let entity = format!("game {}", game.game_id);
            if !game_ids.insert(game.game_id.as_str()) {
                return Err(Error::schema(entity, "duplicate game id"));
            }
            if !(game.duration_s.is_finite() && game.duration_s > 0.0) {
                return Err(Error::schema(entity, "duration_s must be > 0"));
            }
            if game.players.is_empty() {
                return Err(Error::schema(entity, "game has no players"));
            }
            for p in &game.players {
                if !player_ids.insert(p.player_id.as_str()) {
                    return Err(Error::DuplicatePlayerId(p.player_id.clone()));
                }
                for name in &channel_names {
                    if !p.channel_files.contains_key(*name) {
                        return Err(Error::schema(
                            format!("player {}", p.player_id),
                            format!("no file for channel {name}"),
                        ));
                    }
                }
                for (name, rel) in &p.channel_files {
                    if !channel_names.contains(name.as_str()) {
                        return Err(Error::schema(
                            format!("player {}", p.player_id),
                            format!("file for undeclared channel {name}"),
                        ));
                    }
                    if !self.source_dir.join(rel).is_file() {
                        return Err(Error::MissingFile(rel.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Loads and checks a manifest. Feature files are checked for existence
/// only; they are parsed on demand by [`GameDataset::read_series`].
pub fn load_manifest(path: &Path) -> Result<GameDataset> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ManifestDoc = serde_json::from_str(&text)
        .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
    if doc.format_version != MANIFEST_VERSION {
        return Err(Error::schema(
            path.display().to_string(),
            format!("unsupported format_version {}", doc.format_version),
        ));
    }
    let source_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let ds = GameDataset {
        games: doc.games,
        feature_channels: doc.channels,
        source_dir,
    };
    ds.check()?;
    Ok(ds)
}

pub fn write_manifest(ds: &GameDataset, path: &Path) -> Result<()> {
    let doc = ManifestDoc {
        format_version: MANIFEST_VERSION,
        channels: ds.feature_channels.clone(),
        games: ds.games.clone(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Time-indexed frame-level values of one channel for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSeries {
    pub player_id: String,
    pub channel: ChannelSpec,
    pub timestamps_s: Vec<f64>,
    /// Row-major, `timestamps_s.len() * channel.dim` values.
    pub values: Vec<f64>,
    /// Rows dropped at load time because they held a non-finite value.
    pub dropped_rows: usize,
}

impl FrameFeatureSeries {
    pub fn new(player_id: &str, channel: ChannelSpec, timestamps_s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let entity = format!("series {}/{}", player_id, channel.name);
        if values.len() != timestamps_s.len() * channel.dim {
            return Err(Error::schema(entity, "row count does not match timestamp count"));
        }
        if timestamps_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::schema(entity, "timestamps not strictly increasing"));
        }
        if timestamps_s.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::schema(entity, "non-finite value"));
        }
        Ok(FrameFeatureSeries {
            player_id: player_id.to_string(),
            channel,
            timestamps_s,
            values,
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_s.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.channel.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.channel.dim;
        &self.values[i * d..(i + 1) * d]
    }

    /// Index range of rows with `start_s <= t < end_s`.
    pub fn window_range(&self, start_s: f64, end_s: f64) -> std::ops::Range<usize> {
        let lo = self.timestamps_s.partition_point(|&t| t < start_s);
        let hi = self.timestamps_s.partition_point(|&t| t < end_s);
        lo..hi.max(lo)
    }

    /// Time covered by the series, measured from t = 0: last timestamp plus
    /// one sample period.
    pub fn span_end_s(&self) -> f64 {
        self.timestamps_s
            .last()
            .map(|t| t + self.channel.rate.period_s())
            .unwrap_or(0.0)
    }
}

/// Parses one feature file. Rows holding a non-finite value are dropped and
/// counted in `dropped_rows`.
pub fn read_series(path: &Path, player_id: &str, channel: &ChannelSpec) -> Result<FrameFeatureSeries> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let reader = BufReader::new(file);
    let dim = channel.dim;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0usize;
    let mut last_t = f64::NEG_INFINITY;
    let mut row = vec![0.0f64; dim];
    let parse_err = |line: usize, message: String| Error::ParseError {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let t_str = fields.next().unwrap_or("");
        let t: f64 = t_str
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad timestamp {t_str:?}")))?;
        let mut n = 0;
        for field in fields {
            if n == dim {
                return Err(parse_err(lineno, format!("expected {} columns, found more", dim + 1)));
            }
            row[n] = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value {field:?}")))?;
            n += 1;
        }
        if n != dim {
            return Err(parse_err(lineno, format!("expected {} columns, found {}", dim + 1, n + 1)));
        }
        if t.is_finite() {
            if t <= last_t {
                return Err(parse_err(lineno, format!("timestamp {t} not after {last_t}")));
            }
            last_t = t;
        }
        if !t.is_finite() || row.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        timestamps.push(t);
        values.extend_from_slice(&row);
    }
    if timestamps.is_empty() {
        return Err(Error::EmptySeries(format!("{}/{}", player_id, channel.name)));
    }
    Ok(FrameFeatureSeries {
        player_id: player_id.to_string(),
        channel: channel.clone(),
        timestamps_s: timestamps,
        values,
        dropped_rows: dropped,
    })
}

pub fn write_series(path: &Path, series: &FrameFeatureSeries) -> Result<()> {
    write_rows(path, &series.timestamps_s, &series.values, series.dim(), None)
}

/// Writes rows as `t,v1,...,vd`. With `decimals` set, values are rounded to
/// that many places; otherwise the shortest exact representation is used.
pub(crate) fn write_rows(path: &Path, timestamps: &[f64], values: &[f64], dim: usize, decimals: Option<usize>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (i, t) in timestamps.iter().enumerate() {
        match decimals {
            Some(_) => write!(w, "{t:.3}").map_err(io)?,
            None => write!(w, "{t}").map_err(io)?,
        }
        for v in &values[i * dim..(i + 1) * dim] {
            if !v.is_finite() {
                write!(w, ",NaN").map_err(io)?;
                continue;
            }
            match decimals {
                Some(p) => write!(w, ",{v:.p$}").map_err(io)?,
                None => write!(w, ",{v}").map_err(io)?,
            }
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoverage {
    pub game_id: String,
    pub player_id: String,
    pub channel: String,
    pub rows: usize,
    pub dropped_rows: usize,
    pub last_timestamp_s: f64,
    /// Covered time over declared game duration.
    pub coverage: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub coverage: Vec<ChannelCoverage>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty() && self.errors.is_empty()
    }
}

/// Reads every series and reports coverage, duration mismatches and
/// role-count anomalies. Unreadable series are reported as errors.
pub fn validate_dataset(ds: &GameDataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    for game in &ds.games {
        let n = game.players.len();
        if n < PLAYERS_PER_GAME.0 || n > PLAYERS_PER_GAME.1 {
            report.warnings.push(format!(
                "game {}: player count {} out of range {}-{}",
                game.game_id, n, PLAYERS_PER_GAME.0, PLAYERS_PER_GAME.1
            ));
        }
        let spies = game.players.iter().filter(|p| p.role == Role::Spy).count();
        if spies < SPIES_PER_GAME.0 || spies > SPIES_PER_GAME.1 {
            report.warnings.push(format!(
                "game {}: spy count out of range ({} spies, expected {}-{})",
                game.game_id, spies, SPIES_PER_GAME.0, SPIES_PER_GAME.1
            ));
        }
    }

    let jobs: Vec<(&Game, &PlayerRecord, &ChannelSpec)> = ds
        .players()
        .flat_map(|(g, p)| ds.feature_channels.iter().map(move |c| (g, p, c)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(g, p, c)| (*g, *p, *c, ds.read_series(p, c)))
        .collect();
    for (game, player, channel, res) in results {
        match res {
            Ok(series) => {
                let last = *series.timestamps_s.last().expect("non-empty series");
                let covered = series.span_end_s();
                let cov = ChannelCoverage {
                    game_id: game.game_id.clone(),
                    player_id: player.player_id.clone(),
                    channel: channel.name.clone(),
                    rows: series.len(),
                    dropped_rows: series.dropped_rows,
                    last_timestamp_s: last,
                    coverage: covered / game.duration_s,
                };
                let gap = (game.duration_s - covered).abs() / game.duration_s;
                if gap > DURATION_TOLERANCE {
                    report.warnings.push(format!(
                        "player {} channel {}: duration mismatch, series covers {:.1}s of {:.1}s",
                        player.player_id, channel.name, covered, game.duration_s
                    ));
                }
                report.coverage.push(cov);
            }
            Err(e) => report.errors.push(format!(
                "player {} channel {}: {}",
                player.player_id, channel.name, e
            )),
        }
    }
    report
}
