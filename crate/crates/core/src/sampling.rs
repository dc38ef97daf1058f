//! Clip scheduling, frame sampling within clips and frame-to-clip average
//! pooling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ChannelSpec, FrameFeatureSeries, GameDataset, PlayerRecord, SampleRate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPolicy {
    pub clip_len_s: f64,
    pub clip_interval_s: f64,
    /// Per-channel frame caps for frame-level channels.
    pub frames_per_clip: BTreeMap<String, usize>,
    /// Cap for frame-level channels not listed in `frames_per_clip`.
    pub default_frames_per_clip: usize,
    pub rng_seed: u64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            clip_len_s: 10.0,
            clip_interval_s: 30.0,
            frames_per_clip: BTreeMap::from([("eye_head".to_string(), 300)]),
            default_frames_per_clip: 20,
            rng_seed: 0,
        }
    }
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_len_s.is_finite() && self.clip_len_s > 0.0) {
            return Err(Error::InvalidPolicy("clip_len_s must be > 0".into()));
        }
        if !(self.clip_interval_s.is_finite() && self.clip_interval_s >= self.clip_len_s) {
            return Err(Error::InvalidPolicy("clip_interval_s must be >= clip_len_s".into()));
        }
        if self.default_frames_per_clip == 0 || self.frames_per_clip.values().any(|&m| m == 0) {
            return Err(Error::InvalidPolicy("frames per clip must be >= 1".into()));
        }
        Ok(())
    }

    /// Frame cap for a channel; `None` means every sample in the window
    /// (sub-second channels).
    pub fn frames_for(&self, channel: &ChannelSpec) -> Option<usize> {
        match channel.rate {
            SampleRate::SubSecond { .. } => None,
            SampleRate::Frame { .. } => Some(
                self.frames_per_clip
                    .get(&channel.name)
                    .copied()
                    .unwrap_or(self.default_frames_per_clip),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipWindow {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSchedule {
    pub player_id: String,
    pub windows: Vec<ClipWindow>,
}

/// Windows at starts 0, I, 2I, ... while start + L <= duration.
pub fn schedule_clips(duration_s: f64, policy: &SamplingPolicy) -> Result<ClipSchedule> {
    let len = policy.clip_len_s;
    if !(duration_s >= len) {
        return Err(Error::VideoTooShort {
            duration_s,
            clip_len_s: len,
        });
    }
    let count = ((duration_s - len) / policy.clip_interval_s + 1e-9).floor() as usize + 1;
    let windows = (0..count)
        .map(|i| {
            let start_s = i as f64 * policy.clip_interval_s;
            ClipWindow {
                start_s,
                end_s: start_s + len,
            }
        })
        .collect();
    Ok(ClipSchedule {
        player_id: String::new(),
        windows,
    })
}

/// Row indices of the frames sampled from `window` (half-open). With more
/// than `count` frames available, picks `count` at uniform stride including
/// the first and last; otherwise takes them all. `None` takes all.
pub fn sample_frames(series: &FrameFeatureSeries, window: ClipWindow, count: Option<usize>) -> Result<Vec<usize>> {
    let range = series.window_range(window.start_s, window.end_s);
    if range.is_empty() {
        return Err(Error::EmptyWindow {
            start_s: window.start_s,
            end_s: window.end_s,
        });
    }
    Ok(stride_indices(range.len(), count)
        .into_iter()
        .map(|i| range.start + i)
        .collect())
}

pub(crate) fn stride_indices(available: usize, count: Option<usize>) -> Vec<usize> {
    match count {
        Some(m) if m < available => {
            if m == 1 {
                return vec![(available - 1) / 2];
            }
            let span = (available - 1) as f64;
            (0..m)
                .map(|i| (i as f64 * span / (m - 1) as f64).round() as usize)
                .collect()
        }
        _ => (0..available).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFeature {
    pub clip_index: usize,
    pub channel: String,
    pub vector: Vec<f64>,
    pub frames_used: usize,
}

/// Per-dimension arithmetic mean of the frame rows.
pub fn pool_clip(frames: &[&[f64]]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or(Error::EmptyWindow {
        start_s: f64::NAN,
        end_s: f64::NAN,
    })?;
    let mut acc = vec![0.0; first.len()];
    for row in frames {
        if row.len() != acc.len() {
            return Err(Error::DimMismatch {
                expected: acc.len(),
                actual: row.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(row.iter()) {
            *a += v;
        }
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Clips of one channel plus the raw sampled frames they were pooled from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelClips {
    pub channel: ChannelSpec,
    pub clips: Vec<ClipFeature>,
    /// Sampled frame rows of all kept clips, row-major.
    pub frames: Vec<f64>,
}

impl ChannelClips {
    pub fn frame_count(&self) -> usize {
        self.frames.len() / self.channel.dim
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let d = self.channel.dim;
        &self.frames[i * d..(i + 1) * d]
    }

    /// Values of dimension `dim` across sampled frames.
    pub fn frame_values(&self, dim: usize) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().skip(dim).step_by(self.channel.dim).copied()
    }

    /// Values of dimension `dim` across clips.
    pub fn clip_values(&self, dim: usize) -> impl Iterator<Item = f64> + '_ {
        self.clips.iter().map(move |c| c.vector[dim])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerClips {
    pub schedule: ClipSchedule,
    pub channels: BTreeMap<String, ChannelClips>,
}

impl PlayerClips {
    pub fn clip_count(&self) -> usize {
        self.channels.values().next().map_or(0, |c| c.clips.len())
    }
}

/// Samples and pools every channel on one shared schedule derived from the
/// shortest channel. A window without frames in some channel is dropped
/// from all channels so clip indices stay aligned.
pub fn clips_from_series(player_id: &str, series: &[FrameFeatureSeries], policy: &SamplingPolicy) -> Result<PlayerClips> {
    policy.validate()?;
    let span = series
        .iter()
        .map(FrameFeatureSeries::span_end_s)
        .fold(f64::INFINITY, f64::min);
    if series.is_empty() {
        return Err(Error::NoValidClips(player_id.to_string()));
    }
    let mut schedule = schedule_clips(span, policy)?;
    schedule.player_id = player_id.to_string();

    let kept: Vec<(usize, ClipWindow)> = schedule
        .windows
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, w)| series.iter().all(|s| !s.window_range(w.start_s, w.end_s).is_empty()))
        .collect();
    if kept.is_empty() {
        return Err(Error::NoValidClips(player_id.to_string()));
    }

    let mut channels = BTreeMap::new();
    for s in series {
        let count = policy.frames_for(&s.channel);
        let mut clips = Vec::with_capacity(kept.len());
        let mut frames = Vec::new();
        for &(clip_index, window) in &kept {
            let idx = sample_frames(s, window, count)?;
            let rows: Vec<&[f64]> = idx.iter().map(|&i| s.row(i)).collect();
            for r in &rows {
                frames.extend_from_slice(r);
            }
            clips.push(ClipFeature {
                clip_index,
                channel: s.channel.name.clone(),
                vector: pool_clip(&rows)?,
                frames_used: rows.len(),
            });
        }
        channels.insert(
            s.channel.name.clone(),
            ChannelClips {
                channel: s.channel.clone(),
                clips,
                frames,
            },
        );
    }
    Ok(PlayerClips { schedule, channels })
}

/// Loads the player's series for `channels` and builds aligned clips.
pub fn clips_for_player(
    ds: &GameDataset,
    player: &PlayerRecord,
    channels: &[ChannelSpec],
    policy: &SamplingPolicy,
) -> Result<PlayerClips> {
    let series = channels
        .iter()
        .map(|c| ds.read_series(player, c))
        .collect::<Result<Vec<_>>>()?;
    clips_from_series(&player.player_id, &series, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(channel: ChannelSpec, times: Vec<f64>) -> FrameFeatureSeries {
        let d = channel.dim;
        let values = times
            .iter()
            .flat_map(|t| (0..d).map(move |j| t + j as f64))
            .collect();
        FrameFeatureSeries::new("p", channel, times, values).unwrap()
    }

    #[test]
    fn schedule_thirty_minutes() {
        let s = schedule_clips(1800.0, &SamplingPolicy::default()).unwrap();
        assert_eq!(s.windows.len(), 60);
        assert_eq!(s.windows[0], ClipWindow { start_s: 0.0, end_s: 10.0 });
        assert_eq!(s.windows[59], ClipWindow { start_s: 1770.0, end_s: 1780.0 });
    }

    #[test]
    fn schedule_boundaries() {
        let p = SamplingPolicy::default();
        assert_eq!(schedule_clips(10.0, &p).unwrap().windows.len(), 1);
        assert!(matches!(schedule_clips(9.0, &p), Err(Error::VideoTooShort { .. })));
    }

    #[test]
    fn stride_sampling() {
        let ch = ChannelSpec::frame("fau", 1, 30.0);
        let times: Vec<f64> = (0..300).map(|i| i as f64 / 30.0).collect();
        let s = series(ch, times);
        let w = ClipWindow { start_s: 0.0, end_s: 10.0 };
        assert_eq!(sample_frames(&s, w, Some(300)).unwrap().len(), 300);
        let idx = sample_frames(&s, w, Some(20)).unwrap();
        let expected: Vec<usize> = (0..20).map(|i| ((i * 299) as f64 / 19.0).round() as usize).collect();
        assert_eq!(idx, expected);
        assert_eq!(idx[0], 0);
        assert_eq!(idx[19], 299);
    }

    #[test]
    fn shortfall_takes_all() {
        let s = series(ChannelSpec::frame("fau", 1, 1.0), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let idx = sample_frames(&s, ClipWindow { start_s: 0.0, end_s: 10.0 }, Some(20)).unwrap();
        assert_eq!(idx.len(), 5);
        assert!(matches!(
            sample_frames(&s, ClipWindow { start_s: 20.0, end_s: 30.0 }, Some(20)),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn pooling() {
        assert_eq!(pool_clip(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(pool_clip(&[&[7.5]]).unwrap(), vec![7.5]);
        assert!(pool_clip(&[]).is_err());
    }

    #[test]
    fn missing_clip_dropped_from_all_channels() {
        let fau = series(ChannelSpec::frame("fau", 2, 1.0), (0..600).map(f64::from).collect());
        // face has no frames inside clip 7 = [210, 220)
        let face_times: Vec<f64> = (0..600).map(f64::from).filter(|t| !(210.0..220.0).contains(t)).collect();
        let face = series(ChannelSpec::frame("face_embedding", 3, 1.0), face_times);
        let clips = clips_from_series("p", &[fau, face], &SamplingPolicy::default()).unwrap();
        for c in clips.channels.values() {
            assert_eq!(c.clips.len(), 19);
            assert!(c.clips.iter().all(|c| c.clip_index != 7));
        }
    }

    #[test]
    fn sub_second_channel_pools_whole_window() {
        let mfcc = series(ChannelSpec::sub_second("mfcc", 1, 0.1), (0..1000).map(|i| i as f64 * 0.1).collect());
        let clips = clips_from_series("p", &[mfcc], &SamplingPolicy::default()).unwrap();
        let c = &clips.channels["mfcc"];
        assert_eq!(c.clips[0].frames_used, 100);
        assert_eq!(c.frame_count(), 100 * c.clips.len());
    }
}
