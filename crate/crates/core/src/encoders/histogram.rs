//! Frame-level, clip-level and combined histogram encodings.

use serde::{Deserialize, Serialize};

use crate::data::DimRef;
use crate::error::{Error, Result};
use crate::sampling::PlayerClips;

/// Per-dimension bin edges, `b + 1` ascending values each. Bins are
/// left-closed except the last, which is closed on both sides; values
/// outside the fitted range land in the outermost bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub edges: Vec<Vec<f64>>,
}

impl BinEdges {
    pub fn bins(&self) -> usize {
        self.edges.first().map_or(0, |e| e.len() - 1)
    }
}

/// Equal-width edges over [min, max] of each dimension. A constant
/// dimension gets edges spanning [v - 0.5, v + 0.5].
pub fn fit_bins<V: AsRef<[f64]>>(values: &[V], bins: usize) -> Result<BinEdges> {
    if bins < 2 {
        return Err(Error::EmptyInput(format!("bin count {bins} < 2")));
    }
    let mut edges = Vec::with_capacity(values.len());
    for (d, vals) in values.iter().enumerate() {
        let vals = vals.as_ref();
        if vals.is_empty() {
            return Err(Error::EmptyInput(format!("no training values for dimension {d}")));
        }
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = hi - lo;
        let mut e: Vec<f64> = (0..bins).map(|i| lo + width * i as f64 / bins as f64).collect();
        e.push(hi);
        edges.push(e);
    }
    Ok(BinEdges { edges })
}

pub fn bin_index(edges: &[f64], value: f64) -> usize {
    let interior = &edges[1..edges.len() - 1];
    interior.partition_point(|&e| e <= value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramMode {
    FrameLevel,
    ClipLevel,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    Counts,
    #[default]
    Frequencies,
}

/// Histogram of `values` over `edges`.
pub fn histogram(values: impl Iterator<Item = f64>, edges: &[f64], normalize: Normalize) -> Vec<f64> {
    let mut h = vec![0.0; edges.len() - 1];
    let mut total = 0usize;
    for v in values {
        h[bin_index(edges, v)] += 1.0;
        total += 1;
    }
    if normalize == Normalize::Frequencies && total > 0 {
        let n = total as f64;
        h.iter_mut().for_each(|c| *c /= n);
    }
    h
}

/// A fitted histogram encoder over a list of scalar features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEncoding {
    pub mode: HistogramMode,
    pub selected_dims: Vec<DimRef>,
    pub frame_edges: Option<BinEdges>,
    pub clip_edges: Option<BinEdges>,
    pub normalize: Normalize,
    /// Game ids of the players the edges were fitted on.
    pub fitted_on: Vec<String>,
}

impl HistogramEncoding {
    pub fn bins(&self) -> usize {
        self.frame_edges
            .as_ref()
            .or(self.clip_edges.as_ref())
            .map_or(0, BinEdges::bins)
    }

    pub fn output_len(&self) -> usize {
        let per = match self.mode {
            HistogramMode::Combined => 2,
            _ => 1,
        };
        per * self.bins() * self.selected_dims.len()
    }

    /// Fits edges for the levels `mode` needs on the pooled values of the
    /// training players.
    pub fn fit(
        mode: HistogramMode,
        selected_dims: Vec<DimRef>,
        bins: usize,
        normalize: Normalize,
        training: &[&PlayerClips],
        fitted_on: Vec<String>,
    ) -> Result<Self> {
        let collect = |frames: bool| -> Result<BinEdges> {
            let mut per_dim = Vec::with_capacity(selected_dims.len());
            for d in &selected_dims {
                let mut vals = Vec::new();
                for p in training {
                    let ch = p
                        .channels
                        .get(&d.channel)
                        .ok_or_else(|| Error::EmptyInput(format!("channel {} missing", d.channel)))?;
                    if frames {
                        vals.extend(ch.frame_values(d.index));
                    } else {
                        vals.extend(ch.clip_values(d.index));
                    }
                }
                per_dim.push(vals);
            }
            fit_bins(&per_dim, bins)
        };
        let needs_frames = mode != HistogramMode::ClipLevel;
        let needs_clips = mode != HistogramMode::FrameLevel;
        Ok(HistogramEncoding {
            mode,
            frame_edges: if needs_frames { Some(collect(true)?) } else { None },
            clip_edges: if needs_clips { Some(collect(false)?) } else { None },
            selected_dims,
            normalize,
            fitted_on,
        })
    }
}

/// Concatenated per-dimension histograms in `selected_dims` order. Combined
/// mode interleaves the frame and clip histogram of each dimension.
pub fn encode_histogram(player: &PlayerClips, enc: &HistogramEncoding) -> Result<Vec<f64>> {
    let need = |e: &Option<BinEdges>, what: &str| -> Result<BinEdges> {
        e.clone().ok_or_else(|| Error::EdgesMissing(format!("{what}-level edges")))
    };
    let frame_edges = match enc.mode {
        HistogramMode::ClipLevel => None,
        _ => Some(need(&enc.frame_edges, "frame")?),
    };
    let clip_edges = match enc.mode {
        HistogramMode::FrameLevel => None,
        _ => Some(need(&enc.clip_edges, "clip")?),
    };
    for e in frame_edges.iter().chain(clip_edges.iter()) {
        if e.edges.len() != enc.selected_dims.len() {
            return Err(Error::DimMismatch {
                expected: enc.selected_dims.len(),
                actual: e.edges.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(enc.output_len());
    for (i, d) in enc.selected_dims.iter().enumerate() {
        let ch = player
            .channels
            .get(&d.channel)
            .ok_or_else(|| Error::EmptyInput(format!("channel {} missing", d.channel)))?;
        if ch.clips.is_empty() {
            return Err(Error::EmptyInput(format!("player has no clips in {}", d.channel)));
        }
        if let Some(fe) = &frame_edges {
            out.extend(histogram(ch.frame_values(d.index), &fe.edges[i], enc.normalize));
        }
        if let Some(ce) = &clip_edges {
            out.extend(histogram(ch.clip_values(d.index), &ce.edges[i], enc.normalize));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_width_edges() {
        let e = fit_bins(&[vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(e.edges[0], vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn degenerate_edges() {
        let e = fit_bins(&[vec![3.0, 3.0, 3.0]], 2).unwrap();
        assert_eq!(e.edges[0], vec![2.5, 3.0, 3.5]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(fit_bins(&[Vec::<f64>::new()], 2), Err(Error::EmptyInput(_))));
        assert!(fit_bins(&[vec![1.0, 2.0]], 1).is_err());
    }

    #[test]
    fn binning_and_normalization() {
        let edges = [0.0, 0.5, 1.0];
        let vals = [0.1, 0.2, 0.9];
        assert_eq!(histogram(vals.iter().copied(), &edges, Normalize::Counts), vec![2.0, 1.0]);
        assert_eq!(
            histogram(vals.iter().copied(), &edges, Normalize::Frequencies),
            vec![2.0 / 3.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn out_of_range_clamps() {
        let edges = [0.0, 0.5, 1.0];
        assert_eq!(bin_index(&edges, -0.2), 0);
        assert_eq!(bin_index(&edges, 1.0), 1);
        assert_eq!(bin_index(&edges, 7.0), 1);
        assert_eq!(bin_index(&edges, 0.5), 1);
    }
}
