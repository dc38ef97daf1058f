use std::collections::BTreeMap;

use proptest::prelude::*;

use spyrank::classifiers::{auc, train, ClassifierKind, Hyperparams};
use spyrank::data::{ChannelSpec, FrameFeatureSeries};
use spyrank::encoders::histogram::histogram;
use spyrank::encoders::{fit_bins, fit_gmm, GmmConfig, Normalize};
use spyrank::liarrank::{build_corpus, liarrank_vector, GameRoster};
use spyrank::sampling::{clips_from_series, pool_clip, schedule_clips, SamplingPolicy};
use spyrank::Matrix;

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..6).prop_map(f64::from), n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_map(|(s, mut l)| {
                l[0] = 0;
                l[1] = 1;
                (s, l)
            })
    })
}

/// Games of 5-8 players with small-integer feature values.
fn rank_games() -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    prop::collection::vec(
        prop::collection::vec(prop::collection::vec((-6i32..=6).prop_map(|v| f64::from(v) / 2.0), 2), 5..=8),
        1..=4,
    )
}

fn corpus_ranks(games: &[Vec<Vec<f64>>], f: impl Fn(f64) -> f64) -> Vec<Vec<u32>> {
    let mut feats = BTreeMap::new();
    let mut rosters = Vec::new();
    for (g, players) in games.iter().enumerate() {
        let mut ids = Vec::new();
        for (p, v) in players.iter().enumerate() {
            let id = format!("g{g}p{p}");
            feats.insert(id.clone(), v.iter().map(|&x| f(x)).collect::<Vec<f64>>());
            ids.push(id);
        }
        rosters.push(GameRoster {
            game_id: format!("g{g}"),
            player_ids: ids,
        });
    }
    let corpus = build_corpus(&rosters, &feats, &[1, 0]).unwrap();
    feats
        .iter()
        .map(|(id, v)| liarrank_vector(&corpus, id, v).unwrap().ranks)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_matches_pairwise_count((scores, labels) in scored_labels()) {
        let got = auc(&scores, &labels).unwrap();
        prop_assert!((got - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn auc_flips_under_negation((scores, labels) in scored_labels()) {
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = auc(&scores, &labels).unwrap() + auc(&neg, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn liarrank_is_invariant_to_increasing_maps(games in rank_games(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let base = corpus_ranks(&games, |x| x);
        prop_assert_eq!(&corpus_ranks(&games, |x| a * x + b), &base);
        prop_assert_eq!(&corpus_ranks(&games, f64::exp), &base);
        prop_assert_eq!(&corpus_ranks(&games, |x| x * x * x + x), &base);
    }

    #[test]
    fn liarrank_ranks_lie_within_set_sizes(games in rank_games(), outsider in prop::collection::vec(-4.0f64..4.0, 2)) {
        let mut feats = BTreeMap::new();
        let mut rosters = Vec::new();
        for (g, players) in games.iter().enumerate() {
            let ids: Vec<String> = (0..players.len()).map(|p| format!("g{g}p{p}")).collect();
            for (id, v) in ids.iter().zip(players) {
                feats.insert(id.clone(), v.clone());
            }
            rosters.push(GameRoster { game_id: format!("g{g}"), player_ids: ids });
        }
        let corpus = build_corpus(&rosters, &feats, &[0, 1]).unwrap();
        let mut queries: Vec<(String, Vec<f64>)> = feats.clone().into_iter().collect();
        queries.push(("new".into(), outsider));
        for (id, v) in &queries {
            let r = liarrank_vector(&corpus, id, v).unwrap();
            prop_assert_eq!(r.ranks.len(), 2 * games.len());
            for (&rank, &size) in r.ranks.iter().zip(&r.set_sizes) {
                prop_assert!(rank >= 1 && rank <= size);
            }
        }
    }

    #[test]
    fn histogram_counts_conserve(values in prop::collection::vec(-50.0f64..50.0, 1..200), bins in 2usize..20) {
        let edges = fit_bins(&[values.clone()], bins).unwrap();
        let h = histogram(values.iter().copied(), &edges.edges[0], Normalize::Counts);
        prop_assert_eq!(h.len(), bins);
        prop_assert_eq!(h.iter().sum::<f64>(), values.len() as f64);
        let f = histogram(values.iter().copied(), &edges.edges[0], Normalize::Frequencies);
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_shift_invariant(values in prop::collection::vec(-8i32..8, 2..100), shift in -4i32..4, bins in 2usize..10) {
        // integer-valued inputs keep the shifted edges exact
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let s: Vec<f64> = v.iter().map(|x| x + f64::from(shift) * 64.0).collect();
        let e1 = fit_bins(&[v.clone()], bins).unwrap();
        let e2 = fit_bins(&[s.clone()], bins).unwrap();
        let h1 = histogram(v.into_iter(), &e1.edges[0], Normalize::Counts);
        let h2 = histogram(s.into_iter(), &e2.edges[0], Normalize::Counts);
        prop_assert_eq!(h1, h2);
    }

    #[test]
    fn pooling_is_linear(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..30),
                         a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let pooled = pool_clip(&refs).unwrap();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| a * x + b).collect()).collect();
        let refs: Vec<&[f64]> = moved.iter().map(Vec::as_slice).collect();
        let got = pool_clip(&refs).unwrap();
        for (g, p) in got.iter().zip(&pooled) {
            prop_assert!((g - (a * p + b)).abs() <= 1e-12 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn schedule_density(d in 10.0f64..5000.0, l in 1.0f64..20.0, extra in 0.0f64..40.0) {
        let policy = SamplingPolicy { clip_len_s: l, clip_interval_s: l + extra, ..SamplingPolicy::default() };
        prop_assume!(d >= l);
        let s = schedule_clips(d, &policy).unwrap();
        let expect = ((d - l) / (l + extra)).floor() as usize + 1;
        prop_assert_eq!(s.windows.len(), expect);
    }

    #[test]
    fn em_never_decreases(seed in 0u64..1000, k in 1usize..5) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|i| vec![(i % 3) as f64 * 3.0 + rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let g = fit_gmm(&data, &GmmConfig { components: k, seed, tol: 0.0, max_iters: 40, ..GmmConfig::default() }).unwrap();
        prop_assert!(g.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

fn clustered(seed: u64) -> (Matrix, Vec<u8>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..80).map(|i| (i % 2) as u8).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            let m = f64::from(y) * 1.5;
            vec![m + rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0 - m]
        })
        .collect();
    (Matrix::from_rows(&rows).unwrap(), labels)
}

#[test]
fn classifiers_ignore_column_scaling() {
    let (x, y) = clustered(4);
    let scaled = Matrix::from_rows(
        &x.iter_rows()
            .map(|r| vec![r[0] * 1000.0 + 7.0, r[1] * 0.01 - 3.0])
            .collect::<Vec<_>>(),
    )
    .unwrap();
    for kind in ClassifierKind::ALL {
        let a = train(kind, &x, &y, &Hyperparams::default(), 1).unwrap().predict(&x).unwrap();
        let b = train(kind, &scaled, &y, &Hyperparams::default(), 1).unwrap().predict(&scaled).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-6, "{kind}: {p} vs {q}");
        }
    }
}

#[test]
fn clips_stay_aligned_across_channels() {
    let fau = ChannelSpec::frame("fau", 2, 1.0);
    let mfcc = ChannelSpec::sub_second("mfcc", 1, 0.5);
    let times: Vec<f64> = (0..300).map(f64::from).filter(|t| !(210.0..220.0).contains(t)).collect();
    let vals = vec![1.0; times.len() * 2];
    let a = FrameFeatureSeries::new("p", fau, times, vals).unwrap();
    let mt: Vec<f64> = (0..600).map(|i| f64::from(i) * 0.5).collect();
    let b = FrameFeatureSeries::new("p", mfcc, mt.clone(), vec![2.0; mt.len()]).unwrap();
    let clips = clips_from_series("p", &[a, b], &SamplingPolicy::default()).unwrap();
    for ch in clips.channels.values() {
        let idx: Vec<usize> = ch.clips.iter().map(|c| c.clip_index).collect();
        assert!(!idx.contains(&7));
        assert_eq!(idx.len(), 9);
    }
    assert_eq!(clips.channels["mfcc"].clips[0].frames_used, 20);
}
