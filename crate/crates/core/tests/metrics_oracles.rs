//! Metric implementations versus independent brute-force oracles: AUC by
//! pair counting, AUPR by per-threshold recounting, best accuracy by
//! midpoint threshold enumeration.

use hetlp::eval::{auc, aupr, best_accuracy};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn auc_pair_counting(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn aupr_threshold_recount(scores: &[f64], labels: &[bool]) -> f64 {
    let total_pos = labels.iter().filter(|l| **l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (s, l) in scores.iter().zip(labels.iter()) {
            if *s >= t {
                predicted += 1.0;
                if *l {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / total_pos;
        let precision = tp / predicted;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

fn best_accuracy_midpoints(scores: &[f64], labels: &[bool]) -> f64 {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut candidates = vec![f64::NEG_INFINITY, f64::INFINITY];
    candidates.extend(sorted.iter().copied());
    for w in sorted.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    let n = scores.len() as f64;
    candidates
        .into_iter()
        .map(|t| {
            scores
                .iter()
                .zip(labels.iter())
                .filter(|(s, l)| (**s >= t) == **l)
                .count() as f64
                / n
        })
        .fold(0.0, f64::max)
}

#[test]
fn metrics_agree_with_brute_force_on_exhaustive_patterns() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = 0u64;
    for n in 1..=10usize {
        for pattern in 0..(1u32 << n) {
            let labels: Vec<bool> = (0..n).map(|i| pattern >> i & 1 == 1).collect();
            // quantized scores force ties regularly
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..6) as f64) / 5.0)
                .collect();
            cases += 1;
            let pos = labels.iter().filter(|l| **l).count();
            if pos > 0 && pos < n {
                let fast = auc(&scores, &labels).unwrap();
                let slow = auc_pair_counting(&scores, &labels);
                assert!((fast - slow).abs() < 1e-12, "AUC {fast} vs {slow}");
            }
            if pos > 0 {
                let fast = aupr(&scores, &labels).unwrap();
                let slow = aupr_threshold_recount(&scores, &labels);
                assert!((fast - slow).abs() < 1e-12, "AUPR {fast} vs {slow}");
            }
            let (fast, _) = best_accuracy(&scores, &labels);
            let slow = best_accuracy_midpoints(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "BestAcc {fast} vs {slow}");
        }
    }
    assert!(cases > 2000);
}

#[test]
fn metrics_agree_on_longer_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..400 {
        let n = rng.random_range(2..40);
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let pos = labels.iter().filter(|l| **l).count();
        if pos == 0 || pos == n {
            continue;
        }
        assert!((auc(&scores, &labels).unwrap() - auc_pair_counting(&scores, &labels)).abs() < 1e-12);
        assert!(
            (aupr(&scores, &labels).unwrap() - aupr_threshold_recount(&scores, &labels)).abs()
                < 1e-12
        );
    }
}
