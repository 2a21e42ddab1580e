//! Cross-validation, ranking metrics, and the two interaction-removal
//! experiments. Held-out positives are scored against every never-positive
//! pair of the same relation; negatives never enter training.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dhlp::{
    run_all_seeds, run_seeds, symmetrize_outputs, AlgoParams, Algorithm, DhlpError,
    PredictionSet,
};
use crate::hetnet::VertexId;
use crate::engine::EngineConfig;
use crate::hetnet::{vertex_id, ConceptId};
use crate::ingest::{
    assemble_homogenized, homogenize_dimensions, EngineGraph, Homogenized, IngestError,
    NamedMatrix, SixMatrices,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("{relation:?} has {positives} positives, need at least {folds} for {folds}-fold CV")]
    TooFewPositives {
        relation: String,
        positives: usize,
        folds: usize,
    },
    #[error("pair ({row}, {col}) is not a positive interaction")]
    NotPositive { row: String, col: String },
    #[error("{0} has no positive interactions")]
    NoPositives(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error(transparent)]
    Propagation(#[from] DhlpError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// A disjoint, size-balanced partition of one relation's positive entries.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub relation: (ConceptId, ConceptId),
    pub folds: Vec<Vec<(usize, usize)>>,
    pub rng_seed: u64,
}

/// Uniformly random k-fold split of the positive coordinates, reproducible
/// from the seed. Fold sizes differ by at most one.
pub fn kfold_split<F: Scalar>(
    relation: (ConceptId, ConceptId),
    matrix: &Matrix<F>,
    k: usize,
    rng_seed: u64,
) -> Result<FoldPlan, EvalError> {
    assert!(k >= 2, "k-fold needs k >= 2");
    let mut positives: Vec<(usize, usize)> = matrix.iter_nonzero().map(|(r, c, _)| (r, c)).collect();
    if positives.len() < k {
        return Err(EvalError::TooFewPositives {
            relation: format!("{}-{}", relation.0, relation.1),
            positives: positives.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    positives.shuffle(&mut rng);
    let base = positives.len() / k;
    let extra = positives.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for i in 0..k {
        let take = base + usize::from(i < extra);
        folds.push(positives[cursor..cursor + take].to_vec());
        cursor += take;
    }
    Ok(FoldPlan {
        relation,
        folds,
        rng_seed,
    })
}

/// Probability that a random positive outranks a random negative, ties
/// counted half (the rank-sum formulation).
pub fn auc<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::UndefinedMetric(
            "AUC needs both classes".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // average ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let pos_f = pos as f64;
    let neg_f = neg as f64;
    Ok((rank_sum_pos - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg_f))
}

/// Area under the precision-recall curve by step-wise interpolation over
/// descending distinct score thresholds.
pub fn aupr<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len());
    let total_pos = labels.iter().filter(|l| **l).count();
    if total_pos == 0 {
        return Err(EvalError::UndefinedMetric("AUPR needs a positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut area = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            }
            seen += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(area)
}

/// Best achievable accuracy over all thresholds (prediction is positive at
/// score >= threshold; candidates are every distinct score and the two
/// infinities). Ties pick the lowest threshold.
pub fn best_accuracy<F: Scalar>(scores: &[F], labels: &[bool]) -> (f64, f64) {
    assert_eq!(scores.len(), labels.len());
    assert!(!scores.is_empty(), "best_accuracy needs input");
    let n = scores.len() as f64;
    let mut thresholds: Vec<f64> = scores.iter().map(|s| s.as_f64()).collect();
    thresholds.push(f64::NEG_INFINITY);
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    thresholds.dedup();
    let mut best = (0.0, f64::NEG_INFINITY);
    for t in thresholds {
        let correct = scores
            .iter()
            .zip(labels.iter())
            .filter(|(s, l)| (s.as_f64() >= t) == **l)
            .count();
        let acc = correct as f64 / n;
        if acc > best.0 {
            best = (acc, t);
        }
    }
    best
}

/// Confusion counts at a given threshold (positive at score >= threshold).
pub fn confusion_at<F: Scalar>(scores: &[F], labels: &[bool], threshold: f64) -> [usize; 4] {
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fneg = 0;
    for (s, l) in scores.iter().zip(labels.iter()) {
        match (s.as_f64() >= threshold, *l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    [tp, fp, tn, fneg]
}

/// Ranking-quality metrics for one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub auc: f64,
    pub aupr: f64,
    pub best_acc: f64,
    pub best_threshold: f64,
    /// TP, FP, TN, FN at the best-accuracy threshold.
    pub confusion: [usize; 4],
}

fn metric_report<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<MetricReport, EvalError> {
    let (best_acc, best_threshold) = best_accuracy(scores, labels);
    Ok(MetricReport {
        auc: auc(scores, labels)?,
        aupr: aupr(scores, labels)?,
        best_acc,
        best_threshold,
        confusion: confusion_at(scores, labels, best_threshold),
    })
}

/// The three evaluated relations in report order.
pub const CV_RELATIONS: [(ConceptId, ConceptId); 3] = [
    (ConceptId::Drug, ConceptId::Disease),
    (ConceptId::Drug, ConceptId::Target),
    (ConceptId::Disease, ConceptId::Target),
];

/// Per-relation cross-validation outcome: per-fold metrics plus their mean.
#[derive(Debug, Clone)]
pub struct CvRelationReport {
    pub relation: (ConceptId, ConceptId),
    pub folds: Vec<MetricReport>,
    pub mean: MetricReport,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub algorithm: Algorithm,
    pub relations: Vec<CvRelationReport>,
}

fn relation_matrix_of<F>(
    hom: &Homogenized<F>,
    relation: (ConceptId, ConceptId),
) -> &NamedMatrix<F> {
    match relation {
        (ConceptId::Drug, ConceptId::Disease) => &hom.six.drug_disease,
        (ConceptId::Drug, ConceptId::Target) => &hom.six.drug_target,
        (ConceptId::Disease, ConceptId::Target) => &hom.six.disease_target,
        other => panic!("not a canonical relation: {other:?}"),
    }
}

fn masked_relation<F: Scalar>(
    nm: &NamedMatrix<F>,
    held_out: &[(usize, usize)],
) -> NamedMatrix<F> {
    let mask: std::collections::BTreeSet<(usize, usize)> = held_out.iter().copied().collect();
    let triplets: Vec<_> = nm
        .values
        .iter_nonzero()
        .filter(|(r, c, _)| !mask.contains(&(*r, *c)))
        .collect();
    NamedMatrix::new(
        nm.row_names.clone(),
        nm.col_names.clone(),
        Matrix::from_triplets(nm.values.rows(), nm.values.cols(), triplets),
    )
}

/// Six matrices with the given positives zeroed in one relation.
pub fn with_masked_relation<F: Scalar>(
    hom: &Homogenized<F>,
    relation: (ConceptId, ConceptId),
    held_out: &[(usize, usize)],
) -> Homogenized<F> {
    let mut out = hom.clone();
    let masked = masked_relation(relation_matrix_of(hom, relation), held_out);
    match relation {
        (ConceptId::Drug, ConceptId::Disease) => out.six.drug_disease = masked,
        (ConceptId::Drug, ConceptId::Target) => out.six.drug_target = masked,
        (ConceptId::Disease, ConceptId::Target) => out.six.disease_target = masked,
        other => panic!("not a canonical relation: {other:?}"),
    }
    out
}

/// Runs the propagation on re-normalized training matrices and returns the
/// symmetrized predictions. A seed subset restricted to the concepts of the
/// relation under evaluation yields the same scores for that relation's
/// block as the full schedule, since M(u, v) only reads the u- and v-seeded
/// runs.
pub fn run_predictions<F: Scalar>(
    hom: &Homogenized<F>,
    algo: Algorithm,
    params: &AlgoParams<F>,
    config: &EngineConfig,
    seeds: Option<Vec<VertexId>>,
) -> Result<PredictionSet<F>, EvalError> {
    let net = assemble_homogenized(hom)?;
    let graph = EngineGraph::from_network(&net);
    let raw = match seeds {
        Some(seeds) => run_seeds(&graph, algo, params, config, seeds)?,
        None => run_all_seeds(&graph, algo, params, config)?,
    };
    let mut pred = symmetrize_outputs(&raw, &hom.registries)?;
    pred.mark_known(&graph);
    Ok(pred)
}

/// Schedule-ordered seeds covering the given concepts.
fn concept_seeds<F>(hom: &Homogenized<F>, concepts: &[ConceptId]) -> Vec<VertexId> {
    let mut out = Vec::new();
    for &c in concepts {
        for i in 0..hom.registries[c.index()].len() {
            out.push(vertex_id(c, i));
        }
    }
    out
}

/// 10-fold-style cross-validation: per fold, the held-out positives are
/// zeroed in the training relation, the network is re-normalized, the full
/// propagation runs, and the held-out positives are scored against every
/// never-positive pair of the relation.
pub fn cross_validate<F: Scalar>(
    six: &SixMatrices<F>,
    algo: Algorithm,
    params: &AlgoParams<F>,
    config: &EngineConfig,
    k: usize,
    rng_seed: u64,
) -> Result<CvReport, EvalError> {
    let hom = homogenize_dimensions(six);
    let mut relations = Vec::with_capacity(CV_RELATIONS.len());
    for relation in CV_RELATIONS {
        let full = relation_matrix_of(&hom, relation);
        let plan = kfold_split(relation, &full.values, k, rng_seed)?;
        // negatives: never-interacting pairs of the original matrix
        let negatives: Vec<(usize, usize)> = (0..full.values.rows())
            .flat_map(|r| (0..full.values.cols()).map(move |c| (r, c)))
            .filter(|&(r, c)| full.values.get(r, c) == F::zero())
            .collect();
        let mut folds = Vec::with_capacity(k);
        for fold in &plan.folds {
            let masked = with_masked_relation(&hom, relation, fold);
            // the held-out positives must be absent from training
            {
                let train = relation_matrix_of(&masked, relation);
                for &(r, c) in fold {
                    assert_eq!(
                        train.values.get(r, c),
                        F::zero(),
                        "held-out positive leaked into training"
                    );
                }
            }
            let seeds = concept_seeds(&masked, &[relation.0, relation.1]);
            let pred = run_predictions(&masked, algo, params, config, Some(seeds))?;
            let blk = pred
                .block(relation.0, relation.1)
                .expect("canonical relation block");
            let ncols = pred.n(relation.1);
            let mut scores: Vec<F> = Vec::with_capacity(fold.len() + negatives.len());
            let mut labels = Vec::with_capacity(fold.len() + negatives.len());
            for &(r, c) in fold {
                scores.push(blk.scores[r * ncols + c]);
                labels.push(true);
            }
            for &(r, c) in &negatives {
                scores.push(blk.scores[r * ncols + c]);
                labels.push(false);
            }
            folds.push(metric_report(&scores, &labels)?);
        }
        let mean = MetricReport {
            auc: folds.iter().map(|f| f.auc).sum::<f64>() / folds.len() as f64,
            aupr: folds.iter().map(|f| f.aupr).sum::<f64>() / folds.len() as f64,
            best_acc: folds.iter().map(|f| f.best_acc).sum::<f64>() / folds.len() as f64,
            best_threshold: f64::NAN,
            confusion: [0; 4],
        };
        relations.push(CvRelationReport {
            relation,
            folds,
            mean,
        });
    }
    Ok(CvReport {
        algorithm: algo,
        relations,
    })
}

/// Ranks of a removed interaction in the drug's candidate list: within the
/// full list (known training interactions included, the Table-3 style
/// reading) and among novel candidates only (training interactions
/// filtered out).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemovalRank {
    pub rank: usize,
    pub novel_rank: usize,
}

/// Removes one known drug-target interaction, reruns the propagation,
/// and reports the removed target's 1-based ranks in the drug's candidate
/// list.
pub fn deleted_interaction_experiment<F: Scalar>(
    six: &SixMatrices<F>,
    algo: Algorithm,
    params: &AlgoParams<F>,
    config: &EngineConfig,
    drug: &str,
    target: &str,
) -> Result<RemovalRank, EvalError> {
    let hom = homogenize_dimensions(six);
    let drug_idx = hom.registries[ConceptId::Drug.index()]
        .iter()
        .position(|n| n == drug)
        .ok_or_else(|| EvalError::UnknownEntity(drug.to_owned()))?;
    let target_idx = hom.registries[ConceptId::Target.index()]
        .iter()
        .position(|n| n == target)
        .ok_or_else(|| EvalError::UnknownEntity(target.to_owned()))?;
    if hom.six.drug_target.values.get(drug_idx, target_idx) == F::zero() {
        return Err(EvalError::NotPositive {
            row: drug.to_owned(),
            col: target.to_owned(),
        });
    }
    let relation = (ConceptId::Drug, ConceptId::Target);
    let masked = with_masked_relation(&hom, relation, &[(drug_idx, target_idx)]);
    let mut seeds = vec![vertex_id(ConceptId::Drug, drug_idx)];
    seeds.extend(concept_seeds(&hom, &[ConceptId::Target]));
    let pred = run_predictions(&masked, algo, params, config, Some(seeds))?;
    removal_ranks(
        &pred,
        vertex_id(ConceptId::Drug, drug_idx),
        vertex_id(ConceptId::Target, target_idx),
    )
}

fn removal_ranks<F: Scalar>(
    pred: &PredictionSet<F>,
    drug: crate::hetnet::VertexId,
    target: crate::hetnet::VertexId,
) -> Result<RemovalRank, EvalError> {
    let full = crate::dhlp::rank_candidates(pred, drug, ConceptId::Target, usize::MAX)?;
    let mut rank = None;
    let mut novel_rank = 0;
    let mut novel_seen = 0;
    for (i, cand) in full.iter().enumerate() {
        if !cand.known {
            novel_seen += 1;
        }
        if cand.id == target {
            rank = Some(i + 1);
            novel_rank = novel_seen;
            break;
        }
    }
    let rank = rank.ok_or_else(|| EvalError::UnknownEntity(format!("{target}")))?;
    Ok(RemovalRank { rank, novel_rank })
}

/// Removes every drug-target interaction of one drug (a pseudo new drug),
/// reruns, and reports the removed targets' ranks in the drug's list.
pub fn new_drug_experiment<F: Scalar>(
    six: &SixMatrices<F>,
    algo: Algorithm,
    params: &AlgoParams<F>,
    config: &EngineConfig,
    drug: &str,
) -> Result<Vec<(String, RemovalRank)>, EvalError> {
    let hom = homogenize_dimensions(six);
    let drug_idx = hom.registries[ConceptId::Drug.index()]
        .iter()
        .position(|n| n == drug)
        .ok_or_else(|| EvalError::UnknownEntity(drug.to_owned()))?;
    let removed: Vec<(usize, usize)> = hom
        .six
        .drug_target
        .values
        .row_nonzero(drug_idx)
        .map(|(c, _)| (drug_idx, c))
        .collect();
    if removed.is_empty() {
        return Err(EvalError::NoPositives(drug.to_owned()));
    }
    let relation = (ConceptId::Drug, ConceptId::Target);
    let masked = with_masked_relation(&hom, relation, &removed);
    let mut seeds = vec![vertex_id(ConceptId::Drug, drug_idx)];
    seeds.extend(concept_seeds(&hom, &[ConceptId::Target]));
    let pred = run_predictions(&masked, algo, params, config, Some(seeds))?;
    let mut out = Vec::with_capacity(removed.len());
    for &(_, target_idx) in &removed {
        let ranks = removal_ranks(
            &pred,
            vertex_id(ConceptId::Drug, drug_idx),
            vertex_id(ConceptId::Target, target_idx),
        )?;
        out.push((
            hom.registries[ConceptId::Target.index()][target_idx].clone(),
            ranks,
        ));
    }
    Ok(out)
}

/// Removal-experiment report TSV: one row per removed target with its
/// full-list and novel-list ranks, one table per algorithm column pair.
pub fn write_removal_report(
    rows: &[(Algorithm, String, RemovalRank)],
    path: &Path,
) -> Result<(), EvalError> {
    let mut out = String::from("algorithm	target	rank	novel_rank
");
    for (algo, target, rank) in rows {
        let _ = writeln!(out, "{algo}	{target}	{}	{}", rank.rank, rank.novel_rank);
    }
    fs::write(path, out).map_err(|e| {
        EvalError::Ingest(IngestError::Io {
            path: path.display().to_string(),
            source: e,
        })
    })
}

/// CV report TSV: relation, algorithm, fold (or `mean`), AUC, AUPR, BestAcc.
pub fn write_cv_report(report: &CvReport, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("relation\talgorithm\tfold\tauc\taupr\tbest_acc\n");
    for rel in &report.relations {
        let name = format!("{}-{}", rel.relation.0, rel.relation.1);
        for (i, fold) in rel.folds.iter().enumerate() {
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                report.algorithm, i, fold.auc, fold.aupr, fold.best_acc
            );
        }
        let _ = writeln!(
            out,
            "{name}\t{}\tmean\t{:.6}\t{:.6}\t{:.6}",
            report.algorithm, rel.mean.auc, rel.mean.aupr, rel.mean.best_acc
        );
    }
    fs::write(path, out).map_err(|e| {
        EvalError::Ingest(IngestError::Io {
            path: path.display().to_string(),
            source: e,
        })
    })
}
