//! Synthetic heterogeneous network generator for fixtures and benchmarks.
//! Homogeneous similarities are symmetric uniform (0,1] weights, relations
//! are binary, both at a configurable density. With `blocks > 0` entities
//! are striped across blocks and within-block pairs are five times denser,
//! planting structure that propagation should recover.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hetnet::HeterogeneousNetwork;
use crate::ingest::{
    assemble_network, write_matrix, IngestError, NamedMatrix, SixMatrices,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Boost applied to within-block pair densities; frozen together with the
/// fixture seeds used by the recovery tests.
pub const BLOCK_BOOST: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub n_drugs: usize,
    pub n_diseases: usize,
    pub n_targets: usize,
    pub homo_density: f64,
    pub hetero_density: f64,
    /// Planted community count; 0 generates unstructured networks.
    pub blocks: usize,
    pub rng_seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_drugs < 1 || self.n_diseases < 1 || self.n_targets < 1 {
            return Err("entity counts must be >= 1".into());
        }
        for d in [self.homo_density, self.hetero_density] {
            if !(0.0..=1.0).contains(&d) {
                return Err(format!("density {d} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.n_drugs, self.n_diseases, self.n_targets]
    }
}

/// Raw six matrices plus the assembled normalized network.
#[derive(Debug, Clone)]
pub struct Generated<F> {
    pub six: SixMatrices<F>,
    pub network: HeterogeneousNetwork<F>,
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    let width = n.to_string().len().max(3);
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn block_of(index: usize, blocks: usize) -> usize {
    if blocks == 0 {
        0
    } else {
        index % blocks
    }
}

fn pair_density(base: f64, same_block: bool, blocks: usize) -> f64 {
    if blocks > 0 && same_block {
        (base * BLOCK_BOOST).min(1.0)
    } else {
        base
    }
}

/// Deterministic generation from the spec's rng seed.
pub fn generate<F: Scalar>(spec: &GenSpec) -> Generated<F> {
    spec.validate().expect("valid generator spec");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let [nd, ns, nt] = spec.counts();

    let mut sim = |n: usize, prefix: &str| -> NamedMatrix<F> {
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = pair_density(
                    spec.homo_density,
                    block_of(i, spec.blocks) == block_of(j, spec.blocks),
                    spec.blocks,
                );
                if rng.random::<f64>() < d {
                    // uniform (0, 1]
                    let w = 1.0 - rng.random::<f64>();
                    triplets.push((i, j, F::cast(w)));
                    triplets.push((j, i, F::cast(w)));
                }
            }
        }
        NamedMatrix::new(
            names(prefix, n),
            names(prefix, n),
            Matrix::from_triplets(n, n, triplets),
        )
    };
    let drug_sim = sim(nd, "drug");
    let disease_sim = sim(ns, "disease");
    let target_sim = sim(nt, "target");

    let mut rel = |rows: usize, cols: usize, rp: &str, cp: &str| -> NamedMatrix<F> {
        let mut triplets = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let d = pair_density(
                    spec.hetero_density,
                    block_of(i, spec.blocks) == block_of(j, spec.blocks),
                    spec.blocks,
                );
                if rng.random::<f64>() < d {
                    triplets.push((i, j, F::one()));
                }
            }
        }
        NamedMatrix::new(
            names(rp, rows),
            names(cp, cols),
            Matrix::from_triplets(rows, cols, triplets),
        )
    };
    let drug_disease = rel(nd, ns, "drug", "disease");
    let drug_target = rel(nd, nt, "drug", "target");
    let disease_target = rel(ns, nt, "disease", "target");

    let six = SixMatrices {
        drug_sim,
        disease_sim,
        target_sim,
        drug_disease,
        drug_target,
        disease_target,
    };
    let network = assemble_network(&six).expect("generated matrices are valid");
    Generated { six, network }
}

/// Writes the six matrices in the same TSV layout the ingest step reads.
pub fn write_tsv_set<F: Scalar>(six: &SixMatrices<F>, dir: &Path) -> Result<(), IngestError> {
    write_matrix(&six.drug_sim, &dir.join("drug-sim.tsv"))?;
    write_matrix(&six.disease_sim, &dir.join("disease-sim.tsv"))?;
    write_matrix(&six.target_sim, &dir.join("target-sim.tsv"))?;
    write_matrix(&six.drug_disease, &dir.join("drug-disease.tsv"))?;
    write_matrix(&six.drug_target, &dir.join("drug-target.tsv"))?;
    write_matrix(&six.disease_target, &dir.join("disease-target.tsv"))?;
    Ok(())
}

/// Total undirected edges across the six raw matrices.
pub fn raw_edge_count<F: Scalar>(six: &SixMatrices<F>) -> usize {
    let hom: usize = [&six.drug_sim, &six.disease_sim, &six.target_sim]
        .iter()
        .map(|m| m.values.nnz() / 2)
        .sum();
    let het: usize = [&six.drug_disease, &six.drug_target, &six.disease_target]
        .iter()
        .map(|m| m.values.nnz())
        .sum();
    hom + het
}
