//! Domain types for the three-concept heterogeneous network: vertex id
//! scheme, similarity/relation matrices, degree normalization, and network
//! validation.
//!
//! Vertex ids encode the concept: drugs are `3x + 1`, diseases `3x + 2`,
//! targets `3x + 3`, so a vertex can classify any neighbor from the id alone.

use std::fmt;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConceptId {
    Drug = 1,
    Disease = 2,
    Target = 3,
}

impl ConceptId {
    pub const ALL: [ConceptId; 3] = [ConceptId::Drug, ConceptId::Disease, ConceptId::Target];

    pub fn value(self) -> u64 {
        self as u64
    }

    /// Zero-based subnetwork index.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_value(v: u64) -> Option<ConceptId> {
        match v {
            1 => Some(ConceptId::Drug),
            2 => Some(ConceptId::Disease),
            3 => Some(ConceptId::Target),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConceptId::Drug => "drug",
            ConceptId::Disease => "disease",
            ConceptId::Target => "target",
        }
    }

    pub fn from_name(name: &str) -> Option<ConceptId> {
        match name {
            "drug" => Some(ConceptId::Drug),
            "disease" => Some(ConceptId::Disease),
            "target" => Some(ConceptId::Target),
            _ => None,
        }
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Graph vertex id, always ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u64);

impl VertexId {
    pub fn concept(self) -> ConceptId {
        concept_of(self)
    }

    pub fn index(self) -> usize {
        index_of(self)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Id for the `index`-th entity of a concept: `3·index + concept`.
pub fn vertex_id(concept: ConceptId, index: usize) -> VertexId {
    VertexId(3 * index as u64 + concept.value())
}

pub fn concept_of(id: VertexId) -> ConceptId {
    debug_assert!(id.0 >= 1);
    ConceptId::from_value((id.0 - 1) % 3 + 1).expect("residue in 1..=3")
}

pub fn index_of(id: VertexId) -> usize {
    debug_assert!(id.0 >= 1);
    ((id.0 - 1) / 3) as usize
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("proximity matrix for {concept} is not square: {rows}x{cols}")]
    NotSquare {
        concept: ConceptId,
        rows: usize,
        cols: usize,
    },
    #[error("negative entry at ({row}, {col}) in {concept} proximity matrix")]
    NegativeEntry {
        concept: ConceptId,
        row: usize,
        col: usize,
    },
    #[error("asymmetric entry at ({row}, {col}) in {concept} proximity matrix")]
    Asymmetric {
        concept: ConceptId,
        row: usize,
        col: usize,
    },
    #[error("nonzero diagonal at ({0}, {0})", idx)]
    NonzeroDiagonal { idx: usize },
    #[error("non-binary entry {value} at ({row}, {col}) in {row_concept}-{col_concept} relation matrix")]
    NonBinaryEntry {
        row_concept: ConceptId,
        col_concept: ConceptId,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("relation matrix must pair two distinct concepts, got {0}")]
    SameConcept(ConceptId),
}

/// Homogeneous similarity input P_i: square, symmetric, non-negative, zero
/// diagonal.
#[derive(Debug, Clone)]
pub struct ProximityMatrix<F> {
    pub concept: ConceptId,
    matrix: Matrix<F>,
}

impl<F: Scalar> ProximityMatrix<F> {
    pub fn new(concept: ConceptId, matrix: Matrix<F>) -> Result<Self, NetworkError> {
        if matrix.rows() != matrix.cols() {
            return Err(NetworkError::NotSquare {
                concept,
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        for (r, c, v) in matrix.iter_nonzero() {
            if v < F::zero() {
                return Err(NetworkError::NegativeEntry {
                    concept,
                    row: r,
                    col: c,
                });
            }
            if r == c {
                return Err(NetworkError::NonzeroDiagonal { idx: r });
            }
        }
        if let Some((r, c)) = matrix.find_asymmetry() {
            return Err(NetworkError::Asymmetric {
                concept,
                row: r,
                col: c,
            });
        }
        Ok(ProximityMatrix { concept, matrix })
    }

    /// Ingest path: drops any self-similarity on the diagonal, then checks
    /// the remaining invariants.
    pub fn from_similarity(concept: ConceptId, matrix: Matrix<F>) -> Result<Self, NetworkError> {
        if matrix.rows() != matrix.cols() {
            return Err(NetworkError::NotSquare {
                concept,
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let cleaned = Matrix::from_triplets(
            matrix.rows(),
            matrix.cols(),
            matrix.iter_nonzero().filter(|&(r, c, _)| r != c).collect(),
        );
        Self::new(concept, cleaned)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }
}

/// Heterogeneous relation input R_{i,j}: binary entries across two distinct
/// concepts.
#[derive(Debug, Clone)]
pub struct RelationMatrix<F> {
    pub row_concept: ConceptId,
    pub col_concept: ConceptId,
    matrix: Matrix<F>,
}

impl<F: Scalar> RelationMatrix<F> {
    pub fn new(
        row_concept: ConceptId,
        col_concept: ConceptId,
        matrix: Matrix<F>,
    ) -> Result<Self, NetworkError> {
        if row_concept == col_concept {
            return Err(NetworkError::SameConcept(row_concept));
        }
        for (r, c, v) in matrix.iter_nonzero() {
            if v != F::one() {
                return Err(NetworkError::NonBinaryEntry {
                    row_concept,
                    col_concept,
                    row: r,
                    col: c,
                    value: v.as_f64(),
                });
            }
        }
        Ok(RelationMatrix {
            row_concept,
            col_concept,
            matrix,
        })
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }
}

fn inv_sqrt_or_zero<F: Scalar>(d: F) -> F {
    if d > F::zero() {
        F::one() / d.sqrt()
    } else {
        F::zero()
    }
}

/// Symmetric degree normalization S = D^{-1/2} P D^{-1/2}; zero-degree rows
/// and columns stay zero so isolated entities are representable.
pub fn normalize_homogeneous<F: Scalar>(p: &ProximityMatrix<F>) -> Matrix<F> {
    let scale: Vec<F> = p
        .matrix()
        .row_sums()
        .into_iter()
        .map(inv_sqrt_or_zero)
        .collect();
    p.matrix().scale_rows_cols(&scale, &scale)
}

/// Bipartite degree normalization S = D_r^{-1/2} R D_c^{-1/2} with row-sum
/// and column-sum degrees.
pub fn normalize_heterogeneous<F: Scalar>(r: &RelationMatrix<F>) -> Matrix<F> {
    let row_scale: Vec<F> = r
        .matrix()
        .row_sums()
        .into_iter()
        .map(inv_sqrt_or_zero)
        .collect();
    let col_scale: Vec<F> = r
        .matrix()
        .col_sums()
        .into_iter()
        .map(inv_sqrt_or_zero)
        .collect();
    r.matrix().scale_rows_cols(&row_scale, &col_scale)
}

/// Estimates the spectral radius of a symmetric matrix by power iteration.
pub fn spectral_radius_symmetric<F: Scalar>(m: &Matrix<F>, iters: usize) -> F {
    debug_assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    if n == 0 {
        return F::zero();
    }
    let mut x = vec![F::one() / F::cast(n as f64); n];
    let mut y = vec![F::zero(); n];
    let mut lambda = F::zero();
    for i in 0..iters {
        // deterministic perturbation so we do not start orthogonal to the
        // dominant eigenvector
        if i == 0 {
            for (k, v) in x.iter_mut().enumerate() {
                *v += F::cast(1e-3 * ((k % 7) as f64 + 1.0));
            }
        }
        m.matvec(&x, &mut y);
        let norm = y.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if norm == F::zero() {
            return F::zero();
        }
        for v in y.iter_mut() {
            *v /= norm;
        }
        lambda = norm;
        std::mem::swap(&mut x, &mut y);
    }
    lambda
}

/// Estimates the largest singular value via power iteration on AᵀA.
pub fn largest_singular_value<F: Scalar>(m: &Matrix<F>, iters: usize) -> F {
    let n = m.cols();
    if n == 0 || m.rows() == 0 {
        return F::zero();
    }
    let mut x = vec![F::one() / F::cast(n as f64); n];
    for (k, v) in x.iter_mut().enumerate() {
        *v += F::cast(1e-3 * ((k % 5) as f64 + 1.0));
    }
    let mut ax = vec![F::zero(); m.rows()];
    let mut atax = vec![F::zero(); n];
    let mut sigma2 = F::zero();
    for _ in 0..iters {
        m.matvec(&x, &mut ax);
        m.matvec_transpose(&ax, &mut atax);
        let norm = atax.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if norm == F::zero() {
            return F::zero();
        }
        for v in atax.iter_mut() {
            *v /= norm;
        }
        sigma2 = norm;
        std::mem::swap(&mut x, &mut atax);
    }
    sigma2.sqrt()
}

/// Normalized three-concept network: entity registries, three homogeneous
/// matrices S_i, and three heterogeneous matrices S_{i,j} for the canonical
/// pairs (drug,disease), (drug,target), (disease,target). The transposed
/// direction of each pair is stored too so row iteration is cheap both ways.
#[derive(Debug, Clone)]
pub struct HeterogeneousNetwork<F> {
    registries: [Vec<String>; 3],
    homo: [Matrix<F>; 3],
    hetero: [Matrix<F>; 3],
    hetero_t: [Matrix<F>; 3],
}

/// Canonical heterogeneous pairs in storage order.
pub const HETERO_PAIRS: [(ConceptId, ConceptId); 3] = [
    (ConceptId::Drug, ConceptId::Disease),
    (ConceptId::Drug, ConceptId::Target),
    (ConceptId::Disease, ConceptId::Target),
];

fn hetero_slot(a: ConceptId, b: ConceptId) -> usize {
    match (a, b) {
        (ConceptId::Drug, ConceptId::Disease) | (ConceptId::Disease, ConceptId::Drug) => 0,
        (ConceptId::Drug, ConceptId::Target) | (ConceptId::Target, ConceptId::Drug) => 1,
        (ConceptId::Disease, ConceptId::Target) | (ConceptId::Target, ConceptId::Disease) => 2,
        _ => panic!("heterogeneous pair requires distinct concepts"),
    }
}

impl<F: Scalar> HeterogeneousNetwork<F> {
    pub fn new(
        registries: [Vec<String>; 3],
        homo: [Matrix<F>; 3],
        hetero: [Matrix<F>; 3],
    ) -> Self {
        let hetero_t = [
            hetero[0].transpose(),
            hetero[1].transpose(),
            hetero[2].transpose(),
        ];
        HeterogeneousNetwork {
            registries,
            homo,
            hetero,
            hetero_t,
        }
    }

    pub fn registry(&self, c: ConceptId) -> &[String] {
        &self.registries[c.index()]
    }

    pub fn n(&self, c: ConceptId) -> usize {
        self.registries[c.index()].len()
    }

    pub fn vertex_count(&self) -> usize {
        self.registries.iter().map(|r| r.len()).sum()
    }

    /// Normalized homogeneous matrix S_i.
    pub fn homo(&self, c: ConceptId) -> &Matrix<F> {
        &self.homo[c.index()]
    }

    /// Normalized heterogeneous matrix S_{a,b}; the transposed pair is served
    /// from the precomputed transpose.
    pub fn hetero(&self, a: ConceptId, b: ConceptId) -> &Matrix<F> {
        let slot = hetero_slot(a, b);
        if (a, b) == HETERO_PAIRS[slot] {
            &self.hetero[slot]
        } else {
            &self.hetero_t[slot]
        }
    }

    /// All vertex ids in ascending order.
    pub fn vertex_ids(&self) -> Vec<VertexId> {
        let mut ids: Vec<VertexId> = ConceptId::ALL
            .iter()
            .flat_map(|&c| (0..self.n(c)).map(move |i| vertex_id(c, i)))
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Looks an entity up by name within one concept registry.
    pub fn entity_index(&self, c: ConceptId, name: &str) -> Option<usize> {
        self.registry(c).iter().position(|n| n == name)
    }
}

/// One violated invariant; violations are data, not faults.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub matrix: String,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.matrix, self.rule)?;
        if let (Some(r), Some(c)) = (self.row, self.col) {
            write!(f, " at ({r}, {c})")?;
        }
        Ok(())
    }
}

const SPECTRAL_SLACK: f64 = 1e-9;
const POWER_ITERS: usize = 200;

/// Checks every invariant of [`HeterogeneousNetwork`]; an empty report means
/// the network is well formed.
pub fn validate_network<F: Scalar>(net: &HeterogeneousNetwork<F>) -> Vec<Violation> {
    let mut report = Vec::new();
    let bound = F::cast(1.0 + SPECTRAL_SLACK);

    for c in ConceptId::ALL {
        let name = format!("{}-{} similarity", c, c);
        let m = net.homo(c);
        if m.rows() != m.cols() {
            report.push(Violation {
                matrix: name.clone(),
                row: None,
                col: None,
                rule: format!("matrix must be square, got {}x{}", m.rows(), m.cols()),
            });
            continue;
        }
        if m.rows() != net.n(c) {
            report.push(Violation {
                matrix: name.clone(),
                row: None,
                col: None,
                rule: format!(
                    "registry length {} does not match matrix dimension {}",
                    net.n(c),
                    m.rows()
                ),
            });
        }
        if let Some((r, cidx)) = m.find_asymmetry() {
            report.push(Violation {
                matrix: name.clone(),
                row: Some(r),
                col: Some(cidx),
                rule: "matrix must be symmetric".into(),
            });
        }
        for (r, cidx, v) in m.iter_nonzero() {
            if v < F::zero() {
                report.push(Violation {
                    matrix: name.clone(),
                    row: Some(r),
                    col: Some(cidx),
                    rule: "entries must be non-negative".into(),
                });
                break;
            }
        }
        if m.rows() == m.cols() && spectral_radius_symmetric(m, POWER_ITERS) > bound {
            report.push(Violation {
                matrix: name,
                row: None,
                col: None,
                rule: "spectral radius exceeds 1".into(),
            });
        }
    }

    for (slot, &(a, b)) in HETERO_PAIRS.iter().enumerate() {
        let name = format!("{}-{} relation", a, b);
        let m = &net.hetero[slot];
        if m.rows() != net.n(a) || m.cols() != net.n(b) {
            report.push(Violation {
                matrix: name.clone(),
                row: None,
                col: None,
                rule: format!(
                    "registry lengths {}x{} do not match matrix dimensions {}x{}",
                    net.n(a),
                    net.n(b),
                    m.rows(),
                    m.cols()
                ),
            });
        }
        for (r, cidx, v) in m.iter_nonzero() {
            if v < F::zero() {
                report.push(Violation {
                    matrix: name.clone(),
                    row: Some(r),
                    col: Some(cidx),
                    rule: "entries must be non-negative".into(),
                });
                break;
            }
        }
        if largest_singular_value(m, POWER_ITERS) > bound {
            report.push(Violation {
                matrix: name,
                row: None,
                col: None,
                rule: "largest singular value exceeds 1".into(),
            });
        }
    }

    report
}
