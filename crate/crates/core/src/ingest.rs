//! Preprocessing into the engine input: parse the six matrices, homogenize
//! entity dimensions per concept, assign vertex ids, assemble the normalized
//! network, and serialize the graph plus its name registry.
//!
//! File formats (UTF-8, LF):
//! * matrix TSV — first row column names, first column row names;
//! * engine input — one vertex per line: `id \t concept \t nbr,weight ...`;
//! * registry sidecar — `id \t concept \t name` per vertex.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::hetnet::{
    concept_of, normalize_heterogeneous, normalize_homogeneous, validate_network, vertex_id,
    ConceptId, HeterogeneousNetwork, NetworkError, ProximityMatrix, RelationMatrix, VertexId,
    Violation, HETERO_PAIRS,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Kind { path: String, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("network validation failed with {count} violation(s); first: {first}")]
    Validation { count: usize, first: String },
    #[error("{path}:{line}: duplicate vertex id {id}")]
    DuplicateVertex {
        path: String,
        line: usize,
        id: u64,
    },
    #[error("{path}: vertex {id} references unknown neighbor {neighbor}")]
    DanglingNeighbor { path: String, id: u64, neighbor: u64 },
    #[error("{path}: adjacency of {a} and {b} is not mirrored")]
    NotMirrored { path: String, a: u64, b: u64 },
}

fn io_err(path: &Path, source: io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Expected content of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Similarity,
    Association,
}

/// A value matrix carrying its row and column entity names.
#[derive(Debug, Clone)]
pub struct NamedMatrix<F> {
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub values: Matrix<F>,
}

impl<F: Scalar> NamedMatrix<F> {
    pub fn new(row_names: Vec<String>, col_names: Vec<String>, values: Matrix<F>) -> Self {
        assert_eq!(row_names.len(), values.rows());
        assert_eq!(col_names.len(), values.cols());
        NamedMatrix {
            row_names,
            col_names,
            values,
        }
    }

    /// Sum of all entries; homogenization must preserve it.
    pub fn total(&self) -> F {
        self.values.iter_nonzero().map(|(_, _, v)| v).sum()
    }
}

/// Parses a named matrix from TSV and checks it against the expected kind:
/// similarity matrices must be square and symmetric, association matrices
/// binary.
pub fn parse_matrix<F: Scalar>(path: &Path, kind: MatrixKind) -> Result<NamedMatrix<F>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let nm = parse_named_matrix(path, &text)?;
    check_kind(path, &nm, kind)?;
    Ok(nm)
}

/// Format-only parse, shared with prediction-matrix readers.
pub fn parse_named_matrix<F: Scalar>(path: &Path, text: &str) -> Result<NamedMatrix<F>, IngestError> {
    let pathstr = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| IngestError::Parse {
        path: pathstr.clone(),
        line: 1,
        reason: "empty file".into(),
    })?;
    let mut header_fields = header.split('\t');
    header_fields.next(); // corner cell
    let col_names: Vec<String> = header_fields.map(str::to_owned).collect();
    if col_names.is_empty() {
        return Err(IngestError::Parse {
            path: pathstr,
            line: 1,
            reason: "header has no column names".into(),
        });
    }
    let mut row_names = Vec::new();
    let mut triplets = Vec::new();
    let mut row = 0usize;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let name = fields.next().unwrap_or_default();
        if name.is_empty() {
            return Err(IngestError::Parse {
                path: pathstr,
                line: idx + 1,
                reason: "missing row name".into(),
            });
        }
        row_names.push(name.to_owned());
        let mut count = 0usize;
        for (col, field) in fields.enumerate() {
            let value: F = field.trim().parse().map_err(|_| IngestError::Parse {
                path: pathstr.clone(),
                line: idx + 1,
                reason: format!("not a number: {field:?}"),
            })?;
            if col >= col_names.len() {
                return Err(IngestError::Parse {
                    path: pathstr.clone(),
                    line: idx + 1,
                    reason: format!("row has more than {} values", col_names.len()),
                });
            }
            if value != F::zero() {
                triplets.push((row, col, value));
            }
            count += 1;
        }
        if count != col_names.len() {
            return Err(IngestError::Parse {
                path: pathstr,
                line: idx + 1,
                reason: format!("expected {} values, found {count}", col_names.len()),
            });
        }
        row += 1;
    }
    if row == 0 {
        return Err(IngestError::Parse {
            path: pathstr,
            line: 1,
            reason: "no data rows".into(),
        });
    }
    check_unique(&pathstr, &row_names, "row")?;
    check_unique(&pathstr, &col_names, "column")?;
    let values = Matrix::from_triplets(row, col_names.len(), triplets);
    Ok(NamedMatrix::new(row_names, col_names, values))
}

fn check_unique(path: &str, names: &[String], axis: &str) -> Result<(), IngestError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(IngestError::Kind {
                path: path.to_owned(),
                reason: format!("duplicate {axis} name {n:?}"),
            });
        }
    }
    Ok(())
}

fn check_kind<F: Scalar>(
    path: &Path,
    nm: &NamedMatrix<F>,
    kind: MatrixKind,
) -> Result<(), IngestError> {
    let pathstr = path.display().to_string();
    match kind {
        MatrixKind::Similarity => {
            if nm.row_names != nm.col_names {
                return Err(IngestError::Kind {
                    path: pathstr,
                    reason: "similarity matrix must have identical row and column names".into(),
                });
            }
            if let Some((r, c)) = nm.values.find_asymmetry() {
                return Err(IngestError::Kind {
                    path: pathstr,
                    reason: format!("similarity matrix is asymmetric at ({r}, {c})"),
                });
            }
            if let Some((r, c, v)) = nm.values.iter_nonzero().find(|&(_, _, v)| v < F::zero()) {
                return Err(IngestError::Kind {
                    path: pathstr,
                    reason: format!("negative similarity {v} at ({r}, {c})"),
                });
            }
        }
        MatrixKind::Association => {
            if let Some((r, c, v)) = nm.values.iter_nonzero().find(|&(_, _, v)| v != F::one()) {
                return Err(IngestError::Kind {
                    path: pathstr,
                    reason: format!("association entry must be 0 or 1, got {v} at ({r}, {c})"),
                });
            }
        }
    }
    Ok(())
}

/// Serializes a named matrix with exact (17 significant digit) values.
pub fn write_matrix<F: Scalar>(nm: &NamedMatrix<F>, path: &Path) -> Result<(), IngestError> {
    let mut out = String::new();
    for name in &nm.col_names {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (r, name) in nm.row_names.iter().enumerate() {
        out.push_str(name);
        for v in nm.values.dense_row(r) {
            let _ = write!(out, "\t{}", fmt_weight(v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// 17 significant digits: enough for an exact `f64` round trip.
pub fn fmt_weight<F: Scalar>(v: F) -> String {
    if v == F::zero() {
        "0".to_owned()
    } else {
        format!("{v:.16e}")
    }
}

/// The six input matrices in a fixed order.
#[derive(Debug, Clone)]
pub struct SixMatrices<F> {
    pub drug_sim: NamedMatrix<F>,
    pub disease_sim: NamedMatrix<F>,
    pub target_sim: NamedMatrix<F>,
    pub drug_disease: NamedMatrix<F>,
    pub drug_target: NamedMatrix<F>,
    pub disease_target: NamedMatrix<F>,
}

/// Homogenized inputs: one registry per concept and the six matrices
/// re-indexed against those registries.
#[derive(Debug, Clone)]
pub struct Homogenized<F> {
    pub registries: [Vec<String>; 3],
    pub six: SixMatrices<F>,
}

fn sorted_union(sets: [&[String]; 3]) -> Vec<String> {
    let mut all = BTreeSet::new();
    for s in sets {
        all.extend(s.iter().cloned());
    }
    all.into_iter().collect()
}

fn remap<F: Scalar>(
    nm: &NamedMatrix<F>,
    registry_rows: &[String],
    registry_cols: &[String],
) -> NamedMatrix<F> {
    let row_pos: Vec<usize> = nm
        .row_names
        .iter()
        .map(|n| registry_rows.binary_search(n).expect("name in registry"))
        .collect();
    let col_pos: Vec<usize> = nm
        .col_names
        .iter()
        .map(|n| registry_cols.binary_search(n).expect("name in registry"))
        .collect();
    let triplets: Vec<_> = nm
        .values
        .iter_nonzero()
        .map(|(r, c, v)| (row_pos[r], col_pos[c], v))
        .collect();
    NamedMatrix::new(
        registry_rows.to_vec(),
        registry_cols.to_vec(),
        Matrix::from_triplets(registry_rows.len(), registry_cols.len(), triplets),
    )
}

/// Aligns every concept's entity set across its three source matrices: the
/// registry is the sorted union of distinct names, and each matrix grows
/// zero rows/columns for entities it did not mention. Values are preserved
/// at their mapped positions.
pub fn homogenize_dimensions<F: Scalar>(six: &SixMatrices<F>) -> Homogenized<F> {
    let drugs = sorted_union([
        &six.drug_sim.row_names,
        &six.drug_disease.row_names,
        &six.drug_target.row_names,
    ]);
    let diseases = sorted_union([
        &six.disease_sim.row_names,
        &six.drug_disease.col_names,
        &six.disease_target.row_names,
    ]);
    let targets = sorted_union([
        &six.target_sim.row_names,
        &six.drug_target.col_names,
        &six.disease_target.col_names,
    ]);
    let six = SixMatrices {
        drug_sim: remap(&six.drug_sim, &drugs, &drugs),
        disease_sim: remap(&six.disease_sim, &diseases, &diseases),
        target_sim: remap(&six.target_sim, &targets, &targets),
        drug_disease: remap(&six.drug_disease, &drugs, &diseases),
        drug_target: remap(&six.drug_target, &drugs, &targets),
        disease_target: remap(&six.disease_target, &diseases, &targets),
    };
    Homogenized {
        registries: [drugs, diseases, targets],
        six,
    }
}

/// Full assembly: homogenize, normalize, and validate. The returned network
/// passes [`validate_network`] or the call fails.
pub fn assemble_network<F: Scalar>(
    six: &SixMatrices<F>,
) -> Result<HeterogeneousNetwork<F>, IngestError> {
    let hom = homogenize_dimensions(six);
    let net = assemble_homogenized(&hom)?;
    let report = validate_network(&net);
    if let Some(first) = report.first() {
        return Err(IngestError::Validation {
            count: report.len(),
            first: first.to_string(),
        });
    }
    Ok(net)
}

/// Normalizes already-homogenized matrices into a network without running
/// the validation sweep (used by per-fold rebuilds where inputs are trusted).
pub fn assemble_homogenized<F: Scalar>(
    hom: &Homogenized<F>,
) -> Result<HeterogeneousNetwork<F>, IngestError> {
    let homo_of = |c: ConceptId, nm: &NamedMatrix<F>| -> Result<Matrix<F>, IngestError> {
        let p = ProximityMatrix::from_similarity(c, nm.values.clone())?;
        Ok(normalize_homogeneous(&p))
    };
    let het_of = |a: ConceptId, b: ConceptId, nm: &NamedMatrix<F>| -> Result<Matrix<F>, IngestError> {
        let r = RelationMatrix::new(a, b, nm.values.clone())?;
        Ok(normalize_heterogeneous(&r))
    };
    Ok(HeterogeneousNetwork::new(
        hom.registries.clone(),
        [
            homo_of(ConceptId::Drug, &hom.six.drug_sim)?,
            homo_of(ConceptId::Disease, &hom.six.disease_sim)?,
            homo_of(ConceptId::Target, &hom.six.target_sim)?,
        ],
        [
            het_of(ConceptId::Drug, ConceptId::Disease, &hom.six.drug_disease)?,
            het_of(ConceptId::Drug, ConceptId::Target, &hom.six.drug_target)?,
            het_of(ConceptId::Disease, ConceptId::Target, &hom.six.disease_target)?,
        ],
    ))
}

/// Validation entry point used by the ingest command: assembles without
/// failing on violations and returns the report alongside the network.
pub fn assemble_with_report<F: Scalar>(
    six: &SixMatrices<F>,
) -> Result<(HeterogeneousNetwork<F>, Vec<Violation>), IngestError> {
    let hom = homogenize_dimensions(six);
    let net = assemble_homogenized(&hom)?;
    let report = validate_network(&net);
    Ok((net, report))
}

/// Undirected weighted graph in engine form: every adjacency entry has a
/// mirrored entry of equal weight, and weights are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineGraph<F> {
    vertices: Vec<(VertexId, ConceptId)>,
    adjacency: Vec<Vec<(VertexId, F)>>,
}

impl<F> EngineGraph<F> {
    pub fn from_parts(
        vertices: Vec<(VertexId, ConceptId)>,
        adjacency: Vec<Vec<(VertexId, F)>>,
    ) -> Self {
        assert_eq!(vertices.len(), adjacency.len());
        EngineGraph {
            vertices,
            adjacency,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[(VertexId, ConceptId)] {
        &self.vertices
    }

    pub fn adjacency(&self, idx: usize) -> &[(VertexId, F)] {
        &self.adjacency[idx]
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn index_of(&self, id: VertexId) -> Option<usize> {
        self.vertices
            .binary_search_by_key(&id, |(v, _)| *v)
            .ok()
    }
}

impl<F: Scalar> EngineGraph<F> {
    /// Builds the engine graph from a normalized network: one vertex per
    /// registry entry, one undirected edge per nonzero matrix entry.
    pub fn from_network(net: &HeterogeneousNetwork<F>) -> Self {
        let ids = net.vertex_ids();
        let pos = |id: VertexId| -> usize {
            ids.binary_search(&id).expect("vertex id present")
        };
        let mut adjacency: Vec<Vec<(VertexId, F)>> = vec![Vec::new(); ids.len()];
        for c in ConceptId::ALL {
            for (r, cc, v) in net.homo(c).iter_nonzero() {
                if r < cc {
                    let a = vertex_id(c, r);
                    let b = vertex_id(c, cc);
                    adjacency[pos(a)].push((b, v));
                    adjacency[pos(b)].push((a, v));
                }
            }
        }
        for (a, b) in HETERO_PAIRS {
            for (r, cc, v) in net.hetero(a, b).iter_nonzero() {
                let va = vertex_id(a, r);
                let vb = vertex_id(b, cc);
                adjacency[pos(va)].push((vb, v));
                adjacency[pos(vb)].push((va, v));
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable_by_key(|(id, _)| *id);
        }
        EngineGraph {
            vertices: ids.into_iter().map(|id| (id, concept_of(id))).collect(),
            adjacency,
        }
    }
}

/// Writes the engine input file for a network.
pub fn write_engine_input<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    path: &Path,
) -> Result<(), IngestError> {
    write_engine_graph(&EngineGraph::from_network(net), path)
}

pub fn write_engine_graph<F: Scalar>(
    graph: &EngineGraph<F>,
    path: &Path,
) -> Result<(), IngestError> {
    let mut out = String::new();
    for (idx, (id, concept)) in graph.vertices.iter().enumerate() {
        let _ = write!(out, "{}\t{}", id.0, concept.name());
        for (nbr, w) in &graph.adjacency[idx] {
            let _ = write!(out, "\t{},{}", nbr.0, fmt_weight(*w));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads an engine input file back, re-checking the format invariants
/// (unique ids, no dangling neighbors, mirrored weights).
pub fn read_engine_input<F: Scalar>(path: &Path) -> Result<EngineGraph<F>, IngestError> {
    type Entry<F> = (VertexId, ConceptId, Vec<(VertexId, F)>);
    let pathstr = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut entries: Vec<Entry<F>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id_raw: u64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| IngestError::Parse {
                path: pathstr.clone(),
                line: idx + 1,
                reason: "missing or invalid vertex id".into(),
            })?;
        if id_raw == 0 {
            return Err(IngestError::Parse {
                path: pathstr,
                line: idx + 1,
                reason: "vertex ids start at 1".into(),
            });
        }
        let id = VertexId(id_raw);
        let concept_field = fields.next().ok_or_else(|| IngestError::Parse {
            path: pathstr.clone(),
            line: idx + 1,
            reason: "missing concept".into(),
        })?;
        let concept = ConceptId::from_name(concept_field).ok_or_else(|| IngestError::Parse {
            path: pathstr.clone(),
            line: idx + 1,
            reason: format!("unknown concept {concept_field:?}"),
        })?;
        if concept != concept_of(id) {
            return Err(IngestError::Parse {
                path: pathstr,
                line: idx + 1,
                reason: format!("id {id} does not belong to concept {concept}"),
            });
        }
        let mut adj = Vec::new();
        for pair in fields {
            let (nbr, w) = pair.split_once(',').ok_or_else(|| IngestError::Parse {
                path: pathstr.clone(),
                line: idx + 1,
                reason: format!("malformed neighbor pair {pair:?}"),
            })?;
            let nbr: u64 = nbr.parse().map_err(|_| IngestError::Parse {
                path: pathstr.clone(),
                line: idx + 1,
                reason: format!("invalid neighbor id {nbr:?}"),
            })?;
            let w: F = w.parse().map_err(|_| IngestError::Parse {
                path: pathstr.clone(),
                line: idx + 1,
                reason: format!("invalid weight {w:?}"),
            })?;
            if w <= F::zero() {
                return Err(IngestError::Parse {
                    path: pathstr,
                    line: idx + 1,
                    reason: format!("edge weight must be positive, got {w}"),
                });
            }
            adj.push((VertexId(nbr), w));
        }
        if entries.iter().any(|(other, _, _)| *other == id) {
            return Err(IngestError::DuplicateVertex {
                path: pathstr,
                line: idx + 1,
                id: id.0,
            });
        }
        entries.push((id, concept, adj));
    }
    entries.sort_unstable_by_key(|(id, _, _)| *id);
    let ids: Vec<VertexId> = entries.iter().map(|(id, _, _)| *id).collect();
    let mut graph = EngineGraph {
        vertices: entries.iter().map(|(id, c, _)| (*id, *c)).collect(),
        adjacency: entries.into_iter().map(|(_, _, adj)| adj).collect(),
    };
    for adj in &mut graph.adjacency {
        adj.sort_unstable_by_key(|(id, _)| *id);
    }
    // format invariants
    for (idx, (id, _)) in graph.vertices.iter().enumerate() {
        for (nbr, w) in &graph.adjacency[idx] {
            let Ok(nidx) = ids.binary_search(nbr) else {
                return Err(IngestError::DanglingNeighbor {
                    path: pathstr,
                    id: id.0,
                    neighbor: nbr.0,
                });
            };
            let mirrored = graph.adjacency[nidx]
                .binary_search_by_key(id, |(v, _)| *v)
                .ok()
                .map(|p| graph.adjacency[nidx][p].1);
            if mirrored != Some(*w) {
                return Err(IngestError::NotMirrored {
                    path: pathstr,
                    a: id.0,
                    b: nbr.0,
                });
            }
        }
    }
    Ok(graph)
}

/// Name registry: id, concept, and entity name per vertex.
pub fn write_registry<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    path: &Path,
) -> Result<(), IngestError> {
    let mut rows: Vec<(VertexId, ConceptId, &str)> = Vec::new();
    for c in ConceptId::ALL {
        for (i, name) in net.registry(c).iter().enumerate() {
            rows.push((vertex_id(c, i), c, name));
        }
    }
    rows.sort_unstable_by_key(|(id, _, _)| *id);
    let mut out = String::new();
    for (id, c, name) in rows {
        let _ = writeln!(out, "{}\t{}\t{}", id.0, c.name(), name);
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads the registry sidecar back into per-concept name lists.
pub fn read_registry(path: &Path) -> Result<[Vec<String>; 3], IngestError> {
    let pathstr = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut regs: [Vec<(usize, String)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(concept), Some(name)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(IngestError::Parse {
                path: pathstr,
                line: idx + 1,
                reason: "expected id, concept, name".into(),
            });
        };
        let id: u64 = id.parse().map_err(|_| IngestError::Parse {
            path: pathstr.clone(),
            line: idx + 1,
            reason: format!("invalid id {id:?}"),
        })?;
        let concept = ConceptId::from_name(concept).ok_or_else(|| IngestError::Parse {
            path: pathstr.clone(),
            line: idx + 1,
            reason: format!("unknown concept {concept:?}"),
        })?;
        regs[concept.index()].push((index_of_checked(id)?, name.to_owned()));
    }
    let mut out: [Vec<String>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (slot, mut reg) in regs.into_iter().enumerate() {
        reg.sort_unstable_by_key(|(i, _)| *i);
        out[slot] = reg.into_iter().map(|(_, n)| n).collect();
    }
    Ok(out)
}

fn index_of_checked(id: u64) -> Result<usize, IngestError> {
    Ok(crate::hetnet::index_of(VertexId(id)))
}
