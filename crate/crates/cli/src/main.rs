//! Pipeline driver: ingest six matrices, run a propagation, evaluate with
//! cross-validation, rank candidates, and benchmark scaling. All outputs
//! are TSV; exit codes are 0 (ok), 2 (validation), 3 (I/O), and 4
//! (non-convergence).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use hetlp::dhlp::{
    rank_candidates, run_all_seeds, run_seeds, seed_schedule, symmetrize_outputs, AlgoParams,
    Algorithm, DhlpError, PredictionSet, RawResults,
};
use hetlp::engine::EngineConfig;
use hetlp::eval::{cross_validate, write_cv_report, EvalError};
use hetlp::hetnet::{ConceptId, VertexId};
use hetlp::ingest::{
    assemble_with_report, parse_matrix, parse_named_matrix, read_engine_input, read_registry,
    write_engine_input, write_registry, EngineGraph, IngestError, MatrixKind, SixMatrices,
};
use hetlp::netgen::{generate, write_tsv_set, GenSpec};
use hetlp::Weight;

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NON_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "hetlp", version, about = "Label propagation over drug/disease/target networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// The six input matrix paths.
#[derive(Args, Clone)]
struct MatrixPaths {
    #[arg(long)]
    drug_sim: PathBuf,
    #[arg(long)]
    disease_sim: PathBuf,
    #[arg(long)]
    target_sim: PathBuf,
    #[arg(long)]
    drug_disease: PathBuf,
    #[arg(long)]
    drug_target: PathBuf,
    #[arg(long)]
    disease_target: PathBuf,
}

#[derive(Args, Clone)]
struct RunParams {
    #[arg(long, default_value = "dhlp2")]
    algo: Algorithm,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 8)]
    partitions: usize,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
    #[arg(long, default_value_t = 100_000)]
    max_supersteps: u64,
}

impl RunParams {
    fn algo_params(&self) -> Result<AlgoParams<Weight>, DhlpError> {
        AlgoParams::new(self.alpha, self.sigma)
    }

    fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            partitions: self.partitions.max(self.parallelism),
            parallelism: self.parallelism,
            deterministic: self.deterministic,
            max_supersteps: self.max_supersteps,
            aggregators: Vec::new(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse, homogenize, normalize, and serialize the engine input.
    Ingest {
        #[command(flatten)]
        matrices: MatrixPaths,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a propagation over an ingested graph and write raw results, the
    /// six prediction matrices, and a run summary.
    Run {
        /// Directory produced by `ingest` (graph.tsv + registry.tsv).
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        params: RunParams,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate on the six raw matrices and write a CV report.
    Eval {
        #[command(flatten)]
        matrices: MatrixPaths,
        #[command(flatten)]
        params: RunParams,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Fold-split RNG seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank candidate interactions for one entity from a finished run.
    Topk {
        /// Directory produced by `run`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        entity: String,
        #[arg(long)]
        concept: String,
        #[arg(long, default_value_t = 20)]
        k: usize,
        /// Write the list here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time synthetic workloads across a parallelism grid.
    Bench {
        /// Target undirected edge counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1000000")]
        edges: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        parallelism: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Supersteps per timed run.
        #[arg(long, default_value_t = 8)]
        supersteps: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic six-matrix set in the ingest TSV format.
    Gen {
        #[arg(long, default_value_t = 100)]
        drugs: usize,
        #[arg(long, default_value_t = 100)]
        diseases: usize,
        #[arg(long, default_value_t = 100)]
        targets: usize,
        #[arg(long, default_value_t = 0.1)]
        homo_density: f64,
        #[arg(long, default_value_t = 0.05)]
        hetero_density: f64,
        #[arg(long, default_value_t = 0)]
        blocks: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

struct CommandError {
    code: u8,
    message: String,
}

impl CommandError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CommandError {
            code,
            message: message.into(),
        }
    }
}

impl From<IngestError> for CommandError {
    fn from(err: IngestError) -> Self {
        let code = match &err {
            IngestError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CommandError::new(code, err.to_string())
    }
}

impl From<DhlpError> for CommandError {
    fn from(err: DhlpError) -> Self {
        let code = match &err {
            DhlpError::Io(IngestError::Io { .. }) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CommandError::new(code, err.to_string())
    }
}

impl From<EvalError> for CommandError {
    fn from(err: EvalError) -> Self {
        let code = match &err {
            EvalError::Ingest(IngestError::Io { .. }) => EXIT_IO,
            EvalError::Propagation(DhlpError::Io(IngestError::Io { .. })) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CommandError::new(code, err.to_string())
    }
}

fn mkdir(path: &Path) -> Result<(), CommandError> {
    fs::create_dir_all(path)
        .map_err(|e| CommandError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), CommandError> {
    fs::write(path, content)
        .map_err(|e| CommandError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn load_six(paths: &MatrixPaths) -> Result<SixMatrices<Weight>, CommandError> {
    Ok(SixMatrices {
        drug_sim: parse_matrix(&paths.drug_sim, MatrixKind::Similarity)?,
        disease_sim: parse_matrix(&paths.disease_sim, MatrixKind::Similarity)?,
        target_sim: parse_matrix(&paths.target_sim, MatrixKind::Similarity)?,
        drug_disease: parse_matrix(&paths.drug_disease, MatrixKind::Association)?,
        drug_target: parse_matrix(&paths.drug_target, MatrixKind::Association)?,
        disease_target: parse_matrix(&paths.disease_target, MatrixKind::Association)?,
    })
}

fn dispatch(command: Command) -> Result<(), CommandError> {
    match command {
        Command::Ingest { matrices, out } => cmd_ingest(&matrices, &out),
        Command::Run { input, params, out } => cmd_run(&input, &params, &out),
        Command::Eval {
            matrices,
            params,
            folds,
            seed,
            out,
        } => cmd_eval(&matrices, &params, folds, seed, &out),
        Command::Topk {
            run,
            entity,
            concept,
            k,
            out,
        } => cmd_topk(&run, &entity, &concept, k, out.as_deref()),
        Command::Bench {
            edges,
            parallelism,
            seed,
            supersteps,
            out,
        } => cmd_bench(&edges, &parallelism, seed, supersteps, &out),
        Command::Gen {
            drugs,
            diseases,
            targets,
            homo_density,
            hetero_density,
            blocks,
            seed,
            out,
        } => cmd_gen(
            drugs,
            diseases,
            targets,
            homo_density,
            hetero_density,
            blocks,
            seed,
            &out,
        ),
    }
}

fn cmd_ingest(matrices: &MatrixPaths, out: &Path) -> Result<(), CommandError> {
    let six = load_six(matrices)?;
    let (net, report) = assemble_with_report(&six)?;
    mkdir(out)?;
    let mut report_text = String::new();
    for violation in &report {
        let _ = writeln!(report_text, "{violation}");
    }
    write_file(&out.join("validation-report.tsv"), &report_text)?;
    if !report.is_empty() {
        return Err(CommandError::new(
            EXIT_VALIDATION,
            format!(
                "network validation failed with {} violation(s); see {}",
                report.len(),
                out.join("validation-report.tsv").display()
            ),
        ));
    }
    write_engine_input(&net, &out.join("graph.tsv"))?;
    write_registry(&net, &out.join("registry.tsv"))?;
    println!(
        "ingested {} vertices, {} edges",
        net.vertex_count(),
        EngineGraph::from_network(&net).edge_count()
    );
    Ok(())
}

fn write_run_outputs(
    out: &Path,
    raw: &RawResults<Weight>,
    pred: &PredictionSet<Weight>,
    params: &RunParams,
    wall_ms: u128,
) -> Result<(), CommandError> {
    hetlp::dhlp::write_raw_results(raw, &out.join("raw-results.tsv"))?;
    hetlp::dhlp::write_prediction_set(pred, out)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "algorithm\t{}", params.algo);
    let _ = writeln!(summary, "alpha\t{}", params.alpha);
    let _ = writeln!(summary, "sigma\t{}", params.sigma);
    let _ = writeln!(summary, "partitions\t{}", params.partitions);
    let _ = writeln!(summary, "parallelism\t{}", params.parallelism);
    let _ = writeln!(summary, "deterministic\t{}", params.deterministic);
    let _ = writeln!(summary, "max_supersteps\t{}", params.max_supersteps);
    let _ = writeln!(summary, "supersteps\t{}", raw.total_supersteps);
    let _ = writeln!(summary, "wall_ms\t{wall_ms}");
    let _ = writeln!(summary, "converged\t{}", raw.converged);
    write_file(&out.join("summary.tsv"), &summary)?;
    let mut seeds = String::from("seed\tsupersteps\n");
    for (seed, steps) in &raw.per_seed_supersteps {
        let _ = writeln!(seeds, "{}\t{steps}", seed.0);
    }
    write_file(&out.join("seed-supersteps.tsv"), &seeds)?;
    Ok(())
}

fn cmd_run(input: &Path, params: &RunParams, out: &Path) -> Result<(), CommandError> {
    let graph: EngineGraph<Weight> = read_engine_input(&input.join("graph.tsv"))?;
    let registries = read_registry(&input.join("registry.tsv"))?;
    let algo_params = params.algo_params()?;
    let config = params.engine_config();
    mkdir(out)?;

    let start = Instant::now();
    let raw = run_all_seeds(&graph, params.algo, &algo_params, &config)?;
    let wall_ms = start.elapsed().as_millis();

    if !raw.converged {
        let seed = raw
            .non_converged_seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "unknown".into());
        return Err(CommandError::new(
            EXIT_NON_CONVERGED,
            format!(
                "superstep cap {} reached while seed {seed} was in flight",
                params.max_supersteps
            ),
        ));
    }

    let mut pred = symmetrize_outputs(&raw, &registries)?;
    pred.mark_known(&graph);
    write_run_outputs(out, &raw, &pred, params, wall_ms)?;
    // carried along so `topk` can re-label and flag candidates
    fs::copy(input.join("graph.tsv"), out.join("graph.tsv"))
        .map_err(|e| CommandError::new(EXIT_IO, e.to_string()))?;
    fs::copy(input.join("registry.tsv"), out.join("registry.tsv"))
        .map_err(|e| CommandError::new(EXIT_IO, e.to_string()))?;
    println!(
        "{} finished: {} supersteps over {} seeds in {wall_ms} ms",
        params.algo,
        raw.total_supersteps,
        raw.schedule.len()
    );
    Ok(())
}

fn cmd_eval(
    matrices: &MatrixPaths,
    params: &RunParams,
    folds: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CommandError> {
    let six = load_six(matrices)?;
    let algo_params = params.algo_params()?;
    let config = params.engine_config();
    let report = cross_validate(&six, params.algo, &algo_params, &config, folds, seed)?;
    mkdir(out)?;
    write_cv_report(&report, &out.join("cv-report.tsv"))?;
    for rel in &report.relations {
        println!(
            "{}-{} {}: AUC {:.4}  AUPR {:.4}  BestAcc {:.4}",
            rel.relation.0,
            rel.relation.1,
            report.algorithm,
            rel.mean.auc,
            rel.mean.aupr,
            rel.mean.best_acc
        );
    }
    Ok(())
}

fn cmd_topk(
    run: &Path,
    entity: &str,
    concept: &str,
    k: usize,
    out: Option<&Path>,
) -> Result<(), CommandError> {
    let target_concept = ConceptId::from_name(concept)
        .ok_or_else(|| CommandError::new(EXIT_VALIDATION, format!("unknown concept {concept:?}")))?;
    let registries = read_registry(&run.join("registry.tsv"))?;
    let graph: EngineGraph<Weight> = read_engine_input(&run.join("graph.tsv"))?;

    // locate the entity by name in any registry
    let mut entity_id: Option<VertexId> = None;
    for c in ConceptId::ALL {
        if let Some(idx) = registries[c.index()].iter().position(|n| n == entity) {
            entity_id = Some(hetlp::hetnet::vertex_id(c, idx));
            break;
        }
    }
    let entity_id = entity_id
        .ok_or_else(|| CommandError::new(EXIT_VALIDATION, format!("unknown entity {entity:?}")))?;

    let pred = read_prediction_set(run, &registries, &graph)?;
    let ranked = rank_candidates(&pred, entity_id, target_concept, k)?;
    let mut text = String::from("rank\tname\tscore\tknown\n");
    for (i, cand) in ranked.iter().enumerate() {
        let _ = writeln!(
            text,
            "{}\t{}\t{:.6e}\t{}",
            i + 1,
            cand.name,
            cand.score,
            if cand.known { "known" } else { "novel" }
        );
    }
    match out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_prediction_set(
    run: &Path,
    registries: &[Vec<String>; 3],
    graph: &EngineGraph<Weight>,
) -> Result<PredictionSet<Weight>, CommandError> {
    let mut blocks = Vec::new();
    for (a, b) in hetlp::dhlp::OUTPUT_PAIRS {
        let path = run.join(format!("{}-{}.tsv", a.name(), b.name()));
        let text = fs::read_to_string(&path)
            .map_err(|e| CommandError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
        let nm = parse_named_matrix::<Weight>(&path, &text)?;
        blocks.push((a, b, nm));
    }
    let mut pred = PredictionSet::from_blocks(
        registries.clone(),
        blocks
            .into_iter()
            .map(|(a, b, nm)| (a, b, nm.values))
            .collect(),
    )
    .map_err(CommandError::from)?;
    pred.mark_known(graph);
    Ok(pred)
}

fn cmd_bench(
    edge_targets: &[usize],
    parallelism: &[usize],
    seed: u64,
    supersteps: u64,
    out: &Path,
) -> Result<(), CommandError> {
    let mut table = String::from("edges\trealized_edges\tparallelism\twall_ms\tspeedup_vs_first\n");
    for &edges in edge_targets {
        // densities fixed, concept size solved from the expected edge count
        let homo = 0.2f64;
        let hetero = 0.15f64;
        let n = ((edges as f64) / (1.5 * homo / 2.0 + 3.0 * hetero)).sqrt().ceil() as usize;
        let gen = generate::<Weight>(&GenSpec {
            n_drugs: n,
            n_diseases: n,
            n_targets: n,
            homo_density: homo,
            hetero_density: hetero,
            blocks: 0,
            rng_seed: seed,
        });
        let graph = EngineGraph::from_network(&gen.network);
        let realized = graph.edge_count();
        let params = AlgoParams::new(0.5, 1e-12).map_err(CommandError::from)?;
        let seeds = vec![seed_schedule(&graph)[0]];
        let mut first_wall: Option<f64> = None;
        for &par in parallelism {
            let config = EngineConfig {
                partitions: 64.max(par),
                parallelism: par,
                deterministic: false,
                max_supersteps: supersteps,
                aggregators: Vec::new(),
            };
            let start = Instant::now();
            let raw = run_seeds(&graph, Algorithm::Dhlp2, &params, &config, seeds.clone())?;
            let wall = start.elapsed().as_secs_f64() * 1000.0;
            let _ = raw;
            let speedup = match first_wall {
                None => {
                    first_wall = Some(wall);
                    1.0
                }
                Some(first) => first / wall,
            };
            let _ = writeln!(
                table,
                "{edges}\t{realized}\t{par}\t{wall:.1}\t{speedup:.3}"
            );
            println!("edges={realized} parallelism={par}: {wall:.1} ms (speedup {speedup:.2})");
        }
    }
    write_file(out, &table)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    drugs: usize,
    diseases: usize,
    targets: usize,
    homo_density: f64,
    hetero_density: f64,
    blocks: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CommandError> {
    let spec = GenSpec {
        n_drugs: drugs,
        n_diseases: diseases,
        n_targets: targets,
        homo_density,
        hetero_density,
        blocks,
        rng_seed: seed,
    };
    spec.validate()
        .map_err(|e| CommandError::new(EXIT_VALIDATION, e))?;
    let gen = generate::<Weight>(&spec);
    mkdir(out)?;
    write_tsv_set(&gen.six, out)?;
    println!(
        "generated {} vertices, {} raw edges",
        gen.network.vertex_count(),
        hetlp::netgen::raw_edge_count(&gen.six)
    );
    Ok(())
}
