//! Sequential matrix-form reference implementations of the two label
//! propagation iterations, used as ground truth for engine equivalence
//! tests. Updates are synchronous (Jacobi style) to mirror superstep
//! message timing: every right-hand side reads the previous iteration's
//! values. Convergence is declared when every entry moved less than sigma
//! in the same iteration, matching the per-vertex end votes.

use crate::dhlp::{Algorithm, AlgoParams, RawResults};
use crate::hetnet::{vertex_id, ConceptId, HeterogeneousNetwork, VertexId};
use crate::scalar::Scalar;

/// Per-subnetwork label vectors plus the fixed one-hot seed indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelState<F> {
    pub f: [Vec<F>; 3],
    pub y: [Vec<F>; 3],
}

impl<F: Scalar> LabelState<F> {
    /// Unit label at `seed`, zero elsewhere; f starts as a copy of y.
    pub fn seeded(net: &HeterogeneousNetwork<F>, seed: VertexId) -> Self {
        let mut y = [
            vec![F::zero(); net.n(ConceptId::Drug)],
            vec![F::zero(); net.n(ConceptId::Disease)],
            vec![F::zero(); net.n(ConceptId::Target)],
        ];
        y[seed.concept().index()][seed.index()] = F::one();
        LabelState { f: y.clone(), y }
    }

    pub fn label(&self, id: VertexId) -> F {
        self.f[id.concept().index()][id.index()]
    }

    pub fn max_abs_diff(&self, other: &LabelState<F>) -> F {
        let mut max = F::zero();
        for i in 0..3 {
            for (a, b) in self.f[i].iter().zip(other.f[i].iter()) {
                let d = (*a - *b).abs();
                // NaN (from a diverged iteration) must poison the residual,
                // not vanish in the comparison
                if d.is_nan() {
                    return F::nan();
                }
                if d > max {
                    max = d;
                }
            }
        }
        max
    }
}

#[derive(Debug, Clone)]
pub struct OracleRun<F> {
    pub state: LabelState<F>,
    pub iterations: u64,
    pub converged: bool,
}

fn hetero_sum<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    concept: ConceptId,
    row: usize,
    values: &[Vec<F>; 3],
) -> F {
    let mut acc = F::zero();
    for other in ConceptId::ALL {
        if other == concept {
            continue;
        }
        for (col, w) in net.hetero(concept, other).row_nonzero(row) {
            acc += w * values[other.index()][col];
        }
    }
    acc
}

fn homo_sum<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    concept: ConceptId,
    row: usize,
    values: &[Vec<F>; 3],
) -> F {
    let mut acc = F::zero();
    for (col, w) in net.homo(concept).row_nonzero(row) {
        acc += w * values[concept.index()][col];
    }
    acc
}

/// One synchronous update of all three subnetworks:
/// y'_i <- (1-a) y_i + a * sum_{j!=i} S_ij f_j, then
/// f_i <- (1-a) y'_i + a * S_i f_i, with every f on the right-hand side
/// taken from the previous step and y the fixed seed indicator.
pub fn heterlp_step<F: Scalar>(
    state: &LabelState<F>,
    net: &HeterogeneousNetwork<F>,
    alpha: F,
) -> LabelState<F> {
    let beta = F::one() - alpha;
    let mut next = state.clone();
    for c in ConceptId::ALL {
        let i = c.index();
        for v in 0..net.n(c) {
            let y_prim = beta * state.y[i][v] + alpha * hetero_sum(net, c, v, &state.f);
            next.f[i][v] = beta * y_prim + alpha * homo_sum(net, c, v, &state.f);
        }
    }
    next
}

/// Iterates [`heterlp_step`] until every entry moves less than `sigma` in
/// one step, with a one-step lookahead confirming the following step also
/// stays inside sigma (the max-norm residual ripples with period two, so a
/// single below-sigma step does not yet bound the next one). The state
/// before the confirming step is returned, so at reported convergence one
/// further step moves nothing by more than sigma.
pub fn heterlp_run<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    alpha: F,
    sigma: F,
    seed: VertexId,
    max_iters: u64,
) -> OracleRun<F> {
    let mut state = LabelState::seeded(net, seed);
    let mut iterations = 0;
    while iterations < max_iters {
        let next = heterlp_step(&state, net, alpha);
        iterations += 1;
        let residual = next.max_abs_diff(&state);
        if residual < sigma {
            let confirm = heterlp_step(&next, net, alpha);
            if confirm.max_abs_diff(&next) < sigma {
                return OracleRun {
                    state: next,
                    iterations,
                    converged: true,
                };
            }
        }
        state = next;
    }
    OracleRun {
        state,
        iterations,
        converged: false,
    }
}

/// Two-phase sequential iteration: per outer round, y' is refreshed from
/// the promoted labels of the other subnetworks, then the within-subnetwork
/// labels iterate synchronously (starting from the y' vector, which is what
/// the vertices messaged after phase A) until every entry's step is below
/// sigma; the settled iterate is promoted to f. Outer rounds repeat until
/// every promoted label moved less than sigma.
pub fn minprop_run<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    alpha: F,
    sigma: F,
    seed: VertexId,
    max_iters: u64,
) -> OracleRun<F> {
    let beta = F::one() - alpha;
    let counts = [
        net.n(ConceptId::Drug),
        net.n(ConceptId::Disease),
        net.n(ConceptId::Target),
    ];
    let state0 = LabelState::seeded(net, seed);
    let y = state0.y.clone();
    let zero3 = || {
        [
            vec![F::zero(); counts[0]],
            vec![F::zero(); counts[1]],
            vec![F::zero(); counts[2]],
        ]
    };
    let mut f = zero3();
    let mut f_old = zero3();

    // `iterations` counts superstep equivalents: one per phase-A round plus
    // one per inner iterate.
    let mut iterations = 0;
    while iterations < max_iters {
        // phase A for every vertex, reading promoted labels
        let mut y_prim = zero3();
        for c in ConceptId::ALL {
            let i = c.index();
            for v in 0..counts[i] {
                y_prim[i][v] = beta * y[i][v] + alpha * hetero_sum(net, c, v, &f);
            }
        }
        iterations += 1;

        // synchronized inner loop; the first iterate reads the messaged y'
        // against a zeroed previous iterate, exactly like the vertices do
        let mut sent = y_prim.clone();
        let mut prev_iterate = zero3();
        loop {
            let mut next = zero3();
            let mut all_settled = true;
            for c in ConceptId::ALL {
                let i = c.index();
                for v in 0..counts[i] {
                    next[i][v] = beta * y_prim[i][v] + alpha * homo_sum(net, c, v, &sent);
                    // written so that a NaN step also counts as unsettled
                    #[allow(clippy::neg_cmp_op_on_partial_ord)]
                    if !((next[i][v] - prev_iterate[i][v]).abs() < sigma) {
                        all_settled = false;
                    }
                }
            }
            iterations += 1;
            sent = next.clone();
            prev_iterate = next;
            if all_settled {
                break;
            }
            if iterations >= max_iters {
                return OracleRun {
                    state: LabelState { f: sent, y },
                    iterations,
                    converged: false,
                };
            }
        }

        // synchronized promotion and outer convergence check
        let mut all_end = true;
        for i in 0..3 {
            for v in 0..counts[i] {
                f[i][v] = sent[i][v];
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !((f[i][v] - f_old[i][v]).abs() < sigma) {
                    all_end = false;
                }
                f_old[i][v] = f[i][v];
            }
        }
        if all_end {
            return OracleRun {
                state: LabelState { f, y },
                iterations,
                converged: true,
            };
        }
    }
    OracleRun {
        state: LabelState { f, y },
        iterations,
        converged: false,
    }
}

/// Runs the matching oracle per seed and shapes the output like the engine's
/// raw results, for output-level comparisons.
pub fn oracle_raw_results<F: Scalar>(
    net: &HeterogeneousNetwork<F>,
    algo: Algorithm,
    params: &AlgoParams<F>,
    seeds: &[VertexId],
    max_iters: u64,
) -> RawResults<F> {
    let ids = net.vertex_ids();
    let mut per_vertex: Vec<(VertexId, Vec<(VertexId, F)>)> =
        ids.iter().map(|id| (*id, Vec::new())).collect();
    let mut converged = true;
    let mut non_converged_seed = None;
    let mut total = 0;
    let mut per_seed = Vec::new();
    for &seed in seeds {
        let run = match algo {
            Algorithm::Dhlp1 => minprop_run(net, params.alpha, params.sigma, seed, max_iters),
            Algorithm::Dhlp2 => heterlp_run(net, params.alpha, params.sigma, seed, max_iters),
        };
        if !run.converged && non_converged_seed.is_none() {
            converged = false;
            non_converged_seed = Some(seed);
        }
        total += run.iterations;
        per_seed.push((seed, run.iterations));
        for (slot, id) in ids.iter().enumerate() {
            per_vertex[slot].1.push((seed, run.state.label(*id)));
        }
    }
    RawResults {
        per_vertex,
        schedule: seeds.to_vec(),
        total_supersteps: total,
        per_seed_supersteps: per_seed,
        converged,
        non_converged_seed,
    }
}

/// Seeds in schedule order straight from the network.
pub fn network_schedule<F: Scalar>(net: &HeterogeneousNetwork<F>) -> Vec<VertexId> {
    let mut ids = Vec::new();
    for c in ConceptId::ALL {
        for i in 0..net.n(c) {
            ids.push(vertex_id(c, i));
        }
    }
    ids
}
