//! Superstep runtime: partitioned vertex-centric execution with message
//! passing, halt voting, and global aggregators.
//!
//! Messages sent in superstep `s` are delivered in superstep `s + 1`;
//! aggregator reads in superstep `s` reflect contributions from `s - 1`.
//! A vertex is active in superstep 0, when it holds pending messages, or
//! when it did not vote to halt. Partitions are processed by a fixed number
//! of worker lanes; within a partition vertices run sequentially, and all
//! cross-partition merges happen in partition-index order, so deterministic
//! mode yields results that do not depend on the parallelism degree.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex};

use thiserror::Error;

use crate::hetnet::{ConceptId, VertexId};
use crate::ingest::EngineGraph;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("engine configuration: {0}")]
    Config(String),
    #[error("compute fault at vertex {vertex} in superstep {superstep}: {reason}")]
    Compute {
        vertex: VertexId,
        superstep: u64,
        reason: String,
    },
}

/// Error raised from inside a vertex program; the engine attaches the vertex
/// id and superstep.
#[derive(Debug, Clone)]
pub struct ComputeFault(pub String);

impl ComputeFault {
    pub fn new(msg: impl Into<String>) -> Self {
        ComputeFault(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregatorKind {
    SumF64,
    SumI64,
    And,
    MinF64,
    MaxF64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggValue {
    F64(f64),
    I64(i64),
    Bool(bool),
}

impl AggValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AggValue::F64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            AggValue::I64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AggValue::Bool(v) => Some(*v),
            _ => None,
        }
    }
}

impl AggregatorKind {
    pub fn identity(self) -> AggValue {
        match self {
            AggregatorKind::SumF64 => AggValue::F64(0.0),
            AggregatorKind::SumI64 => AggValue::I64(0),
            AggregatorKind::And => AggValue::Bool(true),
            AggregatorKind::MinF64 => AggValue::F64(f64::INFINITY),
            AggregatorKind::MaxF64 => AggValue::F64(f64::NEG_INFINITY),
        }
    }

    pub fn combine(self, a: AggValue, b: AggValue) -> Result<AggValue, String> {
        match (self, a, b) {
            (AggregatorKind::SumF64, AggValue::F64(x), AggValue::F64(y)) => {
                Ok(AggValue::F64(x + y))
            }
            (AggregatorKind::SumI64, AggValue::I64(x), AggValue::I64(y)) => {
                Ok(AggValue::I64(x + y))
            }
            (AggregatorKind::And, AggValue::Bool(x), AggValue::Bool(y)) => {
                Ok(AggValue::Bool(x && y))
            }
            (AggregatorKind::MinF64, AggValue::F64(x), AggValue::F64(y)) => {
                Ok(AggValue::F64(x.min(y)))
            }
            (AggregatorKind::MaxF64, AggValue::F64(x), AggValue::F64(y)) => {
                Ok(AggValue::F64(x.max(y)))
            }
            _ => Err("aggregator value type mismatch".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Number of vertex partitions; a vertex lands in partition `id mod k`.
    pub partitions: usize,
    /// Concurrent worker lanes processing disjoint partition chunks.
    pub parallelism: usize,
    /// Canonical message order and partition-order merges.
    pub deterministic: bool,
    /// Hard cap on executed supersteps.
    pub max_supersteps: u64,
    /// Registered aggregators, reduced once per superstep.
    pub aggregators: Vec<(String, AggregatorKind)>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            partitions: 4,
            parallelism: 1,
            deterministic: true,
            max_supersteps: 100_000,
            aggregators: Vec::new(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.parallelism < 1 {
            return Err(EngineError::Config("parallelism must be >= 1".into()));
        }
        if self.partitions < self.parallelism {
            return Err(EngineError::Config(format!(
                "partitions ({}) must be >= parallelism ({})",
                self.partitions, self.parallelism
            )));
        }
        if self.max_supersteps < 1 {
            return Err(EngineError::Config("max_supersteps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_aggregator(mut self, name: &str, kind: AggregatorKind) -> Self {
        self.aggregators.push((name.to_owned(), kind));
        self
    }

    fn slot_of(&self, name: &str) -> Option<usize> {
        self.aggregators.iter().position(|(n, _)| n == name)
    }

    pub fn has_aggregator(&self, name: &str) -> bool {
        self.slot_of(name).is_some()
    }

    /// Order-independent reduction of contributions for a registered
    /// aggregator; the empty reduction yields the reducer identity.
    pub fn reduce_aggregator(
        &self,
        name: &str,
        contributions: &[AggValue],
    ) -> Result<AggValue, EngineError> {
        let slot = self
            .slot_of(name)
            .ok_or_else(|| EngineError::Config(format!("unregistered aggregator {name:?}")))?;
        let kind = self.aggregators[slot].1;
        let mut acc = kind.identity();
        for c in contributions {
            acc = kind.combine(acc, *c).map_err(EngineError::Config)?;
        }
        Ok(acc)
    }
}

/// Assigns vertex `v` to partition `v mod k`; partitions are disjoint,
/// covering, and internally sorted by id.
pub fn partition_vertices<E>(graph: &EngineGraph<E>, k: usize) -> Vec<Vec<VertexId>> {
    assert!(k >= 1, "partition count must be >= 1");
    let mut parts = vec![Vec::new(); k];
    for (id, _) in graph.vertices() {
        parts[(id.0 % k as u64) as usize].push(*id);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

/// A vertex program: per-vertex state, message type, and the compute hook
/// invoked once per active vertex per superstep.
pub trait VertexProgram<E: Copy>: Sync {
    type State: Send;
    type Message: Send;
    /// Sort key applied to each vertex's inbox in deterministic mode.
    type OrderKey: Ord;

    fn initial_state(&self, vertex: VertexId, edges: &[(VertexId, E)]) -> Self::State;

    fn compute(
        &self,
        ctx: &mut SuperstepContext<'_, E, Self::Message>,
        state: &mut Self::State,
        messages: &[Self::Message],
    ) -> Result<(), ComputeFault>;

    fn message_order_key(msg: &Self::Message) -> Self::OrderKey;

    /// Optional message pre-reducer applied at delivery; `None` keeps both
    /// messages.
    fn try_combine(&self, _earlier: &Self::Message, _later: &Self::Message) -> Option<Self::Message> {
        None
    }
}

/// Per-vertex view of one superstep.
pub struct SuperstepContext<'a, E, M> {
    superstep: u64,
    vertex: VertexId,
    edges: &'a [(VertexId, E)],
    vertices: &'a [(VertexId, ConceptId)],
    locator: &'a [(u32, u32)],
    agg_defs: &'a [(String, AggregatorKind)],
    prev_agg: &'a [AggValue],
    partials: &'a mut [AggValue],
    staging: &'a mut [Vec<(u32, M)>],
    halt: &'a mut bool,
}

impl<'a, E, M> SuperstepContext<'a, E, M> {
    pub fn superstep(&self) -> u64 {
        self.superstep
    }

    pub fn vertex(&self) -> VertexId {
        self.vertex
    }

    /// Adjacency of the current vertex, ascending by neighbor id.
    pub fn edges(&self) -> &'a [(VertexId, E)] {
        self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// All graph vertices, ascending by id.
    pub fn vertices(&self) -> &'a [(VertexId, ConceptId)] {
        self.vertices
    }

    /// Queues a message for delivery in the next superstep.
    pub fn send_message(&mut self, to: VertexId, msg: M) -> Result<(), ComputeFault> {
        let idx = self
            .vertices
            .binary_search_by_key(&to, |(v, _)| *v)
            .map_err(|_| ComputeFault::new(format!("message to unknown vertex {to}")))?;
        let (part, slot) = self.locator[idx];
        self.staging[part as usize].push((slot, msg));
        Ok(())
    }

    /// Declares this vertex inactive until a message re-activates it.
    pub fn vote_to_halt(&mut self) {
        *self.halt = true;
    }

    /// Reduced aggregator value from the previous superstep (the reducer
    /// identity in superstep 0).
    pub fn aggregated(&self, name: &str) -> Option<&AggValue> {
        self.agg_defs
            .iter()
            .position(|(n, _)| n == name)
            .map(|slot| &self.prev_agg[slot])
    }

    /// Contributes a value to an aggregator for this superstep.
    pub fn aggregate(&mut self, name: &str, value: AggValue) -> Result<(), ComputeFault> {
        let slot = self
            .agg_defs
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| ComputeFault::new(format!("unregistered aggregator {name:?}")))?;
        let kind = self.agg_defs[slot].1;
        self.partials[slot] = kind
            .combine(self.partials[slot], value)
            .map_err(ComputeFault::new)?;
        Ok(())
    }
}

/// Result of one engine run.
#[derive(Debug)]
pub struct RunOutcome<S> {
    /// Final state per vertex, ascending by id.
    pub states: Vec<(VertexId, S)>,
    /// Number of supersteps executed.
    pub supersteps: u64,
    /// Reduced aggregator values per executed superstep, registry order.
    pub aggregator_history: Vec<Vec<AggValue>>,
    pub aggregator_names: Vec<String>,
    /// False when the superstep cap stopped the run with work remaining.
    pub converged: bool,
}

impl<S> RunOutcome<S> {
    pub fn aggregator_series(&self, name: &str) -> Option<Vec<AggValue>> {
        let slot = self.aggregator_names.iter().position(|n| n == name)?;
        Some(self.aggregator_history.iter().map(|h| h[slot]).collect())
    }

    pub fn state_of(&self, id: VertexId) -> Option<&S> {
        self.states
            .binary_search_by_key(&id, |(v, _)| *v)
            .ok()
            .map(|i| &self.states[i].1)
    }
}

struct PartitionData<S, M> {
    index: usize,
    /// Dense vertex indexes owned by this partition, ascending by id.
    members: Vec<u32>,
    states: Vec<Option<S>>,
    inbox: Vec<Vec<M>>,
    halted: Vec<bool>,
    /// Scratch for per-destination message batches.
    staging: Vec<Vec<(u32, M)>>,
}

/// Per (source partition, destination partition) message buffer.
type Outboxes<M> = Vec<Vec<Mutex<Vec<(u32, M)>>>>;

struct Shared<'g, E: Copy, P: VertexProgram<E>, M> {
    graph: &'g EngineGraph<E>,
    program: &'g P,
    deterministic: bool,
    agg_defs: &'g [(String, AggregatorKind)],
    locator: Vec<(u32, u32)>,
    outboxes: Outboxes<M>,
    partials: Vec<Mutex<Vec<AggValue>>>,
    prev_agg: Mutex<Vec<AggValue>>,
    history: Mutex<Vec<Vec<AggValue>>>,
    active: AtomicUsize,
    stop: AtomicBool,
    converged: AtomicBool,
    fault: Mutex<Option<EngineError>>,
    barrier: Barrier,
    superstep: AtomicU64,
    max_supersteps: u64,
}

/// Runs the program to quiescence (no active vertex, no message in flight)
/// or to the superstep cap, whichever comes first.
pub fn run<E, P>(
    graph: &EngineGraph<E>,
    program: &P,
    config: &EngineConfig,
) -> Result<RunOutcome<P::State>, EngineError>
where
    E: Copy + Send + Sync,
    P: VertexProgram<E>,
{
    config.validate()?;
    let k = config.partitions;
    let n = graph.vertex_count();

    // dense index -> (partition, slot)
    let mut locator = vec![(0u32, 0u32); n];
    let mut parts: Vec<PartitionData<P::State, P::Message>> = (0..k)
        .map(|index| PartitionData {
            index,
            members: Vec::new(),
            states: Vec::new(),
            inbox: Vec::new(),
            halted: Vec::new(),
            staging: (0..k).map(|_| Vec::new()).collect(),
        })
        .collect();
    for (idx, (id, _)) in graph.vertices().iter().enumerate() {
        let p = (id.0 % k as u64) as usize;
        locator[idx] = (p as u32, parts[p].members.len() as u32);
        parts[p].members.push(idx as u32);
    }
    for part in parts.iter_mut() {
        let len = part.members.len();
        part.states = part
            .members
            .iter()
            .map(|&idx| {
                let (id, _) = graph.vertices()[idx as usize];
                Some(program.initial_state(id, graph.adjacency(idx as usize)))
            })
            .collect();
        part.inbox = (0..len).map(|_| Vec::new()).collect();
        part.halted = vec![false; len];
    }

    // A lane owns a contiguous chunk of partitions; with k partitions and p
    // requested lanes some chunkings need fewer lanes, so size the barrier
    // by the real chunk count.
    let chunk = k.div_ceil(config.parallelism);
    let lanes = k.div_ceil(chunk);
    let shared = Shared::<E, P, P::Message> {
        graph,
        program,
        deterministic: config.deterministic,
        agg_defs: &config.aggregators,
        locator,
        outboxes: (0..k)
            .map(|_| (0..k).map(|_| Mutex::new(Vec::new())).collect())
            .collect(),
        partials: (0..k)
            .map(|_| {
                Mutex::new(
                    config
                        .aggregators
                        .iter()
                        .map(|(_, kind)| kind.identity())
                        .collect(),
                )
            })
            .collect(),
        prev_agg: Mutex::new(
            config
                .aggregators
                .iter()
                .map(|(_, kind)| kind.identity())
                .collect(),
        ),
        history: Mutex::new(Vec::new()),
        active: AtomicUsize::new(n),
        stop: AtomicBool::new(false),
        converged: AtomicBool::new(false),
        fault: Mutex::new(None),
        barrier: Barrier::new(lanes),
        superstep: AtomicU64::new(0),
        max_supersteps: config.max_supersteps,
    };

    if n == 0 {
        return Ok(RunOutcome {
            states: Vec::new(),
            supersteps: 0,
            aggregator_history: Vec::new(),
            aggregator_names: config.aggregators.iter().map(|(n, _)| n.clone()).collect(),
            converged: true,
        });
    }

    if lanes == 1 {
        lane_loop(&shared, 0, &mut parts);
    } else {
        let mut chunks: Vec<&mut [PartitionData<P::State, P::Message>]> =
            parts.chunks_mut(chunk).collect();
        std::thread::scope(|scope| {
            for (lane, chunk_parts) in chunks.drain(..).enumerate() {
                let shared = &shared;
                scope.spawn(move || lane_loop(shared, lane, chunk_parts));
            }
        });
    }

    if let Some(err) = shared.fault.lock().unwrap().take() {
        return Err(err);
    }

    let mut states: Vec<(VertexId, P::State)> = Vec::with_capacity(n);
    for part in &mut parts {
        for (slot, &idx) in part.members.iter().enumerate() {
            let (id, _) = graph.vertices()[idx as usize];
            states.push((id, part.states[slot].take().expect("state present")));
        }
    }
    states.sort_unstable_by_key(|(id, _)| *id);

    let aggregator_history = std::mem::take(&mut *shared.history.lock().unwrap());
    Ok(RunOutcome {
        states,
        supersteps: shared.superstep.load(Ordering::SeqCst),
        aggregator_history,
        aggregator_names: config.aggregators.iter().map(|(n, _)| n.clone()).collect(),
        converged: shared.converged.load(Ordering::SeqCst),
    })
}

fn lane_loop<E, P>(
    shared: &Shared<'_, E, P, P::Message>,
    lane: usize,
    parts: &mut [PartitionData<P::State, P::Message>],
) where
    E: Copy + Send + Sync,
    P: VertexProgram<E>,
{
    let k = shared.outboxes.len();

    loop {
        let superstep = shared.superstep.load(Ordering::SeqCst);
        let prev_agg = shared.prev_agg.lock().unwrap().clone();

        // compute phase over owned partitions
        for part in parts.iter_mut() {
            let my_part = part.index;
            let mut local_partials: Vec<AggValue> = shared
                .agg_defs
                .iter()
                .map(|(_, kind)| kind.identity())
                .collect();
            for slot in 0..part.members.len() {
                let has_msgs = !part.inbox[slot].is_empty();
                if part.halted[slot] && !has_msgs {
                    continue;
                }
                if shared.deterministic {
                    part.inbox[slot].sort_by_key(|m| P::message_order_key(m));
                }
                part.halted[slot] = false;
                let idx = part.members[slot] as usize;
                let (id, _) = shared.graph.vertices()[idx];
                let mut ctx = SuperstepContext {
                    superstep,
                    vertex: id,
                    edges: shared.graph.adjacency(idx),
                    vertices: shared.graph.vertices(),
                    locator: &shared.locator,
                    agg_defs: shared.agg_defs,
                    prev_agg: &prev_agg,
                    partials: &mut local_partials,
                    staging: &mut part.staging,
                    halt: &mut part.halted[slot],
                };
                let state = part.states[slot].as_mut().expect("state present");
                let msgs = &part.inbox[slot];
                if let Err(ComputeFault(reason)) = shared.program.compute(&mut ctx, state, msgs) {
                    let mut fault = shared.fault.lock().unwrap();
                    if fault.is_none() {
                        *fault = Some(EngineError::Compute {
                            vertex: id,
                            superstep,
                            reason,
                        });
                    }
                    shared.stop.store(true, Ordering::SeqCst);
                    break;
                }
                part.inbox[slot].clear();
            }
            // flush staged messages into the shared outboxes
            for (dest, batch) in part.staging.iter_mut().enumerate() {
                if !batch.is_empty() {
                    shared.outboxes[my_part][dest].lock().unwrap().append(batch);
                }
            }
            *shared.partials[my_part].lock().unwrap() = local_partials;
            if shared.stop.load(Ordering::SeqCst) {
                break;
            }
        }

        shared.barrier.wait();

        // single-lane section: reduce aggregators in partition order
        if lane == 0 {
            let mut reduced: Vec<AggValue> = shared
                .agg_defs
                .iter()
                .map(|(_, kind)| kind.identity())
                .collect();
            for p in 0..k {
                let mut part_vals = shared.partials[p].lock().unwrap();
                for (slot, (_, kind)) in shared.agg_defs.iter().enumerate() {
                    if let Ok(v) = kind.combine(reduced[slot], part_vals[slot]) {
                        reduced[slot] = v;
                    }
                    part_vals[slot] = kind.identity();
                }
            }
            shared.history.lock().unwrap().push(reduced.clone());
            *shared.prev_agg.lock().unwrap() = reduced;
            shared.active.store(0, Ordering::SeqCst);
        }

        shared.barrier.wait();

        if shared.stop.load(Ordering::SeqCst) {
            break;
        }

        // delivery phase: drain inbound buffers for owned partitions in
        // source-partition order and count the next active set
        let mut active = 0usize;
        for part in parts.iter_mut() {
            if part.members.is_empty() {
                continue;
            }
            let my_part = part.index;
            for src in 0..k {
                let mut batch = shared.outboxes[src][my_part].lock().unwrap();
                for (slot, msg) in batch.drain(..) {
                    let inbox = &mut part.inbox[slot as usize];
                    if let Some(last) = inbox.last_mut() {
                        if let Some(combined) = shared.program.try_combine(last, &msg) {
                            *last = combined;
                            continue;
                        }
                    }
                    inbox.push(msg);
                }
            }
            for slot in 0..part.members.len() {
                if !part.halted[slot] || !part.inbox[slot].is_empty() {
                    active += 1;
                }
            }
        }
        shared.active.fetch_add(active, Ordering::SeqCst);

        shared.barrier.wait();

        // single-lane section: advance or stop
        if lane == 0 {
            let next = superstep + 1;
            shared.superstep.store(next, Ordering::SeqCst);
            let total_active = shared.active.load(Ordering::SeqCst);
            if total_active == 0 {
                shared.converged.store(true, Ordering::SeqCst);
                shared.stop.store(true, Ordering::SeqCst);
            } else if next >= shared.max_supersteps {
                shared.converged.store(false, Ordering::SeqCst);
                shared.stop.store(true, Ordering::SeqCst);
            }
        }

        shared.barrier.wait();

        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
    }
}

/// Convenience: collect final states into an id-keyed map.
pub fn states_by_id<S>(outcome: RunOutcome<S>) -> HashMap<VertexId, S> {
    outcome.states.into_iter().collect()
}
