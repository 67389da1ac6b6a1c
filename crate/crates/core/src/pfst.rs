//! Parallel forward-backward selection with early dropping.
//!
//! Features are dealt into `B` blocks, one per logical worker. Each round every
//! worker scores its own block against the same immutable snapshot of the
//! selection state and returns a candidate plus its pruned pool; the caller then
//! merges candidates one at a time in ascending block order, re-checking each
//! against the growing state. Three stages run in sequence:
//!
//! 1. forward with early dropping, until every pool is empty;
//! 2. re-forward over `A \ R` without dropping, at most `max_ref` rounds;
//! 3. backward removal of the cheapest member while its loss stays below `beta`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::incremental::{accept, propose, Proposal, ScatterContext, SelectionState};
use crate::report::{Action, DropReason, MethodConfig, SelectionReport, Stage};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PFST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfstConfig {
    /// Minimum gain for a forward admission.
    pub alpha: f64,
    /// Removal is accepted while its loss is strictly below this.
    pub beta: f64,
    /// Candidates gaining less than this are dropped for the rest of the forward stage.
    pub gamma: f64,
    /// Block (worker) count; `None` uses the available parallelism capped at `p`.
    pub blocks: Option<usize>,
    pub max_ref: usize,
    pub singular_tol: f64,
    pub seed: u64,
    pub standardize: bool,
    pub max_features: Option<usize>,
    /// Below this many selected features the backward stage runs on one thread.
    pub parallel_backward_min: usize,
}

impl Default for PfstConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.01,
            gamma: 0.05,
            blocks: None,
            max_ref: 1,
            singular_tol: crate::DEFAULT_SINGULAR_TOL,
            seed: 0,
            standardize: true,
            max_features: None,
            parallel_backward_min: 64,
        }
    }
}

impl PfstConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if self.beta >= self.alpha {
            return bad(format!("beta ({}) must be smaller than alpha ({})", self.beta, self.alpha));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if !(self.singular_tol > 0.0 && self.singular_tol < 1.0) {
            return bad(format!("singular tolerance must lie in (0, 1), got {}", self.singular_tol));
        }
        if self.max_features == Some(0) {
            return bad("max_features must be at least 1".into());
        }
        if let Some(b) = self.blocks {
            if b == 0 || b > n_features {
                return Err(Error::BadBlockCount {
                    blocks: b,
                    features: n_features,
                });
            }
        }
        Ok(())
    }

    fn at_cap(&self, len: usize) -> bool {
        self.max_features.is_some_and(|k| len >= k)
    }
}

/// Worker threads available: `PFST_THREADS` if set and positive, else the host parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// A worker-owned pool of candidate features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBlock {
    pub id: usize,
    pub pool: Vec<usize>,
}

/// Seeded shuffle of `0..p` dealt round-robin into `blocks` blocks.
pub fn partition_features(p: usize, blocks: usize, seed: u64) -> Result<Vec<FeatureBlock>> {
    if blocks == 0 || blocks > p {
        return Err(Error::BadBlockCount { blocks, features: p });
    }
    let all: Vec<usize> = (0..p).collect();
    Ok(partition(&all, blocks, seed))
}

/// As [`partition_features`] over an arbitrary feature list; blocks may be empty
/// when there are fewer features than blocks.
pub fn partition(features: &[usize], blocks: usize, seed: u64) -> Vec<FeatureBlock> {
    let mut order = features.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out: Vec<FeatureBlock> = (0..blocks)
        .map(|id| FeatureBlock { id, pool: Vec::new() })
        .collect();
    for (k, f) in order.into_iter().enumerate() {
        out[k % blocks].pool.push(f);
    }
    out
}

/// What one worker hands back at the barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerOutcome {
    pub candidate: Option<usize>,
    pub pool: Vec<usize>,
    pub dropped: Vec<(usize, DropReason)>,
}

/// Per-block best single feature; degenerate features are discarded.
pub fn init_block(ctx: &ScatterContext, block: &FeatureBlock) -> WorkerOutcome {
    let mut best: Option<(usize, f64)> = None;
    let mut dropped = Vec::new();
    for &f in &block.pool {
        match ctx.single_trace(f) {
            Ok(t) => {
                if best.is_none_or(|(bf, bt)| t > bt || (t == bt && f < bf)) {
                    best = Some((f, t));
                }
            }
            Err(_) => dropped.push((f, DropReason::Degenerate)),
        }
    }
    let candidate = best.map(|(f, _)| f);
    let pool = block
        .pool
        .iter()
        .copied()
        .filter(|&f| Some(f) != candidate && !dropped.iter().any(|&(d, _)| d == f))
        .collect();
    WorkerOutcome {
        candidate,
        pool,
        dropped,
    }
}

/// One forward step on a block against a fixed snapshot.
///
/// If the best gain is below `alpha` the block is emptied. Otherwise the best
/// feature is returned and, when `gamma` is given, every other feature gaining
/// less than `gamma` is dropped. Collinear features count as gaining nothing.
pub fn one_forward_dropping(
    ctx: &ScatterContext,
    snapshot: Option<&SelectionState>,
    block: &FeatureBlock,
    alpha: f64,
    gamma: Option<f64>,
) -> Result<WorkerOutcome> {
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(block.pool.len());
    let mut dropped = Vec::new();
    for &f in &block.pool {
        match propose(ctx, snapshot, f) {
            Ok(p) => scored.push((f, p.gain())),
            Err(Error::SingularUpdate { .. }) => dropped.push((f, DropReason::Collinear)),
            Err(Error::SingularScatter { .. }) => dropped.push((f, DropReason::Degenerate)),
            Err(e) => return Err(e),
        }
    }
    let best = scored
        .iter()
        .copied()
        .reduce(|b, c| if c.1 > b.1 || (c.1 == b.1 && c.0 < b.0) { c } else { b });

    match best {
        Some((bf, bg)) if bg >= alpha => {
            let mut pool = Vec::with_capacity(scored.len());
            for &(f, g) in &scored {
                if f == bf {
                    continue;
                }
                match gamma {
                    Some(gm) if g < gm => dropped.push((f, DropReason::EarlyDrop)),
                    _ => pool.push(f),
                }
            }
            Ok(WorkerOutcome {
                candidate: Some(bf),
                pool,
                dropped,
            })
        }
        _ => {
            dropped.extend(scored.iter().map(|&(f, _)| (f, DropReason::BlockExhausted)));
            Ok(WorkerOutcome {
                candidate: None,
                pool: Vec::new(),
                dropped,
            })
        }
    }
}

/// Forward step without early dropping.
pub fn one_reforward(
    ctx: &ScatterContext,
    snapshot: Option<&SelectionState>,
    block: &FeatureBlock,
    alpha: f64,
) -> Result<WorkerOutcome> {
    one_forward_dropping(ctx, snapshot, block, alpha, None)
}

/// Commits candidates in the given (ascending block) order, re-evaluating each
/// against the growing state. A candidate is skipped when it has become
/// collinear, its gain fell below `alpha`, or the feature cap is reached.
#[allow(clippy::too_many_arguments)]
pub fn merge_candidates(
    ctx: &ScatterContext,
    state: &mut Option<SelectionState>,
    candidates: &[usize],
    alpha: f64,
    max_features: Option<usize>,
    report: &mut SelectionReport,
    stage: Stage,
    round: usize,
) -> Result<()> {
    for &f in candidates {
        if max_features.is_some_and(|k| state.as_ref().map_or(0, SelectionState::len) >= k) {
            report.drop_feature(f, stage, round, DropReason::CapReached);
            continue;
        }
        let proposal = match propose(ctx, state.as_ref(), f) {
            Ok(p) => p,
            Err(Error::SingularUpdate { .. }) => {
                report.drop_feature(f, stage, round, DropReason::Collinear);
                continue;
            }
            Err(Error::SingularScatter { .. }) => {
                report.drop_feature(f, stage, round, DropReason::Degenerate);
                continue;
            }
            Err(e) => return Err(e),
        };
        if proposal.gain() < alpha {
            report.drop_feature(f, stage, round, DropReason::BelowAlphaAtMerge);
            continue;
        }
        commit(ctx, state, &proposal, report, stage, round)?;
    }
    Ok(())
}

fn commit(
    ctx: &ScatterContext,
    state: &mut Option<SelectionState>,
    proposal: &Proposal,
    report: &mut SelectionReport,
    stage: Stage,
    round: usize,
) -> Result<()> {
    let t = accept(ctx, state, proposal)?;
    report.record(stage, round, Action::Add, proposal.feature(), proposal.gain(), t);
    Ok(())
}

/// Repeatedly removes the member whose removal costs the least while that cost
/// is below `beta`. Blocks of `R` are searched on the worker pool when
/// `|R| >= parallel_min`, sequentially otherwise.
pub fn backward_stage(
    ctx: &ScatterContext,
    state: &mut SelectionState,
    config: &PfstConfig,
    blocks: usize,
    threads: &rayon::ThreadPool,
    report: &mut SelectionReport,
) -> Result<()> {
    let mut round = 0;
    while state.len() > 1 {
        ctx.check_deadline()?;
        let parts = partition(state.subset(), blocks.min(state.len()), config.seed.wrapping_add(round as u64));
        let parallel = state.len() >= config.parallel_backward_min;
        let snapshot = &*state;
        let per_block = run_workers(threads, parallel, &parts, |b| {
            crate::greedy::least_useful(snapshot, &b.pool)
        })?;
        let best = per_block
            .into_iter()
            .flatten()
            .reduce(|a, c| if c.1 < a.1 || (c.1 == a.1 && c.0 < a.0) { c } else { a });
        let Some((f, loss)) = best else { break };
        if !(loss < config.beta) {
            break;
        }
        let change = state.commit_remove(ctx, f)?;
        report.record(Stage::Backward, round, Action::Remove, f, change, state.trace());
        report.drop_feature(f, Stage::Backward, round, DropReason::BackwardRemoved);
        debug_check(ctx, Some(state));
        round += 1;
    }
    Ok(())
}

fn run_workers<T, F>(threads: &rayon::ThreadPool, parallel: bool, blocks: &[FeatureBlock], work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&FeatureBlock) -> Result<T> + Sync,
{
    if parallel && blocks.len() > 1 {
        threads.install(|| blocks.par_iter().map(&work).collect())
    } else {
        blocks.iter().map(work).collect()
    }
}

/// Runs PFST on `data`, standardizing first when the config asks for it.
pub fn pfst_select(data: &Dataset, config: &PfstConfig) -> Result<SelectionReport> {
    pfst_select_until(data, config, None)
}

/// As [`pfst_select`], giving up with [`Error::TimedOut`] after `deadline`.
pub fn pfst_select_until(data: &Dataset, config: &PfstConfig, deadline: Option<Instant>) -> Result<SelectionReport> {
    config.validate(data.n_features())?;
    let standardized;
    let data = if config.standardize {
        standardized = crate::io::standardize(data).0;
        &standardized
    } else {
        data
    };
    let ctx = ScatterContext::from_dataset(data, config.singular_tol)?.with_deadline(deadline);
    pfst_run(&ctx, config)
}

/// PFST on a prepared context. Standardization is the caller's business here.
pub fn pfst_run(ctx: &ScatterContext, config: &PfstConfig) -> Result<SelectionReport> {
    let p = ctx.n_features();
    config.validate(p)?;
    let n_blocks = config.blocks.unwrap_or_else(|| worker_threads().min(p));
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(n_blocks.min(worker_threads()).max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;

    let mut echo = *config;
    echo.blocks = Some(n_blocks);
    let mut report = SelectionReport::new(MethodConfig::Pfst(echo));
    let mut state: Option<SelectionState> = None;

    // initial round: best single feature per block
    let started = Instant::now();
    let mut blocks = partition_features(p, n_blocks, config.seed)?;
    let outcomes = run_workers(&threads, true, &blocks, |b| Ok(init_block(ctx, b)))?;
    let candidates = absorb(&mut blocks, outcomes, &mut report, Stage::Init, 0);
    merge_candidates(ctx, &mut state, &candidates, config.alpha, config.max_features, &mut report, Stage::Init, 0)?;
    debug_check(ctx, state.as_ref());
    report.time(Stage::Init, started);

    // forward with early dropping
    let started = Instant::now();
    let mut round = 0;
    while blocks.iter().any(|b| !b.pool.is_empty()) && !config.at_cap(len(&state)) {
        ctx.check_deadline()?;
        round += 1;
        let snapshot = state.as_ref();
        let outcomes = run_workers(&threads, true, &blocks, |b| {
            one_forward_dropping(ctx, snapshot, b, config.alpha, Some(config.gamma))
        })?;
        let candidates = absorb(&mut blocks, outcomes, &mut report, Stage::ForwardDropping, round);
        merge_candidates(ctx, &mut state, &candidates, config.alpha, config.max_features, &mut report, Stage::ForwardDropping, round)?;
        debug_check(ctx, state.as_ref());
    }
    report.time(Stage::ForwardDropping, started);

    let Some(mut state) = state else {
        let best_gain = (0..p)
            .filter_map(|f| ctx.single_trace(f).ok())
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoAdmissibleFeature {
            alpha: config.alpha,
            best_gain,
        });
    };

    // re-forward over everything not yet selected
    let started = Instant::now();
    let rest: Vec<usize> = (0..p).filter(|f| !state.contains(*f)).collect();
    let mut blocks = partition(&rest, n_blocks, config.seed);
    let mut runs = 0;
    let mut current = Some(state);
    while runs < config.max_ref && blocks.iter().any(|b| !b.pool.is_empty()) && !config.at_cap(len(&current)) {
        ctx.check_deadline()?;
        runs += 1;
        let snapshot = current.as_ref();
        let outcomes = run_workers(&threads, true, &blocks, |b| one_reforward(ctx, snapshot, b, config.alpha))?;
        let candidates = absorb(&mut blocks, outcomes, &mut report, Stage::Reforward, runs);
        merge_candidates(ctx, &mut current, &candidates, config.alpha, config.max_features, &mut report, Stage::Reforward, runs)?;
        debug_check(ctx, current.as_ref());
    }
    state = current.expect("state stays nonempty once admitted");
    report.time(Stage::Reforward, started);

    let started = Instant::now();
    backward_stage(ctx, &mut state, config, n_blocks, &threads, &mut report)?;
    report.time(Stage::Backward, started);

    report.selected = state.subset().to_vec();
    report.final_trace = state.trace();
    Ok(report)
}

fn len(state: &Option<SelectionState>) -> usize {
    state.as_ref().map_or(0, SelectionState::len)
}

/// Installs pruned pools, logs drops and returns candidates in block order.
fn absorb(
    blocks: &mut [FeatureBlock],
    outcomes: Vec<WorkerOutcome>,
    report: &mut SelectionReport,
    stage: Stage,
    round: usize,
) -> Vec<usize> {
    let mut candidates = Vec::new();
    for (block, outcome) in blocks.iter_mut().zip(outcomes) {
        for (f, reason) in outcome.dropped {
            report.drop_feature(f, stage, round, reason);
        }
        block.pool = outcome.pool;
        candidates.extend(outcome.candidate);
    }
    candidates
}

/// In debug builds, `t_R` at every barrier must match a fresh factorization.
fn debug_check(ctx: &ScatterContext, state: Option<&SelectionState>) {
    if cfg!(debug_assertions) {
        if let Some(s) = state {
            if let Ok(direct) = ctx.direct_trace(s.subset()) {
                debug_assert!(
                    (s.trace() - direct).abs() <= 1e-8 * direct.abs().max(1.0),
                    "incremental trace {} drifted from direct {}",
                    s.trace(),
                    direct
                );
            }
        }
    }
}
