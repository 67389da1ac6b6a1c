//! Sequential forward, backward and stepwise selection on the trace criterion.
//!
//! "Most useful" is the candidate with the largest criterion gain and "least
//! useful" the member whose removal loses the least. Exact ties go to the
//! lowest feature index.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incremental::{accept, propose, ScatterContext, SelectionState};
use crate::report::{Action, DropReason, MethodConfig, SelectionReport, Stage};

/// Forward admits on `gain >= alpha`; backward removes on `loss < beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub alpha: f64,
    pub beta: f64,
    pub max_features: Option<usize>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.01,
            max_features: None,
        }
    }
}

impl StopRule {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            max_features: None,
        }
    }

    /// `alpha > 0`, `0 <= beta < alpha`; `beta >= alpha` lets stepwise cycle.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if self.beta >= self.alpha {
            return Err(Error::InvalidConfig(format!(
                "beta ({}) must be smaller than alpha ({})",
                self.beta, self.alpha
            )));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidConfig("max_features must be at least 1".into()));
        }
        Ok(())
    }

    fn at_cap(&self, len: usize) -> bool {
        self.max_features.is_some_and(|k| len >= k)
    }
}

/// Outcome of one forward scan over a pool.
pub(crate) struct ForwardScan {
    pub best: Option<crate::incremental::Proposal>,
    pub collinear: Vec<usize>,
    pub degenerate: Vec<usize>,
}

/// Scores every feature in `pool` against `state`, keeping the largest gain
/// (lowest index on ties).
pub(crate) fn scan_forward(ctx: &ScatterContext, state: Option<&SelectionState>, pool: &[usize]) -> Result<ForwardScan> {
    let mut scan = ForwardScan {
        best: None,
        collinear: Vec::new(),
        degenerate: Vec::new(),
    };
    for &f in pool {
        match propose(ctx, state, f) {
            Ok(p) => {
                let better = match &scan.best {
                    None => true,
                    Some(b) => p.gain() > b.gain() || (p.gain() == b.gain() && f < b.feature()),
                };
                if better {
                    scan.best = Some(p);
                }
            }
            Err(Error::SingularUpdate { .. }) => scan.collinear.push(f),
            Err(Error::SingularScatter { .. }) => scan.degenerate.push(f),
            Err(e) => return Err(e),
        }
    }
    Ok(scan)
}

/// Member of `R` whose removal costs the least, with that loss.
pub(crate) fn least_useful(state: &SelectionState, members: &[usize]) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for &f in members {
        let loss = -state.evaluate_remove(f)?;
        let better = match best {
            None => true,
            Some((bf, bl)) => loss < bl || (loss == bl && f < bf),
        };
        if better {
            best = Some((f, loss));
        }
    }
    Ok(best)
}

/// Forward selection: repeatedly admit the largest-gain feature while its gain is at least `alpha`.
pub fn forward_select(ctx: &ScatterContext, rule: &StopRule) -> Result<SelectionReport> {
    rule.validate()?;
    let started = Instant::now();
    let mut report = SelectionReport::new(MethodConfig::Forward(*rule));
    let mut state: Option<SelectionState> = None;
    let mut pool: Vec<usize> = (0..ctx.n_features()).collect();
    let mut step = 0;
    let mut best_gain = f64::NEG_INFINITY;

    while !pool.is_empty() && !rule.at_cap(state.as_ref().map_or(0, SelectionState::len)) {
        ctx.check_deadline()?;
        let scan = scan_forward(ctx, state.as_ref(), &pool)?;
        drop_all(&mut report, &mut pool, &scan.collinear, Stage::Forward, step, DropReason::Collinear);
        drop_all(&mut report, &mut pool, &scan.degenerate, Stage::Forward, step, DropReason::Degenerate);
        let Some(best) = scan.best else { break };
        if state.is_none() {
            best_gain = best.gain();
        }
        if best.gain() < rule.alpha {
            break;
        }
        let t = accept(ctx, &mut state, &best)?;
        pool.retain(|&f| f != best.feature());
        report.record(Stage::Forward, step, Action::Add, best.feature(), best.gain(), t);
        step += 1;
    }

    let state = state.ok_or(Error::NoAdmissibleFeature {
        alpha: rule.alpha,
        best_gain,
    })?;
    finish(&mut report, &state, Stage::Forward, started);
    Ok(report)
}

/// Backward elimination from the full feature set, removing the least useful
/// feature while its loss is below `beta`. With `max_features` set, removal
/// continues past `beta` until the cap is met.
pub fn backward_select(ctx: &ScatterContext, rule: &StopRule) -> Result<SelectionReport> {
    rule.validate()?;
    let started = Instant::now();
    let mut report = SelectionReport::new(MethodConfig::Backward(*rule));
    let all: Vec<usize> = (0..ctx.n_features()).collect();
    let mut state = SelectionState::from_subset(ctx, &all)?;
    report.initial = all;
    let mut step = 0;
    while state.len() > 1 {
        ctx.check_deadline()?;
        let members = state.subset().to_vec();
        let Some((f, loss)) = least_useful(&state, &members)? else { break };
        let over_cap = rule.max_features.is_some_and(|k| state.len() > k);
        if !(loss < rule.beta || over_cap) {
            break;
        }
        let change = state.commit_remove(ctx, f)?;
        report.record(Stage::Backward, step, Action::Remove, f, change, state.trace());
        report.drop_feature(f, Stage::Backward, step, DropReason::BackwardRemoved);
        step += 1;
    }
    finish(&mut report, &state, Stage::Backward, started);
    Ok(report)
}

/// Stepwise selection: a forward step, then remove members while the least
/// useful one loses less than `beta`. Removed features do not return to the pool.
pub fn stepwise_select(ctx: &ScatterContext, rule: &StopRule) -> Result<SelectionReport> {
    rule.validate()?;
    let started = Instant::now();
    let mut report = SelectionReport::new(MethodConfig::Stepwise(*rule));
    let mut state: Option<SelectionState> = None;
    let mut pool: Vec<usize> = (0..ctx.n_features()).collect();
    let mut step = 0;
    let mut best_gain = f64::NEG_INFINITY;

    while !pool.is_empty() && !rule.at_cap(state.as_ref().map_or(0, SelectionState::len)) {
        ctx.check_deadline()?;
        let scan = scan_forward(ctx, state.as_ref(), &pool)?;
        drop_all(&mut report, &mut pool, &scan.collinear, Stage::Stepwise, step, DropReason::Collinear);
        drop_all(&mut report, &mut pool, &scan.degenerate, Stage::Stepwise, step, DropReason::Degenerate);
        let Some(best) = scan.best else { break };
        if state.is_none() {
            best_gain = best.gain();
        }
        if best.gain() < rule.alpha {
            break;
        }
        let t = accept(ctx, &mut state, &best)?;
        pool.retain(|&f| f != best.feature());
        report.record(Stage::Stepwise, step, Action::Add, best.feature(), best.gain(), t);
        step += 1;

        let s = state.as_mut().expect("admitted above");
        while s.len() > 1 {
            let members = s.subset().to_vec();
            let Some((f, loss)) = least_useful(s, &members)? else { break };
            if !(loss < rule.beta) {
                break;
            }
            let change = s.commit_remove(ctx, f)?;
            report.record(Stage::Stepwise, step, Action::Remove, f, change, s.trace());
            report.drop_feature(f, Stage::Stepwise, step, DropReason::BackwardRemoved);
            step += 1;
        }
    }

    let state = state.ok_or(Error::NoAdmissibleFeature {
        alpha: rule.alpha,
        best_gain,
    })?;
    finish(&mut report, &state, Stage::Stepwise, started);
    Ok(report)
}

fn drop_all(
    report: &mut SelectionReport,
    pool: &mut Vec<usize>,
    features: &[usize],
    stage: Stage,
    round: usize,
    reason: DropReason,
) {
    if features.is_empty() {
        return;
    }
    pool.retain(|f| !features.contains(f));
    for &f in features {
        report.drop_feature(f, stage, round, reason);
    }
}

fn finish(report: &mut SelectionReport, state: &SelectionState, stage: Stage, started: Instant) {
    report.selected = state.subset().to_vec();
    report.final_trace = state.trace();
    report.time(stage, started);
}
