//! What a selection run produced: admission order, criterion trajectory,
//! discarded features and per-stage wall-clock time.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::greedy::StopRule;
use crate::pfst::PfstConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Init,
    ForwardDropping,
    Reforward,
    Backward,
    Forward,
    Stepwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Add,
    Remove,
}

/// One committed change to `R`, with `t_R` after the change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub stage: Stage,
    pub round: usize,
    pub action: Action,
    pub feature: usize,
    pub change: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    EarlyDrop,
    BlockExhausted,
    BackwardRemoved,
    Collinear,
    BelowAlphaAtMerge,
    CapReached,
    /// Zero within-class variance; the feature can never enter `R`.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub feature: usize,
    pub stage: Stage,
    pub round: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodConfig {
    Pfst(PfstConfig),
    Forward(StopRule),
    Backward(StopRule),
    Stepwise(StopRule),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Pfst(_) => "pfst",
            MethodConfig::Forward(_) => "forward",
            MethodConfig::Backward(_) => "backward",
            MethodConfig::Stepwise(_) => "stepwise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Subset the run started from (the full set for backward elimination).
    pub initial: Vec<usize>,
    /// Selected features in admission order.
    pub selected: Vec<usize>,
    pub final_trace: f64,
    pub events: Vec<TraceEvent>,
    pub drops: Vec<DropRecord>,
    pub timings: Vec<StageTiming>,
    pub config: MethodConfig,
}

impl SelectionReport {
    pub fn new(config: MethodConfig) -> Self {
        Self {
            initial: Vec::new(),
            selected: Vec::new(),
            final_trace: 0.0,
            events: Vec::new(),
            drops: Vec::new(),
            timings: Vec::new(),
            config,
        }
    }

    pub(crate) fn record(&mut self, stage: Stage, round: usize, action: Action, feature: usize, change: f64, trace: f64) {
        self.events.push(TraceEvent {
            stage,
            round,
            action,
            feature,
            change,
            trace,
        });
    }

    pub(crate) fn drop_feature(&mut self, feature: usize, stage: Stage, round: usize, reason: DropReason) {
        self.drops.push(DropRecord {
            feature,
            stage,
            round,
            reason,
        });
    }

    pub(crate) fn time(&mut self, stage: Stage, started: Instant) {
        self.timings.push(StageTiming {
            stage,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    /// Replays the event log into the resulting subset. Matches `selected` for
    /// every report produced by this crate.
    pub fn replay(&self) -> Vec<usize> {
        let mut r = self.initial.clone();
        for e in &self.events {
            match e.action {
                Action::Add => r.push(e.feature),
                Action::Remove => r.retain(|&f| f != e.feature),
            }
        }
        r
    }

    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}
