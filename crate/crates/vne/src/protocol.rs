//! Master/agents message accounting for distributed runs.
//!
//! The wrapper adds bookkeeping only: per iteration the master sends one
//! message to every partition agent (capacity shares or prices) and receives
//! one back (subproblem value and duals, or the optimizing point), so a run
//! of `k` partitions over `T` iterations exchanges exactly `2 k T` messages.
//! Payload bytes are modeled as a fixed header plus 8 bytes per scalar.

use crate::dual;
use crate::partition::PartitionedLp;
use crate::primal;
use crate::trace::{Algo, IterateTrace, StepRule, StopRule};
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgKind {
    /// Master -> agent: capacity share vector (primal).
    Share,
    /// Master -> agent: price vector (dual).
    Price,
    /// Agent -> master: bare optimal value.
    Value,
    /// Agent -> master: subproblem value plus coupling duals (primal).
    Duals,
    /// Agent -> master: optimizing point plus value (dual).
    Optimum,
}

impl fmt::Display for MsgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MsgKind::Share => "share",
            MsgKind::Price => "price",
            MsgKind::Value => "value",
            MsgKind::Duals => "duals",
            MsgKind::Optimum => "optimum",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentId {
    Master,
    Agent(usize),
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentId::Master => f.write_str("master"),
            AgentId::Agent(s) => write!(f, "agent{s}"),
        }
    }
}

/// Bytes per message: `header + per_scalar * scalars`. The per-message
/// latency is an accounting hook only (nothing is delayed); it defaults to
/// zero because the measured quantity is signaling volume, not delay.
#[derive(Debug, Clone, Copy)]
pub struct PayloadModel {
    pub header: usize,
    pub per_scalar: usize,
    pub latency_ms: f64,
}

impl Default for PayloadModel {
    fn default() -> Self {
        PayloadModel { header: 16, per_scalar: 8, latency_ms: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct MessageRecord {
    pub iteration: usize,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub kind: MsgKind,
    pub bytes: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MessageLog {
    pub records: Vec<MessageRecord>,
    pub total_messages: usize,
    pub total_bytes: usize,
    payload: PayloadModel,
}

impl MessageLog {
    pub fn new(payload: PayloadModel) -> Self {
        MessageLog { records: Vec::new(), total_messages: 0, total_bytes: 0, payload }
    }

    pub fn record(
        &mut self,
        iteration: usize,
        sender: AgentId,
        receiver: AgentId,
        kind: MsgKind,
        scalars: usize,
    ) {
        let bytes = self.payload.header + self.payload.per_scalar * scalars;
        self.total_messages += 1;
        self.total_bytes += bytes;
        self.records.push(MessageRecord { iteration, sender, receiver, kind, bytes });
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    /// Folds another log into this one, re-labeling its agents by `agent`.
    /// Used when partitions run as separate single-agent exchanges.
    pub fn absorb(&mut self, other: MessageLog, agent: usize) {
        for mut r in other.records {
            if let AgentId::Agent(_) = r.sender {
                r.sender = AgentId::Agent(agent);
            }
            if let AgentId::Agent(_) = r.receiver {
                r.receiver = AgentId::Agent(agent);
            }
            self.total_messages += 1;
            self.total_bytes += r.bytes;
            self.records.push(r);
        }
    }

    /// CSV export: `iter,from,to,kind,bytes`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("iter,from,to,kind,bytes\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.iteration, r.sender, r.receiver, r.kind, r.bytes);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadStats {
    pub messages: usize,
    pub bytes: usize,
    pub iterations: usize,
    pub msgs_per_iteration: f64,
    pub bytes_per_iteration: f64,
    /// Modeled signaling delay under the payload model's latency hook.
    pub latency_ms: f64,
}

/// Aggregates a message log; consistent with its records by construction.
pub fn overhead_stats(log: &MessageLog) -> OverheadStats {
    let iterations = log.iterations();
    let div = iterations.max(1) as f64;
    OverheadStats {
        messages: log.total_messages,
        bytes: log.total_bytes,
        iterations,
        msgs_per_iteration: log.total_messages as f64 / div,
        bytes_per_iteration: log.total_bytes as f64 / div,
        latency_ms: log.total_messages as f64 * log.payload.latency_ms,
    }
}

/// Runs the chosen decomposition as a master/agents protocol and accounts
/// every exchanged message. The iterate trace is identical to the in-process
/// run of the same algorithm; the wrapper adds accounting only.
pub fn run_distributed(
    algo: Algo,
    plp: &PartitionedLp,
    step: &StepRule,
    stop: &StopRule,
    reference: Option<f64>,
) -> (IterateTrace, MessageLog) {
    let mut log = MessageLog::new(PayloadModel::default());
    let trace = match algo {
        Algo::Primal => primal::run_with(plp, step, stop, reference, Some(&mut log)).trace,
        Algo::Dual => dual::run_with(plp, step, stop, reference, Some(&mut log)).trace,
        Algo::Monolithic => panic!("run_distributed needs a decomposition algorithm"),
    };
    (trace, log)
}
