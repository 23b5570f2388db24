//! End-to-end experiment runner: sequential VN arrivals against residual
//! capacities, embedding via the chosen algorithm and partitioning policy,
//! and allocation-ratio / revenue / signaling reporting.
//!
//! Arrival handling follows the discovery -> mapping -> allocation loop:
//! the availability mask is computed from the current residuals, the VN is
//! embedded, and its virtual links are charged on the shortest available
//! paths between the chosen hosts. If allocation fails, matching is
//! reinvoked once with a tightened mask (only nodes able to host the
//! request's largest vnode stay visible) and the request is rejected after
//! that. Accepted allocations are permanent; there are no departures.

use crate::dual;
use crate::lp::solve_lp;
use crate::model::{
    generate_full_mesh, generate_random_vn, residual_capacity, DiscoveryMask, Embedding,
    PhysicalNetwork, ValueRule, VnRequest,
};
use crate::monolith::{self, BuildOptions, UtilitySpec};
use crate::partition::{build_partitioned_lp, split, PartitionPolicy, VnSplit};
use crate::primal;
use crate::protocol::{AgentId, MessageLog, MsgKind, PayloadModel};
use crate::trace::{Algo, IterateTrace, StepRule, StopRule};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkConfig {
    FullMesh { nodes: usize, node_cap: f64, link_cap: f64 },
    File { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VnSource {
    Generate {
        count: usize,
        vnodes_min: usize,
        vnodes_max: usize,
        link_prob: f64,
        demand_range: (f64, f64),
        #[serde(default)]
        value_rule: ValueRule,
        seed: u64,
    },
    File {
        path: String,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityConfig {
    /// Revenue of accepted requests.
    #[default]
    Revenue,
    /// One unit per allocated vnode instance.
    NodeCount,
    /// Explicit per-node weights.
    WeightedNode { weights: Vec<f64> },
}

impl UtilityConfig {
    pub fn to_spec(&self, n_nodes: usize) -> UtilitySpec {
        match self {
            UtilityConfig::Revenue => UtilitySpec::Revenue,
            UtilityConfig::NodeCount => UtilitySpec::WeightedNode(vec![1.0; n_nodes]),
            UtilityConfig::WeightedNode { weights } => UtilitySpec::WeightedNode(weights.clone()),
        }
    }
}

fn default_k_max() -> usize {
    3
}

/// How a partitioned request is driven through the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// All partitions solved jointly under one master per iteration
    /// (capacity shares or prices over the whole request).
    #[default]
    Parallel,
    /// Partitions embedded one after another in list order, each by its own
    /// run against the capacity left by its predecessors.
    Sequential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub vn_stream: VnSource,
    pub algorithm: Algo,
    #[serde(default = "default_policy")]
    pub partition_policy: PartitionPolicy,
    #[serde(default)]
    pub partition_mode: PartitionMode,
    #[serde(default)]
    pub step_rule: StepRule,
    #[serde(default = "default_stop")]
    pub stop: StopRule,
    #[serde(default)]
    pub utility: UtilityConfig,
    /// Loop-free paths kept per ordered node pair.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

fn default_policy() -> PartitionPolicy {
    PartitionPolicy::None
}

fn default_stop() -> StopRule {
    StopRule { max_iters: 100, rel_gap: Some(1e-4) }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(path.display().to_string(), e.to_string()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let NetworkConfig::FullMesh { nodes, node_cap, link_cap } = &self.network {
            if *nodes < 2 || *node_cap <= 0.0 || *link_cap <= 0.0 {
                return Err(HarnessError::Config("full_mesh needs >= 2 nodes and positive capacities".into()));
            }
        }
        if let VnSource::Generate { vnodes_min, vnodes_max, link_prob, demand_range, .. } =
            &self.vn_stream
        {
            if *vnodes_min < 1 || vnodes_max < vnodes_min {
                return Err(HarnessError::Config("vnode range must satisfy 1 <= min <= max".into()));
            }
            if !(0.0..=1.0).contains(link_prob) {
                return Err(HarnessError::Config("link_prob must be in [0,1]".into()));
            }
            if demand_range.0 <= 0.0 || demand_range.1 < demand_range.0 {
                return Err(HarnessError::Config("demand_range must be positive and non-empty".into()));
            }
        }
        if self.k_max < 1 {
            return Err(HarnessError::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn materialize_network(&self) -> Result<PhysicalNetwork, HarnessError> {
        let mut net = match &self.network {
            NetworkConfig::FullMesh { nodes, node_cap, link_cap } => {
                generate_full_mesh(*nodes, *node_cap, *link_cap)
                    .map_err(|e| HarnessError::Config(e.to_string()))?
            }
            NetworkConfig::File { path } => {
                let file = InstanceFile::read(Path::new(path))?;
                file.physical_network
                    .ok_or_else(|| HarnessError::Config(format!("{path} has no physical_network")))?
            }
        };
        net.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        net.ensure_paths(self.k_max);
        Ok(net)
    }

    pub fn materialize_requests(&self, seed_override: Option<u64>) -> Result<Vec<VnRequest>, HarnessError> {
        match &self.vn_stream {
            VnSource::Generate {
                count,
                vnodes_min,
                vnodes_max,
                link_prob,
                demand_range,
                value_rule,
                seed,
            } => {
                use rand::Rng;
                use rand_chacha::rand_core::SeedableRng;
                let seed = seed_override.unwrap_or(*seed);
                let mut master = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(*count);
                for id in 0..*count {
                    let gamma = master.gen_range(*vnodes_min..=*vnodes_max);
                    let req_seed = master.gen::<u64>();
                    let req = generate_random_vn(id, gamma, *link_prob, *demand_range, *value_rule, req_seed)
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                    out.push(req);
                }
                Ok(out)
            }
            VnSource::File { path } => {
                let file = InstanceFile::read(Path::new(path))?;
                let reqs = file
                    .vn_requests
                    .ok_or_else(|| HarnessError::Config(format!("{path} has no vn_requests")))?;
                for r in &reqs {
                    r.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
                }
                Ok(reqs)
            }
        }
    }
}

/// On-disk instance container (JSON with `physical_network` / `vn_requests`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical_network: Option<PhysicalNetwork>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vn_requests: Option<Vec<VnRequest>>,
}

impl InstanceFile {
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(path.display().to_string(), e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("instance serializes");
        std::fs::write(path, text).map_err(|e| HarnessError::Io(path.display().to_string(), e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VnOutcome {
    pub id: usize,
    pub gamma: usize,
    pub psi: usize,
    pub accepted: bool,
    pub value: f64,
    /// Objective contribution under the configured utility.
    pub contribution: f64,
    pub messages: usize,
    pub bytes: usize,
    pub iterations: usize,
    /// Second matching attempt was needed.
    pub retried: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub outcomes: Vec<VnOutcome>,
    /// `None` (with `error` set) when the stream was empty.
    pub allocation_ratio: Option<f64>,
    pub error: Option<String>,
    pub revenue: f64,
    pub messages: usize,
    pub bytes: usize,
    pub node_residual: Vec<f64>,
    pub link_residual: Vec<f64>,
    pub wall_ms_total: f64,
}

impl ExperimentReport {
    pub fn accepted_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.accepted).count()
    }

    /// Outcome rows plus one summary row. `with_timing` controls the
    /// wall-clock columns so determinism checks can strip them.
    pub fn to_csv(&self, with_timing: bool) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        if with_timing {
            out.push_str("row,id,gamma,psi,accepted,value,contribution,messages,bytes,iterations,retried,wall_ms\n");
        } else {
            out.push_str("row,id,gamma,psi,accepted,value,contribution,messages,bytes,iterations,retried\n");
        }
        for o in &self.outcomes {
            let _ = write!(
                out,
                "vn,{},{},{},{},{},{},{},{},{},{}",
                o.id, o.gamma, o.psi, o.accepted, o.value, o.contribution, o.messages, o.bytes,
                o.iterations, o.retried
            );
            if with_timing {
                let _ = write!(out, ",{}", o.wall_ms);
            }
            out.push('\n');
        }
        let ratio = self.allocation_ratio.map_or("nan".to_string(), |r| r.to_string());
        let _ = write!(
            out,
            "summary,{},{},,{},{},,{},{},,",
            self.outcomes.len(),
            self.accepted_count(),
            ratio,
            self.revenue,
            self.messages,
            self.bytes,
        );
        if with_timing {
            let _ = write!(out, ",{}", self.wall_ms_total);
        }
        out.push('\n');
        out
    }

    pub fn to_jsonl(&self, with_timing: bool) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let mut v = serde_json::to_value(o).expect("outcome serializes");
            if !with_timing {
                v.as_object_mut().unwrap().remove("wall_ms");
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let mut summary = serde_json::json!({
            "row": "summary",
            "count": self.outcomes.len(),
            "accepted": self.accepted_count(),
            "allocation_ratio": self.allocation_ratio,
            "error": self.error,
            "revenue": self.revenue,
            "messages": self.messages,
            "bytes": self.bytes,
        });
        if with_timing {
            summary["wall_ms_total"] = serde_json::json!(self.wall_ms_total);
        }
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

/// Writes `report.csv` / `report.jsonl` (plus nothing else) under `out_dir`.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| HarnessError::Io(out_dir.display().to_string(), e.to_string()))?;
    let (name, body) = match format {
        ReportFormat::Csv => ("report.csv", report.to_csv(true)),
        ReportFormat::JsonLines => ("report.jsonl", report.to_jsonl(true)),
    };
    let path = out_dir.join(name);
    std::fs::write(&path, body).map_err(|e| HarnessError::Io(path.display().to_string(), e.to_string()))?;
    Ok(vec![path])
}

struct ArrivalState {
    node_residual: Vec<f64>,
    link_residual: Vec<f64>,
    committed: Vec<Embedding>,
    /// Set by `commit`: the accepted embedding with its final link paths.
    committed_embedding: Option<Embedding>,
}

/// Runs the sequential-arrival experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    run_experiment_seeded(cfg, None)
}

pub fn run_experiment_seeded(
    cfg: &ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let net = cfg.materialize_network()?;
    let requests = cfg.materialize_requests(seed_override)?;
    let util = cfg.utility.to_spec(net.node_count());

    let mut state = ArrivalState {
        node_residual: net.nodes.iter().map(|n| n.cpu_capacity).collect(),
        link_residual: net.links.iter().map(|l| l.bandwidth).collect(),
        committed: Vec::new(),
        committed_embedding: None,
    };
    let mut outcomes = Vec::with_capacity(requests.len());
    let mut wall_total = 0.0;

    for req in &requests {
        let start = Instant::now();
        let embedded = embed_arrival(cfg, &net, &util, req, &mut state)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        wall_total += wall_ms;

        if embedded.accepted {
            state.committed.push(embedded.embedding.clone());
            // Capacity conservation after every acceptance.
            residual_capacity(&net, &state.committed, &requests)
                .map_err(|e| HarnessError::Solver(format!("conservation broken after vn {}: {e}", req.id)))?;
        }
        outcomes.push(VnOutcome {
            id: req.id,
            gamma: req.vnode_count(),
            psi: req.vlink_count(),
            accepted: embedded.accepted,
            value: req.value,
            contribution: embedded.contribution,
            messages: embedded.messages,
            bytes: embedded.bytes,
            iterations: embedded.iterations,
            retried: embedded.retried,
            wall_ms,
        });
    }

    let accepted = outcomes.iter().filter(|o| o.accepted).count();
    let (allocation_ratio, error) = if outcomes.is_empty() {
        (None, Some("allocation ratio undefined for an empty request stream".to_string()))
    } else {
        (Some(accepted as f64 / outcomes.len() as f64), None)
    };
    Ok(ExperimentReport {
        revenue: outcomes.iter().filter(|o| o.accepted).map(|o| o.value).sum(),
        messages: outcomes.iter().map(|o| o.messages).sum(),
        bytes: outcomes.iter().map(|o| o.bytes).sum(),
        allocation_ratio,
        error,
        outcomes,
        node_residual: state.node_residual,
        link_residual: state.link_residual,
        wall_ms_total: wall_total,
    })
}

struct ArrivalResult {
    accepted: bool,
    embedding: Embedding,
    contribution: f64,
    messages: usize,
    bytes: usize,
    iterations: usize,
    retried: bool,
}

/// Two-attempt matching loop: full residual mask first, tightened mask on
/// retry. The centralized algorithm decides optimally in one shot, so a
/// retry cannot help it and is skipped.
fn embed_arrival(
    cfg: &ExperimentConfig,
    net: &PhysicalNetwork,
    util: &UtilitySpec,
    req: &VnRequest,
    state: &mut ArrivalState,
) -> Result<ArrivalResult, HarnessError> {
    let attempts: &[MaskTightness] = match cfg.algorithm {
        Algo::Monolithic => &[MaskTightness::MinDemand],
        _ => &[MaskTightness::MinDemand, MaskTightness::MaxDemand],
    };
    let mut messages = 0;
    let mut bytes = 0;
    let mut iterations = 0;
    for (attempt, tightness) in attempts.iter().enumerate() {
        let result = match cfg.algorithm {
            Algo::Monolithic => embed_centrally(net, util, req, state, *tightness)?,
            Algo::Primal | Algo::Dual => {
                embed_distributed(cfg, net, util, req, state, *tightness)?
            }
        };
        messages += result.messages;
        bytes += result.bytes;
        iterations += result.iterations;
        if result.accepted || attempt + 1 == attempts.len() {
            return Ok(ArrivalResult {
                retried: attempt > 0,
                messages,
                bytes,
                iterations,
                ..result
            });
        }
    }
    unreachable!("attempt loop always returns")
}

#[derive(Clone, Copy, PartialEq)]
enum MaskTightness {
    /// A node is visible if it can host the request's smallest vnode.
    MinDemand,
    /// Retry mask: only nodes able to host the largest vnode stay visible.
    MaxDemand,
}

fn node_mask(req: &VnRequest, residual: &[f64], tightness: MaskTightness) -> Vec<bool> {
    let min_d = req.vnodes.iter().map(|v| v.demand).fold(f64::INFINITY, f64::min);
    let max_d = req.vnodes.iter().map(|v| v.demand).fold(0.0, f64::max);
    let need = match tightness {
        MaskTightness::MinDemand => min_d,
        MaskTightness::MaxDemand => max_d,
    };
    residual.iter().map(|&r| r >= need - 1e-9).collect()
}

fn embed_centrally(
    net: &PhysicalNetwork,
    util: &UtilitySpec,
    req: &VnRequest,
    state: &mut ArrivalState,
    tightness: MaskTightness,
) -> Result<ArrivalResult, HarnessError> {
    // Residual view of the network: capacities shrink, topology stays.
    let view = residual_view(net, &state.node_residual, &state.link_residual);
    let nodes_avail = node_mask(req, &state.node_residual, tightness);
    let ps = view.path_set().expect("paths enumerated");
    let min_link_d = req
        .vlinks
        .iter()
        .map(|l| l.demand)
        .fold(f64::INFINITY, f64::min);
    let paths_avail: Vec<bool> = (0..ps.len())
        .map(|k| {
            if req.vlink_count() == 0 {
                true
            } else {
                ps.path(k).capacity >= min_link_d - 1e-9
            }
        })
        .collect();
    let mask = DiscoveryMask { node_available: vec![nodes_avail], path_available: vec![paths_avail] };

    let requests = std::slice::from_ref(req);
    let (p, index) = monolith::build_embedding_program(&view, requests, &mask, util, &BuildOptions::default())
        .map_err(|e| HarnessError::Solver(e.to_string()))?;
    let sol = crate::lp::solve_ilp(&p);
    let (accepted, embedding, contribution) = match sol.status {
        crate::lp::Status::Optimal | crate::lp::Status::NodeLimit => {
            let embeddings = monolith::decode(&sol.x, &index, requests, false);
            let emb = embeddings.into_iter().next().unwrap();
            let contribution = if emb.accepted { sol.objective } else { 0.0 };
            (emb.accepted, emb, contribution)
        }
        _ => (false, Embedding::rejected(req), 0.0),
    };
    let iterations = sol.iterations;
    let (accepted, embedding) = if accepted {
        match commit(net, req, &embedding, state) {
            Ok(()) => (true, state.committed_embedding.take().expect("commit stores the embedding")),
            Err(_) => (false, Embedding::rejected(req)),
        }
    } else {
        (false, embedding)
    };
    Ok(ArrivalResult {
        accepted,
        contribution: if accepted { contribution } else { 0.0 },
        embedding,
        messages: 0,
        bytes: 0,
        iterations,
        retried: false,
    })
}

fn embed_distributed(
    cfg: &ExperimentConfig,
    net: &PhysicalNetwork,
    util: &UtilitySpec,
    req: &VnRequest,
    state: &mut ArrivalState,
    tightness: MaskTightness,
) -> Result<ArrivalResult, HarnessError> {
    let vn_split = effective_split(req, &cfg.partition_policy)?;
    if cfg.partition_mode == PartitionMode::Sequential {
        return embed_partitions_sequentially(net, util, req, &vn_split, state, tightness);
    }
    let avail = node_mask(req, &state.node_residual, tightness);
    // Undiscovered nodes surface as zero shared capacity.
    let caps: Vec<f64> = state
        .node_residual
        .iter()
        .zip(&avail)
        .map(|(&r, &a)| if a { r } else { 0.0 })
        .collect();
    let plp = build_partitioned_lp(net, req, &vn_split, util, Some(&caps))
        .map_err(|e| HarnessError::Solver(e.to_string()))?;
    let reference = solve_lp(&plp.coupled_lp()).objective;

    let mut log = MessageLog::new(PayloadModel::default());
    let (hosts, kept, contribution, iterations) = match cfg.algorithm {
        Algo::Primal => {
            let run = primal::run_with(&plp, &cfg.step_rule, &cfg.stop, Some(reference), Some(&mut log));
            let full: Vec<Vec<f64>> = plp
                .parts
                .iter()
                .enumerate()
                .map(|(s, p)| {
                    run.best_x
                        .get(s)
                        .filter(|x| x.len() == p.num_cols())
                        .cloned()
                        .unwrap_or_else(|| vec![0.0; p.num_cols()])
                })
                .collect();
            let rounding = crate::partition::round_node_embedding(&plp, &full);
            (rounding.hosts, rounding.kept, rounding.value, run.trace.len())
        }
        Algo::Dual => {
            let run = dual::run_with(&plp, &cfg.step_rule, &cfg.stop, Some(reference), Some(&mut log));
            let value = run.state.best_primal;
            (run.best_hosts, run.best_kept, value.max(0.0), run.trace.len())
        }
        Algo::Monolithic => unreachable!(),
    };

    // The whole VN is accepted only if every partition was kept and every
    // vnode found a host.
    let complete = kept.iter().all(|&k| k)
        && hosts.len() == plp.part_count()
        && hosts.iter().all(|h| h.iter().all(Option::is_some));
    let mut embedding = Embedding::rejected(req);
    let mut accepted = false;
    if complete {
        let mut node_map = vec![None; req.vnode_count()];
        for (s, part) in vn_split.parts.iter().enumerate() {
            for (vi, &v) in part.vnodes.iter().enumerate() {
                node_map[v] = hosts[s][vi];
            }
        }
        let candidate = Embedding {
            request: req.id,
            accepted: true,
            node_map,
            link_map: vec![None; req.vlink_count()],
            fractional: false,
        };
        // commit() routes the virtual links and re-verifies everything; on
        // success it hands back the embedding with the final paths.
        if commit(net, req, &candidate, state).is_ok() {
            embedding = state.committed_embedding.take().expect("commit stores the embedding");
            accepted = true;
        }
    }

    Ok(ArrivalResult {
        accepted,
        contribution: if accepted { contribution } else { 0.0 },
        embedding,
        messages: log.total_messages,
        bytes: log.total_bytes,
        iterations,
        retried: false,
    })
}

/// Sequential-mode embedding: each partition is provisioned by its own
/// exchange, placing its vnodes and routing its internal vlinks on whatever
/// capacity earlier partitions left over; the links spanning partitions are
/// connected afterwards on the shortest paths still available. An early
/// partition can therefore grab resources a later partition or a crossing
/// link will miss, which is the load unbalancing the policy experiment
/// measures. With policy `none` this reduces to one link-aware whole-VN
/// embedding and a single request/answer pair.
fn embed_partitions_sequentially(
    net: &PhysicalNetwork,
    util: &UtilitySpec,
    req: &VnRequest,
    vn_split: &VnSplit,
    state: &mut ArrivalState,
    tightness: MaskTightness,
) -> Result<ArrivalResult, HarnessError> {
    let avail = node_mask(req, &state.node_residual, tightness);
    let mut work_nodes = state.node_residual.clone();
    let mut work_links = state.link_residual.clone();
    let n_nodes = net.node_count();

    let mut log = MessageLog::new(PayloadModel::default());
    let mut node_map: Vec<Option<usize>> = vec![None; req.vnode_count()];
    let mut link_map: Vec<Option<usize>> = vec![None; req.vlink_count()];
    // The request's vnodes land on distinct hosts whether or not it is
    // partitioned, so hosts taken by earlier partitions are masked out for
    // the later ones.
    let mut taken = vec![false; n_nodes];
    let mut contribution = 0.0;
    let mut iterations = 0;
    let mut complete = true;

    for (s, part) in vn_split.parts.iter().enumerate() {
        let sub = partition_subrequest(req, part);
        let view = residual_view(net, &work_nodes, &work_links);
        let part_avail: Vec<bool> = avail.iter().zip(&taken).map(|(&a, &t)| a && !t).collect();
        log.record(s + 1, AgentId::Master, AgentId::Agent(s), MsgKind::Share, n_nodes);
        let placed = embed_link_aware(&view, &sub, util, &part_avail);
        log.record(
            s + 1,
            AgentId::Agent(s),
            AgentId::Master,
            MsgKind::Optimum,
            sub.vnode_count() + sub.vlink_count() + 1,
        );
        iterations += 1;

        let Some((hosts, paths, value)) = placed else {
            complete = false;
            break;
        };
        for (vi, &v) in part.vnodes.iter().enumerate() {
            node_map[v] = Some(hosts[vi]);
            work_nodes[hosts[vi]] -= req.vnodes[v].demand;
            taken[hosts[vi]] = true;
        }
        let ps = net.path_set().expect("paths enumerated");
        for (ei, &e) in part.vlinks.iter().enumerate() {
            link_map[e] = paths[ei];
            if let Some(pid) = paths[ei] {
                for &lk in &ps.path(pid).links {
                    work_links[lk] -= req.vlinks[e].demand;
                }
            }
        }
        contribution += value;
    }

    let mut embedding = Embedding::rejected(req);
    let mut accepted = false;
    if complete {
        let candidate = Embedding {
            request: req.id,
            accepted: true,
            node_map,
            link_map,
            fractional: false,
        };
        // commit() routes the cross-partition links (their entries are
        // still None) and re-verifies everything against the real residuals.
        if commit(net, req, &candidate, state).is_ok() {
            embedding = state.committed_embedding.take().expect("commit stores the embedding");
            accepted = true;
        }
    }

    Ok(ArrivalResult {
        accepted,
        contribution: if accepted { contribution } else { 0.0 },
        embedding,
        messages: log.total_messages,
        bytes: log.total_bytes,
        iterations,
        retried: false,
    })
}

/// A partition as a standalone request: its vnodes re-indexed, with the
/// vlinks internal to it.
fn partition_subrequest(req: &VnRequest, part: &crate::partition::VnPartition) -> VnRequest {
    let pos = |v: usize| part.vnodes.iter().position(|&x| x == v).unwrap();
    VnRequest {
        id: req.id,
        vnodes: part.vnodes.iter().map(|&v| req.vnodes[v].clone()).collect(),
        vlinks: part
            .vlinks
            .iter()
            .map(|&e| {
                let l = &req.vlinks[e];
                crate::model::VirtualLink { a: pos(l.a), b: pos(l.b), demand: l.demand }
            })
            .collect(),
        value: req.value,
    }
}

/// One-shot link-aware embedding of `sub` on the residual view: the relaxed
/// complete program with acceptance pinned, rounded by the deterministic
/// repair. Returns per-vnode hosts, per-vlink paths and the placement value.
fn embed_link_aware(
    view: &PhysicalNetwork,
    sub: &VnRequest,
    util: &UtilitySpec,
    nodes_avail: &[bool],
) -> Option<(Vec<usize>, Vec<Option<usize>>, f64)> {
    let ps = view.path_set().expect("paths enumerated");
    let min_link_d = sub.vlinks.iter().map(|l| l.demand).fold(f64::INFINITY, f64::min);
    let paths_avail: Vec<bool> = (0..ps.len())
        .map(|k| sub.vlink_count() == 0 || ps.path(k).capacity >= min_link_d - 1e-9)
        .collect();
    let mask = DiscoveryMask {
        node_available: vec![nodes_avail.to_vec()],
        path_available: vec![paths_avail],
    };
    let requests = std::slice::from_ref(sub);
    let (mut p, index) = monolith::build_embedding_program(
        view,
        requests,
        &mask,
        util,
        &BuildOptions { relax: true, ..Default::default() },
    )
    .ok()?;
    // All or nothing: pin acceptance so a partial placement reads as reject.
    p.bounds[index.blocks[0].col_y()] = (1.0, 1.0);
    let sol = solve_lp(&p);
    if sol.status != crate::lp::Status::Optimal {
        return None;
    }
    let emb = monolith::repair_to_integer(&sol, &index, view, requests).remove(0);
    if !emb.accepted {
        return None;
    }
    let hosts: Vec<usize> = emb.node_map.iter().map(|h| h.unwrap()).collect();
    let value = match util {
        UtilitySpec::Revenue => sub.value,
        UtilitySpec::WeightedNode(w) => hosts.iter().map(|&i| w[i]).sum(),
    };
    Some((hosts, emb.link_map, value))
}

/// Clamps the policy's part count to the request size (a 1-vnode request
/// cannot be split in two).
fn effective_split(req: &VnRequest, policy: &PartitionPolicy) -> Result<VnSplit, HarnessError> {
    let gamma = req.vnode_count();
    let clamped = match *policy {
        PartitionPolicy::KWay { k } => PartitionPolicy::KWay { k: k.min(gamma).max(1) },
        PartitionPolicy::CapacityOrdered { k } => {
            PartitionPolicy::CapacityOrdered { k: k.min(gamma).max(1) }
        }
        p => p,
    };
    split(req, &clamped).map_err(|e| HarnessError::Solver(e.to_string()))
}

fn residual_view(net: &PhysicalNetwork, node_res: &[f64], link_res: &[f64]) -> PhysicalNetwork {
    let mut view = net.clone();
    for (n, &r) in view.nodes.iter_mut().zip(node_res) {
        n.cpu_capacity = r.max(1e-9);
    }
    for (l, &r) in view.links.iter_mut().zip(link_res) {
        l.bandwidth = r.max(1e-9);
    }
    if let Some(ps) = view.paths.as_mut() {
        for p in ps.paths.iter_mut() {
            p.capacity = p.links.iter().map(|&k| link_res[k].max(0.0)).fold(f64::INFINITY, f64::min);
        }
    }
    view
}

fn commit(
    net: &PhysicalNetwork,
    req: &VnRequest,
    emb: &Embedding,
    state: &mut ArrivalState,
) -> Result<(), ()> {
    // Node capacities first, on a scratch copy.
    let mut node_res = state.node_residual.clone();
    for (v, host) in emb.node_map.iter().enumerate() {
        let Some(i) = host else { return Err(()) };
        node_res[*i] -= req.vnodes[v].demand;
        if node_res[*i] < -1e-9 {
            return Err(());
        }
    }

    // Virtual links: keep the paths chosen by the solver if present,
    // otherwise route each on the shortest path with enough residual
    // bandwidth between the two hosts.
    let ps = net.path_set().expect("paths enumerated");
    let mut link_res = state.link_residual.clone();
    let mut link_map = emb.link_map.clone();
    for (e, vl) in req.vlinks.iter().enumerate() {
        let (ha, hb) = (emb.node_map[vl.a].unwrap(), emb.node_map[vl.b].unwrap());
        if ha == hb {
            link_map[e] = None;
            continue;
        }
        let chosen = match link_map[e] {
            Some(pid) if path_fits(ps, pid, vl.demand, &link_res) => Some(pid),
            Some(_) | None => ps
                .between(ha, hb)
                .iter()
                .copied()
                .find(|&pid| path_fits(ps, pid, vl.demand, &link_res)),
        };
        let Some(pid) = chosen else { return Err(()) };
        for &lk in &ps.path(pid).links {
            link_res[lk] -= vl.demand;
        }
        link_map[e] = Some(pid);
    }

    state.node_residual = node_res;
    state.link_residual = link_res;
    state.committed_embedding = Some(Embedding { link_map, ..emb.clone() });
    Ok(())
}

fn path_fits(ps: &crate::model::PathSet, pid: usize, demand: f64, link_res: &[f64]) -> bool {
    ps.path(pid).links.iter().all(|&lk| link_res[lk] >= demand - 1e-9)
}

/// Paired-run convergence study: both decompositions on the identical
/// instance, full iteration horizon, aligned gap traces.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub reference: f64,
    pub primal: IterateTrace,
    pub dual: IterateTrace,
    /// Elapsed milliseconds after each iteration, per algorithm.
    pub primal_elapsed_ms: Vec<f64>,
    pub dual_elapsed_ms: Vec<f64>,
    pub gamma: usize,
    pub n_nodes: usize,
}

pub fn run_convergence_study(cfg: &ExperimentConfig, seed_override: Option<u64>) -> Result<StudyReport, HarnessError> {
    cfg.validate()?;
    let net = cfg.materialize_network()?;
    let requests = cfg.materialize_requests(seed_override)?;
    let req = requests
        .first()
        .ok_or_else(|| HarnessError::Config("convergence study needs at least one request".into()))?;
    let util = cfg.utility.to_spec(net.node_count());
    let vn_split = effective_split(req, &cfg.partition_policy)?;
    let plp = build_partitioned_lp(&net, req, &vn_split, &util, None)
        .map_err(|e| HarnessError::Solver(e.to_string()))?;
    let reference = solve_lp(&plp.coupled_lp()).objective;

    // Full horizon: the study records the whole curve.
    let stop = StopRule { max_iters: cfg.stop.max_iters, rel_gap: None };
    let primal_run = primal::run(&plp, &cfg.step_rule, &stop, Some(reference));
    let dual_run = dual::run(&plp, &cfg.step_rule, &stop, Some(reference));

    Ok(StudyReport {
        reference,
        primal_elapsed_ms: primal_run.iter_elapsed_ms,
        dual_elapsed_ms: dual_run.iter_elapsed_ms,
        primal: primal_run.trace,
        dual: dual_run.trace,
        gamma: req.vnode_count(),
        n_nodes: net.node_count(),
    })
}

impl StudyReport {
    /// `t,primal_gap,dual_gap,primal_ms,dual_ms` aligned by iteration.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("t,primal_gap,dual_gap,primal_ms,dual_ms\n");
        let rows = self.primal.rows.len().max(self.dual.rows.len());
        for t in 0..rows {
            let pg = self.primal.rows.get(t).map_or(f64::NAN, |r| r.gap);
            let dg = self.dual.rows.get(t).map_or(f64::NAN, |r| r.gap);
            let pm = self.primal_elapsed_ms.get(t).copied().unwrap_or(f64::NAN);
            let dm = self.dual_elapsed_ms.get(t).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{},{},{},{}", t + 1, pg, dg, pm, dm);
        }
        out
    }
}

#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    Io(String, String),
    Solver(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(s) => write!(f, "configuration error: {s}"),
            HarnessError::Io(path, e) => write!(f, "io error on {path}: {e}"),
            HarnessError::Solver(s) => write!(f, "solver failure: {s}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl HarnessError {
    /// CLI exit code: 2 for config/io problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_, _) => 2,
            HarnessError::Solver(_) => 3,
        }
    }
}
