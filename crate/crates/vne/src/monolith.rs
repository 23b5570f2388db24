//! Central (monolithic) embedding program: builds the complete node + path
//! embedding program for a set of requests and solves it as one integer (or
//! relaxed) program. Serves as the correctness reference for the
//! decomposition modules.
//!
//! Variable families per request, in column order: discovery indicators
//! `nP[i]` and `p[k]` (fixed to the discovery mask through their bounds),
//! node mapping `nV[v,i]`, path mapping `l[e,k]`, acceptance `y`, and the
//! linearization products `w[v,i] = y*nV[v,i]`, `wl[e,k] = y*l[e,k]` that
//! keep the capacity rows linear. Mapping rows are the at-most-once form
//! `sum_i nV[v,i] <= 1`; acceptance rows `y <= sum_i nV[v,i]` (one per
//! vnode, one per vlink) make `y = 1` require a complete mapping, so the
//! per-pair acceptance coupling is enforced only where a demand relationship
//! exists instead of over every resource. Each request's vnodes land on
//! distinct physical nodes (`sum_v nV[v,i] <= 1`), which keeps the counting
//! rows equivalent to their aggregate form. Path capacity is charged on the
//! physical links a path crosses; `strict_path_capacity` switches to
//! independent per-path rows instead.

use crate::lp::{solve_ilp_with, LpProblem, LpSolution, SolverOptions, Status};
use crate::model::{DiscoveryMask, Embedding, ModelError, PhysicalNetwork, VnRequest};
use serde::Serialize;

/// Utility shaping of the objective.
#[derive(Debug, Clone)]
pub enum UtilitySpec {
    /// `sum_j value_j * y_j` — revenue of the accepted requests.
    Revenue,
    /// Per-node weights paid for every allocated (accepted and mapped)
    /// vnode instance on that node.
    WeightedNode(Vec<f64>),
}

impl UtilitySpec {
    fn validate(&self, n_nodes: usize) -> Result<(), ModelError> {
        if let UtilitySpec::WeightedNode(w) = self {
            if w.len() != n_nodes {
                return Err(ModelError::Invalid("weight vector length != node count".into()));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(ModelError::Invalid("weights must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Objective weight of one allocated vnode instance on node `i`, for the
    /// node-embedding relaxation that carries no acceptance variable.
    pub fn node_weight(&self, req: &VnRequest, vnode: usize, node: usize) -> f64 {
        match self {
            // Split the request value across vnodes proportionally to demand,
            // so a fully embedded request is worth exactly its value.
            UtilitySpec::Revenue => req.value * req.vnodes[vnode].demand / req.total_node_demand(),
            UtilitySpec::WeightedNode(w) => w[node],
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Relax all binaries into `[0, 1]`.
    pub relax: bool,
    /// Literal per-path capacity rows instead of physical-link rows.
    pub strict_path_capacity: bool,
}

/// Column layout of one request block.
#[derive(Debug, Clone, Serialize)]
pub struct RequestBlock {
    pub request_id: usize,
    pub start: usize,
    pub gamma: usize,
    pub psi: usize,
    n_nodes: usize,
    n_paths: usize,
}

impl RequestBlock {
    pub fn col_np(&self, i: usize) -> usize {
        self.start + i
    }
    pub fn col_p(&self, k: usize) -> usize {
        self.start + self.n_nodes + k
    }
    pub fn col_nv(&self, v: usize, i: usize) -> usize {
        self.start + self.n_nodes + self.n_paths + v * self.n_nodes + i
    }
    pub fn col_l(&self, e: usize, k: usize) -> usize {
        self.start + self.n_nodes + self.n_paths + self.gamma * self.n_nodes + e * self.n_paths + k
    }
    pub fn col_y(&self) -> usize {
        self.col_l(self.psi, 0) // one past the l block
    }
    pub fn col_w(&self, v: usize, i: usize) -> usize {
        self.col_y() + 1 + v * self.n_nodes + i
    }
    pub fn col_wl(&self, e: usize, k: usize) -> usize {
        self.col_y() + 1 + self.gamma * self.n_nodes + e * self.n_paths + k
    }
    pub fn width(&self) -> usize {
        self.n_nodes + self.n_paths + 2 * (self.gamma * self.n_nodes + self.psi * self.n_paths) + 1
    }
}

/// Machine-readable map from model variables to program columns.
#[derive(Debug, Clone, Serialize)]
pub struct ProgramIndex {
    pub n_nodes: usize,
    pub n_paths: usize,
    pub blocks: Vec<RequestBlock>,
    pub total_cols: usize,
}

impl ProgramIndex {
    /// `variable name -> column` sidecar, one entry per column.
    pub fn to_json(&self) -> serde_json::Value {
        let mut entries = Vec::with_capacity(self.total_cols);
        for b in &self.blocks {
            let j = b.request_id;
            for i in 0..self.n_nodes {
                entries.push((format!("r{j}.nP[{i}]"), b.col_np(i)));
            }
            for k in 0..self.n_paths {
                entries.push((format!("r{j}.p[{k}]"), b.col_p(k)));
            }
            for v in 0..b.gamma {
                for i in 0..self.n_nodes {
                    entries.push((format!("r{j}.nV[{v},{i}]"), b.col_nv(v, i)));
                }
            }
            for e in 0..b.psi {
                for k in 0..self.n_paths {
                    entries.push((format!("r{j}.l[{e},{k}]"), b.col_l(e, k)));
                }
            }
            entries.push((format!("r{j}.y"), b.col_y()));
            for v in 0..b.gamma {
                for i in 0..self.n_nodes {
                    entries.push((format!("r{j}.w[{v},{i}]"), b.col_w(v, i)));
                }
            }
            for e in 0..b.psi {
                for k in 0..self.n_paths {
                    entries.push((format!("r{j}.wl[{e},{k}]"), b.col_wl(e, k)));
                }
            }
        }
        serde_json::json!({
            "n_nodes": self.n_nodes,
            "n_paths": self.n_paths,
            "columns": entries.into_iter().map(|(n, c)| serde_json::json!({"name": n, "col": c})).collect::<Vec<_>>(),
        })
    }
}

/// Builds the complete embedding program for `(net, requests, mask)`.
pub fn build_embedding_program(
    net: &PhysicalNetwork,
    requests: &[VnRequest],
    mask: &DiscoveryMask,
    util: &UtilitySpec,
    opts: &BuildOptions,
) -> Result<(LpProblem, ProgramIndex), ModelError> {
    net.validate()?;
    util.validate(net.node_count())?;
    let n_nodes = net.node_count();
    let n_paths = net.path_set().map_or(0, |ps| ps.len());
    mask.check_dims(n_nodes, n_paths, requests.len())?;
    for r in requests {
        r.validate()?;
        if r.vlink_count() > 0 && net.path_set().is_none() {
            return Err(ModelError::Invalid(format!(
                "request {} has vlinks but the network has no enumerated paths",
                r.id
            )));
        }
    }

    let mut blocks = Vec::with_capacity(requests.len());
    let mut start = 0;
    for r in requests {
        let b = RequestBlock {
            request_id: r.id,
            start,
            gamma: r.vnode_count(),
            psi: r.vlink_count(),
            n_nodes,
            n_paths,
        };
        start += b.width();
        blocks.push(b);
    }
    let index = ProgramIndex { n_nodes, n_paths, blocks, total_cols: start };

    let mut p = LpProblem::new(index.total_cols);
    for (jr, r) in requests.iter().enumerate() {
        let b = &index.blocks[jr];
        let j = r.id;

        // Discovery indicators are inputs: fix them through their bounds.
        for i in 0..n_nodes {
            let avail = if mask.node_available[jr][i] { 1.0 } else { 0.0 };
            p.bounds[b.col_np(i)] = (avail, avail);
            p.integral[b.col_np(i)] = true;
        }
        for k in 0..n_paths {
            let avail = if mask.path_available[jr][k] { 1.0 } else { 0.0 };
            p.bounds[b.col_p(k)] = (avail, avail);
            p.integral[b.col_p(k)] = true;
        }
        if !opts.relax {
            for v in 0..b.gamma {
                for i in 0..n_nodes {
                    p.integral[b.col_nv(v, i)] = true;
                    p.integral[b.col_w(v, i)] = true;
                }
            }
            for e in 0..b.psi {
                for k in 0..n_paths {
                    p.integral[b.col_l(e, k)] = true;
                    p.integral[b.col_wl(e, k)] = true;
                }
            }
            p.integral[b.col_y()] = true;
        }

        // Discovery counts: at least gamma nodes and psi paths visible.
        p.add_row(
            (0..n_nodes).map(|i| (b.col_np(i), -1.0)).collect(),
            -(b.gamma as f64),
            format!("discover_nodes[{j}]"),
        );
        p.add_row(
            (0..n_paths).map(|k| (b.col_p(k), -1.0)).collect(),
            -(b.psi as f64),
            format!("discover_paths[{j}]"),
        );

        // Mapping counts: each vnode / vlink mapped at most once.
        for v in 0..b.gamma {
            p.add_row(
                (0..n_nodes).map(|i| (b.col_nv(v, i), 1.0)).collect(),
                1.0,
                format!("map_node[{j},{v}]"),
            );
        }
        for e in 0..b.psi {
            p.add_row(
                (0..n_paths).map(|k| (b.col_l(e, k), 1.0)).collect(),
                1.0,
                format!("map_link[{j},{e}]"),
            );
        }

        // Mapping only over discovered resources.
        for v in 0..b.gamma {
            for i in 0..n_nodes {
                p.add_row(
                    vec![(b.col_nv(v, i), 1.0), (b.col_np(i), -1.0)],
                    0.0,
                    format!("avail_node[{j},{v},{i}]"),
                );
            }
        }
        for e in 0..b.psi {
            for k in 0..n_paths {
                p.add_row(
                    vec![(b.col_l(e, k), 1.0), (b.col_p(k), -1.0)],
                    0.0,
                    format!("avail_path[{j},{e},{k}]"),
                );
            }
        }

        // A vlink may only ride a path whose endpoints host its vnodes.
        if let Some(ps) = net.path_set() {
            for (e, vl) in r.vlinks.iter().enumerate() {
                for k in 0..n_paths {
                    let path = ps.path(k);
                    p.add_row(
                        vec![(b.col_l(e, k), 1.0), (b.col_nv(vl.a, path.src()), -1.0)],
                        0.0,
                        format!("endpoint_src[{j},{e},{k}]"),
                    );
                    p.add_row(
                        vec![(b.col_l(e, k), 1.0), (b.col_nv(vl.b, path.dst()), -1.0)],
                        0.0,
                        format!("endpoint_dst[{j},{e},{k}]"),
                    );
                }
            }
        }

        // Acceptance needs every vnode and vlink mapped somewhere.
        for v in 0..b.gamma {
            let mut coeffs = vec![(b.col_y(), 1.0)];
            coeffs.extend((0..n_nodes).map(|i| (b.col_nv(v, i), -1.0)));
            p.add_row(coeffs, 0.0, format!("accept_node[{j},{v}]"));
        }
        for e in 0..b.psi {
            let mut coeffs = vec![(b.col_y(), 1.0)];
            coeffs.extend((0..n_paths).map(|k| (b.col_l(e, k), -1.0)));
            p.add_row(coeffs, 0.0, format!("accept_link[{j},{e}]"));
        }

        // Vnodes of one request land on distinct physical nodes.
        for i in 0..n_nodes {
            p.add_row(
                (0..b.gamma).map(|v| (b.col_nv(v, i), 1.0)).collect(),
                1.0,
                format!("pack_node[{j},{i}]"),
            );
        }

        // w = y * nV and wl = y * l, linearized.
        for v in 0..b.gamma {
            for i in 0..n_nodes {
                let (w, y, nv) = (b.col_w(v, i), b.col_y(), b.col_nv(v, i));
                p.add_row(vec![(w, 1.0), (y, -1.0)], 0.0, format!("w_le_y[{j},{v},{i}]"));
                p.add_row(vec![(w, 1.0), (nv, -1.0)], 0.0, format!("w_le_nv[{j},{v},{i}]"));
                p.add_row(
                    vec![(y, 1.0), (nv, 1.0), (w, -1.0)],
                    1.0,
                    format!("w_ge_sum[{j},{v},{i}]"),
                );
            }
        }
        for e in 0..b.psi {
            for k in 0..n_paths {
                let (wl, y, l) = (b.col_wl(e, k), b.col_y(), b.col_l(e, k));
                p.add_row(vec![(wl, 1.0), (y, -1.0)], 0.0, format!("wl_le_y[{j},{e},{k}]"));
                p.add_row(vec![(wl, 1.0), (l, -1.0)], 0.0, format!("wl_le_l[{j},{e},{k}]"));
                p.add_row(
                    vec![(y, 1.0), (l, 1.0), (wl, -1.0)],
                    1.0,
                    format!("wl_ge_sum[{j},{e},{k}]"),
                );
            }
        }
    }

    // Shared node capacity: allocated vnode demand per physical node.
    for i in 0..n_nodes {
        let mut coeffs = Vec::new();
        for (jr, r) in requests.iter().enumerate() {
            let b = &index.blocks[jr];
            for (v, vn) in r.vnodes.iter().enumerate() {
                coeffs.push((b.col_w(v, i), vn.demand));
            }
        }
        p.add_row(coeffs, net.nodes[i].cpu_capacity, format!("cap_node[{i}]"));
    }

    // Shared bandwidth: per physical link by default, per path in strict mode.
    if let Some(ps) = net.path_set() {
        if opts.strict_path_capacity {
            for k in 0..n_paths {
                let mut coeffs = Vec::new();
                for (jr, r) in requests.iter().enumerate() {
                    let b = &index.blocks[jr];
                    for (e, vl) in r.vlinks.iter().enumerate() {
                        coeffs.push((b.col_wl(e, k), vl.demand));
                    }
                }
                p.add_row(coeffs, ps.path(k).capacity, format!("cap_path[{k}]"));
            }
        } else {
            for (lk, link) in net.links.iter().enumerate() {
                let mut coeffs = Vec::new();
                for (jr, r) in requests.iter().enumerate() {
                    let b = &index.blocks[jr];
                    for k in 0..n_paths {
                        if !ps.path(k).links.contains(&lk) {
                            continue;
                        }
                        for (e, vl) in r.vlinks.iter().enumerate() {
                            coeffs.push((b.col_wl(e, k), vl.demand));
                        }
                    }
                }
                p.add_row(coeffs, link.bandwidth, format!("cap_link[{lk}]"));
            }
        }
    }

    // Objective.
    match util {
        UtilitySpec::Revenue => {
            for (jr, r) in requests.iter().enumerate() {
                p.cost[index.blocks[jr].col_y()] = r.value;
            }
        }
        UtilitySpec::WeightedNode(w) => {
            for (jr, r) in requests.iter().enumerate() {
                let b = &index.blocks[jr];
                for v in 0..r.vnode_count() {
                    for i in 0..n_nodes {
                        p.cost[b.col_w(v, i)] = w[i];
                    }
                }
            }
        }
    }

    Ok((p, index))
}

/// Solves the full program integrally and decodes per-request embeddings.
/// Uses the full-availability mask.
pub fn embed_monolithic(
    net: &PhysicalNetwork,
    requests: &[VnRequest],
    util: &UtilitySpec,
) -> Result<(Vec<Embedding>, f64), ModelError> {
    embed_monolithic_with(net, requests, util, &BuildOptions::default(), &SolverOptions::default())
}

pub fn embed_monolithic_with(
    net: &PhysicalNetwork,
    requests: &[VnRequest],
    util: &UtilitySpec,
    build: &BuildOptions,
    solver: &SolverOptions,
) -> Result<(Vec<Embedding>, f64), ModelError> {
    let n_paths = net.path_set().map_or(0, |ps| ps.len());
    let mask = DiscoveryMask::full(net.node_count(), n_paths, requests.len());
    let (p, index) = build_embedding_program(net, requests, &mask, util, build)?;
    let sol = solve_ilp_with(&p, solver);
    match sol.status {
        Status::Optimal | Status::NodeLimit => {
            let embeddings = decode(&sol.x, &index, requests, false);
            Ok((embeddings, sol.objective))
        }
        _ => {
            // No feasible program (e.g. empty mask rows): every request is
            // rejected and the run reports zero utility.
            log::warn!("monolithic solve ended {}; rejecting all requests", sol.status);
            Ok((requests.iter().map(Embedding::rejected).collect(), 0.0))
        }
    }
}

/// Decodes a solution vector into per-request embeddings. For integral
/// points the argmax rules below pick the unique assigned resource.
pub fn decode(x: &[f64], index: &ProgramIndex, requests: &[VnRequest], fractional: bool) -> Vec<Embedding> {
    requests
        .iter()
        .enumerate()
        .map(|(jr, r)| {
            let b = &index.blocks[jr];
            let accepted = x[b.col_y()] >= 0.5;
            if !accepted {
                return Embedding::rejected(r);
            }
            let node_map = (0..b.gamma)
                .map(|v| argmax_positive((0..index.n_nodes).map(|i| x[b.col_nv(v, i)])))
                .collect();
            let link_map = (0..b.psi)
                .map(|e| argmax_positive((0..index.n_paths).map(|k| x[b.col_l(e, k)])))
                .collect();
            Embedding { request: r.id, accepted, node_map, link_map, fractional }
        })
        .collect()
}

/// Index of the strictly largest positive entry; ties go to the lowest index.
fn argmax_positive(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v > 1e-9 && best.map_or(true, |(_, bv)| v > bv + 1e-12) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Deterministic rounding of a relaxed solution into capacity-feasible
/// integral embeddings. Per vnode the host with the largest fractional
/// weight wins (ties to the lowest node id, hosts already taken by the same
/// request excluded); per vlink the consistent path with the largest
/// fractional weight wins. If the rounded point oversubscribes a resource,
/// the accepted request with the lowest value is rejected and the check
/// repeats, so the result is always capacity-feasible.
pub fn repair_to_integer(
    frac: &LpSolution,
    index: &ProgramIndex,
    net: &PhysicalNetwork,
    requests: &[VnRequest],
) -> Vec<Embedding> {
    let x = &frac.x;
    let mut accepted: Vec<bool> = index.blocks.iter().map(|b| x[b.col_y()] >= 0.5).collect();

    // Round mappings once; acceptance is re-evaluated against capacity.
    let mut maps: Vec<(Vec<Option<usize>>, Vec<Option<usize>>)> = Vec::with_capacity(requests.len());
    for (jr, r) in requests.iter().enumerate() {
        let b = &index.blocks[jr];
        let mut node_map: Vec<Option<usize>> = vec![None; b.gamma];
        let mut used = vec![false; index.n_nodes];
        for v in 0..b.gamma {
            let pick = argmax_allowed((0..index.n_nodes).map(|i| x[b.col_nv(v, i)]), &used);
            if let Some(i) = pick {
                used[i] = true;
            }
            node_map[v] = pick;
        }
        let mut link_map: Vec<Option<usize>> = vec![None; b.psi];
        if let Some(ps) = net.path_set() {
            for (e, vl) in r.vlinks.iter().enumerate() {
                let (Some(ha), Some(hb)) = (node_map[vl.a], node_map[vl.b]) else {
                    continue;
                };
                if ha == hb {
                    continue; // co-located endpoints need no path
                }
                let mut best: Option<(usize, f64)> = None;
                for &pid in ps.between(ha, hb) {
                    let weight = x[b.col_l(e, pid)];
                    if best.map_or(true, |(_, bw)| weight > bw + 1e-12) {
                        best = Some((pid, weight));
                    }
                }
                link_map[e] = best.map(|(pid, _)| pid);
            }
        }
        if accepted[jr] {
            let full_nodes = node_map.iter().all(Option::is_some);
            let full_links = r
                .vlinks
                .iter()
                .enumerate()
                .all(|(e, vl)| link_map[e].is_some() || node_map[vl.a] == node_map[vl.b]);
            if !(full_nodes && full_links) {
                accepted[jr] = false;
            }
        }
        maps.push((node_map, link_map));
    }

    // Capacity check loop: drop the lowest-value offender until feasible.
    loop {
        let mut node_use = vec![0.0; index.n_nodes];
        let mut link_use = vec![0.0; net.links.len()];
        for (jr, r) in requests.iter().enumerate() {
            if !accepted[jr] {
                continue;
            }
            let (node_map, link_map) = &maps[jr];
            for (v, host) in node_map.iter().enumerate() {
                if let Some(i) = host {
                    node_use[*i] += r.vnodes[v].demand;
                }
            }
            if let Some(ps) = net.path_set() {
                for (e, pid) in link_map.iter().enumerate() {
                    if let Some(pid) = pid {
                        for &lk in &ps.path(*pid).links {
                            link_use[lk] += r.vlinks[e].demand;
                        }
                    }
                }
            }
        }
        let node_ok = node_use
            .iter()
            .enumerate()
            .all(|(i, u)| *u <= net.nodes[i].cpu_capacity + 1e-9);
        let link_ok = link_use
            .iter()
            .enumerate()
            .all(|(k, u)| *u <= net.links[k].bandwidth + 1e-9);
        if node_ok && link_ok {
            break;
        }
        let victim = requests
            .iter()
            .enumerate()
            .filter(|(jr, _)| accepted[*jr])
            .min_by(|(_, a), (_, b)| a.value.total_cmp(&b.value))
            .map(|(jr, _)| jr);
        match victim {
            Some(jr) => accepted[jr] = false,
            None => break, // nothing accepted yet capacity "violated": cannot happen
        }
    }

    requests
        .iter()
        .enumerate()
        .map(|(jr, r)| {
            if !accepted[jr] {
                return Embedding::rejected(r);
            }
            let (node_map, link_map) = maps[jr].clone();
            Embedding { request: r.id, accepted: true, node_map, link_map, fractional: false }
        })
        .collect()
}

fn argmax_allowed(values: impl Iterator<Item = f64>, taken: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if taken[i] {
            continue;
        }
        if v > 1e-9 && best.map_or(true, |(_, bv)| v > bv + 1e-12) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}
