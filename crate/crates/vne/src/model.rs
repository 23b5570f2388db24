//! Domain model: physical hosting networks, virtual network requests,
//! discovery masks, embeddings, and deterministic instance generators.
//!
//! All types are plain immutable value objects once constructed; nothing in
//! this module holds interior mutability, so instances can be shared freely
//! across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalNode {
    pub id: usize,
    pub cpu_capacity: f64,
}

/// Undirected physical link with a bandwidth capacity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalLink {
    pub a: usize,
    pub b: usize,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalNetwork {
    pub nodes: Vec<PhysicalNode>,
    pub links: Vec<PhysicalLink>,
    /// Loop-free paths, populated on demand by [`enumerate_loopfree_paths`].
    #[serde(skip)]
    pub paths: Option<PathSet>,
}

impl PhysicalNetwork {
    pub fn new(nodes: Vec<PhysicalNode>, links: Vec<PhysicalLink>) -> Result<Self, ModelError> {
        let net = PhysicalNetwork { nodes, links, paths: None };
        net.validate()?;
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(ModelError::Invalid(format!("node {i} has id {}", n.id)));
            }
            if n.cpu_capacity <= 0.0 || !n.cpu_capacity.is_finite() {
                return Err(ModelError::Invalid(format!("node {i} capacity must be positive")));
            }
        }
        for (k, l) in self.links.iter().enumerate() {
            if l.a >= self.nodes.len() || l.b >= self.nodes.len() {
                return Err(ModelError::Invalid(format!("link {k} endpoint out of range")));
            }
            if l.a == l.b {
                return Err(ModelError::Invalid(format!("link {k} is a self-loop")));
            }
            if l.bandwidth <= 0.0 || !l.bandwidth.is_finite() {
                return Err(ModelError::Invalid(format!("link {k} bandwidth must be positive")));
            }
        }
        Ok(())
    }

    /// Populates `self.paths` if absent (or built with a different cap).
    pub fn ensure_paths(&mut self, k_max: usize) {
        let stale = self.paths.as_ref().map_or(true, |ps| ps.k_max != k_max);
        if stale {
            self.paths = Some(enumerate_loopfree_paths(self, k_max));
        }
    }

    pub fn path_set(&self) -> Option<&PathSet> {
        self.paths.as_ref()
    }

    /// Neighbor lists sorted by node id, with the backing link index.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (k, l) in self.links.iter().enumerate() {
            adj[l.a].push((l.b, k));
            adj[l.b].push((l.a, k));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// One loop-free path: node sequence, member links, and the bottleneck
/// capacity (minimum bandwidth along the links).
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
    pub capacity: f64,
}

impl Path {
    pub fn src(&self) -> usize {
        self.nodes[0]
    }
    pub fn dst(&self) -> usize {
        *self.nodes.last().unwrap()
    }
    pub fn hops(&self) -> usize {
        self.links.len()
    }
}

/// Loop-free paths per ordered node pair, globally indexed. Path ids are
/// assigned pair by pair in ascending `(src, dst)` order, and within a pair
/// by (hop count, lexicographic node sequence).
#[derive(Debug, Clone, Default)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pairs: BTreeMap<(usize, usize), Vec<usize>>,
    pub k_max: usize,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path(&self, id: usize) -> &Path {
        &self.paths[id]
    }

    /// Path ids from `s` to `t` (empty when disconnected).
    pub fn between(&self, s: usize, t: usize) -> &[usize] {
        self.pairs.get(&(s, t)).map_or(&[], |v| v.as_slice())
    }
}

/// Enumerates, for every ordered node pair, up to `k_max` simple paths in
/// (hop count, lexicographic node sequence) order. The search is best-first
/// over partial paths so it never expands more of the graph than the first
/// `k_max` paths require.
pub fn enumerate_loopfree_paths(net: &PhysicalNetwork, k_max: usize) -> PathSet {
    assert!(k_max >= 1, "k_max must be at least 1");
    let n = net.node_count();
    let adj = net.adjacency();
    let mut set = PathSet { paths: Vec::new(), pairs: BTreeMap::new(), k_max };

    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let ids = enumerate_pair(net, &adj, s, t, k_max, &mut set.paths);
            if !ids.is_empty() {
                set.pairs.insert((s, t), ids);
            }
        }
    }
    set
}

/// Heap entry ordered so the shortest, lexicographically smallest partial
/// path pops first.
#[derive(PartialEq, Eq)]
struct Partial {
    nodes: Vec<usize>,
    links: Vec<usize>,
}

impl Ord for Partial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .nodes
            .len()
            .cmp(&self.nodes.len())
            .then_with(|| other.nodes.cmp(&self.nodes))
    }
}

impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn enumerate_pair(
    net: &PhysicalNetwork,
    adj: &[Vec<(usize, usize)>],
    s: usize,
    t: usize,
    k_max: usize,
    out: &mut Vec<Path>,
) -> Vec<usize> {
    let mut ids = Vec::new();
    let mut heap = BinaryHeap::new();
    heap.push(Partial { nodes: vec![s], links: vec![] });

    while let Some(partial) = heap.pop() {
        let last = *partial.nodes.last().unwrap();
        if last == t {
            let capacity = partial
                .links
                .iter()
                .map(|&k| net.links[k].bandwidth)
                .fold(f64::INFINITY, f64::min);
            ids.push(out.len());
            out.push(Path { nodes: partial.nodes, links: partial.links, capacity });
            if ids.len() == k_max {
                break;
            }
            continue;
        }
        for &(next, link) in &adj[last] {
            if partial.nodes.contains(&next) {
                continue;
            }
            let mut nodes = partial.nodes.clone();
            nodes.push(next);
            let mut links = partial.links.clone();
            links.push(link);
            heap.push(Partial { nodes, links });
        }
    }
    ids
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirtualNode {
    pub demand: f64,
}

/// Undirected virtual link between two vnode indices of the same request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirtualLink {
    pub a: usize,
    pub b: usize,
    pub demand: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VnRequest {
    pub id: usize,
    pub vnodes: Vec<VirtualNode>,
    pub vlinks: Vec<VirtualLink>,
    /// Revenue collected when the request is accepted.
    pub value: f64,
}

impl VnRequest {
    pub fn vnode_count(&self) -> usize {
        self.vnodes.len()
    }

    pub fn vlink_count(&self) -> usize {
        self.vlinks.len()
    }

    pub fn total_node_demand(&self) -> f64 {
        self.vnodes.iter().map(|v| v.demand).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vnodes.is_empty() {
            return Err(ModelError::Invalid(format!("request {} has no vnodes", self.id)));
        }
        for (v, n) in self.vnodes.iter().enumerate() {
            if n.demand <= 0.0 || !n.demand.is_finite() {
                return Err(ModelError::Invalid(format!(
                    "request {} vnode {v} demand must be positive",
                    self.id
                )));
            }
        }
        for (e, l) in self.vlinks.iter().enumerate() {
            if l.a == l.b || l.a >= self.vnodes.len() || l.b >= self.vnodes.len() {
                return Err(ModelError::Invalid(format!(
                    "request {} vlink {e} has bad endpoints",
                    self.id
                )));
            }
            if l.demand <= 0.0 || !l.demand.is_finite() {
                return Err(ModelError::Invalid(format!(
                    "request {} vlink {e} demand must be positive",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// How the revenue of a generated request is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRule {
    /// Revenue proportional to the requested node capacity.
    #[default]
    NodeDemandSum,
    /// Flat revenue of 1 per request.
    Unit,
}

/// Availability of physical resources per request, as produced by the
/// discovery phase. Layout is `[request][node]` / `[request][path]`.
#[derive(Debug, Clone)]
pub struct DiscoveryMask {
    pub node_available: Vec<Vec<bool>>,
    pub path_available: Vec<Vec<bool>>,
}

impl DiscoveryMask {
    /// Everything visible to every request.
    pub fn full(n_nodes: usize, n_paths: usize, n_requests: usize) -> Self {
        DiscoveryMask {
            node_available: vec![vec![true; n_nodes]; n_requests],
            path_available: vec![vec![true; n_paths]; n_requests],
        }
    }

    /// Discovery limited to nodes within `max_hops` of `origin` (and to
    /// paths whose members all lie inside that ball), for every request.
    pub fn within_hops(net: &PhysicalNetwork, origin: usize, max_hops: usize, n_requests: usize) -> Self {
        let n = net.node_count();
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[origin] = 0;
        queue.push_back(origin);
        let adj = net.adjacency();
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let nodes: Vec<bool> = dist.iter().map(|&d| d <= max_hops).collect();
        let paths: Vec<bool> = match net.path_set() {
            Some(ps) => ps
                .paths
                .iter()
                .map(|p| p.nodes.iter().all(|&u| nodes[u]))
                .collect(),
            None => Vec::new(),
        };
        DiscoveryMask {
            node_available: vec![nodes; n_requests],
            path_available: vec![paths; n_requests],
        }
    }

    pub fn check_dims(&self, n_nodes: usize, n_paths: usize, n_requests: usize) -> Result<(), ModelError> {
        if self.node_available.len() != n_requests || self.path_available.len() != n_requests {
            return Err(ModelError::Invalid("mask request dimension mismatch".into()));
        }
        for row in &self.node_available {
            if row.len() != n_nodes {
                return Err(ModelError::Invalid("mask node dimension mismatch".into()));
            }
        }
        for row in &self.path_available {
            if row.len() != n_paths {
                return Err(ModelError::Invalid("mask path dimension mismatch".into()));
            }
        }
        Ok(())
    }
}

/// A (possibly rejected) embedding of one request: where each vnode and
/// vlink landed. `fractional` marks decodes of relaxed solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub request: usize,
    pub accepted: bool,
    /// Physical node hosting each vnode.
    pub node_map: Vec<Option<usize>>,
    /// Path id carrying each vlink; `None` for co-located endpoints.
    pub link_map: Vec<Option<usize>>,
    pub fractional: bool,
}

impl Embedding {
    pub fn rejected(request: &VnRequest) -> Self {
        Embedding {
            request: request.id,
            accepted: false,
            node_map: vec![None; request.vnode_count()],
            link_map: vec![None; request.vlink_count()],
            fractional: false,
        }
    }

    /// Structural invariants: an accepted embedding maps every vnode and
    /// vlink, uses only discovered resources, and each vlink's path endpoints
    /// match the hosts of its endpoint vnodes.
    pub fn check(
        &self,
        net: &PhysicalNetwork,
        req: &VnRequest,
        mask: Option<&DiscoveryMask>,
        mask_row: usize,
    ) -> Result<(), ModelError> {
        if !self.accepted {
            return Ok(());
        }
        if self.node_map.len() != req.vnode_count() || self.link_map.len() != req.vlink_count() {
            return Err(ModelError::Invalid("embedding dimension mismatch".into()));
        }
        for (v, host) in self.node_map.iter().enumerate() {
            let Some(i) = host else {
                return Err(ModelError::Invalid(format!("vnode {v} unmapped in accepted embedding")));
            };
            if *i >= net.node_count() {
                return Err(ModelError::Invalid(format!("vnode {v} mapped to unknown node")));
            }
            if let Some(m) = mask {
                if !m.node_available[mask_row][*i] {
                    return Err(ModelError::Invalid(format!("vnode {v} uses undiscovered node {i}")));
                }
            }
        }
        let paths = net.path_set();
        for (e, link) in req.vlinks.iter().enumerate() {
            let (ha, hb) = (self.node_map[link.a].unwrap(), self.node_map[link.b].unwrap());
            match self.link_map[e] {
                None => {
                    if ha != hb {
                        return Err(ModelError::Invalid(format!("vlink {e} unmapped across nodes")));
                    }
                }
                Some(pid) => {
                    let ps = paths.ok_or_else(|| ModelError::Invalid("no path set".into()))?;
                    if pid >= ps.len() {
                        return Err(ModelError::Invalid(format!("vlink {e} uses unknown path")));
                    }
                    let p = ps.path(pid);
                    if (p.src(), p.dst()) != (ha, hb) && (p.src(), p.dst()) != (hb, ha) {
                        return Err(ModelError::Invalid(format!(
                            "vlink {e} path endpoints ({}, {}) do not match hosts ({ha}, {hb})",
                            p.src(),
                            p.dst()
                        )));
                    }
                    if let Some(m) = mask {
                        if !m.path_available[mask_row][pid] {
                            return Err(ModelError::Invalid(format!("vlink {e} uses undiscovered path")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fully connected physical network with uniform capacities.
pub fn generate_full_mesh(n: usize, node_cap: f64, link_cap: f64) -> Result<PhysicalNetwork, ModelError> {
    if n < 2 {
        return Err(ModelError::Invalid("a mesh needs at least 2 nodes".into()));
    }
    if node_cap <= 0.0 || link_cap <= 0.0 {
        return Err(ModelError::Invalid("capacities must be positive".into()));
    }
    let nodes = (0..n).map(|id| PhysicalNode { id, cpu_capacity: node_cap }).collect();
    let mut links = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            links.push(PhysicalLink { a, b, bandwidth: link_cap });
        }
    }
    PhysicalNetwork::new(nodes, links)
}

/// Random request: every unordered vnode pair gets a vlink independently
/// with probability `link_prob`; all demands are drawn uniformly from
/// `demand_range`. Identical arguments (including `seed`) reproduce the
/// identical request.
pub fn generate_random_vn(
    id: usize,
    n_vnodes: usize,
    link_prob: f64,
    demand_range: (f64, f64),
    value_rule: ValueRule,
    seed: u64,
) -> Result<VnRequest, ModelError> {
    if n_vnodes < 1 {
        return Err(ModelError::Invalid("a request needs at least one vnode".into()));
    }
    if !(0.0..=1.0).contains(&link_prob) {
        return Err(ModelError::Invalid("link_prob must be in [0,1]".into()));
    }
    let (lo, hi) = demand_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(ModelError::Invalid("demand range must be positive and non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| if lo == hi { lo } else { rng.gen_range(lo..hi) };

    let vnodes: Vec<VirtualNode> = (0..n_vnodes).map(|_| VirtualNode { demand: sample(&mut rng) }).collect();
    let mut vlinks = Vec::new();
    for a in 0..n_vnodes {
        for b in a + 1..n_vnodes {
            if rng.gen_bool(link_prob) {
                vlinks.push(VirtualLink { a, b, demand: sample(&mut rng) });
            }
        }
    }
    let value = match value_rule {
        ValueRule::NodeDemandSum => vnodes.iter().map(|v| v.demand).sum(),
        ValueRule::Unit => 1.0,
    };
    let req = VnRequest { id, vnodes, vlinks, value };
    req.validate()?;
    Ok(req)
}

/// Remaining capacity after committing a set of integral embeddings:
/// per-node residuals and per-path residuals (each path's bottleneck over
/// the residual bandwidth of its member links).
pub fn residual_capacity(
    net: &PhysicalNetwork,
    embeddings: &[Embedding],
    requests: &[VnRequest],
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let by_id: BTreeMap<usize, &VnRequest> = requests.iter().map(|r| (r.id, r)).collect();
    let mut node_res: Vec<f64> = net.nodes.iter().map(|n| n.cpu_capacity).collect();
    let mut link_res: Vec<f64> = net.links.iter().map(|l| l.bandwidth).collect();

    for emb in embeddings {
        if emb.fractional {
            return Err(ModelError::Invalid(format!(
                "embedding of request {} is fractional",
                emb.request
            )));
        }
        if !emb.accepted {
            continue;
        }
        let req = by_id
            .get(&emb.request)
            .ok_or_else(|| ModelError::Invalid(format!("unknown request id {}", emb.request)))?;
        for (v, host) in emb.node_map.iter().enumerate() {
            if let Some(i) = host {
                node_res[*i] -= req.vnodes[v].demand;
                if node_res[*i] < -1e-9 {
                    return Err(ModelError::CapacityViolated(format!("node {i}")));
                }
            }
        }
        let paths = net.path_set();
        for (e, pid) in emb.link_map.iter().enumerate() {
            if let Some(pid) = pid {
                let ps = paths.ok_or_else(|| ModelError::Invalid("no path set".into()))?;
                for &k in &ps.path(*pid).links {
                    link_res[k] -= req.vlinks[e].demand;
                    if link_res[k] < -1e-9 {
                        return Err(ModelError::CapacityViolated(format!("link {k}")));
                    }
                }
            }
        }
    }

    let path_res = match net.path_set() {
        Some(ps) => ps
            .paths
            .iter()
            .map(|p| p.links.iter().map(|&k| link_res[k]).fold(f64::INFINITY, f64::min).max(0.0))
            .collect(),
        None => Vec::new(),
    };
    Ok((node_res, path_res))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    Invalid(String),
    /// A committed embedding oversubscribes the named resource.
    CapacityViolated(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Invalid(s) => write!(f, "invalid model: {s}"),
            ModelError::CapacityViolated(s) => write!(f, "capacity violated on {s}"),
        }
    }
}

impl std::error::Error for ModelError {}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> PhysicalNetwork {
        // A-B, B-C, A-C, all bandwidth 10.
        PhysicalNetwork::new(
            (0..3).map(|id| PhysicalNode { id, cpu_capacity: 5.0 }).collect(),
            vec![
                PhysicalLink { a: 0, b: 1, bandwidth: 10.0 },
                PhysicalLink { a: 1, b: 2, bandwidth: 10.0 },
                PhysicalLink { a: 0, b: 2, bandwidth: 10.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_paths() {
        let net = PhysicalNetwork::new(
            (0..2).map(|id| PhysicalNode { id, cpu_capacity: 1.0 }).collect(),
            vec![PhysicalLink { a: 0, b: 1, bandwidth: 7.0 }],
        )
        .unwrap();
        let ps = enumerate_loopfree_paths(&net, 4);
        assert_eq!(ps.between(0, 1).len(), 1);
        assert_eq!(ps.between(1, 0).len(), 1);
        let p = ps.path(ps.between(0, 1)[0]);
        assert_eq!(p.nodes, vec![0, 1]);
        assert_eq!(p.capacity, 7.0);
    }

    #[test]
    fn triangle_pair_order_and_capacity() {
        let ps = enumerate_loopfree_paths(&triangle(), 4);
        let ids = ps.between(0, 1);
        assert_eq!(ids.len(), 2);
        assert_eq!(ps.path(ids[0]).nodes, vec![0, 1]);
        assert_eq!(ps.path(ids[1]).nodes, vec![0, 2, 1]);
        assert_eq!(ps.path(ids[0]).capacity, 10.0);
        assert_eq!(ps.path(ids[1]).capacity, 10.0);
    }

    #[test]
    fn mesh_truncation_is_lex_first() {
        let net = generate_full_mesh(5, 10.0, 10.0).unwrap();
        assert_eq!(net.links.len(), 10);
        let ps = enumerate_loopfree_paths(&net, 2);
        for s in 0..5 {
            for t in 0..5 {
                if s == t {
                    continue;
                }
                let ids = ps.between(s, t);
                assert_eq!(ids.len(), 2, "pair ({s},{t})");
                assert_eq!(ps.path(ids[0]).nodes, vec![s, t]);
                // Second path: the lexicographically first intermediate.
                let mid = (0..5).find(|&x| x != s && x != t).unwrap();
                assert_eq!(ps.path(ids[1]).nodes, vec![s, mid, t]);
            }
        }
    }

    /// Exhaustive DFS over all simple paths, independent of the production
    /// best-first search; used as the enumeration oracle.
    fn dfs_all_paths(net: &PhysicalNetwork, s: usize, t: usize) -> Vec<Vec<usize>> {
        fn go(
            adj: &[Vec<(usize, usize)>],
            t: usize,
            cur: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            let last = *cur.last().unwrap();
            if last == t {
                out.push(cur.clone());
                return;
            }
            for &(next, _) in &adj[last] {
                if !cur.contains(&next) {
                    cur.push(next);
                    go(adj, t, cur, out);
                    cur.pop();
                }
            }
        }
        let adj = net.adjacency();
        let mut out = Vec::new();
        go(&adj, t, &mut vec![s], &mut out);
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    #[test]
    fn enumeration_matches_exhaustive_oracle_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..60 {
            let n = rng.gen_range(2..=7);
            let mut nodes = Vec::new();
            for id in 0..n {
                nodes.push(PhysicalNode { id, cpu_capacity: 1.0 });
            }
            let mut links = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.5) {
                        links.push(PhysicalLink { a, b, bandwidth: rng.gen_range(1.0..9.0) });
                    }
                }
            }
            let net = PhysicalNetwork::new(nodes, links).unwrap();
            let k_max = rng.gen_range(1..=6);
            let ps = enumerate_loopfree_paths(&net, k_max);
            for s in 0..n {
                for t in 0..n {
                    if s == t {
                        continue;
                    }
                    let oracle = dfs_all_paths(&net, s, t);
                    let got: Vec<Vec<usize>> =
                        ps.between(s, t).iter().map(|&id| ps.path(id).nodes.clone()).collect();
                    let want: Vec<Vec<usize>> = oracle.into_iter().take(k_max).collect();
                    assert_eq!(got, want, "trial {trial} pair ({s},{t}) k_max {k_max}");
                }
            }
        }
    }

    #[test]
    fn hop_limited_discovery_masks_distant_nodes() {
        // Path graph 0-1-2-3: within 1 hop of node 0 -> {0, 1}.
        let mut net = PhysicalNetwork::new(
            (0..4).map(|id| PhysicalNode { id, cpu_capacity: 1.0 }).collect(),
            vec![
                PhysicalLink { a: 0, b: 1, bandwidth: 1.0 },
                PhysicalLink { a: 1, b: 2, bandwidth: 1.0 },
                PhysicalLink { a: 2, b: 3, bandwidth: 1.0 },
            ],
        )
        .unwrap();
        net.ensure_paths(2);
        let mask = DiscoveryMask::within_hops(&net, 0, 1, 1);
        assert_eq!(mask.node_available[0], vec![true, true, false, false]);
        let ps = net.path_set().unwrap();
        for (k, &avail) in mask.path_available[0].iter().enumerate() {
            let inside = ps.path(k).nodes.iter().all(|&u| u <= 1);
            assert_eq!(avail, inside, "path {k}");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_random_vn(3, 50, 0.5, (0.5, 1.5), ValueRule::NodeDemandSum, 99).unwrap();
        let b = generate_random_vn(3, 50, 0.5, (0.5, 1.5), ValueRule::NodeDemandSum, 99).unwrap();
        assert_eq!(a.vnodes.len(), b.vnodes.len());
        assert_eq!(a.vlinks.len(), b.vlinks.len());
        assert_eq!(a.value, b.value);
        for (x, y) in a.vnodes.iter().zip(&b.vnodes) {
            assert_eq!(x.demand, y.demand);
        }
        assert!((a.value - a.total_node_demand()).abs() < 1e-12);
    }

    #[test]
    fn vn_link_probability_extremes() {
        let none = generate_random_vn(0, 6, 0.0, (1.0, 2.0), ValueRule::Unit, 7).unwrap();
        assert_eq!(none.vlink_count(), 0);
        let full = generate_random_vn(1, 4, 1.0, (1.0, 2.0), ValueRule::Unit, 7).unwrap();
        assert_eq!(full.vlink_count(), 6);
        assert!(generate_random_vn(2, 3, 0.5, (2.0, 1.0), ValueRule::Unit, 7).is_err());
        assert!(generate_full_mesh(1, 1.0, 1.0).is_err());
        assert_eq!(generate_full_mesh(2, 1.0, 1.0).unwrap().links.len(), 1);
    }

    #[test]
    fn residuals_track_and_report_violations() {
        let mut net = triangle();
        net.ensure_paths(2);
        let req = VnRequest {
            id: 0,
            vnodes: vec![VirtualNode { demand: 3.0 }],
            vlinks: vec![],
            value: 3.0,
        };
        let (node_res, _) = residual_capacity(&net, &[], &[req.clone()]).unwrap();
        assert_eq!(node_res, vec![5.0, 5.0, 5.0]);

        let emb = Embedding {
            request: 0,
            accepted: true,
            node_map: vec![Some(1)],
            link_map: vec![],
            fractional: false,
        };
        let (node_res, path_res) = residual_capacity(&net, &[emb.clone()], &[req.clone()]).unwrap();
        assert_eq!(node_res[1], 2.0);
        assert!(path_res.iter().all(|&c| c == 10.0));

        // Two embeddings oversubscribe node 1 (3 + 3 > 5).
        let err = residual_capacity(&net, &[emb.clone(), emb], &[req]).unwrap_err();
        assert_eq!(err, ModelError::CapacityViolated("node 1".into()));
    }

    #[test]
    fn residuals_are_monotone_under_added_embeddings() {
        let mut net = triangle();
        net.ensure_paths(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..40 {
            let reqs: Vec<VnRequest> = (0..3)
                .map(|id| {
                    generate_random_vn(id, rng.gen_range(1..=2), 1.0, (0.1, 0.8), ValueRule::Unit, trial * 10 + id as u64)
                        .unwrap()
                })
                .collect();
            let embs: Vec<Embedding> = reqs
                .iter()
                .map(|r| {
                    let host = rng.gen_range(0..3);
                    let node_map = vec![Some(host); r.vnode_count()];
                    let link_map = r.vlinks.iter().map(|_| None).collect();
                    Embedding { request: r.id, accepted: true, node_map, link_map, fractional: false }
                })
                .collect();
            for cut in 0..embs.len() {
                let before = residual_capacity(&net, &embs[..cut], &reqs);
                let after = residual_capacity(&net, &embs[..cut + 1], &reqs);
                let (Ok((n0, p0)), Ok((n1, p1))) = (before, after) else { continue };
                assert!(n0.iter().zip(&n1).all(|(a, b)| b <= a), "trial {trial}");
                assert!(p0.iter().zip(&p1).all(|(a, b)| b <= a), "trial {trial}");
            }
        }
    }
}
