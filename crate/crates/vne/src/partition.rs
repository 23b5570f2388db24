//! VN partitioning policies and the block structure of the partitioned
//! node-embedding program: per partition `s` a local system
//! `A_s x_s <= b_s` (one assignment row per vnode) plus a coupling block
//! `F_s` of vnode demands against the shared node capacities `h`.
//!
//! Virtual links are not part of the node-embedding program; links internal
//! to a partition stay attached to it and links spanning two partitions are
//! recorded separately so the experiment harness can charge their bandwidth
//! after node placement.

use crate::lp::{LpProblem, Row};
use crate::model::{ModelError, PhysicalNetwork, VnRequest};
use crate::monolith::UtilitySpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionPolicy {
    /// Whole request as a single partition.
    None,
    /// Two parts of `ceil(gamma/2)` and `floor(gamma/2)` vnodes.
    Halves,
    /// `k` near-equal parts by ascending vnode index.
    KWay { k: usize },
    /// `k` parts ordered by descending total requested capacity.
    CapacityOrdered { k: usize },
}

impl PartitionPolicy {
    pub fn part_count(&self, gamma: usize) -> usize {
        match self {
            PartitionPolicy::None => 1,
            PartitionPolicy::Halves => 2.min(gamma),
            PartitionPolicy::KWay { k } | PartitionPolicy::CapacityOrdered { k } => *k,
        }
    }
}

/// One partition: its vnodes (ascending global indices) and the request
/// vlink indices fully internal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct VnPartition {
    pub vnodes: Vec<usize>,
    pub vlinks: Vec<usize>,
}

impl VnPartition {
    pub fn total_demand(&self, req: &VnRequest) -> f64 {
        let nodes: f64 = self.vnodes.iter().map(|&v| req.vnodes[v].demand).sum();
        let links: f64 = self.vlinks.iter().map(|&e| req.vlinks[e].demand).sum();
        nodes + links
    }
}

/// A request split into partitions, with the cross-partition vlinks kept
/// aside for post-placement connection accounting.
#[derive(Debug, Clone)]
pub struct VnSplit {
    pub request_id: usize,
    pub parts: Vec<VnPartition>,
    pub cross_vlinks: Vec<usize>,
}

/// Splits `req` according to `policy`. Partitions are disjoint, cover all
/// vnodes, and the result is deterministic.
pub fn split(req: &VnRequest, policy: &PartitionPolicy) -> Result<VnSplit, ModelError> {
    let gamma = req.vnode_count();
    let k = match policy {
        PartitionPolicy::None => 1,
        PartitionPolicy::Halves => 2.min(gamma),
        PartitionPolicy::KWay { k } | PartitionPolicy::CapacityOrdered { k } => *k,
    };
    if k < 1 {
        return Err(ModelError::Invalid("partition count must be at least 1".into()));
    }
    if k > gamma {
        return Err(ModelError::Invalid(format!(
            "cannot split {gamma} vnodes into {k} partitions"
        )));
    }

    // Contiguous chunks by ascending vnode index; the first `gamma % k`
    // parts take the extra vnode (so halves = ceil/floor).
    let base = gamma / k;
    let extra = gamma % k;
    let mut parts = Vec::with_capacity(k);
    let mut next = 0;
    for s in 0..k {
        let size = base + usize::from(s < extra);
        let vnodes: Vec<usize> = (next..next + size).collect();
        next += size;
        parts.push(VnPartition { vnodes, vlinks: Vec::new() });
    }

    if let PartitionPolicy::CapacityOrdered { .. } = policy {
        let mut order: Vec<usize> = (0..parts.len()).collect();
        order.sort_by(|&a, &b| {
            parts[b]
                .total_demand(req)
                .total_cmp(&parts[a].total_demand(req))
                .then(a.cmp(&b))
        });
        parts = order.into_iter().map(|s| parts[s].clone()).collect();
    }

    // Attach internal vlinks; everything spanning two parts is a cross link.
    let mut owner = vec![0usize; gamma];
    for (s, part) in parts.iter().enumerate() {
        for &v in &part.vnodes {
            owner[v] = s;
        }
    }
    let mut cross = Vec::new();
    for (e, vl) in req.vlinks.iter().enumerate() {
        if owner[vl.a] == owner[vl.b] {
            parts[owner[vl.a]].vlinks.push(e);
        } else {
            cross.push(e);
        }
    }

    Ok(VnSplit { request_id: req.id, parts, cross_vlinks: cross })
}

/// Block data of one partition's subproblem. Column `c` stands for the
/// assignment of `columns[c].0` (global vnode index) to physical node
/// `columns[c].1`; `demands[c]` is the corresponding entry of `F_s`.
#[derive(Debug, Clone)]
pub struct PartBlock {
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
    pub row_labels: Vec<String>,
    pub columns: Vec<(usize, usize)>,
    pub demands: Vec<f64>,
}

impl PartBlock {
    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    /// F_s x_s: demand placed on each shared node.
    pub fn usage(&self, n_nodes: usize, x: &[f64]) -> Vec<f64> {
        let mut use_ = vec![0.0; n_nodes];
        for (c, &(_, node)) in self.columns.iter().enumerate() {
            use_[node] += self.demands[c] * x[c];
        }
        use_
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// The partitioned node-embedding program `max sum_s c_s x_s` subject to
/// `A_s x_s <= b_s` per partition and `sum_s F_s x_s <= h` across them.
#[derive(Debug, Clone)]
pub struct PartitionedLp {
    pub request_id: usize,
    pub parts: Vec<PartBlock>,
    /// Shared node capacities `h`.
    pub shared_capacity: Vec<f64>,
}

impl PartitionedLp {
    pub fn n_nodes(&self) -> usize {
        self.shared_capacity.len()
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn total_cols(&self) -> usize {
        self.parts.iter().map(|p| p.num_cols()).sum()
    }

    /// Subproblem for a primal (share) iteration: local rows plus the
    /// coupling rows with right-hand side `z_s`. The coupling rows come
    /// last, so their duals are the tail of the solution's multipliers.
    pub fn primal_subproblem(&self, s: usize, z_s: &[f64]) -> LpProblem {
        let part = &self.parts[s];
        let mut p = LpProblem::new(part.num_cols());
        p.cost = part.cost.clone();
        for (row, label) in part.rows.iter().zip(&part.row_labels) {
            p.add_row(row.coeffs.clone(), row.rhs, label.clone());
        }
        for i in 0..self.n_nodes() {
            let coeffs: Vec<(usize, f64)> = part
                .columns
                .iter()
                .enumerate()
                .filter(|(_, &(_, node))| node == i)
                .map(|(c, _)| (c, part.demands[c]))
                .collect();
            p.add_row(coeffs, z_s[i].max(0.0), format!("share[{i}]"));
        }
        p
    }

    /// Subproblem for a dual (price) iteration: local rows only, objective
    /// `(c_s - F_s^T lambda) x_s`.
    pub fn dual_subproblem(&self, s: usize, prices: &[f64]) -> LpProblem {
        let part = &self.parts[s];
        let mut p = LpProblem::new(part.num_cols());
        p.cost = part
            .cost
            .iter()
            .enumerate()
            .map(|(c, &cost)| cost - part.demands[c] * prices[part.columns[c].1])
            .collect();
        for (row, label) in part.rows.iter().zip(&part.row_labels) {
            p.add_row(row.coeffs.clone(), row.rhs, label.clone());
        }
        p
    }

    /// Column offset of partition `s` in the coupled program.
    pub fn col_offset(&self, s: usize) -> usize {
        self.parts[..s].iter().map(|p| p.num_cols()).sum()
    }

    /// The full coupled program (all partitions, coupling enforced). This is
    /// the monolithic node-embedding relaxation, merely reordered by
    /// partition, and serves as the reference optimum for both
    /// decompositions.
    pub fn coupled_lp(&self) -> LpProblem {
        let mut p = LpProblem::new(self.total_cols());
        for (s, part) in self.parts.iter().enumerate() {
            let off = self.col_offset(s);
            for (c, &cost) in part.cost.iter().enumerate() {
                p.cost[off + c] = cost;
            }
            for (row, label) in part.rows.iter().zip(&part.row_labels) {
                let coeffs = row.coeffs.iter().map(|&(c, a)| (off + c, a)).collect();
                p.add_row(coeffs, row.rhs, format!("p{s}.{label}"));
            }
        }
        for i in 0..self.n_nodes() {
            let mut coeffs = Vec::new();
            for (s, part) in self.parts.iter().enumerate() {
                let off = self.col_offset(s);
                for (c, &(_, node)) in part.columns.iter().enumerate() {
                    if node == i {
                        coeffs.push((off + c, part.demands[c]));
                    }
                }
            }
            p.add_row(coeffs, self.shared_capacity[i], format!("cap[{i}]"));
        }
        p
    }

    /// Largest objective weight per unit of coupled demand; the natural
    /// price scale of the instance.
    pub fn price_scale(&self) -> f64 {
        let mut rho: f64 = 0.0;
        for part in &self.parts {
            for (c, &d) in part.demands.iter().enumerate() {
                if d > 0.0 {
                    rho = rho.max(part.cost[c] / d);
                }
            }
        }
        if rho > 0.0 {
            rho
        } else {
            1.0
        }
    }

    /// Upper bound on the coupling subgradient magnitude: per node, the
    /// larger of the worst-case overload and the capacity itself.
    pub fn usage_bound(&self) -> f64 {
        let n = self.n_nodes();
        let mut worst = vec![0.0f64; n];
        for part in &self.parts {
            for (c, &(_, node)) in part.columns.iter().enumerate() {
                worst[node] += part.demands[c];
            }
        }
        let mut g: f64 = 0.0;
        for i in 0..n {
            g = g.max((worst[i] - self.shared_capacity[i]).abs().max(self.shared_capacity[i]));
        }
        if g > 0.0 {
            g
        } else {
            1.0
        }
    }
}

/// Builds the partitioned node-embedding program. `caps` overrides the
/// shared capacities (the harness passes residual capacities there);
/// otherwise the physical node capacities are used.
pub fn build_partitioned_lp(
    net: &PhysicalNetwork,
    req: &VnRequest,
    split: &VnSplit,
    util: &UtilitySpec,
    caps: Option<&[f64]>,
) -> Result<PartitionedLp, ModelError> {
    net.validate()?;
    req.validate()?;
    if split.parts.is_empty() {
        return Err(ModelError::Invalid("at least one partition required".into()));
    }
    let n_nodes = net.node_count();
    let h: Vec<f64> = match caps {
        Some(c) => {
            if c.len() != n_nodes {
                return Err(ModelError::Invalid("capacity override length mismatch".into()));
            }
            c.iter().map(|v| v.max(0.0)).collect()
        }
        None => net.nodes.iter().map(|n| n.cpu_capacity).collect(),
    };

    let mut parts = Vec::with_capacity(split.parts.len());
    for part in &split.parts {
        if part.vnodes.is_empty() {
            return Err(ModelError::Invalid("partition with zero vnodes".into()));
        }
        let mut cost = Vec::new();
        let mut columns = Vec::new();
        let mut demands = Vec::new();
        for &v in &part.vnodes {
            for i in 0..n_nodes {
                columns.push((v, i));
                demands.push(req.vnodes[v].demand);
                cost.push(util.node_weight(req, v, i));
            }
        }
        // Each vnode assigned at most once; the maximizing objective pushes
        // the assignment to happen whenever capacity admits it.
        let mut rows = Vec::new();
        let mut row_labels = Vec::new();
        for (vi, &v) in part.vnodes.iter().enumerate() {
            let coeffs: Vec<(usize, f64)> =
                (0..n_nodes).map(|i| (vi * n_nodes + i, 1.0)).collect();
            rows.push(Row { coeffs, rhs: 1.0 });
            row_labels.push(format!("assign[{v}]"));
        }
        parts.push(PartBlock { cost, rows, row_labels, columns, demands });
    }

    Ok(PartitionedLp { request_id: split.request_id, parts, shared_capacity: h })
}

/// Deterministic rounding of per-partition fractional assignments into a
/// capacity-feasible integral node embedding: per vnode the host with the
/// largest fractional weight (ties to the lowest node id); while the shared
/// capacity is oversubscribed, the kept partition with the smallest value
/// contribution is dropped entirely.
#[derive(Debug, Clone)]
pub struct NodeRounding {
    /// Per partition: kept, and the chosen host per vnode (partition order).
    pub kept: Vec<bool>,
    pub hosts: Vec<Vec<Option<usize>>>,
    /// Objective value of the kept assignments.
    pub value: f64,
}

pub fn round_node_embedding(plp: &PartitionedLp, xs: &[Vec<f64>]) -> NodeRounding {
    let n_nodes = plp.n_nodes();
    let mut kept = vec![true; plp.part_count()];
    let mut hosts: Vec<Vec<Option<usize>>> = Vec::with_capacity(plp.part_count());
    let mut values = vec![0.0f64; plp.part_count()];

    for (s, part) in plp.parts.iter().enumerate() {
        let n_vnodes = part.num_cols() / n_nodes;
        let mut part_hosts = vec![None; n_vnodes];
        for vi in 0..n_vnodes {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n_nodes {
                let w = xs[s][vi * n_nodes + i];
                if w > 1e-9 && best.map_or(true, |(_, bw)| w > bw + 1e-12) {
                    best = Some((i, w));
                }
            }
            if let Some((i, _)) = best {
                part_hosts[vi] = Some(i);
                values[s] += part.cost[vi * n_nodes + i];
            }
        }
        hosts.push(part_hosts);
    }

    loop {
        let mut usage = vec![0.0f64; n_nodes];
        for (s, part) in plp.parts.iter().enumerate() {
            if !kept[s] {
                continue;
            }
            for (vi, host) in hosts[s].iter().enumerate() {
                if let Some(i) = host {
                    usage[*i] += part.demands[vi * n_nodes];
                }
            }
        }
        let feasible = usage
            .iter()
            .zip(&plp.shared_capacity)
            .all(|(u, h)| *u <= h + 1e-9);
        if feasible {
            break;
        }
        let victim = (0..plp.part_count())
            .filter(|&s| kept[s])
            .min_by(|&a, &b| values[a].total_cmp(&values[b]));
        match victim {
            Some(s) => kept[s] = false,
            None => break,
        }
    }

    let value = (0..plp.part_count()).filter(|&s| kept[s]).map(|s| values[s]).sum();
    NodeRounding { kept, hosts, value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_lp;
    use crate::model::{PhysicalNode, VirtualLink, VirtualNode};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nodes_net(caps: &[f64]) -> PhysicalNetwork {
        PhysicalNetwork::new(
            caps.iter()
                .enumerate()
                .map(|(id, &cpu_capacity)| PhysicalNode { id, cpu_capacity })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn request(demands: &[f64], links: &[(usize, usize)]) -> VnRequest {
        VnRequest {
            id: 7,
            vnodes: demands.iter().map(|&demand| VirtualNode { demand }).collect(),
            vlinks: links.iter().map(|&(a, b)| VirtualLink { a, b, demand: 1.0 }).collect(),
            value: demands.iter().sum(),
        }
    }

    #[test]
    fn no_policy_keeps_the_whole_request() {
        let req = request(&[1.0, 2.0, 3.0], &[(0, 1), (1, 2)]);
        let s = split(&req, &PartitionPolicy::None).unwrap();
        assert_eq!(s.parts.len(), 1);
        assert_eq!(s.parts[0].vnodes, vec![0, 1, 2]);
        assert_eq!(s.parts[0].vlinks, vec![0, 1]);
        assert!(s.cross_vlinks.is_empty());
    }

    #[test]
    fn halves_split_by_ascending_index() {
        let req = request(&[1.0; 4], &[(0, 1), (1, 2), (2, 3)]);
        let s = split(&req, &PartitionPolicy::Halves).unwrap();
        assert_eq!(s.parts[0].vnodes, vec![0, 1]);
        assert_eq!(s.parts[1].vnodes, vec![2, 3]);
        assert_eq!(s.parts[0].vlinks, vec![0]);
        assert_eq!(s.parts[1].vlinks, vec![2]);
        assert_eq!(s.cross_vlinks, vec![1], "the 1-2 link spans the cut");
    }

    #[test]
    fn capacity_ordered_sorts_by_total_demand() {
        let req = request(&[5.0, 1.0, 3.0], &[]);
        let s = split(&req, &PartitionPolicy::CapacityOrdered { k: 3 }).unwrap();
        let order: Vec<usize> = s.parts.iter().map(|p| p.vnodes[0]).collect();
        assert_eq!(order, vec![0, 2, 1]);
    }

    #[test]
    fn oversized_k_is_rejected() {
        let req = request(&[1.0, 1.0], &[]);
        assert!(split(&req, &PartitionPolicy::KWay { k: 3 }).is_err());
        assert!(split(&req, &PartitionPolicy::KWay { k: 0 }).is_err());
    }

    #[test]
    fn split_is_a_bijection_on_vnode_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..60 {
            let gamma = rng.gen_range(1..=9);
            let demands: Vec<f64> = (0..gamma).map(|_| rng.gen_range(0.5..4.0)).collect();
            let mut links = Vec::new();
            for a in 0..gamma {
                for b in a + 1..gamma {
                    if rng.gen_bool(0.4) {
                        links.push((a, b));
                    }
                }
            }
            let req = request(&demands, &links);
            let policies = [
                PartitionPolicy::None,
                PartitionPolicy::Halves,
                PartitionPolicy::KWay { k: rng.gen_range(1..=gamma) },
                PartitionPolicy::CapacityOrdered { k: rng.gen_range(1..=gamma) },
            ];
            for policy in &policies {
                let s = split(&req, policy).unwrap();
                let mut seen: Vec<usize> = s.parts.iter().flat_map(|p| p.vnodes.clone()).collect();
                seen.sort_unstable();
                assert_eq!(seen, (0..gamma).collect::<Vec<_>>(), "trial {trial} {policy:?}");
                let n_links: usize =
                    s.parts.iter().map(|p| p.vlinks.len()).sum::<usize>() + s.cross_vlinks.len();
                assert_eq!(n_links, req.vlink_count());
            }
        }
    }

    #[test]
    fn single_partition_program_matches_the_node_embedding_lp() {
        // 3 vnodes on 2 nodes: columns (v, i) vnode-major, one assignment
        // row per vnode, one capacity row per node with demand entries.
        let net = nodes_net(&[4.0, 6.0]);
        let req = request(&[1.0, 2.0, 3.0], &[]);
        let s = split(&req, &PartitionPolicy::None).unwrap();
        let plp = build_partitioned_lp(&net, &req, &s, &UtilitySpec::Revenue, None).unwrap();
        let p = plp.coupled_lp();

        assert_eq!(p.num_vars(), 6);
        assert_eq!(p.num_rows(), 3 + 2);
        // Revenue split: weight of vnode v is value * d_v / sum d = d_v.
        assert_eq!(p.cost, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        for v in 0..3 {
            let row = &p.rows[v];
            assert_eq!(row.rhs, 1.0);
            assert_eq!(row.coeffs, vec![(2 * v, 1.0), (2 * v + 1, 1.0)]);
        }
        for i in 0..2 {
            let row = &p.rows[3 + i];
            assert_eq!(row.rhs, net.nodes[i].cpu_capacity);
            assert_eq!(row.coeffs, vec![(i, 1.0), (2 + i, 2.0), (4 + i, 3.0)]);
        }
    }

    #[test]
    fn two_partition_blocks_have_the_expected_shape() {
        let net = nodes_net(&[4.0, 6.0, 5.0]);
        let req = request(&[1.0, 2.0, 3.0, 1.5], &[]);
        let s = split(&req, &PartitionPolicy::Halves).unwrap();
        let plp = build_partitioned_lp(&net, &req, &s, &UtilitySpec::Revenue, None).unwrap();
        assert_eq!(plp.part_count(), 2);
        assert_eq!(plp.total_cols(), 4 * 3);
        assert_eq!(plp.shared_capacity.len(), 3);
        for part in &plp.parts {
            assert_eq!(part.rows.len(), 2, "one assignment row per vnode");
            assert_eq!(part.num_cols(), 2 * 3);
        }
        let coupled = plp.coupled_lp();
        assert_eq!(coupled.num_rows(), 2 + 2 + 3, "[A; A~; F|F~] stacking");
        assert_eq!(coupled.num_vars(), 12);

        // Empty partitions are rejected.
        let bad = VnSplit {
            request_id: 7,
            parts: vec![VnPartition { vnodes: vec![], vlinks: vec![] }],
            cross_vlinks: vec![],
        };
        assert!(build_partitioned_lp(&net, &req, &bad, &UtilitySpec::Revenue, None).is_err());
    }

    #[test]
    fn coupled_optimum_is_invariant_to_the_partitioning() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..25 {
            let n_nodes = rng.gen_range(2..=4);
            let caps: Vec<f64> = (0..n_nodes).map(|_| rng.gen_range(1.0..5.0)).collect();
            let gamma = rng.gen_range(2..=7);
            let demands: Vec<f64> = (0..gamma).map(|_| rng.gen_range(0.3..2.0)).collect();
            let net = nodes_net(&caps);
            let req = request(&demands, &[]);

            let mut objectives = Vec::new();
            for policy in [
                PartitionPolicy::None,
                PartitionPolicy::Halves,
                PartitionPolicy::KWay { k: gamma.min(3) },
                PartitionPolicy::CapacityOrdered { k: gamma.min(2) },
            ] {
                let s = split(&req, &policy).unwrap();
                let plp = build_partitioned_lp(&net, &req, &s, &UtilitySpec::Revenue, None).unwrap();
                objectives.push(solve_lp(&plp.coupled_lp()).objective);
            }
            for pair in objectives.windows(2) {
                assert!(
                    (pair[0] - pair[1]).abs() <= 1e-6 * (1.0 + pair[0].abs()),
                    "trial {trial}: {objectives:?}"
                );
            }
        }
    }
}
