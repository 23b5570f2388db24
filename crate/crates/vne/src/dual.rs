//! Dual (pricing) decomposition of the partitioned node-embedding program.
//!
//! The shared capacity rows are relaxed with multipliers `lambda >= 0`. Each
//! subproblem then maximizes its price-adjusted utility
//! `(c_s - F_s^T lambda) x_s` over its local rows alone, and the master runs
//! a projected subgradient on the prices: `g = sum_s F_s x*_s - h`,
//! `lambda_{t+1} = (lambda_t + alpha_t g)_+`, so the price of every overused
//! node rises and the price of every underused node decays toward zero but
//! never below it. The dual bound `q(lambda) = lambda^T h + sum_s
//! sup (c_s - F_s^T lambda) x_s` overestimates the coupled optimum for any
//! nonnegative prices and touches it at the optimal multipliers (no duality
//! gap for the relaxed program).
//!
//! Feasible points are recovered by rounding the running average of the
//! subproblem optima; as with the primal driver, rule steps are applied on
//! normalized data (scaled by price_scale/usage_bound) and the Polyak rule
//! raw.

use crate::lp::{solve_lp_with, SolverOptions, Status};
use crate::partition::{round_node_embedding, PartitionedLp};
use crate::protocol::{AgentId, MessageLog, MsgKind};
use crate::trace::{Algo, IterateTrace, StepRule, StopRule, TraceRow};

/// One price-adjusted subproblem solve.
#[derive(Debug, Clone)]
pub struct SubSolve {
    /// Optimal value of `(c_s - F_s^T lambda) x_s`.
    pub value: f64,
    pub x: Vec<f64>,
    pub status: Status,
}

/// Solves subproblem `s` under prices `lambda`. The local system always
/// admits `x = 0`, so huge prices yield the empty assignment rather than
/// infeasibility.
pub fn solve_subproblem(plp: &PartitionedLp, s: usize, prices: &[f64]) -> SubSolve {
    let lp = plp.dual_subproblem(s, prices);
    let sol = solve_lp_with(&lp, &SolverOptions::default());
    if sol.status == Status::Optimal {
        SubSolve { value: sol.objective, x: sol.x, status: sol.status }
    } else {
        log::warn!("dual subproblem {s} ended {}", sol.status);
        SubSolve { value: 0.0, x: vec![0.0; plp.parts[s].num_cols()], status: sol.status }
    }
}

/// The dual bound `q(lambda)` evaluated at the subproblem optima `xs`.
pub fn dual_value(plp: &PartitionedLp, prices: &[f64], xs: &[Vec<f64>]) -> f64 {
    let price_term: f64 = prices.iter().zip(&plp.shared_capacity).map(|(l, h)| l * h).sum();
    let sub_term: f64 = plp
        .parts
        .iter()
        .zip(xs)
        .map(|(part, x)| {
            part.cost
                .iter()
                .enumerate()
                .map(|(c, &cost)| (cost - part.demands[c] * prices[part.columns[c].1]) * x[c])
                .sum::<f64>()
        })
        .sum();
    price_term + sub_term
}

#[derive(Debug, Clone)]
pub struct DualState {
    /// Completed master iterations.
    pub t: usize,
    /// Prices per shared node, nonnegative.
    pub prices: Vec<f64>,
    /// Last subgradient `sum_s F_s x*_s - h`.
    pub g: Vec<f64>,
    pub alpha: f64,
    /// Lowest dual bound seen.
    pub best_bound: f64,
    /// Best feasible (rounded) objective seen.
    pub best_primal: f64,
}

impl DualState {
    pub fn initial(plp: &PartitionedLp) -> Self {
        DualState {
            t: 0,
            prices: vec![0.0; plp.n_nodes()],
            g: vec![0.0; plp.n_nodes()],
            alpha: 0.0,
            best_bound: f64::INFINITY,
            best_primal: f64::NEG_INFINITY,
        }
    }
}

/// One price update from the usage the subproblems reported. `step_scale`
/// converts the rule's step into price units (pass 1.0 for raw arithmetic).
pub fn master_step(
    state: &DualState,
    plp: &PartitionedLp,
    usage: &[f64],
    q: f64,
    rule: &StepRule,
    step_scale: f64,
) -> DualState {
    let g: Vec<f64> = usage.iter().zip(&plp.shared_capacity).map(|(u, h)| u - h).collect();
    let g_norm2: f64 = g.iter().map(|v| v * v).sum();
    let t_next = state.t + 1;
    let (alpha, scale) = match rule {
        // Minimizing q: step toward the target from above.
        StepRule::Polyak { target } => (rule.alpha(t_next, q - target, g_norm2), 1.0),
        _ => (rule.alpha(t_next, 0.0, g_norm2), step_scale),
    };
    let prices: Vec<f64> = state
        .prices
        .iter()
        .zip(&g)
        .map(|(l, gi)| (l + alpha * scale * gi).max(0.0))
        .collect();
    DualState {
        t: t_next,
        prices,
        g,
        alpha,
        best_bound: state.best_bound.min(q),
        best_primal: state.best_primal,
    }
}

#[derive(Debug, Clone)]
pub struct DualRun {
    pub trace: IterateTrace,
    pub state: DualState,
    /// Rounded hosts of the best feasible iterate, per partition.
    pub best_hosts: Vec<Vec<Option<usize>>>,
    pub best_kept: Vec<bool>,
    /// Lowest price ever observed (>= 0 by projection).
    pub min_price: f64,
    /// Most negative value of `q(lambda_t) - best_primal_t` (weak duality
    /// keeps it above -tol).
    pub min_weak_duality_margin: f64,
    /// Wall-clock milliseconds elapsed after each iteration (kept outside
    /// the trace so determinism checks can ignore it).
    pub iter_elapsed_ms: Vec<f64>,
}

pub fn run(plp: &PartitionedLp, rule: &StepRule, stop: &StopRule, reference: Option<f64>) -> DualRun {
    run_with(plp, rule, stop, reference, None)
}

/// Projected-subgradient pricing until the stop rule fires. Prices start at
/// zero. With one partition the run short-circuits to a single coupled
/// solve whose capacity-row duals are the optimal prices.
pub fn run_with(
    plp: &PartitionedLp,
    rule: &StepRule,
    stop: &StopRule,
    reference: Option<f64>,
    mut log: Option<&mut MessageLog>,
) -> DualRun {
    let n = plp.n_nodes();
    let k = plp.part_count();
    let mut trace = IterateTrace::new(Algo::Dual, reference);
    let timer = std::time::Instant::now();

    if k == 1 {
        let lp = plp.primal_subproblem(0, &plp.shared_capacity);
        let sol = solve_lp_with(&lp, &SolverOptions::default());
        if let Some(log) = log.as_deref_mut() {
            log.record(1, AgentId::Master, AgentId::Agent(0), MsgKind::Price, n);
            log.record(1, AgentId::Agent(0), AgentId::Master, MsgKind::Optimum, sol.x.len() + 1);
        }
        let local = plp.parts[0].rows.len();
        let prices = sol.duals[local..].to_vec();
        let rounding = round_node_embedding(plp, std::slice::from_ref(&sol.x));
        let gap = reference.map_or(f64::NAN, |r| sol.objective - r);
        trace.rows.push(TraceRow {
            t: 1,
            alpha: 0.0,
            value: sol.objective,
            best_primal: rounding.value,
            gap,
            g_norm: 0.0,
            msgs_cum: 2,
        });
        trace.converged = true;
        let state = DualState {
            t: 1,
            prices,
            g: vec![0.0; n],
            alpha: 0.0,
            best_bound: sol.objective,
            best_primal: rounding.value,
        };
        return DualRun {
            trace,
            state,
            best_hosts: rounding.hosts,
            best_kept: rounding.kept,
            min_price: 0.0,
            min_weak_duality_margin: 0.0,
            iter_elapsed_ms: vec![timer.elapsed().as_secs_f64() * 1e3],
        };
    }

    let step_scale = plp.price_scale() / plp.usage_bound();
    let mut state = DualState::initial(plp);
    let mut avg: Vec<Vec<f64>> = plp.parts.iter().map(|p| vec![0.0; p.num_cols()]).collect();
    let mut best_hosts: Vec<Vec<Option<usize>>> = Vec::new();
    let mut best_kept: Vec<bool> = Vec::new();
    let mut min_price: f64 = 0.0;
    let mut min_margin: f64 = f64::INFINITY;
    let mut msgs = 0usize;
    let mut elapsed = Vec::new();

    loop {
        let t = state.t + 1;
        let solves: Vec<SubSolve> =
            (0..k).map(|s| solve_subproblem(plp, s, &state.prices)).collect();
        if let Some(log) = log.as_deref_mut() {
            for s in 0..k {
                log.record(t, AgentId::Master, AgentId::Agent(s), MsgKind::Price, n);
            }
            for s in 0..k {
                log.record(t, AgentId::Agent(s), AgentId::Master, MsgKind::Optimum, solves[s].x.len() + 1);
            }
        }
        msgs += 2 * k;

        let q = dual_value(plp, &state.prices, &solves.iter().map(|r| r.x.clone()).collect::<Vec<_>>());

        // Primal recovery: subgradient iterates oscillate, so round the
        // running average of the subproblem optima.
        for (s, r) in solves.iter().enumerate() {
            for (c, v) in r.x.iter().enumerate() {
                avg[s][c] += (v - avg[s][c]) / t as f64;
            }
        }
        let rounding = round_node_embedding(plp, &avg);
        if rounding.value > state.best_primal {
            state.best_primal = rounding.value;
            best_hosts = rounding.hosts;
            best_kept = rounding.kept;
        }

        let mut usage = vec![0.0; n];
        for (s, r) in solves.iter().enumerate() {
            for (i, u) in plp.parts[s].usage(n, &r.x).into_iter().enumerate() {
                usage[i] += u;
            }
        }

        let next = master_step(&state, plp, &usage, q, rule, step_scale);
        let g_norm = next.g.iter().map(|v| v * v).sum::<f64>().sqrt();
        min_price = min_price.min(next.prices.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
        let best_bound = next.best_bound;
        min_margin = min_margin.min(q - state.best_primal);
        let gap = reference.map_or(best_bound - state.best_primal, |r| best_bound - r);

        trace.rows.push(TraceRow {
            t,
            alpha: next.alpha,
            value: q,
            best_primal: state.best_primal,
            gap,
            g_norm,
            msgs_cum: msgs,
        });

        elapsed.push(timer.elapsed().as_secs_f64() * 1e3);
        let gap_done = stop
            .rel_gap
            .map_or(false, |tol| gap <= tol * (1.0 + reference.map_or(state.best_primal.abs(), f64::abs)));
        state = next;
        if gap_done {
            trace.converged = true;
            break;
        }
        if state.t >= stop.max_iters {
            break;
        }
    }

    DualRun {
        trace,
        state,
        best_hosts,
        best_kept,
        min_price,
        min_weak_duality_margin: min_margin,
        iter_elapsed_ms: elapsed,
    }
}
