//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;
use vne::lp::{brute_force_binary, solve_ilp, solve_lp, SolverOptions, Status};

fn report(name: &str, pass: bool, detail: &str) {
    println!("criterion {name}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
}

/// Criterion 1: solve_ilp matches exhaustive enumeration on 200 seeded
/// instances with at most 12 binaries, within 60 s.
#[test]
fn c1_oracle_equivalence() {
    let start = Instant::now();
    let mut optimal = 0;
    for seed in 0..200u64 {
        let p = common::random_binary_program(1000 + seed, 12);
        let bf = brute_force_binary(&p).expect("instance within brute-force caps");
        let bb = solve_ilp(&p);
        assert_eq!(
            bb.status, bf.status,
            "seed {seed}: status {} vs brute-force {}",
            bb.status, bf.status
        );
        if bf.status == Status::Optimal {
            optimal += 1;
            assert!(
                (bb.objective - bf.objective).abs() <= 1e-9,
                "seed {seed}: objective {} vs brute-force {}",
                bb.objective,
                bf.objective
            );
        }
    }
    let elapsed = start.elapsed();
    let pass = elapsed.as_secs() < 60;
    report(
        "1 (ILP oracle equivalence)",
        pass,
        &format!("200/200 instances agree ({optimal} optimal) in {elapsed:.2?}"),
    );
    assert!(pass, "runtime budget exceeded: {elapsed:?}");
}

/// Criterion 2: KKT checks (feasibility, complementary slackness, duality
/// gap) hold on every optimal solve across 500 seeded LPs of up to 30x30.
#[test]
fn c2_lp_kkt_suite() {
    let opts = SolverOptions::default();
    let mut counts = [0usize; 3]; // optimal, infeasible, other
    for seed in 0..500u64 {
        let p = common::random_lp(2000 + seed, 30, 30);
        let s = solve_lp(&p);
        match s.status {
            Status::Optimal => {
                counts[0] += 1;
                if let Err(e) = s.verify(&p, &opts) {
                    panic!("seed {seed}: KKT verification failed: {e}\n{}", p.to_lp_format());
                }
            }
            Status::Infeasible => counts[1] += 1,
            _ => counts[2] += 1,
        }
    }
    let pass = counts[0] > 200 && counts[2] == 0;
    report(
        "2 (LP KKT suite)",
        pass,
        &format!(
            "500 solves: {} optimal (all KKT-clean), {} infeasible, {} other",
            counts[0], counts[1], counts[2]
        ),
    );
    assert!(pass);
}

use vne::dual;
use vne::model::{generate_random_vn, PhysicalNetwork, PhysicalNode, ValueRule, VnRequest};
use vne::monolith::UtilitySpec;
use vne::partition::{build_partitioned_lp, split, PartitionPolicy, PartitionedLp};
use vne::primal;
use vne::trace::{StepRule, StopRule};

/// A feasible two-partition node-embedding instance in the style of the
/// simulation study: 50 vnodes onto 10 hosting nodes, uniform capacities
/// sized so the whole request embeds leaving no residual capacity.
fn study_instance(seed: u64) -> (PartitionedLp, f64, VnRequest) {
    let req = generate_random_vn(0, 50, 0.5, (0.5, 1.5), ValueRule::NodeDemandSum, seed).unwrap();
    let cap = req.total_node_demand() / 10.0;
    let net = PhysicalNetwork::new(
        (0..10).map(|id| PhysicalNode { id, cpu_capacity: cap }).collect(),
        vec![],
    )
    .unwrap();
    let s = split(&req, &PartitionPolicy::Halves).unwrap();
    let plp = build_partitioned_lp(&net, &req, &s, &UtilitySpec::Revenue, None).unwrap();
    let reference = solve_lp(&plp.coupled_lp()).objective;
    (plp, reference, req)
}

/// Criterion 3: on 20 feasible two-partition instances the best dual bound
/// reaches the coupled optimum within 1e-3 relative in <= 2000 iterations.
#[test]
fn c3_no_duality_gap() {
    let start = Instant::now();
    let stop = StopRule { max_iters: 2000, rel_gap: Some(1e-4) };
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let (plp, reference, _) = study_instance(3000 + seed);
        let run = dual::run(&plp, &StepRule::Diminishing, &stop, Some(reference));
        let gap = run.state.best_bound - reference;
        let tol = 1e-3 * reference.abs();
        worst = worst.max(gap / reference.abs());
        assert!(
            gap <= tol,
            "seed {seed}: min_t q - optimum = {gap} > {tol} after {} iterations",
            run.trace.len()
        );
    }
    let elapsed = start.elapsed();
    let pass = elapsed.as_secs() < 300;
    report(
        "3 (no duality gap)",
        pass,
        &format!("20/20 instances closed to <=1e-3 (worst rel gap {worst:.2e}) in {elapsed:.2?}"),
    );
    assert!(pass, "runtime budget exceeded: {elapsed:?}");
}

/// Criteria 4 and 5: with the 0.5/t rule stopped at t = 100, the dual run's
/// duality gap is <= the primal run's on >= 70% of 20 seeds (criterion 4,
/// blocking), and the dual run's solver wall-clock is >= the primal's in
/// the majority of seeds (criterion 5, reported but non-blocking).
#[test]
fn c4_c5_gap_direction_and_timing() {
    let stop = StopRule { max_iters: 100, rel_gap: None };
    let mut dual_wins = 0;
    let mut dual_slower = 0;
    let n_seeds = 20u64;
    println!("seed,primal_gap_t100,dual_gap_t100,primal_ms,dual_ms");
    for seed in 0..n_seeds {
        let (plp, reference, _) = study_instance(4000 + seed);
        let p = primal::run(&plp, &StepRule::Diminishing, &stop, Some(reference));
        let d = dual::run(&plp, &StepRule::Diminishing, &stop, Some(reference));
        assert_eq!(p.trace.len(), 100, "full horizon recorded");
        assert_eq!(d.trace.len(), 100);
        let pg = p.trace.best_gap();
        let dg = d.trace.best_gap();
        let pms = p.iter_elapsed_ms.last().copied().unwrap_or(0.0);
        let dms = d.iter_elapsed_ms.last().copied().unwrap_or(0.0);
        println!("{seed},{pg:.6},{dg:.6},{pms:.1},{dms:.1}");
        if seed == 0 {
            // Both gap curves for the first seed, sampled.
            println!("curves (seed 0): t,primal_gap,dual_gap");
            for t in [1usize, 2, 5, 10, 25, 50, 100] {
                let pr = &p.trace.rows[t - 1];
                let dr = &d.trace.rows[t - 1];
                println!("  {t},{:.6},{:.6}", pr.gap, dr.gap);
            }
        }
        if dg <= pg + 1e-9 * (1.0 + reference.abs()) {
            dual_wins += 1;
        }
        if dms >= pms {
            dual_slower += 1;
        }
    }
    let c4_pass = dual_wins * 10 >= n_seeds as usize * 7;
    report(
        "4 (dual reaches smaller gap by t=100)",
        c4_pass,
        &format!("dual gap <= primal gap on {dual_wins}/{n_seeds} seeds"),
    );
    let c5_pass = dual_slower * 2 > n_seeds as usize;
    report(
        "5 (dual takes longer wall-clock; non-blocking)",
        c5_pass,
        &format!("dual slower on {dual_slower}/{n_seeds} seeds"),
    );
    assert!(c4_pass);
    // Criterion 5 is timing-sensitive and explicitly non-blocking.
}

/// Criterion 7: every distributed run exchanges exactly
/// 2 * partitions * iterations messages.
#[test]
fn c7_message_count_formula() {
    use vne::protocol::run_distributed;
    use vne::trace::Algo;
    let mut checked = 0;
    for seed in 0..6u64 {
        let (plp, reference, _) = study_instance(7000 + seed);
        for algo in [Algo::Primal, Algo::Dual] {
            for max_iters in [1, 7, 40] {
                let stop = StopRule { max_iters, rel_gap: None };
                let (trace, log) = run_distributed(algo, &plp, &StepRule::Diminishing, &stop, Some(reference));
                let expect = 2 * plp.part_count() * trace.len();
                assert_eq!(
                    log.total_messages, expect,
                    "{algo} seed {seed} T={}: {} messages vs 2kT={expect}",
                    trace.len(),
                    log.total_messages
                );
                assert_eq!(trace.total_messages(), expect, "trace msgs_cum agrees");
                checked += 1;
            }
        }
    }
    report("7 (message-count formula)", true, &format!("2kT exact on {checked} runs"));
}

/// Criterion 8: invariant sweep across seeded runs of both decompositions:
/// share conservation at 1e-9, price nonnegativity, weak duality at every
/// iterate, and nonincreasing best bounds.
#[test]
fn c8_invariant_suites() {
    let stop = StopRule { max_iters: 60, rel_gap: None };
    let mut runs = 0;
    for seed in 0..15u64 {
        let (plp, reference, _) = study_instance(8000 + seed);
        let p = primal::run(&plp, &StepRule::Diminishing, &stop, Some(reference));
        assert!(
            p.max_conservation_err <= 1e-9,
            "seed {seed}: share conservation error {}",
            p.max_conservation_err
        );
        let mut best = f64::NEG_INFINITY;
        for row in &p.trace.rows {
            assert!(row.best_primal >= best - 1e-12, "primal running best decreased");
            best = row.best_primal;
            assert!(row.best_primal <= reference + 1e-6 * (1.0 + reference.abs()));
        }

        let d = dual::run(&plp, &StepRule::Diminishing, &stop, Some(reference));
        assert!(d.min_price >= 0.0, "seed {seed}: negative price {}", d.min_price);
        assert!(
            d.min_weak_duality_margin >= -1e-6 * (1.0 + reference.abs()),
            "seed {seed}: weak duality margin {}",
            d.min_weak_duality_margin
        );
        let mut bound = f64::INFINITY;
        for row in &d.trace.rows {
            assert!(row.gap <= bound + 1e-12, "dual best bound increased");
            bound = row.gap;
        }
        runs += 2;
    }
    report("8 (invariant suites)", true, &format!("zero violations across {runs} runs"));
}

/// Criterion 6: the prototype-style scenario (100 random VNs, p = 0.5,
/// 5-node full mesh). Partitioning must not help: allocation ratio and
/// revenue under `none` >= under `halves`, and cumulative messages under
/// `halves` > under `none`, on >= 80% of 10 seeds.
#[test]
fn c6_partitioning_hurts_ratio_and_overhead() {
    use vne::harness::{run_experiment_seeded, ExperimentConfig, NetworkConfig, VnSource};
    use vne::trace::Algo;

    let start = Instant::now();
    // Partition-at-a-time provisioning (the prototype semantics): each
    // partition embeds itself with its internal links; crossing links are
    // connected blind afterwards. Flat per-request pricing ties revenue to
    // the allocation count.
    let base = ExperimentConfig {
        network: NetworkConfig::FullMesh { nodes: 5, node_cap: 55.0, link_cap: 12.0 },
        vn_stream: VnSource::Generate {
            count: 100,
            vnodes_min: 2,
            vnodes_max: 5,
            link_prob: 0.5,
            demand_range: (0.5, 1.5),
            value_rule: ValueRule::Unit,
            seed: 0,
        },
        algorithm: Algo::Primal,
        partition_policy: PartitionPolicy::None,
        partition_mode: vne::harness::PartitionMode::Sequential,
        step_rule: StepRule::Diminishing,
        stop: StopRule { max_iters: 100, rel_gap: Some(1e-4) },
        utility: vne::harness::UtilityConfig::Revenue,
        k_max: 1,
    };

    let mut good = 0;
    println!("seed,ratio_none,ratio_halves,revenue_none,revenue_halves,msgs_none,msgs_halves");
    for seed in 0..10u64 {
        let none = run_experiment_seeded(&base, Some(6000 + seed)).unwrap();
        let mut halved = base.clone();
        halved.partition_policy = PartitionPolicy::Halves;
        let halves = run_experiment_seeded(&halved, Some(6000 + seed)).unwrap();

        let rn = none.allocation_ratio.unwrap();
        let rh = halves.allocation_ratio.unwrap();
        println!(
            "{seed},{rn:.3},{rh:.3},{:.2},{:.2},{},{}",
            none.revenue, halves.revenue, none.messages, halves.messages
        );
        if rn >= rh && none.revenue >= halves.revenue && halves.messages > none.messages {
            good += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = good >= 8 && elapsed.as_secs() < 600;
    report(
        "6 (partitioning lowers ratio/revenue, raises signaling)",
        pass,
        &format!("direction holds on {good}/10 seeds in {elapsed:.2?}"),
    );
    assert!(pass);
}

/// Larger-scale KKT batch: the same checks as criterion 2 on denser LPs up
/// to 100x100, guarding the refactorization and equilibration paths.
#[test]
fn c2b_kkt_at_larger_scale() {
    let opts = SolverOptions::default();
    let mut optimal = 0;
    for seed in 0..60u64 {
        let p = common::random_lp(9000 + seed, 100, 100);
        let s = solve_lp(&p);
        if s.status == Status::Optimal {
            optimal += 1;
            if let Err(e) = s.verify(&p, &opts) {
                panic!("seed {seed}: KKT verification failed at scale: {e}");
            }
        }
    }
    report("2b (KKT at 100x100 scale)", optimal > 10, &format!("{optimal}/60 optimal, all KKT-clean"));
    assert!(optimal > 10);
}
