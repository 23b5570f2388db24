//! End-to-end experiment harness checks: degenerate inputs, determinism,
//! capacity conservation/monotonicity, report round-trips and the study
//! reduction.

use vne::harness::{
    emit_report, run_convergence_study, run_experiment_seeded, ExperimentConfig, NetworkConfig,
    PartitionMode, ReportFormat, UtilityConfig, VnSource,
};
use vne::model::ValueRule;
use vne::partition::PartitionPolicy;
use vne::trace::{Algo, StepRule, StopRule};

fn base_cfg() -> ExperimentConfig {
    ExperimentConfig {
        network: NetworkConfig::FullMesh { nodes: 4, node_cap: 10.0, link_cap: 8.0 },
        vn_stream: VnSource::Generate {
            count: 12,
            vnodes_min: 1,
            vnodes_max: 3,
            link_prob: 0.5,
            demand_range: (0.5, 1.5),
            value_rule: ValueRule::NodeDemandSum,
            seed: 5,
        },
        algorithm: Algo::Primal,
        partition_policy: PartitionPolicy::Halves,
        partition_mode: PartitionMode::Parallel,
        step_rule: StepRule::Diminishing,
        stop: StopRule { max_iters: 50, rel_gap: Some(1e-4) },
        utility: UtilityConfig::Revenue,
        k_max: 2,
    }
}

#[test]
fn empty_stream_reports_undefined_ratio() {
    let mut cfg = base_cfg();
    cfg.vn_stream = VnSource::Generate {
        count: 0,
        vnodes_min: 1,
        vnodes_max: 2,
        link_prob: 0.5,
        demand_range: (0.5, 1.5),
        value_rule: ValueRule::NodeDemandSum,
        seed: 1,
    };
    let report = run_experiment_seeded(&cfg, None).unwrap();
    assert!(report.allocation_ratio.is_none());
    assert!(report.error.is_some());
    assert_eq!(report.revenue, 0.0);
}

#[test]
fn abundant_capacity_accepts_everything() {
    let mut cfg = base_cfg();
    cfg.network = NetworkConfig::FullMesh { nodes: 4, node_cap: 500.0, link_cap: 500.0 };
    for algo in [Algo::Primal, Algo::Dual, Algo::Monolithic] {
        let mut c = cfg.clone();
        c.algorithm = algo;
        let report = run_experiment_seeded(&c, None).unwrap();
        assert_eq!(report.allocation_ratio, Some(1.0), "{algo}");
    }
}

#[test]
fn reports_are_deterministic_modulo_timing() {
    for mode in [PartitionMode::Parallel, PartitionMode::Sequential] {
        let mut cfg = base_cfg();
        cfg.partition_mode = mode;
        let a = run_experiment_seeded(&cfg, None).unwrap();
        let b = run_experiment_seeded(&cfg, None).unwrap();
        assert_eq!(a.to_csv(false), b.to_csv(false));
        assert_eq!(a.to_jsonl(false), b.to_jsonl(false));
    }
}

#[test]
fn capacity_superset_accepts_a_superset() {
    // Identical arrivals and tie-breaks; every physical capacity doubled.
    for algo in [Algo::Monolithic, Algo::Primal] {
        let mut small = base_cfg();
        small.algorithm = algo;
        let mut big = small.clone();
        big.network = NetworkConfig::FullMesh { nodes: 4, node_cap: 20.0, link_cap: 16.0 };
        let r_small = run_experiment_seeded(&small, None).unwrap();
        let r_big = run_experiment_seeded(&big, None).unwrap();
        for (a, b) in r_small.outcomes.iter().zip(&r_big.outcomes) {
            assert!(
                !a.accepted || b.accepted,
                "{algo}: vn {} accepted under small capacity but rejected under double",
                a.id
            );
        }
    }
}

#[test]
fn csv_round_trip_reproduces_the_summary() {
    let cfg = base_cfg();
    let report = run_experiment_seeded(&cfg, None).unwrap();
    let csv = report.to_csv(true);

    let mut accepted = 0usize;
    let mut revenue = 0.0f64;
    let mut messages = 0usize;
    let mut summary: Option<Vec<String>> = None;
    for line in csv.lines().skip(1) {
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        match cells[0].as_str() {
            "vn" => {
                if cells[4] == "true" {
                    accepted += 1;
                    revenue += cells[5].parse::<f64>().unwrap();
                }
                messages += cells[7].parse::<usize>().unwrap();
            }
            "summary" => summary = Some(cells),
            other => panic!("unexpected row kind {other}"),
        }
    }
    let summary = summary.expect("summary row present");
    assert_eq!(summary[2].parse::<usize>().unwrap(), accepted);
    assert!((summary[5].parse::<f64>().unwrap() - revenue).abs() < 1e-9);
    assert_eq!(summary[7].parse::<usize>().unwrap(), messages);
    assert_eq!(report.accepted_count(), accepted);

    // Row count: one per VN plus the summary.
    assert_eq!(csv.lines().count(), 1 + report.outcomes.len() + 1);
}

#[test]
fn emit_writes_both_formats() {
    let cfg = base_cfg();
    let report = run_experiment_seeded(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
    let jsonl = emit_report(&report, ReportFormat::JsonLines, dir.path()).unwrap();
    assert!(csv[0].exists());
    assert!(jsonl[0].exists());
    let body = std::fs::read_to_string(&jsonl[0]).unwrap();
    let last = body.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    assert_eq!(v["row"], "summary");
}

#[test]
fn study_is_deterministic_and_reduces_for_one_partition() {
    let mut cfg = base_cfg();
    cfg.vn_stream = VnSource::Generate {
        count: 1,
        vnodes_min: 10,
        vnodes_max: 10,
        link_prob: 0.5,
        demand_range: (0.5, 1.5),
        value_rule: ValueRule::NodeDemandSum,
        seed: 2,
    };
    cfg.stop = StopRule { max_iters: 40, rel_gap: None };

    let a = run_convergence_study(&cfg, None).unwrap();
    let b = run_convergence_study(&cfg, None).unwrap();
    assert_eq!(a.primal.to_csv(), b.primal.to_csv(), "identical runs, identical traces");
    assert_eq!(a.dual.to_csv(), b.dual.to_csv());

    // Single partition: both algorithms coincide with the coupled LP at t=1.
    cfg.partition_policy = PartitionPolicy::None;
    let s = run_convergence_study(&cfg, None).unwrap();
    assert_eq!(s.primal.len(), 1);
    assert_eq!(s.dual.len(), 1);
    let tol = 1e-9 * (1.0 + s.reference.abs());
    assert!((s.primal.rows[0].value - s.reference).abs() <= tol);
    assert!((s.dual.rows[0].value - s.reference).abs() <= tol);
    let table = s.to_csv();
    assert!(table.starts_with("t,primal_gap,dual_gap,primal_ms,dual_ms\n"));
}

#[test]
fn cli_gen_embed_study_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_vne");

    let net_path = dir.path().join("net.json");
    let out = std::process::Command::new(bin)
        .args(["gen", "--kind", "mesh", "--nodes", "4", "--node-cap", "20", "--link-cap", "10"])
        .arg("--out")
        .arg(&net_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = serde_json::json!({
        "network": {"kind": "file", "path": net_path.to_str().unwrap()},
        "vn_stream": {
            "kind": "generate",
            "count": 8, "vnodes_min": 1, "vnodes_max": 3,
            "link_prob": 0.5, "demand_range": [0.5, 1.5], "seed": 3
        },
        "algorithm": "primal",
        "partition_policy": {"kind": "halves"}
    });
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();

    let out_dir = dir.path().join("out");
    let out = std::process::Command::new(bin)
        .args(["embed", "--config"])
        .arg(&cfg_path)
        .args(["--format", "jsonl", "--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("report.jsonl").exists());

    let out = std::process::Command::new(bin)
        .args(["study", "--config"])
        .arg(&cfg_path)
        .args(["--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("study.csv").exists());
    assert!(out_dir.join("trace_primal.csv").exists());
    assert!(out_dir.join("trace_dual.csv").exists());

    // A generated VN file can be fed back as the stream source.
    let vns_path = dir.path().join("vns.json");
    let out = std::process::Command::new(bin)
        .args(["gen", "--kind", "vn", "--count", "5", "--nodes", "3", "--seed", "4", "--out"])
        .arg(&vns_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg_file = serde_json::json!({
        "network": {"kind": "file", "path": net_path.to_str().unwrap()},
        "vn_stream": {"kind": "file", "path": vns_path.to_str().unwrap()},
        "algorithm": "dual",
        "partition_policy": {"kind": "none"}
    });
    let cfg2_path = dir.path().join("cfg2.json");
    std::fs::write(&cfg2_path, cfg_file.to_string()).unwrap();
    let out = std::process::Command::new(bin)
        .args(["embed", "--config"])
        .arg(&cfg2_path)
        .args(["--out-dir"])
        .arg(dir.path().join("out2"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // The program dump writes LP text plus the column sidecar.
    let out = std::process::Command::new(bin)
        .args(["dump", "--config"])
        .arg(&cfg2_path)
        .args(["--vn", "0", "--out-dir"])
        .arg(dir.path().join("out2"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lp_text = std::fs::read_to_string(dir.path().join("out2/vn0.lp")).unwrap();
    assert!(lp_text.starts_with("Maximize"));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out2/vn0_index.json")).unwrap())
            .unwrap();
    assert!(sidecar["columns"].as_array().unwrap().len() > 0);

    // Configuration errors exit with code 2.
    let out = std::process::Command::new(bin)
        .args(["embed", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
