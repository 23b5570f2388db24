//! Command-line front end: run embedding experiments, paired convergence
//! studies, and instance generation.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use vne::harness::{
    emit_report, run_convergence_study, run_experiment_seeded, ExperimentConfig, HarnessError,
    InstanceFile, ReportFormat,
};
use vne::model::{generate_full_mesh, generate_random_vn, ValueRule};

#[derive(Parser)]
#[command(name = "vne", version, about = "Virtual network embedding experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Log filter (error|warn|info|debug|trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Mesh,
    Vn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValueRuleArg {
    NodeDemandSum,
    Unit,
}

#[derive(Subcommand)]
enum Cmd {
    /// Embed a VN stream per the config file and write the report.
    Embed {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the stream seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Run primal and dual on the identical instance and emit aligned
    /// gap-vs-iteration and gap-vs-wallclock tables.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Write one VN's complete embedding program as LP-format text plus the
    /// column index sidecar, for cross-checking against external solvers.
    Dump {
        #[arg(long)]
        config: PathBuf,
        /// Which request of the stream to dump.
        #[arg(long, default_value_t = 0)]
        vn: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Generate an instance file (physical mesh or VN request stream).
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        out: PathBuf,
        /// Mesh: node count. Vn: vnodes per request.
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        #[arg(long, default_value_t = 10.0)]
        node_cap: f64,
        #[arg(long, default_value_t = 10.0)]
        link_cap: f64,
        /// Vn only: number of requests in the stream.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0.5)]
        link_prob: f64,
        #[arg(long, default_value_t = 0.5)]
        demand_min: f64,
        #[arg(long, default_value_t = 1.5)]
        demand_max: f64,
        #[arg(long, value_enum, default_value = "node-demand-sum")]
        value_rule: ValueRuleArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    match run(cli.cmd) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Embed { config, seed, out_dir, format } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = run_experiment_seeded(&cfg, seed)?;
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Jsonl => ReportFormat::JsonLines,
            };
            let files = emit_report(&report, format, &out_dir)?;
            let ratio = report
                .allocation_ratio
                .map_or("n/a".to_string(), |r| format!("{r:.3}"));
            println!(
                "embedded {}/{} requests (ratio {ratio}, revenue {:.3}, {} messages); report: {}",
                report.accepted_count(),
                report.outcomes.len(),
                report.revenue,
                report.messages,
                files[0].display()
            );
            Ok(())
        }
        Cmd::Study { config, seed, out_dir } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let study = run_convergence_study(&cfg, seed)?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| HarnessError::Io(out_dir.display().to_string(), e.to_string()))?;
            write(&out_dir.join("study.csv"), &study.to_csv())?;
            write(&out_dir.join("trace_primal.csv"), &study.primal.to_csv())?;
            write(&out_dir.join("trace_dual.csv"), &study.dual.to_csv())?;
            println!(
                "instance: {} vnodes on {} nodes, optimum {:.4}",
                study.gamma, study.n_nodes, study.reference
            );
            println!(
                "primal: final gap {:.6} in {} iterations; dual: final gap {:.6} in {} iterations",
                study.primal.best_gap(),
                study.primal.len(),
                study.dual.best_gap(),
                study.dual.len()
            );
            println!("tables written under {}", out_dir.display());
            Ok(())
        }
        Cmd::Dump { config, vn, out_dir } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let net = cfg.materialize_network()?;
            let requests = cfg.materialize_requests(None)?;
            let req = requests
                .iter()
                .find(|r| r.id == vn)
                .ok_or_else(|| HarnessError::Config(format!("no request with id {vn}")))?;
            let n_paths = net.path_set().map_or(0, |ps| ps.len());
            let mask = vne::model::DiscoveryMask::full(net.node_count(), n_paths, 1);
            let (p, index) = vne::monolith::build_embedding_program(
                &net,
                std::slice::from_ref(req),
                &mask,
                &cfg.utility.to_spec(net.node_count()),
                &vne::monolith::BuildOptions::default(),
            )
            .map_err(|e| HarnessError::Solver(e.to_string()))?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| HarnessError::Io(out_dir.display().to_string(), e.to_string()))?;
            write(&out_dir.join(format!("vn{vn}.lp")), &p.to_lp_format())?;
            write(
                &out_dir.join(format!("vn{vn}_index.json")),
                &serde_json::to_string_pretty(&index.to_json()).expect("index serializes"),
            )?;
            println!(
                "wrote vn{vn}.lp ({} vars, {} rows) and vn{vn}_index.json under {}",
                p.num_vars(),
                p.num_rows(),
                out_dir.display()
            );
            Ok(())
        }
        Cmd::Gen {
            kind,
            out,
            nodes,
            node_cap,
            link_cap,
            count,
            link_prob,
            demand_min,
            demand_max,
            value_rule,
            seed,
        } => {
            let file = match kind {
                GenKind::Mesh => {
                    let net = generate_full_mesh(nodes, node_cap, link_cap)
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                    InstanceFile { physical_network: Some(net), vn_requests: None }
                }
                GenKind::Vn => {
                    let rule = match value_rule {
                        ValueRuleArg::NodeDemandSum => ValueRule::NodeDemandSum,
                        ValueRuleArg::Unit => ValueRule::Unit,
                    };
                    let mut reqs = Vec::with_capacity(count);
                    for id in 0..count {
                        let req = generate_random_vn(
                            id,
                            nodes,
                            link_prob,
                            (demand_min, demand_max),
                            rule,
                            seed.wrapping_add(id as u64),
                        )
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                        reqs.push(req);
                    }
                    InstanceFile { physical_network: None, vn_requests: Some(reqs) }
                }
            };
            file.write(&out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn write(path: &Path, body: &str) -> Result<(), HarnessError> {
    std::fs::write(path, body).map_err(|e| HarnessError::Io(path.display().to_string(), e.to_string()))
}
