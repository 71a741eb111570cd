//! Command-line front end. Thin by design: every subcommand is a few lines
//! of argument plumbing around one library call, so anything scriptable
//! here is equally reachable as a library (see `examples/`).
//!
//! Exit codes: 0 success, 1 for bad input (flags, configs, malformed
//! files), 2 for failures after inputs were accepted (numeric errors, I/O,
//! a theorem check not holding).

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use gsl_lab::bases::{extract_bases, BasesSpec, PretrainConfig};
use gsl_lab::bundle::{load_bundle, load_matrix, save_bundle, save_matrix};
use gsl_lab::construct::{build_gsl_graph, ConstructSpec, Structure};
use gsl_lab::csbm::{generate_csbm_with_stats, CsbmConfig};
use gsl_lab::error::{Error, Result};
use gsl_lab::experiments::{
    ablation_to_csv, records_to_csv, run_ablation, run_dpi_verification, run_synthetic_sweep,
    timing_benchmark, timings_to_csv, AblationConfig, SweepConfig,
};
use gsl_lab::fusion::{plan_training, train_with_plan, FusionSpec};
use gsl_lab::graph::{edge_homophily, node_homophily};
use gsl_lab::mi::{mi_discrete_continuous, MiConfig};
use gsl_lab::nn::{self, DataSplit, ModelKind, ModelSpec, TrainConfig};
use gsl_lab::theory::BoundRecord;
use gsl_lab::viz::{write_sorted_adjacency, VizMode};

#[derive(Parser)]
#[command(
    name = "gsl-lab",
    version,
    about = "Measure what graph structure learning adds to a GNN pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic graph bundle with a homophily knob
    Generate {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 0.5)]
        homophily: f64,
        #[arg(long, default_value_t = 2)]
        deg_min: usize,
        #[arg(long, default_value_t = 10)]
        deg_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print edge and node homophily of a bundle
    Homophily { dir: PathBuf },
    /// Extract a bases matrix (raw | agg:K | mlp | gcn) to a CSV file
    Bases {
        dir: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a new structure from a bases file and save it as a bundle
    Rewire {
        dir: PathBuf,
        #[arg(long)]
        bases_file: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate mutual information between a bases file and the labels
    Mi {
        dir: PathBuf,
        #[arg(long)]
        bases_file: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Train a model on a bundle, optionally fused with a learned structure
    Train {
        dir: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        fusion: Option<String>,
        #[arg(long)]
        gsl: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the homophily sweep and write its records CSV
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the GSL ablation grid on a bundle and write the table CSV
    Ablate {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a theoretical guarantee numerically over a sweep grid
    Verify {
        #[arg(long)]
        theorem: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render the class-sorted adjacency (node = PGM image, class = CSV)
    Viz {
        dir: PathBuf,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the quadratic construction path against a sparse baseline
    Bench {
        #[arg(long)]
        sizes: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|source| Error::io(p, source))?;
            serde_json::from_str(&text).map_err(|e| Error::parse(p, e.line(), e.to_string()))
        }
    }
}

fn bundle_split(dir: &Path, fallback_seed: u64) -> Result<(gsl_lab::graph::Graph, DataSplit)> {
    let (graph, split) = load_bundle(dir)?;
    let split = split.unwrap_or_else(|| DataSplit::random(graph.num_nodes(), fallback_seed));
    Ok((graph, split))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate {
            nodes,
            features,
            classes,
            homophily,
            deg_min,
            deg_max,
            seed,
            out,
        } => {
            let cfg = CsbmConfig {
                num_nodes: nodes,
                feature_dim: features,
                num_classes: classes,
                homophily,
                degree_min: deg_min,
                degree_max: deg_max,
                ..CsbmConfig::default()
            };
            let (graph, stats) = generate_csbm_with_stats(&cfg, seed)?;
            save_bundle(&graph, None, &out)?;
            println!(
                "wrote {} nodes, {} edges to {} (edge homophily {:.4}, dropped proposals {:.2}%)",
                graph.num_nodes(),
                graph.edge_count(),
                out.display(),
                edge_homophily(&graph)?,
                100.0 * stats.drop_rate()
            );
            Ok(())
        }
        Cmd::Homophily { dir } => {
            let (graph, _) = load_bundle(&dir)?;
            println!("edge_homophily: {}", edge_homophily(&graph)?);
            println!("node_homophily: {}", node_homophily(&graph));
            Ok(())
        }
        Cmd::Bases { dir, kind, seed, out } => {
            let spec: BasesSpec = kind.parse()?;
            let (graph, split) = bundle_split(&dir, seed)?;
            let b = extract_bases(&graph, &spec, &PretrainConfig::default(), &split, seed)?;
            save_matrix(&b, &out)?;
            println!("wrote {} x {} bases ({spec}) to {}", b.rows(), b.cols(), out.display());
            Ok(())
        }
        Cmd::Rewire {
            dir,
            bases_file,
            method,
            out,
        } => {
            let spec: ConstructSpec = method.parse()?;
            let (graph, split) = load_bundle(&dir)?;
            let b = load_matrix(&bases_file)?;
            if b.rows() != graph.num_nodes() {
                return Err(Error::validation(format!(
                    "bases file has {} rows, graph has {} nodes",
                    b.rows(),
                    graph.num_nodes()
                )));
            }
            let structure = build_gsl_graph(&b, &spec, graph.edge_count())?;
            let g_new = structure.to_graph(
                graph.features().clone(),
                graph.labels().to_vec(),
                graph.num_classes(),
            )?;
            save_bundle(&g_new, split.as_ref(), &out)?;
            println!(
                "rewired {} edges -> {} edges ({spec}), bundle at {}",
                graph.edge_count(),
                g_new.edge_count(),
                out.display()
            );
            Ok(())
        }
        Cmd::Mi { dir, bases_file, k } => {
            let (graph, _) = load_bundle(&dir)?;
            let b = load_matrix(&bases_file)?;
            let cfg = MiConfig {
                k,
                ..MiConfig::default()
            };
            let mi = mi_discrete_continuous(&b, graph.labels(), &cfg)?;
            println!("{mi}");
            Ok(())
        }
        Cmd::Train {
            dir,
            model,
            fusion,
            gsl,
            seed,
        } => {
            let kind: ModelKind = model.parse()?;
            let spec = ModelSpec {
                kind,
                layers: match kind {
                    ModelKind::Sgc { .. } => 1,
                    _ => 2,
                },
                hidden: 64,
                dropout: 0.5,
            };
            let cfg = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let (graph, split) = bundle_split(&dir, seed)?;
            let report = match (fusion, gsl) {
                (None, None) => {
                    let graphs: Vec<&gsl_lab::graph::Graph> = match kind {
                        ModelKind::Mlp => Vec::new(),
                        _ => vec![&graph],
                    };
                    let (_, report) =
                        nn::train(&spec, graph.features(), &graphs, graph.labels(), &split, &cfg)?;
                    report
                }
                (Some(fusion), Some(gsl_dir)) => {
                    let fusion: FusionSpec = fusion.parse()?;
                    let (g_new, _) = load_bundle(&gsl_dir)?;
                    let plan = plan_training(fusion, &graph, &Structure::from_graph(&g_new))?;
                    let (_, report) = train_with_plan(
                        &spec,
                        graph.features(),
                        &plan,
                        graph.labels(),
                        &split,
                        &cfg,
                    )?;
                    report
                }
                (Some(_), None) => {
                    return Err(Error::validation("--fusion requires --gsl DIR"));
                }
                (None, Some(_)) => {
                    return Err(Error::validation(
                        "--gsl requires --fusion (only-new, early, late-shared, late-separate)",
                    ));
                }
            };
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::numeric(format!("report serialization failed: {e}")))?;
            println!("{json}");
            Ok(())
        }
        Cmd::Sweep { config, out } => {
            let cfg: SweepConfig = read_config(config.as_deref())?;
            let result = run_synthetic_sweep(&cfg)?;
            for f in &result.failures {
                eprintln!(
                    "cell failed: h={} seed={} bases={}: {}",
                    f.h, f.seed, f.bases, f.message
                );
            }
            std::fs::write(&out, records_to_csv(&result.records))
                .map_err(|source| Error::io(&out, source))?;
            println!(
                "wrote {} records to {} ({} failed cells)",
                result.records.len(),
                out.display(),
                result.failures.len()
            );
            Ok(())
        }
        Cmd::Ablate { dir, config, out } => {
            let cfg: AblationConfig = read_config(config.as_deref())?;
            let (graph, split) = load_bundle(&dir)?;
            let result = run_ablation(&graph, split.as_ref(), &cfg)?;
            for f in &result.failures {
                eprintln!("cell failed: {}: {}", f.cell, f.message);
            }
            std::fs::write(&out, ablation_to_csv(&result.rows))
                .map_err(|source| Error::io(&out, source))?;
            println!(
                "wrote {} rows to {} ({} failed cells)",
                result.rows.len(),
                out.display(),
                result.failures.len()
            );
            Ok(())
        }
        Cmd::Verify { theorem, config } => {
            let cfg: SweepConfig = read_config(config.as_deref())?;
            match theorem.as_str() {
                "fano" => verify_fano(&cfg),
                "dpi" => verify_dpi(&cfg),
                other => Err(Error::validation(format!(
                    "unknown theorem '{other}' (expected fano or dpi)"
                ))),
            }
        }
        Cmd::Viz { dir, mode, out } => {
            let mode: VizMode = mode.parse()?;
            let (graph, _) = load_bundle(&dir)?;
            write_sorted_adjacency(&graph, mode, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Bench { sizes, out } => {
            let parsed: Vec<usize> = sizes
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::validation(format!("bad size '{s}'")))
                })
                .collect::<Result<_>>()?;
            let rows = timing_benchmark(&parsed, 64, 3, 0)?;
            let csv = timings_to_csv(&rows);
            std::fs::write(&out, &csv).map_err(|source| Error::io(&out, source))?;
            print!("{csv}");
            Ok(())
        }
    }
}

const FANO_SLACK: f64 = 0.10;
const FANO_VIOLATION_BUDGET: f64 = 0.02;
const DPI_TOLERANCE: f64 = 0.05;

fn verify_fano(cfg: &SweepConfig) -> Result<()> {
    let result = run_synthetic_sweep(cfg)?;
    for f in &result.failures {
        eprintln!(
            "cell failed: h={} seed={} bases={}: {}",
            f.h, f.seed, f.bases, f.message
        );
    }
    if result.records.is_empty() {
        return Err(Error::numeric("sweep produced no records to audit"));
    }
    let classes = cfg.csbm.num_classes;
    let mut violations = 0usize;
    for r in &result.records {
        let rec = BoundRecord::evaluate(r.mi_nats, classes, r.accuracy, FANO_SLACK)?;
        if rec.violated {
            violations += 1;
            eprintln!(
                "bound exceeded: h={} seed={} bases={} rep={}: acc {} > bound {} + {FANO_SLACK}",
                r.h, r.seed, r.bases, r.representation, r.accuracy, rec.bound
            );
        }
    }
    let total = result.records.len();
    let rate = violations as f64 / total as f64;
    let pass = rate <= FANO_VIOLATION_BUDGET;
    println!(
        "accuracy bound: {total} records, {violations} violations ({:.2}%) at slack {FANO_SLACK} -> {}",
        rate * 100.0,
        if pass { "PASS" } else { "FAIL" }
    );

    // Vacuous variant: with MI replaced by the label entropy (= ln C for
    // this balanced generator) the bound clamps to 1, so any violation
    // would indicate an accuracy above 1 — a harness bug, never noise.
    let entropy = (classes as f64).ln();
    let vacuous = result
        .records
        .iter()
        .map(|r| BoundRecord::evaluate(entropy, classes, r.accuracy, FANO_SLACK))
        .collect::<Result<Vec<_>>>()?;
    let vacuous_violations = vacuous.iter().filter(|r| r.violated).count();
    println!(
        "vacuous bound (MI = label entropy): {vacuous_violations} violations -> {}",
        if vacuous_violations == 0 { "PASS" } else { "FAIL" }
    );

    if pass && vacuous_violations == 0 {
        Ok(())
    } else {
        Err(Error::numeric(format!(
            "accuracy bound violated on {violations} of {total} records (> {:.0}% budget)",
            FANO_VIOLATION_BUDGET * 100.0
        )))
    }
}

fn verify_dpi(cfg: &SweepConfig) -> Result<()> {
    let (records, failures) = run_dpi_verification(cfg)?;
    for f in &failures {
        eprintln!(
            "cell failed: h={} seed={} bases={}: {}",
            f.h, f.seed, f.bases, f.message
        );
    }
    if records.is_empty() {
        return Err(Error::numeric("no aggregation checks were produced"));
    }
    // Mean gap per (bases, aggregation, h) cell; a keyed BTreeMap keeps the
    // report order deterministic. h >= 0 so its bit pattern orders numerically.
    let mut cells: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    for r in &records {
        cells
            .entry((r.bases.clone(), r.aggregation.to_string(), r.h.to_bits()))
            .or_default()
            .push(r.gap);
    }
    let mut worst: Option<(f64, String)> = None;
    for ((bases, agg, h_bits), gaps) in &cells {
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let label = format!(
            "bases={bases} aggregation={agg} h={}",
            f64::from_bits(*h_bits)
        );
        if worst.as_ref().is_none_or(|(g, _)| mean_gap < *g) {
            worst = Some((mean_gap, label));
        }
    }
    let (min_gap, at) = worst.expect("non-empty cells");
    let pass = min_gap >= -DPI_TOLERANCE;
    println!(
        "aggregation cannot add label information: min mean gap {min_gap:.4} nats ({at}), tolerance -{DPI_TOLERANCE} -> {}",
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(Error::numeric(format!(
            "mean information gap {min_gap:.4} nats below -{DPI_TOLERANCE} at {at}"
        )))
    }
}
