//! Run a small model x construction x fusion ablation and print the ranked
//! table. Rows are ranked within each model block (1 = best mean accuracy,
//! ties averaged); the "none/none/none" row per model is the no-rewiring
//! baseline everything else must beat to justify its cost.

use gsl_lab::csbm::{generate_csbm, CsbmConfig};
use gsl_lab::experiments::{ablation_to_csv, run_ablation, AblationConfig};

fn main() -> gsl_lab::Result<()> {
    let cfg = CsbmConfig {
        num_nodes: 300,
        homophily: 0.3,
        ..CsbmConfig::default()
    };
    let g = generate_csbm(&cfg, 2)?;

    let mut ab = AblationConfig {
        seeds: 3,
        models: vec!["mlp".into(), "gcn".into()],
        constructs: vec!["none".into(), "knn:5".into()],
        fusions: vec!["none".into(), "only-new".into(), "late-separate".into()],
        ..AblationConfig::default()
    };
    ab.train.epochs = 150;

    let out = run_ablation(&g, None, &ab)?;
    for f in &out.failures {
        eprintln!("cell {} failed: {}", f.cell, f.message);
    }
    print!("{}", ablation_to_csv(&out.rows));

    let best = out
        .rows
        .iter()
        .filter(|r| r.model == "gcn")
        .min_by(|a, b| a.rank.total_cmp(&b.rank))
        .unwrap();
    println!(
        "\nbest gcn cell: construct={} fusion={} ({:.4} +- {:.4})",
        best.construct, best.fusion, best.mean_acc, best.std_acc
    );
    Ok(())
}
