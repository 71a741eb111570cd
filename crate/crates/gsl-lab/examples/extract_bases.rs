//! The four bases families and how much label information each carries.
//!
//! Bases are the node representations a structure learner works from:
//! raw features, K-hop aggregated features, or hidden activations of a
//! pretrained MLP/GCN. On a homophilous graph the aggregated and pretrained
//! families should hold at least as much mutual information with the labels
//! as raw features; on a heterophilous graph aggregation actively hurts.

use gsl_lab::bases::{extract_bases, BasesSpec, PretrainConfig};
use gsl_lab::csbm::{generate_csbm, CsbmConfig};
use gsl_lab::mi::{mi_discrete_continuous, MiConfig};
use gsl_lab::nn::DataSplit;

fn main() -> gsl_lab::Result<()> {
    let pretrain = PretrainConfig {
        epochs: 200,
        hidden: 32,
        ..PretrainConfig::default()
    };
    let mi_cfg = MiConfig::default();

    for h in [0.9, 0.1] {
        let cfg = CsbmConfig {
            num_nodes: 500,
            homophily: h,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 3)?;
        let split = DataSplit::random(g.num_nodes(), 3);

        println!("homophily {h}:");
        for spec_str in ["raw", "agg:1", "agg:2", "mlp", "gcn"] {
            let spec: BasesSpec = spec_str.parse()?;
            let b = extract_bases(&g, &spec, &pretrain, &split, 42)?;
            let mi = mi_discrete_continuous(&b, g.labels(), &mi_cfg)?;
            println!(
                "  {spec_str:<6} -> {} x {} matrix, I(Y;B) = {mi:.4} nats",
                b.rows(),
                b.cols()
            );
        }
        println!();
    }
    Ok(())
}
