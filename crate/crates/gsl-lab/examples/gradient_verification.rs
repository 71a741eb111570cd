//! Compare every analytic gradient against central finite differences.
//!
//! All backpropagation here is hand-derived, so this check is the contract:
//! max relative disagreement across all parameters stays within 1e-4 on
//! small instances (f64, dropout off). Covers each model kind and both
//! two-graph wirings.

use gsl_lab::construct::build_gsl_graph;
use gsl_lab::csbm::{generate_csbm, CsbmConfig};
use gsl_lab::fusion::{gradient_check_with_plan, plan_training, FusionSpec};
use gsl_lab::nn::{gradient_check, ModelKind, ModelSpec};

fn main() -> gsl_lab::Result<()> {
    let cfg = CsbmConfig {
        num_nodes: 12,
        feature_dim: 4,
        num_classes: 3,
        degree_min: 2,
        degree_max: 3,
        ..CsbmConfig::default()
    };
    let g = generate_csbm(&cfg, 4)?;
    let train_set: Vec<usize> = (0..g.num_nodes()).collect();

    println!("single-graph wiring:");
    for (name, kind) in [
        ("mlp", ModelKind::Mlp),
        ("gcn", ModelKind::Gcn),
        ("sgc:2", ModelKind::Sgc { hops: 2 }),
    ] {
        // SGC is definitionally a single linear layer after propagation.
        let depths: &[usize] = if matches!(kind, ModelKind::Sgc { .. }) { &[1] } else { &[1, 2, 3] };
        for &layers in depths {
            let spec = ModelSpec {
                layers,
                hidden: 5,
                ..ModelSpec::new(kind)
            };
            let graphs: Vec<&_> = if kind == ModelKind::Mlp { vec![] } else { vec![&g] };
            let rel = gradient_check(&spec, g.features(), &graphs, g.labels(), &train_set, 17)?;
            println!("  {name} x{layers}: max rel err {rel:.3e}");
            assert!(rel <= 1e-4);
        }
    }

    println!("two-graph wirings:");
    let learned = build_gsl_graph(g.features(), &"knn:2".parse()?, g.edge_count())?;
    for fusion in [FusionSpec::LateShared, FusionSpec::LateSeparate] {
        let plan = plan_training(fusion, &g, &learned)?;
        let spec = ModelSpec {
            layers: 2,
            hidden: 5,
            ..ModelSpec::new(ModelKind::Gcn)
        };
        let rel =
            gradient_check_with_plan(&spec, g.features(), &plan, g.labels(), &train_set, 17)?;
        println!("  {fusion}: max rel err {rel:.3e}");
        assert!(rel <= 1e-4);
    }
    Ok(())
}
