//! Check the information-theoretic accuracy ceiling on live data.
//!
//! For C classes, any classifier reading a representation B obeys
//! acc <= (I(Y;B) + ln 2) / ln C, clamped to 1. Dialing the class-mean
//! separation sweeps I(Y;X) from near zero toward ln C; at every point the
//! measured test accuracy has to stay under the bound (plus the estimator
//! slack). Low separation is the regime where the bound bites — accuracy
//! hugs it — while at high separation both saturate.

use gsl_lab::csbm::{generate_csbm, CsbmConfig};
use gsl_lab::mi::{mi_discrete_continuous, MiConfig};
use gsl_lab::nn::{train, DataSplit, ModelKind, ModelSpec, TrainConfig};
use gsl_lab::theory::{fano_bound, BoundRecord};

fn main() -> gsl_lab::Result<()> {
    let slack = 0.10;
    let mut worst: f64 = f64::NEG_INFINITY;
    println!("separation  I(Y;X)   bound   test_acc  violated");
    for scale in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let cfg = CsbmConfig {
            num_nodes: 500,
            class_mean_scale: scale,
            ..CsbmConfig::default()
        };
        let g = generate_csbm(&cfg, 21)?;
        let split = DataSplit::random(g.num_nodes(), 21);
        let mi = mi_discrete_continuous(g.features(), g.labels(), &MiConfig::default())?;

        let spec = ModelSpec {
            hidden: 64,
            dropout: 0.0,
            ..ModelSpec::new(ModelKind::Mlp)
        };
        let cfg_t = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let (_, report) = train(&spec, g.features(), &[], g.labels(), &split, &cfg_t)?;
        let acc = report.test_acc_at_best_val;

        let record = BoundRecord::evaluate(mi, g.num_classes(), acc, slack)?;
        worst = worst.max(acc - record.bound);
        println!(
            "{scale:>10.2}  {mi:.4}   {:.4}  {acc:.4}    {}",
            record.bound, record.violated
        );
        assert!(!record.violated);
    }
    println!("\nworst (acc - bound) = {worst:.4}; slack allowed = {slack}");
    println!(
        "bound saturates: I = ln C gives {}",
        fano_bound((5f64).ln(), 5)?
    );
    Ok(())
}
