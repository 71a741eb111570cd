//! Why structure learning is the expensive stage: dense pairwise similarity
//! is O(N^2 F) while one sparse propagation at fixed average degree is
//! O(N F). Doubling N should roughly quadruple the similarity and
//! construction times but not the propagation time. The similarity ratio is
//! the stable one (pure arithmetic, no allocation churn); propagation
//! timings sit in the tens of microseconds here, so treat that column as
//! indicative.

use gsl_lab::experiments::{timing_benchmark, timings_to_csv};

fn main() -> gsl_lab::Result<()> {
    let rows = timing_benchmark(&[500, 1000, 2000], 64, 3, 0)?;
    print!("{}", timings_to_csv(&rows));

    let last = rows.last().unwrap();
    println!(
        "\nN 1000 -> 2000: similarity grew {:.2}x (quadratic predicts 4), propagation {:.2}x",
        last.sim_ratio.unwrap(),
        last.spmm_ratio.unwrap()
    );
    Ok(())
}
