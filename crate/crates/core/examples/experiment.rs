//! A small replicated experiment: stratified model collection, trace
//! estimate, oracle and closed form, written as CSV.
//!
//!     cargo run --release --example experiment [out.csv]

use qrisk::harness::{
    aggregate_histogram, run_experiment_with_workers, write_experiment_csv, Collection, ExperimentConfig,
};

fn main() -> qrisk::Result<()> {
    let cfg = ExperimentConfig {
        n: 300,
        p: 12,
        taus: vec![0.5],
        reps: 40,
        collection: Collection::Stratified { count: 4 },
        oracle_reps: 300,
        oracle_eval: 500,
        ..ExperimentConfig::desk_dgp1(2024)
    };
    let out = run_experiment_with_workers(&cfg, 2)?;

    println!("{:<28} {:>9} {:>9} {:>9} {:>9}", "model", "b_hat", "oracle", "(se)", "closed");
    for r in &out.rows {
        let o = r.oracle.unwrap();
        println!(
            "{:<28} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r.model.to_string(),
            r.b_hat_mean.unwrap(),
            o.optimism,
            o.optimism_se,
            r.closed_form_trace.unwrap()
        );
    }

    // Spread of b_hat for the correct model across replications.
    let idx = out.models.iter().position(|m| m.indices() == [1, 2, 3, 4]).unwrap();
    let values: Vec<f64> = out.replicates.iter().filter_map(|r| r[0][idx].b_hat).collect();
    let (edges, counts) = aggregate_histogram(&values, 6)?;
    println!("\nb_hat for intercept+z1..z4:");
    for (i, c) in counts.iter().enumerate() {
        println!("  [{:.4}, {:.4}] {}", edges[i], edges[i + 1], "#".repeat(*c));
    }

    if let Some(path) = std::env::args().nth(1) {
        write_experiment_csv(&cfg, &out, std::fs::File::create(&path)?)?;
        println!("\nwrote {path}");
    }
    Ok(())
}
