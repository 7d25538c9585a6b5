//! Compares backends on a simulated dataset with the evaluation engine the
//! command line uses, then prints the per-discipline breakdown.

use slopetrack::cli::{evaluate_all, BackendSpec, EvalOptions, InitSpec, RunConfig};
use slopetrack::metrics::{aggregate, GroupKey};
use slopetrack::simgen::{simulate_dataset, DatasetConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = simulate_dataset(&DatasetConfig { videos: 9, frames: 200, seed: 8, ..Default::default() })?;
    let cfg = RunConfig::default();
    let opts = EvalOptions::default();
    println!("{:<38} {:>6} {:>6} {:>6} {:>7} {:>7}", "backend", "Pr", "Re", "F", "GSR(1)", "GSR(30)");
    for spec in ["oracle:3", "sort", "fusion:sort,oracle:6"] {
        let backend: BackendSpec = spec.parse()?;
        for init in [InitSpec::GroundTruth, "detector".parse()?] {
            let outcomes = evaluate_all(&data, &backend, &init, &cfg, &opts, 4);
            let results: Vec<_> = outcomes.into_iter().map(|o| o.result).collect();
            let rows = aggregate(&results, &[GroupKey::Discipline])?;
            let all = &rows[0];
            println!(
                "{:<38} {:6.3} {:6.3} {:6.3} {:7.3} {:7.3}",
                format!("{spec} ({init})"),
                all.precision,
                all.recall,
                all.fscore,
                all.gsr[0],
                all.gsr[4]
            );
            for r in &rows[1..] {
                println!("  {:<36} {:6.3} {:6.3} {:6.3}", r.group, r.precision, r.recall, r.fscore);
            }
        }
    }
    Ok(())
}
