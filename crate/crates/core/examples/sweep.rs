//! Runs the multiplicity sweep on a preset and prints the verdicts.
//!
//! `cargo run --release --example sweep -p orbilab -- pillowcase2d`

use orbilab::experiment::{run_experiment, ExperimentConfig};

fn main() -> orbilab::Result<()> {
    let preset = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "pillowcase2d".into());
    let eps: Vec<f64> = std::env::args()
        .skip(2)
        .filter_map(|s| s.parse().ok())
        .collect();
    let cfg = ExperimentConfig {
        preset,
        eps,
        ..ExperimentConfig::default()
    };
    let run = run_experiment(&cfg)?;
    let r = &run.report;
    println!(
        "{} n={} zeta={} cat(Z)={} m(E)/zeta={:.5}",
        r.preset, r.n, r.zeta, r.cat_z, r.cone_level
    );
    for e in &r.sweep {
        println!("{}", e.verdict.text);
        for s in &e.solutions {
            let center = s
                .concentration
                .as_ref()
                .map(|c| format!("{:.4?}", &c.center.representative[..r.n]));
            println!(
                "  {:<28} J {:>10.5} res {:.1e} it {:>5} conv {} cluster {:?} center {}",
                s.seed,
                s.energy,
                s.residual,
                s.iterations,
                s.converged,
                s.cluster,
                center.unwrap_or_else(|| s.concentration_error.clone().unwrap_or_default())
            );
        }
        println!(
            "  roundtrip passed {} {:?}",
            e.roundtrip.passed, e.roundtrip.failure
        );
    }
    for (stage, secs) in &run.timings {
        println!("{stage}: {secs:.1}s");
    }
    Ok(())
}
