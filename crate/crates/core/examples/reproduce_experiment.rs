//! Run a registered simulation experiment and write its CSV bundle.
//!
//! Usage: `cargo run --release --example reproduce_experiment -- fig1_right results/fig1_right 7`

use std::path::PathBuf;

use akrrlab::experiments::{reproduce, Scale, EXPERIMENT_IDS};

fn main() -> akrrlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "fig1_right".into());
    let dir = args.next().map_or_else(|| PathBuf::from("results").join(&id), PathBuf::from);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(20241015);
    if !EXPERIMENT_IDS.contains(&id.as_str()) {
        eprintln!("unknown id `{id}`; known: {}", EXPERIMENT_IDS.join(", "));
        std::process::exit(2);
    }
    let rep = reproduce(&id, Scale::Desk, seed)?;
    for path in rep.write_bundle(&dir)? {
        println!("wrote {}", path.display());
    }
    for slope in &rep.slopes {
        println!("{slope:?}");
    }
    for c in &rep.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
