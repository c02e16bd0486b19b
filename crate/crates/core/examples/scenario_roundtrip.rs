//! Generates a scenario, saves it, loads it back and checks nothing moved.

use itsguard::scenario::{generate, Scenario, ScenarioConfig};

fn main() -> itsguard::Result<()> {
    let cfg = ScenarioConfig { grid_n: 5, num_generators: 4, seed: 2024, ..ScenarioConfig::default() };
    let s = generate(&cfg)?;
    println!(
        "grid {}: {} streets, {} stations, {} generators, {} lines",
        cfg.grid_n,
        s.network.len(),
        s.base_stations.len(),
        s.generators.len(),
        s.assignment.lines().len()
    );

    let path = std::env::temp_dir().join("itsguard-roundtrip.toml");
    s.save(&path)?;
    let back = Scenario::load(&path)?;
    println!("saved to {}, reload identical: {}", path.display(), back == s);

    let flows = back.flows()?;
    let busiest = flows.iter().cloned().fold(0.0, f64::max);
    println!("busiest street carries {busiest:.1} veh/h");
    Ok(())
}
