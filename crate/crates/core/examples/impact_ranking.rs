//! Ranks base stations by how much traffic disruption their outage causes.

use itsguard::impact::its_deviation;
use itsguard::scenario::{generate, ScenarioConfig};

fn main() -> itsguard::Result<()> {
    let cfg = ScenarioConfig { grid_n: 6, seed: 11, ..ScenarioConfig::default() };
    let s = generate(&cfg)?;
    let impact = &s.impact;

    println!("{} streets, {} stations", s.network.len(), s.base_stations.len());
    println!("{:>4} {:>12} {:>8}", "bs", "score", "streets");
    for (b, z) in impact.ranking().into_iter().take(8) {
        println!("{b:>4} {z:>12.4} {:>8}", impact.covered_street_count(b));
    }

    // knocking each station down by half its headroom
    let half: Vec<f64> = impact.headroom().iter().map(|h| h / 2.0).collect();
    let full: Vec<f64> = impact.headroom().to_vec();
    println!("half outage everywhere: {:.1} veh/h", its_deviation(impact, &half));
    println!("full outage everywhere: {:.1} veh/h", its_deviation(impact, &full));

    let mut out = Vec::new();
    impact.write_csv(&mut out)?;
    println!("\n{}", String::from_utf8_lossy(&out).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
