//! Equilibrium backup placement against spreading the budget evenly.

use itsguard::experiment::{run, ExperimentId, ExperimentSpec};
use itsguard::scenario::ScenarioConfig;

fn main() -> itsguard::Result<()> {
    let mut spec = ExperimentSpec::new(ExperimentId::AllocationCompare, ScenarioConfig::default());
    spec.reps = 10;
    let table = run(&spec)?;

    println!("{:>6} {:<8} {:>12} {:>12} {:>7}", "P_d", "level", "se", "equal", "gain");
    for &p in &spec.sweep {
        for level in &spec.levels {
            let name = level.short_name();
            let se = table.find(p, name, "se", p).map(|c| c.mean()).unwrap_or(f64::NAN);
            let eq = table.find(p, name, "equal", p).map(|c| c.mean()).unwrap_or(f64::NAN);
            let gain = if eq > 0.0 { 100.0 * (1.0 - se / eq) } else { 0.0 };
            println!("{p:>6} {name:<8} {se:>12.1} {eq:>12.1} {gain:>6.1}%");
        }
    }
    Ok(())
}
