//! Solves the backup-power game on one scenario at every stealth level.

use itsguard::game::{stackelberg_equilibrium, SolveReport, StealthLevel};
use itsguard::scenario::{generate, ScenarioConfig};

fn main() -> itsguard::Result<()> {
    let s = generate(&ScenarioConfig { seed: 3, ..ScenarioConfig::default() })?;
    let inst = s.game_instance();
    let budget = 300.0;

    println!("{:<8} {:>14} {:>14} {:>12} {:>8}", "level", "defender", "attacker", "deviation", "backed");
    for level in StealthLevel::ALL {
        let eq = stackelberg_equilibrium(level, &inst, budget)?;
        let backed = eq.defense.p_d.iter().filter(|p| **p > 0.0).count();
        let o = &eq.outcome;
        println!(
            "{:<8} {:>14.1} {:>14.1} {:>12.1} {:>8}",
            level.short_name(),
            o.defender_payoff,
            o.attacker_payoff,
            o.its_deviation,
            backed
        );
    }

    let eq = stackelberg_equilibrium(StealthLevel::PowerLine, &inst, budget)?;
    let report = SolveReport::new(&inst, &eq).to_toml()?;
    println!("\n{}", report.lines().take(12).collect::<Vec<_>>().join("\n"));
    Ok(())
}
