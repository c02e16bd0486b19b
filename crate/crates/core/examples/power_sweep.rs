//! Cuts all generation by a growing fraction and writes the resulting
//! traffic deviation as CSV and SVG.

use itsguard::experiment::{run, ExperimentId, ExperimentSpec, OutputFormat};
use itsguard::scenario::ScenarioConfig;

fn main() -> itsguard::Result<()> {
    let mut spec = ExperimentSpec::new(ExperimentId::PowerSweep, ScenarioConfig::default());
    spec.reps = 5;
    let table = run(&spec)?;

    for cell in table.series("all", "none", 0.0) {
        let bar = "#".repeat((cell.mean() / 1000.0).round() as usize);
        println!("{:>5.0}% {:>10.1} {bar}", cell.x, cell.mean());
    }

    let dir = std::env::temp_dir().join("itsguard-power-sweep");
    for format in [OutputFormat::Csv, OutputFormat::Svg] {
        println!("wrote {}", table.emit(format, &dir)?.display());
    }
    Ok(())
}
