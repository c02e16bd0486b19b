//! Batch experiments over seeded scenarios, with CSV and SVG output.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    attacker_best_response, equal_allocation, residual_deviation, single_source_response, stackelberg_equilibrium,
    StationCapRule, StealthLevel,
};
use crate::impact::its_deviation;
use crate::scenario::{generate, Scenario, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    PowerSweep,
    ScaleSweep,
    RadiusSweep,
    GeneratorsAll,
    GeneratorsSingle,
    AllocationCompare,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::PowerSweep,
        ExperimentId::ScaleSweep,
        ExperimentId::RadiusSweep,
        ExperimentId::GeneratorsAll,
        ExperimentId::GeneratorsSingle,
        ExperimentId::AllocationCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::PowerSweep => "power-sweep",
            ExperimentId::ScaleSweep => "scale-sweep",
            ExperimentId::RadiusSweep => "radius-sweep",
            ExperimentId::GeneratorsAll => "generators-all",
            ExperimentId::GeneratorsSingle => "generators-single",
            ExperimentId::AllocationCompare => "allocation-compare",
        }
    }

    /// Column name of the swept quantity.
    pub fn sweep_var(self) -> &'static str {
        match self {
            ExperimentId::PowerSweep => "reduction_pct",
            ExperimentId::ScaleSweep => "grid_n",
            ExperimentId::RadiusSweep => "cell_radius_km",
            ExperimentId::GeneratorsAll | ExperimentId::GeneratorsSingle => "num_generators",
            ExperimentId::AllocationCompare => "budget_w",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub base: ScenarioConfig,
    /// Values of the swept quantity.
    pub sweep: Vec<f64>,
    /// Seeds `base.seed .. base.seed + reps`.
    pub reps: usize,
    pub levels: Vec<StealthLevel>,
    /// Defender budgets evaluated at every sweep point (scale sweep only).
    pub budgets: Vec<f64>,
    pub cap_rule: StationCapRule,
}

impl ExperimentSpec {
    /// Default sweep for `id` around `base`.
    pub fn new(id: ExperimentId, base: ScenarioConfig) -> Self {
        let stealthy = StealthLevel::STEALTHY.to_vec();
        let (sweep, reps, levels, budgets) = match id {
            ExperimentId::PowerSweep => ((0..=20).map(|k| 5.0 * k as f64).collect(), 10, Vec::new(), Vec::new()),
            ExperimentId::ScaleSweep => {
                ((4..=10).map(|n| n as f64).collect(), 30, stealthy, vec![0.0, 50.0, 100.0, 250.0])
            }
            ExperimentId::RadiusSweep => {
                ((8..=16).map(|k| k as f64 / 10.0).collect(), 30, stealthy, Vec::new())
            }
            ExperimentId::GeneratorsAll | ExperimentId::GeneratorsSingle => {
                (vec![1.0, 2.0, 4.0, 8.0, 16.0], 30, stealthy, Vec::new())
            }
            ExperimentId::AllocationCompare => {
                ((0..=6).map(|k| 100.0 * k as f64).collect(), 30, StealthLevel::ALL.to_vec(), Vec::new())
            }
        };
        ExperimentSpec { id, base, sweep, reps, levels, budgets, cap_rule: StationCapRule::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.reps == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.sweep.is_empty() {
            return Err(Error::invalid("sweep range is empty"));
        }
        let needs_levels = self.id != ExperimentId::PowerSweep;
        if needs_levels && self.levels.is_empty() {
            return Err(Error::invalid("no stealth levels selected"));
        }
        if self.id == ExperimentId::ScaleSweep && self.budgets.is_empty() {
            return Err(Error::invalid("scale sweep needs at least one budget"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.reps as u64).map(|r| self.base.seed.wrapping_add(r)).collect()
    }
}

/// One table row: every seed's value at a sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x: f64,
    pub level: String,
    pub strategy: String,
    pub p_d: f64,
    pub values: Vec<f64>,
}

impl Cell {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation, zero for a single value.
    pub fn std(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub sweep_var: String,
    /// `key = value` settings written as comment lines.
    pub provenance: Vec<(String, String)>,
    pub cells: Vec<Cell>,
}

impl Table {
    pub fn find(&self, x: f64, level: &str, strategy: &str, p_d: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.x == x && c.level == level && c.strategy == strategy && c.p_d == p_d)
    }

    /// Cells of one series in sweep order.
    pub fn series(&self, level: &str, strategy: &str, p_d: f64) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.level == level && c.strategy == strategy && c.p_d == p_d).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<csv>", e);
        for (k, v) in &self.provenance {
            writeln!(out, "# {k} = {v}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record([self.sweep_var.as_str(), "level", "strategy", "p_d", "mean", "std", "n"]).map_err(wrap)?;
        for c in &self.cells {
            w.write_record([
                c.x.to_string(),
                c.level.clone(),
                c.strategy.clone(),
                c.p_d.to_string(),
                c.mean().to_string(),
                c.std().to_string(),
                c.values.len().to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(io)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Line chart of the means, one polyline per series.
    pub fn write_svg<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(svg_chart(self).as_bytes()).map_err(|e| Error::io("<svg>", e))
    }

    /// Writes `<dir>/<experiment>.<ext>` and returns the path.
    pub fn emit(&self, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
        if self.cells.is_empty() {
            return Err(Error::invalid("nothing to write: table is empty"));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.{}", self.experiment, format.extension()));
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        match format {
            OutputFormat::Csv => self.write_csv(&mut w)?,
            OutputFormat::Svg => self.write_svg(&mut w)?,
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Svg,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::invalid(format!("unknown output format `{other}`"))),
        }
    }
}

/// Runs the experiment named by `spec.id`.
pub fn run(spec: &ExperimentSpec) -> Result<Table> {
    match spec.id {
        ExperimentId::PowerSweep => run_power_sweep(spec),
        ExperimentId::ScaleSweep => run_scale_sweep(spec),
        ExperimentId::RadiusSweep => run_radius_sweep(spec),
        ExperimentId::GeneratorsAll | ExperimentId::GeneratorsSingle => run_generator_experiments(spec),
        ExperimentId::AllocationCompare => run_allocation_compare(spec),
    }
}

type Key = (f64, String, String, f64);

/// Evaluates `per_seed` for every seed in parallel and regroups the results
/// by key, keeping seed order.
fn tabulate<F>(spec: &ExperimentSpec, keys: Vec<Key>, extra: Vec<(String, String)>, per_seed: F) -> Result<Table>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    spec.validate()?;
    let runs: Vec<Vec<f64>> = spec.seeds().par_iter().map(|&s| per_seed(s)).collect::<Result<_>>()?;
    let cells = keys
        .into_iter()
        .enumerate()
        .map(|(k, (x, level, strategy, p_d))| Cell { x, level, strategy, p_d, values: runs.iter().map(|r| r[k]).collect() })
        .collect();
    Ok(Table {
        experiment: spec.id.name().to_string(),
        sweep_var: spec.id.sweep_var().to_string(),
        provenance: provenance(spec, extra),
        cells,
    })
}

fn provenance(spec: &ExperimentSpec, extra: Vec<(String, String)>) -> Vec<(String, String)> {
    let list = |v: &[f64]| format!("[{}]", v.iter().map(f64::to_string).collect::<Vec<_>>().join(", "));
    let mut p = vec![
        ("experiment".to_string(), spec.id.name().to_string()),
        ("reps".to_string(), spec.reps.to_string()),
        ("sweep".to_string(), list(&spec.sweep)),
        (
            "levels".to_string(),
            format!("[{}]", spec.levels.iter().map(|l| l.short_name()).collect::<Vec<_>>().join(", ")),
        ),
        ("station_cap_rule".to_string(), format!("{:?}", spec.cap_rule)),
    ];
    if !spec.budgets.is_empty() {
        p.push(("budgets".to_string(), list(&spec.budgets)));
    }
    for line in spec.base.to_toml().lines().filter(|l| !l.trim().is_empty()) {
        if let Some((k, v)) = line.split_once(" = ") {
            p.push((format!("config.{k}"), v.to_string()));
        }
    }
    p.extend(extra);
    p
}

fn scenario_for(base: &ScenarioConfig, seed: u64, edit: impl FnOnce(&mut ScenarioConfig)) -> Result<Scenario> {
    let mut cfg = base.clone();
    cfg.seed = seed;
    edit(&mut cfg);
    generate(&cfg)
}

/// Flow deviation left at the equilibrium for budget `budget`.
fn se_deviation(s: &Scenario, level: StealthLevel, rule: StationCapRule, budget: f64) -> Result<f64> {
    let inst = s.game_instance().with_cap_rule(rule);
    Ok(stackelberg_equilibrium(level, &inst, budget)?.outcome.its_deviation)
}

/// Uniform cut of all generation by `x` percent.
pub fn run_power_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let keys = spec.sweep.iter().map(|&x| (x, "all".to_string(), "none".to_string(), 0.0)).collect();
    let extra = vec![("attack".to_string(), "every station loses x% of p_t".to_string())];
    tabulate(spec, keys, extra, |seed| {
        let s = scenario_for(&spec.base, seed, |_| {})?;
        Ok(spec
            .sweep
            .iter()
            .map(|&x| {
                let dev: Vec<f64> = s.base_stations.iter().map(|b| b.p_t * x / 100.0).collect();
                its_deviation(&s.impact, &dev)
            })
            .collect())
    })
}

/// Grid size against budget and level, equilibrium play.
pub fn run_scale_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let mut keys = Vec::new();
    for &x in &spec.sweep {
        for &level in &spec.levels {
            for &b in &spec.budgets {
                keys.push((x, level.to_string(), "se".to_string(), b));
            }
        }
    }
    tabulate(spec, keys, Vec::new(), |seed| {
        let mut out = Vec::new();
        for &x in &spec.sweep {
            let s = scenario_for(&spec.base, seed, |c| c.grid_n = x as usize)?;
            for &level in &spec.levels {
                for &b in &spec.budgets {
                    out.push(se_deviation(&s, level, spec.cap_rule, b)?);
                }
            }
        }
        Ok(out)
    })
}

/// Cell radius against level, with equilibrium backup power and without any.
pub fn run_radius_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let budget = spec.base.budget;
    let mut keys = Vec::new();
    for &x in &spec.sweep {
        for &level in &spec.levels {
            keys.push((x, level.to_string(), "se".to_string(), budget));
            keys.push((x, level.to_string(), "none".to_string(), 0.0));
        }
    }
    tabulate(spec, keys, Vec::new(), |seed| {
        let mut out = Vec::new();
        for &x in &spec.sweep {
            let s = scenario_for(&spec.base, seed, |c| c.cell_radius = x)?;
            for &level in &spec.levels {
                out.push(se_deviation(&s, level, spec.cap_rule, budget)?);
                out.push(se_deviation(&s, level, spec.cap_rule, 0.0)?);
            }
        }
        Ok(out)
    })
}

/// Generator count against level. `generators-all` attacks every source;
/// `generators-single` keeps only the attacker's most profitable source.
pub fn run_generator_experiments(spec: &ExperimentSpec) -> Result<Table> {
    let single = match spec.id {
        ExperimentId::GeneratorsAll => false,
        ExperimentId::GeneratorsSingle => true,
        other => return Err(Error::invalid(format!("{other} is not a generator experiment"))),
    };
    let budget = spec.base.budget;
    let strategy = if single { "se-single-source" } else { "se" };
    let mut keys = Vec::new();
    for &x in &spec.sweep {
        for &level in &spec.levels {
            keys.push((x, level.to_string(), strategy.to_string(), budget));
        }
    }
    let extra = if single {
        vec![(
            "target".to_string(),
            "source whose share of the best response pays the attacker most, ties to lower id".to_string(),
        )]
    } else {
        Vec::new()
    };
    tabulate(spec, keys, extra, |seed| {
        let mut out = Vec::new();
        for &x in &spec.sweep {
            let s = scenario_for(&spec.base, seed, |c| c.num_generators = x as usize)?;
            let inst = s.game_instance().with_cap_rule(spec.cap_rule);
            for &level in &spec.levels {
                let eq = stackelberg_equilibrium(level, &inst, budget)?;
                if single {
                    let (_, attack) = single_source_response(level, &inst, &eq.defense.p_d)?;
                    out.push(residual_deviation(&inst, &eq.defense.p_d, &attack.per_station(&inst)));
                } else {
                    out.push(eq.outcome.its_deviation);
                }
            }
        }
        Ok(out)
    })
}

/// Equilibrium allocation against an equal split, per budget and level.
pub fn run_allocation_compare(spec: &ExperimentSpec) -> Result<Table> {
    let mut keys = Vec::new();
    for &x in &spec.sweep {
        for &level in &spec.levels {
            keys.push((x, level.to_string(), "se".to_string(), x));
            keys.push((x, level.to_string(), "equal".to_string(), x));
        }
    }
    tabulate(spec, keys, Vec::new(), |seed| {
        let s = scenario_for(&spec.base, seed, |_| {})?;
        let inst = s.game_instance().with_cap_rule(spec.cap_rule);
        let mut out = Vec::new();
        for &x in &spec.sweep {
            let equal = equal_allocation(inst.num_base_stations(), x)?;
            for &level in &spec.levels {
                out.push(stackelberg_equilibrium(level, &inst, x)?.outcome.its_deviation);
                let attack = attacker_best_response(level, &inst, &equal.p_d)?;
                out.push(residual_deviation(&inst, &equal.p_d, &attack.per_station(&inst)));
            }
        }
        Ok(out)
    })
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e5) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn svg_chart(table: &Table) -> String {
    let (w, h) = (760.0, 480.0);
    let (left, right, top, bottom) = (80.0, 200.0, 40.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let mut series: Vec<(String, String, f64)> = Vec::new();
    for c in &table.cells {
        let key = (c.level.clone(), c.strategy.clone(), c.p_d);
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let xs = table.cells.iter().map(|c| c.x);
    let ys = table.cells.iter().map(Cell::mean);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut y0, mut y1) = ys.fold((0.0_f64, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    s.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!("<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        left + pw / 2.0,
        escape(&table.experiment)
    ));
    s.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#333\"/>\n"
    ));
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\n<text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{4}</text>\n",
            px(xv),
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0,
            tick_label(xv)
        ));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#333\"/>\n<text x=\"{3}\" y=\"{4}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{5}</text>\n",
            left - 5.0,
            py(yv),
            left,
            left - 8.0,
            py(yv) + 4.0,
            tick_label(yv)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        left + pw / 2.0,
        h - 15.0,
        escape(&table.sweep_var)
    ));
    s.push_str(&format!(
        "<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 {0})\">mean flow deviation</text>\n",
        top + ph / 2.0
    ));
    for (k, (level, strategy, p_d)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = table
            .series(level, strategy, *p_d)
            .iter()
            .map(|c| format!("{:.2},{:.2}", px(c.x), py(c.mean())))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = top + 14.0 + 18.0 * k as f64;
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"11\">{5}</text>\n",
            left + pw + 12.0,
            ly,
            left + pw + 36.0,
            left + pw + 42.0,
            ly + 4.0,
            escape(&format!("{level} {strategy} p_d={p_d}"))
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(id: ExperimentId) -> ExperimentSpec {
        let base = ScenarioConfig { grid_n: 3, num_generators: 2, ..ScenarioConfig::default() };
        let mut spec = ExperimentSpec::new(id, base);
        spec.reps = 2;
        spec
    }

    #[test]
    fn experiment_names_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("fig-4".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn power_sweep_starts_at_zero_and_saturates() {
        let t = run_power_sweep(&tiny(ExperimentId::PowerSweep)).unwrap();
        let s = t.series("all", "none", 0.0);
        assert_eq!(s[0].mean(), 0.0);
        assert_eq!(t.find(50.0, "all", "none", 0.0).unwrap().values, t.find(100.0, "all", "none", 0.0).unwrap().values);
    }

    #[test]
    fn csv_has_provenance_header_and_rows() {
        let t = run_power_sweep(&tiny(ExperimentId::PowerSweep)).unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("# experiment = power-sweep\n"));
        assert!(text.contains("# config.grid_n = 3\n"));
        assert!(text.contains("\nreduction_pct,level,strategy,p_d,mean,std,n\n"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 21);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let mut spec = tiny(ExperimentId::PowerSweep);
        spec.sweep.clear();
        assert!(run(&spec).is_err());
        let mut spec = tiny(ExperimentId::PowerSweep);
        spec.reps = 0;
        assert!(run(&spec).is_err());
    }

    #[test]
    fn std_of_single_value_is_zero() {
        let c = Cell { x: 0.0, level: "bs".into(), strategy: "se".into(), p_d: 0.0, values: vec![3.0] };
        assert_eq!(c.std(), 0.0);
        let c = Cell { values: vec![1.0, 3.0], ..c };
        assert_eq!(c.mean(), 2.0);
        assert!((c.std() - 2.0_f64.sqrt()).abs() < 1e-15);
    }
}
