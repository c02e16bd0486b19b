//! Backup-power allocation game between a defender and a stealthy attacker.
//!
//! The defender places backup power `p_d` at stations under a budget; the
//! attacker then removes power on generator-to-station lines. A stealthy
//! attacker discounts its gain by the detection ratio of the unit it wants to
//! hide at: a generator, a line, or a station.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PowerAssignment;
use crate::impact::ImpactModel;

const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StealthLevel {
    PowerSource,
    PowerLine,
    BaseStation,
    Overt,
}

impl StealthLevel {
    pub const ALL: [StealthLevel; 4] =
        [StealthLevel::PowerSource, StealthLevel::PowerLine, StealthLevel::BaseStation, StealthLevel::Overt];
    pub const STEALTHY: [StealthLevel; 3] =
        [StealthLevel::PowerSource, StealthLevel::PowerLine, StealthLevel::BaseStation];

    /// Short name used on the command line and in tables.
    pub fn short_name(self) -> &'static str {
        match self {
            StealthLevel::PowerSource => "source",
            StealthLevel::PowerLine => "line",
            StealthLevel::BaseStation => "bs",
            StealthLevel::Overt => "overt",
        }
    }
}

impl fmt::Display for StealthLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for StealthLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" | "power-source" => Ok(StealthLevel::PowerSource),
            "line" | "power-line" => Ok(StealthLevel::PowerLine),
            "bs" | "base-station" => Ok(StealthLevel::BaseStation),
            "overt" => Ok(StealthLevel::Overt),
            other => Err(Error::invalid(format!("unknown stealth level `{other}`"))),
        }
    }
}

/// Per-station defender cap at the station level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationCapRule {
    /// `(p_t - p_o) / 2`.
    #[default]
    DroppedSum,
    /// `G (p_t - p_o) / 2`, summing the generator-independent term over all
    /// generators.
    Literal,
}

impl FromStr for StationCapRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropped-sum" => Ok(StationCapRule::DroppedSum),
            "literal" => Ok(StationCapRule::Literal),
            other => Err(Error::invalid(format!("unknown cap rule `{other}`"))),
        }
    }
}

/// Unit whose detection probability is queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Generator(usize),
    Line { generator: usize, bs: usize },
    Station(usize),
}

/// Everything the game needs: station scores and the supply network.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub z: Vec<f64>,
    pub assignment: PowerAssignment,
    /// Scales reported flow deviations; payoffs ignore it.
    pub delta: f64,
    pub cap_rule: StationCapRule,
}

impl GameInstance {
    pub fn new(z: Vec<f64>, assignment: PowerAssignment) -> Result<Self> {
        if z.len() != assignment.num_base_stations() {
            return Err(Error::invalid(format!(
                "{} scores for {} stations",
                z.len(),
                assignment.num_base_stations()
            )));
        }
        if z.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("station scores must be finite and nonnegative"));
        }
        Ok(GameInstance { z, assignment, delta: 1.0, cap_rule: StationCapRule::default() })
    }

    pub fn from_impact(impact: &ImpactModel, assignment: &PowerAssignment) -> Result<Self> {
        let mut inst = GameInstance::new(impact.z_scores().to_vec(), assignment.clone())?;
        inst.delta = impact.delta;
        Ok(inst)
    }

    pub fn with_cap_rule(mut self, rule: StationCapRule) -> Self {
        self.cap_rule = rule;
        self
    }

    pub fn num_base_stations(&self) -> usize {
        self.z.len()
    }

    pub fn num_lines(&self) -> usize {
        self.assignment.lines().len()
    }
}

/// Power removed on every line, aligned with [`PowerAssignment::lines`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackStrategy {
    pub p_a: Vec<f64>,
}

impl AttackStrategy {
    pub fn zeros(inst: &GameInstance) -> Self {
        AttackStrategy { p_a: vec![0.0; inst.num_lines()] }
    }

    /// `sum_g p_gb` per station.
    pub fn per_station(&self, inst: &GameInstance) -> Vec<f64> {
        let mut agg = vec![0.0; inst.num_base_stations()];
        for (l, v) in inst.assignment.lines().iter().zip(&self.p_a) {
            agg[l.bs] += v;
        }
        agg
    }

    /// `sum_b p_gb` per generator.
    pub fn per_generator(&self, inst: &GameInstance) -> Vec<f64> {
        (0..inst.assignment.num_generators())
            .map(|g| inst.assignment.generator_lines(g).map(|k| self.p_a[k]).sum())
            .collect()
    }

    /// Dense `B x G` matrix.
    pub fn to_matrix(&self, inst: &GameInstance) -> DMatrix<f64> {
        let a = &inst.assignment;
        let mut m = DMatrix::zeros(a.num_base_stations(), a.num_generators());
        for (l, v) in a.lines().iter().zip(&self.p_a) {
            m[(l.bs, l.generator)] = *v;
        }
        m
    }

    /// Reads a dense `B x G` matrix; entries off the lines must be zero.
    pub fn from_matrix(inst: &GameInstance, m: &DMatrix<f64>) -> Result<Self> {
        let a = &inst.assignment;
        if m.shape() != (a.num_base_stations(), a.num_generators()) {
            return Err(Error::invalid("attack matrix has the wrong shape"));
        }
        let p_a: Vec<f64> = a.lines().iter().map(|l| m[(l.bs, l.generator)]).collect();
        let nonzero = |it: &mut dyn Iterator<Item = &f64>| it.filter(|v| **v != 0.0).count();
        if nonzero(&mut m.iter()) != nonzero(&mut p_a.iter()) {
            return Err(Error::Infeasible("attack on a pair without a power line".into()));
        }
        Ok(AttackStrategy { p_a })
    }

    /// Keeps only generator `g`'s lines.
    pub fn restricted_to(&self, inst: &GameInstance, g: usize) -> Self {
        let keep = inst.assignment.generator_lines(g);
        AttackStrategy {
            p_a: self.p_a.iter().enumerate().map(|(k, v)| if keep.contains(&k) { *v } else { 0.0 }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseStrategy {
    pub p_d: Vec<f64>,
    pub budget: f64,
}

impl DefenseStrategy {
    pub fn total(&self) -> f64 {
        self.p_d.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub level: StealthLevel,
    pub defender_payoff: f64,
    pub attacker_payoff: f64,
    /// Attacker objective with an unweighted defender term, as in the source
    /// level's optimization program; equals `attacker_payoff` elsewhere.
    pub attacker_objective: f64,
    /// Detection probability per generator, line, or station (empty if overt).
    pub detection: Vec<f64>,
    /// Flow deviation left after backup power, capped at blackout, times delta.
    pub its_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub defense: DefenseStrategy,
    pub attack: AttackStrategy,
    pub outcome: GameOutcome,
}

fn check_attack(inst: &GameInstance, p_a: &AttackStrategy) -> Result<()> {
    if p_a.p_a.len() != inst.num_lines() {
        return Err(Error::invalid(format!("attack has {} entries for {} lines", p_a.p_a.len(), inst.num_lines())));
    }
    if let Some(k) = p_a.p_a.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Infeasible(format!("line {k} has deviation {}", p_a.p_a[k])));
    }
    Ok(())
}

fn check_defense(inst: &GameInstance, p_d: &[f64]) -> Result<()> {
    if p_d.len() != inst.num_base_stations() {
        return Err(Error::invalid(format!("defense has {} entries for {} stations", p_d.len(), inst.num_base_stations())));
    }
    Ok(())
}

fn ratio(num: f64, den: f64, what: impl FnOnce() -> String) -> Result<f64> {
    let r = if num == 0.0 { 0.0 } else { num / den };
    if r > 1.0 + FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!("{} exceeds its stealth limit (ratio {r})", what())));
    }
    Ok(r)
}

fn source_ratios(inst: &GameInstance, p_a: &AttackStrategy) -> Result<Vec<f64>> {
    let a = &inst.assignment;
    p_a.per_generator(inst)
        .into_iter()
        .enumerate()
        .map(|(g, total)| ratio(total, a.safe_output(g), || format!("generator {g}")))
        .collect()
}

fn line_ratios(inst: &GameInstance, p_a: &AttackStrategy) -> Result<Vec<f64>> {
    let a = &inst.assignment;
    a.lines()
        .iter()
        .enumerate()
        .map(|(k, l)| ratio(p_a.p_a[k], a.capacity(k), || format!("line ({}, {})", l.generator, l.bs)))
        .collect()
}

fn station_ratios(inst: &GameInstance, p_a: &AttackStrategy) -> Result<Vec<f64>> {
    let a = &inst.assignment;
    p_a.per_station(inst)
        .into_iter()
        .enumerate()
        .map(|(b, total)| ratio(total, a.headroom(b), || format!("station {b}")))
        .collect()
}

/// Raises [`Error::Infeasible`] if `p_a` breaks the level's stealth limits.
/// Overt attacks are limited by the line capacities.
pub fn check_feasible(level: StealthLevel, inst: &GameInstance, p_a: &AttackStrategy) -> Result<()> {
    check_attack(inst, p_a)?;
    match level {
        StealthLevel::PowerSource => source_ratios(inst, p_a).map(drop),
        StealthLevel::PowerLine | StealthLevel::Overt => line_ratios(inst, p_a).map(drop),
        StealthLevel::BaseStation => station_ratios(inst, p_a).map(drop),
    }
}

/// Detection probability of one unit under `level`.
pub fn detection_prob(level: StealthLevel, inst: &GameInstance, p_a: &AttackStrategy, unit: Unit) -> Result<f64> {
    check_attack(inst, p_a)?;
    let a = &inst.assignment;
    match (level, unit) {
        (StealthLevel::Overt, _) => Ok(0.0),
        (StealthLevel::PowerSource, Unit::Generator(g)) if g < a.num_generators() => {
            let total: f64 = a.generator_lines(g).map(|k| p_a.p_a[k]).sum();
            ratio(total, a.safe_output(g), || format!("generator {g}"))
        }
        (StealthLevel::PowerLine, Unit::Line { generator, bs }) => {
            let k = a.line_index(generator, bs).ok_or(Error::NoLine { generator, bs })?;
            ratio(p_a.p_a[k], a.capacity(k), || format!("line ({generator}, {bs})"))
        }
        (StealthLevel::BaseStation, Unit::Station(b)) if b < a.num_base_stations() => {
            let total: f64 = a.station_lines(b).iter().map(|&k| p_a.p_a[k]).sum();
            ratio(total, a.headroom(b), || format!("station {b}"))
        }
        (level, unit) => Err(Error::invalid(format!("{unit:?} is not a valid unit at the {level} level"))),
    }
}

/// Detection probabilities of every unit the level watches.
pub fn detection_probabilities(level: StealthLevel, inst: &GameInstance, p_a: &AttackStrategy) -> Result<Vec<f64>> {
    check_attack(inst, p_a)?;
    match level {
        StealthLevel::PowerSource => source_ratios(inst, p_a),
        StealthLevel::PowerLine => line_ratios(inst, p_a),
        StealthLevel::BaseStation => station_ratios(inst, p_a),
        StealthLevel::Overt => Ok(Vec::new()),
    }
}

/// `-sum_b z_b (sum_g p_gb - p_b^d)`.
pub fn defender_payoff(z: &[f64], p_d: &[f64], attack_per_station: &[f64]) -> f64 {
    -z.iter().zip(attack_per_station).zip(p_d).map(|((z, a), d)| z * (a - d)).sum::<f64>()
}

/// Attacker payoff at `level` as defined for that level, with the defender
/// term weighted by station scores.
pub fn attacker_payoff(level: StealthLevel, inst: &GameInstance, p_d: &[f64], p_a: &AttackStrategy) -> Result<f64> {
    check_defense(inst, p_d)?;
    let weighted: f64 = inst.z.iter().zip(p_d).map(|(z, d)| z * d).sum();
    Ok(attacker_gain(level, inst, p_d, p_a)? - weighted)
}

/// Source-level attacker objective with `sum_b p_b^d` in place of
/// `sum_b z_b p_b^d`. Other levels return [`attacker_payoff`].
pub fn attacker_objective(level: StealthLevel, inst: &GameInstance, p_d: &[f64], p_a: &AttackStrategy) -> Result<f64> {
    check_defense(inst, p_d)?;
    match level {
        StealthLevel::PowerSource => Ok(attacker_gain(level, inst, p_d, p_a)? - p_d.iter().sum::<f64>()),
        _ => attacker_payoff(level, inst, p_d, p_a),
    }
}

/// Payoff without the separate defender term. For the station level the
/// defense is part of the discounted product, so it enters here.
fn attacker_gain(level: StealthLevel, inst: &GameInstance, p_d: &[f64], p_a: &AttackStrategy) -> Result<f64> {
    check_attack(inst, p_a)?;
    let a = &inst.assignment;
    let z = &inst.z;
    match level {
        StealthLevel::Overt => {
            Ok(a.lines().iter().zip(&p_a.p_a).map(|(l, v)| z[l.bs] * v).sum())
        }
        StealthLevel::PowerSource => {
            let pi = source_ratios(inst, p_a)?;
            Ok((0..a.num_generators())
                .map(|g| {
                    let hit: f64 = a.generator_lines(g).map(|k| z[a.lines()[k].bs] * p_a.p_a[k]).sum();
                    hit * (1.0 - pi[g])
                })
                .sum())
        }
        StealthLevel::PowerLine => {
            let pi = line_ratios(inst, p_a)?;
            Ok(a.lines().iter().enumerate().map(|(k, l)| z[l.bs] * p_a.p_a[k] * (1.0 - pi[k])).sum())
        }
        StealthLevel::BaseStation => {
            let pi = station_ratios(inst, p_a)?;
            let agg = p_a.per_station(inst);
            // the weighted defender term is added back by the caller
            Ok((0..z.len()).map(|b| z[b] * ((agg[b] - p_d[b]) * (1.0 - pi[b]) + p_d[b])).sum())
        }
    }
}

/// Attacker's best response to `p_d` at `level`.
///
/// Source level: each generator spreads half its safe output evenly over its
/// lines. Line level: half of every line. Station level: per-station total
/// `min((p_d + p_t - p_o) / 2, p_t - p_o)` split in proportion to the supply
/// shares. Overt: every line fully.
pub fn attacker_best_response(level: StealthLevel, inst: &GameInstance, p_d: &[f64]) -> Result<AttackStrategy> {
    check_defense(inst, p_d)?;
    let a = &inst.assignment;
    let p_a = match level {
        StealthLevel::PowerSource => {
            let mut v = vec![0.0; inst.num_lines()];
            for g in 0..a.num_generators() {
                let span = a.generator_lines(g);
                let each = a.safe_output(g) / (2.0 * span.len() as f64);
                v[span].fill(each);
            }
            v
        }
        StealthLevel::PowerLine => (0..inst.num_lines()).map(|k| 0.5 * a.capacity(k)).collect(),
        StealthLevel::BaseStation => a
            .lines()
            .iter()
            .map(|l| {
                let h = a.headroom(l.bs);
                l.share * (0.5 * (p_d[l.bs] + h)).clamp(0.0, h)
            })
            .collect(),
        StealthLevel::Overt => (0..inst.num_lines()).map(|k| a.capacity(k)).collect(),
    };
    Ok(AttackStrategy { p_a })
}

/// Upper bound on useful backup power per station at `level`.
pub fn defender_caps(level: StealthLevel, inst: &GameInstance) -> Vec<f64> {
    let a = &inst.assignment;
    let b = inst.num_base_stations();
    match level {
        StealthLevel::PowerSource => {
            let zero = vec![0.0; b];
            attacker_best_response(level, inst, &zero).expect("sizes match").per_station(inst)
        }
        StealthLevel::PowerLine => (0..b).map(|s| 0.5 * a.p_t(s)).collect(),
        StealthLevel::BaseStation => {
            let mult = match inst.cap_rule {
                StationCapRule::DroppedSum => 1.0,
                StationCapRule::Literal => a.num_generators() as f64,
            };
            (0..b).map(|s| mult * 0.5 * a.headroom(s)).collect()
        }
        StealthLevel::Overt => (0..b).map(|s| a.p_t(s)).collect(),
    }
}

/// Maximizes `sum_b z_b p_b^d` subject to the budget and `0 <= p_b^d <= cap_b`
/// by filling stations in order of decreasing score.
pub fn solve_defender_lp(z: &[f64], caps: &[f64], budget: f64) -> Result<DefenseStrategy> {
    if z.len() != caps.len() {
        return Err(Error::invalid("scores and caps differ in length"));
    }
    if caps.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::invalid("caps must be nonnegative"));
    }
    if !(budget >= 0.0) {
        return Err(Error::invalid(format!("budget must be nonnegative, got {budget}")));
    }
    let mut order: Vec<usize> = (0..z.len()).filter(|&b| z[b] > 0.0).collect();
    order.sort_by(|&x, &y| z[y].total_cmp(&z[x]).then(x.cmp(&y)));
    let mut p_d = vec![0.0; z.len()];
    let mut left = budget;
    for b in order {
        if left <= 0.0 {
            break;
        }
        let take = caps[b].min(left);
        p_d[b] = take;
        left -= take;
    }
    Ok(DefenseStrategy { p_d, budget })
}

/// Equal split of the budget over `num_bs` stations.
pub fn equal_allocation(num_bs: usize, budget: f64) -> Result<DefenseStrategy> {
    if num_bs == 0 {
        return Err(Error::invalid("equal allocation needs at least one station"));
    }
    Ok(DefenseStrategy { p_d: vec![budget / num_bs as f64; num_bs], budget })
}

/// Payoffs, detection ratios and residual deviation of a strategy pair.
pub fn evaluate(level: StealthLevel, inst: &GameInstance, p_d: &[f64], p_a: &AttackStrategy) -> Result<GameOutcome> {
    check_defense(inst, p_d)?;
    check_feasible(level, inst, p_a)?;
    let agg = p_a.per_station(inst);
    let defender = defender_payoff(&inst.z, p_d, &agg);
    let attacker = match level {
        StealthLevel::Overt => -defender,
        _ => attacker_payoff(level, inst, p_d, p_a)?,
    };
    Ok(GameOutcome {
        level,
        defender_payoff: defender,
        attacker_payoff: attacker,
        attacker_objective: attacker_objective(level, inst, p_d, p_a)?,
        detection: detection_probabilities(level, inst, p_a)?,
        its_deviation: residual_deviation(inst, p_d, &agg),
    })
}

/// `delta * sum_b z_b clamp(attack_b - p_b^d, 0, p_t - p_o)`.
pub fn residual_deviation(inst: &GameInstance, p_d: &[f64], attack_per_station: &[f64]) -> f64 {
    let a = &inst.assignment;
    inst.delta
        * (0..inst.num_base_stations())
            .map(|b| inst.z[b] * (attack_per_station[b] - p_d[b]).clamp(0.0, a.headroom(b)))
            .sum::<f64>()
}

/// Defender LP first, then the attacker's response to its solution.
pub fn stackelberg_equilibrium(level: StealthLevel, inst: &GameInstance, budget: f64) -> Result<Equilibrium> {
    let defense = solve_defender_lp(&inst.z, &defender_caps(level, inst), budget)?;
    let attack = attacker_best_response(level, inst, &defense.p_d)?;
    let outcome = evaluate(level, inst, &defense.p_d, &attack)?;
    Ok(Equilibrium { defense, attack, outcome })
}

/// Best response limited to a single generator: the column of the full best
/// response that gives the attacker the highest payoff, ties to the lower id.
pub fn single_source_response(level: StealthLevel, inst: &GameInstance, p_d: &[f64]) -> Result<(usize, AttackStrategy)> {
    let full = attacker_best_response(level, inst, p_d)?;
    let mut best: Option<(usize, f64, AttackStrategy)> = None;
    for g in 0..inst.assignment.num_generators() {
        let column = full.restricted_to(inst, g);
        let u = attacker_payoff(level, inst, p_d, &column)?;
        if best.as_ref().is_none_or(|(_, bu, _)| u > *bu) {
            best = Some((g, u, column));
        }
    }
    let (g, _, attack) = best.ok_or_else(|| Error::invalid("instance has no generators"))?;
    Ok((g, attack))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAttack {
    pub generator: usize,
    pub bs: usize,
    pub watts: f64,
}

/// Serializable summary of one solved game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub level: StealthLevel,
    pub cap_rule: StationCapRule,
    pub budget: f64,
    pub outcome: GameOutcome,
    pub p_d: Vec<f64>,
    pub p_a: Vec<LineAttack>,
}

impl SolveReport {
    pub fn new(inst: &GameInstance, eq: &Equilibrium) -> Self {
        SolveReport {
            level: eq.outcome.level,
            cap_rule: inst.cap_rule,
            budget: eq.defense.budget,
            outcome: eq.outcome.clone(),
            p_d: eq.defense.p_d.clone(),
            p_a: inst
                .assignment
                .lines()
                .iter()
                .zip(&eq.attack.p_a)
                .map(|(l, w)| LineAttack { generator: l.generator, bs: l.bs, watts: *w })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("cannot serialize report: {e}")))
    }
}
