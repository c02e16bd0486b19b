//! Seeded generation of complete instances and their TOML file format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::coverage::{build_coverage, hex_tiling, BaseStation, CoverageMap};
use crate::error::{Error, Result};
use crate::game::GameInstance;
use crate::geom::{Bounds, Point, Segment};
use crate::grid::{build_assignment, connect_nearest, inverse_distance_shares, Generator, PowerAssignment};
use crate::impact::ImpactModel;
use crate::its::{build_flow_matrix, solve_flows, FlowNetwork, Intersection, Street, TurningRatio};

pub const FORMAT_NAME: &str = "itsguard-scenario";
pub const FORMAT_VERSION: u32 = 1;

/// Extra attempts with a fresh sub-seed when the sampled network is rejected.
pub const MAX_RETRIES: u32 = 10;

/// Independent random streams, one per generated component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Ratios = 1,
    Placement = 2,
    Connections = 3,
}

/// Generator for one component. The key mixes the seed and the attempt
/// number; the stream id selects the component.
pub fn component_rng(seed: u64, attempt: u32, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&attempt.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Intersections per axis.
    pub grid_n: usize,
    /// km.
    pub street_length: f64,
    /// Hexagon circumradius, km.
    pub cell_radius: f64,
    pub num_generators: usize,
    /// Station activation power, W.
    pub p_o: f64,
    /// `p_t / p_o`.
    pub power_ratio: f64,
    /// Defender budget, W.
    pub budget: f64,
    pub seed: u64,
    /// Inclusive range of stations each generator feeds; the upper end is
    /// capped at the number of stations.
    pub bs_per_generator_range: [usize; 2],
    /// Flow on street 0, veh/h/lane.
    pub anchor_flow: f64,
    /// Flow change per km of fully lost coverage, veh/h/lane.
    pub delta: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            grid_n: 6,
            street_length: 1.0,
            cell_radius: 1.0,
            num_generators: 5,
            p_o: 100.0,
            power_ratio: 2.0,
            budget: 200.0,
            seed: 0,
            bs_per_generator_range: [1, 64],
            anchor_flow: 1000.0,
            delta: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.grid_n < 2 {
            return bad(format!("grid_n must be at least 2, got {}", self.grid_n));
        }
        if !(self.street_length > 0.0) {
            return bad(format!("street_length must be positive, got {}", self.street_length));
        }
        if !(self.cell_radius > 0.0) {
            return bad(format!("cell_radius must be positive, got {}", self.cell_radius));
        }
        if self.num_generators == 0 {
            return bad("num_generators must be at least 1".into());
        }
        if !(self.p_o > 0.0) || !self.p_o.is_finite() {
            return bad(format!("p_o must be positive, got {}", self.p_o));
        }
        if !(self.power_ratio > 1.0) || !self.power_ratio.is_finite() {
            return bad(format!("power_ratio must exceed 1, got {}", self.power_ratio));
        }
        if !(self.budget >= 0.0) {
            return bad(format!("budget must be nonnegative, got {}", self.budget));
        }
        let [lo, hi] = self.bs_per_generator_range;
        if lo == 0 || lo > hi {
            return bad(format!("bs_per_generator_range [{lo}, {hi}] is empty or starts at 0"));
        }
        if !(self.anchor_flow >= 0.0) {
            return bad(format!("anchor_flow must be nonnegative, got {}", self.anchor_flow));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        Ok(())
    }

    pub fn p_t(&self) -> f64 {
        self.p_o * self.power_ratio
    }

    /// Extent of the street grid.
    pub fn bounds(&self) -> Bounds {
        let side = (self.grid_n - 1) as f64 * self.street_length;
        Bounds::new(Point::new(0.0, 0.0), Point::new(side, side))
    }

    /// Resolved settings as `key = value` lines.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Square grid of two-way streets.
///
/// Intersection `(r, c)` has id `r * n + c`. Each road yields two directed
/// streets with consecutive ids, the first pointing right or up.
pub fn grid_layout(grid_n: usize, street_length: f64) -> (Vec<Street>, Vec<Intersection>) {
    let node = |r: usize, c: usize| r * grid_n + c;
    let pos = |id: usize| Point::new((id % grid_n) as f64 * street_length, (id / grid_n) as f64 * street_length);
    let mut roads = Vec::new();
    for r in 0..grid_n {
        for c in 0..grid_n {
            if c + 1 < grid_n {
                roads.push((node(r, c), node(r, c + 1)));
            }
            if r + 1 < grid_n {
                roads.push((node(r, c), node(r + 1, c)));
            }
        }
    }
    let mut intersections: Vec<Intersection> = (0..grid_n * grid_n)
        .map(|id| Intersection { id, position: pos(id), inbound: Vec::new(), outbound: Vec::new() })
        .collect();
    let mut streets = Vec::with_capacity(2 * roads.len());
    for (u, v) in roads {
        for (a, b) in [(u, v), (v, u)] {
            let id = streets.len();
            streets.push(Street::new(id, a, b, Segment::new(pos(a), pos(b))));
            intersections[a].outbound.push(id);
            intersections[b].inbound.push(id);
        }
    }
    (streets, intersections)
}

/// Turning shares drawn from a flat Dirichlet over each street's exits.
///
/// U-turns are excluded except at intersections with only two roads, where
/// turning back is the only alternative to a single forced exit.
pub fn sample_turning_ratios<R: Rng>(
    streets: &[Street],
    intersections: &[Intersection],
    rng: &mut R,
) -> Vec<TurningRatio> {
    let mut ratios = Vec::new();
    for s in streets {
        let node = &intersections[s.to];
        let allow_back = node.outbound.len() <= 2;
        let exits: Vec<usize> = node
            .outbound
            .iter()
            .copied()
            .filter(|&k| allow_back || streets[k].to != s.from)
            .collect();
        let draws: Vec<f64> = exits.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        for (k, d) in exits.iter().zip(draws) {
            ratios.push(TurningRatio { from_street: s.id, to_street: *k, ratio: d / total });
        }
    }
    ratios
}

/// Full instance: street network, cells, supply network and impact scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Attempt number whose sub-seed produced the turning ratios.
    pub attempt: u32,
    pub network: FlowNetwork,
    pub base_stations: Vec<BaseStation>,
    pub coverage: CoverageMap,
    pub generators: Vec<Generator>,
    pub assignment: PowerAssignment,
    pub impact: ImpactModel,
}

/// Builds a scenario from `config`, retrying the turning ratios with the next
/// sub-seed when the network fails the rank or conditioning checks.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let (streets, intersections) = grid_layout(config.grid_n, config.street_length);

    let mut attempt = 0;
    let network = loop {
        let mut rng = component_rng(config.seed, attempt, Stream::Ratios);
        let ratios = sample_turning_ratios(&streets, &intersections, &mut rng);
        let built = build_flow_matrix(streets.clone(), intersections.clone(), ratios)
            .and_then(|net| solve_flows(&net, 0, 1.0).map(|_| net));
        match built {
            Ok(net) => break net,
            Err(Error::Rank { .. } | Error::Singular { .. }) if attempt < MAX_RETRIES => attempt += 1,
            Err(e) => return Err(e),
        }
    };

    let bounds = config.bounds();
    let base_stations: Vec<BaseStation> = hex_tiling(&bounds, config.cell_radius)?
        .into_iter()
        .enumerate()
        .map(|(id, c)| BaseStation::new(id, c, config.cell_radius, config.p_o, config.p_t()))
        .collect::<Result<_>>()?;
    let coverage = build_coverage(network.streets(), &base_stations)?;

    let mut place = component_rng(config.seed, 0, Stream::Placement);
    let positions: Vec<Point> = (0..config.num_generators)
        .map(|_| {
            let x = bounds.min.x + place.random::<f64>() * bounds.width();
            let y = bounds.min.y + place.random::<f64>() * bounds.height();
            Point::new(x, y)
        })
        .collect();
    let mut connect = component_rng(config.seed, 0, Stream::Connections);
    let [lo, hi] = config.bs_per_generator_range;
    let hi = hi.min(base_stations.len());
    let lo = lo.min(hi);
    let counts: Vec<usize> = (0..config.num_generators).map(|_| connect.random_range(lo..=hi)).collect();
    let generators = connect_nearest(&positions, &base_stations, &counts)?;
    let assignment = build_assignment(&generators, &base_stations, &inverse_distance_shares(&generators, &base_stations))?;

    let impact = ImpactModel::build(&network, &coverage, &base_stations, config.delta)?;
    Ok(Scenario { config: config.clone(), attempt, network, base_stations, coverage, generators, assignment, impact })
}

impl Scenario {
    pub fn game_instance(&self) -> GameInstance {
        GameInstance::from_impact(&self.impact, &self.assignment).expect("scenario parts agree")
    }

    /// Checks the invariants of every component and their cross references.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let n = self.network.len();
        if self.network.conservation_rank() != n - 1 {
            return Err(Error::Rank { expected: n - 1, found: self.network.conservation_rank() });
        }
        let flows = solve_flows(&self.network, 0, self.config.anchor_flow)?;
        let scale = flows.flows.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if flows.residual(&self.network) > 1e-6 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("flow solution does not conserve flow"));
        }
        if self.coverage.num_streets() != n || self.coverage.num_base_stations() != self.base_stations.len() {
            return Err(Error::invalid("coverage does not match the network and stations"));
        }
        for i in 0..n {
            if self.coverage.row_sum(i) > 1.0 + 1e-9 {
                return Err(Error::invalid(format!("street {i} is covered more than once")));
            }
        }
        self.assignment.validate()?;
        if self.assignment.num_base_stations() != self.base_stations.len() {
            return Err(Error::invalid("supply network does not match the stations"));
        }
        let by_bs = self.coverage.by_base_station();
        for (b, z) in self.impact.z_scores().iter().enumerate() {
            if (*z == 0.0) != by_bs[b].is_empty() {
                return Err(Error::invalid(format!("station {b}: score {z} disagrees with its coverage")));
            }
        }
        Ok(())
    }

    /// Reference flows for the configured anchor.
    pub fn flows(&self) -> Result<Vec<f64>> {
        Ok(solve_flows(&self.network, 0, self.config.anchor_flow)?.flows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_toml(&text).map_err(|e| match e {
            Error::Format { path: field, message } => Error::Format {
                path: format!("{}:{}", path.display(), field),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        let file = ScenarioFile {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            attempt: self.attempt,
            config: self.config.clone(),
            its: ItsSection {
                intersections: self
                    .network
                    .intersections()
                    .iter()
                    .map(|i| IntersectionRecord { id: i.id, x: i.position.x, y: i.position.y })
                    .collect(),
                streets: self
                    .network
                    .streets()
                    .iter()
                    .map(|s| StreetRecord {
                        id: s.id,
                        from: s.from,
                        to: s.to,
                        geometry: [s.geometry.a.x, s.geometry.a.y, s.geometry.b.x, s.geometry.b.y],
                    })
                    .collect(),
                ratios: self.network.turning_ratios().iter().map(|r| (r.from_street, r.to_street, r.ratio)).collect(),
            },
            ci: CiSection {
                stations: self.base_stations.clone(),
                coverage: Some(self.coverage.entries()),
            },
            pg: PgSection {
                generators: self.generators.clone(),
                shares: self.assignment.lines().iter().map(|l| (l.generator, l.bs, l.share)).collect(),
            },
            impact: Some(ImpactSection { delta: self.impact.delta, z_scores: self.impact.z_scores().to_vec() }),
        };
        toml::to_string(&file).map_err(|e| Error::invalid(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| format_error(&e))?;
        if file.format != FORMAT_NAME {
            return Err(Error::Format { path: "format".into(), message: format!("expected `{FORMAT_NAME}`") });
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::Format {
                path: "version".into(),
                message: format!("unsupported version {}, expected {FORMAT_VERSION}", file.version),
            });
        }
        file.config.validate()?;
        let its = file.its;
        let mut intersections: Vec<Intersection> = its
            .intersections
            .iter()
            .map(|r| Intersection { id: r.id, position: Point::new(r.x, r.y), inbound: Vec::new(), outbound: Vec::new() })
            .collect();
        let mut streets = Vec::with_capacity(its.streets.len());
        for s in &its.streets {
            if s.from >= intersections.len() || s.to >= intersections.len() {
                return Err(Error::Format {
                    path: format!("its.streets[{}]", s.id),
                    message: "references a missing intersection".into(),
                });
            }
            let [ax, ay, bx, by] = s.geometry;
            streets.push(Street::new(s.id, s.from, s.to, Segment::new(Point::new(ax, ay), Point::new(bx, by))));
            intersections[s.from].outbound.push(s.id);
            intersections[s.to].inbound.push(s.id);
        }
        let ratios = its
            .ratios
            .iter()
            .map(|&(from_street, to_street, ratio)| TurningRatio { from_street, to_street, ratio })
            .collect();
        let network = build_flow_matrix(streets, intersections, ratios)?;

        let base_stations = file.ci.stations;
        for (b, bs) in base_stations.iter().enumerate() {
            if bs.id != b {
                return Err(Error::Format { path: format!("ci.stations[{b}]"), message: format!("has id {}", bs.id) });
            }
            bs.validate()?;
        }
        let coverage = match file.ci.coverage {
            Some(entries) => CoverageMap::from_covered_lengths(
                network.streets().iter().map(|s| s.length).collect(),
                base_stations.len(),
                &entries,
            )?,
            None => build_coverage(network.streets(), &base_stations)?,
        };
        let assignment = PowerAssignment::from_shares(&file.pg.generators, &base_stations, &file.pg.shares)?;
        let delta = file.impact.as_ref().map_or(file.config.delta, |i| i.delta);
        let impact = ImpactModel::build(&network, &coverage, &base_stations, delta)?;
        if let Some(stored) = &file.impact {
            if stored.z_scores.len() != impact.num_base_stations() {
                return Err(Error::Format { path: "impact.z_scores".into(), message: "wrong length".into() });
            }
            for (b, (s, z)) in stored.z_scores.iter().zip(impact.z_scores()).enumerate() {
                if (s - z).abs() > 1e-9 * z.abs().max(1e-300) {
                    return Err(Error::Format {
                        path: format!("impact.z_scores[{b}]"),
                        message: format!("stored {s} but the model gives {z}"),
                    });
                }
            }
        }
        let scenario = Scenario {
            config: file.config,
            attempt: file.attempt,
            network,
            base_stations,
            coverage,
            generators: file.pg.generators,
            assignment,
            impact,
        };
        Ok(scenario)
    }
}

fn format_error(e: &toml::de::Error) -> Error {
    let message = e.message().to_string();
    // missing top-level sections come back as "missing field `name`"
    let path = message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("missing field"))
        .map(str::to_string)
        .unwrap_or_else(|| match e.span() {
            Some(span) => format!("byte {}", span.start),
            None => "<document>".into(),
        });
    Error::Format { path, message }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format: String,
    version: u32,
    #[serde(default)]
    attempt: u32,
    config: ScenarioConfig,
    its: ItsSection,
    ci: CiSection,
    pg: PgSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    impact: Option<ImpactSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItsSection {
    intersections: Vec<IntersectionRecord>,
    streets: Vec<StreetRecord>,
    /// `(from_street, to_street, share)`.
    ratios: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntersectionRecord {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreetRecord {
    id: usize,
    from: usize,
    to: usize,
    /// `[ax, ay, bx, by]`.
    geometry: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CiSection {
    stations: Vec<BaseStation>,
    /// `(street, bs, covered_km)`; recomputed from geometry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coverage: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PgSection {
    generators: Vec<Generator>,
    /// `(generator, bs, t)`.
    shares: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpactSection {
    delta: f64,
    z_scores: Vec<f64>,
}
