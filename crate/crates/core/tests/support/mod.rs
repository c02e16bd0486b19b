//! Independent oracles and instance builders shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use itsguard::coverage::{BaseStation, Hexagon};
use itsguard::game::GameInstance;
use itsguard::geom::{Point, Segment};
use itsguard::grid::{build_assignment, Generator};
use itsguard::scenario::{generate, Scenario, ScenarioConfig};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn scenario(grid_n: usize, cell_radius: f64, num_generators: usize, seed: u64) -> Scenario {
    let cfg = ScenarioConfig { grid_n, cell_radius, num_generators, seed, ..ScenarioConfig::default() };
    generate(&cfg).expect("scenario generates")
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Random game with `g` generators and `b` stations. Every generator feeds a
/// random nonempty station set and every station is fed; stations get
/// random power levels and scores.
pub fn random_instance<R: Rng>(rng: &mut R, g: usize, b: usize) -> GameInstance {
    let stations: Vec<BaseStation> = (0..b)
        .map(|id| {
            let p_o = rng.random_range(50.0..150.0);
            let p_t = p_o * rng.random_range(1.2..3.0);
            BaseStation::new(id, Point::new(id as f64, 0.0), 1.0, p_o, p_t).unwrap()
        })
        .collect();
    let mut sets: Vec<Vec<usize>> = (0..g)
        .map(|_| (0..b).filter(|_| rng.random_bool(0.5)).collect::<Vec<_>>())
        .collect();
    for set in sets.iter_mut() {
        if set.is_empty() {
            set.push(rng.random_range(0..b));
        }
    }
    for s in 0..b {
        if !sets.iter().any(|set| set.contains(&s)) {
            let owner = rng.random_range(0..g);
            sets[owner].push(s);
        }
    }
    let generators: Vec<Generator> = sets
        .into_iter()
        .enumerate()
        .map(|(id, mut bs)| {
            bs.sort_unstable();
            bs.dedup();
            Generator { id, position: Point::new(0.0, 1.0 + id as f64), connected_bs: bs }
        })
        .collect();
    let shares: Vec<(usize, usize, f64)> = generators
        .iter()
        .flat_map(|gen| gen.connected_bs.iter().map(move |&s| (gen.id, s, 0.0)))
        .map(|(gi, s, _)| (gi, s, rng.random_range(0.1..1.0)))
        .collect();
    let assignment = build_assignment(&generators, &stations, &shares).unwrap();
    let z = (0..b).map(|_| rng.random_range(0.05..5.0)).collect();
    GameInstance::new(z, assignment).unwrap()
}

/// Maximizes `c.x` subject to `rows.x <= rhs`, `x >= 0`, with `rhs >= 0` so
/// the origin is a feasible start. Dense tableau, Bland's rule.
pub fn simplex_max(c: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> f64 {
    let (m, n) = (rows.len(), c.len());
    assert!(rhs.iter().all(|v| *v >= 0.0));
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = vec![0.0; width];
            r[..n].copy_from_slice(&rows[i]);
            r[n + i] = 1.0;
            r[width - 1] = rhs[i];
            r
        })
        .collect();
    let mut obj = vec![0.0; width];
    for j in 0..n {
        obj[j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let eps = 1e-12;
    loop {
        let Some(enter) = (0..width - 1).find(|&j| obj[j] < -eps) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][enter] > eps {
                let ratio = t[i][width - 1] / t[i][enter];
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r - eps || (ratio <= r + eps && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (p, _) = leave.expect("bounded problem");
        let piv = t[p][enter];
        for v in t[p].iter_mut() {
            *v /= piv;
        }
        let pivot_row = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != p && row[enter] != 0.0 {
                let f = row[enter];
                for (v, w) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * w;
                }
            }
        }
        let f = obj[enter];
        for (v, w) in obj.iter_mut().zip(&pivot_row) {
            *v -= f * w;
        }
        basis[p] = enter;
    }
    obj[width - 1]
}

/// Covered length by clipping the segment against each edge's half-plane in
/// turn, working on the segment's end points rather than a parameter range.
pub fn clip_by_half_planes(seg: &Segment, hex: &Hexagon) -> f64 {
    let v = hex.vertices();
    let (mut a, mut b) = (seg.a, seg.b);
    for k in 0..6 {
        let (p, q) = (v[k], v[(k + 1) % 6]);
        let edge = q - p;
        // counter-clockwise vertices keep the interior on the left
        let side = |x: Point| edge.x * (x.y - p.y) - edge.y * (x.x - p.x);
        let (sa, sb) = (side(a), side(b));
        if sa < 0.0 && sb < 0.0 {
            return 0.0;
        }
        if sa < 0.0 {
            a = a + (b - a) * (sa / (sa - sb));
        } else if sb < 0.0 {
            b = b + (a - b) * (sb / (sb - sa));
        }
    }
    a.distance(b)
}

pub fn parse_xml(text: &str) -> Result<(), String> {
    roxmltree::Document::parse(text).map(|_| ()).map_err(|e| e.to_string())
}

/// Least-squares slope and intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Total flow change when station `bs` loses `watts`, built street by street
/// from pairs of full flow solves: each covered street is re-anchored at its
/// reference flow and at that flow minus its own share of the lost coverage.
pub fn finite_difference_deviation(s: &Scenario, bs: usize, watts: f64) -> f64 {
    use itsguard::its::solve_flows;
    let reference = s.flows().unwrap();
    let headroom = s.base_stations[bs].p_t - s.base_stations[bs].p_o;
    let mut total = vec![0.0; s.network.len()];
    for i in 0..s.network.len() {
        let c = s.coverage.fraction(i, bs);
        if c == 0.0 {
            continue;
        }
        let drop = s.impact.delta * c * watts / headroom;
        let q_i = reference[i];
        let before = solve_flows(&s.network, i, q_i).unwrap().flows;
        let after = solve_flows(&s.network, i, q_i - drop).unwrap().flows;
        for (t, (a, b)) in total.iter_mut().zip(after.iter().zip(&before)) {
            *t += a - b;
        }
    }
    total.iter().map(|v| v.abs()).sum()
}

/// Lattice search for the attacker's best payoff against `p_d`.
///
/// The payoff is a sum of independent terms (one per line at the line and
/// overt levels, one per generator at the source level, one per station at
/// the station level), so each block is searched on its own full lattice
/// with `points + 1` values per free dimension and the block optima are
/// combined. Source-level blocks move along the equal split of a
/// generator's lines, the split the closed form is derived for. Returns the
/// payoff at the combined point and the point itself.
pub fn lattice_best(
    level: itsguard::game::StealthLevel,
    inst: &GameInstance,
    p_d: &[f64],
    points: usize,
) -> (f64, itsguard::game::AttackStrategy) {
    use itsguard::game::{attacker_payoff, AttackStrategy, StealthLevel};
    let a = &inst.assignment;
    let zero = AttackStrategy::zeros(inst);
    let base = attacker_payoff(level, inst, p_d, &zero).unwrap();
    let mut best = zero.clone();
    let mut gains = 0.0;
    let grid = |hi: f64| (0..=points).map(move |k| hi * k as f64 / points as f64);

    // each block: line indices and the candidate values for them
    let blocks: Vec<(Vec<usize>, Vec<Vec<f64>>)> = match level {
        StealthLevel::PowerLine | StealthLevel::Overt => {
            (0..inst.num_lines()).map(|k| (vec![k], grid(a.capacity(k)).map(|v| vec![v]).collect())).collect()
        }
        StealthLevel::PowerSource => (0..a.num_generators())
            .map(|g| {
                let lines: Vec<usize> = a.generator_lines(g).collect();
                let each = a.safe_output(g) / lines.len() as f64;
                let cands = grid(each).map(|v| vec![v; lines.len()]).collect();
                (lines, cands)
            })
            .collect(),
        StealthLevel::BaseStation => (0..a.num_base_stations())
            .map(|b| {
                let lines = a.station_lines(b).to_vec();
                let h = a.headroom(b);
                let mut cands = vec![Vec::new()];
                for _ in &lines {
                    cands = cands
                        .into_iter()
                        .flat_map(|prefix: Vec<f64>| {
                            grid(h).map(move |v| {
                                let mut p = prefix.clone();
                                p.push(v);
                                p
                            })
                        })
                        .filter(|p| p.iter().sum::<f64>() <= h * (1.0 + 1e-12))
                        .collect();
                }
                (lines, cands)
            })
            .collect(),
    };

    let mut trial = zero.clone();
    for (lines, cands) in blocks {
        let mut top = (0.0, vec![0.0; lines.len()]);
        for c in cands {
            for (k, v) in lines.iter().zip(&c) {
                trial.p_a[*k] = *v;
            }
            let gain = attacker_payoff(level, inst, p_d, &trial).unwrap() - base;
            if gain > top.0 {
                top = (gain, c);
            }
        }
        for k in &lines {
            trial.p_a[*k] = 0.0;
        }
        for (k, v) in lines.iter().zip(&top.1) {
            best.p_a[*k] = *v;
        }
        gains += top.0;
    }
    let combined = attacker_payoff(level, inst, p_d, &best).unwrap();
    let scale = combined.abs().max(gains.abs()).max(1.0);
    assert!((combined - (base + gains)).abs() <= 1e-9 * scale, "payoff is not separable over the blocks");
    (combined, best)
}

/// Best source-level payoff over every split of each generator's output,
/// searched on a full lattice over the generator's lines. Used only to
/// report how much an uneven split could add.
pub fn source_unrestricted_best(inst: &GameInstance, p_d: &[f64], points: usize) -> f64 {
    let a = &inst.assignment;
    let defended: f64 = inst.z.iter().zip(p_d).map(|(z, d)| z * d).sum();
    let mut total = -defended;
    for g in 0..a.num_generators() {
        let lines: Vec<usize> = a.generator_lines(g).collect();
        let s = a.safe_output(g);
        let weights: Vec<f64> = lines.iter().map(|&k| inst.z[a.lines()[k].bs]).collect();
        let step = s / points as f64;
        let mut best = 0.0_f64;
        let mut idx = vec![0usize; lines.len()];
        loop {
            let used: usize = idx.iter().sum();
            if used <= points {
                let hit: f64 = idx.iter().zip(&weights).map(|(i, w)| w * *i as f64 * step).sum();
                best = best.max(hit * (1.0 - used as f64 / points as f64));
            }
            let mut d = 0;
            while d < idx.len() {
                idx[d] += 1;
                if idx[d] <= points {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == idx.len() {
                break;
            }
        }
        total += best;
    }
    total
}
