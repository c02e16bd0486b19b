//! Generators feeding base stations: the supply-share matrix `T`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coverage::BaseStation;
use crate::error::{Error, Result};
use crate::geom::Point;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub position: Point,
    /// Base stations fed by this generator, ascending.
    pub connected_bs: Vec<usize>,
}

/// Power line from a generator to a base station with the fraction `t_b^g`
/// of the station's power it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub generator: usize,
    pub bs: usize,
    pub share: f64,
}

/// Row-stochastic supply shares together with each station's power levels.
///
/// Lines are stored sparsely, ordered by generator then station.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAssignment {
    generators: Vec<Generator>,
    lines: Vec<Line>,
    /// `gen_start[g]..gen_start[g + 1]` are generator `g`'s lines.
    gen_start: Vec<usize>,
    /// Line indices per station.
    bs_lines: Vec<Vec<usize>>,
    p_o: Vec<f64>,
    p_t: Vec<f64>,
}

/// Normalizes `shares` per station and records the generator sets.
///
/// `shares` lists `(generator, bs, weight)`; every pair must be a link of the
/// generator, and every link needs a positive weight.
pub fn build_assignment(
    generators: &[Generator],
    base_stations: &[BaseStation],
    shares: &[(usize, usize, f64)],
) -> Result<PowerAssignment> {
    assemble(generators, base_stations, shares, true)
}

fn assemble(
    generators: &[Generator],
    base_stations: &[BaseStation],
    shares: &[(usize, usize, f64)],
    normalize: bool,
) -> Result<PowerAssignment> {
    let num_bs = base_stations.len();
    for (idx, g) in generators.iter().enumerate() {
        if g.id != idx {
            return Err(Error::invalid(format!("generator at position {idx} has id {}", g.id)));
        }
        if g.connected_bs.is_empty() {
            return Err(Error::invalid(format!("generator {idx} feeds no base station")));
        }
        if g.connected_bs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("generator {idx}: station list must be strictly ascending")));
        }
        if let Some(&b) = g.connected_bs.iter().find(|&&b| b >= num_bs) {
            return Err(Error::invalid(format!("generator {idx} references missing base station {b}")));
        }
    }
    for (idx, bs) in base_stations.iter().enumerate() {
        if bs.id != idx {
            return Err(Error::invalid(format!("base station at position {idx} has id {}", bs.id)));
        }
        bs.validate()?;
    }

    let mut lines: Vec<Line> = generators
        .iter()
        .flat_map(|g| g.connected_bs.iter().map(move |&b| Line { generator: g.id, bs: b, share: 0.0 }))
        .collect();
    let mut gen_start = Vec::with_capacity(generators.len() + 1);
    let mut acc = 0;
    for g in generators {
        gen_start.push(acc);
        acc += g.connected_bs.len();
    }
    gen_start.push(acc);

    for &(g, b, w) in shares {
        if g >= generators.len() {
            return Err(Error::invalid(format!("share for missing generator {g}")));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("share ({g}, {b}) is {w}")));
        }
        let span = &generators[g].connected_bs;
        let pos = span.binary_search(&b).map_err(|_| Error::NoLine { generator: g, bs: b })?;
        lines[gen_start[g] + pos].share += w;
    }

    let mut bs_lines: Vec<Vec<usize>> = vec![Vec::new(); num_bs];
    for (k, line) in lines.iter().enumerate() {
        if !(line.share > 0.0) {
            return Err(Error::invalid(format!(
                "link ({}, {}) has no positive share",
                line.generator, line.bs
            )));
        }
        bs_lines[line.bs].push(k);
    }
    for (b, idx) in bs_lines.iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::Disconnected { bs: b });
        }
        if normalize {
            let total: f64 = idx.iter().map(|&k| lines[k].share).sum();
            for &k in idx {
                lines[k].share /= total;
            }
        }
    }

    let out = PowerAssignment {
        generators: generators.to_vec(),
        lines,
        gen_start,
        bs_lines,
        p_o: base_stations.iter().map(|b| b.p_o).collect(),
        p_t: base_stations.iter().map(|b| b.p_t).collect(),
    };
    if !normalize {
        out.validate()?;
    }
    Ok(out)
}

/// Safe-scenario power `t_b^g p_b^t` on line `(g, b)`.
pub fn line_capacity(assignment: &PowerAssignment, generator: usize, bs: usize) -> Result<f64> {
    let k = assignment.line_index(generator, bs).ok_or(Error::NoLine { generator, bs })?;
    Ok(assignment.capacity(k))
}

impl PowerAssignment {
    /// Uses `shares` as the entries of `T` without renormalizing; rows must
    /// already sum to one.
    pub fn from_shares(
        generators: &[Generator],
        base_stations: &[BaseStation],
        shares: &[(usize, usize, f64)],
    ) -> Result<Self> {
        assemble(generators, base_stations, shares, false)
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn num_base_stations(&self) -> usize {
        self.p_t.len()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// All lines, ordered by generator then station.
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Index range of generator `g`'s lines in [`lines`](Self::lines).
    pub fn generator_lines(&self, g: usize) -> std::ops::Range<usize> {
        self.gen_start[g]..self.gen_start[g + 1]
    }

    /// Line indices feeding station `b`.
    pub fn station_lines(&self, b: usize) -> &[usize] {
        &self.bs_lines[b]
    }

    pub fn line_index(&self, generator: usize, bs: usize) -> Option<usize> {
        let g = self.generators.get(generator)?;
        g.connected_bs.binary_search(&bs).ok().map(|pos| self.gen_start[generator] + pos)
    }

    /// `t_b^g`, zero when unconnected.
    pub fn share(&self, bs: usize, generator: usize) -> f64 {
        self.line_index(generator, bs).map_or(0.0, |k| self.lines[k].share)
    }

    /// Capacity of line `k`: `t_b^g p_b^t`.
    pub fn capacity(&self, k: usize) -> f64 {
        let l = &self.lines[k];
        l.share * self.p_t[l.bs]
    }

    pub fn p_o(&self, bs: usize) -> f64 {
        self.p_o[bs]
    }

    pub fn p_t(&self, bs: usize) -> f64 {
        self.p_t[bs]
    }

    /// `p_t - p_o` of station `bs`.
    pub fn headroom(&self, bs: usize) -> f64 {
        self.p_t[bs] - self.p_o[bs]
    }

    /// Safe output of generator `g`: `sum_b t_b^g p_b^t`.
    pub fn safe_output(&self, g: usize) -> f64 {
        self.generator_lines(g).map(|k| self.capacity(k)).sum()
    }

    /// Power each station receives when line `k` loses `deviation[k]` watts.
    pub fn received_power(&self, deviation: &[f64]) -> Vec<f64> {
        let mut p = self.p_t.clone();
        for (k, l) in self.lines.iter().enumerate() {
            p[l.bs] -= deviation[k];
        }
        p
    }

    /// Dense `B x G` matrix `T`.
    pub fn t_matrix(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.num_base_stations(), self.num_generators());
        for l in &self.lines {
            t[(l.bs, l.generator)] = l.share;
        }
        t
    }

    /// Checks row sums and the support of `T`.
    pub fn validate(&self) -> Result<()> {
        for (b, idx) in self.bs_lines.iter().enumerate() {
            let sum: f64 = idx.iter().map(|&k| self.lines[k].share).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("supply shares of base station {b} sum to {sum}")));
            }
        }
        if self.lines.iter().any(|l| !(l.share > 0.0)) {
            return Err(Error::invalid("a listed line carries no share"));
        }
        Ok(())
    }
}

/// Links each generator to its `counts[g]` nearest stations.
///
/// Stations left without a generator are attached to their nearest one, so
/// every station is fed. Distance ties go to the lower id.
pub fn connect_nearest(positions: &[Point], base_stations: &[BaseStation], counts: &[usize]) -> Result<Vec<Generator>> {
    if positions.is_empty() {
        return Err(Error::invalid("at least one generator is required"));
    }
    if counts.len() != positions.len() {
        return Err(Error::invalid("one connection count per generator is required"));
    }
    let num_bs = base_stations.len();
    let mut links: Vec<Vec<usize>> = vec![Vec::new(); positions.len()];
    let mut fed = vec![false; num_bs];
    for (g, p) in positions.iter().enumerate() {
        let mut order: Vec<usize> = (0..num_bs).collect();
        order.sort_by(|&a, &b| {
            p.distance(base_stations[a].center).total_cmp(&p.distance(base_stations[b].center)).then(a.cmp(&b))
        });
        let k = counts[g].clamp(1, num_bs.max(1));
        for &b in order.iter().take(k) {
            links[g].push(b);
            fed[b] = true;
        }
    }
    for b in (0..num_bs).filter(|&b| !fed[b]) {
        let c = base_stations[b].center;
        let g = (0..positions.len())
            .min_by(|&x, &y| c.distance(positions[x]).total_cmp(&c.distance(positions[y])).then(x.cmp(&y)))
            .expect("positions is nonempty");
        links[g].push(b);
    }
    Ok(links
        .into_iter()
        .enumerate()
        .map(|(g, mut bs)| {
            bs.sort_unstable();
            Generator { id: g, position: positions[g], connected_bs: bs }
        })
        .collect())
}

/// Weights proportional to inverse generator-to-station distance.
pub fn inverse_distance_shares(generators: &[Generator], base_stations: &[BaseStation]) -> Vec<(usize, usize, f64)> {
    generators
        .iter()
        .flat_map(|g| {
            g.connected_bs.iter().map(move |&b| {
                let d = g.position.distance(base_stations[b].center).max(1e-6);
                (g.id, b, 1.0 / d)
            })
        })
        .collect()
}

/// Unit weight on every link.
pub fn equal_shares(generators: &[Generator]) -> Vec<(usize, usize, f64)> {
    generators.iter().flat_map(|g| g.connected_bs.iter().map(move |&b| (g.id, b, 1.0))).collect()
}
