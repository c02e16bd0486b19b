//! Street network of the transportation system and its optimal-flow system.
//!
//! Each directed street `k` carries a flow `q_k`. At the intersection where a
//! street ends, its flow is split over the outbound streets according to
//! turning ratios that sum to one. Conservation gives `q = Q q`, i.e.
//! `A q = 0` with `A = I - Q`, where `Q[k][j]` is the share of street `j`'s
//! flow that turns into street `k`. `A` has rank `n - 1`, so fixing the flow of
//! one anchor street determines all others. Removing the anchor column `a_i`
//! from `A` leaves `A_i`, and the remaining flows solve the least-squares
//! problem `A_i q_rest = -a_i q_i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Segment};
use crate::linalg;

/// Networks up to this many streets get their rank checked by SVD; larger ones
/// use the closed-class count of the turning graph, which is exact for
/// stochastic turning ratios.
pub const NUMERIC_RANK_LIMIT: usize = 160;

/// Networks up to this many streets are solved by dense Householder QR.
pub const DENSE_SOLVE_LIMIT: usize = 600;

const RATIO_SUM_TOL: f64 = 1e-9;
const LENGTH_TOL: f64 = 1e-9;
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: usize,
    pub position: Point,
    pub inbound: Vec<usize>,
    pub outbound: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    /// Length in km.
    pub length: f64,
    pub geometry: Segment,
}

impl Street {
    pub fn new(id: usize, from: usize, to: usize, geometry: Segment) -> Self {
        Street { id, from, to, length: geometry.length(), geometry }
    }
}

/// Share of the flow of `from_street` that continues into `to_street`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningRatio {
    pub from_street: usize,
    pub to_street: usize,
    pub ratio: f64,
}

/// Validated street network with its turning-ratio matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    streets: Vec<Street>,
    intersections: Vec<Intersection>,
    ratios: Vec<TurningRatio>,
    /// `rows[k]` lists `(j, Q[k][j])`.
    rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub anchor_street: usize,
    pub anchor_flow: f64,
    /// veh/h/lane per street.
    pub flows: Vec<f64>,
}

impl FlowSolution {
    /// `max |A q|` over all streets.
    pub fn residual(&self, net: &FlowNetwork) -> f64 {
        net.apply_conservation(&self.flows).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which factorization backs the reduced least-squares solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Dense QR up to [`DENSE_SOLVE_LIMIT`] streets, banded elimination above.
    #[default]
    Auto,
    /// Householder QR of the dense `n x (n-1)` matrix `A_i`.
    DenseQr,
    /// Drops the anchor row as well (the system is consistent, so any `n - 1`
    /// rows determine the solution) and eliminates the square sparse system in
    /// RCM band order.
    Banded,
}

impl FlowNetwork {
    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn turning_ratios(&self) -> &[TurningRatio] {
        &self.ratios
    }

    pub fn len(&self) -> usize {
        self.streets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streets.is_empty()
    }

    /// `Q[k][j]`.
    pub fn q_entry(&self, k: usize, j: usize) -> f64 {
        self.rows[k].iter().find(|(c, _)| *c == j).map_or(0.0, |&(_, v)| v)
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for (k, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                q[(k, j)] = v;
            }
        }
        q
    }

    /// Dense `A = I - Q`.
    pub fn conservation_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.len(), self.len()) - self.q_matrix()
    }

    /// Sparse product `A q`.
    pub fn apply_conservation(&self, q: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| q[k] - row.iter().map(|&(j, v)| v * q[j]).sum::<f64>())
            .collect()
    }

    /// Rank of `A`, by SVD for small networks and by the closed-class count of
    /// the turning graph otherwise.
    pub fn conservation_rank(&self) -> usize {
        let n = self.len();
        if n <= NUMERIC_RANK_LIMIT {
            linalg::numerical_rank(&self.conservation_matrix())
        } else {
            let edges = self.ratios.iter().filter(|r| r.ratio > 0.0).map(|r| (r.from_street, r.to_street));
            n - linalg::closed_class_count(n, edges)
        }
    }
}

/// Validates the network and assembles `Q` and `A = I - Q`.
pub fn build_flow_matrix(
    streets: Vec<Street>,
    intersections: Vec<Intersection>,
    turning_ratios: Vec<TurningRatio>,
) -> Result<FlowNetwork> {
    let n = streets.len();
    if n < 2 {
        return Err(Error::invalid("a flow network needs at least two streets"));
    }
    for (idx, s) in streets.iter().enumerate() {
        if s.id != idx {
            return Err(Error::invalid(format!("street at position {idx} has id {}", s.id)));
        }
        if s.from == s.to {
            return Err(Error::Topology(format!("street {idx} starts and ends at intersection {}", s.from)));
        }
        if s.from >= intersections.len() || s.to >= intersections.len() {
            return Err(Error::Topology(format!("street {idx} references a missing intersection")));
        }
        if !(s.length > 0.0) || (s.length - s.geometry.length()).abs() > LENGTH_TOL {
            return Err(Error::invalid(format!(
                "street {idx}: length {} does not match its geometry ({})",
                s.length,
                s.geometry.length()
            )));
        }
    }
    for (idx, node) in intersections.iter().enumerate() {
        if node.id != idx {
            return Err(Error::invalid(format!("intersection at position {idx} has id {}", node.id)));
        }
        if node.inbound.iter().any(|s| node.outbound.contains(s)) {
            return Err(Error::Topology(format!("intersection {idx}: a street is both inbound and outbound")));
        }
        for &s in &node.inbound {
            if s >= n || streets[s].to != idx {
                return Err(Error::Topology(format!("intersection {idx}: inbound street {s} does not end here")));
            }
        }
        for &s in &node.outbound {
            if s >= n || streets[s].from != idx {
                return Err(Error::Topology(format!("intersection {idx}: outbound street {s} does not start here")));
            }
        }
    }
    for s in &streets {
        if !intersections[s.to].inbound.contains(&s.id) || !intersections[s.from].outbound.contains(&s.id) {
            return Err(Error::Topology(format!("street {} is missing from its intersections' lists", s.id)));
        }
    }

    let mut ratios = turning_ratios;
    ratios.sort_by_key(|r| (r.from_street, r.to_street));
    let mut sums = vec![0.0_f64; n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (w, r) in ratios.iter().enumerate() {
        if r.from_street >= n || r.to_street >= n {
            return Err(Error::Topology(format!(
                "turning ratio {} -> {} references a missing street",
                r.from_street, r.to_street
            )));
        }
        if w > 0 && ratios[w - 1].from_street == r.from_street && ratios[w - 1].to_street == r.to_street {
            return Err(Error::Topology(format!("duplicate turning ratio {} -> {}", r.from_street, r.to_street)));
        }
        if streets[r.from_street].to != streets[r.to_street].from {
            return Err(Error::Topology(format!(
                "street {} does not feed street {}",
                r.from_street, r.to_street
            )));
        }
        if !(r.ratio >= 0.0) || !r.ratio.is_finite() {
            return Err(Error::invalid(format!(
                "turning ratio {} -> {} is {}",
                r.from_street, r.to_street, r.ratio
            )));
        }
        sums[r.from_street] += r.ratio;
        rows[r.to_street].push((r.from_street, r.ratio));
    }
    for (j, sum) in sums.iter().enumerate() {
        if (sum - 1.0).abs() > RATIO_SUM_TOL {
            return Err(Error::invalid(format!("outflow shares of street {j} sum to {sum}, expected 1")));
        }
    }

    let net = FlowNetwork { streets, intersections, ratios, rows };
    let rank = net.conservation_rank();
    if rank != n - 1 {
        return Err(Error::Rank { expected: n - 1, found: rank });
    }
    Ok(net)
}

/// Solves for all street flows given the flow on `anchor`.
pub fn solve_flows(net: &FlowNetwork, anchor: usize, anchor_flow: f64) -> Result<FlowSolution> {
    solve_flows_with(net, anchor, anchor_flow, SolveMethod::Auto)
}

pub fn solve_flows_with(
    net: &FlowNetwork,
    anchor: usize,
    anchor_flow: f64,
    method: SolveMethod,
) -> Result<FlowSolution> {
    if !(anchor_flow >= 0.0) {
        return Err(Error::invalid(format!("anchor flow must be nonnegative, got {anchor_flow}")));
    }
    let x = reduced_solution(net, anchor, method)?;
    let flows = insert_at(anchor, anchor_flow, x.iter().map(|v| -v * anchor_flow));
    Ok(FlowSolution { anchor_street: anchor, anchor_flow, flows })
}

/// Change in every street's flow when the flow on `street` drops by `delta`.
///
/// Entry `street` is `-delta`; the others are `(A_iᵀA_i)⁻¹A_iᵀa_i · delta`.
pub fn propagate_deviation(net: &FlowNetwork, street: usize, delta: f64) -> Result<Vec<f64>> {
    propagate_deviation_with(net, street, delta, SolveMethod::Auto)
}

pub fn propagate_deviation_with(
    net: &FlowNetwork,
    street: usize,
    delta: f64,
    method: SolveMethod,
) -> Result<Vec<f64>> {
    let x = reduced_solution(net, street, method)?;
    Ok(insert_at(street, -delta, x.iter().map(|v| v * delta)))
}

/// Least-squares solution `x` of `A_i x = a_i` (length `n - 1`).
pub fn reduced_solution(net: &FlowNetwork, anchor: usize, method: SolveMethod) -> Result<Vec<f64>> {
    let n = net.len();
    if anchor >= n {
        return Err(Error::invalid(format!("street {anchor} does not exist (network has {n})")));
    }
    let method = match method {
        SolveMethod::Auto if n <= DENSE_SOLVE_LIMIT => SolveMethod::DenseQr,
        SolveMethod::Auto => SolveMethod::Banded,
        m => m,
    };
    match method {
        SolveMethod::DenseQr => dense_qr_solution(net, anchor),
        _ => banded_solution(net, anchor),
    }
}

fn dense_qr_solution(net: &FlowNetwork, anchor: usize) -> Result<Vec<f64>> {
    let a = net.conservation_matrix();
    let rhs: DVector<f64> = a.column(anchor).into_owned();
    let reduced = a.remove_column(anchor);
    let qr = reduced.qr();
    let r = qr.r();
    let (lo, hi) = r
        .diagonal()
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let projected = qr.q().transpose() * rhs;
    let x = r.solve_upper_triangular(&projected).ok_or(Error::Singular { condition })?;
    Ok(x.iter().copied().collect())
}

fn banded_solution(net: &FlowNetwork, anchor: usize) -> Result<Vec<f64>> {
    let n = net.len();
    let squeeze = |k: usize| if k < anchor { k } else { k - 1 };
    let mut entries = Vec::with_capacity(n * 4);
    let mut rhs = vec![0.0_f64; n - 1];
    for (k, row) in net.rows.iter().enumerate() {
        if k == anchor {
            continue;
        }
        let r = squeeze(k);
        entries.push((r, r, 1.0));
        for &(j, v) in row {
            if j == anchor {
                // a_i restricted to row k is -Q[k][anchor]
                rhs[r] -= v;
            } else {
                entries.push((r, squeeze(j), -v));
            }
        }
    }
    linalg::solve_banded(n - 1, &entries, &rhs)
}

fn insert_at(pos: usize, value: f64, rest: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = rest.collect();
    out.insert(pos, value);
    out
}
