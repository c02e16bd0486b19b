//! Impact of base-station power loss on street flows.
//!
//! A unit flow drop on street `i` changes all flows by `e_i`, which is `-1` at
//! `i` and the reduced least-squares solution elsewhere. A station's per-watt
//! impact vector is `z^b = sum_i e_i c_ib / (p_t - p_o)`, and its score `z_b`
//! is the L1 norm of `z^b`.

use std::io::Write;

use rayon::prelude::*;

use crate::coverage::{BaseStation, CoverageMap};
use crate::error::{Error, Result};
use crate::its::{propagate_deviation, solve_flows, FlowNetwork};

/// Reference flows with a component below this fraction of the largest one
/// are not used for the shortcut `e_i = -q / q_i`.
const MIN_FLOW_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactModel {
    /// Flow change per km of unit reference deviation, veh/h/lane.
    pub delta: f64,
    headroom: Vec<f64>,
    z_vectors: Vec<Vec<f64>>,
    z_scores: Vec<f64>,
    covered: Vec<usize>,
}

/// Flow change across the network per unit flow drop on `street`.
pub fn street_impact_vector(net: &FlowNetwork, street: usize) -> Result<Vec<f64>> {
    propagate_deviation(net, street, 1.0)
}

/// `(z^b, z_b)` for one station, summing one least-squares solve per covered
/// street.
pub fn bs_impact(net: &FlowNetwork, coverage: &CoverageMap, bs: &BaseStation) -> Result<(Vec<f64>, f64)> {
    check_sizes(net, coverage)?;
    let mut z = vec![0.0; net.len()];
    for (i, c) in coverage.covered_streets(bs.id) {
        let e = street_impact_vector(net, i)?;
        let w = c / bs.headroom();
        for (zj, ej) in z.iter_mut().zip(&e) {
            *zj += ej * w;
        }
    }
    let score = z.iter().map(|v| v.abs()).sum();
    Ok((z, score))
}

fn check_sizes(net: &FlowNetwork, coverage: &CoverageMap) -> Result<()> {
    if coverage.num_streets() != net.len() {
        return Err(Error::invalid(format!(
            "coverage has {} streets, network has {}",
            coverage.num_streets(),
            net.len()
        )));
    }
    Ok(())
}

impl ImpactModel {
    /// Impact vectors and scores for every station.
    ///
    /// Since `A` has a one-dimensional null space spanned by the flows `q`,
    /// every `e_i` equals `-q / q_i`; one flow solve serves all streets. When a
    /// reference flow is (near) zero the per-street solves are used instead.
    pub fn build(net: &FlowNetwork, coverage: &CoverageMap, stations: &[BaseStation], delta: f64) -> Result<Self> {
        check_sizes(net, coverage)?;
        if coverage.num_base_stations() != stations.len() {
            return Err(Error::invalid("coverage and station list disagree on the number of stations"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        let per_bs = coverage.by_base_station();
        let q = solve_flows(net, 0, 1.0)?.flows;
        let qmax = q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let shortcut = q.iter().all(|v| *v > MIN_FLOW_RATIO * qmax);

        let z_vectors: Vec<Vec<f64>> = if shortcut {
            per_bs
                .par_iter()
                .zip(stations.par_iter())
                .map(|(streets, bs)| {
                    let w: f64 = streets.iter().map(|&(i, c)| c / q[i]).sum::<f64>() / bs.headroom();
                    q.iter().map(|v| -w * v).collect()
                })
                .collect()
        } else {
            let mut needed: Vec<usize> = per_bs.iter().flatten().map(|e| e.0).collect();
            needed.sort_unstable();
            needed.dedup();
            let vectors: Vec<(usize, Vec<f64>)> = needed
                .par_iter()
                .map(|&i| street_impact_vector(net, i).map(|e| (i, e)))
                .collect::<Result<_>>()?;
            let lookup = |i: usize| &vectors[vectors.binary_search_by_key(&i, |e| e.0).unwrap()].1;
            per_bs
                .iter()
                .zip(stations)
                .map(|(streets, bs)| {
                    let mut z = vec![0.0; net.len()];
                    for &(i, c) in streets {
                        let w = c / bs.headroom();
                        for (zj, ej) in z.iter_mut().zip(lookup(i)) {
                            *zj += ej * w;
                        }
                    }
                    z
                })
                .collect()
        };
        let z_scores = z_vectors.iter().map(|z| z.iter().map(|v| v.abs()).sum()).collect();
        Ok(ImpactModel {
            delta,
            headroom: stations.iter().map(BaseStation::headroom).collect(),
            z_vectors,
            z_scores,
            covered: per_bs.iter().map(Vec::len).collect(),
        })
    }

    pub fn num_base_stations(&self) -> usize {
        self.z_scores.len()
    }

    pub fn z_scores(&self) -> &[f64] {
        &self.z_scores
    }

    pub fn z_vector(&self, bs: usize) -> &[f64] {
        &self.z_vectors[bs]
    }

    /// Number of streets with a nonzero covered length.
    pub fn covered_street_count(&self, bs: usize) -> usize {
        self.covered[bs]
    }

    /// `p_t - p_o` per station.
    pub fn headroom(&self) -> &[f64] {
        &self.headroom
    }

    /// Stations by descending score, ties by id.
    pub fn ranking(&self) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = self.z_scores.iter().copied().enumerate().collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        r
    }

    /// Writes `bs_id,z_score,covered_streets`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record(["bs_id", "z_score", "covered_streets"]).map_err(wrap)?;
        for (b, z) in self.z_scores.iter().enumerate() {
            w.write_record([b.to_string(), format!("{z:e}"), self.covered[b].to_string()]).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Total flow deviation from per-station power losses, each capped at the
/// station's blackout level.
pub fn its_deviation(impact: &ImpactModel, power_deviations: &[f64]) -> f64 {
    assert_eq!(power_deviations.len(), impact.num_base_stations());
    impact
        .z_scores
        .iter()
        .zip(power_deviations)
        .zip(&impact.headroom)
        .map(|((z, d), h)| z * impact.delta * d.clamp(0.0, *h))
        .sum()
}

/// Total flow deviation without the blackout cap.
pub fn linear_deviation(impact: &ImpactModel, power_deviations: &[f64]) -> f64 {
    assert_eq!(power_deviations.len(), impact.num_base_stations());
    impact.z_scores.iter().zip(power_deviations).map(|(z, d)| z * impact.delta * d).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::build_coverage;
    use crate::geom::{Point, Segment};
    use crate::its::{build_flow_matrix, Intersection, Street, TurningRatio};

    fn cycle() -> FlowNetwork {
        let p0 = Point::new(0.0, 0.0);
        let p1 = Point::new(0.5, 0.0);
        let streets = vec![
            Street::new(0, 0, 1, Segment::new(p0, p1)),
            Street::new(1, 1, 0, Segment::new(p1, p0)),
        ];
        let intersections = vec![
            Intersection { id: 0, position: p0, inbound: vec![1], outbound: vec![0] },
            Intersection { id: 1, position: p1, inbound: vec![0], outbound: vec![1] },
        ];
        let ratios = vec![
            TurningRatio { from_street: 0, to_street: 1, ratio: 1.0 },
            TurningRatio { from_street: 1, to_street: 0, ratio: 1.0 },
        ];
        build_flow_matrix(streets, intersections, ratios).unwrap()
    }

    fn station(id: usize, center: Point) -> BaseStation {
        BaseStation::new(id, center, 1.0, 100.0, 200.0).unwrap()
    }

    #[test]
    fn street_vector_has_minus_one_at_its_street() {
        let e = street_impact_vector(&cycle(), 1).unwrap();
        assert_eq!(e[1], -1.0);
        assert!((e[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn station_covering_nothing_scores_zero() {
        let net = cycle();
        let stations = vec![station(0, Point::new(0.0, 0.0)), station(1, Point::new(30.0, 30.0))];
        let cov = build_coverage(net.streets(), &stations).unwrap();
        let (z, score) = bs_impact(&net, &cov, &stations[1]).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        assert_eq!(score, 0.0);
        let model = ImpactModel::build(&net, &cov, &stations, 1.0).unwrap();
        assert_eq!(model.z_scores()[1], 0.0);
        assert!(model.z_scores()[0] > 0.0);
    }

    #[test]
    fn shortcut_matches_per_street_solves() {
        let net = cycle();
        let stations = vec![station(0, Point::new(0.0, 0.0))];
        let cov = build_coverage(net.streets(), &stations).unwrap();
        let model = ImpactModel::build(&net, &cov, &stations, 1.0).unwrap();
        let (z, score) = bs_impact(&net, &cov, &stations[0]).unwrap();
        assert!((model.z_scores()[0] - score).abs() < 1e-12);
        for (a, b) in model.z_vector(0).iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
        // both streets fully covered: z^b = (e_0 + e_1) / 100 = (-2, -2) / 100
        assert!((score - 0.04).abs() < 1e-12);
    }

    #[test]
    fn deviation_saturates_at_blackout() {
        let net = cycle();
        let stations = vec![station(0, Point::new(0.0, 0.0))];
        let cov = build_coverage(net.streets(), &stations).unwrap();
        let model = ImpactModel::build(&net, &cov, &stations, 2.0).unwrap();
        assert_eq!(its_deviation(&model, &[0.0]), 0.0);
        let z = model.z_scores()[0];
        assert!((its_deviation(&model, &[30.0]) - z * 2.0 * 30.0).abs() < 1e-12);
        assert_eq!(its_deviation(&model, &[100.0]), its_deviation(&model, &[200.0]));
        assert!(linear_deviation(&model, &[200.0]) > its_deviation(&model, &[200.0]));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let net = cycle();
        let stations = vec![station(0, Point::new(0.0, 0.0))];
        let cov = build_coverage(net.streets(), &stations).unwrap();
        let model = ImpactModel::build(&net, &cov, &stations, 1.0).unwrap();
        let mut buf = Vec::new();
        model.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bs_id,z_score,covered_streets\n0,"));
        assert!(text.trim_end().ends_with(",2"));
    }
}
