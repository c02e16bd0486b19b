//! Builds a four-intersection loop by hand and looks at steady-state flows
//! and how a drop on one street spreads to the rest.

use itsguard::geom::{Point, Segment};
use itsguard::its::{build_flow_matrix, propagate_deviation, solve_flows, Intersection, Street, TurningRatio};

fn main() -> itsguard::Result<()> {
    // a square: 0 -> 1 -> 2 -> 3 -> 0, plus a diagonal shortcut 0 -> 2
    let corners = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
    let road = |id, a: usize, b: usize| Street::new(id, a, b, Segment::new(corners[a], corners[b]));
    let streets = vec![road(0, 0, 1), road(1, 1, 2), road(2, 2, 3), road(3, 3, 0), road(4, 0, 2)];
    let node = |id, inbound: Vec<usize>, outbound: Vec<usize>| Intersection { id, position: corners[id], inbound, outbound };
    let intersections = vec![node(0, vec![3], vec![0, 4]), node(1, vec![0], vec![1]), node(2, vec![1, 4], vec![2]), node(3, vec![2], vec![3])];
    let turn = |from_street, to_street, ratio| TurningRatio { from_street, to_street, ratio };
    let ratios = vec![turn(3, 0, 0.7), turn(3, 4, 0.3), turn(0, 1, 1.0), turn(1, 2, 1.0), turn(4, 2, 1.0), turn(2, 3, 1.0)];

    let net = build_flow_matrix(streets, intersections, ratios)?;
    println!("streets: {}, conservation rank: {}", net.len(), net.conservation_rank());

    let sol = solve_flows(&net, 3, 1000.0)?;
    for (i, q) in sol.flows.iter().enumerate() {
        println!("street {i}: {q:8.2} veh/h");
    }
    println!("max conservation residual: {:.2e}", sol.residual(&net));

    let drop = propagate_deviation(&net, 0, 100.0)?;
    println!("losing 100 veh/h on street 0 changes flows by {drop:.2?}");
    Ok(())
}
