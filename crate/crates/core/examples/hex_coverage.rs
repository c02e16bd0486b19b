//! Tiles a small city with hexagonal cells and reports which cells cover
//! which streets.

use itsguard::coverage::{build_coverage, clip_segment_to_hex, hex_tiling, BaseStation, Hexagon};
use itsguard::geom::{Bounds, Point, Segment};
use itsguard::scenario::grid_layout;

fn main() -> itsguard::Result<()> {
    let hex = Hexagon::new(Point::new(0.0, 0.0), 1.0);
    let seg = Segment::new(Point::new(-2.0, 0.2), Point::new(2.0, 0.2));
    println!("a 4 km road through a unit cell keeps {:.4} km inside it", clip_segment_to_hex(&seg, &hex));

    let (streets, _) = grid_layout(4, 1.0);
    let bounds = Bounds::new(Point::new(0.0, 0.0), Point::new(3.0, 3.0));
    for radius in [0.5, 1.0, 2.0] {
        let centers = hex_tiling(&bounds, radius)?;
        let stations: Vec<BaseStation> = centers
            .iter()
            .enumerate()
            .map(|(id, c)| BaseStation::new(id, *c, radius, 100.0, 200.0))
            .collect::<itsguard::Result<_>>()?;
        let cov = build_coverage(&streets, &stations)?;
        let busy = cov.by_base_station().iter().filter(|s| !s.is_empty()).count();
        println!("radius {radius}: {} cells, {busy} cover at least one street", stations.len());
    }
    Ok(())
}
