//! Extract contours from a random occupancy field and rebuild the field
//! from them.

use phasekit::contours::{extract_contours, witness_field};
use phasekit::geometry::Tiling;
use phasekit::peierls::random_island_field;
use phasekit::rng;

fn main() -> phasekit::Result<()> {
    let tiling = Tiling::new(1.0, 2)?;
    let l = 1.0;
    let mut r = rng::seeded(11);
    let field = random_island_field(32, 0, 4, 6, &mut r);
    let contours = extract_contours(&field, l, &tiling)?;
    println!("{} contours", contours.len());
    for (k, c) in contours.iter().enumerate() {
        println!(
            "  #{k}: type {}  |support| {}  class {}  external {}  dominoes {}",
            c.contour_type,
            c.support.len(),
            c.class(),
            c.external,
            c.dominoes().len()
        );
    }
    // the contours carry everything needed to reproduce the field
    let rebuilt = witness_field(&contours, &field.domain, 0);
    let again = extract_contours(&rebuilt, l, &tiling)?;
    println!("round trip exact: {}", contours == again);
    Ok(())
}
