//! Estimate the Peierls constant b+ over an adversarial corpus of occupancy
//! fields for a penalized surrogate.

use phasekit::energy::{PatternTable, TileEnergyModel};
use phasekit::peierls::{adversarial_fields, estimate_b_plus, random_island_field, GapVariant};
use phasekit::rng;

fn main() -> phasekit::Result<()> {
    let table = PatternTable::penalized(1, 2, 0.8, 2.0)?;
    let model = TileEnergyModel::surrogate(2, table, 1.0)?;
    let mut fields = adversarial_fields(20, 0);
    fields.extend(adversarial_fields(20, 1));
    for k in 0..30u64 {
        let mut r = rng::stream(5, k);
        fields.push(random_island_field(24, (k % 2) as u8, 3, 6, &mut r));
    }
    for variant in [GapVariant::Full, GapVariant::MinusInnerBoundary] {
        let rep = estimate_b_plus(&model, &fields, variant, 1)?;
        println!(
            "{:?}: {} contours, b+ = {:.4}, pass = {}",
            variant,
            rep.records.len(),
            rep.b_plus,
            rep.pass
        );
    }
    Ok(())
}
