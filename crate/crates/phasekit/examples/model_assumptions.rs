//! Build each interaction model and run the randomized assumption checks.
//!
//! ```text
//! cargo run --release --example model_assumptions
//! ```

use phasekit::energy::{PatternTable, PhiTable, TileEnergyModel};

fn main() -> phasekit::Result<()> {
    let phi = PhiTable::new(vec![(0.0, 2.0), (0.3, 0.0), (0.4, -0.1)], 0.3, 0.4)?;
    let models = vec![
        TileEnergyModel::knn_strauss(1, 1, 1.0, 1.0, 0.25)?,
        TileEnergyModel::area_interaction(0.8, 0.3, 0.5, 0.2)?,
        TileEnergyModel::diluted_pairwise(2, phi, 0.4, 0.28)?,
        TileEnergyModel::surrogate(2, PatternTable::random(1, 2, 0.8, -0.4, 0.6, 5)?, 1.0)?,
    ];
    for m in models {
        let rep = m.check_assumptions(200, 7)?;
        println!(
            "{:<18} L = {:.3}  b = {:.3}  b0 = {:.4}  all pass: {}  quadrature err <= {:.1e}",
            m.kind_name(),
            m.sat.l,
            m.sat.b,
            m.sat.b0,
            rep.all_pass(),
            rep.max_reported_err
        );
    }
    Ok(())
}
