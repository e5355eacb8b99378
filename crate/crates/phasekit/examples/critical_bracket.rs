//! Bracket the critical activity of a penalized surrogate from truncated
//! pressures on a box ladder, then read off the coexisting densities.

use phasekit::energy::{PatternTable, TileEnergyModel};
use phasekit::geometry::IBox;
use phasekit::peierls::critical_window;
use phasekit::polymer::PressureLadder;

fn main() -> phasekit::Result<()> {
    let (beta, b0) = (5.0, 1.0);
    let model = TileEnergyModel::surrogate(1, PatternTable::penalized(1, 1, b0, 4.0)?, 1.0)?;
    let boxes = vec![IBox::cube(0, 10, 1)?, IBox::cube(0, 14, 1)?];
    let ladder = PressureLadder::new(model, beta, boxes)?;

    let window = critical_window(beta, 0.0, b0, 1.0, 1)?;
    println!("window ({:.4}, {:.4})  b+ {:.3}", window.0, window.1, ladder.b_plus);
    for k in 0..8 {
        let z = window.0 + (window.1 - window.0) * k as f64 / 7.0;
        println!("  G({z:.3}) = {:+.6}", ladder.g(z, 1)?);
    }
    for rank in 0..=2 {
        let (a, b) = ladder.bracket_critical_activity(window, rank, 1e-10)?;
        println!("rank {rank}: z_c in [{a:.12}, {b:.12}]");
    }
    // one-sided densities straddling the bracket midpoint
    let (a, b) = ladder.bracket_critical_activity(window, 1, 1e-10)?;
    let zc = 0.5 * (a + b);
    let (rho0, e0) = ladder.density(0, zc, 1e-3, 1)?;
    let (rho1, e1) = ladder.density(1, zc, 1e-3, 1)?;
    println!("densities at z_c: rho0 = {rho0:.6} (±{e0:.1e})  rho1 = {rho1:.6} (±{e1:.1e})");
    Ok(())
}
