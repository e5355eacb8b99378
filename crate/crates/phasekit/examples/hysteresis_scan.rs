//! Sweep the activity across the coexistence window under both boundary
//! conditions; inside the window the two density branches separate.

use phasekit::energy::{PatternTable, TileEnergyModel};
use phasekit::geometry::IBox;
use phasekit::peierls::critical_window;
use phasekit::sampler::hysteresis_scan;

fn main() -> phasekit::Result<()> {
    let (beta, b0) = (5.0, 0.5);
    let model = TileEnergyModel::surrogate(1, PatternTable::penalized(1, 1, b0, 1.5)?, 1.0)?;
    let lam = IBox::cube(0, 16, 1)?;
    let (zm, zp) = critical_window(beta, 0.0, b0, 1.0, 1)?;
    let z_grid: Vec<f64> = (0..7).map(|k| zm + (zp - zm) * k as f64 / 6.0).collect();
    let rows = hysteresis_scan(&model, &lam, beta, &z_grid, 300_000, 2, 9)?;
    println!("{:>8}  {:>2}  {:>9}  {:>9}  {:>6}", "z", "bc", "rho", "se", "occ");
    for r in rows {
        println!(
            "{:8.4}  {:>2}  {:9.4}  {:9.4}  {:6.3}",
            r.z, r.sharp, r.rho_mean, r.rho_se, r.occ_mean
        );
    }
    Ok(())
}
