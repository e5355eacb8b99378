//! Check the diluted-pairwise sign condition for a tabulated potential and,
//! when a diverging core fails it, search for a truncation radius.

use phasekit::energy::PhiTable;
use phasekit::peierls::{find_truncation_epsilon, PotentialProfile};

fn main() -> phasekit::Result<()> {
    // bounded potential with a soft negative tail
    let phi = PhiTable::new(vec![(0.0, 5.0), (0.4, 5.0), (0.6, -0.2), (1.0, 0.0)], 0.8, 1.0)?;
    let p = PotentialProfile::new(phi, 0.5, 2)?;
    let (pass, margin) = p.check()?;
    println!("bounded phi: margin {margin:.4}  pass {pass}  b_empty {:.4}", p.b_empty()?);

    // hard-core trend: phi(r) = r^-3 - 2, not integrable at the origin
    let phi = PhiTable::from_fn(|r| r.powi(-3) - 2.0, 400, 0.8, 1.0)?;
    let p = PotentialProfile::new(phi, 0.5, 2)?;
    let (eps, truncated) = find_truncation_epsilon(&p)?;
    println!(
        "diverging phi: eps {eps:.4}  truncated margin {:.4}  C_phi {:.4}",
        truncated.condition_margin()?,
        truncated.c_phi()
    );
    Ok(())
}
