//! Numerical Peierls-condition diagnostics.
//!
//! Per-contour energy gaps `E_γ̄ − Ē_γ̄` and the empirical constant
//! `b̂₊ = min gap/|γ̄|` over a corpus; the sector constant `C_d`; the
//! analytic sufficient condition for the diluted pairwise interaction; the
//! `θ_ε` volume-ratio bound with a Monte Carlo verifier; a truncation-radius
//! search for potentials diverging at the origin; and critical-activity
//! windows (base and refined).

use crate::contours::{boundary_operators, extract_contours, Contour};
use crate::energy::{EnergyValue, ModelKind, PhiTable, RadialPart, TileEnergyModel};
use crate::geometry::{dist_sq, Configuration, IBox, MarkedPoint, Site, SpinField, Tiling};
use crate::quad::{adaptive_simpson, Kahan};
use crate::rng;
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;

/// Which tiles enter the gap sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapVariant {
    /// All of γ̄.
    Full,
    /// γ̄ ∖ ∂⁻γ̄.
    MinusInnerBoundary,
}

/// `Σ_{i∈S} [E_i(ω) − Ē_i(ω)]` with `S` per the variant.
///
/// The precondition that ω achieves γ is verified by re-extracting the
/// contours of ω's occupancy field on `domain` (exterior spin = γ's type).
pub fn peierls_gap(
    model: &TileEnergyModel,
    omega: &Configuration,
    domain: &IBox,
    gamma: &Contour,
    variant: GapVariant,
) -> Result<EnergyValue> {
    let tiling = model.tiling();
    let field = crate::geometry::spin_field(omega, domain, gamma.contour_type, &tiling);
    let found = extract_contours(&field, model.sat.l, &tiling)?;
    if !found
        .iter()
        .any(|c| c.support == gamma.support && c.spins == gamma.spins)
    {
        return Err(Error::invalid("contour not achieved"));
    }
    gap_over(model, omega, gamma, variant)
}

fn gap_sites(model: &TileEnergyModel, gamma: &Contour, variant: GapVariant) -> Vec<Site> {
    match variant {
        GapVariant::Full => gamma.support.clone(),
        GapVariant::MinusInnerBoundary => {
            let set: HashSet<Site> = gamma.support.iter().copied().collect();
            let b = boundary_operators(&set, model.sat.l, &model.tiling());
            let minus: HashSet<Site> = b.bnd_minus.into_iter().collect();
            gamma
                .support
                .iter()
                .filter(|s| !minus.contains(s))
                .copied()
                .collect()
        }
    }
}

fn gap_over(
    model: &TileEnergyModel,
    omega: &Configuration,
    gamma: &Contour,
    variant: GapVariant,
) -> Result<EnergyValue> {
    let mut v = Kahan::new();
    let mut err = 0.0;
    for i in gap_sites(model, gamma, variant) {
        let e = model.tile_energy(omega, &i)?;
        v.add(e.value - model.saturated_tile_energy(omega, &i));
        err += e.err;
    }
    Ok(EnergyValue { value: v.total(), err })
}

/// Surrogate-only gap read directly from a spin field.
pub fn peierls_gap_spins(
    model: &TileEnergyModel,
    field: &SpinField,
    gamma: &Contour,
    variant: GapVariant,
) -> Result<EnergyValue> {
    let mut v = Kahan::new();
    for i in gap_sites(model, gamma, variant) {
        let e = model
            .tile_energy_spins(field, &i)
            .ok_or_else(|| Error::invalid("spin-field gaps require the surrogate model"))?;
        let ebar = model.sat.b0 * field.spin(&i) as f64;
        v.add(e - ebar);
    }
    Ok(EnergyValue::exact(v.total()))
}

/// One corpus contour in a [`PeierlsReport`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContourRecord {
    pub size: usize,
    pub gap: f64,
    pub ratio: f64,
}

/// Empirical Peierls evidence: `b̂₊ = min gap/|γ̄|` over a contour corpus.
/// Stochastic lower-bound evidence, not a proof.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeierlsReport {
    pub model: String,
    pub variant: GapVariant,
    pub records: Vec<ContourRecord>,
    pub b_plus: f64,
    pub pass: bool,
    /// Index into `records` of the minimizer.
    pub witness: Option<usize>,
}

/// Hand-built extreme occupancy patterns on a `side × side` 2-D box under
/// background ♯: single islands of several sizes, a slab, and a
/// checkerboard block.
pub fn adversarial_fields(side: i64, sharp: u8) -> Vec<SpinField> {
    let dom = IBox::cube(0, side, 2).unwrap();
    let mid = side / 2;
    let mut out = Vec::new();
    let flip = 1 - sharp;
    // islands 1×1 .. 3×3
    for w in 1..=3i64 {
        let mut f = SpinField::constant(dom.clone(), sharp, sharp);
        for dx in 0..w {
            for dy in 0..w {
                f.set(&Site::new(&[mid + dx, mid + dy]), flip);
            }
        }
        out.push(f);
    }
    // slab across the middle, kept clear of the boundary margin
    let mut slab = SpinField::constant(dom.clone(), sharp, sharp);
    for x in 6..side - 6 {
        for dy in 0..2 {
            slab.set(&Site::new(&[x, mid + dy]), flip);
        }
    }
    out.push(slab);
    // checkerboard block
    let mut cb = SpinField::constant(dom.clone(), sharp, sharp);
    for dx in 0..4 {
        for dy in 0..4 {
            if (dx + dy) % 2 == 0 {
                cb.set(&Site::new(&[mid - 2 + dx, mid - 2 + dy]), flip);
            }
        }
    }
    out.push(cb);
    out
}

/// Background-♯ field with random rectangular islands of the opposite spin,
/// kept `collar` sites away from the domain boundary.
pub fn random_island_field<R: Rng>(
    side: i64,
    sharp: u8,
    islands: usize,
    collar: i64,
    rng: &mut R,
) -> SpinField {
    let dom = IBox::cube(0, side, 2).unwrap();
    let mut f = SpinField::constant(dom.clone(), sharp, sharp);
    for _ in 0..islands {
        let w = rng.gen_range(1..=5i64);
        let h = rng.gen_range(1..=5i64);
        if side - collar - w <= collar || side - collar - h <= collar {
            continue;
        }
        let x = rng.gen_range(collar..side - collar - w);
        let y = rng.gen_range(collar..side - collar - h);
        for dx in 0..w {
            for dy in 0..h {
                f.set(&Site::new(&[x + dx, y + dy]), 1 - sharp);
            }
        }
    }
    f
}

/// Place points realizing an occupancy field: every occupied tile gets one
/// uniform point plus a small random surplus, marks drawn per the model.
pub fn configuration_for_field<R: Rng>(
    model: &TileEnergyModel,
    field: &SpinField,
    rng: &mut R,
) -> Result<Configuration> {
    let tiling = model.tiling();
    let delta = tiling.delta;
    let window = field.domain.hat(&tiling);
    let mark = |rng: &mut R| match model.kind {
        ModelKind::AreaInteraction { r1, r2, .. } => Some(rng.gen_range(r1..=r2)),
        _ => None,
    };
    let mut pts = Vec::new();
    for s in field.domain.sites() {
        if field.spin(&s) == 1 {
            let (lo, _) = tiling.tile_bounds(&s);
            let n = 1 + (rng.gen_range(0.0f64..1.0) < 0.3) as usize;
            for _ in 0..n {
                let pos = lo.iter().map(|c| c + rng.gen_range(0.0..delta)).collect();
                let m = mark(rng);
                pts.push(MarkedPoint { pos, mark: m });
            }
        }
    }
    Configuration::new(pts, window)
}

/// Evaluate `b̂₊` over a corpus of occupancy fields: each field is realized
/// as a configuration (seeded per field), its contours extracted, and every
/// contour's gap recorded.
pub fn estimate_b_plus(
    model: &TileEnergyModel,
    fields: &[SpinField],
    variant: GapVariant,
    seed: u64,
) -> Result<PeierlsReport> {
    let tiling = model.tiling();
    let per_field: Vec<Result<Vec<ContourRecord>>> = fields
        .par_iter()
        .enumerate()
        .map(|(k, field)| {
            let contours = extract_contours(field, model.sat.l, &tiling)?;
            let mut recs = Vec::new();
            if contours.is_empty() {
                return Ok(recs);
            }
            let surrogate = matches!(model.kind, ModelKind::Surrogate(_));
            let omega = if surrogate {
                None
            } else {
                let mut r = rng::stream(seed, k as u64);
                Some(configuration_for_field(model, field, &mut r)?)
            };
            for gamma in &contours {
                let g = match &omega {
                    Some(w) => gap_over(model, w, gamma, variant)?,
                    None => peierls_gap_spins(model, field, gamma, variant)?,
                };
                let size = gamma.support.len();
                recs.push(ContourRecord {
                    size,
                    gap: g.value,
                    ratio: g.value / size as f64,
                });
            }
            Ok(recs)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_field {
        records.extend(r?);
    }
    if records.is_empty() {
        return Err(Error::invalid("corpus produced no contours"));
    }
    let (witness, b_plus) = records
        .iter()
        .enumerate()
        .map(|(k, r)| (k, r.ratio))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok(PeierlsReport {
        model: model.kind_name().to_string(),
        variant,
        records,
        b_plus,
        pass: b_plus > 0.0,
        witness: Some(witness),
    })
}

/// `C_d = ∫₀^{π/3} sin^{d−2}θ dθ / ∫₀^{π} sin^{d−2}θ dθ` (d ≥ 2).
///
/// The displayed integrals are ill-defined for d = 1; that case is rejected.
pub fn cd_constant(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid(
            "C_d is defined for d >= 2; the d = 1 convention is unspecified",
        ));
    }
    let p = (d as i32 - 2) as f64;
    let f = move |t: f64| t.sin().powf(p);
    let num = adaptive_simpson(&f, 0.0, PI / 3.0, 1e-13);
    let den = adaptive_simpson(&f, 0.0, PI, 1e-13);
    Ok(num / den)
}

/// `y ∈ B_sec(z, x)`: `|y − z| ≤ R` and `angle(y − z, x − z) ≤ π/3`.
pub fn sector_contains(z: &[f64], x: &[f64], r: f64, y: &[f64]) -> bool {
    let yz2 = dist_sq(y, z);
    if yz2 > r * r {
        return false;
    }
    let xz2 = dist_sq(x, z);
    assert!(xz2 > 0.0, "sector apex direction requires x != z");
    if yz2 == 0.0 {
        return true;
    }
    let dot: f64 = y
        .iter()
        .zip(z.iter())
        .zip(x.iter())
        .map(|((yi, zi), xi)| (yi - zi) * (xi - zi))
        .sum();
    // cos(angle) ≥ cos(π/3) = 1/2
    dot >= 0.5 * (yz2 * xz2).sqrt()
}

/// A radial pair potential with its dilution scale, `R₁`, `R₂`, dimension,
/// and the derived integrals of Theorem-2 type conditions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub phi: PhiTable,
    /// Dilution scale `R`.
    pub r: f64,
    pub d: usize,
}

impl PotentialProfile {
    pub fn new(phi: PhiTable, r: f64, d: usize) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid("dilution scale R must be positive"));
        }
        if d < 1 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(PotentialProfile { phi, r, d })
    }

    pub fn c_phi(&self) -> f64 {
        self.phi.c_phi(self.d)
    }

    /// `∫_{B(0,R)} φ⁺`.
    pub fn pos_in_ball_r(&self) -> f64 {
        self.phi.radial_integral(self.d, 0.0, self.r, RadialPart::Pos)
    }

    /// `∫_{B(0,R₁)∖B(0,R)} φ⁺` (0 when R₁ ≤ R).
    pub fn pos_in_shell(&self) -> f64 {
        self.phi
            .radial_integral(self.d, self.r, self.phi.r1, RadialPart::Pos)
    }

    /// `∫_{R^d} φ⁻`.
    pub fn neg_total(&self) -> f64 {
        self.phi
            .radial_integral(self.d, 0.0, self.phi.r2, RadialPart::Neg)
    }

    /// `margin = C_d ∫_{B(0,R)}φ⁺ − [(R₁/R)^d − 1] ∫_{B(0,R₁)∖B(0,R)}φ⁺ − ∫φ⁻`.
    pub fn condition_margin(&self) -> Result<f64> {
        let cd = cd_constant(self.d)?;
        let ratio = (self.phi.r1 / self.r).powi(self.d as i32) - 1.0;
        Ok(cd * self.pos_in_ball_r() - ratio.max(0.0) * self.pos_in_shell() - self.neg_total())
    }

    /// The analytic sufficient condition: `(margin > 0, margin)`.
    pub fn check(&self) -> Result<(bool, f64)> {
        let m = self.condition_margin()?;
        Ok((m > 0.0, m))
    }

    /// Vacuum-route constant `𝔟_∅ = C_d ∫_{B(0,R₁)}φ⁺ − ∫φ⁻`.
    pub fn b_empty(&self) -> Result<f64> {
        let cd = cd_constant(self.d)?;
        Ok(cd * self.phi.radial_integral(self.d, 0.0, self.phi.r1, RadialPart::Pos)
            - self.neg_total())
    }
}

/// `θ_ε = ε^d / (R₁^d − ε^d)`, requiring `0 < ε < R₁`.
pub fn theta_epsilon(eps: f64, r1: f64, d: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < r1) {
        return Err(Error::invalid("need 0 < eps < R1"));
    }
    let e = eps.powi(d as i32);
    Ok(e / (r1.powi(d as i32) - e))
}

/// Exit distance from the halo `L_R(ω)` along ray `y + t·u`: the first `t`
/// not covered by any ball `B(x, R)`, `x ∈ ω`.
fn ray_exit(y: &[f64], u: &[f64], centers: &[&[f64]], big_r: f64) -> f64 {
    let mut ivs: Vec<(f64, f64)> = Vec::new();
    for c in centers {
        // |y + t u − c|² ≤ R²  (u is a unit vector)
        let w: Vec<f64> = y.iter().zip(c.iter()).map(|(a, b)| a - b).collect();
        let b: f64 = w.iter().zip(u.iter()).map(|(wi, ui)| wi * ui).sum();
        let c0: f64 = w.iter().map(|wi| wi * wi).sum::<f64>() - big_r * big_r;
        let disc = b * b - c0;
        if disc <= 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let (t0, t1) = (-b - s, -b + s);
        if t1 > 0.0 {
            ivs.push((t0.max(0.0), t1));
        }
    }
    ivs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut covered = 0.0f64;
    for (a, b) in ivs {
        if a > covered + 1e-12 {
            break;
        }
        covered = covered.max(b);
    }
    covered
}

/// Distance from `y` to the complement of the halo, approximated from above
/// by the minimum exit distance over a fan of `n_rays` directions
/// (exact interval arithmetic per ray; d ≤ 2). Distances beyond `t_max`
/// are reported as `t_max`; only balls that can cover `[0, t_max]` enter.
pub fn escape_distance(
    y: &[f64],
    centers: &[&[f64]],
    big_r: f64,
    n_rays: usize,
    t_max: f64,
) -> f64 {
    let reach = (big_r + t_max) * (big_r + t_max);
    let near: Vec<&[f64]> = centers
        .iter()
        .filter(|c| dist_sq(y, c) <= reach)
        .copied()
        .collect();
    let d = match y.len() {
        1 => {
            let a = ray_exit(y, &[1.0], &near, big_r);
            let b = ray_exit(y, &[-1.0], &near, big_r);
            a.min(b)
        }
        2 => (0..n_rays)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n_rays as f64;
                ray_exit(y, &[th.cos(), th.sin()], &near, big_r)
            })
            .fold(f64::INFINITY, f64::min),
        _ => panic!("escape distance implemented for d <= 2"),
    };
    d.min(t_max)
}

/// Monte Carlo check of the θ_ε volume bound on one achieved contour:
/// estimates `V_{ω,γ,ε} / (V_{ω,γ,R₁} − V_{ω,γ,ε})` by uniform sampling
/// over γ̂; membership in `V_{ω,γ,r}` is `y ∈ L_R(ω)` and escape distance
/// ≤ `r`. Returns `(ratio, stderr)` by batch means over 20 batches.
pub fn mc_check_theta(
    omega: &Configuration,
    gamma: &Contour,
    eps: f64,
    big_r: f64,
    r1: f64,
    tiling: &Tiling,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < r1) {
        return Err(Error::invalid("need 0 < eps < R1"));
    }
    let centers: Vec<&[f64]> = omega.points.iter().map(|p| p.pos.as_slice()).collect();
    let delta = tiling.delta;
    let n_batches = 20usize;
    let per = (samples / n_batches).max(1);
    let ratios: Vec<f64> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b as u64);
            let mut n_eps = 0usize;
            let mut n_r1 = 0usize;
            for _ in 0..per {
                let site = gamma.support[r.gen_range(0..gamma.support.len())];
                let (lo, _) = tiling.tile_bounds(&site);
                let y: Vec<f64> = lo.iter().map(|c| c + r.gen_range(0.0..delta)).collect();
                let in_halo = centers.iter().any(|c| dist_sq(&y, c) <= big_r * big_r);
                if !in_halo {
                    continue;
                }
                let esc = escape_distance(&y, &centers, big_r, 256, r1 * (1.0 + 1e-9));
                if esc <= r1 {
                    n_r1 += 1;
                    if esc <= eps {
                        n_eps += 1;
                    }
                }
            }
            if n_r1 > n_eps {
                n_eps as f64 / (n_r1 - n_eps) as f64
            } else {
                f64::NAN
            }
        })
        .collect();
    let good: Vec<f64> = ratios.into_iter().filter(|x| x.is_finite()).collect();
    if good.len() < n_batches / 2 {
        return Err(Error::numerical(
            "theta MC: too few batches with a nonempty denominator",
        ));
    }
    let m = good.iter().sum::<f64>() / good.len() as f64;
    let var = good.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        / (good.len() as f64 - 1.0).max(1.0);
    Ok((m, (var / good.len() as f64).sqrt()))
}

/// Bisection for a truncation radius: the largest tabulated-scale ε below
/// `min{R₁, R}` whose truncated potential `φ_ε` (constant `φ(ε)` on `[0,ε]`)
/// passes the analytic condition. Errors with "not found" when no ε above
/// the table's smallest radius passes.
pub fn find_truncation_epsilon(profile: &PotentialProfile) -> Result<(f64, PotentialProfile)> {
    let hi0 = profile.phi.r1.min(profile.r);
    let lo0 = profile.phi.min_radius();
    if lo0 >= hi0 {
        return Err(Error::invalid("phi table has no resolution below min{R1, R}"));
    }
    let passes = |eps: f64| -> Result<bool> {
        let p = PotentialProfile::new(profile.phi.truncated_at(eps)?, profile.r, profile.d)?;
        Ok(p.check()?.0)
    };
    // walk down from min{R1, R} until the condition holds
    let mut hi = hi0;
    let mut eps = hi0;
    let mut found = false;
    while eps > lo0 {
        if passes(eps)? {
            found = true;
            break;
        }
        hi = eps;
        eps *= 0.5;
    }
    if !found {
        if eps <= lo0 && passes(lo0)? {
            eps = lo0;
        } else {
            return Err(Error::invalid(
                "not found: no truncation radius above the table resolution passes",
            ));
        }
    }
    // refine upward: the boundary between eps (passing) and hi (failing)
    let (mut pass_eps, mut fail_hi) = (eps, hi);
    if (fail_hi - pass_eps) > 0.0 && fail_hi < hi0 + 1e-15 && fail_hi != pass_eps {
        for _ in 0..60 {
            let mid = 0.5 * (pass_eps + fail_hi);
            if mid <= pass_eps || mid >= fail_hi {
                break;
            }
            if passes(mid)? {
                pass_eps = mid;
            } else {
                fail_hi = mid;
            }
        }
    }
    // back off from the crossing so the returned radius passes with slack
    // instead of sitting on the margin's zero
    let backed = 0.9 * pass_eps;
    if backed > lo0 && passes(backed)? {
        pass_eps = backed;
    }
    let out = PotentialProfile::new(profile.phi.truncated_at(pass_eps)?, profile.r, profile.d)?;
    Ok((pass_eps, out))
}

/// Base window `z_β^± = (e^{β𝔟}/δ^d)·ln(1 + e^{β𝔟₀ ∓ 2 / ± 2})`.
pub fn critical_window(beta: f64, b: f64, b0: f64, delta: f64, d: usize) -> Result<(f64, f64)> {
    if !(beta > 0.0 && delta > 0.0) {
        return Err(Error::invalid("need beta > 0 and delta > 0"));
    }
    let vol = delta.powi(d as i32);
    let pre = (beta * b).exp() / vol;
    let z_minus = pre * (beta * b0 - 2.0).exp().ln_1p();
    let z_plus = pre * (beta * b0 + 2.0).exp().ln_1p();
    debug_assert!(z_minus < z_plus);
    Ok((z_minus, z_plus))
}

/// Refined window (𝔟 = 0): `a(β) = min{2, e^{−βc}}`,
/// `ẑ_β^± = ln(1 + e^{β δ^d C_φ ± a(β)}) / δ^d`.
pub fn refined_window(
    beta: f64,
    c_phi: f64,
    c: f64,
    delta: f64,
    d: usize,
) -> Result<(f64, f64)> {
    if !(beta > 0.0 && delta > 0.0 && c > 0.0) {
        return Err(Error::invalid("need beta > 0, delta > 0, c > 0"));
    }
    let vol = delta.powi(d as i32);
    let a = 2.0f64.min((-beta * c).exp());
    let z_minus = (beta * vol * c_phi - a).exp().ln_1p() / vol;
    let z_plus = (beta * vol * c_phi + a).exp().ln_1p() / vol;
    Ok((z_minus, z_plus))
}

/// `a(β) = min{2, e^{−βc}}`.
pub fn a_beta(beta: f64, c: f64) -> f64 {
    2.0f64.min((-beta * c).exp())
}
