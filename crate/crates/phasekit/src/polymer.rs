//! Exact finite-volume engine on the factorizing surrogate.
//!
//! Because the surrogate energy depends on a configuration only through its
//! occupancy field, every configuration integral factors into per-tile
//! weights `Z̄₀ = e^{−zδ^d}`, `Z̄₁ = e^{−β𝔟₀}(1 − e^{−zδ^d})` times pattern
//! energies. Partition functions on small index sets are then exact sums,
//! and the contour development can be checked as a numerical identity.
//!
//! In one dimension the development is evaluated by a transfer recursion
//! over site positions: a field decomposes uniquely into contours separated
//! by constant-phase runs, and runs in the opposite phase bind adjacent
//! contours into chains. In two dimensions interiors are owned by single
//! contours and the per-contour weight carries the interior partition-ratio.

use crate::contours::{
    achievable_contours, boundary_operators, extract_contours, witness_field, compatible, Contour,
};
use crate::energy::{ModelKind, PatternTable, TileEnergyModel};
use crate::geometry::{IBox, Site};
use crate::quad::Kahan;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Free-site cap for exact pattern sums.
const PARTITION_CAP: usize = 24;
/// Field cap for contour pools.
const ENUM_CAP: usize = 1 << 24;

/// Per-tile saturated weight `Z̄_♯` (activity already shifted, 𝔟 = 0).
pub fn zbar(sharp: u8, z: f64, beta: f64, b0: f64, delta: f64, d: usize) -> Result<f64> {
    if !(z > 0.0 && delta > 0.0 && beta >= 0.0) {
        return Err(Error::invalid("need z > 0, delta > 0, beta >= 0"));
    }
    let v = z * delta.powi(d as i32);
    Ok(match sharp {
        0 => (-v).exp(),
        1 => (-beta * b0).exp() * (-(-v).exp()).ln_1p().exp(),
        _ => return Err(Error::invalid("sharp must be 0 or 1")),
    })
}

/// A surrogate model together with an activity and inverse temperature.
#[derive(Clone, Debug)]
pub struct SurrogateSystem {
    pub model: TileEnergyModel,
    pub z: f64,
    pub beta: f64,
}

/// Both sides of the development identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolymerCheck {
    pub phi_direct: f64,
    pub phi_contour: f64,
    pub rel_err: f64,
    pub contours_enumerated: usize,
}

/// Geometry- and energy-summaries of one 1-D pool contour, reusable across
/// activities (the only z-dependence of `ln I_γ` is through the per-tile
/// occupancy factors).
#[derive(Clone, Debug)]
struct ChainItem {
    s: i64,
    e: i64,
    size: usize,
    occupied: usize,
    /// Σ_i V_i with V = Ē on ∂⁻γ̄ and the pattern energy elsewhere.
    v_sum: f64,
    left: u8,
    right: u8,
}

impl SurrogateSystem {
    pub fn new(model: TileEnergyModel, z: f64, beta: f64) -> Result<Self> {
        if !matches!(model.kind, ModelKind::Surrogate(_)) {
            return Err(Error::invalid("polymer engine requires the surrogate model"));
        }
        if !(z > 0.0) || !(beta >= 0.0) {
            return Err(Error::invalid("need z > 0 and beta >= 0"));
        }
        Ok(SurrogateSystem { model, z, beta })
    }

    fn table(&self) -> &PatternTable {
        match &self.model.kind {
            ModelKind::Surrogate(t) => t,
            _ => unreachable!(),
        }
    }

    fn vol(&self) -> f64 {
        self.model.sat.delta.powi(self.model.dim as i32)
    }

    pub fn zbar(&self, sharp: u8) -> f64 {
        zbar(sharp, self.z, self.beta, self.model.sat.b0, self.model.sat.delta, self.model.dim)
            .expect("validated at construction")
    }

    fn ln_zbar(&self, sharp: u8) -> f64 {
        let v = self.z * self.vol();
        match sharp {
            0 => -v,
            _ => -self.beta * self.model.sat.b0 + (-(-v).exp()).ln_1p(),
        }
    }

    /// log occupancy factor of one tile under the Poisson reference.
    fn ln_q(&self, spin: u8) -> f64 {
        let v = self.z * self.vol();
        if spin == 1 {
            (-(-v).exp()).ln_1p()
        } else {
            -v
        }
    }

    /// Exact `Z_Λ^♯` on an arbitrary finite index set: sum over occupancy
    /// patterns consistent with `(♯)_Λ`, with `Ē` on `∂Λ` and the pattern
    /// energy elsewhere, times per-tile occupancy factors.
    pub fn exact_partition(&self, sites: &[Site], sharp: u8) -> Result<f64> {
        if sites.is_empty() {
            return Ok(1.0);
        }
        let tiling = self.model.tiling();
        let set: HashSet<Site> = sites.iter().copied().collect();
        let b = boundary_operators(&set, self.model.sat.l, &tiling);
        let forced: HashSet<Site> = b.int.into_iter().collect();
        let bnd: HashSet<Site> = b.bnd.into_iter().collect();
        let mut order: Vec<Site> = set.iter().copied().collect();
        order.sort();
        let idx: HashMap<Site, usize> = order.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let free: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(_, s)| !forced.contains(s))
            .map(|(k, _)| k)
            .collect();
        if free.len() > PARTITION_CAP {
            return Err(Error::CapExceeded(format!(
                "{} free sites exceed the pattern-sum cap {PARTITION_CAP}",
                free.len()
            )));
        }
        let table = self.table();
        let b0 = self.model.sat.b0;
        let mut spins = vec![sharp; order.len()];
        let mut total = Kahan::new();
        for bits in 0..(1usize << free.len()) {
            for (j, &k) in free.iter().enumerate() {
                spins[k] = (bits >> j & 1) as u8;
            }
            let mut logw = 0.0f64;
            for (k, site) in order.iter().enumerate() {
                let s = spins[k];
                let v = if bnd.contains(site) {
                    b0 * s as f64
                } else {
                    table.energy_of_bits(table.bits_at(site, |q| spins[idx[q]]))
                };
                logw += self.ln_q(s) - self.beta * v;
            }
            total.add(logw.exp());
        }
        let z = total.total();
        // lower bound from the pure-♯ pattern alone, using 1 − e^{−v} ≥ v e^{−v}
        let n = order.len() as f64;
        let v = self.z * self.vol();
        let lower = if sharp == 0 {
            (-v * n).exp()
        } else {
            ((-(self.beta * b0 + v)) * n).exp() * v.powf(n)
        };
        assert!(
            z >= lower * (1.0 - 1e-9),
            "partition function {z} below its displayed lower bound {lower}"
        );
        Ok(z)
    }

    /// Summaries of one contour: occupied count, `Σ V_i`, `Σ Ē(σ_i)`.
    fn contour_sums(&self, c: &Contour) -> (usize, f64, f64) {
        let tiling = self.model.tiling();
        let set: HashSet<Site> = c.support.iter().copied().collect();
        let minus: HashSet<Site> = boundary_operators(&set, self.model.sat.l, &tiling)
            .bnd_minus
            .into_iter()
            .collect();
        let spin_of: HashMap<Site, u8> =
            c.support.iter().copied().zip(c.spins.iter().copied()).collect();
        let table = self.table();
        let b0 = self.model.sat.b0;
        let mut occupied = 0usize;
        let mut v_sum = 0.0;
        let mut sat_sum = 0.0;
        for (i, &s) in c.support.iter().zip(c.spins.iter()) {
            occupied += s as usize;
            sat_sum += b0 * s as f64;
            v_sum += if minus.contains(i) {
                b0 * s as f64
            } else {
                table.energy_of_bits(table.bits_at(i, |q| spin_of[q]))
            };
        }
        (occupied, v_sum, sat_sum)
    }

    /// `ln I_γ`: the single-pattern contribution of γ̄ with the contour's
    /// spins fixed and `Ē` on `∂⁻γ̄`.
    pub fn log_i_gamma(&self, c: &Contour) -> f64 {
        let (occ, v_sum, _) = self.contour_sums(c);
        let n = c.support.len();
        occ as f64 * self.ln_q(1) + (n - occ) as f64 * self.ln_q(0) - self.beta * v_sum
    }

    /// Surrogate Peierls gap of one contour: `Σ_{i∈γ̄} (V_i − Ē_i)`.
    pub fn contour_gap(&self, c: &Contour) -> f64 {
        let (_, v_sum, sat_sum) = self.contour_sums(c);
        v_sum - sat_sum
    }

    /// `w_γ^♯ = Z̄_♯^{−|γ̄|} I_γ · Z^{♯*}_{Int_{♯*}γ} / Z^{♯}_{Int_{♯*}γ}`.
    pub fn log_weight(&self, c: &Contour, sharp: u8) -> Result<f64> {
        let star = 1 - sharp;
        let base = self.log_i_gamma(c) - c.support.len() as f64 * self.ln_zbar(sharp);
        let int_star = &c.interiors[star as usize];
        if int_star.is_empty() {
            return Ok(base);
        }
        let num = self.exact_partition(int_star, star)?;
        let den = self.exact_partition(int_star, sharp)?;
        Ok(base + num.ln() - den.ln())
    }

    /// Sites of Λ on which the boundary event forces the spin to ♯.
    fn forced_of(&self, lambda: &IBox) -> HashSet<Site> {
        let set: HashSet<Site> = lambda.sites().into_iter().collect();
        boundary_operators(&set, self.model.sat.l, &self.model.tiling())
            .int
            .into_iter()
            .collect()
    }

    /// A contour placement allowed by the boundary event: support inside Λ
    /// and every forced site carrying spin ♯.
    fn admissible(&self, c: &Contour, lambda: &IBox, forced: &HashSet<Site>, sharp: u8) -> bool {
        c.support.iter().zip(c.spins.iter()).all(|(i, &s)| {
            lambda.contains(i) && (s == sharp || !forced.contains(i))
        })
    }

    fn chain_items(&self, pool: &[Contour], sharp: u8) -> Vec<ChainItem> {
        pool.iter()
            .map(|c| {
                let s = c.support.first().unwrap().0[0];
                let e = c.support.last().unwrap().0[0];
                debug_assert_eq!((e - s + 1) as usize, c.support.len());
                let (occ, v_sum, _) = self.contour_sums(c);
                let _ = sharp;
                ChainItem {
                    s,
                    e,
                    size: c.support.len(),
                    occupied: occ,
                    v_sum,
                    left: c.spins[0],
                    right: *c.spins.last().unwrap(),
                }
            })
            .collect()
    }

    fn item_log_base(&self, it: &ChainItem, sharp: u8) -> f64 {
        it.occupied as f64 * self.ln_q(1) + (it.size - it.occupied) as f64 * self.ln_q(0)
            - self.beta * it.v_sum
            - it.size as f64 * self.ln_zbar(sharp)
    }

    /// 1-D transfer recursion over site positions: contours are laid left to
    /// right with at least one constant-phase site between neighbours; runs
    /// in phase ♯* bind neighbours into a chain, and `close` maps the total
    /// ♯*-length of a finished chain to its (possibly damped) phase-ratio
    /// factor.
    fn chain_sum(
        &self,
        items: &[ChainItem],
        lambda: &IBox,
        sharp: u8,
        close: &dyn Fn(usize) -> f64,
    ) -> f64 {
        let lo = lambda.lo.0[0];
        let hi = lambda.hi.0[0];
        let n = (hi - lo + 1) as usize;
        let star = 1 - sharp;
        // index x = position − (lo − 1); m = ♯*-sites of the open chain
        let mut f_sharp = vec![0.0f64; n + 1];
        let mut f_star = vec![vec![0.0f64; n + 2]; n + 1];
        f_sharp[0] = 1.0;
        let mut by_end: HashMap<i64, Vec<usize>> = HashMap::new();
        for (k, it) in items.iter().enumerate() {
            by_end.entry(it.e).or_default().push(k);
        }
        for x in lo..=hi {
            let xi = (x - lo + 1) as usize;
            f_sharp[xi] = f_sharp[xi - 1];
            for m in 1..=xi {
                f_star[xi][m] = f_star[xi - 1][m - 1];
            }
            for &k in by_end.get(&x).into_iter().flatten() {
                let it = &items[k];
                let base = self.item_log_base(it, sharp).exp();
                let prev = (it.s - 1 - lo + 1) as usize; // index of s−2
                if prev < 1 {
                    continue;
                }
                let prev = prev - 1;
                match (it.left == sharp, it.right == sharp) {
                    (true, true) => f_sharp[xi] += f_sharp[prev] * base,
                    (true, false) => f_star[xi][0] += f_sharp[prev] * base,
                    (false, false) => {
                        for m in (0..=prev).rev() {
                            let add = f_star[prev][m] * base;
                            if add != 0.0 {
                                f_star[xi][m + 1] += add;
                            }
                        }
                    }
                    (false, true) => {
                        for m in 0..=prev {
                            if f_star[prev][m] != 0.0 {
                                f_sharp[xi] += f_star[prev][m] * base * close(m + 1);
                            }
                        }
                    }
                }
                let _ = star;
            }
        }
        f_sharp[n]
    }

    /// Both sides of the development identity on Λ under boundary ♯.
    pub fn polymer_development(&self, lambda: &IBox, sharp: u8) -> Result<PolymerCheck> {
        let tiling = self.model.tiling();
        let l = self.model.sat.l;
        let direct =
            self.exact_partition(&lambda.sites(), sharp)?.ln() - lambda.len() as f64 * self.ln_zbar(sharp);
        let phi_direct = direct.exp();
        let forced = self.forced_of(lambda);
        let pool: Vec<Contour> = achievable_contours(lambda, sharp, l, &tiling, ENUM_CAP)?
            .into_iter()
            .filter(|c| self.admissible(c, lambda, &forced, sharp))
            .collect();
        let phi_contour = if self.model.dim == 1 {
            let items = self.chain_items(&pool, sharp);
            let ratio = (self.ln_zbar(1 - sharp) - self.ln_zbar(sharp)).exp();
            self.chain_sum(&items, lambda, sharp, &|m| ratio.powi(m as i32))
        } else {
            // flat sum over pairwise-compatible subsets of singly-achievable
            // contours, per-contour interior-ratio weights
            let margin = 2 * (2.0 * l / tiling.delta).ceil() as i64 + 2;
            let domain = lambda.grown(margin);
            let single: Vec<&Contour> = pool
                .iter()
                .filter(|c| {
                    let f = witness_field(&[(*c).clone()], &domain, sharp);
                    matches!(extract_contours(&f, l, &tiling), Ok(got) if got.len() == 1 && &got[0] == *c)
                })
                .collect();
            let weights: Vec<f64> = single
                .iter()
                .map(|c| self.log_weight(c, sharp).map(f64::exp))
                .collect::<Result<_>>()?;
            let mut total = 0.0f64;
            fn rec(
                single: &[&Contour],
                weights: &[f64],
                start: usize,
                stack: &mut Vec<usize>,
                acc: f64,
                total: &mut f64,
            ) {
                *total += acc;
                for k in start..single.len() {
                    if stack.iter().all(|&j| compatible(single[j], single[k])) {
                        stack.push(k);
                        rec(single, weights, k + 1, stack, acc * weights[k], total);
                        stack.pop();
                    }
                }
            }
            rec(&single, &weights, 0, &mut Vec::new(), 1.0, &mut total);
            total
        };
        let rel_err = (phi_direct - phi_contour).abs() / phi_direct.abs().max(f64::MIN_POSITIVE);
        Ok(PolymerCheck { phi_direct, phi_contour, rel_err, contours_enumerated: pool.len() })
    }
}

/// τ-stability report over a contour list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauReport {
    pub tau: f64,
    pub checked: usize,
    /// Indices with `w_γ > e^{−τ|γ̄|}`.
    pub weight_violations: Vec<usize>,
    /// Indices violating `I_γ ≤ Z̄₀^{|γ̄₀|} Z̄₁^{|γ̄₁|} e^{−β𝔟₊|γ̄|}`.
    pub i_bound_violations: Vec<usize>,
    /// Finite-difference `|∂w/∂z| ≤ |γ̄|^{d/(d−1)} e^{−τ|γ̄|}` shape check;
    /// `None` in one dimension, where the displayed exponent is undefined.
    pub derivative_shape_ok: Option<bool>,
    pub note: String,
}

/// Check `w_γ^♯ ≤ e^{−τ|γ̄|}` and the `I_γ` bound with a measured `𝔟₊`.
pub fn tau_stability_scan(
    system: &SurrogateSystem,
    contours: &[Contour],
    sharp: u8,
    tau: f64,
    b_plus: f64,
) -> Result<TauReport> {
    let note = if tau <= 0.0 {
        "tau nonpositive; stability vacuous".to_string()
    } else {
        String::new()
    };
    let mut weight_violations = Vec::new();
    let mut i_bound_violations = Vec::new();
    let mut shape_ok = true;
    let tol = 1e-9;
    for (k, c) in contours.iter().enumerate() {
        let n = c.support.len() as f64;
        let logw = system.log_weight(c, sharp)?;
        if logw > -tau * n + tol {
            weight_violations.push(k);
        }
        let occ = c.spins.iter().map(|&s| s as usize).sum::<usize>();
        let log_bound = occ as f64 * system.ln_zbar(1)
            + (c.support.len() - occ) as f64 * system.ln_zbar(0)
            - system.beta * b_plus * n;
        if system.log_i_gamma(c) > log_bound + tol {
            i_bound_violations.push(k);
        }
        if system.model.dim >= 2 && tau > 0.0 {
            let h = 1e-5 * system.z;
            let wp = SurrogateSystem::new(system.model.clone(), system.z + h, system.beta)?
                .log_weight(c, sharp)?
                .exp();
            let wm = SurrogateSystem::new(system.model.clone(), system.z - h, system.beta)?
                .log_weight(c, sharp)?
                .exp();
            let dw = ((wp - wm) / (2.0 * h)).abs();
            let d = system.model.dim as f64;
            if dw > n.powf(d / (d - 1.0)) * (-tau * n).exp() + tol {
                shape_ok = false;
            }
        }
    }
    let derivative_shape_ok = if system.model.dim >= 2 && tau > 0.0 { Some(shape_ok) } else { None };
    Ok(TauReport {
        tau,
        checked: contours.len(),
        weight_violations,
        i_bound_violations,
        derivative_shape_ok,
        note,
    })
}

/// Truncation diagnostics at a fixed rank.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationState {
    pub rank: usize,
    /// `ψ̂_k^♯` per rank (index 0 = rank 0) and boundary.
    pub psi_by_rank: Vec<[f64; 2]>,
    /// Finite-size spread (max − min over the box ladder) at the final rank.
    pub spread: [f64; 2],
    /// `a_n^♯ = ψ̂_n − ψ̂_n^♯`.
    pub a: [f64; 2],
    pub b_plus: f64,
    /// `‖κ′‖ = 12/(β𝔟₊)` for the cubic smoothstep between `β𝔟₊/8` and `β𝔟₊/4`.
    pub kappa_norm: f64,
    pub monotone: bool,
}

impl TruncationState {
    pub fn psi(&self, sharp: u8) -> f64 {
        self.psi_by_rank.last().unwrap()[sharp as usize]
    }
}

/// C¹ cubic smoothstep cut-off: 1 below `lo`, 0 above `hi`.
fn kappa(t: f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return if t <= lo { 1.0 } else { 0.0 };
    }
    if t <= lo {
        1.0
    } else if t >= hi {
        0.0
    } else {
        let u = (t - lo) / (hi - lo);
        1.0 - u * u * (3.0 - 2.0 * u)
    }
}

/// Pressure estimates over a ladder of 1-D boxes: contour pools are swept
/// once per box and reused across activities and ranks.
pub struct PressureLadder {
    pub model: TileEnergyModel,
    pub beta: f64,
    pub boxes: Vec<IBox>,
    /// Pool items per box and boundary spin.
    items: Vec<[Vec<ChainItem>; 2]>,
    pub b_plus: f64,
}

impl PressureLadder {
    pub fn new(model: TileEnergyModel, beta: f64, boxes: Vec<IBox>) -> Result<Self> {
        if !matches!(model.kind, ModelKind::Surrogate(_)) {
            return Err(Error::invalid("pressure ladder requires the surrogate model"));
        }
        if model.dim != 1 {
            return Err(Error::invalid("the pressure ladder is implemented for d = 1 boxes"));
        }
        if boxes.is_empty() {
            return Err(Error::invalid("empty box ladder"));
        }
        // z enters items only through closed-form per-tile factors; build at
        // any valid activity
        let probe = SurrogateSystem::new(model.clone(), 1.0, beta)?;
        let tiling = model.tiling();
        let l = model.sat.l;
        let mut items = Vec::new();
        let mut b_plus = f64::INFINITY;
        for b in &boxes {
            let mut per = [Vec::new(), Vec::new()];
            for sharp in [0u8, 1] {
                let forced = probe.forced_of(b);
                let pool: Vec<Contour> = achievable_contours(b, sharp, l, &tiling, ENUM_CAP)?
                    .into_iter()
                    .filter(|c| probe.admissible(c, b, &forced, sharp))
                    .collect();
                for c in &pool {
                    let gap = probe.contour_gap(c);
                    b_plus = b_plus.min(gap / c.support.len() as f64);
                }
                per[sharp as usize] = probe.chain_items(&pool, sharp);
            }
            items.push(per);
        }
        if !b_plus.is_finite() {
            b_plus = 0.0;
        }
        Ok(PressureLadder { model, beta, boxes, items, b_plus })
    }

    pub fn kappa_norm(&self) -> f64 {
        if self.beta * self.b_plus > 0.0 {
            12.0 / (self.beta * self.b_plus)
        } else {
            f64::INFINITY
        }
    }

    /// `ψ̂` per rank up to `max_rank` at activity `z`.
    pub fn truncated_pressures(&self, z: f64, max_rank: usize) -> Result<TruncationState> {
        let sys = SurrogateSystem::new(self.model.clone(), z, self.beta)?;
        let vol = sys.vol();
        let mut psi_by_rank: Vec<[f64; 2]> = vec![[sys.ln_zbar(0) / vol, sys.ln_zbar(1) / vol]];
        let mut spread = [0.0f64; 2];
        let lo_thr = self.beta * self.b_plus / 8.0;
        let hi_thr = self.beta * self.b_plus / 4.0;
        let mut monotone = true;
        for k in 1..=max_rank {
            let prev = psi_by_rank[k - 1];
            let mut cur = [f64::NEG_INFINITY; 2];
            for sharp in [0usize, 1] {
                let star = 1 - sharp;
                let a_diff = prev[star] - prev[sharp];
                let ratio = (sys.ln_zbar(star as u8) - sys.ln_zbar(sharp as u8)).exp();
                let close = |m: usize| -> f64 {
                    let arg = a_diff * vol * (m as f64).powf(1.0 / self.model.dim as f64);
                    ratio.powf(m as f64 * kappa(arg, lo_thr, hi_thr))
                };
                let mut lo = f64::INFINITY;
                for (b, per) in self.boxes.iter().zip(self.items.iter()) {
                    let phi = sys.chain_sum(&per[sharp], b, sharp as u8, &close);
                    let psi = sys.ln_zbar(sharp as u8) / vol + phi.ln() / (vol * b.len() as f64);
                    cur[sharp] = cur[sharp].max(psi);
                    lo = lo.min(psi);
                }
                spread[sharp] = cur[sharp] - lo;
                if cur[sharp] < prev[sharp] - 1e-12 {
                    monotone = false;
                }
            }
            psi_by_rank.push(cur);
        }
        let last = *psi_by_rank.last().unwrap();
        let top = last[0].max(last[1]);
        Ok(TruncationState {
            rank: max_rank,
            psi_by_rank,
            spread,
            a: [top - last[0], top - last[1]],
            b_plus: self.b_plus,
            kappa_norm: self.kappa_norm(),
            monotone,
        })
    }

    /// `Ĝ(z) = ψ̂^{(1)} − ψ̂^{(0)}` at the given rank.
    pub fn g(&self, z: f64, rank: usize) -> Result<f64> {
        let ts = self.truncated_pressures(z, rank)?;
        Ok(ts.psi(1) - ts.psi(0))
    }

    /// Bisection on `Ĝ` inside the window; requires a sign change.
    pub fn bracket_critical_activity(
        &self,
        window: (f64, f64),
        rank: usize,
        tol: f64,
    ) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = window;
        if !(lo < hi && tol > 0.0) {
            return Err(Error::invalid("need z_minus < z_plus and tol > 0"));
        }
        let glo = self.g(lo, rank)?;
        let ghi = self.g(hi, rank)?;
        if !(glo < 0.0 && ghi > 0.0) {
            return Err(Error::numerical(format!(
                "no sign change at this rank/size: G({lo}) = {glo}, G({hi}) = {ghi}"
            )));
        }
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.g(mid, rank)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo, hi))
    }

    /// `ρ = z + z ∂ψ̂^♯/∂z` by central differences; returns the half-step
    /// estimate and the step-halving discrepancy.
    pub fn density(&self, sharp: u8, z: f64, h: f64, rank: usize) -> Result<(f64, f64)> {
        if !(h > 0.0 && z - h > 0.0) {
            return Err(Error::invalid("need 0 < h < z"));
        }
        let rho = |hh: f64| -> Result<f64> {
            let p = self.truncated_pressures(z + hh, rank)?.psi(sharp);
            let m = self.truncated_pressures(z - hh, rank)?.psi(sharp);
            Ok(z + z * (p - m) / (2.0 * hh))
        };
        let r1 = rho(h)?;
        let r2 = rho(h / 2.0)?;
        Ok((r2, (r2 - r1).abs()))
    }
}
