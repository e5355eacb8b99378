//! Per-tile energies `E_0` with saturation data, the three continuum models
//! (K-NN Strauss, area interaction, diluted pairwise) plus a factorizing
//! lattice surrogate, and the derived Hamiltonian / local-energy functions.
//!
//! Every model reports its finite range `r`, so that `E_i(ω)` depends only on
//! `ω` restricted to `T_i ⊕ B(0, r)`, together with the saturation data
//! `(δ, L, 𝔟, 𝔟₀)`: on locally homogeneous neighborhoods of radius `L` the
//! tile energy collapses to `Ē_0(ω) = 𝔟·N_{T_0}(ω) + 𝔟₀·1{ω_{T_0} ≠ ∅}`.

use crate::geometry::{
    ball_offsets, dist_sq, occupancy, sample_poisson, Configuration, IBox, MarkLaw, MarkedPoint,
    Site, SpinField, Tiling, Window,
};
use crate::quad::{sphere_surface, Kahan};
use crate::rng;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A computed energy together with a reported numerical error bound
/// (0 for combinatorially exact models).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub value: f64,
    pub err: f64,
}

impl EnergyValue {
    pub fn exact(value: f64) -> Self {
        EnergyValue { value, err: 0.0 }
    }
}

/// Saturation data `(δ, L, 𝔟, 𝔟₀)` of a tile-energy family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationData {
    /// Tile side.
    pub delta: f64,
    /// Homogeneity radius `L`.
    pub l: f64,
    /// Per-point saturated energy `𝔟`.
    pub b: f64,
    /// Per-occupied-tile saturated energy `𝔟₀`.
    pub b0: f64,
}

/// Which signed part of a radial profile to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialPart {
    Full,
    Pos,
    Neg,
}

/// A radial potential tabulated as `(radius, value)` samples with linear
/// interpolation, positive-support radius `R₁`, and support radius `R₂`
/// (`φ ≡ 0` beyond `R₂`; constant extension below the first sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiTable {
    rs: Vec<f64>,
    vs: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
}

impl PhiTable {
    pub fn new(samples: Vec<(f64, f64)>, r1: f64, r2: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("phi table needs at least one sample"));
        }
        let mut s = samples;
        s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if s.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("phi table has duplicate radii"));
        }
        if s.iter().any(|(r, v)| !r.is_finite() || !v.is_finite() || *r < 0.0) {
            return Err(Error::invalid("phi table entries must be finite, radii nonnegative"));
        }
        if !(r1 > 0.0 && r1 <= r2) {
            return Err(Error::invalid("need 0 < R1 <= R2"));
        }
        Ok(PhiTable {
            rs: s.iter().map(|x| x.0).collect(),
            vs: s.iter().map(|x| x.1).collect(),
            r1,
            r2,
        })
    }

    /// Build a table by sampling `f` on `n+1` equispaced radii in `(0, r2]`.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, n: usize, r1: f64, r2: f64) -> Result<Self> {
        let samples: Vec<(f64, f64)> = (1..=n)
            .map(|k| {
                let r = r2 * k as f64 / n as f64;
                (r, f(r))
            })
            .collect();
        PhiTable::new(samples, r1, r2)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rs.iter().copied().zip(self.vs.iter().copied())
    }

    pub fn value(&self, r: f64) -> f64 {
        if r > self.r2 {
            return 0.0;
        }
        if r <= self.rs[0] {
            return self.vs[0];
        }
        match self.rs.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(k) => self.vs[k],
            Err(k) => {
                if k >= self.rs.len() {
                    // constant extension beyond the last sample, up to r2
                    *self.vs.last().unwrap()
                } else {
                    let (p, q) = (self.rs[k - 1], self.rs[k]);
                    let t = (r - p) / (q - p);
                    self.vs[k - 1] * (1.0 - t) + self.vs[k] * t
                }
            }
        }
    }

    /// Piecewise-linear segments of the profile on `[0, r2]`:
    /// `(a, b, value_at_a, value_at_b)`.
    fn segments(&self, lo: f64, hi: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut brk: Vec<f64> = vec![lo, hi];
        for &r in &self.rs {
            if r > lo && r < hi {
                brk.push(r);
            }
        }
        brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brk.dedup();
        brk.windows(2)
            .map(|w| (w[0], w[1], self.value(w[0]), self.value(w[1])))
            .collect()
    }

    /// Exact `∫_a^b S_d r^{d-1} φ^{part}(r) dr` (piecewise-polynomial
    /// antiderivatives; no quadrature error beyond rounding).
    pub fn radial_integral(&self, d: usize, a: f64, b: f64, part: RadialPart) -> f64 {
        let lo = a.max(0.0);
        let hi = b.min(self.r2);
        if hi <= lo {
            return 0.0;
        }
        let sd = sphere_surface(d);
        let mut acc = Kahan::new();
        for (p, q, vp, vq) in self.segments(lo, hi) {
            // φ(r) = α + β r on [p, q]
            let beta = if q > p { (vq - vp) / (q - p) } else { 0.0 };
            let alpha = vp - beta * p;
            let prim = |r: f64| {
                sd * (alpha * r.powi(d as i32) / d as f64
                    + beta * r.powi(d as i32 + 1) / (d as f64 + 1.0))
            };
            let mut pieces: Vec<(f64, f64)> = vec![(p, q)];
            if beta != 0.0 {
                let root = -alpha / beta;
                if root > p && root < q {
                    pieces = vec![(p, root), (root, q)];
                }
            }
            for (u, v) in pieces {
                let mid_val = alpha + beta * 0.5 * (u + v);
                let keep = match part {
                    RadialPart::Full => true,
                    RadialPart::Pos => mid_val > 0.0,
                    RadialPart::Neg => mid_val < 0.0,
                };
                if keep {
                    let contribution = prim(v) - prim(u);
                    acc.add(match part {
                        RadialPart::Neg => -contribution,
                        _ => contribution,
                    });
                }
            }
        }
        acc.total()
    }

    /// `C_φ = ∫_{R^d} φ(|x|) dx`.
    pub fn c_phi(&self, d: usize) -> f64 {
        self.radial_integral(d, 0.0, self.r2, RadialPart::Full)
    }

    /// `∫_{R^d} |φ(|x|)| dx`.
    pub fn abs_integral(&self, d: usize) -> f64 {
        self.radial_integral(d, 0.0, self.r2, RadialPart::Pos)
            + self.radial_integral(d, 0.0, self.r2, RadialPart::Neg)
    }

    pub fn min_radius(&self) -> f64 {
        self.rs[0]
    }

    /// Replace the profile below `eps` by the constant `φ(eps)`
    /// (the truncated potential `φ_ε` of the truncation corollary).
    pub fn truncated_at(&self, eps: f64) -> Result<PhiTable> {
        if !(eps > 0.0 && eps <= self.r2) {
            return Err(Error::invalid("truncation radius must be in (0, R2]"));
        }
        let v_eps = self.value(eps);
        let mut samples: Vec<(f64, f64)> = vec![(eps, v_eps)];
        for (r, v) in self.samples() {
            if r > eps {
                samples.push((r, v));
            }
        }
        PhiTable::new(samples, self.r1, self.r2)
    }
}

/// A finite energy table on local occupancy patterns over the Chebyshev
/// ball `{j : ‖j‖_∞ ≤ ρ}` of tiles, read in lexicographic offset order.
///
/// Constraints enforced at construction (so the saturation assumption holds
/// by design): the all-empty pattern has energy 0 and the all-occupied
/// pattern has energy `𝔟₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternTable {
    pub rho: usize,
    pub dim: usize,
    pub b0: f64,
    u: Vec<f64>,
}

impl PatternTable {
    /// Number of cells in the pattern neighborhood.
    pub fn cells(rho: usize, dim: usize) -> usize {
        (2 * rho + 1).pow(dim as u32)
    }

    pub fn new(rho: usize, dim: usize, u: Vec<f64>) -> Result<Self> {
        if rho == 0 {
            return Err(Error::invalid("pattern radius rho must be >= 1"));
        }
        let cells = Self::cells(rho, dim);
        if cells > 20 {
            return Err(Error::CapExceeded(format!(
                "pattern neighborhood has {cells} cells; tables above 2^20 entries are not supported"
            )));
        }
        if u.len() != 1usize << cells {
            return Err(Error::invalid(format!(
                "pattern table needs {} entries, got {}",
                1usize << cells,
                u.len()
            )));
        }
        if u[0] != 0.0 {
            return Err(Error::invalid("U(all-empty pattern) must be 0"));
        }
        let all_one = (1usize << cells) - 1;
        let b0 = u[all_one];
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("pattern energies must be finite"));
        }
        Ok(PatternTable { rho, dim, b0, u })
    }

    /// The offsets of the pattern neighborhood in lexicographic order.
    pub fn offsets(&self) -> Vec<Site> {
        let r = self.rho as i64;
        IBox::cube(-r, 2 * r + 1, self.dim).unwrap().sites()
    }

    /// Index of the cell at the center of the pattern.
    pub fn center_bit(&self) -> usize {
        Self::cells(self.rho, self.dim) / 2
    }

    pub fn energy_of_bits(&self, bits: usize) -> f64 {
        self.u[bits]
    }

    /// Pattern bits around site `i` read from a spin source.
    pub fn bits_at<F: Fn(&Site) -> u8>(&self, i: &Site, spin: F) -> usize {
        let mut bits = 0usize;
        for (k, o) in self.offsets().iter().enumerate() {
            if spin(&i.add(o)) == 1 {
                bits |= 1 << k;
            }
        }
        bits
    }

    /// Saturated table: `U = 𝔟₀·1{center occupied}` on every pattern.
    pub fn saturated(rho: usize, dim: usize, b0: f64) -> Result<Self> {
        let cells = Self::cells(rho, dim);
        let center = cells / 2;
        let u = (0..1usize << cells)
            .map(|bits| if bits >> center & 1 == 1 { b0 } else { 0.0 })
            .collect();
        PatternTable::new(rho, dim, u)
    }

    /// Penalized table: saturated plus `p` on every non-constant pattern.
    pub fn penalized(rho: usize, dim: usize, b0: f64, p: f64) -> Result<Self> {
        let cells = Self::cells(rho, dim);
        let center = cells / 2;
        let all_one = (1usize << cells) - 1;
        let u = (0..1usize << cells)
            .map(|bits| {
                let base = if bits >> center & 1 == 1 { b0 } else { 0.0 };
                if bits == 0 || bits == all_one {
                    base
                } else {
                    base + p
                }
            })
            .collect();
        PatternTable::new(rho, dim, u)
    }

    /// A generic random table: constant patterns pinned to (0, 𝔟₀), all
    /// other entries `𝔟₀·1{center} + Uniform(lo, hi)`.
    pub fn random(rho: usize, dim: usize, b0: f64, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        let cells = Self::cells(rho, dim);
        let center = cells / 2;
        let all_one = (1usize << cells) - 1;
        let mut r = rng::seeded(seed);
        let u = (0..1usize << cells)
            .map(|bits| {
                let base = if bits >> center & 1 == 1 { b0 } else { 0.0 };
                if bits == 0 || bits == all_one {
                    base
                } else {
                    base + r.gen_range(lo..hi)
                }
            })
            .collect();
        PatternTable::new(rho, dim, u)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Kind-specific parameters of a tile-energy model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// `E_0(ω) = A Σ_{x∈ω_{T_0}} Σ_{i≤min(K, N-1)} 1{|x − v_i(x,ω)| ≤ R}`.
    KnnStrauss { k: usize, r: f64, a: f64 },
    /// `E_0(ω) = θ·|L(ω) ∩ T_0|`, `L(ω)` the union of mark-radius balls.
    AreaInteraction { theta: f64, r1: f64, r2: f64 },
    /// `E_0(ω) = ∫_{L_R(ω) ∩ T_0} ∫_{L_R(ω)} φ(|x−y|) dy dx`.
    DilutedPairwise { phi: PhiTable, r_dilution: f64 },
    /// Energy a function of the local occupancy pattern only.
    Surrogate(PatternTable),
}

/// Quadrature strategy for the diluted pairwise inner integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DilutedMethod {
    /// Reduce the inner integral to exact sphere-slice measures
    /// `∫ φ(r)·|∂B(x,r) ∩ L_R(ω)| dr` (d ≤ 2).
    Radial,
    /// Tensor midpoint grid with exact membership tests (any d; slow).
    Grid,
}

/// A per-tile energy family `E_0` with finite range and saturation data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileEnergyModel {
    pub dim: usize,
    pub kind: ModelKind,
    /// Interaction range `r` of assumption (E2).
    pub range: f64,
    pub sat: SaturationData,
    /// Quadrature pitch for integral models.
    pub pitch: f64,
    pub diluted_method: DilutedMethod,
}

impl TileEnergyModel {
    pub fn tiling(&self) -> Tiling {
        Tiling { delta: self.sat.delta, dim: self.dim }
    }

    /// K-NN Strauss with `L = R`, `𝔟 = A·K`, `𝔟₀ = 0`.
    pub fn knn_strauss(dim: usize, k: usize, r: f64, a: f64, delta: f64) -> Result<Self> {
        Tiling::new(delta, dim)?;
        if k == 0 || !(r > 0.0) || a < 0.0 {
            return Err(Error::invalid("need K >= 1, R > 0, A >= 0"));
        }
        Ok(TileEnergyModel {
            dim,
            kind: ModelKind::KnnStrauss { k, r, a },
            range: r,
            sat: SaturationData { delta, l: r, b: a * k as f64, b0: 0.0 },
            pitch: delta / 16.0,
            diluted_method: DilutedMethod::Radial,
        })
    }

    /// Area interaction (d = 2 only) with `L = R₂ + δ`, `𝔟 = 0`, `𝔟₀ = θ δ²`.
    pub fn area_interaction(theta: f64, r1: f64, r2: f64, delta: f64) -> Result<Self> {
        let dim = 2;
        Tiling::new(delta, dim)?;
        if !(r1 > 0.0 && r1 <= r2) {
            return Err(Error::invalid("need 0 < R1 <= R2"));
        }
        Ok(TileEnergyModel {
            dim,
            kind: ModelKind::AreaInteraction { theta, r1, r2 },
            range: r2,
            sat: SaturationData {
                delta,
                // tile-diagonal slack: homogeneity balls compare tile-center
                // distances, so a corner tile past r2 + delta can still
                // reach the tile region without the extra sqrt(d)*delta
                l: r2 + delta * (1.0 + (dim as f64).sqrt()),
                b: 0.0,
                b0: theta * delta * delta,
            },
            pitch: delta / 16.0,
            diluted_method: DilutedMethod::Radial,
        })
    }

    /// Diluted pairwise interaction with dilution scale `R`,
    /// `L = R₂ + 2√d·δ + δ`, `𝔟 = 0`, `𝔟₀ = δ^d·C_φ`.
    pub fn diluted_pairwise(dim: usize, phi: PhiTable, r_dilution: f64, delta: f64) -> Result<Self> {
        Tiling::new(delta, dim)?;
        if !(r_dilution > 0.0) {
            return Err(Error::invalid("dilution scale R must be positive"));
        }
        let b0 = delta.powi(dim as i32) * phi.c_phi(dim);
        let l = phi.r2 + 2.0 * (dim as f64).sqrt() * delta + delta;
        let range = r_dilution + phi.r2;
        Ok(TileEnergyModel {
            dim,
            kind: ModelKind::DilutedPairwise { phi, r_dilution },
            range,
            sat: SaturationData { delta, l, b: 0.0, b0 },
            // the radial inner integral is exact per arc, so a coarser
            // default than the grid method's suffices
            pitch: delta / 8.0,
            diluted_method: if dim <= 2 { DilutedMethod::Radial } else { DilutedMethod::Grid },
        })
    }

    /// Factorizing surrogate: energy depends on ω only through the spin
    /// field; `L = δρ√d`, `𝔟 = 0`, `𝔟₀ = U(all-occupied)`.
    pub fn surrogate(dim: usize, table: PatternTable, delta: f64) -> Result<Self> {
        Tiling::new(delta, dim)?;
        if table.dim != dim {
            return Err(Error::invalid("pattern table dimension mismatch"));
        }
        let rho = table.rho as f64;
        let sq = (dim as f64).sqrt();
        let b0 = table.b0;
        Ok(TileEnergyModel {
            dim,
            kind: ModelKind::Surrogate(table),
            range: delta * sq * (rho + 1.0),
            sat: SaturationData { delta, l: delta * rho * sq, b: 0.0, b0 },
            pitch: delta / 16.0,
            diluted_method: DilutedMethod::Radial,
        })
    }

    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.pitch = pitch;
        self
    }

    pub fn with_l(mut self, l: f64) -> Self {
        self.sat.l = l;
        self
    }

    pub fn with_diluted_method(mut self, m: DilutedMethod) -> Self {
        self.diluted_method = m;
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::KnnStrauss { .. } => "knn_strauss",
            ModelKind::AreaInteraction { .. } => "area_interaction",
            ModelKind::DilutedPairwise { .. } => "diluted_pairwise",
            ModelKind::Surrogate(_) => "surrogate",
        }
    }

    /// Stability constant of (E3): `E_0 ≥ −c_s (1 + N_{T_0⊕B(0,r)})`.
    pub fn c_s(&self) -> f64 {
        match &self.kind {
            ModelKind::KnnStrauss { .. } => 0.0,
            ModelKind::AreaInteraction { theta, .. } => {
                let d = self.sat.delta;
                theta.min(0.0).abs() * d * d
            }
            ModelKind::DilutedPairwise { phi, .. } => {
                self.sat.delta.powi(self.dim as i32) * phi.abs_integral(self.dim)
            }
            ModelKind::Surrogate(t) => t.max_abs(),
        }
    }

    /// Tameness constant of (E4): `E_0 ≤ c_t (1 + N²_{T_0⊕B(0,r)})`.
    pub fn c_t(&self) -> f64 {
        match &self.kind {
            ModelKind::KnnStrauss { k, a, .. } => a * *k as f64,
            ModelKind::AreaInteraction { theta, .. } => {
                let d = self.sat.delta;
                theta.max(0.0) * d * d
            }
            ModelKind::DilutedPairwise { phi, .. } => {
                self.sat.delta.powi(self.dim as i32) * phi.abs_integral(self.dim)
            }
            ModelKind::Surrogate(t) => t.max_abs(),
        }
    }

    /// A constant with `H(ω) ≥ −C_s·N(ω)` (loose, reported).
    pub fn hamiltonian_stability_constant(&self) -> f64 {
        let tiles_per_point = |reach: f64| -> f64 {
            let per_axis = 2.0 * (reach / self.sat.delta).ceil() + 1.0;
            per_axis.powi(self.dim as i32)
        };
        match &self.kind {
            ModelKind::KnnStrauss { .. } => 0.0,
            ModelKind::AreaInteraction { theta, r2, .. } => {
                let d = self.sat.delta;
                theta.min(0.0).abs() * d * d * tiles_per_point(*r2 + d)
            }
            ModelKind::DilutedPairwise { phi, r_dilution } => {
                let d = self.sat.delta;
                d.powi(self.dim as i32) * phi.abs_integral(self.dim)
                    * tiles_per_point(*r_dilution + d)
            }
            ModelKind::Surrogate(t) => t.max_abs() * (2.0 * t.rho as f64 + 1.0).powi(self.dim as i32),
        }
    }

    /// `Ē_i(ω) = 𝔟·N_{T_i}(ω) + 𝔟₀·1{ω_{T_i} ≠ ∅}` — exact closed form.
    pub fn saturated_tile_energy(&self, omega: &Configuration, i: &Site) -> f64 {
        let tiling = self.tiling();
        let n = omega
            .points
            .iter()
            .filter(|p| tiling.tile_of(&p.pos) == *i)
            .count();
        self.sat.b * n as f64 + self.sat.b0 * (n > 0) as u8 as f64
    }

    /// `E_i(ω) = E_0(ω − δi)` with a reported error bound.
    pub fn tile_energy(&self, omega: &Configuration, i: &Site) -> Result<EnergyValue> {
        match &self.kind {
            ModelKind::KnnStrauss { .. } | ModelKind::Surrogate(_) => {
                Ok(EnergyValue::exact(self.tile_energy_at_pitch(omega, i, self.pitch)?))
            }
            _ => {
                let coarse = self.tile_energy_at_pitch(omega, i, self.pitch)?;
                let fine = self.tile_energy_at_pitch(omega, i, self.pitch / 2.0)?;
                Ok(EnergyValue { value: fine, err: (fine - coarse).abs().max(1e-13) })
            }
        }
    }

    /// Single-resolution evaluation (no error estimate); the building block
    /// of [`TileEnergyModel::tile_energy`] and of bulk scans that manage
    /// their own resolution.
    pub fn tile_energy_at_pitch(&self, omega: &Configuration, i: &Site, pitch: f64) -> Result<f64> {
        match &self.kind {
            ModelKind::KnnStrauss { k, r, a } => Ok(self.knn_energy(omega, i, *k, *r, *a)),
            ModelKind::Surrogate(t) => {
                let tiling = self.tiling();
                Ok(t.energy_of_bits(t.bits_at(i, |s| occupancy(omega, s, &tiling))))
            }
            ModelKind::AreaInteraction { theta, r2, .. } => {
                self.area_energy(omega, i, *theta, *r2, pitch)
            }
            ModelKind::DilutedPairwise { phi, r_dilution } => {
                Ok(self.diluted_energy(omega, i, phi, *r_dilution, pitch))
            }
        }
    }

    /// Surrogate tile energy read directly from a spin field.
    pub fn tile_energy_spins(&self, field: &SpinField, i: &Site) -> Option<f64> {
        match &self.kind {
            ModelKind::Surrogate(t) => Some(t.energy_of_bits(t.bits_at(i, |s| field.spin(s)))),
            _ => None,
        }
    }

    fn knn_energy(&self, omega: &Configuration, i: &Site, k: usize, r: f64, a: f64) -> f64 {
        let n = omega.len();
        if n < 2 {
            return 0.0;
        }
        let tiling = self.tiling();
        let in_tile: Vec<&MarkedPoint> = omega
            .points
            .iter()
            .filter(|p| tiling.tile_of(&p.pos) == *i)
            .collect();
        let cap = k.min(n - 1);
        let mut total = 0usize;
        for x in in_tile {
            // neighbours ordered by distance, lexicographic positions as the
            // tie-break so the count is well defined for coincident distances
            let mut others: Vec<(&MarkedPoint, f64)> = omega
                .points
                .iter()
                .filter(|y| y.pos != x.pos)
                .map(|y| (y, dist_sq(&x.pos, &y.pos)))
                .collect();
            others.sort_by(|(pa, da), (pb, db)| {
                da.partial_cmp(db)
                    .unwrap()
                    .then_with(|| pa.pos.partial_cmp(&pb.pos).unwrap())
            });
            total += others
                .iter()
                .take(cap)
                .filter(|(_, d2)| *d2 <= r * r)
                .count();
        }
        a * total as f64
    }

    fn area_energy(
        &self,
        omega: &Configuration,
        i: &Site,
        theta: f64,
        r2: f64,
        pitch: f64,
    ) -> Result<f64> {
        if self.dim != 2 {
            return Err(Error::invalid("area interaction is defined for d = 2 only"));
        }
        let tiling = self.tiling();
        let (lo, _) = tiling.tile_bounds(i);
        let delta = self.sat.delta;
        // balls that can reach the tile
        let mut balls: Vec<(&[f64], f64)> = Vec::new();
        for p in &omega.points {
            let mark = p
                .mark
                .ok_or_else(|| Error::invalid("area interaction requires radius marks"))?;
            if point_box_dist_sq(&p.pos, &lo, delta) <= (mark + 1e-12) * (mark + 1e-12) {
                if mark > r2 + 1e-12 {
                    return Err(Error::invalid("mark exceeds declared R2"));
                }
                balls.push((p.pos.as_slice(), mark));
            }
        }
        if balls.is_empty() {
            return Ok(0.0);
        }
        let n = (delta / pitch).ceil().max(1.0) as usize;
        let h = delta / n as f64;
        let mut count = 0usize;
        let mut x = [0.0f64; 2];
        for jx in 0..n {
            x[0] = lo[0] + (jx as f64 + 0.5) * h;
            for jy in 0..n {
                x[1] = lo[1] + (jy as f64 + 0.5) * h;
                if balls.iter().any(|(c, m)| dist_sq(&x, c) <= m * m) {
                    count += 1;
                }
            }
        }
        Ok(theta * h * h * count as f64)
    }

    fn diluted_energy(
        &self,
        omega: &Configuration,
        i: &Site,
        phi: &PhiTable,
        r_dil: f64,
        pitch: f64,
    ) -> f64 {
        let tiling = self.tiling();
        let (lo, _) = tiling.tile_bounds(i);
        let delta = self.sat.delta;
        let d = self.dim;
        // centers that can influence the tile: within R (outer membership)
        // + R2 (inner reach) of the tile
        let reach = r_dil + phi.r2;
        let centers: Vec<&[f64]> = omega
            .points
            .iter()
            .filter(|p| point_box_dist_sq(&p.pos, &lo, delta) <= reach * reach * (1.0 + 1e-12))
            .map(|p| p.pos.as_slice())
            .collect();
        if centers.is_empty() {
            return 0.0;
        }
        let in_halo = |x: &[f64]| centers.iter().any(|c| dist_sq(x, c) <= r_dil * r_dil);
        let n = (delta / pitch).ceil().max(1.0) as usize;
        let h = delta / n as f64;
        let cell = h.powi(d as i32);
        let mut acc = Kahan::new();
        match self.diluted_method {
            DilutedMethod::Radial => {
                let mut x = vec![0.0f64; d];
                let mut idx = vec![0usize; d];
                loop {
                    for k in 0..d {
                        x[k] = lo[k] + (idx[k] as f64 + 0.5) * h;
                    }
                    if in_halo(&x) {
                        acc.add(cell * inner_radial(&x, phi, r_dil, &centers, d, pitch));
                    }
                    if !odometer(&mut idx, n) {
                        break;
                    }
                }
            }
            DilutedMethod::Grid => {
                // tensor midpoint grid for the inner variable as well, on a
                // global tile-anchored lattice of the same pitch
                let mut x = vec![0.0f64; d];
                let mut idx = vec![0usize; d];
                loop {
                    for k in 0..d {
                        x[k] = lo[k] + (idx[k] as f64 + 0.5) * h;
                    }
                    if in_halo(&x) {
                        acc.add(cell * inner_grid(&x, phi, r_dil, &centers, d, h, &in_halo));
                    }
                    if !odometer(&mut idx, n) {
                        break;
                    }
                }
            }
        }
        acc.total()
    }

    /// `H(ω) = Σ_i E_i(ω)` over the finitely many contributing tiles.
    pub fn hamiltonian(&self, omega: &Configuration) -> Result<EnergyValue> {
        if omega.is_empty() {
            return Ok(EnergyValue::exact(0.0));
        }
        let tiling = self.tiling();
        // tiles whose energy can be nonzero: within the model's footprint of
        // some point
        let margin = match &self.kind {
            ModelKind::KnnStrauss { .. } => 0.0,
            ModelKind::AreaInteraction { r2, .. } => *r2,
            ModelKind::DilutedPairwise { r_dilution, .. } => *r_dilution,
            ModelKind::Surrogate(t) => t.rho as f64 * self.sat.delta * (self.dim as f64).sqrt(),
        };
        let m = (margin / self.sat.delta).ceil() as i64 + 1;
        let mut seen = std::collections::HashSet::new();
        let mut value = Kahan::new();
        let mut err = 0.0;
        for p in &omega.points {
            let base = tiling.tile_of(&p.pos);
            let cube = IBox::cube(-m, 2 * m + 1, self.dim).unwrap();
            for o in cube.sites() {
                let i = base.add(&o);
                if seen.insert(i) {
                    let e = self.tile_energy(omega, &i)?;
                    value.add(e.value);
                    err += e.err;
                }
            }
        }
        Ok(EnergyValue { value: value.total(), err })
    }

    /// Local energy of a bounded region Δ:
    /// `H(ω_{Δ⊕B(0,ρ)}) − H(ω_{Δ⊕B(0,ρ)∖Δ})` with `ρ = range + 2√d·δ`.
    pub fn local_energy_region(&self, omega: &Configuration, delta_box: &Window) -> Result<EnergyValue> {
        let rho = self.range + 2.0 * (self.dim as f64).sqrt() * self.sat.delta;
        let near: Vec<MarkedPoint> = omega
            .points
            .iter()
            .filter(|p| window_dist_sq(&p.pos, delta_box) <= rho * rho)
            .cloned()
            .collect();
        let outside: Vec<MarkedPoint> = near
            .iter()
            .filter(|p| !delta_box.contains(&p.pos))
            .cloned()
            .collect();
        let w = omega.window.clone();
        let a = self.hamiltonian(&Configuration { points: near, window: w.clone() })?;
        let b = self.hamiltonian(&Configuration { points: outside, window: w })?;
        Ok(EnergyValue { value: a.value - b.value, err: a.err + b.err })
    }

    /// Local energy of a point: `h(x, ω) = H(ω ∪ {x}) − H(ω)` restricted to
    /// `B(x, ρ)` with `ρ = range + 2√d·δ`.
    pub fn local_energy_point(&self, omega: &Configuration, x: &MarkedPoint) -> Result<EnergyValue> {
        let rho = self.range + 2.0 * (self.dim as f64).sqrt() * self.sat.delta;
        let mut near: Vec<MarkedPoint> = omega
            .points
            .iter()
            .filter(|p| dist_sq(&p.pos, &x.pos) <= rho * rho)
            .cloned()
            .collect();
        let w = omega.window.clone();
        let without = self.hamiltonian(&Configuration { points: near.clone(), window: w.clone() })?;
        near.push(x.clone());
        let with = self.hamiltonian(&Configuration { points: near, window: w })?;
        Ok(EnergyValue { value: with.value - without.value, err: with.err + without.err })
    }
}

fn odometer(idx: &mut [usize], n: usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < n {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Squared Euclidean distance from a point to the cube `[lo, lo+delta]^d`.
fn point_box_dist_sq(p: &[f64], lo: &[f64], delta: f64) -> f64 {
    p.iter()
        .zip(lo.iter())
        .map(|(x, l)| {
            let e = (l - x).max(x - (l + delta)).max(0.0);
            e * e
        })
        .sum()
}

fn window_dist_sq(p: &[f64], w: &Window) -> f64 {
    p.iter()
        .zip(w.lo.iter().zip(w.hi.iter()))
        .map(|(x, (l, h))| {
            let e = (l - x).max(x - h).max(0.0);
            e * e
        })
        .sum()
}

/// `g(x) = ∫_{L_R(ω)} φ(|x−y|) dy` via the co-area reduction
/// `∫_0^{R₂} φ(r)·m_x(r) dr`, where `m_x(r)` is the exact measure of the
/// sphere `∂B(x,r)` inside the halo (counting measure in d=1, arc length
/// in d=2).
fn inner_radial(x: &[f64], phi: &PhiTable, r_dil: f64, centers: &[&[f64]], d: usize, pitch: f64) -> f64 {
    let measure = |r: f64| -> f64 {
        match d {
            1 => {
                let mut m = 0.0;
                for s in [-1.0, 1.0] {
                    let y = [x[0] + s * r];
                    if centers.iter().any(|c| dist_sq(&y, c) <= r_dil * r_dil) {
                        m += 1.0;
                    }
                }
                m
            }
            2 => r * circle_arc_measure(x, r, r_dil, centers),
            _ => unreachable!("radial method is restricted to d <= 2"),
        }
    };
    // composite Simpson per linear segment of φ; on full spheres the
    // integrand is a polynomial of degree <= d, so Simpson is exact there
    let mut acc = Kahan::new();
    for (p, q, vp, vq) in phi.segments(0.0, phi.r2) {
        let nsub = ((q - p) / pitch).ceil().max(1.0) as usize;
        let h = (q - p) / nsub as f64;
        for j in 0..nsub {
            let a = p + j as f64 * h;
            let b = a + h;
            let (fa, fb) = (
                lerp_phi(a, p, q, vp, vq) * measure(a),
                lerp_phi(b, p, q, vp, vq) * measure(b),
            );
            let m = 0.5 * (a + b);
            let fm = lerp_phi(m, p, q, vp, vq) * measure(m);
            acc.add(h / 6.0 * (fa + 4.0 * fm + fb));
        }
    }
    acc.total()
}

fn lerp_phi(r: f64, p: f64, q: f64, vp: f64, vq: f64) -> f64 {
    if q == p {
        vp
    } else {
        vp + (vq - vp) * (r - p) / (q - p)
    }
}

/// Angular measure (in radians) of `{θ : x + r·e^{iθ} ∈ ∪_c B(c, R)}`.
fn circle_arc_measure(x: &[f64], r: f64, big_r: f64, centers: &[&[f64]]) -> f64 {
    use std::f64::consts::PI;
    if r == 0.0 {
        return if centers.iter().any(|c| dist_sq(x, c) <= big_r * big_r) {
            2.0 * PI
        } else {
            0.0
        };
    }
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    for c in centers {
        let dd = dist_sq(x, c).sqrt();
        if dd + r <= big_r {
            return 2.0 * PI; // whole circle inside this ball
        }
        if dd >= r + big_r || dd + big_r <= r {
            continue;
        }
        let cosa = ((dd * dd + r * r - big_r * big_r) / (2.0 * dd * r)).clamp(-1.0, 1.0);
        let alpha = cosa.acos();
        if alpha <= 0.0 {
            continue;
        }
        if alpha >= PI {
            return 2.0 * PI;
        }
        let theta0 = (c[1] - x[1]).atan2(c[0] - x[0]);
        let (mut a, mut b) = (theta0 - alpha, theta0 + alpha);
        // normalize start into [0, 2π)
        let shift = (a / (2.0 * PI)).floor() * 2.0 * PI;
        a -= shift;
        b -= shift;
        if b > 2.0 * PI {
            arcs.push((a, 2.0 * PI));
            arcs.push((0.0, b - 2.0 * PI));
        } else {
            arcs.push((a, b));
        }
    }
    if arcs.is_empty() {
        return 0.0;
    }
    arcs.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
    let mut total = 0.0;
    let (mut cur_a, mut cur_b) = arcs[0];
    for &(a, b) in &arcs[1..] {
        if a <= cur_b {
            cur_b = cur_b.max(b);
        } else {
            total += cur_b - cur_a;
            cur_a = a;
            cur_b = b;
        }
    }
    total += cur_b - cur_a;
    total.min(2.0 * PI)
}

/// Tensor-grid inner integral: `Σ_{y ∈ grid ∩ L_R ∩ B(x, R₂)} h^d φ(|x−y|)`
/// on the global tile-anchored midpoint lattice of pitch `h`.
fn inner_grid<F: Fn(&[f64]) -> bool>(
    x: &[f64],
    phi: &PhiTable,
    _r_dil: f64,
    _centers: &[&[f64]],
    d: usize,
    h: f64,
    in_halo: &F,
) -> f64 {
    let r2 = phi.r2;
    let cell = h.powi(d as i32);
    // global midpoint lattice: y_k = (m + 0.5) h
    let lo: Vec<i64> = x.iter().map(|c| ((c - r2) / h - 0.5).floor() as i64).collect();
    let hi: Vec<i64> = x.iter().map(|c| ((c + r2) / h - 0.5).ceil() as i64).collect();
    let mut acc = Kahan::new();
    let mut idx = lo.clone();
    'outer: loop {
        let y: Vec<f64> = idx.iter().map(|&m| (m as f64 + 0.5) * h).collect();
        let d2 = dist_sq(x, &y);
        if d2 <= r2 * r2 && in_halo(&y) {
            acc.add(cell * phi.value(d2.sqrt()));
        }
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] <= hi[k] {
                continue 'outer;
            }
            idx[k] = lo[k];
            if k == 0 {
                break 'outer;
            }
        }
        if d == 0 {
            break;
        }
    }
    acc.total()
}

/// Outcome of one randomized assumption check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pass: bool,
    /// Worst observed violation / deviation.
    pub worst: f64,
    /// Tolerance the deviation was compared against.
    pub tol: f64,
    pub witness: Option<String>,
}

impl CheckOutcome {
    fn passed(worst: f64, tol: f64) -> Self {
        CheckOutcome { pass: worst <= tol, worst, tol, witness: None }
    }
}

/// Report of the randomized (E1)–(E5)/(H1)–(H5) property checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionsReport {
    pub model: String,
    pub trials: usize,
    /// (E2): E_0 unchanged when ω is replaced outside T_0 ⊕ B(0,r).
    pub locality: CheckOutcome,
    /// (E3): E_0 ≥ −c_s(1 + N_loc).
    pub stability: CheckOutcome,
    /// (E4): E_0 ≤ c_t(1 + N_loc²).
    pub tameness: CheckOutcome,
    /// (E5): E_0 = Ē_0 on homogeneous neighborhoods.
    pub saturation: CheckOutcome,
    /// (H4): H(ω + δu) = H(ω).
    pub translation: CheckOutcome,
    /// H(ω) ≥ −C_s N(ω) with the reported constant.
    pub h_stability: CheckOutcome,
    /// Largest reported quadrature error seen during the saturation check.
    pub max_reported_err: f64,
    /// (H3) heredity concerns hard-core models; none of the implemented
    /// models takes the value +∞, so it holds vacuously.
    pub heredity_note: String,
}

impl AssumptionsReport {
    pub fn all_pass(&self) -> bool {
        self.locality.pass
            && self.stability.pass
            && self.tameness.pass
            && self.saturation.pass
            && self.translation.pass
            && self.h_stability.pass
    }
}

impl TileEnergyModel {
    fn mark_law(&self) -> MarkLaw {
        match &self.kind {
            ModelKind::AreaInteraction { r1, r2, .. } => MarkLaw::RadiusUniform { r1: *r1, r2: *r2 },
            _ => MarkLaw::None,
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self.kind, ModelKind::KnnStrauss { .. } | ModelKind::Surrogate(_))
    }

    /// Randomized property check of the tile-energy assumptions.
    pub fn check_assumptions(&self, trials: usize, seed: u64) -> Result<AssumptionsReport> {
        let delta = self.sat.delta;
        let d = self.dim;
        let r = self.range;
        let l = self.sat.l;
        let origin = Site::default();
        let tiling = self.tiling();
        let law = self.mark_law();
        let half = delta / 2.0 + r.max(l) + 2.0 * delta;
        let w = Window::new(vec![-half; d], vec![half; d])?;
        // activity giving a handful of points in the local window
        let z = 8.0 / w.volume();
        let exact_tol = 1e-9;

        let mut worst_loc = 0.0f64;
        let mut loc_tol: f64 = exact_tol;
        let mut worst_stab = 0.0f64;
        let mut worst_tame = 0.0f64;
        let mut worst_sat = 0.0f64;
        let mut sat_tol: f64 = exact_tol;
        let mut worst_trans = 0.0f64;
        let mut worst_hstab = 0.0f64;
        let mut max_err = 0.0f64;
        let mut witness_sat: Option<String> = None;

        let (tile_lo, _) = tiling.tile_bounds(&origin);
        let cs = self.c_s();
        let ct = self.c_t();
        let cs_h = self.hamiltonian_stability_constant();

        for t in 0..trials {
            let mut gen = rng::stream(seed, t as u64);

            // --- locality (E2)
            let omega = sample_poisson(&w, z, law, &mut gen)?;
            let kept: Vec<MarkedPoint> = omega
                .points
                .iter()
                .filter(|p| point_box_dist_sq(&p.pos, &tile_lo, delta) <= r * r)
                .cloned()
                .collect();
            let extra = sample_poisson(&w, z, law, &mut gen)?;
            let mut alt = kept.clone();
            alt.extend(
                extra
                    .points
                    .into_iter()
                    .filter(|p| point_box_dist_sq(&p.pos, &tile_lo, delta) > (r + 1e-6).powi(2)),
            );
            let alt = Configuration::new(alt, w.clone())?;
            let e1 = self.tile_energy(&omega, &origin)?;
            let e2 = self.tile_energy(&alt, &origin)?;
            worst_loc = worst_loc.max((e1.value - e2.value).abs());
            loc_tol = loc_tol.max(e1.err + e2.err + exact_tol);

            // --- stability/tameness (E3)/(E4)
            let n_loc = omega
                .points
                .iter()
                .filter(|p| point_box_dist_sq(&p.pos, &tile_lo, delta) <= r * r)
                .count() as f64;
            worst_stab = worst_stab.max(-(e1.value + e1.err) - cs * (1.0 + n_loc));
            worst_tame = worst_tame.max(e1.value - e1.err - ct * (1.0 + n_loc * n_loc));

            // --- saturation (E5): dense then empty neighborhoods
            for sharp in [1u8, 0u8] {
                let mut pts: Vec<MarkedPoint> = Vec::new();
                if sharp == 1 {
                    for j in ball_offsets(l, &tiling) {
                        let (jlo, _) = tiling.tile_bounds(&j);
                        let extra_here = (gen.gen_range(0.0f64..1.0) * 1.8) as usize;
                        for _ in 0..=extra_here {
                            let pos: Vec<f64> =
                                jlo.iter().map(|c| c + gen.gen_range(0.0..delta)).collect();
                            let mark = match law {
                                MarkLaw::None => None,
                                MarkLaw::RadiusUniform { r1, r2 } => Some(gen.gen_range(r1..=r2)),
                            };
                            pts.push(MarkedPoint { pos, mark });
                        }
                    }
                }
                // arbitrary points outside the homogeneity ball
                let noise = sample_poisson(&w, z, law, &mut gen)?;
                let ball: std::collections::HashSet<Site> =
                    ball_offsets(l, &tiling).into_iter().collect();
                pts.extend(
                    noise
                        .points
                        .into_iter()
                        .filter(|p| !ball.contains(&tiling.tile_of(&p.pos))),
                );
                let cfg = match Configuration::new(pts, w.clone()) {
                    Ok(c) => c,
                    Err(_) => continue, // astronomically unlikely duplicate
                };
                let e = self.tile_energy(&cfg, &origin)?;
                let ebar = self.saturated_tile_energy(&cfg, &origin);
                let dev = (e.value - ebar).abs();
                if dev > worst_sat {
                    worst_sat = dev;
                    witness_sat = Some(format!(
                        "sharp={sharp} trial={t}: E0={} Ebar={ebar}",
                        e.value
                    ));
                }
                max_err = max_err.max(e.err);
                sat_tol = sat_tol.max(e.err + exact_tol);
            }

            // --- translation invariance (H4) + Hamiltonian stability
            if t % 10 == 0 {
                let small = sample_poisson(&w, z / 2.0, law, &mut gen)?;
                let h0 = self.hamiltonian(&small)?;
                let u: Vec<i64> = (0..d).map(|_| gen.gen_range(-3i64..=3)).collect();
                let big = Window::new(
                    w.lo.iter().map(|c| c - 4.0 * delta).collect(),
                    w.hi.iter().map(|c| c + 4.0 * delta).collect(),
                )?;
                let shifted = Configuration::new(
                    small
                        .points
                        .iter()
                        .map(|p| MarkedPoint {
                            pos: p
                                .pos
                                .iter()
                                .zip(u.iter())
                                .map(|(c, ui)| c + delta * *ui as f64)
                                .collect(),
                            mark: p.mark,
                        })
                        .collect(),
                    big,
                )?;
                let h1 = self.hamiltonian(&shifted)?;
                let tol_here = if self.is_exact() {
                    exact_tol
                } else {
                    h0.err + h1.err + 1e-8 * (1.0 + h0.value.abs())
                };
                worst_trans = worst_trans.max(((h0.value - h1.value).abs() - tol_here).max(0.0));
                worst_hstab =
                    worst_hstab.max(-(h0.value + h0.err) - cs_h * small.len() as f64);
            }
        }

        Ok(AssumptionsReport {
            model: self.kind_name().to_string(),
            trials,
            locality: CheckOutcome::passed(worst_loc, loc_tol),
            stability: CheckOutcome::passed(worst_stab, 0.0),
            tameness: CheckOutcome::passed(worst_tame, 0.0),
            saturation: CheckOutcome {
                pass: worst_sat <= sat_tol,
                worst: worst_sat,
                tol: sat_tol,
                witness: witness_sat,
            },
            translation: CheckOutcome::passed(worst_trans, 0.0),
            h_stability: CheckOutcome::passed(worst_hstab, 0.0),
            max_reported_err: max_err,
            heredity_note:
                "heredity (H3) is vacuous: no implemented model takes the value +infinity"
                    .to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn window1(half: f64) -> Window {
        Window::new(vec![-half], vec![half]).unwrap()
    }

    fn cfg1(xs: &[f64], half: f64) -> Configuration {
        Configuration::new(xs.iter().map(|&x| MarkedPoint::new(vec![x])).collect(), window1(half))
            .unwrap()
    }

    #[test]
    fn phi_table_interpolation_and_integrals() {
        // φ(r) = 1 - r on [0, 1]
        let phi = PhiTable::new(vec![(0.0, 1.0), (1.0, 0.0)], 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(phi.value(0.25), 0.75, epsilon = 1e-14);
        assert_eq!(phi.value(1.5), 0.0);
        // d=1: C_φ = 2∫_0^1 (1-r) dr = 1
        assert_abs_diff_eq!(phi.c_phi(1), 1.0, epsilon = 1e-13);
        // d=2: 2π ∫_0^1 r(1-r) dr = 2π(1/2 - 1/3) = π/3
        assert_abs_diff_eq!(phi.c_phi(2), std::f64::consts::PI / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn phi_table_signed_parts() {
        // φ(r) = 1 - 2r on [0,1]: root at 1/2
        let phi = PhiTable::new(vec![(0.0, 1.0), (1.0, -1.0)], 0.5, 1.0).unwrap();
        let pos = phi.radial_integral(1, 0.0, 1.0, RadialPart::Pos);
        let neg = phi.radial_integral(1, 0.0, 1.0, RadialPart::Neg);
        // 2∫_0^{1/2}(1-2r)dr = 1/2 each side
        assert_abs_diff_eq!(pos, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(neg, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(pos - neg, phi.c_phi(1), epsilon = 1e-13);
    }

    #[test]
    fn knn_frozen_examples() {
        let m = TileEnergyModel::knn_strauss(1, 1, 1.0, 1.0, 1.0).unwrap();
        // empty
        let empty = Configuration::empty(window1(3.0));
        assert_eq!(m.tile_energy(&empty, &Site::default()).unwrap().value, 0.0);
        // two points in T_0 within R: each sees its 1st neighbour
        let two = cfg1(&[0.1, 0.4], 3.0);
        assert_eq!(m.tile_energy(&two, &Site::default()).unwrap().value, 2.0);
        // single point: N < 2 branch
        let one = cfg1(&[0.1], 3.0);
        assert_eq!(m.hamiltonian(&one).unwrap().value, 0.0);
    }

    #[test]
    fn knn_cap_and_closed_form() {
        // E_0 = A Σ_x min(K, #neighbours within R): check vs the sort-based path
        let m = TileEnergyModel::knn_strauss(1, 2, 0.6, 1.5, 1.0).unwrap();
        let cfg = cfg1(&[-0.3, -0.1, 0.1, 0.3, 0.9], 3.0);
        let tiling = m.tiling();
        let mut expect = 0.0;
        for x in &cfg.points {
            if tiling.tile_of(&x.pos) != Site::default() {
                continue;
            }
            let c = cfg
                .points
                .iter()
                .filter(|y| y.pos != x.pos && dist_sq(&x.pos, &y.pos) <= 0.36)
                .count();
            expect += 1.5 * c.min(2) as f64;
        }
        assert_abs_diff_eq!(
            m.tile_energy(&cfg, &Site::default()).unwrap().value,
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn knn_local_energy_point() {
        let m = TileEnergyModel::knn_strauss(1, 1, 1.0, 1.0, 1.0).unwrap();
        let omega = cfg1(&[0.0], 3.0);
        let h = m
            .local_energy_point(&omega, &MarkedPoint::new(vec![0.5]))
            .unwrap();
        assert_abs_diff_eq!(h.value, 2.0, epsilon = 1e-12);
        // far point: h = H({x}) = 0
        let far = m
            .local_energy_point(&omega, &MarkedPoint::new(vec![2.5]))
            .unwrap();
        assert_abs_diff_eq!(far.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn far_separated_pairs_are_additive() {
        let phi = PhiTable::new(vec![(0.0, 1.0), (0.5, 0.0)], 0.5, 0.5).unwrap();
        let m = TileEnergyModel::diluted_pairwise(1, phi, 0.4, 0.25).unwrap();
        let single = cfg1(&[0.05], 8.0);
        let pair = cfg1(&[0.05, 5.0], 8.0);
        let h1 = m.hamiltonian(&single).unwrap();
        let h2 = m.hamiltonian(&pair).unwrap();
        assert_abs_diff_eq!(h2.value, 2.0 * h1.value, epsilon = 2.0 * (h1.err + h2.err) + 1e-9);
    }

    #[test]
    fn diluted_homogeneous_dense_saturates() {
        // every tile within L occupied → E_0 = δ^d C_φ almost exactly
        let phi = PhiTable::new(vec![(0.0, 2.0), (0.75, 0.0)], 0.75, 0.75).unwrap();
        let delta = 0.5f64;
        let m = TileEnergyModel::diluted_pairwise(2, phi, 0.75, delta).unwrap();
        let tiling = m.tiling();
        let mut gen = rng::seeded(3);
        let half = m.sat.l + 2.0 * delta;
        let w = Window::new(vec![-half, -half], vec![half, half]).unwrap();
        let mut pts = Vec::new();
        for j in ball_offsets(m.sat.l, &tiling) {
            let (lo, _) = tiling.tile_bounds(&j);
            pts.push(MarkedPoint::new(vec![
                lo[0] + gen.gen_range(0.0..delta),
                lo[1] + gen.gen_range(0.0..delta),
            ]));
        }
        let cfg = Configuration::new(pts, w).unwrap();
        let e = m.tile_energy(&cfg, &Site::default()).unwrap();
        assert_abs_diff_eq!(e.value, m.sat.b0, epsilon = 1e-9);
    }

    #[test]
    fn diluted_radial_matches_grid_oracle() {
        let phi = PhiTable::new(vec![(0.0, 1.0), (0.4, -0.3), (0.75, 0.0)], 0.6, 0.75).unwrap();
        let m = TileEnergyModel::diluted_pairwise(2, phi, 0.75, 0.5).unwrap();
        let grid = m.clone().with_diluted_method(DilutedMethod::Grid).with_pitch(0.5 / 48.0);
        let fine = m.clone().with_pitch(0.5 / 48.0);
        let w = Window::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let cfg = sample_poisson(&w, 0.8, MarkLaw::None, &mut rng::seeded(9)).unwrap();
        let a = fine.tile_energy_at_pitch(&cfg, &Site::default(), fine.pitch).unwrap();
        let b = grid.tile_energy_at_pitch(&cfg, &Site::default(), grid.pitch).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 2e-3 * (1.0 + a.abs()));
    }

    #[test]
    fn diluted_global_bound() {
        let phi = PhiTable::new(vec![(0.0, 1.0), (0.4, -0.3), (0.75, 0.0)], 0.6, 0.75).unwrap();
        let m = TileEnergyModel::diluted_pairwise(2, phi.clone(), 0.75, 0.5).unwrap();
        let bound = 0.25 * phi.abs_integral(2);
        let w = Window::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        for s in 0..50 {
            let cfg = sample_poisson(&w, 1.5, MarkLaw::None, &mut rng::stream(4, s)).unwrap();
            let e = m.tile_energy(&cfg, &Site::default()).unwrap();
            assert!(e.value.abs() <= bound + e.err + 1e-9, "|E0| {} > bound {bound}", e.value);
        }
    }

    #[test]
    fn quadrature_first_order_convergence() {
        let phi = PhiTable::new(vec![(0.0, 1.0), (0.75, 0.0)], 0.75, 0.75).unwrap();
        let m = TileEnergyModel::diluted_pairwise(2, phi, 0.75, 0.5).unwrap();
        let w = Window::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let cfg = sample_poisson(&w, 1.0, MarkLaw::None, &mut rng::seeded(17)).unwrap();
        let v = |pitch: f64| m.tile_energy_at_pitch(&cfg, &Site::default(), pitch).unwrap();
        let ref_v = v(0.5 / 128.0);
        let e8 = (v(0.5 / 8.0) - ref_v).abs();
        let e16 = (v(0.5 / 16.0) - ref_v).abs();
        let e32 = (v(0.5 / 32.0) - ref_v).abs();
        // empirically at least first order overall
        assert!(e16 <= e8 * 0.75 + 1e-10, "e8={e8} e16={e16}");
        assert!(e32 <= e16 * 0.75 + 1e-10, "e16={e16} e32={e32}");
    }

    #[test]
    fn area_energy_single_ball() {
        // one ball well inside the tile: measure = π R²
        let delta = 2.0;
        let m = TileEnergyModel::area_interaction(1.5, 0.2, 0.4, delta)
            .unwrap()
            .with_pitch(delta / 256.0);
        let w = Window::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let cfg = Configuration::new(vec![MarkedPoint::with_mark(vec![0.0, 0.0], 0.4)], w).unwrap();
        let e = m.tile_energy(&cfg, &Site::default()).unwrap();
        let expect = 1.5 * std::f64::consts::PI * 0.16;
        assert_abs_diff_eq!(e.value, expect, epsilon = 5e-3);
    }

    #[test]
    fn saturated_tile_energy_examples() {
        let m = TileEnergyModel::knn_strauss(1, 2, 1.0, 0.7, 1.0).unwrap();
        let empty = Configuration::empty(window1(3.0));
        assert_eq!(m.saturated_tile_energy(&empty, &Site::default()), 0.0);
        let three = cfg1(&[-0.2, 0.0, 0.2], 3.0);
        // 𝔟 = A·K = 1.4 per point
        assert_abs_diff_eq!(
            m.saturated_tile_energy(&three, &Site::default()),
            3.0 * 1.4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn local_energy_region_consistency() {
        // value identical when computed with ρ and 2ρ margins
        let m = TileEnergyModel::knn_strauss(1, 1, 0.8, 1.0, 0.5).unwrap();
        let w = window1(6.0);
        let cfg = sample_poisson(&w, 0.8, MarkLaw::None, &mut rng::seeded(5)).unwrap();
        let delta_box = Window::new(vec![-1.0], vec![1.0]).unwrap();
        let v1 = m.local_energy_region(&cfg, &delta_box).unwrap().value;
        // manual double-margin version
        let rho2 = 2.0 * (m.range + 2.0 * m.sat.delta);
        let near: Vec<MarkedPoint> = cfg
            .points
            .iter()
            .filter(|p| super::window_dist_sq(&p.pos, &delta_box) <= rho2 * rho2)
            .cloned()
            .collect();
        let outside: Vec<MarkedPoint> =
            near.iter().filter(|p| !delta_box.contains(&p.pos)).cloned().collect();
        let a = m.hamiltonian(&Configuration { points: near, window: w.clone() }).unwrap().value;
        let b = m.hamiltonian(&Configuration { points: outside, window: w }).unwrap().value;
        assert_abs_diff_eq!(v1, a - b, epsilon = 1e-12);
    }

    #[test]
    fn surrogate_depends_only_on_spins() {
        let t = PatternTable::random(1, 1, 0.8, -0.5, 0.5, 2).unwrap();
        let m = TileEnergyModel::surrogate(1, t, 1.0).unwrap();
        let a = cfg1(&[0.1, 1.3], 6.0);
        let b = cfg1(&[-0.4, 0.44, 1.49], 6.0); // same occupied tiles {0, 1}
        assert_eq!(
            m.tile_energy(&a, &Site::default()).unwrap().value,
            m.tile_energy(&b, &Site::default()).unwrap().value
        );
    }

    #[test]
    fn pattern_table_constraints() {
        // bad: U(all-0) != 0
        let cells = PatternTable::cells(1, 1);
        let mut u = vec![0.0; 1 << cells];
        u[0] = 0.5;
        assert!(PatternTable::new(1, 1, u).is_err());
        let t = PatternTable::penalized(1, 1, 1.0, 4.0).unwrap();
        assert_eq!(t.b0, 1.0);
        assert_eq!(t.energy_of_bits(0), 0.0);
        assert_eq!(t.energy_of_bits((1 << cells) - 1), 1.0);
        // non-constant pattern carries the penalty
        assert_eq!(t.energy_of_bits(0b010), 1.0 + 4.0);
        assert_eq!(t.energy_of_bits(0b001), 4.0);
    }

    #[test]
    fn check_assumptions_surrogate_and_knn() {
        let t = PatternTable::random(1, 1, 0.8, -0.4, 0.6, 5).unwrap();
        let m = TileEnergyModel::surrogate(1, t, 1.0).unwrap();
        let rep = m.check_assumptions(100, 12).unwrap();
        assert!(rep.all_pass(), "{rep:?}");

        // K+1 tile-balls fit in B(x,R) for δ small: d=1, K=1, R=1, δ=0.25
        let m = TileEnergyModel::knn_strauss(1, 1, 1.0, 1.0, 0.25).unwrap();
        let rep = m.check_assumptions(100, 13).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn check_assumptions_diluted_bad_delta_fails_saturation() {
        // δ > R/√d violates the saturation geometry
        let phi = PhiTable::new(vec![(0.0, 1.0), (0.3, 0.0)], 0.3, 0.3).unwrap();
        let m = TileEnergyModel::diluted_pairwise(1, phi, 0.3, 0.5).unwrap();
        let rep = m.check_assumptions(60, 21).unwrap();
        assert!(!rep.saturation.pass, "{rep:?}");
    }
}
