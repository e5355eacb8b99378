//! Points, configurations, windows, the δ-tiling of `Z^d`, occupancy spin
//! fields, and Poisson sampling.
//!
//! Tiles follow the half-open convention `T_i = [-δ/2, δ/2)^d + iδ`, so the
//! tiles partition `R^d` exactly and a point on a tile face belongs to the
//! tile whose center is "up-right".

use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Maximum lattice dimension supported by site arithmetic.
pub const MAX_DIM: usize = 3;

/// A lattice site of `Z^d` (d ≤ [`MAX_DIM`]; unused coordinates stay 0).
#[derive(
    Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, Serialize, Deserialize,
)]
pub struct Site(pub [i64; MAX_DIM]);

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        let mut c = [0i64; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    pub fn coords(&self, dim: usize) -> &[i64] {
        &self.0[..dim]
    }

    pub fn add(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
        Site(c)
    }

    /// Squared Euclidean distance between two sites (in index units).
    pub fn dist2_sq(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Chebyshev distance `d_∞`.
    pub fn dist_inf(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap()
    }
}

/// An axis-aligned bounding box in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("window bounds must share a positive dimension"));
        }
        if lo.iter().zip(hi.iter()).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("window must have positive extent in every axis"));
        }
        Ok(Window { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(self.hi.iter()).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(xi, (a, b))| *xi >= *a && *xi < *b)
    }
}

/// A located point with an optional radius mark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub pos: Vec<f64>,
    pub mark: Option<f64>,
}

impl MarkedPoint {
    pub fn new(pos: Vec<f64>) -> Self {
        MarkedPoint { pos, mark: None }
    }

    pub fn with_mark(pos: Vec<f64>, mark: f64) -> Self {
        MarkedPoint { pos, mark: Some(mark) }
    }
}

/// A finite configuration of marked points inside a window.
///
/// Duplicate positions are rejected at construction so that distance ties
/// broken lexicographically on coordinates are total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<MarkedPoint>,
    pub window: Window,
}

impl Configuration {
    pub fn new(points: Vec<MarkedPoint>, window: Window) -> Result<Self> {
        for p in &points {
            if p.pos.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("point coordinates must be finite"));
            }
            if !window.contains(&p.pos) {
                return Err(Error::invalid(format!(
                    "point {:?} outside the window",
                    p.pos
                )));
            }
        }
        let mut sorted: Vec<&[f64]> = points.iter().map(|p| p.pos.as_slice()).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate point positions are not allowed"));
        }
        Ok(Configuration { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Configuration { points: Vec::new(), window }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The points within Euclidean distance `r` of `center`.
    pub fn restrict_ball(&self, center: &[f64], r: f64) -> Vec<&MarkedPoint> {
        self.points
            .iter()
            .filter(|p| dist_sq(&p.pos, center) <= r * r)
            .collect()
    }
}

/// Squared Euclidean distance between two real vectors.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The δ-paving of `R^d` by half-open cubes `T_i = [-δ/2, δ/2)^d + iδ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    pub delta: f64,
    pub dim: usize,
}

impl Tiling {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid("tile side delta must be positive and finite"));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension must be in 1..={MAX_DIM}")));
        }
        Ok(Tiling { delta, dim })
    }

    /// The unique `i` with `x ∈ T_i`.
    pub fn tile_of(&self, x: &[f64]) -> Site {
        debug_assert_eq!(x.len(), self.dim);
        let mut c = [0i64; MAX_DIM];
        for (k, xi) in x.iter().enumerate() {
            c[k] = (xi / self.delta + 0.5).floor() as i64;
        }
        Site(c)
    }

    pub fn tile_center(&self, i: &Site) -> Vec<f64> {
        i.coords(self.dim).iter().map(|&c| c as f64 * self.delta).collect()
    }

    /// Half-open bounds `[lo, hi)` of tile `T_i`.
    pub fn tile_bounds(&self, i: &Site) -> (Vec<f64>, Vec<f64>) {
        let c = self.tile_center(i);
        let h = self.delta / 2.0;
        (c.iter().map(|x| x - h).collect(), c.iter().map(|x| x + h).collect())
    }
}

/// A finite inclusive box of lattice sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IBox {
    pub lo: Site,
    pub hi: Site,
    pub dim: usize,
}

impl IBox {
    pub fn new(lo: Site, hi: Site, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension must be in 1..={MAX_DIM}")));
        }
        if (0..dim).any(|k| lo.0[k] > hi.0[k]) {
            return Err(Error::invalid("box lower corner exceeds upper corner"));
        }
        Ok(IBox { lo, hi, dim })
    }

    /// The centered box `{-n..n}^d`-style: `[0, side-1]^d` shifted to start at `lo0`.
    pub fn cube(lo0: i64, side: i64, dim: usize) -> Result<Self> {
        IBox::new(
            Site::new(&vec![lo0; dim]),
            Site::new(&vec![lo0 + side - 1; dim]),
            dim,
        )
    }

    pub fn contains(&self, s: &Site) -> bool {
        (0..self.dim).all(|k| self.lo.0[k] <= s.0[k] && s.0[k] <= self.hi.0[k])
    }

    pub fn len(&self) -> usize {
        (0..self.dim)
            .map(|k| (self.hi.0[k] - self.lo.0[k] + 1) as usize)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grow the box by `m` in every direction.
    pub fn grown(&self, m: i64) -> IBox {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for k in 0..self.dim {
            lo.0[k] -= m;
            hi.0[k] += m;
        }
        IBox { lo, hi, dim: self.dim }
    }

    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.lo;
        loop {
            out.push(cur);
            // odometer increment over the dim leading coordinates
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur.0[k] < self.hi.0[k] {
                    cur.0[k] += 1;
                    break;
                }
                cur.0[k] = self.lo.0[k];
            }
        }
    }

    /// Flat row-major index of a contained site.
    pub fn flat(&self, s: &Site) -> usize {
        let mut idx = 0usize;
        for k in 0..self.dim {
            let w = (self.hi.0[k] - self.lo.0[k] + 1) as usize;
            idx = idx * w + (s.0[k] - self.lo.0[k]) as usize;
        }
        idx
    }

    /// The continuum window `∪_{i∈box} T_i`.
    pub fn hat(&self, tiling: &Tiling) -> Window {
        let h = tiling.delta / 2.0;
        let lo = (0..self.dim)
            .map(|k| self.lo.0[k] as f64 * tiling.delta - h)
            .collect();
        let hi = (0..self.dim)
            .map(|k| self.hi.0[k] as f64 * tiling.delta + h)
            .collect();
        Window { lo, hi }
    }
}

/// Offsets `o ∈ Z^d` with `δ‖o‖₂ ≤ radius` (the site `0` included).
pub fn ball_offsets(radius: f64, tiling: &Tiling) -> Vec<Site> {
    let r_units = radius / tiling.delta;
    let m = r_units.floor() as i64;
    let r2 = r_units * r_units;
    let mut out = Vec::new();
    let cube = IBox::cube(-m, 2 * m + 1, tiling.dim).expect("radius box");
    for s in cube.sites() {
        let d2: i64 = (0..tiling.dim).map(|k| s.0[k] * s.0[k]).sum();
        if (d2 as f64) <= r2 + 1e-12 {
            out.push(s);
        }
    }
    out
}

/// The occupancy field σ(ω, ·) ∈ {0,1} on a finite domain with an exterior
/// default spin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinField {
    pub domain: IBox,
    spins: Vec<u8>,
    pub exterior_spin: u8,
}

impl SpinField {
    pub fn new(domain: IBox, spins: Vec<u8>, exterior_spin: u8) -> Result<Self> {
        if spins.len() != domain.len() {
            return Err(Error::invalid("spin vector length must match domain size"));
        }
        if spins.iter().any(|&s| s > 1) || exterior_spin > 1 {
            return Err(Error::invalid("spins must be 0 or 1"));
        }
        Ok(SpinField { domain, spins, exterior_spin })
    }

    pub fn constant(domain: IBox, spin: u8, exterior_spin: u8) -> Self {
        let n = domain.len();
        SpinField { domain, spins: vec![spin; n], exterior_spin }
    }

    pub fn spin(&self, s: &Site) -> u8 {
        if self.domain.contains(s) {
            self.spins[self.domain.flat(s)]
        } else {
            self.exterior_spin
        }
    }

    pub fn set(&mut self, s: &Site, v: u8) {
        let idx = self.domain.flat(s);
        self.spins[idx] = v;
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }
}

/// `σ(ω, i)`: 1 iff `ω ∩ T_i ≠ ∅`.
pub fn occupancy(omega: &Configuration, i: &Site, tiling: &Tiling) -> u8 {
    omega
        .points
        .iter()
        .any(|p| tiling.tile_of(&p.pos) == *i) as u8
}

/// Aggregate per-tile occupancy over a finite domain into a [`SpinField`].
pub fn spin_field(
    omega: &Configuration,
    domain: &IBox,
    exterior_spin: u8,
    tiling: &Tiling,
) -> SpinField {
    let mut f = SpinField::constant(domain.clone(), 0, exterior_spin);
    for p in &omega.points {
        let i = tiling.tile_of(&p.pos);
        if domain.contains(&i) {
            f.set(&i, 1);
        }
    }
    f
}

/// Membership test for the homogeneous neighborhood `Ω_{i,L}^{(♯)}`:
/// every `j` with `δ‖i−j‖₂ ≤ L` satisfies `σ(ω, j) = ♯`.
pub fn is_homogeneous(
    omega: &Configuration,
    i: &Site,
    l: f64,
    sharp: u8,
    tiling: &Tiling,
) -> bool {
    ball_offsets(l, tiling)
        .iter()
        .all(|o| occupancy(omega, &i.add(o), tiling) == sharp)
}

/// How marks are drawn during sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MarkLaw {
    /// No marks.
    None,
    /// Radii uniform in `[r1, r2]`.
    RadiusUniform { r1: f64, r2: f64 },
}

/// Sample a Poisson point process of activity `z` on the window.
///
/// The count is Poisson(z·|window|), positions i.i.d. uniform, marks i.i.d.
/// from `mark_law`. Deterministic for a fixed generator state.
pub fn sample_poisson<R: Rng>(
    window: &Window,
    z: f64,
    mark_law: MarkLaw,
    rng: &mut R,
) -> Result<Configuration> {
    if !(z > 0.0) {
        return Err(Error::invalid("activity z must be positive"));
    }
    let mean = z * window.volume();
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::invalid("window volume must be positive and finite"));
    }
    let n = Poisson::new(mean)
        .map_err(|e| Error::invalid(format!("poisson: {e}")))?
        .sample(rng) as usize;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let pos: Vec<f64> = window
            .lo
            .iter()
            .zip(window.hi.iter())
            .map(|(a, b)| rng.gen_range(*a..*b))
            .collect();
        let mark = match mark_law {
            MarkLaw::None => None,
            MarkLaw::RadiusUniform { r1, r2 } => Some(if r1 == r2 {
                r1
            } else {
                rng.gen_range(r1..=r2)
            }),
        };
        points.push(MarkedPoint { pos, mark });
    }
    Configuration::new(points, window.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn t(delta: f64, dim: usize) -> Tiling {
        Tiling::new(delta, dim).unwrap()
    }

    #[test]
    fn tile_of_frozen_examples() {
        assert_eq!(t(1.0, 1).tile_of(&[0.49]), Site::new(&[0]));
        assert_eq!(t(1.0, 1).tile_of(&[0.5]), Site::new(&[1]));
        assert_eq!(t(0.5, 2).tile_of(&[0.74, -0.26]), Site::new(&[1, -1]));
    }

    #[test]
    fn tile_bounds_are_half_open() {
        let tl = t(1.0, 1);
        // -0.5 is owned by tile 0, 0.5 by tile 1
        assert_eq!(tl.tile_of(&[-0.5]), Site::new(&[0]));
        assert_eq!(tl.tile_of(&[0.5 - 1e-12]), Site::new(&[0]));
    }

    #[test]
    fn occupancy_examples() {
        let tl = t(1.0, 1);
        let w = Window::new(vec![-5.0], vec![5.0]).unwrap();
        let empty = Configuration::empty(w.clone());
        for i in -3..=3 {
            assert_eq!(occupancy(&empty, &Site::new(&[i]), &tl), 0);
        }
        let one = Configuration::new(vec![MarkedPoint::new(vec![0.1])], w).unwrap();
        assert_eq!(occupancy(&one, &Site::new(&[0]), &tl), 1);
        assert_eq!(occupancy(&one, &Site::new(&[1]), &tl), 0);
    }

    #[test]
    fn spin_field_example() {
        let tl = t(1.0, 1);
        let w = Window::new(vec![-0.5], vec![4.5]).unwrap();
        let omega = Configuration::new(
            vec![MarkedPoint::new(vec![0.1]), MarkedPoint::new(vec![1.2])],
            w,
        )
        .unwrap();
        let dom = IBox::cube(0, 5, 1).unwrap();
        let f = spin_field(&omega, &dom, 0, &tl);
        let got: Vec<u8> = dom.sites().iter().map(|s| f.spin(s)).collect();
        assert_eq!(got, vec![1, 1, 0, 0, 0]);
    }

    #[test]
    fn homogeneity_examples() {
        let tl = t(1.0, 1);
        let w = Window::new(vec![-3.0], vec![3.0]).unwrap();
        let empty = Configuration::empty(w.clone());
        assert!(is_homogeneous(&empty, &Site::new(&[0]), 2.0, 0, &tl));
        let full = Configuration::new(
            (-2..=2).map(|i| MarkedPoint::new(vec![i as f64 + 0.1])).collect(),
            w.clone(),
        )
        .unwrap();
        assert!(is_homogeneous(&full, &Site::new(&[0]), 2.0, 1, &tl));
        let minus_two = Configuration::new(
            (-2..=1).map(|i| MarkedPoint::new(vec![i as f64 + 0.1])).collect(),
            w,
        )
        .unwrap();
        assert!(!is_homogeneous(&minus_two, &Site::new(&[0]), 2.0, 1, &tl));
    }

    #[test]
    fn duplicate_positions_rejected() {
        let w = Window::new(vec![0.0], vec![1.0]).unwrap();
        let r = Configuration::new(
            vec![MarkedPoint::new(vec![0.25]), MarkedPoint::new(vec![0.25])],
            w,
        );
        assert!(r.is_err());
    }

    #[test]
    fn poisson_mean_and_determinism() {
        let w = Window::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let reps = 10_000usize;
        let mut total = 0usize;
        for s in 0..reps {
            let mut r = rng::stream(7, s as u64);
            total += sample_poisson(&w, 10.0, MarkLaw::None, &mut r).unwrap().len();
        }
        let mean = total as f64 / reps as f64;
        let tol = 3.0 * (10.0f64 / reps as f64).sqrt();
        assert!((mean - 10.0).abs() <= tol, "mean {mean} not within {tol} of 10");

        let a = sample_poisson(&w, 10.0, MarkLaw::None, &mut rng::seeded(42)).unwrap();
        let b = sample_poisson(&w, 10.0, MarkLaw::None, &mut rng::seeded(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_thinning() {
        // Count restricted to a sub-window has mean z·|W'| (5σ at 1e4 replicas).
        let w = Window::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let sub = Window::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        let z = 6.0;
        let reps = 10_000usize;
        let mut total = 0usize;
        for s in 0..reps {
            let mut r = rng::stream(11, s as u64);
            let cfg = sample_poisson(&w, z, MarkLaw::None, &mut r).unwrap();
            total += cfg.points.iter().filter(|p| sub.contains(&p.pos)).count();
        }
        let mean = total as f64 / reps as f64;
        let expect = z * sub.volume();
        let tol = 5.0 * (expect / reps as f64).sqrt();
        assert!((mean - expect).abs() <= tol, "thinned mean {mean} vs {expect}");
    }

    proptest! {
        #[test]
        fn partition_property(x in -50.0f64..50.0, delta in 0.1f64..3.0) {
            // exactly one tile owns x: tile_of picks it and its bounds contain x
            let tl = t(delta, 1);
            let i = tl.tile_of(&[x]);
            let (lo, hi) = tl.tile_bounds(&i);
            prop_assert!(lo[0] <= x && x < hi[0]);
        }

        #[test]
        fn translation_covariance(x in -20.0f64..20.0, u in -15i64..15, delta in 0.1f64..2.0) {
            let tl = t(delta, 1);
            let a = tl.tile_of(&[x + delta * u as f64]);
            let b = tl.tile_of(&[x]);
            // exact up to fp rounding at the tile boundary; use a point
            // away from faces to keep it exact
            let frac = (x / delta + 0.5).fract().abs();
            prop_assume!(frac > 1e-6 && frac < 1.0 - 1e-6);
            prop_assert_eq!(a.0[0], b.0[0] + u);
        }

        #[test]
        fn counts_add_up(n in 0usize..30) {
            // N_Λ̂ = Σ_i N_{T_i}
            let tl = t(1.0, 2);
            let w = Window::new(vec![-2.5, -2.5], vec![2.5, 2.5]).unwrap();
            let mut r = rng::seeded(n as u64);
            let pts: Vec<MarkedPoint> = (0..n)
                .map(|_| MarkedPoint::new(vec![r.gen_range(-2.5..2.5), r.gen_range(-2.5..2.5)]))
                .collect();
            let cfg = Configuration::new(pts, w).unwrap();
            let dom = IBox::cube(-2, 5, 2).unwrap();
            let total: usize = dom.sites().iter().map(|i| {
                cfg.points.iter().filter(|p| tl.tile_of(&p.pos) == *i).count()
            }).sum();
            prop_assert_eq!(total, cfg.len());
        }
    }
}
