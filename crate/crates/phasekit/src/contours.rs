//! Contours of spin fields: site classification, extraction of supports /
//! labels / types / interiors / classes, boundary operators, dominoes, and
//! exhaustive enumeration of compatible contour collections on small boxes.
//!
//! Conventions. A site `i` is ♯-correct when every `j` with `δ‖i−j‖₂ ≤ 2L`
//! carries spin ♯. Supports are the Moore (`‖·‖_∞ ≤ 1`) connected components
//! of the non-correct set — the same metric that defines geometric
//! compatibility `d_∞(γ̄, γ̄') > 1`. On a finite window the exterior is the
//! complement region touching the domain boundary; extraction demands a
//! margin around every non-correct site so this is unambiguous. When several
//! contours share a complement component, the component is an interior of γ
//! exactly when removing γ̄ alone disconnects it from the exterior.

use crate::geometry::{ball_offsets, IBox, Site, SpinField, Tiling};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet, VecDeque};

/// Classification of a lattice site relative to a spin field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteClass {
    /// All spins within `2L` agree on this value.
    Correct(u8),
    NonCorrect,
}

/// `♯`-correct iff all `j` with `δ‖i−j‖₂ ≤ 2L` have spin ♯.
pub fn classify_site(field: &SpinField, i: &Site, l: f64, tiling: &Tiling) -> SiteClass {
    let s0 = field.spin(i);
    for o in ball_offsets(2.0 * l, tiling) {
        if field.spin(&i.add(&o)) != s0 {
            return SiteClass::NonCorrect;
        }
    }
    SiteClass::Correct(s0)
}

/// A contour: connected support with its spins, exterior label (type),
/// interiors split by label, and externality within its extraction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contour {
    /// Support γ̄, sorted.
    pub support: Vec<Site>,
    /// Spins aligned with `support`.
    pub spins: Vec<u8>,
    /// Label of the exterior component.
    pub contour_type: u8,
    /// `(Int₀ γ, Int₁ γ)`: sites of bounded complement components separated
    /// from the exterior by γ̄ alone, split by their label.
    pub interiors: [Vec<Site>; 2],
    /// No other contour of the same extraction encloses this one.
    pub external: bool,
}

impl Contour {
    /// `|Int γ| = |Int₀| + |Int₁|`, counting lattice sites.
    pub fn class(&self) -> usize {
        self.interiors[0].len() + self.interiors[1].len()
    }

    pub fn spin_at(&self, s: &Site) -> Option<u8> {
        self.support
            .binary_search(s)
            .ok()
            .map(|k| self.spins[k])
    }

    pub fn interior_sites(&self) -> impl Iterator<Item = &Site> {
        self.interiors[0].iter().chain(self.interiors[1].iter())
    }

    /// Ordered pairs `(i, j) ∈ γ̄²` with `‖i−j‖_∞ = 1`, spins `(1, 0)`.
    pub fn dominoes(&self) -> Vec<(Site, Site)> {
        let mut out = Vec::new();
        for (ki, i) in self.support.iter().enumerate() {
            if self.spins[ki] != 1 {
                continue;
            }
            for (kj, j) in self.support.iter().enumerate() {
                if self.spins[kj] == 0 && i.dist_inf(j) == 1 {
                    out.push((*i, *j));
                }
            }
        }
        out
    }

    /// Lexicographic minimum of the support (the sort key of extractions).
    pub fn min_site(&self) -> Site {
        self.support[0]
    }
}

/// `d_∞(γ̄, γ̄') > 1`.
pub fn compatible(a: &Contour, b: &Contour) -> bool {
    a.support
        .iter()
        .all(|i| b.support.iter().all(|j| i.dist_inf(j) > 1))
}

/// The four boundary operators on a finite index set, with thresholds
/// `2L`, `2L+δ`, `L+δ`, `L` on the distance `δ·d₂`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySets {
    /// `∂_ext Λ = {j ∉ Λ : δ d₂(j, Λ) ≤ 2L}`.
    pub ext: Vec<Site>,
    /// `∂_int Λ = {j ∈ Λ : δ d₂(j, Λ^c) ≤ 2L + δ}`.
    pub int: Vec<Site>,
    /// `∂Λ = {j ∈ Λ : δ d₂(j, Λ^c) ≤ L + δ}`.
    pub bnd: Vec<Site>,
    /// `∂⁻Λ = {j ∈ Λ : δ d₂(j, Λ^c) ≤ L}`.
    pub bnd_minus: Vec<Site>,
}

pub fn boundary_operators(lambda: &HashSet<Site>, l: f64, tiling: &Tiling) -> BoundarySets {
    let delta = tiling.delta;
    let near = |thr: f64| -> Vec<Site> {
        let offs = ball_offsets(thr, tiling);
        let mut out: BTreeSet<Site> = BTreeSet::new();
        for i in lambda {
            for o in &offs {
                let j = i.add(o);
                if !lambda.contains(&j) {
                    out.insert(j);
                }
            }
        }
        out.into_iter().collect()
    };
    let inner = |thr: f64| -> Vec<Site> {
        let offs = ball_offsets(thr, tiling);
        let mut out: Vec<Site> = lambda
            .iter()
            .filter(|i| offs.iter().any(|o| !lambda.contains(&i.add(o))))
            .copied()
            .collect();
        out.sort();
        out
    };
    BoundarySets {
        ext: near(2.0 * l),
        int: inner(2.0 * l + delta),
        bnd: inner(l + delta),
        bnd_minus: inner(l),
    }
}

/// Extract all contours of the field.
///
/// Errors with "contour touches window" when some non-correct site is within
/// distance `2L/δ + 1` of the domain boundary, and with a numerical error if
/// the unique-label guarantee fails on some complement component.
pub fn extract_contours(field: &SpinField, l: f64, tiling: &Tiling) -> Result<Vec<Contour>> {
    let dim = tiling.dim;
    let domain = &field.domain;
    let n = domain.len();
    let sites = domain.sites(); // row-major; sites[k] has flat index k
    let spins = field.spins();
    let ext_spin = field.exterior_spin;
    let offs2l = ball_offsets(2.0 * l, tiling);
    let offs2ld = ball_offsets(2.0 * l + tiling.delta, tiling);
    let margin = 2.0 * l / tiling.delta + 1.0;

    let get = |s: &Site| -> u8 {
        if domain.contains(s) {
            spins[domain.flat(s)]
        } else {
            ext_spin
        }
    };
    let on_edge = |i: &Site| {
        (0..dim).any(|k| i.0[k] == domain.lo.0[k] || i.0[k] == domain.hi.0[k])
    };

    // --- classification
    let mut noncorrect = vec![false; n];
    let mut any = false;
    for (idx, i) in sites.iter().enumerate() {
        let s0 = spins[idx];
        if offs2l.iter().any(|o| get(&i.add(o)) != s0) {
            let edge = (0..dim)
                .map(|k| (i.0[k] - domain.lo.0[k]).min(domain.hi.0[k] - i.0[k]))
                .min()
                .unwrap() as f64;
            if edge < margin {
                return Err(Error::invalid("contour touches window"));
            }
            noncorrect[idx] = true;
            any = true;
        }
    }
    if !any {
        return Ok(Vec::new());
    }

    let moff: Vec<Site> = IBox::cube(-1, 3, dim)
        .unwrap()
        .sites()
        .into_iter()
        .filter(|o| o.coords(dim).iter().any(|&c| c != 0))
        .collect();

    // --- Moore components: supports over noncorrect, complement over the rest
    let label_components = |want_noncorrect: bool, ids: &mut [i32]| -> Vec<Vec<usize>> {
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut q: VecDeque<usize> = VecDeque::new();
        for start in 0..n {
            if noncorrect[start] != want_noncorrect || ids[start] >= 0 {
                continue;
            }
            let id = comps.len() as i32;
            ids[start] = id;
            q.push_back(start);
            let mut comp = vec![start];
            while let Some(c) = q.pop_front() {
                for o in &moff {
                    let j = sites[c].add(o);
                    if domain.contains(&j) {
                        let jf = domain.flat(&j);
                        if noncorrect[jf] == want_noncorrect && ids[jf] < 0 {
                            ids[jf] = id;
                            comp.push(jf);
                            q.push_back(jf);
                        }
                    }
                }
            }
            comps.push(comp);
        }
        comps
    };
    let mut sup_of = vec![-1i32; n];
    let supports = label_components(true, &mut sup_of);
    let mut comp_of = vec![-1i32; n];
    let comps = label_components(false, &mut comp_of);

    // --- labels, read off ∂_ext A ∪ ∂_int A and asserted constant
    let mut comp_label: Vec<Option<u8>> = vec![None; comps.len()];
    for (k, comp) in comps.iter().enumerate() {
        let check = |lbl: &mut Option<u8>, s: u8| -> Result<()> {
            match *lbl {
                None => {
                    *lbl = Some(s);
                    Ok(())
                }
                Some(v) if v == s => Ok(()),
                Some(v) => Err(Error::numerical(format!(
                    "label not constant on a complement component: saw {v} and {s}"
                ))),
            }
        };
        let in_comp = |s: &Site| domain.contains(s) && comp_of[domain.flat(s)] == k as i32;
        for &idx in comp {
            let i = &sites[idx];
            for o in &offs2l {
                let j = i.add(o);
                if !in_comp(&j) {
                    check(&mut comp_label[k], get(&j))?; // ∂_ext A
                }
            }
            if offs2ld.iter().any(|o| !in_comp(&i.add(o))) {
                check(&mut comp_label[k], spins[idx])?; // ∂_int A
            }
        }
        if comp_label[k].is_none() {
            return Err(Error::numerical("complement component with empty boundary"));
        }
    }
    let comp_label: Vec<u8> = comp_label.into_iter().map(|l| l.unwrap()).collect();

    let comp_touches_edge: Vec<bool> = comps
        .iter()
        .map(|c| c.iter().any(|&idx| on_edge(&sites[idx])))
        .collect();
    let mut exterior_label: Option<u8> = None;
    for k in 0..comps.len() {
        if comp_touches_edge[k] {
            match exterior_label {
                None => exterior_label = Some(comp_label[k]),
                Some(v) if v == comp_label[k] => {}
                Some(v) => {
                    return Err(Error::numerical(format!(
                        "exterior components disagree on the label: {v} vs {}",
                        comp_label[k]
                    )))
                }
            }
        }
    }
    let exterior_label =
        exterior_label.ok_or_else(|| Error::invalid("domain entirely non-correct"))?;

    // --- interiors: bounded components separated from the edge by γ̄ alone
    let bounded: Vec<usize> =
        (0..comps.len()).filter(|&k| !comp_touches_edge[k]).collect();
    // flood fill over all sites except the chosen support
    let escapes = |seed: usize, sup_id: i32| -> bool {
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([seed]);
        seen[seed] = true;
        while let Some(c) = q.pop_front() {
            if on_edge(&sites[c]) {
                return true;
            }
            for o in &moff {
                let j = sites[c].add(o);
                if domain.contains(&j) {
                    let jf = domain.flat(&j);
                    if !seen[jf] && sup_of[jf] != sup_id {
                        seen[jf] = true;
                        q.push_back(jf);
                    }
                }
            }
        }
        false
    };

    let mut contours = Vec::with_capacity(supports.len());
    for (sid, sup) in supports.iter().enumerate() {
        let mut interiors: [Vec<Site>; 2] = [Vec::new(), Vec::new()];
        for &k in &bounded {
            if !escapes(comps[k][0], sid as i32) {
                interiors[comp_label[k] as usize]
                    .extend(comps[k].iter().map(|&idx| sites[idx]));
            }
        }
        interiors[0].sort();
        interiors[1].sort();
        let mut support: Vec<Site> = sup.iter().map(|&idx| sites[idx]).collect();
        support.sort();
        let spins_v = support.iter().map(|s| get(s)).collect();
        contours.push(Contour {
            support,
            spins: spins_v,
            // type = label of the contour's own exterior; under the margin
            // condition that is the global exterior label for every contour
            contour_type: exterior_label,
            interiors,
            external: true,
        });
    }

    // externality: not enclosed by any other contour's interior
    let enclosed: Vec<bool> = contours
        .iter()
        .map(|c| {
            contours.iter().any(|other| {
                !std::ptr::eq(c, other)
                    && other.interior_sites().any(|s| *s == c.support[0])
            })
        })
        .collect();
    for (c, e) in contours.iter_mut().zip(enclosed) {
        c.external = !e;
    }

    contours.sort_by_key(|c| c.min_site());
    Ok(contours)
}

/// Paint a witness spin field for a compatible contour collection on
/// `domain`: background ♯, each support with its spins, each interior
/// filled with its label. Outer contours are painted before enclosed ones.
pub fn witness_field(contours: &[Contour], domain: &IBox, sharp: u8) -> SpinField {
    let mut field = SpinField::constant(domain.clone(), sharp, sharp);
    let mut order: Vec<&Contour> = contours.iter().collect();
    order.sort_by_key(|c| std::cmp::Reverse(c.class()));
    for c in order {
        for (lbl, sites) in c.interiors.iter().enumerate() {
            for s in sites {
                if domain.contains(s) {
                    field.set(s, lbl as u8);
                }
            }
        }
        for (s, v) in c.support.iter().zip(c.spins.iter()) {
            if domain.contains(s) {
                field.set(s, *v);
            }
        }
    }
    field
}

/// Witness field with consistent labels on every bounded complement
/// component, including regions enclosed jointly by several contours that
/// are the interior of none of them. Such a region takes the spin of its
/// adjacent support sites; `None` when those spins disagree (the collection
/// is then not jointly arrangeable) or when a boundary region demands a
/// label other than ♯.
pub fn labeled_witness(contours: &[Contour], domain: &IBox, sharp: u8) -> Option<SpinField> {
    let mut field = witness_field(contours, domain, sharp);
    let dim = domain.dim;
    let n = domain.len();
    let sites = domain.sites();
    let mut in_support = vec![false; n];
    let mut spin_of = vec![0u8; n];
    for c in contours {
        for (s, v) in c.support.iter().zip(c.spins.iter()) {
            if domain.contains(s) {
                let k = domain.flat(s);
                in_support[k] = true;
                spin_of[k] = *v;
            }
        }
    }
    let moff: Vec<Site> = IBox::cube(-1, 3, dim)
        .unwrap()
        .sites()
        .into_iter()
        .filter(|o| o.0.iter().any(|&x| x != 0))
        .collect();
    let on_edge =
        |i: &Site| (0..dim).any(|k| i.0[k] == domain.lo.0[k] || i.0[k] == domain.hi.0[k]);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] || in_support[start] {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut touches_edge = false;
        let mut adj: Option<u8> = None;
        let mut consistent = true;
        while let Some(k) = queue.pop_front() {
            if on_edge(&sites[k]) {
                touches_edge = true;
            }
            for o in &moff {
                let j = sites[k].add(o);
                if !domain.contains(&j) {
                    continue;
                }
                let jf = domain.flat(&j);
                if in_support[jf] {
                    match adj {
                        None => adj = Some(spin_of[jf]),
                        Some(a) if a != spin_of[jf] => consistent = false,
                        _ => {}
                    }
                } else if !seen[jf] {
                    seen[jf] = true;
                    comp.push(jf);
                    queue.push_back(jf);
                }
            }
        }
        if !consistent {
            return None;
        }
        if touches_edge {
            if adj.is_some_and(|a| a != sharp) {
                return None;
            }
        } else if let Some(a) = adj {
            for k in comp {
                field.set(&sites[k], a);
            }
        }
    }
    Some(field)
}

/// All contours achievable by some spin field on `lambda` under background
/// spin ♯, deduplicated. Guarded by `cap` on the number of fields scanned.
pub fn achievable_contours(
    lambda: &IBox,
    sharp: u8,
    l: f64,
    tiling: &Tiling,
    cap: usize,
) -> Result<Vec<Contour>> {
    let n = lambda.len();
    if n >= usize::BITS as usize || (1usize << n) > cap {
        return Err(Error::CapExceeded(format!(
            "2^{n} spin fields exceed the enumeration cap {cap}"
        )));
    }
    let margin = 2 * (2.0 * l / tiling.delta).ceil() as i64 + 2;
    let domain = lambda.grown(margin);
    let cells = lambda.sites();
    let mut pool: BTreeSet<Contour> = BTreeSet::new();
    for bits in 0..(1usize << n) {
        let mut field = SpinField::constant(domain.clone(), sharp, sharp);
        for (k, s) in cells.iter().enumerate() {
            field.set(s, (bits >> k & 1) as u8);
        }
        for c in extract_contours(&field, l, tiling)? {
            pool.insert(c);
        }
    }
    Ok(pool.into_iter().collect())
}

/// Enumerate `C^♯_n(Λ)`: all jointly achievable, pairwise compatible
/// collections of contours of type ♯ and class ≤ `max_class` placed with
/// `d_∞(γ̄, Λ^c) > 1`. Includes the empty collection. Joint achievability is
/// verified by a witness field round trip.
pub fn enumerate_compatible_sets(
    lambda: &IBox,
    sharp: u8,
    max_class: usize,
    l: f64,
    tiling: &Tiling,
    cap: usize,
) -> Result<Vec<Vec<Contour>>> {
    let dim = tiling.dim;
    // d_∞(i, Λ^c) = 1 + edge distance, so "> 1" allows supports one site in
    let margin_ok = |c: &Contour| {
        c.support.iter().all(|i| {
            (0..dim).all(|k| i.0[k] - lambda.lo.0[k] >= 1 && lambda.hi.0[k] - i.0[k] >= 1)
        })
    };
    let pool: Vec<Contour> = achievable_contours(lambda, sharp, l, tiling, cap)?
        .into_iter()
        .filter(|c| c.contour_type == sharp && c.class() <= max_class && margin_ok(c))
        .collect();

    let ext_margin = 2 * (2.0 * l / tiling.delta).ceil() as i64 + 2;
    let domain = lambda.grown(ext_margin);
    let mut out: Vec<Vec<Contour>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    // depth-first over index-increasing compatible subsets
    fn rec(
        pool: &[Contour],
        start: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<Contour>>,
        cap: usize,
        verify: &dyn Fn(&[usize]) -> bool,
    ) -> Result<()> {
        if out.len() > cap {
            return Err(Error::CapExceeded(format!(
                "more than {cap} compatible collections"
            )));
        }
        if verify(stack) {
            out.push(stack.iter().map(|&k| pool[k].clone()).collect());
        }
        for k in start..pool.len() {
            if stack.iter().all(|&j| compatible(&pool[j], &pool[k])) {
                stack.push(k);
                rec(pool, k + 1, stack, out, cap, verify)?;
                stack.pop();
            }
        }
        Ok(())
    }
    let verify = |idx: &[usize]| -> bool {
        let gamma: Vec<Contour> = idx.iter().map(|&k| pool[k].clone()).collect();
        let Some(field) = labeled_witness(&gamma, &domain, sharp) else {
            return false;
        };
        match extract_contours(&field, l, tiling) {
            Ok(mut got) => {
                let mut want = gamma;
                want.sort_by_key(|c| c.min_site());
                got.sort_by_key(|c| c.min_site());
                got == want
            }
            Err(_) => false,
        }
    };
    rec(&pool, 0, &mut stack, &mut out, cap, &verify)?;
    out.sort();
    Ok(out)
}
