//! Birth–death–move Metropolis–Hastings for the finite-volume measures.
//!
//! The chain targets the unnormalized density `e^{−β(E_{Λ∖∂Λ} + Ē_{∂Λ})}`
//! relative to the Poisson reference on `Λ̂`, restricted by the boundary
//! event: under `♯ = 0` the `∂_int Λ` tiles must stay empty, under `♯ = 1`
//! they must stay occupied. The energy is finite range, so a move only
//! changes tile energies in a bounded neighbourhood; per-tile energies are
//! cached and the cache is re-validated periodically against a full
//! recompute.

use crate::contours::{boundary_operators, extract_contours};
use crate::energy::{ModelKind, TileEnergyModel};
use crate::geometry::{Configuration, IBox, MarkedPoint, Site, SpinField, Window};
use crate::rng;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Proposal mix: birth 40%, death 40%, translation 20%.
const P_BIRTH: f64 = 0.4;
const P_DEATH: f64 = 0.4;
/// Translation jitter scale in units of δ.
const JITTER: f64 = 0.5;
/// Steps between full cache revalidations.
const RECHECK_EVERY: u64 = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Birth,
    Death,
    Translate,
}

#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub kind: MoveKind,
    pub accepted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub n: usize,
    pub rho: f64,
    pub occupied_frac: f64,
    pub n_contours: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Accepted counts by move type (birth, death, translate).
    pub accepts: [u64; 3],
    /// Proposal counts by move type.
    pub proposals: [u64; 3],
}

enum Change {
    Add(MarkedPoint),
    Remove(usize),
    Move(usize, MarkedPoint),
}

/// One MCMC chain for `P_Λ^♯`.
pub struct ChainState {
    pub model: TileEnergyModel,
    pub lambda: IBox,
    pub sharp: u8,
    pub z: f64,
    pub beta: f64,
    pub points: Vec<MarkedPoint>,
    pub step: u64,
    sites: Vec<Site>,
    idx: HashMap<Site, usize>,
    counts: Vec<usize>,
    e_cache: Vec<f64>,
    forced: Vec<bool>,
    bnd: Vec<bool>,
    /// Per-site neighbourhood whose energies a change in that tile can touch.
    neigh: Vec<Vec<usize>>,
    /// Birth sites (all of Λ under ♯ = 1, the non-forced sites under ♯ = 0).
    allowed: Vec<usize>,
    window: Window,
    rng: ChaCha8Rng,
    pub accepts: [u64; 3],
    pub proposals: [u64; 3],
}

impl ChainState {
    pub fn new(
        model: TileEnergyModel,
        lambda: IBox,
        sharp: u8,
        z: f64,
        beta: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::with_stream(model, lambda, sharp, z, beta, seed, 0)
    }

    /// Independent chain on RNG stream `stream` of `seed`.
    pub fn with_stream(
        model: TileEnergyModel,
        lambda: IBox,
        sharp: u8,
        z: f64,
        beta: f64,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        if sharp > 1 || !(z > 0.0) || !(beta >= 0.0) {
            return Err(Error::invalid("need sharp in {0,1}, z > 0, beta >= 0"));
        }
        let tiling = model.tiling();
        let sites = lambda.sites();
        let idx: HashMap<Site, usize> = sites.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let set = sites.iter().copied().collect();
        let b = boundary_operators(&set, model.sat.l, &tiling);
        let mut forced = vec![false; sites.len()];
        let mut bnd = vec![false; sites.len()];
        for s in &b.int {
            forced[idx[s]] = true;
        }
        for s in &b.bnd {
            bnd[idx[s]] = true;
        }
        let delta = tiling.delta;
        let neigh: Vec<Vec<usize>> = match &model.kind {
            ModelKind::Surrogate(t) => {
                let rho = t.rho as i64;
                sites
                    .iter()
                    .map(|a| {
                        sites
                            .iter()
                            .enumerate()
                            .filter(|(_, b)| a.dist_inf(b) <= rho)
                            .map(|(k, _)| k)
                            .collect()
                    })
                    .collect()
            }
            _ => {
                let aff = 2.0 * model.range + delta * ((model.dim as f64).sqrt() + 1.0);
                let cap = (aff / delta) * (aff / delta);
                sites
                    .iter()
                    .map(|a| {
                        sites
                            .iter()
                            .enumerate()
                            .filter(|(_, b)| (a.dist2_sq(b) as f64) <= cap + 1e-9)
                            .map(|(k, _)| k)
                            .collect()
                    })
                    .collect()
            }
        };
        let allowed: Vec<usize> = (0..sites.len())
            .filter(|&k| sharp == 1 || !forced[k])
            .collect();
        if allowed.is_empty() {
            return Err(Error::invalid("no admissible birth tiles"));
        }
        let mut points = Vec::new();
        if sharp == 1 {
            for (k, s) in sites.iter().enumerate() {
                if forced[k] {
                    let pos = tiling.tile_center(s);
                    let mark = match model.kind {
                        ModelKind::AreaInteraction { r1, r2, .. } => Some(0.5 * (r1 + r2)),
                        _ => None,
                    };
                    points.push(MarkedPoint { pos, mark });
                }
            }
        }
        let window = lambda.hat(&tiling);
        let mut st = ChainState {
            model,
            lambda,
            sharp,
            z,
            beta,
            points,
            step: 0,
            sites,
            idx,
            counts: Vec::new(),
            e_cache: Vec::new(),
            forced,
            bnd,
            neigh,
            allowed,
            window,
            rng: rng::stream(seed, stream),
            accepts: [0; 3],
            proposals: [0; 3],
        };
        st.counts = st.counts_of(&st.points);
        st.e_cache = st.full_energies(&st.points, &st.counts)?;
        debug_assert!(st.boundary_ok());
        Ok(st)
    }

    fn counts_of(&self, points: &[MarkedPoint]) -> Vec<usize> {
        let tiling = self.model.tiling();
        let mut counts = vec![0usize; self.sites.len()];
        for p in points {
            counts[self.idx[&tiling.tile_of(&p.pos)]] += 1;
        }
        counts
    }

    fn sat_energy(&self, count: usize) -> f64 {
        self.model.sat.b * count as f64 + self.model.sat.b0 * (count > 0) as u8 as f64
    }

    fn tile_value(
        &self,
        k: usize,
        counts: &[usize],
        cfg: Option<&Configuration>,
    ) -> Result<f64> {
        if self.bnd[k] {
            return Ok(self.sat_energy(counts[k]));
        }
        match &self.model.kind {
            ModelKind::Surrogate(t) => Ok(t.energy_of_bits(t.bits_at(&self.sites[k], |s| {
                self.idx.get(s).map_or(0, |&j| (counts[j] > 0) as u8)
            }))),
            _ => {
                let cfg = cfg.expect("non-surrogate energies need the configuration");
                Ok(self.model.tile_energy(cfg, &self.sites[k])?.value)
            }
        }
    }

    fn full_energies(&self, points: &[MarkedPoint], counts: &[usize]) -> Result<Vec<f64>> {
        let cfg = match self.model.kind {
            ModelKind::Surrogate(_) => None,
            _ => Some(Configuration {
                points: points.to_vec(),
                window: self.window.clone(),
            }),
        };
        (0..self.sites.len())
            .map(|k| self.tile_value(k, counts, cfg.as_ref()))
            .collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.e_cache.iter().sum()
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn tile_count(&self, s: &Site) -> usize {
        self.idx.get(s).map_or(0, |&k| self.counts[k])
    }

    pub fn boundary_ok(&self) -> bool {
        self.forced.iter().zip(self.counts.iter()).all(|(&f, &n)| {
            !f || (self.sharp == 1) == (n > 0)
        })
    }

    fn birth_volume(&self) -> f64 {
        let d = self.model.dim as i32;
        self.allowed.len() as f64 * self.model.sat.delta.powi(d)
    }

    fn sample_mark(&mut self) -> Option<f64> {
        match self.model.kind {
            ModelKind::AreaInteraction { r1, r2, .. } => Some(if r1 == r2 {
                r1
            } else {
                self.rng.gen_range(r1..=r2)
            }),
            _ => None,
        }
    }

    /// Affected tile indices and their energies after the change.
    fn evaluate(&self, change: &Change) -> Result<(Vec<usize>, Vec<f64>)> {
        let tiling = self.model.tiling();
        let mut counts = self.counts.clone();
        let mut touched = Vec::new();
        let cfg = match change {
            Change::Add(p) => {
                let t = self.idx[&tiling.tile_of(&p.pos)];
                counts[t] += 1;
                touched.push(t);
                self.cfg_with(|pts| pts.push(p.clone()))
            }
            Change::Remove(j) => {
                let t = self.idx[&tiling.tile_of(&self.points[*j].pos)];
                counts[t] -= 1;
                touched.push(t);
                self.cfg_with(|pts| {
                    pts.swap_remove(*j);
                })
            }
            Change::Move(j, p) => {
                let from = self.idx[&tiling.tile_of(&self.points[*j].pos)];
                let to = self.idx[&tiling.tile_of(&p.pos)];
                counts[from] -= 1;
                counts[to] += 1;
                touched.push(from);
                touched.push(to);
                let p = p.clone();
                let j = *j;
                self.cfg_with(move |pts| pts[j] = p)
            }
        };
        let mut affected: Vec<usize> = touched
            .iter()
            .flat_map(|&t| self.neigh[t].iter().copied())
            .collect();
        affected.sort_unstable();
        affected.dedup();
        let vals = affected
            .iter()
            .map(|&k| self.tile_value(k, &counts, cfg.as_ref()))
            .collect::<Result<Vec<f64>>>()?;
        Ok((affected, vals))
    }

    fn cfg_with<F: FnOnce(&mut Vec<MarkedPoint>)>(&self, edit: F) -> Option<Configuration> {
        match self.model.kind {
            ModelKind::Surrogate(_) => None,
            _ => {
                let mut pts = self.points.clone();
                edit(&mut pts);
                Some(Configuration { points: pts, window: self.window.clone() })
            }
        }
    }

    fn accept(&mut self, change: Change, affected: Vec<usize>, vals: Vec<f64>) {
        let tiling = self.model.tiling();
        match change {
            Change::Add(p) => {
                self.counts[self.idx[&tiling.tile_of(&p.pos)]] += 1;
                self.points.push(p);
            }
            Change::Remove(j) => {
                self.counts[self.idx[&tiling.tile_of(&self.points[j].pos)]] -= 1;
                self.points.swap_remove(j);
            }
            Change::Move(j, p) => {
                self.counts[self.idx[&tiling.tile_of(&self.points[j].pos)]] -= 1;
                self.counts[self.idx[&tiling.tile_of(&p.pos)]] += 1;
                self.points[j] = p;
            }
        }
        for (k, v) in affected.into_iter().zip(vals) {
            self.e_cache[k] = v;
        }
    }

    /// One birth/death/translation proposal; returns what was proposed and
    /// whether it was accepted.
    pub fn mh_step(&mut self) -> Result<StepInfo> {
        self.step += 1;
        let u: f64 = self.rng.gen();
        let (kind, slot) = if u < P_BIRTH {
            (MoveKind::Birth, 0)
        } else if u < P_BIRTH + P_DEATH {
            (MoveKind::Death, 1)
        } else {
            (MoveKind::Translate, 2)
        };
        self.proposals[slot] += 1;
        let tiling = self.model.tiling();
        let n = self.points.len();
        let outcome: Option<(Change, f64)> = match kind {
            MoveKind::Birth => {
                let site = self.sites[self.allowed[self.rng.gen_range(0..self.allowed.len())]];
                let (lo, _) = tiling.tile_bounds(&site);
                let pos: Vec<f64> = lo
                    .iter()
                    .map(|c| c + self.rng.gen_range(0.0..tiling.delta))
                    .collect();
                let mark = self.sample_mark();
                let factor = (self.z * self.birth_volume()).ln() - ((n + 1) as f64).ln();
                Some((Change::Add(MarkedPoint { pos, mark }), factor))
            }
            MoveKind::Death => {
                if n == 0 {
                    None
                } else {
                    let j = self.rng.gen_range(0..n);
                    let t = self.idx[&tiling.tile_of(&self.points[j].pos)];
                    if self.sharp == 1 && self.forced[t] && self.counts[t] == 1 {
                        None
                    } else {
                        let factor = (n as f64).ln() - (self.z * self.birth_volume()).ln();
                        Some((Change::Remove(j), factor))
                    }
                }
            }
            MoveKind::Translate => {
                if n == 0 {
                    None
                } else {
                    let j = self.rng.gen_range(0..n);
                    let scale = JITTER * tiling.delta;
                    let pos: Vec<f64> = self.points[j]
                        .pos
                        .iter()
                        .map(|c| c + scale * self.rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    if !self.window.contains(&pos) {
                        None
                    } else {
                        let to = tiling.tile_of(&pos);
                        let from = self.idx[&tiling.tile_of(&self.points[j].pos)];
                        match self.idx.get(&to) {
                            None => None,
                            Some(&tk)
                                if (self.sharp == 0 && self.forced[tk])
                                    || (self.sharp == 1
                                        && self.forced[from]
                                        && self.counts[from] == 1
                                        && tk != from) =>
                            {
                                None
                            }
                            Some(_) => {
                                let mark = self.points[j].mark;
                                Some((Change::Move(j, MarkedPoint { pos, mark }), 0.0))
                            }
                        }
                    }
                }
            }
        };
        let Some((change, log_factor)) = outcome else {
            return Ok(StepInfo { kind, accepted: false });
        };
        let (affected, vals) = self.evaluate(&change)?;
        let delta_e: f64 = affected
            .iter()
            .zip(vals.iter())
            .map(|(&k, v)| v - self.e_cache[k])
            .sum();
        let log_acc = log_factor - self.beta * delta_e;
        let accepted = log_acc >= 0.0 || self.rng.gen::<f64>().ln() < log_acc;
        if accepted {
            self.accept(change, affected, vals);
            self.accepts[slot] += 1;
        }
        Ok(StepInfo { kind, accepted })
    }

    /// Occupancy spin field on Λ padded so that contour extraction never
    /// touches the window.
    fn occupancy_field(&self) -> SpinField {
        let tiling = self.model.tiling();
        let pad = 2 * (2.0 * self.model.sat.l / tiling.delta).ceil() as i64 + 2;
        let mut field = SpinField::constant(self.lambda.grown(pad), self.sharp, self.sharp);
        for (k, s) in self.sites.iter().enumerate() {
            field.set(s, (self.counts[k] > 0) as u8);
        }
        field
    }

    pub fn n_contours(&self) -> Result<usize> {
        let tiling = self.model.tiling();
        Ok(extract_contours(&self.occupancy_field(), self.model.sat.l, &tiling)?.len())
    }

    /// Advance `n_steps`, recording every `thin` steps. Deterministic for a
    /// fixed seed; periodically revalidates the energy cache and aborts if
    /// it drifted.
    pub fn run_chain(&mut self, n_steps: u64, thin: u64) -> Result<Trace> {
        if thin == 0 {
            return Err(Error::invalid("thin must be positive"));
        }
        let mut trace = Trace::default();
        let vol = self.lambda.len() as f64 * self.model.sat.delta.powi(self.model.dim as i32);
        for k in 1..=n_steps {
            self.mh_step()?;
            if self.step % RECHECK_EVERY == 0 {
                let fresh = self.full_energies(&self.points, &self.counts)?;
                for (k, (c, f)) in self.e_cache.iter().zip(fresh.iter()).enumerate() {
                    if (c - f).abs() > 1e-8 * (1.0 + f.abs()) {
                        return Err(Error::numerical(format!(
                            "energy cache drift at step {}, tile {:?}: cached {c}, fresh {f}",
                            self.step, self.sites[k]
                        )));
                    }
                }
                self.e_cache = fresh;
            }
            if k % thin == 0 {
                assert!(self.boundary_ok(), "boundary event violated at step {}", self.step);
                let n = self.points.len();
                let occ = self.counts.iter().filter(|&&c| c > 0).count();
                trace.rows.push(TraceRow {
                    step: self.step,
                    n,
                    rho: n as f64 / vol,
                    occupied_frac: occ as f64 / self.sites.len() as f64,
                    n_contours: self.n_contours()?,
                });
            }
        }
        trace.accepts = self.accepts;
        trace.proposals = self.proposals;
        Ok(trace)
    }
}

/// `log dP_Λ^♯/dΠ_Λ̂^z(ω)` up to normalization: `−β(E_{Λ∖∂Λ} + Ē_{∂Λ})`
/// with `−∞` when the boundary event fails.
pub fn target_logdensity(
    model: &TileEnergyModel,
    lambda: &IBox,
    sharp: u8,
    beta: f64,
    omega: &Configuration,
) -> Result<f64> {
    let tiling = model.tiling();
    let sites = lambda.sites();
    let set = sites.iter().copied().collect();
    let b = boundary_operators(&set, model.sat.l, &tiling);
    let occupied = |s: &Site| omega.points.iter().any(|p| tiling.tile_of(&p.pos) == *s);
    for s in &b.int {
        if occupied(s) != (sharp == 1) {
            return Ok(f64::NEG_INFINITY);
        }
    }
    let bnd: std::collections::HashSet<Site> = b.bnd.into_iter().collect();
    let mut total = 0.0;
    for s in &sites {
        total += if bnd.contains(s) {
            model.saturated_tile_energy(omega, s)
        } else {
            model.tile_energy(omega, s)?.value
        };
    }
    Ok(-beta * total)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub z: f64,
    pub sharp: u8,
    pub rho_mean: f64,
    pub rho_se: f64,
    pub occ_mean: f64,
}

/// Batch-means mean and standard error.
pub fn batch_means(samples: &[f64], batches: usize) -> (f64, f64) {
    let b = batches.max(2).min(samples.len().max(2));
    let per = (samples.len() / b).max(1);
    let means: Vec<f64> = samples
        .chunks(per)
        .take(b)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        / (means.len() as f64 - 1.0).max(1.0);
    (m, (var / means.len() as f64).sqrt())
}

/// Density and occupancy estimates for both boundary conditions over an
/// activity grid. Replicas and grid points run concurrently on independent
/// RNG streams; the first 20% of each chain is discarded as burn-in.
pub fn hysteresis_scan(
    model: &TileEnergyModel,
    lambda: &IBox,
    beta: f64,
    z_grid: &[f64],
    steps: u64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    if z_grid.is_empty() || replicas == 0 || steps < 10 {
        return Err(Error::invalid("need a nonempty grid, replicas >= 1, steps >= 10"));
    }
    let thin = (steps / 10_000).max(1);
    let jobs: Vec<(usize, u8, usize)> = z_grid
        .iter()
        .enumerate()
        .flat_map(|(zi, _)| {
            (0..replicas).flat_map(move |r| [(zi, 0u8, r), (zi, 1u8, r)])
        })
        .collect();
    let per_job: Vec<Result<(usize, u8, Vec<f64>, Vec<f64>)>> = jobs
        .par_iter()
        .map(|&(zi, sharp, rep)| {
            let stream = ((zi * 2 + sharp as usize) * replicas + rep) as u64;
            let mut chain = ChainState::with_stream(
                model.clone(),
                lambda.clone(),
                sharp,
                z_grid[zi],
                beta,
                seed,
                stream,
            )?;
            let trace = chain.run_chain(steps, thin)?;
            let burn = trace.rows.len() / 5;
            let rho: Vec<f64> = trace.rows[burn..].iter().map(|r| r.rho).collect();
            let occ: Vec<f64> = trace.rows[burn..].iter().map(|r| r.occupied_frac).collect();
            Ok((zi, sharp, rho, occ))
        })
        .collect();
    let mut merged: HashMap<(usize, u8), (Vec<f64>, Vec<f64>)> = HashMap::new();
    for job in per_job {
        let (zi, sharp, rho, occ) = job?;
        let e = merged.entry((zi, sharp)).or_default();
        e.0.extend(rho);
        e.1.extend(occ);
    }
    let mut rows = Vec::new();
    for ((zi, sharp), (rho, occ)) in merged {
        let (rho_mean, rho_se) = batch_means(&rho, 50);
        let occ_mean = occ.iter().sum::<f64>() / occ.len() as f64;
        rows.push(ScanRow { z: z_grid[zi], sharp, rho_mean, rho_se, occ_mean });
    }
    rows.sort_by(|a, b| (a.z, a.sharp).partial_cmp(&(b.z, b.sharp)).unwrap());
    Ok(rows)
}
