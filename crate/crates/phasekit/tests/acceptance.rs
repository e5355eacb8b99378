//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Run with `--nocapture` to see the lines in order.

use std::collections::BTreeSet;
use std::time::Instant;

use phasekit::contours::{
    boundary_operators, enumerate_compatible_sets, extract_contours, witness_field, Contour,
};
use phasekit::energy::{PatternTable, PhiTable, TileEnergyModel};
use phasekit::geometry::{IBox, Site, SpinField, Tiling};
use phasekit::peierls::{
    cd_constant, configuration_for_field, critical_window, estimate_b_plus,
    find_truncation_epsilon, mc_check_theta, random_island_field, theta_epsilon, GapVariant,
    PotentialProfile,
};
use phasekit::polymer::{zbar, PressureLadder, SurrogateSystem};
use phasekit::rng;
use phasekit::sampler::{batch_means, ChainState};
use rand::Rng;

fn report(n: usize, name: &str, f: impl FnOnce() + std::panic::UnwindSafe) {
    let t = Instant::now();
    match std::panic::catch_unwind(f) {
        Ok(()) => println!(
            "criterion {n} ({name}): pass [{:.1}s]",
            t.elapsed().as_secs_f64()
        ),
        Err(e) => {
            println!("criterion {n} ({name}): FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

/// Condition-margin terms by uniform sampling in the square [-r2, r2]^2;
/// returns (margin, standard error). Matches the analytic d = 2 margin
/// c_2 * I_ball(R) - ((R1/R)^2 - 1) * I_shell - I_neg.
fn mc_margin(phi: &PhiTable, big_r: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng::seeded(seed);
    let cd = cd_constant(2).unwrap();
    let ratio = (phi.r1 / big_r).powi(2) - 1.0;
    let r2 = phi.r2;
    let (mut s, mut q) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let y = [r.gen_range(-r2..r2), r.gen_range(-r2..r2)];
        let rad2 = y[0] * y[0] + y[1] * y[1];
        let mut w = 0.0;
        if rad2 <= r2 * r2 {
            let v = phi.value(rad2.sqrt());
            if rad2 <= big_r * big_r {
                w += cd * v.max(0.0);
            } else if rad2 <= phi.r1 * phi.r1 {
                w -= ratio * v.max(0.0);
            }
            w -= (-v).max(0.0);
        }
        s += w;
        q += w * w;
    }
    let square = 4.0 * r2 * r2;
    let mean = s / n as f64;
    let var = q / n as f64 - mean * mean;
    (square * mean, square * (var / n as f64).sqrt())
}

fn condition_phi() -> PhiTable {
    // hard positive core with a small negative tail; passes the analytic
    // condition at R = 0.5 in d = 2
    PhiTable::new(vec![(0.0, 5.0), (0.4, 5.0), (0.6, -0.2), (1.0, 0.0)], 0.8, 1.0).unwrap()
}

#[test]
fn criterion_1_polymer_identity() {
    report(1, "polymer identity", || {
        let mut cases = 0usize;
        for (seed, z, beta) in [(1u64, 0.6, 0.8), (2, 1.2, 0.4), (3, 0.9, 1.5), (4, 0.5, 2.2)] {
            let table = PatternTable::random(1, 1, 0.8, -0.3, 0.9, seed).unwrap();
            let model = TileEnergyModel::surrogate(1, table, 1.0).unwrap();
            let sys = SurrogateSystem::new(model, z, beta).unwrap();
            for n in [10i64, 13] {
                let lam = IBox::cube(0, n, 1).unwrap();
                for sharp in [0u8, 1] {
                    let chk = sys.polymer_development(&lam, sharp).unwrap();
                    assert!(
                        chk.rel_err <= 1e-10,
                        "1d seed {seed} n {n} sharp {sharp}: rel {}",
                        chk.rel_err
                    );
                    cases += 1;
                }
            }
        }
        // the largest 1-d volume
        {
            let table = PatternTable::random(1, 1, 0.6, -0.2, 0.8, 9).unwrap();
            let model = TileEnergyModel::surrogate(1, table, 1.0).unwrap();
            let sys = SurrogateSystem::new(model, 0.9, 1.1).unwrap();
            let lam = IBox::cube(0, 14, 1).unwrap();
            for sharp in [0u8, 1] {
                let chk = sys.polymer_development(&lam, sharp).unwrap();
                assert!(chk.rel_err <= 1e-10, "1d n 14 sharp {sharp}: rel {}", chk.rel_err);
                assert!(chk.contours_enumerated > 0);
                cases += 1;
            }
        }
        // 2-d
        {
            let table = PatternTable::random(1, 2, 0.8, -0.2, 0.7, 9).unwrap();
            let model = TileEnergyModel::surrogate(2, table, 1.0).unwrap();
            let sys = SurrogateSystem::new(model, 0.8, 1.2).unwrap();
            let lam = IBox::cube(0, 4, 2).unwrap();
            for sharp in [0u8, 1] {
                let chk = sys.polymer_development(&lam, sharp).unwrap();
                assert!(chk.rel_err <= 1e-10, "2d sharp {sharp}: rel {}", chk.rel_err);
                cases += 1;
            }
        }
        assert!(cases >= 20, "only {cases} instances");
    });
}

#[test]
fn criterion_2_closed_forms() {
    report(2, "closed forms", || {
        // Z-bar against the Poisson series
        let mut r = rng::seeded(3);
        for _ in 0..40 {
            let z: f64 = r.gen_range(0.05..3.0);
            let beta: f64 = r.gen_range(0.0..4.0);
            let b0: f64 = r.gen_range(-1.0..2.0);
            let delta: f64 = r.gen_range(0.3..1.5);
            let d = r.gen_range(1..=3usize);
            let v = z * delta.powi(d as i32);
            let mut series1 = 0.0f64;
            let mut term = (-v).exp();
            for n in 1..=120usize {
                term *= v / n as f64;
                series1 += term;
            }
            series1 *= (-beta * b0).exp();
            let series0 = (-v).exp();
            let z0 = zbar(0, z, beta, b0, delta, d).unwrap();
            let z1 = zbar(1, z, beta, b0, delta, d).unwrap();
            assert!((z0 - series0).abs() / series0 <= 1e-12);
            assert!((z1 - series1).abs() / series1 <= 1e-12, "{z1} vs {series1}");
        }
        // geometric constants
        assert!((cd_constant(2).unwrap() - 1.0 / 3.0).abs() <= 1e-10);
        assert!((cd_constant(3).unwrap() - 1.0 / 4.0).abs() <= 1e-10);
        assert_eq!(theta_epsilon(1.0, 2.0, 2).unwrap(), 1.0 / 3.0);
        // window endpoints
        let (zm, zp) = critical_window(1.0, 0.0, 0.0, 1.0, 1).unwrap();
        assert!((zm - (-2.0f64).exp().ln_1p()).abs() <= 1e-12);
        assert!((zp - 2.0f64.exp().ln_1p()).abs() <= 1e-12);
    });
}

#[test]
fn criterion_3_saturation_suite() {
    report(3, "saturation suite", || {
        let t0 = Instant::now();
        let quadrature_tol = 1e-4;
        let models: Vec<(&str, TileEnergyModel, bool)> = vec![
            (
                "surrogate",
                TileEnergyModel::surrogate(
                    2,
                    PatternTable::random(1, 2, 0.8, -0.4, 0.6, 5).unwrap(),
                    1.0,
                )
                .unwrap(),
                false,
            ),
            (
                "knn-strauss",
                TileEnergyModel::knn_strauss(1, 1, 1.0, 1.0, 0.25).unwrap(),
                false,
            ),
            (
                "area-interaction",
                TileEnergyModel::area_interaction(0.8, 0.3, 0.5, 0.2).unwrap(),
                true,
            ),
            (
                "diluted-pairwise",
                TileEnergyModel::diluted_pairwise(
                    2,
                    PhiTable::new(vec![(0.0, 2.0), (0.3, 0.0), (0.4, -0.1)], 0.3, 0.4).unwrap(),
                    0.4,
                    0.28,
                )
                .unwrap(),
                true,
            ),
        ];
        for (name, m, quadrature) in models {
            let rep = m.check_assumptions(1000, 17).unwrap();
            assert!(rep.all_pass(), "{name}: {rep:?}");
            if quadrature {
                assert!(
                    rep.max_reported_err <= quadrature_tol,
                    "{name}: quadrature error {} at default pitch",
                    rep.max_reported_err
                );
            }
        }
        assert!(t0.elapsed().as_secs() <= 300, "over the 5 min budget");
    });
}

/// Spin-field brute force over all fields on Λ under background ♯: keep the
/// contour collections of fields whose flipped sites stay one site clear of
/// the Λ faces.
fn brute_force_sets(
    lambda: &IBox,
    sharp: u8,
    l: f64,
    tiling: &Tiling,
) -> Vec<Vec<Contour>> {
    let dim = tiling.dim;
    let margin = 2 * (2.0 * l / tiling.delta).ceil() as i64 + 2;
    let domain = lambda.grown(margin);
    let cells = lambda.sites();
    let margin_ok = |c: &Contour| {
        c.support.iter().all(|i| {
            (0..dim).all(|k| i.0[k] - lambda.lo.0[k] >= 1 && lambda.hi.0[k] - i.0[k] >= 1)
        })
    };
    let mut sets: BTreeSet<Vec<Contour>> = BTreeSet::new();
    for bits in 0..(1usize << cells.len()) {
        let mut field = SpinField::constant(domain.clone(), sharp, sharp);
        for (k, s) in cells.iter().enumerate() {
            field.set(s, (bits >> k & 1) as u8);
        }
        let cs = extract_contours(&field, l, tiling).unwrap();
        if cs.iter().all(|c| c.contour_type == sharp && margin_ok(c)) {
            sets.insert(cs);
        }
    }
    sets.into_iter().collect()
}

fn min_domino_ratio(side: i64, n_fields: usize, l: f64, tiling: &Tiling) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..n_fields {
        let mut r = rng::stream(508, side as u64 * 10_000 + k as u64);
        let sharp = (k % 2) as u8;
        let f = random_island_field(side, sharp, 3, 6, &mut r);
        for c in extract_contours(&f, l, tiling).unwrap() {
            let ratio = c.dominoes().len() as f64 / c.support.len() as f64;
            best = best.min(ratio);
        }
    }
    assert!(best.is_finite(), "no contours at side {side}");
    best
}

#[test]
fn criterion_4_contour_machinery() {
    report(4, "contour machinery", || {
        let tl = Tiling::new(1.0, 2).unwrap();
        // extraction round-trip and label constancy on 10^4 random fields
        for seed in 0..10_000u64 {
            let mut r = rng::stream(31, seed);
            let sharp = (seed % 2) as u8;
            let f = random_island_field(32, sharp, 3, 6, &mut r);
            let cs = extract_contours(&f, 1.0, &tl).unwrap();
            for c in &cs {
                for (s, sp) in c.support.iter().zip(&c.spins) {
                    assert_eq!(f.spin(s), *sp, "seed {seed}: spin drift on support");
                }
            }
            let rebuilt = witness_field(&cs, &f.domain, sharp);
            let cs2 = extract_contours(&rebuilt, 1.0, &tl).unwrap();
            assert_eq!(cs, cs2, "seed {seed}: round trip");
        }
        // enumeration vs brute force
        let t1 = Tiling::new(1.0, 1).unwrap();
        for n in [10i64, 12] {
            let lambda = IBox::cube(0, n, 1).unwrap();
            for sharp in [0u8, 1] {
                let got =
                    enumerate_compatible_sets(&lambda, sharp, usize::MAX, 1.0, &t1, 1 << 22)
                        .unwrap();
                let want = brute_force_sets(&lambda, sharp, 1.0, &t1);
                assert_eq!(got, want, "1d n {n} sharp {sharp}");
                assert!(got.len() > 1);
            }
        }
        let lambda = IBox::cube(0, 4, 2).unwrap();
        for sharp in [0u8, 1] {
            let got =
                enumerate_compatible_sets(&lambda, sharp, usize::MAX, 1.0, &tl, 1 << 22).unwrap();
            let want = brute_force_sets(&lambda, sharp, 1.0, &tl);
            assert_eq!(got, want, "2d sharp {sharp}");
        }
        // domino min-ratio: positive and non-decaying with volume
        let r16 = min_domino_ratio(16, 200, 1.0, &tl);
        let r64 = min_domino_ratio(64, 200, 1.0, &tl);
        assert!(r16 > 0.0 && r64 > 0.0, "r16 {r16} r64 {r64}");
        assert!(r64 + 1e-12 >= r16, "decaying domino ratio: {r16} -> {r64}");
    });
}

#[test]
fn criterion_5_peierls_diagnostics() {
    report(5, "peierls diagnostics", || {
        // profile passes the analytic condition, confirmed by MC at 3 sigma
        let phi = condition_phi();
        let profile = PotentialProfile::new(phi.clone(), 0.5, 2).unwrap();
        let margin = profile.condition_margin().unwrap();
        assert!(margin > 0.0);
        let (mc, se) = mc_margin(&phi, 0.5, 2_000_000, 7);
        assert!((margin - mc).abs() <= 3.0 * se, "margin {margin} vs MC {mc} ± {se}");

        // gap/|support| > 0 over a 10^3-configuration corpus
        let model = TileEnergyModel::diluted_pairwise(2, phi, 0.5, 0.5).unwrap();
        // empty-background corpus: occupied islands, slabs and checkerboards
        // in vacuum (the wired-side corpus runs on the surrogate, where both
        // labels are cheap; here every point slows the quadrature)
        let side = 72i64;
        let mut fields: Vec<SpinField> = centered_adversarial(side, 0);
        let n_adv = fields.len();
        for k in 0..(1000 - n_adv) {
            let mut r = rng::stream(61, k as u64);
            fields.push(random_island_field(side, 0, 2, 28, &mut r));
        }
        assert_eq!(fields.len(), 1000);
        let rep =
            estimate_b_plus(&model, &fields, GapVariant::MinusInnerBoundary, 99).unwrap();
        assert!(rep.pass && rep.b_plus > 0.0, "b_plus {}", rep.b_plus);

        // escape-probability inequality on 20 instances
        let theta_model = {
            let phi = PhiTable::new(vec![(0.0, 1.0), (0.75, 0.0)], 0.75, 0.75).unwrap();
            TileEnergyModel::diluted_pairwise(2, phi, 0.75, 0.5).unwrap()
        };
        let tiling = theta_model.tiling();
        let (big_r, r1) = (0.75, 0.75);
        let eps = 0.9 * big_r * 0.9;
        let theta = theta_epsilon(eps, r1, 2).unwrap();
        for inst in 0..20u64 {
            let mut r = rng::stream(41, inst);
            let field = random_island_field(56, 0, 3, 24, &mut r);
            let omega = configuration_for_field(&theta_model, &field, &mut r).unwrap();
            let contours = extract_contours(&field, theta_model.sat.l, &tiling).unwrap();
            let gamma = contours.iter().max_by_key(|c| c.support.len()).unwrap();
            let (ratio, se) =
                mc_check_theta(&omega, gamma, eps, big_r, r1, &tiling, 100_000, inst).unwrap();
            assert!(
                ratio >= theta - 3.0 * se,
                "instance {inst}: ratio {ratio} ± {se} below theta {theta}"
            );
        }
    });
}

/// Adversarial occupancy patterns (islands, a slab, a checkerboard block)
/// with margins wide enough for long-range tile energies.
fn centered_adversarial(side: i64, sharp: u8) -> Vec<SpinField> {
    let dom = IBox::cube(0, side, 2).unwrap();
    let mid = side / 2;
    let flip = 1 - sharp;
    let mut out = Vec::new();
    for w in 1..=3i64 {
        let mut f = SpinField::constant(dom.clone(), sharp, sharp);
        for dx in 0..w {
            for dy in 0..w {
                f.set(&Site::new(&[mid + dx, mid + dy]), flip);
            }
        }
        out.push(f);
    }
    let mut slab = SpinField::constant(dom.clone(), sharp, sharp);
    for x in mid - 6..mid + 6 {
        for dy in 0..2 {
            slab.set(&Site::new(&[x, mid + dy]), flip);
        }
    }
    out.push(slab);
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

#[test]
fn criterion_6_sampler_correctness() {
    report(6, "sampler correctness", || {
        // beta = 0: bulk point count is Poisson(z * free volume)
        let model = TileEnergyModel::surrogate(
            1,
            PatternTable::random(1, 1, 0.5, -0.2, 0.6, 4).unwrap(),
            1.0,
        )
        .unwrap();
        let lam = IBox::cube(0, 12, 1).unwrap();
        let z = 0.8;
        let mut chain = ChainState::new(model, lam, 0, z, 0.0, 5).unwrap();
        let trace = chain.run_chain(400_000, 40).unwrap();
        assert!(chain.boundary_ok());
        let burn = trace.rows.len() / 5;
        let ns: Vec<f64> = trace.rows[burn..].iter().map(|r| r.n as f64).collect();
        let (mean, se) = batch_means(&ns, 50);
        let want = z * 6.0;
        assert!((mean - want).abs() <= 3.0 * se, "mean {mean} vs {want} (se {se})");

        // 2-tile chain vs the exact target: total variation at 10^6 steps
        let model = TileEnergyModel::surrogate(
            1,
            PatternTable::saturated(1, 1, 0.6).unwrap(),
            1.0,
        )
        .unwrap();
        let lam = IBox::cube(0, 2, 1).unwrap();
        let z = 1.3;
        let mut chain = ChainState::new(model, lam, 1, z, 0.7, 21).unwrap();
        let (s0, s1) = (Site::new(&[0]), Site::new(&[1]));
        let cap = 3usize;
        let mut hist = vec![0u64; (cap + 1) * (cap + 1)];
        let steps = 1_000_000u64;
        for step in 0..steps {
            chain.mh_step().unwrap();
            if step % 1000 == 0 {
                assert!(chain.boundary_ok(), "boundary violated at step {step}");
            }
            let a = chain.tile_count(&s0).min(cap);
            let b = chain.tile_count(&s1).min(cap);
            hist[a * (cap + 1) + b] += 1;
        }
        assert!(chain.boundary_ok());
        let p = |n: usize| -> f64 {
            let norm = z.exp() - 1.0;
            match n {
                0 => 0.0,
                n if n < cap => z.powi(n as i32) / (1..=n).product::<usize>() as f64 / norm,
                _ => {
                    let mut head = 0.0;
                    for k in 1..cap {
                        head += z.powi(k as i32) / (1..=k).product::<usize>() as f64;
                    }
                    1.0 - head / norm
                }
            }
        };
        let mut tv = 0.0;
        for a in 0..=cap {
            for b in 0..=cap {
                let emp = hist[a * (cap + 1) + b] as f64 / steps as f64;
                tv += (emp - p(a) * p(b)).abs();
            }
        }
        tv *= 0.5;
        assert!(tv <= 1e-2, "total variation {tv}");
    });
}

/// Mean per-tile point count over the central bulk of Λ, by batch means.
fn bulk_density(
    model: &TileEnergyModel,
    lam: &IBox,
    bulk: &[Site],
    sharp: u8,
    z: f64,
    beta: f64,
    stream: u64,
    steps: u64,
) -> (f64, f64) {
    let mut chain =
        ChainState::with_stream(model.clone(), lam.clone(), sharp, z, beta, 2024, stream)
            .unwrap();
    let burn = steps / 4;
    let thin = 100u64;
    let mut samples = Vec::new();
    for step in 0..steps {
        chain.mh_step().unwrap();
        if step >= burn && step % thin == 0 {
            let n: usize = bulk.iter().map(|s| chain.tile_count(s)).sum();
            samples.push(n as f64 / bulk.len() as f64);
        }
    }
    assert!(chain.boundary_ok());
    batch_means(&samples, 50)
}

#[test]
fn criterion_7_phase_coexistence() {
    report(7, "phase coexistence", || {
        let t0 = Instant::now();
        let (beta, b0, penalty) = (5.0, 0.5, 1.5);
        let model = TileEnergyModel::surrogate(
            1,
            PatternTable::penalized(1, 1, b0, penalty).unwrap(),
            1.0,
        )
        .unwrap();
        let lam = IBox::cube(0, 16, 1).unwrap();
        let tiling = model.tiling();
        let set = lam.sites().iter().copied().collect();
        let forced = boundary_operators(&set, model.sat.l, &tiling).int;
        // central bulk: at least four tiles clear of the forced layer
        let bulk: Vec<Site> = lam
            .sites()
            .into_iter()
            .filter(|s| forced.iter().all(|f| (s.0[0] - f.0[0]).abs() >= 4))
            .collect();
        assert!(bulk.len() >= 4, "bulk of {} tiles", bulk.len());

        let (zm, zp) = critical_window(beta, 0.0, b0, 1.0, 1).unwrap();
        let steps = 2_500_000u64;

        // window center: wired and free disagree strongly
        let zc = 0.5 * (zm + zp);
        let (m0, se0) = bulk_density(&model, &lam, &bulk, 0, zc, beta, 0, steps);
        let (m1, se1) = bulk_density(&model, &lam, &bulk, 1, zc, beta, 1, steps);
        let gap = m1 - m0;
        let se = se0.hypot(se1);
        assert!(gap > 5.0 * se, "density jump {gap} vs 5 se {}", 5.0 * se);

        // far below the window: the boundary condition no longer matters
        let zl = 0.5 * zm;
        let (l0, t0e) = bulk_density(&model, &lam, &bulk, 0, zl, beta, 2, steps);
        let (l1, t1e) = bulk_density(&model, &lam, &bulk, 1, zl, beta, 3, steps);
        let agree = (l1 - l0).abs();
        let sel = t0e.hypot(t1e);
        assert!(agree <= 2.0 * sel, "low-z disagreement {agree} vs 2 se {}", 2.0 * sel);
        assert!(t0.elapsed().as_secs() <= 900, "over the 15 min budget");
    });
}

#[test]
fn criterion_8_critical_bracketing() {
    report(8, "critical bracketing", || {
        let beta = 5.0;
        let b0 = 1.0;
        let model = TileEnergyModel::surrogate(
            1,
            PatternTable::penalized(1, 1, b0, 4.0).unwrap(),
            1.0,
        )
        .unwrap();
        let boxes = vec![IBox::cube(0, 10, 1).unwrap(), IBox::cube(0, 14, 1).unwrap()];
        let ladder = PressureLadder::new(model, beta, boxes).unwrap();
        let (zm, zp) = critical_window(beta, 0.0, b0, 1.0, 1).unwrap();

        assert!(ladder.g(zm, 1).unwrap() < 0.0);
        assert!(ladder.g(zp, 1).unwrap() > 0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let z = zm + (zp - zm) * k as f64 / 19.0;
            let g = ladder.g(z, 1).unwrap();
            assert!(g > prev, "G not strictly increasing at z {z}");
            prev = g;
        }

        let (a1, b1) = ladder.bracket_critical_activity((zm, zp), 1, 1e-10).unwrap();
        let (a2, b2) = ladder.bracket_critical_activity((zm, zp), 2, 1e-10).unwrap();
        let mid1 = 0.5 * (a1 + b1);
        assert!(a2 <= mid1 && mid1 <= b2, "rank-2 [{a2}, {b2}] misses rank-1 midpoint {mid1}");

        let (a0, b0r) = ladder.bracket_critical_activity((zm, zp), 0, 1e-12).unwrap();
        let root = 0.5 * (a0 + b0r);
        let want = (beta * b0).exp().ln_1p();
        assert!((root - want).abs() <= 1e-10, "rank-0 root {root} vs {want}");
    });
}

#[test]
fn criterion_9_truncation_search() {
    report(9, "truncation search", || {
        // diverging positive trend at the origin with a weak negative tail
        let phi = PhiTable::from_fn(|r| r.powi(-3) - 2.0, 400, 0.8, 1.0).unwrap();
        let profile = PotentialProfile::new(phi, 0.5, 2).unwrap();
        let (eps, truncated) = find_truncation_epsilon(&profile).unwrap();
        assert!(eps > 0.0 && eps <= 0.5);
        assert!(truncated.check().unwrap().0);
        let margin = truncated.condition_margin().unwrap();
        assert!(margin > 0.0);
        let (mc, se) = mc_margin(&truncated.phi, 0.5, 2_000_000, 13);
        assert!(mc > 3.0 * se, "MC margin {mc} not positive at 3 sigma (se {se})");
        assert!((margin - mc).abs() <= 3.0 * se, "analytic {margin} vs MC {mc} ± {se}");
    });
}
