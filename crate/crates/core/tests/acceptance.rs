//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 3 asks for a trajectory that the stated vector field cannot produce: the diagonal
//! flow has a rest point at w = 1/2 between the seed and the target. The literal check is run and
//! reported as FAIL. The process exits non-zero only if another criterion fails, or if a part of
//! criterion 3 that is attainable (the field identity, the missing path, the stall itself) breaks.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sinkatlas::corpus::{
    make_cog, make_gadget_2x3, make_shapley, make_three_player, make_two_player, random_game, shapley_cycle,
    three_player_diagonal, GadgetWeights, GameClass,
};
use sinkatlas::dynamics::{
    integrate_correlated, integrate_with, product_matrix, replicator_vector_field_unchecked, CorrelatedState,
    IntegrationOptions, StopCondition,
};
use sinkatlas::evidence::{edge_track, escape_search, shadow_search, EdgeTrackOptions, EscapeOptions};
use sinkatlas::stability::{
    find_local_sources, fixed_point_2x2, is_pseudoconvex_sink, transversal_eigenvalues, LocalSourceOptions,
};
use sinkatlas::verify::{diagonal_field_error, gadget_seed, zh_samples};
use sinkatlas::{
    build_graph, has_path, product_distribution, scc_decomposition, sink_equilibria, Game, MixedProfile, PureProfile,
    Subgame, DEFAULT_TIE_TOL,
};

struct Outcome {
    passed: bool,
    detail: String,
    /// Set when the criterion is known to be unattainable and its attainable parts all hold.
    expected_failure: bool,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self {
            passed,
            detail,
            expected_failure: false,
        }
    }
}

type Res = Result<Outcome, sinkatlas::Error>;

fn zero_sum_pseudoconvexity() -> Res {
    let shapes: Vec<[usize; 2]> = (2..=4).flat_map(|m| (2..=4).map(move |n| [m, n])).collect();
    let mut sinks = 0;
    let mut failures = Vec::new();
    for seed in 0..500u64 {
        let shape = shapes[seed as usize % shapes.len()];
        let g = random_game(&shape, GameClass::ZeroSum, seed)?;
        let pg = build_graph(&g, DEFAULT_TIE_TOL)?;
        for h in sink_equilibria(&pg)? {
            sinks += 1;
            if !is_pseudoconvex_sink(&pg, &h, false)?.verdict {
                failures.push(seed);
            }
        }
    }
    Ok(Outcome::new(
        failures.is_empty(),
        format!("500 games, {sinks} sinks, {} not pseudoconvex {failures:?}", failures.len()),
    ))
}

fn shapley() -> Res {
    let g = make_shapley().game;
    let pg = build_graph(&g, DEFAULT_TIE_TOL)?;
    let sinks = sink_equilibria(&pg)?;
    let unique = sinks.len() == 1 && sinks[0].profiles.len() == 6;
    let h = &sinks[0];
    let weights_ok = shapley_cycle().iter().all(|(t, hd)| {
        pg.signed_weight(g.index_of(hd.coords()), g.index_of(t.coords()))
            .is_some_and(|w| (w - 1.0).abs() <= 1e-12)
    });
    let pc = is_pseudoconvex_sink(&pg, h, false)?.verdict;
    let samples = zh_samples(&g, &h.profiles, 100, 0);
    let positive = samples.iter().filter(|s| s.1 > 0.0).count();
    Ok(Outcome::new(
        unique && weights_ok && pc && samples.len() == 100 && positive == 100,
        format!(
            "unique 6-sink {unique}, unit cycle weights {weights_ok}, pseudoconvex {pc}, dz_H/dt > 0 at {positive}/{}",
            samples.len()
        ),
    ))
}

fn three_player() -> Res {
    let ng = make_three_player();
    let g = &ng.game;
    let pg = build_graph(g, DEFAULT_TIE_TOL)?;
    let (a, b) = (ng.marker("a"), ng.marker("b"));
    let err = diagonal_field_error(g, 1000, 0)?;
    let no_path = !has_path(&pg, a, b)?;
    let target = MixedProfile::pure(g, b)?;
    let run = integrate_with(
        g,
        &three_player_diagonal(0.01),
        &IntegrationOptions {
            t_max: 1e4,
            record_every: usize::MAX,
            stop: StopCondition::Near {
                target: target.clone(),
                radius: 1e-3,
            },
            ..IntegrationOptions::default()
        },
    )?;
    let end = run.final_state();
    let dist = end.distance(&target);
    let reached = dist <= 1e-3;
    let w = end.dist(0)[1];
    let stalled = (0.499..0.5).contains(&w);
    let identity = err <= 1e-10;
    let detail = format!(
        "field identity max error {err:.1e}, has_path(a,b) = {}, trajectory at t = {:.0} has w = {w:.8} and is {dist:.4} from b \
         (the field vanishes at w = 1/2, so the diagonal orbit from w = 0.01 cannot pass it)",
        !no_path,
        run.final_time()
    );
    Ok(Outcome {
        passed: identity && no_path && reached,
        expected_failure: identity && no_path && !reached && stalled,
        detail,
    })
}

fn product_matrix_consistency() -> Res {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..50u64 {
        let shape: &[usize] = if k % 2 == 0 { &[2, 2] } else { &[2, 3] };
        let g = random_game(shape, GameClass::Generic, 1000 + k)?;
        let x0 = MixedProfile::random_interior(&g, &mut rng);
        let every = 10;
        let mixed = integrate_with(
            &g,
            &x0,
            &IntegrationOptions {
                t_max: 10.0,
                record_every: every,
                ..IntegrationOptions::default()
            },
        )?;
        let corr = integrate_correlated(
            &product_matrix(&g),
            &CorrelatedState::from_mixed(&g, &x0),
            10.0,
            sinkatlas::dynamics::DEFAULT_STEP,
            every,
        )?;
        if corr.times.len() != mixed.len() {
            return Ok(Outcome::new(false, format!("record counts differ for game {k}")));
        }
        for (j, z) in corr.states.iter().enumerate() {
            let p = product_distribution(&g, &mixed.state(j));
            for (a, b) in p.iter().zip(z) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(Outcome::new(
        worst <= 1e-5,
        format!("50 games over t = 10, sup-norm gap {worst:.2e} (tolerance 1e-5)"),
    ))
}

fn gadget() -> Res {
    let gd = make_gadget_2x3(&GadgetWeights::default())?;
    let g = &gd.named.game;
    let (xn, yn) = gd.nash_verdicts();
    let one = xn != yn;
    let rule = gd.predicted_nash_is_x_hat() == xn;
    let (from, to) = if xn { (&gd.y_hat, &gd.x_hat) } else { (&gd.x_hat, &gd.y_hat) };
    let s0 = gadget_seed(&gd, 1e-4, -1.0)?;
    let s1 = gadget_seed(&gd, 1e-4, 1.0)?;
    let plain = shadow_search(g, &s0, &s1, to, 1e-2, 400.0, 40)?;
    let tracked = edge_track(g, &s0, &s1, to, 1e-2, &EdgeTrackOptions::default())?;
    Ok(Outcome::new(
        one && rule && tracked.reached,
        format!(
            "Nash x_hat {xn} y_hat {yn}, sign rule agrees {rule}; seed {:.1e} off the non-Nash point: \
             tracked orbit closest {:.2e} at t = {:.0} (max re-seeding jump {:.1e}), plain bisection closest {:.2e}",
            tracked.seed.distance(from),
            tracked.min_distance,
            tracked.time_of_closest,
            tracked.max_jump,
            plain.min_distance
        ),
    ))
}

fn local_source_escape() -> Res {
    let mut lines = Vec::new();
    let mut all = true;
    let mut count = 0;
    for (name, ng) in [("cog", make_cog()), ("fig4", make_two_player())] {
        let g = &ng.game;
        let pg = build_graph(g, DEFAULT_TIE_TOL)?;
        let h = sink_equilibria(&pg)?
            .into_iter()
            .find(|h| h.profiles.contains(g, ng.marker("a")))
            .expect("a lies in a sink");
        let search = find_local_sources(g, &pg, &h, &LocalSourceOptions::default())?;
        if search.certificates.is_empty() {
            all = false;
        }
        for cert in &search.certificates {
            count += 1;
            let out = escape_search(g, &h.profiles, cert, &EscapeOptions::default())?;
            all &= out.escaped;
            lines.push(format!("{name} {} mass {:.6}", cert.subgame, out.min_mass));
        }
    }
    Ok(Outcome::new(all, format!("{count} certificates: {}", lines.join(", "))))
}

fn has_profitable_deviation(g: &Game, p: &PureProfile) -> bool {
    let k = g.index_of(p.coords());
    (0..g.num_players()).any(|i| (0..g.strategy_counts()[i]).any(|s| g.u(i, g.deviate(k, i, s)) > g.u(i, k)))
}

fn structural_suite() -> Res {
    let shapes: [&[usize]; 6] = [&[2, 2], &[3, 3], &[2, 4], &[4, 4], &[2, 2, 2], &[3, 2, 2]];
    let mut no_sink = 0;
    let mut potential_bad = 0;
    let mut games = 0;
    for seed in 0..60u64 {
        let shape = shapes[seed as usize % shapes.len()];
        for class in [GameClass::Generic, GameClass::Potential, GameClass::ZeroSum] {
            if class == GameClass::ZeroSum && shape.len() != 2 {
                continue;
            }
            games += 1;
            let g = random_game(shape, class, seed)?;
            let pg = build_graph(&g, DEFAULT_TIE_TOL)?;
            let sinks = sink_equilibria(&pg)?;
            if sinks.is_empty() {
                no_sink += 1;
            }
            if class == GameClass::Potential {
                let acyclic = scc_decomposition(&pg).iter().all(|c| c.len() == 1);
                let pne = sinks.iter().all(|h| {
                    h.is_singleton_pne && h.profiles.len() == 1 && !has_profitable_deviation(&g, &h.profiles.profiles(&g)[0])
                });
                if !(acyclic && pne) {
                    potential_bad += 1;
                }
            }
        }
    }

    // Face invariance and simplex preservation along every step.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut face_leak = 0.0f64;
    let mut simplex_err = 0.0f64;
    for k in 0..20u64 {
        let g = random_game(shapes[k as usize % shapes.len()], GameClass::Generic, 500 + k)?;
        let mut dists = MixedProfile::random_interior(&g, &mut rng).dists().to_vec();
        dists[0][0] = 0.0;
        let x0 = MixedProfile::normalized(&g, dists)?;
        let tr = integrate_with(
            &g,
            &x0,
            &IntegrationOptions {
                t_max: 20.0,
                ..IntegrationOptions::default()
            },
        )?;
        for j in 0..tr.len() {
            let x = tr.state(j);
            face_leak = face_leak.max(x.dist(0)[0].abs());
            for d in x.dists() {
                simplex_err = simplex_err.max((d.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }

    let eig_err = transversal_vs_jacobian(&mut rng)?;
    let passed = no_sink == 0 && potential_bad == 0 && face_leak <= 1e-9 && simplex_err <= 1e-9 && eig_err <= 1e-5;
    Ok(Outcome::new(
        passed,
        format!(
            "{games} games without a sink: {no_sink}; bad potential games: {potential_bad}; face leak {face_leak:.1e}; \
             simplex error {simplex_err:.1e}; eigenvalue gap {eig_err:.1e} on 50 boundary rest points"
        ),
    ))
}

/// Compares each transversal eigenvalue with a central difference of the field along the
/// direction that moves mass onto the unused strategy.
fn transversal_vs_jacobian(rng: &mut ChaCha8Rng) -> Result<f64, sinkatlas::Error> {
    let mut points: Vec<(Game, MixedProfile)> = Vec::new();
    let mut seed = 0u64;
    while points.len() < 25 {
        let g = random_game(&[2, 3], GameClass::Generic, 9000 + seed)?;
        seed += 1;
        let face = Subgame::new(g.strategy_counts(), vec![vec![0, 1], vec![0, 1]])?;
        if let Some(x) = fixed_point_2x2(&g, &face, DEFAULT_TIE_TOL)? {
            points.push((g, x));
        }
    }
    while points.len() < 50 {
        let shape: &[usize] = if points.len() % 2 == 0 { &[3, 3] } else { &[2, 2, 3] };
        let g = random_game(shape, GameClass::Generic, 9000 + seed)?;
        seed += 1;
        let p = PureProfile::new(shape.iter().map(|&n| rng.gen_range(0..n)).collect());
        let x = MixedProfile::pure(&g, &p)?;
        points.push((g, x));
    }
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (g, x) in &points {
        for ev in transversal_eigenvalues(g, x, 1e-9)? {
            let (i, s) = (ev.player, ev.strategy);
            let r = (0..x.dist(i).len()).find(|&r| x.dist(i)[r] > 1e-9).expect("non-empty support");
            let shifted = |eps: f64| {
                let mut d = x.dists().to_vec();
                d[i][s] += eps;
                d[i][r] -= eps;
                replicator_vector_field_unchecked(g, &d)[i][s]
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max((fd - ev.value).abs());
        }
    }
    Ok(worst)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Res, Option<f64>); 7] = [
        ("zero-sum games are pseudoconvex", zero_sum_pseudoconvexity, Some(10.0)),
        ("Shapley sink", shapley, Some(5.0)),
        ("three-player diagonal orbit", three_player, None),
        ("correlated and mixed integration agree", product_matrix_consistency, None),
        ("2x3 gadget", gadget, None),
        ("local sources escape", local_source_escape, None),
        ("structural properties", structural_suite, None),
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for (n, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (mut ok, expected, detail) = match outcome {
            Ok(o) => (o.passed, o.expected_failure, o.detail),
            Err(e) => (false, false, format!("error: {e}")),
        };
        let mut timing = format!("{secs:.2}s");
        if let Some(limit) = budget {
            timing.push_str(&format!(" of {limit:.0}s"));
            ok &= secs < *limit;
        }
        println!(
            "criterion {} {}: {name}: {detail} [{timing}]{}",
            n + 1,
            if ok { "PASS" } else { "FAIL" },
            if !ok && expected { " (known unattainable)" } else { "" }
        );
        if ok {
            passed += 1;
        } else if !expected {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/7 passed, {unexpected} unexpected failure(s)");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
