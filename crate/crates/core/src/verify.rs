//! Scripted checks for each named game: structural assertions followed by simulation evidence.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    cog_block, dominance_face, make_gadget_2x3, shapley_cycle, three_player_block, three_player_diagonal,
    two_player_gadget_block, CorpusId, Gadget, GadgetWeights, NamedGame,
};
use crate::dynamics::{
    estimate_omega_limit, integrate_with, replicator_vector_field, IntegrationOptions, StopCondition,
    DEFAULT_OMEGA_FLOOR,
};
use crate::error::Result;
use crate::evidence::{edge_track, escape_search, EdgeTrackOptions, EscapeOptions};
use crate::game::Game;
use crate::graph::{
    build_graph, has_path, is_sink, is_source, scc_decomposition, sink_equilibria, PreferenceGraph,
    SinkEquilibrium, DEFAULT_TIE_TOL,
};
use crate::profile::{content_mass, MixedProfile, ProfileSet};
use crate::stability::{
    find_cavities, find_local_sources, is_pseudoconvex_sink, lyapunov_zh_derivative, sample_near_content,
    CandidateFamily, CavityKind, LocalSourceOptions,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub id: String,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verify {}", self.id)?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }
}

pub fn verify(id: CorpusId) -> Result<VerificationReport> {
    let mut c = Checks(Vec::new());
    match id {
        CorpusId::Shapley => verify_shapley(&id.build(), &mut c)?,
        CorpusId::CogFig2 => verify_cog(&id.build(), &mut c)?,
        CorpusId::ThreePlayerFig3 => verify_three_player(&id.build(), &mut c)?,
        CorpusId::TwoPlayerFig4 => verify_two_player(&id.build(), &mut c)?,
        CorpusId::Gadget2x3Fig4b => verify_gadget(&make_gadget_2x3(&GadgetWeights::default())?, &mut c)?,
        CorpusId::DominanceFig6 => verify_dominance(&id.build(), &mut c)?,
    }
    Ok(VerificationReport {
        id: id.as_str().to_string(),
        checks: c.0,
    })
}

fn sinks_of(g: &Game) -> Result<(PreferenceGraph, Vec<SinkEquilibrium>)> {
    let pg = build_graph(g, DEFAULT_TIE_TOL)?;
    let sinks = sink_equilibria(&pg)?;
    Ok((pg, sinks))
}

fn fmt_set(g: &Game, s: &ProfileSet) -> String {
    s.profiles(g).iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

fn structural(ng: &NamedGame, c: &mut Checks) {
    let bad = ng.structural_mismatches();
    c.add(
        "graph matches the reference drawing",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} drawn arcs present", ng.expected.drawn_arcs.len())
        } else {
            bad.join("; ")
        },
    );
}

/// Points near `content(h)` with `z_H` in `[1 - 1e-3, 1)`, and the sign of `dz_H/dt` at each.
pub fn zh_samples(g: &Game, h: &ProfileSet, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count {
        attempts += 1;
        // Uniform on (0, 1e-3].
        let eps = 1e-3 * (1.0 - rng.gen::<f64>());
        let Some(x) = sample_near_content(g, h, eps, &mut rng) else { continue };
        let m = content_mass(g, h, &x);
        if !(0.999..1.0).contains(&m) {
            continue;
        }
        if let Ok(d) = lyapunov_zh_derivative(g, h, &x) {
            out.push((m, d));
        }
    }
    out
}

fn verify_shapley(ng: &NamedGame, c: &mut Checks) -> Result<()> {
    let g = &ng.game;
    structural(ng, c);
    let (pg, sinks) = sinks_of(g)?;
    c.add(
        "unique sink of six profiles",
        sinks.len() == 1 && sinks[0].profiles.len() == 6,
        format!("{} sink(s): {}", sinks.len(), sinks.first().map_or(String::new(), |h| fmt_set(g, &h.profiles))),
    );
    let weights: Vec<f64> = shapley_cycle()
        .iter()
        .map(|(t, h)| {
            let (ti, hi) = (g.index_of(t.coords()), g.index_of(h.coords()));
            pg.signed_weight(hi, ti).unwrap_or(f64::NAN)
        })
        .collect();
    c.add(
        "cycle arcs all have weight 1",
        weights.iter().all(|w| (w - 1.0).abs() <= 1e-12),
        format!("{weights:?}"),
    );
    let h = &sinks[0];
    let rep = is_pseudoconvex_sink(&pg, h, false)?;
    c.add(
        "pseudoconvex with the non-strict test",
        rep.verdict,
        format!(
            "{} cavities, {} one-in-one-out, {} with zero signed sum",
            rep.cavity_count,
            rep.by_kind.one_in_one_out,
            rep.boundary.len()
        ),
    );
    let strict = is_pseudoconvex_sink(&pg, h, true)?;
    c.add(
        "strict test rejects the zero-sum cavities",
        !strict.verdict && strict.failing.len() == rep.boundary.len(),
        format!("{} failing under the strict test", strict.failing.len()),
    );
    let search = find_local_sources(g, &pg, h, &LocalSourceOptions::default())?;
    c.add("no local-source certificate", search.certificates.is_empty(), search.summary());
    let samples = zh_samples(g, &h.profiles, 100, 0);
    let positive = samples.iter().filter(|s| s.1 > 0.0).count();
    let min = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    c.add(
        "dz_H/dt > 0 at 100 samples with z_H in [0.999, 1)",
        samples.len() == 100 && positive == 100,
        format!("{positive}/{} positive, smallest {min:e}", samples.len()),
    );
    let e = 1e-3;
    let x0 = MixedProfile::new(vec![vec![1.0 - 2.0 * e, e, e], vec![e, 1.0 - 2.0 * e, e]])?;
    let tr = integrate_with(
        g,
        &x0,
        &IntegrationOptions {
            t_max: 200.0,
            record_every: 10,
            ..IntegrationOptions::default()
        },
    )?;
    let omega = estimate_omega_limit(g, &tr, 0.5, DEFAULT_OMEGA_FLOOR)?;
    c.add(
        "interior orbit's tail stays on the cycle",
        !omega.is_empty() && omega.is_subset_of(&h.profiles),
        format!("tail support {}", fmt_set(g, &omega)),
    );
    Ok(())
}

fn escape_checks(g: &Game, pg: &PreferenceGraph, h: &SinkEquilibrium, c: &mut Checks) -> Result<usize> {
    let search = find_local_sources(g, pg, h, &LocalSourceOptions::default())?;
    for cert in &search.certificates {
        let out = escape_search(g, &h.profiles, cert, &EscapeOptions::default())?;
        c.add(
            &format!("escape from the {:?} certificate in {}", cert.family, cert.subgame),
            out.escaped,
            format!(
                "seed {:.1e} from the point, content mass reaches {:.6}{}",
                out.seed_offset,
                out.min_mass,
                out.exit_time.map_or(String::new(), |t| format!(" at t = {t:.2}"))
            ),
        );
    }
    Ok(search.certificates.len())
}

fn verify_cog(ng: &NamedGame, c: &mut Checks) -> Result<()> {
    let g = &ng.game;
    structural(ng, c);
    let (pg, sinks) = sinks_of(g)?;
    let hole = ng.marker("hole");
    c.add(
        "unique sink of eight profiles, missing the centre",
        sinks.len() == 1 && sinks[0].profiles.len() == 8 && !sinks[0].profiles.contains(g, hole),
        format!("{} sink(s)", sinks.len()),
    );
    let h = &sinks[0];
    let a = ng.marker("a");
    let cavities = find_cavities(&pg, h);
    let at_a = cavities
        .iter()
        .any(|cv| cv.subgame == cog_block() && cv.kind == CavityKind::LocalSource && cv.w() == a);
    c.add(
        "top-left block is a local-source cavity at a",
        at_a,
        format!("{} cavities in total", cavities.len()),
    );
    let rep = is_pseudoconvex_sink(&pg, h, false)?;
    c.add("not pseudoconvex", !rep.verdict, format!("{} failing cavities", rep.failing.len()));
    let search = find_local_sources(g, &pg, h, &LocalSourceOptions::default())?;
    let single_at_a = search.certificates.len() == 1
        && search.certificates[0].family == CandidateFamily::PureSliceSource
        && search.certificates[0].point == MixedProfile::pure(g, a)?;
    c.add("exactly one certificate, at a", single_at_a, search.summary());
    escape_checks(g, &pg, h, c)?;
    Ok(())
}

/// The gap between the replicator field on the block diagonal and `w(1-w)(2w-1)^2`.
pub fn diagonal_field_error(g: &Game, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let w: f64 = rng.gen_range(f64::EPSILON..1.0);
        let f = replicator_vector_field(g, &three_player_diagonal(w))?;
        let expect = w * (1.0 - w) * (2.0 * w - 1.0).powi(2);
        for d in &f {
            worst = worst.max((d[1] - expect).abs()).max((d[0] + expect).abs());
        }
        for d in &f[..2] {
            worst = worst.max(d[2].abs());
        }
    }
    Ok(worst)
}

fn verify_three_player(ng: &NamedGame, c: &mut Checks) -> Result<()> {
    let g = &ng.game;
    structural(ng, c);
    let (pg, sinks) = sinks_of(g)?;
    let (a, b) = (ng.marker("a"), ng.marker("b"));
    let ha = sinks.iter().find(|h| h.profiles.contains(g, a));
    let hb = sinks.iter().find(|h| h.profiles.contains(g, b));
    c.add(
        "two sinks, a and b in different ones",
        sinks.len() == 2 && ha.is_some() && hb.is_some() && ha.map(|h| h.id) != hb.map(|h| h.id),
        format!(
            "sizes {:?}",
            sinks.iter().map(|h| h.profiles.len()).collect::<Vec<_>>()
        ),
    );
    let block = three_player_block();
    let parity = block.profiles().iter().all(|p| {
        let v = if p.coords().iter().sum::<usize>() % 2 == 1 { 1.0 } else { 0.0 };
        (0..3).all(|i| g.u(i, g.index_of(p.coords())) == v)
    });
    c.add("block payoffs are 1 at its sinks and 0 at its sources", parity, "all three players");
    let sub = pg.induced_subgraph(&block)?;
    let roles = is_source(&sub, a)? && is_sink(&sub, b)?;
    c.add("a is a source and b a sink of the block", roles, format!("block {block}"));
    let path = has_path(&pg, a, b)?;
    c.add("no path from a to b", !path, format!("has_path = {path}"));
    let err = diagonal_field_error(g, 1000, 0)?;
    c.add(
        "diagonal field equals w(1-w)(2w-1)^2",
        err <= 1e-10,
        format!("max error {err:e} over 1000 points"),
    );

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
    let w_end = end.dist(2)[1];
    c.add(
        "diagonal trajectory from w = 0.01 reaches within 1e-3 of b by t = 1e4",
        end.distance(&target) <= 1e-3,
        format!(
            "at t = {:.0} the state is w = {w_end:.8}, distance {:.4} from b; the diagonal rest point w = 1/2 blocks it",
            run.final_time(),
            end.distance(&target)
        ),
    );
    let mid = three_player_diagonal(0.5);
    c.add(
        "chain evidence: the same trajectory approaches the rest point w = 1/2",
        end.distance(&mid) <= 1e-3,
        format!("distance {:.2e}", end.distance(&mid)),
    );
    let onward = integrate_with(
        g,
        &three_player_diagonal(0.5 + 1e-3),
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
    c.add(
        "chain evidence: a seed 1e-3 past the rest point reaches within 1e-3 of b",
        onward.final_state().distance(&target) <= 1e-3,
        format!("reached at t = {:.1}", onward.final_time()),
    );
    Ok(())
}

fn verify_two_player(ng: &NamedGame, c: &mut Checks) -> Result<()> {
    let g = &ng.game;
    structural(ng, c);
    let (pg, sinks) = sinks_of(g)?;
    let (a, b) = (ng.marker("a"), ng.marker("b"));
    let ha = sinks.iter().find(|h| h.profiles.contains(g, a));
    c.add(
        "two sinks with b a pure equilibrium",
        sinks.len() == 2 && sinks.iter().any(|h| h.is_singleton_pne && h.profiles.contains(g, b)),
        format!("sizes {:?}", sinks.iter().map(|h| h.profiles.len()).collect::<Vec<_>>()),
    );
    let path = has_path(&pg, a, b)?;
    c.add("no path from a to b", !path, format!("has_path = {path}"));
    let gadget = make_gadget_2x3(&GadgetWeights::default())?;
    let block = two_player_gadget_block();
    let r = g.restrict(&block)?;
    c.add(
        "rows {0,1} x columns {0,1,2} reproduce the gadget",
        r.game.utilities(0) == gadget.named.game.utilities(0) && r.game.utilities(1) == gadget.named.game.utilities(1),
        format!("block {block}"),
    );
    let Some(ha) = ha else {
        c.add("a lies in a sink", false, "no sink contains a");
        return Ok(());
    };
    let search = find_local_sources(g, &pg, ha, &LocalSourceOptions::default())?;
    let x_hat = r.embed(g.strategy_counts(), &gadget.x_hat);
    let certified = search
        .certificates
        .iter()
        .any(|cert| cert.subgame == block && cert.point.distance(&x_hat) < 1e-12);
    c.add(
        "the gadget's face rest point is a certified local source of H_a",
        certified,
        search.summary(),
    );
    escape_checks(g, &pg, ha, c)?;
    Ok(())
}

/// Seeds `delta` off `x_hat`: mass `delta` moved onto column 2, rows tilted by `delta * t`.
pub fn gadget_seed(gadget: &Gadget, delta: f64, t: f64) -> Result<MixedProfile> {
    let x = &gadget.x_hat;
    MixedProfile::normalized(
        &gadget.named.game,
        vec![
            vec![x.dist(0)[0] + delta * t, x.dist(0)[1] - delta * t],
            vec![(1.0 - delta) * x.dist(1)[0], (1.0 - delta) * x.dist(1)[1], delta],
        ],
    )
}

fn verify_gadget(gadget: &Gadget, c: &mut Checks) -> Result<()> {
    let ng = &gadget.named;
    let g = &ng.game;
    structural(ng, c);
    let pg = build_graph(g, DEFAULT_TIE_TOL)?;
    let roles = is_source(&pg, ng.marker("r1"))?
        && is_source(&pg, ng.marker("r2"))?
        && is_sink(&pg, ng.marker("s1"))?
        && is_sink(&pg, ng.marker("s2"))?;
    c.add("two sources and two sinks", roles, "r1 = (0,2), r2 = (1,1), s1 = (0,1), s2 = (1,2)");
    let (xn, yn) = gadget.nash_verdicts();
    c.add(
        "exactly one face rest point is quasi-strict Nash",
        xn != yn,
        format!("x_hat: {xn}, y_hat: {yn}"),
    );
    let predicted = gadget.predicted_nash_is_x_hat();
    c.add(
        "ordering rule on the top-row weights predicts which",
        predicted == xn && xn != yn,
        format!(
            "x_hat top {:.6}, y_hat top {:.6}",
            gadget.x_hat.dist(0)[0],
            gadget.y_hat.dist(0)[0]
        ),
    );
    let to = if xn { &gadget.x_hat } else { &gadget.y_hat };
    let out = edge_track(
        g,
        &gadget_seed(gadget, 1e-4, -1.0)?,
        &gadget_seed(gadget, 1e-4, 1.0)?,
        to,
        1e-2,
        &EdgeTrackOptions::default(),
    )?;
    c.add(
        "orbit seeded 1e-4 off the non-Nash point passes within 1e-2 of the Nash one",
        out.reached,
        format!(
            "closest {:.2e} at t = {:.0}, seed offset {:.1e}, largest re-seeding jump {:.1e}",
            out.min_distance,
            out.time_of_closest,
            out.seed.distance(&gadget.x_hat),
            out.max_jump
        ),
    );
    Ok(())
}

fn verify_dominance(ng: &NamedGame, c: &mut Checks) -> Result<()> {
    let g = &ng.game;
    structural(ng, c);
    let pg = build_graph(g, DEFAULT_TIE_TOL)?;
    let sccs = scc_decomposition(&pg);
    c.add(
        "one strongly connected component covering all six profiles",
        sccs.len() == 1 && sccs[0].len() == 6,
        format!("{} component(s)", sccs.len()),
    );
    let dominates = (0..2).all(|r| {
        let p = |col: usize| g.u(1, g.index_of(&[r, col]));
        p(1) > p(2)
    });
    c.add("column 1 strictly dominates column 2", dominates, "for the column player");
    let tr = integrate_with(
        g,
        &MixedProfile::barycenter(g),
        &IntegrationOptions {
            t_max: 1000.0,
            record_every: 100,
            ..IntegrationOptions::default()
        },
    )?;
    let last = tr.final_state().dist(1)[2];
    c.add(
        "column-2 mass below 1e-4 by t = 1000 from the barycentre",
        last < 1e-4,
        format!("{last:e}"),
    );
    let omega = estimate_omega_limit(g, &tr, 0.5, DEFAULT_OMEGA_FLOOR)?;
    let face = ProfileSet::from_profiles(g, &dominance_face().profiles())?;
    c.add(
        "tail support is the undominated 2x2 face",
        omega == face,
        format!("tail support {}", fmt_set(g, &omega)),
    );
    Ok(())
}
