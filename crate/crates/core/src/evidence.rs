//! Numerical evidence routines: escapes from local sources and near-passages along separatrices.
//!
//! Both searches work on one-parameter families of seeds. A run is labelled by the pure profile
//! carrying the most mass at its final state, and bisection between two seeds with different
//! labels homes in on the boundary between basins, where trajectories linger near saddles.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_with, IntegrationOptions, Observable, StopCondition, DEFAULT_STEP};
use crate::error::Result;
use crate::game::Game;
use crate::profile::{content_mass, product_distribution, MixedProfile, ProfileSet};
use crate::stability::LocalSourceCertificate;

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeOptions {
    /// Mixing weight toward the direction point.
    pub delta: f64,
    /// Escape means `content_mass(H)` drops strictly below this.
    pub threshold: f64,
    /// Time budget per run, raised for slowly repelling certificates.
    pub t_max: f64,
    pub step: f64,
    pub bisection_steps: usize,
    /// Fallback when bisecting the seed cannot resolve the separatrix finely enough.
    pub track: EdgeTrackOptions,
    /// Direction pairs handed to the fallback.
    pub tracked_pairs: usize,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            threshold: 0.99,
            t_max: 200.0,
            step: DEFAULT_STEP,
            bisection_steps: 40,
            track: EdgeTrackOptions {
                t_total: 200.0,
                ..EdgeTrackOptions::default()
            },
            tracked_pairs: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeOutcome {
    /// Seed in the full game.
    pub seed: MixedProfile,
    /// Distance from the seed to the certified point.
    pub seed_offset: f64,
    /// Smallest `content_mass(H)` along the confirming full-game run.
    pub min_mass: f64,
    pub escaped: bool,
    /// Time of the first step below the threshold in the confirming run.
    pub exit_time: Option<f64>,
    /// Restricted-game runs spent searching.
    pub runs: usize,
    /// Largest re-seeding jump when the escape comes from edge tracking rather than one orbit.
    pub tracked_jump: Option<f64>,
}

struct Run {
    label: usize,
    score: f64,
}

fn argmax_profile(g: &Game, x: &MixedProfile) -> usize {
    product_distribution(g, x)
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Bisects the segment from `ends.0` to `ends.1` on the final label. `run` returns the label and a score to minimise; the search stops as
/// soon as `done(score)` holds.
fn bisect_family(
    ends: (&MixedProfile, &MixedProfile),
    runs: &mut usize,
    steps: usize,
    mut run: impl FnMut(&MixedProfile) -> Result<Run>,
    done: impl Fn(f64) -> bool,
) -> Result<(MixedProfile, f64)> {
    let (a, b) = ends;
    let ra = run(a)?;
    let rb = run(b)?;
    *runs += 2;
    let (mut best, mut best_score) = if ra.score <= rb.score { (a.clone(), ra.score) } else { (b.clone(), rb.score) };
    if done(best_score) || ra.label == rb.label {
        return Ok((best, best_score));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let v = a.mix(b, mid);
        let r = run(&v)?;
        *runs += 1;
        if r.score < best_score {
            best_score = r.score;
            best = v;
        }
        if done(best_score) {
            break;
        }
        if r.label == ra.label {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((best, best_score))
}

/// Looks for a seed `delta` away from the certified point, inside the certified subgame, whose
/// trajectory leaves `content(H)` in the sense of `content_mass(H) < threshold`.
///
/// The search integrates the restricted game, which is exact because faces are invariant. The
/// chosen seed is then re-run in the full game and that run alone decides `escaped`. When no single
/// seed gets out, edge tracking between two seeds with different fates follows the separatrix
/// instead, and `tracked_jump` records how far the path was re-seeded.
pub fn escape_search(
    g: &Game,
    h: &ProfileSet,
    cert: &LocalSourceCertificate,
    opts: &EscapeOptions,
) -> Result<EscapeOutcome> {
    let r = g.restrict(&cert.subgame)?;
    let local_h = ProfileSet::from_indices(
        r.game.num_profiles(),
        (0..r.game.num_profiles()).filter(|&k| {
            let p = r.to_parent(&r.game.profile_at(k));
            h.contains(g, &p)
        }),
    );
    let point = MixedProfile::normalized(&r.game, r.project(&cert.point))?;
    let outside_share = 1.0 - opts.threshold;
    // Leaving a delta-neighbourhood at the slowest repelling rate takes about ln(1/delta) / rate.
    let budget = cert
        .min_strict_margin()
        .filter(|m| *m > 0.0)
        .map_or(opts.t_max, |m| opts.t_max.max(3.0 * opts.delta.recip().ln() / m));
    let track_opts = EdgeTrackOptions {
        t_total: opts.track.t_total.max(budget),
        horizon: opts.track.horizon.max(2.0 * budget),
        ..opts.track.clone()
    };
    let local_opts = IntegrationOptions {
        t_max: budget,
        step: opts.step,
        stop: StopCondition::ContentMass {
            set: local_h.complement(),
            threshold: outside_share,
        },
        record_every: usize::MAX,
        observables: vec![("mass".into(), Observable::ContentMass(local_h.clone()))],
    };
    let mut runs = 0usize;
    let mut run = |v: &MixedProfile| -> Result<Run> {
        let seed = point.mix(v, opts.delta);
        let tr = integrate_with(&r.game, &seed, &local_opts)?;
        Ok(Run {
            label: argmax_profile(&r.game, &tr.final_state()),
            score: tr.observable_min("mass").unwrap_or(1.0),
        })
    };
    let done = |score: f64| score < opts.threshold;

    let mut directions = vec![MixedProfile::barycenter(&r.game)];
    for k in 0..r.game.num_profiles() {
        let v = MixedProfile::pure(&r.game, &r.game.profile_at(k))?;
        if v.distance(&point) > 0.0 {
            directions.push(v);
        }
    }
    let mut scored = Vec::with_capacity(directions.len());
    let mut best: Option<(MixedProfile, f64)> = None;
    for v in &directions {
        let out = run(v)?;
        runs += 1;
        if best.as_ref().is_none_or(|b| out.score < b.1) {
            best = Some((v.clone(), out.score));
        }
        scored.push(out.label);
        if done(out.score) {
            break;
        }
    }
    let (mut dir, mut score) = best.expect("at least the barycentre direction");
    if !done(score) {
        'pairs: for i in 0..scored.len() {
            for j in i + 1..scored.len() {
                if scored[i] == scored[j] {
                    continue;
                }
                let (v, s) = bisect_family((&directions[i], &directions[j]), &mut runs, opts.bisection_steps, &mut run, done)?;
                if s < score {
                    dir = v;
                    score = s;
                }
                if done(score) {
                    break 'pairs;
                }
            }
        }
    }

    if !done(score) {
        let pairs: Vec<(usize, usize)> = (0..scored.len())
            .flat_map(|i| (i + 1..scored.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| scored[i] != scored[j])
            .take(opts.tracked_pairs)
            .collect();
        for (i, j) in pairs {
            let t = track(
                &r.game,
                &point.mix(&directions[i], opts.delta),
                &point.mix(&directions[j], opts.delta),
                Observable::ContentMass(local_h.clone()),
                done,
                &track_opts,
            )?;
            runs += t.runs;
            if t.reached {
                let seed = r.embed(g.strategy_counts(), &t.seed);
                return Ok(EscapeOutcome {
                    seed_offset: seed.distance(&cert.point),
                    seed,
                    min_mass: t.best,
                    escaped: true,
                    exit_time: Some(t.time_of_best),
                    runs,
                    tracked_jump: Some(t.max_jump),
                });
            }
        }
    }

    let local_seed = point.mix(&dir, opts.delta);
    let seed = r.embed(g.strategy_counts(), &local_seed);
    let tr = integrate_with(
        g,
        &seed,
        &IntegrationOptions {
            t_max: budget,
            step: opts.step,
            stop: StopCondition::ContentMass {
                set: h.complement(),
                threshold: outside_share,
            },
            record_every: usize::MAX,
            observables: vec![("mass".into(), Observable::ContentMass(h.clone()))],
        },
    )?;
    let min_mass = tr.observable_min("mass").unwrap_or(1.0);
    let escaped = min_mass < opts.threshold;
    let inside_now = content_mass(g, h, &tr.final_state());
    Ok(EscapeOutcome {
        seed_offset: seed.distance(&cert.point),
        seed,
        min_mass,
        escaped,
        exit_time: (escaped && inside_now < opts.threshold).then(|| tr.final_time()),
        runs,
        tracked_jump: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowOutcome {
    pub seed: MixedProfile,
    /// Smallest Euclidean distance to the target over the best run.
    pub min_distance: f64,
    pub reached: bool,
    pub runs: usize,
}

/// Bisects the seed segment from `s0` to `s1` on the final label, looking for a trajectory that
/// passes within `radius` of `target`.
pub fn shadow_search(
    g: &Game,
    s0: &MixedProfile,
    s1: &MixedProfile,
    target: &MixedProfile,
    radius: f64,
    t_max: f64,
    iterations: usize,
) -> Result<ShadowOutcome> {
    let opts = IntegrationOptions {
        t_max,
        stop: StopCondition::Near {
            target: target.clone(),
            radius,
        },
        record_every: usize::MAX,
        observables: vec![("dist".into(), Observable::Distance(target.clone()))],
        ..IntegrationOptions::default()
    };
    let mut run = |v: &MixedProfile| -> Result<Run> {
        let tr = integrate_with(g, v, &opts)?;
        let d = tr.observable_min("dist").unwrap_or(f64::INFINITY);
        Ok(Run {
            label: argmax_profile(g, &tr.final_state()),
            score: d,
        })
    };
    let mut runs = 0;
    let (seed, score) = bisect_family((s0, s1), &mut runs, iterations, &mut run, |d| d <= radius)?;
    Ok(ShadowOutcome {
        seed,
        min_distance: score,
        reached: score <= radius,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTrackOptions {
    /// Straddling pairs are refined until they are this close.
    pub gap: f64,
    /// Time both members of the pair are advanced between refinements.
    pub segment: f64,
    pub t_total: f64,
    /// Horizon of the labelling runs.
    pub horizon: f64,
    /// A labelling run ends once one pure profile carries this much mass.
    pub settle: f64,
}

impl Default for EdgeTrackOptions {
    fn default() -> Self {
        Self {
            gap: 1e-10,
            segment: 1.0,
            t_total: 300.0,
            horizon: 400.0,
            settle: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrackOutcome {
    /// First refined seed; its distance to the starting pair is below the initial gap.
    pub seed: MixedProfile,
    pub min_distance: f64,
    pub reached: bool,
    /// Time along the tracked path at which `min_distance` was attained.
    pub time_of_closest: f64,
    /// Largest re-seeding jump between consecutive segments.
    pub max_jump: f64,
    pub segments: usize,
    pub runs: usize,
}

/// Edge tracking between two basins.
///
/// `s0` and `s1` must end at different pure profiles. The pair is repeatedly bisected to within
/// `gap`, both members are advanced for one segment, and the process restarts from their end
/// states. The tracked path is a chain of exact trajectory segments whose joins move the state by
/// at most `max_jump`; plain bisection of the initial seed cannot follow a saddle connection for
/// long because rounding in the seed is amplified exponentially.
pub fn edge_track(
    g: &Game,
    s0: &MixedProfile,
    s1: &MixedProfile,
    target: &MixedProfile,
    radius: f64,
    opts: &EdgeTrackOptions,
) -> Result<EdgeTrackOutcome> {
    let t = track(g, s0, s1, Observable::Distance(target.clone()), |d| d <= radius, opts)?;
    Ok(EdgeTrackOutcome {
        seed: t.seed,
        min_distance: t.best.min(s0.distance(target)).min(s1.distance(target)),
        reached: t.reached,
        time_of_closest: t.time_of_best,
        max_jump: t.max_jump,
        segments: t.segments,
        runs: t.runs,
    })
}

struct Tracked {
    seed: MixedProfile,
    best: f64,
    reached: bool,
    time_of_best: f64,
    max_jump: f64,
    segments: usize,
    runs: usize,
}

/// Edge tracking that minimises `score` along the path and stops once `goal` holds.
fn track(
    g: &Game,
    s0: &MixedProfile,
    s1: &MixedProfile,
    score: Observable,
    goal: impl Fn(f64) -> bool,
    opts: &EdgeTrackOptions,
) -> Result<Tracked> {
    // Profiles already settled at the start, such as a pure source next to the seeds, are left
    // out so that labelling runs do not stop at t = 0.
    let (z0, z1) = (product_distribution(g, s0), product_distribution(g, s1));
    let settle = StopCondition::Any(
        (0..g.num_profiles())
            .filter(|&k| z0[k] < opts.settle && z1[k] < opts.settle)
            .map(|k| StopCondition::ContentMass {
                set: ProfileSet::from_indices(g.num_profiles(), [k]),
                threshold: opts.settle,
            })
            .collect(),
    );
    let label_opts = IntegrationOptions {
        t_max: opts.horizon,
        stop: settle,
        record_every: usize::MAX,
        ..IntegrationOptions::default()
    };
    let mut runs = 0usize;
    let mut label = |x: &MixedProfile| -> Result<usize> {
        runs += 1;
        Ok(argmax_profile(g, &integrate_with(g, x, &label_opts)?.final_state()))
    };
    let seg_opts = IntegrationOptions {
        t_max: opts.segment,
        record_every: usize::MAX,
        observables: vec![("score".into(), score)],
        ..IntegrationOptions::default()
    };
    let la = label(s0)?;
    let lb = label(s1)?;
    let mut out = Tracked {
        seed: s0.clone(),
        best: f64::INFINITY,
        reached: false,
        time_of_best: 0.0,
        max_jump: 0.0,
        segments: 0,
        runs: 0,
    };
    if la == lb {
        out.runs = runs;
        return Ok(out);
    }
    let (mut a, mut b) = (s0.clone(), s1.clone());
    let mut t = 0.0;
    while t < opts.t_total {
        let before = a.clone();
        while a.distance(&b) > opts.gap {
            let m = a.mix(&b, 0.5);
            if label(&m)? == la {
                a = m;
            } else {
                b = m;
            }
        }
        if out.segments == 0 {
            out.seed = a.clone();
        } else {
            out.max_jump = out.max_jump.max(a.distance(&before));
        }
        let ta = integrate_with(g, &a, &seg_opts)?;
        let tb = integrate_with(g, &b, &seg_opts)?;
        out.segments += 1;
        let v = ta.observable_min("score").unwrap_or(f64::INFINITY);
        if v < out.best {
            out.best = v;
            out.time_of_best = t + opts.segment;
        }
        if goal(out.best) {
            out.reached = true;
            break;
        }
        a = ta.final_state();
        b = tb.final_state();
        t += opts.segment;
    }
    out.runs = runs;
    Ok(out)
}
