//! Replicator dynamics in mixed-strategy space and in correlated space.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::profile::{product_distribution, MixedProfile, ProfileSet};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 1e4;
/// How far a raw RK4 step may leave the simplex before it is rejected.
pub const SIMPLEX_LEAK_TOL: f64 = 1e-6;
pub const DEFAULT_OMEGA_FLOOR: f64 = 1e-3;

/// `x^i_s (U_i(s; x_{-i}) - U_i(x))` for every player and strategy.
pub fn replicator_vector_field(g: &Game, x: &MixedProfile) -> Result<Vec<Vec<f64>>> {
    x.check_shape(g)?;
    Ok(replicator_vector_field_unchecked(g, x.dists()))
}

/// The replicator polynomial evaluated on arbitrary vectors of the right shape.
pub fn replicator_vector_field_unchecked(g: &Game, dists: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..g.num_players())
        .map(|i| {
            let dev = g.deviation_payoffs_unchecked(i, dists);
            let avg: f64 = dev.iter().zip(&dists[i]).map(|(a, b)| a * b).sum();
            dists[i]
                .iter()
                .zip(&dev)
                .map(|(x, d)| x * (d - avg))
                .collect()
        })
        .collect()
}

/// Allocation-free replicator field on concatenated coordinates.
struct FlatField<'a> {
    g: &'a Game,
    offsets: Vec<usize>,
    coords: Vec<Vec<usize>>,
    dev: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl<'a> FlatField<'a> {
    fn new(g: &'a Game) -> Self {
        let mut offsets = Vec::with_capacity(g.num_players() + 1);
        let mut acc = 0;
        for &m in g.strategy_counts() {
            offsets.push(acc);
            acc += m;
        }
        offsets.push(acc);
        let coords = (0..g.num_profiles())
            .map(|k| g.profile_at(k).coords().to_vec())
            .collect();
        let n = g.num_players();
        Self {
            g,
            offsets,
            coords,
            dev: vec![0.0; acc],
            prefix: vec![1.0; n + 1],
            suffix: vec![1.0; n + 1],
        }
    }

    fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.g.num_players();
        self.dev.iter_mut().for_each(|v| *v = 0.0);
        for (k, c) in self.coords.iter().enumerate() {
            for j in 0..n {
                self.prefix[j + 1] = self.prefix[j] * x[self.offsets[j] + c[j]];
            }
            for j in (0..n).rev() {
                self.suffix[j] = self.suffix[j + 1] * x[self.offsets[j] + c[j]];
            }
            for i in 0..n {
                let w = self.prefix[i] * self.suffix[i + 1];
                if w != 0.0 {
                    self.dev[self.offsets[i] + c[i]] += w * self.g.u(i, k);
                }
            }
        }
        for i in 0..n {
            let r = self.offsets[i]..self.offsets[i + 1];
            let avg: f64 = x[r.clone()].iter().zip(&self.dev[r.clone()]).map(|(a, b)| a * b).sum();
            for s in r {
                out[s] = x[s] * (self.dev[s] - avg);
            }
        }
    }
}

/// `M[q][p] = sum_i (u_i(q_i; p_{-i}) - u_i(p))` over all pairs of pure profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl ProductMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, q: usize, p: usize) -> f64 {
        self.entries[q * self.n + p]
    }

    /// Row-major entries, row index `q`.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `(M z)_p = sum_q M[p][q] z_q`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn product_matrix(g: &Game) -> ProductMatrix {
    let n = g.num_profiles();
    let players = g.num_players();
    let mut entries = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            let mut acc = 0.0;
            for i in 0..players {
                let dev = g.deviate(p, i, g.coord_of(q, i));
                acc += g.u(i, dev) - g.u(i, p);
            }
            entries[q * n + p] = acc;
        }
    }
    ProductMatrix { n, entries }
}

/// A distribution over pure profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedState {
    z: Vec<f64>,
}

impl CorrelatedState {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMixedProfile("correlated state has a negative or non-finite entry".into()));
        }
        let s: f64 = z.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMixedProfile(format!("correlated state sums to {s}")));
        }
        Ok(Self { z })
    }

    pub fn from_mixed(g: &Game, x: &MixedProfile) -> Self {
        Self {
            z: product_distribution(g, x),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }
}

/// `z_p (M z)_p` for every profile.
pub fn correlated_vector_field(m: &ProductMatrix, z: &CorrelatedState) -> Vec<f64> {
    let mz = m.apply(&z.z);
    z.z.iter().zip(mz).map(|(a, b)| a * b).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopCondition {
    Never,
    /// Mass of the product distribution on `set` reaches `threshold`.
    ContentMass { set: ProfileSet, threshold: f64 },
    /// Sup-norm displacement per unit time falls below `tol`.
    Stationary { tol: f64 },
    /// Euclidean distance to `target` falls to `radius` or below.
    Near { target: MixedProfile, radius: f64 },
    Any(Vec<StopCondition>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeLimit,
    ContentMass,
    Stationary,
    Near,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    ContentMass(ProfileSet),
    Distance(MixedProfile),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub t_max: f64,
    pub step: f64,
    pub stop: StopCondition,
    /// Keep one recorded state every `record_every` steps; the first and last are always kept.
    pub record_every: usize,
    pub observables: Vec<(String, Observable)>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            step: DEFAULT_STEP,
            stop: StopCondition::Never,
            record_every: 1,
            observables: Vec::new(),
        }
    }
}

/// Recorded states of a mixed-space trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    counts: Vec<usize>,
    dim: usize,
    times: Vec<f64>,
    data: Vec<f64>,
    observables: BTreeMap<String, Vec<f64>>,
    stop_reason: StopReason,
    /// Extremes of every observable over all integration steps, recorded or not.
    observable_min: BTreeMap<String, f64>,
    observable_max: BTreeMap<String, f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> MixedProfile {
        let slice = &self.data[k * self.dim..(k + 1) * self.dim];
        let mut off = 0;
        MixedProfile::from_raw(
            self.counts
                .iter()
                .map(|&m| {
                    let d = slice[off..off + m].to_vec();
                    off += m;
                    d
                })
                .collect(),
        )
    }

    pub fn flat_state(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> MixedProfile {
        self.state(self.len() - 1)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the start state")
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(Vec::as_slice)
    }

    pub fn observable_names(&self) -> impl Iterator<Item = &str> {
        self.observables.keys().map(String::as_str)
    }

    /// Smallest value the observable took at any integration step.
    pub fn observable_min(&self, name: &str) -> Option<f64> {
        self.observable_min.get(name).copied()
    }

    pub fn observable_max(&self, name: &str) -> Option<f64> {
        self.observable_max.get(name).copied()
    }

    /// CSV with header `t,<player>.<strategy>,...,<observables>` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (i, &m) in self.counts.iter().enumerate() {
            for s in 0..m {
                write!(out, ",{i}.{s}").unwrap();
            }
        }
        for name in self.observables.keys() {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for k in 0..self.len() {
            write!(out, "{:.16e}", self.times[k]).unwrap();
            for v in self.flat_state(k) {
                write!(out, ",{v:.16e}").unwrap();
            }
            for series in self.observables.values() {
                write!(out, ",{:.16e}", series[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn check_step_params(t_max: f64, step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Parameter(format!("step must be positive, got {step}")));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::Parameter(format!("t_max must be non-negative, got {t_max}")));
    }
    Ok(())
}

/// Classical RK4 step of `f` from `y`, writing into `next`.
fn rk4<F: FnMut(&[f64], &mut [f64])>(f: &mut F, y: &[f64], h: f64, ws: &mut Rk4Work, next: &mut [f64]) {
    let n = y.len();
    f(y, &mut ws.k1);
    for j in 0..n {
        ws.tmp[j] = y[j] + 0.5 * h * ws.k1[j];
    }
    f(&ws.tmp, &mut ws.k2);
    for j in 0..n {
        ws.tmp[j] = y[j] + 0.5 * h * ws.k2[j];
    }
    f(&ws.tmp, &mut ws.k3);
    for j in 0..n {
        ws.tmp[j] = y[j] + h * ws.k3[j];
    }
    f(&ws.tmp, &mut ws.k4);
    for j in 0..n {
        next[j] = y[j] + h / 6.0 * (ws.k1[j] + 2.0 * ws.k2[j] + 2.0 * ws.k3[j] + ws.k4[j]);
    }
}

struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// Validates a raw step against the simplex of each segment, then clips and rescales in place.
fn renormalize(state: &mut [f64], segments: &[(usize, usize)], frozen: &[bool], t: f64) -> Result<()> {
    for &(a, b) in segments {
        let seg = &mut state[a..b];
        let mut sum = 0.0;
        for (j, v) in seg.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::StepSize {
                    t,
                    detail: format!("coordinate {} became non-finite", a + j),
                });
            }
            if *v < -SIMPLEX_LEAK_TOL {
                return Err(Error::StepSize {
                    t,
                    detail: format!("coordinate {} reached {v:e}", a + j),
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SIMPLEX_LEAK_TOL {
            return Err(Error::StepSize {
                t,
                detail: format!("segment {a}..{b} sums to {sum}"),
            });
        }
        let mut clipped = 0.0;
        for (j, v) in seg.iter_mut().enumerate() {
            if frozen[a + j] || *v < 0.0 {
                *v = 0.0;
            }
            clipped += *v;
        }
        seg.iter_mut().for_each(|v| *v /= clipped);
    }
    Ok(())
}

/// Observables and stop conditions rewritten against the flat state vector.
enum Probe {
    /// Flat coordinates of each listed profile, `n` per profile.
    Mass { idx: Vec<usize>, n: usize },
    Distance(Vec<f64>),
}

impl Probe {
    fn mass(g: &Game, set: &ProfileSet) -> Self {
        let n = g.num_players();
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0;
        for &m in g.strategy_counts() {
            offsets.push(off);
            off += m;
        }
        let idx = set
            .indices()
            .iter()
            .flat_map(|&k| (0..n).map(move |i| (i, k)))
            .map(|(i, k)| offsets[i] + g.coord_of(k, i))
            .collect();
        Probe::Mass { idx, n }
    }

    fn of(g: &Game, o: &Observable) -> Self {
        match o {
            Observable::ContentMass(set) => Probe::mass(g, set),
            Observable::Distance(target) => Probe::Distance(target.flatten()),
        }
    }

    fn eval(&self, s: &[f64]) -> f64 {
        match self {
            Probe::Mass { idx, n } => idx.chunks(*n).map(|c| c.iter().map(|&j| s[j]).product::<f64>()).sum(),
            Probe::Distance(t) => t.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        }
    }
}

enum FlatStop {
    Never,
    Mass(Probe, f64),
    Stationary(f64),
    Near(Probe, f64),
    Any(Vec<FlatStop>),
}

impl FlatStop {
    fn of(g: &Game, stop: &StopCondition) -> Self {
        match stop {
            StopCondition::Never => FlatStop::Never,
            StopCondition::ContentMass { set, threshold } => FlatStop::Mass(Probe::mass(g, set), *threshold),
            StopCondition::Stationary { tol } => FlatStop::Stationary(*tol),
            StopCondition::Near { target, radius } => FlatStop::Near(Probe::Distance(target.flatten()), *radius),
            StopCondition::Any(list) => FlatStop::Any(list.iter().map(|c| FlatStop::of(g, c)).collect()),
        }
    }

    /// Pass `f64::INFINITY` as the rate before the first step, so stationarity cannot fire.
    fn check(&self, s: &[f64], rate: f64) -> Option<StopReason> {
        match self {
            FlatStop::Never => None,
            FlatStop::Mass(p, th) => (p.eval(s) >= *th).then_some(StopReason::ContentMass),
            FlatStop::Stationary(tol) => (rate < *tol).then_some(StopReason::Stationary),
            FlatStop::Near(p, r) => (p.eval(s) <= *r).then_some(StopReason::Near),
            FlatStop::Any(list) => list.iter().find_map(|c| c.check(s, rate)),
        }
    }
}

/// Integrates from `x0`, recording every step.
pub fn integrate(
    g: &Game,
    x0: &MixedProfile,
    t_max: f64,
    step: f64,
    stop: StopCondition,
) -> Result<TrajectoryRecord> {
    integrate_with(
        g,
        x0,
        &IntegrationOptions {
            t_max,
            step,
            stop,
            ..IntegrationOptions::default()
        },
    )
}

/// Fixed-step RK4 in mixed-strategy space with post-step renormalisation.
///
/// Coordinates that start at exactly zero are held at zero: their faces are invariant, so this
/// only removes rounding noise.
pub fn integrate_with(g: &Game, x0: &MixedProfile, opts: &IntegrationOptions) -> Result<TrajectoryRecord> {
    check_step_params(opts.t_max, opts.step)?;
    x0.check_shape(g)?;
    if opts.record_every == 0 {
        return Err(Error::Parameter("record_every must be at least 1".into()));
    }
    let counts = g.strategy_counts().to_vec();
    let mut segments = Vec::new();
    let mut off = 0;
    for &m in &counts {
        segments.push((off, off + m));
        off += m;
    }
    let dim = off;
    let mut state = x0.flatten();
    let frozen: Vec<bool> = state.iter().map(|v| *v == 0.0).collect();
    let mut field = FlatField::new(g);
    let mut f = |y: &[f64], out: &mut [f64]| field.eval(y, out);
    let mut ws = Rk4Work::new(dim);
    let mut next = vec![0.0; dim];

    let steps = (opts.t_max / opts.step).round() as u64;
    let mut rec = TrajectoryRecord {
        counts: counts.clone(),
        dim,
        times: Vec::new(),
        data: Vec::new(),
        observables: opts.observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
        stop_reason: StopReason::TimeLimit,
        observable_min: BTreeMap::new(),
        observable_max: BTreeMap::new(),
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, s: &[f64], vals: &[f64]| {
        rec.times.push(t);
        rec.data.extend_from_slice(s);
        for ((name, _), v) in opts.observables.iter().zip(vals) {
            rec.observables.get_mut(name).unwrap().push(*v);
        }
    };
    let probes: Vec<Probe> = opts.observables.iter().map(|(_, o)| Probe::of(g, o)).collect();
    let stop = FlatStop::of(g, &opts.stop);
    let mut bounds: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); probes.len()];
    let mut vals = vec![0.0; probes.len()];
    let mut observe = |s: &[f64], vals: &mut [f64]| {
        for ((p, b), v) in probes.iter().zip(bounds.iter_mut()).zip(vals.iter_mut()) {
            *v = p.eval(s);
            *b = (b.0.min(*v), b.1.max(*v));
        }
    };

    observe(&state, &mut vals);
    push(&mut rec, 0.0, &state, &vals);
    if let Some(r) = stop.check(&state, f64::INFINITY) {
        rec.stop_reason = r;
        finish_bounds(&mut rec, opts, &bounds);
        return Ok(rec);
    }
    for n in 1..=steps {
        let t = n as f64 * opts.step;
        rk4(&mut f, &state, opts.step, &mut ws, &mut next);
        renormalize(&mut next, &segments, &frozen, t)?;
        let rate = state
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / opts.step;
        std::mem::swap(&mut state, &mut next);
        observe(&state, &mut vals);
        let reason = stop.check(&state, rate);
        if reason.is_some() || n == steps || n % opts.record_every as u64 == 0 {
            push(&mut rec, t, &state, &vals);
        }
        if let Some(r) = reason {
            rec.stop_reason = r;
            break;
        }
    }
    finish_bounds(&mut rec, opts, &bounds);
    Ok(rec)
}

fn finish_bounds(rec: &mut TrajectoryRecord, opts: &IntegrationOptions, bounds: &[(f64, f64)]) {
    for ((name, _), &(lo, hi)) in opts.observables.iter().zip(bounds) {
        rec.observable_min.insert(name.clone(), lo);
        rec.observable_max.insert(name.clone(), hi);
    }
}

/// Recorded states of a correlated-space trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Fixed-step RK4 on `z' = z * (M z)` with the same renormalisation as [`integrate_with`].
pub fn integrate_correlated(
    m: &ProductMatrix,
    z0: &CorrelatedState,
    t_max: f64,
    step: f64,
    record_every: usize,
) -> Result<CorrelatedTrajectory> {
    check_step_params(t_max, step)?;
    if z0.z.len() != m.size() {
        return Err(Error::Shape(format!(
            "state has {} entries, matrix is {}x{}",
            z0.z.len(),
            m.size(),
            m.size()
        )));
    }
    let record_every = record_every.max(1);
    let n = m.size();
    let frozen: Vec<bool> = z0.z.iter().map(|v| *v == 0.0).collect();
    let mut state = z0.z.clone();
    let mut next = vec![0.0; n];
    let mut ws = Rk4Work::new(n);
    let mut f = |y: &[f64], out: &mut [f64]| {
        for (p, row) in m.entries.chunks_exact(n).enumerate() {
            let mz: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
            out[p] = y[p] * mz;
        }
    };
    let steps = (t_max / step).round() as u64;
    let mut out = CorrelatedTrajectory {
        times: vec![0.0],
        states: vec![state.clone()],
    };
    for k in 1..=steps {
        let t = k as f64 * step;
        rk4(&mut f, &state, step, &mut ws, &mut next);
        renormalize(&mut next, &[(0, n)], &frozen, t)?;
        std::mem::swap(&mut state, &mut next);
        if k == steps || k % record_every as u64 == 0 {
            out.times.push(t);
            out.states.push(state.clone());
        }
    }
    Ok(out)
}

/// Profiles whose product mass exceeds `floor` somewhere in the trailing `tail_fraction` of time.
pub fn estimate_omega_limit(
    g: &Game,
    tr: &TrajectoryRecord,
    tail_fraction: f64,
    floor: f64,
) -> Result<ProfileSet> {
    if tr.is_empty() {
        return Err(Error::Parameter("trajectory is empty".into()));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let t0 = tr.times[0];
    let t1 = tr.final_time();
    let cut = t1 - tail_fraction * (t1 - t0);
    let mut hit = vec![false; g.num_profiles()];
    for k in 0..tr.len() {
        if tr.times[k] < cut {
            continue;
        }
        let z = product_distribution(g, &tr.state(k));
        for (h, v) in hit.iter_mut().zip(z) {
            if v > floor {
                *h = true;
            }
        }
    }
    Ok(ProfileSet::from_indices(
        g.num_profiles(),
        (0..hit.len()).filter(|&k| hit[k]),
    ))
}
