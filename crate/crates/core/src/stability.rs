//! Cavities, pseudoconvexity, local sources and the stability diagnostics built on them.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{product_matrix, replicator_vector_field, ProductMatrix};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::graph::{PreferenceGraph, SinkEquilibrium};
use crate::profile::{
    content_mass, content_membership, product_distribution, MixedProfile, ProfileSet, PureProfile,
    Subgame,
};

pub const DEFAULT_NASH_TOL: f64 = 1e-9;
/// Field magnitude below which a point counts as a rest point.
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-8;

/// How the two arcs at the diagonal in-set profile `w` of a cavity are oriented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityKind {
    /// Both in-set neighbours point into `w`.
    TwoIn,
    OneInOneOut,
    /// Both arcs leave `w`.
    LocalSource,
}

impl fmt::Display for CavityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CavityKind::TwoIn => "two-in",
            CavityKind::OneInOneOut => "one-in-one-out",
            CavityKind::LocalSource => "local-source",
        })
    }
}

/// A 2x2 slice with exactly three of its four profiles inside a sink equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub players: (usize, usize),
    pub subgame: Subgame,
    /// `w`, then `y` (differs from `w` in the first player), then `z`.
    pub inside: Vec<PureProfile>,
    pub outside: PureProfile,
    pub kind: CavityKind,
    /// `(u_i(y) - u_i(w)) + (u_j(z) - u_j(w))`.
    pub signed_sum: f64,
}

impl Cavity {
    pub fn w(&self) -> &PureProfile {
        &self.inside[0]
    }
}

pub fn find_cavities(pg: &PreferenceGraph, h: &SinkEquilibrium) -> Vec<Cavity> {
    let layout = pg.layout();
    let n = layout.num_players();
    let counts = layout.counts();
    let set = &h.profiles;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for base in (0..layout.num_profiles())
                .filter(|&k| layout.coord_of(k, i) == 0 && layout.coord_of(k, j) == 0)
            {
                for a in 0..counts[i] {
                    for b in a + 1..counts[i] {
                        for c in 0..counts[j] {
                            for d in c + 1..counts[j] {
                                let at = |s: usize, t: usize| layout.deviate(layout.deviate(base, i, s), j, t);
                                let corners = [(a, c), (a, d), (b, c), (b, d)];
                                let ins: Vec<bool> =
                                    corners.iter().map(|&(s, t)| set.contains_index(at(s, t))).collect();
                                if ins.iter().filter(|&&v| v).count() != 3 {
                                    continue;
                                }
                                let out_pos = ins.iter().position(|v| !v).unwrap();
                                let (gamma, delta) = corners[out_pos];
                                let alpha = if gamma == a { b } else { a };
                                let beta = if delta == c { d } else { c };
                                let w = at(alpha, beta);
                                let y = at(gamma, beta);
                                let z = at(alpha, delta);
                                let wy = pg.signed_weight(y, w).unwrap_or(0.0);
                                let wz = pg.signed_weight(z, w).unwrap_or(0.0);
                                let into_w = (wy < 0.0) as u8 + (wz < 0.0) as u8;
                                let kind = match into_w {
                                    2 => CavityKind::TwoIn,
                                    1 => CavityKind::OneInOneOut,
                                    _ => CavityKind::LocalSource,
                                };
                                let mut subsets: Vec<Vec<usize>> =
                                    (0..n).map(|k| vec![layout.coord_of(base, k)]).collect();
                                subsets[i] = vec![a, b];
                                subsets[j] = vec![c, d];
                                out.push(Cavity {
                                    players: (i, j),
                                    subgame: Subgame::new(counts, subsets).expect("slice is valid"),
                                    inside: vec![layout.profile_at(w), layout.profile_at(y), layout.profile_at(z)],
                                    outside: layout.profile_at(at(gamma, delta)),
                                    kind,
                                    signed_sum: wy + wz,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Sign class of a cavity's signed sum, with `|sum| <= tie_tol` counted as the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityStatus {
    Negative,
    Boundary,
    Positive,
}

pub fn cavity_status(pg: &PreferenceGraph, c: &Cavity) -> Result<CavityStatus> {
    let layout = pg.layout();
    let w = layout.profile_index(c.w())?;
    let y = layout.profile_index(&c.inside[1])?;
    let z = layout.profile_index(&c.inside[2])?;
    let (Some(wy), Some(wz)) = (pg.signed_weight(y, w), pg.signed_weight(z, w)) else {
        return Err(Error::Precondition("cavity profiles are not comparable in this graph".into()));
    };
    let sum = wy + wz;
    Ok(if sum.abs() <= pg.tie_tol() {
        CavityStatus::Boundary
    } else if sum < 0.0 {
        CavityStatus::Negative
    } else {
        CavityStatus::Positive
    })
}

/// Negative sums pass; boundary sums pass unless `strict` is set.
pub fn is_pseudoconvex_cavity(pg: &PreferenceGraph, c: &Cavity, strict: bool) -> Result<bool> {
    Ok(match cavity_status(pg, c)? {
        CavityStatus::Negative => true,
        CavityStatus::Boundary => !strict,
        CavityStatus::Positive => false,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub two_in: usize,
    pub one_in_one_out: usize,
    pub local_source: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoconvexReport {
    pub sink_id: usize,
    pub verdict: bool,
    pub strict: bool,
    pub cavity_count: usize,
    pub by_kind: KindCounts,
    pub boundary: Vec<Cavity>,
    pub failing: Vec<Cavity>,
}

pub fn is_pseudoconvex_sink(pg: &PreferenceGraph, h: &SinkEquilibrium, strict: bool) -> Result<PseudoconvexReport> {
    if let Some(d) = pg.degenerate_pairs().first() {
        return Err(Error::Genericity(format!(
            "tied pair {} / {} for player {}",
            pg.layout().profile_at(d.a),
            pg.layout().profile_at(d.b),
            d.player
        )));
    }
    let cavities = find_cavities(pg, h);
    let mut by_kind = KindCounts::default();
    let mut boundary = Vec::new();
    let mut failing = Vec::new();
    for c in &cavities {
        match c.kind {
            CavityKind::TwoIn => by_kind.two_in += 1,
            CavityKind::OneInOneOut => by_kind.one_in_one_out += 1,
            CavityKind::LocalSource => by_kind.local_source += 1,
        }
        let status = cavity_status(pg, c)?;
        if status == CavityStatus::Boundary {
            boundary.push(c.clone());
        }
        if !is_pseudoconvex_cavity(pg, c, strict)? {
            failing.push(c.clone());
        }
    }
    Ok(PseudoconvexReport {
        sink_id: h.id,
        verdict: failing.is_empty(),
        strict,
        cavity_count: cavities.len(),
        by_kind,
        boundary,
        failing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiStrictReport {
    pub verdict: bool,
    pub is_nash: bool,
    /// `U_i(x)` per player.
    pub payoffs: Vec<f64>,
    /// `U_i(x) - U_i(s; x_{-i})` per player and strategy.
    pub margins: Vec<Vec<f64>>,
    pub support: Subgame,
}

pub fn is_quasi_strict_nash(g: &Game, x: &MixedProfile, tol: f64) -> Result<QuasiStrictReport> {
    is_quasi_strict_nash_with(g, x, tol, tol, crate::profile::DEFAULT_SUPPORT_THRESHOLD)
}

/// Nash within `eq_tol`, and every unused strategy short by more than `strict_margin`.
pub fn is_quasi_strict_nash_with(
    g: &Game,
    x: &MixedProfile,
    eq_tol: f64,
    strict_margin: f64,
    support_threshold: f64,
) -> Result<QuasiStrictReport> {
    x.check_shape(g)?;
    let support = x.support(support_threshold);
    let mut payoffs = Vec::new();
    let mut margins = Vec::new();
    let mut nash = true;
    let mut strict = true;
    for i in 0..g.num_players() {
        let dev = g.deviation_payoffs(i, x)?;
        let value: f64 = dev.iter().zip(x.dist(i)).map(|(a, b)| a * b).sum();
        let gaps: Vec<f64> = dev.iter().map(|d| value - d).collect();
        for (s, &gap) in gaps.iter().enumerate() {
            let used = support.subset(i).binary_search(&s).is_ok();
            if gap < -eq_tol || (used && gap.abs() > eq_tol) {
                nash = false;
            }
            if !used && gap <= strict_margin {
                strict = false;
            }
        }
        payoffs.push(value);
        margins.push(gaps);
    }
    Ok(QuasiStrictReport {
        verdict: nash && strict,
        is_nash: nash,
        payoffs,
        margins,
        support,
    })
}

/// The two players and strategy pairs of a 2x2 slice, checked.
fn slice_2x2(counts: &[usize], y: &Subgame) -> Result<(usize, usize)> {
    if y.num_players() != counts.len() {
        return Err(Error::InvalidSubgame("subgame has the wrong number of players".into()));
    }
    let two: Vec<usize> = (0..y.num_players()).filter(|&k| y.subset(k).len() == 2).collect();
    let rest_pure = (0..y.num_players()).all(|k| y.subset(k).len() == 1 || two.contains(&k));
    if two.len() != 2 || !rest_pure {
        return Err(Error::InvalidSubgame(format!("{y} is not a 2x2 slice")));
    }
    Ok((two[0], two[1]))
}

/// Interior rest point of a 2x2 slice, embedded with zeros elsewhere.
///
/// Each player mixes so the other is indifferent. Returns `None` when either weight falls outside
/// the open unit interval.
pub fn fixed_point_2x2(g: &Game, y: &Subgame, tie_tol: f64) -> Result<Option<MixedProfile>> {
    let (i, j) = slice_2x2(g.strategy_counts(), y)?;
    let (alpha, gamma) = (y.subset(i)[0], y.subset(i)[1]);
    let (beta, delta) = (y.subset(j)[0], y.subset(j)[1]);
    let base: Vec<usize> = y.subsets().iter().map(|s| s[0]).collect();
    let at = |s: usize, t: usize, who: usize| {
        let mut c = base.clone();
        c[i] = s;
        c[j] = t;
        g.u(who, g.index_of(&c))
    };
    let den_p = (at(alpha, beta, j) - at(alpha, delta, j)) + (at(gamma, delta, j) - at(gamma, beta, j));
    let den_q = (at(alpha, beta, i) - at(gamma, beta, i)) + (at(gamma, delta, i) - at(alpha, delta, i));
    if den_p.abs() <= tie_tol || den_q.abs() <= tie_tol {
        return Err(Error::Genericity(format!(
            "indifference system of slice {y} is singular"
        )));
    }
    let p = (at(gamma, delta, j) - at(gamma, beta, j)) / den_p;
    let q = (at(gamma, delta, i) - at(alpha, delta, i)) / den_q;
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Ok(None);
    }
    let dists = g
        .strategy_counts()
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut d = vec![0.0; m];
            if k == i {
                d[alpha] = p;
                d[gamma] = 1.0 - p;
            } else if k == j {
                d[beta] = q;
                d[delta] = 1.0 - q;
            } else {
                d[base[k]] = 1.0;
            }
            d
        })
        .collect();
    Ok(Some(MixedProfile::from_raw(dists)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateFamily {
    /// A pure profile that is a source of a 2x2 (or 2x2x2) slice.
    PureSliceSource,
    /// The interior rest point of a 2x2 face, tested inside a 2x3 or 3x2 subgame.
    MixedFaceRestPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyMargin {
    pub player: usize,
    /// Index in the full game.
    pub strategy: usize,
    pub in_support: bool,
    /// `U_i(s; x_{-i}) - U_i(x)` under the original payoffs: the gap in the negated game.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSourceCertificate {
    pub sink_id: usize,
    pub family: CandidateFamily,
    pub subgame: Subgame,
    pub point: MixedProfile,
    pub margins: Vec<StrategyMargin>,
}

impl LocalSourceCertificate {
    /// Smallest positive slack over unused strategies of the subgame.
    pub fn min_strict_margin(&self) -> Option<f64> {
        self.margins
            .iter()
            .filter(|m| !m.in_support)
            .map(|m| m.slack)
            .min_by(f64::total_cmp)
    }

    /// `(1 - delta) * point + delta * barycentre(subgame)`.
    pub fn escape_seed(&self, g: &Game, delta: f64) -> MixedProfile {
        self.point.mix(&MixedProfile::barycenter_of(g, &self.subgame), delta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalSourceOptions {
    pub eq_tol: f64,
    pub strict_margin: f64,
    pub support_threshold: f64,
    pub tie_tol: f64,
}

impl Default for LocalSourceOptions {
    fn default() -> Self {
        Self {
            eq_tol: DEFAULT_NASH_TOL,
            strict_margin: DEFAULT_NASH_TOL,
            support_threshold: crate::profile::DEFAULT_SUPPORT_THRESHOLD,
            tie_tol: crate::graph::DEFAULT_TIE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSourceSearch {
    pub sink_id: usize,
    pub certificates: Vec<LocalSourceCertificate>,
    pub families: Vec<CandidateFamily>,
    /// 2x2 faces skipped because their indifference system was singular.
    pub singular_faces: usize,
}

impl LocalSourceSearch {
    pub fn summary(&self) -> String {
        if self.certificates.is_empty() {
            "no certificate in searched families".to_string()
        } else {
            format!("{} certificate(s)", self.certificates.len())
        }
    }
}

/// Checks the three local-source conditions for `x` in `y` and reports the margins.
pub fn certify_local_source(
    g: &Game,
    h: &SinkEquilibrium,
    y: &Subgame,
    x: &MixedProfile,
    family: CandidateFamily,
    opts: &LocalSourceOptions,
) -> Result<Option<LocalSourceCertificate>> {
    if !content_membership(g, &h.profiles, x, opts.support_threshold) {
        return Ok(None);
    }
    if y.profiles().iter().all(|p| h.profiles.contains(g, p)) {
        return Ok(None);
    }
    if !x.support(opts.support_threshold).is_subset_of(y) {
        return Ok(None);
    }
    let r = g.negate().restrict(y)?;
    let local = MixedProfile::normalized(&r.game, r.project(x))?;
    let report = is_quasi_strict_nash_with(&r.game, &local, opts.eq_tol, opts.strict_margin, opts.support_threshold)?;
    if !report.verdict {
        return Ok(None);
    }
    let mut margins = Vec::new();
    for (i, gaps) in report.margins.iter().enumerate() {
        for (ls, &gap) in gaps.iter().enumerate() {
            margins.push(StrategyMargin {
                player: i,
                strategy: r.strategy_map[i][ls],
                in_support: report.support.subset(i).binary_search(&ls).is_ok(),
                slack: gap,
            });
        }
    }
    Ok(Some(LocalSourceCertificate {
        sink_id: h.id,
        family,
        subgame: y.clone(),
        point: x.clone(),
        margins,
    }))
}

/// Searches the pure slice-source and mixed face-rest-point families for local sources of `h`.
pub fn find_local_sources(
    g: &Game,
    pg: &PreferenceGraph,
    h: &SinkEquilibrium,
    opts: &LocalSourceOptions,
) -> Result<LocalSourceSearch> {
    let counts = g.strategy_counts().to_vec();
    let n = g.num_players();
    let mut certificates = Vec::new();
    let mut families = vec![CandidateFamily::PureSliceSource];

    let mut tried: Vec<Subgame> = Vec::new();
    for &k in h.profiles.indices() {
        let p = g.profile_at(k);
        let x = MixedProfile::pure(g, &p)?;
        let mut player_sets: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                player_sets.push(vec![i, j]);
                for l in j + 1..n {
                    player_sets.push(vec![i, j, l]);
                }
            }
        }
        for players in player_sets {
            for partners in partner_choices(&counts, &p, &players) {
                let mut subsets: Vec<Vec<usize>> = p.coords().iter().map(|&c| vec![c]).collect();
                for (&pl, &s) in players.iter().zip(&partners) {
                    subsets[pl].push(s);
                }
                let y = Subgame::new(&counts, subsets)?;
                let all_in = y.profiles().iter().all(|q| h.profiles.contains(g, q));
                if all_in {
                    continue;
                }
                let source = players.iter().zip(&partners).all(|(&pl, &s)| {
                    let q = g.deviate(k, pl, s);
                    pg.signed_weight(q, k).is_some_and(|d| d > pg.tie_tol())
                });
                if !source || tried.contains(&y) {
                    continue;
                }
                tried.push(y.clone());
                if let Some(c) = certify_local_source(g, h, &y, &x, CandidateFamily::PureSliceSource, opts)? {
                    certificates.push(c);
                }
            }
        }
    }

    let mut singular_faces = 0;
    if n == 2 {
        families.push(CandidateFamily::MixedFaceRestPoint);
        for a in 0..counts[0] {
            for b in a + 1..counts[0] {
                for c in 0..counts[1] {
                    for d in c + 1..counts[1] {
                        let face = Subgame::new(&counts, vec![vec![a, b], vec![c, d]])?;
                        if !face.profiles().iter().all(|q| h.profiles.contains(g, q)) {
                            continue;
                        }
                        let x = match fixed_point_2x2(g, &face, opts.tie_tol) {
                            Ok(Some(x)) => x,
                            Ok(None) => continue,
                            Err(Error::Genericity(_)) => {
                                singular_faces += 1;
                                continue;
                            }
                            Err(e) => return Err(e),
                        };
                        let mut containing = Vec::new();
                        for e in (0..counts[0]).filter(|e| *e != a && *e != b) {
                            containing.push(Subgame::new(&counts, vec![vec![a, b, e], vec![c, d]])?);
                        }
                        for f in (0..counts[1]).filter(|f| *f != c && *f != d) {
                            containing.push(Subgame::new(&counts, vec![vec![a, b], vec![c, d, f]])?);
                        }
                        for y in containing {
                            if let Some(cert) =
                                certify_local_source(g, h, &y, &x, CandidateFamily::MixedFaceRestPoint, opts)?
                            {
                                certificates.push(cert);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(LocalSourceSearch {
        sink_id: h.id,
        certificates,
        families,
        singular_faces,
    })
}

/// Every way to pick one alternative strategy for each listed player.
fn partner_choices(counts: &[usize], p: &PureProfile, players: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &pl in players {
        let mut next = Vec::new();
        for prefix in &out {
            for s in (0..counts[pl]).filter(|&s| s != p.coords()[pl]) {
                let mut v: Vec<usize> = prefix.clone();
                v.push(s);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// `sum_{p in H} z_p (M z)_p`: the time derivative of the mass on `h`.
pub fn lyapunov_zh_derivative(g: &Game, h: &ProfileSet, x: &MixedProfile) -> Result<f64> {
    lyapunov_zh_derivative_with(&product_matrix(g), g, h, x)
}

pub fn lyapunov_zh_derivative_with(m: &ProductMatrix, g: &Game, h: &ProfileSet, x: &MixedProfile) -> Result<f64> {
    x.check_shape(g)?;
    let z = product_distribution(g, x);
    let mz = m.apply(&z);
    Ok(h.indices().iter().map(|&p| z[p] * mz[p]).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransversalEigenvalue {
    pub player: usize,
    pub strategy: usize,
    pub value: f64,
}

/// `u_i(s; x_{-i}) - U_i(x)` for every unused strategy `s` at a rest point `x`.
pub fn transversal_eigenvalues(g: &Game, x: &MixedProfile, support_threshold: f64) -> Result<Vec<TransversalEigenvalue>> {
    let field = replicator_vector_field(g, x)?;
    let worst = field.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > DEFAULT_FIXED_POINT_TOL {
        return Err(Error::Precondition(format!(
            "point is not a rest point of the replicator field (|field| = {worst:e})"
        )));
    }
    let support = x.support(support_threshold);
    let mut out = Vec::new();
    for i in 0..g.num_players() {
        let dev = g.deviation_payoffs(i, x)?;
        let value: f64 = dev.iter().zip(x.dist(i)).map(|(a, b)| a * b).sum();
        for (s, d) in dev.iter().enumerate() {
            if support.subset(i).binary_search(&s).is_err() {
                out.push(TransversalEigenvalue {
                    player: i,
                    strategy: s,
                    value: d - value,
                });
            }
        }
    }
    Ok(out)
}

/// A random point of `content(h)`: greedily grown support with random weights.
pub fn random_content_point<R: Rng + ?Sized>(g: &Game, h: &ProfileSet, rng: &mut R) -> Option<MixedProfile> {
    let &start = h.indices().choose(rng)?;
    let mut support: Vec<Vec<usize>> = g.profile_at(start).coords().iter().map(|&c| vec![c]).collect();
    let mut candidates: Vec<(usize, usize)> = (0..g.num_players())
        .flat_map(|i| (0..g.strategy_counts()[i]).map(move |s| (i, s)))
        .filter(|&(i, s)| !support[i].contains(&s))
        .collect();
    candidates.shuffle(rng);
    for (i, s) in candidates {
        support[i].push(s);
        let y = Subgame::new(g.strategy_counts(), support.clone()).ok()?;
        if !y.profiles().iter().all(|p| h.contains(g, p)) {
            support[i].pop();
        }
    }
    let dists = g
        .strategy_counts()
        .iter()
        .zip(&support)
        .map(|(&m, set)| {
            let mut d = vec![0.0; m];
            for &s in set {
                d[s] = 0.05 + rng.gen::<f64>();
            }
            let sum: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= sum);
            d
        })
        .collect();
    Some(MixedProfile::from_raw(dists))
}

/// A random point whose mass on `h` equals `1 - eps`.
///
/// A random point of `content(h)` is pulled towards a random interior point, and the mixing weight
/// is bisected until the mass hits the target. Returns `None` when `h` covers every profile.
pub fn sample_near_content<R: Rng + ?Sized>(g: &Game, h: &ProfileSet, eps: f64, rng: &mut R) -> Option<MixedProfile> {
    if h.len() == g.num_profiles() || !(eps > 0.0 && eps < 1.0) {
        return None;
    }
    let target = 1.0 - eps;
    for _ in 0..64 {
        let x = random_content_point(g, h, rng)?;
        let r = MixedProfile::random_interior(g, rng);
        if content_mass(g, h, &r) >= target {
            continue;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if content_mass(g, h, &x.mix(&r, mid)) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-17 {
                break;
            }
        }
        let candidate = x.mix(&r, hi);
        return Some(candidate);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, sink_equilibria, DEFAULT_TIE_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coordination(a: f64, b: f64) -> Game {
        Game::new(vec![2, 2], vec![vec![a, 0.0, 0.0, b], vec![a, 0.0, 0.0, b]]).unwrap()
    }

    #[test]
    fn strict_pure_equilibrium_is_quasi_strict() {
        let g = coordination(1.0, 1.0);
        let x = MixedProfile::pure(&g, &PureProfile::new(vec![0, 0])).unwrap();
        let r = is_quasi_strict_nash(&g, &x, DEFAULT_NASH_TOL).unwrap();
        assert!(r.verdict && r.is_nash);
        assert_eq!(r.margins[0], vec![0.0, 1.0]);
        let off = MixedProfile::pure(&g, &PureProfile::new(vec![0, 1])).unwrap();
        assert!(!is_quasi_strict_nash(&g, &off, DEFAULT_NASH_TOL).unwrap().is_nash);
    }

    #[test]
    fn interior_equilibrium_is_vacuously_quasi_strict() {
        let g = Game::new(vec![2, 2], vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]]).unwrap();
        let r = is_quasi_strict_nash(&g, &MixedProfile::barycenter(&g), DEFAULT_NASH_TOL).unwrap();
        assert!(r.verdict);
    }

    #[test]
    fn coordination_rest_point_is_half_half() {
        let g = coordination(1.0, 1.0);
        let x = fixed_point_2x2(&g, &Subgame::full(&[2, 2]), DEFAULT_TIE_TOL).unwrap().unwrap();
        assert_eq!(x.dists(), &[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let f = replicator_vector_field(&g, &x).unwrap();
        assert!(f.iter().flatten().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dominated_slice_has_no_interior_rest_point() {
        let g = Game::new(vec![2, 2], vec![vec![2.0, 2.0, 0.0, 1.0], vec![1.0, 0.0, 3.0, 1.5]]).unwrap();
        assert_eq!(fixed_point_2x2(&g, &Subgame::full(&[2, 2]), DEFAULT_TIE_TOL).unwrap(), None);
        let flat = Game::zeros(vec![2, 2]);
        assert!(matches!(
            fixed_point_2x2(&flat, &Subgame::full(&[2, 2]), DEFAULT_TIE_TOL),
            Err(Error::Genericity(_))
        ));
        assert!(fixed_point_2x2(&Game::zeros(vec![3, 2]), &Subgame::full(&[3, 2]), DEFAULT_TIE_TOL).is_err());
    }

    #[test]
    fn subgame_sink_has_no_cavities_or_sources() {
        let g = Game::new(vec![2, 2], vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]]).unwrap();
        let pg = build_graph(&g, DEFAULT_TIE_TOL).unwrap();
        let sinks = sink_equilibria(&pg).unwrap();
        assert!(find_cavities(&pg, &sinks[0]).is_empty());
        let rep = is_pseudoconvex_sink(&pg, &sinks[0], false).unwrap();
        assert!(rep.verdict && rep.cavity_count == 0);
        let ls = find_local_sources(&g, &pg, &sinks[0], &LocalSourceOptions::default()).unwrap();
        assert!(ls.certificates.is_empty());
        assert_eq!(ls.summary(), "no certificate in searched families");
    }

    #[test]
    fn cavity_kinds_follow_arc_orientation() {
        // Three profiles around (0,0) with (1,1) left out; both neighbours of (0,0) point into it.
        let two_in = Game::new(
            vec![2, 2],
            vec![vec![2.0, 0.0, 1.0, -1.0], vec![2.0, 1.0, 0.0, -1.0]],
        )
        .unwrap();
        let pg = build_graph(&two_in, DEFAULT_TIE_TOL).unwrap();
        let h = SinkEquilibrium {
            id: 0,
            profiles: ProfileSet::from_indices(4, [0, 1, 2]),
            is_subgame: false,
            is_singleton_pne: false,
        };
        let cav = find_cavities(&pg, &h);
        assert_eq!(cav.len(), 1);
        assert_eq!(cav[0].kind, CavityKind::TwoIn);
        assert_eq!(cav[0].w(), &PureProfile::new(vec![0, 0]));
        assert_eq!(cav[0].signed_sum, -2.0);
        assert!(is_pseudoconvex_cavity(&pg, &cav[0], true).unwrap());
        let source = two_in.negate();
        let pg = build_graph(&source, DEFAULT_TIE_TOL).unwrap();
        let cav = find_cavities(&pg, &h);
        assert_eq!(cav[0].kind, CavityKind::LocalSource);
        assert!(!is_pseudoconvex_cavity(&pg, &cav[0], false).unwrap());
    }

    #[test]
    fn transversal_eigenvalues_at_strict_equilibrium_are_negated_in_weights() {
        let g = coordination(2.0, 1.0);
        let pg = build_graph(&g, DEFAULT_TIE_TOL).unwrap();
        let p = PureProfile::new(vec![0, 0]);
        let ev = transversal_eigenvalues(&g, &MixedProfile::pure(&g, &p).unwrap(), 1e-9).unwrap();
        let mut weights: Vec<f64> = pg.in_arcs(0).map(|a| -a.weight).collect();
        weights.sort_by(f64::total_cmp);
        let mut vals: Vec<f64> = ev.iter().map(|e| e.value).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, weights);
        let interior = fixed_point_2x2(&g, &Subgame::full(&[2, 2]), DEFAULT_TIE_TOL).unwrap().unwrap();
        assert!(transversal_eigenvalues(&g, &interior, 1e-9).unwrap().is_empty());
        let moving = MixedProfile::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(transversal_eigenvalues(&g, &moving, 1e-9), Err(Error::Precondition(_))));
    }

    #[test]
    fn mass_derivative_vanishes_on_content() {
        let g = coordination(1.0, 1.0);
        let h = ProfileSet::from_indices(4, [0]);
        let x = MixedProfile::pure(&g, &PureProfile::new(vec![0, 0])).unwrap();
        assert_eq!(lyapunov_zh_derivative(&g, &h, &x).unwrap(), 0.0);
    }

    #[test]
    fn near_content_sampling_hits_target_mass() {
        let g = Game::zeros(vec![3, 3]);
        let h = ProfileSet::from_indices(9, [1, 2, 5, 3, 6, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = sample_near_content(&g, &h, 1e-3, &mut rng).unwrap();
            let m = content_mass(&g, &h, &x);
            assert!((m - (1.0 - 1e-3)).abs() < 1e-12, "{m}");
            let c = random_content_point(&g, &h, &mut rng).unwrap();
            assert!(content_membership(&g, &h, &c, 0.0));
        }
        assert!(sample_near_content(&g, &ProfileSet::all(9), 1e-3, &mut rng).is_none());
    }
}
