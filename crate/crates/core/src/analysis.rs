//! One-shot structural analysis of a game: sinks, pseudoconvexity and local-source search.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::game::Game;
use crate::graph::{build_graph, scc_decomposition, sink_equilibria, DEFAULT_TIE_TOL};
use crate::profile::PureProfile;
use crate::stability::{
    find_local_sources, is_pseudoconvex_sink, LocalSourceOptions, LocalSourceSearch, PseudoconvexReport,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameDigest {
    pub strategy_counts: Vec<usize>,
    /// Hex SHA-256 of the compact JSON encoding of the game.
    pub sha256: String,
}

impl GameDigest {
    pub fn of(g: &Game) -> Self {
        let canonical = serde_json::to_string(&g.to_file()).expect("game serialises");
        let hash = Sha256::digest(canonical.as_bytes());
        let sha256 = hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Self {
            strategy_counts: g.strategy_counts().to_vec(),
            sha256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkReport {
    pub id: usize,
    pub profiles: Vec<PureProfile>,
    pub is_subgame: bool,
    pub is_singleton_pne: bool,
    pub pseudoconvex: PseudoconvexReport,
    pub local_sources: LocalSourceSearch,
}

impl SinkReport {
    /// `Some(true)` when pseudoconvexity guarantees an attractor, `Some(false)` when a certified
    /// local source rules it out, `None` when neither test decides.
    pub fn attractor_verdict(&self) -> Option<bool> {
        if self.pseudoconvex.verdict {
            Some(true)
        } else if !self.local_sources.certificates.is_empty() {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub digest: GameDigest,
    pub tie_tol: f64,
    pub strict: bool,
    pub arc_count: usize,
    pub scc_count: usize,
    pub sinks: Vec<SinkReport>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub tie_tol: f64,
    /// Treat cavities with a zero signed sum as failures.
    pub strict: bool,
    pub local: LocalSourceOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tie_tol: DEFAULT_TIE_TOL,
            strict: false,
            local: LocalSourceOptions::default(),
        }
    }
}

pub fn analyze(g: &Game, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let pg = build_graph(g, opts.tie_tol)?;
    let sinks = sink_equilibria(&pg)?;
    let local = LocalSourceOptions {
        tie_tol: opts.tie_tol,
        ..opts.local.clone()
    };
    let mut warnings = Vec::new();
    let mut reports = Vec::with_capacity(sinks.len());
    for h in &sinks {
        let pseudoconvex = is_pseudoconvex_sink(&pg, h, opts.strict)?;
        let local_sources = find_local_sources(g, &pg, h, &local)?;
        for c in &pseudoconvex.boundary {
            warnings.push(format!(
                "sink {}: cavity {} ({}) has signed sum {:e}, within tolerance of zero",
                h.id, c.subgame, c.kind, c.signed_sum
            ));
        }
        if local_sources.singular_faces > 0 {
            warnings.push(format!(
                "sink {}: {} 2x2 face(s) skipped with a singular indifference system",
                h.id, local_sources.singular_faces
            ));
        }
        reports.push(SinkReport {
            id: h.id,
            profiles: h.profiles.profiles(g),
            is_subgame: h.is_subgame,
            is_singleton_pne: h.is_singleton_pne,
            pseudoconvex,
            local_sources,
        });
    }
    Ok(AnalysisReport {
        digest: GameDigest::of(g),
        tie_tol: opts.tie_tol,
        strict: opts.strict,
        arc_count: pg.arcs().len(),
        scc_count: scc_decomposition(&pg).len(),
        sinks: reports,
        warnings,
    })
}

fn join_profiles(ps: &[PureProfile]) -> String {
    ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn render_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let shape: Vec<String> = r.digest.strategy_counts.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "game {} sha256 {}", shape.join("x"), r.digest.sha256);
    let _ = writeln!(
        out,
        "{} arcs, {} strongly connected components, {} sink equilibria (tie tolerance {:e}, {} cavity test)",
        r.arc_count,
        r.scc_count,
        r.sinks.len(),
        r.tie_tol,
        if r.strict { "strict" } else { "non-strict" }
    );
    for s in &r.sinks {
        let _ = writeln!(out, "sink {}: {} profile(s): {}", s.id, s.profiles.len(), join_profiles(&s.profiles));
        let mut tags = Vec::new();
        if s.is_singleton_pne {
            tags.push("pure Nash equilibrium");
        }
        if s.is_subgame {
            tags.push("subgame");
        }
        if !tags.is_empty() {
            let _ = writeln!(out, "  {}", tags.join(", "));
        }
        let pc = &s.pseudoconvex;
        let _ = writeln!(
            out,
            "  pseudoconvex: {} ({} cavities: {} two-in, {} one-in-one-out, {} local-source; {} boundary)",
            pc.verdict,
            pc.cavity_count,
            pc.by_kind.two_in,
            pc.by_kind.one_in_one_out,
            pc.by_kind.local_source,
            pc.boundary.len()
        );
        for c in &pc.failing {
            let _ = writeln!(out, "    failing cavity {} {} sum {:.6}", c.subgame, c.kind, c.signed_sum);
        }
        let _ = writeln!(out, "  local sources: {}", s.local_sources.summary());
        for c in &s.local_sources.certificates {
            let point: Vec<String> = c
                .point
                .dists()
                .iter()
                .map(|d| {
                    let v: Vec<String> = d.iter().map(|x| format!("{x:.6}")).collect();
                    format!("({})", v.join(","))
                })
                .collect();
            let _ = writeln!(
                out,
                "    {:?} in {} at {} min margin {}",
                c.family,
                c.subgame,
                point.join(" "),
                c.min_strict_margin().map_or("n/a".to_string(), |m| format!("{m:.6}"))
            );
        }
        let verdict = match s.attractor_verdict() {
            Some(true) => "attractor",
            Some(false) => "not an attractor",
            None => "undetermined",
        };
        let _ = writeln!(out, "  content: {verdict}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{make_cog, make_shapley};

    #[test]
    fn report_round_trips_through_json() {
        let g = make_cog().game;
        let r = analyze(&g, &AnalysisOptions::default()).unwrap();
        let back: AnalysisReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.digest.sha256.len(), 64);
        assert_eq!(r.digest, GameDigest::of(&g));
    }

    #[test]
    fn digest_changes_with_payoffs() {
        let a = make_shapley().game;
        let b = a.affine_player(0, 2.0, 0.0).unwrap();
        assert_ne!(GameDigest::of(&a).sha256, GameDigest::of(&b).sha256);
    }

    #[test]
    fn strict_mode_flips_boundary_cavities() {
        let g = make_shapley().game;
        let lax = analyze(&g, &AnalysisOptions::default()).unwrap();
        let strict = analyze(&g, &AnalysisOptions { strict: true, ..Default::default() }).unwrap();
        assert!(lax.sinks[0].pseudoconvex.verdict);
        assert!(!strict.sinks[0].pseudoconvex.verdict);
        assert_eq!(lax.warnings.len(), 6);
        assert!(render_text(&lax).contains("pseudoconvex: true"));
    }
}
