//! Weighted preference graphs, their strongly connected components and sink equilibria.

use std::collections::HashMap;
use std::fmt::Write as _;

use petgraph::algo::{has_path_connecting, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Layout};
use crate::profile::{ProfileSet, PureProfile, Subgame};

pub const DEFAULT_TIE_TOL: f64 = 1e-12;

/// Directed arc `tail -> head`: the deviating player strictly prefers `head`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefArc {
    pub tail: usize,
    pub head: usize,
    pub player: usize,
    /// `u_player(head) - u_player(tail)`, always positive.
    pub weight: f64,
}

/// A comparable pair whose payoff difference is within the tie tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegeneratePair {
    pub a: usize,
    pub b: usize,
    pub player: usize,
    /// `u_player(b) - u_player(a)`.
    pub difference: f64,
}

#[derive(Clone, Debug)]
pub struct PreferenceGraph {
    layout: Layout,
    tie_tol: f64,
    nodes: Vec<usize>,
    position: Vec<Option<usize>>,
    arcs: Vec<PrefArc>,
    degenerate: Vec<DegeneratePair>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    /// Unordered pair (lo, hi) -> (player, u(hi) - u(lo)) for every comparable pair.
    pairs: HashMap<(usize, usize), (usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SinkEquilibrium {
    pub id: usize,
    pub profiles: ProfileSet,
    pub is_subgame: bool,
    pub is_singleton_pne: bool,
}

pub fn build_graph(g: &Game, tie_tol: f64) -> Result<PreferenceGraph> {
    if !(tie_tol >= 0.0) {
        return Err(Error::Parameter(format!("tie tolerance must be >= 0, got {tie_tol}")));
    }
    let layout = g.layout().clone();
    let mut arcs = Vec::new();
    let mut degenerate = Vec::new();
    let mut pairs = HashMap::new();
    for p in 0..layout.num_profiles() {
        for i in 0..layout.num_players() {
            let pi = layout.coord_of(p, i);
            for s in pi + 1..layout.counts()[i] {
                let q = layout.deviate(p, i, s);
                let diff = g.u(i, q) - g.u(i, p);
                pairs.insert((p, q), (i, diff));
                if diff.abs() <= tie_tol {
                    degenerate.push(DegeneratePair {
                        a: p,
                        b: q,
                        player: i,
                        difference: diff,
                    });
                } else if diff > 0.0 {
                    arcs.push(PrefArc { tail: p, head: q, player: i, weight: diff });
                } else {
                    arcs.push(PrefArc { tail: q, head: p, player: i, weight: -diff });
                }
            }
        }
    }
    let nodes: Vec<usize> = (0..layout.num_profiles()).collect();
    Ok(PreferenceGraph::assemble(layout, tie_tol, nodes, arcs, degenerate, pairs))
}

impl PreferenceGraph {
    fn assemble(
        layout: Layout,
        tie_tol: f64,
        nodes: Vec<usize>,
        arcs: Vec<PrefArc>,
        degenerate: Vec<DegeneratePair>,
        pairs: HashMap<(usize, usize), (usize, f64)>,
    ) -> Self {
        let mut position = vec![None; layout.num_profiles()];
        for (k, &v) in nodes.iter().enumerate() {
            position[v] = Some(k);
        }
        let mut out_arcs = vec![Vec::new(); nodes.len()];
        let mut in_arcs = vec![Vec::new(); nodes.len()];
        for (a, arc) in arcs.iter().enumerate() {
            out_arcs[position[arc.tail].unwrap()].push(a);
            in_arcs[position[arc.head].unwrap()].push(a);
        }
        Self {
            layout,
            tie_tol,
            nodes,
            position,
            arcs,
            degenerate,
            out_arcs,
            in_arcs,
            pairs,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }

    /// Flat indices of the nodes, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[PrefArc] {
        &self.arcs
    }

    pub fn degenerate_pairs(&self) -> &[DegeneratePair] {
        &self.degenerate
    }

    pub fn contains_node(&self, k: usize) -> bool {
        self.position.get(k).is_some_and(Option::is_some)
    }

    fn node_pos(&self, p: &PureProfile) -> Result<usize> {
        let k = self.layout.profile_index(p)?;
        self.position[k]
            .ok_or_else(|| Error::Index(format!("profile {p} is not a node of this graph")))
    }

    pub fn out_arcs(&self, k: usize) -> impl Iterator<Item = &PrefArc> {
        let list = self.position[k].map(|pos| self.out_arcs[pos].as_slice()).unwrap_or(&[]);
        list.iter().map(move |&a| &self.arcs[a])
    }

    pub fn in_arcs(&self, k: usize) -> impl Iterator<Item = &PrefArc> {
        let list = self.position[k].map(|pos| self.in_arcs[pos].as_slice()).unwrap_or(&[]);
        list.iter().map(move |&a| &self.arcs[a])
    }

    /// `u_i(q) - u_i(p)` for a comparable pair of nodes differing in player `i`.
    pub fn signed_weight(&self, q: usize, p: usize) -> Option<f64> {
        if q < p {
            self.pairs.get(&(q, p)).map(|&(_, d)| -d)
        } else {
            self.pairs.get(&(p, q)).map(|&(_, d)| d)
        }
    }

    /// Whether the arc `tail -> head` is present.
    pub fn has_arc(&self, tail: usize, head: usize) -> bool {
        self.signed_weight(head, tail)
            .is_some_and(|d| d > self.tie_tol)
    }

    fn petgraph(&self) -> DiGraph<usize, ()> {
        let mut dg = DiGraph::with_capacity(self.nodes.len(), self.arcs.len());
        for &v in &self.nodes {
            dg.add_node(v);
        }
        for arc in &self.arcs {
            let t = NodeIndex::new(self.position[arc.tail].unwrap());
            let h = NodeIndex::new(self.position[arc.head].unwrap());
            dg.add_edge(t, h, ());
        }
        dg
    }

    /// Nodes `Z_y` together with every arc and tie between them.
    pub fn induced_subgraph(&self, y: &Subgame) -> Result<PreferenceGraph> {
        let y = Subgame::new(self.layout.counts(), y.subsets().to_vec())?;
        let keep: Vec<bool> = (0..self.layout.num_profiles())
            .map(|k| self.contains_node(k) && y.contains(&self.layout.profile_at(k)))
            .collect();
        let nodes: Vec<usize> = (0..keep.len()).filter(|&k| keep[k]).collect();
        let arcs = self
            .arcs
            .iter()
            .filter(|a| keep[a.tail] && keep[a.head])
            .copied()
            .collect();
        let degenerate = self
            .degenerate
            .iter()
            .filter(|d| keep[d.a] && keep[d.b])
            .copied()
            .collect();
        let pairs = self
            .pairs
            .iter()
            .filter(|((a, b), _)| keep[*a] && keep[*b])
            .map(|(k, v)| (*k, *v))
            .collect();
        Ok(PreferenceGraph::assemble(
            self.layout.clone(),
            self.tie_tol,
            nodes,
            arcs,
            degenerate,
            pairs,
        ))
    }

    fn has_tie_at(&self, k: usize) -> bool {
        self.degenerate.iter().any(|d| d.a == k || d.b == k)
    }
}

/// Strongly connected components in a topological order of the condensation.
///
/// Each component is sorted ascending. Every arc between two components points from an earlier
/// component to a later one.
pub fn scc_decomposition(pg: &PreferenceGraph) -> Vec<Vec<usize>> {
    let dg = pg.petgraph();
    // tarjan_scc emits components in reverse topological order.
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&dg)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| dg[n]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    comps.reverse();
    comps
}

/// Sink components, ordered by their smallest profile index and numbered from 0.
pub fn sink_equilibria(pg: &PreferenceGraph) -> Result<Vec<SinkEquilibrium>> {
    if let Some(d) = pg.degenerate.first() {
        let a = pg.layout.profile_at(d.a);
        let b = pg.layout.profile_at(d.b);
        return Err(Error::Genericity(format!(
            "player {} is indifferent between {a} and {b} (difference {:e}); {} tied pair(s) in total",
            d.player,
            d.difference,
            pg.degenerate.len()
        )));
    }
    let comps = scc_decomposition(pg);
    let mut comp_of = vec![usize::MAX; pg.layout.num_profiles()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut sinks: Vec<&Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&v| pg.out_arcs(v).all(|a| comp_of[a.head] == *c))
        })
        .map(|(_, m)| m)
        .collect();
    sinks.sort_by_key(|m| m[0]);
    Ok(sinks
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let profiles =
                ProfileSet::from_indices(pg.layout.num_profiles(), members.iter().copied());
            SinkEquilibrium {
                id,
                is_subgame: profiles.is_subgame(&pg.layout),
                is_singleton_pne: members.len() == 1,
                profiles,
            }
        })
        .collect())
}

pub fn has_path(pg: &PreferenceGraph, p: &PureProfile, q: &PureProfile) -> Result<bool> {
    let a = pg.node_pos(p)?;
    let b = pg.node_pos(q)?;
    if a == b {
        return Ok(true);
    }
    Ok(has_path_connecting(&pg.petgraph(), NodeIndex::new(a), NodeIndex::new(b), None))
}

/// Every incident comparable pair is an out-arc of `p`.
pub fn is_source(pg: &PreferenceGraph, p: &PureProfile) -> Result<bool> {
    let pos = pg.node_pos(p)?;
    Ok(pg.in_arcs[pos].is_empty() && !pg.has_tie_at(pg.nodes[pos]))
}

/// Every incident comparable pair is an in-arc of `p`.
pub fn is_sink(pg: &PreferenceGraph, p: &PureProfile) -> Result<bool> {
    let pos = pg.node_pos(p)?;
    Ok(pg.out_arcs[pos].is_empty() && !pg.has_tie_at(pg.nodes[pos]))
}

fn node_id(layout: &Layout, k: usize) -> String {
    let p = layout.profile_at(k);
    let parts: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
    parts.join(",")
}

/// Graphviz text, byte-stable for identical input.
///
/// Nodes in any highlighted set are filled grey; ties are drawn as dashed undirected edges.
pub fn export_dot(pg: &PreferenceGraph, highlights: &[ProfileSet]) -> String {
    let mut out = String::new();
    out.push_str("digraph preference {\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    for &v in &pg.nodes {
        let id = node_id(&pg.layout, v);
        let group = highlights.iter().position(|h| h.contains_index(v));
        match group {
            Some(gix) => writeln!(
                out,
                "  \"{id}\" [style=filled, fillcolor=gray80, group={gix}];"
            )
            .unwrap(),
            None => writeln!(out, "  \"{id}\";").unwrap(),
        }
    }
    let mut arcs: Vec<&PrefArc> = pg.arcs.iter().collect();
    arcs.sort_by_key(|a| (a.tail, a.head));
    for a in arcs {
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            node_id(&pg.layout, a.tail),
            node_id(&pg.layout, a.head),
            format_weight(a.weight)
        )
        .unwrap();
    }
    let mut ties: Vec<&DegeneratePair> = pg.degenerate.iter().collect();
    ties.sort_by_key(|d| (d.a, d.b));
    for d in ties {
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [dir=none, style=dashed, label=\"tie\"];",
            node_id(&pg.layout, d.a),
            node_id(&pg.layout, d.b)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

fn format_weight(w: f64) -> String {
    let s = format!("{w:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Machine-readable description of a graph and its components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub strategy_counts: Vec<usize>,
    pub tie_tol: f64,
    pub arcs: Vec<ArcRecord>,
    pub degenerate_pairs: Vec<TieRecord>,
    pub sccs: Vec<SccRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub tail: PureProfile,
    pub head: PureProfile,
    pub player: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TieRecord {
    pub a: PureProfile,
    pub b: PureProfile,
    pub player: usize,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SccRecord {
    pub profiles: Vec<PureProfile>,
    pub is_sink: bool,
}

pub fn graph_report(pg: &PreferenceGraph) -> GraphReport {
    let comps = scc_decomposition(pg);
    let mut comp_of = vec![usize::MAX; pg.layout.num_profiles()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut arcs: Vec<&PrefArc> = pg.arcs.iter().collect();
    arcs.sort_by_key(|a| (a.tail, a.head));
    GraphReport {
        strategy_counts: pg.layout.counts().to_vec(),
        tie_tol: pg.tie_tol,
        arcs: arcs
            .into_iter()
            .map(|a| ArcRecord {
                tail: pg.layout.profile_at(a.tail),
                head: pg.layout.profile_at(a.head),
                player: a.player,
                weight: a.weight,
            })
            .collect(),
        degenerate_pairs: pg
            .degenerate
            .iter()
            .map(|d| TieRecord {
                a: pg.layout.profile_at(d.a),
                b: pg.layout.profile_at(d.b),
                player: d.player,
                difference: d.difference,
            })
            .collect(),
        sccs: comps
            .iter()
            .enumerate()
            .map(|(c, members)| SccRecord {
                profiles: members.iter().map(|&v| pg.layout.profile_at(v)).collect(),
                is_sink: members
                    .iter()
                    .all(|&v| pg.out_arcs(v).all(|a| comp_of[a.head] == c)),
            })
            .collect(),
    }
}
