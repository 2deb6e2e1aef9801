//! Named fixture games and seeded random game families.
//!
//! Each named game carries a hand-written arc list that does not depend on the payoffs. The
//! constructors rebuild the preference graph from the payoffs and refuse to return a game whose
//! graph disagrees with that list.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::graph::{build_graph, has_path, sink_equilibria, DEFAULT_TIE_TOL};
use crate::profile::{MixedProfile, PureProfile, Subgame};
use crate::stability::{fixed_point_2x2, is_quasi_strict_nash, DEFAULT_NASH_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorpusId {
    Shapley,
    CogFig2,
    ThreePlayerFig3,
    TwoPlayerFig4,
    Gadget2x3Fig4b,
    DominanceFig6,
}

impl CorpusId {
    pub const ALL: [CorpusId; 6] = [
        CorpusId::Shapley,
        CorpusId::CogFig2,
        CorpusId::ThreePlayerFig3,
        CorpusId::TwoPlayerFig4,
        CorpusId::Gadget2x3Fig4b,
        CorpusId::DominanceFig6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorpusId::Shapley => "shapley",
            CorpusId::CogFig2 => "cog_fig2",
            CorpusId::ThreePlayerFig3 => "three_player_fig3",
            CorpusId::TwoPlayerFig4 => "two_player_fig4",
            CorpusId::Gadget2x3Fig4b => "gadget_2x3_fig4b",
            CorpusId::DominanceFig6 => "dominance_fig6",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CorpusId::Shapley => "3x3 cyclic game; one sink, a 6-cycle with unit weights",
            CorpusId::CogFig2 => "3x3 game whose 8-profile sink has a pure local source",
            CorpusId::ThreePlayerFig3 => "3x3x2 game with two sinks and a parity 2x2x2 block",
            CorpusId::TwoPlayerFig4 => "4x5 game with two sinks and no path between them",
            CorpusId::Gadget2x3Fig4b => "2x3 gadget with two sources, two sinks and two face rest points",
            CorpusId::DominanceFig6 => "2x3 strongly connected game with a dominated column",
        }
    }

    pub fn build(self) -> NamedGame {
        match self {
            CorpusId::Shapley => make_shapley(),
            CorpusId::CogFig2 => make_cog(),
            CorpusId::ThreePlayerFig3 => make_three_player(),
            CorpusId::TwoPlayerFig4 => make_two_player(),
            CorpusId::Gadget2x3Fig4b => {
                make_gadget_2x3(&GadgetWeights::default()).expect("default gadget weights are valid")
                    .named
            }
            CorpusId::DominanceFig6 => make_dominance_2x3(),
        }
    }
}

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorpusId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorpusId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = CorpusId::ALL.iter().map(|i| i.as_str()).collect();
                Error::Parameter(format!("unknown corpus id {s:?}; known ids: {}", known.join(", ")))
            })
    }
}

/// Structural facts a named game must satisfy.
#[derive(Clone, Debug, PartialEq)]
pub struct Expected {
    /// Sink equilibria as sorted profile lists, in the order the library reports them.
    pub sinks: Vec<Vec<PureProfile>>,
    /// Arcs the reference drawing shows.
    pub drawn_arcs: Vec<(PureProfile, PureProfile)>,
    /// When true the drawing shows every arc, so the graph must have no others.
    pub drawing_complete: bool,
    /// Labelled profiles such as `a` and `b`.
    pub markers: Vec<(&'static str, PureProfile)>,
    /// Marker pairs with no directed path from the first to the second.
    pub unreachable: Vec<(&'static str, &'static str)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedGame {
    pub id: CorpusId,
    pub game: Game,
    pub expected: Expected,
}

impl NamedGame {
    pub fn marker(&self, name: &str) -> &PureProfile {
        &self
            .expected
            .markers
            .iter()
            .find(|(n, _)| *n == name)
            .unwrap_or_else(|| panic!("{} has no marker {name}", self.id))
            .1
    }

    /// Compares the payoff-derived graph with the expected structure; returns every mismatch.
    pub fn structural_mismatches(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let g = &self.game;
        let pg = match build_graph(g, DEFAULT_TIE_TOL) {
            Ok(pg) => pg,
            Err(e) => return vec![e.to_string()],
        };
        if !pg.degenerate_pairs().is_empty() {
            bad.push(format!("{} tied comparable pairs", pg.degenerate_pairs().len()));
        }
        for (t, h) in &self.expected.drawn_arcs {
            let (Ok(ti), Ok(hi)) = (g.profile_index(t), g.profile_index(h)) else {
                bad.push(format!("drawn arc {t}->{h} is out of range"));
                continue;
            };
            if !pg.has_arc(ti, hi) {
                bad.push(format!("drawn arc {t}->{h} is missing"));
            }
        }
        if self.expected.drawing_complete && pg.arcs().len() != self.expected.drawn_arcs.len() {
            bad.push(format!(
                "graph has {} arcs, drawing has {}",
                pg.arcs().len(),
                self.expected.drawn_arcs.len()
            ));
        }
        match sink_equilibria(&pg) {
            Ok(sinks) => {
                let got: Vec<Vec<PureProfile>> = sinks.iter().map(|s| s.profiles.profiles(g)).collect();
                if got != self.expected.sinks {
                    bad.push(format!("sink sets differ: got {got:?}"));
                }
            }
            Err(e) => bad.push(e.to_string()),
        }
        for (from, to) in &self.expected.unreachable {
            match has_path(&pg, self.marker(from), self.marker(to)) {
                Ok(false) => {}
                Ok(true) => bad.push(format!("unexpected path {from} -> {to}")),
                Err(e) => bad.push(e.to_string()),
            }
        }
        bad
    }
}

fn checked(ng: NamedGame) -> NamedGame {
    let bad = ng.structural_mismatches();
    assert!(bad.is_empty(), "fixture {} fails its own drawing: {bad:?}", ng.id);
    ng
}

fn pp(code: &str) -> PureProfile {
    PureProfile::new(code.bytes().map(|b| (b - b'0') as usize).collect())
}

/// Parses `"01>02 02>12"` into arcs between digit-coded profiles.
fn arcs(spec: &str) -> Vec<(PureProfile, PureProfile)> {
    spec.split_whitespace()
        .map(|tok| {
            let (t, h) = tok.split_once('>').expect("arc token");
            (pp(t), pp(h))
        })
        .collect()
}

fn profiles(spec: &str) -> Vec<PureProfile> {
    let mut v: Vec<PureProfile> = spec.split_whitespace().map(pp).collect();
    v.sort();
    v
}

fn bimatrix(rows: usize, cols: usize, a: &[&[f64]], b: &[&[f64]]) -> Game {
    let flat = |m: &[&[f64]]| m.iter().flat_map(|r| r.iter().copied()).collect::<Vec<f64>>();
    Game::new(vec![rows, cols], vec![flat(a), flat(b)]).expect("fixture payoffs are well-formed")
}

pub fn make_shapley() -> NamedGame {
    let game = bimatrix(
        3,
        3,
        &[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0]],
        &[&[-1.0, 0.0, 1.0], &[1.0, -1.0, 0.0], &[0.0, 1.0, -1.0]],
    );
    checked(NamedGame {
        id: CorpusId::Shapley,
        game,
        expected: Expected {
            sinks: vec![profiles("01 02 10 12 20 21")],
            drawn_arcs: arcs(
                "01>02 02>12 12>10 10>20 20>21 21>01 \
                 00>10 00>20 00>01 00>02 11>01 11>21 11>10 11>12 22>02 22>12 22>20 22>21",
            ),
            drawing_complete: true,
            markers: vec![("center", pp("11"))],
            unreachable: vec![],
        },
    })
}

/// The scaled-down cycle at the heart of the Shapley game, as the list of its six arcs.
pub fn shapley_cycle() -> Vec<(PureProfile, PureProfile)> {
    arcs("01>02 02>12 12>10 10>20 20>21 21>01")
}

pub fn make_cog() -> NamedGame {
    // Player 0 payoffs by column, player 1 by row; the top-left block is symmetric so its rest
    // point sits on the diagonal between the two sources a = (0,0) and (1,1).
    let a: [&[f64]; 3] = [&[1.0, 1.0, 0.0], &[2.0, 0.0, 1.5], &[0.0, 0.5, 2.0]];
    let b: [&[f64]; 3] = [&[0.0, 1.0, 2.0], &[1.0, 0.0, 2.0], &[2.0, 1.0, 0.0]];
    let game = bimatrix(3, 3, &a, &b);
    checked(NamedGame {
        id: CorpusId::CogFig2,
        game,
        expected: Expected {
            sinks: vec![profiles("00 01 02 10 12 20 21 22")],
            drawn_arcs: arcs(
                "20>00 00>10 20>10 11>21 21>01 11>01 02>12 12>22 02>22 \
                 00>01 01>02 00>02 11>10 10>12 11>12 22>21 21>20 22>20",
            ),
            drawing_complete: true,
            markers: vec![("a", pp("00")), ("hole", pp("11"))],
            unreachable: vec![("a", "hole")],
        },
    })
}

/// The top-left 2x2 block of the cog game.
pub fn cog_block() -> Subgame {
    Subgame::new(&[3, 3], vec![vec![0, 1], vec![0, 1]]).expect("valid block")
}

pub fn make_three_player() -> NamedGame {
    #[rustfmt::skip]
    let u: [[[[f64; 2]; 3]; 3]; 3] = [
        [[[0.0, 1.0], [1.0, 0.0], [1.375, -1.125]],
         [[1.0, 0.0], [0.0, 1.0], [-2.625, -2.375]],
         [[-1.875, -2.625], [1.125, -0.875], [-2.875, 0.875]]],
        [[[0.0, 1.0], [1.0, 0.0], [-1.125, 2.625]],
         [[1.0, 0.0], [0.0, 1.0], [2.625, -1.125]],
         [[0.125, -2.625], [0.375, -1.125], [2.875, 1.125]]],
        [[[0.0, 1.0], [1.0, 0.0], [2.875, 1.875]],
         [[1.0, 0.0], [0.0, 1.0], [1.125, -0.375]],
         [[-0.875, 2.875], [-0.875, -1.375], [-0.875, -1.125]]],
    ];
    let utilities = u
        .iter()
        .map(|pl| pl.iter().flatten().flatten().copied().collect())
        .collect();
    let game = Game::new(vec![3, 3, 2], utilities).expect("fixture payoffs are well-formed");
    // Inside the {0,1}^3 block every arc runs from an even-parity profile to an odd one.
    let block = "000>100 000>010 000>001 110>010 110>100 110>111 \
                 101>100 101>001 101>111 011>010 011>001 011>111";
    checked(NamedGame {
        id: CorpusId::ThreePlayerFig3,
        game,
        expected: Expected {
            sinks: vec![
                profiles("000 001 010 020 021 100 120 210 220 221"),
                profiles("111"),
            ],
            drawn_arcs: arcs(block),
            drawing_complete: false,
            markers: vec![("a", pp("000")), ("b", pp("111"))],
            unreachable: vec![("a", "b")],
        },
    })
}

/// The 2x2x2 block with parity payoffs.
pub fn three_player_block() -> Subgame {
    Subgame::new(&[3, 3, 2], vec![vec![0, 1], vec![0, 1], vec![0, 1]]).expect("valid block")
}

/// Point `(1 - w, w)` for all three players of the block, embedded in the 3x3x2 game.
pub fn three_player_diagonal(w: f64) -> MixedProfile {
    MixedProfile::new(vec![vec![1.0 - w, w, 0.0], vec![1.0 - w, w, 0.0], vec![1.0 - w, w]])
        .expect("diagonal point is a valid profile")
}

pub fn make_two_player() -> NamedGame {
    let a: [&[f64]; 4] = [
        &[1.0, 2.0, -0.5, 1.0, -1.0],
        &[2.0, 0.5, 1.0, 2.0, 0.0],
        &[0.0, 0.0, 2.5, 0.0, 1.0],
        &[-1.0, -1.0, -2.0, -1.5, 3.0],
    ];
    let b: [&[f64]; 4] = [
        &[1.0, 2.5, 0.0, 3.5, -2.0],
        &[1.5, 0.0, 3.0, -1.0, -2.5],
        &[4.0, 0.5, 2.0, 1.0, -1.0],
        &[0.0, 0.5, 1.0, 1.5, 5.0],
    ];
    let game = bimatrix(4, 5, &a, &b);
    let cycle = "00>01 01>03 03>13 13>11 11>10 10>12 12>22 22>20 20>00";
    let gadget = "02>00 00>01 02>01 11>10 10>12 11>12 00>10 11>01 02>12";
    let into_b = "04>34 14>34 24>34 30>34 31>34 32>34 33>34";
    let mut drawn = arcs(cycle);
    for arc in arcs(gadget).into_iter().chain(arcs(into_b)) {
        if !drawn.contains(&arc) {
            drawn.push(arc);
        }
    }
    checked(NamedGame {
        id: CorpusId::TwoPlayerFig4,
        game,
        expected: Expected {
            sinks: vec![profiles("00 01 03 10 11 12 13 20 22"), profiles("34")],
            drawn_arcs: drawn,
            drawing_complete: false,
            markers: vec![
                ("a", pp("00")),
                ("b", pp("34")),
                ("s1", pp("01")),
                ("s2", pp("12")),
                ("r1", pp("02")),
                ("r2", pp("11")),
            ],
            unreachable: vec![("a", "b")],
        },
    })
}

/// Rows {0,1} and columns {0,1,2} of the 4x5 game: a copy of the default gadget.
pub fn two_player_gadget_block() -> Subgame {
    Subgame::new(&[4, 5], vec![vec![0, 1], vec![0, 1, 2]]).expect("valid block")
}

/// Payoffs of the 2x3 gadget: `row[r][c]` for the row player, `col[r][c]` for the column player.
#[derive(Clone, Debug, PartialEq)]
pub struct GadgetWeights {
    pub row: [[f64; 3]; 2],
    pub col: [[f64; 3]; 2],
}

impl Default for GadgetWeights {
    fn default() -> Self {
        Self {
            row: [[1.0, 2.0, -0.5], [2.0, 0.5, 1.0]],
            col: [[1.0, 2.5, 0.0], [1.5, 0.0, 3.0]],
        }
    }
}

/// The gadget together with its two face rest points.
#[derive(Clone, Debug, PartialEq)]
pub struct Gadget {
    pub named: NamedGame,
    /// Rest point of the face using columns 0 and 1.
    pub x_hat: MixedProfile,
    /// Rest point of the face using columns 1 and 2.
    pub y_hat: MixedProfile,
}

impl Gadget {
    /// The ordering rule: `x_hat` is the Nash one exactly when its top-row weight exceeds `y_hat`'s.
    pub fn predicted_nash_is_x_hat(&self) -> bool {
        self.x_hat.dist(0)[0] > self.y_hat.dist(0)[0]
    }

    /// Quasi-strict verdicts for `(x_hat, y_hat)` in the 2x3 game.
    pub fn nash_verdicts(&self) -> (bool, bool) {
        let g = &self.named.game;
        (
            is_quasi_strict_nash(g, &self.x_hat, DEFAULT_NASH_TOL).map(|r| r.verdict).unwrap_or(false),
            is_quasi_strict_nash(g, &self.y_hat, DEFAULT_NASH_TOL).map(|r| r.verdict).unwrap_or(false),
        )
    }
}

pub fn make_gadget_2x3(weights: &GadgetWeights) -> Result<Gadget> {
    let rows: Vec<&[f64]> = weights.row.iter().map(|r| r.as_slice()).collect();
    let cols: Vec<&[f64]> = weights.col.iter().map(|r| r.as_slice()).collect();
    let game = Game::new(
        vec![2, 3],
        vec![
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
            cols.iter().flat_map(|r| r.iter().copied()).collect(),
        ],
    )?;
    let named = NamedGame {
        id: CorpusId::Gadget2x3Fig4b,
        game,
        expected: Expected {
            sinks: vec![profiles("01"), profiles("12")],
            drawn_arcs: arcs("02>00 00>01 02>01 11>10 10>12 11>12 00>10 11>01 02>12"),
            drawing_complete: true,
            markers: vec![
                ("s1", pp("01")),
                ("s2", pp("12")),
                ("r1", pp("02")),
                ("r2", pp("11")),
                ("a", pp("00")),
                ("d", pp("10")),
            ],
            unreachable: vec![("s1", "s2"), ("s2", "s1")],
        },
    };
    let bad = named.structural_mismatches();
    if !bad.is_empty() {
        return Err(Error::InvalidGame(format!(
            "weights do not realise the gadget graph: {}",
            bad.join("; ")
        )));
    }
    let g = &named.game;
    let face = |c: usize| Subgame::new(&[2, 3], vec![vec![0, 1], vec![c, c + 1]]).expect("valid face");
    let x_hat = fixed_point_2x2(g, &face(0), DEFAULT_TIE_TOL)?
        .ok_or_else(|| Error::InvalidGame("face {0,1} has no interior rest point".into()))?;
    let y_hat = fixed_point_2x2(g, &face(1), DEFAULT_TIE_TOL)?
        .ok_or_else(|| Error::InvalidGame("face {1,2} has no interior rest point".into()))?;
    Ok(Gadget { named, x_hat, y_hat })
}

pub fn make_dominance_2x3() -> NamedGame {
    let game = bimatrix(
        2,
        3,
        &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0]],
        &[&[0.0, 2.0, 1.0], &[2.0, 1.0, 0.0]],
    );
    checked(NamedGame {
        id: CorpusId::DominanceFig6,
        game,
        expected: Expected {
            sinks: vec![profiles("00 01 02 10 11 12")],
            drawn_arcs: arcs("10>00 01>11 02>12 00>01 02>01 00>02 11>10 12>10 12>11"),
            drawing_complete: true,
            markers: vec![],
            unreachable: vec![],
        },
    })
}

/// The undominated 2x2 face of the dominance game.
pub fn dominance_face() -> Subgame {
    Subgame::new(&[2, 3], vec![vec![0, 1], vec![0, 1]]).expect("valid face")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameClass {
    Generic,
    ZeroSum,
    Potential,
}

impl FromStr for GameClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(GameClass::Generic),
            "zero_sum" | "zero-sum" => Ok(GameClass::ZeroSum),
            "potential" => Ok(GameClass::Potential),
            other => Err(Error::Parameter(format!(
                "unknown game class {other:?}; expected generic, zero_sum or potential"
            ))),
        }
    }
}

/// Parses shapes such as `3x3` or `2x2x2`.
pub fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let shape: Vec<usize> = s
        .split(['x', 'X'])
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter(format!("cannot parse shape {s:?}")))?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Parameter(format!("shape {s:?} needs positive entries")));
    }
    Ok(shape)
}

/// Seeded random game. Payoffs are drawn uniformly from [-1, 1).
///
/// `Potential` games give every player the same random potential, so each arc increases it and the
/// graph is acyclic.
pub fn random_game(shape: &[usize], class: GameClass, seed: u64) -> Result<Game> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Parameter(format!("invalid shape {shape:?}")));
    }
    if class == GameClass::ZeroSum && shape.len() != 2 {
        return Err(Error::Parameter(format!(
            "zero-sum games need exactly 2 players, shape has {}",
            shape.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size: usize = shape.iter().product();
    let n = shape.len();
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let utilities = match class {
        GameClass::Generic => (0..n).map(|_| draw(size)).collect(),
        GameClass::ZeroSum => {
            let u = draw(size);
            let v = u.iter().map(|x| -x).collect();
            vec![u, v]
        }
        GameClass::Potential => {
            let phi = draw(size);
            vec![phi; n]
        }
    };
    Game::new(shape.to_vec(), utilities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::scc_decomposition;

    #[test]
    fn every_fixture_matches_its_drawing() {
        for id in CorpusId::ALL {
            let ng = id.build();
            assert!(ng.structural_mismatches().is_empty(), "{id}");
            assert_eq!(id.as_str().parse::<CorpusId>().unwrap(), id);
        }
        assert!("nope".parse::<CorpusId>().is_err());
    }

    #[test]
    fn three_player_block_has_parity_payoffs() {
        let ng = make_three_player();
        for p in three_player_block().profiles() {
            let odd = p.coords().iter().sum::<usize>() % 2 == 1;
            for i in 0..3 {
                assert_eq!(ng.game.utility_pure(i, &p).unwrap(), if odd { 1.0 } else { 0.0 });
            }
        }
        let r = ng.game.restrict(&three_player_block()).unwrap();
        assert_eq!(r.game.strategy_counts(), &[2, 2, 2]);
    }

    #[test]
    fn gadget_construction_rejects_wrong_orientation() {
        let mut w = GadgetWeights::default();
        w.row[0][0] = 3.0; // flips the column-0 arc
        assert!(matches!(make_gadget_2x3(&w), Err(Error::InvalidGame(_))));
        let gad = make_gadget_2x3(&GadgetWeights::default()).unwrap();
        assert!((gad.x_hat.dist(0)[0] - 0.5).abs() < 1e-15);
        assert!((gad.x_hat.dist(1)[0] - 0.6).abs() < 1e-15);
        assert!((gad.y_hat.dist(0)[0] - 3.0 / 5.5).abs() < 1e-15);
        assert!((gad.y_hat.dist(1)[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_families_are_deterministic_and_shaped() {
        let a = random_game(&[3, 3], GameClass::ZeroSum, 7).unwrap();
        assert_eq!(a, random_game(&[3, 3], GameClass::ZeroSum, 7).unwrap());
        assert_ne!(a, random_game(&[3, 3], GameClass::ZeroSum, 8).unwrap());
        for k in 0..9 {
            assert_eq!(a.u(0, k), -a.u(1, k));
        }
        assert!(random_game(&[2, 2, 2], GameClass::ZeroSum, 1).is_err());
        let p = random_game(&[2, 2, 2], GameClass::Potential, 1).unwrap();
        let pg = build_graph(&p, DEFAULT_TIE_TOL).unwrap();
        assert!(scc_decomposition(&pg).iter().all(|c| c.len() == 1));
        assert_eq!(parse_shape("2x3x4").unwrap(), vec![2, 3, 4]);
        assert!(parse_shape("2x0").is_err());
        assert!(parse_shape("abc").is_err());
    }
}
