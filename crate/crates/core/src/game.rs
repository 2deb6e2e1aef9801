//! Finite normal-form games stored as flat utility tensors.
//!
//! Profiles are laid out lexicographically with player 0 varying slowest, so the flat index of
//! `p` is `sum_i p_i * stride_i` with `stride_{N-1} = 1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{MixedProfile, PureProfile, Subgame};

/// Shape of a game and the flat-index arithmetic for its profiles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl Layout {
    pub fn new(counts: Vec<usize>) -> Self {
        Self {
            strides: strides_for(&counts),
            counts,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn num_players(&self) -> usize {
        self.counts.len()
    }

    pub fn num_profiles(&self) -> usize {
        self.strides.first().map_or(1, |s| s * self.counts[0])
    }

    pub fn index_of(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn profile_at(&self, k: usize) -> PureProfile {
        let mut rest = k;
        PureProfile::new(
            self.strides
                .iter()
                .map(|&st| {
                    let s = rest / st;
                    rest %= st;
                    s
                })
                .collect(),
        )
    }

    pub fn coord_of(&self, k: usize, i: usize) -> usize {
        (k / self.strides[i]) % self.counts[i]
    }

    pub fn deviate(&self, k: usize, i: usize, s: usize) -> usize {
        let cur = self.coord_of(k, i);
        k + s * self.strides[i] - cur * self.strides[i]
    }

    pub fn check_profile(&self, p: &PureProfile) -> Result<()> {
        if p.len() != self.counts.len() {
            return Err(Error::Index(format!(
                "profile {p} has {} coordinates, game has {} players",
                p.len(),
                self.counts.len()
            )));
        }
        for (i, (&s, &m)) in p.coords().iter().zip(&self.counts).enumerate() {
            if s >= m {
                return Err(Error::Index(format!(
                    "profile {p}: player {i} strategy {s} out of range (has {m})"
                )));
            }
        }
        Ok(())
    }

    pub fn profile_index(&self, p: &PureProfile) -> Result<usize> {
        self.check_profile(p)?;
        Ok(self.index_of(p.coords()))
    }
}

impl AsRef<Layout> for Layout {
    fn as_ref(&self) -> &Layout {
        self
    }
}

impl AsRef<Layout> for Game {
    fn as_ref(&self) -> &Layout {
        &self.layout
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    layout: Layout,
    utilities: Vec<Vec<f64>>,
    strategy_names: Option<Vec<Vec<String>>>,
}

/// On-disk representation of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub players: usize,
    pub strategy_counts: Vec<usize>,
    pub utilities: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy_names: Option<Vec<Vec<String>>>,
}

fn strides_for(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; counts.len()];
    for i in (0..counts.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * counts[i + 1];
    }
    strides
}

impl Game {
    pub fn new(counts: Vec<usize>, utilities: Vec<Vec<f64>>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidGame("a game needs at least one player".into()));
        }
        if let Some(i) = counts.iter().position(|&m| m == 0) {
            return Err(Error::InvalidGame(format!("player {i} has no strategies")));
        }
        if utilities.len() != counts.len() {
            return Err(Error::InvalidGame(format!(
                "{} players but {} utility arrays",
                counts.len(),
                utilities.len()
            )));
        }
        let size: usize = counts.iter().product();
        for (i, u) in utilities.iter().enumerate() {
            if u.len() != size {
                return Err(Error::InvalidGame(format!(
                    "player {i} has {} utilities, expected {size}",
                    u.len()
                )));
            }
            if let Some(k) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "player {i} utility at flat index {k} is not finite"
                )));
            }
        }
        Ok(Self {
            layout: Layout::new(counts),
            utilities,
            strategy_names: None,
        })
    }

    pub fn zeros(counts: Vec<usize>) -> Self {
        let size = counts.iter().product();
        let n = counts.len();
        Self::new(counts, vec![vec![0.0; size]; n]).expect("zero game is valid")
    }

    /// Builds a game by evaluating `f(player, profile)` on every profile.
    pub fn from_fn(counts: Vec<usize>, mut f: impl FnMut(usize, &PureProfile) -> f64) -> Result<Self> {
        let shell = Self::zeros(counts.clone());
        let n = counts.len();
        let mut utilities = vec![Vec::with_capacity(shell.num_profiles()); n];
        for k in 0..shell.num_profiles() {
            let p = shell.profile_at(k);
            for (i, u) in utilities.iter_mut().enumerate() {
                u.push(f(i, &p));
            }
        }
        Self::new(counts, utilities)
    }

    pub fn with_strategy_names(mut self, names: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != self.layout.counts.len()
            || names.iter().zip(&self.layout.counts).any(|(n, &m)| n.len() != m)
        {
            return Err(Error::InvalidGame(
                "strategy_names must list one label per strategy for every player".into(),
            ));
        }
        self.strategy_names = Some(names);
        Ok(self)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_players(&self) -> usize {
        self.layout.counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.layout.counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.layout.strides
    }

    pub fn num_profiles(&self) -> usize {
        self.layout.num_profiles()
    }

    pub fn strategy_names(&self) -> Option<&[Vec<String>]> {
        self.strategy_names.as_deref()
    }

    /// Flat utilities of player `i` in layout order.
    pub fn utilities(&self, i: usize) -> &[f64] {
        &self.utilities[i]
    }

    pub fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.layout.counts.len() {
            return Err(Error::Index(format!(
                "player {i} out of range ({} players)",
                self.layout.counts.len()
            )));
        }
        Ok(())
    }

    pub fn check_profile(&self, p: &PureProfile) -> Result<()> {
        self.layout.check_profile(p)
    }

    pub fn profile_index(&self, p: &PureProfile) -> Result<usize> {
        self.layout.profile_index(p)
    }

    /// Flat index without range checks.
    pub fn index_of(&self, coords: &[usize]) -> usize {
        self.layout.index_of(coords)
    }

    pub fn profile_at(&self, k: usize) -> PureProfile {
        self.layout.profile_at(k)
    }

    /// Strategy of player `i` in the profile with flat index `k`.
    pub fn coord_of(&self, k: usize, i: usize) -> usize {
        self.layout.coord_of(k, i)
    }

    /// Flat index of the profile `k` with player `i` switched to `s`.
    pub fn deviate(&self, k: usize, i: usize, s: usize) -> usize {
        self.layout.deviate(k, i, s)
    }

    pub fn utility_pure(&self, i: usize, p: &PureProfile) -> Result<f64> {
        self.check_player(i)?;
        let k = self.profile_index(p)?;
        Ok(self.utilities[i][k])
    }

    /// `u_i` at flat index `k`, unchecked.
    pub fn u(&self, i: usize, k: usize) -> f64 {
        self.utilities[i][k]
    }

    pub fn utility_mixed(&self, i: usize, x: &MixedProfile) -> Result<f64> {
        self.check_player(i)?;
        x.check_shape(self)?;
        let dev = self.deviation_payoffs_unchecked(i, x.dists());
        Ok(dev.iter().zip(x.dist(i)).map(|(a, b)| a * b).sum())
    }

    /// `U_i(s; x_{-i})` for every strategy `s` of player `i`.
    pub fn deviation_payoffs(&self, i: usize, x: &MixedProfile) -> Result<Vec<f64>> {
        self.check_player(i)?;
        x.check_shape(self)?;
        Ok(self.deviation_payoffs_unchecked(i, x.dists()))
    }

    /// Same as [`Game::deviation_payoffs`] on raw vectors that need not be distributions.
    pub fn deviation_payoffs_unchecked(&self, i: usize, dists: &[Vec<f64>]) -> Vec<f64> {
        let n = self.layout.counts.len();
        let mut out = vec![0.0; self.layout.counts[i]];
        let mut coords = vec![0usize; n];
        let u = &self.utilities[i];
        for &uk in u.iter() {
            let mut w = 1.0;
            for j in 0..n {
                if j != i {
                    w *= dists[j][coords[j]];
                }
            }
            if w != 0.0 {
                out[coords[i]] += w * uk;
            }
            let mut j = n;
            while j > 0 {
                j -= 1;
                coords[j] += 1;
                if coords[j] < self.layout.counts[j] {
                    break;
                }
                coords[j] = 0;
            }
        }
        out
    }

    /// The subgame `y` as a standalone game, with the map back to parent indices.
    pub fn restrict(&self, y: &Subgame) -> Result<Restriction> {
        if y.num_players() != self.num_players() {
            return Err(Error::InvalidSubgame(format!(
                "subgame has {} players, game has {}",
                y.num_players(),
                self.num_players()
            )));
        }
        let y = Subgame::new(&self.layout.counts, y.subsets().to_vec())?;
        let counts = y.shape();
        let parent_profiles = y.profiles();
        let utilities = (0..self.num_players())
            .map(|i| {
                parent_profiles
                    .iter()
                    .map(|p| self.utilities[i][self.index_of(p.coords())])
                    .collect()
            })
            .collect();
        let mut game = Game::new(counts, utilities)?;
        if let Some(names) = &self.strategy_names {
            let sub = names
                .iter()
                .zip(y.subsets())
                .map(|(n, set)| set.iter().map(|&s| n[s].clone()).collect())
                .collect();
            game = game.with_strategy_names(sub)?;
        }
        Ok(Restriction {
            game,
            strategy_map: y.subsets().to_vec(),
        })
    }

    pub fn negate(&self) -> Game {
        Game {
            layout: self.layout.clone(),
            utilities: self
                .utilities
                .iter()
                .map(|u| u.iter().map(|v| -v).collect())
                .collect(),
            strategy_names: self.strategy_names.clone(),
        }
    }

    /// Applies `u_i -> scale * u_i + shift` to one player.
    pub fn affine_player(&self, i: usize, scale: f64, shift: f64) -> Result<Game> {
        self.check_player(i)?;
        let mut g = self.clone();
        g.utilities[i].iter_mut().for_each(|v| *v = scale * *v + shift);
        Ok(g)
    }

    pub fn to_file(&self) -> GameFile {
        GameFile {
            players: self.num_players(),
            strategy_counts: self.layout.counts.clone(),
            utilities: self.utilities.clone(),
            strategy_names: self.strategy_names.clone(),
        }
    }

    pub fn from_file(file: GameFile) -> Result<Self> {
        if file.players != file.strategy_counts.len() {
            return Err(Error::InvalidGame(format!(
                "players = {} but strategy_counts has {} entries",
                file.players,
                file.strategy_counts.len()
            )));
        }
        let g = Game::new(file.strategy_counts, file.utilities)?;
        match file.strategy_names {
            Some(names) => g.with_strategy_names(names),
            None => Ok(g),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("game serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// A subgame extracted as its own game.
#[derive(Clone, Debug, PartialEq)]
pub struct Restriction {
    pub game: Game,
    /// `strategy_map[i][local]` is the parent index of player `i`'s local strategy.
    pub strategy_map: Vec<Vec<usize>>,
}

impl Restriction {
    pub fn to_parent(&self, p: &PureProfile) -> PureProfile {
        PureProfile::new(
            p.coords()
                .iter()
                .zip(&self.strategy_map)
                .map(|(&s, m)| m[s])
                .collect(),
        )
    }

    /// Parent profile mapped into local indices, if it lies inside the subgame.
    pub fn to_local(&self, p: &PureProfile) -> Option<PureProfile> {
        p.coords()
            .iter()
            .zip(&self.strategy_map)
            .map(|(s, m)| m.binary_search(s).ok())
            .collect::<Option<Vec<_>>>()
            .map(PureProfile::new)
    }

    /// Embeds a local mixed profile into the parent space with zeros elsewhere.
    pub fn embed(&self, parent_counts: &[usize], x: &MixedProfile) -> MixedProfile {
        let dists = parent_counts
            .iter()
            .zip(&self.strategy_map)
            .zip(x.dists())
            .map(|((&m, map), d)| {
                let mut v = vec![0.0; m];
                for (local, &s) in map.iter().enumerate() {
                    v[s] = d[local];
                }
                v
            })
            .collect();
        MixedProfile::from_raw(dists)
    }

    /// Projects a parent mixed profile onto the subgame coordinates (not renormalised).
    pub fn project(&self, x: &MixedProfile) -> Vec<Vec<f64>> {
        x.dists()
            .iter()
            .zip(&self.strategy_map)
            .map(|(d, map)| map.iter().map(|&s| d[s]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coordination() -> Game {
        Game::new(vec![2, 2], vec![vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn pure_lookup_and_index_errors() {
        let g = coordination();
        assert_eq!(g.utility_pure(0, &PureProfile::new(vec![0, 0])).unwrap(), 1.0);
        assert_eq!(g.utility_pure(0, &PureProfile::new(vec![0, 1])).unwrap(), 0.0);
        assert!(matches!(
            g.utility_pure(2, &PureProfile::new(vec![0, 0])),
            Err(Error::Index(_))
        ));
        assert!(matches!(
            g.utility_pure(0, &PureProfile::new(vec![0, 2])),
            Err(Error::Index(_))
        ));
        assert!(matches!(
            g.utility_pure(0, &PureProfile::new(vec![0])),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn layout_puts_player_zero_slowest() {
        let g = Game::zeros(vec![2, 3, 2]);
        assert_eq!(g.strides(), &[6, 2, 1]);
        assert_eq!(g.profile_at(7), PureProfile::new(vec![1, 0, 1]));
        for k in 0..g.num_profiles() {
            assert_eq!(g.profile_index(&g.profile_at(k)).unwrap(), k);
        }
        assert_eq!(g.deviate(7, 1, 2), g.index_of(&[1, 2, 1]));
    }

    #[test]
    fn mixed_utility_at_barycenter_and_vertex() {
        let g = Game::new(
            vec![2, 2],
            vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]],
        )
        .unwrap();
        let x = MixedProfile::barycenter(&g);
        assert_eq!(g.utility_mixed(0, &x).unwrap(), 0.0);
        let v = MixedProfile::pure(&g, &PureProfile::new(vec![1, 0])).unwrap();
        assert_eq!(g.utility_mixed(1, &v).unwrap(), 1.0);
        let wrong = MixedProfile::new(vec![vec![1.0]]).unwrap();
        assert!(matches!(g.utility_mixed(0, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn restriction_keeps_shared_payoffs() {
        let g = Game::from_fn(vec![2, 3], |i, p| (10 * i + 3 * p.coords()[0] + p.coords()[1]) as f64)
            .unwrap();
        let y = Subgame::new(&[2, 3], vec![vec![0, 1], vec![1, 2]]).unwrap();
        let r = g.restrict(&y).unwrap();
        assert_eq!(r.game.strategy_counts(), &[2, 2]);
        for k in 0..r.game.num_profiles() {
            let local = r.game.profile_at(k);
            let parent = r.to_parent(&local);
            for i in 0..2 {
                assert_eq!(
                    r.game.utility_pure(i, &local).unwrap(),
                    g.utility_pure(i, &parent).unwrap()
                );
            }
            assert_eq!(r.to_local(&parent), Some(local));
        }
        let full = g.restrict(&Subgame::full(&[2, 3])).unwrap();
        assert_eq!(full.game, g);
    }

    #[test]
    fn restriction_rejects_empty_subset() {
        let g = Game::zeros(vec![2, 2]);
        let bad = Subgame::full(&[2, 2]);
        assert!(g.restrict(&bad).is_ok());
        assert!(Subgame::new(&[2, 2], vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn negation_is_an_involution() {
        let g = Game::from_fn(vec![2, 2], |i, p| (i as f64) + 3.0 * p.coords()[0] as f64).unwrap();
        assert_eq!(g.negate().negate(), g);
        let z = Game::zeros(vec![3, 2]);
        assert_eq!(z.negate().utilities(0), z.utilities(0));
        let three = Game::new(vec![1, 1], vec![vec![3.0], vec![0.0]]).unwrap();
        assert_eq!(three.negate().utilities(0)[0], -3.0);
    }

    #[test]
    fn json_round_trip_is_value_identical() {
        let g = Game::from_fn(vec![2, 3], |i, p| {
            0.1 * (i + 1) as f64 + 1.0 / (1.0 + p.coords()[1] as f64) - 1e-17 * p.coords()[0] as f64
        })
        .unwrap()
        .with_strategy_names(vec![
            vec!["T".into(), "B".into()],
            vec!["L".into(), "M".into(), "R".into()],
        ])
        .unwrap();
        let text = g.to_json();
        let back = Game::from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Game::from_json("{\n  \"players\": 2,\n  \"strategy_counts\": [2, 2],\n  oops\n}")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let err = Game::from_json(r#"{"players": 3, "strategy_counts": [2, 2], "utilities": [[0,0,0,0],[0,0,0,0]]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidGame(_)));
    }
}
