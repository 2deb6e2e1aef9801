//! Pure profiles, subgames, mixed profiles and profile sets.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Layout};

/// Default threshold below which a mixed coordinate is treated as outside the support.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-9;

/// Tolerance on each player's probability sum when a mixed profile is built.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// One strategy index per player.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PureProfile {
    coords: Vec<usize>,
}

impl PureProfile {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Copy of this profile with player `i` switched to strategy `s`.
    pub fn with(&self, i: usize, s: usize) -> Self {
        let mut coords = self.coords.clone();
        coords[i] = s;
        Self { coords }
    }

    /// The single player in which two profiles differ, if there is exactly one.
    pub fn deviating_player(&self, other: &PureProfile) -> Option<usize> {
        if self.coords.len() != other.coords.len() {
            return None;
        }
        let mut found = None;
        for (i, (a, b)) in self.coords.iter().zip(&other.coords).enumerate() {
            if a != b {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }
}

impl From<Vec<usize>> for PureProfile {
    fn from(coords: Vec<usize>) -> Self {
        Self::new(coords)
    }
}

impl fmt::Display for PureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.coords.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A product of non-empty strategy subsets, one per player. Subsets are kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subgame {
    strategy_subsets: Vec<Vec<usize>>,
}

impl Subgame {
    /// Validates the subsets against `counts`; duplicates are removed.
    pub fn new(counts: &[usize], mut subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.len() != counts.len() {
            return Err(Error::InvalidSubgame(format!(
                "expected {} strategy subsets, got {}",
                counts.len(),
                subsets.len()
            )));
        }
        for (i, (set, &m)) in subsets.iter_mut().zip(counts).enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::InvalidSubgame(format!("player {i} has an empty subset")));
            }
            if let Some(&bad) = set.iter().find(|&&s| s >= m) {
                return Err(Error::InvalidSubgame(format!(
                    "player {i} strategy {bad} out of range (has {m})"
                )));
            }
        }
        Ok(Self {
            strategy_subsets: subsets,
        })
    }

    pub fn full(counts: &[usize]) -> Self {
        Self {
            strategy_subsets: counts.iter().map(|&m| (0..m).collect()).collect(),
        }
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.strategy_subsets
    }

    pub fn subset(&self, i: usize) -> &[usize] {
        &self.strategy_subsets[i]
    }

    pub fn num_players(&self) -> usize {
        self.strategy_subsets.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.strategy_subsets.iter().map(Vec::len).collect()
    }

    pub fn is_full(&self, counts: &[usize]) -> bool {
        self.strategy_subsets
            .iter()
            .zip(counts)
            .all(|(s, &m)| s.len() == m)
    }

    pub fn contains(&self, p: &PureProfile) -> bool {
        p.len() == self.num_players()
            && p.coords()
                .iter()
                .zip(&self.strategy_subsets)
                .all(|(c, set)| set.binary_search(c).is_ok())
    }

    pub fn is_subset_of(&self, other: &Subgame) -> bool {
        self.strategy_subsets
            .iter()
            .zip(&other.strategy_subsets)
            .all(|(a, b)| a.iter().all(|s| b.binary_search(s).is_ok()))
    }

    /// All pure profiles of the subgame, in lexicographic order.
    pub fn profiles(&self) -> Vec<PureProfile> {
        let mut out = Vec::new();
        let n = self.strategy_subsets.len();
        let mut idx = vec![0usize; n];
        loop {
            out.push(PureProfile::new(
                idx.iter()
                    .zip(&self.strategy_subsets)
                    .map(|(&k, set)| set[k])
                    .collect(),
            ));
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < self.strategy_subsets[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

impl fmt::Display for Subgame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .strategy_subsets
            .iter()
            .map(|s| {
                let inner: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// One probability vector per player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    dists: Vec<Vec<f64>>,
}

impl MixedProfile {
    /// Checks non-negativity and unit sums (within [`SIMPLEX_TOL`]).
    pub fn new(dists: Vec<Vec<f64>>) -> Result<Self> {
        if dists.is_empty() {
            return Err(Error::InvalidMixedProfile("no players".into()));
        }
        for (i, d) in dists.iter().enumerate() {
            if d.is_empty() {
                return Err(Error::InvalidMixedProfile(format!("player {i} has no strategies")));
            }
            if let Some(v) = d.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidMixedProfile(format!(
                    "player {i} has invalid probability {v}"
                )));
            }
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidMixedProfile(format!(
                    "player {i} probabilities sum to {sum}"
                )));
            }
        }
        Ok(Self { dists })
    }

    /// Like [`MixedProfile::new`] but also checks the shape against a game.
    pub fn for_game(g: &Game, dists: Vec<Vec<f64>>) -> Result<Self> {
        let x = Self::new(dists)?;
        x.check_shape(g)?;
        Ok(x)
    }

    /// Normalises each player's vector by its sum; the input must be non-negative.
    pub fn normalized(g: &Game, mut dists: Vec<Vec<f64>>) -> Result<Self> {
        for d in &mut dists {
            let sum: f64 = d.iter().sum();
            if !(sum > 0.0) || d.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidMixedProfile(
                    "cannot normalise a vector with non-positive mass".into(),
                ));
            }
            d.iter_mut().for_each(|v| *v /= sum);
        }
        Self::for_game(g, dists)
    }

    pub(crate) fn from_raw(dists: Vec<Vec<f64>>) -> Self {
        Self { dists }
    }

    pub fn barycenter(g: &Game) -> Self {
        Self {
            dists: g
                .strategy_counts()
                .iter()
                .map(|&m| vec![1.0 / m as f64; m])
                .collect(),
        }
    }

    /// Uniform mixture over the strategies of `y`, zero elsewhere.
    pub fn barycenter_of(g: &Game, y: &Subgame) -> Self {
        Self {
            dists: g
                .strategy_counts()
                .iter()
                .zip(y.subsets())
                .map(|(&m, set)| {
                    let mut d = vec![0.0; m];
                    for &s in set {
                        d[s] = 1.0 / set.len() as f64;
                    }
                    d
                })
                .collect(),
        }
    }

    pub fn pure(g: &Game, p: &PureProfile) -> Result<Self> {
        g.check_profile(p)?;
        Ok(Self {
            dists: g
                .strategy_counts()
                .iter()
                .zip(p.coords())
                .map(|(&m, &s)| {
                    let mut d = vec![0.0; m];
                    d[s] = 1.0;
                    d
                })
                .collect(),
        })
    }

    /// A random point with every coordinate strictly positive (normalised exponentials).
    pub fn random_interior<R: Rng + ?Sized>(g: &Game, rng: &mut R) -> Self {
        let dists = g
            .strategy_counts()
            .iter()
            .map(|&m| {
                let raw: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            })
            .collect();
        Self { dists }
    }

    pub fn dists(&self) -> &[Vec<f64>] {
        &self.dists
    }

    pub fn dist(&self, i: usize) -> &[f64] {
        &self.dists[i]
    }

    pub fn num_players(&self) -> usize {
        self.dists.len()
    }

    pub fn check_shape(&self, g: &Game) -> Result<()> {
        let counts = g.strategy_counts();
        if self.dists.len() != counts.len()
            || self.dists.iter().zip(counts).any(|(d, &m)| d.len() != m)
        {
            return Err(Error::Shape(format!(
                "mixed profile shape {:?} does not match game shape {:?}",
                self.dists.iter().map(Vec::len).collect::<Vec<_>>(),
                counts
            )));
        }
        Ok(())
    }

    /// Strategies whose probability exceeds `threshold`, per player.
    pub fn support(&self, threshold: f64) -> Subgame {
        let subsets = self
            .dists
            .iter()
            .map(|d| {
                let s: Vec<usize> = (0..d.len()).filter(|&k| d[k] > threshold).collect();
                if s.is_empty() {
                    // Cannot happen for a probability vector with a tiny threshold, but keep the
                    // subgame well-formed by falling back to the heaviest strategy.
                    let best = (0..d.len())
                        .max_by(|&a, &b| d[a].total_cmp(&d[b]))
                        .unwrap_or(0);
                    vec![best]
                } else {
                    s
                }
            })
            .collect();
        Subgame {
            strategy_subsets: subsets,
        }
    }

    /// Probability of pure profile `p` under the product distribution.
    pub fn profile_mass(&self, p: &PureProfile) -> f64 {
        self.dists
            .iter()
            .zip(p.coords())
            .map(|(d, &s)| d[s])
            .product()
    }

    /// Concatenated coordinates, player by player.
    pub fn flatten(&self) -> Vec<f64> {
        self.dists.iter().flatten().copied().collect()
    }

    pub fn from_flat(counts: &[usize], flat: &[f64]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if flat.len() != total {
            return Err(Error::Shape(format!(
                "expected {total} coordinates, got {}",
                flat.len()
            )));
        }
        let mut off = 0;
        let dists = counts
            .iter()
            .map(|&m| {
                let d = flat[off..off + m].to_vec();
                off += m;
                d
            })
            .collect();
        Self::new(dists)
    }

    /// Convex combination `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &MixedProfile, t: f64) -> MixedProfile {
        MixedProfile {
            dists: self
                .dists
                .iter()
                .zip(&other.dists)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect())
                .collect(),
        }
    }

    /// Euclidean distance between the concatenated coordinate vectors.
    pub fn distance(&self, other: &MixedProfile) -> f64 {
        self.dists
            .iter()
            .flatten()
            .zip(other.dists.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A set of pure profiles of one game, stored as sorted flat indices plus a membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileSet {
    mask: Vec<bool>,
    members: Vec<usize>,
}

impl ProfileSet {
    pub fn from_indices(num_profiles: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = vec![false; num_profiles];
        for k in indices {
            mask[k] = true;
        }
        let members = (0..num_profiles).filter(|&k| mask[k]).collect();
        Self { mask, members }
    }

    pub fn from_profiles(g: &impl AsRef<Layout>, profiles: &[PureProfile]) -> Result<Self> {
        let idx: Vec<usize> = profiles
            .iter()
            .map(|p| g.as_ref().profile_index(p))
            .collect::<Result<_>>()?;
        Ok(Self::from_indices(g.as_ref().num_profiles(), idx))
    }

    pub fn all(num_profiles: usize) -> Self {
        Self::from_indices(num_profiles, 0..num_profiles)
    }

    pub fn contains_index(&self, k: usize) -> bool {
        self.mask.get(k).copied().unwrap_or(false)
    }

    pub fn contains(&self, g: &impl AsRef<Layout>, p: &PureProfile) -> bool {
        g.as_ref().profile_index(p)
            .map(|k| self.contains_index(k))
            .unwrap_or(false)
    }

    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn universe_size(&self) -> usize {
        self.mask.len()
    }

    pub fn complement(&self) -> Self {
        Self::from_indices(
            self.mask.len(),
            (0..self.mask.len()).filter(|&k| !self.mask[k]),
        )
    }

    pub fn profiles(&self, g: &impl AsRef<Layout>) -> Vec<PureProfile> {
        self.members.iter().map(|&k| g.as_ref().profile_at(k)).collect()
    }

    pub fn is_subset_of(&self, other: &ProfileSet) -> bool {
        self.members.iter().all(|&k| other.contains_index(k))
    }

    pub fn intersects(&self, other: &ProfileSet) -> bool {
        self.members.iter().any(|&k| other.contains_index(k))
    }

    /// The smallest subgame containing every member (per-player projections).
    pub fn span(&self, g: &impl AsRef<Layout>) -> Option<Subgame> {
        if self.members.is_empty() {
            return None;
        }
        let n = g.as_ref().num_players();
        let mut sets = vec![Vec::new(); n];
        for p in self.profiles(g) {
            for (i, &c) in p.coords().iter().enumerate() {
                sets[i].push(c);
            }
        }
        Subgame::new(g.as_ref().counts(), sets).ok()
    }

    /// Whether the set equals `Z_y` for some subgame `y`.
    pub fn is_subgame(&self, g: &impl AsRef<Layout>) -> bool {
        match self.span(g) {
            Some(y) => y.shape().iter().product::<usize>() == self.members.len(),
            None => false,
        }
    }
}

/// True iff every profile spanned by the support of `x` lies in `h`.
pub fn content_membership(g: &Game, h: &ProfileSet, x: &MixedProfile, threshold: f64) -> bool {
    x.support(threshold)
        .profiles()
        .iter()
        .all(|p| h.contains(g, p))
}

/// `z_H`: probability that the product distribution of `x` lands in `h`.
pub fn content_mass(g: &Game, h: &ProfileSet, x: &MixedProfile) -> f64 {
    let n = g.num_players();
    h.indices()
        .iter()
        .map(|&k| (0..n).map(|i| x.dist(i)[g.coord_of(k, i)]).product::<f64>())
        .sum()
}

/// The product distribution `z_p = prod_i x^i_{p_i}` over all pure profiles.
pub fn product_distribution(g: &Game, x: &MixedProfile) -> Vec<f64> {
    let mut z = vec![1.0; g.num_profiles()];
    let strides = g.strides();
    for (k, zk) in z.iter_mut().enumerate() {
        let mut rest = k;
        for (i, &st) in strides.iter().enumerate() {
            let s = rest / st;
            rest %= st;
            *zk *= x.dist(i)[s];
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> Game {
        Game::new(vec![2, 2], vec![vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn point_mass_is_in_content_of_its_profile() {
        let g = two_by_two();
        let p = PureProfile::new(vec![1, 0]);
        let h = ProfileSet::from_profiles(&g, &[p.clone()]).unwrap();
        let x = MixedProfile::pure(&g, &p).unwrap();
        assert!(content_membership(&g, &h, &x, DEFAULT_SUPPORT_THRESHOLD));
        assert_eq!(content_mass(&g, &h, &x), 1.0);
    }

    #[test]
    fn full_support_leaves_proper_subset() {
        let g = two_by_two();
        let h = ProfileSet::from_indices(4, [0, 1, 2]);
        let x = MixedProfile::barycenter(&g);
        assert!(!content_membership(&g, &h, &x, DEFAULT_SUPPORT_THRESHOLD));
        assert!((content_mass(&g, &h, &x) - 0.75).abs() < 1e-15);
        assert_eq!(content_mass(&g, &ProfileSet::all(4), &x), 1.0);
    }

    #[test]
    fn mixing_two_members_can_span_an_outsider() {
        // (0,0) and (1,1) are in H but mixing them also puts mass on (0,1) and (1,0).
        let g = two_by_two();
        let h = ProfileSet::from_indices(4, [0, 3]);
        let x = MixedProfile::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let spanned = x.support(DEFAULT_SUPPORT_THRESHOLD).profiles();
        let outside = spanned.iter().filter(|p| !h.contains(&g, p)).count();
        assert_eq!(outside, 2);
        assert!(!content_membership(&g, &h, &x, DEFAULT_SUPPORT_THRESHOLD));
        // A vertex of H on its own is fine.
        let y = MixedProfile::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(content_membership(&g, &h, &y, DEFAULT_SUPPORT_THRESHOLD));
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(MixedProfile::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(MixedProfile::new(vec![vec![1.5, -0.5]]).is_err());
        assert!(MixedProfile::new(vec![vec![]]).is_err());
        assert!(MixedProfile::new(vec![vec![f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn support_uses_threshold() {
        let x = MixedProfile::new(vec![vec![1.0 - 1e-10, 1e-10], vec![0.3, 0.7]]).unwrap();
        assert_eq!(x.support(1e-9).subsets(), &[vec![0], vec![0, 1]]);
        assert_eq!(x.support(1e-11).subsets(), &[vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn subgame_enumeration_and_checks() {
        let y = Subgame::new(&[3, 2], vec![vec![2, 0], vec![1]]).unwrap();
        assert_eq!(y.subset(0), &[0, 2]);
        let ps = y.profiles();
        assert_eq!(ps, vec![PureProfile::new(vec![0, 1]), PureProfile::new(vec![2, 1])]);
        assert!(Subgame::new(&[3, 2], vec![vec![], vec![0]]).is_err());
        assert!(Subgame::new(&[3, 2], vec![vec![3], vec![0]]).is_err());
        assert!(Subgame::full(&[3, 2]).is_full(&[3, 2]));
        assert!(!y.is_full(&[3, 2]));
    }

    #[test]
    fn profile_set_subgame_detection() {
        let g = Game::zeros(vec![2, 3]);
        let block = ProfileSet::from_profiles(
            &g,
            &[PureProfile::new(vec![0, 1]), PureProfile::new(vec![0, 2])],
        )
        .unwrap();
        assert!(block.is_subgame(&g));
        let l_shape = ProfileSet::from_indices(6, [0, 1, 3]);
        assert!(!l_shape.is_subgame(&g));
    }

    #[test]
    fn deviating_player_detection() {
        let p = PureProfile::new(vec![0, 1, 1]);
        assert_eq!(p.deviating_player(&p.with(2, 0)), Some(2));
        assert_eq!(p.deviating_player(&p), None);
        assert_eq!(p.deviating_player(&PureProfile::new(vec![1, 0, 1])), None);
    }
}
