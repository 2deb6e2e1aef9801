//! Preference graphs, sink equilibria and replicator dynamics for finite normal-form games.

pub mod error;
pub mod analysis;
pub mod corpus;
pub mod dynamics;
pub mod evidence;
pub mod game;
pub mod graph;
pub mod profile;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
pub use game::{Game, GameFile, Layout, Restriction};
pub use profile::{
    content_mass, content_membership, product_distribution, MixedProfile, ProfileSet, PureProfile,
    Subgame, DEFAULT_SUPPORT_THRESHOLD,
};
pub use graph::{
    build_graph, export_dot, has_path, is_sink, is_source, scc_decomposition, sink_equilibria,
    PreferenceGraph, SinkEquilibrium, DEFAULT_TIE_TOL,
};
