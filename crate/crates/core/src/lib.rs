//! Verification toolkit for higher-order quantum processes.
//!
//! The crate decides validity of deterministic quantum combs and multi-round
//! process matrices through a commutative projector ring of depolarizing
//! superoperators, composes processes via the link product and the
//! generalized Born rule, and replays a side-channel activation pipeline in
//! which a causally orderable process yields a causal-inequality violation
//! once an intra-party side channel is available.

pub mod activation;
pub mod basis;
pub mod catalog;
pub mod comb;
pub mod error;
pub mod game;
pub mod json;
pub mod mpm;
pub mod operator;
pub mod process;
pub mod ring;
pub mod verdict;

pub use activation::{activation_demo, ActivationOptions, ActivationReport, Stage};
pub use basis::{expand, reconstruct, HsBasis, HsExpansion, MultiIndex};
pub use comb::{
    comb_projector, comb_projector_unravelled, embed_trivial_ends, process_comb_seq, random_comb,
    validate_comb_projective, validate_comb_trace, CombSampler, Node, NodeSeq,
};
pub use error::{Error, Result};
pub use game::{causal_bound_bruteforce, ocb_game_value, GameParty, GameSpec};
pub use mpm::{
    affine_comb_projector, chain_seq, lemma2_decomposition, linear_extensions, mpm_projector,
    random_mpm, theorem2_check, validate_mpm, LinearExtension, Scenario, Theorem2Report,
};
pub use operator::{LabeledOperator, Role, Subsystem, SystemLayout};
pub use process::{
    born_probability, cj_from_kraus, conditional_pm, extend_with_side_channels, identity_cj,
    link_product, random_instrument, trace_product, DualPairing, Instrument,
};
pub use ring::{proj_intersect, proj_union, KeepSet, RingElement};
pub use verdict::{Check, Verdict};
