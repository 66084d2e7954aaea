//! Controllable user dialogue act augmentation for dialogue state tracking
//! corpora.
//!
//! The pipeline per turn: [`actgen`] samples a new user act and its belief
//! state, [`genbridge`] realizes the act as candidate utterances, [`filter`]
//! keeps the first candidate consistent with the act, and [`augment`] runs
//! this over a corpus. [`metrics`] scores tracker predictions.

pub mod actgen;
pub mod augment;
pub mod corpus;
pub mod data;
pub mod filter;
pub mod genbridge;
pub mod metrics;
pub mod rng;
pub mod text;
pub mod wire;

pub use actgen::{AugConfig, DomainSwitchMode, TurnContext};
pub use corpus::{
    ActItem, ActType, CorefList, Corpus, Dialogue, DialogueState, Domain, SlotName, SlotValueDict,
    SystemAct, SystemActKind, Turn, UserAct,
};
pub use genbridge::{CandidateSet, Generator, PhraseLexicon};
