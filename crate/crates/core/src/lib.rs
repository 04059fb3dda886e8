//! Multi-agent decision-making over classic game-theoretic environments.
//!
//! `agora` drives language-model (or scripted) players through a
//! multi-stage prompt chain: system prompt, thinking, communication,
//! action selection, reflection and recall. Around that loop it provides
//!
//! * [`game`]: the five classic 2×2 games, repetition specs and both
//!   War of Attrition variants,
//! * [`equilibrium`]: pure and mixed Nash equilibria, Pareto frontiers,
//!   regret and truncated-horizon subgame-perfect policies,
//! * [`protocol`]: system-prompt assembly, context windows, message
//!   routing and action parsing,
//! * [`memory`]: per-player, per-world vector stores with sentence-aware
//!   chunking,
//! * [`agents`]: chat-completions clients and deterministic scripted
//!   strategies,
//! * [`mechanism`]: a designer role that injects rules and reshapes the
//!   communication protocol,
//! * [`alignment`]: reward signals and preference datasets for external
//!   trainers,
//! * [`runner`]: declarative experiments over many isolated worlds.
//!
//! The guide in `book/` walks through each of these with runnable
//! snippets; the snippets are compiled and run as doctests.

pub mod agents;
pub mod alignment;
pub mod equilibrium;
pub mod game;
pub mod mechanism;
pub mod memory;
pub mod player;
pub mod protocol;
pub mod runner;

pub use player::PlayerId;

/// Default numerical tolerance shared by the solvers and checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/games.md")]
    mod games {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/attrition.md")]
    mod attrition {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/mechanism.md")]
    mod mechanism {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/runner.md")]
    mod runner {}
}
