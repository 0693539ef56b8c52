//! Power control in a two-link interference channel, studied as a game.
//!
//! Transmitters choose their powers selfishly. The crate builds the finite
//! on/off games and the continuous energy-efficiency game over a shared
//! [`NetworkModel`], computes their Nash equilibria, and measures how far
//! those equilibria sit from efficient operating points: the Pareto
//! frontier, the social optimum, the Nash bargaining solution, a priced
//! equilibrium, and cooperation sustained by repetition.
//!
//! ```
//! use powergame::{ne_continuous, NetworkModel};
//!
//! let model = NetworkModel::reference();
//! let ne = ne_continuous(&model).unwrap();
//! assert!(ne.converged);
//! assert!((ne.normalized_solution[0] - 2.99).abs() < 0.01);
//! ```
//!
//! The `book/` directory at the workspace root walks through each module with
//! runnable examples; those chapters are compiled as doctests of this crate.

pub mod continuous;
pub mod efficiency;
mod error;
pub mod finite;
pub mod network;
pub mod repeated;
pub mod scalar;

pub use continuous::{
    best_response_ee, best_response_priced, br_dynamics, ee_utility, gamma_star, ne_continuous, packet_throughput,
    priced_ne, priced_utility, PricingConfig, Responder, SolveReport,
};
pub use efficiency::{
    distance_to_frontier, in_improvement_region, nash_bargaining, pareto_frontier, social_optimum, utility_grid,
    UtilityPoint, Weights,
};
pub use error::{Error, Result};
pub use finite::{
    best_responses_finite, build_ic_game, build_nfe_game, is_correlated_equilibrium, iterated_dominance, pure_nash,
    strictly_dominated, FiniteGame, FiniteGameParams, JointDistribution,
};
pub use network::{effective_gain, sinr, NetworkModel, PowerProfile};
pub use repeated::{
    deviation_payoff, discounted_utility, min_discount, simulate_trigger, DiscountSpec, Horizon, TriggerPolicy,
};

// Book chapters double as doctests so their snippets cannot drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/finite-games.md")]
    mod finite_games {}
    #[doc = include_str!("../../../book/src/continuous-game.md")]
    mod continuous_game {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/pricing.md")]
    mod pricing {}
    #[doc = include_str!("../../../book/src/repeated-game.md")]
    mod repeated_game {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
