//! Snake-robot locomotion simulator with PPO-based parameter identification.

pub mod actuator;
pub mod contact;
pub mod dynamics;
pub mod gait;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sim;
pub mod spatial;
pub mod state;
pub mod sysid;

/// The guide's code listings, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/contact.md")]
    mod contact {}
    #[doc = include_str!("../../../book/src/gait.md")]
    mod gait {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/identification.md")]
    mod identification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
