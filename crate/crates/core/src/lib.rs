//! Opportunistic spectrum access over hyper-exponential idle times.
//!
//! A primary user leaves gaps ("idle times") between its packets. A secondary
//! user may transmit inside those gaps but must keep the fraction of primary
//! packets it collides with below a budget `η`. This crate models the gaps as
//! hyper-exponential mixtures, optionally modulated by a Markov chain, builds
//! transmission strategies that meet the budget, and checks them by
//! simulation.
//!
//! ```
//! use oppaccess::{predict, simulate, SmmppModel, StrategyKind};
//!
//! let model = SmmppModel::symmetric(vec![5.0, 100.0, 6000.0], 0.9)?;
//! let strategy = StrategyKind::MarkovOptimal.build(&model, 0.1, 1e-3)?;
//! let expected = predict(&strategy, &model)?;
//! assert!((expected.collision - 0.1).abs() < 1e-9);
//!
//! let trace = model.generate(100_000, 7)?;
//! let measured = simulate::run(&trace, &strategy, 1)?;
//! assert!((measured.collision - 0.1).abs() < 0.01);
//! # Ok::<(), oppaccess::Error>(())
//! ```

pub mod distribution;
pub mod error;
pub mod fit;
pub mod io;
pub mod rng;
pub mod simulate;
pub mod smmpp;
pub mod solver;
pub mod strategies;

pub use distribution::HyperExpDist;
pub use error::{Error, Result};
pub use fit::{em_fit, tail_diagnostics, windowed_fit, EmOptions, FitResult, TailDiagnostics};
pub use simulate::{compare, outage, SimOptions, SimResult};
pub use smmpp::{IdleTrace, NonstationarySchedule, SmmppModel};
pub use strategies::{predict, Episode, PtsiMode, Strategy, StrategyKind, StrategyPrediction};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/idle-times.md")]
    mod idle_times {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/strategies.md")]
    mod strategies {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
