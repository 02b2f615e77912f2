//! Regime-aware portfolio analytics.
//!
//! The crate provides the market-adaptive ratio (a risk-adjusted return whose
//! exponents respond to a trailing regime return) next to the classical Sharpe,
//! Treynor, Sortino and information ratios; three benchmark allocators; a
//! recurrent reinforcement-learning allocator trained on either ratio; and a
//! rolling-window backtester that ties them together.
//!
//! Start with the runnable programs in `examples/`.

pub mod allocators;
pub mod backtest;
pub mod cli;
pub mod data;
pub mod error;
pub mod ratios;
pub mod rrl;

pub use error::{Error, ErrorClass, Result};
