//! Bernoulli autoregressive partially linear additive (BAPLA) models for
//! multivariate binary time series.
//!
//! Each series `i` follows a lag-one logistic autoregression with an
//! additive smooth trend:
//!
//! ```text
//! P(Y[t,i] = 1 | Y[t-1]) = logistic(beta_i + gamma_i' Y[t-1] + f_i(t/n))
//! ```
//!
//! The crate simulates such panels, estimates `(beta_i, gamma_i, f_i)` with an
//! l1 penalty on `gamma_i` (IRLS + cyclic coordinate descent, BIC-tuned), and
//! builds per-edge confidence intervals from a desparsified estimator. The
//! rows `gamma_i` form the directed interaction matrix: a nonzero entry
//! `Gamma[i][j]` means series `j` Granger-causes series `i`.

pub mod basis;
pub mod error;
pub mod fit;
pub mod infer;
pub mod io;
pub mod metrics;
pub mod netsim;
pub mod panel;
pub mod pipeline;
pub mod seed;

pub use basis::{BasisMatrix, BasisSpec};
pub use error::{Error, Result};
pub use fit::{FitOptions, ModelFit, NeuronFit};
pub use infer::{CIMatrix, DesparsifiedFit};
pub use metrics::EvalReport;
pub use netsim::{InteractionMatrix, TrendCurve};
pub use panel::SpikePanel;
