//! Parallel probabilistic temporal tensor factorization.
//!
//! A sparse `users × items × time` tensor is split into row slabs, one per
//! worker. Each worker fits its own user factors plus local copies of the
//! item and time factors; consensus ADMM ties the local copies to global
//! averages, and a Gaussian random-walk prior chains consecutive time factors.
//!
//! ```no_run
//! use temporal_tensor::{
//!     admm::{train, EngineConfig, UpdateMode},
//!     bench::{gen_synthetic, SyntheticConfig},
//!     objective::HyperParams,
//! };
//!
//! let data = gen_synthetic(&SyntheticConfig::default()).unwrap();
//! let hp = HyperParams::with_rank(3);
//! let config = EngineConfig { workers: 4, mode: UpdateMode::Stochastic, ..Default::default() };
//! let report = train(&data.tensor, None, hp, config).unwrap();
//! println!("train RMSE {:.4}", report.final_train_rmse());
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod factors;
pub mod matrix;
pub mod objective;
pub mod report;
pub mod tensor;
pub mod tridiag;

pub use admm::{train, Engine, EngineConfig, UpdateMode};
pub use error::{Error, Result};
pub use factors::{init_factors, FactorSet};
pub use matrix::Matrix;
pub use objective::HyperParams;
pub use report::TrainReport;
pub use tensor::{split_tensor, Dims, Entry, SparseTemporalTensor, TensorPartition};
