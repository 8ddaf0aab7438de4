//! Koopman operator approximation from snapshot data using extended dynamic
//! mode decomposition with randomized kernel-approximation feature bases.
//!
//! The pipeline: pair snapshots ([`data`]), pick a kernel and bandwidth
//! ([`kernels`]), lift the data through a random Fourier or Nyström feature
//! dictionary ([`features`]), and solve for the Koopman matrix and its
//! spectrum ([`edmd`]). Fitted random Fourier models can be grown in place
//! with the block pseudoinverse update ([`adaptive`]). A reaction-diffusion
//! simulator ([`fnsim`]) provides the built-in test dataset, and [`bench`]
//! measures how the phases scale with feature count, snapshot count, and
//! state dimension.
//!
//! ```no_run
//! use kedmd::{bench, edmd, features, fnsim, kernels};
//!
//! let cfg = fnsim::FnConfig { n_snapshots: 800, ..Default::default() };
//! let snapshots = fnsim::generate_dataset(&cfg)?;
//! let sigma = kernels::estimate_bandwidth(snapshots.x(), 10_000, 0)?;
//! let kernel = kernels::KernelSpec::new(kernels::KernelFamily::Gaussian, sigma)?;
//! let build = features::build_feature_matrices(
//!     features::FeatureMethod::Rff,
//!     &snapshots,
//!     600,
//!     Some(kernel),
//!     0,
//! )?;
//! let gram = edmd::build_gram(&build.matrices)?;
//! let a = edmd::koopman_matrix(&gram, edmd::DEFAULT_RCOND)?;
//! let dec = edmd::spectrum(&a, &build.matrices, &snapshots, 6)?;
//! println!("leading continuous-time eigenvalue: {}", dec.cont_eigs[0]);
//! # Ok::<(), kedmd::Error>(())
//! ```

pub mod adaptive;
pub mod bench;
pub mod data;
pub mod edmd;
pub mod error;
pub mod features;
pub mod fnsim;
pub mod kernels;
pub mod linalg;
pub mod rng;

pub use crate::data::{MatrixData, SnapshotSet};
pub use crate::edmd::{GramPair, KoopmanDecomposition};
pub use crate::error::{Error, Result};
pub use crate::features::{
    Basis, FeatureBuild, FeatureMatrices, FeatureMethod, FourierBasis, NystromBasis,
};
pub use crate::kernels::{KernelFamily, KernelSpec};
