//! Significance testing for spatially autocorrelated data.
//!
//! The null model used here keeps the spatial autocorrelation of each data
//! set fixed: every resample is a rearrangement of the observed values whose
//! Moran's I matches the observed Moran's I to a tolerance. Associations
//! between two maps are then compared against statistics computed on such
//! resamples instead of on unconstrained random permutations.
//!
//! The crate is `no_std` (with `alloc`). Enable the `parallel` feature to
//! spread ensembles and calibration trials over a rayon pool; results do not
//! depend on the number of workers because every random stream is derived
//! from the master seed and the work item index.
//!
//! ```
//! use constmoran_core::graph::{build_grid_queen, row_normalize};
//! use constmoran_core::moran::{moran_i, Field};
//!
//! let weights = row_normalize(&build_grid_queen(3, 3).unwrap()).unwrap();
//! let field = Field::new((0..9).map(|i| (i / 3) as f64).collect()).unwrap();
//! let i = moran_i(&field, &weights).unwrap();
//! assert!(i > 0.0);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod exec;
pub mod graph;
pub mod moran;
pub mod numeric;
pub mod resample;
pub mod rng;
pub mod significance;
pub mod stats;
pub mod summary;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{AdjacencyList, SpatialWeights};
pub use moran::{Field, LagState};
pub use resample::{ResampleConfig, ResampleMode, ResampleOutcome};
pub use stats::StatKind;
pub use synth::SynthConfig;
