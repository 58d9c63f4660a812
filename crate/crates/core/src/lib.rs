//! Direction-of-arrival estimation for microphone arrays with continuous
//! refinement on the sphere.
//!
//! The classical covariance estimators (SRP, SRP-PHAT, MUSIC, MVDR) are all
//! expressed as one cost over unit vectors, see [`estimators`]. A coarse grid
//! search finds one starting point per source, and [`mm`] polishes each one
//! with majorization-minimization steps that never increase the cost and
//! never leave the sphere.
//!
//! ```
//! use doa_refine::prelude::*;
//!
//! let geometry = ArrayGeometry::default_array();
//! let truth = DoaVector::from_angles(1.2, 0.4);
//! let scene = Scene::single_source(geometry.clone(), truth, 20.0, 7);
//! let frames = synth_stft_scene(&scene).unwrap().frames;
//!
//! let pipeline = Pipeline::new(Estimator::SrpPhat).with_grid_size(100);
//! let found = pipeline.locate(&frames, &geometry).unwrap();
//! let err = great_circle_distance(&found[0].doa, &truth).to_degrees();
//! assert!(err < 2.0);
//! ```
//!
//! Runnable programs for each capability live in the crate's `examples/`.

pub mod audio;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod manifold;
pub mod mm;
pub mod pipeline;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::estimators::{grid_search, objective, power_mean, CostSpec, Estimator, GridPeak};
    pub use crate::manifold::{
        doa_from_angles, fibonacci_grid, great_circle_distance, steering_vector, ArrayGeometry, DoaVector,
        SphericalGrid,
    };
    pub use crate::mm::{refine, RefinementTrace, Variant};
    pub use crate::pipeline::{Pipeline, SourceEstimate};
    pub use crate::sim::{evaluate, synth_stft_scene, synth_time_scene, Scene};
    pub use crate::spectral::{apply_weighting, band_select, sample_covariance, stft, SpectralFrames, Window};
}
