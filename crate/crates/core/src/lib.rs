//! Tensor completion by graph propagation.
//!
//! Mode-m fibers of each partially observed acquisition become nodes of a
//! graph; kNN edge sets computed on the observed fibers of every acquisition
//! are merged into one graph, and missing fibers are recovered as the steady
//! state of diffusion with observed fibers held fixed.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the
//! experiment harness and the command line live in `graphprop-harness`.
//!
//! ```
//! use graphprop_core::{graphprop, Acquisition, FiberMatrix, ObservationSet, SolveOptions};
//!
//! let a = FiberMatrix::new(4, 2, vec![0.0, 0.1, 1.0, 1.1, 2.0, 2.1, 3.0, 3.1])?;
//! let b = FiberMatrix::new(4, 2, vec![0.0, 0.2, 2.0, 2.2, 4.0, 4.2, 6.0, 6.2])?;
//! let acqs = [
//!     Acquisition::from_full(&a, ObservationSet::new(4, vec![0, 1, 3])?)?,
//!     Acquisition::from_full(&b, ObservationSet::new(4, vec![0, 2, 3])?)?,
//! ];
//! let out = graphprop(&acqs, 1, &SolveOptions::default())?;
//! assert!(out.uncovered.is_empty());
//! assert_eq!(out.results[0].completed.row(3), a.row(3));
//! # Ok::<(), graphprop_core::Error>(())
//! ```

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod bounds;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod propagation;
pub mod solver;
pub mod sparse;
pub mod tensor;

pub use baselines::{gtvm_inpaint, halrtc_complete, stack_acquisitions, unstack, GtvmOptions, HalrtcParams};
pub use bounds::{bound_report, compute_phi, compute_psi, graphprop_bound, BoundReport};
pub use datagen::{generate_acquisitions, partial_overlap_masks, sample_observation_sets, OverlapSpec, SynthSpec};
pub use error::{Error, Result};
pub use graph::{
    build_graph, knn_edges, partition_blocks, union_edges, EdgeSet, LaplacianBlocks, ObservationSet, SparseGraph,
};
pub use metrics::{accuracy, mae, mpsnr, mse, rmse, ErrorField, PsnrVariant, RmseForm};
pub use propagation::{
    classify_by_median, diffuse_iterative, graphprop, solve_steady_state, Acquisition, CompletionResult,
    DiffusionOptions, SolveOptions, SolverKind,
};
pub use tensor::{refold, tucker_synthesize, DenseTensor, FiberMatrix, TuckerFactors};
