//! Comparison methods: GTVM graph inpainting and HaLRTC low-rank completion.

mod gtvm;
mod halrtc;

pub use gtvm::{gtvm_inpaint, gtvm_objective, GtvmOptions, GtvmOutcome};
pub use halrtc::{halrtc_complete, stack_acquisitions, unstack, HalrtcOutcome, HalrtcParams};
