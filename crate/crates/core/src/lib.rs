//! Cross-entropy gradient flow of the unconstrained features model (UFM).
//!
//! Under a Sylvester-Hadamard spectral initialization the column-wise softmax
//! of the logits stays diagonal in the Hadamard basis, so the matrix flow on
//! `(W, H)` collapses onto an ODE for the `K - 1` logit singular values. This
//! crate implements both sides of that reduction, every distance-to-collapse
//! metric with its closed-form time derivative, and an experiment harness
//! that runs the full model, the reduced ODE and several reference flows side
//! by side.
//!
//! Module map:
//!
//! * [`hadamard`] – Sylvester construction, the core matrix `Ψ`, XOR row group.
//! * [`softmax`] – column softmax and its spectral form in the Hadamard basis.
//! * [`ufm`] – CE loss, gradients, initialization schemes, gradient descent.
//! * [`reduced`] – reduced vector fields, integrators and closed forms.
//! * [`metrics`] – collapse metrics, their derivatives and diagnostics.
//! * [`harness`] – experiment runner, scans, probes and artifact writers.

pub mod error;
pub mod hadamard;
pub mod harness;
pub mod metrics;
pub mod numeric;
pub mod reduced;
pub mod schedule;
pub mod softmax;
pub mod ufm;

pub use error::{Error, Result};
pub use hadamard::HadamardBasis;
pub use metrics::MetricSample;
pub use reduced::{ReducedModel, SingularState};
pub use schedule::Schedule;
pub use ufm::UfmState;
