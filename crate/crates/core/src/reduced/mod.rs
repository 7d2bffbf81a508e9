//! Reduced dynamics of the `K − 1` nontrivial logit singular values.

mod field;
mod integrate;
mod model;

pub use field::{field_by_name, field_names, CeField, LogitField, MseReference, NormalizedFlow, ReplicatorField, VectorField};
pub use integrate::{
    integrate, integrate_with, stepper_by_name, stepper_names, Euler, Method, Rk4, Stepper, TrajectoryPoint,
    TrajectoryRecord, MIN_STEP,
};
pub use model::{linearized_solution, mse_reference_field, uniform_stable_direction, FieldEval, ReducedModel, SingularState};
