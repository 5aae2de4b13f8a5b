//! Algebra of `H_n = R^n × R^n × R`: group law, mirror map, invariant vector
//! fields and the sub-Laplacian acting on differentiable test functions.

mod fields;
mod function;
mod point;
pub mod registry;

pub use fields::{
    apply_field, apply_field_pair, bracket, generator_apply, generator_apply_with,
    horizontal_gradient, Derivatives, FieldId, FieldKind,
};
pub use function::{
    Capabilities, FiniteDiff, LeftTranslated, Mirrored, RightTranslated, Scaled, SmoothFunction,
    SymMatrix,
};
pub use point::{inverse, mirror, omega, star, GroupPoint};
