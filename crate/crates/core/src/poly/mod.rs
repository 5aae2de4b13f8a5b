//! Exact calculus on polynomials over `H_n`.
//!
//! Variables are the stacked coordinates `(x_1..x_n, y_1..y_n, z)`. The
//! Heisenberg weight gives `x_i, y_i` weight 1 and `z` weight 2; every
//! horizontal field lowers it by one and the generator by two, so the heat
//! semigroup `e^{tL}` is a finite sum on any polynomial.

mod compiled;
mod function;
mod ops;
mod polynomial;
mod semigroup;

pub use compiled::CompiledPoly;
pub use function::PolyFunction;
pub use ops::{
    generator, left_translate, mirror, poly_apply_field, poly_eval, right_translate,
};
pub use polynomial::{basis_monomials, monomial_weight, HPolynomial, PRUNE_RELATIVE};
pub use semigroup::{heat_semigroup, heat_semigroup_with_max_weight, SemigroupSeries, DEFAULT_MAX_WEIGHT};
