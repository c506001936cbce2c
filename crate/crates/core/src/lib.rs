//! Weighted sets of dictionary vectors stored as one summed vector.
//!
//! A set (or multiset, fuzzy set, distribution, ordered list) of dictionary
//! entries is encoded as the weighted sum of their vectors. Decoding runs a
//! LASSO path with sequential dual-polytope-projection screening, keeps the
//! strongest candidates and solves the restricted least-squares system
//! exactly, which recovers both members and weights while the set stays below
//! the sparsity phase transition of the dictionary.
//!
//! On top of the codec the crate provides set algebra over decoded weight
//! maps, class simplices (barycentric coordinates, projection, membership),
//! chain decomposition over implication vectors, and an experiment harness
//! measuring recovery curves.

pub mod dictionary;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod reasoning;
pub mod recovery;
pub mod sets;
pub mod simplex;
pub mod vector;

pub use dictionary::{Atoms, Dictionary, DictionarySpec};
pub use error::{Error, ErrorClass};
pub use recovery::{
    baseline_lasso_fixed, baseline_nn_decompose, decompose, dpp_screen, exact_solve_support,
    lasso_at, Coefficients, Decomposition, LassoConfig,
};
pub use sets::{Interpretation, WeightMap};
pub use simplex::ClassSimplex;
pub use vector::SummedVector;
