//! Target-driven navigation agents trained with asynchronous actor-critic.
//!
//! The crate bundles a grid-room simulator ([`gridscene`]), synthetic
//! perception ([`featurizer`]), caption embeddings ([`semantics`]), the
//! siamese policy networks ([`policynet`]), the asynchronous trainer
//! ([`a3c`]) and the generalization benchmark ([`evalharness`]).

pub mod a3c;
pub mod dense;
pub mod evalharness;
pub mod featurizer;
pub mod gridscene;
pub mod observation;
pub mod policynet;
pub mod semantics;
pub mod seeding;
