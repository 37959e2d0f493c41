//! Numerical verification of Poisson–Nijenhuis structures and construction
//! of their symplectic realizations on cotangent-bundle patches.
//!
//! The crate is organized bottom-up:
//! - [`expr`]/[`jet`]: the tensor-entry expression language with exact
//!   second-order forward-mode jets;
//! - [`fields`]: the (Π, N, Γ) field bundle on a box patch;
//! - [`algebra`]: pointwise structure checks (Schouten, torsion,
//!   concomitant, intertwining, hierarchy);
//! - [`connection`]: covariant/contravariant connection machinery and the
//!   pointwise connection solver;
//! - [`lift`]: complete/vertical lifts and the ω_k form matrices on T*M;
//! - [`spray`]: the geodesic spray, its axioms, and RK4 flow with
//!   variational and transport equations;
//! - [`realize`]: the integrated 2-forms Ω_k and every certification built
//!   on them (closedness, nondegeneracy, recursion operator, projection);
//! - [`catalog`]: built-in instances with documented analytic facts;
//! - [`problem`]/[`report`]/[`suite`]: JSON problem files, structured
//!   reports, and check orchestration for the CLI.

pub mod algebra;
pub mod catalog;
pub mod connection;
pub mod error;
pub mod expr;
pub mod fields;
pub mod jet;
pub mod lift;
pub mod problem;
pub mod realize;
pub mod report;
pub mod spray;
pub mod suite;
pub mod tensor;

pub use error::{Error, Result};
