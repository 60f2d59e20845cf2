//! Exact verification engine for the quantized vertex-operator calculus of
//! equivariant CP¹ and its Hirota quadratic equations.
//!
//! Everything is computed over the field of rational functions in the
//! equivariant parameters (or at deterministic random rational points) at
//! finite truncation, so every identity check is exact: a pass means the
//! identity holds on the certified window, coefficient by coefficient.

pub mod error;
pub mod fock;
pub mod getzler;
pub mod loop_space;
pub mod ratfun;
pub mod scalar;
pub mod series;
pub mod smatrix;
pub mod vertex;

pub use error::EngineError;
pub use scalar::{Assignment, Coeff, Param, ParamEnv, ParamScalar, RatScalar, Scalar};
pub use series::{SeriesVar, TruncSeries};
pub use loop_space::{CohClass, LoopVector};
pub use ratfun::{Ext, LocusRat, QuadField, XPoly};
