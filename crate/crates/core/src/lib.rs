// Index loops mirror the atom-indexed formulas; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod io;
pub mod l1;
pub mod majorization;
pub mod linalg;
pub mod measure;
pub mod povm;
pub mod random;
pub mod solver;
pub mod suite;

pub use error::{Error, Result};
pub use l1::{l1_seminorm, L1Certificate};
pub use linalg::{ComplexOperator, HermitianOperator, State, C64};
pub use majorization::{MajorizationCertificate, MajorizationOptions, Order, SeparatingFunctional, Verdict};
pub use measure::{BistochasticMatrix, ClassicalFunction, FarkasCertificate, FiniteMeasureSpace};
pub use povm::{integrate, Povm, QuantumRandomVariable, RnDerivative};
