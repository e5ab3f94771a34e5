//! Linear and semidefinite programming engines used by the certificate
//! producing routines. Both report certificates that callers re-verify.

pub mod lp;
pub mod sdp;

pub use lp::{lp_solve, Cmp, LinearOutcome, LinearProgram, LpOutcome, LpProblem};
pub use sdp::{sdp_solve, LmiBlock, SdpOptions, SdpProblem, SdpSolution};
