//! Seeded fixtures for the criterion benches, so every run times the same
//! instances.

use qrv_core::linalg::HermitianOperator;
use qrv_core::majorization::apply_bistochastic;
use qrv_core::measure::{BistochasticMatrix, FiniteMeasureSpace};
use qrv_core::povm::{Povm, QuantumRandomVariable};
use qrv_core::random::{gaussian_hermitian, random_bistochastic, random_povm, random_qrv, seeded, sinkhorn_bistochastic};

pub const SEED: u64 = 2024;

pub fn hermitian(d: usize) -> HermitianOperator {
    gaussian_hermitian(d, &mut seeded(SEED ^ d as u64))
}

/// A random quantum probability on `m` atoms of unit mass and a general `f`.
pub fn seminorm_instance(m: usize, d: usize) -> (Povm, QuantumRandomVariable) {
    let mut rng = seeded(SEED.wrapping_add((m * 31 + d) as u64));
    let nu = random_povm(FiniteMeasureSpace::uniform(m, 1.0), d, false, &mut rng);
    (nu, random_qrv(m, d, false, &mut rng))
}

/// Self-adjoint `f = Bg` on `m` uniform atoms, so every order holds.
pub fn majorized_pair(m: usize, d: usize) -> (QuantumRandomVariable, QuantumRandomVariable, FiniteMeasureSpace) {
    let mut rng = seeded(SEED.wrapping_add((m * 17 + d) as u64));
    let space = FiniteMeasureSpace::uniform(m, 1.0);
    let g = random_qrv(m, d, true, &mut rng);
    let b = random_bistochastic(&space, &mut rng);
    let f = apply_bistochastic(&b, &g).expect("matching sizes");
    (f, g, space)
}

/// Entrywise positive `m x m` doubly stochastic matrix.
pub fn doubly_stochastic(m: usize) -> BistochasticMatrix {
    sinkhorn_bistochastic(&FiniteMeasureSpace::uniform(m, 1.0), &mut seeded(SEED ^ ((m as u64) << 8)))
}
