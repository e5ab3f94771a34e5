//! Seeded samplers for test instances and randomized refuters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexOperator, HermitianOperator, State, C64};
use crate::measure::{BistochasticMatrix, FiniteMeasureSpace};
use crate::povm::{Povm, QuantumRandomVariable};

pub type SuiteRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    C64::new(normal(rng), normal(rng)) / 2f64.sqrt()
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng>(d: usize, rng: &mut R) -> ComplexOperator {
    ComplexOperator::from_fn(d, |_, _| complex_gaussian(rng))
}

/// `(G + G*)/2` for a Ginibre `G`.
pub fn gaussian_hermitian<R: Rng>(d: usize, rng: &mut R) -> HermitianOperator {
    ginibre(d, rng).hermitian_part()
}

/// Real diagonal Gaussian matrix when `real` is set, otherwise [`gaussian_hermitian`].
pub fn random_self_adjoint<R: Rng>(d: usize, real: bool, rng: &mut R) -> HermitianOperator {
    if real {
        HermitianOperator::diag(&(0..d).map(|_| normal(rng)).collect::<Vec<_>>())
    } else {
        gaussian_hermitian(d, rng)
    }
}

/// Unit vector distributed by the unitarily invariant measure.
pub fn haar_vector<R: Rng>(d: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d).map(|_| complex_gaussian(rng)).collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

pub fn haar_pure_state<R: Rng>(d: usize, rng: &mut R) -> State {
    State::pure(&haar_vector(d, rng)).expect("unit vector")
}

/// `G G* / tr(G G*)`, full rank almost surely.
pub fn ginibre_state<R: Rng>(d: usize, rng: &mut R) -> State {
    let g = ginibre(d, rng);
    let h = HermitianOperator::new(g.matmul(&g.adjoint())).expect("Gram matrix");
    State::normalized(h).expect("nonzero Gram matrix")
}

/// Full-rank state whose smallest eigenvalue is at least `floor / d`.
pub fn full_rank_state<R: Rng>(d: usize, floor: f64, rng: &mut R) -> State {
    let s = ginibre_state(d, rng);
    let mixed = s
        .operator()
        .scale(1.0 - floor)
        .add(&HermitianOperator::identity(d).scale(floor / d as f64));
    State::normalized(mixed).expect("positive trace")
}

pub fn random_masses<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.2..2.0)).collect()
}

/// Random POVM with `m` effects summing to the identity; when `singular`
/// is set some effects are rank deficient.
pub fn random_povm<R: Rng>(space: FiniteMeasureSpace, d: usize, singular: bool, rng: &mut R) -> Povm {
    let m = space.len();
    let raw: Vec<HermitianOperator> = (0..m)
        .map(|x| {
            let rank = if singular && x % 2 == 0 && x + 1 < m { 1.max(d / 2) } else { d };
            let g = ComplexOperator::from_fn(d, |_, j| if j < rank { complex_gaussian(rng) } else { C64::new(0.0, 0.0) });
            HermitianOperator::new(g.matmul(&g.adjoint())).expect("Gram matrix")
        })
        .collect();
    let mut total = HermitianOperator::zeros(d);
    for e in &raw {
        total = total.add(e);
    }
    // Normalize by total^{-1/2} so the effects sum to the identity.
    let inv_root = total.eigen().map(|l| 1.0 / l.max(1e-300).sqrt());
    let effects = raw
        .iter()
        .map(|e| e.congruence(inv_root.as_operator()))
        .collect();
    Povm::new(space, effects).expect("valid POVM")
}

pub fn random_qrv<R: Rng>(m: usize, d: usize, self_adjoint: bool, rng: &mut R) -> QuantumRandomVariable {
    let values = (0..m)
        .map(|_| {
            if self_adjoint {
                gaussian_hermitian(d, rng).into_operator()
            } else {
                ginibre(d, rng)
            }
        })
        .collect();
    QuantumRandomVariable::new(values).expect("consistent dimensions")
}

pub fn random_self_adjoint_qrv<R: Rng>(m: usize, d: usize, rng: &mut R) -> Vec<HermitianOperator> {
    (0..m).map(|_| gaussian_hermitian(d, rng)).collect()
}

/// Random permutation of `0..m`.
pub fn permutation<R: Rng>(m: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Random point in the bistochastic polytope of `space`: a convex
/// combination of permutations when masses are uniform, Sinkhorn balancing
/// of a random positive plan otherwise.
pub fn random_bistochastic<R: Rng>(space: &FiniteMeasureSpace, rng: &mut R) -> BistochasticMatrix {
    if !space.is_uniform() {
        return sinkhorn_bistochastic(space, rng);
    }
    let m = space.len();
    let mut entries = vec![vec![0.0; m]; m];
    let k = rng.random_range(1..=m.max(2));
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let p = permutation(m, rng);
        for (i, &j) in p.iter().enumerate() {
            entries[i][j] += w / total;
        }
    }
    BistochasticMatrix::new(space.clone(), entries).expect("convex combination of permutations")
}

/// Bistochastic matrix with every entry positive, from Sinkhorn balancing
/// of a random plan against the masses of `space`.
pub fn sinkhorn_bistochastic<R: Rng>(space: &FiniteMeasureSpace, rng: &mut R) -> BistochasticMatrix {
    let m = space.len();
    let mu = space.masses();
    let mut plan: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..m).map(|_| rng.random_range(0.01..1.0f64).powi(3)).collect())
        .collect();
    for _ in 0..10_000 {
        for (x, row) in plan.iter_mut().enumerate() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v *= mu[x] / s);
        }
        let mut err: f64 = 0.0;
        for y in 0..m {
            let s: f64 = plan.iter().map(|r| r[y]).sum();
            err = err.max((s - mu[y]).abs());
            plan.iter_mut().for_each(|r| r[y] *= mu[y] / s);
        }
        if err < 1e-15 {
            break;
        }
    }
    let entries = plan
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    BistochasticMatrix::new(space.clone(), entries).expect("balanced plan")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samplers_produce_valid_objects() {
        let mut rng = seeded(7);
        for m in 1..6 {
            let space = FiniteMeasureSpace::from_masses(random_masses(m, &mut rng)).unwrap();
            let b = random_bistochastic(&space, &mut rng);
            assert_eq!(b.len(), m);
            let p = random_povm(space, 3, true, &mut rng);
            assert!(p.is_quantum_probability());
        }
        let s = full_rank_state(3, 0.1, &mut rng);
        assert!(s.min_eigenvalue() >= 0.1 / 3.0 - 1e-12);
        let v = haar_vector(4, &mut rng);
        assert!((v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeding_is_reproducible() {
        let a = gaussian_hermitian(3, &mut seeded(1));
        let b = gaussian_hermitian(3, &mut seeded(1));
        assert_eq!(a, b);
    }
}
