//! Small dense semidefinite programs in linear-matrix-inequality form.
//!
//! The primal problem is
//!
//! ```text
//! minimize c'y   subject to   F_j(y) = F_j0 + sum_i y_i F_ji  >= 0   for every block j
//! ```
//!
//! with real variables `y` and Hermitian blocks. Its dual is
//!
//! ```text
//! maximize -sum_j tr(Z_j F_j0)   subject to   sum_j tr(Z_j F_ji) = c_i,  Z_j >= 0.
//! ```
//!
//! The solver follows the central path of the log-det barrier with damped
//! Newton steps from a strictly feasible start. Near the path the Newton
//! step yields an exactly dual-feasible `Z_j = mu F^{-1/2}(I - S) F^{-1/2}`,
//! so every reported gap is backed by an explicit dual point.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, lower_inverse, ComplexOperator, HermitianOperator};

/// One LMI block `F_0 + sum_i y_i F_i >= 0`; coefficients are sparse in `i`.
#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub constant: HermitianOperator,
    pub terms: Vec<(usize, HermitianOperator)>,
}

impl LmiBlock {
    pub fn new(constant: HermitianOperator) -> Self {
        Self {
            constant,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn push(&mut self, var: usize, coeff: HermitianOperator) {
        debug_assert_eq!(coeff.dim(), self.dim());
        self.terms.push((var, coeff));
    }

    pub fn evaluate(&self, y: &[f64]) -> HermitianOperator {
        let mut acc = self.constant.as_operator().clone();
        for (i, f) in &self.terms {
            if y[*i] != 0.0 {
                acc += &f.as_operator().scale_real(y[*i]);
            }
        }
        HermitianOperator::new(acc).expect("sum of Hermitian matrices")
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub y: Vec<f64>,
    pub value: f64,
    /// Dual matrices, one per block; `None` if no verified dual point was found.
    pub dual: Option<Vec<HermitianOperator>>,
    pub dual_value: f64,
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    /// Relative gap target: stop once `gap <= tol (1 + |value|)`.
    pub tol: f64,
    pub max_newton: usize,
    pub mu_factor: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_newton: 600,
            mu_factor: 0.15,
        }
    }
}

impl SdpProblem {
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            blocks: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn barrier_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    /// Cholesky factors of every block at `y`, or `None` if some block is
    /// not positive definite.
    fn factors(&self, y: &[f64]) -> Option<Vec<ComplexOperator>> {
        self.blocks.iter().map(|b| cholesky(&b.evaluate(y))).collect()
    }

    /// Minimum eigenvalue over all blocks at `y`.
    pub fn min_slack(&self, y: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.evaluate(y).lambda_min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Residual of the dual equality constraints for the given `Z`.
    pub fn dual_residual(&self, z: &[HermitianOperator]) -> f64 {
        let mut lhs = vec![0.0; self.n_vars()];
        for (b, zj) in self.blocks.iter().zip(z) {
            for (i, f) in &b.terms {
                lhs[*i] += zj.inner(f);
            }
        }
        lhs.iter()
            .zip(&self.objective)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max)
    }

    pub fn dual_objective(&self, z: &[HermitianOperator]) -> f64 {
        -self
            .blocks
            .iter()
            .zip(z)
            .map(|(b, zj)| zj.inner(&b.constant))
            .sum::<f64>()
    }
}

/// Solves `A x = b` for a symmetric positive definite `A` (row-major `n x n`).
pub(crate) fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    Some(z)
}

struct NewtonStep {
    dy: Vec<f64>,
    decrement: f64,
    /// Per block: `L^{-1}`, and `S = L^{-1} (sum_i dy_i F_i) L^{-*}`.
    linv: Vec<ComplexOperator>,
    s_step: Vec<HermitianOperator>,
}

fn newton_step(p: &SdpProblem, factors: &[ComplexOperator], mu: f64) -> Option<NewtonStep> {
    let n = p.n_vars();
    let mut grad: Vec<f64> = p.objective.iter().map(|c| c / mu).collect();
    let mut hess = vec![0.0; n * n];
    let mut linvs = Vec::with_capacity(p.blocks.len());
    let mut scaled_terms: Vec<Vec<(usize, HermitianOperator)>> = Vec::with_capacity(p.blocks.len());
    for (b, l) in p.blocks.iter().zip(factors) {
        let linv = lower_inverse(l);
        let terms: Vec<(usize, HermitianOperator)> = b
            .terms
            .iter()
            .map(|(i, f)| (*i, f.congruence(&linv)))
            .collect();
        for (ia, (i, si)) in terms.iter().enumerate() {
            grad[*i] -= si.trace();
            for (k, sk) in terms.iter().skip(ia) {
                let h = si.inner(sk);
                hess[i * n + k] += h;
                if k != i {
                    hess[k * n + i] += h;
                }
            }
        }
        linvs.push(linv);
        scaled_terms.push(terms);
    }
    let diag_max = (0..n).map(|i| hess[i * n + i]).fold(0.0f64, f64::max);
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut reg = 0.0;
    let dy = loop {
        let mut h = hess.clone();
        for i in 0..n {
            h[i * n + i] += reg;
        }
        if let Some(x) = solve_spd(&h, n, &neg) {
            break x;
        }
        reg = if reg == 0.0 {
            1e-14 * diag_max.max(1e-300)
        } else {
            reg * 100.0
        };
        if reg > 1e-2 * diag_max.max(1.0) {
            return None;
        }
    };
    let decrement = (-grad.iter().zip(&dy).map(|(g, d)| g * d).sum::<f64>()).max(0.0).sqrt();
    let s_step = scaled_terms
        .iter()
        .map(|terms| {
            let d = terms.first().map(|t| t.1.dim());
            let mut acc = ComplexOperator::zeros(d.unwrap_or(0));
            for (i, s) in terms {
                acc += &s.as_operator().scale_real(dy[*i]);
            }
            HermitianOperator::new(acc).expect("sum of Hermitian matrices")
        })
        .collect();
    Some(NewtonStep {
        dy,
        decrement,
        linv: linvs,
        s_step,
    })
}

/// Dual point `Z = mu L^{-*} (I - S) L^{-1}` built from a Newton step; it
/// satisfies the dual equalities by construction and is PSD when the
/// Newton decrement is below one.
fn dual_from_step(p: &SdpProblem, step: &NewtonStep, mu: f64) -> Option<Vec<HermitianOperator>> {
    let mut out = Vec::with_capacity(p.blocks.len());
    for (b, (linv, s)) in p.blocks.iter().zip(step.linv.iter().zip(&step.s_step)) {
        let d = b.dim();
        let inner = if s.dim() == d {
            HermitianOperator::identity(d).sub(s)
        } else {
            HermitianOperator::identity(d)
        };
        if inner.lambda_min() < 0.0 {
            return None;
        }
        out.push(inner.congruence(&linv.adjoint()).scale(mu));
    }
    Some(out)
}

pub fn sdp_solve(p: &SdpProblem, y0: &[f64], opts: SdpOptions) -> Result<SdpSolution> {
    let n = p.n_vars();
    if y0.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: y0.len(),
        });
    }
    let mut y = y0.to_vec();
    let Some(mut factors) = p.factors(&y) else {
        return Err(Error::InfeasibleStart);
    };
    let nbar = p.barrier_dim().max(1) as f64;
    let value_of = |y: &[f64]| p.objective.iter().zip(y).map(|(c, v)| c * v).sum::<f64>();
    let mut mu = (1.0 + value_of(&y).abs()) / nbar;
    let mut best: Option<(f64, f64, Vec<HermitianOperator>)> = None;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < opts.max_newton {
        // Center for the current mu.
        let mut centered = None;
        while iterations < opts.max_newton {
            iterations += 1;
            let Some(step) = newton_step(p, &factors, mu) else {
                stalled = true;
                break;
            };
            if step.decrement < 0.25 {
                centered = Some(step);
                break;
            }
            let mut alpha = 1.0 / (1.0 + step.decrement);
            loop {
                let trial: Vec<f64> = y.iter().zip(&step.dy).map(|(a, d)| a + alpha * d).collect();
                if let Some(f) = p.factors(&trial) {
                    y = trial;
                    factors = f;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    stalled = true;
                    break;
                }
            }
            if stalled {
                break;
            }
        }
        if stalled {
            break;
        }
        let Some(step) = centered else { break };
        let value = value_of(&y);
        if let Some(z) = dual_from_step(p, &step, mu) {
            let dual_value = p.dual_objective(&z);
            let better = best.as_ref().is_none_or(|(dv, _, _)| dual_value > *dv);
            if better {
                best = Some((dual_value, value, z));
            }
            let gap = value - dual_value;
            debug!("sdp mu {mu:.3e}: value {value:.10} gap {gap:.3e}");
            if gap <= opts.tol * (1.0 + value.abs()) {
                break;
            }
        }
        // Take the full Newton step before shrinking mu when it stays feasible;
        // this keeps the iterate on the path more tightly.
        let trial: Vec<f64> = y.iter().zip(&step.dy).map(|(a, d)| a + d).collect();
        if let Some(f) = p.factors(&trial) {
            y = trial;
            factors = f;
        }
        mu *= opts.mu_factor;
        if mu < 1e-300 {
            break;
        }
    }
    let value = value_of(&y);
    let (dual_value, dual) = match best {
        Some((dv, _, z)) => (dv, Some(z)),
        None => (f64::NEG_INFINITY, None),
    };
    let gap = value - dual_value;
    let converged = gap <= opts.tol * (1.0 + value.abs());
    Ok(SdpSolution {
        y,
        value,
        dual,
        dual_value,
        gap,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_max_of_fixed_diagonal() {
        // minimize t s.t. t I - diag(a, b) >= 0.
        let mut p = SdpProblem::new(1);
        p.objective[0] = 1.0;
        let mut b = LmiBlock::new(HermitianOperator::diag(&[-2.0, 5.0]));
        b.push(0, HermitianOperator::identity(2));
        p.blocks.push(b);
        let sol = sdp_solve(&p, &[10.0], SdpOptions { tol: 1e-9, ..Default::default() }).unwrap();
        assert!(sol.converged);
        assert!((sol.value - 2.0).abs() < 1e-8, "{}", sol.value);
        let z = sol.dual.unwrap();
        assert!(p.dual_residual(&z) < 1e-10);
        assert!(z[0].lambda_min() >= -1e-12);
        assert!(sol.dual_value <= sol.value + 1e-12);
    }

    #[test]
    fn infeasible_start_rejected() {
        let mut p = SdpProblem::new(1);
        p.objective[0] = 1.0;
        let mut b = LmiBlock::new(HermitianOperator::diag(&[-2.0, 5.0]));
        b.push(0, HermitianOperator::identity(2));
        p.blocks.push(b);
        assert_eq!(sdp_solve(&p, &[0.0], SdpOptions::default()).unwrap_err(), Error::InfeasibleStart);
    }

    #[test]
    fn two_variable_lmi() {
        // minimize x + y s.t. [[x, 1], [1, y]] >= 0, optimum 2 at x = y = 1.
        let mut p = SdpProblem::new(2);
        p.objective = vec![1.0, 1.0];
        let mut b = LmiBlock::new(HermitianOperator::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap());
        b.push(0, HermitianOperator::diag(&[1.0, 0.0]));
        b.push(1, HermitianOperator::diag(&[0.0, 1.0]));
        p.blocks.push(b);
        let sol = sdp_solve(&p, &[3.0, 3.0], SdpOptions { tol: 1e-10, ..Default::default() }).unwrap();
        assert!(sol.converged);
        assert!((sol.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn spd_solver() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = solve_spd(&a, 2, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }
}
