//! Dense two-phase simplex with dual and Farkas certificates.
//!
//! Standard form is `min c'x  s.t.  Ax = b, x >= 0`. Rows are sign-flipped
//! so that `b >= 0` and equilibrated by their largest entry; one artificial
//! column per row is kept for the whole solve so that duals can be read off
//! the reduced costs of the artificials. Pricing is Dantzig's rule until a
//! run of degenerate pivots is seen, after which Bland's rule takes over
//! for the rest of the solve.

use log::debug;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;
const MAX_PIVOTS: usize = 200_000;

/// Acceptance threshold for certificate residuals.
pub const CERT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    /// Primal optimum `x`, dual `y` with `A'y <= c`, and `value = c'x`.
    Optimal { x: Vec<f64>, y: Vec<f64>, value: f64 },
    /// `y'A <= 0` and `y'b > 0`.
    Infeasible { farkas: Vec<f64> },
    /// `A r = 0`, `r >= 0`, `c'r < 0`.
    Unbounded { ray: Vec<f64> },
}

impl LpProblem {
    pub fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let n = c.len();
        if a.len() != b.len() {
            return Err(Error::DimMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        for row in &a {
            if row.len() != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let finite = c.iter().chain(&b).chain(a.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite);
        }
        Ok(Self { c, a, b })
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    fn scale(&self) -> f64 {
        self.a
            .iter()
            .flatten()
            .chain(&self.b)
            .fold(1.0f64, |m, v| m.max(v.abs()))
    }

    /// `max_i |A_i x - b_i|`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (dot(row, x) - bi).abs())
            .fold(0.0, f64::max)
    }

    /// `y' A_j` for every column `j`.
    pub fn transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vars()];
        for (row, yi) in self.a.iter().zip(y) {
            for (o, aij) in out.iter_mut().zip(row) {
                *o += yi * aij;
            }
        }
        out
    }

    /// Checks a Farkas vector independently of the solver.
    pub fn verify_farkas(&self, y: &[f64]) -> bool {
        let ya = self.transpose_apply(y);
        let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = CERT_TOL * ynorm.max(1.0) * 1e-2;
        ya.iter().all(|&v| v <= slack) && dot(y, &self.b) > CERT_TOL * ynorm.max(1.0)
    }

    /// Checks primal feasibility, dual feasibility and complementary
    /// slackness of an optimal pair.
    pub fn verify_optimal(&self, x: &[f64], y: &[f64]) -> bool {
        let scale = self.scale();
        let tol = CERT_TOL * scale;
        if x.iter().any(|&v| v < -tol) || self.primal_residual(x) > tol {
            return false;
        }
        let ya = self.transpose_apply(y);
        let cscale = self.c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let dtol = CERT_TOL * cscale.max(scale);
        for j in 0..self.n_vars() {
            let reduced = self.c[j] - ya[j];
            if reduced < -dtol {
                return false;
            }
            if (x[j].max(0.0) * reduced).abs() > dtol * (1.0 + x[j].abs()) {
                return false;
            }
        }
        true
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    value: f64,
    bland: bool,
    degenerate_run: usize,
    pivots: usize,
}

impl Tableau {
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.cols + j]
    }

    fn set_objective(&mut self, c: &[f64]) {
        self.cost = c.to_vec();
        self.value = 0.0;
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                self.cost[j] -= cb * self.t[r * self.cols + j];
            }
            self.value += cb * self.rhs[r];
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let p = self.t[pr * cols + pc];
        for j in 0..cols {
            self.t[pr * cols + j] /= p;
        }
        self.rhs[pr] /= p;
        self.t[pr * cols + pc] = 1.0;
        let pivot_row: Vec<f64> = self.t[pr * cols..(pr + 1) * cols].to_vec();
        let prhs = self.rhs[pr];
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * cols + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
            self.rhs[r] -= f * prhs;
            if self.rhs[r] < 0.0 && self.rhs[r] > -1e-13 {
                self.rhs[r] = 0.0;
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[pc] = 0.0;
            self.value += f * prhs;
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn choose_entering(&self, allowed: usize) -> Option<usize> {
        if self.bland {
            (0..allowed).find(|&j| self.cost[j] < -COST_TOL)
        } else {
            let mut best = None;
            let mut best_val = -COST_TOL;
            for j in 0..allowed {
                if self.cost[j] < best_val {
                    best_val = self.cost[j];
                    best = Some(j);
                }
            }
            best
        }
    }

    fn choose_leaving(&self, pc: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs[r] / a;
            best = match best {
                None => Some((r, ratio)),
                Some((br, bv)) => {
                    if ratio < bv - 1e-12 || (ratio <= bv + 1e-12 && self.basis[r] < self.basis[br]) {
                        Some((r, ratio))
                    } else {
                        Some((br, bv))
                    }
                }
            };
        }
        best.map(|(r, _)| r)
    }

    /// Runs simplex iterations with entering columns restricted to
    /// `0..allowed`. Returns the unbounded column if one is found.
    fn run(&mut self, allowed: usize) -> Result<Option<usize>> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::CycleLimit);
            }
            let Some(pc) = self.choose_entering(allowed) else {
                return Ok(None);
            };
            let Some(pr) = self.choose_leaving(pc) else {
                return Ok(Some(pc));
            };
            if self.rhs[pr].abs() < 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_STREAK {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
    }
}

pub fn lp_solve(p: &LpProblem) -> Result<LpOutcome> {
    let m = p.n_rows();
    let n = p.n_vars();
    if m == 0 {
        if p.c.iter().any(|&c| c < 0.0) {
            let ray = p.c.iter().map(|&c| if c < 0.0 { 1.0 } else { 0.0 }).collect();
            return Ok(LpOutcome::Unbounded { ray });
        }
        return Ok(LpOutcome::Optimal {
            x: vec![0.0; n],
            y: vec![],
            value: 0.0,
        });
    }
    // Row i of the working system is (sign_i / scale_i) * (A_i, b_i).
    let mut row_factor = vec![1.0; m];
    let cols = n + m;
    let mut t = vec![0.0; m * cols];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        let big = p.a[i].iter().fold(p.b[i].abs(), |acc, v| acc.max(v.abs()));
        let scale = if big > 0.0 { big } else { 1.0 };
        let sign = if p.b[i] < 0.0 { -1.0 } else { 1.0 };
        row_factor[i] = sign / scale;
        for j in 0..n {
            t[i * cols + j] = p.a[i][j] * row_factor[i];
        }
        t[i * cols + n + i] = 1.0;
        rhs[i] = p.b[i] * row_factor[i];
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        rhs,
        basis: (n..n + m).collect(),
        cost: vec![],
        value: 0.0,
        bland: false,
        degenerate_run: 0,
        pivots: 0,
    };

    let mut phase1 = vec![0.0; cols];
    for c in &mut phase1[n..] {
        *c = 1.0;
    }
    tab.set_objective(&phase1);
    tab.run(n)?;
    let infeasibility = tab.value;
    debug!("lp phase 1: {} pivots, infeasibility {infeasibility:.3e}", tab.pivots);
    if infeasibility > 1e-9 {
        // y_i = 1 - d_{n+i} in the working rows, mapped back to the input rows.
        let farkas: Vec<f64> = (0..m)
            .map(|i| (1.0 - tab.cost[n + i]) * row_factor[i])
            .collect();
        let norm = farkas.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let farkas: Vec<f64> = farkas.iter().map(|v| v / norm).collect();
        if p.verify_farkas(&farkas) {
            return Ok(LpOutcome::Infeasible { farkas });
        }
        if infeasibility > 1e-7 {
            return Err(Error::Numerical(format!(
                "phase 1 ended at {infeasibility:.3e} but the Farkas vector does not verify"
            )));
        }
    }

    // Move artificials out of the basis where possible; rows where this is
    // impossible are redundant and keep their artificial at level zero.
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let mut best = None;
        let mut best_abs = PIVOT_TOL;
        for j in 0..n {
            let v = tab.at(r, j).abs();
            if v > best_abs {
                best_abs = v;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            tab.pivot(r, j);
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&p.c);
    tab.set_objective(&phase2);
    tab.degenerate_run = 0;
    if let Some(pc) = tab.run(n)? {
        let mut ray = vec![0.0; n];
        ray[pc] = 1.0;
        for r in 0..m {
            let j = tab.basis[r];
            if j < n {
                ray[j] = -tab.at(r, pc);
            }
        }
        return Ok(LpOutcome::Unbounded { ray });
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        let j = tab.basis[r];
        if j < n {
            x[j] = tab.rhs[r].max(0.0);
        }
    }
    let y: Vec<f64> = (0..m).map(|i| -tab.cost[n + i] * row_factor[i]).collect();
    debug!("lp phase 2 done after {} pivots", tab.pivots);
    if !p.verify_optimal(&x, &y) {
        return Err(Error::Numerical(format!(
            "optimal basis fails verification (primal residual {:.3e})",
            p.primal_residual(&x)
        )));
    }
    let value = dot(&p.c, &x);
    Ok(LpOutcome::Optimal { x, y, value })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

/// Solution of a [`LinearProgram`] expressed in its own variables and rows.
#[derive(Clone, Debug)]
pub enum LinearOutcome {
    /// Duals follow the usual sign pattern for a minimization: free on
    /// equality rows, `<= 0` on `Le` rows, `>= 0` on `Ge` rows.
    Optimal { x: Vec<f64>, y: Vec<f64>, value: f64 },
    /// Row multipliers `y` with the `Le`/`Ge` sign pattern above such that
    /// `sum_i y_i a_i` vanishes on free variables, is `<= 0` on nonnegative
    /// ones, and `sum_i y_i b_i > 0`.
    Infeasible { farkas: Vec<f64> },
    Unbounded,
}

/// Sparse row `sum coeff * x[var] (cmp) rhs`.
type Row = (Vec<(usize, f64)>, Cmp, f64);

/// Builder for small LPs with free variables and inequality rows, lowered
/// to standard form for [`lp_solve`].
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    cost: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64, free: bool) -> usize {
        self.cost.push(cost);
        self.free.push(free);
        self.cost.len() - 1
    }

    pub fn add_vars(&mut self, count: usize, cost: f64, free: bool) -> Vec<usize> {
        (0..count).map(|_| self.add_var(cost, free)).collect()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> usize {
        self.rows.push((coeffs, cmp, rhs));
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Minimizes the objective.
    pub fn minimize(&self) -> Result<LinearOutcome> {
        let n = self.cost.len();
        let mut col_of = Vec::with_capacity(n);
        let mut c = Vec::new();
        for (j, &free) in self.free.iter().enumerate() {
            col_of.push(c.len());
            c.push(self.cost[j]);
            if free {
                c.push(-self.cost[j]);
            }
        }
        let slack_start = c.len();
        let mut slack_of = Vec::new();
        for (_, cmp, _) in &self.rows {
            if *cmp == Cmp::Eq {
                slack_of.push(None);
            } else {
                slack_of.push(Some(c.len()));
                c.push(0.0);
            }
        }
        let total = c.len();
        let mut a = vec![vec![0.0; total]; self.rows.len()];
        let mut b = Vec::with_capacity(self.rows.len());
        for (i, (coeffs, cmp, rhs)) in self.rows.iter().enumerate() {
            for &(j, v) in coeffs {
                a[i][col_of[j]] += v;
                if self.free[j] {
                    a[i][col_of[j] + 1] -= v;
                }
            }
            if let Some(s) = slack_of[i] {
                a[i][s] = if *cmp == Cmp::Le { 1.0 } else { -1.0 };
            }
            b.push(*rhs);
        }
        debug_assert!(slack_start <= total);
        let p = LpProblem::new(c, a, b)?;
        Ok(match lp_solve(&p)? {
            LpOutcome::Optimal { x, y, value } => {
                let xs = (0..n)
                    .map(|j| {
                        let k = col_of[j];
                        if self.free[j] {
                            x[k] - x[k + 1]
                        } else {
                            x[k]
                        }
                    })
                    .collect();
                LinearOutcome::Optimal { x: xs, y, value }
            }
            LpOutcome::Infeasible { farkas } => LinearOutcome::Infeasible { farkas },
            LpOutcome::Unbounded { .. } => LinearOutcome::Unbounded,
        })
    }

    /// Maximizes the objective; the reported value and duals refer to the
    /// maximization.
    pub fn maximize(&self) -> Result<LinearOutcome> {
        let mut neg = self.clone();
        for c in &mut neg.cost {
            *c = -*c;
        }
        Ok(match neg.minimize()? {
            LinearOutcome::Optimal { x, y, value } => LinearOutcome::Optimal {
                x,
                y: y.iter().map(|v| -v).collect(),
                value: -value,
            },
            other => other,
        })
    }

    /// Row activities `sum_j a_ij x_j`.
    pub fn row_values(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(coeffs, _, _)| coeffs.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_equality() {
        let p = LpProblem::new(vec![1.0], vec![vec![1.0]], vec![1.0]).unwrap();
        match lp_solve(&p).unwrap() {
            LpOutcome::Optimal { x, value, .. } => {
                assert!((x[0] - 1.0).abs() < 1e-12);
                assert!((value - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hand_infeasible_system() {
        // x1 + x2 = 1, x1 - x2 = 3 forces x2 = -1.
        let p = LpProblem::new(
            vec![0.0, 0.0],
            vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            vec![1.0, 3.0],
        )
        .unwrap();
        match lp_solve(&p).unwrap() {
            LpOutcome::Infeasible { farkas } => assert!(p.verify_farkas(&farkas)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbounded_ray() {
        // min -x1 s.t. x1 - x2 = 0.
        let p = LpProblem::new(vec![-1.0, 0.0], vec![vec![1.0, -1.0]], vec![0.0]).unwrap();
        match lp_solve(&p).unwrap() {
            LpOutcome::Unbounded { ray } => {
                assert!(p.primal_residual(&ray) < 1e-12 || (ray[0] - ray[1]).abs() < 1e-12);
                assert!(dot(&p.c, &ray) < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let p = LpProblem::new(
            vec![1.0, 2.0],
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
        )
        .unwrap();
        match lp_solve(&p).unwrap() {
            LpOutcome::Optimal { x, y, value } => {
                assert!((value - 1.0).abs() < 1e-12);
                assert!(p.verify_optimal(&x, &y));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn builder_free_and_inequalities() {
        // max x + y s.t. x - y <= 1, x + 2y <= 4, y free -> x = 2, y = 1.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, false);
        let y = lp.add_var(1.0, true);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Cmp::Le, 1.0);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], Cmp::Le, 4.0);
        match lp.maximize().unwrap() {
            LinearOutcome::Optimal { x: sol, value, .. } => {
                assert!((value - 3.0).abs() < 1e-10);
                assert!((sol[0] - 2.0).abs() < 1e-10);
                assert!((sol[1] - 1.0).abs() < 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn permutations(m: usize) -> Vec<Vec<usize>> {
        if m == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(m - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, m - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn birkhoff_vertex_matches_assignment_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for m in 2..=5 {
            let cmat: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut lp = LinearProgram::new();
            let vars: Vec<usize> = (0..m * m).map(|k| lp.add_var(cmat[k / m][k % m], false)).collect();
            for i in 0..m {
                lp.add_row((0..m).map(|j| (vars[i * m + j], 1.0)).collect(), Cmp::Eq, 1.0);
                lp.add_row((0..m).map(|j| (vars[j * m + i], 1.0)).collect(), Cmp::Eq, 1.0);
            }
            let best = permutations(m)
                .iter()
                .map(|p| (0..m).map(|i| cmat[i][p[i]]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            match lp.maximize().unwrap() {
                LinearOutcome::Optimal { value, .. } => assert!((value - best).abs() < 1e-9),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
