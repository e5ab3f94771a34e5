//! The L1 seminorm of a quantum random variable, its certificates and the
//! bracket and multiplier operations built on it.
//!
//! Writing `R = Re f`, `J = Im f` and `E_x = nu(x)`, every decomposition
//! `f = f1 - f2 + i(f3 - f4)` into positive parts has `a = f1 + f2 >= +-R`
//! and `b = f3 + f4 >= +-J`, and conversely any such `a, b` give one with
//! `f1 = (a + R)/2`, `f2 = (a - R)/2`, `f3 = (b + J)/2`, `f4 = (b - J)/2`.
//! The seminorm is therefore
//!
//! ```text
//! min lambda_max( sum_x E_x^{1/2} (a_x + b_x) E_x^{1/2} )  over a_x >= +-R_x, b_x >= +-J_x
//! ```
//!
//! For any density `Z` the value is at least
//! `sum_x ||Z^{1/2} E_x^{1/2} R_x E_x^{1/2} Z^{1/2}||_tr + (same with J_x)`,
//! which gives a lower bound that can be checked without the solver.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_basis, operator_norm, pd_inverse, positive_parts, psd_sqrt, trace_pairing, ComplexOperator,
    HermitianOperator, State, C64, PSD_TOL,
};
use crate::measure::{ClassicalFunction, FiniteMeasureSpace};
use crate::povm::{integrate, scalarize, Povm, QuantumRandomVariable, RnDerivative};
use crate::solver::{sdp_solve, LmiBlock, SdpOptions, SdpProblem};

/// Default relative gap for seminorm certificates.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Eigenvalues of an effect below this fraction of its norm count as zero.
const RANK_TOL: f64 = 1e-12;

/// Smallest range slack `a' -+ R11` kept before completing on the kernel of
/// a singular effect; about the square root of machine precision.
const KERNEL_MARGIN: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct L1Certificate {
    pub value: f64,
    pub dual_lower_bound: f64,
    pub gap: f64,
    pub tol: f64,
    pub converged: bool,
    /// `f1, f2, f3, f4`, all positive, with `f = f1 - f2 + i(f3 - f4)`.
    pub decomposition: Vec<QuantumRandomVariable>,
    /// Density whose pairing bound gives `dual_lower_bound`.
    pub dual_state: HermitianOperator,
}

/// Result of re-checking an [`L1Certificate`] from its data alone.
#[derive(Clone, Debug, Serialize)]
pub struct L1Check {
    pub reconstruction_residual: f64,
    pub min_part_eigenvalue: f64,
    pub recomputed_value: f64,
    pub recomputed_lower_bound: f64,
    pub valid: bool,
}

impl L1Certificate {
    pub fn verify(&self, f: &QuantumRandomVariable, nu: &Povm) -> Result<L1Check> {
        f.check_povm(nu)?;
        if self.decomposition.len() != 4 {
            return Err(Error::InvalidInput("decomposition must have four parts".into()));
        }
        let [f1, f2, f3, f4] = [0, 1, 2, 3].map(|k| &self.decomposition[k]);
        for p in &self.decomposition {
            p.check_povm(nu)?;
        }
        let i = C64::new(0.0, 1.0);
        let rebuilt = f1.sub(f2).add(&f3.sub(f4).scale(i));
        let reconstruction_residual = rebuilt
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b).max_abs())
            .fold(0.0, f64::max);
        let mut min_rel = f64::INFINITY;
        let mut psd = true;
        for p in &self.decomposition {
            for v in p.values() {
                let h = v.hermitian_part();
                let e = h.eigen();
                let norm = e.values[0].abs().max(e.values.last().unwrap().abs());
                let lmin = *e.values.last().unwrap();
                min_rel = min_rel.min(lmin / (1.0 + norm));
                psd &= lmin >= -PSD_TOL * (1.0 + norm);
            }
        }
        let sum = f1.add(f2).add(f3).add(f4);
        let recomputed_value = operator_norm(&integrate(&sum, nu, None)?);
        let z = State::normalized(self.dual_state.clone())?;
        let recomputed_lower_bound = pairing_lower_bound(f, nu, &z)?;
        let scale = 1.0 + f.values().iter().map(|v| v.max_abs()).fold(0.0, f64::max);
        let valid = reconstruction_residual <= 1e-8 * scale
            && psd
            && (recomputed_value - self.value).abs() <= 1e-9 * (1.0 + self.value)
            && recomputed_lower_bound <= recomputed_value + 1e-9 * (1.0 + recomputed_value)
            && (recomputed_lower_bound - self.dual_lower_bound).abs() <= 1e-9 * (1.0 + self.value);
        Ok(L1Check {
            reconstruction_residual,
            min_part_eigenvalue: min_rel,
            recomputed_value,
            recomputed_lower_bound,
            valid,
        })
    }
}

/// `E_x^{1/2}` for every atom.
fn effect_roots(nu: &Povm) -> Result<Vec<HermitianOperator>> {
    nu.effects().iter().map(|e| psd_sqrt(e, PSD_TOL)).collect()
}

/// `sum_x ||Z^{1/2} E^{1/2} R E^{1/2} Z^{1/2}||_tr + (J)`, a lower bound on
/// the seminorm for every density `Z`.
pub fn pairing_lower_bound(f: &QuantumRandomVariable, nu: &Povm, z: &State) -> Result<f64> {
    f.check_povm(nu)?;
    let zr = psd_sqrt(z.operator(), PSD_TOL)?;
    let roots = effect_roots(nu)?;
    let mut acc = 0.0;
    for x in 0..f.len() {
        if !nu.is_active(x) {
            continue;
        }
        let k = zr.as_operator().matmul(roots[x].as_operator());
        let v = f.value(x);
        for part in [v.hermitian_part(), v.imaginary_part()] {
            acc += part.congruence(&k).trace_norm();
        }
    }
    Ok(acc)
}

fn top_projector(h: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::outer(&h.eigen().vector(0))
}

fn max_scale(h: &HermitianOperator) -> f64 {
    h.as_operator().max_abs()
}

/// Eigen-basis of an effect split into range and kernel.
struct RangeBasis {
    /// Unitary whose first `rank` columns span the range of `E_x`.
    v: ComplexOperator,
    rank: usize,
    /// Square roots of the nonzero eigenvalues, padded with zeros.
    root_eigs: Vec<f64>,
}

impl RangeBasis {
    fn new(e: &HermitianOperator) -> Self {
        let eig = e.eigen();
        let top = eig.values[0].max(0.0);
        let rank = eig.values.iter().filter(|&&l| l > RANK_TOL * top).count();
        let root_eigs = eig
            .values
            .iter()
            .enumerate()
            .map(|(i, &l)| if i < rank { l.max(0.0).sqrt() } else { 0.0 })
            .collect();
        Self {
            v: eig.vectors,
            rank,
            root_eigs,
        }
    }

    fn dim(&self) -> usize {
        self.v.dim()
    }

    /// `V* h V`.
    fn rotate(&self, h: &HermitianOperator) -> HermitianOperator {
        h.congruence(&self.v.adjoint())
    }

    /// Top-left `rank x rank` block of a rotated operator.
    fn compress(&self, rotated: &HermitianOperator) -> HermitianOperator {
        let r = self.rank;
        HermitianOperator::new(ComplexOperator::from_fn(r, |i, j| rotated.as_operator()[(i, j)]))
            .expect("principal block of a Hermitian matrix")
    }

    /// Embeds an `r x r` block into the top-left corner of a `d x d` zero matrix.
    fn embed(&self, block: &HermitianOperator) -> HermitianOperator {
        let r = self.rank;
        let m = ComplexOperator::from_fn(self.dim(), |i, j| {
            if i < r && j < r {
                block.as_operator()[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        HermitianOperator::new(m).expect("embedded Hermitian block")
    }

    /// `E^{1/2} V embed(block) V* E^{1/2}` written in the original basis.
    fn push_forward(&self, block: &HermitianOperator) -> HermitianOperator {
        let w = ComplexOperator::from_fn(self.dim(), |i, j| self.v[(i, j)] * self.root_eigs[j]);
        self.embed(block).congruence(&w)
    }
}

/// Chooses the kernel block `c I` so that `V [[a', 0], [0, cI]] V* >= +-R`,
/// given `a' > +-R11` strictly. Returns the full operator.
fn complete_on_kernel(basis: &RangeBasis, a_range: &HermitianOperator, part: &HermitianOperator) -> Result<HermitianOperator> {
    let d = basis.dim();
    let r = basis.rank;
    let rotated = basis.rotate(part);
    if r == d {
        return Ok(a_range.congruence(&basis.v));
    }
    let r11 = basis.compress(&rotated);
    // The kernel block grows like |R12|^2 / slack, and the parts carry it
    // in floating point, so reconstruction loses about eps * c. Keep the
    // range slack at least KERNEL_MARGIN, which balances that loss against
    // the value it costs.
    let coupling = (0..r)
        .flat_map(|i| (r..d).map(move |j| (i, j)))
        .map(|(i, j)| rotated.as_operator()[(i, j)].norm())
        .fold(0.0, f64::max);
    let mut a_range = a_range.clone();
    if coupling > 0.0 {
        let want = KERNEL_MARGIN * (1.0 + r11.norm());
        let slack = [1.0, -1.0]
            .iter()
            .map(|&sign| a_range.sub(&r11.scale(sign)).lambda_min())
            .fold(f64::INFINITY, f64::min);
        if slack < want {
            a_range = a_range.add_scaled_identity(want - slack);
        }
    }
    let a_range = &a_range;
    let mut c: f64 = 0.0;
    for sign in [1.0, -1.0] {
        // a - sign R >= 0  iff  cI >= sign R22 + R21 (a' - sign R11)^{-1} R12.
        let m = a_range.sub(&r11.scale(sign));
        let minv = pd_inverse(&m).ok_or_else(|| {
            Error::Numerical("range block of the decomposition is not strictly feasible".into())
        })?;
        let schur = basis.embed(&minv).congruence(rotated.as_operator());
        let lower = ComplexOperator::from_fn(d - r, |i, j| {
            rotated.as_operator()[(r + i, r + j)] * sign + schur.as_operator()[(r + i, r + j)]
        });
        let lower = lower.hermitian_part();
        c = c.max(lower.lambda_max());
    }
    let c = c * (1.0 + 1e-9) + 1e-12 * (1.0 + max_scale(part));
    let full = ComplexOperator::from_fn(d, |i, j| {
        if i < r && j < r {
            a_range.as_operator()[(i, j)]
        } else if i == j && i >= r {
            C64::new(c, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(HermitianOperator::new(full)?.congruence(&basis.v))
}

fn is_semidefinite(h: &HermitianOperator) -> bool {
    let e = h.eigen();
    let norm = e.values[0].abs().max(e.values.last().unwrap().abs());
    *e.values.last().unwrap() >= -1e-13 * norm || e.values[0] <= 1e-13 * norm
}

/// One dominating variable `a >= +-P` restricted to the range of an effect.
enum Dominator {
    /// `|P'|` plus a small margin; optimal when `P'` is semidefinite.
    Fixed(HermitianOperator),
    /// Free Hermitian `r x r` block; its coordinates start at `offset`.
    Free { offset: usize, start: HermitianOperator },
}

struct Slot {
    atom: usize,
    /// 0 for the real part, 1 for the imaginary part.
    kind: usize,
    part: HermitianOperator,
    compressed: HermitianOperator,
    dominator: Dominator,
}

/// Computes the seminorm with a certificate, returning
/// [`Error::SolverStall`] if the gap target is missed.
pub fn l1_seminorm(f: &QuantumRandomVariable, nu: &Povm, tol: f64) -> Result<L1Certificate> {
    let cert = l1_certificate(f, nu, tol)?;
    if !cert.converged {
        return Err(Error::SolverStall { gap: cert.gap, tol });
    }
    Ok(cert)
}

/// Computes the seminorm with a certificate; the certificate carries an
/// honest gap even when the target `tol` was not reached.
pub fn l1_certificate(f: &QuantumRandomVariable, nu: &Povm, tol: f64) -> Result<L1Certificate> {
    f.check_povm(nu)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let d = f.dim();
    let m = f.len();
    let roots = effect_roots(nu)?;
    let parts: Vec<[HermitianOperator; 2]> =
        f.values().iter().map(|v| [v.hermitian_part(), v.imaginary_part()]).collect();

    // Upper bound from a = |R|, b = |J|; used to scale the problem.
    let mut upper = HermitianOperator::zeros(d);
    for x in 0..m {
        if nu.is_active(x) {
            for p in &parts[x] {
                upper = upper.add(&positive_parts(p).abs.congruence(roots[x].as_operator()));
            }
        }
    }
    let scale = upper.lambda_max();
    if scale <= 0.0 {
        return Ok(finish_trivial(f, nu, &parts));
    }
    let inv = 1.0 / scale;
    let margin_budget = 0.05 * tol / (2 * m) as f64;

    let mut bases: Vec<Option<RangeBasis>> = Vec::with_capacity(m);
    let mut slots: Vec<Slot> = Vec::new();
    let mut n_vars = 1;
    for x in 0..m {
        if !nu.is_active(x) {
            bases.push(None);
            continue;
        }
        let basis = RangeBasis::new(nu.effect(x));
        let emax = nu.effect(x).lambda_max();
        for (kind, p) in parts[x].iter().enumerate() {
            let scaled = p.scale(inv);
            if scaled.as_operator().max_abs() == 0.0 {
                continue;
            }
            let compressed = basis.compress(&basis.rotate(&scaled));
            let singular = basis.rank < d;
            let dominator = if is_semidefinite(&compressed) {
                let mut fixed = positive_parts(&compressed).abs;
                if singular {
                    fixed = fixed.add_scaled_identity(margin_budget / emax);
                }
                Dominator::Fixed(fixed)
            } else {
                let r = basis.rank;
                let delta = 0.1 * compressed.norm().max(1e-6);
                let start = positive_parts(&compressed).abs.add_scaled_identity(delta);
                let offset = n_vars;
                n_vars += r * r;
                Dominator::Free { offset, start }
            };
            slots.push(Slot {
                atom: x,
                kind,
                part: scaled,
                compressed,
                dominator,
            });
        }
        bases.push(Some(basis));
    }

    let mut a_range: Vec<HermitianOperator> = slots
        .iter()
        .map(|s| match &s.dominator {
            Dominator::Fixed(h) => h.clone(),
            Dominator::Free { start, .. } => start.clone(),
        })
        .collect();
    let mut sdp_dual: Option<HermitianOperator> = None;
    let mut sdp_converged = true;

    if n_vars > 1 {
        let mut problem = SdpProblem::new(n_vars);
        problem.objective[0] = 1.0;
        let mut main_const = HermitianOperator::zeros(d);
        let mut main = Vec::new();
        let mut y0 = vec![0.0; n_vars];
        for (slot, start) in slots.iter().zip(&a_range) {
            let basis = bases[slot.atom].as_ref().expect("active atom");
            match &slot.dominator {
                Dominator::Fixed(h) => {
                    main_const = main_const.sub(&basis.push_forward(h));
                }
                Dominator::Free { offset, .. } => {
                    let r = basis.rank;
                    let rb = hermitian_basis(r);
                    let coords = crate::linalg::hermitian_coords(start);
                    let mut lo = LmiBlock::new(slot.compressed.scale(-1.0));
                    let mut hi = LmiBlock::new(slot.compressed.clone());
                    for (k, bk) in rb.iter().enumerate() {
                        lo.push(offset + k, bk.clone());
                        hi.push(offset + k, bk.clone());
                        main.push((offset + k, basis.push_forward(bk).scale(-1.0)));
                        y0[offset + k] = coords[k];
                    }
                    problem.blocks.push(lo);
                    problem.blocks.push(hi);
                }
            }
        }
        let mut main_block = LmiBlock::new(main_const);
        main_block.push(0, HermitianOperator::identity(d));
        for (i, h) in main {
            main_block.push(i, h);
        }
        // At t = 0 the block is minus the objective matrix; start above its top eigenvalue.
        y0[0] = 1.0 - main_block.evaluate(&y0).lambda_min();
        problem.blocks.insert(0, main_block);
        let opts = SdpOptions {
            tol: 0.25 * tol,
            ..SdpOptions::default()
        };
        let sol = sdp_solve(&problem, &y0, opts)?;
        debug!(
            "seminorm sdp: {} vars, {} blocks, value {:.10}, gap {:.3e}, {} iterations",
            n_vars,
            problem.blocks.len(),
            sol.value,
            sol.gap,
            sol.iterations
        );
        sdp_converged = sol.converged;
        for (slot, a) in slots.iter().zip(a_range.iter_mut()) {
            if let Dominator::Free { offset, .. } = slot.dominator {
                let r = bases[slot.atom].as_ref().expect("active atom").rank;
                *a = crate::linalg::hermitian_from_coords(r, &sol.y[offset..offset + r * r]);
            }
        }
        sdp_dual = sol.dual.map(|z| z[0].clone());
    }

    // Assemble the decomposition in original units.
    let mut dom: Vec<[Option<HermitianOperator>; 2]> = vec![[None, None]; m];
    for (slot, a) in slots.iter().zip(&a_range) {
        let basis = bases[slot.atom].as_ref().expect("active atom");
        let full = complete_on_kernel(basis, a, &slot.part)?.scale(scale);
        dom[slot.atom][slot.kind] = Some(full);
    }
    let mut fk: [Vec<ComplexOperator>; 4] = Default::default();
    for x in 0..m {
        for (k, p) in parts[x].iter().enumerate() {
            let (pos, neg) = match &dom[x][k] {
                Some(a) => (a.add(p).scale(0.5), a.sub(p).scale(0.5)),
                None if p.as_operator().max_abs() == 0.0 => {
                    (HermitianOperator::zeros(d), HermitianOperator::zeros(d))
                }
                None => {
                    // Null atom: any positive decomposition will do.
                    let pp = positive_parts(p);
                    (pp.positive, pp.negative)
                }
            };
            fk[2 * k].push(pos.into_operator());
            fk[2 * k + 1].push(neg.into_operator());
        }
    }
    let decomposition: Vec<QuantumRandomVariable> = fk
        .into_iter()
        .map(QuantumRandomVariable::new)
        .collect::<Result<_>>()?;
    finish(f, nu, decomposition, sdp_dual, tol, sdp_converged)
}

fn finish_trivial(f: &QuantumRandomVariable, nu: &Povm, parts: &[[HermitianOperator; 2]]) -> L1Certificate {
    // Every active atom has f = 0; null atoms use Jordan parts.
    let d = f.dim();
    let mut fk: [Vec<ComplexOperator>; 4] = Default::default();
    for (x, ps) in parts.iter().enumerate() {
        for (k, p) in ps.iter().enumerate() {
            let (pos, neg) = if nu.is_active(x) {
                (ComplexOperator::zeros(d), ComplexOperator::zeros(d))
            } else {
                let pp = positive_parts(p);
                (pp.positive.into_operator(), pp.negative.into_operator())
            };
            fk[2 * k].push(pos);
            fk[2 * k + 1].push(neg);
        }
    }
    L1Certificate {
        value: 0.0,
        dual_lower_bound: 0.0,
        gap: 0.0,
        tol: 0.0,
        converged: true,
        decomposition: fk
            .into_iter()
            .map(|v| QuantumRandomVariable::new(v).expect("consistent dimensions"))
            .collect(),
        dual_state: HermitianOperator::identity(d).scale(1.0 / d as f64),
    }
}

fn finish(
    f: &QuantumRandomVariable,
    nu: &Povm,
    decomposition: Vec<QuantumRandomVariable>,
    sdp_dual: Option<HermitianOperator>,
    tol: f64,
    sdp_converged: bool,
) -> Result<L1Certificate> {
    let sum = decomposition[0]
        .add(&decomposition[1])
        .add(&decomposition[2])
        .add(&decomposition[3]);
    let total = integrate(&sum, nu, None)?.hermitian_part();
    let value = total.lambda_max();
    let mut candidates = vec![top_projector(&total)];
    if let Some(z) = sdp_dual {
        if z.trace() > 0.0 {
            candidates.push(z);
        }
    }
    let mut best = (f64::NEG_INFINITY, candidates[0].clone());
    for z in candidates {
        let Ok(state) = State::normalized(z.clone()) else {
            continue;
        };
        let lb = pairing_lower_bound(f, nu, &state)?;
        if lb > best.0 {
            best = (lb, state.operator().clone());
        }
    }
    let (dual_lower_bound, dual_state) = best;
    let gap = (value - dual_lower_bound).max(0.0);
    let converged = gap <= tol * value.max(1.0);
    if !converged {
        debug!("seminorm gap {gap:.3e} above tolerance (sdp converged: {sdp_converged})");
    }
    Ok(L1Certificate {
        value,
        dual_lower_bound,
        gap,
        tol,
        converged,
        decomposition,
        dual_state,
    })
}

/// `||int |f| dnu||` for self-adjoint `f`, an upper bound on the seminorm.
pub fn l1_upper_abs(f: &QuantumRandomVariable, nu: &Povm) -> Result<f64> {
    f.check_povm(nu)?;
    let abs = f.abs()?;
    Ok(operator_norm(&integrate(&abs, nu, None)?))
}

/// `max_s sum_x |f_s(x)| nu_rho(x)` over the supplied states, a lower bound
/// on the seminorm.
pub fn l1_lower_states(f: &QuantumRandomVariable, d: &RnDerivative, states: &[State]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for s in states {
        let fs = scalarize(f, d, s)?;
        let v: f64 = fs.values().iter().zip(d.induced()).map(|(z, m)| z.norm() * m).sum();
        best = best.max(v);
    }
    Ok(best)
}

/// `<f, g> = int f g dnu` for a scalar `g`.
pub fn bracket(f: &QuantumRandomVariable, g: &ClassicalFunction, nu: &Povm) -> Result<ComplexOperator> {
    integrate(&mult_scalar(f, g)?, nu, None)
}

/// Pointwise product `f g` with a scalar function.
pub fn mult_scalar(f: &QuantumRandomVariable, g: &ClassicalFunction) -> Result<QuantumRandomVariable> {
    f.mul_scalar(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Pointwise `A f` or `f A`.
pub fn mult_operator(a: &ComplexOperator, f: &QuantumRandomVariable, side: Side) -> Result<QuantumRandomVariable> {
    match side {
        Side::Left => f.left_mul(a),
        Side::Right => f.right_mul(a),
    }
}

/// Pointwise `D^{-1/2} A D^{1/2} f` (left) or `f D^{1/2} A D^{-1/2}` (right);
/// requires every active `D(x)` to be invertible.
pub fn mult_operator_conjugated(
    a: &ComplexOperator,
    f: &QuantumRandomVariable,
    d: &RnDerivative,
    side: Side,
) -> Result<QuantumRandomVariable> {
    a.check_dim(f.dim())?;
    f.check_atoms(d.len())?;
    let mut out = Vec::with_capacity(f.len());
    for x in 0..f.len() {
        if !d.is_active(x) {
            out.push(f.value(x).clone());
            continue;
        }
        let root = d.sqrt_density(x);
        let root_inv = pd_inverse(root).ok_or_else(|| {
            Error::InvalidInput(format!("derivative at atom {x} is not invertible"))
        })?;
        let v = match side {
            Side::Left => root_inv
                .as_operator()
                .matmul(a)
                .matmul(root.as_operator())
                .matmul(f.value(x)),
            Side::Right => f
                .value(x)
                .matmul(root.as_operator())
                .matmul(a)
                .matmul(root_inv.as_operator()),
        };
        out.push(v);
    }
    QuantumRandomVariable::new(out)
}

/// `D^{1/2} f D^{1/2}` together with the scalar POVM `nu_rho I`; the
/// seminorms agree when every `D(x)` is invertible.
pub fn conjugate_to_scalar(f: &QuantumRandomVariable, d: &RnDerivative) -> Result<(QuantumRandomVariable, Povm)> {
    f.check_atoms(d.len())?;
    let mut values = Vec::with_capacity(f.len());
    for x in 0..f.len() {
        let r = d.sqrt_density(x).as_operator();
        values.push(r.matmul(f.value(x)).matmul(r));
    }
    let space = FiniteMeasureSpace::from_masses(d.induced().to_vec())?;
    Ok((QuantumRandomVariable::new(values)?, Povm::scalar(space, f.dim())))
}

/// Outcome of [`detect_positive`].
#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub positive: bool,
    /// Atom `x` and vector `v` with `<v, <f, chi_x> v>` outside `[0, inf)`.
    pub witness: Option<(usize, Vec<[f64; 2]>)>,
}

/// Whether `f(x) >= 0` on every atom of positive mass; otherwise a witness
/// `g = chi_x` whose bracket is not positive, when one exists.
pub fn detect_positive(f: &QuantumRandomVariable, nu: &Povm) -> Result<PositivityReport> {
    f.check_povm(nu)?;
    let roots = effect_roots(nu)?;
    let mut positive = true;
    for x in 0..f.len() {
        if !nu.is_active(x) {
            continue;
        }
        let v = f.value(x);
        let atom_positive = match HermitianOperator::new(v.clone()) {
            Ok(h) => crate::linalg::is_psd(&h, PSD_TOL),
            Err(_) => false,
        };
        if atom_positive {
            continue;
        }
        positive = false;
        let b = roots[x].as_operator().matmul(v).matmul(roots[x].as_operator());
        let re = b.hermitian_part();
        let im = b.imaginary_part();
        let scale = 1.0 + b.max_abs();
        let e = re.eigen();
        let lmin = *e.values.last().unwrap();
        let vec = if lmin < -PSD_TOL * scale {
            Some(e.vector(e.values.len() - 1))
        } else if im.norm() > PSD_TOL * scale {
            let ie = im.eigen();
            let k = if ie.values[0].abs() >= ie.values.last().unwrap().abs() {
                0
            } else {
                ie.values.len() - 1
            };
            Some(ie.vector(k))
        } else {
            None
        };
        if let Some(w) = vec {
            return Ok(PositivityReport {
                positive,
                witness: Some((x, w.iter().map(|z| [z.re, z.im]).collect())),
            });
        }
    }
    Ok(PositivityReport {
        positive,
        witness: None,
    })
}

/// A state `s` and atom `x` with `tr(s <f, chi_x>) != 0`, if `f` is not
/// null. Tries the states `e_i`, `(e_i + e_j)/sqrt 2`, `(e_i + i e_j)/sqrt 2`,
/// whose pairings determine a matrix.
pub fn bracket_separation(f: &QuantumRandomVariable, nu: &Povm) -> Result<Option<(usize, State, C64)>> {
    f.check_povm(nu)?;
    let d = f.dim();
    let roots = effect_roots(nu)?;
    let mut probes = Vec::new();
    for i in 0..d {
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[i] = C64::new(1.0, 0.0);
        probes.push(v);
        for j in (i + 1)..d {
            for phase in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[i] = C64::new(1.0, 0.0);
                v[j] = phase;
                probes.push(v);
            }
        }
    }
    let mut best: Option<(usize, State, C64)> = None;
    for x in 0..f.len() {
        if !nu.is_active(x) {
            continue;
        }
        let b = roots[x].as_operator().matmul(f.value(x)).matmul(roots[x].as_operator());
        for p in &probes {
            let s = State::pure(p)?;
            let z = trace_pairing(s.operator(), &b)?;
            if best.as_ref().is_none_or(|(_, _, bz)| z.norm() > bz.norm()) {
                best = Some((x, s, z));
            }
        }
    }
    Ok(best.filter(|(_, _, z)| z.norm() > 1e-12))
}
