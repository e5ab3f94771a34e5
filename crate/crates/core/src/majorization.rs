//! Bistochastic operators acting entrywise on operator-valued functions over
//! `nu = mu I`, and the three majorization orders between self-adjoint
//! quantum random variables:
//!
//! * `f < g`: some bistochastic `B` has `Bg = f`;
//! * `f <_T g`: `f_t < g_t` for every self-adjoint `t`, where `f_t(x) = tr(t f(x))`;
//! * `f <_S g`: `f_s < g_s` for every state `s`.
//!
//! With equal atom masses the partial sums of a decreasing rearrangement are
//! maxima over `k`-subsets, so `f <_T g` says every subset sum `F_S` lies in
//! the convex hull of the `G_T`, and `f <_S g` says `F_S` lies in that hull
//! minus the positive cone.

use itertools::Itertools;
use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_coords, hermitian_from_coords, trace_pairing, HermitianOperator, State};
use crate::measure::{
    majorization_excess, majorizes_values, transport_witness, BistochasticMatrix, FarkasCertificate,
    FiniteMeasureSpace, WitnessOutcome,
};
use crate::povm::QuantumRandomVariable;
use crate::random::{gaussian_hermitian, ginibre_state, haar_pure_state, seeded};
use crate::solver::{sdp_solve, Cmp, LinearOutcome, LinearProgram, LmiBlock, SdpOptions, SdpProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    B,
    T,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Undecided,
}

#[derive(Clone, Debug)]
pub struct MajorizationOptions {
    pub seed: u64,
    /// Random states tried by the refuter for `<_S`.
    pub state_samples: usize,
    /// Random directions tried when masses are not uniform.
    pub direction_samples: usize,
    /// Largest number of atoms for which subsets are enumerated.
    pub max_atoms: usize,
    /// Slack allowed in the positive-cone containment for `<_S`.
    pub tol: f64,
}

impl Default for MajorizationOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            state_samples: 10_000,
            direction_samples: 10_000,
            max_atoms: 12,
            tol: 1e-7,
        }
    }
}

/// `F_S` written as `sum_T lambda_T G_T` (order T) or dominated by it (order S).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContainmentEntry {
    pub subset: Vec<usize>,
    pub weights: Vec<(Vec<usize>, f64)>,
    /// Largest entry of `sum lambda G - F` for order T, the negative part of
    /// its smallest eigenvalue for order S.
    pub residual: f64,
}

/// `phi(h) = sum_x mu(x) Re tr(W(x) h(x))` with `phi(f) > sup_B phi(Bg)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparatingFunctional {
    pub w: Vec<HermitianOperator>,
    pub phi_f: f64,
    pub psi_g: f64,
    pub margin: f64,
}

impl SeparatingFunctional {
    /// Recomputes both sides, the right one by a fresh LP over the polytope.
    pub fn verify(&self, f: &QuantumRandomVariable, g: &QuantumRandomVariable, space: &FiniteMeasureSpace) -> Result<bool> {
        let phi_f = phi(&self.w, f, space)?;
        let psi_g = psi_phi(&self.w, g, space)?;
        let margin = phi_f - psi_g;
        let scale = 1.0 + (self.phi_f.abs()).max(self.psi_g.abs());
        Ok(margin > 1e-8 && (margin - self.margin).abs() <= 1e-8 * scale)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Bistochastic { matrix: Vec<Vec<f64>>, residual: f64 },
    Farkas {
        certificate: FarkasCertificate,
        separation: Option<SeparatingFunctional>,
    },
    /// A self-adjoint direction (order T) or a state (order S) whose
    /// scalarizations are not classically majorized.
    Refutation { direction: HermitianOperator, margin: f64 },
    Containment { entries: Vec<ContainmentEntry> },
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerReport {
    pub samples: usize,
    pub refuted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MajorizationCertificate {
    pub order: Order,
    pub verdict: Verdict,
    pub witness: Witness,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MajorizationCertificate {
    fn new(order: Order, verdict: Verdict, witness: Witness, tol: f64) -> Self {
        Self {
            order,
            verdict,
            witness,
            tol,
            sampler: None,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Re-checks the witness against the inputs without trusting any solver
    /// output beyond the numbers stored here.
    pub fn verify(&self, f: &QuantumRandomVariable, g: &QuantumRandomVariable, space: &FiniteMeasureSpace) -> Result<bool> {
        let (fh, gh) = hermitian_inputs(f, g, space)?;
        let scale = data_scale(&fh, &gh);
        Ok(match (&self.witness, self.verdict) {
            (Witness::Bistochastic { matrix, .. }, Verdict::Holds) => {
                let b = BistochasticMatrix::new(space.clone(), matrix.clone())?;
                let bg = apply_bistochastic(&b, g)?;
                max_deviation(&bg, f) <= 1e-8 * scale
            }
            (Witness::Farkas { certificate, separation }, Verdict::Fails) => {
                let ok = certificate.verify(space.masses(), &coords(&fh), &coords(&gh));
                let sep_ok = match separation {
                    Some(sep) => sep.verify(f, g, space)?,
                    None => true,
                };
                ok && sep_ok
            }
            (Witness::Refutation { direction, .. }, Verdict::Fails | Verdict::Undecided) => {
                if self.order == Order::S && State::new(direction.clone()).is_err() {
                    return Ok(false);
                }
                refutes(&fh, &gh, space.masses(), direction)
            }
            (Witness::Containment { entries }, Verdict::Holds) => {
                self.order != Order::B && verify_containment(self.order, &fh, &gh, space, entries, self.tol)?
            }
            (Witness::None, Verdict::Undecided) => true,
            _ => false,
        })
    }
}

fn verify_containment(
    order: Order,
    fh: &[HermitianOperator],
    gh: &[HermitianOperator],
    space: &FiniteMeasureSpace,
    entries: &[ContainmentEntry],
    tol: f64,
) -> Result<bool> {
    let m = fh.len();
    if !space.is_uniform() {
        return Ok(false);
    }
    let scale = data_scale(fh, gh);
    if total(fh).sub(&total(gh)).as_operator().max_abs() > 1e-9 * scale * m as f64 {
        return Ok(false);
    }
    let mut seen = std::collections::BTreeSet::new();
    for e in entries {
        let k = e.subset.len();
        let valid_subset = |s: &[usize]| s.len() == k && s.iter().all(|&x| x < m) && s.iter().tuple_windows().all(|(a, b)| a < b);
        if !valid_subset(&e.subset) || e.weights.iter().any(|(t, w)| !valid_subset(t) || *w < -1e-12) {
            return Ok(false);
        }
        let wsum: f64 = e.weights.iter().map(|(_, w)| w).sum();
        if (wsum - 1.0).abs() > 1e-9 {
            return Ok(false);
        }
        let mut p = subset_sum(fh, &e.subset).scale(-1.0);
        for (t, w) in &e.weights {
            p = p.add(&subset_sum(gh, t).scale(*w));
        }
        let ok = match order {
            Order::T => p.as_operator().max_abs() <= 1e-8 * scale,
            _ => p.lambda_min() >= -tol * scale,
        };
        if !ok {
            return Ok(false);
        }
        seen.insert(e.subset.clone());
    }
    let expected: usize = (1..m).map(|k| (0..m).combinations(k).count()).sum();
    Ok(seen.len() == expected)
}

fn hermitian_inputs(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
) -> Result<(Vec<HermitianOperator>, Vec<HermitianOperator>)> {
    if f.len() != space.len() || g.len() != space.len() {
        return Err(Error::SpaceMismatch);
    }
    if f.dim() != g.dim() {
        return Err(Error::DimMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    Ok((f.hermitian_values()?, g.hermitian_values()?))
}

fn data_scale(fh: &[HermitianOperator], gh: &[HermitianOperator]) -> f64 {
    1.0 + fh.iter().chain(gh).map(|h| h.as_operator().max_abs()).fold(0.0, f64::max)
}

fn coords(h: &[HermitianOperator]) -> Vec<Vec<f64>> {
    h.iter().map(hermitian_coords).collect()
}

fn total(h: &[HermitianOperator]) -> HermitianOperator {
    h.iter().fold(HermitianOperator::zeros(h[0].dim()), |acc, v| acc.add(v))
}

fn subset_sum(h: &[HermitianOperator], subset: &[usize]) -> HermitianOperator {
    subset
        .iter()
        .fold(HermitianOperator::zeros(h[0].dim()), |acc, &x| acc.add(&h[x]))
}

fn max_deviation(a: &QuantumRandomVariable, b: &QuantumRandomVariable) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).max_abs())
        .fold(0.0, f64::max)
}

/// `x -> tr(t h(x))`.
pub fn scalarize_direction(h: &[HermitianOperator], t: &HermitianOperator) -> Vec<f64> {
    h.iter().map(|v| t.inner(v)).collect()
}

/// Whether `t` refutes `f_t < g_t` classically.
fn refutes(fh: &[HermitianOperator], gh: &[HermitianOperator], masses: &[f64], t: &HermitianOperator) -> bool {
    !majorizes_values(
        &scalarize_direction(fh, t),
        masses,
        &scalarize_direction(gh, t),
        masses,
    )
}

/// Largest violation of the classical test along `t`: the excess of the
/// partial sums or the gap of the totals. Masses are taken as one when
/// they are uniform, so the margin is a gap between subset sums.
fn refutation_margin(fh: &[HermitianOperator], gh: &[HermitianOperator], space: &FiniteMeasureSpace, t: &HermitianOperator) -> f64 {
    let unit;
    let masses = if space.is_uniform() {
        unit = vec![1.0; space.len()];
        &unit[..]
    } else {
        space.masses()
    };
    let (excess, gap) = majorization_excess(
        &scalarize_direction(fh, t),
        masses,
        &scalarize_direction(gh, t),
        masses,
    );
    excess.max(gap)
}

/// Frobenius normalization with the first nonzero diagonal entry made
/// nonnegative. Negating `t` keeps a refutation when totals agree.
fn normalize_direction(t: &HermitianOperator) -> HermitianOperator {
    let n = t.as_operator().frobenius_norm();
    let t = t.scale(1.0 / n);
    let d = t.dim();
    let sign = (0..d)
        .map(|i| t.as_operator()[(i, i)].re)
        .find(|v| v.abs() > 1e-12)
        .map_or(1.0, |v| v.signum());
    t.scale(sign)
}

/// `(Bf)(x) = sum_y B_xy f(y)`, acting on every matrix entry.
pub fn apply_bistochastic(b: &BistochasticMatrix, f: &QuantumRandomVariable) -> Result<QuantumRandomVariable> {
    if b.len() != f.len() {
        return Err(Error::SpaceMismatch);
    }
    let values = b
        .entries()
        .iter()
        .map(|row| {
            let mut acc = crate::linalg::ComplexOperator::zeros(f.dim());
            for (w, v) in row.iter().zip(f.values()) {
                if *w != 0.0 {
                    acc += &v.scale_real(*w);
                }
            }
            acc
        })
        .collect();
    QuantumRandomVariable::new(values)
}

/// Searches for a bistochastic `B` with `Bg = f` entrywise. On failure the
/// certificate carries the Farkas vector and a separating functional.
pub fn majorizes_b(f: &QuantumRandomVariable, g: &QuantumRandomVariable, space: &FiniteMeasureSpace) -> Result<MajorizationCertificate> {
    let (fh, gh) = hermitian_inputs(f, g, space)?;
    let scale = data_scale(&fh, &gh);
    match transport_witness(space, &coords(&fh), &coords(&gh))? {
        WitnessOutcome::Feasible(b) => {
            let residual = max_deviation(&apply_bistochastic(&b, g)?, f);
            let verdict = if residual <= 1e-8 * scale {
                Verdict::Holds
            } else {
                Verdict::Undecided
            };
            let cert = MajorizationCertificate::new(
                Order::B,
                verdict,
                Witness::Bistochastic {
                    matrix: b.entries().to_vec(),
                    residual,
                },
                1e-8,
            );
            Ok(if verdict == Verdict::Undecided {
                cert.with_note(format!("transport LP residual {residual:.3e} too large"))
            } else {
                cert
            })
        }
        WitnessOutcome::Infeasible(certificate) => {
            let separation = separating_functional(&fh, &gh, f, g, space)?;
            Ok(MajorizationCertificate::new(
                Order::B,
                Verdict::Fails,
                Witness::Farkas {
                    certificate,
                    separation,
                },
                1e-8,
            ))
        }
    }
}

/// `lambda` with `sum lambda_T v_T = p`, `lambda` in the simplex.
fn hull_weights(p: &[f64], vertices: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let mut lp = LinearProgram::new();
    let vars = lp.add_vars(vertices.len(), 0.0, false);
    lp.add_row(vars.iter().map(|&v| (v, 1.0)).collect(), Cmp::Eq, 1.0);
    for (c, &pc) in p.iter().enumerate() {
        let coeffs = vars
            .iter()
            .zip(vertices)
            .filter(|(_, v)| v[c] != 0.0)
            .map(|(&j, v)| (j, v[c]))
            .collect();
        lp.add_row(coeffs, Cmp::Eq, pc);
    }
    Ok(match lp.minimize()? {
        LinearOutcome::Optimal { x, .. } => Some(x),
        LinearOutcome::Infeasible { .. } => None,
        LinearOutcome::Unbounded => return Err(Error::Numerical("feasibility LP unbounded".into())),
    })
}

/// Direction `t` with `|t|_1 <= 1` maximizing `t.p - max_T t.v_T`.
fn max_margin_direction(p: &[f64], vertices: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = p.len();
    let mut lp = LinearProgram::new();
    let pos = lp.add_vars(n, 0.0, false);
    let neg = lp.add_vars(n, 0.0, false);
    let s = lp.add_var(-1.0, true);
    for c in 0..n {
        lp.set_cost(pos[c], p[c]);
        lp.set_cost(neg[c], -p[c]);
    }
    for v in vertices {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * n + 1);
        for c in 0..n {
            if v[c] != 0.0 {
                row.push((pos[c], v[c]));
                row.push((neg[c], -v[c]));
            }
        }
        row.push((s, -1.0));
        lp.add_row(row, Cmp::Le, 0.0);
    }
    lp.add_row(pos.iter().chain(&neg).map(|&j| (j, 1.0)).collect(), Cmp::Le, 1.0);
    match lp.maximize()? {
        LinearOutcome::Optimal { x, value, .. } => Ok(((0..n).map(|c| x[pos[c]] - x[neg[c]]).collect(), value)),
        _ => Err(Error::Numerical("margin LP is bounded and feasible".into())),
    }
}

fn uniform_refutation(
    order: Order,
    fh: &[HermitianOperator],
    gh: &[HermitianOperator],
    space: &FiniteMeasureSpace,
    direction: HermitianOperator,
    tol: f64,
) -> MajorizationCertificate {
    let margin = refutation_margin(fh, gh, space, &direction);
    MajorizationCertificate::new(order, Verdict::Fails, Witness::Refutation { direction, margin }, tol)
}

/// Direction separating the totals, if they differ.
fn totals_direction(fh: &[HermitianOperator], gh: &[HermitianOperator], space: &FiniteMeasureSpace) -> Option<HermitianOperator> {
    let mu = space.masses();
    let mut diff = HermitianOperator::zeros(fh[0].dim());
    for x in 0..fh.len() {
        diff = diff.add(&fh[x].sub(&gh[x]).scale(mu[x]));
    }
    let scale = data_scale(fh, gh) * space.total_mass();
    (diff.as_operator().max_abs() > 1e-9 * scale).then_some(diff)
}

/// Gaussian directions `t`; the first refuting one, normalized.
pub fn sample_direction_refutation(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    samples: usize,
    seed: u64,
) -> Result<Option<HermitianOperator>> {
    let (fh, gh) = hermitian_inputs(f, g, space)?;
    let mut rng = seeded(seed);
    for _ in 0..samples {
        let t = normalize_direction(&gaussian_hermitian(f.dim(), &mut rng));
        if refutes(&fh, &gh, space.masses(), &t) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Random states, alternating Haar pure states and Ginibre mixtures; the
/// first refuting one.
pub fn sample_state_refutation(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    samples: usize,
    seed: u64,
) -> Result<Option<State>> {
    let (fh, gh) = hermitian_inputs(f, g, space)?;
    Ok(state_refutation(&fh, &gh, space, samples, &mut seeded(seed)))
}

fn state_refutation<R: Rng>(
    fh: &[HermitianOperator],
    gh: &[HermitianOperator],
    space: &FiniteMeasureSpace,
    samples: usize,
    rng: &mut R,
) -> Option<State> {
    let d = fh[0].dim();
    (0..samples).find_map(|i| {
        let s = if i % 2 == 0 {
            haar_pure_state(d, rng)
        } else {
            ginibre_state(d, rng)
        };
        refutes(fh, gh, space.masses(), s.operator()).then_some(s)
    })
}

fn check_atom_cap(m: usize, opts: &MajorizationOptions) -> Result<()> {
    if m > opts.max_atoms {
        return Err(Error::InvalidInput(format!(
            "{m} atoms exceed the subset enumeration cap of {}",
            opts.max_atoms
        )));
    }
    Ok(())
}

/// Exact check of `f <_T g` by subset-sum hull containment when masses are
/// uniform; directional sampling otherwise.
pub fn majorizes_t(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    opts: &MajorizationOptions,
) -> Result<MajorizationCertificate> {
    let (fh, gh) = hermitian_inputs(f, g, space)?;
    if let Some(diff) = totals_direction(&fh, &gh, space) {
        return Ok(uniform_refutation(Order::T, &fh, &gh, space, normalize_direction(&diff), opts.tol));
    }
    if !space.is_uniform() {
        return Ok(match sample_direction_refutation(f, g, space, opts.direction_samples, opts.seed)? {
            Some(t) => uniform_refutation(Order::T, &fh, &gh, space, t, opts.tol),
            None => MajorizationCertificate::new(Order::T, Verdict::Undecided, Witness::None, opts.tol)
                .with_note(format!("masses are not uniform; {} sampled directions found no refutation", opts.direction_samples)),
        });
    }
    let m = space.len();
    check_atom_cap(m, opts)?;
    let d = f.dim();
    let scale = data_scale(&fh, &gh);
    let fc = coords(&fh);
    let gc = coords(&gh);
    let sum_coords = |c: &[Vec<f64>], s: &[usize]| -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for &x in s {
            for (o, v) in out.iter_mut().zip(&c[x]) {
                *o += v;
            }
        }
        out
    };
    let mut entries = Vec::new();
    let mut unresolved = 0;
    for k in 1..m {
        let subsets: Vec<Vec<usize>> = (0..m).combinations(k).collect();
        let vertices: Vec<Vec<f64>> = subsets.iter().map(|t| sum_coords(&gc, t)).collect();
        for s in &subsets {
            let p = sum_coords(&fc, s);
            if let Some(lambda) = hull_weights(&p, &vertices)? {
                let weights: Vec<(Vec<usize>, f64)> = subsets
                    .iter()
                    .zip(&lambda)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(t, w)| (t.clone(), *w))
                    .collect();
                let mut r = subset_sum(&fh, s).scale(-1.0);
                for (t, w) in &weights {
                    r = r.add(&subset_sum(&gh, t).scale(*w));
                }
                let residual = r.as_operator().max_abs();
                if residual <= 1e-8 * scale {
                    entries.push(ContainmentEntry {
                        subset: s.clone(),
                        weights,
                        residual,
                    });
                    continue;
                }
            }
            let (t, value) = max_margin_direction(&p, &vertices)?;
            debug!("subset {s:?} outside the hull, l1 margin {value:.3e}");
            let t = normalize_direction(&hermitian_from_coords(d, &t));
            if refutes(&fh, &gh, space.masses(), &t) {
                return Ok(uniform_refutation(Order::T, &fh, &gh, space, t, opts.tol));
            }
            unresolved += 1;
        }
    }
    if unresolved > 0 {
        return Ok(MajorizationCertificate::new(Order::T, Verdict::Undecided, Witness::None, opts.tol)
            .with_note(format!("{unresolved} subset sums are borderline: neither contained nor refuted")));
    }
    Ok(MajorizationCertificate::new(
        Order::T,
        Verdict::Holds,
        Witness::Containment { entries },
        opts.tol,
    ))
}

/// `max s` subject to `sum_T lambda_T G_T - F - sI >= 0`, `lambda` in the
/// simplex. Returns the weights, the achieved `s` and the normalized dual
/// block, which is a state `Z` with `tr(Z F) - max_T tr(Z G_T)` bounding
/// the optimum from below when negated.
fn cone_containment(
    f_s: &HermitianOperator,
    gs: &[HermitianOperator],
    tol: f64,
) -> Result<(Vec<f64>, f64, Option<HermitianOperator>)> {
    let n = gs.len();
    let d = f_s.dim();
    let last = &gs[n - 1];
    let s_var = n - 1;
    let mut problem = SdpProblem::new(n);
    problem.objective[s_var] = -1.0;
    let mut main = LmiBlock::new(last.sub(f_s));
    for (i, g) in gs[..n - 1].iter().enumerate() {
        main.push(i, g.sub(last));
    }
    main.push(s_var, HermitianOperator::identity(d).scale(-1.0));
    problem.blocks.push(main);
    let one = HermitianOperator::identity(1);
    let mut remainder = LmiBlock::new(one.clone());
    for i in 0..n - 1 {
        let mut b = LmiBlock::new(HermitianOperator::zeros(1));
        b.push(i, one.clone());
        problem.blocks.push(b);
        remainder.push(i, one.scale(-1.0));
    }
    if n > 1 {
        problem.blocks.push(remainder);
    }
    let mut y0 = vec![1.0 / n as f64; n];
    y0[s_var] = 0.0;
    y0[s_var] = problem.blocks[0].evaluate(&y0).lambda_min() - 1.0;
    let opts = SdpOptions {
        tol: tol * 0.1,
        ..SdpOptions::default()
    };
    let sol = sdp_solve(&problem, &y0, opts)?;
    let mut lambda: Vec<f64> = sol.y[..n - 1].iter().map(|v| v.max(0.0)).collect();
    lambda.push((1.0 - lambda.iter().sum::<f64>()).max(0.0));
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|v| *v /= total);
    let z = sol.dual.map(|z| z[0].clone()).filter(|z| z.trace() > 0.0);
    Ok((lambda, -sol.value, z))
}

/// `f <_S g`: exact positive-cone containment for uniform masses, checked
/// against a seeded state sampler; a disagreement is reported as undecided.
pub fn majorizes_s(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    opts: &MajorizationOptions,
) -> Result<MajorizationCertificate> {
    let (fh, gh) = hermitian_inputs(f, g, space)?;
    let mut rng = seeded(opts.seed);
    if let Some(diff) = totals_direction(&fh, &gh, space) {
        // Totals are pinned by states too since states span the Hermitian matrices.
        let e = diff.eigen();
        let k = if e.values[0].abs() >= e.values.last().unwrap().abs() {
            0
        } else {
            e.values.len() - 1
        };
        let s = State::pure(&e.vector(k))?;
        return Ok(uniform_refutation(Order::S, &fh, &gh, space, s.operator().clone(), opts.tol));
    }
    let sampled = state_refutation(&fh, &gh, space, opts.state_samples, &mut rng);
    let sampler = SamplerReport {
        samples: opts.state_samples,
        refuted: sampled.is_some(),
    };
    let finish = |mut cert: MajorizationCertificate| {
        cert.sampler = Some(sampler.clone());
        cert
    };
    if !space.is_uniform() {
        return Ok(finish(match sampled {
            Some(s) => uniform_refutation(Order::S, &fh, &gh, space, s.operator().clone(), opts.tol),
            None => MajorizationCertificate::new(Order::S, Verdict::Undecided, Witness::None, opts.tol)
                .with_note("masses are not uniform; sampled states found no refutation"),
        }));
    }
    let m = space.len();
    check_atom_cap(m, opts)?;
    let scale = data_scale(&fh, &gh);
    let t_cert = majorizes_t(f, g, space, opts)?;
    let mut entries = Vec::new();
    let mut exact_refutation: Option<State> = None;
    let mut unresolved = 0;
    let t_entries = match (&t_cert.verdict, &t_cert.witness) {
        (Verdict::Holds, Witness::Containment { entries }) => Some(entries.clone()),
        _ => None,
    };
    if let Some(te) = t_entries {
        entries = te;
    } else {
        for k in 1..m {
            let subsets: Vec<Vec<usize>> = (0..m).combinations(k).collect();
            let gs: Vec<HermitianOperator> = subsets.iter().map(|t| subset_sum(&gh, t)).collect();
            for s in &subsets {
                let fs = subset_sum(&fh, s);
                // Cheap exits first: a single dominating G_T.
                if let Some(t) = gs.iter().position(|gt| gt.sub(&fs).lambda_min() >= 0.0) {
                    entries.push(ContainmentEntry {
                        subset: s.clone(),
                        weights: vec![(subsets[t].clone(), 1.0)],
                        residual: 0.0,
                    });
                    continue;
                }
                let (lambda, value, z) = cone_containment(&fs, &gs, opts.tol)?;
                let weights: Vec<(Vec<usize>, f64)> = subsets
                    .iter()
                    .zip(&lambda)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(t, w)| (t.clone(), *w))
                    .collect();
                let mut p = fs.scale(-1.0);
                for (t, w) in &weights {
                    p = p.add(&subset_sum(&gh, t).scale(*w));
                }
                let lmin = p.lambda_min();
                debug!("subset {s:?}: cone margin {value:.3e}, min eigenvalue {lmin:.3e}");
                if lmin >= -opts.tol * scale {
                    entries.push(ContainmentEntry {
                        subset: s.clone(),
                        weights,
                        residual: (-lmin).max(0.0),
                    });
                    continue;
                }
                match z.and_then(|z| State::normalized(z).ok()) {
                    Some(state) if refutes(&fh, &gh, space.masses(), state.operator()) => {
                        exact_refutation.get_or_insert(state);
                    }
                    _ => unresolved += 1,
                }
            }
        }
    }
    let cert = match (exact_refutation, sampled, unresolved) {
        (Some(state), _, _) => uniform_refutation(Order::S, &fh, &gh, space, state.operator().clone(), opts.tol),
        (None, Some(state), 0) => uniform_refutation(Order::S, &fh, &gh, space, state.operator().clone(), opts.tol)
            .with_note("state sampler refuted although every cone containment is feasible")
            .into_undecided(),
        (None, Some(state), _) => uniform_refutation(Order::S, &fh, &gh, space, state.operator().clone(), opts.tol)
            .with_note("refuted by the state sampler; cone duals were inconclusive"),
        (None, None, 0) => MajorizationCertificate::new(Order::S, Verdict::Holds, Witness::Containment { entries }, opts.tol),
        (None, None, n) => MajorizationCertificate::new(Order::S, Verdict::Undecided, Witness::None, opts.tol)
            .with_note(format!("{n} cone containments are borderline and the sampler found no refutation")),
    };
    Ok(finish(cert))
}

impl MajorizationCertificate {
    fn into_undecided(mut self) -> Self {
        self.verdict = Verdict::Undecided;
        self
    }
}

pub fn majorizes(
    order: Order,
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    opts: &MajorizationOptions,
) -> Result<MajorizationCertificate> {
    match order {
        Order::B => majorizes_b(f, g, space),
        Order::T => majorizes_t(f, g, space, opts),
        Order::S => majorizes_s(f, g, space, opts),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImplicationReport {
    pub b: Verdict,
    pub t: Verdict,
    pub s: Verdict,
    /// Set when a certified verdict contradicts `B => T => S`.
    pub violation: Option<String>,
}

/// Runs all three checkers; the chain `f < g => f <_T g => f <_S g` must hold.
pub fn implication_suite(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    opts: &MajorizationOptions,
) -> Result<ImplicationReport> {
    let b = majorizes_b(f, g, space)?.verdict;
    let t = majorizes_t(f, g, space, opts)?.verdict;
    let s = majorizes_s(f, g, space, opts)?.verdict;
    let rank = |v: Verdict| match v {
        Verdict::Holds => Some(true),
        Verdict::Fails => Some(false),
        Verdict::Undecided => None,
    };
    let chain = [("B", rank(b)), ("T", rank(t)), ("S", rank(s))];
    let mut violation = None;
    for i in 0..3 {
        for j in i + 1..3 {
            if chain[i].1 == Some(true) && chain[j].1 == Some(false) {
                violation = Some(format!("{} holds but {} fails", chain[i].0, chain[j].0));
            }
        }
    }
    Ok(ImplicationReport { b, t, s, violation })
}

/// `phi(h) = sum_x mu(x) Re tr(W(x) h(x))`.
pub fn phi(w: &[HermitianOperator], h: &QuantumRandomVariable, space: &FiniteMeasureSpace) -> Result<f64> {
    if w.len() != space.len() || h.len() != space.len() {
        return Err(Error::SpaceMismatch);
    }
    let mut acc = 0.0;
    for x in 0..h.len() {
        acc += space.mass(x) * trace_pairing(&w[x], h.value(x))?.re;
    }
    Ok(acc)
}

/// `psi_phi(h) = max_B phi(Bh)` over the bistochastic polytope, by LP.
pub fn psi_phi(w: &[HermitianOperator], h: &QuantumRandomVariable, space: &FiniteMeasureSpace) -> Result<f64> {
    if w.len() != space.len() || h.len() != space.len() {
        return Err(Error::SpaceMismatch);
    }
    let m = space.len();
    let mu = space.masses();
    let mut lp = LinearProgram::new();
    let mut vars = Vec::with_capacity(m * m);
    for x in 0..m {
        for y in 0..m {
            let c = mu[x] * trace_pairing(&w[x], h.value(y))?.re;
            vars.push(lp.add_var(c, false));
        }
    }
    for x in 0..m {
        lp.add_row((0..m).map(|y| (vars[x * m + y], 1.0)).collect(), Cmp::Eq, 1.0);
    }
    for y in 0..m {
        lp.add_row((0..m).map(|x| (vars[x * m + y], mu[x])).collect(), Cmp::Eq, mu[y]);
    }
    match lp.maximize()? {
        LinearOutcome::Optimal { value, .. } => Ok(value),
        _ => Err(Error::Numerical("polytope LP must be feasible and bounded".into())),
    }
}

/// Max-margin `W` with coordinates in `[-1, 1]`: maximizes
/// `phi(f) - sum alpha - sum mu beta` subject to
/// `alpha_x + mu(x) beta_y >= mu(x) tr(W(x) g(y))`, which is the dual of
/// the transport LP defining `psi_phi(g)`. The margin is then recomputed
/// by [`psi_phi`].
fn separating_functional(
    fh: &[HermitianOperator],
    gh: &[HermitianOperator],
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
) -> Result<Option<SeparatingFunctional>> {
    let m = space.len();
    let d = fh[0].dim();
    let n = d * d;
    let mu = space.masses();
    let fc = coords(fh);
    let gc = coords(gh);
    let mut lp = LinearProgram::new();
    let w: Vec<Vec<usize>> = (0..m).map(|x| (0..n).map(|c| lp.add_var(mu[x] * fc[x][c], true)).collect()).collect();
    let alpha = lp.add_vars(m, -1.0, true);
    let beta: Vec<usize> = (0..m).map(|y| lp.add_var(-mu[y], true)).collect();
    for x in 0..m {
        for y in 0..m {
            let mut row = vec![(alpha[x], 1.0), (beta[y], mu[x])];
            for c in 0..n {
                if gc[y][c] != 0.0 {
                    row.push((w[x][c], -mu[x] * gc[y][c]));
                }
            }
            lp.add_row(row, Cmp::Ge, 0.0);
        }
    }
    for wx in &w {
        for &v in wx {
            lp.add_row(vec![(v, 1.0)], Cmp::Le, 1.0);
            lp.add_row(vec![(v, 1.0)], Cmp::Ge, -1.0);
        }
    }
    let LinearOutcome::Optimal { x, value, .. } = lp.maximize()? else {
        return Err(Error::Numerical("separation LP must be feasible and bounded".into()));
    };
    debug!("separation LP value {value:.3e}");
    let ws: Vec<HermitianOperator> = w
        .iter()
        .map(|wx| hermitian_from_coords(d, &wx.iter().map(|&v| x[v]).collect::<Vec<_>>()))
        .collect();
    let phi_f = phi(&ws, f, space)?;
    let psi_g = psi_phi(&ws, g, space)?;
    let margin = phi_f - psi_g;
    Ok((margin > 1e-8).then_some(SeparatingFunctional {
        w: ws,
        phi_f,
        psi_g,
        margin,
    }))
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum KomiyaOutcome {
    /// `f` is not majorized by `g`; `phi` separates them.
    Separated(SeparatingFunctional),
    /// `f = Bg`; random functionals satisfied `psi_phi(f) <= psi_phi(g)`
    /// up to `max_excess`.
    Majorized { functionals: usize, max_excess: f64, consistent: bool },
    Inconclusive { reason: String },
}

pub const KOMIYA_FUNCTIONALS: usize = 50;

/// Separation side of the characterization of `<` by the functionals
/// `psi_phi`. Weak continuity of `psi_phi` is automatic at finite scale.
pub fn komiya_separate(
    f: &QuantumRandomVariable,
    g: &QuantumRandomVariable,
    space: &FiniteMeasureSpace,
    seed: u64,
) -> Result<KomiyaOutcome> {
    let cert = majorizes_b(f, g, space)?;
    match (cert.verdict, cert.witness) {
        (Verdict::Holds, _) => {
            let (fh, gh) = hermitian_inputs(f, g, space)?;
            let scale = data_scale(&fh, &gh) * space.total_mass() * f.dim() as f64;
            let mut rng = seeded(seed);
            let mut max_excess = f64::NEG_INFINITY;
            for _ in 0..KOMIYA_FUNCTIONALS {
                let w: Vec<HermitianOperator> = (0..space.len()).map(|_| gaussian_hermitian(f.dim(), &mut rng)).collect();
                let excess = psi_phi(&w, f, space)? - psi_phi(&w, g, space)?;
                max_excess = max_excess.max(excess);
            }
            Ok(KomiyaOutcome::Majorized {
                functionals: KOMIYA_FUNCTIONALS,
                max_excess,
                consistent: max_excess <= 1e-8 * scale,
            })
        }
        (Verdict::Fails, Witness::Farkas { separation: Some(sep), .. }) => Ok(KomiyaOutcome::Separated(sep)),
        (_, _) => Ok(KomiyaOutcome::Inconclusive {
            reason: cert.note.unwrap_or_else(|| "no separating functional with positive margin".into()),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexOperator;

    fn diag_qrv(d: &[[f64; 2]]) -> QuantumRandomVariable {
        QuantumRandomVariable::new(d.iter().map(|v| ComplexOperator::diag(v)).collect()).unwrap()
    }

    fn joe_verducci() -> (QuantumRandomVariable, QuantumRandomVariable, FiniteMeasureSpace) {
        (
            diag_qrv(&[[1.0, 4.0], [3.0, 2.0]]),
            diag_qrv(&[[1.0, 2.0], [3.0, 4.0]]),
            FiniteMeasureSpace::uniform(2, 0.5),
        )
    }

    fn malamud() -> (QuantumRandomVariable, QuantumRandomVariable, FiniteMeasureSpace) {
        (
            diag_qrv(&[[12.0, 12.0], [12.0, 12.0], [5.0, 3.0], [3.0, 5.0]]),
            diag_qrv(&[[8.0, 16.0], [16.0, 8.0], [0.0, 0.0], [8.0, 8.0]]),
            FiniteMeasureSpace::uniform(4, 0.25),
        )
    }

    fn opts() -> MajorizationOptions {
        MajorizationOptions {
            state_samples: 2000,
            direction_samples: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn identity_and_averaging() {
        let (_, g, space) = malamud();
        let id = BistochasticMatrix::identity(space.clone());
        assert_eq!(apply_bistochastic(&id, &g).unwrap(), g);
        let avg = apply_bistochastic(&BistochasticMatrix::averaging(space.clone()), &g).unwrap();
        for v in avg.values() {
            assert!((v - &ComplexOperator::diag(&[8.0, 8.0])).max_abs() < 1e-12);
        }
        for order in [Order::B, Order::T, Order::S] {
            let c = majorizes(order, &g, &g, &space, &opts()).unwrap();
            assert_eq!(c.verdict, Verdict::Holds, "{order:?}");
            assert!(c.verify(&g, &g, &space).unwrap());
            let c = majorizes(order, &avg, &g, &space, &opts()).unwrap();
            assert_eq!(c.verdict, Verdict::Holds, "{order:?}");
            assert!(c.verify(&avg, &g, &space).unwrap());
        }
    }

    #[test]
    fn joe_verducci_orders() {
        let (f, g, space) = joe_verducci();
        let b = majorizes_b(&f, &g, &space).unwrap();
        assert_eq!(b.verdict, Verdict::Fails);
        assert!(b.verify(&f, &g, &space).unwrap());
        let t = majorizes_t(&f, &g, &space, &opts()).unwrap();
        assert_eq!(t.verdict, Verdict::Fails);
        assert!(t.verify(&f, &g, &space).unwrap());
        let Witness::Refutation { margin, direction } = &t.witness else {
            panic!("expected a refutation")
        };
        assert!(*margin >= 0.9, "{margin}");
        assert!(direction.as_operator()[(0, 0)].re >= 0.0);
        let textbook_t = HermitianOperator::diag(&[1.0, -1.0]);
        let (fh, gh) = hermitian_inputs(&f, &g, &space).unwrap();
        assert!(refutes(&fh, &gh, space.masses(), &textbook_t));
        let s = majorizes_s(&f, &g, &space, &opts()).unwrap();
        assert_eq!(s.verdict, Verdict::Holds, "{:?}", s.note);
        assert!(s.verify(&f, &g, &space).unwrap());
    }

    #[test]
    fn malamud_orders() {
        let (f, g, space) = malamud();
        let t = majorizes_t(&f, &g, &space, &opts()).unwrap();
        assert_eq!(t.verdict, Verdict::Holds);
        assert!(t.verify(&f, &g, &space).unwrap());
        let b = majorizes_b(&f, &g, &space).unwrap();
        assert_eq!(b.verdict, Verdict::Fails);
        assert!(b.verify(&f, &g, &space).unwrap());
        match komiya_separate(&f, &g, &space, 1).unwrap() {
            KomiyaOutcome::Separated(sep) => {
                assert!(sep.margin >= 1e-6);
                assert!(sep.verify(&f, &g, &space).unwrap());
            }
            other => panic!("{other:?}"),
        }
        let r = implication_suite(&f, &g, &space, &opts()).unwrap();
        assert_eq!((r.b, r.t, r.s), (Verdict::Fails, Verdict::Holds, Verdict::Holds));
        assert!(r.violation.is_none());
    }

    #[test]
    fn scalar_separation_margin() {
        let space = FiniteMeasureSpace::uniform(3, 1.0);
        let f1 = QuantumRandomVariable::new([2.0, 0.0, 1.0].iter().map(|v| ComplexOperator::diag(&[*v])).collect()).unwrap();
        let g = QuantumRandomVariable::constant_identity(3, 1, 1.0);
        let KomiyaOutcome::Separated(sep) = komiya_separate(&f1, &g, &space, 3).unwrap() else {
            panic!("expected separation")
        };
        assert!(sep.margin >= 0.5, "{}", sep.margin);
    }

    #[test]
    fn psi_on_two_atoms_matches_closed_form() {
        // B = [[b, 1-b], [1-b, b]]: phi(Bh) is affine in b, so the maximum
        // sits at b = 0 or b = 1.
        let space = FiniteMeasureSpace::uniform(2, 0.5);
        let h = QuantumRandomVariable::new(vec![ComplexOperator::diag(&[3.0]), ComplexOperator::diag(&[-1.0])]).unwrap();
        let w = vec![HermitianOperator::diag(&[2.0]), HermitianOperator::diag(&[0.5])];
        let at = |b: f64| 0.5 * (2.0 * (3.0 * b - (1.0 - b)) + 0.5 * (3.0 * (1.0 - b) - b));
        let expected = at(0.0).max(at(1.0));
        assert!((psi_phi(&w, &h, &space).unwrap() - expected).abs() < 1e-12);
        let zero = vec![HermitianOperator::zeros(1); 2];
        assert_eq!(psi_phi(&zero, &h, &space).unwrap(), 0.0);
        let one = FiniteMeasureSpace::uniform(1, 2.0);
        let h1 = QuantumRandomVariable::new(vec![ComplexOperator::diag(&[3.0])]).unwrap();
        let w1 = vec![HermitianOperator::diag(&[0.25])];
        assert!((psi_phi(&w1, &h1, &one).unwrap() - phi(&w1, &h1, &one).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn constructed_positive_is_majorized() {
        let mut rng = seeded(11);
        let space = FiniteMeasureSpace::uniform(4, 0.25);
        let g = crate::random::random_qrv(4, 2, true, &mut rng);
        let b = crate::random::random_bistochastic(&space, &mut rng);
        let f = apply_bistochastic(&b, &g).unwrap();
        let c = majorizes_b(&f, &g, &space).unwrap();
        assert_eq!(c.verdict, Verdict::Holds);
        assert!(c.verify(&f, &g, &space).unwrap());
        match komiya_separate(&f, &g, &space, 5).unwrap() {
            KomiyaOutcome::Majorized { consistent, .. } => assert!(consistent),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refutation_survives_json() {
        let (f, g, space) = joe_verducci();
        let t = majorizes_t(&f, &g, &space, &opts()).unwrap();
        let back: MajorizationCertificate = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert!(back.verify(&f, &g, &space).unwrap());
        let mut forged = back.clone();
        forged.witness = Witness::Refutation {
            direction: HermitianOperator::identity(2),
            margin: 1.0,
        };
        assert!(!forged.verify(&f, &g, &space).unwrap());
    }

    #[test]
    fn non_uniform_masses_fall_back_to_sampling() {
        let space = FiniteMeasureSpace::from_masses(vec![0.25, 0.75]).unwrap();
        let (f, g, _) = joe_verducci();
        let c = majorizes_t(&f, &g, &space, &opts()).unwrap();
        assert_ne!(c.verdict, Verdict::Holds);
        assert!(c.verify(&f, &g, &space).unwrap());
    }
}
