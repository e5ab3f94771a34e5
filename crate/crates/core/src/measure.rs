//! Finite atomic measure spaces, scalar functions on them, decreasing
//! rearrangements, classical majorization and bistochastic matrices.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::solver::{Cmp, LinearOutcome, LinearProgram};

/// Tolerance for equality of total masses and cumulative integrals.
pub const MASS_TOL: f64 = 1e-9;

/// Atom identifier; JSON accepts either strings or integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomLabel(pub String);

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for AtomLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AtomLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => Ok(AtomLabel(s)),
            serde_json::Value::Number(n) => Ok(AtomLabel(n.to_string())),
            other => Err(serde::de::Error::custom(format!(
                "atom labels must be strings or integers, got {other}"
            ))),
        }
    }
}

/// Atoms with strictly positive masses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteMeasureSpace {
    atoms: Vec<AtomLabel>,
    masses: Vec<f64>,
}

#[derive(Deserialize)]
struct SpaceRepr {
    atoms: Vec<AtomLabel>,
    masses: Vec<f64>,
}

impl<'de> Deserialize<'de> for FiniteMeasureSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SpaceRepr::deserialize(d)?;
        FiniteMeasureSpace::new(r.atoms, r.masses).map_err(serde::de::Error::custom)
    }
}

impl FiniteMeasureSpace {
    pub fn new(atoms: Vec<AtomLabel>, masses: Vec<f64>) -> Result<Self> {
        if atoms.len() != masses.len() {
            return Err(Error::DimMismatch {
                expected: atoms.len(),
                found: masses.len(),
            });
        }
        if atoms.is_empty() {
            return Err(Error::InvalidInput("measure space has no atoms".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidInput(format!("atom mass {m} is not a positive finite number")));
        }
        let mut seen = HashSet::new();
        for a in &atoms {
            if !seen.insert(a) {
                return Err(Error::InvalidInput(format!("duplicate atom label {a}")));
            }
        }
        Ok(Self { atoms, masses })
    }

    /// Atoms labelled `0..masses.len()`.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let atoms = (0..masses.len()).map(|i| AtomLabel(i.to_string())).collect();
        Self::new(atoms, masses)
    }

    pub fn uniform(m: usize, mass: f64) -> Self {
        Self::from_masses(vec![mass; m]).expect("uniform masses are valid")
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, x: usize) -> f64 {
        self.masses[x]
    }

    pub fn atoms(&self) -> &[AtomLabel] {
        &self.atoms
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.0 == label)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_uniform(&self) -> bool {
        let m0 = self.masses[0];
        self.masses.iter().all(|m| (m - m0).abs() <= 1e-12 * m0)
    }
}

/// A scalar function on the atoms of a space.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalFunction {
    values: Vec<C64>,
}

impl ClassicalFunction {
    pub fn new(values: Vec<C64>) -> Self {
        Self { values }
    }

    pub fn real(values: &[f64]) -> Self {
        Self {
            values: values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Real parts, rejecting any imaginary part above `1e-12`.
    pub fn real_values(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(atom, z)| {
                if z.im.abs() > 1e-12 {
                    Err(Error::ComplexValued { atom, imag: z.im })
                } else {
                    Ok(z.re)
                }
            })
            .collect()
    }

    pub fn check_space(&self, space: &FiniteMeasureSpace) -> Result<()> {
        if self.len() != space.len() {
            return Err(Error::DimMismatch {
                expected: space.len(),
                found: self.len(),
            });
        }
        Ok(())
    }

    /// `sum_x f(x) mu(x)`.
    pub fn integral(&self, space: &FiniteMeasureSpace) -> C64 {
        self.values.iter().zip(space.masses()).map(|(v, m)| v * m).sum()
    }

    /// Essential supremum of `|f|`; every atom has positive mass.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Serialize for ClassicalFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            values: Vec<[f64; 2]>,
        }
        Repr {
            values: self.values.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClassicalFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Scalar {
            Pair([f64; 2]),
            Real(f64),
        }
        #[derive(Deserialize)]
        struct Repr {
            values: Vec<Scalar>,
        }
        let r = Repr::deserialize(d)?;
        let values: Vec<C64> = r
            .values
            .into_iter()
            .map(|s| match s {
                Scalar::Pair([re, im]) => C64::new(re, im),
                Scalar::Real(re) => C64::new(re, 0.0),
            })
            .collect();
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(serde::de::Error::custom("function values must be finite"));
        }
        Ok(ClassicalFunction { values })
    }
}

/// `mu({x : f(x) > s})`.
pub fn distribution_function(space: &FiniteMeasureSpace, f: &ClassicalFunction, s: f64) -> Result<f64> {
    f.check_space(space)?;
    let v = f.real_values()?;
    Ok(v.iter()
        .zip(space.masses())
        .filter(|(fx, _)| **fx > s)
        .map(|(_, m)| m)
        .sum())
}

/// One constant piece of a decreasing rearrangement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Step {
    pub width: f64,
    pub value: f64,
}

/// Decreasing rearrangement as a step function on `[0, mu(X)]`. Atoms with
/// equal values are merged into one step.
pub fn decreasing_rearrangement(space: &FiniteMeasureSpace, f: &ClassicalFunction) -> Result<Vec<Step>> {
    f.check_space(space)?;
    let v = f.real_values()?;
    Ok(rearrange(&v, space.masses()))
}

pub(crate) fn rearrange(values: &[f64], masses: &[f64]) -> Vec<Step> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut steps: Vec<Step> = Vec::new();
    for i in order {
        match steps.last_mut() {
            Some(last) if last.value == values[i] => last.width += masses[i],
            _ => steps.push(Step {
                width: masses[i],
                value: values[i],
            }),
        }
    }
    steps
}

/// Evaluates `t -> int_0^t f_dec` for a step function.
fn cumulative(steps: &[Step], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut left = t;
    for s in steps {
        if left <= 0.0 {
            break;
        }
        let w = s.width.min(left);
        acc += w * s.value;
        left -= w;
    }
    acc
}

fn breakpoints(a: &[Step], b: &[Step]) -> Vec<f64> {
    let mut pts = Vec::new();
    for steps in [a, b] {
        let mut t = 0.0;
        for s in steps {
            t += s.width;
            pts.push(t);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Largest excess `int_0^t f_dec - int_0^t g_dec` over all breakpoints,
/// together with the absolute difference of the totals. `f` is majorized
/// by `g` exactly when both are within tolerance.
pub fn majorization_excess(
    f: &[f64],
    f_masses: &[f64],
    g: &[f64],
    g_masses: &[f64],
) -> (f64, f64) {
    let fs = rearrange(f, f_masses);
    let gs = rearrange(g, g_masses);
    let total_f: f64 = fs.iter().map(|s| s.width * s.value).sum();
    let total_g: f64 = gs.iter().map(|s| s.width * s.value).sum();
    let mut excess = f64::NEG_INFINITY;
    for t in breakpoints(&fs, &gs) {
        excess = excess.max(cumulative(&fs, t) - cumulative(&gs, t));
    }
    (excess, (total_f - total_g).abs())
}

fn scalar_scale(f: &[f64], g: &[f64], masses_f: &[f64], masses_g: &[f64]) -> f64 {
    let mf: f64 = masses_f.iter().sum();
    let mg: f64 = masses_g.iter().sum();
    let sup = f.iter().chain(g).fold(0.0f64, |a, v| a.max(v.abs()));
    1.0 + sup * mf.max(mg)
}

/// Real-vector form of [`classical_majorizes`].
pub fn majorizes_values(f: &[f64], f_masses: &[f64], g: &[f64], g_masses: &[f64]) -> bool {
    let (excess, total_gap) = majorization_excess(f, f_masses, g, g_masses);
    let tol = MASS_TOL * scalar_scale(f, g, f_masses, g_masses);
    excess <= tol && total_gap <= tol
}

/// Whether `f` is majorized by `g`: the cumulative integrals of `f_dec` stay
/// below those of `g_dec` and the totals agree.
pub fn classical_majorizes(
    f_space: &FiniteMeasureSpace,
    f: &ClassicalFunction,
    g_space: &FiniteMeasureSpace,
    g: &ClassicalFunction,
) -> Result<bool> {
    f.check_space(f_space)?;
    g.check_space(g_space)?;
    let (left, right) = (f_space.total_mass(), g_space.total_mass());
    if (left - right).abs() > MASS_TOL * left.max(right).max(1.0) {
        return Err(Error::MassMismatch { left, right });
    }
    let fv = f.real_values()?;
    let gv = g.real_values()?;
    Ok(majorizes_values(&fv, f_space.masses(), &gv, g_space.masses()))
}

/// Nonnegative matrix with unit row sums whose columns preserve the measure:
/// `sum_x mu(x) B_xy = mu(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BistochasticMatrix {
    space: FiniteMeasureSpace,
    entries: Vec<Vec<f64>>,
}

impl BistochasticMatrix {
    pub fn new(space: FiniteMeasureSpace, entries: Vec<Vec<f64>>) -> Result<Self> {
        let m = space.len();
        if entries.len() != m || entries.iter().any(|r| r.len() != m) {
            return Err(Error::DimMismatch {
                expected: m,
                found: entries.len(),
            });
        }
        let b = Self { space, entries };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        let m = self.space.len();
        for (x, row) in self.entries.iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < -1e-12) {
                return Err(Error::NotDoublyStochastic(format!("entry {v} in row {x}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::NotDoublyStochastic(format!("row {x} sums to {s}")));
            }
        }
        let mu = self.space.masses();
        for y in 0..m {
            let s: f64 = (0..m).map(|x| mu[x] * self.entries[x][y]).sum();
            if (s - mu[y]).abs() > MASS_TOL * (1.0 + mu[y]) {
                return Err(Error::NotDoublyStochastic(format!(
                    "column {y} carries mass {s}, expected {}",
                    mu[y]
                )));
            }
        }
        Ok(())
    }

    pub fn identity(space: FiniteMeasureSpace) -> Self {
        let m = space.len();
        let entries = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { space, entries }
    }

    /// `B_xy = mu(y) / mu(X)`: maps every function to its average.
    pub fn averaging(space: FiniteMeasureSpace) -> Self {
        let total = space.total_mass();
        let row: Vec<f64> = space.masses().iter().map(|m| m / total).collect();
        let entries = vec![row; space.len()];
        Self { space, entries }
    }

    pub fn space(&self) -> &FiniteMeasureSpace {
        &self.space
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.entries[x][y]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(Bg)(x) = sum_y B_xy g(y)` for scalar values.
    pub fn apply_real(&self, g: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(g).map(|(b, v)| b * v).sum())
            .collect()
    }

    pub fn apply(&self, g: &ClassicalFunction) -> ClassicalFunction {
        ClassicalFunction::new(
            self.entries
                .iter()
                .map(|row| row.iter().zip(g.values()).map(|(b, v)| v * b).sum())
                .collect(),
        )
    }
}

impl Serialize for BistochasticMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

/// Dual certificate that no bistochastic `B` maps `g` to `f`.
///
/// With one multiplier `alpha_x` per row-sum constraint, `beta_y` per
/// column-mass constraint and `gamma_{x,c}` per coordinate of `Bg = f`,
/// validity means `alpha_x + mu(x) beta_y + sum_c gamma_{x,c} g_{y,c} <= 0`
/// for all `x, y` and `sum alpha + sum mu(y) beta_y + sum gamma f > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
}

impl FarkasCertificate {
    /// Returns `(max column pairing, rhs pairing)`; the certificate is valid
    /// when the first is at most `1e-8` relative and the second is positive.
    pub fn evaluate(&self, masses: &[f64], f: &[Vec<f64>], g: &[Vec<f64>]) -> (f64, f64) {
        let m = masses.len();
        let mut worst = f64::NEG_INFINITY;
        for x in 0..m {
            for y in 0..m {
                let mut v = self.alpha[x] + masses[x] * self.beta[y];
                for (gam, gy) in self.gamma[x].iter().zip(&g[y]) {
                    v += gam * gy;
                }
                worst = worst.max(v);
            }
        }
        let mut rhs: f64 = self.alpha.iter().sum();
        rhs += self.beta.iter().zip(masses).map(|(b, m)| b * m).sum::<f64>();
        for x in 0..m {
            rhs += self.gamma[x].iter().zip(&f[x]).map(|(a, b)| a * b).sum::<f64>();
        }
        (worst, rhs)
    }

    /// Any feasible `B` has entries summing to `m`, so the pairing of `B`
    /// with the column values is at most `m * max(worst, 0)` yet equals
    /// `rhs`; exceeding that bound rules `B` out.
    pub fn verify(&self, masses: &[f64], f: &[Vec<f64>], g: &[Vec<f64>]) -> bool {
        let (worst, rhs) = self.evaluate(masses, f, g);
        worst <= 1e-8 && rhs > 1e-8 && rhs > masses.len() as f64 * worst.max(0.0)
    }
}

#[derive(Clone, Debug)]
pub enum WitnessOutcome {
    Feasible(BistochasticMatrix),
    Infeasible(FarkasCertificate),
}

/// Searches for a bistochastic `B` with `(Bg)(x) = f(x)` coordinatewise,
/// where each atom carries a real coordinate vector of common length.
pub fn transport_witness(
    space: &FiniteMeasureSpace,
    f: &[Vec<f64>],
    g: &[Vec<f64>],
) -> Result<WitnessOutcome> {
    let m = space.len();
    if f.len() != m || g.len() != m {
        return Err(Error::DimMismatch {
            expected: m,
            found: f.len().min(g.len()),
        });
    }
    let k = f.first().map_or(0, |v| v.len());
    if f.iter().chain(g).any(|v| v.len() != k) {
        return Err(Error::InvalidInput("coordinate vectors differ in length".into()));
    }
    let mu = space.masses();
    let mut lp = LinearProgram::new();
    let vars: Vec<usize> = lp.add_vars(m * m, 0.0, false);
    for x in 0..m {
        lp.add_row((0..m).map(|y| (vars[x * m + y], 1.0)).collect(), Cmp::Eq, 1.0);
    }
    for y in 0..m {
        lp.add_row((0..m).map(|x| (vars[x * m + y], mu[x])).collect(), Cmp::Eq, mu[y]);
    }
    for x in 0..m {
        for c in 0..k {
            let coeffs = (0..m)
                .filter(|&y| g[y][c] != 0.0)
                .map(|y| (vars[x * m + y], g[y][c]))
                .collect();
            lp.add_row(coeffs, Cmp::Eq, f[x][c]);
        }
    }
    match lp.minimize()? {
        LinearOutcome::Optimal { x: sol, .. } => {
            let entries: Vec<Vec<f64>> = (0..m)
                .map(|x| {
                    let row: Vec<f64> = (0..m).map(|y| sol[x * m + y].max(0.0)).collect();
                    let s: f64 = row.iter().sum();
                    row.iter().map(|v| v / s).collect()
                })
                .collect();
            Ok(WitnessOutcome::Feasible(BistochasticMatrix::new(space.clone(), entries)?))
        }
        LinearOutcome::Infeasible { farkas } => {
            let alpha = farkas[..m].to_vec();
            let beta = farkas[m..2 * m].to_vec();
            let gamma = (0..m)
                .map(|x| farkas[2 * m + x * k..2 * m + (x + 1) * k].to_vec())
                .collect();
            let cert = FarkasCertificate { alpha, beta, gamma };
            if !cert.verify(mu, f, g) {
                return Err(Error::Numerical("Farkas certificate failed re-verification".into()));
            }
            Ok(WitnessOutcome::Infeasible(cert))
        }
        LinearOutcome::Unbounded => Err(Error::Numerical("feasibility LP reported unbounded".into())),
    }
}

/// Real and imaginary parts of a scalar function as coordinate vectors.
pub(crate) fn scalar_coords(f: &ClassicalFunction, complex: bool) -> Vec<Vec<f64>> {
    f.values()
        .iter()
        .map(|z| if complex { vec![z.re, z.im] } else { vec![z.re] })
        .collect()
}

/// Bistochastic `B` with `Bg = f`, or a Farkas certificate that none exists.
pub fn bistochastic_witness(
    space: &FiniteMeasureSpace,
    f: &ClassicalFunction,
    g: &ClassicalFunction,
) -> Result<WitnessOutcome> {
    f.check_space(space)?;
    g.check_space(space)?;
    let complex = f.values().iter().chain(g.values()).any(|z| z.im != 0.0);
    transport_witness(space, &scalar_coords(f, complex), &scalar_coords(g, complex))
}

/// Greedy Birkhoff decomposition of a doubly stochastic matrix into
/// weighted permutations, `perm[i]` being the column matched to row `i`.
pub fn birkhoff_decompose(b: &BistochasticMatrix) -> Result<Vec<(f64, Vec<usize>)>> {
    if !b.space().is_uniform() {
        return Err(Error::NotUniform);
    }
    let m = b.len();
    let mut r: Vec<Vec<f64>> = b.entries().to_vec();
    for row in &mut r {
        for v in row.iter_mut() {
            if *v < 1e-14 {
                *v = 0.0;
            }
        }
    }
    let mut remaining = 1.0;
    let mut out = Vec::new();
    while remaining > 1e-12 {
        let Some(perm) = perfect_matching(&r) else {
            if remaining > 1e-9 {
                return Err(Error::NotDoublyStochastic(format!(
                    "no perfect matching on the support with residual mass {remaining:.3e}"
                )));
            }
            break;
        };
        let (argmin, w) = (0..m)
            .map(|i| (i, r[i][perm[i]]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty matrix");
        for i in 0..m {
            r[i][perm[i]] -= w;
            if r[i][perm[i]] < 1e-14 {
                r[i][perm[i]] = 0.0;
            }
        }
        r[argmin][perm[argmin]] = 0.0;
        remaining -= w;
        out.push((w, perm));
        if out.len() > m * m {
            return Err(Error::Numerical("Birkhoff decomposition did not terminate".into()));
        }
    }
    Ok(out)
}

/// Kuhn's augmenting-path matching on the positive entries.
fn perfect_matching(r: &[Vec<f64>]) -> Option<Vec<usize>> {
    let m = r.len();
    let mut col_owner: Vec<Option<usize>> = vec![None; m];
    fn augment(
        i: usize,
        r: &[Vec<f64>],
        seen: &mut [bool],
        col_owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..r.len() {
            if r[i][j] > 0.0 && !seen[j] {
                seen[j] = true;
                let free = match col_owner[j] {
                    None => true,
                    Some(k) => augment(k, r, seen, col_owner),
                };
                if free {
                    col_owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    for i in 0..m {
        let mut seen = vec![false; m];
        if !augment(i, r, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut perm = vec![0; m];
    for (j, owner) in col_owner.iter().enumerate() {
        perm[owner.expect("perfect matching")] = j;
    }
    Some(perm)
}

/// Rebuilds `sum_k w_k P_k`.
pub fn birkhoff_reconstruct(m: usize, terms: &[(f64, Vec<usize>)]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; m]; m];
    for (w, perm) in terms {
        for (i, &j) in perm.iter().enumerate() {
            out[i][j] += w;
        }
    }
    out
}

/// Hinge thresholds `c` for the functions `t -> max(t - c, 0)`, one per
/// value of `f` or `g`.
pub fn hinge_thresholds(f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut cs: Vec<f64> = f.iter().chain(g).copied().collect();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    cs
}

/// Checks `int psi(f) dmu <= int psi(g) dmu` for every `psi` in the family.
pub fn convex_function_test<F: Fn(f64) -> f64>(
    space: &FiniteMeasureSpace,
    f: &ClassicalFunction,
    g: &ClassicalFunction,
    family: &[F],
) -> Result<bool> {
    f.check_space(space)?;
    g.check_space(space)?;
    let fv = f.real_values()?;
    let gv = g.real_values()?;
    let mu = space.masses();
    let scale = scalar_scale(&fv, &gv, mu, mu);
    for psi in family {
        let lf: f64 = fv.iter().zip(mu).map(|(v, m)| psi(*v) * m).sum();
        let lg: f64 = gv.iter().zip(mu).map(|(v, m)| psi(*v) * m).sum();
        if lf > lg + MASS_TOL * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The default family: hinges at every value of `f` and `g`, plus `t` and
/// `-t` so that equality of the integrals is enforced.
pub fn hinge_family_test(
    space: &FiniteMeasureSpace,
    f: &ClassicalFunction,
    g: &ClassicalFunction,
) -> Result<bool> {
    let fv = f.real_values()?;
    let gv = g.real_values()?;
    let mut family: Vec<Box<dyn Fn(f64) -> f64>> = vec![Box::new(|t| t), Box::new(|t| -t)];
    for c in hinge_thresholds(&fv, &gv) {
        family.push(Box::new(move |t| (t - c).max(0.0)));
    }
    convex_function_test(space, f, g, &family)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(m: usize) -> FiniteMeasureSpace {
        FiniteMeasureSpace::uniform(m, 1.0)
    }

    #[test]
    fn distribution_function_examples() {
        let s = uniform(3);
        let f = ClassicalFunction::real(&[1.0, 2.0, 3.0]);
        assert_eq!(distribution_function(&s, &f, 1.5).unwrap(), 2.0);
        assert_eq!(distribution_function(&s, &f, -10.0).unwrap(), 3.0);
        let c = ClassicalFunction::real(&[2.0, 2.0, 2.0]);
        assert_eq!(distribution_function(&s, &c, 2.0).unwrap(), 0.0);
        let z = ClassicalFunction::new(vec![C64::new(1.0, 1.0); 3]);
        assert!(matches!(
            distribution_function(&s, &z, 0.0),
            Err(Error::ComplexValued { .. })
        ));
    }

    #[test]
    fn rearrangement_examples() {
        let s = FiniteMeasureSpace::uniform(2, 0.5);
        let r = decreasing_rearrangement(&s, &ClassicalFunction::real(&[-3.0, 1.0])).unwrap();
        assert_eq!(
            r,
            vec![Step { width: 0.5, value: 1.0 }, Step { width: 0.5, value: -3.0 }]
        );
        let r = decreasing_rearrangement(&uniform(4), &ClassicalFunction::real(&[7.0; 4])).unwrap();
        assert_eq!(r, vec![Step { width: 4.0, value: 7.0 }]);
    }

    #[test]
    fn majorization_examples() {
        let s = uniform(3);
        let f = ClassicalFunction::real(&[1.0, 1.0, 1.0]);
        let g = ClassicalFunction::real(&[0.0, 1.0, 2.0]);
        assert!(classical_majorizes(&s, &f, &s, &f).unwrap());
        assert!(classical_majorizes(&s, &f, &s, &g).unwrap());
        assert!(!classical_majorizes(&s, &g, &s, &f).unwrap());
        let h = FiniteMeasureSpace::uniform(2, 0.5);
        let ft = ClassicalFunction::real(&[-3.0, 1.0]);
        let gt = ClassicalFunction::real(&[-1.0, -1.0]);
        assert!(!classical_majorizes(&h, &ft, &h, &gt).unwrap());
        let other = uniform(2);
        assert!(matches!(
            classical_majorizes(&h, &ft, &other, &gt),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn majorization_across_spaces() {
        // (2, 0) on two unit atoms against a single atom of mass 2 carrying 1.
        let a = uniform(2);
        let b = FiniteMeasureSpace::uniform(1, 2.0);
        let f = ClassicalFunction::real(&[1.0]);
        let g = ClassicalFunction::real(&[2.0, 0.0]);
        assert!(classical_majorizes(&b, &f, &a, &g).unwrap());
        assert!(!classical_majorizes(&a, &g, &b, &f).unwrap());
    }

    #[test]
    fn witness_examples() {
        let s = uniform(3);
        let g = ClassicalFunction::real(&[0.0, 1.0, 2.0]);
        let f = ClassicalFunction::real(&[1.0, 1.0, 1.0]);
        match bistochastic_witness(&s, &f, &g).unwrap() {
            WitnessOutcome::Feasible(b) => {
                let bg = b.apply_real(&[0.0, 1.0, 2.0]);
                assert!(bg.iter().all(|v| (v - 1.0).abs() < 1e-8));
            }
            other => panic!("unexpected {other:?}"),
        }
        match bistochastic_witness(&s, &g, &g).unwrap() {
            WitnessOutcome::Feasible(b) => {
                let bg = b.apply_real(&[0.0, 1.0, 2.0]);
                assert!((bg[2] - 2.0).abs() < 1e-8);
            }
            other => panic!("unexpected {other:?}"),
        }
        match bistochastic_witness(&s, &g, &f).unwrap() {
            WitnessOutcome::Infeasible(c) => {
                assert!(c.verify(s.masses(), &scalar_coords(&g, false), &scalar_coords(&f, false)))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bistochastic_validation() {
        let s = uniform(2);
        assert!(BistochasticMatrix::new(s.clone(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_ok());
        assert!(BistochasticMatrix::new(s.clone(), vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
        assert!(BistochasticMatrix::new(s, vec![vec![1.5, -0.5], vec![-0.5, 1.5]]).is_err());
        // Weighted masses: the averaging matrix preserves integrals.
        let w = FiniteMeasureSpace::from_masses(vec![1.0, 3.0]).unwrap();
        let avg = BistochasticMatrix::averaging(w.clone());
        assert!(BistochasticMatrix::new(w, avg.entries().to_vec()).is_ok());
    }

    #[test]
    fn birkhoff_examples() {
        let s = uniform(3);
        let id = BistochasticMatrix::identity(s.clone());
        let d = birkhoff_decompose(&id).unwrap();
        assert_eq!(d, vec![(1.0, vec![0, 1, 2])]);
        let avg = BistochasticMatrix::averaging(s);
        let d = birkhoff_decompose(&avg).unwrap();
        let total: f64 = d.iter().map(|t| t.0).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let rec = birkhoff_reconstruct(3, &d);
        for row in rec {
            for v in row {
                assert!((v - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let weighted = FiniteMeasureSpace::from_masses(vec![1.0, 2.0]).unwrap();
        assert_eq!(
            birkhoff_decompose(&BistochasticMatrix::identity(weighted)).unwrap_err(),
            Error::NotUniform
        );
    }

    #[test]
    fn hinge_examples() {
        let s = uniform(3);
        let f = ClassicalFunction::real(&[1.0, 1.0, 1.0]);
        let g = ClassicalFunction::real(&[0.0, 1.0, 2.0]);
        assert!(hinge_family_test(&s, &f, &g).unwrap());
        let id: [fn(f64) -> f64; 1] = [|t| t];
        assert!(convex_function_test(&s, &f, &g, &id).unwrap());
        assert!(convex_function_test(&s, &g, &f, &id).unwrap());
        let h = FiniteMeasureSpace::uniform(2, 0.5);
        let ft = ClassicalFunction::real(&[-3.0, 1.0]);
        let gt = ClassicalFunction::real(&[-1.0, -1.0]);
        let at_minus_one: [fn(f64) -> f64; 1] = [|t| (t + 1.0).max(0.0)];
        assert!(!convex_function_test(&h, &ft, &gt, &at_minus_one).unwrap());
        assert!(!hinge_family_test(&h, &ft, &gt).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let s: FiniteMeasureSpace =
            serde_json::from_str(r#"{"atoms": [0, "b"], "masses": [0.5, 1.5]}"#).unwrap();
        assert_eq!(s.atoms()[0].0, "0");
        assert!(serde_json::from_str::<FiniteMeasureSpace>(r#"{"atoms": [0], "masses": [0.0]}"#).is_err());
        let f: ClassicalFunction = serde_json::from_str(r#"{"values": [[1, 2], 3]}"#).unwrap();
        assert_eq!(f.values()[0], C64::new(1.0, 2.0));
        let back: ClassicalFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
