//! POVMs on atomic spaces, induced scalar measures, operator-valued
//! Radon-Nikodym derivatives, quantum random variables and integration.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{
    is_psd, operator_norm, pd_inverse, positive_parts, psd_sqrt, trace_pairing, ComplexOperator,
    HermitianOperator, State, C64, PSD_TOL,
};
use crate::measure::{ClassicalFunction, FiniteMeasureSpace};

/// Effects below this norm are treated as zero.
pub const ZERO_EFFECT_TOL: f64 = 1e-14;

/// Atom-indexed positive semidefinite effects of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    space: FiniteMeasureSpace,
    dim: usize,
    effects: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(space: FiniteMeasureSpace, effects: Vec<HermitianOperator>) -> Result<Self> {
        if effects.len() != space.len() {
            return Err(Error::DimMismatch {
                expected: space.len(),
                found: effects.len(),
            });
        }
        let dim = effects[0].dim();
        for e in &effects {
            if e.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
            if !is_psd(e, PSD_TOL) {
                return Err(Error::MatrixNotPsd {
                    min_eigenvalue: e.lambda_min(),
                });
            }
        }
        Ok(Self { space, dim, effects })
    }

    /// `nu = mu I`.
    pub fn scalar(space: FiniteMeasureSpace, dim: usize) -> Self {
        let effects = space
            .masses()
            .iter()
            .map(|&m| HermitianOperator::identity(dim).scale(m))
            .collect();
        Self { space, dim, effects }
    }

    pub fn space(&self) -> &FiniteMeasureSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn effect(&self, x: usize) -> &HermitianOperator {
        &self.effects[x]
    }

    /// `nu(E)` for a set of atom indices.
    pub fn measure_of(&self, atoms: &[usize]) -> HermitianOperator {
        let mut acc = HermitianOperator::zeros(self.dim);
        for &x in atoms {
            acc = acc.add(&self.effects[x]);
        }
        acc
    }

    /// `nu(X)`.
    pub fn total(&self) -> HermitianOperator {
        self.measure_of(&(0..self.len()).collect::<Vec<_>>())
    }

    /// Whether `nu(X) = I`.
    pub fn is_quantum_probability(&self) -> bool {
        let diff = self.total().sub(&HermitianOperator::identity(self.dim));
        diff.as_operator().max_abs() <= 1e-12
    }

    /// Whether every effect equals `mu(x) I` for the space's masses.
    pub fn is_scalar(&self) -> bool {
        self.effects.iter().zip(self.space.masses()).all(|(e, &m)| {
            let diff = e.sub(&HermitianOperator::identity(self.dim).scale(m));
            diff.as_operator().max_abs() <= 1e-12 * (1.0 + m)
        })
    }

    /// Atoms whose effect is nonzero. Atoms with a zero effect are null for
    /// every induced measure and take no part in any computation.
    pub fn is_active(&self, x: usize) -> bool {
        self.effects[x].as_operator().max_abs() > ZERO_EFFECT_TOL
    }
}

/// `nu_rho(x) = tr(rho nu(x))`. When `full_rank` is set, `rho` must be full
/// rank and no nonzero effect may receive zero mass.
pub fn induced_measure(nu: &Povm, rho: &State, full_rank: bool) -> Result<Vec<f64>> {
    if rho.dim() != nu.dim() {
        return Err(Error::DimMismatch {
            expected: nu.dim(),
            found: rho.dim(),
        });
    }
    if full_rank {
        check_full_rank(rho)?;
    }
    let mut out = Vec::with_capacity(nu.len());
    for (x, e) in nu.effects().iter().enumerate() {
        let m = trace_pairing(rho.operator(), e.as_operator())?.re.max(0.0);
        let effect_norm = e.norm();
        if full_rank && effect_norm > ZERO_EFFECT_TOL && m <= 1e-14 * effect_norm {
            return Err(Error::InconsistentNullSet {
                atom: x,
                mass: m,
                effect_norm,
            });
        }
        out.push(m);
    }
    Ok(out)
}

fn check_full_rank(rho: &State) -> Result<()> {
    let min_eigenvalue = rho.min_eigenvalue();
    if min_eigenvalue <= 1e-12 {
        return Err(Error::FullRankRequired { min_eigenvalue });
    }
    Ok(())
}

/// `dnu/dnu_rho` at every atom together with its square root.
#[derive(Clone, Debug)]
pub struct RnDerivative {
    rho: State,
    induced: Vec<f64>,
    density: Vec<HermitianOperator>,
    sqrt_density: Vec<HermitianOperator>,
}

impl RnDerivative {
    pub fn rho(&self) -> &State {
        &self.rho
    }

    /// `nu_rho(x)` per atom.
    pub fn induced(&self) -> &[f64] {
        &self.induced
    }

    pub fn density(&self, x: usize) -> &HermitianOperator {
        &self.density[x]
    }

    pub fn sqrt_density(&self, x: usize) -> &HermitianOperator {
        &self.sqrt_density[x]
    }

    pub fn len(&self) -> usize {
        self.induced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.induced.is_empty()
    }

    pub fn is_active(&self, x: usize) -> bool {
        self.induced[x] > 0.0
    }

    /// `max_x ||D(x)||` over atoms of positive mass.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len())
            .filter(|&x| self.is_active(x))
            .map(|x| self.density[x].norm())
            .fold(0.0, f64::max)
    }

    /// `max_x ||D(x)^{-1}||`, or `None` if some active `D(x)` is singular.
    pub fn inverse_sup_norm(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for x in (0..self.len()).filter(|&x| self.is_active(x)) {
            let d = &self.density[x];
            if d.lambda_min() <= 1e-12 * d.norm() {
                return None;
            }
            worst = worst.max(pd_inverse(d)?.norm());
        }
        Some(worst)
    }

    pub fn all_invertible(&self) -> bool {
        self.inverse_sup_norm().is_some()
    }
}

/// Radon-Nikodym derivative `D(x) = nu(x) / nu_rho(x)` for a full-rank `rho`.
pub fn rn_derivative(nu: &Povm, rho: &State) -> Result<RnDerivative> {
    let induced = induced_measure(nu, rho, true)?;
    let mut density = Vec::with_capacity(nu.len());
    let mut sqrt_density = Vec::with_capacity(nu.len());
    for (x, e) in nu.effects().iter().enumerate() {
        if !nu.is_active(x) {
            density.push(HermitianOperator::zeros(nu.dim()));
            sqrt_density.push(HermitianOperator::zeros(nu.dim()));
            continue;
        }
        if induced[x] <= 0.0 {
            return Err(Error::DivisionByZeroMass { atom: x });
        }
        let d = e.scale(1.0 / induced[x]);
        sqrt_density.push(psd_sqrt(&d, PSD_TOL)?);
        density.push(d);
    }
    Ok(RnDerivative {
        rho: rho.clone(),
        induced,
        density,
        sqrt_density,
    })
}

/// Atom-indexed operators `f(x)` of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRandomVariable {
    dim: usize,
    values: Vec<ComplexOperator>,
}

impl QuantumRandomVariable {
    pub fn new(values: Vec<ComplexOperator>) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::InvalidInput("quantum random variable has no atoms".into()));
        };
        let dim = first.dim();
        for v in &values {
            v.check_dim(dim)?;
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { dim, values })
    }

    pub fn from_hermitian(values: Vec<HermitianOperator>) -> Result<Self> {
        Self::new(values.into_iter().map(|h| h.into_operator()).collect())
    }

    /// `x -> c I`.
    pub fn constant_identity(m: usize, dim: usize, c: f64) -> Self {
        Self {
            dim,
            values: vec![ComplexOperator::identity(dim).scale_real(c); m],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[ComplexOperator] {
        &self.values
    }

    pub fn value(&self, x: usize) -> &ComplexOperator {
        &self.values[x]
    }

    pub fn check_atoms(&self, m: usize) -> Result<()> {
        if self.len() != m {
            return Err(Error::DimMismatch {
                expected: m,
                found: self.len(),
            });
        }
        Ok(())
    }

    pub fn check_povm(&self, nu: &Povm) -> Result<()> {
        self.check_atoms(nu.len())?;
        if self.dim != nu.dim() {
            return Err(Error::DimMismatch {
                expected: nu.dim(),
                found: self.dim,
            });
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(&ComplexOperator) -> ComplexOperator) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map(|v| v.adjoint())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v.scale(c))
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.values.iter().all(|v| v.is_hermitian(crate::linalg::HERMITIAN_TOL))
    }

    /// The values as Hermitian operators, failing at the first atom that is
    /// not self-adjoint.
    pub fn hermitian_values(&self) -> Result<Vec<HermitianOperator>> {
        self.values
            .iter()
            .enumerate()
            .map(|(atom, v)| HermitianOperator::new(v.clone()).map_err(|_| Error::NotSelfAdjoint { atom }))
            .collect()
    }

    /// `(f + f*) / 2` pointwise.
    pub fn real_part(&self) -> Vec<HermitianOperator> {
        self.values.iter().map(|v| v.hermitian_part()).collect()
    }

    /// `(f - f*) / 2i` pointwise.
    pub fn imaginary_part(&self) -> Vec<HermitianOperator> {
        self.values.iter().map(|v| v.imaginary_part()).collect()
    }

    /// `|f(x)|` pointwise for self-adjoint `f`.
    pub fn abs(&self) -> Result<Self> {
        let hv = self.hermitian_values()?;
        Self::from_hermitian(hv.iter().map(|h| positive_parts(h).abs).collect())
    }

    /// `x -> ||f(x)|| I`.
    pub fn pointwise_norm_identity(&self) -> Self {
        self.map(|v| ComplexOperator::identity(v.dim()).scale_real(operator_norm(v)))
    }

    /// `x -> (sum_ij |f_ij(x)|) I`.
    pub fn entry_sum_identity(&self) -> Self {
        self.map(|v| ComplexOperator::identity(v.dim()).scale_real(v.entry_abs_sum()))
    }

    /// Pointwise product with a scalar function.
    pub fn mul_scalar(&self, g: &ClassicalFunction) -> Result<Self> {
        self.check_atoms(g.len())?;
        Ok(Self {
            dim: self.dim,
            values: self.values.iter().zip(g.values()).map(|(v, c)| v.scale(*c)).collect(),
        })
    }

    pub fn left_mul(&self, a: &ComplexOperator) -> Result<Self> {
        a.check_dim(self.dim)?;
        Ok(self.map(|v| a.matmul(v)))
    }

    pub fn right_mul(&self, a: &ComplexOperator) -> Result<Self> {
        a.check_dim(self.dim)?;
        Ok(self.map(|v| v.matmul(a)))
    }
}

impl Serialize for QuantumRandomVariable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("QuantumRandomVariable", 2)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for QuantumRandomVariable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dim: Option<usize>,
            values: Vec<ComplexOperator>,
        }
        let r = Repr::deserialize(d)?;
        let f = QuantumRandomVariable::new(r.values).map_err(serde::de::Error::custom)?;
        if let Some(dim) = r.dim {
            if dim != f.dim {
                return Err(serde::de::Error::custom(format!("declared dim {dim}, values have dim {}", f.dim)));
            }
        }
        Ok(f)
    }
}

/// Scalarization `f_s(x) = tr(s D(x)^{1/2} f(x) D(x)^{1/2})`; zero on null atoms.
pub fn scalarize(f: &QuantumRandomVariable, d: &RnDerivative, s: &State) -> Result<ClassicalFunction> {
    f.check_atoms(d.len())?;
    s.operator().as_operator().check_dim(f.dim())?;
    let mut out = Vec::with_capacity(f.len());
    for x in 0..f.len() {
        if !d.is_active(x) {
            out.push(C64::new(0.0, 0.0));
            continue;
        }
        let r = d.sqrt_density(x).as_operator();
        let inner = r.matmul(f.value(x)).matmul(r);
        out.push(trace_pairing(s.operator(), &inner)?);
    }
    Ok(ClassicalFunction::new(out))
}

/// `int f dnu = sum_x nu_rho(x) D(x)^{1/2} f(x) D(x)^{1/2}`.
pub fn integrate_with(f: &QuantumRandomVariable, d: &RnDerivative) -> Result<ComplexOperator> {
    f.check_atoms(d.len())?;
    let mut acc = ComplexOperator::zeros(f.dim());
    for x in 0..f.len() {
        if !d.is_active(x) {
            continue;
        }
        let r = d.sqrt_density(x).as_operator();
        acc += &r.matmul(f.value(x)).matmul(r).scale_real(d.induced()[x]);
    }
    Ok(acc)
}

/// POVM integral computed through the derivative at `rho` (the maximally
/// mixed state when `None`); the result does not depend on the choice.
pub fn integrate(f: &QuantumRandomVariable, nu: &Povm, rho: Option<&State>) -> Result<ComplexOperator> {
    f.check_povm(nu)?;
    let default = State::maximally_mixed(nu.dim());
    let d = rn_derivative(nu, rho.unwrap_or(&default))?;
    integrate_with(f, &d)
}

/// `max ||f(x)||` over atoms of positive induced mass.
pub fn linf_norm(f: &QuantumRandomVariable, induced: &[f64]) -> Result<f64> {
    f.check_atoms(induced.len())?;
    Ok(f.values()
        .iter()
        .zip(induced)
        .filter(|(_, m)| **m > 0.0)
        .map(|(v, _)| operator_norm(v))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn nine_example() -> (Povm, QuantumRandomVariable) {
        let space = FiniteMeasureSpace::uniform(2, 1.0);
        let nu = Povm::scalar(space, 2);
        let f = QuantumRandomVariable::new(vec![
            ComplexOperator::from_real(&[&[4.0, 4.0], &[4.0, 4.0]]).unwrap(),
            ComplexOperator::diag(&[3.0, -3.0]),
        ])
        .unwrap();
        (nu, f)
    }

    #[test]
    fn induced_measure_examples() {
        let space = FiniteMeasureSpace::from_masses(vec![0.3, 0.7]).unwrap();
        let nu = Povm::scalar(space, 3);
        let rho = State::new(HermitianOperator::diag(&[0.5, 0.3, 0.2])).unwrap();
        let m = induced_measure(&nu, &rho, true).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-15 && (m[1] - 0.7).abs() < 1e-15);

        let (nu, _) = nine_example();
        let m = induced_measure(&nu, &State::maximally_mixed(2), true).unwrap();
        assert_eq!(m, vec![1.0, 1.0]);

        let space = FiniteMeasureSpace::uniform(1, 1.0);
        let nu = Povm::new(space, vec![HermitianOperator::diag(&[1.0, 0.0])]).unwrap();
        let rho = State::new(HermitianOperator::diag(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            induced_measure(&nu, &rho, true),
            Err(Error::FullRankRequired { .. })
        ));
        assert_eq!(induced_measure(&nu, &rho, false).unwrap(), vec![0.0]);
    }

    #[test]
    fn derivative_examples() {
        let space = FiniteMeasureSpace::from_masses(vec![0.25, 0.75]).unwrap();
        let nu = Povm::scalar(space, 2);
        let rho = State::new(HermitianOperator::diag(&[0.9, 0.1])).unwrap();
        let d = rn_derivative(&nu, &rho).unwrap();
        for x in 0..2 {
            let diff = d.density(x).sub(&HermitianOperator::identity(2));
            assert!(diff.as_operator().max_abs() < 1e-14);
        }
        let q = HermitianOperator::from_real(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap();
        let nu = Povm::new(FiniteMeasureSpace::uniform(1, 1.0), vec![q.clone()]).unwrap();
        let d = rn_derivative(&nu, &rho).unwrap();
        let expected = q.scale(1.0 / (0.9 * 2.0 + 0.1 * 1.0));
        assert!(d.density(0).sub(&expected).as_operator().max_abs() < 1e-14);
        // tr(rho D(x)) = 1 on atoms of positive mass.
        assert!((trace_pairing(rho.operator(), d.density(0).as_operator()).unwrap().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weighted_diagonal_derivative() {
        // Effects diag(mu_x, 2^{x/2} mu_x) with maximally mixed rho.
        let masses: Vec<f64> = (1..=3).map(|i| 0.5f64.powi(i)).collect();
        let space = FiniteMeasureSpace::from_masses(masses.clone()).unwrap();
        let effects = (0..3)
            .map(|x| HermitianOperator::diag(&[masses[x], 2f64.powf(x as f64 / 2.0) * masses[x]]))
            .collect();
        let nu = Povm::new(space, effects).unwrap();
        let d = rn_derivative(&nu, &State::maximally_mixed(2)).unwrap();
        for x in 0..3 {
            let w = 2f64.powf(x as f64 / 2.0);
            let norm = 2.0 / (1.0 + w);
            let expected = HermitianOperator::diag(&[norm, w * norm]);
            assert!(d.density(x).sub(&expected).as_operator().max_abs() < 1e-14);
        }
    }

    #[test]
    fn scalarization_examples() {
        let (nu, f) = nine_example();
        let d = rn_derivative(&nu, &State::maximally_mixed(2)).unwrap();
        let s = State::new(HermitianOperator::diag(&[1.0, 0.0])).unwrap();
        let fs = scalarize(&f, &d, &s).unwrap();
        assert_eq!(fs.real_values().unwrap(), vec![4.0, 3.0]);

        // Joe-Verducci f with s = diag(a, b).
        let space = FiniteMeasureSpace::uniform(2, 0.5);
        let nu = Povm::scalar(space, 2);
        let f = QuantumRandomVariable::new(vec![ComplexOperator::diag(&[1.0, 4.0]), ComplexOperator::diag(&[3.0, 2.0])])
            .unwrap();
        let d = rn_derivative(&nu, &State::maximally_mixed(2)).unwrap();
        let (a, b) = (0.3, 0.7);
        let s = State::new(HermitianOperator::diag(&[a, b])).unwrap();
        let fs = scalarize(&f, &d, &s).unwrap().real_values().unwrap();
        assert!((fs[0] - (a + 4.0 * b)).abs() < 1e-14);
        assert!((fs[1] - (3.0 * a + 2.0 * b)).abs() < 1e-14);
    }

    #[test]
    fn integration_examples() {
        let (nu, f) = nine_example();
        let i = integrate(&f, &nu, None).unwrap();
        let expected = ComplexOperator::from_real(&[&[7.0, 4.0], &[4.0, 1.0]]).unwrap();
        assert!((&i - &expected).max_abs() < 1e-14);
        assert!((operator_norm(&i) - 9.0).abs() < 1e-12);
        let abs = integrate(&f.abs().unwrap(), &nu, None).unwrap();
        let expected = ComplexOperator::from_real(&[&[7.0, 4.0], &[4.0, 7.0]]).unwrap();
        assert!((&abs - &expected).max_abs() < 1e-12);
        assert!((operator_norm(&abs) - 11.0).abs() < 1e-12);

        // Indicator of E times I integrates to nu(E).
        let space = FiniteMeasureSpace::uniform(3, 1.0);
        let effects = vec![
            HermitianOperator::diag(&[0.2, 0.5]),
            HermitianOperator::from_real(&[&[0.5, 0.1], &[0.1, 0.3]]).unwrap(),
            HermitianOperator::diag(&[0.3, 0.2]),
        ];
        let nu = Povm::new(space, effects).unwrap();
        let chi = QuantumRandomVariable::new(vec![
            ComplexOperator::identity(2),
            ComplexOperator::zeros(2),
            ComplexOperator::identity(2),
        ])
        .unwrap();
        let i = integrate(&chi, &nu, None).unwrap();
        assert!((&i - nu.measure_of(&[0, 2]).as_operator()).max_abs() < 1e-14);
    }

    #[test]
    fn linf_examples() {
        let f = QuantumRandomVariable::constant_identity(3, 2, 1.0);
        assert_eq!(linf_norm(&f, &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        let u = ComplexOperator::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let g = QuantumRandomVariable::new(vec![u; 4]).unwrap();
        assert!((linf_norm(&g, &[0.5, 0.25, 0.125, 0.125]).unwrap() - 1.0).abs() < 1e-14);
        let h = QuantumRandomVariable::new(vec![ComplexOperator::identity(2), ComplexOperator::identity(2).scale_real(9.0)])
            .unwrap();
        assert_eq!(linf_norm(&h, &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn zero_effects_are_inactive() {
        let space = FiniteMeasureSpace::uniform(2, 1.0);
        let nu = Povm::new(space, vec![HermitianOperator::identity(2), HermitianOperator::zeros(2)]).unwrap();
        let d = rn_derivative(&nu, &State::maximally_mixed(2)).unwrap();
        assert!(!d.is_active(1));
        let f = QuantumRandomVariable::new(vec![
            ComplexOperator::identity(2),
            ComplexOperator::from_rows(vec![vec![c64(5.0, 1.0), c64(0.0, 0.0)], vec![c64(0.0, 0.0), c64(1.0, 0.0)]])
                .unwrap(),
        ])
        .unwrap();
        let i = integrate_with(&f, &d).unwrap();
        assert!((&i - &ComplexOperator::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn non_psd_effect_rejected() {
        let space = FiniteMeasureSpace::uniform(1, 1.0);
        assert!(matches!(
            Povm::new(space, vec![HermitianOperator::diag(&[1.0, -0.5])]),
            Err(Error::MatrixNotPsd { .. })
        ));
    }
}
