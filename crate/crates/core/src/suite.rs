//! Seeded randomized checks of the inequalities, equivalences and
//! invariances proved for quantum random variables.
//!
//! Every section draws its instances from a ChaCha8 stream keyed by
//! `(section, trial)`, so a report depends only on the seed and the trial
//! count and is byte-identical across runs.
//!
//! Seminorm comparisons are certified: a seminorm on the larger side of an
//! inequality enters through its SDP upper value, one on the smaller side
//! through its dual lower bound. A reported violation therefore cannot be a
//! solver artifact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::l1::{
    bracket, conjugate_to_scalar, detect_positive, l1_certificate, l1_lower_states, mult_operator,
    mult_operator_conjugated, mult_scalar, L1Certificate, Side,
};
use crate::linalg::{operator_norm, psd_sqrt, ComplexOperator, HermitianOperator, State, C64, PSD_TOL};
use crate::majorization::{
    apply_bistochastic, implication_suite, komiya_separate, psi_phi, KomiyaOutcome, MajorizationOptions,
};
use crate::measure::{
    bistochastic_witness, birkhoff_decompose, hinge_family_test, majorizes_values, BistochasticMatrix,
    ClassicalFunction, FiniteMeasureSpace, WitnessOutcome,
};
use crate::povm::{integrate, linf_norm, rn_derivative, Povm, QuantumRandomVariable};
use crate::random::{
    full_rank_state, gaussian_hermitian, ginibre, ginibre_state, haar_pure_state, random_bistochastic,
    random_masses, random_povm, random_qrv, sinkhorn_bistochastic,
};

/// Relative slack allowed on every inequality.
pub const REL_SLACK: f64 = 1e-7;
/// Relative tolerance for the bracket-modularity identity.
pub const MODULARITY_TOL: f64 = 1e-8;
/// Relative tolerance for agreement of integrals across states.
pub const RHO_TOL: f64 = 1e-9;
/// Residual allowed when recombining a Birkhoff decomposition.
pub const BIRKHOFF_TOL: f64 = 1e-8;
/// Slack on `psi_phi(f) <= psi_phi(g)` for `f = Bg`.
pub const KOMIYA_SLACK: f64 = 1e-8;

const SEMINORM_TOL: f64 = 1e-9;
const MAX_RECORDED_FAILURES: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Lemmas = 1,
    Equivalence = 2,
    Birkhoff = 3,
    Komiya = 4,
    RhoInvariance = 5,
    Implications = 6,
}

/// Instance counts per section.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub trials: usize,
    pub lemma_instances: usize,
    pub scalar_pairs: usize,
    pub birkhoff_matrices: usize,
    pub komiya_positives: usize,
    pub komiya_negatives: usize,
    pub komiya_functionals: usize,
    pub rho_instances: usize,
    pub rho_states: usize,
    pub implication_pairs: usize,
}

impl SuiteConfig {
    /// Section sizes derived from one trial count; `trials = 200` gives
    /// 200 lemma instances, 200 scalar pairs, 50 Birkhoff matrices, 100
    /// positive and 50 negative Komiya pairs and 20 integration instances.
    pub fn new(seed: u64, trials: usize) -> Self {
        Self {
            seed,
            trials,
            lemma_instances: trials,
            scalar_pairs: trials,
            birkhoff_matrices: trials / 4,
            komiya_positives: trials / 2,
            komiya_negatives: trials / 4,
            komiya_functionals: 50,
            rho_instances: trials / 10,
            rho_states: 20,
            implication_pairs: trials / 20,
        }
    }
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self::new(42, 200)
    }
}

/// Counts for one named check.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckTally {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Largest normalized excess `(lhs - rhs) / max(1, |rhs|)` seen; negative
    /// when every instance held strictly.
    pub worst_excess: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Failure {
    pub check: String,
    pub trial: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckTally>,
    pub failures: Vec<Failure>,
    pub total_checked: usize,
    pub total_violations: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.total_violations == 0
    }

    pub fn check(&self, name: &str) -> Option<&CheckTally> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Tallies whose name starts with `prefix`.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a CheckTally> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

struct Recorder {
    checks: Vec<CheckTally>,
    failures: Vec<Failure>,
    trial: usize,
}

impl Recorder {
    fn tally(&mut self, name: &str) -> &mut CheckTally {
        let i = match self.checks.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.checks.push(CheckTally {
                    name: name.to_string(),
                    checked: 0,
                    violations: 0,
                    worst_excess: f64::NEG_INFINITY,
                });
                self.checks.len() - 1
            }
        };
        &mut self.checks[i]
    }

    fn fail(&mut self, name: &str, detail: String) {
        if self.failures.len() < MAX_RECORDED_FAILURES {
            self.failures.push(Failure {
                check: name.to_string(),
                trial: self.trial,
                detail,
            });
        }
    }

    /// `lhs <= rhs` up to `slack * max(1, |rhs|)`.
    fn le_with(&mut self, name: &str, lhs: f64, rhs: f64, slack: f64) {
        let scale = rhs.abs().max(1.0);
        let excess = (lhs - rhs) / scale;
        let ok = lhs.is_finite() && rhs.is_finite() && excess <= slack;
        let t = self.tally(name);
        t.checked += 1;
        t.worst_excess = t.worst_excess.max(excess);
        if !ok {
            t.violations += 1;
            self.fail(name, format!("lhs {lhs:.12e} exceeds rhs {rhs:.12e}"));
        }
    }

    fn le(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.le_with(name, lhs, rhs, REL_SLACK);
    }

    /// A difference `diff` that should vanish relative to `scale`.
    fn small(&mut self, name: &str, diff: f64, scale: f64, tol: f64) {
        self.le_with(name, diff / scale.max(1.0), 0.0, tol);
    }

    fn truth(&mut self, name: &str, ok: bool, detail: impl FnOnce() -> String) {
        let t = self.tally(name);
        t.checked += 1;
        let excess = if ok { 0.0 } else { 1.0 };
        t.worst_excess = t.worst_excess.max(excess);
        if !ok {
            t.violations += 1;
            let d = detail();
            self.fail(name, d);
        }
    }

    fn error(&mut self, name: &str, err: &crate::error::Error) {
        self.truth(name, false, || format!("error: {err}"));
    }
}

fn stream(seed: u64, section: Section, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((section as u64) << 32) | trial as u64);
    rng
}

/// Seminorm with certified bounds; `None` (recorded as a failure) if the
/// solver errors.
struct Norm {
    lower: f64,
    upper: f64,
}

fn seminorm(rec: &mut Recorder, what: &str, f: &QuantumRandomVariable, nu: &Povm) -> Option<Norm> {
    match l1_certificate(f, nu, SEMINORM_TOL) {
        Ok(cert) => {
            match cert.verify(f, nu) {
                Ok(check) => rec.truth("seminorm certificates re-verify", check.valid, || {
                    format!("{what}: {check:?}")
                }),
                Err(e) => rec.error("seminorm certificates re-verify", &e),
            }
            let L1Certificate {
                value,
                dual_lower_bound,
                ..
            } = cert;
            Some(Norm {
                lower: dual_lower_bound.min(value),
                upper: value,
            })
        }
        Err(e) => {
            rec.error(&format!("seminorm solve ({what})"), &e);
            None
        }
    }
}

fn norm_of(a: &ComplexOperator) -> f64 {
    operator_norm(a)
}

fn diff_norm(a: &ComplexOperator, b: &ComplexOperator) -> f64 {
    (0..a.dim())
        .flat_map(|i| (0..a.dim()).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - b[(i, j)]).norm())
        .fold(0.0, f64::max)
}

fn pointwise_product(f: &QuantumRandomVariable, g: &QuantumRandomVariable) -> Result<QuantumRandomVariable> {
    QuantumRandomVariable::new(f.values().iter().zip(g.values()).map(|(a, b)| a.matmul(b)).collect())
}

fn random_scalar<R: Rng>(m: usize, rng: &mut R) -> ClassicalFunction {
    ClassicalFunction::new((0..m).map(|_| C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect())
}

/// `sup |g|` over atoms of positive induced mass.
fn ess_sup(g: &ClassicalFunction, induced: &[f64]) -> f64 {
    g.values()
        .iter()
        .zip(induced)
        .filter(|(_, m)| **m > 0.0)
        .map(|(z, _)| z.norm())
        .fold(0.0, f64::max)
}

fn scale_povm(nu: &Povm, c: f64) -> Povm {
    Povm::new(nu.space().clone(), nu.effects().iter().map(|e| e.scale(c)).collect()).expect("scaled POVM")
}

/// Checks on one instance with a general POVM.
fn general_instance(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let m = rng.random_range(1..=6);
    let d = rng.random_range(1..=4);
    let space = FiniteMeasureSpace::from_masses(random_masses(m, rng))?;
    let singular = d >= 2 && m >= 2 && rng.random_bool(0.3);
    let mut nu = random_povm(space, d, singular, rng);
    if rng.random_bool(0.5) {
        nu = scale_povm(&nu, rng.random_range(0.5..2.0));
    }
    let rho = full_rank_state(d, 0.2, rng);
    let dens = rn_derivative(&nu, &rho)?;
    let induced = dens.induced().to_vec();
    let f = random_qrv(m, d, false, rng);
    let h = random_qrv(m, d, true, rng);
    let g = random_scalar(m, rng);
    let n = d as f64;

    let int_f = integrate(&f, &nu, None)?;
    let int_f_norm = norm_of(&int_f);

    let by_density: f64 = (0..m)
        .filter(|&x| dens.is_active(x))
        .map(|x| norm_of(f.value(x)) * dens.density(x).norm() * induced[x])
        .sum();
    rec.le("integral bounded by density-weighted norm", int_f_norm, by_density);

    let int_h = norm_of(&integrate(&h, &nu, None)?);
    let int_norm_h = norm_of(&integrate(&h.pointwise_norm_identity(), &nu, None)?);
    rec.le("self-adjoint integral bounded by norm integral", int_h, int_norm_h);

    let int_norm_f = norm_of(&integrate(&f.pointwise_norm_identity(), &nu, None)?);
    let int_entries_f = norm_of(&integrate(&f.entry_sum_identity(), &nu, None)?);
    rec.le("entry-sum sandwich (lower)", int_norm_f, int_entries_f);
    rec.le("entry-sum sandwich (upper)", int_entries_f, n * n * int_norm_f);

    let Some(nf) = seminorm(rec, "f", &f, &nu) else { return Ok(()) };

    let mut states: Vec<State> = (0..4).map(|_| haar_pure_state(d, rng)).collect();
    states.extend((0..4).map(|_| ginibre_state(d, rng)));
    let scalarized = l1_lower_states(&f, &dens, &states)?;
    rec.le("scalarizations bounded by seminorm", scalarized, nf.upper);

    rec.le("integral bounded by twice the seminorm", int_f_norm, 2.0 * nf.upper);

    if let Some(na) = seminorm(rec, "adjoint", &f.adjoint(), &nu) {
        rec.le("adjoint invariance", na.lower, nf.upper);
        rec.le("adjoint invariance", nf.lower, na.upper);
    }

    let total_norm = nu.total().norm();
    rec.le(
        "bounded functions: seminorm by sup norm",
        nf.lower,
        2.0 * linf_norm(&f, &induced)? * total_norm,
    );

    let g_sup = ess_sup(&g, &induced);
    if let Some(nfg) = seminorm(rec, "scalar product", &mult_scalar(&f, &g)?, &nu) {
        rec.le("scalar multiplier bound", nfg.lower, 2.0 * nf.upper * g_sup);
    }
    let br = norm_of(&bracket(&f, &g, &nu)?);
    rec.le("bracket bound", br, 4.0 * nf.upper * g_sup);

    let Some(inv_sup) = dens.inverse_sup_norm() else { return Ok(()) };
    let condition = dens.sup_norm() * inv_sup;

    if let Some(nh) = seminorm(rec, "self-adjoint", &h, &nu) {
        let abs_h = norm_of(&integrate(&h.abs()?, &nu, None)?);
        rec.le("comparability chain: seminorm by |f|", nh.lower, abs_h);
        rec.le("comparability chain: |f| by norm", abs_h, int_norm_h);
        rec.le("comparability chain: norm by condition", int_norm_h, n * condition * nh.upper);

        // G = h - tI commutes with h, so hG is self-adjoint and the
        // comparability chain applies to it.
        let t = rng.random_range(-1.0..1.0);
        let shifted = QuantumRandomVariable::new(
            h.values().iter().map(|v| {
                let mut out = v.clone();
                out += &ComplexOperator::identity(d).scale_real(-t);
                out
            }).collect(),
        )?;
        if let Some(np) = seminorm(rec, "self-adjoint product", &pointwise_product(&h, &shifted)?, &nu) {
            let bound = n * condition * nh.upper * linf_norm(&shifted, &induced)?;
            rec.le("operator multiplier bound (self-adjoint product)", np.lower, bound);
        }
    }

    let a = ginibre(d, rng);
    let a_norm = norm_of(&a);
    let side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
    let conj = mult_operator_conjugated(&a, &f, &dens, side)?;
    if let Some(nc) = seminorm(rec, "conjugated multiplier", &conj, &nu) {
        rec.le("conjugated multiplier bound", nc.lower, 4.0 * (1.0 + a_norm * a_norm) * nf.upper);
    }

    let (fc, scalar_nu) = conjugate_to_scalar(&f, &dens)?;
    if let Some(ns) = seminorm(rec, "conjugated to scalar", &fc, &scalar_nu) {
        rec.le("conjugation to scalar measure preserves seminorm", ns.lower, nf.upper);
        rec.le("conjugation to scalar measure preserves seminorm", nf.lower, ns.upper);
    }

    let big_g = random_qrv(m, d, false, rng);
    if let Some(np) = seminorm(rec, "operator product", &pointwise_product(&f, &big_g)?, &nu) {
        // For general f the comparability chain costs a factor 2 at each of
        // its two uses (real and imaginary parts), hence the 4.
        let bound = 4.0 * n * condition * nf.upper * linf_norm(&big_g, &induced)?;
        rec.le("operator multiplier bound (general product, factor 4)", np.lower, bound);
    }
    Ok(())
}

/// Positivity detection against a directly computed spectrum.
fn positivity_instance(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let m = rng.random_range(1..=6);
    let d = rng.random_range(1..=4);
    let space = FiniteMeasureSpace::from_masses(random_masses(m, rng))?;
    let nu = random_povm(space, d, d >= 2 && rng.random_bool(0.3), rng);
    let h = random_qrv(m, d, true, rng);
    let square = pointwise_product(&h, &h)?;
    let rep = detect_positive(&square, &nu)?;
    rec.truth("positivity detection (positive)", rep.positive, || "square reported non-positive".into());

    let rep = detect_positive(&h, &nu)?;
    let expected = (0..m).filter(|&x| nu.is_active(x)).all(|x| {
        let v = h.value(x).hermitian_part();
        v.lambda_min() >= -PSD_TOL * (1.0 + v.norm())
    });
    rec.truth("positivity detection (general)", rep.positive == expected, || {
        format!("reported {} expected {expected}", rep.positive)
    });
    if let Some((x, v)) = rep.witness {
        let v: Vec<C64> = v.iter().map(|p| C64::new(p[0], p[1])).collect();
        let root = psd_sqrt(nu.effect(x), PSD_TOL)?;
        let b = root.as_operator().matmul(h.value(x)).matmul(root.as_operator());
        let bv = b.mul_vec(&v);
        let q: C64 = v.iter().zip(&bv).map(|(a, b)| a.conj() * b).sum();
        rec.truth("positivity witness is negative", q.re < 0.0, || format!("pairing {q}"));
    }
    Ok(())
}

/// Checks on one instance with `nu = mu I`.
fn scalar_instance(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let m = rng.random_range(1..=6);
    let d = rng.random_range(1..=4);
    let uniform = rng.random_bool(0.5);
    let space = if uniform {
        FiniteMeasureSpace::uniform(m, rng.random_range(0.2..2.0))
    } else {
        FiniteMeasureSpace::from_masses(random_masses(m, rng))?
    };
    let nu = Povm::scalar(space.clone(), d);
    let f = random_qrv(m, d, false, rng);
    let a = ginibre(d, rng);
    let a_factor = 4.0 * (1.0 + norm_of(&a).powi(2));

    let int_f = norm_of(&integrate(&f, &nu, None)?);
    let weighted: f64 = (0..m).map(|x| norm_of(f.value(x)) * space.mass(x)).sum();
    rec.le("integral bounded by norm integral (scalar measure)", int_f, weighted);

    let Some(nf) = seminorm(rec, "f (scalar measure)", &f, &nu) else { return Ok(()) };
    for (side, name) in [(Side::Left, "left"), (Side::Right, "right")] {
        let af = mult_operator(&a, &f, side)?;
        if let Some(na) = seminorm(rec, name, &af, &nu) {
            rec.le(&format!("{name} operator multiplier bound"), na.lower, a_factor * nf.upper);
        }
    }

    let b = random_bistochastic(&space, rng);
    let bf = apply_bistochastic(&b, &f)?;
    let b_adj = apply_bistochastic(&b, &f.adjoint())?;
    let adj_gap = (0..m).map(|x| diff_norm(b_adj.value(x), &bf.value(x).adjoint())).fold(0.0, f64::max);
    rec.small("bistochastic self-adjointness", adj_gap, 1.0 + f.values().iter().map(|v| v.max_abs()).fold(0.0, f64::max), 1e-12);

    let int_gap = diff_norm(&integrate(&bf, &nu, None)?, &integrate(&f, &nu, None)?);
    rec.small("bistochastic integral preservation", int_gap, 1.0 + weighted, 1e-12);

    if let Some(nb) = seminorm(rec, "bistochastic image", &bf, &nu) {
        rec.le("bistochastic 1-contractivity", nb.lower, nf.upper);
    }

    let h = random_qrv(m, d, true, rng);
    let bh = apply_bistochastic(&b, &h)?;
    let masses = space.masses();
    rec.le("bistochastic sup-contractivity", linf_norm(&bh, masses)?, linf_norm(&h, masses)?);

    // <B(phi A), g I> = <B(phi), g> A for scalar phi and g.
    let phi = random_scalar(m, rng);
    let g = random_scalar(m, rng);
    let phi_a = QuantumRandomVariable::new(phi.values().iter().map(|z| a.scale(*z)).collect())?;
    let lhs = bracket(&apply_bistochastic(&b, &phi_a)?, &g, &nu)?;
    let b_phi = b.apply(&phi);
    let pairing: C64 = (0..m).map(|x| b_phi.values()[x] * g.values()[x] * space.mass(x)).sum();
    let rhs = a.scale(pairing);
    rec.small("bracket modularity", diff_norm(&lhs, &rhs), norm_of(&rhs), MODULARITY_TOL);
    Ok(())
}

fn lemma_section(rec: &mut Recorder, cfg: &SuiteConfig) {
    for trial in 0..cfg.lemma_instances {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::Lemmas, trial);
        for (name, run) in [
            ("general instance", general_instance as fn(&mut Recorder, &mut ChaCha8Rng) -> Result<()>),
            ("scalar instance", scalar_instance),
            ("positivity instance", positivity_instance),
        ] {
            if let Err(e) = run(rec, &mut rng) {
                rec.error(name, &e);
            }
        }
    }
}

/// Random scalar pair on a uniform space; about half are majorized. Small
/// integer values produce ties in the partial sums.
fn scalar_pair(rng: &mut ChaCha8Rng) -> (FiniteMeasureSpace, Vec<f64>, Vec<f64>) {
    let m = rng.random_range(1..=8);
    let space = FiniteMeasureSpace::uniform(m, 1.0);
    let integer = rng.random_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if integer {
            rng.random_range(-3..=3) as f64
        } else {
            rng.random_range(-2.0..2.0)
        }
    };
    let g: Vec<f64> = (0..m).map(|_| draw(rng)).collect();
    let f = match rng.random_range(0..4) {
        0 => random_bistochastic(&space, rng).apply_real(&g),
        1 => {
            // Robin Hood transfer between two atoms keeps integers exact.
            let mut f = g.clone();
            if m >= 2 {
                let (i, j) = (rng.random_range(0..m), rng.random_range(0..m));
                let (hi, lo) = if f[i] >= f[j] { (i, j) } else { (j, i) };
                let t = ((f[hi] - f[lo]) / 2.0).floor();
                f[hi] -= t;
                f[lo] += t;
            }
            f
        }
        2 => {
            let mut f: Vec<f64> = (0..m).map(|_| draw(rng)).collect();
            let shift = (g.iter().sum::<f64>() - f.iter().sum::<f64>()) / m as f64;
            if !integer {
                f.iter_mut().for_each(|v| *v += shift);
            }
            f
        }
        _ => (0..m).map(|_| draw(rng)).collect(),
    };
    (space, f, g)
}

fn equivalence_section(rec: &mut Recorder, cfg: &SuiteConfig) {
    for trial in 0..cfg.scalar_pairs {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::Equivalence, trial);
        let (space, f, g) = scalar_pair(&mut rng);
        let masses = space.masses().to_vec();
        let partial = majorizes_values(&f, &masses, &g, &masses);
        let fc = ClassicalFunction::real(&f);
        let gc = ClassicalFunction::real(&g);
        let lp = match bistochastic_witness(&space, &fc, &gc) {
            Ok(WitnessOutcome::Feasible(b)) => {
                let bg = b.apply_real(&g);
                let residual = bg.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                rec.le_with("equivalence: LP witness reproduces f", residual, 0.0, 1e-8);
                true
            }
            Ok(WitnessOutcome::Infeasible(cert)) => {
                let fv: Vec<Vec<f64>> = f.iter().map(|v| vec![*v]).collect();
                let gv: Vec<Vec<f64>> = g.iter().map(|v| vec![*v]).collect();
                rec.truth("equivalence: Farkas certificate verifies", cert.verify(&masses, &fv, &gv), || {
                    format!("f {f:?} g {g:?}")
                });
                false
            }
            Err(e) => {
                rec.error("equivalence: LP", &e);
                continue;
            }
        };
        let hinge = match hinge_family_test(&space, &fc, &gc) {
            Ok(v) => v,
            Err(e) => {
                rec.error("equivalence: hinge test", &e);
                continue;
            }
        };
        let name = if partial {
            "equivalence (majorized pairs)"
        } else {
            "equivalence (non-majorized pairs)"
        };
        rec.truth(name, partial == lp && lp == hinge, || {
            format!("partial sums {partial}, LP {lp}, hinge {hinge}; f {f:?} g {g:?}")
        });
    }
}

fn birkhoff_section(rec: &mut Recorder, cfg: &SuiteConfig) {
    let m = 5;
    let space = FiniteMeasureSpace::uniform(m, 1.0);
    let max_terms = (m - 1) * (m - 1) + 1;
    for trial in 0..cfg.birkhoff_matrices {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::Birkhoff, trial);
        let b: BistochasticMatrix = if trial % 2 == 0 {
            sinkhorn_bistochastic(&space, &mut rng)
        } else {
            random_bistochastic(&space, &mut rng)
        };
        let terms = match birkhoff_decompose(&b) {
            Ok(t) => t,
            Err(e) => {
                rec.error("birkhoff: decomposition", &e);
                continue;
            }
        };
        rec.le_with("birkhoff: number of permutations", terms.len() as f64, max_terms as f64, 0.0);
        let mut rebuilt = vec![vec![0.0; m]; m];
        let mut weight = 0.0;
        let mut valid = true;
        for (w, perm) in &terms {
            weight += w;
            valid &= *w > 0.0 && {
                let mut seen = perm.clone();
                seen.sort_unstable();
                seen == (0..m).collect::<Vec<_>>()
            };
            for (i, &j) in perm.iter().enumerate() {
                rebuilt[i][j] += w;
            }
        }
        rec.truth("birkhoff: terms are weighted permutations", valid, || format!("{terms:?}"));
        let residual = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| (rebuilt[i][j] - b.entry(i, j)).abs())
            .fold((weight - 1.0).abs(), f64::max);
        rec.le_with("birkhoff: reconstruction residual", residual, 0.0, BIRKHOFF_TOL);
    }
}

fn komiya_instance(rng: &mut ChaCha8Rng) -> (FiniteMeasureSpace, QuantumRandomVariable) {
    let m = rng.random_range(2..=5);
    let d = rng.random_range(1..=3);
    let space = if rng.random_bool(0.5) {
        FiniteMeasureSpace::uniform(m, 1.0)
    } else {
        FiniteMeasureSpace::from_masses(random_masses(m, rng)).expect("positive masses")
    };
    (space, random_qrv(m, d, true, rng))
}

fn komiya_section(rec: &mut Recorder, cfg: &SuiteConfig) {
    for trial in 0..cfg.komiya_positives {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::Komiya, trial);
        let (space, g) = komiya_instance(&mut rng);
        let b = random_bistochastic(&space, &mut rng);
        let f = apply_bistochastic(&b, &g).expect("matching sizes");
        let mut worst = f64::NEG_INFINITY;
        let mut scale: f64 = 1.0;
        for _ in 0..cfg.komiya_functionals {
            let w: Vec<HermitianOperator> = (0..space.len()).map(|_| gaussian_hermitian(g.dim(), &mut rng)).collect();
            match (psi_phi(&w, &f, &space), psi_phi(&w, &g, &space)) {
                (Ok(pf), Ok(pg)) => {
                    worst = worst.max(pf - pg);
                    scale = scale.max(pg.abs());
                }
                (Err(e), _) | (_, Err(e)) => {
                    rec.error("komiya: psi LP", &e);
                }
            }
        }
        rec.le_with("komiya forward: psi(Bg) <= psi(g)", worst / scale, 0.0, KOMIYA_SLACK);
    }
    for trial in 0..cfg.komiya_negatives {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::Komiya, cfg.komiya_positives + trial);
        let (space, g) = komiya_instance(&mut rng);
        // 2g - mean(g) has four times the variance of g, and bistochastic
        // maps cannot increase variance.
        let total = space.total_mass();
        let mean = (0..space.len()).fold(ComplexOperator::zeros(g.dim()), |acc, x| {
            let mut acc = acc;
            acc += &g.value(x).scale_real(space.mass(x) / total);
            acc
        });
        let spread = g.values().iter().map(|v| diff_norm(v, &mean)).fold(0.0, f64::max);
        if spread < 1e-6 {
            continue;
        }
        let f = QuantumRandomVariable::new(
            g.values().iter().map(|v| {
                let mut out = v.scale_real(2.0);
                out += &mean.scale_real(-1.0);
                out
            }).collect(),
        )
        .expect("matching sizes");
        match komiya_separate(&f, &g, &space, cfg.seed ^ trial as u64) {
            Ok(KomiyaOutcome::Separated(sep)) => {
                let verified = sep.verify(&f, &g, &space).unwrap_or(false);
                rec.truth("komiya converse: separating functional found", sep.margin > 0.0 && verified, || {
                    format!("margin {} verified {verified}", sep.margin)
                });
            }
            Ok(other) => rec.truth("komiya converse: separating functional found", false, || format!("{other:?}")),
            Err(e) => rec.error("komiya converse: separating functional found", &e),
        }
    }
}

fn rho_section(rec: &mut Recorder, cfg: &SuiteConfig) {
    for trial in 0..cfg.rho_instances {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::RhoInvariance, trial);
        let m = rng.random_range(1..=6);
        let d = rng.random_range(1..=4);
        let space = FiniteMeasureSpace::from_masses(random_masses(m, &mut rng)).expect("positive masses");
        let nu = random_povm(space, d, d >= 2 && rng.random_bool(0.5), &mut rng);
        let f = random_qrv(m, d, false, &mut rng);
        // Independent route: sum of E^{1/2} f E^{1/2} over the effects.
        let mut reference = ComplexOperator::zeros(d);
        for x in 0..m {
            let r = psd_sqrt(nu.effect(x), PSD_TOL).expect("effects are PSD");
            reference += &r.as_operator().matmul(f.value(x)).matmul(r.as_operator());
        }
        let scale = norm_of(&reference);
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.rho_states {
            let rho = full_rank_state(d, 0.05, &mut rng);
            match integrate(&f, &nu, Some(&rho)) {
                Ok(v) => worst = worst.max(diff_norm(&v, &reference)),
                Err(e) => rec.error("rho invariance", &e),
            }
        }
        rec.small("rho invariance of the integral", worst, scale, RHO_TOL);
    }
}

fn implication_section(rec: &mut Recorder, cfg: &SuiteConfig) {
    let opts = MajorizationOptions {
        seed: cfg.seed,
        state_samples: 500,
        direction_samples: 500,
        ..MajorizationOptions::default()
    };
    for trial in 0..cfg.implication_pairs {
        rec.trial = trial;
        let mut rng = stream(cfg.seed, Section::Implications, trial);
        let m = rng.random_range(2..=3);
        let d = rng.random_range(1..=2);
        let space = FiniteMeasureSpace::uniform(m, 1.0);
        let g = random_qrv(m, d, true, &mut rng);
        let b = random_bistochastic(&space, &mut rng);
        let mut f = apply_bistochastic(&b, &g).expect("matching sizes");
        if trial % 2 == 1 {
            let eps = random_qrv(m, d, true, &mut rng).scale(C64::new(0.3, 0.0));
            f = f.add(&eps);
        }
        match implication_suite(&f, &g, &space, &opts) {
            Ok(rep) => rec.truth("implication chain B => T => S", rep.violation.is_none(), || {
                rep.violation.clone().unwrap_or_default()
            }),
            Err(e) => rec.error("implication chain B => T => S", &e),
        }
    }
}

pub const SECTIONS: [&str; 6] = ["lemmas", "equivalence", "birkhoff", "komiya", "rho", "implications"];

fn run_into(rec: &mut Recorder, cfg: &SuiteConfig, name: &str) -> bool {
    match name {
        "lemmas" => lemma_section(rec, cfg),
        "equivalence" => equivalence_section(rec, cfg),
        "birkhoff" => birkhoff_section(rec, cfg),
        "komiya" => komiya_section(rec, cfg),
        "rho" => rho_section(rec, cfg),
        "implications" => implication_section(rec, cfg),
        _ => return false,
    }
    true
}

fn run_sections(cfg: &SuiteConfig, names: &[&str]) -> Option<SuiteReport> {
    let mut rec = Recorder {
        checks: Vec::new(),
        failures: Vec::new(),
        trial: 0,
    };
    for name in names {
        if !run_into(&mut rec, cfg, name) {
            return None;
        }
    }
    let total_checked = rec.checks.iter().map(|c| c.checked).sum();
    let total_violations = rec.checks.iter().map(|c| c.violations).sum();
    Some(SuiteReport {
        config: cfg.clone(),
        checks: rec.checks,
        failures: rec.failures,
        total_checked,
        total_violations,
    })
}

/// Runs every section in [`SECTIONS`] order. Deterministic in `cfg`.
pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    run_sections(cfg, &SECTIONS).expect("known sections")
}

/// Runs one named section; `None` for an unknown name.
pub fn run_section(cfg: &SuiteConfig, name: &str) -> Option<SuiteReport> {
    run_sections(cfg, &[name])
}
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_give_an_empty_report() {
        let r = run_suite(&SuiteConfig::new(42, 0));
        assert!(r.checks.is_empty());
        assert_eq!(r.total_checked, 0);
        assert!(r.passed());
    }

    #[test]
    fn small_suite_is_reproducible_and_clean() {
        let cfg = SuiteConfig::new(7, 20);
        let a = run_suite(&cfg);
        let b = run_suite(&cfg);
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.passed(), "{}", a.to_json());
        assert!(a.total_checked > 100);
    }
}
