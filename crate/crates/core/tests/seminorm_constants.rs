//! Two places where the seminorm behaves differently from a complex norm:
//! it is homogeneous only over the reals, and the operator-multiplier
//! constant from the comparability chain needs an extra factor once the
//! product is not self-adjoint.

use qrv_core::l1::l1_certificate;
use qrv_core::linalg::{ComplexOperator, C64};
use qrv_core::measure::FiniteMeasureSpace;
use qrv_core::povm::{rn_derivative, Povm, QuantumRandomVariable};
use qrv_core::linalg::State;

/// One atom of mass one, H = C, nu = mu: then D = 1 and `n |D| |D^-1| = 1`,
/// so the comparability-chain constant would claim `|fg|_1 <= |f|_1 |g|_inf`.
/// With `f = 1` and `g = e^{i pi/4}` the seminorm of `fg` is
/// `|Re| + |Im| = sqrt 2`, so that constant fails once `fg` is complex.
#[test]
fn chain_constant_fails_for_complex_products() {
    let nu = Povm::scalar(FiniteMeasureSpace::uniform(1, 1.0), 1);
    let d = rn_derivative(&nu, &State::maximally_mixed(1)).unwrap();
    let condition = d.sup_norm() * d.inverse_sup_norm().unwrap();
    assert!((condition - 1.0).abs() < 1e-12);

    let f = QuantumRandomVariable::new(vec![ComplexOperator::identity(1)]).unwrap();
    let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    let fg = f.scale(phase);
    let nf = l1_certificate(&f, &nu, 1e-9).unwrap();
    let nfg = l1_certificate(&fg, &nu, 1e-9).unwrap();
    assert!((nf.value - 1.0).abs() < 1e-8);
    assert!((nfg.dual_lower_bound - 2f64.sqrt()).abs() < 1e-7, "{}", nfg.dual_lower_bound);

    let chain_bound = 1.0 * condition * nf.value * phase.norm();
    assert!(nfg.dual_lower_bound > chain_bound + 0.4);
    // Splitting fg and f into real and imaginary parts costs a factor 2
    // twice, and the resulting bound holds.
    assert!(nfg.value <= 4.0 * chain_bound);
}

/// `|e^{i theta} f|_1` follows `|cos theta| + |sin theta|`, not `1`.
#[test]
fn seminorm_is_not_complex_homogeneous() {
    let nu = Povm::scalar(FiniteMeasureSpace::uniform(1, 1.0), 1);
    let f = QuantumRandomVariable::new(vec![ComplexOperator::identity(1)]).unwrap();
    for k in 0..8 {
        let theta = k as f64 * std::f64::consts::PI / 8.0;
        let rotated = f.scale(C64::from_polar(1.0, theta));
        let cert = l1_certificate(&rotated, &nu, 1e-9).unwrap();
        let expected = theta.cos().abs() + theta.sin().abs();
        assert!((cert.value - expected).abs() < 1e-7, "theta {theta}: {} vs {expected}", cert.value);
    }
}
