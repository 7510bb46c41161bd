//! Finite-difference residuals of the forward equation ∂t q = −∂x(μ q) + ½ ∂xx q for the closed forms.

use skewdiff::densities::{q_class, q_esn_ou, q_theorem1, q_theorem2};
use skewdiff::ou_skew::{drift_theorem4, OuSkewSpec};
use skewdiff::skew_family::{drift_value, family_constant_correlation, family_theorem1, family_theorem2, DriftSpec};
use skewdiff::Chirality;

const H: f64 = 1e-3;
const TOL: f64 = 1e-7;

fn central<Q, M>(q: &Q, mu: &M, x: f64, t: f64, h: f64) -> f64
where
    Q: Fn(f64, f64) -> f64,
    M: Fn(f64, f64) -> f64,
{
    let dt = (q(x, t + h) - q(x, t - h)) / (2.0 * h);
    let flux = |y: f64| mu(y, t) * q(y, t);
    let dflux = (flux(x + h) - flux(x - h)) / (2.0 * h);
    let dxx = (q(x + h, t) - 2.0 * q(x, t) + q(x - h, t)) / (h * h);
    dt + dflux - 0.5 * dxx
}

/// Richardson combination of steps H and H/2, cancelling the O(h²) truncation.
fn residual<Q, M>(q: Q, mu: M, x: f64, t: f64) -> f64
where
    Q: Fn(f64, f64) -> f64,
    M: Fn(f64, f64) -> f64,
{
    (4.0 * central(&q, &mu, x, t, 0.5 * H) - central(&q, &mu, x, t, H)) / 3.0
}

fn worst<Q, M>(q: Q, mu: M, xs: &[f64], ts: &[f64]) -> f64
where
    Q: Fn(f64, f64) -> f64,
    M: Fn(f64, f64) -> f64,
{
    let mut w: f64 = 0.0;
    for &t in ts {
        for &x in xs {
            w = w.max(residual(&q, &mu, x, t).abs());
        }
    }
    w
}

fn xs() -> Vec<f64> {
    (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect()
}

#[test]
fn theorem1_density_solves_forward_equation() {
    for c in [Chirality::Right, Chirality::Left] {
        let fam = family_theorem1(2.0, c).unwrap();
        let d = DriftSpec::theorem1(fam).with_shift(0.4);
        let r = worst(
            |x, t| q_theorem1(x, t, 0.4, 2.0, c).unwrap(),
            |x, t| drift_value(&d, x, t).unwrap(),
            &xs(),
            &[0.3, 0.8, 1.5],
        );
        assert!(r < TOL, "{c:?}: {r:e}");
    }
}

#[test]
fn theorem2_density_solves_forward_equation() {
    for a in [0.5, 2.0] {
        let d = DriftSpec::theorem2(family_theorem2(a, Chirality::Right).unwrap());
        let r = worst(
            |x, t| q_theorem2(x, t, a, Chirality::Right).unwrap(),
            |x, t| drift_value(&d, x, t).unwrap(),
            &xs(),
            &[0.5, 1.0, 3.0],
        );
        assert!(r < TOL, "alpha {a}: {r:e}");
    }
}

#[test]
fn general_class_density_solves_forward_equation() {
    let fam = family_constant_correlation(0.5, Chirality::Left).unwrap();
    let d = DriftSpec::general_class(fam.clone()).with_shift(-0.3);
    let r = worst(
        |x, t| q_class(x, t, &fam, -0.3).unwrap(),
        |x, t| drift_value(&d, x, t).unwrap(),
        &xs(),
        &[0.5, 1.0, 2.0],
    );
    assert!(r < TOL, "{r:e}");
}

#[test]
fn ou_h_transform_density_solves_forward_equation() {
    let (l, x0) = (0.7, 0.2);
    let spec = OuSkewSpec::new(l, Chirality::Right, x0).unwrap();
    let r = worst(
        |x, t| q_esn_ou(x, t, l, x0, Chirality::Right).unwrap(),
        |x, _| drift_theorem4(x, &spec),
        &xs(),
        &[0.4, 1.0, 2.0],
    );
    assert!(r < TOL, "{r:e}");
}

#[test]
fn perturbed_drift_leaves_a_residual() {
    let d = DriftSpec::theorem2(family_theorem2(1.0, Chirality::Right).unwrap());
    let r = worst(
        |x, t| q_theorem2(x, t, 1.0, Chirality::Right).unwrap(),
        |x, t| 1.01 * drift_value(&d, x, t).unwrap(),
        &xs(),
        &[0.5, 1.0],
    );
    assert!(r > 1e3 * TOL, "{r:e}");
}
