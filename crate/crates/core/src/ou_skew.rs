//! Ornstein–Uhlenbeck skew diffusions.
//!
//! The h-function `h^λ±(x, t) = e^{−λt}·e^{λx²}·Φ(±√(2λ)x)` is space-time
//! harmonic for the stationary OU generator `−λx∂x + ½∂xx`. Its h-transform
//! has drift `λx ± √(2λ)·mills(±√(2λ)x)` and extended skew-Normal
//! transition densities. Also here: an OU process driven by skew-Normal
//! noise, and the Lamperti map that turns a state-dependent diffusion
//! coefficient into a constant one.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::analytic_dists::{log_std_normal_cdf, mills, normal_log_pdf, normal_pdf, std_normal_cdf};
use crate::chirality::Chirality;
use crate::error::{invalid, Result, SkewError};
use crate::quad::{integrate, QuadOptions};
use crate::sde_engine::{complementary_pair, em_step, run_paths, PathEnsemble, PathNoise, PathOut, SimConfig, TimeGrid};
use crate::skew_family::{family_theorem1, DriftSpec, SkewFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSkewSpec {
    pub lambda: f64,
    pub chirality: Chirality,
    pub x0: f64,
}

impl OuSkewSpec {
    pub fn new(lambda: f64, chirality: Chirality, x0: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda", format!("must be positive and finite, got {lambda}")));
        }
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        Ok(Self { lambda, chirality, x0 })
    }

    fn scale(&self) -> f64 {
        (2.0 * self.lambda).sqrt()
    }
}

/// `λx + e^{−λx²}/∫_{−∞}^{±x} e^{−λs²} ds`, with the chirality sign carried
/// through the derivative of the `±x` upper limit.
pub fn drift_theorem4(x: f64, spec: &OuSkewSpec) -> f64 {
    let s = spec.chirality.sign();
    let k = spec.scale();
    spec.lambda * x + s * k * mills(s * k * x)
}

/// `log h^λ±(x, t)`.
pub fn log_h_lambda(x: f64, t: f64, spec: &OuSkewSpec) -> f64 {
    let s = spec.chirality.sign();
    -spec.lambda * t + spec.lambda * x * x + log_std_normal_cdf(s * spec.scale() * x)
}

/// `h^λ±(x, t) = e^{−λt}·e^{λx²}·(√λ/√π)·∫_{−∞}^{±x} e^{−λs²} ds`.
pub fn h_lambda(x: f64, t: f64, spec: &OuSkewSpec) -> Result<f64> {
    let v = log_h_lambda(x, t, spec).exp();
    if !v.is_finite() {
        return Err(invalid("x", format!("h^λ overflows at x = {x} (λx² = {})", spec.lambda * x * x)));
    }
    Ok(v)
}

/// `(h, ∂t h, ∂x h, ∂xx h)` in closed form. With `time_factor = false` the
/// `e^{−λt}` prefactor is dropped (a deliberately wrong variant).
pub fn h_lambda_derivatives(x: f64, t: f64, spec: &OuSkewSpec, time_factor: bool) -> (f64, f64, f64, f64) {
    let l = spec.lambda;
    let s = spec.chirality.sign();
    let decay = if time_factor { (-l * t).exp() } else { 1.0 };
    let h = decay * (l * x * x).exp() * std_normal_cdf(s * spec.scale() * x);
    let h_t = if time_factor { -l * h } else { 0.0 };
    // d/dx of e^{λx²}Φ(±√(2λ)x) contributes ±√(λ/π) once the Gaussian factors cancel
    let jump = s * (l / std::f64::consts::PI).sqrt() * decay;
    let h_x = 2.0 * l * x * h + jump;
    let h_xx = (4.0 * l * l * x * x + 2.0 * l) * h + 2.0 * l * x * jump;
    (h, h_t, h_x, h_xx)
}

/// `(p₋, p₊)` with `p± = (√λ/√π)∫_{−∞}^{±x} e^{−λs²} ds = Φ(±√(2λ)x)`; they sum to 1.
pub fn ou_mixture_probability(lambda: f64, x: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    Ok(complementary_pair((2.0 * lambda).sqrt() * x))
}

/// Mean and variance of the stationary OU `dX = −λX dt + dW` at time `t`.
pub fn stationary_ou_moments(lambda: f64, x0: f64, t: f64) -> (f64, f64) {
    (x0 * (-lambda * t).exp(), -(-2.0 * lambda * t).exp_m1() / (2.0 * lambda))
}

/// Mean and variance of the repulsive OU `dX = +λX dt + dW` at time `t`.
pub fn repulsive_ou_moments(lambda: f64, x0: f64, t: f64) -> (f64, f64) {
    (x0 * (lambda * t).exp(), (2.0 * lambda * t).exp_m1() / (2.0 * lambda))
}

pub fn stationary_ou_pdf(x: f64, t: f64, lambda: f64, x0: f64) -> f64 {
    let (m, v) = stationary_ou_moments(lambda, x0, t);
    normal_pdf(x, m, v)
}

pub fn repulsive_ou_pdf(x: f64, t: f64, lambda: f64, x0: f64) -> f64 {
    let (m, v) = repulsive_ou_moments(lambda, x0, t);
    normal_pdf(x, m, v)
}

/// Both sides of the mixture identity at `(x, t)`:
/// `[p₋h⁻(x,t)/h⁻(x0,0) + p₊h⁺(x,t)/h⁺(x0,0)]·P_stat(x,t|x0)` and the repulsive OU density.
///
/// The `e^{−λt}` factor sits inside `h` only; the standard deviations are
/// related by `σ₊(t) = e^{λt}σ₋(t)`.
pub fn identity_sides(lambda: f64, x0: f64, x: f64, t: f64) -> Result<(f64, f64)> {
    let (pm, pp) = ou_mixture_probability(lambda, x0)?;
    let plus = OuSkewSpec::new(lambda, Chirality::Right, x0)?;
    let minus = OuSkewSpec::new(lambda, Chirality::Left, x0)?;
    let (_, v) = stationary_ou_moments(lambda, x0, t);
    // log P_stat + λx² − λx0² = log N(x·e^{−λt}; x0, v) exactly, so the quadratic terms never cancel numerically
    let log_gauss = normal_log_pdf(x * (-lambda * t).exp(), x0, v) - lambda * t;
    let k = (2.0 * lambda).sqrt();
    let term = |spec: &OuSkewSpec| {
        let s = spec.chirality.sign();
        (log_gauss + log_std_normal_cdf(s * k * x) - log_std_normal_cdf(s * k * x0)).exp()
    };
    let lhs = pm * term(&minus) + pp * term(&plus);
    Ok((lhs, repulsive_ou_pdf(x, t, lambda, x0)))
}

/// `σ₊(t)/σ₋(t)`, to be compared with `e^{λt}`.
pub fn sigma_ratio(lambda: f64, t: f64) -> f64 {
    let (_, vm) = stationary_ou_moments(lambda, 0.0, t);
    let (_, vp) = repulsive_ou_moments(lambda, 0.0, t);
    (vp / vm).sqrt()
}

/// `dZ` follows the theorem1 skew SDE on `[0, T)` from `Z₀ = 0`; `dX = −λX dt + dZ` from `x0`,
/// both driven by the same increments. Returns `(X, Z)`.
pub fn simulate_ou_skew_noise(
    lambda: f64,
    x0: f64,
    horizon: f64,
    grid: &TimeGrid,
    cfg: &SimConfig,
) -> Result<(PathEnsemble, PathEnsemble)> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", "must be non-negative"));
    }
    if !(grid.effective_end() < horizon) {
        return Err(SkewError::HorizonViolation {
            t: grid.effective_end(),
            horizon,
        });
    }
    let z_drift = DriftSpec::theorem1(family_theorem1(horizon, Chirality::Right)?);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut out = run_paths(grid, cfg, 2, |p, steps| {
        let mut noise = PathNoise::new(cfg, p, 1.0);
        let mut xs = Vec::with_capacity(steps.len());
        let mut zs = Vec::with_capacity(steps.len());
        let (mut x, mut z) = (x0, 0.0);
        let mut clamps = 0;
        let mut next = 0;
        for k in 0..=grid.n_steps {
            if steps.get(next) == Some(&k) {
                xs.push(x);
                zs.push(z);
                next += 1;
            }
            if k == grid.n_steps {
                break;
            }
            let (nz, c) = em_step(&z_drift, z, grid.time(k), dt, sqrt_dt, noise.normal(), cfg.drift_clamp);
            clamps += u64::from(c);
            x += -lambda * x * dt + (nz - z);
            z = nz;
            if !x.is_finite() || !z.is_finite() {
                return Err(SkewError::NonFinite { path: p, step: k + 1 });
            }
        }
        Ok(PathOut {
            rows: vec![xs, zs],
            label: 0,
            clamps,
        })
    })?;
    let z = out.pop().expect("two ensembles");
    let x = out.pop().expect("two ensembles");
    Ok((x, z))
}

/// Lamperti map `Ψ(z, t) = ∫_anchor^z du/σ(u, t)`.
pub fn lamperti_skew_map<S>(sigma_fn: S, z: f64, t: f64, anchor: f64) -> Result<f64>
where
    S: Fn(f64, f64) -> f64,
{
    let bad = Cell::new(None);
    let v = integrate(
        |u| {
            let s = sigma_fn(u, t);
            if !(s > 0.0) {
                bad.set(Some(u));
                return 0.0;
            }
            1.0 / s
        },
        anchor,
        z,
        QuadOptions::default(),
    )?;
    if let Some(u) = bad.get() {
        return Err(invalid("sigma", format!("σ({u}, {t}) is not positive")));
    }
    Ok(v)
}

/// Radon–Nikodym factor `2·Φ(α_t·Ψ(z, t))` of the skewed law of a Lamperti-mapped diffusion.
pub fn lamperti_rn_factor<S>(sigma_fn: S, family: &SkewFamily, z: f64, t: f64, anchor: f64) -> Result<f64>
where
    S: Fn(f64, f64) -> f64,
{
    let y = lamperti_skew_map(sigma_fn, z, t, anchor)?;
    Ok(2.0 * std_normal_cdf(family.alpha(t) * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_around;

    fn spec(l: f64, c: Chirality) -> OuSkewSpec {
        OuSkewSpec::new(l, c, 0.0).unwrap()
    }

    #[test]
    fn drift_at_origin_matches_integral() {
        for &l in &[0.5, 1.0, 2.0] {
            let half = integrate(|s| (-l * s * s).exp(), -40.0, 0.0, QuadOptions::default()).unwrap();
            assert!((drift_theorem4(0.0, &spec(l, Chirality::Right)) - 1.0 / half).abs() < 1e-13);
            assert!((drift_theorem4(0.0, &spec(l, Chirality::Right)) - 2.0 * (l / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn drift_matches_literal_formula() {
        let l = 0.7;
        for &x in &[-2.0, -0.3, 0.4, 1.9] {
            for c in [Chirality::Right, Chirality::Left] {
                let s = c.sign();
                let denom = integrate(|u| (-l * u * u).exp(), -40.0, s * x, QuadOptions::default()).unwrap();
                let lit = l * x + s * (-l * x * x).exp() / denom;
                assert!((drift_theorem4(x, &spec(l, c)) - lit).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drift_tails() {
        let s = spec(1.0, Chirality::Right);
        assert!((drift_theorem4(30.0, &s) - 30.0).abs() < 1e-12);
        // disfavoured side: restoring, ≈ −λx
        let x = -20.0;
        assert!((drift_theorem4(x, &s) / (-x) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn drift_mirror_antisymmetry() {
        for &x in &[-1.5, 0.0, 0.8] {
            let p = drift_theorem4(x, &spec(1.3, Chirality::Right));
            let m = drift_theorem4(-x, &spec(1.3, Chirality::Left));
            assert!((p + m).abs() < 1e-14);
        }
    }

    #[test]
    fn h_lambda_values() {
        assert!((h_lambda(0.0, 0.0, &spec(1.0, Chirality::Right)).unwrap() - 0.5).abs() < 1e-15);
        for &x in &[-2.0, 0.3, 1.7] {
            let t = 0.4;
            let sum = h_lambda(x, t, &spec(1.0, Chirality::Right)).unwrap() + h_lambda(x, t, &spec(1.0, Chirality::Left)).unwrap();
            let full = (-t).exp() * (x * x).exp();
            assert!((sum - full).abs() < 1e-12 * full);
        }
        assert!(h_lambda(40.0, 0.0, &spec(1.0, Chirality::Right)).is_err());
    }

    #[test]
    fn drift_is_log_gradient_of_h_plus_base() {
        // −λx + ∂x log h = drift_theorem4
        for c in [Chirality::Right, Chirality::Left] {
            let s = spec(0.9, c);
            for &x in &[-1.0, 0.0, 0.6] {
                let (h, _, hx, _) = h_lambda_derivatives(x, 0.3, &s, true);
                assert!((-0.9 * x + hx / h - drift_theorem4(x, &s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn time_homogeneous_form_agrees() {
        // λx + ∂x log ∫_{−∞}^{x} e^{−λs²} ds, no explicit time dependence
        let l: f64 = 1.2;
        for i in 0..=20 {
            let x = -3.0 + 0.3 * i as f64;
            let log_int = |y: f64| log_std_normal_cdf((2.0 * l).sqrt() * y);
            let h = 1e-4;
            let d = (log_int(x + h) - log_int(x - h)) / (2.0 * h);
            assert!((l * x + d - drift_theorem4(x, &spec(l, Chirality::Right))).abs() < 1e-6);
        }
    }

    #[test]
    fn mixture_probabilities() {
        assert_eq!(ou_mixture_probability(1.0, 0.0).unwrap(), (0.5, 0.5));
        let (m, p) = ou_mixture_probability(1.0, 1.0).unwrap();
        assert!((p - 0.921_350_396_474_857_4).abs() < 1e-15);
        assert_eq!(m + p, 1.0);
        assert_eq!(ou_mixture_probability(1.0, 50.0).unwrap().1, 1.0);
    }

    #[test]
    fn identity_reconstructs_repulsive_ou() {
        for &x0 in &[-0.7, 0.0, 1.1] {
            for &t in &[0.25, 0.5, 1.0, 2.0] {
                for i in 0..=16 {
                    let x = -4.0 + 0.5 * i as f64;
                    let (lhs, rhs) = identity_sides(1.0, x0, x, t).unwrap();
                    assert!((lhs - rhs).abs() < 1e-12, "x0={x0} t={t} x={x}");
                }
            }
        }
        assert!((sigma_ratio(0.8, 1.5) - (0.8_f64 * 1.5).exp()).abs() < 1e-13);
    }

    #[test]
    fn lamperti_maps() {
        let v = lamperti_skew_map(|_, _| 2.0, 3.0, 0.0, 0.0).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        let v = lamperti_skew_map(|x, _| x, 2.5, 0.0, 1.0).unwrap();
        assert!((v - 2.5_f64.ln()).abs() < 1e-13);
        let v = lamperti_skew_map(|x, _| 1.0 + x * x, 1.7, 0.0, 0.0).unwrap();
        assert!((v - 1.7_f64.atan()).abs() < 1e-13);
        assert!(lamperti_skew_map(|x, _| x, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn rn_factor_is_a_density_ratio() {
        // σ ≡ 1: 2Φ(αz) times the Gaussian is the skew-Normal with unit mass
        let fam = crate::skew_family::family_theorem2(1.0, Chirality::Right).unwrap();
        let t = 1.0;
        let m = integrate_around(
            |z| lamperti_rn_factor(|_, _| 1.0, &fam, z, t, 0.0).unwrap() * normal_pdf(z, 0.0, t),
            0.0,
            12.0,
            QuadOptions::abs(1e-10),
        )
        .unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_lambda_tracks_noise() {
        let g = TimeGrid::new(0.0, 1.0, 200, 1e-3).unwrap();
        let (x, z) = simulate_ou_skew_noise(1e-4, 0.0, 1.0, &g, &SimConfig::new(50, 4)).unwrap();
        let max = x.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (a, b) in x.values.iter().zip(&z.values) {
            assert!((a - b).abs() <= 1e-4 * max * 2.0 + 1e-12);
        }
    }
}
