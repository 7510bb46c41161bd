//! Closed-form transition and marginal densities, and grids of them.
//!
//! Every density is assembled in log space and exponentiated last, so
//! ratios of tiny tail probabilities stay accurate.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic_dists::{
    esn_pdf, log_std_normal_cdf, normal_log_pdf, paper_phi_big, ExtendedSkewNormalParams,
};
use crate::chirality::Chirality;
use crate::error::{invalid, Result, SkewError};
use crate::ou_skew::{log_h_lambda, stationary_ou_moments, OuSkewSpec};
use crate::quad::{integrate, QuadOptions};
use crate::sde_engine::init_thread_pool;
use crate::skew_family::SkewFamily;

const LN_2: f64 = std::f64::consts::LN_2;

/// Values `q(x_i, t_j)` stored row-major by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoid mass of each time row.
    pub mass_per_t: Vec<f64>,
}

/// Moments of one time row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub t: f64,
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { b } else { a + h * i as f64 }).collect()
}

/// Trapezoid rule on arbitrary nodes.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

impl DensityGrid {
    pub fn from_values(x_nodes: Vec<f64>, t_nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x_nodes.len() < 2 || x_nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("x_nodes", "need at least two strictly increasing nodes"));
        }
        if values.len() != x_nodes.len() * t_nodes.len() {
            return Err(invalid("values", "length must be |t| × |x|"));
        }
        let nx = x_nodes.len();
        let mass_per_t = (0..t_nodes.len())
            .map(|j| trapezoid(&x_nodes, &values[j * nx..(j + 1) * nx]))
            .collect();
        Ok(Self {
            x_nodes,
            t_nodes,
            values,
            mass_per_t,
        })
    }

    /// Evaluates `f(x, t)` on the product grid, rows in parallel.
    pub fn from_fn<F>(x_nodes: Vec<f64>, t_nodes: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        init_thread_pool();
        let rows: Vec<Result<Vec<f64>>> = t_nodes
            .par_iter()
            .map(|&t| x_nodes.iter().map(|&x| f(x, t)).collect())
            .collect();
        let mut values = Vec::with_capacity(x_nodes.len() * t_nodes.len());
        for r in rows {
            values.extend(r?);
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(invalid("density", format!("produced invalid value {v}")));
        }
        Self::from_values(x_nodes, t_nodes, values)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.x_nodes.len();
        &self.values[j * nx..(j + 1) * nx]
    }

    pub fn dx(&self) -> f64 {
        self.x_nodes[1] - self.x_nodes[0]
    }

    pub fn summary(&self) -> Vec<RowSummary> {
        (0..self.t_nodes.len())
            .map(|j| {
                let q = self.row(j);
                let x = &self.x_nodes;
                let mass = trapezoid(x, q);
                let moment = |k: i32, c: f64| {
                    let y: Vec<f64> = x.iter().zip(q).map(|(xi, qi)| (xi - c).powi(k) * qi).collect();
                    trapezoid(x, &y) / mass
                };
                let mean = moment(1, 0.0);
                let variance = moment(2, mean);
                let skewness = moment(3, mean) / variance.powf(1.5);
                RowSummary {
                    t: self.t_nodes[j],
                    mass,
                    mean,
                    variance,
                    skewness,
                }
            })
            .collect()
    }

    /// `x,t,q` rows, with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "x,t,q")?;
        for (j, &t) in self.t_nodes.iter().enumerate() {
            for (i, &x) in self.x_nodes.iter().enumerate() {
                writeln!(w, "{x:?},{t:?},{:?}", self.row(j)[i])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut xs: Vec<f64> = Vec::new();
        let mut ts: Vec<f64> = Vec::new();
        let mut values = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let p: Vec<&str> = line.split(',').collect();
            if p.len() != 3 {
                return Err(SkewError::Format(format!("bad density row `{line}`")));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|_| SkewError::Format(format!("bad number `{s}`")));
            let (x, t, q) = (parse(p[0])?, parse(p[1])?, parse(p[2])?);
            if ts.last() != Some(&t) {
                ts.push(t);
            }
            if ts.len() == 1 {
                xs.push(x);
            }
            values.push(q);
        }
        Self::from_values(xs, ts, values)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "rows": self.summary() })
    }

    /// L1 distance `∫|p − q| dx` per time row on a shared grid.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<Vec<f64>> {
        if self.x_nodes != other.x_nodes || self.t_nodes.len() != other.t_nodes.len() {
            return Err(invalid("grid", "density grids do not share nodes"));
        }
        Ok((0..self.t_nodes.len())
            .map(|j| {
                let d: Vec<f64> = self.row(j).iter().zip(other.row(j)).map(|(a, b)| (a - b).abs()).collect();
                trapezoid(&self.x_nodes, &d)
            })
            .collect())
    }
}

fn check_open(t: f64, lo: f64, hi: f64) -> Result<()> {
    if !(t > lo && t < hi) {
        return Err(SkewError::HorizonViolation { t, horizon: hi });
    }
    Ok(())
}

/// General theorem1 kernel `Q(x, t | x0, t0) = N(x; x0, t − t0)·Φ(±α_t x)/Φ(±α_{t0} x0)`,
/// `α_s = 1/√(T − s)`.
pub fn q_theorem1_general(x: f64, t: f64, x0: f64, t0: f64, horizon: f64, chirality: Chirality) -> Result<f64> {
    check_open(t, t0, horizon)?;
    if !(t0 >= 0.0) {
        return Err(invalid("t0", "must be non-negative"));
    }
    let s = chirality.sign();
    let a_t = 1.0 / (horizon - t).sqrt();
    let a_0 = 1.0 / (horizon - t0).sqrt();
    Ok((normal_log_pdf(x, x0, t - t0) + log_std_normal_cdf(s * a_t * x) - log_std_normal_cdf(s * a_0 * x0)).exp())
}

/// theorem1 transition density from `(x0, 0)`.
pub fn q_theorem1(x: f64, t: f64, x0: f64, horizon: f64, chirality: Chirality) -> Result<f64> {
    q_theorem1_general(x, t, x0, 0.0, horizon, chirality)
}

/// The same density in the typeset form with the unnormalised `Φ` ratio.
pub fn q_theorem1_literal(x: f64, t: f64, x0: f64, horizon: f64, chirality: Chirality) -> f64 {
    let s = chirality.sign();
    let g = (-(x - x0).powi(2) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
    g * paper_phi_big(s * x / (horizon - t).sqrt()) / paper_phi_big(s * x0 / horizon.sqrt())
}

/// `2·N(x; 0, t)·Φ(±α x)`.
pub fn q_theorem2(x: f64, t: f64, alpha: f64, chirality: Chirality) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    Ok((LN_2 + normal_log_pdf(x, 0.0, t) + log_std_normal_cdf(chirality.sign() * alpha * x)).exp())
}

/// Typeset form `(1/(π√t))·e^{−x²/(2t)}·Φ̃(±αx)`.
pub fn q_theorem2_literal(x: f64, t: f64, alpha: f64, chirality: Chirality) -> f64 {
    (-x * x / (2.0 * t)).exp() / (std::f64::consts::PI * t.sqrt()) * paper_phi_big(chirality.sign() * alpha * x)
}

fn check_family_time(family: &SkewFamily, t: f64) -> Result<()> {
    check_open(t, 0.0, family.validity_horizon())
}

/// Shifted class density `2·N(x; x0, t)·Φ(α_t (x − x0))`.
pub fn q_class(x: f64, t: f64, family: &SkewFamily, x0: f64) -> Result<f64> {
    check_family_time(family, t)?;
    Ok((LN_2 + normal_log_pdf(x, x0, t) + log_std_normal_cdf(family.alpha(t) * (x - x0))).exp())
}

/// Unshifted class kernel `N(x; x0, t − t0)·Φ(α_t x)/Φ(α_{t0} x0)`.
pub fn q_class_unshifted(x: f64, t: f64, family: &SkewFamily, x0: f64, t0: f64) -> Result<f64> {
    check_family_time(family, t)?;
    if !(t0 >= 0.0 && t0 < t) {
        return Err(invalid("t0", "must satisfy 0 ≤ t0 < t"));
    }
    let a0x0 = if x0 == 0.0 { 0.0 } else { family.alpha(t0) * x0 };
    Ok((normal_log_pdf(x, x0, t - t0) + log_std_normal_cdf(family.alpha(t) * x) - log_std_normal_cdf(a0x0)).exp())
}

/// Kernel with `x0` placed in the Gaussian only: `2·N(x; x0, t − t0)·Φ(α_t x)`.
pub fn q_class_naive(x: f64, t: f64, family: &SkewFamily, x0: f64, t0: f64) -> Result<f64> {
    check_family_time(family, t)?;
    Ok((LN_2 + normal_log_pdf(x, x0, t - t0) + log_std_normal_cdf(family.alpha(t) * x)).exp())
}

/// Law of a Brownian `X_t` given that a partially correlated `Y_t` is positive:
/// `2·N(x; 0, t)·Φ((x/√t)·ρ/√(1 − ρ²))`.
pub fn censored_posterior(x: f64, t: f64, rho_t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    if !(rho_t.abs() < 1.0) {
        return Err(invalid("rho_t", "|rho| must be below 1; use the half-Normal law at |rho| = 1"));
    }
    let k = rho_t / (1.0 - rho_t * rho_t).sqrt() / t.sqrt();
    Ok((LN_2 + normal_log_pdf(x, 0.0, t) + log_std_normal_cdf(k * x)).exp())
}

/// Cdf of [`censored_posterior`] by quadrature.
pub fn censored_posterior_cdf(x: f64, t: f64, rho_t: f64) -> Result<f64> {
    let sd = t.sqrt();
    let lo = -14.0 * sd;
    if x <= lo {
        return Ok(0.0);
    }
    integrate(|u| censored_posterior(u, t, rho_t).unwrap_or(0.0), lo, x, QuadOptions::abs(1e-13))
}

/// Extended skew-Normal parameters of the OU h-transform law at time `t`.
pub fn esn_ou_params(t: f64, lambda: f64, x0: f64, chirality: Chirality) -> Result<ExtendedSkewNormalParams> {
    if !(t > 0.0) || !(lambda > 0.0) {
        return Err(invalid("t", "t and lambda must be positive"));
    }
    let s = chirality.sign();
    let growth = (lambda * t).exp();
    let em1 = (2.0 * lambda * t).exp_m1();
    ExtendedSkewNormalParams::new(
        x0 * growth,
        (em1 / (2.0 * lambda)).sqrt(),
        s * em1.sqrt(),
        s * (2.0 * lambda).sqrt() * x0 * growth,
    )
}

/// OU h-transform transition density as an extended skew-Normal.
pub fn q_esn_ou(x: f64, t: f64, lambda: f64, x0: f64, chirality: Chirality) -> Result<f64> {
    Ok(esn_pdf(x, &esn_ou_params(t, lambda, x0, chirality)?))
}

/// The same density as `P_stat(x, t | x0)·h^λ(x, t)/h^λ(x0, 0)` with both
/// `∫_{−∞}^{±y} e^{−λs²} ds` integrals done by quadrature.
pub fn q_esn_ou_raw_ratio(x: f64, t: f64, lambda: f64, x0: f64, chirality: Chirality) -> Result<f64> {
    let s = chirality.sign();
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-15,
        max_intervals: 4000,
    };
    let tail = 40.0 / lambda.sqrt();
    let upper = |y: f64| integrate(|u| (-lambda * u * u).exp(), -tail, s * y, opts);
    let (m, v) = stationary_ou_moments(lambda, x0, t);
    let base = normal_log_pdf(x, m, v);
    let log_h = |y: f64, tt: f64| -> Result<f64> { Ok(-lambda * tt + lambda * y * y + upper(y)?.ln()) };
    Ok((base + log_h(x, t)? - log_h(x0, 0.0)?).exp())
}

/// The same density in closed form through `log h^λ`.
pub fn q_ou_h_transform(x: f64, t: f64, spec: &OuSkewSpec) -> f64 {
    let (m, v) = stationary_ou_moments(spec.lambda, spec.x0, t);
    (normal_log_pdf(x, m, v) + log_h_lambda(x, t, spec) - log_h_lambda(spec.x0, 0.0, spec)).exp()
}

/// Gaussian part `(m, v)` and the skew slope `k` of the OU marginal driven by skew-Normal noise.
pub fn ou_sknoise_params(t: f64, lambda: f64, x0: f64, horizon: f64) -> Result<(f64, f64, f64)> {
    check_open(t, 0.0, horizon)?;
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    let (m, v) = stationary_ou_moments(lambda, x0, t);
    // Cov(∫e^{−λ(t−s)}dW, W_t) / Var: c/v = 2/(1 + e^{−λt})
    let c = -(-lambda * t).exp_m1() / lambda;
    let c_over_v = 2.0 / (1.0 + (-lambda * t).exp());
    let k = c_over_v / (horizon - c * c_over_v).sqrt();
    Ok((m, v, k))
}

/// Marginal of `dX = −λX dt + dZ` with `Z` the theorem1 skew process on `[0, T)`:
/// `2·N(x; m, v)·Φ(k (x − m))`.
pub fn p_marginal_ou_sknoise(x: f64, t: f64, lambda: f64, x0: f64, horizon: f64) -> Result<f64> {
    let (m, v, k) = ou_sknoise_params(t, lambda, x0, horizon)?;
    Ok((LN_2 + normal_log_pdf(x, m, v) + log_std_normal_cdf(k * (x - m))).exp())
}

/// The marginal as typeset, `N(x; m, v)·Φ̃(√(2λ)/√(2(T−t)(e^{2λt}−1))·(x − m))`.
/// Kept for comparison; it does not integrate to one.
pub fn p_marginal_ou_sknoise_as_typeset(x: f64, t: f64, lambda: f64, x0: f64, horizon: f64) -> Result<f64> {
    check_open(t, 0.0, horizon)?;
    let (m, v) = stationary_ou_moments(lambda, x0, t);
    let k = (2.0 * lambda).sqrt() / (2.0 * (horizon - t) * (2.0 * lambda * t).exp_m1()).sqrt();
    Ok(normal_log_pdf(x, m, v).exp() * paper_phi_big(k * (x - m)))
}

/// Cdf of [`p_marginal_ou_sknoise`] by quadrature.
pub fn p_marginal_ou_sknoise_cdf(x: f64, t: f64, lambda: f64, x0: f64, horizon: f64) -> Result<f64> {
    let (m, v, _) = ou_sknoise_params(t, lambda, x0, horizon)?;
    let lo = m - 14.0 * v.sqrt();
    if x <= lo {
        return Ok(0.0);
    }
    integrate(
        |u| p_marginal_ou_sknoise(u, t, lambda, x0, horizon).unwrap_or(0.0),
        lo,
        x,
        QuadOptions::abs(1e-13),
    )
}

/// `sup_x2 |Q(x2,t2|x0,t0) − ∫ Q(x2,t2|x1,t1)·Q(x1,t1|x0,t0) dx1|`.
pub fn chapman_kolmogorov_residual<Q>(tpd: Q, x0: f64, t0: f64, t1: f64, t2: f64, x2_grid: &[f64]) -> Result<f64>
where
    Q: Fn(f64, f64, f64, f64) -> Result<f64>,
{
    if !(t0 < t1 && t1 < t2) {
        return Err(invalid("t", "need t0 < t1 < t2"));
    }
    let spread = 14.0 * (t2 - t0).sqrt();
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    let mut worst: f64 = 0.0;
    for &x2 in x2_grid {
        let direct = tpd(x2, t2, x0, t0)?;
        let integrand = |x1: f64| match (tpd(x2, t2, x1, t1), tpd(x1, t1, x0, t0)) {
            (Ok(a), Ok(b)) => a * b,
            _ => f64::NAN,
        };
        let (lo, hi) = (x0.min(x2) - spread, x0.max(x2) + spread);
        let mut cuts = vec![lo, x0.min(x2), x0.max(x2), hi];
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += integrate(integrand, w[0], w[1], opts)?;
        }
        if !total.is_finite() {
            return Err(SkewError::Quadrature {
                a: lo,
                b: hi,
                estimate: total,
                error: f64::NAN,
            });
        }
        worst = worst.max((direct - total).abs());
    }
    Ok(worst)
}

/// Mass of `f` over `center ± half_width`.
pub fn mass<F: Fn(f64) -> f64>(f: F, center: f64, half_width: f64) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        max_intervals: 4000,
    };
    Ok(integrate(&f, center - half_width, center, opts)? + integrate(&f, center, center + half_width, opts)?)
}

/// Cdf of `2·N(x; m, v)·Φ(k(x − m))` by quadrature (no Owen's T).
pub fn skew_normal_cdf(x: f64, location: f64, scale: f64, shape: f64) -> Result<f64> {
    let lo = location - 14.0 * scale;
    if x <= lo {
        return Ok(0.0);
    }
    let f = |u: f64| {
        let z = (u - location) / scale;
        (LN_2 + normal_log_pdf(u, location, scale * scale) + log_std_normal_cdf(shape * z)).exp()
    };
    integrate(f, lo, x, QuadOptions::abs(1e-14))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic_dists::{half_normal_pdf, normal_pdf, sn_moments, sn_pdf, std_normal_cdf, SkewNormalParams};
    use crate::skew_family::{family_constant_correlation, family_theorem1, family_theorem2};
    use Chirality::{Left, Right};

    #[test]
    fn theorem1_reduces_to_skew_normal() {
        let big_t = 2.0;
        for &t in &[0.3_f64, 1.0, 1.9] {
            let p = SkewNormalParams::new(0.0, t.sqrt(), t.sqrt() / (big_t - t).sqrt()).unwrap();
            for &x in &[-2.0, -0.1, 0.0, 0.7, 3.0] {
                let q = q_theorem1(x, t, 0.0, big_t, Right).unwrap();
                assert!((q - sn_pdf(x, &p)).abs() < 1e-14);
                assert!((q - q_theorem1_literal(x, t, 0.0, big_t, Right)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn theorem1_prefactor_forms_agree() {
        // 1/(π√t) e^{−x²/2t} Φ̃(·) = 2/√(2πt) e^{−x²/2t} Φ_std(·)
        let t: f64 = 0.6;
        for &x in &[-1.0, 0.4] {
            let a = (-x * x / (2.0 * t)).exp() / (std::f64::consts::PI * t.sqrt()) * paper_phi_big(x);
            let b = 2.0 / (2.0 * std::f64::consts::PI * t).sqrt() * (-x * x / (2.0 * t)).exp() * std_normal_cdf(x);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn theorem1_terminal_half_normal() {
        let big_t = 1.0;
        for &x in &[0.2, 0.9, 2.0] {
            let q = q_theorem1(x, big_t - 1e-10, 0.0, big_t, Right).unwrap();
            assert!((q - half_normal_pdf(x, big_t, 0.0, Right)).abs() < 1e-4);
        }
        assert!(q_theorem1(-0.5, big_t - 1e-10, 0.0, big_t, Right).unwrap() < 1e-8);
    }

    #[test]
    fn theorem1_mass_with_offset_start() {
        let m = mass(|x| q_theorem1(x, 0.5, 0.7, 1.0, Right).unwrap(), 0.7, 12.0).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        assert!(q_theorem1(0.0, 1.0, 0.0, 1.0, Right).is_err());
    }

    #[test]
    fn theorem2_forms() {
        for &x in &[-3.0, 0.0, 1.2] {
            assert!((q_theorem2(x, 1.3, 0.0, Right).unwrap() - normal_pdf(x, 0.0, 1.3)).abs() < 1e-15);
            assert!((q_theorem2(x, 0.8, 1.0, Right).unwrap() - q_theorem2(-x, 0.8, 1.0, Left).unwrap()).abs() < 1e-16);
            assert!((q_theorem2(x, 0.8, 1.0, Right).unwrap() - q_theorem2_literal(x, 0.8, 1.0, Right)).abs() < 1e-15);
        }
    }

    #[test]
    fn theorem2_grid_skewness_matches_moments() {
        let g = DensityGrid::from_fn(linspace(-12.0, 12.0, 4801), vec![1.0], |x, t| q_theorem2(x, t, 1.0, Right)).unwrap();
        let s = g.summary()[0];
        let (mean, var, skew) = sn_moments(&SkewNormalParams::new(0.0, 1.0, 1.0).unwrap());
        assert!((s.mass - 1.0).abs() < 1e-10);
        assert!((s.mean - mean).abs() < 1e-8);
        assert!((s.variance - var).abs() < 1e-8);
        assert!((s.skewness - skew).abs() < 1e-7);
    }

    #[test]
    fn theorem2_concentrates_as_t_vanishes() {
        let d = 0.05;
        let near = |t: f64| integrate(|x| q_theorem2(x, t, 1.0, Right).unwrap(), -d, d, QuadOptions::abs(1e-13)).unwrap();
        assert!(near(1e-2) < near(1e-3));
        assert!((near(1e-5) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn class_density_special_cases() {
        let f2 = family_theorem2(1.4, Right).unwrap();
        let f1 = family_theorem1(3.0, Left).unwrap();
        for &x in &[-1.0, 0.0, 2.0] {
            assert!((q_class(x, 0.9, &f2, 0.0).unwrap() - q_theorem2(x, 0.9, 1.4, Right).unwrap()).abs() < 1e-15);
            assert!((q_class(x, 0.9, &f1, 0.0).unwrap() - q_theorem1(x, 0.9, 0.0, 3.0, Left).unwrap()).abs() < 1e-15);
        }
        for fam in [f2, family_constant_correlation(0.5, Right).unwrap()] {
            let m = mass(|x| q_class(x, 0.7, &fam, -1.3).unwrap(), -1.3, 12.0).unwrap();
            assert!((m - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn censored_posterior_cases() {
        for &x in &[-1.0, 0.3] {
            assert!((censored_posterior(x, 2.0, 0.0).unwrap() - normal_pdf(x, 0.0, 2.0)).abs() < 1e-15);
            let big_t: f64 = 4.0;
            let t = 1.5;
            let rho = (t / big_t).sqrt();
            let q = q_theorem1(x, t, 0.0, big_t, Right).unwrap();
            assert!((censored_posterior(x, t, rho).unwrap() - q).abs() < 1e-15);
        }
        let m = mass(|x| censored_posterior(x, 1.0, 0.8).unwrap(), 0.0, 12.0).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        assert!((censored_posterior_cdf(12.0, 1.0, 0.8).unwrap() - 1.0).abs() < 1e-10);
        assert!(censored_posterior(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn esn_ou_forms_agree() {
        for c in [Right, Left] {
            for &x0 in &[0.0, 0.6, -1.1] {
                for &t in &[0.25, 1.0] {
                    for i in 0..=12 {
                        let x = -4.0 + 0.75 * i as f64;
                        let a = q_esn_ou(x, t, 0.8, x0, c).unwrap();
                        let b = q_esn_ou_raw_ratio(x, t, 0.8, x0, c).unwrap();
                        let h = q_ou_h_transform(x, t, &OuSkewSpec::new(0.8, c, x0).unwrap());
                        assert!((a - b).abs() < 1e-12, "{c:?} x0={x0} t={t} x={x}: {a} vs {b}");
                        assert!((a - h).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn esn_ou_reductions() {
        let (l, t): (f64, f64) = (0.9, 0.7);
        let em1 = (2.0 * l * t).exp_m1();
        let p = SkewNormalParams::new(0.0, (em1 / (2.0 * l)).sqrt(), em1.sqrt()).unwrap();
        for &x in &[-1.0, 0.0, 2.0] {
            assert!((q_esn_ou(x, t, l, 0.0, Right).unwrap() - sn_pdf(x, &p)).abs() < 1e-14);
        }
        let m = mass(|x| q_esn_ou(x, 1.0, 1.0, 0.5, Right).unwrap(), 0.5 * 1.0_f64.exp(), 30.0).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        // λ → 0: location x0, scale √t, shape ≈ √(2λt)
        let lam = 1e-6;
        let p = esn_ou_params(t, lam, 0.4, Right).unwrap();
        assert!((p.location - 0.4).abs() < 1e-6);
        assert!((p.scale - t.sqrt()).abs() < 1e-6);
        assert!((p.shape - (2.0 * lam * t).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn ou_sknoise_marginal() {
        let m = mass(|x| p_marginal_ou_sknoise(x, 1.0, 1.0, 0.3, 2.0).unwrap(), 0.3, 12.0).unwrap();
        assert!((m - 1.0).abs() < 1e-8);
        // the typeset form carries mass √(2π)/2
        let m = mass(|x| p_marginal_ou_sknoise_as_typeset(x, 1.0, 1.0, 0.3, 2.0).unwrap(), 0.3, 12.0).unwrap();
        assert!((m - (2.0 * std::f64::consts::PI).sqrt() / 2.0).abs() < 1e-8);
        // λ → 0 reproduces the theorem1 law for x0 = 0
        for i in 0..=40 {
            let x = -3.0 + 0.15 * i as f64;
            let a = p_marginal_ou_sknoise(x, 1.0, 1e-4, 0.0, 2.0).unwrap();
            let b = q_theorem1(x, 1.0, 0.0, 2.0, Right).unwrap();
            assert!((a - b).abs() < 1e-3);
        }
        assert!((p_marginal_ou_sknoise_cdf(20.0, 1.0, 1.0, 0.3, 2.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chapman_kolmogorov_cases() {
        let grid = linspace(-3.0, 3.0, 13);
        let bm = |x: f64, t: f64, x0: f64, t0: f64| Ok(normal_pdf(x, x0, t - t0));
        assert!(chapman_kolmogorov_residual(bm, 0.0, 0.0, 0.5, 1.0, &grid).unwrap() < 1e-10);
        let t1 = |x: f64, t: f64, x0: f64, t0: f64| q_theorem1_general(x, t, x0, t0, 1.0, Right);
        assert!(chapman_kolmogorov_residual(t1, 0.0, 0.2, 0.5, 0.8, &grid).unwrap() < 1e-8);
        let fam = family_theorem2(1.0, Right).unwrap();
        let naive = |x: f64, t: f64, x0: f64, t0: f64| q_class_naive(x, t, &fam, x0, t0);
        assert!(chapman_kolmogorov_residual(naive, 0.0, 0.2, 0.5, 0.8, &grid).unwrap() > 1e-3);
    }

    #[test]
    fn unshifted_kernel_mass() {
        let fam = family_theorem2(1.0, Right).unwrap();
        let m = mass(|x| q_class_unshifted(x, 1.0, &fam, 1.5, 0.0).unwrap(), 1.5, 12.0).unwrap();
        let exact = std_normal_cdf(1.5 / 2.0_f64.sqrt()) / std_normal_cdf(1.5);
        assert!((m - exact).abs() < 1e-10);
        let m0 = mass(|x| q_class_unshifted(x, 1.0, &fam, 0.0, 0.0).unwrap(), 0.0, 12.0).unwrap();
        assert!((m0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn grid_csv_round_trip_and_l1() {
        let g = DensityGrid::from_fn(linspace(-5.0, 5.0, 101), vec![0.5, 1.0], |x, t| q_theorem2(x, t, 1.0, Right)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = DensityGrid::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!(g.l1_distance(&back).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn skew_normal_cdf_limits() {
        assert!((skew_normal_cdf(0.0, 0.0, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-14);
        // P(X ≤ 0) for SN(0,1,α) = 1/2 − arctan(α)/π
        let a: f64 = 1.7;
        assert!((skew_normal_cdf(0.0, 0.0, 1.0, a).unwrap() - (0.5 - a.atan() / std::f64::consts::PI)).abs() < 1e-13);
    }
}
