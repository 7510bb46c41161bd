//! Forward-equation solver and backward-equation residuals.
//!
//! [`solve_kfe`] integrates `∂t q = −∂x(μ q) + ½σ²∂xx q` on a cell-centred
//! finite-volume grid with zero-flux walls, so discrete mass is conserved by
//! construction. Time stepping is the θ-scheme; each step is a single
//! tridiagonal solve.

use serde::{Deserialize, Serialize};

use crate::analytic_dists::{normal_cdf, normal_pdf, std_normal_pdf};
use crate::chirality::Chirality;
use crate::densities::DensityGrid;
use crate::error::{invalid, Result, SkewError};
use crate::ou_skew::{h_lambda_derivatives, OuSkewSpec};
use crate::sde_engine::TimeGrid;
use crate::skew_family::{AlphaPath, DriftSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    /// Total number of time steps across the grid.
    pub n_t: usize,
    /// Standard deviation of the Gaussian replacing the initial Dirac mass; `None` means `4Δx`.
    #[serde(default)]
    pub init_width: Option<f64>,
    #[serde(default = "half")]
    pub theta: f64,
    /// Switch a face to upwinding when its cell Péclet number exceeds 2.
    #[serde(default = "yes")]
    pub upwind: bool,
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

impl FpConfig {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, n_t: usize) -> Self {
        Self {
            x_min,
            x_max,
            n_x,
            n_t,
            init_width: None,
            theta: 0.5,
            upwind: true,
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_x).map(|i| self.x_min + (i as f64 + 0.5) * dx).collect()
    }

    pub fn width(&self) -> f64 {
        self.init_width.unwrap_or(4.0 * self.dx())
    }

    fn validate(&self, x0: f64) -> Result<()> {
        if !(self.x_min < x0 && x0 < self.x_max) {
            return Err(invalid("x_min", "need x_min < x0 < x_max"));
        }
        if self.n_x < 64 || self.n_t < 64 {
            return Err(invalid("n_x", "n_x and n_t must be at least 64"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(invalid("theta", "must lie in [0, 1]"));
        }
        if !(self.width() > 0.0) {
            return Err(invalid("init_width", "must be positive"));
        }
        Ok(())
    }
}

/// Thomas algorithm for `a_i x_{i−1} + b_i x_i + c_i x_{i+1} = d_i`.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = b.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

/// Tridiagonal operator `L` with `(Lq)_i = −(F_{i+½} − F_{i−½})/Δx` at time `t`.
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

fn build_operator(drift: &DriftSpec, sigma: f64, faces: &[f64], dx: f64, t: f64, upwind: bool, op: &mut Operator) {
    let n = op.diag.len();
    let diff = 0.5 * sigma * sigma / dx;
    op.lower.iter_mut().for_each(|v| *v = 0.0);
    op.diag.iter_mut().for_each(|v| *v = 0.0);
    op.upper.iter_mut().for_each(|v| *v = 0.0);
    // interior face f sits between cells f and f+1; F = wl·q_f + wr·q_{f+1}
    for (f, &xf) in faces.iter().enumerate().take(n - 1) {
        let mu = drift.eval(xf, t);
        let (wl, wr) = if upwind && (mu.abs() * dx / (sigma * sigma)) > 2.0 {
            if mu > 0.0 {
                (mu + diff, -diff)
            } else {
                (diff, mu - diff)
            }
        } else {
            (0.5 * mu + diff, 0.5 * mu - diff)
        };
        // cell f loses F, cell f+1 gains F
        op.diag[f] -= wl / dx;
        op.upper[f] -= wr / dx;
        op.lower[f + 1] += wl / dx;
        op.diag[f + 1] += wr / dx;
    }
}

/// Solves the forward equation from a mollified Dirac mass at `(x0, grid.t_start)`.
///
/// Rows of the result sit at `grid.time(k)` for `k = 1..=n_steps`; `cfg.n_t`
/// time steps are shared between the rows in proportion to their spacing.
pub fn solve_kfe(drift: &DriftSpec, sigma: f64, x0: f64, grid: &TimeGrid, cfg: &FpConfig) -> Result<DensityGrid> {
    cfg.validate(x0)?;
    grid.validate()?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let h = drift.validity_horizon();
    if !(grid.effective_end() < h) {
        return Err(SkewError::HorizonViolation {
            t: grid.effective_end(),
            horizon: h,
        });
    }
    let n = cfg.n_x;
    let dx = cfg.dx();
    let centers = cfg.centers();
    let faces: Vec<f64> = (1..n).map(|i| cfg.x_min + i as f64 * dx).collect();

    let width = cfg.width();
    let tau = width * width;
    let t0 = grid.t_start + tau;
    let snapshots: Vec<f64> = (1..=grid.n_steps).map(|k| grid.time(k)).collect();
    if snapshots[0] < t0 {
        return Err(invalid(
            "init_width",
            format!("first output time {} precedes the mollifier time {t0}", snapshots[0]),
        ));
    }
    let m0 = x0 + drift.eval(x0, grid.t_start) * tau;
    let captured = normal_cdf(cfg.x_max, m0, tau * sigma * sigma) - normal_cdf(cfg.x_min, m0, tau * sigma * sigma);
    if captured < 1.0 - 1e-10 {
        return Err(invalid("x_min", format!("mollifier mass inside the domain is only {captured}")));
    }
    let mut q: Vec<f64> = centers.iter().map(|&x| normal_pdf(x, m0, tau * sigma * sigma)).collect();
    let m: f64 = q.iter().sum::<f64>() * dx;
    q.iter_mut().for_each(|v| *v /= m);

    let total = grid.effective_end() - t0;
    let mut op_old = Operator {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    let mut op_new = Operator {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let theta = cfg.theta;
    let mut t = t0;
    let mut values = Vec::with_capacity(n * snapshots.len());
    build_operator(drift, sigma, &faces, dx, t, cfg.upwind, &mut op_old);

    for &target in &snapshots {
        let span = target - t;
        let sub = if span > 0.0 {
            ((cfg.n_t as f64 * span / total).ceil() as usize).max(1)
        } else {
            0
        };
        let dt = if sub > 0 { span / sub as f64 } else { 0.0 };
        for s in 0..sub {
            let t_new = if s + 1 == sub { target } else { t + dt };
            build_operator(drift, sigma, &faces, dx, t_new, cfg.upwind, &mut op_new);
            for i in 0..n {
                let mut e = q[i] + (1.0 - theta) * dt * op_old.diag[i] * q[i];
                if i > 0 {
                    e += (1.0 - theta) * dt * op_old.lower[i] * q[i - 1];
                }
                if i + 1 < n {
                    e += (1.0 - theta) * dt * op_old.upper[i] * q[i + 1];
                }
                rhs[i] = e;
                a[i] = -theta * dt * op_new.lower[i];
                b[i] = 1.0 - theta * dt * op_new.diag[i];
                c[i] = -theta * dt * op_new.upper[i];
            }
            solve_tridiagonal(&a, &b, &c, &mut rhs, &mut scratch);
            std::mem::swap(&mut q, &mut rhs);
            std::mem::swap(&mut op_old, &mut op_new);
            t = t_new;

            let min = q.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min >= -1e-10) {
                return Err(SkewError::Instability {
                    t,
                    reason: format!("negative density {min}"),
                });
            }
            let mass: f64 = q.iter().sum::<f64>() * dx;
            if !((mass - 1.0).abs() <= 1e-6) {
                return Err(SkewError::Instability {
                    t,
                    reason: format!("mass drifted to {mass}"),
                });
            }
        }
        values.extend(q.iter().map(|v| v.max(0.0)));
    }
    DensityGrid::from_values(centers, snapshots, values)
}

/// `∫|p − q| dx` on the solver's cell centres against a reference density.
pub fn l1_error<F: Fn(f64) -> f64>(row: &[f64], centers: &[f64], reference: F) -> f64 {
    let dx = centers[1] - centers[0];
    row.iter().zip(centers).map(|(p, &x)| (p - reference(x)).abs()).sum::<f64>() * dx
}

/// `max |∂t h + ½∂xx h|` for `h(x, t) = Φ(α_t x)`, using closed-form derivatives.
///
/// The residual equals `x·φ(α_t x)·(α̇_t − α_t³/2)`, which vanishes for
/// `α_t = ±1/√(T − t)`. Intended for `ψ ≡ 1` paths.
pub fn backward_residual_brownian_h<A: AlphaPath>(path: &A, x_grid: &[f64], t_grid: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let a = path.alpha(t);
        let a_dot = path.alpha_dot(t);
        for &x in x_grid {
            let phi = std_normal_pdf(a * x);
            let h_t = phi * a_dot * x;
            let h_xx = -a * a * a * x * phi;
            worst = worst.max((h_t + 0.5 * h_xx).abs());
        }
    }
    worst
}

/// `α_t` scaled by a constant factor; used to perturb a family.
pub struct ScaledAlpha<'a, A: AlphaPath> {
    pub base: &'a A,
    pub factor: f64,
}

impl<A: AlphaPath> AlphaPath for ScaledAlpha<'_, A> {
    fn alpha(&self, t: f64) -> f64 {
        self.factor * self.base.alpha(t)
    }
    fn alpha_dot(&self, t: f64) -> f64 {
        self.factor * self.base.alpha_dot(t)
    }
}

/// `max |∂t h + (−λx)∂x h + ½∂xx h|` for the OU h-function, closed-form derivatives.
pub fn backward_residual_ou_h(lambda: f64, chirality: Chirality, x_grid: &[f64], t_grid: &[f64]) -> Result<f64> {
    backward_residual_ou_h_variant(lambda, chirality, x_grid, t_grid, true)
}

/// As [`backward_residual_ou_h`]; `time_factor = false` drops the `e^{−λt}` prefactor.
pub fn backward_residual_ou_h_variant(
    lambda: f64,
    chirality: Chirality,
    x_grid: &[f64],
    t_grid: &[f64],
    time_factor: bool,
) -> Result<f64> {
    let spec = OuSkewSpec::new(lambda, chirality, 0.0)?;
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        for &x in x_grid {
            let (_, h_t, h_x, h_xx) = h_lambda_derivatives(x, t, &spec, time_factor);
            worst = worst.max((h_t - lambda * x * h_x + 0.5 * h_xx).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{linspace, q_theorem1, q_theorem2};
    use crate::skew_family::{family_theorem1, family_theorem2};

    #[test]
    fn thomas_solves_small_system() {
        let (a, b, c) = (vec![0.0, 1.0, 1.0], vec![4.0, 4.0, 4.0], vec![1.0, 1.0, 0.0]);
        let x = [1.0, 2.0, 3.0];
        let mut d = vec![4.0 * 1.0 + 2.0, 1.0 + 8.0 + 3.0, 2.0 + 12.0];
        let mut s = vec![0.0; 3];
        solve_tridiagonal(&a, &b, &c, &mut d, &mut s);
        for i in 0..3 {
            assert!((d[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn heat_kernel_and_second_order() {
        let err = |n_x: usize| {
            let cfg = FpConfig::new(-8.0, 8.0, n_x, 2000);
            let g = TimeGrid::uniform(1.0, 1).unwrap();
            let sol = solve_kfe(&DriftSpec::zero(), 1.0, 0.0, &g, &cfg).unwrap();
            l1_error(sol.row(0), &sol.x_nodes, |x| normal_pdf(x, 0.0, 1.0))
        };
        let (e1, e2) = (err(400), err(800));
        assert!(e2 < 1e-4, "{e2}");
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn ou_drift() {
        let cfg = FpConfig::new(-6.0, 7.0, 1300, 1000);
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let sol = solve_kfe(&DriftSpec::linear(1.0), 1.0, 1.0, &g, &cfg).unwrap();
        for (j, &t) in sol.t_nodes.iter().enumerate() {
            let (m, v) = crate::ou_skew::stationary_ou_moments(1.0, 1.0, t);
            assert!(l1_error(sol.row(j), &sol.x_nodes, |x| normal_pdf(x, m, v)) < 5e-4);
        }
    }

    #[test]
    fn theorem_drifts_match_closed_forms() {
        let cfg = FpConfig::new(-8.0, 8.0, 800, 2000);
        let d2 = DriftSpec::theorem2(family_theorem2(1.0, Chirality::Right).unwrap());
        let sol = solve_kfe(&d2, 1.0, 0.0, &TimeGrid::uniform(1.0, 1).unwrap(), &cfg).unwrap();
        let e = l1_error(sol.row(0), &sol.x_nodes, |x| q_theorem2(x, 1.0, 1.0, Chirality::Right).unwrap());
        assert!(e < 5e-3, "{e}");
        let d1 = DriftSpec::theorem1(family_theorem1(1.0, Chirality::Right).unwrap());
        let sol = solve_kfe(&d1, 1.0, 0.0, &TimeGrid::uniform(0.8, 1).unwrap(), &cfg).unwrap();
        let e = l1_error(sol.row(0), &sol.x_nodes, |x| q_theorem1(x, 0.8, 0.0, 1.0, Chirality::Right).unwrap());
        assert!(e < 5e-3, "{e}");
    }

    #[test]
    fn rejects_bad_configuration() {
        let g = TimeGrid::uniform(1.0, 1).unwrap();
        assert!(solve_kfe(&DriftSpec::zero(), 1.0, 9.0, &g, &FpConfig::new(-8.0, 8.0, 100, 100)).is_err());
        assert!(solve_kfe(&DriftSpec::zero(), 1.0, 0.0, &g, &FpConfig::new(-8.0, 8.0, 10, 100)).is_err());
        let d1 = DriftSpec::theorem1(family_theorem1(1.0, Chirality::Right).unwrap());
        assert!(solve_kfe(&d1, 1.0, 0.0, &g, &FpConfig::new(-8.0, 8.0, 100, 100)).is_err());
    }

    #[test]
    fn brownian_h_residuals() {
        let fam = family_theorem1(1.0, Chirality::Right).unwrap();
        let xs = linspace(-3.0, 3.0, 101);
        let ts = linspace(0.0, 0.9, 101);
        assert!(backward_residual_brownian_h(&fam, &xs, &ts) < 1e-12);
        let bad = ScaledAlpha { base: &fam, factor: 1.01 };
        assert!(backward_residual_brownian_h(&bad, &xs, &ts) > 1e-3);
        assert_eq!(backward_residual_brownian_h(&bad, &[0.0], &ts), 0.0);
    }

    #[test]
    fn ou_h_residuals() {
        let xs = linspace(-3.0, 3.0, 101);
        let ts = linspace(0.0, 2.0, 101);
        let r_plus = backward_residual_ou_h(1.0, Chirality::Right, &xs, &ts).unwrap();
        let r_minus = backward_residual_ou_h(1.0, Chirality::Left, &xs, &ts).unwrap();
        assert!(r_plus < 1e-10 && r_minus < 1e-10);
        assert!(backward_residual_ou_h_variant(1.0, Chirality::Right, &xs, &ts, false).unwrap() > 1e-2);
    }
}
