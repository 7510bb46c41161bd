//! Statistical and analytical checks: KS, KL, martingale means,
//! normalization audits and the energy/entropy equality.

pub mod criteria;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::densities::{mass, q_class, q_class_unshifted, trapezoid, DensityGrid};
use crate::error::{invalid, Result, SkewError};
use crate::sde_engine::{mean_var, PathEnsemble};
use crate::skew_family::{DriftSpec, SkewFamily};

/// Minimum sample size accepted by [`ks_statistic`].
pub const KS_MIN_SAMPLES: usize = 100;

/// Asymptotic 99% quantile of `√n·D_n`.
pub const KS_C99: f64 = 1.6276;

/// `sup_x |F_n(x) − F(x)|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(SkewError::TooFewSamples {
            got: samples.len(),
            need: KS_MIN_SAMPLES,
        });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(invalid("samples", "contain NaN"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    Ok(d)
}

pub fn ks_threshold_99(n: usize) -> f64 {
    KS_C99 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, var) = mean_var(xs);
        Self {
            mean,
            se: (var / xs.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingalePoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

/// Sample mean of `h(X_t, t)/h(x0, t_start)` at every recorded column after the first.
///
/// The paths must come from the base measure of `h`; this cannot be checked here.
pub fn martingale_mean<H: Fn(f64, f64) -> f64>(h: H, paths: &PathEnsemble, x0: f64) -> Result<Vec<MartingalePoint>> {
    let h0 = h(x0, paths.grid.t_start);
    if !(h0.is_finite() && h0 != 0.0) {
        return Err(invalid("h", "h(x0, t_start) must be finite and non-zero"));
    }
    let times = paths.times();
    Ok((1..paths.n_cols())
        .map(|j| {
            let t = times[j];
            let r: Vec<f64> = paths.column(j).iter().map(|&x| h(x, t) / h0).collect();
            let e = Estimate::from_samples(&r);
            MartingalePoint { t, mean: e.mean, se: e.se }
        })
        .collect())
}

const KL_FLOOR: f64 = 1e-300;
const KL_NEGLIGIBLE: f64 = 1e-12;

fn check_common(x: &[f64], p: &[f64], q: &[f64]) -> Result<()> {
    if x.len() != p.len() || x.len() != q.len() || x.len() < 2 {
        return Err(invalid("grid", "p, q and x must share a grid of at least two nodes"));
    }
    Ok(())
}

/// `∫ p log(p/q) dx`, the usual orientation `KL(p‖q)`.
pub fn kl_divergence(x: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    check_common(x, p, q)?;
    let mut y = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (pi, qi) = (p[i].max(0.0), q[i].max(0.0));
        if pi < KL_NEGLIGIBLE && qi < KL_NEGLIGIBLE {
            y.push(0.0);
            continue;
        }
        if qi <= KL_FLOOR && pi >= KL_NEGLIGIBLE {
            return Err(invalid("q", format!("vanishes at x = {} where p = {pi}", x[i])));
        }
        let (pf, qf) = (pi.max(KL_FLOOR), qi.max(KL_FLOOR));
        y.push(pi * (pf / qf).ln());
    }
    Ok(trapezoid(x, &y))
}

/// `∫ log(p/q) q dx`, which equals `−KL(q‖p)`.
pub fn kl_as_typeset(x: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(-kl_divergence(x, q, p)?)
}

/// Row-wise `KL(p‖q)` for two densities on the same nodes.
pub fn kl_grid(p: &DensityGrid, q: &DensityGrid) -> Result<Vec<f64>> {
    if p.x_nodes != q.x_nodes || p.t_nodes != q.t_nodes {
        return Err(invalid("grid", "densities are on different nodes"));
    }
    (0..p.t_nodes.len())
        .map(|j| kl_divergence(&p.x_nodes, p.row(j), q.row(j)))
        .collect()
}

fn require_all_columns(paths: &PathEnsemble) -> Result<()> {
    if paths.steps.len() != paths.grid.n_steps + 1 {
        return Err(invalid("paths", "every grid step must be recorded"));
    }
    Ok(())
}

/// `½ Σ μ(X_k, t_k)² Δt` per path (left Riemann sum up to column `upto`).
fn energy_per_path(drift: &DriftSpec, paths: &PathEnsemble, upto: usize) -> Vec<f64> {
    let dt = paths.grid.dt();
    let times = paths.times();
    (0..paths.n_paths)
        .map(|i| {
            let row = paths.path(i);
            0.5 * dt * (0..upto).map(|k| drift.eval(row[k], times[k]).powi(2)).sum::<f64>()
        })
        .collect()
}

/// Monte Carlo estimate of `½ E ∫ μ(X_s, s)² ds` over the whole recorded grid.
pub fn girsanov_energy(drift: &DriftSpec, paths: &PathEnsemble) -> Result<Estimate> {
    require_all_columns(paths)?;
    Ok(Estimate::from_samples(&energy_per_path(drift, paths, paths.n_cols() - 1)))
}

/// Energy, telescoped relative entropy `E log(h(X_τ)/h(x0))` and their per-path difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEntropy {
    pub t: f64,
    pub energy: Estimate,
    pub kl: Estimate,
    /// Per-path `log(h(X_τ)/h(x0)) − ½∫μ² ds`, a stochastic integral with mean zero.
    pub difference: Estimate,
}

/// Compares the two sides of the optimality equality at column `upto`.
///
/// The telescoped side is the relative entropy of the skewed path law with
/// respect to the base law, `KL(Q‖P)`.
pub fn energy_vs_entropy<L: Fn(f64, f64) -> f64>(
    drift: &DriftSpec,
    log_h: L,
    paths: &PathEnsemble,
    upto: usize,
) -> Result<EnergyEntropy> {
    require_all_columns(paths)?;
    if upto == 0 || upto >= paths.n_cols() {
        return Err(invalid("upto", "must be an interior or final column"));
    }
    let times = paths.times();
    let energy = energy_per_path(drift, paths, upto);
    let kl: Vec<f64> = (0..paths.n_paths)
        .map(|i| {
            let row = paths.path(i);
            log_h(row[upto], times[upto]) - log_h(row[0], times[0])
        })
        .collect();
    let diff: Vec<f64> = kl.iter().zip(&energy).map(|(a, b)| a - b).collect();
    Ok(EnergyEntropy {
        t: times[upto],
        energy: Estimate::from_samples(&energy),
        kl: Estimate::from_samples(&kl),
        difference: Estimate::from_samples(&diff),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEntry {
    pub x0: f64,
    pub t: f64,
    pub shifted: f64,
    pub unshifted: f64,
}

/// Mass of the shifted and unshifted class densities started at each `x0`.
pub fn normalization_audit(family: &SkewFamily, x0_list: &[f64], t_list: &[f64]) -> Result<Vec<MassEntry>> {
    let mut out = Vec::with_capacity(x0_list.len() * t_list.len());
    for &x0 in x0_list {
        for &t in t_list {
            let hw = 10.0 * t.sqrt() + x0.abs();
            let shifted = mass(|x| q_class(x, t, family, x0).unwrap_or(f64::NAN), x0, hw)?;
            let unshifted = mass(|x| q_class_unshifted(x, t, family, x0, 0.0).unwrap_or(f64::NAN), x0, hw)?;
            out.push(MassEntry {
                x0,
                t,
                shifted,
                unshifted,
            });
        }
    }
    Ok(out)
}

/// JSON has no NaN or infinity; serde_json writes them as `null`.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `statistic ≤ threshold`.
    Upper,
    /// Passes when `statistic > threshold` (negative controls).
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    #[serde(deserialize_with = "nan_from_null")]
    pub statistic: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Part {
    pub fn upper(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            bound: Bound::Upper,
            pass: statistic <= threshold,
        }
    }

    pub fn lower(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            bound: Bound::Lower,
            pass: statistic > threshold,
        }
    }

    /// `statistic/threshold` for upper bounds and its reciprocal for lower bounds.
    pub fn ratio(&self) -> f64 {
        let r = match self.bound {
            Bound::Upper => self.statistic / self.threshold,
            Bound::Lower => self.threshold / self.statistic,
        };
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    }
}

/// One report entry. Composite checks report the worst part ratio against a threshold of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check: String,
    #[serde(deserialize_with = "nan_from_null")]
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_effective: Option<usize>,
    pub notes: String,
    #[serde(default)]
    pub parts: Vec<Part>,
    pub meta: Value,
}

impl Check {
    pub fn from_parts(name: &str, parts: Vec<Part>, n_effective: Option<usize>, notes: impl Into<String>, extra: Value) -> Self {
        let statistic = parts.iter().map(Part::ratio).fold(0.0, f64::max);
        let pass = !parts.is_empty() && parts.iter().all(|p| p.pass) && statistic <= 1.0;
        Self {
            check: name.to_string(),
            statistic,
            threshold: 1.0,
            pass,
            n_effective,
            notes: notes.into(),
            parts,
            meta: serde_json::json!({ "details": extra }),
        }
    }

    pub fn failed(name: &str, err: &SkewError) -> Self {
        Self {
            check: name.to_string(),
            statistic: f64::INFINITY,
            threshold: 1.0,
            pass: false,
            n_effective: None,
            notes: format!("error: {err}"),
            parts: Vec::new(),
            meta: serde_json::json!({}),
        }
    }

    /// `name: PASS|FAIL (worst ratio r)` followed by each part.
    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "{}: {} (worst statistic/threshold = {:.3})",
            self.check,
            if self.pass { "PASS" } else { "FAIL" },
            self.statistic
        );
        for p in &self.parts {
            let op = match p.bound {
                Bound::Upper => "<=",
                Bound::Lower => ">",
            };
            s.push_str(&format!("; {} {:.3e} {op} {:.3e}", p.name, p.statistic, p.threshold));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub all_pass: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(suite: &str, seed: u64, checks: Vec<Check>, started: Instant) -> Self {
        Self {
            suite: suite.to_string(),
            seed,
            wall_time_s: started.elapsed().as_secs_f64(),
            all_pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SkewError::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic_dists::{normal_cdf, normal_pdf, std_normal_cdf};
    use crate::chirality::Chirality;
    use crate::densities::linspace;
    use crate::sde_engine::{path_rng, simulate, Recording, SimConfig, TimeGrid};
    use crate::skew_family::{family_theorem1, family_theorem2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = path_rng(seed, 0);
        (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn ks_calibration_and_shift() {
        let s = normals(100_000, 3);
        let d = ks_statistic(&s, std_normal_cdf).unwrap();
        assert!(d < ks_threshold_99(s.len()), "{d}");
        let shifted = ks_statistic(&s, |x| normal_cdf(x, 0.5, 1.0)).unwrap();
        assert!((shifted - 0.19741265136584745).abs() < 3.0 * ks_threshold_99(s.len()));
        let c = vec![0.0; 200];
        assert!(ks_statistic(&c, std_normal_cdf).unwrap() >= 0.5);
    }

    #[test]
    fn ks_rejects_bad_input() {
        assert!(matches!(ks_statistic(&[0.0; 10], std_normal_cdf), Err(SkewError::TooFewSamples { .. })));
        let mut s = normals(200, 1);
        s[17] = f64::NAN;
        assert!(ks_statistic(&s, std_normal_cdf).is_err());
        assert!((ks_threshold_99(1_000_000) - 1.6276e-3).abs() < 1e-12);
    }

    #[test]
    fn martingale_of_constant_is_exact() {
        let g = TimeGrid::uniform(1.0, 20).unwrap();
        let cfg = SimConfig::new(300, 2).with_recording(Recording::Every(5));
        let ens = simulate(&DriftSpec::zero(), 0.0, &g, &cfg).unwrap();
        let m = martingale_mean(|_, _| 1.0, &ens, 0.0).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.iter().all(|p| p.mean == 1.0 && p.se == 0.0));
        assert!(martingale_mean(|_, _| 0.0, &ens, 0.0).is_err());
    }

    #[test]
    fn kl_gaussian_closed_form() {
        let x = linspace(-15.0, 16.0, 6201);
        let p: Vec<f64> = x.iter().map(|&u| normal_pdf(u, 0.0, 1.0)).collect();
        let q: Vec<f64> = x.iter().map(|&u| normal_pdf(u, 1.0, 1.0)).collect();
        assert!((kl_divergence(&x, &p, &q).unwrap() - 0.5).abs() < 1e-6);
        assert!(kl_divergence(&x, &p, &p).unwrap().abs() < 1e-15);
        // N(0,1) against N(0,4): log 2 + 1/8 − 1/2 one way, 3/2 − log 2 the other
        let w: Vec<f64> = x.iter().map(|&u| normal_pdf(u, 0.0, 4.0)).collect();
        let ln2 = std::f64::consts::LN_2;
        assert!((kl_divergence(&x, &p, &w).unwrap() - (ln2 + 0.125 - 0.5)).abs() < 1e-6);
        assert!((kl_as_typeset(&x, &p, &w).unwrap() + (1.5 - ln2)).abs() < 1e-6);
    }

    #[test]
    fn kl_support_mismatch() {
        let x = linspace(0.0, 1.0, 11);
        let p = vec![1.0; 11];
        let mut q = vec![1.0; 11];
        q[5] = 0.0;
        assert!(kl_divergence(&x, &p, &q).is_err());
        assert!(kl_divergence(&x, &p, &q[..5]).is_err());
    }

    #[test]
    fn zero_drift_has_zero_energy() {
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let ens = simulate(&DriftSpec::zero(), 0.0, &g, &SimConfig::new(200, 1)).unwrap();
        let e = girsanov_energy(&DriftSpec::zero(), &ens).unwrap();
        assert_eq!(e.mean, 0.0);
        let sparse = simulate(&DriftSpec::zero(), 0.0, &g, &SimConfig::new(200, 1).with_recording(Recording::Every(10))).unwrap();
        assert!(girsanov_energy(&DriftSpec::zero(), &sparse).is_err());
    }

    #[test]
    fn energy_matches_entropy_small_run() {
        let fam = family_theorem1(1.0, Chirality::Right).unwrap();
        let drift = DriftSpec::theorem1(fam.clone());
        let g = TimeGrid::uniform(0.9, 450).unwrap();
        let ens = simulate(&drift, 0.0, &g, &SimConfig::new(4000, 9)).unwrap();
        let lh = |x: f64, t: f64| crate::analytic_dists::log_std_normal_cdf(fam.alpha(t) * x);
        let r = energy_vs_entropy(&drift, lh, &ens, 450).unwrap();
        assert!(r.difference.mean.abs() < 3.0 * r.difference.se, "{r:?}");
        let early = energy_vs_entropy(&drift, lh, &ens, 200).unwrap();
        assert!(early.energy.mean < r.energy.mean);
    }

    #[test]
    fn audit_shifted_and_unshifted() {
        let fam = family_theorem2(1.0, Chirality::Right).unwrap();
        let a = normalization_audit(&fam, &[0.0, 1.5], &[1.0]).unwrap();
        assert!((a[0].shifted - 1.0).abs() < 1e-10 && (a[0].unshifted - 1.0).abs() < 1e-10);
        assert!((a[1].shifted - 1.0).abs() < 1e-10);
        assert!((a[1].unshifted - 0.917).abs() < 1e-3, "{:?}", a[1]);
    }

    #[test]
    fn check_aggregation() {
        let c = Check::from_parts(
            "demo",
            vec![Part::upper("a", 1.0, 2.0), Part::lower("control", 4.0, 1.0)],
            Some(10),
            "",
            Value::Null,
        );
        assert!(c.pass);
        assert_eq!(c.statistic, 0.5);
        let c = Check::from_parts("demo", vec![Part::upper("a", f64::NAN, 2.0)], None, "", Value::Null);
        assert!(!c.pass && c.statistic.is_infinite());
        assert_eq!(c.parts.len(), 1);
        assert!(c.summary_line().starts_with("demo: FAIL"));
    }
}
