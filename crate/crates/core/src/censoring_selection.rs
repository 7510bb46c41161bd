//! Censoring and selection representations of the skew drifts.
//!
//! Every skew drift is a conditional mean: `ψα·mills(αx)` is `ψ|α|` times
//! the mean of a unit normal truncated at `−|α|x`, and the OU drift is minus
//! the mean of a normal truncated at `λx`. The censoring side conditions a
//! Brownian path on the sign of a correlated partner.

use serde::{Deserialize, Serialize};

use crate::analytic_dists::{mills, SQRT_2PI};
use crate::chirality::Chirality;
use crate::error::{invalid, Result, SkewError};
use crate::ou_skew::{drift_theorem4, OuSkewSpec};
use crate::sde_engine::{mean_var, PathEnsemble};
use crate::skew_family::{drift_value, DriftSpec, SkewFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormalSpec {
    pub mean: f64,
    pub std: f64,
    pub threshold: f64,
    pub side: Side,
}

impl TruncatedNormalSpec {
    pub fn new(mean: f64, std: f64, threshold: f64, side: Side) -> Result<Self> {
        if !(std > 0.0) {
            return Err(invalid("std", "must be positive"));
        }
        Ok(Self {
            mean,
            std,
            threshold,
            side,
        })
    }
}

/// `E[x | x > a]` or `E[x | x < a]` for `x ~ N(mean, std²)`.
pub fn truncated_normal_mean(spec: &TruncatedNormalSpec) -> f64 {
    let a = (spec.threshold - spec.mean) / spec.std;
    match spec.side {
        Side::Above => spec.mean + spec.std * mills(-a),
        Side::Below => spec.mean - spec.std * mills(a),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionCheck {
    pub drift_direct: f64,
    pub drift_via_selection: f64,
    pub abs_diff: f64,
}

/// Compares the class drift with `ψ_t|α_t|·E[u | u ≷ −|α_t|x]`, `u ~ N(0, 1)`,
/// the side being set by the chirality.
pub fn verify_selection_representation(family: &SkewFamily, x: f64, t: f64) -> Result<SelectionCheck> {
    let drift_direct = drift_value(&DriftSpec::general_class(family.clone()), x, t)?;
    let a = family.alpha(t).abs();
    let side = match family.chirality() {
        Chirality::Right => Side::Above,
        Chirality::Left => Side::Below,
    };
    let u = truncated_normal_mean(&TruncatedNormalSpec::new(0.0, 1.0, -a * x, side)?);
    let drift_via_selection = family.psi(t) * a * u;
    Ok(SelectionCheck {
        drift_direct,
        drift_via_selection,
        abs_diff: (drift_direct - drift_via_selection).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuSelectionCheck {
    pub drift_direct: f64,
    /// `−E[z | z ≶ λx]` with `z ~ N(−λx, 2λ)`.
    pub drift_via_selection: f64,
    pub abs_diff: f64,
    /// `−E[z | z ≶ 0]` with `z ~ N(−λx, 2/λ)`, the variance as stated.
    pub stated_reading: f64,
    pub stated_abs_diff: f64,
}

/// OU drift against its truncated-mean representation.
pub fn verify_ou_selection(lambda: f64, x: f64, chirality: Chirality) -> Result<OuSelectionCheck> {
    let spec = OuSkewSpec::new(lambda, chirality, 0.0)?;
    let drift_direct = drift_theorem4(x, &spec);
    let side = match chirality {
        Chirality::Right => Side::Below,
        Chirality::Left => Side::Above,
    };
    let corrected = TruncatedNormalSpec::new(-lambda * x, (2.0 * lambda).sqrt(), lambda * x, side)?;
    let drift_via_selection = -truncated_normal_mean(&corrected);
    let stated = TruncatedNormalSpec::new(-lambda * x, (2.0 / lambda).sqrt(), 0.0, side)?;
    let stated_reading = -truncated_normal_mean(&stated);
    Ok(OuSelectionCheck {
        drift_direct,
        drift_via_selection,
        abs_diff: (drift_direct - drift_via_selection).abs(),
        stated_reading,
        stated_abs_diff: (drift_direct - stated_reading).abs(),
    })
}

/// `1.06·σ̂·n^{−1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let (_, v) = mean_var(samples);
    1.06 * v.sqrt() * (samples.len() as f64).powf(-0.2)
}

/// Gaussian kernel density estimate on `x_grid`.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, x_grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * SQRT_2PI);
    x_grid
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredPosterior {
    pub t: f64,
    pub x_grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub survivor_fraction: f64,
    pub n_effective: usize,
    /// X values of the paths whose Y was non-negative.
    #[serde(skip)]
    pub survivors: Vec<f64>,
}

/// Minimum number of surviving paths for a posterior estimate.
pub const MIN_SURVIVORS: usize = 1000;

/// KDE of `X` at column `t_index` over the paths with `Y ≥ 0` there.
pub fn posterior_from_censored_sim(
    ens_x: &PathEnsemble,
    ens_y: &PathEnsemble,
    t_index: usize,
    bandwidth: Option<f64>,
    x_grid: &[f64],
) -> Result<CensoredPosterior> {
    if ens_x.n_paths != ens_y.n_paths || ens_x.steps != ens_y.steps {
        return Err(invalid("ensembles", "X and Y ensembles do not share a grid"));
    }
    if t_index >= ens_x.n_cols() {
        return Err(invalid("t_index", "beyond the recorded columns"));
    }
    let xs = ens_x.column(t_index);
    let ys = ens_y.column(t_index);
    let survivors: Vec<f64> = xs.iter().zip(&ys).filter(|(_, &y)| y >= 0.0).map(|(&x, _)| x).collect();
    if survivors.len() < MIN_SURVIVORS {
        return Err(SkewError::TooFewSamples {
            got: survivors.len(),
            need: MIN_SURVIVORS,
        });
    }
    let bw = bandwidth.unwrap_or_else(|| silverman_bandwidth(&survivors));
    if !(bw > 0.0) {
        return Err(invalid("bandwidth", "must be positive"));
    }
    Ok(CensoredPosterior {
        t: ens_x.times()[t_index],
        x_grid: x_grid.to_vec(),
        density: gaussian_kde(&survivors, bw, x_grid),
        bandwidth: bw,
        survivor_fraction: survivors.len() as f64 / xs.len() as f64,
        n_effective: survivors.len(),
        survivors,
    })
}
