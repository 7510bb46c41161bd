//! Drift-amplitude / skewness families `(ψ_t, α_t)` and the drifts built from them.
//!
//! A family couples a drift amplitude `ψ_t ∈ [0, 1]` to a skewness `α_t`
//! through
//!
//! ```text
//! Γ(t) = −∫ (1 − ψ_s)/s ds,   Λ(t) = C·e^{Γ(t)},   α_t = ±Λ(t)/√(1 − t·Λ(t)²)
//! ```
//!
//! which is the closed-form solution of
//! `α̇ = ψα(α² + 1/t) − α/t − α³/2`. The family is valid while
//! `t·Λ(t)² < 1`. The sign of `α_t` is the chirality of the process.
//!
//! Three families have closed forms ([`family_theorem1`], [`family_theorem2`],
//! [`family_constant_correlation`]); any other `ψ` goes through
//! [`solve_family_from_psi`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytic_dists::mills;
use crate::chirality::Chirality;
use crate::error::{invalid, Result, SkewError};
use crate::ou_skew::{drift_theorem4, OuSkewSpec};
use crate::quad::{integrate, QuadOptions};

pub type PsiFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type DriftFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Anything that exposes a skewness path and its time derivative.
pub trait AlphaPath {
    fn alpha(&self, t: f64) -> f64;
    fn alpha_dot(&self, t: f64) -> f64;
}

/// Lower limit of the `Γ` integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaAnchor {
    /// `Γ(t) = −∫_0^t`, requires `ψ(0⁺) = 1`.
    Origin,
    /// `Γ(t) = −∫_r^t`; any constant offset is absorbed by `C`.
    At(f64),
}

pub struct NumericFamily {
    psi: PsiFn,
    constant: f64,
    anchor: GammaAnchor,
    knots: Vec<f64>,
    gamma_at_knots: Vec<f64>,
    horizon: f64,
}

impl NumericFamily {
    fn anchor_time(&self) -> f64 {
        match self.anchor {
            GammaAnchor::Origin => 0.0,
            GammaAnchor::At(r) => r,
        }
    }

    fn gamma_between(&self, from: f64, to: f64) -> f64 {
        let psi = &self.psi;
        let v = integrate(|s| (1.0 - psi(s)) / s, from, to, QUAD_GAMMA).unwrap_or(f64::NAN);
        -v
    }

    fn gamma(&self, t: f64) -> f64 {
        // start from whichever tabulated point (or the anchor) is closest
        let mut base_t = self.anchor_time();
        let mut base_g = 0.0;
        let idx = self.knots.partition_point(|&k| k <= t);
        for j in [idx.wrapping_sub(1), idx] {
            if let Some(&k) = self.knots.get(j) {
                if (k - t).abs() < (base_t - t).abs() {
                    base_t = k;
                    base_g = self.gamma_at_knots[j];
                }
            }
        }
        if base_t == t {
            return base_g;
        }
        base_g + self.gamma_between(base_t, t)
    }
}

const QUAD_GAMMA: QuadOptions = QuadOptions {
    abs_tol: 1e-14,
    rel_tol: 1e-14,
    max_intervals: 2000,
};

#[derive(Clone)]
pub enum FamilyKind {
    Theorem1 { horizon: f64 },
    Theorem2 { alpha: f64 },
    ConstantCorrelation { correlation: f64 },
    Numeric(Arc<NumericFamily>),
}

/// A `(ψ_t, α_t)` pair with fixed chirality. Immutable once built.
#[derive(Clone)]
pub struct SkewFamily {
    kind: FamilyKind,
    chirality: Chirality,
}

impl fmt::Debug for SkewFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FamilyKind::Theorem1 { horizon } => format!("Theorem1 {{ T: {horizon} }}"),
            FamilyKind::Theorem2 { alpha } => format!("Theorem2 {{ alpha: {alpha} }}"),
            FamilyKind::ConstantCorrelation { correlation } => {
                format!("ConstantCorrelation {{ C: {correlation} }}")
            }
            FamilyKind::Numeric(n) => format!(
                "Numeric {{ C: {}, knots: {}, horizon: {} }}",
                n.constant,
                n.knots.len(),
                n.horizon
            ),
        };
        f.debug_struct("SkewFamily")
            .field("kind", &kind)
            .field("chirality", &self.chirality)
            .finish()
    }
}

/// `ψ ≡ 1`, `α_t = ±1/√(T − t)`: the time-reversed Brownian h-transform on `[0, T)`.
pub fn family_theorem1(horizon: f64, chirality: Chirality) -> Result<SkewFamily> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("T", format!("must be positive and finite, got {horizon}")));
    }
    Ok(SkewFamily {
        kind: FamilyKind::Theorem1 { horizon },
        chirality,
    })
}

/// Constant skewness `α`, with `ψ_t = (2 + α²t)/(2(1 + α²t))`.
pub fn family_theorem2(alpha: f64, chirality: Chirality) -> Result<SkewFamily> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("must be positive and finite, got {alpha}")));
    }
    Ok(SkewFamily {
        kind: FamilyKind::Theorem2 { alpha },
        chirality,
    })
}

/// `ψ ≡ 1/2`, `α_t = ±(C/√(1 − C²))/√t`.
pub fn family_constant_correlation(correlation: f64, chirality: Chirality) -> Result<SkewFamily> {
    if !(0.0..1.0).contains(&correlation) {
        return Err(invalid("C", format!("must lie in [0, 1), got {correlation}")));
    }
    Ok(SkewFamily {
        kind: FamilyKind::ConstantCorrelation { correlation },
        chirality,
    })
}

/// Solves the `(ψ, α)` system for an arbitrary drift amplitude.
///
/// `Γ` is integrated from the origin when `ψ(0⁺) = 1` is detected and from
/// `t = 1` otherwise (see [`solve_family_from_psi_anchored`]). `t_grid`
/// sets the tabulation knots and the range scanned for the validity horizon.
pub fn solve_family_from_psi(
    psi: PsiFn,
    constant: f64,
    chirality: Chirality,
    t_grid: &[f64],
) -> Result<SkewFamily> {
    let probe = psi(1e-12);
    let anchor = if (1.0 - probe).abs() < 1e-8 {
        GammaAnchor::Origin
    } else {
        GammaAnchor::At(1.0)
    };
    solve_family_from_psi_anchored(psi, constant, chirality, t_grid, anchor)
}

pub fn solve_family_from_psi_anchored(
    psi: PsiFn,
    constant: f64,
    chirality: Chirality,
    t_grid: &[f64],
    anchor: GammaAnchor,
) -> Result<SkewFamily> {
    if !(constant >= 0.0) || !constant.is_finite() {
        return Err(invalid("C", format!("must be finite and non-negative, got {constant}")));
    }
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "must contain at least one time"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
        return Err(invalid("t_grid", "must be positive and strictly increasing"));
    }
    if let GammaAnchor::At(r) = anchor {
        if !(r > 0.0) {
            return Err(invalid("anchor", "must be a positive time"));
        }
    }
    for &t in t_grid {
        let v = psi(t);
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid("psi", format!("psi({t}) = {v} is outside [0, 1]")));
        }
    }

    let mut fam = NumericFamily {
        psi,
        constant,
        anchor,
        knots: Vec::with_capacity(t_grid.len()),
        gamma_at_knots: Vec::with_capacity(t_grid.len()),
        horizon: f64::INFINITY,
    };
    let mut prev_t = fam.anchor_time();
    let mut prev_g = 0.0;
    // knots below the anchor are integrated backwards from it
    let split = t_grid.partition_point(|&t| t < prev_t);
    let mut below = Vec::with_capacity(split);
    for &t in t_grid[..split].iter().rev() {
        let g = prev_g + fam.gamma_between(prev_t, t);
        below.push(g);
        prev_t = t;
        prev_g = g;
    }
    below.reverse();
    fam.gamma_at_knots.extend(below);
    prev_t = fam.anchor_time();
    prev_g = 0.0;
    for &t in &t_grid[split..] {
        let g = prev_g + fam.gamma_between(prev_t, t);
        fam.gamma_at_knots.push(g);
        prev_t = t;
        prev_g = g;
    }
    fam.knots = t_grid.to_vec();
    if let Some((i, g)) = fam.gamma_at_knots.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(SkewError::Quadrature {
            a: fam.anchor_time(),
            b: t_grid[i],
            estimate: *g,
            error: f64::NAN,
        });
    }

    // first t with t·Λ(t)² ≥ 1
    let excess = |f: &NumericFamily, t: f64| t * (f.constant * f.gamma(t).exp()).powi(2) - 1.0;
    let mut lo = 0.0;
    for (i, &t) in fam.knots.iter().enumerate() {
        let g = t * (constant * fam.gamma_at_knots[i].exp()).powi(2) - 1.0;
        if g >= 0.0 {
            let mut hi = t;
            let tol = 1e-10 * t_grid[t_grid.len() - 1];
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= 0.0 || excess(&fam, mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            fam.horizon = hi;
            break;
        }
        lo = t;
    }

    Ok(SkewFamily {
        kind: FamilyKind::Numeric(Arc::new(fam)),
        chirality,
    })
}

impl SkewFamily {
    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn chirality(&self) -> Chirality {
        self.chirality
    }

    /// Same family with the opposite chirality.
    pub fn mirrored(&self) -> SkewFamily {
        SkewFamily {
            kind: self.kind.clone(),
            chirality: self.chirality.flip(),
        }
    }

    /// First time at which the family stops being defined (`+∞` if none).
    pub fn validity_horizon(&self) -> f64 {
        match &self.kind {
            FamilyKind::Theorem1 { horizon } => *horizon,
            FamilyKind::Numeric(n) => n.horizon,
            _ => f64::INFINITY,
        }
    }

    /// The constant `C` in `Λ(t) = C·e^{Γ(t)}`.
    pub fn family_constant(&self) -> f64 {
        match &self.kind {
            FamilyKind::Theorem1 { horizon } => 1.0 / horizon.sqrt(),
            FamilyKind::Theorem2 { alpha } => *alpha,
            FamilyKind::ConstantCorrelation { correlation } => *correlation,
            FamilyKind::Numeric(n) => n.constant,
        }
    }

    pub fn psi(&self, t: f64) -> f64 {
        match &self.kind {
            FamilyKind::Theorem1 { .. } => 1.0,
            FamilyKind::Theorem2 { alpha } => {
                let a2t = alpha * alpha * t;
                (2.0 + a2t) / (2.0 * (1.0 + a2t))
            }
            FamilyKind::ConstantCorrelation { .. } => 0.5,
            FamilyKind::Numeric(n) => (n.psi)(t),
        }
    }

    pub fn gamma(&self, t: f64) -> f64 {
        match &self.kind {
            FamilyKind::Theorem1 { .. } => 0.0,
            FamilyKind::Theorem2 { alpha } => -0.5 * (alpha * alpha * t).ln_1p(),
            FamilyKind::ConstantCorrelation { .. } => -0.5 * t.ln(),
            FamilyKind::Numeric(n) => n.gamma(t),
        }
    }

    /// `Λ(t) = C·e^{Γ(t)}`.
    pub fn lambda(&self, t: f64) -> f64 {
        self.family_constant() * self.gamma(t).exp()
    }

    /// Signed skewness `α_t` (sign = chirality).
    pub fn alpha(&self, t: f64) -> f64 {
        let s = self.chirality.sign();
        match &self.kind {
            FamilyKind::Theorem1 { horizon } => s / (horizon - t).sqrt(),
            FamilyKind::Theorem2 { alpha } => s * alpha,
            FamilyKind::ConstantCorrelation { correlation } => {
                let c = *correlation;
                s * c / (1.0 - c * c).sqrt() / t.sqrt()
            }
            FamilyKind::Numeric(_) => {
                let l = self.lambda(t);
                let u = 1.0 - t * l * l;
                if u > 0.0 {
                    s * l / u.sqrt()
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Analytic `dα/dt`.
    pub fn alpha_dot(&self, t: f64) -> f64 {
        let s = self.chirality.sign();
        match &self.kind {
            FamilyKind::Theorem1 { horizon } => s * 0.5 * (horizon - t).powf(-1.5),
            FamilyKind::Theorem2 { .. } => 0.0,
            FamilyKind::ConstantCorrelation { correlation } => {
                let c = *correlation;
                -0.5 * s * c / (1.0 - c * c).sqrt() * t.powf(-1.5)
            }
            FamilyKind::Numeric(_) => {
                let l = self.lambda(t);
                let g_dot = -(1.0 - self.psi(t)) / t;
                let l_dot = g_dot * l;
                let u = 1.0 - t * l * l;
                let u_dot = -l * l - 2.0 * t * l * l_dot;
                s * (l_dot / u.sqrt() - 0.5 * l * u_dot / u.powf(1.5))
            }
        }
    }

    pub fn descriptor(&self) -> FamilyDescriptor {
        let (kind, parameters) = match &self.kind {
            FamilyKind::Theorem1 { horizon } => ("theorem1", serde_json::json!({ "T": horizon })),
            FamilyKind::Theorem2 { alpha } => ("theorem2", serde_json::json!({ "alpha": alpha })),
            FamilyKind::ConstantCorrelation { correlation } => (
                "constant_correlation",
                serde_json::json!({ "correlation": correlation }),
            ),
            FamilyKind::Numeric(n) => {
                let psi: Vec<f64> = n.knots.iter().map(|&t| (n.psi)(t)).collect();
                let anchor = match n.anchor {
                    GammaAnchor::Origin => None,
                    GammaAnchor::At(r) => Some(r),
                };
                (
                    "numeric",
                    serde_json::json!({
                        "t": n.knots, "psi": psi, "constant": n.constant, "anchor": anchor
                    }),
                )
            }
        };
        let h = self.validity_horizon();
        FamilyDescriptor {
            kind: kind.to_string(),
            parameters,
            chirality: self.chirality,
            horizon: h.is_finite().then_some(h),
        }
    }
}

impl AlphaPath for SkewFamily {
    fn alpha(&self, t: f64) -> f64 {
        SkewFamily::alpha(self, t)
    }
    fn alpha_dot(&self, t: f64) -> f64 {
        SkewFamily::alpha_dot(self, t)
    }
}

/// Fourth-order (Richardson-extrapolated central) difference of `f` at `t`.
pub fn central_derivative<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
    let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
    let d2 = (f(t + 2.0 * h) - f(t - 2.0 * h)) / (4.0 * h);
    (4.0 * d1 - d2) / 3.0
}

/// Step used for finite differences of `α` at `t`, kept away from 0 and the horizon.
pub fn fd_step(family: &SkewFamily, t: f64) -> f64 {
    let room = (family.validity_horizon() - t).min(t);
    1e-3 * room.min(1.0)
}

/// Residual of `α̇ − [ψα(α² + 1/t) − α/t − α³/2]` with `α̇` taken by finite differences.
pub fn ode_residual(family: &SkewFamily, t: f64) -> f64 {
    let a = family.alpha(t);
    let psi = family.psi(t);
    let a_dot = central_derivative(|s| family.alpha(s), t, fd_step(family, t));
    a_dot - (psi * a * (a * a + 1.0 / t) - a / t - 0.5 * a * a * a)
}

/// Recovers `ψ_t` from the skewness path through the inverse of the ODE.
pub fn psi_from_alpha(family: &SkewFamily, t: f64) -> f64 {
    let a = family.alpha(t);
    let a_dot = central_derivative(|s| family.alpha(s), t, fd_step(family, t));
    (a_dot + a / t + 0.5 * a * a * a) / (a * (a * a + 1.0 / t))
}

/// JSON form `{kind, parameters, chirality, horizon}` of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDescriptor {
    pub kind: String,
    pub parameters: serde_json::Value,
    pub chirality: Chirality,
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Theorem1Params {
    #[serde(rename = "T")]
    horizon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Theorem2Params {
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantCorrelationParams {
    correlation: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericParams {
    t: Vec<f64>,
    psi: Vec<f64>,
    constant: f64,
    #[serde(default)]
    anchor: Option<f64>,
}

/// Piecewise-linear `ψ` through tabulated points; constant beyond the last knot.
fn interpolated_psi(t: Vec<f64>, psi: Vec<f64>, anchored_at_origin: bool) -> PsiFn {
    Arc::new(move |s: f64| {
        if s <= t[0] {
            if anchored_at_origin {
                let w = s / t[0];
                return 1.0 + w * (psi[0] - 1.0);
            }
            return psi[0];
        }
        let i = t.partition_point(|&k| k <= s);
        if i >= t.len() {
            return psi[psi.len() - 1];
        }
        let w = (s - t[i - 1]) / (t[i] - t[i - 1]);
        psi[i - 1] + w * (psi[i] - psi[i - 1])
    })
}

impl FamilyDescriptor {
    pub fn build(&self) -> Result<SkewFamily> {
        let p = self.parameters.clone();
        let fam = match self.kind.as_str() {
            "theorem1" => {
                let p: Theorem1Params = serde_json::from_value(p)?;
                family_theorem1(p.horizon, self.chirality)?
            }
            "theorem2" => {
                let p: Theorem2Params = serde_json::from_value(p)?;
                family_theorem2(p.alpha, self.chirality)?
            }
            "constant_correlation" => {
                let p: ConstantCorrelationParams = serde_json::from_value(p)?;
                family_constant_correlation(p.correlation, self.chirality)?
            }
            "numeric" => {
                let p: NumericParams = serde_json::from_value(p)?;
                if p.t.len() != p.psi.len() || p.t.is_empty() {
                    return Err(invalid("psi", "t and psi must be non-empty and of equal length"));
                }
                let anchor = match p.anchor {
                    None => GammaAnchor::Origin,
                    Some(r) => GammaAnchor::At(r),
                };
                let grid = p.t.clone();
                let psi = interpolated_psi(p.t, p.psi, anchor == GammaAnchor::Origin);
                solve_family_from_psi_anchored(psi, p.constant, self.chirality, &grid, anchor)?
            }
            other => return Err(invalid("kind", format!("unknown family kind `{other}`"))),
        };
        Ok(fam)
    }
}

/// Which construction a drift follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// h-transform drift: evaluated at the raw state, the start point only
    /// enters the density normalisation.
    Theorem1,
    /// Constant-skew drift, shifted by the start point.
    Theorem2,
    /// General `(ψ, α)` drift, shifted by the start point.
    GeneralClass,
    /// Ornstein–Uhlenbeck h-transform drift.
    OuHTransform,
    Custom,
}

#[derive(Clone)]
pub struct CustomDrift {
    pub name: String,
    pub f: DriftFn,
    pub horizon: f64,
    descriptor: Option<DriftDescriptor>,
}

#[derive(Clone)]
pub enum DriftSource {
    Family(SkewFamily),
    OuHTransform(OuSkewSpec),
    Custom(CustomDrift),
}

/// An evaluable drift `μ(x, t)` plus the diffusion scale it is paired with.
#[derive(Clone)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub source: DriftSource,
    /// The start point `x₀` used by the shifted drifts.
    pub shift: f64,
    pub sigma: f64,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let source = match &self.source {
            DriftSource::Family(fam) => format!("{fam:?}"),
            DriftSource::OuHTransform(s) => format!("{s:?}"),
            DriftSource::Custom(c) => format!("Custom({})", c.name),
        };
        f.debug_struct("DriftSpec")
            .field("kind", &self.kind)
            .field("source", &source)
            .field("shift", &self.shift)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl DriftSpec {
    fn with_family(kind: DriftKind, family: SkewFamily) -> Self {
        Self {
            kind,
            source: DriftSource::Family(family),
            shift: 0.0,
            sigma: 1.0,
        }
    }

    pub fn theorem1(family: SkewFamily) -> Self {
        Self::with_family(DriftKind::Theorem1, family)
    }

    pub fn theorem2(family: SkewFamily) -> Self {
        Self::with_family(DriftKind::Theorem2, family)
    }

    pub fn general_class(family: SkewFamily) -> Self {
        Self::with_family(DriftKind::GeneralClass, family)
    }

    pub fn ou_h_transform(spec: OuSkewSpec) -> Self {
        Self {
            kind: DriftKind::OuHTransform,
            source: DriftSource::OuHTransform(spec),
            shift: 0.0,
            sigma: 1.0,
        }
    }

    pub fn custom(name: impl Into<String>, f: DriftFn) -> Self {
        Self {
            kind: DriftKind::Custom,
            source: DriftSource::Custom(CustomDrift {
                name: name.into(),
                f,
                horizon: f64::INFINITY,
                descriptor: None,
            }),
            shift: 0.0,
            sigma: 1.0,
        }
    }

    /// `μ ≡ 0` (Brownian motion).
    pub fn zero() -> Self {
        let mut d = Self::custom("brownian", Arc::new(|_, _| 0.0));
        if let DriftSource::Custom(c) = &mut d.source {
            c.descriptor = Some(DriftDescriptor::simple("brownian"));
        }
        d
    }

    /// `μ(x) = −rate·x` (stationary Ornstein–Uhlenbeck).
    pub fn linear(rate: f64) -> Self {
        let mut d = Self::custom("ou_linear", Arc::new(move |x, _| -rate * x));
        if let DriftSource::Custom(c) = &mut d.source {
            let mut desc = DriftDescriptor::simple("ou_linear");
            desc.lambda = Some(rate);
            c.descriptor = Some(desc);
        }
        d
    }

    pub fn with_shift(mut self, x0: f64) -> Self {
        self.shift = x0;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn family(&self) -> Option<&SkewFamily> {
        match &self.source {
            DriftSource::Family(f) => Some(f),
            _ => None,
        }
    }

    pub fn validity_horizon(&self) -> f64 {
        match &self.source {
            DriftSource::Family(f) => f.validity_horizon(),
            DriftSource::OuHTransform(_) => f64::INFINITY,
            DriftSource::Custom(c) => c.horizon,
        }
    }

    /// Same drift for the opposite chirality (custom drifts are returned unchanged).
    pub fn mirrored(&self) -> DriftSpec {
        let mut d = self.clone();
        d.source = match &self.source {
            DriftSource::Family(f) => DriftSource::Family(f.mirrored()),
            DriftSource::OuHTransform(s) => DriftSource::OuHTransform(OuSkewSpec {
                chirality: s.chirality.flip(),
                ..*s
            }),
            DriftSource::Custom(c) => DriftSource::Custom(c.clone()),
        };
        d
    }

    /// `μ(x, t)` without the horizon check; callers validate the time range up front.
    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match &self.source {
            DriftSource::Family(fam) => {
                let a = fam.alpha(t);
                if a == 0.0 {
                    return 0.0;
                }
                let centred = match self.kind {
                    DriftKind::Theorem1 => x,
                    _ => x - self.shift,
                };
                self.sigma * fam.psi(t) * a * mills(a * centred / self.sigma)
            }
            DriftSource::OuHTransform(spec) => drift_theorem4(x, spec),
            DriftSource::Custom(c) => (c.f)(x, t),
        }
    }

    pub fn descriptor(&self) -> Result<DriftDescriptor> {
        let mut d = match &self.source {
            DriftSource::Family(f) => {
                let mut d = DriftDescriptor::simple(match self.kind {
                    DriftKind::Theorem1 => "theorem1",
                    DriftKind::Theorem2 => "theorem2",
                    _ => "general_class",
                });
                d.family = Some(f.descriptor());
                d
            }
            DriftSource::OuHTransform(s) => {
                let mut d = DriftDescriptor::simple("ou_h_transform");
                d.lambda = Some(s.lambda);
                d.chirality = Some(s.chirality);
                d.x0 = Some(s.x0);
                d
            }
            DriftSource::Custom(c) => c.descriptor.clone().ok_or_else(|| {
                SkewError::Unsupported(format!("custom drift `{}` has no JSON form", c.name))
            })?,
        };
        d.shift = self.shift;
        d.sigma = self.sigma;
        Ok(d)
    }
}

/// Returns `μ(x, t)`, rejecting times at or beyond the drift's validity horizon.
pub fn drift_value(spec: &DriftSpec, x: f64, t: f64) -> Result<f64> {
    let h = spec.validity_horizon();
    if !(t < h) {
        return Err(SkewError::HorizonViolation { t, horizon: h });
    }
    Ok(spec.eval(x, t))
}

/// JSON form of a [`DriftSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyDescriptor>,
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirality: Option<Chirality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl DriftDescriptor {
    fn simple(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            family: None,
            shift: 0.0,
            sigma: 1.0,
            lambda: None,
            chirality: None,
            x0: None,
        }
    }

    pub fn build(&self) -> Result<DriftSpec> {
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        let family = || -> Result<SkewFamily> {
            self.family
                .as_ref()
                .ok_or_else(|| invalid("family", format!("required for drift kind `{}`", self.kind)))?
                .build()
        };
        let need_lambda = || self.lambda.ok_or_else(|| invalid("lambda", "required"));
        let d = match self.kind.as_str() {
            "theorem1" => DriftSpec::theorem1(family()?),
            "theorem2" => DriftSpec::theorem2(family()?),
            "general_class" => DriftSpec::general_class(family()?),
            "ou_h_transform" => DriftSpec::ou_h_transform(OuSkewSpec::new(
                need_lambda()?,
                self.chirality.unwrap_or(Chirality::Right),
                self.x0.unwrap_or(0.0),
            )?),
            "brownian" => DriftSpec::zero(),
            "ou_linear" => DriftSpec::linear(need_lambda()?),
            other => return Err(invalid("kind", format!("unknown drift kind `{other}`"))),
        };
        Ok(d.with_shift(self.shift).with_sigma(self.sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic_dists::SQRT_2_OVER_PI;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn theorem1_closed_form() {
        let f = family_theorem1(10.0, Chirality::Right).unwrap();
        assert_eq!(f.alpha(9.0), 1.0);
        assert_eq!(f.validity_horizon(), 10.0);
        assert!(f.alpha(10.0 - 1e-12) > 1e5);
        for &t in &[0.0, 3.0, 9.99] {
            assert_eq!(f.psi(t), 1.0);
        }
        assert!(family_theorem1(0.0, Chirality::Right).is_err());
        assert!(family_theorem1(-1.0, Chirality::Left).is_err());
    }

    #[test]
    fn theorem2_closed_form() {
        let f = family_theorem2(1.0, Chirality::Right).unwrap();
        assert_eq!(f.psi(0.0), 1.0);
        assert_eq!(f.psi(1.0), 0.75);
        assert!((f.psi(1e12) - 0.5).abs() < 1e-11);
        assert_eq!(f.validity_horizon(), f64::INFINITY);
        assert!(family_theorem2(0.0, Chirality::Right).is_err());
        assert_eq!(family_theorem2(2.0, Chirality::Left).unwrap().alpha(3.0), -2.0);
    }

    #[test]
    fn constant_correlation_closed_form() {
        let z = family_constant_correlation(0.0, Chirality::Right).unwrap();
        assert_eq!(z.alpha(0.7), 0.0);
        let f = family_constant_correlation(std::f64::consts::FRAC_1_SQRT_2, Chirality::Right).unwrap();
        assert!((f.alpha(1.0) - 1.0).abs() < 1e-15);
        // e^{Γ(t)} = 1/√t
        for &t in &[0.25, 1.0, 9.0] {
            assert!((f.gamma(t).exp() - 1.0 / t.sqrt()).abs() < 1e-15);
        }
        assert!(family_constant_correlation(1.0, Chirality::Right).is_err());
    }

    #[test]
    fn solver_recovers_theorem1() {
        let t_max = 2.0;
        let knots = grid(0.01, 1.5 * t_max, 60);
        let fam = solve_family_from_psi(Arc::new(|_| 1.0), 1.0 / t_max.sqrt(), Chirality::Right, &knots).unwrap();
        assert!((fam.validity_horizon() - t_max).abs() < 1e-9);
        let exact = family_theorem1(t_max, Chirality::Right).unwrap();
        for t in grid(0.01, 0.99 * t_max, 97) {
            assert!((fam.alpha(t) - exact.alpha(t)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn solver_recovers_theorem2() {
        let a = 1.3;
        let named = family_theorem2(a, Chirality::Left).unwrap();
        let psi_fam = named.clone();
        let fam = solve_family_from_psi(Arc::new(move |t| psi_fam.psi(t)), a, Chirality::Left, &grid(0.05, 10.0, 40)).unwrap();
        assert_eq!(fam.validity_horizon(), f64::INFINITY);
        for t in grid(0.01, 9.9, 80) {
            assert!((fam.alpha(t) + a).abs() < 1e-8, "t={t}: {}", fam.alpha(t));
        }
    }

    #[test]
    fn solver_recovers_constant_correlation() {
        let c = 0.6;
        let fam = solve_family_from_psi(Arc::new(|_| 0.5), c, Chirality::Right, &grid(0.1, 5.0, 30)).unwrap();
        let exact = family_constant_correlation(c, Chirality::Right).unwrap();
        for t in grid(0.01, 4.9, 50) {
            assert!((fam.alpha(t) - exact.alpha(t)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn solver_rejects_bad_input() {
        assert!(solve_family_from_psi(Arc::new(|_| 1.0), -0.1, Chirality::Right, &[1.0]).is_err());
        assert!(solve_family_from_psi(Arc::new(|_| 1.5), 0.1, Chirality::Right, &[1.0]).is_err());
        assert!(solve_family_from_psi(Arc::new(|_| 1.0), 0.1, Chirality::Right, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn ode_residual_small_for_named_families() {
        let fams = [
            family_theorem1(3.0, Chirality::Right).unwrap(),
            family_theorem2(0.8, Chirality::Left).unwrap(),
            family_constant_correlation(0.4, Chirality::Right).unwrap(),
        ];
        for f in &fams {
            let hi = if f.validity_horizon().is_finite() { 0.99 * f.validity_horizon() } else { 10.0 };
            for t in grid(0.01, hi, 50) {
                let r = ode_residual(f, t);
                assert!(r.abs() < 1e-6, "{f:?} t={t}: {r}");
                // analytic derivative agrees with the difference quotient
                let fd = central_derivative(|s| f.alpha(s), t, fd_step(f, t));
                assert!((fd - f.alpha_dot(t)).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn psi_round_trip_through_alpha() {
        let psi: PsiFn = Arc::new(|t: f64| 0.5 + 0.5 * (-t).exp());
        let fam = solve_family_from_psi(psi.clone(), 0.3, Chirality::Right, &grid(0.02, 4.0, 50)).unwrap();
        for t in grid(0.05, 3.5, 30) {
            let back = psi_from_alpha(&fam, t);
            assert!((back - psi(t)).abs() < 1e-8, "t={t}: {back} vs {}", psi(t));
        }
    }

    #[test]
    fn drift_at_origin() {
        let f = family_theorem1(4.0, Chirality::Right).unwrap();
        let d = DriftSpec::theorem1(f.clone());
        let t = 1.5;
        let want = f.alpha(t) * SQRT_2_OVER_PI;
        assert!((drift_value(&d, 0.0, t).unwrap() - want).abs() < 1e-15);
        assert!(drift_value(&d, 0.0, 4.0).is_err());
    }

    #[test]
    fn drift_mirror_antisymmetry() {
        let p = DriftSpec::theorem2(family_theorem2(1.0, Chirality::Right).unwrap());
        let m = p.mirrored();
        for &x in &[-3.0, -0.5, 0.0, 0.2, 4.0] {
            for &t in &[0.1, 1.0, 5.0] {
                assert!((m.eval(x, t) + p.eval(-x, t)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn drift_linear_growth_in_disfavoured_tail() {
        let f = family_theorem2(1.0, Chirality::Right).unwrap();
        let d = DriftSpec::theorem2(f.clone());
        let t = 2.0;
        let x = -40.0;
        let slope = d.eval(x, t) / (-f.psi(t) * f.alpha(t).powi(2) * x);
        assert!((slope - 1.0).abs() < 1e-3);
        for i in 0..=100 {
            let x = -50.0 + i as f64;
            assert!(d.eval(x, t).is_finite());
        }
    }

    #[test]
    fn shift_semantics_differ_by_kind() {
        let f = family_theorem1(2.0, Chirality::Right).unwrap();
        let h = DriftSpec::theorem1(f.clone()).with_shift(1.0);
        let g = DriftSpec::general_class(f).with_shift(1.0);
        assert_eq!(h.eval(0.3, 0.5), DriftSpec::theorem1(family_theorem1(2.0, Chirality::Right).unwrap()).eval(0.3, 0.5));
        assert!((g.eval(1.3, 0.5) - h.eval(0.3, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn sigma_scaling_is_a_change_of_units() {
        // X = σY with Y driven by the unit-σ drift
        let f = family_theorem2(0.7, Chirality::Right).unwrap();
        let unit = DriftSpec::theorem2(f.clone());
        let scaled = DriftSpec::theorem2(f).with_sigma(2.5);
        for &y in &[-1.0, 0.0, 0.8] {
            assert!((scaled.eval(2.5 * y, 1.0) - 2.5 * unit.eval(y, 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn descriptors_round_trip() {
        let fams = [
            family_theorem1(10.0, Chirality::Left).unwrap(),
            family_theorem2(1.0, Chirality::Right).unwrap(),
            family_constant_correlation(0.3, Chirality::Right).unwrap(),
        ];
        for f in &fams {
            let json = serde_json::to_string(&f.descriptor()).unwrap();
            let back: FamilyDescriptor = serde_json::from_str(&json).unwrap();
            let g = back.build().unwrap();
            assert_eq!(g.alpha(0.5), f.alpha(0.5));
            assert_eq!(g.validity_horizon(), f.validity_horizon());
        }
        let bad = r#"{"kind":"theorem2","parameters":{"alpha":1,"beta":2},"chirality":1}"#;
        let d: FamilyDescriptor = serde_json::from_str(bad).unwrap();
        assert!(d.build().is_err());
        let bad = r#"{"kind":"theorem2","parameters":{"alpha":1},"chirality":1,"extra":0}"#;
        assert!(serde_json::from_str::<FamilyDescriptor>(bad).is_err());
    }

    #[test]
    fn numeric_descriptor_rebuilds() {
        let knots = grid(0.05, 3.0, 60);
        let f = solve_family_from_psi(Arc::new(|t: f64| 1.0 / (1.0 + t)), 0.2, Chirality::Right, &knots).unwrap();
        let back = f.descriptor().build().unwrap();
        // ψ is re-interpolated linearly between knots
        for &t in &[0.5, 1.0, 2.5] {
            assert!((back.alpha(t) / f.alpha(t) - 1.0).abs() < 2e-3, "t={t}: {} vs {}", back.alpha(t), f.alpha(t));
        }
    }
}
