//! Poincaré-ball kernel (curvature -1).
//!
//! Points are plain `&[f64]` slices so the trainer can operate on rows of a
//! flat matrix without copying. [`BallPoint`] is the checked owned form.
//!
//! ```text
//! λ_z       = 2 / (1 - ‖z‖²)
//! d(u, v)   = arcosh(1 + 2‖u - v‖² / ((1 - ‖u‖²)(1 - ‖v‖²)))
//! proj(z)   = z · min(1, (1 - ε) / (‖z‖ + ε))
//! log_0(z)  = 2 artanh(‖z‖) · z / ‖z‖
//! exp_0(t)  = proj(tanh(‖t‖ / 2) · t / (‖t‖ + δ))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPS_BOUNDARY: f64 = 1e-5;
pub const DEFAULT_DELTA_STAB: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub dim: usize,
    pub eps_boundary: f64,
    pub delta_stab: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            eps_boundary: DEFAULT_EPS_BOUNDARY,
            delta_stab: DEFAULT_DELTA_STAB,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("geometry.dim must be positive".into()));
        }
        if !(self.eps_boundary > 0.0 && self.eps_boundary < 1.0) {
            return Err(Error::InvalidConfig(
                "geometry.eps_boundary must lie in (0, 1)".into(),
            ));
        }
        if !(self.delta_stab > 0.0) {
            return Err(Error::InvalidConfig(
                "geometry.delta_stab must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn ball(&self) -> PoincareBall {
        PoincareBall {
            eps: self.eps_boundary,
            delta: self.delta_stab,
        }
    }
}

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vec<f64>);

impl BallPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("ball point coordinate".into()));
        }
        if norm_sq(&coords) >= 1.0 {
            return Err(Error::Parse(format!(
                "point with norm {} is outside the open unit ball",
                norm(&coords)
            )));
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl AsRef<[f64]> for BallPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// λ_z = 2 / (1 - ‖z‖²).
#[inline]
pub fn conformal_factor(z: &[f64]) -> f64 {
    2.0 / (1.0 - norm_sq(z))
}

/// The argument offset `x` in `arcosh(1 + x)` of the distance formula.
#[inline]
pub(crate) fn distance_offset(u: &[f64], v: &[f64]) -> f64 {
    let alpha = 1.0 - norm_sq(u);
    let beta = 1.0 - norm_sq(v);
    (2.0 * dist_sq(u, v) / (alpha * beta)).max(0.0)
}

/// arcosh(1 + x) for x >= 0 without the cancellation of forming 1 + x.
#[inline]
pub(crate) fn acosh1p(x: f64) -> f64 {
    (x + (x * (x + 2.0)).sqrt()).ln_1p()
}

/// Geodesic distance. The arcosh argument is clamped at 1.
#[inline]
pub fn distance(u: &[f64], v: &[f64]) -> f64 {
    acosh1p(distance_offset(u, v))
}

/// Hyperbolic radius 2·artanh(‖z‖), the distance to the origin.
#[inline]
pub fn radius(z: &[f64]) -> f64 {
    2.0 * norm(z).atanh()
}

/// Tangent vector at the origin pointing to `z`.
pub fn log0(z: &[f64]) -> Vec<f64> {
    let n = norm(z);
    if n == 0.0 {
        return vec![0.0; z.len()];
    }
    let scale = 2.0 * n.atanh() / n;
    z.iter().map(|x| x * scale).collect()
}

/// Euclidean gradient of `distance(u, v)` with respect to `u`, accumulated
/// into `out` scaled by `weight`. Coincident points contribute nothing.
pub(crate) fn add_distance_grad_u(u: &[f64], v: &[f64], weight: f64, out: &mut [f64]) {
    let u_sq = norm_sq(u);
    let v_sq = norm_sq(v);
    let uv = dot(u, v);
    let alpha = 1.0 - u_sq;
    let beta = 1.0 - v_sq;
    let x = distance_offset(u, v);
    // d/dx arcosh(1 + x) = 1 / sqrt(x (x + 2))
    let denom = (x * (x + 2.0)).sqrt();
    if denom < 1e-300 {
        return;
    }
    let scale = weight * 4.0 / (beta * alpha * alpha * denom);
    let cu = 1.0 - 2.0 * uv + v_sq;
    for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
        *o += scale * (cu * ui - alpha * vi);
    }
}

/// Ball operations that depend on the stability constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareBall {
    pub eps: f64,
    pub delta: f64,
}

impl Default for PoincareBall {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS_BOUNDARY,
            delta: DEFAULT_DELTA_STAB,
        }
    }
}

impl PoincareBall {
    pub fn new(eps: f64, delta: f64) -> Self {
        Self { eps, delta }
    }

    /// Rescales `z` in place so its norm is below `1 - ε`-ish.
    pub fn project_in_place(&self, z: &mut [f64]) {
        let n = norm(z);
        let scale = ((1.0 - self.eps) / (n + self.eps)).min(1.0);
        if scale < 1.0 {
            z.iter_mut().for_each(|x| *x *= scale);
        }
    }

    pub fn project(&self, z: &[f64]) -> BallPoint {
        let mut out = z.to_vec();
        self.project_in_place(&mut out);
        BallPoint(out)
    }

    /// Möbius addition u ⊕ v followed by projection.
    pub fn mobius_add(&self, u: &[f64], v: &[f64]) -> BallPoint {
        let mut out = vec![0.0; u.len()];
        self.mobius_add_into(u, v, &mut out);
        BallPoint(out)
    }

    pub(crate) fn mobius_add_into(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        let uv = dot(u, v);
        let u_sq = norm_sq(u);
        let v_sq = norm_sq(v);
        let denom = 1.0 + 2.0 * uv + u_sq * v_sq;
        let cu = (1.0 + 2.0 * uv + v_sq) / denom;
        let cv = (1.0 - u_sq) / denom;
        for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
            *o = cu * ui + cv * vi;
        }
        self.project_in_place(out);
    }

    /// Exponential map at the origin in the δ-stabilized form.
    pub fn exp0(&self, t: &[f64]) -> BallPoint {
        let n = norm(t);
        let scale = (n / 2.0).tanh() / (n + self.delta);
        let mut out: Vec<f64> = t.iter().map(|x| x * scale).collect();
        self.project_in_place(&mut out);
        BallPoint(out)
    }
}
