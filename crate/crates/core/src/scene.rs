//! Analytic scene geometry and texture.
//!
//! A scene is a single smooth surface `z(x) = z_O + tan(theta_O) x + q x^2`
//! painted with a monochrome texture built from a handful of cosines. The
//! surface is evaluated for any real `x`; `x_range` only bounds the depth
//! statistics and the layer partition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param::PlaneParam;

/// Samples used by the per-layer least-squares line fit.
pub const LINE_FIT_SAMPLES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid x range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("surface depth {z} at x = {x} is not positive")]
    NonPositiveDepth { x: f64, z: f64 },
    #[error("texture needs at least one positive frequency")]
    EmptyTexture,
    #[error("texture frequency {0} is not positive")]
    NonPositiveFrequency(f64),
    #[error("invalid texture parameter: {0}")]
    InvalidTexture(String),
    #[error("surface is not monotonic over its x range (vertex at x = {0})")]
    NonMonotonic(f64),
    #[error("layer count must be at least 1")]
    NoLayers,
    #[error("unknown scene preset '{0}'")]
    UnknownPreset(String),
}

/// Closed depth interval `[z_min, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub z_min: f64,
    pub z_max: f64,
}

impl DepthRange {
    pub fn new(z_min: f64, z_max: f64) -> Result<Self, SceneError> {
        if !(z_min > 0.0) {
            return Err(SceneError::NonPositiveDepth {
                x: f64::NAN,
                z: z_min,
            });
        }
        if !(z_min <= z_max) {
            return Err(SceneError::InvalidRange(z_min, z_max));
        }
        Ok(Self { z_min, z_max })
    }

    pub fn contains(&self, other: &DepthRange) -> bool {
        self.z_min <= other.z_min && other.z_max <= self.z_max
    }

    pub fn width(&self) -> f64 {
        self.z_max - self.z_min
    }
}

/// Quadratic surface `z(x) = z_offset + tan(tilt) x + quadratic x^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    /// Depth at `x = 0` (m).
    pub z_offset: f64,
    /// Surface tilt (degrees).
    pub tilt: f64,
    /// Quadratic coefficient (1/m).
    pub quadratic: f64,
    /// Bounded extent of the object (m).
    pub x_range: [f64; 2],
}

impl SurfaceSpec {
    pub fn new(
        z_offset: f64,
        tilt: f64,
        quadratic: f64,
        x_range: [f64; 2],
    ) -> Result<Self, SceneError> {
        let s = Self {
            z_offset,
            tilt,
            quadratic,
            x_range,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks `x_min < x_max` and `z > 0` over the range.
    pub fn validate(&self) -> Result<(), SceneError> {
        let [lo, hi] = self.x_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SceneError::InvalidRange(lo, hi));
        }
        if !(self.tilt.abs() < 90.0) {
            return Err(SceneError::InvalidRange(lo, hi));
        }
        self.depth_range().map(|_| ())
    }

    pub fn x_min(&self) -> f64 {
        self.x_range[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x_range[1]
    }

    pub fn tan_tilt(&self) -> f64 {
        self.tilt.to_radians().tan()
    }

    pub fn depth(&self, x: f64) -> f64 {
        self.z_offset + self.tan_tilt() * x + self.quadratic * x * x
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.tan_tilt() + 2.0 * self.quadratic * x
    }

    /// Location of the parabola vertex, if it lies strictly inside `x_range`.
    pub fn interior_vertex(&self) -> Option<f64> {
        interior_vertex(self.tan_tilt(), self.quadratic, self.x_min(), self.x_max())
    }

    /// Exact depth extremes over `x_range`.
    pub fn depth_range(&self) -> Result<DepthRange, SceneError> {
        self.depth_range_over(self.x_min(), self.x_max())
    }

    /// Exact depth extremes over `[a, b]`, from the endpoints and the vertex.
    pub fn depth_range_over(&self, a: f64, b: f64) -> Result<DepthRange, SceneError> {
        let mut z_min = self.depth(a).min(self.depth(b));
        let mut z_max = self.depth(a).max(self.depth(b));
        if let Some(v) = interior_vertex(self.tan_tilt(), self.quadratic, a, b) {
            let zv = self.depth(v);
            z_min = z_min.min(zv);
            z_max = z_max.max(zv);
        }
        if !(z_min > 0.0) {
            let x = if self.depth(a) <= self.depth(b) { a } else { b };
            return Err(SceneError::NonPositiveDepth { x, z: z_min });
        }
        Ok(DepthRange { z_min, z_max })
    }
}

fn interior_vertex(lin: f64, quad: f64, a: f64, b: f64) -> Option<f64> {
    if quad == 0.0 {
        return None;
    }
    let v = -lin / (2.0 * quad);
    (v > a && v < b).then_some(v)
}

/// Unnormalized sinc, `sin(y) / y` with `sinc(0) = 1`.
pub fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-8 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

/// Surface light field `l(x, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureSpec {
    /// `Lambda(x) = 1/(2K) sum_k (cos(omega_k x) + 1)`.
    Lambertian { omegas: Vec<f64> },
    /// `Lambda(x) sinc(B_L s)`, angularly band limited to `|omega_s| <= B_L`.
    NonLambertian { omegas: Vec<f64>, bandwidth: f64 },
    /// Lambertian texture plus i.i.d. Gaussian noise added per rendered pixel.
    Noisy {
        omegas: Vec<f64>,
        sigma: f64,
        seed: u64,
    },
}

impl TextureSpec {
    pub fn omegas(&self) -> &[f64] {
        match self {
            TextureSpec::Lambertian { omegas }
            | TextureSpec::NonLambertian { omegas, .. }
            | TextureSpec::Noisy { omegas, .. } => omegas,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let omegas = self.omegas();
        if omegas.is_empty() {
            return Err(SceneError::EmptyTexture);
        }
        if let Some(&w) = omegas.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(SceneError::NonPositiveFrequency(w));
        }
        match self {
            TextureSpec::NonLambertian { bandwidth, .. } if !(*bandwidth >= 0.0) => {
                Err(SceneError::InvalidTexture(format!("bandwidth {bandwidth}")))
            }
            TextureSpec::Noisy { sigma, .. } if !(*sigma >= 0.0) => {
                Err(SceneError::InvalidTexture(format!("sigma {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Noiseless Lambertian component `Lambda(x)`, always in `[0, 1]`.
    pub fn lambertian(&self, x: f64) -> f64 {
        let omegas = self.omegas();
        let sum: f64 = omegas.iter().map(|w| (w * x).cos() + 1.0).sum();
        (sum / (2.0 * omegas.len() as f64)).clamp(0.0, 1.0)
    }

    /// `l(x, s)` without the render-time noise term.
    pub fn radiance(&self, x: f64, s: f64) -> f64 {
        match self {
            TextureSpec::NonLambertian { bandwidth, .. } => {
                self.lambertian(x) * sinc(bandwidth * s)
            }
            _ => self.lambertian(x),
        }
    }

    /// Angular bandwidth `B_L` (0 for Lambertian variants).
    pub fn angular_bandwidth(&self) -> f64 {
        match self {
            TextureSpec::NonLambertian { bandwidth, .. } => *bandwidth,
            _ => 0.0,
        }
    }

    /// Noise level and seed, for the noisy variant.
    pub fn noise(&self) -> Option<(f64, u64)> {
        match self {
            TextureSpec::Noisy { sigma, seed, .. } => Some((*sigma, *seed)),
            _ => None,
        }
    }
}

/// A complete scene: geometry, texture and an identifier carried into outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDef {
    pub id: String,
    pub surface: SurfaceSpec,
    pub texture: TextureSpec,
}

impl SceneDef {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.surface.validate()?;
        self.texture.validate()
    }

    pub fn with_texture(mut self, texture: TextureSpec) -> Self {
        self.texture = texture;
        self
    }

    /// Loads one of the bundled presets `A`, `B`, `C` (case-insensitive).
    pub fn preset(name: &str) -> Result<SceneDef, SceneError> {
        let text = match name.to_ascii_uppercase().as_str() {
            "A" => include_str!("../presets/scene_a.toml"),
            "B" => include_str!("../presets/scene_b.toml"),
            "C" => include_str!("../presets/scene_c.toml"),
            _ => return Err(SceneError::UnknownPreset(name.to_string())),
        };
        let scene: SceneDef =
            toml::from_str(text).map_err(|e| SceneError::InvalidTexture(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn scene_a() -> SceneDef {
        Self::preset("A").expect("bundled preset A")
    }

    pub fn scene_b() -> SceneDef {
        Self::preset("B").expect("bundled preset B")
    }

    pub fn scene_c() -> SceneDef {
        Self::preset("C").expect("bundled preset C")
    }
}

/// Result of the no-self-occlusion test `|z'(x)| < f / max|u_inf|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionCheck {
    pub holds: bool,
    /// Largest `|z'(x)|` over the x range.
    pub max_slope: f64,
    /// Slope bound implied by the widest captured viewing ray.
    pub slope_limit: f64,
}

impl OcclusionCheck {
    /// How far the steepest surface slope exceeds the bound (0 when it holds).
    pub fn violation(&self) -> f64 {
        (self.max_slope - self.slope_limit).max(0.0)
    }
}

/// The widest viewing ray `max |u_inf|` is taken over the corners of the
/// captured `(s, u)` rectangle, since `u_inf` is bilinear in `(s, u)`. For a
/// parallel plane this is exactly `u_max + s_max f / D`.
pub fn check_no_self_occlusion(surface: &SurfaceSpec, param: &PlaneParam) -> OcclusionCheck {
    let max_slope = surface
        .slope(surface.x_min())
        .abs()
        .max(surface.slope(surface.x_max()).abs());
    let widest = param.max_abs_u_infinity();
    let slope_limit = if widest == 0.0 {
        f64::INFINITY
    } else {
        param.focal / widest
    };
    OcclusionCheck {
        holds: max_slope < slope_limit,
        max_slope,
        slope_limit,
    }
}

/// A contiguous piece of the surface and its best-fit plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthLayer {
    pub x_interval: [f64; 2],
    /// Intercept of the fitted line at `x = 0` (m).
    pub fitted_z0: f64,
    /// Tilt of the fitted line (degrees).
    pub fitted_theta: f64,
    /// Extremes of `z(x) - (fitted_z0 + tan(fitted_theta) x)` over the interval.
    pub residual_range: [f64; 2],
    pub depth_range: DepthRange,
}

impl DepthLayer {
    pub fn r_min(&self) -> f64 {
        self.residual_range[0]
    }

    pub fn r_max(&self) -> f64 {
        self.residual_range[1]
    }

    pub fn contains_x(&self, x: f64) -> bool {
        x >= self.x_interval[0] && x <= self.x_interval[1]
    }

    /// Fits a line to `surface` over `[a, b]`.
    pub fn fit(surface: &SurfaceSpec, a: f64, b: f64) -> Result<DepthLayer, SceneError> {
        // a planar surface is its own fit; skip the round-off of the sums
        let (intercept, slope) = if surface.quadratic == 0.0 {
            (surface.z_offset, surface.tan_tilt())
        } else {
            fit_line(surface, a, b, LINE_FIT_SAMPLES)
        };
        // r(x) = q x^2 + (t - slope) x + (z_O - intercept): quadratic, so its
        // extremes sit at the endpoints or the vertex.
        let lin = surface.tan_tilt() - slope;
        let residual = |x: f64| surface.depth(x) - (intercept + slope * x);
        let mut r_min = residual(a).min(residual(b));
        let mut r_max = residual(a).max(residual(b));
        if let Some(v) = interior_vertex(lin, surface.quadratic, a, b) {
            r_min = r_min.min(residual(v));
            r_max = r_max.max(residual(v));
        }
        Ok(DepthLayer {
            x_interval: [a, b],
            fitted_z0: intercept,
            fitted_theta: slope.atan().to_degrees(),
            residual_range: [r_min, r_max],
            depth_range: surface.depth_range_over(a, b)?,
        })
    }
}

/// Ordinary least squares on `n` uniform samples of `[a, b]`; returns
/// `(intercept, slope)`.
fn fit_line(surface: &SurfaceSpec, a: f64, b: f64, n: usize) -> (f64, f64) {
    let xs: Vec<f64> = (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect();
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_z = xs.iter().map(|&x| surface.depth(x)).sum::<f64>() / n as f64;
    let (mut sxz, mut sxx) = (0.0, 0.0);
    for &x in &xs {
        let dx = x - mean_x;
        sxz += dx * (surface.depth(x) - mean_z);
        sxx += dx * dx;
    }
    let slope = sxz / sxx;
    (mean_z - slope * mean_x, slope)
}

/// Splits the depth range into `n_layers` equal-width z slabs and maps each
/// back to an x interval through the monotone inverse of `z(x)`.
pub fn partition_depth_layers(
    surface: &SurfaceSpec,
    n_layers: usize,
) -> Result<Vec<DepthLayer>, SceneError> {
    if n_layers == 0 {
        return Err(SceneError::NoLayers);
    }
    let (x_lo, x_hi) = (surface.x_min(), surface.x_max());
    if n_layers == 1 {
        return Ok(vec![DepthLayer::fit(surface, x_lo, x_hi)?]);
    }
    if let Some(v) = surface.interior_vertex() {
        return Err(SceneError::NonMonotonic(v));
    }
    let dr = surface.depth_range()?;
    let increasing = surface.depth(x_hi) >= surface.depth(x_lo);
    let mut cuts = Vec::with_capacity(n_layers + 1);
    cuts.push(x_lo);
    for k in 1..n_layers {
        let z_target = dr.z_min + dr.width() * k as f64 / n_layers as f64;
        cuts.push(invert_monotone(surface, z_target, x_lo, x_hi, increasing));
    }
    cuts.push(x_hi);
    if !increasing {
        // z thresholds were placed from z_min upwards, i.e. from x_hi downwards.
        cuts[1..n_layers].reverse();
    }
    cuts.windows(2)
        .map(|w| DepthLayer::fit(surface, w[0], w[1]))
        .collect()
}

fn invert_monotone(
    surface: &SurfaceSpec,
    z: f64,
    mut lo: f64,
    mut hi: f64,
    increasing: bool,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = surface.depth(mid) < z;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
