//! Two-plane light-field parameterization with a global image plane at depth
//! `D` that may be tilted by `theta`.
//!
//! Cameras sit on the line `z = 0` at positions `s`, each with a local image
//! plane at depth `f`. `u_inf` is the local coordinate when every principal
//! point is centred; the ray `(s, u_inf)` passes through `x = s + z u_inf / f`.
//! The global image plane is the line `z = D + tan(theta) y`. A ray's image
//! coordinate `u` is where its crossing with that plane projects into the
//! centre camera (`s = 0`), so points lying on the plane keep the same `u` in
//! every view. For `theta = 0` this is `u = u_inf + s f / D`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scene::SurfaceSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("tilt {0} degrees is outside (-90, 90)")]
    TiltOutOfRange(f64),
    #[error("image plane meets the camera line at s_theta = {s_theta}, inside |s| <= {s_max}")]
    CameraCrossesPlane { s_theta: f64, s_max: f64 },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum RayError {
    #[error("ray (s = {s}, u = {u}) does not meet the surface")]
    NoIntersection { s: f64, u: f64 },
}

/// Depth of the global image plane; `Infinite` selects the classical
/// centred-principal-point limit exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlaneDepth {
    Finite(f64),
    Infinite,
}

impl PlaneDepth {
    pub fn finite(&self) -> Option<f64> {
        match self {
            PlaneDepth::Finite(d) => Some(*d),
            PlaneDepth::Infinite => None,
        }
    }

    /// `1 / D`, zero at infinity.
    pub fn inverse(&self) -> f64 {
        match self {
            PlaneDepth::Finite(d) => 1.0 / d,
            PlaneDepth::Infinite => 0.0,
        }
    }
}

impl fmt::Display for PlaneDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaneDepth::Finite(d) => write!(f, "{d}"),
            PlaneDepth::Infinite => write!(f, "infinity"),
        }
    }
}

impl Serialize for PlaneDepth {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            PlaneDepth::Finite(d) => ser.serialize_f64(*d),
            PlaneDepth::Infinite => ser.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for PlaneDepth {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Token(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(d) => Ok(PlaneDepth::Finite(d)),
            Raw::Int(d) => Ok(PlaneDepth::Finite(d as f64)),
            Raw::Token(t) if matches!(t.to_ascii_lowercase().as_str(), "infinity" | "inf") => {
                Ok(PlaneDepth::Infinite)
            }
            Raw::Token(t) => Err(serde::de::Error::custom(format!(
                "expected a depth in meters or \"infinity\", got '{t}'"
            ))),
        }
    }
}

fn default_false() -> bool {
    false
}

/// Capture parameterization `{f, D, theta, s_max, u_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneParam {
    /// Focal length (m).
    pub focal: f64,
    /// Global image plane depth at `s = 0`.
    pub depth: PlaneDepth,
    /// Image plane tilt (degrees).
    pub tilt: f64,
    /// Camera line half extent (m).
    pub s_max: f64,
    /// Local image plane half extent (m).
    pub u_max: f64,
    /// Accept a tilted plane that meets the camera line inside `[-s_max, s_max]`.
    #[serde(default = "default_false", skip_serializing_if = "std::ops::Not::not")]
    pub allow_straddle: bool,
}

impl PlaneParam {
    pub fn new(
        focal: f64,
        depth: PlaneDepth,
        tilt: f64,
        s_max: f64,
        u_max: f64,
    ) -> Result<Self, ParamError> {
        let p = Self {
            focal,
            depth,
            tilt,
            s_max,
            u_max,
            allow_straddle: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Like [`PlaneParam::new`] but allows `s_theta` inside the camera range.
    /// The inverse mapping `u -> u_inf` stays finite for every camera; only
    /// the forward `u_inf -> u` map is singular at `s = s_theta`.
    pub fn new_straddling(
        focal: f64,
        depth: PlaneDepth,
        tilt: f64,
        s_max: f64,
        u_max: f64,
    ) -> Result<Self, ParamError> {
        let p = Self {
            focal,
            depth,
            tilt,
            s_max,
            u_max,
            allow_straddle: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Defaults used throughout the experiments: `f = 1`, `s_max = 1`,
    /// `u_max = 0.2679` (30 degree field of view).
    pub fn standard(depth: PlaneDepth, tilt: f64) -> Result<Self, ParamError> {
        Self::new(1.0, depth, tilt, 1.0, 0.2679)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::NonPositive { name, value })
            }
        };
        positive("f", self.focal)?;
        if let PlaneDepth::Finite(d) = self.depth {
            positive("D", d)?;
        }
        positive("s_max", self.s_max)?;
        positive("u_max", self.u_max)?;
        if !(self.tilt.abs() < 90.0) {
            return Err(ParamError::TiltOutOfRange(self.tilt));
        }
        if let Some(s_theta) = self.s_theta() {
            if !self.allow_straddle && s_theta.abs() <= self.s_max {
                return Err(ParamError::CameraCrossesPlane {
                    s_theta,
                    s_max: self.s_max,
                });
            }
        }
        Ok(())
    }

    pub fn with_depth(self, depth: PlaneDepth) -> Result<Self, ParamError> {
        let p = Self { depth, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tilt(self, tilt: f64) -> Result<Self, ParamError> {
        let p = Self { tilt, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn tan_tilt(&self) -> f64 {
        self.tilt.to_radians().tan()
    }

    /// `tan(theta) / D`, zero for an image plane at infinity.
    pub fn tilt_rate(&self) -> f64 {
        self.tan_tilt() * self.depth.inverse()
    }

    /// Projective factor `1 + s tan(theta) / D`; zero exactly at `s_theta`.
    pub fn scale(&self, s: f64) -> f64 {
        1.0 + s * self.tilt_rate()
    }

    /// Camera position where the tilted image plane meets the camera line,
    /// `-D / tan(theta)`. `None` for untilted or infinitely distant planes.
    pub fn s_theta(&self) -> Option<f64> {
        let d = self.depth.finite()?;
        let t = self.tan_tilt();
        (t != 0.0).then(|| -d / t)
    }

    /// `max |u_inf|` over the corners of `[-s_max, s_max] x [-u_max, u_max]`.
    pub fn max_abs_u_infinity(&self) -> f64 {
        let mut widest: f64 = 0.0;
        for s in [-self.s_max, self.s_max] {
            for u in [-self.u_max, self.u_max] {
                widest = widest.max(u_infinity(self, s, u).abs());
            }
        }
        widest
    }
}

/// Image coordinate of the ray from camera `s` to the surface point at `x`.
pub fn map_surface_to_image(param: &PlaneParam, surface: &SurfaceSpec, x: f64, s: f64) -> f64 {
    let z = surface.depth(x);
    let f = param.focal;
    let parallel = x * f / z + s * f * (param.depth.inverse() - 1.0 / z);
    parallel / param.scale(s)
}

/// `u -> u_inf`: `u (1 + s tan(theta) / D) - s f / D`.
pub fn u_infinity(param: &PlaneParam, s: f64, u: f64) -> f64 {
    u * param.scale(s) - s * param.focal * param.depth.inverse()
}

/// `u_inf -> u`, the inverse of [`u_infinity`] (singular at `s_theta`).
pub fn image_from_u_infinity(param: &PlaneParam, s: f64, u_inf: f64) -> f64 {
    (u_inf + s * param.focal * param.depth.inverse()) / param.scale(s)
}

/// Surface position hit by the ray `(s, u)`.
///
/// Substituting the ray `x = s + z u_inf / f` into the surface gives
/// `q u_inf x^2 + (tan(theta_O) u_inf - f) x + (z_O u_inf + f s) = 0`
/// (the `D`-scaled form of the same quadratic has `A = D u_inf`). Of the
/// roots with positive depth the nearest one is returned.
pub fn intersect_ray(
    param: &PlaneParam,
    surface: &SurfaceSpec,
    s: f64,
    u: f64,
) -> Result<f64, RayError> {
    let u_inf = u_infinity(param, s, u);
    let f = param.focal;
    let a = surface.quadratic * u_inf;
    let b = surface.tan_tilt() * u_inf - f;
    let c = surface.z_offset * u_inf + f * s;
    let miss = RayError::NoIntersection { s, u };

    let mut roots = [f64::NAN; 2];
    if a == 0.0 {
        if b == 0.0 {
            return Err(miss);
        }
        roots[0] = -c / b;
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(miss);
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        roots[0] = q / a;
        if q != 0.0 {
            roots[1] = c / q;
        }
    }
    roots
        .into_iter()
        .filter(|x| x.is_finite())
        .map(|x| (x, surface.depth(x)))
        .filter(|&(_, z)| z > 0.0)
        .min_by(|l, r| l.1.total_cmp(&r.1))
        .map(|(x, _)| x)
        .ok_or(miss)
}

/// Re-expresses the image coordinate of one ray from `src` to `dst`. Both
/// parameterizations must share the focal length and camera positions.
pub fn rewarp_coords(src: &PlaneParam, dst: &PlaneParam, s: f64, u_src: f64) -> f64 {
    image_from_u_infinity(dst, s, u_infinity(src, s, u_src))
}
