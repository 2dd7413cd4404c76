//! EPI rendering by analytic ray casting, angular subsampling, linear
//! reconstruction along `s`, and resampling between parameterizations.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::param::{intersect_ray, rewarp_coords, ParamError, PlaneParam};
use crate::scene::{check_no_self_occlusion, SceneDef, SceneError};

/// Radiance assigned to rays that miss the surface.
pub const BACKGROUND: f64 = 0.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("surface slope {max_slope} exceeds the no-self-occlusion bound {slope_limit}")]
    SelfOcclusion { max_slope: f64, slope_limit: f64 },
    #[error("EPI needs at least 2 samples per axis, got {n_s} x {n_u}")]
    TooSmall { n_s: usize, n_u: usize },
    #[error("subsampling factor {factor} does not divide {n_s} rows")]
    NonDivisibleFactor { factor: usize, n_s: usize },
    #[error("subsampling by {factor} leaves fewer than 2 of {n_s} rows")]
    TooCoarse { factor: usize, n_s: usize },
    #[error("cannot reconstruct {target} rows from {rows} retained rows")]
    TargetMismatch { rows: usize, target: usize },
}

/// What to do when the surface violates the no-self-occlusion bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OcclusionPolicy {
    /// Refuse to render.
    #[default]
    Strict,
    /// Render anyway, keeping the nearest hit along each ray.
    NearestHit,
}

/// Uniform grid of `n` points over `[-half, half]`, both endpoints included.
pub fn centered_grid(n: usize, half: f64) -> Vec<f64> {
    let step = 2.0 * half / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                half
            } else {
                -half + step * i as f64
            }
        })
        .collect()
}

/// A sampled light-field slice `p(s, u)`; rows are cameras, columns pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Epi {
    pub data: Array2<f64>,
    pub s_axis: Vec<f64>,
    pub u_axis: Vec<f64>,
    pub param: PlaneParam,
    pub scene_id: String,
}

impl Epi {
    pub fn n_s(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.data.ncols()
    }

    pub fn ds(&self) -> f64 {
        self.s_axis[1] - self.s_axis[0]
    }

    pub fn du(&self) -> f64 {
        self.u_axis[1] - self.u_axis[0]
    }

    /// Largest variance along `s` over all columns.
    pub fn max_column_variance(&self) -> f64 {
        self.data
            .columns()
            .into_iter()
            .map(|col| {
                let n = col.len() as f64;
                let mean = col.sum() / n;
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
            })
            .fold(0.0, f64::max)
    }

    pub fn mse(&self, other: &Epi) -> f64 {
        assert_eq!(self.data.dim(), other.data.dim(), "EPI shapes differ");
        let sum: f64 = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        sum / self.data.len() as f64
    }

    pub fn rmse(&self, other: &Epi) -> f64 {
        self.mse(other).sqrt()
    }

    /// PSNR in dB for a peak value of `peak`; infinite for identical EPIs.
    pub fn psnr(&self, other: &Epi, peak: f64) -> f64 {
        let mse = self.mse(other);
        if mse == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (peak * peak / mse).log10()
        }
    }

    /// Linear interpolation of row `i` at image coordinate `u`; `BACKGROUND`
    /// outside the sampled range.
    pub fn sample_row(&self, i: usize, u: f64) -> f64 {
        let n = self.n_u();
        let pos = (u - self.u_axis[0]) / self.du();
        let eps = 1e-9;
        if !(pos >= -eps && pos <= (n - 1) as f64 + eps) {
            return BACKGROUND;
        }
        let mut pos = pos.clamp(0.0, (n - 1) as f64);
        if (pos - pos.round()).abs() < eps {
            pos = pos.round();
        }
        let j = (pos.floor() as usize).min(n - 2);
        let frac = pos - j as f64;
        let row = self.data.row(i);
        if frac == 0.0 {
            row[j]
        } else if frac == 1.0 {
            row[j + 1]
        } else {
            row[j] * (1.0 - frac) + row[j + 1] * frac
        }
    }
}

/// Mixes a seed with two indices (splitmix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Surface position hit by every pixel ray; `NaN` where the ray misses.
pub fn trace_hits(scene: &SceneDef, param: &PlaneParam, n_s: usize, n_u: usize) -> Array2<f64> {
    let s_axis = centered_grid(n_s, param.s_max);
    let u_axis = centered_grid(n_u, param.u_max);
    let rows: Vec<Vec<f64>> = s_axis
        .par_iter()
        .map(|&s| {
            u_axis
                .iter()
                .map(|&u| intersect_ray(param, &scene.surface, s, u).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    Array2::from_shape_vec((n_s, n_u), rows.concat()).expect("row lengths are n_u")
}

/// Renders with [`OcclusionPolicy::Strict`].
pub fn render_epi(
    scene: &SceneDef,
    param: &PlaneParam,
    n_s: usize,
    n_u: usize,
    seed: u64,
) -> Result<Epi, RenderError> {
    render_epi_with(scene, param, n_s, n_u, seed, OcclusionPolicy::Strict)
}

/// Casts one ray per `(s_i, u_j)` grid point and evaluates `l(x, s_i)` at the
/// hit. Noisy textures get `sigma * N(0, 1)` per pixel from a ChaCha stream
/// selected by row, so rows can be rendered in any order.
pub fn render_epi_with(
    scene: &SceneDef,
    param: &PlaneParam,
    n_s: usize,
    n_u: usize,
    seed: u64,
    policy: OcclusionPolicy,
) -> Result<Epi, RenderError> {
    if n_s < 2 || n_u < 2 {
        return Err(RenderError::TooSmall { n_s, n_u });
    }
    param.validate()?;
    scene.validate()?;
    if policy == OcclusionPolicy::Strict {
        let check = check_no_self_occlusion(&scene.surface, param);
        if !check.holds {
            return Err(RenderError::SelfOcclusion {
                max_slope: check.max_slope,
                slope_limit: check.slope_limit,
            });
        }
    }

    let s_axis = centered_grid(n_s, param.s_max);
    let u_axis = centered_grid(n_u, param.u_max);
    let noise = scene.texture.noise();
    let rows: Vec<Vec<f64>> = s_axis
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut row: Vec<f64> = u_axis
                .iter()
                .map(|&u| match intersect_ray(param, &scene.surface, s, u) {
                    Ok(x) => scene.texture.radiance(x, s),
                    Err(_) => BACKGROUND,
                })
                .collect();
            if let Some((sigma, tex_seed)) = noise {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tex_seed, 0));
                rng.set_stream(i as u64);
                for v in row.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    let noisy = *v + sigma * n;
                    *v = if noisy.is_finite() { noisy } else { *v };
                }
            }
            row
        })
        .collect();

    Ok(Epi {
        data: Array2::from_shape_vec((n_s, n_u), rows.concat()).expect("row lengths are n_u"),
        s_axis,
        u_axis,
        param: *param,
        scene_id: scene.id.clone(),
    })
}

/// Keeps rows `0, factor, 2 factor, ...`.
pub fn subsample_epi(epi: &Epi, factor: usize) -> Result<Epi, RenderError> {
    let n_s = epi.n_s();
    if factor == 0 || n_s % factor != 0 {
        return Err(RenderError::NonDivisibleFactor { factor, n_s });
    }
    if n_s / factor < 2 {
        return Err(RenderError::TooCoarse { factor, n_s });
    }
    let keep: Vec<usize> = (0..n_s).step_by(factor).collect();
    Ok(Epi {
        data: epi.data.select(ndarray::Axis(0), &keep),
        s_axis: keep.iter().map(|&i| epi.s_axis[i]).collect(),
        u_axis: epi.u_axis.clone(),
        param: epi.param,
        scene_id: epi.scene_id.clone(),
    })
}

/// Linear interpolation along `s` back to `target_n_s` rows. Rows past the
/// last retained one repeat it.
pub fn reconstruct_epi(sub: &Epi, target_n_s: usize) -> Result<Epi, RenderError> {
    let rows = sub.n_s();
    if target_n_s < rows || target_n_s % rows != 0 {
        return Err(RenderError::TargetMismatch {
            rows,
            target: target_n_s,
        });
    }
    let factor = target_n_s / rows;
    let mut data = Array2::zeros((target_n_s, sub.n_u()));
    for (i, mut out) in data.rows_mut().into_iter().enumerate() {
        let k = i / factor;
        let frac = (i % factor) as f64 / factor as f64;
        if frac == 0.0 || k + 1 >= rows {
            out.assign(&sub.data.row(k.min(rows - 1)));
        } else {
            let (a, b) = (sub.data.row(k), sub.data.row(k + 1));
            for ((o, &va), &vb) in out.iter_mut().zip(a.iter()).zip(b.iter()) {
                *o = va * (1.0 - frac) + vb * frac;
            }
        }
    }
    Ok(Epi {
        data,
        s_axis: centered_grid(target_n_s, sub.param.s_max),
        u_axis: sub.u_axis.clone(),
        param: sub.param,
        scene_id: sub.scene_id.clone(),
    })
}

/// Resamples `epi` into the parameterization `dst` (same `f` and cameras),
/// interpolating each source row linearly in `u`.
pub fn rewarp_epi(epi: &Epi, dst: &PlaneParam) -> Epi {
    let src = epi.param;
    if src == *dst {
        return epi.clone();
    }
    let mut data = Array2::zeros((epi.n_s(), epi.n_u()));
    for (i, mut out) in data.rows_mut().into_iter().enumerate() {
        let s = epi.s_axis[i];
        for (o, &u) in out.iter_mut().zip(epi.u_axis.iter()) {
            *o = epi.sample_row(i, rewarp_coords(dst, &src, s, u));
        }
    }
    Epi {
        data,
        s_axis: epi.s_axis.clone(),
        u_axis: epi.u_axis.clone(),
        param: *dst,
        scene_id: epi.scene_id.clone(),
    }
}
