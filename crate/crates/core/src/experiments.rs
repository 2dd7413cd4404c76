//! Parameter sweeps over `(D, theta)` and the depth-layer sampling experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param::{ParamError, PlaneDepth, PlaneParam};
use crate::render::{
    derive_seed, reconstruct_epi, render_epi, render_epi_with, subsample_epi, trace_hits,
    OcclusionPolicy, RenderError,
};
use crate::scene::{partition_depth_layers, DepthLayer, SceneDef, SceneError, TextureSpec};
use crate::spectrum::{
    delta_s_max, delta_s_max_tilted, dft2_magnitude_windowed, image_count_for, nyquist,
    optimal_depths, sparsity_rmse, SpectrumError, Window,
};

pub const DEFAULT_FOCAL: f64 = 1.0;
pub const DEFAULT_S_MAX: f64 = 1.0;
pub const DEFAULT_U_MAX: f64 = 0.2679;
pub const PLANE_MAE_SAMPLES: usize = 1024;
pub const DEFAULT_KEEP_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error("factor {factor} does not divide {n_s}")]
    Factor { factor: usize, n_s: usize },
}

/// Axes of a sweep: image plane depths (m) and tilts (degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub d_values: Vec<f64>,
    pub theta_values: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl SweepGrid {
    pub fn linspace(d: (f64, f64), n_d: usize, theta: (f64, f64), n_theta: usize) -> Self {
        SweepGrid {
            d_values: linspace(d.0, d.1, n_d),
            theta_values: linspace(theta.0, theta.1, n_theta),
        }
    }

    /// `n x n` grid over `D in [1, 2]` and `theta in [0, 2 theta_fit]`, where
    /// `theta_fit` is the single-layer fitted tilt of the scene.
    pub fn for_scene(scene: &SceneDef, n: usize) -> Result<Self, ExperimentError> {
        let layer = partition_depth_layers(&scene.surface, 1)?[0];
        Ok(Self::linspace(
            (1.0, 2.0),
            n,
            (0.0, 2.0 * layer.fitted_theta.abs()),
            n,
        ))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d_values.len(), self.theta_values.len())
    }

    /// Cell nearest `(d, theta)` in index-normalized distance; ties go to the
    /// smallest `(i, j)`.
    pub fn nearest_cell(&self, d: f64, theta: f64) -> (usize, usize) {
        let step = |v: &[f64]| {
            if v.len() > 1 {
                (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
            } else {
                1.0
            }
        };
        let (sd, st) = (step(&self.d_values), step(&self.theta_values));
        let mut best = ((0, 0), f64::INFINITY);
        for (i, &dv) in self.d_values.iter().enumerate() {
            for (j, &tv) in self.theta_values.iter().enumerate() {
                let dist = ((dv - d) / sd).powi(2) + ((tv - theta) / st).powi(2);
                if dist < best.1 - 1e-12 {
                    best = ((i, j), dist);
                }
            }
        }
        best.0
    }

    fn param(&self, i: usize, j: usize) -> Result<PlaneParam, ParamError> {
        PlaneParam::new(
            DEFAULT_FOCAL,
            PlaneDepth::Finite(self.d_values[i]),
            self.theta_values[j],
            DEFAULT_S_MAX,
            DEFAULT_U_MAX,
        )
    }
}

/// Chebyshev distance between grid cells.
pub fn cell_distance(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    SparsityRmse,
    PlaneMae,
    Psnr,
    Rmse,
}

impl MetricKind {
    pub fn maximize(&self) -> bool {
        matches!(self, MetricKind::Psnr)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::SparsityRmse => "sparsity_rmse",
            MetricKind::PlaneMae => "plane_mae",
            MetricKind::Psnr => "psnr",
            MetricKind::Rmse => "rmse",
        }
    }
}

/// Metric over a sweep grid. Cells whose parameterization or render
/// preconditions fail are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub d_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub metric: Vec<Vec<Option<f64>>>,
    pub metric_kind: MetricKind,
    /// Extremal cell, `None` only when every cell is missing.
    pub argopt: Option<(usize, usize)>,
}

impl SweepResult {
    pub fn new(grid: &SweepGrid, metric: Vec<Vec<Option<f64>>>, metric_kind: MetricKind) -> Self {
        let argopt = argopt(&metric, metric_kind.maximize());
        SweepResult {
            d_grid: grid.d_values.clone(),
            theta_grid: grid.theta_values.clone(),
            metric,
            metric_kind,
            argopt,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.metric[i][j]
    }

    pub fn missing_cells(&self) -> usize {
        self.metric.iter().flatten().filter(|v| v.is_none()).count()
    }
}

/// Row-major scan keeping the first strictly better value.
fn argopt(metric: &[Vec<Option<f64>>], maximize: bool) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (i, row) in metric.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let Some(v) = *v else { continue };
            if v.is_nan() {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, b)) => {
                    if maximize {
                        v > b
                    } else {
                        v < b
                    }
                }
            };
            if better {
                best = Some(((i, j), v));
            }
        }
    }
    best.map(|(idx, _)| idx)
}

fn run_cells<F>(grid: &SweepGrid, kind: MetricKind, cell: F) -> Result<SweepResult, ExperimentError>
where
    F: Fn(usize, usize) -> Option<f64> + Sync,
{
    let (n_d, n_t) = grid.shape();
    if n_d == 0 || n_t == 0 {
        return Err(ExperimentError::EmptyGrid);
    }
    let flat: Vec<Option<f64>> = (0..n_d * n_t)
        .into_par_iter()
        .map(|k| cell(k / n_t, k % n_t))
        .collect();
    let metric = flat.chunks(n_t).map(|r| r.to_vec()).collect();
    Ok(SweepResult::new(grid, metric, kind))
}

/// Rendering and spectrum settings of a sparsity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsitySettings {
    pub n_s: usize,
    pub n_u: usize,
    /// Keep every `subsample`-th camera row before the transform.
    pub subsample: usize,
    pub keep_fraction: f64,
    pub window: Window,
}

impl SparsitySettings {
    pub fn new(n_s: usize, n_u: usize) -> Self {
        SparsitySettings {
            n_s,
            n_u,
            subsample: 1,
            keep_fraction: DEFAULT_KEEP_FRACTION,
            window: Window::Rectangular,
        }
    }

    pub fn with_subsample(mut self, factor: usize) -> Self {
        self.subsample = factor;
        self
    }
}

/// Spectrum sparsity (top-coefficient decimation RMSE) at every grid cell.
pub fn sweep_sparsity(
    scene: &SceneDef,
    grid: &SweepGrid,
    settings: &SparsitySettings,
    texture_override: Option<&TextureSpec>,
    seed: u64,
) -> Result<SweepResult, ExperimentError> {
    let scene = match texture_override {
        Some(t) => scene.clone().with_texture(t.clone()),
        None => scene.clone(),
    };
    scene.validate()?;
    if settings.subsample == 0 || settings.n_s % settings.subsample != 0 {
        return Err(ExperimentError::Factor {
            factor: settings.subsample,
            n_s: settings.n_s,
        });
    }
    run_cells(grid, MetricKind::SparsityRmse, |i, j| {
        let param = grid.param(i, j).ok()?;
        let epi = render_epi(
            &scene,
            &param,
            settings.n_s,
            settings.n_u,
            derive_seed(seed, i as u64, j as u64),
        )
        .ok()?;
        let epi = if settings.subsample > 1 {
            subsample_epi(&epi, settings.subsample).ok()?
        } else {
            epi
        };
        let spec = dft2_magnitude_windowed(&epi, settings.window);
        sparsity_rmse(&spec, settings.keep_fraction).ok()
    })
}

/// Mean `|z(x) - (D + tan(theta) x)|` over uniformly spaced (midpoint) samples.
pub fn plane_mae(scene: &SceneDef, d: f64, theta_deg: f64) -> f64 {
    let s = &scene.surface;
    let (a, b) = (s.x_min(), s.x_max());
    let t = theta_deg.to_radians().tan();
    let n = PLANE_MAE_SAMPLES;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let x = a + (k as f64 + 0.5) * h;
            (s.depth(x) - (d + t * x)).abs()
        })
        .sum::<f64>()
        / n as f64
}

pub fn sweep_plane_mae(scene: &SceneDef, grid: &SweepGrid) -> Result<SweepResult, ExperimentError> {
    run_cells(grid, MetricKind::PlaneMae, |i, j| {
        Some(plane_mae(scene, grid.d_values[i], grid.theta_values[j]))
    })
}

/// PSNR (peak 1) of linear reconstruction after keeping every `factor`-th row.
/// A factor of 1 reproduces the render exactly and yields `+inf`.
pub fn sweep_reconstruction(
    scene: &SceneDef,
    grid: &SweepGrid,
    n_s: usize,
    n_u: usize,
    factor: usize,
    seed: u64,
) -> Result<SweepResult, ExperimentError> {
    scene.validate()?;
    if factor == 0 || n_s % factor != 0 {
        return Err(ExperimentError::Factor { factor, n_s });
    }
    run_cells(grid, MetricKind::Psnr, |i, j| {
        let param = grid.param(i, j).ok()?;
        let dense = render_epi(
            scene,
            &param,
            n_s,
            n_u,
            derive_seed(seed, i as u64, j as u64),
        )
        .ok()?;
        if factor == 1 {
            return Some(f64::INFINITY);
        }
        let rec = reconstruct_epi(&subsample_epi(&dense, factor).ok()?, n_s).ok()?;
        Some(dense.psnr(&rec, 1.0))
    })
}

/// Minimum camera counts per number of layers (maximum over the layers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingCurve {
    pub layer_counts: Vec<usize>,
    pub images_parallel: Vec<usize>,
    pub images_tilted: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRmse {
    pub layers: usize,
    pub factor: usize,
    pub rmse_parallel: f64,
    pub rmse_tilted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayersResult {
    pub rmse: Vec<LayerRmse>,
    pub curve: SamplingCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayersSettings {
    pub layer_counts: Vec<usize>,
    pub n_s: usize,
    pub n_u: usize,
    pub factors: Vec<usize>,
}

/// Parallel plane at the layer's optimal depth.
pub fn layer_parallel_param(layer: &DepthLayer) -> Result<PlaneParam, ParamError> {
    let d = optimal_depths(&layer.depth_range).d_opt;
    PlaneParam::new(
        DEFAULT_FOCAL,
        PlaneDepth::Finite(d),
        0.0,
        DEFAULT_S_MAX,
        DEFAULT_U_MAX,
    )
}

/// Plane on the layer's fitted line. Steep layers put the plane's camera-line
/// crossing inside the camera range, which is allowed here.
pub fn layer_tilted_param(layer: &DepthLayer) -> Result<PlaneParam, ParamError> {
    PlaneParam::new_straddling(
        DEFAULT_FOCAL,
        PlaneDepth::Finite(layer.fitted_z0),
        layer.fitted_theta,
        DEFAULT_S_MAX,
        DEFAULT_U_MAX,
    )
}

/// Squared error sum and pixel count per factor over the pixels whose rays
/// land in `x_interval` (closed on the right only for the last layer).
fn layer_errors(
    scene: &SceneDef,
    param: &PlaneParam,
    x_interval: [f64; 2],
    last: bool,
    settings: &LayersSettings,
    seed: u64,
) -> Result<Vec<(f64, usize)>, ExperimentError> {
    let dense = render_epi_with(
        scene,
        param,
        settings.n_s,
        settings.n_u,
        seed,
        OcclusionPolicy::NearestHit,
    )?;
    let hits = trace_hits(scene, param, settings.n_s, settings.n_u);
    let in_layer =
        |x: f64| x >= x_interval[0] && (x < x_interval[1] || (last && x <= x_interval[1]));
    settings
        .factors
        .iter()
        .map(|&factor| {
            let rec = reconstruct_epi(&subsample_epi(&dense, factor)?, settings.n_s)?;
            let mut acc = (0.0, 0);
            for ((idx, &x), &truth) in hits.indexed_iter().zip(dense.data.iter()) {
                if in_layer(x) {
                    acc.0 += (rec.data[idx] - truth).powi(2);
                    acc.1 += 1;
                }
            }
            Ok(acc)
        })
        .collect()
}

fn combine(parts: &[Vec<(f64, usize)>], k: usize) -> f64 {
    let (sse, n) = parts
        .iter()
        .fold((0.0, 0), |acc, p| (acc.0 + p[k].0, acc.1 + p[k].1));
    if n == 0 {
        0.0
    } else {
        (sse / n as f64).sqrt()
    }
}

/// Theoretical camera counts per layer count for Lambertian layers, using
/// the Nyquist frequency of an `n_u`-pixel image line.
pub fn sampling_curve(
    scene: &SceneDef,
    layer_counts: &[usize],
    n_u: usize,
) -> Result<SamplingCurve, ExperimentError> {
    let du = 2.0 * DEFAULT_U_MAX / (n_u - 1) as f64;
    let wu = nyquist(du);
    let mut curve = SamplingCurve {
        layer_counts: layer_counts.to_vec(),
        images_parallel: vec![],
        images_tilted: vec![],
    };
    for &l in layer_counts {
        let layers = partition_depth_layers(&scene.surface, l)?;
        let (mut par, mut til) = (2, 2);
        for layer in &layers {
            let p = delta_s_max(&layer.depth_range, DEFAULT_FOCAL, wu, 0.0);
            let t = delta_s_max_tilted(layer, DEFAULT_FOCAL, wu, 0.0);
            par = par.max(image_count_for(&p, DEFAULT_S_MAX)?);
            til = til.max(image_count_for(&t, DEFAULT_S_MAX)?);
        }
        curve.images_parallel.push(par);
        curve.images_tilted.push(til);
    }
    Ok(curve)
}

/// Per-layer render, subsample and reconstruct with parallel and tilted
/// planes, composited by ray-hit masks.
pub fn layers_experiment(
    scene: &SceneDef,
    settings: &LayersSettings,
    seed: u64,
) -> Result<LayersResult, ExperimentError> {
    scene.validate()?;
    if let Some(&factor) = settings
        .factors
        .iter()
        .find(|&&f| f == 0 || settings.n_s % f != 0)
    {
        return Err(ExperimentError::Factor {
            factor,
            n_s: settings.n_s,
        });
    }
    let mut rmse = Vec::new();
    for &l in &settings.layer_counts {
        let layers = partition_depth_layers(&scene.surface, l)?;
        let mut parallel = Vec::with_capacity(layers.len());
        let mut tilted = Vec::with_capacity(layers.len());
        for (k, layer) in layers.iter().enumerate() {
            let last = k + 1 == layers.len();
            let layer_seed = derive_seed(seed, l as u64, k as u64);
            parallel.push(layer_errors(
                scene,
                &layer_parallel_param(layer)?,
                layer.x_interval,
                last,
                settings,
                layer_seed,
            )?);
            tilted.push(layer_errors(
                scene,
                &layer_tilted_param(layer)?,
                layer.x_interval,
                last,
                settings,
                layer_seed,
            )?);
        }
        for (k, &factor) in settings.factors.iter().enumerate() {
            rmse.push(LayerRmse {
                layers: l,
                factor,
                rmse_parallel: combine(&parallel, k),
                rmse_tilted: combine(&tilted, k),
            });
        }
    }
    let curve = sampling_curve(scene, &settings.layer_counts, settings.n_u)?;
    Ok(LayersResult { rmse, curve })
}
