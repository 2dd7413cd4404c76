//! Discrete EPI spectra, fan-shaped support bounds, camera-spacing guidelines
//! and the chirp parameters of the tilted-plane spectrum.
//!
//! Fan boundary slopes are expressed as `omega_u` per unit `omega_s` along the
//! boundary line. A scene point at depth `z` whose EPI trace has local slope
//! `du/ds = m` puts its energy on `omega_s + m omega_u = 0`, i.e. slope
//! `-1/m`. For a parallel plane `m = f (1/D - 1/z)`, giving the familiar
//! `z/f * D / (D - z)`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param::PlaneParam;
use crate::render::Epi;
use crate::scene::{DepthLayer, DepthRange};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("camera spacing is unbounded (zero spectral height)")]
    UnboundedBaseline,
    #[error("spacing bound denominator {0} is negative")]
    NegativeDenominator(f64),
    #[error("chirp parameters need a tilted plane at finite depth")]
    UntiltedPlane,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Optional taper applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    /// Separable raised-cosine taper.
    Hann,
}

impl Window {
    fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Centered DFT magnitude; `mag[[0, 0]]` is the most negative frequency pair
/// and DC sits at `(n_s / 2, n_u / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub mag: Array2<f64>,
    /// Angular frequency along `s` (rad per unit s).
    pub ws_axis: Vec<f64>,
    /// Spatial frequency along `u` (rad per unit u).
    pub wu_axis: Vec<f64>,
}

impl SpectrumGrid {
    pub fn energy(&self) -> f64 {
        self.mag.iter().map(|m| m * m).sum()
    }

    pub fn dc_index(&self) -> (usize, usize) {
        (self.mag.nrows() / 2, self.mag.ncols() / 2)
    }

    /// Spacing of the `omega_s` axis.
    pub fn ws_step(&self) -> f64 {
        self.ws_axis[1] - self.ws_axis[0]
    }
}

fn frequency_axis(n: usize, step: f64) -> Vec<f64> {
    let half = (n / 2) as f64;
    (0..n)
        .map(|m| 2.0 * PI * (m as f64 - half) / (n as f64 * step))
        .collect()
}

/// Nyquist frequency `pi / du` of a uniform grid.
pub fn nyquist(step: f64) -> f64 {
    PI / step
}

/// Unitary 2D DFT magnitude of `epi`, shifted so DC is centered.
pub fn dft2_magnitude(epi: &Epi) -> SpectrumGrid {
    dft2_magnitude_windowed(epi, Window::Rectangular)
}

pub fn dft2_magnitude_windowed(epi: &Epi, window: Window) -> SpectrumGrid {
    let (rows, cols) = epi.data.dim();
    let (ws, wu) = (window.weights(rows), window.weights(cols));
    let mut buf: Vec<Complex64> = epi
        .data
        .indexed_iter()
        .map(|((i, j), &v)| Complex64::new(v * ws[i] * wu[j], 0.0))
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in buf.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for i in 0..rows {
            column[i] = buf[i * cols + j];
        }
        col_fft.process(&mut column);
        for i in 0..rows {
            buf[i * cols + j] = column[i];
        }
    }

    let norm = 1.0 / ((rows * cols) as f64).sqrt();
    let (hr, hc) = (rows / 2, cols / 2);
    let mut mag = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            mag[[(i + hr) % rows, (j + hc) % cols]] = buf[i * cols + j].norm() * norm;
        }
    }
    SpectrumGrid {
        mag,
        ws_axis: frequency_axis(rows, epi.ds()),
        wu_axis: frequency_axis(cols, epi.du()),
    }
}

/// RMS difference between the magnitude spectrum and a copy that keeps only
/// its `ceil(keep_fraction * N)` largest bins.
pub fn sparsity_rmse(spec: &SpectrumGrid, keep_fraction: f64) -> Result<f64, SpectrumError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(SpectrumError::InvalidArgument(format!(
            "keep fraction {keep_fraction}"
        )));
    }
    let n = spec.mag.len();
    let keep = ((keep_fraction * n as f64).ceil() as usize).min(n);
    let mut values: Vec<f64> = spec.mag.iter().copied().collect();
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let dropped: f64 = values[..n - keep].iter().map(|m| m * m).sum();
    Ok((dropped / n as f64).sqrt())
}

/// Boundary lines of the spectral support plus the angular-bandwidth margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanBounds {
    /// Boundary associated with the nearest depth (`omega_u` per `omega_s`).
    pub slope_lo: f64,
    /// Boundary associated with the farthest depth.
    pub slope_hi: f64,
    /// Widening along `omega_s` (rad per unit s).
    pub bl_margin: f64,
}

impl FanBounds {
    /// EPI trace slopes `du/ds` for both boundaries; infinite fan slopes map to 0.
    pub fn trace_slopes(&self) -> (f64, f64) {
        (-1.0 / self.slope_lo, -1.0 / self.slope_hi)
    }

    pub fn is_maximally_compact(&self) -> bool {
        self.slope_lo.is_infinite() && self.slope_hi.is_infinite()
    }

    /// Whether the bin `(omega_s, omega_u)` lies between the two boundary
    /// lines widened by `bl_margin` along `omega_s` (boundaries included).
    pub fn contains(&self, ws: f64, wu: f64) -> bool {
        let (m1, m2) = self.trace_slopes();
        let (a, b) = (-m1 * wu, -m2 * wu);
        let (lo, hi) = (a.min(b) - self.bl_margin, a.max(b) + self.bl_margin);
        let tol = 1e-12 * (1.0 + ws.abs());
        ws >= lo - tol && ws <= hi + tol
    }
}

/// Fan for a parallel image plane: `z/f * D / (D - z)` at both depth
/// extremes, `z/f` for `D` at infinity. `D = z` yields an infinite slope.
pub fn fan_bounds_parallel(param: &PlaneParam, dr: &DepthRange, b_l: f64) -> FanBounds {
    let f = param.focal;
    let slope = |z: f64| match param.depth.finite() {
        Some(d) => z / f * d / (d - z),
        None => z / f,
    };
    FanBounds {
        slope_lo: slope(dr.z_min),
        slope_hi: slope(dr.z_max),
        bl_margin: b_l,
    }
}

/// Fan for an image plane aligned with a layer's fitted line. A residual `r`
/// at depth `z` traces `du/ds = f r / (D z)`, hence slope `-z D / (f r)`;
/// an exact plane (`r = 0`) gives infinite slopes.
pub fn fan_bounds_tilted(param: &PlaneParam, layer: &DepthLayer) -> FanBounds {
    let f = param.focal;
    let d = param.depth.finite().unwrap_or(layer.fitted_z0);
    let slope = |z: f64, r: f64| {
        if r == 0.0 {
            f64::INFINITY
        } else {
            -z * d / (f * r)
        }
    };
    FanBounds {
        slope_lo: slope(layer.depth_range.z_min, layer.r_min()),
        slope_hi: slope(layer.depth_range.z_max, layer.r_max()),
        bl_margin: 0.0,
    }
}

/// Energy fraction of `spec` falling outside `bounds`.
pub fn out_of_bound_energy(spec: &SpectrumGrid, bounds: &FanBounds) -> f64 {
    let (mut total, mut outside) = (0.0, 0.0);
    for ((i, j), &m) in spec.mag.indexed_iter() {
        let e = m * m;
        total += e;
        if !bounds.contains(spec.ws_axis[i], spec.wu_axis[j]) {
            outside += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outside / total
    }
}

/// Constant-depth reconstruction optimum, plane-scene optimum and the
/// maximally compacting parallel plane depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalDepths {
    /// Harmonic mean of the depth extremes.
    pub z_opt: f64,
    /// Arithmetic mean of the depth extremes.
    pub z_g: f64,
    /// Equals `z_opt`; both boundary slopes become `+/- 2 z_min z_max / (f (z_max - z_min))`.
    pub d_opt: f64,
}

pub fn optimal_depths(dr: &DepthRange) -> OptimalDepths {
    let harmonic = 2.0 / (1.0 / dr.z_min + 1.0 / dr.z_max);
    OptimalDepths {
        z_opt: harmonic,
        z_g: 0.5 * (dr.z_min + dr.z_max),
        d_opt: harmonic,
    }
}

fn spacing_from_height(height: f64) -> Result<f64, SpectrumError> {
    if height.is_nan() || height < 0.0 {
        Err(SpectrumError::NegativeDenominator(height))
    } else if height == 0.0 {
        Err(SpectrumError::UnboundedBaseline)
    } else {
        Ok(1.0 / height)
    }
}

/// Maximum camera spacing for a parallel plane,
/// `|f (1/z_min - 1/z_max) omega_u_max + 2 B_L|^-1`.
pub fn delta_s_max(dr: &DepthRange, f: f64, wu_max: f64, b_l: f64) -> Result<f64, SpectrumError> {
    spacing_from_height(f * (1.0 / dr.z_min - 1.0 / dr.z_max) * wu_max + 2.0 * b_l)
}

/// Maximum camera spacing with the image plane on the layer's fitted line,
/// `|(f / z_O) |r_min / z_min - r_max / z_max| omega_u_max + 2 B_L|^-1`.
pub fn delta_s_max_tilted(
    layer: &DepthLayer,
    f: f64,
    wu_max: f64,
    b_l: f64,
) -> Result<f64, SpectrumError> {
    let dr = layer.depth_range;
    let spread = (layer.r_min() / dr.z_min - layer.r_max() / dr.z_max).abs();
    spacing_from_height(f / layer.fitted_z0 * spread * wu_max + 2.0 * b_l)
}

/// Whether the tilted spacing beats the parallel one for this layer:
/// `(1/z_O)(r_min/z_min - r_max/z_max) <= 1/z_min - 1/z_max`.
pub fn tilted_guideline_advantage(layer: &DepthLayer) -> bool {
    let dr = layer.depth_range;
    (layer.r_min() / dr.z_min - layer.r_max() / dr.z_max).abs() / layer.fitted_z0
        <= 1.0 / dr.z_min - 1.0 / dr.z_max
}

/// Linear chirp `exp(j (omega0 s + lambda_c s^2))` arising for a tilted plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpParams {
    pub omega0: f64,
    pub lambda_c: f64,
    /// Instantaneous frequency at `s_theta`.
    pub b_c: f64,
    pub s_theta: f64,
}

impl ChirpParams {
    pub fn phase(&self, s: f64) -> f64 {
        self.omega0 * s + self.lambda_c * s * s
    }

    /// `d phase / ds = omega0 + 2 lambda_c s`.
    pub fn instantaneous_frequency(&self, s: f64) -> f64 {
        self.omega0 + 2.0 * self.lambda_c * s
    }
}

/// Chirp parameters for the surface point `(x, z)` seen at spatial frequency `wu`.
pub fn chirp_params(
    param: &PlaneParam,
    x: f64,
    z: f64,
    wu: f64,
) -> Result<ChirpParams, SpectrumError> {
    let d = param.depth.finite().ok_or(SpectrumError::UntiltedPlane)?;
    let t = param.tan_tilt();
    if t == 0.0 {
        return Err(SpectrumError::UntiltedPlane);
    }
    if !(z > 0.0) {
        return Err(SpectrumError::InvalidArgument(format!("depth {z}")));
    }
    let k = wu * param.focal / (d * z);
    Ok(ChirpParams {
        omega0: k * (d - z - t * x),
        lambda_c: k * t * (d - z) / d,
        b_c: k * (z - d - t * x),
        s_theta: -d / t,
    })
}

/// Cameras needed to cover `[-s_max, s_max]` at spacing `delta_s`:
/// `ceil(2 s_max / delta_s) + 1`. `None` (unbounded spacing) gives the two
/// endpoint cameras.
pub fn min_image_count(delta_s: Option<f64>, s_max: f64) -> usize {
    match delta_s {
        None => 2,
        Some(ds) => {
            assert!(ds > 0.0, "camera spacing must be positive, got {ds}");
            let ratio = 2.0 * s_max / ds;
            let nearest = ratio.round();
            let intervals = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
                nearest
            } else {
                ratio.ceil()
            };
            (intervals as usize).max(1) + 1
        }
    }
}

/// [`min_image_count`] for a spacing result, mapping `UnboundedBaseline` to `None`.
pub fn image_count_for(
    spacing: &Result<f64, SpectrumError>,
    s_max: f64,
) -> Result<usize, SpectrumError> {
    match spacing {
        Ok(ds) => Ok(min_image_count(Some(*ds), s_max)),
        Err(SpectrumError::UnboundedBaseline) => Ok(min_image_count(None, s_max)),
        Err(e) => Err(e.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::PlaneDepth;
    use crate::render::{centered_grid, render_epi};
    use crate::scene::{partition_depth_layers, SceneDef};

    fn blank_epi(n_s: usize, n_u: usize) -> Epi {
        let param = PlaneParam::standard(PlaneDepth::Finite(1.5), 0.0).unwrap();
        Epi {
            data: Array2::zeros((n_s, n_u)),
            s_axis: centered_grid(n_s, param.s_max),
            u_axis: centered_grid(n_u, param.u_max),
            param,
            scene_id: "test".into(),
        }
    }

    #[test]
    fn constant_epi_is_pure_dc() {
        let mut epi = blank_epi(16, 12);
        epi.data.fill(1.0);
        let spec = dft2_magnitude(&epi);
        let dc = spec.dc_index();
        for ((i, j), &m) in spec.mag.indexed_iter() {
            if (i, j) == dc {
                assert!((m - (16.0 * 12.0f64).sqrt()).abs() < 1e-12);
            } else {
                assert!(m < 1e-12);
            }
        }
        assert_eq!(spec.ws_axis[dc.0], 0.0);
        assert_eq!(spec.wu_axis[dc.1], 0.0);
    }

    #[test]
    fn on_bin_cosine_hits_two_bins() {
        let mut epi = blank_epi(8, 64);
        let k0 = 5.0;
        let w0 = 2.0 * PI * k0 / (64.0 * epi.du());
        let us = epi.u_axis.clone();
        for mut row in epi.data.rows_mut() {
            for (v, &u) in row.iter_mut().zip(us.iter()) {
                *v = (w0 * (u - us[0])).cos();
            }
        }
        let spec = dft2_magnitude(&epi);
        let (dc_s, dc_u) = spec.dc_index();
        let peak = spec.mag[[dc_s, dc_u + 5]].powi(2) + spec.mag[[dc_s, dc_u - 5]].powi(2);
        assert!((peak / spec.energy() - 1.0).abs() < 1e-12);
        assert!((spec.wu_axis[dc_u + 5] - w0).abs() < 1e-9);
    }

    #[test]
    fn off_bin_cosine_leakage_with_taper() {
        let mut epi = blank_epi(8, 256);
        let w0 = 2.0 * PI * 20.5 / (256.0 * epi.du());
        let us = epi.u_axis.clone();
        for mut row in epi.data.rows_mut() {
            for (v, &u) in row.iter_mut().zip(us.iter()) {
                *v = (w0 * u).cos();
            }
        }
        let leak = |spec: &SpectrumGrid| {
            let (_, dc_u) = spec.dc_index();
            let mut near = 0.0;
            for i in 0..spec.mag.nrows() {
                for j in 0..spec.mag.ncols() {
                    let dj = (j as i64 - dc_u as i64).abs();
                    if (18..=23).contains(&dj) {
                        near += spec.mag[[i, j]].powi(2);
                    }
                }
            }
            1.0 - near / spec.energy()
        };
        let tapered = dft2_magnitude_windowed(&epi, Window::Hann);
        assert!(leak(&tapered) < 0.05, "hann leakage {}", leak(&tapered));
        assert!(leak(&dft2_magnitude(&epi)) > leak(&tapered));
    }

    #[test]
    fn parseval_and_symmetry() {
        let param = PlaneParam::standard(PlaneDepth::Finite(1.3), 9.0).unwrap();
        let epi = render_epi(&SceneDef::scene_a(), &param, 33, 40, 0).unwrap();
        let spec = dft2_magnitude(&epi);
        let e_epi: f64 = epi.data.iter().map(|v| v * v).sum();
        assert!((spec.energy() / e_epi - 1.0).abs() < 1e-10);
        let (r, c) = spec.mag.dim();
        // centered index m corresponds to frequency m - n/2; mirror is n - m for even n
        let mirror = |m: usize, n: usize| if n % 2 == 0 { (n - m) % n } else { n - 1 - m };
        for i in 0..r {
            for j in 0..c {
                let (mi, mj) = (mirror(i, r), mirror(j, c));
                assert!((spec.mag[[i, j]] - spec.mag[[mi, mj]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sparsity_edge_cases() {
        let mut epi = blank_epi(10, 10);
        epi.data.fill(0.5);
        let spec = dft2_magnitude(&epi);
        assert_eq!(sparsity_rmse(&spec, 1.0).unwrap(), 0.0);
        // one non-zero bin of 100 is exactly 1%
        assert!(sparsity_rmse(&spec, 0.01).unwrap() < 1e-12);
        assert!(sparsity_rmse(&spec, 0.0).is_err());

        let mut g = SpectrumGrid {
            mag: Array2::from_elem((10, 10), 1.0),
            ws_axis: vec![0.0; 10],
            wu_axis: vec![0.0; 10],
        };
        g.mag[[0, 0]] = 5.0;
        // 99 ones dropped out of 100 bins
        assert!((sparsity_rmse(&g, 0.01).unwrap() - (0.99f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parallel_fan_examples() {
        let dr = SceneDef::scene_a().surface.depth_range().unwrap();
        let inf = PlaneParam::standard(PlaneDepth::Infinite, 0.0).unwrap();
        let fan = fan_bounds_parallel(&inf, &dr, 0.0);
        assert!((fan.slope_lo - 1.2554).abs() < 5e-5);
        assert!((fan.slope_hi - 1.7446).abs() < 5e-5);

        let opt = optimal_depths(&dr);
        let p = PlaneParam::standard(PlaneDepth::Finite(opt.d_opt), 0.0).unwrap();
        let fan = fan_bounds_parallel(&p, &dr, 0.0);
        let expected = 2.0 * dr.z_min * dr.z_max / (dr.z_max - dr.z_min);
        assert!((fan.slope_lo + fan.slope_hi).abs() < 1e-12);
        assert!((fan.slope_lo - expected).abs() < 1e-9);
        assert!((fan.slope_hi + expected).abs() < 1e-9);

        let at_near = PlaneParam::standard(PlaneDepth::Finite(dr.z_min), 0.0).unwrap();
        let fan = fan_bounds_parallel(&at_near, &dr, 0.0);
        assert!(fan.slope_lo.is_infinite());
        assert!(fan.slope_hi.is_finite());
    }

    #[test]
    fn tilted_fan_examples() {
        let a = SceneDef::scene_a().surface;
        let mut exact = partition_depth_layers(&a, 1).unwrap()[0];
        exact.residual_range = [0.0, 0.0];
        let p =
            PlaneParam::standard(PlaneDepth::Finite(exact.fitted_z0), exact.fitted_theta).unwrap();
        assert!(fan_bounds_tilted(&p, &exact).is_maximally_compact());

        let b = SceneDef::scene_b().surface;
        let layer = partition_depth_layers(&b, 1).unwrap()[0];
        let p =
            PlaneParam::standard(PlaneDepth::Finite(layer.fitted_z0), layer.fitted_theta).unwrap();
        let fan = fan_bounds_tilted(&p, &layer);
        assert!(fan.slope_lo.is_finite() && fan.slope_hi.is_finite());

        let mut sym = layer;
        sym.residual_range = [-0.05, 0.05];
        sym.depth_range = DepthRange::new(1.4, 1.4).unwrap();
        let fan = fan_bounds_tilted(&p, &sym);
        assert!((fan.slope_lo + fan.slope_hi).abs() < 1e-12);
        assert!(fan.slope_lo.signum() != fan.slope_hi.signum());
    }

    #[test]
    fn optimal_depth_examples() {
        let dr = SceneDef::scene_a().surface.depth_range().unwrap();
        let o = optimal_depths(&dr);
        assert!((o.z_g - 1.5).abs() < 1e-12);
        assert!((o.d_opt - 1.4601).abs() < 1e-4);
        assert!(o.d_opt <= o.z_g);
        let same = optimal_depths(&DepthRange::new(1.7, 1.7).unwrap());
        assert!((same.z_opt - 1.7).abs() < 1e-15 && same.z_g == 1.7);
    }

    #[test]
    fn spacing_examples() {
        let dr = SceneDef::scene_a().surface.depth_range().unwrap();
        let wu = nyquist(2.0 * 0.2679 / 511.0);
        let direct = 1.0 / ((1.0 / dr.z_min - 1.0 / dr.z_max) * wu);
        let ds = delta_s_max(&dr, 1.0, wu, 0.0).unwrap();
        assert!((ds - direct).abs() <= 1e-15 * direct);
        assert!(ds > 0.0);

        let point = DepthRange::new(1.2, 1.2).unwrap();
        assert!((delta_s_max(&point, 1.0, wu, 5.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(
            delta_s_max(&point, 1.0, wu, 0.0),
            Err(SpectrumError::UnboundedBaseline)
        );
        assert!(matches!(
            delta_s_max(&dr, 1.0, wu, -1e6),
            Err(SpectrumError::NegativeDenominator(_))
        ));
    }

    #[test]
    fn tilted_spacing_examples() {
        let a = SceneDef::scene_a().surface;
        let mut exact = partition_depth_layers(&a, 1).unwrap()[0];
        exact.residual_range = [0.0, 0.0];
        assert!((delta_s_max_tilted(&exact, 1.0, 3000.0, 2.5).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(
            delta_s_max_tilted(&exact, 1.0, 3000.0, 0.0),
            Err(SpectrumError::UnboundedBaseline)
        );

        let c = SceneDef::scene_c().surface;
        let layer = partition_depth_layers(&c, 1).unwrap()[0];
        assert!(tilted_guideline_advantage(&layer));
        let wu = nyquist(2.0 * 0.2679 / 511.0);
        let tilted = delta_s_max_tilted(&layer, 1.0, wu, 0.0).unwrap();
        let parallel = delta_s_max(&layer.depth_range, 1.0, wu, 0.0).unwrap();
        assert!(tilted > parallel);
    }

    #[test]
    fn chirp_examples() {
        let p = PlaneParam::standard(PlaneDepth::Finite(1.5), 17.0).unwrap();
        let c = chirp_params(&p, 0.0, 1.5, 80.0).unwrap();
        assert_eq!((c.omega0, c.lambda_c, c.b_c), (0.0, 0.0, 0.0));
        // bandwidth at s_theta from the instantaneous frequency
        let c = chirp_params(&p, 0.3, 1.7, 120.0).unwrap();
        assert!((c.instantaneous_frequency(c.s_theta) - c.b_c).abs() < 1e-12);
        // at x = 0 the bound mirrors the centre frequency
        let c0 = chirp_params(&p, 0.0, 1.7, 120.0).unwrap();
        assert!((c0.b_c + c0.omega0).abs() < 1e-12);
        // away from x = 0 the two differ by 2 k tan(theta) x
        let k = 120.0 / (1.5 * 1.7);
        assert!((c.b_c + c.omega0 + 2.0 * k * p.tan_tilt() * 0.3).abs() < 1e-12);

        let flat = PlaneParam::standard(PlaneDepth::Finite(1.5), 0.0).unwrap();
        assert_eq!(
            chirp_params(&flat, 0.0, 1.5, 1.0),
            Err(SpectrumError::UntiltedPlane)
        );
    }

    #[test]
    fn image_counts() {
        assert_eq!(min_image_count(Some(2.0), 1.0), 2);
        assert_eq!(min_image_count(Some(1.0), 1.0), 3);
        assert_eq!(min_image_count(Some(0.3), 1.0), 8);
        assert_eq!(min_image_count(None, 1.0), 2);
        assert_eq!(
            image_count_for(&Err(SpectrumError::UnboundedBaseline), 1.0),
            Ok(2)
        );
        assert_eq!(min_image_count(Some(1e9), 1.0), 2);
    }

    #[test]
    fn dc_only_spectrum_in_bound() {
        let mut epi = blank_epi(8, 8);
        epi.data.fill(0.5);
        let spec = dft2_magnitude(&epi);
        let fan = FanBounds {
            slope_lo: 1.0,
            slope_hi: 2.0,
            bl_margin: 0.0,
        };
        assert_eq!(out_of_bound_energy(&spec, &fan), 0.0);
        let open = FanBounds {
            slope_lo: f64::INFINITY,
            slope_hi: f64::INFINITY,
            bl_margin: 1e9,
        };
        let noisy = SpectrumGrid {
            mag: Array2::from_elem((4, 4), 1.0),
            ws_axis: vec![-2.0, -1.0, 0.0, 1.0],
            wu_axis: vec![-2.0, -1.0, 0.0, 1.0],
        };
        assert_eq!(out_of_bound_energy(&noisy, &open), 0.0);
    }
}
