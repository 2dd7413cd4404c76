//! Artifact writers: 16-bit graymaps with TOML sidecars, raw spectra, CSV
//! tables and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{LayersResult, SamplingCurve, SweepResult};
use crate::param::PlaneParam;
use crate::render::Epi;
use crate::spectrum::{FanBounds, SpectrumGrid};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: malformed file: {reason}")]
    Sidecar { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}

fn to_toml<T: Serialize>(path: &Path, value: &T) -> Result<String, IoError> {
    toml::to_string(value).map_err(|e| IoError::Sidecar {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn from_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| IoError::Sidecar {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Linear 16-bit quantization of `[0, max]`; values outside are clamped,
/// non-finite values map to 0.
pub fn quantize(data: &Array2<f64>, max: f64) -> Vec<u16> {
    data.iter()
        .map(|&v| {
            if !v.is_finite() || !(max > 0.0) {
                0
            } else {
                ((v / max).clamp(0.0, 1.0) * 65535.0).round() as u16
            }
        })
        .collect()
}

/// Binary (P5) graymap with maxval 65535, samples big-endian.
pub fn write_pgm16(path: &Path, data: &Array2<f64>, max: f64) -> Result<(), IoError> {
    let (rows, cols) = data.dim();
    let mut bytes = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    bytes.extend(quantize(data, max).iter().flat_map(|v| v.to_be_bytes()));
    fs::write(path, bytes).map_err(io_err(path))
}

fn pgm_error(path: &Path, reason: &str) -> IoError {
    IoError::Sidecar {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads graymaps written by [`write_pgm16`] (no comment lines).
pub fn read_pgm16(path: &Path) -> Result<Array2<u16>, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(pgm_error(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(pgm_error(path, "not a 16-bit binary graymap"));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| pgm_error(path, "bad dimensions"))
    };
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() != rows * cols * 2 {
        return Err(pgm_error(path, "pixel data size mismatch"));
    }
    let px = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), px).expect("checked size"))
}

/// Everything about an EPI except its pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiSidecar {
    pub scene_id: String,
    pub n_s: usize,
    pub n_u: usize,
    /// Radiance mapped to graymap value 65535.
    pub value_max: f64,
    pub param: PlaneParam,
    pub s_axis: Vec<f64>,
    pub u_axis: Vec<f64>,
}

impl EpiSidecar {
    pub fn of(epi: &Epi, value_max: f64) -> Self {
        EpiSidecar {
            scene_id: epi.scene_id.clone(),
            n_s: epi.n_s(),
            n_u: epi.n_u(),
            value_max,
            param: epi.param,
            s_axis: epi.s_axis.clone(),
            u_axis: epi.u_axis.clone(),
        }
    }
}

pub fn write_sidecar(path: &Path, sidecar: &EpiSidecar) -> Result<(), IoError> {
    write_text(path, &to_toml(path, sidecar)?)
}

pub fn read_sidecar(path: &Path) -> Result<EpiSidecar, IoError> {
    from_toml(path)
}

/// Writes `<stem>.pgm` and `<stem>.toml`; the graymap spans `[0, max(1, data max)]`.
pub fn write_epi(dir: &Path, stem: &str, epi: &Epi) -> Result<Vec<PathBuf>, IoError> {
    let max = epi
        .data
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    let pgm = dir.join(format!("{stem}.pgm"));
    let side = dir.join(format!("{stem}.toml"));
    write_pgm16(&pgm, &epi.data, max)?;
    write_sidecar(&side, &EpiSidecar::of(epi, max))?;
    Ok(vec![pgm, side])
}

/// Header of a raw spectrum dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub endianness: String,
    pub layout: String,
    pub ws_axis: Vec<f64>,
    pub wu_axis: Vec<f64>,
    /// Graymap value 65535 corresponds to `log(1 + log_max_mag)`.
    pub log_max_mag: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<FanBounds>,
}

/// Writes `<stem>.pgm` (log magnitude), `<stem>.bin` (f64 LE, row-major)
/// and `<stem>.toml` (header).
pub fn write_spectrum(
    dir: &Path,
    stem: &str,
    spec: &SpectrumGrid,
    bounds: Option<FanBounds>,
) -> Result<Vec<PathBuf>, IoError> {
    let (rows, cols) = spec.mag.dim();
    let log = spec.mag.mapv(f64::ln_1p);
    let log_max = log.iter().copied().fold(0.0, f64::max);
    let pgm = dir.join(format!("{stem}.pgm"));
    write_pgm16(&pgm, &log, log_max)?;

    let bin = dir.join(format!("{stem}.bin"));
    let bytes: Vec<u8> = spec.mag.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(io_err(&bin))?;

    let header = SpectrumHeader {
        rows,
        cols,
        dtype: "f64".into(),
        endianness: "little".into(),
        layout: "row-major, rows along omega_s, DC at (rows/2, cols/2)".into(),
        ws_axis: spec.ws_axis.clone(),
        wu_axis: spec.wu_axis.clone(),
        log_max_mag: log_max.exp_m1(),
        bounds,
    };
    let head = dir.join(format!("{stem}.toml"));
    write_text(&head, &to_toml(&head, &header)?)?;
    Ok(vec![pgm, bin, head])
}

pub fn read_spectrum(bin: &Path, header: &Path) -> Result<SpectrumGrid, IoError> {
    let h: SpectrumHeader = from_toml(header)?;
    let bytes = fs::read(bin).map_err(io_err(bin))?;
    if bytes.len() != h.rows * h.cols * 8 {
        return Err(IoError::Sidecar {
            path: bin.to_path_buf(),
            reason: format!(
                "expected {} bytes, found {}",
                h.rows * h.cols * 8,
                bytes.len()
            ),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(SpectrumGrid {
        mag: Array2::from_shape_vec((h.rows, h.cols), values).expect("checked size"),
        ws_axis: h.ws_axis,
        wu_axis: h.wu_axis,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, IoError> {
    csv::Writer::from_path(path).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), IoError> {
    let wrap = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

/// `D,theta,metric`, row-major; missing cells have an empty metric field.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<(), IoError> {
    let mut rows = Vec::new();
    for (i, d) in result.d_grid.iter().enumerate() {
        for (j, t) in result.theta_grid.iter().enumerate() {
            let m = result.metric[i][j]
                .map(|v| v.to_string())
                .unwrap_or_default();
            rows.push(vec![d.to_string(), t.to_string(), m]);
        }
    }
    write_rows(path, &["D", "theta", "metric"], rows)
}

pub fn write_curve_csv(path: &Path, curve: &SamplingCurve) -> Result<(), IoError> {
    let rows = (0..curve.layer_counts.len())
        .map(|k| {
            vec![
                curve.layer_counts[k].to_string(),
                curve.images_parallel[k].to_string(),
                curve.images_tilted[k].to_string(),
            ]
        })
        .collect();
    write_rows(path, &["L", "images_parallel", "images_tilted"], rows)
}

pub fn write_layers_csv(path: &Path, result: &LayersResult) -> Result<(), IoError> {
    let rows = result
        .rmse
        .iter()
        .map(|r| {
            vec![
                r.layers.to_string(),
                r.factor.to_string(),
                r.rmse_parallel.to_string(),
                r.rmse_tilted.to_string(),
            ]
        })
        .collect();
    write_rows(path, &["L", "factor", "rmse_parallel", "rmse_tilted"], rows)
}

/// Graymap of a metric grid, min to 0 and max to 65535 over finite cells.
/// Missing cells are 0; `+inf` saturates.
pub fn write_heatmap(path: &Path, grid: &[Vec<Option<f64>>]) -> Result<(), IoError> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    let finite: Vec<f64> = grid
        .iter()
        .flatten()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data = Array2::from_shape_fn((rows, cols), |(i, j)| match grid[i][j] {
        None => 0.0,
        Some(v) if v == f64::INFINITY => 1.0,
        Some(v) if v.is_finite() => (v - lo) / span,
        Some(_) => 0.0,
    });
    write_pgm16(path, &data, 1.0)
}

/// Provenance record written next to every set of artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, IoError> {
    let path = dir.join("manifest.toml");
    write_text(&path, &to_toml(&path, manifest)?)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, IoError> {
    from_toml(path)
}
