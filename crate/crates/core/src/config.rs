//! Run configuration: TOML with one section per concern. Every section and
//! field has a default, so an empty file renders scene A at the standard
//! parameterization.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::experiments::{LayersSettings, SparsitySettings, SweepGrid, DEFAULT_KEEP_FRACTION};
use crate::param::{ParamError, PlaneDepth, PlaneParam};
use crate::scene::{partition_depth_layers, SceneDef, SceneError, TextureSpec};
use crate::spectrum::Window;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Either a shipped preset or a full inline scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSource {
    Preset { preset: String },
    Inline(SceneDef),
}

impl Default for SceneSource {
    fn default() -> Self {
        SceneSource::Preset { preset: "A".into() }
    }
}

/// Camera parameterization; missing fields take the standard capture values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSection {
    pub focal: f64,
    /// Meters, or the token `"infinity"`.
    pub depth: PlaneDepth,
    /// Degrees.
    pub tilt: f64,
    pub s_max: f64,
    pub u_max: f64,
}

impl Default for ParamSection {
    fn default() -> Self {
        ParamSection {
            focal: 1.0,
            depth: PlaneDepth::Finite(1.5),
            tilt: 0.0,
            s_max: 1.0,
            u_max: 0.2679,
        }
    }
}

impl ParamSection {
    pub fn plane_param(&self) -> Result<PlaneParam, ParamError> {
        PlaneParam::new(self.focal, self.depth, self.tilt, self.s_max, self.u_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub n_s: usize,
    pub n_u: usize,
    /// Skip the self-occlusion precondition and keep the nearest hit.
    pub nearest_hit: bool,
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection {
            n_s: 512,
            n_u: 512,
            nearest_hit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub d_range: [f64; 2],
    pub n_d: usize,
    /// Defaults to `[0, 2 theta_fit]` of the single-layer line fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_range: Option<[f64; 2]>,
    pub n_theta: usize,
    pub subsample: usize,
    pub keep_fraction: f64,
    pub window: Window,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            d_range: [1.0, 2.0],
            n_d: 50,
            theta_range: None,
            n_theta: 50,
            subsample: 1,
            keep_fraction: DEFAULT_KEEP_FRACTION,
            window: Window::Rectangular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSection {
    pub factors: Vec<usize>,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        ReconstructSection {
            factors: vec![2, 4, 8, 16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayersSection {
    pub layer_counts: Vec<usize>,
    pub n_s: usize,
    pub n_u: usize,
    pub factors: Vec<usize>,
}

impl Default for LayersSection {
    fn default() -> Self {
        LayersSection {
            layer_counts: (1..=16).collect(),
            n_s: 1024,
            n_u: 512,
            factors: vec![2, 4, 8, 16, 32, 64, 128, 256, 512],
        }
    }
}

/// Evaluation point for the chirp terms printed by `guidelines`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidelinesSection {
    pub x: f64,
    /// Spatial frequency (rad/m); the Nyquist frequency of the u grid if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_u: Option<f64>,
}

impl Default for GuidelinesSection {
    fn default() -> Self {
        GuidelinesSection {
            x: 0.0,
            omega_u: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory; not part of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub scene: SceneSource,
    /// Replaces the scene texture in every subcommand when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub texture: Option<TextureSpec>,
    pub param: ParamSection,
    pub render: RenderSection,
    pub sweep: SweepSection,
    pub reconstruct: ReconstructSection,
    pub layers: LayersSection,
    pub guidelines: GuidelinesSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: None,
            scene: SceneSource::default(),
            texture: None,
            param: ParamSection::default(),
            render: RenderSection::default(),
            sweep: SweepSection::default(),
            reconstruct: ReconstructSection::default(),
            layers: LayersSection::default(),
            guidelines: GuidelinesSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical serialization without `out_dir`.
    pub fn semantic_hash(&self) -> Result<String, ConfigError> {
        let mut canon = self.clone();
        canon.out_dir = None;
        let text = canon.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    pub fn scene(&self) -> Result<SceneDef, ConfigError> {
        let scene = match &self.scene {
            SceneSource::Preset { preset } => SceneDef::preset(preset)?,
            SceneSource::Inline(def) => def.clone(),
        };
        let scene = match &self.texture {
            Some(t) => scene.with_texture(t.clone()),
            None => scene,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid, ConfigError> {
        let s = &self.sweep;
        let theta = match s.theta_range {
            Some(r) => r,
            None => {
                let layer = partition_depth_layers(&self.scene()?.surface, 1)?[0];
                [0.0, 2.0 * layer.fitted_theta.abs()]
            }
        };
        Ok(SweepGrid::linspace(
            (s.d_range[0], s.d_range[1]),
            s.n_d,
            (theta[0], theta[1]),
            s.n_theta,
        ))
    }

    pub fn sparsity_settings(&self) -> SparsitySettings {
        SparsitySettings {
            n_s: self.render.n_s,
            n_u: self.render.n_u,
            subsample: self.sweep.subsample,
            keep_fraction: self.sweep.keep_fraction,
            window: self.sweep.window,
        }
    }

    pub fn layers_settings(&self) -> LayersSettings {
        LayersSettings {
            layer_counts: self.layers.layer_counts.clone(),
            n_s: self.layers.n_s,
            n_u: self.layers.n_u,
            factors: self.layers.factors.clone(),
        }
    }

    /// Checks every numeric field before any computation runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene()?;
        self.param.plane_param()?;
        if self.render.n_s < 2 || self.render.n_u < 2 {
            return Err(invalid("render", "n_s and n_u must be at least 2"));
        }
        let s = &self.sweep;
        if s.n_d == 0 || s.n_theta == 0 {
            return Err(invalid("sweep", "grid sizes must be positive"));
        }
        if !(s.d_range[0] > 0.0 && s.d_range[1] >= s.d_range[0]) {
            return Err(invalid("sweep.d_range", format!("{:?}", s.d_range)));
        }
        if let Some(t) = s.theta_range {
            if !(t[0] <= t[1] && t[0] > -90.0 && t[1] < 90.0) {
                return Err(invalid("sweep.theta_range", format!("{t:?}")));
            }
        }
        if s.subsample == 0
            || self.render.n_s % s.subsample != 0
            || self.render.n_s / s.subsample < 2
        {
            return Err(invalid(
                "sweep.subsample",
                format!("{} for {} rows", s.subsample, self.render.n_s),
            ));
        }
        if !(s.keep_fraction > 0.0 && s.keep_fraction <= 1.0) {
            return Err(invalid("sweep.keep_fraction", s.keep_fraction.to_string()));
        }
        if let Some(&f) = self
            .reconstruct
            .factors
            .iter()
            .find(|&&f| f == 0 || self.render.n_s % f != 0)
        {
            return Err(invalid(
                "reconstruct.factors",
                format!("{f} does not divide {}", self.render.n_s),
            ));
        }
        let l = &self.layers;
        if l.layer_counts.iter().any(|&c| c == 0) {
            return Err(invalid("layers.layer_counts", "counts must be positive"));
        }
        if l.n_s < 2 || l.n_u < 2 {
            return Err(invalid("layers", "n_s and n_u must be at least 2"));
        }
        if let Some(&f) = l
            .factors
            .iter()
            .find(|&&f| f == 0 || l.n_s % f != 0 || l.n_s / f < 2)
        {
            return Err(invalid("layers.factors", format!("{f} for {} rows", l.n_s)));
        }
        if let Some(w) = self.guidelines.omega_u {
            if !(w > 0.0) {
                return Err(invalid("guidelines.omega_u", w.to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.scene().unwrap(), SceneDef::scene_a());
    }

    #[test]
    fn infinity_token() {
        let cfg = RunConfig::from_toml_str("[param]\ndepth = \"infinity\"\n").unwrap();
        assert_eq!(cfg.param.depth, PlaneDepth::Infinite);
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn inline_scene_and_texture() {
        let text = r#"
seed = 3
[scene]
id = "custom"
[scene.surface]
z_offset = 1.2
tilt = 5.0
quadratic = 0.1
x_range = [-0.5, 0.5]
[scene.texture]
kind = "non_lambertian"
omegas = [10.0]
bandwidth = 2.0
[texture]
kind = "noisy"
omegas = [20.0, 30.0]
sigma = 0.1
seed = 5
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let scene = cfg.scene().unwrap();
        assert_eq!(scene.id, "custom");
        assert_eq!(scene.texture.noise(), Some((0.1, 5)));
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            RunConfig::from_toml_str("[scene]\npreset = \"Z\""),
            Err(ConfigError::Scene(_))
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[render]\nn_s = 1"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[reconstruct]\nfactors = [3]"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[render]\nbogus = 1"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_toml_str("[param]\ndepth = 0.5\ntilt = 60.0"),
            Err(ConfigError::Param(_))
        ));
        assert!(RunConfig::from_toml_str("[param]\ndepth = \"far\"").is_err());
    }

    #[test]
    fn hash_ignores_out_dir_only() {
        let base = RunConfig::default();
        let h = base.semantic_hash().unwrap();
        let moved = RunConfig {
            out_dir: Some("elsewhere".into()),
            ..base.clone()
        };
        assert_eq!(moved.semantic_hash().unwrap(), h);
        let reseeded = RunConfig {
            seed: 1,
            ..base.clone()
        };
        assert_ne!(reseeded.semantic_hash().unwrap(), h);
        let mut resized = base.clone();
        resized.render.n_u = 256;
        assert_ne!(resized.semantic_hash().unwrap(), h);
    }

    #[test]
    fn default_theta_range_follows_fit() {
        let cfg = RunConfig::from_toml_str("[sweep]\nn_d = 3\nn_theta = 3").unwrap();
        let grid = cfg.sweep_grid().unwrap();
        assert!((grid.theta_values[2] - 34.0).abs() < 1e-9);
    }
}
