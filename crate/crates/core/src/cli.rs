//! Command-line front end. Exit codes: 0 ok, 1 config, 2 precondition, 3 I/O.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::experiments::{
    layers_experiment, sweep_plane_mae, sweep_reconstruction, sweep_sparsity, ExperimentError,
    SweepResult,
};
use crate::io::{self, IoError, Manifest};
use crate::param::{ParamError, PlaneParam};
use crate::render::{
    reconstruct_epi, render_epi_with, subsample_epi, OcclusionPolicy, RenderError,
};
use crate::scene::{check_no_self_occlusion, partition_depth_layers, SceneDef, SceneError};
use crate::spectrum::{
    chirp_params, delta_s_max, delta_s_max_tilted, dft2_magnitude_windowed, fan_bounds_parallel,
    fan_bounds_tilted, nyquist, optimal_depths, SpectrumError,
};

#[derive(Debug, Parser)]
#[command(
    name = "lfreparam",
    version,
    about = "2D light-field EPI rendering and spectral analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the configured EPI.
    Render(Common),
    /// Render and write the EPI magnitude spectrum with its fan bounds.
    Spectrum(Common),
    /// Print optimal depths, spacing bounds and chirp terms.
    Guidelines(Common),
    /// Spectrum sparsity and plane distance over the (D, theta) grid.
    SweepSparsity(Common),
    /// Reconstruction PSNR over the (D, theta) grid for each factor.
    Reconstruct(Common),
    /// Depth-layer reconstruction errors and sampling curve.
    Layers(Common),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML run configuration; defaults apply to anything omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Scene preset, overriding the config's scene.
    #[arg(long)]
    pub scene: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Precondition(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

macro_rules! precondition {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Precondition(e.to_string())
            }
        })*
    };
}
precondition!(RenderError, SceneError, ParamError, SpectrumError);

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Results go to stdout, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return if informational { 0 } else { 1 };
        }
    };
    match run(&cli.command) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Render(c)
        | Command::Spectrum(c)
        | Command::Guidelines(c)
        | Command::SweepSparsity(c)
        | Command::Reconstruct(c)
        | Command::Layers(c) => c,
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Render(_) => "render",
        Command::Spectrum(_) => "spectrum",
        Command::Guidelines(_) => "guidelines",
        Command::SweepSparsity(_) => "sweep-sparsity",
        Command::Reconstruct(_) => "reconstruct",
        Command::Layers(_) => "layers",
    }
}

/// Loads the config file and applies command-line overrides.
pub fn load_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
                path: path.clone(),
                source,
            })?;
            toml::from_str::<RunConfig>(&text).map_err(ConfigError::from)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &c.scene {
        cfg.scene = crate::config::SceneSource::Preset { preset: s.clone() };
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = Some(out.to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Run {
    cfg: RunConfig,
    scene: SceneDef,
    param: PlaneParam,
    out: PathBuf,
    artifacts: Vec<PathBuf>,
    report: String,
}

impl Run {
    fn policy(&self) -> OcclusionPolicy {
        if self.cfg.render.nearest_hit {
            OcclusionPolicy::NearestHit
        } else {
            OcclusionPolicy::Strict
        }
    }

    fn path(&mut self, file: &str) -> PathBuf {
        let p = self.out.join(file);
        self.artifacts.push(p.clone());
        p
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.report, "{key} = {value}");
    }

    fn sweep_outputs(&mut self, stem: &str, r: &SweepResult) -> Result<(), CliError> {
        let csv = self.path(&format!("{stem}.csv"));
        io::write_sweep_csv(&csv, r)?;
        let pgm = self.path(&format!("{stem}.pgm"));
        io::write_heatmap(&pgm, &r.metric)?;
        match r.argopt {
            Some((i, j)) => {
                let v = r.metric[i][j].expect("argopt cell is present");
                let msg = format!(
                    "({i}, {j}) D = {} theta = {} value = {v}",
                    r.d_grid[i], r.theta_grid[j]
                );
                self.line(&format!("{stem}.argopt"), msg);
            }
            None => self.line(&format!("{stem}.argopt"), "none"),
        }
        if r.missing_cells() > 0 {
            self.line(&format!("{stem}.missing_cells"), r.missing_cells());
        }
        Ok(())
    }
}

pub fn run(cmd: &Command) -> Result<String, CliError> {
    let c = common(cmd);
    let cfg = load_config(c)?;
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let scene = cfg.scene()?;
    let param = cfg.param.plane_param().map_err(ConfigError::from)?;
    let out = PathBuf::from(cfg.out_dir.clone().unwrap_or_else(|| "out".into()));
    io::ensure_dir(&out)?;
    let mut run = Run {
        cfg,
        scene,
        param,
        out,
        artifacts: vec![],
        report: String::new(),
    };

    match cmd {
        Command::Render(_) => render(&mut run)?,
        Command::Spectrum(_) => spectrum(&mut run)?,
        Command::Guidelines(_) => guidelines(&mut run)?,
        Command::SweepSparsity(_) => sparsity(&mut run)?,
        Command::Reconstruct(_) => reconstruct(&mut run)?,
        Command::Layers(_) => layers(&mut run)?,
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: name(cmd).into(),
        config_hash: run.cfg.semantic_hash()?,
        seed: run.cfg.seed,
        artifacts: run.artifacts.iter().map(|p| file_name(p)).collect(),
    };
    let config_copy = run.out.join("config.toml");
    io::write_text(&config_copy, &run.cfg.to_toml_string()?)?;
    io::write_manifest(&run.out, &manifest)?;
    Ok(run.report)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn render(run: &mut Run) -> Result<(), CliError> {
    let r = &run.cfg.render;
    let epi = render_epi_with(
        &run.scene,
        &run.param,
        r.n_s,
        r.n_u,
        run.cfg.seed,
        run.policy(),
    )?;
    let files = io::write_epi(&run.out, "epi", &epi)?;
    run.artifacts.extend(files);
    run.line("epi", format!("{} x {}", epi.n_s(), epi.n_u()));
    run.line("max_column_variance", epi.max_column_variance());
    Ok(())
}

fn spectrum(run: &mut Run) -> Result<(), CliError> {
    let r = &run.cfg.render;
    let epi = render_epi_with(
        &run.scene,
        &run.param,
        r.n_s,
        r.n_u,
        run.cfg.seed,
        run.policy(),
    )?;
    let spec = dft2_magnitude_windowed(&epi, run.cfg.sweep.window);
    let bounds = if run.param.tilt == 0.0 {
        let dr = run.scene.surface.depth_range()?;
        fan_bounds_parallel(&run.param, &dr, run.scene.texture.angular_bandwidth())
    } else {
        let layer = partition_depth_layers(&run.scene.surface, 1)?[0];
        let mut b = fan_bounds_tilted(&run.param, &layer);
        b.bl_margin = run.scene.texture.angular_bandwidth();
        b
    };
    let files = io::write_spectrum(&run.out, "spectrum", &spec, Some(bounds))?;
    run.artifacts.extend(files);
    run.line("slope_lo", bounds.slope_lo);
    run.line("slope_hi", bounds.slope_hi);
    run.line(
        "out_of_bound_energy",
        crate::spectrum::out_of_bound_energy(&spec, &bounds),
    );
    Ok(())
}

fn guidelines(run: &mut Run) -> Result<(), CliError> {
    let surface = run.scene.surface;
    let dr = surface.depth_range()?;
    let o = optimal_depths(&dr);
    let f = run.param.focal;
    let du = 2.0 * run.param.u_max / (run.cfg.render.n_u - 1) as f64;
    let wu = run.cfg.guidelines.omega_u.unwrap_or_else(|| nyquist(du));
    let b_l = run.scene.texture.angular_bandwidth();
    let layer = partition_depth_layers(&surface, 1)?[0];

    run.line("z_min", dr.z_min);
    run.line("z_max", dr.z_max);
    run.line("z_opt", o.z_opt);
    run.line("z_G", o.z_g);
    run.line("D_opt", o.d_opt);
    run.line("omega_u_max", wu);
    let show = |r: Result<f64, SpectrumError>| match r {
        Ok(v) => v.to_string(),
        Err(SpectrumError::UnboundedBaseline) => "unbounded".into(),
        Err(e) => e.to_string(),
    };
    run.line("delta_s_max", show(delta_s_max(&dr, f, wu, b_l)));
    run.line("delta_s_max_lambertian", show(delta_s_max(&dr, f, wu, 0.0)));
    run.line("fit_z0", layer.fitted_z0);
    run.line("fit_theta", layer.fitted_theta);
    run.line(
        "delta_s_max_tilted",
        show(delta_s_max_tilted(&layer, f, wu, b_l)),
    );
    let occ = check_no_self_occlusion(&surface, &run.param);
    run.line("no_self_occlusion", occ.holds);
    match run.param.s_theta() {
        Some(s) => {
            run.line("s_theta", s);
            let x = run.cfg.guidelines.x;
            let c = chirp_params(&run.param, x, surface.depth(x), wu)?;
            run.line("chirp_omega0", c.omega0);
            run.line("chirp_lambda", c.lambda_c);
            run.line("chirp_B_C", c.b_c);
        }
        None => run.line("s_theta", "none"),
    }
    let path = run.path("guidelines.txt");
    io::write_text(&path, &run.report)?;
    Ok(())
}

fn sparsity(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.sweep_grid()?;
    let r = sweep_sparsity(
        &run.scene,
        &grid,
        &run.cfg.sparsity_settings(),
        None,
        run.cfg.seed,
    )?;
    run.sweep_outputs("sparsity", &r)?;
    let mae = sweep_plane_mae(&run.scene, &grid)?;
    run.sweep_outputs("plane_mae", &mae)?;
    Ok(())
}

fn reconstruct(run: &mut Run) -> Result<(), CliError> {
    let grid = run.cfg.sweep_grid()?;
    let (n_s, n_u) = (run.cfg.render.n_s, run.cfg.render.n_u);
    let dense = render_epi_with(&run.scene, &run.param, n_s, n_u, run.cfg.seed, run.policy())?;
    for factor in run.cfg.reconstruct.factors.clone() {
        if n_s / factor >= 2 {
            let rec = reconstruct_epi(&subsample_epi(&dense, factor)?, n_s)?;
            run.line(&format!("psnr_f{factor}"), dense.psnr(&rec, 1.0));
            let files = io::write_epi(&run.out, &format!("reconstructed_f{factor}"), &rec)?;
            run.artifacts.extend(files);
        }
        let r = sweep_reconstruction(&run.scene, &grid, n_s, n_u, factor, run.cfg.seed)?;
        run.sweep_outputs(&format!("psnr_f{factor}"), &r)?;
    }
    Ok(())
}

fn layers(run: &mut Run) -> Result<(), CliError> {
    let settings = run.cfg.layers_settings();
    let r = layers_experiment(&run.scene, &settings, run.cfg.seed)?;
    let path = run.path("layers_rmse.csv");
    io::write_layers_csv(&path, &r)?;
    let path = run.path("sampling_curve.csv");
    io::write_curve_csv(&path, &r.curve)?;
    let nf = settings.factors.len();
    let grid = |pick: fn(&crate::experiments::LayerRmse) -> f64| -> Vec<Vec<Option<f64>>> {
        r.rmse
            .chunks(nf)
            .map(|row| row.iter().map(|x| Some(pick(x))).collect())
            .collect()
    };
    let path = run.path("rmse_parallel.pgm");
    io::write_heatmap(&path, &grid(|x| x.rmse_parallel))?;
    let path = run.path("rmse_tilted.pgm");
    io::write_heatmap(&path, &grid(|x| x.rmse_tilted))?;
    let better = r
        .rmse
        .iter()
        .filter(|x| x.rmse_tilted <= x.rmse_parallel)
        .count();
    run.line("tilted_not_worse", format!("{better} of {}", r.rmse.len()));
    for k in 0..r.curve.layer_counts.len() {
        let msg = format!(
            "{} parallel, {} tilted",
            r.curve.images_parallel[k], r.curve.images_tilted[k]
        );
        run.line(&format!("images_L{}", r.curve.layer_counts[k]), msg);
    }
    Ok(())
}
