//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lfreparam::experiments::{
    cell_distance, layers_experiment, sweep_plane_mae, sweep_reconstruction, sweep_sparsity,
    LayersSettings, SparsitySettings, SweepGrid, SweepResult,
};
use lfreparam::param::{
    image_from_u_infinity, intersect_ray, map_surface_to_image, PlaneDepth, PlaneParam,
};
use lfreparam::render::{reconstruct_epi, render_epi, subsample_epi};
use lfreparam::scene::{
    check_no_self_occlusion, DepthLayer, DepthRange, SceneDef, SurfaceSpec, TextureSpec,
};
use lfreparam::spectrum::{
    chirp_params, delta_s_max, delta_s_max_tilted, dft2_magnitude, fan_bounds_parallel,
    optimal_depths, out_of_bound_energy,
};

const GRID_N: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn standard_grid() -> SweepGrid {
    SweepGrid::linspace((1.0, 2.0), GRID_N, (0.0, 34.0), GRID_N)
}

fn cell_label(grid: &SweepGrid, cell: Option<(usize, usize)>) -> String {
    match cell {
        Some((i, j)) => format!("({:.3}, {:.2})", grid.d_values[i], grid.theta_values[j]),
        None => "none".to_string(),
    }
}

fn random_param(rng: &mut ChaCha8Rng, surface: &SurfaceSpec) -> PlaneParam {
    loop {
        let d = rng.random_range(1.0..2.0);
        let theta = rng.random_range(0.0..34.0);
        let Ok(p) = PlaneParam::standard(PlaneDepth::Finite(d), theta) else {
            continue;
        };
        if check_no_self_occlusion(surface, &p).holds {
            return p;
        }
    }
}

fn criterion_1() -> Outcome {
    let expected = [
        ("A", 1.2554, 1.7446),
        ("B", 0.9994, 1.5584),
        ("C", 0.6541, 1.8459),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, lo, hi) in expected {
        let dr = SceneDef::preset(name)
            .unwrap()
            .surface
            .depth_range()
            .unwrap();
        let ok = (dr.z_min - lo).abs() <= 5e-4 && (dr.z_max - hi).abs() <= 5e-4;
        pass &= ok;
        parts.push(format!("{name}=({:.4}, {:.4})", dr.z_min, dr.z_max));
    }
    Outcome::new(pass, parts.join(" "))
}

fn criterion_2() -> Outcome {
    let scene = SceneDef::scene_a();
    let dr = scene.surface.depth_range().unwrap();
    let opt = optimal_depths(&dr);
    let z_g = (dr.z_min + dr.z_max) / 2.0;
    let d_opt = 2.0 * dr.z_min * dr.z_max / (dr.z_min + dr.z_max);
    let p = PlaneParam::standard(PlaneDepth::Finite(opt.d_opt), 0.0).unwrap();
    let fan = fan_bounds_parallel(&p, &dr, 0.0);
    let asym = (fan.slope_lo + fan.slope_hi).abs();
    let pass = (opt.z_g - 1.5).abs() <= 1e-9
        && (opt.z_g - z_g).abs() <= 1e-9
        && (opt.d_opt - 1.4601).abs() <= 1e-3
        && (opt.d_opt - d_opt).abs() <= 1e-12
        && asym <= 1e-12;
    Outcome::new(
        pass,
        format!(
            "z_G={:.12} D_opt={:.6} slopes=({:.6}, {:.6}) asymmetry={asym:.2e}",
            opt.z_g, opt.d_opt, fan.slope_lo, fan.slope_hi
        ),
    )
}

fn criterion_3() -> Outcome {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut e_map, mut e_inv, mut e_ds, mut e_tilted) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..N {
        let f = rng.random_range(0.5..2.0);
        let d = rng.random_range(0.5..5.0);
        let param = PlaneParam::new(f, PlaneDepth::Finite(d), 0.0, 1.0, 0.3).unwrap();
        let surface = SurfaceSpec::new(
            rng.random_range(0.5..3.0),
            rng.random_range(-40.0..40.0),
            0.0,
            [-0.2, 0.2],
        )
        .unwrap();
        let x = rng.random_range(-0.2..0.2);
        let s = rng.random_range(-1.0..1.0);
        let z = surface.depth(x);
        let parallel = f * (x - s) / z + s * f / d;
        e_map = e_map.max((map_surface_to_image(&param, &surface, x, s) - parallel).abs());

        let u_inf = rng.random_range(-1.0..1.0);
        e_inv = e_inv.max((image_from_u_infinity(&param, s, u_inf) - (u_inf + s * f / d)).abs());

        let z_min = rng.random_range(0.3..2.0);
        let z_max = z_min + rng.random_range(0.01..2.0);
        let wu = rng.random_range(10.0..1000.0);
        let dr = DepthRange::new(z_min, z_max).unwrap();
        let reference = 1.0 / (f * (1.0 / z_min - 1.0 / z_max) * wu);
        let got = delta_s_max(&dr, f, wu, 0.0).unwrap();
        e_ds = e_ds.max((got - reference).abs() / reference);

        let a = rng.random_range(-1.0..0.0);
        let b = a + rng.random_range(0.05..1.0);
        let plane = SurfaceSpec::new(
            rng.random_range(1.0..3.0),
            rng.random_range(-30.0..30.0),
            0.0,
            [a, b],
        );
        let Ok(plane) = plane else { continue };
        let Ok(layer) = DepthLayer::fit(&plane, a, b) else {
            continue;
        };
        let b_l = rng.random_range(0.1..20.0);
        let got = delta_s_max_tilted(&layer, f, wu, b_l).unwrap();
        let reference = 1.0 / (2.0 * b_l);
        e_tilted = e_tilted.max((got - reference).abs() / reference);
    }
    let pass = e_map <= 1e-12 && e_inv <= 1e-12 && e_ds <= 1e-12 && e_tilted <= 1e-12;
    Outcome::new(
        pass,
        format!("max errors: mapping {e_map:.2e}, inverse mapping {e_inv:.2e}, spacing {e_ds:.2e}, plane-layer spacing {e_tilted:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for scene in [SceneDef::scene_a(), SceneDef::scene_b()] {
        let surface = scene.surface;
        for _ in 0..5 {
            let param = random_param(&mut rng, &surface);
            let mut done = 0;
            while done < N {
                let x = rng.random_range(surface.x_min()..surface.x_max());
                let s = rng.random_range(-param.s_max..param.s_max);
                let u = map_surface_to_image(&param, &surface, x, s);
                if u.abs() > param.u_max {
                    continue;
                }
                done += 1;
                match intersect_ray(&param, &surface, s, u) {
                    Ok(back) => worst = worst.max((back - x).abs()),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-9 && failures == 0,
        format!("max |x' - x| = {worst:.2e}, ray misses = {failures}"),
    )
}

fn criterion_5() -> Outcome {
    let scene = SceneDef::scene_a();
    let p = PlaneParam::standard(
        PlaneDepth::Finite(scene.surface.z_offset),
        scene.surface.tilt,
    )
    .unwrap();
    let dense = render_epi(&scene, &p, 256, 256, 0).unwrap();
    let variance = dense.max_column_variance();
    let rec = reconstruct_epi(&subsample_epi(&dense, 64).unwrap(), 256).unwrap();
    let rmse = rec.rmse(&dense);
    Outcome::new(
        variance <= 1e-18 && rmse <= 1e-6,
        format!("max column variance {variance:.2e}, factor-64 RMSE {rmse:.2e}"),
    )
}

struct BaseSweeps {
    grid: SweepGrid,
    per_scene: Vec<(SceneDef, SweepResult, SweepResult)>,
}

fn base_sweeps() -> BaseSweeps {
    let grid = standard_grid();
    let per_scene = [SceneDef::scene_a(), SceneDef::scene_b()]
        .into_iter()
        .map(|scene| {
            let mae = sweep_plane_mae(&scene, &grid).unwrap();
            let sparsity =
                sweep_sparsity(&scene, &grid, &SparsitySettings::new(256, 256), None, 1).unwrap();
            (scene, mae, sparsity)
        })
        .collect();
    BaseSweeps { grid, per_scene }
}

fn within_one(a: Option<(usize, usize)>, b: Option<(usize, usize)>) -> bool {
    matches!((a, b), (Some(a), Some(b)) if cell_distance(a, b) <= 1)
}

fn criterion_6(base: &BaseSweeps) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (scene, mae, sparsity) in &base.per_scene {
        let ok = within_one(sparsity.argopt, mae.argopt);
        pass &= ok;
        parts.push(format!(
            "{}: sparsity argmin {} vs plane MAE argmin {}{}",
            scene.id,
            cell_label(&base.grid, sparsity.argopt),
            cell_label(&base.grid, mae.argopt),
            if ok {
                ""
            } else {
                " (off by more than one cell)"
            }
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_7(base: &BaseSweeps) -> Outcome {
    let mut pass = true;
    let mut moved = Vec::new();
    let mut checked = 0;
    for (scene, _, sparsity) in &base.per_scene {
        let omegas = scene.texture.omegas().to_vec();
        let mut variants: Vec<(String, Option<TextureSpec>, usize)> = Vec::new();
        for b_l in [1.0, 5.0, 10.0] {
            variants.push((
                format!("B_L={b_l}"),
                Some(TextureSpec::NonLambertian {
                    omegas: omegas.clone(),
                    bandwidth: b_l,
                }),
                1,
            ));
        }
        for sigma in [0.025, 0.05, 0.1, 0.25] {
            variants.push((
                format!("sigma={sigma}"),
                Some(TextureSpec::Noisy {
                    omegas: omegas.clone(),
                    sigma,
                    seed: 7,
                }),
                1,
            ));
        }
        for factor in [2, 8, 64] {
            variants.push((format!("factor={factor}"), None, factor));
        }
        for (label, texture, factor) in variants {
            let settings = SparsitySettings::new(256, 256).with_subsample(factor);
            let r = sweep_sparsity(scene, &base.grid, &settings, texture.as_ref(), 1).unwrap();
            checked += 1;
            if !within_one(r.argopt, sparsity.argopt) {
                pass = false;
                moved.push(format!(
                    "{} {label}: {} vs {}",
                    scene.id,
                    cell_label(&base.grid, r.argopt),
                    cell_label(&base.grid, sparsity.argopt)
                ));
            }
        }
    }
    let detail = if moved.is_empty() {
        format!("{checked} perturbed sweeps all within one cell")
    } else {
        format!(
            "{} of {checked} perturbed sweeps moved: {}",
            moved.len(),
            moved.join("; ")
        )
    };
    Outcome::new(pass, detail)
}

fn criterion_8() -> Outcome {
    let grid = standard_grid();
    let r = sweep_reconstruction(&SceneDef::scene_a(), &grid, 512, 512, 64, 1).unwrap();
    let matched = grid.nearest_cell(1.5, 17.0);
    let matched_psnr = r.get(matched.0, matched.1).unwrap_or(f64::NEG_INFINITY);
    let best_flat = (0..grid.d_values.len())
        .filter_map(|i| r.get(i, 0))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = matched_psnr - best_flat;
    let located = within_one(r.argopt, Some(matched));
    Outcome::new(
        located && margin >= 10.0,
        format!(
            "argmax {} (matched cell {}), matched PSNR {matched_psnr:.2} dB, best untilted {best_flat:.2} dB, margin {margin:.2} dB",
            cell_label(&grid, r.argopt),
            cell_label(&grid, Some(matched))
        ),
    )
}

fn criterion_9() -> Outcome {
    let settings = LayersSettings {
        layer_counts: vec![1, 2, 4, 8, 16],
        n_s: 512,
        n_u: 512,
        factors: vec![2, 4, 8, 16, 32, 64, 128, 256],
    };
    let r = layers_experiment(&SceneDef::scene_c(), &settings, 1).unwrap();
    let worse: Vec<String> = r
        .rmse
        .iter()
        .filter(|x| !(x.rmse_tilted <= x.rmse_parallel))
        .map(|x| {
            format!(
                "L={} factor={} ({:.4} > {:.4})",
                x.layers, x.factor, x.rmse_tilted, x.rmse_parallel
            )
        })
        .collect();
    let c = &r.curve;
    let mut counts_ok = true;
    for k in 0..c.layer_counts.len() {
        counts_ok &= c.images_tilted[k] <= c.images_parallel[k];
        if c.layer_counts[k] == 1 {
            counts_ok &= c.images_tilted[k] < c.images_parallel[k];
        }
    }
    let curve: Vec<String> = (0..c.layer_counts.len())
        .map(|k| {
            format!(
                "L={}: {}/{}",
                c.layer_counts[k], c.images_tilted[k], c.images_parallel[k]
            )
        })
        .collect();
    let rmse_part = if worse.is_empty() {
        "tilted RMSE <= parallel at all points".to_string()
    } else {
        format!(
            "tilted RMSE above parallel at {} of {} points: {}",
            worse.len(),
            r.rmse.len(),
            worse.join(", ")
        )
    };
    Outcome::new(
        worse.is_empty() && counts_ok,
        format!(
            "images tilted/parallel [{}]{}; {rmse_part}",
            curve.join(", "),
            if counts_ok {
                ""
            } else {
                " (ordering violated)"
            }
        ),
    )
}

fn criterion_10() -> Outcome {
    let scene = SceneDef::scene_a();
    let p = PlaneParam::standard(PlaneDepth::Infinite, 0.0).unwrap();
    let epi = render_epi(&scene, &p, 512, 512, 0).unwrap();
    let spec = dft2_magnitude(&epi);
    let dr = scene.surface.depth_range().unwrap();
    let fan = fan_bounds_parallel(&p, &dr, spec.ws_step());
    let oob = out_of_bound_energy(&spec, &fan);
    Outcome::new(
        oob <= 0.05,
        format!("out-of-bound energy fraction {oob:.4}"),
    )
}

fn criterion_11() -> Outcome {
    const N: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut e_neg, mut e_inst) = (0.0f64, 0.0f64);
    for _ in 0..N {
        let d = rng.random_range(0.5..3.0);
        let theta = rng.random_range(1.0..60.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let param =
            PlaneParam::new_straddling(1.0, PlaneDepth::Finite(d), theta, 1.0, 0.2679).unwrap();
        let x = rng.random_range(-0.5..0.5);
        let z = rng.random_range(0.5..3.0);
        let wu = rng.random_range(-1000.0..1000.0);
        let c = chirp_params(&param, x, z, wu).unwrap();
        let scale = c.omega0.abs().max(c.b_c.abs()).max(1.0);
        e_neg = e_neg.max((c.b_c + c.omega0).abs() / scale);
        e_inst = e_inst.max((c.instantaneous_frequency(c.s_theta) - c.b_c).abs() / scale);
    }
    Outcome::new(
        e_neg <= 1e-12 && e_inst <= 1e-12,
        format!("max relative |B_C + omega0| = {e_neg:.2e}, max relative |omega_c(s_theta) - B_C| = {e_inst:.2e}"),
    )
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut report = |n: usize, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n}: {status} [{:.1}s] {}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(n);
        }
    };
    report(1, &criterion_1);
    report(2, &criterion_2);
    report(3, &criterion_3);
    report(4, &criterion_4);
    report(5, &criterion_5);
    let base = base_sweeps();
    report(6, &|| criterion_6(&base));
    report(7, &|| criterion_7(&base));
    report(8, &criterion_8);
    report(9, &criterion_9);
    report(10, &criterion_10);
    report(11, &criterion_11);
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
