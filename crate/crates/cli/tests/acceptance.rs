//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails. Run with
//! `cargo test -p metrology-cli --test acceptance`.

use metrology_core::baselines::{pgm_fixed_height, pgm_full, CamHeightPrior};
use metrology_core::eval::compute_metrics;
use metrology_core::geometry::{
    depth_from_bottom, height_from_box_exact, height_from_box_hoiem, horizon_from_pitch, project_vertical,
    projection_oracle, CameraParams, GroundObject, VerticalModel,
};
use metrology_core::io::{DetectionDocument, ResultsDocument};
use metrology_core::prior::{Category, PriorMode, PriorTable};
use metrology_core::solver::{solve_scene, RefinementConfig, SceneObservation, SceneProblem, SolverState};
use metrology_core::synth::{generate, HeightModel, NoiseModel, SceneRanges, SceneSpec};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

/// Median relative camera-height error of the grid-search oracle on the
/// noisy scenes of criterion 6, measured once and pinned here.
const ORACLE_MEDIAN_REL: f64 = 0.013509692288106489;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn scene(ranges: &SceneRanges, noise: &NoiseModel, n: usize, seed: u64) -> (SceneSpec, SceneObservation) {
    generate(ranges, noise, n, seed).expect("synthetic scene")
}

fn rel_cam_error(est_cam: f64, generated: &SceneSpec) -> f64 {
    (est_cam - generated.camera.cam_height_m).abs() / generated.camera.cam_height_m
}

/// Random camera and object from the sweep ranges.
fn sweep_sample(rng: &mut ChaCha8Rng) -> (CameraParams, GroundObject) {
    let pitch = rng.random_range(-45.0f64..=45.0).to_radians();
    let fov = rng.random_range(20.0f64..=120.0).to_radians();
    let cam_h = rng.random_range(0.3..=20.0);
    let image_h = rng.random_range(240.0..=2160.0);
    let camera = CameraParams::new(pitch, fov, cam_h, image_h * 4.0 / 3.0, image_h).unwrap();
    let object = GroundObject {
        depth_m: rng.random_range(1.0..=200.0),
        lateral_m: rng.random_range(-5.0..=5.0),
        height_m: rng.random_range(0.2..=5.0),
        width_m: 0.5,
        category: Category::Person,
    };
    (camera, object)
}

const SWEEP: usize = 100_000;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut valid, mut disagree) = (0.0f64, 0, 0);
    for _ in 0..SWEEP {
        let (cam, obj) = sweep_sample(&mut rng);
        let closed = project_vertical(&cam, &obj);
        let top = projection_oracle(&cam, Point3::new(obj.lateral_m, obj.height_m, obj.depth_m));
        let bottom = projection_oracle(&cam, Point3::new(obj.lateral_m, 0.0, obj.depth_m));
        match (closed, top, bottom) {
            (Ok(span), Ok(t), Ok(b)) => {
                valid += 1;
                let h = cam.image_h_px;
                let dev = ((span.v_top * h - t.1).abs()).max((span.v_bottom * h - b.1).abs());
                worst = worst.max(dev / h);
            }
            (Err(_), Err(_), _) => {}
            _ => disagree += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && disagree == 0 && secs < 5.0,
        format!(
            "oracle equivalence: max deviation {worst:.2e} image heights (tol 1e-9), {valid} of {SWEEP} visible, \
             {disagree} validity disagreements, {secs:.2} s (limit 5 s)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_h, mut worst_z, mut valid) = (0.0f64, 0.0f64, 0);
    for _ in 0..SWEEP {
        let (cam, obj) = sweep_sample(&mut rng);
        let Ok(span) = project_vertical(&cam, &obj) else {
            continue;
        };
        valid += 1;
        let h = height_from_box_exact(&cam, span).unwrap();
        let z = depth_from_bottom(&cam, span.v_bottom).unwrap();
        worst_h = worst_h.max((h - obj.height_m).abs() / obj.height_m);
        worst_z = worst_z.max((z - obj.depth_m).abs() / obj.depth_m);
    }
    outcome(
        worst_h <= 1e-9 && worst_z <= 1e-9,
        format!("round-trip inversions: max relative error height {worst_h:.2e}, depth {worst_z:.2e} (tol 1e-9) over {valid} configurations"),
    )
}

fn criterion_3() -> Outcome {
    // Level camera: the linear model is exact.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut level_gap = 0.0f64;
    for _ in 0..10_000 {
        let (cam, obj) = sweep_sample(&mut rng);
        let cam =
            CameraParams::new(0.0, cam.fov_rad, cam.cam_height_m, cam.image_w_px, cam.image_h_px).unwrap();
        let span = project_vertical(&cam, &obj).unwrap();
        let exact = height_from_box_exact(&cam, span).unwrap();
        let hoiem = height_from_box_hoiem(cam.cam_height_m, horizon_from_pitch(&cam), span).unwrap();
        level_gap = level_gap.max((hoiem - exact).abs());
    }

    // Pitched camera on noiseless synthetic scenes.
    let ranges = SceneRanges {
        pitch_deg: [15.0, 15.0],
        fov_deg: [60.0, 60.0],
        ..SceneRanges::default()
    };
    let (mut gap, mut err_exact, mut err_hoiem, mut count) = (0.0, 0.0, 0.0, 0);
    for seed in 0..100 {
        let (generated, obs) = scene(&ranges, &NoiseModel::default(), 5, seed);
        for (b, truth) in obs.boxes.iter().zip(&generated.truth().heights_m) {
            let exact = height_from_box_exact(&generated.camera, b.span()).unwrap();
            let hoiem =
                height_from_box_hoiem(generated.camera.cam_height_m, generated.horizon(), b.span()).unwrap();
            gap += (hoiem - exact).abs();
            err_exact += (exact - truth).abs();
            err_hoiem += (hoiem - truth).abs();
            count += 1;
        }
    }
    let n = count as f64;
    let (gap, err_exact, err_hoiem) = (gap / n, err_exact / n, err_hoiem / n);
    outcome(
        level_gap <= 1e-12 && gap > 1e-3 && 10.0 * err_exact <= err_hoiem,
        format!(
            "linear model: level gap {level_gap:.2e} m (tol 1e-12); at 15 deg mean gap {gap:.4} m (> 1e-3), \
             mean error exact {err_exact:.2e} m vs linear {err_hoiem:.4} m (needs 10x)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let ranges = SceneRanges::default().with_heights(HeightModel::Mean);
    let config = RefinementConfig::default();
    let worst = (0..100)
        .map(|seed| {
            let (generated, obs) = scene(&ranges, &NoiseModel::default(), 3, seed);
            rel_cam_error(
                solve_scene(&obs, &PriorTable::default(), &config)
                    .unwrap()
                    .cam_height_m,
                &generated,
            )
        })
        .fold(0.0f64, f64::max);
    outcome(
        worst <= 1e-3 && config.num_layers == 3,
        format!("prior-anchored recovery: max relative camera height error {worst:.2e} over 100 scenes (tol 1e-3)"),
    )
}

fn criterion_5() -> Outcome {
    let ranges = SceneRanges::default().persons_only();
    let errors: Vec<f64> = (0..200)
        .map(|seed| {
            let (generated, obs) = scene(&ranges, &NoiseModel::default(), 50, seed);
            rel_cam_error(
                solve_scene(&obs, &PriorTable::default(), &Default::default())
                    .unwrap()
                    .cam_height_m,
                &generated,
            )
        })
        .collect();
    let m = median(errors);
    outcome(
        m <= 0.05,
        format!(
            "statistical recovery: median relative camera height error {:.2}% over 200 scenes of 50 (tol 5%)",
            100.0 * m
        ),
    )
}

/// Camera height minimizing the prior loss of the heights implied by each box,
/// by exhaustive search on a 1e-3 m grid over the solver's bounds.
fn grid_oracle(obs: &SceneObservation, priors: &PriorTable, bounds: [f64; 2]) -> f64 {
    let model = VerticalModel::from_horizon(obs.horizon.v0, obs.fov_rad, obs.principal_v).unwrap();
    // Exact heights scale linearly with the camera height.
    let terms: Vec<(f64, f64, f64)> = obs
        .boxes
        .iter()
        .map(|b| {
            let g = model.height_from_span(1.0, b.span()).unwrap();
            let p = priors.get(b.category).unwrap();
            (g, p.mu_m, p.sigma_m)
        })
        .collect();
    let steps = ((bounds[1] - bounds[0]) / 1e-3).round() as usize;
    let mut best = (f64::INFINITY, bounds[0]);
    for k in 0..=steps {
        let cam = bounds[0] + k as f64 * 1e-3;
        let loss: f64 = terms
            .iter()
            .map(|&(g, mu, sigma)| {
                let z = (cam * g - mu) / sigma;
                0.5 * z * z + sigma.ln()
            })
            .sum();
        if loss < best.0 {
            best = (loss, cam);
        }
    }
    best.1
}

fn criterion_6() -> Outcome {
    let ranges = SceneRanges::default();
    let config = RefinementConfig::default();
    let priors = PriorTable::default();
    let (mut solver, mut oracle) = (Vec::new(), Vec::new());
    for seed in 0..200 {
        let (generated, obs) = scene(&ranges, &NoiseModel::boxes(0.002), 20, seed);
        solver.push(rel_cam_error(
            solve_scene(&obs, &priors, &config).unwrap().cam_height_m,
            &generated,
        ));
        oracle.push(rel_cam_error(
            grid_oracle(&obs, &priors, config.cam_height_bounds),
            &generated,
        ));
    }
    let (s, o) = (median(solver), median(oracle));
    let calibrated = (o - ORACLE_MEDIAN_REL).abs() <= 1e-6;
    outcome(
        s <= 0.15 && calibrated,
        format!(
            "noise robustness: median relative camera height error {:.2}% (tol 15%); grid oracle {:.2}%, pinned {:.2}%",
            100.0 * s,
            100.0 * o,
            100.0 * ORACLE_MEDIAN_REL
        ),
    )
}

fn criterion_7() -> Outcome {
    let ranges = SceneRanges::default();
    let (mut violations, mut layers) = (0, 0);
    for seed in 0..1000u64 {
        let noise = NoiseModel {
            box_sigma: [0.0, 0.001, 0.002, 0.005][(seed % 4) as usize],
            height_outlier_rate: if seed % 3 == 0 { 0.2 } else { 0.0 },
            ..NoiseModel::default()
        };
        let config = RefinementConfig {
            prior_mode: if seed % 2 == 0 {
                PriorMode::LogDensity
            } else {
                PriorMode::Density
            },
            ..Default::default()
        };
        let (_, obs) = scene(&ranges, &noise, 1 + (seed % 15) as usize, seed);
        let est = solve_scene(&obs, &PriorTable::default(), &config).unwrap();
        for w in est.trace.windows(2) {
            layers += 1;
            if w[1].total_loss > w[0].total_loss {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "cascade descent: {violations} loss increases over {layers} layer transitions in 1000 scenes"
        ),
    )
}

fn relative_gap(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ranges = SceneRanges::default();
    let priors = PriorTable::default();
    let (mut worst_top, mut worst_loss, mut states, mut seed) = (0.0f64, 0.0f64, 0, 0u64);
    while states < 1000 {
        seed += 1;
        let (generated, obs) = scene(&ranges, &NoiseModel::boxes(0.002), 1 + (seed % 6) as usize, seed);
        let mode = if seed % 2 == 0 {
            PriorMode::LogDensity
        } else {
            PriorMode::Density
        };
        let config = RefinementConfig {
            prior_mode: mode,
            ..Default::default()
        };
        let problem = SceneProblem::new(&obs, &priors, &config).unwrap();
        let state = SolverState {
            cam_height_m: generated.camera.cam_height_m * rng.random_range(0.6..1.6),
            heights_m: (0..problem.len()).map(|_| rng.random_range(1.0..2.4)).collect(),
        };
        // Jacobian of each reprojected top.
        let model = problem.model();
        for (b, &h) in obs.boxes.iter().zip(&state.heights_m) {
            let c = state.cam_height_m;
            let top = model.top_from_bottom(c, h, b.v_bottom).unwrap();
            let v = |c: f64, h: f64| model.top_from_bottom(c, h, b.v_bottom).unwrap().v_top;
            let (ec, eh) = (1e-6 * c, 1e-6 * h);
            let fd_c = (v(c + ec, h) - v(c - ec, h)) / (2.0 * ec);
            let fd_h = (v(c, h + eh) - v(c, h - eh)) / (2.0 * eh);
            worst_top = worst_top
                .max(relative_gap(top.d_cam_height, fd_c, 1e-8))
                .max(relative_gap(top.d_obj_height, fd_h, 1e-8));
        }
        // Gradient of the total loss, away from the kinks of the absolute value.
        let eval = problem.evaluate(&state).unwrap();
        if eval.residuals.iter().any(|r| r.abs() < 1e-4) {
            continue;
        }
        let grad = problem.gradient(&state).unwrap();
        let step = 1e-6;
        for (k, &g) in grad.iter().enumerate() {
            let shifted = |d: f64| {
                let mut s = state.clone();
                if k == 0 {
                    s.cam_height_m += d;
                } else {
                    s.heights_m[k - 1] += d;
                }
                problem.total_loss(&s).unwrap()
            };
            let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
            worst_loss = worst_loss.max(relative_gap(g, fd, 1e-3));
        }
        states += 1;
    }
    outcome(
        worst_top <= 1e-5 && worst_loss <= 1e-5,
        format!(
            "gradient checks: max relative error top Jacobian {worst_top:.2e}, loss gradient {worst_loss:.2e} (tol 1e-5) on {states} states"
        ),
    )
}

fn criterion_9() -> Outcome {
    let ranges = SceneRanges::default()
        .persons_only()
        .with_heights(HeightModel::Deviation { sigmas: 2.0 });
    let priors = PriorTable::default();
    let config = RefinementConfig::default();
    let (mut solver, mut fixed) = (Vec::new(), Vec::new());
    for seed in 0..200 {
        let (generated, obs) = scene(&ranges, &NoiseModel::default(), 5, seed);
        let truth = generated.truth();
        let s = solve_scene(&obs, &priors, &config).unwrap();
        let f = pgm_fixed_height(&obs, &priors, &config).unwrap();
        solver.push(compute_metrics(&s, &truth, Default::default()).unwrap().e_hobj);
        fixed.push(compute_metrics(&f, &truth, Default::default()).unwrap().e_hobj);
    }
    let (s, f) = (median(solver), median(fixed));
    outcome(
        s < f,
        format!(
            "baseline ordering: median object height error solver {s:.4} m < fixed-height baseline {f:.4} m"
        ),
    )
}

fn criterion_10() -> Outcome {
    let ranges = SceneRanges::default();
    let (mut worst, mut inputs) = (0.0f64, 0);
    for seed in 0..500u64 {
        let noise = NoiseModel {
            box_sigma: [0.0, 0.002, 0.005, 0.01][(seed % 4) as usize],
            horizon_sigma: if seed % 5 == 0 { 0.01 } else { 0.0 },
            height_outlier_rate: if seed % 3 == 0 { 0.3 } else { 0.0 },
            ..NoiseModel::default()
        };
        let (_, obs) = scene(&ranges, &noise, 1 + (seed % 12) as usize, seed);
        let est = pgm_full(
            &obs,
            &PriorTable::default(),
            &CamHeightPrior::default(),
            &Default::default(),
        )
        .unwrap();
        let layer = est.final_layer();
        let l_vt = layer.residuals.iter().map(|r| r.abs()).sum::<f64>() / layer.residuals.len() as f64;
        worst = worst.max(l_vt);
        inputs += 1;
    }
    outcome(
        worst <= 1e-9,
        format!("linear baseline residuals: max reported mean top residual {worst:.2e} (tol 1e-9) on {inputs} inputs"),
    )
}

fn run(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_metrology"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let list = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        v.sort();
        v
    };
    let (la, lb) = (list(a), list(b));
    la == lb
        && la
            .iter()
            .all(|n| std::fs::read(a.join(n)).unwrap() == std::fs::read(b.join(n)).unwrap())
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut ok = true;
    for run_dir in ["a", "b"] {
        let docs = format!("{run_dir}/docs");
        let res = format!("{run_dir}/res");
        ok &= run(
            &[
                "synth",
                "--seed",
                "42",
                "--scenes",
                "8",
                "--objects",
                "6",
                "-o",
                &docs,
            ],
            d,
        );
        ok &= run(
            &["solve", &docs, "-o", &res, "--overlay", &format!("{run_dir}/svg")],
            d,
        );
        ok &= run(
            &[
                "solve",
                &format!("{docs}/scene_0003.json"),
                "-o",
                &format!("{run_dir}/one.json"),
            ],
            d,
        );
    }
    let identical = ok
        && ["docs", "res", "svg"]
            .iter()
            .all(|s| same_tree(&d.join("a").join(s), &d.join("b").join(s)))
        && std::fs::read(d.join("a/one.json")).unwrap() == std::fs::read(d.join("b/one.json")).unwrap();

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let mut checked = 0;
    let mut round_trips = true;
    for entry in std::fs::read_dir(&fixtures).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let back = if path.to_string_lossy().ends_with(".results.json") {
            ResultsDocument::parse(text.as_bytes()).map(|r| r.emit())
        } else {
            DetectionDocument::parse(text.as_bytes()).map(|r| r.to_json())
        };
        round_trips &= back.map(|t| t == text).unwrap_or(false);
        checked += 1;
    }
    outcome(
        identical && round_trips && checked > 0,
        format!(
            "determinism: repeated synth and solve outputs identical: {identical}; {checked} fixtures round-trip byte-exact: {round_trips}"
        ),
    )
}

fn main() -> std::process::ExitCode {
    let start = Instant::now();
    let criteria: [fn() -> Outcome; 11] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
    ];
    let mut failed = Vec::new();
    let mut report = |id: usize, o: Outcome| {
        println!(
            "[{}] criterion {id:>2}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    };
    for (i, c) in criteria.iter().enumerate() {
        report(i + 1, c());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        12,
        outcome(secs < 60.0, format!("suite runtime {secs:.1} s (limit 60 s)")),
    );
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
