use crate::files::{self, emit, ensure_dir, json_files, scene_stem, write_atomic};
use crate::{Blame, CliResult, Failure};
use anyhow::{anyhow, Context};
use metrology_core::eval::{curve_csv, threshold_curve, HeightComparison, MetricReport};
use metrology_core::io::{emit_overlay, solve_document, DetectionDocument, ResultsDocument, ToolkitConfig};
use metrology_core::synth::{generate, GroundTruth};
use rayon::prelude::*;
use std::path::Path;

/// Residual thresholds of the CSV curve, normalized: 0 to 0.05 in steps of 0.001.
const CURVE_STEPS: u32 = 50;
const CURVE_STEP: f64 = 1000.0;

fn load_document(path: &Path) -> CliResult<DetectionDocument> {
    DetectionDocument::parse(&files::read_bytes(path)?)
        .with_context(|| path.display().to_string())
        .input()
}

fn load_results(path: &Path) -> CliResult<ResultsDocument> {
    ResultsDocument::parse(&files::read_bytes(path)?)
        .with_context(|| path.display().to_string())
        .input()
}

fn solve_file(
    config: &ToolkitConfig,
    input: &Path,
    output: Option<&Path>,
    overlay: Option<&Path>,
) -> CliResult<()> {
    let doc = load_document(input)?;
    let results = solve_document(&doc, config)
        .with_context(|| input.display().to_string())
        .input()?;
    for r in &results.rejected {
        eprintln!(
            "{}: detection {} rejected ({})",
            input.display(),
            r.index,
            r.reason
        );
    }
    emit(output, &results.emit())?;
    if let Some(svg_path) = overlay {
        let svg = emit_overlay(&doc, &results.estimate, &config.overlay).input()?;
        write_atomic(svg_path, &svg)?;
    }
    Ok(())
}

pub fn solve(
    config: &ToolkitConfig,
    input: &Path,
    output: Option<&Path>,
    overlay: Option<&Path>,
) -> CliResult<()> {
    if !input.is_dir() {
        return solve_file(config, input, output, overlay);
    }
    let out_dir = output.ok_or_else(|| Failure::Input(anyhow!("a directory input needs --output DIR")))?;
    ensure_dir(out_dir)?;
    if let Some(d) = overlay {
        ensure_dir(d)?;
    }
    let inputs = json_files(input)?;
    let failures: Vec<Failure> = inputs
        .par_iter()
        .filter_map(|path| {
            let stem = scene_stem(path);
            let out = out_dir.join(format!("{stem}.results.json"));
            let svg = overlay.map(|d| d.join(format!("{stem}.svg")));
            solve_file(config, path, Some(&out), svg.as_deref()).err()
        })
        .collect();
    summarize_failures(failures, inputs.len())
}

/// Reports every failure and keeps the most severe one.
fn summarize_failures(failures: Vec<Failure>, total: usize) -> CliResult<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let n = failures.len();
    let mut internal = false;
    for f in &failures {
        match f {
            Failure::Input(e) => eprintln!("error: {e:#}"),
            Failure::Internal(e) => {
                internal = true;
                eprintln!("internal error: {e:#}");
            }
        }
    }
    let e = anyhow!("{n} of {total} documents failed");
    Err(if internal {
        Failure::Internal(e)
    } else {
        Failure::Input(e)
    })
}

/// Scene `i` is generated from seed `seed + i`.
pub fn synth(
    config: &ToolkitConfig,
    seed: u64,
    scenes: usize,
    objects: usize,
    output: Option<&Path>,
) -> CliResult<()> {
    let synth = &config.synth;
    let render = |i: usize| -> CliResult<String> {
        let s = seed.wrapping_add(i as u64);
        let (scene, obs) = generate(&synth.ranges, &synth.noise, objects, s)
            .with_context(|| format!("scene with seed {s}"))
            .input()?;
        Ok(DetectionDocument::from_scene(&scene, &obs).to_json())
    };
    match output {
        None if scenes == 1 => emit(None, &render(0)?),
        None => Err(Failure::Input(anyhow!("more than one scene needs --output DIR"))),
        Some(dir) => {
            ensure_dir(dir)?;
            for i in 0..scenes {
                write_atomic(&dir.join(format!("scene_{i:04}.json")), &render(i)?)?;
            }
            Ok(())
        }
    }
}

fn load_truth(path: &Path) -> CliResult<GroundTruth> {
    let bytes = files::read_bytes(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .with_context(|| path.display().to_string())
        .input()?;
    if value.get("schema_version").is_some() {
        let doc = DetectionDocument::parse(&bytes)
            .with_context(|| path.display().to_string())
            .input()?;
        doc.ground_truth
            .ok_or_else(|| Failure::Input(anyhow!("{}: document has no ground_truth", path.display())))
    } else {
        serde_json::from_value(value)
            .with_context(|| path.display().to_string())
            .input()
    }
}

pub fn eval(
    results: &Path,
    truth: &Path,
    upright: bool,
    curve: Option<&Path>,
    output: Option<&Path>,
) -> CliResult<()> {
    let pairs = if results.is_dir() {
        if !truth.is_dir() {
            return Err(Failure::Input(anyhow!(
                "--results is a directory, so --truth must be one too"
            )));
        }
        json_files(results)?
            .into_iter()
            .map(|r| {
                let t = truth.join(format!("{}.json", scene_stem(&r)));
                (r, t)
            })
            .collect()
    } else {
        vec![(results.to_path_buf(), truth.to_path_buf())]
    };
    if pairs.is_empty() {
        return Err(Failure::Input(anyhow!(
            "no results found in {}",
            results.display()
        )));
    }
    let comparison = if upright {
        HeightComparison::Upright
    } else {
        HeightComparison::Actual
    };
    let mut scenes = Vec::with_capacity(pairs.len());
    for (r, t) in &pairs {
        let res = load_results(r)?;
        let gt = load_truth(t)?;
        scenes.push(
            res.metrics(&gt, comparison)
                .with_context(|| format!("{} against {}", r.display(), t.display()))
                .input()?,
        );
    }
    let report = MetricReport::from_scenes(scenes).input()?;
    if let Some(path) = curve {
        let residuals: Vec<f64> = report
            .scenes
            .iter()
            .flat_map(|s| s.residuals.iter().copied())
            .collect();
        let thresholds: Vec<f64> = (0..=CURVE_STEPS).map(|k| f64::from(k) / CURVE_STEP).collect();
        let points = threshold_curve(&residuals, &thresholds).input()?;
        write_atomic(path, &curve_csv(&points))?;
    }
    let mut text = serde_json::to_string_pretty(&report).internal()?;
    text.push('\n');
    emit(output, &text)
}

pub fn overlay(
    config: &ToolkitConfig,
    document: &Path,
    results: &Path,
    output: Option<&Path>,
) -> CliResult<()> {
    let doc = load_document(document)?;
    let res = load_results(results)?;
    let svg = emit_overlay(&doc, &res.estimate, &config.overlay).input()?;
    emit(output, &svg)
}
