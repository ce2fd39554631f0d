use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn metrology(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metrology"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn solve_happy_path_with_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "method = \"pgm\"\n").unwrap();
    let input = fixture("street_pixels.json");
    let o = metrology(
        &[
            "solve", "--method", "scalenet", "--config", "c.toml", &input, "-o", "out.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let out = read(dir.path(), "out.json");
    assert!(out.contains("\"method\": \"scalenet\""));
    assert!(stderr(&o).contains("amodal"));
}

#[test]
fn config_file_selects_method() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "method = \"pgm-fixed\"\n").unwrap();
    let o = metrology(
        &["--config", "c.toml", "solve", &fixture("synth_seed7.json")],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"method\": \"pgm-fixed\""));
}

#[test]
fn unknown_method_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = metrology(
        &["solve", "--method", "hoiem", &fixture("synth_seed7.json")],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    for m in ["scalenet", "pgm", "pgm-fixed"] {
        assert!(msg.contains(m), "{msg}");
    }
    assert!(o.stdout.is_empty());
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    std::fs::write(dir.path().join("bad.toml"), "frobnicate = true\n").unwrap();
    for args in [
        vec!["solve", "missing.json"],
        vec!["solve", "bad.json"],
        vec!["--config", "bad.toml", "solve", "bad.json"],
        vec!["no-such-command"],
        vec!["synth", "--scenes", "3"],
        vec![],
    ] {
        let o = metrology(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = metrology(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("solve"));
}

#[test]
fn unwritable_output_is_internal() {
    let dir = tempfile::tempdir().unwrap();
    let o = metrology(
        &[
            "solve",
            &fixture("synth_seed7.json"),
            "-o",
            "no/such/dir/out.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = metrology(&["--print-config"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("reference_height_m = 1.0"));
    std::fs::write(dir.path().join("dump.toml"), &text).unwrap();
    let again = metrology(&["--config", "dump.toml", "--print-config"], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = metrology(
            &[
                "synth",
                "--seed",
                "42",
                "--scenes",
                "3",
                "--objects",
                "5",
                "-o",
                out,
            ],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for i in 0..3 {
        let name = format!("scene_{i:04}.json");
        assert_eq!(
            read(&dir.path().join("a"), &name),
            read(&dir.path().join("b"), &name)
        );
    }
    let single = metrology(&["synth", "--seed", "42", "--objects", "5"], dir.path());
    assert_eq!(
        String::from_utf8(single.stdout).unwrap(),
        read(&dir.path().join("a"), "scene_0000.json")
    );
}

fn run_pipeline(dir: &Path) -> Vec<PathBuf> {
    let steps: [&[&str]; 3] = [
        &[
            "synth",
            "--seed",
            "9",
            "--scenes",
            "6",
            "--objects",
            "6",
            "-o",
            "docs",
        ],
        &["solve", "docs", "-o", "res", "--overlay", "svg"],
        &[
            "eval",
            "--results",
            "res",
            "--truth",
            "docs",
            "--curve",
            "curve.csv",
            "-o",
            "report.json",
        ],
    ];
    for args in steps {
        let o = metrology(args, dir);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    }
    let mut files: Vec<PathBuf> = ["res", "svg"]
        .iter()
        .flat_map(|d| std::fs::read_dir(dir.join(d)).unwrap().map(|e| e.unwrap().path()))
        .collect();
    files.sort();
    files
}

#[test]
fn directory_pipeline_is_complete_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = run_pipeline(a.path());
    let fb = run_pipeline(b.path());
    assert_eq!(fa.len(), 12);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(
            std::fs::read(x).unwrap(),
            std::fs::read(y).unwrap(),
            "{}",
            x.display()
        );
    }
    let leftovers: Vec<_> = std::fs::read_dir(a.path().join("res"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| !n.ends_with(".results.json"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
    let report: serde_json::Value = serde_json::from_str(&read(a.path(), "report.json")).unwrap();
    assert_eq!(report["scenes"].as_array().unwrap().len(), 6);
    assert!(report["e_hcam"]["median"].as_f64().unwrap() >= 0.0);
    let curve = read(a.path(), "curve.csv");
    assert!(curve.starts_with("threshold,fraction\n0,"));
    assert_eq!(curve.lines().count(), 52);
    assert_eq!(read(a.path(), "report.json"), read(b.path(), "report.json"));
}

#[test]
fn overlay_subcommand_matches_solve_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixture("street_pixels.json");
    let o = metrology(&["solve", &doc, "-o", "r.json", "--overlay", "a.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = metrology(&["overlay", &doc, "r.json", "-o", "b.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read(dir.path(), "a.svg"), read(dir.path(), "b.svg"));
    assert!(read(dir.path(), "a.svg").contains("class=\"horizon\""));
}

#[test]
fn eval_rejects_mismatched_truth() {
    let dir = tempfile::tempdir().unwrap();
    let o = metrology(
        &["solve", &fixture("synth_seed7.json"), "-o", "r.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    std::fs::write(
        dir.path().join("t.json"),
        r#"{ "cam_height_m": 1.5, "heights_m": [1.7] }"#,
    )
    .unwrap();
    let o = metrology(&["eval", "--results", "r.json", "--truth", "t.json"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = metrology(
        &[
            "eval",
            "--results",
            "r.json",
            "--truth",
            &fixture("synth_seed7.json"),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
