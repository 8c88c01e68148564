use std::path::Path;
use std::process::{Command, Output};

fn windcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn physics_convert_reports_hub_power() {
    let out = windcast(&["physics", "convert", "--speed", "9.3"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("hub speed: 12.3869 m/s"), "{text}");
    assert!(text.contains("band: partial load"));
    assert!(text.contains("rated speed"), "boundary note missing: {text}");

    let bands = stdout(&windcast(&["physics", "bands"]));
    assert!(bands.contains("1.331923"), "{bands}");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&windcast(&["--help"])), 0);
    assert_eq!(code(&windcast(&["frobnicate"])), 1);
    assert_eq!(code(&windcast(&["physics", "convert", "--speed=-1"])), 2);
    assert_eq!(code(&windcast(&["cases", "/nonexistent/data.txt"])), 2);
    assert_eq!(code(&windcast(&["--window", "1,x", "physics", "bands"])), 1);
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("buoy.csv");
    let clean = dir.path().join("clean.csv");
    let model = dir.path().join("model.json");
    let preds = dir.path().join("preds.csv");

    assert_eq!(code(&windcast(&["fixture", "--rows", "3000", "--out", p(&data)])), 0);
    let out = windcast(&["ingest", p(&data), "--out", p(&clean)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("3000 rows"));

    let out = windcast(&["--out-dir", p(dir.path()), "features", p(&clean), "--trees", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("kept:"));
    assert!(dir.path().join("features.json").exists());

    // a window with P < H is a usage error
    let out = windcast(&["--window", "1,18", "sweep", p(&clean), "--model", "ridge"]);
    assert_eq!(code(&out), 1);

    let out = windcast(&[
        "--window",
        "6,1",
        "--out-dir",
        p(dir.path()),
        "sweep",
        p(&clean),
        "--model",
        "ridge",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sweep_ridge.csv").exists());

    let out = windcast(&[
        "--window",
        "6,1",
        "--max-epochs",
        "2",
        "train",
        p(&clean),
        "--model",
        "fcnn",
        "--case",
        "7",
        "--model-file",
        p(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = windcast(&["predict", p(&clean), "--model-file", p(&model), "--out", p(&preds)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(&preds).unwrap().lines().count();
    assert!(rows > 2000, "{rows}");

    let out = windcast(&[
        "--window",
        "6,1",
        "--out-dir",
        p(dir.path()),
        "cases",
        p(&clean),
        "--models",
        "ridge",
        "--cases",
        "1,3,7",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("improvement"));
    for f in ["cases.csv", "cases.json", "radar_ridge.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
