use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glyphformer"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../glyphformer/tests/fixtures")
        .join(name)
}

fn write_manifest(dir: &Path) -> PathBuf {
    let manifest = serde_json::json!({
        "task": "style",
        "seed": 9,
        "representation": "postscript",
        "entries": [
            {"path": fixture("style_angular.ttf"), "label": "angular"},
            {"path": fixture("style_rounded.ttf"), "label": "rounded"},
        ],
        "model": {"dim": 16, "heads": 2, "layers": 1, "ffn_dim": 32}
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

#[test]
fn inspect_prints_summary() {
    let out = bin()
        .arg("inspect")
        .arg(fixture("triangle.ttf"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("glyphs: 2, codepoints: 1, upm: 1000"), "{text}");
}

#[test]
fn inspect_glyph_details_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("inspect")
        .arg(fixture("triangle.ttf"))
        .args(["--glyph", "U+0041", "--svg", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("original: points=3"), "{text}");
    assert!(text.contains("postscript: commands="), "{text}");
    let svg = std::fs::read_to_string(dir.path().join("glyph_0041.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<path"));
}

#[test]
fn missing_font_exits_2_with_path() {
    let out = bin().arg("inspect").arg("/nonexistent/f.ttf").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/nonexistent/f.ttf"), "{err}");
}

#[test]
fn convert_postscript_gates_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("dump.jsonl");
    let out = bin()
        .arg("convert")
        .arg(fixture("curves.ttf"))
        .args(["--format", "postscript", "--out"])
        .arg(&out_file)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_file).unwrap();
    assert!(!text.trim().is_empty());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["mode"], "command");
        for tok in v["tokens"].as_array().unwrap() {
            let kind = tok["kind"].as_str().unwrap();
            assert!(
                ["moveTo", "lineTo", "curveTo", "closePath"].contains(&kind),
                "unexpected kind {kind}"
            );
        }
    }
}

#[test]
fn convert_segmented_has_no_curve_to() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("dump.jsonl");
    let out = bin()
        .arg("convert")
        .arg(fixture("curves.ttf"))
        .args(["--format", "segmented", "--out"])
        .arg(&out_file)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_file).unwrap();
    assert!(!text.contains("curveTo"));
}

#[test]
fn train_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());

    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .args(["--preset", "desk"])
        .arg("train")
        .arg(&manifest)
        .args(["--epochs", "2", "--batch-size", "64"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "train failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("checkpoint_best.json").exists());
    assert!(dir.path().join("checkpoint_final.json").exists());
    let log = std::fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .arg("eval")
        .arg(&manifest)
        .arg("--checkpoint")
        .arg(dir.path().join("checkpoint_best.json"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "eval failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(csv.starts_with("outline,loss,acc,macro_f1,w_f1\n"));
    assert!(csv.contains("postscript,"));
    assert!(dir.path().join("metrics.json").exists());
    let svg = std::fs::read_to_string(dir.path().join("metrics_confusion.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn eval_mismatched_bins_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());
    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .arg("train")
        .arg(&manifest)
        .args(["--epochs", "0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // change the bin count under the same checkpoint
    let mut m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["bins"] = serde_json::json!(128);
    std::fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();

    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .arg("eval")
        .arg(&manifest)
        .arg("--checkpoint")
        .arg(dir.path().join("checkpoint_best.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_writes_four_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());
    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .arg("compare")
        .arg(&manifest)
        .args(["--epochs", "1", "--batch-size", "64"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "compare failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "outline,loss,acc,macro_f1,w_f1");
    assert_eq!(lines.len(), 5);
    for (line, name) in lines[1..]
        .iter()
        .zip(["original", "decomposed", "segmented", "postscript"])
    {
        assert!(line.starts_with(&format!("{name},")), "{line}");
    }
    let svg = std::fs::read_to_string(dir.path().join("loss_curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(dir.path().join("compare.json").exists());
}

#[test]
fn identical_runs_produce_identical_outputs() {
    let run = |dir: &Path| {
        let manifest = write_manifest(dir);
        let out = bin()
            .arg("--out-dir")
            .arg(dir)
            .arg("train")
            .arg(&manifest)
            .args(["--epochs", "2", "--batch-size", "64"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.join("train_log.jsonl")).unwrap()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    assert_eq!(run(d1.path()), run(d2.path()));
}
