use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use maskforge::io::{read_manifest, read_scene, write_scene, Instance, SceneFile};
use maskforge::{BBox, BinaryMask};
use tempfile::TempDir;

fn maskforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskforge"))
        .args(args)
        .env_remove("MASKFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn square_scene(size: usize, lo: usize, hi: usize) -> SceneFile {
    let m = BinaryMask::from_fn(size, size, |i, j| {
        (lo..hi).contains(&i) && (lo..hi).contains(&j)
    })
    .unwrap();
    SceneFile {
        image_size: [size, size],
        instances: vec![Instance::new(1, 1, &m, m.tight_bbox().unwrap(), None)],
    }
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(maskforge(&["--help"]).status.code(), Some(0));
    assert_eq!(maskforge(&["--version"]).status.code(), Some(0));
    assert_eq!(maskforge(&[]).status.code(), Some(1));
    assert_eq!(maskforge(&["boundary", "--bogus"]).status.code(), Some(1));
    assert_eq!(maskforge(&["frobnicate"]).status.code(), Some(1));
    let out = maskforge(&[
        "boundary", "--in", "x.json", "--out", "y.json", "--width", "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn data_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dir.path().join("out.json");
    let r = maskforge(&["boundary", "--in", s(&missing), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing.json"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"image_size":[4,4],"instances":[{"id":1,"category":1,"bbox":[0,0,1,1],"mask":{"size":[4,4],"counts":[3,-1]}}]}"#).unwrap();
    let r = maskforge(&["boundary", "--in", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn boundary_writes_scene_and_pbm() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.json");
    write_scene(&input, &square_scene(12, 3, 9)).unwrap();
    let out = dir.path().join("out.json");
    let pbm = dir.path().join("pbm");
    let r = maskforge(&[
        "boundary",
        "--in",
        s(&input),
        "--width",
        "1",
        "--method",
        "exact",
        "--out",
        s(&out),
        "--pbm-dir",
        s(&pbm),
        "--quiet",
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let scene = read_scene(&out).unwrap();
    let b = scene.instances[0].decode().unwrap();
    // Exact width-1 region of a 6x6 square: the 2-pixel band on each side of the edge.
    let expected = BinaryMask::from_fn(12, 12, |i, j| {
        let inside = |lo: usize, hi: usize| (lo..hi).contains(&i) && (lo..hi).contains(&j);
        let corner = (i == 2 || i == 9) && (j == 2 || j == 9);
        inside(2, 10) && !inside(5, 7) && !corner
    })
    .unwrap();
    assert_eq!(b, expected);
    let text = fs::read_to_string(pbm.join("instance_1.pbm")).unwrap();
    assert!(text.starts_with("P1\n12 12\n"));
}

#[test]
fn synth_predict_eval_roundtrip() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    let r = maskforge(&[
        "--seed",
        "3",
        "synth",
        "--n",
        "4",
        "--height",
        "128",
        "--width",
        "128",
        "--out",
        s(&corpus),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let manifest = read_manifest(&corpus.join("manifest.json")).unwrap();
    assert_eq!(manifest.seed, Some(3));
    assert_eq!(
        manifest.scenes,
        [
            "scene_0000.json",
            "scene_0001.json",
            "scene_0002.json",
            "scene_0003.json"
        ]
    );

    let mut reports = Vec::new();
    for predictor in ["pipeline", "baseline"] {
        let pred = dir.path().join(predictor);
        let r = maskforge(&[
            "predict",
            "--in",
            s(&corpus),
            "--predictor",
            predictor,
            "--out",
            s(&pred),
        ]);
        assert_eq!(
            r.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&r.stderr)
        );
        let report = dir.path().join(format!("{predictor}.json"));
        let r = maskforge(&[
            "eval",
            "--gt",
            s(&corpus),
            "--pred",
            s(&pred),
            "--out",
            s(&report),
        ]);
        assert_eq!(
            r.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&r.stderr)
        );
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(v["n_ignored"], 0);
        reports.push(v);
    }
    let get = |v: &serde_json::Value, k: &str| v[k].as_f64().unwrap();
    assert!(
        get(&reports[0], "f_1px") >= get(&reports[1], "f_1px"),
        "{reports:?}"
    );
    assert!(
        get(&reports[0], "boundary_acc") > get(&reports[1], "boundary_acc"),
        "{reports:?}"
    );

    // Ground truth against itself is perfect.
    let r = maskforge(&["eval", "--gt", s(&corpus), "--pred", s(&corpus)]);
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["f_1px"], 1.0);
    assert_eq!(v["f_3px"], 1.0);
    assert_eq!(v["boundary_acc"], 1.0);
}

#[test]
fn refine_composes_stage_files() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<_> = [(28, 7, 21), (56, 14, 42), (112, 28, 84)]
        .iter()
        .enumerate()
        .map(|(k, &(size, lo, hi))| {
            let p = dir.path().join(format!("stage{}.json", k + 1));
            write_scene(&p, &square_scene(size, lo, hi)).unwrap();
            p
        })
        .collect();
    let out = dir.path().join("refined.json");
    let r = maskforge(&[
        "refine",
        "--stage1",
        s(&paths[0]),
        "--stage2",
        s(&paths[1]),
        "--stage3",
        s(&paths[2]),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let scene = read_scene(&out).unwrap();
    assert_eq!(scene.image_size, [112, 112]);
    assert_eq!(
        scene.instances[0].decode().unwrap(),
        square_scene(112, 28, 84).instances[0].decode().unwrap()
    );

    // A stage file at the wrong resolution is a data error.
    let r = maskforge(&[
        "refine",
        "--stage1",
        s(&paths[1]),
        "--stage2",
        s(&paths[1]),
        "--stage3",
        s(&paths[2]),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn compare_boundaries_table_and_json() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    assert_eq!(
        maskforge(&["synth", "--n", "3", "--out", s(&corpus)])
            .status
            .code(),
        Some(0)
    );
    let r = maskforge(&["compare-boundaries", "--in", s(&corpus)]);
    assert_eq!(r.status.code(), Some(0));
    let table = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "Output size | IoU (width 1) | IoU (width 2)");
    assert!(lines[1].starts_with("28x28       | 0."));
    assert!(lines[3].starts_with("112x112     | 0."));
    assert!(lines[4].starts_with('(') && lines[4].ends_with(" masks)"));

    let json = dir.path().join("cmp.json");
    let r = maskforge(&[
        "compare-boundaries",
        "--in",
        s(&corpus),
        "--report",
        "json",
        "--widths",
        "2",
        "--sizes",
        "56",
        "--out",
        s(&json),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["size"], 56);
    let iou = rows[0]["mean_iou"].as_f64().unwrap();
    assert!(iou > 0.0 && iou < 1.0);
}

#[test]
fn single_file_eval_with_empty_prediction() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.json");
    let pred = dir.path().join("pred.json");
    write_scene(&gt, &square_scene(20, 4, 12)).unwrap();
    let empty = BinaryMask::zeros(20, 20).unwrap();
    write_scene(
        &pred,
        &SceneFile {
            image_size: [20, 20],
            instances: vec![Instance::new(
                9,
                1,
                &empty,
                BBox::covering(20, 20),
                Some(0.3),
            )],
        },
    )
    .unwrap();
    let r = maskforge(&["eval", "--gt", s(&gt), "--pred", s(&pred)]);
    assert_eq!(r.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["n_matched"], 0);
    assert_eq!(v["n_ignored"], 1);
    assert_eq!(v["f_1px"], 0.0);
}
