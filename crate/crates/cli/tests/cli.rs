use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anastomosis_cli::report::{AssessSummary, AssessmentReport, ImageStatus};
use anastomosis_cli::svg::red_elements;
use anastomosis_core::eval::APReport;
use anastomosis_core::interchange::ClassLabel;
use anastomosis_core::synth::{generate_scene, Injection, SceneSpec};
use anastomosis_core::{load_thresholds, parse_annotation_file, AnnotationSet};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_anastomosis"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_scene(dir: &Path, spec: &SceneSpec, seed: u64) -> PathBuf {
    let scene = generate_scene(spec, seed).unwrap();
    let path = dir.join(format!("{}.json", scene.annotations.image_id));
    fs::write(&path, scene.annotations.to_json()).unwrap();
    path
}

fn read_report(dir: &Path, image_id: &str) -> AssessmentReport {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{image_id}.report.json"))).unwrap())
        .unwrap()
}

#[test]
fn wide_bite_fixture_gives_one_red_box() {
    let tmp = TempDir::new().unwrap();
    let spec = SceneSpec {
        image_id: "wide".into(),
        injections: vec![Injection::E3 {
            target: 2,
            width_ratio: 0.21,
        }],
        ..SceneSpec::default()
    };
    let input = write_scene(tmp.path(), &spec, 1);
    let out = tmp.path().join("out");
    let r = run(&["assess", "--out", s(&out), s(&input)]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let report = read_report(&out, "wide");
    assert_eq!(report.counts, [0, 0, 1, 0, 0]);
    let svg = fs::read_to_string(out.join("wide.svg")).unwrap();
    assert_eq!(red_elements(&svg), 1);
    assert!(svg
        .lines()
        .any(|l| l.contains(r#"class="stitch-box""#) && l.contains(r#"stroke="red""#)));
}

#[test]
fn reports_are_schema_stable() {
    let tmp = TempDir::new().unwrap();
    let spec = SceneSpec {
        image_id: "mixed".into(),
        injections: vec![
            Injection::E2 {
                target: 1,
                angle_deg: 44.0,
            },
            Injection::E5 {
                target: 4,
                distance_ratio: 0.25,
            },
        ],
        ..SceneSpec::default()
    };
    let input = write_scene(tmp.path(), &spec, 2);
    let out = tmp.path().join("out");
    assert_eq!(run(&["assess", "--out", s(&out), s(&input)]).code, 0);

    let text = fs::read_to_string(out.join("mixed.report.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "image_id",
        "n",
        "expected_stitches",
        "line_direction",
        "vessel_box",
        "vessel_axis_length",
        "stitches",
        "gaps",
        "bends",
        "counts",
        "errors",
        "thresholds",
        "warnings",
    ] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    let r: AssessmentReport = serde_json::from_str(&text).unwrap();
    let e = &r.errors;
    assert_eq!(r.stitches.len(), r.n);
    assert_eq!(r.gaps.len(), r.n - 1);
    assert_eq!(r.bends.len(), r.n - 2);
    for flags in [
        &e.e2_flags,
        &e.e3_flags,
        &e.e4_aspect_flags,
        &e.e4_width_flags,
    ] {
        assert_eq!(flags.len(), r.n);
    }
    assert_eq!(e.e5_flags.len(), r.n - 1);
    assert_eq!(e.e1_flags.len(), r.n - 2);

    let svg = fs::read_to_string(out.join("mixed.svg")).unwrap();
    assert_eq!(
        red_elements(&svg) as u32,
        e.s1 + e.s2 + e.s3 + (e.s4 - e.missing_count) + e.s5
    );
}

#[test]
fn empty_input_list_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let r = run(&["assess", "--out", s(tmp.path())]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("Usage"));
}

#[test]
fn unreadable_threshold_file_is_named() {
    let tmp = TempDir::new().unwrap();
    let input = write_scene(tmp.path(), &SceneSpec::default(), 1);
    let missing = tmp.path().join("no-such-thresholds.toml");
    let r = run(&[
        "assess",
        "--thresholds",
        s(&missing),
        "--out",
        s(tmp.path()),
        s(&input),
    ]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("no-such-thresholds.toml"), "{}", r.stderr);
}

#[test]
fn one_bad_image_does_not_stop_the_batch() {
    let tmp = TempDir::new().unwrap();
    let good = write_scene(tmp.path(), &SceneSpec::default(), 1);
    let mut no_vessel: AnnotationSet = parse_annotation_file(&fs::read(&good).unwrap())
        .unwrap()
        .value;
    no_vessel.image_id = "no_vessel".into();
    no_vessel
        .instances
        .retain(|i| i.class_label != ClassLabel::Vessel);
    let bad = tmp.path().join("no_vessel.json");
    fs::write(&bad, no_vessel.to_json()).unwrap();
    let garbage = tmp.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();

    let out = tmp.path().join("out");
    let r = run(&["assess", "--out", s(&out), s(&bad), s(&good), s(&garbage)]);
    assert_eq!(r.code, 2, "{}", r.stderr);

    let summary: AssessSummary =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let statuses: Vec<ImageStatus> = summary.images.iter().map(|i| i.status).collect();
    assert_eq!(
        statuses,
        [ImageStatus::Failed, ImageStatus::Ok, ImageStatus::Failed]
    );
    assert!(summary.images[0]
        .error
        .as_deref()
        .unwrap()
        .contains("vessel"));
    assert!(out.join("synth.report.json").exists());
    assert!(!out.join("no_vessel.report.json").exists());
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let r = run(&["synth", "--seed", "42", "--count", "3", "--out", s(dir)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let listing = |d: &Path| {
        let mut v: Vec<(PathBuf, Vec<u8>)> = walk(d)
            .into_iter()
            .map(|p| {
                (
                    p.strip_prefix(d).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        v.sort();
        v
    };
    let (la, lb) = (listing(&a), listing(&b));
    assert_eq!(la.len(), 3 + 3 + 2);
    assert_eq!(la, lb);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn synth_spec_file_is_honored() {
    let tmp = TempDir::new().unwrap();
    let spec_path = tmp.path().join("spec.toml");
    fs::write(
        &spec_path,
        r#"
image_id = "planted"
stitch_count = 9

[[injections]]
error = "E2"
target = 3
angle_deg = 44.0
"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let r = run(&[
        "synth",
        "--spec",
        s(&spec_path),
        "--seed",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("truth/planted.json")).unwrap()).unwrap();
    assert_eq!(truth["report"]["s2"], 1);
    assert_eq!(truth["expected_stitches"], 9);
    assert!(fs::read_to_string(out.join("scores.csv"))
        .unwrap()
        .contains("planted,synth,t1,0,1,0,0,0"));
}

fn corpus(dir: &Path, count: usize, seed: u64) {
    let r = run(&[
        "synth",
        "--seed",
        &seed.to_string(),
        "--count",
        &count.to_string(),
        "--max-injections",
        "3",
        "--out",
        s(dir),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn calibration_separates_every_pooled_value() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("corpus");
    corpus(&data, 40, 9);
    let config = tmp.path().join("fitted.toml");
    let r = run(&[
        "calibrate",
        "--scores",
        s(&data.join("scores.csv")),
        "--out",
        s(&config),
        s(&data),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stderr.matches("J = 1.000").count(), 5, "{}", r.stderr);
    assert_eq!(
        r.stderr.matches(" 0 misclassified").count(),
        5,
        "{}",
        r.stderr
    );

    let fitted = load_thresholds(&fs::read_to_string(&config).unwrap()).unwrap();
    assert!(fitted.warnings.is_empty());
    fitted.value.validate().unwrap();
}

#[test]
fn cleaning_identical_trials_changes_nothing() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("corpus");
    corpus(&data, 12, 3);
    let csv = fs::read_to_string(data.join("scores.csv")).unwrap();
    let mut two = csv.clone();
    for line in csv.lines().skip(1) {
        two.push_str(&line.replace(",synth,t1,", ",synth,t2,"));
        two.push('\n');
    }
    let scores = tmp.path().join("two.csv");
    fs::write(&scores, two).unwrap();

    let (plain, cleaned) = (tmp.path().join("plain.toml"), tmp.path().join("clean.toml"));
    let r = run(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--trial",
        "t1",
        "--out",
        s(&plain),
        s(&data),
    ]);
    assert!(r.code == 0 || r.code == 2, "{}", r.stderr);
    let r2 = run(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--clean",
        "t1,t2",
        "--out",
        s(&cleaned),
        s(&data),
    ]);
    assert_eq!(r.code, r2.code, "{}", r2.stderr);
    if r.code == 0 {
        assert_eq!(fs::read(&plain).unwrap(), fs::read(&cleaned).unwrap());
    }
}

#[test]
fn calibrate_lists_unscored_images() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("corpus");
    corpus(&data, 4, 5);
    let csv = fs::read_to_string(data.join("scores.csv")).unwrap();
    let kept: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with("synth_002"))
        .collect();
    let scores = tmp.path().join("partial.csv");
    fs::write(&scores, kept.join("\n") + "\n").unwrap();
    let r = run(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--out",
        s(&tmp.path().join("x.toml")),
        s(&data),
    ]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("synth_002"), "{}", r.stderr);
}

#[test]
fn calibrate_asks_which_trial() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("corpus");
    corpus(&data, 3, 5);
    let csv = fs::read_to_string(data.join("scores.csv")).unwrap();
    let two = csv.clone()
        + &csv
            .lines()
            .skip(1)
            .map(|l| l.replace(",t1,", ",t2,") + "\n")
            .collect::<String>();
    let scores = tmp.path().join("two.csv");
    fs::write(&scores, two).unwrap();
    let r = run(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--out",
        s(&tmp.path().join("x.toml")),
        s(&data),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("--trial"), "{}", r.stderr);
}

fn with_confidence(a: &AnnotationSet, c: f64) -> AnnotationSet {
    let mut a = a.clone();
    for i in &mut a.instances {
        i.confidence = Some(c);
    }
    a
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    for seed in 0..2 {
        let spec = SceneSpec {
            image_id: format!("img{seed}"),
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec, seed).unwrap();
        fs::write(
            gt.join(format!("img{seed}.json")),
            scene.annotations.to_json(),
        )
        .unwrap();
        fs::write(
            pred.join(format!("img{seed}.json")),
            with_confidence(&scene.annotations, 1.0).to_json(),
        )
        .unwrap();
    }
    let r = run(&["eval", "--pred", s(&pred), "--gt", s(&gt)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: APReport = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report.images, 2);
    for class in ClassLabel::ALL {
        let ap = report.classes[&class].as_ref().unwrap();
        for kind in [&ap.bbox, &ap.mask] {
            assert_eq!(kind.ap50, 1.0);
            assert_eq!(kind.ap, 1.0);
        }
    }
}

#[test]
fn eval_duplicate_prediction_fixture() {
    let tmp = TempDir::new().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    let square = r#"[[10, 10], [50, 10], [50, 50], [10, 50]]"#;
    fs::write(
        gt.join("a.json"),
        format!(r#"{{"image_id": "a", "width": 64, "height": 64, "instances": [{{"class": "stitch", "polygon": {square}}}]}}"#),
    )
    .unwrap();
    fs::write(
        pred.join("a.json"),
        format!(
            r#"{{"image_id": "a", "width": 64, "height": 64, "instances": [
                {{"class": "stitch", "polygon": {square}, "confidence": 0.9}},
                {{"class": "stitch", "polygon": {square}, "confidence": 0.8}}]}}"#
        ),
    )
    .unwrap();
    let report_path = tmp.path().join("ap.json");
    let r = run(&[
        "eval",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--out",
        s(&report_path),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: APReport =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let ap = report.classes[&ClassLabel::Stitch].as_ref().unwrap();
    assert_eq!(ap.bbox.ap50, 1.0);
    assert_eq!(ap.mask.ap50, 1.0);
    assert!(report.classes[&ClassLabel::Vessel].is_none());
}

#[test]
fn help_exits_cleanly() {
    let r = run(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("assess"));
}
