use std::fs;
use std::path::Path;
use std::process::Command;

use evhand::config::RunConfig;
use evhand_core::annotation::AnnotationFile;
use evhand_core::camera::read_calibration;
use evhand_core::solver::triangulate;
use evhand_core::JOINTS;

fn evhand(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_evhand")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = evhand(args);
    assert_eq!(code, 0, "{args:?}\n{stderr}");
    stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out", p(dir)];
    if !extra.contains(&"--duration-s") {
        args.extend_from_slice(&["--duration-s", "0.5"]);
    }
    args.extend_from_slice(extra);
    ok(&args);
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn eval_of_identical_files_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    simulate(&ds, &[]);
    let gt = ds.join("gt.ann");
    let out = tmp.path().join("eval");
    ok(&["eval", "--pred", p(&gt), "--gt", p(&gt), "--out", p(&out)]);
    let report = read(&out.join("report.tsv"));
    let all: Vec<&str> = report.lines().last().unwrap().split('\t').collect();
    assert_eq!(all[0], "all");
    assert_eq!(all[5], "0.0");
    assert_eq!(all[7], "1.0");
    assert!(report.lines().nth(1).unwrap().starts_with("normal bimanual\t16\t672\t"));
    assert_eq!(read(&out.join("pck.tsv")).lines().count(), 101);
}

#[test]
fn zero_iterations_is_triangulation_only() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    simulate(&ds, &["--distortion", "-0.02,0.001,0,0,0"]);
    let out = tmp.path().join("solve");
    ok(&[
        "solve",
        "--annotation",
        p(&ds.join("gt.ann")),
        "--calib",
        p(&ds.join("calib.toml")),
        "--out",
        p(&out),
        "--iters",
        "0",
    ]);
    let rig = read_calibration(&read(&ds.join("calib.toml"))).unwrap().rig;
    let gt = AnnotationFile::from_text(&read(&ds.join("gt.ann"))).unwrap();
    let pred = AnnotationFile::from_text(&read(&out.join("pred.ann"))).unwrap();
    for (g, p) in gt.frames.iter().zip(&pred.frames) {
        let [l, r] = g.views.unwrap();
        let conf = |kp: &evhand_core::Keypoints2D| std::array::from_fn::<f64, JOINTS, _>(|j| if kp.valid[j] { 1.0 } else { 0.0 });
        let tri = triangulate(&l.kp, &r.kp, &conf(&l.kp), &conf(&r.kp), &rig);
        assert_eq!(p.frame.pose, tri);
    }
    // only the initial row per frame
    assert_eq!(read(&out.join("trace.txt")).lines().count(), 1 + gt.frames.len());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(evhand(&["simulate"]).0, 1);
    assert_eq!(evhand(&["frobnicate"]).0, 1);
    assert_eq!(evhand(&["--help"]).0, 0);
    assert_eq!(evhand(&["simulate", "--out", p(&out), "--holes", "some"]).0, 1);
    assert_eq!(evhand(&["solve", "--annotation", "a", "--calib", "c", "--out", p(&out), "--iters", "2", "--step-ratio", "1,1,1"]).0, 1);

    let missing = tmp.path().join("missing.ann");
    let (code, _, err) = evhand(&["eval", "--pred", p(&missing), "--gt", p(&missing), "--out", p(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.ann"), "{err}");

    let bad = tmp.path().join("bad.ann");
    fs::write(&bad, "evhand-annotation 1\nframe 0 0\n1 2 3 O\n").unwrap();
    let (code, _, err) = evhand(&["eval", "--pred", p(&bad), "--gt", p(&bad), "--out", p(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("bad.ann"), "{err}");

    // no frame ids in common
    let ds = tmp.path().join("ds");
    simulate(&ds, &[]);
    let gt = AnnotationFile::from_text(&read(&ds.join("gt.ann"))).unwrap();
    let mut shifted = gt.clone();
    for f in shifted.frames.iter_mut() {
        f.frame.frame_id += 1000;
    }
    let other = tmp.path().join("shifted.ann");
    fs::write(&other, shifted.to_text()).unwrap();
    assert_eq!(evhand(&["eval", "--pred", p(&other), "--gt", p(&ds.join("gt.ann")), "--out", p(&out)]).0, 3);
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "run.toml" {
                out.push((path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    simulate(&ds, &["--noise-rate", "0.002", "--holes", "random:10:3", "--seed", "4"]);
    let ann = tmp.path().join("ann");
    ok(&[
        "annotate",
        "--kp2d",
        p(&ds.join("kp2d.csv")),
        "--depth-dir",
        p(&ds.join("depth")),
        "--calib",
        p(&ds.join("calib.toml")),
        "--out",
        p(&ann),
    ]);
    let solve = tmp.path().join("solve");
    ok(&[
        "solve",
        "--annotation",
        p(&ann.join("annotation.ann")),
        "--calib",
        p(&ds.join("calib.toml")),
        "--out",
        p(&solve),
        "--peak-noise-px",
        "1.5",
        "--init",
        "soft-argmax",
        "--temperature",
        "0.1",
        "--seed",
        "9",
    ]);
    let lnes = tmp.path().join("lnes");
    ok(&["encode", "--events", p(&ds.join("left.evs")), "--out", p(&lnes), "--mode", "latest"]);

    for dir in [&ds, &ann, &solve, &lnes] {
        let again = tmp.path().join(format!("{}-again", dir.file_name().unwrap().to_str().unwrap()));
        ok(&["replay", p(&dir.join("run.toml")), "--out", p(&again)]);
        assert_eq!(tree(dir), tree(&again), "{}", dir.display());
        let a = RunConfig::read(&dir.join("run.toml")).unwrap();
        let mut b = RunConfig::read(&again.join("run.toml")).unwrap();
        b.task.set_out(dir.to_path_buf());
        assert_eq!(a, b);
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    ok(&["--threads", "1", "simulate", "--out", p(&one), "--duration-s", "0.3", "--noise-rate", "0.003"]);
    ok(&["--threads", "4", "simulate", "--out", p(&four), "--duration-s", "0.3", "--noise-rate", "0.003"]);
    assert_eq!(tree(&one), tree(&four));
    let (l1, l4) = (tmp.path().join("l1"), tmp.path().join("l4"));
    ok(&["--threads", "1", "encode", "--events", p(&one.join("right.evs")), "--out", p(&l1), "--stride-us", "10000"]);
    ok(&["--threads", "4", "encode", "--events", p(&one.join("right.evs")), "--out", p(&l4), "--stride-us", "10000"]);
    assert_eq!(tree(&l1), tree(&l4));
    let (s1, s4) = (tmp.path().join("s1"), tmp.path().join("s4"));
    for (threads, out) in [("1", &s1), ("4", &s4)] {
        ok(&[
            "--threads", threads, "solve", "--annotation", p(&one.join("gt.ann")), "--calib", p(&one.join("calib.toml")),
            "--out", p(out), "--peak-noise-px", "2", "--init", "argmax",
        ]);
    }
    assert_eq!(tree(&s1), tree(&s4));
}

#[test]
fn csv_events_encode_like_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    simulate(&ds, &[]);
    let bin = fs::read(ds.join("left.evs")).unwrap();
    let stream = evhand_core::event::parse_events(&bin, evhand_core::event::EventFormat::BinaryV1).unwrap();
    let csv = evhand_core::event::write_events(&stream, evhand_core::event::EventFormat::Csv { width: 1280, height: 720 });
    let csv_path = tmp.path().join("left.csv");
    fs::write(&csv_path, csv).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["encode", "--events", p(&ds.join("left.evs")), "--out", p(&a)]);
    assert_eq!(evhand(&["encode", "--events", p(&csv_path), "--format", "csv", "--out", p(&b)]).0, 1);
    ok(&["encode", "--events", p(&csv_path), "--format", "csv", "--width", "1280", "--height", "720", "--out", p(&b)]);
    assert_eq!(tree(&a), tree(&b));
    let index = read(&a.join("index.txt"));
    // 0.5 s of events in 33 ms windows
    assert_eq!(index.lines().count(), 1 + 16);
}

#[test]
fn heatmap_directories_feed_the_solver() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    simulate(&ds, &["--duration-s", "0.1"]);
    let calib = ds.join("calib.toml");
    let first = tmp.path().join("first");
    ok(&[
        "solve", "--annotation", p(&ds.join("gt.ann")), "--calib", p(&calib), "--out", p(&first),
        "--init", "soft-argmax", "--temperature", "0.1", "--patch-radius", "8", "--dump-heatmaps",
    ]);
    let second = tmp.path().join("second");
    ok(&["solve", "--heatmaps", p(&first.join("heatmaps")), "--calib", p(&calib), "--out", p(&second)]);
    assert_eq!(read(&first.join("pred.ann")).replace("meta scenario normal bimanual\n", ""), read(&second.join("pred.ann")));
    assert_eq!(evhand(&["solve", "--heatmaps", p(&first.join("heatmaps")), "--calib", p(&calib), "--out", p(&second), "--init", "labels"]).0, 1);
}

#[test]
fn features_and_classifier() {
    let tmp = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    for (seed, label) in [(1, 0), (2, 0), (3, 5), (4, 5)] {
        let ds = tmp.path().join(format!("ds{seed}"));
        simulate(&ds, &["--seed", &seed.to_string(), "--duration-s", "0.2", "--translation-mm", &(10 * label).to_string()]);
        let mut ann = AnnotationFile::from_text(&read(&ds.join("gt.ann"))).unwrap();
        ann.meta.insert("label".into(), label.to_string());
        let path = tmp.path().join(format!("rec{seed}.ann"));
        fs::write(&path, ann.to_text()).unwrap();
        inputs.push(path);
    }
    let out = tmp.path().join("feat");
    let mut args = vec!["features", "--out", p(&out), "--classify"];
    for i in &inputs {
        args.extend_from_slice(&["--input", p(i)]);
    }
    ok(&args);
    let seq = evhand_core::features::GestureSequence::from_text(&read(&out.join("rec3.seq"))).unwrap();
    assert_eq!(seq.label, Some(5));
    assert_eq!(seq.frames.len(), 7);
    assert!(read(&out.join("accuracy.txt")).contains("labelled\t4"));

    // single-hand recordings have no left wrist
    let single = tmp.path().join("single");
    simulate(&single, &["--hands", "single"]);
    let (code, _, err) = evhand(&["features", "--input", p(&single.join("gt.ann")), "--out", p(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("wrist"), "{err}");
}
