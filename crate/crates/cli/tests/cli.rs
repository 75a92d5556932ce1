use std::path::Path;
use std::process::Command;

fn csec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_csec")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = csec(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn fixture_evaluate_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    ok(&["fixture", "--out", p(&fx), "--seed", "4", "--frames", "24"]);
    assert!(fx.join("frames/frame_000024.png").exists());

    let sweep = dir.path().join("sweep.json");
    std::fs::write(
        &sweep,
        r#"{"seed": 4, "simulators": ["csec"], "agent_levels": ["Empty", "Same"], "speed_levels": ["Same"]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let scene = fx.join("scene.json");
    let frames = fx.join("frames");
    let printed =
        ok(&["evaluate", "--scene", p(&scene), "--frames", p(&frames), "--sweep", p(&sweep), "--out", p(&out)]);
    assert_eq!(printed.lines().count(), 5);
    let table: csec_cli::sweep::ResultsTable =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert!(table.is_complete());
    let same = &table.cells[1];
    let empty = &table.cells[0];
    // same parameters and seed as the source: the very same video
    assert!(same.d_combined < 1e-9, "{same:?}");
    assert!(empty.d_track > same.d_track);
    assert_eq!((same.rank, empty.rank), (1, 2));
    let grid = std::fs::read_to_string(out.join("csec_combined.csv")).unwrap();
    assert!(grid.starts_with("agents,Same\nEmpty,"), "{grid}");

    let ratings = dir.path().join("ratings.csv");
    std::fs::write(&ratings, "simulator,agent_level,speed_level,mos\ncsec,Empty,Same,1.0\ncsec,Same,Same,4.5\n")
        .unwrap();
    let text = ok(&["correlate", "--results", p(&out.join("results.csv")), "--ratings", p(&ratings)]);
    let c: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(c["n"], 2);
    assert!((c["track"].as_f64().unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn prepare_writes_the_mean_background() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    for (i, v) in [10u8, 20, 40].iter().enumerate() {
        csec_core::Image::filled_rgb(4, 3, [*v, 0, 255])
            .save_png(&frames.join(format!("frame_{:06}.png", i + 1)))
            .unwrap();
    }
    let out = dir.path().join("bg.png");
    ok(&["prepare", p(&frames), "--fps", "10", "--out", p(&out)]);
    let bg = csec_core::Image::load_png(&out).unwrap();
    // (10 + 20 + 40) / 3 = 23.3
    assert_eq!(bg.pixel(2, 1), &[23, 0, 255]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(csec(&["prepare", p(&missing)]).status.code(), Some(2));
    assert_eq!(csec(&["evaluate", "--scene", p(&missing)]).status.code(), Some(2));

    let fx = dir.path().join("fx");
    ok(&["fixture", "--out", p(&fx), "--frames", "4"]);
    let scene = fx.join("scene.json");
    let frames = fx.join("frames");
    let out = dir.path().join("out");
    let run = |extra: &[&str]| {
        let mut args = vec!["evaluate", "--scene", p(&scene), "--frames", p(&frames), "--out", p(&out)];
        args.extend_from_slice(extra);
        csec(&args).status.code()
    };
    assert_eq!(run(&["--flow", "lucas-kanade"]), Some(2));
    assert_eq!(run(&["--weber", "maybe"]), Some(2));
    assert_eq!(run(&["--window", "0"]), Some(2));

    let bad_sweep = dir.path().join("bad.json");
    std::fs::write(&bad_sweep, r#"{"seed": 1, "agent_levels": []}"#).unwrap();
    assert_eq!(run(&["--sweep", p(&bad_sweep)]), Some(2));

    // a scene without entrances fails validation
    let mut spec = csec_core::SceneSpec::from_file(&scene).unwrap();
    for row in spec.labels.iter_mut() {
        row.iter_mut().for_each(|l| *l = csec_core::CellLabel::Walkable);
    }
    std::fs::write(&scene, spec.to_json_pretty()).unwrap();
    assert_eq!(run(&[]), Some(2));

    // a corrupt frame is invalid input; an unwritable output is a runtime failure
    let fx2 = dir.path().join("fx2");
    ok(&["fixture", "--out", p(&fx2), "--frames", "4"]);
    let (s2, f2) = (fx2.join("scene.json"), fx2.join("frames"));
    let blocked = dir.path().join("blocked");
    std::fs::write(&blocked, b"a file").unwrap();
    let args = ["evaluate", "--scene", p(&s2), "--frames", p(&f2), "--out", p(&blocked)];
    assert_eq!(csec(&args).status.code(), Some(1));
    std::fs::write(fx2.join("frames/frame_000002.png"), b"not a png").unwrap();
    assert_eq!(csec(&args).status.code(), Some(2));
}
