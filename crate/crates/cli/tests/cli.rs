use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problems() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn bilevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilevel")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_prints_json_and_succeeds() {
    let file = problems().join("split_image.blv");
    let out = bilevel(&["solve", path(&file)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn every_format_renders() {
    let file = problems().join("split_image.blv");
    for format in ["json", "csv", "text"] {
        let out = bilevel(&["solve", path(&file), "--format", format, "--radii", "1/3,0.5"]);
        assert_eq!(out.status.code(), Some(0), "{format}: {}", stderr(&out));
        assert!(!out.stdout.is_empty());
    }
    let out = bilevel(&["relations", path(&file), "--format", "text"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn missing_file_is_an_input_error() {
    let out = bilevel(&["solve", "no/such/problem.blv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("file not found"));
    let out = bilevel(&["verify", "no/such/dir"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn syntax_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("broken.blv");
    fs::write(&file, "[leader]\nx = 0, 1, 0.5\n[follower]\ny = 0, 1, 0.5\n[objectives]\nupper = x + * y\nlower = 0\n").unwrap();
    let out = bilevel(&["solve", path(&file)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("broken.blv") && err.contains("line 6"), "{err}");
}

#[test]
fn failing_golden_exits_with_violations() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("wrong.blv");
    let text = fs::read_to_string(problems().join("split_image.blv")).unwrap();
    fs::write(&file, text.replace("real_optimistic == {-1}", "real_optimistic == {1}")).unwrap();
    let out = bilevel(&["verify", path(&file), "--format", "text"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn output_file_is_complete_or_absent() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let out = bilevel(&["solve", path(&problems().join("split_image.blv")), "--output", path(&target)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    serde_json::from_str::<serde_json::Value>(&fs::read_to_string(&target).unwrap()).unwrap();

    let failed = dir.path().join("failed.json");
    let out = bilevel(&["solve", "no/such/problem.blv", "--output", path(&failed)]);
    assert_eq!(out.status.code(), Some(2));
    let names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["report.json"]);
}

#[test]
fn games_and_robust_files_run() {
    for (cmd, file) in [("game", "unique_equilibrium.game"), ("game", "floor_game.blv"), ("robust", "shifted_square.rob")] {
        let out = bilevel(&[cmd, path(&problems().join(file)), "--format", "text"]);
        assert_eq!(out.status.code(), Some(0), "{file}: {}", stderr(&out));
    }
}

#[test]
fn bad_options_are_input_errors() {
    let file = problems().join("split_image.blv");
    for extra in [["--psi", "magic"], ["--concepts", "nonsense"], ["--format", "xml"], ["--threads", "0"]] {
        let mut args = vec!["solve", path(&file)];
        args.extend(extra);
        assert_eq!(bilevel(&args).status.code(), Some(2), "{extra:?}");
    }
}

#[test]
fn verify_output_does_not_depend_on_threads() {
    let dir = problems();
    let one = bilevel(&["verify", path(&dir), "--threads", "1"]);
    let eight = bilevel(&["verify", path(&dir), "--threads", "8"]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, eight.stdout);
}
