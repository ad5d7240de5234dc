//! End-to-end tests of the command-line contract: flags, artifacts, and
//! exit codes (0 = target met, 2 = best effort below target, 1 = error).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const DEFS: &str = "\
1 (cpu0:cache:rd:req)
2 (cache:cpu0:rd:resp)
3 (cpu1:cache:rd:req)
4 (cache:cpu1:rd:resp)
5 (cache:mem:rd:req)
6 (mem:cache:rd:resp)
initial = {1,3}
terminal = {2,4}
";
const TRACE: &str = "3 4 1 1 5 6 2 5 6 2 1 2 3 4\n";

fn flowmine(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowmine"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("defs.txt"), DEFS).unwrap();
    fs::write(dir.path().join("t.txt"), TRACE).unwrap();
    dir
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn mine_worked_example_meets_target() {
    let dir = setup();
    let out = flowmine(
        &[
            "mine", "--defs", "defs.txt", "--traces", "t.txt", "--accuracy", "0.9", "--theta",
            "0.45", "--out", "out",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    let ar: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("acceptance-ratio: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(ar >= 0.9);
    assert!(dir.path().join("out/model.txt").exists());
    assert!(dir.path().join("out/essential.txt").exists());
}

#[test]
fn invalid_accuracy_is_a_flag_error() {
    let dir = setup();
    let out = flowmine(
        &["mine", "--defs", "defs.txt", "--traces", "t.txt", "--accuracy", "1.01"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("accuracy"));
}

#[test]
fn missing_defs_file_is_an_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.txt"), TRACE).unwrap();
    let out = flowmine(
        &["mine", "--defs", "nope.txt", "--traces", "t.txt"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn best_effort_run_exits_two() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("defs.txt"),
        "1 (a:b:x:req)\n2 (b:a:x:resp)\ninitial = {1}\nterminal = {2}\n",
    )
    .unwrap();
    // extra responses that no flow instance can claim
    fs::write(dir.path().join("t.txt"), "1 2 2 2 2 2\n").unwrap();
    let out = flowmine(
        &["mine", "--defs", "defs.txt", "--traces", "t.txt", "--out", "out"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 2);
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("below-threshold: true"));
}

#[test]
fn emf_toggle_changes_nothing_semantic() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("f.txt"),
        "\
1 (a:b:rd:req)
2 (b:c:rd:req)
3 (c:b:rd:resp)
4 (b:a:rd:resp)
11 (x:y:wr:req)
12 (y:x:wr:resp)
initial = {1,11}
terminal = {4,12}
flow rd
1 -> 2
2 -> 3
3 -> 4
end
flow wr
11 -> 12
end
",
    )
    .unwrap();
    let gen = flowmine(
        &[
            "generate", "--flows", "f.txt", "--instances", "5", "--num-traces", "3", "--seed",
            "9", "--out", "g",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&gen), 0);

    for (flag, sub) in [("on", "a"), ("off", "b")] {
        let out = flowmine(
            &[
                "mine", "--defs", "g/defs.txt", "--traces", "g/traces.txt", "--emf", flag,
                "--out", sub,
            ],
            dir.path(),
        );
        assert_eq!(exit_code(&out), 0);
    }
    let read = |sub: &str| fs::read_to_string(dir.path().join(sub).join("model.txt")).unwrap();
    let (a, b) = (read("a"), read("b"));
    let paths = |s: &str| -> Vec<String> {
        s.lines()
            .filter(|l| l.starts_with("path: "))
            .map(str::to_string)
            .collect()
    };
    assert_eq!(paths(&a), paths(&b));
    let ar = |s: &str| -> f64 {
        s.lines()
            .find_map(|l| l.strip_prefix("acceptance-ratio: "))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((ar(&a) - ar(&b)).abs() <= 0.01);
}

#[test]
fn mine_dot_and_json_artifacts() {
    let dir = setup();
    let out = flowmine(
        &[
            "mine", "--defs", "defs.txt", "--traces", "t.txt", "--dot", "--json-report", "--out",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0);
    let dot = fs::read_to_string(dir.path().join("out/causality.dot")).unwrap();
    assert!(dot.starts_with("digraph causality {"));
    assert!(fs::read_to_string(dir.path().join("out/flows.dot"))
        .unwrap()
        .contains("digraph flow_0"));
    let json = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["acceptance_ratio"].as_f64().unwrap() >= 0.9);
}

#[test]
fn generate_preset_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for sub in ["a", "b"] {
        let out = flowmine(
            &["generate", "--preset", "small-20", "--seed", "7", "--out", sub],
            dir.path(),
        );
        assert_eq!(exit_code(&out), 0);
    }
    let read = |sub: &str, f: &str| fs::read(dir.path().join(sub).join(f)).unwrap();
    for f in ["traces.txt", "defs.txt", "ground-truth.txt"] {
        assert_eq!(read("a", f), read("b", f), "{f} differs between reruns");
    }
}

#[test]
fn generate_large_20_hits_reference_volume() {
    let dir = TempDir::new().unwrap();
    let out = flowmine(
        &["generate", "--preset", "large-20", "--seed", "1", "--out", "g"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0);
    let traces = fs::read_to_string(dir.path().join("g/traces.txt")).unwrap();
    let total: usize = traces.lines().map(|l| l.split_whitespace().count()).sum();
    assert!(
        (8720..=13080).contains(&total),
        "total {total} outside ±20% of 10900"
    );
}

#[test]
fn generate_with_drop_rule_removes_id() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("f.txt"),
        fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/soc10.flows"),
        )
        .unwrap(),
    )
    .unwrap();
    let out = flowmine(
        &[
            "generate", "--flows", "f.txt", "--instances", "2", "--drop", "5:1.0", "--out", "g",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0);
    let traces = fs::read_to_string(dir.path().join("g/traces.txt")).unwrap();
    assert!(traces
        .split_whitespace()
        .all(|tok| tok != "5"));
}

#[test]
fn unknown_preset_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = flowmine(&["generate", "--preset", "huge-99"], dir.path());
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn diff_identical_and_disjoint_models() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("a.txt"),
        "model-size: 2\npath: 1 5 6 2\npath: 3 4\n",
    )
    .unwrap();
    fs::write(dir.path().join("b.txt"), "model-size: 1\npath: 9 8\n").unwrap();

    let same = flowmine(&["diff", "a.txt", "a.txt"], dir.path());
    assert_eq!(exit_code(&same), 0);
    assert!(String::from_utf8_lossy(&same.stdout).contains("models are identical"));

    let diff = flowmine(&["diff", "a.txt", "b.txt"], dir.path());
    assert_eq!(exit_code(&diff), 0);
    let text = String::from_utf8_lossy(&diff.stdout).to_string();
    assert!(text.contains("only-in-a: 2"));
    assert!(text.contains("only-in-b: 1"));
    assert!(text.contains("path: 9 8"));

    let bad = flowmine(&["diff", "a.txt", "missing.txt"], dir.path());
    assert_eq!(exit_code(&bad), 1);
}

#[test]
fn mine_is_byte_identical_across_runs() {
    let dir = setup();
    for sub in ["a", "b"] {
        let out = flowmine(
            &[
                "mine", "--defs", "defs.txt", "--traces", "t.txt", "--seed", "3", "--jobs", "2",
                "--json-report", "--out", sub,
            ],
            dir.path(),
        );
        assert_eq!(exit_code(&out), 0);
    }
    let read = |sub: &str, f: &str| fs::read(dir.path().join(sub).join(f)).unwrap();
    for f in ["model.txt", "report.json", "essential.txt"] {
        assert_eq!(read("a", f), read("b", f), "{f} differs between reruns");
    }
}
