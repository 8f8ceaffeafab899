use std::path::PathBuf;
use std::process::{Command, Output};

use eps_workbench::trace::check::SUITES;
use eps_workbench::trace::faults::planted;

fn epsw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epsw"))
        .args(args)
        .output()
        .expect("epsw runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("epsw-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_one_record_per_stage() {
    let dir = scratch("run");
    let cfg = dir.join("single.cfg");
    std::fs::write(&cfg, "construction = single\nhorizon = 500\n").unwrap();
    let (a, b) = (dir.join("a.trace"), dir.join("b.trace"));
    assert_eq!(code(&epsw(&["run", s(&cfg), "-o", s(&a)])), 0);
    assert_eq!(code(&epsw(&["run", s(&cfg), "-o", s(&b)])), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    let records = text.lines().filter(|l| l.starts_with("s=")).count();
    assert_eq!(records, 500);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
}

#[test]
fn run_config_errors_exit_2() {
    let dir = scratch("badcfg");
    let missing = dir.join("uses-missing.cfg");
    std::fs::write(&missing, "opponents = scripted\nscripts = nowhere.txt\n").unwrap();
    let out = epsw(&["run", s(&missing)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.txt"));
    let unknown = dir.join("unknown.cfg");
    std::fs::write(&unknown, "colour = blue\n").unwrap();
    assert_eq!(code(&epsw(&["run", s(&unknown)])), 2);
    assert_eq!(code(&epsw(&["run", s(&dir.join("absent.cfg"))])), 2);
}

#[test]
fn scripts_resolve_next_to_the_config() {
    let dir = scratch("scripts");
    std::fs::write(dir.join("halves.txt"), "G 0 0 0 4\nG 0 0 1 8\n").unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "horizon = 40\nopponents = scripted\nscripts = halves.txt\n",
    )
    .unwrap();
    let out = epsw(&["run", s(&cfg)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("G 0 0 1 8"));
    assert!(text.contains("tflag 1 0 0"));
}

#[test]
fn check_exit_codes() {
    let dir = scratch("check");
    let healthy = dir.join("healthy.trace");
    assert_eq!(
        code(&epsw(&[
            "run",
            "--construction",
            "triad",
            "--horizon",
            "300",
            "-o",
            s(&healthy)
        ])),
        0
    );
    assert_eq!(code(&epsw(&["check", s(&healthy)])), 0);
    assert_eq!(
        code(&epsw(&[
            "check",
            s(&healthy),
            "--suites",
            "monotone,nonsense"
        ])),
        2
    );
    for suite in SUITES {
        let path = dir.join(format!("{suite}.trace"));
        std::fs::write(&path, planted(suite).unwrap().serialize()).unwrap();
        let out = epsw(&["check", s(&path)]);
        assert_eq!(code(&out), 1, "{suite}");
        assert!(stdout(&out).contains(&format!("FAIL {suite}")), "{suite}");
    }
    let garbage = dir.join("garbage.trace");
    std::fs::write(&garbage, "garbage").unwrap();
    let out = epsw(&["check", s(&garbage)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn scenario_exit_codes() {
    assert_eq!(code(&epsw(&["scenario", "refute-single"])), 0);
    assert_eq!(code(&epsw(&["scenario", "friedberg-roundtrip"])), 0);
    let out = epsw(&["scenario", "block-evolution"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("ok   diagram matches the golden file"));
    assert_eq!(code(&epsw(&["scenario", "no-such-scenario"])), 2);
    assert_eq!(code(&epsw(&["scenario", "--list"])), 0);
}

#[test]
fn render_and_svg() {
    let dir = scratch("render");
    assert_eq!(
        code(&epsw(&["scenario", "block-evolution", "--out", s(&dir)])),
        0
    );
    let trace = dir.join("block-evolution.trace.txt");
    let out = epsw(&["render", s(&trace), "--i", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        eps_workbench::scenarios::BLOCK_EVOLUTION_GOLDEN
    );
    let svg = epsw(&["render", s(&trace), "--i", "3", "--svg"]);
    assert_eq!(code(&svg), 0);
    assert!(stdout(&svg).starts_with("<svg"));
    assert_eq!(code(&epsw(&["render", s(&trace), "--i", "40"])), 2);
}

#[test]
fn friedberg_and_tie_check() {
    let dir = scratch("tables");
    let table = dir.join("psi.txt");
    std::fs::write(&table, "tot(1)\nfin(0,2)\ntot(1)\nempty\nfin(0,2)\n").unwrap();
    let out = epsw(&["friedberg", s(&table)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("programs 5  classes 3"));
    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "phi(3)\n").unwrap();
    assert_eq!(code(&epsw(&["friedberg", s(&bad)])), 2);

    let ceer = dir.join("r.txt");
    std::fs::write(&ceer, "P 0 2\nP 1 4\n").unwrap();
    let t = dir.join("t.txt");
    std::fs::write(&t, "0 0\n1 1\n2 3\n").unwrap();
    let args = |mode: &str| {
        vec![
            "tie-check".to_string(),
            "--ceer".into(),
            s(&ceer).into(),
            "--psi".into(),
            s(&table).into(),
            "--t".into(),
            s(&t).into(),
            "--horizon".into(),
            "5".into(),
            "--mode".into(),
            mode.into(),
        ]
    };
    let strong: Vec<String> = args("strong");
    let out = epsw(&strong.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    // Relating tot(1) to empty breaks the subrelation.
    std::fs::write(&ceer, "P 0 3\n").unwrap();
    let out = epsw(&strong.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("violated"));
}
