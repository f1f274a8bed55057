use std::fs;
use std::process::{Command, Output};

fn contembed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contembed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = contembed(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    contembed(args).status.code().expect("exit code")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("contembed-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["map", "eval", "tent", "1/x"]), 1);
    assert_eq!(code(&["map", "eval", "nosuchmap", "1/2"]), 1);
    assert_eq!(code(&["map", "parse", "pl 0:0 1/2:1/2 1:1/4"]), 1);
    assert_eq!(code(&["permute", "admissible", "fig1", "3,0,0,2"]), 1);
    assert_eq!(code(&["permute", "admissible", "fig1", "1,0"]), 1);
    assert_eq!(code(&["zigzag", "tent", "--branch", "5"]), 1);
    // well formed but impossible
    assert_eq!(code(&["map", "eval", "tent", "3/2"]), 2);
    assert_eq!(code(&["permute", "topmost", "ex67", "--branch", "1"]), 2);
    assert_eq!(
        code(&["access", "certificate", "--stages", "ex67", "--branches", "1"]),
        2
    );
}

#[test]
fn map_commands() {
    assert_eq!(stdout(&["map", "eval", "ex67", "1/12"]).trim(), "1/4");
    assert_eq!(stdout(&["map", "preimages", "minc", "0"]).trim(), "0 2/3");
    assert_eq!(
        stdout(&["map", "iterate", "ex67", "2", "--emit"]).trim(),
        "pl 0:0 1/12:3/4 1/4:1/4 3/4:3/4 11/12:1/4 1:1"
    );
    assert_eq!(
        stdout(&["map", "compose", "id", "tent", "--emit"]).trim(),
        "pl 0:0 1/2:1 1:0"
    );
    let text = stdout(&["map", "parse", "nadler"]);
    assert!(text.contains("vertices: 0:0 1/5:1/5 2/5:4/5 3/5:1/5 4/5:4/5 1:1"));
    assert!(text.contains("breakpoints: 0 2/5 3/5 1"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&["map", "parse", "tent", "--json"])).unwrap();
    assert_eq!(v["map"], "pl 0:0 1/2:1 1:0");
}

#[test]
fn chain_and_permutation_commands() {
    assert!(stdout(&["chain", "uniform", "4"]).contains("mesh: 3/8"));
    assert!(stdout(&["chain", "pattern", "tent", "--chain", "2", "--mesh", "1/4"]).contains('2'));
    assert_eq!(
        stdout(&["zigzag", "ex67", "--branch", "1"]).trim(),
        "ZIGZAG witness a=0 e=1"
    );
    assert_eq!(stdout(&["zigzag", "tent", "--branch", "0"]).trim(), "NON-ZIGZAG");
    assert_eq!(
        stdout(&["permute", "admissible", "fig1", "3,0,1,2", "--chain", "4"]).trim(),
        "ADMISSIBLE"
    );
    assert_eq!(
        stdout(&["permute", "admissible", "fig1", "perm 3 0 1 2", "--chain", "4"]).trim(),
        "ADMISSIBLE"
    );
    let top = stdout(&["permute", "topmost", "fig1", "--branch", "0"]);
    assert!(top.starts_with("perm 3"));
    assert!(stdout(&["permute", "enumerate", "tent"]).contains("count: 2"));
}

#[test]
fn star_and_access_commands() {
    let s = stdout(&["star", "fig3f", "fig3g", "--p1", "2,1,0,3", "--p2", "1,0"]);
    assert!(s.contains("top: H_03"));
    assert!(s.contains("(T2,T1) = (0,3) MATCH"));
    let a = stdout(&["access", "surjective", "minc"]);
    assert!(a.contains("A_2 = [1/3,2/3]"));
    assert_eq!(
        stdout(&["access", "rset", "minc", "1/3,2/3"]).trim(),
        "[1/3,3/8) U [7/12,2/3]"
    );
    assert_eq!(
        stdout(&["access", "pullback", "tent", "1/2,1", "1/4,1/2"]).trim(),
        "[3/4,7/8]"
    );
    assert!(stdout(&["access", "nadler", "2,1"]).contains("exponents:"));
}

#[test]
fn embed_round_trip() {
    let svg = scratch("knaster.svg");
    let text = stdout(&[
        "embed",
        "plan",
        "--stages",
        "tent",
        "--topmost",
        "0",
        "--depth",
        "2",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(text.contains("probe PASS"));
    let body = fs::read_to_string(&svg).unwrap();
    assert!(body.starts_with("<?xml"));
    assert_eq!(body.matches("class=\"band\"").count(), 3);

    let plan = scratch("family.json");
    let json = stdout(&[
        "access",
        "family",
        "--stages",
        "minc,minc",
        "--choices",
        "L,R",
        "--interval",
        "1/3,2/3",
        "--json",
    ]);
    fs::write(&plan, json).unwrap();
    let probes = stdout(&["embed", "probe", plan.to_str().unwrap()]);
    assert_eq!(probes.matches("probe PASS").count(), 2);

    let scene = scratch("scene.json");
    stdout(&[
        "embed",
        "render",
        plan.to_str().unwrap(),
        "--out",
        scene.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&scene).unwrap()).unwrap();
    assert_eq!(v["marks"].as_array().unwrap().len(), 2);
}
