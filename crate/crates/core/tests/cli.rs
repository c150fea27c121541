use std::fs;
use std::path::Path as FsPath;
use std::process::{Command, Output};

use pnl_attrib::io::{read_columns, read_path_file, sha256_file, write_path_file, RunManifest};
use pnl_attrib::Path;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pnl-attrib"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn columns(file: &FsPath) -> std::collections::BTreeMap<String, Vec<f64>> {
    read_columns(fs::File::open(file).unwrap()).unwrap()
}

/// x1: 1 -> 3, x2: 2 -> 5 in one step.
fn two_point(dir: &FsPath) -> String {
    let p = Path::continuous(vec![0.0, 1.0], vec![vec![1.0, 3.0], vec![2.0, 5.0]]).unwrap();
    let file = dir.join("two_point.csv");
    write_path_file(&p, &file).unwrap();
    file.to_str().unwrap().to_string()
}

fn check_manifest(dir: &FsPath) -> RunManifest {
    let m = RunManifest::read(&dir.join("manifest.json")).unwrap();
    assert_eq!(m.spec_version, "1.0");
    for (name, digest) in &m.outputs {
        assert_eq!(&sha256_file(&dir.join(name)).unwrap(), digest, "{name}");
    }
    m
}

#[test]
fn su_and_oat_on_one_step() {
    let tmp = tempfile::tempdir().unwrap();
    let path = two_point(tmp.path());
    let out = tmp.path().join("su");
    let o = run(&["decompose", "--method", "su", "--perm", "id", "--payoff", "product2", "--path", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = columns(&out.join("decomposition.csv"));
    // f(3,2) - f(1,2) = 4, f(3,5) - f(3,2) = 9
    assert_eq!(c["D1"], vec![0.0, 4.0]);
    assert_eq!(c["D2"], vec![0.0, 9.0]);
    assert_eq!(c["total"], vec![0.0, 13.0]);
    check_manifest(&out);

    let out = tmp.path().join("su_rev");
    let o = run(&["decompose", "--method", "su", "--perm", "rev", "--payoff", "product2", "--path", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let c = columns(&out.join("decomposition.csv"));
    assert_eq!(c["D1"], vec![0.0, 10.0]);
    assert_eq!(c["D2"], vec![0.0, 3.0]);

    let out = tmp.path().join("oat");
    let o = run(&["decompose", "--method", "oat", "--payoff", "product2", "--path", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let c = columns(&out.join("decomposition.csv"));
    assert_eq!(c["D1"], vec![0.0, 4.0]);
    assert_eq!(c["D2"], vec![0.0, 3.0]);
    assert_eq!(c["residual"], vec![0.0, 6.0]);
}

#[test]
fn closed_form_writes_interaction() {
    let tmp = tempfile::tempdir().unwrap();
    let path = two_point(tmp.path());
    let out = tmp.path().join("iasu");
    let o = run(&["decompose", "--method", "iasu", "--payoff", "product2", "--path", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let c = columns(&out.join("decomposition.csv"));
    // f_i Δx_i + ½ f_12 Δx_1 Δx_2 with gradient at (1, 2): 2·2 + 3, 1·3 + 3
    assert_eq!(c["D1"], vec![0.0, 7.0]);
    assert_eq!(c["D2"], vec![0.0, 6.0]);
    assert_eq!(c["additivity_gap"], vec![0.0, 0.0]);
    let inter = columns(&out.join("interaction.csv"));
    let k = inter["i"].iter().zip(&inter["j"]).zip(&inter["time"]).position(|((&i, &j), &t)| i == 1.0 && j == 2.0 && t == 1.0).unwrap();
    assert_eq!(inter["I"][k], 6.0);
    let m = check_manifest(&out);
    assert!(m.outputs.contains_key("interaction.csv"));
    assert_eq!(m.inputs.len(), 1);
}

#[test]
fn usage_and_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = two_point(tmp.path());
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let code = |args: &[&str]| run(args).status.code().unwrap();

    // perm is required for su and forbidden elsewhere
    assert_eq!(code(&["decompose", "--method", "su", "--payoff", "product2", "--path", &path, "--out", out]), 2);
    assert_eq!(code(&["decompose", "--method", "iasu", "--perm", "id", "--payoff", "product2", "--path", &path, "--out", out]), 2);
    assert_eq!(code(&["decompose", "--method", "su", "--perm", "1,1", "--payoff", "product2", "--path", &path, "--out", out]), 2);
    // payoff of the wrong dimension
    assert_eq!(code(&["decompose", "--method", "oat", "--payoff", "linear:1,2,3", "--path", &path, "--out", out]), 2);
    assert_eq!(code(&["decompose", "--method", "oat", "--payoff", "nope", "--path", &path, "--out", out]), 1);
    assert_eq!(code(&["decompose", "--method", "oat", "--payoff", "product2", "--path", "/nonexistent.csv", "--out", out]), 1);
    assert_eq!(code(&["frobnicate"]), 2);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "time,X1,J1\n0,1,0\n1,abc,0\n").unwrap();
    let o = run(&["decompose", "--method", "oat", "--payoff", "linear:1", "--path", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn strict_refuses_simultaneous_jumps() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Path::new(
        vec![0.0, 1.0],
        vec![vec![1.0, 2.0], vec![1.0, 3.0]],
        vec![vec![true], vec![true]],
    )
    .unwrap();
    let file = tmp.path().join("both.csv");
    write_path_file(&p, &file).unwrap();
    let file = file.to_str().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let o = run(&["decompose", "--method", "iasu", "--strict", "--payoff", "product2", "--path", file, "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["decompose", "--method", "iasu", "--payoff", "product2", "--path", file, "--out", out]);
    assert!(o.status.success());
    assert!(!o.stderr.is_empty(), "fallback should warn");
    let c = columns(&FsPath::new(out).join("decomposition.csv"));
    // average of the two orders: id gives (1, 4), rev gives (3, 2)
    assert_eq!(c["D1"][1], 2.0);
    assert_eq!(c["D2"][1], 3.0);
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bond.cfg");
    fs::write(&cfg, "kind = bond\nsteps = 200\nseed = 11\n").unwrap();
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = run(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push(fs::read(out.join("path.csv")).unwrap());
        let m = check_manifest(&out);
        assert_eq!(m.seeds, vec![11]);
    }
    assert_eq!(bytes[0], bytes[1]);

    let p = read_path_file(&tmp.path().join("a").join("path.csv")).unwrap();
    assert_eq!(p.dim(), 4);
    let cs_jumps: Vec<usize> = (1..=p.steps()).filter(|&l| p.is_jump(2, l)).collect();
    assert_eq!(cs_jumps.len(), 1);
    assert_eq!(p.times()[cs_jumps[0]], 0.5);
    assert!((p.value(2, p.steps()) - 0.01).abs() < 1e-15);

    fs::write(&cfg, "kind = bond\nsteps = many\n").unwrap();
    let o = run(&["simulate", cfg.to_str().unwrap(), "--out", tmp.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn jobs_do_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pair.cfg");
    fs::write(&cfg, "kind = correlated_gbm_pair\nsteps = 64\nseed = 5\nrho = 0.3\n").unwrap();
    let sim = tmp.path().join("sim");
    assert!(run(&["simulate", cfg.to_str().unwrap(), "--out", sim.to_str().unwrap()]).status.success());
    let path = sim.join("path.csv");
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out = tmp.path().join(format!("asu{jobs}"));
        let o = run(&["decompose", "--method", "asu", "--payoff", "product2", "--path", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert!(o.status.success());
        outputs.push(fs::read(out.join("decomposition.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn demo_harmonic_prints_first_term() {
    let o = run(&["demo", "harmonic", "--n", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["1", "1.0"]), "{text}");
}

#[test]
fn demo_bond_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bond");
    let o = run(&["demo", "bond", "--n", "200", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = check_manifest(&out);
    for f in ["path.csv", "decomposition.csv", "decomposition_asu.csv", "interaction.csv", "waterfall_0_0.4.csv", "waterfall_0_1.csv"] {
        assert!(m.outputs.contains_key(f), "{f}");
    }
    let manifests = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name() == "manifest.json").count();
    assert_eq!(manifests, 1);

    let c = columns(&out.join("decomposition.csv"));
    for m in 0..c["time"].len() {
        let sum: f64 = ["D1", "D2", "D3", "D4"].iter().map(|k| c[*k][m]).sum();
        assert!((c["total"][m] - sum - c["additivity_gap"][m]).abs() < 1e-12);
    }
    // no spread contribution before its jump
    let before: Vec<f64> = c["time"].iter().zip(&c["D3"]).filter(|(t, _)| **t < 0.5).map(|(_, v)| *v).collect();
    assert!(before.iter().all(|v| *v == 0.0));
}

#[test]
fn demo_stability_and_var_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("stab");
    let o = run(&["demo", "stability", "--n", "1000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    check_manifest(&out);
    let out = tmp.path().join("var");
    let o = run(&["demo", "var", "--n", "100", "--lambda", "0.95", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    check_manifest(&out);
    let o = run(&["demo", "var", "--lambda", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}
