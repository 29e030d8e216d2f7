use std::path::Path;
use std::process::{Command, Output};

fn elicit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elicit")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = elicit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn run_auto_veri_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let args = ["run-auto", "--model", "binomial", "--mode", "veri", "--n-grid", "21", "--n-active", "79", "--seed", "7"];
        let stdout = ok(&[&args[..], &["--out", out.to_str().unwrap()]].concat());
        assert!(stdout.contains("100 judgements"), "{stdout}");
    }
    let trace = read(&a, "trace.csv");
    assert_eq!(trace.lines().next().unwrap(), "step,phase,theta,outcome,label");
    assert_eq!(trace.lines().count(), 101);
    assert_eq!(trace.lines().filter(|l| l.contains(",grid,")).count(), 21);
    let belief = read(&a, "belief.csv");
    assert_eq!(belief.lines().next().unwrap(), "theta,density,band_lo,band_hi");
    assert_eq!(belief.lines().count(), 202);
    for name in ["trace.csv", "belief.csv", "summary.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_str(&read(&a, "summary.json")).unwrap();
    assert!(summary["diagnostic"].is_number());
    assert!(a.join("session.jsonl").exists());
}

#[test]
fn run_auto_pari_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    ok(&["run-auto", "--mode", "pari", "--n-grid", "6", "--n-active", "9", "--seed", "3", "--out", out.to_str().unwrap()]);
    let trace = read(&out, "trace.csv");
    assert_eq!(trace.lines().next().unwrap(), "step,phase,theta1,theta2,outcome1,outcome2,label");
    assert_eq!(trace.lines().count(), 16);
    let summary: serde_json::Value = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    assert!(summary["diagnostic"].is_null());
}

#[test]
fn invalid_arguments_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for args in [
        vec!["run-auto", "--mode", "pari", "--n-grid", "14", "--out", out],
        vec!["run-auto", "--mode", "sideways", "--out", out],
        vec!["run-auto", "--mode", "veri"],
        vec!["run-auto", "--mode", "veri", "--accept-lo", "70", "--accept-hi", "20", "--out", out],
        vec!["run-auto", "--model", "crp", "--mode", "veri", "--n-grid", "3", "--n-active", "0", "--out", out],
        vec!["report", "--group", "nameless"],
        vec!["frobnicate"],
    ] {
        let res = elicit(&args);
        assert!(!res.status.success(), "{args:?} should fail");
        assert!(!res.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn report_pools_groups() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (mode, seed) in [("veri", 1), ("veri", 2), ("pari", 1), ("veri", 3)] {
        let d = tmp.path().join(format!("{mode}{seed}"));
        let (g, a) = if mode == "veri" { ("6", "4") } else { ("3", "3") };
        ok(&["run-auto", "--mode", mode, "--n-grid", g, "--n-active", a, "--seed", &seed.to_string(), "--out", d.to_str().unwrap()]);
        dirs.push(d.to_str().unwrap().to_string());
    }
    let g1 = format!("first={},{},{}", dirs[0], dirs[1], dirs[2]);
    let g2 = format!("second={}/session.jsonl", dirs[3]);
    let table = ok(&["report", "--group", &g1, "--group", &g2]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,combination,first mean,first sd,second mean,second sd");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("veri,sum,"));
    assert!(lines[3].starts_with("pari,sum,"));
    // the second group has no preference sessions
    assert!(lines[3].ends_with(",,"), "{}", lines[3]);

    let file = tmp.path().join("table.csv");
    ok(&["report", "--group", &g1, "--group", &g2, "--out", file.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(file).unwrap(), table);

    let empty = elicit(&["report", "--group", "none="]);
    assert!(!empty.status.success());
    assert!(String::from_utf8_lossy(&empty.stderr).contains("no sessions"));
    let missing = elicit(&["report", "--group", "x=/nonexistent/log.jsonl"]);
    assert!(!missing.status.success());
}
