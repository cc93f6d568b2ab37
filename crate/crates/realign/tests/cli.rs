//! End-to-end runs of the `realign` binary.

use std::path::Path;
use std::process::{Command, Output};

fn realign(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_realign"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const CONFIG: &str = r#"
env = "treasure-grid"
interactions = 30
seeds = 2

[[interpreters]]
kind = "explicit-eq1"

[[interpreters]]
kind = "random-baseline"

[[users]]
user_id = "u"
true_utility = { kind = "linear", weights = [0.3, 0.7] }

[output]
cache_dir = "cache"
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_reproducible_outputs() {
    let dir = setup();
    let p = dir.path();
    let a = realign(&["run", "--config", "exp.toml", "--out", "a"], p);
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(stdout(&a).contains("explicit-eq1"));
    let b = realign(&["run", "--config", "exp.toml", "--out", "b", "--seed", "0"], p);
    assert!(b.status.success(), "{}", stderr(&b));
    for f in ["metrics.csv", "summary.csv", "audit/explicit-eq1-argmax-s1.jsonl"] {
        assert_eq!(std::fs::read(p.join("a").join(f)).unwrap(), std::fs::read(p.join("b").join(f)).unwrap(), "{f}");
    }
    // the policy set was cached on the first run
    assert_eq!(std::fs::read_dir(p.join("cache")).unwrap().count(), 1);

    let c = realign(&["run", "--config", "exp.toml", "--out", "c", "--seed", "5"], p);
    assert!(c.status.success());
    assert_ne!(std::fs::read(p.join("a/metrics.csv")).unwrap(), std::fs::read(p.join("c/metrics.csv")).unwrap());

    let s = realign(&["summarize", "a/metrics.csv", "--out", "again.csv"], p);
    assert!(s.status.success(), "{}", stderr(&s));
    assert_eq!(std::fs::read(p.join("again.csv")).unwrap(), std::fs::read(p.join("a/summary.csv")).unwrap());
    assert_eq!(stdout(&s), stdout(&a));
}

#[test]
fn overrides_reach_nested_fields() {
    let dir = setup();
    let p = dir.path();
    let o = realign(
        &["run", "--config", "exp.toml", "--out", "o", "--override", "interactions=3", "--override", "output.audit=false"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(p.join("o/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 2 * 3);
    assert!(!p.join("o/audit").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = setup();
    let p = dir.path();
    let cases: [&[&str]; 4] = [
        &["run", "--config", "exp.toml", "--out", "x", "--override", "env=deep-sea"],
        &["run", "--config", "missing.toml", "--out", "x"],
        &["run", "--config", "exp.toml"],
        &["run", "--config", "exp.toml", "--out", "x", "--override", "interpreters.0.kind=oracle"],
    ];
    for args in cases {
        let o = realign(args, p);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("config error"), "{}", stderr(&o));
    }
    let o = realign(&["run", "--config", "exp.toml", "--out", "x", "--override", "interpreters.0.kind=oracle"], p);
    assert!(stderr(&o).contains("interpreters[0].kind"));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = setup();
    let p = dir.path();
    std::fs::write(p.join("bad.csv"), "not,a,metrics,file\n1,2,3,4\n").unwrap();
    let o = realign(&["summarize", "bad.csv"], p);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    std::fs::write(p.join("empty.csv"), "run_id,seed,interaction,interpreter,selector,user_id,true_regret,aligned,xi_error,zeta,zeta_hat,policy_id\n").unwrap();
    let o = realign(&["summarize", "empty.csv"], p);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn train_and_inspect_front() {
    let dir = setup();
    let p = dir.path();
    let t = realign(&["train", "--config", "exp.toml", "--out", "set.json"], p);
    assert!(t.status.success(), "{}", stderr(&t));
    assert!(stdout(&t).contains("(10.000, -7.000)"));

    let i = realign(&["inspect-front", "--policy-set", "set.json", "--json"], p);
    assert!(i.status.success(), "{}", stderr(&i));
    let set: serde_json::Value = serde_json::from_slice(&i.stdout).unwrap();
    assert_eq!(set["policies"].as_array().unwrap().len(), 4);

    let r = realign(&["run", "--config", "exp.toml", "--out", "r", "--policy-set", "set.json"], p);
    assert!(r.status.success(), "{}", stderr(&r));

    let e = realign(&["inspect-front", "--env", "chore-grid-0"], p);
    assert!(e.status.success(), "{}", stderr(&e));
    assert!(stdout(&e).contains("chore-grid-0"));
    let e = realign(&["inspect-front", "--env", "nowhere"], p);
    assert_eq!(e.status.code(), Some(2));
}
