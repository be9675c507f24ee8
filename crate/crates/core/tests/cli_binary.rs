use std::process::Command;

fn uepopt(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_uepopt"))
        .args(args)
        .env_remove("UEPOPT_SEED")
        .output()
        .unwrap()
}

#[test]
fn help_lists_every_flag() {
    let out = uepopt(&["solve", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in [
        "--weights", "--profile", "--n", "--gamma-avg", "--spread", "--gammas", "--pmax", "--mmin", "--dt",
        "--strategy", "--seed", "--json", "--out", "--no-early-stop",
    ] {
        assert!(text.contains(flag), "{flag} missing from solve --help");
    }
    let sweep = String::from_utf8(uepopt(&["sweep", "--help"]).stdout).unwrap();
    for flag in ["--threads", "--trials", "--seed", "--out"] {
        assert!(sweep.contains(flag), "{flag} missing from sweep --help");
    }
}

#[test]
fn errors_exit_nonzero_with_message() {
    let out = uepopt(&["solve", "--mmin", "7"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("m_min"));
    assert!(!uepopt(&["solve", "--gamma-avg", "3"]).status.success());
    assert!(!uepopt(&["solve", "--frobnicate"]).status.success());
    assert!(!uepopt(&["validate", "--n", "9"]).status.success());
}

#[test]
fn seed_env_fallback() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_uepopt"));
        cmd.args(["solve", "--json", "--n", "5"]).args(extra).env_remove("UEPOPT_SEED");
        if let Some(v) = env {
            cmd.env("UEPOPT_SEED", v);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run(Some("42"), &[]), run(None, &["--seed", "42"]));
    assert_ne!(run(Some("42"), &[]), run(None, &["--seed", "43"]));
}

#[test]
fn solve_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let out = uepopt(&["solve", "--n", "4", "--gamma-avg", "8dB", "--json", "--out", plan.to_str().unwrap()]);
    assert!(out.status.success());
    let sim = uepopt(&["simulate", "--plan", plan.to_str().unwrap(), "--bits", "50000"]);
    assert!(sim.status.success());
    assert!(String::from_utf8(sim.stdout).unwrap().contains("J analytic"));
}

#[test]
fn profile_gen_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.txt");
    assert!(uepopt(&["profile-gen", "--profile", "isfr_geometric", "--n", "6", "--out", path.to_str().unwrap()]).status.success());
    let out = uepopt(&["solve", "--weights", path.to_str().unwrap(), "--gamma-avg", "0dB"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
