use std::path::Path;
use std::process::Command;

use corral_core::environments::write_losses;

fn corral() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corral"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CONFIG: &str = r#"
algorithm = "corral_lp"
seeds = [4, 2]

[env]
kind = "piecewise_drift"
d = 3
horizon = 400
switches = 2
p = 1.6
noise = 0.4
"#;

#[test]
fn run_writes_checkpoint_trace_sorted_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONFIG);
    let out = dir.path().join("trace.csv");
    let st = corral()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "run_id,seed,algorithm,t,realized_loss,cum_loss,cum_regret,segment_id,p_max,diag");
    let keys: Vec<(u64, usize)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(keys, vec![(2, 100), (2, 200), (2, 400), (4, 100), (4, 200), (4, 400)]);
    assert!(lines[1].contains("gamma="));

    let again = dir.path().join("again.csv");
    corral()
        .args(["run", "--jobs", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&again)
        .status()
        .unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let full = dir.path().join("full.csv");
    corral()
        .args(["run", "--full-trace", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&full)
        .status()
        .unwrap();
    assert_eq!(std::fs::read_to_string(&full).unwrap().lines().count(), 1 + 800);

    let agg = corral().arg("aggregate").arg(&out).arg(&full).output().unwrap();
    assert_eq!(agg.status.code(), Some(0));
    let table = String::from_utf8(agg.stdout).unwrap();
    assert!(table.starts_with("algorithm,horizon,t,n,mean_regret,stderr\n"));
    assert!(table.contains("corral_lp,400,400,4,"));
    assert!(table.contains("T/T4"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("p.toml", CONFIG.replace("corral_lp", "unconstrained_oco")),
        ("s.toml", CONFIG.replace("switches = 2", "switches = 4000")),
        ("k.toml", CONFIG.replace("noise = 0.4", "noise = 0.4\nwhatever = 1")),
        ("g.toml", CONFIG.replace("horizon = 400", "horizon = 3").replace("p = 1.6", "p = 2.0")),
    ] {
        let cfg = write(dir.path(), name, &text);
        let out = corral().args(["run", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = corral().args(["run", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let bad = write(dir.path(), "bad.csv", "a,b\n1,2\n");
    let agg = corral().arg("aggregate").arg(&bad).output().unwrap();
    assert_eq!(agg.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three_and_a_diagnostics_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut losses = vec![vec![0.1, -0.2]; 50];
    losses[30] = vec![f64::NAN, 0.0];
    let mut buf = Vec::new();
    write_losses(&mut buf, &losses, 2.0).unwrap();
    std::fs::write(dir.path().join("l.txt"), buf).unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        r#"
algorithm = "corral_lp"
seeds = [1]

[env]
kind = "zero"
d = 2
horizon = 50
switches = 1
loss_file = "l.txt"
"#,
    );
    let out_csv = dir.path().join("t.csv");
    let out = corral().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_csv).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.contains(",31,") && last.contains("error="), "{last}");
}

#[test]
fn oracle_prints_segments() {
    let dir = tempfile::tempdir().unwrap();
    let losses = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
    let mut buf = Vec::new();
    write_losses(&mut buf, &losses, 2.0).unwrap();
    let path = dir.path().join("l.txt");
    std::fs::write(&path, buf).unwrap();
    let out = corral()
        .args(["oracle", "--switches", "2", "--p", "2", "--losses"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "value -4.0000000000000000e0");
    assert_eq!(lines[1], "segment 0 rounds 0..2 anchor -1.0000000000000000e0 0.0000000000000000e0");
    assert_eq!(lines[2], "segment 1 rounds 2..4 anchor 0.0000000000000000e0 -1.0000000000000000e0");
}
