use std::path::Path;
use std::process::{Command, Output};

fn stirap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stirap"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

/// Data rows of a CSV written by the tool, skipping the comment block.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    lines.next();
    lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = stirap(dir.path(), &["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["simulate", "scan-delay", "scan-detuning", "scan-width", "pulse-train", "string-scan", "optimize", "detect", "envelopes"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn bad_config_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n[pulses]\nomega_805_peak_mhz = 90\n").unwrap();
    let out = stirap(dir.path(), &["--config", cfg.to_str().unwrap(), "envelopes"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!dir.path().join("envelopes.csv").exists());
}

#[test]
fn negative_width_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[pulses]\nsigma_us = -1.0\n").unwrap();
    let out = stirap(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(!out.status.success());
}

#[test]
fn zero_delay_envelopes_peak_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[pulses]\ndelta_tau_us = 0.0\n").unwrap();
    let out = stirap(dir.path(), &["--config", cfg.to_str().unwrap(), "envelopes"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("envelopes.csv"));
    let argmax = |c: usize| r.iter().max_by(|a, b| a[c].total_cmp(&b[c])).unwrap()[0];
    assert_eq!(argmax(1), argmax(2));
}

#[test]
fn detect_with_nothing_shelved_estimates_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[detection]\np_shelved = 0.0\nshots = 2000\n").unwrap();
    for seed in ["1", "2", "3"] {
        let out = stirap(dir.path(), &["--config", cfg.to_str().unwrap(), "--seed", seed, "detect"]);
        assert!(out.status.success());
        let r = rows(&dir.path().join("detect.csv"));
        let mean = r.iter().map(|x| x[4]).sum::<f64>() / r.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }
}

#[test]
fn simulate_writes_config_header_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = stirap(dir.path(), &["--preset", "fig3", "--plot", "simulate"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(text.starts_with("# stirap "));
    assert!(text.contains("# [pulses]"));
    let last = rows(&dir.path().join("trajectory.csv")).pop().unwrap();
    let total: f64 = last[1..6].iter().sum();
    assert!((total - 1.0).abs() < 1e-8);
    assert!(last[5] > 0.8);
    assert!(dir.path().join("trajectory.svg").exists());
}
