use std::path::Path;
use std::process::{Command, Output};

use sr_ofdm::cli::{theory_header, Manifest};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sr-ofdm"));
    c.env_remove("SR_OFDM_SEED").env_remove("SR_OFDM_WORKERS");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn sweep(out: &Path, extra: &[&str]) -> Output {
    run(bin()
        .args([
            "sweep",
            "--axis",
            "direct_snr_db",
            "--points",
            "12:30:3",
            "--trials",
            "1000",
            "--seed",
            "7",
            "--out",
        ])
        .arg(out)
        .args(extra))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn sweep_writes_one_csv_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sweep(dir.path(), &[]).status.success());
    for name in ["proposed_m1_estimated.csv", "proposed_m2_estimated.csv"] {
        let text = read(dir.path(), name);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "point,receiver,csi,ber_primary,ci_primary,ber_secondary,ci_secondary,ber_primary_theory,ber_secondary_theory");
        assert_eq!(lines.len(), 8, "{name}");
        let mut prev = f64::NEG_INFINITY;
        for row in &lines[1..] {
            let f: Vec<&str> = row.split(',').collect();
            assert_eq!(f.len(), 9);
            let x: f64 = f[0].parse().unwrap();
            assert!(x > prev);
            prev = x;
            for v in [f[0], f[3], f[4], f[5], f[6], f[7], f[8]] {
                let mantissa = v.split('e').next().unwrap().trim_start_matches('-');
                assert_eq!(mantissa.replace('.', "").len(), 9, "{v}");
            }
        }
    }
    let m = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.scenario.seed, 7);
    assert_eq!(m.files.len(), 2);
    assert!((m.moments.gamma1 - 17.0 / 9.0).abs() < 1e-9);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b, c, d) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    assert!(sweep(a.path(), &[]).status.success());
    assert!(sweep(b.path(), &["--workers", "3"]).status.success());
    assert!(run(bin()
        .args(["sweep", "--out"])
        .arg(c.path())
        .arg("--from-manifest")
        .arg(a.path().join("manifest.json")))
    .status
    .success());
    assert!(run(bin()
        .env("SR_OFDM_WORKERS", "2")
        .args(["sweep", "--out"])
        .arg(d.path())
        .arg("--from-manifest")
        .arg(c.path().join("manifest.json")))
    .status
    .success());
    for name in [
        "proposed_m1_estimated.csv",
        "proposed_m2_estimated.csv",
        "manifest.json",
    ] {
        let reference = read(a.path(), name);
        for other in [&b, &c, &d] {
            assert_eq!(reference, read(other.path(), name), "{name}");
        }
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sweep", "--points", "20", "--trials", "200", "--out"];
    assert!(run(bin().env("SR_OFDM_SEED", "99").args(args).arg(a.path()))
        .status
        .success());
    assert!(run(bin().args(args).arg(b.path()).args(["--seed", "99"]))
        .status
        .success());
    assert_eq!(
        read(a.path(), "proposed_m2_estimated.csv"),
        read(b.path(), "proposed_m2_estimated.csv")
    );
}

#[test]
fn bad_scenarios_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    std::fs::write(&scn, "# header\nm_s = 16\nwobble = 3\n").unwrap();
    let out = run(bin()
        .args(["sweep", "--out"])
        .arg(dir.path())
        .arg("--scenario")
        .arg(&scn));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("wobble"), "{err}");

    let out = run(bin().args(["theory", "--axis", "nope", "--out"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));

    let out = run(bin().args(["sweep", "--no-such-flag"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("taken");
    std::fs::write(&file, "x").unwrap();
    let out = run(bin()
        .args(["sweep", "--points", "20", "--trials", "10", "--out"])
        .arg(&file));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theory_curves_on_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args(["theory", "--points", "-10:40:5", "--out"]).arg(dir.path()));
    assert!(out.status.success());
    let text = read(dir.path(), "theory.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), theory_header());
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        // estimated CSI never beats perfect CSI
        assert!(r[2] >= r[1] && r[4] >= r[3]);
    }
    // diversity curves: slope over the last 10 dB approaches 1, 2, 4
    let n = rows.len();
    for (i, l_b) in [(8, 1.0), (10, 2.0), (12, 4.0)] {
        let slope = (rows[n - 3][i].log10() - rows[n - 1][i].log10()) / ((rows[n - 1][0] - rows[n - 3][0]) / 10.0);
        assert!((slope / l_b - 1.0).abs() < 0.05, "L_b {l_b}: {slope}");
    }
    let m = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.command, "theory");
    assert!((m.moments.gamma1 - 1.888889).abs() < 1e-6);
}

#[test]
fn sync_error_axis_has_21_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args([
            "sweep",
            "--axis",
            "sync_error_samples",
            "--points",
            "0:20:1",
            "--trials",
            "20",
            "--receivers",
            "proposed_m2",
            "--out",
        ])
        .arg(dir.path()));
    assert!(out.status.success());
    let text = read(dir.path(), "proposed_m2_estimated.csv");
    assert_eq!(text.lines().count(), 22);
    // analytic columns only where the closed forms apply
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows[0].ends_with(','));
    assert!(rows[1].ends_with(",,"));
}

#[test]
fn single_trial_dump() {
    let out = run(bin().args([
        "single",
        "--receivers",
        "proposed_m1,proposed_m2,ml_no_pilots",
        "--point",
        "35",
        "--trial",
        "3",
    ]));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["trial 3", "h_d =", "proposed_m1_estimated", "ml_no_pilots_perfect"] {
        assert!(text.contains(needle), "{needle}\n{text}");
    }
}
