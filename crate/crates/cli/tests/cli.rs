use std::path::Path;
use std::process::{Command, Output};

fn auxgrip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auxgrip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn torque_curve_has_requested_rows_and_increasing_torque() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &["mech", "torque-curve", "--points", "21", "--out", "tc.csv"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("tc.csv"));
    assert_eq!(header[0], "P_newton");
    assert_eq!(rows.len(), 21);
    for w in rows.windows(2) {
        assert!(
            w[1][2] > w[0][2],
            "torque not increasing: {:?} then {:?}",
            w[0],
            w[1]
        );
    }
    for r in &rows {
        let expected = r[2] * 6.0 / 0.8;
        assert!((r[3] - expected).abs() <= 1e-6 * (1.0 + expected.abs()));
    }
    assert!(dir.path().join("tc.csv.manifest.json").exists());
}

#[test]
fn empty_force_grid_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &["mech", "torque-curve", "--points", "0", "--out", "tc.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn sweep_residuals_are_tiny() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &["mech", "sweep", "--points", "50", "--out", "sw.csv"],
    );
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("sw.csv"));
    assert_eq!(rows.len(), 50);
    for r in rows {
        assert!(r[6].abs() < 1e-9 && r[7].abs() < 1e-9);
    }
}

#[test]
fn auto_reference_grasp_on_heavy_tomato_plateaus_near_half_newton() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &[
            "grasp", "--tomato", "F1", "--ref", "auto", "--seed", "7", "--out", "g.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("g.csv"));
    assert_eq!(
        header,
        ["time_s", "f_ref_N", "f_meas_N", "f_true_N", "servo_deg"]
    );
    let tail = &rows[rows.len() * 7 / 10..];
    let plateau = tail.iter().map(|r| r[2]).sum::<f64>() / tail.len() as f64;
    assert!((0.45..=0.52).contains(&plateau), "plateau {plateau}");
}

#[test]
fn custom_tomato_requires_mass_and_diameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &[
            "grasp", "--tomato", "custom", "--seed", "1", "--out", "g.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = auxgrip(
        dir.path(),
        &[
            "grasp",
            "--tomato",
            "custom",
            "--mass",
            "60",
            "--diameter",
            "50",
            "--seed",
            "1",
            "--out",
            "g.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn harvest_summary_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = auxgrip(
            dir.path(),
            &[
                "harvest", "run", "--trials", "200", "--seed", "42", "--out", name,
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["summary"]["n_trials"], 200);
}

#[test]
fn unreachable_target_exits_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &[
            "plan", "--target", "5000,0,0", "--seed", "1", "--out", "p.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("p.csv").exists());
}

#[test]
fn plan_writes_a_trajectory_from_home() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &[
            "plan",
            "--target",
            "350,100,300",
            "--seed",
            "5",
            "--out",
            "p.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&dir.path().join("p.csv"));
    assert_eq!(
        header,
        ["t_s", "q1_rad", "q2_rad", "q3_rad", "q4_rad", "q5_rad"]
    );
    assert!(rows[0][1..].iter().all(|q| *q == 0.0));
}

#[test]
fn config_missing_section_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(dir.path(), &["config", "init", "--out", "full.toml"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("full.toml")).unwrap();
    let start = text.find("[perception]").unwrap();
    let end = text[start..].find("\n[harvest").map(|i| start + i).unwrap();
    let trimmed: String = text[..start]
        .lines()
        .chain(text[end..].lines())
        .filter(|l| !l.starts_with("[perception.") && !l.starts_with("[[perception."))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.path().join("cut.toml"), trimmed).unwrap();
    let out = auxgrip(dir.path(), &["--config", "cut.toml", "config", "check"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("perception"), "{stderr}");

    let out = auxgrip(dir.path(), &["--config", "full.toml", "config", "check"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn invalid_config_writes_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    auxgrip(dir.path(), &["config", "init", "--out", "c.toml"]);
    let text = std::fs::read_to_string(dir.path().join("c.toml")).unwrap();
    let broken = text.replacen("sensor_count = 3", "sensor_count = 0", 1);
    assert_ne!(broken, text);
    std::fs::write(dir.path().join("c.toml"), broken).unwrap();
    let out = auxgrip(
        dir.path(),
        &[
            "--config", "c.toml", "harvest", "run", "--trials", "5", "--seed", "1", "--out",
            "h.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("plant"), "{stderr}");
    assert!(!dir.path().join("h.json").exists());
    assert!(!dir.path().join("h.json.manifest.json").exists());
}

#[test]
fn unreadable_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(dir.path(), &["--config", "nope.toml", "config", "check"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn perception_zero_noise_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let out = auxgrip(
        dir.path(),
        &[
            "perception",
            "eval",
            "--scenes",
            "20",
            "--noise",
            "0,0,0,0",
            "--seed",
            "3",
            "--out",
            "m.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(m["precision"], 1.0);
    assert_eq!(m["recall"], 1.0);
    assert_eq!(m["mask_ap"], 1.0);
}

#[test]
fn stochastic_commands_are_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &[
            "grasp",
            "--tomato",
            "F4",
            "--seed",
            "9",
            "--release",
            "1",
            "--out",
        ],
        &[
            "tune", "--tomato", "F3", "--ref", "0.3", "--seed", "9", "--out",
        ],
        &[
            "plan",
            "--target",
            "300,-150,250,1,0,0",
            "--seed",
            "9",
            "--out",
        ],
        &[
            "perception",
            "eval",
            "--scenes",
            "30",
            "--noise",
            "1.5,0.1,0.3,0.05",
            "--seed",
            "9",
            "--out",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let name = format!("out{i}_{rep}");
            let mut full: Vec<&str> = args.to_vec();
            full.push(&name);
            let out = auxgrip(dir.path(), &full);
            assert!(
                out.status.success(),
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            outputs.push(std::fs::read(dir.path().join(&name)).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }
}
