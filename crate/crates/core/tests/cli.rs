use std::fs;
use std::process::{Command, Output};

fn thz_sm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thz-sm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spacing_rows_and_exit_codes() {
    let o = thz_sm(&["spacing", "--range-m", "1", "--freq-hz", "1e12", "--m", "4", "--zmax", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    let z1: f64 = rows[0][1].parse().unwrap();
    assert!((z1 - 8.657e-3).abs() < 5e-7);

    let o = thz_sm(&["spacing", "--range-m", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("range"));

    assert_eq!(thz_sm(&["spacing", "--m", "four"]).status.code(), Some(2));
    assert_eq!(thz_sm(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(thz_sm(&["--help"]).status.code(), Some(0));
}

#[test]
fn ber_sweep_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &str| {
        vec![
            "ber-sweep".to_string(),
            "--m".into(),
            "2".into(),
            "--order".into(),
            "16".into(),
            "--snr-db=-2,4".into(),
            "--trials".into(),
            "5000".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            out.into(),
        ]
    };
    for out in [&a, &b] {
        let args = args(out.to_str().unwrap());
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(thz_sm(&refs).status.code(), Some(0));
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("# thz-sm "));
    assert!(text.contains("# sweep.seed = 11"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("snr_db,trials,bit_errors,ber,ser,aer,ci95"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[system]\nfreq_hz = 4e12\nsa_per_axis = 4\n\n[spacing]\nzmax = 2\n",
    )
    .unwrap();
    let from_file = stdout(&thz_sm(&["spacing", "--config", cfg.to_str().unwrap()]));
    assert!(from_file.contains("# system.freq_hz = 4.0000000000000000e12"));
    assert_eq!(data_rows(&from_file).len(), 2);

    let flagged = stdout(&thz_sm(&["spacing", "--config", cfg.to_str().unwrap(), "--freq-hz", "1e12"]));
    assert!(flagged.contains("# system.freq_hz = 1.0000000000000000e12"));
    // Δ_opt(z=4, 4 THz) = Δ_opt(z=1, 1 THz)
    let z4 = stdout(&thz_sm(&["spacing", "--config", cfg.to_str().unwrap(), "--zmax", "4"]));
    assert_eq!(data_rows(&z4)[3][1], data_rows(&flagged)[0][1]);

    fs::write(&cfg, "[system]\nfrequency = 1e12\n").unwrap();
    let o = thz_sm(&["spacing", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn absorption_table_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    fs::write(&csv, "freq_hz,kappa_per_m\n0.5e12,0.1\n1.5e12,0.3\n").unwrap();
    let o = thz_sm(&["link-budget", "--absorption-csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("# system.absorption_per_m = 2.0000000000000001e-1"), "{text}");
    let pl: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("path_loss_db = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((pl - (92.4478 + 0.2 * 10.0 * std::f64::consts::E.log10())).abs() < 1e-3);

    fs::write(&csv, "freq_hz,kappa_per_m\n2e12,0.1\n1e12,0.3\n").unwrap();
    let o = thz_sm(&["link-budget", "--absorption-csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn link_budget_and_infeasible_range() {
    let o = thz_sm(&["link-budget", "--gain-tx-dbi", "5", "--gain-rx-dbi", "5", "--range-m", "10"]);
    let text = stdout(&o);
    assert!(text.contains("pl_threshold_db = 9.0000000000000000e1"), "{text}");
    // 112.45 dB of path loss against 90 dB needs 22.45 dB of array gain
    assert!(text.contains("required_q = 16"));
    // no antenna gains: 92.45 − 80 = 12.45 dB, first covered by Q = 8
    let text = stdout(&thz_sm(&["link-budget", "--range-m", "1"]));
    assert!(text.contains("required_q = 8"), "{text}");
    let o = thz_sm(&["link-budget", "--range-m", "1e7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn roundtrip_reports() {
    let o = thz_sm(&["roundtrip", "--m", "2", "--q", "2", "--order", "16", "--level", "ae"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("words = 256") && text.contains("passed = 256"));
    assert_eq!(thz_sm(&["roundtrip", "--m", "1", "--q", "1", "--order", "4"]).status.code(), Some(0));
    assert_eq!(thz_sm(&["roundtrip", "--m", "2", "--bits", "7"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let o = thz_sm(&["ser-analytical", "--m", "2", "--order", "4", "--snr-db", "0", "--abs-tol", "1e-300", "--rel-tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn condition_sweep_single_cell_and_optimal_locus() {
    let o = thz_sm(&["condition-sweep", "--pitch-min-m", "8.6572579088300249e-3", "--pitch-points", "1", "--range-min-m", "1", "--range-points", "1"]);
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let cond: f64 = rows[0][2].parse().unwrap();
    assert!(cond < 10.0);
    let o = thz_sm(&["condition-sweep", "--freq-hz", "3e12", "--pitch-points", "3", "--range-points", "4"]);
    assert_eq!(data_rows(&stdout(&o)).len(), 12);
}
