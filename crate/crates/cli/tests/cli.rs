//! End-to-end runs of the `mollifem` binary.

use std::io::Write;
use std::process::{Command, Output};

use mollifem::StudyConfig;
use mollifem_cli::output::{JsonStudy, CURVES_HEADER, STUDY_HEADER};

fn mollifem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mollifem"))
        .args(args)
        .env_remove("MOLLIFEM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

const SMALL: [&str; 6] = [
    "--lambda-grid",
    "0,1,2",
    "--n-values",
    "11,21,41",
    "--draws",
    "50",
];

#[test]
fn study_csv_has_header_and_one_row_per_lambda() {
    let o = mollifem(&[&["study", "--kernel", "K"], &SMALL[..]].concat());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], STUDY_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 8));
}

#[test]
fn study_without_kernel_leaves_regularised_columns_empty() {
    let o = mollifem(&[&["study"], &SMALL[..]].concat());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert!(row[2].is_empty() && row[4].is_empty() && row[5].is_empty() && row[7].is_empty());
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [&["study", "--kernel", "H", "--family", "P2"], &SMALL[..]].concat();
    assert_eq!(mollifem(&args).stdout, mollifem(&args).stdout);
}

#[test]
fn seed_environment_variable_changes_default_seed() {
    let args = [&["study", "--format", "json"], &SMALL[..]].concat();
    let o = Command::new(env!("CARGO_BIN_EXE_mollifem"))
        .args(&args)
        .env("MOLLIFEM_SEED", "7")
        .output()
        .unwrap();
    let parsed: JsonStudy = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(parsed.config.seed, 7);
    let flagged = [&args[..], &["--seed", "9"]].concat();
    let o = Command::new(env!("CARGO_BIN_EXE_mollifem"))
        .args(&flagged)
        .env("MOLLIFEM_SEED", "7")
        .output()
        .unwrap();
    let parsed: JsonStudy = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(parsed.config.seed, 9);
}

#[test]
fn json_config_echo_round_trips() {
    let cfg = config_file(
        "[mesh_fe]\nfamily = \"P2\"\n[kernel]\nname = \"K\"\n[experiment]\nsobolev_radius = 1.5\n",
    );
    let path = cfg.path().to_str().unwrap();
    let o = mollifem(&[&["study", "--config", path, "--format", "json"], &SMALL[..]].concat());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let parsed: JsonStudy = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.config.sobolev_radius, Some(1.5));
    assert_eq!(parsed.config.n_values, vec![11, 21, 41]);
    let echo = serde_json::to_string_pretty(&parsed.config).unwrap();
    let reparsed: StudyConfig = serde_json::from_str(&echo).unwrap();
    assert_eq!(serde_json::to_string_pretty(&reparsed).unwrap(), echo);
    // the echo appears verbatim (modulo indentation) in the original output
    let indented = echo.replace('\n', "\n  ");
    assert!(text.contains(&indented));
    assert_eq!(parsed.rows.len(), 3);
    assert_eq!(parsed.rows[0].errors_reg.len(), 3);
    assert!(parsed.rows[0].errors_reg.iter().all(|p| p.beta.is_some()));
}

#[test]
fn p2_even_node_counts_warn_and_normalise() {
    let o = mollifem(&[
        "study",
        "--family",
        "P2",
        "--n-values",
        "10,20",
        "--lambda-grid",
        "1",
        "--draws",
        "5",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.matches("warning:").count(), 2, "{err}");
    let parsed: JsonStudy = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(parsed.config.n_values, vec![11, 21]);
    assert_eq!(parsed.notes.len(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(
        mollifem(&["study", "--config", "/definitely/not/here.toml"])
            .status
            .code(),
        Some(2)
    );
    let bad = config_file("[experiment]\ndraws = 3\nseed = -1\n");
    let o = mollifem(&["study", "--config", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let unknown = config_file("[kernel]\nname = \"G\"\n");
    assert_eq!(
        mollifem(&["study", "--config", unknown.path().to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        mollifem(&["study", "--lambda-grid", ""]).status.code(),
        Some(3)
    );
    assert_eq!(mollifem(&["study", "--draws", "0"]).status.code(), Some(3));
    assert_eq!(
        mollifem(&["study", "--family", "P3"]).status.code(),
        Some(3)
    );
    assert_eq!(mollifem(&["study", "--bogus", "1"]).status.code(), Some(2));
    let o = mollifem(
        &[
            &["study", "--output", "/definitely/not/here/out.csv"],
            &SMALL[..],
        ]
        .concat(),
    );
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn curves_match_closed_forms() {
    let o = mollifem(&["curves", "--s-a", "2", "--s-r", "1", "--lambda-grid", "1,3"]);
    assert_eq!(
        stdout(&o),
        format!("{CURVES_HEADER}\n1,1,1,false\n3,2,2,true\n")
    );
    let o = mollifem(&[
        "curves",
        "--family",
        "P2",
        "--kernel",
        "H",
        "--lambda-grid",
        "0",
    ]);
    assert_eq!(stdout(&o), format!("{CURVES_HEADER}\n0,0,0.4,false\n"));
    assert_eq!(
        mollifem(&["curves", "--lambda-grid", "0"]).status.code(),
        Some(3)
    );
}

#[test]
fn convolve_dump_covers_every_piece() {
    let o = mollifem(&[
        "convolve", "--kernel", "H", "--family", "P1", "--n", "11", "--index", "5", "--beta",
        "0.03",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (x, v) = l.split_once(',').unwrap();
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    // hat convolved with a box: breakpoints at x_i - h - β, x_i - h + β,
    // x_i - β, x_i + β, x_i + h - β, x_i + h + β, so 5 pieces
    assert_eq!(rows.len(), 5 * 11 + 1);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    assert!((rows[0].0 - 0.37).abs() < 1e-12 && rows[0].1.abs() < 1e-12);
    assert!(rows[55].1.abs() < 1e-12);
    let at_left_shoulder = rows
        .iter()
        .find(|(x, _)| (*x - 0.47).abs() < 1e-12)
        .unwrap()
        .1;
    assert!(
        (at_left_shoulder - (1.0 - 0.03 / 0.1)).abs() < 1e-9,
        "{at_left_shoulder}"
    );
    let json = mollifem(&[
        "convolve", "--index", "0", "--beta", "0", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["kernel"], "K");
    assert_eq!(v["breakpoints"].as_array().unwrap().len(), 2);
    assert_eq!(
        mollifem(&["convolve", "--index", "11", "--beta", "0.1"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn verify_passes() {
    let o = mollifem(&["verify"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().count() >= 30);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
