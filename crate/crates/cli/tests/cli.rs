use std::path::PathBuf;
use std::process::{Command, Output};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/oracle_fixtures.txt");

fn covprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covprior"))
        .args(args)
        .env_remove("COVPRIOR_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("covprior-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn pristine_fixture_passes() {
    let o = covprior(&["verify", FIXTURE, "--deterministic"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("# failures: 0"));
    assert!(!text.contains(",fail,"));
}

#[test]
fn perturbed_fixture_reports_one_failure() {
    let text = std::fs::read_to_string(FIXTURE).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let idx = lines.iter().position(|l| l.starts_with("multinormal.ball")).unwrap();
    let mut fields: Vec<String> = lines[idx].split('|').map(|s| s.trim().to_string()).collect();
    let v: f64 = fields[2].parse().unwrap();
    fields[2] = format!("{:.16e}", v * 1.1);
    lines[idx] = fields.join(" | ");
    let path = scratch("perturbed.txt");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = covprior(&["verify", path.to_str().unwrap(), "--deterministic"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(",fail,")).count(), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("\"error\":\"verification\""), "{err}");
}

#[test]
fn empty_fixture_passes_with_warning() {
    let path = scratch("empty.txt");
    std::fs::write(&path, "@version 1\n").unwrap();
    let o = covprior(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn malformed_fixture_is_a_usage_error_with_line() {
    let path = scratch("bad.txt");
    std::fs::write(&path, "@version 1\n# c\nx | | nope | 1 | 0\n").unwrap();
    let o = covprior(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn usage_errors_exit_two_with_json_record() {
    for args in [
        vec!["no-such-command"],
        vec!["neyman-scott", "--s2", "1"],
        vec!["marginalization", "--m", "2", "--s2", "1"],
    ] {
        let o = covprior(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
        assert_eq!(err["exit_code"], 2);
    }
    let o = covprior(&["neyman-scott", "--m", "5", "--s2", "1", "--zeta0-grid", "1:0:3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn deterministic_output_is_byte_identical() {
    let args = [
        "multinomial",
        "--counts",
        "2,1,5",
        "--m-max",
        "40",
        "--mc-draws",
        "20000",
        "--seed",
        "3",
        "--deterministic",
    ];
    let a = covprior(&args);
    let b = covprior(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("timestamp"));
    assert!(stdout(&covprior(&args[..args.len() - 1])).contains("timestamp_unix"));
}

#[test]
fn csv_has_metadata_header_and_full_precision() {
    let o = covprior(&["gauss-stdmean", "--n-min", "2", "--n-max", "5", "--deterministic"]);
    let text = stdout(&o);
    for key in ["# version:", "# seed:", "# rel_tol:", "# table: evidence"] {
        assert!(text.contains(key), "{key}");
    }
    let body: String = text
        .lines()
        .skip_while(|l| *l != "# table: evidence")
        .skip(1)
        .collect::<Vec<_>>()
        .join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "z_mu", "z_lambda", "ratio"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let z: f64 = rows[1][1].parse().unwrap();
    let mantissa = rows[1][1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert!((z - 0.0306293830789884).abs() < 1e-15);
}

#[test]
fn json_mirrors_columns_as_arrays() {
    let o = covprior(&[
        "stein",
        "--x",
        "1.4,-0.3,0.9,2.2,0.1",
        "--format",
        "json",
        "--deterministic",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["metadata"]["subcommand"], "stein");
    let t = v["tables"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == "measurands")
        .unwrap();
    assert_eq!(t["data"]["averaged_mu"].as_array().unwrap().len(), 5);
}

#[test]
fn output_directory_from_environment() {
    let dir = scratch("outdir");
    std::fs::create_dir_all(&dir).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_covprior"))
        .args(["marginalization", "--m", "10", "--s2", "1", "--format", "json"])
        .env("COVPRIOR_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(dir.join("marginalization.json")).unwrap();
    assert!(written.contains("\"variance\""));
}

#[test]
fn neyman_scott_peak_near_twice_pooled_variance() {
    let o = covprior(&[
        "neyman-scott",
        "--m",
        "25",
        "--s2",
        "1",
        "--zeta0-grid",
        "0.01:8:400",
        "--deterministic",
    ]);
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("zeta0_argmax,")).unwrap();
    let peak: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((1.6..=2.4).contains(&peak), "{peak}");
    let log = covprior(&[
        "neyman-scott",
        "--m",
        "25",
        "--s2",
        "1",
        "--zeta0-grid",
        "log:0.01:8:101",
        "--deterministic",
    ]);
    assert_eq!(log.status.code(), Some(0));
}

#[test]
fn fisher_reports_matrix() {
    let o = covprior(&["fisher", "--model", "gaussian", "--alpha", "0.3,2", "--deterministic"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let v: f64 = text
        .lines()
        .find(|l| l.starts_with("1,1,"))
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((v - 0.5).abs() < 1e-6);
    let o = covprior(&["fisher", "--model", "bernoulli", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}
