use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn psslab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_psslab"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("PSSLAB_THREADS", t),
        None => cmd.env_remove("PSSLAB_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_config(command: &[&str], config: &Path) -> (i32, Value, String) {
    let mut args = command.to_vec();
    let path = config.to_str().unwrap();
    args.extend(["--config", path]);
    let out = psslab(&args, None);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json, stderr)
}

fn bundled(command: &[&str], name: &str) -> (i32, Value, String) {
    run_config(command, &configs().join(name))
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn primal(relations: &Value) -> Vec<&Value> {
    relations
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r.get("derived_from").is_none())
        .collect()
}

#[test]
fn gdoa_a_default_passes_three_relations() {
    let (code, json, _) = bundled(&["verify"], "gdoa_a_default.json");
    assert_eq!(code, 0);
    assert_eq!(json["schema"], "psslab/1");
    let rels = primal(&json["relations"]);
    assert_eq!(rels.len(), 3);
    assert!(rels.iter().all(|r| r["pass"] == true));
}

#[test]
fn alpha0_below_bound_is_a_config_error() {
    let (code, _, stderr) = bundled(&["verify"], "invalid_alpha0.json");
    assert_eq!(code, 2);
    assert!(stderr.contains("positivity"), "stderr: {stderr}");
}

#[test]
fn corrupted_fixture_fails_numerically() {
    let (code, json, _) = bundled(&["verify"], "corrupted_gdoa_b.json");
    assert_eq!(code, 1);
    assert_eq!(json["pass"], false);
}

#[test]
fn embeddable_pair_passes_ossqm() {
    let (code, json, _) = bundled(&["ossqm"], "10_ossqm_embeddable.json");
    assert_eq!(code, 0);
    assert_eq!(json["embedding"]["embeddable"], true);
    assert_eq!(json["constraint"]["pass"], true);
    assert_eq!(json["mapping"]["charge"]["pass"], true);
    assert_eq!(json["mapping"]["hamiltonian"]["pass"], true);
}

#[test]
fn opposite_oscillator_pair_is_not_embeddable() {
    let (code, json, _) = bundled(&["ossqm"], "10_ossqm_c2.json");
    assert_eq!(code, 1);
    assert_eq!(json["embedding"]["embeddable"], false);
    assert_eq!(json["embedding"]["reason"], "C ≠ 0");
    assert!(json.get("ossqm_relations").is_none());
}

#[test]
fn bosonized_closed_form_matches() {
    let (code, json, _) = bundled(&["spectrum", "--closed-form"], "09_bosonized_a1.json");
    assert_eq!(code, 0);
    let cmp = &json["spectrum"]["comparison"];
    assert_eq!(cmp["pass"], true);
    assert!(cmp["compared"].as_u64().unwrap() > 0);
}

#[test]
fn bundled_configs_have_stable_exit_codes() {
    let cases: &[(&[&str], &str, i32)] = &[
        (&["verify"], "01_fixed_matrices.json", 0),
        (&["verify"], "02_boson_charges.json", 1),
        (&["verify"], "02_boson_charges_consistent.json", 0),
        (&["spectrum"], "03_oscillator_h1.json", 0),
        (&["spectrum"], "03_oscillator_h4.json", 0),
        (&["verify"], "04_grid_convergence.json", 0),
        (&["verify"], "05_unequal_case.json", 0),
        (&["verify"], "06_diagonal_pair_oscillator.json", 0),
        (&["verify"], "06_diagonal_pair_gaussian.json", 0),
        (&["verify"], "07_gdoa_a.json", 0),
        (&["verify"], "07_gdoa_b.json", 0),
        (&["reduce"], "08_reduce_gdoa_a.json", 0),
        (&["reduce"], "08_reduce_gdoa_b.json", 0),
        (&["spectrum", "--closed-form"], "09_bosonized_b2.json", 0),
        (&["spectrum"], "11_relativistic_lambda0.json", 0),
    ];
    for (cmd, name, expected) in cases {
        let (code, json, stderr) = bundled(cmd, name);
        assert_eq!(code, *expected, "{name}: {stderr}");
        assert_eq!(json["schema"], "psslab/1", "{name}");
    }
}

#[test]
fn oscillator_levels_have_expected_degeneracy() {
    let (_, json, _) = bundled(&["spectrum"], "03_oscillator_h1.json");
    let levels = json["spectrum"]["levels"].as_array().unwrap();
    assert!(levels[0]["energy"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(levels[0]["multiplicity"], 1);
    assert_eq!(levels[1]["multiplicity"], 2);
    assert_eq!(levels[2]["multiplicity"], 3);
}

#[test]
fn grid_convergence_is_second_order() {
    let (_, json, _) = bundled(&["verify"], "04_grid_convergence.json");
    let rows = json["convergence"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let order = r["order"].as_f64().unwrap();
        assert!((1.7..=2.3).contains(&order), "{r}");
    }
}

#[test]
fn reduce_reports_three_components() {
    let (_, json, _) = bundled(&["reduce"], "08_reduce_gdoa_b.json");
    assert_eq!(json["components"].as_array().unwrap().len(), 3);
    assert!(json["offdiag_norm"].as_f64().unwrap() <= 1e-11);
}

#[test]
fn relativistic_lambda0_flags_complex_energy() {
    let (_, json, _) = bundled(&["spectrum"], "11_relativistic_lambda0.json");
    let levels = json["relativistic"].as_array().unwrap();
    assert!(levels
        .iter()
        .any(|l| l["complex"] == true && l["n"] == 0 && l["s"] == 1));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("08_reduce_gdoa_a.json");
    let mut texts = Vec::new();
    for (i, threads) in [Some("1"), Some("4"), None].iter().enumerate() {
        let out = dir.path().join(format!("r{i}.json"));
        let o = psslab(
            &[
                "reduce",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            *threads,
        );
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        texts.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[0], texts[2]);
}

#[test]
fn csv_table_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("levels.csv");
    let cfg = configs().join("09_bosonized_a1.json");
    let o = psslab(
        &[
            "spectrum",
            "--closed-form",
            "--config",
            cfg.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("energy,multiplicity,source,expected,deviation")
    );
    assert!(lines.count() > 10);
}

#[test]
fn unknown_and_misplaced_keys_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(&dir, "u.json", r#"{"realization":"gdoa_a","dimm":10}"#);
    assert_eq!(run_config(&["verify"], &unknown).0, 2);
    let misplaced = write_config(
        &dir,
        "m.json",
        r#"{"realization":"gdoa_b","f":{"type":"poly","coeffs":[1]}}"#,
    );
    let (code, _, stderr) = run_config(&["verify"], &misplaced);
    assert_eq!(code, 2);
    assert!(stderr.contains("does not apply"), "{stderr}");
    let bad_selector = write_config(&dir, "s.json", r#"{"realization":"bosonized_a:5"}"#);
    assert_eq!(run_config(&["verify"], &bad_selector).0, 2);
}

#[test]
fn wrong_command_for_realization_exits_two() {
    assert_eq!(bundled(&["reduce"], "03_oscillator_h1.json").0, 2);
    assert_eq!(bundled(&["ossqm"], "07_gdoa_a.json").0, 2);
    assert_eq!(bundled(&["verify"], "11_relativistic_lambda1.json").0, 2);
    assert_eq!(
        bundled(&["spectrum", "--closed-form"], "07_gdoa_a.json").0,
        2
    );
}

#[test]
fn missing_config_exits_two() {
    let out = psslab(&["verify", "--config", "/nonexistent/psslab.json"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dim_and_budget_overrides_apply() {
    let cfg = configs().join("07_gdoa_a.json");
    let path = cfg.to_str().unwrap();
    let o = psslab(&["verify", "--config", path, "--dim", "30"], None);
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["dim"], 30);
    assert_eq!(o.status.code(), Some(0));

    let grid = configs().join("06_diagonal_pair_gaussian.json");
    let o = psslab(
        &[
            "verify",
            "--config",
            grid.to_str().unwrap(),
            "--budget",
            "1e-30",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    let o = psslab(&["verify", "--config", path, "--budget", "-1"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_two() {
    let cfg = configs().join("07_gdoa_a.json");
    let o = psslab(&["verify", "--config", cfg.to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}
