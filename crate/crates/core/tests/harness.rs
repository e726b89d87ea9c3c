use std::fs;
use std::path::Path;

use mavsim::config::load_config;
use mavsim::sweep::{check_dir, run_sweep, SweepOptions};
use mavsim::{parse_config, ConfigError, HarnessError, Scenario};

const SMALL: &str = r#"{
  "road_length": 1000,
  "t_total": 400,
  "t_dock_start": 100,
  "t_measure_start": 300,
  "densities": [30, 90],
  "p_mavs": [0, 0.5],
  "scenarios": ["independent-only", "collective"],
  "seeds_per_point": 2,
  "seed": 11
}"#;

fn quiet() -> SweepOptions {
    SweepOptions {
        force: false,
        workers: Some(1),
        progress: false,
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("series")] {
        let mut names: Vec<_> = fs::read_dir(&sub).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names.into_iter().filter(|p| p.is_file()) {
            out.push((
                p.strip_prefix(dir).unwrap().display().to_string(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn default_grid_size() {
    let config = parse_config("").unwrap();
    assert_eq!(config.densities.len(), 28);
    assert_eq!(config.run_count(), 672);
    assert_eq!(config.scenarios, vec![Scenario::IndependentOnly, Scenario::Collective]);
}

#[test]
fn sweep_check_and_replay_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = parse_config(SMALL).unwrap();
    assert_eq!(config.run_count(), 16);

    let first = tmp.path().join("a");
    let report = run_sweep(&config, &first, &quiet()).unwrap();
    assert_eq!(report.results.len(), 16);
    let check = check_dir(&first).unwrap();
    assert!(check.ok(), "{:?}", check.problems);
    for svg in ["flow_density.svg", "speed_density.svg", "trains.svg", "flow_series.svg"] {
        assert!(fs::read_to_string(first.join(svg)).unwrap().starts_with("<svg"));
    }

    // The manifest is itself a config that reproduces the sweep.
    let replay = load_config(&first.join("manifest.json")).unwrap();
    let second = tmp.path().join("b");
    run_sweep(&replay, &second, &quiet()).unwrap();
    assert_eq!(files(&first), files(&second));

    let again = run_sweep(&config, &first, &quiet());
    assert!(matches!(again, Err(HarnessError::OutputExists(_))));
    let forced = SweepOptions { force: true, ..quiet() };
    run_sweep(&config, &first, &forced).unwrap();
    assert_eq!(files(&first), files(&second));
}

#[test]
fn check_reports_tampered_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let config = parse_config(SMALL).unwrap();
    let dir = tmp.path().join("run");
    run_sweep(&config, &dir, &quiet()).unwrap();

    let path = dir.join("fundamental.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[4] = "99999".into();
    lines[1] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(!check_dir(&dir).unwrap().ok());

    fs::write(&path, "scenario,density\n").unwrap();
    assert!(matches!(check_dir(&dir), Err(HarnessError::Schema { .. })));
}

#[test]
fn config_errors_name_field_and_line() {
    let err = parse_config("{\n  \"density\": 60,\n  \"v_max\": 33.3\n}").unwrap_err();
    match &err {
        ConfigError::Located { line, source } => {
            assert_eq!(*line, 3);
            assert!(matches!(**source, ConfigError::NonExact { field: "v_max", .. }));
        }
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("v_max"));
    assert!(parse_config(r#"{"speed_limit": 3}"#).is_err());
    assert!(matches!(
        parse_config("{\n\"seed\": }"),
        Err(ConfigError::Parse { line: 2, .. })
    ));
    assert!(parse_config(r#"{"p_mavs": [1.5]}"#).is_err());
    assert!(parse_config(r#"{"seeds_per_point": 0}"#).is_err());
}
