//! Config parsing and validation: every offending key is reported.

use optsel_cli::config::{default_axes, parse_config, ConfigError};
use optsel_core::datagen::ScenarioKind;
use optsel_core::experiment::{expand_grid, GridAxes, GridSpec};

fn base_config() -> String {
    "scenario = \"linear\"\nsample_sizes = [50, 200]\nreplications = 3\nmaster_seed = 7\n"
        .to_string()
}

#[test]
fn minimal_config_parses_with_defaults() {
    let cfg = parse_config(&base_config()).unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::Linear);
    assert_eq!(cfg.sample_sizes, vec![50, 200]);
    assert_eq!(cfg.replications, 3);
    assert_eq!(cfg.master_seed, 7);
    assert_eq!(cfg.epochs, 50);
    assert!(cfg.sigma_setting.is_none());
    // Pruned default grid has 8 points.
    let spec = GridSpec {
        scenario: cfg.scenario,
        axes: cfg.axes,
        epochs: cfg.epochs,
    };
    assert_eq!(expand_grid(&spec).unwrap().len(), 8);
}

#[test]
fn non_increasing_sample_sizes_name_the_key() {
    let text = base_config().replace("[50, 200]", "[200, 50]");
    match parse_config(&text).unwrap_err() {
        ConfigError::Invalid(errs) => {
            assert!(errs.iter().any(|e| e.contains("sample_sizes")), "{errs:?}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn every_offending_key_is_listed() {
    let text = "scenario = \"nope\"\nsample_sizes = []\nreplications = 0\nmaster_seed = 1\nepochs = 0\nparallelism = 0\n";
    match parse_config(text).unwrap_err() {
        ConfigError::Invalid(errs) => {
            for key in ["scenario", "sample_sizes", "replications", "epochs", "parallelism"] {
                assert!(
                    errs.iter().any(|e| e.contains(key)),
                    "missing complaint for {key}: {errs:?}"
                );
            }
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected_at_parse_time() {
    let text = format!("{}typo_key = 1\n", base_config());
    assert!(matches!(
        parse_config(&text).unwrap_err(),
        ConfigError::Parse(_)
    ));
}

#[test]
fn sigma_setting_bounds_depend_on_scenario() {
    // R-squared target outside (0,1) for a regression scenario.
    let text = format!("{}sigma_setting = 1.5\n", base_config());
    assert!(matches!(
        parse_config(&text).unwrap_err(),
        ConfigError::Invalid(_)
    ));
    // For a time-series scenario the same value is a legal noise variance.
    let ts = text.replace("\"linear\"", "\"ts_linear\"");
    assert_eq!(parse_config(&ts).unwrap().sigma_setting, Some(1.5));
    // Classification takes no sigma at all.
    let cls = text.replace("\"linear\"", "\"classification\"");
    assert!(parse_config(&cls).is_err());
}

#[test]
fn explicit_grid_overrides_defaults_per_axis() {
    let text = format!(
        "{}\n[grid]\nlearning_rate = [0.05]\nbatch_size = [8, 16]\n",
        base_config()
    );
    let cfg = parse_config(&text).unwrap();
    match cfg.axes {
        GridAxes::Mlp {
            learning_rate,
            hidden_size,
            batch_size,
            ..
        } => {
            assert_eq!(learning_rate, vec![0.05]);
            assert_eq!(batch_size, vec![8, 16]);
            // Unspecified axes keep the pruned defaults.
            assert_eq!(hidden_size, vec![5, 20]);
        }
        other => panic!("wrong family: {other:?}"),
    }
}

#[test]
fn grid_axis_for_wrong_family_is_an_error() {
    let text = format!("{}\n[grid]\nwindow = [3]\n", base_config());
    match parse_config(&text).unwrap_err() {
        ConfigError::Invalid(errs) => {
            assert!(errs.iter().any(|e| e.contains("grid.window")), "{errs:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn full_grid_conflicts_with_explicit_grid() {
    let text = format!(
        "{}full_grid = true\n\n[grid]\ndepth = [1]\n",
        base_config()
    );
    match parse_config(&text).unwrap_err() {
        ConfigError::Invalid(errs) => {
            assert!(errs.iter().any(|e| e.contains("full_grid")), "{errs:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn full_grid_selects_the_published_tables() {
    let text = format!("{}full_grid = true\n", base_config());
    let cfg = parse_config(&text).unwrap();
    let spec = GridSpec {
        scenario: cfg.scenario,
        axes: cfg.axes,
        epochs: cfg.epochs,
    };
    assert_eq!(expand_grid(&spec).unwrap().len(), 54);
}

#[test]
fn image_scenario_requires_existing_paths() {
    let text = base_config().replace("\"linear\"", "\"image\"");
    match parse_config(&text).unwrap_err() {
        ConfigError::Invalid(errs) => {
            assert!(errs.iter().any(|e| e.contains("mnist_images_path")));
            assert!(errs.iter().any(|e| e.contains("mnist_labels_path")));
        }
        other => panic!("{other:?}"),
    }
    let missing = format!(
        "{}mnist_images_path = \"/no/such/file\"\nmnist_labels_path = \"/no/such/file2\"\n",
        text
    );
    match parse_config(&missing).unwrap_err() {
        ConfigError::Invalid(errs) => {
            assert!(errs.iter().any(|e| e.contains("does not exist")));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn default_grids_expand_for_every_scenario() {
    for scenario in [
        ScenarioKind::Linear,
        ScenarioKind::Nonlinear,
        ScenarioKind::Classification,
        ScenarioKind::TimeSeriesLinear,
        ScenarioKind::TimeSeriesNonlinear,
        ScenarioKind::Image,
    ] {
        for full in [false, true] {
            let spec = GridSpec {
                scenario,
                axes: default_axes(scenario, full),
                epochs: 1,
            };
            let points = expand_grid(&spec).unwrap();
            assert!(!points.is_empty());
            if !full {
                assert!(points.len() <= 8, "{scenario:?} pruned grid too large");
            }
        }
    }
}
