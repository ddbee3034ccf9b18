//! The example configurations shipped with the repository stay loadable.

use std::path::Path;

use envdamp::harness::config::ExperimentConfig;

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.method_list().unwrap();
            cfg.scenario_config(0).unwrap().validate().unwrap();
            cfg.interference_config(0).validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn defaults_round_trip_through_toml() {
    let cfg = ExperimentConfig::default();
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
}
