use ifedcrowd::harness::{
    emit, read_csv, read_json, run_sweep, OutputFormat, SweepAxis, SweepSpec,
};
use ifedcrowd::{MechanismKind, ScenarioConfig};

fn all_mechanisms(axis: SweepAxis, seed: u64) -> SweepSpec {
    SweepSpec::new(
        axis,
        ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        },
    )
    .with_mechanisms(MechanismKind::ALL.to_vec())
}

#[test]
fn equilibrium_dominates_in_every_cell() {
    for axis in [SweepAxis::Gamma, SweepAxis::Delta, SweepAxis::Workers] {
        let table = run_sweep(&all_mechanisms(axis, 17)).unwrap().table;
        for chunk in table.rows.chunks(3) {
            let by = |m| {
                chunk
                    .iter()
                    .find(|r| r.mechanism == m)
                    .unwrap()
                    .server_utility_mean
            };
            let eq = by(MechanismKind::IFedCrowd);
            assert!(
                eq >= by(MechanismKind::Max),
                "{axis} {}",
                chunk[0].axis_value
            );
            assert!(
                eq >= by(MechanismKind::Random),
                "{axis} {}",
                chunk[0].axis_value
            );
        }
    }
}

#[test]
fn emitted_files_are_reproducible_and_read_back() {
    let dir = tempfile::tempdir().unwrap();
    for axis in [SweepAxis::Gamma, SweepAxis::Delta, SweepAxis::Workers] {
        for (format, ext) in [(OutputFormat::Csv, "csv"), (OutputFormat::Json, "json")] {
            let a = dir.path().join(format!("{axis}-a.{ext}"));
            let b = dir.path().join(format!("{axis}-b.{ext}"));
            let table = run_sweep(&all_mechanisms(axis, 3)).unwrap().table;
            emit(&table, format, &a).unwrap();
            emit(
                &run_sweep(&all_mechanisms(axis, 3)).unwrap().table,
                format,
                &b,
            )
            .unwrap();
            assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

            let file = std::fs::File::open(&a).unwrap();
            let back = match format {
                OutputFormat::Csv => read_csv(file).unwrap(),
                OutputFormat::Json => read_json(file).unwrap(),
            };
            assert_eq!(back, table.rounded());
        }
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    let cfg = ScenarioConfig {
        n: 12,
        seed: 77,
        mechanism: MechanismKind::Random,
        ..ScenarioConfig::default()
    };
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(ScenarioConfig::load(&path).unwrap(), cfg);
    assert!(ScenarioConfig::load(dir.path().join("missing.toml")).is_err());
}
