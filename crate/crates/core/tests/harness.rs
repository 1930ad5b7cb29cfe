use sisr::harness::{
    oracle, presets, run_config, write_outputs, EventConfig, ExperimentConfig, ModelConfig, ScheduleConfig,
    StatisticConfig, CSV_HEADER,
};
use sisr::Error;

fn small(config: ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { k: 20, r: 6, m_total: None, ..config }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let configs =
        [small(presets::table1(8, 3)), small(presets::table2(8, 0.273, 3)), small(oracle::binomial_config(3))];
    for config in &configs {
        let one = run_config(config, 1).unwrap().without_timing();
        let many = run_config(config, 4).unwrap().without_timing();
        assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
        let mean = one.subgroups.iter().sum::<f64>() / one.subgroups.len() as f64;
        assert_eq!(one.estimate.to_bits(), mean.to_bits());
    }
}

#[test]
fn seeds_change_results() {
    let a = run_config(&small(oracle::binomial_config(1)), 1).unwrap();
    let b = run_config(&small(oracle::binomial_config(2)), 1).unwrap();
    assert_ne!(a.subgroups, b.subgroups);
}

#[test]
fn output_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_config(&small(oracle::binomial_config(5)), 1).unwrap();
    write_outputs(dir.path(), std::slice::from_ref(&report)).unwrap();

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json[0]["seed"], 5);
    assert_eq!(json[0]["config"]["version"], 1);
    assert_eq!(json[0]["subgroups"].as_array().unwrap().len(), 6);

    let mut reader = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "fixed_tilt");
    assert_eq!(&rows[1][0], "direct");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), report.estimate);
}

#[test]
fn config_file_round_trip_and_errors() {
    let config = presets::table1(15, 7);
    let back = ExperimentConfig::from_json(&config.to_json()).unwrap();
    assert_eq!(back, config);

    let broken = config.to_json().replace("\"seed\": 7,", "");
    match ExperimentConfig::from_json(&broken) {
        Err(Error::Config(msg)) => assert!(msg.contains("seed"), "{msg}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn omitted_parameters_are_solved_for() {
    let config = ExperimentConfig {
        model: ModelConfig::MixtureSquares,
        event: EventConfig::FixedHorizon {
            statistic: StatisticConfig::SelfNormalized,
            b: std::f64::consts::FRAC_1_SQRT_2,
            n: 10,
        },
        schedule: ScheduleConfig::AdaptiveTilt { rate: None },
        ..oracle::binomial_config(1)
    };
    let experiment = config.resolve().unwrap();
    let rate = experiment.resolved.rate.unwrap();
    assert!((rate - 0.330).abs() < 1e-3, "{rate}");

    let ar = ExperimentConfig {
        schedule: ScheduleConfig::DriftWeighted { theta: None, drift_theta: None },
        ..presets::table2(10, 0.273, 1)
    };
    let theta = ar.resolve().unwrap().resolved.theta.unwrap()[0];
    assert!((theta - 0.2751).abs() < 1e-3, "{theta}");
}

#[test]
fn schedule_and_event_mismatch_is_a_config_error() {
    let config =
        ExperimentConfig { schedule: ScheduleConfig::StoppedFixed { theta: None }, ..oracle::binomial_config(1) };
    assert!(matches!(config.resolve(), Err(Error::Config(_))));
    let config = ExperimentConfig {
        schedule: ScheduleConfig::DriftWeighted { theta: Some(0.2), drift_theta: None },
        ..oracle::binomial_config(1)
    };
    assert!(matches!(config.resolve(), Err(Error::Config(_))));
}

#[test]
fn subgroup_errors_carry_the_index() {
    // a tilt far into the tail makes every weight underflow
    let config = ExperimentConfig {
        model: ModelConfig::Gaussian { mean: 0.0, sd: 1.0 },
        schedule: ScheduleConfig::FixedTilt { theta: Some(sisr::harness::Tilt::Scalar(-800.0)) },
        ..small(oracle::binomial_config(1))
    };
    match run_config(&config, 1) {
        Err(Error::Subgroup { index, source }) => {
            assert_eq!(index, 0);
            assert!(matches!(*source, Error::DegenerateWeights { .. }));
            assert!(Error::Subgroup { index, source }.is_numerical());
        }
        other => panic!("expected subgroup error, got {other:?}"),
    }
}
