use ecfm::experiments::{generate_data, run, write_run, ExperimentConfig, ExperimentKind, ExperimentReport};
use ecfm::io::CsvTable;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(kind);
    match kind {
        ExperimentKind::BurgersInv | ExperimentKind::BurgersEcfm => {
            c.discretization.basis_count = 10;
            c.discretization.time_steps = 10;
            c.optimizer.adam.epochs = 5;
        }
        ExperimentKind::KppInv | ExperimentKind::KppEcfm => {
            c.discretization.basis_count = 5;
            c.discretization.source_count = 2;
            c.discretization.measurement_count = 7;
            c.physics.rbf_width = 100.0;
        }
        ExperimentKind::BeamEcfm => {}
    }
    c
}

const ALL: [ExperimentKind; 5] = [
    ExperimentKind::BurgersInv,
    ExperimentKind::BurgersEcfm,
    ExperimentKind::KppInv,
    ExperimentKind::KppEcfm,
    ExperimentKind::BeamEcfm,
];

#[test]
fn reports_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ALL {
        let out = run(&small(kind)).unwrap();
        write_run(dir.path(), &out).unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back = ExperimentReport::from_json(&text).unwrap();
        assert_eq!(back, out.report, "{kind:?}");
        assert_eq!(back.objective_trace.len(), back.constraint_violation_trace.len());
    }
}

#[test]
fn configs_round_trip_through_json() {
    for kind in ALL {
        let c = ExperimentConfig::defaults(kind);
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }
}

#[test]
fn reruns_differ_only_in_wall_time() {
    for kind in ALL {
        let mut a = run(&small(kind)).unwrap().report;
        let mut b = run(&small(kind)).unwrap().report;
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b, "{kind:?}");
    }
}

fn header_of(tables: &[(String, CsvTable)], name: &str) -> Vec<String> {
    tables.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("{name}")).1.header.clone()
}

#[test]
fn csv_schemas() {
    let b = run(&small(ExperimentKind::BurgersEcfm)).unwrap().tables;
    assert_eq!(header_of(&b, "data.csv"), ["t", "v_1", "v_2", "v_3", "v_4"]);
    assert_eq!(header_of(&b, "trace.csv"), ["epoch", "objective"]);
    assert_eq!(header_of(&b, "forces.csv")[..2], ["t", "lambda_1"]);

    let k = run(&small(ExperimentKind::KppEcfm)).unwrap().tables;
    assert_eq!(header_of(&k, "data.csv"), ["x1", "x2", "value", "clean"]);
    assert_eq!(
        header_of(&k, "field.csv"),
        ["x1", "x2", "truth", "recovered", "source", "recovered_source", "forces"]
    );
    assert_eq!(header_of(&k, "discrepancy.csv"), ["x1", "x2", "discrepancy", "lambda"]);
    assert_eq!(header_of(&k, "trace.csv"), ["iteration", "objective", "violation"]);

    let m = run(&small(ExperimentKind::BeamEcfm)).unwrap().tables;
    assert_eq!(header_of(&m, "data.csv")[..3], ["replicate", "omega", "v_1"]);
    assert_eq!(
        header_of(&m, "moments.csv"),
        ["x", "mean", "variance", "sample_mean", "sample_variance", "lambda"]
    );
    assert_eq!(header_of(&m, "field.csv"), ["x", "omega", "truth", "recovered"]);
}

#[test]
fn written_tables_read_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ExperimentKind::KppInv, ExperimentKind::BeamEcfm] {
        let tables = generate_data(&small(kind)).unwrap();
        ecfm::experiments::write_tables(dir.path(), &tables).unwrap();
        for (name, t) in &tables {
            assert_eq!(&CsvTable::read(&dir.path().join(name)).unwrap(), t, "{kind:?} {name}");
        }
    }
}

#[test]
fn kpp_report_carries_its_bounds() {
    let r = run(&small(ExperimentKind::KppEcfm)).unwrap().report;
    for k in ["bound_l1", "bound_l2", "bound_p1", "bound_p2", "source_plus_forces_error", "field_error"] {
        assert!(r.metric(k).is_some(), "{k}");
    }
    let (l1, l2) = (r.metric("bound_l1").unwrap(), r.metric("bound_l2").unwrap());
    assert!((l1 + l2).abs() < 1e-15);
}
