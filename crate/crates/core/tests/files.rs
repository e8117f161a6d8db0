use std::fs::File;

use phaseless_core::inversion::reconstruct_potential;
use phaseless_core::io;
use phaseless_core::phaseless;
use phaseless_core::{
    DerivativeMode, ForwardSolver, InversionOptions, KGrid, Method, NoiseModel, PotentialSpec,
    XGrid,
};

#[test]
fn potential_loads_from_json_and_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("v.json");
    std::fs::write(
        &json,
        r#"{"kind":"double-barrier","params":{"height":3.0,"width":0.4,"gap":0.6}}"#,
    )
    .unwrap();
    let v = io::load_potential(json.to_str().unwrap()).unwrap();
    assert_eq!(v, PotentialSpec::double_barrier(3.0, 0.4, 0.6));

    let csv = dir.path().join("v.csv");
    std::fs::write(&csv, "x,v\n0,0\n0.5,1\n1.0,0.25\n1.5,0\n").unwrap();
    let g = io::load_potential(csv.to_str().unwrap()).unwrap();
    assert_eq!(g.support_end(), 1.5);
    assert!((g.evaluate(0.75) - 0.625).abs() < 1e-12);

    assert!(io::load_potential(dir.path().join("missing.json").to_str().unwrap()).is_err());
}

#[test]
fn dataset_survives_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let solver = ForwardSolver::default();
    let v = PotentialSpec::gaussian(1.0, 1.0, 0.3);
    let grid = KGrid::new(0.1, 10.0, 40).unwrap();
    for (method, pos) in [
        (Method::S1, vec![-1.0, -1.4]),
        (Method::S2, vec![-1.0, -1.4, -2.1]),
        (Method::S3, vec![-0.5]),
    ] {
        let noise = NoiseModel::new(1e-3, 3).unwrap();
        let data = phaseless::build(
            &solver,
            &v,
            method,
            &pos,
            &grid,
            &noise,
            DerivativeMode::Analytic,
        )
        .unwrap();
        let path = dir.path().join(format!("{method}.csv"));
        io::write_dataset_csv(
            File::create(&path).unwrap(),
            &["generated in a test".into()],
            &data,
        )
        .unwrap();
        let back = io::read_dataset_csv(File::open(&path).unwrap()).unwrap();
        assert_eq!(back, data);
    }
}

#[test]
fn forward_file_feeds_the_inversion() {
    let dir = tempfile::tempdir().unwrap();
    let solver = ForwardSolver::default();
    let v = PotentialSpec::square_barrier(1.0, 1.0);
    let grid = KGrid::new(0.05, 20.0, 800).unwrap();
    let coeffs = solver.sweep(&v, &grid).unwrap();
    let path = dir.path().join("forward.csv");
    io::write_forward_csv(File::create(&path).unwrap(), &[], &coeffs).unwrap();

    let table = io::read_reflection_table(File::open(&path).unwrap()).unwrap();
    assert_eq!(table.kgrid.count, 800);
    let xgrid = XGrid::with_step(-1.0, 3.0, 0.02).unwrap();
    let opts = InversionOptions {
        nystrom_step: 0.02,
        ..Default::default()
    };
    let vhat = reconstruct_potential(&table, &xgrid, &opts).unwrap();
    assert!(
        (vhat.value_at(0.5) - 1.0).abs() < 0.1,
        "{}",
        vhat.value_at(0.5)
    );
    assert!(vhat.value_at(2.0).abs() < 0.1);

    let out = dir.path().join("potential.csv");
    io::write_potential_csv(File::create(&out).unwrap(), &["header".into()], &vhat).unwrap();
    let rebuilt = io::read_grid_potential_csv(File::open(&out).unwrap());
    // The reconstruction starts at x = -1, so it is not a half-line grid file.
    assert!(rebuilt.is_err());
}
