use advssl::data::{make_ssl_split, read_container, read_idx, write_container, write_idx, IdxData, IdxTensor, SplitSpec};
use advssl::gmm::make_sphere_params;
use advssl::{Dataset, Error, RngSeed};

#[test]
fn idx_files_round_trip_and_scale() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("images-idx3-ubyte");
    let t = IdxTensor::new(vec![2, 2, 3], IdxData::U8((0..12).map(|i| i * 20).collect())).unwrap();
    write_idx(&path, &t).unwrap();
    let back = read_idx(&path).unwrap();
    assert_eq!(back, t);
    let rows = back.rows_f64(true);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], 120.0 / 255.0);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(read_idx(&path), Err(Error::IdxParse { .. })));
}

#[test]
fn container_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.gmmd");
    let s = RngSeed::new(4, 0);
    let p = make_sphere_params(7, 1.0, s).unwrap();
    let ds = Dataset::new(p.sample_labeled(3, s), p.sample_unlabeled(11, s), 7).unwrap();
    write_container(&path, &ds).unwrap();
    assert_eq!(read_container(&path).unwrap(), ds);
}

#[test]
fn splits_are_deterministic_and_conserve_points() {
    let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
    let ys: Vec<usize> = (0..100).map(|i| i % 10).collect();
    let spec = SplitSpec {
        num_labeled: 25,
        seed: RngSeed::new(1, 0),
        per_class_balanced: true,
    };
    let a = make_ssl_split(&xs, &ys, &spec).unwrap();
    let b = make_ssl_split(&xs, &ys, &spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.labeled.len(), 25);
    assert_eq!(a.labeled.len() + a.unlabeled.len(), 100);
    for e in &a.labeled {
        assert_eq!(e.y, ys[e.x[0] as usize]);
    }
}
