use rinc::pointcloud::{
    parse_kitti_bin, parse_xyz, read_cloud, read_kitti_bin, read_xyz, write_xyz,
};
use rinc::{Error, Point3, PointCloud};

fn kitti_bytes(records: &[[f32; 4]]) -> Vec<u8> {
    records
        .iter()
        .flatten()
        .flat_map(|v| v.to_le_bytes())
        .collect()
}

#[test]
fn kitti_two_records() {
    let bytes = kitti_bytes(&[[1.5, -2.0, 0.25, 0.9], [10.0, 20.0, -1.75, 0.0]]);
    assert_eq!(bytes.len(), 32);
    let cloud = parse_kitti_bin(&bytes).unwrap();
    assert_eq!(
        cloud.points(),
        &[Point3::new(1.5, -2.0, 0.25), Point3::new(10.0, 20.0, -1.75)]
    );
}

#[test]
fn kitti_rejects_partial_records_and_nan() {
    let mut bytes = kitti_bytes(&[[1.0, 2.0, 3.0, 0.0]]);
    bytes.pop();
    assert!(matches!(
        parse_kitti_bin(&bytes),
        Err(Error::MalformedInput(_))
    ));
    let nan = kitti_bytes(&[[f32::NAN, 0.0, 0.0, 0.0]]);
    assert!(matches!(
        parse_kitti_bin(&nan),
        Err(Error::MalformedInput(_))
    ));
    assert!(parse_kitti_bin(&[]).unwrap().is_empty());
}

#[test]
fn kitti_file_and_extension_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("000000.bin");
    std::fs::write(&bin, kitti_bytes(&[[3.0, 4.0, 0.0, 1.0]])).unwrap();
    assert_eq!(
        read_kitti_bin(&bin).unwrap().points(),
        &[Point3::new(3.0, 4.0, 0.0)]
    );
    assert_eq!(read_cloud(&bin).unwrap().len(), 1);

    let xyz = dir.path().join("cloud.xyz");
    std::fs::write(&xyz, "1 2 3\n\n4 5 6\n").unwrap();
    assert_eq!(read_cloud(&xyz).unwrap().len(), 2);

    let missing = dir.path().join("missing.bin");
    assert!(matches!(read_cloud(&missing), Err(Error::Io { .. })));
}

#[test]
fn xyz_round_trip_within_print_precision() {
    let pts = vec![
        Point3::new(1.2345674, -0.000001, 100.0),
        Point3::new(-5.5, 2.25, 1e-7),
        Point3::new(0.3333333333, 0.6666666666, -12.123456789),
    ];
    let cloud = PointCloud::from_points(pts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.xyz");
    write_xyz(&cloud, &path).unwrap();
    let back = read_xyz(&path).unwrap();
    assert_eq!(back.len(), cloud.len());
    for (a, b) in cloud.iter().zip(back.iter()) {
        assert!(a.distance_squared(b).sqrt() <= 1e-6);
    }
}

#[test]
fn xyz_errors_name_the_line() {
    let err = parse_xyz("1 2 3\n1 2\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = parse_xyz("1 2 3\n\n1 x 3\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    assert!(parse_xyz("1 2 inf\n").is_err());
}

#[test]
fn clouds_reject_non_finite_points() {
    assert!(PointCloud::from_points(vec![Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
}
