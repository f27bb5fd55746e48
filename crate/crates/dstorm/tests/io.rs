use dstorm::io::*;
use dstorm::HarnessError;
use dstorm_core::linalg::Matrix;
use dstorm_core::problems::Dataset;
use dstorm_core::topology::{build_graph, GraphKind};
use proptest::prelude::*;

#[test]
fn matrix_text_round_trips_bit_for_bit() {
    let values = vec![0.1, -2.5e-300, 5e-324, 1.0 / 3.0, -0.0, 123456789.125, f64::MAX, 1e21];
    let m = Matrix::from_vec(2, 4, values).unwrap();
    let back = parse_matrix(&format_matrix(&m)).unwrap();
    for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn matrix_parser_skips_comments_and_rejects_bad_input() {
    let m = parse_matrix("# weights\n\n1 2\n  3   4  \n").unwrap();
    assert_eq!(m, Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    assert!(parse_matrix("1 2\n3\n").is_err());
    assert!(parse_matrix("1 x\n").unwrap_err().contains("line 1"));
    assert!(parse_matrix("# nothing\n").is_err());
}

#[test]
fn graphs_round_trip_through_adjacency_files() {
    let dir = tempfile::tempdir().unwrap();
    let kinds = [
        GraphKind::Ring,
        GraphKind::Ladder,
        GraphKind::Complete,
        GraphKind::Path,
        GraphKind::RandomConnected { density: 0.4 },
    ];
    for (i, kind) in kinds.into_iter().enumerate() {
        let g = build_graph(kind, 8, 3).unwrap();
        let path = dir.path().join(format!("g{i}.txt"));
        write_graph(&path, &g).unwrap();
        assert_eq!(read_graph(&path).unwrap(), g);
    }
}

#[test]
fn adjacency_validation() {
    let m = |rows: &[&[f64]]| Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    assert!(graph_from_adjacency(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap_err().contains("symmetric"));
    assert!(graph_from_adjacency(&m(&[&[1.0, 1.0], &[1.0, 0.0]])).unwrap_err().contains("self-loop"));
    assert!(graph_from_adjacency(&m(&[&[0.0, 0.5], &[0.5, 0.0]])).unwrap_err().contains("0 or 1"));
    assert!(graph_from_adjacency(&m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]])).is_err());
    assert!(graph_from_adjacency(&m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0]])).is_err());
}

#[test]
fn dataset_round_trip_maps_labels_to_zero_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.txt");
    std::fs::write(&path, "# x1; x2; y\n0.5; -1.25; 1\n2; 0.1; -1\n-3; 7; 1\n").unwrap();
    let d = read_dataset(&path, b';').unwrap();
    assert_eq!(d.labels, vec![1.0, 0.0, 1.0]);
    assert_eq!(d.features.row(1), &[2.0, 0.1]);
    let out = dir.path().join("out.csv");
    write_dataset(&out, &d, b',').unwrap();
    assert_eq!(read_dataset(&out, b',').unwrap(), d);
}

#[test]
fn dataset_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases =
        [("bad_label.csv", "1,2,3\n"), ("ragged.csv", "1,2,1\n1,0\n"), ("text.csv", "1,a,0\n"), ("empty.csv", "")];
    for (name, body) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        assert!(matches!(read_dataset(&path, b','), Err(HarnessError::Parse { .. })), "{name}");
    }
    assert!(matches!(
        read_dataset(&dir.path().join("missing.csv"), b','),
        Err(HarnessError::Parse { .. } | HarnessError::Io { .. })
    ));
}

proptest! {
    #[test]
    fn any_finite_matrix_round_trips(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| f64::from_bits(rng.random::<u64>()))
            .map(|v| if v.is_finite() { v } else { 0.5 })
            .collect();
        let m = Matrix::from_vec(rows, cols, data).unwrap();
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        prop_assert!(m.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn datasets_round_trip(n in 2usize..20, p in 1usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let features = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.random_range(-1e3..1e3)).collect()).unwrap();
        let labels = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let d = Dataset::new(features, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &d, b',').unwrap();
        prop_assert_eq!(read_dataset(&path, b',').unwrap(), d);
    }
}
