use fradi::assembly::assemble_dense;
use fradi::clustering::admissibility_eta;
use fradi::linalg::svd_eps_rank;
use fradi::tlr::{ara, assemble_tlr, read_snapshot, tile_rng, write_snapshot, Compressed, Tile, TlrMatrix, SAMPLE_BLOCK};
use fradi::{assemble, order_points, DenseMatrix, DiscreteOperator, Error, Execution, Grid, ProblemSpec, TilePartition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn operator_2d(points_per_axis: usize) -> DiscreteOperator {
    let spec = ProblemSpec::beta_2d();
    let grid = Grid::with_points_per_axis(&spec, points_per_axis).unwrap();
    assemble(&spec, &grid).unwrap()
}

fn tiled(op: &DiscreteOperator, m: usize) -> TilePartition {
    order_points(&op.grid.points(), m).unwrap()
}

/// Dense operator with rows and columns in tile order.
fn dense_in_tile_order(op: &DiscreteOperator, p: &TilePartition) -> DenseMatrix {
    let a = assemble_dense(op).unwrap();
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(p.order[i], p.order[j])])
}

fn block(a: &DenseMatrix, p: &TilePartition, i: usize, j: usize) -> DenseMatrix {
    let (ri, rj) = (p.range(i), p.range(j));
    DenseMatrix::from_fn(ri.len(), rj.len(), |r, c| a[(ri.start + r, rj.start + c)])
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn ara_zero_tile_has_rank_zero() {
    let z = DenseMatrix::zeros(40, 30);
    match ara(&z, 1e-6, SAMPLE_BLOCK, &mut tile_rng(1, 0)) {
        Compressed::LowRank(l) => assert_eq!(l.rank(), 0),
        Compressed::Dense => panic!("zero tile kept dense"),
    }
}

#[test]
fn ara_outer_product_has_rank_one() {
    let u: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin() + 2.0).collect();
    let v: Vec<f64> = (0..40).map(|j| (j as f64 * 0.7).cos()).collect();
    let a = DenseMatrix::from_fn(50, 40, |i, j| u[i] * v[j]);
    let Compressed::LowRank(l) = ara(&a, 1e-8, SAMPLE_BLOCK, &mut tile_rng(3, 9)) else {
        panic!("outer product kept dense");
    };
    assert_eq!(l.rank(), 1);
    let err = l.to_dense().sub(&a).frobenius_norm();
    assert!(err <= 1e-12 * a.frobenius_norm(), "error {err}");
}

#[test]
fn ara_rank_tracks_optimal_rank() {
    let xs: Vec<f64> = (0..64).map(|i| i as f64 * 0.3 / 63.0).collect();
    let ys: Vec<f64> = (0..64).map(|i| 1.0 + i as f64 * 0.3 / 63.0).collect();
    let a = DenseMatrix::from_fn(64, 64, |i, j| (ys[j] - xs[i]).abs().powf(-2.5));
    for eps in [1e-4, 1e-6, 1e-9] {
        let Compressed::LowRank(l) = ara(&a, eps, SAMPLE_BLOCK, &mut tile_rng(5, 1)) else {
            panic!("kernel tile kept dense");
        };
        let optimal = svd_eps_rank(&a, eps);
        assert!(l.rank() <= optimal + SAMPLE_BLOCK, "eps {eps}: {} vs {optimal}", l.rank());
        assert!(l.to_dense().sub(&a).frobenius_norm() <= eps);
    }
}

#[test]
fn tiles_meet_accuracy_and_diagonals_are_exact() {
    let op = operator_2d(32);
    let p = tiled(&op, 64);
    let eps = 1e-6;
    let a = assemble_tlr(&op, &p, eps, 11, Execution::Parallel).unwrap();
    let dense = dense_in_tile_order(&op, &p);
    for k in 0..p.nb {
        assert_eq!(a.diag_tile(k), &block(&dense, &p, k, k));
    }
    for (i, j) in a.stored_tiles() {
        let err = a.tile(i, j).unwrap().to_dense().sub(&block(&dense, &p, i, j)).frobenius_norm();
        assert!(err <= eps, "tile ({i}, {j}) error {err}");
    }
    let full = a.to_dense();
    let rel = full.sub(&dense).frobenius_norm() / dense.frobenius_norm();
    assert!(rel <= p.nb as f64 * eps);
}

#[test]
fn operator_storage_is_below_half_dense() {
    let op = operator_2d(64);
    assert_eq!(op.n(), 4096);
    let a = assemble_tlr(&op, &tiled(&op, 64), 1e-6, 2, Execution::Parallel).unwrap();
    let s = a.memory_stats();
    let words = s.total_bytes / 8;
    assert!(words < (op.n() * op.n() / 2) as u64, "{words} words");
    assert!(s.total_bytes <= (s.nb * s.nb * s.m * s.m * 8) as u64);
    assert_eq!(s.total_bytes, s.dense_diagonal_bytes + s.low_rank_bytes + s.dense_offdiag_bytes);
}

#[test]
fn matvec_matches_dense_operator() {
    let op = operator_2d(64);
    let p = tiled(&op, 64);
    let eps = 1e-6;
    let a = assemble_tlr(&op, &p, eps, 4, Execution::Parallel).unwrap();
    let dense = assemble_dense(&op).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = op.n();
    assert_eq!(a.matvec(&vec![0.0; n], Execution::Parallel).unwrap(), vec![0.0; n]);
    for _ in 0..100 {
        let x = random_vector(n, &mut rng);
        let y = a.matvec(&x, Execution::Parallel).unwrap();
        let z = dense.matvec(&x);
        let diff: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) / norm(&x) <= p.nb as f64 * eps);
    }
    assert!(matches!(a.matvec(&[1.0], Execution::Parallel), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn matvec_is_linear_and_schedule_independent() {
    let op = operator_2d(24);
    let a = assemble_tlr(&op, &tiled(&op, 32), 1e-6, 4, Execution::Parallel).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_vector(op.n(), &mut rng);
    let y = random_vector(op.n(), &mut rng);
    let (al, be) = (0.7, -1.9);
    let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| al * a + be * b).collect();
    let lhs = a.matvec(&combo, Execution::Parallel).unwrap();
    let ax = a.matvec(&x, Execution::Parallel).unwrap();
    let ay = a.matvec(&y, Execution::Sequential).unwrap();
    let scale = norm(&lhs);
    for k in 0..lhs.len() {
        assert!((lhs[k] - (al * ax[k] + be * ay[k])).abs() <= 1e-12 * scale);
    }
    assert_eq!(ax, a.matvec(&x, Execution::Sequential).unwrap());
}

#[test]
fn histogram_counts_stored_tiles() {
    let op = operator_2d(24);
    let a = assemble_tlr(&op, &tiled(&op, 32), 1e-6, 4, Execution::Parallel).unwrap();
    let s = a.memory_stats();
    let nb = s.nb;
    assert_eq!(s.rank_histogram.values().sum::<usize>(), nb * (nb - 1) / 2);
    assert!(s.average_rank <= s.max_rank as f64);

    let spec = ProblemSpec::nonsym_1d(0.5);
    let grid = Grid::new(&spec, 129).unwrap();
    let ns = assemble(&spec, &grid).unwrap();
    let b = assemble_tlr(&ns, &order_points(&grid.points(), 32).unwrap(), 1e-8, 1, Execution::Parallel).unwrap();
    let s = b.memory_stats();
    assert_eq!(s.rank_histogram.values().sum::<usize>(), s.nb * (s.nb - 1));
    let x: Vec<f64> = (0..ns.n()).map(|i| (i as f64).sin()).collect();
    let y = b.matvec(&x, Execution::Parallel).unwrap();
    let z = ns.apply(&x, Execution::Parallel).unwrap();
    let diff: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) / norm(&x) <= s.nb as f64 * 1e-8);
}

#[test]
fn ranks_do_not_depend_on_seed() {
    let op = operator_2d(32);
    let p = tiled(&op, 64);
    let a = assemble_tlr(&op, &p, 1e-6, 1, Execution::Parallel).unwrap();
    let b = assemble_tlr(&op, &p, 1e-6, 12345, Execution::Parallel).unwrap();
    for (i, j) in a.stored_tiles() {
        let (ra, rb) = (a.tile(i, j).unwrap().rank(), b.tile(i, j).unwrap().rank());
        assert!(ra.abs_diff(rb) <= SAMPLE_BLOCK, "tile ({i}, {j}): {ra} vs {rb}");
    }
}

#[test]
fn ranks_fall_with_admissibility() {
    let op = operator_2d(48);
    let p = tiled(&op, 64);
    let a = assemble_tlr(&op, &p, 1e-6, 3, Execution::Parallel).unwrap();
    let mut separated: Vec<(f64, usize)> = Vec::new();
    let mut touching = Vec::new();
    for (i, j) in a.stored_tiles() {
        let r = a.tile(i, j).unwrap().rank();
        match admissibility_eta(&p.boxes[i], &p.boxes[j]) {
            Some(eta) => separated.push((eta, r)),
            None => touching.push(r as f64),
        }
    }
    separated.sort_by(|x, y| x.0.total_cmp(&y.0));
    let half = separated.len() / 2;
    let mean = |v: &[(f64, usize)]| v.iter().map(|e| e.1 as f64).sum::<f64>() / v.len() as f64;
    let far = mean(&separated[..half]);
    let near = mean(&separated[half..]);
    let adjacent = touching.iter().sum::<f64>() / touching.len() as f64;
    assert!(far < near && near < adjacent, "far {far}, near {near}, touching {adjacent}");
}

#[test]
fn snapshot_round_trip() {
    let op = operator_2d(20);
    let a = assemble_tlr(&op, &tiled(&op, 48), 1e-7, 77, Execution::Parallel).unwrap();
    let mut buf = Vec::new();
    write_snapshot(&a, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"TLR1");
    let b = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(a.partition, b.partition);
    assert_eq!(a.eps, b.eps);
    assert_eq!(a.seed, b.seed);
    for (i, j) in a.stored_tiles() {
        assert_eq!(a.tile(i, j), b.tile(i, j));
    }
    assert_eq!(a.to_dense(), b.to_dense());

    let dir = std::env::temp_dir().join(format!("fradi-snapshot-{}", std::process::id()));
    a.save(&dir).unwrap();
    let c = TlrMatrix::load(&dir).unwrap();
    std::fs::remove_file(&dir).ok();
    assert_eq!(c.to_dense(), a.to_dense());

    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_snapshot(bad.as_slice()), Err(Error::Snapshot(_))));
    assert!(matches!(read_snapshot(&buf[..buf.len() - 3]), Err(Error::Snapshot(_))));
}

#[test]
fn dense_fallback_keeps_tiles_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 64;
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = g.matmul_t(&g);
    let p = TilePartition::contiguous(&vec![[0.0, 0.0]; n], 16).unwrap();
    let t = TlrMatrix::from_dense(&a, &p, 1e-10, 0, true, Execution::Sequential).unwrap();
    for (i, j) in t.stored_tiles() {
        let tile = t.tile(i, j).unwrap();
        assert!(matches!(tile, Tile::Dense(_)));
    }
    let rel = t.to_dense().sub(&a).frobenius_norm() / a.frobenius_norm();
    assert!(rel < 1e-15);
}
