use fradi::assembly::assemble_dense;
use fradi::cholesky::factorize;
use fradi::linalg::{dense_cholesky, dense_solve};
use fradi::tlr::assemble_tlr;
use fradi::{assemble, order_points, DenseMatrix, DiscreteOperator, Error, Execution, Grid, ProblemSpec, TilePartition};
use fradi::tlr::TlrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    norm(&r) / norm(b)
}

fn line(n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|i| [i as f64, 0.0]).collect()
}

fn kappa_1d(unknowns: usize) -> DiscreteOperator {
    let spec = ProblemSpec::kappa_1d();
    assemble(&spec, &Grid::new(&spec, unknowns + 1).unwrap()).unwrap()
}

fn in_tile_order(a: &DenseMatrix, p: &TilePartition) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(p.order[i], p.order[j])])
}

#[test]
fn identity_factors_to_identity() {
    let n = 96;
    let p = TilePartition::contiguous(&line(n), 32).unwrap();
    let a = TlrMatrix::from_dense(&DenseMatrix::identity(n), &p, 1e-8, 1, true, Execution::Sequential).unwrap();
    let f = factorize(&a, 1e-8, Execution::Sequential).unwrap();
    assert_eq!(f.l.to_dense(), DenseMatrix::identity(n));
    for (i, j) in f.l.stored_tiles() {
        assert_eq!(f.l.tile(i, j).unwrap().rank(), 0);
    }
}

#[test]
fn diagonal_square_root() {
    let n = 64;
    let p = TilePartition::contiguous(&line(n), 16).unwrap();
    let a = TlrMatrix::from_dense(&DenseMatrix::diagonal(&vec![4.0; n]), &p, 1e-8, 1, true, Execution::Sequential).unwrap();
    let f = factorize(&a, 1e-8, Execution::Parallel).unwrap();
    assert_eq!(f.l.to_dense(), DenseMatrix::diagonal(&vec![2.0; n]));
}

#[test]
fn block_diagonal_matches_dense_blocks() {
    let (n, m) = (96, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut a = DenseMatrix::zeros(n, n);
    for b in 0..n / m {
        let g = DenseMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let mut s = g.matmul_t(&g);
        for d in 0..m {
            s[(d, d)] += m as f64;
        }
        for r in 0..m {
            for c in 0..m {
                a[(b * m + r, b * m + c)] = s[(r, c)];
            }
        }
    }
    let p = TilePartition::contiguous(&line(n), m).unwrap();
    let t = TlrMatrix::from_dense(&a, &p, 1e-10, 3, true, Execution::Sequential).unwrap();
    let f = factorize(&t, 1e-10, Execution::Sequential).unwrap();
    let oracle = dense_cholesky(&a).unwrap();
    let diff = f.l.to_dense().sub(&oracle).frobenius_norm() / oracle.frobenius_norm();
    assert!(diff < 1e-13, "{diff}");
}

#[test]
fn factor_of_1d_operator_is_accurate() {
    let op = kappa_1d(512);
    let p = order_points(&op.grid.points(), 64).unwrap();
    let eps = 1e-8;
    let a = assemble_tlr(&op, &p, eps, 7, Execution::Parallel).unwrap();
    let f = factorize(&a, eps, Execution::Parallel).unwrap();
    let dense = in_tile_order(&assemble_dense(&op).unwrap(), &p);
    let rel = f.reconstruct().sub(&dense).frobenius_norm() / dense.frobenius_norm();
    assert!(rel <= 100.0 * eps, "{rel}");
}

#[test]
fn every_tile_is_compressed_once() {
    let spec = ProblemSpec::beta_2d();
    let op = assemble(&spec, &Grid::with_points_per_axis(&spec, 24).unwrap()).unwrap();
    let p = order_points(&op.grid.points(), 48).unwrap();
    let a = assemble_tlr(&op, &p, 1e-7, 2, Execution::Parallel).unwrap();
    let f = factorize(&a, 1e-7, Execution::Parallel).unwrap();
    let nb = p.nb;
    for i in 0..nb {
        for k in 0..nb {
            let expected = u32::from(i > k);
            assert_eq!(f.compressions[i * nb + k], expected, "tile ({i}, {k})");
        }
    }
}

#[test]
fn schedules_agree_bitwise() {
    let spec = ProblemSpec::kappa_2d(0.75);
    let op = assemble(&spec, &Grid::with_points_per_axis(&spec, 24).unwrap()).unwrap();
    let p = order_points(&op.grid.points(), 32).unwrap();
    let a = assemble_tlr(&op, &p, 1e-6, 8, Execution::Parallel).unwrap();
    let seq = factorize(&a, 1e-6, Execution::Sequential).unwrap();
    let par = factorize(&a, 1e-6, Execution::Parallel).unwrap();
    assert_eq!(seq.l.to_dense(), par.l.to_dense());
    for (i, j) in seq.l.stored_tiles() {
        assert_eq!(seq.l.tile(i, j), par.l.tile(i, j));
    }
}

#[test]
fn solves_match_dense_oracle() {
    let spec = ProblemSpec::beta_2d();
    let op = assemble(&spec, &Grid::with_points_per_axis(&spec, 32).unwrap()).unwrap();
    let eps = 1e-8;
    let p = order_points(&op.grid.points(), 64).unwrap();
    let a = assemble_tlr(&op, &p, eps, 5, Execution::Parallel).unwrap();
    let f = factorize(&a, eps, Execution::Parallel).unwrap();
    let dense = assemble_dense(&op).unwrap();
    let l = dense_cholesky(&dense).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let b: Vec<f64> = (0..op.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = f.solve(&b).unwrap();
        assert!(residual(&dense, &x, &b) <= 1e3 * eps);
        let y = dense_solve(&l, &b).unwrap();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
        assert!(norm(&diff) / norm(&y) <= 1e3 * eps);
    }
    assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn indefinite_matrix_is_reported() {
    let n = 48;
    let mut a = DenseMatrix::identity(n);
    a[(40, 40)] = -1.0;
    let p = TilePartition::contiguous(&line(n), 16).unwrap();
    let t = TlrMatrix::from_dense(&a, &p, 1e-8, 1, true, Execution::Sequential).unwrap();
    match factorize(&t, 1e-8, Execution::Sequential) {
        Err(Error::NotPositiveDefinite { block, row, .. }) => assert_eq!((block, row), (2, 8)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn non_symmetric_input_is_rejected() {
    let n = 32;
    let p = TilePartition::contiguous(&line(n), 16).unwrap();
    let t = TlrMatrix::from_dense(&DenseMatrix::identity(n), &p, 1e-8, 1, false, Execution::Sequential).unwrap();
    assert!(matches!(factorize(&t, 1e-8, Execution::Sequential), Err(Error::Unsupported(_))));
    let s = TlrMatrix::from_dense(&DenseMatrix::identity(n), &p, 1e-8, 1, true, Execution::Sequential).unwrap();
    assert!(matches!(factorize(&s, 0.0, Execution::Sequential), Err(Error::Config(_))));
    let f = factorize(&s, 1e-8, Execution::Sequential).unwrap();
    assert!(matches!(factorize(&f.l, 1e-8, Execution::Sequential), Err(Error::Unsupported(_))));
}
