use fradi::clustering::{admissibility_eta, default_tile_size, BBox};
use fradi::{order_points, Grid, ProblemSpec};
use proptest::prelude::*;

fn check_partition(points: &[[f64; 2]], m: usize) {
    let p = order_points(points, m).unwrap();
    let n = points.len();
    assert_eq!(p.nb, n.div_ceil(m));
    let mut seen = vec![false; n];
    for (new, &old) in p.order.iter().enumerate() {
        assert!(!seen[old]);
        seen[old] = true;
        assert_eq!(p.position[old], new);
    }
    for t in 0..p.nb {
        if t + 1 < p.nb {
            assert_eq!(p.size(t), m);
        }
        let b = &p.boxes[t];
        for k in p.range(t) {
            let x = points[p.order[k]];
            assert!(b.lo[0] <= x[0] && x[0] <= b.hi[0] && b.lo[1] <= x[1] && x[1] <= b.hi[1]);
        }
    }
    let v: Vec<usize> = (0..n).collect();
    assert_eq!(p.unpermute(&p.permute(&v)), v);
}

proptest! {
    #[test]
    fn partitions_are_valid(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..400),
        m in 2usize..70,
    ) {
        let points: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        check_partition(&points, m);
    }

    #[test]
    fn eta_is_symmetric_and_scale_free(
        a in (-1.0f64..0.0, -1.0f64..0.0, 0.01f64..0.5, 0.01f64..0.5),
        shift in 0.1f64..2.0,
        scale in 0.1f64..10.0,
    ) {
        let t = BBox { lo: [a.0, a.1], hi: [a.0 + a.2, a.1 + a.3] };
        let s = BBox { lo: [t.hi[0] + shift, t.lo[1]], hi: [t.hi[0] + shift + a.3, t.hi[1]] };
        let e = admissibility_eta(&t, &s).unwrap();
        prop_assert_eq!(Some(e), admissibility_eta(&s, &t));
        let sc = |b: &BBox| BBox { lo: [b.lo[0] * scale, b.lo[1] * scale], hi: [b.hi[0] * scale, b.hi[1] * scale] };
        let es = admissibility_eta(&sc(&t), &sc(&s)).unwrap();
        prop_assert!((e - es).abs() <= 1e-12 * e);
    }
}

#[test]
fn grid_tiles_are_compact() {
    let spec = ProblemSpec::beta_2d();
    let grid = Grid::with_points_per_axis(&spec, 64).unwrap();
    let points = grid.points();
    check_partition(&points, 64);
    let p = order_points(&points, 64).unwrap();
    // 64 lattice points form an 8×8 square with diameter 7·h·√2
    let square = 7.0 * grid.h * 2f64.sqrt();
    for b in &p.boxes {
        assert!(b.diam() <= square * (1.0 + 1e-12), "{:?}", b);
    }
}

#[test]
fn touching_boxes_are_inadmissible() {
    let t = BBox { lo: [0.0, 0.0], hi: [1.0, 1.0] };
    let s = BBox { lo: [1.0, 0.0], hi: [2.0, 1.0] };
    assert_eq!(admissibility_eta(&t, &s), None);
    let far = BBox { lo: [3.0, 0.0], hi: [4.0, 1.0] };
    assert!((admissibility_eta(&t, &far).unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);
}

#[test]
fn default_tile_sizes() {
    assert_eq!(default_tile_size(100), 32);
    assert_eq!(default_tile_size(4096), 64);
    assert_eq!(default_tile_size(16384), 128);
    assert_eq!(default_tile_size(65536), 256);
}

#[test]
fn degenerate_inputs_fail() {
    assert!(order_points(&[], 4).is_err());
    assert!(order_points(&[[0.0, 0.0]], 1).is_err());
    let single = order_points(&[[0.5, 0.5]], 4).unwrap();
    assert_eq!(single.nb, 1);
}
