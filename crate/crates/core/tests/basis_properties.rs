use lmdp_irl_core::basis::*;
use lmdp_irl_core::grid::StateGrid;
use lmdp_irl_core::DenseMatrix;
use proptest::prelude::*;

/// Sorted columns, so matrices equal up to a column permutation compare equal.
fn column_set(x: &DenseMatrix) -> Vec<Vec<i64>> {
    let mut cols: Vec<Vec<i64>> = (0..x.cols())
        .map(|k| (0..x.rows()).map(|i| (x.get(i, k) * 1e9).round() as i64).collect())
        .collect();
    cols.sort();
    cols
}

fn rotate_rows(x: &DenseMatrix, perm: impl Fn(usize) -> usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        out.row_mut(perm(i)).copy_from_slice(x.row(i));
    }
    out
}

proptest! {
    #[test]
    fn gaussian_basis_is_rotation_invariant(spacing in prop::sample::select(vec![1usize, 2, 3, 4, 6, 9]), steps in 0usize..12, bw in 5.0..40.0f64) {
        let grid = StateGrid::misalignment();
        let x = gaussian_basis_1d(&grid, spacing, bw, Metric::Circular).unwrap();
        let k = (steps * spacing) % 36;
        let rotated = rotate_rows(x.values(), |i| (i + k) % 36);
        prop_assert_eq!(column_set(&rotated), column_set(x.values()));
    }

    #[test]
    fn bisquare_basis_is_rotation_invariant(per_dim in prop::sample::select(vec![3usize, 4, 6, 12]), a in 0usize..12, b in 0usize..12) {
        let grid = StateGrid::misalignment_2d(36).unwrap();
        let level = BisquareLevel::with_default_aperture(per_dim, 360.0);
        let x = bisquare_basis_2d(&grid, &[level], Metric::Circular).unwrap();
        let step = 36 / per_dim;
        let (ka, kb) = ((a * step) % 36, (b * step) % 36);
        let rotated = rotate_rows(x.values(), |i| {
            let (p, q) = grid.unravel(i);
            grid.ravel((p + ka) % 36, (q + kb) % 36)
        });
        prop_assert_eq!(column_set(&rotated), column_set(x.values()));
    }

    #[test]
    fn identity_features_represent_any_surface(v in prop::collection::vec(-50.0..50.0f64, 1..40)) {
        let x = identity_features(v.len()).unwrap();
        prop_assert_eq!(x.apply(&v), v);
    }
}

#[test]
fn default_bases_cover_every_state() {
    let g1 = StateGrid::misalignment();
    assert!(gaussian_basis_1d(&g1, 2, 10.0, Metric::Circular).unwrap().uncovered_states().is_empty());
    let g2 = StateGrid::misalignment_2d(36).unwrap();
    for metric in [Metric::Circular, Metric::Planar] {
        let x = bisquare_basis_2d(&g2, &default_bisquare_levels(&g2), metric).unwrap();
        assert_eq!(x.n_basis(), 850);
        assert!(x.uncovered_states().is_empty());
    }
}
