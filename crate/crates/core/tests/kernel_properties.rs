use cse_core::kernels::{gram, linspace, median_heuristic, GaussianKernel};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn points(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), 2..max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gram_is_symmetric_psd_and_bounded(pts in points(25, 3), sigma2 in 0.05f64..10.0) {
        let k = GaussianKernel::new(sigma2).unwrap();
        let g = gram(&k, &pts, &pts).unwrap().into_entries();
        for i in 0..pts.len() {
            prop_assert_eq!(g[(i, i)], 1.0);
            for j in 0..pts.len() {
                prop_assert_eq!(g[(i, j)], g[(j, i)]);
                prop_assert!(g[(i, j)] > 0.0 || g[(i, j)] == 0.0);
                prop_assert!(g[(i, j)] <= 1.0);
            }
        }
        let min_eig = SymmetricEigen::new(g).eigenvalues.min();
        prop_assert!(min_eig >= -1e-8, "min eigenvalue {}", min_eig);
    }

    #[test]
    fn median_heuristic_ignores_order(mut pts in points(40, 2), seed in any::<u64>()) {
        prop_assume!(pts.windows(2).any(|w| w[0] != w[1]));
        let a = median_heuristic(&pts);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(pts.as_mut_slice(), &mut rng);
        let b = median_heuristic(&pts);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "shuffle changed success"),
        }
    }

    #[test]
    fn linspace_hits_both_ends(lo in -10.0f64..10.0, width in 1e-3f64..10.0, n in 2usize..200) {
        let g = linspace(lo, lo + width, n).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g[0], lo);
        prop_assert_eq!(g[n - 1], lo + width);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn median_heuristic_matches_hand_values() {
    // squared distances {1, 4, 9}: median 4
    let s = median_heuristic(&[0.0, 1.0, 3.0]).unwrap();
    assert_eq!(s, 2.0);
    // {1, 4, 9, 1, 4, 1}: sorted 1 1 1 4 4 9, median 2.5
    let s = median_heuristic(&[0.0, 1.0, 2.0, 3.0]).unwrap();
    assert_eq!(s, 1.25);
    assert!(median_heuristic(&[2.0, 2.0, 2.0]).is_err());
}
