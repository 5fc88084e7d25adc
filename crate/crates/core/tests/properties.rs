mod oracle;

use proptest::prelude::*;

use deep_energy::image::to_grayscale;
use deep_energy::matting_energy::{assemble_matting_laplacian, matting_energy, matting_seeds, matting_weights, DEFAULT_EPSILON};
use deep_energy::seg_energy::{assemble_laplacian, edge_weights, rw_energy, DEFAULT_BETA};
use deep_energy::solver::{analytic_matting, analytic_rw, solve_spd, SolveOptions};
use deep_energy::{AlphaMatte, CsrMatrix, ProbabilityField, Rng, SeedMap};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(32)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

fn field(h: usize, w: usize, classes: usize, rng: &mut Rng) -> ProbabilityField {
    let planes = (0..classes).map(|_| (0..h * w).map(|_| rng.uniform()).collect()).collect();
    ProbabilityField::from_planes(h, w, planes).unwrap()
}

fn permuted_seeds(seeds: &SeedMap, perm: &[usize]) -> SeedMap {
    let labels: Vec<u8> = seeds
        .labels()
        .iter()
        .map(|&code| if code == 0 { 0 } else { perm[code as usize - 1] as u8 + 1 })
        .collect();
    SeedMap::from_labels(seeds.height(), seeds.width(), seeds.classes(), &labels).unwrap()
}

fn permuted_field(y: &ProbabilityField, perm: &[usize]) -> ProbabilityField {
    let mut planes = vec![Vec::new(); y.classes()];
    for l in 0..y.classes() {
        planes[perm[l]] = y.plane(l).to_vec();
    }
    ProbabilityField::from_planes(y.height(), y.width(), planes).unwrap()
}

fn swapped(seeds: &SeedMap) -> SeedMap {
    matting_seeds(seeds.height(), seeds.width(), seeds.plane(0), seeds.plane(1)).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn seg_energy_invariant_under_class_relabeling(seed in any::<u64>(), h in 1usize..7, w in 1usize..7, classes in 2usize..5) {
        let mut rng = Rng::new(seed);
        let img = oracle::random_image(h, w, 3, &mut rng);
        let weights = edge_weights(&to_grayscale(&img), 20.0).unwrap();
        let seeds = oracle::random_seeds(h, w, classes, 0.4, &mut rng);
        let y = field(h, w, classes, &mut rng);
        let mut perm: Vec<usize> = (0..classes).collect();
        perm.rotate_left(1 + rng.below(classes - 1));
        let e = rw_energy(&seeds, &y, &weights, 3.0).unwrap();
        let ep = rw_energy(&permuted_seeds(&seeds, &perm), &permuted_field(&y, &perm), &weights, 3.0).unwrap();
        prop_assert!(close(e, ep, 1e-12));
    }

    #[test]
    fn seg_energy_is_convex(seed in any::<u64>(), h in 1usize..7, w in 1usize..7) {
        let mut rng = Rng::new(seed);
        let img = oracle::random_image(h, w, 1, &mut rng);
        let weights = edge_weights(&img, DEFAULT_BETA).unwrap();
        let seeds = oracle::random_seeds(h, w, 2, 0.3, &mut rng);
        let (a, b) = (field(h, w, 2, &mut rng), field(h, w, 2, &mut rng));
        let t = rng.uniform();
        let mix: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let mid = ProbabilityField::new(h, w, 2, mix).unwrap();
        let e = |y: &ProbabilityField| rw_energy(&seeds, y, &weights, 10.0).unwrap();
        prop_assert!(e(&mid) <= t * e(&a) + (1.0 - t) * e(&b) + 1e-12);
    }

    #[test]
    fn matting_energy_symmetric_under_complement(seed in any::<u64>(), h in 3usize..7, w in 3usize..7) {
        let mut rng = Rng::new(seed);
        let img = oracle::random_image(h, w, 3, &mut rng);
        let weights = matting_weights(&img, DEFAULT_EPSILON).unwrap();
        let seeds = oracle::random_seeds(h, w, 2, 0.4, &mut rng);
        let alpha: Vec<f64> = (0..h * w).map(|_| rng.uniform()).collect();
        let flipped: Vec<f64> = alpha.iter().map(|a| 1.0 - a).collect();
        let e = matting_energy(&seeds, &AlphaMatte::new(h, w, alpha).unwrap(), &weights, 1.0).unwrap();
        let ef = matting_energy(&swapped(&seeds), &AlphaMatte::new(h, w, flipped).unwrap(), &weights, 1.0).unwrap();
        prop_assert!(close(e, ef, 1e-9));
    }

    #[test]
    fn matting_energy_is_nonnegative(seed in any::<u64>(), h in 3usize..7, w in 3usize..7) {
        let mut rng = Rng::new(seed);
        let img = oracle::random_image(h, w, 3, &mut rng);
        let weights = matting_weights(&img, 1e-3).unwrap();
        let seeds = oracle::random_seeds(h, w, 2, 0.4, &mut rng);
        let alpha = AlphaMatte::new(h, w, (0..h * w).map(|_| rng.uniform_range(-1.0, 2.0)).collect()).unwrap();
        prop_assert!(matting_energy(&seeds, &alpha, &weights, 1.0).unwrap() >= -1e-9);
    }
}

#[test]
fn rw_solution_matches_dense_solve_and_relabeling() {
    let mut rng = Rng::new(11);
    for _ in 0..10 {
        let (h, w) = (3 + rng.below(6), 3 + rng.below(6));
        let img = oracle::smooth_image(h, w, &mut rng);
        let classes = 2 + rng.below(3);
        let seeds = oracle::random_seeds(h, w, classes, 0.2, &mut rng);
        let l = assemble_laplacian(&edge_weights(&to_grayscale(&img), DEFAULT_BETA).unwrap());
        let (y, _) = analytic_rw(&seeds, &l, 10.0, SolveOptions::default()).unwrap();
        let mut system = oracle::rw_laplacian(&img, DEFAULT_BETA);
        let q = oracle::seeded(&seeds);
        for (i, row) in system.iter_mut().enumerate() {
            row[i] += 10.0 * q[i];
        }
        for k in 0..classes {
            let b: Vec<f64> = (0..h * w).map(|i| 10.0 * q[i] * seeds.plane(k)[i] as f64).collect();
            let want = oracle::solve(&system, &b);
            for (a, b) in y.plane(k).iter().zip(&want) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
        let mut perm: Vec<usize> = (0..classes).collect();
        perm.reverse();
        let (yp, _) = analytic_rw(&permuted_seeds(&seeds, &perm), &l, 10.0, SolveOptions::default()).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            for (a, b) in y.plane(k).iter().zip(yp.plane(p)) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn matting_solution_matches_dense_solve_and_complement() {
    let mut rng = Rng::new(12);
    for _ in 0..10 {
        let (h, w) = (5, 5);
        let img = oracle::smooth_image(h, w, &mut rng);
        let seeds = oracle::random_seeds(h, w, 2, 0.3, &mut rng);
        let eps = 1e-4;
        let l = assemble_matting_laplacian(&img, eps).unwrap();
        let sol = analytic_matting(&seeds, &l, 1.0, SolveOptions::default()).unwrap();
        let mut system = oracle::matting_laplacian(&img, eps);
        let q = oracle::seeded(&seeds);
        for (i, row) in system.iter_mut().enumerate() {
            row[i] += q[i];
        }
        let b: Vec<f64> = (0..h * w).map(|i| q[i] * seeds.plane(1)[i] as f64).collect();
        let want = oracle::solve(&system, &b);
        for (a, b) in sol.unclamped.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        let flipped = analytic_matting(&swapped(&seeds), &l, 1.0, SolveOptions::default()).unwrap();
        for (a, b) in sol.unclamped.data().iter().zip(flipped.unclamped.data()) {
            assert!((a + b - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn spd_solve_matches_dense_inverse() {
    let mut rng = Rng::new(13);
    for _ in 0..5 {
        let n = 50;
        // M^T M + n I with a sparse M
        let m: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| if rng.uniform() < 0.1 { rng.uniform_range(-1.0, 1.0) } else { 0.0 }).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let sparse = CsrMatrix::from_dense(&a).unwrap();
        let (x, report) = solve_spd(&sparse, &b, SolveOptions { tol: 1e-12, max_iter: None }).unwrap();
        assert!(report.relative_residual <= 1e-12);
        let want = oracle::solve(&a, &b);
        for (u, v) in x.iter().zip(&want) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }
}
