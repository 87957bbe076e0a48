use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sketchdecomp::coherence::{coherence_of, sufficient_m1, BoundConstants};
use sketchdecomp::datagen::{gen_bernoulli_sparse, gen_gaussian_lr, ProblemInstance};
use sketchdecomp::matrix::{numerical_rank, project_complement, select_columns, svd_compact};
use sketchdecomp::sampling::{alternating_sample, informative_columns, Alg2Config, Alg3Config};
use sketchdecomp::solvers::{l1_fit_vector, pcp_alm, soft_threshold, singular_value_threshold};
use sketchdecomp::{IndexSet, L1Config, SolverConfig};

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
}

fn subset(n: usize, k: usize, seed: u64) -> IndexSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.truncate(k);
    IndexSet::new(idx, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_round_trip(rows in 1usize..30, cols in 1usize..30, seed in any::<u64>()) {
        let a = gaussian(rows, cols, seed);
        let svd = svd_compact(&a, 0.0).unwrap();
        prop_assert!((svd.reconstruct() - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn low_rank_svd_round_trip(m in 4usize..40, n in 4usize..40, r in 1usize..4, seed in any::<u64>()) {
        let a = gaussian(m, r, seed) * gaussian(r, n, seed ^ 1);
        let svd = svd_compact(&a, 1e-10).unwrap();
        prop_assert_eq!(svd.rank(), r);
        prop_assert!((svd.reconstruct() - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn project_complement_is_idempotent(m in 2usize..25, k in 0usize..6, n in 1usize..6, seed in any::<u64>()) {
        let c = gaussian(m, k.min(m - 1), seed);
        let b = gaussian(m, n, seed ^ 7);
        let once = project_complement(&c, &b).unwrap();
        let twice = project_complement(&c, &once).unwrap();
        prop_assert!((&twice - &once).norm() <= 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn column_selection_composes(n in 1usize..20, seed in any::<u64>()) {
        let a = gaussian(5, n, seed);
        let k = 1 + (seed as usize) % n;
        let outer = subset(n, k, seed);
        let inner = subset(k, 1 + (seed as usize / 7) % k, seed ^ 3);
        let nested = select_columns(&select_columns(&a, &outer).unwrap(), &inner).unwrap();
        let direct = select_columns(&a, &outer.compose(&inner).unwrap()).unwrap();
        prop_assert_eq!(nested, direct);
    }

    #[test]
    fn thresholding_at_zero_is_identity(m in 1usize..20, n in 1usize..20, seed in any::<u64>()) {
        let a = gaussian(m, n, seed);
        prop_assert_eq!(soft_threshold(&a, 0.0), a.clone());
        let (l, _) = singular_value_threshold(&a, 0.0);
        prop_assert!((l - &a).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn coherence_is_permutation_invariant(r in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = gen_gaussian_lr(30, 25, r, &mut rng).unwrap();
        let perm = subset(25, 25, seed ^ 5);
        let lp = select_columns(&l, &perm).unwrap();
        let (a, b) = (coherence_of(&l, 1e-8).unwrap(), coherence_of(&lp, 1e-8).unwrap());
        prop_assert_eq!(a.rank, b.rank);
        for (x, y) in [(a.gamma_u, b.gamma_u), (a.gamma_v, b.gamma_v), (a.mu, b.mu), (a.uv_inf, b.uv_inf)] {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs());
        }
    }

    #[test]
    fn sufficient_m1_is_monotone(r in 1usize..40, g in 1.0f64..10.0, n1 in 50usize..5000, delta in 0.01f64..0.9) {
        let c = BoundConstants { delta, ..BoundConstants::default() };
        let base = sufficient_m1(r, g, n1, &c);
        prop_assert!(sufficient_m1(r + 1, g, n1, &c) >= base);
        prop_assert!(sufficient_m1(r, g * 1.1, n1, &c) >= base);
        let smaller = BoundConstants { delta: delta / 2.0, ..c };
        prop_assert!(sufficient_m1(r, g, n1, &smaller) >= base);
    }

    #[test]
    fn l1_fit_beats_nearby_points(m in 8usize..30, k in 1usize..4, seed in any::<u64>()) {
        let a = gaussian(m, k, seed);
        let b = DVector::from_column_slice(gaussian(m, 1, seed ^ 11).as_slice());
        let sol = l1_fit_vector(&a, &b, &L1Config::default()).unwrap();
        let obj = |x: &DVector<f64>| (&b - &a * x).abs().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 13);
        for _ in 0..100 {
            let dx = DVector::from_fn(k, |_, _| 1e-3 * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng));
            prop_assert!(obj(&sol.x) <= obj(&(&sol.x + dx)) + 1e-12 * obj(&sol.x));
        }
    }

    #[test]
    fn generators_are_deterministic_and_finite(n1 in 1usize..30, n2 in 1usize..30, r in 1usize..5, rho in 0.0f64..1.0, seed in any::<u64>()) {
        let r = r.min(n1).min(n2);
        let a = ProblemInstance::gaussian(n1, n2, r, rho, 1.0, seed).unwrap();
        let b = ProblemInstance::gaussian(n1, n2, r, rho, 1.0, seed).unwrap();
        prop_assert_eq!(&a.d, &b.d);
        prop_assert!(a.d.iter().all(|x| x.is_finite()));
        prop_assert_eq!(&a.l + &a.s, a.d);
    }

    #[test]
    fn informative_columns_picks_spanning_sets(r in 1usize..6, c in 1usize..4, seed in any::<u64>()) {
        let a = gaussian(40, r, seed) * gaussian(r, 60, seed ^ 2);
        let cfg = Alg2Config::with_repeats(c);
        let idx = informative_columns(&a, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(idx.len(), c * r);
        for k in 0..c {
            let block = IndexSet::new(idx.indices()[k * r..(k + 1) * r].to_vec(), 60).unwrap();
            prop_assert_eq!(numerical_rank(&select_columns(&a, &block).unwrap(), 1e-8), r);
        }
        let again = informative_columns(&a, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(idx, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alm_reports_residual_truthfully(n in 10usize..30, r in 1usize..3, seed in any::<u64>()) {
        let inst = ProblemInstance::gaussian(n, n, r, 0.05, 1.0, seed).unwrap();
        let dec = pcp_alm(&inst.d, &SolverConfig::default()).unwrap();
        let res = (&inst.d - &dec.l_hat - &dec.s_hat).norm() / inst.d.norm();
        prop_assert!((res - dec.primal_residual).abs() <= 1e-14);
        if dec.converged {
            prop_assert!(dec.primal_residual <= SolverConfig::default().tol);
        }
    }

    #[test]
    fn alternating_indices_are_valid(seed in any::<u64>()) {
        let inst = ProblemInstance::doubly_clustered(60, 4, 2, 0.0, 1.0, seed).unwrap();
        let cfg = Alg3Config { c_r: 3, r_hat: 4, pcp: None, ..Alg3Config::default() };
        let out = alternating_sample(&inst.d, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for set in [&out.row_idx, &out.col_idx] {
            let mut v = set.indices().to_vec();
            v.sort_unstable();
            v.dedup();
            prop_assert_eq!(v.len(), set.len());
            prop_assert!(v.iter().all(|&i| i < 60));
        }
        prop_assert!(*out.rank_trace.last().unwrap() <= 12);
    }
}

#[test]
fn bernoulli_density_within_three_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (rho, n1, n2) in [(0.01, 200, 300), (0.1, 100, 100), (0.5, 50, 80), (0.02, 400, 400)] {
        let s = gen_bernoulli_sparse(n1, n2, rho, 1.0, &mut rng).unwrap();
        let total = (n1 * n2) as f64;
        let nnz = s.iter().filter(|x| **x != 0.0).count() as f64;
        let sigma = (total * rho * (1.0 - rho)).sqrt();
        assert!((nnz - total * rho).abs() <= 3.0 * sigma, "rho {rho}: {nnz} of {total}");
    }
}

#[test]
fn doubly_clustered_sparsity_is_recorded() {
    let inst = ProblemInstance::doubly_clustered(200, 10, 5, 0.0, 1.0, 4).unwrap();
    let top = inst.l.amax();
    let frac = inst.l.iter().filter(|x| x.abs() > 1e-3 * top).count() as f64 / inst.l.len() as f64;
    println!("doubly clustered 200x200 r=10 n=5: {frac:.3} of entries above 1e-3 max");
    assert!(frac > 0.0 && frac <= 1.0);
}
