use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use linsleeve::atpe::{atpe, atpe_query_budget, AtpeState};
use linsleeve::exec::Execution;
use linsleeve::harness::experiment::trials_csv;
use linsleeve::harness::{run_trials, ExperimentConfig};
use linsleeve::ogm::{build_problem, grassmann_steepest_descent, SolverParams};
use linsleeve::oracle::BuiltinProfile;
use linsleeve::profile::{profile_from_direction, quasi_interpolant};
use linsleeve::retrieval::{full_design, measure, reconstruct_from_full, reconstruct_from_reduced, reduced_design};
use linsleeve::rng::{derive_seed, gaussian_matrix, seeded, unit_vector};
use linsleeve::subspace::{gram_schmidt, hs_distance, orth_complement, orthonormalize_frame, random_subspace};
use linsleeve::SleeveOracle;

fn dims(max_n: usize) -> impl Strategy<Value = (usize, usize)> {
    (2..=max_n).prop_flat_map(|n| (Just(n), 1..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_invariants((n, d) in dims(12), seed in any::<u64>()) {
        let s = random_subspace(d, n, &mut seeded(seed)).unwrap();
        let p = s.projection_matrix();
        let m = p.matrix();
        prop_assert!((m - m.transpose()).amax() <= 1e-12);
        prop_assert!((m * m - m).amax() <= 1e-10);
        prop_assert!((p.trace() - d as f64).abs() <= 1e-10);
        prop_assert!(p.invariant_violation() <= 1e-10);
    }

    #[test]
    fn hs_distance_is_a_metric(n in 2usize..10, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let pick = |rng: &mut linsleeve::rng::SeededRng| {
            let d = 1 + (seed as usize % (n - 1));
            random_subspace(d, n, rng).unwrap().projection_matrix()
        };
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let ab = hs_distance(&a, &b).unwrap();
        let ba = hs_distance(&b, &a).unwrap();
        let bc = hs_distance(&b, &c).unwrap();
        let ac = hs_distance(&a, &c).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(hs_distance(&a, &a).unwrap() <= 1e-12);
    }

    #[test]
    fn gram_schmidt_is_idempotent(n in 1usize..10, k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(n);
        let g = gaussian_matrix(n, k, &mut seeded(seed));
        let vs: Vec<DVector<f64>> = g.column_iter().map(|c| c.into_owned()).collect();
        let once = gram_schmidt(&vs).unwrap();
        let twice = gram_schmidt(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn complement_sums_to_identity((n, d) in dims(12), seed in any::<u64>()) {
        let s = random_subspace(d, n, &mut seeded(seed)).unwrap();
        let c = orth_complement(&s).unwrap();
        prop_assert_eq!(c.dim(), n - d);
        let sum = s.projection_matrix().matrix() + c.projection_matrix().matrix();
        prop_assert!((sum - DMatrix::identity(n, n)).amax() <= 1e-10);
    }

    #[test]
    fn cubic_polynomials_are_reproduced(
        coeffs in prop::array::uniform4(-3.0f64..3.0),
        start in -2.0f64..2.0,
        h in 0.01f64..0.5,
        count in 5usize..40,
    ) {
        let q = |t: f64| coeffs[0] + t * (coeffs[1] + t * (coeffs[2] + t * coeffs[3]));
        let samples: Vec<(f64, f64)> = (0..count).map(|i| {
            let t = start + i as f64 * h;
            (t, q(t))
        }).collect();
        let p = quasi_interpolant(&samples, 3).unwrap();
        let end = start + (count - 1) as f64 * h;
        let scale = samples.iter().map(|s| s.1.abs()).fold(1.0, f64::max);
        for j in 0..=200 {
            let t = start + (end - start) * j as f64 / 200.0;
            prop_assert!((p.eval(t) - q(t)).abs() <= 1e-9 * scale, "t = {}", t);
        }
    }

    #[test]
    fn ray_profile_hits_samples_at_squared_abscissae(
        (n, d) in dims(8),
        m in 5usize..40,
        seed in any::<u64>(),
        profile in prop::sample::select(BuiltinProfile::ALL.to_vec()),
    ) {
        let mut rng = seeded(seed);
        let mut o = SleeveOracle::random(n, d, profile, &mut rng).unwrap();
        let theta = unit_vector(n, &mut rng);
        let g = profile_from_direction(&mut o, &theta, m).unwrap();
        let h = 1.0 / m as f64;
        for i in 0..=m {
            let t = i as f64 * h;
            let direct = o.evaluate(&(&theta * t));
            prop_assert!((g.eval(t * t) - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn exact_normals_keep_bookkeeping_orthonormal((n, d) in dims(10), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let o = SleeveOracle::random(n, n - d, BuiltinProfile::Tanh, &mut rng).unwrap();
        let core = orth_complement(o.hidden()).unwrap();
        let mut state = AtpeState::new(n);
        while state.dim() > d {
            let coords = state.sample_coords(&mut rng);
            let grad = state.basis().transpose() * o.analytic_gradient(&state.to_ambient(&coords));
            state.split(&grad).unwrap();
            prop_assert!(state.gram_deviation() <= 1e-10);
            let u = state.normals().last().unwrap();
            prop_assert!(core.project(u).norm() <= 1e-9);
        }
    }

    #[test]
    fn atpe_budget_ignores_the_profile((n, d) in dims(9), seed in any::<u64>()) {
        for profile in BuiltinProfile::ALL {
            let mut rng = seeded(seed);
            let mut o = SleeveOracle::random(n, n - d, profile, &mut rng).unwrap();
            let r = atpe(&mut o, d, 1e-3, &mut rng).unwrap();
            prop_assert_eq!(r.queries, atpe_query_budget(n, d));
            prop_assert_eq!(o.query_count(), r.queries);
        }
    }

    #[test]
    fn full_design_round_trip(n in 1usize..=12, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let d = 1 + (seed as usize) % n;
        let p = random_subspace(d, n, &mut rng).unwrap().projection_matrix();
        let back = reconstruct_from_full(&measure(&p, &full_design(n)).unwrap(), n).unwrap();
        prop_assert!((back.matrix() - p.matrix()).amax() <= 1e-10);
        prop_assert!((back.trace() - d as f64).abs() <= 1e-9);
    }

    #[test]
    fn complement_measurements((n, d) in dims(10), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_subspace(d, n, &mut rng).unwrap().projection_matrix();
        let design = reduced_design(n, d, &mut rng).unwrap();
        let a = measure(&p, &design).unwrap();
        let b = measure(&p.complement(), &design).unwrap();
        for ((x, u), v) in design.points().iter().zip(&a.values).zip(&b.values) {
            prop_assert!((x.norm_squared() - u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduced_design_round_trip((n, d) in dims(10), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_subspace(d, n, &mut rng).unwrap().projection_matrix();
        let design = reduced_design(n, d, &mut rng).unwrap();
        let back = reconstruct_from_reduced(&measure(&p, &design).unwrap(), &design, n, d).unwrap();
        prop_assert!(hs_distance(&back, &p).unwrap() <= 1e-8);
        prop_assert!(back.invariant_violation() <= 1e-9);
        prop_assert!((back.trace() - d as f64).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn objective_is_frame_invariant_and_frozen((n, d) in dims(8), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let mut o = SleeveOracle::random(n, d, BuiltinProfile::Sin5, &mut rng).unwrap();
        let prob = build_problem(&mut o, d, 16, full_design(n), &mut rng).unwrap();
        let frozen = o.query_count();
        let h = random_subspace(d, n, &mut rng).unwrap();
        let q = orthonormalize_frame(gaussian_matrix(d, d, &mut rng));
        let rotated = linsleeve::Subspace::from_frame(h.basis() * q).unwrap();
        let a = prob.objective(&h).unwrap();
        let b = prob.objective(&rotated).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
        let _ = prob.euclidean_gradient(h.basis()).unwrap();
        prop_assert_eq!(o.query_count(), frozen);
    }

    #[test]
    fn descent_cost_never_increases((n, d) in dims(8), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let g = gaussian_matrix(n, n, &mut rng);
        let a = &g + g.transpose();
        let start = random_subspace(d, n, &mut rng).unwrap();
        let params = SolverParams { max_iterations: 200, ..SolverParams::default() };
        let out = grassmann_steepest_descent(
            |y| (y.transpose() * &a * y).trace(),
            |y| &a * y * 2.0,
            &start,
            &params,
        ).unwrap();
        for w in out.costs.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn distinct_seeds_give_distinct_subspaces() {
    let mut distinct = 0;
    for s in 0..1000u64 {
        let a = random_subspace(2, 6, &mut seeded(derive_seed(9, &[s, 0]))).unwrap();
        let b = random_subspace(2, 6, &mut seeded(derive_seed(9, &[s, 1]))).unwrap();
        if a.hs_distance(&b).unwrap() > 1e-6 {
            distinct += 1;
        }
    }
    assert!(distinct >= 999, "{distinct}");
}

#[test]
fn harness_output_is_a_function_of_config_and_seed() {
    let text = "algorithm=ogm\nn_list=6\nd_list=1,2\nprofiles=tanh,sin5\nm_grid=8,16\ntrials=3\nseed=11\nrecord_timing=false";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let a = trials_csv(&run_trials(&cfg, Execution::Parallel).unwrap());
    let b = trials_csv(&run_trials(&cfg, Execution::Sequential).unwrap());
    let c = trials_csv(&run_trials(&ExperimentConfig::parse(text).unwrap(), Execution::Parallel).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
    let other = ExperimentConfig { seed: 12, ..cfg };
    assert_ne!(a, trials_csv(&run_trials(&other, Execution::Parallel).unwrap()));
}
