mod common;

use ebmt::balance::{
    dual_gradient, dual_hessian, dual_objective, solve_weights, tilted_weights, SolverConfig,
};
use ebmt::data::{build_balance_problem, standardize, BalanceProblem};
use nalgebra::DVector;
use proptest::prelude::*;
use rand_distr::{Distribution, Uniform};

fn random_problem(seed: u64, n: usize, d: usize) -> (BalanceProblem, DVector<f64>) {
    let mut rng = common::rng(seed);
    let g = common::normal_matrix(&mut rng, n, d);
    let u = Uniform::new(0.1, 1.0).unwrap();
    let v: Vec<f64> = (0..n).map(|_| u.sample(&mut rng)).collect();
    let gamma = common::normal_matrix(&mut rng, d, 1).column(0).into_owned() * 0.7;
    (BalanceProblem::from_features(g, Some(&v)).unwrap(), gamma)
}

fn standardized_problem(seed: u64, n: usize, p: usize, q: usize) -> BalanceProblem {
    let mut rng = common::rng(seed);
    let raw = common::confounded_sample(&mut rng, n, p, q);
    let (s, _) = standardize(&raw).unwrap();
    build_balance_problem(&s, None).unwrap()
}

#[test]
fn objective_respects_jensen_bound() {
    for seed in 0..50 {
        let (problem, gamma) = random_problem(seed, 30, 4);
        let mean = problem.features().tr_mul(problem.base_weights());
        assert!(dual_objective(&gamma, &problem) >= -gamma.dot(&mean) - 1e-12);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let h = 1e-6;
    for seed in 0..20 {
        let (problem, gamma) = random_problem(seed, 25, 5);
        let grad = dual_gradient(&gamma, &problem);
        for k in 0..gamma.len() {
            let mut up = gamma.clone();
            let mut down = gamma.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (dual_objective(&up, &problem) - dual_objective(&down, &problem)) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-5,
                "seed {seed} coord {k}: {fd} vs {}",
                grad[k]
            );
        }
    }
}

#[test]
fn hessian_matches_finite_differences() {
    let h = 1e-6;
    for seed in 0..20 {
        let (problem, gamma) = random_problem(100 + seed, 25, 4);
        let hess = dual_hessian(&gamma, &problem);
        for k in 0..gamma.len() {
            let mut up = gamma.clone();
            let mut down = gamma.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (dual_gradient(&up, &problem) - dual_gradient(&down, &problem)) / (2.0 * h);
            for j in 0..gamma.len() {
                assert!((fd[j] - hess[(j, k)]).abs() < 1e-4);
            }
        }
        assert_eq!(hess, hess.transpose());
    }
}

#[test]
fn converged_weights_balance_the_sample() {
    let problem = standardized_problem(8, 800, 2, 5);
    let sol = solve_weights(&problem, &SolverConfig::default()).unwrap();
    assert!(sol.converged);
    let moments = problem.features().tr_mul(&sol.weights);
    assert!(moments.amax() < 1e-8);
    assert!((sol.weights.sum() - 1.0).abs() < 1e-12);
    assert!(sol.weights.min() > 0.0);
    assert_eq!(sol.weights, tilted_weights(&sol.gamma, &problem));
    for pair in sol.objective_history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-14);
    }
}

#[test]
fn solving_is_deterministic() {
    let problem = standardized_problem(9, 500, 3, 4);
    let a = solve_weights(&problem, &SolverConfig::default()).unwrap();
    let b = solve_weights(&problem, &SolverConfig::default()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn weights_follow_a_row_permutation(seed in any::<u64>(), rot in 1usize..99) {
        let problem = standardized_problem(seed, 120, 2, 3);
        let n = problem.n();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        let g = problem.features().select_rows(&perm);
        let permuted = BalanceProblem::from_features(g, None).unwrap();
        let a = solve_weights(&problem, &SolverConfig::default()).unwrap();
        let b = solve_weights(&permuted, &SolverConfig::default()).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            prop_assert!((b.weights[i] - a.weights[src]).abs() < 1e-12);
        }
    }

    #[test]
    fn base_weight_scale_is_irrelevant(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let problem = standardized_problem(seed, 100, 1, 3);
        let n = problem.n();
        let g = problem.features().clone();
        let uniform = BalanceProblem::from_features(g.clone(), Some(&vec![scale; n])).unwrap();
        let a = solve_weights(&problem, &SolverConfig::default()).unwrap();
        let b = solve_weights(&uniform, &SolverConfig::default()).unwrap();
        for i in 0..n {
            prop_assert!((a.weights[i] - b.weights[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn balanced_base_weights_are_a_fixed_point(seed in any::<u64>()) {
        let problem = standardized_problem(seed, 150, 2, 2);
        let first = solve_weights(&problem, &SolverConfig::default()).unwrap();
        let again = BalanceProblem::from_features(
            problem.features().clone(),
            Some(first.weights.as_slice()),
        ).unwrap();
        let second = solve_weights(&again, &SolverConfig::default()).unwrap();
        prop_assert!(second.iterations <= 1);
        for i in 0..problem.n() {
            prop_assert!((second.weights[i] - first.weights[i]).abs() < 1e-10 * first.weights.max());
        }
    }
}
