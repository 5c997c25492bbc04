use mpt_core::control::bounds::{max_eigenvalue, min_eigenvalue};
use mpt_core::control::{
    contraction_rate, dare_residual, solve_dare, solve_dare_recursion, tracking_error_bound, verify_contraction,
    RiccatiSolution,
};
use mpt_core::SimRng;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

struct System {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut SimRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random 4-state, 2-input system; Gaussian `B` makes `(A, B)` controllable
/// with probability one, and `Q` is positive definite.
fn random_system(rng: &mut SimRng) -> System {
    let a = gaussian(4, 4, 0.6, rng);
    let b = gaussian(4, 2, 1.0, rng);
    let l = gaussian(4, 4, 0.5, rng);
    let q = DMatrix::identity(4, 4) * rng.random_range(0.2..2.0) + &l * l.transpose();
    let r = DMatrix::identity(2, 2) * rng.random_range(0.5..2.0);
    System { a, b, q, r }
}

#[test]
fn scalar_golden_ratio() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let m = solve_dare(&one, &one, &one, &one).unwrap();
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((m[(0, 0)] - 1.6180340).abs() <= 1e-7);
    assert!((m[(0, 0)] - golden).abs() <= 1e-12);
    let m_rec = solve_dare_recursion(&one, &one, &one, &one).unwrap();
    assert!((m_rec[(0, 0)] - golden).abs() <= 1e-10);
}

#[test]
fn random_systems_solve_and_contract() {
    let mut rng = SimRng::seed_from_u64(11);
    for trial in 0..100 {
        let s = random_system(&mut rng);
        let m = solve_dare(&s.a, &s.b, &s.q, &s.r).unwrap_or_else(|e| panic!("system {trial}: {e}"));
        assert!(dare_residual(&s.a, &s.b, &s.q, &s.r, &m) <= 1e-9, "system {trial}");
        assert!(min_eigenvalue(&m) > 0.0);

        // both routes land on the same stabilizing solution
        let m_rec = solve_dare_recursion(&s.a, &s.b, &s.q, &s.r).unwrap();
        assert!((&m - &m_rec).norm() / m.norm() < 1e-8, "system {trial}");

        let sol = RiccatiSolution::solve(&s.a, &s.b, &s.q, &s.r).unwrap();
        let alpha = contraction_rate(&s.q, max_eigenvalue(&sol.m)).unwrap();
        assert!(alpha < 1.0);
        assert!(verify_contraction(&sol.a_cl, &sol.m, alpha), "system {trial}");
    }
}

#[test]
fn disturbed_closed_loop_stays_inside_the_tracking_bound() {
    let sigma_bar = 0.1;
    let mut rng = SimRng::seed_from_u64(5);
    for _ in 0..5 {
        let s = random_system(&mut rng);
        let sol = RiccatiSolution::solve(&s.a, &s.b, &s.q, &s.r).unwrap();
        let mut e = gaussian(4, 1, 1.0, &mut rng).column(0).into_owned();
        let e0 = e.norm();
        for k in 1..=2000u32 {
            let dir: DVector<f64> = gaussian(4, 1, 1.0, &mut rng).column(0).into_owned();
            let sigma = dir.normalize() * sigma_bar * rng.random_range(0.0..=1.0);
            e = &sol.a_cl * e + sigma;
            let bound = tracking_error_bound(k, e0, sigma_bar, sol.alpha, sol.m_lower, sol.m_upper);
            assert!(e.norm() <= bound * (1.0 + 1e-12), "step {k}: {} > {bound}", e.norm());
        }
    }
}
