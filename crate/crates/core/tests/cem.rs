use mpt_core::baselines::{cem_plan, cem_reuse_plan, shift_sequence, CemOptimizer, CemParams};
use mpt_core::mdp::{ActionSet, BoxBounds, DynamicsModel, MdpError, RewardFn};
use mpt_core::{Action, MdpSpec, SimRng, State};
use rand::SeedableRng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// The state is just the clock.
struct Clock;

impl DynamicsModel for Clock {
    fn state_dim(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn step(&self, x: &State, _u: &Action) -> Result<State, MdpError> {
        Ok(x.add_scalar(1.0))
    }
}

/// `-(u - c(t))^2` with target `c(t) = start + drift * t`, where `t` is the
/// clock before the step.
struct Target {
    start: f64,
    drift: f64,
}

impl Target {
    fn at(&self, t: f64) -> f64 {
        self.start + self.drift * t
    }
}

impl RewardFn for Target {
    fn reward(&self, x: &State, u: &Action) -> Result<f64, MdpError> {
        Ok(-(u[0] - self.at(x[0] - 1.0)).powi(2))
    }
}

fn mdp(target: &Target) -> MdpSpec<'_> {
    let bounds = BoxBounds::symmetric(&[1.0]).unwrap();
    MdpSpec::new(BoxBounds::unbounded(1), bounds, 0.9, ActionSet::ContinuousBox, &Clock, target).unwrap()
}

fn params(population: usize, iterations: usize, elite_frac: f64, horizon: usize, std: f64) -> CemParams {
    CemParams {
        population,
        iterations,
        elite_frac,
        init_mean: vec![Action::zeros(1); horizon],
        init_std: vec![std],
        horizon,
    }
}

#[test]
fn quadratic_optimum_is_found() {
    let target = Target { start: 0.3, drift: 0.0 };
    let mdp = mdp(&target);
    for seed in 0..20 {
        let plan = cem_plan(&State::zeros(1), &mdp, &params(200, 10, 0.1, 1, 1.0), &mut SimRng::seed_from_u64(seed)).unwrap();
        assert!((plan.sequence[0][0] - 0.3).abs() <= 0.05, "seed {seed}: {}", plan.sequence[0][0]);
        assert_eq!(plan.rollouts, 2000);
        assert!((plan.value + (plan.sequence[0][0] - 0.3).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn no_selection_pressure_leaves_the_mean_near_its_start() {
    let target = Target { start: 0.9, drift: 0.0 };
    let mdp = mdp(&target);
    let mut opt = CemOptimizer::new(params(400, 1, 1.0, 1, 0.2)).unwrap();
    opt.iterate(&State::zeros(1), &mdp, &mut SimRng::seed_from_u64(3)).unwrap();
    // four standard errors of a 400-sample mean
    assert!(opt.mean()[0][0].abs() < 4.0 * 0.2 / 20.0);
    assert!((opt.std()[0][0] - 0.2).abs() < 0.03);
}

#[test]
fn fixed_seed_gives_identical_plans() {
    let target = Target { start: 0.3, drift: 0.1 };
    let mdp = mdp(&target);
    let p = params(50, 5, 0.2, 4, 0.5);
    let a = cem_plan(&State::zeros(1), &mdp, &p, &mut SimRng::seed_from_u64(8)).unwrap();
    let b = cem_plan(&State::zeros(1), &mdp, &p, &mut SimRng::seed_from_u64(8)).unwrap();
    assert_eq!(a.sequence, b.sequence);
    assert_eq!(a.value, b.value);
}

#[test]
fn reuse_from_zero_matches_a_cold_start() {
    let target = Target { start: 0.3, drift: 0.1 };
    let mdp = mdp(&target);
    let p = params(50, 5, 0.2, 4, 0.5);
    let cold = cem_plan(&State::zeros(1), &mdp, &p, &mut SimRng::seed_from_u64(1)).unwrap();
    let zeros = vec![Action::zeros(1); 4];
    let hot = cem_reuse_plan(&State::zeros(1), &mdp, &p, &zeros, &mut SimRng::seed_from_u64(1)).unwrap();
    assert_eq!(cold.sequence, hot.sequence);
    assert!(cem_reuse_plan(&State::zeros(1), &mdp, &p, &zeros[..3], &mut SimRng::seed_from_u64(1)).is_err());
}

/// Iterations until the first planned action is within `tol` of the target.
fn iterations_to_accuracy(init_mean: Vec<Action>, target: &Target, t: f64, rng: &mut SimRng) -> usize {
    let mdp = mdp(target);
    let p = CemParams {
        init_mean,
        ..params(30, 1, 0.2, 3, 0.4)
    };
    let mut opt = CemOptimizer::new(p).unwrap();
    let state = State::from_element(1, t);
    for it in 1..=40 {
        opt.iterate(&state, &mdp, rng).unwrap();
        if (opt.mean()[0][0] - target.at(t)).abs() < 0.02 {
            return it;
        }
    }
    41
}

#[test]
fn hot_start_tracks_a_drifting_optimum_faster() {
    let target = Target { start: 0.5, drift: 0.05 };
    let trials = 100;
    let mut differences = Vec::with_capacity(trials);
    for seed in 0..trials as u64 {
        let mut rng = SimRng::seed_from_u64(seed);
        let previous = cem_plan(&State::from_element(1, 5.0), &mdp(&target), &params(30, 15, 0.2, 3, 0.4), &mut rng)
            .unwrap()
            .sequence;
        let reuse = iterations_to_accuracy(shift_sequence(&previous), &target, 6.0, &mut rng);
        let cold = iterations_to_accuracy(vec![Action::zeros(1); 3], &target, 6.0, &mut rng);
        differences.push(cold as f64 - reuse as f64);
    }
    // paired one-sided t-test at the 1% level
    let n = trials as f64;
    let mean = differences.iter().sum::<f64>() / n;
    let var = differences.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = mean / (var / n).sqrt();
    let critical = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().inverse_cdf(0.99);
    assert!(mean > 0.0 && t > critical, "mean saving {mean}, t = {t}");
}
