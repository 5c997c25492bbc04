use std::f64::consts::PI;

use mpt_core::pushcar::{
    car_step, env_step, signed_distance, CarAction, CarBarrelState, EnvParams, MAX_SPEED, MAX_STEER,
};
use proptest::prelude::*;

/// Largest distance any footprint vertex travels between two poses.
fn max_vertex_travel(before: &CarBarrelState, after: &CarBarrelState, params: &EnvParams) -> f64 {
    params
        .car_vertices(before.pose())
        .iter()
        .zip(params.car_vertices(after.pose()))
        .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
        .fold(0.0, f64::max)
}

fn check_step(state: CarBarrelState, action: CarAction, params: &EnvParams) -> Result<(), TestCaseError> {
    let (next, active) = env_step(&state, action, params).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let gap = signed_distance(next.barrel(), next.pose(), params);
    let moved = (next.x_o - state.x_o).hypot(next.y_o - state.y_o);

    prop_assert!(gap >= -1e-6, "penetration {gap}");
    prop_assert!(moved * gap.max(0.0) <= 1e-8, "moved {moved} with gap {gap}");
    prop_assert!(moved <= max_vertex_travel(&state, &next, params) + 1e-6);
    prop_assert!(next.theta > -PI && next.theta <= PI);

    let overlap = signed_distance(state.barrel(), car_step(&state, action, params), params) < 0.0;
    prop_assert_eq!(active, overlap);
    if !overlap {
        prop_assert_eq!(next.barrel(), state.barrel());
    }
    Ok(())
}

/// A barrel placed around the car so that many steps end in contact, with
/// the precondition that it does not start inside the footprint.
fn near_contact() -> impl Strategy<Value = (CarBarrelState, CarAction)> {
    (
        -2.0f64..2.0,
        -2.0f64..2.0,
        -PI..PI,
        0.0f64..2.0 * PI,
        0.0f64..0.6,
        -MAX_SPEED..MAX_SPEED,
        -MAX_STEER..MAX_STEER,
    )
        .prop_filter_map("barrel starts inside the car", |(x, y, theta, bearing, range, v, delta)| {
            let state = CarBarrelState::new(x, y, theta, x + range * bearing.cos(), y + range * bearing.sin());
            (signed_distance(state.barrel(), state.pose(), &EnvParams::default()) >= 0.0)
                .then_some((state, CarAction { v, delta }))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20_000))]

    #[test]
    fn contact_invariants((state, action) in near_contact()) {
        check_step(state, action, &EnvParams::default())?;
    }

    #[test]
    fn contact_invariants_on_discrete_actions((state, _) in near_contact(), index in 0usize..7) {
        let u = &mpt_core::pushcar::discrete_actions()[index];
        check_step(state, CarAction::from_vector(u), &EnvParams::default())?;
    }
}

#[test]
fn long_pushes_keep_invariants() {
    // chained steps reuse the post-contact state, so the precondition
    // carries over from one step to the next
    let params = EnvParams::default();
    let actions = mpt_core::pushcar::discrete_actions();
    let mut state = CarBarrelState::new(-0.4, 0.0, 0.0, 0.0, 0.0);
    let mut pushes = 0;
    for k in 0..2000 {
        let u = CarAction::from_vector(&actions[[1, 1, 3, 1, 4, 2, 1][k % 7]]);
        let (next, active) = env_step(&state, u, &params).unwrap();
        pushes += active as usize;
        assert!(signed_distance(next.barrel(), next.pose(), &params) >= -1e-6);
        state = next;
    }
    assert!(pushes > 100);
}
