mod oracle;

fn run(check: oracle::Check) {
    match check {
        Ok(detail) => println!("{detail}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn spline_matches_pyramidal_recurrence() {
    run(oracle::spline_oracle(1000));
}

#[test]
fn ray_cast_matches_closed_form() {
    run(oracle::lidar_oracle(1000));
}

#[test]
fn dropout_count_and_frequency() {
    run(oracle::dropout_oracle(10_000, 64, 50.0));
}

#[test]
fn fuzzed_episode_rewards_stay_bounded() {
    run(oracle::reward_fuzz(10_000));
}

#[test]
fn gae_matches_double_sum() {
    run(oracle::gae_oracle(100));
}

#[test]
fn backprop_matches_finite_differences() {
    run(oracle::gradient_check(50));
}

#[test]
fn critic_is_permutation_invariant() {
    run(oracle::permutation_invariance(100));
}

#[test]
fn mutual_information_recovers_closed_form() {
    run(oracle::mi_oracle(10_000));
}

#[test]
fn safety_distance_table() {
    run(oracle::safety_table());
}
