//! Generalized advantage estimation.

/// Advantages and return targets for one trajectory.
///
/// `dones[t]` marks a terminal transition (no bootstrapping through it);
/// `bootstrap` is the value of the state after the last transition and is
/// ignored when the last transition is terminal.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values must align with rewards");
    assert_eq!(dones.len(), n, "dones must align with rewards");
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let (a, r) = gae(&[1.0], &[0.5], &[false], 2.0, 0.9, 0.95);
        assert_eq!(a, vec![1.0 + 0.9 * 2.0 - 0.5]);
        assert_eq!(r, vec![1.0 + 0.9 * 2.0]);
        let (a, _) = gae(&[1.0], &[0.5], &[true], 2.0, 0.9, 0.95);
        assert_eq!(a, vec![0.5]);
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let r = [0.1, -0.2, 0.3];
        let v = [1.0, 2.0, 3.0];
        let (a, _) = gae(&r, &v, &[false; 3], 4.0, 0.9, 0.0);
        assert_eq!(a, vec![0.1 + 0.9 * 2.0 - 1.0, -0.2 + 0.9 * 3.0 - 2.0, 0.3 + 0.9 * 4.0 - 3.0]);
    }
}
