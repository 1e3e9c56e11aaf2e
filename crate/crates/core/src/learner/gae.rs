use crate::error::{Error, Result};

/// Generalized advantage estimation over one trajectory.
///
/// `bootstrap` is `V(s_T)` when the trajectory was cut by the horizon and 0
/// at a true terminal. Returns `(advantages, value_targets)`.
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "gae: {} rewards vs {} values",
            rewards.len(),
            values.len()
        )));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("gae: gamma {gamma} / lambda {lambda} outside [0, 1]")));
    }
    let t_len = rewards.len();
    let mut adv = vec![0.0; t_len];
    let mut acc = 0.0;
    for t in (0..t_len).rev() {
        let next = if t + 1 < t_len { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// Shifts and scales to zero mean and unit population std. Left unchanged
/// when the spread is degenerate.
pub fn standardize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-12 {
        xs.iter_mut().for_each(|x| *x -= mean);
        return;
    }
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
}
