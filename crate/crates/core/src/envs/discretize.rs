use crate::error::{ForgerError, Result};
use crate::types::Action;

/// `k` uniformly spaced centers spanning [-1, 1].
pub fn bin_centers(k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(ForgerError::InvalidConfig(format!(
            "need at least 2 bins, got {k}"
        )));
    }
    let step = 2.0 / (k - 1) as f64;
    Ok((0..k).map(|i| -1.0 + step * i as f64).collect())
}

/// Nearest bin center to `thrust`; ties go to the lower index.
pub fn discretize(thrust: f64, k: usize) -> Result<Action> {
    let centers = bin_centers(k)?;
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (thrust - c).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(Action(best))
}
