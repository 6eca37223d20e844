//! Joint-distribution ("getting it right") checks for Gibbs samplers.
//!
//! A marginal-conditional simulator draws parameters and data directly from
//! the prior; a successive-conditional simulator alternates the sampler under
//! test with a fresh data draw. Both target the same joint, so the means of
//! any test function must agree. Chain draws are autocorrelated, so their
//! standard error comes from batch means.

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Variance of the sample mean of an autocorrelated series by batch means.
pub fn batch_means_var_of_mean(xs: &[f64], num_batches: usize) -> f64 {
    let size = xs.len() / num_batches;
    assert!(size >= 2, "series too short for {num_batches} batches");
    let means: Vec<f64> =
        (0..num_batches).map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    mean_var(&means).1 / num_batches as f64
}

/// Standardized difference between an i.i.d. sample and a chain sample.
pub fn geweke_z(forward: &[f64], chain: &[f64]) -> f64 {
    let (mf, vf) = mean_var(forward);
    let mg = chain.iter().sum::<f64>() / chain.len() as f64;
    let vg = batch_means_var_of_mean(chain, 50);
    let se = (vf / forward.len() as f64 + vg).sqrt();
    if se == 0.0 {
        if mf == mg {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (mf - mg) / se
    }
}

/// Named z-scores for a set of test functions.
#[derive(Debug, Clone)]
pub struct GewekeReport {
    pub scores: Vec<(String, f64)>,
}

impl GewekeReport {
    /// Builds scores from per-draw rows of test-function values.
    pub fn from_rows(names: &[String], forward: &[Vec<f64>], chain: &[Vec<f64>]) -> Self {
        let scores = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let f: Vec<f64> = forward.iter().map(|r| r[j]).collect();
                let g: Vec<f64> = chain.iter().map(|r| r[j]).collect();
                (name.clone(), geweke_z(&f, &g))
            })
            .collect();
        Self { scores }
    }

    pub fn max_abs(&self) -> f64 {
        self.scores.iter().map(|(_, z)| z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, bound: f64) -> bool {
        self.scores.iter().all(|(_, z)| z.abs() < bound)
    }
}

/// First and second moments of a vector of values, in a fixed order:
/// each value, then each square, then each pairwise product.
pub fn moment_features(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.extend(values.iter().map(|v| v * v));
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            out.push(values[i] * values[j]);
        }
    }
    out
}

pub fn moment_feature_names(names: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = names.iter().map(|n| n.to_string()).collect();
    out.extend(names.iter().map(|n| format!("{n}^2")));
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            out.push(format!("{}*{}", names[i], names[j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_streams_score_zero() {
        let xs: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        assert_eq!(geweke_z(&xs, &xs), 0.0);
    }

    #[test]
    fn shifted_chain_is_detected() {
        let mut rng = crate::rng::lane_rng(1, 0, 0, 0);
        let f: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let g: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() + 0.1).collect();
        assert!(geweke_z(&f, &g).abs() > 4.0);
    }

    #[test]
    fn feature_layout() {
        assert_eq!(moment_features(&[2.0, 3.0]), vec![2.0, 3.0, 4.0, 9.0, 6.0]);
        assert_eq!(moment_feature_names(&["a", "b"]), vec!["a", "b", "a^2", "b^2", "a*b"]);
    }
}
