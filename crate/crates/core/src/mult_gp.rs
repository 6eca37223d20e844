//! Multinomial Gaussian-process regression with stick-breaking outputs.
//!
//! Each of the `K - 1` stick coordinates is an independent GP over the inputs
//! sharing one kernel. Gibbs alternates joint GP draws of `ψ_{:,k}` given the
//! Pólya-gamma auxiliaries with auxiliary draws given `ψ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::augmentation::sample_aux_slice;
use crate::error::{Error, Result};
use crate::gaussian::{gp_conditional_with_gram, gp_predict_given_latent, gp_predict_marginal, mvn_sample, GpSpec, Kernel};
use crate::augmentation::GaussianPotential;
use crate::rng::Lanes;
use crate::scalar::{lit, Real};
use crate::stick_breaking::{kappa_slice, pi_sb_inv_slice, pi_sb_vec};

const BLOCK_PSI: u64 = 21;
const BLOCK_OMEGA: u64 = 22;
const BLOCK_PREDICT: u64 = 23;

fn lane(block: u64, idx: usize) -> u64 {
    (block << 40) | idx as u64
}

/// Counts observed at input locations: `M × D` inputs and `M × K` counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GpCountData<T: Real> {
    pub inputs: DMatrix<T>,
    pub counts: Vec<Vec<u64>>,
    pub categories: Vec<String>,
}

impl<T: Real> GpCountData<T> {
    pub fn new(inputs: DMatrix<T>, counts: Vec<Vec<u64>>, categories: Vec<String>) -> Result<Self> {
        if counts.is_empty() || counts.len() != inputs.nrows() {
            return Err(Error::Data(format!("{} input rows but {} count rows", inputs.nrows(), counts.len())));
        }
        let k = counts[0].len();
        if k == 0 || counts.iter().any(|c| c.len() != k) {
            return Err(Error::Data("every count row needs the same positive number of categories".into()));
        }
        if categories.len() != k {
            return Err(Error::Data(format!("{} category names for {k} count columns", categories.len())));
        }
        Ok(Self { inputs, counts, categories })
    }

    /// Reads a CSV with a header row, `input_dim` input columns, then counts.
    pub fn parse_csv(text: &str, input_dim: usize) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Data("CSV is empty".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.len() <= input_dim {
            return Err(Error::Data("CSV header has no count columns".into()));
        }
        let categories: Vec<String> = names[input_dim..].iter().map(|s| s.to_string()).collect();
        let mut inputs = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != names.len() {
                return Err(Error::Data(format!("row {} has {} cells, header has {}", i + 2, cells.len(), names.len())));
            }
            for c in &cells[..input_dim] {
                let v: f64 = c.parse().map_err(|_| Error::Data(format!("row {}: `{c}` is not a number", i + 2)))?;
                inputs.push(lit::<T>(v));
            }
            let row = cells[input_dim..]
                .iter()
                .map(|c| c.parse::<u64>().map_err(|_| Error::Data(format!("row {}: `{c}` is not a count", i + 2))))
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        let m = counts.len();
        Self::new(DMatrix::from_row_slice(m, input_dim, &inputs), counts, categories)
    }

    pub fn to_csv(&self, input_names: &[String]) -> String {
        let mut out = input_names.iter().chain(&self.categories).cloned().collect::<Vec<_>>().join(",");
        out.push('\n');
        for (m, row) in self.counts.iter().enumerate() {
            let mut cells: Vec<String> = self.inputs.row(m).iter().map(|v| v.to_string()).collect();
            cells.extend(row.iter().map(|c| c.to_string()));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn num_inputs(&self) -> usize {
        self.counts.len()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    /// Category totals pooled over all inputs.
    pub fn pooled_counts(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.num_categories()];
        for row in &self.counts {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    /// Keeps only the rows in `idx`.
    pub fn select(&self, idx: &[usize]) -> Self {
        let d = self.inputs.ncols();
        let inputs = DMatrix::from_fn(idx.len(), d, |i, j| self.inputs[(idx[i], j)]);
        Self { inputs, counts: idx.iter().map(|&i| self.counts[i].clone()).collect(), categories: self.categories.clone() }
    }
}

/// `π_SB⁻¹((x + 0.5) / (N + 0.5 K))`: stick coordinates of smoothed frequencies.
pub fn smoothed_logit_frequencies(counts: &[u64]) -> Vec<f64> {
    let k = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    let freq: Vec<f64> = counts.iter().map(|&c| (c as f64 + 0.5) / (total as f64 + 0.5 * k)).collect();
    pi_sb_inv_slice(&freq).expect("smoothed frequencies are strictly positive")
}

/// Per-output prior means matching the pooled training frequencies.
pub fn empirical_mean<T: Real>(data: &GpCountData<T>) -> Vec<T> {
    smoothed_logit_frequencies(&data.pooled_counts()).into_iter().map(lit).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultGpState<T: Real> {
    /// `M × (K - 1)`.
    pub psi: DMatrix<T>,
    pub omega: DMatrix<T>,
    pub spec: GpSpec<T>,
}

impl<T: Real> MultGpState<T> {
    /// Starts at the prior mean with zero auxiliaries and the empirical mean
    /// as the GP mean of every output.
    pub fn init(data: &GpCountData<T>, kernel: Kernel<T>) -> Result<Self> {
        let mean = empirical_mean(data);
        Self::with_mean(data, kernel, mean)
    }

    pub fn with_mean(data: &GpCountData<T>, kernel: Kernel<T>, mean: Vec<T>) -> Result<Self> {
        let dim = data.num_categories() - 1;
        if mean.len() != dim {
            return Err(Error::Data(format!("{} prior means for {dim} outputs", mean.len())));
        }
        let m = data.num_inputs();
        let psi = DMatrix::from_fn(m, dim, |_, k| mean[k]);
        let spec = GpSpec::new(kernel, data.inputs.clone(), mean)?;
        Ok(Self { psi, omega: DMatrix::zeros(m, dim), spec })
    }

    pub fn num_outputs(&self) -> usize {
        self.psi.ncols()
    }

    /// Evidence on output `k` across all inputs.
    pub fn potential(&self, data: &GpCountData<T>, k: usize) -> GaussianPotential<T> {
        let m = data.num_inputs();
        let linear = DVector::from_fn(m, |i, _| kappa_slice::<T>(&data.counts[i])[k]);
        GaussianPotential { precision: self.omega.column(k).into_owned(), linear }
    }
}

/// Redraws every `ψ_{:,k}` jointly from its GP conditional given `ω`, then `ω`.
pub fn multgp_gibbs_sweep<T: Real>(state: &mut MultGpState<T>, data: &GpCountData<T>, lanes: &Lanes, sweep: u64) -> Result<()> {
    let dim = state.num_outputs();
    if dim == 0 {
        return Ok(());
    }
    let gram = state.spec.gram();
    let columns: Result<Vec<DVector<T>>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let mut rng = lanes.rng(sweep, lane(BLOCK_PSI, k));
            let post = gp_conditional_with_gram(&state.spec, k, &gram, &state.potential(data, k))?;
            mvn_sample(&post, &mut rng)
        })
        .collect();
    for (k, col) in columns?.into_iter().enumerate() {
        state.psi.set_column(k, &col);
    }
    resample_omega(state, data, lanes, sweep);
    Ok(())
}

/// `ω_{m,k} ~ PG(N_{m,k}, ψ_{m,k})` for every input.
pub fn resample_omega<T: Real>(state: &mut MultGpState<T>, data: &GpCountData<T>, lanes: &Lanes, sweep: u64) {
    let rows: Vec<Vec<T>> = (0..data.num_inputs())
        .into_par_iter()
        .map(|m| {
            let mut rng = lanes.rng(sweep, lane(BLOCK_OMEGA, m));
            let psi: Vec<T> = state.psi.row(m).iter().copied().collect();
            sample_aux_slice(&data.counts[m], &psi, &mut rng)
        })
        .collect();
    for (m, row) in rows.into_iter().enumerate() {
        for (k, w) in row.into_iter().enumerate() {
            state.omega[(m, k)] = w;
        }
    }
}

/// Predictive simplex at one test input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexSummary {
    pub mean: Vec<f64>,
    pub top_k: Vec<usize>,
    pub bottom_k: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    /// `ψ_test` draws per retained auxiliary sample.
    pub draws_per_sample: usize,
    pub k: usize,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self { draws_per_sample: 200, k: 10 }
    }
}

/// Category indices ordered by descending value, ties by ascending index.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Category indices ordered by ascending value, ties by ascending index.
pub fn rank_ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

fn summarize(mean: Vec<f64>, k: usize) -> SimplexSummary {
    let k = k.min(mean.len());
    let top_k = rank_descending(&mean)[..k].to_vec();
    let bottom_k = rank_ascending(&mean)[..k].to_vec();
    SimplexSummary { mean, top_k, bottom_k }
}

/// Collapsed predictive simplex at each test input.
///
/// For every retained `ω` sample the training latents are integrated out
/// analytically, giving a Gaussian over `ψ_test` per output; the mixture over
/// samples is pushed through `π_SB` by Monte Carlo.
pub fn multgp_predict<T: Real>(
    spec: &GpSpec<T>,
    data: &GpCountData<T>,
    omega_samples: &[DMatrix<T>],
    test_inputs: &DMatrix<T>,
    opts: &PredictOptions,
    lanes: &Lanes,
) -> Result<Vec<SimplexSummary>> {
    if omega_samples.is_empty() {
        return Err(Error::domain("prediction needs at least one auxiliary sample"));
    }
    let dim = data.num_categories() - 1;
    let n_test = test_inputs.nrows();
    // marginal means and variances, indexed [sample][output] -> per test input
    let mut marginals: Vec<Vec<(Vec<T>, Vec<T>)>> = Vec::with_capacity(omega_samples.len());
    for omega in omega_samples {
        let per_output: Result<Vec<(Vec<T>, Vec<T>)>> = (0..dim)
            .into_par_iter()
            .map(|k| {
                let m = data.num_inputs();
                let linear = DVector::from_fn(m, |i, _| kappa_slice::<T>(&data.counts[i])[k]);
                let pot = GaussianPotential { precision: omega.column(k).into_owned(), linear };
                let pred = gp_predict_marginal(spec, k, &pot, test_inputs)?;
                Ok((pred.mean.iter().copied().collect(), (0..n_test).map(|j| pred.cov[(j, j)]).collect()))
            })
            .collect();
        marginals.push(per_output?);
    }
    let out = (0..n_test)
        .into_par_iter()
        .map(|j| {
            let mut rng = lanes.rng(0, lane(BLOCK_PREDICT, j));
            let mut acc = vec![0.0; dim + 1];
            let mut psi = vec![T::zero(); dim];
            for sample in &marginals {
                for _ in 0..opts.draws_per_sample {
                    for k in 0..dim {
                        let (mean, var) = (&sample[k].0, &sample[k].1);
                        psi[k] = mean[j] + var[j].max(T::zero()).sqrt() * T::std_normal(&mut rng);
                    }
                    for (a, p) in acc.iter_mut().zip(pi_sb_vec(&psi)) {
                        *a += p.as_f64();
                    }
                }
            }
            let n = (marginals.len() * opts.draws_per_sample) as f64;
            summarize(acc.into_iter().map(|a| a / n).collect(), opts.k)
        })
        .collect();
    Ok(out)
}

/// Overlap of predicted and realized top-`k` and bottom-`k` category sets.
pub fn topk_eval(predicted: &[f64], realized: &[u64], k: usize) -> Result<(usize, usize)> {
    if predicted.len() != realized.len() {
        return Err(Error::Data("prediction and realization have different lengths".into()));
    }
    if predicted.len() < 2 * k {
        return Err(Error::domain(format!("need at least {} categories for k = {k}", 2 * k)));
    }
    let real: Vec<f64> = realized.iter().map(|&c| c as f64).collect();
    let overlap = |a: &[usize], b: &[usize]| a.iter().filter(|i| b.contains(i)).count();
    let top = overlap(&rank_descending(predicted)[..k], &rank_descending(&real)[..k]);
    let bottom = overlap(&rank_ascending(predicted)[..k], &rank_ascending(&real)[..k]);
    Ok((top, bottom))
}

/// Frequencies of the nearest training input (latest row on ties).
pub fn static_baseline<T: Real>(data: &GpCountData<T>, test_inputs: &DMatrix<T>, k: usize) -> Vec<SimplexSummary> {
    (0..test_inputs.nrows())
        .map(|j| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for m in 0..data.num_inputs() {
                let d: f64 = (0..test_inputs.ncols())
                    .map(|c| (data.inputs[(m, c)] - test_inputs[(j, c)]).as_f64().powi(2))
                    .sum();
                if d <= best_d {
                    best_d = d;
                    best = m;
                }
            }
            let total: u64 = data.counts[best].iter().sum();
            let freq = data.counts[best].iter().map(|&c| c as f64 / total.max(1) as f64).collect();
            summarize(freq, k)
        })
        .collect()
}

/// GP interpolation of smoothed empirical stick coordinates, mapped back through `π_SB`.
pub fn raw_gp_baseline<T: Real>(
    data: &GpCountData<T>,
    kernel: Kernel<T>,
    test_inputs: &DMatrix<T>,
    k: usize,
) -> Result<Vec<SimplexSummary>> {
    let dim = data.num_categories() - 1;
    let spec = GpSpec::new(kernel, data.inputs.clone(), empirical_mean(data))?;
    let targets: Vec<Vec<f64>> = data.counts.iter().map(|c| smoothed_logit_frequencies(c)).collect();
    let mut psi_test = DMatrix::<T>::zeros(test_inputs.nrows(), dim);
    for out in 0..dim {
        let y = DVector::from_fn(data.num_inputs(), |m, _| lit::<T>(targets[m][out]));
        let pred = gp_predict_given_latent(&spec, out, &y, test_inputs)?;
        psi_test.set_column(out, &pred.mean);
    }
    Ok((0..test_inputs.nrows())
        .map(|j| {
            let psi: Vec<T> = psi_test.row(j).iter().copied().collect();
            summarize(pi_sb_vec(&psi).into_iter().map(|p| p.as_f64()).collect(), k)
        })
        .collect())
}

/// Keeps `n` of the `Σ x` items of a count vector uniformly without replacement.
pub fn thin_counts<R: Rng + ?Sized>(counts: &[u64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut total: u64 = counts.iter().sum();
    let mut left = n.min(total);
    let mut out = Vec::with_capacity(counts.len());
    for &c in counts {
        if left == 0 || c == 0 {
            out.push(0);
        } else if c == total {
            out.push(left);
            left = 0;
        } else {
            let h = Hypergeometric::new(total, c, left).expect("valid hypergeometric parameters").sample(rng);
            out.push(h);
            left -= h;
        }
        total -= c;
    }
    out
}

/// Draws `ψ` from the GP prior at `inputs` and counts with the given totals.
pub fn multgp_generate<T: Real, R: Rng + ?Sized>(
    spec: &GpSpec<T>,
    totals: &[u64],
    categories: Vec<String>,
    rng: &mut R,
) -> Result<(GpCountData<T>, DMatrix<T>)> {
    let m = spec.num_inputs();
    if totals.len() != m {
        return Err(Error::Data("one total per input is required".into()));
    }
    let dim = spec.mean.len();
    let mut psi = DMatrix::zeros(m, dim);
    for k in 0..dim {
        let col = mvn_sample(&spec.prior(k), rng)?;
        psi.set_column(k, &col);
    }
    let counts = (0..m)
        .map(|i| {
            let row: Vec<T> = psi.row(i).iter().copied().collect();
            sample_multinomial(totals[i], &pi_sb_vec(&row), rng)
        })
        .collect();
    Ok((GpCountData::new(spec.inputs.clone(), counts, categories)?, psi))
}

/// Multinomial draw through the stick-breaking binomial chain.
pub fn sample_multinomial<T: Real, R: Rng + ?Sized>(n: u64, pi: &[T], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; pi.len()];
    let mut left = n;
    let mut rem = 1.0;
    for (k, &p) in pi.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == pi.len() {
            out[k] = left;
            break;
        }
        let q = (p.as_f64() / rem).clamp(0.0, 1.0);
        let x = rand_distr::Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[k] = x;
        left -= x;
        rem -= p.as_f64();
        if rem <= 0.0 {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::lane_rng;
    use nalgebra::dmatrix;

    fn se_kernel(l: f64) -> Kernel<f64> {
        Kernel::SquaredExponential { variance: 1.0, lengthscales: vec![l] }
    }

    #[test]
    fn csv_round_trip() {
        let text = "year,a,b,c\n1990,3,0,1\n1991,2,2,2\n";
        let data = GpCountData::<f64>::parse_csv(text, 1).unwrap();
        assert_eq!(data.categories, vec!["a", "b", "c"]);
        assert_eq!(data.counts[1], vec![2, 2, 2]);
        assert_eq!(data.to_csv(&["year".into()]), text);
        assert!(GpCountData::<f64>::parse_csv("x,a\n1,2,3\n", 1).is_err());
        assert!(GpCountData::<f64>::parse_csv("x,a\n1,-2\n", 1).is_err());
    }

    #[test]
    fn single_category_sweep_is_identity() {
        let data = GpCountData::new(dmatrix![0.0; 1.0], vec![vec![4], vec![2]], vec!["a".into()]).unwrap();
        let mut state = MultGpState::init(&data, se_kernel(1.0)).unwrap();
        let before = state.clone();
        multgp_gibbs_sweep(&mut state, &data, &Lanes::new(1, 0), 1).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn auxiliaries_vanish_with_residual_counts() {
        let data = GpCountData::new(dmatrix![0.0; 1.0], vec![vec![4, 0, 0], vec![0, 0, 0]], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let mut state = MultGpState::init(&data, se_kernel(1.0)).unwrap();
        multgp_gibbs_sweep(&mut state, &data, &Lanes::new(2, 0), 1).unwrap();
        assert!(state.omega[(0, 0)] > 0.0);
        assert_eq!(state.omega[(0, 1)], 0.0);
        assert_eq!(state.omega.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
    }

    #[test]
    fn topk_examples() {
        let real = [9, 1, 7, 3, 5, 0];
        let exact: Vec<f64> = real.iter().map(|&c| c as f64).collect();
        assert_eq!(topk_eval(&exact, &real, 3).unwrap(), (3, 3));
        let reversed: Vec<f64> = exact.iter().map(|v| -v).collect();
        assert_eq!(topk_eval(&reversed, &real, 3).unwrap(), (0, 0));
        assert!(topk_eval(&exact, &real, 4).is_err());
    }

    #[test]
    fn topk_ties_use_ascending_index() {
        assert_eq!(rank_descending(&[1.0, 2.0, 2.0, 0.0]), vec![1, 2, 0, 3]);
        assert_eq!(rank_ascending(&[1.0, 0.0, 0.0, 3.0]), vec![1, 2, 0, 3]);
    }

    #[test]
    fn random_predictions_hit_about_k_squared_over_k() {
        use rand::seq::SliceRandom;
        let mut rng = lane_rng(3, 0, 0, 0);
        let real: Vec<u64> = (0..100).collect();
        let n = 20_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let mut pred: Vec<f64> = (0..100).map(|i| i as f64).collect();
            pred.shuffle(&mut rng);
            hits += topk_eval(&pred, &real, 10).unwrap().0;
        }
        // hypergeometric mean k·k/K = 1
        assert!((hits as f64 / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn thinning_keeps_requested_total() {
        let mut rng = lane_rng(4, 0, 0, 0);
        let counts = [1000, 0, 50, 3000, 7];
        for _ in 0..100 {
            let t = thin_counts(&counts, 50, &mut rng);
            assert_eq!(t.iter().sum::<u64>(), 50);
            assert!(t.iter().zip(&counts).all(|(a, b)| a <= b));
            assert_eq!(t[1], 0);
        }
        assert_eq!(thin_counts(&[2, 1], 10, &mut rng), vec![2, 1]);
    }

    #[test]
    fn multinomial_sampler_matches_probabilities() {
        let mut rng = lane_rng(5, 0, 0, 0);
        let pi = [0.1, 0.6, 0.0, 0.3];
        let mut acc = [0u64; 4];
        for _ in 0..2000 {
            let x = sample_multinomial(50, &pi, &mut rng);
            assert_eq!(x.iter().sum::<u64>(), 50);
            for (a, v) in acc.iter_mut().zip(x) {
                *a += v;
            }
        }
        assert_eq!(acc[2], 0);
        for (a, p) in acc.iter().zip(pi) {
            assert!((*a as f64 / 100_000.0 - p).abs() < 0.01);
        }
    }

    #[test]
    fn no_data_prediction_is_prior_pushforward() {
        let data = GpCountData::new(dmatrix![0.0; 1.0], vec![vec![0, 0, 0], vec![0, 0, 0]], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let state = MultGpState::with_mean(&data, se_kernel(1.0), vec![0.0, 0.0]).unwrap();
        let opts = PredictOptions { draws_per_sample: 50_000, k: 1 };
        let pred = multgp_predict(&state.spec, &data, &[state.omega.clone()], &dmatrix![0.5], &opts, &Lanes::new(6, 0)).unwrap();
        // ψ ~ N(0, 1) per coordinate: E[σ(ψ)] = 1/2 so the mean simplex is (1/2, 1/4, 1/4)
        for (a, b) in pred[0].mean.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 0.01);
        }
    }

    #[test]
    fn huge_counts_pin_prediction_to_frequencies() {
        let freq = [0.5, 0.3, 0.2];
        let counts: Vec<u64> = freq.iter().map(|f| (f * 1e5) as u64).collect();
        let data = GpCountData::new(dmatrix![0.0], vec![counts], vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let mut state = MultGpState::init(&data, se_kernel(1.0)).unwrap();
        let lanes = Lanes::new(7, 0);
        let mut samples = Vec::new();
        for s in 1..=60 {
            multgp_gibbs_sweep(&mut state, &data, &lanes, s).unwrap();
            if s > 10 && s % 5 == 0 {
                samples.push(state.omega.clone());
            }
        }
        let pred = multgp_predict(&state.spec, &data, &samples, &dmatrix![0.0], &PredictOptions { draws_per_sample: 200, k: 1 }, &lanes).unwrap();
        let tv: f64 = pred[0].mean.iter().zip(freq).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.01, "{:?}", pred[0].mean);
    }

    #[test]
    fn baselines_have_simplex_outputs() {
        let text = "t,a,b,c,d\n0,5,3,1,1\n1,4,4,1,1\n2,6,2,2,0\n";
        let data = GpCountData::<f64>::parse_csv(text, 1).unwrap();
        let test = dmatrix![3.0];
        let st = static_baseline(&data, &test, 2);
        assert_eq!(st[0].mean, vec![0.6, 0.2, 0.2, 0.0]);
        assert_eq!(st[0].top_k, vec![0, 1]);
        let raw = raw_gp_baseline(&data, se_kernel(2.0), &test, 2).unwrap();
        assert!((raw[0].mean.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
