//! Built-in invariant suite run by `pgmult selfcheck`.

use nalgebra::{dmatrix, dvector, DMatrix};
use pgmult::augmentation::{evidence_slice, GaussianPotential};
use pgmult::gaussian::{condition_diag, gp_conditional, lds_filter, GpSpec, Kernel, LdsParams, MvnParams};
use pgmult::polya_gamma::{pg_mean, pg_variance, sample_pg_int, PgParams};
use pgmult::rng::lane_rng;
use pgmult::stick_breaking::{
    log_jacobian_forward, log_jacobian_inverse, log_multinomial, log_multinomial_sb_slice, pi_sb, pi_sb_inv, pi_sb_vec, StickCoords,
};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Observed discrepancy.
    pub error: f64,
    pub tolerance: f64,
}

fn check(name: impl Into<String>, error: f64, tolerance: f64) -> Check {
    Check { name: name.into(), passed: error.is_finite() && error <= tolerance, error, tolerance }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn pg_means() -> Vec<Check> {
    let n = 20_000;
    let mut out = Vec::new();
    for (i, &(b, c)) in [(1u64, 0.0), (1, 2.0), (3, 0.5), (20, 8.0)].iter().enumerate() {
        let mut rng = lane_rng(0x5E1F, 0, 0, i as u64);
        let sum: f64 = (0..n).map(|_| sample_pg_int(b, c, &mut rng)).sum();
        let p = PgParams::new(b as f64, c).expect("valid");
        let se = (pg_variance(&p) / n as f64).sqrt();
        // error in standard errors
        out.push(check(format!("pg_mean_b{b}_c{c}"), (sum / n as f64 - pg_mean(&p)).abs() / se, 4.0));
    }
    out
}

/// Enumerates every count vector with `n` trials over `k` categories.
fn outcomes(n: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            outcomes(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn stick_breaking() -> Vec<Check> {
    let mut rng = lane_rng(0x5E1F, 1, 0, 0);
    let psi: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let pi = pi_sb_vec(&psi);
    let all = outcomes(5, 4);
    let total: f64 = all.iter().map(|x| log_multinomial_sb_slice(x, &psi).exp()).sum();
    let agree = all
        .iter()
        .map(|x| (log_multinomial_sb_slice(x, &psi) - log_multinomial(x, &pi)).abs())
        .fold(0.0, f64::max);
    let coords = StickCoords::from_slice(&psi).expect("finite");
    let simplex = pi_sb(&coords);
    let back = pi_sb_inv(&simplex).expect("interior point");
    let round = back.as_slice().iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let jac = (log_jacobian_forward(&coords) + log_jacobian_inverse(&simplex).expect("interior point")).abs();
    vec![
        check("sb_pmf_sums_to_one", (total - 1.0).abs(), 1e-9),
        check("sb_pmf_matches_multinomial", agree, 1e-10),
        check("sb_inverse_round_trip", round, 1e-10),
        check("sb_jacobians_reciprocal", jac, 1e-10),
    ]
}

fn gaussian() -> Vec<Check> {
    let prior = MvnParams::new(dvector![0.3, -0.2], dmatrix![1.0, 0.4; 0.4, 2.0]).expect("pd");
    let flat = condition_diag(&prior, &evidence_slice(&[0, 0, 0], &[0.0, 0.0])).expect("pd");
    let zero_ev = max_abs_diff(&flat.cov, &prior.cov).max((&flat.mean - &prior.mean).abs().max());

    let pot = GaussianPotential::new(dvector![0.8, 0.5], dvector![0.4, -0.1]).expect("valid");
    let post = condition_diag(&prior, &pot).expect("pd");
    let sinv = prior.cov.clone().try_inverse().expect("invertible");
    let direct_prec = &sinv + DMatrix::from_diagonal(&pot.precision);
    let direct_cov = direct_prec.try_inverse().expect("invertible");
    let direct_mean = &direct_cov * (&sinv * &prior.mean + &pot.linear);
    let cond = max_abs_diff(&post.cov, &direct_cov).max((&post.mean - direct_mean).abs().max());

    let params = LdsParams::<f64> { a: dmatrix![0.9], b: dmatrix![0.5], c_emit: dmatrix![1.0], mu0: dvector![0.3], sigma0: dmatrix![1.0] };
    let one = GaussianPotential::new(dvector![0.7], dvector![0.4]).expect("valid");
    let filt = lds_filter(&params, std::slice::from_ref(&one)).expect("filter");
    let direct = condition_diag(&MvnParams::new(dvector![0.3], dmatrix![1.0]).expect("pd"), &one).expect("pd");
    let lds = (filt.steps[0].mean[0] - direct.mean[0]).abs().max((filt.steps[0].cov[(0, 0)] - direct.cov[(0, 0)]).abs());

    let spec = GpSpec::new(Kernel::SquaredExponential { variance: 1.3, lengthscales: vec![0.7] }, dmatrix![0.0; 0.5; 1.5], vec![0.2])
        .expect("valid spec");
    let gp_post = gp_conditional(&spec, 0, &GaussianPotential::zeros(3)).expect("pd");
    let gp_prior = spec.prior(0);
    let gp = max_abs_diff(&gp_post.cov, &gp_prior.cov).max((&gp_post.mean - &gp_prior.mean).abs().max());

    vec![
        check("no_evidence_returns_prior", zero_ev, 1e-12),
        check("diagonal_conditioning_matches_dense", cond, 1e-10),
        check("lds_single_step_matches_conditioning", lds, 1e-12),
        check("gp_zero_evidence_is_prior", gp, 1e-10),
    ]
}

/// Runs every check; deterministic for a given build.
pub fn run_checks() -> Vec<Check> {
    let mut out = pg_means();
    out.extend(stick_breaking());
    out.extend(gaussian());
    out
}
