//! Pólya-gamma random variates.
//!
//! `PG(b, c)` is the law of `(1 / 2π²) Σ_k g_k / ((k - 1/2)² + c² / 4π²)` with
//! `g_k ~ Gamma(b, 1)` i.i.d. Sampling is tiered by the (integer) shape:
//!
//! * `b = 0` is the point mass at zero;
//! * `b = 1` uses the exact alternating-series rejection sampler of Devroye,
//!   as refined for the Pólya-gamma family;
//! * `2 <= b <= 20` sums `b` independent `PG(1, c)` draws;
//! * `b > 20` keeps the first [`APPROX_HEAD_TERMS`] gamma terms of the series
//!   exactly and replaces the remainder with a single gamma variate whose mean
//!   and variance match the remainder's, both summed numerically from the
//!   series.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{lit, log_norm_cdf, Real};

/// Largest shape drawn as an exact sum of `PG(1, c)` variates.
pub const EXACT_SUM_MAX_SHAPE: u64 = 20;

/// Series terms kept exactly by the large-shape approximation.
pub const APPROX_HEAD_TERMS: usize = 20;

/// Below this `|c|` the mean switches to its Taylor expansion.
pub const SMALL_TILT: f64 = 1e-4;

const TRUNC: f64 = 0.64;
const EXPLICIT_TAIL_TERMS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgParams<T> {
    /// Shape.
    pub b: T,
    /// Exponential tilt.
    pub c: T,
}

impl<T: Real> PgParams<T> {
    pub fn new(b: T, c: T) -> Result<Self> {
        let p = Self { b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b.is_finite() || self.b < T::zero() {
            return Err(Error::domain(format!("PG shape must be finite and >= 0, got {}", self.b)));
        }
        if !self.c.is_finite() {
            return Err(Error::domain(format!("PG tilt must be finite, got {}", self.c)));
        }
        Ok(())
    }
}

/// `E[ω] = b / (2c) · tanh(c / 2)`, continuous through `c = 0`.
pub fn pg_mean<T: Real>(params: &PgParams<T>) -> T {
    params.b * tanh_half_over(params.c)
}

/// `tanh(c/2) / (2c)`, i.e. the mean of `PG(1, c)`.
pub fn tanh_half_over<T: Real>(c: T) -> T {
    let c = c.abs();
    if c < lit(SMALL_TILT) {
        lit::<T>(0.25) * (T::one() - c * c / lit(12.0))
    } else {
        (c * lit(0.5)).tanh() / (c + c)
    }
}

/// Mean and variance of `PG(b, c)` summed term by term from the gamma series.
pub fn pg_moments_from_series(b: f64, c: f64) -> (f64, f64) {
    let (m, v) = series_moments(c.abs() / (2.0 * PI), 0);
    let s1 = 1.0 / (2.0 * PI * PI);
    (b * m * s1, b * v * s1 * s1)
}

pub fn pg_variance<T: Real>(params: &PgParams<T>) -> T {
    lit(pg_moments_from_series(params.b.as_f64(), params.c.as_f64()).1)
}

/// `(Σ_{k>skip} 1/d_k, Σ_{k>skip} 1/d_k²)` with `d_k = (k-1/2)² + a²`.
fn series_moments(a: f64, skip: usize) -> (f64, f64) {
    let a2 = a * a;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let end = skip + EXPLICIT_TAIL_TERMS;
    // accumulate smallest terms first
    for k in (skip + 1..=end).rev() {
        let h = k as f64 - 0.5;
        let d = h * h + a2;
        s1 += 1.0 / d;
        s2 += 1.0 / (d * d);
    }
    // midpoint rule: Σ_{k>M} f(k - 1/2) ≈ ∫_M^∞ f
    let m = end as f64;
    let r = a / m;
    let tail1 = if r < 1e-6 { (1.0 - r * r / 3.0) / m } else { r.atan() / a };
    let tail2 = if r < 0.1 {
        let r2 = r * r;
        (1.0 / 3.0 - 2.0 * r2 / 5.0 + 3.0 * r2 * r2 / 7.0 - 4.0 * r2 * r2 * r2 / 9.0) / (m * m * m)
    } else {
        (r.atan() / a - m / (m * m + a2)) / (2.0 * a2)
    };
    (s1 + tail1, s2 + tail2)
}

/// Draws `ω ~ PG(b, c)`.
pub fn sample_pg<T: Real, R: Rng + ?Sized>(params: &PgParams<T>, rng: &mut R) -> Result<T> {
    params.validate()?;
    let b = params.b.as_f64();
    if b.fract() != 0.0 {
        return Err(Error::domain(format!("PG sampling needs an integer shape, got {b}")));
    }
    Ok(lit(sample_pg_int(b as u64, params.c.as_f64(), rng)))
}

/// Integer-shape sampler used directly by the augmentation layer.
pub fn sample_pg_int<R: Rng + ?Sized>(b: u64, c: f64, rng: &mut R) -> f64 {
    match b {
        0 => 0.0,
        1..=EXACT_SUM_MAX_SHAPE => (0..b).map(|_| sample_pg1(c, rng)).sum(),
        _ => sample_pg_truncated(b as f64, c, rng),
    }
}

fn sample_pg_truncated<R: Rng + ?Sized>(b: f64, c: f64, rng: &mut R) -> f64 {
    let a = c.abs() / (2.0 * PI);
    let a2 = a * a;
    let scale = 1.0 / (2.0 * PI * PI);
    let mut head = 0.0;
    for k in 1..=APPROX_HEAD_TERMS {
        let h = k as f64 - 0.5;
        head += f64::draw_gamma(b, rng) / (h * h + a2);
    }
    let (m1, m2) = series_moments(a, APPROX_HEAD_TERMS);
    // remainder Σ g_k/d_k has mean b·m1 and variance b·m2
    let shape = b * m1 * m1 / m2;
    let tail = f64::draw_gamma(shape, rng) * (m2 / m1);
    scale * (head + tail)
}

/// Exact `PG(1, c)` draw.
pub fn sample_pg1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    // work with J*(1, z) = 4·PG(1, 2z)
    let z = 0.5 * c.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_exp = mass_texpon(z, fz);
    loop {
        let x = if f64::open01(rng) < p_exp {
            TRUNC + f64::exp1(rng) / fz
        } else {
            truncated_inv_gauss(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = f64::open01(rng) * s;
        let mut n = 0usize;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Probability of proposing from the exponential piece.
fn mass_texpon(z: f64, fz: f64) -> f64 {
    let t = TRUNC;
    let rt = (1.0 / t).sqrt();
    let b = rt * (t * z - 1.0);
    let a = -rt * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + log_norm_cdf(b);
    let xa = x0 + z + log_norm_cdf(a);
    let qdivp = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + qdivp)
}

/// Piecewise coefficients of the alternating series for the J*(1, 0) density.
fn series_coef(n: usize, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// Inverse Gaussian IG(1/z, 1) truncated to (0, TRUNC).
fn truncated_inv_gauss<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    if z < 1.0 / t {
        // mean beyond the truncation point: proposal from the z = 0 case
        loop {
            let (mut e1, mut e2) = (f64::exp1(rng), f64::exp1(rng));
            while e1 * e1 > 2.0 * e2 / t {
                e1 = f64::exp1(rng);
                e2 = f64::exp1(rng);
            }
            let x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            let alpha = (-0.5 * z * z * x).exp();
            if f64::open01(rng) <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y = f64::std_normal(rng);
            let y = y * y;
            let mut x = mu + 0.5 * mu * mu * y - 0.5 * mu * (4.0 * mu * y + (mu * y) * (mu * y)).sqrt();
            if f64::open01(rng) > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}
