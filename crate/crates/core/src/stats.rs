//! Goodness-of-fit and estimation machinery: Kolmogorov–Smirnov tests with
//! asymptotic p-values, Lyapunov slope estimation by least squares, and
//! quadratic covariation summaries of matrix increments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::ComplexMatrix;
use crate::sde::Trajectory;
use crate::{Error, Result};

/// Default acceptance level for all statistical verdicts.
pub const DEFAULT_ALPHA: f64 = 0.001;
/// Minimum sample size for the asymptotic KS p-value to be trusted.
const MIN_KS_SAMPLE: usize = 100;

/// A batch of scalar observations with provenance metadata. Replicates
/// flagged during generation (for example tail integrals that hit the time
/// cap) must be excluded before construction and counted in `flagged`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub values: Vec<f64>,
    pub label: String,
    pub params_fingerprint: String,
    pub seed: u64,
    pub flagged: usize,
}

impl EmpiricalSample {
    pub fn new(
        values: Vec<f64>,
        label: impl Into<String>,
        params_fingerprint: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample contains non-finite value {bad}"
            )));
        }
        Ok(Self {
            values,
            label: label.into(),
            params_fingerprint: params_fingerprint.into(),
            seed,
            flagged: 0,
        })
    }

    pub fn with_flagged(mut self, flagged: usize) -> Self {
        self.flagged = flagged;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Outcome of a statistical test; serializes to JSON for the report files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    /// Asymptotic p-value; `None` for pure threshold verdicts (slopes,
    /// tolerance checks) where a p-value has no meaning.
    pub p_value: Option<f64>,
    pub n: Vec<usize>,
    pub alpha: f64,
    pub passed: bool,
    pub seed: u64,
    pub params_fingerprint: String,
}

impl TestReport {
    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "FAIL"
        }
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
///
/// Uses the alternating series for large λ and the dual theta series for
/// small λ, where the alternating form loses precision.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 1e-8 {
        return 1.0;
    }
    if lambda < 1.18 {
        let t = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 0..20 {
            let odd = (2 * k + 1) as f64;
            cdf += (-odd * odd * t).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        let mut sign = 1.0;
        for k in 1..=20 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sf += 2.0 * sign * term;
            sign = -sign;
            if term < 1e-18 {
                break;
            }
        }
        sf.clamp(0.0, 1.0)
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

// effective-size correction of the asymptotic KS argument
fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sqrt_n = effective_n.sqrt();
    kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

/// One-sample Kolmogorov–Smirnov test against a reference CDF.
pub fn ks_one_sample(
    sample: &EmpiricalSample,
    cdf: impl Fn(f64) -> f64,
) -> Result<TestReport> {
    ks_one_sample_at(sample, cdf, DEFAULT_ALPHA)
}

pub fn ks_one_sample_at(
    sample: &EmpiricalSample,
    cdf: impl Fn(f64) -> f64,
    alpha: f64,
) -> Result<TestReport> {
    let n = sample.len();
    if n < MIN_KS_SAMPLE {
        return Err(Error::InsufficientSample {
            needed: MIN_KS_SAMPLE,
            got: n,
        });
    }
    let xs = sorted(&sample.values);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let p = ks_p_value(d, nf);
    Ok(TestReport {
        name: format!("ks1:{}", sample.label),
        statistic: d,
        p_value: Some(p),
        n: vec![n],
        alpha,
        passed: p > alpha,
        seed: sample.seed,
        params_fingerprint: sample.params_fingerprint.clone(),
    })
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<TestReport> {
    ks_two_sample_at(a, b, DEFAULT_ALPHA)
}

pub fn ks_two_sample_at(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    alpha: f64,
) -> Result<TestReport> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < MIN_KS_SAMPLE || n2 < MIN_KS_SAMPLE {
        return Err(Error::InsufficientSample {
            needed: MIN_KS_SAMPLE,
            got: n1.min(n2),
        });
    }
    let xs = sorted(&a.values);
    let ys = sorted(&b.values);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let x = xs[i];
        let y = ys[j];
        let v = x.min(y);
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let p = if d == 0.0 { 1.0 } else { ks_p_value(d, ne) };
    Ok(TestReport {
        name: format!("ks2:{}|{}", a.label, b.label),
        statistic: d,
        p_value: Some(p),
        n: vec![n1, n2],
        alpha,
        passed: p > alpha,
        seed: a.seed,
        params_fingerprint: a.params_fingerprint.clone(),
    })
}

/// Least-squares slope of the top coordinate of an interacting path against
/// time, after discarding `burn_in` (a fraction of the horizon). The 95%
/// confidence half-width comes from the spread of at least 20 batch slopes
/// over the retained window.
pub fn lyapunov_slope(
    path: &Trajectory<Vec<f64>>,
    burn_in: f64,
) -> Result<(f64, f64)> {
    assert!((0.0..1.0).contains(&burn_in), "burn_in must be in [0,1)");
    let steps = path.grid.steps();
    let start = ((steps as f64) * burn_in).ceil() as usize;
    let horizon = path.grid.t_end() - path.grid.time(start);
    if horizon < 10.0 {
        return Err(Error::InsufficientHorizon {
            needed: 10.0,
            got: horizon,
        });
    }
    let top: Vec<(f64, f64)> = (start..=steps)
        .map(|k| (path.grid.time(k), *path.states[k].last().unwrap()))
        .collect();
    let slope = ols_slope(&top);

    const BATCHES: usize = 20;
    let per = top.len() / BATCHES;
    let mut batch_slopes = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let lo = b * per;
        let hi = if b + 1 == BATCHES { top.len() } else { lo + per };
        batch_slopes.push(ols_slope(&top[lo..hi]));
    }
    let mean: f64 = batch_slopes.iter().sum::<f64>() / BATCHES as f64;
    let var: f64 = batch_slopes
        .iter()
        .map(|s| (s - mean).powi(2))
        .sum::<f64>()
        / (BATCHES as f64 - 1.0);
    let ci95 = 2.1 * (var / BATCHES as f64).sqrt(); // t_{0.975,19} ≈ 2.09
    Ok((slope, ci95))
}

/// Mean slope and 95% half-width across replicate paths (t-interval).
pub fn lyapunov_slope_ensemble(
    paths: &[Trajectory<Vec<f64>>],
    burn_in: f64,
) -> Result<(f64, f64)> {
    if paths.len() < 20 {
        return Err(Error::InsufficientSample {
            needed: 20,
            got: paths.len(),
        });
    }
    let mut slopes = Vec::with_capacity(paths.len());
    for p in paths {
        slopes.push(lyapunov_slope(p, burn_in)?.0);
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, 2.0 * (var / n).sqrt()))
}

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_t: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, y) in points {
        num += (t - mean_t) * (y - mean_y);
        den += (t - mean_t) * (t - mean_t);
    }
    num / den
}

/// Empirical quadratic covariation of a batch of matrix increments:
/// componentwise means and standard errors of
/// `(dΓ)_{ij} conj(dΓ)_{i'j'} / dt` and `(dΓ)_{ij} (dΓ)_{i'j'} / dt`.
///
/// For a complex Brownian matrix the first family concentrates on
/// `2 δ_{ii'} δ_{jj'}` and the second on zero.
#[derive(Debug, Clone)]
pub struct CovariationSummary {
    pub dim: usize,
    pub samples: usize,
    /// mean of products against the conjugate, indexed `[(ij), (i'j')]`
    pub conj_mean: Vec<Complex64>,
    pub conj_se: Vec<f64>,
    /// mean of plain products
    pub plain_mean: Vec<Complex64>,
    pub plain_se: Vec<f64>,
}

impl CovariationSummary {
    #[inline]
    fn flat(dim: usize, i: usize, j: usize, i2: usize, j2: usize) -> usize {
        ((i * dim + j) * dim + i2) * dim + j2
    }

    pub fn conj_product(&self, i: usize, j: usize, i2: usize, j2: usize) -> (Complex64, f64) {
        let k = Self::flat(self.dim, i, j, i2, j2);
        (self.conj_mean[k], self.conj_se[k])
    }

    pub fn plain_product(&self, i: usize, j: usize, i2: usize, j2: usize) -> (Complex64, f64) {
        let k = Self::flat(self.dim, i, j, i2, j2);
        (self.plain_mean[k], self.plain_se[k])
    }

    /// Largest componentwise deviation from the complex-Brownian pattern
    /// (`2 δδ` against the conjugate, zero otherwise), in units of the
    /// corresponding standard error.
    pub fn max_deviation_in_se(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for i2 in 0..d {
                    for j2 in 0..d {
                        let k = Self::flat(d, i, j, i2, j2);
                        let expect = if i == i2 && j == j2 { 2.0 } else { 0.0 };
                        let se = self.conj_se[k].max(1e-300);
                        worst = worst.max((self.conj_mean[k].re - expect).abs() / se);
                        worst = worst.max(self.conj_mean[k].im.abs() / se);
                        let se = self.plain_se[k].max(1e-300);
                        worst = worst.max(self.plain_mean[k].norm() / se);
                    }
                }
            }
        }
        worst
    }
}

/// Estimate the covariation summary from at least 1000 increments over steps
/// of length `dt`.
pub fn covariation_matrix(increments: &[ComplexMatrix], dt: f64) -> Result<CovariationSummary> {
    const MIN_INCREMENTS: usize = 1000;
    if increments.len() < MIN_INCREMENTS {
        return Err(Error::InsufficientSample {
            needed: MIN_INCREMENTS,
            got: increments.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidStep(format!("dt = {dt} must be positive")));
    }
    let dim = increments[0].dim();
    let len = dim * dim * dim * dim;
    let n = increments.len() as f64;
    let mut conj_sum = vec![Complex64::new(0.0, 0.0); len];
    let mut conj_sq = vec![0.0f64; len]; // sum of |value|^2 componentwise max proxy
    let mut conj_sq_im = vec![0.0f64; len];
    let mut plain_sum = vec![Complex64::new(0.0, 0.0); len];
    let mut plain_sq = vec![0.0f64; len];
    let mut plain_sq_im = vec![0.0f64; len];
    for inc in increments {
        assert_eq!(inc.dim(), dim, "increment dimension mismatch");
        for i in 0..dim {
            for j in 0..dim {
                let a = inc.get(i, j);
                for i2 in 0..dim {
                    for j2 in 0..dim {
                        let b = inc.get(i2, j2);
                        let k = CovariationSummary::flat(dim, i, j, i2, j2);
                        let c = a * b.conj() / dt;
                        conj_sum[k] += c;
                        conj_sq[k] += c.re * c.re;
                        conj_sq_im[k] += c.im * c.im;
                        let p = a * b / dt;
                        plain_sum[k] += p;
                        plain_sq[k] += p.re * p.re;
                        plain_sq_im[k] += p.im * p.im;
                    }
                }
            }
        }
    }
    let mut conj_mean = Vec::with_capacity(len);
    let mut conj_se = Vec::with_capacity(len);
    let mut plain_mean = Vec::with_capacity(len);
    let mut plain_se = Vec::with_capacity(len);
    for k in 0..len {
        let m = conj_sum[k] / n;
        let var_re = (conj_sq[k] / n - m.re * m.re).max(0.0);
        let var_im = (conj_sq_im[k] / n - m.im * m.im).max(0.0);
        conj_mean.push(m);
        conj_se.push((var_re.max(var_im) / n).sqrt());
        let m = plain_sum[k] / n;
        let var_re = (plain_sq[k] / n - m.re * m.re).max(0.0);
        let var_im = (plain_sq_im[k] / n - m.im * m.im).max(0.0);
        plain_mean.push(m);
        plain_se.push((var_re.max(var_im) / n).sqrt());
    }
    Ok(CovariationSummary {
        dim,
        samples: increments.len(),
        conj_mean,
        conj_se,
        plain_mean,
        plain_se,
    })
}
