//! Reproducible random streams and Brownian increments.
//!
//! The generator is a counter-based Philox-4x64-10 keyed by
//! `(seed, stream_id)`, so every Monte Carlo replicate owns an independent
//! stream whose output is a pure function of that pair — replicates can run
//! on any number of threads in any order and still produce identical
//! results. Gaussians come from the inverse normal CDF, which is monotone in
//! the uniform draw and therefore stable across platforms.
//!
//! Complex Brownian increments follow the convention that each matrix entry
//! has independent real and imaginary parts of variance `dt`, i.e.
//! `E[dW_ij conj(dW_ij)] = 2 dt`.

use num_complex::Complex64;

use crate::linalg::ComplexMatrix;
use crate::special::inv_normal_cdf;
use crate::{Error, Result};

const PHILOX_M0: u64 = 0xD2E7470EE14C6C93;
const PHILOX_M1: u64 = 0xCA5A826395121157;
const PHILOX_W0: u64 = 0x9E3779B97F4A7C15;
const PHILOX_W1: u64 = 0xBB67AE8584CAA73B;
const PHILOX_ROUNDS: usize = 10;

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let wide = (a as u128) * (b as u128);
    ((wide >> 64) as u64, wide as u64)
}

#[inline]
fn philox_block(counter: u64, key: [u64; 2]) -> [u64; 4] {
    let mut ctr = [counter, 0, 0, 0];
    let mut key = key;
    for _ in 0..PHILOX_ROUNDS {
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
        key = [
            key[0].wrapping_add(PHILOX_W0),
            key[1].wrapping_add(PHILOX_W1),
        ];
    }
    ctr
}

/// Seeded, splittable random stream. `substream(seed, i)` for distinct `i`
/// yields statistically independent sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u64; 2],
    counter: u64,
    buf: [u64; 4],
    buf_pos: usize,
    /// Deterministic drift-only mode: every draw is zero. Used to run the
    /// simulation kernels as plain ODE integrators in tests.
    silent: bool,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            key: [seed, stream_id],
            counter: 0,
            buf: [0; 4],
            buf_pos: 4,
            silent: false,
        }
    }

    /// A stream whose Gaussian draws are identically zero; turns every
    /// stochastic kernel into its drift ODE.
    pub fn zero() -> Self {
        Self {
            key: [0, 0],
            counter: 0,
            buf: [0; 4],
            buf_pos: 4,
            silent: true,
        }
    }

    pub fn is_zero_stream(&self) -> bool {
        self.silent
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        if self.silent {
            return 0;
        }
        if self.buf_pos == 4 {
            self.buf = philox_block(self.counter, self.key);
            self.counter = self.counter.wrapping_add(1);
            self.buf_pos = 0;
        }
        let v = self.buf[self.buf_pos];
        self.buf_pos += 1;
        v
    }

    /// Uniform draw strictly inside (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        if self.silent {
            return 0.5;
        }
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard Gaussian draw (inverse-CDF method).
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        if self.silent {
            return 0.0;
        }
        inv_normal_cdf(self.uniform())
    }

    /// Gaussian with standard deviation `sd`.
    #[inline]
    pub fn gaussian_sd(&mut self, sd: f64) -> f64 {
        self.gaussian() * sd
    }
}

/// Deterministic substream derivation; see [`RngStream::new`].
pub fn substream(seed: u64, replicate_id: u64) -> RngStream {
    RngStream::new(seed, replicate_id)
}

/// One complex Brownian matrix increment over a step of length `dt`.
#[derive(Debug, Clone)]
pub struct BrownianIncrement {
    pub dt: f64,
    pub dw: ComplexMatrix,
}

/// Draw an N×N complex Brownian increment: 2N² independent real Gaussians of
/// variance `dt` assembled as real/imaginary parts.
pub fn complex_bm_increment(
    stream: &mut RngStream,
    dim: usize,
    dt: f64,
) -> Result<BrownianIncrement> {
    if !(dt > 0.0) {
        return Err(Error::InvalidStep(format!("dt = {dt} must be positive")));
    }
    let mut dw = ComplexMatrix::zeros(dim);
    fill_complex_gaussian(&mut dw, stream, dt.sqrt());
    Ok(BrownianIncrement { dt, dw })
}

/// Fill `m` with independent complex Gaussian entries whose real and
/// imaginary parts each have standard deviation `sd`.
pub fn fill_complex_gaussian(m: &mut ComplexMatrix, stream: &mut RngStream, sd: f64) {
    for z in m.entries_mut() {
        let re = stream.gaussian() * sd;
        let im = stream.gaussian() * sd;
        *z = Complex64::new(re, im);
    }
}

/// Real Brownian increment: Gaussian of mean 0 and variance `dt`.
pub fn real_bm_increment(stream: &mut RngStream, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidStep(format!("dt = {dt} must be positive")));
    }
    Ok(stream.gaussian() * dt.sqrt())
}

/// A GUE-type Hermitian Gaussian matrix: diagonal entries real
/// `N(0, entry_var)`, off-diagonal complex with
/// `E|H_ij|^2 = entry_var` (real and imaginary parts of variance
/// `entry_var / 2` each). This is the short-time spread of Dyson-type
/// eigenvalue dynamics started from a fully degenerate point.
pub fn hermitian_gaussian(
    stream: &mut RngStream,
    dim: usize,
    entry_var: f64,
) -> crate::linalg::HermitianMatrix {
    let diag_sd = entry_var.sqrt();
    let off_sd = (entry_var / 2.0).sqrt();
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m.set(i, i, Complex64::new(stream.gaussian() * diag_sd, 0.0));
        for j in (i + 1)..dim {
            let z = Complex64::new(stream.gaussian() * off_sd, stream.gaussian() * off_sd);
            m.set(i, j, z);
            m.set(j, i, z.conj());
        }
    }
    crate::linalg::HermitianMatrix::symmetrized(&m)
}
