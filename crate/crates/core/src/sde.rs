//! Euler–Maruyama integration of the matrix and scalar processes on uniform
//! time grids.
//!
//! All kernels are pure functions of `(params, grid, stream)`. Hermitian
//! states stay exactly Hermitian: each step is assembled from symmetrized
//! pieces, so conjugate symmetry holds bit-for-bit along the whole path.

use num_complex::Complex64;

use crate::linalg::{hermitian_part, psd_sqrt, ComplexMatrix, HermitianMatrix};
use crate::rng::{complex_bm_increment, hermitian_gaussian, RngStream};
use crate::{Error, Result};

/// Entry-magnitude ceiling; far below f64 overflow so failures carry context.
pub const OVERFLOW_LIMIT: f64 = 1e150;
/// Coordinates closer than this are treated as collided.
const COLLISION_GAP: f64 = 1e-12;
/// Maximum local step halvings before a collision is reported.
const MAX_HALVINGS: usize = 20;
/// Default number of grid steps when only a horizon is given.
pub const DEFAULT_STEPS: usize = 4096;

/// Model parameters `(N, s)`. The drift constants ν and μ are always derived:
/// `ν = Re(s) + N/2` and `μ = √2 · Im(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n: usize,
    s_re: f64,
    s_im: f64,
}

impl ModelParams {
    pub fn new(n: usize, s_re: f64, s_im: f64) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        assert!(s_re.is_finite() && s_im.is_finite());
        Self { n, s_re, s_im }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn s_re(&self) -> f64 {
        self.s_re
    }

    #[inline]
    pub fn s_im(&self) -> f64 {
        self.s_im
    }

    #[inline]
    pub fn s(&self) -> Complex64 {
        Complex64::new(self.s_re, self.s_im)
    }

    /// ν = Re(s) + N/2.
    #[inline]
    pub fn nu(&self) -> f64 {
        self.s_re + self.n as f64 / 2.0
    }

    /// μ = √2 · Im(s).
    #[inline]
    pub fn mu(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.s_im
    }

    /// Integrability of the invariant law and of the infinite-horizon
    /// functionals requires Re(s) > -1/2.
    pub fn require_integrable(&self) -> Result<()> {
        if self.s_re > -0.5 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "Re(s) = {} must exceed -1/2 for infinite-horizon functionals",
                self.s_re
            )))
        }
    }
}

/// Uniform time grid on `[t0, t_end]` with `steps` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    t0: f64,
    t_end: f64,
    steps: usize,
}

impl PathGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidStep(format!(
                "grid [{t0}, {t_end}] is not a positive interval"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidStep("grid needs at least one step".into()));
        }
        Ok(Self { t0, t_end, steps })
    }

    /// Grid with steps chosen so the step size is (nearly) `h`.
    pub fn from_step(t0: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidStep(format!("h = {h} must be positive")));
        }
        let steps = ((t_end - t0) / h).round().max(1.0) as usize;
        Self::new(t0, t_end, steps)
    }

    /// Grid at the default resolution of 4096 steps.
    pub fn default_resolution(t0: f64, t_end: f64) -> Result<Self> {
        Self::new(t0, t_end, DEFAULT_STEPS)
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn step_size(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step_size()
    }
}

/// A simulated path: `states[k]` is the state at `grid.time(k)`, and the
/// driving increments are retained when a coupled experiment needs them.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub grid: PathGrid,
    pub states: Vec<S>,
    pub increments: Option<Vec<ComplexMatrix>>,
}

impl<S> Trajectory<S> {
    pub fn terminal(&self) -> &S {
        self.states.last().expect("trajectory has initial state")
    }
}

/// Sign of the drift ±ν in the linear matrix equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSign {
    Positive,
    Negative,
}

impl DriftSign {
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            DriftSign::Positive => 1.0,
            DriftSign::Negative => -1.0,
        }
    }
}

fn guard_overflow(m: &ComplexMatrix, t: f64) -> Result<()> {
    let worst = m.max_abs();
    if !worst.is_finite() || worst > OVERFLOW_LIMIT {
        return Err(Error::Overflow(t));
    }
    Ok(())
}

/// Matrix exponential Brownian motion with drift `±ν`:
/// `M_{k+1} = M_k + (1/√2) M_k ΔW_k + (±ν) M_k h`, started from the identity.
pub fn simulate_exp_bm(
    params: &ModelParams,
    drift_sign: DriftSign,
    grid: &PathGrid,
    stream: &mut RngStream,
    retain_noise: bool,
) -> Result<Trajectory<ComplexMatrix>> {
    let n = params.dim();
    let h = grid.step_size();
    let mut increments = Vec::with_capacity(if retain_noise { grid.steps() } else { 0 });
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(ComplexMatrix::identity(n));
    let mut current = ComplexMatrix::identity(n);
    let mut step_mat = ComplexMatrix::zeros(n);
    let mut next = ComplexMatrix::zeros(n);
    let drift = drift_sign.factor() * params.nu() * h;
    for k in 0..grid.steps() {
        let dw = complex_bm_increment(stream, n, h)?.dw;
        linear_step(&current, &dw, drift, &mut step_mat, &mut next);
        guard_overflow(&next, grid.time(k + 1))?;
        std::mem::swap(&mut current, &mut next);
        states.push(current.clone());
        if retain_noise {
            increments.push(dw);
        }
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        increments: if retain_noise { Some(increments) } else { None },
    })
}

/// Same recursion driven by externally supplied Brownian increments, for
/// coupled-grid and coupled-noise experiments.
pub fn simulate_exp_bm_driven(
    params: &ModelParams,
    drift_sign: DriftSign,
    grid: &PathGrid,
    increments: &[ComplexMatrix],
) -> Result<Trajectory<ComplexMatrix>> {
    let n = params.dim();
    if increments.len() != grid.steps() {
        return Err(Error::InvalidInput(format!(
            "need {} increments, got {}",
            grid.steps(),
            increments.len()
        )));
    }
    let h = grid.step_size();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(ComplexMatrix::identity(n));
    let mut current = ComplexMatrix::identity(n);
    let mut step_mat = ComplexMatrix::zeros(n);
    let mut next = ComplexMatrix::zeros(n);
    let drift = drift_sign.factor() * params.nu() * h;
    for (k, dw) in increments.iter().enumerate() {
        linear_step(&current, dw, drift, &mut step_mat, &mut next);
        guard_overflow(&next, grid.time(k + 1))?;
        std::mem::swap(&mut current, &mut next);
        states.push(current.clone());
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        increments: None,
    })
}

// next = current * (I + dW/√2 + drift·I)
pub(crate) fn linear_step(
    current: &ComplexMatrix,
    dw: &ComplexMatrix,
    drift: f64,
    step_mat: &mut ComplexMatrix,
    next: &mut ComplexMatrix,
) {
    let n = current.dim();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in 0..n {
            let mut v = dw.get(i, j).scale(inv_sqrt2);
            if i == j {
                v += Complex64::new(1.0 + drift, 0.0);
            }
            step_mat.set(i, j, v);
        }
    }
    current.mul_into(step_mat, next);
}

/// Couple the forward recursion for `M` (drift +ν) and the recursion for its
/// inverse to the same noise:
/// `R_{k+1} = R_k - (1/√2) ΔW_k R_k - ν R_k h`.
///
/// Returns the pair `(M path, M^{-1} path)`.
pub fn simulate_inverse_pair(
    params: &ModelParams,
    grid: &PathGrid,
    stream: &mut RngStream,
    retain_noise: bool,
) -> Result<(Trajectory<ComplexMatrix>, Trajectory<ComplexMatrix>)> {
    let n = params.dim();
    let h = grid.step_size();
    let mut dws = Vec::with_capacity(grid.steps());
    for _ in 0..grid.steps() {
        dws.push(complex_bm_increment(stream, n, h)?.dw);
    }
    let (fwd, inv) = inverse_pair_driven(params, grid, &dws)?;
    let fwd = Trajectory {
        increments: if retain_noise {
            Some(dws)
        } else {
            None
        },
        ..fwd
    };
    Ok((fwd, inv))
}

/// Inverse-pair recursion driven by supplied increments.
pub fn inverse_pair_driven(
    params: &ModelParams,
    grid: &PathGrid,
    increments: &[ComplexMatrix],
) -> Result<(Trajectory<ComplexMatrix>, Trajectory<ComplexMatrix>)> {
    let n = params.dim();
    if increments.len() != grid.steps() {
        return Err(Error::InvalidInput(format!(
            "need {} increments, got {}",
            grid.steps(),
            increments.len()
        )));
    }
    let h = grid.step_size();
    let nu_h = params.nu() * h;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    let mut m_states = Vec::with_capacity(grid.steps() + 1);
    let mut r_states = Vec::with_capacity(grid.steps() + 1);
    m_states.push(ComplexMatrix::identity(n));
    r_states.push(ComplexMatrix::identity(n));
    let mut m = ComplexMatrix::identity(n);
    let mut r = ComplexMatrix::identity(n);
    let mut step_mat = ComplexMatrix::zeros(n);
    let mut next = ComplexMatrix::zeros(n);
    for (k, dw) in increments.iter().enumerate() {
        let t_next = grid.time(k + 1);
        linear_step(&m, dw, nu_h, &mut step_mat, &mut next);
        guard_overflow(&next, t_next)?;
        std::mem::swap(&mut m, &mut next);
        m_states.push(m.clone());

        // R_{k+1} = (I - dW/√2 - νh·I) R_k
        for i in 0..n {
            for j in 0..n {
                let mut v = -dw.get(i, j).scale(inv_sqrt2);
                if i == j {
                    v += Complex64::new(1.0 - nu_h, 0.0);
                }
                step_mat.set(i, j, v);
            }
        }
        step_mat.mul_into(&r, &mut next);
        guard_overflow(&next, t_next)?;
        std::mem::swap(&mut r, &mut next);
        r_states.push(r.clone());
    }
    Ok((
        Trajectory {
            grid: *grid,
            states: m_states,
            increments: None,
        },
        Trajectory {
            grid: *grid,
            states: r_states,
            increments: None,
        },
    ))
}

/// Drift of the Hermitian matrix diffusion:
/// `(-N - 2 Re(s)) X + 2 Im(s) I + Tr(X) I`.
pub fn hp_drift(params: &ModelParams, x: &HermitianMatrix) -> HermitianMatrix {
    let n = params.dim();
    let linear = x.scale_real(-(n as f64) - 2.0 * params.s_re());
    let constant =
        HermitianMatrix::identity_scaled(n, 2.0 * params.s_im() + x.trace_real());
    linear.add(&constant)
}

/// Hermitian matrix diffusion
/// `dX = dΓ √((I+X²)/2) + √((I+X²)/2) dΓ† + drift(X) dt`.
///
/// The diffusion term is assembled as `T + T†` with `T = ΔΓ S`, so every
/// state is exactly Hermitian.
pub fn simulate_hp_diffusion(
    params: &ModelParams,
    x0: &HermitianMatrix,
    grid: &PathGrid,
    stream: &mut RngStream,
    retain_noise: bool,
) -> Result<Trajectory<HermitianMatrix>> {
    let n = params.dim();
    let h = grid.step_size();
    let mut gammas = Vec::with_capacity(grid.steps());
    for _ in 0..grid.steps() {
        gammas.push(complex_bm_increment(stream, n, h)?.dw);
    }
    let traj = hp_diffusion_driven(params, x0, grid, &gammas)?;
    Ok(Trajectory {
        increments: if retain_noise { Some(gammas) } else { None },
        ..traj
    })
}

/// Hermitian matrix diffusion driven by supplied Γ increments.
pub fn hp_diffusion_driven(
    params: &ModelParams,
    x0: &HermitianMatrix,
    grid: &PathGrid,
    gammas: &[ComplexMatrix],
) -> Result<Trajectory<HermitianMatrix>> {
    let n = params.dim();
    assert_eq!(x0.dim(), n, "initial condition dimension mismatch");
    if gammas.len() != grid.steps() {
        return Err(Error::InvalidInput(format!(
            "need {} increments, got {}",
            grid.steps(),
            gammas.len()
        )));
    }
    let h = grid.step_size();
    let identity = HermitianMatrix::identity(n);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    let mut diff_term = ComplexMatrix::zeros(n);
    for (k, dg) in gammas.iter().enumerate() {
        let arg = x.square().add(&identity).scale_real(0.5);
        let s = psd_sqrt(&arg)?;
        dg.mul_into(s.as_matrix(), &mut diff_term);
        let x_next = x
            .add(&hermitian_part(&diff_term).scale_real(2.0))
            .add(&hp_drift(params, &x).scale_real(h));
        guard_overflow(x_next.as_matrix(), grid.time(k + 1))?;
        x = x_next;
        states.push(x.clone());
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        increments: None,
    })
}

/// Full drift of coordinate `i` of the eigenvalue system, interaction
/// included.
pub fn eigen_drift(params: &ModelParams, x: &[f64], i: usize) -> f64 {
    let n = params.dim() as f64;
    let mut d = 2.0 * params.s_im() + (2.0 - 2.0 * n - 2.0 * params.s_re()) * x[i];
    for (j, &xj) in x.iter().enumerate() {
        if j != i {
            d += 2.0 * (1.0 + x[i] * x[i]) / (x[i] - xj);
        }
    }
    d
}

/// Eigenvalue dynamics of the Hermitian matrix diffusion:
/// `dx_i = √(2(1+x_i²)) dβ_i + [2 Im(s) + (2-2N-2Re(s)) x_i
///          + Σ_{j≠i} 2(1+x_i²)/(x_i-x_j)] dt`.
///
/// `x0` must be strictly ascending, or fully degenerate (all coordinates
/// equal) in which case the first step samples the exact short-time
/// Gaussian-ensemble spread of the repelling coordinates.
pub fn simulate_eigen_system(
    params: &ModelParams,
    x0: &[f64],
    grid: &PathGrid,
    stream: &mut RngStream,
) -> Result<Trajectory<Vec<f64>>> {
    let params = *params;
    interacting_em(
        params.dim(),
        x0,
        grid,
        stream,
        move |x, i| eigen_drift(&params, x, i),
        |x, i| (2.0 * (1.0 + x[i] * x[i])).sqrt(),
        move |a| {
            (
                2.0 * params.s_im() + (2.0 - 2.0 * params.dim() as f64 - 2.0 * params.s_re()) * a,
                2.0 * (1.0 + a * a),
            )
        },
    )
}

/// Log squared-singular-value dynamics of the drift `-ν` matrix exponential
/// Brownian motion:
/// `dδ_i = √2 dβ_i + [-2ν + Σ_{k≠i} coth((δ_i-δ_k)/2)] dt`, started from 0.
pub fn simulate_singular_log(
    params: &ModelParams,
    grid: &PathGrid,
    stream: &mut RngStream,
) -> Result<Trajectory<Vec<f64>>> {
    let nu = params.nu();
    let x0 = vec![0.0; params.dim()];
    interacting_em(
        params.dim(),
        &x0,
        grid,
        stream,
        move |x, i| {
            let mut d = -2.0 * nu;
            for (k, &xk) in x.iter().enumerate() {
                if k != i {
                    // (e^a + e^b)/(e^a - e^b) in the stable coth form
                    d += 1.0 / ((x[i] - xk) / 2.0).tanh();
                }
            }
            d
        },
        |_, _| std::f64::consts::SQRT_2,
        move |_| (-2.0 * nu, 2.0),
    )
}

/// Shared Euler–Maruyama driver for the ordered interacting systems.
///
/// `degenerate_step` maps the common start value `a` to the pair
/// `(drift without interaction, local diffusion coefficient c)`; with all
/// coordinates equal the first step is drawn as `a + drift·h + eig(K)` for a
/// Hermitian Gaussian `K` with entry variance `c·h`, which is the short-time
/// law of the repelling system. A step that breaks the strict ordering is
/// retried at half the step size, recursively up to 20 levels.
fn interacting_em(
    n: usize,
    x0: &[f64],
    grid: &PathGrid,
    stream: &mut RngStream,
    drift: impl Fn(&[f64], usize) -> f64,
    diffusion: impl Fn(&[f64], usize) -> f64,
    degenerate_step: impl Fn(f64) -> (f64, f64),
) -> Result<Trajectory<Vec<f64>>> {
    assert_eq!(x0.len(), n);
    let h = grid.step_size();
    let all_equal = x0.windows(2).all(|w| w[0] == w[1]);
    let ascending = x0.windows(2).all(|w| w[1] - w[0] > COLLISION_GAP);
    if !(all_equal || ascending) {
        return Err(Error::InvalidInput(
            "initial coordinates must be strictly ascending or all equal".into(),
        ));
    }

    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    let mut start = 0usize;

    if all_equal && n > 1 {
        let (d0, c) = degenerate_step(x[0]);
        let k = hermitian_gaussian(stream, n, c * h);
        let spread = crate::linalg::eigh(&k)?.eigenvalues;
        for (xi, ev) in x.iter_mut().zip(&spread) {
            *xi += d0 * h + ev;
        }
        if x.windows(2).any(|w| w[1] - w[0] <= COLLISION_GAP) {
            return Err(Error::CollisionAbort(grid.time(1)));
        }
        states.push(x.clone());
        start = 1;
    }

    let mut scratch = vec![0.0; n];
    for k in start..grid.steps() {
        let t = grid.time(k);
        guarded_step(
            &mut x,
            &mut scratch,
            t,
            h,
            0,
            stream,
            &drift,
            &diffusion,
        )?;
        for &xi in &x {
            if !xi.is_finite() || xi.abs() > OVERFLOW_LIMIT {
                return Err(Error::Overflow(grid.time(k + 1)));
            }
        }
        states.push(x.clone());
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        increments: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn guarded_step(
    x: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
    t: f64,
    dt: f64,
    depth: usize,
    stream: &mut RngStream,
    drift: &impl Fn(&[f64], usize) -> f64,
    diffusion: &impl Fn(&[f64], usize) -> f64,
) -> Result<()> {
    if x.windows(2).any(|w| (w[1] - w[0]).abs() < COLLISION_GAP) {
        return Err(Error::CollisionAbort(t));
    }
    let sqrt_dt = dt.sqrt();
    for i in 0..x.len() {
        scratch[i] = x[i] + drift(x, i) * dt + diffusion(x, i) * sqrt_dt * stream.gaussian();
    }
    if scratch.windows(2).all(|w| w[1] - w[0] > COLLISION_GAP) {
        x.copy_from_slice(scratch);
        return Ok(());
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::CollisionAbort(t));
    }
    guarded_step(x, scratch, t, dt / 2.0, depth + 1, stream, drift, diffusion)?;
    guarded_step(
        x,
        scratch,
        t + dt / 2.0,
        dt / 2.0,
        depth + 1,
        stream,
        drift,
        diffusion,
    )
}

/// Scalar drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    /// `d sinh(β) = √(1+x²) dβ + x/2 dt` — sinh of a standard Brownian motion.
    SinhBougerol,
    /// The one-dimensional diffusion with generator
    /// `(w²+1) d²/dw² + [(2-2N-2Re(s)) w + 2 Im(s)] d/dw`,
    /// i.e. `dw = √(2(w²+1)) dβ + [(2-2N-2Re(s)) w + 2 Im(s)] dt`.
    Pearson1d,
}

/// Euler–Maruyama path of a scalar driver.
pub fn simulate_scalar(
    kind: ScalarKind,
    params: &ModelParams,
    x0: f64,
    grid: &PathGrid,
    stream: &mut RngStream,
) -> Result<Trajectory<f64>> {
    let h = grid.step_size();
    let sqrt_h = h.sqrt();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(x0);
    let mut x = x0;
    let n = params.dim() as f64;
    for k in 0..grid.steps() {
        let g = stream.gaussian();
        x = match kind {
            ScalarKind::SinhBougerol => {
                x + (1.0 + x * x).sqrt() * sqrt_h * g + 0.5 * x * h
            }
            ScalarKind::Pearson1d => {
                x + (2.0 * (x * x + 1.0)).sqrt() * sqrt_h * g
                    + ((2.0 - 2.0 * n - 2.0 * params.s_re()) * x + 2.0 * params.s_im()) * h
            }
        };
        if !x.is_finite() || x.abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow(grid.time(k + 1)));
        }
        states.push(x);
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        increments: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_derive_drift_constants() {
        let p = ModelParams::new(3, 0.25, -0.5);
        assert!((p.nu() - 1.75).abs() < 1e-15);
        assert!((p.mu() + std::f64::consts::SQRT_2 * 0.5).abs() < 1e-15);
        assert!(p.require_integrable().is_ok());
        assert!(ModelParams::new(1, -0.5, 0.0).require_integrable().is_err());
    }

    #[test]
    fn grid_construction() {
        let g = PathGrid::new(0.0, 1.0, 4096).unwrap();
        assert!((g.step_size() - 1.0 / 4096.0).abs() < 1e-18);
        assert!((g.time(4096) - 1.0).abs() < 1e-12);
        assert!(PathGrid::new(0.0, 0.0, 10).is_err());
        assert!(PathGrid::from_step(0.0, 1.0, 0.0).is_err());
        let g2 = PathGrid::from_step(0.0, 2.0, 0.125).unwrap();
        assert_eq!(g2.steps(), 16);
    }

    #[test]
    fn exp_bm_ode_limit() {
        // dW = 0, ν = 1, T = 1: M_T = (1 + h)^{steps} -> e
        let p = ModelParams::new(2, 0.0, 0.0); // ν = 1
        let grid = PathGrid::new(0.0, 1.0, 4096).unwrap();
        let mut zero = RngStream::zero();
        let traj = simulate_exp_bm(&p, DriftSign::Positive, &grid, &mut zero, false).unwrap();
        let m = traj.terminal();
        let expect = std::f64::consts::E;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { expect } else { 0.0 };
                assert!((m.get(i, j).re - target).abs() < 5.0 * grid.step_size());
                assert!(m.get(i, j).im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inverse_pair_ode_limit_and_product() {
        let p = ModelParams::new(2, 0.5, 0.0); // ν = 1.5
        let grid = PathGrid::new(0.0, 1.0, 2048).unwrap();
        let mut zero = RngStream::zero();
        let (m, r) = simulate_inverse_pair(&p, &grid, &mut zero, false).unwrap();
        let expect = (-1.5f64).exp();
        assert!((r.terminal().get(0, 0).re - expect).abs() < 5.0 * grid.step_size());
        // noisy product check at coarse tolerance
        let mut s = crate::rng::substream(71, 0);
        let (m2, r2) = simulate_inverse_pair(&p, &grid, &mut s, false).unwrap();
        let id = ComplexMatrix::identity(2);
        for k in [0, 512, 1024, 2048] {
            let prod = m2.states[k].mul(&r2.states[k]);
            assert!(prod.max_abs_diff(&id) < 0.5, "defect too large at {k}");
        }
        drop(m);
        drop(m2);
    }

    #[test]
    fn hp_diffusion_stays_at_zero_for_real_s() {
        let p = ModelParams::new(1, 0.3, 0.0);
        let grid = PathGrid::new(0.0, 1.0, 128).unwrap();
        let mut zero = RngStream::zero();
        let traj =
            simulate_hp_diffusion(&p, &HermitianMatrix::zeros(1), &grid, &mut zero, false)
                .unwrap();
        for x in &traj.states {
            assert_eq!(x.max_abs(), 0.0);
        }
    }

    #[test]
    fn hp_diffusion_constant_drift_case() {
        // N = 1, s = i: drift(x) = -x + 2 + x = 2, so X_T = 2T exactly.
        let p = ModelParams::new(1, 0.0, 1.0);
        let grid = PathGrid::new(0.0, 1.5, 64).unwrap();
        let mut zero = RngStream::zero();
        let traj =
            simulate_hp_diffusion(&p, &HermitianMatrix::zeros(1), &grid, &mut zero, false)
                .unwrap();
        assert!((traj.terminal().get(0, 0).re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hp_diffusion_hermiticity_is_exact() {
        let p = ModelParams::new(3, 0.2, 0.4);
        let grid = PathGrid::new(0.0, 0.5, 256).unwrap();
        let mut s = crate::rng::substream(5, 3);
        let traj =
            simulate_hp_diffusion(&p, &HermitianMatrix::zeros(3), &grid, &mut s, false).unwrap();
        for x in &traj.states {
            assert_eq!(x.symmetry_defect(), 0.0);
        }
    }

    #[test]
    fn eigen_drift_matches_matrix_drift_at_n1() {
        // At N = 1 both coefficient paths reduce to -2 Re(s) x + 2 Im(s).
        let p = ModelParams::new(1, 0.35, -0.2);
        for &x in &[-2.0, -0.5, 0.0, 1.0, 3.5] {
            let via_eigen = eigen_drift(&p, &[x], 0);
            let m = HermitianMatrix::diag_real(&[x]);
            let via_matrix = hp_drift(&p, &m).get(0, 0).re;
            assert!((via_eigen - via_matrix).abs() < 1e-13);
            assert!((via_eigen - (-2.0 * 0.35 * x + 2.0 * (-0.2))).abs() < 1e-13);
        }
    }

    #[test]
    fn eigen_drift_decomposes_into_matrix_drift_plus_noise_interaction() {
        // For diagonal X the spectral drift equals the matrix drift plus the
        // second-order noise term Σ_{j≠i} (2 + x_i² + x_j²)/(x_i - x_j).
        let p = ModelParams::new(3, 0.4, 0.7);
        let x = [-1.2, 0.3, 2.0];
        let m = HermitianMatrix::diag_real(&x);
        let matrix_drift = hp_drift(&p, &m);
        for i in 0..3 {
            let mut noise_term = 0.0;
            for j in 0..3 {
                if j != i {
                    noise_term += (2.0 + x[i] * x[i] + x[j] * x[j]) / (x[i] - x[j]);
                }
            }
            let expect = matrix_drift.get(i, i).re + noise_term;
            assert!(
                (eigen_drift(&p, &x, i) - expect).abs() < 1e-12,
                "coordinate {i}"
            );
        }
    }

    #[test]
    fn eigen_system_zero_noise_matches_rk4_and_keeps_gap() {
        let p = ModelParams::new(2, 0.0, 0.0);
        let grid = PathGrid::new(0.0, 0.1, 512).unwrap();
        let mut zero = RngStream::zero();
        let x0 = [-1.0, 0.5];
        let traj = simulate_eigen_system(&p, &x0, &grid, &mut zero).unwrap();
        // RK4 reference on the same ODE
        let f = |x: &[f64]| -> Vec<f64> { (0..2).map(|i| eigen_drift(&p, x, i)).collect() };
        let mut y = x0.to_vec();
        let hh = grid.step_size();
        for _ in 0..grid.steps() {
            let k1 = f(&y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * hh * b).collect();
            let k2 = f(&y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * hh * b).collect();
            let k3 = f(&y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + hh * b).collect();
            let k4 = f(&y4);
            for i in 0..2 {
                y[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let end = traj.terminal();
        assert!((end[0] - y[0]).abs() < 1e-3);
        assert!((end[1] - y[1]).abs() < 1e-3);
        // repulsion does not shrink the gap
        for s in &traj.states {
            assert!(s[1] - s[0] >= (x0[1] - x0[0]) - 1e-9);
        }
        // the symmetric start (-1, 1) is stationary for s = 0
        let mut zero = RngStream::zero();
        let sym = simulate_eigen_system(&p, &[-1.0, 1.0], &grid, &mut zero).unwrap();
        assert!((sym.terminal()[0] + 1.0).abs() < 1e-9);
        assert!((sym.terminal()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eigen_system_collision_guard_aborts_on_hopeless_grid() {
        // An extremely stiff mean reversion flips the coordinate order at
        // every step size the 20 local halvings can reach.
        let p = ModelParams::new(2, 1e12, 0.0);
        let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
        let mut s = crate::rng::substream(1, 0);
        let r = simulate_eigen_system(&p, &[-1.0, 1.0], &grid, &mut s);
        assert!(matches!(r, Err(Error::CollisionAbort(_))));
    }

    #[test]
    fn eigen_system_rejects_partial_ties() {
        let p = ModelParams::new(3, 0.0, 0.0);
        let grid = PathGrid::new(0.0, 1.0, 16).unwrap();
        let mut s = crate::rng::substream(1, 0);
        assert!(matches!(
            simulate_eigen_system(&p, &[0.0, 0.0, 1.0], &grid, &mut s),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn eigen_system_collision_rate_is_small_at_fine_steps() {
        let p = ModelParams::new(2, 0.0, 0.0);
        let grid = PathGrid::from_step(0.0, 0.1, 1e-4).unwrap();
        let mut aborts = 0;
        let trials = 200;
        for rep in 0..trials {
            let mut s = crate::rng::substream(33, rep);
            if matches!(
                simulate_eigen_system(&p, &[0.0, 0.0], &grid, &mut s),
                Err(Error::CollisionAbort(_))
            ) {
                aborts += 1;
            }
        }
        assert!(
            (aborts as f64) < 0.01 * trials as f64 + 1.0,
            "{aborts}/{trials} aborted"
        );
    }

    #[test]
    fn singular_log_states_stay_ordered() {
        let p = ModelParams::new(3, 0.0, 0.0);
        let grid = PathGrid::from_step(0.0, 2.0, 1e-3).unwrap();
        let mut s = crate::rng::substream(17, 2);
        let traj = simulate_singular_log(&p, &grid, &mut s).unwrap();
        for state in &traj.states[1..] {
            for w in state.windows(2) {
                assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn scalar_sinh_ode_limit() {
        let p = ModelParams::new(1, 0.0, 0.0);
        let grid = PathGrid::new(0.0, 1.0, 8192).unwrap();
        let mut zero = RngStream::zero();
        let x0 = 1.0f64.sinh();
        let traj = simulate_scalar(ScalarKind::SinhBougerol, &p, x0, &grid, &mut zero).unwrap();
        let expect = x0 * (0.5f64).exp();
        assert!((traj.terminal() - expect).abs() < 10.0 * grid.step_size());
    }

    #[test]
    fn overflow_guard_fires() {
        let p = ModelParams::new(1, 1e4, 0.0);
        let grid = PathGrid::new(0.0, 40.0, 40).unwrap();
        let mut zero = RngStream::zero();
        assert!(matches!(
            simulate_exp_bm(&p, DriftSign::Positive, &grid, &mut zero, false),
            Err(Error::Overflow(_))
        ));
    }
}
