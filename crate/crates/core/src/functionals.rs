//! Itô-sum accumulators for the exponential matrix functionals.
//!
//! All stochastic integrals are strict left-endpoint (Itô) sums; the drift of
//! the Hermitian driver `B + μIt` is added analytically as `μ h I` per step so
//! that runs with different μ can share the same Gaussian noise.

use num_complex::Complex64;

use crate::linalg::{hermitian_part, psd_inv_sqrt, ComplexMatrix, HermitianMatrix};
use crate::rng::{fill_complex_gaussian, RngStream};
use crate::sde::{linear_step, ModelParams, PathGrid, Trajectory, OVERFLOW_LIMIT};
use crate::{Error, Result};

/// Truncation policy for `∫_0^∞` integrals: accumulate in blocks of length
/// `block` and stop once a block's contribution has max-norm below `eps`;
/// a sample that reaches `max_t` without converging is reported as
/// [`Error::TailNotConverged`] and must be flagged, not silently kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPolicy {
    pub eps: f64,
    pub block: f64,
    pub max_t: f64,
}

impl TailPolicy {
    pub fn new(eps: f64, block: f64, max_t: f64) -> Result<Self> {
        if !(eps > 0.0 && block > 0.0 && max_t >= block) {
            return Err(Error::InvalidInput(format!(
                "tail policy needs eps > 0, block > 0, max_t >= block; got {eps}, {block}, {max_t}"
            )));
        }
        Ok(Self { eps, block, max_t })
    }

    /// Default policy for an integrand with almost-sure exponential decay
    /// rate `rate`: eps 1e-6, unit blocks, and a time cap of `40 / rate`
    /// clamped to `[10, 200]` (the cap is ≈ 3× the typical stopping time, so
    /// the flagged-sample rate stays well below 1%).
    pub fn for_decay_rate(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "decay rate {rate} must be positive"
            )));
        }
        Self::new(1e-6, 1.0, (40.0 / rate).clamp(10.0, 200.0))
    }

    /// Default policy for the matrix integrands `‖M^{(-ν)}‖²`, whose top
    /// squared singular value decays at rate `2ν - N + 1 = 2 Re(s) + 1`.
    pub fn default_matrix(params: &ModelParams) -> Result<Self> {
        params.require_integrable()?;
        Self::for_decay_rate(2.0 * params.s_re() + 1.0)
    }
}

/// Integration horizon: a fixed grid, or blocks of step `h` under a tail
/// policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(PathGrid),
    Infinite { policy: TailPolicy, step: f64 },
}

/// A matrix integral together with the horizon actually integrated.
#[derive(Debug, Clone)]
pub struct TailIntegral {
    pub value: HermitianMatrix,
    pub achieved_t: f64,
}

/// A scalar integral together with the horizon actually integrated.
#[derive(Debug, Clone, Copy)]
pub struct ScalarIntegral {
    pub value: f64,
    pub achieved_t: f64,
}

// One accumulator step of the matrix Bougerol integrand, shared by the
// finite- and infinite-horizon drivers. `m` advances with drift -ν.
struct BougerolKernel {
    dim: usize,
    h: f64,
    drift: f64,      // -ν h
    mu_h: f64,       // μ h
    m: ComplexMatrix,
    dw: ComplexMatrix,
    db: ComplexMatrix,
    step_mat: ComplexMatrix,
    next: ComplexMatrix,
    weight: ComplexMatrix, // (ΔB + ΔB† + 2μhI)/√2
    tmp: ComplexMatrix,
    term: ComplexMatrix,
}

impl BougerolKernel {
    fn new(params: &ModelParams, h: f64) -> Self {
        let dim = params.dim();
        Self {
            dim,
            h,
            drift: -params.nu() * h,
            mu_h: params.mu() * h,
            m: ComplexMatrix::identity(dim),
            dw: ComplexMatrix::zeros(dim),
            db: ComplexMatrix::zeros(dim),
            step_mat: ComplexMatrix::zeros(dim),
            next: ComplexMatrix::zeros(dim),
            weight: ComplexMatrix::zeros(dim),
            tmp: ComplexMatrix::zeros(dim),
            term: ComplexMatrix::zeros(dim),
        }
    }

    // accumulate M_k ((ΔB + ΔB† + 2μhI)/√2) M_k† into `acc`, then advance M
    fn step(
        &mut self,
        acc: &mut ComplexMatrix,
        stream_m: &mut RngStream,
        stream_b: &mut RngStream,
        t_next: f64,
    ) -> Result<()> {
        let sd = self.h.sqrt();
        fill_complex_gaussian(&mut self.dw, stream_m, sd);
        fill_complex_gaussian(&mut self.db, stream_b, sd);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let b = self.db.get(i, j);
                let bt = self.db.get(j, i).conj();
                let mut w = (b + bt).scale(inv_sqrt2);
                if i == j {
                    w += Complex64::new(2.0 * self.mu_h * inv_sqrt2, 0.0);
                }
                self.weight.set(i, j, w);
            }
        }
        self.m.mul_into(&self.weight, &mut self.tmp);
        self.tmp.mul_adjoint_into(&self.m, &mut self.term);
        acc.add_assign_scaled(&self.term, Complex64::new(1.0, 0.0));

        linear_step(&self.m, &self.dw, self.drift, &mut self.step_mat, &mut self.next);
        std::mem::swap(&mut self.m, &mut self.next);
        let worst = self.m.max_abs();
        if !worst.is_finite() || worst > OVERFLOW_LIMIT {
            return Err(Error::Overflow(t_next));
        }
        Ok(())
    }
}

/// Finite-horizon matrix Bougerol integral
/// `Σ_k M_k ((ΔB_k + ΔB_k† + 2μhI)/√2) M_k†` with `M` the drift `-ν`
/// exponential Brownian motion started at the identity. The two streams must
/// be independent (distinct stream ids).
pub fn bougerol_integral(
    params: &ModelParams,
    grid: &PathGrid,
    stream_m: &mut RngStream,
    stream_b: &mut RngStream,
) -> Result<HermitianMatrix> {
    let mut kernel = BougerolKernel::new(params, grid.step_size());
    let mut acc = ComplexMatrix::zeros(params.dim());
    for k in 0..grid.steps() {
        kernel.step(&mut acc, stream_m, stream_b, grid.time(k + 1))?;
    }
    Ok(hermitian_part(&acc))
}

/// Infinite-horizon matrix Bougerol integral under a tail policy. Requires
/// `Re(s) > -1/2`. The achieved horizon is reported with the value.
pub fn bougerol_integral_infinite(
    params: &ModelParams,
    policy: &TailPolicy,
    step: f64,
    stream_m: &mut RngStream,
    stream_b: &mut RngStream,
) -> Result<TailIntegral> {
    params.require_integrable()?;
    if !(step > 0.0) {
        return Err(Error::InvalidStep(format!("h = {step} must be positive")));
    }
    let steps_per_block = ((policy.block / step).round() as usize).max(1);
    let mut kernel = BougerolKernel::new(params, step);
    let mut total = ComplexMatrix::zeros(params.dim());
    let mut block_acc = ComplexMatrix::zeros(params.dim());
    let mut t = 0.0f64;
    loop {
        for z in block_acc.entries_mut() {
            *z = Complex64::new(0.0, 0.0);
        }
        for k in 0..steps_per_block {
            kernel.step(&mut block_acc, stream_m, stream_b, t + (k + 1) as f64 * step)?;
        }
        t += steps_per_block as f64 * step;
        total.add_assign_scaled(&block_acc, Complex64::new(1.0, 0.0));
        if block_acc.max_abs() < policy.eps {
            return Ok(TailIntegral {
                value: hermitian_part(&total),
                achieved_t: t,
            });
        }
        if t >= policy.max_t {
            return Err(Error::TailNotConverged { achieved_t: t });
        }
    }
}

/// Matrix Dufresne integral `Σ_k M_k M_k† h` (drift `-ν`), a positive
/// semidefinite Riemann sum. Infinite horizons use the block tail rule.
pub fn dufresne_integral(
    params: &ModelParams,
    horizon: Horizon,
    stream_m: &mut RngStream,
) -> Result<TailIntegral> {
    if !(params.nu() > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Dufresne integral needs ν > 0, got {}",
            params.nu()
        )));
    }
    let dim = params.dim();
    let (h, steps_per_block, cap, eps) = match horizon {
        Horizon::Finite(grid) => (grid.step_size(), grid.steps(), grid.t_end() - grid.t0(), -1.0),
        Horizon::Infinite { policy, step } => {
            if !(step > 0.0) {
                return Err(Error::InvalidStep(format!("h = {step} must be positive")));
            }
            (
                step,
                ((policy.block / step).round() as usize).max(1),
                policy.max_t,
                policy.eps,
            )
        }
    };
    let mut m = ComplexMatrix::identity(dim);
    let mut dw = ComplexMatrix::zeros(dim);
    let mut step_mat = ComplexMatrix::zeros(dim);
    let mut next = ComplexMatrix::zeros(dim);
    let mut term = ComplexMatrix::zeros(dim);
    let mut total = ComplexMatrix::zeros(dim);
    let mut block_acc = ComplexMatrix::zeros(dim);
    let drift = -params.nu() * h;
    let sd = h.sqrt();
    let mut t = 0.0f64;
    loop {
        for z in block_acc.entries_mut() {
            *z = Complex64::new(0.0, 0.0);
        }
        for _ in 0..steps_per_block {
            m.mul_adjoint_into(&m, &mut term);
            block_acc.add_assign_scaled(&term, Complex64::new(h, 0.0));
            fill_complex_gaussian(&mut dw, stream_m, sd);
            linear_step(&m, &dw, drift, &mut step_mat, &mut next);
            std::mem::swap(&mut m, &mut next);
            t += h;
            let worst = m.max_abs();
            if !worst.is_finite() || worst > OVERFLOW_LIMIT {
                return Err(Error::Overflow(t));
            }
        }
        total.add_assign_scaled(&block_acc, Complex64::new(1.0, 0.0));
        if matches!(horizon, Horizon::Finite(_)) || block_acc.max_abs() < eps {
            return Ok(TailIntegral {
                value: hermitian_part(&total),
                achieved_t: t,
            });
        }
        if t >= cap {
            return Err(Error::TailNotConverged { achieved_t: t });
        }
    }
}

/// Scalar Bougerol functional `Σ_k e^{β_k} (Δγ_k - μ h)` with `β` a standard
/// Brownian motion with drift `-ν` and `γ` independent.
pub fn scalar_bougerol_functional(
    nu: f64,
    mu: f64,
    horizon: Horizon,
    stream_beta: &mut RngStream,
    stream_gamma: &mut RngStream,
) -> Result<ScalarIntegral> {
    scalar_tail_sum(horizon, nu, |beta, dgamma, _h| beta.exp() * dgamma, stream_beta, stream_gamma, mu)
}

/// Scalar Dufresne functional `Σ_k e^{2 β_k} h` (the exponential functional
/// of a drift `-ν` Brownian motion; its integrand decays at rate `2ν`).
pub fn scalar_dufresne_functional(
    nu: f64,
    horizon: Horizon,
    stream_beta: &mut RngStream,
) -> Result<ScalarIntegral> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Dufresne functional needs ν > 0, got {nu}"
        )));
    }
    let mut unused = RngStream::zero();
    scalar_tail_sum(
        horizon,
        nu,
        |beta, _dgamma, h| (2.0 * beta).exp() * h,
        stream_beta,
        &mut unused,
        0.0,
    )
}

fn scalar_tail_sum(
    horizon: Horizon,
    nu: f64,
    term: impl Fn(f64, f64, f64) -> f64,
    stream_beta: &mut RngStream,
    stream_gamma: &mut RngStream,
    mu: f64,
) -> Result<ScalarIntegral> {
    let (h, steps_per_block, cap, eps) = match horizon {
        Horizon::Finite(grid) => (grid.step_size(), grid.steps(), grid.t_end() - grid.t0(), -1.0),
        Horizon::Infinite { policy, step } => {
            if !(step > 0.0) {
                return Err(Error::InvalidStep(format!("h = {step} must be positive")));
            }
            if !(nu > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "infinite horizon needs ν > 0, got {nu}"
                )));
            }
            (
                step,
                ((policy.block / step).round() as usize).max(1),
                policy.max_t,
                policy.eps,
            )
        }
    };
    let sd = h.sqrt();
    let mut beta = 0.0f64;
    let mut total = 0.0f64;
    let mut t = 0.0f64;
    loop {
        let mut block_acc = 0.0f64;
        for _ in 0..steps_per_block {
            let dgamma = stream_gamma.gaussian() * sd - mu * h;
            block_acc += term(beta, dgamma, h);
            beta += stream_beta.gaussian() * sd - nu * h;
            t += h;
        }
        total += block_acc;
        if !total.is_finite() || total.abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow(t));
        }
        if matches!(horizon, Horizon::Finite(_)) || block_acc.abs() < eps {
            return Ok(ScalarIntegral {
                value: total,
                achieved_t: t,
            });
        }
        if t >= cap {
            return Err(Error::TailNotConverged { achieved_t: t });
        }
    }
}

/// The explicit solution path of the Hermitian diffusion:
/// `X̃_k = R_k (X_0 + Σ_{j<k} M_j G_j M_j†) R_k†` with `(M, R)` the coupled
/// drift `+ν` pair and `G_j` the symmetrized `B^{(μ)}` increment.
#[derive(Debug, Clone)]
pub struct ExplicitSolution {
    pub path: Trajectory<HermitianMatrix>,
    /// Driving increments, retained on request for coupled-noise experiments.
    pub dw: Option<Vec<ComplexMatrix>>,
    pub db: Option<Vec<ComplexMatrix>>,
}

/// Simulate the explicit solution, drawing fresh noise from the two streams.
pub fn explicit_solution_path(
    params: &ModelParams,
    x0: &HermitianMatrix,
    grid: &PathGrid,
    stream_m: &mut RngStream,
    stream_b: &mut RngStream,
    retain_noise: bool,
) -> Result<ExplicitSolution> {
    let n = params.dim();
    let h = grid.step_size();
    let sd = h.sqrt();
    let mut dws = Vec::with_capacity(grid.steps());
    let mut dbs = Vec::with_capacity(grid.steps());
    for _ in 0..grid.steps() {
        let mut dw = ComplexMatrix::zeros(n);
        fill_complex_gaussian(&mut dw, stream_m, sd);
        dws.push(dw);
        let mut db = ComplexMatrix::zeros(n);
        fill_complex_gaussian(&mut db, stream_b, sd);
        dbs.push(db);
    }
    let path = explicit_solution_driven(params, x0, grid, &dws, &dbs)?;
    Ok(ExplicitSolution {
        path,
        dw: retain_noise.then_some(dws),
        db: retain_noise.then_some(dbs),
    })
}

/// Explicit solution path driven by supplied `(ΔW, ΔB)` sequences.
pub fn explicit_solution_driven(
    params: &ModelParams,
    x0: &HermitianMatrix,
    grid: &PathGrid,
    dws: &[ComplexMatrix],
    dbs: &[ComplexMatrix],
) -> Result<Trajectory<HermitianMatrix>> {
    let n = params.dim();
    assert_eq!(x0.dim(), n, "initial condition dimension mismatch");
    if dws.len() != grid.steps() || dbs.len() != grid.steps() {
        return Err(Error::InvalidInput(format!(
            "need {} increment pairs, got ({}, {})",
            grid.steps(),
            dws.len(),
            dbs.len()
        )));
    }
    let h = grid.step_size();
    let nu_h = params.nu() * h;
    let mu_h = params.mu() * h;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    let mut m = ComplexMatrix::identity(n);
    let mut r = ComplexMatrix::identity(n);
    let mut integral = x0.as_matrix().clone();
    let mut weight = ComplexMatrix::zeros(n);
    let mut tmp = ComplexMatrix::zeros(n);
    let mut term = ComplexMatrix::zeros(n);
    let mut step_mat = ComplexMatrix::zeros(n);
    let mut next = ComplexMatrix::zeros(n);

    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(x0.clone());
    for (k, (dw, db)) in dws.iter().zip(dbs).enumerate() {
        let t_next = grid.time(k + 1);
        // integral += M_k G_k M_k†
        for i in 0..n {
            for j in 0..n {
                let mut w = (db.get(i, j) + db.get(j, i).conj()).scale(inv_sqrt2);
                if i == j {
                    w += Complex64::new(2.0 * mu_h * inv_sqrt2, 0.0);
                }
                weight.set(i, j, w);
            }
        }
        m.mul_into(&weight, &mut tmp);
        tmp.mul_adjoint_into(&m, &mut term);
        integral.add_assign_scaled(&term, Complex64::new(1.0, 0.0));

        // advance the coupled pair
        linear_step(&m, dw, nu_h, &mut step_mat, &mut next);
        std::mem::swap(&mut m, &mut next);
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
        std::mem::swap(&mut r, &mut next);
        if !m.is_finite() || m.max_abs() > OVERFLOW_LIMIT || r.max_abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow(t_next));
        }

        // X̃ = R (X0 + ∫) R†
        r.mul_into(&integral, &mut tmp);
        tmp.mul_adjoint_into(&r, &mut term);
        let x = hermitian_part(&term);
        if x.max_abs() > OVERFLOW_LIMIT {
            return Err(Error::Overflow(t_next));
        }
        states.push(x);
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        increments: None,
    })
}

/// Reconstruct the Γ increments that drive the Hermitian diffusion along an
/// explicit-solution path:
/// `ΔΓ_k = (-(1/√2) ΔW_k X̃_k + (1/√2) ΔB_k) ((I + X̃_k²)/2)^{-1/2}`.
pub fn reconstruct_gamma_increments(
    path: &Trajectory<HermitianMatrix>,
    dws: &[ComplexMatrix],
    dbs: &[ComplexMatrix],
) -> Result<Vec<ComplexMatrix>> {
    let steps = path.grid.steps();
    if dws.len() != steps || dbs.len() != steps {
        return Err(Error::InvalidInput(format!(
            "need {} increment pairs, got ({}, {})",
            steps,
            dws.len(),
            dbs.len()
        )));
    }
    let n = path.states[0].dim();
    let identity = HermitianMatrix::identity(n);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(steps);
    let mut bracket = ComplexMatrix::zeros(n);
    let mut tmp = ComplexMatrix::zeros(n);
    for k in 0..steps {
        let x = &path.states[k];
        let arg = x.square().add(&identity).scale_real(0.5);
        let inv_root = psd_inv_sqrt(&arg)?;
        dws[k].mul_into(x.as_matrix(), &mut tmp);
        for i in 0..n {
            for j in 0..n {
                bracket.set(
                    i,
                    j,
                    (dbs[k].get(i, j) - tmp.get(i, j)).scale(inv_sqrt2),
                );
            }
        }
        let mut gamma = ComplexMatrix::zeros(n);
        bracket.mul_into(inv_root.as_matrix(), &mut gamma);
        out.push(gamma);
    }
    Ok(out)
}

/// Time reversal of a forward path: `N_k = (M_T)^{-1} M_{K-k}` on the same
/// grid. The terminal state is `(M_T)^{-1}` when the path starts at the
/// identity.
pub fn time_reversal_path(
    m_path: &Trajectory<ComplexMatrix>,
) -> Result<Trajectory<ComplexMatrix>> {
    let terminal_inv = m_path.terminal().inverse()?;
    let steps = m_path.grid.steps();
    let states: Vec<ComplexMatrix> = (0..=steps)
        .map(|k| terminal_inv.mul(&m_path.states[steps - k]))
        .collect();
    Ok(Trajectory {
        grid: m_path.grid,
        states,
        increments: None,
    })
}
