//! Inexact augmented Lagrange multiplier solvers.
//!
//! [`solve_mod_pcp`] minimizes `||L_new||_* + λ||S||_1` subject to
//! `L_new + G Xᵀ + S = M`. Each sweep performs
//!
//! ```text
//! S      <- shrink(M - G Xᵀ - L_new + Y/τ, λ/τ)
//! W       = M - S + Y/τ
//! Xᵀ     <- Gᵀ W
//! L_new  <- svt((I - G Gᵀ) W, 1/τ)
//! Y      <- Y + τ (M - S - L_new - G Xᵀ)
//! τ      <- min(v τ, τ̄)
//! ```
//!
//! starting from `Y = M / max(||M||, ||M||_∞ / λ)`, `τ0 = 1.25 / ||M||` and
//! `τ̄ = 10⁷ τ0`, and stops once `||M - S - L_new - G Xᵀ||_F / ||M||_F` drops
//! below the tolerance. PCP is the same iteration with an empty `G`.

use crate::error::{ensure, Error, Result};
use crate::matrix::{ensure_finite, l1_norm, max_abs, soft_threshold_matrix, spectral_norm, svt_with_rank, Mat, OrthoBasis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `λ = 1 / sqrt(max(n1, n2))`.
    Default,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau0Rule {
    /// `τ0 = 1.25 / ||M||` with the exact spectral norm.
    Default,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    pub lambda: LambdaRule,
    pub tau0: Tau0Rule,
    /// Penalty growth factor `v`.
    pub growth: f64,
    /// `τ̄ = tau_bar_factor · τ0`.
    pub tau_bar_factor: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            lambda: LambdaRule::Default,
            tau0: Tau0Rule::Default,
            growth: 1.5,
            tau_bar_factor: 1e7,
            rel_tol: 1e-7,
            max_iters: 1000,
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.growth > 1.0, || format!("growth factor must exceed 1, got {}", self.growth))?;
        ensure(self.rel_tol > 0.0, || format!("tolerance must be positive, got {}", self.rel_tol))?;
        ensure(self.tau_bar_factor >= 1.0, || {
            format!("tau_bar factor must be at least 1, got {}", self.tau_bar_factor)
        })?;
        if let LambdaRule::Explicit(l) = self.lambda {
            ensure(l > 0.0 && l.is_finite(), || format!("lambda must be positive, got {l}"))?;
        }
        if let Tau0Rule::Explicit(t) = self.tau0 {
            ensure(t > 0.0 && t.is_finite(), || format!("tau0 must be positive, got {t}"))?;
        }
        Ok(())
    }

    pub fn lambda_for(&self, rows: usize, cols: usize) -> f64 {
        match self.lambda {
            LambdaRule::Default => 1.0 / (rows.max(cols) as f64).sqrt(),
            LambdaRule::Explicit(l) => l,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// `M - Ŝ` for the exact solvers; `L̂_new + G X̂ᵀ` for the stable one.
    pub l_hat: Mat,
    pub s_hat: Mat,
    pub l_new_hat: Mat,
    /// `n2 × r_G` coefficients of the prior directions.
    pub x_hat: Mat,
    pub iterations: usize,
    /// `||M - Ŝ - L̂_new - G X̂ᵀ||_F / ||M||_F`.
    pub final_residual: f64,
    pub converged: bool,
    pub lambda: f64,
    /// Penalty `τ_k` used in each iteration.
    pub tau_trace: Vec<f64>,
    /// Rank of `L̂_new` after the last singular value thresholding.
    pub l_new_rank: usize,
}

impl SolveResult {
    fn zeros(rows: usize, cols: usize, prior_rank: usize, lambda: f64) -> Self {
        Self {
            l_hat: Mat::zeros(rows, cols),
            s_hat: Mat::zeros(rows, cols),
            l_new_hat: Mat::zeros(rows, cols),
            x_hat: Mat::zeros(cols, prior_rank),
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            lambda,
            tau_trace: Vec::new(),
            l_new_rank: 0,
        }
    }

    /// `||L̂_new||_* + λ ||Ŝ||_1`.
    pub fn objective(&self) -> Result<f64> {
        let nuc: f64 = crate::matrix::singular_values(&self.l_new_hat)?.iter().sum();
        Ok(nuc + self.lambda * l1_norm(&self.s_hat))
    }
}

fn check_inputs(m: &Mat, g: &OrthoBasis, cfg: &AlmConfig) -> Result<()> {
    cfg.validate()?;
    ensure_finite(m, "M")?;
    if g.ambient_dim() != m.nrows() {
        return Err(Error::Dimension(format!(
            "prior has {} rows but M has {}",
            g.ambient_dim(),
            m.nrows()
        )));
    }
    Ok(())
}

struct Start {
    lambda: f64,
    norm_f: f64,
    y: Mat,
    tau: f64,
    tau_bar: f64,
}

fn start(m: &Mat, cfg: &AlmConfig) -> Result<Start> {
    let (rows, cols) = m.shape();
    let lambda = cfg.lambda_for(rows, cols);
    let spec = spectral_norm(m)?;
    let y = m / spec.max(max_abs(m) / lambda);
    let tau = match cfg.tau0 {
        Tau0Rule::Default => 1.25 / spec,
        Tau0Rule::Explicit(t) => t,
    };
    Ok(Start {
        lambda,
        norm_f: m.norm(),
        y,
        tau,
        tau_bar: cfg.tau_bar_factor * tau,
    })
}

/// Modified-PCP via the inexact ALM iteration described in the module docs.
pub fn solve_mod_pcp(m: &Mat, g: &OrthoBasis, cfg: &AlmConfig) -> Result<SolveResult> {
    check_inputs(m, g, cfg)?;
    let (rows, cols) = m.shape();
    if m.iter().all(|&x| x == 0.0) {
        return Ok(SolveResult::zeros(rows, cols, g.rank(), cfg.lambda_for(rows, cols)));
    }
    let Start {
        lambda,
        norm_f,
        mut y,
        mut tau,
        tau_bar,
    } = start(m, cfg)?;
    let gmat = g.columns();

    let mut s = Mat::zeros(rows, cols);
    let mut l_new = Mat::zeros(rows, cols);
    let mut gx = Mat::zeros(rows, cols);
    let mut xt = Mat::zeros(g.rank(), cols);
    let mut tau_trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut l_new_rank = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let inv = 1.0 / tau;
        s = soft_threshold_matrix(&(m - &gx - &l_new + &y * inv), lambda * inv);
        let w = m - &s + &y * inv;
        xt = gmat.transpose() * &w;
        gx = gmat * &xt;
        let (next, rank) = svt_with_rank(&(&w - &gx), inv).map_err(|e| Error::Numerical {
            iteration: iterations,
            source: Box::new(e),
        })?;
        l_new = next;
        l_new_rank = rank;

        let r = m - &s - &l_new - &gx;
        y += &r * tau;
        tau_trace.push(tau);
        tau = (cfg.growth * tau).min(tau_bar);
        iterations += 1;

        residual = r.norm() / norm_f;
        if !residual.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        if residual < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        l_hat: m - &s,
        s_hat: s,
        l_new_hat: l_new,
        x_hat: xt.transpose(),
        iterations,
        final_residual: residual,
        converged,
        lambda,
        tau_trace,
        l_new_rank,
    })
}

/// Principal component pursuit: modified-PCP with no prior directions.
pub fn solve_pcp(m: &Mat, cfg: &AlmConfig) -> Result<SolveResult> {
    solve_mod_pcp(m, &OrthoBasis::empty(m.nrows()), cfg)
}

/// Maps the Frobenius noise bound `σ` to the weight `μ` of the relaxed data
/// fit `(1/2μ) ||M - L_new - G Xᵀ - S||_F²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseCalibration {
    /// `μ = σ_e · sqrt(2 max(n1, n2))` with the per-entry noise level
    /// `σ_e = σ / sqrt(n1 n2)` implied by the Frobenius bound.
    PerEntry,
    /// `μ = σ · sqrt(2 max(n1, n2))`, treating `σ` itself as the per-entry level.
    Direct,
    Explicit(f64),
}

impl NoiseCalibration {
    pub fn mu(&self, sigma: f64, rows: usize, cols: usize) -> f64 {
        let base = (2.0 * rows.max(cols) as f64).sqrt();
        match *self {
            NoiseCalibration::PerEntry => sigma * base / ((rows * cols) as f64).sqrt(),
            NoiseCalibration::Direct => sigma * base,
            NoiseCalibration::Explicit(mu) => mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableConfig {
    pub alm: AlmConfig,
    pub calibration: NoiseCalibration,
}

impl Default for StableConfig {
    fn default() -> Self {
        Self {
            alm: AlmConfig::default(),
            calibration: NoiseCalibration::PerEntry,
        }
    }
}

/// Noise-tolerant modified-PCP.
///
/// Solves `min ||L_new||_* + λ||S||_1 + (1/2μ)||Z||_F²` subject to
/// `L_new + G Xᵀ + S + Z = M` with the same ALM schedule as
/// [`solve_mod_pcp`]; the `Z` step is the closed form
/// `Z = τμ/(1 + τμ) · (M - S - L_new - G Xᵀ + Y/τ)`. `σ = 0` means no dense
/// noise and defers to [`solve_mod_pcp`].
pub fn solve_stable_mod_pcp(m: &Mat, g: &OrthoBasis, sigma: f64, cfg: &StableConfig) -> Result<SolveResult> {
    ensure(sigma >= 0.0 && sigma.is_finite(), || format!("noise bound must be nonnegative, got {sigma}"))?;
    check_inputs(m, g, &cfg.alm)?;
    let (rows, cols) = m.shape();
    let mu = cfg.calibration.mu(sigma, rows, cols);
    if sigma == 0.0 || mu == 0.0 {
        return solve_mod_pcp(m, g, &cfg.alm);
    }
    if m.iter().all(|&x| x == 0.0) {
        return Ok(SolveResult::zeros(rows, cols, g.rank(), cfg.alm.lambda_for(rows, cols)));
    }
    let Start {
        lambda,
        norm_f,
        mut y,
        mut tau,
        tau_bar,
    } = start(m, &cfg.alm)?;
    let gmat = g.columns();

    let mut s = Mat::zeros(rows, cols);
    let mut l_new = Mat::zeros(rows, cols);
    let mut gx = Mat::zeros(rows, cols);
    let mut z = Mat::zeros(rows, cols);
    let mut xt = Mat::zeros(g.rank(), cols);
    let mut tau_trace = Vec::new();
    let mut converged = false;
    let mut l_new_rank = 0;
    let mut iterations = 0;

    while iterations < cfg.alm.max_iters {
        let inv = 1.0 / tau;
        s = soft_threshold_matrix(&(m - &gx - &l_new - &z + &y * inv), lambda * inv);
        let w = m - &s - &z + &y * inv;
        xt = gmat.transpose() * &w;
        gx = gmat * &xt;
        let (next, rank) = svt_with_rank(&(&w - &gx), inv).map_err(|e| Error::Numerical {
            iteration: iterations,
            source: Box::new(e),
        })?;
        l_new = next;
        l_new_rank = rank;
        let shrink = tau * mu / (1.0 + tau * mu);
        z = (m - &s - &l_new - &gx + &y * inv) * shrink;

        let r = m - &s - &l_new - &gx - &z;
        y += &r * tau;
        tau_trace.push(tau);
        tau = (cfg.alm.growth * tau).min(tau_bar);
        iterations += 1;

        let constraint = r.norm() / norm_f;
        if !constraint.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        if constraint < cfg.alm.rel_tol {
            converged = true;
            break;
        }
    }

    let l_hat = &l_new + &gx;
    let final_residual = (m - &s - &l_hat).norm() / norm_f;
    Ok(SolveResult {
        l_hat,
        s_hat: s,
        l_new_hat: l_new,
        x_hat: xt.transpose(),
        iterations,
        final_residual,
        converged,
        lambda,
        tau_trace,
        l_new_rank,
    })
}
