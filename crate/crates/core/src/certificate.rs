//! Dual certificate for modified-PCP, built explicitly.
//!
//! `Ω` is drawn as the complement of `j0` i.i.d. Bernoulli(`q`) batches with
//! `(1 - q)^j0 = ρ_s`. The low-rank part comes from the golfing recursion
//!
//! ```text
//! Y_0 = 0,  Y_j = Y_{j-1} + q⁻¹ P_{Ω̄_j} P_Π (U_new V_newᵀ - Y_{j-1}),  W^L = P_Π⊥ Y_{j0}
//! ```
//!
//! and the sparse part from the Neumann series
//! `W^S = λ P_Π⊥ Σ_k (P_Ω P_Π P_Ω)^k sgn(S)`. Here `Π` is the tangent space
//! spanned by `[G u_new]` on the left and `v_new` on the right.

use crate::datagen::{sample_support, SupportModel};
use crate::error::{ensure, Error, Result};
use crate::matrix::{max_abs, project_support, sign, spectral_norm, LowRankSpace, Mat, OrthoBasis, SupportSet};
use crate::model::compute_l_new;
use crate::rng::{gaussian_matrix, random_sign, seeded};

/// `ceil(1.3 ln n(1))`, at least 1.
pub fn golfing_j0(n1: usize, n2: usize) -> usize {
    let n = n1.max(n2).max(1) as f64;
    ((1.3 * n.ln()).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct GolfingPlan {
    pub j0: usize,
    pub q: f64,
    pub batches: Vec<SupportSet>,
    /// Complement of the union of the batches.
    pub omega: SupportSet,
}

impl GolfingPlan {
    /// Builds a plan from given batches; `Ω` is the complement of their union.
    pub fn from_batches(batches: Vec<SupportSet>, q: f64) -> Result<Self> {
        ensure(!batches.is_empty(), || "a golfing plan needs at least one batch".to_string())?;
        ensure(q > 0.0 && q <= 1.0, || format!("batch rate q = {q} outside (0, 1]"))?;
        let (rows, cols) = batches[0].shape();
        let mut union = SupportSet::empty(rows, cols);
        for b in &batches {
            union = union.union(b)?;
        }
        Ok(Self {
            j0: batches.len(),
            q,
            omega: union.complement(),
            batches,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.omega.shape()
    }
}

/// `j0 = ceil(1.3 ln n(1))` batches, each i.i.d. Bernoulli(`q`) with
/// `q = 1 - ρ_s^(1/j0)`.
pub fn make_golfing_plan(n1: usize, n2: usize, rho_s: f64, seed: u64) -> Result<GolfingPlan> {
    ensure(rho_s > 0.0 && rho_s < 1.0, || format!("rho_s = {rho_s} outside (0, 1)"))?;
    let j0 = golfing_j0(n1, n2);
    let q = 1.0 - rho_s.powf(1.0 / j0 as f64);
    let mut rng = seeded(seed);
    let batches = (0..j0)
        .map(|_| sample_support(n1, n2, SupportModel::Bernoulli(q), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    GolfingPlan::from_batches(batches, q)
}

fn check_space(space: &LowRankSpace, shape: (usize, usize)) -> Result<()> {
    if space.shape() != shape {
        return Err(Error::Dimension(format!(
            "tangent space is {:?} but the support is {:?}",
            space.shape(),
            shape
        )));
    }
    Ok(())
}

fn uv(u_new: &OrthoBasis, v_new: &OrthoBasis) -> Result<Mat> {
    if u_new.rank() != v_new.rank() {
        return Err(Error::Dimension(format!(
            "u_new has rank {} but v_new has rank {}",
            u_new.rank(),
            v_new.rank()
        )));
    }
    Ok(u_new.columns() * v_new.columns().transpose())
}

#[derive(Debug, Clone)]
pub struct GolfingResult {
    pub w_l: Mat,
    pub y_final: Mat,
    /// `||U_new V_newᵀ - P_Π Y_j||_F` for `j = 0..=j0`.
    pub residual_trace: Vec<f64>,
}

pub fn construct_wl(plan: &GolfingPlan, g: &OrthoBasis, u_new: &OrthoBasis, v_new: &OrthoBasis) -> Result<GolfingResult> {
    let space = LowRankSpace::from_prior(g, u_new, v_new)?;
    check_space(&space, plan.shape())?;
    let target = uv(u_new, v_new)?;
    let mut y = Mat::zeros(target.nrows(), target.ncols());
    let mut z = target.clone();
    let mut residual_trace = vec![z.norm()];
    for batch in &plan.batches {
        y += project_support(&space.project(&z)?, batch)? / plan.q;
        z = &target - space.project(&y)?;
        residual_trace.push(z.norm());
    }
    Ok(GolfingResult {
        w_l: space.project_perp(&y)?,
        y_final: y,
        residual_trace,
    })
}

/// Estimate of `||P_Ω P_Π||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on the self-adjoint map `P_Π P_Ω P_Π`, whose largest
/// eigenvalue is `||P_Ω P_Π||²`, from a seeded random start.
pub fn op_norm_po_ppi(
    omega: &SupportSet,
    space: &LowRankSpace,
    power_tol: f64,
    max_power_iters: usize,
    seed: u64,
) -> Result<OpNormEstimate> {
    check_space(space, omega.shape())?;
    let (rows, cols) = omega.shape();
    let mut rng = seeded(seed);
    let mut x = space.project(&gaussian_matrix(&mut rng, rows, cols, 1.0))?;
    let zero = OpNormEstimate { value: 0.0, iterations: 0, converged: true };
    if omega.is_empty() || x.norm() == 0.0 {
        return Ok(zero);
    }
    x /= x.norm();
    let mut eig = 0.0;
    for it in 1..=max_power_iters {
        let y = space.project(&project_support(&x, omega)?)?;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return Ok(OpNormEstimate { iterations: it, ..zero });
        }
        x = y / norm;
        if (next - eig).abs() <= power_tol * next.abs() {
            return Ok(OpNormEstimate { value: next.max(0.0).sqrt(), iterations: it, converged: true });
        }
        eig = next;
    }
    Ok(OpNormEstimate { value: eig.max(0.0).sqrt(), iterations: max_power_iters, converged: false })
}

#[derive(Debug, Clone)]
pub struct NeumannResult {
    pub w_s: Mat,
    pub terms_used: usize,
    /// Frobenius norm of each series term.
    pub term_norms: Vec<f64>,
}

/// `W^S = λ P_Π⊥ Σ_k (P_Ω P_Π P_Ω)^k sgn(S)`, truncated once a term falls
/// below `tol · ||sgn(S)||_F` or after `max_terms` terms. Fails when
/// `||P_Ω P_Π|| ≥ 1`, where the series diverges.
pub fn construct_ws(
    sign_s: &Mat,
    omega: &SupportSet,
    space: &LowRankSpace,
    lambda: f64,
    tol: f64,
    max_terms: usize,
) -> Result<NeumannResult> {
    check_space(space, omega.shape())?;
    ensure(max_terms >= 1, || "need at least one series term".to_string())?;
    let op = op_norm_po_ppi(omega, space, 1e-10, 2000, 0)?;
    if op.value >= 1.0 - 1e-12 {
        return Err(Error::NonConvergentSeries { norm: op.value });
    }
    let first = project_support(sign_s, omega)?;
    let scale = first.norm();
    let mut term = first.clone();
    let mut sum = first;
    let mut term_norms = vec![scale];
    let mut terms_used = 1;
    while terms_used < max_terms && term.norm() >= tol * scale && scale > 0.0 {
        term = project_support(&space.project(&term)?, omega)?;
        sum += &term;
        terms_used += 1;
        term_norms.push(term.norm());
    }
    Ok(NeumannResult {
        w_s: space.project_perp(&sum)? * lambda,
        terms_used,
        term_norms,
    })
}

/// One verified inequality: `value < bound` (or `≤` where noted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Condition {
    fn lt(value: f64, bound: f64) -> Self {
        Self { value, bound, passed: value < bound }
    }

    fn le(value: f64, bound: f64) -> Self {
        Self { value, bound, passed: value <= bound }
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateChecks {
    /// `||W^L + W^S|| < 9/10`.
    pub total_norm: Condition,
    /// `||P_Ω(U_new V_newᵀ + W^L)||_F ≤ λ/4`.
    pub on_support: Condition,
    /// `||P_Ω⊥(U_new V_newᵀ + W^L + W^S)||_∞ < 9λ/10`.
    pub off_support: Condition,
    /// `||P_Ω P_Π|| ≤ 1/4`.
    pub op_norm: Condition,
    /// `λ < 3/10`.
    pub lambda: Condition,
    /// `||W^L|| < 1/16`.
    pub wl_norm: Condition,
}

impl CertificateChecks {
    pub fn named(&self) -> [(&'static str, Condition); 6] {
        [
            ("total_norm", self.total_norm),
            ("on_support", self.on_support),
            ("off_support", self.off_support),
            ("op_norm", self.op_norm),
            ("lambda", self.lambda),
            ("wl_norm", self.wl_norm),
        ]
    }

    pub fn all_passed(&self) -> bool {
        self.named().iter().all(|(_, c)| c.passed)
    }
}

pub fn verify_certificate(
    w_l: &Mat,
    w_s: &Mat,
    omega: &SupportSet,
    g: &OrthoBasis,
    u_new: &OrthoBasis,
    v_new: &OrthoBasis,
    lambda: f64,
) -> Result<CertificateChecks> {
    let space = LowRankSpace::from_prior(g, u_new, v_new)?;
    check_space(&space, omega.shape())?;
    if w_l.shape() != omega.shape() || w_s.shape() != omega.shape() {
        return Err(Error::Dimension("certificate parts differ in shape from the support".into()));
    }
    let uv = uv(u_new, v_new)?;
    let op = op_norm_po_ppi(omega, &space, 1e-8, 2000, 0)?;
    let on = project_support(&(&uv + w_l), omega)?.norm();
    let off = max_abs(&project_support(&(&uv + w_l + w_s), &omega.complement())?);
    Ok(CertificateChecks {
        total_norm: Condition::lt(spectral_norm(&(w_l + w_s))?, 0.9),
        on_support: Condition::le(on, lambda / 4.0),
        off_support: Condition::lt(off, 0.9 * lambda),
        op_norm: Condition::le(op.value, 0.25),
        lambda: Condition::lt(lambda, 0.3),
        wl_norm: Condition::lt(spectral_norm(w_l)?, 1.0 / 16.0),
    })
}

/// A synthetic instance in the recovery regime, with the golfing plan that
/// generated its support.
#[derive(Debug, Clone)]
pub struct CertificateInstance {
    pub plan: GolfingPlan,
    pub g: OrthoBasis,
    pub u_new: OrthoBasis,
    pub v_new: OrthoBasis,
    pub l: Mat,
    pub s: Mat,
    pub lambda: f64,
}

impl CertificateInstance {
    pub fn m(&self) -> Mat {
        &self.l + &self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateGenParams {
    pub n1: usize,
    pub n2: usize,
    pub r0: usize,
    pub r_new: usize,
    pub r_extra: usize,
    pub rho_s: f64,
    pub seed: u64,
}

impl CertificateGenParams {
    /// `n1 = n2 = 120`, `r = 2` with one new direction, `ρ_s = 0.05`.
    pub fn standard(seed: u64) -> Self {
        Self { n1: 120, n2: 120, r0: 1, r_new: 1, r_extra: 0, rho_s: 0.05, seed }
    }
}

/// Orthonormal `[U0 G_extra U_new]` from a Gaussian matrix, `L = [U0 U_new] Y`
/// with Gaussian `Y`, `Ω` from a golfing plan and `±1` errors on `Ω`.
/// `(u_new, v_new)` are the singular bases of `(I - G Gᵀ) L`.
pub fn gen_certificate_instance(p: &CertificateGenParams) -> Result<CertificateInstance> {
    let total = p.r0 + p.r_new + p.r_extra;
    ensure(total <= p.n1 && p.r0 + p.r_new <= p.n2, || "ranks exceed the dimensions".to_string())?;
    let plan = make_golfing_plan(p.n1, p.n2, p.rho_s, p.seed)?;
    let mut rng = seeded(crate::rng::splitmix64(p.seed));
    let q = crate::matrix::orthonormalize(&gaussian_matrix(&mut rng, p.n1, total, 1.0), 1e-8)?;
    ensure(q.rank() == total, || "degenerate Gaussian basis".to_string())?;
    let u0 = q.select(0, p.r0);
    let g = u0.concat(&q.select(p.r0, p.r0 + p.r_extra))?;
    let u = u0.concat(&q.select(p.r0 + p.r_extra, total))?;
    let l = u.columns() * gaussian_matrix(&mut rng, u.rank(), p.n2, 1.0);
    let mut s = Mat::zeros(p.n1, p.n2);
    for (i, j) in plan.omega.iter() {
        s[(i, j)] = random_sign(&mut rng);
    }
    let new = compute_l_new(&l, &g)?;
    Ok(CertificateInstance {
        plan,
        g,
        u_new: new.u_new,
        v_new: new.v_new,
        l,
        s,
        lambda: 1.0 / (p.n1.max(p.n2) as f64).sqrt(),
    })
}

#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub w_l: Mat,
    pub w_s: Mat,
    pub neumann_terms_used: usize,
    pub golfing_residuals: Vec<f64>,
    pub checks: CertificateChecks,
}

pub const NEUMANN_TOL: f64 = 1e-12;
pub const NEUMANN_MAX_TERMS: usize = 200;

/// Golfing `W^L`, Neumann `W^S` and the verified conditions for an instance.
pub fn build_certificate(inst: &CertificateInstance) -> Result<DualCertificate> {
    let space = LowRankSpace::from_prior(&inst.g, &inst.u_new, &inst.v_new)?;
    let golf = construct_wl(&inst.plan, &inst.g, &inst.u_new, &inst.v_new)?;
    let ns = construct_ws(&sign(&inst.s), &inst.plan.omega, &space, inst.lambda, NEUMANN_TOL, NEUMANN_MAX_TERMS)?;
    let checks = verify_certificate(&golf.w_l, &ns.w_s, &inst.plan.omega, &inst.g, &inst.u_new, &inst.v_new, inst.lambda)?;
    Ok(DualCertificate {
        w_l: golf.w_l,
        w_s: ns.w_s,
        neumann_terms_used: ns.terms_used,
        golfing_residuals: golf.residual_trace,
        checks,
    })
}

/// `max |P_Ω W^S - λ sgn(S)|`.
pub fn sparse_identity_error(w_s: &Mat, s: &Mat, omega: &SupportSet, lambda: f64) -> Result<f64> {
    let lhs = project_support(w_s, omega)?;
    let rhs = project_support(&sign(s), omega)? * lambda;
    Ok(max_abs(&(lhs - rhs)))
}
