//! Problem instances and the relation between a prior basis `G` and the true
//! column space `U` of the low-rank part.
//!
//! With `L_new = (I - G Gᵀ) L`, the column space of `L` splits into the part
//! shared with `G` (`u0`, dimension `r0`) and the new directions (`u_new`,
//! dimension `r_new`); `G` itself splits into `u0` and the extra directions
//! `g_extra` (dimension `r_extra`) that `L` does not use.

use crate::error::{Error, Result};
use crate::matrix::{
    ensure_finite, hstack, orthonormalize, spectral_norm, svd_with_floor, Mat, OrthoBasis,
    RankFloor, SupportSet,
};

/// Observed data, the prior basis, and (for synthetic data) the ground truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub m: Mat,
    pub prior: OrthoBasis,
    pub truth_l: Option<Mat>,
    pub truth_s: Option<Mat>,
    pub truth_support: Option<SupportSet>,
    /// Frobenius bound on the dense noise, `||M - L - S||_F <= sigma`.
    pub noise_bound: Option<f64>,
}

impl ProblemInstance {
    pub fn new(m: Mat, prior: OrthoBasis) -> Result<Self> {
        let inst = Self {
            m,
            prior,
            truth_l: None,
            truth_s: None,
            truth_support: None,
            noise_bound: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(&self.m, "M")?;
        if self.prior.ambient_dim() != self.m.nrows() {
            return Err(Error::Dimension(format!(
                "prior has {} rows but M has {}",
                self.prior.ambient_dim(),
                self.m.nrows()
            )));
        }
        if let Some(sigma) = self.noise_bound {
            if !(sigma >= 0.0) {
                return Err(Error::InvalidParameter(format!("noise bound {sigma} < 0")));
            }
        }
        if let Some(omega) = &self.truth_support {
            if omega.shape() != self.m.shape() {
                return Err(Error::Dimension("truth support shape differs from M".into()));
            }
        }
        if let (Some(l), Some(s)) = (&self.truth_l, &self.truth_s) {
            if l.shape() != self.m.shape() || s.shape() != self.m.shape() {
                return Err(Error::Dimension("truth components differ in shape from M".into()));
            }
            let resid = &self.m - l - s;
            match self.noise_bound {
                None => {
                    // M is formed as L + S in floating point, so allow rounding
                    let scale = crate::matrix::max_abs(l) + crate::matrix::max_abs(s);
                    if crate::matrix::max_abs(&resid) > 8.0 * f64::EPSILON * scale {
                        return Err(Error::InvalidParameter(
                            "M differs from truth_L + truth_S".into(),
                        ));
                    }
                }
                Some(sigma) => {
                    let slack = 1e-9 * sigma + 1e-12 * self.m.norm();
                    if resid.norm() > sigma + slack {
                        return Err(Error::InvalidParameter(format!(
                            "||M - L - S||_F = {} exceeds the noise bound {sigma}",
                            resid.norm()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reduced SVD of `L_new = (I - G Gᵀ) L`.
#[derive(Debug, Clone)]
pub struct NewComponent {
    pub u_new: OrthoBasis,
    pub sigma_new: Vec<f64>,
    pub v_new: OrthoBasis,
}

impl NewComponent {
    pub fn rank(&self) -> usize {
        self.sigma_new.len()
    }
}

/// SVD of `(I - G Gᵀ) L`. The numerical rank is judged against the scale of
/// `L`, not of the (possibly round-off sized) residual.
pub fn compute_l_new(l: &Mat, g: &OrthoBasis) -> Result<NewComponent> {
    compute_l_new_with_floor(l, g, RankFloor::default())
}

pub fn compute_l_new_with_floor(l: &Mat, g: &OrthoBasis, floor: RankFloor) -> Result<NewComponent> {
    if g.ambient_dim() != l.nrows() {
        return Err(Error::Dimension(format!(
            "prior has {} rows but L has {}",
            g.ambient_dim(),
            l.nrows()
        )));
    }
    let residual = g.project_out(l);
    let cut = floor.threshold(spectral_norm(l)?, l.nrows(), l.ncols());
    let svd = svd_with_floor(&residual, RankFloor::Absolute(cut))?;
    Ok(NewComponent {
        u_new: svd.u,
        sigma_new: svd.singular_values,
        v_new: svd.v,
    })
}

#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub r0: usize,
    pub r_new: usize,
    pub r_extra: usize,
    pub u0: OrthoBasis,
    pub g_extra: OrthoBasis,
    pub u_new: OrthoBasis,
    pub v_new: OrthoBasis,
    pub sigma_new: Vec<f64>,
}

/// Default cut for counting a principal cosine between `G` and `U` as 1.
pub const INTERSECTION_TOL: f64 = 1e-8;

/// Splits `span(U)` and `span(G)` into intersection, new and extra parts.
///
/// `r0` counts singular values of `GᵀU` that are at least `1 - tol`.
pub fn decompose_subspace(u: &OrthoBasis, g: &OrthoBasis, tol: f64) -> Result<SubspaceDecomposition> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "intersection tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if u.ambient_dim() != g.ambient_dim() {
        return Err(Error::Dimension(format!(
            "U has {} rows, G has {}",
            u.ambient_dim(),
            g.ambient_dim()
        )));
    }
    let cross = g.columns().transpose() * u.columns();
    let cross_svd = svd_with_floor(&cross, RankFloor::Absolute(0.0))?;
    let r0 = cross_svd
        .singular_values
        .iter()
        .take_while(|&&s| s >= 1.0 - tol)
        .count();
    let u0 = if r0 == 0 {
        OrthoBasis::empty(g.ambient_dim())
    } else {
        let a0 = cross_svd.u.columns().columns(0, r0).into_owned();
        orthonormalize(&(g.columns() * a0), 0.5)?
    };
    // the remaining directions of G have unit singular values once u0 is removed
    let g_extra = orthonormalize(&u0.project_out(g.columns()), 0.5)?;
    let new = compute_l_new(u.columns(), g)?;
    Ok(SubspaceDecomposition {
        r0,
        r_new: u.rank() - r0,
        r_extra: g.rank() - r0,
        u0,
        g_extra,
        u_new: new.u_new,
        v_new: new.v_new,
        sigma_new: new.sigma_new,
    })
}

/// `max |U Uᵀ - [u0 u_new][u0 u_new]ᵀ|`: the projector form of
/// `U = [u0 u_new] R_Uᵀ`.
pub fn reconstruct_identity_check(dec: &SubspaceDecomposition, u: &OrthoBasis) -> f64 {
    let joined = hstack(dec.u0.columns(), dec.u_new.columns()).expect("same ambient dimension");
    let p_joined = &joined * joined.transpose();
    (u.projector() - p_joined).amax()
}
