//! Incoherence diagnostics and feasibility checks for the recovery guarantee.
//!
//! All logarithms are natural. `n(1) = max(n1, n2)` and `n(2) = min(n1, n2)`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::matrix::{max_abs, spectral_norm, Mat, OrthoBasis};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    ModPcp,
    Pcp,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::ModPcp => "mod_pcp",
            Variant::Pcp => "pcp",
        })
    }
}

/// Smallest `ρ_r` satisfying each of the three incoherence conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoReport {
    pub rho_pu: f64,
    pub rho_pv: f64,
    pub rho_uv: f64,
    pub rho_max: f64,
    pub variant: Variant,
}

impl RhoReport {
    pub const CSV_HEADER: &'static str = "variant,rho_pu,rho_pv,rho_uv,rho_max";

    pub fn csv_row(&self) -> String {
        use crate::io::fmt_f64;
        format!(
            "{},{},{},{},{}",
            self.variant,
            fmt_f64(self.rho_pu),
            fmt_f64(self.rho_pv),
            fmt_f64(self.rho_uv),
            fmt_f64(self.rho_max)
        )
    }
}

fn sizes(n1: usize, n2: usize) -> (f64, f64, f64) {
    let big = n1.max(n2) as f64;
    let small = n1.min(n2) as f64;
    let log2 = big.ln().powi(2);
    (big, small, log2)
}

fn row_norms_sq(b: &OrthoBasis) -> Vec<f64> {
    let c = b.columns();
    (0..c.nrows()).map(|i| c.row(i).norm_squared()).collect()
}

fn report(
    left_rows: &[f64],
    right: &OrthoBasis,
    uv: Option<(&OrthoBasis, &OrthoBasis)>,
    n1: usize,
    n2: usize,
    variant: Variant,
) -> RhoReport {
    let (big, small, log2) = sizes(n1, n2);
    let max_left = left_rows.iter().copied().fold(0.0, f64::max);
    let max_right = row_norms_sq(right).into_iter().fold(0.0, f64::max);
    let uv_max = match uv {
        Some((u, v)) if u.rank() > 0 && v.rank() > 0 => max_abs(&(u.columns() * v.columns().transpose())),
        _ => 0.0,
    };
    let rho_pu = max_left * n1 as f64 * log2 / small;
    let rho_pv = max_right * n2 as f64 * log2 / small;
    let rho_uv = uv_max * uv_max * big * log2;
    RhoReport {
        rho_pu,
        rho_pv,
        rho_uv,
        rho_max: rho_pu.max(rho_pv).max(rho_uv),
        variant,
    }
}

fn check_dims(left: &OrthoBasis, right: &OrthoBasis, n1: usize, n2: usize) -> Result<()> {
    if left.ambient_dim() != n1 || right.ambient_dim() != n2 {
        return Err(Error::Dimension(format!(
            "bases live in R^{} and R^{} but the matrix is {n1}x{n2}",
            left.ambient_dim(),
            right.ambient_dim()
        )));
    }
    if left.rank() != right.rank() {
        return Err(Error::Dimension(format!(
            "left rank {} differs from right rank {}",
            left.rank(),
            right.rank()
        )));
    }
    Ok(())
}

/// `ρ_r` values for modified-PCP:
///
/// ```text
/// rho_pu = max_i ||[G u_new]ᵀ e_i||² · n1 log² n(1) / n(2)
/// rho_pv = max_i ||v_newᵀ e_i||²     · n2 log² n(1) / n(2)
/// rho_uv = ||u_new v_newᵀ||_∞²       · n(1) log² n(1)
/// ```
///
/// `G` and `u_new` are orthogonal, so the row norms of `[G u_new]` add.
/// With both empty, `rho_pu = 0`.
pub fn rho_r_modpcp(g: &OrthoBasis, u_new: &OrthoBasis, v_new: &OrthoBasis, n1: usize, n2: usize) -> Result<RhoReport> {
    check_dims(u_new, v_new, n1, n2)?;
    ensure(g.ambient_dim() == n1, || format!("G lives in R^{} but n1 = {n1}", g.ambient_dim()))?;
    let rows: Vec<f64> = row_norms_sq(g)
        .into_iter()
        .zip(row_norms_sq(u_new))
        .map(|(a, b)| a + b)
        .collect();
    Ok(report(&rows, v_new, Some((u_new, v_new)), n1, n2, Variant::ModPcp))
}

/// `ρ_r` values for PCP: the same formulas with `[G u_new] = U`, `v_new = V`.
pub fn rho_r_pcp(u: &OrthoBasis, v: &OrthoBasis, n1: usize, n2: usize) -> Result<RhoReport> {
    check_dims(u, v, n1, n2)?;
    Ok(report(&row_norms_sq(u), v, Some((u, v)), n1, n2, Variant::Pcp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemCheck {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Unspecified constants in the feasibility conditions. Both default to 1;
/// they are placeholders the caller may override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub c01: f64,
    pub c03: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c01: 1.0, c03: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub a: ItemCheck,
    pub b: ItemCheck,
    pub c: ItemCheck,
    pub d: ItemCheck,
    pub e: ItemCheck,
    pub f: ItemCheck,
    /// `m ≤ 0.4 ρ_s n1 n2`, when a support size is supplied.
    pub support_size: Option<ItemCheck>,
    pub constants: Constants,
    pub rho_s: f64,
    pub rho_r: f64,
    pub n1: usize,
    pub n2: usize,
}

impl AssumptionReport {
    pub fn items(&self) -> [(&'static str, ItemCheck); 6] {
        [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("f", self.f),
        ]
    }

    pub fn all_satisfied(&self) -> bool {
        self.items().iter().all(|(_, c)| c.satisfied) && self.support_size.is_none_or(|c| c.satisfied)
    }
}

fn le(lhs: f64, rhs: f64) -> ItemCheck {
    ItemCheck { satisfied: lhs <= rhs, lhs, rhs }
}

fn gt(lhs: f64, rhs: f64) -> ItemCheck {
    ItemCheck { satisfied: lhs > rhs, lhs, rhs }
}

/// `b1(ρ_r) = max{60 √ρ_r, 11 C01 √ρ_r, 0.11}`.
pub fn b1(rho_r: f64, c01: f64) -> f64 {
    let s = rho_r.sqrt();
    (60.0 * s).max(11.0 * c01 * s).max(0.11)
}

/// Evaluates the six feasibility items literally:
///
/// ```text
/// (a) ρ_r ≤ min{1e-4, 7.2483e-5 C03⁻⁴}
/// (b) ρ_s = min{1 - 1.5 b1(ρ_r), 0.0156}
/// (c) n(1) ≥ max{exp(0.5019 ρ_r), exp(253.9618 C01 ρ_r), 1024}
/// (d) n(2) ≥ 100 log² n(1)
/// (e) (n1 + n2)^(1/6) / log(n1 + n2) > 10.5 / (ρ_s^(1/6) (1 - 5.6561 √ρ_s))
/// (f) n(1) n(2) / (500 log n(1)) > 1 / ρ_s²
/// ```
///
/// Item (b) is an equality and holds to a relative tolerance of 1e-12.
pub fn check_assumptions(
    rho_s: f64,
    rho_r: f64,
    n1: usize,
    n2: usize,
    constants: Constants,
    m: Option<usize>,
) -> Result<AssumptionReport> {
    ensure(rho_s > 0.0 && rho_r > 0.0, || "rho_s and rho_r must be positive".to_string())?;
    ensure(n1 > 0 && n2 > 0, || "dimensions must be positive".to_string())?;
    ensure(constants.c01 > 0.0 && constants.c03 > 0.0, || "constants must be positive".to_string())?;
    let Constants { c01, c03 } = constants;
    let big = n1.max(n2) as f64;
    let small = n1.min(n2) as f64;
    let sum = (n1 + n2) as f64;

    let a = le(rho_r, 1e-4f64.min(7.2483e-5 * c03.powi(-4)));
    let b_rhs = (1.0 - 1.5 * b1(rho_r, c01)).min(0.0156);
    let b = ItemCheck {
        satisfied: (rho_s - b_rhs).abs() <= 1e-12 * b_rhs.abs(),
        lhs: rho_s,
        rhs: b_rhs,
    };
    let c_rhs = (0.5019 * rho_r).exp().max((253.9618 * c01 * rho_r).exp()).max(1024.0);
    let c = ItemCheck { satisfied: big >= c_rhs, lhs: big, rhs: c_rhs };
    let d_rhs = 100.0 * big.ln().powi(2);
    let d = ItemCheck { satisfied: small >= d_rhs, lhs: small, rhs: d_rhs };
    let denom = rho_s.powf(1.0 / 6.0) * (1.0 - 5.6561 * rho_s.sqrt());
    let e_rhs = if denom > 0.0 { 10.5 / denom } else { f64::INFINITY };
    let e = gt(sum.powf(1.0 / 6.0) / sum.ln(), e_rhs);
    let f = gt(big * small / (500.0 * big.ln()), 1.0 / (rho_s * rho_s));
    let support_size = m.map(|m| le(m as f64, 0.4 * rho_s * (n1 * n2) as f64));

    Ok(AssumptionReport { a, b, c, d, e, f, support_size, constants, rho_s, rho_r, n1, n2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub exceed_fraction: f64,
    pub exceedances: usize,
    pub max_observed_norm: f64,
    pub threshold: f64,
}

/// Random sign matrix: `+1` and `-1` with probability `ρ/2` each, else 0.
pub fn sample_sign_matrix<R: Rng>(rng: &mut R, n1: usize, n2: usize, rho: f64) -> Mat {
    let mut e = Mat::zeros(n1, n2);
    for x in e.iter_mut() {
        let u: f64 = rng.random();
        *x = if u < rho / 2.0 {
            1.0
        } else if u < rho {
            -1.0
        } else {
            0.0
        };
    }
    e
}

/// Counts how often `||E|| ≥ 0.5 √n(1)` over `trials` independent random
/// sign matrices. Trial `k` uses seed `derive_seed(seed, 0, k)`.
pub fn sign_norm_probe(n1: usize, n2: usize, rho_s: f64, trials: usize, seed: u64) -> Result<ProbeResult> {
    ensure(trials >= 1, || "trials must be at least 1".to_string())?;
    ensure((0.0..=1.0).contains(&rho_s), || format!("rho_s = {rho_s} outside [0, 1]"))?;
    let threshold = 0.5 * (n1.max(n2) as f64).sqrt();
    let norms = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(derive_seed(seed, 0, k as u64));
            spectral_norm(&sample_sign_matrix(&mut rng, n1, n2, rho_s))
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceedances = norms.iter().filter(|&&x| x >= threshold).count();
    Ok(ProbeResult {
        exceed_fraction: exceedances as f64 / trials as f64,
        exceedances,
        max_observed_norm: norms.iter().copied().fold(0.0, f64::max),
        threshold,
    })
}
