//! Seeded synthetic data.
//!
//! Every generator takes an explicit seed and draws all of its randomness
//! from one [`SeededRng`] stream in a fixed order, so identical parameters
//! give bit-identical output.

use rand::seq::index;
use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::matrix::{hstack, orthonormalize, svd, Mat, OrthoBasis, SupportSet};
use crate::model::ProblemInstance;
use crate::rng::{gaussian_matrix, random_sign, seeded};

const ORTH_TOL: f64 = 1e-8;

/// How corrupted entries are placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportModel {
    /// Each entry independently with probability `rho`.
    Bernoulli(f64),
    /// Exactly `m` entries, uniformly without replacement.
    Uniform(usize),
}

pub fn sample_support<R: Rng>(rows: usize, cols: usize, model: SupportModel, rng: &mut R) -> Result<SupportSet> {
    let total = rows * cols;
    match model {
        SupportModel::Bernoulli(rho) => {
            ensure((0.0..=1.0).contains(&rho), || format!("Bernoulli rate {rho} outside [0, 1]"))?;
            let mask = (0..total).map(|_| rng.random_bool(rho)).collect();
            Ok(SupportSet::from_mask(rows, cols, mask))
        }
        SupportModel::Uniform(m) => {
            ensure(m <= total, || format!("cannot place {m} entries in a {rows}x{cols} matrix"))?;
            let mut mask = vec![false; total];
            for k in index::sample(rng, total, m) {
                mask[k] = true;
            }
            Ok(SupportSet::from_mask(rows, cols, mask))
        }
    }
}

/// `±1` entries with equal probability on `omega`.
fn sign_matrix<R: Rng>(omega: &SupportSet, rng: &mut R) -> Mat {
    let (rows, cols) = omega.shape();
    let mut s = Mat::zeros(rows, cols);
    for (i, j) in omega.iter() {
        s[(i, j)] = random_sign(rng);
    }
    s
}

fn orth_exact(a: &Mat, rank: usize, what: &str) -> Result<OrthoBasis> {
    let q = orthonormalize(a, ORTH_TOL)?;
    if q.rank() < rank {
        return Err(Error::Numerical {
            iteration: 0,
            source: Box::new(Error::InvalidParameter(format!(
                "{what}: sampled matrix has rank {} < {rank}",
                q.rank()
            ))),
        });
    }
    Ok(q.select(0, rank))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaticGenParams {
    pub n1: usize,
    /// Number of columns of the training matrix `M_G`.
    pub d: usize,
    pub n2: usize,
    /// Number of corrupted entries.
    pub m: usize,
    pub r: usize,
    pub r0: usize,
    pub r_new: usize,
    pub r_extra: usize,
    pub seed: u64,
}

impl StaticGenParams {
    /// `n1 = d = 200`, `n2 = 120`, `m = 0.075 n1 n2`, `r = 20`, `r0 = 18`, `r_new = 2`.
    pub fn reference(r_extra: usize, seed: u64) -> Self {
        Self {
            n1: 200,
            d: 200,
            n2: 120,
            m: 1800,
            r: 20,
            r0: 18,
            r_new: 2,
            r_extra,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.r == self.r0 + self.r_new, || {
            format!("r = {} but r0 + r_new = {}", self.r, self.r0 + self.r_new)
        })?;
        ensure(self.m <= self.n1 * self.n2, || format!("m = {} exceeds n1 n2", self.m))?;
        let total = self.r0 + self.r_extra + self.r_new;
        ensure(total <= self.n1.min(self.d), || {
            format!("r0 + r_extra + r_new = {total} exceeds min(n1, d) = {}", self.n1.min(self.d))
        })?;
        ensure(self.n2 >= 1, || "n2 must be positive".to_string())
    }
}

#[derive(Debug, Clone)]
pub struct StaticInstance {
    pub problem: ProblemInstance,
    /// `M_G = G Y1`, the training data the prior is computed from.
    pub m_train: Mat,
}

/// Orthonormalizes an `n1 × (r0 + r_extra + r_new)` Gaussian matrix into
/// `[U0 G_extra U_new]`, sets `M_G = [U0 G_extra] Y1` and
/// `M = [U0 U_new] Y2 + S` with `N(0, 1/n1)` coefficients and `±1` errors on
/// `m` uniformly placed entries. The prior is the left singular basis of `M_G`.
pub fn gen_static_instance(p: &StaticGenParams) -> Result<StaticInstance> {
    p.validate()?;
    let mut rng = seeded(p.seed);
    let var = 1.0 / p.n1 as f64;
    let total = p.r0 + p.r_extra + p.r_new;

    let q = if total == 0 {
        OrthoBasis::empty(p.n1)
    } else {
        orth_exact(&gaussian_matrix(&mut rng, p.n1, total, var), total, "basis")?
    };
    let u0 = q.select(0, p.r0);
    let g_extra = q.select(p.r0, p.r0 + p.r_extra);
    let u_new = q.select(p.r0 + p.r_extra, total);
    let g = u0.concat(&g_extra)?;
    let u = u0.concat(&u_new)?;

    let y1 = gaussian_matrix(&mut rng, g.rank(), p.d, var);
    let y2 = gaussian_matrix(&mut rng, u.rank(), p.n2, var);
    let m_train = g.columns() * y1;
    let l = u.columns() * y2;

    let omega = sample_support(p.n1, p.n2, SupportModel::Uniform(p.m), &mut rng)?;
    let s = sign_matrix(&omega, &mut rng);

    let prior = svd(&m_train)?.u;
    let problem = ProblemInstance {
        m: &l + &s,
        prior,
        truth_l: Some(l),
        truth_s: Some(s),
        truth_support: Some(omega),
        noise_bound: None,
    };
    problem.validate()?;
    Ok(StaticInstance { problem, m_train })
}

/// `floor(frac · r)`, robust to `0.15 · 20` landing just below 3.
pub fn floor_fraction(frac: f64, r: usize) -> usize {
    (frac * r as f64 + 1e-9).floor() as usize
}

/// Phase-transition instance: `L = X Yᵀ` with `X ~ N(0, 1/n1)` (`n1 × r`)
/// and `Y ~ N(0, 1/n2)` (`n2 × r`); `±1` errors on `m` uniform entries.
/// `G = [U0 G_extra]` where `U0` is the first `r - r_new` columns of the
/// orthonormalized `X` and `G_extra` the first `r_extra` columns of the
/// orthonormalized `(I - U Uᵀ) X1`, `X1` an `n1 × 2 r_extra` Gaussian.
pub fn gen_phase_instance(
    n1: usize,
    n2: usize,
    r: usize,
    m: usize,
    r_new_frac: f64,
    r_extra_frac: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    ensure(r >= 1, || "rank must be at least 1".to_string())?;
    ensure(m <= n1 * n2, || format!("m = {m} exceeds n1 n2"))?;
    ensure(r <= n1.min(n2), || format!("rank {r} exceeds the matrix dimensions"))?;
    ensure((0.0..=1.0).contains(&r_new_frac) && (0.0..=1.0).contains(&r_extra_frac), || {
        "fractions must lie in [0, 1]".to_string()
    })?;
    let r_new = floor_fraction(r_new_frac, r);
    let r_extra = floor_fraction(r_extra_frac, r);
    ensure(r + r_extra <= n1, || format!("r + r_extra = {} exceeds n1", r + r_extra))?;

    let mut rng = seeded(seed);
    let x = gaussian_matrix(&mut rng, n1, r, 1.0 / n1 as f64);
    let y = gaussian_matrix(&mut rng, n2, r, 1.0 / n2 as f64);
    let l = &x * y.transpose();
    let omega = sample_support(n1, n2, SupportModel::Uniform(m), &mut rng)?;
    let s = sign_matrix(&omega, &mut rng);

    let u = orth_exact(&x, r, "X")?;
    let u0 = u.select(0, r - r_new);
    let g = if r_extra == 0 {
        u0
    } else {
        let x1 = gaussian_matrix(&mut rng, n1, 2 * r_extra, 1.0 / n1 as f64);
        let g_extra = orth_exact(&u.project_out(&x1), r_extra, "X1")?;
        u0.concat(&g_extra)?
    };

    let problem = ProblemInstance {
        m: &l + &s,
        prior: g,
        truth_l: Some(l),
        truth_s: Some(s),
        truth_support: Some(omega),
        noise_bound: None,
    };
    problem.validate()?;
    Ok(problem)
}

/// Where the sparse columns of an online sequence come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnlineSupport {
    /// Each entry independently with probability `p`, magnitude `Unif[lo, hi]`.
    Bernoulli { p: f64, lo: f64, hi: f64 },
    /// A block of `s` consecutive rows that moves down by `step` every
    /// `period` columns, wrapping at `n`; magnitudes `Unif[lo, hi]`.
    Correlated { s: usize, period: usize, step: usize, lo: f64, hi: f64 },
}

/// Which `c_old` columns of the current basis leave at a change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Removal {
    #[default]
    Last,
    First,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineGenParams {
    pub n: usize,
    pub r0: usize,
    /// Training columns preceding the test columns.
    pub t0: usize,
    pub test_len: usize,
    /// Global 0-based column indices at which the subspace changes.
    pub change_times: Vec<usize>,
    pub c_new: usize,
    pub c_old: usize,
    pub gamma: f64,
    pub gamma_new: f64,
    /// Columns after a change during which new directions use `gamma_new`.
    pub ramp_length: usize,
    pub support: OnlineSupport,
    pub removal: Removal,
    pub seed: u64,
}

/// The three sparse-part settings of the online comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineCase {
    /// Independent Bernoulli supports, `gamma_new = gamma`.
    A,
    /// Block support of size 5 moving by 5 every 25 columns, `gamma_new = 1`.
    B,
    /// Block support of size 10 moving by 5 every 25 columns, `gamma_new = 1`.
    C,
}

impl std::str::FromStr for OnlineCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(OnlineCase::A),
            "b" => Ok(OnlineCase::B),
            "c" => Ok(OnlineCase::C),
            other => Err(Error::InvalidParameter(format!("unknown online case `{other}`"))),
        }
    }
}

impl OnlineGenParams {
    /// `n = 256`, `J = 3`, `r0 = 40`, `t0 = 200`, `c_new = c_old = 4`,
    /// `γ = 5`, changes at `t0 + 6αj + 1` (1-based) with `α = 100`, and 2400
    /// test columns.
    pub fn standard(case: OnlineCase, seed: u64) -> Self {
        let t0 = 200;
        let alpha = 100;
        let (gamma_new, support) = match case {
            OnlineCase::A => (5.0, OnlineSupport::Bernoulli { p: 0.0781, lo: 20.0, hi: 60.0 }),
            OnlineCase::B => (
                1.0,
                OnlineSupport::Correlated { s: 5, period: 25, step: 5, lo: 20.0, hi: 60.0 },
            ),
            OnlineCase::C => (
                1.0,
                OnlineSupport::Correlated { s: 10, period: 25, step: 5, lo: 20.0, hi: 60.0 },
            ),
        };
        Self {
            n: 256,
            r0: 40,
            t0,
            test_len: 2400,
            // 1-based t0 + 6αj + 1 is 0-based t0 + 6αj
            change_times: (1..=3).map(|j| t0 + 6 * alpha * j).collect(),
            c_new: 4,
            c_old: 4,
            gamma: 5.0,
            gamma_new,
            ramp_length: 1700,
            support,
            removal: Removal::Last,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n >= 1 && self.r0 <= self.n, || format!("r0 = {} exceeds n = {}", self.r0, self.n))?;
        ensure(self.gamma >= 0.0 && self.gamma_new >= 0.0, || "gamma values must be nonnegative".to_string())?;
        let total = self.t0 + self.test_len;
        let mut prev = None;
        for &t in &self.change_times {
            ensure(prev.is_none_or(|p| t > p), || "change times must be strictly increasing".to_string())?;
            ensure(t >= self.t0 && t < total, || {
                format!("change time {t} outside the test window [{}, {total})", self.t0)
            })?;
            prev = Some(t);
        }
        let mut rank = self.r0;
        for _ in &self.change_times {
            ensure(self.c_old <= rank, || format!("cannot remove {} of {rank} directions", self.c_old))?;
            rank = rank - self.c_old + self.c_new;
            ensure(rank + self.c_old <= self.n, || "subspace dimension exceeds n".to_string())?;
        }
        match self.support {
            OnlineSupport::Bernoulli { p, lo, hi } => {
                ensure((0.0..=1.0).contains(&p), || format!("support rate {p} outside [0, 1]"))?;
                ensure(lo <= hi, || "empty magnitude range".to_string())?;
            }
            OnlineSupport::Correlated { s, period, lo, hi, .. } => {
                ensure(s <= self.n && period >= 1, || "invalid correlated support".to_string())?;
                ensure(lo <= hi, || "empty magnitude range".to_string())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SequenceData {
    /// Clean low-rank training columns, `n × t0`.
    pub m_train: Mat,
    pub m_test: Mat,
    pub l_test: Mat,
    pub s_test: Mat,
    /// Change times as 0-based indices into the test columns.
    pub test_change_times: Vec<usize>,
    /// `P_0, ..., P_J`.
    pub bases: Vec<OrthoBasis>,
}

impl SequenceData {
    /// Half-open test column ranges between consecutive changes.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut bounds = vec![0];
        bounds.extend(self.test_change_times.iter().copied().filter(|&t| t > 0));
        bounds.push(self.m_test.ncols());
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

struct Direction {
    vector: Mat,
    /// Global column at which the direction entered, `None` for `P_0`.
    added: Option<usize>,
}

fn basis_of(dirs: &[Direction], n: usize) -> OrthoBasis {
    let cols: Vec<_> = dirs.iter().map(|d| d.vector.column(0).into_owned()).collect();
    if cols.is_empty() {
        OrthoBasis::empty(n)
    } else {
        OrthoBasis::from_orthonormal(Mat::from_columns(&cols))
    }
}

/// Online sequence with piecewise-constant subspaces.
///
/// `P_0` is an orthonormalized `n × r0` Gaussian. At each change `c_old`
/// directions leave and `c_new` directions orthogonal to the whole previous
/// basis enter. Coefficients are `Unif[-γ, γ]`, except along a direction
/// during the first `ramp_length` columns after it entered, where they are
/// `Unif[-γ_new, γ_new]`. Sparse entries are added to the test columns only.
pub fn gen_online_sequence(p: &OnlineGenParams) -> Result<SequenceData> {
    p.validate()?;
    let mut rng = seeded(p.seed);
    let n = p.n;
    let total = p.t0 + p.test_len;

    let p0 = orth_exact(&gaussian_matrix(&mut rng, n, p.r0, 1.0 / n as f64), p.r0, "P_0")?;
    let mut dirs: Vec<Direction> = (0..p.r0)
        .map(|k| Direction {
            vector: p0.columns().columns(k, 1).into_owned(),
            added: None,
        })
        .collect();
    let mut bases = vec![basis_of(&dirs, n)];

    let mut l = Mat::zeros(n, total);
    let mut next_change = 0;
    for t in 0..total {
        if next_change < p.change_times.len() && p.change_times[next_change] == t {
            let current = basis_of(&dirs, n);
            let raw = current.project_out(&gaussian_matrix(&mut rng, n, p.c_new, 1.0 / n as f64));
            let new = if p.c_new == 0 {
                OrthoBasis::empty(n)
            } else {
                orth_exact(&raw, p.c_new, "new directions")?
            };
            match p.removal {
                Removal::Last => dirs.truncate(dirs.len() - p.c_old),
                Removal::First => {
                    dirs.drain(..p.c_old);
                }
            }
            for k in 0..p.c_new {
                dirs.push(Direction {
                    vector: new.columns().columns(k, 1).into_owned(),
                    added: Some(t),
                });
            }
            bases.push(basis_of(&dirs, n));
            next_change += 1;
        }
        let mut col = l.column_mut(t);
        for d in &dirs {
            let g = match d.added {
                Some(start) if t < start + p.ramp_length => p.gamma_new,
                _ => p.gamma,
            };
            let a = if g > 0.0 { rng.random_range(-g..=g) } else { 0.0 };
            col.axpy(a, &d.vector.column(0), 1.0);
        }
    }

    let m_train = l.columns(0, p.t0).into_owned();
    let l_test = l.columns(p.t0, p.test_len).into_owned();
    let (omega, lo, hi) = match p.support {
        OnlineSupport::Bernoulli { p: rate, lo, hi } => {
            (sample_support(n, p.test_len, SupportModel::Bernoulli(rate), &mut rng)?, lo, hi)
        }
        OnlineSupport::Correlated { s, period, step, lo, hi } => {
            (gen_correlated_support(n, s, period, step, p.test_len, 0)?, lo, hi)
        }
    };
    let mut s_test = Mat::zeros(n, p.test_len);
    for (i, j) in omega.iter() {
        s_test[(i, j)] = rng.random_range(lo..=hi);
    }

    Ok(SequenceData {
        m_train,
        m_test: &l_test + &s_test,
        l_test,
        s_test,
        test_change_times: p.change_times.iter().map(|t| t - p.t0).collect(),
        bases,
    })
}

/// Rolling block support: column `c` holds rows
/// `start + step·⌊c / period⌋ + k (mod n)` for `k < s`.
pub fn gen_correlated_support(
    n: usize,
    s: usize,
    period: usize,
    step: usize,
    num_cols: usize,
    start: usize,
) -> Result<SupportSet> {
    ensure(s <= n, || format!("block size {s} exceeds n = {n}"))?;
    ensure(period >= 1, || "period must be at least 1".to_string())?;
    let mut mask = vec![false; n * num_cols];
    for c in 0..num_cols {
        let first = (start + step * (c / period)) % n.max(1);
        for k in 0..s {
            mask[(first + k) % n + c * n] = true;
        }
    }
    Ok(SupportSet::from_mask(n, num_cols, mask))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyGenParams {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub r_new: usize,
    pub r_extra: usize,
    pub rho_s: f64,
    /// Sparse entries are `Unif[-amplitude, amplitude]`.
    pub amplitude: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl NoisyGenParams {
    /// `n1 = n2 = 200`, `r = 10`, `r_new = 2`, `r_extra = 0`, `ρ_s = 0.2`, errors in `[-5, 5]`.
    pub fn standard(sigma: f64, seed: u64) -> Self {
        Self {
            n1: 200,
            n2: 200,
            r: 10,
            r_new: 2,
            r_extra: 0,
            rho_s: 0.2,
            amplitude: 5.0,
            sigma,
            seed,
        }
    }
}

/// `M = X Yᵀ + S + Z` with `X, Y ~ N(0, 1/n1)`, Bernoulli(`ρ_s`) errors of
/// magnitude `Unif[-a, a]` and Gaussian `Z` rescaled to `||Z||_F = σ`. The
/// prior is built as in [`gen_phase_instance`].
pub fn gen_noisy_instance(p: &NoisyGenParams) -> Result<ProblemInstance> {
    ensure(p.sigma >= 0.0 && p.sigma.is_finite(), || format!("sigma = {} must be nonnegative", p.sigma))?;
    ensure(p.r >= 1 && p.r <= p.n1.min(p.n2), || format!("invalid rank {}", p.r))?;
    ensure(p.r_new <= p.r && p.r + p.r_extra <= p.n1, || "invalid r_new / r_extra".to_string())?;
    ensure((0.0..=1.0).contains(&p.rho_s), || format!("rho_s = {} outside [0, 1]", p.rho_s))?;
    let mut rng = seeded(p.seed);
    let var = 1.0 / p.n1 as f64;
    let x = gaussian_matrix(&mut rng, p.n1, p.r, var);
    let y = gaussian_matrix(&mut rng, p.n2, p.r, var);
    let l = &x * y.transpose();

    let omega = sample_support(p.n1, p.n2, SupportModel::Bernoulli(p.rho_s), &mut rng)?;
    let mut s = Mat::zeros(p.n1, p.n2);
    for (i, j) in omega.iter() {
        s[(i, j)] = rng.random_range(-p.amplitude..=p.amplitude);
    }

    let u = orth_exact(&x, p.r, "X")?;
    let mut g = u.select(0, p.r - p.r_new);
    if p.r_extra > 0 {
        let x1 = gaussian_matrix(&mut rng, p.n1, 2 * p.r_extra, var);
        g = g.concat(&orth_exact(&u.project_out(&x1), p.r_extra, "X1")?)?;
    }

    let z = gaussian_matrix(&mut rng, p.n1, p.n2, 1.0);
    let z = if p.sigma == 0.0 { Mat::zeros(p.n1, p.n2) } else { &z * (p.sigma / z.norm()) };

    let problem = ProblemInstance {
        m: &l + &s + z,
        prior: g,
        truth_l: Some(l),
        truth_s: Some(s),
        truth_support: Some(omega),
        noise_bound: if p.sigma == 0.0 { None } else { Some(p.sigma) },
    };
    problem.validate()?;
    Ok(problem)
}

/// Horizontal concatenation of a list of matrices with equal row counts.
pub fn hstack_all(parts: &[Mat]) -> Result<Mat> {
    let mut iter = parts.iter();
    let Some(first) = iter.next() else {
        return Ok(Mat::zeros(0, 0));
    };
    iter.try_fold(first.clone(), |acc, m| hstack(&acc, m))
}
