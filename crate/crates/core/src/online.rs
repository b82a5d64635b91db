//! Piecewise-batch online robust PCA.
//!
//! The test columns are cut into segments at known change times. Each
//! segment is solved with modified-PCP, using as prior the left singular
//! basis of the low-rank estimate of the previous segment; the first segment
//! uses a basis estimated from clean training data.

use crate::datagen::SequenceData;
use crate::error::{ensure, Error, Result};
use crate::matrix::{svd, svd_with_floor, Mat, OrthoBasis, RankFloor};
use crate::solvers::{solve_mod_pcp, AlmConfig, SolveResult};

/// How a basis is read off a data matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubspaceRule {
    /// Left singular vectors whose singular value clears the floor.
    AllNonzero(RankFloor),
    /// Shortest prefix holding at least this fraction of `Σ s_i²`.
    EnergyFraction(f64),
    /// Left singular vectors with `s_i > τ`.
    AbsoluteThreshold(f64),
}

/// Relative floor used to read a basis off a recovered low-rank matrix,
/// whose trailing singular values sit at the solver's residual level.
pub const UPDATE_FLOOR: f64 = 1e-6;

impl Default for SubspaceRule {
    fn default() -> Self {
        SubspaceRule::AllNonzero(RankFloor::Relative(UPDATE_FLOOR))
    }
}

impl SubspaceRule {
    /// The threshold `E[z²] / 9 = γ_new² / 27` for `z ~ Unif[-γ_new, γ_new]`.
    pub fn uniform_coefficient_threshold(gamma_new: f64) -> Self {
        SubspaceRule::AbsoluteThreshold(gamma_new * gamma_new / 27.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SubspaceRule::EnergyFraction(f) => {
                ensure(f > 0.0 && f <= 1.0, || format!("energy fraction {f} outside (0, 1]"))
            }
            SubspaceRule::AbsoluteThreshold(t) => ensure(t >= 0.0, || format!("threshold {t} < 0")),
            SubspaceRule::AllNonzero(_) => Ok(()),
        }
    }
}

/// Basis of the column space of `m` retained by `rule`; may be empty.
pub fn estimate_initial_subspace(m: &Mat, rule: SubspaceRule) -> Result<OrthoBasis> {
    rule.validate()?;
    ensure(m.ncols() > 0 && m.nrows() > 0, || "training matrix is empty".to_string())?;
    match rule {
        SubspaceRule::AllNonzero(floor) => Ok(svd_with_floor(m, floor)?.u),
        SubspaceRule::EnergyFraction(f) => {
            let dec = svd(m)?;
            let energy: Vec<f64> = dec.singular_values.iter().map(|s| s * s).collect();
            let total: f64 = energy.iter().sum();
            let mut acc = 0.0;
            let mut k = 0;
            // shortest prefix; the slack absorbs rounding in the running sum at f = 1
            while k < energy.len() && acc < f * total * (1.0 - 1e-12) {
                acc += energy[k];
                k += 1;
            }
            Ok(dec.u.select(0, k))
        }
        SubspaceRule::AbsoluteThreshold(t) => {
            let dec = svd(m)?;
            let k = dec.singular_values.iter().take_while(|&&s| s > t).count();
            Ok(dec.u.select(0, k))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMode {
    /// Modified-PCP with the propagated prior.
    #[default]
    ModPcp,
    /// PCP on every segment, ignoring priors.
    Pcp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Test-column indices at which a new segment starts; 0 is implicit.
    pub change_times: Vec<usize>,
    pub initial_rule: SubspaceRule,
    pub update_rule: SubspaceRule,
    pub solver: AlmConfig,
    pub mode: PriorMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            change_times: Vec::new(),
            initial_rule: SubspaceRule::default(),
            update_rule: SubspaceRule::default(),
            solver: AlmConfig::default(),
            mode: PriorMode::ModPcp,
        }
    }
}

impl PipelineConfig {
    /// Segment boundaries every `len` columns over `total` test columns.
    pub fn fixed_batches(len: usize, total: usize) -> Vec<usize> {
        (1..).map(|k| k * len).take_while(|&t| t < total).collect()
    }

    fn segments(&self, total: usize) -> Result<Vec<(usize, usize)>> {
        self.initial_rule.validate()?;
        self.update_rule.validate()?;
        let mut bounds = vec![0];
        for &t in &self.change_times {
            if t == 0 {
                continue;
            }
            ensure(t > *bounds.last().unwrap(), || "change times must be strictly increasing".to_string())?;
            ensure(t < total, || format!("change time {t} beyond the {total} test columns"))?;
            bounds.push(t);
        }
        bounds.push(total);
        Ok(bounds.windows(2).map(|w| (w[0], w[1])).collect())
    }
}

#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub j: usize,
    pub start: usize,
    pub end: usize,
    pub g_used: OrthoBasis,
    /// `None` when the solver failed; see `error`.
    pub solve: Option<SolveResult>,
    pub error: Option<String>,
    /// Per-column sparse errors, when the truth is known.
    pub nrmse_series: Vec<f64>,
}

impl SegmentResult {
    pub fn converged(&self) -> bool {
        self.solve.as_ref().is_some_and(|s| s.converged)
    }
}

/// Runs the segments in order. A failed solve is recorded and the next
/// segment reuses the prior the failed one was given.
pub fn run_segments(
    m_test: &Mat,
    initial: &OrthoBasis,
    cfg: &PipelineConfig,
    truth_s: Option<&Mat>,
) -> Result<Vec<SegmentResult>> {
    ensure(initial.ambient_dim() == m_test.nrows(), || "initial basis dimension differs from n".to_string())?;
    if let Some(s) = truth_s {
        if s.shape() != m_test.shape() {
            return Err(Error::Dimension("truth differs in shape from the test matrix".into()));
        }
    }
    let mut prior = initial.clone();
    let mut out = Vec::new();
    for (j, (start, end)) in cfg.segments(m_test.ncols())?.into_iter().enumerate() {
        let block = m_test.columns(start, end - start).into_owned();
        let g_used = match cfg.mode {
            PriorMode::ModPcp => prior.clone(),
            PriorMode::Pcp => OrthoBasis::empty(m_test.nrows()),
        };
        let (solve, error) = match solve_mod_pcp(&block, &g_used, &cfg.solver) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let nrmse_series = match (truth_s, &solve) {
            (Some(s), Some(sol)) => column_errors(&sol.s_hat, &s.columns(start, end - start).into_owned())
                .into_iter()
                .map(|c| c.value)
                .collect(),
            _ => Vec::new(),
        };
        if let Some(sol) = &solve {
            prior = estimate_initial_subspace(&sol.l_hat, cfg.update_rule)?;
        }
        out.push(SegmentResult { j, start, end, g_used, solve, error, nrmse_series });
    }
    Ok(out)
}

/// Estimates the initial basis from the training block and runs all segments.
pub fn run_piecewise(seq: &SequenceData, cfg: &PipelineConfig) -> Result<Vec<SegmentResult>> {
    let initial = estimate_initial_subspace(&seq.m_train, cfg.initial_rule)?;
    run_segments(&seq.m_test, &initial, cfg, Some(&seq.s_test))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnError {
    pub value: f64,
    /// The true column is zero, so `value` is an absolute error.
    pub zero_truth: bool,
}

/// `||ŝ_t - s_t|| / ||s_t||` per column, absolute where `s_t = 0`.
pub fn column_errors(s_hat: &Mat, s: &Mat) -> Vec<ColumnError> {
    (0..s.ncols())
        .map(|t| {
            let diff = (s_hat.column(t) - s.column(t)).norm();
            let denom = s.column(t).norm();
            if denom == 0.0 {
                ColumnError { value: diff, zero_truth: true }
            } else {
                ColumnError { value: diff / denom, zero_truth: false }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnMetric {
    pub t: usize,
    pub segment: usize,
    pub nrmse: f64,
    pub zero_truth: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineMetrics {
    pub per_column: Vec<ColumnMetric>,
    /// `||Ŝ_j - S_j||_F / ||S_j||_F` per segment; NaN for failed segments.
    pub per_segment: Vec<f64>,
    /// The same ratio over all columns of successful segments.
    pub overall: f64,
}

pub fn pipeline_metrics(results: &[SegmentResult], truth_s: &Mat) -> Result<PipelineMetrics> {
    let mut per_column = Vec::new();
    let mut per_segment = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for seg in results {
        ensure(seg.end <= truth_s.ncols(), || "segment extends past the truth".to_string())?;
        let s = truth_s.columns(seg.start, seg.end - seg.start).into_owned();
        let Some(sol) = &seg.solve else {
            per_segment.push(f64::NAN);
            continue;
        };
        if sol.s_hat.shape() != s.shape() {
            return Err(Error::Dimension("segment estimate differs in shape from the truth".into()));
        }
        for (k, c) in column_errors(&sol.s_hat, &s).into_iter().enumerate() {
            per_column.push(ColumnMetric {
                t: seg.start + k,
                segment: seg.j,
                nrmse: c.value,
                zero_truth: c.zero_truth,
                converged: sol.converged,
            });
        }
        let e = (&sol.s_hat - &s).norm_squared();
        let d = s.norm_squared();
        num += e;
        den += d;
        per_segment.push(if d > 0.0 { (e / d).sqrt() } else { e.sqrt() });
    }
    let overall = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(PipelineMetrics { per_column, per_segment, overall })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_online_sequence, OnlineCase, OnlineGenParams, OnlineSupport, Removal};
    use crate::matrix::orthonormalize;
    use crate::rng::{gaussian_matrix, seeded};

    fn low_rank(seed: u64, n: usize, cols: usize, r: usize) -> (OrthoBasis, Mat) {
        let mut rng = seeded(seed);
        let u = orthonormalize(&gaussian_matrix(&mut rng, n, r, 1.0), 1e-10).unwrap();
        let l = u.columns() * gaussian_matrix(&mut rng, r, cols, 1.0);
        (u, l)
    }

    #[test]
    fn rules_on_exact_low_rank_data() {
        let (u, l) = low_rank(1, 30, 20, 3);
        let b = estimate_initial_subspace(&l, SubspaceRule::default()).unwrap();
        assert_eq!(b.rank(), 3);
        assert!(b.projector_distance(&u) < 1e-10);
        let full = estimate_initial_subspace(&l, SubspaceRule::EnergyFraction(1.0)).unwrap();
        assert_eq!(full.rank(), 3);
        let one = estimate_initial_subspace(&l, SubspaceRule::EnergyFraction(1e-9)).unwrap();
        assert_eq!(one.rank(), 1);
        let none = estimate_initial_subspace(&l, SubspaceRule::AbsoluteThreshold(1e9)).unwrap();
        assert!(none.is_empty());
        assert!(estimate_initial_subspace(&l, SubspaceRule::EnergyFraction(0.0)).is_err());
        assert!(estimate_initial_subspace(&Mat::zeros(5, 0), SubspaceRule::default()).is_err());
    }

    #[test]
    fn training_block_recovers_initial_basis() {
        let seq = gen_online_sequence(&OnlineGenParams::standard(OnlineCase::B, 2)).unwrap();
        let b = estimate_initial_subspace(&seq.m_train, SubspaceRule::uniform_coefficient_threshold(1.0)).unwrap();
        assert_eq!(b.rank(), 40);
        assert!(b.projector_distance(&seq.bases[0]) < 1e-6);
    }

    #[test]
    fn stationary_clean_data_has_zero_error() {
        let (u, l) = low_rank(4, 40, 90, 3);
        let cfg = PipelineConfig { change_times: vec![30, 60], ..Default::default() };
        let res = run_segments(&l, &u, &cfg, Some(&Mat::zeros(40, 90))).unwrap();
        assert_eq!(res.len(), 3);
        let m = pipeline_metrics(&res, &Mat::zeros(40, 90)).unwrap();
        // absolute errors, judged against the scale of the data
        let tol = 1e-6 * l.norm();
        let worst = m.per_column.iter().map(|c| c.nrmse).fold(0.0, f64::max);
        assert!(m.per_column.iter().all(|c| c.zero_truth), "worst {worst}");
        assert!(worst < tol, "worst {worst} vs {tol}");
        assert!(m.overall < tol);
    }

    #[test]
    fn segments_are_independent_solves() {
        let p = OnlineGenParams {
            n: 40,
            r0: 3,
            t0: 30,
            test_len: 120,
            change_times: vec![90],
            c_new: 1,
            c_old: 1,
            gamma: 1.0,
            gamma_new: 1.0,
            ramp_length: 10,
            support: OnlineSupport::Bernoulli { p: 0.05, lo: 5.0, hi: 10.0 },
            removal: Removal::Last,
            seed: 3,
        };
        let seq = gen_online_sequence(&p).unwrap();
        let cfg = PipelineConfig { change_times: vec![60], ..Default::default() };
        let res = run_piecewise(&seq, &cfg).unwrap();
        for seg in &res {
            let block = seq.m_test.columns(seg.start, seg.end - seg.start).into_owned();
            let direct = solve_mod_pcp(&block, &seg.g_used, &cfg.solver).unwrap();
            assert_eq!(direct.s_hat, seg.solve.as_ref().unwrap().s_hat);
        }
        // exact recovery of segment 0 hands the true basis forward
        assert!(res[1].g_used.projector_distance(&seq.bases[0]) < 1e-6);
    }

    #[test]
    fn metric_edge_cases() {
        let s = Mat::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let errs = column_errors(&s, &s);
        assert!(errs.iter().all(|c| c.value == 0.0));
        let errs = column_errors(&Mat::zeros(2, 3), &s);
        assert_eq!(errs[0].value, 1.0);
        assert_eq!(errs[2].value, 1.0);
        assert!(errs[1].zero_truth && errs[1].value == 0.0);
    }

    #[test]
    fn metrics_match_recomputation() {
        let mut rng = seeded(5);
        let s = gaussian_matrix(&mut rng, 6, 10, 1.0);
        let s_hat = &s + gaussian_matrix(&mut rng, 6, 10, 0.01);
        let (_, l) = low_rank(6, 6, 10, 1);
        let fake = SolveResult {
            l_hat: l.clone(),
            s_hat: s_hat.columns(4, 6).into_owned(),
            l_new_hat: l.clone(),
            x_hat: Mat::zeros(6, 0),
            iterations: 1,
            final_residual: 0.0,
            converged: true,
            lambda: 0.1,
            tau_trace: vec![],
            l_new_rank: 0,
        };
        let seg = SegmentResult {
            j: 0,
            start: 4,
            end: 10,
            g_used: OrthoBasis::empty(6),
            solve: Some(fake),
            error: None,
            nrmse_series: vec![],
        };
        let m = pipeline_metrics(&[seg], &s).unwrap();
        for c in &m.per_column {
            let expect = (s_hat.column(c.t) - s.column(c.t)).norm() / s.column(c.t).norm();
            assert!((c.nrmse - expect).abs() < 1e-15);
        }
        let block = s.columns(4, 6);
        let expect = (s_hat.columns(4, 6) - block).norm() / block.norm();
        assert!((m.per_segment[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn batch_boundaries() {
        assert_eq!(PipelineConfig::fixed_batches(200, 600), vec![200, 400]);
        assert_eq!(PipelineConfig::fixed_batches(200, 601), vec![200, 400, 600]);
        let cfg = PipelineConfig { change_times: vec![5, 5], ..Default::default() };
        assert!(run_segments(&Mat::zeros(4, 10), &OrthoBasis::empty(4), &cfg, None).is_err());
    }
}
