//! Monte Carlo experiments written as CSV tables.
//!
//! An experiment is described by a manifest (`key = value` lines). Every
//! `(point, trial)` pair gets the seed `derive_seed(base_seed, point, trial)`
//! and produces one row per solver. Rows are emitted parameter-major and
//! trial-minor whatever order the parallel workers finish in, so the same
//! manifest always produces a byte-identical table. Wall-clock times go to a
//! separate `*.timing.csv` file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{
    gen_noisy_instance, gen_online_sequence, gen_phase_instance, gen_static_instance, NoisyGenParams, OnlineCase,
    OnlineGenParams, StaticGenParams,
};
use crate::diagnostics::{rho_r_modpcp, rho_r_pcp};
use crate::error::{ensure, Error, Result};
use crate::io::{fmt_f64, read_matrix_csv, Manifest};
use crate::matrix::{svd, Mat, OrthoBasis};
use crate::model::{compute_l_new, ProblemInstance};
use crate::online::{run_piecewise, PipelineConfig, PriorMode, SubspaceRule};
use crate::rng::derive_seed;
use crate::solvers::{
    solve_mod_pcp, solve_stable_mod_pcp, AlmConfig, LambdaRule, SolveResult, StableConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    RextraSweep,
    RnewSweep,
    N2Sweep,
    PhaseGrid,
    OnlineAbc,
    NoisySigmaSweep,
    SolveSingle,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rextra_sweep" => Self::RextraSweep,
            "rnew_sweep" => Self::RnewSweep,
            "n2_sweep" => Self::N2Sweep,
            "phase_grid" => Self::PhaseGrid,
            "online_abc" => Self::OnlineAbc,
            "noisy_sigma_sweep" => Self::NoisySigmaSweep,
            "solve_single" => Self::SolveSingle,
            other => return Err(Error::InvalidParameter(format!("unknown experiment kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    pub solver: AlmConfig,
    /// The full manifest, for kind-specific keys.
    pub params: Manifest,
}

impl ExperimentSpec {
    pub fn from_manifest(m: Manifest) -> Result<Self> {
        let kind = m.require::<String>("kind")?.parse()?;
        let trials = m.get_or("trials", 10usize)?;
        ensure(trials >= 1, || "trials must be at least 1".to_string())?;
        let mut solver = AlmConfig::default();
        solver.rel_tol = m.get_or("tol", solver.rel_tol)?;
        solver.max_iters = m.get_or("max_iters", solver.max_iters)?;
        if let Some(l) = m.get("lambda") {
            if l != "auto" {
                solver.lambda = LambdaRule::Explicit(m.require("lambda")?);
            }
        }
        solver.validate()?;
        Ok(Self {
            kind,
            trials,
            base_seed: m.get_or("base_seed", 1u64)?,
            output: m.get("output").map(|p| m.resolve_path(p)),
            solver,
            params: m,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_manifest(Manifest::read(path)?)
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: Clone,
    {
        let values = self.params.get_list(key)?.unwrap_or_else(|| default.to_vec());
        ensure(!values.is_empty(), || format!("`{key}` must not be empty"))?;
        Ok(values)
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.params.get_or(key, default)
    }

    /// Parameter points in output order.
    pub fn points(&self) -> Result<Vec<Point>> {
        let pts: Vec<Vec<(&'static str, String)>> = match self.kind {
            ExperimentKind::RextraSweep => {
                let values = self.list("r_extra", &[0usize, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100])?;
                values.into_iter().map(|v| vec![("r_extra", v.to_string())]).collect()
            }
            ExperimentKind::RnewSweep => {
                let values = self.list("r_new", &[1usize, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20])?;
                values.into_iter().map(|v| vec![("r_new", v.to_string())]).collect()
            }
            ExperimentKind::N2Sweep => {
                let values = self.list("n2", &[40usize, 60, 80, 100, 120, 140, 160, 180, 200])?;
                values.into_iter().map(|v| vec![("n2", v.to_string())]).collect()
            }
            ExperimentKind::PhaseGrid => {
                let ranks = self.list("r", &[5usize, 10, 15, 20, 25, 30, 35, 40])?;
                let rhos = self.list("rho_s", &[0.05f64, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4])?;
                let mut pts = Vec::new();
                for r in &ranks {
                    for rho in &rhos {
                        pts.push(vec![("r", r.to_string()), ("rho_s", rho.to_string())]);
                    }
                }
                pts
            }
            ExperimentKind::OnlineAbc => {
                let cases = self.list("cases", &["a".to_string(), "b".to_string(), "c".to_string()])?;
                for c in &cases {
                    c.parse::<OnlineCase>()?;
                }
                cases.into_iter().map(|c| vec![("case", c)]).collect()
            }
            ExperimentKind::NoisySigmaSweep => {
                let values = self.list("sigma", &[0.1f64, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])?;
                values.into_iter().map(|v| vec![("sigma", v.to_string())]).collect()
            }
            ExperimentKind::SolveSingle => vec![vec![]],
        };
        Ok(pts
            .into_iter()
            .enumerate()
            .map(|(index, params)| Point { index, params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect() })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub index: usize,
    pub params: Vec<(String, String)>,
}

impl Point {
    fn value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| Error::InvalidParameter(format!("point lacks `{key}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub point: usize,
    pub params: Vec<(String, String)>,
    pub trial: usize,
    pub seed: u64,
    pub solver: String,
    /// `||S - Ŝ||_F² / ||S||_F²`.
    pub sparse_error: f64,
    /// `||L̂ - L||_F / ||L||_F`.
    pub lowrank_rel_error: f64,
    /// `||L̂ - L||_F / sqrt(n1 n2)`.
    pub rms_l: f64,
    pub rms_s: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `ρ_r` of the solver's incoherence conditions, where defined.
    pub rho_max: f64,
    pub error: Option<String>,
    pub wall_time: f64,
}

impl MetricRow {
    pub fn success_exact(&self) -> bool {
        self.sparse_error < 1e-6
    }

    pub fn success_lowrank(&self) -> bool {
        self.lowrank_rel_error <= 1e-3
    }
}

pub const METRIC_COLUMNS: [&str; 10] = [
    "sparse_error",
    "lowrank_rel_error",
    "rms_l",
    "rms_s",
    "success_1e6",
    "success_1e3",
    "iterations",
    "converged",
    "rho_max",
    "error",
];

struct Outcome {
    l_hat: Mat,
    s_hat: Mat,
    iterations: usize,
    converged: bool,
    rho_max: f64,
}

fn errors_row(point: &Point, trial: usize, seed: u64, solver: &str, l: Option<&Mat>, s: Option<&Mat>, out: Result<Outcome>, wall: f64) -> MetricRow {
    let mut row = MetricRow {
        point: point.index,
        params: point.params.clone(),
        trial,
        seed,
        solver: solver.to_string(),
        sparse_error: f64::NAN,
        lowrank_rel_error: f64::NAN,
        rms_l: f64::NAN,
        rms_s: f64::NAN,
        iterations: 0,
        converged: false,
        rho_max: f64::NAN,
        error: None,
        wall_time: wall,
    };
    match out {
        Err(e) => row.error = Some(e.to_string()),
        Ok(o) => {
            let size = ((o.l_hat.nrows() * o.l_hat.ncols()) as f64).sqrt();
            if let Some(l) = l {
                let d = (&o.l_hat - l).norm();
                row.lowrank_rel_error = d / l.norm();
                row.rms_l = d / size;
            }
            if let Some(s) = s {
                let d = (&o.s_hat - s).norm();
                row.sparse_error = d * d / s.norm_squared();
                row.rms_s = d / size;
            }
            row.iterations = o.iterations;
            row.converged = o.converged;
            row.rho_max = o.rho_max;
        }
    }
    row
}

fn from_solve(r: SolveResult, rho_max: f64) -> Outcome {
    Outcome { l_hat: r.l_hat, s_hat: r.s_hat, iterations: r.iterations, converged: r.converged, rho_max }
}

fn rho_mod(inst: &ProblemInstance) -> Result<f64> {
    let l = inst.truth_l.as_ref().ok_or_else(|| Error::InvalidParameter("no truth".into()))?;
    let new = compute_l_new(l, &inst.prior)?;
    let (n1, n2) = inst.shape();
    Ok(rho_r_modpcp(&inst.prior, &new.u_new, &new.v_new, n1, n2)?.rho_max)
}

fn rho_plain(inst: &ProblemInstance) -> Result<f64> {
    let l = inst.truth_l.as_ref().ok_or_else(|| Error::InvalidParameter("no truth".into()))?;
    let dec = svd(l)?;
    let (n1, n2) = inst.shape();
    Ok(rho_r_pcp(&dec.u, &dec.v, n1, n2)?.rho_max)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Solves an instance with modified-PCP and PCP, one row each.
fn static_rows(inst: Result<ProblemInstance>, point: &Point, trial: usize, seed: u64, cfg: &AlmConfig, with_rho: bool) -> Vec<MetricRow> {
    let inst = match inst {
        Ok(i) => i,
        Err(e) => {
            let msg = e.to_string();
            return ["mod_pcp", "pcp"]
                .iter()
                .map(|s| errors_row(point, trial, seed, s, None, None, Err(Error::InvalidParameter(msg.clone())), 0.0))
                .collect();
        }
    };
    let (l, s) = (inst.truth_l.as_ref(), inst.truth_s.as_ref());
    let empty = OrthoBasis::empty(inst.m.nrows());
    let mut rows = Vec::new();
    for (name, prior) in [("mod_pcp", &inst.prior), ("pcp", &empty)] {
        let (out, wall) = timed(|| -> Result<Outcome> {
            let r = solve_mod_pcp(&inst.m, prior, cfg)?;
            let rho = if !with_rho {
                f64::NAN
            } else if name == "mod_pcp" {
                rho_mod(&inst)?
            } else {
                rho_plain(&inst)?
            };
            Ok(from_solve(r, rho))
        });
        rows.push(errors_row(point, trial, seed, name, l, s, out, wall));
    }
    rows
}

fn m_count(frac: f64, n1: usize, n2: usize) -> usize {
    (frac * (n1 * n2) as f64).round() as usize
}

fn run_point_trial(spec: &ExperimentSpec, point: &Point, trial: usize) -> Result<Vec<MetricRow>> {
    let seed = derive_seed(spec.base_seed, point.index as u64, trial as u64);
    let cfg = &spec.solver;
    Ok(match spec.kind {
        ExperimentKind::RextraSweep | ExperimentKind::RnewSweep | ExperimentKind::N2Sweep => {
            let (n1_default, d_default, n2_default, r0_default, r_new_default, r_extra_default) = match spec.kind {
                ExperimentKind::RextraSweep => (200, 200, 120, 18, 2, 0),
                ExperimentKind::RnewSweep => (200, 200, 120, 0, 0, 5),
                _ => (200, 60, 120, 18, 2, 0),
            };
            let n1 = spec.get("n1", n1_default)?;
            let d = spec.get("d", d_default)?;
            // the swept key comes from the point, every other key from the manifest
            let n2 = match spec.kind {
                ExperimentKind::N2Sweep => point.value("n2")?,
                _ => spec.get("n2", n2_default)?,
            };
            let r_extra = match spec.kind {
                ExperimentKind::RextraSweep => point.value("r_extra")?,
                _ => spec.get("r_extra", r_extra_default)?,
            };
            let (r0, r_new) = match spec.kind {
                ExperimentKind::RnewSweep => {
                    let r: usize = spec.get("r", 30)?;
                    let r_new: usize = point.value("r_new")?;
                    ensure(r_new <= r, || format!("r_new = {r_new} exceeds r = {r}"))?;
                    (r - r_new, r_new)
                }
                _ => (spec.get("r0", r0_default)?, spec.get("r_new", r_new_default)?),
            };
            let m = m_count(spec.get("m_frac", 0.075)?, n1, n2);
            let p = StaticGenParams { n1, d, n2, m, r: r0 + r_new, r0, r_new, r_extra, seed };
            static_rows(gen_static_instance(&p).map(|s| s.problem), point, trial, seed, cfg, true)
        }
        ExperimentKind::PhaseGrid => {
            let n1 = spec.get("n1", 100)?;
            let n2 = spec.get("n2", 100)?;
            let r: usize = point.value("r")?;
            let rho: f64 = point.value("rho_s")?;
            let inst = gen_phase_instance(
                n1,
                n2,
                r,
                m_count(rho, n1, n2),
                spec.get("r_new_frac", 0.15)?,
                spec.get("r_extra_frac", 0.15)?,
                seed,
            );
            static_rows(inst, point, trial, seed, cfg, false)
        }
        ExperimentKind::OnlineAbc => {
            let case: OnlineCase = point.value::<String>("case")?.parse()?;
            let mut p = OnlineGenParams::standard(case, seed);
            p.test_len = spec.get("test_len", p.test_len)?;
            p.change_times.retain(|&t| t < p.t0 + p.test_len);
            let batch = spec.get("batch", 200usize)?;
            let seq = gen_online_sequence(&p)?;
            let mut rows = Vec::new();
            for (name, mode) in [("mod_pcp", PriorMode::ModPcp), ("pcp", PriorMode::Pcp)] {
                let pc = PipelineConfig {
                    change_times: PipelineConfig::fixed_batches(batch, p.test_len),
                    initial_rule: SubspaceRule::uniform_coefficient_threshold(p.gamma_new),
                    update_rule: SubspaceRule::default(),
                    solver: cfg.clone(),
                    mode,
                };
                let (out, wall) = timed(|| -> Result<Outcome> {
                    let res = run_piecewise(&seq, &pc)?;
                    let mut l_hat = Mat::zeros(p.n, p.test_len);
                    let mut s_hat = Mat::zeros(p.n, p.test_len);
                    let mut iterations = 0;
                    let mut converged = true;
                    for seg in &res {
                        let sol = seg.solve.as_ref().ok_or_else(|| {
                            Error::InvalidParameter(seg.error.clone().unwrap_or_default())
                        })?;
                        l_hat.columns_mut(seg.start, seg.end - seg.start).copy_from(&sol.l_hat);
                        s_hat.columns_mut(seg.start, seg.end - seg.start).copy_from(&sol.s_hat);
                        iterations += sol.iterations;
                        converged &= sol.converged;
                    }
                    Ok(Outcome { l_hat, s_hat, iterations, converged, rho_max: f64::NAN })
                });
                rows.push(errors_row(point, trial, seed, name, Some(&seq.l_test), Some(&seq.s_test), out, wall));
            }
            rows
        }
        ExperimentKind::NoisySigmaSweep => {
            let sigma: f64 = point.value("sigma")?;
            let mut p = NoisyGenParams::standard(sigma, seed);
            p.n1 = spec.get("n1", p.n1)?;
            p.n2 = spec.get("n2", p.n2)?;
            p.r = spec.get("r", p.r)?;
            p.r_new = spec.get("r_new", p.r_new)?;
            p.r_extra = spec.get("r_extra", p.r_extra)?;
            p.rho_s = spec.get("rho_s", p.rho_s)?;
            let inst = gen_noisy_instance(&p)?;
            let (l, s) = (inst.truth_l.as_ref(), inst.truth_s.as_ref());
            let scfg = StableConfig { alm: cfg.clone(), ..Default::default() };
            let empty = OrthoBasis::empty(p.n1);
            let mut rows = Vec::new();
            for (name, prior) in [("stable_mod_pcp", &inst.prior), ("stable_pcp", &empty)] {
                let (out, wall) = timed(|| solve_stable_mod_pcp(&inst.m, prior, sigma, &scfg).map(|r| from_solve(r, f64::NAN)));
                rows.push(errors_row(point, trial, seed, name, l, s, out, wall));
            }
            let zero = Outcome {
                l_hat: Mat::zeros(p.n1, p.n2),
                s_hat: Mat::zeros(p.n1, p.n2),
                iterations: 0,
                converged: true,
                rho_max: f64::NAN,
            };
            rows.push(errors_row(point, trial, seed, "zero", l, s, Ok(zero), 0.0));
            rows
        }
        ExperimentKind::SolveSingle => {
            let m = read_matrix_csv(spec.params.resolve_path(&spec.params.require::<String>("matrix")?))?;
            let prior = match spec.params.get("prior") {
                Some(p) => OrthoBasis::new(read_matrix_csv(spec.params.resolve_path(p))?)?,
                None => OrthoBasis::empty(m.nrows()),
            };
            let load = |key: &str| -> Result<Option<Mat>> {
                spec.params.get(key).map(|p| read_matrix_csv(spec.params.resolve_path(p))).transpose()
            };
            let inst = ProblemInstance {
                m,
                prior,
                truth_l: load("truth_l")?,
                truth_s: load("truth_s")?,
                truth_support: None,
                noise_bound: None,
            };
            inst.validate()?;
            static_rows(Ok(inst), point, trial, seed, cfg, false)
        }
    })
}

/// Runs every `(point, trial)` pair in parallel and returns the rows in
/// deterministic order. A pair that fails before any solver runs yields a
/// single row carrying the error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    let points = spec.points()?;
    let trials = match spec.kind {
        ExperimentKind::SolveSingle => 1,
        _ => spec.trials,
    };
    let jobs: Vec<(&Point, usize)> = points.iter().flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
    let rows: Vec<Vec<MetricRow>> = jobs
        .par_iter()
        .map(|&(point, trial)| match run_point_trial(spec, point, trial) {
            Ok(rows) => rows,
            Err(e) => {
                let seed = derive_seed(spec.base_seed, point.index as u64, trial as u64);
                vec![errors_row(point, trial, seed, "none", None, None, Err(e), 0.0)]
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn header(params: &[(String, String)]) -> Vec<String> {
    let mut h = vec!["point".to_string()];
    h.extend(params.iter().map(|(k, _)| k.clone()));
    h.extend(["trial", "seed", "solver"].map(String::from));
    h.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    h
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes the metric table and its `*.timing.csv` sidecar.
pub fn write_rows(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let params = rows.first().map(|r| r.params.clone()).unwrap_or_default();
    w.write_record(header(&params)).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.point.to_string()];
        rec.extend(r.params.iter().map(|(_, v)| v.clone()));
        rec.extend([r.trial.to_string(), r.seed.to_string(), r.solver.clone()]);
        rec.extend([
            fmt_f64(r.sparse_error),
            fmt_f64(r.lowrank_rel_error),
            fmt_f64(r.rms_l),
            fmt_f64(r.rms_s),
            u8::from(r.success_exact()).to_string(),
            u8::from(r.success_lowrank()).to_string(),
            r.iterations.to_string(),
            u8::from(r.converged).to_string(),
            fmt_f64(r.rho_max),
            r.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let timing = timing_path(path);
    let mut w = csv::Writer::from_path(&timing).map_err(|e| csv_err(&timing, e))?;
    w.write_record(["point", "trial", "solver", "wall_time"]).map_err(|e| csv_err(&timing, e))?;
    for r in rows {
        w.write_record([r.point.to_string(), r.trial.to_string(), r.solver.clone(), fmt_f64(r.wall_time)])
            .map_err(|e| csv_err(&timing, e))?;
    }
    w.flush().map_err(|e| Error::io(&timing, e))
}

pub fn timing_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.timing.csv"))
}

/// Columns averaged by [`summarize`].
pub const SUMMARY_METRICS: [&str; 8] = [
    "sparse_error",
    "lowrank_rel_error",
    "rms_l",
    "rms_s",
    "success_1e6",
    "success_1e3",
    "iterations",
    "rho_max",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<String>,
    pub count: usize,
    pub failed: usize,
    /// `(mean, standard error)` per entry of [`SUMMARY_METRICS`].
    pub stats: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// `point`, parameter columns and `solver`.
    pub key_columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One aggregate row per `(point, solver)`, in order of first appearance.
/// Rows with a nonempty `error` are counted as failed and left out of the
/// means.
pub fn summarize(path: impl AsRef<Path>) -> Result<Summary> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let head: Vec<String> = rdr.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.iter().map(String::from).collect();
    let find = |name: &str| {
        head.iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))
    };
    let point_col = find("point")?;
    let trial_col = find("trial")?;
    let solver_col = find("solver")?;
    let error_col = find("error")?;
    let metric_cols = SUMMARY_METRICS.iter().map(|m| find(m)).collect::<Result<Vec<_>>>()?;
    ensure(point_col < trial_col, || "`point` must precede `trial`".to_string())?;
    let mut key_columns: Vec<String> = head[point_col..trial_col].to_vec();
    key_columns.push("solver".into());

    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, (usize, Vec<Vec<f64>>)> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if rec.len() != head.len() {
            return Err(Error::parse(path, line, format!("expected {} fields, found {}", head.len(), rec.len())));
        }
        let mut key: Vec<String> = (point_col..trial_col).map(|c| rec[c].to_string()).collect();
        key.push(rec[solver_col].to_string());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0, vec![Vec::new(); SUMMARY_METRICS.len()])
        });
        if !rec[error_col].is_empty() {
            entry.0 += 1;
            continue;
        }
        for (slot, &c) in metric_cols.iter().enumerate() {
            let x: f64 = rec[c]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("not a number in `{}`: {:?}", head[c], &rec[c])))?;
            entry.1[slot].push(x);
        }
    }
    let rows = order
        .into_iter()
        .map(|key| {
            let (failed, values) = groups.remove(&key).unwrap();
            SummaryRow {
                count: values[0].len(),
                failed,
                stats: values.iter().map(|v| mean_se(v)).collect(),
                key,
            }
        })
        .collect();
    Ok(Summary { key_columns, rows })
}

pub fn write_summary(path: impl AsRef<Path>, s: &Summary) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut head = s.key_columns.clone();
    head.extend(["count".to_string(), "failed".to_string()]);
    for m in SUMMARY_METRICS {
        head.push(format!("mean_{m}"));
        head.push(format!("se_{m}"));
    }
    w.write_record(&head).map_err(|e| csv_err(path, e))?;
    for r in &s.rows {
        let mut rec = r.key.clone();
        rec.extend([r.count.to_string(), r.failed.to_string()]);
        for (m, se) in &r.stats {
            rec.push(fmt_f64(*m));
            rec.push(fmt_f64(*se));
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
