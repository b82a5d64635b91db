use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use modpcp::certificate::{build_certificate, gen_certificate_instance, sparse_identity_error, CertificateGenParams};
use modpcp::datagen::{
    gen_noisy_instance, gen_online_sequence, gen_phase_instance, gen_static_instance, NoisyGenParams, OnlineCase,
    OnlineGenParams, StaticGenParams,
};
use modpcp::diagnostics::{check_assumptions, rho_r_modpcp, rho_r_pcp, Constants, RhoReport};
use modpcp::harness::{run_experiment, summarize, write_rows, write_summary, ExperimentSpec};
use modpcp::io::{fmt_f64, read_matrix_csv, write_matrix_csv, Manifest};
use modpcp::matrix::svd;
use modpcp::model::compute_l_new;
use modpcp::online::{pipeline_metrics, run_piecewise, PipelineConfig, PriorMode, SubspaceRule};
use modpcp::solvers::{solve_mod_pcp, solve_stable_mod_pcp, LambdaRule, StableConfig};
use modpcp::{AlmConfig, Error, ErrorClass, OrthoBasis, ProblemInstance, Result};

#[derive(Parser)]
#[command(name = "modpcp", version, about = "Robust PCA with partial subspace knowledge")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct SolverArgs {
    /// Sparsity weight, or `auto` for 1/sqrt(max(n1, n2)).
    #[arg(long, default_value = "auto")]
    lambda: String,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<AlmConfig> {
        let mut cfg = AlmConfig { rel_tol: self.tol, max_iters: self.max_iters, ..Default::default() };
        if self.lambda != "auto" {
            let l = self
                .lambda
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("lambda must be a number or `auto`, got `{}`", self.lambda)))?;
            cfg.lambda = LambdaRule::Explicit(l);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Static,
    Phase,
    Noisy,
    Online,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose a matrix into low-rank plus sparse parts.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        /// Orthonormal prior basis, one column per direction. Omit for plain PCP.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Noise level; switches to the noise-aware solver.
        #[arg(long)]
        sigma: Option<f64>,
        /// Writes `<prefix>L.csv` and `<prefix>S.csv`.
        #[arg(long)]
        out_prefix: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Incoherence parameters of a low-rank matrix, optionally against a prior.
    RhoR {
        #[arg(long)]
        lowrank: PathBuf,
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Also evaluate the sufficient conditions at this support fraction.
        #[arg(long)]
        rho_s: Option<f64>,
    },
    /// Success-rate grid over rank and support fraction.
    Phase {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        rhos: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Piecewise tracking of a changing subspace; writes per-column errors.
    Online {
        #[arg(long, default_value = "a")]
        case: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        batch: usize,
        #[arg(long)]
        test_len: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and check a dual certificate for a random instance.
    Certificate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 120)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        rho_s: f64,
    },
    /// Generate a synthetic instance as CSV files.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a Monte Carlo experiment described by a manifest.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate an experiment table into means and standard errors.
    Summarize {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_prior(path: Option<&Path>, n: usize) -> Result<OrthoBasis> {
    match path {
        Some(p) => OrthoBasis::new(read_matrix_csv(p)?),
        None => Ok(OrthoBasis::empty(n)),
    }
}

fn print_rho(r: &RhoReport) {
    println!("{}", RhoReport::CSV_HEADER);
    println!("{}", r.csv_row());
}

fn write_instance(dir: &Path, inst: &ProblemInstance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    write_matrix_csv(dir.join("M.csv"), &inst.m)?;
    if inst.prior.rank() > 0 {
        write_matrix_csv(dir.join("G.csv"), inst.prior.columns())?;
    }
    if let Some(l) = &inst.truth_l {
        write_matrix_csv(dir.join("L.csv"), l)?;
    }
    if let Some(s) = &inst.truth_s {
        write_matrix_csv(dir.join("S.csv"), s)?;
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Solve { matrix, prior, sigma, out_prefix, solver } => {
            let m = read_matrix_csv(&matrix)?;
            let g = load_prior(prior.as_deref(), m.nrows())?;
            ProblemInstance::new(m.clone(), g.clone())?;
            let cfg = solver.config()?;
            let res = match sigma {
                Some(s) => solve_stable_mod_pcp(&m, &g, s, &StableConfig { alm: cfg, ..Default::default() })?,
                None => solve_mod_pcp(&m, &g, &cfg)?,
            };
            println!("iterations = {}", res.iterations);
            println!("converged = {}", res.converged);
            println!("final_residual = {}", fmt_f64(res.final_residual));
            println!("lambda = {}", fmt_f64(res.lambda));
            println!("l_new_rank = {}", res.l_new_rank);
            println!("objective = {}", fmt_f64(res.objective()?));
            if let Some(prefix) = out_prefix {
                write_matrix_csv(format!("{prefix}L.csv"), &res.l_hat)?;
                write_matrix_csv(format!("{prefix}S.csv"), &res.s_hat)?;
            }
        }
        Cmd::RhoR { lowrank, prior, rho_s } => {
            let l = read_matrix_csv(&lowrank)?;
            let (n1, n2) = l.shape();
            let report = match prior {
                Some(p) => {
                    let g = load_prior(Some(&p), n1)?;
                    let new = compute_l_new(&l, &g)?;
                    rho_r_modpcp(&g, &new.u_new, &new.v_new, n1, n2)?
                }
                None => {
                    let dec = svd(&l)?;
                    rho_r_pcp(&dec.u, &dec.v, n1, n2)?
                }
            };
            print_rho(&report);
            if let Some(rho_s) = rho_s {
                let a = check_assumptions(rho_s, report.rho_max, n1, n2, Constants::default(), None)?;
                println!("item,satisfied,lhs,rhs");
                for (name, c) in a.items() {
                    println!("{name},{},{},{}", c.satisfied, fmt_f64(c.lhs), fmt_f64(c.rhs));
                }
            }
        }
        Cmd::Phase { n, trials, ranks, rhos, seed, out } => {
            let mut m = Manifest::new();
            m.set("kind", "phase_grid");
            m.set("n1", n);
            m.set("n2", n);
            m.set("trials", trials);
            m.set("base_seed", seed);
            if let Some(r) = ranks {
                m.set_list("r", &r);
            }
            if let Some(r) = rhos {
                m.set_list("rho_s", &r);
            }
            let rows = run_experiment(&ExperimentSpec::from_manifest(m)?)?;
            write_rows(&out, &rows)?;
            println!("rows = {}", rows.len());
        }
        Cmd::Online { case, seed, batch, test_len, out } => {
            let case: OnlineCase = case.parse()?;
            let mut p = OnlineGenParams::standard(case, seed);
            if let Some(t) = test_len {
                p.test_len = t;
                p.change_times.retain(|&c| c < p.t0 + t);
            }
            let seq = gen_online_sequence(&p)?;
            let mut series = Vec::new();
            for mode in [PriorMode::ModPcp, PriorMode::Pcp] {
                let cfg = PipelineConfig {
                    change_times: PipelineConfig::fixed_batches(batch, p.test_len),
                    initial_rule: SubspaceRule::uniform_coefficient_threshold(p.gamma_new),
                    mode,
                    ..Default::default()
                };
                let res = run_piecewise(&seq, &cfg)?;
                let metrics = pipeline_metrics(&res, &seq.s_test)?;
                println!("{} overall = {}", if mode == PriorMode::ModPcp { "mod_pcp" } else { "pcp" }, fmt_f64(metrics.overall));
                series.push(metrics.per_column);
            }
            let mut text = String::from("t,segment,mod_pcp,pcp\n");
            for (a, b) in series[0].iter().zip(&series[1]) {
                text.push_str(&format!("{},{},{},{}\n", a.t, a.segment, fmt_f64(a.nrmse), fmt_f64(b.nrmse)));
            }
            std::fs::write(&out, text).map_err(|e| Error::Io { path: out.clone(), source: e })?;
        }
        Cmd::Certificate { seed, n, rho_s } => {
            let mut p = CertificateGenParams::standard(seed);
            p.n1 = n;
            p.n2 = n;
            p.rho_s = rho_s;
            let inst = gen_certificate_instance(&p)?;
            let cert = build_certificate(&inst)?;
            println!("condition,value,bound,passed");
            for (name, c) in cert.checks.named() {
                println!("{name},{},{},{}", fmt_f64(c.value), fmt_f64(c.bound), c.passed);
            }
            let id = sparse_identity_error(&cert.w_s, &inst.s, &inst.plan.omega, inst.lambda)?;
            println!("sparse_identity_error = {}", fmt_f64(id));
            println!("neumann_terms = {}", cert.neumann_terms_used);
            println!("all_passed = {}", cert.checks.all_passed());
        }
        Cmd::Gen { kind, seed, out_dir } => match kind {
            GenKind::Static => {
                let inst = gen_static_instance(&StaticGenParams::reference(10, seed))?;
                write_instance(&out_dir, &inst.problem)?;
                write_matrix_csv(out_dir.join("M_train.csv"), &inst.m_train)?;
            }
            GenKind::Phase => {
                let inst = gen_phase_instance(100, 100, 10, 1000, 0.15, 0.15, seed)?;
                write_instance(&out_dir, &inst)?;
            }
            GenKind::Noisy => {
                let inst = gen_noisy_instance(&NoisyGenParams::standard(0.5, seed))?;
                write_instance(&out_dir, &inst)?;
            }
            GenKind::Online => {
                let seq = gen_online_sequence(&OnlineGenParams::standard(OnlineCase::A, seed))?;
                std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io { path: out_dir.clone(), source: e })?;
                write_matrix_csv(out_dir.join("M_train.csv"), &seq.m_train)?;
                write_matrix_csv(out_dir.join("M.csv"), &seq.m_test)?;
                write_matrix_csv(out_dir.join("L.csv"), &seq.l_test)?;
                write_matrix_csv(out_dir.join("S.csv"), &seq.s_test)?;
            }
        },
        Cmd::Experiment { spec, output } => {
            let spec = ExperimentSpec::read(&spec)?;
            let out = output
                .or_else(|| spec.output.clone())
                .ok_or_else(|| Error::InvalidParameter("no output path in the spec or on the command line".into()))?;
            let rows = run_experiment(&spec)?;
            write_rows(&out, &rows)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("rows = {}", rows.len());
            println!("failed = {failed}");
        }
        Cmd::Summarize { input, output } => {
            let s = summarize(&input)?;
            let out = output.unwrap_or_else(|| {
                let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                input.with_file_name(format!("{stem}.summary.csv"))
            });
            write_summary(&out, &s)?;
            println!("groups = {}", s.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Numerical => 2,
                ErrorClass::Io => 3,
            })
        }
    }
}
