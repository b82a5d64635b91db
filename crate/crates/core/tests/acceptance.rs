//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::BTreeMap;
use std::time::Instant;

use modpcp::certificate::{build_certificate, gen_certificate_instance, sparse_identity_error, CertificateGenParams};
use modpcp::datagen::{gen_online_sequence, gen_phase_instance, gen_static_instance, OnlineCase, OnlineGenParams, StaticGenParams};
use modpcp::diagnostics::{rho_r_modpcp, rho_r_pcp, sign_norm_probe};
use modpcp::harness::{run_experiment, ExperimentSpec, MetricRow};
use modpcp::io::Manifest;
use modpcp::matrix::{project_support, svd, SupportSet};
use modpcp::model::compute_l_new;
use modpcp::online::{pipeline_metrics, run_piecewise, PipelineConfig, SubspaceRule};
use modpcp::rng::derive_seed;
use modpcp::solvers::{solve_mod_pcp, solve_pcp};
use modpcp::{AlmConfig, OrthoBasis};
use rayon::prelude::*;

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
}

fn experiment(text: &str) -> Vec<MetricRow> {
    let spec = ExperimentSpec::from_manifest(Manifest::parse(text, None).unwrap()).unwrap();
    let rows = run_experiment(&spec).unwrap();
    for r in &rows {
        assert!(r.error.is_none(), "trial failed: {:?}", r.error);
    }
    rows
}

fn param(r: &MetricRow, key: &str) -> String {
    r.params.iter().find(|(k, _)| k == key).unwrap().1.clone()
}

/// Mean of `f` per `(point, solver)`.
fn means(rows: &[MetricRow], f: impl Fn(&MetricRow) -> f64) -> BTreeMap<(usize, String), f64> {
    let mut acc: BTreeMap<(usize, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.point, r.solver.clone())).or_default();
        e.0 += f(r);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn criterion_1() -> (bool, String) {
    let rows = experiment("kind = rextra_sweep\ntrials = 10\nbase_seed = 101\nr_extra = 10\n");
    let ok = rows.iter().filter(|r| r.solver == "mod_pcp" && r.success_exact()).count();
    (ok >= 9, format!("mod-PCP exact recovery in {ok}/10 trials (need 9)"))
}

fn criterion_2() -> (bool, String) {
    let rows = experiment("kind = rextra_sweep\ntrials = 10\nbase_seed = 102\nr_extra = 0, 10, 20, 30, 40, 50\n");
    let m = means(&rows, |r| r.sparse_error);
    let mut parts = Vec::new();
    let mut ok = true;
    for p in 0..6 {
        let (a, b) = (m[&(p, "mod_pcp".into())], m[&(p, "pcp".into())]);
        ok &= a < b;
        parts.push(format!("r_extra={}: {a:.2e} vs {b:.2e}", p * 10));
    }
    (ok, format!("mean sparse error mod-PCP vs PCP: {}", parts.join("; ")))
}

fn criterion_3() -> (bool, String) {
    let rows = experiment("kind = n2_sweep\ntrials = 10\nbase_seed = 103\n");
    let first = |solver: &str| -> Option<usize> {
        let mut by_point: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.solver == solver) {
            let e = by_point.entry(param(r, "n2").parse().unwrap()).or_default();
            e.0 += usize::from(r.success_exact());
            e.1 += 1;
        }
        by_point.into_iter().find(|(_, (s, n))| 2 * s > *n).map(|(n2, _)| n2)
    };
    let (a, b) = (first("mod_pcp"), first("pcp"));
    let ok = match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    (ok, format!("smallest n2 with majority exact recovery: mod-PCP {a:?}, PCP {b:?}"))
}

fn criterion_4() -> (bool, String) {
    let rows = experiment("kind = phase_grid\ntrials = 5\nbase_seed = 104\nn1 = 100\nn2 = 100\n");
    let m = means(&rows, |r| f64::from(u8::from(r.success_lowrank())));
    let cells: Vec<usize> = m.keys().map(|(p, _)| *p).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let good = cells.iter().filter(|&&p| m[&(p, "mod_pcp".into())] >= m[&(p, "pcp".into())]).count();
    let frac = good as f64 / cells.len() as f64;
    let area = |s: &str| cells.iter().map(|&p| m[&(p, s.to_string())]).sum::<f64>();
    (
        frac >= 0.95,
        format!(
            "mod-PCP success >= PCP in {good}/{} cells ({:.1}%, need 95%); summed success mod-PCP {:.1}, PCP {:.1}",
            cells.len(),
            100.0 * frac,
            area("mod_pcp"),
            area("pcp")
        ),
    )
}

fn criterion_5() -> (bool, String) {
    let mut worst_order = 10;
    let mut worst_uv = 10;
    for r_extra in [0usize, 10, 20, 30, 40, 50] {
        let (mut order, mut uv) = (0, 0);
        for t in 0..10u64 {
            let p = StaticGenParams::reference(r_extra, derive_seed(105, r_extra as u64, t));
            let inst = gen_static_instance(&p).unwrap().problem;
            let l = inst.truth_l.as_ref().unwrap();
            let new = compute_l_new(l, &inst.prior).unwrap();
            let m = rho_r_modpcp(&inst.prior, &new.u_new, &new.v_new, p.n1, p.n2).unwrap();
            let dec = svd(l).unwrap();
            let c = rho_r_pcp(&dec.u, &dec.v, p.n1, p.n2).unwrap();
            order += usize::from(m.rho_max < c.rho_max);
            uv += usize::from(c.rho_uv >= c.rho_pu && c.rho_uv >= c.rho_pv);
        }
        worst_order = worst_order.min(order);
        worst_uv = worst_uv.min(uv);
    }
    (
        worst_order >= 9 && worst_uv >= 9,
        format!(
            "worst point over r_extra 0..50: rho_r(mod-PCP) < rho_r(PCP) in {worst_order}/10, UV term largest in {worst_uv}/10"
        ),
    )
}

struct CertStats {
    identity_max: f64,
    passed: usize,
    failures: BTreeMap<&'static str, usize>,
}

fn certificate_stats() -> CertStats {
    let results: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let inst = gen_certificate_instance(&CertificateGenParams::standard(derive_seed(106, 0, seed))).unwrap();
            let cert = build_certificate(&inst).unwrap();
            let id = sparse_identity_error(&cert.w_s, &inst.s, &inst.plan.omega, inst.lambda).unwrap();
            // the identity must hold on the support of S itself
            let on_s = SupportSet::nonzeros_of(&inst.s);
            let direct = (project_support(&cert.w_s, &on_s).unwrap() - modpcp::matrix::sign(&inst.s) * inst.lambda).amax();
            (id.max(direct), cert.checks)
        })
        .collect();
    let mut failures = BTreeMap::new();
    for (_, c) in &results {
        for (name, cond) in c.named() {
            if !cond.passed {
                *failures.entry(name).or_insert(0) += 1;
            }
        }
    }
    CertStats {
        identity_max: results.iter().map(|r| r.0).fold(0.0, f64::max),
        passed: results.iter().filter(|r| r.1.all_passed()).count(),
        failures,
    }
}

fn criterion_7() -> (bool, String) {
    let p = sign_norm_probe(400, 400, 0.02, 100, 107).unwrap();
    (
        p.exceedances == 0,
        format!("{} exceedances in 100 trials; max norm {:.3} vs threshold {:.3}", p.exceedances, p.max_observed_norm, p.threshold),
    )
}

fn criterion_8() -> (bool, String) {
    let run = |case: OnlineCase, trial: u64| {
        let p = OnlineGenParams::standard(case, derive_seed(108, case as u64, trial));
        let seq = gen_online_sequence(&p).unwrap();
        let cfg = PipelineConfig {
            change_times: PipelineConfig::fixed_batches(200, p.test_len),
            initial_rule: SubspaceRule::uniform_coefficient_threshold(p.gamma_new),
            ..Default::default()
        };
        let res = run_piecewise(&seq, &cfg).unwrap();
        pipeline_metrics(&res, &seq.s_test).unwrap()
    };
    let jobs: Vec<(OnlineCase, u64)> = [OnlineCase::A, OnlineCase::C].iter().flat_map(|&c| (0..5).map(move |t| (c, t))).collect();
    let metrics: Vec<_> = jobs.par_iter().map(|&(c, t)| (c, run(c, t))).collect();
    let worst_a = metrics
        .iter()
        .filter(|(c, _)| *c == OnlineCase::A)
        .flat_map(|(_, m)| m.per_segment.iter().copied())
        .fold(0.0, f64::max);
    let least_c = metrics.iter().filter(|(c, _)| *c == OnlineCase::C).map(|(_, m)| m.overall).fold(f64::INFINITY, f64::min);
    (
        worst_a < 1e-5 && least_c > 1e-2,
        format!("case a worst segment error {worst_a:.2e} (need < 1e-5); case c smallest overall error {least_c:.2e} (need > 1e-2)"),
    )
}

fn criterion_9() -> (bool, String) {
    let rows = experiment("kind = noisy_sigma_sweep\ntrials = 20\nbase_seed = 109\n");
    let sigma_of: BTreeMap<usize, f64> = rows.iter().map(|r| (r.point, param(r, "sigma").parse().unwrap())).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (metric, f) in [("L", (|r: &MetricRow| r.rms_l) as fn(&MetricRow) -> f64), ("S", |r: &MetricRow| r.rms_s)] {
        let m = means(&rows, f);
        for solver in ["stable_mod_pcp", "stable_pcp"] {
            let pts: Vec<(f64, f64, f64)> =
                sigma_of.iter().map(|(&p, &s)| (s, m[&(p, solver.into())], m[&(p, "zero".into())])).collect();
            let finite = pts.iter().all(|p| p.1.is_finite());
            let below = pts.iter().all(|p| p.1 < p.2);
            let n = pts.len() as f64;
            let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
            let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            ok &= finite && below && slope >= 0.0;
            parts.push(format!(
                "{solver} {metric}: {:.3e}..{:.3e}, baseline {:.3e}, slope {slope:.3e}",
                pts[0].1,
                pts[pts.len() - 1].1,
                pts[0].2
            ));
        }
    }
    (ok, parts.join("; "))
}

fn criterion_10() -> (bool, String) {
    let cfg = AlmConfig::default();
    let mut same = 0;
    for k in 0..10u64 {
        let inst = gen_phase_instance(40 + k as usize, 30, 3, 60, 0.0, 0.0, derive_seed(110, 0, k)).unwrap();
        let a = solve_pcp(&inst.m, &cfg).unwrap();
        let b = solve_mod_pcp(&inst.m, &OrthoBasis::empty(inst.m.nrows()), &cfg).unwrap();
        let bits = |m: &modpcp::Mat| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(&a.l_hat) == bits(&b.l_hat)
            && bits(&a.s_hat) == bits(&b.s_hat)
            && a.iterations == b.iterations
            && a.final_residual.to_bits() == b.final_residual.to_bits()
        {
            same += 1;
        }
    }
    (same == 10, format!("{same}/10 instances bit-identical"))
}

/// A fast pass over the structural identities that the property suites
/// check in depth.
fn criterion_11() -> (bool, String) {
    let mut failures = Vec::new();
    for k in 0..20u64 {
        let p = StaticGenParams { n1: 30, d: 20, n2: 25, m: 40, r: 4, r0: 3, r_new: 1, r_extra: 2, seed: derive_seed(111, 0, k) };
        let inst = gen_static_instance(&p).unwrap().problem;
        let (l, s) = (inst.truth_l.as_ref().unwrap(), inst.truth_s.as_ref().unwrap());
        if (&inst.m - l - s).amax() > 1e-12 {
            failures.push(format!("M != L + S at seed {k}"));
        }
        let g = &inst.prior;
        let x = inst.m.clone();
        if (g.project(&g.project(&x)) - g.project(&x)).amax() > 1e-12 {
            failures.push(format!("projector not idempotent at seed {k}"));
        }
        let omega = SupportSet::nonzeros_of(s);
        let split = project_support(&x, &omega).unwrap() + project_support(&x, &omega.complement()).unwrap();
        if split != x {
            failures.push(format!("support split inexact at seed {k}"));
        }
        let new = compute_l_new(l, g).unwrap();
        if new.rank() != 1 || (g.columns().transpose() * new.u_new.columns()).amax() > 1e-10 {
            failures.push(format!("L_new structure wrong at seed {k}"));
        }
    }
    (failures.is_empty(), if failures.is_empty() { "80 identity checks hold".into() } else { failures.join("; ") })
}

fn timed(id: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    let o = Outcome { id, passed, detail, seconds: start.elapsed().as_secs_f64() };
    println!("criterion {:>2}: {} ({:.1}s) {}", o.id, if o.passed { "PASS" } else { "FAIL" }, o.seconds, o.detail);
    o
}

#[test]
fn acceptance_criteria() {
    let mut out = vec![
        timed("1", criterion_1),
        timed("2", criterion_2),
        timed("3", criterion_3),
        timed("4", criterion_4),
        timed("5", criterion_5),
    ];
    let start = Instant::now();
    let cert = certificate_stats();
    let secs = start.elapsed().as_secs_f64();
    out.push(timed("6a", || {
        (cert.identity_max <= 1e-8, format!("max |P_Omega W^S - lambda sgn(S)| = {:.2e} over 20 seeds ({secs:.1}s shared)", cert.identity_max))
    }));
    out.push(timed("6b", || {
        (
            cert.passed * 5 >= 20 * 4,
            format!("all conditions hold in {}/20 seeds (need 16); failures per condition: {:?}", cert.passed, cert.failures),
        )
    }));
    out.push(timed("7", criterion_7));
    out.push(timed("8", criterion_8));
    out.push(timed("9", criterion_9));
    out.push(timed("10", criterion_10));
    out.push(timed("11", criterion_11));

    let failed: Vec<&str> = out.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("acceptance: {} of {} criteria pass", out.len() - failed.len(), out.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
