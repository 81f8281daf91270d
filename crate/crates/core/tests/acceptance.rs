//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Scenario runs use the shipped configs in `configs/`.

use std::path::PathBuf;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use prodiab::dynamics::{induced_generator, linspace, IntegratorConfig, LEAK_LIMIT};
use prodiab::elimination::{
    a_adb, a_pdb_general, constant_filtered_drive, epsilon_report, g2_effective, g2_pdb_analytic,
    jc_moment_basis, jc_moment_generator, jc_pdb_lindblad, noise_operator_b, AtomOperatorSet, JCParams,
    JcBranch, ModelChoice,
};
use prodiab::harness::{run_scenario, Representation, ScenarioConfig, ScenarioOutput};
use prodiab::operators::POSITIVITY_TOL;
use prodiab::pulse::{filtered_drive, FilteredDrive, PulseEnvelope};
use prodiab::Result;
use rand::{rngs::StdRng, Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome>;

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

const CONFIGS: [&str; 5] = ["fig2a", "fig2b", "fig3", "s1_slow", "s1_fast"];

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.cfg"))
}

/// Each shipped scenario is run once and shared between criteria.
fn scenario(name: &str) -> &'static ScenarioOutput {
    static CELLS: [OnceLock<ScenarioOutput>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let k = CONFIGS.iter().position(|&c| c == name).expect("known config");
    CELLS[k].get_or_init(|| {
        let cfg = ScenarioConfig::from_file(&config_path(name), &[]).expect("config parses");
        run_scenario(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"))
    })
}

fn col<'a>(out: &'a ScenarioOutput, file: &str, column: &str) -> &'a [f64] {
    out.file(file).and_then(|f| f.column(column)).unwrap_or_else(|| panic!("{file}:{column}"))
}

fn max_dev_where(t: &[f64], a: &[f64], b: &[f64], keep: impl Fn(f64) -> bool) -> f64 {
    t.iter()
        .zip(a.iter().zip(b))
        .filter(|(&t, _)| keep(t))
        .map(|(_, (x, y))| (x - y).abs())
        .fold(0.0, f64::max)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn criterion_1() -> Result<Outcome> {
    let out = scenario("fig2a");
    let t = col(out, "sigma_z.csv", "t_kappa");
    let exact = col(out, "sigma_z.csv", "exact_f0.01");
    let dev = |rep: &str| max_dev_where(t, col(out, "sigma_z.csv", rep), exact, |_| true);
    let (pdb, adb, lme) = (dev("pdb_f0.01"), dev("adb_f0.01"), dev("pdb-lme_f0.01"));
    outcome(
        pdb <= adb && pdb < 0.05,
        format!("max|dσz| pdb {pdb:.3e} <= adb {adb:.3e}, pdb < 0.05 (pdb-lme {lme:.3e})"),
    )
}

fn criterion_2() -> Result<Outcome> {
    let out = scenario("fig2b");
    let t = col(out, "g2.csv", "t_kappa");
    let exact = col(out, "g2.csv", "exact");
    let dev = |rep: &str| max_dev_where(t, col(out, "g2.csv", rep), exact, |t| t >= 1.0);
    let (pdb, adb, res) = (dev("pdb_detuned_noise"), dev("adb"), dev("pdb_resonant_noise"));
    outcome(
        pdb < adb,
        format!("max|dg2| over κt∈[1,60]: pdb {pdb:.4e} < adb {adb:.4e} (resonant form {res:.4e})"),
    )
}

fn criterion_3() -> Result<Outcome> {
    let out = scenario("fig2b");
    let t = col(out, "g2.csv", "t_kappa");
    let (with, without) =
        (col(out, "g2.csv", "pdb_detuned_noise"), col(out, "g2.csv", "pdb_detuned_nonoise"));
    let (an_with, an_without) =
        (col(out, "g2.csv", "analytic_noise"), col(out, "g2.csv", "analytic_nonoise"));
    let k2 = t.iter().position(|&x| (x - 2.0).abs() < 1e-9).expect("κt = 2 on grid");
    let diff = with[k2] - without[k2];
    let line = an_with[k2] - an_without[k2];
    let rel = ((diff - line) / line).abs();
    let (xs, ys): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(with.iter().zip(without))
        .filter(|(&t, _)| (0.5..=8.0).contains(&t))
        .map(|(&t, (a, b))| (t, (a - b).abs().ln()))
        .unzip();
    let rate = -slope(&xs, &ys);
    let rate_err = (rate - 0.5).abs() / 0.5;
    outcome(
        rel <= 0.2 && rate_err <= 0.05,
        format!(
            "noise term at κt=2 {diff:.4e} vs analytic line {line:.4e} (rel {rel:.3}, <= 0.2); fitted rate {rate:.4}κ vs 0.5κ (rel {rate_err:.3}, <= 0.05)"
        ),
    )
}

fn criterion_4() -> Result<Outcome> {
    let grid = linspace(0.0, 60.0, 601);
    let cfg = IntegratorConfig::new(1e-10, 1e-13, 0.5)?;
    let dev = |f: f64, noise: bool| -> Result<f64> {
        let p = JCParams { delta: 0.0, omega: 0.0, ..JCParams::fig2(f) };
        let qrt = g2_effective(&p, ModelChoice::Prodiabatic(JcBranch::Resonant), noise, &grid, &cfg)?;
        let an = g2_pdb_analytic(&p, &grid, noise)?;
        Ok(max_dev_where(&grid, &qrt, &an, |_| true))
    };
    let (d1, d2) = (dev(2.5e-4, false)?, dev(2.5e-5, false)?);
    let ratio = d1 / d2;
    let noisy = dev(2.5e-4, true)? / dev(2.5e-5, true)?;
    outcome(
        (50.0..=200.0).contains(&ratio),
        format!("deviation {d1:.4e} -> {d2:.4e}, factor {ratio:.2} in [50, 200] (noise line on: factor {noisy:.3})"),
    )
}

fn criterion_5() -> Result<Outcome> {
    let p = JCParams { delta: 0.0, omega: 0.0, ..JCParams::fig2(2.5e-4) };
    let late = g2_pdb_analytic(&p, &[1000.0], true)?[0];
    let fp: f64 = 2.0;
    let gamma = 1e-10;
    let q = JCParams::new(1.0, gamma, (fp * gamma / 4.0).sqrt(), 0.0, 0.0, 1e-6)?;
    let zero = g2_pdb_analytic(&q, &[0.0], false)?[0];
    let want = (1.0 - fp * fp).powi(2);
    let (e1, e2) = ((late - 1.0).abs(), (zero - want).abs());
    outcome(
        e1 <= 1e-9 && e2 <= 1e-9,
        format!(
            "|g2(κt=1000) - 1| = {e1:.2e}; |g2(0) - (1-Fp²)²| = {e2:.2e} at γ/κ = 1e-10, Fp = 2 (<= 1e-9)"
        ),
    )
}

fn residual(p: &JCParams) -> Result<(f64, f64)> {
    let eff = jc_pdb_lindblad(p, JcBranch::Auto)?;
    let ind = induced_generator(&eff.model, 0.0, &jc_moment_basis())?;
    let r = ind.max_coefficient_diff(&jc_moment_generator(p)?)?;
    Ok((r, 10.0 * p.gamma * epsilon_report(p).worst_eps.powi(4)))
}

fn criterion_6() -> Result<Outcome> {
    let (r0, b0) = residual(&JCParams::fig2(0.01))?;
    let mut rng = StdRng::seed_from_u64(20);
    let mut worst: f64 = r0 / b0;
    let mut failures = 0;
    let mut draws = 0;
    while draws < 50 {
        let eps = rng.random_range(0.02..0.2);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let p = JCParams::new(
            1.0,
            rng.random_range(0.3..1.0) * eps * eps,
            rng.random_range(0.3..1.0) * eps,
            rng.random_range(-0.2..0.2),
            sign * rng.random_range(0.3..1.0) * eps * eps,
            rng.random_range(0.0..1.0) * eps,
        )?;
        if epsilon_report(&p).worst_eps >= 0.2 {
            continue;
        }
        let (r, b) = match residual(&p) {
            Ok(x) => x,
            // a negative dephasing rate leaves the Lindblad form
            Err(prodiab::Error::OutOfValidity(_)) => continue,
            Err(e) => return Err(e),
        };
        draws += 1;
        worst = worst.max(r / b);
        if r > b {
            failures += 1;
        }
    }
    outcome(
        r0 <= b0 && failures == 0,
        format!("reference residual {r0:.3e} vs budget {b0:.3e}; {failures}/50 draws over budget, worst ratio {worst:.3}"),
    )
}

fn criterion_7() -> Result<Outcome> {
    let out = scenario("fig3");
    let r = &out.report;
    let l1 = |rep: &str| -> f64 {
        r.notes
            .iter()
            .find_map(|n| n.strip_prefix(&format!("mean_l1 {rep} vs exact = ")))
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN)
    };
    let (pdb, adb) = (l1("pdb"), l1("adb"));
    let lme = (1..=3)
        .map(|j| {
            let a = col(out, "populations.csv", &format!("pdb-lme_P{j}"));
            let b = col(out, "populations.csv", &format!("pdb_P{j}"));
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let exact = r.runs.iter().find(|x| x.name == "exact").expect("exact run");
    let leak = exact.max_leak.unwrap_or(f64::NAN);
    outcome(
        pdb < adb && lme <= 1e-3 && leak < LEAK_LIMIT,
        format!(
            "mean L1 pdb {pdb:.4e} < adb {adb:.4e}; max|P(pdb-lme) - P(pdb)| {lme:.3e} (<= 1e-3); exact leak {leak:.2e} at n_max {}",
            exact.n_max.unwrap_or(0)
        ),
    )
}

fn max_p3(out: &ScenarioOutput, rep: Representation) -> f64 {
    col(out, "populations.csv", &format!("{rep}_P3")).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_8() -> Result<Outcome> {
    let (slow, fast) = (scenario("s1_slow"), scenario("s1_fast"));
    let (sp, se) = (max_p3(slow, Representation::Pdb), max_p3(slow, Representation::Exact));
    let (fp, fe) = (max_p3(fast, Representation::Pdb), max_p3(fast, Representation::Exact));
    let close = (sp - se).abs() <= 0.01;
    let sep = fp >= 5.0 * sp && fe >= 5.0 * se;
    outcome(
        close && sep,
        format!(
            "slow max P3 pdb {sp:.4} vs exact {se:.4} (<= 0.01); fast/slow pdb {:.2}, exact {:.2} (>= 5)",
            fp / sp,
            fe / se
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let t_c = C64::new(1.0, 0.0) / C64::new(1.0, 0.1);
    let f = 0.3;
    let want = t_c * (2.0 * f);
    // switched on at t = 0 and held; compared once the 2/κ transient has gone
    let env = PulseEnvelope::boxcar(1e4, 1e4, f)?;
    let grid = linspace(0.0, 100.0, 101);
    let ode = filtered_drive(&env, t_c, 1.0, &grid)?;
    let cf = FilteredDrive::new(env, t_c, 1.0)?;
    let late = grid.iter().zip(&ode).filter(|(&t, _)| t >= 80.0);
    let c_err = late.map(|(&t, z)| (z - want).norm().max((cf.at(t) - want).norm())).fold(0.0, f64::max);
    let direct = (FilteredDrive::new(PulseEnvelope::constant(f)?, t_c, 1.0)?.at(3.0) - want).norm();
    let p = prodiab::stirap::LambdaParams::fig3();
    let grid = linspace(0.0, 100.0, 1001);
    let mut b_err: f64 = 0.0;
    for env in [p.env_h, p.env_v] {
        let ode = filtered_drive(&env, C64::new(1.0, 0.0), 1.0, &grid)?;
        let cf = FilteredDrive::new(env, C64::new(1.0, 0.0), 1.0)?.curve(&grid);
        b_err = ode.iter().zip(&cf).map(|(a, b)| (a - b).norm()).fold(b_err, f64::max);
    }
    outcome(
        c_err.max(direct) <= 1e-12 && b_err <= 1e-9,
        format!("constant drive |F - 2t_c f/κ| {:.2e} (<= 1e-12); boxcar ODE vs closed form {b_err:.2e} (<= 1e-9)", c_err.max(direct)),
    )
}

fn criterion_10() -> Result<Outcome> {
    let mut worst_ev = f64::INFINITY;
    let mut worst_leak: f64 = 0.0;
    let mut moment_ev = f64::INFINITY;
    for name in CONFIGS {
        for run in &scenario(name).report.runs {
            let Some(ev) = run.min_eigenvalue else { continue };
            // moment reconstructions are not states of a master equation
            if run.name.starts_with("pdb_") || run.name == "pdb" {
                moment_ev = moment_ev.min(ev);
            } else {
                worst_ev = worst_ev.min(ev);
            }
            worst_leak = worst_leak.max(run.max_leak.unwrap_or(0.0));
        }
    }
    let ops = AtomOperatorSet::jaynes_cummings();
    let ladder = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let (mut la, mut lb, mut lx) = (Vec::new(), Vec::new(), Vec::new());
    for eps in ladder {
        let p = JCParams::new(1.0, 0.2 * eps * eps, eps, 0.05, 0.02 * eps * eps, 0.5 * eps)?;
        let f = constant_filtered_drive(&p);
        la.push(a_pdb_general(&p, &ops, f).max_diff(&a_adb(&p, &ops, f)).ln());
        lb.push(noise_operator_b(&p, &ops, f).max_abs().ln());
        lx.push(eps.ln());
    }
    let (sa, sb) = (slope(&lx, &la), slope(&lx, &lb));
    outcome(
        worst_ev >= -POSITIVITY_TOL && worst_leak < LEAK_LIMIT && (sa - 3.0).abs() <= 0.05 && (sb - 4.0).abs() <= 0.05,
        format!(
            "all scenario runs valid, min eigenvalue {worst_ev:.2e}, max leak {worst_leak:.2e} (moment reconstructions {moment_ev:.2e}); ε exponents {sa:.4} (3), {sb:.4} (4)"
        ),
    )
}

fn main() {
    let criteria: [(usize, Criterion); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    // the shipped scenarios run concurrently before any criterion reads them
    std::thread::scope(|s| {
        for name in CONFIGS {
            s.spawn(move || scenario(name));
        }
    });
    let mut failed = 0;
    for (n, f) in criteria {
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
