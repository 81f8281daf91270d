//! Config-driven scenario runner: builds every requested representation,
//! integrates it, compares against the exact model and renders data files.

mod compare;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use compare::{compare, ComparisonReport, Curve, PairMetrics, RunInfo};
pub use config::{
    parse_representations, BranchChoice, GridSpec, JcSettings, Representation, Scenario, ScenarioConfig,
    ScenarioSettings, StirapSettings,
};

use crate::elimination::{
    epsilon_report, g2_effective, g2_pdb_analytic, jc_adb_lindblad, jc_g2_exact, jc_pdb_lindblad,
    jc_sigma_z_effective, jc_sigma_z_exact, jc_sigma_z_moments, EliminationOrder, JCParams, JcBranch,
    ModelChoice, SigmaZRun,
};
use crate::error::{Error, Result};
use crate::stirap::{
    adiabaticity_metric, dark_state_overlap, filtered_envelopes, run_atom_model, run_exact,
    stirap_adb_generator, stirap_pdb_generator, stirap_pdb_lindblad, LambdaParams, StirapRun,
};

/// Process exit code for an error: 2 config, 3 model inapplicable,
/// 4 numerical failure, 1 anything else (i/o).
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidParameter(_) | Error::UnorderedGrid | Error::ZeroTruncation => 2,
        Error::Inapplicable(_)
        | Error::OutOfValidity(_)
        | Error::UndefinedCorrelation(_)
        | Error::UndefinedAngle
        | Error::TimeDependentModel
        | Error::UnsupportedOrder { .. } => 3,
        Error::Io(_) => 1,
        _ => 4,
    }
}

/// One comma-separated data file; `NaN` cells are written empty.
#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub columns: Vec<String>,
    /// Column-major values, one vector per column.
    pub data: Vec<Vec<f64>>,
}

impl DataFile {
    fn new(name: &str, times: &[f64]) -> Self {
        Self { name: name.into(), columns: vec!["t_kappa".into()], data: vec![times.to_vec()] }
    }

    fn push(&mut self, column: impl Into<String>, values: Vec<f64>) {
        self.columns.push(column.into());
        self.data.push(values);
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|j| self.data[j].as_slice())
    }

    pub fn render(&self, header: &[String]) -> String {
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        let rows = self.data.first().map_or(0, Vec::len);
        for k in 0..rows {
            let row: Vec<String> = self
                .data
                .iter()
                .map(|col| if col[k].is_nan() { String::new() } else { format!("{}", col[k]) })
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub config: ScenarioConfig,
    pub files: Vec<DataFile>,
    pub report: ComparisonReport,
}

impl ScenarioOutput {
    pub fn file(&self, name: &str) -> Option<&DataFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Writes every data file, `report.txt` and `timing.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let header = self.config.header_lines();
        let mut written = Vec::new();
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, f.render(&header))?;
            written.push(path);
        }
        let report = dir.join("report.txt");
        std::fs::write(&report, self.report.render(&header))?;
        written.push(report);
        let timing = dir.join("timing.txt");
        std::fs::write(&timing, self.report.render_timing())?;
        written.push(timing);
        Ok(written)
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

fn fmt_f(f: f64) -> String {
    format!("{f}")
}

/// Runs the scenario on the current rayon pool.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    match (&cfg.settings, cfg.scenario) {
        (ScenarioSettings::Jc(s), Scenario::JcSigmaZ) => run_sigma_z(cfg, s),
        (ScenarioSettings::Jc(s), Scenario::JcG2) => run_g2(cfg, s),
        (ScenarioSettings::Stirap(s), Scenario::Stirap) => run_stirap(cfg, s),
        _ => Err(Error::Config { line: 0, msg: "settings do not match the scenario".into() }),
    }
}

fn sigma_z_job(
    p: &JCParams,
    rep: Representation,
    s: &JcSettings,
    grid: &[f64],
    cfg: &ScenarioConfig,
) -> Result<SigmaZRun> {
    let ic = &cfg.integrator;
    match rep {
        Representation::Exact => jc_sigma_z_exact(p, s.n_max, grid, ic),
        Representation::Adb => jc_sigma_z_effective(&jc_adb_lindblad(p)?, grid, ic),
        Representation::Pdb => jc_sigma_z_moments(p, EliminationOrder::Prodiabatic, grid, ic),
        Representation::PdbLme => jc_sigma_z_effective(&jc_pdb_lindblad(p, JcBranch::Auto)?, grid, ic),
    }
}

fn run_sigma_z(cfg: &ScenarioConfig, s: &JcSettings) -> Result<ScenarioOutput> {
    let grid = cfg.grid.times();
    let jobs: Vec<(f64, Representation)> =
        s.drives.iter().flat_map(|&f| cfg.representations.iter().map(move |&r| (f, r))).collect();
    let results: Vec<(SigmaZRun, f64)> = jobs
        .par_iter()
        .map(|&(f, rep)| {
            let p = JCParams { f, ..s.params };
            timed(|| sigma_z_job(&p, rep, s, &grid, cfg))
        })
        .collect::<Result<_>>()?;

    let mut file = DataFile::new("sigma_z.csv", &grid);
    let mut report = ComparisonReport::default();
    for &f in &s.drives {
        let p = JCParams { f, ..s.params };
        report.epsilon.push(format!("f/kappa={} {}", fmt_f(f), epsilon_report(&p).summary()));
    }
    let mut family: Vec<Vec<Curve>> = vec![Vec::new(); s.drives.len()];
    for (((f, rep), (run, secs)), k) in jobs.iter().zip(results).zip(0..) {
        let name = format!("{rep}_f{}", fmt_f(*f));
        report.runs.push(RunInfo {
            name: name.clone(),
            max_leak: run.max_leak,
            n_max: run.n_max,
            min_eigenvalue: Some(run.min_eigenvalue),
        });
        report.timings.push((name.clone(), secs));
        file.push(name.clone(), run.sigma_z.clone());
        family[k / cfg.representations.len()].push(Curve::new(name, run.sigma_z));
    }
    for (curves, &f) in family.iter().zip(&s.drives) {
        let reference = format!("exact_f{}", fmt_f(f));
        report.pairs.extend(compare(&grid, curves, Some(&reference))?);
    }
    report.notes.push("drive sweep values are a chosen default spanning the validity edge".into());
    report.notes.push("pdb integrates the moment equations; pdb-lme the master equation".into());
    Ok(ScenarioOutput { config: cfg.clone(), files: vec![file], report })
}

#[derive(Clone, Copy, Debug)]
enum G2Job {
    Exact,
    Adb,
    Pdb { branch: JcBranch, noise: bool },
    Analytic { noise: bool },
}

/// Values with the exact run's leak and truncation.
type G2Curve = (Vec<f64>, Option<f64>, Option<usize>);

fn branch_name(b: JcBranch) -> &'static str {
    match b {
        JcBranch::Resonant => "resonant",
        JcBranch::Detuned => "detuned",
        JcBranch::Auto => "auto",
    }
}

/// The same rates with both detunings set to zero.
fn resonance_analog(p: &JCParams) -> JCParams {
    JCParams { delta: 0.0, omega: 0.0, ..*p }
}

fn run_g2(cfg: &ScenarioConfig, s: &JcSettings) -> Result<ScenarioOutput> {
    let grid = cfg.grid.times();
    let p = s.params;
    let detuned = p.delta != 0.0 || p.omega != 0.0;
    let branches: Vec<JcBranch> = match s.branch {
        BranchChoice::One(b) => vec![b],
        BranchChoice::Both => vec![JcBranch::Resonant, JcBranch::Detuned],
    };
    let mut jobs = Vec::new();
    for &rep in &cfg.representations {
        match rep {
            Representation::Exact => jobs.push(G2Job::Exact),
            Representation::Adb => jobs.push(G2Job::Adb),
            Representation::Pdb => {
                for &b in &branches {
                    jobs.push(G2Job::Pdb { branch: b, noise: true });
                    jobs.push(G2Job::Pdb { branch: b, noise: false });
                }
            }
            Representation::PdbLme => {}
        }
    }
    jobs.push(G2Job::Analytic { noise: true });
    jobs.push(G2Job::Analytic { noise: false });

    let ic = &cfg.integrator;
    let results: Vec<(G2Curve, f64)> = jobs
        .par_iter()
        .map(|job| {
            timed(|| match *job {
                G2Job::Exact => {
                    let r = jc_g2_exact(&p, s.n_max, &grid, ic)?;
                    Ok((r.g2, Some(r.leak), Some(r.n_max)))
                }
                G2Job::Adb => Ok((g2_effective(&p, ModelChoice::Adiabatic, false, &grid, ic)?, None, None)),
                G2Job::Pdb { branch, noise } => {
                    let q = if branch == JcBranch::Resonant { resonance_analog(&p) } else { p };
                    Ok((g2_effective(&q, ModelChoice::Prodiabatic(branch), noise, &grid, ic)?, None, None))
                }
                G2Job::Analytic { noise } => {
                    Ok((g2_pdb_analytic(&resonance_analog(&p), &grid, noise)?, None, None))
                }
            })
        })
        .collect::<Result<_>>()?;

    let mut file = DataFile::new("g2.csv", &grid);
    let mut report = ComparisonReport::default();
    report.epsilon.push(epsilon_report(&p).summary());
    let mut curves = Vec::new();
    for (job, ((values, leak, n_max), secs)) in jobs.iter().zip(results) {
        let name = match *job {
            G2Job::Exact => "exact".to_string(),
            G2Job::Adb => "adb".to_string(),
            G2Job::Pdb { branch, noise } => {
                format!("pdb_{}_{}", branch_name(branch), if noise { "noise" } else { "nonoise" })
            }
            G2Job::Analytic { noise } => format!("analytic_{}", if noise { "noise" } else { "nonoise" }),
        };
        report.runs.push(RunInfo { name: name.clone(), max_leak: leak, n_max, min_eigenvalue: None });
        report.timings.push((name.clone(), secs));
        file.push(name.clone(), values.clone());
        curves.push(Curve::new(name, values));
    }
    report.pairs = compare(&grid, &curves, Some("exact"))?;
    report
        .notes
        .push("analytic curves use the resonance analog (delta = omega = 0) of the configured rates".into());
    if detuned && branches.contains(&JcBranch::Resonant) {
        report.notes.push("pdb_resonant_* uses the resonant form on the resonance analog".into());
    }
    Ok(ScenarioOutput { config: cfg.clone(), files: vec![file], report })
}

fn stirap_job(
    p: &LambdaParams,
    rep: Representation,
    s: &StirapSettings,
    grid: &[f64],
    cfg: &ScenarioConfig,
) -> Result<StirapRun> {
    let ic = &cfg.integrator;
    let level = s.initial_level;
    match rep {
        Representation::Exact => run_exact(p, s.frame, s.n_max, level, grid, ic),
        Representation::Adb => stirap_adb_generator(p)?.run(level, grid, ic),
        Representation::Pdb => stirap_pdb_generator(p)?.run(level, grid, ic),
        Representation::PdbLme => run_atom_model(&stirap_pdb_lindblad(p)?.model, level, grid, ic),
    }
}

/// Largest trace error and smallest eigenvalue over a run's atom states.
pub fn state_bounds(run: &StirapRun) -> (f64, f64) {
    run.atom_states.iter().fold((0.0, f64::INFINITY), |(tr, ev), r| {
        ((r.trace() - 1.0).norm().max(tr), r.min_hermitian_eigenvalue().min(ev))
    })
}

fn run_stirap(cfg: &ScenarioConfig, s: &StirapSettings) -> Result<ScenarioOutput> {
    let grid = cfg.grid.times();
    let p = s.params;
    let results: Vec<(StirapRun, f64)> = cfg
        .representations
        .par_iter()
        .map(|&rep| timed(|| stirap_job(&p, rep, s, &grid, cfg)))
        .collect::<Result<_>>()?;

    let mut pops = DataFile::new("populations.csv", &grid);
    let mut drives = DataFile::new("drives.csv", &grid);
    let (fh, fv) = filtered_envelopes(&p, &grid)?;
    drives.push("f_H", grid.iter().map(|&t| p.env_h.drive(t)).collect());
    drives.push("f_V", grid.iter().map(|&t| p.env_v.drive(t)).collect());
    let adiab = adiabaticity_metric(&fh, &fv, &grid)?;
    drives.push("F_H", fh.clone());
    drives.push("F_V", fv.clone());
    drives.push("adiabaticity", adiab.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect());

    let mut report = ComparisonReport::default();
    report.epsilon.push(p.epsilon_report().summary());
    let mut families: [Vec<Curve>; 3] = Default::default();
    let exact = cfg.representations.iter().position(|&r| r == Representation::Exact);
    for (&rep, (run, secs)) in cfg.representations.iter().zip(&results) {
        let (_, min_ev) = state_bounds(run);
        report.runs.push(RunInfo {
            name: rep.to_string(),
            max_leak: run.max_leak,
            n_max: run.n_max,
            min_eigenvalue: Some(min_ev),
        });
        report.timings.push((rep.to_string(), *secs));
        for (j, fam) in families.iter_mut().enumerate() {
            let name = format!("{rep}_P{}", j + 1);
            pops.push(name.clone(), run.populations[j].clone());
            fam.push(Curve::new(name, run.populations[j].clone()));
        }
        let overlap = dark_state_overlap(&run.atom_states, &fh, &fv)?;
        drives.push(
            format!("dark_overlap_{rep}"),
            overlap.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
        );
        if let Some(k) = exact.filter(|&k| cfg.representations[k] != rep) {
            let l1 = run.mean_l1_error(&results[k].0)?;
            report.notes.push(format!("mean_l1 {rep} vs exact = {l1:e}"));
        }
    }
    for (j, fam) in families.iter().enumerate() {
        report.pairs.extend(compare(&grid, fam, Some(&format!("exact_P{}", j + 1)))?);
    }
    Ok(ScenarioOutput { config: cfg.clone(), files: vec![pops, drives], report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config { line: 1, msg: String::new() }), 2);
        assert_eq!(exit_code(&Error::Inapplicable(String::new())), 3);
        assert_eq!(exit_code(&Error::TruncationLeak { leak: 1.0, limit: 1e-6 }), 4);
        assert_eq!(exit_code(&Error::StepSizeUnderflow { t: 0.0 }), 4);
    }

    #[test]
    fn data_file_renders_header_and_blanks() {
        let mut f = DataFile::new("x.csv", &[0.0, 0.5]);
        f.push("a", vec![1.0, f64::NAN]);
        let s = f.render(&["v".into()]);
        assert_eq!(s, "# v\nt_kappa,a\n0,1\n0.5,\n");
    }

    #[test]
    fn gamma_zero_is_inapplicable() {
        let cfg = ScenarioConfig::parse(
            "scenario = stirap\nstirap.gamma_over_kappa = 0\nrepresentations = pdb\ngrid.points = 3\n",
            &[],
        )
        .unwrap();
        let e = run_scenario(&cfg).unwrap_err();
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn small_sigma_z_run_is_deterministic() {
        let text = "scenario = jc-sigmaz\ngrid.end = 20\ngrid.points = 41\njc.drives = 0.01\n";
        let cfg = ScenarioConfig::parse(text, &[]).unwrap();
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        let h = cfg.header_lines();
        assert_eq!(a.files[0].render(&h), b.files[0].render(&h));
        assert_eq!(a.report.render(&h), b.report.render(&h));
        assert_eq!(a.report.pairs.len(), 3);
        assert!(a.files[0].column("exact_f0.01").is_some());
    }
}
