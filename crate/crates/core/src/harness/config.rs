//! Flat `key = value` scenario configuration with dotted keys.
//!
//! Every scenario has a full table of defaults; a file and any overrides
//! replace entries of that table, and unknown keys are rejected. All rates
//! are ratios to κ and all times are in units of `1/κ`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::dynamics::IntegratorConfig;
use crate::elimination::{JCParams, JcBranch};
use crate::error::{Error, Result};
use crate::pulse::PulseEnvelope;
use crate::stirap::{Frame, LambdaParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    JcSigmaZ,
    JcG2,
    Stirap,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::JcSigmaZ => "jc-sigmaz",
            Scenario::JcG2 => "jc-g2",
            Scenario::Stirap => "stirap",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jc-sigmaz" => Ok(Scenario::JcSigmaZ),
            "jc-g2" => Ok(Scenario::JcG2),
            "stirap" => Ok(Scenario::Stirap),
            _ => Err(format!("unknown scenario '{s}' (jc-sigmaz, jc-g2, stirap)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Representation {
    Exact,
    Adb,
    Pdb,
    PdbLme,
}

impl Representation {
    pub const ALL: [Representation; 4] =
        [Representation::Exact, Representation::Adb, Representation::Pdb, Representation::PdbLme];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Exact => "exact",
            Representation::Adb => "adb",
            Representation::Pdb => "pdb",
            Representation::PdbLme => "pdb-lme",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown representation '{s}' (exact, adb, pdb, pdb-lme)"))
    }
}

/// Parses a comma-separated representation list.
pub fn parse_representations(s: &str) -> std::result::Result<Vec<Representation>, String> {
    let mut reps: Vec<Representation> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()?;
    if reps.is_empty() {
        return Err("at least one representation is required".into());
    }
    reps.sort();
    reps.dedup();
    Ok(reps)
}

/// Which prodiabatic branch the correlator scenario evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchChoice {
    One(JcBranch),
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn times(&self) -> Vec<f64> {
        crate::dynamics::linspace(self.start, self.end, self.points)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JcSettings {
    pub params: JCParams,
    /// Drive sweep `f/κ` (σ_z scenario only).
    pub drives: Vec<f64>,
    pub branch: BranchChoice,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StirapSettings {
    pub params: LambdaParams,
    /// 0-based initial atom level.
    pub initial_level: usize,
    pub frame: Frame,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSettings {
    Jc(JcSettings),
    Stirap(StirapSettings),
}

/// A fully resolved scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub representations: Vec<Representation>,
    pub integrator: IntegratorConfig,
    pub out_dir: String,
    pub settings: ScenarioSettings,
    /// Every key with its resolved value, in key order.
    pub resolved: BTreeMap<String, String>,
}

const SWEEP_NOTE: &str = "jc.drives default 0.005,0.01,0.02,0.04 is a chosen sweep";

fn defaults(scenario: Scenario) -> Vec<(&'static str, &'static str)> {
    let mut d = vec![
        ("integrator.rel_tol", "1e-9"),
        ("integrator.abs_tol", "1e-12"),
        ("integrator.max_step", "0.5"),
        ("output.dir", "out"),
    ];
    let jc = [
        ("jc.g_over_kappa", "0.15"),
        ("jc.gamma_over_kappa", "0.005"),
        ("jc.delta_over_kappa", "0.05"),
        ("jc.omega_over_kappa", "0.0005"),
        ("jc.n_max", "3"),
    ];
    match scenario {
        Scenario::JcSigmaZ => {
            d.extend([
                ("grid.start", "0"),
                ("grid.end", "300"),
                ("grid.points", "601"),
                ("representations", "exact,adb,pdb,pdb-lme"),
                ("jc.drives", "0.005,0.01,0.02,0.04"),
            ]);
            d.extend(jc);
        }
        Scenario::JcG2 => {
            d.extend([
                ("grid.start", "0"),
                ("grid.end", "60"),
                ("grid.points", "601"),
                ("representations", "exact,adb,pdb"),
                ("jc.f_over_kappa", "0.00025"),
                ("jc.branch", "both"),
            ]);
            d.extend(jc);
        }
        Scenario::Stirap => d.extend([
            ("grid.start", "0"),
            ("grid.end", "100"),
            ("grid.points", "401"),
            ("representations", "exact,adb,pdb,pdb-lme"),
            ("stirap.g_over_kappa", "0.1"),
            ("stirap.gamma_over_kappa", "0.0005"),
            ("stirap.initial_level", "1"),
            ("stirap.frame", "displaced"),
            ("stirap.n_max", "2"),
            ("stirap.env_H.kind", "boxcar"),
            ("stirap.env_H.amp", "1"),
            ("stirap.env_H.center", "45"),
            ("stirap.env_H.halfwidth", "10"),
            ("stirap.env_H.width", "0"),
            ("stirap.env_V.kind", "boxcar"),
            ("stirap.env_V.amp", "1"),
            ("stirap.env_V.center", "55"),
            ("stirap.env_V.halfwidth", "10"),
            ("stirap.env_V.width", "0"),
        ]),
    }
    d
}

/// Raw entries tagged with where each value came from.
#[derive(Clone, Debug, Default)]
struct Entries(BTreeMap<String, (String, Origin)>);

#[derive(Clone, Copy, Debug, PartialEq)]
enum Origin {
    Default,
    Line(usize),
    Override,
}

fn err_at(origin: Origin, msg: impl Into<String>) -> Error {
    let msg = msg.into();
    match origin {
        Origin::Line(line) => Error::Config { line, msg },
        Origin::Default => Error::Config { line: 0, msg: format!("default: {msg}") },
        Origin::Override => Error::Config { line: 0, msg: format!("override: {msg}") },
    }
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || k.contains(char::is_whitespace) {
        return None;
    }
    Some((k.to_string(), v.to_string()))
}

fn read_lines(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = split_pair(body)
            .ok_or_else(|| Error::Config { line, msg: format!("expected 'key = value', got '{body}'") })?;
        if let Some((_, _, first)) = out.iter().find(|(key, _, _)| *key == k) {
            return Err(Error::Config { line, msg: format!("duplicate key '{k}' (first on line {first})") });
        }
        out.push((k, v, line));
    }
    Ok(out)
}

impl ScenarioConfig {
    /// Parses config text, then applies `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let lines = read_lines(text)?;
        let mut ov = Vec::with_capacity(overrides.len());
        for o in overrides {
            let (k, v) = split_pair(o)
                .ok_or_else(|| err_at(Origin::Override, format!("expected key=value, got '{o}'")))?;
            ov.push((k, v));
        }
        let scenario_entry = ov
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .map(|(_, v)| (v.clone(), Origin::Override))
            .or_else(|| {
                lines.iter().find(|(k, _, _)| k == "scenario").map(|(_, v, l)| (v.clone(), Origin::Line(*l)))
            })
            .ok_or_else(|| Error::Config { line: 0, msg: "missing key 'scenario'".into() })?;
        let scenario: Scenario = scenario_entry.0.parse().map_err(|m: String| err_at(scenario_entry.1, m))?;

        let mut entries = Entries::default();
        for (k, v) in defaults(scenario) {
            entries.0.insert(k.to_string(), (v.to_string(), Origin::Default));
        }
        let mut set = |k: &str, v: &str, origin: Origin| -> Result<()> {
            if k == "scenario" {
                return Ok(());
            }
            match entries.0.get_mut(k) {
                Some(slot) => {
                    *slot = (v.to_string(), origin);
                    Ok(())
                }
                None => Err(err_at(origin, format!("unknown key '{k}' for scenario {}", scenario.name()))),
            }
        };
        for (k, v, line) in &lines {
            set(k, v, Origin::Line(*line))?;
        }
        for (k, v) in &ov {
            set(k, v, Origin::Override)?;
        }
        Self::resolve(scenario, &entries)
    }

    fn resolve(scenario: Scenario, e: &Entries) -> Result<Self> {
        let raw = |k: &str| -> (&str, Origin) {
            let (v, o) = e.0.get(k).expect("key has a default");
            (v.as_str(), *o)
        };
        let num = |k: &str| -> Result<f64> {
            let (v, o) = raw(k);
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err_at(o, format!("{k}: '{v}' is not a finite number")))
        };
        let count = |k: &str| -> Result<usize> {
            let (v, o) = raw(k);
            v.parse::<usize>().map_err(|_| err_at(o, format!("{k}: '{v}' is not a nonnegative integer")))
        };
        let check =
            |k: &str, r: Result<()>| -> Result<()> { r.map_err(|e| err_at(raw(k).1, format!("{k}: {e}"))) };

        let grid =
            GridSpec { start: num("grid.start")?, end: num("grid.end")?, points: count("grid.points")? };
        if !(grid.end > grid.start) {
            return Err(err_at(raw("grid.end").1, "grid.end must exceed grid.start"));
        }
        if grid.points < 2 {
            return Err(err_at(raw("grid.points").1, "grid.points must be at least 2"));
        }
        let (rv, ro) = raw("representations");
        let representations = parse_representations(rv).map_err(|m| err_at(ro, m))?;
        if scenario == Scenario::JcG2 && representations.contains(&Representation::PdbLme) {
            return Err(err_at(
                ro,
                "pdb-lme is not defined for jc-g2; the pdb correlator already uses the master equation",
            ));
        }
        let integrator = IntegratorConfig {
            rel_tol: num("integrator.rel_tol")?,
            abs_tol: num("integrator.abs_tol")?,
            max_step: num("integrator.max_step")?,
        };
        check("integrator.rel_tol", integrator.validate())?;
        let out_dir = raw("output.dir").0.to_string();

        let settings = match scenario {
            Scenario::JcSigmaZ | Scenario::JcG2 => {
                let f = if scenario == Scenario::JcG2 { num("jc.f_over_kappa")? } else { 0.0 };
                let params = JCParams {
                    kappa: 1.0,
                    gamma: num("jc.gamma_over_kappa")?,
                    g: num("jc.g_over_kappa")?,
                    delta: num("jc.delta_over_kappa")?,
                    omega: num("jc.omega_over_kappa")?,
                    f,
                };
                check("jc.g_over_kappa", params.validate())?;
                let drives = if scenario == Scenario::JcSigmaZ {
                    let (v, o) = raw("jc.drives");
                    let d = v
                        .split(',')
                        .map(|x| x.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| err_at(o, format!("jc.drives: '{v}' is not a number list")))?;
                    if d.is_empty() {
                        return Err(err_at(o, "jc.drives: empty sweep"));
                    }
                    d
                } else {
                    vec![f]
                };
                let branch = if scenario == Scenario::JcG2 {
                    let (v, o) = raw("jc.branch");
                    match v {
                        "resonant" => BranchChoice::One(JcBranch::Resonant),
                        "detuned" => BranchChoice::One(JcBranch::Detuned),
                        "auto" => BranchChoice::One(JcBranch::Auto),
                        "both" => BranchChoice::Both,
                        _ => {
                            return Err(err_at(
                                o,
                                format!("jc.branch: '{v}' (resonant, detuned, auto, both)"),
                            ))
                        }
                    }
                } else {
                    BranchChoice::One(JcBranch::Auto)
                };
                let n_max = count("jc.n_max")?;
                if n_max == 0 {
                    return Err(err_at(raw("jc.n_max").1, "jc.n_max must be at least 1"));
                }
                ScenarioSettings::Jc(JcSettings { params, drives, branch, n_max })
            }
            Scenario::Stirap => {
                let env = |m: &str| -> Result<PulseEnvelope> {
                    let key = |f: &str| format!("stirap.env_{m}.{f}");
                    let (kind, o) = raw(&key("kind"));
                    let amp = num(&key("amp"))?;
                    let env = match kind {
                        "constant" => PulseEnvelope::Constant { amp },
                        "boxcar" => PulseEnvelope::Boxcar {
                            center: num(&key("center"))?,
                            halfwidth: num(&key("halfwidth"))?,
                            amp,
                        },
                        "gaussian" => PulseEnvelope::Gaussian {
                            amp,
                            center: num(&key("center"))?,
                            width: num(&key("width"))?,
                        },
                        _ => {
                            return Err(err_at(
                                o,
                                format!("{}: '{kind}' (constant, boxcar, gaussian)", key("kind")),
                            ))
                        }
                    };
                    check(&key("kind"), env.validate())?;
                    Ok(env)
                };
                let params = LambdaParams {
                    kappa: 1.0,
                    gamma: num("stirap.gamma_over_kappa")?,
                    g: num("stirap.g_over_kappa")?,
                    env_h: env("H")?,
                    env_v: env("V")?,
                };
                check("stirap.g_over_kappa", params.validate())?;
                let level = count("stirap.initial_level")?;
                if !(1..=3).contains(&level) {
                    return Err(err_at(
                        raw("stirap.initial_level").1,
                        "stirap.initial_level must be 1, 2 or 3",
                    ));
                }
                let (fv, fo) = raw("stirap.frame");
                let frame = match fv {
                    "lab" => Frame::Lab,
                    "displaced" => Frame::Displaced,
                    _ => return Err(err_at(fo, format!("stirap.frame: '{fv}' (lab, displaced)"))),
                };
                let n_max = count("stirap.n_max")?;
                if n_max == 0 {
                    return Err(err_at(raw("stirap.n_max").1, "stirap.n_max must be at least 1"));
                }
                ScenarioSettings::Stirap(StirapSettings { params, initial_level: level - 1, frame, n_max })
            }
        };

        let mut resolved: BTreeMap<String, String> =
            e.0.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect();
        resolved.insert("scenario".into(), scenario.name().into());
        Ok(Self { scenario, grid, representations, integrator, out_dir, settings, resolved })
    }

    pub fn from_file(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Header lines (without comment markers) describing this configuration.
    pub fn header_lines(&self) -> Vec<String> {
        let mut h = vec![format!("prodiab {}", env!("CARGO_PKG_VERSION"))];
        h.extend(self.resolved.iter().map(|(k, v)| format!("{k} = {v}")));
        if self.scenario == Scenario::JcSigmaZ {
            h.push(format!("note: {SWEEP_NOTE}"));
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_scenario() {
        for s in ["jc-sigmaz", "jc-g2", "stirap"] {
            let c = ScenarioConfig::parse(&format!("scenario = {s}\n"), &[]).unwrap();
            assert_eq!(c.scenario.name(), s);
            assert!(!c.representations.is_empty());
        }
        let c = ScenarioConfig::parse("scenario = stirap", &[]).unwrap();
        let ScenarioSettings::Stirap(st) = c.settings else { panic!("stirap settings") };
        assert_eq!(st.params, LambdaParams::fig3());
        let c = ScenarioConfig::parse("scenario = jc-g2", &[]).unwrap();
        let ScenarioSettings::Jc(jc) = c.settings else { panic!("jc settings") };
        assert_eq!(jc.params, JCParams::fig2(2.5e-4));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "scenario = jc-sigmaz\n# comment\n\njc.g_over_kappa = abc\n";
        assert_eq!(
            ScenarioConfig::parse(text, &[]).unwrap_err(),
            Error::Config { line: 4, msg: "jc.g_over_kappa: 'abc' is not a finite number".into() }
        );
        let e = ScenarioConfig::parse("scenario = stirap\nbogus.key = 1\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = ScenarioConfig::parse("scenario = stirap\njust words\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = ScenarioConfig::parse("scenario = stirap\ngrid.end = 1\ngrid.end = 2\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
        let e = ScenarioConfig::parse("grid.end = 2\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 0, .. }));
    }

    #[test]
    fn empty_representation_list_is_rejected() {
        let e = ScenarioConfig::parse("scenario = stirap\nrepresentations =\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = ScenarioConfig::parse("scenario = jc-g2\nrepresentations = pdb-lme\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
    }

    #[test]
    fn grid_invariants() {
        let e = ScenarioConfig::parse("scenario = stirap\ngrid.start = 5\ngrid.end = 5\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
        let e = ScenarioConfig::parse("scenario = stirap\ngrid.points = 1\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
    }

    #[test]
    fn overrides_apply_last() {
        let c = ScenarioConfig::parse(
            "scenario = stirap\nstirap.g_over_kappa = 0.3\n",
            &[
                "stirap.g_over_kappa=0.2".into(),
                "stirap.env_H.kind = gaussian".into(),
                "stirap.env_H.width=4".into(),
            ],
        )
        .unwrap();
        let ScenarioSettings::Stirap(st) = &c.settings else { panic!("stirap settings") };
        assert_eq!(st.params.g, 0.2);
        assert_eq!(st.params.env_h, PulseEnvelope::Gaussian { amp: 1.0, center: 45.0, width: 4.0 });
        assert_eq!(c.resolved["stirap.g_over_kappa"], "0.2");
        let e = ScenarioConfig::parse("scenario = stirap", &["nokey".into()]).unwrap_err();
        assert!(matches!(e, Error::Config { line: 0, .. }));
    }

    #[test]
    fn representations_are_sorted_and_unique() {
        assert_eq!(
            parse_representations("pdb, exact,pdb").unwrap(),
            vec![Representation::Exact, Representation::Pdb]
        );
        assert!(parse_representations("exact,foo").is_err());
    }
}
