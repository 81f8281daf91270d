//! Adiabatic and prodiabatic elimination of a strongly damped cavity mode.
//!
//! Conventions: rates are absolute (κ is carried explicitly), the atom space
//! of the Jaynes-Cummings instantiation has ground state at index 0,
//! `σ = |0⟩⟨1|` and `σ_z = |1⟩⟨1| − |0⟩⟨0|`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::dynamics::{
    evolve_with_states, g2_from_state, steady_state, two_time_correlator, AffineGenerator, IntegratorConfig,
    LindbladModel, LEAK_LIMIT,
};
use crate::error::{Error, Result};
use crate::operators::{
    build_annihilation, build_transition, embed, trace_product, DensityMatrix, HilbertSpace, OperatorMatrix,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Above this value of the expansion parameter results are flagged.
pub const EPS_WARNING: f64 = 0.3;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Rates of the driven Jaynes-Cummings system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JCParams {
    pub kappa: f64,
    pub gamma: f64,
    pub g: f64,
    /// Cavity detuning Δ.
    pub delta: f64,
    /// Atomic detuning Ω.
    pub omega: f64,
    /// Coherent drive amplitude.
    pub f: f64,
}

impl JCParams {
    pub fn new(kappa: f64, gamma: f64, g: f64, delta: f64, omega: f64, f: f64) -> Result<Self> {
        let p = Self { kappa, gamma, g, delta, omega, f };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.kappa, self.gamma, self.g, self.delta, self.omega, self.f];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite rate".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!("kappa = {} must be positive", self.kappa)));
        }
        if self.gamma < 0.0 || self.g < 0.0 {
            return Err(Error::InvalidParameter("gamma and g must be nonnegative".into()));
        }
        Ok(())
    }

    /// Cavity susceptibility `(1 + 2iΔ/κ)⁻¹`; defined for every valid set.
    pub fn t_c(&self) -> C64 {
        ONE / C64::new(1.0, 2.0 * self.delta / self.kappa)
    }

    /// Reference weak-drive rates in units of κ with the given drive.
    pub fn fig2(f: f64) -> Self {
        Self { kappa: 1.0, gamma: 5e-3, g: 0.15, delta: 0.05, omega: 5e-4, f }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Susceptibilities {
    pub t_c: C64,
    pub t_q: C64,
    pub f_p: f64,
    pub gamma_eff: C64,
}

pub fn susceptibilities(p: &JCParams) -> Result<Susceptibilities> {
    p.validate()?;
    if p.gamma == 0.0 {
        return Err(if p.omega != 0.0 {
            Error::Inapplicable("atomic susceptibility undefined for γ = 0, Ω ≠ 0".into())
        } else {
            Error::Inapplicable("Purcell factor diverges for γ = 0".into())
        });
    }
    let t_c = p.t_c();
    let t_q = ONE / C64::new(1.0, 2.0 * p.omega / p.gamma);
    let f_p = 4.0 * p.g * p.g / (p.gamma * p.kappa);
    let gamma_eff =
        c(p.gamma) / t_q * (ONE + t_c * t_q * f_p) * (ONE + t_c * t_c * (p.gamma * f_p / p.kappa));
    Ok(Susceptibilities { t_c, t_q, f_p, gamma_eff })
}

/// Size of the expansion parameters relative to κ.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonReport {
    /// Quantities expected to be of order ε²: (name, value/κ).
    pub eps_sq_candidates: Vec<(String, f64)>,
    /// Quantities expected to be of order ε: (name, value/κ).
    pub eps_candidates: Vec<(String, f64)>,
    pub worst_eps: f64,
    pub warning: bool,
}

impl EpsilonReport {
    pub fn from_ratios(eps_sq: Vec<(String, f64)>, eps: Vec<(String, f64)>) -> Self {
        let worst = eps_sq
            .iter()
            .map(|(_, v)| v.abs().sqrt())
            .chain(eps.iter().map(|(_, v)| v.abs()))
            .fold(0.0, f64::max);
        Self {
            eps_sq_candidates: eps_sq,
            eps_candidates: eps,
            worst_eps: worst,
            warning: worst > EPS_WARNING,
        }
    }

    pub fn summary(&self) -> String {
        let fmt =
            |v: &[(String, f64)]| v.iter().map(|(n, x)| format!("{n}={x:.6e}")).collect::<Vec<_>>().join(" ");
        format!(
            "eps2[{}] eps[{}] worst_eps={:.6} warning={}",
            fmt(&self.eps_sq_candidates),
            fmt(&self.eps_candidates),
            self.worst_eps,
            self.warning
        )
    }
}

pub fn epsilon_report(p: &JCParams) -> EpsilonReport {
    let k = p.kappa;
    EpsilonReport::from_ratios(
        vec![("gamma/kappa".into(), p.gamma / k), ("omega/kappa".into(), p.omega.abs() / k)],
        vec![("g/kappa".into(), p.g / k), ("f/kappa".into(), p.f.abs() / k)],
    )
}

/// Atom operators entering the elimination: `b`, `v` and `r = [b, b†]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomOperatorSet {
    pub b: OperatorMatrix,
    pub r: OperatorMatrix,
    pub v: OperatorMatrix,
}

impl AtomOperatorSet {
    pub fn new(b: OperatorMatrix, v: OperatorMatrix) -> Result<Self> {
        let r = b.commutator(&b.adjoint());
        if v.space() != b.space() {
            return Err(Error::DimensionMismatch { expected: b.dim(), found: v.dim() });
        }
        Ok(Self { b, r, v })
    }

    /// `b = v = σ`, `r = −σ_z`.
    pub fn jaynes_cummings() -> Self {
        let s = sigma();
        Self::new(s.clone(), s).expect("same space")
    }
}

/// `σ = |0⟩⟨1|`.
pub fn sigma() -> OperatorMatrix {
    build_transition(2, 0, 1).expect("valid indices")
}

/// `σ_z = |1⟩⟨1| − |0⟩⟨0|`.
pub fn sigma_z() -> OperatorMatrix {
    &build_transition(2, 1, 1).expect("valid") - &build_transition(2, 0, 0).expect("valid")
}

/// `σ_x = σ + σ†`.
pub fn sigma_x() -> OperatorMatrix {
    let s = sigma();
    &s + &s.adjoint()
}

/// `σ_y = i(σ − σ†)`.
pub fn sigma_y() -> OperatorMatrix {
    let s = sigma();
    (&s - &s.adjoint()) * I
}

/// Leading-order photon operator `−(2i t_c/κ) g b + i F`.
pub fn a_adb(p: &JCParams, ops: &AtomOperatorSet, f_now: C64) -> OperatorMatrix {
    let t_c = p.t_c();
    let id = OperatorMatrix::identity(ops.b.space());
    &(&ops.b * (-2.0 * I * t_c * (p.g / p.kappa))) + &(&id * (I * f_now))
}

/// Photon operator including all third-order corrections.
pub fn a_pdb_general(p: &JCParams, ops: &AtomOperatorSet, f_now: C64) -> OperatorMatrix {
    let t_c = p.t_c();
    let k2 = p.kappa * p.kappa;
    let id = OperatorMatrix::identity(ops.b.space());
    let dressing = &id + &(&ops.r * (t_c * t_c * (4.0 * p.g * p.g / k2)));
    let lead = a_adb(p, ops, f_now);
    let rb = &ops.r * &ops.b;
    let damping = &rb * (-2.0 * I * t_c * t_c * (p.gamma * p.g / k2));
    let precession = &ops.v * (t_c * t_c * (4.0 * p.omega * p.g / k2));
    &(&(&dressing * &lead) + &damping) + &precession
}

/// Fourth-order noise operator of the cavity input.
pub fn noise_operator_b(p: &JCParams, ops: &AtomOperatorSet, f_now: C64) -> OperatorMatrix {
    let t_c = p.t_c();
    let tc2 = t_c.norm_sqr();
    let pre = c(4.0 * tc2) * t_c * (c(2.0 * tc2) - t_c * t_c) * (p.g * p.g / p.kappa.powi(3));
    let vb = ops.v.commutator(&ops.b);
    let br = ops.b.commutator(&ops.r);
    let brb = &br * &ops.b;
    // (γ/2)(1 + F_p t_c) written without dividing by γ
    let damp = c(p.gamma / 2.0) + t_c * (2.0 * p.g * p.g / p.kappa);
    let inner = &(&(&vb * (I * p.omega)) + &(&br * (f_now * p.g))) - &(&brb * damp);
    &inner * pre
}

/// Closed-form photon operator of the Jaynes-Cummings model under constant drive.
pub fn jc_a_pdb(p: &JCParams) -> Result<OperatorMatrix> {
    let s = susceptibilities(p)?;
    let t_c = s.t_c;
    let k = p.kappa;
    let id = OperatorMatrix::identity(sigma().space());
    let c_sigma = ONE + t_c / s.t_q * (p.gamma / k) + t_c * t_c * (4.0 * p.g * p.g / (k * k));
    let c_z = t_c * t_c * (4.0 * p.g * p.f / (k * k));
    let pre = -2.0 * I * t_c / k;
    if p.g == 0.0 {
        return Ok(&id * (2.0 * I * t_c * (p.f / k)));
    }
    let inner = &(&(&sigma() * c_sigma) + &(&sigma_z() * c_z)) - &(&id * c(p.f / p.g));
    Ok(&inner * (pre * p.g))
}

/// Constant-drive filtered amplitude `2 t_c f/κ`.
pub fn constant_filtered_drive(p: &JCParams) -> C64 {
    p.t_c() * (2.0 * p.f / p.kappa)
}

/// Names of the Jaynes-Cummings moment basis.
pub const JC_MOMENTS: [&str; 3] = ["sigma", "sigma_dag", "sigma_z"];

pub fn jc_moment_basis() -> Vec<(String, OperatorMatrix)> {
    let s = sigma();
    vec![
        (JC_MOMENTS[0].into(), s.clone()),
        (JC_MOMENTS[1].into(), s.adjoint()),
        (JC_MOMENTS[2].into(), sigma_z()),
    ]
}

fn jc_generator(gamma: C64, drive: C64, sz_weight: C64, constant: C64) -> Result<AffineGenerator> {
    // d⟨σ⟩ = −(Γ/2)⟨σ⟩ − drive⟨σ_z⟩ + constant
    // d⟨σ_z⟩ = −Re Γ (⟨σ_z⟩ + 1) + 2Re[sz_weight ⟨σ†⟩]
    let mut m = Array2::zeros((3, 3));
    let mut k = Array1::zeros(3);
    m[[0, 0]] = -gamma / 2.0;
    m[[0, 2]] = -drive;
    k[0] = constant;
    m[[1, 1]] = -gamma.conj() / 2.0;
    m[[1, 2]] = -drive.conj();
    k[1] = constant.conj();
    m[[2, 0]] = sz_weight.conj();
    m[[2, 1]] = sz_weight;
    m[[2, 2]] = c(-gamma.re);
    k[2] = c(-gamma.re);
    AffineGenerator::new(JC_MOMENTS.iter().map(|s| s.to_string()).collect(), m, k)
}

/// Prodiabatic moment equations for `(⟨σ⟩, ⟨σ†⟩, ⟨σ_z⟩)`.
pub fn jc_moment_generator(p: &JCParams) -> Result<AffineGenerator> {
    let s = susceptibilities(p)?;
    let k = p.kappa;
    let t_c = s.t_c;
    let shift = t_c * t_c * (p.gamma * s.f_p / k);
    let drive = t_c * (2.0 * p.g * p.f / k);
    let weight = t_c * (shift + ONE) * (4.0 * p.g * p.f / k);
    jc_generator(s.gamma_eff, drive, weight, drive * shift)
}

/// Leading-order moment equations: `Γ → (γ/t_q)(1 + t_c t_q F_p)` and no
/// `γ t_c² F_p/κ` corrections.
pub fn jc_adb_moment_generator(p: &JCParams) -> Result<AffineGenerator> {
    let s = susceptibilities(p)?;
    let k = p.kappa;
    let t_c = s.t_c;
    let gamma = c(p.gamma) / s.t_q * (ONE + t_c * s.t_q * s.f_p);
    let drive = t_c * (2.0 * p.g * p.f / k);
    let weight = t_c * (4.0 * p.g * p.f / k);
    jc_generator(gamma, drive, weight, ZERO)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminationOrder {
    Adiabatic,
    Prodiabatic,
}

/// Which printed form of the prodiabatic master equation to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JcBranch {
    Resonant,
    Detuned,
    /// Resonant form when `Δ = Ω = 0`, detuned otherwise.
    Auto,
}

/// Coefficients of `H = c_z σ_z + c_x σ_x + c_y σ_y` with jumps
/// `σ` at `Γ₁` and `σ + ξ σ_z` at `Γ₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JcLindbladCoefficients {
    pub c_x: f64,
    pub c_y: f64,
    pub c_z: f64,
    pub gamma_0: f64,
    pub gamma_1: f64,
    pub xi: C64,
}

impl JcLindbladCoefficients {
    pub fn resonant(p: &JCParams) -> Result<Self> {
        let s = susceptibilities(p)?;
        let (k, fp) = (p.kappa, s.f_p);
        Ok(Self {
            c_x: 0.0,
            c_y: -(2.0 * p.g * p.f / k) * (p.gamma * fp / (2.0 * k) + 1.0),
            c_z: 0.0,
            gamma_0: p.gamma * (1.0 + fp),
            gamma_1: p.gamma * (1.0 + fp) * (p.gamma / k) * fp,
            xi: c(2.0 * p.f * p.g / (k * k) * fp / (fp + 1.0)),
        })
    }

    pub fn detuned(p: &JCParams) -> Result<Self> {
        let s = susceptibilities(p)?;
        let (k, fp, gm) = (p.kappa, s.f_p, p.gamma);
        let t_c = s.t_c;
        let a2 = t_c.norm_sqr();
        let a4 = a2 * a2;
        let re2 = (t_c * t_c).re;
        let (d, o, f, g) = (p.delta, p.omega, p.f, p.g);
        let c_z = o / 2.0 + gm / (2.0 * k) * fp * (o * re2 - d * a2)
            - d * a4 * (gm * gm / (k * k)) * fp * (fp * (2.0 * a2 - 0.5) + 1.0);
        let c_x = 2.0 * f * g * d / (k * k) * a2 * (gm / k * fp * (re2 + 2.0 * a4) + 2.0);
        let c_y = -(2.0 * g * f / k) * a2 * (gm / k * fp * (1.5 * re2 - a4) + 1.0);
        let gamma_0 = gm * (1.0 + fp * a2);
        let gamma_1 = 8.0 * d * o / k * (gm / k) * fp * a4
            + gm * (gm / k) * fp * a2 * (2.0 * a2 * (fp * (2.0 * a2 - 1.5) + 1.0) - 1.0);
        let xi = t_c * t_c * t_c * (2.0 * f * g / (k * k) * fp / (1.0 + fp * a2));
        Ok(Self { c_x, c_y, c_z, gamma_0, gamma_1, xi })
    }

    pub fn for_branch(p: &JCParams, branch: JcBranch) -> Result<Self> {
        match branch {
            JcBranch::Resonant => {
                if p.delta != 0.0 || p.omega != 0.0 {
                    return Err(Error::Inapplicable("resonant form requires Δ = Ω = 0".into()));
                }
                Self::resonant(p)
            }
            JcBranch::Detuned => Self::detuned(p),
            JcBranch::Auto if p.delta == 0.0 && p.omega == 0.0 => Self::resonant(p),
            JcBranch::Auto => Self::detuned(p),
        }
    }

    /// Coefficients that survive at leading order: rates of order γ and the
    /// drive terms of order gf/κ; every `γ²`, `γΩ`, `γ·gf` and `ξ` term is
    /// dropped. The cavity-induced frequency shift `2g²Δ|t_c|²/κ²` is kept.
    pub fn adiabatic(p: &JCParams) -> Result<Self> {
        let s = susceptibilities(p)?;
        let k = p.kappa;
        let a2 = s.t_c.norm_sqr();
        Ok(Self {
            c_x: 4.0 * p.f * p.g * p.delta / (k * k) * a2,
            c_y: -(2.0 * p.g * p.f / k) * a2,
            c_z: p.omega / 2.0 - 2.0 * p.g * p.g * p.delta / (k * k) * a2,
            gamma_0: p.gamma * (1.0 + s.f_p * a2),
            gamma_1: 0.0,
            xi: ZERO,
        })
    }

    pub fn hamiltonian(&self) -> OperatorMatrix {
        &(&(&sigma_z() * self.c_z) + &(&sigma_x() * self.c_x)) + &(&sigma_y() * self.c_y)
    }

    /// Jump operators with rates, after checking that the rates are
    /// nonnegative.
    pub fn jumps(&self) -> Result<Vec<(OperatorMatrix, f64)>> {
        if self.gamma_1 < 0.0 {
            return Err(Error::OutOfValidity(format!(
                "Γ₁ = {:e} is negative; no Lindblad form",
                self.gamma_1
            )));
        }
        if self.gamma_0 < 0.0 {
            return Err(Error::OutOfValidity(format!("Γ₀ = {:e} is negative", self.gamma_0)));
        }
        let s = sigma();
        let composite = &s + &(&sigma_z() * self.xi);
        let mut out = Vec::new();
        if self.gamma_1 != 0.0 {
            out.push((s, self.gamma_1));
        }
        out.push((composite, self.gamma_0));
        Ok(out)
    }

    pub fn model(&self) -> Result<LindbladModel> {
        LindbladModel::new(self.hamiltonian(), self.jumps()?)
    }

    /// Largest absolute difference between corresponding coefficients.
    pub fn max_diff(&self, other: &Self) -> f64 {
        [
            (self.c_x - other.c_x).abs(),
            (self.c_y - other.c_y).abs(),
            (self.c_z - other.c_z).abs(),
            (self.gamma_0 - other.gamma_0).abs(),
            (self.gamma_1 - other.gamma_1).abs(),
            (self.xi - other.xi).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Effective atom-only model with its photon operator.
#[derive(Clone, Debug)]
pub struct EffectiveModel {
    pub model: LindbladModel,
    pub order: EliminationOrder,
    pub params: JCParams,
    /// Atom-space representation of the cavity annihilation operator.
    pub photon: OperatorMatrix,
    pub coefficients: JcLindbladCoefficients,
    pub epsilon: EpsilonReport,
}

pub fn jc_pdb_lindblad(p: &JCParams, branch: JcBranch) -> Result<EffectiveModel> {
    let coefficients = JcLindbladCoefficients::for_branch(p, branch)?;
    Ok(EffectiveModel {
        model: coefficients.model()?,
        order: EliminationOrder::Prodiabatic,
        params: *p,
        photon: jc_a_pdb(p)?,
        coefficients,
        epsilon: epsilon_report(p),
    })
}

pub fn jc_adb_lindblad(p: &JCParams) -> Result<EffectiveModel> {
    let coefficients = JcLindbladCoefficients::adiabatic(p)?;
    let photon = a_adb(p, &AtomOperatorSet::jaynes_cummings(), constant_filtered_drive(p));
    Ok(EffectiveModel {
        model: coefficients.model()?,
        order: EliminationOrder::Adiabatic,
        params: *p,
        photon,
        coefficients,
        epsilon: epsilon_report(p),
    })
}

/// Low-drive resonant `g²(t)` of the prodiabatic elimination; the second
/// (noise) line is optional.
pub fn g2_pdb_analytic(p: &JCParams, grid: &[f64], include_noise: bool) -> Result<Vec<f64>> {
    if p.delta != 0.0 || p.omega != 0.0 {
        return Err(Error::Inapplicable("analytic g² holds at Δ = Ω = 0; use the correlator instead".into()));
    }
    let s = susceptibilities(p)?;
    let fp = s.f_p;
    let r = p.gamma / p.kappa;
    let gamma = s.gamma_eff.re;
    Ok(grid
        .iter()
        .map(|&t| {
            let slow = (-gamma * t / 2.0).exp();
            let first = (1.0 - fp * fp * (1.0 - r * r * (fp + 1.0).powi(2)) * slow).powi(2);
            let noise = if include_noise {
                2.0 * (-p.kappa * t / 2.0).exp() * r * fp * fp * (1.0 + fp) * (1.0 - fp * fp * slow)
            } else {
                0.0
            };
            first + noise
        })
        .collect())
}

/// Time argument of a photon operator in a two-time correlator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instant {
    /// `t = 0`.
    Origin,
    /// The lag `t ≥ 0`.
    Lag,
}

/// `⟨a†(τ₁)…a†(τ_M) Σ(t) a(t_N)…a(t₁)⟩` with every time either 0 or the lag.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorSpec {
    /// Times of the creation operators.
    pub creation: Vec<Instant>,
    /// Times of the annihilation operators.
    pub annihilation: Vec<Instant>,
    /// Atom operator at the lag time; `None` is the identity.
    pub sigma: Option<OperatorMatrix>,
}

impl CorrelatorSpec {
    /// `⟨a†(0) a(t)⟩`.
    pub fn first_order() -> Self {
        Self { creation: vec![Instant::Origin], annihilation: vec![Instant::Lag], sigma: None }
    }

    /// `⟨a†(0) a†(t) a(t) a(0)⟩`.
    pub fn second_order() -> Self {
        Self {
            creation: vec![Instant::Origin, Instant::Lag],
            annihilation: vec![Instant::Origin, Instant::Lag],
            sigma: None,
        }
    }

    /// `⟨a†(0) a(0)⟩` (constant in the lag).
    pub fn photon_number() -> Self {
        Self { creation: vec![Instant::Origin], annihilation: vec![Instant::Origin], sigma: None }
    }
}

/// Which effective model evaluates the correlator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelChoice {
    Adiabatic,
    Prodiabatic(JcBranch),
}

fn split(times: &[Instant]) -> Result<(usize, usize)> {
    if times.windows(2).any(|w| w[0] == Instant::Lag && w[1] == Instant::Origin) {
        return Err(Error::InvalidParameter("photon times must be ordered".into()));
    }
    let origin = times.iter().filter(|&&t| t == Instant::Origin).count();
    Ok((origin, times.len() - origin))
}

fn power(op: &OperatorMatrix, n: usize) -> OperatorMatrix {
    let mut out = OperatorMatrix::identity(op.space());
    for _ in 0..n {
        out = &out * op;
    }
    out
}

/// Stationary two-time photon correlator of the effective model, with the
/// vacuum-noise corrections for pairs of photon operators on either side.
pub fn pdb_correlator(
    p: &JCParams,
    spec: &CorrelatorSpec,
    choice: ModelChoice,
    include_noise: bool,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<C64>> {
    let (m, n) = (spec.creation.len(), spec.annihilation.len());
    if m > 2 || n > 2 {
        return Err(Error::UnsupportedOrder { m, n });
    }
    let (m0, m1) = split(&spec.creation)?;
    let (n0, n1) = split(&spec.annihilation)?;
    let eff = match choice {
        ModelChoice::Adiabatic => jc_adb_lindblad(p)?,
        ModelChoice::Prodiabatic(branch) => jc_pdb_lindblad(p, branch)?,
    };
    let rho = steady_state(&eff.model.liouvillian_at(0.0)?)?;
    let a = &eff.photon;
    let ad = a.adjoint();
    let space = a.space().clone();
    let sig = spec.sigma.clone().unwrap_or_else(|| OperatorMatrix::identity(&space));
    if sig.space() != &space {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: sig.dim() });
    }

    let left = power(&ad, m0);
    let right = power(a, n0);
    let mid = &(&power(&ad, m1) * &sig) * &power(a, n1);
    let mut out = two_time_correlator(&eff.model, &rho, &left, &mid, &right, grid, cfg)?;

    let noisy = include_noise && eff.order == EliminationOrder::Prodiabatic;
    if noisy && n == 2 {
        let b = noise_operator_b(p, &AtomOperatorSet::jaynes_cummings(), constant_filtered_drive(p));
        // both annihilators are replaced by B at the earlier time
        let (r, mid_n, spread) = if n0 >= 1 {
            (b.clone(), &power(&ad, m1) * &sig, n1 == 1)
        } else {
            (OperatorMatrix::identity(&space), &(&power(&ad, m1) * &sig) * &b, false)
        };
        let term = two_time_correlator(&eff.model, &rho, &left, &mid_n, &r, grid, cfg)?;
        let lam = c(p.kappa / 2.0) / p.t_c();
        for ((o, z), &t) in out.iter_mut().zip(term).zip(grid) {
            let w = if spread { (-lam * t).exp() } else { ONE };
            *o += w * z;
        }
    }
    if noisy && m == 2 {
        let bd =
            noise_operator_b(p, &AtomOperatorSet::jaynes_cummings(), constant_filtered_drive(p)).adjoint();
        let (l, mid_m, spread) = if m0 >= 1 {
            (bd.clone(), &sig * &power(a, n1), m1 == 1)
        } else {
            (OperatorMatrix::identity(&space), &(&bd * &sig) * &power(a, n1), false)
        };
        let term = two_time_correlator(&eff.model, &rho, &l, &mid_m, &right, grid, cfg)?;
        let lam = c(p.kappa / 2.0) / p.t_c().conj();
        for ((o, z), &t) in out.iter_mut().zip(term).zip(grid) {
            let w = if spread { (-lam * t).exp() } else { ONE };
            *o += w * z;
        }
    }
    Ok(out)
}

/// Normalized `g²(t)` from the effective model; the stationary photon number
/// of the same model sets the normalization.
pub fn g2_effective(
    p: &JCParams,
    choice: ModelChoice,
    include_noise: bool,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let n = photon_number(p, choice)?;
    if n < 1e-14 {
        return Err(Error::UndefinedCorrelation(n));
    }
    let num = pdb_correlator(p, &CorrelatorSpec::second_order(), choice, include_noise, grid, cfg)?;
    Ok(num.into_iter().map(|z| z.re / (n * n)).collect())
}

/// Stationary `⟨a†a⟩` of the effective model.
pub fn photon_number(p: &JCParams, choice: ModelChoice) -> Result<f64> {
    let eff = match choice {
        ModelChoice::Adiabatic => jc_adb_lindblad(p)?,
        ModelChoice::Prodiabatic(branch) => jc_pdb_lindblad(p, branch)?,
    };
    let rho = steady_state(&eff.model.liouvillian_at(0.0)?)?;
    let n_op = &eff.photon.adjoint() * &eff.photon;
    Ok(trace_product(&n_op, rho.operator())?.re)
}

/// Full cavity-atom model on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct JcExactModel {
    pub model: LindbladModel,
    pub n_max: usize,
    /// Cavity annihilation operator.
    pub a: OperatorMatrix,
    pub sigma: OperatorMatrix,
    pub sigma_z: OperatorMatrix,
    /// Projector on the highest Fock level.
    pub top_level: OperatorMatrix,
}

/// `H = Δa†a + (Ω/2)σ_z + g(a†σ + aσ†) − f(a + a†)`, jumps `a` at κ and `σ`
/// at γ. Slot 0 is the cavity, slot 1 the atom.
pub fn jc_exact_model(p: &JCParams, n_max: usize) -> Result<JcExactModel> {
    p.validate()?;
    if n_max == 0 {
        return Err(Error::ZeroTruncation);
    }
    let space = HilbertSpace::new(vec![n_max + 1, 2])?;
    let a = embed(&build_annihilation(n_max)?, 0, &space)?;
    let s = embed(&sigma(), 1, &space)?;
    let sz = embed(&sigma_z(), 1, &space)?;
    let ad = a.adjoint();
    let coupling = &(&ad * &s) + &(&a * &s.adjoint());
    let h =
        &(&(&(&(&ad * &a) * p.delta) + &(&sz * (p.omega / 2.0))) + &(&coupling * p.g)) - &(&(&a + &ad) * p.f);
    let top = embed(&build_transition(n_max + 1, n_max, n_max)?, 0, &space)?;
    let model = LindbladModel::new(h, vec![(a.clone(), p.kappa), (s.clone(), p.gamma)])?;
    Ok(JcExactModel { model, n_max, a, sigma: s, sigma_z: sz, top_level: top })
}

/// Atom in the ground state, cavity in the coherent state `α = 2i t_c f/κ`
/// sustained by the constant drive (truncated and renormalized).
pub fn jc_initial_state(m: &JcExactModel, p: &JCParams) -> Result<DensityMatrix> {
    let alpha = I * constant_filtered_drive(p);
    let mut amps = vec![ZERO; 2 * (m.n_max + 1)];
    let mut c_n = ONE;
    for n in 0..=m.n_max {
        if n > 0 {
            c_n = c_n * alpha / (n as f64).sqrt();
        }
        amps[2 * n] = c_n;
    }
    DensityMatrix::pure(m.model.space(), &amps)
}

/// `⟨σ_z⟩(t)` from one representation.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaZRun {
    pub times: Vec<f64>,
    pub sigma_z: Vec<f64>,
    /// Smallest eigenvalue of the state (or of the moment reconstruction)
    /// over the grid.
    pub min_eigenvalue: f64,
    /// Largest top-Fock-level population (exact runs only).
    pub max_leak: Option<f64>,
    pub n_max: Option<usize>,
}

fn min_state_eigenvalue(tr: &crate::dynamics::Trajectory) -> f64 {
    tr.states
        .as_ref()
        .expect("states kept")
        .iter()
        .map(|r| r.operator().min_hermitian_eigenvalue())
        .fold(f64::INFINITY, f64::min)
}

fn sigma_z_exact_at(p: &JCParams, n_max: usize, grid: &[f64], cfg: &IntegratorConfig) -> Result<SigmaZRun> {
    let m = jc_exact_model(p, n_max)?;
    let obs = vec![("sz".to_string(), m.sigma_z.clone()), ("top".to_string(), m.top_level.clone())];
    let tr = evolve_with_states(&m.model, &jc_initial_state(&m, p)?, grid, cfg, &obs)?;
    let series = |name: &str| tr.real_series(name).expect("observable recorded");
    Ok(SigmaZRun {
        times: grid.to_vec(),
        sigma_z: series("sz"),
        min_eigenvalue: min_state_eigenvalue(&tr),
        max_leak: Some(series("top").into_iter().fold(0.0, f64::max)),
        n_max: Some(n_max),
    })
}

/// Runs `f` at `n_max`, and once more at `n_max + 1` when the reported leak
/// exceeds [`LEAK_LIMIT`]; a second violation is an error.
pub fn with_leak_retry<T>(
    n_max: usize,
    leak: impl Fn(&T) -> f64,
    f: impl Fn(usize) -> Result<T>,
) -> Result<T> {
    let first = f(n_max)?;
    if leak(&first) <= LEAK_LIMIT {
        return Ok(first);
    }
    let second = f(n_max + 1)?;
    match leak(&second) {
        l if l > LEAK_LIMIT => Err(Error::TruncationLeak { leak: l, limit: LEAK_LIMIT }),
        _ => Ok(second),
    }
}

/// Full-model `⟨σ_z⟩(t)` from [`jc_initial_state`].
pub fn jc_sigma_z_exact(
    p: &JCParams,
    n_max: usize,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SigmaZRun> {
    with_leak_retry(n_max, |r: &SigmaZRun| r.max_leak.unwrap_or(0.0), |n| sigma_z_exact_at(p, n, grid, cfg))
}

/// Effective-model `⟨σ_z⟩(t)` from the atomic ground state.
pub fn jc_sigma_z_effective(eff: &EffectiveModel, grid: &[f64], cfg: &IntegratorConfig) -> Result<SigmaZRun> {
    let space = eff.model.space();
    let obs = vec![("sz".to_string(), sigma_z())];
    let tr = evolve_with_states(&eff.model, &DensityMatrix::basis(space, 0)?, grid, cfg, &obs)?;
    Ok(SigmaZRun {
        times: grid.to_vec(),
        sigma_z: tr.real_series("sz").expect("observable recorded"),
        min_eigenvalue: min_state_eigenvalue(&tr),
        max_leak: None,
        n_max: None,
    })
}

/// `⟨σ_z⟩(t)` from the moment equations, starting in the ground state.
pub fn jc_sigma_z_moments(
    p: &JCParams,
    order: EliminationOrder,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SigmaZRun> {
    let gen = match order {
        EliminationOrder::Adiabatic => jc_adb_moment_generator(p)?,
        EliminationOrder::Prodiabatic => jc_moment_generator(p)?,
    };
    let x0 = Array1::from_vec(vec![ZERO, ZERO, -ONE]);
    let xs = crate::dynamics::integrate_affine(|_| Ok(gen.clone()), x0, grid, &[], cfg)?;
    Ok(SigmaZRun {
        times: grid.to_vec(),
        sigma_z: xs.iter().map(|x| x[2].re).collect(),
        // eigenvalues of [[(1 − z)/2, ⟨σ†⟩], [⟨σ⟩, (1 + z)/2]]
        min_eigenvalue: xs
            .iter()
            .map(|x| 0.5 - (0.25 * x[2].re * x[2].re + x[0].norm_sqr()).sqrt())
            .fold(f64::INFINITY, f64::min),
        max_leak: None,
        n_max: None,
    })
}

/// Stationary full-model `g²(t)` of the cavity field.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactG2 {
    pub g2: Vec<f64>,
    pub photon_number: f64,
    pub leak: f64,
    pub n_max: usize,
}

pub fn jc_g2_exact(p: &JCParams, n_max: usize, grid: &[f64], cfg: &IntegratorConfig) -> Result<ExactG2> {
    with_leak_retry(
        n_max,
        |r: &ExactG2| r.leak,
        |n| {
            let m = jc_exact_model(p, n)?;
            let rho = steady_state(&m.model.liouvillian_at(0.0)?)?;
            let n_op = &m.a.adjoint() * &m.a;
            Ok(ExactG2 {
                g2: g2_from_state(&m.model, &rho, &m.a, grid, cfg)?,
                photon_number: trace_product(&n_op, rho.operator())?.re,
                leak: trace_product(&m.top_level, rho.operator())?.re,
                n_max: n,
            })
        },
    )
}
