//! Lambda system in a two-mode cavity: exact models, effective generators,
//! and dark-state diagnostics.
//!
//! Atom levels 1, 2, 3 are stored at indices 0, 1, 2. Mode H couples 1↔3 and
//! mode V couples 2↔3. Detunings are zero throughout, so `t_c = 1` and the
//! filtered drives are real.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::dynamics::{
    evolve_with_states, integrate_affine, AffineGenerator, IntegratorConfig, JumpTerm, LindbladModel,
    Schedule,
};
use crate::elimination::{with_leak_retry, EliminationOrder, EpsilonReport};
use crate::error::{Error, Result};
use crate::operators::{
    build_annihilation, build_transition, embed, DensityMatrix, HilbertSpace, OperatorMatrix,
};
use crate::pulse::{filtered_drive, FilteredDrive, PulseEnvelope};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub use crate::dynamics::LEAK_LIMIT;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaParams {
    pub kappa: f64,
    pub gamma: f64,
    pub g: f64,
    pub env_h: PulseEnvelope,
    pub env_v: PulseEnvelope,
}

impl LambdaParams {
    pub fn new(kappa: f64, gamma: f64, g: f64, env_h: PulseEnvelope, env_v: PulseEnvelope) -> Result<Self> {
        let p = Self { kappa, gamma, g, env_h, env_v };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa = {} must be positive", self.kappa)));
        }
        if !(self.gamma >= 0.0 && self.g >= 0.0 && self.gamma.is_finite() && self.g.is_finite()) {
            return Err(Error::InvalidParameter("gamma and g must be finite and nonnegative".into()));
        }
        self.env_h.validate()?;
        self.env_v.validate()
    }

    /// Reference boxcar protocol in units of κ.
    pub fn fig3() -> Self {
        Self {
            kappa: 1.0,
            gamma: 5e-4,
            g: 0.1,
            env_h: PulseEnvelope::Boxcar { center: 45.0, halfwidth: 10.0, amp: 1.0 },
            env_v: PulseEnvelope::Boxcar { center: 55.0, halfwidth: 10.0, amp: 1.0 },
        }
    }

    /// Slow Gaussian protocol.
    pub fn s1_slow() -> Self {
        Self {
            kappa: 1.0,
            gamma: 5e-4,
            g: 0.2,
            env_h: PulseEnvelope::Gaussian { amp: 0.75, center: 42.0, width: 12.0 },
            env_v: PulseEnvelope::Gaussian { amp: 0.75, center: 58.0, width: 12.0 },
        }
    }

    /// Narrow Gaussian protocol.
    pub fn s1_fast() -> Self {
        Self {
            kappa: 1.0,
            gamma: 5e-4,
            g: 0.2,
            env_h: PulseEnvelope::Gaussian { amp: 0.75, center: 47.5, width: 4.0 },
            env_v: PulseEnvelope::Gaussian { amp: 0.75, center: 52.5, width: 4.0 },
        }
    }

    /// `F_p = 4g²/(γκ)`; needs `γ > 0`.
    pub fn purcell(&self) -> Result<f64> {
        if self.gamma <= 0.0 {
            return Err(Error::Inapplicable("elimination needs γ > 0".into()));
        }
        Ok(4.0 * self.g * self.g / (self.gamma * self.kappa))
    }

    /// Union of the envelope breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.env_h.breakpoints();
        b.extend(self.env_v.breakpoints());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        b
    }

    fn filters(&self) -> Result<(FilteredDrive, FilteredDrive)> {
        Ok((
            FilteredDrive::new(self.env_h, ONE, self.kappa)?,
            FilteredDrive::new(self.env_v, ONE, self.kappa)?,
        ))
    }

    /// Largest drive during the protocol sets the order-ε estimate.
    pub fn epsilon_report(&self) -> EpsilonReport {
        let k = self.kappa;
        EpsilonReport::from_ratios(
            vec![("gamma/kappa".into(), self.gamma / k)],
            vec![
                ("g/kappa".into(), self.g / k),
                ("f_H/kappa".into(), self.env_h.amplitude() / k),
                ("f_V/kappa".into(), self.env_v.amplitude() / k),
            ],
        )
    }
}

/// Filtered drives `F_H`, `F_V` on the grid, from `dF/dt = f − (κ/2)F`.
pub fn filtered_envelopes(p: &LambdaParams, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    let h = filtered_drive(&p.env_h, ONE, p.kappa, grid)?;
    let v = filtered_drive(&p.env_v, ONE, p.kappa, grid)?;
    Ok((h.into_iter().map(|z| z.re).collect(), v.into_iter().map(|z| z.re).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarkStateRecord {
    pub theta: f64,
    /// Amplitudes on `|1⟩` and `|2⟩`.
    pub amplitudes: [C64; 2],
    pub adiabaticity_ratio: Option<f64>,
}

/// `cos θ|1⟩ − sin θ|2⟩` with `tan θ = F_H/F_V`.
pub fn dark_state(f_h: C64, f_v: C64) -> Result<DarkStateRecord> {
    if f_h.norm() == 0.0 && f_v.norm() == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    if f_h.im != 0.0 || f_v.im != 0.0 {
        return Err(Error::Inapplicable("dark state defined for real drives".into()));
    }
    let theta = f_h.re.atan2(f_v.re);
    Ok(DarkStateRecord {
        theta,
        amplitudes: [C64::new(theta.cos(), 0.0), C64::new(-theta.sin(), 0.0)],
        adiabaticity_ratio: None,
    })
}

/// `|θ̇|/√(F_H² + F_V²)` by finite differences; `None` where both drives vanish
/// at the point or at a neighbour used in the difference.
pub fn adiabaticity_metric(f_h: &[f64], f_v: &[f64], grid: &[f64]) -> Result<Vec<Option<f64>>> {
    let n = grid.len();
    if f_h.len() != n || f_v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: f_h.len().min(f_v.len()) });
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::UnorderedGrid);
    }
    if n < 2 {
        return Ok(vec![None; n]);
    }
    let theta: Vec<Option<f64>> =
        (0..n).map(|k| (f_h[k] != 0.0 || f_v[k] != 0.0).then(|| f_h[k].atan2(f_v[k]))).collect();
    Ok((0..n)
        .map(|k| {
            let (lo, hi) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            let (a, b) = (theta[lo]?, theta[hi]?);
            theta[k]?;
            let rate = (b - a) / (grid[hi] - grid[lo]);
            Some(rate.abs() / f_h[k].hypot(f_v[k]))
        })
        .collect())
}

/// Which picture the exact model is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Bare cavity operators; the coherent drive populates the Fock space.
    Lab,
    /// Cavity operators displaced by the classical response `iF_μ(t)`, which
    /// removes the drive from the photon sector. Unitarily equivalent to `Lab`.
    Displaced,
}

/// Full three-level plus two-mode model.
#[derive(Clone, Debug)]
pub struct StirapExactModel {
    pub model: LindbladModel,
    pub frame: Frame,
    pub n_max: usize,
    /// `σ_jj` embedded, for `j = 1, 2, 3`.
    pub populations: [OperatorMatrix; 3],
    /// Population in the highest Fock level of either mode.
    pub top_level: OperatorMatrix,
}

struct LambdaOps {
    space: HilbertSpace,
    a_h: OperatorMatrix,
    a_v: OperatorMatrix,
    s13: OperatorMatrix,
    s23: OperatorMatrix,
    pops: [OperatorMatrix; 3],
    top: OperatorMatrix,
}

fn lambda_ops(n_max: usize) -> Result<LambdaOps> {
    if n_max == 0 {
        return Err(Error::ZeroTruncation);
    }
    let space = HilbertSpace::new(vec![n_max + 1, n_max + 1, 3])?;
    let a = build_annihilation(n_max)?;
    let a_h = embed(&a, 0, &space)?;
    let a_v = embed(&a, 1, &space)?;
    let s13 = embed(&build_transition(3, 0, 2)?, 2, &space)?;
    let s23 = embed(&build_transition(3, 1, 2)?, 2, &space)?;
    let pops = [
        embed(&build_transition(3, 0, 0)?, 2, &space)?,
        embed(&build_transition(3, 1, 1)?, 2, &space)?,
        embed(&build_transition(3, 2, 2)?, 2, &space)?,
    ];
    let top_one = build_transition(n_max + 1, n_max, n_max)?;
    let th = embed(&top_one, 0, &space)?;
    let tv = embed(&top_one, 1, &space)?;
    // P(top_H ∪ top_V)
    let top = &(&th + &tv) - &(&th * &tv);
    Ok(LambdaOps { space, a_h, a_v, s13, s23, pops, top })
}

fn exact_model(p: &LambdaParams, n_max: usize, frame: Frame) -> Result<StirapExactModel> {
    p.validate()?;
    let ops = lambda_ops(n_max)?;
    let coupling = &(&(&ops.a_h.adjoint() * &ops.s13) + &(&ops.a_v.adjoint() * &ops.s23)) * p.g;
    let h0 = &coupling + &coupling.adjoint();
    let hamiltonian = match frame {
        Frame::Lab => {
            let xh = &ops.a_h + &ops.a_h.adjoint();
            let xv = &ops.a_v + &ops.a_v.adjoint();
            let (eh, ev) = (p.env_h, p.env_v);
            Schedule::varying(move |t| &(&h0 - &(&xh * eh.drive(t))) - &(&xv * ev.drive(t)))
        }
        Frame::Displaced => {
            let (fh, fv) = p.filters()?;
            let yh = &(&ops.s13 - &ops.s13.adjoint()) * (-I * p.g);
            let yv = &(&ops.s23 - &ops.s23.adjoint()) * (-I * p.g);
            Schedule::varying(move |t| &(&h0 + &(&yh * fh.at(t).re)) + &(&yv * fv.at(t).re))
        }
    };
    let jumps = vec![
        JumpTerm::fixed("a_H", ops.a_h.clone(), p.kappa),
        JumpTerm::fixed("a_V", ops.a_v.clone(), p.kappa),
        JumpTerm::fixed("sigma_13", ops.s13.clone(), p.gamma),
        JumpTerm::fixed("sigma_23", ops.s23.clone(), p.gamma),
    ];
    let model =
        LindbladModel::general(ops.space.clone(), hamiltonian, jumps)?.with_breakpoints(p.breakpoints());
    Ok(StirapExactModel { model, frame, n_max, populations: ops.pops, top_level: ops.top })
}

/// Lab-frame model: `H = g(a_V†σ₂₃ + a_H†σ₁₃) − f_V a_V† − f_H a_H† + h.c.`,
/// jumps `a_H`, `a_V` at κ and `σ₁₃`, `σ₂₃` at γ.
pub fn stirap_full_model(p: &LambdaParams, n_max: usize) -> Result<StirapExactModel> {
    exact_model(p, n_max, Frame::Lab)
}

/// The same dynamics after displacing each mode by `iF_μ(t)`:
/// `H' = g Σ(a_μ†σ_μ3 + h.c.) − igF_H(σ₁₃ − σ₃₁) − igF_V(σ₂₃ − σ₃₂)`.
pub fn stirap_displaced_model(p: &LambdaParams, n_max: usize) -> Result<StirapExactModel> {
    exact_model(p, n_max, Frame::Displaced)
}

/// Populations and atom states along a trajectory.
#[derive(Clone, Debug)]
pub struct StirapRun {
    pub times: Vec<f64>,
    /// `populations[j][k]` is `P_{j+1}` at `times[k]`.
    pub populations: [Vec<f64>; 3],
    /// Atom density matrix (or its moment reconstruction) per time.
    pub atom_states: Vec<OperatorMatrix>,
    /// Largest top-Fock-level population (exact runs only).
    pub max_leak: Option<f64>,
    pub n_max: Option<usize>,
}

impl StirapRun {
    /// Mean over the grid of `Σ_j |P_j − P'_j|`.
    pub fn mean_l1_error(&self, other: &StirapRun) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::InvalidParameter("runs use different grids".into()));
        }
        let n = self.times.len() as f64;
        let s: f64 = (0..self.times.len())
            .map(|k| (0..3).map(|j| (self.populations[j][k] - other.populations[j][k]).abs()).sum::<f64>())
            .sum();
        Ok(s / n)
    }

    pub fn max_population_diff(&self, other: &StirapRun) -> f64 {
        (0..3)
            .flat_map(|j| self.populations[j].iter().zip(&other.populations[j]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_population(&self, level: usize) -> f64 {
        self.populations[level].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_level(level: usize) -> Result<()> {
    if level > 2 {
        return Err(Error::IndexOutOfRange { index: level, dim: 3 });
    }
    Ok(())
}

/// Integrates an exact model from the cavity vacuum (or displaced vacuum)
/// with the atom in `level` (0-based).
pub fn run_exact_model(
    m: &StirapExactModel,
    level: usize,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<StirapRun> {
    check_level(level)?;
    let rho0 = DensityMatrix::product_basis(m.model.space(), &[0, 0, level])?;
    let obs: Vec<(String, OperatorMatrix)> = vec![
        ("P1".into(), m.populations[0].clone()),
        ("P2".into(), m.populations[1].clone()),
        ("P3".into(), m.populations[2].clone()),
        ("top".into(), m.top_level.clone()),
    ];
    let tr = evolve_with_states(&m.model, &rho0, grid, cfg, &obs)?;
    let series = |name: &str| tr.real_series(name).expect("observable recorded");
    let leak = series("top").into_iter().fold(0.0, f64::max);
    let atom_states = tr
        .states
        .as_ref()
        .expect("states kept")
        .iter()
        .map(|r| crate::operators::partial_trace(r.operator(), 2))
        .collect::<Result<Vec<_>>>()?;
    Ok(StirapRun {
        times: grid.to_vec(),
        populations: [series("P1"), series("P2"), series("P3")],
        atom_states,
        max_leak: Some(leak),
        n_max: Some(m.n_max),
    })
}

/// Exact run at `n_max`, retried once at `n_max + 1` when the top Fock level
/// exceeds [`LEAK_LIMIT`]. A second violation is an error.
pub fn run_exact(
    p: &LambdaParams,
    frame: Frame,
    n_max: usize,
    level: usize,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<StirapRun> {
    with_leak_retry(
        n_max,
        |r: &StirapRun| r.max_leak.unwrap_or(0.0),
        |n| run_exact_model(&exact_model(p, n, frame)?, level, grid, cfg),
    )
}

/// Moment ordering of the effective generators.
pub const STIRAP_MOMENTS: [&str; 8] = ["s11", "s22", "s12", "s21", "s13", "s31", "s23", "s32"];

/// `(i, j)` of each entry of [`STIRAP_MOMENTS`] (0-based levels).
const MOMENT_INDEX: [(usize, usize); 8] = [(0, 0), (1, 1), (0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];

/// Time-dependent affine generator of the eight atom moments with
/// `⟨σ₃₃⟩ = 1 − ⟨σ₁₁⟩ − ⟨σ₂₂⟩` eliminated.
#[derive(Clone, Debug)]
pub struct StirapGenerator {
    pub params: LambdaParams,
    pub order: EliminationOrder,
    filters: (FilteredDrive, FilteredDrive),
}

impl StirapGenerator {
    /// Drives entering the generator at time `t`: filtered for the
    /// prodiabatic order, `2f/κ` for the adiabatic one.
    pub fn drives_at(&self, t: f64) -> (f64, f64) {
        match self.order {
            EliminationOrder::Prodiabatic => (self.filters.0.at(t).re, self.filters.1.at(t).re),
            EliminationOrder::Adiabatic => {
                let k = self.params.kappa;
                (2.0 * self.params.env_h.drive(t) / k, 2.0 * self.params.env_v.drive(t) / k)
            }
        }
    }

    pub fn at(&self, t: f64) -> Result<AffineGenerator> {
        let p = &self.params;
        let fp = p.purcell()?;
        let (fh, fv) = self.drives_at(t);
        let g = p.g;
        // every γ/κ-proportional correction, including 4g²/κ² = γF_p/κ
        let r = match self.order {
            EliminationOrder::Prodiabatic => p.gamma * fp / p.kappa,
            EliminationOrder::Adiabatic => 0.0,
        };
        let gs = p.gamma * (1.0 + fp) * (1.0 + 2.0 * r);
        let c = |x: f64| C64::new(x, 0.0);

        // dense equations in the full nine-moment basis, row-major over (i, j)
        let mut full = Array2::<C64>::zeros((9, 9));
        let idx = |i: usize, j: usize| 3 * i + j;
        let mut set = |row: (usize, usize), col: (usize, usize), v: f64| {
            full[[idx(row.0, row.1), idx(col.0, col.1)]] += c(v);
        };
        let (h1, v1) = (g * fh * (1.0 + r), g * fv * (1.0 + r));
        let (hx, vx) = (fh * g * r, fv * g * r);
        // populations
        set((0, 0), (2, 2), gs);
        set((0, 0), (0, 2), -h1);
        set((0, 0), (2, 0), -h1);
        set((0, 0), (1, 2), -vx);
        set((0, 0), (2, 1), -vx);
        set((1, 1), (2, 2), gs);
        set((1, 1), (0, 2), -hx);
        set((1, 1), (2, 0), -hx);
        set((1, 1), (1, 2), -v1);
        set((1, 1), (2, 1), -v1);
        // ground coherence
        set((0, 1), (0, 2), -g * fv);
        set((0, 1), (2, 1), -g * fh);
        // optical coherences
        let (h2, v2) = (g * fh * (1.0 + 2.0 * r), g * fv * (1.0 + 2.0 * r));
        let (hm, vm) = (g * fh * (1.0 - r), g * fv * (1.0 - r));
        set((0, 2), (0, 2), -gs);
        set((0, 2), (0, 0), h2);
        set((0, 2), (0, 1), v2);
        set((0, 2), (2, 2), -hm);
        set((1, 2), (1, 2), -gs);
        set((1, 2), (1, 1), v2);
        set((1, 2), (1, 0), h2);
        set((1, 2), (2, 2), -vm);
        // conjugate rows: ⟨σ_ji⟩ = ⟨σ_ij⟩*, coefficients real
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for (k, l) in (0..3).flat_map(|k| (0..3).map(move |l| (k, l))) {
                full[[idx(j, i), idx(l, k)]] = full[[idx(i, j), idx(k, l)]].conj();
            }
        }

        // substitute σ₃₃ = 1 − σ₁₁ − σ₂₂
        let mut m = Array2::zeros((8, 8));
        let mut k = Array1::zeros(8);
        for (row, &(i, j)) in MOMENT_INDEX.iter().enumerate() {
            let src = full.row(idx(i, j));
            let w33 = src[idx(2, 2)];
            k[row] = w33;
            for (col, &(a, b)) in MOMENT_INDEX.iter().enumerate() {
                let mut v = src[idx(a, b)];
                if (a, b) == (0, 0) || (a, b) == (1, 1) {
                    v -= w33;
                }
                m[[row, col]] = v;
            }
        }
        AffineGenerator::new(STIRAP_MOMENTS.iter().map(|s| s.to_string()).collect(), m, k)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.params.breakpoints()
    }

    /// Integrates from the atom in `level` (0-based).
    pub fn run(&self, level: usize, grid: &[f64], cfg: &IntegratorConfig) -> Result<StirapRun> {
        check_level(level)?;
        let mut x0 = Array1::zeros(8);
        if level < 2 {
            x0[level] = ONE;
        }
        let xs = integrate_affine(|t| self.at(t), x0, grid, &self.breakpoints(), cfg)?;
        let mut pops = [Vec::new(), Vec::new(), Vec::new()];
        let mut states = Vec::with_capacity(xs.len());
        let space = HilbertSpace::single(3)?;
        for x in &xs {
            let (p1, p2) = (x[0].re, x[1].re);
            pops[0].push(p1);
            pops[1].push(p2);
            pops[2].push(1.0 - p1 - p2);
            // ρ_ji = ⟨σ_ij⟩
            let mut rho = Array2::zeros((3, 3));
            for (v, &(i, j)) in x.iter().zip(&MOMENT_INDEX) {
                rho[[j, i]] = *v;
            }
            rho[[2, 2]] = C64::new(1.0 - p1 - p2, 0.0);
            states.push(OperatorMatrix::new(space.clone(), rho)?);
        }
        Ok(StirapRun {
            times: grid.to_vec(),
            populations: pops,
            atom_states: states,
            max_leak: None,
            n_max: None,
        })
    }
}

fn generator(p: &LambdaParams, order: EliminationOrder) -> Result<StirapGenerator> {
    p.validate()?;
    p.purcell()?;
    Ok(StirapGenerator { params: *p, order, filters: p.filters()? })
}

pub fn stirap_pdb_generator(p: &LambdaParams) -> Result<StirapGenerator> {
    generator(p, EliminationOrder::Prodiabatic)
}

pub fn stirap_adb_generator(p: &LambdaParams) -> Result<StirapGenerator> {
    generator(p, EliminationOrder::Adiabatic)
}

/// Time-dependent three-level Lindblad model.
#[derive(Clone, Debug)]
pub struct StirapEffectiveModel {
    pub model: LindbladModel,
    pub order: EliminationOrder,
    pub epsilon: EpsilonReport,
}

fn atom_transition(i: usize, j: usize) -> OperatorMatrix {
    build_transition(3, i, j).expect("valid level")
}

/// Prodiabatic master equation with drive-dependent composite jumps.
pub fn stirap_pdb_lindblad(p: &LambdaParams) -> Result<StirapEffectiveModel> {
    p.validate()?;
    let fp = p.purcell()?;
    let (fh, fv) = p.filters()?;
    let (g, k, gm) = (p.g, p.kappa, p.gamma);
    let s = atom_transition;
    let y13 = &(&s(0, 2) - &s(2, 0)) * (-I * g * (1.0 + gm * fp / k));
    let y23 = &(&s(1, 2) - &s(2, 1)) * (-I * g * (1.0 + gm * fp / k));
    let hamiltonian = Schedule::varying(move |t| &(&y13 * fh.at(t).re) + &(&y23 * fv.at(t).re));
    let w = g * fp / (k * (1.0 + fp));
    let base = gm * (1.0 + fp);
    let jump_h = Schedule::varying(move |t| {
        let (a, b) = (fh.at(t).re, fv.at(t).re);
        &s(0, 2) - &(&(&(&(&s(0, 0) * a) + &(&s(0, 1) * b)) - &(&s(2, 2) * a)) * w)
    });
    let jump_v = Schedule::varying(move |t| {
        let (a, b) = (fh.at(t).re, fv.at(t).re);
        &s(1, 2) - &(&(&(&(&s(1, 0) * a) + &(&s(1, 1) * b)) - &(&s(2, 2) * b)) * w)
    });
    let extra = base * 2.0 * gm / k * fp;
    let jumps = vec![
        JumpTerm::fixed("sigma_13", s(0, 2), extra),
        JumpTerm::fixed("sigma_23", s(1, 2), extra),
        JumpTerm { label: "composite_13".into(), operator: jump_h, rate: Schedule::Fixed(base) },
        JumpTerm { label: "composite_23".into(), operator: jump_v, rate: Schedule::Fixed(base) },
    ];
    let model = LindbladModel::general(HilbertSpace::single(3)?, hamiltonian, jumps)?
        .with_breakpoints(p.breakpoints());
    Ok(StirapEffectiveModel { model, order: EliminationOrder::Prodiabatic, epsilon: p.epsilon_report() })
}

/// Integrates a three-level model from `level` (0-based).
pub fn run_atom_model(
    model: &LindbladModel,
    level: usize,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<StirapRun> {
    check_level(level)?;
    let space = model.space().clone();
    if space.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: space.dim() });
    }
    let obs: Vec<(String, OperatorMatrix)> =
        (0..3).map(|j| (format!("P{}", j + 1), atom_transition(j, j))).collect();
    let tr = evolve_with_states(model, &DensityMatrix::basis(&space, level)?, grid, cfg, &obs)?;
    let series = |name: &str| tr.real_series(name).expect("observable recorded");
    Ok(StirapRun {
        times: grid.to_vec(),
        populations: [series("P1"), series("P2"), series("P3")],
        atom_states: tr.states.expect("states kept").into_iter().map(|r| r.into_operator()).collect(),
        max_leak: None,
        n_max: None,
    })
}

/// `⟨Ψ(t)|ρ(t)|Ψ(t)⟩` for the dark state of the filtered drives; `None`
/// where both drives vanish.
pub fn dark_state_overlap(states: &[OperatorMatrix], f_h: &[f64], f_v: &[f64]) -> Result<Vec<Option<f64>>> {
    if states.len() != f_h.len() || states.len() != f_v.len() {
        return Err(Error::DimensionMismatch { expected: states.len(), found: f_h.len().min(f_v.len()) });
    }
    states
        .iter()
        .zip(f_h.iter().zip(f_v))
        .map(|(rho, (&a, &b))| {
            if rho.dim() != 3 {
                return Err(Error::DimensionMismatch { expected: 3, found: rho.dim() });
            }
            match dark_state(C64::new(a, 0.0), C64::new(b, 0.0)) {
                Err(Error::UndefinedAngle) => Ok(None),
                Err(e) => Err(e),
                Ok(d) => {
                    let psi = [d.amplitudes[0], d.amplitudes[1]];
                    let mut s = C64::new(0.0, 0.0);
                    for i in 0..2 {
                        for j in 0..2 {
                            s += psi[i].conj() * rho.get(i, j) * psi[j];
                        }
                    }
                    Ok(Some(s.re))
                }
            }
        })
        .collect()
}
