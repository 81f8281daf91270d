//! Time evolution, steady states and two-time correlators of Lindblad models.

mod affine;
mod integrator;
mod model;

use nalgebra as na;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1};
use num_complex::Complex64 as C64;

pub use affine::{adjoint_action, induced_generator, integrate_affine, AffineGenerator};
pub use integrator::{IntegratorConfig, StepStats};
pub use model::{JumpTerm, LindbladModel, Schedule, TimeFn};

pub(crate) use integrator::integrate;

use crate::error::{Error, Result};
use crate::operators::{to_nalgebra, trace_product, DensityMatrix, OperatorMatrix, Superoperator};

/// Separation below which the two smallest singular values of a Liouvillian
/// count as a degenerate null space.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Largest top-Fock-level population tolerated in an exact run.
pub const LEAK_LIMIT: f64 = 1e-6;

/// Sampled observables (and optionally states) on a time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[k][j]` is observable `j` at `times[k]`.
    pub values: Vec<Vec<C64>>,
    pub states: Option<Vec<DensityMatrix>>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<Vec<C64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }

    pub fn real_series(&self, name: &str) -> Option<Vec<f64>> {
        self.series(name).map(|v| v.into_iter().map(|z| z.re).collect())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::UnorderedGrid);
    }
    Ok(())
}

fn as_matrix(v: &Array1<C64>, d: usize) -> ArrayView2<'_, C64> {
    v.view().into_shape_with_order((d, d)).expect("state length d²")
}

/// Right-hand side closure for the master equation on a row-major `d×d` state.
fn master_rhs(
    model: &LindbladModel,
) -> Result<impl FnMut(f64, ndarray::ArrayView1<C64>, ArrayViewMut1<C64>) -> Result<()> + '_> {
    let d = model.space().dim();
    let mut fixed = if model.is_time_dependent() { None } else { Some(model.generator_at(0.0)?) };
    Ok(move |t: f64, y: ndarray::ArrayView1<C64>, dy: ArrayViewMut1<C64>| {
        let x = y.into_shape_with_order((d, d)).expect("state length d²");
        let out = dy.into_shape_with_order((d, d)).expect("state length d²");
        match fixed.as_mut() {
            Some(g) => g.apply(x, out),
            None => model.generator_at(t)?.apply(x, out),
        }
        Ok(())
    })
}

/// Integrates the master equation and records `Tr(O ρ(t))` for each named
/// observable. The first grid point is the initial time.
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
    observables: &[(String, OperatorMatrix)],
) -> Result<Trajectory> {
    evolve_impl(model, rho0, grid, cfg, observables, false)
}

/// As [`evolve`], additionally keeping the density matrix at every grid point.
pub fn evolve_with_states(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
    observables: &[(String, OperatorMatrix)],
) -> Result<Trajectory> {
    evolve_impl(model, rho0, grid, cfg, observables, true)
}

fn evolve_impl(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
    observables: &[(String, OperatorMatrix)],
    keep: bool,
) -> Result<Trajectory> {
    check_grid(grid)?;
    let space = model.space().clone();
    if rho0.space() != &space {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: rho0.space().dim() });
    }
    for (_, o) in observables {
        if o.space() != &space {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: o.dim() });
        }
    }
    let d = space.dim();
    let y0 = Array1::from_iter(rho0.operator().elements().iter().cloned());
    let mut values = Vec::with_capacity(grid.len());
    let mut states = keep.then(|| Vec::with_capacity(grid.len()));
    let rhs = master_rhs(model)?;
    let stats = integrate(rhs, y0, grid[0], grid, model.breakpoints(), cfg, |_, t, y| {
        let op = OperatorMatrix::from_parts_unchecked(space.clone(), as_matrix(y, d).to_owned());
        let rho = DensityMatrix::with_tolerance_scale(op, 10.0)
            .map_err(|e| Error::InvariantViolation { t, what: e.to_string() })?;
        let row =
            observables.iter().map(|(_, o)| trace_product(o, rho.operator())).collect::<Result<Vec<_>>>()?;
        values.push(row);
        if let Some(s) = states.as_mut() {
            s.push(rho);
        }
        Ok(())
    })?;
    Ok(Trajectory {
        times: grid.to_vec(),
        names: observables.iter().map(|(n, _)| n.clone()).collect(),
        values,
        states,
        stats,
    })
}

/// Unique state with `L ρ = 0`, `Tr ρ = 1`.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let space = l.space().clone();
    let d = space.dim();
    let n = d * d;
    let lm = to_nalgebra(l.elements());

    let mut sv: Vec<f64> = lm.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sv.len() >= 2 && sv[1] - sv[0] < DEGENERACY_TOL {
        return Err(Error::DegenerateSteadyState { smallest: sv[0], second: sv[1] });
    }

    let one = C64::new(1.0, 0.0);
    let mut b = na::DMatrix::<C64>::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(&lm);
    for k in 0..d {
        b[(k + d * k, n)] = one;
        b[(n, k + d * k)] = one;
    }
    let mut rhs = na::DVector::<C64>::zeros(n + 1);
    rhs[n] = one;
    let lu = b.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    for _ in 0..3 {
        let r = &rhs - &b * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let m = Array2::from_shape_fn((d, d), |(i, j)| x[i + d * j]);
    let herm = Array2::from_shape_fn((d, d), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]].conj()));
    let tr: C64 = (0..d).map(|k| herm[[k, k]]).sum();
    let op = OperatorMatrix::new(space, herm.mapv(|z| z / tr.re))?;
    DensityMatrix::new(op)
}

/// `⟨left(0) mid(t) right(0)⟩ = Tr[mid · e^{Lt}(right ρ left)]` for every
/// `t` in the grid (all `t ≥ 0`).
pub fn two_time_correlator(
    model: &LindbladModel,
    rho: &DensityMatrix,
    left: &OperatorMatrix,
    mid: &OperatorMatrix,
    right: &OperatorMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<C64>> {
    if model.is_time_dependent() {
        return Err(Error::TimeDependentModel);
    }
    if let Some(&t) = grid.iter().find(|&&t| t < 0.0) {
        return Err(Error::NegativeTime(t));
    }
    check_grid(grid)?;
    let space = model.space().clone();
    for op in [left, mid, right, rho.operator()] {
        if op.space() != &space {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: op.dim() });
        }
    }
    let d = space.dim();
    let x0 = right.try_mul(rho.operator())?.try_mul(left)?;
    let scale = x0.max_abs();
    if scale == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); grid.len()]);
    }
    let y0 = Array1::from_iter(x0.elements().iter().map(|z| z / scale));
    let mut out = Vec::with_capacity(grid.len());
    let rhs = master_rhs(model)?;
    integrate(rhs, y0, 0.0, grid, &[], cfg, |_, _, y| {
        let x = as_matrix(y, d);
        let m = mid.elements();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                s += m[[i, j]] * x[[j, i]];
            }
        }
        out.push(s * scale);
        Ok(())
    })?;
    Ok(out)
}

/// Normalized intensity correlation of `a` in the given state.
pub fn g2_from_state(
    model: &LindbladModel,
    rho: &DensityMatrix,
    a: &OperatorMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let ad = a.adjoint();
    let n_op = &ad * a;
    let n = trace_product(&n_op, rho.operator())?.re;
    if n < 1e-14 {
        return Err(Error::UndefinedCorrelation(n));
    }
    let num = two_time_correlator(model, rho, &ad, &n_op, a, grid, cfg)?;
    Ok(num.into_iter().map(|z| z.re / (n * n)).collect())
}

/// Stationary `g²(t)` of the mode operator `a`.
pub fn g2_curve(
    model: &LindbladModel,
    a: &OperatorMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    if model.is_time_dependent() {
        return Err(Error::TimeDependentModel);
    }
    let rho = steady_state(&model.liouvillian_at(0.0)?)?;
    g2_from_state(model, &rho, a, grid, cfg)
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (end - start) / (points - 1) as f64;
            (0..points).map(|k| if k + 1 == points { end } else { start + h * k as f64 }).collect()
        }
    }
}
