//! Affine moment equations `dx/dt = M(t) x + c(t)` and their extraction from
//! Lindblad models.

use nalgebra as na;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::integrator::{integrate, IntegratorConfig};
use super::model::LindbladModel;
use crate::error::{Error, Result};
use crate::operators::{to_nalgebra, trace_product, OperatorMatrix};

/// Linear-plus-constant generator on a named moment vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGenerator {
    pub names: Vec<String>,
    pub matrix: Array2<C64>,
    pub constant: Array1<C64>,
}

impl AffineGenerator {
    pub fn new(names: Vec<String>, matrix: Array2<C64>, constant: Array1<C64>) -> Result<Self> {
        let n = names.len();
        if matrix.dim() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        if constant.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: constant.len() });
        }
        Ok(Self { names, matrix, constant })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn apply(&self, x: &Array1<C64>) -> Array1<C64> {
        self.matrix.dot(x) + &self.constant
    }

    /// Largest absolute difference over all matrix and constant coefficients.
    pub fn max_coefficient_diff(&self, other: &AffineGenerator) -> Result<f64> {
        if self.names != other.names {
            return Err(Error::InvalidParameter(format!(
                "moment bases differ: {:?} vs {:?}",
                self.names, other.names
            )));
        }
        let m = (&self.matrix - &other.matrix).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let c = (&self.constant - &other.constant).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        Ok(m.max(c))
    }
}

/// Integrates an affine system, sampling the generator at every stage.
pub fn integrate_affine<G>(
    mut generator: G,
    x0: Array1<C64>,
    grid: &[f64],
    breakpoints: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<Array1<C64>>>
where
    G: FnMut(f64) -> Result<AffineGenerator>,
{
    let Some(&t0) = grid.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(grid.len());
    integrate(
        |t, x, mut dx| {
            let g = generator(t)?;
            if g.len() != x.len() {
                return Err(Error::DimensionMismatch { expected: x.len(), found: g.len() });
            }
            dx.assign(&(g.matrix.dot(&x) + &g.constant));
            Ok(())
        },
        x0,
        t0,
        grid,
        breakpoints,
        cfg,
        |_, _, x| {
            out.push(x.clone());
            Ok(())
        },
    )?;
    Ok(out)
}

/// Heisenberg-picture generator `i[H,O] + Σ r (A†OA − ½{A†A, O})`.
pub fn adjoint_action(
    h: &OperatorMatrix,
    jumps: &[(OperatorMatrix, f64)],
    o: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    let mut out = h.try_mul(o)? - o.try_mul(h)?;
    out = out * C64::new(0.0, 1.0);
    for (a, r) in jumps {
        if *r < 0.0 {
            return Err(Error::NegativeRate(*r));
        }
        let ad = a.adjoint();
        let ada = &ad * a;
        let anti = &(&ada * o) + &(o * &ada);
        let term = &(&(&ad * o) * a) - &(&anti * 0.5);
        out += &(&term * *r);
    }
    Ok(out)
}

/// Moment equations induced by the model at time `t` on the span of
/// `{I, O_1, …, O_n}`: `d⟨O_k⟩/dt = c_k + Σ_j M_kj ⟨O_j⟩`.
pub fn induced_generator(
    model: &LindbladModel,
    t: f64,
    basis: &[(String, OperatorMatrix)],
) -> Result<AffineGenerator> {
    let h = model.hamiltonian_at(t)?;
    let jumps = model.jumps_at(t)?;
    let space = model.space();
    let mut full = vec![OperatorMatrix::identity(space)];
    full.extend(basis.iter().map(|(_, o)| o.clone()));
    let m = full.len();
    let gram = Array2::from_shape_fn((m, m), |(i, j)| {
        trace_product(&full[i].adjoint(), &full[j]).expect("shared space")
    });
    let lu = to_nalgebra(&gram).lu();
    let n = basis.len();
    let mut matrix = Array2::zeros((n, n));
    let mut constant = Array1::zeros(n);
    for (k, (_, o)) in basis.iter().enumerate() {
        let x = adjoint_action(&h, &jumps, o)?;
        let rhs =
            na::DVector::from_fn(m, |i, _| trace_product(&full[i].adjoint(), &x).expect("shared space"));
        let c = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
        let mut recon = OperatorMatrix::zeros(space);
        for (i, b) in full.iter().enumerate() {
            recon += &(b * c[i]);
        }
        let miss = recon.max_diff(&x);
        if miss > 1e-10 * x.max_abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "moment basis does not close under the generator (residual {miss:e})"
            )));
        }
        constant[k] = c[0];
        for j in 0..n {
            matrix[[k, j]] = c[j + 1];
        }
    }
    let names = basis.iter().map(|(s, _)| s.clone()).collect();
    AffineGenerator::new(names, matrix, constant)
}
