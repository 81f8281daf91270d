use std::fmt;
use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operators::{liouvillian, HilbertSpace, OperatorMatrix, Superoperator, HERMITICITY_TOL};

pub type TimeFn<T> = Arc<dyn Fn(f64) -> T + Send + Sync>;

/// A value that is either fixed or sampled from a function of time.
#[derive(Clone)]
pub enum Schedule<T> {
    Fixed(T),
    Varying(TimeFn<T>),
}

impl<T: Clone> Schedule<T> {
    pub fn varying(f: impl Fn(f64) -> T + Send + Sync + 'static) -> Self {
        Schedule::Varying(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> T {
        match self {
            Schedule::Fixed(v) => v.clone(),
            Schedule::Varying(f) => f(t),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Schedule::Fixed(_))
    }
}

impl<T: fmt::Debug> fmt::Debug for Schedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            Schedule::Varying(_) => f.write_str("Varying(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct JumpTerm {
    pub label: String,
    pub operator: Schedule<OperatorMatrix>,
    pub rate: Schedule<f64>,
}

impl JumpTerm {
    pub fn fixed(label: impl Into<String>, operator: OperatorMatrix, rate: f64) -> Self {
        Self { label: label.into(), operator: Schedule::Fixed(operator), rate: Schedule::Fixed(rate) }
    }
}

/// Hamiltonian plus weighted jump operators on one space.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    space: HilbertSpace,
    hamiltonian: Schedule<OperatorMatrix>,
    jumps: Vec<JumpTerm>,
    breakpoints: Vec<f64>,
}

impl LindbladModel {
    /// Time-independent model.
    pub fn new(hamiltonian: OperatorMatrix, jumps: Vec<(OperatorMatrix, f64)>) -> Result<Self> {
        let space = hamiltonian.space().clone();
        let jumps = jumps
            .into_iter()
            .enumerate()
            .map(|(k, (op, rate))| JumpTerm::fixed(format!("L{k}"), op, rate))
            .collect();
        Self::general(space, Schedule::Fixed(hamiltonian), jumps)
    }

    /// Model with arbitrary schedules. Fixed parts are validated here, varying
    /// parts whenever they are sampled.
    pub fn general(
        space: HilbertSpace,
        hamiltonian: Schedule<OperatorMatrix>,
        jumps: Vec<JumpTerm>,
    ) -> Result<Self> {
        let model = Self { space, hamiltonian, jumps, breakpoints: Vec::new() };
        if let Schedule::Fixed(h) = &model.hamiltonian {
            model.check_hamiltonian(h)?;
        }
        for j in &model.jumps {
            if let Schedule::Fixed(op) = &j.operator {
                model.check_space(op)?;
            }
            if let Schedule::Fixed(r) = j.rate {
                check_rate(r)?;
            }
        }
        Ok(model)
    }

    /// Registers times at which the generator may jump discontinuously.
    pub fn with_breakpoints(mut self, mut bps: Vec<f64>) -> Self {
        self.breakpoints.append(&mut bps);
        self.breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.breakpoints.dedup();
        self
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn jump_terms(&self) -> &[JumpTerm] {
        &self.jumps
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.hamiltonian.is_fixed()
            || self.jumps.iter().any(|j| !j.operator.is_fixed() || !j.rate.is_fixed())
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<OperatorMatrix> {
        let h = self.hamiltonian.at(t);
        self.check_hamiltonian(&h)?;
        Ok(h)
    }

    pub fn jumps_at(&self, t: f64) -> Result<Vec<(OperatorMatrix, f64)>> {
        self.jumps
            .iter()
            .map(|j| {
                let op = j.operator.at(t);
                self.check_space(&op)?;
                let r = j.rate.at(t);
                check_rate(r)?;
                Ok((op, r))
            })
            .collect()
    }

    pub fn liouvillian_at(&self, t: f64) -> Result<Superoperator> {
        liouvillian(&self.hamiltonian_at(t)?, &self.jumps_at(t)?)
    }

    /// Samples the invariants at the given times.
    pub fn validate_at(&self, times: &[f64]) -> Result<()> {
        for &t in times {
            self.hamiltonian_at(t)?;
            self.jumps_at(t)?;
        }
        Ok(())
    }

    pub(crate) fn generator_at(&self, t: f64) -> Result<Generator> {
        Generator::new(&self.hamiltonian_at(t)?, &self.jumps_at(t)?)
    }

    fn check_space(&self, op: &OperatorMatrix) -> Result<()> {
        if op.space() != &self.space {
            return Err(Error::DimensionMismatch { expected: self.space.dim(), found: op.dim() });
        }
        Ok(())
    }

    fn check_hamiltonian(&self, h: &OperatorMatrix) -> Result<()> {
        self.check_space(h)?;
        let err = h.hermiticity_error();
        if err > HERMITICITY_TOL * h.max_abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("Hamiltonian not Hermitian ({err:e})")));
        }
        Ok(())
    }
}

fn check_rate(r: f64) -> Result<()> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::NegativeRate(r));
    }
    Ok(())
}

/// Generator snapshot in product form:
/// `X ↦ −i(K X − X K†) + Σ J X J†` with `K = H − (i/2) Σ r A†A`, `J = √r A`.
pub(crate) struct Generator {
    k: Array2<C64>,
    k_adj: Array2<C64>,
    jumps: Vec<(Array2<C64>, Array2<C64>)>,
    scratch: Array2<C64>,
}

impl Generator {
    pub(crate) fn new(h: &OperatorMatrix, jumps: &[(OperatorMatrix, f64)]) -> Result<Self> {
        let d = h.dim();
        let mut k = h.elements().clone();
        let mut js = Vec::new();
        for (a, r) in jumps {
            check_rate(*r)?;
            if *r == 0.0 {
                continue;
            }
            let j = a.elements() * C64::new(r.sqrt(), 0.0);
            let j_adj = j.t().mapv(|z| z.conj());
            general_mat_mul(C64::new(0.0, -0.5), &j_adj, &j, C64::new(1.0, 0.0), &mut k);
            js.push((j, j_adj));
        }
        let k_adj = k.t().mapv(|z| z.conj());
        Ok(Self { k, k_adj, jumps: js, scratch: Array2::zeros((d, d)) })
    }

    pub(crate) fn apply(&mut self, x: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        let mi = C64::new(0.0, -1.0);
        let pi = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        general_mat_mul(mi, &self.k, &x, C64::new(0.0, 0.0), &mut out);
        general_mat_mul(pi, &x, &self.k_adj, one, &mut out);
        for (j, j_adj) in &self.jumps {
            general_mat_mul(one, j, &x, C64::new(0.0, 0.0), &mut self.scratch);
            general_mat_mul(one, &self.scratch, j_adj, one, &mut out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_annihilation, unvectorize, vectorize};

    #[test]
    fn product_form_matches_superoperator() {
        let a = build_annihilation(3).unwrap();
        let space = a.space().clone();
        let n = &a.adjoint() * &a;
        let h = &(&n * 0.7) + &(&(&a + &a.adjoint()) * 0.3);
        let jumps = vec![(a.clone(), 1.3), (n.clone(), 0.2)];
        let l = liouvillian(&h, &jumps).unwrap();
        let mut gen = Generator::new(&h, &jumps).unwrap();
        let x =
            Array2::from_shape_fn((4, 4), |(i, j)| C64::new(i as f64 - 0.3 * j as f64, 0.1 * (i * j) as f64));
        let xo = OperatorMatrix::new(space.clone(), x.clone()).unwrap();
        let mut out = Array2::zeros((4, 4));
        gen.apply(x.view(), out.view_mut());
        let want = unvectorize(&space, &l.elements().dot(&vectorize(&xo))).unwrap();
        let diff = (&out - want.elements()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn rejects_non_hermitian_and_negative_rates() {
        let a = build_annihilation(1).unwrap();
        assert!(LindbladModel::new(a.clone(), vec![]).is_err());
        let h = &a.adjoint() * &a;
        assert_eq!(
            LindbladModel::new(h.clone(), vec![(a.clone(), -1.0)]).unwrap_err(),
            Error::NegativeRate(-1.0)
        );
        let space = h.space().clone();
        let m = LindbladModel::general(
            space,
            Schedule::Fixed(h),
            vec![JumpTerm {
                label: "a".into(),
                operator: Schedule::Fixed(a),
                rate: Schedule::varying(|t| 1.0 - t),
            }],
        )
        .unwrap();
        assert!(m.is_time_dependent());
        assert!(m.validate_at(&[0.0, 0.5]).is_ok());
        assert!(m.validate_at(&[2.0]).is_err());
    }
}
