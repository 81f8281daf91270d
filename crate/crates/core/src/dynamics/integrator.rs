//! Dormand–Prince 5(4) integrator for complex state vectors.
//!
//! Steps are clipped so that every output time and every registered
//! breakpoint is hit exactly. Between two breakpoints the right-hand side is
//! only ever sampled strictly inside the open interval, so a boxcar that is
//! inclusive at its edges is seen from the correct side on each segment.

use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerances and step cap of the adaptive integrator. Times are in units of
/// `1/κ` throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_step: 0.1 }
    }
}

impl IntegratorConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_step: f64) -> Result<Self> {
        let cfg = Self { rel_tol, abs_tol, max_step };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-13 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("rel_tol {} below 1e-13", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("abs_tol {}", self.abs_tol)));
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(Error::InvalidParameter(format!("max_step {}", self.max_step)));
        }
        Ok(())
    }
}

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 20_000_000;

/// Statistics of one integration run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `dy/dt = rhs(t, y)` from `t0`, calling `on_output(k, t, y)` at
/// every `outputs[k]`. Outputs must be ascending and not before `t0`.
pub(crate) fn integrate<F, O>(
    mut rhs: F,
    y0: Array1<C64>,
    t0: f64,
    outputs: &[f64],
    breakpoints: &[f64],
    cfg: &IntegratorConfig,
    mut on_output: O,
) -> Result<StepStats>
where
    F: FnMut(f64, ArrayView1<C64>, ArrayViewMut1<C64>) -> Result<()>,
    O: FnMut(usize, f64, &Array1<C64>) -> Result<()>,
{
    cfg.validate()?;
    if outputs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::UnorderedGrid);
    }
    if outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::UnorderedGrid);
    }
    let mut stats = StepStats::default();
    let Some(&t_end) = outputs.last() else {
        return Ok(stats);
    };

    // segment boundaries: t0, breakpoints strictly inside, t_end
    let mut bounds = vec![t0];
    let mut inner: Vec<f64> = breakpoints.iter().cloned().filter(|&b| b > t0 && b < t_end).collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    inner.dedup();
    bounds.extend(inner);
    bounds.push(t_end);

    let n = y0.len();
    let mut y = y0;
    let mut out_idx = 0;
    while out_idx < outputs.len() && outputs[out_idx] <= t0 {
        on_output(out_idx, outputs[out_idx], &y)?;
        out_idx += 1;
    }
    if out_idx == outputs.len() {
        return Ok(stats);
    }

    let mut k = vec![Array1::<C64>::zeros(n); 7];
    let mut ytmp = Array1::<C64>::zeros(n);
    let mut ynew = Array1::<C64>::zeros(n);
    let mut h_prop: Option<f64> = None;

    for seg in bounds.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let guard = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let sample = |t: f64| {
            if hi - lo > 4.0 * guard {
                t.clamp(lo + guard, hi - guard)
            } else {
                0.5 * (lo + hi)
            }
        };
        let mut t = lo;
        rhs(sample(t), y.view(), k[0].view_mut())?;
        let mut h = match h_prop {
            Some(h) => h,
            None => initial_step(&mut rhs, &y, &k[0], t, sample, cfg)?,
        }
        .min(cfg.max_step);

        while t < hi {
            let next_out = if out_idx < outputs.len() { outputs[out_idx] } else { hi };
            let stop = next_out.min(hi);
            let remaining = stop - t;
            let clipped = h >= remaining;
            let h_step = if clipped { remaining } else { h };
            if h_step < 1e-14 * t.abs().max(1.0) && !clipped {
                return Err(Error::StepSizeUnderflow { t });
            }

            stage(&mut ytmp, &y, h_step, &[(A21, &k[0])]);
            rhs(sample(t + C2 * h_step), ytmp.view(), k[1].view_mut())?;
            stage(&mut ytmp, &y, h_step, &[(A31, &k[0]), (A32, &k[1])]);
            rhs(sample(t + C3 * h_step), ytmp.view(), k[2].view_mut())?;
            stage(&mut ytmp, &y, h_step, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
            rhs(sample(t + C4 * h_step), ytmp.view(), k[3].view_mut())?;
            stage(&mut ytmp, &y, h_step, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
            rhs(sample(t + C5 * h_step), ytmp.view(), k[4].view_mut())?;
            stage(
                &mut ytmp,
                &y,
                h_step,
                &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])],
            );
            rhs(sample(t + h_step), ytmp.view(), k[5].view_mut())?;
            stage(&mut ynew, &y, h_step, &[(B1, &k[0]), (B3, &k[2]), (B4, &k[3]), (B5, &k[4]), (B6, &k[5])]);
            let t_new = if clipped { stop } else { t + h_step };
            rhs(sample(t_new), ynew.view(), k[6].view_mut())?;

            let err = error_norm(&y, &ynew, &k, h_step, cfg);
            if !err.is_finite() {
                return Err(Error::StepSizeUnderflow { t });
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = t_new;
                std::mem::swap(&mut y, &mut ynew);
                k.swap(0, 6);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a step shortened to land on a stop does not shrink the next one
                let base = if clipped { h.max(h_step) } else { h_step };
                h = (base * factor).min(cfg.max_step);
                while out_idx < outputs.len() && outputs[out_idx] <= t {
                    on_output(out_idx, outputs[out_idx], &y)?;
                    out_idx += 1;
                }
            } else {
                stats.rejected += 1;
                h = h_step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
            if stats.accepted + stats.rejected > MAX_STEPS {
                return Err(Error::StepSizeUnderflow { t });
            }
        }
        h_prop = Some(h);
    }
    Ok(stats)
}

fn stage(out: &mut Array1<C64>, y: &Array1<C64>, h: f64, terms: &[(f64, &Array1<C64>)]) {
    out.assign(y);
    for &(a, k) in terms {
        out.scaled_add(C64::new(a * h, 0.0), k);
    }
}

fn error_norm(y: &Array1<C64>, ynew: &Array1<C64>, k: &[Array1<C64>], h: f64, cfg: &IntegratorConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
        let sre = cfg.abs_tol + cfg.rel_tol * y[i].re.abs().max(ynew[i].re.abs());
        let sim = cfg.abs_tol + cfg.rel_tol * y[i].im.abs().max(ynew[i].im.abs());
        acc += (e.re / sre).powi(2) + (e.im / sim).powi(2);
    }
    (acc / (2 * y.len()).max(1) as f64).sqrt()
}

fn initial_step<F, S>(
    rhs: &mut F,
    y: &Array1<C64>,
    f0: &Array1<C64>,
    t: f64,
    sample: S,
    cfg: &IntegratorConfig,
) -> Result<f64>
where
    F: FnMut(f64, ArrayView1<C64>, ArrayViewMut1<C64>) -> Result<()>,
    S: Fn(f64) -> f64,
{
    let scaled = |v: &Array1<C64>| {
        let mut acc = 0.0;
        for (vi, yi) in v.iter().zip(y.iter()) {
            let sre = cfg.abs_tol + cfg.rel_tol * yi.re.abs();
            let sim = cfg.abs_tol + cfg.rel_tol * yi.im.abs();
            acc += (vi.re / sre).powi(2) + (vi.im / sim).powi(2);
        }
        (acc / (2 * v.len()).max(1) as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let mut y1 = y.clone();
    y1.scaled_add(C64::new(h0, 0.0), f0);
    let mut f1 = Array1::<C64>::zeros(y.len());
    rhs(sample(t + h0), y1.view(), f1.view_mut())?;
    let diff = &f1 - f0;
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(cfg.max_step))
}
