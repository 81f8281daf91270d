//! Drive envelopes and their cavity-filtered counterparts.
//!
//! The filtered drive is `F(t) = ∫₀^t e^{−λ(t−s)} f(s) ds` with
//! `λ = κ/(2 t_c)`. Drives vanish for `t < 0`, except the constant envelope,
//! which is taken to be on for all time.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use statrs::function::erf::erfc;

use crate::dynamics::{integrate, IntegratorConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseEnvelope {
    Constant {
        amp: f64,
    },
    /// Nonzero on the closed interval `[center − halfwidth, center + halfwidth]`.
    Boxcar {
        center: f64,
        halfwidth: f64,
        amp: f64,
    },
    Gaussian {
        amp: f64,
        center: f64,
        width: f64,
    },
}

impl PulseEnvelope {
    pub fn constant(amp: f64) -> Result<Self> {
        let env = PulseEnvelope::Constant { amp };
        env.validate()?;
        Ok(env)
    }

    pub fn boxcar(center: f64, halfwidth: f64, amp: f64) -> Result<Self> {
        let env = PulseEnvelope::Boxcar { center, halfwidth, amp };
        env.validate()?;
        Ok(env)
    }

    pub fn gaussian(amp: f64, center: f64, width: f64) -> Result<Self> {
        let env = PulseEnvelope::Gaussian { amp, center, width };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let (amp, width, other) = match *self {
            PulseEnvelope::Constant { amp } => (amp, 1.0, 0.0),
            PulseEnvelope::Boxcar { center, halfwidth, amp } => (amp, halfwidth, center),
            PulseEnvelope::Gaussian { amp, center, width } => (amp, width, center),
        };
        if !(amp >= 0.0 && amp.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse amplitude {amp}")));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse width {width}")));
        }
        if !other.is_finite() {
            return Err(Error::InvalidParameter(format!("pulse center {other}")));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            PulseEnvelope::Constant { amp }
            | PulseEnvelope::Boxcar { amp, .. }
            | PulseEnvelope::Gaussian { amp, .. } => amp,
        }
    }

    /// Pointwise value, ignoring causality.
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            PulseEnvelope::Constant { amp } => amp,
            PulseEnvelope::Boxcar { center, halfwidth, amp } => {
                if (t - center).abs() <= halfwidth {
                    amp
                } else {
                    0.0
                }
            }
            PulseEnvelope::Gaussian { amp, center, width } => {
                amp * (-(t - center).powi(2) / (2.0 * width * width)).exp()
            }
        }
    }

    /// The drive actually applied: zero before `t = 0` unless constant.
    pub fn drive(&self, t: f64) -> f64 {
        match self {
            PulseEnvelope::Constant { .. } => self.eval(t),
            _ if t < 0.0 => 0.0,
            _ => self.eval(t),
        }
    }

    /// Times where the drive is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            PulseEnvelope::Constant { .. } => Vec::new(),
            PulseEnvelope::Boxcar { center, halfwidth, .. } => {
                let mut v = vec![0.0];
                v.extend([center - halfwidth, center + halfwidth].into_iter().filter(|&b| b > 0.0));
                v
            }
            PulseEnvelope::Gaussian { .. } => vec![0.0],
        }
    }
}

/// Closed-form filtered drive for one envelope and filter rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilteredDrive {
    env: PulseEnvelope,
    lambda: C64,
}

impl FilteredDrive {
    /// Filter with rate `κ/(2 t_c)`.
    pub fn new(env: PulseEnvelope, t_c: C64, kappa: f64) -> Result<Self> {
        env.validate()?;
        if !(kappa > 0.0) || t_c.norm() == 0.0 {
            return Err(Error::InvalidParameter(format!("filter needs κ > 0 and t_c ≠ 0 (κ = {kappa})")));
        }
        let lambda = C64::new(kappa / 2.0, 0.0) / t_c;
        if lambda.re <= 0.0 {
            return Err(Error::InvalidParameter("filter rate must have positive real part".into()));
        }
        if matches!(env, PulseEnvelope::Gaussian { .. }) && lambda.im.abs() > 1e-15 * lambda.re {
            return Err(Error::InvalidParameter(
                "closed-form Gaussian filter needs a real susceptibility".into(),
            ));
        }
        Ok(Self { env, lambda })
    }

    pub fn envelope(&self) -> &PulseEnvelope {
        &self.env
    }

    pub fn rate(&self) -> C64 {
        self.lambda
    }

    pub fn at(&self, t: f64) -> C64 {
        let l = self.lambda;
        match self.env {
            PulseEnvelope::Constant { amp } => C64::new(amp, 0.0) / l,
            _ if t <= 0.0 => C64::new(0.0, 0.0),
            PulseEnvelope::Boxcar { center, halfwidth, amp } => {
                let t_on = (center - halfwidth).max(0.0);
                let t_off = center + halfwidth;
                if t_off <= 0.0 || t < t_on {
                    return C64::new(0.0, 0.0);
                }
                let rise = |dt: f64| C64::new(amp, 0.0) / l * (C64::new(1.0, 0.0) - (-l * dt).exp());
                if t <= t_off {
                    rise(t - t_on)
                } else {
                    rise(t_off - t_on) * (-l * (t - t_off)).exp()
                }
            }
            PulseEnvelope::Gaussian { amp, center, width } => {
                let lam = l.re;
                let g = |x: f64| gaussian_primitive(lam, center, width, t, x);
                C64::new(amp * (g(t - center) - g(-center)), 0.0)
            }
        }
    }

    pub fn curve(&self, grid: &[f64]) -> Vec<C64> {
        grid.iter().map(|&t| self.at(t)).collect()
    }
}

/// `G(x) = s√(π/2) · exp(−λ(t−τ) + λ²s²/2) · erfc((λs² − x)/(s√2))`, evaluated
/// without overflow; `F = c[G(t−τ) − G(−τ)]`.
fn gaussian_primitive(lam: f64, tau: f64, s: f64, t: f64, x: f64) -> f64 {
    let pre = s * (PI / 2.0).sqrt();
    let z = (lam * s * s - x) / (s * std::f64::consts::SQRT_2);
    if z <= 0.0 {
        pre * erfc(z) * (-lam * (t - tau) + 0.5 * lam * lam * s * s).exp()
    } else {
        // exp(−λ(t−τ) + λ²s²/2 − z²) with the quadratic terms cancelled analytically
        let expo = -lam * (t - tau - x) - x * x / (2.0 * s * s);
        pre * erfcx(z) * expo.exp()
    }
}

/// Scaled complementary error function `e^{z²} erfc(z)` for `z > 0`.
fn erfcx(z: f64) -> f64 {
    if z < 20.0 {
        erfc(z) * (z * z).exp()
    } else {
        let w = 1.0 / (2.0 * z * z);
        let series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)));
        series / (z * PI.sqrt())
    }
}

const FILTER_CFG: IntegratorConfig = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-15, max_step: 0.1 };

/// Filtered drive on a grid by integrating `dF/dt = f(t) − (κ/(2t_c)) F`.
pub fn filtered_drive(env: &PulseEnvelope, t_c: C64, kappa: f64, grid: &[f64]) -> Result<Vec<C64>> {
    env.validate()?;
    if !(kappa > 0.0) || t_c.norm() == 0.0 {
        return Err(Error::InvalidParameter(format!("filter needs κ > 0 and t_c ≠ 0 (κ = {kappa})")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::UnorderedGrid);
    }
    let lambda = C64::new(kappa / 2.0, 0.0) / t_c;
    let f0 = match env {
        PulseEnvelope::Constant { amp } => C64::new(*amp, 0.0) / lambda,
        _ => C64::new(0.0, 0.0),
    };
    let t0 = match env {
        PulseEnvelope::Constant { .. } => grid.first().copied().unwrap_or(0.0).min(0.0),
        _ => 0.0,
    };
    let mut out: Vec<C64> = grid.iter().take_while(|&&t| t < t0).map(|_| f0).collect();
    let rest = &grid[out.len()..];
    let env = *env;
    integrate(
        |t, y, mut dy| {
            dy[0] = C64::new(env.drive(t), 0.0) - lambda * y[0];
            Ok(())
        },
        Array1::from_elem(1, f0),
        t0,
        rest,
        &env.breakpoints(),
        &FILTER_CFG,
        |_, _, y| {
            out.push(y[0]);
            Ok(())
        },
    )?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::linspace;

    #[test]
    fn envelope_values() {
        let v = PulseEnvelope::boxcar(55.0, 10.0, 1.0).unwrap();
        assert_eq!(v.eval(55.0), 1.0);
        assert_eq!(v.eval(45.0), 1.0);
        assert_eq!(v.eval(65.0), 1.0);
        assert_eq!(v.eval(70.0), 0.0);
        let g = PulseEnvelope::gaussian(0.75, 42.0, 12.0).unwrap();
        assert_eq!(g.eval(42.0), 0.75);
        assert!(PulseEnvelope::gaussian(1.0, 0.0, 0.0).is_err());
        assert!(PulseEnvelope::boxcar(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn constant_filter_is_static() {
        let tc = C64::new(1.0, 0.0) / C64::new(1.0, 0.1);
        let env = PulseEnvelope::constant(0.3).unwrap();
        let want = tc * 2.0 * 0.3;
        let ode = filtered_drive(&env, tc, 1.0, &linspace(0.0, 20.0, 11)).unwrap();
        for z in ode {
            assert!((z - want).norm() < 1e-12);
        }
        assert!((FilteredDrive::new(env, tc, 1.0).unwrap().at(7.0) - want).norm() < 1e-15);
    }

    #[test]
    fn zero_drive_filters_to_zero() {
        let env = PulseEnvelope::boxcar(10.0, 2.0, 0.0).unwrap();
        let f = filtered_drive(&env, C64::new(1.0, 0.0), 1.0, &linspace(0.0, 20.0, 21)).unwrap();
        assert!(f.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn gaussian_closed_form_matches_ode() {
        for (c, tau, s) in [(0.75, 42.0, 12.0), (0.75, 47.5, 4.0), (1.0, 3.0, 0.5)] {
            let env = PulseEnvelope::gaussian(c, tau, s).unwrap();
            let grid = linspace(0.0, 100.0, 401);
            let ode = filtered_drive(&env, C64::new(1.0, 0.0), 1.0, &grid).unwrap();
            let cf = FilteredDrive::new(env, C64::new(1.0, 0.0), 1.0).unwrap().curve(&grid);
            for (a, b) in ode.iter().zip(&cf) {
                assert!((a - b).norm() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn erfcx_branches_agree() {
        let direct = erfc(20.0) * 400f64.exp();
        assert!((direct - erfcx(20.0)).abs() / direct < 1e-10);
    }
}
