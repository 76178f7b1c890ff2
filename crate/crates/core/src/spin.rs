//! Spin coherent-state algebra.
//!
//! States are the non-normalized `|z> = exp(z J+) |-j>`, expanded in the
//! `J_z` basis with coefficients `sqrt(C(2j, j+m)) z^(j+m)`. Basis vectors are
//! indexed by `k = j + m`, so index 0 is `m = -j`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Below this modulus `1 + z*zbar` is treated as a pole of the metric.
pub const POLE_TOLERANCE: f64 = 1e-13;

/// Above this spin the coefficients are evaluated in log space.
const LOG_SPACE_SPIN: f64 = 500.0;

/// Largest `2j` for which overlaps use exact integer powers.
const INTEGER_POWER_MAX: u32 = 64;

/// Spin quantum number `j` together with `hbar = 1/j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinContext {
    two_j: u32,
}

impl SpinContext {
    pub fn from_two_j(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(Self { two_j })
    }

    /// Accepts any `j >= 1/2` with `2j` integral to within 1e-9.
    pub fn from_j(j: f64) -> Result<Self> {
        let two_j = 2.0 * j;
        let rounded = two_j.round();
        if !two_j.is_finite() || (two_j - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::InvalidSpin(two_j));
        }
        Self::from_two_j(rounded as u32)
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn hbar(&self) -> f64 {
        2.0 / self.two_j as f64
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// `mu = j (j - 1/2)`, the coefficient of the `J_z^2` symbol.
    pub fn mu(&self) -> f64 {
        let j = self.j();
        j * (j - 0.5)
    }

    pub fn is_integer_spin(&self) -> bool {
        self.two_j.is_multiple_of(2)
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m_of(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }
}

/// A point of complexified phase space; `zbar` is independent of `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub z: C64,
    pub zbar: C64,
}

impl PhasePoint {
    pub fn new(z: C64, zbar: C64) -> Self {
        Self { z, zbar }
    }

    /// The real slice `zbar = conj(z)`.
    pub fn on_sphere(z: C64) -> Self {
        Self { z, zbar: z.conj() }
    }

    pub fn one_plus_product(&self) -> C64 {
        1.0 + self.z * self.zbar
    }

    pub(crate) fn checked_one_plus_product(&self) -> Result<C64> {
        let s = self.one_plus_product();
        if s.norm() < POLE_TOLERANCE {
            return Err(Error::Pole {
                z: self.z,
                zbar: self.zbar,
                value: s,
            });
        }
        Ok(s)
    }
}

/// Physical time `t` and its dimensionless counterpart `tau = hbar nu t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTime {
    pub tau: f64,
    pub t: f64,
}

impl ScaledTime {
    pub fn from_tau(tau: f64, nu: f64, ctx: &SpinContext) -> Self {
        Self {
            tau,
            t: tau / (ctx.hbar() * nu),
        }
    }

    pub fn from_physical(t: f64, nu: f64, ctx: &SpinContext) -> Self {
        Self {
            tau: ctx.hbar() * nu * t,
            t,
        }
    }
}

/// `ln C(2j, k)` for `k = 0..=2j`.
pub fn ln_binomials(ctx: &SpinContext) -> Vec<f64> {
    let n = ctx.two_j() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n {
        acc += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        out.push(acc);
    }
    out
}

/// `<z_f|z_i> = (1 + zbar_f z_i)^(2j)`.
///
/// Exact integer powers for `2j <= 64`; otherwise `exp(2j Log(.))` with the
/// principal logarithm, which is single valued here because `2j` is integral.
pub fn overlap(zbar_f: C64, z_i: C64, ctx: &SpinContext) -> C64 {
    let base = 1.0 + zbar_f * z_i;
    if ctx.two_j() <= INTEGER_POWER_MAX {
        return base.powu(ctx.two_j());
    }
    if base == C64::new(0.0, 0.0) {
        return base;
    }
    (ctx.two_j() as f64 * base.ln()).exp()
}

/// Principal `2j Log(1 + zbar_f z_i)`.
pub fn log_overlap(zbar_f: C64, z_i: C64, ctx: &SpinContext) -> Result<C64> {
    let p = PhasePoint::new(z_i, zbar_f);
    let base = p.checked_one_plus_product()?;
    Ok(ctx.two_j() as f64 * base.ln())
}

/// Kähler metric `g = 2j / (1 + z zbar)^2`.
pub fn metric(p: PhasePoint, ctx: &SpinContext) -> Result<C64> {
    let s = p.checked_one_plus_product()?;
    Ok(ctx.two_j() as f64 / (s * s))
}

/// Expansion coefficients `sqrt(C(2j, j+m)) z^(j+m)`, index 0 is `m = -j`.
pub fn coherent_coefficients(z: C64, ctx: &SpinContext) -> Vec<C64> {
    let n = ctx.two_j() as usize;
    if ctx.j() > LOG_SPACE_SPIN {
        let lnb = ln_binomials(ctx);
        if z == C64::new(0.0, 0.0) {
            let mut out = vec![C64::new(0.0, 0.0); n + 1];
            out[0] = C64::new(1.0, 0.0);
            return out;
        }
        let lz = z.ln();
        return (0..=n)
            .map(|k| (0.5 * lnb[k] + k as f64 * lz).exp())
            .collect();
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut c = C64::new(1.0, 0.0);
    out.push(c);
    for k in 0..n {
        c *= z * (((n - k) as f64) / ((k + 1) as f64)).sqrt();
        out.push(c);
    }
    out
}

/// Coefficients of the normalized state `|z> / (1 + |z|^2)^j`, always in log space.
pub fn normalized_coefficients(z: C64, ctx: &SpinContext) -> Vec<C64> {
    let n = ctx.two_j() as usize;
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    let r2 = z.norm_sqr();
    if r2 == 0.0 {
        out[0] = C64::new(1.0, 0.0);
        return out;
    }
    let lnb = ln_binomials(ctx);
    let ln_r = 0.5 * r2.ln();
    let ln_norm = ctx.j() * r2.ln_1p();
    let arg = z.arg();
    for (k, c) in out.iter_mut().enumerate() {
        let kf = k as f64;
        *c = C64::from_polar((0.5 * lnb[k] + kf * ln_r - ln_norm).exp(), kf * arg);
    }
    out
}

/// Value, first and second `z`-derivatives of the coefficient vector, each
/// multiplied by `exp(-log_scale)`.
#[derive(Debug, Clone)]
pub struct CoefficientJet {
    pub value: Vec<C64>,
    pub d1: Vec<C64>,
    pub d2: Vec<C64>,
}

impl CoefficientJet {
    pub fn new(z: C64, log_scale: C64, ctx: &SpinContext, lnb: &[f64]) -> Self {
        let n = ctx.two_j() as usize;
        let zero = C64::new(0.0, 0.0);
        let mut value = vec![zero; n + 1];
        let mut d1 = vec![zero; n + 1];
        let mut d2 = vec![zero; n + 1];
        if z == zero {
            let s = (-log_scale).exp();
            value[0] = s;
            if n >= 1 {
                d1[1] = s * lnb[1].exp().sqrt();
            }
            if n >= 2 {
                d2[2] = s * 2.0 * lnb[2].exp().sqrt();
            }
            return Self { value, d1, d2 };
        }
        let lz = z.ln();
        for k in 0..=n {
            let kf = k as f64;
            let base = 0.5 * lnb[k] - log_scale;
            value[k] = (base + kf * lz).exp();
            if k >= 1 {
                d1[k] = kf * (base + (kf - 1.0) * lz).exp();
            }
            if k >= 2 {
                d2[k] = kf * (kf - 1.0) * (base + (kf - 2.0) * lz).exp();
            }
        }
        Self { value, d1, d2 }
    }
}

/// Stereographic coordinate `z = e^{i phi} tan(theta/2)`.
pub fn stereographic(theta: f64, phi: f64) -> Result<C64> {
    if !(0.0..std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "polar angle {theta} outside [0, pi); theta = pi is the point at infinity"
        )));
    }
    Ok(C64::from_polar((0.5 * theta).tan(), phi))
}

/// `ln[(1 + |z_i|^2)^j (1 + |z_f|^2)^j]`.
pub fn log_normalization(z_i: C64, z_f: C64, ctx: &SpinContext) -> f64 {
    ctx.j() * (z_i.norm_sqr().ln_1p() + z_f.norm_sqr().ln_1p())
}

/// Divides a raw propagator value by `(1 + |z_i|^2)^j (1 + |z_f|^2)^j`.
pub fn normalized(value: C64, z_i: C64, z_f: C64, ctx: &SpinContext) -> C64 {
    value * (-log_normalization(z_i, z_f, ctx)).exp()
}
