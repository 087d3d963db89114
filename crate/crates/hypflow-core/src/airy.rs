//! Airy function Ai and its derivative on the complex plane (|z| ≤ 40), the
//! vector Airy fundamental matrix 𝐙(τ;t) and the e_Ai growth envelope.
//!
//! Small arguments use the Maclaurin series with compensated summation, large
//! ones the Poincaré expansion (rotated into the principal sector with the
//! connection formula). Where the series would cancel badly at moderate |z|
//! the value is continued along a ray by Taylor stepping of y'' = z y.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{HypError, Result};
use crate::linalg::{c, C64, CMat};

pub const AI0: f64 = 0.355_028_053_887_817_239_26;
pub const AIP0: f64 = -0.258_819_403_792_806_798_41;
pub const MAX_ABS_Z: f64 = 40.0;

const ASYMPTOTIC_RADIUS: f64 = 8.0;
/// Tolerated cancellation of the series, in e-folds.
const SERIES_LOSS: f64 = 8.0;

pub fn j() -> C64 {
    C64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// The constant Wronskian (−√3 + i)/(4π).
pub fn wronskian_exact() -> C64 {
    C64::new(-(3f64).sqrt(), 1.0) / (4.0 * PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AiryMethod {
    Series,
    Asymptotic,
    OdeContinuation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AiryValue {
    pub z: C64,
    pub ai: C64,
    pub aip: C64,
    pub method: AiryMethod,
}

/// Neumaier-compensated complex accumulator.
#[derive(Default, Clone, Copy)]
struct Acc {
    s: C64,
    comp: C64,
}

impl Acc {
    fn add(&mut self, v: C64) {
        self.s.re = two_sum(self.s.re, v.re, &mut self.comp.re);
        self.s.im = two_sum(self.s.im, v.im, &mut self.comp.im);
    }
    fn value(&self) -> C64 {
        self.s + self.comp
    }
}

fn two_sum(s: f64, v: f64, comp: &mut f64) -> f64 {
    let t = s + v;
    if s.abs() >= v.abs() {
        *comp += (s - t) + v;
    } else {
        *comp += (v - t) + s;
    }
    t
}

fn series(z: C64) -> (C64, C64) {
    let z3 = z * z * z;
    let (mut f, mut g, mut fp, mut gp) = (Acc::default(), Acc::default(), Acc::default(), Acc::default());
    let mut tf = c(1.0);
    let mut tg = z;
    let mut tfp = z * z * 0.5;
    let mut tgp = c(1.0);
    f.add(tf);
    g.add(tg);
    fp.add(tfp);
    gp.add(tgp);
    for k in 1..400usize {
        let k3 = 3.0 * k as f64;
        tf = tf * z3 / ((k3 - 1.0) * k3);
        tg = tg * z3 / (k3 * (k3 + 1.0));
        tgp = tgp * z3 / ((k3 - 2.0) * k3);
        if k >= 2 {
            tfp = tfp * z3 / ((k3 - 3.0) * (k3 - 1.0));
            fp.add(tfp);
        }
        f.add(tf);
        g.add(tg);
        gp.add(tgp);
        let scale = f.value().norm() + g.value().norm() + fp.value().norm() + gp.value().norm();
        let last = tf.norm() + tg.norm() + tfp.norm() + tgp.norm();
        if k >= 80 && last <= 1e-18 * scale {
            break;
        }
    }
    let ai = f.value() * AI0 + g.value() * AIP0;
    let aip = fp.value() * AI0 + gp.value() * AIP0;
    (ai, aip)
}

/// Poincaré expansion, valid for |arg z| ≤ 2π/3 and large |z|.
fn asymptotic(z: C64) -> (C64, C64) {
    let zeta = z.powf(1.5) * (2.0 / 3.0);
    let z14 = z.powf(0.25);
    let pre = (-zeta).exp() / (2.0 * PI.sqrt());
    let mut u = 1.0;
    let mut su = Acc::default();
    let mut sv = Acc::default();
    su.add(c(1.0));
    sv.add(c(1.0));
    let mut zk = c(1.0);
    let mut prev = f64::INFINITY;
    for k in 1..60usize {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        zk = zk * (-zeta).inv();
        let term = zk * u;
        if term.norm() > prev || term.norm() < 1e-17 {
            break;
        }
        prev = term.norm();
        su.add(term);
        sv.add(zk * v);
    }
    (pre / z14 * su.value(), -pre * z14 * sv.value())
}

fn in_asymptotic_sector(z: C64) -> bool {
    z.arg().abs() <= 2.0 * PI / 3.0 + 1e-12
}

fn asymptotic_any(z: C64) -> (C64, C64) {
    if in_asymptotic_sector(z) {
        return asymptotic(z);
    }
    let jj = j();
    let j2 = jj * jj;
    let (a1, d1) = asymptotic(jj * z);
    let (a2, d2) = asymptotic(j2 * z);
    (-jj * a1 - j2 * a2, -j2 * d1 - jj * d2)
}

/// Taylor step of y'' = z y from z0 by w, given (y, y').
fn taylor_step(z0: C64, w: C64, y: C64, yp: C64) -> (C64, C64) {
    let mut a = [c(0.0); 3]; // a_{n-1}, a_n, a_{n+1}
    a[1] = y;
    a[2] = yp;
    let mut val = Acc::default();
    let mut der = Acc::default();
    val.add(y);
    val.add(yp * w);
    der.add(yp);
    let mut wn = w; // w^n for the current a_{n+1}
    let mut quiet = 0;
    for n in 0..200usize {
        // a_{n+2} = (z0 a_n + a_{n-1}) / ((n+2)(n+1))
        let nf = n as f64;
        let next = (z0 * a[1] + a[0]) / ((nf + 2.0) * (nf + 1.0));
        der.add(next * wn * (nf + 2.0));
        wn *= w;
        let term = next * wn;
        val.add(term);
        a = [a[1], a[2], next];
        if term.norm() <= 1e-18 * val.value().norm().max(1e-300) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    (val.value(), der.value())
}

fn continue_along_ray(z_start: C64, y: C64, yp: C64, z_end: C64) -> (C64, C64) {
    let dist = (z_end - z_start).norm();
    let steps = ((dist / 0.25).ceil() as usize).max(1);
    let w = (z_end - z_start) / steps as f64;
    let (mut y, mut yp) = (y, yp);
    let mut z0 = z_start;
    for _ in 0..steps {
        let (a, b) = taylor_step(z0, w, y, yp);
        y = a;
        yp = b;
        z0 += w;
    }
    (y, yp)
}

/// Estimated cancellation (in e-folds) of the Maclaurin series at z.
pub fn series_loss(z: C64) -> f64 {
    let r = z.norm();
    (2.0 / 3.0) * r.powf(1.5) * (1.0 + (1.5 * z.arg().abs()).cos())
}

pub fn airy_ai(z: C64) -> Result<AiryValue> {
    if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > MAX_ABS_Z {
        return Err(HypError::Domain(format!(
            "Airy argument {z} outside |z| ≤ {MAX_ABS_Z}"
        )));
    }
    let r = z.norm();
    let (ai, aip, method) = if r >= ASYMPTOTIC_RADIUS {
        let (a, b) = asymptotic_any(z);
        (a, b, AiryMethod::Asymptotic)
    } else if series_loss(z) <= SERIES_LOSS {
        let (a, b) = series(z);
        (a, b, AiryMethod::Series)
    } else if z.arg().abs() <= PI / 3.0 {
        // decaying direction: integrate inward from the asymptotic regime
        let zs = z / r * ASYMPTOTIC_RADIUS;
        let (a, b) = asymptotic_any(zs);
        let (a, b) = continue_along_ray(zs, a, b, z);
        (a, b, AiryMethod::OdeContinuation)
    } else {
        let zs = z / r * 3.0;
        let (a, b) = series(zs);
        let (a, b) = continue_along_ray(zs, a, b, z);
        (a, b, AiryMethod::OdeContinuation)
    };
    Ok(AiryValue { z, ai, aip, method })
}

pub fn ai_real(t: f64) -> Result<AiryValue> {
    airy_ai(c(t))
}

/// W(τ) = Ai(jτ)Ai'(τ) − j Ai'(jτ)Ai(τ).
pub fn wronskian(tau: f64) -> Result<C64> {
    let jj = j();
    let a = airy_ai(c(tau))?;
    let b = airy_ai(jj * tau)?;
    Ok(b.ai * a.aip - jj * b.aip * a.ai)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorAiry {
    pub tau: f64,
    pub t: f64,
    pub z: CMat,
}

/// Fundamental matrix of 𝐙' + [[0,1],[t,0]]𝐙 = 0 with 𝐙(τ;τ) = I.
pub fn vector_airy(tau: f64, t: f64) -> Result<VectorAiry> {
    let jj = j();
    let at = airy_ai(c(tau))?;
    let ajt = airy_ai(jj * tau)?;
    let a = airy_ai(c(t))?;
    let aj = airy_ai(jj * t)?;
    let w = ajt.ai * at.aip - jj * ajt.aip * at.ai;
    let z = CMat::from_row_slice(
        2,
        2,
        &[
            (-jj * ajt.aip * a.ai + at.aip * aj.ai) / w,
            (-ajt.ai * a.ai + at.ai * aj.ai) / w,
            (jj * ajt.aip * a.aip - jj * at.aip * aj.aip) / w,
            (ajt.ai * a.aip - jj * at.ai * aj.aip) / w,
        ],
    );
    Ok(VectorAiry { tau, t, z })
}

/// e_Ai(τ;t) = exp(2/3 (t₊^{3/2} − τ₊^{3/2})).
pub fn airy_envelope(tau: f64, t: f64) -> f64 {
    ((2.0 / 3.0) * (t.max(0.0).powf(1.5) - tau.max(0.0).powf(1.5))).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct AiryBoundsReport {
    /// Smallest C with |𝐙(τ;t)| ≤ C (1+|τ|)^{1/4}(1+|t|)^{1/4} e_Ai(τ;t) on the grid.
    pub upper_c: f64,
    /// Largest c with |𝐙(0;t)₁₂| ≥ c e_Ai(0;t) on the grid.
    pub lower_c: f64,
    /// Smallest C with |Ai(−t)| ≤ C t^{-1/4} for t ≥ 1 on the grid.
    pub oscillatory_c: f64,
    pub upper_ok: bool,
    pub lower_ok: bool,
    pub samples: usize,
}

pub const UPPER_C_MAX: f64 = 2.0;
pub const LOWER_C_MIN: f64 = 0.05;

pub fn verify_airy_bounds(t_grid: &[f64]) -> Result<AiryBoundsReport> {
    let mut upper: f64 = 0.0;
    let mut lower = f64::INFINITY;
    let mut osc: f64 = 0.0;
    let mut samples = 0;
    for (i, &t) in t_grid.iter().enumerate() {
        if t < 0.0 {
            continue;
        }
        for &tau in &t_grid[..=i] {
            if tau < 0.0 {
                continue;
            }
            let z = vector_airy(tau, t)?.z;
            let norm = crate::linalg::op_norm(&z);
            let bound = (1.0 + tau.abs()).powf(0.25) * (1.0 + t.abs()).powf(0.25) * airy_envelope(tau, t);
            upper = upper.max(norm / bound);
            samples += 1;
        }
        let z0 = vector_airy(0.0, t)?.z;
        lower = lower.min(z0[(0, 1)].norm() / airy_envelope(0.0, t));
        if t >= 1.0 {
            osc = osc.max(ai_real(-t)?.ai.norm() * t.powf(0.25));
        }
    }
    Ok(AiryBoundsReport {
        upper_c: upper,
        lower_c: lower,
        oscillatory_c: osc,
        upper_ok: upper <= UPPER_C_MAX,
        lower_ok: lower >= LOWER_C_MIN,
        samples,
    })
}
