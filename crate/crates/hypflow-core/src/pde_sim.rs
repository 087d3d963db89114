//! Periodic pseudospectral evolution of 1D quasi-linear systems, the Hadamard
//! instability experiment and the free-solution comparison.
//!
//! States are evolved as perturbations w = u − φ of a reference solution in the
//! frame x = x₀ + s·y (s = ε^{1−h} for rescaled runs), so tiny packets are not
//! swamped by round-off in φ.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HypError, Result};
use crate::linalg::{self, c, CMat, RMat, RVec, C64};
use crate::semiclassical::{
    build_wavepacket, fft_forward, fft_inverse, mode_index, op_eps_apply_unchecked, sobolev_norm_physical, Cutoff,
    GridFunction, SymbolSampler, WavePacketSpec,
};
use crate::system_model::{richardson_diff, ReferenceSolution, StateFn, SystemSpec, TimeExtension};

/// Courant bound dt·max|λ(A)|·n/L ≤ CFL (L measured in x).
pub const CFL: f64 = 0.5;

/// ln(1e16): round-off headroom the filter must absorb on top of the predicted growth.
const ROUNDOFF_HEADROOM: f64 = 37.0;

pub const DEFAULT_FILTER: f64 = 36.0;

/// x = x0 + stretch·y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub x0: f64,
    pub stretch: f64,
}

impl Frame {
    pub fn physical() -> Self {
        Frame { x0: 0.0, stretch: 1.0 }
    }

    pub fn rescaled(x0: f64, eps: f64, h: f64) -> Self {
        Frame { x0, stretch: eps.powf(1.0 - h) }
    }

    pub fn x(&self, y: f64) -> f64 {
        self.x0 + self.stretch * y
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    pub n: usize,
    pub lo: f64,
    pub length: f64,
    /// Largest step; smaller steps are taken when speeds grow.
    pub dt: f64,
    pub t_final: f64,
    pub dealias: bool,
    /// Total damping exp(−S κ^p) over the run, κ = |k|/(n/2).
    pub filter_strength: f64,
    pub filter_order: i32,
    pub linf_cap: f64,
    pub tail_cap: f64,
    /// Number of sampling intervals.
    pub samples: usize,
}

impl SolverConfig {
    /// Enforces the CFL bound for the given speed bound in the given frame.
    pub fn new(n: usize, lo: f64, length: f64, t_final: f64, dt: f64, speed: f64, frame: &Frame) -> Result<Self> {
        if !n.is_power_of_two() || n < 8 {
            return Err(HypError::InvalidInput(format!("node count {n} must be a power of two ≥ 8")));
        }
        if !(t_final > 0.0 && dt > 0.0 && length > 0.0) {
            return Err(HypError::InvalidInput("t_final, dt and length must be positive".into()));
        }
        let cfg = SolverConfig {
            n,
            lo,
            length,
            dt,
            t_final,
            dealias: true,
            filter_strength: DEFAULT_FILTER,
            filter_order: 8,
            linf_cap: 1e6,
            tail_cap: 1e-5,
            samples: 400,
        };
        let k = cfg.courant(dt, speed, frame);
        if k > CFL * (1.0 + 1e-12) {
            return Err(HypError::InvalidInput(format!(
                "CFL violated: dt·max|λ|·n/L = {k:.3} > {CFL}; use dt ≤ {:.3e}",
                dt * CFL / k
            )));
        }
        Ok(cfg)
    }

    pub fn courant(&self, dt: f64, speed: f64, frame: &Frame) -> f64 {
        dt * speed * self.n as f64 / (self.length * frame.stretch)
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.samples).map(|i| self.t_final * i as f64 / self.samples as f64).collect()
    }

    fn retained(&self) -> usize {
        if self.dealias {
            self.n / 3
        } else {
            self.n / 2
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", content = "value", rename_all = "kebab-case")]
pub enum BreakdownReason {
    NonFinite,
    LinfCap(f64),
    SpectralTail(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Breakdown {
    pub time: f64,
    pub last_valid_time: f64,
    pub reason: BreakdownReason,
}

/// Fraction of spectral energy in the top third of the retained band.
pub fn tail_fraction(state: &GridFunction, cfg: &SolverConfig) -> f64 {
    let kr = cfg.retained() as i64;
    let lo = 2 * kr / 3;
    let (mut tail, mut total) = (0.0, 0.0);
    for w in state.spectrum() {
        for (k, z) in w.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            let m = mode_index(k, state.n).abs();
            if m > lo {
                tail += e;
            }
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

pub fn breakdown_detector(state: &GridFunction, cfg: &SolverConfig) -> Option<BreakdownReason> {
    if state.comps.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Some(BreakdownReason::NonFinite);
    }
    let sup = state.sup_norm();
    if sup > cfg.linf_cap {
        return Some(BreakdownReason::LinfCap(sup));
    }
    let tail = tail_fraction(state, cfg);
    if tail > cfg.tail_cap {
        return Some(BreakdownReason::SpectralTail(tail));
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<GridFunction>,
    pub breakdown: Option<Breakdown>,
    pub steps: usize,
    pub filter_strength: f64,
    pub frame: Frame,
}

impl Trajectory {
    pub fn last(&self) -> &GridFunction {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Reference values φ and ∂_xφ at the grid nodes.
enum RefField {
    Zero,
    Closed(StateFn),
    Taylor { coef: Vec<[RVec; 3]>, dcoef: Vec<[RVec; 3]> },
    Frozen { p: Vec<RVec>, px: Vec<RVec> },
}

const X_STEP: f64 = 1e-3;

impl RefField {
    fn build(sys: &SystemSpec, phi: Option<&ReferenceSolution>, xs: &[f64]) -> Result<Self> {
        let Some(phi) = phi else { return Ok(RefField::Zero) };
        Ok(match &phi.extension {
            TimeExtension::Given(f) => RefField::Closed(f.clone()),
            TimeExtension::Taylor => {
                let mut coef = Vec::with_capacity(xs.len());
                let mut dcoef = Vec::with_capacity(xs.len());
                for &x in xs {
                    coef.push(phi.taylor(sys, &[x])?);
                    let mut d = Vec::with_capacity(3);
                    for i in 0..3 {
                        d.push(richardson_diff(|s| phi.taylor(sys, &[s]).map(|t| t[i].clone()).unwrap_or_else(|_| RVec::from_element(sys.state_dim, f64::NAN)), x, X_STEP));
                    }
                    if d.iter().any(|v| v.iter().any(|z| !z.is_finite())) {
                        return Err(HypError::Domain(format!("reference not defined near x = {x}")));
                    }
                    dcoef.push([d[0].clone(), d[1].clone(), d[2].clone()]);
                }
                RefField::Taylor { coef, dcoef }
            }
            TimeExtension::None => {
                let p = xs.iter().map(|&x| phi.initial(&[x])).collect();
                let px = xs.iter().map(|&x| richardson_diff(|s| phi.initial(&[s]), x, X_STEP)).collect();
                RefField::Frozen { p, px }
            }
        })
    }

    fn eval(&self, t: f64, j: usize, x: f64, n: usize) -> (RVec, RVec) {
        match self {
            RefField::Zero => (RVec::zeros(n), RVec::zeros(n)),
            RefField::Closed(f) => (f(t, &[x]), richardson_diff(|s| f(t, &[s]), x, X_STEP)),
            RefField::Taylor { coef, dcoef } => {
                let q = 0.5 * t * t;
                let [a, b, cc] = &coef[j];
                let [da, db, dc] = &dcoef[j];
                (a + b * t + cc * q, da + db * t + dc * q)
            }
            RefField::Frozen { p, px } => (p[j].clone(), px[j].clone()),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, RefField::Zero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mode {
    Nonlinear,
    Linearized { zero_order: bool },
}

struct Rhs<'a> {
    sys: &'a SystemSpec,
    field: RefField,
    frame: Frame,
    mode: Mode,
    ys: Vec<f64>,
}

fn real_vec(g: &GridFunction, j: usize) -> RVec {
    RVec::from_iterator(g.dim(), g.comps.iter().map(|v| v[j].re))
}

fn inf_norm(a: &RMat) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl<'a> Rhs<'a> {
    fn coeff(&self, t: f64, j: usize, w: &RVec) -> (RMat, RVec, RVec) {
        let x = self.frame.x(self.ys[j]);
        let (p, px) = self.field.eval(t, j, x, self.sys.state_dim);
        let a = match self.mode {
            Mode::Nonlinear => self.sys.flux(0, t, &[x], (&p + w).as_slice()),
            Mode::Linearized { .. } => self.sys.flux(0, t, &[x], p.as_slice()),
        };
        (a, p, px)
    }

    fn max_speed(&self, t: f64, w: &GridFunction) -> f64 {
        (0..w.n).map(|j| inf_norm(&self.coeff(t, j, &real_vec(w, j)).0)).fold(0.0, f64::max)
    }

    fn eval(&self, t: f64, w: &GridFunction) -> GridFunction {
        let dw = w.derivative();
        let inv = 1.0 / self.frame.stretch;
        let mut out = GridFunction { comps: vec![vec![c(0.0); w.n]; w.dim()], ..w.clone() };
        for j in 0..w.n {
            let x = self.frame.x(self.ys[j]);
            let wj = real_vec(w, j);
            let dj = real_vec(&dw, j) * inv;
            let (a, p, px) = self.coeff(t, j, &wj);
            let mut r = -(&a * &dj);
            match self.mode {
                Mode::Nonlinear => {
                    let u = &p + &wj;
                    if self.field.is_zero() {
                        r += self.sys.source(t, &[x], u.as_slice());
                    } else {
                        let a0 = self.sys.flux(0, t, &[x], p.as_slice());
                        r -= (&a - a0) * &px;
                        r += self.sys.source(t, &[x], u.as_slice()) - self.sys.source(t, &[x], p.as_slice());
                    }
                }
                Mode::Linearized { zero_order } => {
                    if zero_order {
                        r -= self.sys.flux_du(0, t, &[x], p.as_slice(), wj.as_slice()) * &px;
                        r += self.sys.source_du(t, &[x], p.as_slice(), wj.as_slice());
                    }
                }
            }
            for (i, comp) in out.comps.iter_mut().enumerate() {
                comp[j] = c(r[i]);
            }
        }
        out
    }
}

/// Dealiasing truncation and exponential filter; keeps the real part.
fn post_step(w: GridFunction, cfg: &SolverConfig, dt: f64) -> GridFunction {
    let kr = cfg.retained() as i64;
    let half = (cfg.n / 2) as f64;
    let s = cfg.filter_strength * dt / cfg.t_final;
    let comps = w
        .comps
        .into_iter()
        .map(|mut v| {
            fft_forward(&mut v);
            for (k, z) in v.iter_mut().enumerate() {
                let m = mode_index(k, cfg.n).abs();
                if m > kr {
                    *z = c(0.0);
                } else if s > 0.0 {
                    *z *= (-s * (m as f64 / half).powi(cfg.filter_order)).exp();
                }
            }
            fft_inverse(&mut v);
            v.into_iter().map(|z| c(z.re)).collect()
        })
        .collect();
    GridFunction { comps, ..w }
}

fn rk4(rhs: &Rhs, t: f64, w: &GridFunction, dt: f64) -> Result<GridFunction> {
    let k1 = rhs.eval(t, w);
    let k2 = rhs.eval(t + 0.5 * dt, &w.axpy(c(0.5 * dt), &k1)?);
    let k3 = rhs.eval(t + 0.5 * dt, &w.axpy(c(0.5 * dt), &k2)?);
    let k4 = rhs.eval(t + dt, &w.axpy(c(dt), &k3)?);
    w.axpy(c(dt / 6.0), &k1)?
        .axpy(c(dt / 3.0), &k2)?
        .axpy(c(dt / 3.0), &k3)?
        .axpy(c(dt / 6.0), &k4)
}

fn run(rhs: Rhs, w0: &GridFunction, cfg: &SolverConfig) -> Result<Trajectory> {
    if w0.n != cfg.n || (w0.length - cfg.length).abs() > 1e-12 * cfg.length {
        return Err(HypError::InvalidInput("initial state does not live on the configured grid".into()));
    }
    let frame = rhs.frame;
    let w0 = w0.real_part();
    let speed0 = rhs.max_speed(0.0, &w0);
    let k = cfg.courant(cfg.dt, speed0, &frame);
    if k > CFL * (1.0 + 1e-9) {
        return Err(HypError::InvalidInput(format!("initial CFL number {k:.3} exceeds {CFL}")));
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![w0.clone()],
        breakdown: None,
        steps: 0,
        filter_strength: cfg.filter_strength,
        frame,
    };
    if let Some(reason) = breakdown_detector(&w0, cfg) {
        traj.breakdown = Some(Breakdown { time: 0.0, last_valid_time: 0.0, reason });
        return Ok(traj);
    }
    let mut w = w0;
    let mut t = 0.0;
    for &target in &cfg.sample_times()[1..] {
        while t < target * (1.0 - 1e-14) {
            let speed = rhs.max_speed(t, &w);
            let cap = if speed > 0.0 { CFL * cfg.length * frame.stretch / (cfg.n as f64 * speed) } else { f64::INFINITY };
            let dt = cfg.dt.min(cap).min(target - t);
            w = post_step(rk4(&rhs, t, &w, dt)?, cfg, dt);
            t += dt;
            traj.steps += 1;
            if let Some(reason) = breakdown_detector(&w, cfg) {
                traj.breakdown = Some(Breakdown { time: t, last_valid_time: traj.last_time(), reason });
                return Ok(traj);
            }
        }
        t = target;
        traj.times.push(t);
        traj.states.push(w.clone());
    }
    Ok(traj)
}

fn grid_ys(cfg: &SolverConfig) -> Vec<f64> {
    (0..cfg.n).map(|j| cfg.lo + j as f64 * cfg.length / cfg.n as f64).collect()
}

/// Full nonlinear evolution of u in physical coordinates.
pub fn evolve(sys: &SystemSpec, u0: &GridFunction, cfg: &SolverConfig) -> Result<Trajectory> {
    check_evolvable(sys, u0)?;
    let rhs = Rhs { sys, field: RefField::Zero, frame: Frame::physical(), mode: Mode::Nonlinear, ys: grid_ys(cfg) };
    run(rhs, u0, cfg)
}

/// Nonlinear evolution of w = u − φ in the given frame.
pub fn evolve_perturbation(
    sys: &SystemSpec,
    phi: &ReferenceSolution,
    w0: &GridFunction,
    cfg: &SolverConfig,
    frame: Frame,
) -> Result<Trajectory> {
    check_evolvable(sys, w0)?;
    let ys = grid_ys(cfg);
    let xs: Vec<f64> = ys.iter().map(|&y| frame.x(y)).collect();
    let field = RefField::build(sys, Some(phi), &xs)?;
    run(Rhs { sys, field, frame, mode: Mode::Nonlinear, ys }, w0, cfg)
}

/// Linearized evolution ∂_t v + A(φ)∂_x v + Ḃv = 0 in the frame x = x₀ + ε^{1−h}y.
pub fn evolve_linearized(
    sys: &SystemSpec,
    phi: &ReferenceSolution,
    v0: &GridFunction,
    x0: f64,
    eps: f64,
    h: f64,
    cfg: &SolverConfig,
    zero_order: bool,
) -> Result<Trajectory> {
    check_evolvable(sys, v0)?;
    let frame = Frame::rescaled(x0, eps, h);
    let ys = grid_ys(cfg);
    let xs: Vec<f64> = ys.iter().map(|&y| frame.x(y)).collect();
    let field = RefField::build(sys, Some(phi), &xs)?;
    run(Rhs { sys, field, frame, mode: Mode::Linearized { zero_order }, ys }, v0, cfg)
}

fn check_evolvable(sys: &SystemSpec, u: &GridFunction) -> Result<()> {
    if sys.symbol_only {
        return Err(HypError::InvalidInput(format!("{} is classified only; no evolution", sys.name)));
    }
    if sys.space_dim != 1 {
        return Err(HypError::InvalidInput("only 1D systems can be evolved".into()));
    }
    if u.dim() != sys.state_dim {
        return Err(HypError::InvalidInput(format!("state has {} components, system expects {}", u.dim(), sys.state_dim)));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HadamardParams {
    pub k: f64,
    pub alpha: f64,
    pub m: f64,
    pub delta: f64,
    pub t_star: f64,
    pub h: f64,
    pub d: usize,
    pub gamma_minus: f64,
    pub k_prime: f64,
}

impl HadamardParams {
    pub fn new(k: f64, alpha: f64, m: f64, delta: f64, t_star: f64, h: f64, gamma_minus: f64) -> Result<Self> {
        let d = 1usize;
        let df = d as f64;
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(HypError::ParameterGate(format!("α = {alpha} outside (1/2, 1]")));
        }
        if !(delta > 0.0) {
            return Err(HypError::ParameterGate("δ must be positive".into()));
        }
        if !(h > 0.0 && h <= 1.0) {
            return Err(HypError::ParameterGate(format!("h = {h} outside (0, 1]")));
        }
        let lhs = (2.0 * alpha - 1.0) * k;
        let rhs = 2.0 * alpha * m + (1.0 - alpha) * (1.0 - h) * df;
        if lhs <= rhs {
            return Err(HypError::ParameterGate(format!(
                "(2α−1)K > 2αm + (1−α)(1−h)d fails: {lhs:.4} ≤ {rhs:.4}"
            )));
        }
        let k_prime = alpha * (k - m) - (1.0 - alpha) * (1.0 - h) * df / 2.0;
        if 2.0 * k_prime <= k {
            return Err(HypError::ParameterGate(format!("2K′ > K fails: K′ = {k_prime:.4}, K = {k}")));
        }
        if gamma_minus * t_star <= k {
            return Err(HypError::ParameterGate(format!(
                "γ⁻·T⋆ > K fails: {gamma_minus}·{t_star} = {:.4} ≤ {k}",
                gamma_minus * t_star
            )));
        }
        Ok(HadamardParams { k, alpha, m, delta, t_star, h, d, gamma_minus, k_prime })
    }

    /// m = 2, α = 0.6, the smallest integer K with (2α−1)K > 2αm + (1−α)(1−h)d,
    /// T⋆ = 1.5·K/γ⁻.
    pub fn defaults(h: f64, gamma_minus: f64, delta: f64) -> Result<Self> {
        let (m, alpha) = (2.0, 0.6);
        let rhs = 2.0 * alpha * m + (1.0 - alpha) * (1.0 - h);
        let mut k = (rhs / (2.0 * alpha - 1.0)).floor() + 1.0;
        while 2.0 * (alpha * (k - m) - (1.0 - alpha) * (1.0 - h) / 2.0) <= k {
            k += 1.0;
        }
        if !(gamma_minus > 0.0) {
            return Err(HypError::ParameterGate("γ⁻ must be positive".into()));
        }
        Self::new(k, alpha, m, delta, 1.5 * k / gamma_minus, h, gamma_minus)
    }

    pub fn ell(&self) -> f64 {
        1.0 / self.h - 1.0
    }

    /// T(ε) = (T⋆|ln ε|)^{1/(1+ℓ)}.
    pub fn t_of_eps(&self, eps: f64) -> f64 {
        (self.t_star * eps.ln().abs()).powf(self.h)
    }

    /// Physical final time ε^h T(ε).
    pub fn final_time(&self, eps: f64) -> f64 {
        eps.powf(self.h) * self.t_of_eps(eps)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HadamardRow {
    pub eps: f64,
    pub t_eps: f64,
    pub t_final: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub growth_measured: f64,
    pub growth_predicted: f64,
    pub breakdown: bool,
    pub breakdown_reason: Option<BreakdownReason>,
    pub last_valid_time: f64,
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub filter_strength: f64,
    #[serde(skip)]
    pub sample_times: Vec<f64>,
    #[serde(skip)]
    pub numerator_trace: Vec<f64>,
}

impl HadamardRow {
    /// Ratio with the supremum restricted to t ≤ t_max.
    pub fn ratio_until(&self, t_max: f64) -> f64 {
        let num = self
            .sample_times
            .iter()
            .zip(&self.numerator_trace)
            .filter(|(t, _)| **t <= t_max * (1.0 + 1e-12))
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        if self.denominator > 0.0 {
            num / self.denominator
        } else {
            0.0
        }
    }
}

/// Nodes with |y − center| ≤ δ.
fn ball_nodes(g: &GridFunction, center: f64, delta: f64) -> Vec<usize> {
    (0..g.n).filter(|&j| (g.x(j) - center).abs() <= delta).collect()
}

/// Minimum node count inside the W^{1,∞} ball.
pub const MIN_BALL_NODES: usize = 16;

/// max_ball |w| + max_ball |∂_x w| with ∂_x = s⁻¹∂_y.
pub fn w1inf_ball(w: &GridFunction, center: f64, delta: f64, stretch: f64) -> Result<f64> {
    let nodes = ball_nodes(w, center, delta);
    if nodes.len() < MIN_BALL_NODES {
        return Err(HypError::Resolution(format!("only {} nodes inside the ball, need {MIN_BALL_NODES}", nodes.len())));
    }
    let dw = w.derivative();
    let norm = |g: &GridFunction, j: usize| g.comps.iter().map(|v| v[j].norm_sqr()).sum::<f64>().sqrt();
    let a = nodes.iter().map(|&j| norm(w, j)).fold(0.0, f64::max);
    let b = nodes.iter().map(|&j| norm(&dw, j)).fold(0.0, f64::max) / stretch;
    Ok(a + b)
}

fn ball_sup(w: &GridFunction, center: f64, delta: f64) -> f64 {
    ball_nodes(w, center, delta)
        .into_iter()
        .map(|j| w.comps.iter().map(|v| v[j].norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// One report row from a perturbation trajectory w = u − φ.
pub fn hadamard_row(traj: &Trajectory, params: &HadamardParams, eps: f64, center: f64, dt: f64) -> Result<HadamardRow> {
    let s = traj.frame.stretch;
    let w0 = &traj.states[0];
    let mut trace = Vec::with_capacity(traj.states.len());
    for w in &traj.states {
        trace.push(w1inf_ball(w, center, params.delta, s)?);
    }
    let numerator = trace.iter().copied().fold(0.0, f64::max);
    let denominator = sobolev_norm_physical(w0, params.m, s).powf(params.alpha);
    let ratio = if denominator > 0.0 { numerator / denominator } else { 0.0 };
    let a0 = ball_sup(w0, center, params.delta);
    let a1 = ball_sup(traj.last(), center, params.delta);
    let growth_measured = if a0 > 0.0 && a1 > 0.0 { (a1 / a0).ln() } else { 0.0 };
    let t_last = traj.last_time();
    let growth_predicted = params.gamma_minus * (t_last / eps.powf(params.h)).powf(1.0 / params.h);
    Ok(HadamardRow {
        eps,
        t_eps: params.t_of_eps(eps),
        t_final: params.final_time(eps),
        numerator,
        denominator,
        ratio,
        growth_measured,
        growth_predicted,
        breakdown: traj.breakdown.is_some(),
        breakdown_reason: traj.breakdown.map(|b| b.reason),
        last_valid_time: t_last,
        n: w0.n,
        dt,
        steps: traj.steps,
        filter_strength: traj.filter_strength,
        sample_times: traj.times.clone(),
        numerator_trace: trace,
    })
}

/// Row from separate full trajectories u and φ sampled on the same grid and times.
pub fn hadamard_ratio(u: &Trajectory, phi: &Trajectory, params: &HadamardParams, eps: f64, center: f64, dt: f64) -> Result<HadamardRow> {
    if u.times.len() != phi.times.len() {
        return Err(HypError::InvalidInput("trajectories sampled at different times".into()));
    }
    let states = u.states.iter().zip(&phi.states).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
    let diff = Trajectory { states, ..u.clone() };
    hadamard_row(&diff, params, eps, center, dt)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSetup {
    pub x0: f64,
    pub xi0: f64,
    pub ebar: Vec<f64>,
    pub h: f64,
    pub gamma_minus: f64,
    /// y-domain length (packet cutoff radius is 1 in y).
    pub length: f64,
    pub cutoff: Cutoff,
}

impl ExperimentSetup {
    /// Setup from a classification; refuses persistent or hyperbolic verdicts.
    pub fn from_classification(
        cl: &crate::classifier::Classification,
        gamma_minus: f64,
        x0: f64,
        xi0: f64,
        ebar: Vec<f64>,
    ) -> Result<Self> {
        let h = cl.h.ok_or_else(|| {
            HypError::InvalidInput(format!("no instability experiment for a {} verdict", cl.regime.label()))
        })?;
        Ok(ExperimentSetup { x0, xi0, ebar, h, gamma_minus, length: 4.0, cutoff: Cutoff::Plateau })
    }
}

/// Real unit polarization for the packet: the kernel of A(0, x₀, ξ₀) − λ at the
/// witness, real part (imaginary part if the real part vanishes).
pub fn witness_direction<S: crate::system_model::SymbolFamily + ?Sized>(
    fam: &S,
    w: &crate::system_model::CotangentPoint,
) -> Result<Vec<f64>> {
    let n = fam.dim();
    let a = linalg::complexify(&fam.symbol(0.0, &w.x, &w.xi)?) - CMat::identity(n, n) * w.lambda;
    let v = linalg::null_vector(&a);
    // fix the phase so the largest entry is real
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |b, (i, z)| if z.norm() > b.1 { (i, z.norm()) } else { b });
    let v = &v * (v[imax].conj() / v[imax].norm());
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pick = if norm(&re) >= 1e-8 { re } else { im };
    let k = norm(&pick);
    if !(k > 0.0) {
        return Err(HypError::Numerical("witness kernel has no real direction".into()));
    }
    Ok(pick.iter().map(|x| x / k).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentOptions {
    /// Multiplies the CFL-derived step (0.5 for dt-halving checks).
    pub dt_scale: f64,
    /// Filter strength override; by default sized from the predicted growth.
    pub filter: Option<f64>,
    pub linf_cap: f64,
    pub tail_cap: f64,
    pub samples: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions { dt_scale: 1.0, filter: None, linf_cap: 1e3, tail_cap: 1e-3, samples: 400 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HadamardVerdict {
    Unstable,
    NoSolution,
    Stable,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct HadamardReport {
    pub system: String,
    pub params: HadamardParams,
    pub setup: ExperimentSetup,
    pub options: ExperimentOptions,
    pub rows: Vec<HadamardRow>,
    pub ratio_slope: f64,
    pub growth_factor: f64,
    pub monotone: bool,
    pub verdict: HadamardVerdict,
}

pub const HADAMARD_CSV_HEADER: &str =
    "eps,T_eps,t_final,numerator,denominator,ratio,growth_measured,growth_predicted,breakdown,last_valid_time,n,dt,steps,filter_strength";

impl HadamardReport {
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{:e},{},{:e},{:e},{:e},{:e},{},{},{},{:e},{},{:e},{},{}",
                    r.eps,
                    r.t_eps,
                    r.t_final,
                    r.numerator,
                    r.denominator,
                    r.ratio,
                    r.growth_measured,
                    r.growth_predicted,
                    r.breakdown,
                    r.last_valid_time,
                    r.n,
                    r.dt,
                    r.steps,
                    r.filter_strength
                )
            })
            .collect()
    }
}

/// Filter strength whose total damping at twice the carrier frequency exceeds
/// the predicted carrier growth plus the round-off headroom. Growth is linear
/// in |ξ|, damping is ∝ κ⁸, so every higher mode is then held below the
/// packet; the carrier itself loses about (G + 37)/256 of its exponent.
pub fn sized_filter(growth: f64, carrier_kappa: f64) -> f64 {
    let probe = (2.0 * carrier_kappa).min(2.0 / 3.0);
    DEFAULT_FILTER.max((growth + ROUNDOFF_HEADROOM) / probe.powi(8))
}

pub const MAX_NODES: usize = 1 << 16;

/// Grid size for carrier ξ₀/ε^h on a y-domain of the given length.
pub fn packet_nodes(carrier: f64, length: f64, delta: f64) -> usize {
    let need = 8.0 * carrier * length / (2.0 * std::f64::consts::PI);
    let ball = MIN_BALL_NODES as f64 * length / (2.0 * delta);
    (need.max(ball).max(64.0).ceil() as usize).next_power_of_two()
}

/// Single ε run of the experiment.
pub fn instability_run(
    sys: &SystemSpec,
    phi: &ReferenceSolution,
    setup: &ExperimentSetup,
    params: &HadamardParams,
    eps: f64,
    opts: &ExperimentOptions,
) -> Result<HadamardRow> {
    let h = params.h;
    let frame = Frame::rescaled(setup.x0, eps, h);
    let carrier = setup.xi0.abs() / eps.powf(h);
    let length = setup.length;
    let norm = setup.ebar.iter().map(|v| v * v).sum::<f64>().sqrt();
    let spec = WavePacketSpec {
        k: params.k,
        xi0: setup.xi0,
        center: 0.0,
        cutoff: setup.cutoff,
        radius: 1.0,
        ebar: setup.ebar.iter().map(|v| c(v / norm)).collect(),
        eps,
        h,
        q_inverse: None,
    };
    // refine until the datum itself sits well below the tail threshold
    let mut n = packet_nodes(carrier, length, params.delta);
    let w0 = loop {
        let w = build_wavepacket(&spec, -0.5 * length, length, n)?;
        let probe = SolverConfig { n, ..SolverConfig::new(n, -0.5 * length, length, 1.0, 1.0, 0.0, &frame)? };
        if tail_fraction(&w, &probe) <= 1e-2 * opts.tail_cap {
            break w;
        }
        if n >= MAX_NODES {
            return Err(HypError::Resolution(format!("packet tail not resolved with {n} nodes")));
        }
        n *= 2;
    };
    let t_final = params.final_time(eps);
    // speed bound from the reference over the run
    let mut speed: f64 = 0.0;
    for i in 0..=8 {
        let t = t_final * i as f64 / 8.0;
        for j in (0..n).step_by((n / 32).max(1)) {
            let p = phi.at(sys, t, &[frame.x(w0.x(j))])?;
            speed = speed.max(inf_norm(&sys.flux(0, t, &[frame.x(w0.x(j))], p.as_slice())));
        }
    }
    let speed = 1.5 * speed + 1e-3;
    let dt = opts.dt_scale * 0.5 * CFL * length * frame.stretch / (n as f64 * speed);
    let mut cfg = SolverConfig::new(n, -0.5 * length, length, t_final, dt, speed, &frame)?;
    let growth = params.gamma_minus * params.t_of_eps(eps).powf(1.0 / h);
    let kappa = carrier / (std::f64::consts::PI * n as f64 / length);
    cfg.filter_strength = opts.filter.unwrap_or_else(|| sized_filter(growth, kappa));
    cfg.linf_cap = opts.linf_cap;
    cfg.tail_cap = opts.tail_cap;
    cfg.samples = opts.samples;
    let traj = evolve_perturbation(sys, phi, &w0, &cfg, frame)?;
    hadamard_row(&traj, params, eps, 0.0, dt)
}

/// Runs the ladder in parallel and aggregates the report.
pub fn run_instability_experiment(
    sys: &SystemSpec,
    phi: &ReferenceSolution,
    setup: &ExperimentSetup,
    params: &HadamardParams,
    ladder: &[f64],
    opts: &ExperimentOptions,
) -> Result<HadamardReport> {
    if ladder.len() < 2 {
        return Err(HypError::InvalidInput("the ε ladder needs at least two rungs".into()));
    }
    if (setup.h - params.h).abs() > 1e-12 {
        return Err(HypError::InvalidInput("setup and parameters disagree on h".into()));
    }
    let mut rows = ladder
        .par_iter()
        .map(|&eps| instability_run(sys, phi, setup, params, eps, opts))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let xs: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.max(1e-300).ln()).collect();
    // slope of log ratio against log(1/ε)
    let ratio_slope = -linalg::linear_fit(&xs, &ys).0;
    let growth_factor = rows.last().unwrap().ratio / rows[0].ratio;
    let monotone = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let verdict = if rows.iter().any(|r| r.breakdown && r.last_valid_time < r.t_final * (1.0 - 1e-12)) && monotone {
        HadamardVerdict::NoSolution
    } else if monotone && growth_factor >= 10.0 {
        HadamardVerdict::Unstable
    } else if ratio_slope.abs() <= 0.1 && rows.iter().all(|r| !r.breakdown) {
        HadamardVerdict::Stable
    } else {
        HadamardVerdict::Inconclusive
    };
    Ok(HadamardReport {
        system: sys.name.clone(),
        params: params.clone(),
        setup: setup.clone(),
        options: opts.clone(),
        rows,
        ratio_slope,
        growth_factor,
        monotone,
        verdict,
    })
}

/// exp(M) for a 2×2 matrix via the Cayley–Hamilton form; general sizes use Padé.
pub fn expm(m: &CMat) -> CMat {
    if m.nrows() != 2 {
        return m.clone().exp();
    }
    let half = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let b = m - CMat::identity(2, 2) * half;
    let s2 = b[(0, 0)] * b[(0, 0)] + b[(0, 1)] * b[(1, 0)];
    let s = s2.sqrt();
    let (ch, sh) = if s.norm() < 1e-6 {
        (c(1.0) + s2 / 2.0 + s2 * s2 / 24.0, c(1.0) + s2 / 6.0 + s2 * s2 / 120.0)
    } else {
        (s.cosh(), s.sinh() / s)
    };
    (CMat::identity(2, 2) * ch + b * sh) * half.exp()
}

/// Symbol S(0; t, y, η) = exp(−i ε^{h−1} t A(x₀+ε^{1−h}y, φ(0, ·), η)) of the
/// frozen-coefficient flow (A⋆ independent of t).
pub fn frozen_flow_symbol(sys: &SystemSpec, phi: &ReferenceSolution, x0: f64, eps: f64, h: f64, t_rescaled: f64) -> SymbolSampler {
    let sys = sys.clone();
    let phi = phi.clone();
    let frame = Frame::rescaled(x0, eps, h);
    let scale = eps.powf(h - 1.0) * t_rescaled;
    SymbolSampler::matrix(move |y, eta| {
        let x = frame.x(y);
        let p = phi.initial(&[x]);
        let a = linalg::complexify(&sys.flux(0, 0.0, &[x], p.as_slice()));
        expm(&(a * C64::new(0.0, -scale * eta)))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeCompareRow {
    pub eps: f64,
    pub t_rescaled: f64,
    pub t_end: f64,
    pub n: usize,
    pub error: f64,
    pub growth: f64,
}

#[derive(Clone, Debug)]
pub struct FreeCompareSetup {
    pub x0: f64,
    pub xi0: f64,
    pub ebar: Vec<f64>,
    pub h: f64,
    /// y-domain [lo, lo + length) and packet center/radius in y.
    pub lo: f64,
    pub length: f64,
    pub center: f64,
    pub radius: f64,
    pub nodes_per_oscillation: f64,
    /// Target RK4 phase increment per step at the carrier.
    pub phase_step: f64,
}

impl FreeCompareSetup {
    pub fn periodic(xi0: f64, ebar: Vec<f64>) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        FreeCompareSetup {
            x0: 0.0,
            xi0,
            ebar,
            h: 1.0,
            lo: 0.0,
            length: tau,
            center: std::f64::consts::PI,
            radius: 1.0,
            nodes_per_oscillation: 8.0,
            phase_step: 0.02,
        }
    }
}

/// ‖v_lin(t_end) − op_ε(S(0; t_end/ε^h))v(0)‖/‖v_lin(t_end)‖ for a frozen reference.
/// `flip` replaces S(0;t) by S(0;−t) (sanity inversion).
pub fn free_solution_compare(
    sys: &SystemSpec,
    phi: &ReferenceSolution,
    eps: f64,
    setup: &FreeCompareSetup,
    t_rescaled: f64,
    flip: bool,
) -> Result<FreeCompareRow> {
    let h = setup.h;
    let frame = Frame::rescaled(setup.x0, eps, h);
    let carrier = setup.xi0.abs() / eps.powf(h);
    let n = ((setup.nodes_per_oscillation * (carrier + 8.0 / setup.radius) * setup.length / (2.0 * std::f64::consts::PI)).ceil()
        as usize)
        .next_power_of_two()
        .max(64);
    let norm = setup.ebar.iter().map(|v| v * v).sum::<f64>().sqrt();
    let spec = WavePacketSpec {
        k: 0.0,
        xi0: setup.xi0,
        center: setup.center,
        cutoff: Cutoff::Plateau,
        radius: setup.radius,
        ebar: setup.ebar.iter().map(|v| c(v / norm)).collect(),
        eps,
        h,
        q_inverse: None,
    };
    let v0 = build_wavepacket(&spec, setup.lo, setup.length, n)?;
    let frozen = phi.clone().frozen();
    let mut speed: f64 = 0.0;
    for j in 0..n {
        let x = frame.x(v0.x(j));
        speed = speed.max(inf_norm(&sys.flux(0, 0.0, &[x], frozen.initial(&[x]).as_slice())));
    }
    let t_end = eps.powf(h) * t_rescaled;
    let rate = carrier * speed / frame.stretch;
    let dt = (setup.phase_step / rate).min(0.5 * CFL * setup.length * frame.stretch / (n as f64 * speed));
    let mut cfg = SolverConfig::new(n, setup.lo, setup.length, t_end, dt, speed, &frame)?;
    cfg.filter_strength = 0.0;
    cfg.samples = 1;
    cfg.linf_cap = f64::INFINITY;
    cfg.tail_cap = 1.0;
    // both sides see the same band-limited datum
    let v0 = post_step(v0, &cfg, 0.0);
    let traj = evolve_linearized(sys, &frozen, &v0, setup.x0, eps, h, &cfg, true)?;
    if let Some(b) = traj.breakdown {
        return Err(HypError::Numerical(format!("linearized run broke down at t = {:.3e}", b.time)));
    }
    let vlin = traj.last();
    let s = frozen_flow_symbol(sys, &frozen, setup.x0, eps, h, if flip { -t_rescaled } else { t_rescaled });
    let pred = op_eps_apply_unchecked(&s, &v0, eps, h).real_part();
    let error = vlin.sub(&pred)?.l2_norm() / vlin.l2_norm();
    Ok(FreeCompareRow { eps, t_rescaled, t_end, n, error, growth: (vlin.sup_norm() / v0.sup_norm()).ln() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use std::f64::consts::PI;

    fn scalar_burgers() -> SystemSpec {
        SystemSpec::new(
            "burgers-scalar",
            1,
            1,
            |_, _, _, u| RMat::from_element(1, 1, u[0]),
            |_, _, _| RVec::zeros(1),
        )
    }

    fn sine_grid(n: usize) -> GridFunction {
        GridFunction::from_fn(0.0, 2.0 * PI, n, 1, |x| vec![c(x.sin())]).unwrap()
    }

    /// u = sin(x − u t) by Newton.
    fn characteristics(x: f64, t: f64) -> f64 {
        let mut u = x.sin();
        for _ in 0..100 {
            let g = u - (x - u * t).sin();
            let dg = 1.0 + t * (x - u * t).cos();
            let du = g / dg;
            u -= du;
            if du.abs() < 1e-15 {
                break;
            }
        }
        u
    }

    #[test]
    fn cfl_enforced() {
        let f = Frame::physical();
        assert!(SolverConfig::new(256, 0.0, 2.0 * PI, 1.0, 0.1, 1.0, &f).is_err());
        assert!(SolverConfig::new(256, 0.0, 2.0 * PI, 1.0, 0.01, 1.0, &f).is_ok());
        assert!(SolverConfig::new(100, 0.0, 2.0 * PI, 1.0, 0.01, 1.0, &f).is_err());
    }

    #[test]
    fn traveling_wave_conserves_l2() {
        let sys = registry::symmetric_control(0.0);
        let n = 128;
        let u0 = GridFunction::from_fn(0.0, 2.0 * PI, n, 2, |x| vec![c((3.0 * x).cos()), c((3.0 * x).sin())]).unwrap();
        let mut cfg = SolverConfig::new(n, 0.0, 2.0 * PI, 1.0, 1e-3, 1.0, &Frame::physical()).unwrap();
        cfg.samples = 4;
        let tr = evolve(&sys, &u0, &cfg).unwrap();
        assert!(tr.breakdown.is_none());
        let e0 = u0.l2_norm();
        assert!((tr.last().l2_norm() / e0 - 1.0).abs() < 1e-6);
        // the characteristic variables u₁ ± u₂ travel at ±1
        let w = tr.last();
        for j in 0..n {
            let x = w.x(j);
            let plus = (3.0 * (x - 1.0)).cos() + (3.0 * (x - 1.0)).sin();
            assert!((w.comps[0][j].re + w.comps[1][j].re - plus).abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_burgers_matches_characteristics() {
        let sys = scalar_burgers();
        let n = 256;
        let mut cfg = SolverConfig::new(n, 0.0, 2.0 * PI, 0.5, 2e-4, 1.0, &Frame::physical()).unwrap();
        cfg.samples = 1;
        cfg.filter_strength = 0.0;
        let tr = evolve(&sys, &sine_grid(n), &cfg).unwrap();
        let w = tr.last();
        let err = (0..n).map(|j| (w.comps[0][j].re - characteristics(w.x(j), 0.5)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn shock_detected_near_crossing_time() {
        let sys = scalar_burgers();
        let n = 2048;
        let mut cfg = SolverConfig::new(n, 0.0, 2.0 * PI, 1.5, 5e-4, 1.0, &Frame::physical()).unwrap();
        cfg.samples = 300;
        let tr = evolve(&sys, &sine_grid(n), &cfg).unwrap();
        let b = tr.breakdown.expect("shock must trip the detector");
        assert!((b.time - 1.0).abs() <= 0.05, "tripped at {}", b.time);
    }

    #[test]
    fn detector_examples() {
        let cfg = SolverConfig::new(64, 0.0, 2.0 * PI, 1.0, 1e-3, 1.0, &Frame::physical()).unwrap();
        let mut g = sine_grid(64);
        assert_eq!(breakdown_detector(&g, &cfg), None);
        g.comps[0][5] = c(f64::NAN);
        assert_eq!(breakdown_detector(&g, &cfg), Some(BreakdownReason::NonFinite));
        let big = sine_grid(64).map(|z| z * 1e7);
        assert!(matches!(breakdown_detector(&big, &cfg), Some(BreakdownReason::LinfCap(_))));
        let rough = GridFunction::from_fn(0.0, 2.0 * PI, 64, 1, |x| vec![c((20.0 * x).sin())]).unwrap();
        assert!(matches!(breakdown_detector(&rough, &cfg), Some(BreakdownReason::SpectralTail(_))));
    }

    #[test]
    fn kgz_without_coupling_is_stable() {
        let sys = registry::kgz(0.0, 0.5).unwrap();
        let n = 128;
        let u0 = GridFunction::from_fn(0.0, 2.0 * PI, n, sys.state_dim, |x| {
            (0..sys.state_dim).map(|i| c(0.01 * ((i + 1) as f64 * x).sin())).collect()
        })
        .unwrap();
        let mut cfg = SolverConfig::new(n, 0.0, 2.0 * PI, 1.0, 2e-3, 2.0, &Frame::physical()).unwrap();
        cfg.samples = 20;
        let tr = evolve(&sys, &u0, &cfg).unwrap();
        assert!(tr.breakdown.is_none());
        assert!(tr.states.iter().all(|s| s.sup_norm() < 0.1));
    }

    fn const_elliptic() -> (SystemSpec, ReferenceSolution) {
        (registry::elliptic_wave(0.0), ReferenceSolution::new(|_| RVec::zeros(2), registry::periodic()))
    }

    #[test]
    fn constant_coefficients_match_flow_exactly() {
        let (sys, phi) = const_elliptic();
        let setup = FreeCompareSetup::periodic(1.0, vec![1.0, 0.0]);
        let r = free_solution_compare(&sys, &phi, 0.02, &setup, 2.0, false).unwrap();
        assert!(r.error < 1e-8, "{r:?}");
        let bad = free_solution_compare(&sys, &phi, 0.02, &setup, 2.0, true).unwrap();
        assert!(bad.error > 0.5, "{bad:?}");
    }

    #[test]
    fn elliptic_amplitude_law() {
        let (sys, phi) = const_elliptic();
        let eps = 0.01;
        let xi0 = 1.0;
        let n = 2048;
        let spec = WavePacketSpec {
            k: 0.0,
            xi0,
            center: PI,
            cutoff: Cutoff::Plateau,
            radius: 1.0,
            ebar: vec![c(1.0), c(0.0)],
            eps,
            h: 1.0,
            q_inverse: None,
        };
        let v0 = build_wavepacket(&spec, 0.0, 2.0 * PI, n).unwrap();
        let t_end = 3.0 * eps;
        let mut cfg = SolverConfig::new(n, 0.0, 2.0 * PI, t_end, 1e-5, 1.0, &Frame::physical()).unwrap();
        cfg.samples = 30;
        cfg.filter_strength = 0.0;
        let run = |zero_order: bool, s: &SystemSpec| {
            let tr = evolve_linearized(s, &phi, &v0, 0.0, eps, 1.0, &cfg, zero_order).unwrap();
            let ts: Vec<f64> = tr.times[10..].to_vec();
            let ls: Vec<f64> = tr.states[10..].iter().map(|g| g.sup_norm().ln()).collect();
            linalg::linear_fit(&ts, &ls).0
        };
        let rate = run(true, &sys);
        // Im λ₀ = ξ₀ for A = ξ[[0,1],[−1,0]]
        assert!((rate * eps / xi0 - 1.0).abs() < 0.05, "{rate}");
        // a bounded zero-order term changes the rate by O(ε) only
        let damped = SystemSpec::new(
            "elliptic-damped",
            1,
            2,
            |_, _, _, _| RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            |_, _, u| RVec::from_row_slice(&[-0.5 * u[0], 0.3 * u[1]]),
        );
        let rate2 = run(true, &damped);
        assert!((rate2 / rate - 1.0).abs() <= 0.05, "{rate} vs {rate2}");
    }

    #[test]
    fn gate_names_the_inequality() {
        let e = HadamardParams::new(2.0, 1.0, 1.25, 0.5, 9.0, 0.5, 0.5).unwrap_err();
        assert!(e.to_string().contains("(2α−1)K"), "{e}");
        let e = HadamardParams::new(3.0, 1.0, 1.25, 0.5, 5.0, 0.5, 0.5).unwrap_err();
        assert!(e.to_string().contains("γ⁻·T⋆ > K"), "{e}");
        assert!(HadamardParams::new(3.0, 1.0, 1.25, 0.5, 9.0, 0.5, 0.5).is_ok());
        let d = HadamardParams::defaults(0.5, 0.5, 0.5).unwrap();
        assert_eq!((d.m, d.alpha, d.k), (2.0, 0.6, 14.0));
        assert!((d.t_star - 42.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_vanishes_without_perturbation() {
        let params = HadamardParams::new(3.0, 1.0, 1.25, 0.5, 9.0, 0.5, 0.5).unwrap();
        let g = GridFunction::zeros(-2.0, 4.0, 256, 2).unwrap();
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![g.clone(), g],
            breakdown: None,
            steps: 0,
            filter_strength: 0.0,
            frame: Frame::rescaled(0.0, 1e-2, 0.5),
        };
        let r = hadamard_row(&tr, &params, 1e-2, 0.0, 1e-3).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(r.numerator >= 0.0 && r.denominator >= 0.0);
    }

    #[test]
    fn expm_matches_pade() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(0.3, 0.1), c(1.2), C64::new(-0.7, 0.4), C64::new(-0.1, 0.0)]);
        assert!((expm(&m) - m.clone().exp()).norm() < 1e-12);
        let nil = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!((expm(&nil) - CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)])).norm() < 1e-14);
    }

    #[test]
    fn frozen_flow_matches_integrated_flow() {
        use crate::symbolic_flow::{integrate_symbolic_flow, FlowConfig};
        let sys = registry::elliptic_wave(0.3);
        let phi = ReferenceSolution::new(|_| RVec::zeros(2), registry::periodic());
        let eps = 0.01;
        let s = frozen_flow_symbol(&sys, &phi, 0.0, eps, 1.0, 1.5);
        let (y, eta) = (0.8, 1.1);
        let a = linalg::complexify(&sys.flux(0, 0.0, &[y], &[0.0, 0.0])) * c(eta);
        let mut cfg = FlowConfig::new(eps, 0.0, 1.0).unwrap();
        cfg.check_flow = false;
        let res = integrate_symbolic_flow(&|_t| Ok(a.clone()), &cfg, 0.0, 1.5, &[]).unwrap();
        let rel = (res.last() - s.eval(y, eta, 2)).norm() / res.last().norm();
        assert!(rel < 1e-7, "{rel}");
    }
}
