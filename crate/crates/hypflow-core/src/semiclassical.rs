//! Semiclassical quantization op_ε(a)u(x) = Σ_k e^{ixξ_k} a(x, ε^hξ_k) û_k on
//! periodic grids, ε-Sobolev norms, wave packets and calculus residuals.

use std::cell::RefCell;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{HypError, Result};
use crate::linalg::{self, c, CMat, C64};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT normalized so that u_j = Σ_k û_k e^{2πijk/n}.
pub fn fft_forward(v: &mut [C64]) {
    let n = v.len();
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    plan.process(v);
    let s = 1.0 / n as f64;
    v.iter_mut().for_each(|z| *z *= s);
}

pub fn fft_inverse(v: &mut [C64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(v.len()));
    plan.process(v);
}

/// Signed mode index of FFT slot k.
pub fn mode_index(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Vector-valued samples on a uniform periodic grid [lo, lo + length).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub lo: f64,
    pub length: f64,
    pub n: usize,
    /// One vector of n samples per component.
    pub comps: Vec<Vec<C64>>,
}

impl GridFunction {
    pub fn zeros(lo: f64, length: f64, n: usize, dim: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(HypError::InvalidInput(format!("node count {n} must be a power of two ≥ 2")));
        }
        if !(length > 0.0) {
            return Err(HypError::InvalidInput("grid length must be positive".into()));
        }
        Ok(GridFunction { lo, length, n, comps: vec![vec![c(0.0); n]; dim] })
    }

    pub fn from_fn(lo: f64, length: f64, n: usize, dim: usize, f: impl Fn(f64) -> Vec<C64>) -> Result<Self> {
        let mut g = Self::zeros(lo, length, n, dim)?;
        for j in 0..n {
            let v = f(g.x(j));
            for (i, comp) in g.comps.iter_mut().enumerate() {
                comp[j] = v[i];
            }
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular frequency of slot k.
    pub fn xi(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * mode_index(k, self.n) as f64 / self.length
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    pub fn spectrum(&self) -> Vec<Vec<C64>> {
        self.comps
            .iter()
            .map(|v| {
                let mut w = v.clone();
                fft_forward(&mut w);
                w
            })
            .collect()
    }

    pub fn from_spectrum(&self, spec: Vec<Vec<C64>>) -> Self {
        let comps = spec
            .into_iter()
            .map(|mut w| {
                fft_inverse(&mut w);
                w
            })
            .collect();
        GridFunction { lo: self.lo, length: self.length, n: self.n, comps }
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.comps.iter().flat_map(|v| v.iter()).map(|z| z.norm_sqr()).sum();
        (s * self.dx()).sqrt()
    }

    /// max_j |u(x_j)| with the Euclidean norm over components.
    pub fn sup_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| self.comps.iter().map(|v| v[j].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Spectral derivative; the Nyquist mode is dropped.
    pub fn derivative(&self) -> Self {
        let mut spec = self.spectrum();
        for w in spec.iter_mut() {
            for (k, z) in w.iter_mut().enumerate() {
                if 2 * k == self.n {
                    *z = c(0.0);
                } else {
                    *z *= C64::new(0.0, self.xi(k));
                }
            }
        }
        self.from_spectrum(spec)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        let comps = self.comps.iter().map(|v| v.iter().map(|z| f(*z)).collect()).collect();
        GridFunction { comps, ..self.clone() }
    }

    pub fn real_part(&self) -> Self {
        self.map(|z| c(z.re))
    }

    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + a * q).collect())
            .collect();
        Ok(GridFunction { comps, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(c(-1.0), other)
    }

    fn check_same(&self, o: &Self) -> Result<()> {
        if self.n != o.n || self.dim() != o.dim() || (self.length - o.length).abs() > 1e-12 * self.length {
            return Err(HypError::InvalidInput("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Value vector at node j.
    pub fn at(&self, j: usize) -> Vec<C64> {
        self.comps.iter().map(|v| v[j]).collect()
    }

    pub const MAGIC: &'static [u8; 4] = b"HYPG";

    /// Binary container: magic, version, space dims, components, nodes, lo, length, then
    /// little-endian (re, im) doubles, component-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.lo.to_le_bytes())?;
        w.write_all(&self.length.to_le_bytes())?;
        for v in &self.comps {
            for z in v {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(HypError::InvalidInput("not a grid-function container".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(HypError::InvalidInput("unsupported container version".into()));
        }
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(HypError::InvalidInput("only 1D grids are supported".into()));
        }
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut f = || -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let lo = f()?;
        let length = f()?;
        let mut g = GridFunction::zeros(lo, length, n, dim)?;
        for comp in g.comps.iter_mut() {
            for z in comp.iter_mut() {
                let re = f()?;
                let im = f()?;
                *z = C64::new(re, im);
            }
        }
        Ok(g)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x");
        for i in 0..self.dim() {
            s.push_str(&format!(",re{i},im{i}"));
        }
        s.push('\n');
        for j in 0..self.n {
            s.push_str(&format!("{}", self.x(j)));
            for v in &self.comps {
                s.push_str(&format!(",{:e},{:e}", v[j].re, v[j].im));
            }
            s.push('\n');
        }
        s
    }
}

pub type ScalarMultiplier = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
pub type MatrixMultiplier = Arc<dyn Fn(f64) -> CMat + Send + Sync>;
pub type ScalarSymbol = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;
pub type MatrixSymbol = Arc<dyn Fn(f64, f64) -> CMat + Send + Sync>;

#[derive(Clone)]
pub enum SymbolKind {
    /// a(ξ)·Id
    ScalarMultiplier(ScalarMultiplier),
    MatrixMultiplier(MatrixMultiplier),
    /// a(x, ξ)·Id
    Scalar(ScalarSymbol),
    Matrix(MatrixSymbol),
}

/// A symbol a(x, ξ) of declared order, acting on `dim`-vectors.
#[derive(Clone)]
pub struct SymbolSampler {
    pub kind: SymbolKind,
    pub order: f64,
    /// x-dependence only through a slow variable (informational, drives expectations).
    pub slow_x: bool,
}

impl std::fmt::Debug for SymbolSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let k = match self.kind {
            SymbolKind::ScalarMultiplier(_) => "scalar multiplier",
            SymbolKind::MatrixMultiplier(_) => "matrix multiplier",
            SymbolKind::Scalar(_) => "scalar",
            SymbolKind::Matrix(_) => "matrix",
        };
        write!(f, "SymbolSampler({k}, order {}, slow_x {})", self.order, self.slow_x)
    }
}

impl SymbolSampler {
    pub fn multiplier(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        SymbolSampler { kind: SymbolKind::ScalarMultiplier(Arc::new(f)), order: 0.0, slow_x: false }
    }

    pub fn scalar(f: impl Fn(f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        SymbolSampler { kind: SymbolKind::Scalar(Arc::new(f)), order: 0.0, slow_x: false }
    }

    pub fn matrix(f: impl Fn(f64, f64) -> CMat + Send + Sync + 'static) -> Self {
        SymbolSampler { kind: SymbolKind::Matrix(Arc::new(f)), order: 0.0, slow_x: false }
    }

    pub fn matrix_multiplier(f: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        SymbolSampler { kind: SymbolKind::MatrixMultiplier(Arc::new(f)), order: 0.0, slow_x: false }
    }

    pub fn with_order(mut self, m: f64) -> Self {
        self.order = m;
        self
    }

    pub fn slow(mut self) -> Self {
        self.slow_x = true;
        self
    }

    pub fn is_multiplier(&self) -> bool {
        matches!(self.kind, SymbolKind::ScalarMultiplier(_) | SymbolKind::MatrixMultiplier(_))
    }

    /// Value as a dim×dim matrix.
    pub fn eval(&self, x: f64, xi: f64, dim: usize) -> CMat {
        match &self.kind {
            SymbolKind::ScalarMultiplier(f) => CMat::identity(dim, dim) * f(xi),
            SymbolKind::MatrixMultiplier(f) => f(xi),
            SymbolKind::Scalar(f) => CMat::identity(dim, dim) * f(x, xi),
            SymbolKind::Matrix(f) => f(x, xi),
        }
    }

    /// Pointwise product a·b (matrix product for matrix symbols).
    pub fn product(a: &SymbolSampler, b: &SymbolSampler, dim: usize) -> SymbolSampler {
        let (a2, b2) = (a.clone(), b.clone());
        let order = a.order + b.order;
        let slow_x = a.slow_x && b.slow_x;
        let kind = match (&a.kind, &b.kind) {
            (SymbolKind::ScalarMultiplier(f), SymbolKind::ScalarMultiplier(g)) => {
                let (f, g) = (f.clone(), g.clone());
                SymbolKind::ScalarMultiplier(Arc::new(move |xi| f(xi) * g(xi)))
            }
            (SymbolKind::ScalarMultiplier(_) | SymbolKind::Scalar(_), SymbolKind::ScalarMultiplier(_) | SymbolKind::Scalar(_)) => {
                SymbolKind::Scalar(Arc::new(move |x, xi| a2.eval(x, xi, 1)[(0, 0)] * b2.eval(x, xi, 1)[(0, 0)]))
            }
            _ => SymbolKind::Matrix(Arc::new(move |x, xi| a2.eval(x, xi, dim) * b2.eval(x, xi, dim))),
        };
        SymbolSampler { kind, order, slow_x }
    }
}

/// Mode slots carrying more than `REL_MODE_FLOOR` of the peak amplitude.
pub const REL_MODE_FLOOR: f64 = 1e-17;

/// Highest fraction of the Nyquist frequency allowed to carry energy (8 nodes per oscillation).
pub const RESOLVED_FRACTION: f64 = 0.25;

/// Checks that the carrier (the spectral peak) has at least 8 nodes per oscillation.
pub fn check_resolution(u: &GridFunction) -> Result<()> {
    let spec = u.spectrum();
    let (mut best, mut kpeak) = (0.0, 0.0f64);
    for k in 0..u.n {
        let e: f64 = spec.iter().map(|w| w[k].norm_sqr()).sum();
        if e > best {
            best = e;
            kpeak = u.xi(k).abs();
        }
    }
    if kpeak > RESOLVED_FRACTION * u.nyquist() * (1.0 + 1e-9) {
        let need = (8.0 * kpeak * u.length / (2.0 * std::f64::consts::PI)).ceil() as usize;
        return Err(HypError::Resolution(format!(
            "carrier needs at least {} nodes (8 per oscillation), grid has {}",
            need.next_power_of_two(),
            u.n
        )));
    }
    Ok(())
}

/// op_ε(a)u with symbol argument ε^hξ.
pub fn op_eps_apply(a: &SymbolSampler, u: &GridFunction, eps: f64, h: f64) -> Result<GridFunction> {
    check_resolution(u)?;
    Ok(op_eps_apply_unchecked(a, u, eps, h))
}

pub fn op_eps_apply_unchecked(a: &SymbolSampler, u: &GridFunction, eps: f64, h: f64) -> GridFunction {
    let dim = u.dim();
    let s = eps.powf(h);
    let spec = u.spectrum();
    if a.is_multiplier() {
        let mut out = vec![vec![c(0.0); u.n]; dim];
        for k in 0..u.n {
            let m = a.eval(0.0, s * u.xi(k), dim);
            for i in 0..dim {
                let mut acc = c(0.0);
                for j in 0..dim {
                    acc += m[(i, j)] * spec[j][k];
                }
                out[i][k] = acc;
            }
        }
        return u.from_spectrum(out);
    }
    let peak = spec.iter().flat_map(|w| w.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    let modes: Vec<usize> = (0..u.n)
        .filter(|&k| spec.iter().any(|w| w[k].norm() > REL_MODE_FLOOR * peak))
        .collect();
    let n = u.n;
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|jx| {
            let x = u.x(jx);
            let mut acc = vec![c(0.0); dim];
            for &k in &modes {
                let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (jx as f64) * (mode_index(k, n) as f64) / n as f64);
                match &a.kind {
                    SymbolKind::Scalar(f) => {
                        let v = f(x, s * u.xi(k)) * phase;
                        for i in 0..dim {
                            acc[i] += v * spec[i][k];
                        }
                    }
                    _ => {
                        let m = a.eval(x, s * u.xi(k), dim);
                        for i in 0..dim {
                            let mut t = c(0.0);
                            for j in 0..dim {
                                t += m[(i, j)] * spec[j][k];
                            }
                            acc[i] += t * phase;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut comps = vec![vec![c(0.0); n]; dim];
    for (j, r) in rows.into_iter().enumerate() {
        for i in 0..dim {
            comps[i][j] = r[i];
        }
    }
    GridFunction { comps, ..u.clone() }
}

/// ‖(1 + |ε^hξ|²)^{s/2} û‖ by Parseval.
pub fn eps_sobolev_norm(u: &GridFunction, s: f64, eps: f64, h: f64) -> f64 {
    let sc = eps.powf(h);
    sobolev_sum(u, s, sc, 1.0)
}

fn sobolev_sum(u: &GridFunction, s: f64, freq_scale: f64, measure_scale: f64) -> f64 {
    let spec = u.spectrum();
    let mut acc = 0.0;
    for w in &spec {
        for (k, z) in w.iter().enumerate() {
            let xi = freq_scale * u.xi(k);
            acc += (1.0 + xi * xi).powf(s) * z.norm_sqr();
        }
    }
    (acc * u.length * measure_scale).sqrt()
}

/// H^s norm in x = x₀ + stretch·y for a function sampled on the y grid.
pub fn sobolev_norm_physical(u: &GridFunction, s: f64, stretch: f64) -> f64 {
    sobolev_sum(u, s, 1.0 / stretch, stretch)
}

/// The L²-isometric dilation d_ε u(x) = ε^{h/2}u(ε^h x) on the stretched grid.
pub fn dilate(u: &GridFunction, eps: f64, h: f64) -> GridFunction {
    let s = eps.powf(h);
    let amp = s.sqrt();
    GridFunction {
        lo: u.lo / s,
        length: u.length / s,
        n: u.n,
        comps: u.comps.iter().map(|v| v.iter().map(|z| z * amp).collect()).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    /// ≡ 1 on |r| ≤ 1/2, 0 for |r| ≥ 1, smooth transition.
    Plateau,
    /// exp(1 − 1/(1 − r²)).
    Bump,
}

fn smooth_step(u: f64) -> f64 {
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = f(u);
    let b = f(1.0 - u);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl Cutoff {
    pub fn eval(self, r: f64) -> f64 {
        let r = r.abs();
        match self {
            Cutoff::Plateau => {
                if r <= 0.5 {
                    1.0
                } else if r >= 1.0 {
                    0.0
                } else {
                    smooth_step(2.0 * (1.0 - r))
                }
            }
            Cutoff::Bump => {
                if r >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                }
            }
        }
    }
}

/// Blend Q to the identity outside |x − x_c| ≤ δ, |ξ − ξ₀| ≤ δ; inverts pointwise.
pub fn extended_inverse(q: MatrixSymbol, x_c: f64, xi0: f64, delta: f64, dim: usize) -> Result<SymbolSampler> {
    // sampled invertibility check along the blend
    for k in 0..=16 {
        let w = k as f64 / 16.0;
        for &(x, xi) in &[(x_c, xi0), (x_c + 0.5 * delta, xi0), (x_c, xi0 + 0.5 * delta)] {
            let m = q(x, xi) * c(w) + CMat::identity(dim, dim) * c(1.0 - w);
            if linalg::det_lu(&m).norm() < 1e-12 {
                return Err(HypError::Numerical("blend of Q with the identity is singular".into()));
            }
        }
    }
    Ok(SymbolSampler::matrix(move |x, xi| {
        let chi = Cutoff::Plateau.eval((x - x_c) / delta) * Cutoff::Plateau.eval((xi - xi0) / delta);
        let m = q(x, xi) * c(chi) + CMat::identity(dim, dim) * c(1.0 - chi);
        m.try_inverse().unwrap_or_else(|| CMat::identity(dim, dim) * c(f64::NAN))
    }))
}

#[derive(Clone)]
pub struct WavePacketSpec {
    pub k: f64,
    pub xi0: f64,
    /// Packet center in the grid variable.
    pub center: f64,
    pub cutoff: Cutoff,
    /// Cutoff radius in the grid variable.
    pub radius: f64,
    pub ebar: Vec<C64>,
    pub eps: f64,
    pub h: f64,
    /// Q⁻¹ applied by op_ε before taking the real part.
    pub q_inverse: Option<SymbolSampler>,
}

/// ε^K Re(op_ε(Q⁻¹)(e^{i(y−y₀)ξ₀/ε^h} θ((y−y₀)/r) ē)) in the rescaled variable y = (x − x₀)/ε^{1−h}.
pub fn build_wavepacket(spec: &WavePacketSpec, lo: f64, length: f64, n: usize) -> Result<GridFunction> {
    let norm: f64 = spec.ebar.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(HypError::InvalidInput("ē must be a unit vector".into()));
    }
    let dim = spec.ebar.len();
    let carrier = spec.xi0 / spec.eps.powf(spec.h);
    let need = (8.0 * carrier.abs() * length / (2.0 * std::f64::consts::PI)).ceil() as usize;
    if n < need {
        return Err(HypError::Resolution(format!(
            "wave packet needs at least {} nodes, grid has {n}",
            need.next_power_of_two()
        )));
    }
    let g = GridFunction::from_fn(lo, length, n, dim, |y| {
        let th = spec.cutoff.eval((y - spec.center) / spec.radius);
        let ph = C64::from_polar(th, (y - spec.center) * carrier);
        spec.ebar.iter().map(|e| e * ph).collect()
    })?;
    let g = match &spec.q_inverse {
        Some(q) => op_eps_apply(q, &g, spec.eps, spec.h)?,
        None => g,
    };
    let amp = spec.eps.powf(spec.k);
    Ok(g.map(|z| c(z.re * amp)))
}

/// ‖(op(a)op(b) − op(ab))u‖/‖u‖.
pub fn composition_residual(a: &SymbolSampler, b: &SymbolSampler, eps: f64, h: f64, u: &GridFunction) -> Result<f64> {
    let dim = u.dim();
    let bu = op_eps_apply(b, u, eps, h)?;
    let abu = op_eps_apply_unchecked(a, &bu, eps, h);
    let ab = SymbolSampler::product(a, b, dim);
    let direct = op_eps_apply(&ab, u, eps, h)?;
    Ok(abu.sub(&direct)?.l2_norm() / u.l2_norm())
}

/// Least-squares slope of log y against log ε.
pub fn fit_order(eps: &[f64], ys: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linalg::linear_fit(&x, &y).0
}

/// Lower estimate max_u ‖op_ε(a)u‖/‖u‖_{ε,−m} over the probes.
pub fn operator_norm_estimate(a: &SymbolSampler, eps: f64, h: f64, probes: &[GridFunction]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for u in probes {
        let v = op_eps_apply(a, u, eps, h)?;
        best = best.max(v.l2_norm() / eps_sobolev_norm(u, -a.order, eps, h));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn band_limited(n: usize, kmax: i64, seed: u64) -> GridFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(i64, C64)> = (-kmax..=kmax)
            .map(|k| (k, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        GridFunction::from_fn(0.0, 2.0 * PI, n, 1, |x| {
            vec![coeffs.iter().map(|(k, a)| a * C64::from_polar(1.0, *k as f64 * x)).sum()]
        })
        .unwrap()
    }

    #[test]
    fn fft_round_trip() {
        let u = band_limited(256, 20, 1);
        let back = u.from_spectrum(u.spectrum());
        assert!(back.sub(&u).unwrap().l2_norm() <= 1e-12 * u.l2_norm());
    }

    #[test]
    fn identity_and_derivative() {
        let u = band_limited(256, 20, 2);
        let one = SymbolSampler::multiplier(|_| c(1.0));
        let v = op_eps_apply(&one, &u, 0.1, 0.5).unwrap();
        assert!(v.sub(&u).unwrap().l2_norm() <= 1e-12 * u.l2_norm());
        let one_x = SymbolSampler::scalar(|_, _| c(1.0));
        let v = op_eps_apply(&one_x, &u, 0.1, 0.5).unwrap();
        assert!(v.sub(&u).unwrap().l2_norm() <= 1e-12 * u.l2_norm());
        // a = iξ ⟹ ε^h ∂_x
        let (eps, h): (f64, f64) = (0.01, 0.5);
        let d = op_eps_apply(&SymbolSampler::multiplier(|xi| C64::new(0.0, xi)), &u, eps, h).unwrap();
        let exact = u.derivative().map(|z| z * eps.powf(h));
        assert!(d.sub(&exact).unwrap().l2_norm() <= 1e-10 * exact.l2_norm());
    }

    #[test]
    fn plane_wave_multiplier() {
        let (eps, h, xi0): (f64, f64, f64) = (0.01, 0.5, 1.0);
        let k = xi0 / eps.powf(h);
        let u = GridFunction::from_fn(0.0, 2.0 * PI, 128, 1, |x| vec![C64::from_polar(1.0, k * x)]).unwrap();
        let a = |xi: f64| c(1.0 / (1.0 + xi * xi));
        let v = op_eps_apply(&SymbolSampler::multiplier(a), &u, eps, h).unwrap();
        assert!(v.sub(&u.map(|z| z * a(xi0))).unwrap().l2_norm() <= 1e-10 * u.l2_norm());
        // x-dependent path agrees with the multiplier path
        let w = op_eps_apply(&SymbolSampler::scalar(move |_, xi| a(xi)), &u, eps, h).unwrap();
        assert!(v.sub(&w).unwrap().l2_norm() <= 1e-10 * u.l2_norm());
        assert!((eps_sobolev_norm(&u, 0.0, eps, h) - u.l2_norm()).abs() <= 1e-12 * u.l2_norm());
        let m = 1.5;
        let s = eps_sobolev_norm(&u, m, eps, h);
        assert!((s / (u.l2_norm() * (1.0 + xi0 * xi0).powf(m / 2.0)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unresolved_grid_names_node_count() {
        let u = GridFunction::from_fn(0.0, 2.0 * PI, 64, 1, |x| vec![C64::from_polar(1.0, 20.0 * x)]).unwrap();
        match op_eps_apply(&SymbolSampler::multiplier(|_| c(1.0)), &u, 0.1, 1.0) {
            Err(HypError::Resolution(m)) => assert!(m.contains("256"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dilation_identity() {
        let (eps, h): (f64, f64) = (0.01, 0.5);
        let u = band_limited(256, 20, 3);
        let a = |xi: f64| C64::new(xi.tanh(), 0.3 * xi.cos());
        let lhs = op_eps_apply(&SymbolSampler::multiplier(a), &u, eps, h).unwrap();
        let du = dilate(&u, eps, h);
        let rhs = dilate(&op_eps_apply(&SymbolSampler::multiplier(a), &du, 1.0, 1.0).unwrap(), 1.0 / eps, h);
        // dilating back by ε^{−h} restores the grid up to the amplitude factor
        let back = rhs.map(|z| z);
        let diff: f64 = lhs.comps[0]
            .iter()
            .zip(&back.comps[0])
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-10 * lhs.comps[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        for &s in &[0.0, 1.0, 2.5] {
            let l = sobolev_norm_physical(&du, s, 1.0);
            let r = eps_sobolev_norm(&u, s, eps, h);
            assert!((l / r - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn packet_pointwise_and_support() {
        let spec = WavePacketSpec {
            k: 2.0,
            xi0: 1.0,
            center: 0.0,
            cutoff: Cutoff::Plateau,
            radius: 1.0,
            ebar: vec![c(0.6), c(0.8)],
            eps: 1e-2,
            h: 0.5,
            q_inverse: None,
        };
        let g = build_wavepacket(&spec, -2.0, 4.0, 512).unwrap();
        for j in 0..g.n {
            let y = g.x(j);
            let base = 1e-4 * (10.0 * y).cos() * Cutoff::Plateau.eval(y);
            assert!((g.comps[0][j].re - 0.6 * base).abs() < 1e-18);
            assert!((g.comps[1][j].re - 0.8 * base).abs() < 1e-18);
            if y.abs() > 1.0 {
                assert_eq!(g.comps[0][j], c(0.0));
            }
        }
        assert!((g.sup_norm() / 1e-4 - 1.0).abs() < 1e-3);
        assert!(build_wavepacket(&spec, -2.0, 4.0, 32).is_err());
    }

    #[test]
    fn cutoffs() {
        for &r in &[0.0, 0.2, 0.5] {
            assert_eq!(Cutoff::Plateau.eval(r), 1.0);
        }
        assert_eq!(Cutoff::Plateau.eval(1.0), 0.0);
        assert_eq!(Cutoff::Bump.eval(0.0), 1.0);
        assert_eq!(Cutoff::Bump.eval(1.2), 0.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = Cutoff::Plateau.eval(k as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
    }

    #[test]
    fn multipliers_compose_exactly() {
        let u = band_limited(256, 20, 4);
        let a = SymbolSampler::multiplier(|xi| c(xi.sin()));
        let b = SymbolSampler::multiplier(|xi| c(1.0 / (1.0 + xi * xi)));
        assert!(composition_residual(&a, &b, 0.01, 0.5, &u).unwrap() < 1e-13);
    }

    #[test]
    fn operator_norm_examples() {
        let probes: Vec<GridFunction> = (0..4).map(|s| band_limited(256, 10, 10 + s)).collect();
        let est = operator_norm_estimate(&SymbolSampler::multiplier(|_| c(-2.5)), 0.1, 0.5, &probes).unwrap();
        assert!((est - 2.5).abs() < 1e-10);
        // plane-wave probes realize the multiplier norm
        let (eps, h): (f64, f64) = (0.01, 0.5);
        let ks = [3.0, 7.0, 12.0];
        let probes: Vec<GridFunction> = ks
            .iter()
            .map(|&k| GridFunction::from_fn(0.0, 2.0 * PI, 128, 1, move |x| vec![C64::from_polar(1.0, k * x)]).unwrap())
            .collect();
        let f = |xi: f64| c(xi.cos() + 2.0);
        let est = operator_norm_estimate(&SymbolSampler::multiplier(f), eps, h, &probes).unwrap();
        let expect = ks.iter().map(|k| f(eps.powf(h) * k).norm()).fold(0.0, f64::max);
        assert!(est >= expect * (1.0 - 1e-6) && est <= expect * (1.0 + 1e-10));
    }

    #[test]
    fn binary_round_trip() {
        let u = band_limited(64, 5, 5);
        let mut buf = Vec::new();
        u.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"HYPG");
        let v = GridFunction::read_binary(&buf[..]).unwrap();
        assert_eq!(u, v);
        assert!(GridFunction::read_binary(&b"NOPE"[..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn linearity(s1 in 0u64..1000, s2 in 0u64..1000, al in -2.0f64..2.0, be in -2.0f64..2.0) {
            let u = band_limited(128, 10, s1);
            let v = band_limited(128, 10, s2);
            let a = SymbolSampler::scalar(|x, xi| C64::new(x.cos(), xi.sin()));
            let b = SymbolSampler::scalar(|x, xi| c(1.0 + 0.5 * (x + xi).sin()));
            let (eps, h) = (0.05, 0.5);
            let w = u.axpy(c(al / be.abs().max(0.1)), &v).unwrap();
            let lhs = op_eps_apply(&a, &w, eps, h).unwrap();
            let rhs = op_eps_apply(&a, &u, eps, h).unwrap()
                .axpy(c(al / be.abs().max(0.1)), &op_eps_apply(&a, &v, eps, h).unwrap()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().l2_norm() <= 1e-10 * rhs.l2_norm().max(1e-300));
            let sum = SymbolSampler::scalar(move |x, xi| C64::new(x.cos(), xi.sin()) * al + c(1.0 + 0.5 * (x + xi).sin()) * be);
            let l2 = op_eps_apply(&sum, &u, eps, h).unwrap();
            let r2 = op_eps_apply(&a, &u, eps, h).unwrap().map(|z| z * al)
                .axpy(c(be), &op_eps_apply(&b, &u, eps, h).unwrap()).unwrap();
            prop_assert!(l2.sub(&r2).unwrap().l2_norm() <= 1e-10 * r2.l2_norm().max(1e-300));
        }
    }
}
