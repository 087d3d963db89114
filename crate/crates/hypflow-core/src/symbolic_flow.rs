//! The symbolic flow ∂_tS + iε^{h−1}A⋆S = 0 in the advected frame: adaptive
//! RK4 integration, bicharacteristics, the 2×2 companion reduction, and
//! upper/lower envelope checks.

use std::sync::Arc;

use serde::Serialize;

use crate::branching::{GammaChoice, GrowthEnvelope};
use crate::error::{HypError, Result};
use crate::linalg::{self, c, complexify, CMat, C64, I};
use crate::system_model::SymbolFamily;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub eps: f64,
    pub ell: f64,
    pub h: f64,
    pub zeta: f64,
    /// T⋆ in T(ε)^{ℓ+1} = T⋆|log ε|.
    pub t_star_const: f64,
    pub delta: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Re-integrate the second half to measure the flow-composition residual.
    pub check_flow: bool,
}

impl FlowConfig {
    pub fn new(eps: f64, ell: f64, t_star_const: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(HypError::InvalidInput(format!("ε = {eps} must lie in (0, 1)")));
        }
        if !(t_star_const > 0.0) {
            return Err(HypError::InvalidInput("T⋆ must be positive".into()));
        }
        let h = crate::classifier::scale_h(ell);
        Ok(FlowConfig {
            eps,
            ell,
            h,
            zeta: crate::classifier::scale_zeta(ell),
            t_star_const,
            delta: 0.1,
            rtol: 1e-10,
            atol: 1e-14,
            max_step: 0.01 * eps.powf(1.0 - h),
            check_flow: true,
        })
    }

    /// T(ε) = (T⋆|log ε|)^{1/(1+ℓ)}.
    pub fn t_max(&self) -> f64 {
        (self.t_star_const * self.eps.ln().abs()).powf(1.0 / (1.0 + self.ell))
    }

    /// ε^{h−1}.
    pub fn prefactor(&self) -> f64 {
        self.eps.powf(self.h - 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolicFlowResult {
    pub tau: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub s: Vec<CMat>,
    /// ∫_τ^t tr G at each sample (G the generator), for Liouville's formula.
    pub trace_integral: Vec<C64>,
    pub flow_residual: Option<f64>,
    /// max over samples of ‖det S‖ − ‖e^{∫tr G}‖, relative to max(‖e^{∫tr G}‖, Π‖S colⱼ‖).
    pub liouville_residual: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl SymbolicFlowResult {
    pub fn last(&self) -> &CMat {
        self.s.last().expect("non-empty flow")
    }
}

fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct Stepper<'a, F> {
    gen: &'a F,
    pref: C64,
}

impl<'a, F: Fn(f64) -> Result<CMat>> Stepper<'a, F> {
    fn g(&self, t: f64) -> Result<CMat> {
        let a = (self.gen)(t)?;
        Ok(a * self.pref)
    }

    /// One RK4 step from generator values at t, t + h/2, t + h.
    fn rk4(g0: &CMat, gm: &CMat, g1: &CMat, s: &CMat, h: f64) -> (CMat, C64) {
        let hh = c(h);
        let k1 = g0 * s;
        let k2 = gm * (s + &k1 * (hh * 0.5));
        let k3 = gm * (s + &k2 * (hh * 0.5));
        let k4 = g1 * (s + &k3 * hh);
        let next = s + (k1 + (k2 + k3) * c(2.0) + k4) * (hh / 6.0);
        let tr = (g0.trace() + gm.trace() * 4.0 + g1.trace()) * (hh / 6.0);
        (next, tr)
    }
}

/// Integrate S′ = −iε^{h−1}A⋆(t)S from S(τ) = I, recording S at `samples` (sorted, within [τ, t_end]).
pub fn integrate_symbolic_flow<F: Fn(f64) -> Result<CMat>>(
    a_star: &F,
    cfg: &FlowConfig,
    tau: f64,
    t_end: f64,
    samples: &[f64],
) -> Result<SymbolicFlowResult> {
    if t_end < tau {
        return Err(HypError::InvalidInput("flow needs τ ≤ t_end".into()));
    }
    let pref = -I * cfg.prefactor();
    let mut out = integrate_raw(a_star, pref, cfg, tau, t_end, samples)?;
    if cfg.check_flow && t_end > tau {
        let tm = 0.5 * (tau + t_end);
        let first = integrate_raw(a_star, pref, cfg, tau, tm, &[])?;
        let second = integrate_raw(a_star, pref, cfg, tm, t_end, &[])?;
        let comp = second.last() * first.last();
        let full = out.last();
        out.flow_residual = Some(frob(&(full - comp)) / frob(full));
    }
    Ok(out)
}

fn integrate_raw<F: Fn(f64) -> Result<CMat>>(
    a_star: &F,
    pref: C64,
    cfg: &FlowConfig,
    tau: f64,
    t_end: f64,
    samples: &[f64],
) -> Result<SymbolicFlowResult> {
    let st = Stepper { gen: a_star, pref };
    let n = a_star(tau)?.nrows();
    let mut s = CMat::identity(n, n);
    let mut tr = c(0.0);
    let mut t = tau;
    let mut times = Vec::new();
    let mut mats = Vec::new();
    let mut trs = Vec::new();
    let mut targets: Vec<f64> = samples.iter().copied().filter(|&x| x >= tau && x <= t_end).collect();
    targets.push(t_end);
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup();
    let mut next_target = 0;
    while next_target < targets.len() && targets[next_target] <= tau {
        times.push(tau);
        mats.push(s.clone());
        trs.push(tr);
        next_target += 1;
    }
    let mut h = cfg.max_step.min((t_end - tau).max(f64::MIN_POSITIVE));
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut g_t = st.g(t)?;
    while next_target < targets.len() {
        let target = targets[next_target];
        let hmin = 1e-14 * (1.0 + t.abs());
        let hits = h >= target - t;
        let step = if hits { target - t } else { h };
        let g_q1 = st.g(t + 0.25 * step)?;
        let g_m = st.g(t + 0.5 * step)?;
        let g_q3 = st.g(t + 0.75 * step)?;
        let g_e = st.g(t + step)?;
        let (full, _) = Stepper::<F>::rk4(&g_t, &g_m, &g_e, &s, step);
        let (half, tr1) = Stepper::<F>::rk4(&g_t, &g_q1, &g_m, &s, 0.5 * step);
        let (two, tr2) = Stepper::<F>::rk4(&g_m, &g_q3, &g_e, &half, 0.5 * step);
        let diff = &two - &full;
        let err = frob(&diff) / 15.0;
        let scale = cfg.rtol * frob(&two) + cfg.atol;
        if !err.is_finite() {
            return Err(HypError::Numerical(format!("non-finite symbolic flow at t = {t}")));
        }
        if err <= scale {
            s = two + diff * c(1.0 / 15.0);
            tr += tr1 + tr2;
            t = if hits { target } else { t + step };
            g_t = g_e;
            steps += 1;
            while next_target < targets.len() && targets[next_target] <= t {
                times.push(targets[next_target]);
                mats.push(s.clone());
                trs.push(tr);
                next_target += 1;
            }
        } else {
            rejected += 1;
            if step <= hmin {
                return Err(HypError::NoConvergence {
                    what: "symbolic flow step size".into(),
                    iterations: steps + rejected,
                    residual: err / scale * cfg.rtol,
                });
            }
        }
        let fac = if err == 0.0 { 2.0 } else { (0.9 * (scale / err).powf(0.2)).clamp(0.2, 2.0) };
        h = (step * fac).min(cfg.max_step).max(hmin);
    }
    // det S loses ~u·Π‖col‖ to cancellation once S is strongly non-normal, so the
    // residual is measured against the Hadamard bound when that exceeds |det|
    let mut liou: f64 = 0.0;
    for (m, tr) in mats.iter().zip(&trs) {
        let det = linalg::det_lu(m);
        let expect = tr.exp();
        let hadamard: f64 = m.column_iter().map(|col| col.norm()).product();
        liou = liou.max((det.norm() - expect.norm()).abs() / expect.norm().max(hadamard));
    }
    Ok(SymbolicFlowResult {
        tau,
        times,
        s: mats,
        trace_integral: trs,
        flow_residual: None,
        liouville_residual: liou,
        steps,
        rejected,
    })
}

/// Bicharacteristic (x⋆, ξ⋆) on a uniform grid, with Hermite dense output.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub ts: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub xis: Vec<Vec<f64>>,
    dxs: Vec<Vec<f64>>,
    dxis: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.ts.len();
        if n == 1 || t <= self.ts[0] {
            return (self.xs[0].clone(), self.xis[0].clone());
        }
        if t >= self.ts[n - 1] {
            return (self.xs[n - 1].clone(), self.xis[n - 1].clone());
        }
        let dt = self.ts[1] - self.ts[0];
        let k = (((t - self.ts[0]) / dt).floor() as usize).min(n - 2);
        let s = (t - self.ts[k]) / dt;
        let (h00, h10, h01, h11) = (
            2.0 * s.powi(3) - 3.0 * s * s + 1.0,
            s.powi(3) - 2.0 * s * s + s,
            -2.0 * s.powi(3) + 3.0 * s * s,
            s.powi(3) - s * s,
        );
        let herm = |y: &[Vec<f64>], dy: &[Vec<f64>]| -> Vec<f64> {
            (0..y[k].len())
                .map(|i| h00 * y[k][i] + h10 * dt * dy[k][i] + h01 * y[k + 1][i] + h11 * dt * dy[k + 1][i])
                .collect()
        };
        (herm(&self.xs, &self.dxs), herm(&self.xis, &self.dxis))
    }
}

pub const BICHAR_FD_STEP: f64 = 1e-6;

/// RK4 solution of ∂_t x⋆ = −∂_ξμ(t, x₀ + ε^{1−h}x⋆, ξ⋆), ∂_t ξ⋆ = ε^{1−h}∂_xμ(…).
pub fn integrate_bicharacteristics<M: Fn(f64, &[f64], &[f64]) -> Result<f64>>(
    mu: &M,
    eps: f64,
    h: f64,
    x0: &[f64],
    t_span: (f64, f64),
    x: &[f64],
    xi: &[f64],
    n_steps: usize,
) -> Result<Trajectory> {
    let d = x.len();
    let scale = eps.powf(1.0 - h);
    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let xp: Vec<f64> = (0..d).map(|i| x0[i] + scale * y[i]).collect();
        let xs = &y[d..];
        let mut out = vec![0.0; 2 * d];
        for i in 0..d {
            let mut a = xs.to_vec();
            let mut b = xs.to_vec();
            a[i] += BICHAR_FD_STEP;
            b[i] -= BICHAR_FD_STEP;
            out[i] = -(mu(t, &xp, &a)? - mu(t, &xp, &b)?) / (2.0 * BICHAR_FD_STEP);
            let mut a = xp.clone();
            let mut b = xp.clone();
            a[i] += BICHAR_FD_STEP;
            b[i] -= BICHAR_FD_STEP;
            out[d + i] = scale * (mu(t, &a, xs)? - mu(t, &b, xs)?) / (2.0 * BICHAR_FD_STEP);
        }
        Ok(out)
    };
    let n_steps = n_steps.max(1);
    let dt = (t_span.1 - t_span.0) / n_steps as f64;
    let mut y: Vec<f64> = x.iter().chain(xi).copied().collect();
    let mut tr = Trajectory { ts: vec![], xs: vec![], xis: vec![], dxs: vec![], dxis: vec![] };
    let mut t = t_span.0;
    for k in 0..=n_steps {
        let f = rhs(t, &y)?;
        if y.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(HypError::Numerical(format!("bicharacteristic blew up at t = {t}")));
        }
        tr.ts.push(t);
        tr.xs.push(y[..d].to_vec());
        tr.xis.push(y[d..].to_vec());
        tr.dxs.push(f[..d].to_vec());
        tr.dxis.push(f[d..].to_vec());
        if k == n_steps {
            break;
        }
        let add = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(p, q)| p + a * q).collect() };
        let k2 = rhs(t + 0.5 * dt, &add(&y, &f, 0.5 * dt))?;
        let k3 = rhs(t + 0.5 * dt, &add(&y, &k2, 0.5 * dt))?;
        let k4 = rhs(t + dt, &add(&y, &k3, dt))?;
        for i in 0..2 * d {
            y[i] += dt / 6.0 * (f[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = t_span.0 + (k + 1) as f64 * dt;
    }
    Ok(tr)
}

#[derive(Clone, Debug)]
pub struct BlockReduction {
    /// Q with Q(A − μ)Q⁻¹ = diag(A₍₀₎, A₍₁₎), A₍₀₎ = [[0,1],[⋆,0]] for a trace-free pair.
    pub q: CMat,
    pub qinv: CMat,
    pub a0: CMat,
    pub a1: CMat,
    pub star: C64,
}

/// Isolate the eigenvalue pair nearest μ and bring its block to companion form.
pub fn block_reduce_2x2(a: &CMat, mu: f64, tol: f64) -> Result<BlockReduction> {
    let n = a.nrows();
    if n < 2 {
        return Err(HypError::InvalidInput("block reduction needs N ≥ 2".into()));
    }
    let ev = linalg::eigenvalues(a)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        (ev[i] - mu).norm().partial_cmp(&(ev[j] - mu).norm()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let cluster = [idx[0], idx[1]];
    if n > 2 {
        let sep = (ev[idx[2]] - mu).norm() - (ev[idx[1]] - mu).norm();
        if sep <= tol {
            return Err(HypError::Numerical("coalescing pair is not separated from the spectrum".into()));
        }
    }
    let (qs, qsinv) = linalg::invariant_split(a, &ev, &cluster)?;
    let shifted = &qs * (a - CMat::identity(n, n) * c(mu)) * &qsinv;
    let b = shifted.view((0, 0), (2, 2)).into_owned();
    let (a11, a12, a21) = (b[(0, 0)], b[(0, 1)], b[(1, 0)]);
    if a12.norm() < tol && a21.norm() < tol {
        return Err(HypError::Numerical(
            "block has no off-diagonal coupling: the pair would be smooth in time".into(),
        ));
    }
    let one = c(1.0);
    let zero = c(0.0);
    let m = if a12.norm() > a21.norm() {
        CMat::from_row_slice(2, 2, &[one / a12, zero, a11 / a12, one])
    } else {
        CMat::from_row_slice(2, 2, &[zero, one / a21, one, -a11 / a21])
    };
    let minv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| HypError::Numerical("singular companion transform".into()))?;
    let a0 = &m * &b * &minv;
    let mut big = CMat::identity(n, n);
    let mut biginv = CMat::identity(n, n);
    big.view_mut((0, 0), (2, 2)).copy_from(&m);
    biginv.view_mut((0, 0), (2, 2)).copy_from(&minv);
    let q = &big * qs;
    let qinv = qsinv * biginv;
    let a1 = if n > 2 { shifted.view((2, 2), (n - 2, n - 2)).into_owned() } else { CMat::zeros(0, 0) };
    Ok(BlockReduction { star: a0[(1, 0)], q, qinv, a0, a1 })
}

/// A⋆(t) = Q(A(ε^h t, x₀ + ε^{1−h}x⋆, ξ⋆) − μ)Q⁻¹ along the advected frame.
#[derive(Clone)]
pub struct FrameSampler {
    pub family: Arc<dyn SymbolFamily>,
    pub q: CMat,
    pub qinv: CMat,
    pub mu: f64,
    pub eps: f64,
    pub h: f64,
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub trajectory: Option<Trajectory>,
    /// Restrict to the leading 2×2 block.
    pub block_only: bool,
}

impl FrameSampler {
    /// The ℓ = 0 frame: Q = I, μ = 0, A⋆ = A(εt, x₀ + x, ξ).
    pub fn elliptic(family: Arc<dyn SymbolFamily>, eps: f64, x0: Vec<f64>, x: Vec<f64>, xi: Vec<f64>) -> Self {
        let n = family.dim();
        FrameSampler {
            family,
            q: CMat::identity(n, n),
            qinv: CMat::identity(n, n),
            mu: 0.0,
            eps,
            h: 1.0,
            x0,
            x,
            xi,
            trajectory: None,
            block_only: false,
        }
    }

    pub fn eval(&self, t: f64) -> Result<CMat> {
        let s = self.eps.powf(self.h) * t;
        let (xs, xis) = match &self.trajectory {
            Some(tr) => tr.at(s),
            None => (self.x.clone(), self.xi.clone()),
        };
        let sc = self.eps.powf(1.0 - self.h);
        let xp: Vec<f64> = self.x0.iter().zip(&xs).map(|(a, b)| a + sc * b).collect();
        let a = complexify(&self.family.symbol(s, &xp, &xis)?);
        let n = a.nrows();
        let m = &self.q * (a - CMat::identity(n, n) * c(self.mu)) * &self.qinv;
        if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(HypError::Numerical("singular frame transform".into()));
        }
        Ok(if self.block_only { m.view((0, 0), (2, 2)).into_owned() } else { m })
    }
}

/// Weights [[1, ε^{−ζ}],[ε^ζ, 1]] on the leading 2×2 block, 1 elsewhere.
fn weight(i: usize, j: usize, eps: f64, zeta: f64) -> f64 {
    match (i, j) {
        (0, 1) => eps.powf(-zeta),
        (1, 0) => eps.powf(zeta),
        _ => 1.0,
    }
}

/// Operator norm of ΛSΛ⁻¹ with Λ = diag(ε^ζ, 1, …): entries scaled by the inverse weights.
pub fn weighted_norm(s: &CMat, eps: f64, zeta: f64) -> f64 {
    let mut m = s.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[(i, j)] /= weight(i, j, eps, zeta);
        }
    }
    linalg::op_norm(&m)
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperBoundReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// d log(ratio)/d log(1 + t) over the last quarter of samples.
    pub late_log_slope: f64,
    /// No super-polynomial drift of the ratio (slope ≤ `POLY_SLOPE_CAP`).
    pub bounded: bool,
}

pub const POLY_SLOPE_CAP: f64 = 1.0;

fn late_slope(ts: &[f64], vals: &[f64]) -> f64 {
    let n = ts.len();
    let k0 = (3 * n) / 4;
    let (x, y): (Vec<f64>, Vec<f64>) = ts[k0.min(n.saturating_sub(2))..]
        .iter()
        .zip(&vals[k0.min(n.saturating_sub(2))..])
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| ((1.0 + t.abs()).ln(), v.ln()))
        .unzip();
    if x.len() < 2 {
        return 0.0;
    }
    linalg::linear_fit(&x, &y).0
}

/// Entry ratios |S_ij|/(W_ij e_{γ⁺}(τ;t)) for each sample.
pub fn verify_upper_bound(res: &SymbolicFlowResult, env: &GrowthEnvelope, eps: f64, zeta: f64) -> UpperBoundReport {
    let ratios: Vec<f64> = res
        .times
        .iter()
        .zip(&res.s)
        .map(|(&t, s)| {
            let e = env.eval(GammaChoice::Plus, res.tau, t);
            let mut m: f64 = 0.0;
            for i in 0..s.nrows() {
                for j in 0..s.ncols() {
                    m = m.max(s[(i, j)].norm() / (weight(i, j, eps, zeta) * e));
                }
            }
            m
        })
        .collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let slope = late_slope(&res.times, &ratios);
    UpperBoundReport {
        bounded: max_ratio.is_finite() && slope <= POLY_SLOPE_CAP,
        late_log_slope: slope,
        max_ratio,
        ratios,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub bounded_below: bool,
}

pub const LOWER_RATIO_FLOOR: f64 = 1e-3;

/// min over the supplied (S(0;T,x), ē(x)) pairs of ε^ζ|S ē|/e_{γ⁻}(0;T).
pub fn verify_lower_bound(
    finals: &[(CMat, Vec<C64>)],
    env: &GrowthEnvelope,
    tau: f64,
    t: f64,
    eps: f64,
    zeta: f64,
) -> LowerBoundReport {
    let e = env.eval(GammaChoice::Minus, tau, t);
    let ratios: Vec<f64> = finals
        .iter()
        .map(|(s, ebar)| {
            let v = crate::linalg::CVec::from_column_slice(ebar);
            (s * v).norm() * eps.powf(zeta) / e
        })
        .collect();
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    LowerBoundReport { bounded_below: min_ratio >= LOWER_RATIO_FLOOR, min_ratio, ratios }
}

/// Max |eigenvalue| of the Hermitian part of Q_μ U*MU Q_μ⁻¹ over the samples,
/// with U from the Schur form of the first sample and Q_μ = diag(1, μ⁻¹, …).
pub fn hermitian_growth_bound(samples: &[CMat], mu_scale: f64) -> Result<f64> {
    let first = samples.first().ok_or_else(|| HypError::InvalidInput("no samples".into()))?;
    let (u, _) = linalg::schur(first)?;
    let n = first.nrows();
    let mut g: f64 = 0.0;
    for m in samples {
        let mut t = u.adjoint() * m * &u;
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] *= mu_scale.powi(j as i32 - i as i32);
            }
        }
        for e in linalg::hermitian_part_eigs(&t) {
            g = g.max(e.abs());
        }
    }
    Ok(g)
}

/// Slope of log|S| against t^p.
pub fn fit_exponent(ts: &[f64], norms: &[f64], power: f64) -> f64 {
    let x: Vec<f64> = ts.iter().map(|t| t.powf(power)).collect();
    let y: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    linalg::linear_fit(&x, &y).0
}

/// Regression of log(ratio) against log|log ε| across a ladder: (C′, log C).
pub fn fit_lesssim(eps: &[f64], ratios: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = eps.iter().map(|e| e.ln().abs().ln()).collect();
    let y: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    linalg::linear_fit(&x, &y)
}

/// Model A⋆ for ℓ = 1/2: [[0, 1],[−ε^{2/3}(t − t⋆)f₀, 0]].
pub fn model_half(eps: f64, f0: f64, t_star: f64) -> impl Fn(f64) -> Result<CMat> + Send + Sync {
    let k = eps.powf(2.0 / 3.0) * f0;
    move |t| Ok(CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-k * (t - t_star)), c(0.0)]))
}

/// Model A⋆ for ℓ = 1: ε^{1/2} t [[0, 1],[−1, 0]], growth rate 1/2.
pub fn model_one(eps: f64) -> impl Fn(f64) -> Result<CMat> + Send + Sync {
    let k = eps.sqrt();
    move |t| Ok(CMat::from_row_slice(2, 2, &[c(0.0), c(k * t), c(-k * t), c(0.0)]))
}

/// Constant elliptic block [[0, 1],[−a, 0]], eigenvalues ±i√a.
pub fn model_zero(a: f64) -> impl Fn(f64) -> Result<CMat> + Send + Sync {
    move |_| Ok(CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-a), c(0.0)]))
}

/// D⁻¹𝐙(Θ(τ);Θ(t))D with Θ(s) = f₀^{1/3}(s − t⋆), D = diag(−iε^{1/3}f₀^{1/3}, 1).
pub fn airy_model_flow(eps: f64, f0: f64, t_star: f64, tau: f64, t: f64) -> Result<CMat> {
    let f3 = f0.cbrt();
    let theta = |s: f64| f3 * (s - t_star);
    let z = crate::airy::vector_airy(theta(tau), theta(t))?.z;
    let d = -I * eps.cbrt() * f3;
    Ok(CMat::from_row_slice(
        2,
        2,
        &[z[(0, 0)], z[(0, 1)] / d, z[(1, 0)] * d, z[(1, 1)]],
    ))
}

/// μ⋆(t, x, ξ) sampler for bicharacteristics, seeded at `lambda_init`.
pub fn mu_sampler(
    fam: Arc<dyn SymbolFamily>,
    lambda_init: f64,
    tol: f64,
) -> impl Fn(f64, &[f64], &[f64]) -> Result<f64> {
    move |t, x, xi| Ok(crate::branching::solve_mu_star(fam.as_ref(), t, x, xi, lambda_init, tol)?.0)
}

/// Everything needed to integrate and bound the flow at a classified witness.
#[derive(Clone)]
pub struct FlowSetup {
    pub sampler: FrameSampler,
    pub envelope: GrowthEnvelope,
    pub ell: f64,
    pub zeta: f64,
    /// Direction used for the lower bound, in frame coordinates.
    pub ebar: Vec<C64>,
    /// τ⋆ for transitions (unscaled time), 0 otherwise.
    pub tau_star: f64,
}

/// Frame and envelope for the witness of `cl`: Q = I, μ = 0 for ℓ = 0; the 2×2
/// companion reduction at the coalescing mean for ℓ = 1/2; μ-shift only for ℓ = 1.
/// `gamma` overrides (γ⁻, γ⁺) individually.
pub fn flow_setup(
    fam: Arc<dyn SymbolFamily>,
    cl: &crate::classifier::Classification,
    eps: f64,
    gamma: (Option<f64>, Option<f64>),
) -> Result<FlowSetup> {
    use crate::branching::{compute_branch, growth_rate, rescaled_t_star, BranchOptions, RateInputs};
    use crate::classifier::Regime;
    let w = cl
        .witness
        .as_ref()
        .ok_or_else(|| HypError::InvalidInput(format!("no flow for a {} verdict", cl.regime.label())))?;
    let (ell, h) = match (cl.ell, cl.h) {
        (Some(l), Some(h)) => (l, h),
        _ => return Err(HypError::InvalidInput(format!("no flow for a {} verdict", cl.regime.label()))),
    };
    let n = fam.dim();
    let zeros = vec![0.0; w.x.len()];
    let (sampler, rates, tau_star) = match cl.regime {
        Regime::Elliptic => {
            let s = FrameSampler::elliptic(fam.clone(), eps, w.x.clone(), zeros, w.xi.clone());
            (s, growth_rate(cl, &RateInputs::default())?, 0.0)
        }
        Regime::NonSemisimpleTransition => {
            let mu = w.lambda.re;
            let b = compute_branch(fam.as_ref(), &w.x, &w.xi, Some(mu), &BranchOptions::default())?;
            let a0 = complexify(&fam.symbol(0.0, &w.x, &w.xi)?);
            let red = block_reduce_2x2(&a0, b.mu, 1e-8)?;
            let s = FrameSampler {
                family: fam.clone(),
                q: red.q,
                qinv: red.qinv,
                mu: b.mu,
                eps,
                h,
                x0: w.x.clone(),
                x: zeros,
                xi: w.xi.clone(),
                trajectory: None,
                block_only: false,
            };
            let inputs = RateInputs { f0: Some(b.f0), ..Default::default() };
            (s, growth_rate(cl, &inputs)?, b.tau_star)
        }
        Regime::SemisimpleTransition => {
            let s = FrameSampler {
                family: fam.clone(),
                q: CMat::identity(n, n),
                qinv: CMat::identity(n, n),
                mu: w.lambda.re,
                eps,
                h,
                x0: w.x.clone(),
                x: zeros,
                xi: w.xi.clone(),
                trajectory: None,
                block_only: false,
            };
            (s, growth_rate(cl, &RateInputs::default())?, 0.0)
        }
        _ => unreachable!("regimes without ℓ were rejected above"),
    };
    let gp = gamma.1.unwrap_or(rates.1);
    // a γ⁺ override below γ⁻ drags γ⁻ along; the upper bound then reports the failure
    let gm = gamma.0.unwrap_or(rates.0).min(gp);
    let envelope = GrowthEnvelope::new(gm, gp, ell, rescaled_t_star(eps, h, tau_star))?;
    let mut ebar = vec![c(0.0); n];
    ebar[1.min(n - 1)] = c(1.0);
    Ok(FlowSetup { sampler, envelope, ell, zeta: crate::classifier::scale_zeta(ell), ebar, tau_star })
}

/// CSV rows (ε, x, ξ, τ, t, entry_ij_abs, envelope, ratio), one per sample and entry.
pub fn flow_csv_rows(
    res: &SymbolicFlowResult,
    env: &GrowthEnvelope,
    eps: f64,
    x: f64,
    xi: f64,
    zeta: f64,
) -> Vec<String> {
    let mut rows = Vec::new();
    for (&t, s) in res.times.iter().zip(&res.s) {
        let e = env.eval(GammaChoice::Plus, res.tau, t);
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                let a = s[(i, j)].norm();
                rows.push(format!(
                    "{eps:e},{x},{xi},{},{t},{i}{j},{a:e},{e:e},{:e}",
                    res.tau,
                    a / (weight(i, j, eps, zeta) * e)
                ));
            }
        }
    }
    rows
}

pub const FLOW_CSV_HEADER: &str = "eps,x,xi,tau,t,entry,entry_abs,envelope,ratio";
