//! Implicit branching data near a coalescence: the critical point μ⋆ of P in
//! λ, the transition time τ⋆, the e-factor of the square-root normal form
//! (λ − μ)² = −(t − τ⋆)e, growth rates γ± and the envelopes e_γ(τ; t).

use serde::Serialize;

use crate::classifier::{Classification, Regime};
use crate::error::{HypError, Result};
use crate::linalg::{self, c, complexify, C64};
use crate::system_model::{charpoly_coeff_jet, SymbolFamily};

pub const MAX_NEWTON: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchOptions {
    /// Newton stopping tolerance on |∂_λP| and |P|.
    pub tol: f64,
    /// Time step of the finite-difference t-derivatives.
    pub dt: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions { tol: 1e-10, dt: 1e-4 }
    }
}

fn coeffs<S: SymbolFamily + ?Sized>(fam: &S, t: f64, x: &[f64], xi: &[f64]) -> Result<Vec<C64>> {
    Ok(linalg::charpoly_coeffs(&complexify(&fam.symbol(t, x, xi)?)))
}

/// (P, ∂_λP, ∂²_λP) at real λ.
pub fn p_lambda_jet<S: SymbolFamily + ?Sized>(fam: &S, t: f64, x: &[f64], xi: &[f64], lambda: f64) -> Result<(f64, f64, f64)> {
    let (p, pl, pll) = linalg::poly_eval3(&coeffs(fam, t, x, xi)?, c(lambda));
    Ok((p.re, pl.re, pll.re))
}

/// ∂_tP at real λ.
pub fn p_t<S: SymbolFamily + ?Sized>(fam: &S, t: f64, x: &[f64], xi: &[f64], lambda: f64, dt: f64) -> Result<f64> {
    let [_, d1, _] = charpoly_coeff_jet(fam, t, x, xi, dt)?;
    Ok(linalg::poly_eval(&d1, c(lambda)).re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonDiag {
    pub iterations: usize,
    pub residual: f64,
}

/// Newton on λ ↦ ∂_λP(t, x, ξ, λ).
pub fn solve_mu_star<S: SymbolFamily + ?Sized>(
    fam: &S,
    t: f64,
    x: &[f64],
    xi: &[f64],
    lambda_init: f64,
    tol: f64,
) -> Result<(f64, NewtonDiag)> {
    let cs = coeffs(fam, t, x, xi)?;
    let mut lam = lambda_init;
    for it in 0..=MAX_NEWTON {
        let (_, pl, pll) = linalg::poly_eval3(&cs, c(lam));
        if pl.re.abs() <= tol {
            return Ok((lam, NewtonDiag { iterations: it, residual: pl.re.abs() }));
        }
        if pll.re == 0.0 || !lam.is_finite() {
            break;
        }
        lam -= pl.re / pll.re;
    }
    let (_, pl, _) = linalg::poly_eval3(&cs, c(lam));
    Err(HypError::NoConvergence {
        what: "critical point μ⋆".into(),
        iterations: MAX_NEWTON,
        residual: pl.re.abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauStar {
    pub tau: f64,
    pub mu: f64,
    pub diag: NewtonDiag,
    /// τ⋆ < −tol: the state is already past the transition at t = 0.
    pub negative: bool,
}

/// Newton on t ↦ P(t, μ⋆(t)). Since ∂_λP(t, μ⋆) = 0 its derivative is ∂_tP.
pub fn solve_tau_star<S: SymbolFamily + ?Sized>(
    fam: &S,
    x: &[f64],
    xi: &[f64],
    lambda_init: f64,
    opts: &BranchOptions,
) -> Result<TauStar> {
    let mut t = 0.0;
    let mut mu = lambda_init;
    let mut g = f64::INFINITY;
    for it in 0..=MAX_NEWTON {
        mu = solve_mu_star(fam, t, x, xi, mu, opts.tol)?.0;
        g = p_lambda_jet(fam, t, x, xi, mu)?.0;
        if g.abs() <= opts.tol {
            return Ok(TauStar {
                tau: t,
                mu,
                diag: NewtonDiag { iterations: it, residual: g.abs() },
                negative: t < -opts.tol,
            });
        }
        let gt = p_t(fam, t, x, xi, mu, opts.dt)?;
        if gt == 0.0 || !gt.is_finite() {
            break;
        }
        t -= g / gt;
        if !t.is_finite() || t.abs() > 1e6 {
            break;
        }
    }
    Err(HypError::NoConvergence { what: "transition time τ⋆".into(), iterations: MAX_NEWTON, residual: g.abs() })
}

/// e = e₁/e₂ with e₁ = ∫₀¹ ∂_tP((1−s)τ⋆ + st, μ) ds and e₂ = ∫₀¹ (1−s) ∂²_λP(t, (1−s)μ + sλ) ds.
pub fn eval_e_factor<S: SymbolFamily + ?Sized>(
    fam: &S,
    tau_star: f64,
    mu: f64,
    t: f64,
    x: &[f64],
    xi: &[f64],
    lambda: f64,
    opts: &BranchOptions,
) -> Result<f64> {
    let (nodes, weights) = linalg::gauss_legendre_01(16);
    let mut e1 = 0.0;
    if t == tau_star {
        e1 = p_t(fam, t, x, xi, mu, opts.dt)?;
    } else {
        for (s, w) in nodes.iter().zip(&weights) {
            e1 += w * p_t(fam, (1.0 - s) * tau_star + s * t, x, xi, mu, opts.dt)?;
        }
    }
    let cs = coeffs(fam, t, x, xi)?;
    let mut e2 = 0.0;
    for (s, w) in nodes.iter().zip(&weights) {
        let (_, _, pll) = linalg::poly_eval3(&cs, c((1.0 - s) * mu + s * lambda));
        e2 += w * (1.0 - s) * pll.re;
    }
    if e2.abs() < opts.tol {
        return Err(HypError::Numerical(format!("degenerate quadratic part: e₂ = {e2:.3e}")));
    }
    Ok(e1 / e2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchData {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub mu: f64,
    pub tau_star: f64,
    /// e at (τ⋆, x, ξ, μ).
    pub e0: f64,
    /// e at (0, x, ξ, μ).
    pub f0: f64,
    pub newton: NewtonDiag,
    /// |P| and |∂_λP| at (τ⋆, μ).
    pub p_residual: f64,
    pub pl_residual: f64,
    pub negative: bool,
}

/// Mean of the closest pair of real parts in the t = 0 spectrum.
pub fn coalescing_pair_mean<S: SymbolFamily + ?Sized>(fam: &S, t: f64, x: &[f64], xi: &[f64]) -> Result<f64> {
    let ev = linalg::eigenvalues_real(&fam.symbol(t, x, xi)?)?;
    if ev.len() < 2 {
        return Err(HypError::InvalidInput("branching needs N ≥ 2".into()));
    }
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            let d = (ev[i] - ev[j]).norm();
            if d < best.0 {
                best = (d, 0.5 * (ev[i].re + ev[j].re));
            }
        }
    }
    Ok(best.1)
}

pub fn compute_branch<S: SymbolFamily + ?Sized>(
    fam: &S,
    x: &[f64],
    xi: &[f64],
    lambda_init: Option<f64>,
    opts: &BranchOptions,
) -> Result<BranchData> {
    let l0 = match lambda_init {
        Some(l) => l,
        None => coalescing_pair_mean(fam, 0.0, x, xi)?,
    };
    let ts = solve_tau_star(fam, x, xi, l0, opts)?;
    let (p, pl, _) = p_lambda_jet(fam, ts.tau, x, xi, ts.mu)?;
    let e0 = eval_e_factor(fam, ts.tau, ts.mu, ts.tau, x, xi, ts.mu, opts)?;
    let f0 = eval_e_factor(fam, ts.tau, ts.mu, 0.0, x, xi, ts.mu, opts)?;
    Ok(BranchData {
        x: x.to_vec(),
        xi: xi.to_vec(),
        mu: ts.mu,
        tau_star: ts.tau,
        e0,
        f0,
        newton: ts.diag,
        p_residual: p.abs(),
        pl_residual: pl.abs(),
        negative: ts.negative,
    })
}

/// λ± = μ ± i((t − τ⋆)e₀)^{1/2} past the transition, real before it.
pub fn branch_eigenvalues(b: &BranchData, t: f64) -> (C64, C64) {
    let s = (t - b.tau_star) * b.e0;
    if s >= 0.0 {
        let r = s.sqrt();
        (C64::new(b.mu, r), C64::new(b.mu, -r))
    } else {
        let r = (-s).sqrt();
        (c(b.mu + r), c(b.mu - r))
    }
}

/// Lipschitz constant of max Im λ over a δ-ball around the witness, by sampling.
pub fn estimate_c0<S: SymbolFamily + ?Sized>(fam: &S, x0: &[f64], xi0: &[f64], delta: f64, samples: usize) -> Result<f64> {
    let top = |x: &[f64], xi: &[f64]| -> Result<f64> {
        Ok(linalg::eigenvalues_real(&fam.symbol(0.0, x, xi)?)?
            .iter()
            .fold(f64::NEG_INFINITY, |m, z| m.max(z.im)))
    };
    let g0 = top(x0, xi0)?;
    let mut c0: f64 = 0.0;
    let d = x0.len();
    for k in 1..=samples {
        let r = delta * k as f64 / samples as f64;
        for j in 0..d {
            for sgn in [-1.0, 1.0] {
                let mut x = x0.to_vec();
                x[j] += sgn * r;
                c0 = c0.max((top(&x, xi0)? - g0).abs() / r);
                let mut xi = xi0.to_vec();
                xi[j] += sgn * r;
                c0 = c0.max((top(x0, &xi)? - g0).abs() / r);
            }
        }
    }
    Ok(c0)
}

/// Rate data used to compute γ± for a classified witness.
#[derive(Clone, Debug, Default)]
pub struct RateInputs {
    /// ℓ = 1/2: f₀ at the sampled point.
    pub f0: Option<f64>,
    /// ℓ = 0: Lipschitz constant and offset |x − x₀| + |ξ − ξ₀|.
    pub c0: f64,
    pub offset: f64,
}

/// (γ⁻, γ⁺) for the classified regime.
pub fn growth_rate(cl: &Classification, inputs: &RateInputs) -> Result<(f64, f64)> {
    match cl.regime {
        Regime::Elliptic => {
            let w = cl
                .witness
                .as_ref()
                .ok_or_else(|| HypError::InvalidInput("elliptic classification without witness".into()))?;
            let g = w.lambda.im.abs();
            let d = inputs.c0 * inputs.offset;
            Ok((g - d, g + d))
        }
        Regime::NonSemisimpleTransition => {
            let f0 = inputs
                .f0
                .ok_or_else(|| HypError::InvalidInput("ℓ = 1/2 rate needs f₀".into()))?;
            if f0 <= 0.0 {
                return Err(HypError::Numerical(format!("f₀ = {f0:.3e} is not positive")));
            }
            let g = 2.0 / 3.0 * f0.sqrt();
            Ok((g, g))
        }
        Regime::SemisimpleTransition => {
            let jet = cl
                .jet
                .as_ref()
                .ok_or_else(|| HypError::InvalidInput("ℓ = 1 rate needs the jet".into()))?;
            let g = semisimple_rate(jet.p_ll.re, jet.p_tl.re, jet.p_tt.re)?;
            Ok((g, g))
        }
        Regime::HyperbolicPersistent | Regime::Indeterminate => Err(HypError::InvalidInput(format!(
            "no growth rate for regime {}",
            cl.regime.label()
        ))),
    }
}

/// ½ Im ∂_tλ₊ where λ − λ₀ = t·r and ½P_λλ r² + P_tλ r + ½P_tt = 0.
pub fn semisimple_rate(p_ll: f64, p_tl: f64, p_tt: f64) -> Result<f64> {
    let disc = p_tt * p_ll - p_tl * p_tl;
    if p_ll == 0.0 || disc <= 0.0 {
        return Err(HypError::Numerical("semisimple branch does not leave the real axis".into()));
    }
    Ok(disc.sqrt() / (2.0 * p_ll.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GammaChoice {
    Minus,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthEnvelope {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub ell: f64,
    pub t_star: f64,
}

impl GrowthEnvelope {
    pub fn new(gamma_minus: f64, gamma_plus: f64, ell: f64, t_star: f64) -> Result<Self> {
        if gamma_minus > gamma_plus || t_star < 0.0 {
            return Err(HypError::InvalidInput("need γ⁻ ≤ γ⁺ and t⋆ ≥ 0".into()));
        }
        Ok(GrowthEnvelope { gamma_minus, gamma_plus, ell, t_star })
    }

    /// γ((t − t⋆)₊^{ℓ+1} − (τ − t⋆)₊^{ℓ+1}).
    pub fn exponent(&self, choice: GammaChoice, tau: f64, t: f64) -> f64 {
        let g = match choice {
            GammaChoice::Minus => self.gamma_minus,
            GammaChoice::Plus => self.gamma_plus,
        };
        let p = |s: f64| (s - self.t_star).max(0.0).powf(self.ell + 1.0);
        g * (p(t) - p(tau))
    }

    pub fn eval(&self, choice: GammaChoice, tau: f64, t: f64) -> f64 {
        self.exponent(choice, tau, t).exp()
    }
}

/// t⋆ in the rescaled time of a frame with exponent h: ε^{−h}θ⋆.
pub fn rescaled_t_star(eps: f64, h: f64, theta_star: f64) -> f64 {
    eps.powf(-h) * theta_star.max(0.0)
}
