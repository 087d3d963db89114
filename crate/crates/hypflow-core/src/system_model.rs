//! Quasi-linear systems ∂_t u + Σ A_j(t,x,u) ∂_j u = F(t,x,u), reference
//! solutions, principal symbols and characteristic-polynomial jets.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{HypError, Result};
use crate::linalg::{self, complexify, C64, CMat, RMat, RVec};

pub type FluxFn = Arc<dyn Fn(usize, f64, &[f64], &[f64]) -> RMat + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> RVec + Send + Sync>;
pub type FluxDuFn = Arc<dyn Fn(usize, f64, &[f64], &[f64], &[f64]) -> RMat + Send + Sync>;
pub type SourceDuFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64]) -> RVec + Send + Sync>;
pub type StateFn = Arc<dyn Fn(f64, &[f64]) -> RVec + Send + Sync>;
pub type InitFn = Arc<dyn Fn(&[f64]) -> RVec + Send + Sync>;

/// Relative step of the u-derivative fallback.
pub const DU_STEP: f64 = 1e-5;

#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub space_dim: usize,
    pub state_dim: usize,
    flux: FluxFn,
    source: SourceFn,
    flux_du: Option<FluxDuFn>,
    source_du: Option<SourceDuFn>,
    /// Only the symbol is meaningful; no time evolution is attempted.
    pub symbol_only: bool,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("space_dim", &self.space_dim)
            .field("state_dim", &self.state_dim)
            .field("symbol_only", &self.symbol_only)
            .finish()
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        space_dim: usize,
        state_dim: usize,
        flux: impl Fn(usize, f64, &[f64], &[f64]) -> RMat + Send + Sync + 'static,
        source: impl Fn(f64, &[f64], &[f64]) -> RVec + Send + Sync + 'static,
    ) -> Self {
        SystemSpec {
            name: name.into(),
            space_dim,
            state_dim,
            flux: Arc::new(flux),
            source: Arc::new(source),
            flux_du: None,
            source_du: None,
            symbol_only: false,
        }
    }

    pub fn with_flux_du(
        mut self,
        f: impl Fn(usize, f64, &[f64], &[f64], &[f64]) -> RMat + Send + Sync + 'static,
    ) -> Self {
        self.flux_du = Some(Arc::new(f));
        self
    }

    pub fn with_source_du(
        mut self,
        f: impl Fn(f64, &[f64], &[f64], &[f64]) -> RVec + Send + Sync + 'static,
    ) -> Self {
        self.source_du = Some(Arc::new(f));
        self
    }

    pub fn symbol_only(mut self) -> Self {
        self.symbol_only = true;
        self
    }

    pub fn has_analytic_du(&self) -> bool {
        self.flux_du.is_some() && self.source_du.is_some()
    }

    pub fn flux(&self, j: usize, t: f64, x: &[f64], u: &[f64]) -> RMat {
        (self.flux)(j, t, x, u)
    }

    pub fn source(&self, t: f64, x: &[f64], u: &[f64]) -> RVec {
        (self.source)(t, x, u)
    }

    fn du_step(u: &[f64], w: &[f64]) -> f64 {
        let un = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let wn = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if wn == 0.0 {
            0.0
        } else {
            DU_STEP * (1.0 + un) / wn
        }
    }

    /// Directional derivative (∂_u A_j)(u)[w].
    pub fn flux_du(&self, j: usize, t: f64, x: &[f64], u: &[f64], w: &[f64]) -> RMat {
        if let Some(f) = &self.flux_du {
            return f(j, t, x, u, w);
        }
        let h = Self::du_step(u, w);
        if h == 0.0 {
            return RMat::zeros(self.state_dim, self.state_dim);
        }
        let up: Vec<f64> = u.iter().zip(w).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - h * b).collect();
        (self.flux(j, t, x, &up) - self.flux(j, t, x, &um)) / (2.0 * h)
    }

    /// Directional derivative (∂_u F)(u)[w].
    pub fn source_du(&self, t: f64, x: &[f64], u: &[f64], w: &[f64]) -> RVec {
        if let Some(f) = &self.source_du {
            return f(t, x, u, w);
        }
        let h = Self::du_step(u, w);
        if h == 0.0 {
            return RVec::zeros(self.state_dim);
        }
        let up: Vec<f64> = u.iter().zip(w).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - h * b).collect();
        (self.source(t, x, &up) - self.source(t, x, &um)) / (2.0 * h)
    }

    /// Σ ξ_j A_j(t, x, u).
    pub fn symbol_at(&self, t: f64, x: &[f64], u: &[f64], xi: &[f64]) -> RMat {
        let n = self.state_dim;
        let mut a = RMat::zeros(n, n);
        for (j, &k) in xi.iter().enumerate() {
            if k != 0.0 {
                a += self.flux(j, t, x, u) * k;
            }
        }
        a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Domain {
    Periodic { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Periodic { .. } => x.iter().all(|v| v.is_finite()),
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
        }
    }
}

#[derive(Clone)]
pub enum TimeExtension {
    /// φ(t, x) known in closed form (or interpolated from a simulation).
    Given(StateFn),
    /// Second-order Taylor expansion in t, with φ_t, φ_tt read off the PDE.
    Taylor,
    None,
}

#[derive(Clone)]
pub struct ReferenceSolution {
    initial: InitFn,
    pub extension: TimeExtension,
    pub domain: Domain,
}

impl fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ext = match self.extension {
            TimeExtension::Given(_) => "given",
            TimeExtension::Taylor => "taylor",
            TimeExtension::None => "none",
        };
        f.debug_struct("ReferenceSolution")
            .field("extension", &ext)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Centered difference with one Richardson level, O(h⁴).
pub fn richardson_diff<F: FnMut(f64) -> RVec>(mut f: F, x: f64, h: f64) -> RVec {
    let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let h2 = 0.5 * h;
    let d2 = (f(x + h2) - f(x - h2)) / (2.0 * h2);
    (d2 * 4.0 - d1) / 3.0
}

const X_STEP: f64 = 1e-3;
const T_STEP_FLUX: f64 = 1e-5;

impl ReferenceSolution {
    pub fn new(initial: impl Fn(&[f64]) -> RVec + Send + Sync + 'static, domain: Domain) -> Self {
        ReferenceSolution {
            initial: Arc::new(initial),
            extension: TimeExtension::Taylor,
            domain,
        }
    }

    /// Reference with φ(t, x) known for all t; φ(0, ·) is read from it.
    pub fn closed_form(
        phi: impl Fn(f64, &[f64]) -> RVec + Send + Sync + 'static,
        domain: Domain,
    ) -> Self {
        let phi: StateFn = Arc::new(phi);
        let p0 = phi.clone();
        ReferenceSolution {
            initial: Arc::new(move |x| p0(0.0, x)),
            extension: TimeExtension::Given(phi),
            domain,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.extension = TimeExtension::None;
        self
    }

    pub fn initial(&self, x: &[f64]) -> RVec {
        (self.initial)(x)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(HypError::Domain(format!("x = {x:?} outside {:?}", self.domain)))
        }
    }

    /// Partial derivative ∂_j of a state field.
    fn dx<F: Fn(&[f64]) -> RVec>(f: F, x: &[f64], j: usize) -> RVec {
        let mut y = x.to_vec();
        richardson_diff(
            |s| {
                y[j] = s;
                f(&y)
            },
            x[j],
            X_STEP,
        )
    }

    fn phi1(&self, sys: &SystemSpec, x: &[f64]) -> RVec {
        let u = self.initial(x);
        let mut r = sys.source(0.0, x, u.as_slice());
        for j in 0..sys.space_dim {
            let d = Self::dx(|y| self.initial(y), x, j);
            r -= sys.flux(j, 0.0, x, u.as_slice()) * d;
        }
        r
    }

    /// (φ, ∂_tφ, ∂²_tφ) at t = 0 from the system itself.
    pub fn taylor(&self, sys: &SystemSpec, x: &[f64]) -> Result<[RVec; 3]> {
        self.check(x)?;
        let u = self.initial(x);
        let us = u.as_slice();
        let p1 = self.phi1(sys, x);
        let w = p1.as_slice();
        let n = sys.state_dim;
        let mut p2 = RVec::zeros(n);
        for j in 0..sys.space_dim {
            let d0 = Self::dx(|y| self.initial(y), x, j);
            let d1 = Self::dx(|y| self.phi1(sys, y), x, j);
            let at = (sys.flux(j, T_STEP_FLUX, x, us) - sys.flux(j, -T_STEP_FLUX, x, us))
                / (2.0 * T_STEP_FLUX);
            let a_dot = at + sys.flux_du(j, 0.0, x, us, w);
            p2 -= a_dot * d0 + sys.flux(j, 0.0, x, us) * d1;
        }
        let ft = (sys.source(T_STEP_FLUX, x, us) - sys.source(-T_STEP_FLUX, x, us))
            / (2.0 * T_STEP_FLUX);
        p2 += ft + sys.source_du(0.0, x, us, w);
        Ok([u, p1, p2])
    }

    pub fn at(&self, sys: &SystemSpec, t: f64, x: &[f64]) -> Result<RVec> {
        self.check(x)?;
        match &self.extension {
            TimeExtension::Given(f) => Ok(f(t, x)),
            _ if t == 0.0 => Ok(self.initial(x)),
            TimeExtension::Taylor => {
                let [a, b, c] = self.taylor(sys, x)?;
                Ok(a + b * t + c * (0.5 * t * t))
            }
            TimeExtension::None => Err(HypError::Domain(
                "reference solution has no time extension".into(),
            )),
        }
    }

    /// φ at several times for a fixed x (Taylor data computed once).
    pub fn path(&self, sys: &SystemSpec, ts: &[f64], x: &[f64]) -> Result<Vec<RVec>> {
        self.check(x)?;
        match &self.extension {
            TimeExtension::Given(f) => Ok(ts.iter().map(|&t| f(t, x)).collect()),
            TimeExtension::Taylor => {
                let [a, b, c] = self.taylor(sys, x)?;
                Ok(ts
                    .iter()
                    .map(|&t| &a + &b * t + &c * (0.5 * t * t))
                    .collect())
            }
            TimeExtension::None => {
                if ts.iter().all(|&t| t == 0.0) {
                    Ok(ts.iter().map(|_| self.initial(x)).collect())
                } else {
                    Err(HypError::Domain(
                        "reference solution has no time extension".into(),
                    ))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CotangentPoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub lambda: C64,
}

impl CotangentPoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>, lambda: C64) -> Result<Self> {
        check_xi(&xi)?;
        Ok(CotangentPoint { x, xi, lambda })
    }
}

fn check_xi(xi: &[f64]) -> Result<()> {
    if xi.iter().all(|v| *v == 0.0) {
        Err(HypError::InvalidInput("ξ must be nonzero".into()))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalSymbolEval {
    pub a: RMat,
    pub t: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

/// A family of real N×N matrices A(t, x, ξ), 1-homogeneous in ξ.
pub trait SymbolFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn symbol(&self, t: f64, x: &[f64], xi: &[f64]) -> Result<RMat>;

    fn symbols_in_time(&self, ts: &[f64], x: &[f64], xi: &[f64]) -> Result<Vec<RMat>> {
        ts.iter().map(|&t| self.symbol(t, x, xi)).collect()
    }

    fn label(&self) -> String {
        "symbol".into()
    }
}

/// The symbol of a system linearized at a reference solution.
#[derive(Clone, Debug)]
pub struct LinearizedSymbol {
    pub sys: SystemSpec,
    pub phi: ReferenceSolution,
}

impl LinearizedSymbol {
    pub fn new(sys: SystemSpec, phi: ReferenceSolution) -> Self {
        LinearizedSymbol { sys, phi }
    }
}

impl SymbolFamily for LinearizedSymbol {
    fn dim(&self) -> usize {
        self.sys.state_dim
    }
    fn space_dim(&self) -> usize {
        self.sys.space_dim
    }
    fn symbol(&self, t: f64, x: &[f64], xi: &[f64]) -> Result<RMat> {
        let u = self.phi.at(&self.sys, t, x)?;
        Ok(self.sys.symbol_at(t, x, u.as_slice(), xi))
    }
    fn symbols_in_time(&self, ts: &[f64], x: &[f64], xi: &[f64]) -> Result<Vec<RMat>> {
        let us = self.phi.path(&self.sys, ts, x)?;
        Ok(ts
            .iter()
            .zip(us)
            .map(|(&t, u)| self.sys.symbol_at(t, x, u.as_slice(), xi))
            .collect())
    }
    fn label(&self) -> String {
        self.sys.name.clone()
    }
}

pub type SymbolFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> RMat + Send + Sync>;

/// A symbol family given directly as a closure.
#[derive(Clone)]
pub struct ClosureSymbol {
    pub name: String,
    pub n: usize,
    pub d: usize,
    f: SymbolFn,
}

impl ClosureSymbol {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        d: usize,
        f: impl Fn(f64, &[f64], &[f64]) -> RMat + Send + Sync + 'static,
    ) -> Self {
        ClosureSymbol { name: name.into(), n, d, f: Arc::new(f) }
    }
}

impl fmt::Debug for ClosureSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosureSymbol({}, {}×{})", self.name, self.n, self.n)
    }
}

impl SymbolFamily for ClosureSymbol {
    fn dim(&self) -> usize {
        self.n
    }
    fn space_dim(&self) -> usize {
        self.d
    }
    fn symbol(&self, t: f64, x: &[f64], xi: &[f64]) -> Result<RMat> {
        Ok((self.f)(t, x, xi))
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

pub fn eval_principal_symbol(
    sys: &SystemSpec,
    phi: &ReferenceSolution,
    t: f64,
    x: &[f64],
    xi: &[f64],
) -> Result<PrincipalSymbolEval> {
    check_xi(xi)?;
    let u = phi.at(sys, t, x)?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(HypError::Domain(format!("φ not finite at t={t}, x={x:?}")));
    }
    Ok(PrincipalSymbolEval {
        a: sys.symbol_at(t, x, u.as_slice(), xi),
        t,
        x: x.to_vec(),
        xi: xi.to_vec(),
    })
}

pub fn eval_symbol<S: SymbolFamily + ?Sized>(
    fam: &S,
    t: f64,
    x: &[f64],
    xi: &[f64],
) -> Result<PrincipalSymbolEval> {
    check_xi(xi)?;
    Ok(PrincipalSymbolEval { a: fam.symbol(t, x, xi)?, t, x: x.to_vec(), xi: xi.to_vec() })
}

/// det(λI − A) by LU on the complexified matrix.
pub fn eval_charpoly(a: &PrincipalSymbolEval, lambda: C64) -> C64 {
    let n = a.a.nrows();
    let m = CMat::identity(n, n) * lambda - complexify(&a.a);
    linalg::det_lu(&m)
}

pub fn spectrum(a: &PrincipalSymbolEval) -> Result<Vec<C64>> {
    linalg::eigenvalues_real(&a.a)
}

pub fn hyperbolicity_test(a: &PrincipalSymbolEval, tol: f64) -> Result<bool> {
    Ok(spectrum(a)?.iter().all(|z| z.im.abs() <= tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JetSteps {
    pub dt: f64,
}

impl Default for JetSteps {
    fn default() -> Self {
        JetSteps { dt: 1e-4 }
    }
}

/// Below this step the finite-difference time derivatives are noise dominated.
pub const JET_NOISE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharPolyJet {
    pub p: C64,
    pub p_l: C64,
    pub p_ll: C64,
    pub p_t: C64,
    pub p_tt: C64,
    pub p_tl: C64,
    pub point: CotangentPoint,
    pub t: f64,
    pub method: String,
    pub dt: f64,
    pub noise_warning: bool,
}

impl CharPolyJet {
    /// Largest imaginary part among the six values.
    pub fn max_imag(&self) -> f64 {
        [self.p, self.p_l, self.p_ll, self.p_t, self.p_tt, self.p_tl]
            .iter()
            .fold(0.0f64, |m, z| m.max(z.im.abs()))
    }
}

/// Characteristic coefficients together with their first and second t-derivatives.
pub fn charpoly_coeff_jet<S: SymbolFamily + ?Sized>(
    fam: &S,
    t: f64,
    x: &[f64],
    xi: &[f64],
    dt: f64,
) -> Result<[Vec<C64>; 3]> {
    let h = dt;
    let ts = [t, t - h, t + h, t - 0.5 * h, t + 0.5 * h];
    let mats = fam.symbols_in_time(&ts, x, xi)?;
    let cs: Vec<Vec<C64>> = mats.iter().map(|m| linalg::charpoly_coeffs(&complexify(m))).collect();
    let k = cs[0].len();
    let mut d1 = vec![C64::new(0.0, 0.0); k];
    let mut d2 = vec![C64::new(0.0, 0.0); k];
    for i in 0..k {
        let (c0, cm, cp, cmh, cph) = (cs[0][i], cs[1][i], cs[2][i], cs[3][i], cs[4][i]);
        let a1 = (cp - cm) / (2.0 * h);
        let b1 = (cph - cmh) / h;
        d1[i] = (b1 * 4.0 - a1) / 3.0;
        let a2 = (cp - c0 * 2.0 + cm) / (h * h);
        let b2 = (cph - c0 * 2.0 + cmh) / (0.25 * h * h);
        d2[i] = (b2 * 4.0 - a2) / 3.0;
    }
    Ok([cs[0].clone(), d1, d2])
}

pub fn charpoly_jet<S: SymbolFamily + ?Sized>(
    fam: &S,
    omega: &CotangentPoint,
    t: f64,
    steps: JetSteps,
) -> Result<CharPolyJet> {
    check_xi(&omega.xi)?;
    let [c0, c1, c2] = charpoly_coeff_jet(fam, t, &omega.x, &omega.xi, steps.dt)?;
    let l = omega.lambda;
    let (p, p_l, p_ll) = linalg::poly_eval3(&c0, l);
    let (p_t, p_tl, _) = linalg::poly_eval3(&c1, l);
    let p_tt = linalg::poly_eval(&c2, l);
    let noise_warning = steps.dt < JET_NOISE_FLOOR;
    let mut method = format!(
        "lambda: analytic-coefficients; t: finite-difference (h={:e}, richardson=2)",
        steps.dt
    );
    if noise_warning {
        method.push_str("; warning: step below noise floor");
    }
    Ok(CharPolyJet {
        p,
        p_l,
        p_ll,
        p_t,
        p_tt,
        p_tl,
        point: omega.clone(),
        t,
        method,
        dt: steps.dt,
        noise_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn vdw_like() -> SystemSpec {
        // p(u) = u³/3 − u
        SystemSpec::new(
            "vdw",
            1,
            2,
            |_, _, _, u| RMat::from_row_slice(2, 2, &[0.0, 1.0, u[0] * u[0] - 1.0, 0.0]),
            |_, _, _| RVec::zeros(2),
        )
    }

    #[test]
    fn vdw_symbol_is_companion() {
        let sys = vdw_like();
        let phi = ReferenceSolution::new(
            |_| RVec::from_vec(vec![0.5, 0.0]),
            Domain::Periodic { lo: -3.2, hi: 3.2 },
        );
        let a = eval_principal_symbol(&sys, &phi, 0.0, &[0.0], &[1.0]).unwrap();
        assert_eq!(a.a, RMat::from_row_slice(2, 2, &[0.0, 1.0, -0.75, 0.0]));
        assert!(eval_principal_symbol(&sys, &phi, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn taylor_extension_matches_exact_transport() {
        // u_t + u_x = 0 componentwise ⇒ φ(t,x) = φ0(x − t)
        let sys = SystemSpec::new(
            "transport",
            1,
            1,
            |_, _, _, _| RMat::identity(1, 1),
            |_, _, _| RVec::zeros(1),
        );
        let phi = ReferenceSolution::new(
            |x| RVec::from_vec(vec![x[0].sin()]),
            Domain::Periodic { lo: 0.0, hi: 6.3 },
        );
        let t = 1e-2;
        let u = phi.at(&sys, t, &[0.4]).unwrap();
        assert!((u[0] - (0.4f64 - t).sin()).abs() < 1e-6);
    }

    #[test]
    fn jet_of_vdw_at_sonic_point() {
        let sys = vdw_like();
        let phi = ReferenceSolution::new(
            |x| RVec::from_vec(vec![1.0 + 0.1 * (1.0 - x[0].cos()), 0.5 * x[0].sin()]),
            Domain::Periodic { lo: -3.2, hi: 3.2 },
        );
        let fam = LinearizedSymbol::new(sys, phi);
        let omega = CotangentPoint::new(vec![0.0], vec![1.0], c(0.0)).unwrap();
        let jet = charpoly_jet(&fam, &omega, 0.0, JetSteps::default()).unwrap();
        assert!(jet.p.norm() < 1e-14);
        assert!(jet.p_l.norm() < 1e-14);
        assert!((jet.p_ll - c(2.0)).norm() < 1e-14);
        // P_t = −2φ₁∂_tφ₁ = 2φ₁∂_xφ₂ = 1
        assert!((jet.p_t - c(1.0)).norm() < 1e-7, "{}", jet.p_t);
        assert!(!jet.noise_warning);
    }

    #[test]
    fn frozen_reference_refuses_time() {
        let sys = vdw_like();
        let phi = ReferenceSolution::new(|_| RVec::zeros(2), Domain::Periodic { lo: 0.0, hi: 1.0 })
            .frozen();
        assert!(phi.at(&sys, 0.1, &[0.0]).is_err());
        assert!(phi.at(&sys, 0.0, &[0.0]).is_ok());
    }

    #[test]
    fn fd_flux_derivative() {
        let sys = vdw_like();
        let d = sys.flux_du(0, 0.0, &[0.0], &[0.7, 0.0], &[1.0, 0.0]);
        assert!((d[(1, 0)] - 1.4).abs() < 1e-9);
    }
}
