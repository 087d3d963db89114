//! Transition-type classification from the characteristic-polynomial jet:
//! initial ellipticity (ℓ = 0), non-semisimple coalescence (ℓ = 1/2),
//! semisimple coalescence (ℓ = 1), certified persistence, or undecided.

use serde::Serialize;

use crate::error::{HypError, Result};
use crate::linalg::{self, complexify, C64, CMat};
use crate::system_model::{charpoly_jet, CharPolyJet, CotangentPoint, JetSteps, SymbolFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    Elliptic,
    NonSemisimpleTransition,
    SemisimpleTransition,
    HyperbolicPersistent,
    Indeterminate,
}

impl Regime {
    pub fn ell(self) -> Option<f64> {
        match self {
            Regime::Elliptic => Some(0.0),
            Regime::NonSemisimpleTransition => Some(0.5),
            Regime::SemisimpleTransition => Some(1.0),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Elliptic => "Elliptic",
            Regime::NonSemisimpleTransition => "NonSemisimpleTransition",
            Regime::SemisimpleTransition => "SemisimpleTransition",
            Regime::HyperbolicPersistent => "HyperbolicPersistent",
            Regime::Indeterminate => "Indeterminate",
        }
    }
}

/// h = 1/(1+ℓ).
pub fn scale_h(ell: f64) -> f64 {
    1.0 / (1.0 + ell)
}

/// ζ = 1/3 for ℓ = 1/2 and 0 otherwise.
pub fn scale_zeta(ell: f64) -> f64 {
    if (ell - 0.5).abs() < 1e-12 {
        1.0 / 3.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Equality tests (|P| ≤ eq, ...).
    pub eq: f64,
    /// Margin for strict inequalities and for non-real eigenvalues.
    pub strict: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eq: 1e-8, strict: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RingSampling {
    pub samples: usize,
    pub radius: f64,
}

impl Default for RingSampling {
    fn default() -> Self {
        RingSampling { samples: 8, radius: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchRegion {
    pub xs: Vec<Vec<f64>>,
    pub xis: Vec<Vec<f64>>,
}

impl SearchRegion {
    /// Uniform x-grid on [lo, hi] (n points, endpoints included) with unit ξ = ±1.
    pub fn line(lo: f64, hi: f64, n: usize) -> Self {
        let xs = (0..n)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64])
            .collect();
        SearchRegion { xs, xis: vec![vec![1.0]] }
    }

    pub fn points(xs: Vec<Vec<f64>>, xis: Vec<Vec<f64>>) -> Self {
        SearchRegion { xs, xis }
    }

    /// Multiply every ξ by c.
    pub fn scaled(&self, k: f64) -> Self {
        SearchRegion {
            xs: self.xs.clone(),
            xis: self.xis.iter().map(|v| v.iter().map(|a| a * k).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub regime: Regime,
    pub ell: Option<f64>,
    pub h: Option<f64>,
    pub zeta: Option<f64>,
    pub witness: Option<CotangentPoint>,
    pub jet: Option<CharPolyJet>,
    pub tol: Tolerances,
    pub note: String,
}

impl Classification {
    fn new(regime: Regime, witness: Option<CotangentPoint>, jet: Option<CharPolyJet>, tol: Tolerances, note: String) -> Self {
        let ell = regime.ell();
        Classification {
            regime,
            ell,
            h: ell.map(scale_h),
            zeta: ell.map(scale_zeta),
            witness,
            jet,
            tol,
            note,
        }
    }
}

fn spectrum_at<S: SymbolFamily + ?Sized>(fam: &S, t: f64, x: &[f64], xi: &[f64]) -> Result<(crate::RMat, Vec<C64>)> {
    let a = fam.symbol(t, x, xi)?;
    let ev = linalg::eigenvalues_real(&a)?;
    Ok((a, ev))
}

pub fn check_ellipticity<S: SymbolFamily + ?Sized>(
    fam: &S,
    x: &[f64],
    xi: &[f64],
    tol: f64,
) -> Result<Option<CotangentPoint>> {
    let (_, ev) = spectrum_at(fam, 0.0, x, xi)?;
    let best = ev
        .iter()
        .copied()
        .max_by(|a, b| a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal));
    Ok(match best {
        Some(l) if l.im > tol => Some(CotangentPoint::new(x.to_vec(), xi.to_vec(), l)?),
        _ => None,
    })
}

/// |P_λ| ≤ eq, |P_λλ| > eq and P_λλ·P_t > strict at a real coalescence point.
pub fn check_nonsemisimple_transition(jet: &CharPolyJet, tol: &Tolerances) -> bool {
    if jet.p.norm() > tol.eq || jet.point.lambda.im.abs() > tol.eq {
        return false;
    }
    jet.p_l.norm() <= tol.eq && jet.p_ll.norm() > tol.eq && (jet.p_ll * jet.p_t).re > tol.strict
}

fn semisimple_jet_conditions(jet: &CharPolyJet, tol: &Tolerances) -> bool {
    jet.p_t.norm() <= tol.eq && jet.p_tl.re * jet.p_tl.re < (jet.p_tt * jet.p_ll).re - tol.eq
}

fn semisimple_rank(a: &crate::RMat, lambda: C64, tol: &Tolerances) -> bool {
    let n = a.nrows();
    let m = complexify(a) - CMat::identity(n, n) * lambda;
    let scale = linalg::op_norm(&complexify(a)).max(1.0);
    linalg::numerical_rank(&m, tol.eq * scale) == n - 2
}

/// Double eigenvalue closest to λ0 (mean of the two nearest), if the pair is coalesced.
fn tracked_double<S: SymbolFamily + ?Sized>(
    fam: &S,
    x: &[f64],
    xi: &[f64],
    lambda0: C64,
    cluster_tol: f64,
) -> Result<Option<(crate::RMat, C64)>> {
    let (a, mut ev) = spectrum_at(fam, 0.0, x, xi)?;
    if ev.len() < 2 {
        return Ok(None);
    }
    ev.sort_by(|p, q| {
        (p - lambda0)
            .norm()
            .partial_cmp(&(q - lambda0).norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if (ev[0] - ev[1]).norm() > cluster_tol * (1.0 + a.amax()) {
        return Ok(None);
    }
    Ok(Some((a, (ev[0] + ev[1]) * 0.5)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SemisimpleVerdict {
    Holds,
    Fails,
    /// The coalescing pair could not be followed around the sampling ring.
    TrackingLost,
}

/// Hypothesis check at ω₀: jet conditions, rank N−2, and persistence on a ring.
pub fn check_semisimple_transition<S: SymbolFamily + ?Sized>(
    fam: &S,
    omega: &CotangentPoint,
    tol: &Tolerances,
    ring: RingSampling,
) -> Result<SemisimpleVerdict> {
    let steps = JetSteps::default();
    let at_point = |x: &[f64], xi: &[f64], l: C64, a: &crate::RMat| -> Result<bool> {
        let w = CotangentPoint::new(x.to_vec(), xi.to_vec(), l)?;
        let jet = charpoly_jet(fam, &w, 0.0, steps)?;
        Ok(jet.p.norm() <= tol.eq.max(1e-12)
            && jet.p_l.norm() <= tol.eq
            && jet.p_ll.norm() > tol.eq
            && semisimple_jet_conditions(&jet, tol)
            && semisimple_rank(a, l, tol))
    };
    let a0 = fam.symbol(0.0, &omega.x, &omega.xi)?;
    if !at_point(&omega.x, &omega.xi, omega.lambda, &a0)? {
        return Ok(SemisimpleVerdict::Fails);
    }
    for k in 0..ring.samples {
        let th = 2.0 * std::f64::consts::PI * k as f64 / ring.samples as f64;
        let mut x = omega.x.clone();
        let mut xi = omega.xi.clone();
        x[0] += ring.radius * th.cos();
        xi[0] += ring.radius * th.sin();
        match tracked_double(fam, &x, &xi, omega.lambda, 1e-6)? {
            None => return Ok(SemisimpleVerdict::TrackingLost),
            Some((a, l)) => {
                if !at_point(&x, &xi, l, &a)? {
                    return Ok(SemisimpleVerdict::Fails);
                }
            }
        }
    }
    Ok(SemisimpleVerdict::Holds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub tol: Tolerances,
    pub ring: RingSampling,
    pub jet_steps: JetSteps,
    /// Relative separation below which two real eigenvalues count as coalesced.
    pub cluster_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: Tolerances::default(),
            ring: RingSampling::default(),
            jet_steps: JetSteps::default(),
            cluster_tol: 1e-6,
        }
    }
}

/// Real clusters of coalesced eigenvalues: (mean, multiplicity).
fn real_clusters(ev: &[C64], scale: f64, cluster_tol: f64) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    let mut used = vec![false; ev.len()];
    for i in 0..ev.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        for k in i + 1..ev.len() {
            if !used[k] && (ev[k] - ev[i]).norm() <= cluster_tol * scale {
                members.push(k);
            }
        }
        if members.len() > 1 {
            for &m in &members {
                used[m] = true;
            }
            let mean = members.iter().map(|&m| ev[m]).sum::<C64>() / members.len() as f64;
            out.push((C64::new(mean.re, 0.0), members.len()));
        }
    }
    out
}

struct Candidate {
    omega: CotangentPoint,
    jet: CharPolyJet,
    multiplicity: usize,
}

pub fn classify<S: SymbolFamily + ?Sized>(
    fam: &S,
    region: &SearchRegion,
    opts: &ClassifyOptions,
) -> Result<Classification> {
    let tol = opts.tol;
    if region.xs.is_empty() || region.xis.is_empty() {
        return Err(HypError::InvalidInput("empty search region".into()));
    }
    // initial ellipticity first: maximal Im λ over the grid
    let mut best: Option<CotangentPoint> = None;
    for x in &region.xs {
        for xi in &region.xis {
            if let Some(w) = check_ellipticity(fam, x, xi, tol.strict)? {
                if best.as_ref().map(|b| w.lambda.im > b.lambda.im).unwrap_or(true) {
                    best = Some(w);
                }
            }
        }
    }
    if let Some(w) = best {
        let jet = charpoly_jet(fam, &w, 0.0, opts.jet_steps)?;
        let note = format!("non-real eigenvalue Im λ = {:.6e}", w.lambda.im);
        return Ok(Classification::new(Regime::Elliptic, Some(w), Some(jet), tol, note));
    }

    let mut cands: Vec<Candidate> = Vec::new();
    for x in &region.xs {
        for xi in &region.xis {
            let (a, ev) = spectrum_at(fam, 0.0, x, xi)?;
            let scale = 1.0 + a.amax();
            for (l, mult) in real_clusters(&ev, scale, opts.cluster_tol) {
                let omega = CotangentPoint::new(x.clone(), xi.clone(), l)?;
                let jet = charpoly_jet(fam, &omega, 0.0, opts.jet_steps)?;
                cands.push(Candidate { omega, jet, multiplicity: mult });
            }
        }
    }
    if cands.is_empty() {
        return Ok(Classification::new(
            Regime::HyperbolicPersistent,
            None,
            None,
            tol,
            "all sampled spectra real and simple".into(),
        ));
    }
    for cd in cands.iter().filter(|c| c.multiplicity == 2) {
        if check_nonsemisimple_transition(&cd.jet, &tol) {
            let note = format!("P_λλ·P_t = {:.6e}", (cd.jet.p_ll * cd.jet.p_t).re);
            return Ok(Classification::new(
                Regime::NonSemisimpleTransition,
                Some(cd.omega.clone()),
                Some(cd.jet.clone()),
                tol,
                note,
            ));
        }
    }
    let mut lost = false;
    for cd in cands.iter().filter(|c| c.multiplicity == 2) {
        match check_semisimple_transition(fam, &cd.omega, &tol, opts.ring)? {
            SemisimpleVerdict::Holds => {
                let j = &cd.jet;
                let note = format!(
                    "P_tt·P_λλ − P_tλ² = {:.6e}",
                    (j.p_tt * j.p_ll).re - j.p_tl.re * j.p_tl.re
                );
                return Ok(Classification::new(
                    Regime::SemisimpleTransition,
                    Some(cd.omega.clone()),
                    Some(cd.jet.clone()),
                    tol,
                    note,
                ));
            }
            SemisimpleVerdict::TrackingLost => lost = true,
            SemisimpleVerdict::Fails => {}
        }
    }
    // every coalescence must be certified to stay real
    let mut undecided: Option<&Candidate> = None;
    for cd in &cands {
        if cd.multiplicity > 2 {
            undecided = Some(cd);
            break;
        }
        let n = fam.dim();
        let a = fam.symbol(0.0, &cd.omega.x, &cd.omega.xi)?;
        let semisimple = semisimple_rank(&a, cd.omega.lambda, &tol);
        let j = &cd.jet;
        let ok = if semisimple || n < 2 {
            // the finite-difference t-jet carries ~1e-8 noise; scale the margin
            let tl2 = j.p_tl.re * j.p_tl.re;
            let tt_ll = (j.p_tt * j.p_ll).re;
            j.p_t.norm() <= tol.eq && tl2 - tt_ll >= -tol.strict * (1.0 + tl2 + tt_ll.abs())
        } else {
            (j.p_t * j.p_ll).re < -tol.strict
        };
        if !ok {
            undecided = Some(cd);
            break;
        }
    }
    match undecided {
        None => Ok(Classification::new(
            Regime::HyperbolicPersistent,
            None,
            None,
            tol,
            format!("{} coalescence point(s), all certified real", cands.len()),
        )),
        Some(cd) => {
            let note = if cd.multiplicity > 2 {
                format!("eigenvalue of multiplicity {}", cd.multiplicity)
            } else if lost {
                "coalescing pair lost on the sampling ring".into()
            } else {
                "coalescence without a decisive sign condition".into()
            };
            Ok(Classification::new(
                Regime::Indeterminate,
                Some(cd.omega.clone()),
                Some(cd.jet.clone()),
                tol,
                note,
            ))
        }
    }
}

/// Time samples of trace and determinant of the 2×2 block of the pair nearest λ0.
fn block_tr_det<S: SymbolFamily + ?Sized>(
    fam: &S,
    omega: &CotangentPoint,
    ts: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mats = fam.symbols_in_time(ts, &omega.x, &omega.xi)?;
    mats.iter()
        .map(|a| {
            if a.nrows() == 2 {
                return Ok((a.trace(), a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]));
            }
            let ac = complexify(a);
            let ev = linalg::eigenvalues(&ac)?;
            let mut idx: Vec<usize> = (0..ev.len()).collect();
            idx.sort_by(|&p, &q| {
                (ev[p] - omega.lambda)
                    .norm()
                    .partial_cmp(&(ev[q] - omega.lambda).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let (q, qi) = linalg::invariant_split(&ac, &ev, &idx[..2])?;
            let b = &q * &ac * &qi;
            let tr = b[(0, 0)] + b[(1, 1)];
            let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
            Ok((tr.re, det.re))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscriminantReport {
    pub d_delta: f64,
    pub minus_four_p_t: f64,
    pub d2_delta: f64,
    pub jet_combination: f64,
    pub residual1: f64,
    pub residual2: f64,
    pub lambda0: f64,
}

/// Compares ∂_tΔ(0), ∂²_tΔ(0) of the block discriminant Δ = tr² − 4det with
/// −4∂_tP₀ and 2(∂_t∂_λP₀)² − 2∂²_λP₀∂²_tP₀ (relative residuals).
pub fn discriminant_jet_crosscheck<S: SymbolFamily + ?Sized>(
    fam: &S,
    omega: &CotangentPoint,
    dt: f64,
) -> Result<DiscriminantReport> {
    let h = dt;
    let ts = [0.0, -h, h, -0.5 * h, 0.5 * h];
    let s = block_tr_det(fam, omega, &ts)?;
    let d1 = |f: &dyn Fn(usize) -> f64| {
        let a = (f(2) - f(1)) / (2.0 * h);
        let b = (f(4) - f(3)) / h;
        (4.0 * b - a) / 3.0
    };
    let d2 = |f: &dyn Fn(usize) -> f64| {
        let a = (f(2) - 2.0 * f(0) + f(1)) / (h * h);
        let b = (f(4) - 2.0 * f(0) + f(3)) / (0.25 * h * h);
        (4.0 * b - a) / 3.0
    };
    let tr = |i: usize| s[i].0;
    let det = |i: usize| s[i].1;
    let delta = |i: usize| s[i].0 * s[i].0 - 4.0 * s[i].1;
    let l0 = 0.5 * s[0].0;
    // P₀(t, λ) = λ² − tr λ + det at λ = λ₀
    let p_t = -l0 * d1(&tr) + d1(&det);
    let p_tt = -l0 * d2(&tr) + d2(&det);
    let p_tl = -d1(&tr);
    let p_ll = 2.0;
    let dd = d1(&delta);
    let dd2 = d2(&delta);
    let rhs2 = 2.0 * p_tl * p_tl - 2.0 * p_ll * p_tt;
    Ok(DiscriminantReport {
        d_delta: dd,
        minus_four_p_t: -4.0 * p_t,
        d2_delta: dd2,
        jet_combination: rhs2,
        residual1: (dd + 4.0 * p_t).abs() / dd.abs().max(1.0),
        residual2: (dd2 - rhs2).abs() / dd2.abs().max(1.0),
        lambda0: l0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub s: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Crossing time s(x) of a 2×2 family, Newton on the discriminant from t = 0
/// (deflating the root t = 0 when it is already a crossing).
pub fn find_transition_point_curve<S: SymbolFamily + ?Sized>(
    fam: &S,
    xs: &[f64],
    xi: f64,
    tol: f64,
) -> Result<Vec<CurvePoint>> {
    if fam.dim() != 2 || fam.space_dim() != 1 {
        return Err(HypError::InvalidInput(
            "transition curve requires a 2×2 family in one space dimension".into(),
        ));
    }
    let disc = |t: f64, x: f64| -> Result<f64> {
        let a = fam.symbol(t, &[x], &[xi])?;
        let tr = a.trace();
        Ok(tr * tr - 4.0 * (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]))
    };
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let d0 = disc(0.0, x)?;
        let deflate = d0.abs() <= tol;
        let hd = 1e-6;
        let g = |t: f64| -> Result<f64> {
            if deflate {
                if t.abs() < 1e-9 {
                    Ok((disc(hd, x)? - disc(-hd, x)?) / (2.0 * hd))
                } else {
                    Ok(disc(t, x)? / t)
                }
            } else {
                disc(t, x)
            }
        };
        let mut t = 0.0;
        let mut converged = false;
        let mut it = 0;
        while it < 60 {
            it += 1;
            let v = g(t)?;
            if !v.is_finite() {
                break;
            }
            let dg = (g(t + hd)? - g(t - hd)?) / (2.0 * hd);
            if dg == 0.0 || !dg.is_finite() {
                break;
            }
            let step = v / dg;
            t -= step;
            if step.abs() <= 1e-14 * (1.0 + t.abs()) || v.abs() <= 1e-15 {
                converged = g(t)?.abs() <= tol.max(1e-10);
                break;
            }
            if t.abs() > 1e6 {
                break;
            }
        }
        out.push(CurvePoint { x, s: t, converged, iterations: it });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::system_model::ClosureSymbol;
    use crate::RMat;

    fn ex_not(a: f64) -> ClosureSymbol {
        ClosureSymbol::new("ex-not", 2, 1, move |t, x, xi| {
            let q = x[0] * x[0] * t - t * t + t * t * t * a;
            RMat::from_row_slice(2, 2, &[0.0, xi[0], xi[0] * q, 0.0])
        })
    }

    #[test]
    fn scales_follow_ell() {
        assert_eq!(scale_h(0.5), 2.0 / 3.0);
        assert_eq!(scale_zeta(0.5), 1.0 / 3.0);
        assert_eq!(scale_zeta(1.0), 0.0);
    }

    #[test]
    fn symmetric_constant_is_persistent() {
        let fam = ClosureSymbol::new("sym", 2, 1, |_, _, xi| {
            RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -1.0]) * xi[0]
        });
        let c = classify(&fam, &SearchRegion::line(-1.0, 1.0, 5), &ClassifyOptions::default()).unwrap();
        assert_eq!(c.regime, Regime::HyperbolicPersistent);
        assert!(c.h.is_none());
    }

    #[test]
    fn model_block_minus_sign_is_nonsemisimple() {
        // [[0,1],[−t,0]]: P = λ² + t, P_t = 1, P_λλ = 2
        let fam = ClosureSymbol::new("block", 2, 1, |t, _, xi| {
            RMat::from_row_slice(2, 2, &[0.0, xi[0], -t * xi[0], 0.0])
        });
        let c = classify(&fam, &SearchRegion::line(-0.5, 0.5, 3), &ClassifyOptions::default()).unwrap();
        assert_eq!(c.regime, Regime::NonSemisimpleTransition);
        assert_eq!(c.zeta, Some(1.0 / 3.0));
    }

    #[test]
    fn ex_not_is_indeterminate_at_origin() {
        let fam = ex_not(1.0);
        let region = SearchRegion::points(vec![vec![0.0]], vec![vec![1.0]]);
        let c = classify(&fam, &region, &ClassifyOptions::default()).unwrap();
        assert_eq!(c.regime, Regime::Indeterminate);
    }

    #[test]
    fn transition_curve_exact_for_a_zero() {
        let fam = ex_not(0.0);
        let pts = find_transition_point_curve(&fam, &[0.0, 0.1, 0.3], 1.0, 1e-12).unwrap();
        for p in pts {
            assert!(p.converged);
            assert!((p.s - p.x * p.x).abs() < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn discriminant_identities_on_constant_block() {
        let fam = ClosureSymbol::new("c", 2, 1, |_, _, xi| {
            RMat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]) * xi[0]
        });
        let w = CotangentPoint::new(vec![0.0], vec![1.0], c(1.0)).unwrap();
        let r = discriminant_jet_crosscheck(&fam, &w, 1e-4).unwrap();
        assert!(r.residual1 < 1e-12 && r.residual2 < 1e-12);
    }
}
