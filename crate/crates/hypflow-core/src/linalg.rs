//! Small dense complex linear algebra: determinants, characteristic
//! polynomials (Faddeev–LeVerrier), polynomial roots (Aberth–Ehrlich with a
//! companion/Schur fallback), numerical rank and invariant-subspace splitting.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{HypError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type CVec = nalgebra::DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn complexify(a: &RMat) -> CMat {
    a.map(c)
}

/// det via LU with partial pivoting.
pub fn det_lu(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

/// Characteristic polynomial det(λI − A), ascending coefficients, monic.
pub fn charpoly_coeffs(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    out[n] = c(1.0);
    let id = CMat::identity(n, n);
    let mut m = CMat::zeros(n, n);
    let mut ck = c(1.0);
    for k in 1..=n {
        m = a * &m + &id * ck;
        let am = a * &m;
        ck = -am.trace() / (k as f64);
        out[n - k] = ck;
    }
    out
}

/// Value and first two derivatives of an ascending-coefficient polynomial.
pub fn poly_eval3(p: &[C64], z: C64) -> (C64, C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut d1 = C64::new(0.0, 0.0);
    let mut d2 = C64::new(0.0, 0.0);
    for &a in p.iter().rev() {
        d2 = d2 * z + d1 * 2.0;
        d1 = d1 * z + v;
        v = v * z + a;
    }
    (v, d1, d2)
}

pub fn poly_eval(p: &[C64], z: C64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// Ascending coefficients of the derivative.
pub fn poly_deriv(p: &[C64]) -> Vec<C64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &a)| a * (k as f64))
        .collect()
}

fn horner_abs(p: &[C64], r: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, a| acc * r + a.norm())
}

/// Roots of a polynomial (ascending coefficients, nonzero leading term).
pub fn poly_roots(p: &[C64]) -> Result<Vec<C64>> {
    let mut p: Vec<C64> = p.to_vec();
    while p.len() > 1 && p.last().map(|a| a.norm() == 0.0).unwrap_or(false) {
        p.pop();
    }
    let lead = *p.last().ok_or_else(|| HypError::InvalidInput("empty polynomial".into()))?;
    if lead.norm() == 0.0 {
        return Err(HypError::InvalidInput("zero polynomial".into()));
    }
    for a in p.iter_mut() {
        *a /= lead;
    }
    let mut roots = Vec::new();
    while p.len() > 1 && p[0].norm() == 0.0 {
        roots.push(C64::new(0.0, 0.0));
        p.remove(0);
    }
    let n = p.len() - 1;
    match n {
        0 => {}
        1 => roots.push(-p[0]),
        2 => {
            let (b, cc) = (p[1], p[0]);
            let disc = (b * b - cc * 4.0).sqrt();
            let q = if (b.conj() * disc).re >= 0.0 {
                -(b + disc) * 0.5
            } else {
                -(b - disc) * 0.5
            };
            if q.norm() == 0.0 {
                roots.push(C64::new(0.0, 0.0));
                roots.push(C64::new(0.0, 0.0));
            } else {
                roots.push(q);
                roots.push(cc / q);
            }
        }
        _ => match aberth(&p) {
            Some(r) => roots.extend(r),
            None => roots.extend(companion_roots(&p)?),
        },
    }
    Ok(roots)
}

fn aberth(p: &[C64]) -> Option<Vec<C64>> {
    let n = p.len() - 1;
    let dp = poly_deriv(p);
    let center = -p[n - 1] / (n as f64);
    // Fujiwara-type radius of the shifted polynomial
    let mut r: f64 = 0.0;
    for k in 1..=n {
        r = r.max(p[n - k].norm().powf(1.0 / k as f64));
    }
    let r = (r * 0.5).max(1e-3);
    let mut z: Vec<C64> = (0..n)
        .map(|k| center + C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    let eps = f64::EPSILON;
    let mut done = vec![false; n];
    for _ in 0..800 {
        let mut all = true;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let zk = z[k];
            let v = poly_eval(p, zk);
            let bound = 8.0 * eps * horner_abs(p, zk.norm());
            if v.norm() <= bound {
                done[k] = true;
                continue;
            }
            all = false;
            let d = poly_eval(&dp, zk);
            let ratio = if d.norm() == 0.0 { v / C64::new(1e-300, 0.0) } else { v / d };
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != k {
                    let diff = zk - z[j];
                    if diff.norm() > 0.0 {
                        s += diff.inv();
                    }
                }
            }
            let w = ratio / (C64::new(1.0, 0.0) - ratio * s);
            z[k] = zk - w;
            if w.norm() <= 2.0 * eps * (1.0 + zk.norm()) {
                done[k] = true;
            }
        }
        if all {
            return Some(z);
        }
    }
    // accept if every residual is at roundoff level
    let ok = z
        .iter()
        .all(|&zk| poly_eval(p, zk).norm() <= 1e3 * eps * horner_abs(p, zk.norm()));
    if ok {
        Some(z)
    } else {
        None
    }
}

fn companion_roots(p: &[C64]) -> Result<Vec<C64>> {
    let n = p.len() - 1;
    let mut m = CMat::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = c(1.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -p[i];
    }
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000).ok_or_else(|| {
        HypError::NoConvergence {
            what: "companion QR".into(),
            iterations: 10_000,
            residual: f64::NAN,
        }
    })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn sort_spectrum(v: &mut [C64]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Eigenvalues of a complex matrix with multiplicity, sorted by (Re, Im).
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let mut ev = poly_roots(&charpoly_coeffs(a))?;
    sort_spectrum(&mut ev);
    Ok(ev)
}

/// Eigenvalues of a real matrix; non-real roots are paired with their
/// conjugates and symmetrized so the multiset is exactly conjugation-closed.
pub fn eigenvalues_real(a: &RMat) -> Result<Vec<C64>> {
    let ev = eigenvalues(&complexify(a))?;
    let scale = 1.0 + a.amax();
    let tiny = 1e-14 * scale;
    let mut upper: Vec<C64> = Vec::new();
    let mut lower: Vec<C64> = Vec::new();
    let mut out: Vec<C64> = Vec::new();
    for z in ev {
        if z.im.abs() <= tiny {
            out.push(C64::new(z.re, 0.0));
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    if upper.len() == lower.len() {
        let mut used = vec![false; lower.len()];
        for u in upper {
            let mut best = None;
            let mut bd = f64::INFINITY;
            for (j, l) in lower.iter().enumerate() {
                if !used[j] {
                    let d = (u - l.conj()).norm();
                    if d < bd {
                        bd = d;
                        best = Some(j);
                    }
                }
            }
            let j = best.unwrap_or(0);
            used[j] = true;
            let m = (u + lower[j].conj()) * 0.5;
            out.push(m);
            out.push(m.conj());
        }
    } else {
        // odd split can only come from a root sitting on the real axis at noise level
        out.extend(upper);
        out.extend(lower);
    }
    sort_spectrum(&mut out);
    Ok(out)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    let sv = a.clone().svd(false, false).singular_values;
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Numerical rank: number of singular values above `thr`.
pub fn numerical_rank(a: &CMat, thr: f64) -> usize {
    singular_values(a).iter().filter(|&&s| s > thr).count()
}

/// Unit right singular vector of the smallest singular value.
pub fn null_vector(a: &CMat) -> CVec {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    vt.row(k).adjoint()
}

pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

fn range_basis(a: &CMat, k: usize) -> CMat {
    // column-pivoted QR is more accurate than the iterative SVD here
    let qr = a.clone().col_piv_qr();
    let q = qr.q();
    q.columns(0, k).into_owned()
}

/// Split C^N into the invariant subspace of the eigenvalues `cluster` and the
/// complementary invariant subspace. Returns Q with Q A Q⁻¹ block diagonal
/// (cluster block first) and Q⁻¹.
pub fn invariant_split(a: &CMat, ev: &[C64], cluster: &[usize]) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let k = cluster.len();
    if k == 0 || k > n {
        return Err(HypError::InvalidInput("bad eigenvalue cluster".into()));
    }
    if k == n {
        return Ok((CMat::identity(n, n), CMat::identity(n, n)));
    }
    let id = CMat::identity(n, n);
    let mut r_in = id.clone();
    let mut r_out = id.clone();
    for (i, &l) in ev.iter().enumerate() {
        if cluster.contains(&i) {
            r_out = r_out * (a - &id * l);
        } else {
            r_in = r_in * (a - &id * l);
        }
    }
    let v1 = range_basis(&r_in, k);
    let v2 = range_basis(&r_out, n - k);
    let mut qinv = CMat::zeros(n, n);
    for j in 0..k {
        qinv.set_column(j, &v1.column(j));
    }
    for j in 0..n - k {
        qinv.set_column(k + j, &v2.column(j));
    }
    let q = qinv
        .clone()
        .try_inverse()
        .ok_or_else(|| HypError::Numerical("invariant subspaces not complementary".into()))?;
    Ok((q, qinv))
}

/// Eigenvalues of the Hermitian part (M + M*)/2.
pub fn hermitian_part_eigs(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * c(0.5);
    let e = nalgebra::SymmetricEigen::new(h);
    e.eigenvalues.iter().copied().collect()
}

/// Complex Schur form A = U T U*.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let s = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        HypError::NoConvergence {
            what: "Schur decomposition".into(),
            iterations: 10_000,
            residual: f64::NAN,
        }
    })?;
    Ok(s.unpack())
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_vector_spans_the_kernel() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]);
        let v = null_vector(&a);
        assert!((&a * &v).norm() < 1e-12 && (v.norm() - 1.0).abs() < 1e-12);
    }

    fn cm(rows: &[&[f64]]) -> CMat {
        let n = rows.len();
        CMat::from_fn(n, n, |i, j| c(rows[i][j]))
    }

    #[test]
    fn faddeev_leverrier_matches_lu() {
        let a = cm(&[&[1.0, 2.0, 0.5], &[-1.0, 0.3, 4.0], &[2.0, 0.0, -1.0]]);
        let p = charpoly_coeffs(&a);
        let lam = C64::new(0.7, -0.2);
        let direct = det_lu(&(CMat::identity(3, 3) * lam - &a));
        assert!((poly_eval(&p, lam) - direct).norm() < 1e-12);
    }

    #[test]
    fn rotation_spectrum() {
        let a = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ev = eigenvalues_real(&a).unwrap();
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn quartic_roots() {
        // (λ²−1)(λ²−1/4)
        let p = [c(0.25), c(0.0), c(-1.25), c(0.0), c(1.0)];
        let mut r = poly_roots(&p).unwrap();
        sort_spectrum(&mut r);
        let want = [-1.0, -0.5, 0.5, 1.0];
        for (z, w) in r.iter().zip(want) {
            assert!((z - c(w)).norm() < 1e-12, "{z} vs {w}");
        }
    }

    #[test]
    fn double_root_is_accepted() {
        let p = [c(1.0), c(-2.0), c(1.0)];
        let r = poly_roots(&p).unwrap();
        for z in r {
            assert!((z - c(1.0)).norm() < 1e-7);
        }
        let p = [c(0.0), c(0.0), c(1.0), c(3.0), c(1.0)];
        assert_eq!(poly_roots(&p).unwrap().len(), 4);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_01(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(31)).sum();
        assert!((s - 1.0 / 32.0).abs() < 1e-14);
    }

    #[test]
    fn invariant_split_block_diagonalizes() {
        let a = cm(&[
            &[0.0, 1.0, 0.3, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.3, 0.0, 0.0, 0.5],
            &[0.1, -0.2, 0.5, 0.0],
        ]);
        let ev = eigenvalues(&a).unwrap();
        let (q, qi) = invariant_split(&a, &ev, &[1, 2]).unwrap();
        let b = &q * &a * &qi;
        for i in 0..2 {
            for j in 2..4 {
                assert!(b[(i, j)].norm() < 1e-10 && b[(j, i)].norm() < 1e-10);
            }
        }
    }
}
