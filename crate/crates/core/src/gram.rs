//! Gram-type matrices `A = [1, q, …, q^{ν−1}, I_{i,j}]` of the three
//! ensembles, their inverses, and the Cauchy-type determinants that give
//! the normalizations in closed form.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ensembles::{Ensemble, Kind};
use crate::linalg::{check_distinct, condition_1, log_vandermonde, SignedLog};
use crate::specfun::log_gamma_int;
use crate::{Error, Result};

/// Inverses with a larger 1-norm condition estimate are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub nu: usize,
    pub kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramInverse {
    pub entries: DMatrix<f64>,
    pub condition_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CauchyVariant {
    /// `1/(q_i + σ_j)`
    PlusSigma,
    /// `1/(α q_i − δ_j)`
    AlphaMinusDelta,
}

fn check_index(e: &Ensemble, i: usize, j: usize) -> Result<()> {
    if i == 0 || i > e.m() || j == 0 || j > e.n() {
        return Err(Error::Index(format!("(i={i}, j={j}) outside 1..={} x 1..={}", e.m(), e.n())));
    }
    Ok(())
}

/// Closed-form pairing integral `∫ φ_i ψ_j`, 1-based indices:
/// wishart `1/(q_i+σ_j)`, product `Γ(κ+j)Γ(j)/(2α^{κ+j} q_i^j)`,
/// coupled `δ_j^{κ/2} / (2α^κ (αq_i − δ_j))`.
pub fn pairing_integral(e: &Ensemble, i: usize, j: usize) -> Result<f64> {
    check_index(e, i, j)?;
    let (i0, j0) = (i - 1, j - 1);
    Ok(match e {
        Ensemble::Wishart(p) => 1.0 / (p.q[i0] + p.sigma[j0]),
        Ensemble::Product(p) => {
            let k = p.kappa() as i64;
            let jj = j as i64;
            let lg = log_gamma_int(k + jj)? + log_gamma_int(jj)?;
            (lg - (k + jj) as f64 * p.alpha.ln() - jj as f64 * p.q[i0].ln()).exp() / 2.0
        }
        Ensemble::Coupled(p) => {
            let k = p.kappa() as f64;
            p.delta[j0].powf(k / 2.0) / (2.0 * p.alpha.powf(k) * (p.alpha * p.q[i0] - p.delta[j0]))
        }
    })
}

/// As `pairing_integral` but with the coupled `δ_j^{κ/2}` dropped, which
/// pairs with `ψ̃_j(x) = x^κ g_κ(δ_j x)` and stays regular at `δ_j = 0`.
pub fn pairing_integral_reduced(e: &Ensemble, i: usize, j: usize) -> Result<f64> {
    match e {
        Ensemble::Coupled(p) => {
            check_index(e, i, j)?;
            let k = p.kappa() as f64;
            Ok(1.0 / (2.0 * p.alpha.powf(k) * (p.alpha * p.q[i - 1] - p.delta[j - 1])))
        }
        _ => pairing_integral(e, i, j),
    }
}

fn assemble(e: &Ensemble, reduced: bool) -> Result<GramMatrix> {
    e.validate()?;
    let (m, nu) = (e.m(), e.nu() as usize);
    let (q, scale) = match e {
        Ensemble::Wishart(p) => (&p.q, 1.0),
        Ensemble::Product(p) => (&p.q, 1.0),
        Ensemble::Coupled(p) => (&p.q, p.alpha),
    };
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for k in 0..nu {
            a[(i, k)] = (scale * q[i]).powi(k as i32);
        }
        for j in 0..e.n() {
            a[(i, nu + j)] = if reduced {
                pairing_integral_reduced(e, i + 1, j + 1)?
            } else {
                pairing_integral(e, i + 1, j + 1)?
            };
        }
    }
    Ok(GramMatrix { entries: a, nu, kind: e.kind() })
}

/// Monomial block (α-scaled `(αq_i)^{k−1}` for the coupled kind) followed
/// by the `N` pairing columns.
pub fn build_gram(e: &Ensemble) -> Result<GramMatrix> {
    assemble(e, false)
}

/// `build_gram` with the reduced coupled pairing columns.
pub fn build_gram_reduced(e: &Ensemble) -> Result<GramMatrix> {
    assemble(e, true)
}

fn prod_log<I: IntoIterator<Item = f64>>(it: I) -> SignedLog {
    it.into_iter().fold(SignedLog::ONE, |acc, v| acc.mul(SignedLog::from_value(v)))
}

/// Closed-form inverse `C` of `A_{jk} = 1/(q_j + σ_k)`:
/// `C_{ij} = Π_l (q_l+σ_i)(q_j+σ_l) / ((q_j+σ_i) Π_{k≠i}(σ_i−σ_k) Π_{l≠j}(q_j−q_l))`.
pub fn cauchy_inverse(q: &[f64], sigma: &[f64]) -> Result<GramInverse> {
    let n = q.len();
    if sigma.len() != n {
        return Err(Error::Parameter("q and sigma must have equal length".into()));
    }
    check_distinct(q, "q")?;
    check_distinct(sigma, "sigma")?;
    for &a in q {
        for &b in sigma {
            if a + b == 0.0 {
                return Err(Error::Degeneracy("q_i + sigma_j vanishes".into()));
            }
        }
    }
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let num_i = prod_log(q.iter().map(|ql| ql + sigma[i]));
        let den_i = prod_log((0..n).filter(|&k| k != i).map(|k| sigma[i] - sigma[k]));
        for j in 0..n {
            let num_j = prod_log(sigma.iter().map(|sl| q[j] + sl));
            let den_j = prod_log((0..n).filter(|&l| l != j).map(|l| q[j] - q[l]));
            let v = num_i
                .mul(num_j)
                .div(den_i)
                .div(den_j)
                .div(SignedLog::from_value(q[j] + sigma[i]));
            c[(i, j)] = v.value();
        }
    }
    let a = DMatrix::from_fn(n, n, |j, k| 1.0 / (q[j] + sigma[k]));
    let condition_estimate = condition_1(&a, &c);
    Ok(GramInverse { entries: c, condition_estimate })
}

/// Pivoted LU inverse with one refinement step `C ← C + C(I − AC)`,
/// applied to the equilibrated matrix `R A D` (unit max-norm columns, then
/// rows). The condition estimate refers to the equilibrated matrix.
pub fn invert_gram(a: &GramMatrix) -> Result<GramInverse> {
    invert_matrix(&a.entries)
}

pub fn invert_matrix(a: &DMatrix<f64>) -> Result<GramInverse> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Numeric("inverse of a non-square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let mut b = a.clone();
    let mut d = vec![1.0; n];
    for j in 0..n {
        let s = b.column(j).amax();
        if s == 0.0 {
            return Err(Error::Conditioning(f64::INFINITY));
        }
        d[j] = 1.0 / s;
        b.column_mut(j).scale_mut(d[j]);
    }
    let mut r = vec![1.0; n];
    for i in 0..n {
        let s = b.row(i).amax();
        if s == 0.0 {
            return Err(Error::Conditioning(f64::INFINITY));
        }
        r[i] = 1.0 / s;
        b.row_mut(i).scale_mut(r[i]);
    }
    let c0 = b
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Conditioning(f64::INFINITY))?;
    let id = DMatrix::<f64>::identity(n, n);
    let cb = &c0 + &c0 * (&id - &b * &c0);
    let cond = condition_1(&b, &cb);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::Conditioning(cond));
    }
    let resid = (&b * &cb - &id).amax();
    if resid > 1e-8f64.max(100.0 * cond * f64::EPSILON) {
        return Err(Error::Numeric(format!("inverse residual {resid:e} too large")));
    }
    let c = DMatrix::from_fn(n, n, |i, j| d[i] * cb[(i, j)] * r[j]);
    Ok(GramInverse { entries: c, condition_estimate: cond })
}

/// Block inverse of `A = [[a, J], [b, I]]` with `a` the leading `ν × ν`
/// block, through the Schur complement `g = I − b a⁻¹ J`.
pub fn block_inverse(a_full: &DMatrix<f64>, nu: usize) -> Result<DMatrix<f64>> {
    let m = a_full.nrows();
    let n = m - nu;
    let a = a_full.view((0, 0), (nu, nu)).into_owned();
    let j = a_full.view((0, nu), (nu, n)).into_owned();
    let b = a_full.view((nu, 0), (n, nu)).into_owned();
    let i = a_full.view((nu, nu), (n, n)).into_owned();
    let ainv = a.lu().try_inverse().ok_or(Error::Conditioning(f64::INFINITY))?;
    let g = &i - &b * &ainv * &j;
    let ginv = g.lu().try_inverse().ok_or(Error::Conditioning(f64::INFINITY))?;
    let mut c = DMatrix::zeros(m, m);
    let tl = &ainv + &ainv * &j * &ginv * &b * &ainv;
    let tr = -(&ainv * &j * &ginv);
    let bl = -(&ginv * &b * &ainv);
    c.view_mut((0, 0), (nu, nu)).copy_from(&tl);
    c.view_mut((0, nu), (nu, n)).copy_from(&tr);
    c.view_mut((nu, 0), (n, nu)).copy_from(&bl);
    c.view_mut((nu, nu), (n, n)).copy_from(&ginv);
    Ok(c)
}

/// Closed form of `det[1, q_i, …, q_i^{ν−1}, 1/(q_i+σ_j)]` or of
/// `det[1, q_i, …, q_i^{ν−1}, 1/(αq_i−δ_j)]`, `ν = M − N`.
pub fn cauchy_det_generalized(
    q: &[f64],
    sd: &[f64],
    variant: CauchyVariant,
    alpha: f64,
) -> Result<SignedLog> {
    let (m, n) = (q.len(), sd.len());
    if n == 0 || m < n {
        return Err(Error::Parameter(format!("need 1 <= N <= M, got M={m}, N={n}")));
    }
    check_distinct(q, "q")?;
    check_distinct(sd, "sigma/delta")?;
    let nu = (m - n) as i64;
    let (n, m) = (n as i64, m as i64);
    let vq = log_vandermonde(q);
    let vs = log_vandermonde(sd);
    let den = match variant {
        CauchyVariant::PlusSigma => prod_log(q.iter().flat_map(|a| sd.iter().map(move |b| a + b))),
        CauchyVariant::AlphaMinusDelta => {
            prod_log(q.iter().flat_map(|a| sd.iter().map(move |b| alpha * a - b)))
        }
    };
    if den.sign == 0.0 {
        return Err(Error::Degeneracy("vanishing Cauchy denominator".into()));
    }
    let pre = match variant {
        CauchyVariant::PlusSigma => SignedLog::from_value(-1.0).powi(n * nu),
        CauchyVariant::AlphaMinusDelta => SignedLog::from_value(-alpha).powi(m * n - n * (n + 1) / 2),
    };
    Ok(pre.mul(vq).mul(vs).div(den))
}

fn ln_factorial(n: usize) -> f64 {
    log_gamma_int(n as i64 + 1).unwrap()
}

fn normalization(e: &Ensemble, reduced: bool) -> Result<SignedLog> {
    e.validate()?;
    let (n, nu) = (e.n() as i64, e.nu() as i64);
    let nf = ln_factorial(e.n());
    match e {
        Ensemble::Wishart(p) => {
            let c = cauchy_det_generalized(&p.q, &p.sigma, CauchyVariant::PlusSigma, 1.0)?;
            Ok(SignedLog { sign: 1.0, log_abs: nf }.mul(c))
        }
        Ensemble::Coupled(p) => {
            let k = p.kappa() as f64;
            let c = cauchy_det_generalized(&p.q, &p.delta, CauchyVariant::AlphaMinusDelta, p.alpha)?;
            // Z = (N!)² 2^N det[1, …, (q)^{ν−1}, I] with I = δ^{κ/2}/(2α^κ(αq−δ))
            let mut z = SignedLog { sign: 1.0, log_abs: 2.0 * nf - n as f64 * k * p.alpha.ln() };
            if !reduced {
                for &d in &p.delta {
                    z = z.mul(SignedLog::from_value(d.powf(k / 2.0)));
                }
            }
            Ok(z.mul(c))
        }
        Ensemble::Product(p) => {
            let k = p.kappa() as i64;
            let mut log_abs = 2.0 * nf;
            for l in 1..=n {
                log_abs += log_gamma_int(k + l)? + log_gamma_int(l)? - (k + l) as f64 * p.alpha.ln();
            }
            log_abs -= n as f64 * p.q.iter().map(|x| x.ln()).sum::<f64>();
            let sign = SignedLog::from_value(-1.0).powi(n * nu + n * (n - 1) / 2);
            Ok(SignedLog { sign: 1.0, log_abs }.mul(sign).mul(log_vandermonde(&p.q)))
        }
    }
}

/// `Z`, `Z₁` or `Z₂` in `(sign, ln|·|)` form.
pub fn log_normalization(e: &Ensemble) -> Result<SignedLog> {
    normalization(e, false)
}

/// The coupled `Z` without its `Π δ_j^{κ/2}` factor; equal to
/// `log_normalization` for the other kinds.
pub fn log_normalization_reduced(e: &Ensemble) -> Result<SignedLog> {
    normalization(e, true)
}
