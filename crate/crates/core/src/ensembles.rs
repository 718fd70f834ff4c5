//! Parameter sets, samplers and joint densities of the three ensembles.
//!
//! * coupled: `exp[−α Tr GG* + Tr(ΩGX + X*G*Ω*) − Tr QXX*]`,
//! * generalized Wishart: `exp[−Tr XΣX* − Tr QXX*]`,
//! * product: the coupled density at `Ω = 0`.
//!
//! `Q`, `Σ` and `Ω` are stored through their spectra. Densities are
//! returned as logarithms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{check_distinct, log_det, SignedLog};
use crate::specfun::g_reg;
use crate::{gram, Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub alpha: f64,
    pub q: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartParams {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub sigma: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductParams {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub alpha: f64,
    pub q: Vec<f64>,
}

/// Any of the three parameter sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Ensemble {
    Coupled(CoupledParams),
    Wishart(WishartParams),
    Product(ProductParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Wishart,
    Product,
    Coupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    /// `L × M`
    pub g: DMatrix<Complex64>,
    /// `M × N`
    pub x: DMatrix<Complex64>,
}

impl MatrixPair {
    pub fn product(&self) -> DMatrix<Complex64> {
        &self.g * &self.x
    }
}

/// Ascending squared singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub values: Vec<f64>,
}

impl CoupledParams {
    pub fn kappa(&self) -> u32 {
        (self.l - self.n) as u32
    }

    pub fn nu(&self) -> u32 {
        (self.m - self.n) as u32
    }

    /// `σ = −δ/α`, the Wishart parameters of the `X` marginal.
    pub fn marginal_wishart(&self) -> WishartParams {
        WishartParams {
            n: self.n,
            m: self.m,
            sigma: self.delta.iter().map(|d| -d / self.alpha).collect(),
            q: self.q.clone(),
        }
    }
}

impl WishartParams {
    pub fn nu(&self) -> u32 {
        (self.m - self.n) as u32
    }
}

impl ProductParams {
    pub fn kappa(&self) -> u32 {
        (self.l - self.n) as u32
    }

    pub fn nu(&self) -> u32 {
        (self.m - self.n) as u32
    }

    /// The coupled parameter set with `δ = 0`.
    pub fn as_coupled(&self) -> CoupledParams {
        CoupledParams {
            n: self.n,
            m: self.m,
            l: self.l,
            alpha: self.alpha,
            q: self.q.clone(),
            delta: vec![0.0; self.n],
        }
    }
}

impl Ensemble {
    pub fn kind(&self) -> Kind {
        match self {
            Ensemble::Coupled(_) => Kind::Coupled,
            Ensemble::Wishart(_) => Kind::Wishart,
            Ensemble::Product(_) => Kind::Product,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Ensemble::Coupled(p) => p.n,
            Ensemble::Wishart(p) => p.n,
            Ensemble::Product(p) => p.n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Ensemble::Coupled(p) => p.m,
            Ensemble::Wishart(p) => p.m,
            Ensemble::Product(p) => p.m,
        }
    }

    pub fn nu(&self) -> u32 {
        (self.m() - self.n()) as u32
    }

    /// `L − N`; zero for the Wishart ensemble.
    pub fn kappa(&self) -> u32 {
        match self {
            Ensemble::Coupled(p) => p.kappa(),
            Ensemble::Wishart(_) => 0,
            Ensemble::Product(p) => p.kappa(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Ensemble::Coupled(p) => validate_coupled(p),
            Ensemble::Wishart(p) => validate_wishart(p),
            Ensemble::Product(p) => validate_product(p),
        }
    }
}

fn check_finite(v: &[f64], name: &str, out: &mut Vec<String>) {
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            out.push(format!("{name}[{}] is not finite", i + 1));
        }
    }
}

fn check_dims(n: usize, m: usize, l: Option<usize>, out: &mut Vec<String>) {
    if n == 0 {
        out.push("N must be positive".into());
    }
    if m < n {
        out.push(format!("M = {m} < N = {n}"));
    }
    if let Some(l) = l {
        if l < n {
            out.push(format!("L = {l} < N = {n}"));
        }
    }
}

fn check_len(v: &[f64], want: usize, name: &str, out: &mut Vec<String>) {
    if v.len() != want {
        out.push(format!("{name} has {} entries, expected {want}", v.len()));
    }
}

fn finish(out: Vec<String>) -> Result<()> {
    if out.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(out))
    }
}

/// Dimensions, positivity of `α, q`, `δ ≥ 0`, and `αq_i − δ_j > 0`
/// (reported as `aqd` with 1-based indices).
pub fn validate_coupled(p: &CoupledParams) -> Result<()> {
    let mut out = Vec::new();
    check_dims(p.n, p.m, Some(p.l), &mut out);
    check_len(&p.q, p.m, "q", &mut out);
    check_len(&p.delta, p.n, "delta", &mut out);
    check_finite(&p.q, "q", &mut out);
    check_finite(&p.delta, "delta", &mut out);
    if !(p.alpha > 0.0 && p.alpha.is_finite()) {
        out.push(format!("alpha = {} is not positive", p.alpha));
    }
    for (i, q) in p.q.iter().enumerate() {
        if !(*q > 0.0) {
            out.push(format!("q[{}] = {q} is not positive", i + 1));
        }
    }
    for (j, d) in p.delta.iter().enumerate() {
        if !(*d >= 0.0) {
            out.push(format!("delta[{}] = {d} is negative", j + 1));
        }
    }
    for (i, q) in p.q.iter().enumerate() {
        for (j, d) in p.delta.iter().enumerate() {
            let v = p.alpha * q - d;
            if !(v > 0.0) {
                out.push(format!("aqd violated at (i={}, j={}): alpha*q_i - delta_j = {v}", i + 1, j + 1));
            }
        }
    }
    finish(out)
}

/// Dimensions, `q > 0`, and `q_i + σ_j > 0` (reported as `constraint3`).
pub fn validate_wishart(p: &WishartParams) -> Result<()> {
    let mut out = Vec::new();
    check_dims(p.n, p.m, None, &mut out);
    check_len(&p.q, p.m, "q", &mut out);
    check_len(&p.sigma, p.n, "sigma", &mut out);
    check_finite(&p.q, "q", &mut out);
    check_finite(&p.sigma, "sigma", &mut out);
    for (i, q) in p.q.iter().enumerate() {
        if !(*q > 0.0) {
            out.push(format!("q[{}] = {q} is not positive", i + 1));
        }
    }
    for (i, q) in p.q.iter().enumerate() {
        for (j, s) in p.sigma.iter().enumerate() {
            let v = q + s;
            if !(v > 0.0) {
                out.push(format!("constraint3 violated at (i={}, j={}): q_i + sigma_j = {v}", i + 1, j + 1));
            }
        }
    }
    finish(out)
}

pub fn validate_product(p: &ProductParams) -> Result<()> {
    let mut out = Vec::new();
    check_dims(p.n, p.m, Some(p.l), &mut out);
    check_len(&p.q, p.m, "q", &mut out);
    check_finite(&p.q, "q", &mut out);
    if !(p.alpha > 0.0 && p.alpha.is_finite()) {
        out.push(format!("alpha = {} is not positive", p.alpha));
    }
    for (i, q) in p.q.iter().enumerate() {
        if !(*q > 0.0) {
            out.push(format!("q[{}] = {q} is not positive", i + 1));
        }
    }
    finish(out)
}

/// Entries with `E|z|² = var`: real and imaginary parts `N(0, var/2)`.
fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn draw_coupled<R: Rng>(p: &CoupledParams, rng: &mut R) -> MatrixPair {
    let x = DMatrix::from_fn(p.m, p.n, |i, j| {
        complex_gaussian(rng, 1.0 / (p.q[i] - p.delta[j] / p.alpha))
    });
    // E[G | X] = Ω* X* / α with Ω = diag(√δ) embedded N×L
    let g = DMatrix::from_fn(p.l, p.m, |l, i| {
        let noise = complex_gaussian(rng, 1.0 / p.alpha);
        if l < p.n {
            noise + x[(i, l)].conj() * p.delta[l].sqrt() / p.alpha
        } else {
            noise
        }
    });
    MatrixPair { g, x }
}

fn draw_wishart<R: Rng>(p: &WishartParams, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(p.m, p.n, |i, j| complex_gaussian(rng, 1.0 / (p.q[i] + p.sigma[j])))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_coupled(p: &CoupledParams, seed: u64) -> Result<MatrixPair> {
    validate_coupled(p)?;
    Ok(draw_coupled(p, &mut stream_rng(seed, 0)))
}

pub fn sample_wishart(p: &WishartParams, seed: u64) -> Result<DMatrix<Complex64>> {
    validate_wishart(p)?;
    Ok(draw_wishart(p, &mut stream_rng(seed, 0)))
}

pub fn sample_product(p: &ProductParams, seed: u64) -> Result<MatrixPair> {
    validate_product(p)?;
    Ok(draw_coupled(&p.as_coupled(), &mut stream_rng(seed, 0)))
}

/// Samples per generator stream in batch mode; fixed so results do not
/// depend on the worker count.
pub const BATCH_CHUNK: usize = 4096;

fn batch<F>(count: usize, seed: u64, draw: F) -> Result<Vec<SpectrumSample>>
where
    F: Fn(&mut ChaCha20Rng) -> Result<SpectrumSample> + Sync,
{
    let chunks = count.div_ceil(BATCH_CHUNK);
    let parts: Result<Vec<Vec<SpectrumSample>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = BATCH_CHUNK.min(count - c * BATCH_CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

/// `count` spectra of `Y = GX`; chunk `c` uses ChaCha stream `c` of `seed`.
pub fn sample_coupled_spectra(p: &CoupledParams, seed: u64, count: usize) -> Result<Vec<SpectrumSample>> {
    validate_coupled(p)?;
    batch(count, seed, |rng| squared_singular_values(&draw_coupled(p, rng).product()))
}

pub fn sample_product_spectra(p: &ProductParams, seed: u64, count: usize) -> Result<Vec<SpectrumSample>> {
    validate_product(p)?;
    sample_coupled_spectra(&p.as_coupled(), seed, count)
}

pub fn sample_wishart_spectra(p: &WishartParams, seed: u64, count: usize) -> Result<Vec<SpectrumSample>> {
    validate_wishart(p)?;
    batch(count, seed, |rng| squared_singular_values(&draw_wishart(p, rng)))
}

pub fn sample_spectra(e: &Ensemble, seed: u64, count: usize) -> Result<Vec<SpectrumSample>> {
    match e {
        Ensemble::Coupled(p) => sample_coupled_spectra(p, seed, count),
        Ensemble::Wishart(p) => sample_wishart_spectra(p, seed, count),
        Ensemble::Product(p) => sample_product_spectra(p, seed, count),
    }
}

/// Squares of the `min(rows, cols)` singular values, ascending.
pub fn squared_singular_values(y: &DMatrix<Complex64>) -> Result<SpectrumSample> {
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let svd = y
        .clone()
        .try_svd(false, false, 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SpectrumSample { values })
}

fn check_positive(v: &[f64], name: &str, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::domain(format!("{name} must have {n} entries")));
    }
    if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::domain(format!("{name} must be positive")));
    }
    Ok(())
}

/// `det[1, q, …, q^{ν−1}, e^{−q_i x_j}]` (rows `i`).
fn q_block(q: &[f64], nu: usize, x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(q.len(), q.len(), |i, c| {
        if c < nu {
            q[i].powi(c as i32)
        } else {
            (-q[i] * x[c - nu]).exp()
        }
    })
}

/// `det[x_j^{−κ−1} e^{−α y_l / x_j}]` in log form, entry-wise scaled.
fn xy_block(alpha: f64, kappa: u32, x: &[f64], y: &[f64]) -> Result<SignedLog> {
    let n = x.len();
    // pull e^{-α y_l / x_max}-type factors out of each row to avoid underflow
    let mut shift = SignedLog::ONE;
    let m = DMatrix::from_fn(n, n, |l, j| {
        let xm = x.iter().cloned().fold(0.0, f64::max);
        let e = -alpha * y[l] / x[j] + alpha * y[l] / xm;
        (-(kappa as f64 + 1.0) * x[j].ln() + e).exp()
    });
    let xm = x.iter().cloned().fold(0.0, f64::max);
    for &yl in y {
        shift.log_abs -= alpha * yl / xm;
    }
    Ok(log_det(&m)?.mul(shift))
}

fn to_log(s: SignedLog) -> Result<f64> {
    if s.sign == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if s.sign < 0.0 {
        return Err(Error::Numeric(format!("density evaluated negative (log|p| = {})", s.log_abs)));
    }
    Ok(s.log_abs)
}

/// `ln P(x, y)` of the coupled ensemble: `(1/Z) det[ψ_l(y_j)] det[x_j^{−κ−1}
/// e^{−αy_l/x_j}] det[1, …, q^{ν−1}, e^{−q_i x_j}]`, with `ψ_l(y) =
/// y^{κ/2} I_κ(2√(δ_l y)) = δ_l^{κ/2} y^κ g_κ(δ_l y)`; the `δ^{κ/2}` factors
/// cancel against `Z`, so `δ_l = 0` is allowed.
pub fn log_jpdf_coupled(p: &CoupledParams, x: &[f64], y: &[f64]) -> Result<f64> {
    validate_coupled(p)?;
    check_distinct(&p.q, "q")?;
    check_distinct(&p.delta, "delta")?;
    check_positive(x, "x", p.n)?;
    check_positive(y, "y", p.n)?;
    let kappa = p.kappa();
    let nu = p.nu() as usize;
    let mut psi_err = None;
    let psi = DMatrix::from_fn(p.n, p.n, |l, j| {
        match g_reg(kappa, C64::new(p.delta[l] * y[j], 0.0)) {
            Ok(g) => g.re * y[j].powi(kappa as i32),
            Err(e) => {
                psi_err = Some(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = psi_err {
        return Err(e);
    }
    let d1 = log_det(&psi)?;
    let d2 = xy_block(p.alpha, kappa, x, y)?;
    let d3 = log_det(&q_block(&p.q, nu, x))?;
    let z = gram::log_normalization_reduced(&Ensemble::Coupled(p.clone()))?;
    to_log(d1.mul(d2).mul(d3).div(z))
}

/// `ln P(x)` of the generalized Wishart ensemble:
/// `(1/Z₁) det[e^{−σ_i x_j}] det[1, …, q^{ν−1}, e^{−q_i x_j}]`.
pub fn log_jpdf_wishart(p: &WishartParams, x: &[f64]) -> Result<f64> {
    validate_wishart(p)?;
    check_distinct(&p.q, "q")?;
    check_distinct(&p.sigma, "sigma")?;
    check_positive(x, "x", p.n)?;
    let nu = p.nu() as usize;
    let xm = x.iter().cloned().fold(0.0, f64::max);
    // row i scaled by e^{σ_i x_max} when σ_i < 0
    let mut shift = SignedLog::ONE;
    let s = DMatrix::from_fn(p.n, p.n, |i, j| {
        let c = if p.sigma[i] < 0.0 { p.sigma[i] * xm } else { 0.0 };
        (-p.sigma[i] * x[j] + c).exp()
    });
    for &si in &p.sigma {
        if si < 0.0 {
            shift.log_abs -= si * xm;
        }
    }
    let d1 = log_det(&s)?.mul(shift);
    let d2 = log_det(&q_block(&p.q, nu, x))?;
    let z = gram::log_normalization(&Ensemble::Wishart(p.clone()))?;
    to_log(d1.mul(d2).div(z))
}

/// `ln P₂(x, y)` of the product ensemble:
/// `(1/Z₂) Π y^κ Δ(y) det[x_j^{−κ−1} e^{−αy_l/x_j}] det[1, …, q^{ν−1}, e^{−q_i x_j}]`.
pub fn log_jpdf_product(p: &ProductParams, x: &[f64], y: &[f64]) -> Result<f64> {
    validate_product(p)?;
    check_distinct(&p.q, "q")?;
    check_positive(x, "x", p.n)?;
    check_positive(y, "y", p.n)?;
    let kappa = p.kappa();
    let nu = p.nu() as usize;
    let mut pre = crate::linalg::log_vandermonde(y);
    pre.log_abs += kappa as f64 * y.iter().map(|v| v.ln()).sum::<f64>();
    let d2 = xy_block(p.alpha, kappa, x, y)?;
    let d3 = log_det(&q_block(&p.q, nu, x))?;
    let z = gram::log_normalization(&Ensemble::Product(p.clone()))?;
    to_log(pre.mul(d2).mul(d3).div(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupled(n: usize, m: usize, l: usize, alpha: f64, q: &[f64], d: &[f64]) -> CoupledParams {
        CoupledParams { n, m, l, alpha, q: q.to_vec(), delta: d.to_vec() }
    }

    #[test]
    fn validate_examples() {
        assert!(validate_coupled(&coupled(1, 1, 1, 1.0, &[2.0], &[1.0])).is_ok());
        match validate_coupled(&coupled(1, 1, 1, 1.0, &[1.0], &[1.0])) {
            Err(Error::Validation(v)) => assert!(v[0].contains("aqd") && v[0].contains("i=1, j=1")),
            r => panic!("{r:?}"),
        }
        let w = |s: f64| WishartParams { n: 1, m: 1, sigma: vec![s], q: vec![1.0] };
        assert!(validate_wishart(&w(-0.5)).is_ok());
        assert!(validate_wishart(&w(-1.0)).is_err());
    }

    #[test]
    fn validate_reports_every_pair() {
        let p = coupled(2, 2, 2, 1.0, &[1.0, 1.5], &[1.2, 2.0]);
        match validate_coupled(&p) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn svd_examples() {
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert_eq!(squared_singular_values(&id).unwrap().values, vec![1.0; 3]);
        let d = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 2.0)]);
        let v = squared_singular_values(&d).unwrap().values;
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        let y = sample_wishart(&WishartParams { n: 3, m: 4, sigma: vec![0.0; 3], q: vec![1.0; 4] }, 7).unwrap();
        let s = squared_singular_values(&y).unwrap().values;
        let h = y.adjoint() * &y;
        let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in s.iter().zip(&e) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sampler_determinism() {
        let p = coupled(2, 3, 3, 1.0, &[1.0, 1.5, 2.0], &[0.2, 0.4]);
        assert_eq!(sample_coupled(&p, 11).unwrap(), sample_coupled(&p, 11).unwrap());
        assert_ne!(sample_coupled(&p, 11).unwrap(), sample_coupled(&p, 12).unwrap());
        let a = sample_coupled_spectra(&p, 3, 5000).unwrap();
        let b = sample_coupled_spectra(&p, 3, 5000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5000);
    }

    #[test]
    fn wishart_column_variances() {
        let p = WishartParams { n: 1, m: 2, sigma: vec![1.0], q: vec![1.0, 3.0] };
        let mut rng = stream_rng(5, 0);
        let n = 200_000;
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..n {
            let x = draw_wishart(&p, &mut rng);
            a += x[(0, 0)].norm_sqr();
            b += x[(1, 0)].norm_sqr();
        }
        let (a, b) = (a / n as f64, b / n as f64);
        assert!((a - 0.5).abs() < 5.0 * 0.5 / (n as f64).sqrt());
        assert!((b - 0.25).abs() < 5.0 * 0.25 / (n as f64).sqrt());
    }

    #[test]
    fn coupled_one_by_one_moments() {
        // q=2, δ=1, α=1: E|X|² = 1, E[G|X] = X̄√δ/α
        let p = coupled(1, 1, 1, 1.0, &[2.0], &[1.0]);
        let mut rng = stream_rng(9, 0);
        let n = 200_000;
        let (mut ex2, mut cross) = (0.0, C64::new(0.0, 0.0));
        for _ in 0..n {
            let s = draw_coupled(&p, &mut rng);
            ex2 += s.x[(0, 0)].norm_sqr();
            cross += s.g[(0, 0)] * s.x[(0, 0)];
        }
        let nf = n as f64;
        assert!((ex2 / nf - 1.0).abs() < 5.0 / nf.sqrt());
        // E[G X] = E|X|² √δ/α = 1
        assert!((cross / nf - C64::new(1.0, 0.0)).norm() < 8.0 / nf.sqrt());
    }

    #[test]
    fn independent_when_uncoupled() {
        let p = coupled(1, 1, 1, 1.0, &[2.0], &[0.0]);
        let mut rng = stream_rng(1, 0);
        let n = 100_000;
        let mut cov = C64::new(0.0, 0.0);
        for _ in 0..n {
            let s = draw_coupled(&p, &mut rng);
            cov += s.g[(0, 0)] * s.x[(0, 0)];
        }
        assert!((cov / n as f64).norm() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn wishart_one_by_one_density() {
        let p = WishartParams { n: 1, m: 1, sigma: vec![0.5], q: vec![1.0] };
        let v = log_jpdf_wishart(&p, &[2.0]).unwrap();
        assert!((v - (1.5f64.ln() - 3.0)).abs() < 1e-13);
    }

    #[test]
    fn wishart_vanishes_on_coincident_points() {
        let p = WishartParams { n: 2, m: 2, sigma: vec![0.0, 0.5], q: vec![1.0, 2.0] };
        assert_eq!(log_jpdf_wishart(&p, &[1.0, 1.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        let p = coupled(2, 2, 2, 1.0, &[2.0, 2.0], &[0.1, 0.2]);
        assert!(matches!(log_jpdf_coupled(&p, &[1.0, 2.0], &[1.0, 2.0]), Err(Error::Degeneracy(_))));
        let p = coupled(1, 1, 1, 1.0, &[2.0], &[1.0]);
        assert!(matches!(log_jpdf_coupled(&p, &[-1.0], &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn coupled_positive_on_random_points() {
        let p = coupled(2, 3, 3, 1.3, &[1.0, 1.4, 2.1], &[0.3, 0.7]);
        let mut rng = stream_rng(2, 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(0.05..4.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(0.05..4.0)).collect();
            let v = log_jpdf_coupled(&p, &x, &y).unwrap();
            assert!(v.is_finite() || v == f64::NEG_INFINITY);
        }
    }
}
