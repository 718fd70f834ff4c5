//! Finite-N correlation kernels.
//!
//! All kinds are returned in one canonical gauge:
//!
//! * coupled: `(x/y)^κ · 2∮∮ g_κ(ηx) h_κ(ζy)/(η−ζ) · Π(ζ−δ)/(η−δ) · Π(η−αq)/(ζ−αq)`,
//! * product: the coupled form at `δ = 0`, i.e. `(ζ/η)^N` in place of the `δ` product,
//! * wishart: `∮∮ e^{xη−yζ}/(η−ζ) · Π(ζ+σ)/(η+σ) · Π(η−q)/(ζ−q)`,
//!
//! with `η` around the `δ` (resp. `0`, `−σ`) cluster and `ζ` around the
//! `αq` (resp. `q`) cluster. `Gauge::Half` multiplies by `(y/x)^{κ/2}`,
//! which gives the `(ζ/η)^{κ/2} I_κ K_κ` form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{CoupledParams, Ensemble, Kind, ProductParams};
use crate::gram::{build_gram_reduced, invert_gram};
use crate::linalg::{check_distinct, log_det, SignedLog};
use crate::quadrature::{
    gauss_legendre, integrate_cauchy_pair, make_enclosing_contour, try_integrate_halfline, Contour,
    Decay, DEFAULT_TOL, NODE_CAP,
};
use crate::specfun::{g_reg, h_reg};
use crate::{Error, Result};

const START_NODES: usize = 32;
/// Clearance between the nested circles and around the `δ`/`σ` poles.
const OUTER_PAD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GramSum,
    ContourQuadrature,
    ResidueSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    /// `(x/y)^κ g h` form shared by all three kinds.
    #[default]
    Canonical,
    /// Canonical times `(y/x)^{κ/2}`.
    Half,
}

impl Gauge {
    pub fn describe(self) -> &'static str {
        match self {
            Gauge::Canonical => "canonical: (x/y)^kappa * 2 oint oint g_kappa(eta x) h_kappa(zeta y) ...",
            Gauge::Half => "half: (x/y)^(kappa/2) * 2 oint oint g_kappa(eta x) h_kappa(zeta y) ...",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteKernel {
    pub ensemble: Ensemble,
    pub method: Method,
    pub tol: f64,
    #[serde(default)]
    pub gauge: Gauge,
}

impl FiniteKernel {
    pub fn new(ensemble: Ensemble, method: Method) -> Self {
        FiniteKernel { ensemble, method, tol: DEFAULT_TOL, gauge: Gauge::Canonical }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn kind(&self) -> Kind {
        self.ensemble.kind()
    }
}

/// `ψ_i`, `φ_j` of the biorthogonal form, 1-based. `psi`/`phi` pair with
/// `gram::build_gram`; `psi_reduced` pairs with `gram::build_gram_reduced`
/// and differs only for the coupled kind (`δ_i^{κ/2}` dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalPair {
    pub ensemble: Ensemble,
}

impl BiorthogonalPair {
    pub fn new(ensemble: Ensemble) -> Self {
        BiorthogonalPair { ensemble }
    }

    pub fn psi(&self, i: usize, x: f64) -> Result<f64> {
        let r = self.psi_reduced(i, x)?;
        Ok(match &self.ensemble {
            Ensemble::Coupled(p) => r * p.delta[i - 1].powf(p.kappa() as f64 / 2.0),
            _ => r,
        })
    }

    pub fn psi_reduced(&self, i: usize, x: f64) -> Result<f64> {
        if i == 0 || i > self.ensemble.n() {
            return Err(Error::Index(format!("psi index {i} outside 1..={}", self.ensemble.n())));
        }
        Ok(match &self.ensemble {
            Ensemble::Wishart(p) => (-p.sigma[i - 1] * x).exp(),
            Ensemble::Product(p) => x.powi((p.kappa() as usize + i - 1) as i32),
            Ensemble::Coupled(p) => {
                let k = p.kappa();
                x.powi(k as i32) * g_reg(k, Complex64::new(p.delta[i - 1] * x, 0.0))?.re
            }
        })
    }

    /// Wishart `e^{−q_j y}`; product and coupled `(q_j/(αy))^{κ/2} K_κ(2√(αq_j y))`.
    pub fn phi(&self, j: usize, y: f64) -> Result<f64> {
        if j == 0 || j > self.ensemble.m() {
            return Err(Error::Index(format!("phi index {j} outside 1..={}", self.ensemble.m())));
        }
        Ok(match &self.ensemble {
            Ensemble::Wishart(p) => (-p.q[j - 1] * y).exp(),
            Ensemble::Product(p) => bessel_phi(p.kappa(), p.alpha, p.q[j - 1], y)?,
            Ensemble::Coupled(p) => bessel_phi(p.kappa(), p.alpha, p.q[j - 1], y)?,
        })
    }
}

fn bessel_phi(kappa: u32, alpha: f64, q: f64, y: f64) -> Result<f64> {
    let h = h_reg(kappa, Complex64::new(alpha * q * y, 0.0))?.re;
    Ok(h / (alpha * y).powi(kappa as i32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub est_error: f64,
}

#[derive(Debug, Clone)]
enum Prepared {
    Gram { c: DMatrix<f64>, pair: BiorthogonalPair },
    Residue { coef: DMatrix<f64> },
    Contour { outer: Contour<f64>, inner: Contour<f64> },
}

/// A kernel with its method-specific setup (inverse Gram matrix, residue
/// weights or contours) done once.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    pub kernel: FiniteKernel,
    prep: Prepared,
}

fn positive(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("{what} must be positive and finite, got {x}")));
    }
    Ok(())
}

fn check_distinct_params(e: &Ensemble) -> Result<()> {
    match e {
        Ensemble::Wishart(p) => {
            check_distinct(&p.q, "q")?;
            check_distinct(&p.sigma, "sigma")
        }
        Ensemble::Product(p) => check_distinct(&p.q, "q"),
        Ensemble::Coupled(p) => {
            check_distinct(&p.q, "q")?;
            check_distinct(&p.delta, "delta")
        }
    }
}

/// `(η-cluster, ζ-cluster)` on the real axis: `(δ, αq)`, `([0], αq)` or `(−σ, q)`.
fn clusters(e: &Ensemble) -> (Vec<f64>, Vec<f64>) {
    match e {
        Ensemble::Coupled(p) => (p.delta.clone(), p.q.iter().map(|q| p.alpha * q).collect()),
        Ensemble::Product(p) => (vec![0.0], p.q.iter().map(|q| p.alpha * q).collect()),
        Ensemble::Wishart(p) => (p.sigma.iter().map(|s| -s).collect(), p.q.clone()),
    }
}

/// Nested layout: the `ζ` circle around the `q` cluster, excluding the
/// `η` poles (and the origin for the Bessel kinds), inside an `η` circle
/// that also encloses the `η` cluster.
pub fn nested_contours(e: &Ensemble) -> Result<(Contour<f64>, Contour<f64>)> {
    e.validate().map_err(|err| Error::geometry(format!("no admissible contours: {err}")))?;
    let (a, b) = clusters(e);
    let mut excl = a.clone();
    if e.kind() != Kind::Wishart {
        excl.push(0.0);
    }
    let inner = make_enclosing_contour(&b, &excl, 0.5)?.with_nodes(START_NODES)?;
    if e.kind() != Kind::Wishart && !(inner.left() > 0.0) {
        return Err(Error::geometry("q contour reaches the branch cut of h"));
    }
    let lo = a.iter().copied().fold(inner.left(), f64::min) - OUTER_PAD;
    let hi = inner.right() + OUTER_PAD;
    let outer = Contour::through(lo, hi, START_NODES)?;
    Ok((outer, inner))
}

/// Separated layout: disjoint circles, the `η` one to the left.
pub fn separated_contours(e: &Ensemble) -> Result<(Contour<f64>, Contour<f64>)> {
    e.validate().map_err(|err| Error::geometry(format!("no admissible contours: {err}")))?;
    let (a, b) = clusters(e);
    let b_min = b.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let left = make_enclosing_contour(&a, &[b_min], 0.45)?.with_nodes(START_NODES)?;
    let mut excl = vec![a_max];
    if e.kind() != Kind::Wishart {
        excl.push(0.0);
    }
    let right = make_enclosing_contour(&b, &excl, 0.45)?.with_nodes(START_NODES)?;
    if !(left.right() < right.left()) {
        return Err(Error::geometry("clusters too close for separated contours"));
    }
    if e.kind() != Kind::Wishart && !(right.left() > 0.0) {
        return Err(Error::geometry("q contour reaches the branch cut of h"));
    }
    Ok((left, right))
}

// η-side and ζ-side factors of the separable integrand, prefactor excluded
fn side_a(e: &Ensemble, x: f64, eta: Complex64) -> Result<Complex64> {
    Ok(match e {
        Ensemble::Coupled(p) => {
            let mut v = g_reg(p.kappa(), eta * x)?;
            for &d in &p.delta {
                v /= eta - d;
            }
            for &q in &p.q {
                v *= eta - p.alpha * q;
            }
            v
        }
        Ensemble::Product(p) => {
            let mut v = g_reg(p.kappa(), eta * x)? / eta.powi(p.n as i32);
            for &q in &p.q {
                v *= eta - p.alpha * q;
            }
            v
        }
        Ensemble::Wishart(p) => {
            let mut v = (eta * x).exp();
            for &s in &p.sigma {
                v /= eta + s;
            }
            for &q in &p.q {
                v *= eta - q;
            }
            v
        }
    })
}

fn side_b(e: &Ensemble, y: f64, zeta: Complex64) -> Result<Complex64> {
    Ok(match e {
        Ensemble::Coupled(p) => {
            let mut v = h_reg(p.kappa(), zeta * y)?;
            for &d in &p.delta {
                v *= zeta - d;
            }
            for &q in &p.q {
                v /= zeta - p.alpha * q;
            }
            v
        }
        Ensemble::Product(p) => {
            let mut v = h_reg(p.kappa(), zeta * y)? * zeta.powi(p.n as i32);
            for &q in &p.q {
                v /= zeta - p.alpha * q;
            }
            v
        }
        Ensemble::Wishart(p) => {
            let mut v = (-zeta * y).exp();
            for &s in &p.sigma {
                v *= zeta + s;
            }
            for &q in &p.q {
                v /= zeta - q;
            }
            v
        }
    })
}

fn prefactor(e: &Ensemble, gauge: Gauge, x: f64, y: f64) -> f64 {
    let k = e.kappa() as f64;
    let base = match e.kind() {
        Kind::Wishart => 1.0,
        _ => 2.0 * (x / y).powf(k),
    };
    match gauge {
        Gauge::Canonical => base,
        Gauge::Half => base * (y / x).powf(k / 2.0),
    }
}

// Residue weights at (η = δ_i, ζ = αq_j), or (−σ_i, q_j), for ν = 0
fn residue_weights(e: &Ensemble) -> Result<DMatrix<f64>> {
    let (a, b) = clusters(e);
    let n = a.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = SignedLog::ONE;
            match e {
                Ensemble::Wishart(_) => {
                    // e^{−σ_i x − q_j y}/(q_j+σ_i) Π_l(q_l+σ_i)(q_j+σ_l) / Π_{k≠i}(σ_i−σ_k) Π_{l≠j}(q_j−q_l)
                    acc = acc.div(SignedLog::from_value(b[j] - a[i]));
                    for l in 0..n {
                        acc = acc
                            .mul(SignedLog::from_value(b[l] - a[i]))
                            .mul(SignedLog::from_value(b[j] - a[l]));
                        if l != i {
                            acc = acc.div(SignedLog::from_value(a[l] - a[i]));
                        }
                        if l != j {
                            acc = acc.div(SignedLog::from_value(b[j] - b[l]));
                        }
                    }
                }
                _ => {
                    // Π_{m≠j}(δ_i−αq_m)/(αq_j−αq_m) · Π_k(αq_j−δ_k) / Π_{k≠i}(δ_i−δ_k)
                    for l in 0..n {
                        acc = acc.mul(SignedLog::from_value(b[j] - a[l]));
                        if l != j {
                            acc = acc
                                .mul(SignedLog::from_value(a[i] - b[l]))
                                .div(SignedLog::from_value(b[j] - b[l]));
                        }
                        if l != i {
                            acc = acc.div(SignedLog::from_value(a[i] - a[l]));
                        }
                    }
                }
            }
            w[(i, j)] = acc.value();
        }
    }
    Ok(w)
}

impl PreparedKernel {
    pub fn new(kernel: FiniteKernel) -> Result<Self> {
        let e = &kernel.ensemble;
        e.validate()?;
        if !(kernel.tol > 0.0) {
            return Err(Error::Parameter("tol must be positive".into()));
        }
        let prep = match kernel.method {
            Method::GramSum => {
                check_distinct_params(e)?;
                let a = build_gram_reduced(e)?;
                let c = invert_gram(&a)?.entries;
                Prepared::Gram { c, pair: BiorthogonalPair::new(e.clone()) }
            }
            Method::ResidueSum => {
                if e.kind() == Kind::Product || e.nu() != 0 {
                    return Err(Error::Method(
                        "residue-sum needs kind wishart or coupled with nu = 0".into(),
                    ));
                }
                check_distinct_params(e)?;
                Prepared::Residue { coef: residue_weights(e)? }
            }
            Method::ContourQuadrature => {
                let (outer, inner) = nested_contours(e)?;
                Prepared::Contour { outer, inner }
            }
        };
        Ok(PreparedKernel { kernel, prep })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.kernel.ensemble
    }

    /// `(η circle, ζ circle)` when the method is contour quadrature.
    pub fn contours(&self) -> Option<(Contour<f64>, Contour<f64>)> {
        match &self.prep {
            Prepared::Contour { outer, inner } => Some((*outer, *inner)),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval_with_error(x, y)?.value)
    }

    pub fn eval_with_error(&self, x: f64, y: f64) -> Result<KernelValue> {
        positive(x, "x")?;
        positive(y, "y")?;
        let e = &self.kernel.ensemble;
        let pre = prefactor(e, self.kernel.gauge, x, y);
        match &self.prep {
            Prepared::Gram { c, pair } => {
                let (n, m, nu) = (e.n(), e.m(), e.nu() as usize);
                let psi: Vec<f64> = (1..=n).map(|i| pair.psi_reduced(i, x)).collect::<Result<_>>()?;
                let phi: Vec<f64> = (1..=m).map(|j| pair.phi(j, y)).collect::<Result<_>>()?;
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..m {
                        s += psi[i] * c[(i + nu, j)] * phi[j];
                    }
                }
                // the biorthogonal functions already carry the canonical gauge
                let gauge = match self.kernel.gauge {
                    Gauge::Canonical => 1.0,
                    Gauge::Half => (y / x).powf(e.kappa() as f64 / 2.0),
                };
                Ok(KernelValue { value: s * gauge, est_error: 0.0 })
            }
            Prepared::Residue { coef } => {
                let (a, b) = clusters(e);
                let n = a.len();
                let k = e.kappa();
                let mut s = 0.0;
                for i in 0..n {
                    let f = match e {
                        Ensemble::Wishart(_) => (a[i] * x).exp(),
                        _ => g_reg(k, Complex64::new(a[i] * x, 0.0))?.re,
                    };
                    for j in 0..n {
                        let g = match e {
                            Ensemble::Wishart(_) => (-b[j] * y).exp(),
                            _ => h_reg(k, Complex64::new(b[j] * y, 0.0))?.re,
                        };
                        s += f * coef[(i, j)] * g;
                    }
                }
                Ok(KernelValue { value: pre * s, est_error: 0.0 })
            }
            Prepared::Contour { outer, inner } => {
                let r = integrate_cauchy_pair(
                    |eta| side_a(e, x, eta),
                    outer,
                    |zeta| side_b(e, y, zeta),
                    inner,
                    self.kernel.tol,
                )?;
                Ok(KernelValue { value: pre * r.value.re, est_error: pre.abs() * r.est_error })
            }
        }
    }

    /// `det[K(p_i, p_j)]`.
    pub fn rho_k(&self, points: &[f64]) -> Result<f64> {
        if points.len() > self.ensemble().n() {
            return Err(Error::Parameter(format!(
                "k = {} exceeds N = {}",
                points.len(),
                self.ensemble().n()
            )));
        }
        let k = points.len();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = self.eval(points[i], points[j])?;
            }
        }
        Ok(log_det(&m)?.value())
    }

    /// Row-major over `xs` then `ys`.
    pub fn grid(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<(f64, f64, KernelValue)>> {
        let pts: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
        pts.par_iter()
            .map(|&(x, y)| Ok((x, y, self.eval_with_error(x, y)?)))
            .collect()
    }

    /// `∫₀^∞ K(t,t) dt`, which equals `N`.
    pub fn trace_integral(&self, tol: f64) -> Result<f64> {
        let cut = decay_cutoff(self.ensemble(), tol);
        let r = try_integrate_halfline(|t| self.eval(t, t), Decay::Truncated(cut), tol)?;
        Ok(r.value.re)
    }

    /// `∫₀^∞ K(x,t) K(t,y) dt`, which equals `K(x,y)`.
    pub fn reproducing_integral(&self, x: f64, y: f64, tol: f64) -> Result<f64> {
        let cut = decay_cutoff(self.ensemble(), tol);
        let r = try_integrate_halfline(
            |t| Ok(self.eval(x, t)? * self.eval(t, y)?),
            Decay::Truncated(cut),
            tol,
        )?;
        Ok(r.value.re)
    }
}

/// Point beyond which `K(t,t)` is below `tol·10⁻²` relative to its bulk,
/// from `K_κ(2√z) ~ e^{−2√z}` and `I_κ(2√z) ~ e^{2√z}`.
pub fn decay_cutoff(e: &Ensemble, tol: f64) -> f64 {
    let l = (1e2 / tol).ln() + 20.0 + 2.0 * e.m() as f64;
    match e {
        Ensemble::Wishart(p) => {
            let qmin = p.q.iter().copied().fold(f64::INFINITY, f64::min);
            let smin = p.sigma.iter().copied().fold(f64::INFINITY, f64::min);
            l / (qmin + smin)
        }
        Ensemble::Product(p) => {
            let qmin = p.q.iter().copied().fold(f64::INFINITY, f64::min);
            (l / (2.0 * (p.alpha * qmin).sqrt())).powi(2)
        }
        Ensemble::Coupled(p) => {
            let qmin = p.q.iter().copied().fold(f64::INFINITY, f64::min);
            let dmax = p.delta.iter().copied().fold(0.0, f64::max);
            (l / (2.0 * ((p.alpha * qmin).sqrt() - dmax.sqrt()))).powi(2)
        }
    }
}

pub fn kernel_eval(k: &FiniteKernel, x: f64, y: f64) -> Result<f64> {
    PreparedKernel::new(k.clone())?.eval(x, y)
}

pub fn rho_k(k: &FiniteKernel, points: &[f64]) -> Result<f64> {
    PreparedKernel::new(k.clone())?.rho_k(points)
}

/// `K(x,y) = −∫₀^∞ ds F₁(x;s) F₂(y;s)` with `u = e^{−s}`, where
/// `F₁ = ∮ e^{sη}A(η)` and `F₂ = ∮ e^{−sζ}B(ζ)` on separated circles.
/// The `s` integral uses Gauss–Legendre panels of width `1/gap` up to the
/// point where `e^{−s·gap}` drops below `tol·10⁻⁴`; the circle node count is
/// doubled until two passes agree.
pub fn kernel_factorized(k: &FiniteKernel, x: f64, y: f64) -> Result<f64> {
    positive(x, "x")?;
    positive(y, "y")?;
    let e = &k.ensemble;
    let (ca, cb) = separated_contours(e)?;
    let gap = cb.left() - ca.right();
    let s_max = (1e4 / k.tol).ln() / gap;
    let panels = (s_max * gap).ceil().max(1.0) as usize * 2;
    let width = s_max / panels as f64;
    let (gx, gw) = gauss_legendre::<f64>(24);
    let mut s_nodes = Vec::with_capacity(panels * gx.len());
    for p in 0..panels {
        let a = p as f64 * width;
        for (t, w) in gx.iter().zip(&gw) {
            s_nodes.push((a + 0.5 * width * (t + 1.0), 0.5 * width * w));
        }
    }
    let pass = |n: usize| -> Result<f64> {
        let na = ca.node_set(n);
        let nb = cb.node_set(n);
        let av: Vec<Complex64> = na
            .z
            .iter()
            .zip(&na.w)
            .map(|(&z, &w)| Ok(side_a(e, x, z)? * w))
            .collect::<Result<_>>()?;
        let bv: Vec<Complex64> = nb
            .z
            .iter()
            .zip(&nb.w)
            .map(|(&z, &w)| Ok(side_b(e, y, z)? * w))
            .collect::<Result<_>>()?;
        let total: f64 = s_nodes
            .par_iter()
            .map(|&(s, w)| {
                let f1: Complex64 = na.z.iter().zip(&av).map(|(z, a)| a * (z * s).exp()).sum();
                let f2: Complex64 = nb.z.iter().zip(&bv).map(|(z, b)| b * (-z * s).exp()).sum();
                w * (f1 * f2).re
            })
            .sum();
        Ok(-total)
    };
    let pre = prefactor(e, k.gauge, x, y);
    let mut n = START_NODES;
    let mut prev = pass(n)?;
    while 2 * n <= NODE_CAP {
        n *= 2;
        let cur = pass(n)?;
        if (cur - prev).abs() <= k.tol * cur.abs().max(1.0) {
            return Ok(pre * cur);
        }
        prev = cur;
    }
    Err(Error::Accuracy {
        msg: "factorized kernel did not converge".into(),
        estimate: f64::NAN,
        partial: (pre * prev, 0.0),
    })
}

/// `(coupled kernel at δ = 0, product kernel)`, both by contour quadrature
/// in the canonical gauge.
pub fn kernel_coupled_delta_zero_check(p: &ProductParams, x: f64, y: f64) -> Result<(f64, f64)> {
    let coupled: CoupledParams = p.as_coupled();
    let a = kernel_eval(&FiniteKernel::new(Ensemble::Coupled(coupled), Method::ContourQuadrature), x, y)?;
    let b = kernel_eval(&FiniteKernel::new(Ensemble::Product(p.clone()), Method::ContourQuadrature), x, y)?;
    Ok((a, b))
}

/// Equal-probability bins of `ρ₁(t)/N` and a Pearson χ² test of pooled
/// samples against them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    /// `bins + 1` edges from `0` to `+∞`.
    pub edges: Vec<f64>,
    pub observed: Vec<u64>,
    pub expected: f64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

const CDF_PANELS: usize = 96;

impl PreparedKernel {
    // ∫ K(t,t) dt over s ∈ [a, b] with t = c s⁴, which flattens the
    // logarithmic behaviour at t = 0
    fn diag_mass(&self, cut: f64, a: f64, b: f64, gx: &[f64], gw: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in gx.iter().zip(gw) {
            let s = 0.5 * (b - a) * x + 0.5 * (a + b);
            let t = cut * s.powi(4);
            acc += 0.5 * (b - a) * w * 4.0 * cut * s.powi(3) * self.eval(t, t)?;
        }
        Ok(acc)
    }

    /// Edges splitting `ρ₁/N` into `bins` cells of equal mass.
    pub fn density_bin_edges(&self, bins: usize) -> Result<Vec<f64>> {
        if bins < 2 {
            return Err(Error::Parameter("need at least 2 bins".into()));
        }
        let cut = decay_cutoff(self.ensemble(), 1e-12);
        let (gx, gw) = gauss_legendre::<f64>(16);
        let h = 1.0 / CDF_PANELS as f64;
        let masses = (0..CDF_PANELS)
            .into_par_iter()
            .map(|i| self.diag_mass(cut, i as f64 * h, (i + 1) as f64 * h, &gx, &gw))
            .collect::<Result<Vec<f64>>>()?;
        let total: f64 = masses.iter().sum();
        let n = self.ensemble().n() as f64;
        if (total - n).abs() > 1e-6 * n {
            return Err(Error::Accuracy {
                msg: format!("diagonal integrates to {total}, expected {n}"),
                estimate: (total - n).abs(),
                partial: (total, 0.0),
            });
        }
        let mut edges = vec![0.0];
        let mut cum = 0.0;
        let mut panel = 0;
        for k in 1..bins {
            let target = total * k as f64 / bins as f64;
            while cum + masses[panel] < target {
                cum += masses[panel];
                panel += 1;
            }
            // bisection with a secant start inside the panel
            let (a0, b0) = (panel as f64 * h, (panel + 1) as f64 * h);
            let need = target - cum;
            let (mut lo, mut hi) = (a0, b0);
            let mut s = a0 + (b0 - a0) * need / masses[panel];
            for _ in 0..60 {
                let m = self.diag_mass(cut, a0, s, &gx, &gw)?;
                if m < need {
                    lo = s;
                } else {
                    hi = s;
                }
                if hi - lo < 1e-13 {
                    break;
                }
                let t = cut * s.powi(4);
                let dens = 4.0 * cut * s.powi(3) * self.eval(t, t)?;
                let next = s - (m - need) / dens;
                s = if dens > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            }
            edges.push(cut * s.powi(4));
        }
        edges.push(f64::INFINITY);
        Ok(edges)
    }

    /// Pooled `values` against `ρ₁/N` on `bins` equal-probability cells;
    /// `dof = bins − 1`.
    pub fn chi_square(&self, values: &[f64], bins: usize) -> Result<ChiSquareTest> {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let edges = self.density_bin_edges(bins)?;
        let mut observed = vec![0u64; bins];
        for v in values {
            let k = edges.partition_point(|e| e <= v).clamp(1, bins) - 1;
            observed[k] += 1;
        }
        let expected = values.len() as f64 / bins as f64;
        let statistic = observed.iter().map(|o| (*o as f64 - expected).powi(2) / expected).sum();
        let dof = bins - 1;
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(e.to_string()))?;
        let p_value = 1.0 - dist.cdf(statistic);
        Ok(ChiSquareTest { edges, observed, expected, statistic, dof, p_value })
    }
}
