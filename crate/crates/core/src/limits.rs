//! Hard-edge limiting kernels with finite-rank perturbations, their
//! integrable decompositions, and convergence scans of rescaled finite-N
//! coupled kernels.
//!
//! Conventions:
//! - `K_III(x,y) = ∮_v ∮_u e^{−xv+yu} e^{−1/u+1/v} (v/u)^{ν'} / (u−v)
//!   · Π(u−π̂)/(v−π̂) · Π(v−θ̂)/(u−θ̂)` with `ν' = ν+n−m`; `u` runs around
//!   `{0} ∪ θ̂`, `v` around `{0} ∪ π̂`.
//! - `K_II` replaces `e^{−xv}` by `g(w₁)`, `e^{yu}` by `h(w₂)`,
//!   `w₁ = (1−τv)x/τ²`, `w₂ = (1−τu)y/τ²`, times `(2/τ)(x/y)^{κ/2}`.
//! - `K_I = 2∮∮ g(−xv) h(−yu) e^{−1/u+1/v} (v/u)^{ν−m} Π(v−θ̂)/(u−θ̂) / (u−v)`
//!   with `u` on a parabola through the origin.
//!
//! All circle integrals carry the `1/2πi` normalization.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{validate_coupled, CoupledParams};
use crate::quadrature::{gauss_legendre, integrate_cauchy_pair, try_integrate_contour, Contour};
use crate::specfun::{bessel_j, g_reg, h_reg};
use crate::{Error, Result};

const LIMIT_TOL: f64 = 1e-12;
const SCAN_TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn next_pow2(n: f64) -> usize {
    (n.max(8.0).ceil() as usize).next_power_of_two()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    #[serde(default)]
    pub pi_hat: Vec<f64>,
    #[serde(default)]
    pub theta_hat: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    I,
    II,
    III,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub regime: Regime,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub perturbations: PerturbationSet,
    #[serde(default)]
    pub kappa: u32,
    #[serde(default)]
    pub nu: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum MuSchedule {
    Constant { mu0: f64 },
    /// `μ = τ/(4N)`
    Critical { tau: f64 },
    /// `μ = c/N^{3/2}`
    Vanishing { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KIRoute {
    #[default]
    Hankel,
    BesselComposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "to-I")]
    ToI,
    #[serde(rename = "to-III")]
    ToIII,
}

/// Base kernel, rank-one factors at `(x, y)`, and their reconstruction
/// `base − Σ Λ̃Ξ̃ + Σ ΛΞ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub base: f64,
    pub lambda_tilde: Vec<f64>,
    pub xi_tilde: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    /// `N` for hard-edge scans, `τ` for interpolation scans.
    pub param: f64,
    pub x: f64,
    pub y: f64,
    pub finite: Option<f64>,
    pub limit: Option<f64>,
    pub rel_error: Option<f64>,
    pub est_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    pub params: Vec<f64>,
    pub probes: Vec<(f64, f64)>,
    /// Ordered by parameter, then probe.
    pub rows: Vec<ScanRow>,
}

impl PerturbationSet {
    pub fn new(pi_hat: Vec<f64>, theta_hat: Vec<f64>) -> Self {
        PerturbationSet { pi_hat, theta_hat }
    }

    pub fn n(&self) -> usize {
        self.pi_hat.len()
    }

    pub fn m(&self) -> usize {
        self.theta_hat.len()
    }

    fn theta_abs_max(&self) -> f64 {
        self.theta_hat.iter().fold(0.0, |a, t| a.max(t.abs()))
    }

    fn pi_max(&self) -> f64 {
        self.pi_hat.iter().fold(0.0, |a: f64, p| a.max(*p))
    }

    /// Parameter bounds of the regime; `tau` is used for regime II only.
    pub fn validate(&self, regime: Regime, tau: Option<f64>) -> Result<()> {
        let mut out = Vec::new();
        for (i, v) in self.pi_hat.iter().chain(&self.theta_hat).enumerate() {
            if !v.is_finite() {
                out.push(format!("perturbation entry {} is not finite", i + 1));
            }
        }
        let pmin = self.pi_hat.iter().copied().fold(f64::INFINITY, f64::min);
        match regime {
            Regime::I => {
                if !self.pi_hat.is_empty() {
                    out.push("regime I takes no pi_hat".into());
                }
                for (k, t) in self.theta_hat.iter().enumerate() {
                    if !(*t <= 0.0) {
                        out.push(format!("regime I needs theta_hat[{}] = {t} <= 0", k + 1));
                    }
                }
            }
            Regime::II | Regime::III => {
                let bound = if regime == Regime::II {
                    match tau {
                        Some(t) if t > 0.0 && t.is_finite() => 1.0 / t,
                        _ => {
                            out.push("regime II needs a positive tau".into());
                            f64::INFINITY
                        }
                    }
                } else {
                    f64::INFINITY
                };
                for (l, p) in self.pi_hat.iter().enumerate() {
                    if !(*p >= 0.0 && *p < bound) {
                        out.push(format!("pi_hat[{}] = {p} outside [0, {bound})", l + 1));
                    }
                }
                for (k, t) in self.theta_hat.iter().enumerate() {
                    if !(*t <= pmin) {
                        out.push(format!("theta_hat[{}] = {t} exceeds min pi_hat = {pmin}", k + 1));
                    }
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(out))
        }
    }
}

impl MuSchedule {
    pub fn mu(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        let mu = match *self {
            MuSchedule::Constant { mu0 } => mu0,
            MuSchedule::Critical { tau } => tau / (4.0 * nf),
            MuSchedule::Vanishing { c } => c / nf.powf(1.5),
        };
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Parameter(format!("schedule gives mu = {mu} outside (0, 1] at N = {n}")));
        }
        Ok(mu)
    }
}

impl ScanTable {
    /// Relative errors along the parameter ladder at probe `k`; `None`
    /// where a cell failed.
    pub fn errors_at(&self, k: usize) -> Vec<Option<f64>> {
        let np = self.probes.len();
        (0..self.params.len()).map(|i| self.rows[i * np + k].rel_error).collect()
    }

    /// Strictly decreasing errors at every probe, with no failed cells.
    pub fn is_monotone(&self) -> bool {
        (0..self.probes.len()).all(|k| {
            let e = self.errors_at(k);
            e.iter().all(Option::is_some) && e.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
        })
    }

    /// Largest relative error at the last parameter value.
    pub fn final_error(&self) -> Option<f64> {
        let np = self.probes.len();
        let last = self.params.len().checked_sub(1)?;
        self.rows[last * np..].iter().try_fold(0.0f64, |a, r| r.rel_error.map(|e| a.max(e)))
    }
}

// ---------------------------------------------------------------------------
// Bessel kernel

/// `(√x J_{ν+1}(√x) J_ν(√y) − √y J_{ν+1}(√y) J_ν(√x)) / (2(x−y))`, with the
/// diagonal `¼(J_ν² − J_{ν+1}J_{ν−1})` used when `|x−y| < 1e−6·max(x,y)`.
pub fn bessel_kernel_closed(nu: u32, x: f64, y: f64) -> f64 {
    let j = |k: i64, t: f64| -> f64 {
        let (kk, sign) = if k < 0 { ((-k) as u32, if k % 2 == 0 { 1.0 } else { -1.0 }) } else { (k as u32, 1.0) };
        sign * bessel_j(kk, c(t)).map(|v| v.re).unwrap_or(f64::NAN)
    };
    let n = nu as i64;
    if (x - y).abs() < 1e-6 * x.max(y) || x == y {
        let s = (0.5 * (x + y)).sqrt();
        return 0.25 * (j(n, s).powi(2) - j(n + 1, s) * j(n - 1, s));
    }
    let (sx, sy) = (x.sqrt(), y.sqrt());
    (sx * j(n + 1, sx) * j(n, sy) - sy * j(n + 1, sy) * j(n, sx)) / (2.0 * (x - y))
}

/// The closed form in the gauge and scale of `kernel_III` at `n = m = 0`:
/// `4 (y/x)^{ν/2} K_Bessel(4x, 4y)`.
pub fn bessel_kernel_scaled(nu: u32, x: f64, y: f64) -> f64 {
    4.0 * (y / x).powf(nu as f64 / 2.0) * bessel_kernel_closed(nu, 4.0 * x, 4.0 * y)
}

// ---------------------------------------------------------------------------
// Shared integrand pieces

fn prod_minus(z: Complex64, pts: &[f64]) -> Complex64 {
    pts.iter().fold(c(1.0), |a, p| a * (z - p))
}

// (1/2πi)² ∮_v ∮_u A(v) B(u) / (u − v)
fn cauchy_uv<FA, FB>(fa: FA, cv: &Contour<f64>, fb: FB, cu: &Contour<f64>, tol: f64) -> Result<(f64, f64)>
where
    FA: Fn(Complex64) -> Result<Complex64> + Sync,
    FB: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let r = integrate_cauchy_pair(fa, cv, fb, cu, tol)?;
    Ok((-r.value.re, r.est_error))
}

fn contour_integral<F>(f: F, cont: &Contour<f64>, tol: f64) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    Ok(try_integrate_contour(f, cont, tol)?.value.re)
}

// ---------------------------------------------------------------------------
// K_III

// (r_u, r_v): circles at 0 sized to the saddle radii 1/√y, 1/√x and kept
// apart by a factor 1.25.
fn kernel_iii_radii(p: &PerturbationSet, x: f64, y: f64) -> (f64, f64) {
    let mut ru = (1.0 / y.sqrt()).max(1.4 * p.theta_abs_max());
    let mut rv = (1.0 / x.sqrt()).max(1.4 * p.pi_max());
    if rv >= ru {
        rv = rv.max(1.25 * ru);
    } else {
        ru = ru.max(1.25 * rv);
    }
    (ru, rv)
}

fn kernel_iii_raw(p: &PerturbationSet, nup: i32, x: f64, y: f64) -> Result<(f64, f64)> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::domain(format!("kernel_III needs positive arguments, got ({x}, {y})")));
    }
    let (ru, rv) = kernel_iii_radii(p, x, y);
    let cu = Contour::new(0.0, ru, 64)?;
    let cv = Contour::new(0.0, rv, 64)?;
    let a = |v: Complex64| -> Result<Complex64> {
        Ok((-x * v + 1.0 / v).exp() * v.powi(nup) * prod_minus(v, &p.theta_hat) / prod_minus(v, &p.pi_hat))
    };
    let b = |u: Complex64| -> Result<Complex64> {
        Ok((y * u - 1.0 / u).exp() * u.powi(-nup) * prod_minus(u, &p.pi_hat) / prod_minus(u, &p.theta_hat))
    };
    cauchy_uv(a, &cv, b, &cu, LIMIT_TOL)
}

fn nu_prime(p: &PerturbationSet, nu: i32) -> i32 {
    nu + p.n() as i32 - p.m() as i32
}

/// `K_III^{(n,m)}(x, y)`; negative `ν` is accepted for duality checks.
pub fn kernel_iii(p: &PerturbationSet, nu: i32, x: f64, y: f64) -> Result<f64> {
    p.validate(Regime::III, None)?;
    Ok(kernel_iii_raw(p, nu_prime(p, nu), x, y)?.0)
}

// ---------------------------------------------------------------------------
// K_II

#[derive(Debug, Clone, Copy)]
struct IIContours {
    u: Contour<f64>,
    v: Contour<f64>,
}

// u crosses the axis at −max(2, 1.5|θ̂|) and min(0.6, 0.8/τ); v surrounds
// it and π̂ and may cross 1/τ since g is entire.
fn kernel_ii_contours(p: &PerturbationSet, tau: f64, nodes: usize) -> Result<IIContours> {
    if p.pi_max() > 0.8 / tau {
        return Err(Error::geometry(format!(
            "pi_hat = {} is closer to 1/tau = {} than the 0.8/tau clearance",
            p.pi_max(),
            1.0 / tau
        )));
    }
    let left = -(2.0f64).max(1.5 * p.theta_abs_max());
    let mut right = (0.6f64).min(0.8 / tau);
    let tmax = p.theta_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tmax >= right {
        right = 0.5 * (tmax + 1.0 / tau);
    }
    let vr = (1.5f64).max(1.3 * p.pi_max() + 0.3).max(right + 0.3);
    Ok(IIContours {
        u: Contour::through(left, right, nodes)?,
        v: Contour::through(1.6 * left - 0.5, vr, nodes)?,
    })
}

fn ii_w(tau: f64, z: Complex64, x: f64) -> Complex64 {
    (c(1.0) - z * tau) * (x / (tau * tau))
}

fn kernel_ii_raw(p: &PerturbationSet, tau: f64, kappa: u32, nup: i32, x: f64, y: f64) -> Result<(f64, f64)> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(format!("kernel_II needs positive arguments, got ({x}, {y})")));
    }
    let k = kernel_ii_contours(p, tau, 256)?;
    let a = |v: Complex64| -> Result<Complex64> {
        Ok(g_reg(kappa, ii_w(tau, v, x))? * (1.0 / v).exp() * v.powi(nup) * prod_minus(v, &p.theta_hat)
            / prod_minus(v, &p.pi_hat))
    };
    let b = |u: Complex64| -> Result<Complex64> {
        Ok(h_reg(kappa, ii_w(tau, u, y))? * (-1.0 / u).exp() * u.powi(-nup) * prod_minus(u, &p.pi_hat)
            / prod_minus(u, &p.theta_hat))
    };
    let (v, e) = cauchy_uv(a, &k.v, b, &k.u, LIMIT_TOL)?;
    let pre = (2.0 / tau) * (x / y).powf(kappa as f64 / 2.0);
    Ok((pre * v, pre.abs() * e))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("tau = {tau} must be positive")));
    }
    Ok(())
}

pub fn kernel_ii(p: &PerturbationSet, tau: f64, kappa: u32, nu: u32, x: f64, y: f64) -> Result<f64> {
    check_tau(tau)?;
    p.validate(Regime::II, Some(tau))?;
    Ok(kernel_ii_raw(p, tau, kappa, nu_prime(p, nu as i32), x, y)?.0)
}

// ---------------------------------------------------------------------------
// Composition of K_III with an s-contour and a t-half-line integral

#[derive(Debug, Clone, Copy)]
enum Compose {
    I,
    II(f64),
}

// ∮ds ∫dt s^{−κ−1} t^{κ−1} e^{s−t} K_III(X/s, Y/t) for the two scalings.
// The v side is expanded in a Laurent series on |v| = R_v; each t node
// then reduces to moments of the u side on the saddle circle |u| = 1/w,
// w = √(Y/t).
fn compose_iii(mode: Compose, p: &PerturbationSet, kappa: u32, nup: i32, x: f64, y: f64) -> Result<f64> {
    const K: usize = 80;
    let y_eff = match mode {
        Compose::I => y,
        Compose::II(t) => y / t,
    };
    let sigma = |v: Complex64| -> Complex64 {
        match mode {
            Compose::I => -v * x,
            Compose::II(t) => ii_w(t, v, x),
        }
    };
    let wlo = (y_eff / 90.0).sqrt();
    let wmax = match mode {
        Compose::I => 600.0,
        Compose::II(t) => 0.5 * t + (0.25 * t * t + 80.0 * t).sqrt(),
    };
    let rmax = (1.0 / wlo).max(1.5 * p.theta_abs_max());
    let rv = 3.0 * rmax.max(1.3 * p.pi_max());

    // a(v) = A(v) e^{1/v} v^{ν'} Π(v−θ̂)/Π(v−π̂), A(v) = ∮ds s^{−κ−1} e^{s+σ(v)/s}
    let smax = match mode {
        Compose::I => x * rv,
        Compose::II(t) => x / (t * t) * (1.0 + t * rv),
    };
    let rs = smax.sqrt().max(1.0);
    let ns = next_pow2(16.0 * (rs + smax / rs) + 128.0);
    let nv = next_pow2(16.0 * (rs + smax / rs) + 4.0 * K as f64).max(512);
    let cs = Contour::new(0.0, rs, ns)?.node_set(ns);
    let cvs = Contour::new(0.0, rv, nv)?.node_set(nv);
    let av: Vec<Complex64> = cvs
        .z
        .par_iter()
        .map(|&v| {
            let sg = sigma(v);
            let mut acc = c(0.0);
            for (s, w) in cs.z.iter().zip(&cs.w) {
                acc += w * s.powi(-(kappa as i32) - 1) * (s + sg / s).exp();
            }
            acc * (1.0 / v).exp() * v.powi(nup) * prod_minus(v, &p.theta_hat) / prod_minus(v, &p.pi_hat)
        })
        .collect();
    let mut ck = vec![c(0.0); K];
    for (j, (&v, &w)) in cvs.z.iter().zip(&cvs.w).enumerate() {
        let inv = 1.0 / v;
        let mut pw = w * av[j] * inv;
        for slot in ck.iter_mut() {
            *slot += pw;
            pw *= inv;
        }
    }

    let (gx, gw) = gauss_legendre::<f64>(10);
    let panel = std::f64::consts::FRAC_PI_4;
    // panels of width π/4, narrowed to w/4 where e^{−Y/w²} varies fastest
    let mut edges = vec![wlo];
    while *edges.last().unwrap() < wmax {
        let a = *edges.last().unwrap();
        edges.push((a + panel.min(0.25 * a)).min(wmax));
    }
    let nodes: Vec<(f64, f64)> = edges
        .windows(2)
        .flat_map(|e| {
            let (a, b) = (e[0], e[1]);
            gx.iter().zip(&gw).map(move |(t, w)| (0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w)).collect::<Vec<_>>()
        })
        .collect();
    let ckr = &ck;
    let total: f64 = nodes
        .par_iter()
        .map(|&(w, qw)| -> f64 {
            let b = w * w;
            let mut ru = (1.0 / w).min(rmax);
            for t in &p.theta_hat {
                if 0.6 * ru < t.abs() && t.abs() < 1.5 * ru {
                    ru = t.abs() / 1.6;
                }
            }
            // terms with |c_k| ru^k below 1e-18 of the largest are dropped
            let mut kmax = K;
            let mags: Vec<f64> = (0..K).map(|k| ckr[k].norm() * ru.powi(k as i32)).collect();
            let big = mags.iter().copied().fold(0.0, f64::max);
            while kmax > 1 && mags[kmax - 1] < 1e-18 * big {
                kmax -= 1;
            }
            let nu_ = next_pow2(8.0 * w + 64.0).max(64);
            let cu = Contour::new(0.0, ru, nu_).unwrap().node_set(nu_);
            let mut mom = vec![c(0.0); kmax];
            for (u, wu) in cu.z.iter().zip(&cu.w) {
                let mut f = wu * (b * u - 1.0 / u).exp() * u.powi(-nup) * prod_minus(*u, &p.pi_hat)
                    / prod_minus(*u, &p.theta_hat);
                for slot in mom.iter_mut() {
                    *slot += f;
                    f *= u;
                }
            }
            for (j, &t) in p.theta_hat.iter().enumerate() {
                if t.abs() < ru {
                    continue;
                }
                let tc = c(t);
                let mut r = (b * tc - 1.0 / tc).exp() * tc.powi(-nup) * prod_minus(tc, &p.pi_hat);
                for (l, &t2) in p.theta_hat.iter().enumerate() {
                    if l != j {
                        r /= tc - t2;
                    }
                }
                for slot in mom.iter_mut() {
                    *slot += r;
                    r *= tc;
                }
            }
            let f: Complex64 = -(0..kmax).map(|k| ckr[k] * mom[k]).sum::<Complex64>();
            let t = y_eff / b;
            let mut weight = 2.0 * y_eff / (w * w * w) * t.powi(kappa as i32 - 1) * (-t).exp();
            if let Compose::II(tau) = mode {
                weight *= (-b / tau).exp();
            }
            qw * weight * f.re
        })
        .sum();
    Ok(match mode {
        Compose::I => total,
        Compose::II(t) => total / t * (x / y).powf(kappa as f64 / 2.0),
    })
}

/// `K_II` through its representation as an `s, t` double integral of
/// `K_III` at the arguments `x/(sτ), y/(tτ)`.
pub fn kernel_ii_composition(p: &PerturbationSet, tau: f64, kappa: u32, nu: u32, x: f64, y: f64) -> Result<f64> {
    check_tau(tau)?;
    p.validate(Regime::II, Some(tau))?;
    check_positive(x, y)?;
    compose_iii(Compose::II(tau), p, kappa, nu_prime(p, nu as i32), x, y)
}

fn check_positive(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::domain(format!("arguments must be positive, got ({x}, {y})")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// K_I

// u = −1/ξ, ξ = μ₀(1+is)²: a closed loop through 0 around {0} ∪ θ̂.
// Returns nodes and positively oriented weights du/(2πi).
fn parabola_nodes(mu0: f64, ns: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let s_max = (10.0f64).max((40.0 / mu0).sqrt());
    let ds = 2.0 * s_max / (ns - 1) as f64;
    let two_pi_i = Complex64::new(0.0, std::f64::consts::TAU);
    (0..ns)
        .map(|k| {
            let s = -s_max + k as f64 * ds;
            let one_is = Complex64::new(1.0, s);
            let xi = one_is * one_is * mu0;
            let dxi = Complex64::new(0.0, 2.0 * mu0) * one_is * ds;
            // increasing s runs clockwise around the origin
            (-1.0 / xi, -(dxi / (xi * xi)) / two_pi_i)
        })
        .unzip()
}

fn ki_geometry(theta: &[f64], x: f64, y: f64) -> (f64, f64) {
    let tmax = theta.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let mut mu0 = y.sqrt();
    if tmax > 0.0 {
        mu0 = mu0.min(0.5 / tmax);
    }
    let rv = (1.5 / mu0).max(1.0 / x.sqrt());
    (mu0, rv)
}

// 2∮_v∮_u A(v)B(u)/(u−v), node counts doubled until two levels agree.
fn ki_hankel_sum<FA, FB>(fa: FA, fb: FB, mu0: f64, rv: f64) -> Result<(f64, f64)>
where
    FA: Fn(Complex64) -> Result<Complex64> + Sync,
    FB: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let level = |ns: usize, nv: usize| -> Result<f64> {
        let (uz, uw) = parabola_nodes(mu0, ns);
        let vs = Contour::new(0.0, rv, nv)?.node_set(nv);
        let bu: Vec<Complex64> = uz.par_iter().zip(&uw).map(|(u, w)| fb(*u).map(|b| b * w)).collect::<Result<_>>()?;
        let av: Vec<Complex64> =
            vs.z.par_iter().zip(&vs.w).map(|(v, w)| fa(*v).map(|a| a * w)).collect::<Result<_>>()?;
        let s: Complex64 = vs
            .z
            .par_iter()
            .zip(&av)
            .map(|(v, a)| {
                let mut acc = c(0.0);
                for (u, b) in uz.iter().zip(&bu) {
                    if b.norm() > 0.0 {
                        acc += b / (u - v);
                    }
                }
                a * acc
            })
            .sum();
        Ok(2.0 * s.re)
    };
    let (mut ns, mut nv) = (400usize, 256usize);
    let mut prev = level(ns, nv)?;
    for _ in 0..4 {
        ns = 2 * ns - 1;
        nv *= 2;
        let cur = level(ns, nv)?;
        let diff = (cur - prev).abs();
        if diff <= 1e-11 * cur.abs().max(1e-3) {
            return Ok((cur, diff));
        }
        prev = cur;
    }
    Err(Error::Accuracy {
        msg: "kernel_I contour sums did not settle".into(),
        estimate: f64::NAN,
        partial: (prev, 0.0),
    })
}

// e^{−1/u} underflows near the origin; those nodes contribute nothing.
fn exp_neg_inv(u: Complex64) -> Complex64 {
    let e = -1.0 / u;
    if e.re < -700.0 {
        c(0.0)
    } else {
        e.exp()
    }
}

fn kernel_i_hankel_raw(theta: &[f64], kappa: u32, nup: i32, x: f64, y: f64) -> Result<(f64, f64)> {
    let (mu0, rv) = ki_geometry(theta, x, y);
    let a = |v: Complex64| -> Result<Complex64> {
        Ok(g_reg(kappa, -v * x)? * (1.0 / v).exp() * v.powi(nup) * prod_minus(v, theta))
    };
    let b = |u: Complex64| -> Result<Complex64> {
        let e = exp_neg_inv(u);
        if e.norm() == 0.0 {
            return Ok(c(0.0));
        }
        Ok(h_reg(kappa, -u * y)? * e * u.powi(-nup) / prod_minus(u, theta))
    };
    ki_hankel_sum(a, b, mu0, rv)
}

pub fn kernel_i(p: &PerturbationSet, kappa: u32, nu: u32, x: f64, y: f64, route: KIRoute) -> Result<f64> {
    p.validate(Regime::I, None)?;
    check_positive(x, y)?;
    let nup = nu as i32 - p.m() as i32;
    match route {
        KIRoute::Hankel => Ok(kernel_i_hankel_raw(&p.theta_hat, kappa, nup, x, y)?.0),
        KIRoute::BesselComposition => compose_iii(Compose::I, p, kappa, nup, x, y),
    }
}

// ---------------------------------------------------------------------------
// Integrable decompositions

fn assemble(base: f64, lt: Vec<f64>, xt: Vec<f64>, l: Vec<f64>, x: Vec<f64>) -> Decomposition {
    let total = base - lt.iter().zip(&xt).map(|(a, b)| a * b).sum::<f64>()
        + l.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
    Decomposition { base, lambda_tilde: lt, xi_tilde: xt, lambda: l, xi: x, total }
}

/// `K = K_base|_{ν→ν+n−m} − Σ_i Λ̃_i(x) Ξ̃_i(y) + Σ_j Λ_j(x) Ξ_j(y)` for the
/// regime's kernel; `tau` is read for regime II only. Regime I uses the
/// Hankel route for the base kernel.
pub fn decompose_integrable(
    which: Regime,
    p: &PerturbationSet,
    tau: Option<f64>,
    kappa: u32,
    nu: u32,
    x: f64,
    y: f64,
) -> Result<Decomposition> {
    p.validate(which, tau)?;
    check_positive(x, y)?;
    let (n, m) = (p.n(), p.m());
    let th = &p.theta_hat;
    let pi = &p.pi_hat;
    let empty = PerturbationSet::default();
    match which {
        Regime::III => {
            let nup = nu_prime(p, nu as i32);
            let base = kernel_iii_raw(&empty, nup, x, y)?.0;
            let (ru, rv) = kernel_iii_radii(p, x, y);
            let cu = Contour::new(0.0, ru, 64)?;
            let cv = Contour::new(0.0, rv, 64)?;
            let ev = |v: Complex64| (-x * v + 1.0 / v).exp() * v.powi(nup);
            let eu = |u: Complex64| (y * u - 1.0 / u).exp() * u.powi(-nup);
            let lt = (0..m)
                .map(|i| contour_integral(|v| Ok(ev(v) * prod_minus(v, &th[..i])), &cv, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let xt = (0..m)
                .map(|i| contour_integral(|u| Ok(eu(u) / prod_minus(u, &th[..=i])), &cu, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let l = (0..n)
                .map(|j| contour_integral(|v| Ok(ev(v) * prod_minus(v, th) / prod_minus(v, &pi[..=j])), &cv, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let xi = (0..n)
                .map(|j| contour_integral(|u| Ok(eu(u) * prod_minus(u, &pi[..j]) / prod_minus(u, th)), &cu, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            Ok(assemble(base, lt, xt, l, xi))
        }
        Regime::II => {
            let tau = tau.ok_or_else(|| Error::Parameter("regime II needs tau".into()))?;
            check_tau(tau)?;
            let nup = nu_prime(p, nu as i32);
            let base = kernel_ii_raw(&empty, tau, kappa, nup, x, y)?.0;
            let k = kernel_ii_contours(p, tau, 256)?;
            let kf = kappa as f64;
            let sx = (x / (tau * tau)).powf(kf / 2.0);
            let sy = (2.0 / tau) * (y / (tau * tau)).powf(-kf / 2.0);
            let ev = |v: Complex64| -> Result<Complex64> {
                Ok(g_reg(kappa, ii_w(tau, v, x))? * (1.0 / v).exp() * v.powi(nup) * sx)
            };
            let eu = |u: Complex64| -> Result<Complex64> {
                Ok(h_reg(kappa, ii_w(tau, u, y))? * (-1.0 / u).exp() * u.powi(-nup) * sy)
            };
            let lt = (0..m)
                .map(|i| contour_integral(|v| Ok(ev(v)? * prod_minus(v, &th[..i])), &k.v, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let xt = (0..m)
                .map(|i| contour_integral(|u| Ok(eu(u)? / prod_minus(u, &th[..=i])), &k.u, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let l = (0..n)
                .map(|j| contour_integral(|v| Ok(ev(v)? * prod_minus(v, th) / prod_minus(v, &pi[..=j])), &k.v, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let xi = (0..n)
                .map(|j| contour_integral(|u| Ok(eu(u)? * prod_minus(u, &pi[..j]) / prod_minus(u, th)), &k.u, LIMIT_TOL))
                .collect::<Result<Vec<_>>>()?;
            Ok(assemble(base, lt, xt, l, xi))
        }
        Regime::I => {
            let nup = nu as i32 - m as i32;
            let base = kernel_i_hankel_raw(&[], kappa, nup, x, y)?.0;
            let (mu0, rv) = ki_geometry(th, x, y);
            let cv = Contour::new(0.0, rv, 64)?;
            let lt = (0..m)
                .map(|i| {
                    contour_integral(
                        |v| Ok(g_reg(kappa, -v * x)? * (1.0 / v).exp() * v.powi(nup) * prod_minus(v, &th[..i])),
                        &cv,
                        LIMIT_TOL,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let xt = (0..m)
                .map(|i| {
                    parabola_integral(mu0, |u| {
                        let e = exp_neg_inv(u);
                        if e.norm() == 0.0 {
                            return Ok(c(0.0));
                        }
                        Ok(2.0 * h_reg(kappa, -u * y)? * e * u.powi(-nup) / prod_minus(u, &th[..=i]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(assemble(base, lt, xt, vec![], vec![]))
        }
    }
}

fn parabola_integral(mu0: f64, f: impl Fn(Complex64) -> Result<Complex64>) -> Result<f64> {
    let sum = |ns: usize| -> Result<f64> {
        let (z, w) = parabola_nodes(mu0, ns);
        let mut acc = c(0.0);
        for (u, wk) in z.iter().zip(&w) {
            acc += f(*u)? * wk;
        }
        Ok(acc.re)
    };
    let mut ns = 401;
    let mut prev = sum(ns)?;
    for _ in 0..6 {
        ns = 2 * ns - 1;
        let cur = sum(ns)?;
        if (cur - prev).abs() <= 1e-12 * cur.abs().max(1e-6) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Accuracy { msg: "parabola integral did not settle".into(), estimate: f64::NAN, partial: (prev, 0.0) })
}

// ---------------------------------------------------------------------------
// Finite-N parameters and the rescaled finite kernel

/// Coupled parameters for size `N` with `π_l = Nπ̂_l` (`l ≤ n`),
/// `θ_j = Nθ̂_j` (`j ≤ m`) and all other `δ, q` at their degenerate values.
/// A `π̂_l = 0` entry maps to the degenerate `δ`.
pub fn build_perturbed_params(n_size: usize, mu: f64, p: &PerturbationSet) -> Result<CoupledParams> {
    if n_size == 0 {
        return Err(Error::Parameter("N must be positive".into()));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Parameter(format!("mu = {mu} outside (0, 1]")));
    }
    if p.n() > n_size || p.m() > n_size {
        return Err(Error::Parameter(format!("rank ({}, {}) exceeds N = {n_size}", p.n(), p.m())));
    }
    let nf = n_size as f64;
    let c0 = (1.0 + mu).powi(2) / (4.0 * mu);
    let pis: Vec<f64> = p.pi_hat.iter().map(|v| if *v == 0.0 { 1.0 } else { nf * v }).collect();
    let thetas: Vec<f64> = p.theta_hat.iter().map(|v| nf * v).collect();
    let mut out = Vec::new();
    for (l, pl) in pis.iter().enumerate() {
        if !(*pl > 0.0) {
            out.push(format!("allbounds: pi_{} = {pl} must be > 0", l + 1));
        }
        if *pl > c0 {
            out.push(format!("allbounds: pi_{} = {pl} exceeds (1+mu)^2/(4mu) = {c0}, giving delta < 0", l + 1));
        }
    }
    for (j, tj) in thetas.iter().enumerate() {
        if !(*tj < 1.0) {
            out.push(format!("allbounds: theta_{} = {tj} must be < 1", j + 1));
        }
        for (l, pl) in pis.iter().enumerate() {
            if !(tj < pl) {
                out.push(format!("allbounds: theta_{} = {tj} must be < pi_{} = {pl}", j + 1, l + 1));
            }
        }
    }
    if !out.is_empty() {
        return Err(Error::Validation(out));
    }
    let alpha = (1.0 + mu) / (2.0 * mu);
    let mut delta = vec![(1.0 - mu).powi(2) / (4.0 * mu * mu); n_size];
    for (l, pl) in pis.iter().enumerate() {
        delta[l] = ((1.0 + mu).powi(2) - 4.0 * mu * pl) / (4.0 * mu * mu);
    }
    let mut q = vec![alpha; n_size];
    for (j, tj) in thetas.iter().enumerate() {
        q[j] = alpha * (1.0 - 4.0 * mu * tj / (1.0 + mu).powi(2));
    }
    // only M = N + ν entries of q are needed; callers extend for ν > 0
    let params = CoupledParams { n: n_size, m: n_size, l: n_size, alpha, q, delta };
    validate_coupled(&params)?;
    Ok(params)
}

fn with_kappa_nu(mut params: CoupledParams, kappa: u32, nu: u32) -> Result<CoupledParams> {
    let extra = params.alpha;
    params.m = params.n + nu as usize;
    params.l = params.n + kappa as usize;
    params.q.resize(params.m, extra);
    validate_coupled(&params)?;
    Ok(params)
}

/// Finite-N coupled kernel in the gauge with `(y/x)^{κ/2}` folded in, from
/// the double contour written in the shifted variables
/// `U = N û = μ(c − ζ)`, `V = N v̂ = μ(c − η)`, `c = (1+μ)²/(4μ²)`.
/// `cu`, `cv` are circles in the `û`, `v̂` planes.
pub fn finite_kernel_hat(
    params: &CoupledParams,
    mu: f64,
    x: f64,
    y: f64,
    cu: &Contour<f64>,
    cv: &Contour<f64>,
    tol: f64,
) -> Result<(f64, f64)> {
    validate_coupled(params)?;
    let nf = params.n as f64;
    let c1 = (1.0 + mu).powi(2) / (4.0 * mu * mu);
    let kappa = (params.l - params.n) as u32;
    let group = |vals: Vec<f64>| -> Vec<(f64, i32)> {
        let mut g: Vec<(f64, i32)> = Vec::new();
        for v in vals {
            match g.iter_mut().find(|(a, _)| (*a - v).abs() <= 1e-14 * a.abs().max(1.0)) {
                Some(e) => e.1 += 1,
                None => g.push((v, 1)),
            }
        }
        g
    };
    let pis = group(params.delta.iter().map(|d| mu * (c1 - d)).collect());
    let thetas = group(params.q.iter().map(|q| mu * (c1 - params.alpha * q)).collect());

    if cu.right() >= mu * c1 / nf {
        return Err(Error::geometry("u circle reaches the cut of h"));
    }
    for (t, _) in &thetas {
        if !cu.contains(c(t / nf)) {
            return Err(Error::geometry(format!("u circle misses theta = {t}")));
        }
    }
    for (p, _) in &pis {
        if !cv.contains(c(p / nf)) {
            return Err(Error::geometry(format!("v circle misses pi = {p}")));
        }
    }
    if (cv.center - cu.center).abs() + cu.radius >= cv.radius {
        return Err(Error::geometry("v circle does not surround the u circle"));
    }

    let log_a = |vh: Complex64| -> Result<Complex64> {
        let v = vh * nf;
        let eta = c(c1) - v / mu;
        let mut l = g_reg(kappa, eta * x)?.ln();
        for (p, k) in &pis {
            l -= (v - p).ln() * *k as f64;
        }
        for (t, k) in &thetas {
            l += (v - t).ln() * *k as f64;
        }
        Ok(l)
    };
    let log_b = |uh: Complex64| -> Result<Complex64> {
        let u = uh * nf;
        let zeta = c(c1) - u / mu;
        let mut l = h_reg(kappa, zeta * y)?.ln();
        for (p, k) in &pis {
            l += (u - p).ln() * *k as f64;
        }
        for (t, k) in &thetas {
            l -= (u - t).ln() * *k as f64;
        }
        Ok(l)
    };
    let shift = |f: &dyn Fn(Complex64) -> Result<Complex64>, cont: &Contour<f64>| -> Result<f64> {
        let mut s = f64::NEG_INFINITY;
        for k in 0..64 {
            s = s.max(f(cont.node(k, 64))?.re);
        }
        Ok(s)
    };
    let sa = shift(&log_a, cv)?;
    let sb = shift(&log_b, cu)?;
    let (val, err) = cauchy_uv(
        |v| Ok((log_a(v)? - sa).exp()),
        cv,
        |u| Ok((log_b(u)? - sb).exp()),
        cu,
        tol,
    )?;
    let kf = kappa as f64;
    let scale = (x / y).powf(kf / 2.0) * (2.0 / mu) * nf * (sa + sb).exp();
    Ok((val * scale, err * scale.abs()))
}

// Circles in the û, v̂ planes for each regime.
fn scan_contours(regime: Regime, p: &PerturbationSet, n_size: usize, mu: f64) -> Result<(Contour<f64>, Contour<f64>)> {
    let nf = n_size as f64;
    let cut = (1.0 + mu).powi(2) / (4.0 * mu * nf);
    match regime {
        Regime::III => {
            let ru = (0.6f64).max(1.4 * p.theta_abs_max());
            let rv = (1.6f64).max(1.4 * p.pi_max()).max(1.6 * ru);
            if ru >= cut {
                return Err(Error::geometry(format!("u radius {ru} reaches the cut at {cut}")));
            }
            Ok((Contour::new(0.0, ru, 256)?, Contour::new(0.0, rv, 256)?))
        }
        Regime::II => {
            let left = -(1.5f64).max(1.5 * p.theta_abs_max());
            let right = (0.6f64).min(0.6 * cut);
            let vr = (1.5f64).max(1.3 * p.pi_max() + 0.3);
            Ok((Contour::through(left, right, 256)?, Contour::through(1.6 * left - 0.1, vr, 256)?))
        }
        Regime::I => {
            let left = -(2.0f64).max(1.5 * p.theta_abs_max());
            let right = (0.8 / nf).min(0.8 * cut);
            let cu = Contour::through(left, right, 256)?;
            let cv = Contour::new(cu.center, 1.6 * cu.radius + 0.5, 256)?;
            Ok((cu, cv))
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn regime_limit(r: &ScalingRegime, x: f64, y: f64) -> Result<f64> {
    let p = &r.perturbations;
    match r.regime {
        Regime::III => Ok(0.5 * (x * y).powf(-0.25) * kernel_iii(p, r.nu as i32, x.sqrt(), y.sqrt())?),
        Regime::II => kernel_ii(p, r.tau.unwrap_or(f64::NAN), r.kappa, r.nu, x, y),
        Regime::I => kernel_i(p, r.kappa, r.nu, x, y, KIRoute::Hankel),
    }
}

fn scan_cell(r: &ScalingRegime, schedule: &MuSchedule, n_size: usize, x: f64, y: f64) -> Result<(f64, f64)> {
    let mu = schedule.mu(n_size)?;
    let params = with_kappa_nu(build_perturbed_params(n_size, mu, &r.perturbations)?, r.kappa, r.nu)?;
    let (cu, cv) = scan_contours(r.regime, &r.perturbations, n_size, mu)?;
    let nf = n_size as f64;
    let kf = r.kappa as f64;
    match r.regime {
        Regime::III | Regime::II => {
            let s = 4.0 * nf * nf;
            let (k, e) = finite_kernel_hat(&params, mu, x / s, y / s, &cu, &cv, SCAN_TOL)?;
            let f = if r.regime == Regime::III { (0.5 * (y.sqrt() - x.sqrt()) / (mu * nf)).exp() } else { 1.0 };
            Ok((k * f / s, e * f / s))
        }
        Regime::I => {
            let s = mu / nf;
            let (k, e) = finite_kernel_hat(&params, mu, s * x, s * y, &cu, &cv, SCAN_TOL)?;
            let g = s * (y / x).powf(kf / 2.0);
            Ok((k * g, e * g))
        }
    }
}

fn make_row(param: f64, x: f64, y: f64, limit: &Result<f64>, cell: Result<(f64, f64)>) -> ScanRow {
    let mut row = ScanRow { param, x, y, finite: None, limit: None, rel_error: None, est_error: None, error: None };
    match limit {
        Ok(l) => row.limit = Some(*l),
        Err(e) => row.error = Some(format!("limit: {e}")),
    }
    match cell {
        Ok((v, e)) => {
            row.finite = Some(v);
            row.est_error = Some(e);
            if let Some(l) = row.limit {
                row.rel_error = Some(rel(v, l));
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn validate_regime(r: &ScalingRegime) -> Result<()> {
    if r.regime == Regime::II {
        check_tau(r.tau.unwrap_or(f64::NAN))?;
    }
    r.perturbations.validate(r.regime, r.tau)
}

fn check_probes(probes: &[(f64, f64)]) -> Result<()> {
    for &(x, y) in probes {
        check_positive(x, y)?;
    }
    Ok(())
}

/// Rescaled finite-N kernel against the regime's limit at every
/// `(N, probe)`. Failed cells carry their error and leave the rest intact.
pub fn hard_edge_scan(
    regime: &ScalingRegime,
    schedule: &MuSchedule,
    n_list: &[usize],
    probes: &[(f64, f64)],
) -> Result<ScanTable> {
    validate_regime(regime)?;
    check_probes(probes)?;
    let limits: Vec<Result<f64>> = probes.par_iter().map(|&(x, y)| regime_limit(regime, x, y)).collect();
    let cells: Vec<(usize, usize)> = (0..n_list.len()).flat_map(|i| (0..probes.len()).map(move |k| (i, k))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, k)| {
            let (x, y) = probes[k];
            make_row(n_list[i] as f64, x, y, &limits[k], scan_cell(regime, schedule, n_list[i], x, y))
        })
        .collect();
    Ok(ScanTable { params: n_list.iter().map(|n| *n as f64).collect(), probes: probes.to_vec(), rows })
}

/// `τ K_II(τx, τy; τ)(y/x)^{κ/2}` against `K_I` (to-I) or
/// `K_II(x, y; τ) e^{2(√y−√x)/τ}` against `½(xy)^{−1/4} K_III(√x, √y)`
/// (to-III) along `tau_list`.
pub fn interpolate_scan(
    p: &PerturbationSet,
    kappa: u32,
    nu: u32,
    tau_list: &[f64],
    direction: Direction,
    probes: &[(f64, f64)],
) -> Result<ScanTable> {
    check_probes(probes)?;
    for t in tau_list {
        check_tau(*t)?;
    }
    match direction {
        Direction::ToI => {
            if !p.pi_hat.is_empty() {
                return Err(Error::Validation(vec!["to-I requires pi_hat absent (pi_hat -> 0)".into()]));
            }
            p.validate(Regime::I, None)?;
        }
        Direction::ToIII => p.validate(Regime::III, None)?,
    }
    let limits: Vec<Result<f64>> = probes
        .par_iter()
        .map(|&(x, y)| match direction {
            Direction::ToI => kernel_i(p, kappa, nu, x, y, KIRoute::Hankel),
            Direction::ToIII => Ok(0.5 * (x * y).powf(-0.25) * kernel_iii(p, nu as i32, x.sqrt(), y.sqrt())?),
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..tau_list.len()).flat_map(|i| (0..probes.len()).map(move |k| (i, k))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, k)| {
            let tau = tau_list[i];
            let (x, y) = probes[k];
            let cell = (|| -> Result<(f64, f64)> {
                p.validate(Regime::II, Some(tau))?;
                let nup = nu_prime(p, nu as i32);
                match direction {
                    Direction::ToI => {
                        let (v, e) = kernel_ii_raw(p, tau, kappa, nup, tau * x, tau * y)?;
                        let g = tau * (y / x).powf(kappa as f64 / 2.0);
                        Ok((v * g, e * g))
                    }
                    Direction::ToIII => {
                        let (v, e) = kernel_ii_raw(p, tau, kappa, nup, x, y)?;
                        let g = (2.0 * (y.sqrt() - x.sqrt()) / tau).exp();
                        Ok((v * g, e * g))
                    }
                }
            })();
            make_row(tau, x, y, &limits[k], cell)
        })
        .collect();
    Ok(ScanTable { params: tau_list.to_vec(), probes: probes.to_vec(), rows })
}
