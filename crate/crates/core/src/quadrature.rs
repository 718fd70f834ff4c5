//! Trapezoid rules on circles centered on the real axis, their products,
//! and an exp-sinh rule for the half-line.
//!
//! Every circle integral is normalized as `(1/2πi)∮ f(z) dz` and runs
//! counter-clockwise.

use num_complex::Complex;
use rayon::prelude::*;

use crate::{Error, Real, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MARGIN: f64 = 0.5;
pub const MIN_NODES: usize = 8;
pub const NODE_CAP: usize = 1 << 14;
/// Smallest clearance `make_enclosing_contour` accepts.
pub const MIN_GAP: f64 = 1e-9;

const PAR_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour<T> {
    pub center: T,
    pub radius: T,
    pub nodes: usize,
}

impl<T: Real> Contour<T> {
    pub fn new(center: T, radius: T, nodes: usize) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::geometry("contour radius must be positive and finite"));
        }
        if nodes < MIN_NODES || !nodes.is_power_of_two() {
            return Err(Error::geometry(format!(
                "contour node count {nodes} must be a power of two >= {MIN_NODES}"
            )));
        }
        Ok(Contour { center, radius, nodes })
    }

    /// Circle through the real points `left < right`.
    pub fn through(left: T, right: T, nodes: usize) -> Result<Self> {
        let two = T::lit(2.0);
        Contour::new((left + right) / two, (right - left) / two, nodes)
    }

    pub fn with_nodes(self, nodes: usize) -> Result<Self> {
        Contour::new(self.center, self.radius, nodes)
    }

    pub fn left(&self) -> T {
        self.center - self.radius
    }

    pub fn right(&self) -> T {
        self.center + self.radius
    }

    /// Strictly inside the disk.
    pub fn contains(&self, z: Complex<T>) -> bool {
        (z - Complex::new(self.center, T::zero())).norm() < self.radius
    }

    pub fn node(&self, k: usize, n: usize) -> Complex<T> {
        let theta = T::TAU() * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        Complex::new(self.center + self.radius * theta.cos(), self.radius * theta.sin())
    }

    /// Nodes and weights with `Σ w_k f(z_k) ≈ (1/2πi)∮ f`.
    pub fn node_set(&self, n: usize) -> NodeSet<T> {
        let c = Complex::new(self.center, T::zero());
        let nf = T::from_usize(n).unwrap();
        let z: Vec<_> = (0..n).map(|k| self.node(k, n)).collect();
        let w = z.iter().map(|&zk| (zk - c) / nf).collect();
        NodeSet { z, w }
    }
}

#[derive(Debug, Clone)]
pub struct NodeSet<T> {
    pub z: Vec<Complex<T>>,
    pub w: Vec<Complex<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Nested,
    Separated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPair<T> {
    pub inner: Contour<T>,
    pub outer: Contour<T>,
    pub mode: PairMode,
}

impl<T: Real> ContourPair<T> {
    pub fn new(inner: Contour<T>, outer: Contour<T>, mode: PairMode) -> Result<Self> {
        let d = (outer.center - inner.center).abs();
        let ok = match mode {
            PairMode::Nested => d + inner.radius < outer.radius,
            PairMode::Separated => d > inner.radius + outer.radius,
        };
        if !ok {
            return Err(Error::geometry(format!("contours violate {mode:?} layout")));
        }
        Ok(ContourPair { inner, outer, mode })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: Complex<T>,
    pub est_error: T,
    pub nodes_used: usize,
}

fn accuracy<T: Real>(msg: &str, v: Complex<T>, err: T) -> Error {
    Error::Accuracy {
        msg: msg.into(),
        estimate: err.to_f64().unwrap_or(f64::NAN),
        partial: (v.re.to_f64().unwrap_or(f64::NAN), v.im.to_f64().unwrap_or(f64::NAN)),
    }
}

fn converged<T: Real>(diff: T, v: Complex<T>, tol: T) -> bool {
    diff <= tol * T::one().max(v.norm())
}

/// Circle centered at the midpoint of `points`, radius `spread/2 + policy·gap`
/// where `gap` is the distance to the nearest excluded point, capped at 1.
pub fn make_enclosing_contour<T: Real>(
    points: &[T],
    exclude: &[T],
    margin_policy: T,
) -> Result<Contour<T>> {
    if points.is_empty() {
        return Err(Error::geometry("no points to enclose"));
    }
    if !(margin_policy > T::zero() && margin_policy < T::one()) {
        return Err(Error::geometry("margin policy must lie in (0, 1)"));
    }
    let lo = points.iter().copied().fold(T::infinity(), T::min);
    let hi = points.iter().copied().fold(T::neg_infinity(), T::max);
    let mut gap = T::one();
    for &e in exclude {
        let d = if e < lo {
            lo - e
        } else if e > hi {
            e - hi
        } else {
            return Err(Error::geometry(format!(
                "excluded point {} lies inside the hull of the enclosed points",
                e.to_f64().unwrap_or(f64::NAN)
            )));
        };
        gap = gap.min(d);
    }
    if gap < T::lit(MIN_GAP) {
        return Err(Error::geometry(format!(
            "clearance {:e} below minimum {MIN_GAP:e}",
            gap.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let two = T::lit(2.0);
    Contour::new((lo + hi) / two, (hi - lo) / two + margin_policy * gap, 64)
}

pub fn integrate_contour<T: Real>(
    f: impl Fn(Complex<T>) -> Complex<T>,
    c: &Contour<T>,
    tol: T,
) -> Result<QuadratureResult<T>> {
    try_integrate_contour(|z| Ok(f(z)), c, tol)
}

/// `integrate_contour` for fallible integrands.
pub fn try_integrate_contour<T: Real>(
    mut f: impl FnMut(Complex<T>) -> Result<Complex<T>>,
    c: &Contour<T>,
    tol: T,
) -> Result<QuadratureResult<T>> {
    let center = Complex::new(c.center, T::zero());
    let mut n = c.nodes.max(MIN_NODES);
    let mut sum = Complex::new(T::zero(), T::zero());
    for k in 0..n {
        let z = c.node(k, n);
        sum = sum + f(z)? * (z - center);
    }
    let mut prev = sum / T::from_usize(n).unwrap();
    while 2 * n <= NODE_CAP {
        for k in 0..n {
            let z = c.node(2 * k + 1, 2 * n);
            sum = sum + f(z)? * (z - center);
        }
        n *= 2;
        let cur = sum / T::from_usize(n).unwrap();
        let diff = (cur - prev).norm();
        if converged(diff, cur, tol) {
            return Ok(QuadratureResult { value: cur, est_error: diff, nodes_used: n });
        }
        prev = cur;
    }
    Err(accuracy("contour trapezoid hit the node cap", prev, T::nan()))
}

/// Plain double trapezoid sum over `inner × outer`, both node counts doubled
/// together. `f` takes `(z_inner, z_outer)`.
pub fn integrate_double_contour<T: Real>(
    f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    pair: &ContourPair<T>,
    tol: T,
) -> Result<QuadratureResult<T>> {
    let (ci, co) = (pair.inner, pair.outer);
    let mut n = ci.nodes.max(co.nodes).max(MIN_NODES);
    let grid = |n: usize, skip_even: bool| -> Complex<T> {
        let a = ci.node_set(n);
        let b = co.node_set(n);
        let mut s = Complex::new(T::zero(), T::zero());
        for j in 0..n {
            for k in 0..n {
                if skip_even && j % 2 == 0 && k % 2 == 0 {
                    continue;
                }
                s = s + f(a.z[j], b.z[k]) * a.w[j] * b.w[k];
            }
        }
        s
    };
    let mut prev = grid(n, false);
    while 2 * n <= NODE_CAP {
        // weights scale by 1/4 under doubling, so the old grid contributes prev/4
        let cur = prev / T::lit(4.0) + grid(2 * n, true);
        n *= 2;
        let diff = (cur - prev).norm();
        if converged(diff, cur, tol) {
            return Ok(QuadratureResult { value: cur, est_error: diff, nodes_used: n * n });
        }
        prev = cur;
    }
    Err(accuracy("double contour trapezoid hit the node cap", prev, T::nan()))
}

fn eval_nodes<T: Real, F>(f: &F, z: &[Complex<T>]) -> Result<Vec<Complex<T>>>
where
    F: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
{
    if z.len() >= PAR_THRESHOLD {
        z.par_iter().map(|&zk| f(zk)).collect()
    } else {
        z.iter().map(|&zk| f(zk)).collect()
    }
}

/// Values of `a` and `b` on node sets of two circles, refinable by doubling.
struct Sampled<T> {
    c: Contour<T>,
    n: usize,
    z: Vec<Complex<T>>,
    wf: Vec<Complex<T>>,
}

impl<T: Real> Sampled<T> {
    fn new<F>(c: Contour<T>, n: usize, f: &F) -> Result<Self>
    where
        F: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
    {
        let ns = c.node_set(n);
        let fv = eval_nodes(f, &ns.z)?;
        let wf = fv.iter().zip(&ns.w).map(|(a, b)| *a * *b).collect();
        Ok(Sampled { c, n, z: ns.z, wf })
    }

    fn refine<F>(&mut self, f: &F) -> Result<()>
    where
        F: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
    {
        let n2 = 2 * self.n;
        let center = Complex::new(self.c.center, T::zero());
        let odd: Vec<_> = (0..self.n).map(|k| self.c.node(2 * k + 1, n2)).collect();
        let fv = eval_nodes(f, &odd)?;
        let nf = T::from_usize(n2).unwrap();
        let mut z = Vec::with_capacity(n2);
        let mut wf = Vec::with_capacity(n2);
        for k in 0..self.n {
            z.push(self.z[k]);
            wf.push(self.wf[k] * T::lit(0.5));
            z.push(odd[k]);
            wf.push(fv[k] * (odd[k] - center) / nf);
        }
        self.z = z;
        self.wf = wf;
        self.n = n2;
        Ok(())
    }
}

fn cauchy_sum<T: Real>(a: &Sampled<T>, b: &Sampled<T>) -> Complex<T> {
    let row = |j: usize| -> Complex<T> {
        let mut s = Complex::new(T::zero(), T::zero());
        for k in 0..b.z.len() {
            s = s + b.wf[k] / (a.z[j] - b.z[k]);
        }
        s * a.wf[j]
    };
    if a.z.len() * b.z.len() >= PAR_THRESHOLD * PAR_THRESHOLD {
        (0..a.z.len())
            .into_par_iter()
            .map(row)
            .reduce(|| Complex::new(T::zero(), T::zero()), |x, y| x + y)
    } else {
        (0..a.z.len()).map(row).fold(Complex::new(T::zero(), T::zero()), |x, y| x + y)
    }
}

// bound on the rounding error of cauchy_sum: 64ε Σ|A w| Σ|B w| / dist
fn roundoff_floor<T: Real>(a: &Sampled<T>, b: &Sampled<T>) -> T {
    let sa = a.wf.iter().fold(T::zero(), |acc, v| acc + v.norm());
    let sb = b.wf.iter().fold(T::zero(), |acc, v| acc + v.norm());
    let d = (a.c.center - b.c.center).abs();
    let dist = (a.c.radius - b.c.radius).abs() - d;
    let dist = if dist > T::zero() { dist } else { d - a.c.radius - b.c.radius };
    T::lit(64.0) * T::epsilon() * sa * sb / dist.max(T::epsilon())
}

/// `(1/2πi)² ∮_{ca} da ∮_{cb} db  A(a) B(b) / (a − b)` for circles that do
/// not intersect. Each side is sampled once per node, so the cost of the
/// special functions is linear in the node count. Node counts of both
/// circles are doubled together until successive values agree to `tol`,
/// or to the rounding level of the sum when that is larger.
pub fn integrate_cauchy_pair<T, FA, FB>(
    fa: FA,
    ca: &Contour<T>,
    fb: FB,
    cb: &Contour<T>,
    tol: T,
) -> Result<QuadratureResult<T>>
where
    T: Real,
    FA: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
    FB: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
{
    let mut a = Sampled::new(*ca, ca.nodes, &fa)?;
    let mut b = Sampled::new(*cb, cb.nodes, &fb)?;
    let mut prev = cauchy_sum(&a, &b);
    while 2 * a.n.max(b.n) <= NODE_CAP {
        a.refine(&fa)?;
        b.refine(&fb)?;
        let cur = cauchy_sum(&a, &b);
        let diff = (cur - prev).norm();
        if converged(diff, cur, tol) || diff <= roundoff_floor(&a, &b) {
            return Ok(QuadratureResult { value: cur, est_error: diff, nodes_used: a.n + b.n });
        }
        prev = cur;
    }
    Err(accuracy("cauchy pair trapezoid hit the node cap", prev, T::nan()))
}

/// Single evaluation of the `integrate_cauchy_pair` sum at the node counts
/// stored in the contours, with no refinement.
pub fn cauchy_pair_fixed<T, FA, FB>(fa: FA, ca: &Contour<T>, fb: FB, cb: &Contour<T>) -> Result<Complex<T>>
where
    T: Real,
    FA: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
    FB: Fn(Complex<T>) -> Result<Complex<T>> + Sync,
{
    let a = Sampled::new(*ca, ca.nodes, &fa)?;
    let b = Sampled::new(*cb, cb.nodes, &fb)?;
    Ok(cauchy_sum(&a, &b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay<T> {
    /// `f` decays at least exponentially.
    Exponential,
    /// `f` is negligible beyond the given point and is not evaluated there.
    Truncated(T),
}

pub fn integrate_halfline<T: Real>(
    f: impl FnMut(T) -> T,
    decay: Decay<T>,
    tol: T,
) -> Result<QuadratureResult<T>> {
    let mut f = f;
    try_integrate_halfline(|t| Ok(f(t)), decay, tol)
}

/// `∫₀^∞ f(t) dt` by the exp-sinh rule `t = exp(π/2·sinh s)`, halving the
/// step until successive sums agree to `tol`. Integrable algebraic
/// singularities at the origin are absorbed by the map.
pub fn try_integrate_halfline<T: Real>(
    mut f: impl FnMut(T) -> Result<T>,
    decay: Decay<T>,
    tol: T,
) -> Result<QuadratureResult<T>> {
    let half_pi = T::FRAC_PI_2();
    let t_cut = match decay {
        Decay::Exponential => T::lit(1e300),
        Decay::Truncated(t) => t,
    };
    let mut h = T::lit(0.5);
    let f0 = f(T::one())? * half_pi;
    let mut evals = 1usize;
    let (r, ra) = exp_sinh_walk(h, h, f0.abs(), t_cut, &mut f, &mut evals)?;
    let (l, la) = exp_sinh_walk(-h, -h, f0.abs(), t_cut, &mut f, &mut evals)?;
    let mut sum = f0 + r + l;
    let mut abs_sum = f0.abs() + ra + la;
    let mut prev = sum * h;
    for level in 0..12 {
        let scale = abs_sum;
        let (r, ra) = exp_sinh_walk(h / T::lit(2.0), h, scale, t_cut, &mut f, &mut evals)?;
        let (l, la) = exp_sinh_walk(-h / T::lit(2.0), -h, scale, t_cut, &mut f, &mut evals)?;
        sum = sum + r + l;
        abs_sum = abs_sum + ra + la;
        h = h / T::lit(2.0);
        let cur = sum * h;
        let diff = (cur - prev).abs();
        let floor = T::lit(64.0) * T::epsilon() * abs_sum * h;
        if level >= 2 && (diff <= tol * cur.abs() || diff <= floor) {
            return Ok(QuadratureResult {
                value: Complex::new(cur, T::zero()),
                est_error: diff,
                nodes_used: evals,
            });
        }
        prev = cur;
    }
    Err(accuracy("exp-sinh rule did not converge", Complex::new(prev, T::zero()), T::nan()))
}

// exp-sinh terms at s = s0, s0 + step, ... walking away from s = 0
fn exp_sinh_walk<T: Real>(
    s0: T,
    step: T,
    scale: T,
    t_cut: T,
    f: &mut impl FnMut(T) -> Result<T>,
    evals: &mut usize,
) -> Result<(T, T)> {
    let half_pi = T::FRAC_PI_2();
    let tiny = T::lit(1e-20);
    let mut acc = T::zero();
    let mut abs = T::zero();
    let mut s = s0;
    let mut small = 0;
    loop {
        let t = (half_pi * s.sinh()).exp();
        if t > t_cut || t < T::lit(1e-300) || s.abs() > T::lit(8.0) {
            break;
        }
        let v = f(t)? * half_pi * s.cosh() * t;
        *evals += 1;
        if !v.is_finite() {
            return Err(Error::Numeric("half-line integrand is not finite".into()));
        }
        acc = acc + v;
        abs = abs + v.abs();
        if v.abs() <= tiny * scale.max(abs) {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
        s = s + step;
    }
    Ok((acc, abs))
}

/// Fixed Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = T::from_usize(n).unwrap();
    for i in 0..(n + 1) / 2 {
        let mut z = (T::PI() * (T::from_usize(i).unwrap() + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), z);
            for k in 2..=n {
                let kf = T::from_usize(k).unwrap();
                let p2 = ((T::lit(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { T::one() } else { p1 };
            let pm = if n == 1 { T::one() } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - T::one());
            let dz = pn / dp;
            z = z - dz;
            if dz.abs() < T::lit(1e-16) {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = T::lit(2.0) / ((T::one() - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    fn circle(c: f64, r: f64) -> Contour<f64> {
        Contour::new(c, r, 16).unwrap()
    }

    #[test]
    fn enclosing_examples() {
        let c = make_enclosing_contour(&[1.0, 2.0, 3.0], &[], 0.5).unwrap();
        assert_eq!((c.center, c.radius), (2.0, 1.5));
        let c = make_enclosing_contour(&[2.0, 4.0], &[0.0], 0.5).unwrap();
        assert_eq!((c.center, c.radius), (3.0, 1.5));
        assert!(c.left() > 0.0);
        assert!(matches!(
            make_enclosing_contour(&[1.0], &[1.0 + 1e-10], 0.5),
            Err(Error::Geometry(_))
        ));
        let c = make_enclosing_contour(&[1.0], &[1.0000001], 0.5).unwrap();
        assert!(c.right() < 1.0000001);
        assert!(make_enclosing_contour(&[1.0, 3.0], &[2.0], 0.5).is_err());
        assert!(make_enclosing_contour::<f64>(&[], &[], 0.5).is_err());
    }

    #[test]
    fn contour_examples() {
        let c = circle(0.0, 1.0);
        let v = integrate_contour(|z: C| 1.0 / z, &c, 1e-10).unwrap().value;
        assert!((v - C::new(1.0, 0.0)).norm() < 1e-14);
        let v = integrate_contour(|z: C| 1.0 / (z * z), &c, 1e-10).unwrap().value;
        assert!(v.norm() < 1e-14);
        let v = integrate_contour(|z: C| z.exp() / (z - 0.3), &c, 1e-10).unwrap().value;
        assert!((v - C::new(0.3f64.exp(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn contour_node_cap() {
        // pole almost on the circle
        let c = circle(0.0, 1.0);
        let r = integrate_contour(|z: C| 1.0 / (z - 0.99999), &c, 1e-14);
        assert!(r.unwrap_err().is_accuracy());
    }

    #[test]
    fn geometric_convergence() {
        let c = Contour::new(0.0, 1.0, 64).unwrap();
        let a = C::new(0.0, 0.8);
        let exact = C::new(1.0, 0.0);
        let err = |n: usize| {
            let ns = c.node_set(n);
            let s: C = ns.z.iter().zip(&ns.w).map(|(z, w)| w / (z - a)).sum();
            (s - exact).norm()
        };
        let mut n = 64;
        while n < 512 {
            let (e1, e2) = (err(n), err(2 * n));
            if e1 < 1e-15 {
                break;
            }
            assert!(e2 <= 0.1 * e1, "n={n}: {e1:e} -> {e2:e}");
            n *= 2;
        }
    }

    #[test]
    fn double_examples() {
        let pair = ContourPair::new(circle(0.0, 1.0), circle(0.0, 3.0), PairMode::Nested).unwrap();
        let v = integrate_double_contour(|u: C, v: C| 1.0 / (u - v), &pair, 1e-10).unwrap().value;
        assert!(v.norm() < 1e-12);
        let v = integrate_double_contour(|u: C, v: C| 1.0 / ((u - 0.5) * (v - 2.0)), &pair, 1e-10)
            .unwrap()
            .value;
        assert!((v - C::new(1.0, 0.0)).norm() < 1e-12);
        let v = integrate_double_contour(|u: C, v: C| u * v, &pair, 1e-10).unwrap().value;
        assert!(v.norm() < 1e-14);
        assert!(ContourPair::new(circle(0.0, 1.0), circle(0.5, 1.0), PairMode::Nested).is_err());
        assert!(ContourPair::new(circle(0.0, 1.0), circle(2.5, 1.0), PairMode::Separated).is_ok());
    }

    #[test]
    fn cauchy_pair_matches_plain_double() {
        let ca = circle(0.0, 3.0);
        let cb = circle(0.0, 1.0);
        let fa = |z: C| Ok(z.exp() / (z - 2.0));
        let fb = |z: C| Ok((-z).exp() / (z - 0.3));
        let v = integrate_cauchy_pair(fa, &ca, fb, &cb, 1e-12).unwrap().value;
        let pair = ContourPair::new(cb, ca, PairMode::Nested).unwrap();
        let w = integrate_double_contour(
            |u: C, a: C| a.exp() / (a - 2.0) * (-u).exp() / (u - 0.3) / (a - u),
            &pair,
            1e-12,
        )
        .unwrap()
        .value;
        assert!((v - w).norm() < 1e-11);
    }

    #[test]
    fn halfline_examples() {
        let r = integrate_halfline(|t: f64| (-t).exp(), Decay::Exponential, 1e-12).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-12);
        let r = integrate_halfline(|t: f64| t * (-t).exp(), Decay::Exponential, 1e-12).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-12);
        let r = integrate_halfline(|t: f64| (-t).exp() * t.cos(), Decay::Exponential, 1e-12).unwrap();
        assert!((r.value.re - 0.5).abs() < 1e-12);
        let r = integrate_halfline(|t: f64| (-t).exp() / t.sqrt(), Decay::Exponential, 1e-12).unwrap();
        assert!((r.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-11);
        let r = integrate_halfline(|t: f64| (-t).exp(), Decay::Truncated(60.0), 1e-12).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_moments() {
        let (x, w) = gauss_legendre::<f64>(10);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn enclosing_contains_points_and_excludes_rest(
                pts in prop::collection::vec(-5.0f64..5.0, 1..6),
                ex in prop::collection::vec(-10.0f64..10.0, 0..4),
                p in 0.05f64..0.95,
            ) {
                match make_enclosing_contour(&pts, &ex, p) {
                    Ok(c) => {
                        for &x in &pts {
                            prop_assert!(c.contains(C::new(x, 0.0)));
                        }
                        for &e in &ex {
                            prop_assert!(!c.contains(C::new(e, 0.0)));
                            prop_assert!((e - c.center).abs() > c.radius);
                        }
                    }
                    Err(Error::Geometry(_)) => {
                        let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(ex.iter().any(|&e| e >= lo - 1e-9 && e <= hi + 1e-9));
                    }
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }

            #[test]
            fn separable_double_is_product(a in 0.0f64..0.5, b in 1.0f64..2.0, c0 in -0.3f64..0.3) {
                let inner = Contour::new(c0, 0.8, 16).unwrap();
                let outer = Contour::new(c0, 2.5, 16).unwrap();
                let pair = ContourPair::new(inner, outer, PairMode::Nested).unwrap();
                let g = |u: C| (u * u).exp() / (u - a);
                let h = |v: C| v.cos() / (v - b);
                let d = integrate_double_contour(|u, v| g(u) * h(v), &pair, 1e-13).unwrap().value;
                let p = integrate_contour(g, &inner, 1e-13).unwrap().value
                    * integrate_contour(h, &outer, 1e-13).unwrap().value;
                prop_assert!((d - p).norm() <= 1e-12 * p.norm().max(1.0));
            }
        }
    }
}
