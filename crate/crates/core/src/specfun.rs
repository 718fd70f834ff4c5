//! Modified Bessel functions of integer order for complex arguments.
//!
//! `I_κ` comes from the periodic integral `(1/π)∫₀^π e^{w cosθ} cos κθ dθ`
//! (power series near the origin), `K_κ` from `∫₀^∞ e^{−w cosh t} cosh κt dt`
//! on a path rotated into the direction of steepest decay. Everything else
//! is built on those two.

use std::sync::OnceLock;

use num_complex::Complex;

use crate::{Error, Real, Result};

/// Default bound on `|Re w|` for `bessel_i`.
pub const OVERFLOW_GUARD: f64 = 700.0;

/// `|z|` below which `g_reg` sums its Taylor series directly.
pub const G_SERIES_RADIUS: f64 = 25.0;

const MAX_LEVELS: usize = 14;

fn check_finite<T: Real>(w: Complex<T>, what: &str) -> Result<()> {
    if w.re.is_finite() && w.im.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what}: non-finite argument")))
    }
}

fn norm<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn factorial<T: Real>(n: u32) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_u32(k).unwrap())
}

/// `I_κ(w)` with the default overflow guard.
pub fn bessel_i<T: Real>(kappa: u32, w: Complex<T>) -> Result<Complex<T>> {
    bessel_i_guarded(kappa, w, T::lit(OVERFLOW_GUARD))
}

pub fn bessel_i_guarded<T: Real>(kappa: u32, w: Complex<T>, guard: T) -> Result<Complex<T>> {
    check_finite(w, "bessel_i")?;
    if w.re.abs() > guard {
        return Err(Error::Range(format!(
            "bessel_i: |Re w| = {} exceeds guard {}",
            to_f64(w.re.abs()),
            to_f64(guard)
        )));
    }
    // the trapezoid sum loses relative accuracy when I_κ(w) ≪ 1 near the origin
    if norm(w) <= T::one() + T::from_u32(kappa).unwrap() {
        Ok(bessel_i_series(kappa, w))
    } else {
        bessel_i_trapezoid(kappa, w)
    }
}

fn bessel_i_series<T: Real>(kappa: u32, w: Complex<T>) -> Complex<T> {
    let half = w * T::lit(0.5);
    let q = half * half;
    let mut term = half.powu(kappa) / factorial::<T>(kappa);
    let mut sum = term;
    let kf = T::from_u32(kappa).unwrap();
    for k in 1..500u32 {
        let kk = T::from_u32(k).unwrap();
        term = term * q / (kk * (kk + kf));
        sum = sum + term;
        if norm(term) <= T::epsilon() * norm(sum) * T::lit(0.5) && kk * kk > norm(q) {
            break;
        }
    }
    sum
}

fn bessel_i_trapezoid<T: Real>(kappa: u32, w: Complex<T>) -> Result<Complex<T>> {
    let a = w.re.abs();
    let kf = T::from_u32(kappa).unwrap();
    let f = |theta: T| -> (Complex<T>, T) {
        let e = (w * theta.cos() - Complex::new(a, T::zero())).exp();
        let v = e * (kf * theta).cos();
        (v, norm(v))
    };
    let pi = T::PI();
    let mut n = 8usize;
    let (f0, a0) = f(T::zero());
    let (fp, ap) = f(pi);
    let mut h = pi / T::from_usize(n).unwrap();
    let mut sum = (f0 + fp) * T::lit(0.5);
    let mut abs_sum = (a0 + ap) * T::lit(0.5);
    for k in 1..n {
        let (v, av) = f(h * T::from_usize(k).unwrap());
        sum = sum + v;
        abs_sum = abs_sum + av;
    }
    let mut prev = sum * h;
    // modes up to 2n are integrated exactly; don't accept before that covers |w|
    let min_n = to_f64(kf + norm(w) * T::lit(0.5)) as usize + 8;
    for _ in 0..MAX_LEVELS {
        let h2 = h * T::lit(0.5);
        for k in 0..n {
            let (v, av) = f(h2 * T::from_usize(2 * k + 1).unwrap());
            sum = sum + v;
            abs_sum = abs_sum + av;
        }
        n *= 2;
        h = h2;
        let cur = sum * h;
        let diff = norm(cur - prev);
        let floor = T::lit(16.0) * T::epsilon() * abs_sum * h;
        if n >= min_n && (diff <= T::lit(1e-14) * norm(cur) || diff <= floor) {
            return Ok(cur / pi * a.exp());
        }
        prev = cur;
    }
    Err(Error::Accuracy {
        msg: "bessel_i trapezoid did not converge".into(),
        estimate: to_f64(norm(prev)),
        partial: (to_f64(prev.re), to_f64(prev.im)),
    })
}

/// `K_κ(w)` for `Re w > 0`.
pub fn bessel_k<T: Real>(kappa: u32, w: Complex<T>) -> Result<Complex<T>> {
    Ok(bessel_k_scaled(kappa, w)? * (-w).exp())
}

/// `e^{w} K_κ(w)`, free of the exponential underflow at large `|w|`.
pub fn bessel_k_scaled<T: Real>(kappa: u32, w: Complex<T>) -> Result<Complex<T>> {
    check_finite(w, "bessel_k")?;
    if w.re <= T::zero() {
        return Err(Error::domain(format!(
            "bessel_k: Re w = {} is not positive",
            to_f64(w.re)
        )));
    }
    // the path integrand spreads to t ~ ln(2/|w|) near the origin
    if norm(w) <= T::one() {
        return Ok(bessel_k_series(kappa, w) * w.exp());
    }
    let phi = w.im.atan2(w.re);
    let kf = T::from_u32(kappa).unwrap();
    let one = Complex::new(T::one(), T::zero());
    // path tau(t) = t - i*phi*tanh(t) turns w*cosh(tau) real at both ends
    let g = |t: T| -> Complex<T> {
        let th = t.tanh();
        let tau = Complex::new(t, -phi * th);
        let dtau = Complex::new(T::one(), -phi * (T::one() - th * th));
        let e = (-w * (tau.cosh() - one)).exp();
        e * (tau * kf).cosh() * dtau
    };
    let tiny = T::lit(1e-18);
    let t_max = T::lit(60.0);
    // sum g(t0), g(t0+2h), ... until negligible
    let tail = |t0: T, step: T, scale: T| -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut t = t0;
        while t < t_max {
            let v = g(t);
            acc = acc + v;
            if t > T::one() && norm(v) <= tiny * scale.max(norm(acc)) {
                break;
            }
            t = t + step;
        }
        acc
    };
    let mut h = T::lit(0.5);
    let g0 = g(T::zero());
    let mut sum = g0 * T::lit(0.5) + tail(h, h, norm(g0));
    let mut prev = sum * h;
    for level in 0..MAX_LEVELS {
        let odd = tail(h * T::lit(0.5), h, norm(prev) / h);
        sum = sum + odd;
        h = h * T::lit(0.5);
        let cur = sum * h;
        let diff = norm(cur - prev);
        if level >= 1 && diff <= T::lit(1e-14) * norm(cur) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Accuracy {
        msg: "bessel_k trapezoid did not converge".into(),
        estimate: to_f64(norm(prev)),
        partial: (to_f64(prev.re), to_f64(prev.im)),
    })
}

// K_n(w) = ½(w/2)^{−n} Σ_{k<n} (n−k−1)!/k! (−w²/4)^k + (−1)^{n+1} ln(w/2) I_n(w)
//   + (−1)^n ½(w/2)^n Σ_k (ψ(k+1)+ψ(n+k+1)) (w²/4)^k / (k!(n+k)!)
fn bessel_k_series<T: Real>(n: u32, w: Complex<T>) -> Complex<T> {
    let half = w * T::lit(0.5);
    let z = half * half;
    let zero = Complex::new(T::zero(), T::zero());
    let mut head = zero;
    if n > 0 {
        let mut term = Complex::new(factorial::<T>(n - 1), T::zero());
        for k in 0..n {
            head = head + term;
            if k + 1 < n {
                let kk = T::from_u32(k + 1).unwrap();
                let m = T::from_u32(n - k - 1).unwrap();
                term = -term * z / (kk * m);
            }
        }
        head = head * half.powi(-(n as i32)) * T::lit(0.5);
    }
    let sign = if n % 2 == 0 { T::one() } else { -T::one() };
    let log_part = half.ln() * bessel_i_series(n, w) * (-sign);
    let euler = T::lit(0.577_215_664_901_532_9);
    let mut psi_a = -euler;
    let mut psi_b = -euler;
    for j in 1..=n {
        psi_b = psi_b + T::one() / T::from_u32(j).unwrap();
    }
    let mut term = Complex::new(T::one() / factorial::<T>(n), T::zero());
    let mut tail = zero;
    for k in 0..200u32 {
        let add = term * (psi_a + psi_b);
        tail = tail + add;
        if norm(add) <= T::epsilon() * norm(tail) && k > 2 {
            break;
        }
        let k1 = T::from_u32(k + 1).unwrap();
        term = term * z / (k1 * T::from_u32(n + k + 1).unwrap());
        psi_a = psi_a + T::one() / k1;
        psi_b = psi_b + T::one() / T::from_u32(n + k + 1).unwrap();
    }
    head + log_part + tail * half.powu(n) * (T::lit(0.5) * sign)
}

/// `J_κ(w) = i^{−κ} I_κ(i w)`.
pub fn bessel_j<T: Real>(kappa: u32, w: Complex<T>) -> Result<Complex<T>> {
    let i = Complex::new(T::zero(), T::one());
    Ok(bessel_i(kappa, i * w)? * ipow::<T>(-(kappa as i64)))
}

fn ipow<T: Real>(k: i64) -> Complex<T> {
    match k.rem_euclid(4) {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// `H^{(2)}_κ(w) = (2/π) i^{κ+1} K_κ(i w)`, valid for `Im w < 0` and on
/// the positive real axis as the limit from below.
pub fn hankel2<T: Real>(kappa: u32, w: Complex<T>) -> Result<Complex<T>> {
    check_finite(w, "hankel2")?;
    let i = Complex::new(T::zero(), T::one());
    let eval = |z: Complex<T>| -> Result<Complex<T>> {
        let k = bessel_k(kappa, i * z)?;
        Ok(k * ipow::<T>(kappa as i64 + 1) * (T::lit(2.0) / T::PI()))
    };
    if w.im < T::zero() {
        return eval(w);
    }
    if w.im == T::zero() && w.re > T::zero() {
        let eps = T::lit(1e-8) * w.re.max(T::one());
        let v1 = eval(w - i * eps)?;
        let v2 = eval(w - i * (eps * T::lit(0.5)))?;
        if norm(v1 - v2) <= T::lit(1e-8) * norm(v2) {
            return Ok(v2);
        }
        return Ok(v2 * T::lit(2.0) - v1);
    }
    Err(Error::domain("hankel2: argument must satisfy Im w < 0 or be real positive"))
}

/// `Σ zⁿ / (Γ(n+κ+1) n!)`, i.e. `z^{−κ/2} I_κ(2√z)`; entire in `z`.
pub fn g_reg<T: Real>(kappa: u32, z: Complex<T>) -> Result<Complex<T>> {
    check_finite(z, "g_reg")?;
    if norm(z) <= T::lit(G_SERIES_RADIUS) {
        let kf = T::from_u32(kappa).unwrap();
        let mut term = Complex::new(T::one() / factorial::<T>(kappa), T::zero());
        let mut sum = term;
        for n in 1..2000u32 {
            let nf = T::from_u32(n).unwrap();
            term = term * z / (nf * (nf + kf));
            sum = sum + term;
            if norm(term) <= T::lit(1e-17) * norm(sum) && nf * nf > norm(z) {
                break;
            }
        }
        return Ok(sum);
    }
    let s = z.sqrt();
    Ok(bessel_i(kappa, s * T::lit(2.0))? / s.powu(kappa))
}

/// `z^{κ/2} K_κ(2√z)` with the principal root; cut on `(−∞, 0]`.
pub fn h_reg<T: Real>(kappa: u32, z: Complex<T>) -> Result<Complex<T>> {
    check_finite(z, "h_reg")?;
    if z.im == T::zero() && z.re <= T::zero() {
        return Err(Error::domain(format!(
            "h_reg: z = {} lies on the cut (-inf, 0]",
            to_f64(z.re)
        )));
    }
    let s = z.sqrt();
    Ok(bessel_k(kappa, s * T::lit(2.0))? * s.powu(kappa))
}

const LGAMMA_TABLE: usize = 4096;

fn lgamma_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LGAMMA_TABLE);
        t.push(f64::NAN);
        t.push(0.0);
        for n in 2..LGAMMA_TABLE {
            let prev = t[n - 1];
            t.push(prev + ((n - 1) as f64).ln());
        }
        t
    })
}

/// `ln Γ(n) = ln (n−1)!`.
pub fn log_gamma_int(n: i64) -> Result<f64> {
    if n < 1 {
        return Err(Error::domain(format!("log_gamma_int: n = {n} < 1")));
    }
    let n = n as usize;
    let table = lgamma_table();
    if n < LGAMMA_TABLE {
        return Ok(table[n]);
    }
    let mut acc = table[LGAMMA_TABLE - 1];
    for k in LGAMMA_TABLE - 1..n {
        acc += (k as f64).ln();
    }
    Ok(acc)
}
