//! Sign/log-magnitude determinants and Vandermonde products.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// `(sign, ln|·|)`; a zero value is `(0, -inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog { sign: 1.0, log_abs: 0.0 };
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, log_abs: f64::NEG_INFINITY };

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            SignedLog::ZERO
        } else {
            SignedLog { sign: x.signum(), log_abs: x.abs().ln() }
        }
    }

    pub fn mul(self, o: SignedLog) -> SignedLog {
        if self.sign == 0.0 || o.sign == 0.0 {
            return SignedLog::ZERO;
        }
        SignedLog { sign: self.sign * o.sign, log_abs: self.log_abs + o.log_abs }
    }

    pub fn div(self, o: SignedLog) -> SignedLog {
        SignedLog { sign: self.sign * o.sign, log_abs: self.log_abs - o.log_abs }
    }

    pub fn powi(self, k: i64) -> SignedLog {
        let sign = if k % 2 == 0 { 1.0 } else { self.sign };
        SignedLog { sign, log_abs: self.log_abs * k as f64 }
    }

    pub fn value(self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

/// Determinant by partial-pivot LU after dividing each column by its
/// largest entry; the column scales are added back in log space.
pub fn log_det(m: &DMatrix<f64>) -> Result<SignedLog> {
    if m.nrows() != m.ncols() {
        return Err(Error::Numeric("determinant of a non-square matrix".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(SignedLog::ONE);
    }
    let mut a = m.clone();
    let mut acc = SignedLog::ONE;
    for j in 0..n {
        let s = a.column(j).amax();
        if s == 0.0 {
            return Ok(SignedLog::ZERO);
        }
        a.column_mut(j).scale_mut(1.0 / s);
        acc.log_abs += s.ln();
    }
    let lu = a.lu();
    let d = lu.determinant();
    Ok(acc.mul(SignedLog::from_value(d)))
}

/// `Δ(x) = Π_{j<k} (x_k − x_j)`.
pub fn log_vandermonde(x: &[f64]) -> SignedLog {
    let mut acc = SignedLog::ONE;
    for k in 0..x.len() {
        for j in 0..k {
            acc = acc.mul(SignedLog::from_value(x[k] - x[j]));
        }
    }
    acc
}

/// Fails when two entries are closer than `1e-8·scale`.
pub fn check_distinct(x: &[f64], what: &str) -> Result<()> {
    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for k in 0..x.len() {
        for j in 0..k {
            if (x[k] - x[j]).abs() < 1e-8 * scale {
                return Err(Error::Degeneracy(format!(
                    "{what}[{j}] and {what}[{k}] coincide ({} vs {})",
                    x[j], x[k]
                )));
            }
        }
    }
    Ok(())
}

/// 1-norm condition estimate from an explicit inverse.
pub fn condition_1(a: &DMatrix<f64>, inv: &DMatrix<f64>) -> f64 {
    let norm1 = |m: &DMatrix<f64>| {
        (0..m.ncols()).map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    norm1(a) * norm1(inv)
}
