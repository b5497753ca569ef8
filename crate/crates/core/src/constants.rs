//! Scalar constants and one-dimensional helper functions that govern the
//! existence of localized boundary laws on the d-regular tree.
//!
//! All roots are found by bisection on brackets where the target function is
//! known to be strictly monotone, so results are deterministic and the
//! residuals are at rounding level.

use serde::Serialize;

use crate::error::{Error, Result};

/// Bisection for a function with `f(lo) <= 0 <= f(hi)` (or the reverse).
/// Runs until the bracket stops shrinking in floating point.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let increasing = f(lo) <= f(hi);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_order(d: u32) {
    assert!(d >= 2, "tree order d must be at least 2, got {d}");
}

/// `λ_d = d^{-1/(d-1)}`, the maximizer of `φ_d(r) = r − r^d`.
pub fn lambda_d(d: u32) -> f64 {
    check_order(d);
    let d = d as f64;
    d.powf(-1.0 / (d - 1.0))
}

/// `μ_d = max φ_d = λ_d (1 − 1/d)`.
pub fn mu_d(d: u32) -> f64 {
    lambda_d(d) * (1.0 - 1.0 / d as f64)
}

/// `φ_d(r) = r − r^d`.
pub fn phi_d(d: u32, r: f64) -> f64 {
    r - r.powi(d as i32)
}

/// `f_{d,n}(r) = (r − r^d) / (r^{d+1} + n)^{d/(d+1)}`.
pub fn f_dn(d: u32, n: u32, r: f64) -> f64 {
    let df = d as f64;
    phi_d(d, r) / (r.powi(d as i32 + 1) + n as f64).powf(df / (df + 1.0))
}

/// `g_d(r) = ((λ_d / r)^{(d²−1)/2} − 1)^{2/(d+1)}` on `(0, λ_d]`.
pub fn g_d(d: u32, r: f64) -> Result<f64> {
    let lambda = lambda_d(d);
    if !(r > 0.0 && r <= lambda) {
        return Err(Error::Domain { function: "g_d", value: r });
    }
    let df = d as f64;
    let base = (lambda / r).powf((df * df - 1.0) / 2.0) - 1.0;
    Ok(base.max(0.0).powf(2.0 / (df + 1.0)))
}

/// Inverse of `φ_d` restricted to `[λ_d, 1]`, defined on `[0, μ_d]`.
pub fn psi_d(d: u32, s: f64) -> Result<f64> {
    let mu = mu_d(d);
    if !(0.0..=mu).contains(&s) {
        return Err(Error::Domain { function: "psi_d", value: s });
    }
    let lambda = lambda_d(d);
    if s == 0.0 {
        return Ok(1.0);
    }
    if s == mu {
        return Ok(lambda);
    }
    Ok(bisect(lambda, 1.0, |r| phi_d(d, r) - s))
}

/// The unique positive root of `(d−1)ρ^{d+1} + dnρ^{d−1} − n = 0`.
pub fn rho_dn(d: u32, n: u32) -> f64 {
    check_order(d);
    assert!(n >= 1, "n must be at least 1");
    bisect(0.0, lambda_d(d), |r| rho_polynomial(d, n, r))
}

pub(crate) fn rho_polynomial(d: u32, n: u32, r: f64) -> f64 {
    let (df, nf) = (d as f64, n as f64);
    (df - 1.0) * r.powi(d as i32 + 1) + df * nf * r.powi(d as i32 - 1) - nf
}

/// `η(d,n) = f_{d,n}(ρ(d,n))`, the maximum of `f_{d,n}`.
pub fn eta_dn(d: u32, n: u32) -> f64 {
    f_dn(d, n, rho_dn(d, n))
}

/// Radius `r_q ∈ [0, ρ]` of the invariant ball of the inner map, defined
/// by `f_{d,n}(r_q) = ε`.
pub fn solve_rq(d: u32, n: u32, epsilon: f64) -> Result<f64> {
    let rho = rho_dn(d, n);
    let eta = f_dn(d, n, rho);
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::Domain { function: "solve_rq", value: epsilon });
    }
    if epsilon > eta {
        return Err(Error::ThresholdExceeded { measured: epsilon, required: eta });
    }
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    if epsilon == eta {
        return Ok(rho);
    }
    Ok(bisect(0.0, rho, |r| f_dn(d, n, r) - epsilon))
}

/// The crossing point of `f_{d,n}` and `g_d` in `(0, λ_d)`.
pub fn r_star(d: u32, n: u32) -> f64 {
    let lambda = lambda_d(d);
    let h = |r: f64| f_dn(d, n, r) - g_d(d, r).unwrap_or(f64::INFINITY);
    bisect(lambda * 1e-9, lambda, h)
}

/// The constants attached to a pair `(d, n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConstants {
    pub d: u32,
    pub n: u32,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub eta: f64,
    pub theta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

impl ModelConstants {
    pub fn new(d: u32, n: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("tree order d = {d} < 2")));
        }
        if n < 1 {
            return Err(Error::InvalidInput("localization set must be nonempty".into()));
        }
        let (df, nf) = (d as f64, n as f64);
        let lambda = lambda_d(d);
        let rho = rho_dn(d, n);
        let eta = f_dn(d, n, rho);
        let mass_ratio = rho.powi(d as i32 + 1) / (nf * eta.powi(d as i32 + 1));
        let c1 = (rho / eta).powi(d as i32 - 1);
        let c2 = (df.powf(df / (df - 1.0)) - df) * (1.0 + nf).powf(df / (df + 1.0));
        let c3 = df.powf((df + 1.0) / (df - 1.0)) * mass_ratio;
        let c4 = c2 * (df + 1.0) / (df - 1.0);
        Ok(ModelConstants {
            d,
            n,
            lambda,
            mu: lambda * (1.0 - 1.0 / df),
            rho,
            eta,
            theta: (rho / lambda).powi(d as i32 + 1),
            c1,
            c2,
            c3,
            c4,
            c5: c4 + mass_ratio,
            c6: df * c4 + mass_ratio,
            c7: c3.powf(df / (df + 1.0)),
        })
    }

    /// Slope of the bound `1 − x̄|_A ≤ slope · ε`.
    pub fn cap_slope(&self) -> f64 {
        self.c2 / (self.d as f64 - 1.0)
    }

    /// Slope of the bound `x̄(i) ≥ (1 − slope · ε) Σ_{j∈A} Q(i−j)` on `A^c`.
    pub fn outside_slope(&self) -> f64 {
        self.d as f64 * self.c2 / (self.d as f64 - 1.0)
    }
}
