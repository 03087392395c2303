//! Special functions behind the closed-form F1 score: the complementary
//! error function, the regularized incomplete beta function and the CDF of
//! the noncentral F distribution.
//!
//! Everything here is pure and reentrant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const TINY: f64 = 1e-300;
const CF_EPS: f64 = 1e-16;
const CF_MAX_ITER: usize = 50_000;

/// Truncation control for the Poisson-weighted series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTolerance {
    pub abs_term_cutoff: f64,
    pub max_terms: usize,
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self {
            abs_term_cutoff: 1e-12,
            max_terms: 10_000,
        }
    }
}

impl SeriesTolerance {
    pub fn new(abs_term_cutoff: f64, max_terms: usize) -> Result<Self> {
        let tol = Self {
            abs_term_cutoff,
            max_terms,
        };
        tol.validate()?;
        Ok(tol)
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_term_cutoff > 0.0) || !self.abs_term_cutoff.is_finite() {
            return Err(Error::domain("abs_term_cutoff must be positive and finite"));
        }
        if self.max_terms == 0 {
            return Err(Error::domain("max_terms must be at least 1"));
        }
        Ok(())
    }
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Upper regularized incomplete gamma Q(a, x), x ≥ 0.
fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_front = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..CF_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * CF_EPS {
                break;
            }
        }
        1.0 - sum * ln_front.exp()
    } else {
        // Lentz continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..CF_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < CF_EPS {
                break;
            }
        }
        (ln_front + h.ln()).exp()
    }
}

pub(crate) fn erfc_finite(z: f64) -> f64 {
    if z >= 0.0 {
        gamma_q(0.5, z * z)
    } else {
        2.0 - gamma_q(0.5, z * z)
    }
}

/// Complementary error function `2/√π ∫_z^∞ e^{-r²} dr`.
pub fn erfc(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("erfc argument must be finite, got {z}")));
    }
    Ok(erfc_finite(z))
}

/// Continued fraction part of I_x(a, b) (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Convergence {
        partial_sum: h,
        terms: CF_MAX_ITER,
    })
}

/// `ln I_x(a, b)` for `0 < x < 1`. Stays finite where `I` itself underflows.
fn ln_reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if x < (a + 1.0) / (a + b + 2.0) {
        let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
        Ok(ln_front + beta_cf(x, a, b)?.ln() - a.ln())
    } else {
        let ln_front = b * (-x).ln_1p() + a * x.ln() - ln_beta(a, b);
        let upper = (ln_front + beta_cf(1.0 - x, b, a)?.ln() - b.ln()).exp();
        Ok((-upper.min(1.0)).ln_1p())
    }
}

fn check_beta_args(x: f64, a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x must lie in [0, 1], got {x}")));
    }
    if !(a > 0.0) || !a.is_finite() || !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain(format!(
            "shape parameters must be positive and finite, got a={a}, b={b}"
        )));
    }
    Ok(())
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction with the usual switch to `1 - I_{1-x}(b, a)` for
/// `x > (a+1)/(a+b+2)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(x, a, b)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front + beta_cf(x, a, b)?.ln()).exp() / a
    } else {
        1.0 - (ln_front + beta_cf(1.0 - x, b, a)?.ln()).exp() / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// CDF of the noncentral F distribution with `d1` numerator and `d2`
/// denominator degrees of freedom and noncentrality `lambda` (carried by the
/// numerator).
///
/// Evaluated as `Σ_j e^{-λ/2} (λ/2)^j / j! · I_y(d1/2 + j, d2/2)` with
/// `y = d1·f / (d1·f + d2)`. Summation starts at the mode of the Poisson
/// weights and walks both ways, with the beta terms advanced by the
/// recurrence `I_y(a+1, b) = I_y(a, b) - y^a (1-y)^b / (a B(a, b))`.
/// The upward walk stops once a term drops below `tol.abs_term_cutoff` past
/// `j = λ/2`; the downward walk stops once the remaining Poisson mass bounds
/// the rest of the sum below the cutoff.
pub fn noncentral_f_cdf(f: f64, d1: f64, d2: f64, lambda: f64, tol: SeriesTolerance) -> Result<f64> {
    tol.validate()?;
    if f.is_nan() || f < 0.0 {
        return Err(Error::domain(format!("f must be non-negative, got {f}")));
    }
    if !(d1 >= 1.0) || !(d2 >= 1.0) || !d1.is_finite() || !d2.is_finite() {
        return Err(Error::domain(format!(
            "degrees of freedom must be >= 1, got d1={d1}, d2={d2}"
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "noncentrality must be finite and non-negative, got {lambda}"
        )));
    }
    if f == 0.0 {
        return Ok(0.0);
    }
    if f.is_infinite() {
        return Ok(1.0);
    }

    let y = d1 * f / (d1 * f + d2);
    let a0 = 0.5 * d1;
    let b = 0.5 * d2;
    let mu = 0.5 * lambda;
    if mu == 0.0 {
        if d1 == d2 && f == 1.0 {
            // central F with equal dof is symmetric about 1
            return Ok(0.5);
        }
        return reg_inc_beta(y, a0, b);
    }
    let cutoff = tol.abs_term_cutoff;
    let ln_y = y.ln();
    let ln_1my = (-y).ln_1p();
    let ln_mu = mu.ln();

    let ln_weight = |j: f64| -mu + j * ln_mu - ln_gamma(j + 1.0);
    // y^a (1-y)^b / (a B(a,b))
    let ln_gap = |a: f64| a * ln_y + b * ln_1my - a.ln() - ln_beta(a, b);

    let mode = mu.floor();
    let mut terms = 0usize;
    let mut sum = 0.0;

    // upward from the mode
    {
        let mut j = mode;
        let mut lw = ln_weight(j);
        let a = a0 + j;
        let mut beta = ln_reg_inc_beta(y, a, b)?.exp();
        let mut lg = ln_gap(a);
        loop {
            let term = lw.exp() * beta;
            sum += term;
            terms += 1;
            if term < cutoff && j > mu {
                break;
            }
            if terms > tol.max_terms {
                return Err(Error::Convergence {
                    partial_sum: sum,
                    terms,
                });
            }
            let a = a0 + j;
            beta = (beta - lg.exp()).max(0.0);
            lg += ln_y + (a + b).ln() - (a + 1.0).ln();
            j += 1.0;
            lw += ln_mu - j.ln();
        }
    }

    if mode >= 1.0 {
        // Lower-tail skip: for j0 < mu, P(K < j0) <= w(j0-1) / (1 - (j0-1)/mu),
        // and every term with j0 <= k < mode is at most w(k) * I(j0).
        let mut c = 8.0;
        let j0 = loop {
            let j0 = (mu - c * mu.sqrt()).floor();
            if j0 <= 0.0 {
                break 0.0;
            }
            let jm = j0 - 1.0;
            let tail = (ln_weight(jm)).exp() / (1.0 - jm / mu);
            if tail < 0.5 * cutoff {
                break j0;
            }
            c += 2.0;
        };
        let skip = j0 > 0.0 && ln_reg_inc_beta(y, a0 + j0, b)?.exp() < 0.5 * cutoff;

        if !skip {
            let mut j = mode;
            let mut lw = ln_weight(j);
            let mut beta = ln_reg_inc_beta(y, a0 + j, b)?.exp();
            let mut lg = ln_gap(a0 + j);
            while j >= 1.0 {
                // step j -> j - 1
                lg -= ln_y + (a0 + j - 1.0 + b).ln() - (a0 + j).ln();
                beta = (beta + lg.exp()).min(1.0);
                lw += j.ln() - ln_mu;
                j -= 1.0;
                let term = lw.exp() * beta;
                sum += term;
                terms += 1;
                if j >= 1.0 {
                    let jm = j - 1.0;
                    let tail = (lw + (j / mu).ln()).exp() / (1.0 - jm / mu);
                    if tail < cutoff {
                        break;
                    }
                }
                if terms > tol.max_terms {
                    return Err(Error::Convergence {
                        partial_sum: sum,
                        terms,
                    });
                }
            }
        }
    }

    Ok(sum.clamp(0.0, 1.0))
}
