//! Real-argument special functions: log-Gamma with sign, digamma, generalized
//! binomial coefficients and the odd harmonic partial sums.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;
/// Catalan's constant.
pub const CATALAN: f64 = 0.915_965_594_177_219_015_05;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Value and first s-derivative of a function of `s`, both taken at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet1 {
    pub value: f64,
    pub deriv: f64,
}

impl Jet1 {
    pub const ZERO: Jet1 = Jet1 { value: 0.0, deriv: 0.0 };

    pub fn new(value: f64, deriv: f64) -> Self {
        Jet1 { value, deriv }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0.0 && self.deriv == 0.0
    }
}

impl std::ops::Add for Jet1 {
    type Output = Jet1;
    fn add(self, rhs: Jet1) -> Jet1 {
        Jet1::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

/// `log|Γ(x)|` together with the sign of `Γ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGamma {
    pub ln_abs: f64,
    pub sign: f64,
}

impl LogGamma {
    pub fn value(&self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `sin(πx)` with argument reduction so that integers give exact zeros.
pub fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    let (y, sign) = if r > 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let y = if y > 0.5 { 1.0 - y } else { y };
    sign * (PI * y).sin()
}

fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

pub fn log_gamma(x: f64) -> Result<LogGamma> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma: non-finite argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Domain(format!("log_gamma: pole at {x}")));
    }
    if x < 0.5 {
        // Γ(x) Γ(1-x) = π / sin(πx)
        let s = sin_pi(x);
        let rest = log_gamma(1.0 - x)?;
        return Ok(LogGamma {
            ln_abs: PI.ln() - s.abs().ln() - rest.ln_abs,
            sign: s.signum() * rest.sign,
        });
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    let ln_abs = 0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln();
    Ok(LogGamma { ln_abs, sign: 1.0 })
}

pub fn gamma(x: f64) -> Result<f64> {
    log_gamma(x).map(|g| g.value())
}

/// `1/Γ(x)`, which is entire: zero at the non-positive integers.
pub fn recip_gamma(x: f64) -> f64 {
    match log_gamma(x) {
        Ok(g) => g.sign * (-g.ln_abs).exp(),
        Err(_) => 0.0,
    }
}

/// ψ(x) = Γ'(x)/Γ(x).
pub fn digamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("digamma: non-finite argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Domain(format!("digamma: pole at {x}")));
    }
    if x <= 0.0 {
        // ψ(1-x) - ψ(x) = π cot(πx)
        return Ok(digamma(1.0 - x)? - PI * cos_pi(x) / sin_pi(x));
    }
    let mut shift = 0.0;
    let mut y = x;
    while y < 10.0 {
        shift += 1.0 / y;
        y += 1.0;
    }
    let r = 1.0 / (y * y);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r / 12.0))))));
    Ok(y.ln() - 0.5 / y - series - shift)
}

/// `alpha (alpha-1) ... (alpha-k+1) / k!`, by product recurrence.
pub fn general_binomial(alpha: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (alpha - i as f64) / (i as f64 + 1.0);
    }
    acc
}

/// `Σ_{k=0}^{K-1} 1/(2k+1)`; summed smallest-first.
pub fn odd_harmonic_partial(count: u64) -> f64 {
    (0..count).rev().map(|k| 1.0 / (2 * k + 1) as f64).sum()
}

/// Large-K limit form `½(log K + γ + 2 log 2)` of [`odd_harmonic_partial`].
pub fn odd_harmonic_asymptotic(count: u64) -> f64 {
    0.5 * ((count as f64).ln() + EULER_GAMMA + 2.0 * std::f64::consts::LN_2)
}

/// `Σ_{m=1}^{n} 1/m`.
pub fn harmonic_number(n: u32) -> f64 {
    (1..=n).map(|m| 1.0 / m as f64).sum()
}
