//! Momentum-squared polynomials `Π(q)² = u·q^N + v·q^M + λ`, their anomaly
//! classification, the large-q expansion coefficients and the Symanzik map.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{digamma, general_binomial, Jet1};

/// Exact exponent of `q` in the large-q expansion.
pub type Rho = Ratio<i64>;

/// `u·q^N + v·q^M + λ` with `N > M ≥ 0` even and `u > 0`.
///
/// The constant term `λ` plays the role of minus the classical energy; the
/// spectral operator built from a spec is `-d²/dq² + u·q^N + v·q^M` and `λ`
/// enters only as the spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub n: u32,
    pub m: u32,
    pub u: f64,
    pub v: f64,
    pub lambda: f64,
}

impl PotentialSpec {
    pub fn new(n: u32, m: u32, u: f64, v: f64, lambda: f64) -> Result<Self> {
        if n == 0 || n % 2 != 0 || m % 2 != 0 {
            return Err(Error::domain(format!(
                "exponents must be even with N ≥ 2 (N={n}, M={m})"
            )));
        }
        if m >= n {
            return Err(Error::domain(format!("need N > M (N={n}, M={m})")));
        }
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::domain(format!("leading coefficient must be positive (u={u})")));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!(
                "subleading coefficient must be nonnegative (v={v})"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::domain("lambda must be finite"));
        }
        Ok(PotentialSpec { n, m, u, v, lambda })
    }

    /// `q^N + v q^M + λ`.
    pub fn trinomial(n: u32, m: u32, v: f64, lambda: f64) -> Result<Self> {
        Self::new(n, m, 1.0, v, lambda)
    }

    /// Uncoupled problem `v q^M + λ`, stored with `v` as the leading coefficient.
    pub fn uncoupled(m: u32, v: f64, lambda: f64) -> Result<Self> {
        Self::new(m, 0, v, 0.0, lambda)
    }

    /// `q^2`.
    pub fn harmonic() -> Self {
        PotentialSpec {
            n: 2,
            m: 0,
            u: 1.0,
            v: 0.0,
            lambda: 0.0,
        }
    }

    /// `q^M + g q^N` in the original coupling form, i.e. leading coefficient `g`.
    pub fn coupled_g(m: u32, n: u32, g: f64) -> Result<Self> {
        Self::new(n, m, g, 1.0, 0.0)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        PotentialSpec { lambda, ..*self }
    }

    /// `u q^N + v q^M` (without the constant term).
    pub fn potential(&self, q: f64) -> f64 {
        self.u * q.powi(self.n as i32) + self.v * q.powi(self.m as i32)
    }

    pub fn potential_deriv(&self, q: f64) -> f64 {
        let mut d = self.u * self.n as f64 * q.powi(self.n as i32 - 1);
        if self.m > 0 {
            d += self.v * self.m as f64 * q.powi(self.m as i32 - 1);
        }
        d
    }

    /// `Π(q)² = V(q) + λ`.
    pub fn momentum_sq(&self, q: f64) -> f64 {
        self.potential(q) + self.lambda
    }

    /// Polynomial coefficients of `Π²` indexed by power.
    pub fn momentum_sq_coeffs(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n as usize + 1];
        c[self.n as usize] += self.u;
        c[self.m as usize] += self.v;
        c[0] += self.lambda;
        c
    }

    /// Sum of magnitudes of the relative corrections in
    /// `Π² = u q^N (1 + x)`; the binomial expansion converges for `x_abs < 1`.
    pub fn expansion_parameter(&self, q: f64) -> f64 {
        let nm = (self.n - self.m) as i32;
        (self.v / self.u) * q.powi(-nm) + (self.lambda / self.u).abs() * q.powi(-(self.n as i32))
    }

    /// Smallest `q` with `expansion_parameter(q) ≤ target`.
    pub fn radius_for_expansion(&self, target: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.expansion_parameter(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid == 0.0 || self.expansion_parameter(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Leading exponent `N/2` of the expansion.
    pub fn rho_top(&self) -> Rho {
        Rho::new(self.n as i64, 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum AnomalyType {
    Normal,
    Anomalous { level: u32, beta_m1: Jet1 },
}

impl AnomalyType {
    pub fn beta_m1(&self) -> Jet1 {
        match self {
            AnomalyType::Normal => Jet1::ZERO,
            AnomalyType::Anomalous { beta_m1, .. } => *beta_m1,
        }
    }

    pub fn level(&self) -> Option<u32> {
        match self {
            AnomalyType::Normal => None,
            AnomalyType::Anomalous { level, .. } => Some(*level),
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, AnomalyType::Normal)
    }
}

/// Numeric prefactor `(-1)^{j-1} (2j-2)! / (2^{2j-1} (j-1)! j!)` of the residue
/// at anomaly level `j`; equal to `binom(1/2, j)`.
pub fn anomaly_residue_factor(j: u32) -> f64 {
    general_binomial(0.5, j)
}

/// `(N+2)/(2(N-M))` when it is a positive integer.
pub fn anomaly_level(n: u32, m: u32) -> Option<u32> {
    let num = n as i64 + 2;
    let den = 2 * (n as i64 - m as i64);
    (den > 0 && num % den == 0).then(|| (num / den) as u32)
}

/// Classify the residue function `β₋₁(s)` of `spec`.
///
/// The jet of `β₋₁` carries the `u^{1/2-s}` factor, so its derivative is
/// `β₋₁(0) [ψ(j-1/2) - ψ(-1/2) - log u]`.
pub fn classify(spec: &PotentialSpec) -> Result<AnomalyType> {
    let (level, value) = if spec.n == 2 {
        // M = 0: the v and λ terms merge into one constant.
        (1, 0.5 * (spec.v + spec.lambda) / spec.u.sqrt())
    } else {
        match anomaly_level(spec.n, spec.m) {
            Some(j) if spec.v != 0.0 => {
                let value = anomaly_residue_factor(j) * spec.u.powf(0.5 - j as f64) * spec.v.powi(j as i32);
                (j, value)
            }
            _ => return Ok(AnomalyType::Normal),
        }
    };
    if value == 0.0 {
        return Ok(AnomalyType::Normal);
    }
    let j = level as f64;
    let deriv = value * (digamma(j - 0.5)? - digamma(-0.5)? - spec.u.ln());
    Ok(AnomalyType::Anomalous {
        level,
        beta_m1: Jet1::new(value, deriv),
    })
}

/// Coefficients `β_ρ` of `(Π²)^{1/2-s} ~ Σ β_ρ(s) q^{ρ-Ns}`, as jets at `s = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    pub entries: BTreeMap<Rho, Jet1>,
}

impl BetaTable {
    pub fn get(&self, rho: Rho) -> Jet1 {
        self.entries.get(&rho).copied().unwrap_or(Jet1::ZERO)
    }

    pub fn residue(&self) -> Jet1 {
        self.get(Rho::from_integer(-1))
    }

    /// Entries in descending order of ρ.
    pub fn descending(&self) -> impl Iterator<Item = (&Rho, &Jet1)> {
        self.entries.iter().rev()
    }
}

/// Generalized binomial expansion of
/// `(u q^N)^{1/2-s} (1 + (v/u) q^{M-N} + (λ/u) q^{-N})^{1/2-s}`, keeping all ρ ≥ `rho_min`.
///
/// The term with `a` powers of the v-correction and `b` of the λ-correction
/// lands on `ρ = N/2 - a(N-M) - bN`.
pub fn beta_coefficients(spec: &PotentialSpec, rho_min: Rho) -> BetaTable {
    let mut entries: BTreeMap<Rho, Jet1> = BTreeMap::new();
    let top = spec.rho_top();
    let step_v = Rho::from_integer((spec.n - spec.m) as i64);
    let step_l = Rho::from_integer(spec.n as i64);
    let ratio_v = spec.v / spec.u;
    let ratio_l = spec.lambda / spec.u;
    let sqrt_u = spec.u.sqrt();
    let ln_u = spec.u.ln();

    let mut a = 0u32;
    loop {
        let rho_a = top - step_v * a as i64;
        if rho_a < rho_min || (a > 0 && ratio_v == 0.0) {
            break;
        }
        let mut b = 0u32;
        loop {
            let rho = rho_a - step_l * b as i64;
            if rho < rho_min || (b > 0 && ratio_l == 0.0) {
                break;
            }
            let k = a + b;
            let binom = general_binomial(0.5, k);
            let dlog_binom: f64 = (0..k).map(|i| 1.0 / (0.5 - i as f64)).sum();
            let multinom = general_binomial(k as f64, a);
            let value = sqrt_u * binom * multinom * ratio_v.powi(a as i32) * ratio_l.powi(b as i32);
            let jet = Jet1::new(value, -value * (ln_u + dlog_binom));
            let e = entries.entry(rho).or_insert(Jet1::ZERO);
            *e = *e + jet;
            b += 1;
        }
        a += 1;
    }
    BetaTable { entries }
}

/// Default truncation used by the action tail: three `(N-M)` steps below ρ = -1.
pub fn default_rho_min(spec: &PotentialSpec) -> Rho {
    Rho::from_integer(-1 - 3 * (spec.n - spec.m) as i64)
}

/// `μ(N) = 1/2 + 1/N`.
pub fn order_mu(n: u32) -> f64 {
    0.5 + 1.0 / n as f64
}

/// Symanzik dilation: `(g, E)` for `q^M + g q^N` to `(v, λ)` for `q^N + v q^M + λ`.
pub fn symanzik_map(m: u32, n: u32, g: f64, energy: f64) -> Result<(f64, f64)> {
    if !(g > 0.0) {
        return Err(Error::domain(format!("symanzik_map needs g > 0 (g={g})")));
    }
    let v = g.powf(-((m + 2) as f64) / (n + 2) as f64);
    let lambda = -v.powf(2.0 / (m + 2) as f64) * energy;
    Ok((v, lambda))
}

pub fn symanzik_inverse(m: u32, n: u32, v: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(v > 0.0) {
        return Err(Error::domain(format!("symanzik_inverse needs v > 0 (v={v})")));
    }
    let g = v.powf(-((n + 2) as f64) / (m + 2) as f64);
    let energy = -v.powf(-2.0 / (m + 2) as f64) * lambda;
    Ok((g, energy))
}

/// Spectral rescaling factor: `E_k(g) = v^{-2/(M+2)} λ_k(v)`.
pub fn symanzik_energy_scale(m: u32, v: f64) -> f64 {
    v.powf(-2.0 / (m + 2) as f64)
}

pub(crate) fn rho_to_f64(r: Rho) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub(crate) fn rho_is_minus_one(r: Rho) -> bool {
    (r + Rho::from_integer(1)).is_zero()
}
