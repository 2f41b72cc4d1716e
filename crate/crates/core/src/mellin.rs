//! Large-v asymptotics of `∫_0^∞ (q^N + v q^M + λ)^{1/2} dq` from the poles of
//! its Mellin transform in `v`,
//!
//! `Γ(-σ) Γ((Mσ+1)/N) Γ(s+σ-1/2-(Mσ+1)/N) / (N Γ(s-1/2)) · λ^{-s-(N-M)σ/N+1/2+1/N}`.
//!
//! Pole bookkeeping is exact (rationals); residues are evaluated in floating
//! point from two-term Laurent expansions of each factor.

use std::f64::consts::LN_2;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::potential::{rho_to_f64, Rho};
use crate::special::{digamma, log_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GammaFactor {
    /// `Γ(-σ)`: fixed poles at `σ = 0, 1, 2, …`.
    First,
    /// `Γ((Mσ+1)/N)`: fixed poles at `σ = -(nN+1)/M`.
    Second,
    /// `Γ(s+σ-1/2-(Mσ+1)/N)`: poles moving with `s`.
    Third,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoleRef {
    pub source: GammaFactor,
    pub index: u32,
}

fn ser_rho<S: Serializer>(r: &Rho, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MellinPole {
    #[serde(serialize_with = "ser_rho")]
    pub sigma0: Rho,
    pub mobile: bool,
    pub source: GammaFactor,
    pub index: u32,
    pub confluent_with: Option<PoleRef>,
    #[serde(serialize_with = "ser_rho")]
    pub d_v: Rho,
    #[serde(serialize_with = "ser_rho")]
    pub d_lambda: Rho,
    #[serde(serialize_with = "ser_rho")]
    pub d_g: Rho,
    /// Lies left of the contour for `s > μ(N)`.
    pub left_of_contour: bool,
    /// Contributes at non-positive degree in `g`.
    pub kept: bool,
}

impl MellinPole {
    fn new(n: i64, m: i64, source: GammaFactor, index: u32, sigma0: Rho) -> Self {
        let one = Rho::from_integer(1);
        let nn = Rho::from_integer(n);
        let mm = Rho::from_integer(m);
        let d_lambda = Rho::new(1, 2) + one / nn - (nn - mm) / nn * sigma0;
        let d_g = -(mm * sigma0 + one) / nn;
        MellinPole {
            sigma0,
            mobile: source == GammaFactor::Third,
            source,
            index,
            confluent_with: None,
            d_v: sigma0,
            d_lambda,
            d_g,
            left_of_contour: source != GammaFactor::First,
            kept: sigma0 >= -one / mm,
        }
    }

    pub fn selected(&self) -> bool {
        self.left_of_contour && self.kept
    }

    /// Confluent with a fixed pole of `Γ(-σ)`, which pinches the contour.
    pub fn is_pinched(&self) -> bool {
        matches!(
            self.confluent_with,
            Some(PoleRef {
                source: GammaFactor::First,
                ..
            })
        )
    }

    pub fn is_double(&self) -> bool {
        self.confluent_with.is_some() && !self.is_pinched()
    }
}

fn check_exponents(n: u32, m: u32) -> Result<()> {
    if !(n > m && m >= 2 && n % 2 == 0 && m % 2 == 0) {
        return Err(Error::domain(format!("need even N > M ≥ 2 (N={n}, M={m})")));
    }
    Ok(())
}

/// Every pole of the three Gamma factors with `σ(0)` in `[lo, hi]`, reported at
/// `s = 0`, sorted by decreasing `σ(0)`.
pub fn enumerate_poles(n: u32, m: u32, lo: Rho, hi: Rho) -> Result<Vec<MellinPole>> {
    check_exponents(n, m)?;
    let (ni, mi) = (n as i64, m as i64);
    let mut poles = Vec::new();
    for k in 0.. {
        let s = Rho::from_integer(k);
        if s > hi {
            break;
        }
        if s >= lo {
            poles.push(MellinPole::new(ni, mi, GammaFactor::First, k as u32, s));
        }
    }
    for k in 0.. {
        let s = Rho::new(-(k * ni + 1), mi);
        if s < lo {
            break;
        }
        if s <= hi {
            poles.push(MellinPole::new(ni, mi, GammaFactor::Second, k as u32, s));
        }
    }
    for k in 0.. {
        let s = Rho::new(ni + 2 - 2 * k * ni, 2 * (ni - mi));
        if s < lo {
            break;
        }
        if s <= hi {
            poles.push(MellinPole::new(ni, mi, GammaFactor::Third, k as u32, s));
        }
    }
    let snapshot = poles.clone();
    for p in poles.iter_mut() {
        p.confluent_with = snapshot
            .iter()
            .find(|q| q.sigma0 == p.sigma0 && q.source != p.source)
            .map(|q| PoleRef {
                source: q.source,
                index: q.index,
            });
    }
    poles.sort_by(|a, b| b.sigma0.cmp(&a.sigma0).then(a.index.cmp(&b.index)));
    Ok(poles)
}

pub fn default_window() -> (Rho, Rho) {
    (Rho::from_integer(-3), Rho::from_integer(3))
}

/// The leading mobile pole `σ₀` and the subleading fixed pole `σ₁ = -1/M`.
pub fn contributing_poles(n: u32, m: u32) -> Result<(MellinPole, MellinPole)> {
    let lo = Rho::new(-1, m as i64) - Rho::from_integer(1);
    let hi = Rho::new(n as i64 + 2, 2 * (n as i64 - m as i64)) + Rho::from_integer(1);
    let poles = enumerate_poles(n, m, lo, hi)?;
    let pick = |src: GammaFactor| {
        poles
            .iter()
            .find(|p| p.source == src && p.index == 0)
            .copied()
            .expect("window contains both poles")
    };
    Ok((pick(GammaFactor::Third), pick(GammaFactor::Second)))
}

/// `x^lead (c0 + c1 x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Laurent {
    lead: i32,
    c0: f64,
    c1: f64,
}

impl Laurent {
    fn constant(c: f64) -> Self {
        Laurent {
            lead: 0,
            c0: c,
            c1: 0.0,
        }
    }

    fn mul(self, o: Laurent) -> Laurent {
        Laurent {
            lead: self.lead + o.lead,
            c0: self.c0 * o.c0,
            c1: self.c0 * o.c1 + self.c1 * o.c0,
        }
    }

    /// Coefficients of `x^{-2}` and `x^{-1}`.
    fn polar_part(self) -> Result<(f64, f64)> {
        match self.lead {
            l if l >= 0 => Ok((0.0, 0.0)),
            -1 => Ok((0.0, self.c0)),
            -2 => Ok((self.c0, self.c1)),
            l => Err(Error::Unsupported(format!("pole of order {} in Mellin residue", -l))),
        }
    }

    /// `Γ(a + b x)`.
    fn gamma(a: Rho, b: f64) -> Result<Laurent> {
        if a <= Rho::from_integer(0) && a.is_integer() {
            let k = -a.to_integer();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            let c = sign / fact;
            // Γ(-k + y) = (-1)^k/k! [1/y + ψ(k+1) + O(y)]
            return Ok(Laurent {
                lead: -1,
                c0: c / b,
                c1: c * digamma(k as f64 + 1.0)?,
            });
        }
        let af = rho_to_f64(a);
        let g = log_gamma(af)?.value();
        Ok(Laurent {
            lead: 0,
            c0: g,
            c1: g * b * digamma(af)?,
        })
    }

    /// `1/Γ(a + b x)` at a regular point.
    fn recip_gamma(a: f64, b: f64) -> Result<Laurent> {
        let g = log_gamma(a)?.value();
        Ok(Laurent {
            lead: 0,
            c0: 1.0 / g,
            c1: -b * digamma(a)? / g,
        })
    }

    /// `base^(e0 + e1 x)`.
    fn power(base: f64, e0: f64, e1: f64) -> Laurent {
        let c0 = base.powf(e0);
        let c1 = if e1 == 0.0 { 0.0 } else { c0 * e1 * base.ln() };
        Laurent { lead: 0, c0, c1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TermKind {
    Leading,
    Subleading,
}

/// `v^degree_v (coeff_logv log v + coeff_const)`; λ-dependence is folded into
/// the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticTerm {
    pub kind: TermKind,
    #[serde(serialize_with = "ser_rho")]
    pub degree_v: Rho,
    pub coeff_const: f64,
    pub coeff_logv: f64,
    pub pinched: bool,
    pub double: bool,
}

impl AsymptoticTerm {
    pub fn value(&self, v: f64) -> f64 {
        if self.coeff_const == 0.0 && self.coeff_logv == 0.0 {
            return 0.0;
        }
        v.powf(rho_to_f64(self.degree_v)) * (self.coeff_logv * v.ln() + self.coeff_const)
    }
}

fn leading_term(n: u32, m: u32, pole: &MellinPole) -> Result<AsymptoticTerm> {
    let (nf, mf) = (n as f64, m as f64);
    let d = nf - mf;
    let sigma0 = pole.sigma0;
    let alpha = (Rho::from_integer(m as i64) * sigma0 + 1) / Rho::from_integer(n as i64);
    if pole.is_pinched() {
        // Residue in σ as a function of s near 0:
        // Γ(-σ₀(s)) Γ(α(s)) / ((N-M) Γ(s-1/2)), with σ₀(s) = σ₀ - N s/(N-M).
        let k = nf / d;
        let r = Laurent::gamma(-sigma0, k)?
            .mul(Laurent::gamma(alpha, -mf / d)?)
            .mul(Laurent::recip_gamma(-0.5, 1.0)?)
            .mul(Laurent::constant(1.0 / d));
        let (_, c0) = r.polar_part()?;
        let c1 = if r.lead == -1 { r.c1 } else { 0.0 };
        return Ok(AsymptoticTerm {
            kind: TermKind::Leading,
            degree_v: sigma0,
            coeff_const: c1 + 2.0 * (1.0 - LN_2) * c0,
            coeff_logv: -k * c0,
            pinched: true,
            double: false,
        });
    }
    // simple pole of the third factor; the λ power is λ^0 here
    let third_arg = Rho::from_integer(0);
    let r = Laurent::gamma(-sigma0, -1.0)?
        .mul(Laurent::gamma(alpha, mf / nf)?)
        .mul(Laurent::gamma(third_arg, d / nf)?)
        .mul(Laurent::recip_gamma(-0.5, 0.0)?)
        .mul(Laurent::constant(1.0 / nf));
    let (a, b) = r.polar_part()?;
    Ok(AsymptoticTerm {
        kind: TermKind::Leading,
        degree_v: sigma0,
        coeff_const: b,
        coeff_logv: a,
        pinched: false,
        double: false,
    })
}

fn subleading_term(n: u32, m: u32, pole: &MellinPole, lambda: f64) -> Result<AsymptoticTerm> {
    let (nf, mf) = (n as f64, m as f64);
    let sigma = pole.sigma0;
    let zero = |double| AsymptoticTerm {
        kind: TermKind::Subleading,
        degree_v: sigma,
        coeff_const: 0.0,
        coeff_logv: 0.0,
        pinched: false,
        double,
    };
    if lambda == 0.0 {
        // positive λ-degree: the contribution vanishes with λ
        return Ok(zero(pole.is_double()));
    }
    if lambda < 0.0 {
        return Err(Error::domain(format!(
            "subleading Mellin term needs λ ≥ 0 (λ={lambda})"
        )));
    }
    let nn = Rho::from_integer(n as i64);
    let mm = Rho::from_integer(m as i64);
    let half = Rho::new(1, 2);
    let second_arg = (mm * sigma + 1) / nn;
    let third_arg = sigma - half - second_arg;
    let r = Laurent::gamma(-sigma, -1.0)?
        .mul(Laurent::gamma(second_arg, mf / nf)?)
        .mul(Laurent::gamma(third_arg, (nf - mf) / nf)?)
        .mul(Laurent::recip_gamma(-0.5, 0.0)?)
        .mul(Laurent::power(lambda, rho_to_f64(pole.d_lambda), -(nf - mf) / nf))
        .mul(Laurent::constant(1.0 / nf));
    let (a, b) = r.polar_part()?;
    Ok(AsymptoticTerm {
        kind: TermKind::Subleading,
        degree_v: sigma,
        coeff_const: b,
        coeff_logv: a,
        pinched: false,
        double: r.lead == -2,
    })
}

/// The two contributing terms of the large-v expansion, leading first.
pub fn assemble_asymptotics(n: u32, m: u32, lambda: f64) -> Result<Vec<AsymptoticTerm>> {
    let (lead, sub) = contributing_poles(n, m)?;
    Ok(vec![leading_term(n, m, &lead)?, subleading_term(n, m, &sub, lambda)?])
}

pub fn asymptotic_sum(terms: &[AsymptoticTerm], v: f64) -> f64 {
    terms.iter().map(|t| t.value(v)).sum()
}
