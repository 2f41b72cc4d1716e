//! Regularized improper action integrals `∫ Π dq`.
//!
//! Binomials `u q^N + v q^M` have closed forms (normal and anomalous); general
//! potentials are integrated numerically on `[0, Q]` and closed off with the
//! regularized large-q tail `∫_Q^∞ Π dq`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    beta_coefficients, classify, default_rho_min, rho_is_minus_one, rho_to_f64, PotentialSpec, Rho,
};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{digamma, general_binomial, harmonic_number, log_gamma, recip_gamma, Jet1};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "level")]
pub enum ActionMethod {
    ClosedNormal,
    ClosedAnomalous(u32),
    NumericRegularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub method: ActionMethod,
    pub residue_used: Jet1,
}

const LEVEL_EPS: f64 = 1e-12;

fn near_nonpositive_integer(x: f64) -> bool {
    x <= LEVEL_EPS && (x - x.round()).abs() < LEVEL_EPS
}

/// Anomaly level of a binomial with real exponents, if `(N+2)/(2(N-M))` is a
/// positive integer.
pub fn binomial_level(n: f64, m: f64) -> Option<u32> {
    let x = (n + 2.0) / (2.0 * (n - m));
    let j = x.round();
    ((x - j).abs() < LEVEL_EPS && j >= 1.0).then_some(j as u32)
}

fn check_binomial(u: f64, v: f64, n: f64, m: f64) -> Result<()> {
    if !(u > 0.0 && v > 0.0) {
        return Err(Error::domain(format!("binomial action needs u, v > 0 (u={u}, v={v})")));
    }
    if !(n > m && m >= 0.0) {
        return Err(Error::domain(format!("binomial action needs N > M ≥ 0 (N={n}, M={m})")));
    }
    Ok(())
}

/// `∫_0^∞ (u q^N + v q^M)^{1/2-s} dq`, continued in `s` through its Gamma-ratio form.
pub fn binomial_action_s(u: f64, v: f64, n: f64, m: f64, s: f64) -> Result<f64> {
    check_binomial(u, v, n, m)?;
    let d = n - m;
    let alpha = (m * (1.0 - 2.0 * s) + 2.0) / (2.0 * d);
    let beta = -(n * (1.0 - 2.0 * s) + 2.0) / (2.0 * d);
    if near_nonpositive_integer(alpha) || near_nonpositive_integer(beta) {
        return Err(Error::Pole(format!("Gamma-ratio pole at s={s} for N={n}, M={m}")));
    }
    let ga = log_gamma(alpha)?;
    let gb = log_gamma(beta)?;
    let ln = ga.ln_abs + gb.ln_abs - alpha * u.ln() - beta * v.ln();
    Ok(ga.sign * gb.sign * ln.exp() * recip_gamma(s - 0.5) / d)
}

/// Residue `β₋₁(0)` of an anomalous binomial at level `j`, as a jet.
pub fn binomial_residue(u: f64, v: f64, j: u32) -> Result<Jet1> {
    let value = general_binomial(0.5, j) * u.powf(0.5 - j as f64) * v.powi(j as i32);
    let deriv = value * (digamma(j as f64 - 0.5)? - digamma(-0.5)? - u.ln());
    Ok(Jet1::new(value, deriv))
}

/// Closed-form `∫_0^∞ (u q^N + v q^M)^{1/2} dq`, normal or anomalous.
pub fn binomial_action(u: f64, v: f64, n: f64, m: f64) -> Result<ActionValue> {
    check_binomial(u, v, n, m)?;
    match binomial_level(n, m) {
        None => Ok(ActionValue {
            value: binomial_action_s(u, v, n, m, 0.0)?,
            method: ActionMethod::ClosedNormal,
            residue_used: Jet1::ZERO,
        }),
        Some(j) => {
            let residue = binomial_residue(u, v, j)?;
            let odd_sum: f64 = (1..j).map(|k| 1.0 / (2 * k - 1) as f64).sum();
            let bracket = -v.ln() + harmonic_number(j) + (2.0 * m / n) * (LN_2 + 0.5 * u.ln() - odd_sum);
            Ok(ActionValue {
                value: 2.0 * j as f64 * residue.value / (n + 2.0) * bracket,
                method: ActionMethod::ClosedAnomalous(j),
                residue_used: residue,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailValue {
    pub value: f64,
    /// Magnitude of the first dropped orders of the large-q series.
    pub truncation_err: f64,
}

/// Regularized `∫_q^∞ Π dq` from the large-q series, keeping orders `ρ ≥ rho_min`.
///
/// The `ρ = -1` term contributes its finite part at `s = 0` plus the anomaly
/// normalization `2(1 - log 2) β₋₁(0)/N`.
pub fn regularized_tail(spec: &PotentialSpec, q: f64, rho_min: Rho) -> Result<TailValue> {
    if !(q > 0.0) {
        return Err(Error::domain(format!("tail needs q > 0 (q={q})")));
    }
    let x = spec.expansion_parameter(q);
    if x >= 0.5 {
        return Err(Error::precondition(
            format!("large-q series does not decrease at q={q} (expansion parameter {x:.3})"),
            Some(spec.radius_for_expansion(0.1)),
        ));
    }
    let extended = rho_min - Rho::from_integer(spec.n as i64);
    let table = beta_coefficients(spec, extended);
    let mut kept = Vec::new();
    let mut dropped = 0.0;
    for (rho, jet) in table.entries.iter() {
        if rho_is_minus_one(*rho) {
            continue;
        }
        let p = rho_to_f64(*rho) + 1.0;
        let term = -jet.value * q.powf(p) / p;
        if *rho >= rho_min {
            kept.push(term);
        } else {
            dropped += term.abs();
        }
    }
    kept.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let series: f64 = kept.iter().sum();
    let n = spec.n as f64;
    let beta = classify(spec)?.beta_m1();
    let bracket = -beta.value * q.ln() + beta.deriv / n + 2.0 * (1.0 - LN_2) * beta.value / n;
    Ok(TailValue {
        value: series + bracket,
        truncation_err: dropped,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ActionOptions {
    pub tol: f64,
    /// Multiplier applied to the automatically chosen split point.
    pub split_scale: f64,
}

impl Default for ActionOptions {
    fn default() -> Self {
        ActionOptions {
            tol: 1e-10,
            split_scale: 1.0,
        }
    }
}

/// Pieces of a numerically regularized action at one split point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitAction {
    pub split: f64,
    pub rho_min: f64,
    pub quadrature: f64,
    pub quadrature_err: f64,
    pub tail: TailValue,
    pub value: f64,
}

fn check_positive_momentum(spec: &PotentialSpec) -> Result<()> {
    let at_zero = spec.momentum_sq(0.0);
    if at_zero < 0.0 {
        return Err(Error::domain(format!(
            "Π² = {at_zero} < 0 at q = 0; negative-energy actions are not continued"
        )));
    }
    Ok(())
}

/// Regularized tail at `q`, deepening the series until its truncation
/// estimate is below `tol`.
pub fn tail_to_tolerance(spec: &PotentialSpec, q: f64, tol: f64) -> Result<(TailValue, Rho)> {
    let step = Rho::from_integer((spec.n - spec.m).max(2) as i64);
    let mut rho_min = default_rho_min(spec);
    let mut tail = regularized_tail(spec, q, rho_min)?;
    let mut tries = 0;
    while tail.truncation_err > tol {
        tries += 1;
        if tries > 60 {
            return Err(Error::Accuracy {
                message: format!("tail series at q={q} does not reach tolerance {tol:e}"),
                best_estimate: tail.value,
                err_est: tail.truncation_err,
            });
        }
        rho_min -= step;
        tail = regularized_tail(spec, q, rho_min)?;
    }
    Ok((tail, rho_min))
}

/// `∫_0^q Π + ∫_q^∞ Π` at an explicit split point, deepening the series until
/// its truncation estimate is below `tol/10`.
pub fn split_action(spec: &PotentialSpec, q: f64, tol: f64) -> Result<SplitAction> {
    check_positive_momentum(spec)?;
    let (tail, rho_min) = tail_to_tolerance(spec, q, 0.1 * tol)?;
    let quad = integrate(
        |x| spec.momentum_sq(x).max(0.0).sqrt(),
        0.0,
        q,
        QuadOptions {
            abs_tol: 0.1 * tol,
            rel_tol: 1e-15,
            max_intervals: 4000,
        },
    );
    Ok(SplitAction {
        split: q,
        rho_min: rho_to_f64(rho_min),
        quadrature: quad.value,
        quadrature_err: quad.err_est,
        tail,
        value: quad.value + tail.value,
    })
}

/// Default split point: where the large-q expansion parameter drops to 0.1.
pub fn default_split(spec: &PotentialSpec) -> f64 {
    spec.radius_for_expansion(0.1).max(0.5)
}

/// Numerically regularized `∫_0^∞ Π dq` for the whole potential of `spec`.
pub fn improper_action(spec: &PotentialSpec) -> Result<ActionValue> {
    improper_action_with(spec, ActionOptions::default())
}

pub fn improper_action_with(spec: &PotentialSpec, opts: ActionOptions) -> Result<ActionValue> {
    let split = default_split(spec) * opts.split_scale;
    let res = split_action(spec, split, opts.tol)?;
    let err = res.quadrature_err + res.tail.truncation_err;
    if err > opts.tol.max(1e-13 * res.quadrature.abs()) {
        return Err(Error::Accuracy {
            message: "improper action did not converge".into(),
            best_estimate: res.value,
            err_est: err,
        });
    }
    Ok(ActionValue {
        value: res.value,
        method: ActionMethod::NumericRegularized,
        residue_used: classify(spec)?.beta_m1(),
    })
}

/// `A₁(λ, v) = ¼ v^{-1/2} λ (log v + 2 log 2)`, the double-pole correction
/// that appears when the uncoupled problem is harmonic.
pub fn anomaly_a1(lambda: f64, v: f64) -> f64 {
    0.25 * lambda / v.sqrt() * (v.ln() + 2.0 * LN_2)
}

/// Closed-form `∫_0^∞ (v q^M + λ)^{1/2} dq` of the uncoupled problem (`λ ≥ 0`).
pub fn uncoupled_action(m: u32, v: f64, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::domain(format!("uncoupled action needs λ ≥ 0 (λ={lambda})")));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(binomial_action(v, lambda, m as f64, 0.0)?.value)
}

/// Large-v form of `∫_0^∞ (q^N + v q^M + λ)^{1/2} dq`, keeping every term of
/// non-positive degree in `g`.
pub fn trinomial_action_asymptotic(n: u32, m: u32, v: f64, lambda: f64) -> Result<f64> {
    if !(n > m && m >= 2) {
        return Err(Error::domain(format!("need N > M ≥ 2 (N={n}, M={m})")));
    }
    let coupled = binomial_action(1.0, v, n as f64, m as f64)?.value;
    let mut total = coupled + uncoupled_action(m, v, lambda)?;
    if m == 2 {
        total += n as f64 / (n as f64 - 2.0) * anomaly_a1(lambda, v);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_to_infinity;
    use crate::special::gamma;
    use std::f64::consts::PI;

    #[test]
    fn bcs_converges_to_literal_integral() {
        // literal integral converges for 3/4 < s < 1
        let s = 0.9;
        let f = |q: f64| (q.powi(4) + q * q).powf(0.5 - s);
        let head = integrate(
            f,
            0.0,
            1.0,
            QuadOptions {
                abs_tol: 1e-13,
                rel_tol: 1e-13,
                max_intervals: 4000,
            },
        );
        let tail = integrate_to_infinity(f, 1.0, QuadOptions::default());
        let got = binomial_action_s(1.0, 1.0, 4.0, 2.0, s).unwrap();
        assert!(
            (got - head.value - tail.value).abs() < 1e-8,
            "{got} vs {}",
            head.value + tail.value
        );
    }

    #[test]
    fn bcs_quartic_at_zero() {
        assert!((binomial_action_s(1.0, 1.0, 4.0, 2.0, 0.0).unwrap() + 1.0 / 3.0).abs() < 1e-14);
        assert!(matches!(
            binomial_action_s(1.0, 1.0, 6.0, 2.0, 0.0),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn bc4_closed_form() {
        for v in [0.5, 1.0, 2.0, 7.0] {
            let a = binomial_action(1.0, v, 4.0, 2.0).unwrap();
            assert_eq!(a.method, ActionMethod::ClosedNormal);
            assert!((a.value + v.powf(1.5) / 3.0).abs() < 1e-13 * v.powf(1.5));
        }
    }

    #[test]
    fn bc1_supersymmetric_family() {
        for (n, m) in [(6.0, 2.0), (10.0, 4.0), (4.0, 1.0)] {
            for (u, v) in [(1.0, 1.0), (2.0, 0.5), (0.3, 3.0)] {
                let a = binomial_action(u, v, n, m).unwrap();
                assert_eq!(a.method, ActionMethod::ClosedAnomalous(1));
                let expected = (v / u.sqrt() / (n + 2.0)) * (-v.ln() + 1.0 + (n - 2.0) / n * (LN_2 + 0.5 * u.ln()));
                assert!((a.value - expected).abs() < 1e-13, "{n} {m} {u} {v}");
            }
        }
    }

    #[test]
    fn bc2_harmonic_general_energy() {
        for (v, l) in [(1.0, 0.5), (2.0, 3.0), (0.4, 1.0)] {
            let a = binomial_action(v, l, 2.0, 0.0).unwrap();
            assert!((a.value - 0.25 * l / v.sqrt() * (1.0 - l.ln())).abs() < 1e-13);
        }
    }

    #[test]
    fn bch_pure_power() {
        for n in [4.0, 6.0, 8.0] {
            let (u, l) = (1.7, 0.6);
            let a = binomial_action(u, l, n, 0.0).unwrap();
            let expected = -1.0 / (2.0 * PI.sqrt())
                * gamma(1.0 + 1.0 / n).unwrap()
                * gamma(-0.5 - 1.0 / n).unwrap()
                * u.powf(-1.0 / n)
                * l.powf(0.5 + 1.0 / n);
            assert!((a.value - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn normal_homogeneity() {
        for (n, m) in [(4.0, 2.0), (8.0, 4.0), (8.0, 2.0), (12.0, 2.0)] {
            let base = binomial_action(1.0, 1.0, n, m).unwrap().value;
            for (u, v) in [(2.0f64, 0.5f64), (0.3, 4.0)] {
                let scaled = u.powf(-(m + 2.0) / (2.0 * (n - m))) * v.powf((n + 2.0) / (2.0 * (n - m))) * base;
                let got = binomial_action(u, v, n, m).unwrap().value;
                assert!((got - scaled).abs() < 1e-12 * scaled.abs());
            }
        }
    }

    #[test]
    fn normal_tail_bracket_vanishes() {
        let spec = PotentialSpec::trinomial(8, 4, 1.0, 0.5).unwrap();
        let r = regularized_tail(&spec, 4.0, Rho::from_integer(-20)).unwrap();
        // no log q term: the tail must be a pure power series in q
        let t = beta_coefficients(&spec, Rho::from_integer(-20));
        assert!(t.residue().is_zero());
        assert!(r.value.is_finite());
    }

    #[test]
    fn tail_rejects_small_q() {
        let spec = PotentialSpec::trinomial(4, 2, 4.0, 0.0).unwrap();
        match regularized_tail(&spec, 1.0, Rho::from_integer(-7)) {
            Err(Error::Precondition { suggested: Some(q), .. }) => assert!(q > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn additivity_over_split_points() {
        for spec in [
            PotentialSpec::trinomial(4, 2, 1.0, 0.0).unwrap(),
            PotentialSpec::trinomial(6, 4, 2.0, 0.0).unwrap(),
            PotentialSpec::trinomial(4, 2, 1.0, 0.7).unwrap(),
            PotentialSpec::uncoupled(2, 1.0, 0.5).unwrap(),
        ] {
            let q0 = default_split(&spec);
            let vals: Vec<f64> = [1.0, 1.5, 2.0, 4.0]
                .iter()
                .map(|k| split_action(&spec, q0 * k, 1e-11).unwrap().value)
                .collect();
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-7, "{spec:?}: {vals:?}");
        }
    }

    #[test]
    fn numeric_matches_closed_binomials() {
        for (n, m) in [(4, 2), (6, 2), (6, 4), (8, 4), (8, 2), (10, 4)] {
            for v in [0.5, 1.0, 2.0] {
                let spec = PotentialSpec::trinomial(n, m, v, 0.0).unwrap();
                let num = improper_action(&spec).unwrap().value;
                let closed = binomial_action(1.0, v, n as f64, m as f64).unwrap().value;
                assert!((num - closed).abs() < 1e-7, "N={n} M={m} v={v}: {num} vs {closed}");
            }
        }
    }

    #[test]
    fn numeric_matches_closed_with_leading_coefficient() {
        for (n, m) in [(6, 4), (6, 2), (4, 2)] {
            let spec = PotentialSpec::new(n, m, 2.3, 0.8, 0.0).unwrap();
            let num = improper_action(&spec).unwrap().value;
            let closed = binomial_action(2.3, 0.8, n as f64, m as f64).unwrap().value;
            assert!((num - closed).abs() < 1e-7, "N={n} M={m}: {num} vs {closed}");
        }
    }

    #[test]
    fn harmonic_at_general_energy_numeric() {
        let spec = PotentialSpec::uncoupled(2, 1.0, 0.5).unwrap();
        let num = improper_action(&spec).unwrap().value;
        assert!((num - 0.125 * (1.0 - 0.5f64.ln())).abs() < 1e-7);
    }

    #[test]
    fn anomalous_log_derivative() {
        // d/dv of the closed form vs finite differences of the numeric route
        for (n, m) in [(6u32, 4u32), (6, 2)] {
            let v = 1.3;
            let h = 1e-3;
            let f = |v: f64| {
                improper_action(&PotentialSpec::trinomial(n, m, v, 0.0).unwrap())
                    .unwrap()
                    .value
            };
            let fd = (f(v + h) - f(v - h)) / (2.0 * h);
            let c = |v: f64| binomial_action(1.0, v, n as f64, m as f64).unwrap().value;
            let hc = 1e-6;
            let dc = (c(v + hc) - c(v - hc)) / (2.0 * hc);
            assert!((fd - dc).abs() < 1e-5, "{n} {m}: {fd} vs {dc}");
        }
    }

    #[test]
    fn trinomial_asymptotic_examples() {
        let (v, l) = (3.0, 0.7);
        let got = trinomial_action_asymptotic(4, 2, v, l).unwrap();
        let expected = -v.powf(1.5) / 3.0
            + 0.25 / v.sqrt() * l * (1.0 - l.ln())
            + 2.0 * 0.25 / v.sqrt() * l * (v.ln() + 2.0 * LN_2);
        assert!((got - expected).abs() < 1e-13);
        assert_eq!(
            trinomial_action_asymptotic(4, 2, v, 0.0).unwrap(),
            binomial_action(1.0, v, 4.0, 2.0).unwrap().value
        );
        let got = trinomial_action_asymptotic(8, 4, v, l).unwrap();
        let expected =
            binomial_action(1.0, v, 8.0, 4.0).unwrap().value + binomial_action(v, l, 4.0, 0.0).unwrap().value;
        assert!((got - expected).abs() < 1e-13);
    }

    #[test]
    fn rejects_negative_energy_through_zero() {
        let spec = PotentialSpec::trinomial(4, 2, 1.0, -0.5).unwrap();
        assert!(matches!(improper_action(&spec), Err(Error::Domain(_))));
        // λ < 0 is fine when the constant M = 0 term keeps Π² positive
        let spec = PotentialSpec::new(4, 0, 1.0, 1.0, -0.5).unwrap();
        assert!(improper_action(&spec).is_ok());
    }
}
