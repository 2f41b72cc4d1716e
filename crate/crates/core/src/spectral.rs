//! Spectral zeta functions and determinants: sums over computed spectra with a
//! semiclassical tail, Weierstrass-product ratios, the harmonic closed form,
//! shooting on the canonical recessive solution, and dilation laws.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::action::tail_to_tolerance;
use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions};
use crate::potential::{classify, order_mu, PotentialSpec};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::semiclassical::{power_sum_decay, tail_sum, turning_point};
use crate::special::{digamma, log_gamma, recip_gamma};
use crate::spectrum::{eigenvalues_with, SpectrumOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetMethod {
    Product,
    ClosedHarmonic,
    Shooting,
}

/// `D = D⁺D⁻` (full), `Dᴾ = D⁺/D⁻` (skew) and the parity parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminantValue {
    pub full: Option<f64>,
    pub skew: Option<f64>,
    pub even: Option<f64>,
    pub odd: Option<f64>,
    pub method: DetMethod,
}

impl DeterminantValue {
    pub fn from_parts(even: f64, odd: f64, method: DetMethod) -> Self {
        DeterminantValue {
            full: Some(even * odd),
            skew: (odd != 0.0).then(|| even / odd),
            even: Some(even),
            odd: Some(odd),
            method,
        }
    }
}

/// `sign · e^{log_abs}`, for products that overflow a double.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub log_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaValue {
    pub s: f64,
    pub e: f64,
    pub value: f64,
    /// Share of `value` contributed by the tail model (or the acceleration).
    pub tail_fraction: f64,
    pub err_est: f64,
}

/// A spectrum together with the potential that generated it (for tails).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub spec: PotentialSpec,
    pub eigenvalues: Vec<f64>,
    pub errors: Vec<f64>,
}

impl SpectralData {
    /// Exact `2k + 1` levels of `-d²/dq² + q²`.
    pub fn harmonic(count: usize) -> Self {
        SpectralData {
            spec: PotentialSpec::harmonic(),
            eigenvalues: (0..count).map(|k| (2 * k + 1) as f64).collect(),
            errors: vec![0.0; count],
        }
    }

    pub fn compute(spec: &PotentialSpec, count: usize, tol: f64) -> Result<Self> {
        Self::compute_with(spec, count, tol, SpectrumOptions::default())
    }

    pub fn compute_with(spec: &PotentialSpec, count: usize, tol: f64, opts: SpectrumOptions) -> Result<Self> {
        let r = eigenvalues_with(spec, count, tol, opts)?;
        Ok(SpectralData {
            spec: *spec,
            eigenvalues: r.eigenvalues.iter().map(|e| e.value).collect(),
            errors: r.eigenvalues.iter().map(|e| e.err_est).collect(),
        })
    }

    fn check_below_ground(&self, e: f64) -> Result<()> {
        match self.eigenvalues.first() {
            Some(&l0) if e < l0 => Ok(()),
            Some(&l0) => Err(Error::domain(format!("E={e} is not below the ground level {l0}"))),
            None => Err(Error::domain("empty spectrum")),
        }
    }
}

/// `Σ_k (λ_k - E)^{-s}` over the computed levels plus the semiclassical tail.
pub fn zeta_full(data: &SpectralData, s: f64, e: f64) -> Result<ZetaValue> {
    if s <= order_mu(data.spec.n) {
        return Err(Error::Divergent(format!(
            "full zeta diverges at s={s} (convergence needs s > {})",
            order_mu(data.spec.n)
        )));
    }
    data.check_below_ground(e)?;
    let mut head = 0.0;
    let mut head_err = 0.0;
    for (l, de) in data.eigenvalues.iter().zip(&data.errors).rev() {
        head += (l - e).powf(-s);
        head_err += s * (l - e).powf(-s - 1.0) * de;
    }
    let k = data.eigenvalues.len();
    let f = |x: f64| ((x - e).powf(-s), -s * (x - e).powf(-s - 1.0));
    let tail = tail_sum(&data.spec, f, k, power_sum_decay(data.spec.n, s))?;
    // next Euler–Maclaurin order and the semiclassical level error scale with
    // the size of the first correction
    let (_, fp) = f(data.eigenvalues[k - 1]);
    let value = head + tail;
    Ok(ZetaValue {
        s,
        e,
        value,
        tail_fraction: tail / value,
        err_est: head_err + fp.abs() / 24.0,
    })
}

/// Limit of an alternating sequence of partial sums by iterated averaging of
/// its last `depth + 1` entries; also returns the change from one fewer level.
pub fn accelerate_alternating(partial: &[f64], depth: usize) -> (f64, f64) {
    let depth = depth.min(partial.len().saturating_sub(1));
    let mut row: Vec<f64> = partial[partial.len() - depth - 1..].to_vec();
    let mut prev = *row.last().unwrap_or(&0.0);
    for _ in 0..depth {
        prev = row[row.len() - 1];
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let value = row[0];
    (value, (value - prev).abs())
}

pub const ACCELERATION_DEPTH: usize = 12;

/// `Σ_k (-1)^k (λ_k - E)^{-s}` with iterated-averaging acceleration.
pub fn zeta_skew(data: &SpectralData, s: f64, e: f64) -> Result<ZetaValue> {
    data.check_below_ground(e)?;
    let mut partial = Vec::with_capacity(data.eigenvalues.len());
    let mut acc = 0.0;
    let mut head_err = 0.0;
    for (k, (l, de)) in data.eigenvalues.iter().zip(&data.errors).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * (l - e).powf(-s);
        head_err += s * (l - e).powf(-s - 1.0) * de;
        partial.push(acc);
    }
    let (value, acc_err) = accelerate_alternating(&partial, ACCELERATION_DEPTH);
    let last = *partial.last().expect("nonempty");
    Ok(ZetaValue {
        s,
        e,
        value,
        tail_fraction: (value - last) / value,
        err_est: head_err + acc_err,
    })
}

/// `Z⁺ = (Z + Zᴾ)/2` and `Z⁻ = (Z - Zᴾ)/2`.
pub fn parity_zetas(full: &ZetaValue, skew: &ZetaValue) -> (f64, f64) {
    (0.5 * (full.value + skew.value), 0.5 * (full.value - skew.value))
}

#[derive(Debug, Clone, Copy)]
pub struct ZetaOptions {
    pub initial_count: usize,
    pub tail_cap: f64,
    pub tol: f64,
    pub spectrum: SpectrumOptions,
}

impl Default for ZetaOptions {
    fn default() -> Self {
        ZetaOptions {
            initial_count: 128,
            tail_cap: 0.1,
            tol: 1e-10,
            spectrum: SpectrumOptions::default(),
        }
    }
}

/// Full zeta of a potential, enlarging the computed spectrum until the tail
/// share is below the cap or the eigenvalue cap is reached.
pub fn zeta_full_for(spec: &PotentialSpec, s: f64, e: f64, opts: ZetaOptions) -> Result<(ZetaValue, SpectralData)> {
    let mut count = opts.initial_count.min(opts.spectrum.max_count);
    loop {
        let data = SpectralData::compute_with(spec, count, opts.tol, opts.spectrum)?;
        let z = zeta_full(&data, s, e)?;
        if z.tail_fraction.abs() < opts.tail_cap || count >= opts.spectrum.max_count {
            return Ok((z, data));
        }
        count = (2 * count).min(opts.spectrum.max_count);
    }
}

/// Closed-form determinants of `-d²/dq² + v q² + λ`.
pub fn harmonic_det(v: f64, lambda: f64) -> Result<DeterminantValue> {
    if !(v > 0.0) {
        return Err(Error::domain(format!("harmonic_det needs v > 0 (v={v})")));
    }
    let x = lambda / v.sqrt();
    // unit-frequency parity parts, then the dilation by r = v^{1/2}
    let even = 2f64.powf(1.0 - x / 2.0) * PI.sqrt() * recip_gamma((1.0 + x) / 4.0);
    let odd = 2f64.powf(-x / 2.0) * PI.sqrt() * recip_gamma((3.0 + x) / 4.0);
    let base = DeterminantValue::from_parts(even, odd, DetMethod::ClosedHarmonic);
    Ok(dilate_det(&base, v.sqrt(), -x / 2.0))
}

/// `v^{-x/4} 2^{-x/2} √(2π) / Γ((1+x)/2)` with `x = v^{-1/2} λ`.
pub fn harmonic_det_full(v: f64, lambda: f64) -> f64 {
    let x = lambda / v.sqrt();
    v.powf(-x / 4.0) * 2f64.powf(-x / 2.0) * (2.0 * PI).sqrt() * recip_gamma(0.5 * (1.0 + x))
}

/// `Z(0, ·) = -2β₋₁(0)/N` of a potential, the exponent of the full dilation law.
pub fn dilation_exponent(spec: &PotentialSpec) -> Result<f64> {
    Ok(-2.0 * classify(spec)?.beta_m1().value / spec.n as f64)
}

/// Rescales determinants of `H + λ/r` to those of `rH + λ`: full by
/// `r^{Z(0)}`, skew by `r^{1/2}`, parity parts by `r^{(Z(0) ± 1/2)/2}`.
pub fn dilate_det(det: &DeterminantValue, r: f64, z0: f64) -> DeterminantValue {
    let scale = |x: Option<f64>, p: f64| x.map(|x| x * r.powf(p));
    DeterminantValue {
        full: scale(det.full, z0),
        skew: scale(det.skew, 0.5),
        even: scale(det.even, 0.5 * (z0 + 0.5)),
        odd: scale(det.odd, 0.5 * (z0 - 0.5)),
        method: det.method,
    }
}

/// `Z_{rH}(s, λ) = r^{-s} Z_H(s, λ/r)`.
pub fn dilate_zeta(z: &ZetaValue, r: f64) -> ZetaValue {
    let f = r.powf(-z.s);
    ZetaValue {
        e: z.e * r,
        value: z.value * f,
        err_est: z.err_est * f,
        ..*z
    }
}

/// Dilation data for `-d²/dq² + v q^M + λ` = `r (-d²/dq² + q^M + λ/r)`,
/// `r = v^{2/(M+2)}`: returns `(r, λ/r, full exponent)`.
pub fn uncoupled_dilation(m: u32, v: f64, lambda: f64) -> Result<(f64, f64, f64)> {
    let r = v.powf(2.0 / (m as f64 + 2.0));
    let scaled = PotentialSpec::uncoupled(m, 1.0, lambda / r)?;
    Ok((r, lambda / r, dilation_exponent(&scaled)?))
}

fn log_product_term(l: f64, lambda: f64) -> (f64, f64) {
    let r = lambda / l;
    if r > -1.0 {
        (r.ln_1p(), 1.0)
    } else {
        ((-1.0 - r).ln(), -1.0)
    }
}

/// `D(λ)/D(0) = Π_k (1 + λ/λ_k)` (full) and the alternating skew product
/// `Dᴾ(λ)/Dᴾ(0) = Π_k (1 + λ/λ_k)^{(-1)^k}`, for `N > 2`.
pub fn det_ratio(data: &SpectralData, lambda: f64) -> Result<(SignedLog, SignedLog)> {
    if data.spec.n <= 2 {
        return Err(Error::Unsupported("product ratio needs N > 2; use harmonic_det".into()));
    }
    let mut full = 0.0;
    let mut sign = 1.0;
    let mut partial = Vec::with_capacity(data.eigenvalues.len());
    let mut skew = 0.0;
    let mut skew_sign = 1.0;
    for (k, &l) in data.eigenvalues.iter().enumerate() {
        let (lg, sg) = log_product_term(l, lambda);
        if sg == 0.0 {
            return Ok((
                SignedLog {
                    log_abs: f64::NEG_INFINITY,
                    sign: 0.0,
                },
                SignedLog {
                    log_abs: if k % 2 == 0 { f64::NEG_INFINITY } else { f64::INFINITY },
                    sign: 1.0,
                },
            ));
        }
        full += lg;
        sign *= sg;
        skew_sign *= sg;
        skew += if k % 2 == 0 { lg } else { -lg };
        partial.push(skew);
    }
    let k = data.eigenvalues.len();
    let beta = 1.0 - order_mu(data.spec.n);
    let f = |x: f64| ((lambda / x).ln_1p(), -lambda / (x * (x + lambda)));
    full += tail_sum(&data.spec, f, k, beta)?;
    let (skew_acc, _) = accelerate_alternating(&partial, ACCELERATION_DEPTH);
    Ok((
        SignedLog { log_abs: full, sign },
        SignedLog {
            log_abs: skew_acc,
            sign: skew_sign,
        },
    ))
}

const JET: usize = 12;
const WKB_MAX: usize = 8;

type Jet = [f64; JET];

fn jet_mul(a: &Jet, b: &Jet) -> Jet {
    let mut c = [0.0; JET];
    for i in 0..JET {
        for j in 0..JET - i {
            c[i + j] += a[i] * b[j];
        }
    }
    c
}

fn jet_div(a: &Jet, b: &Jet) -> Jet {
    let mut c = [0.0; JET];
    for k in 0..JET {
        let mut acc = a[k];
        for i in 1..=k {
            acc -= b[i] * c[k - i];
        }
        c[k] = acc / b[0];
    }
    c
}

fn jet_sqrt(a: &Jet) -> Jet {
    let mut s = [0.0; JET];
    s[0] = a[0].sqrt();
    for k in 1..JET {
        let mut acc = a[k];
        for i in 1..k {
            acc -= s[i] * s[k - i];
        }
        s[k] = acc / (2.0 * s[0]);
    }
    s
}

fn jet_deriv(a: &Jet) -> Jet {
    let mut d = [0.0; JET];
    for k in 0..JET - 1 {
        d[k] = (k + 1) as f64 * a[k + 1];
    }
    d
}

/// Taylor coefficients of `Π²` around `q`.
fn momentum_sq_jet(spec: &PotentialSpec, q: f64) -> Jet {
    let coeffs = spec.momentum_sq_coeffs();
    let mut out = [0.0; JET];
    for (p, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let mut binom = 1.0;
        for (k, slot) in out.iter_mut().enumerate().take(p.min(JET - 1) + 1) {
            if k > 0 {
                binom *= (p - k + 1) as f64 / k as f64;
            }
            *slot += c * binom * q.powi((p - k) as i32);
        }
    }
    out
}

/// Terms `w_0 = -Π, w_1 = -Π'/(2Π), w_{n+1} = (w_n' + Σ_{i+j=n+1} w_i w_j)/(2Π)`
/// of the large-q expansion of the log-derivative of the recessive solution.
pub fn wkb_terms(spec: &PotentialSpec, q: f64) -> [f64; WKB_MAX + 1] {
    let pi = jet_sqrt(&momentum_sq_jet(spec, q));
    let two_pi = pi.map(|x| 2.0 * x);
    let mut w: Vec<Jet> = vec![pi.map(|x| -x)];
    w.push(jet_div(&jet_deriv(&pi).map(|x| -x), &two_pi));
    for n in 1..WKB_MAX {
        let mut num = jet_deriv(&w[n]);
        for i in 1..=n {
            let prod = jet_mul(&w[i], &w[n + 1 - i]);
            for k in 0..JET {
                num[k] += prod[k];
            }
        }
        w.push(jet_div(&num, &two_pi));
    }
    let mut out = [0.0; WKB_MAX + 1];
    for (o, j) in out.iter_mut().zip(&w) {
        *o = j[0];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingInfo {
    pub q_max: f64,
    pub wkb_order: usize,
    pub wkb_residual: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    pub rtol: f64,
    pub wkb_tol: f64,
    pub q_max: Option<f64>,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            rtol: 1e-11,
            wkb_tol: 1e-11,
            q_max: None,
        }
    }
}

/// Best truncation order of the WKB series at `q` and its residual estimate.
fn wkb_truncation(spec: &PotentialSpec, q: f64) -> (usize, f64) {
    let w = wkb_terms(spec, q);
    let mut best = 2;
    for n in 3..=WKB_MAX {
        if w[n].abs() < w[best].abs() {
            best = n;
        }
    }
    (best, w[best].abs() * q.max(1.0))
}

fn choose_q_max(spec: &PotentialSpec, wkb_tol: f64) -> Result<f64> {
    let positive_from = if spec.lambda < 0.0 {
        turning_point(spec, -spec.lambda)
    } else {
        0.0
    };
    let mut q = spec.radius_for_expansion(0.3).max(1.5 * positive_from).max(2.0);
    for _ in 0..80 {
        let (_, res) = wkb_truncation(spec, q);
        if res < wkb_tol {
            return Ok(q);
        }
        q *= 1.15;
    }
    Err(Error::precondition(
        format!("WKB series does not reach {wkb_tol:e} up to q={q}"),
        None,
    ))
}

/// Parity determinants from the recessive solution `Ψ` normalized at large q by
/// `Π^{-1/2} exp(∫_q^∞ Π)`: `D⁻ = Ψ(0)`, `D⁺ = -Ψ'(0)`.
pub fn shooting_det(spec: &PotentialSpec) -> Result<(DeterminantValue, ShootingInfo)> {
    shooting_det_with(spec, ShootingOptions::default())
}

pub fn shooting_det_with(spec: &PotentialSpec, opts: ShootingOptions) -> Result<(DeterminantValue, ShootingInfo)> {
    let (ell, c, d, info) = shoot(spec, opts)?;
    let scale = ell.exp();
    Ok((
        DeterminantValue::from_parts(-d * scale, c * scale, DetMethod::Shooting),
        info,
    ))
}

/// Integrates the canonical solution from `q_max` to 0; returns `(ℓ, c, d)`
/// with `ψ(0) = e^ℓ c`, `ψ'(0) = e^ℓ d`.
fn shoot(spec: &PotentialSpec, opts: ShootingOptions) -> Result<(f64, f64, f64, ShootingInfo)> {
    let q_max = match opts.q_max {
        Some(q) => q,
        None => choose_q_max(spec, opts.wkb_tol)?,
    };
    let p = |q: f64| spec.momentum_sq(q);
    if p(q_max) <= 0.0 {
        return Err(Error::precondition(
            format!("Π² ≤ 0 at the start point q={q_max}"),
            None,
        ));
    }
    let (order, residual) = wkb_truncation(spec, q_max);
    if residual > 1e3 * opts.wkb_tol.max(1e-14) {
        return Err(Error::precondition(
            format!("WKB residual {residual:.2e} too large at q={q_max}"),
            choose_q_max(spec, opts.wkb_tol).ok(),
        ));
    }
    let w = wkb_terms(spec, q_max);
    let w_start: f64 = w[..=order].iter().sum();
    let higher = integrate_to_infinity(
        |x| wkb_terms(spec, x)[2..=order].iter().sum::<f64>(),
        q_max,
        QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 1e-12,
            max_intervals: 2000,
        },
    );
    let (tail, _) = tail_to_tolerance(spec, q_max, 1e-13)?;
    // reference R ≈ Π keeps the accumulated ODE variable of order one
    let shift = (-spec.lambda).max(0.0) + 1.0;
    let reference = |q: f64| (p(q) + shift).sqrt();
    let ref_integral = integrate(
        reference,
        0.0,
        q_max,
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-15,
            max_intervals: 4000,
        },
    );
    let norm = (1.0 + w_start * w_start).sqrt();
    let (c0, d0) = (1.0 / norm, w_start / norm);
    let log_psi_start = tail.value - 0.25 * p(q_max).ln() - higher.value;
    let res = dopri5(
        |q, y: &[f64; 3]| {
            let pq = p(q);
            let mu = y[0] * y[1] * (1.0 + pq);
            [y[1] - mu * y[0], pq * y[0] - mu * y[1], mu + reference(q)]
        },
        q_max,
        [c0, d0, 0.0],
        0.0,
        OdeOptions {
            rtol: opts.rtol,
            atol: 1e-14,
            max_steps: 5_000_000,
            initial_step: Some(1e-3),
        },
    )?;
    let [c, d, r] = res.y;
    // ℓ(0) = ℓ(q_max) - ∫_0^{q_max} μ, with ∫ μ = ∫ (μ + R) - ∫ R
    let ell = (log_psi_start - c0.ln()) + r + ref_integral.value;
    Ok((
        ell,
        c,
        d,
        ShootingInfo {
            q_max,
            wkb_order: order,
            wkb_residual: residual,
            steps: res.steps,
        },
    ))
}

/// `log|D⁺|`, `log|D⁻|` from shooting, without overflow.
pub fn shooting_log_parts(spec: &PotentialSpec) -> Result<(SignedLog, SignedLog)> {
    let (ell, c, d, _) = shoot(spec, ShootingOptions::default())?;
    Ok((
        SignedLog {
            log_abs: ell + d.abs().ln(),
            sign: -d.signum(),
        },
        SignedLog {
            log_abs: ell + c.abs().ln(),
            sign: c.signum(),
        },
    ))
}

/// `log|D|` of the full determinant from shooting, without overflow.
pub fn shooting_log_full(spec: &PotentialSpec) -> Result<SignedLog> {
    let (even, odd) = shooting_log_parts(spec)?;
    Ok(SignedLog {
        log_abs: even.log_abs + odd.log_abs,
        sign: even.sign * odd.sign,
    })
}

/// Where the determinants come from in [`zeta_from_det`].
#[derive(Debug, Clone)]
pub enum DetRoute<'a> {
    /// `-d²/dq² + v q²`.
    Harmonic {
        v: f64,
    },
    Product(&'a SpectralData),
    Shooting(PotentialSpec),
}

fn log_det_minus(route: &DetRoute, e: f64) -> Result<f64> {
    match route {
        DetRoute::Harmonic { v } => {
            let x = -e / v.sqrt();
            let lg = log_gamma(0.5 * (1.0 + x))?;
            if lg.sign < 0.0 {
                return Err(Error::domain(format!("E={e} above the ground level")));
            }
            Ok(-x / 4.0 * v.ln() - x / 2.0 * LN_2 + 0.5 * (2.0 * PI).ln() - lg.ln_abs)
        }
        DetRoute::Product(data) => {
            let (full, _) = det_ratio(data, -e)?;
            if full.sign <= 0.0 {
                return Err(Error::domain(format!("E={e} above the ground level")));
            }
            Ok(full.log_abs)
        }
        DetRoute::Shooting(spec) => {
            let full = shooting_log_full(&spec.with_lambda(spec.lambda - e))?;
            if full.sign <= 0.0 {
                return Err(Error::domain(format!("E={e} above the ground level")));
            }
            Ok(full.log_abs)
        }
    }
}

const FD_STENCIL_1: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];
const FD_STENCIL_2: [(f64, f64); 5] = [
    (-2.0, -1.0 / 12.0),
    (-1.0, 16.0 / 12.0),
    (0.0, -30.0 / 12.0),
    (1.0, 16.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

/// `d^s/dE^s` of a function by fourth-order central differences with one
/// Richardson step; returns `(value, error estimate)`.
pub fn fd_derivative<F: Fn(f64) -> Result<f64>>(f: F, e: f64, order: u32, h: f64) -> Result<(f64, f64)> {
    let stencil: &[(f64, f64)] = match order {
        1 => &FD_STENCIL_1,
        2 => &FD_STENCIL_2,
        _ => return Err(Error::Unsupported(format!("derivative order {order}"))),
    };
    let at = |h: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (k, w) in stencil {
            acc += w * f(e + k * h)?;
        }
        Ok(acc / h.powi(order as i32))
    };
    let coarse = at(h)?;
    let fine = at(0.5 * h)?;
    let value = (16.0 * fine - coarse) / 15.0;
    Ok((value, (value - fine).abs()))
}

/// `-(1/(s-1)!) ∂^s_E log det(H - E)`, by finite differences of the chosen
/// determinant route. For the harmonic route at `s = 1` the closed form
/// `-½[ψ(½(1 - E/√v))/√v + …]` is used.
pub fn zeta_from_det(route: &DetRoute, s: u32, e: f64) -> Result<ZetaValue> {
    if s == 0 {
        return Err(Error::domain("zeta_from_det needs s ≥ 1"));
    }
    if let (DetRoute::Harmonic { v }, 1) = (route, s) {
        let x = -e / v.sqrt();
        // d/dE of -log det at λ = -E
        let value = -(0.25 * v.ln() + 0.5 * LN_2 + 0.5 * digamma(0.5 * (1.0 + x))?) / v.sqrt();
        return Ok(ZetaValue {
            s: 1.0,
            e,
            value,
            tail_fraction: 0.0,
            err_est: 1e-15 * value.abs(),
        });
    }
    let h = match route {
        DetRoute::Harmonic { v } => 0.05 * v.sqrt(),
        DetRoute::Product(d) => 0.05 * (d.eigenvalues[0] - e).abs(),
        DetRoute::Shooting(_) => 0.05,
    };
    let (der, err) = fd_derivative(|x| log_det_minus(route, x), e, s, h)?;
    let fact: f64 = (1..s).map(|k| k as f64).product();
    let value = -der / fact;
    if !(err <= 1e-4 * value.abs().max(1e-3)) {
        return Err(Error::Accuracy {
            message: format!("finite-difference derivative unstable (err {err:.2e})"),
            best_estimate: value,
            err_est: err,
        });
    }
    // ∂^s log det(H-E) = -(s-1)! Σ (λ_k - E)^{-s}
    Ok(ZetaValue {
        s: s as f64,
        e,
        value,
        tail_fraction: 0.0,
        err_est: err / fact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{CATALAN, EULER_GAMMA};

    fn q4() -> PotentialSpec {
        PotentialSpec::trinomial(4, 0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn harmonic_zeta_constants() {
        let h = SpectralData::harmonic(2000);
        assert!((zeta_full(&h, 2.0, 0.0).unwrap().value - PI * PI / 8.0).abs() < 1e-8);
        assert!((zeta_skew(&h, 1.0, 0.0).unwrap().value - PI / 4.0).abs() < 1e-10);
        assert!((zeta_skew(&h, 2.0, 0.0).unwrap().value - CATALAN).abs() < 1e-10);
        assert!(matches!(zeta_full(&h, 1.0, 0.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn skew_matches_brute_force() {
        let data = SpectralData::compute(&q4(), 256, 1e-10).unwrap();
        let z = zeta_skew(&data, 2.0, 0.0).unwrap();
        // oracle: the same levels summed directly, then extended by the
        // Bohr–Sommerfeld levels up to 10⁴ terms
        let spec = q4();
        let mut direct: f64 = data
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| if k % 2 == 0 { l.powi(-2) } else { -l.powi(-2) })
            .sum();
        for k in 256..10_000 {
            let e = crate::semiclassical::energy_for_count(&spec, k as f64).unwrap();
            direct += if k % 2 == 0 { e.powi(-2) } else { -e.powi(-2) };
        }
        assert!((z.value - direct).abs() < 1e-8, "{} vs {direct}", z.value);
    }

    #[test]
    fn parity_zetas_reproduce_restricted_sums() {
        let h = SpectralData::harmonic(3000);
        let (zp, zm) = parity_zetas(&zeta_full(&h, 2.0, 0.0).unwrap(), &zeta_skew(&h, 2.0, 0.0).unwrap());
        // Σ (4k+1)^{-2} and Σ (4k+3)^{-2}
        let even: f64 = (0..2_000_000)
            .rev()
            .map(|k| 1.0 / ((4 * k + 1) as f64).powi(2))
            .sum::<f64>()
            + 1.0 / (16.0 * 2e6);
        let odd: f64 = (0..2_000_000)
            .rev()
            .map(|k| 1.0 / ((4 * k + 3) as f64).powi(2))
            .sum::<f64>()
            + 1.0 / (16.0 * 2e6);
        assert!((zp - even).abs() < 1e-8 && (zm - odd).abs() < 1e-8);
    }

    #[test]
    fn harmonic_det_values() {
        let d = harmonic_det(1.0, 0.0).unwrap();
        assert!((d.full.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let d = harmonic_det(1.0, 1.0).unwrap();
        assert!((d.full.unwrap() - PI.sqrt()).abs() < 1e-12);
        assert_eq!(harmonic_det(1.0, -3.0).unwrap().full.unwrap(), 0.0);
        assert_eq!(harmonic_det(4.0, -6.0).unwrap().full.unwrap(), 0.0);
        for (v, l) in [(2.0, 0.3), (0.5, 1.7), (9.0, -1.0)] {
            let d = harmonic_det(v, l).unwrap();
            assert!((d.full.unwrap() - harmonic_det_full(v, l)).abs() < 1e-12 * d.full.unwrap().abs().max(1.0));
            assert!((d.full.unwrap() - d.even.unwrap() * d.odd.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn shooting_reproduces_harmonic() {
        for l in [0.0, 0.5, 1.0] {
            let (d, _) = shooting_det(&PotentialSpec::uncoupled(2, 1.0, l).unwrap()).unwrap();
            let exact = harmonic_det(1.0, l).unwrap();
            assert!((d.full.unwrap() - exact.full.unwrap()).abs() < 1e-6, "λ={l}");
            assert!((d.even.unwrap() - exact.even.unwrap()).abs() < 1e-6);
            assert!((d.odd.unwrap() - exact.odd.unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn shooting_parts_are_consistent() {
        let (d, _) = shooting_det(&PotentialSpec::trinomial(4, 2, 1.0, 0.7).unwrap()).unwrap();
        let (e, o) = (d.even.unwrap(), d.odd.unwrap());
        assert!((d.full.unwrap() - e * o).abs() < 1e-10 * (e * o).abs());
        assert!((d.skew.unwrap() - e / o).abs() < 1e-10 * (e / o).abs());
        let log = shooting_log_full(&PotentialSpec::trinomial(4, 2, 1.0, 0.7).unwrap()).unwrap();
        assert!((log.value() - d.full.unwrap()).abs() < 1e-12 * d.full.unwrap().abs());
        // far beyond the range of f64 once exponentiated
        let weak = PotentialSpec::coupled_g(2, 4, 1e-4).unwrap();
        let log = shooting_log_full(&weak).unwrap();
        assert!(log.sign > 0.0 && (log.log_abs * 1e-4 + 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn odd_determinant_vanishes_on_odd_levels() {
        let spec = q4();
        let levels = SpectralData::compute(&spec, 6, 1e-11).unwrap();
        for (k, target) in levels.eigenvalues.iter().enumerate() {
            let odd = k % 2 == 1;
            let part = |lambda: f64| {
                let (d, _) = shooting_det(&spec.with_lambda(lambda)).unwrap();
                if odd {
                    d.odd.unwrap()
                } else {
                    d.even.unwrap()
                }
            };
            let (mut a, mut b) = (-target - 0.1, -target + 0.1);
            let fa = part(a);
            assert!(fa * part(b) < 0.0);
            for _ in 0..40 {
                let m = 0.5 * (a + b);
                if part(m) * fa > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            assert!((0.5 * (a + b) + target).abs() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn product_and_shooting_ratios_agree() {
        for spec in [
            q4(),
            PotentialSpec::trinomial(6, 0, 0.0, 0.0).unwrap(),
            PotentialSpec::trinomial(4, 2, 1.0, 0.0).unwrap(),
        ] {
            let data = SpectralData::compute(&spec, 256, 1e-10).unwrap();
            let (d0, _) = shooting_det(&spec).unwrap();
            for l in [0.5, 1.0, 2.0] {
                let (full, skew) = det_ratio(&data, l).unwrap();
                let (dl, _) = shooting_det(&spec.with_lambda(l)).unwrap();
                let shoot = dl.full.unwrap() / d0.full.unwrap();
                assert!(
                    (full.value() - shoot).abs() < 1e-5 * shoot,
                    "N={} λ={l}: {} vs {shoot}",
                    spec.n,
                    full.value()
                );
                let shoot_skew = dl.skew.unwrap() / d0.skew.unwrap();
                assert!((skew.value() - shoot_skew).abs() < 1e-5 * shoot_skew);
            }
            let (one, _) = det_ratio(&data, 0.0).unwrap();
            assert_eq!(one.value(), 1.0);
            let (zero, _) = det_ratio(&data, -data.eigenvalues[3]).unwrap();
            assert_eq!(zero.value(), 0.0);
        }
    }

    #[test]
    fn dilation_identities() {
        // harmonic closed form equals the dilated unit-frequency form
        for (v, l) in [(2.0f64, 0.4), (7.0, 3.0)] {
            let r = v.sqrt();
            let base = harmonic_det(1.0, l / r).unwrap();
            let z0 = dilation_exponent(&PotentialSpec::uncoupled(2, 1.0, l / r).unwrap()).unwrap();
            let d = dilate_det(&base, r, z0);
            let direct = harmonic_det_full(v, l);
            assert!((d.full.unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0));
            let (rr, _, z) = uncoupled_dilation(2, v, l).unwrap();
            assert!((rr.powf(z) - v.powf(-l / v.sqrt() / 4.0)).abs() < 1e-14);
            // skew prefactor v^{1/(M+2)}
            assert!((d.skew.unwrap() / base.skew.unwrap() - v.powf(0.25)).abs() < 1e-12);
        }
        // quartic uncoupled problems are normal: exponent zero
        let (_, _, z) = uncoupled_dilation(4, 3.0, 1.0).unwrap();
        assert_eq!(z, 0.0);
        let (r, scaled, _) = uncoupled_dilation(4, 8.0, 1.0).unwrap();
        let (lhs, _) = shooting_det(&PotentialSpec::uncoupled(4, 8.0, 1.0).unwrap()).unwrap();
        let (rhs, _) = shooting_det(&PotentialSpec::uncoupled(4, 1.0, scaled).unwrap()).unwrap();
        assert!((lhs.full.unwrap() - rhs.full.unwrap()).abs() < 1e-6);
        assert!((lhs.skew.unwrap() - r.sqrt() * rhs.skew.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn zeta_from_determinants() {
        let z = zeta_from_det(&DetRoute::Harmonic { v: 1.0 }, 1, 0.0).unwrap();
        // -½[ψ(1/2) + log 2] = ½(γ + log 2)
        assert!((z.value - 0.5 * (EULER_GAMMA + LN_2)).abs() < 1e-14);
        let z2 = zeta_from_det(&DetRoute::Harmonic { v: 1.0 }, 2, 0.0).unwrap();
        assert!((z2.value - PI * PI / 8.0).abs() < 1e-6);
        let data = SpectralData::compute(&q4(), 256, 1e-10).unwrap();
        let full = zeta_full(&data, 2.0, 0.0).unwrap();
        let via = zeta_from_det(&DetRoute::Product(&data), 2, 0.0).unwrap();
        assert!((full.value - via.value).abs() < 1e-5, "{} vs {}", full.value, via.value);
    }
}
