//! Bohr–Sommerfeld counting function `n(E) = (1/π)∮ p dq - 1/2` and the
//! Euler–Maclaurin tail of spectral sums built on it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::{order_mu, PotentialSpec};
use crate::quadrature::{integrate, QuadOptions};

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 2000,
    }
}

/// Positive turning point `V(a) = E` (requires `E > 0`).
pub fn turning_point(spec: &PotentialSpec, e: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while spec.potential(hi) < e {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.potential(mid) < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(2/π)∫_0^a √(E - V) dq - 1/2`.
pub fn counting(spec: &PotentialSpec, e: f64) -> f64 {
    if e <= 0.0 {
        return -0.5;
    }
    let a = turning_point(spec, e);
    // q = a(1 - t²) removes the square-root endpoint
    let f = |t: f64| {
        let q = a * (1.0 - t * t);
        (e - spec.potential(q)).max(0.0).sqrt() * 2.0 * a * t
    };
    2.0 / PI * integrate(f, 0.0, 1.0, quad_opts()).value - 0.5
}

/// `n'(E) = (1/π)∫_0^a (E - V)^{-1/2} dq`.
pub fn density(spec: &PotentialSpec, e: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let a = turning_point(spec, e);
    let edge = 1.0 / (spec.potential_deriv(a) * a).sqrt();
    let f = |t: f64| {
        let q = a * (1.0 - t * t);
        let gap = e - spec.potential(q);
        if gap <= 0.0 || t < 1e-7 {
            2.0 * a * edge
        } else {
            2.0 * a * t / gap.sqrt()
        }
    };
    integrate(f, 0.0, 1.0, quad_opts()).value / PI
}

/// Energy with `n(E) = target` (`target > -1/2`).
pub fn energy_for_count(spec: &PotentialSpec, target: f64) -> Result<f64> {
    if target <= -0.5 {
        return Err(Error::domain(format!("count {target} is below the ground level")));
    }
    let mut hi = 1.0;
    while counting(spec, hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut e = 0.5 * hi;
    for _ in 0..100 {
        let n = counting(spec, e) - target;
        if n.abs() < 1e-13 * target.abs().max(1.0) {
            return Ok(e);
        }
        if n > 0.0 {
            hi = e;
        } else {
            lo = e;
        }
        let d = density(spec, e);
        let newton = e - n / d;
        e = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) < 1e-14 * hi {
            break;
        }
    }
    Ok(e)
}

/// Semiclassical estimate of `Σ_{k ≥ K} f(E_k)` over all levels `k` (both parities).
///
/// `f` returns `(f(E), f'(E))`; `decay` is the exponent `β > 0` with
/// `f(E) n'(E) ~ E^{-1-β}` at large `E`.
pub fn tail_sum<F>(spec: &PotentialSpec, f: F, first_index: usize, decay: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(decay > 0.0) {
        return Err(Error::Divergent(format!(
            "spectral sum tail diverges (decay exponent {decay})"
        )));
    }
    let e_s = energy_for_count(spec, first_index as f64 - 0.5)?;
    // E = E_s u^{-1/β} maps [E_s, ∞) to (0, 1] with a bounded integrand
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let e = e_s * u.powf(-1.0 / decay);
        if !e.is_finite() {
            return 0.0;
        }
        let jac = e_s / decay * u.powf(-1.0 / decay - 1.0);
        let val = f(e).0 * density(spec, e) * jac;
        if val.is_finite() {
            val
        } else {
            0.0
        }
    };
    let integral = integrate(
        g,
        0.0,
        1.0,
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 400,
        },
    )
    .value;
    let (_, fp) = f(e_s);
    Ok(integral + fp / density(spec, e_s) / 24.0)
}

/// Decay exponent of `Σ (E_k + c)^{-s}` for a potential of degree `N`.
pub fn power_sum_decay(n: u32, s: f64) -> f64 {
    s - order_mu(n)
}
