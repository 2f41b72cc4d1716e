//! Dormand–Prince 5(4) adaptive integrator for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeResult<const D: usize> {
    pub y: [f64; D],
    pub steps: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn dopri5<const D: usize, F>(mut f: F, t0: f64, y0: [f64; D], t1: f64, opts: OdeOptions) -> Result<OdeResult<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(OdeResult {
            y: y0,
            steps: 0,
            rejected: 0,
        });
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.initial_step.unwrap_or(span * 1e-3).min(span);
    let mut k = [[0.0; D]; 7];
    k[0] = f(t, &y);
    let (mut steps, mut rejected) = (0, 0);
    while (t1 - t) * dir > 0.0 {
        if steps + rejected >= opts.max_steps {
            return Err(Error::Accuracy {
                message: format!("integrator exceeded {} steps at t={t}", opts.max_steps),
                best_estimate: f64::NAN,
                err_est: f64::INFINITY,
            });
        }
        let last = h >= (t1 - t) * dir;
        if last {
            h = (t1 - t) * dir;
        }
        let hs = h * dir;
        for i in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = A[i][j];
                if a != 0.0 {
                    for d in 0..D {
                        yi[d] += hs * a * kj[d];
                    }
                }
            }
            k[i] = f(t + C[i] * hs, &yi);
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            for d in 0..D {
                y_new[d] += hs * A[6][j] * kj[d];
            }
        }
        let mut err = 0.0f64;
        for d in 0..D {
            let e: f64 = (0..7).map(|j| E[j] * k[j][d]).sum::<f64>() * hs;
            let sc = opts.atol + opts.rtol * y[d].abs().max(y_new[d].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.2;
            rejected += 1;
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y_new;
            // first-same-as-last: k7 is f at the accepted point
            k[0] = k[6];
            steps += 1;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            rejected += 1;
        }
        if h < 1e-14 * span {
            return Err(Error::Accuracy {
                message: format!("step size underflow at t={t}"),
                best_estimate: f64::NAN,
                err_est: f64::INFINITY,
            });
        }
    }
    Ok(OdeResult { y, steps, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let r = dopri5(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, OdeOptions::default()).unwrap();
        assert!((r.y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn oscillator_backwards() {
        let r = dopri5(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            3.0,
            [3.0f64.sin(), 3.0f64.cos()],
            0.0,
            OdeOptions::default(),
        )
        .unwrap();
        assert!(r.y[0].abs() < 1e-9 && (r.y[1] - 1.0).abs() < 1e-9);
    }
}
