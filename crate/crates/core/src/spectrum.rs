//! Parity-split eigenvalues of `-d²/dq² + V(q)` for even confining polynomials.
//!
//! Each parity is a half-line problem on `[0, L]` (Neumann or Dirichlet at 0,
//! Dirichlet at `L`), discretized by central differences, solved by
//! Sturm-sequence bisection and Richardson-extrapolated over `h, h/2, h/4`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::semiclassical::{energy_for_count, turning_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_index(k: usize) -> Parity {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub k: usize,
    pub parity: Parity,
    pub value: f64,
    pub err_est: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub box_l: f64,
    pub mesh_h: f64,
    pub extrapolation_order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<Eigenvalue>,
    pub solver_params: SolverParams,
}

impl SpectrumResult {
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.value).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub max_count: usize,
    /// Decay budget `∫ (V - E)^{1/2}` between the top turning point and `L`.
    pub decay_budget: f64,
    pub max_points: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            max_count: 512,
            decay_budget: 40.0,
            max_points: 1 << 18,
        }
    }
}

/// Symmetric tridiagonal matrix: diagonal `a`, off-diagonal squares `b2`.
struct Tridiag {
    a: Vec<f64>,
    b2: Vec<f64>,
}

impl Tridiag {
    fn half_line(spec: &PotentialSpec, parity: Parity, l: f64, n: usize) -> Tridiag {
        let h = l / n as f64;
        let ih2 = 1.0 / (h * h);
        let first = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        let a: Vec<f64> = (first..n).map(|i| 2.0 * ih2 + spec.potential(i as f64 * h)).collect();
        let mut b2 = vec![ih2 * ih2; a.len().saturating_sub(1)];
        if parity == Parity::Even && !b2.is_empty() {
            // ghost point ψ₋₁ = ψ₁, symmetrized by scaling ψ₀ by √2
            b2[0] *= 2.0;
        }
        Tridiag { a, b2 }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.a.len() {
            let off = if i == 0 { 0.0 } else { self.b2[i - 1] / d };
            d = self.a[i] - x - off;
            if d == 0.0 {
                d = -f64::EPSILON * (self.a[i].abs() + x.abs()).max(1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn lower_bound(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for i in 0..self.a.len() {
            let mut r = 0.0;
            if i > 0 {
                r += self.b2[i - 1].sqrt();
            }
            if i + 1 < self.a.len() {
                r += self.b2[i].sqrt();
            }
            lo = lo.min(self.a[i] - r);
        }
        lo
    }

    /// The `j`-th eigenvalue (0-based) by bisection inside `[lo, hi]`.
    fn eigenvalue(&self, j: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Sturm count below `x` together with the Newton correction `p(x)/p'(x)`
    /// of the characteristic polynomial, from the same pivot recurrence.
    fn sweep(&self, x: f64) -> (usize, f64) {
        let mut count = 0;
        let (mut d, mut dd) = (1.0, 0.0);
        let mut log_deriv = 0.0;
        for i in 0..self.a.len() {
            let (off, doff) = if i == 0 {
                (0.0, 0.0)
            } else {
                let r = self.b2[i - 1] / d;
                (r, -r * dd / d)
            };
            d = self.a[i] - x - off;
            dd = -1.0 - doff;
            if d == 0.0 {
                d = -f64::EPSILON * (self.a[i].abs() + x.abs()).max(1.0);
            }
            if d < 0.0 {
                count += 1;
            }
            log_deriv += dd / d;
        }
        (count, 1.0 / log_deriv)
    }

    /// Gershgorin bound on `‖T‖`; eigenvalues are only defined to `ε‖T‖`.
    fn norm(&self) -> f64 {
        let a = self.a.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let b = self.b2.iter().fold(0.0f64, |m, b| m.max(*b));
        a + 2.0 * b.sqrt()
    }

    /// The `j`-th eigenvalue by safeguarded Newton steps from `guess`, falling
    /// back to bisection inside `[lo, hi]`.
    fn eigenvalue_near(&self, j: usize, mut lo: f64, mut hi: f64, guess: f64, norm: f64) -> f64 {
        let floor = 8.0 * f64::EPSILON * norm;
        let mut x = guess.clamp(lo, hi);
        for _ in 0..40 {
            let (count, corr) = self.sweep(x);
            if count > j {
                hi = x;
            } else {
                lo = x;
            }
            let next = x - corr;
            if !(next > lo && next < hi) {
                x = 0.5 * (lo + hi);
                continue;
            }
            if (next - x).abs() <= floor {
                // confirm that `next` brackets level j and no other
                let delta = 4.0 * floor;
                if self.count_below(next - delta) <= j && self.count_below(next + delta) > j {
                    return next;
                }
                return self.eigenvalue(j, lo, hi);
            }
            x = next;
        }
        self.eigenvalue(j, lo, hi)
    }

    #[cfg(test)]
    fn lowest(&self, count: usize, upper: f64) -> Vec<f64> {
        let lo = self.lower_bound();
        (0..count)
            .into_par_iter()
            .map(|j| self.eigenvalue(j, lo, upper))
            .collect()
    }
}

/// Box length from the semiclassical top level: outside the turning point the
/// decay integral `∫ (V - E)^{1/2}` must exceed the budget.
fn box_length(spec: &PotentialSpec, e_top: f64, budget: f64) -> f64 {
    let a = turning_point(spec, e_top.max(1e-3));
    let step = 1e-3 * a.max(1.0);
    let mut q = a;
    let mut acc = 0.0;
    while acc < budget {
        let next = q + step;
        let mid = 0.5 * (q + next);
        acc += (spec.potential(mid) - e_top).max(0.0).sqrt() * step;
        q = next;
    }
    q
}

fn richardson(a: f64, b: f64, c: f64) -> (f64, f64) {
    let r1 = (4.0 * b - a) / 3.0;
    let r2 = (4.0 * c - b) / 3.0;
    let r = (16.0 * r2 - r1) / 15.0;
    (r, (r - r2).abs())
}

/// The lowest `count` eigenvalues of `-d²/dq² + u q^N + v q^M`, each to
/// `tol · max(1, |λ_k|)`.
pub fn eigenvalues(spec: &PotentialSpec, count: usize, tol: f64) -> Result<SpectrumResult> {
    eigenvalues_with(spec, count, tol, SpectrumOptions::default())
}

pub fn eigenvalues_with(spec: &PotentialSpec, count: usize, tol: f64, opts: SpectrumOptions) -> Result<SpectrumResult> {
    if count == 0 {
        return Err(Error::domain("eigenvalue count must be positive"));
    }
    if count > opts.max_count {
        return Err(Error::domain(format!(
            "eigenvalue count {count} exceeds the cap {}",
            opts.max_count
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let v0 = spec.potential(0.0);
    let e_top = 1.3 * energy_for_count(spec, count as f64 - 0.5)? + 2.0 + v0;
    let l = box_length(spec, e_top, opts.decay_budget);
    let counts = [(Parity::Even, count.div_ceil(2)), (Parity::Odd, count / 2)];
    let upper = |n: usize| e_top * 4.0 + 4.0 * (n as f64 / l).powi(2);
    // resolve the top wavelength with a few points to begin with
    let n0 = ((l * e_top.sqrt() * 2.0) as usize).max(256);
    let mut out = Vec::with_capacity(count);
    let mut finest = 4 * n0;
    for &(parity, c) in &counts {
        let mut best: Vec<Option<(f64, f64)>> = vec![None; c];
        let mut pending: Vec<usize> = (0..c).collect();
        let solve = |n: usize, idx: &[usize], guess: Option<&[f64]>| -> Vec<f64> {
            let t = Tridiag::half_line(spec, parity, l, n);
            let lo = t.lower_bound();
            let hi = upper(n);
            match guess {
                Some(g) => {
                    let norm = t.norm();
                    idx.par_iter()
                        .zip(g)
                        .map(|(&j, &x)| t.eigenvalue_near(j, lo, hi, x, norm))
                        .collect()
                }
                None => idx.par_iter().map(|&j| t.eigenvalue(j, lo, hi)).collect(),
            }
        };
        // mesh errors scale as h², so each halving moves a level by a quarter
        // of the previous change
        let predict = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| b + (b - a) / 4.0).collect() };
        let mut n = n0;
        let first = solve(n, &pending, None);
        let second = solve(2 * n, &pending, Some(&first));
        let third = solve(4 * n, &pending, Some(&predict(&first, &second)));
        let mut levels = [first, second, third];
        loop {
            let mut still = Vec::new();
            let mut keep = Vec::new();
            for (slot, &j) in pending.iter().enumerate() {
                let (r, err) = richardson(levels[0][slot], levels[1][slot], levels[2][slot]);
                let err = err.max(1e-15 * r.abs().max(1.0));
                let improved = best[j].map_or(true, |(_, e)| err < e);
                if improved {
                    best[j] = Some((r, err));
                }
                let rel = err / r.abs().max(1.0);
                // stop refining once converged or once roundoff makes it worse
                if rel > tol && improved {
                    still.push(j);
                    keep.push(slot);
                }
            }
            if still.is_empty() {
                break;
            }
            if 8 * n > opts.max_points {
                break;
            }
            n *= 2;
            finest = finest.max(4 * n);
            let pick = |v: &Vec<f64>| keep.iter().map(|&s| v[s]).collect::<Vec<f64>>();
            let (b, c) = (pick(&levels[1]), pick(&levels[2]));
            let next = solve(4 * n, &still, Some(&predict(&b, &c)));
            levels = [b, c, next];
            pending = still;
        }
        for (j, b) in best.iter().enumerate() {
            let (value, err_est) = b.expect("every level computed");
            out.push(Eigenvalue {
                k: 2 * j + (parity == Parity::Odd) as usize,
                parity,
                value,
                err_est,
            });
        }
    }
    out.sort_by_key(|e| e.k);
    if let Some(bad) = out.iter().find(|e| e.err_est / e.value.abs().max(1.0) > tol) {
        return Err(Error::Accuracy {
            message: format!(
                "eigenvalue k={} not resolved to {tol:e} (finest mesh {finest} points)",
                bad.k
            ),
            best_estimate: bad.value,
            err_est: bad.err_est,
        });
    }
    if out.last().map(|e| e.value).unwrap_or(0.0) > e_top {
        return Err(Error::Model(format!("eigenvalues exceed the box estimate {e_top}")));
    }
    Ok(SpectrumResult {
        eigenvalues: out,
        solver_params: SolverParams {
            box_l: l,
            mesh_h: l / finest as f64,
            extrapolation_order: 6,
        },
    })
}

/// Power law `λ_k ≈ c (2k+1)^exponent` fitted on the upper half of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub c: f64,
    pub exponent: f64,
}

pub fn eigenvalue_tail_model(spec: &PotentialSpec, result: &SpectrumResult) -> Result<TailModel> {
    let ev = &result.eigenvalues;
    if ev.len() < 32 {
        return Err(Error::Model(format!(
            "need at least 32 eigenvalues for a tail fit, have {}",
            ev.len()
        )));
    }
    let pts: Vec<(f64, f64)> = ev[ev.len() / 2..]
        .iter()
        .map(|e| (((2 * e.k + 1) as f64).ln(), e.value.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    let expected = 2.0 * spec.n as f64 / (spec.n as f64 + 2.0);
    if (slope - expected).abs() > 0.05 * expected {
        return Err(Error::Model(format!(
            "fitted growth exponent {slope:.4} is not within 5% of {expected:.4}"
        )));
    }
    if rms > 0.05 {
        return Err(Error::Model(format!("power-law fit residual {rms:.3e} too large")));
    }
    Ok(TailModel {
        c: intercept.exp(),
        exponent: slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::symanzik_map;

    #[test]
    fn harmonic_levels() {
        let r = eigenvalues(&PotentialSpec::harmonic(), 20, 1e-9).unwrap();
        for e in &r.eigenvalues {
            assert!((e.value - (2 * e.k + 1) as f64).abs() < 1e-6, "{e:?}");
            assert_eq!(e.parity, Parity::of_index(e.k));
            assert!(e.err_est > 0.0 && e.err_est.is_finite());
        }
    }

    #[test]
    fn quartic_ground_state() {
        let q4 = PotentialSpec::trinomial(4, 0, 0.0, 0.0).unwrap();
        let r = eigenvalues(&q4, 4, 1e-10).unwrap();
        assert!((r.eigenvalues[0].value - 1.060_362_090_484_18).abs() < 1e-8);
        assert!((r.eigenvalues[1].value - 3.799_673_029_801_39).abs() < 1e-8);
    }

    #[test]
    fn strictly_increasing_and_interlacing() {
        let spec = PotentialSpec::trinomial(6, 2, 1.5, 0.0).unwrap();
        let r = eigenvalues(&spec, 40, 1e-8).unwrap();
        for w in r.eigenvalues.windows(2) {
            assert!(w[0].value < w[1].value);
            assert_ne!(w[0].parity, w[1].parity);
        }
    }

    #[test]
    fn symanzik_equivalence() {
        for g in [0.5, 2.0] {
            let (v, _) = symanzik_map(2, 4, g, 0.0).unwrap();
            let direct = eigenvalues(&PotentialSpec::coupled_g(2, 4, g).unwrap(), 16, 1e-10).unwrap();
            let mapped = eigenvalues(&PotentialSpec::trinomial(4, 2, v, 0.0).unwrap(), 16, 1e-10).unwrap();
            let scale = v.powf(-0.5);
            for (a, b) in direct.eigenvalues.iter().zip(&mapped.eigenvalues) {
                assert!((a.value - scale * b.value).abs() < 1e-6, "g={g} k={}", a.k);
            }
        }
    }

    #[test]
    fn monotone_in_coupling() {
        let lo = eigenvalues(&PotentialSpec::trinomial(4, 2, 1.0, 0.0).unwrap(), 10, 1e-9).unwrap();
        let hi = eigenvalues(&PotentialSpec::trinomial(4, 2, 1.1, 0.0).unwrap(), 10, 1e-9).unwrap();
        for (a, b) in lo.eigenvalues.iter().zip(&hi.eigenvalues) {
            assert!(b.value > a.value);
        }
    }

    #[test]
    fn second_order_mesh_convergence() {
        let spec = PotentialSpec::trinomial(4, 2, 1.0, 0.0).unwrap();
        let l = 8.0;
        let lv = |n| Tridiag::half_line(&spec, Parity::Even, l, n).lowest(3, 1e6);
        let (a, b, c) = (lv(200), lv(400), lv(800));
        for j in 0..3 {
            let ratio = (a[j] - b[j]) / (b[j] - c[j]);
            assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn tail_model_exponents() {
        let q2 = eigenvalues(&PotentialSpec::harmonic(), 64, 1e-8).unwrap();
        let m = eigenvalue_tail_model(&PotentialSpec::harmonic(), &q2).unwrap();
        assert!((m.exponent - 1.0).abs() < 1e-6);
        for (n, expected) in [(4u32, 4.0 / 3.0), (6, 1.5)] {
            let spec = PotentialSpec::trinomial(n, 0, 0.0, 0.0).unwrap();
            let r = eigenvalues(&spec, 64, 1e-8).unwrap();
            let m = eigenvalue_tail_model(&spec, &r).unwrap();
            assert!((m.exponent - expected).abs() < 0.01 * expected);
        }
    }

    #[test]
    fn rejects_oversized_requests() {
        assert!(eigenvalues(&PotentialSpec::harmonic(), 513, 1e-6).is_err());
    }
}
