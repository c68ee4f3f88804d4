//! Mirror step on a floor-constrained simplex under a weighted entropy.
//!
//! Solves
//!
//! ```text
//! w' = argmin { <w', g> + sum_j k_j (w'_j ln(w'_j / w_j) - w'_j + w_j) : sum w' = 1, w' >= f }
//! ```
//!
//! The KKT system gives `w'_j = max(f_j, w_j exp((nu - g_j) / k_j))` for a scalar `nu`
//! fixed by the simplex constraint. `F(nu) = sum_j w'_j(nu) - 1` is convex and
//! increasing, and so is `ln(F(nu) + 1)`; Newton on the latter started to the right of
//! the root descends monotonically onto it. A bracket guards against rounding and
//! falls back to bisection.

use crate::{Error, Result};

const MAX_ITERS: usize = 200;
const SUM_TOL: f64 = 1e-14;

/// Floor-constrained weighted-entropy mirror step. Returns the new weights and the
/// final simplex residual `|sum w' - 1|` measured before the last exact rescale.
pub fn floored_mirror_step(
    w: &[f64],
    loss: &[f64],
    kappa: &[f64],
    floors: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = w.len();
    if loss.len() != n || kappa.len() != n || floors.len() != n {
        return Err(Error::contract("mirror step inputs differ in length"));
    }
    let floor_sum: f64 = floors.iter().sum();
    if floor_sum >= 1.0 {
        return Err(Error::config(format!(
            "floors sum to {floor_sum} >= 1, the clipped simplex is empty"
        )));
    }
    if loss.iter().all(|&g| g == 0.0) && w.iter().zip(floors).all(|(a, f)| a >= f) {
        return Ok((w.to_vec(), 0.0));
    }

    let base: Vec<f64> = (0..n).map(|j| w[j].ln() - loss[j] / kappa[j]).collect();
    let log_floor: Vec<f64> = floors.iter().map(|f| f.ln()).collect();
    // G(nu) = ln sum_j w'_j(nu): convex and increasing, root at G = 0.
    let eval = |nu: f64| -> (f64, f64) {
        let logs: Vec<f64> = (0..n)
            .map(|j| (base[j] + nu / kappa[j]).max(log_floor[j]))
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut slope = 0.0;
        for j in 0..n {
            let v = (logs[j] - top).exp();
            sum += v;
            if base[j] + nu / kappa[j] > log_floor[j] {
                slope += v / kappa[j];
            }
        }
        (top + sum.ln(), slope / sum)
    };

    let (g0, _) = eval(0.0);
    let (mut lo, mut hi) = if g0 >= 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        // at this nu one coordinate alone reaches 1
        let hi = (0..n)
            .map(|j| -kappa[j] * base[j])
            .fold(f64::INFINITY, f64::min);
        (0.0, hi)
    };

    let mut nu = hi;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let (gv, slope) = eval(nu);
        residual = gv.abs();
        if residual <= SUM_TOL {
            converged = true;
            break;
        }
        if gv > 0.0 {
            hi = nu;
        } else {
            lo = nu;
        }
        let mut next = if slope > 0.0 { nu - gv / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = if lo.is_finite() {
                0.5 * (lo + hi)
            } else {
                hi - (hi.abs() + 1.0)
            };
        }
        if lo.is_finite() && hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            nu = next;
            converged = true;
            break;
        }
        nu = next;
    }
    if !converged {
        return Err(Error::Numerical {
            what: "floored simplex mirror step",
            residual,
        });
    }

    let mut out: Vec<f64> = (0..n)
        .map(|j| {
            let free = base[j] + nu / kappa[j];
            if free > log_floor[j] {
                free.exp()
            } else {
                floors[j]
            }
        })
        .collect();
    let total: f64 = out.iter().sum();
    let final_residual = (total - 1.0).abs();
    // Rescale the free coordinates so the simplex constraint holds to rounding.
    let (free_sum, fixed_sum) = out
        .iter()
        .zip(floors)
        .fold((0.0, 0.0), |(fs, xs), (&v, &f)| {
            if v > f {
                (fs + v, xs)
            } else {
                (fs, xs + v)
            }
        });
    if free_sum > 0.0 {
        let scale = (1.0 - fixed_sum) / free_sum;
        for (v, &f) in out.iter_mut().zip(floors) {
            if *v > f {
                *v = (*v * scale).max(f);
            }
        }
    }
    Ok((out, final_residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;

    fn objective(x: &[f64], w: &[f64], g: &[f64], k: &[f64]) -> f64 {
        (0..x.len())
            .map(|j| g[j] * x[j] + k[j] * (x[j] * (x[j] / w[j]).ln() - x[j] + w[j]))
            .sum()
    }

    #[test]
    fn zero_loss_above_floors_is_identity() {
        let w = [0.2, 0.3, 0.5];
        let (out, _) = floored_mirror_step(&w, &[0.0; 3], &[1.0; 3], &[0.01; 3]).unwrap();
        assert_eq!(out, w.to_vec());
    }

    #[test]
    fn constant_shift_is_invisible_with_equal_rates() {
        let w = [0.2, 0.3, 0.5];
        let (out, _) = floored_mirror_step(&w, &[0.7; 3], &[2.0; 3], &[0.01; 3]).unwrap();
        for j in 0..3 {
            assert!((out[j] - w[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn two_coordinates_match_grid_minimization() {
        let w = [0.6, 0.4];
        let g = [1.5, -0.5];
        let k = [0.8, 0.8];
        let f = [0.05, 0.05];
        let (out, res) = floored_mirror_step(&w, &g, &k, &f).unwrap();
        assert!(res <= 1e-9);
        // closed form without floors: exponential weights with rate 1/k
        let a = w[0] * (-g[0] / k[0]).exp();
        let b = w[1] * (-g[1] / k[1]).exp();
        let expected = (a / (a + b)).max(f[0]);
        assert!((out[0] - expected).abs() < 1e-12);
        let n = 1_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let x0 = f[0] + (1.0 - f[0] - f[1]) * i as f64 / n as f64;
            let v = objective(&[x0, 1.0 - x0], &w, &g, &k);
            if v < best.0 {
                best = (v, x0);
            }
        }
        assert!((best.1 - out[0]).abs() < 1e-5);
    }

    #[test]
    fn floors_bind_under_large_losses() {
        let w = [0.5, 0.5];
        let (out, _) = floored_mirror_step(&w, &[100.0, 0.0], &[1.0, 1.0], &[0.1, 0.1]).unwrap();
        assert_eq!(out[0], 0.1);
        assert!((out[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn invariants_on_random_multiscale_instances() {
        let mut rng = RngStream::new(99);
        for _ in 0..500 {
            let n = 2 + rng.index(40);
            let kappa: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.uniform() * 8.0 - 4.0)).collect();
            let floors: Vec<f64> = (0..n).map(|_| 10f64.powf(-3.0 - 20.0 * rng.uniform()) / n as f64).collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            for v in &mut w {
                *v = (*v / s).max(1e-3 / n as f64);
            }
            let s: f64 = w.iter().sum();
            for v in &mut w {
                *v /= s;
            }
            let g: Vec<f64> = (0..n).map(|_| (rng.uniform() * 2.0 - 1.0) * 5.0).collect();
            let (out, res) = floored_mirror_step(&w, &g, &kappa, &floors).unwrap();
            assert!(res <= 1e-9, "residual {res}");
            let total: f64 = out.iter().sum();
            assert!((total - 1.0).abs() <= 1e-12);
            for j in 0..n {
                assert!(out[j] >= floors[j]);
            }
        }
    }

    // Pairwise mass exchange with golden-section line search: exact coordinate descent
    // for a separable convex objective under one equality and box constraints.
    fn pairwise_oracle(w: &[f64], g: &[f64], k: &[f64], f: &[f64]) -> Vec<f64> {
        let n = w.len();
        let mut x: Vec<f64> = f.to_vec();
        let slack = 1.0 - f.iter().sum::<f64>();
        for v in x.iter_mut() {
            *v += slack / n as f64;
        }
        let phi = |j: usize, v: f64| g[j] * v + k[j] * (v * (v / w[j]).ln() - v + w[j]);
        for _ in 0..400 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let total = x[i] + x[j];
                    let (mut a, mut b) = (f[i], total - f[j]);
                    let r = 0.5 * (5f64.sqrt() - 1.0);
                    for _ in 0..120 {
                        let c = b - r * (b - a);
                        let d = a + r * (b - a);
                        if phi(i, c) + phi(j, total - c) < phi(i, d) + phi(j, total - d) {
                            b = d;
                        } else {
                            a = c;
                        }
                    }
                    x[i] = 0.5 * (a + b);
                    x[j] = total - x[i];
                }
            }
        }
        x
    }

    #[test]
    fn matches_pairwise_oracle_on_six_coordinates() {
        let mut rng = RngStream::new(7);
        for _ in 0..20 {
            let n = 6;
            let k: Vec<f64> = (0..n).map(|_| 0.2 + 3.0 * rng.uniform()).collect();
            let f: Vec<f64> = (0..n).map(|_| 0.02 * rng.uniform()).collect();
            let mut w: Vec<f64> = (0..n).map(|j| f[j] + 0.05 + rng.uniform()).collect();
            let sw: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sw);
            let g: Vec<f64> = (0..n).map(|_| 6.0 * rng.uniform() - 3.0).collect();
            let (out, _) = floored_mirror_step(&w, &g, &k, &f).unwrap();
            let oracle = pairwise_oracle(&w, &g, &k, &f);
            for j in 0..n {
                assert!((out[j] - oracle[j]).abs() < 1e-5, "{out:?} vs {oracle:?}");
            }
            assert!(objective(&out, &w, &g, &k) <= objective(&oracle, &w, &g, &k) + 1e-12);
        }
    }

    #[test]
    fn rejects_infeasible_floors() {
        let err = floored_mirror_step(&[0.5, 0.5], &[1.0, 0.0], &[1.0; 2], &[0.6, 0.6]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
