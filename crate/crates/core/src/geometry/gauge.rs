use std::fmt::Debug;

use super::lp::{dual_exponent, norm_p};
use crate::{Error, Result, RngStream};

/// Gauge `||x||_X = inf{λ > 0 : x ∈ λX}` of a symmetric convex body, its polar
/// gauge, and their gradients (defined away from the origin).
pub trait GaugeOracle: Send + Sync + Debug {
    fn gauge(&self, x: &[f64]) -> f64;
    fn gauge_grad(&self, x: &[f64]) -> Vec<f64>;
    fn dual_gauge(&self, h: &[f64]) -> f64;
    fn dual_gauge_grad(&self, h: &[f64]) -> Vec<f64>;
    fn name(&self) -> String;
}

/// The `l_s` unit ball viewed as a gauge body; its polar is the `l_{s*}` ball.
#[derive(Debug, Clone, Copy)]
pub struct LpGauge {
    pub s: f64,
}

impl LpGauge {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 1.0 && s.is_finite()) {
            return Err(Error::contract(format!("gauge exponent {s} must be in (1, inf)")));
        }
        Ok(Self { s })
    }
}

fn norm_grad(x: &[f64], s: f64) -> Vec<f64> {
    let n = norm_p(x, s);
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter()
        .map(|&v| {
            if s == 2.0 {
                v / n
            } else {
                v.signum() * (v.abs() / n).powf(s - 1.0)
            }
        })
        .collect()
}

impl GaugeOracle for LpGauge {
    fn gauge(&self, x: &[f64]) -> f64 {
        norm_p(x, self.s)
    }

    fn gauge_grad(&self, x: &[f64]) -> Vec<f64> {
        norm_grad(x, self.s)
    }

    fn dual_gauge(&self, h: &[f64]) -> f64 {
        norm_p(h, dual_exponent(self.s))
    }

    fn dual_gauge_grad(&self, h: &[f64]) -> Vec<f64> {
        norm_grad(h, dual_exponent(self.s))
    }

    fn name(&self) -> String {
        format!("l{}", self.s)
    }
}

/// Spot-check `l_p(1) ⊆ X ⊆ l_q(1)`, i.e. `||x||_q <= ||x||_X <= ||x||_p`.
pub(super) fn check_sandwich(oracle: &dyn GaugeOracle, p: f64, d: usize) -> Result<()> {
    let q = dual_exponent(p);
    let mut rng = RngStream::new(0x5a4d_7769_6368);
    for k in 0..256 + 2 * d {
        let x: Vec<f64> = if k < 2 * d {
            let mut e = vec![0.0; d];
            e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            e
        } else {
            (0..d).map(|_| rng.uniform() * 2.0 - 1.0).collect()
        };
        let g = oracle.gauge(&x);
        let tol = 1e-12 * (1.0 + g);
        if g > norm_p(&x, p) + tol || norm_p(&x, q) > g + tol {
            return Err(Error::config(format!(
                "gauge {} is not sandwiched between the l_{p} and l_{q} balls",
                oracle.name()
            )));
        }
    }
    Ok(())
}

/// Barrier `R(x) = -ln(1 - ||x||_X) - ||x||_X`; `+inf` outside the open body.
pub fn barrier_gauge(x: &[f64], oracle: &dyn GaugeOracle) -> f64 {
    let g = oracle.gauge(x);
    if g >= 1.0 {
        f64::INFINITY
    } else {
        -(1.0 - g).ln() - g
    }
}

/// `grad R(x) = ||x||_X / (1 - ||x||_X) * grad ||.||_X(x)`; zero at the origin.
pub fn grad_r_gauge(x: &[f64], oracle: &dyn GaugeOracle) -> Result<Vec<f64>> {
    let g = oracle.gauge(x);
    if g == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    if !(g < 1.0) {
        return Err(Error::Domain(format!("barrier gradient needs gauge < 1, got {g}")));
    }
    let scale = g / (1.0 - g);
    Ok(oracle.gauge_grad(x).into_iter().map(|v| scale * v).collect())
}

/// `grad R*(h) = ||h||_X° / (1 + ||h||_X°) * grad ||.||_X°(h)`, the inverse mirror map.
pub fn inv_grad_r_gauge(h: &[f64], oracle: &dyn GaugeOracle) -> Result<Vec<f64>> {
    let n = oracle.dual_gauge(h);
    if !n.is_finite() {
        return Err(Error::Domain("non-finite dual point".into()));
    }
    if n == 0.0 {
        return Ok(vec![0.0; h.len()]);
    }
    let scale = n / (1.0 + n);
    Ok(oracle.dual_gauge_grad(h).into_iter().map(|v| scale * v).collect())
}

/// Radial scaling `x * min(1, r / ||x||_X)`.
pub fn clip_to_gauge_ball(x: &[f64], oracle: &dyn GaugeOracle, r: f64) -> Vec<f64> {
    let g = oracle.gauge(x);
    if g <= r {
        return x.to_vec();
    }
    let f = r / g;
    x.iter().map(|v| v * f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bregman_project_lp, DomainSpec};
    use std::sync::Arc;

    fn sample(rng: &mut RngStream, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| (rng.uniform() * 2.0 - 1.0) * scale).collect()
    }

    #[test]
    fn homogeneity_and_holder() {
        let mut rng = RngStream::new(77);
        for s in [1.3, 1.5, 2.0, 3.0] {
            let o = LpGauge::new(s).unwrap();
            for _ in 0..1000 {
                let x = sample(&mut rng, 4, 3.0);
                let h = sample(&mut rng, 4, 3.0);
                let lam = 0.01 + 10.0 * rng.uniform();
                let xs: Vec<f64> = x.iter().map(|v| v * lam).collect();
                assert!((o.gauge(&xs) - lam * o.gauge(&x)).abs() <= 1e-10 * (1.0 + lam));
                let g1 = o.dual_gauge_grad(&h);
                let h2: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
                let g2 = o.dual_gauge_grad(&h2);
                for i in 0..4 {
                    assert!((g1[i] - g2[i]).abs() <= 1e-10);
                }
                let inner: f64 = x.iter().zip(&h).map(|(a, b)| a * b).sum();
                assert!(inner <= o.gauge(&x) * o.dual_gauge(&h) + 1e-10);
                // the gradient of the gauge has unit polar gauge
                let gg = o.gauge_grad(&x);
                assert!((o.dual_gauge(&gg) - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn inverse_at_zero() {
        let o = LpGauge::new(2.0).unwrap();
        assert_eq!(inv_grad_r_gauge(&[0.0, 0.0], &o).unwrap(), vec![0.0, 0.0]);
        assert_eq!(grad_r_gauge(&[0.0, 0.0], &o).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn euclidean_gauge_matches_finite_differences() {
        let o = LpGauge::new(2.0).unwrap();
        let mut rng = RngStream::new(4);
        let h = 1e-6;
        for _ in 0..200 {
            let x = sample(&mut rng, 3, 0.5);
            let g = grad_r_gauge(&x, &o).unwrap();
            for i in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (barrier_gauge(&xp, &o) - barrier_gauge(&xm, &o)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5);
            }
            // the conjugate R*(y) = ||y|| - ln(1 + ||y||) differentiates to the inverse map
            let y = sample(&mut rng, 3, 4.0);
            let inv = inv_grad_r_gauge(&y, &o).unwrap();
            let conj = |v: &[f64]| {
                let n = o.dual_gauge(v);
                n - (1.0 + n).ln()
            };
            for i in 0..3 {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += h;
                ym[i] -= h;
                let fd = (conj(&yp) - conj(&ym)) / (2.0 * h);
                assert!((fd - inv[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn mirror_round_trip() {
        let mut rng = RngStream::new(8);
        for s in [1.4, 2.0, 2.5] {
            let o = LpGauge::new(s).unwrap();
            for _ in 0..1000 {
                let mut x = sample(&mut rng, 4, 1.0);
                let g = o.gauge(&x);
                let target = 0.999 * rng.uniform();
                for v in &mut x {
                    *v *= target / g;
                }
                if o.gauge(&x) == 0.0 {
                    continue;
                }
                let back = inv_grad_r_gauge(&grad_r_gauge(&x, &o).unwrap(), &o).unwrap();
                for i in 0..4 {
                    assert!((back[i] - x[i]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn clip_examples() {
        let o = LpGauge::new(2.0).unwrap();
        assert_eq!(clip_to_gauge_ball(&[0.1, 0.2], &o, 0.9), vec![0.1, 0.2]);
        let x = [1.2, 1.6]; // gauge 2
        let c = clip_to_gauge_ball(&x, &o, 0.5);
        assert!((c[0] - 0.3).abs() < 1e-15 && (c[1] - 0.4).abs() < 1e-15);
        let mut rng = RngStream::new(12);
        for _ in 0..1000 {
            let y = sample(&mut rng, 3, 5.0);
            assert!(o.gauge(&clip_to_gauge_ball(&y, &o, 0.7)) <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn clip_matches_lp_projection_direction() {
        let p = 1.5;
        let o = LpGauge::new(p).unwrap();
        let mut rng = RngStream::new(13);
        for _ in 0..100 {
            let mut w = sample(&mut rng, 2, 1.0);
            let n = o.gauge(&w);
            for v in &mut w {
                *v *= 0.9 / n;
            }
            let a = bregman_project_lp(&w, p, 0.6).unwrap();
            let c = clip_to_gauge_ball(&w, &o, 0.6);
            for i in 0..2 {
                assert!((a[i] - c[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sandwich_check() {
        // l_2 sits between l_1.5 and l_3
        assert!(DomainSpec::gauge(Arc::new(LpGauge::new(2.0).unwrap()), 1.0, 1.5, 3).is_ok());
        // l_4 is larger than l_2 in some directions, so it fails the p = 2 sandwich
        assert!(DomainSpec::gauge(Arc::new(LpGauge::new(4.0).unwrap()), 1.0, 2.0, 3).is_err());
    }
}
