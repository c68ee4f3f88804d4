use crate::{Error, Result};

/// Newton/bisection budget for the scalar mirror equation.
const MAX_ITERS: usize = 200;
const ROOT_TOL: f64 = 1e-12;

/// `q = p / (p - 1)`.
#[inline]
pub fn dual_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

#[inline]
pub(crate) fn norm_p(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        let s: f64 = x.iter().map(|v| v.abs().powf(p)).sum();
        if s == 0.0 {
            0.0
        } else {
            s.powf(1.0 / p)
        }
    }
}

#[inline]
fn pow_p(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum()
    }
}

/// `(sum |x_n|^p)^(1/p)`, `p >= 1` (`p = inf` gives the max norm).
pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::contract(format!("lp_norm needs p >= 1, got {p}")));
    }
    Ok(norm_p(x, p))
}

/// Minimize `<l, u>` over `||u||_p <= r`. Returns `(u, -r ||l||_q)`; `l = 0` gives `u = 0`.
pub fn linear_min_over_ball(l: &[f64], p: f64, r: f64) -> (Vec<f64>, f64) {
    let q = dual_exponent(p);
    let nq = norm_p(l, q);
    if nq == 0.0 {
        return (vec![0.0; l.len()], 0.0);
    }
    let u = l
        .iter()
        .map(|&v| {
            if q == 2.0 {
                -r * v / nq
            } else {
                -r * v.signum() * (v.abs() / nq).powf(q - 1.0)
            }
        })
        .collect();
    (u, -r * nq)
}

/// Barrier `R(x) = -ln(1 - ||x||_p^p)`; `+inf` outside the open ball.
pub fn barrier_lp(x: &[f64], p: f64) -> f64 {
    let n = pow_p(x, p);
    if n >= 1.0 {
        f64::INFINITY
    } else {
        -(1.0 - n).ln()
    }
}

/// `grad R(x) = p sign(x) |x|^(p-1) / (1 - ||x||_p^p)`.
pub fn grad_r_lp(x: &[f64], p: f64) -> Result<Vec<f64>> {
    let n = pow_p(x, p);
    if !(n < 1.0) {
        return Err(Error::Domain(format!(
            "barrier gradient needs ||x||_p < 1, got ||x||_p^p = {n}"
        )));
    }
    let scale = p / (1.0 - n);
    Ok(x.iter()
        .map(|&v| {
            if p == 2.0 {
                scale * v
            } else {
                scale * v.signum() * v.abs().powf(p - 1.0)
            }
        })
        .collect())
}

/// Root of `s^q a + s - 1 = 0` on `(0, 1]`.
///
/// The left side is strictly increasing, `-1` at zero and `a >= 0` at one, so the root is
/// unique. Safeguarded Newton: a Newton step that leaves the current bracket is replaced
/// by bisection.
pub fn solve_mirror_scalar(a: f64, q: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(1.0);
    }
    if q == 2.0 {
        return Ok(2.0 / (1.0 + (1.0 + 4.0 * a).sqrt()));
    }
    let f = |s: f64| a * s.powf(q) + s - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // a s^q <= a s for s in (0,1], so 1/(1+a) is a lower bound on the root.
    let mut s = 1.0 / (1.0 + a);
    for _ in 0..MAX_ITERS {
        let fs = f(s);
        if fs.abs() <= ROOT_TOL {
            return Ok(s);
        }
        if fs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let df = q * a * s.powf(q - 1.0) + 1.0;
        let mut next = s - fs / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        s = next;
    }
    Err(Error::Numerical {
        what: "mirror scalar equation",
        residual: f(s).abs(),
    })
}

/// Inverse of [`grad_r_lp`]: the unique `x` in the open ball with `grad R(x) = g`.
pub fn inv_grad_r_lp(g: &[f64], p: f64) -> Result<Vec<f64>> {
    let q = dual_exponent(p);
    let a: f64 = if p == 2.0 {
        g.iter().map(|v| (v / 2.0) * (v / 2.0)).sum()
    } else {
        g.iter().map(|v| (v.abs() / p).powf(q)).sum()
    };
    if !a.is_finite() {
        return Err(Error::Domain("non-finite dual point".into()));
    }
    let s = solve_mirror_scalar(a, q)?;
    Ok(g.iter()
        .map(|&v| {
            if p == 2.0 {
                s * v / 2.0
            } else {
                v.signum() * (s * v.abs() / p).powf(1.0 / (p - 1.0))
            }
        })
        .collect())
}

/// `D_R(a, w) = R(a) - R(w) - <grad R(w), a - w>`.
pub fn bregman_divergence_lp(a: &[f64], w: &[f64], p: f64) -> Result<f64> {
    let gw = grad_r_lp(w, p)?;
    let lin: f64 = gw.iter().zip(a.iter().zip(w)).map(|(g, (x, y))| g * (x - y)).sum();
    Ok(barrier_lp(a, p) - barrier_lp(w, p) - lin)
}

/// Bregman projection of `w` (inside the open unit ball) onto `{||a||_p <= r}`.
///
/// The KKT conditions force `sign(a)|a|^(p-1)` to be parallel to `grad R(w)`, so the
/// projection is `sign(g)|g|^(1/(p-1))` rescaled onto the sphere of radius `r`.
pub fn bregman_project_lp(w: &[f64], p: f64, r: f64) -> Result<Vec<f64>> {
    let nw = norm_p(w, p);
    if nw <= r {
        return Ok(w.to_vec());
    }
    let g = grad_r_lp(w, p)?;
    let mut a: Vec<f64> = g
        .iter()
        .map(|&v| {
            if p == 2.0 {
                v
            } else {
                v.signum() * v.abs().powf(1.0 / (p - 1.0))
            }
        })
        .collect();
    let na = norm_p(&a, p);
    for v in &mut a {
        *v *= r / na;
    }
    Ok(a)
}

/// KKT residual of a candidate projection `a` of `w` onto the radius-`r` ball.
///
/// Stationarity asks for `grad R(w) - grad R(a) = nu * grad(||a||_p^p)` with `nu >= 0`
/// (`nu = 0` in the interior). Returns the worst of the stationarity mismatch (relative
/// to `||grad R(w)||_inf`), the dual-feasibility violation and the primal slack error.
pub fn kkt_residual_lp(a: &[f64], w: &[f64], p: f64, r: f64) -> Result<f64> {
    let gw = grad_r_lp(w, p)?;
    let ga = grad_r_lp(a, p)?;
    let v: Vec<f64> = gw.iter().zip(&ga).map(|(x, y)| x - y).collect();
    let na = norm_p(a, p);
    let scale = gw.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let primal = (na - r).max(0.0);
    if na < r * (1.0 - 1e-12) {
        // interior: nu must be zero
        let stat = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale;
        return Ok(stat.max(primal));
    }
    let h: Vec<f64> = a
        .iter()
        .map(|&x| p * x.signum() * x.abs().powf(p - 1.0))
        .collect();
    let hh: f64 = h.iter().map(|x| x * x).sum();
    let nu = if hh > 0.0 {
        v.iter().zip(&h).map(|(x, y)| x * y).sum::<f64>() / hh
    } else {
        0.0
    };
    let stat = v
        .iter()
        .zip(&h)
        .fold(0.0f64, |m, (x, y)| m.max((x - nu * y).abs()))
        / scale;
    let slack = (na - r).abs();
    Ok(stat.max((-nu).max(0.0)).max(slack))
}

/// One OMD step under `R` followed by projection onto the radius-`r` ball.
pub fn omd_step_lp(a: &[f64], loss: &[f64], eta: f64, p: f64, r: f64) -> Result<Vec<f64>> {
    if loss.iter().all(|&v| v == 0.0) {
        return Ok(a.to_vec());
    }
    let dual = grad_r_lp(a, p)?;
    Ok(omd_step_lp_dual(&dual, loss, eta, p, r)?.0)
}

/// OMD step from a cached dual point `grad R(a)`; returns the new primal and dual points.
pub(crate) fn omd_step_lp_dual(
    dual: &[f64],
    loss: &[f64],
    eta: f64,
    p: f64,
    r: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g: Vec<f64> = dual.iter().zip(loss).map(|(d, l)| d - eta * l).collect();
    let w = inv_grad_r_lp(&g, p)?;
    if norm_p(&w, p) <= r {
        return Ok((w, g));
    }
    let a = bregman_project_lp(&w, p, r)?;
    let ga = grad_r_lp(&a, p)?;
    Ok((a, ga))
}
