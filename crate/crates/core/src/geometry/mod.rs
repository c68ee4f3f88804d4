//! Norms, barrier mirror maps and projections for the `l_p` ball and gauge domains.

mod gauge;
mod lp;

use std::fmt;
use std::sync::Arc;

pub use gauge::{
    clip_to_gauge_ball, grad_r_gauge, inv_grad_r_gauge, barrier_gauge, GaugeOracle, LpGauge,
};
pub use lp::{
    barrier_lp, bregman_divergence_lp, bregman_project_lp, dual_exponent, grad_r_lp,
    inv_grad_r_lp, kkt_residual_lp, linear_min_over_ball, lp_norm, omd_step_lp,
    solve_mirror_scalar,
};
pub(crate) use lp::{norm_p, omd_step_lp_dual};

use crate::{Error, Result};

/// Which convex body the learner plays in.
#[derive(Clone)]
pub enum DomainKind {
    /// `{x : ||x||_p <= 1}` with `p` in `(1, 2]`.
    LpBall { p: f64 },
    /// A smooth, `alpha`-strongly convex symmetric body given by its gauge, sandwiched
    /// between the `l_p` and `l_q` unit balls for the stated `p`.
    Gauge {
        oracle: Arc<dyn GaugeOracle>,
        alpha: f64,
        p: f64,
    },
}

#[derive(Clone)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub radius: f64,
}

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DomainKind::LpBall { p } => write!(f, "LpBall(p={p}, r={})", self.radius),
            DomainKind::Gauge { oracle, alpha, p } => write!(
                f,
                "Gauge({}, alpha={alpha}, p={p}, r={})",
                oracle.name(),
                self.radius
            ),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::contract(format!("p = {p} outside (1, 2]")));
    }
    Ok(())
}

impl DomainSpec {
    pub fn lp_ball(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self {
            kind: DomainKind::LpBall { p },
            radius: 1.0,
        })
    }

    /// Gauge domain; the sandwich `l_p(1) ⊆ X ⊆ l_q(1)` is spot-checked on a fixed
    /// set of sample directions.
    pub fn gauge(oracle: Arc<dyn GaugeOracle>, alpha: f64, p: f64, d: usize) -> Result<Self> {
        check_p(p)?;
        if !(alpha > 0.0) {
            return Err(Error::contract(format!("alpha = {alpha} must be positive")));
        }
        gauge::check_sandwich(oracle.as_ref(), p, d)?;
        Ok(Self {
            kind: DomainKind::Gauge { oracle, alpha, p },
            radius: 1.0,
        })
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::contract(format!("radius {radius} outside (0, 1]")));
        }
        self.radius = radius;
        Ok(self)
    }

    /// The exponent `p` that sets the algorithm's parameters.
    pub fn p(&self) -> f64 {
        match self.kind {
            DomainKind::LpBall { p } => p,
            DomainKind::Gauge { p, .. } => p,
        }
    }

    /// `||x||_p` for the ball, the gauge `||x||_X` otherwise.
    pub fn norm(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::LpBall { p } => norm_p(x, *p),
            DomainKind::Gauge { oracle, .. } => oracle.gauge(x),
        }
    }

    /// Norm of the polar body: `||h||_q` or the dual gauge.
    pub fn dual_norm(&self, h: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::LpBall { p } => norm_p(h, dual_exponent(*p)),
            DomainKind::Gauge { oracle, .. } => oracle.dual_gauge(h),
        }
    }

    /// Minimizer of `<l, u>` over the domain scaled by `radius`, and the minimum value.
    pub fn linear_min(&self, l: &[f64]) -> (Vec<f64>, f64) {
        match &self.kind {
            DomainKind::LpBall { p } => linear_min_over_ball(l, *p, self.radius),
            DomainKind::Gauge { oracle, .. } => {
                let n = oracle.dual_gauge(l);
                if n == 0.0 {
                    return (vec![0.0; l.len()], 0.0);
                }
                let g = oracle.dual_gauge_grad(l);
                let u = g.iter().map(|v| -self.radius * v).collect();
                (u, -self.radius * n)
            }
        }
    }
}
