//! A single base learner with its own exploration, restarted on a fixed period.

use corral_core::base_learner::BaseState;
use corral_core::geometry::DomainSpec;
use corral_core::{Result, RngStream, RoundRecord};

/// Smallest `n` with `n^3 >= T / S`.
pub fn restart_period(horizon: usize, switches: usize) -> usize {
    let (t, s) = (horizon as u128, switches.max(1) as u128);
    let mut n: u128 = 1;
    while n * n * n * s < t {
        n += 1;
    }
    n as usize
}

/// Tuning of the standalone base for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartParams {
    pub period: usize,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    /// True when `gamma` or `beta` had to be capped at 1/2.
    pub clamped: bool,
}

impl RestartParams {
    /// One-segment tuning over a horizon of `period` rounds on the unit `l_p` ball.
    pub fn tuned(p: f64, d: usize, period: usize) -> Self {
        let (df, t) = (d as f64, period as f64);
        let c = (p - 1.0).sqrt() * 2f64.powf(-2.0 / (p - 1.0));
        let epsilon = (1.0 / (df * t)).sqrt().min(1.0 / (16.0 * df)).min(c * c / 2.0);
        let gamma = 4.0 * c * (df / t).sqrt();
        let beta = 8.0 * df * epsilon;
        Self {
            period,
            gamma: gamma.min(0.5),
            eta: c * (1.0 / (df * t)).sqrt(),
            beta: beta.min(0.5),
            clamped: gamma > 0.5 || beta > 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartBaseline {
    params: RestartParams,
    domain: DomainSpec,
    d: usize,
    base: BaseState,
    round: usize,
}

impl RestartBaseline {
    pub fn new(params: RestartParams, domain: DomainSpec, d: usize) -> Result<Self> {
        let base = BaseState::new(0, params.eta, params.gamma, domain.clone(), d)?;
        Ok(Self {
            params,
            domain,
            d,
            base,
            round: 0,
        })
    }

    pub fn params(&self) -> &RestartParams {
        &self.params
    }

    pub fn base(&self) -> &BaseState {
        &self.base
    }

    /// One round; `observe` receives `x_t` and returns `l_t . x_t`.
    pub fn play_round<F>(&mut self, observe: F, rng: &mut RngStream) -> Result<RoundRecord>
    where
        F: FnOnce(&[f64]) -> f64,
    {
        let prm = &self.params;
        if self.round.is_multiple_of(prm.period) && self.round > 0 {
            self.base = BaseState::new(self.round, prm.eta, prm.gamma, self.domain.clone(), self.d)?;
        }
        let rho = rng.bernoulli(prm.beta);
        let (proposal, xi) = self.base.propose(rng);
        let x = if rho {
            let (n, s) = rng.signed_basis(self.d);
            let mut e = vec![0.0; self.d];
            e[n] = s;
            e
        } else {
            proposal.to_vec()
        };
        let realized = observe(&x);
        let dn = 1.0 - self.base.norm();
        if !rho && !xi {
            let scale = self.d as f64 * realized / ((1.0 - prm.beta) * dn);
            let ell_hat: Vec<f64> = x.iter().map(|v| scale * v).collect();
            self.base.update(&ell_hat)?;
        }
        let mut rec = RoundRecord::new(self.round, x, realized);
        rec.rho = Some(rho);
        rec.xi = if rho { None } else { Some(xi) };
        rec.p_max = 1.0;
        rec.diagnostics.insert("denominator", dn);
        self.round += 1;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_examples() {
        assert_eq!(restart_period(1000, 8), 5);
        assert_eq!(restart_period(50, 50), 1);
        assert_eq!(restart_period(10_000, 8), 11);
        assert_eq!(restart_period(1, 1), 1);
        for t in 1..300usize {
            for s in 1..=t.min(9) {
                let n = restart_period(t, s);
                let target = t as f64 / s as f64;
                assert!((n as f64).powi(3) >= target - 1e-9);
                assert!(n == 1 || ((n - 1) as f64).powi(3) < target);
            }
        }
    }

    #[test]
    fn short_periods_are_clamped() {
        let p = RestartParams::tuned(2.0, 4, 1);
        assert!(p.clamped && p.gamma == 0.5 && p.beta <= 0.5);
        let p = RestartParams::tuned(2.0, 4, 100);
        assert!(!p.clamped);
    }

    #[test]
    fn period_one_restarts_every_round() {
        let dom = DomainSpec::lp_ball(2.0).unwrap();
        let mut b = RestartBaseline::new(RestartParams::tuned(2.0, 3, 1), dom, 3).unwrap();
        let mut rng = RngStream::new(1);
        for t in 0..50 {
            b.play_round(|x| x[0], &mut rng).unwrap();
            assert_eq!(b.base().start_round, t);
        }
    }

    #[test]
    fn tracks_a_fixed_loss() {
        let dom = DomainSpec::lp_ball(2.0).unwrap();
        let mut b = RestartBaseline::new(RestartParams::tuned(2.0, 2, 4000), dom, 2).unwrap();
        let mut rng = RngStream::new(2);
        for _ in 0..4000 {
            b.play_round(|x| x[0], &mut rng).unwrap();
            assert!(b.base().norm() <= b.base().clip_radius() + 1e-12);
        }
        assert!(b.base().iterate()[0] < -0.3);
    }
}
