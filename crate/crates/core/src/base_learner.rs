//! The per-slot base learner: a randomized decomposition of the iterate into a
//! unit-norm action and an OMD update under the barrier regularizer.

use crate::geometry::{
    clip_to_gauge_ball, grad_r_gauge, grad_r_lp, inv_grad_r_gauge, omd_step_lp_dual, DomainKind,
    DomainSpec,
};
use crate::{Error, Result, RngStream};

/// State of one base learner started at round `start_round`.
#[derive(Debug, Clone)]
pub struct BaseState {
    pub start_round: usize,
    pub eta: f64,
    pub gamma: f64,
    domain: DomainSpec,
    a: Vec<f64>,
    // grad R(a), kept in sync with `a`
    dual: Vec<f64>,
    norm: f64,
    tilde: Vec<f64>,
    xi: bool,
    basis: Option<(usize, f64)>,
}

impl BaseState {
    /// Fresh learner at the origin.
    pub fn new(start_round: usize, eta: f64, gamma: f64, domain: DomainSpec, d: usize) -> Result<Self> {
        Self::with_iterate(start_round, eta, gamma, domain, vec![0.0; d])
    }

    /// Learner with a given iterate, which must lie in the clipped domain.
    pub fn with_iterate(
        start_round: usize,
        eta: f64,
        gamma: f64,
        domain: DomainSpec,
        a: Vec<f64>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::contract(format!("gamma = {gamma} outside (0, 1)")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::contract(format!("eta = {eta} must be positive")));
        }
        if a.is_empty() {
            return Err(Error::contract("dimension must be at least 1"));
        }
        let norm = domain.norm(&a);
        if norm > 1.0 - gamma + 1e-12 {
            return Err(Error::contract(format!(
                "iterate norm {norm} exceeds clip radius {}",
                1.0 - gamma
            )));
        }
        let dual = dual_point(&domain, &a)?;
        let d = a.len();
        Ok(Self {
            start_round,
            eta,
            gamma,
            domain,
            a,
            dual,
            norm,
            tilde: vec![0.0; d],
            xi: false,
            basis: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn clip_radius(&self) -> f64 {
        1.0 - self.gamma
    }

    pub fn iterate(&self) -> &[f64] {
        &self.a
    }

    /// `||a||` in the domain's norm.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// The last proposed action `ã`.
    pub fn tilde(&self) -> &[f64] {
        &self.tilde
    }

    pub fn xi(&self) -> bool {
        self.xi
    }

    /// `(n, sign)` when the last proposal was a signed basis vector.
    pub fn basis(&self) -> Option<(usize, f64)> {
        self.basis
    }

    /// `<ã, v>` for the last proposal.
    #[inline]
    pub fn tilde_dot(&self, v: &[f64]) -> f64 {
        match self.basis {
            Some((n, s)) => s * v[n],
            None => crate::dot(&self.tilde, v),
        }
    }

    /// Draw `xi ~ Ber(||a||)` and the action `ã`.
    pub fn propose(&mut self, rng: &mut RngStream) -> (&[f64], bool) {
        let xi = self.norm > 0.0 && rng.bernoulli(self.norm);
        self.xi = xi;
        if xi {
            self.basis = None;
            for (t, v) in self.tilde.iter_mut().zip(&self.a) {
                *t = v / self.norm;
            }
        } else {
            let (n, s) = rng.signed_basis(self.a.len());
            self.basis = Some((n, s));
            self.tilde.iter_mut().for_each(|t| *t = 0.0);
            self.tilde[n] = s;
        }
        (&self.tilde, xi)
    }

    /// OMD step on the estimated loss; a zero loss leaves the state untouched.
    pub fn update(&mut self, loss: &[f64]) -> Result<()> {
        if loss.len() != self.a.len() {
            return Err(Error::contract("loss dimension mismatch"));
        }
        if loss.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        if loss.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite loss estimate"));
        }
        let r = self.clip_radius();
        match &self.domain.kind {
            DomainKind::LpBall { p } => {
                let (a, dual) = omd_step_lp_dual(&self.dual, loss, self.eta, *p, r)?;
                self.a = a;
                self.dual = dual;
            }
            DomainKind::Gauge { oracle, .. } => {
                let h: Vec<f64> = self
                    .dual
                    .iter()
                    .zip(loss)
                    .map(|(g, l)| g - self.eta * l)
                    .collect();
                let w = inv_grad_r_gauge(&h, oracle.as_ref())?;
                if oracle.gauge(&w) <= r {
                    self.a = w;
                    self.dual = h;
                } else {
                    self.a = clip_to_gauge_ball(&w, oracle.as_ref(), r);
                    self.dual = grad_r_gauge(&self.a, oracle.as_ref())?;
                }
            }
        }
        self.norm = self.domain.norm(&self.a);
        Ok(())
    }
}

fn dual_point(domain: &DomainSpec, a: &[f64]) -> Result<Vec<f64>> {
    match &domain.kind {
        DomainKind::LpBall { p } => grad_r_lp(a, *p),
        DomainKind::Gauge { oracle, .. } => grad_r_gauge(a, oracle.as_ref()),
    }
}

pub fn base_init(t0: usize, eta: f64, gamma: f64, domain: DomainSpec, d: usize) -> Result<BaseState> {
    BaseState::new(t0, eta, gamma, domain, d)
}

/// Returns `(ã, a, xi)`.
pub fn base_propose(state: &mut BaseState, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>, bool) {
    let (tilde, xi) = state.propose(rng);
    let tilde = tilde.to_vec();
    (tilde, state.iterate().to_vec(), xi)
}

pub fn base_update(state: &mut BaseState, loss: &[f64]) -> Result<()> {
    state.update(loss)
}
