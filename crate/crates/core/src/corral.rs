//! Corralling meta learner over `T` base slots for linear bandits on an `l_p` ball or
//! a smooth, strongly convex gauge domain.
//!
//! Slot `t` starts a fresh base learner at round `t`. The meta distribution over slots
//! is updated by fixed-share exponential weights on optimistically biased loss
//! estimates. Slots that have not started yet all carry the same weight and receive the
//! same padded loss, so [`Corral`] stores them as a single scalar; the free functions in
//! this module are the literal per-slot versions.

use crate::base_learner::BaseState;
use crate::geometry::{DomainKind, DomainSpec};
use crate::linalg::{cholesky_solve, symmetric_min_eigenvalue};
use crate::{Error, Result, RngStream, RoundRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    LpBall,
    Gauge { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorralParams {
    pub gamma: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub beta: f64,
    pub lambda: f64,
    pub c: f64,
    pub p: f64,
    pub d: usize,
    pub horizon: usize,
    pub switches: usize,
    pub variant: Variant,
}

impl CorralParams {
    /// Rejects parameter sets the algorithm cannot run with.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("lambda", self.lambda),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} = {v} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::config(format!("mu = {} outside [0, 1]", self.mu)));
        }
        if self.beta > 0.5 {
            return Err(Error::config(format!(
                "beta = {} exceeds 1/2; horizon too short for d = {}, S = {}",
                self.beta, self.d, self.switches
            )));
        }
        if self.gamma >= 1.0 {
            return Err(Error::config(format!(
                "gamma = {} is at least 1; horizon too short for d = {}, S = {}",
                self.gamma, self.d, self.switches
            )));
        }
        if self.d == 0 || self.horizon == 0 {
            return Err(Error::config("d and T must be positive"));
        }
        Ok(())
    }
}

/// Tuning for horizon `T` and `S` switches.
pub fn derive_params(p: f64, d: usize, horizon: usize, switches: usize, variant: Variant) -> Result<CorralParams> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::config(format!("p = {p} outside (1, 2]")));
    }
    if d == 0 {
        return Err(Error::config("d must be at least 1"));
    }
    if switches == 0 || switches > horizon {
        return Err(Error::config(format!("need 1 <= S <= T, got S = {switches}, T = {horizon}")));
    }
    let (df, t, s) = (d as f64, horizon as f64, switches as f64);
    let params = match variant {
        Variant::LpBall => {
            let c = (p - 1.0).sqrt() * 2f64.powf(-2.0 / (p - 1.0));
            let epsilon = (s / (df * t)).sqrt().min(1.0 / (16.0 * df)).min(c * c / 2.0);
            CorralParams {
                gamma: 4.0 * c * (df * s / t).sqrt(),
                eta: c * (s / (df * t)).sqrt(),
                epsilon,
                mu: 1.0 / t,
                beta: 8.0 * df * epsilon,
                lambda: c / (df * s * t).sqrt(),
                c,
                p,
                d,
                horizon,
                switches,
                variant,
            }
        }
        Variant::Gauge { alpha } => {
            if !(alpha > 0.0) {
                return Err(Error::config(format!("alpha = {alpha} must be positive")));
            }
            let q = p / (p - 1.0);
            let c = (alpha / (10.0 * alpha + 8.0)).sqrt();
            let d_inv_p = df.powf(-1.0 / p);
            let d_two_p = df.powf(2.0 / p);
            let epsilon = (d_inv_p * (s / t).sqrt())
                .min(1.0 / (16.0 * d_two_p))
                .min(c * c / 2.0);
            CorralParams {
                gamma: 4.0 * c * df.powf(1.0 / q) * (s / t).sqrt(),
                eta: c * d_inv_p * (s / t).sqrt(),
                epsilon,
                mu: 1.0 / t,
                beta: 8.0 * d_two_p * epsilon,
                lambda: c * df.powf(-1.0 / q) / (s * t).sqrt(),
                c,
                p,
                d,
                horizon,
                switches,
                variant,
            }
        }
    };
    params.validate()?;
    Ok(params)
}

/// `p_i / sum_{j<t} p_j` over the first `t` slots.
pub fn renormalize(p: &[f64], t: usize) -> Vec<f64> {
    assert!(t >= 1 && t <= p.len());
    let total: f64 = p[..t].iter().sum();
    assert!(total > 0.0, "active slots carry no weight");
    p[..t].iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    pub x: Vec<f64>,
    pub rho: bool,
    pub chosen: Option<usize>,
    pub xi: Option<bool>,
}

/// Draws `rho`, then either the slot `i ~ p̂` or an exploration direction.
pub fn sample_action(p_hat: &[f64], proposals: &[BaseState], beta: f64, rng: &mut RngStream) -> SampledAction {
    let d = proposals[0].dim();
    let rho = rng.bernoulli(beta);
    if rho {
        let (n, s) = rng.signed_basis(d);
        let mut x = vec![0.0; d];
        x[n] = s;
        SampledAction { x, rho, chosen: None, xi: None }
    } else {
        let i = rng.categorical(p_hat);
        SampledAction {
            x: proposals[i].tilde().to_vec(),
            rho,
            chosen: Some(i),
            xi: Some(proposals[i].xi()),
        }
    }
}

/// `D = 1 - sum_i p̂_i ||a_i||`, checked against `gamma`.
pub fn denominator(p_hat: &[f64], norms: &[f64], gamma: f64) -> Result<f64> {
    let dn = 1.0 - p_hat.iter().zip(norms).map(|(p, n)| p * n).sum::<f64>();
    if dn < gamma - 1e-9 {
        return Err(Error::invariant(format!("denominator {dn} below gamma {gamma}")));
    }
    Ok(dn)
}

#[allow(clippy::too_many_arguments)]
pub fn base_loss_estimator(
    x: &[f64],
    realized: f64,
    rho: bool,
    xi: Option<bool>,
    p_hat: &[f64],
    norms: &[f64],
    beta: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let dn = denominator(p_hat, norms, gamma)?;
    if rho || xi != Some(false) {
        return Ok(vec![0.0; x.len()]);
    }
    let scale = x.len() as f64 * realized / ((1.0 - beta) * dn);
    Ok(x.iter().map(|v| scale * v).collect())
}

/// `(beta/d) I + (1-beta) sum_i p̂_i ã_i ã_i^T`, row-major.
pub fn build_mtilde(p_hat: &[f64], proposals: &[BaseState], beta: f64, d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for k in 0..d {
        m[k * d + k] = beta / d as f64;
    }
    for (w, b) in p_hat.iter().zip(proposals) {
        let w = (1.0 - beta) * w;
        match b.basis() {
            Some((n, _)) => m[n * d + n] += w,
            None => {
                let a = b.tilde();
                for r in 0..d {
                    for c in 0..d {
                        m[r * d + c] += w * a[r] * a[c];
                    }
                }
            }
        }
    }
    m
}

/// `b_i = (1 - ||a_i||) / (lambda T (1 - beta) D)`.
pub fn bias_terms(p_hat: &[f64], norms: &[f64], lambda: f64, beta: f64, horizon: usize, gamma: f64) -> Result<Vec<f64>> {
    let dn = denominator(p_hat, norms, gamma)?;
    let k = 1.0 / (lambda * horizon as f64 * (1.0 - beta));
    Ok(norms.iter().map(|n| k * (1.0 - n) / dn).collect())
}

/// Returns `(ℓ̄, ĉ)` with `ĉ` padded to all `horizon` slots.
pub fn meta_loss_estimator(
    mtilde: &[f64],
    x: &[f64],
    realized: f64,
    proposals: &[BaseState],
    p_hat: &[f64],
    bias: &[f64],
    horizon: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rhs: Vec<f64> = x.iter().map(|v| v * realized).collect();
    let ell_bar = cholesky_solve(mtilde, &rhs)?;
    let mut c_hat: Vec<f64> = proposals
        .iter()
        .zip(bias)
        .map(|(b, bi)| b.tilde_dot(&ell_bar) - bi)
        .collect();
    let pad: f64 = p_hat.iter().zip(&c_hat).map(|(p, c)| p * c).sum();
    c_hat.resize(horizon, pad);
    Ok((ell_bar, c_hat))
}

/// `p'_i = (1 - mu) p_i e^{-eps ĉ_i} / Z + mu / T`.
pub fn fixed_share_update(p: &[f64], c_hat: &[f64], epsilon: f64, mu: f64) -> Vec<f64> {
    let n = p.len() as f64;
    let lo = c_hat.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = p
        .iter()
        .zip(c_hat)
        .map(|(pi, c)| pi * (-epsilon * (c - lo)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| (1.0 - mu) * v / z + mu / n).collect()
}

/// Everything estimated in one round.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub ell_hat: Vec<f64>,
    pub ell_bar: Vec<f64>,
    pub mtilde: Vec<f64>,
    /// `ĉ` on the active slots.
    pub c_hat: Vec<f64>,
    pub bias: Vec<f64>,
    /// The padded value shared by the slots not yet started.
    pub c_pad: f64,
    pub denominator: f64,
    pub realized: f64,
}

#[derive(Debug, Clone)]
struct Pending {
    x: Vec<f64>,
    rho: bool,
    chosen: Option<usize>,
    xi: Option<bool>,
}

/// Compact corral state.
#[derive(Debug, Clone)]
pub struct Corral {
    params: CorralParams,
    domain: DomainSpec,
    bases: Vec<BaseState>,
    // weights of started slots
    weights: Vec<f64>,
    // per-slot weight of every slot not yet started
    idle_weight: f64,
    p_hat: Vec<f64>,
    round: usize,
    pending: Option<Pending>,
    strict: bool,
}

impl Corral {
    pub fn new(params: CorralParams, domain: DomainSpec) -> Result<Self> {
        check_domain(&params, &domain)?;
        let t = params.horizon;
        Ok(Self {
            params,
            domain,
            bases: Vec::new(),
            weights: Vec::new(),
            idle_weight: 1.0 / t as f64,
            p_hat: Vec::new(),
            round: 0,
            pending: None,
            strict: false,
        })
    }

    /// State with the given base iterates already started and weights on them; the
    /// remaining mass is shared evenly by the idle slots.
    pub fn with_active_bases(
        params: CorralParams,
        domain: DomainSpec,
        iterates: Vec<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        check_domain(&params, &domain)?;
        let t = iterates.len();
        if t == 0 || t > params.horizon || weights.len() != t {
            return Err(Error::contract("need 1..=T iterates with one weight each"));
        }
        let active: f64 = weights.iter().sum();
        let idle = params.horizon - t;
        if weights.iter().any(|w| !(*w > 0.0)) || active > 1.0 + 1e-12 || (idle == 0 && (active - 1.0).abs() > 1e-12) {
            return Err(Error::contract("weights must be positive and sum to at most one"));
        }
        let idle_weight = if idle == 0 { 0.0 } else { (1.0 - active).max(0.0) / idle as f64 };
        let bases = iterates
            .into_iter()
            .enumerate()
            .map(|(i, a)| BaseState::with_iterate(i, params.eta, params.gamma, domain.clone(), a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            domain,
            bases,
            weights,
            idle_weight,
            p_hat: Vec::new(),
            round: t,
            pending: None,
            strict: false,
        })
    }

    /// Check every invariant (including the spectrum of `M̃`) each round.
    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn params(&self) -> &CorralParams {
        &self.params
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn bases(&self) -> &[BaseState] {
        &self.bases
    }

    pub fn active_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn idle_weight(&self) -> f64 {
        self.idle_weight
    }

    /// The full weight vector over all `T` slots.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        w.resize(self.params.horizon, self.idle_weight);
        w
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn p_max(&self) -> f64 {
        let idle = if self.weights.len() < self.params.horizon { self.idle_weight } else { 0.0 };
        self.weights.iter().cloned().fold(idle, f64::max)
    }

    /// Start the next base learner.
    pub fn start_base(&mut self) -> Result<()> {
        if self.bases.len() >= self.params.horizon {
            return Err(Error::contract(format!("all {} slots already started", self.params.horizon)));
        }
        let b = BaseState::new(self.round, self.params.eta, self.params.gamma, self.domain.clone(), self.params.d)?;
        self.bases.push(b);
        self.weights.push(self.idle_weight);
        Ok(())
    }

    /// Draw this round's action from the started bases; returns `x_t`.
    pub fn draw(&mut self, rng: &mut RngStream) -> &[f64] {
        let total: f64 = self.weights.iter().sum();
        self.p_hat.clear();
        self.p_hat.extend(self.weights.iter().map(|w| w / total));
        let rho = rng.bernoulli(self.params.beta);
        let chosen = if rho { None } else { Some(rng.categorical(&self.p_hat)) };
        for b in &mut self.bases {
            b.propose(rng);
        }
        let d = self.params.d;
        let (x, xi) = match chosen {
            Some(i) => (self.bases[i].tilde().to_vec(), Some(self.bases[i].xi())),
            None => {
                let (n, s) = rng.signed_basis(d);
                let mut x = vec![0.0; d];
                x[n] = s;
                (x, None)
            }
        };
        self.pending = Some(Pending { x, rho, chosen, xi });
        &self.pending.as_ref().unwrap().x
    }

    /// Estimators for the pending draw given the observed `l_t . x_t`.
    pub fn estimates(&self, realized: f64) -> Result<Estimates> {
        let pending = self.pending.as_ref().ok_or_else(|| Error::contract("no pending draw"))?;
        let prm = &self.params;
        let d = prm.d;
        let mut dn = 1.0;
        for (p, b) in self.p_hat.iter().zip(&self.bases) {
            dn -= p * b.norm();
        }
        if dn < prm.gamma - 1e-9 {
            return Err(Error::invariant(format!("denominator {dn} below gamma {}", prm.gamma)));
        }
        let ell_hat = if !pending.rho && pending.xi == Some(false) {
            let scale = d as f64 * realized / ((1.0 - prm.beta) * dn);
            pending.x.iter().map(|v| scale * v).collect()
        } else {
            vec![0.0; d]
        };
        let mtilde = build_mtilde(&self.p_hat, &self.bases, prm.beta, d);
        let rhs: Vec<f64> = pending.x.iter().map(|v| v * realized).collect();
        let ell_bar = cholesky_solve(&mtilde, &rhs)?;
        let k = 1.0 / (prm.lambda * prm.horizon as f64 * (1.0 - prm.beta) * dn);
        let bias: Vec<f64> = self.bases.iter().map(|b| k * (1.0 - b.norm())).collect();
        let c_hat: Vec<f64> = self
            .bases
            .iter()
            .zip(&bias)
            .map(|(b, bi)| b.tilde_dot(&ell_bar) - bi)
            .collect();
        let c_pad = self.p_hat.iter().zip(&c_hat).map(|(p, c)| p * c).sum();
        Ok(Estimates {
            ell_hat,
            ell_bar,
            mtilde,
            c_hat,
            bias,
            c_pad,
            denominator: dn,
            realized,
        })
    }

    /// Update the bases and the meta weights with the round's estimates.
    pub fn apply(&mut self, est: &Estimates) -> Result<RoundRecord> {
        let pending = self.pending.take().ok_or_else(|| Error::contract("no pending draw"))?;
        let prm = &self.params;
        if est.ell_hat.iter().any(|&v| v != 0.0) {
            for b in &mut self.bases {
                b.update(&est.ell_hat)?;
            }
        }
        let started = self.weights.len();
        let idle = prm.horizon - started;
        let lo = est
            .c_hat
            .iter()
            .cloned()
            .fold(if idle > 0 { est.c_pad } else { f64::INFINITY }, f64::min);
        let mut z = 0.0;
        for (w, c) in self.weights.iter_mut().zip(&est.c_hat) {
            *w *= (-prm.epsilon * (c - lo)).exp();
            z += *w;
        }
        let mut idle_w = self.idle_weight * (-prm.epsilon * (est.c_pad - lo)).exp();
        z += idle as f64 * idle_w;
        let floor = prm.mu / prm.horizon as f64;
        for w in &mut self.weights {
            *w = (1.0 - prm.mu) * *w / z + floor;
        }
        idle_w = (1.0 - prm.mu) * idle_w / z + floor;
        self.idle_weight = if idle > 0 { idle_w } else { 0.0 };

        let mut rec = RoundRecord::new(self.round, pending.x, est.realized);
        rec.rho = Some(pending.rho);
        rec.xi = pending.xi;
        rec.chosen = pending.chosen;
        rec.p_max = self.p_max();
        rec.diagnostics.insert("denominator", est.denominator);
        rec.diagnostics.insert(
            "pos_bias",
            self.p_hat.iter().zip(&est.bias).map(|(p, b)| p * b).sum(),
        );
        if self.strict {
            let lmin = symmetric_min_eigenvalue(&est.mtilde, prm.d);
            rec.diagnostics.insert("lambda_min", lmin);
            self.check_invariants(est, lmin)?;
        }
        self.round += 1;
        Ok(rec)
    }

    fn check_invariants(&self, est: &Estimates, lambda_min: f64) -> Result<()> {
        let prm = &self.params;
        let idle = prm.horizon - self.weights.len();
        let total = self.weights.iter().sum::<f64>() + idle as f64 * self.idle_weight;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invariant(format!("meta weights sum to {total}")));
        }
        let floor = prm.mu / prm.horizon as f64;
        let low = self.weights.iter().cloned().fold(if idle > 0 { self.idle_weight } else { f64::INFINITY }, f64::min);
        if low < floor * (1.0 - 1e-12) {
            return Err(Error::invariant(format!("meta weight {low} below floor {floor}")));
        }
        if est.denominator < prm.gamma - 1e-12 {
            return Err(Error::invariant(format!("denominator {} below gamma", est.denominator)));
        }
        if lambda_min < prm.beta / prm.d as f64 - 1e-12 {
            return Err(Error::invariant(format!("min eigenvalue {lambda_min} below beta/d")));
        }
        for b in &self.bases {
            if b.norm() > b.clip_radius() + 1e-12 {
                return Err(Error::invariant(format!("base iterate norm {} outside clipped domain", b.norm())));
            }
        }
        Ok(())
    }

    /// Draw and estimate without touching the state, for Monte Carlo checks.
    pub fn sample_estimates(&mut self, loss: &[f64], rng: &mut RngStream) -> Result<Estimates> {
        let x = self.draw(rng).to_vec();
        let realized = crate::dot(loss, &x);
        let est = self.estimates(realized);
        self.pending = None;
        est
    }

    /// One full round. `observe` receives `x_t` and returns `l_t . x_t`; nothing
    /// else about the loss reaches the learner.
    pub fn play_round<F>(&mut self, observe: F, rng: &mut RngStream) -> Result<RoundRecord>
    where
        F: FnOnce(&[f64]) -> f64,
    {
        self.start_base()?;
        let x = self.draw(rng);
        let realized = observe(x);
        if !realized.is_finite() {
            return Err(Error::contract("non-finite realized loss"));
        }
        let est = self.estimates(realized)?;
        self.apply(&est)
    }
}

/// One round against a full loss vector; only `l_t . x_t` is passed on.
pub fn corral_round(state: &mut Corral, loss: &[f64], rng: &mut RngStream) -> Result<(Vec<f64>, RoundRecord)> {
    if loss.len() != state.params.d {
        return Err(Error::contract("loss dimension mismatch"));
    }
    let rec = state.play_round(|x| crate::dot(loss, x), rng)?;
    Ok((rec.action.clone(), rec))
}

fn check_domain(params: &CorralParams, domain: &DomainSpec) -> Result<()> {
    params.validate()?;
    if domain.radius != 1.0 {
        return Err(Error::config("corral runs on the unit body; scale losses instead"));
    }
    match (&params.variant, &domain.kind) {
        (Variant::LpBall, DomainKind::LpBall { p }) if *p == params.p => Ok(()),
        (Variant::Gauge { alpha }, DomainKind::Gauge { alpha: a, p, .. }) if a == alpha && *p == params.p => Ok(()),
        _ => Err(Error::config(format!(
            "parameters for {:?} (p = {}) do not match domain {:?}",
            params.variant, params.p, domain
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LpGauge;
    use std::sync::Arc;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn lp_parameters_for_reference_setting() {
        let prm = derive_params(2.0, 4, 10_000, 4, Variant::LpBall).unwrap();
        assert!(close(prm.c, 0.25, 1e-15));
        assert!(close(prm.gamma, 0.04, 1e-14));
        assert!(close(prm.eta, 0.0025, 1e-14));
        assert!(close(prm.epsilon, 0.01, 1e-14));
        assert!(close(prm.beta, 0.32, 1e-14));
        assert!(close(prm.lambda, 6.25e-4, 1e-14));
        assert!(close(prm.mu, 1e-4, 1e-15));
    }

    #[test]
    fn lp_parameters_for_general_p() {
        // C = sqrt(p-1) 2^{-2/(p-1)}; at p = 1.5 this is sqrt(0.5) / 16
        let prm = derive_params(1.5, 2, 1 << 20, 1, Variant::LpBall).unwrap();
        assert!(close(prm.c, 0.5f64.sqrt() / 16.0, 1e-14));
    }

    #[test]
    fn switches_equal_horizon_is_rejected() {
        let err = derive_params(2.0, 4, 100, 100, Variant::LpBall).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(derive_params(2.0, 4, 100, 0, Variant::LpBall).is_err());
    }

    #[test]
    fn gauge_parameters_for_reference_setting() {
        let prm = derive_params(2.0, 4, 10_000, 4, Variant::Gauge { alpha: 1.0 }).unwrap();
        let c = (1.0f64 / 18.0).sqrt();
        assert!(close(prm.c, c, 1e-15));
        // d^{1/q} = d^{-1/p} inverse = 2 for d = 4, p = 2
        assert!(close(prm.gamma, 4.0 * c * 2.0 * 0.02, 1e-14));
        assert!(close(prm.eta, c * 0.5 * 0.02, 1e-14));
        assert!(close(prm.epsilon, (0.5f64 * 0.02).min(1.0 / 64.0).min(c * c / 2.0), 1e-14));
        assert!(close(prm.beta, 8.0 * 4.0 * prm.epsilon, 1e-14));
        assert!(close(prm.lambda, c * 0.5 / 200.0, 1e-14));
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(renormalize(&[0.25; 4], 4), vec![0.25; 4]);
        assert_eq!(renormalize(&[0.1; 10], 4), vec![0.25; 4]);
        let r = renormalize(&[0.1, 0.3, 0.2, 0.2, 0.2], 2);
        assert!((r[0] - 0.25).abs() < 1e-15 && (r[1] - 0.75).abs() < 1e-15);
    }

    fn ball() -> DomainSpec {
        DomainSpec::lp_ball(2.0).unwrap()
    }

    #[test]
    fn base_estimator_examples() {
        let e = base_loss_estimator(&[1.0, 0.0], 0.5, false, Some(false), &[1.0], &[0.6], 0.0, 0.1).unwrap();
        assert!((e[0] - 2.5).abs() < 1e-15 && e[1] == 0.0);
        let e = base_loss_estimator(&[1.0, 0.0], 0.5, true, None, &[1.0], &[0.6], 0.3, 0.1).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);
        let e = base_loss_estimator(&[1.0, 0.0], 0.5, false, Some(true), &[1.0], &[0.6], 0.3, 0.1).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);
        assert!(base_loss_estimator(&[1.0], 0.5, false, Some(false), &[1.0], &[0.95], 0.0, 0.1).is_err());
    }

    #[test]
    fn mtilde_examples() {
        let mut rng = RngStream::new(0);
        let mut b = BaseState::new(0, 0.1, 0.1, ball(), 2).unwrap();
        loop {
            b.propose(&mut rng);
            if b.basis() == Some((0, 1.0)) {
                break;
            }
        }
        let m = build_mtilde(&[1.0], std::slice::from_ref(&b), 0.5, 2);
        assert_eq!(m, vec![0.75, 0.0, 0.0, 0.25]);
        let m = build_mtilde(&[1.0], std::slice::from_ref(&b), 1.0, 2);
        assert_eq!(m, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn bias_examples() {
        // lambda T (1 - beta) = 1
        let b = bias_terms(&[0.5, 0.5], &[0.9, 0.5], 1.0, 0.0, 1, 0.01).unwrap();
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-14 && (b[1] - 5.0 / 3.0).abs() < 1e-14);
        let b = bias_terms(&[0.2, 0.3, 0.5], &[0.4; 3], 0.5, 0.2, 10, 0.01).unwrap();
        for v in b {
            assert!((v - 1.0 / (0.5 * 10.0 * 0.8)).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_share_examples() {
        let p = fixed_share_update(&[0.5, 0.5], &[0.0, 4f64.ln()], 1.0, 0.0);
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
        let p = fixed_share_update(&[0.7, 0.2, 0.1], &[0.0; 3], 0.3, 0.1);
        assert!((p[0] - (0.9 * 0.7 + 0.1 / 3.0)).abs() < 1e-15);
        let p = fixed_share_update(&[0.7, 0.2, 0.1], &[5.0, -3.0, 1.0], 0.3, 1.0);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = fixed_share_update(&[0.5, 0.5], &[1e6, -1e6], 1.0, 0.0);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_round_horizon() {
        let prm = CorralParams {
            gamma: 0.5,
            eta: 0.1,
            epsilon: 0.01,
            mu: 1.0,
            beta: 0.5,
            lambda: 1.0,
            c: 0.25,
            p: 2.0,
            d: 2,
            horizon: 1,
            switches: 1,
            variant: Variant::LpBall,
        };
        let mut c = Corral::new(prm, ball()).unwrap();
        c.set_strict(true);
        let mut rng = RngStream::new(1);
        let (x, rec) = corral_round(&mut c, &[0.3, -0.2], &mut rng).unwrap();
        assert_eq!(c.p_hat(), &[1.0]);
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 1);
        assert!(rec.p_max == 1.0);
        assert!(corral_round(&mut c, &[0.3, -0.2], &mut rng).is_err());
    }

    #[test]
    fn scalar_case_recovers_loss() {
        let prm = derive_params(2.0, 1, 4096, 1, Variant::LpBall).unwrap();
        let mut c = Corral::new(prm, ball()).unwrap();
        let mut rng = RngStream::new(3);
        for t in 0..300 {
            c.start_base().unwrap();
            let loss = [((t * 7) % 11) as f64 / 11.0 - 0.5];
            let x = c.draw(&mut rng).to_vec();
            let est = c.estimates(loss[0] * x[0]).unwrap();
            assert!((est.ell_bar[0] - loss[0]).abs() < 1e-14);
            c.apply(&est).unwrap();
        }
    }

    // Literal per-slot implementation with all T weights stored explicitly.
    fn literal_run(prm: &CorralParams, dom: &DomainSpec, losses: &[Vec<f64>], seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = RngStream::new(seed);
        let t_max = prm.horizon;
        let mut p = vec![1.0 / t_max as f64; t_max];
        let mut bases: Vec<BaseState> = Vec::new();
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for (t, loss) in losses.iter().enumerate() {
            bases.push(BaseState::new(t, prm.eta, prm.gamma, dom.clone(), prm.d).unwrap());
            let p_hat = renormalize(&p, t + 1);
            let rho = rng.bernoulli(prm.beta);
            let chosen = if rho { None } else { Some(rng.categorical(&p_hat)) };
            for b in &mut bases {
                b.propose(&mut rng);
            }
            let (x, xi) = match chosen {
                Some(i) => (bases[i].tilde().to_vec(), Some(bases[i].xi())),
                None => {
                    let (n, s) = rng.signed_basis(prm.d);
                    let mut x = vec![0.0; prm.d];
                    x[n] = s;
                    (x, None)
                }
            };
            let realized = crate::dot(loss, &x);
            let norms: Vec<f64> = bases.iter().map(|b| b.norm()).collect();
            let ell_hat = base_loss_estimator(&x, realized, rho, xi, &p_hat, &norms, prm.beta, prm.gamma).unwrap();
            let m = build_mtilde(&p_hat, &bases, prm.beta, prm.d);
            let b = bias_terms(&p_hat, &norms, prm.lambda, prm.beta, t_max, prm.gamma).unwrap();
            let (_, c_hat) = meta_loss_estimator(&m, &x, realized, &bases, &p_hat, &b, t_max).unwrap();
            let lhs: f64 = p.iter().zip(&c_hat).map(|(a, c)| a * c).sum();
            let rhs: f64 = p_hat.iter().zip(&c_hat).map(|(a, c)| a * c).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "padding identity");
            for base in &mut bases {
                base.update(&ell_hat).unwrap();
            }
            p = fixed_share_update(&p, &c_hat, prm.epsilon, prm.mu);
            xs.push(x);
            ps.push(p.clone());
        }
        (xs, ps)
    }

    fn random_losses(d: usize, t: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(seed);
        (0..t)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.uniform() * 2.0 - 1.0).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n.max(1.0)).collect()
            })
            .collect()
    }

    #[test]
    fn compact_matches_literal() {
        let prm = CorralParams {
            gamma: 0.2,
            eta: 0.05,
            epsilon: 0.05,
            mu: 0.05,
            beta: 0.3,
            lambda: 0.05,
            c: 0.25,
            p: 2.0,
            d: 3,
            horizon: 60,
            switches: 1,
            variant: Variant::LpBall,
        };
        let dom = ball();
        let losses = random_losses(3, 60, 5);
        let (xs, ps) = literal_run(&prm, &dom, &losses, 77);
        let mut c = Corral::new(prm.clone(), dom).unwrap();
        let mut rng = RngStream::new(77);
        for (t, loss) in losses.iter().enumerate() {
            let (x, _) = corral_round(&mut c, loss, &mut rng).unwrap();
            for (a, b) in x.iter().zip(&xs[t]) {
                assert!((a - b).abs() <= 1e-12, "round {t}");
            }
            for (a, b) in c.weights().iter().zip(&ps[t]) {
                assert!((a - b).abs() <= 1e-12, "round {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn only_queried_products_matter() {
        let prm = derive_params(2.0, 3, 2000, 2, Variant::LpBall).unwrap();
        let losses = random_losses(3, 300, 9);
        let mut a = Corral::new(prm.clone(), ball()).unwrap();
        let mut b = Corral::new(prm, ball()).unwrap();
        let (mut ra, mut rb) = (RngStream::new(4), RngStream::new(4));
        for loss in &losses {
            let rec_a = a.play_round(|x| crate::dot(loss, x), &mut ra).unwrap();
            // A different vector agreeing with the loss only along the queried action.
            let rec_b = b
                .play_round(
                    |x| {
                        let xx: f64 = x.iter().map(|v| v * v).sum();
                        let shift = [0.4, -0.9, 0.3];
                        let along: f64 = crate::dot(&shift, x) / xx;
                        let fake: Vec<f64> = (0..3).map(|k| loss[k] + shift[k] - along * x[k]).collect();
                        crate::dot(&fake, x)
                    },
                    &mut rb,
                )
                .unwrap();
            for (x, y) in rec_a.action.iter().zip(&rec_b.action) {
                assert!((x - y).abs() <= 1e-12);
            }
            assert!((rec_a.realized_loss - rec_b.realized_loss).abs() < 1e-12);
        }
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let prm = derive_params(2.0, 2, 3000, 1, Variant::LpBall).unwrap();
        let losses = random_losses(2, 50, 2);
        let run = || {
            let mut c = Corral::new(prm.clone(), ball()).unwrap();
            let mut rng = RngStream::new(123);
            losses.iter().map(|l| corral_round(&mut c, l, &mut rng).unwrap().1).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mtilde_is_second_moment_of_action() {
        let prm = derive_params(2.0, 3, 10_000, 4, Variant::LpBall).unwrap();
        let iterates = vec![vec![0.3, -0.2, 0.1], vec![0.0; 3], vec![-0.5, 0.4, 0.2], vec![0.1, 0.1, -0.6]];
        let mut c = Corral::with_active_bases(prm.clone(), ball(), iterates, vec![0.1, 0.2, 0.3, 0.15]).unwrap();
        let mut rng = RngStream::new(31);
        let n = 400_000;
        let mut sum = [0.0f64; 9];
        let mut sq = [0.0f64; 9];
        let mut expect = [0.0f64; 9];
        for _ in 0..n {
            let x = c.draw(&mut rng).to_vec();
            let m = build_mtilde(c.p_hat(), c.bases(), prm.beta, 3);
            for r in 0..3 {
                for k in 0..3 {
                    let v = x[r] * x[k];
                    sum[r * 3 + k] += v;
                    sq[r * 3 + k] += v * v;
                    expect[r * 3 + k] += m[r * 3 + k];
                }
            }
        }
        for j in 0..9 {
            let mean = sum[j] / n as f64;
            let var = sq[j] / n as f64 - mean * mean;
            let target = expect[j] / n as f64;
            assert!((mean - target).abs() <= 5.0 * (var / n as f64).sqrt() + 1e-12, "entry {j}");
        }
    }

    #[test]
    fn fuzz_invariants_hold() {
        let prm = derive_params(1.5, 3, 1500, 3, Variant::LpBall);
        let prm = prm.unwrap_or_else(|_| derive_params(2.0, 3, 1500, 1, Variant::LpBall).unwrap());
        let dom = DomainSpec::lp_ball(prm.p).unwrap();
        let mut c = Corral::new(prm.clone(), dom).unwrap();
        c.set_strict(true);
        let losses = random_losses(3, 1500, 12);
        let mut rng = RngStream::new(5);
        let target = 1.0 / (prm.lambda * prm.horizon as f64 * (1.0 - prm.beta));
        for l in &losses {
            let (_, rec) = corral_round(&mut c, l, &mut rng).unwrap();
            assert!((rec.diagnostics["pos_bias"] - target).abs() <= 1e-10 * target);
        }
    }

    #[test]
    fn gauge_variant_runs() {
        let oracle = Arc::new(LpGauge::new(2.0).unwrap());
        let dom = DomainSpec::gauge(oracle, 1.0, 2.0, 2).unwrap();
        let prm = derive_params(2.0, 2, 4000, 1, Variant::Gauge { alpha: 1.0 }).unwrap();
        let mut c = Corral::new(prm, dom).unwrap();
        c.set_strict(true);
        let mut rng = RngStream::new(8);
        for l in random_losses(2, 400, 1) {
            corral_round(&mut c, &l, &mut rng).unwrap();
        }
        assert!(Corral::new(derive_params(2.0, 2, 4000, 1, Variant::LpBall).unwrap(), DomainSpec::gauge(Arc::new(LpGauge::new(2.0).unwrap()), 1.0, 2.0, 2).unwrap()).is_err());
    }
}
