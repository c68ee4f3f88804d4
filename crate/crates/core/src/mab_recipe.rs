//! Corralling `M` clipped Exp3 learners for `d`-armed bandits.

use crate::simplex::floored_mirror_step;
use crate::{Error, Result, RngStream, RoundRecord};

/// Entropy mirror step on `Δ_d ∩ [eta, 1]^d` with rate `eta`.
pub fn clipped_entropy_step(a: &[f64], loss: &[f64], eta: f64) -> Result<Vec<f64>> {
    let d = a.len();
    if d as f64 * eta > 1.0 {
        return Err(Error::config(format!("clip {eta} infeasible for {d} arms")));
    }
    let kappa = vec![1.0 / eta; d];
    let floors = vec![eta; d];
    if d as f64 * eta == 1.0 {
        return Ok(floors);
    }
    let (out, residual) = floored_mirror_step(a, loss, &kappa, &floors)?;
    if residual > 1e-9 {
        return Err(Error::Numerical {
            what: "clipped entropy step",
            residual,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MabParams {
    pub arms: usize,
    pub copies: usize,
    pub eta: f64,
    pub epsilon: f64,
}

impl MabParams {
    /// `eta = sqrt(ln d / (d T))`, `epsilon = sqrt(ln M / (4 d T))`.
    pub fn tuned(arms: usize, copies: usize, horizon: usize) -> Result<Self> {
        if arms < 2 || copies == 0 || horizon == 0 {
            return Err(Error::config("need d >= 2 arms, M >= 1 copies and T >= 1"));
        }
        let (d, m, t) = (arms as f64, copies as f64, horizon as f64);
        let eta = (d.ln() / (d * t)).sqrt().min(1.0 / d);
        let epsilon = if copies == 1 { 0.0 } else { (m.ln() / (4.0 * d * t)).sqrt() };
        Ok(Self { arms, copies, eta, epsilon })
    }
}

#[derive(Debug, Clone)]
pub struct MabRecipe {
    params: MabParams,
    bases: Vec<Vec<f64>>,
    weights: Vec<f64>,
    q: Vec<f64>,
    round: usize,
}

/// What one round produced, beyond the record.
#[derive(Debug, Clone)]
pub struct MabEstimates {
    pub arm: usize,
    pub ell_hat: Vec<f64>,
    pub bias: Vec<f64>,
    pub c_hat: Vec<f64>,
    /// `<p_t, b_t>`, equal to `eta d`.
    pub pos_bias: f64,
}

impl MabRecipe {
    pub fn new(params: MabParams) -> Result<Self> {
        let d = params.arms;
        if !(params.eta > 0.0) || params.eta * d as f64 > 1.0 {
            return Err(Error::config(format!("clip eta = {} infeasible for {d} arms", params.eta)));
        }
        if !(params.epsilon >= 0.0) {
            return Err(Error::config("epsilon must be non-negative"));
        }
        let m = params.copies;
        Ok(Self {
            bases: vec![vec![1.0 / d as f64; d]; m],
            weights: vec![1.0 / m as f64; m],
            q: vec![1.0 / d as f64; d],
            round: 0,
            params,
        })
    }

    pub fn params(&self) -> &MabParams {
        &self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bases(&self) -> &[Vec<f64>] {
        &self.bases
    }

    /// Mixture `q = sum_i p_i a_i` played this round.
    pub fn mixture(&mut self) -> &[f64] {
        let d = self.params.arms;
        self.q.iter_mut().for_each(|v| *v = 0.0);
        for (p, a) in self.weights.iter().zip(&self.bases) {
            for n in 0..d {
                self.q[n] += p * a[n];
            }
        }
        &self.q
    }

    /// One round; `observe` maps the pulled arm to its loss in `[0, 1]`.
    pub fn play_round<F>(&mut self, observe: F, rng: &mut RngStream) -> Result<(RoundRecord, MabEstimates)>
    where
        F: FnOnce(usize) -> f64,
    {
        let eta = self.params.eta;
        let d = self.params.arms;
        self.mixture();
        let q = self.q.clone();
        if let Some(low) = q.iter().cloned().reduce(f64::min) {
            if low < eta * (1.0 - 1e-12) {
                return Err(Error::invariant(format!("mixture mass {low} below clip {eta}")));
            }
        }
        let arm = rng.categorical(&q);
        let loss = observe(arm);
        if !loss.is_finite() {
            return Err(Error::contract("non-finite loss"));
        }
        let mut ell_hat = vec![0.0; d];
        ell_hat[arm] = loss / q[arm];
        let bias: Vec<f64> = self
            .bases
            .iter()
            .map(|a| eta * a.iter().zip(&q).map(|(x, y)| x / y).sum::<f64>())
            .collect();
        let c_hat: Vec<f64> = self
            .bases
            .iter()
            .zip(&bias)
            .map(|(a, b)| a[arm] * ell_hat[arm] - b)
            .collect();
        let pos_bias = self.weights.iter().zip(&bias).map(|(p, b)| p * b).sum();

        let lo = c_hat.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut z = 0.0;
        for (w, c) in self.weights.iter_mut().zip(&c_hat) {
            *w *= (-self.params.epsilon * (c - lo)).exp();
            z += *w;
        }
        self.weights.iter_mut().for_each(|w| *w /= z);
        for a in &mut self.bases {
            *a = clipped_entropy_step(a, &ell_hat, eta)?;
        }

        let mut action = vec![0.0; d];
        action[arm] = 1.0;
        let mut rec = RoundRecord::new(self.round, action, loss);
        rec.chosen = Some(arm);
        rec.p_max = self.weights.iter().cloned().fold(0.0, f64::max);
        rec.diagnostics.insert("pos_bias", pos_bias);
        self.round += 1;
        Ok((rec, MabEstimates { arm, ell_hat, bias, c_hat, pos_bias }))
    }
}

/// One round against a full loss vector in `[0, 1]^d`; only the pulled entry is read.
pub fn mab_round(state: &mut MabRecipe, loss: &[f64], rng: &mut RngStream) -> Result<(usize, RoundRecord)> {
    if loss.len() != state.params.arms {
        return Err(Error::contract("loss dimension mismatch"));
    }
    let (rec, est) = state.play_round(|n| loss[n], rng)?;
    Ok((est.arm, rec))
}
