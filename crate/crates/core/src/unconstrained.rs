//! Comparator-adaptive online convex optimization with switching comparators, and its
//! use for unconstrained linear bandits.
//!
//! [`UnconstrainedOco`] runs a grid of base learners `(i, r)`, each on the Euclidean
//! ball of radius `c_i = 2^(i-1) / T`, and mixes their predictions with weighted
//! entropy mirror descent over a floored simplex, adding a second-order correction to
//! every meta loss. The default base is [`SaBase`], a strongly adaptive learner built
//! from geometric covering intervals.
//!
//! [`Reduction`] plays `x_t = v_t z_t`, with the direction `z_t` from a [`Corral`] on the
//! unit `l_2` ball and the scale `v_t` from a one-dimensional [`UnconstrainedOco`].

use crate::corral::{derive_params, Corral, Variant};
use crate::geometry::DomainSpec;
use crate::simplex::floored_mirror_step;
use crate::{Error, Result, RngStream, RoundRecord};

/// Largest horizon accepted for the uncapped grid.
pub const FULL_GRID_MAX_T: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridCap {
    /// Scales up to at least `D_max`.
    Capped(f64),
    /// One scale per round, for small horizons only.
    Full,
}

impl Default for GridCap {
    fn default() -> Self {
        GridCap::Capped((1u64 << 20) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerGrid {
    pub horizon: usize,
    pub h: usize,
    pub r: usize,
    pub scales: Vec<f64>,
    pub rates: Vec<f64>,
    /// Per learner, index `(i - 1) R + (r - 1)`.
    pub floors: Vec<f64>,
    pub prior: Vec<f64>,
}

fn ceil_log2(x: f64) -> i64 {
    x.log2().ceil() as i64
}

pub fn build_grid(horizon: usize, cap: GridCap) -> Result<LearnerGrid> {
    if horizon < 2 {
        return Err(Error::config("the grid needs T >= 2"));
    }
    let t = horizon as f64;
    let log_t = ceil_log2(t);
    let h = match cap {
        GridCap::Capped(d_max) => {
            if !(d_max >= 1.0 / t) || !d_max.is_finite() {
                return Err(Error::config(format!("D_max = {d_max} must be finite and at least 1/T")));
            }
            log_t + ceil_log2(d_max) + 1
        }
        GridCap::Full => {
            if horizon > FULL_GRID_MAX_T {
                return Err(Error::config(format!(
                    "the uncapped grid is limited to T <= {FULL_GRID_MAX_T}, got {horizon}"
                )));
            }
            log_t + horizon as i64 + 1
        }
    };
    if h < 1 {
        return Err(Error::config("grid has no scales"));
    }
    let h = h as usize;
    let r = log_t as usize;
    let scales: Vec<f64> = (1..=h).map(|i| 2f64.powi(i as i32 - 1) / t).collect();
    let rates: Vec<f64> = (1..=r).map(|k| 1.0 / (32.0 * 2f64.powi(k as i32))).collect();
    let mut floors = Vec::with_capacity(h * r);
    let mut prior = Vec::with_capacity(h * r);
    for (i, c) in scales.iter().enumerate() {
        let f = 1.0 / (t * t * 4f64.powi(i as i32 + 1));
        for e in &rates {
            floors.push(f);
            prior.push(e * e / (c * c));
        }
    }
    let z: f64 = prior.iter().sum();
    prior.iter_mut().for_each(|w| *w /= z);
    Ok(LearnerGrid {
        horizon,
        h,
        r,
        scales,
        rates,
        floors,
        prior,
    })
}

impl LearnerGrid {
    pub fn len(&self) -> usize {
        self.h * self.r
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(c_i, eta_r)` of learner `j`.
    pub fn scale_rate(&self, j: usize) -> (f64, f64) {
        (self.scales[j / self.r], self.rates[j % self.r])
    }

    /// `sum_j (c_i / eta_r) w_1`.
    pub fn prior_cost(&self) -> f64 {
        (0..self.len())
            .map(|j| {
                let (c, e) = self.scale_rate(j);
                c / e * self.prior[j]
            })
            .sum()
    }
}

/// A base learner for the grid: any online linear optimizer on a Euclidean ball.
pub trait OcoBase: Send + std::fmt::Debug {
    fn prediction(&self) -> &[f64];
    fn update(&mut self, gradient: &[f64]);
}

#[derive(Debug, Clone)]
struct IntervalExpert {
    end: usize,
    x: Vec<f64>,
    steps: usize,
    prior: f64,
    wealth: f64,
    reward_sum: f64,
    bet: f64,
}

/// Strongly adaptive learner on `{||x||_2 <= D}`.
///
/// Rounds are numbered from 1. Each geometric covering interval `[k 2^j, (k+1) 2^j - 1]`
/// runs its own projected gradient descent with step `D / sqrt(s)` at its `s`-th update.
/// The live intervals are combined by coin betting: interval `I` starting at `s` has
/// prior `1 / (s^2 (1 + floor(log2 s)))`, bets the Krichevsky-Trofimov fraction of its
/// wealth on the reward `(f(x_t) - f(x_I)) / (2D)`, and receives weight proportional to
/// prior times its positive bet.
#[derive(Debug, Clone)]
pub struct SaBase {
    radius: f64,
    round: usize,
    experts: Vec<IntervalExpert>,
    prediction: Vec<f64>,
    mix: Vec<f64>,
}

impl SaBase {
    pub fn new(d: usize, radius: f64) -> Self {
        let mut s = Self {
            radius,
            round: 1,
            experts: Vec::new(),
            prediction: vec![0.0; d],
            mix: Vec::new(),
        };
        s.open_intervals();
        s.combine();
        s
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn open_intervals(&mut self) {
        let t = self.round;
        let d = self.prediction.len();
        let tf = t as f64;
        let prior = 1.0 / (tf * tf * (1.0 + tf.log2().floor()));
        let mut len = 1usize;
        while len <= t && t.is_multiple_of(len) {
            self.experts.push(IntervalExpert {
                end: t + len - 1,
                x: vec![0.0; d],
                steps: 0,
                prior,
                wealth: 1.0,
                reward_sum: 0.0,
                bet: 0.0,
            });
            len <<= 1;
        }
    }

    fn combine(&mut self) {
        for e in &mut self.experts {
            e.bet = e.reward_sum / (e.steps as f64 + 1.0) * e.wealth;
        }
        let mut total: f64 = self.experts.iter().map(|e| e.prior * e.bet.max(0.0)).sum();
        self.mix.clear();
        if total > 0.0 {
            self.mix.extend(self.experts.iter().map(|e| e.prior * e.bet.max(0.0)));
        } else {
            self.mix.extend(self.experts.iter().map(|e| e.prior));
            total = self.mix.iter().sum();
        }
        self.prediction.iter_mut().for_each(|v| *v = 0.0);
        for (e, m) in self.experts.iter().zip(&self.mix) {
            let w = m / total;
            for (p, x) in self.prediction.iter_mut().zip(&e.x) {
                *p += w * x;
            }
        }
        let n = self.prediction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > self.radius {
            let f = self.radius / n;
            self.prediction.iter_mut().for_each(|v| *v *= f);
        }
    }
}

impl OcoBase for SaBase {
    fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    fn update(&mut self, g: &[f64]) {
        let fx = crate::dot(g, &self.prediction);
        let span = 2.0 * self.radius;
        for e in &mut self.experts {
            let r = ((fx - crate::dot(g, &e.x)) / span).clamp(-1.0, 1.0);
            let reward = if e.bet > 0.0 { r } else { r.max(0.0) };
            e.wealth += reward * e.bet;
            e.reward_sum += reward;
            e.steps += 1;
            let step = self.radius / (e.steps as f64).sqrt();
            for (x, gi) in e.x.iter_mut().zip(g) {
                *x -= step * gi;
            }
            let n = e.x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > self.radius {
                let f = self.radius / n;
                e.x.iter_mut().for_each(|v| *v *= f);
            }
        }
        self.round += 1;
        let t = self.round;
        self.experts.retain(|e| e.end >= t);
        self.open_intervals();
        self.combine();
    }
}

pub fn sa_base_step(state: &mut SaBase, gradient: &[f64]) -> Vec<f64> {
    state.update(gradient);
    state.prediction.clone()
}

/// Weighted entropy OMD step over the floored simplex with rates `eta_r / c_i`.
pub fn weighted_entropy_omd_update(w: &[f64], loss: &[f64], correction: &[f64], grid: &LearnerGrid) -> Result<Vec<f64>> {
    let kappa: Vec<f64> = (0..grid.len())
        .map(|j| {
            let (c, e) = grid.scale_rate(j);
            c / e
        })
        .collect();
    let total: Vec<f64> = loss.iter().zip(correction).map(|(l, a)| l + a).collect();
    let (out, residual) = floored_mirror_step(w, &total, &kappa, &grid.floors)?;
    if residual > 1e-9 {
        return Err(Error::Numerical {
            what: "weighted entropy step",
            residual,
        });
    }
    Ok(out)
}

/// Diagnostics of one OCO round.
#[derive(Debug, Clone, Default)]
pub struct OcoStep {
    /// Largest `32 (eta_r / c_i) |l_j|` over the grid.
    pub max_correction_ratio: f64,
    pub min_floor_slack: f64,
}

#[derive(Debug)]
pub struct UnconstrainedOco {
    grid: LearnerGrid,
    kappa: Vec<f64>,
    bases: Vec<Box<dyn OcoBase>>,
    weights: Vec<f64>,
    prediction: Vec<f64>,
    losses: Vec<f64>,
    total: Vec<f64>,
}

impl UnconstrainedOco {
    /// Grid of [`SaBase`] learners in dimension `d`.
    pub fn new(d: usize, grid: LearnerGrid) -> Result<Self> {
        let bases = (0..grid.len())
            .map(|j| Box::new(SaBase::new(d, grid.scale_rate(j).0)) as Box<dyn OcoBase>)
            .collect();
        Self::with_bases(grid, bases)
    }

    pub fn with_bases(grid: LearnerGrid, bases: Vec<Box<dyn OcoBase>>) -> Result<Self> {
        if bases.len() != grid.len() || bases.is_empty() {
            return Err(Error::contract("one base learner per grid point"));
        }
        let d = bases[0].prediction().len();
        let kappa = (0..grid.len())
            .map(|j| {
                let (c, e) = grid.scale_rate(j);
                c / e
            })
            .collect();
        let mut s = Self {
            kappa,
            weights: grid.prior.clone(),
            bases,
            prediction: vec![0.0; d],
            losses: vec![0.0; grid.len()],
            total: vec![0.0; grid.len()],
            grid,
        };
        s.mix();
        Ok(s)
    }

    pub fn grid(&self) -> &LearnerGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bases(&self) -> &[Box<dyn OcoBase>] {
        &self.bases
    }

    /// `v_t = sum_j w_j v_j`.
    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    fn mix(&mut self) {
        self.prediction.iter_mut().for_each(|v| *v = 0.0);
        for (w, b) in self.weights.iter().zip(&self.bases) {
            for (p, x) in self.prediction.iter_mut().zip(b.prediction()) {
                *p += w * x;
            }
        }
    }

    /// Feed `grad f_t(v_t)` and move to the next round.
    pub fn update(&mut self, gradient: &[f64]) -> Result<OcoStep> {
        if gradient.len() != self.prediction.len() {
            return Err(Error::contract("gradient dimension mismatch"));
        }
        let mut step = OcoStep {
            max_correction_ratio: 0.0,
            min_floor_slack: f64::INFINITY,
        };
        for j in 0..self.grid.len() {
            let l = crate::dot(gradient, self.bases[j].prediction());
            let ratio = 32.0 * l.abs() / self.kappa[j];
            step.max_correction_ratio = step.max_correction_ratio.max(ratio);
            self.losses[j] = l;
            self.total[j] = l + 32.0 * l * l / self.kappa[j];
        }
        if step.max_correction_ratio > 1.0 + 1e-9 {
            return Err(Error::invariant(format!(
                "correction ratio {} exceeds 1",
                step.max_correction_ratio
            )));
        }
        let (w, residual) = floored_mirror_step(&self.weights, &self.total, &self.kappa, &self.grid.floors)?;
        if residual > 1e-9 {
            return Err(Error::Numerical {
                what: "weighted entropy step",
                residual,
            });
        }
        self.weights = w;
        for (w, f) in self.weights.iter().zip(&self.grid.floors) {
            step.min_floor_slack = step.min_floor_slack.min(w - f);
        }
        for b in &mut self.bases {
            b.update(gradient);
        }
        self.mix();
        Ok(step)
    }

    /// Meta losses `<g, v_j>` of the last update.
    pub fn last_losses(&self) -> &[f64] {
        &self.losses
    }
}

/// One round: returns `v_t`, then consumes `grad f_t(v_t)` from `gradient_at`.
pub fn oco_round<F>(state: &mut UnconstrainedOco, gradient_at: F) -> Result<(Vec<f64>, OcoStep)>
where
    F: FnOnce(&[f64]) -> Vec<f64>,
{
    let v = state.prediction.clone();
    let g = gradient_at(&v);
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 1.0 + 1e-12 {
        return Err(Error::contract(format!("gradient norm {n} exceeds 1")));
    }
    let step = state.update(&g)?;
    Ok((v, step))
}

/// The one-dimensional learner that sets the scale in [`Reduction`].
pub trait ScaleLearner: Send + std::fmt::Debug {
    fn scale(&self) -> f64;
    /// Consume the derivative of `v -> v <l_t, z_t>`.
    fn observe(&mut self, gradient: f64) -> Result<OcoStep>;
}

impl ScaleLearner for UnconstrainedOco {
    fn scale(&self) -> f64 {
        self.prediction[0]
    }

    fn observe(&mut self, gradient: f64) -> Result<OcoStep> {
        self.update(&[gradient])
    }
}

/// Played quantities of one reduction round.
#[derive(Debug, Clone)]
pub struct ReductionStep {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Scale proposed by the one-dimensional learner.
    pub v_raw: f64,
    /// Scale actually played, `|v| >= v_min`.
    pub v: f64,
    pub realized: f64,
    pub record: RoundRecord,
}

#[derive(Debug)]
pub struct Reduction {
    direction: Corral,
    scale: Box<dyn ScaleLearner>,
    v_min: f64,
    round: usize,
}

impl Reduction {
    /// Direction learner tuned for `(d, T, S)` on the unit `l_2` ball; scale learner on
    /// the given grid cap; `v_min = 1 / T^2`.
    pub fn new(d: usize, horizon: usize, switches: usize, cap: GridCap) -> Result<Self> {
        let params = derive_params(2.0, d, horizon, switches, Variant::LpBall)?;
        let direction = Corral::new(params, DomainSpec::lp_ball(2.0)?)?;
        let scale = UnconstrainedOco::new(1, build_grid(horizon, cap)?)?;
        Self::from_parts(direction, Box::new(scale), 1.0 / (horizon as f64 * horizon as f64))
    }

    pub fn from_parts(direction: Corral, scale: Box<dyn ScaleLearner>, v_min: f64) -> Result<Self> {
        if !(v_min > 0.0) {
            return Err(Error::config("v_min must be positive"));
        }
        Ok(Self {
            direction,
            scale,
            v_min,
            round: 0,
        })
    }

    pub fn direction(&self) -> &Corral {
        &self.direction
    }

    pub fn scale(&self) -> &dyn ScaleLearner {
        self.scale.as_ref()
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// One round; `observe` gets `x_t` and returns `l_t . x_t`.
    pub fn play_round<F>(&mut self, observe: F, rng: &mut RngStream) -> Result<ReductionStep>
    where
        F: FnOnce(&[f64]) -> f64,
    {
        self.direction.start_base()?;
        let z = self.direction.draw(rng).to_vec();
        let v_raw = self.scale.scale();
        let v = if v_raw.abs() >= self.v_min {
            v_raw
        } else if v_raw < 0.0 {
            -self.v_min
        } else {
            self.v_min
        };
        let x: Vec<f64> = z.iter().map(|c| v * c).collect();
        let realized = observe(&x);
        if !realized.is_finite() {
            return Err(Error::contract("non-finite realized loss"));
        }
        let along = realized / v;
        let est = self.direction.estimates(along)?;
        let mut record = self.direction.apply(&est)?;
        let step = self.scale.observe(along)?;
        record.t = self.round;
        record.action = x.clone();
        record.realized_loss = realized;
        record.diagnostics.insert("v", v);
        record.diagnostics.insert("v_floor_gap", (v - v_raw).abs());
        record.diagnostics.insert("correction_ratio", step.max_correction_ratio);
        self.round += 1;
        Ok(ReductionStep {
            x,
            z,
            v_raw,
            v,
            realized,
            record,
        })
    }
}

pub fn reduction_round(state: &mut Reduction, loss: &[f64], rng: &mut RngStream) -> Result<ReductionStep> {
    state.play_round(|x| crate::dot(loss, x), rng)
}

/// Both sides of the scale/direction regret decomposition for a finished run.
///
/// Left: `sum_t <l_t, x_t - u_t>`. Right: per segment `k` with anchor `u_k != 0`,
/// `sum_t (v_t - ||u_k||) <l_t, z_t>` plus `||u_k|| sum_t <l_t, z_t - u_k / ||u_k||>`.
pub fn decomposition_sides(
    losses: &[Vec<f64>],
    scales: &[f64],
    directions: &[Vec<f64>],
    comparator: &crate::SwitchingComparator,
) -> Result<(f64, f64)> {
    let t_max = comparator.horizon();
    if losses.len() != t_max || scales.len() != t_max || directions.len() != t_max {
        return Err(Error::contract("trace length differs from the comparator horizon"));
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for k in 0..comparator.num_segments() {
        let u = &comparator.anchors()[k];
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if un == 0.0 {
            return Err(Error::contract("decomposition needs nonzero anchors"));
        }
        let unit: Vec<f64> = u.iter().map(|v| v / un).collect();
        let mut reg_v = 0.0;
        let mut reg_z = 0.0;
        for t in comparator.segment(k) {
            let lz = crate::dot(&losses[t], &directions[t]);
            let x: Vec<f64> = directions[t].iter().map(|c| scales[t] * c).collect();
            lhs += crate::dot(&losses[t], &x) - crate::dot(&losses[t], u);
            reg_v += (scales[t] - un) * lz;
            reg_z += lz - crate::dot(&losses[t], &unit);
        }
        rhs += reg_v + un * reg_z;
    }
    Ok((lhs, rhs))
}
