//! Multi-seed execution: environment, learner, comparator and trace rows.

use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use corral_core::corral::{derive_params, Corral, CorralParams, Variant};
use corral_core::environments::{
    dp_switching_arms, dp_switching_comparator, generate, generate_bandit, normalize_to_domain,
    read_losses,
};
use corral_core::geometry::{DomainSpec, LpGauge};
use corral_core::mab_recipe::{MabParams, MabRecipe};
use corral_core::unconstrained::{build_grid, GridCap, Reduction, UnconstrainedOco};
use corral_core::{dot, RngStream, RoundRecord, SwitchingComparator};
use log::{debug, info, warn};
use rayon::prelude::*;

use crate::config::{Algorithm, ExperimentConfig, ParamOverrides};
use crate::restart::{restart_period, RestartBaseline, RestartParams};
use crate::stats::{mean_stderr, SummaryRow};
use crate::HarnessError;

const ENV_SALT: u64 = 0x656e_7669;
const ALG_SALT: u64 = 0x616c_676f;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    pub full_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            full_trace: false,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: &'static str,
    /// Rounds completed, 1-based.
    pub t: usize,
    pub realized_loss: f64,
    pub cum_loss: f64,
    pub cum_regret: f64,
    pub segment_id: usize,
    pub p_max: f64,
    pub diag: String,
}

#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    /// `(t, cumulative regret)` at `T/4`, `T/2` and `T`.
    pub checkpoints: Vec<(usize, f64)>,
    pub failure: Option<HarnessError>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub algorithm: &'static str,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

impl RunOutput {
    pub fn first_failure(&self) -> Option<&HarnessError> {
        self.runs.iter().find_map(|r| r.failure.as_ref())
    }

    pub fn rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }

    /// Cumulative regret at the horizon for each seed that finished.
    pub fn final_regrets(&self) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.failure.is_none())
            .filter_map(|r| r.checkpoints.last().map(|c| c.1))
            .collect()
    }
}

/// `T/4`, `T/2`, `T`, at least 1 and without repeats.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [horizon / 4, horizon / 2, horizon].iter().map(|&t| t.max(1)).collect();
    c.dedup();
    c
}

/// Everything one seed produced before the trace is formatted.
#[derive(Debug)]
pub struct Simulation {
    pub losses: Vec<Vec<f64>>,
    pub records: Vec<RoundRecord>,
    pub comparator: SwitchingComparator,
    pub params: Vec<(&'static str, f64)>,
    pub failure: Option<HarnessError>,
}

pub fn load_or_generate(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Vec<f64>>, HarnessError> {
    let env = &cfg.env;
    let losses = match &env.loss_file {
        Some(path) => {
            let file = File::open(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            let (losses, _) = read_losses(BufReader::new(file))?;
            if losses.is_empty() {
                return Err(HarnessError::Config("loss file has no rounds".into()));
            }
            losses
        }
        None => {
            let mut rng = RngStream::new(seed).fork(ENV_SALT);
            if cfg.algorithm == Algorithm::MabRecipe {
                generate_bandit(&env.env_config(), env.gap, &mut rng)?
            } else {
                generate(&env.env_config(), &mut rng)?
            }
        }
    };
    if cfg.algorithm == Algorithm::MabRecipe && losses.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(HarnessError::Config("bandit losses must lie in [0, 1]".into()));
    }
    Ok(losses)
}

fn corral_params(
    p: f64,
    d: usize,
    horizon: usize,
    switches: usize,
    variant: Variant,
    ov: &ParamOverrides,
) -> Result<CorralParams, HarnessError> {
    let mut prm = derive_params(p, d, horizon, switches, variant)?;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut prm.gamma, ov.gamma);
    set(&mut prm.eta, ov.eta);
    set(&mut prm.epsilon, ov.epsilon);
    set(&mut prm.mu, ov.mu);
    set(&mut prm.beta, ov.beta);
    set(&mut prm.lambda, ov.lambda);
    prm.validate()?;
    Ok(prm)
}

fn corral_diag(prm: &CorralParams) -> Vec<(&'static str, f64)> {
    vec![
        ("gamma", prm.gamma),
        ("eta", prm.eta),
        ("epsilon", prm.epsilon),
        ("mu", prm.mu),
        ("beta", prm.beta),
        ("lambda", prm.lambda),
    ]
}

fn gauge_domain(cfg: &ExperimentConfig) -> Result<(DomainSpec, f64), HarnessError> {
    let alpha = cfg.params.alpha.unwrap_or(1.0);
    let s = cfg.params.gauge_exponent.unwrap_or(2.0);
    let oracle = LpGauge::new(s).map_err(|e| HarnessError::Config(e.to_string()))?;
    let dom = DomainSpec::gauge(Arc::new(oracle), alpha, cfg.env.p, cfg.env.d)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok((dom, alpha))
}

fn comparator_for(
    cfg: &ExperimentConfig,
    losses: &[Vec<f64>],
    domain: Option<&DomainSpec>,
) -> Result<SwitchingComparator, HarnessError> {
    let horizon = losses.len();
    let c = &cfg.comparator;
    if let (Some(starts), Some(anchors)) = (&c.starts, &c.anchors) {
        if anchors.iter().any(|a| a.len() != losses[0].len()) {
            return Err(HarnessError::Config("comparator anchors have the wrong dimension".into()));
        }
        return SwitchingComparator::new(starts.clone(), anchors.clone(), horizon)
            .map_err(|e| HarnessError::Config(e.to_string()));
    }
    let switches = c.switches.unwrap_or(cfg.env.switches).min(horizon);
    if cfg.algorithm == Algorithm::MabRecipe {
        return Ok(dp_switching_arms(losses, switches)?.comparator);
    }
    if cfg.algorithm.is_unconstrained() {
        let sol = dp_switching_comparator(losses, switches, &DomainSpec::lp_ball(2.0)?)?;
        return Ok(sol.comparator.scaled(c.norm.unwrap_or(1.0)));
    }
    let mut dom = domain.expect("constrained runs pass their domain").clone();
    if let Some(u) = c.norm {
        if u == 0.0 {
            return Ok(SwitchingComparator::fixed(vec![0.0; losses[0].len()], horizon)?);
        }
        dom = dom.with_radius(u).map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    Ok(dp_switching_comparator(losses, switches, &dom)?.comparator)
}

/// Run the configured learner for one seed.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<Simulation, HarnessError> {
    let mut losses = load_or_generate(cfg, seed)?;
    let horizon = losses.len();
    let d = losses[0].len();
    if cfg.env.loss_file.is_some() && d != cfg.env.d {
        return Err(HarnessError::Config(format!("loss file has d = {d}, config says {}", cfg.env.d)));
    }
    let switches = cfg.env.switches.min(horizon);
    let p = cfg.env.p;
    let mut rng = RngStream::new(seed).fork(ALG_SALT);
    let mut records = Vec::with_capacity(horizon);
    let ov = &cfg.params;
    let cap: GridCap = ov.grid_cap.map(Into::into).unwrap_or_default();

    let mut failure = None;
    let mut note = |e: corral_core::Error, t: usize| {
        warn!("seed {seed}: round {}: {e}", t + 1);
        failure = Some(HarnessError::from(e));
    };

    let (params, comparator) = match cfg.algorithm {
        Algorithm::CorralLp | Algorithm::CorralGauge => {
            let (dom, variant) = if cfg.algorithm == Algorithm::CorralGauge {
                let (dom, alpha) = gauge_domain(cfg)?;
                normalize_to_domain(&mut losses, &dom);
                (dom, Variant::Gauge { alpha })
            } else {
                (DomainSpec::lp_ball(p).map_err(|e| HarnessError::Config(e.to_string()))?, Variant::LpBall)
            };
            let prm = corral_params(p, d, horizon, switches, variant, ov)?;
            let diag = corral_diag(&prm);
            let mut alg = Corral::new(prm, dom.clone())?;
            for (t, l) in losses.iter().enumerate() {
                match alg.play_round(|x| dot(l, x), &mut rng) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        note(e, t);
                        break;
                    }
                }
            }
            (diag, comparator_for(cfg, &losses, Some(&dom))?)
        }
        Algorithm::RestartBaseline => {
            let dom = DomainSpec::lp_ball(p).map_err(|e| HarnessError::Config(e.to_string()))?;
            let period = ov.period.unwrap_or_else(|| restart_period(horizon, switches));
            let mut prm = RestartParams::tuned(p, d, period);
            if let Some(g) = ov.gamma {
                prm.gamma = g;
            }
            if let Some(e) = ov.eta {
                prm.eta = e;
            }
            if let Some(b) = ov.beta {
                prm.beta = b;
            }
            if !(prm.gamma > 0.0 && prm.gamma < 1.0 && prm.beta > 0.0 && prm.beta <= 0.5 && prm.eta > 0.0) {
                return Err(HarnessError::Config(format!("restart parameters out of range: {prm:?}")));
            }
            if prm.clamped {
                info!("restart period {period}: gamma/beta capped at 1/2");
            }
            let diag = vec![
                ("period", period as f64),
                ("gamma", prm.gamma),
                ("eta", prm.eta),
                ("beta", prm.beta),
                ("clamped", if prm.clamped { 1.0 } else { 0.0 }),
            ];
            let mut alg = RestartBaseline::new(prm, dom.clone(), d)?;
            for (t, l) in losses.iter().enumerate() {
                match alg.play_round(|x| dot(l, x), &mut rng) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        note(e, t);
                        break;
                    }
                }
            }
            (diag, comparator_for(cfg, &losses, Some(&dom))?)
        }
        Algorithm::MabRecipe => {
            let mut prm = MabParams::tuned(d, ov.copies.unwrap_or(1), horizon)?;
            if let Some(e) = ov.eta {
                prm.eta = e;
            }
            if let Some(e) = ov.epsilon {
                prm.epsilon = e;
            }
            let diag = vec![("eta", prm.eta), ("epsilon", prm.epsilon), ("copies", prm.copies as f64)];
            let mut alg = MabRecipe::new(prm)?;
            for (t, l) in losses.iter().enumerate() {
                match alg.play_round(|n| l[n], &mut rng) {
                    Ok((r, _)) => records.push(r),
                    Err(e) => {
                        note(e, t);
                        break;
                    }
                }
            }
            (diag, comparator_for(cfg, &losses, None)?)
        }
        Algorithm::UnconstrainedOco => {
            let grid = build_grid(horizon, cap)?;
            let diag = vec![("grid_h", grid.h as f64), ("grid_r", grid.r as f64), ("grid_len", grid.len() as f64)];
            let mut alg = UnconstrainedOco::new(d, grid)?;
            for (t, l) in losses.iter().enumerate() {
                let v = alg.prediction().to_vec();
                match alg.update(l) {
                    Ok(step) => {
                        let mut r = RoundRecord::new(t, v.clone(), dot(l, &v));
                        r.p_max = alg.weights().iter().cloned().fold(0.0, f64::max);
                        r.diagnostics.insert("correction_ratio", step.max_correction_ratio);
                        r.diagnostics.insert("floor_slack", step.min_floor_slack);
                        records.push(r);
                    }
                    Err(e) => {
                        note(e, t);
                        break;
                    }
                }
            }
            (diag, comparator_for(cfg, &losses, None)?)
        }
        Algorithm::UnconstrainedReduction => {
            let mut alg = Reduction::new(d, horizon, switches, cap)?;
            let mut diag = corral_diag(alg.direction().params());
            diag.push(("v_min", alg.v_min()));
            for (t, l) in losses.iter().enumerate() {
                match alg.play_round(|x| dot(l, x), &mut rng) {
                    Ok(step) => records.push(step.record),
                    Err(e) => {
                        note(e, t);
                        break;
                    }
                }
            }
            (diag, comparator_for(cfg, &losses, None)?)
        }
    };
    Ok(Simulation {
        losses,
        records,
        comparator,
        params,
        failure,
    })
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn diag_string(pairs: impl IntoIterator<Item = (String, f64)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k}={}", fmt_f(v)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Trace rows and checkpoints for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, full_trace: bool) -> SeedRun {
    let algorithm = cfg.algorithm.name();
    let run_id = format!("{algorithm}-{seed}");
    info!("{run_id}: start");
    let sim = match simulate(cfg, seed) {
        Ok(s) => s,
        Err(e) => {
            return SeedRun {
                seed,
                rows: Vec::new(),
                checkpoints: Vec::new(),
                failure: Some(e),
            }
        }
    };
    debug!("{run_id}: params {:?}", sim.params);
    let horizon = sim.losses.len();
    let marks = checkpoints(horizon);
    let mut rows = Vec::new();
    let mut reached = Vec::new();
    let (mut cum_loss, mut cum_regret) = (0.0, 0.0);
    let mut first = true;
    for (t, rec) in sim.records.iter().enumerate() {
        cum_loss += rec.realized_loss;
        cum_regret += rec.realized_loss - dot(&sim.losses[t], sim.comparator.anchor_at(t));
        let done = t + 1;
        let mark = marks.contains(&done);
        if mark {
            reached.push((done, cum_regret));
        }
        if full_trace || mark {
            let mut pairs: Vec<(String, f64)> = Vec::new();
            if first {
                pairs.extend(sim.params.iter().map(|(k, v)| (k.to_string(), *v)));
                first = false;
            }
            pairs.extend(rec.diagnostics.iter().map(|(k, v)| (k.to_string(), *v)));
            rows.push(TraceRow {
                run_id: run_id.clone(),
                seed,
                algorithm,
                t: done,
                realized_loss: rec.realized_loss,
                cum_loss,
                cum_regret,
                segment_id: sim.comparator.segment_of(t),
                p_max: rec.p_max,
                diag: diag_string(pairs),
            });
        }
    }
    if let Some(err) = &sim.failure {
        let t = sim.records.len();
        rows.push(TraceRow {
            run_id: run_id.clone(),
            seed,
            algorithm,
            t: t + 1,
            realized_loss: f64::NAN,
            cum_loss,
            cum_regret,
            segment_id: sim.comparator.segment_of(t.min(horizon - 1)),
            p_max: f64::NAN,
            diag: format!("error={}", err.to_string().replace([',', '\n', '"'], " ")),
        });
    }
    info!("{run_id}: done, regret {cum_regret:.4}");
    SeedRun {
        seed,
        rows,
        checkpoints: reached,
        failure: sim.failure,
    }
}

/// All seeds, `opts.jobs` at a time; output ordered by seed.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let mut runs: Vec<SeedRun> =
        pool.install(|| cfg.seeds.par_iter().map(|&s| run_seed(cfg, s, opts.full_trace)).collect());
    runs.sort_by_key(|r| r.seed);
    if let Some(e) = runs.iter().find_map(|r| match &r.failure {
        Some(HarnessError::Config(m)) => Some(m.clone()),
        _ => None,
    }) {
        return Err(HarnessError::Config(e));
    }
    let horizon = runs.iter().flat_map(|r| r.checkpoints.last()).map(|c| c.0).max().unwrap_or(0);
    let summary = checkpoints(horizon.max(1))
        .into_iter()
        .filter(|_| horizon > 0)
        .map(|t| {
            let vals: Vec<f64> = runs
                .iter()
                .filter(|r| r.failure.is_none())
                .filter_map(|r| r.checkpoints.iter().find(|c| c.0 == t).map(|c| c.1))
                .collect();
            let (mean, stderr) = mean_stderr(&vals);
            SummaryRow {
                algorithm: cfg.algorithm.name().to_string(),
                horizon,
                t,
                n: vals.len(),
                mean,
                stderr,
            }
        })
        .collect();
    Ok(RunOutput {
        algorithm: cfg.algorithm.name(),
        runs,
        summary,
    })
}
