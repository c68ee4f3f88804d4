//! Oblivious loss sequences and the optimal switching comparator.

use std::io::{BufRead, Write};

use crate::geometry::{dual_exponent, norm_p, DomainSpec};
use crate::{Error, Result, RngStream, SwitchingComparator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    /// One fixed direction per segment, consecutive directions at an obtuse angle.
    PiecewiseFixed,
    /// Per segment, the direction slides linearly toward a second random direction.
    PiecewiseDrift,
    /// Per segment, a fixed mean plus Gaussian noise, rescaled into the dual ball.
    StochasticNoise,
    /// All losses zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub d: usize,
    pub horizon: usize,
    pub switches: usize,
    /// Losses are normalized in the dual norm `q = p / (p - 1)`.
    pub p: f64,
    pub noise: f64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.horizon == 0 {
            return Err(Error::config("environment needs d >= 1 and T >= 1"));
        }
        if self.switches == 0 || self.switches > self.horizon {
            return Err(Error::config(format!(
                "need 1 <= S <= T, got S = {}, T = {}",
                self.switches, self.horizon
            )));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::config(format!("p = {} outside (1, 2]", self.p)));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::config(format!("noise = {} outside [0, 1]", self.noise)));
        }
        Ok(())
    }

    /// Segment start rounds, `floor(k T / S)`.
    pub fn segment_starts(&self) -> Vec<usize> {
        (0..self.switches).map(|k| k * self.horizon / self.switches).collect()
    }
}

fn unit_direction(rng: &mut RngStream, d: usize, q: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let n = norm_p(&v, q);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn clamp_norm(v: &mut [f64], q: f64) {
    let n = norm_p(v, q);
    if n > 1.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Loss sequence of `T` rounds with `||l_t||_q <= 1`.
pub fn generate(cfg: &EnvConfig, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let (d, t_max) = (cfg.d, cfg.horizon);
    let q = dual_exponent(cfg.p);
    if cfg.kind == EnvKind::Zero {
        return Ok(vec![vec![0.0; d]; t_max]);
    }
    let starts = cfg.segment_starts();
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(cfg.switches);
    for k in 0..cfg.switches {
        let mut g = unit_direction(rng, d, q);
        if k > 0 && crate::dot(&g, &dirs[k - 1]) > 0.0 {
            g.iter_mut().for_each(|x| *x = -*x);
        }
        dirs.push(g);
    }
    let targets: Vec<Vec<f64>> = if cfg.kind == EnvKind::PiecewiseDrift {
        (0..cfg.switches).map(|_| unit_direction(rng, d, q)).collect()
    } else {
        Vec::new()
    };
    let mut out = Vec::with_capacity(t_max);
    for k in 0..cfg.switches {
        let end = if k + 1 < cfg.switches { starts[k + 1] } else { t_max };
        let len = (end - starts[k]) as f64;
        let g = &dirs[k];
        for t in starts[k]..end {
            let mut l: Vec<f64> = match cfg.kind {
                EnvKind::PiecewiseFixed => {
                    if cfg.noise > 0.0 {
                        let z = unit_direction(rng, d, q);
                        g.iter().zip(&z).map(|(a, b)| (1.0 - cfg.noise) * a + cfg.noise * b).collect()
                    } else {
                        g.clone()
                    }
                }
                EnvKind::PiecewiseDrift => {
                    let tau = cfg.noise * (t - starts[k]) as f64 / len;
                    g.iter().zip(&targets[k]).map(|(a, b)| (1.0 - tau) * a + tau * b).collect()
                }
                EnvKind::StochasticNoise => {
                    let s = cfg.noise / (d as f64).sqrt();
                    g.iter().map(|a| (1.0 - cfg.noise) * a + s * rng.normal()).collect()
                }
                EnvKind::Zero => unreachable!(),
            };
            clamp_norm(&mut l, q);
            out.push(l);
        }
    }
    Ok(out)
}

/// Shrink rounds whose dual norm for `domain` exceeds one.
pub fn normalize_to_domain(losses: &mut [Vec<f64>], domain: &DomainSpec) {
    for l in losses {
        let n = domain.dual_norm(l);
        if n > 1.0 {
            l.iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Bandit losses in `[0, 1]^d`: per segment, arm means drawn in `[0.3, 0.7]` with one
/// arm lowered by `gap`; each round is an independent Bernoulli draw per arm.
pub fn generate_bandit(cfg: &EnvConfig, gap: f64, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    if cfg.d < 2 || cfg.horizon == 0 || cfg.switches == 0 || cfg.switches > cfg.horizon {
        return Err(Error::config("bandit environment needs d >= 2 and 1 <= S <= T"));
    }
    if !(0.0..=0.3).contains(&gap) {
        return Err(Error::config(format!("gap = {gap} outside [0, 0.3]")));
    }
    if cfg.kind == EnvKind::Zero {
        return Ok(vec![vec![0.0; cfg.d]; cfg.horizon]);
    }
    let starts = cfg.segment_starts();
    let mut out = Vec::with_capacity(cfg.horizon);
    let mut prev_best = usize::MAX;
    for k in 0..cfg.switches {
        let end = if k + 1 < cfg.switches { starts[k + 1] } else { cfg.horizon };
        let mut means: Vec<f64> = (0..cfg.d).map(|_| 0.3 + 0.4 * rng.uniform()).collect();
        let mut best = rng.index(cfg.d);
        if best == prev_best {
            best = (best + 1) % cfg.d;
        }
        prev_best = best;
        let floor = means.iter().cloned().fold(f64::INFINITY, f64::min);
        means[best] = floor - gap;
        for _ in starts[k]..end {
            out.push(means.iter().map(|m| if rng.uniform() < *m { 1.0 } else { 0.0 }).collect());
        }
    }
    Ok(out)
}

/// Prefix sums `P[t] = sum_{s<t} l_s`, stored flat with stride `d`.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    d: usize,
    sums: Vec<f64>,
}

impl PrefixSums {
    pub fn new(losses: &[Vec<f64>]) -> Self {
        let d = losses.first().map_or(0, |l| l.len());
        let mut sums = vec![0.0; (losses.len() + 1) * d];
        for (t, l) in losses.iter().enumerate() {
            for k in 0..d {
                sums[(t + 1) * d + k] = sums[t * d + k] + l[k];
            }
        }
        Self { d, sums }
    }

    pub fn horizon(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.sums.len() / self.d - 1
        }
    }

    /// `sum_{a <= t < b} l_t` into `out`.
    pub fn interval(&self, a: usize, b: usize, out: &mut [f64]) {
        let d = self.d;
        for k in 0..d {
            out[k] = self.sums[b * d + k] - self.sums[a * d + k];
        }
    }
}

/// `min_{u in domain} sum_{a <= t < b} <l_t, u>`, i.e. minus the dual norm of the sum.
pub fn best_interval_value(prefix: &PrefixSums, a: usize, b: usize, domain: &DomainSpec) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut buf = vec![0.0; prefix.d];
    prefix.interval(a, b, &mut buf);
    domain.linear_min(&buf).1
}

/// Optimal switching comparator and its total loss.
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub comparator: SwitchingComparator,
    pub value: f64,
}

/// Exact-`S` segmentation minimizing the sum of per-segment values. Splitting a segment
/// never raises the value for these objectives, so this is also the best with at most
/// `S` segments. Ties go to the earliest boundary.
fn segment_dp<F, A>(horizon: usize, switches: usize, mut value: F, anchor: A) -> Result<DpSolution>
where
    F: FnMut(usize, usize) -> f64,
    A: Fn(usize, usize) -> Vec<f64>,
{
    if switches == 0 || switches > horizon {
        return Err(Error::contract(format!("need 1 <= S <= T, got S = {switches}, T = {horizon}")));
    }
    let (s_max, t_max) = (switches, horizon);
    let stride = t_max + 1;
    let mut v = vec![f64::INFINITY; (s_max + 1) * stride];
    let mut arg = vec![0usize; (s_max + 1) * stride];
    v[0] = 0.0;
    for t in 1..=t_max {
        // layers that can still end at (s_max, t_max)
        let k_lo = 1.max(s_max.saturating_sub(t_max - t));
        let k_top = if t == t_max { s_max } else { s_max - 1 };
        for s in 0..t {
            let kmax = k_top.min(s + 1);
            if k_lo > kmax {
                continue;
            }
            let w = value(s, t);
            for k in k_lo..=kmax {
                let prev = v[(k - 1) * stride + s];
                if prev.is_finite() {
                    let cand = prev + w;
                    let cell = k * stride + t;
                    if cand < v[cell] {
                        v[cell] = cand;
                        arg[cell] = s;
                    }
                }
            }
        }
    }
    let total = v[s_max * stride + t_max];
    let mut starts = vec![0usize; s_max];
    let mut t = t_max;
    for k in (1..=s_max).rev() {
        let s = arg[k * stride + t];
        starts[k - 1] = s;
        t = s;
    }
    let anchors = (0..s_max)
        .map(|k| {
            let end = if k + 1 < s_max { starts[k + 1] } else { t_max };
            anchor(starts[k], end)
        })
        .collect();
    Ok(DpSolution {
        comparator: SwitchingComparator::new(starts, anchors, t_max)?,
        value: total,
    })
}

/// Best comparator with `S` segments over `domain` (`O(S T^2)` time, `O(S T)` memory).
pub fn dp_switching_comparator(losses: &[Vec<f64>], switches: usize, domain: &DomainSpec) -> Result<DpSolution> {
    let prefix = PrefixSums::new(losses);
    let d = prefix.d;
    let mut buf = vec![0.0; d];
    let value = |a: usize, b: usize| {
        prefix.interval(a, b, &mut buf);
        -domain.radius * domain.dual_norm(&buf)
    };
    let anchor = |a: usize, b: usize| {
        let mut l = vec![0.0; d];
        prefix.interval(a, b, &mut l);
        domain.linear_min(&l).0
    };
    segment_dp(losses.len(), switches, value, anchor)
}

/// Best switching sequence of pure arms (`O(S T d)` time and memory).
pub fn dp_switching_arms(losses: &[Vec<f64>], switches: usize) -> Result<DpSolution> {
    let t_max = losses.len();
    if switches == 0 || switches > t_max {
        return Err(Error::contract(format!("need 1 <= S <= T, got S = {switches}, T = {t_max}")));
    }
    let d = losses[0].len();
    if d == 0 || losses.iter().any(|l| l.len() != d) {
        return Err(Error::contract("losses must share a positive dimension"));
    }
    let s_max = switches;
    // f[k][t][a]: k + 1 segments cover rounds 0..=t, the last on arm a
    let idx = |k: usize, t: usize, a: usize| (k * t_max + t) * d + a;
    let mut f = vec![f64::INFINITY; s_max * t_max * d];
    let mut cont = vec![false; s_max * t_max * d];
    let mut g = vec![f64::INFINITY; s_max * t_max];
    let mut g_arg = vec![0usize; s_max * t_max];
    for t in 0..t_max {
        for k in 0..s_max.min(t + 1) {
            for a in 0..d {
                let stay = if t > 0 { f[idx(k, t - 1, a)] } else { f64::INFINITY };
                let switch = match (k, t) {
                    (0, 0) => 0.0,
                    (0, _) => f64::INFINITY,
                    _ => g[(k - 1) * t_max + t - 1],
                };
                let (prev, c) = if stay <= switch { (stay, true) } else { (switch, false) };
                f[idx(k, t, a)] = prev + losses[t][a];
                cont[idx(k, t, a)] = c;
            }
            let row = &f[idx(k, t, 0)..idx(k, t, 0) + d];
            let (best, val) = row
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            g[k * t_max + t] = val;
            g_arg[k * t_max + t] = best;
        }
    }
    let value = g[(s_max - 1) * t_max + t_max - 1];
    let mut starts = vec![0usize; s_max];
    let mut arms = vec![0usize; s_max];
    let (mut k, mut t) = (s_max - 1, t_max - 1);
    let mut a = g_arg[k * t_max + t];
    loop {
        if t > 0 && cont[idx(k, t, a)] {
            t -= 1;
            continue;
        }
        starts[k] = t;
        arms[k] = a;
        if k == 0 {
            break;
        }
        k -= 1;
        t -= 1;
        a = g_arg[k * t_max + t];
    }
    let anchors = arms
        .iter()
        .map(|&a| {
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            e
        })
        .collect();
    Ok(DpSolution {
        comparator: SwitchingComparator::new(starts, anchors, t_max)?,
        value,
    })
}

/// Write losses as text: a `# d=.. T=.. p=..` header, then one round per line.
pub fn write_losses<W: Write>(mut out: W, losses: &[Vec<f64>], p: f64) -> Result<()> {
    let d = losses.first().map_or(0, |l| l.len());
    let io = |e: std::io::Error| Error::Config(format!("writing losses: {e}"));
    writeln!(out, "# d={d} T={} p={p}", losses.len()).map_err(io)?;
    for l in losses {
        let line: Vec<String> = l.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" ")).map_err(io)?;
    }
    Ok(())
}

/// Read the format produced by [`write_losses`]; returns the losses and `p`.
pub fn read_losses<R: BufRead>(input: R) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut d = None;
    let mut t = None;
    let mut p = None;
    let mut losses = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Config(format!("reading losses: {e}")))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                let (k, v) = match field.split_once('=') {
                    Some(kv) => kv,
                    None => continue,
                };
                let bad = || Error::Config(format!("line {}: bad header field {field}", n + 1));
                match k {
                    "d" => d = Some(v.parse::<usize>().map_err(|_| bad())?),
                    "T" => t = Some(v.parse::<usize>().map_err(|_| bad())?),
                    "p" => p = Some(v.parse::<f64>().map_err(|_| bad())?),
                    _ => {}
                }
            }
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        if let Some(d) = d {
            if row.len() != d {
                return Err(Error::Config(format!("line {}: expected {d} values, got {}", n + 1, row.len())));
            }
        }
        losses.push(row);
    }
    let d = d.ok_or_else(|| Error::config("loss file header lacks d"))?;
    let p = p.ok_or_else(|| Error::config("loss file header lacks p"))?;
    if let Some(t) = t {
        if t != losses.len() {
            return Err(Error::Config(format!("header says T={t}, found {} rounds", losses.len())));
        }
    }
    if losses.iter().any(|l| l.len() != d) {
        return Err(Error::config("ragged loss rows"));
    }
    Ok((losses, p))
}
