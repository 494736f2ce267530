//! Ground truth: exact Gillespie trajectories and the matrix exponential of the
//! generator truncated to a finite window.
//!
//! Neighbouring sites holding colours `(i, j)` (0 is a hole) exchange their contents at
//! rate 1 when `i > j` and at rate `q` when `i < j`.

use crate::error::{invalid, Error, Result};
use crate::types::ParticleConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Default cap on the number of generator states.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Per-sample random stream: the seed selects the key, the sample index selects the stream.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// How the starting configuration of each sample is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Fixed(ParticleConfig),
    /// `m` type-2 particles on a Bernoulli(`rho`) field on the negative sites, type-1 particles on `0..n-m`.
    BernoulliStep { rho: f64, m: usize, n: usize },
}

/// Monte Carlo job description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub initial: InitialCondition,
    pub q: f64,
    pub horizon: f64,
    pub seed: u64,
    pub samples: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be finite and nonnegative, got {}", self.horizon));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return invalid(format!("q must be finite and nonnegative, got {}", self.q));
        }
        if self.samples == 0 {
            return invalid("samples must be positive");
        }
        if let InitialCondition::BernoulliStep { rho, m, n } = self.initial {
            if !(rho > 0.0 && rho <= 1.0) || m > n {
                return invalid(format!("bad Bernoulli-step data rho={rho}, m={m}, n={n}"));
            }
        }
        Ok(())
    }
}

/// One recorded exchange of a Gillespie trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    /// Left site of the exchanged pair.
    pub site: i64,
    /// Contents of `(site, site+1)` before the exchange.
    pub before: (u8, u8),
}

fn run_inner(initial: &ParticleConfig, q: f64, t: f64, rng: &mut impl Rng, mut log: Option<&mut Vec<Event>>) -> ParticleConfig {
    let mut pos: Vec<i64> = initial.positions().to_vec();
    let mut col: Vec<u8> = initial.species().to_vec();
    let n = pos.len();
    let mut time = 0.0;
    // (rate, particle index, kind): kind 0 acts on the pair to the right, kind 1 hops left into a hole
    let mut moves: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * n);
    loop {
        moves.clear();
        let mut total = 0.0;
        for i in 0..n {
            let right_occ = i + 1 < n && pos[i + 1] == pos[i] + 1;
            let r = if !right_occ || col[i] > col[i + 1] {
                1.0
            } else if col[i] < col[i + 1] {
                q
            } else {
                0.0
            };
            if r > 0.0 {
                moves.push((r, i, 0));
                total += r;
            }
            let left_free = i == 0 || pos[i - 1] < pos[i] - 1;
            if left_free && q > 0.0 {
                moves.push((q, i, 1));
                total += q;
            }
        }
        if total == 0.0 {
            break;
        }
        let u: f64 = rng.gen::<f64>();
        time += -(1.0 - u).ln() / total;
        if time > t {
            break;
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut chosen = moves[moves.len() - 1];
        for &mv in &moves {
            if pick < mv.0 {
                chosen = mv;
                break;
            }
            pick -= mv.0;
        }
        let (_, i, kind) = chosen;
        if kind == 0 {
            let right_occ = i + 1 < n && pos[i + 1] == pos[i] + 1;
            if let Some(l) = log.as_deref_mut() {
                l.push(Event { time, site: pos[i], before: (col[i], if right_occ { col[i + 1] } else { 0 }) });
            }
            if right_occ {
                col.swap(i, i + 1);
            } else {
                pos[i] += 1;
            }
        } else {
            if let Some(l) = log.as_deref_mut() {
                l.push(Event { time, site: pos[i] - 1, before: (0, col[i]) });
            }
            pos[i] -= 1;
        }
    }
    ParticleConfig::new(pos, col).expect("dynamics preserve ordering")
}

/// One exact trajectory of the coloured process up to time `t`.
pub fn gillespie_run(initial: &ParticleConfig, q: f64, t: f64, rng: &mut impl Rng) -> ParticleConfig {
    run_inner(initial, q, t, rng, None)
}

/// Like [`gillespie_run`] but also returns every exchange performed.
pub fn gillespie_run_logged(initial: &ParticleConfig, q: f64, t: f64, rng: &mut impl Rng) -> (ParticleConfig, Vec<Event>) {
    let mut log = Vec::new();
    let out = run_inner(initial, q, t, rng, Some(&mut log));
    (out, log)
}

/// Bernoulli-step initial data drawn from `rng`.
pub fn sample_bernoulli_step(rho: f64, m: usize, n: usize, rng: &mut impl Rng) -> Result<ParticleConfig> {
    if !(rho > 0.0 && rho <= 1.0) || m > n {
        return invalid(format!("bad Bernoulli-step data rho={rho}, m={m}, n={n}"));
    }
    let mut type2 = Vec::with_capacity(m);
    let mut x = -1i64;
    while type2.len() < m {
        if rho >= 1.0 || rng.gen::<f64>() < rho {
            type2.push(x);
        }
        x -= 1;
    }
    type2.reverse();
    let mut positions = type2;
    positions.extend(0..(n - m) as i64);
    let idx: Vec<usize> = (1..=m).collect();
    ParticleConfig::two_species(positions, &idx)
}

fn initial_for(spec: &SimulationSpec, rng: &mut ChaCha8Rng) -> Result<ParticleConfig> {
    match &spec.initial {
        InitialCondition::Fixed(c) => Ok(c.clone()),
        InitialCondition::BernoulliStep { rho, m, n } => sample_bernoulli_step(*rho, *m, *n, rng),
    }
}

/// Monte Carlo estimate with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

/// Fraction of samples whose final configuration satisfies `event`.
pub fn estimate_event<F>(spec: &SimulationSpec, event: F) -> Result<Estimate>
where
    F: Fn(&ParticleConfig) -> bool + Sync,
{
    spec.validate()?;
    let hits: Result<u64> = (0..spec.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(spec.seed, k);
            let init = initial_for(spec, &mut rng)?;
            Ok(u64::from(event(&gillespie_run(&init, spec.q, spec.horizon, &mut rng))))
        })
        .sum();
    let hits = hits?;
    let n = spec.samples as f64;
    let p = hits as f64 / n;
    Ok(Estimate { estimate: p, stderr: (p * (1.0 - p) / n).sqrt(), hits, samples: spec.samples })
}

/// Monte Carlo estimate of the transition probability into `target`.
pub fn estimate_transition(spec: &SimulationSpec, target: &ParticleConfig) -> Result<Estimate> {
    estimate_event(spec, |c| c == target)
}

/// Empirical distribution of final configurations, sorted by configuration.
pub fn empirical_distribution(spec: &SimulationSpec) -> Result<Vec<(ParticleConfig, u64)>> {
    spec.validate()?;
    let finals: Result<Vec<ParticleConfig>> = (0..spec.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(spec.seed, k);
            let init = initial_for(spec, &mut rng)?;
            Ok(gillespie_run(&init, spec.q, spec.horizon, &mut rng))
        })
        .collect();
    let mut finals = finals?;
    finals.sort();
    let mut out: Vec<(ParticleConfig, u64)> = Vec::new();
    for c in finals {
        match out.last_mut() {
            Some((last, k)) if *last == c => *k += 1,
            _ => out.push((c, 1)),
        }
    }
    Ok(out)
}

/// Generator of the coloured process restricted to the sites `lo..=hi`, plus one sink state.
#[derive(Debug, Clone)]
pub struct WindowGenerator {
    pub lo: i64,
    pub hi: i64,
    pub q: f64,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// Off-diagonal rates to other in-window states.
    rows: Vec<Vec<(usize, f64)>>,
    /// Rate of leaving the window.
    leak: Vec<f64>,
}

fn arrangements(word: &mut Vec<u8>, counts: &mut [usize], len: usize, out: &mut Vec<Vec<u8>>, cap: usize) -> Result<()> {
    if word.len() == len {
        if out.len() >= cap {
            return Err(Error::ResourceLimit { what: "window generator states".into(), cap: cap as u64 });
        }
        out.push(word.clone());
        return Ok(());
    }
    for c in 0..counts.len() {
        if counts[c] == 0 {
            continue;
        }
        counts[c] -= 1;
        word.push(c as u8);
        arrangements(word, counts, len, out, cap)?;
        word.pop();
        counts[c] += 1;
    }
    Ok(())
}

impl WindowGenerator {
    /// Build the generator for the colour multiset of `particles` on `lo..=hi`.
    pub fn build(particles: &ParticleConfig, lo: i64, hi: i64, q: f64) -> Result<Self> {
        Self::build_capped(particles, lo, hi, q, DEFAULT_STATE_CAP)
    }

    pub fn build_capped(particles: &ParticleConfig, lo: i64, hi: i64, q: f64, cap: usize) -> Result<Self> {
        if hi < lo {
            return invalid(format!("empty window [{lo}, {hi}]"));
        }
        if !(q >= 0.0 && q.is_finite()) {
            return invalid(format!("q must be finite and nonnegative, got {q}"));
        }
        if particles.positions().iter().any(|&x| x < lo || x > hi) {
            return invalid("initial particles must lie inside the window");
        }
        let len = usize::try_from(hi - lo + 1).map_err(|_| Error::Overflow("window length".into()))?;
        let r = particles.colours() as usize;
        let mut counts = vec![0usize; r + 1];
        for &c in particles.species() {
            counts[c as usize] += 1;
        }
        counts[0] = len.checked_sub(particles.n()).ok_or_else(|| Error::InvalidInput("window too small".into()))?;
        let mut states = Vec::new();
        arrangements(&mut Vec::with_capacity(len), &mut counts, len, &mut states, cap)?;
        let index: HashMap<Vec<u8>, usize> = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let mut rows = Vec::with_capacity(states.len());
        let mut leak = Vec::with_capacity(states.len());
        for s in &states {
            let mut row = Vec::new();
            for x in 0..len - 1 {
                let (a, b) = (s[x], s[x + 1]);
                let rate = if a > b {
                    1.0
                } else if a < b {
                    q
                } else {
                    0.0
                };
                if rate > 0.0 {
                    let mut t = s.clone();
                    t.swap(x, x + 1);
                    row.push((index[&t], rate));
                }
            }
            let mut out = 0.0;
            if s[len - 1] > 0 {
                out += 1.0;
            }
            if s[0] > 0 {
                out += q;
            }
            rows.push(row);
            leak.push(out);
        }
        Ok(Self { lo, hi, q, states, index, rows, leak })
    }

    /// Number of in-window states (the sink is extra).
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Total exit rate of state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|e| e.1).sum::<f64>() + self.leak[i]
    }

    /// Dense row `i` of the generator, sink column last.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.dim() + 1];
        for &(j, r) in &self.rows[i] {
            row[j] += r;
        }
        row[self.dim()] = self.leak[i];
        row[i] -= self.exit_rate(i);
        row
    }

    pub fn state_of(&self, c: &ParticleConfig) -> Option<usize> {
        if c.positions().iter().any(|&x| x < self.lo || x > self.hi) {
            return None;
        }
        let mut w = vec![0u8; (self.hi - self.lo + 1) as usize];
        for (&x, &col) in c.positions().iter().zip(c.species()) {
            w[(x - self.lo) as usize] = col;
        }
        self.index.get(&w).copied()
    }

    pub fn config_of(&self, i: usize) -> ParticleConfig {
        let (mut pos, mut col) = (Vec::new(), Vec::new());
        for (k, &c) in self.states[i].iter().enumerate() {
            if c > 0 {
                pos.push(self.lo + k as i64);
                col.push(c);
            }
        }
        ParticleConfig::new(pos, col).expect("window words are ordered")
    }

    /// Row `mu` of `exp(Qt)` by uniformization.
    pub fn evolve(&self, mu: &ParticleConfig, t: f64) -> Result<Distribution> {
        if !(t >= 0.0 && t.is_finite()) {
            return invalid(format!("time must be finite and nonnegative, got {t}"));
        }
        let start = self.state_of(mu).ok_or_else(|| Error::InvalidInput("initial state outside window".into()))?;
        let d = self.dim();
        let lambda = (0..d).map(|i| self.exit_rate(i)).fold(0.0, f64::max);
        let lt = lambda * t;
        if lt > 600.0 {
            return Err(Error::ResourceLimit { what: format!("uniformization with rate*time {lt:.1}"), cap: 600 });
        }
        let mut v = vec![0.0; d];
        v[start] = 1.0;
        let mut sink = 0.0;
        let mut acc = vec![0.0; d];
        let mut acc_sink = 0.0;
        let mut weight = (-lt).exp();
        let mut mass = 0.0;
        let mut k = 0u64;
        loop {
            for i in 0..d {
                acc[i] += weight * v[i];
            }
            acc_sink += weight * sink;
            mass += weight;
            if lambda == 0.0 || 1.0 - mass < 1e-16 || (k as f64 > lt && weight < 1e-20) {
                break;
            }
            let mut w = v.clone();
            for i in 0..d {
                let vi = v[i];
                if vi == 0.0 {
                    continue;
                }
                for &(j, r) in &self.rows[i] {
                    w[j] += vi * r / lambda;
                }
                w[i] -= vi * self.exit_rate(i) / lambda;
                sink += vi * self.leak[i] / lambda;
            }
            v = w;
            k += 1;
            weight *= lt / k as f64;
        }
        let tail = 1.0 - mass;
        for i in 0..d {
            acc[i] += tail * v[i];
        }
        acc_sink += tail * sink;
        Ok(Distribution { probs: acc, sink: acc_sink })
    }

    /// `[exp(Qt)]_{mu,nu}` and the mass lost through the window edges.
    pub fn expm_transition(&self, mu: &ParticleConfig, nu: &ParticleConfig, t: f64) -> Result<(f64, f64)> {
        let dist = self.evolve(mu, t)?;
        let j = self.state_of(nu).ok_or_else(|| Error::InvalidInput("target state outside window".into()))?;
        Ok((dist.probs[j], dist.sink))
    }
}

/// A row of the truncated transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub probs: Vec<f64>,
    pub sink: f64,
}

/// Window `[min μ - ⌈4√t⌉ - 2, max ν + ⌈t + 4√t⌉ + 2]`.
pub fn heuristic_window(mu: &ParticleConfig, nu: &ParticleConfig, t: f64) -> (i64, i64) {
    let st = (4.0 * t.sqrt()).ceil() as i64;
    let all = || mu.positions().iter().chain(nu.positions());
    let lo = all().min().copied().unwrap_or(0) - st - 2;
    let hi = all().max().copied().unwrap_or(0) + (t + 4.0 * t.sqrt()).ceil() as i64 + 2;
    (lo, hi)
}

/// Smallest `k` with `P(Poisson(lambda) > k) < eps`.
pub fn poisson_quantile(lambda: f64, eps: f64) -> i64 {
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0i64;
    while 1.0 - cdf >= eps && k < 10_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Window wide enough that the occupied region leaves it with probability below `eps`.
pub fn auto_window(mu: &ParticleConfig, q: f64, t: f64, eps: f64) -> (i64, i64) {
    let lo = mu.positions()[0] - poisson_quantile(q * t, eps) - 1;
    let hi = mu.positions()[mu.n() - 1] + poisson_quantile(t, eps) + 1;
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(x: i64) -> ParticleConfig {
        ParticleConfig::new(vec![x], vec![1]).unwrap()
    }

    #[test]
    fn gillespie_time_zero_identity() {
        let c = ParticleConfig::two_species(vec![0, 3], &[1]).unwrap();
        assert_eq!(gillespie_run(&c, 0.5, 0.0, &mut sample_rng(1, 0)), c);
    }

    #[test]
    fn gillespie_single_particle_mean() {
        let n = 100_000u64;
        let total: i64 = (0..n).map(|k| gillespie_run(&single(0), 0.0, 1.0, &mut sample_rng(7, k)).positions()[0]).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn gillespie_holding_time() {
        let c = ParticleConfig::new(vec![0, 1], vec![1, 1]).unwrap();
        let spec = SimulationSpec { initial: InitialCondition::Fixed(c.clone()), q: 0.0, horizon: 0.5, seed: 3, samples: 100_000 };
        let est = estimate_transition(&spec, &c).unwrap();
        assert!((est.estimate - (-0.5f64).exp()).abs() < 0.005);
    }

    #[test]
    fn estimate_examples() {
        let c = single(0);
        let spec = SimulationSpec { initial: InitialCondition::Fixed(c.clone()), q: 0.0, horizon: 0.0, seed: 1, samples: 100 };
        let est = estimate_transition(&spec, &c).unwrap();
        assert_eq!((est.estimate, est.stderr), (1.0, 0.0));
        let spec = SimulationSpec { horizon: 1.0, samples: 100_000, ..spec };
        let est = estimate_transition(&spec, &single(1)).unwrap();
        assert!((est.estimate - (-1f64).exp()).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn generator_examples() {
        let g = WindowGenerator::build(&single(0), 0, 2, 0.0).unwrap();
        assert_eq!(g.dim(), 3);
        let i0 = g.state_of(&single(0)).unwrap();
        let i1 = g.state_of(&single(1)).unwrap();
        assert_eq!(g.dense_row(i0)[i1], 1.0);
        let c = ParticleConfig::new(vec![0, 1], vec![1, 2]).unwrap();
        let g = WindowGenerator::build(&c, 0, 3, 0.5).unwrap();
        assert_eq!(g.dim(), 12);
        let mut seen = std::collections::BTreeSet::new();
        for a in 0..4i64 {
            for b in 0..4i64 {
                if a != b {
                    seen.insert(ParticleConfig::from_colour_positions(&[a, b]).unwrap());
                }
            }
        }
        assert_eq!(seen.len(), 12);
        for s in &seen {
            assert!(g.state_of(s).is_some());
        }
        for i in 0..g.dim() {
            assert_eq!(g.dense_row(i).iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn state_cap() {
        let c = ParticleConfig::new(vec![0, 1, 2], vec![1, 2, 3]).unwrap();
        assert!(matches!(WindowGenerator::build_capped(&c, 0, 30, 0.0, 1000), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn expm_examples() {
        let g = WindowGenerator::build(&single(0), 0, 20, 0.0).unwrap();
        let (v, _) = g.expm_transition(&single(0), &single(0), 0.0).unwrap();
        assert_eq!(v, 1.0);
        let (v, _) = g.expm_transition(&single(0), &single(3), 1.0).unwrap();
        assert!((v - (-1f64).exp() / 6.0).abs() < 1e-12);
        assert!(g.expm_transition(&single(0), &single(3), -1.0).is_err());
    }

    #[test]
    fn expm_mass_balance() {
        let c = ParticleConfig::new(vec![0, 1], vec![2, 1]).unwrap();
        let g = WindowGenerator::build(&c, -3, 5, 0.4).unwrap();
        let d = g.evolve(&c, 1.2).unwrap();
        let total: f64 = d.probs.iter().sum::<f64>() + d.sink;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(d.probs.iter().all(|&p| p >= -1e-15));
    }

    #[test]
    fn gillespie_matches_expm() {
        let cases = [
            (ParticleConfig::new(vec![0, 1], vec![2, 1]).unwrap(), 0.0, 1.0),
            (ParticleConfig::new(vec![0, 2], vec![1, 2]).unwrap(), 0.5, 0.8),
            (ParticleConfig::new(vec![0, 1, 2], vec![2, 1, 1]).unwrap(), 0.0, 0.7),
            (ParticleConfig::new(vec![-1, 0, 2], vec![3, 1, 2]).unwrap(), 0.3, 0.6),
        ];
        for (k, (mu, q, t)) in cases.into_iter().enumerate() {
            let (lo, hi) = auto_window(&mu, q, t, 1e-10);
            let g = WindowGenerator::build(&mu, lo, hi, q).unwrap();
            let d = g.evolve(&mu, t).unwrap();
            assert!(d.sink < 1e-6);
            let spec = SimulationSpec { initial: InitialCondition::Fixed(mu.clone()), q, horizon: t, seed: 11 + k as u64, samples: 40_000 };
            let emp = empirical_distribution(&spec).unwrap();
            for (c, hits) in emp.iter().take(5) {
                let p = d.probs[g.state_of(c).unwrap()];
                let est = *hits as f64 / spec.samples as f64;
                let se = (p * (1.0 - p) / spec.samples as f64).sqrt();
                assert!((est - p).abs() < 4.0 * se + 1e-4, "{c:?}: {est} vs {p}");
            }
        }
    }

    #[test]
    fn type1_never_overtakes_type2_without_backhops() {
        let c = ParticleConfig::two_species(vec![0, 1, 2, 3], &[1, 3]).unwrap();
        for k in 0..200 {
            let (_, log) = gillespie_run_logged(&c, 0.0, 3.0, &mut sample_rng(5, k));
            for e in log {
                assert!(e.before.0 > e.before.1, "forbidden exchange {e:?}");
            }
        }
    }

    #[test]
    fn bernoulli_step_examples() {
        let mut rng = sample_rng(0, 0);
        let c = sample_bernoulli_step(1.0, 2, 3, &mut rng).unwrap();
        assert_eq!(c.positions(), &[-2, -1, 0]);
        assert_eq!(c.type2_indices(), vec![1, 2]);
        let c = sample_bernoulli_step(0.3, 0, 3, &mut rng).unwrap();
        assert_eq!(c.positions(), &[0, 1, 2]);
        let n = 100_000;
        let hits = (0..n)
            .filter(|&k| sample_bernoulli_step(0.5, 2, 2, &mut sample_rng(9, k)).unwrap().positions() == [-2, -1])
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }
}
