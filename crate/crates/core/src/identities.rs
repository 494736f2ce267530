//! Numerical witnesses for the algebraic facts the integral formulas rest on: free evolution,
//! boundary conditions, factorization and symmetrization identities, removable poles and the
//! initial condition, plus the vertex-model property checks.

use crate::error::{Error, Result};
use crate::formulas::{eigenfunction_p, two_tasep_green, two_tasep_green_quadrature, FormulaOptions, GreenQuery};
use crate::oracle::sample_rng;
use crate::quadrature::{circle_integrate, pow_i, ContourSpec, QuadratureOptions};
use crate::types::{
    enumerate_permutations, validate_standard_regime, ComplexPoint, ParticleConfig, DEFAULT_FACTORIAL_CAP,
};
use crate::vertex::{
    cauchy_check, f_anti_dominant, f_lambda_sym, f_mu, f_rearrangement_sum, orthogonality_check, sf_f_lambda,
    sf_f_lambda_det, stochastic_weights_check, Perturbation, VertexWeights, WeightEntry,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

type C = ComplexPoint;

pub const IDENTITY_THRESHOLD: f64 = 1e-10;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Minimum distance kept between random spectral points and any declared pole.
pub const POLE_MARGIN: f64 = 0.05;

/// Outcome of one identity over a set of sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub samples: usize,
    pub max_rel_err: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(name: impl Into<String>, threshold: f64) -> Self {
        Self { name: name.into(), samples: 0, max_rel_err: 0.0, threshold, pass: true }
    }

    /// Record one comparison; relative error uses `max(1, |rhs|)` as denominator.
    pub fn record(&mut self, lhs: C, rhs: C) {
        self.record_err(rel_err(lhs, rhs));
    }

    pub fn record_err(&mut self, err: f64) {
        self.samples += 1;
        // NaN must fail
        self.max_rel_err = if err.is_nan() || self.max_rel_err.is_nan() { f64::NAN } else { self.max_rel_err.max(err) };
        self.pass = self.max_rel_err < self.threshold;
    }

    /// Combine with another report for the same identity.
    pub fn merge(mut self, other: &IdentityReport) -> Self {
        self.samples += other.samples - 1;
        self.threshold = self.threshold.max(other.threshold);
        self.record_err(other.max_rel_err);
        self
    }

    fn single(name: &str, threshold: f64, lhs: C, rhs: C) -> Self {
        let mut r = Self::new(name, threshold);
        r.record(lhs, rhs);
        r
    }
}

pub fn rel_err(lhs: C, rhs: C) -> f64 {
    (lhs - rhs).norm() / rhs.norm().max(1.0)
}

fn vandermonde(z: &[C]) -> C {
    let mut v = C::new(1.0, 0.0);
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            v *= z[j] - z[i];
        }
    }
    v
}

fn eig(nu: &[i64], p: &[usize], t: f64, z: &[C], u: &[C]) -> Result<C> {
    eigenfunction_p(nu, p, t, z, u, DEFAULT_FACTORIAL_CAP)
}

// ---------------------------------------------------------------------------
// eigenfunction

/// Central-difference errors of the free evolution equation at steps `h` and `h/2`.
pub fn free_evolution_errors(nu: &[i64], p: &[usize], t: f64, z: &[C], u: &[C], h: f64) -> Result<(f64, f64)> {
    let rhs = free_evolution_rhs(nu, p, t, z, u)?;
    let d = |h: f64| -> Result<C> { Ok((eig(nu, p, t + h, z, u)? - eig(nu, p, t - h, z, u)?) / (2.0 * h)) };
    Ok((rel_err(d(h)?, rhs), rel_err(d(h / 2.0)?, rhs)))
}

fn free_evolution_rhs(nu: &[i64], p: &[usize], t: f64, z: &[C], u: &[C]) -> Result<C> {
    if nu.windows(2).any(|w| w[1] - w[0] < 2) {
        return Err(Error::InvalidInput(format!("free evolution needs gaps of at least 2: {nu:?}")));
    }
    let mut rhs = -(nu.len() as f64) * eig(nu, p, t, z, u)?;
    for i in 0..nu.len() {
        let mut shifted = nu.to_vec();
        shifted[i] -= 1;
        rhs += eig(&shifted, p, t, z, u)?;
    }
    Ok(rhs)
}

/// The time derivative of the eigenfunction (Richardson-extrapolated central differences)
/// against the free evolution right-hand side.
pub fn check_free_evolution(nu: &[i64], p: &[usize], t: f64, z: &[C], u: &[C], h: f64) -> Result<IdentityReport> {
    let rhs = free_evolution_rhs(nu, p, t, z, u)?;
    let d = |h: f64| -> Result<C> { Ok((eig(nu, p, t + h, z, u)? - eig(nu, p, t - h, z, u)?) / (2.0 * h)) };
    let extrapolated = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
    Ok(IdentityReport::single("free_evolution", IDENTITY_THRESHOLD, extrapolated, rhs))
}

/// Which boundary condition applies to the adjacent pair `(l, l+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    /// Type 2 followed by type 1: the collision amplitude vanishes.
    TwoThenOne,
    /// Type 1 followed by type 2: three-term exchange relation.
    OneThenTwo,
    /// Same types: ordinary exclusion.
    SameType,
}

impl BoundaryCase {
    pub fn of(p: &[usize], l: usize) -> Self {
        match (p.contains(&l), p.contains(&(l + 1))) {
            (true, false) => Self::TwoThenOne,
            (false, true) => Self::OneThenTwo,
            _ => Self::SameType,
        }
    }
}

/// Boundary condition at the coincident pair `ν_l = ν_{l+1}` (1-based `l`).
pub fn check_boundary_conditions(nu: &[i64], p: &[usize], l: usize, case: BoundaryCase, z: &[C], u: &[C], t: f64) -> Result<IdentityReport> {
    let n = nu.len();
    if l == 0 || l >= n {
        return Err(Error::InvalidInput(format!("pair index {l} outside 1..{n}")));
    }
    if nu[l] != nu[l - 1] {
        return Err(Error::InvalidInput(format!("ν_{} and ν_{} must coincide", l, l + 1)));
    }
    if BoundaryCase::of(p, l) != case {
        return Err(Error::InvalidInput(format!("type pattern at {l} is {:?}, not {case:?}", BoundaryCase::of(p, l))));
    }
    let lhs = eig(nu, p, t, z, u)?;
    let mut apart = nu.to_vec();
    apart[l] += 1;
    let (name, rhs) = match case {
        BoundaryCase::TwoThenOne => ("boundary_two_then_one", C::new(0.0, 0.0)),
        BoundaryCase::SameType => ("boundary_same_type", eig(&apart, p, t, z, u)?),
        BoundaryCase::OneThenTwo => {
            let mut swapped: Vec<usize> = p.iter().map(|&i| if i == l + 1 { l } else { i }).collect();
            swapped.sort_unstable();
            ("boundary_one_then_two", eig(&apart, &swapped, t, z, u)? + eig(&apart, p, t, z, u)?)
        }
    };
    Ok(IdentityReport::single(name, IDENTITY_THRESHOLD, lhs, rhs))
}

/// The `u`-dependence of the eigenfunction factorizes when type 2 occupies the last `m` indices.
///
/// `pi` is a permutation of `0..n`.
pub fn check_u_factorization(z: &[C], u: &[C], pi: &[usize]) -> Result<IdentityReport> {
    let (n, m) = (z.len(), u.len());
    if pi.len() != n || m > n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.len() });
    }
    let one = C::new(1.0, 0.0);
    let zp: Vec<C> = pi.iter().map(|&k| z[k]).collect();
    let mut lhs = C::new(0.0, 0.0);
    for (sg, sign) in enumerate_permutations(m)? {
        let mut term = C::new(sign as f64, 0.0);
        for i in 1..=m {
            let us = u[sg[i - 1]];
            term *= pow_i((one - u[i - 1]) / (one - us), i as i64);
            for zj in &zp[..n - m + i - 1] {
                term *= us - zj;
            }
        }
        lhs += term;
    }
    let mut rhs = one;
    for i in 0..m {
        for zj in &zp[..n - m] {
            rhs *= u[i] - zj;
        }
        for j in i + 1..m {
            rhs *= u[i] - u[j];
        }
        rhs /= pow_i(one - u[i], (m - i - 1) as i64);
    }
    for i in 1..m {
        rhs *= pow_i(zp[n - m + i - 1] - 1.0, (m - i) as i64);
    }
    Ok(IdentityReport::single("u_factorization", IDENTITY_THRESHOLD, lhs, rhs))
}

/// Residue at `u_k = z_l` (1-based, `l < k`) of the `u_k`-dependence of the integrand when type 2
/// starts leftmost, after `u_i = z_i` has been substituted for `i <= l`.
///
/// With `single = Some(σ)` only that permutation term is kept; its residue is generally nonzero.
pub fn removable_pole_residue(z: &[C], u: &[C], pi: &[usize], p: &[usize], l: usize, k: usize, single: Option<&[usize]>) -> Result<C> {
    let (n, m) = (z.len(), u.len());
    if !(1 <= l && l < k && k <= m && m <= n) || p.len() != m || pi.len() != n {
        return Err(Error::InvalidInput(format!("need 1 <= l < k <= m <= n, got l={l}, k={k}, m={m}, n={n}")));
    }
    let one = C::new(1.0, 0.0);
    let mut uu = u.to_vec();
    uu[..l].copy_from_slice(&z[..l]);
    let perms = match single {
        Some(s) => vec![(s.to_vec(), crate::types::permutation_sign(s))],
        None => enumerate_permutations(m)?,
    };
    let center = z[l - 1];
    let mut dist = (one - center).norm();
    for (j, &zj) in z.iter().enumerate() {
        if j != l - 1 {
            dist = dist.min((zj - center).norm());
        }
    }
    let c = ContourSpec::new(center, 0.3 * dist, 1, 256)?;
    let f = |x: C| {
        let mut w = uu.clone();
        w[k - 1] = x;
        let mut total = C::new(0.0, 0.0);
        for (sg, sign) in &perms {
            let mut term = C::new(*sign as f64, 0.0);
            for i in 1..=m {
                let us = w[sg[i - 1]];
                term *= pow_i((one - w[i - 1]) / (one - us), i as i64);
                for j in 1..p[i - 1] {
                    term *= us - z[pi[j - 1]];
                }
            }
            total += term;
        }
        for zj in &z[..k] {
            total /= x - zj;
        }
        total
    };
    circle_integrate(f, &c)
}

/// All residues `u_k = z_l`, `l < k`, vanish for the full permutation sum.
pub fn check_removable_poles(z: &[C], u: &[C], pi: &[usize], p: &[usize]) -> Result<IdentityReport> {
    let m = u.len();
    let mut rep = IdentityReport::new("removable_poles", IDENTITY_THRESHOLD);
    for k in 2..=m {
        for l in 1..k {
            rep.record(removable_pole_residue(z, u, pi, p, l, k, None)?, C::new(0.0, 0.0));
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// summation identities

fn nested_sum(z: &[f64], zc: &[C], s2: i64, top: i64) -> (C, f64) {
    // prefix[v] accumulates all chains ending strictly below v
    let len = (top - s2 + 1) as usize;
    let mut cur: Vec<C> = (0..len).map(|v| pow_i(zc[0], s2 + v as i64)).collect();
    let mut cur_abs: Vec<f64> = (0..len).map(|v| z[0].powi((s2 + v as i64) as i32)).collect();
    for i in 1..zc.len() {
        let mut next = vec![C::new(0.0, 0.0); len];
        let mut next_abs = vec![0.0; len];
        let (mut acc, mut acc_abs) = (C::new(0.0, 0.0), 0.0);
        for v in 0..len {
            next[v] = acc * pow_i(zc[i], s2 + v as i64);
            next_abs[v] = acc_abs * z[i].powi((s2 + v as i64) as i32);
            acc += cur[v];
            acc_abs += cur_abs[v];
        }
        cur = next;
        cur_abs = next_abs;
    }
    (cur.iter().sum(), cur_abs.iter().sum())
}

fn nested_closed_form(z: &[C], s2: i64) -> C {
    let m = z.len();
    let mut v = C::new(1.0, 0.0);
    for i in 0..m {
        let tail: C = z[i..].iter().product();
        v *= pow_i(z[i], s2 + i as i64) / (1.0 - tail);
    }
    v
}

/// Nested geometric series summed with every index at most `s2 + m - 1 + depth`, against its
/// closed form. The threshold is widened to the rigorous tail bound obtained from `|z|`.
pub fn check_nested_geometric(z: &[C], s2: i64, depth: usize) -> Result<IdentityReport> {
    let m = z.len();
    for i in 0..m {
        let r: f64 = z[i..].iter().map(|x| x.norm()).product();
        if r >= 1.0 {
            return Err(Error::InvalidInput(format!("nested series diverges: |z_{}...z_{}| = {r}", i + 1, m)));
        }
    }
    let top = s2 + m as i64 - 1 + depth as i64;
    let moduli: Vec<f64> = z.iter().map(|x| x.norm()).collect();
    let (lhs, lhs_abs) = nested_sum(&moduli, z, s2, top);
    let rhs = nested_closed_form(z, s2);
    let abs_full = nested_closed_form(&moduli.iter().map(|&r| C::new(r, 0.0)).collect::<Vec<_>>(), s2).re;
    let tail = (abs_full - lhs_abs).max(0.0) + 1e-15 * abs_full;
    let mut rep = IdentityReport::new("nested_geometric", IDENTITY_THRESHOLD.max(2.0 * tail / rhs.norm().max(1.0)));
    rep.record(lhs, rhs);
    Ok(rep)
}

/// Alternating permutation sum that collapses to the Vandermonde product.
pub fn check_symmetrization(z: &[C]) -> Result<IdentityReport> {
    let m = z.len();
    let one = C::new(1.0, 0.0);
    let mut lhs = C::new(0.0, 0.0);
    for (sg, sign) in enumerate_permutations(m)? {
        let w: Vec<C> = sg.iter().map(|&k| z[k]).collect();
        let mut term = C::new(sign as f64, 0.0);
        for i in 0..m {
            let tail: C = w[i..].iter().product();
            term *= pow_i(w[i], i as i64) * pow_i(one - w[i], (m - i) as i64) / (one - tail);
        }
        lhs += term;
    }
    Ok(IdentityReport::single("symmetrization", IDENTITY_THRESHOLD, lhs, vandermonde(z)))
}

/// The same identity in the form used for the crossing sum: alternating sum over
/// `z^{s2+i-1} / ((1-z)^i (1 - z_i...z_m))` equals `Δ(z) ∏ z^{s2} / (z-1)^{m+1}`.
pub fn check_symmetrization_crossing(z: &[C], s2: i64) -> Result<IdentityReport> {
    let m = z.len();
    let one = C::new(1.0, 0.0);
    let mut lhs = C::new(0.0, 0.0);
    for (sg, sign) in enumerate_permutations(m)? {
        let w: Vec<C> = sg.iter().map(|&k| z[k]).collect();
        let mut term = C::new(sign as f64, 0.0);
        for i in 0..m {
            let tail: C = w[i..].iter().product();
            term *= pow_i(w[i], s2 + i as i64) / (pow_i(one - w[i], i as i64 + 1) * (one - tail));
        }
        lhs += term;
    }
    let mut rhs = vandermonde(z);
    for &x in z {
        rhs *= pow_i(x, s2) / pow_i(x - 1.0, m as i64 + 1);
    }
    Ok(IdentityReport::single("symmetrization_crossing", IDENTITY_THRESHOLD, lhs, rhs))
}

/// Bernoulli variant: alternating sum of `((1-z)/z)^i / (1 - (1-ρ) z_1...z_i)`.
pub fn check_symmetrization_bernoulli(z: &[C], rho: f64) -> Result<IdentityReport> {
    let m = z.len();
    let one = C::new(1.0, 0.0);
    let b = 1.0 - rho;
    let mut lhs = C::new(0.0, 0.0);
    for (sg, sign) in enumerate_permutations(m)? {
        let w: Vec<C> = sg.iter().map(|&k| z[k]).collect();
        let mut term = C::new(sign as f64, 0.0);
        for i in 0..m {
            let head: C = w[..=i].iter().product();
            term *= pow_i((one - w[i]) / w[i], i as i64 + 1) / (one - b * head);
        }
        lhs += term;
    }
    let mut rhs = C::new(1.0, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            rhs *= z[i] - z[j];
        }
        rhs *= (one - z[i]) / (pow_i(z[i], m as i64) * (one - b * z[i]));
    }
    Ok(IdentityReport::single("symmetrization_bernoulli", IDENTITY_THRESHOLD, lhs, rhs))
}

/// Sum of `(1-ρ)^{-μ_1} ∏ z_i^{-μ_i}` over `μ_1 < ... < μ_m < 0`, truncated at `μ_1 >= -depth-m`,
/// against its closed form.
pub fn check_bernoulli_geometric(z: &[C], rho: f64, depth: usize) -> Result<IdentityReport> {
    let m = z.len();
    let b = 1.0 - rho;
    // substitute ν_i = -μ_{m+1-i}: increasing indices 1 <= ν_1 < ... < ν_m
    let mut w: Vec<C> = z.iter().rev().copied().collect();
    w[m - 1] *= b;
    let moduli: Vec<f64> = w.iter().map(|x| x.norm()).collect();
    let top = depth as i64 + m as i64;
    let (lhs, lhs_abs) = nested_sum(&moduli, &w, 1, top);
    let mut rhs = C::new(b.powi(m as i32), 0.0);
    for i in 0..m {
        let head: C = z[..=i].iter().product();
        rhs *= pow_i(z[i], (m - i) as i64) / (1.0 - b * head);
    }
    let abs_full = nested_closed_form(&moduli.iter().map(|&r| C::new(r, 0.0)).collect::<Vec<_>>(), 1).re;
    let tail = (abs_full - lhs_abs).max(0.0) + 1e-15 * abs_full;
    let mut rep = IdentityReport::new("bernoulli_geometric", IDENTITY_THRESHOLD.max(2.0 * tail / rhs.norm().max(1.0)));
    rep.record(lhs, rhs);
    Ok(rep)
}

// ---------------------------------------------------------------------------
// initial condition

fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, m, &mut Vec::new(), &mut out);
    out
}

fn positions_near(mu: &[i64], spread: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &x in mu {
        let mut next = Vec::new();
        for pre in &out {
            for d in -1..=spread {
                let v = x + d;
                if pre.last().map_or(true, |&last| last < v) {
                    let mut c: Vec<i64> = pre.clone();
                    c.push(v);
                    next.push(c);
                }
            }
        }
        out = next;
    }
    out
}

/// The Green's function integral at `t = 0` is the indicator of the initial configuration, for
/// every `(ν, p)` with each `ν_i` in `[μ_i - 1, μ_i + spread]`.
pub fn check_initial_condition(mu: &ParticleConfig, spread: i64, opts: &FormulaOptions) -> Result<IdentityReport> {
    let mut rep = IdentityReport::new("initial_condition", 1e-8);
    let m = mu.m();
    for nu_pos in positions_near(mu.positions(), spread) {
        for p in subsets(mu.n(), m) {
            let nu = ParticleConfig::two_species(nu_pos.clone(), &p)?;
            let want = if nu == *mu { 1.0 } else { 0.0 };
            let q = GreenQuery::new(mu.clone(), nu.clone(), 0.0);
            let got = if validate_standard_regime(mu, &nu)? {
                two_tasep_green_quadrature(&q, opts)?.value
            } else {
                two_tasep_green(&q, opts)?.value
            };
            rep.record_err((got - want).abs());
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// random sampling

fn random_annulus(rng: &mut impl Rng, lo: f64, hi: f64) -> C {
    C::from_polar(rng.gen_range(lo..hi), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
}

/// `k` points with `lo <= |z| <= hi`, pairwise and from `1` separated by [`POLE_MARGIN`].
fn spectral_points(rng: &mut impl Rng, k: usize, lo: f64, hi: f64, avoid: &[C]) -> Vec<C> {
    let mut pts: Vec<C> = Vec::with_capacity(k);
    while pts.len() < k {
        let z = random_annulus(rng, lo, hi);
        let far = pts.iter().chain(avoid).all(|&w| (w - z).norm() > POLE_MARGIN) && (z - 1.0).norm() > POLE_MARGIN;
        if far {
            pts.push(z);
        }
    }
    pts
}

fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

fn random_positions(rng: &mut impl Rng, n: usize, min_gap: i64) -> Vec<i64> {
    let mut v = Vec::with_capacity(n);
    let mut x = rng.gen_range(-3..=1);
    for _ in 0..n {
        v.push(x);
        x += min_gap + rng.gen_range(0..=2);
    }
    v
}

/// Seed and sample count for the randomized checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub samples: usize,
    /// Scale one weight family by this factor in the sum-to-unity check.
    #[serde(default)]
    pub perturb: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, samples: DEFAULT_SAMPLES, perturb: None }
    }
}

/// Evaluate `check` on `samples` independent random streams (in parallel) and merge the reports.
fn sampled<F>(name: &str, cfg: &SuiteConfig, stream: u64, check: F) -> Result<IdentityReport>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<IdentityReport> + Sync,
{
    let reports: Vec<IdentityReport> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15), i as u64);
            check(&mut rng)
        })
        .collect::<Result<_>>()?;
    let mut out = IdentityReport::new(name, IDENTITY_THRESHOLD);
    for r in &reports {
        out.threshold = out.threshold.max(r.threshold);
        out.samples += r.samples;
        out.max_rel_err = if r.max_rel_err.is_nan() { f64::NAN } else { out.max_rel_err.max(r.max_rel_err) };
    }
    out.pass = out.max_rel_err < out.threshold;
    Ok(out)
}

/// Every eigenfunction and summation identity at `cfg.samples` random points, plus the
/// initial-condition sweep.
pub fn identity_suite(cfg: &SuiteConfig) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    out.push(sampled("free_evolution", cfg, 1, |rng| {
        let (n, m) = if rng.gen_bool(0.5) { (2, 1) } else { (3, 1 + rng.gen_range(0..2)) };
        let nu = random_positions(rng, n, 2);
        let p = random_perm(rng, n)[..m].iter().map(|x| x + 1).collect::<Vec<_>>();
        let mut p = p;
        p.sort_unstable();
        let z = spectral_points(rng, n, 0.3, 0.7, &[]);
        let u = spectral_points(rng, m, 0.3, 0.7, &z);
        check_free_evolution(&nu, &p, rng.gen_range(0.2..1.5), &z, &u, 1e-3)
    })?);
    for (stream, case) in [(2, BoundaryCase::TwoThenOne), (3, BoundaryCase::OneThenTwo), (4, BoundaryCase::SameType)] {
        let name = match case {
            BoundaryCase::TwoThenOne => "boundary_two_then_one",
            BoundaryCase::OneThenTwo => "boundary_one_then_two",
            BoundaryCase::SameType => "boundary_same_type",
        };
        out.push(sampled(name, cfg, stream, |rng| {
            let n = 2 + rng.gen_range(0..2);
            let l = 1 + rng.gen_range(0..n - 1);
            let mut nu = random_positions(rng, n, 2);
            let d = nu[l] - nu[l - 1];
            for x in &mut nu[l..] {
                *x -= d;
            }
            let mut p: Vec<usize> = (1..=n).filter(|&i| i != l && i != l + 1 && rng.gen_bool(0.5)).collect();
            match case {
                BoundaryCase::TwoThenOne => p.push(l),
                BoundaryCase::OneThenTwo => p.push(l + 1),
                BoundaryCase::SameType => {
                    if rng.gen_bool(0.5) {
                        p.extend([l, l + 1]);
                    }
                }
            }
            p.sort_unstable();
            let z = spectral_points(rng, n, 0.3, 0.7, &[]);
            let u = spectral_points(rng, p.len(), 0.3, 0.7, &z);
            check_boundary_conditions(&nu, &p, l, case, &z, &u, rng.gen_range(0.0..1.0))
        })?);
    }
    out.push(sampled("u_factorization", cfg, 5, |rng| {
        let m = 1 + rng.gen_range(0..3);
        let n = m + 1;
        let z = spectral_points(rng, n, 0.2, 0.8, &[]);
        let u = spectral_points(rng, m, 0.2, 0.8, &z);
        check_u_factorization(&z, &u, &random_perm(rng, n))
    })?);
    out.push(sampled("removable_poles", cfg, 6, |rng| {
        let m = 2 + rng.gen_range(0..2);
        let n = m + rng.gen_range(0..2);
        let z = spectral_points(rng, n, 0.3, 0.7, &[]);
        let u = spectral_points(rng, m, 0.3, 0.7, &z);
        let mut p: Vec<usize> = random_perm(rng, n)[..m].iter().map(|x| x + 1).collect();
        p.sort_unstable();
        check_removable_poles(&z, &u, &random_perm(rng, n), &p)
    })?);
    out.push(sampled("nested_geometric", cfg, 7, |rng| {
        let m = 1 + rng.gen_range(0..3);
        let z = spectral_points(rng, m, 0.2, 0.7, &[]);
        check_nested_geometric(&z, rng.gen_range(-2..3), 200)
    })?);
    out.push(sampled("symmetrization", cfg, 8, |rng| {
        let m = 1 + rng.gen_range(0..4);
        check_symmetrization(&spectral_points(rng, m, 0.2, 0.8, &[]))
    })?);
    out.push(sampled("symmetrization_crossing", cfg, 9, |rng| {
        let m = 1 + rng.gen_range(0..3);
        check_symmetrization_crossing(&spectral_points(rng, m, 0.2, 0.8, &[]), rng.gen_range(-2..3))
    })?);
    out.push(sampled("symmetrization_bernoulli", cfg, 10, |rng| {
        let m = 1 + rng.gen_range(0..3);
        check_symmetrization_bernoulli(&spectral_points(rng, m, 0.3, 0.9, &[]), rng.gen_range(0.1..0.9))
    })?);
    out.push(sampled("bernoulli_geometric", cfg, 11, |rng| {
        let m = 1 + rng.gen_range(0..2);
        let rho = rng.gen_range(0.3..0.9);
        let z = spectral_points(rng, m, 0.2, 0.8, &[]);
        check_bernoulli_geometric(&z, rho, 300)
    })?);
    let opts = FormulaOptions::default();
    let mut ic = IdentityReport::new("initial_condition", 1e-8);
    for (pos, p0) in [(vec![0, 1], vec![1]), (vec![0, 2], vec![2]), (vec![-1, 0, 2], vec![1])] {
        ic = ic.merge(&check_initial_condition(&ParticleConfig::two_species(pos, &p0)?, 1, &opts)?);
    }
    out.push(ic);
    Ok(out)
}

/// Vertex-model properties: stochasticity, factorization, stability, symmetrization,
/// the `q = 0` determinant, orthogonality and the truncated Cauchy sum.
pub fn vertex_suite(cfg: &SuiteConfig) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    let unity_cfg = SuiteConfig { samples: cfg.samples.min(20), ..*cfg };
    let mut unity = sampled("sum_to_unity", &unity_cfg, 21, |rng| {
        let mut w = VertexWeights::new(rng.gen_range(0.2..3.0), random_annulus(rng, 0.1, 0.8));
        if let Some(factor) = cfg.perturb {
            w = w.perturbed(Perturbation { entry: WeightEntry::TurnOut, factor });
        }
        let rep = stochastic_weights_check(&w, 2, 2, random_annulus(rng, 0.1, 0.9))?;
        let mut r = IdentityReport::new("sum_to_unity", 1e-12);
        r.record_err(rep.max_sum_error);
        Ok(r)
    })?;
    unity.threshold = 1e-12;
    unity.pass = unity.max_rel_err < unity.threshold;
    out.push(unity);
    out.push(sampled("f_anti_dominant", cfg, 22, |rng| {
        let s = random_annulus(rng, 0.2, 0.5);
        let n = 1 + rng.gen_range(0..3);
        let mut delta: Vec<i64> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        delta.sort_unstable();
        let z = spectral_points(rng, n, 0.2, 0.7, &[]);
        let q = rng.gen_range(0.3..2.5);
        Ok(IdentityReport::single("f_anti_dominant", IDENTITY_THRESHOLD, f_mu(&delta, &z, q, s)?, f_anti_dominant(&delta, &z, q, s)?))
    })?);
    out.push(sampled("block_factorization", cfg, 23, |rng| {
        let s = random_annulus(rng, 0.2, 0.5);
        let q = rng.gen_range(0.3..2.5);
        let lo = [rng.gen_range(0..2), rng.gen_range(0..2)];
        let hi = lo.iter().max().unwrap() + rng.gen_range(1..3);
        let z = spectral_points(rng, 3, 0.2, 0.7, &[]);
        let whole = f_mu(&[lo[0], lo[1], hi], &z, q, s)?;
        let parts = f_mu(&lo, &z[..2], q, s)? * f_mu(&[hi], &z[2..], q, s)?;
        Ok(IdentityReport::single("block_factorization", IDENTITY_THRESHOLD, whole, parts))
    })?);
    out.push(sampled("shift_stability", cfg, 24, |rng| {
        let s = random_annulus(rng, 0.2, 0.5);
        let q = rng.gen_range(0.3..2.5);
        let mu = [rng.gen_range(-2..3), rng.gen_range(-2..3)];
        let k = rng.gen_range(1..3);
        let z = spectral_points(rng, 2, 0.2, 0.7, &[]);
        let up = f_mu(&[mu[0] + k, mu[1] + k], &z, q, s)?;
        let fac: C = z.iter().map(|&x| pow_i((x - s) / (1.0 - s * x), k)).product();
        Ok(IdentityReport::single("shift_stability", IDENTITY_THRESHOLD, up, fac * f_mu(&mu, &z, q, s)?))
    })?);
    out.push(sampled("f_to_symmetric", cfg, 25, |rng| {
        let s = random_annulus(rng, 0.2, 0.5);
        let q = rng.gen_range(0.3..2.5);
        let l0 = rng.gen_range(0..3);
        let lambda = [l0 + rng.gen_range(0..2) + rng.gen_range(0..2), l0 + rng.gen_range(0..2), l0];
        let mut lambda = lambda;
        lambda.sort_unstable_by(|a, b| b.cmp(a));
        let z = spectral_points(rng, 3, 0.2, 0.7, &[]);
        Ok(IdentityReport::single(
            "f_to_symmetric",
            IDENTITY_THRESHOLD,
            f_rearrangement_sum(&lambda, &z, q, s)?,
            f_lambda_sym(&lambda, &z, q, s)?,
        ))
    })?);
    out.push(sampled("determinant_at_q0", cfg, 26, |rng| {
        let n = 1 + rng.gen_range(0..3);
        let mut lambda: Vec<i64> = Vec::new();
        let mut x = rng.gen_range(-1..2);
        for _ in 0..n {
            lambda.push(x);
            x -= 1 + rng.gen_range(0..2);
        }
        let u: Vec<C> = spectral_points(rng, n, 0.05, 0.3, &[]).into_iter().map(|d| d + 1.0).collect();
        Ok(IdentityReport::single("determinant_at_q0", IDENTITY_THRESHOLD, sf_f_lambda(&lambda, &u, 0.0)?, sf_f_lambda_det(&lambda, &u)?))
    })?);
    let qopts = QuadratureOptions { tol: 1e-10, ..Default::default() };
    let mut orth = IdentityReport::new("orthogonality", 1e-6);
    let (q, s) = (2.0, C::new(0.1, 0.0));
    for (mu, nu, radii) in [
        (vec![0], vec![0], vec![0.2]),
        (vec![1], vec![0], vec![0.2]),
        (vec![0], vec![2], vec![0.2]),
        (vec![1, 0], vec![1, 0], vec![0.2, 0.5]),
        (vec![1, 0], vec![0, 1], vec![0.2, 0.5]),
        (vec![0, 1], vec![0, 1], vec![0.2, 0.5]),
        (vec![2, 0], vec![1, 1], vec![0.2, 0.5]),
    ] {
        let want = if mu == nu { 1.0 } else { 0.0 };
        let v = orthogonality_check(&mu, &nu, q, s, Some(&radii), &qopts)?.value;
        orth.record_err((v - want).norm());
    }
    out.push(orth);
    let mut cauchy = IdentityReport::new("cauchy_truncated", 1.0);
    let (q, s) = (2.0, C::new(0.4, 0.0));
    for (nu, z, depth) in [
        (vec![0], vec![C::new(0.3, 0.0)], 30),
        (vec![2], vec![C::new(0.2, 0.15)], 30),
        (vec![1, 0], vec![C::new(0.3, 0.0), C::new(0.25, 0.1)], 12),
    ] {
        let rep = cauchy_check(&nu, &z, &[C::new(0.2, 0.0)], q, s, depth)?;
        // ratio of the error to its bound; below one means within the tail bound
        cauchy.record_err((rep.lhs - rep.rhs).norm() / rep.tail_bound);
    }
    out.push(cauchy);
    Ok(out)
}

/// Sum-to-unity with one weight family scaled by `1 + eps`; a sound suite reports failure.
pub fn negative_control(eps: f64) -> Result<IdentityReport> {
    let w = VertexWeights::new(1.7, C::new(0.3, 0.1)).perturbed(Perturbation { entry: WeightEntry::TurnOut, factor: 1.0 + eps });
    let rep = stochastic_weights_check(&w, 2, 2, C::new(0.2, 0.3))?;
    let mut r = IdentityReport::new("negative_control_perturbed_weights", 1e-12);
    r.record_err(rep.max_sum_error);
    Ok(r)
}

/// Result of the whole verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub reports: Vec<IdentityReport>,
    pub negative_control: IdentityReport,
    /// All reports pass and the negative control fails.
    pub pass: bool,
}

pub fn verify_all(cfg: &SuiteConfig) -> Result<VerifySummary> {
    if cfg.samples == 0 {
        return Err(Error::InvalidInput("at least one sample per identity is required".into()));
    }
    let mut reports = identity_suite(cfg)?;
    reports.extend(vertex_suite(cfg)?);
    let negative_control = negative_control(0.01)?;
    let pass = reports.iter().all(|r| r.pass) && !negative_control.pass;
    Ok(VerifySummary { reports, negative_control, pass })
}
