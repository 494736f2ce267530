//! Coloured higher-spin vertex weights and the partition functions built from them.
//!
//! A vertex is labelled `(I, j; K, l)`: `I` and `K` are the colour counts on the bottom
//! and top edges, `j` is the incoming horizontal colour and `l` the outgoing one
//! (0 means empty). Rightward weights `L` build `f_μ`; leftward weights `M` build `G_{μ/ν}`.

use crate::error::{Error, Result};
use crate::quadrature::{product_integrate, pow_i, ContourProduct, ContourSpec, Integral, QuadratureOptions};
use crate::types::{check_separated, determinant, distinct_rearrangements, enumerate_permutations, multiplicities, q_pochhammer, ComplexPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

type C = ComplexPoint;

/// Colour counts on a vertical edge.
pub type ColourState = Vec<u8>;

/// Minimum pairwise separation of spectral parameters in symmetrized sums.
pub const MIN_SEPARATION: f64 = 1e-8;

/// The six non-zero families of the weight table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightEntry {
    /// `(I, 0; I, 0)`
    Empty,
    /// `(I, i; I, i)`
    Through,
    /// `(I, 0; I - e_i, i)`
    TurnOut,
    /// `(I, i; I + e_i, 0)`
    TurnUp,
    /// `(I, i; I + e_i - e_j, j)` with `i < j`
    SwapUp,
    /// `(I, j; I + e_j - e_i, i)` with `i < j`
    SwapDown,
}

/// Multiplies one family of weights by a constant; used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub entry: WeightEntry,
    pub factor: f64,
}

/// Which family `(I, j; K, l)` belongs to, or `None` when paths are not conserved.
pub fn classify(i_in: &[u8], j: usize, k_out: &[u8], l: usize) -> Option<WeightEntry> {
    let n = i_in.len();
    if k_out.len() != n || j > n || l > n {
        return None;
    }
    for c in 1..=n {
        let expected = i_in[c - 1] as i32 + i32::from(j == c) - i32::from(l == c);
        if expected != k_out[c - 1] as i32 {
            return None;
        }
    }
    Some(match (j, l) {
        (0, 0) => WeightEntry::Empty,
        (a, b) if a == b => WeightEntry::Through,
        (0, _) => WeightEntry::TurnOut,
        (_, 0) => WeightEntry::TurnUp,
        (a, b) if a < b => WeightEntry::SwapUp,
        _ => WeightEntry::SwapDown,
    })
}

/// `I_a + ... + I_n` with 1-based `a`.
fn tail(i_in: &[u8], a: usize) -> i32 {
    i_in.iter().skip(a.saturating_sub(1)).map(|&x| x as i32).sum()
}

/// Weight tables at fixed `(q, s)`, optionally perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexWeights {
    pub q: f64,
    pub s: C,
    pub perturbation: Option<Perturbation>,
}

impl VertexWeights {
    pub fn new(q: f64, s: C) -> Self {
        Self { q, s, perturbation: None }
    }

    pub fn perturbed(mut self, p: Perturbation) -> Self {
        self.perturbation = Some(p);
        self
    }

    fn l_raw(&self, i_in: &[u8], j: usize, k_out: &[u8], l: usize, z: C, q: f64, s: C) -> Result<C> {
        let Some(entry) = classify(i_in, j, k_out, l) else {
            return Ok(C::new(0.0, 0.0));
        };
        let den = 1.0 - s * z;
        if den.norm() == 0.0 {
            return Err(Error::Pole(format!("s*z = 1 at z = {z}")));
        }
        let qp = |e: i32| C::new(q.powi(e), 0.0);
        let num = match entry {
            WeightEntry::Empty => 1.0 - s * z * qp(tail(i_in, 1)),
            WeightEntry::Through => (z - s * qp(i_in[j - 1] as i32)) * qp(tail(i_in, j + 1)),
            WeightEntry::TurnOut => z * (1.0 - qp(i_in[l - 1] as i32)) * qp(tail(i_in, l + 1)),
            WeightEntry::TurnUp => 1.0 - s * s * qp(tail(i_in, 1)),
            WeightEntry::SwapUp => z * (1.0 - qp(i_in[l - 1] as i32)) * qp(tail(i_in, l + 1)),
            WeightEntry::SwapDown => s * (1.0 - qp(i_in[l - 1] as i32)) * qp(tail(i_in, l + 1)),
        };
        let factor = match self.perturbation {
            Some(p) if p.entry == entry => p.factor,
            _ => 1.0,
        };
        Ok(num / den * factor)
    }

    /// Rightward weight `L_z(I, j; K, l)`.
    pub fn l(&self, i_in: &[u8], j: usize, k_out: &[u8], l: usize, z: C) -> Result<C> {
        self.l_raw(i_in, j, k_out, l, z, self.q, self.s)
    }

    /// Leftward weight `M_z(I, j; K, l) = (-s)^{1[j>0] - 1[l>0]} L_{1/z, 1/q, 1/s}(I, j; K, l)`.
    pub fn m(&self, i_in: &[u8], j: usize, k_out: &[u8], l: usize, z: C) -> Result<C> {
        if z.norm() == 0.0 || self.s.norm() == 0.0 || self.q == 0.0 {
            return Err(Error::Pole("leftward weights need nonzero z, s and q".into()));
        }
        let base = self.l_raw(i_in, j, k_out, l, z.inv(), 1.0 / self.q, self.s.inv())?;
        let e = i32::from(j > 0) - i32::from(l > 0);
        Ok(base * (-self.s).powi(e))
    }
}

/// Rightward weight with default tables.
pub fn weight_l(i_in: &[u8], j: usize, k_out: &[u8], l: usize, z: C, q: f64, s: C) -> Result<C> {
    VertexWeights::new(q, s).l(i_in, j, k_out, l, z)
}

/// Leftward weight with default tables.
pub fn weight_m(i_in: &[u8], j: usize, k_out: &[u8], l: usize, z: C, q: f64, s: C) -> Result<C> {
    VertexWeights::new(q, s).m(i_in, j, k_out, l, z)
}

/// All colour states with `n` colours and total at most `max_total`.
pub fn colour_states(n: usize, max_total: u8) -> Vec<ColourState> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &out {
            let used: u8 = v.iter().sum();
            for c in 0..=max_total - used {
                let mut w = v.clone();
                w.push(c);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Outcome of [`stochastic_weights_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticReport {
    pub checked: usize,
    pub max_sum_error: f64,
    /// Most negative real part among the stochastically normalized weights (0 if none).
    pub min_weight: f64,
    pub max_imag: f64,
    pub sums_ok: bool,
    pub positive: bool,
}

/// Sum-to-unity of `L (-s)^{1[l>0]}` and `M (-s)^{-1[j>0]}` over all outputs, for every
/// input with `n` colours and bottom total at most `max_total`; also tracks positivity.
pub fn stochastic_weights_check(w: &VertexWeights, n: usize, max_total: u8, z: C) -> Result<StochasticReport> {
    let mut rep = StochasticReport { checked: 0, max_sum_error: 0.0, min_weight: 0.0, max_imag: 0.0, sums_ok: true, positive: true };
    let s = w.s;
    for i_in in colour_states(n, max_total) {
        for j in 0..=n {
            let mut sum_l = C::new(0.0, 0.0);
            let mut sum_m = C::new(0.0, 0.0);
            for l in 0..=n {
                let mut k_out = i_in.clone();
                if j > 0 {
                    k_out[j - 1] += 1;
                }
                if l > 0 {
                    if k_out[l - 1] == 0 {
                        continue;
                    }
                    k_out[l - 1] -= 1;
                }
                let a = w.l(&i_in, j, &k_out, l, z)? * (-s).powi(i32::from(l > 0));
                let b = w.m(&i_in, j, &k_out, l, z)? * (-s).powi(-i32::from(j > 0));
                for v in [a, b] {
                    rep.min_weight = rep.min_weight.min(v.re);
                    rep.max_imag = rep.max_imag.max(v.im.abs());
                }
                sum_l += a;
                sum_m += b;
            }
            rep.checked += 1;
            rep.max_sum_error = rep.max_sum_error.max((sum_l - 1.0).norm()).max((sum_m - 1.0).norm());
        }
    }
    rep.sums_ok = rep.max_sum_error < 1e-12;
    rep.positive = rep.min_weight >= 0.0;
    Ok(rep)
}

fn add_entry(map: &mut BTreeMap<Vec<u8>, C>, key: Vec<u8>, v: C) {
    *map.entry(key).or_insert(C::new(0.0, 0.0)) += v;
}

/// Weights-aware version of [`f_mu`].
pub fn f_mu_with(w: &VertexWeights, mu: &[i64], z: &[C]) -> Result<C> {
    let n = mu.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    if n == 0 {
        return Ok(C::new(1.0, 0.0));
    }
    let s = w.s;
    for &zi in z {
        if (1.0 - s * zi).norm() == 0.0 {
            return Err(Error::Pole(format!("s*z = 1 at z = {zi}")));
        }
    }
    let min = *mu.iter().min().unwrap();
    let shift = if min < 0 { min.checked_neg().ok_or_else(|| Error::Overflow("shifting composition".into()))? } else { 0 };
    let shifted: Vec<i64> = mu.iter().map(|&x| x + shift).collect();
    let mut pref = C::new(1.0, 0.0);
    if shift > 0 {
        for &zi in z {
            pref *= pow_i((1.0 - s * zi) / (zi - s), shift);
        }
    }
    let cols = *shifted.iter().max().unwrap();
    // horizontal state: colour carried by each row, bottom row first
    let mut state: BTreeMap<Vec<u8>, C> = BTreeMap::new();
    state.insert((1..=n as u8).collect(), C::new(1.0, 0.0));
    for c in 0..=cols {
        let target: Vec<u8> = (0..n).map(|k| u8::from(shifted[k] == c)).collect();
        let mut next: BTreeMap<Vec<u8>, C> = BTreeMap::new();
        for (h, wt) in &state {
            // key: vertical counts (n entries) followed by outgoing colours so far
            let mut inner: BTreeMap<Vec<u8>, C> = BTreeMap::new();
            inner.insert(vec![0u8; n], *wt);
            for row in 0..n {
                let j = h[row] as usize;
                let mut upd: BTreeMap<Vec<u8>, C> = BTreeMap::new();
                for (key, v) in &inner {
                    let i_in = &key[..n];
                    for l in 0..=n {
                        if l > 0 && shifted[l - 1] <= c {
                            continue;
                        }
                        let mut k_out = i_in.to_vec();
                        if j > 0 {
                            k_out[j - 1] += 1;
                        }
                        if l > 0 {
                            if k_out[l - 1] == 0 {
                                continue;
                            }
                            k_out[l - 1] -= 1;
                        }
                        if k_out.iter().enumerate().any(|(k, &cnt)| cnt > 0 && shifted[k] < c) {
                            continue;
                        }
                        let wv = w.l(i_in, j, &k_out, l, z[row])?;
                        if wv.norm() == 0.0 {
                            continue;
                        }
                        let mut nk = k_out;
                        nk.extend_from_slice(&key[n..]);
                        nk.push(l as u8);
                        add_entry(&mut upd, nk, v * wv);
                    }
                }
                inner = upd;
            }
            for (key, v) in inner {
                if key[..n] == target[..] {
                    add_entry(&mut next, key[n..].to_vec(), v);
                }
            }
        }
        state = next;
    }
    let zero = vec![0u8; n];
    Ok(pref * state.get(&zero).copied().unwrap_or(C::new(0.0, 0.0)))
}

/// The partition function `f_μ(z; q, s)`, extended to negative parts by the shift rule.
pub fn f_mu(mu: &[i64], z: &[C], q: f64, s: C) -> Result<C> {
    f_mu_with(&VertexWeights::new(q, s), mu, z)
}

/// Closed form of `f_δ` for weakly increasing `δ`.
pub fn f_anti_dominant(delta: &[i64], z: &[C], q: f64, s: C) -> Result<C> {
    if delta.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(format!("{delta:?} is not weakly increasing")));
    }
    let mut v = C::new(1.0, 0.0);
    for m in multiplicities(delta) {
        v *= q_pochhammer(s * s, q, m);
    }
    for (&d, &zi) in delta.iter().zip(z) {
        v *= pow_i((zi - s) / (1.0 - s * zi), d) / (1.0 - s * zi);
    }
    Ok(v)
}

/// Number of pairs `i < j` with `μ_i < μ_j`.
pub fn inversions(mu: &[i64]) -> usize {
    let mut c = 0;
    for i in 0..mu.len() {
        for j in i + 1..mu.len() {
            if mu[i] < mu[j] {
                c += 1;
            }
        }
    }
    c
}

/// The dual function `g*_μ(z; q, s)`.
pub fn g_star_mu(mu: &[i64], z: &[C], q: f64, s: C) -> Result<C> {
    let n = mu.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    let mut den = C::new(1.0, 0.0);
    for m in multiplicities(mu) {
        den *= q_pochhammer(s.powi(-2), 1.0 / q, m);
    }
    if den.norm() == 0.0 {
        return Err(Error::Pole("vanishing Pochhammer normalization".into()));
    }
    let rev_mu: Vec<i64> = mu.iter().rev().copied().collect();
    let rev_z: Vec<C> = z.iter().rev().map(|x| x.inv()).collect();
    let f = f_mu(&rev_mu, &rev_z, 1.0 / q, s.inv())?;
    let mut v = f * q.powi(inversions(mu) as i32) / den;
    for &zi in z {
        v /= -s * zi;
    }
    Ok(v)
}

/// Weights-aware version of [`g_mu_nu`].
pub fn g_mu_nu_with(w: &VertexWeights, mu: &[i64], nu: &[i64], y: &[C]) -> Result<C> {
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    if mu.iter().zip(nu).any(|(a, b)| a < b) {
        return Ok(C::new(0.0, 0.0));
    }
    if y.is_empty() || n == 0 {
        return Ok(C::new(if mu == nu { 1.0 } else { 0.0 }, 0.0));
    }
    let b = *nu.iter().min().unwrap();
    let a = *mu.iter().max().unwrap();
    let width = usize::try_from(a - b + 1).map_err(|_| Error::Overflow("column range".into()))?;
    let col = |x: i64| (x - b) as usize;
    let mut start = vec![0u8; width * n];
    let mut target = vec![0u8; width * n];
    for k in 0..n {
        start[col(mu[k]) * n + k] += 1;
        target[col(nu[k]) * n + k] += 1;
    }
    let mut state: BTreeMap<Vec<u8>, C> = BTreeMap::new();
    state.insert(start, C::new(1.0, 0.0));
    for &yr in y {
        let mut next: BTreeMap<Vec<u8>, C> = BTreeMap::new();
        for (verts, wt) in &state {
            // key: vertical state followed by the horizontal colour entering from the right
            let mut inner: BTreeMap<Vec<u8>, C> = BTreeMap::new();
            let mut k0 = verts.clone();
            k0.push(0);
            inner.insert(k0, *wt);
            for x in (0..width).rev() {
                let xpos = b + x as i64;
                let mut upd: BTreeMap<Vec<u8>, C> = BTreeMap::new();
                for (key, v) in &inner {
                    let j = key[width * n] as usize;
                    let i_in = &key[x * n..(x + 1) * n];
                    for l in 0..=n {
                        if l > 0 && nu[l - 1] > xpos - 1 {
                            continue;
                        }
                        let mut k_out = i_in.to_vec();
                        if j > 0 {
                            k_out[j - 1] += 1;
                        }
                        if l > 0 {
                            if k_out[l - 1] == 0 {
                                continue;
                            }
                            k_out[l - 1] -= 1;
                        }
                        if k_out.iter().enumerate().any(|(k, &cnt)| cnt > 0 && nu[k] > xpos) {
                            continue;
                        }
                        let wv = w.m(i_in, j, &k_out, l, yr)?;
                        if wv.norm() == 0.0 {
                            continue;
                        }
                        let mut nk = key.clone();
                        nk[x * n..(x + 1) * n].copy_from_slice(&k_out);
                        nk[width * n] = l as u8;
                        add_entry(&mut upd, nk, v * wv);
                    }
                }
                inner = upd;
            }
            for (mut key, v) in inner {
                if key[width * n] == 0 {
                    key.pop();
                    add_entry(&mut next, key, v);
                }
            }
        }
        state = next;
    }
    Ok(state.get(&target).copied().unwrap_or(C::new(0.0, 0.0)))
}

/// The partition function `G_{μ/ν}(y_1, ..., y_ℓ; q, s)`.
pub fn g_mu_nu(mu: &[i64], nu: &[i64], y: &[C], q: f64, s: C) -> Result<C> {
    g_mu_nu_with(&VertexWeights::new(q, s), mu, nu, y)
}

/// The symmetric function `F_λ(z; q, s)` by explicit symmetrization.
pub fn f_lambda_sym(lambda: &[i64], z: &[C], q: f64, s: C) -> Result<C> {
    let n = lambda.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    if lambda.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(format!("{lambda:?} is not weakly decreasing")));
    }
    check_separated(z, MIN_SEPARATION)?;
    let mut pref = C::new((1.0 - q).powi(n as i32), 0.0);
    for &zi in z {
        pref /= 1.0 - s * zi;
    }
    for m in multiplicities(lambda) {
        pref *= q_pochhammer(s * s, q, m) / q_pochhammer(C::new(q, 0.0), q, m);
    }
    let mut sum = C::new(0.0, 0.0);
    for (perm, _) in enumerate_permutations(n)? {
        let w: Vec<C> = perm.iter().map(|&k| z[k]).collect();
        let mut t = C::new(1.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                t *= (w[i] - q * w[j]) / (w[i] - w[j]);
            }
            t *= pow_i((w[i] - s) / (1.0 - s * w[i]), lambda[i]);
        }
        sum += t;
    }
    Ok(pref * sum)
}

/// `Σ_{μ : μ⁺ = λ} f_μ(z)` by explicit enumeration of rearrangements.
pub fn f_rearrangement_sum(lambda: &[i64], z: &[C], q: f64, s: C) -> Result<C> {
    let mut total = C::new(0.0, 0.0);
    for mu in distinct_rearrangements(lambda) {
        total += f_mu(&mu, z, q, s)?;
    }
    Ok(total)
}

/// `ξ_μ(u) = ∏ ((1 - q u_j)/(1 - u_j))^{μ_j}`.
pub fn xi_mu(mu: &[i64], u: &[C], q: f64) -> C {
    mu.iter().zip(u).fold(C::new(1.0, 0.0), |acc, (&m, &x)| acc * pow_i((1.0 - q * x) / (1.0 - x), m))
}

/// The permutation sum `𝖥_λ(u; q)` for a strict signature `λ`.
pub fn sf_f_lambda(lambda: &[i64], u: &[C], q: f64) -> Result<C> {
    let n = lambda.len();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    check_separated(u, MIN_SEPARATION)?;
    let mut sum = C::new(0.0, 0.0);
    for (perm, _) in enumerate_permutations(n)? {
        let w: Vec<C> = perm.iter().map(|&k| u[k]).collect();
        let mut t = C::new(1.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                t *= (w[j] - q * w[i]) / (w[j] - w[i]);
            }
            t *= pow_i((1.0 - w[i]) / (1.0 - q * w[i]), lambda[i]);
        }
        sum += t;
    }
    Ok(sum)
}

/// `𝖥_λ(u; 0)` as a determinant divided by the Vandermonde product.
pub fn sf_f_lambda_det(lambda: &[i64], u: &[C]) -> Result<C> {
    let n = lambda.len();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    check_separated(u, MIN_SEPARATION)?;
    let m: Vec<Vec<C>> = (0..n).map(|i| (0..n).map(|j| u[j].powi(i as i32) * pow_i(1.0 - u[j], lambda[i])).collect()).collect();
    let mut v = determinant(m);
    for i in 0..n {
        for j in i + 1..n {
            v /= u[j] - u[i];
        }
    }
    Ok(v)
}

/// Origin-centred circle radii admissible for `(q, s)` that also enclose every point of modulus `inner`.
///
/// Radii grow by a factor exceeding `max(q, 1)`; the innermost exceeds `max(|s|, inner)` and the
/// outermost stays below `1/|s|`.
pub fn admissible_radii(n: usize, q: f64, s: C, inner: f64) -> Result<Vec<f64>> {
    let lo = s.norm().max(inner);
    let hi = if s.norm() == 0.0 { f64::INFINITY } else { 1.0 / s.norm() };
    let g0 = q.max(1.0);
    let room = hi / (lo * g0.powi(n as i32 - 1));
    if !(room > 1.0) {
        return Err(Error::Configuration(format!(
            "no origin-centred admissible circles for n={n}, q={q}, |s|={}, inner={inner}",
            s.norm()
        )));
    }
    let gamma = room.powf(1.0 / (n as f64 + 1.0)).min(2.0);
    let g = g0 * gamma;
    Ok((0..n).map(|i| lo * gamma * g.powi(i as i32)).collect())
}

fn ladder(radii: &[f64], nodes: usize) -> ContourProduct {
    ContourProduct::plain(radii.iter().map(|&r| ContourSpec { nodes, ..ContourSpec::origin(r) }).collect())
}

fn validate_ladder(radii: &[f64], q: f64, s: C) -> Result<()> {
    for w in radii.windows(2) {
        if !(w[1] > w[0] && w[1] > q * w[0]) {
            return Err(Error::Configuration(format!("radii {radii:?} are not nested by factor max(q,1) = {}", q.max(1.0))));
        }
    }
    if radii.first().is_some_and(|&r| r <= s.norm()) || radii.last().is_some_and(|&r| s.norm() * r >= 1.0) {
        return Err(Error::Configuration(format!("radii {radii:?} must enclose s and exclude 1/s")));
    }
    Ok(())
}

/// The orthogonality integral pairing `f_ν(1/z)` with `g*_μ(z)`; equals `1[μ = ν]`.
pub fn orthogonality_check(mu: &[i64], nu: &[i64], q: f64, s: C, radii: Option<&[f64]>, opts: &QuadratureOptions) -> Result<Integral> {
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    let radii = match radii {
        Some(r) => r.to_vec(),
        None => admissible_radii(n, q, s, 0.0)?,
    };
    validate_ladder(&radii, q, s)?;
    let f = |z: &[C]| -> C {
        let mut v = C::new(1.0, 0.0);
        for i in 0..n {
            v /= z[i];
            for j in i + 1..n {
                v *= (z[j] - z[i]) / (z[j] - q * z[i]);
            }
        }
        let zi: Vec<C> = z.iter().map(|x| x.inv()).collect();
        match (f_mu(nu, &zi, q, s), g_star_mu(mu, z, q, s)) {
            (Ok(a), Ok(b)) => v * a * b,
            _ => C::new(f64::NAN, 0.0),
        }
    };
    product_integrate(&f, &ladder(&radii, opts.start_nodes), opts)
}

/// Truncated Cauchy summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyReport {
    pub lhs: C,
    pub rhs: C,
    /// Estimated bound on the omitted part of the left side.
    pub tail_bound: f64,
}

/// Left side summed over `κ` with `0 <= κ_i - ν_i <= depth`, right side in closed form.
pub fn cauchy_check(nu: &[i64], z: &[C], y: &[C], q: f64, s: C, depth: usize) -> Result<CauchyReport> {
    let n = nu.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    let mut rho: f64 = 0.0;
    for &yi in y {
        for &zj in z {
            rho = rho.max(((yi - s) / (1.0 - s * yi) * (zj - s) / (1.0 - s * zj)).norm());
        }
    }
    if rho >= 1.0 {
        return Err(Error::Configuration(format!("Cauchy sum diverges: ratio {rho} >= 1")));
    }
    let mut shells = vec![C::new(0.0, 0.0); depth + 1];
    let mut offs = vec![0usize; n];
    loop {
        let kappa: Vec<i64> = nu.iter().zip(&offs).map(|(&a, &o)| a + o as i64).collect();
        let shell = offs.iter().copied().max().unwrap_or(0);
        shells[shell] += f_mu(&kappa, z, q, s)? * g_mu_nu(&kappa, nu, y, q, s)?;
        let mut k = 0;
        loop {
            if k == n {
                let lhs = shells.iter().sum();
                let mut rhs = f_mu(nu, z, q, s)? * q.powi(-((y.len() * n) as i32));
                for &yi in y {
                    for &zj in z {
                        rhs *= (1.0 - q * yi * zj) / (1.0 - yi * zj);
                    }
                }
                let last = shells[depth].norm();
                let prev = if depth > 0 { shells[depth - 1].norm() } else { 0.0 };
                let r = if prev > 0.0 { rho.max(last / prev).min(0.999) } else { rho };
                let d = depth.max(1) as f64;
                let mut tail = 0.0;
                let mut term = last;
                for jj in 1..10_000 {
                    term *= r;
                    let t = term * ((d + jj as f64) / d).powi(n as i32 - 1);
                    tail += t;
                    if t < 1e-18 * (tail + 1e-300) {
                        break;
                    }
                }
                return Ok(CauchyReport { lhs, rhs, tail_bound: 2.0 * tail + 1e-14 * rhs.norm().max(1.0) });
            }
            offs[k] += 1;
            if offs[k] <= depth {
                break;
            }
            offs[k] = 0;
            k += 1;
        }
    }
}

/// Probability `(-s)^{|ν|-|μ|} G_{μ/ν}(y)` of the discrete-time chain, from the contour integral.
pub fn discrete_transition(mu: &[i64], nu: &[i64], y: &[C], q: f64, s: C, radii: Option<&[f64]>, opts: &QuadratureOptions) -> Result<Integral> {
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    if mu.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(format!("{mu:?} must be weakly decreasing")));
    }
    if y.is_empty() {
        let v = if mu == nu { 1.0 } else { 0.0 };
        return Ok(Integral { value: C::new(v, 0.0), est_err: 0.0, evaluations: 0 });
    }
    let inner = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let radii = match radii {
        Some(r) => r.to_vec(),
        None => admissible_radii(n, q, s, inner)?,
    };
    validate_ladder(&radii, q, s)?;
    if radii[0] <= inner {
        return Err(Error::Configuration("contours must enclose every y".into()));
    }
    let weight: i64 = nu.iter().sum::<i64>() - mu.iter().sum::<i64>();
    let pref = (-s).powi(weight as i32) * q.powi(-((y.len() * n) as i32));
    let f = |z: &[C]| -> C {
        let mut v = pref;
        for i in 0..n {
            v /= z[i];
            for j in i + 1..n {
                v *= (z[j] - z[i]) / (z[j] - q * z[i]);
            }
            for &yi in y {
                v *= (z[i] - q * yi) / (z[i] - yi);
            }
            v *= pow_i((z[i] - s) / (1.0 - s * z[i]), mu[i]) / (1.0 - s * z[i]);
        }
        let zi: Vec<C> = z.iter().map(|x| x.inv()).collect();
        match f_mu(nu, &zi, q, s) {
            Ok(a) => v * a,
            Err(_) => C::new(f64::NAN, 0.0),
        }
    };
    product_integrate(&f, &ladder(&radii, opts.start_nodes), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn l_weight_examples() {
        let (z, q, s) = (C::new(0.3, 0.1), 1.7, C::new(0.4, -0.2));
        let i_in = [1u8, 2];
        let v = weight_l(&i_in, 0, &i_in, 0, z, q, s).unwrap();
        assert!((v - (1.0 - s * z * q.powi(3)) / (1.0 - s * z)).norm() < 1e-15);
        assert_eq!(weight_l(&i_in, 1, &i_in, 0, z, q, s).unwrap(), c(0.0));
        assert_eq!(weight_l(&[0, 0], 0, &[0, 0], 0, z, q, s).unwrap(), c(1.0));
        assert!(matches!(weight_l(&[0], 0, &[0], 0, c(2.0), q, c(0.5)), Err(Error::Pole(_))));
    }

    #[test]
    fn conservation_enforced() {
        let (z, q, s) = (C::new(0.3, 0.1), 1.7, C::new(0.4, -0.2));
        for n in 1..=3 {
            let states = colour_states(n, 2);
            for a in &states {
                for b in &states {
                    for j in 0..=n {
                        for l in 0..=n {
                            let mut lhs: Vec<i32> = a.iter().map(|&x| x as i32).collect();
                            let mut rhs: Vec<i32> = b.iter().map(|&x| x as i32).collect();
                            if j > 0 {
                                lhs[j - 1] += 1;
                            }
                            if l > 0 {
                                rhs[l - 1] += 1;
                            }
                            if lhs != rhs {
                                assert_eq!(weight_l(a, j, b, l, z, q, s).unwrap(), c(0.0));
                                assert_eq!(weight_m(a, j, b, l, z, q, s).unwrap(), c(0.0));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dual_stochastic_table() {
        // M at z = q^{-1/2} y, s = q^{-1/2}, rescaled by (-q^{1/2})^{1[j>0]}
        let (q, y) = (2.3f64, 0.37);
        let s = c(q.powf(-0.5));
        let z = c(y * q.powf(-0.5));
        let dual = |i_in: &[u8], j: usize, k_out: &[u8], l: usize| weight_m(i_in, j, k_out, l, z, q, s).unwrap() * (-q.sqrt()).powi(i32::from(j > 0));
        let den = 1.0 - y / q;
        let qi = |e: i32| q.powi(-e);
        let i_in = [1u8, 2, 1];
        let tot = 4;
        // (I,0;I,0)
        assert!((dual(&i_in, 0, &i_in, 0) - c((qi(tot) - y / q) / den)).norm() < 1e-13);
        // (I,i;I,i), i = 2
        assert!((dual(&i_in, 2, &i_in, 2) - c((1.0 - y * qi(2)) * qi(1) / den)).norm() < 1e-13);
        // (I,0;I-e_i,i), i = 2
        assert!((dual(&i_in, 0, &[1, 1, 1], 2) - c((1.0 - qi(2)) * qi(1) / den)).norm() < 1e-13);
        // (I,i;I+e_i,0), i = 1
        assert!((dual(&i_in, 1, &[2, 2, 1], 0) - c(y * (qi(tot) - 1.0 / q) / den)).norm() < 1e-13);
        // (I,i;I+e_i-e_j,j), i=1 < j=3
        assert!((dual(&i_in, 1, &[2, 2, 0], 3) - c((1.0 - qi(1)) * qi(0) / den)).norm() < 1e-13);
        // (I,j;I+e_j-e_i,i), i=2 < j=3
        assert!((dual(&i_in, 3, &[1, 1, 2], 2) - c(y * (1.0 - qi(2)) * qi(1) / den)).norm() < 1e-13);
    }

    #[test]
    fn sum_to_unity_examples() {
        let w = VertexWeights::new(1.8, C::new(0.35, 0.1));
        let rep = stochastic_weights_check(&w, 1, 0, C::new(0.2, 0.05)).unwrap();
        assert!(rep.sums_ok);
        let rep = stochastic_weights_check(&w, 2, 2, C::new(0.2, 0.05)).unwrap();
        assert!(rep.sums_ok, "{rep:?}");
        let rep = stochastic_weights_check(&VertexWeights::new(2.0, c(0.3)), 2, 2, c(0.1)).unwrap();
        assert!(rep.sums_ok && rep.positive, "{rep:?}");
        let bad = VertexWeights::new(2.0, c(0.3)).perturbed(Perturbation { entry: WeightEntry::Through, factor: 1.01 });
        assert!(!stochastic_weights_check(&bad, 2, 2, c(0.1)).unwrap().sums_ok);
    }

    #[test]
    fn f_single_row_and_anti_dominant() {
        let (q, s) = (1.6, C::new(0.3, 0.05));
        let z = C::new(0.4, -0.2);
        for k in 0..4 {
            let v = f_mu(&[k], &[z], q, s).unwrap();
            let ex = (1.0 - s * s) / (1.0 - s * z) * pow_i((z - s) / (1.0 - s * z), k);
            assert!((v - ex).norm() < 1e-14);
        }
        let z = [C::new(0.4, -0.2), C::new(-0.3, 0.5)];
        let v = f_mu(&[0, 1], &z, q, s).unwrap();
        let ex = (1.0 - s * s).powi(2) / ((1.0 - s * z[0]) * (1.0 - s * z[1])) * (z[1] - s) / (1.0 - s * z[1]);
        assert!((v - ex).norm() < 1e-14);
        for d in [vec![0, 0, 2], vec![1, 1, 1], vec![-1, 0, 0]] {
            let z3 = [z[0], z[1], C::new(0.7, 0.1)];
            let a = f_mu(&d, &z3, q, s).unwrap();
            let b = f_anti_dominant(&d, &z3, q, s).unwrap();
            assert!((a - b).norm() < 1e-13 * b.norm().max(1.0), "{d:?}");
        }
    }

    /// Brute-force enumeration of every edge configuration of the f-lattice.
    fn f_brute(mu: &[i64], z: &[C], q: f64, s: C) -> C {
        let n = mu.len();
        let cols = *mu.iter().max().unwrap() as usize + 1;
        fn rec(col: usize, row: usize, horiz: &mut Vec<u8>, vert: &mut Vec<u8>, acc: C, ctx: &(usize, usize, &[i64], &[C], f64, C), total: &mut C) {
            let (n, cols, mu, z, q, s) = *ctx;
            if row == n {
                let target: Vec<u8> = (0..n).map(|k| u8::from(mu[k] == col as i64)).collect();
                if *vert != target {
                    return;
                }
                if col + 1 == cols {
                    if horiz.iter().all(|&h| h == 0) {
                        *total += acc;
                    }
                    return;
                }
                let saved = vert.clone();
                vert.iter_mut().for_each(|v| *v = 0);
                rec(col + 1, 0, horiz, vert, acc, ctx, total);
                *vert = saved;
                return;
            }
            let j = horiz[row] as usize;
            for l in 0..=n {
                let mut k_out = vert.clone();
                if j > 0 {
                    k_out[j - 1] += 1;
                }
                if l > 0 {
                    if k_out[l - 1] == 0 {
                        continue;
                    }
                    k_out[l - 1] -= 1;
                }
                let w = weight_l(vert, j, &k_out, l, z[row], q, s).unwrap();
                if w.norm() == 0.0 {
                    continue;
                }
                let (sv, sh) = (vert.clone(), horiz[row]);
                *vert = k_out;
                horiz[row] = l as u8;
                rec(col, row + 1, horiz, vert, acc * w, ctx, total);
                *vert = sv;
                horiz[row] = sh;
            }
        }
        let mut total = c(0.0);
        let mut horiz: Vec<u8> = (1..=n as u8).collect();
        let mut vert = vec![0u8; n];
        rec(0, 0, &mut horiz, &mut vert, c(1.0), &(n, cols, mu, z, q, s), &mut total);
        total
    }

    #[test]
    fn f_matches_brute_force() {
        let (q, s) = (1.3, C::new(0.45, -0.1));
        let z = [C::new(0.25, 0.3), C::new(-0.5, 0.2)];
        for mu in [[2, 0], [3, 1], [1, 1], [0, 3], [2, 2], [3, 0]] {
            let a = f_mu(&mu, &z, q, s).unwrap();
            let b = f_brute(&mu, &z, q, s);
            assert!((a - b).norm() < 1e-13 * b.norm().max(1.0), "{mu:?}: {a} vs {b}");
        }
    }

    #[test]
    fn g_star_examples() {
        assert_eq!(inversions(&[1, 3, 2]), 2);
        let (q, s) = (1.5, C::new(0.3, 0.1));
        let z = [C::new(0.6, 0.2), C::new(-0.4, 0.3)];
        let v = g_star_mu(&[0], &z[..1], q, s).unwrap();
        assert!((v - (1.0 - s * z[0]).inv()).norm() < 1e-13);
        for mu in [[2, 0], [1, 1], [3, -1]] {
            let v = g_star_mu(&mu, &z, q, s).unwrap();
            let ex: C = mu.iter().zip(&z).map(|(&m, &x)| pow_i((x - s) / (1.0 - s * x), m) / (1.0 - s * x)).product();
            assert!((v - ex).norm() < 1e-12 * ex.norm(), "{mu:?}");
        }
    }

    #[test]
    fn g_lattice_examples() {
        let (q, s) = (2.0, c(0.3));
        let y = [c(0.25)];
        assert_eq!(g_mu_nu(&[1, 0], &[1, 0], &[], q, s).unwrap(), c(1.0));
        assert_eq!(g_mu_nu(&[1, 0], &[0, 0], &[], q, s).unwrap(), c(0.0));
        // one path entering at column 1, moving one step left, exiting at column 0
        let v = g_mu_nu(&[1], &[0], &y, q, s).unwrap();
        let w1 = weight_m(&[1], 0, &[0], 1, y[0], q, s).unwrap();
        let w0 = weight_m(&[0], 1, &[1], 0, y[0], q, s).unwrap();
        assert!((v - w1 * w0).norm() < 1e-15);
        // stochasticity of one step
        let mut tot = c(0.0);
        for nu in -60..=1 {
            tot += g_mu_nu(&[1], &[nu], &y, q, s).unwrap() * (-s).powi((nu - 1) as i32);
        }
        assert!((tot - 1.0).norm() < 1e-12, "{tot}");
    }

    #[test]
    fn g_two_paths_stochastic() {
        let (q, s) = (2.0, c(0.3));
        let y = [c(0.25)];
        let mu = [1i64, 0];
        let mut tot = c(0.0);
        for a in -30..=1i64 {
            for b in -30..=0i64 {
                let p = g_mu_nu(&mu, &[a, b], &y, q, s).unwrap() * (-s).powi((a + b - 1) as i32);
                assert!(p.re > -1e-15 && p.im.abs() < 1e-15);
                tot += p;
            }
        }
        assert!((tot - 1.0).norm() < 1e-10, "{tot}");
    }

    #[test]
    fn symmetrization_examples() {
        let (q, s) = (1.4, C::new(0.3, -0.1));
        let z = [C::new(0.2, 0.3), C::new(-0.4, 0.1)];
        let a = f_lambda_sym(&[1], &z[..1], q, s).unwrap();
        assert!((a - f_mu(&[1], &z[..1], q, s).unwrap()).norm() < 1e-14);
        let a = f_lambda_sym(&[1, 0], &z, q, s).unwrap();
        let b = f_mu(&[1, 0], &z, q, s).unwrap() + f_mu(&[0, 1], &z, q, s).unwrap();
        assert!((a - b).norm() < 1e-13);
        let sw = f_lambda_sym(&[1, 0], &[z[1], z[0]], q, s).unwrap();
        assert!((a - sw).norm() < 1e-13);
        assert!(f_lambda_sym(&[1, 0], &[z[0], z[0]], q, s).is_err());
    }

    #[test]
    fn sf_f_examples() {
        let u = [C::new(0.9, 0.1), C::new(1.1, -0.05), C::new(1.05, 0.12)];
        let v = sf_f_lambda(&[3], &u[..1], 0.4).unwrap();
        assert!((v - pow_i((1.0 - u[0]) / (1.0 - 0.4 * u[0]), 3)).norm() < 1e-14);
        assert!((xi_mu(&[3], &u[..1], 0.4) * v - 1.0).norm() < 1e-13);
        let a = sf_f_lambda(&[4, 2, 0], &u, 0.0).unwrap();
        let b = sf_f_lambda_det(&[4, 2, 0], &u).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn admissible_ladders() {
        let r = admissible_radii(2, 2.0, c(0.1), 0.0).unwrap();
        assert!(r[0] > 0.1 && r[1] > 2.0 * r[0] && r[1] < 10.0);
        assert!(matches!(admissible_radii(3, 4.0, c(0.5), 0.0), Err(Error::Configuration(_))));
    }

    #[test]
    fn orthogonality_examples() {
        let opts = QuadratureOptions { tol: 1e-10, ..Default::default() };
        let (q, s) = (2.0, c(0.1));
        let v = orthogonality_check(&[0], &[0], q, s, Some(&[0.2]), &opts).unwrap();
        assert!((v.value - 1.0).norm() < 1e-8);
        let v = orthogonality_check(&[0], &[1], q, s, Some(&[0.2]), &opts).unwrap();
        assert!(v.value.norm() < 1e-8);
        let v = orthogonality_check(&[1, 0], &[1, 0], q, s, Some(&[0.2, 0.5]), &opts).unwrap();
        assert!((v.value - 1.0).norm() < 1e-6, "{}", v.value);
        let v = orthogonality_check(&[1, 0], &[0, 1], q, s, Some(&[0.2, 0.5]), &opts).unwrap();
        assert!(v.value.norm() < 1e-6, "{}", v.value);
    }

    #[test]
    fn cauchy_examples() {
        let (q, s) = (2.0, c(0.4));
        let z = [c(0.3)];
        let rep = cauchy_check(&[0], &z, &[c(0.2)], q, s, 30).unwrap();
        assert!((rep.lhs - rep.rhs).norm() <= rep.tail_bound, "{rep:?}");
        let rep = cauchy_check(&[1, 0], &[c(0.3), C::new(0.25, 0.1)], &[c(0.2)], q, s, 12).unwrap();
        assert!((rep.lhs - rep.rhs).norm() <= rep.tail_bound, "{rep:?}");
        assert!(cauchy_check(&[0], &[c(3.0)], &[c(-3.0)], q, s, 5).is_err());
    }

    #[test]
    fn discrete_transition_matches_lattice() {
        let opts = QuadratureOptions { tol: 1e-11, ..Default::default() };
        let (q, s) = (2.0, c(0.1));
        let y = [c(0.05)];
        let v = discrete_transition(&[1], &[1], &[], q, s, None, &opts).unwrap();
        assert_eq!(v.value, c(1.0));
        for nu in [1i64, 0, -2] {
            let a = discrete_transition(&[1], &[nu], &y, q, s, None, &opts).unwrap().value;
            let b = g_mu_nu(&[1], &[nu], &y, q, s).unwrap() * (-s).powi((nu - 1) as i32);
            assert!((a - b).norm() < 1e-10, "{nu}: {a} vs {b}");
        }
        for nu in [[1i64, 0], [0, 1], [-1, 0], [1, -2]] {
            let a = discrete_transition(&[1, 0], &nu, &y, q, s, None, &opts).unwrap().value;
            let b = g_mu_nu(&[1, 0], &nu, &y, q, s).unwrap() * (-s).powi((nu[0] + nu[1] - 1) as i32);
            assert!((a - b).norm() < 1e-8, "{nu:?}: {a} vs {b}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cpt(r: f64, th: f64) -> C {
            C::from_polar(r, th)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn weights_sum_to_one(q in 0.2f64..3.0, sr in 0.1f64..0.8, sth in -1.0f64..1.0, zr in 0.1f64..0.9, zth in -3.0f64..3.0) {
                let w = VertexWeights::new(q, cpt(sr, sth));
                let rep = stochastic_weights_check(&w, 2, 2, cpt(zr, zth)).unwrap();
                prop_assert!(rep.max_sum_error < 1e-10, "{:?}", rep);
            }

            #[test]
            fn positive_in_stochastic_regime(q in 1.05f64..3.0, s in 0.05f64..0.5, frac in 0.0f64..1.0) {
                let z = c(frac * s);
                let qmax = q.powi(2);
                prop_assume!(1.0 - s * s * qmax > 0.0);
                let rep = stochastic_weights_check(&VertexWeights::new(q, c(s)), 2, 2, z).unwrap();
                prop_assert!(rep.positive && rep.max_imag < 1e-15, "{:?}", rep);
            }

            #[test]
            fn block_factorization(a in 0i64..2, b in 0i64..2, gap in 1i64..3, q in 0.5f64..2.0, th in -2.0f64..2.0) {
                let s = cpt(0.35, 0.2);
                let z = [cpt(0.3, th), cpt(0.5, th + 1.1), cpt(0.4, -th)];
                let lo = [a, b];
                let hi = lo.iter().max().unwrap() + gap;
                let mu = [a, b, hi];
                let whole = f_mu(&mu, &z, q, s).unwrap();
                let parts = f_mu(&lo, &z[..2], q, s).unwrap() * f_mu(&[hi], &z[2..], q, s).unwrap();
                prop_assert!((whole - parts).norm() < 1e-12 * parts.norm().max(1.0));
            }

            #[test]
            fn shift_stability(m0 in -2i64..3, m1 in -2i64..3, k in 1i64..3, q in 0.5f64..2.0) {
                let s = cpt(0.3, -0.4);
                let z = [cpt(0.45, 0.3), cpt(0.6, 2.0)];
                let base = f_mu(&[m0, m1], &z, q, s).unwrap();
                let up = f_mu(&[m0 + k, m1 + k], &z, q, s).unwrap();
                let fac: C = z.iter().map(|&x| pow_i((x - s) / (1.0 - s * x), k)).product();
                prop_assert!((up - fac * base).norm() < 1e-11 * up.norm().max(1.0));
            }

            #[test]
            fn rearrangements_sum_to_symmetric(l0 in 0i64..3, d1 in 0i64..2, d2 in 0i64..2, q in 0.3f64..2.5, th in -1.0f64..1.0) {
                let s = cpt(0.3, 0.1);
                let lambda = [l0 + d1 + d2, l0 + d1, l0];
                let z = [cpt(0.3, th), cpt(0.55, th + 2.0), cpt(0.7, th - 2.1)];
                let a = f_rearrangement_sum(&lambda, &z, q, s).unwrap();
                let b = f_lambda_sym(&lambda, &z, q, s).unwrap();
                prop_assert!((a - b).norm() < 1e-10 * b.norm().max(1.0), "{} vs {}", a, b);
            }

            #[test]
            fn f_matches_enumeration(m0 in 0i64..3, m1 in 0i64..3, q in 0.5f64..2.0, th in -2.0f64..2.0) {
                let s = cpt(0.4, th);
                let z = [cpt(0.5, -th), cpt(0.3, 0.7)];
                let a = f_mu(&[m0, m1], &z, q, s).unwrap();
                let b = f_brute(&[m0, m1], &z, q, s);
                prop_assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
            }
        }
    }
}
