//! Trapezoid quadrature on circles and exact residues of exponential-rational integrands.

use crate::error::{Error, Result};
use crate::types::{ComplexPoint, KahanSum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

type C = ComplexPoint;

/// Default radius of circles carrying the particle variables.
pub const Z_RADIUS: f64 = 0.45;
/// Default radius of circles carrying the auxiliary nested variables.
pub const U_RADIUS: f64 = 0.80;

/// A circle traversed once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: C,
    pub radius: f64,
    /// +1 counterclockwise, -1 clockwise.
    pub orientation: i8,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: C, radius: f64, orientation: i8, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidInput("orientation must be +1 or -1".into()));
        }
        if nodes < 8 || !nodes.is_power_of_two() {
            return Err(Error::InvalidInput(format!("node count must be a power of two >= 8, got {nodes}")));
        }
        Ok(Self { center, radius, orientation, nodes })
    }

    /// Counterclockwise circle about the origin.
    pub fn origin(radius: f64) -> Self {
        Self { center: C::new(0.0, 0.0), radius, orientation: 1, nodes: 32 }
    }

    pub fn around(center: f64, radius: f64, orientation: i8) -> Self {
        Self { center: C::new(center, 0.0), radius, orientation, nodes: 32 }
    }

    /// Nodes `z_k` and weights `w_k` such that `sum w_k f(z_k)` approximates `(1/2πi)∮ f dz`.
    fn rule(&self, nodes: usize) -> Vec<(C, C)> {
        (0..nodes)
            .map(|k| {
                let e = C::from_polar(self.radius, 2.0 * PI * k as f64 / nodes as f64);
                (self.center + e, e * (self.orientation as f64 / nodes as f64))
            })
            .collect()
    }
}

/// Role of an integration variable in a nested product of circles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Z,
    U,
}

/// Ordered product of circles, one per integration variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourProduct {
    pub contours: Vec<ContourSpec>,
    pub roles: Vec<Role>,
}

impl ContourProduct {
    pub fn new(contours: Vec<ContourSpec>, roles: Vec<Role>) -> Result<Self> {
        if contours.len() != roles.len() {
            return Err(Error::DimensionMismatch { expected: contours.len(), got: roles.len() });
        }
        let at_origin = |c: &ContourSpec| c.center.norm() == 0.0;
        let zmax = contours
            .iter()
            .zip(&roles)
            .filter(|(c, r)| **r == Role::Z && at_origin(c))
            .map(|(c, _)| c.radius)
            .fold(0.0, f64::max);
        let umin = contours
            .iter()
            .zip(&roles)
            .filter(|(c, r)| **r == Role::U && at_origin(c))
            .map(|(c, _)| c.radius)
            .fold(f64::INFINITY, f64::min);
        if zmax >= umin {
            return Err(Error::Configuration(format!(
                "z-type radius {zmax} must be smaller than every u-type radius (min {umin})"
            )));
        }
        Ok(Self { contours, roles })
    }

    /// Every variable on its own circle, all of role Z.
    pub fn plain(contours: Vec<ContourSpec>) -> Self {
        let roles = vec![Role::Z; contours.len()];
        Self { contours, roles }
    }

    pub fn dim(&self) -> usize {
        self.contours.len()
    }
}

/// Stopping rule and resource limits for [`product_integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Successive iterates must differ by less than `tol * max(1, |value|)`.
    pub tol: f64,
    pub start_nodes: usize,
    pub max_nodes: usize,
    /// Cap on integrand evaluations summed over all refinement levels.
    pub budget: u64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { tol: 1e-12, start_nodes: 32, max_nodes: 4096, budget: 1 << 26 }
    }
}

/// Result of a converged integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: C,
    pub est_err: f64,
    pub evaluations: u64,
}

fn finite(z: C) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `(1/2πi)∮ f dz` with the trapezoid rule at the node count stored in `c`.
pub fn circle_integrate(f: impl Fn(C) -> C, c: &ContourSpec) -> Result<C> {
    let mut acc = KahanSum::default();
    for (z, w) in c.rule(c.nodes) {
        let v = f(z);
        if !finite(v) {
            return Err(Error::PoleOnContour(format!("non-finite integrand at {z}")));
        }
        acc.add(v * w);
    }
    Ok(acc.value())
}

/// One tensor-trapezoid sweep with `nodes` points per circle.
pub fn product_sum<F>(f: &F, cp: &ContourProduct, nodes: usize) -> Result<C>
where
    F: Fn(&[C]) -> C + Sync,
{
    let d = cp.dim();
    if d == 0 {
        return Ok(f(&[]));
    }
    let rules: Vec<Vec<(C, C)>> = cp.contours.iter().map(|c| c.rule(nodes)).collect();
    let partial: Vec<Result<C>> = (0..nodes)
        .into_par_iter()
        .map(|k0| {
            let mut acc = KahanSum::default();
            let mut idx = vec![0usize; d];
            idx[0] = k0;
            let mut pt = vec![C::new(0.0, 0.0); d];
            loop {
                let mut w = C::new(1.0, 0.0);
                for (j, &k) in idx.iter().enumerate() {
                    pt[j] = rules[j][k].0;
                    w *= rules[j][k].1;
                }
                let v = f(&pt);
                if !finite(v) {
                    return Err(Error::PoleOnContour(format!("non-finite integrand at {pt:?}")));
                }
                acc.add(v * w);
                let mut j = d - 1;
                loop {
                    if j == 0 {
                        return Ok(acc.value());
                    }
                    idx[j] += 1;
                    if idx[j] < nodes {
                        break;
                    }
                    idx[j] = 0;
                    j -= 1;
                }
            }
        })
        .collect();
    let mut acc = KahanSum::default();
    for p in partial {
        acc.add(p?);
    }
    Ok(acc.value())
}

/// Tensor trapezoid over all circles, doubling nodes until successive values agree.
pub fn product_integrate<F>(f: &F, cp: &ContourProduct, opts: &QuadratureOptions) -> Result<Integral>
where
    F: Fn(&[C]) -> C + Sync,
{
    let d = cp.dim() as u32;
    let mut nodes = opts.start_nodes.max(8);
    let mut used: u64 = 0;
    let mut prev: Option<C> = None;
    loop {
        let cost = (nodes as u64).checked_pow(d).unwrap_or(u64::MAX);
        if used.saturating_add(cost) > opts.budget || nodes > opts.max_nodes {
            return match prev {
                Some(p) => Err(Error::Accuracy { last: p.norm(), previous: f64::NAN, diff: f64::NAN }),
                None => Err(Error::ResourceLimit { what: format!("{cost} quadrature nodes"), cap: opts.budget }),
            };
        }
        let v = product_sum(f, cp, nodes)?;
        used += cost;
        if d == 0 {
            return Ok(Integral { value: v, est_err: 0.0, evaluations: used });
        }
        if let Some(p) = prev {
            let diff = (v - p).norm();
            if diff < opts.tol * v.norm().max(1.0) {
                return Ok(Integral { value: v, est_err: diff, evaluations: used });
            }
            let next_cost = ((2 * nodes) as u64).checked_pow(d).unwrap_or(u64::MAX);
            if 2 * nodes > opts.max_nodes || used.saturating_add(next_cost) > opts.budget {
                return Err(Error::Accuracy { last: v.norm(), previous: p.norm(), diff });
            }
        }
        prev = Some(v);
        nodes *= 2;
    }
}

/// Which poles of a [`LaurentDescriptor`] are enclosed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enclosed {
    Zero,
    One,
    Both,
}

/// `e^{(z-1)t} z^a (z-1)^b P(z)` with integer `a`, `b` and polynomial `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentDescriptor {
    pub t: f64,
    pub power_at_zero: f64,
    pub power_at_one: f64,
    /// Coefficients of `P` in increasing degree; empty means `P = 1`.
    pub poly: Vec<C>,
}

impl LaurentDescriptor {
    pub fn new(t: f64, power_at_zero: i64, power_at_one: i64) -> Self {
        Self { t, power_at_zero: power_at_zero as f64, power_at_one: power_at_one as f64, poly: Vec::new() }
    }

    pub fn with_poly(mut self, poly: Vec<C>) -> Self {
        self.poly = poly;
        self
    }

    fn int_powers(&self) -> Result<(i64, i64)> {
        let conv = |x: f64| {
            if x.fract() == 0.0 && x.abs() < 1e9 {
                Ok(x as i64)
            } else {
                Err(Error::UnsupportedDescriptor(format!("non-integer pole order {x}")))
            }
        };
        Ok((conv(self.power_at_zero)?, conv(self.power_at_one)?))
    }

    /// Direct evaluation.
    pub fn eval(&self, z: C) -> C {
        let p = if self.poly.is_empty() {
            C::new(1.0, 0.0)
        } else {
            self.poly.iter().rev().fold(C::new(0.0, 0.0), |acc, &c| acc * z + c)
        };
        ((z - 1.0) * self.t).exp() * pow_i(z, self.power_at_zero as i64) * pow_i(z - 1.0, self.power_at_one as i64) * p
    }
}

/// Integer power of a complex number.
pub fn pow_i(z: C, k: i64) -> C {
    if k >= 0 {
        z.powu(k as u32)
    } else {
        z.powu(k.unsigned_abs() as u32).inv()
    }
}

/// Coefficients `binom(a, k)` for `k < len`, any integer `a`.
fn binomial_series(a: i64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut c = 1.0;
    for k in 0..len {
        out.push(c);
        c *= (a - k as i64) as f64 / (k + 1) as f64;
    }
    out
}

fn exp_series(t: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut c = 1.0;
    for k in 0..len {
        out.push(c);
        c *= t / (k + 1) as f64;
    }
    out
}

fn mul_series(a: &[C], b: &[C], len: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); len];
    for (i, &x) in a.iter().enumerate().take(len) {
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn real(v: Vec<f64>) -> Vec<C> {
    v.into_iter().map(|x| C::new(x, 0.0)).collect()
}

/// `(1/2πi)∮` of the descriptor around the enclosed poles, by exact series extraction.
pub fn laurent_residue(d: &LaurentDescriptor, enclosed: Enclosed) -> Result<C> {
    let (a, b) = d.int_powers()?;
    let poly = if d.poly.is_empty() { vec![C::new(1.0, 0.0)] } else { d.poly.clone() };
    let mut total = C::new(0.0, 0.0);
    if matches!(enclosed, Enclosed::Zero | Enclosed::Both) && a < 0 {
        let len = (-a) as usize;
        let e = real(exp_series(d.t, len));
        // (z-1)^b = (-1)^b (1-z)^b
        let sign = if b.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let one_minus: Vec<C> = binomial_series(b, len)
            .iter()
            .enumerate()
            .map(|(k, &c)| C::new(sign * c * if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let s = mul_series(&mul_series(&e, &one_minus, len), &poly, len);
        total += s[len - 1] * (-d.t).exp();
    }
    if matches!(enclosed, Enclosed::One | Enclosed::Both) && b < 0 {
        let len = (-b) as usize;
        let e = real(exp_series(d.t, len));
        let shifted = real(binomial_series(a, len));
        // P(1+w) by Taylor shift
        let mut pw = vec![C::new(0.0, 0.0); poly.len()];
        for (k, &c) in poly.iter().enumerate() {
            for (j, bc) in binomial_series(k as i64, k + 1).into_iter().enumerate() {
                pw[j] += c * bc;
            }
        }
        let s = mul_series(&mul_series(&e, &shifted, len), &pw, len);
        total += s[len - 1];
    }
    Ok(total)
}
