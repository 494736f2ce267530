//! Closed-form probability evaluators: the 2-TASEP Green's function, multi-species ASEP
//! transition and total-crossing integrals, and cumulative crossing probabilities.

use crate::error::{Error, Result};
use crate::quadrature::{
    laurent_residue, pow_i, product_integrate, ContourProduct, ContourSpec, Enclosed, Integral, LaurentDescriptor,
    QuadratureOptions, Role, U_RADIUS, Z_RADIUS,
};
use crate::types::{
    determinant, enumerate_permutations_capped, BlockSignatureVector, ComplexPoint, IntegerComposition, Orientation,
    ParticleConfig, StrictSignature, DEFAULT_FACTORIAL_CAP,
};
use crate::vertex::{f_mu, sf_f_lambda, xi_mu};
use serde::{Deserialize, Serialize};

type C = ComplexPoint;

/// Largest tolerated imaginary part of a probability before it is discarded.
pub const IMAG_TOL: f64 = 1e-9;
/// Values in `[-NEG_TOL, 0)` are clamped to zero; anything lower is an error.
pub const NEG_TOL: f64 = 1e-9;
/// Default cap on the number of integration variables.
pub const DEFAULT_MAX_DIM: usize = 5;
/// Circle used for the inverted cumulative-crossing integrals: it encloses 0, 1 and 1 - ρ.
pub const BERNOULLI_CENTER: f64 = 0.5;
pub const BERNOULLI_RADIUS: f64 = 1.6;

/// Evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    Laurent,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulaOptions {
    pub quad: QuadratureOptions,
    pub max_dim: usize,
    pub factorial_cap: usize,
    /// Integrate every auxiliary variable even when the residue shortcut applies.
    pub force_tensor: bool,
}

impl Default for FormulaOptions {
    fn default() -> Self {
        Self { quad: QuadratureOptions::default(), max_dim: DEFAULT_MAX_DIM, factorial_cap: DEFAULT_FACTORIAL_CAP, force_tensor: false }
    }
}

/// A real probability together with its numerical provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub est_err: f64,
    pub method: Method,
    pub evaluations: u64,
}

impl Evaluation {
    fn exact(value: f64, method: Method) -> Self {
        Self { value, est_err: 0.0, method, evaluations: 0 }
    }
}

/// Strip the imaginary part and clamp round-off, rejecting anything that is not a probability.
pub fn to_probability(v: C, est_err: f64, method: Method, evaluations: u64) -> Result<Evaluation> {
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Accuracy { last: v.re, previous: f64::NAN, diff: f64::NAN });
    }
    if v.im.abs() > IMAG_TOL {
        return Err(Error::Accuracy { last: v.re, previous: v.im, diff: v.im.abs() });
    }
    if v.re < -NEG_TOL {
        return Err(Error::NegativeProbability(v.re));
    }
    if v.re > 1.0 + NEG_TOL {
        return Err(Error::Accuracy { last: v.re, previous: 1.0, diff: v.re - 1.0 });
    }
    Ok(Evaluation { value: v.re.clamp(0.0, 1.0), est_err, method, evaluations })
}

fn from_integral(i: Integral, method: Method) -> Result<Evaluation> {
    to_probability(i.value, i.est_err, method, i.evaluations)
}

fn check_dim(d: usize, opts: &FormulaOptions) -> Result<()> {
    if d > opts.max_dim {
        return Err(Error::ResourceLimit { what: format!("{d} integration variables"), cap: opts.max_dim as u64 });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

fn strictly_increasing(x: &[i64], what: &str) -> Result<()> {
    if x.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!("{what} must be strictly increasing: {x:?}")));
    }
    Ok(())
}

fn integrate(f: &(impl Fn(&[C]) -> C + Sync), contours: Vec<ContourSpec>, opts: &FormulaOptions) -> Result<Integral> {
    check_dim(contours.len(), opts)?;
    product_integrate(f, &ContourProduct::plain(contours), &opts.quad)
}

fn nan() -> C {
    C::new(f64::NAN, 0.0)
}

// ---------------------------------------------------------------------------
// 2-TASEP Green's function

type Perms = Vec<(Vec<usize>, i8)>;

fn eigen_p_inner(nu: &[i64], p: &[usize], t: f64, z: &[C], u: &[C], perms_n: &Perms, perms_m: &Perms) -> C {
    let n = z.len();
    let m = u.len();
    let one = C::new(1.0, 0.0);
    let time: C = z.iter().map(|&x| ((x.inv() - 1.0) * t).exp()).product();
    let mut total = C::new(0.0, 0.0);
    for (pi, sgn) in perms_n {
        let mut a = C::new(*sgn as f64, 0.0);
        for i in 1..=n {
            let zp = z[pi[i - 1]];
            a *= pow_i((one - z[i - 1]) / (one - zp), i as i64) * pow_i(zp, nu[i - 1]);
        }
        for &pi_ in p {
            for j in 1..=pi_ {
                a /= one - z[pi[j - 1]];
            }
        }
        let mut b = C::new(0.0, 0.0);
        for (sg, ss) in perms_m {
            let mut term = C::new(*ss as f64, 0.0);
            for i in 1..=m {
                let us = u[sg[i - 1]];
                term *= pow_i((one - u[i - 1]) / (one - us), i as i64);
                for j in 1..p[i - 1] {
                    term *= us - z[pi[j - 1]];
                }
            }
            b += term;
        }
        total += a * b;
    }
    total * time
}

/// The 2-TASEP eigenfunction `P(ν, p; t)` at spectral parameters `z` (length n) and `u` (length m).
///
/// `p` lists the 1-based indices of type-2 particles.
pub fn eigenfunction_p(nu: &[i64], p: &[usize], t: f64, z: &[C], u: &[C], factorial_cap: usize) -> Result<C> {
    if z.len() != nu.len() {
        return Err(Error::DimensionMismatch { expected: nu.len(), got: z.len() });
    }
    if u.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: u.len() });
    }
    if p.iter().any(|&i| i == 0 || i > nu.len()) {
        return Err(Error::InvalidInput(format!("type-2 indices {p:?} outside 1..={}", nu.len())));
    }
    let perms_n = enumerate_permutations_capped(nu.len(), factorial_cap)?;
    let perms_m = enumerate_permutations_capped(u.len(), factorial_cap)?;
    Ok(eigen_p_inner(nu, p, t, z, u, &perms_n, &perms_m))
}

/// A transition query for the two-species TASEP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenQuery {
    pub initial: ParticleConfig,
    #[serde(rename = "final")]
    pub target: ParticleConfig,
    pub t: f64,
    #[serde(default)]
    pub method: Method,
}

impl GreenQuery {
    pub fn new(initial: ParticleConfig, target: ParticleConfig, t: f64) -> Self {
        Self { initial, target, t, method: Method::Auto }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn validate(&self) -> Result<()> {
        check_time(self.t)?;
        for c in [&self.initial, &self.target] {
            if c.species().iter().any(|&s| s > 2) {
                return Err(Error::InvalidInput("two-species configurations use colours 1 and 2 only".into()));
            }
        }
        if self.initial.n() != self.target.n() {
            return Err(Error::DimensionMismatch { expected: self.initial.n(), got: self.target.n() });
        }
        if self.initial.m() != self.target.m() {
            return Err(Error::DimensionMismatch { expected: self.initial.m(), got: self.target.m() });
        }
        Ok(())
    }

    /// True when every type-2 particle starts left of every type-1 particle.
    pub fn type2_leading(&self) -> bool {
        self.initial.type2_indices().iter().enumerate().all(|(i, &p)| p == i + 1)
    }
}

fn green_integrand<'a>(
    q: &'a GreenQuery,
    perms_n: &'a Perms,
    perms_m: &'a Perms,
    fast: bool,
) -> impl Fn(&[C]) -> C + Sync + 'a {
    let n = q.initial.n();
    let mu = q.initial.positions();
    let nu = q.target.positions();
    let p0 = q.initial.type2_indices();
    let p = q.target.type2_indices();
    let m = p.len();
    let t = q.t;
    move |x: &[C]| {
        let z = &x[..n];
        let u: Vec<C> = if fast { z[..m].to_vec() } else { x[n..].to_vec() };
        let one = C::new(1.0, 0.0);
        let mut v = eigen_p_inner(nu, &p, t, z, &u, perms_n, perms_m);
        for i in 0..n {
            v *= pow_i(z[i], -mu[i] - 1) * pow_i(one - z[i], m as i64);
        }
        for i in 0..m {
            for j in 1..=p0[i] {
                if fast {
                    if j - 1 != i {
                        v /= z[i] - z[j - 1];
                    }
                } else {
                    v /= u[i] - z[j - 1];
                }
            }
            for j in p0[i] + 1..=n {
                v /= one - z[j - 1];
            }
        }
        v
    }
}

/// Staggered radii for the residue shortcut, keeping `z_i ≠ z_j` on the contours.
fn staggered_origin_radii(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.3 + 0.08 * i as f64).collect()
}

/// The Green's function by contour quadrature, with no shortcut at `t = 0`.
pub fn two_tasep_green_quadrature(q: &GreenQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    q.validate()?;
    let n = q.initial.n();
    let m = q.initial.m();
    let perms_n = enumerate_permutations_capped(n, opts.factorial_cap)?;
    let perms_m = enumerate_permutations_capped(m, opts.factorial_cap)?;
    let fast = q.type2_leading() && !opts.force_tensor;
    if fast {
        check_dim(n, opts)?;
        let f = green_integrand(q, &perms_n, &perms_m, true);
        let contours = staggered_origin_radii(n).into_iter().map(ContourSpec::origin).collect();
        let r = integrate(&f, contours, opts)?;
        return from_integral(r, Method::Quadrature);
    }
    check_dim(n + m, opts)?;
    let f = green_integrand(q, &perms_n, &perms_m, false);
    let mut contours = vec![ContourSpec::origin(Z_RADIUS); n];
    contours.extend(vec![ContourSpec::origin(U_RADIUS); m]);
    let mut roles = vec![Role::Z; n];
    roles.extend(vec![Role::U; m]);
    let cp = ContourProduct::new(contours, roles)?;
    let r = product_integrate(&f, &cp, &opts.quad)?;
    from_integral(r, Method::Quadrature)
}

/// Single-species TASEP transition probability as the determinant of contour integrals,
/// each evaluated exactly from its Laurent expansion.
pub fn schutz_determinant(mu: &[i64], nu: &[i64], t: f64) -> Result<f64> {
    check_time(t)?;
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: nu.len() });
    }
    strictly_increasing(mu, "initial positions")?;
    strictly_increasing(nu, "final positions")?;
    let n = mu.len();
    let mut mat = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let x = nu[i] - mu[k];
            let (ii, kk) = (i as i64, k as i64);
            // z -> 1/w turns the small circle into one enclosing both 0 and 1
            let d = LaurentDescriptor::new(t, ii - kk - x - 1, kk - ii);
            mat[i][k] = laurent_residue(&d, Enclosed::Both)?;
        }
    }
    let v = determinant(mat);
    Ok(to_probability(v, 0.0, Method::Laurent, 0)?.value)
}

/// `∮ (1-z)^p z^{x-1} e^{(1/z-1)t} dz/2πi` around the origin by direct power series.
pub fn schutz_entry_series(p: i64, x: i64, t: f64) -> f64 {
    // coefficient of z^b in (1-z)^p is (-1)^b C(p, b), generalised to negative p
    let mut total = 0.0;
    let mut coeff = 1.0;
    let mut b: i64 = 0;
    loop {
        let a = x + b;
        if a >= 0 {
            let mut term = coeff;
            for k in 1..=a {
                term *= t / k as f64;
            }
            total += term;
            if p >= 0 && b >= p {
                break;
            }
            if b > 400 || (p < 0 && term.abs() < 1e-18 * total.abs().max(1e-300) && b > 2 * (p.unsigned_abs() as i64) + 10) {
                break;
            }
        } else if p >= 0 && b >= p {
            break;
        }
        coeff *= -((p - b) as f64) / (b + 1) as f64;
        b += 1;
    }
    total * (-t).exp()
}

/// Same determinant as [`schutz_determinant`] with entries from [`schutz_entry_series`].
pub fn schutz_determinant_series(mu: &[i64], nu: &[i64], t: f64) -> Result<f64> {
    check_time(t)?;
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    let mat = (0..n)
        .map(|i| (0..n).map(|k| C::new(schutz_entry_series(k as i64 - i as i64, nu[i] - mu[k], t), 0.0)).collect())
        .collect();
    Ok(determinant(mat).re)
}

/// Transition probability of the two-species TASEP.
pub fn two_tasep_green(q: &GreenQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    q.validate()?;
    let n = q.initial.n();
    let m = q.initial.m();
    let mu = q.initial.positions();
    let nu = q.target.positions();
    if q.t == 0.0 {
        let v = if q.initial == q.target { 1.0 } else { 0.0 };
        return Ok(Evaluation::exact(v, Method::Laurent));
    }
    let single = m == 0 || m == n;
    let method = match q.method {
        Method::Auto if single => Method::Laurent,
        Method::Auto => Method::Quadrature,
        other => other,
    };
    match method {
        Method::Laurent => {
            if !single {
                return Err(Error::UnsupportedDescriptor(
                    "exact Laurent evaluation needs a single species (m = 0 or m = n)".into(),
                ));
            }
            Ok(Evaluation::exact(schutz_determinant(mu, nu, q.t)?, Method::Laurent))
        }
        _ => two_tasep_green_quadrature(q, opts),
    }
}

/// Outcome of comparing the Green's function with the single-species determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchutzReport {
    pub green: f64,
    pub determinant: f64,
    pub abs_diff: f64,
}

/// Compare the integral formula with the determinant when only one species is present.
pub fn schutz_reduction_check(n: usize, all_type2: bool, mu: &[i64], nu: &[i64], t: f64, opts: &FormulaOptions) -> Result<SchutzReport> {
    if mu.len() != n || nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len().min(nu.len()) });
    }
    let p: Vec<usize> = if all_type2 { (1..=n).collect() } else { Vec::new() };
    let q = GreenQuery::new(
        ParticleConfig::two_species(mu.to_vec(), &p)?,
        ParticleConfig::two_species(nu.to_vec(), &p)?,
        t,
    )
    .with_method(Method::Quadrature);
    let green = two_tasep_green(&q, opts)?.value;
    let det = schutz_determinant(mu, nu, t)?;
    Ok(SchutzReport { green, determinant: det, abs_diff: (green - det).abs() })
}

/// Total-crossing transition of the two-species TASEP as a product of two determinants.
///
/// Type-2 particles are the `m` leftmost of `mu` and the `m` rightmost of `nu`.
pub fn two_tasep_crossing(mu: &[i64], nu: &[i64], m: usize, t: f64, opts: &FormulaOptions) -> Result<Evaluation> {
    check_time(t)?;
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    if m > n {
        return Err(Error::InvalidInput(format!("m = {m} exceeds n = {n}")));
    }
    strictly_increasing(mu, "initial positions")?;
    strictly_increasing(nu, "final positions")?;
    if t == 0.0 {
        let crossed = m == 0 || m == n;
        let v = if crossed && mu == nu { 1.0 } else { 0.0 };
        return Ok(Evaluation::exact(v, Method::Laurent));
    }
    if m == 0 || m == n {
        return Ok(Evaluation::exact(schutz_determinant(mu, nu, t)?, Method::Laurent));
    }
    let k = n - m;
    let mu = mu.to_vec();
    let nu = nu.to_vec();
    let f = move |x: &[C]| {
        let (z, w) = x.split_at(m);
        let one = C::new(1.0, 0.0);
        let mut v = one;
        for &zi in z {
            v *= ((zi.inv() - 1.0) * t).exp() * pow_i(one - zi, -(k as i64));
        }
        for &wi in w {
            v *= ((wi.inv() - 1.0) * t).exp();
            for &zi in z {
                v *= wi - zi;
            }
        }
        let d1 = (0..m)
            .map(|i| (0..m).map(|j| pow_i(z[i], nu[k + j] - mu[i] - 1) * pow_i(one - z[i], i as i64 - j as i64)).collect())
            .collect();
        let d2 = (0..k)
            .map(|i| (0..k).map(|j| pow_i(w[i], nu[j] - mu[m + i] - 1) * pow_i(one - w[i], i as i64 - j as i64)).collect())
            .collect();
        v * determinant(d1) * determinant(d2)
    };
    let r = integrate(&f, vec![ContourSpec::origin(Z_RADIUS); n], opts)?;
    from_integral(r, Method::Quadrature)
}

// ---------------------------------------------------------------------------
// multi-species ASEP

/// Radius of the small circle around 1 used by the ASEP integrals.
///
/// Keeps the poles at `z_j = q z_i` and `z = 1/q` outside for every pair of variables.
pub fn asep_radius(q: f64) -> f64 {
    let d = (q - 1.0).abs();
    0.2f64.min(d / 3.0).min(0.9 * d / (1.0 + q))
}

fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::InvalidInput(format!("q must be finite and non-negative, got {q}")));
    }
    if q == 1.0 {
        return Err(Error::UnsupportedDescriptor("the symmetric case q = 1 is excluded".into()));
    }
    Ok(())
}

fn asep_time(z: C, q: f64, t: f64) -> C {
    let one = C::new(1.0, 0.0);
    ((1.0 - q) * (1.0 - q) * z * t / ((one - z) * (one - q * z))).exp()
}

fn vandermonde_ratio(z: &[C], q: f64) -> C {
    let mut v = C::new(1.0, 0.0);
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            v *= (z[j] - z[i]) / (z[j] - q * z[i]);
        }
    }
    v
}

fn asep_contours(n: usize, q: f64, staggered: bool) -> Vec<ContourSpec> {
    let r = asep_radius(q);
    (0..n)
        .map(|k| {
            let rk = if staggered { r * (1.0 - 0.5 * k as f64 / n as f64) } else { r };
            ContourSpec::around(1.0, rk, -1)
        })
        .collect()
}

/// Rainbow ASEP transition probability `P(μ → ν; t)`; particle `i` has colour `i`.
pub fn r_asep_transition(mu: &StrictSignature, nu: &IntegerComposition, q: f64, t: f64, opts: &FormulaOptions) -> Result<Evaluation> {
    check_time(t)?;
    check_q(q)?;
    let n = mu.len();
    if nu.parts().len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.parts().len() });
    }
    if !nu.is_strict() {
        return Err(Error::InvalidInput(format!("final composition {:?} must have distinct parts", nu.parts())));
    }
    if q == 0.0 {
        return Err(Error::UnsupportedDescriptor("the f-function integrand needs q > 0; use the crossing formulas".into()));
    }
    let mu_p = mu.parts().to_vec();
    let nu_p = nu.parts().to_vec();
    if t == 0.0 {
        return Ok(Evaluation::exact(if mu_p == nu_p { 1.0 } else { 0.0 }, Method::Laurent));
    }
    let sh = q.powf(-0.5);
    let weight: i64 = nu_p.iter().sum();
    let pref = C::new(-sh, 0.0).powi(weight as i32);
    let f = move |z: &[C]| {
        let one = C::new(1.0, 0.0);
        let mut v = pref * vandermonde_ratio(z, q);
        for (j, &zj) in z.iter().enumerate() {
            v *= asep_time(zj, q, t) / (zj * (one - zj)) * pow_i((one - q * zj) / (one - zj), mu_p[j]);
        }
        let arg: Vec<C> = z.iter().map(|&x| sh / x).collect();
        match f_mu(&nu_p, &arg, q, C::new(sh, 0.0)) {
            Ok(fv) => v * fv,
            Err(_) => nan(),
        }
    };
    let r = integrate(&f, asep_contours(n, q, false), opts)?;
    from_integral(r, Method::Quadrature)
}

/// Probability that `n` distinct colours starting at `μ_1 > ... > μ_n` end at `ν_1 < ... < ν_n`.
pub fn rainbow_total_crossing(mu: &[i64], nu: &[i64], q: f64, t: f64, opts: &FormulaOptions) -> Result<Evaluation> {
    check_time(t)?;
    check_q(q)?;
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: nu.len() });
    }
    if mu.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidInput(format!("initial positions must be strictly decreasing: {mu:?}")));
    }
    strictly_increasing(nu, "final positions")?;
    if t == 0.0 {
        return Ok(Evaluation::exact(if n <= 1 && mu == nu { 1.0 } else { 0.0 }, Method::Laurent));
    }
    let diff: Vec<i64> = mu.iter().zip(nu).map(|(a, b)| a - b).collect();
    let pref = (1.0 - q).powi(n as i32);
    let f = move |z: &[C]| {
        let one = C::new(1.0, 0.0);
        let mut v = vandermonde_ratio(z, q) * pref;
        for (j, &zj) in z.iter().enumerate() {
            v *= asep_time(zj, q, t) / ((one - zj) * (one - q * zj)) * pow_i((one - q * zj) / (one - zj), diff[j]);
        }
        v
    };
    let r = integrate(&f, asep_contours(n, q, false), opts)?;
    from_integral(r, Method::Quadrature)
}

/// Total crossing of colour blocks in the multi-species ASEP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingQuery {
    pub mu: BlockSignatureVector,
    pub lambda: BlockSignatureVector,
    pub q: f64,
    pub t: f64,
}

impl CrossingQuery {
    pub fn new(mu: Vec<Vec<i64>>, lambda: Vec<Vec<i64>>, q: f64, t: f64) -> Result<Self> {
        Ok(Self {
            mu: BlockSignatureVector::new(mu, Orientation::Initial)?,
            lambda: BlockSignatureVector::new(lambda, Orientation::Final)?,
            q,
            t,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_time(self.t)?;
        check_q(self.q)?;
        if self.mu.orientation() != Orientation::Initial || self.lambda.orientation() != Orientation::Final {
            return Err(Error::InvalidInput("initial blocks must be Initial-oriented and final blocks Final-oriented".into()));
        }
        if self.mu.sizes() != self.lambda.sizes() {
            return Err(Error::InvalidInput(format!(
                "block sizes differ: {:?} vs {:?}",
                self.mu.sizes(),
                self.lambda.sizes()
            )));
        }
        Ok(())
    }

    /// Coloured initial configuration (block `k` carries colour `k`).
    pub fn initial_config(&self) -> Result<ParticleConfig> {
        ParticleConfig::from_blocks(&self.mu)
    }

    /// Coloured final configuration.
    pub fn final_config(&self) -> Result<ParticleConfig> {
        ParticleConfig::from_blocks(&self.lambda)
    }

    fn trivial_at_zero(&self) -> Evaluation {
        let same = self.mu.flat() == self.lambda.flat() && self.mu.blocks().len() <= 1;
        Evaluation::exact(if same { 1.0 } else { 0.0 }, Method::Laurent)
    }
}

/// Block total-crossing probability via the per-block symmetric functions.
pub fn block_crossing(cq: &CrossingQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    cq.validate()?;
    if cq.t == 0.0 {
        return Ok(cq.trivial_at_zero());
    }
    let n = cq.mu.n();
    for &nk in &cq.mu.sizes() {
        if nk > opts.factorial_cap {
            return Err(Error::ResourceLimit { what: format!("block of size {nk}"), cap: opts.factorial_cap as u64 });
        }
    }
    let (q, t) = (cq.q, cq.t);
    let offsets = cq.mu.offsets();
    let mus: Vec<Vec<i64>> = cq.mu.blocks().iter().map(|b| b.parts().to_vec()).collect();
    let lams: Vec<Vec<i64>> = cq.lambda.blocks().iter().map(|b| b.parts().to_vec()).collect();
    let pref = (1.0 - q).powi(n as i32);
    let f = move |z: &[C]| {
        let one = C::new(1.0, 0.0);
        let mut v = vandermonde_ratio(z, q) * pref;
        for &zj in z {
            v *= asep_time(zj, q, t) / ((one - zj) * (one - q * zj));
        }
        for (k, off) in offsets.iter().enumerate() {
            let zk = &z[*off..*off + mus[k].len()];
            match sf_f_lambda(&lams[k], zk, q) {
                Ok(fv) => v *= xi_mu(&mus[k], zk, q) * fv,
                Err(_) => return nan(),
            }
        }
        v
    };
    let r = integrate(&f, asep_contours(n, q, true), opts)?;
    from_integral(r, Method::Quadrature)
}

/// Single-species ASEP transition `λ` from `μ` (both strictly decreasing), summing one
/// integral per permutation term of the symmetric function.
pub fn single_species_transition(mu: &[i64], lambda: &[i64], q: f64, t: f64, opts: &FormulaOptions) -> Result<Evaluation> {
    check_time(t)?;
    check_q(q)?;
    let n = mu.len();
    if lambda.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: lambda.len() });
    }
    for (x, what) in [(mu, "initial"), (lambda, "final")] {
        if x.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidInput(format!("{what} positions must be strictly decreasing: {x:?}")));
        }
    }
    if t == 0.0 {
        return Ok(Evaluation::exact(if mu == lambda { 1.0 } else { 0.0 }, Method::Laurent));
    }
    let perms = enumerate_permutations_capped(n, opts.factorial_cap)?;
    let pref = (1.0 - q).powi(n as i32);
    let mut total = C::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0;
    for (sigma, _) in &perms {
        let f = |z: &[C]| {
            let one = C::new(1.0, 0.0);
            let mut v = vandermonde_ratio(z, q) * pref * xi_mu(mu, z, q);
            for &zj in z {
                v *= asep_time(zj, q, t) / ((one - zj) * (one - q * zj));
            }
            let w: Vec<C> = sigma.iter().map(|&k| z[k]).collect();
            for i in 0..n {
                for j in i + 1..n {
                    v *= (w[j] - q * w[i]) / (w[j] - w[i]);
                }
                v *= pow_i((one - w[i]) / (one - q * w[i]), lambda[i]);
            }
            v
        };
        let r = integrate(&f, asep_contours(n, q, true), opts)?;
        total += r.value;
        err += r.est_err;
        evals += r.evaluations;
    }
    to_probability(total, err, Method::Quadrature, evals)
}

/// Block total-crossing probability of the multi-species TASEP (`q = 0`) as a product of
/// per-block determinants.
pub fn tasep_block_crossing(cq: &CrossingQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    cq.validate()?;
    if cq.q != 0.0 {
        return Err(Error::InvalidInput(format!("the TASEP block formula needs q = 0, got {}", cq.q)));
    }
    if cq.t == 0.0 {
        return Ok(cq.trivial_at_zero());
    }
    let n = cq.mu.n();
    let t = cq.t;
    let offsets = cq.mu.offsets();
    let mus: Vec<Vec<i64>> = cq.mu.blocks().iter().map(|b| b.parts().to_vec()).collect();
    let lams: Vec<Vec<i64>> = cq.lambda.blocks().iter().map(|b| b.parts().to_vec()).collect();
    let f = move |z: &[C]| {
        let one = C::new(1.0, 0.0);
        let mut v = one;
        for &zj in z {
            v *= (zj * t / (one - zj)).exp();
        }
        let r = offsets.len();
        for k in 0..r {
            for l in k + 1..r {
                for i in 0..mus[k].len() {
                    for j in 0..mus[l].len() {
                        v *= z[offsets[l] + j] - z[offsets[k] + i];
                    }
                }
            }
            let nk = mus[k].len();
            let zk = &z[offsets[k]..offsets[k] + nk];
            let big_n = offsets[k] as i64;
            let mat = (0..nk)
                .map(|i| {
                    (0..nk)
                        .map(|j| pow_i(zk[j], i as i64 - j as i64 - big_n) * pow_i(one - zk[j], lams[k][i] - mus[k][j] - 1))
                        .collect()
                })
                .collect();
            v *= determinant(mat);
        }
        v
    };
    let r = integrate(&f, asep_contours(n, 0.0, false), opts)?;
    from_integral(r, Method::Quadrature)
}

// ---------------------------------------------------------------------------
// cumulative crossing

/// Cumulative total crossing event: type-1 particles end in `[s1, s2)`, type-2 particles at or beyond `s2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallQuery {
    pub s1: i64,
    pub s2: i64,
    pub rho: f64,
    pub n: usize,
    pub m: usize,
    pub t: f64,
}

impl WallQuery {
    pub fn validate(&self) -> Result<()> {
        check_time(self.t)?;
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidInput(format!("density must lie in (0, 1], got {}", self.rho)));
        }
        if self.m > self.n || self.n == 0 {
            return Err(Error::InvalidInput(format!("need 0 <= m <= n and n >= 1, got n={}, m={}", self.n, self.m)));
        }
        Ok(())
    }

    /// True when the event is impossible because the type-1 window is too narrow.
    pub fn empty_window(&self) -> bool {
        self.s2 - self.s1 < (self.n - self.m) as i64
    }

    /// Step-step initial positions: type 2 on `-m..-1`, type 1 on `0..n-m-1`.
    pub fn step_positions(&self) -> Vec<i64> {
        (-(self.m as i64)..(self.n - self.m) as i64).collect()
    }
}

fn wall_det_direct(w: &[C], width: i64) -> C {
    let k = w.len();
    let mat = (0..k).map(|i| (0..k).map(|j| pow_i(w[i], j as i64) - pow_i(w[i], width)).collect()).collect();
    determinant(mat)
}

fn ordered_pair_product(z: &[C]) -> C {
    let mut v = C::new(1.0, 0.0);
    for i in 0..z.len() {
        for j in 0..z.len() {
            if i != j {
                v *= z[j] - z[i];
            }
        }
    }
    v
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Cumulative crossing probability from fixed initial positions `mu`; the first `m` particles are type 2.
pub fn cumulative_crossing_step(mu: &[i64], m: usize, s1: i64, s2: i64, t: f64, opts: &FormulaOptions) -> Result<Evaluation> {
    check_time(t)?;
    let n = mu.len();
    if m > n {
        return Err(Error::InvalidInput(format!("m = {m} exceeds n = {n}")));
    }
    strictly_increasing(mu, "initial positions")?;
    if s2 - s1 < (n - m) as i64 {
        return Ok(Evaluation::exact(0.0, Method::Laurent));
    }
    if t == 0.0 {
        let ok = mu[..m].iter().all(|&x| x >= s2) && mu[m..].iter().all(|&x| x >= s1 && x < s2);
        return Ok(Evaluation::exact(if ok { 1.0 } else { 0.0 }, Method::Laurent));
    }
    let k = n - m;
    let mu = mu.to_vec();
    let f = move |x: &[C]| {
        let (z, w) = x.split_at(m);
        let one = C::new(1.0, 0.0);
        let mut v = one;
        for i in 0..m {
            for &wj in w {
                v *= wj - z[i];
            }
            for j in i + 1..m {
                v *= z[j] - z[i];
            }
            v *= ((z[i].inv() - 1.0) * t).exp() * pow_i(z[i], s2 - 1 - mu[i]) * pow_i(one - z[i], -((n - i) as i64));
        }
        for i in 0..k {
            v *= ((w[i].inv() - 1.0) * t).exp() * pow_i(w[i], s1 - 1 - mu[i + m]) * pow_i(one - w[i], -((k - i) as i64));
        }
        v * wall_det_direct(w, s2 - s1)
    };
    let r = integrate(&f, vec![ContourSpec::origin(Z_RADIUS); n], opts)?;
    from_integral(r, Method::Quadrature)
}

/// Bernoulli-step cumulative crossing with integration circles around the origin.
pub fn cumulative_crossing_bernoulli(w: &WallQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    w.validate()?;
    if w.empty_window() {
        return Ok(Evaluation::exact(0.0, Method::Laurent));
    }
    let WallQuery { s1, s2, rho, n, m, t } = *w;
    let k = n - m;
    let pref = rho.powi(m as i32) / factorial(m);
    let f = move |x: &[C]| {
        let (z, wv) = x.split_at(m);
        let one = C::new(1.0, 0.0);
        let mut v = ordered_pair_product(z) * pref;
        for &zi in z {
            for &wj in wv {
                v *= wj - zi;
            }
            v *= ((zi.inv() - 1.0) * t).exp() * pow_i(zi, s2) / (pow_i(one - zi, n as i64) * (one - (1.0 - rho) * zi));
        }
        for (i, &wi) in wv.iter().enumerate() {
            let i1 = i as i64 + 1;
            v *= ((wi.inv() - 1.0) * t).exp() * pow_i(wi, s1 - i1) / pow_i(one - wi, k as i64 - i1 + 1);
        }
        v * wall_det_direct(wv, s2 - s1)
    };
    let r = integrate(&f, vec![ContourSpec::origin(Z_RADIUS); n], opts)?;
    from_integral(r, Method::Quadrature)
}

fn bernoulli_circle() -> ContourSpec {
    ContourSpec::around(BERNOULLI_CENTER, BERNOULLI_RADIUS, 1)
}

/// Bernoulli-step cumulative crossing after inverting every integration variable.
pub fn cumulative_crossing_bernoulli_inverted(w: &WallQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    w.validate()?;
    if w.empty_window() {
        return Ok(Evaluation::exact(0.0, Method::Laurent));
    }
    let WallQuery { s1, s2, rho, n, m, t } = *w;
    let k = n - m;
    let pref = rho.powi(m as i32) / factorial(m);
    let f = move |x: &[C]| {
        let (z, wv) = x.split_at(m);
        let one = C::new(1.0, 0.0);
        let mut v = ordered_pair_product(z) * pref;
        for &zi in z {
            v *= ((zi - 1.0) * t).exp() * pow_i(zi, -s2 - m as i64 + 1) / (pow_i(zi - one, n as i64) * (zi - 1.0 + rho));
            for &wj in wv {
                v *= zi - wj;
            }
        }
        for (i, &wi) in wv.iter().enumerate() {
            let i1 = i as i64 + 1;
            v *= ((wi - 1.0) * t).exp() * pow_i(wi, -s1 - m as i64) / pow_i(wi - one, k as i64 - i1 + 1);
        }
        let kk = k as i64;
        let mat = (0..k)
            .map(|i| (0..k).map(|j| pow_i(wv[i], kk - j as i64 - 1) - pow_i(wv[i], kk + s1 - s2 - 1)).collect())
            .collect();
        v * determinant(mat)
    };
    let r = integrate(&f, vec![bernoulli_circle(); n], opts)?;
    from_integral(r, Method::Quadrature)
}

fn require_one_wall(w: &WallQuery) -> Result<()> {
    if w.s1 > -(w.m as i64) {
        return Err(Error::InvalidInput(format!(
            "the one-wall forms need s1 <= -m (s1 = {}, m = {}); use the general Bernoulli form",
            w.s1, w.m
        )));
    }
    Ok(())
}

/// One-wall cumulative crossing: the type-1 integrals collapse to a single one.
pub fn cumulative_crossing_one_wall(w: &WallQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    w.validate()?;
    require_one_wall(w)?;
    if w.empty_window() {
        return Ok(Evaluation::exact(0.0, Method::Laurent));
    }
    let WallQuery { s2, rho, n, m, t, .. } = *w;
    let pref = rho.powi(m as i32) / factorial(m);
    let f = move |x: &[C]| {
        let (z, wv) = x.split_at(m);
        let wv = wv[0];
        let one = C::new(1.0, 0.0);
        let mut v = ordered_pair_product(z) * pref;
        for &zi in z {
            v *= ((zi - 1.0) * t).exp() * pow_i(zi, -s2 - m as i64 + 1) / (pow_i(zi - one, m as i64 + 1) * (zi - 1.0 + rho));
            v *= wv - zi;
        }
        v * ((wv - 1.0) * t).exp() * pow_i(wv, n as i64 - 2 * m as i64 - s2 - 1) / (wv - one)
    };
    let mut contours = vec![bernoulli_circle(); m];
    contours.push(ContourSpec::origin(0.5));
    let r = integrate(&f, contours, opts)?;
    from_integral(r, Method::Quadrature)
}

/// One-wall cumulative crossing as a single integral of an `m × m` determinant.
///
/// Each determinant entry is linear in the outer variable; its two coefficients are single
/// contour integrals. The outer integrand is then `e^{(w-1)t} w^a (w-1)^{-1}` times a polynomial,
/// which is integrated exactly.
pub fn cumulative_crossing_one_wall_det(w: &WallQuery, opts: &FormulaOptions) -> Result<Evaluation> {
    w.validate()?;
    require_one_wall(w)?;
    if w.empty_window() {
        return Ok(Evaluation::exact(0.0, Method::Laurent));
    }
    let WallQuery { s2, rho, n, m, t, .. } = *w;
    let mut evals = 0;
    let mut err: f64 = 0.0;
    let mut moment = |power: i64| -> Result<C> {
        let f = move |x: &[C]| {
            let z = x[0];
            ((z - 1.0) * t).exp() * pow_i(z, power) / (pow_i(z - 1.0, m as i64 + 1) * (z - 1.0 + rho))
        };
        let r = integrate(&f, vec![bernoulli_circle()], opts)?;
        evals += r.evaluations;
        err = err.max(r.est_err);
        Ok(r.value)
    };
    let mut a = vec![vec![C::new(0.0, 0.0); m]; m];
    let mut b = a.clone();
    for i in 1..=m {
        for j in 1..=m {
            let e = (i + j) as i64 - s2 - m as i64 - 1;
            a[i - 1][j - 1] = moment(e)?;
            b[i - 1][j - 1] = moment(e + 1)?;
        }
    }
    // coefficients of det(w a - b), a polynomial of degree m, by discrete Fourier interpolation
    let deg = m + 1;
    let samples: Vec<(C, C)> = (0..deg)
        .map(|k| {
            let wk = C::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / deg as f64);
            let mat = (0..m).map(|i| (0..m).map(|j| wk * a[i][j] - b[i][j]).collect()).collect();
            (wk, determinant(mat))
        })
        .collect();
    let poly: Vec<C> = (0..deg)
        .map(|j| samples.iter().map(|(wk, d)| d * pow_i(*wk, -(j as i64))).sum::<C>() / deg as f64)
        .collect();
    let d = LaurentDescriptor::new(t, n as i64 - 2 * m as i64 - s2 - 1, -1).with_poly(poly);
    let v = laurent_residue(&d, Enclosed::Zero)? * rho.powi(m as i32);
    to_probability(v, err, Method::Laurent, evals)
}

/// Probability that all `n` particles of a single-species TASEP started at `1..=n` are at or beyond `s`.
pub fn gamma_wall(n: usize, s: i64, t: f64) -> Result<f64> {
    check_time(t)?;
    if n == 0 {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(if s <= 1 { 1.0 } else { 0.0 });
    }
    let nn = n as i64;
    let mut mat = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 1..=nn {
        for k in 1..=nn {
            let d = LaurentDescriptor::new(t, 1 - s + i + k - 2, -nn);
            mat[(i - 1) as usize][(k - 1) as usize] = laurent_residue(&d, Enclosed::Both)?;
        }
    }
    let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(to_probability(determinant(mat) * sign, 0.0, Method::Laurent, 0)?.value)
}

/// [`gamma_wall`] by direct `n`-fold quadrature of the symmetrized integral.
pub fn gamma_wall_quadrature(n: usize, s: i64, t: f64, opts: &FormulaOptions) -> Result<Evaluation> {
    check_time(t)?;
    let nn = n as i64;
    let pref = 1.0 / factorial(n);
    let f = move |z: &[C]| {
        let mut v = ordered_pair_product(z) * pref;
        for &zi in z {
            v *= ((zi - 1.0) * t).exp() * pow_i(zi, 1 - s) / pow_i(zi - 1.0, nn);
        }
        v
    };
    let r = integrate(&f, vec![bernoulli_circle(); n], opts)?;
    from_integral(r, Method::Quadrature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::WindowGenerator;

    fn opts() -> FormulaOptions {
        FormulaOptions { quad: QuadratureOptions { tol: 1e-12, ..Default::default() }, ..Default::default() }
    }

    fn poisson(t: f64, k: i64) -> f64 {
        (-t).exp() * t.powi(k as i32) / (1..=k).map(|x| x as f64).product::<f64>()
    }

    fn expm(mu: &ParticleConfig, nu: &ParticleConfig, q: f64, t: f64, lo: i64, hi: i64) -> f64 {
        let g = WindowGenerator::build(mu, lo, hi, q).unwrap();
        let (v, sink) = g.expm_transition(mu, nu, t).unwrap();
        assert!(sink < 1e-8, "window leak {sink}");
        v
    }

    #[test]
    fn poisson_reduction() {
        let o = opts();
        for k in 0..=6 {
            let q = GreenQuery::new(
                ParticleConfig::two_species(vec![0], &[]).unwrap(),
                ParticleConfig::two_species(vec![k], &[]).unwrap(),
                1.0,
            );
            for m in [Method::Laurent, Method::Quadrature] {
                let v = two_tasep_green(&q.clone().with_method(m), &o).unwrap().value;
                assert!((v - poisson(1.0, k)).abs() < 1e-10, "{k} {m:?}: {v}");
            }
        }
    }

    #[test]
    fn schutz_paths_agree() {
        for (mu, nu, t) in [(vec![0, 1], vec![2, 3], 0.7), (vec![-1, 2], vec![1, 4], 1.3), (vec![0, 1, 3], vec![1, 3, 4], 0.9)] {
            let a = schutz_determinant(&mu, &nu, t).unwrap();
            let b = schutz_determinant_series(&mu, &nu, t).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
        assert_eq!(schutz_determinant(&[0, 1], &[0, 1], 0.0).unwrap(), 1.0);
        assert_eq!(schutz_determinant(&[0, 1], &[0, 2], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn schutz_reduction_both_species() {
        let o = opts();
        for all2 in [false, true] {
            let rep = schutz_reduction_check(2, all2, &[0, 2], &[1, 3], 0.7, &o).unwrap();
            assert!(rep.abs_diff < 1e-9, "{rep:?}");
        }
    }

    #[test]
    fn green_matches_generator() {
        let mu = ParticleConfig::two_species(vec![0, 1], &[1]).unwrap();
        let nu = ParticleConfig::two_species(vec![1, 2], &[2]).unwrap();
        let want = expm(&mu, &nu, 0.0, 1.0, -4, 12);
        let q = GreenQuery::new(mu.clone(), nu.clone(), 1.0);
        let fast = two_tasep_green(&q, &opts()).unwrap().value;
        let full = two_tasep_green(&q, &FormulaOptions { force_tensor: true, ..opts() }).unwrap().value;
        assert!((fast - want).abs() < 1e-6, "{fast} vs {want}");
        assert!((full - want).abs() < 1e-6, "{full} vs {want}");
        // type-2 particle starting on the right
        let mu = ParticleConfig::two_species(vec![0, 1], &[2]).unwrap();
        let nu = ParticleConfig::two_species(vec![1, 3], &[2]).unwrap();
        let want = expm(&mu, &nu, 0.0, 1.0, -4, 12);
        let v = two_tasep_green(&GreenQuery::new(mu, nu, 1.0), &opts()).unwrap().value;
        assert!((v - want).abs() < 1e-6, "{v} vs {want}");
    }

    #[test]
    fn green_initial_condition() {
        let mu = ParticleConfig::two_species(vec![0, 1], &[1]).unwrap();
        let q = GreenQuery::new(mu.clone(), mu.clone(), 0.0);
        assert_eq!(two_tasep_green(&q, &opts()).unwrap().value, 1.0);
        let nu = ParticleConfig::two_species(vec![0, 1], &[2]).unwrap();
        assert_eq!(two_tasep_green(&GreenQuery::new(mu, nu, 0.0), &opts()).unwrap().value, 0.0);
    }

    #[test]
    fn crossing_determinant_matches_green() {
        let o = opts();
        let v = two_tasep_crossing(&[0, 1], &[2, 3], 1, 1.0, &o).unwrap().value;
        let q = GreenQuery::new(
            ParticleConfig::two_species(vec![0, 1], &[1]).unwrap(),
            ParticleConfig::two_species(vec![2, 3], &[2]).unwrap(),
            1.0,
        );
        let g = two_tasep_green(&q, &o).unwrap().value;
        assert!((v - g).abs() < 1e-8, "{v} vs {g}");
        let s = two_tasep_crossing(&[0, 1], &[2, 3], 0, 1.0, &o).unwrap().value;
        assert!((s - schutz_determinant(&[0, 1], &[2, 3], 1.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn asep_single_particle() {
        let o = opts();
        let mu = StrictSignature::new(vec![0]).unwrap();
        let nu = IntegerComposition::strict(vec![1]).unwrap();
        let v = r_asep_transition(&mu, &nu, 0.5, 1.0, &o).unwrap().value;
        let c0 = ParticleConfig::from_colour_positions(&[0]).unwrap();
        let c1 = ParticleConfig::from_colour_positions(&[1]).unwrap();
        let want = expm(&c0, &c1, 0.5, 1.0, -15, 15);
        assert!((v - want).abs() < 1e-8, "{v} vs {want}");
        let r = rainbow_total_crossing(&[0], &[1], 0.5, 1.0, &o).unwrap().value;
        assert!((r - v).abs() < 1e-10);
        let z = r_asep_transition(&mu, &IntegerComposition::strict(vec![0]).unwrap(), 0.5, 0.0, &o).unwrap();
        assert_eq!(z.value, 1.0);
        assert!(r_asep_transition(&mu, &nu, 1.0, 1.0, &o).is_err());
    }

    #[test]
    fn asep_two_colours() {
        let o = opts();
        let q = 0.5;
        let mu = StrictSignature::new(vec![1, 0]).unwrap();
        let start = ParticleConfig::from_colour_positions(&[1, 0]).unwrap();
        let g = WindowGenerator::build(&start, -10, 12, q).unwrap();
        for nu in [vec![1, 0], vec![0, 1], vec![2, -1], vec![-1, 3]] {
            let v = r_asep_transition(&mu, &IntegerComposition::strict(nu.clone()).unwrap(), q, 1.0, &o).unwrap().value;
            let target = ParticleConfig::from_colour_positions(&nu).unwrap();
            let (want, _) = g.expm_transition(&start, &target, 1.0).unwrap();
            assert!((v - want).abs() < 1e-6, "{nu:?}: {v} vs {want}");
        }
        let a = rainbow_total_crossing(&[1, 0], &[0, 1], q, 1.0, &o).unwrap().value;
        let b = r_asep_transition(&mu, &IntegerComposition::strict(vec![0, 1]).unwrap(), q, 1.0, &o).unwrap().value;
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn rainbow_shift_invariance() {
        let o = opts();
        let a = rainbow_total_crossing(&[3, 0], &[1, 4], 0.5, 1.0, &o).unwrap().value;
        let b = rainbow_total_crossing(&[3, 1], &[1, 5], 0.5, 1.0, &o).unwrap().value;
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        assert!(rainbow_total_crossing(&[0, 3], &[1, 4], 0.5, 1.0, &o).is_err());
    }

    #[test]
    fn block_degenerations() {
        let o = opts();
        let (q, t) = (0.4, 0.8);
        let rb = rainbow_total_crossing(&[2, 0], &[0, 2], q, t, &o).unwrap().value;
        let blk = block_crossing(&CrossingQuery::new(vec![vec![2], vec![0]], vec![vec![0], vec![2]], q, t).unwrap(), &o).unwrap().value;
        assert!((rb - blk).abs() < 1e-10, "{rb} vs {blk}");
        let one = block_crossing(&CrossingQuery::new(vec![vec![1, 0]], vec![vec![3, 1]], q, t).unwrap(), &o).unwrap().value;
        let ss = single_species_transition(&[1, 0], &[3, 1], q, t, &o).unwrap().value;
        assert!((one - ss).abs() < 1e-10, "{one} vs {ss}");
        let start = ParticleConfig::new(vec![0, 1], vec![1, 1]).unwrap();
        let target = ParticleConfig::new(vec![1, 3], vec![1, 1]).unwrap();
        let want = expm(&start, &target, q, t, -10, 14);
        assert!((one - want).abs() < 1e-6, "{one} vs {want}");
    }

    #[test]
    fn tasep_blocks() {
        let o = opts();
        let cq = CrossingQuery::new(vec![vec![0], vec![-1]], vec![vec![2], vec![3]], 0.0, 1.0).unwrap();
        let a = tasep_block_crossing(&cq, &o).unwrap().value;
        let b = block_crossing(&cq, &o).unwrap().value;
        let c = two_tasep_crossing(&[-1, 0], &[2, 3], 1, 1.0, &o).unwrap().value;
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        assert!((a - c).abs() < 1e-8, "{a} vs {c}");
        let z = tasep_block_crossing(&CrossingQuery { t: 0.0, ..cq.clone() }, &o).unwrap().value;
        assert_eq!(z, 0.0);
        let cq = CrossingQuery::new(vec![vec![2], vec![1, 0]], vec![vec![1], vec![3, 2]], 0.0, 1.2).unwrap();
        let v = tasep_block_crossing(&cq, &o).unwrap().value;
        let want = expm(&cq.initial_config().unwrap(), &cq.final_config().unwrap(), 0.0, 1.2, -2, 14);
        assert!((v - want).abs() < 1e-6, "{v} vs {want}");
    }

    #[test]
    fn step_cumulative_matches_sum() {
        let o = opts();
        let (mu, s1, s2, t) = ([-1i64, 0], 0, 2, 1.0);
        let v = cumulative_crossing_step(&mu, 1, s1, s2, t, &o).unwrap().value;
        let mut sum = 0.0;
        for a in s1..s2 {
            for b in s2..s2 + 40 {
                sum += two_tasep_crossing(&mu, &[a, b], 1, t, &o).unwrap().value;
            }
        }
        assert!((v - sum).abs() < 1e-7, "{v} vs {sum}");
        assert_eq!(cumulative_crossing_step(&mu, 1, 0, 0, t, &o).unwrap().value, 0.0);
    }

    #[test]
    fn bernoulli_forms_agree() {
        let o = opts();
        let w = WallQuery { s1: -3, s2: 2, rho: 0.5, n: 2, m: 1, t: 2.0 };
        let a = cumulative_crossing_bernoulli(&w, &o).unwrap().value;
        let b = cumulative_crossing_bernoulli_inverted(&w, &o).unwrap().value;
        let c = cumulative_crossing_one_wall(&w, &o).unwrap().value;
        let d = cumulative_crossing_one_wall_det(&w, &o).unwrap().value;
        assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9 && (a - d).abs() < 1e-9, "{a} {b} {c} {d}");
        // sum over Bernoulli initial data of the fixed-start form
        let mut sum = 0.0;
        for x in 1..60i64 {
            let p = 0.5 * 0.5f64.powi(x as i32 - 1);
            sum += p * cumulative_crossing_step(&[-x, 0], 1, w.s1, w.s2, w.t, &o).unwrap().value;
        }
        assert!((a - sum).abs() < 1e-9, "{a} vs {sum}");
        let bad = WallQuery { s1: 0, ..w };
        assert!(cumulative_crossing_one_wall(&bad, &o).is_err());
    }

    #[test]
    fn bernoulli_step_limit() {
        let o = opts();
        let w = WallQuery { s1: -3, s2: 2, rho: 1.0, n: 2, m: 1, t: 2.0 };
        let a = cumulative_crossing_bernoulli(&w, &o).unwrap().value;
        let b = cumulative_crossing_step(&w.step_positions(), 1, w.s1, w.s2, w.t, &o).unwrap().value;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn gamma_examples() {
        let t = 1.0;
        assert!((gamma_wall(1, 2, t).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert_eq!(gamma_wall(2, 5, 0.0).unwrap(), 0.0);
        for (n, s) in [(1usize, 3i64), (2, 4), (3, 5)] {
            let a = gamma_wall(n, s, 1.7).unwrap();
            let b = gamma_wall_quadrature(n, s, 1.7, &opts()).unwrap().value;
            assert!((a - b).abs() < 1e-10, "{n} {s}: {a} vs {b}");
        }
        // two particles from 1, 2: both at or beyond 4
        let start = ParticleConfig::new(vec![1, 2], vec![1, 1]).unwrap();
        let g = WindowGenerator::build(&start, 1, 30, 0.0).unwrap();
        let d = g.evolve(&start, 1.7).unwrap();
        let mut want = 0.0;
        for (i, p) in d.probs.iter().enumerate() {
            if g.config_of(i).positions()[0] >= 4 {
                want += p;
            }
        }
        assert!((gamma_wall(2, 4, 1.7).unwrap() - want).abs() < 1e-8);
    }
}
