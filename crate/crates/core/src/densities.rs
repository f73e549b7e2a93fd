//! Local densities `σ_ϖ`, the `(N)!` partial-sum identity and the truncated
//! singular series.
//!
//! For a prime `ϖ` with `ν = ν_ϖ(g)` the level-`k` density is
//!
//! ```text
//! #{x mod ϖ^{k+ν} : F(x) ≡ f, x ≡ λ mod ϖ^ν} / |ϖ|^{(d−1)k}
//! ```
//!
//! and `σ_ϖ` is its limit. With this normalization `σ_ϖ = 1` for every
//! `ϖ | g`, and `Σ_r |gr|^{-d} S_{g,r}(0) = Π_ϖ σ_ϖ`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basefield::ScaledCyclotomic;
use crate::error::{guard, Error, Result};
use crate::expsums::{log_slope, s_best, tables, EncodedForm, Instance};
use crate::polyring::{
    irreducibles_of_degree, is_irreducible, monic_divisors, monic_of_degree, poly_factorial, valuation,
    Poly, ResidueRing,
};
use crate::DEFAULT_FEASIBILITY_CAP;

/// How far level counts may be pushed by [`singular_series`].
const SERIES_MAX_LEVEL: u32 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityLevel {
    pub k: u32,
    pub count: u128,
    pub normalized: BigRational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// Two consecutive levels agree.
    Observed,
    /// Only one level was affordable, but the fiber mod `ϖ` is smooth, so
    /// Hensel lifting makes every level equal to the first.
    Hensel,
    /// No plateau seen and no smoothness certificate.
    Unstable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityProfile {
    pub prime: Poly,
    pub levels: Vec<DensityLevel>,
    pub k_stable: Option<u32>,
    pub status: Stability,
    /// `None` when the levels never stabilized.
    pub sigma: Option<BigRational>,
}

impl DensityProfile {
    /// `|σ_ϖ − 1|·|ϖ|²`, the constant in `σ_ϖ = 1 + O(|ϖ|^{-2})`.
    pub fn deviation_constant(&self) -> Option<f64> {
        let s = self.sigma.as_ref()?;
        let q2 = (self.prime.p() as f64).powi(2 * self.prime.deg() as i32);
        Some((ratio_f64(s) - 1.0).abs() * q2)
    }

    pub fn report(&self) -> DensityReport {
        DensityReport {
            prime: self.prime.to_string(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelReport { k: l.k, count: l.count.to_string(), normalized: l.normalized.to_string() })
                .collect(),
            stable_at: self.k_stable,
            status: self.status,
            sigma: self.sigma.as_ref().map(|s| s.to_string()),
            sigma_approx: self.sigma.as_ref().map(ratio_f64),
            deviation_constant: self.deviation_constant(),
        }
    }
}

/// JSON form of a [`DensityProfile`]. Rationals are written as `"n/d"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub prime: String,
    pub levels: Vec<LevelReport>,
    pub stable_at: Option<u32>,
    pub status: Stability,
    pub sigma: Option<String>,
    pub sigma_approx: Option<f64>,
    pub deviation_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub k: u32,
    pub count: String,
    pub normalized: String,
}

pub fn ratio_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn big_pow(p: u32, e: usize) -> BigInt {
    num_traits::pow(BigInt::from(p), e)
}

/// `#{x mod ϖ^{k+ν} : F(x) ≡ f, x ≡ λ mod ϖ^ν}` by enumerating the lifts
/// `x = λ + ϖ^ν y` with `y mod ϖ^k`.
pub fn level_count(inst: &Instance, varpi: &Poly, k: u32) -> Result<u128> {
    let d = inst.dim();
    let nu = valuation(&inst.g, varpi);
    let q_varpi = (inst.p() as u128).pow(varpi.degree().unwrap() as u32);
    let lifts = q_varpi.pow(k);
    guard(lifts.saturating_pow(d as u32), DEFAULT_FEASIBILITY_CAP)?;
    let modulus = varpi.pow((k + nu) as u64);
    let ring = ResidueRing::new(&modulus)?;
    let t = tables(&ring)?;
    let step = varpi.pow(nu as u64);
    let ys: Vec<Poly> = ResidueRing::new(&varpi.pow(k as u64))?.elements().collect();
    let coords: Vec<Vec<usize>> =
        inst.lambda.iter().map(|l| ys.iter().map(|y| ring.encode(&(l + &(&step * y)))).collect()).collect();
    let form = EncodedForm::new(&ring, inst.form.gram(), &Poly::one(inst.p()));
    let target = ring.encode(&inst.f);
    let n = ys.len();
    let rest = n.pow(d as u32 - 1);
    let count = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut x = vec![0usize; d];
            x[0] = coords[0][first];
            let mut c = 0u128;
            for idx in 0..rest {
                let mut r = idx;
                for i in 1..d {
                    x[i] = coords[i][r % n];
                    r /= n;
                }
                if form.eval(t, &x) == target {
                    c += 1;
                }
            }
            c
        })
        .sum();
    Ok(count)
}

/// Whether Hensel lifting alone forces the level densities to be constant
/// from `k = 1`: either `ϖ | g` (the congruence is linear with a unit
/// gradient) or `ϖ ∤ 2fΔ` (every solution mod `ϖ` is a smooth point).
pub fn hensel_smooth(inst: &Instance, varpi: &Poly) -> bool {
    if varpi.divides(&inst.g) {
        return true;
    }
    !varpi.divides(&inst.f) && !varpi.divides(&inst.delta())
}

/// Level densities for `k = 1..=k_max`, stopping at the first plateau or at
/// the first level whose enumeration would exceed the feasibility cap.
pub fn sigma_local(inst: &Instance, varpi: &Poly, k_max: u32) -> Result<DensityProfile> {
    if varpi.is_zero() || !varpi.is_monic() || !is_irreducible(varpi) || varpi.deg() < 1 {
        return Err(Error::InvalidInput(format!("{varpi} is not a monic irreducible")));
    }
    if k_max < 1 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    let d = inst.dim();
    let deg = varpi.degree().unwrap();
    let mut levels: Vec<DensityLevel> = Vec::new();
    let mut k_stable = None;
    for k in 1..=k_max {
        let count = match level_count(inst, varpi, k) {
            Ok(c) => c,
            Err(e @ Error::Infeasible { .. }) if levels.is_empty() => return Err(e),
            Err(Error::Infeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        let den = big_pow(inst.p(), (d - 1) * deg * k as usize);
        let normalized = BigRational::new(BigInt::from(count), den);
        if let Some(prev) = levels.last() {
            if prev.normalized == normalized {
                k_stable = Some(prev.k);
            }
        }
        levels.push(DensityLevel { k, count, normalized });
        if k_stable.is_some() {
            break;
        }
    }
    let (status, sigma) = match k_stable {
        Some(k) => (Stability::Observed, Some(levels[k as usize - 1].normalized.clone())),
        None if hensel_smooth(inst, varpi) => {
            k_stable = Some(1);
            (Stability::Hensel, Some(levels[0].normalized.clone()))
        }
        None => (Stability::Unstable, None),
    };
    Ok(DensityProfile { prime: varpi.clone(), levels, k_stable, status, sigma })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialIdentity {
    pub n: usize,
    /// `(N)!`.
    pub modulus: Poly,
    /// `Σ_{r | (N)!} |r|^{-d} S_{g,r}(0)`.
    pub lhs: ScaledCyclotomic,
    /// `|g|·#{b mod g(N)! : g(N)! | 2λᵀAb − k + gF(b)} / |(N)!|^{d−1}`.
    pub rhs: ScaledCyclotomic,
    pub equal: bool,
}

/// Both sides of the `(N)!` identity, each computed from its definition.
pub fn partial_identity_check(inst: &Instance, n: usize) -> Result<PartialIdentity> {
    let d = inst.dim();
    if d < 4 {
        return Err(Error::InvalidInput(format!("the identity is only checked for d >= 4, got d = {d}")));
    }
    let p = inst.p();
    let fact = poly_factorial(p, n);
    let m = &inst.g * &fact;
    let ring = ResidueRing::new(&m)?;
    guard((ring.size() as u128).saturating_pow(d as u32), DEFAULT_FEASIBILITY_CAP)?;

    let zero = vec![Poly::zero(p); d];
    let mut lhs = ScaledCyclotomic::zero(p);
    for r in monic_divisors(&fact) {
        let s = s_best(inst, &r, &zero)?;
        lhs = lhs + s.scale(2 * (d as i32) * r.deg() as i32);
    }

    let t = tables(&ring)?;
    let w: Vec<usize> = inst.two_a_lambda().iter().map(|x| ring.encode(x)).collect();
    let k = ring.encode(&inst.k);
    let gform = EncodedForm::new(&ring, inst.form.gram(), &inst.g);
    let size = ring.size();
    let rest = size.pow(d as u32 - 1);
    let count: u128 = (0..size)
        .into_par_iter()
        .map(|first| {
            let mut b = vec![0usize; d];
            b[0] = first;
            let mut c = 0u128;
            for idx in 0..rest {
                let mut r = idx;
                for x in b.iter_mut().skip(1) {
                    *x = r % size;
                    r /= size;
                }
                let lin = w.iter().zip(&b).fold(0, |acc, (&x, &y)| t.add(acc, t.mul(x, y)));
                if t.add(t.sub(lin, k), gform.eval(t, &b)) == 0 {
                    c += 1;
                }
            }
            c
        })
        .sum();
    let rhs = ScaledCyclotomic::from_int(p, inst.g_norm() * count as i128)
        .scale(2 * (d as i32 - 1) * fact.deg() as i32);
    let equal = lhs == rhs;
    Ok(PartialIdentity { n, modulus: fact, lhs, rhs, equal })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingularSeries {
    pub deg_bound: usize,
    pub factors: Vec<DensityProfile>,
    /// Product of the stable factors; unstable primes contribute their last
    /// computed level and are listed in `unstable`.
    pub product: BigRational,
    /// Primes with `σ_ϖ = 0`: a failed local condition.
    pub obstructions: Vec<Poly>,
    pub unstable: Vec<Poly>,
}

impl SingularSeries {
    pub fn positive(&self) -> bool {
        self.product > BigRational::zero()
    }
}

/// `Π σ_ϖ` over monic irreducible `ϖ` with `deg ϖ ≤ deg_bound`.
pub fn singular_series(inst: &Instance, deg_bound: usize) -> Result<SingularSeries> {
    if deg_bound < 1 {
        return Err(Error::InvalidInput("deg_bound must be at least 1".into()));
    }
    let mut factors = Vec::new();
    let mut product = BigRational::one();
    let mut obstructions = Vec::new();
    let mut unstable = Vec::new();
    for deg in 1..=deg_bound {
        for varpi in irreducibles_of_degree(inst.p(), deg) {
            let prof = sigma_local(inst, &varpi, SERIES_MAX_LEVEL)?;
            let value = match &prof.sigma {
                Some(s) => s.clone(),
                None => {
                    unstable.push(varpi.clone());
                    prof.levels.last().unwrap().normalized.clone()
                }
            };
            if value.is_zero() {
                obstructions.push(varpi.clone());
            }
            product *= value;
            factors.push(prof);
        }
    }
    Ok(SingularSeries { deg_bound, factors, product, obstructions, unstable })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: usize,
    /// `Σ_{deg r = t} |r|^{-d}|S_{g,r}(0)|`.
    pub increment: f64,
    pub cumulative: f64,
    pub terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Least-squares slope of `log_q increment` against `t` over `t ≥ 1`.
    pub exponent: Option<f64>,
    /// The exponent `3/2 − d/2` the tail bound predicts.
    pub predicted: f64,
}

pub fn tail_report(inst: &Instance, t_deg: usize) -> Result<TailReport> {
    let p = inst.p();
    let d = inst.dim();
    let q = p as f64;
    let zero = vec![Poly::zero(p); d];
    let mut rows = Vec::new();
    let mut cumulative = 0.0;
    for t in 0..=t_deg {
        let mut increment = 0.0;
        let mut terms = 0;
        for r in monic_of_degree(p, t) {
            increment += s_best(inst, &r, &zero)?.abs() / q.powi((d * t) as i32);
            terms += 1;
        }
        cumulative += increment;
        rows.push(TailRow { t, increment, cumulative, terms });
    }
    let exponent = log_slope(q, rows.iter().filter(|r| r.t >= 1).map(|r| (r.t as f64, r.increment)));
    Ok(TailReport { rows, exponent, predicted: 1.5 - d as f64 / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::QuadForm;

    #[test]
    fn four_squares_at_t() {
        let p = 3;
        let inst = Instance::new(QuadForm::sum_of_squares(p, 4).unwrap(), Poly::one(p), Poly::one(p), vec![Poly::zero(p); 4])
            .unwrap();
        let prof = sigma_local(&inst, &Poly::t(p), 2).unwrap();
        // x₁² + … + x₄² = 1 has 3³ − 3 points over F_3.
        assert_eq!(prof.levels[0].count, 24);
        assert_eq!(prof.k_stable, Some(1));
        assert_eq!(prof.sigma, Some(BigRational::new(8.into(), 9.into())));
    }
}
