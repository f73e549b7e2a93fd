//! Exact integration of locally constant functions on boxes in `K_∞^d`, the
//! dissection of `𝕋` and the delta expansion, Gaussian integrals, the
//! Bessel-type integrals `B_∞`, and stationary phase.
//!
//! Measures are normalized so that `{|x| < q^R}` has volume `q^R`; in
//! particular `vol(𝕋) = 1`.

mod bessel;
mod series;

pub use bessel::{b_inf_closed, b_inf_direct, bessel_case, shell_weight, BesselCase, BesselKind};
pub use series::{compose_tuple, invert_oinf, morse_normal_form, series_inverse, stationary_phase, stationary_phase_direct, MorseForm, TruncSeries};

use rayon::prelude::*;

use crate::basefield::{ScaledCyclotomic, ZetaSum};
use crate::error::{guard, Error, Result};
use crate::laurent::{gauss_factor_from, TruncLaurent};
use crate::polyring::{enumerate, monic_of_degree, Poly, ResidueRing};
use crate::quadform::{diagonalize_oinf, LaurentMatrix};
use crate::DEFAULT_FEASIBILITY_CAP;

/// The box `{x : |x_i − c_i| < q^{R_i}}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxRegion {
    pub center: Vec<TruncLaurent>,
    pub radii: Vec<i64>,
}

impl BoxRegion {
    pub fn new(center: Vec<TruncLaurent>, radii: Vec<i64>) -> Result<Self> {
        if center.is_empty() || center.len() != radii.len() {
            return Err(Error::InvalidInput("box needs matching nonempty center and radii".into()));
        }
        if center.iter().any(|c| !c.is_exact()) {
            return Err(Error::InvalidInput("box centers must be exact".into()));
        }
        Ok(BoxRegion { center, radii })
    }

    /// `𝕋^d`.
    pub fn torus(p: u32, d: usize) -> Self {
        BoxRegion { center: vec![TruncLaurent::zero(p); d], radii: vec![0; d] }
    }

    /// Ball of common radius `q^R` around `center`.
    pub fn ball(center: Vec<TruncLaurent>, radius: i64) -> Result<Self> {
        let d = center.len();
        Self::new(center, vec![radius; d])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn p(&self) -> u32 {
        self.center[0].p()
    }

    /// `log_q vol = Σ R_i`.
    pub fn log_volume(&self) -> i64 {
        self.radii.iter().sum()
    }

    /// Number of cells of size `q^σ`.
    pub fn cell_count(&self, sigma: i64) -> u128 {
        let digits: i64 = self.radii.iter().map(|&r| (r - sigma).max(0)).sum();
        (self.p() as u128).checked_pow(digits as u32).unwrap_or(u128::MAX)
    }

    /// Representative of cell `idx` at scale `σ`, i.e. the center plus the
    /// digits for `t^σ, …, t^{R_i − 1}` read from `idx`.
    pub fn cell(&self, sigma: i64, mut idx: u64) -> Vec<TruncLaurent> {
        let p = self.p();
        self.center
            .iter()
            .zip(&self.radii)
            .map(|(c, &r)| {
                let n = (r - sigma).max(0) as usize;
                if n == 0 {
                    return c.clone();
                }
                let per = (p as u64).pow(n as u32);
                let digits = Poly::from_index(p, idx % per, n);
                idx /= per;
                let terms: Vec<(u32, i64)> =
                    digits.coeffs().iter().enumerate().map(|(j, &a)| (a, sigma + j as i64)).collect();
                c.add(&TruncLaurent::from_terms(p, &terms, None).expect("exact terms"))
            })
            .collect()
    }

    pub fn contains(&self, x: &[TruncLaurent]) -> bool {
        x.iter().zip(&self.center).zip(&self.radii).all(|((a, c), &r)| a.sub(c).deg_upper() < r)
    }

    /// Half exponent `e` with `q^{Σ min(σ, R_i)} = p^{-e/2}`.
    fn cell_half_exp(&self, sigma: i64) -> i32 {
        let s: i64 = self.radii.iter().map(|&r| r.min(sigma)).sum();
        (-2 * s) as i32
    }
}

/// `∫_Γ ψ-phase`: the integrand returns `Some(a)` for the value `e_q(a)` or
/// `None` for 0 on each cell of size `q^σ`. The caller guarantees local
/// constancy at that scale.
pub fn integrate_phase<F>(region: &BoxRegion, sigma: i64, f: F) -> Result<ScaledCyclotomic>
where
    F: Fn(&[TruncLaurent]) -> Result<Option<u32>> + Sync,
{
    let count = region.cell_count(sigma);
    guard(count, DEFAULT_FEASIBILITY_CAP)?;
    let p = region.p();
    let acc = (0..count as u64)
        .into_par_iter()
        .try_fold(
            || ZetaSum::new(p),
            |mut acc, idx| -> Result<ZetaSum> {
                if let Some(a) = f(&region.cell(sigma, idx))? {
                    acc.add(a, 1);
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || ZetaSum::new(p),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )?;
    Ok(acc.value().scale(region.cell_half_exp(sigma)))
}

/// General integrand version of [`integrate_phase`] with cyclotomic values.
pub fn integrate_box<F>(region: &BoxRegion, sigma: i64, f: F) -> Result<ScaledCyclotomic>
where
    F: Fn(&[TruncLaurent]) -> Result<ScaledCyclotomic> + Sync,
{
    let count = region.cell_count(sigma);
    guard(count, DEFAULT_FEASIBILITY_CAP)?;
    let p = region.p();
    let parity_error = || Error::InvalidInput("integrand values mix √q parities and have no common field".into());
    let total = (0..count as u64)
        .into_par_iter()
        .try_fold(
            || ScaledCyclotomic::zero(p),
            |acc, idx| -> Result<ScaledCyclotomic> {
                let v = f(&region.cell(sigma, idx))?;
                acc.checked_add(&v).ok_or_else(parity_error)
            },
        )
        .try_reduce(|| ScaledCyclotomic::zero(p), |a, b| a.checked_add(&b).ok_or_else(parity_error))?;
    Ok(total.scale(region.cell_half_exp(sigma)))
}

/// Evaluate at scales `σ` and `σ − 1` and insist on agreement.
pub fn integrate_box_refined<F>(region: &BoxRegion, sigma: i64, f: F) -> Result<ScaledCyclotomic>
where
    F: Fn(&[TruncLaurent]) -> Result<ScaledCyclotomic> + Sync,
{
    let coarse = integrate_box(region, sigma, &f)?;
    let fine = integrate_box(region, sigma - 1, &f)?;
    if coarse != fine {
        return Err(Error::ConstancyViolation(format!(
            "integral at scale {sigma} is {coarse} but at scale {} it is {fine}",
            sigma - 1
        )));
    }
    Ok(coarse)
}

/// Phase version of [`integrate_box_refined`].
pub fn integrate_phase_refined<F>(region: &BoxRegion, sigma: i64, f: F) -> Result<ScaledCyclotomic>
where
    F: Fn(&[TruncLaurent]) -> Result<Option<u32>> + Sync,
{
    let coarse = integrate_phase(region, sigma, &f)?;
    let fine = integrate_phase(region, sigma - 1, &f)?;
    if coarse != fine {
        return Err(Error::ConstancyViolation(format!(
            "integral at scale {sigma} is {coarse} but at scale {} it is {fine}",
            sigma - 1
        )));
    }
    Ok(coarse)
}

/// The pair `(r, a)` with `r` monic, `|r| ≤ q^Q`, `|a| < |r|`, `(a, r) = 1`
/// and `|rα − a| < q^{-Q}`.
pub fn dissection_locate(alpha: &TruncLaurent, q_param: i64) -> Result<(Poly, Poly)> {
    let p = alpha.p();
    if alpha.deg_upper() >= 0 {
        return Err(Error::InvalidInput("dissection needs |alpha| < 1".into()));
    }
    if q_param < 1 {
        return Err(Error::InvalidInput("dissection needs Q >= 1".into()));
    }
    let mut found = Vec::new();
    for n in 0..=q_param as usize {
        for r in monic_of_degree(p, n) {
            let ra = TruncLaurent::from_poly(&r).mul(alpha);
            if !ra.is_exact() && ra.floor() > -q_param {
                return Err(Error::Precision(format!(
                    "alpha is known to t^{} but r = {r} needs t^{}",
                    alpha.floor(),
                    -q_param - n as i64
                )));
            }
            let a = ra.int_part()?;
            if ra.frac_part().deg_upper() < -q_param && a.is_coprime(&r) {
                found.push((r, a));
            }
        }
    }
    match found.len() {
        1 => Ok(found.pop().unwrap()),
        n => Err(Error::InvalidInput(format!("expected exactly one dissection ball, found {n}"))),
    }
}

/// All balls of the dissection at level `Q`, as `(r, a)` pairs.
pub fn dissection_balls(p: u32, q_param: i64) -> Vec<(Poly, Poly)> {
    let mut out = Vec::new();
    for n in 0..=q_param.max(0) as usize {
        for r in monic_of_degree(p, n) {
            for a in enumerate(p, n, false) {
                if a.deg() < n as i64 && a.is_coprime(&r) {
                    out.push((r.clone(), a));
                }
            }
        }
    }
    out
}

/// Outcome of the exhaustive partition check on the grid of precision `2Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionReport {
    pub points: u64,
    pub balls: usize,
    /// Points lying in zero or in several balls.
    pub failures: Vec<(TruncLaurent, usize)>,
    /// `Σ vol(ball)` as the numerator over `q^{2Q}`.
    pub measure_numerator: u128,
    pub measure_denominator: u128,
}

pub fn dissection_partition_check(p: u32, q_param: i64) -> Result<PartitionReport> {
    let balls = dissection_balls(p, q_param);
    let digits = 2 * q_param;
    let points = (p as u128).pow(digits as u32);
    guard(points * balls.len() as u128, DEFAULT_FEASIBILITY_CAP)?;
    let mut failures = Vec::new();
    for alpha in TruncLaurent::grid(p, -1, -digits) {
        let hits = balls
            .iter()
            .filter(|(r, a)| {
                let diff = TruncLaurent::from_poly(r).mul(&alpha).sub(&TruncLaurent::from_poly(a));
                diff.deg_upper() < -q_param
            })
            .count();
        if hits != 1 {
            failures.push((alpha, hits));
        }
    }
    // vol{|rα − a| < q^{-Q}} = q^{-Q - deg r} = q^{Q - deg r} / q^{2Q}
    let measure_numerator = balls.iter().map(|(r, _)| (p as u128).pow((q_param - r.deg()) as u32)).sum();
    Ok(PartitionReport {
        points: points as u64,
        balls: balls.len(),
        failures,
        measure_numerator,
        measure_denominator: (p as u128).pow(2 * q_param as u32),
    })
}

/// The right-hand side of the delta expansion
/// `q^{-2Q} Σ_{r monic, |r| ≤ q^Q} Σ*_a ψ(an/r) h(r/t^Q, n/t^{2Q})`, where
/// `h(x, y) = |x|^{-1}` if `|y| < |x|` and 0 otherwise.
pub fn delta_expansion_eval(n: &Poly, q_param: i64) -> Result<ScaledCyclotomic> {
    DeltaExpansion::new(n.p(), q_param)?.eval(n)
}

/// The moduli of the delta expansion with their unit groups, reusable
/// across many `n`.
pub struct DeltaExpansion {
    p: u32,
    q_param: i64,
    moduli: Vec<(ResidueRing, Vec<usize>)>,
}

impl DeltaExpansion {
    pub fn new(p: u32, q_param: i64) -> Result<Self> {
        if q_param < 1 {
            return Err(Error::InvalidInput("the delta expansion needs Q >= 1".into()));
        }
        let mut moduli = Vec::new();
        for deg_r in 0..=q_param as usize {
            for r in monic_of_degree(p, deg_r) {
                let ring = ResidueRing::new(&r)?;
                let units = (0..ring.size()).filter(|&a| ring.is_unit(&ring.decode(a))).collect();
                moduli.push((ring, units));
            }
        }
        Ok(DeltaExpansion { p, q_param, moduli })
    }

    pub fn eval(&self, n: &Poly) -> Result<ScaledCyclotomic> {
        let mut acc = ZetaSum::new(self.p);
        for (ring, units) in &self.moduli {
            let deg_r = ring.degree() as i64;
            // h = q^{Q - deg r} when deg n < deg r + Q
            if !n.is_zero() && n.deg() >= deg_r + self.q_param {
                continue;
            }
            let h = (self.p as i128).pow((self.q_param - deg_r) as u32);
            let m = ring.encode(n);
            match ring.tables() {
                Some(tab) => {
                    for &a in units {
                        acc.add(tab.top(tab.mul(a, m)), h);
                    }
                }
                None => {
                    let nr = ring.reduce(n);
                    for &a in units {
                        acc.add(ring.psi_exponent(&(&ring.decode(a) * &nr)), h);
                    }
                }
            }
        }
        Ok(acc.value().scale(4 * self.q_param as i32))
    }
}

/// `𝒢(A) = Π 𝒢(λ_i)` with `λ` the `O_∞`-diagonalization of `A`.
pub fn gaussian_closed(a: &LaurentMatrix, prec: i64) -> Result<ScaledCyclotomic> {
    let (_, lambda) = diagonalize_oinf(a, prec)?;
    let p = a[0][0].p();
    let mut acc = ScaledCyclotomic::one(p);
    for l in &lambda {
        let d = l.deg()?;
        acc = &acc * &gauss_factor_from(p, d, l.lc())?;
    }
    Ok(acc)
}

/// `∫_{𝕋^d} ψ(uᵀAu) du` by direct summation; the integrand is constant on
/// cells of size `q^{min(0, −max deg A)}`.
pub fn gaussian_direct(a: &LaurentMatrix) -> Result<ScaledCyclotomic> {
    let d = a.len();
    let p = a[0][0].p();
    let m = a.iter().flatten().map(|x| x.deg_upper()).max().unwrap();
    let sigma = 0.min(-m);
    let region = BoxRegion::torus(p, d);
    integrate_phase(&region, sigma, |u| {
        let mut v = TruncLaurent::zero(p);
        for i in 0..d {
            for j in 0..d {
                if !a[i][j].is_zero() {
                    v = v.add(&a[i][j].mul(&u[i]).mul(&u[j]));
                }
            }
        }
        Ok(Some(v.psi_exponent()?))
    })
}
