//! The weighted count `N(w, λ)` of solutions of `F(x) = f`, `x ≡ λ mod g`
//! near a point of the variety, computed both directly and through the
//! delta-method expansion
//! `N = (1/(|g|q^{2Q})) Σ_r Σ_c |gr|^{-d} S_{g,r}(c) I_{g,r}(c)`.
//!
//! The oscillatory integrals `I_{g,r}(c)` are evaluated exactly by two
//! routes. The direct route cuts the ball `|t − t0| < q^R` into cells on
//! which the cut-off `|G(t)| < q^Q|r|` is constant and integrates the
//! character cell by cell. The dual route, for diagonal forms, writes the
//! cut-off as an integral over `α` and factors the `t`-integral coordinate
//! by coordinate.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basefield::{ScaledCyclotomic, ZetaSum};
use crate::error::{guard, Error, Result};
use crate::expsums::{s_full, DiagonalSums, Instance};
use crate::laurent::TruncLaurent;
use crate::polyring::{enumerate, Poly};
use crate::quadform::{adjugate, det, small_vectors, Cone, ConeShape, QuadForm, SquareClass, CONE_PREC};
use crate::DEFAULT_FEASIBILITY_CAP;

/// Points sampled per boundary shell when checking that the support of the
/// weight stays inside the cone.
const SHELL_SAMPLES: usize = 48;

fn lp(x: &Poly) -> TruncLaurent {
    TruncLaurent::from_poly(x)
}

fn ceil_half(a: i64) -> i64 {
    (a + 1).div_euclid(2)
}

fn pow_u128(p: u32, e: i64) -> u128 {
    if e <= 0 {
        return 1;
    }
    (p as u128).checked_pow(e as u32).unwrap_or(u128::MAX)
}

/// The coefficients of `x` from `t^floor` upwards, as an exact value.
fn exact_above(x: &TruncLaurent, floor: i64) -> Result<TruncLaurent> {
    let p = x.p();
    let top = match x.top() {
        Some(t) if t >= floor => t,
        _ => return Ok(TruncLaurent::zero(p)),
    };
    let terms = (floor..=top).map(|i| Ok((x.coeff(i)?, i))).collect::<Result<Vec<_>>>()?;
    TruncLaurent::from_terms(p, &terms, None)
}

/// Exact `Σ_j digits_j t^{floor + j}`.
fn digits_value(p: u32, floor: i64, digits: &Poly) -> TruncLaurent {
    let terms: Vec<(u32, i64)> = digits.coeffs().iter().enumerate().map(|(j, &a)| (a, floor + j as i64)).collect();
    TruncLaurent::from_terms(p, &terms, None).expect("exact terms")
}

fn psi_neg(p: u32, e: u32) -> u32 {
    (p - e % p) % p
}

fn max_entry_deg(form: &QuadForm) -> i64 {
    let d = form.dim();
    (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| form.entry(i, j).deg()).max().unwrap_or(0)
}

/// The test function: the indicator of `|x − x0| < q^ρ` around a point
/// `x0` of `F = f` inside the cone, together with the parameters `R` and
/// `Q` of the expansion.
#[derive(Clone, Debug)]
pub struct Weight {
    pub x0: Vec<TruncLaurent>,
    pub alpha0: i64,
    /// `w(x) = 1` exactly when `|x − x0| < q^rho`.
    pub rho: i64,
    /// `R`: in the `t` variables the support is `|t − t0| < q^R`.
    pub big_r: i64,
    /// `Q` used by the expansion (the formula value unless overridden).
    pub big_q: i64,
    pub q_formula: i64,
    /// `(x0 − λ)/g`, kept exactly down to `t^R`.
    pub t0: Vec<TruncLaurent>,
    pub max_eta: i64,
    pub omega: i64,
    pub omega_prime: i64,
    pub samples_checked: usize,
}

impl Weight {
    /// The same weight with the expansion run at another `Q ≥ 1`. The
    /// identity for `N(w, λ)` holds for every such `Q`; only the vanishing checks
    /// need the formula value.
    pub fn with_q(&self, q: i64) -> Result<Weight> {
        if q < 1 {
            return Err(Error::InvalidInput("Q must be at least 1".into()));
        }
        Ok(Weight { big_q: q, ..self.clone() })
    }

    /// Upper bounds `T_i` with `|t_i| ≤ q^{T_i}` on the ball.
    pub fn ball_degrees(&self) -> Vec<i64> {
        self.t0.iter().map(|x| x.deg_upper().max(self.big_r - 1)).collect()
    }
}

/// `A^{-1} y` to a fixed precision.
fn solve_gram(form: &QuadForm, y: &[TruncLaurent], out_floor: i64) -> Result<Vec<TruncLaurent>> {
    let adj = adjugate(form.gram());
    let dt = lp(&det(form.gram()));
    adj.iter()
        .map(|row| {
            let num = row.iter().zip(y).fold(TruncLaurent::zero(form.p()), |acc, (a, b)| acc.add(&lp(a).mul(b)));
            num.div(&dt, out_floor)
        })
        .collect()
}

/// Whether `y ∈ Ω* = AΩ`.
pub fn in_dual_cone(form: &QuadForm, cone: &Cone, y: &[TruncLaurent]) -> Result<bool> {
    let x = solve_gram(form, y, CONE_PREC + y.iter().map(|e| e.deg_upper().max(0)).max().unwrap_or(0))?;
    cone.contains(form, &x)
}

/// A point `x ∈ Ω` with `F(x) = f` to precision `t^floor`: a cone witness or
/// a small vector in the square class of `f`, scaled by `(f/F(w))^{1/2}`.
pub fn find_cone_point(form: &QuadForm, cone: &Cone, f: &Poly, floor: i64) -> Result<Vec<TruncLaurent>> {
    let p = form.p();
    let d = form.dim();
    let fl = lp(f);
    if f.is_zero() {
        return Err(Error::InvalidInput("f = 0 has no cone point".into()));
    }
    let class = SquareClass::of(&fl)?;
    let mut candidates: Vec<Vec<TruncLaurent>> = Vec::new();
    if let Ok(w) = crate::quadform::cone_for_class(form, class) {
        candidates.push(w.witness);
    }
    for v in small_vectors(p, d, 1) {
        if v.iter().any(|e| !e.is_zero()) {
            candidates.push(v.iter().map(lp).collect());
        }
    }
    for w in candidates {
        let fw = form.eval_laurent(&w);
        if fw.is_zero_to_precision() || SquareClass::of(&fw)? != class {
            continue;
        }
        let prec = floor - w.iter().map(|e| e.deg_upper()).max().unwrap_or(0) - 2;
        let s = fl.div(&fw, prec - fl.deg_upper())?.sqrt(prec)?;
        let x: Vec<TruncLaurent> = w.iter().map(|e| e.mul(&s)).collect();
        if cone.contains(form, &x)? {
            return Ok(x);
        }
    }
    Err(Error::InvalidInput(format!(
        "no point of F = {f} inside the cone: f lies in the square class {class:?} and no witness of that class \
         scales into the cone"
    )))
}

pub fn make_weight(inst: &Instance, cone: &Cone, alpha0: i64) -> Result<Weight> {
    make_weight_with(inst, cone, alpha0, None)
}

/// Build the weight around a supplied `x0` (or one found by
/// [`find_cone_point`]) and spot-check that its support lies in the cone.
pub fn make_weight_with(inst: &Instance, cone: &Cone, alpha0: i64, x0: Option<Vec<TruncLaurent>>) -> Result<Weight> {
    let form = &inst.form;
    let d = inst.dim();
    let (_, eta) = form.diagonalize_oinf(CONE_PREC)?;
    let max_eta = eta.iter().map(|e| e.deg()).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap_or(0);
    if alpha0 <= max_eta + cone.omega {
        return Err(Error::InvalidInput(format!(
            "alpha0 = {alpha0} must exceed max deg eta + omega = {}",
            max_eta + cone.omega
        )));
    }
    let deg_f = inst.f.deg();
    let deg_g = inst.g.deg();
    let rho = ceil_half(deg_f - alpha0);
    let big_r = rho - deg_g;
    let q_formula = ceil_half(deg_f) - deg_g + max_eta + cone.omega_prime;
    let x0 = match x0 {
        Some(x) => {
            if x.len() != d {
                return Err(Error::InvalidInput(format!("x0 has {} entries, expected {d}", x.len())));
            }
            let diff = form.eval_laurent(&x).sub(&lp(&inst.f));
            if !diff.is_zero_to_precision() {
                return Err(Error::InvalidInput(format!("F(x0) differs from f by {diff}")));
            }
            if !cone.contains(form, &x)? {
                return Err(Error::InvalidInput("x0 is not in the cone".into()));
            }
            x
        }
        None => find_cone_point(form, cone, &inst.f, big_r.min(0) + deg_g - 8)?,
    };
    let gl = lp(&inst.g);
    let t0 = x0
        .iter()
        .zip(&inst.lambda)
        .map(|(x, l)| exact_above(&x.sub(&lp(l)).div(&gl, big_r)?, big_r))
        .collect::<Result<Vec<_>>>()?;
    let samples_checked = check_support(form, cone, &x0, rho)?;
    Ok(Weight {
        x0,
        alpha0,
        rho,
        big_r,
        big_q: q_formula.max(1),
        q_formula,
        t0,
        max_eta,
        omega: cone.omega,
        omega_prime: cone.omega_prime,
        samples_checked,
    })
}

/// Sample the shells `|δ| = q^s`, `s = ρ−1, ρ−2, ρ−3`, and check both
/// `x0 + δ ∈ Ω` and `A x0 + δ ∈ Ω*`.
fn check_support(form: &QuadForm, cone: &Cone, x0: &[TruncLaurent], rho: i64) -> Result<usize> {
    let p = form.p();
    let d = form.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let ax0: Vec<TruncLaurent> = form
        .gram()
        .iter()
        .map(|row| row.iter().zip(x0).fold(TruncLaurent::zero(p), |acc, (a, b)| acc.add(&lp(a).mul(b))))
        .collect();
    let mut checked = 0;
    for shell in 1..=3 {
        let s = rho - shell;
        for _ in 0..SHELL_SAMPLES {
            let lead = rng.gen_range(0..d);
            let delta: Vec<TruncLaurent> = (0..d)
                .map(|i| {
                    let mut terms: Vec<(u32, i64)> = (0..4).map(|j| (rng.gen_range(0..p), s - j)).collect();
                    if i == lead {
                        terms[0].0 = rng.gen_range(1..p);
                    }
                    TruncLaurent::from_terms(p, &terms, None).expect("exact terms")
                })
                .collect();
            let x: Vec<TruncLaurent> = x0.iter().zip(&delta).map(|(a, b)| a.add(b)).collect();
            if !cone.contains(form, &x)? {
                return Err(Error::InvalidInput(format!(
                    "the ball |x - x0| < q^{rho} leaves the cone at shell q^{s}; increase alpha0"
                )));
            }
            let y: Vec<TruncLaurent> = ax0.iter().zip(&delta).map(|(a, b)| a.add(b)).collect();
            if !in_dual_cone(form, cone, &y)? {
                return Err(Error::InvalidInput(format!(
                    "the ball |y - A x0| < q^{rho} leaves the dual cone at shell q^{s}; increase alpha0"
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CClass {
    Zero,
    Ordinary,
    Exceptional,
}

/// A frequency vector with `κ = max |c_i/g| = q^kappa`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CVector {
    pub c: Vec<Poly>,
    pub kappa: Option<i64>,
    pub class: CClass,
}

pub fn classify(inst: &Instance, w: &Weight, c: &[Poly]) -> CVector {
    let top = c.iter().filter(|x| !x.is_zero()).map(|x| x.deg()).max();
    let kappa = top.map(|t| t - inst.g.deg());
    let class = match kappa {
        None => CClass::Zero,
        Some(k) if k >= w.big_q - w.big_r => CClass::Ordinary,
        Some(_) => CClass::Exceptional,
    };
    CVector { c: c.to_vec(), kappa, class }
}

/// Which integration route evaluates `I_{g,r}(c)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Dual for diagonal forms, direct otherwise.
    Auto,
    Direct,
    Dual,
}

/// Which description of the cut-off region is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `|G(t)| < q^Q|r|`.
    Full,
    /// `|F(t) − k/g| < q^Q|r|`.
    Shifted,
}

/// Largest cell scale `σ ≤ R` on which the cut-off is constant: moving `t`
/// by `|ζ| < q^σ` changes `G` by less than `q^{Q + deg r}`.
pub fn direct_scale(inst: &Instance, w: &Weight, deg_r: i64) -> i64 {
    let y = w.big_q + deg_r;
    let a = max_entry_deg(&inst.form);
    let t = w.ball_degrees().into_iter().max().unwrap_or(0);
    let mut s = w.big_r;
    while s - 1 + a + t.max(s - 1).max(-1) >= y {
        s -= 1;
    }
    s
}

/// `I_{g,r}(c) = 0` unless `deg c_i < c_bound` for every `i`: on a cell of
/// scale `σ` the character integrates to zero once `|c_i/(gr)| ≥ q^{-σ}`.
pub fn c_bound(inst: &Instance, w: &Weight, deg_r: i64) -> i64 {
    inst.g.deg() + deg_r - direct_scale(inst, w, deg_r)
}

struct DirectTable {
    p: u32,
    bound: i64,
    scale_exp: i64,
    /// `lin[i][choice][j]`: coefficient of `t^{-1-j}` in `rep_i/(gr)`.
    lin: Vec<Vec<Vec<u32>>>,
    /// Choice indices of the cells inside the region.
    cells: Vec<Vec<u32>>,
}

impl DirectTable {
    fn new(inst: &Instance, w: &Weight, r: &Poly, region: Region) -> Result<Self> {
        let p = inst.p();
        let d = inst.dim();
        let deg_r = r.deg();
        let sigma = direct_scale(inst, w, deg_r);
        let y = w.big_q + deg_r;
        let n = (w.big_r - sigma).max(0);
        let per = pow_u128(p, n);
        let count = pow_u128(p, n * d as i64);
        guard(count, DEFAULT_FEASIBILITY_CAP)?;
        let bound = inst.g.deg() + deg_r - sigma;
        let gr = lp(&(&inst.g * r));
        let reps: Vec<Vec<TruncLaurent>> = w
            .t0
            .iter()
            .map(|c| (0..per as u64).map(|idx| c.add(&digits_value(p, sigma, &Poly::from_index(p, idx, n as usize)))).collect())
            .collect();
        let lin = reps
            .iter()
            .map(|col| {
                col.iter()
                    .map(|x| {
                        if bound <= 0 {
                            return Ok(Vec::new());
                        }
                        let u = x.div(&gr, -bound)?;
                        (0..bound).map(|j| u.coeff(-1 - j)).collect::<Result<Vec<u32>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let gl = lp(&inst.g);
        let g2 = gl.mul(&gl);
        let fl = lp(&inst.f);
        let kl = lp(&inst.k);
        let lam: Vec<TruncLaurent> = inst.lambda.iter().map(lp).collect();
        let cells = (0..count as u64)
            .into_par_iter()
            .filter_map(|mut idx| {
                let mut choice = Vec::with_capacity(d);
                for _ in 0..d {
                    choice.push((idx % per as u64) as u32);
                    idx /= per as u64;
                }
                let t: Vec<TruncLaurent> = choice.iter().enumerate().map(|(i, &c)| reps[i][c as usize].clone()).collect();
                let inside = (|| -> Result<bool> {
                    let v = match region {
                        Region::Full => {
                            let x: Vec<TruncLaurent> = t.iter().zip(&lam).map(|(a, l)| gl.mul(a).add(l)).collect();
                            inst.form.eval_laurent(&x).sub(&fl).div(&g2, y)?
                        }
                        Region::Shifted => inst.form.eval_laurent(&t).mul(&gl).sub(&kl).div(&gl, y)?,
                    };
                    Ok(v.truncate(y).is_zero_to_precision())
                })();
                match inside {
                    Ok(true) => Some(Ok(choice)),
                    Ok(false) => None,
                    Err(e) => Some(Err(e)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectTable { p, bound, scale_exp: w.big_q - deg_r + sigma * d as i64, lin, cells })
    }

    fn eval(&self, c: &[Poly]) -> ScaledCyclotomic {
        if c.iter().any(|x| !x.is_zero() && x.deg() >= self.bound) {
            return ScaledCyclotomic::zero(self.p);
        }
        let mut z = ZetaSum::new(self.p);
        let p = self.p as u64;
        for cell in &self.cells {
            let mut e = 0u64;
            for (i, ci) in c.iter().enumerate() {
                let row = &self.lin[i][cell[i] as usize];
                for (j, &a) in ci.coeffs().iter().enumerate() {
                    e += a as u64 * row[j] as u64;
                }
            }
            z.add((e % p) as u32, 1);
        }
        z.value().scale(-2 * self.scale_exp as i32)
    }
}

/// The coordinate integrals `J_i(α, c_i)` of the dual route share this data
/// for every coordinate with the same `(A_ii, λ_i, t0_i)`.
struct DualCoord {
    sigma_t: i64,
    taus: Vec<TruncLaurent>,
    /// `[α][τ]`: `ψ`-exponent of `α(A_ii τ² + 2A_iiλ_iτ/g)`.
    a_phase: Vec<Vec<u32>>,
    /// `[α][τ]`: `α(2A_iiτ + 2A_iiλ_i/g)`, known from `t^{-σ_t}` up.
    a_deriv: Vec<Vec<TruncLaurent>>,
}

struct DualTable {
    p: u32,
    scale_exp: i64,
    alpha_phase: Vec<u32>,
    coords: Vec<DualCoord>,
    class_of: Vec<usize>,
    gr: TruncLaurent,
}

impl DualTable {
    fn new(inst: &Instance, w: &Weight, r: &Poly, region: Region) -> Result<Self> {
        if !inst.form.is_diagonal() {
            return Err(Error::InvalidInput("the dual route needs a diagonal form".into()));
        }
        let p = inst.p();
        let d = inst.dim();
        let deg_r = r.deg();
        let deg_g = inst.g.deg();
        let y = w.big_q + deg_r;
        let tb = w.ball_degrees();
        let a: Vec<Poly> = (0..d).map(|i| inst.form.entry(i, i).clone()).collect();
        // largest degree of G (either description) on the ball
        let mut top = if inst.k.is_zero() { i64::MIN / 4 } else { inst.k.deg() - deg_g };
        for i in 0..d {
            top = top.max(a[i].deg() + 2 * tb[i]);
            if !inst.lambda[i].is_zero() {
                top = top.max(a[i].deg() + tb[i] + inst.lambda[i].deg() - deg_g);
            }
        }
        let sigma_a = (-y).min(-1 - top);
        let n_alpha = -y - sigma_a;
        let alpha_cells = pow_u128(p, n_alpha);
        let gl = lp(&inst.g);
        let kl = lp(&inst.k);
        let alphas: Vec<TruncLaurent> = TruncLaurent::grid(p, -y - 1, sigma_a).collect();
        let alpha_phase = alphas
            .iter()
            .map(|al| Ok(psi_neg(p, al.mul(&kl).div(&gl, -1)?.coeff(-1)?)))
            .collect::<Result<Vec<u32>>>()?;
        let mut class_of = vec![0usize; d];
        let mut keys: Vec<(Poly, Poly, TruncLaurent)> = Vec::new();
        let mut coords = Vec::new();
        for i in 0..d {
            let lam = if region == Region::Full { inst.lambda[i].clone() } else { Poly::zero(p) };
            let key = (a[i].clone(), lam.clone(), w.t0[i].clone());
            if let Some(k) = keys.iter().position(|x| *x == key) {
                class_of[i] = k;
                continue;
            }
            class_of[i] = keys.len();
            keys.push(key);
            let sigma_t = w.big_r.min((y + 1 - a[i].deg()).div_euclid(2));
            let n = (w.big_r - sigma_t).max(0);
            guard(alpha_cells.saturating_mul(pow_u128(p, n)), DEFAULT_FEASIBILITY_CAP)?;
            let taus: Vec<TruncLaurent> = (0..pow_u128(p, n) as u64)
                .map(|idx| w.t0[i].add(&digits_value(p, sigma_t, &Poly::from_index(p, idx, n as usize))))
                .collect();
            let ai = lp(&a[i]);
            let two = TruncLaurent::monomial(p, 2, 0);
            let al2 = ai.mul(&lp(&lam)).mul(&two);
            // numerators over g: A τ² g + 2Aλτ and 2Aτ g + 2Aλ
            let phase_num: Vec<TruncLaurent> = taus.iter().map(|t| ai.mul(t).mul(t).mul(&gl).add(&al2.mul(t))).collect();
            let deriv_num: Vec<TruncLaurent> = taus.iter().map(|t| two.mul(&ai).mul(t).mul(&gl).add(&al2)).collect();
            let floor_t = -sigma_t;
            let rows: Vec<(Vec<u32>, Vec<TruncLaurent>)> = alphas
                .par_iter()
                .map(|al| {
                    let ph = phase_num
                        .iter()
                        .map(|num| al.mul(num).div(&gl, -1)?.coeff(-1))
                        .collect::<Result<Vec<u32>>>()?;
                    let dv = deriv_num
                        .iter()
                        .map(|num| Ok(al.mul(num).div(&gl, floor_t)?.truncate(floor_t)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((ph, dv))
                })
                .collect::<Result<Vec<_>>>()?;
            let (a_phase, a_deriv) = rows.into_iter().unzip();
            coords.push(DualCoord { sigma_t, taus, a_phase, a_deriv });
        }
        Ok(DualTable {
            p,
            scale_exp: w.big_q - deg_r + y + sigma_a,
            alpha_phase,
            coords,
            class_of,
            gr: lp(&(&inst.g * r)),
        })
    }

    /// `J(α, c_i)` for every `α` cell.
    fn coordinate(&self, class: usize, ci: &Poly) -> Result<Vec<ScaledCyclotomic>> {
        let co = &self.coords[class];
        let p = self.p;
        let floor_t = -co.sigma_t;
        let cl = lp(ci);
        let cg = cl.div(&self.gr, floor_t)?.truncate(floor_t);
        let b = co.taus.iter().map(|t| cl.mul(t).div(&self.gr, -1)?.coeff(-1)).collect::<Result<Vec<u32>>>()?;
        Ok((0..self.alpha_phase.len())
            .map(|ai| {
                let mut z = ZetaSum::new(p);
                for (ti, dv) in co.a_deriv[ai].iter().enumerate() {
                    if dv.add(&cg).truncate(floor_t).is_zero_to_precision() {
                        z.add((co.a_phase[ai][ti] + b[ti]) % p, 1);
                    }
                }
                z.value().scale(-2 * co.sigma_t as i32)
            })
            .collect())
    }

    fn combine(&self, js: &[&Vec<ScaledCyclotomic>]) -> ScaledCyclotomic {
        let mut total = ScaledCyclotomic::zero(self.p);
        'alpha: for (ai, &ph) in self.alpha_phase.iter().enumerate() {
            let mut prod = ScaledCyclotomic::zeta(self.p, ph as u64);
            for j in js {
                let v = &j[ai];
                if v.is_zero() {
                    continue 'alpha;
                }
                prod = &prod * v;
            }
            total = &total + &prod;
        }
        total.scale(-2 * self.scale_exp as i32)
    }
}

enum TableKind {
    Direct(DirectTable),
    Dual(DualTable),
}

/// Everything about `I_{g,r}(·)` that does not depend on `c`.
pub struct IntegralTable {
    kind: TableKind,
    bound: i64,
    p: u32,
}

impl IntegralTable {
    pub fn new(inst: &Instance, w: &Weight, r: &Poly, route: Route, region: Region) -> Result<Self> {
        if r.is_zero() || !r.is_monic() {
            return Err(Error::InvalidInput("r must be monic".into()));
        }
        if r.deg() > w.big_q {
            return Err(Error::InvalidInput(format!("deg r = {} exceeds Q = {}", r.deg(), w.big_q)));
        }
        let use_dual = match route {
            Route::Auto => inst.form.is_diagonal(),
            Route::Direct => false,
            Route::Dual => true,
        };
        let kind = if use_dual {
            TableKind::Dual(DualTable::new(inst, w, r, region)?)
        } else {
            TableKind::Direct(DirectTable::new(inst, w, r, region)?)
        };
        Ok(IntegralTable { kind, bound: c_bound(inst, w, r.deg()), p: inst.p() })
    }

    /// `I(c) = 0` unless every `deg c_i` is below this bound.
    pub fn c_bound(&self) -> i64 {
        self.bound
    }

    fn outside(&self, c: &[Poly]) -> bool {
        c.iter().any(|x| !x.is_zero() && x.deg() >= self.bound)
    }

    pub fn eval(&self, c: &[Poly]) -> Result<ScaledCyclotomic> {
        match &self.kind {
            TableKind::Direct(t) => Ok(t.eval(c)),
            TableKind::Dual(t) => {
                let js = c.iter().enumerate().map(|(i, x)| t.coordinate(t.class_of[i], x)).collect::<Result<Vec<_>>>()?;
                Ok(t.combine(&js.iter().collect::<Vec<_>>()))
            }
        }
    }

    /// Evaluate at many vectors, sharing the coordinate integrals.
    pub fn eval_many(&self, cs: &[Vec<Poly>]) -> Result<Vec<ScaledCyclotomic>> {
        match &self.kind {
            TableKind::Direct(t) => Ok(cs.par_iter().map(|c| t.eval(c)).collect()),
            TableKind::Dual(t) => {
                let keys: BTreeSet<(usize, Poly)> = cs
                    .iter()
                    .filter(|c| !self.outside(c))
                    .flat_map(|c| c.iter().enumerate().map(|(i, x)| (t.class_of[i], x.clone())))
                    .collect();
                let keys: Vec<(usize, Poly)> = keys.into_iter().collect();
                let vals = keys.par_iter().map(|(k, x)| t.coordinate(*k, x)).collect::<Result<Vec<_>>>()?;
                let cache: HashMap<(usize, Poly), Vec<ScaledCyclotomic>> = keys.into_iter().zip(vals).collect();
                Ok(cs
                    .par_iter()
                    .map(|c| {
                        if self.outside(c) {
                            return ScaledCyclotomic::zero(self.p);
                        }
                        let js: Vec<&Vec<ScaledCyclotomic>> =
                            c.iter().enumerate().map(|(i, x)| &cache[&(t.class_of[i], x.clone())]).collect();
                        t.combine(&js)
                    })
                    .collect())
            }
        }
    }

    /// Whether `J_i(α, c_i)` vanishes for every `α` (dual route only); then
    /// `I(c) = 0` for every `c` with this `i`-th coordinate.
    pub fn coordinate_vanishes(&self, i: usize, ci: &Poly) -> Result<Option<bool>> {
        match &self.kind {
            TableKind::Direct(_) => Ok(None),
            TableKind::Dual(t) => Ok(Some(t.coordinate(t.class_of[i], ci)?.iter().all(|v| v.is_zero()))),
        }
    }
}

/// `I_{g,r}(c)` by the default route.
pub fn i_eval(inst: &Instance, w: &Weight, r: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    i_eval_with(inst, w, r, c, Route::Auto, Region::Full)
}

pub fn i_eval_with(inst: &Instance, w: &Weight, r: &Poly, c: &[Poly], route: Route, region: Region) -> Result<ScaledCyclotomic> {
    IntegralTable::new(inst, w, r, route, region)?.eval(c)
}

/// `N(w, λ)`: the number of `t ∈ O^d` with `|t − t0| < q^R` and
/// `F(gt + λ) = f`.
pub fn n_direct(inst: &Instance, w: &Weight) -> Result<u128> {
    let p = inst.p();
    let d = inst.dim();
    let rr = w.big_r;
    let n = rr.max(0);
    // the fixed part of each coordinate: digits of t0 from max(R, 0) up
    let mut fixed = Vec::with_capacity(d);
    for x in &w.t0 {
        if rr < 0 {
            let frac = (rr..0).map(|i| x.coeff(i)).collect::<Result<Vec<_>>>()?;
            if frac.iter().any(|&a| a != 0) {
                return Ok(0);
            }
        }
        let top = x.top().unwrap_or(-1);
        let coeffs = (0..=top.max(-1)).map(|i| if i < n { Ok(0) } else { x.coeff(i) }).collect::<Result<Vec<u32>>>()?;
        fixed.push(Poly::new(p, coeffs));
    }
    let per = pow_u128(p, n);
    let count = pow_u128(p, n * d as i64);
    guard(count, DEFAULT_FEASIBILITY_CAP)?;
    Ok((0..count as u64)
        .into_par_iter()
        .filter(|&idx| {
            let mut idx = idx;
            let x: Vec<Poly> = (0..d)
                .map(|i| {
                    let free = Poly::from_index(p, idx % per as u64, n as usize);
                    idx /= per as u64;
                    &(&inst.g * &(&fixed[i] + &free)) + &inst.lambda[i]
                })
                .collect();
            inst.form.eval_poly(&x) == inst.f
        })
        .count() as u128)
}

/// All `c` with `deg c_i < bound` and `c ≡ αAλ mod g` for some `α`,
/// the only ones with `S_{g,r}(c) ≠ 0`.
pub fn admissible_cs(inst: &Instance, bound: i64) -> Result<Vec<Vec<Poly>>> {
    let p = inst.p();
    let d = inst.dim();
    let deg_g = inst.g.deg();
    let zero = vec![Poly::zero(p); d];
    if bound <= 0 {
        return Ok(vec![zero]);
    }
    let fits = |x: &Poly| x.is_zero() || x.deg() < bound;
    let mut bases: BTreeSet<Vec<Poly>> = BTreeSet::new();
    if deg_g == 0 {
        bases.insert(zero);
    } else {
        let al = inst.form.apply_poly(&inst.lambda);
        for alpha in enumerate(p, (deg_g - 1) as usize, false) {
            let b: Vec<Poly> = al.iter().map(|x| (x * &alpha).rem(&inst.g)).collect();
            if b.iter().all(fits) {
                bases.insert(b);
            }
        }
    }
    let m = (bound - deg_g).max(0);
    let per = pow_u128(p, m);
    let lifts = pow_u128(p, m * d as i64);
    guard((bases.len() as u128).saturating_mul(lifts), DEFAULT_FEASIBILITY_CAP)?;
    let mut out = Vec::with_capacity(bases.len() * lifts as usize);
    for b in &bases {
        for idx in 0..lifts as u64 {
            let mut idx = idx;
            let c: Vec<Poly> = b
                .iter()
                .map(|bi| {
                    let u = Poly::from_index(p, idx % per as u64, m as usize);
                    idx /= per as u64;
                    bi + &(&inst.g * &u)
                })
                .collect();
            out.push(c);
        }
    }
    Ok(out)
}

/// One nonzero term `S_{g,r}(c) I_{g,r}(c)` of the expansion.
#[derive(Clone, Debug)]
pub struct CircleTerm {
    pub r: Poly,
    pub c: Vec<Poly>,
    pub s: ScaledCyclotomic,
    pub i: ScaledCyclotomic,
}

/// Every term with `I_{g,r}(c) ≠ 0`, in the order of `r` then `c`.
pub fn circle_terms(inst: &Instance, w: &Weight, route: Route) -> Result<Vec<CircleTerm>> {
    let rs: Vec<Poly> = enumerate(inst.p(), w.big_q as usize, true).collect();
    let blocks = rs
        .par_iter()
        .map(|r| -> Result<Vec<CircleTerm>> {
            let table = IntegralTable::new(inst, w, r, route, Region::Full)?;
            let cs = admissible_cs(inst, table.c_bound())?;
            let is = table.eval_many(&cs)?;
            let live: Vec<(Vec<Poly>, ScaledCyclotomic)> = cs.into_iter().zip(is).filter(|(_, i)| !i.is_zero()).collect();
            if live.is_empty() {
                return Ok(Vec::new());
            }
            let diag = if inst.form.is_diagonal() { Some(DiagonalSums::new(inst, r)?) } else { None };
            live.into_par_iter()
                .map(|(c, i)| {
                    let s = match &diag {
                        Some(t) => t.eval(&c)?,
                        None => s_full(inst, r, &c)?,
                    };
                    Ok(CircleTerm { r: r.clone(), c, s, i })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// `(1/(|g|q^{2Q})) Σ |gr|^{-d} S I` over the given terms.
pub fn assemble(inst: &Instance, w: &Weight, terms: &[CircleTerm]) -> ScaledCyclotomic {
    let d = inst.dim() as i64;
    let deg_g = inst.g.deg();
    let mut total = ScaledCyclotomic::zero(inst.p());
    for t in terms {
        let v = (&t.s * &t.i).scale((2 * d * (deg_g + t.r.deg())) as i32);
        total = &total + &v;
    }
    total.scale((2 * (deg_g + 2 * w.big_q)) as i32)
}

pub fn n_circle(inst: &Instance, w: &Weight) -> Result<ScaledCyclotomic> {
    Ok(assemble(inst, w, &circle_terms(inst, w, Route::Auto)?))
}

/// The two counts side by side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleCheck {
    pub q_param: i64,
    pub r_param: i64,
    pub route: Route,
    pub n_direct: u128,
    pub n_circle: String,
    pub terms: usize,
    pub equal: bool,
}

pub fn circle_check(inst: &Instance, w: &Weight, route: Route) -> Result<CircleCheck> {
    let direct = n_direct(inst, w)?;
    let terms = circle_terms(inst, w, route)?;
    let value = assemble(inst, w, &terms);
    Ok(CircleCheck {
        q_param: w.big_q,
        r_param: w.big_r,
        route,
        n_direct: direct,
        n_circle: value.to_string(),
        terms: terms.len(),
        equal: value == ScaledCyclotomic::from_int(inst.p(), direct as i128),
    })
}

fn random_poly(rng: &mut ChaCha8Rng, p: u32, deg: i64, exact: bool) -> Poly {
    if deg < 0 {
        return Poly::zero(p);
    }
    let mut c: Vec<u32> = (0..=deg).map(|_| rng.gen_range(0..p)).collect();
    if exact {
        c[deg as usize] = rng.gen_range(1..p);
    }
    Poly::new(p, c)
}

/// Outcome of the exhaustive check that `I(c) = 0` for ordinary `c` with
/// `deg c_i ≤ deg g + Q − R + extra`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrdinaryReport {
    pub q_param: i64,
    pub r_param: i64,
    pub moduli: usize,
    /// Number of ordinary vectors covered, over all `r`.
    pub ordinary_vectors: u128,
    /// Coordinate values certified by a vanishing factor `J_i`.
    pub certified_by_factor: usize,
    /// Coordinate values certified by the cell orthogonality bound.
    pub certified_by_orthogonality: usize,
    /// Vectors that needed a full evaluation.
    pub full_evaluations: usize,
    pub sampled_evaluations: usize,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Every ordinary `c` has a coordinate with `deg c_i ≥ deg g + Q − R`. If
/// for each such coordinate value either `J_i(·, c_i) ≡ 0` or the cell
/// orthogonality bound kills it, every ordinary `c` is covered. Values that
/// pass neither test fall back to full evaluation of all vectors containing
/// them. Random ordinary vectors are evaluated in full by both routes too.
pub fn ordinary_check(inst: &Instance, w: &Weight, extra: i64, samples: usize, seed: u64) -> Result<OrdinaryReport> {
    let p = inst.p();
    let d = inst.dim();
    let deg_g = inst.g.deg();
    let th = deg_g + w.big_q - w.big_r;
    let top = th + extra;
    let rs: Vec<Poly> = enumerate(p, w.big_q as usize, true).collect();
    let per_coord: Vec<Poly> = (th.max(0)..=top)
        .flat_map(|n| {
            let all: Vec<Poly> = enumerate(p, n as usize, false).filter(|x| !x.is_zero() && x.deg() == n).collect();
            all
        })
        .collect();
    struct Block {
        factor: usize,
        orth: usize,
        full: usize,
        sampled: usize,
        failures: Vec<String>,
    }
    let blocks = rs
        .par_iter()
        .enumerate()
        .map(|(ri, r)| -> Result<Block> {
            let mut b = Block { factor: 0, orth: 0, full: 0, sampled: 0, failures: Vec::new() };
            let table = IntegralTable::new(inst, w, r, Route::Auto, Region::Full)?;
            for i in 0..d {
                for ci in &per_coord {
                    if ci.deg() >= table.c_bound() {
                        b.orth += 1;
                        continue;
                    }
                    if table.coordinate_vanishes(i, ci)? == Some(true) {
                        b.factor += 1;
                        continue;
                    }
                    // fall back: all vectors with this coordinate
                    let others = pow_u128(p, (top + 1) * (d as i64 - 1));
                    guard(others, DEFAULT_FEASIBILITY_CAP)?;
                    let per = pow_u128(p, top + 1) as u64;
                    for idx in 0..others as u64 {
                        let mut idx = idx;
                        let c: Vec<Poly> = (0..d)
                            .map(|j| {
                                if j == i {
                                    return ci.clone();
                                }
                                let v = Poly::from_index(p, idx % per, (top + 1) as usize);
                                idx /= per;
                                v
                            })
                            .collect();
                        b.full += 1;
                        if !table.eval(&c)?.is_zero() {
                            b.failures.push(format!("r = {r}, c = {c:?}"));
                        }
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ri as u64).wrapping_mul(0x9e37_79b9));
            let direct = IntegralTable::new(inst, w, r, Route::Direct, Region::Full).ok();
            for _ in 0..samples {
                let lead = rng.gen_range(0..d);
                let c: Vec<Poly> = (0..d)
                    .map(|j| {
                        if j == lead {
                            let n = rng.gen_range(th.max(0)..=top);
                            random_poly(&mut rng, p, n, true)
                        } else {
                            random_poly(&mut rng, p, top, false)
                        }
                    })
                    .collect();
                b.sampled += 1;
                let mut vals = vec![table.eval(&c)?];
                if let Some(t) = &direct {
                    vals.push(t.eval(&c)?);
                }
                if vals.iter().any(|v| !v.is_zero()) {
                    b.failures.push(format!("sampled r = {r}, c = {c:?}"));
                }
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = pow_u128(p, top + 1).saturating_pow(d as u32);
    let inner = pow_u128(p, th).saturating_pow(d as u32);
    let failures: Vec<String> = blocks.iter().flat_map(|b| b.failures.clone()).collect();
    Ok(OrdinaryReport {
        q_param: w.big_q,
        r_param: w.big_r,
        moduli: rs.len(),
        ordinary_vectors: (total - inner).saturating_mul(rs.len() as u128),
        certified_by_factor: blocks.iter().map(|b| b.factor).sum(),
        certified_by_orthogonality: blocks.iter().map(|b| b.orth).sum(),
        full_evaluations: blocks.iter().map(|b| b.full).sum(),
        sampled_evaluations: blocks.iter().map(|b| b.sampled).sum(),
        pass: failures.is_empty(),
        failures,
    })
}

/// `ψ(⟨c, t0⟩/(gr))`.
pub fn center_phase(inst: &Instance, w: &Weight, r: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    let p = inst.p();
    let dot = c.iter().zip(&w.t0).fold(TruncLaurent::zero(p), |acc, (a, b)| acc.add(&lp(a).mul(b)));
    dot.div(&lp(&(&inst.g * r)), -1)?.psi()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub cases: usize,
    pub exhaustive_moduli: usize,
    pub sampled_moduli: usize,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Below the threshold `κ < |r|/q^R` the integral factors as
/// `I(c) = ψ(⟨c, t0⟩/(gr)) I(0)`. Checked on every such `c` when there are at
/// most `cap` of them for a given `r`, on `samples` random ones otherwise.
pub fn factorization_check(inst: &Instance, w: &Weight, max_deg_r: i64, cap: u128, samples: usize, seed: u64) -> Result<FactorizationReport> {
    let p = inst.p();
    let d = inst.dim();
    let rs: Vec<Poly> = enumerate(p, max_deg_r.min(w.big_q).max(0) as usize, true).collect();
    let blocks = rs
        .par_iter()
        .enumerate()
        .map(|(ri, r)| -> Result<(usize, bool, Vec<String>)> {
            let table = IntegralTable::new(inst, w, r, Route::Auto, Region::Full)?;
            let zero = vec![Poly::zero(p); d];
            let i0 = table.eval(&zero)?;
            let bound = inst.g.deg() + r.deg() - w.big_r;
            let count = pow_u128(p, bound.max(0) * d as i64);
            let exhaustive = count <= cap;
            let cs: Vec<Vec<Poly>> = if exhaustive {
                let per = pow_u128(p, bound.max(0)) as u64;
                (0..count as u64)
                    .map(|idx| {
                        let mut idx = idx;
                        (0..d)
                            .map(|_| {
                                let v = Poly::from_index(p, idx % per, bound.max(0) as usize);
                                idx /= per;
                                v
                            })
                            .collect()
                    })
                    .collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ri as u64).wrapping_mul(0x85eb_ca6b));
                (0..samples).map(|_| (0..d).map(|_| random_poly(&mut rng, p, bound - 1, false)).collect()).collect()
            };
            let vals = table.eval_many(&cs)?;
            let mut failures = Vec::new();
            for (c, v) in cs.iter().zip(&vals) {
                if *v != &center_phase(inst, w, r, c)? * &i0 {
                    failures.push(format!("r = {r}, c = {c:?}"));
                }
            }
            Ok((cs.len(), exhaustive, failures))
        })
        .collect::<Result<Vec<_>>>()?;
    let failures: Vec<String> = blocks.iter().flat_map(|b| b.2.clone()).collect();
    Ok(FactorizationReport {
        cases: blocks.iter().map(|b| b.0).sum(),
        exhaustive_moduli: blocks.iter().filter(|b| b.1).count(),
        sampled_moduli: blocks.iter().filter(|b| !b.1).count(),
        pass: failures.is_empty(),
        failures,
    })
}

/// Default threshold exponent: `η = q^{ω+2}`.
pub fn default_eta_exp(w: &Weight) -> i64 {
    w.omega + 2
}

/// A tested exceptional vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExceptionalRow {
    pub r: String,
    pub c: Vec<String>,
    pub kappa: i64,
    pub in_dual_cone: bool,
    /// `deg c_max − deg g − deg r + R`: the vector clears `η = q^e` exactly
    /// when this is at least `e`.
    pub margin: i64,
    pub magnitude: f64,
    /// `q^{Qd}(|c|q^Q/|gr|)^{-(d-1)/2}`.
    pub bound: f64,
    pub vanishes: bool,
}

pub fn exceptional_row(inst: &Instance, w: &Weight, cone: &Cone, r: &Poly, c: &[Poly]) -> Result<ExceptionalRow> {
    let cv = classify(inst, w, c);
    if cv.class != CClass::Exceptional {
        return Err(Error::InvalidInput(format!("c = {c:?} is not exceptional")));
    }
    let kappa = cv.kappa.expect("nonzero");
    let d = inst.dim() as f64;
    let q = inst.p() as f64;
    let cl: Vec<TruncLaurent> = c.iter().map(lp).collect();
    let v = i_eval(inst, w, r, c)?;
    let deg_c = kappa + inst.g.deg();
    let ratio = (deg_c + w.big_q - inst.g.deg() - r.deg()) as f64;
    Ok(ExceptionalRow {
        r: r.to_string(),
        c: c.iter().map(|x| x.to_string()).collect(),
        kappa,
        in_dual_cone: in_dual_cone(&inst.form, cone, &cl)?,
        margin: kappa - r.deg() + w.big_r,
        magnitude: v.abs(),
        bound: q.powf(w.big_q as f64 * d - ratio * (d - 1.0) / 2.0),
        vanishes: v.is_zero(),
    })
}

/// Vanishing outside the dual cone and the magnitude bound inside it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExceptionalReport {
    pub eta_exp: i64,
    pub rows: Vec<ExceptionalRow>,
    /// Rows outside `Ω*` at or above the threshold that do not vanish.
    pub violations: usize,
    /// Smallest exponent `e` such that every row outside `Ω*` with margin
    /// `≥ e` vanishes.
    pub smallest_working_eta_exp: Option<i64>,
    /// `max |I| / bound` over the rows inside `Ω*`.
    pub fitted_constant: Option<f64>,
}

pub fn exceptional_report(inst: &Instance, w: &Weight, cone: &Cone, cases: &[(Poly, Vec<Poly>)], eta_exp: i64) -> Result<ExceptionalReport> {
    let rows = cases.par_iter().map(|(r, c)| exceptional_row(inst, w, cone, r, c)).collect::<Result<Vec<_>>>()?;
    let outside: Vec<&ExceptionalRow> = rows.iter().filter(|x| !x.in_dual_cone).collect();
    let violations = outside.iter().filter(|x| x.margin >= eta_exp && !x.vanishes).count();
    let smallest = {
        let worst_bad = outside.iter().filter(|x| !x.vanishes).map(|x| x.margin).max();
        match (worst_bad, outside.iter().map(|x| x.margin).min()) {
            (_, None) => None,
            (None, Some(lo)) => Some(lo),
            (Some(b), Some(_)) => Some(b + 1),
        }
    };
    let fitted = rows
        .iter()
        .filter(|x| x.in_dual_cone)
        .map(|x| x.magnitude / x.bound)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(ExceptionalReport { eta_exp, rows, violations, smallest_working_eta_exp: smallest, fitted_constant: fitted })
}

/// `I_{g,r}(0)` against the shape `C q^{Qd}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroRow {
    pub deg_r: i64,
    pub value: String,
    pub ratio: f64,
}

pub fn zero_frequency_report(inst: &Instance, w: &Weight) -> Result<Vec<ZeroRow>> {
    let p = inst.p();
    let d = inst.dim();
    (0..=w.big_q)
        .map(|n| {
            let r = Poly::monomial(p, 1, n as usize);
            let v = i_eval(inst, w, &r, &vec![Poly::zero(p); d])?;
            let qd = (p as f64).powf((w.big_q * d as i64) as f64);
            Ok(ZeroRow { deg_r: n, value: v.to_string(), ratio: v.to_complex().0 / qd })
        })
        .collect()
}

/// Both descriptions of the cut-off region give the same integral.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionReport {
    pub cases: usize,
    pub failures: Vec<String>,
    pub pass: bool,
}

pub fn region_check(inst: &Instance, w: &Weight, cases: &[(Poly, Vec<Poly>)], route: Route) -> Result<RegionReport> {
    let failures = cases
        .par_iter()
        .map(|(r, c)| -> Result<Option<String>> {
            let a = i_eval_with(inst, w, r, c, route, Region::Full)?;
            let b = i_eval_with(inst, w, r, c, route, Region::Shifted)?;
            Ok(if a == b { None } else { Some(format!("r = {r}, c = {c:?}: {a} vs {b}")) })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    Ok(RegionReport { cases: cases.len(), pass: failures.is_empty(), failures })
}

/// Result of a bounded search for `F(x) = f`, `x ≡ λ mod g`, `x ∈ Ω`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Found(Vec<Poly>),
    /// Every candidate with `deg x_i ≤ deg_bound` was examined.
    Absent { deg_bound: i64, examined: u128 },
}

/// Polynomial square root, if `x` is a square.
pub fn poly_sqrt(x: &Poly) -> Option<Poly> {
    if x.is_zero() {
        return Some(x.clone());
    }
    if x.deg() % 2 != 0 {
        return None;
    }
    let s = lp(x).sqrt(0).ok()?;
    if !s.is_exact() {
        return None;
    }
    let s = s.int_part().ok()?;
    if &s * &s == *x {
        Some(s)
    } else {
        None
    }
}

/// Search the window `deg x_i ≤ deg_bound`: the first `d − 1` coordinates
/// are enumerated and the last is solved from the quadratic equation.
pub fn solve(inst: &Instance, cone: &Cone, deg_bound: i64) -> Result<SolveOutcome> {
    let p = inst.p();
    let d = inst.dim();
    let deg_g = inst.g.deg();
    let m = (deg_bound - deg_g + 1).max(0);
    if inst.lambda.iter().any(|l| !l.is_zero() && l.deg() > deg_bound) {
        return Ok(SolveOutcome::Absent { deg_bound, examined: 0 });
    }
    let per = pow_u128(p, m);
    let count = pow_u128(p, m * (d as i64 - 1));
    guard(count, DEFAULT_FEASIBILITY_CAP)?;
    let gram = inst.form.gram();
    let last = d - 1;
    let a = &gram[last][last];
    let found = (0..count as u64).into_par_iter().find_map_first(|idx| {
        let mut idx = idx;
        let mut x: Vec<Poly> = (0..last)
            .map(|i| {
                let u = Poly::from_index(p, idx % per as u64, m as usize);
                idx /= per as u64;
                &inst.lambda[i] + &(&inst.g * &u)
            })
            .collect();
        x.push(Poly::zero(p));
        let b = (0..last).fold(Poly::zero(p), |acc, j| &acc + &(&gram[last][j] * &x[j]));
        let c0 = &inst.form.eval_poly(&x) - &inst.f;
        let mut roots = Vec::new();
        if !a.is_zero() {
            let disc = &(&b * &b) - &(a * &c0);
            if let Some(s) = poly_sqrt(&disc) {
                for num in [&s - &b, &(-&s) - &b] {
                    if let Some(v) = num.exact_div(a) {
                        roots.push(v);
                    }
                }
            }
        } else if !b.is_zero() {
            if let Some(v) = (-&c0).exact_div(&b.scale(2)) {
                roots.push(v);
            }
        } else if c0.is_zero() {
            roots.push(inst.lambda[last].clone());
        }
        roots.into_iter().find_map(|v| {
            if !v.is_zero() && v.deg() > deg_bound {
                return None;
            }
            if !(&v - &inst.lambda[last]).rem(&inst.g).is_zero() && deg_g > 0 {
                return None;
            }
            let mut y = x.clone();
            y[last] = v;
            if inst.form.eval_poly(&y) != inst.f {
                return None;
            }
            match cone.contains_poly(&inst.form, &y) {
                Ok(true) => Some(y),
                _ => None,
            }
        })
    });
    Ok(match found {
        Some(x) => SolveOutcome::Found(x),
        None => SolveOutcome::Absent { deg_bound, examined: count },
    })
}

/// Degrees forced on cone solutions of `F(x) = f`: `deg x_i ≤` the returned
/// value for every solution in the cone.
pub fn cone_window(form: &QuadForm, cone: &Cone, deg_f: i64) -> Result<i64> {
    if cone.transform.is_some() {
        return Err(Error::InvalidInput("degree window needs an untransformed cone".into()));
    }
    match cone.shape {
        // |x|² ≤ q^s |F(x)|
        ConeShape::Anisotropic { slack } => Ok((deg_f + slack).div_euclid(2)),
        ConeShape::DominantCoordinate { index } => {
            let d = form.dim();
            let lead = form.entry(index, index).deg();
            let dominated = form.is_diagonal() && (0..d).all(|i| form.entry(i, i).deg() <= lead);
            if !dominated || form.entry(index, index).is_zero() {
                return Err(Error::InvalidInput("dominant-coordinate window needs a diagonal form led by that coordinate".into()));
            }
            // the dominant square cannot cancel, so deg F(x) = 2 deg x_index + lead
            Ok((deg_f - lead).div_euclid(2))
        }
    }
}

/// The lower-bound construction for `d ≥ 5` sums of squares: with
/// `λ = (1, 0, …)` and `f ≡ 1 + 2t^{deg g − 1}g mod g²` a solution in the
/// dominant-coordinate cone forces `deg f ≥ 4 deg g − 2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimalityWitness {
    pub q: u32,
    pub d: usize,
    pub g: String,
    pub absent_f: String,
    pub absent_window: i64,
    pub absent_examined: u128,
    pub absent: bool,
    pub companion_f: String,
    pub companion_solution: Option<Vec<String>>,
    pub companion_verified: bool,
}

pub fn optimality_instances(p: u32, d: usize, g: &Poly) -> Result<(Instance, Instance)> {
    let n = g.deg();
    if n < 2 {
        return Err(Error::InvalidInput("the construction needs deg g >= 2".into()));
    }
    let form = QuadForm::sum_of_squares(p, d)?;
    let mut lambda = vec![Poly::zero(p); d];
    lambda[0] = Poly::one(p);
    let tg = &Poly::monomial(p, 1, (n - 1) as usize) * g;
    let g2 = g * g;
    let base = &Poly::one(p) + &tg.scale(2);
    let bad = &base + &(&g2 * &Poly::monomial(p, 1, (2 * n - 3) as usize));
    let lead = &Poly::one(p) + &tg;
    let good = &(&lead * &lead) + &g2;
    Ok((Instance::new(form.clone(), bad, g.clone(), lambda.clone())?, Instance::new(form, good, g.clone(), lambda)?))
}

pub fn optimality_witness(p: u32, d: usize, g: &Poly) -> Result<OptimalityWitness> {
    let (bad, good) = optimality_instances(p, d, g)?;
    let cone = Cone::dominant_coordinate(0);
    let window = cone_window(&bad.form, &cone, bad.f.deg())?;
    let (absent, examined) = match solve(&bad, &cone, window)? {
        SolveOutcome::Found(_) => (false, 0),
        SolveOutcome::Absent { examined, .. } => (true, examined),
    };
    let gw = cone_window(&good.form, &cone, good.f.deg())?;
    let sol = match solve(&good, &cone, gw)? {
        SolveOutcome::Found(x) => Some(x),
        SolveOutcome::Absent { .. } => None,
    };
    let verified = sol.as_ref().is_some_and(|x| {
        good.form.eval_poly(x) == good.f
            && x.iter().zip(&good.lambda).all(|(a, l)| (a - l).rem(g).is_zero())
            && cone.contains_poly(&good.form, x).unwrap_or(false)
    });
    Ok(OptimalityWitness {
        q: p,
        d,
        g: g.to_string(),
        absent_f: bad.f.to_string(),
        absent_window: window,
        absent_examined: examined,
        absent,
        companion_f: good.f.to_string(),
        companion_solution: sol.map(|x| x.iter().map(|e| e.to_string()).collect()),
        companion_verified: verified,
    })
}

/// A residue class `f ≡ residue mod g²` with congruence point `λ`.
#[derive(Clone, Debug)]
pub struct ThresholdTrial {
    pub g: Poly,
    pub lambda: Vec<Poly>,
    pub residue: Poly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub trial: usize,
    pub deg_g: i64,
    pub g: String,
    pub residue: String,
    /// Smallest degree at which some sampled `f` is solvable.
    pub min_deg_any: Option<i64>,
    /// Smallest degree from which every sampled admissible `f` up to the
    /// scan limit is solvable.
    pub min_deg_all: Option<i64>,
    pub ratio_any: Option<f64>,
    pub ratio_all: Option<f64>,
    pub sampled: usize,
}

/// The two trials used by default for `deg g = n`: the residue class of the
/// lower-bound construction at `g = t^n`, and one random class.
pub fn default_trials(form: &QuadForm, deg_g: usize, seed: u64) -> Vec<ThresholdTrial> {
    let p = form.p();
    let d = form.dim();
    let g = Poly::monomial(p, 1, deg_g);
    let mut out = Vec::new();
    let mut lambda = vec![Poly::zero(p); d];
    lambda[0] = Poly::one(p);
    let tg = &Poly::monomial(p, 1, deg_g.saturating_sub(1)) * &g;
    out.push(ThresholdTrial { g: g.clone(), lambda, residue: &Poly::one(p) + &tg.scale(2) });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g2 = &g * &g;
    for _ in 0..64 {
        let lambda: Vec<Poly> = (0..d).map(|_| random_poly(&mut rng, p, deg_g as i64 - 1, false)).collect();
        let k = random_poly(&mut rng, p, deg_g as i64 - 1, false);
        let residue = (&form.eval_poly(&lambda) + &(&g * &k)).rem(&g2);
        if Instance::new(form.clone(), residue.clone(), g.clone(), lambda.clone()).is_ok() {
            out.push(ThresholdTrial { g, lambda, residue });
            break;
        }
    }
    out
}

/// For each trial and each degree `D ≤ max_deg_f`, sample up to `samples`
/// admissible `f ≡ residue mod g²` of degree `D` (admissible: `F = f` has a
/// point in the cone over `K_∞`) and search the forced degree window.
pub fn threshold_scan(form: &QuadForm, cone: &Cone, trials: &[ThresholdTrial], max_deg_f: i64, samples: usize, seed: u64) -> Result<Vec<ThresholdRow>> {
    let p = form.p();
    trials
        .iter()
        .enumerate()
        .map(|(ti, tr)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ti as u64 + 1).wrapping_mul(0x2545_f491));
            let g2 = &tr.g * &tr.g;
            let n = tr.g.deg();
            let mut per_degree: Vec<(i64, Vec<bool>)> = Vec::new();
            for big_d in 0..=max_deg_f {
                let mut fs: BTreeSet<Poly> = BTreeSet::new();
                if big_d < 2 * n {
                    if !tr.residue.is_zero() && tr.residue.deg() == big_d {
                        fs.insert(tr.residue.clone());
                    }
                } else {
                    let e = big_d - 2 * n;
                    let space = pow_u128(p, e) * (p as u128 - 1);
                    for _ in 0..(samples * 4).min(space as usize * 4) {
                        if fs.len() >= samples {
                            break;
                        }
                        let h = random_poly(&mut rng, p, e, true);
                        fs.insert(&tr.residue + &(&g2 * &h));
                    }
                }
                let mut results = Vec::new();
                for f in fs {
                    let inst = match Instance::new(form.clone(), f.clone(), tr.g.clone(), tr.lambda.clone()) {
                        Ok(i) => i,
                        Err(_) => continue,
                    };
                    if find_cone_point(form, cone, &f, -4).is_err() {
                        continue;
                    }
                    let window = cone_window(form, cone, big_d)?;
                    results.push(matches!(solve(&inst, cone, window)?, SolveOutcome::Found(_)));
                }
                if !results.is_empty() {
                    per_degree.push((big_d, results));
                }
            }
            let min_any = per_degree.iter().find(|(_, r)| r.iter().any(|&b| b)).map(|x| x.0);
            let mut min_all = None;
            for (dd, r) in per_degree.iter().rev() {
                if r.iter().all(|&b| b) {
                    min_all = Some(*dd);
                } else {
                    break;
                }
            }
            let ratio = |x: Option<i64>| x.map(|v| v as f64 / n as f64);
            Ok(ThresholdRow {
                trial: ti,
                deg_g: n,
                g: tr.g.to_string(),
                residue: tr.residue.to_string(),
                min_deg_any: min_any,
                min_deg_all: min_all,
                ratio_any: ratio(min_any),
                ratio_all: ratio(min_all),
                sampled: per_degree.iter().map(|x| x.1.len()).sum(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: &str) -> Poly {
        Poly::parse(s, 3).unwrap()
    }

    #[test]
    fn weight_parameters() {
        let inst = Instance::new(QuadForm::sum_of_squares(3, 5).unwrap(), pp("t^6"), pp("1"), vec![pp("0"); 5]).unwrap();
        let cone = Cone::anisotropic(&inst.form, 2).unwrap();
        let w = make_weight(&inst, &cone, 4).unwrap();
        assert_eq!(w.x0[0], lp(&pp("t^3")));
        assert_eq!((w.big_r, w.q_formula), (1, 5));
        assert!(make_weight(&inst, &cone, 3).is_err());
    }

    #[test]
    fn poly_square_roots() {
        assert_eq!(poly_sqrt(&pp("t^2+2*t+1")).map(|s| &s * &s), Some(pp("t^2+2*t+1")));
        assert_eq!(poly_sqrt(&pp("t^2+1")), None);
        assert_eq!(poly_sqrt(&pp("2")), None);
    }
}
