//! The complete exponential sums `S_{g,r}(c)` of the delta method.
//!
//! For an [`Instance`] `(F, f, g, λ)` with `k = (f − F(λ))/g`,
//!
//! ```text
//! S_{g,r}(a, ℓ, c) = Σ_{b mod gr} ψ([(a + rℓ)(2λᵀAb − k) + agF(b) − ⟨c,b⟩] / (gr))
//! S_{g,r}(c)       = Σ_{|ℓ| < |g|} Σ*_{|a| < |r|} S_{g,r}(a, ℓ, c)
//! ```
//!
//! Every sum has at least two independent evaluation routes: the triple sum,
//! the `ℓ`-reduced sum restricted to `g | 2λᵀAb − k`, the `S₁·S₂`
//! factorization along `r = r₁r₂`, and (for diagonal forms) a product of
//! one-dimensional sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basefield::{ScaledCyclotomic, ZetaSum};
use crate::error::{guard, Error, Result};
use crate::polyring::{divisor_count, enumerate, factor, Poly, ResidueRing, RingTables};
use crate::quadform::{det, diagonalize_matrix_mod, mat_vec, PolyMatrix, QuadForm, QuadFormSpec};
use crate::DEFAULT_FEASIBILITY_CAP;

/// A system `F(x) = f`, `x ≡ λ mod g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub form: QuadForm,
    pub f: Poly,
    pub g: Poly,
    pub lambda: Vec<Poly>,
    pub k: Poly,
}

/// JSON description of an instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub form: QuadFormSpec,
    pub f: String,
    pub g: String,
    pub lambda: Vec<String>,
}

impl Instance {
    pub fn new(form: QuadForm, f: Poly, g: Poly, lambda: Vec<Poly>) -> Result<Self> {
        let d = form.dim();
        if lambda.len() != d {
            return Err(Error::InvalidInput(format!("lambda has {} entries, the form has dimension {d}", lambda.len())));
        }
        if g.is_zero() || !g.is_monic() {
            return Err(Error::InvalidInput("g must be monic".into()));
        }
        if lambda.iter().any(|l| l.deg() >= g.deg()) {
            return Err(Error::InvalidInput("every lambda_i needs deg lambda_i < deg g".into()));
        }
        let delta = form.disc();
        if !(&f * &delta).is_coprime(&g) {
            return Err(Error::NotCoprime("(f * Delta, g) must be 1".into()));
        }
        if !lambda.iter().any(|l| l.is_coprime(&g)) {
            return Err(Error::NotCoprime("some lambda_i must be coprime to g".into()));
        }
        let k = (&f - &form.eval_poly(&lambda))
            .exact_div(&g)
            .ok_or_else(|| Error::InvalidInput("g does not divide f - F(lambda)".into()))?;
        Ok(Instance { form, f, g, lambda, k })
    }

    pub fn from_spec(spec: &InstanceSpec) -> Result<Self> {
        let form = QuadForm::from_spec(&spec.form)?;
        let p = form.p();
        let lambda = spec.lambda.iter().map(|s| Poly::parse(s, p)).collect::<Result<Vec<_>>>()?;
        Self::new(form, Poly::parse(&spec.f, p)?, Poly::parse(&spec.g, p)?, lambda)
    }

    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            form: self.form.to_spec(),
            f: self.f.to_string(),
            g: self.g.to_string(),
            lambda: self.lambda.iter().map(|l| l.to_string()).collect(),
        }
    }

    pub fn p(&self) -> u32 {
        self.form.p()
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn delta(&self) -> Poly {
        self.form.disc()
    }

    /// `2Aλ`.
    pub fn two_a_lambda(&self) -> Vec<Poly> {
        self.form.apply_poly(&self.lambda).iter().map(|x| x.scale(2)).collect()
    }

    /// `|g| = q^{deg g}`.
    pub fn g_norm(&self) -> i128 {
        (self.p() as i128).pow(self.g.degree().unwrap() as u32)
    }
}

pub(crate) fn tables(ring: &ResidueRing) -> Result<&RingTables> {
    ring.tables().ok_or(Error::Infeasible { estimate: ring.size() as u128, cap: crate::polyring::TABLE_LIMIT as u128 })
}

/// The Gram matrix encoded in a residue ring, with off-diagonal entries
/// doubled so that `F(b) = Σ_i G_ii b_i² + Σ_{i<j} (2G_ij) b_i b_j`.
pub(crate) struct EncodedForm {
    diag: Vec<usize>,
    off: Vec<(usize, usize, usize)>,
}

impl EncodedForm {
    pub(crate) fn new(ring: &ResidueRing, gram: &PolyMatrix, scale: &Poly) -> Self {
        let d = gram.len();
        let diag = (0..d).map(|i| ring.encode(&(&gram[i][i] * scale))).collect();
        let mut off = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                if !gram[i][j].is_zero() {
                    off.push((i, j, ring.encode(&(&gram[i][j] * scale).scale(2))));
                }
            }
        }
        EncodedForm { diag, off }
    }

    #[inline]
    pub(crate) fn eval(&self, t: &RingTables, b: &[usize]) -> usize {
        let mut acc = 0;
        for (i, &x) in b.iter().enumerate() {
            if self.diag[i] != 0 && x != 0 {
                acc = t.add(acc, t.mul(self.diag[i], t.mul(x, x)));
            }
        }
        for &(i, j, c) in &self.off {
            acc = t.add(acc, t.mul(c, t.mul(b[i], b[j])));
        }
        acc
    }
}

#[inline]
fn lin(t: &RingTables, w: &[usize], b: &[usize]) -> usize {
    w.iter().zip(b).fold(0, |acc, (&x, &y)| t.add(acc, t.mul(x, y)))
}

/// Sum over every `b ∈ (O/m)^d`, split across workers by the first
/// coordinate. `body` receives `b` as element indices.
fn sum_over_grid<F>(ring: &ResidueRing, d: usize, work_per_point: u128, body: F) -> Result<ZetaSum>
where
    F: Fn(&[usize], &mut ZetaSum) + Sync,
{
    let size = ring.size();
    guard((size as u128).pow(d as u32).saturating_mul(work_per_point.max(1)), DEFAULT_FEASIBILITY_CAP)?;
    let p = ring.p();
    if d == 0 {
        let mut acc = ZetaSum::new(p);
        body(&[], &mut acc);
        return Ok(acc);
    }
    let rest = size.pow(d as u32 - 1);
    let parts: Vec<ZetaSum> = (0..size)
        .into_par_iter()
        .map(|first| {
            let mut acc = ZetaSum::new(p);
            let mut b = vec![0usize; d];
            b[0] = first;
            for idx in 0..rest {
                let mut r = idx;
                for x in b.iter_mut().skip(1) {
                    *x = r % size;
                    r /= size;
                }
                body(&b, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = ZetaSum::new(p);
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

fn units_of(m: &Poly) -> Vec<Poly> {
    ResidueRing::new(m).expect("nonzero modulus").units().collect()
}

fn residues_of(m: &Poly) -> Vec<Poly> {
    ResidueRing::new(m).expect("nonzero modulus").elements().collect()
}

fn check_monic(r: &Poly) -> Result<()> {
    if r.is_zero() || !r.is_monic() {
        return Err(Error::InvalidInput("r must be monic".into()));
    }
    Ok(())
}

fn check_c(inst: &Instance, c: &[Poly]) -> Result<()> {
    if c.len() != inst.dim() {
        return Err(Error::InvalidInput(format!("c has {} entries, expected {}", c.len(), inst.dim())));
    }
    Ok(())
}

/// `S_{g,r}(a, ℓ, c)` by enumerating `b mod gr`.
pub fn s_al(inst: &Instance, r: &Poly, a: &Poly, ell: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    check_monic(r)?;
    check_c(inst, c)?;
    if a.deg() >= r.deg() || ell.deg() >= inst.g.deg() || !a.is_coprime(r) {
        return Err(Error::InvalidInput("need |a| < |r|, (a, r) = 1 and |l| < |g|".into()));
    }
    let m = &inst.g * r;
    let ring = ResidueRing::new(&m)?;
    let t = tables(&ring)?;
    let form = EncodedForm::new(&ring, inst.form.gram(), &(a * &inst.g));
    let w: Vec<usize> = inst.two_a_lambda().iter().map(|x| ring.encode(&(x * &(a + &(r * ell))))).collect();
    let uk = ring.encode(&(&inst.k * &(a + &(r * ell))));
    let cc: Vec<usize> = c.iter().map(|x| ring.encode(x)).collect();
    let z = sum_over_grid(&ring, inst.dim(), 1, |b, acc| {
        let n = t.sub(t.add(t.sub(lin(t, &w, b), uk), form.eval(t, b)), lin(t, &cc, b));
        acc.add(t.top(n), 1);
    })?;
    Ok(z.value())
}

/// Which evaluation route [`s_full_with`] takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SumPath {
    /// The definition: sums over `ℓ`, `a` and `b`.
    Triple,
    /// `|g| Σ*_a Σ_{b : g | 2λᵀAb − k}` with the `ℓ`-sum done analytically.
    Reduced,
    /// `S₁·S₂` along `r = r₁r₂`.
    Factored,
    /// Products of one-dimensional sums (diagonal forms only).
    Coordinatewise,
}

/// `S_{g,r}(c)` through the `ℓ`-reduced sum.
pub fn s_full(inst: &Instance, r: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    s_full_with(inst, r, c, SumPath::Reduced)
}

pub fn s_full_with(inst: &Instance, r: &Poly, c: &[Poly], path: SumPath) -> Result<ScaledCyclotomic> {
    check_monic(r)?;
    check_c(inst, c)?;
    match path {
        SumPath::Triple => s_triple(inst, r, c),
        SumPath::Reduced => s_reduced(inst, r, c),
        SumPath::Factored => Ok(s_factored(inst, r, c)?.value()),
        SumPath::Coordinatewise => DiagonalSums::new(inst, r)?.eval(c),
    }
}

/// Per-`b` data shared by the triple and reduced routes: `L = 2λᵀAb − k`,
/// `gF(b)` and `⟨c, b⟩`, all modulo `gr`.
struct Pointwise<'a> {
    t: &'a RingTables,
    w: Vec<usize>,
    k: usize,
    gform: EncodedForm,
    c: Vec<usize>,
}

impl<'a> Pointwise<'a> {
    fn new(inst: &Instance, ring: &'a ResidueRing, c: &[Poly]) -> Result<Self> {
        let t = tables(ring)?;
        Ok(Pointwise {
            t,
            w: inst.two_a_lambda().iter().map(|x| ring.encode(x)).collect(),
            k: ring.encode(&inst.k),
            gform: EncodedForm::new(ring, inst.form.gram(), &inst.g),
            c: c.iter().map(|x| ring.encode(x)).collect(),
        })
    }

    #[inline]
    fn values(&self, b: &[usize]) -> (usize, usize, usize) {
        let t = self.t;
        (t.sub(lin(t, &self.w, b), self.k), self.gform.eval(t, b), lin(t, &self.c, b))
    }
}

fn s_triple(inst: &Instance, r: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    let m = &inst.g * r;
    let ring = ResidueRing::new(&m)?;
    let pw = Pointwise::new(inst, &ring, c)?;
    let t = pw.t;
    let mut pairs = Vec::new();
    for a in units_of(r) {
        for ell in residues_of(&inst.g) {
            pairs.push((ring.encode(&(&a + &(r * &ell))), ring.encode(&a)));
        }
    }
    let z = sum_over_grid(&ring, inst.dim(), pairs.len() as u128, |b, acc| {
        let (l, gf, cb) = pw.values(b);
        for &(u, a) in &pairs {
            let n = t.sub(t.add(t.mul(u, l), t.mul(a, gf)), cb);
            acc.add(t.top(n), 1);
        }
    })?;
    Ok(z.value())
}

fn s_reduced(inst: &Instance, r: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    let m = &inst.g * r;
    let ring = ResidueRing::new(&m)?;
    let pw = Pointwise::new(inst, &ring, c)?;
    let t = pw.t;
    let divisible: Vec<bool> = ring.elements().map(|x| inst.g.divides(&x)).collect();
    let units: Vec<usize> = units_of(r).iter().map(|a| ring.encode(a)).collect();
    let z = sum_over_grid(&ring, inst.dim(), units.len() as u128, |b, acc| {
        let (l, gf, cb) = pw.values(b);
        if !divisible[l] {
            return;
        }
        let x = t.add(l, gf);
        for &a in &units {
            acc.add(t.top(t.sub(t.mul(a, x), cb)), 1);
        }
    })?;
    Ok(z.value().mul_int(inst.g_norm()))
}

/// `r = r₁r₂` with `gcd(r₁, Δg) = 1` and every prime of `r₂` dividing `Δg`.
pub fn split_r(r: &Poly, g: &Poly, delta: &Poly) -> (Poly, Poly) {
    let p = r.p();
    let dg = delta * g;
    let mut r1 = Poly::constant(p, r.lc());
    let mut r2 = Poly::one(p);
    for (w, e) in factor(r) {
        let pe = w.pow(e as u64);
        if w.divides(&dg) {
            r2 = &r2 * &pe;
        } else {
            r1 = &r1 * &pe;
        }
    }
    (r1, r2)
}

/// The two factors of `S_{g,r}(c) = S₁S₂`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSums {
    pub r1: Poly,
    pub r2: Poly,
    pub s1: ScaledCyclotomic,
    pub s2: ScaledCyclotomic,
}

impl SplitSums {
    pub fn value(&self) -> ScaledCyclotomic {
        &self.s1 * &self.s2
    }
}

/// `x mod m` as a polynomial, with everything modulo a unit equal to 0.
fn mod_or_zero(x: &Poly, m: &Poly) -> Poly {
    if m.deg() <= 0 {
        Poly::zero(x.p())
    } else {
        x.rem(m)
    }
}

fn inv_or_zero(x: &Poly, m: &Poly) -> Result<Poly> {
    if m.deg() <= 0 {
        return Ok(Poly::zero(x.p()));
    }
    x.inv_mod(m).ok_or_else(|| Error::NotCoprime(format!("{x} is not invertible mod {m}")))
}

/// `S₁ = S_{r₁}((gr₂)²F, c, 2r₂Aλ, −r₂k₁)` and the constrained sum `S₂`
/// modulo `gr₂`, where `k = gr₂k₁ + r₁k₂`.
pub fn s_factored(inst: &Instance, r: &Poly, c: &[Poly]) -> Result<SplitSums> {
    check_monic(r)?;
    check_c(inst, c)?;
    let (r1, r2) = split_r(r, &inst.g, &inst.delta());
    let g = &inst.g;
    let m2 = g * &r2;
    let k2 = mod_or_zero(&(&inst.k * &inv_or_zero(&r1, &m2)?), &m2);
    let k1 = (&inst.k - &(&r1 * &k2)).exact_div(&m2).expect("k - r1 k2 is divisible by g r2");
    let gr2sq = &m2 * &m2;
    let gram1: PolyMatrix = inst.form.gram().iter().map(|row| row.iter().map(|x| x * &gr2sq).collect()).collect();
    let cp: Vec<Poly> = inst.two_a_lambda().iter().map(|x| x * &r2).collect();
    let e = -&(&r2 * &k1);
    let s1 = s_quadratic_direct(&gram1, c, &cp, &e, &r1)?;

    let ring = ResidueRing::new(&m2)?;
    let t = tables(&ring)?;
    let w: Vec<usize> = inst.two_a_lambda().iter().map(|x| ring.encode(x)).collect();
    let kr = ring.encode(&mod_or_zero(&(&inst.k * &inv_or_zero(&r1, g)?), g));
    let divisible: Vec<bool> = ring.elements().map(|x| g.divides(&x)).collect();
    let r1e = ring.encode(&r1);
    let form = EncodedForm::new(&ring, inst.form.gram(), &(g * &(&r1 * &r1)));
    let r1k2 = ring.encode(&(&r1 * &k2));
    let cc: Vec<usize> = c.iter().map(|x| ring.encode(x)).collect();
    let units: Vec<usize> = units_of(&r2).iter().map(|a| ring.encode(a)).collect();
    let z = sum_over_grid(&ring, inst.dim(), units.len() as u128, |b, acc| {
        let wb = lin(t, &w, b);
        if !divisible[t.sub(wb, kr)] {
            return;
        }
        let x = t.sub(t.add(t.mul(r1e, wb), form.eval(t, b)), r1k2);
        let cb = lin(t, &cc, b);
        for &a in &units {
            acc.add(t.top(t.sub(t.mul(a, x), cb)), 1);
        }
    })?;
    let s2 = z.value().mul_int(inst.g_norm());
    Ok(SplitSums { r1, r2, s1, s2 })
}

/// One-dimensional sums for a diagonal form: for every pair `(a, ℓ)`,
/// coordinate `i` and residue `c_i mod gr`,
/// `T = Σ_{b mod gr} ψ([2(a + rℓ)λ_iA_ii b + agA_ii b² − c_i b]/(gr))`.
/// Then `S_{g,r}(c) = Σ_{a,ℓ} ψ(−(a + rℓ)k/(gr)) Π_i T(a, ℓ, i, c_i)`.
pub struct DiagonalSums {
    ring: ResidueRing,
    phase: Vec<u32>,
    table: Vec<Vec<Vec<ScaledCyclotomic>>>,
    p: u32,
}

impl DiagonalSums {
    pub fn new(inst: &Instance, r: &Poly) -> Result<Self> {
        check_monic(r)?;
        if !inst.form.is_diagonal() {
            return Err(Error::InvalidInput("coordinatewise sums need a diagonal form".into()));
        }
        let p = inst.p();
        let d = inst.dim();
        let m = &inst.g * r;
        let ring = ResidueRing::new(&m)?;
        let size = ring.size();
        let pairs: Vec<(Poly, Poly)> =
            units_of(r).into_iter().flat_map(|a| residues_of(&inst.g).into_iter().map(move |l| (a.clone(), l))).collect();
        guard((pairs.len() * d * size * size) as u128, DEFAULT_FEASIBILITY_CAP)?;
        let t = tables(&ring)?;
        let ukey: Vec<usize> = pairs.iter().map(|(a, l)| ring.encode(&(a + &(r * l)))).collect();
        let akey: Vec<usize> = pairs.iter().map(|(a, _)| ring.encode(a)).collect();
        let k = ring.encode(&inst.k);
        let phase = ukey.iter().map(|&u| t.top(t.neg(t.mul(u, k)))).collect();
        let lin_c: Vec<usize> = (0..d).map(|i| ring.encode(&(&inst.lambda[i] * inst.form.entry(i, i)).scale(2))).collect();
        let quad_c: Vec<usize> = (0..d).map(|i| ring.encode(&(&inst.g * inst.form.entry(i, i)))).collect();
        let table = (0..pairs.len())
            .into_par_iter()
            .map(|pi| {
                (0..d)
                    .map(|i| {
                        let lb = t.mul(ukey[pi], lin_c[i]);
                        let qb = t.mul(akey[pi], quad_c[i]);
                        (0..size)
                            .map(|ci| {
                                let mut z = ZetaSum::new(p);
                                for b in 0..size {
                                    let v = t.sub(t.add(t.mul(lb, b), t.mul(qb, t.mul(b, b))), t.mul(ci, b));
                                    z.add(t.top(v), 1);
                                }
                                z.value()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(DiagonalSums { ring, phase, table, p })
    }

    pub fn eval(&self, c: &[Poly]) -> Result<ScaledCyclotomic> {
        let idx: Vec<usize> = c.iter().map(|x| self.ring.encode(x)).collect();
        self.eval_encoded(&idx)
    }

    /// `c` given as residue indices modulo `gr`.
    pub fn eval_encoded(&self, idx: &[usize]) -> Result<ScaledCyclotomic> {
        let mut total = ScaledCyclotomic::zero(self.p);
        for (pi, rows) in self.table.iter().enumerate() {
            let mut prod = ScaledCyclotomic::zeta(self.p, self.phase[pi] as u64);
            for (i, &ci) in idx.iter().enumerate() {
                let v = &rows[i][ci];
                if v.is_zero() {
                    prod = ScaledCyclotomic::zero(self.p);
                    break;
                }
                prod = &prod * v;
            }
            total = &total + &prod;
        }
        Ok(total)
    }

    pub fn ring(&self) -> &ResidueRing {
        &self.ring
    }
}

/// Whether `c ≡ 2(a + rℓ)Aλ mod g`, the condition under which
/// `S_{g,r}(a, ℓ, c)` can be nonzero.
pub fn cform_allows(inst: &Instance, r: &Poly, a: &Poly, ell: &Poly, c: &[Poly]) -> bool {
    let u = a + &(r * ell);
    inst.two_a_lambda().iter().zip(c).all(|(w, ci)| mod_or_zero(&(&(w * &u) - ci), &inst.g).is_zero())
}

/// Whether `c ≡ αAλ mod g` for some `α ∈ O`.
pub fn c_admissible(inst: &Instance, c: &[Poly]) -> bool {
    if inst.g.deg() <= 0 {
        return true;
    }
    let al = inst.form.apply_poly(&inst.lambda);
    residues_of(&inst.g).iter().any(|alpha| al.iter().zip(c).all(|(w, ci)| (&(w * alpha) - ci).rem(&inst.g).is_zero()))
}

fn check_quadratic(gram: &PolyMatrix, r: &Poly) -> Result<()> {
    check_monic(r)?;
    if !det(gram).scale(2).is_coprime(r) {
        return Err(Error::NotCoprime(format!("r = {r} must be coprime to 2 det B")));
    }
    Ok(())
}

/// `S_r(G, c, c′, e) = Σ*_a Σ_{b mod r} ψ([a(G(b) + ⟨c′,b⟩ + e) − ⟨c,b⟩]/r)` by enumeration.
pub fn s_quadratic_direct(gram: &PolyMatrix, c: &[Poly], cp: &[Poly], e: &Poly, r: &Poly) -> Result<ScaledCyclotomic> {
    check_quadratic(gram, r)?;
    let ring = ResidueRing::new(r)?;
    let t = tables(&ring)?;
    let form = EncodedForm::new(&ring, gram, &Poly::one(r.p()));
    let cpe: Vec<usize> = cp.iter().map(|x| ring.encode(x)).collect();
    let ce: Vec<usize> = c.iter().map(|x| ring.encode(x)).collect();
    let ee = ring.encode(e);
    let units: Vec<usize> = ring.units().map(|a| ring.encode(&a)).collect();
    let z = sum_over_grid(&ring, gram.len(), units.len() as u128, |b, acc| {
        let x = t.add(t.add(form.eval(t, b), lin(t, &cpe, b)), ee);
        let cb = lin(t, &ce, b);
        for &a in &units {
            acc.add(t.top(t.sub(t.mul(a, x), cb)), 1);
        }
    })?;
    Ok(z.value())
}

/// The Jacobi symbol `(x/r)` for monic `r`, multiplying Legendre symbols
/// from Euler's criterion in `O/(ϖ)`.
pub fn jacobi(x: &Poly, r: &Poly) -> i8 {
    if r.deg() <= 0 {
        return 1;
    }
    let mut s = 1i8;
    for (w, e) in factor(r) {
        let y = x.rem(&w);
        if y.is_zero() {
            return 0;
        }
        let norm = (r.p() as u64).pow(w.degree().unwrap() as u32);
        let leg = if y.powmod((norm - 1) / 2, &w).is_one() { 1 } else { -1 };
        if e % 2 == 1 {
            s *= leg;
        }
    }
    s
}

/// The quadratic Gauss sum `τ_r = Σ_{x mod r} ψ(x²/r)`.
pub fn gauss_sum_mod(r: &Poly) -> Result<ScaledCyclotomic> {
    let ring = ResidueRing::new(r)?;
    let t = tables(&ring)?;
    let mut z = ZetaSum::new(r.p());
    for x in 0..ring.size() {
        z.add(t.top(t.mul(x, x)), 1);
    }
    Ok(z.value())
}

/// `S_r(G, c, c′, e)` through diagonalization mod `r`:
/// `(D/r) τ_r^d ψ(Σ \overline{2α_j}c_jc′_j/r) Σ*_a (a/r)^d ψ([a(e − Σ\overline{4α_j}c′_j²) − āΣ\overline{4α_j}c_j²]/r)`,
/// a Kloosterman sum for even `d` and a Salié sum for odd `d`.
pub fn s_quadratic_closed(gram: &PolyMatrix, c: &[Poly], cp: &[Poly], e: &Poly, r: &Poly) -> Result<ScaledCyclotomic> {
    check_quadratic(gram, r)?;
    let p = r.p();
    let d = gram.len();
    if r.deg() == 0 {
        return Ok(ScaledCyclotomic::one(p));
    }
    let ring = ResidueRing::new(r)?;
    let (u, alpha) = diagonalize_matrix_mod(gram, r)?;
    let ut = crate::quadform::transpose(&u);
    let ct: Vec<Poly> = mat_vec(&ut, c).iter().map(|x| ring.reduce(x)).collect();
    let cpt: Vec<Poly> = mat_vec(&ut, cp).iter().map(|x| ring.reduce(x)).collect();
    let inv = |x: &Poly| ring.inv(x).expect("alpha_j is a unit mod r");
    let mut ph0 = Poly::zero(p);
    let mut shift = Poly::zero(p);
    let mut cc = Poly::zero(p);
    for j in 0..d {
        let i2 = inv(&alpha[j].scale(2));
        let i4 = inv(&alpha[j].scale(4 % p));
        ph0 = &ph0 + &(&i2 * &(&ct[j] * &cpt[j]));
        shift = &shift + &(&i4 * &(&cpt[j] * &cpt[j]));
        cc = &cc + &(&i4 * &(&ct[j] * &ct[j]));
    }
    let e1 = ring.reduce(&(e - &shift));
    let cc = ring.reduce(&cc);
    let mut kl = ZetaSum::new(p);
    for a in ring.units() {
        let ab = inv(&a);
        let sign = jacobi(&a, r).pow(d as u32);
        let v = &(&a * &e1) - &(&ab * &cc);
        kl.add(ring.psi_exponent(&v), sign as i128);
    }
    let tau = gauss_sum_mod(r)?;
    let mut out = kl.value();
    for _ in 0..d {
        out = &out * &tau;
    }
    out = &out * &ScaledCyclotomic::zeta(p, ring.psi_exponent(&ph0) as u64);
    Ok(out.mul_int(jacobi(&det(gram), r) as i128))
}

/// The outcome of a Weil-bound comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeilCheck {
    pub value: ScaledCyclotomic,
    pub magnitude: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `Σ*_{|x| < |c|} (x/c)^θ ψ((mx + nx̄)/c)`. The Jacobi symbol and `ψ(·/c)`
/// are taken with respect to `c` itself; the symbol uses its monic associate.
pub fn kloosterman_salie(m: &Poly, n: &Poly, c: &Poly, theta: u8) -> Result<ScaledCyclotomic> {
    if c.is_zero() {
        return Err(Error::InvalidInput("the modulus c must be nonzero".into()));
    }
    let p = c.p();
    let c0 = c.monic();
    let lc_inv = c.field().inv(c.lc()).expect("nonzero");
    let ring = ResidueRing::new(&c0)?;
    let mut z = ZetaSum::new(p);
    for x in ring.units() {
        let xb = ring.inv(&x).unwrap_or_else(|| Poly::zero(p));
        let sign = if theta == 1 { jacobi(&x, &c0) } else { 1 };
        let v = (&(m * &x) + &(n * &xb)).scale(lc_inv);
        z.add(ring.psi_exponent(&v), sign as i128);
    }
    Ok(z.value())
}

/// Compare `|Σ|` with `τ(c)|c|^{1/2}|gcd(m, n, c)|^{1/2}`.
pub fn weil_check(m: &Poly, n: &Poly, c: &Poly, theta: u8) -> Result<WeilCheck> {
    let value = kloosterman_salie(m, n, c, theta)?;
    let q = c.p() as f64;
    let h = m.gcd(n).gcd(c);
    let bound = divisor_count(&c.monic()) as f64 * q.powf(c.deg() as f64 / 2.0) * q.powf(h.deg() as f64 / 2.0);
    let magnitude = value.abs();
    Ok(WeilCheck { pass: magnitude <= bound + 1e-9, value, magnitude, bound })
}

/// One Weil-scan line with the CSV columns of the scan schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: u32,
    pub d: usize,
    pub deg_g: i64,
    pub deg_r: i64,
    pub c_tag: String,
    pub value_re: f64,
    pub value_im: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Every `(m, n, c)` with degrees `≤ deg` and both `θ`.
pub fn weil_scan(p: u32, deg: usize) -> Result<Vec<ScanRow>> {
    let polys: Vec<Poly> = enumerate(p, deg, false).collect();
    let mut rows = Vec::new();
    for c in polys.iter().filter(|c| !c.is_zero()) {
        for m in &polys {
            for n in &polys {
                for theta in [0u8, 1] {
                    let w = weil_check(m, n, c, theta)?;
                    let (re, im) = w.value.to_complex();
                    rows.push(ScanRow {
                        q: p,
                        d: theta as usize,
                        deg_g: 0,
                        deg_r: c.deg(),
                        c_tag: format!("m={m};n={n};c={c};theta={theta}"),
                        value_re: re,
                        value_im: im,
                        bound: w.bound,
                        pass: w.pass,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `|S₁|` against `τ(r₁)|r₁|^{(d+1)/2}|gcd(r₁, f)|^{1/2}` and `|S₂|` against
/// the shape `|g|^d|r₂|^{d/2+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub r: String,
    pub r1: String,
    pub r2: String,
    pub s1_abs: f64,
    pub s1_bound: f64,
    pub s1_pass: bool,
    pub s2_abs: f64,
    pub s2_ratio: f64,
}

pub fn split_bounds(inst: &Instance, r: &Poly, c: &[Poly]) -> Result<SplitBounds> {
    let s = s_factored(inst, r, c)?;
    let q = inst.p() as f64;
    let d = inst.dim() as f64;
    let n1 = s.r1.deg() as f64;
    let h = s.r1.monic().gcd(&inst.f).deg() as f64;
    let s1_bound = divisor_count(&s.r1.monic()) as f64 * q.powf(n1 * (d + 1.0) / 2.0) * q.powf(h / 2.0);
    let s1_abs = s.s1.abs();
    let s2_shape = q.powf(inst.g.deg() as f64 * d) * q.powf(s.r2.deg() as f64 * (d / 2.0 + 1.0));
    Ok(SplitBounds {
        r: r.to_string(),
        r1: s.r1.to_string(),
        r2: s.r2.to_string(),
        s1_pass: s1_abs <= s1_bound + 1e-9,
        s1_abs,
        s1_bound,
        s2_abs: s.s2.abs(),
        s2_ratio: s.s2.abs() / s2_shape,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub x: i64,
    pub l: f64,
    pub terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageScan {
    pub rows: Vec<AverageRow>,
    /// Least-squares slope of `log_q L(X)` against `X`.
    pub exponent: Option<f64>,
}

/// `L(X) = Σ_{r monic, deg r ≤ X} |g|^{-d}|r|^{-(d+1)/2}|S_{g,r}(c)|` for
/// `X = 0, …, x_deg`.
pub fn average_scan(inst: &Instance, c: &[Poly], x_deg: usize) -> Result<AverageScan> {
    let q = inst.p() as f64;
    let d = inst.dim() as f64;
    let gq = q.powf(inst.g.deg() as f64 * d);
    let mut rows = Vec::new();
    let mut acc = 0.0;
    let mut terms = 0;
    for x in 0..=x_deg {
        for r in crate::polyring::monic_of_degree(inst.p(), x) {
            let s = s_best(inst, &r, c)?;
            acc += s.abs() / gq / q.powf(x as f64 * (d + 1.0) / 2.0);
            terms += 1;
        }
        rows.push(AverageRow { x: x as i64, l: acc, terms });
    }
    let exponent = log_slope(q, rows.iter().map(|r| (r.x as f64, r.l)));
    Ok(AverageScan { rows, exponent })
}

/// Least-squares slope of `log_q y` against `x`, skipping nonpositive `y`.
pub(crate) fn log_slope(q: f64, pts: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pts.filter(|p| p.1 > 0.0).map(|(x, y)| (x, y.ln() / q.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `S_{g,r}(c)` by the cheapest exact route available for the form.
pub fn s_best(inst: &Instance, r: &Poly, c: &[Poly]) -> Result<ScaledCyclotomic> {
    if inst.form.is_diagonal() {
        DiagonalSums::new(inst, r)?.eval(c)
    } else {
        s_full(inst, r, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: &str) -> Poly {
        Poly::parse(s, 3).unwrap()
    }

    fn four_squares(g: &str, lambda: [&str; 4], f: &str) -> Instance {
        Instance::new(QuadForm::sum_of_squares(3, 4).unwrap(), pp(f), pp(g), lambda.iter().map(|s| pp(s)).collect())
            .unwrap()
    }

    #[test]
    fn trivial_sums() {
        let inst = four_squares("1", ["0"; 4], "1");
        let zero = vec![pp("0"); 4];
        assert_eq!(s_al(&inst, &pp("1"), &pp("0"), &pp("0"), &zero).unwrap(), ScaledCyclotomic::one(3));
        assert_eq!(split_r(&pp("t+1"), &pp("t"), &pp("1")), (pp("t+1"), pp("1")));
        assert_eq!(split_r(&pp("t^3+t^2"), &pp("t"), &pp("1")), (pp("t+1"), pp("t^2")));
        assert_eq!(split_r(&pp("1"), &pp("t"), &pp("1")), (pp("1"), pp("1")));
    }

    #[test]
    fn weil_examples() {
        let w = weil_check(&pp("1"), &pp("1"), &pp("t"), 0).unwrap();
        assert_eq!(w.value, ScaledCyclotomic::from_int(3, -1));
        assert!((w.bound - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!(w.pass);
        assert!(weil_check(&pp("t"), &pp("0"), &pp("t^2"), 0).unwrap().pass);
    }
}
