//! The polynomial ring `O = F_q[t]`: arithmetic, gcd and CRT, factorization
//! at small degree, residue rings `O/(m)` and enumeration helpers.

mod residue;

pub use residue::{ResidueRing, RingTables, TABLE_LIMIT};

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::basefield::{Fq, FqElem};
use crate::error::{Error, Result};

/// Degree of the zero polynomial. Chosen so that sums of a few degrees cannot
/// overflow while still comparing below every real degree.
pub const DEG_NEG_INF: i64 = i64::MIN / 8;

/// A polynomial over `F_p`, coefficients stored lowest degree first with no
/// trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly {
    p: u32,
    c: Vec<u32>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({})", self)
    }
}

impl Poly {
    pub fn new(p: u32, mut c: Vec<u32>) -> Self {
        for x in c.iter_mut() {
            *x %= p;
        }
        while c.last() == Some(&0) {
            c.pop();
        }
        Poly { p, c }
    }

    pub fn from_i64(p: u32, c: &[i64]) -> Self {
        Self::new(p, c.iter().map(|&x| x.rem_euclid(p as i64) as u32).collect())
    }

    pub fn zero(p: u32) -> Self {
        Poly { p, c: Vec::new() }
    }

    pub fn one(p: u32) -> Self {
        Self::constant(p, 1)
    }

    pub fn constant(p: u32, a: FqElem) -> Self {
        Self::new(p, vec![a])
    }

    /// The variable `t`.
    pub fn t(p: u32) -> Self {
        Self::monomial(p, 1, 1)
    }

    /// `a t^k`.
    pub fn monomial(p: u32, a: FqElem, k: usize) -> Self {
        let mut c = vec![0; k + 1];
        c[k] = a % p;
        Self::new(p, c)
    }

    /// The polynomial of degree `< n` whose coefficients are the base-`p`
    /// digits of `idx` (constant term first).
    pub fn from_index(p: u32, mut idx: u64, n: usize) -> Self {
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            c.push((idx % p as u64) as u32);
            idx /= p as u64;
        }
        Self::new(p, c)
    }

    /// Inverse of [`Poly::from_index`] for polynomials of degree `< n`.
    pub fn to_index(&self) -> u64 {
        let mut idx = 0u64;
        for &x in self.c.iter().rev() {
            idx = idx * self.p as u64 + x as u64;
        }
        idx
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn field(&self) -> Fq {
        Fq::unchecked(self.p)
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> u32 {
        self.c.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.c == [1]
    }

    pub fn is_constant(&self) -> bool {
        self.c.len() <= 1
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    /// Degree with [`DEG_NEG_INF`] for zero; `|f| = q^{deg f}`.
    pub fn deg(&self) -> i64 {
        match self.degree() {
            Some(d) => d as i64,
            None => DEG_NEG_INF,
        }
    }

    pub fn lc(&self) -> u32 {
        self.c.last().copied().unwrap_or(0)
    }

    pub fn is_monic(&self) -> bool {
        self.lc() == 1
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let inv = self.field().inv(self.lc()).expect("nonzero leading coefficient");
        self.scale(inv)
    }

    pub fn scale(&self, a: FqElem) -> Self {
        let fq = self.field();
        Self::new(self.p, self.c.iter().map(|&x| fq.mul(x, a)).collect())
    }

    /// Multiply by `t^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut c = vec![0; k];
        c.extend_from_slice(&self.c);
        Poly { p: self.p, c }
    }

    /// Drop the terms of degree `< k` and divide by `t^k`.
    pub fn shift_down(&self, k: usize) -> Self {
        if k >= self.c.len() {
            return Self::zero(self.p);
        }
        Poly { p: self.p, c: self.c[k..].to_vec() }
    }

    /// The terms of degree `< k`.
    pub fn truncate(&self, k: usize) -> Self {
        Self::new(self.p, self.c.iter().take(k).copied().collect())
    }

    pub fn eval(&self, x: FqElem) -> FqElem {
        let fq = self.field();
        self.c.iter().rev().fold(0, |acc, &a| fq.add(fq.mul(acc, x), a))
    }

    pub fn derivative(&self) -> Self {
        let fq = self.field();
        Self::new(
            self.p,
            self.c.iter().enumerate().skip(1).map(|(i, &a)| fq.mul(a, (i as u64 % self.p as u64) as u32)).collect(),
        )
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.p);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let fq = self.field();
        if self.c.len() < d.c.len() {
            return (Self::zero(self.p), self.clone());
        }
        let inv = fq.inv(d.lc()).expect("nonzero leading coefficient");
        let mut r = self.c.clone();
        let dn = d.c.len() - 1;
        let mut q = vec![0u32; r.len() - dn];
        for i in (0..q.len()).rev() {
            let coef = fq.mul(r[i + dn], inv);
            q[i] = coef;
            if coef != 0 {
                for (j, &dj) in d.c.iter().enumerate() {
                    r[i + j] = fq.sub(r[i + j], fq.mul(coef, dj));
                }
            }
        }
        (Self::new(self.p, q), Self::new(self.p, r))
    }

    pub fn rem(&self, d: &Poly) -> Poly {
        self.divrem(d).1
    }

    /// `self / d` if the division is exact.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        let (q, r) = self.divrem(d);
        if r.is_zero() {
            Some(q)
        } else {
            None
        }
    }

    pub fn divides(&self, other: &Poly) -> bool {
        if self.is_zero() {
            return other.is_zero();
        }
        other.rem(self).is_zero()
    }

    pub fn powmod(&self, mut e: u64, m: &Poly) -> Poly {
        let mut base = self.rem(m);
        let mut acc = Self::one(self.p).rem(m);
        while e > 0 {
            if e & 1 == 1 {
                acc = (&acc * &base).rem(m);
            }
            base = (&base * &base).rem(m);
            e >>= 1;
        }
        acc
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn is_coprime(&self, other: &Poly) -> bool {
        self.gcd(other).is_one()
    }

    /// Inverse modulo `m`, if it exists.
    pub fn inv_mod(&self, m: &Poly) -> Option<Poly> {
        let (g, u, _) = xgcd(self, m).ok()?;
        if g.is_one() {
            Some(u.rem(m))
        } else {
            None
        }
    }

    /// Parse the literal grammar `c*t^k + ...` over `F_p`.
    pub fn parse(s: &str, p: u32) -> Result<Poly> {
        let terms = parse_terms(s, p)?;
        let mut c: Vec<u32> = Vec::new();
        for (coef, k) in terms {
            if k < 0 {
                return Err(Error::Parse(format!("negative exponent in polynomial literal {s:?}")));
            }
            let k = k as usize;
            if c.len() <= k {
                c.resize(k + 1, 0);
            }
            c[k] = (c[k] + coef) % p;
        }
        Ok(Poly::new(p, c))
    }
}

/// Parse a sum of `c*t^k` terms; exponents may be negative. Returns
/// `(coefficient mod p, exponent)` pairs.
pub(crate) fn parse_terms(s: &str, p: u32) -> Result<Vec<(u32, i64)>> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse("empty polynomial literal".into()));
    }
    let bad = |what: &str| Error::Parse(format!("{what} in literal {s:?}"));
    let mut out = Vec::new();
    for term in s.split('+') {
        if term.is_empty() {
            return Err(bad("empty term"));
        }
        let (coef_str, var_str) = match term.find('t') {
            None => (term, None),
            Some(pos) => {
                let head = &term[..pos];
                let coef = if head.is_empty() {
                    "1"
                } else {
                    head.strip_suffix('*').ok_or_else(|| bad("missing '*'"))?
                };
                (coef, Some(&term[pos + 1..]))
            }
        };
        let coef: u64 = coef_str.parse().map_err(|_| bad("bad coefficient"))?;
        if coef >= p as u64 {
            return Err(bad("coefficient out of range 0..p-1"));
        }
        let k: i64 = match var_str {
            None => 0,
            Some("") => 1,
            Some(rest) => {
                let e = rest.strip_prefix('^').ok_or_else(|| bad("expected '^'"))?;
                e.parse().map_err(|_| bad("bad exponent"))?
            }
        };
        out.push((coef as u32, k));
    }
    Ok(out)
}

/// Print one term of the literal grammar.
pub(crate) fn format_term(f: &mut fmt::Formatter<'_>, coef: u32, k: i64) -> fmt::Result {
    match (k, coef) {
        (0, c) => write!(f, "{c}"),
        (1, 1) => write!(f, "t"),
        (1, c) => write!(f, "{c}*t"),
        (k, 1) => write!(f, "t^{k}"),
        (k, c) => write!(f, "{c}*t^{k}"),
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.c.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            format_term(f, c, k as i64)?;
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        debug_assert_eq!(self.p, o.p);
        let n = self.c.len().max(o.c.len());
        let p = self.p;
        let c = (0..n)
            .map(|i| {
                let s = self.coeff(i) + o.coeff(i);
                if s >= p {
                    s - p
                } else {
                    s
                }
            })
            .collect();
        Poly::new(p, c)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        let p = self.p;
        Poly { p, c: self.c.iter().map(|&x| if x == 0 { 0 } else { p - x }).collect() }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        debug_assert_eq!(self.p, o.p);
        if self.is_zero() || o.is_zero() {
            return Poly::zero(self.p);
        }
        let p = self.p as u64;
        let mut acc = vec![0u64; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate() {
                acc[i + j] += a as u64 * b as u64;
            }
            if i % 1024 == 1023 {
                for x in acc.iter_mut() {
                    *x %= p;
                }
            }
        }
        Poly::new(self.p, acc.into_iter().map(|x| (x % p) as u32).collect())
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, o: Poly) -> Poly {
                (&self).$m(&o)
            }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $m(self, o: &Poly) -> Poly {
                (&self).$m(o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

/// Extended Euclid: `(g, u, v)` with `g = u a + v b` monic.
pub fn xgcd(a: &Poly, b: &Poly) -> Result<(Poly, Poly, Poly)> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::InvalidInput("xgcd(0, 0) is undefined".into()));
    }
    let p = a.p;
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (Poly::one(p), Poly::zero(p));
    let (mut t0, mut t1) = (Poly::zero(p), Poly::one(p));
    while !r1.is_zero() {
        let (q, r) = r0.divrem(&r1);
        r0 = std::mem::replace(&mut r1, r);
        let s = &s0 - &(&q * &s1);
        s0 = std::mem::replace(&mut s1, s);
        let t = &t0 - &(&q * &t1);
        t0 = std::mem::replace(&mut t1, t);
    }
    let inv = a.field().inv(r0.lc()).expect("nonzero gcd");
    Ok((r0.scale(inv), s0.scale(inv), t0.scale(inv)))
}

/// Chinese remaindering for pairwise coprime moduli.
pub fn crt(residues: &[(Poly, Poly)]) -> Result<Poly> {
    let p = match residues.first() {
        Some((v, _)) => v.p,
        None => return Err(Error::InvalidInput("crt needs at least one congruence".into())),
    };
    let mut x = Poly::zero(p);
    let mut m = Poly::one(p);
    for (v, mi) in residues {
        if mi.is_zero() {
            return Err(Error::InvalidInput("crt modulus is zero".into()));
        }
        let (g, u, _) = xgcd(&m, mi)?;
        if !g.is_one() {
            return Err(Error::NotCoprime(format!("crt moduli {m} and {mi} share the factor {g}")));
        }
        // x' = x + m·u·(v - x) satisfies x' ≡ x mod m and x' ≡ v mod mi.
        let diff = (v - &x).rem(mi);
        let lifted = &x + &(&m * &(&u * &diff).rem(mi));
        m = &m * mi;
        x = lifted.rem(&m);
    }
    Ok(x)
}

/// All monic polynomials of degree exactly `n`, in index order.
pub fn monic_of_degree(p: u32, n: usize) -> impl Iterator<Item = Poly> {
    let count = (p as u64).pow(n as u32);
    (0..count).map(move |i| {
        let mut c = Poly::from_index(p, i, n).c;
        c.resize(n, 0);
        c.push(1);
        Poly { p, c }
    })
}

/// Every polynomial of degree `≤ deg_bound` (or every monic one) exactly once.
pub fn enumerate(p: u32, deg_bound: usize, monic_only: bool) -> Box<dyn Iterator<Item = Poly>> {
    if monic_only {
        Box::new((0..=deg_bound).flat_map(move |n| monic_of_degree(p, n)))
    } else {
        let count = (p as u64).pow(deg_bound as u32 + 1);
        Box::new((0..count).map(move |i| Poly::from_index(p, i, deg_bound + 1)))
    }
}

/// Irreducibility by trial division against every monic of degree `≤ n/2`.
pub fn is_irreducible(f: &Poly) -> bool {
    let n = match f.degree() {
        Some(n) if n >= 1 => n,
        _ => return false,
    };
    for d in 1..=n / 2 {
        for g in monic_of_degree(f.p, d) {
            if f.rem(&g).is_zero() {
                return false;
            }
        }
    }
    true
}

/// Monic irreducibles of degree exactly `n`.
pub fn irreducibles_of_degree(p: u32, n: usize) -> Vec<Poly> {
    monic_of_degree(p, n).filter(is_irreducible).collect()
}

/// Factorization into monic irreducibles with multiplicities, by trial
/// division in increasing degree. The leading coefficient is dropped.
pub fn factor(f: &Poly) -> Vec<(Poly, u32)> {
    assert!(!f.is_zero(), "factor of the zero polynomial");
    let mut rest = f.monic();
    let mut out = Vec::new();
    let mut d = 1;
    while rest.deg() >= 2 * d as i64 {
        for g in monic_of_degree(f.p, d) {
            let mut mult = 0;
            while let Some(q) = rest.exact_div(&g) {
                rest = q;
                mult += 1;
            }
            if mult > 0 {
                out.push((g, mult));
            }
        }
        d += 1;
    }
    if rest.deg() >= 1 {
        // What remains has no factor of degree ≤ deg/2, so it is irreducible.
        match out.iter_mut().find(|(g, _)| *g == rest) {
            Some(entry) => entry.1 += 1,
            None => out.push((rest, 1)),
        }
    }
    out.sort();
    out
}

/// The "factorial" `(N)!`: the product of all monic polynomials of degree `≤ N`.
pub fn poly_factorial(p: u32, n: usize) -> Poly {
    enumerate(p, n, true).fold(Poly::one(p), |acc, r| &acc * &r)
}

/// Number of monic divisors of `r`.
pub fn divisor_count(r: &Poly) -> u64 {
    factor(r).iter().map(|(_, m)| *m as u64 + 1).product()
}

/// All monic divisors of `r`, sorted by degree then index.
pub fn monic_divisors(r: &Poly) -> Vec<Poly> {
    let mut divs = vec![Poly::one(r.p)];
    for (g, m) in factor(r) {
        let mut next = Vec::new();
        for d in &divs {
            let mut x = d.clone();
            next.push(x.clone());
            for _ in 0..m {
                x = &x * &g;
                next.push(x.clone());
            }
        }
        divs = next;
    }
    divs.sort_by_key(|d| (d.deg(), d.to_index()));
    divs
}

/// Exponent of the prime `w` in `r` (`r ≠ 0`).
pub fn valuation(r: &Poly, w: &Poly) -> u32 {
    let mut v = 0;
    let mut x = r.clone();
    while let Some(q) = x.exact_div(w) {
        x = q;
        v += 1;
    }
    v
}

/// Euler totient `|(O/r)^×|`.
pub fn totient(r: &Poly) -> u64 {
    let q = r.p as u64;
    factor(r)
        .iter()
        .map(|(g, m)| {
            let n = q.pow(g.deg() as u32);
            (n - 1) * n.pow(m - 1)
        })
        .product()
}
