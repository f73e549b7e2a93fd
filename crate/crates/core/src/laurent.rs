//! Truncated Laurent series in `1/t`, i.e. elements of `K_∞ = F_q((1/t))`
//! known on a finite window of exponents.
//!
//! Every value carries an explicit precision: the coefficients of `t^j` for
//! `j ≥ floor` are known, and the ones below are either known to vanish
//! (`exact`) or unknown. Reading an unknown coefficient is an error.

use std::fmt;

use crate::basefield::{Fq, FqElem, ScaledCyclotomic};
use crate::error::{Error, Result};
use crate::polyring::{format_term, parse_terms, Poly, DEG_NEG_INF};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruncLaurent {
    p: u32,
    /// Lowest tracked exponent.
    floor: i64,
    /// `coeffs[i]` is the coefficient of `t^{floor + i}`; no trailing zeros.
    coeffs: Vec<u32>,
    /// When true every coefficient below `floor` is zero.
    exact: bool,
}

impl fmt::Debug for TruncLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncLaurent({self})")
    }
}

impl TruncLaurent {
    fn build(p: u32, floor: i64, mut coeffs: Vec<u32>, exact: bool) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        let mut x = TruncLaurent { p, floor, coeffs, exact };
        if exact {
            let lead_zeros = x.coeffs.iter().take_while(|&&c| c == 0).count();
            if lead_zeros == x.coeffs.len() {
                x.floor = 0;
                x.coeffs.clear();
            } else {
                x.coeffs.drain(..lead_zeros);
                x.floor += lead_zeros as i64;
            }
        }
        x
    }

    /// Exact zero.
    pub fn zero(p: u32) -> Self {
        Self::build(p, 0, Vec::new(), true)
    }

    pub fn one(p: u32) -> Self {
        Self::monomial(p, 1, 0)
    }

    /// Exact `a t^k`.
    pub fn monomial(p: u32, a: FqElem, k: i64) -> Self {
        Self::build(p, k, vec![a % p], true)
    }

    /// Exact image of a polynomial.
    pub fn from_poly(f: &Poly) -> Self {
        Self::build(f.p(), 0, f.coeffs().to_vec(), true)
    }

    /// A value from `(coefficient, exponent)` terms, exact when `floor` is
    /// `None`, otherwise known modulo `t^floor`. Terms below the floor are an
    /// error.
    pub fn from_terms(p: u32, terms: &[(FqElem, i64)], floor: Option<i64>) -> Result<Self> {
        let lo = match floor {
            Some(f) => {
                if let Some(&(_, k)) = terms.iter().find(|&&(c, k)| k < f && c % p != 0) {
                    return Err(Error::InvalidInput(format!("term t^{k} lies below the floor {f}")));
                }
                f
            }
            None => terms.iter().map(|&(_, k)| k).min().unwrap_or(0),
        };
        let hi = terms.iter().map(|&(_, k)| k).max().unwrap_or(lo).max(lo);
        let mut coeffs = vec![0u32; (hi - lo + 1) as usize];
        for &(c, k) in terms {
            if k >= lo {
                let i = (k - lo) as usize;
                coeffs[i] = (coeffs[i] + c) % p;
            }
        }
        Ok(Self::build(p, lo, coeffs, floor.is_none()))
    }

    /// The element `Σ_{j} digits[j] t^{top - j}` as an exact value.
    pub fn from_desc_digits(p: u32, top: i64, digits: &[u32]) -> Self {
        let floor = top - digits.len() as i64 + 1;
        let coeffs: Vec<u32> = digits.iter().rev().copied().collect();
        Self::build(p, floor, coeffs, true)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn field(&self) -> Fq {
        Fq::unchecked(self.p)
    }

    pub fn floor(&self) -> i64 {
        self.floor
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Highest tracked exponent with a nonzero coefficient.
    pub fn top(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.floor + self.coeffs.len() as i64 - 1)
        }
    }

    /// Coefficient of `t^i`; errors when it is not tracked.
    pub fn coeff(&self, i: i64) -> Result<u32> {
        if i < self.floor {
            if self.exact {
                return Ok(0);
            }
            return Err(Error::Precision(format!(
                "coefficient of t^{i} requested but the value is only known down to t^{}",
                self.floor
            )));
        }
        Ok(self.coeffs.get((i - self.floor) as usize).copied().unwrap_or(0))
    }

    /// True for an exact zero.
    pub fn is_zero(&self) -> bool {
        self.exact && self.coeffs.is_empty()
    }

    /// True when no tracked coefficient is nonzero (the value lies in
    /// `|x| < q^floor` if inexact).
    pub fn is_zero_to_precision(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `deg x`, so that `|x| = q^{deg x}`: [`DEG_NEG_INF`] for an exact zero,
    /// an error when no tracked coefficient is nonzero.
    pub fn deg(&self) -> Result<i64> {
        match self.top() {
            Some(d) => Ok(d),
            None if self.exact => Ok(DEG_NEG_INF),
            None => Err(Error::Precision(format!("value is zero to precision t^{}; its norm is unknown", self.floor))),
        }
    }

    /// An upper bound `D` with `|x| ≤ q^D`, valid even without knowing the
    /// leading term.
    pub fn deg_upper(&self) -> i64 {
        match self.top() {
            Some(d) => d,
            None if self.exact => DEG_NEG_INF,
            None => self.floor - 1,
        }
    }

    /// Leading coefficient (0 when unknown or zero).
    pub fn lc(&self) -> u32 {
        self.coeffs.last().copied().unwrap_or(0)
    }

    /// Forget every coefficient below `t^floor`.
    pub fn truncate(&self, floor: i64) -> Self {
        if floor <= self.floor {
            // Nothing to forget; an exact value stays exact.
            return self.clone();
        }
        let skip = (floor - self.floor) as usize;
        let coeffs = self.coeffs.iter().skip(skip).copied().collect();
        Self::build(self.p, floor, coeffs, false)
    }

    /// Multiply by `t^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self::build(self.p, self.floor + k, self.coeffs.clone(), self.exact)
    }

    /// Multiply by a constant of `F_q`.
    pub fn scale(&self, a: FqElem) -> Self {
        let fq = self.field();
        if a % self.p == 0 && self.exact {
            return Self::zero(self.p);
        }
        Self::build(self.p, self.floor, self.coeffs.iter().map(|&c| fq.mul(c, a)).collect(), self.exact)
    }

    pub fn neg(&self) -> Self {
        self.scale(self.p - 1)
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        let exact = self.exact && o.exact;
        let floor = match (self.exact, o.exact) {
            (true, true) => self.floor.min(o.floor),
            (true, false) => o.floor,
            (false, true) => self.floor,
            (false, false) => self.floor.max(o.floor),
        };
        let top = self.top().unwrap_or(floor).max(o.top().unwrap_or(floor)).max(floor);
        let fq = self.field();
        let coeffs = (floor..=top)
            .map(|i| {
                let a = if i >= self.floor { self.coeffs.get((i - self.floor) as usize).copied().unwrap_or(0) } else { 0 };
                let b = if i >= o.floor { o.coeffs.get((i - o.floor) as usize).copied().unwrap_or(0) } else { 0 };
                fq.add(a, b)
            })
            .collect();
        Self::build(self.p, floor, coeffs, exact)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        if self.is_zero() || o.is_zero() {
            return Self::zero(self.p);
        }
        let exact = self.exact && o.exact;
        let floor = if exact {
            self.floor + o.floor
        } else {
            let mut f = i64::MIN;
            if !self.exact {
                f = f.max(self.floor + o.deg_upper());
            }
            if !o.exact {
                f = f.max(o.floor + self.deg_upper());
            }
            f
        };
        let base = self.floor + o.floor;
        let p = self.p as u64;
        let len = self.coeffs.len() + o.coeffs.len();
        if len < 2 {
            return Self::build(self.p, floor, Vec::new(), exact);
        }
        // Only coefficients at or above the result floor are needed.
        let lo = (floor - base).max(0) as usize;
        if lo >= len - 1 {
            return Self::build(self.p, floor, Vec::new(), exact);
        }
        let mut acc = vec![0u64; len - 1 - lo];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let jstart = lo.saturating_sub(i);
            for (j, &b) in o.coeffs.iter().enumerate().skip(jstart) {
                acc[i + j - lo] += a as u64 * b as u64;
            }
        }
        let coeffs = acc.into_iter().map(|x| (x % p) as u32).collect();
        let prod = Self::build(self.p, base + lo as i64, coeffs, exact);
        if exact {
            prod
        } else {
            prod.pad_to_floor(floor)
        }
    }

    /// Inexact copy whose floor is exactly `floor`, assuming every coefficient
    /// between `floor` and the current floor is known to be zero.
    fn pad_to_floor(&self, floor: i64) -> Self {
        if floor >= self.floor {
            return self.truncate(floor);
        }
        let mut coeffs = vec![0u32; (self.floor - floor) as usize];
        coeffs.extend_from_slice(&self.coeffs);
        Self::build(self.p, floor, coeffs, false)
    }

    fn leading(&self, what: &str) -> Result<(i64, u32)> {
        match self.top() {
            Some(d) => Ok((d, self.lc())),
            None => Err(Error::Precision(format!("{what}: leading coefficient is not known"))),
        }
    }

    /// `1/x`, computed down to `t^out_floor` (or less if the input precision
    /// does not allow it).
    pub fn inv(&self, out_floor: i64) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InvalidInput("inverse of zero".into()));
        }
        let (d, ad) = self.leading("inverse")?;
        let fq = self.field();
        let inv_ad = fq.inv(ad).expect("nonzero");
        if self.exact && self.coeffs.len() == 1 {
            return Ok(Self::monomial(self.p, inv_ad, -d));
        }
        let floor = if self.exact { out_floor } else { out_floor.max(self.floor - 2 * d) };
        let n = (-d - floor + 1).max(0) as usize;
        // b_{-d-m} = -(1/a_d) Σ_{i=1}^{m} a_{d-i} b_{-d-m+i}
        let mut b = vec![0u32; n]; // b[m] = coefficient of t^{-d-m}
        let a = |j: i64| -> u32 {
            if j < self.floor {
                0
            } else {
                self.coeffs.get((j - self.floor) as usize).copied().unwrap_or(0)
            }
        };
        for m in 0..n {
            if m == 0 {
                b[0] = inv_ad;
                continue;
            }
            let mut s = 0u32;
            for i in 1..=m {
                s = fq.add(s, fq.mul(a(d - i as i64), b[m - i]));
            }
            b[m] = fq.mul(fq.neg(s), inv_ad);
        }
        let coeffs: Vec<u32> = b.into_iter().rev().collect();
        Ok(Self::build(self.p, floor, coeffs, false))
    }

    /// `self / o` with the quotient known down to `t^out_floor` at best.
    pub fn div(&self, o: &Self, out_floor: i64) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::zero(self.p));
        }
        let need = out_floor - self.deg_upper();
        let inv = o.inv(need - 1)?;
        let q = self.mul(&inv);
        Ok(if q.exact { q } else { q.truncate(out_floor) })
    }

    /// Square root with the canonical leading coefficient, down to `t^out_floor`.
    pub fn sqrt(&self, out_floor: i64) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::zero(self.p));
        }
        let (d, ad) = self.leading("sqrt")?;
        if d.rem_euclid(2) != 0 {
            return Err(Error::NotASquare(format!("{self} has odd degree {d}")));
        }
        let fq = self.field();
        let r0 = fq.sqrt(ad).ok_or_else(|| Error::NotASquare(format!("leading coefficient {ad} of {self} is not a square")))?;
        let h = d / 2;
        let floor = if self.exact { out_floor } else { out_floor.max(self.floor - h) };
        let n = (h - floor + 1).max(0) as usize;
        let inv2r0 = fq.inv(fq.mul(2, r0)).expect("odd characteristic");
        let a = |j: i64| -> u32 {
            if j < self.floor {
                0
            } else {
                self.coeffs.get((j - self.floor) as usize).copied().unwrap_or(0)
            }
        };
        let mut r = vec![0u32; n]; // r[m] = coefficient of t^{h-m}
        for m in 0..n {
            if m == 0 {
                r[0] = r0;
                continue;
            }
            let mut s = 0u32;
            for i in 1..m {
                s = fq.add(s, fq.mul(r[i], r[m - i]));
            }
            r[m] = fq.mul(fq.sub(a(d - m as i64), s), inv2r0);
        }
        let coeffs: Vec<u32> = r.into_iter().rev().collect();
        let approx = Self::build(self.p, floor, coeffs.clone(), true);
        if self.exact && approx.mul(&approx) == *self {
            return Ok(approx);
        }
        Ok(Self::build(self.p, floor, coeffs, false))
    }

    /// `((x))`: the part of `x` with negative exponents.
    pub fn frac_part(&self) -> Self {
        if self.floor >= 0 {
            return if self.exact { Self::zero(self.p) } else { Self::build(self.p, self.floor, Vec::new(), false) };
        }
        let keep = ((-self.floor) as usize).min(self.coeffs.len());
        Self::build(self.p, self.floor, self.coeffs[..keep].to_vec(), self.exact)
    }

    /// The polynomial part; needs every nonnegative coefficient.
    pub fn int_part(&self) -> Result<Poly> {
        if self.floor > 0 && !self.exact {
            return Err(Error::Precision(format!("integral part needs t^0 but the floor is {}", self.floor)));
        }
        let top = match self.top() {
            Some(t) if t >= 0 => t,
            _ => return Ok(Poly::zero(self.p)),
        };
        let c = (0..=top).map(|i| self.coeff(i).unwrap_or(0)).collect();
        Ok(Poly::new(self.p, c))
    }

    /// Exponent `a` with `ψ(x) = e_q(a)`, i.e. the coefficient of `t^{-1}`.
    pub fn psi_exponent(&self) -> Result<u32> {
        self.coeff(-1)
    }

    /// `ψ(x) = e_q(a_{-1})`.
    pub fn psi(&self) -> Result<ScaledCyclotomic> {
        Ok(ScaledCyclotomic::zeta(self.p, self.psi_exponent()? as u64))
    }

    /// The Gauss factor `𝒢(f) = ∫_𝕋 ψ(f u²) du`: `min(|f|^{-1/2}, 1)` for
    /// even degree, `|f|^{-1/2} ε_f` for odd positive degree, 1 otherwise.
    pub fn gauss_factor(&self) -> Result<ScaledCyclotomic> {
        let (d, lc) = self.leading("gauss factor")?;
        gauss_factor_from(self.p, d, lc)
    }

    /// Parse the literal grammar with optional negative exponents and a
    /// trailing `@floor=P` precision annotation.
    pub fn parse(s: &str, p: u32) -> Result<Self> {
        let (body, floor) = match s.split_once('@') {
            None => (s, None),
            Some((b, ann)) => {
                let ann = ann.trim();
                let v = ann
                    .strip_prefix("floor=")
                    .ok_or_else(|| Error::Parse(format!("expected @floor=P in {s:?}")))?
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("bad floor in {s:?}")))?;
                (b, Some(v))
            }
        };
        let terms = parse_terms(body, p)?;
        Self::from_terms(p, &terms, floor)
    }

    /// All values `Σ_{floor ≤ j ≤ top} a_j t^j` (exact), in index order.
    pub fn grid(p: u32, top: i64, floor: i64) -> impl Iterator<Item = TruncLaurent> {
        let n = (top - floor + 1).max(0) as u32;
        let count = (p as u64).pow(n);
        (0..count).map(move |idx| {
            let c = Poly::from_index(p, idx, n as usize);
            Self::build(p, floor, c.coeffs().to_vec(), true)
        })
    }
}

/// `𝒢` from the degree and leading coefficient alone.
pub fn gauss_factor_from(p: u32, d: i64, lc: u32) -> Result<ScaledCyclotomic> {
    if d.rem_euclid(2) == 0 {
        if d > 0 {
            Ok(ScaledCyclotomic::one(p).scale(d as i32))
        } else {
            Ok(ScaledCyclotomic::one(p))
        }
    } else if d >= 1 {
        let g = Fq::unchecked(p).gauss_sum_fq(lc)?;
        Ok(g.scale(d as i32 + 1))
    } else {
        Ok(ScaledCyclotomic::one(p))
    }
}

impl fmt::Display for TruncLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            format_term(f, c, self.floor + i as i64)?;
        }
        if first {
            write!(f, "0")?;
        }
        if !self.exact {
            write!(f, "@floor={}", self.floor)?;
        }
        Ok(())
    }
}

/// `max |x_i|` as an exponent, for vectors.
pub fn vec_deg_upper(v: &[TruncLaurent]) -> i64 {
    v.iter().map(|x| x.deg_upper()).max().unwrap_or(DEG_NEG_INF)
}
