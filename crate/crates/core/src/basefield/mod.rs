//! The prime field `F_q` (`q = p` an odd prime), the additive character
//! `e_q(a) = ζ_p^a`, the quadratic character `χ`, and the classical character
//! sums over `F_q` as exact cyclotomic values.

mod cyclotomic;

pub use cyclotomic::{ScaledCyclotomic, ZetaSum};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of `F_q`, stored as its residue in `[0, p)`.
pub type FqElem = u32;

/// The prime field `F_p` for an odd prime `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fq {
    p: u32,
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Fq {
    pub fn new(p: u32) -> Result<Self> {
        if p == 2 || !is_prime(p) || p > 65_521 {
            return Err(Error::InvalidInput(format!("q = {p} must be an odd prime below 2^16")));
        }
        Ok(Fq { p })
    }

    /// Field for a `p` already known to be an odd prime.
    #[inline]
    pub(crate) const fn unchecked(p: u32) -> Self {
        Fq { p }
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn reduce(&self, a: i64) -> FqElem {
        a.rem_euclid(self.p as i64) as u32
    }

    #[inline]
    pub fn add(&self, a: FqElem, b: FqElem) -> FqElem {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: FqElem, b: FqElem) -> FqElem {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: FqElem) -> FqElem {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: FqElem, b: FqElem) -> FqElem {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow(&self, a: FqElem, mut e: u64) -> FqElem {
        let mut base = a % self.p;
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: FqElem) -> Option<FqElem> {
        if a % self.p == 0 {
            None
        } else {
            Some(self.pow(a, self.p as u64 - 2))
        }
    }

    /// The quadratic character: 0 at 0, otherwise ±1 by Euler's criterion.
    pub fn chi(&self, a: FqElem) -> i8 {
        let a = a % self.p;
        if a == 0 {
            return 0;
        }
        if self.pow(a, (self.p as u64 - 1) / 2) == 1 {
            1
        } else {
            -1
        }
    }

    /// The canonical square root (the smaller of the two representatives).
    pub fn sqrt(&self, a: FqElem) -> Option<FqElem> {
        let a = a % self.p;
        if a == 0 {
            return Some(0);
        }
        if self.chi(a) != 1 {
            return None;
        }
        (1..self.p).find(|&x| self.mul(x, x) == a).map(|x| x.min(self.p - x))
    }

    /// The smallest quadratic non-residue.
    pub fn non_residue(&self) -> FqElem {
        (2..self.p).find(|&a| self.chi(a) == -1).expect("odd prime has a non-residue")
    }

    pub fn elements(&self) -> impl Iterator<Item = FqElem> {
        0..self.p
    }

    pub fn units(&self) -> impl Iterator<Item = FqElem> {
        1..self.p
    }

    /// `e_q(a) = ζ_p^a`.
    pub fn eq_char(&self, a: FqElem) -> ScaledCyclotomic {
        ScaledCyclotomic::zeta(self.p, a as u64)
    }

    /// `G(a) = Σ_x e_q(a x²)`.
    pub fn gauss_sum_fq(&self, a: FqElem) -> Result<ScaledCyclotomic> {
        if a % self.p == 0 {
            return Err(Error::InvalidInput("gauss sum needs a nonzero argument".into()));
        }
        let mut acc = ZetaSum::new(self.p);
        for x in self.elements() {
            acc.add(self.mul(a, self.mul(x, x)), 1);
        }
        Ok(acc.value())
    }

    /// `Kl(α) = Σ_{x ≠ 0} e_q(x + α/x)`.
    pub fn kloosterman_fq(&self, alpha: FqElem) -> Result<ScaledCyclotomic> {
        self.twisted_kloosterman(alpha, false)
    }

    /// `Sa(α) = Σ_{x ≠ 0} χ(x) e_q(x + α/x)`.
    pub fn salie_fq(&self, alpha: FqElem) -> Result<ScaledCyclotomic> {
        self.twisted_kloosterman(alpha, true)
    }

    fn twisted_kloosterman(&self, alpha: FqElem, twist: bool) -> Result<ScaledCyclotomic> {
        if alpha % self.p == 0 {
            return Err(Error::InvalidInput("Kloosterman/Salie sums need a nonzero argument".into()));
        }
        let mut acc = ZetaSum::new(self.p);
        for x in self.units() {
            let xi = self.inv(x).expect("unit");
            let w = if twist { self.chi(x) as i128 } else { 1 };
            acc.add(self.add(x, self.mul(alpha, xi)), w);
        }
        Ok(acc.value())
    }

    /// `τ_ψ = Σ_a χ(a) e_q(a)`.
    pub fn tau_psi(&self) -> ScaledCyclotomic {
        let mut acc = ZetaSum::new(self.p);
        for a in self.units() {
            acc.add(a, self.chi(a) as i128);
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        let f3 = Fq::new(3).unwrap();
        assert_eq!(f3.eq_char(0), ScaledCyclotomic::one(3));
        assert_eq!(f3.eq_char(1).coeffs(), &[1, 0]);
        assert_eq!(f3.eq_char(2).coeffs(), &[0, 1]);
        // 1 + 2ζ = -ζ - ζ² + 2ζ = ζ - ζ²
        assert_eq!(f3.gauss_sum_fq(1).unwrap().coeffs(), &[1, -1]);
        assert_eq!(f3.kloosterman_fq(1).unwrap(), ScaledCyclotomic::from_int(3, -1));
        assert_eq!(f3.salie_fq(1).unwrap().coeffs(), &[-1, 1]);
        assert_eq!(f3.tau_psi(), f3.gauss_sum_fq(1).unwrap());
        assert!(f3.salie_fq(0).is_err());
        assert!(Fq::new(9).is_err());
        assert!(Fq::new(2).is_err());
    }

    #[test]
    fn half_exponent_normalization() {
        let z = ScaledCyclotomic::from_int(3, 9);
        assert_eq!(z.to_rational(), Some((1, -4)));
        let g = Fq::new(5).unwrap().gauss_sum_fq(1).unwrap();
        // For p = 5 the Gauss sum is √5 and is stored as 5^{-(-1)/2}.
        assert_eq!(g, ScaledCyclotomic::one(5).scale(-1));
    }
}
