use std::sync::OnceLock;

use super::Poly;
use crate::basefield::Fq;
use crate::error::{Error, Result};

/// Largest ring for which dense addition/multiplication tables are built.
pub const TABLE_LIMIT: usize = 2187;

/// The quotient `O/(m)`. Elements are canonical representatives of degree
/// `< deg m`, and are also addressed by the index given by their base-`p`
/// coefficient digits (constant term lowest). Enumeration order is index
/// order, i.e. lexicographic in coefficient order.
#[derive(Debug)]
pub struct ResidueRing {
    modulus: Poly,
    n: usize,
    size: usize,
    tables: OnceLock<Option<RingTables>>,
}

impl Clone for ResidueRing {
    fn clone(&self) -> Self {
        ResidueRing::new(&self.modulus).expect("already validated")
    }
}

/// Dense operation tables on element indices.
#[derive(Debug)]
pub struct RingTables {
    size: usize,
    add: Vec<u16>,
    mul: Vec<u16>,
    neg: Vec<u16>,
    top: Vec<u8>,
}

impl RingTables {
    #[inline]
    pub fn add(&self, x: usize, y: usize) -> usize {
        self.add[x * self.size + y] as usize
    }
    #[inline]
    pub fn mul(&self, x: usize, y: usize) -> usize {
        self.mul[x * self.size + y] as usize
    }
    #[inline]
    pub fn neg(&self, x: usize) -> usize {
        self.neg[x] as usize
    }
    #[inline]
    pub fn sub(&self, x: usize, y: usize) -> usize {
        self.add(x, self.neg(y))
    }
    /// Coefficient of `t^{n-1}` of the element, which is the exponent of
    /// `ψ(x/m)` for monic `m`.
    #[inline]
    pub fn top(&self, x: usize) -> u32 {
        self.top[x] as u32
    }
    pub fn size(&self) -> usize {
        self.size
    }
}

impl ResidueRing {
    /// The ring `O/(m)`; `m` is replaced by its monic associate.
    pub fn new(m: &Poly) -> Result<Self> {
        if m.is_zero() {
            return Err(Error::InvalidInput("residue ring modulo zero".into()));
        }
        let modulus = m.monic();
        let n = modulus.degree().unwrap();
        let size = (m.p() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if size > u32::MAX as u128 {
            return Err(Error::Infeasible { estimate: size, cap: u32::MAX as u128 });
        }
        Ok(ResidueRing { modulus, n, size: size as usize, tables: OnceLock::new() })
    }

    pub fn modulus(&self) -> &Poly {
        &self.modulus
    }

    pub fn p(&self) -> u32 {
        self.modulus.p()
    }

    pub fn field(&self) -> Fq {
        self.modulus.field()
    }

    /// `deg m`.
    pub fn degree(&self) -> usize {
        self.n
    }

    /// `|O/(m)| = q^{deg m}`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn reduce(&self, x: &Poly) -> Poly {
        x.rem(&self.modulus)
    }

    pub fn encode(&self, x: &Poly) -> usize {
        self.reduce(x).to_index() as usize
    }

    pub fn decode(&self, idx: usize) -> Poly {
        Poly::from_index(self.p(), idx as u64, self.n)
    }

    pub fn elements(&self) -> impl Iterator<Item = Poly> + '_ {
        (0..self.size).map(move |i| self.decode(i))
    }

    pub fn is_unit(&self, x: &Poly) -> bool {
        x.gcd(&self.modulus).is_one()
    }

    pub fn units(&self) -> impl Iterator<Item = Poly> + '_ {
        self.elements().filter(move |x| self.is_unit(x))
    }

    pub fn add(&self, x: &Poly, y: &Poly) -> Poly {
        self.reduce(&(x + y))
    }

    pub fn mul(&self, x: &Poly, y: &Poly) -> Poly {
        self.reduce(&(x * y))
    }

    pub fn inv(&self, x: &Poly) -> Option<Poly> {
        x.inv_mod(&self.modulus)
    }

    /// Exponent `a` with `ψ(x/m) = e_q(a)` for the monic modulus: the
    /// coefficient of `t^{deg m - 1}` of the reduced representative.
    pub fn psi_exponent(&self, x: &Poly) -> u32 {
        if self.n == 0 {
            return 0;
        }
        self.reduce(x).coeff(self.n - 1)
    }

    /// Dense tables, built on first use for rings with at most
    /// [`TABLE_LIMIT`] elements.
    pub fn tables(&self) -> Option<&RingTables> {
        self.tables.get_or_init(|| (self.size <= TABLE_LIMIT).then(|| self.build_tables())).as_ref()
    }

    fn build_tables(&self) -> RingTables {
        let p = self.p() as usize;
        let n = self.n;
        let size = self.size;
        let fq = self.field();
        let digits = |mut i: usize| {
            let mut d = vec![0usize; n];
            for x in d.iter_mut() {
                *x = i % p;
                i /= p;
            }
            d
        };
        let undigits = |d: &[usize]| d.iter().rev().fold(0usize, |acc, &x| acc * p + x);
        let all: Vec<Vec<usize>> = (0..size).map(digits).collect();
        let mut add = vec![0u16; size * size];
        let mut sum = vec![0usize; n];
        for x in 0..size {
            for y in 0..size {
                for k in 0..n {
                    let s = all[x][k] + all[y][k];
                    sum[k] = if s >= p { s - p } else { s };
                }
                add[x * size + y] = undigits(&sum) as u16;
            }
        }
        let neg: Vec<u16> = (0..size)
            .map(|x| {
                let d: Vec<usize> = all[x].iter().map(|&c| (p - c) % p).collect();
                undigits(&d) as u16
            })
            .collect();
        // x·t mod m: shift the digits up and cancel the overflow with m.
        let m: Vec<usize> = (0..n).map(|k| self.modulus.coeff(k) as usize).collect();
        let tmul: Vec<usize> = (0..size)
            .map(|x| {
                if n == 0 {
                    return 0;
                }
                let d = &all[x];
                let top = d[n - 1];
                let mut out = vec![0usize; n];
                for k in 0..n {
                    let shifted = if k == 0 { 0 } else { d[k - 1] };
                    out[k] = (shifted + p * p - top * m[k]) % p;
                }
                undigits(&out)
            })
            .collect();
        let smul: Vec<Vec<usize>> = (0..p)
            .map(|a| {
                (0..size)
                    .map(|x| {
                        let d: Vec<usize> = all[x].iter().map(|&c| fq.mul(c as u32, a as u32) as usize).collect();
                        undigits(&d)
                    })
                    .collect()
            })
            .collect();
        let mut mul = vec![0u16; size * size];
        for x in 0..size {
            let row = x * size;
            for y in 0..size {
                let v = if y < p {
                    smul[y][x]
                } else {
                    let d0 = y % p;
                    let hi = mul[row + y / p] as usize;
                    add[smul[d0][x] * size + tmul[hi]] as usize
                };
                mul[row + y] = v as u16;
            }
        }
        let top = (0..size).map(|x| if n == 0 { 0 } else { all[x][n - 1] as u8 }).collect();
        RingTables { size, add, mul, neg, top }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_agree_with_polynomial_arithmetic() {
        for m in ["t^2+1", "t^3+2*t+1", "t^2", "2*t^2+t"] {
            let ring = ResidueRing::new(&Poly::parse(m, 3).unwrap()).unwrap();
            let tab = ring.tables().unwrap();
            for x in 0..ring.size() {
                for y in 0..ring.size() {
                    let (px, py) = (ring.decode(x), ring.decode(y));
                    assert_eq!(tab.mul(x, y), ring.encode(&(&px * &py)));
                    assert_eq!(tab.add(x, y), ring.encode(&(&px + &py)));
                }
                assert_eq!(tab.neg(x), ring.encode(&(-&ring.decode(x))));
                assert_eq!(tab.top(x), ring.psi_exponent(&ring.decode(x)));
            }
        }
    }
}
