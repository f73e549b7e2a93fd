use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// An exact value `p^{-e/2} · z` with `z ∈ ℤ[ζ_p]`.
///
/// `z` is stored in the basis `ζ^1, …, ζ^{p-1}`; the coefficient of `ζ^0` is
/// eliminated through `1 = -(ζ + … + ζ^{p-1})`. Values are kept canonical:
/// a common factor `p` is stripped from the coefficients (lowering `e` by 2),
/// zero is `(e = 0, 0)`, and for `p ≡ 1 mod 4` an odd `e` is made even by
/// multiplying through by the Gauss sum `G(1) = √p`. For `p ≡ 3 mod 4` the
/// number `√p` is not in `ℚ(ζ_p)`, so the parity of `e` of a nonzero value is
/// an invariant and values of different parity can never be added.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScaledCyclotomic {
    p: u32,
    half_exp: i32,
    coeffs: Vec<i128>,
}

fn is_zero_vec(v: &[i128]) -> bool {
    v.iter().all(|&c| c == 0)
}

impl ScaledCyclotomic {
    pub fn zero(p: u32) -> Self {
        ScaledCyclotomic { p, half_exp: 0, coeffs: vec![0; p as usize - 1] }
    }

    pub fn one(p: u32) -> Self {
        Self::from_int(p, 1)
    }

    pub fn from_int(p: u32, n: i128) -> Self {
        // n = -n (ζ + ... + ζ^{p-1})
        Self::from_parts(p, 0, vec![-n; p as usize - 1])
    }

    /// `ζ_p^k`.
    pub fn zeta(p: u32, k: u64) -> Self {
        let k = (k % p as u64) as usize;
        let mut full = vec![0i128; p as usize];
        full[k] = 1;
        Self::from_full(p, 0, &full)
    }

    /// Build from a coefficient vector over `ζ^0, …, ζ^{p-1}`.
    pub fn from_full(p: u32, half_exp: i32, full: &[i128]) -> Self {
        assert_eq!(full.len(), p as usize, "full coefficient vector has wrong length");
        let c0 = full[0];
        let coeffs = full[1..].iter().map(|&c| c - c0).collect();
        Self::from_parts(p, half_exp, coeffs)
    }

    /// Build from reduced coefficients over `ζ^1, …, ζ^{p-1}`.
    pub fn from_parts(p: u32, half_exp: i32, coeffs: Vec<i128>) -> Self {
        assert_eq!(coeffs.len(), p as usize - 1, "reduced coefficient vector has wrong length");
        let mut v = ScaledCyclotomic { p, half_exp, coeffs };
        v.canonicalize();
        v
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn half_exp(&self) -> i32 {
        self.half_exp
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.coeffs
    }

    /// Coefficients over `ζ^0, …, ζ^{p-1}` with the `ζ^0` entry equal to 0.
    pub fn full(&self) -> Vec<i128> {
        let mut v = Vec::with_capacity(self.p as usize);
        v.push(0);
        v.extend_from_slice(&self.coeffs);
        v
    }

    pub fn is_zero(&self) -> bool {
        is_zero_vec(&self.coeffs)
    }

    fn canonicalize(&mut self) {
        let p = self.p as i128;
        loop {
            if is_zero_vec(&self.coeffs) {
                self.half_exp = 0;
                return;
            }
            while self.coeffs.iter().all(|&c| c % p == 0) {
                for c in self.coeffs.iter_mut() {
                    *c /= p;
                }
                self.half_exp -= 2;
            }
            if self.half_exp.rem_euclid(2) == 1 && self.p % 4 == 1 {
                // p^{-e/2} z = p^{-(e+1)/2} (z·G(1)) since G(1) = √p.
                let g = gauss_full(self.p);
                let prod = cyclic_mul(&self.full(), &g, self.p);
                let c0 = prod[0];
                self.coeffs = prod[1..].iter().map(|&c| c - c0).collect();
                self.half_exp += 1;
                continue;
            }
            return;
        }
    }

    /// Multiply by `p^{-e/2}`.
    pub fn scale(&self, e: i32) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self::from_parts(self.p, self.half_exp + e, self.coeffs.clone())
    }

    pub fn mul_int(&self, n: i128) -> Self {
        Self::from_parts(self.p, self.half_exp, self.coeffs.iter().map(|&c| c * n).collect())
    }

    /// Complex conjugation `ζ ↦ ζ^{-1}`.
    pub fn conj(&self) -> Self {
        let f = self.full();
        let p = self.p as usize;
        let mut g = vec![0i128; p];
        for (k, &c) in f.iter().enumerate() {
            g[(p - k) % p] += c;
        }
        Self::from_full(self.p, self.half_exp, &g)
    }

    /// Image under the embedding `ζ ↦ exp(2πi/p)`.
    pub fn to_complex(&self) -> (f64, f64) {
        let p = self.p as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            let ang = 2.0 * std::f64::consts::PI * (i as f64 + 1.0) / p;
            re += c as f64 * ang.cos();
            im += c as f64 * ang.sin();
        }
        let s = p.powf(-(self.half_exp as f64) / 2.0);
        (re * s, im * s)
    }

    pub fn abs(&self) -> f64 {
        let (re, im) = self.to_complex();
        re.hypot(im)
    }

    /// The value as a rational `n · p^{-e/2}` (with `e` even) if it lies in `ℚ`.
    pub fn to_rational(&self) -> Option<(i128, i32)> {
        if self.is_zero() {
            return Some((0, 0));
        }
        let c = self.coeffs[0];
        if self.coeffs.iter().all(|&x| x == c) && self.half_exp % 2 == 0 {
            Some((-c, self.half_exp))
        } else {
            None
        }
    }

    /// Sum, or `None` when the two half exponents have different parity
    /// (impossible to represent for `p ≡ 3 mod 4`).
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        assert_eq!(self.p, other.p, "adding cyclotomic values for different p");
        if self.is_zero() {
            return Some(other.clone());
        }
        if other.is_zero() {
            return Some(self.clone());
        }
        let (lo, hi) = if self.half_exp <= other.half_exp { (self, other) } else { (other, self) };
        let diff = hi.half_exp - lo.half_exp;
        if diff % 2 != 0 {
            return None;
        }
        let factor = (self.p as i128).pow((diff / 2) as u32);
        let coeffs = lo.coeffs.iter().zip(&hi.coeffs).map(|(&a, &b)| a * factor + b).collect();
        Some(Self::from_parts(self.p, hi.half_exp, coeffs))
    }
}

fn cyclic_mul(a: &[i128], b: &[i128], p: u32) -> Vec<i128> {
    let p = p as usize;
    let mut out = vec![0i128; p];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y != 0 {
                out[(i + j) % p] += x * y;
            }
        }
    }
    out
}

/// `G(1) = Σ_x ζ^{x²}` over `ζ^0..ζ^{p-1}`.
pub(crate) fn gauss_full(p: u32) -> Vec<i128> {
    let mut g = vec![0i128; p as usize];
    for x in 0..p as u64 {
        g[((x * x) % p as u64) as usize] += 1;
    }
    g
}

impl Add for &ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn add(self, other: &ScaledCyclotomic) -> ScaledCyclotomic {
        self.checked_add(other).unwrap_or_else(|| {
            panic!(
                "cannot add p^(-{}/2) and p^(-{}/2) values for p = {}: sqrt(p) is not in Q(zeta_p)",
                self.half_exp, other.half_exp, self.p
            )
        })
    }
}

impl Add for ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn add(self, other: ScaledCyclotomic) -> ScaledCyclotomic {
        &self + &other
    }
}

impl AddAssign<&ScaledCyclotomic> for ScaledCyclotomic {
    fn add_assign(&mut self, other: &ScaledCyclotomic) {
        *self = &*self + other;
    }
}

impl Neg for &ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn neg(self) -> ScaledCyclotomic {
        ScaledCyclotomic {
            p: self.p,
            half_exp: self.half_exp,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn neg(self) -> ScaledCyclotomic {
        -&self
    }
}

impl Sub for &ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn sub(self, other: &ScaledCyclotomic) -> ScaledCyclotomic {
        self + &(-other)
    }
}

impl Sub for ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn sub(self, other: ScaledCyclotomic) -> ScaledCyclotomic {
        &self - &other
    }
}

impl Mul for &ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn mul(self, other: &ScaledCyclotomic) -> ScaledCyclotomic {
        assert_eq!(self.p, other.p, "multiplying cyclotomic values for different p");
        if self.is_zero() || other.is_zero() {
            return ScaledCyclotomic::zero(self.p);
        }
        let prod = cyclic_mul(&self.full(), &other.full(), self.p);
        ScaledCyclotomic::from_full(self.p, self.half_exp + other.half_exp, &prod)
    }
}

impl Mul for ScaledCyclotomic {
    type Output = ScaledCyclotomic;
    fn mul(self, other: ScaledCyclotomic) -> ScaledCyclotomic {
        &self * &other
    }
}

impl fmt::Display for ScaledCyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((n, e)) = self.to_rational() {
            if e == 0 {
                return write!(f, "{n}");
            }
            if e < 0 {
                if let Some(m) = (self.p as i128).checked_pow((-e / 2) as u32).and_then(|s| n.checked_mul(s)) {
                    return write!(f, "{m}");
                }
            }
            return write!(f, "{n}*{}^({})", self.p, -e / 2);
        }
        write!(f, "{}^(-{}/2)*[", self.p, self.half_exp)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Accumulator for sums of signed roots of unity `Σ n_k ζ^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZetaSum {
    counts: Vec<i128>,
}

impl ZetaSum {
    pub fn new(p: u32) -> Self {
        ZetaSum { counts: vec![0; p as usize] }
    }

    #[inline]
    pub fn add(&mut self, k: u32, n: i128) {
        self.counts[k as usize] += n;
    }

    pub fn merge(&mut self, other: &ZetaSum) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn counts(&self) -> &[i128] {
        &self.counts
    }

    pub fn value(&self) -> ScaledCyclotomic {
        ScaledCyclotomic::from_full(self.counts.len() as u32, 0, &self.counts)
    }
}
