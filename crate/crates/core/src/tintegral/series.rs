//! Power series on `𝕋^m` with `O_∞` coefficients, truncated at a total
//! degree `D` and a coefficient precision `t^prec`. Provides composition,
//! inversion of analytic automorphisms, the Morse normal form, and the
//! stationary phase evaluation.

use std::collections::BTreeMap;

use super::{integrate_phase, BoxRegion};
use crate::basefield::ScaledCyclotomic;
use crate::error::{Error, Result};
use crate::laurent::{gauss_factor_from, TruncLaurent};
use crate::quadform::{diagonalize_oinf, LaurentMatrix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncSeries {
    p: u32,
    dim: usize,
    degree: usize,
    prec: i64,
    terms: BTreeMap<Vec<u32>, TruncLaurent>,
}

impl TruncSeries {
    pub fn zero(p: u32, dim: usize, degree: usize, prec: i64) -> Self {
        TruncSeries { p, dim, degree, prec, terms: BTreeMap::new() }
    }

    /// From `(exponents, coefficient)` pairs; coefficients must lie in `O_∞`.
    pub fn from_terms(p: u32, dim: usize, degree: usize, prec: i64, terms: &[(Vec<u32>, TruncLaurent)]) -> Result<Self> {
        let mut s = Self::zero(p, dim, degree, prec);
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::InvalidInput("exponent vector has the wrong length".into()));
            }
            if c.deg_upper() > 0 {
                return Err(Error::InvalidInput(format!("coefficient {c} is not in O_inf")));
            }
            s.accumulate(e.clone(), c);
        }
        Ok(s)
    }

    pub fn constant(p: u32, dim: usize, degree: usize, prec: i64, c: &TruncLaurent) -> Self {
        let mut s = Self::zero(p, dim, degree, prec);
        s.accumulate(vec![0; dim], c);
        s
    }

    pub fn var(p: u32, dim: usize, degree: usize, prec: i64, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut s = Self::zero(p, dim, degree, prec);
        s.accumulate(e, &TruncLaurent::one(p));
        s
    }

    /// `Σ_j m_j x_j`.
    pub fn linear(p: u32, degree: usize, prec: i64, row: &[TruncLaurent]) -> Self {
        let dim = row.len();
        let mut s = Self::zero(p, dim, degree, prec);
        for (j, c) in row.iter().enumerate() {
            let mut e = vec![0; dim];
            e[j] = 1;
            s.accumulate(e, c);
        }
        s
    }

    fn accumulate(&mut self, e: Vec<u32>, c: &TruncLaurent) {
        if e.iter().sum::<u32>() as usize > self.degree {
            return;
        }
        let c = c.truncate(self.prec);
        let v = match self.terms.remove(&e) {
            Some(old) => old.add(&c),
            None => c,
        };
        if !v.is_zero_to_precision() {
            self.terms.insert(e, v);
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &TruncLaurent)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[u32]) -> TruncLaurent {
        self.terms.get(e).cloned().unwrap_or_else(|| TruncLaurent::zero(self.p))
    }

    pub fn constant_term(&self) -> TruncLaurent {
        self.coeff(&vec![0; self.dim])
    }

    /// True when every coefficient vanishes to the tracked precision.
    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero_to_precision())
    }

    /// Lowest total degree of a nonzero term.
    pub fn order(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.iter().sum::<u32>() as usize).min()
    }

    fn like(&self) -> Self {
        Self::zero(self.p, self.dim, self.degree, self.prec)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut s = self.clone();
        for (e, c) in &o.terms {
            s.accumulate(e.clone(), c);
        }
        s
    }

    pub fn neg(&self) -> Self {
        let mut s = self.like();
        for (e, c) in &self.terms {
            s.accumulate(e.clone(), &c.neg());
        }
        s
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, a: &TruncLaurent) -> Self {
        let mut s = self.like();
        for (e, c) in &self.terms {
            s.accumulate(e.clone(), &c.mul(a));
        }
        s
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut s = self.like();
        for (e1, c1) in &self.terms {
            let d1: u32 = e1.iter().sum();
            for (e2, c2) in &o.terms {
                if (d1 + e2.iter().sum::<u32>()) as usize > self.degree {
                    continue;
                }
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                s.accumulate(e, &c1.mul(c2));
            }
        }
        s
    }

    fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(self.p, self.dim, self.degree, self.prec, &TruncLaurent::one(self.p));
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Substitute `x_i ↦ args[i]`; every argument must vanish at 0 so that
    /// the truncation stays valid.
    pub fn compose(&self, args: &[TruncSeries]) -> Result<Self> {
        if args.len() != self.dim {
            return Err(Error::InvalidInput("composition arity mismatch".into()));
        }
        if args.iter().any(|a| !a.constant_term().is_zero_to_precision()) {
            return Err(Error::InvalidInput("inner series must vanish at the origin".into()));
        }
        let inner = &args[0];
        let mut out = Self::zero(self.p, inner.dim, self.degree.min(inner.degree), self.prec.max(inner.prec));
        let mut powers: Vec<Vec<TruncSeries>> = args.iter().map(|a| vec![a.pow(0)]).collect();
        for (e, c) in &self.terms {
            let mut term = TruncSeries::constant(out.p, out.dim, out.degree, out.prec, c);
            for (i, &k) in e.iter().enumerate() {
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap().mul(&args[i]);
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][k as usize]);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Evaluate at a point (the truncated series is a polynomial).
    pub fn eval(&self, u: &[TruncLaurent]) -> TruncLaurent {
        let mut acc = TruncLaurent::zero(self.p);
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    m = m.mul(&u[i]);
                }
            }
            acc = acc.add(&m);
        }
        acc
    }

    /// Coefficients of the linear part.
    pub fn linear_part(&self) -> Vec<TruncLaurent> {
        (0..self.dim)
            .map(|j| {
                let mut e = vec![0; self.dim];
                e[j] = 1;
                self.coeff(&e)
            })
            .collect()
    }

    /// Gram matrix `H` of the quadratic part, `Σ_{ij} H_ij x_i x_j`.
    pub fn quadratic_gram(&self) -> LaurentMatrix {
        let half = self.p.div_ceil(2);
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| {
                        let mut e = vec![0; self.dim];
                        e[i] += 1;
                        e[j] += 1;
                        let c = self.coeff(&e);
                        if i == j {
                            c
                        } else {
                            c.scale(half)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `√s` for a series whose constant term is a square unit, via
    /// `s = c(1 + w)`, `√s = √c (1 + v)` with `v = (w − v²)/2`.
    pub fn sqrt(&self) -> Result<Self> {
        let c = self.constant_term();
        if c.deg()? != 0 {
            return Err(Error::InvalidInput("series square root needs a unit constant term".into()));
        }
        let rc = c.sqrt(self.prec)?;
        let ci = c.inv(self.prec)?;
        let one = Self::constant(self.p, self.dim, self.degree, self.prec, &TruncLaurent::one(self.p));
        let w = self.scale(&ci).sub(&one);
        let half = TruncLaurent::monomial(self.p, self.p.div_ceil(2), 0);
        let mut v = self.like();
        for _ in 0..=self.degree {
            v = w.sub(&v.mul(&v)).scale(&half);
        }
        Ok(one.add(&v).scale(&rc))
    }

    /// `1/s` for a series with a unit constant term.
    pub fn recip(&self) -> Result<Self> {
        let c = self.constant_term();
        if c.deg()? != 0 {
            return Err(Error::InvalidInput("series inverse needs a unit constant term".into()));
        }
        let ci = c.inv(self.prec)?;
        let one = Self::constant(self.p, self.dim, self.degree, self.prec, &TruncLaurent::one(self.p));
        let w = self.scale(&ci).sub(&one);
        let mut z = one.clone();
        for _ in 0..=self.degree {
            z = one.sub(&w.mul(&z));
        }
        Ok(z.scale(&ci))
    }
}

/// Inverse of a matrix in `GL_d(O_∞)` by elimination with unit pivots.
pub fn invert_oinf(m: &LaurentMatrix, prec: i64) -> Result<LaurentMatrix> {
    let d = m.len();
    let p = m[0][0].p();
    let mut a: Vec<Vec<TruncLaurent>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { TruncLaurent::one(p) } else { TruncLaurent::zero(p) }));
            r
        })
        .collect();
    for k in 0..d {
        let piv = (k..d)
            .find(|&i| a[i][k].top() == Some(0))
            .ok_or_else(|| Error::Degenerate("matrix is not invertible over O_inf".into()))?;
        a.swap(k, piv);
        let inv = a[k][k].inv(prec)?;
        a[k] = a[k].iter().map(|x| x.mul(&inv).truncate(prec)).collect();
        for i in 0..d {
            if i != k && !a[i][k].is_zero_to_precision() {
                let f = a[i][k].clone();
                let rowk = a[k].clone();
                a[i] = a[i].iter().zip(&rowk).map(|(x, y)| x.sub(&f.mul(y)).truncate(prec)).collect();
            }
        }
    }
    Ok(a.into_iter().map(|r| r[d..].to_vec()).collect())
}

fn mat_series(p: u32, degree: usize, prec: i64, m: &LaurentMatrix) -> Vec<TruncSeries> {
    m.iter().map(|row| TruncSeries::linear(p, degree, prec, row)).collect()
}

/// Compose a tuple: `(outer_i ∘ inner)`.
pub fn compose_tuple(outer: &[TruncSeries], inner: &[TruncSeries]) -> Result<Vec<TruncSeries>> {
    outer.iter().map(|o| o.compose(inner)).collect()
}

/// The inverse `Ψ` of `Φ ∈ A_∞(𝕋^d)`, with `Φ∘Ψ = Ψ∘Φ = id` to the
/// truncation degree. Writing `Φ = Jx + N(x)`, the fixed point
/// `Ψ = J^{-1}(y − N(Ψ))` gains one degree per iteration.
pub fn series_inverse(phi: &[TruncSeries]) -> Result<Vec<TruncSeries>> {
    let d = phi.len();
    if d == 0 || phi.iter().any(|f| f.dim() != d) {
        return Err(Error::InvalidInput("series inverse needs d functions of d variables".into()));
    }
    let (p, degree, prec) = (phi[0].p(), phi[0].degree(), phi[0].prec());
    if phi.iter().any(|f| !f.constant_term().is_zero_to_precision()) {
        return Err(Error::InvalidInput("Phi(0) must be 0".into()));
    }
    let jac: LaurentMatrix = phi.iter().map(|f| f.linear_part()).collect();
    let jinv = invert_oinf(&jac, prec)
        .map_err(|_| Error::Degenerate("|det JPhi(0)| < 1: not invertible in A_inf".into()))?;
    let lin = mat_series(p, degree, prec, &jac);
    let nonlin: Vec<TruncSeries> = phi.iter().zip(&lin).map(|(f, l)| f.sub(l)).collect();
    let ys: Vec<TruncSeries> = (0..d).map(|i| TruncSeries::var(p, d, degree, prec, i)).collect();
    let linv = mat_series(p, degree, prec, &jinv);
    let mut psi = linv.clone();
    for _ in 0..degree {
        let n_psi = compose_tuple(&nonlin, &psi)?;
        let rhs: Vec<TruncSeries> = ys.iter().zip(&n_psi).map(|(y, n)| y.sub(n)).collect();
        psi = compose_tuple(&linv, &rhs)?;
    }
    Ok(psi)
}

/// `φ(x) = φ(0) + Σ λ_k ψ_k(x)²`, with `Ψ = (ψ_k)` an analytic automorphism
/// with `JΨ(0) = γ^{-1}`, where `γᵀHγ = diag(λ)`.
#[derive(Clone, Debug)]
pub struct MorseForm {
    pub phi0: TruncLaurent,
    pub gamma: LaurentMatrix,
    pub lambdas: Vec<TruncLaurent>,
    /// `ψ_k` as functions of the diagonalizing coordinates `y = γ^{-1}x`.
    pub psi_y: Vec<TruncSeries>,
    /// `ψ_k` as functions of the original coordinates.
    pub psi: Vec<TruncSeries>,
}

impl MorseForm {
    /// `φ − φ(0) − Σ λ_k ψ_k²`, which must vanish to the truncation.
    pub fn residual(&self, phi: &TruncSeries) -> TruncSeries {
        let mut r = phi.sub(&TruncSeries::constant(phi.p(), phi.dim(), phi.degree(), phi.prec(), &self.phi0));
        for (l, s) in self.lambdas.iter().zip(&self.psi) {
            r = r.sub(&s.mul(s).scale(l));
        }
        r
    }
}

/// Morse lemma over `K_∞` by recursive completion of squares. After the
/// linear change `x = γy` the quadratic part is `Σ λ_k y_k²`; writing
/// `φ − φ(0) = Σ_{i,j} y_i y_j h_ij(y)` with `h(0) = diag(λ)`, step `k` sets
/// `ψ_k = (h_kk/λ_k)^{1/2} (y_k + Σ_{j>k} y_j h_kj / h_kk)` and replaces
/// `h_ij` by `h_ij − h_ki h_kj / h_kk` for `i, j > k`.
pub fn morse_normal_form(phi: &TruncSeries) -> Result<MorseForm> {
    let (p, d, degree, prec) = (phi.p(), phi.dim(), phi.degree(), phi.prec());
    if phi.linear_part().iter().any(|c| !c.is_zero_to_precision()) {
        return Err(Error::InvalidInput("phi has no critical point at 0".into()));
    }
    let h0 = phi.quadratic_gram();
    let (gamma, lambdas) = diagonalize_oinf(&h0, prec)?;
    for l in &lambdas {
        if l.deg()? != 0 {
            return Err(Error::Degenerate("|det H_phi(0)| != 1".into()));
        }
    }
    let phi0 = phi.constant_term();
    let gy = mat_series(p, degree, prec, &gamma);
    let shifted = phi.sub(&TruncSeries::constant(p, d, degree, prec, &phi0));
    let tilde = shifted.compose(&gy)?;
    // Hadamard split: assign y^α (|α| ≥ 2) to the pair of its two lowest
    // variable slots.
    let half = TruncLaurent::monomial(p, p.div_ceil(2), 0);
    let mut h: Vec<Vec<TruncSeries>> = vec![vec![TruncSeries::zero(p, d, degree, prec); d]; d];
    for (e, c) in tilde.terms() {
        let total: u32 = e.iter().sum();
        if total < 2 {
            continue;
        }
        let i = e.iter().position(|&x| x > 0).unwrap();
        let mut rest = e.clone();
        rest[i] -= 1;
        let j = rest.iter().position(|&x| x > 0).unwrap();
        rest[j] -= 1;
        let mono = TruncSeries::from_terms(p, d, degree, prec, &[(rest, c.clone())])?;
        if i == j {
            h[i][i] = h[i][i].add(&mono);
        } else {
            let m = mono.scale(&half);
            h[i][j] = h[i][j].add(&m);
            h[j][i] = h[j][i].add(&m);
        }
    }
    let ys: Vec<TruncSeries> = (0..d).map(|i| TruncSeries::var(p, d, degree, prec, i)).collect();
    let mut psi_y = Vec::with_capacity(d);
    for k in 0..d {
        let hkk_inv = h[k][k].recip()?;
        let lk_inv = lambdas[k].inv(prec)?;
        let root = h[k][k].scale(&lk_inv).sqrt()?;
        let mut lin = ys[k].clone();
        for j in (k + 1)..d {
            lin = lin.add(&ys[j].mul(&h[k][j]).mul(&hkk_inv));
        }
        psi_y.push(root.mul(&lin));
        for i in (k + 1)..d {
            for j in (k + 1)..d {
                h[i][j] = h[i][j].sub(&h[k][i].mul(&h[k][j]).mul(&hkk_inv));
            }
        }
    }
    let ginv = invert_oinf(&gamma, prec)?;
    let yx = mat_series(p, degree, prec, &ginv);
    let psi = compose_tuple(&psi_y, &yx)?;
    Ok(MorseForm { phi0, gamma, lambdas, psi_y, psi })
}

/// `∫_{𝕋^d} ψ(f φ(u)) du = ψ(f φ(0)) Π 𝒢(f λ_i)`.
pub fn stationary_phase(phi: &TruncSeries, f: &TruncLaurent) -> Result<ScaledCyclotomic> {
    let morse = morse_normal_form(phi)?;
    let p = phi.p();
    let df = f.deg()?;
    let fq = f.field();
    let mut acc = f.mul(&morse.phi0).psi()?;
    for l in &morse.lambdas {
        acc = &acc * &gauss_factor_from(p, df, fq.mul(f.lc(), l.lc()))?;
    }
    Ok(acc)
}

/// Direct summation; `|∇φ(u)| ≤ |u| < 1` on `𝕋^d`, so `ψ(fφ)` is constant on
/// cells of size `q^{min(0, −deg f)}`.
pub fn stationary_phase_direct(phi: &TruncSeries, f: &TruncLaurent) -> Result<ScaledCyclotomic> {
    let sigma = 0.min(-f.deg()?);
    let region = BoxRegion::torus(phi.p(), phi.dim());
    integrate_phase(&region, sigma, |u| Ok(Some(f.mul(&phi.eval(u)).psi_exponent()?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> TruncLaurent {
        TruncLaurent::parse(s, 3).unwrap()
    }

    #[test]
    fn inverse_of_x_plus_x2() {
        let phi = TruncSeries::from_terms(3, 1, 4, -8, &[(vec![1], c("1")), (vec![2], c("1"))]).unwrap();
        let psi = series_inverse(std::slice::from_ref(&phi)).unwrap();
        let id = TruncSeries::var(3, 1, 4, -8, 0);
        assert!(psi[0].compose(std::slice::from_ref(&phi)).unwrap().sub(&id).is_zero());
        assert_eq!(psi[0].coeff(&[2]), c("2"));
        assert_eq!(psi[0].coeff(&[3]), c("2"));
    }

    #[test]
    fn morse_cubic() {
        let phi = TruncSeries::from_terms(3, 1, 5, -8, &[(vec![2], c("1")), (vec![3], c("1"))]).unwrap();
        let m = morse_normal_form(&phi).unwrap();
        assert!(m.residual(&phi).is_zero());
        let f = c("t^2");
        assert_eq!(stationary_phase(&phi, &f).unwrap(), stationary_phase_direct(&phi, &f).unwrap());
    }
}
