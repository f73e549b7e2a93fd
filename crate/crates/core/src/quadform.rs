//! Quadratic forms `F(x) = xᵀAx` over `F_q[t]`: evaluation, the
//! discriminant `Δ = det(2A)`, diagonalization modulo `m` and over `O_∞`, the
//! dual form, and anisotropic cones.

use serde::{Deserialize, Serialize};

use crate::basefield::{Fq, FqElem};
use crate::error::{Error, Result};
use crate::laurent::TruncLaurent;
use crate::polyring::{crt, factor, Poly};

pub type PolyMatrix = Vec<Vec<Poly>>;
pub type LaurentMatrix = Vec<Vec<TruncLaurent>>;

/// A non-degenerate quadratic form given by its symmetric Gram matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadForm {
    p: u32,
    gram: PolyMatrix,
}

/// JSON description of a form: `{"q": 3, "dim": 4, "gram": [["1","0",..],..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadFormSpec {
    pub q: u32,
    pub dim: usize,
    pub gram: Vec<Vec<String>>,
}

impl QuadForm {
    pub fn new(p: u32, gram: PolyMatrix) -> Result<Self> {
        Fq::new(p)?;
        let d = gram.len();
        if d == 0 || gram.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidInput("gram matrix must be square and nonempty".into()));
        }
        for i in 0..d {
            for j in 0..d {
                if gram[i][j] != gram[j][i] {
                    return Err(Error::InvalidInput(format!("gram matrix is not symmetric at ({i},{j})")));
                }
                if gram[i][j].p() != p {
                    return Err(Error::InvalidInput("gram entries over the wrong field".into()));
                }
            }
        }
        let f = QuadForm { p, gram };
        if f.disc().is_zero() {
            return Err(Error::Degenerate("the form has zero discriminant".into()));
        }
        Ok(f)
    }

    pub fn diagonal(p: u32, entries: &[Poly]) -> Result<Self> {
        let d = entries.len();
        let mut gram = vec![vec![Poly::zero(p); d]; d];
        for (i, e) in entries.iter().enumerate() {
            gram[i][i] = e.clone();
        }
        Self::new(p, gram)
    }

    /// `x_1² + … + x_d²`.
    pub fn sum_of_squares(p: u32, d: usize) -> Result<Self> {
        Self::diagonal(p, &vec![Poly::one(p); d])
    }

    /// The norm form `a² − νb² + (νd² − c²)(t − 1)` of the quaternion algebra.
    pub fn morgenstern(p: u32, nu: FqElem) -> Result<Self> {
        let fq = Fq::new(p)?;
        if fq.chi(nu) != -1 {
            return Err(Error::InvalidInput(format!("nu = {nu} is not a non-square mod {p}")));
        }
        let tm1 = Poly::from_i64(p, &[-1, 1]);
        let entries = [Poly::one(p), Poly::constant(p, fq.neg(nu)), -&tm1, tm1.scale(nu)];
        Self::diagonal(p, &entries)
    }

    pub fn from_spec(spec: &QuadFormSpec) -> Result<Self> {
        if spec.gram.len() != spec.dim {
            return Err(Error::InvalidInput("gram size does not match dim".into()));
        }
        let gram = spec
            .gram
            .iter()
            .map(|row| row.iter().map(|s| Poly::parse(s, spec.q)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec.q, gram)
    }

    pub fn to_spec(&self) -> QuadFormSpec {
        QuadFormSpec {
            q: self.p,
            dim: self.dim(),
            gram: self.gram.iter().map(|row| row.iter().map(|e| e.to_string()).collect()).collect(),
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    pub fn gram(&self) -> &PolyMatrix {
        &self.gram
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.gram[i][j]
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.gram[i][j].is_zero()))
    }

    /// `Δ = det(2A)`.
    pub fn disc(&self) -> Poly {
        let two = self.field().reduce(2);
        let m: PolyMatrix = self.gram.iter().map(|row| row.iter().map(|e| e.scale(two)).collect()).collect();
        det(&m)
    }

    pub fn field(&self) -> Fq {
        Fq::unchecked(self.p)
    }

    /// `xᵀAx` for polynomial vectors.
    pub fn eval_poly(&self, x: &[Poly]) -> Poly {
        self.bilinear_poly(x, x)
    }

    /// `xᵀAy`.
    pub fn bilinear_poly(&self, x: &[Poly], y: &[Poly]) -> Poly {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        let mut acc = Poly::zero(self.p);
        for i in 0..self.dim() {
            if x[i].is_zero() {
                continue;
            }
            let mut row = Poly::zero(self.p);
            for j in 0..self.dim() {
                if !self.gram[i][j].is_zero() && !y[j].is_zero() {
                    row = &row + &(&self.gram[i][j] * &y[j]);
                }
            }
            acc = &acc + &(&x[i] * &row);
        }
        acc
    }

    /// `Ax`.
    pub fn apply_poly(&self, x: &[Poly]) -> Vec<Poly> {
        mat_vec(&self.gram, x)
    }

    /// `xᵀAx` for Laurent vectors, with precision propagated.
    pub fn eval_laurent(&self, x: &[TruncLaurent]) -> TruncLaurent {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        let d = self.dim();
        let mut acc = TruncLaurent::zero(self.p);
        let two = TruncLaurent::monomial(self.p, 2, 0);
        for i in 0..d {
            for j in i..d {
                if self.gram[i][j].is_zero() {
                    continue;
                }
                let a = TruncLaurent::from_poly(&self.gram[i][j]);
                let mut term = a.mul(&x[i]).mul(&x[j]);
                if i != j {
                    term = term.mul(&two);
                }
                acc = acc.add(&term);
            }
        }
        acc
    }

    /// The Gram matrix as Laurent entries.
    pub fn gram_laurent(&self) -> LaurentMatrix {
        self.gram.iter().map(|row| row.iter().map(TruncLaurent::from_poly).collect()).collect()
    }

    /// Diagonalize modulo `m` (requires `gcd(2Δ, m) = 1`).
    pub fn diagonalize_mod(&self, m: &Poly) -> Result<(PolyMatrix, Vec<Poly>)> {
        diagonalize_matrix_mod(&self.gram, m)
    }

    /// Diagonalize over `O_∞` with entries tracked down to `t^prec`.
    pub fn diagonalize_oinf(&self, prec: i64) -> Result<(LaurentMatrix, Vec<TruncLaurent>)> {
        diagonalize_oinf(&self.gram_laurent(), prec)
    }

    /// The dual form `F*(x) = xᵀA^{-1}x`, stored as `adj(A)/det(A)`.
    pub fn dual(&self) -> DualForm {
        DualForm { adj: adjugate(&self.gram), det: det(&self.gram) }
    }
}

/// `F*(x) = xᵀ adj(A) x / det(A)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualForm {
    pub adj: PolyMatrix,
    pub det: Poly,
}

impl DualForm {
    /// Numerator `xᵀ adj(A) x` for polynomial vectors; `F*(x) = num/det`.
    pub fn numerator_poly(&self, x: &[Poly]) -> Poly {
        let ax = mat_vec(&self.adj, x);
        dot(x, &ax)
    }

    pub fn eval_laurent(&self, x: &[TruncLaurent], out_floor: i64) -> Result<TruncLaurent> {
        let p = self.det.p();
        let d = x.len();
        let mut num = TruncLaurent::zero(p);
        for i in 0..d {
            for j in 0..d {
                if !self.adj[i][j].is_zero() {
                    num = num.add(&TruncLaurent::from_poly(&self.adj[i][j]).mul(&x[i]).mul(&x[j]));
                }
            }
        }
        num.div(&TruncLaurent::from_poly(&self.det), out_floor)
    }
}

pub fn dot(x: &[Poly], y: &[Poly]) -> Poly {
    let p = x.first().map(|e| e.p()).unwrap_or(3);
    x.iter().zip(y).fold(Poly::zero(p), |acc, (a, b)| &acc + &(a * b))
}

pub fn mat_vec(m: &PolyMatrix, x: &[Poly]) -> Vec<Poly> {
    m.iter().map(|row| dot(row, x)).collect()
}

pub fn mat_mul(a: &PolyMatrix, b: &PolyMatrix) -> PolyMatrix {
    let n = a.len();
    let k = b.len();
    let m = b.first().map(|r| r.len()).unwrap_or(0);
    let p = a[0][0].p();
    let mut out = vec![vec![Poly::zero(p); m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = Poly::zero(p);
            for l in 0..k {
                if !a[i][l].is_zero() && !b[l][j].is_zero() {
                    s = &s + &(&a[i][l] * &b[l][j]);
                }
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose<T: Clone>(a: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = a.len();
    let m = a.first().map(|r| r.len()).unwrap_or(0);
    (0..m).map(|j| (0..n).map(|i| a[i][j].clone()).collect()).collect()
}

/// Determinant by cofactor expansion (the dimensions here are tiny).
pub fn det(m: &PolyMatrix) -> Poly {
    let n = m.len();
    let p = m[0][0].p();
    match n {
        1 => return m[0][0].clone(),
        2 => return &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        _ => {}
    }
    let mut acc = Poly::zero(p);
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor = minor(m, 0, j);
        let term = &m[0][j] * &det(&minor);
        acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

fn minor(m: &PolyMatrix, r: usize, c: usize) -> PolyMatrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, e)| e.clone()).collect())
        .collect()
}

/// Adjugate matrix, so that `A·adj(A) = det(A)·I`.
pub fn adjugate(m: &PolyMatrix) -> PolyMatrix {
    let n = m.len();
    let p = m[0][0].p();
    if n == 1 {
        return vec![vec![Poly::one(p)]];
    }
    let mut out = vec![vec![Poly::zero(p); n]; n];
    for i in 0..n {
        for j in 0..n {
            let c = det(&minor(m, i, j));
            out[j][i] = if (i + j) % 2 == 0 { c } else { -&c };
        }
    }
    out
}

/// Symmetric elimination modulo `m`: returns `U` and `α` with
/// `UᵀBU ≡ diag(α) mod m`. Pivots on the first unit diagonal entry; failing
/// that, on the first unit off-diagonal entry symmetrized by `x_i ↦ x_i + x_j`.
/// When `m` is not a prime power that rule can stall, in which case the
/// diagonalization is done modulo each prime power and glued by CRT.
pub fn diagonalize_matrix_mod(b: &PolyMatrix, m: &Poly) -> Result<(PolyMatrix, Vec<Poly>)> {
    let p = m.p();
    let d = b.len();
    let two = Fq::unchecked(p).reduce(2);
    let disc = det(&b.iter().map(|row| row.iter().map(|e| e.scale(two)).collect()).collect());
    if !disc.is_coprime(m) {
        return Err(Error::NotCoprime(format!("discriminant {disc} is not invertible modulo {m}")));
    }
    let m = m.monic();
    if m.is_one() {
        let u = identity(p, d);
        return Ok((u, vec![Poly::zero(p); d]));
    }
    if let Some(res) = diag_mod_pivot(b, &m) {
        return Ok(res);
    }
    let parts: Vec<(Poly, (PolyMatrix, Vec<Poly>))> = factor(&m)
        .into_iter()
        .map(|(w, e)| {
            let pe = w.pow(e as u64);
            let r = diag_mod_pivot(b, &pe).expect("pivoting succeeds over a local ring");
            (pe, r)
        })
        .collect();
    let mut u = identity(p, d);
    for i in 0..d {
        for j in 0..d {
            let congr: Vec<(Poly, Poly)> = parts.iter().map(|(pe, (uu, _))| (uu[i][j].clone(), pe.clone())).collect();
            u[i][j] = crt(&congr)?;
        }
    }
    let alpha = (0..d)
        .map(|i| {
            let congr: Vec<(Poly, Poly)> = parts.iter().map(|(pe, (_, a))| (a[i].clone(), pe.clone())).collect();
            crt(&congr)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((u, alpha))
}

fn identity(p: u32, d: usize) -> PolyMatrix {
    (0..d).map(|i| (0..d).map(|j| if i == j { Poly::one(p) } else { Poly::zero(p) }).collect()).collect()
}

fn diag_mod_pivot(b: &PolyMatrix, m: &Poly) -> Option<(PolyMatrix, Vec<Poly>)> {
    let p = m.p();
    let d = b.len();
    let red = |x: &Poly| x.rem(m);
    let mut bb: PolyMatrix = b.iter().map(|row| row.iter().map(red).collect()).collect();
    let mut u = identity(p, d);
    let unit = |x: &Poly| !x.is_zero() && x.is_coprime(m);
    // column operation col_i += c·col_j on U, and the congruence on B
    let add_col = |bb: &mut PolyMatrix, u: &mut PolyMatrix, i: usize, j: usize, c: &Poly| {
        for row in u.iter_mut() {
            let v = &row[i] + &(c * &row[j]);
            row[i] = v.rem(m);
        }
        for row in bb.iter_mut() {
            let v = &row[i] + &(c * &row[j]);
            row[i] = v.rem(m);
        }
        for k in 0..bb.len() {
            let v = &bb[i][k] + &(c * &bb[j][k]);
            bb[i][k] = v.rem(m);
        }
    };
    let swap = |bb: &mut PolyMatrix, u: &mut PolyMatrix, i: usize, j: usize| {
        if i == j {
            return;
        }
        for row in u.iter_mut() {
            row.swap(i, j);
        }
        bb.swap(i, j);
        for row in bb.iter_mut() {
            row.swap(i, j);
        }
    };
    for k in 0..d {
        let piv = (k..d).find(|&i| unit(&bb[i][i]));
        match piv {
            Some(i) => swap(&mut bb, &mut u, k, i),
            None => {
                let mut done = false;
                'search: for i in k..d {
                    for j in (i + 1)..d {
                        if !unit(&bb[i][j]) {
                            continue;
                        }
                        for c in 1..p {
                            let cp = Poly::constant(p, c);
                            let cand = &(&bb[i][i] + &(&(&cp * &bb[i][j]).scale(2))) + &(&(&cp * &cp) * &bb[j][j]);
                            if unit(&cand.rem(m)) {
                                add_col(&mut bb, &mut u, i, j, &cp);
                                swap(&mut bb, &mut u, k, i);
                                done = true;
                                break 'search;
                            }
                        }
                    }
                }
                if !done {
                    return None;
                }
            }
        }
        let inv = bb[k][k].inv_mod(m)?;
        for j in (k + 1)..d {
            if bb[k][j].is_zero() {
                continue;
            }
            let c = (-&(&bb[k][j] * &inv)).rem(m);
            add_col(&mut bb, &mut u, j, k, &c);
        }
    }
    let alpha = (0..d).map(|i| bb[i][i].clone()).collect();
    Some((u, alpha))
}

/// `MᵀBM` reduced modulo `m`.
pub fn congruence_mod(b: &PolyMatrix, u: &PolyMatrix, m: &Poly) -> PolyMatrix {
    let prod = mat_mul(&transpose(u), &mat_mul(b, u));
    prod.iter().map(|row| row.iter().map(|e| e.rem(m)).collect()).collect()
}

/// Diagonalize a symmetric matrix over `O_∞`: returns `γ ∈ GL_d(O_∞)` and
/// `η` with `γᵀAγ = diag(η)` to precision `t^prec` (relative to the scale of
/// each stage). Each stage rescales the remaining block so that its largest
/// entry is a unit, pivots in the residue field, and clears the pivot row.
pub fn diagonalize_oinf(a: &LaurentMatrix, prec: i64) -> Result<(LaurentMatrix, Vec<TruncLaurent>)> {
    let d = a.len();
    let p = a[0][0].p();
    let fq = Fq::unchecked(p);
    let mut s = a.clone();
    let mut g: LaurentMatrix =
        (0..d).map(|i| (0..d).map(|j| if i == j { TruncLaurent::one(p) } else { TruncLaurent::zero(p) }).collect()).collect();
    let add_col = |s: &mut LaurentMatrix, g: &mut LaurentMatrix, i: usize, j: usize, c: &TruncLaurent| {
        for row in g.iter_mut() {
            let v = row[i].add(&c.mul(&row[j]));
            row[i] = v;
        }
        for row in s.iter_mut() {
            let v = row[i].add(&c.mul(&row[j]));
            row[i] = v;
        }
        for k in 0..s.len() {
            let v = s[i][k].add(&c.mul(&s[j][k]));
            s[i][k] = v;
        }
    };
    let swap = |s: &mut LaurentMatrix, g: &mut LaurentMatrix, i: usize, j: usize| {
        if i == j {
            return;
        }
        for row in g.iter_mut() {
            row.swap(i, j);
        }
        s.swap(i, j);
        for row in s.iter_mut() {
            row.swap(i, j);
        }
    };
    for k in 0..d {
        let mut top = None::<i64>;
        for i in k..d {
            for j in k..d {
                if let Some(t) = s[i][j].top() {
                    top = Some(top.map_or(t, |x: i64| x.max(t)));
                }
            }
        }
        let m = match top {
            Some(m) => m,
            None => {
                if (k..d).all(|i| (k..d).all(|j| s[i][j].is_zero())) {
                    return Err(Error::Degenerate("matrix is singular".into()));
                }
                return Err(Error::Precision("remaining block vanishes to the tracked precision".into()));
            }
        };
        let lead = |x: &TruncLaurent| if x.top() == Some(m) { x.lc() } else { 0 };
        if let Some(i) = (k..d).find(|&i| lead(&s[i][i]) != 0) {
            swap(&mut s, &mut g, k, i);
        } else {
            let (i, j) = (k..d)
                .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
                .find(|&(i, j)| lead(&s[i][j]) != 0)
                .expect("some entry attains the maximal degree");
            // The residue of the new diagonal entry is 2·s̄_ij ≠ 0.
            add_col(&mut s, &mut g, i, j, &TruncLaurent::one(p));
            swap(&mut s, &mut g, k, i);
        }
        debug_assert!(fq.inv(lead(&s[k][k])).is_some());
        let pivot = s[k][k].clone();
        for j in (k + 1)..d {
            if s[k][j].is_zero() {
                continue;
            }
            // |s_kj / s_kk| ≤ 1, so the quotient only needs the target precision.
            let c = s[k][j].div(&pivot, prec)?.neg();
            add_col(&mut s, &mut g, j, k, &c);
        }
    }
    let eta = (0..d).map(|i| s[i][i].clone()).collect();
    Ok((g, eta))
}

/// `γᵀAγ` over `K_∞`.
pub fn congruence_laurent(a: &LaurentMatrix, g: &LaurentMatrix) -> LaurentMatrix {
    let d = a.len();
    let p = a[0][0].p();
    let mul = |x: &LaurentMatrix, y: &LaurentMatrix| -> LaurentMatrix {
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).fold(TruncLaurent::zero(p), |acc, l| acc.add(&x[i][l].mul(&y[l][j]))))
                    .collect()
            })
            .collect()
    };
    mul(&transpose(g), &mul(a, g))
}

/// The square class of a nonzero element of `K_∞`: `K_∞^×/K_∞^{×2}` has the
/// four representatives `1, ν, t, νt`, read off from the parity of the degree
/// and the quadratic character of the leading coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SquareClass {
    One,
    Nu,
    T,
    NuT,
}

impl SquareClass {
    pub const ALL: [SquareClass; 4] = [SquareClass::One, SquareClass::Nu, SquareClass::T, SquareClass::NuT];

    pub fn of(x: &TruncLaurent) -> Result<Self> {
        let d = x.deg()?;
        if x.is_zero() {
            return Err(Error::InvalidInput("zero has no square class".into()));
        }
        let chi = x.field().chi(x.lc());
        Ok(match (d.rem_euclid(2), chi) {
            (0, 1) => SquareClass::One,
            (0, _) => SquareClass::Nu,
            (_, 1) => SquareClass::T,
            _ => SquareClass::NuT,
        })
    }

    fn parity(self) -> i64 {
        match self {
            SquareClass::One | SquareClass::Nu => 0,
            _ => 1,
        }
    }

    fn chi(self) -> i8 {
        match self {
            SquareClass::One | SquareClass::T => 1,
            _ => -1,
        }
    }
}

/// Shape of a cone predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeShape {
    /// `|F(Tx)| ≥ q^{-s}|Tx|²`.
    Anisotropic { slack: i64 },
    /// `deg x_i < deg x_index` for every `i ≠ index`.
    DominantCoordinate { index: usize },
}

/// A scale-invariant region of `K_∞^d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cone {
    pub transform: Option<LaurentMatrix>,
    pub shape: ConeShape,
    pub omega: i64,
    pub omega_prime: i64,
}

/// Default slack `s` in `|F(x)| ≥ q^{-s}|x|²`.
pub const DEFAULT_SLACK: i64 = 2;

/// Precision used for cone bookkeeping over `O_∞`.
pub const CONE_PREC: i64 = -24;

impl Cone {
    /// The anisotropic cone `|F(x)| ≥ q^{-s}|x|²` with `ω = s + max deg η + 1`
    /// and `ω′ = s`, where `η` is the `O_∞`-diagonalization of `F`.
    pub fn anisotropic(form: &QuadForm, slack: i64) -> Result<Self> {
        let (_, eta) = form.diagonalize_oinf(CONE_PREC)?;
        let max_eta = eta.iter().map(|e| e.deg()).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap_or(0);
        Ok(Cone {
            transform: None,
            shape: ConeShape::Anisotropic { slack },
            omega: slack + max_eta + 1,
            omega_prime: slack,
        })
    }

    pub fn dominant_coordinate(index: usize) -> Self {
        Cone { transform: None, shape: ConeShape::DominantCoordinate { index }, omega: 1, omega_prime: 0 }
    }

    fn transformed(&self, x: &[TruncLaurent]) -> Vec<TruncLaurent> {
        match &self.transform {
            None => x.to_vec(),
            Some(t) => t
                .iter()
                .map(|row| row.iter().zip(x).fold(TruncLaurent::zero(x[0].p()), |acc, (a, b)| acc.add(&a.mul(b))))
                .collect(),
        }
    }

    /// Membership of a Laurent vector.
    pub fn contains(&self, form: &QuadForm, x: &[TruncLaurent]) -> Result<bool> {
        let y = self.transformed(x);
        match self.shape {
            ConeShape::Anisotropic { slack } => {
                let dy = y.iter().map(|e| e.deg()).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap();
                if dy < -(1i64 << 40) {
                    return Ok(false);
                }
                let fy = form.eval_laurent(&y);
                let bound = 2 * dy - slack;
                match fy.top() {
                    Some(df) => Ok(df >= bound),
                    None if fy.is_exact() => Ok(false),
                    None if fy.floor() <= bound => Ok(false),
                    None => Err(Error::Precision(format!("F(x) vanishes to t^{} but the cone test needs t^{bound}", fy.floor()))),
                }
            }
            ConeShape::DominantCoordinate { index } => {
                let d0 = y[index].deg()?;
                if y[index].is_zero() {
                    return Ok(false);
                }
                Ok(y.iter().enumerate().all(|(i, e)| i == index || e.deg_upper() < d0))
            }
        }
    }

    pub fn contains_poly(&self, form: &QuadForm, x: &[Poly]) -> Result<bool> {
        let v: Vec<TruncLaurent> = x.iter().map(TruncLaurent::from_poly).collect();
        self.contains(form, &v)
    }
}

/// How a cone witness was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessSource {
    /// A standard basis vector whose diagonal coefficient is in the class.
    Coordinate,
    /// The explicit square-root construction used for sums of squares.
    Construction,
    /// Found by bounded search over small polynomial vectors.
    Search,
}

/// A cone together with a point in it whose value lies in `class`.
#[derive(Clone, Debug)]
pub struct ClassWitness {
    pub cone: Cone,
    pub witness: Vec<TruncLaurent>,
    pub source: WitnessSource,
}

/// Build a cone and a witness `x ∈ Ω` with `F(x)` in the requested square
/// class.
pub fn cone_for_class(form: &QuadForm, class: SquareClass) -> Result<ClassWitness> {
    let d = form.dim();
    if d < 4 {
        return Err(Error::InvalidInput("cone construction needs d >= 4".into()));
    }
    let cone = Cone::anisotropic(form, DEFAULT_SLACK)?;
    let p = form.p();
    let accept = |x: Vec<TruncLaurent>, source: WitnessSource| -> Result<Option<ClassWitness>> {
        let v = form.eval_laurent(&x);
        if v.is_zero_to_precision() || SquareClass::of(&v)? != class {
            return Ok(None);
        }
        if !cone.contains(form, &x)? {
            return Ok(None);
        }
        Ok(Some(ClassWitness { cone: cone.clone(), witness: x, source }))
    };
    let unit_vec = |i: usize| -> Vec<TruncLaurent> {
        (0..d).map(|j| if i == j { TruncLaurent::one(p) } else { TruncLaurent::zero(p) }).collect()
    };
    for i in 0..d {
        if let Some(w) = accept(unit_vec(i), WitnessSource::Coordinate)? {
            return Ok(w);
        }
    }
    if form.is_diagonal() {
        if let Some(w) = diagonal_construction(form, class, &accept)? {
            return Ok(w);
        }
    }
    for x in small_vectors(p, d, 2) {
        if x.iter().all(|e| e.is_zero()) {
            continue;
        }
        let v: Vec<TruncLaurent> = x.iter().map(TruncLaurent::from_poly).collect();
        if let Some(w) = accept(v, WitnessSource::Search)? {
            return Ok(w);
        }
    }
    Err(Error::InvalidInput(format!("no witness for class {class:?} found among vectors of degree <= 2")))
}

/// For a diagonal form with three constant unit coefficients `α_1, α_2, α_3`
/// (after reordering): pick `a, b` with `α_1a² + α_2b² = −α_3`; then
/// `(a t s, b t s, t, 0, …)` with `s = (1 + u/t)^{1/2}` has value `−α_3 u t`,
/// which covers both odd classes as `u` varies. For the even classes a
/// constant vector in the first two coordinates represents any constant.
fn diagonal_construction(
    form: &QuadForm,
    class: SquareClass,
    accept: &dyn Fn(Vec<TruncLaurent>, WitnessSource) -> Result<Option<ClassWitness>>,
) -> Result<Option<ClassWitness>> {
    let p = form.p();
    let fq = form.field();
    let d = form.dim();
    let consts: Vec<usize> = (0..d).filter(|&i| form.entry(i, i).deg() == 0).collect();
    if consts.len() < 3 {
        return Ok(None);
    }
    let (i1, i2, i3) = (consts[0], consts[1], consts[2]);
    let al = |i: usize| form.entry(i, i).coeff(0);
    let place = |vals: &[(usize, TruncLaurent)]| -> Vec<TruncLaurent> {
        let mut v = vec![TruncLaurent::zero(p); d];
        for (i, x) in vals {
            v[*i] = x.clone();
        }
        v
    };
    if class.parity() == 0 {
        for target in fq.units() {
            if fq.chi(target) != class.chi() {
                continue;
            }
            for a in fq.elements() {
                for b in fq.elements() {
                    let val = fq.add(fq.mul(al(i1), fq.mul(a, a)), fq.mul(al(i2), fq.mul(b, b)));
                    if val == target {
                        let x = place(&[(i1, TruncLaurent::monomial(p, a, 0)), (i2, TruncLaurent::monomial(p, b, 0))]);
                        if let Some(w) = accept(x, WitnessSource::Construction)? {
                            return Ok(Some(w));
                        }
                    }
                }
            }
        }
        return Ok(None);
    }
    let minus_a3 = fq.neg(al(i3));
    for a in fq.elements() {
        for b in fq.elements() {
            let val = fq.add(fq.mul(al(i1), fq.mul(a, a)), fq.mul(al(i2), fq.mul(b, b)));
            if val != minus_a3 {
                continue;
            }
            for u in fq.units() {
                // s = (1 + u t^{-1})^{1/2}
                let one_plus = TruncLaurent::one(p).add(&TruncLaurent::monomial(p, u, -1));
                let s = one_plus.sqrt(CONE_PREC)?;
                let ts = s.shift(1);
                let x = place(&[(i1, ts.scale(a)), (i2, ts.scale(b)), (i3, TruncLaurent::monomial(p, 1, 1))]);
                if let Some(w) = accept(x, WitnessSource::Construction)? {
                    return Ok(Some(w));
                }
            }
        }
    }
    Ok(None)
}

/// All vectors of polynomials of degree `≤ deg` in `d` coordinates, in a
/// deterministic order (small total size first).
pub fn small_vectors(p: u32, d: usize, deg: usize) -> impl Iterator<Item = Vec<Poly>> {
    let per = (p as u64).pow(deg as u32 + 1);
    let total = per.pow(d as u32);
    (0..total).map(move |mut idx| {
        let mut v = Vec::with_capacity(d);
        for _ in 0..d {
            v.push(Poly::from_index(p, idx % per, deg + 1));
            idx /= per;
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: &str) -> Poly {
        Poly::parse(s, 3).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let f = QuadForm::sum_of_squares(3, 4).unwrap();
        assert_eq!(f.eval_poly(&[pp("1"), pp("0"), pp("0"), pp("0")]), pp("1"));
        let m = QuadForm::morgenstern(3, 2).unwrap();
        assert_eq!(m.eval_poly(&[pp("1"), pp("0"), pp("1"), pp("1")]), pp("t"));
        assert!(m.eval_poly(&[pp("0"), pp("0"), pp("0"), pp("0")]).is_zero());
        // Δ = det(2I) = 16 = 1 mod 3
        assert_eq!(f.disc(), pp("1"));
    }

    #[test]
    fn diagonalization_mod_examples() {
        let f = QuadForm::new(3, vec![vec![pp("0"), pp("1")], vec![pp("1"), pp("0")]]).unwrap();
        let m = pp("t^2+1");
        let (u, alpha) = f.diagonalize_mod(&m).unwrap();
        let dd = congruence_mod(f.gram(), &u, &m);
        for i in 0..2 {
            for j in 0..2 {
                if i == j {
                    assert_eq!(dd[i][i], alpha[i]);
                } else {
                    assert!(dd[i][j].is_zero());
                }
            }
        }
        assert!(det(&u).is_coprime(&m));
        let g = QuadForm::sum_of_squares(3, 3).unwrap();
        let (u, _) = g.diagonalize_mod(&m).unwrap();
        assert_eq!(u, identity(3, 3));
    }

    #[test]
    fn diagonalization_oinf_examples() {
        let f = QuadForm::new(3, vec![vec![pp("1"), pp("1")], vec![pp("1"), pp("2")]]).unwrap();
        let (g, eta) = f.diagonalize_oinf(-10).unwrap();
        assert_eq!(eta[0], TruncLaurent::one(3));
        let dd = congruence_laurent(&f.gram_laurent(), &g);
        assert!(dd[0][1].is_zero_to_precision() && dd[1][0].is_zero_to_precision());
    }

    #[test]
    fn cone_examples() {
        let f = QuadForm::sum_of_squares(3, 4).unwrap();
        let c = Cone::anisotropic(&f, 2).unwrap();
        let x: Vec<TruncLaurent> = ["t^3", "0", "0", "0"].iter().map(|s| TruncLaurent::parse(s, 3).unwrap()).collect();
        assert!(c.contains(&f, &x).unwrap());
        let g = QuadForm::diagonal(3, &[pp("1"), pp("1"), pp("2"), pp("2")]).unwrap();
        let y: Vec<TruncLaurent> = ["1", "0", "1", "0"].iter().map(|s| TruncLaurent::parse(s, 3).unwrap()).collect();
        assert!(!Cone::anisotropic(&g, 2).unwrap().contains(&g, &y).unwrap());
    }

    #[test]
    fn class_witnesses() {
        let f5 = QuadForm::sum_of_squares(3, 5).unwrap();
        let w = cone_for_class(&f5, SquareClass::One).unwrap();
        assert_eq!(w.source, WitnessSource::Coordinate);
        assert_eq!(w.witness[0], TruncLaurent::one(3));
        let f4 = QuadForm::sum_of_squares(3, 4).unwrap();
        for class in SquareClass::ALL {
            let w = cone_for_class(&f4, class).unwrap();
            assert_eq!(SquareClass::of(&f4.eval_laurent(&w.witness)).unwrap(), class);
            assert!(w.cone.contains(&f4, &w.witness).unwrap());
        }
        assert_eq!(cone_for_class(&f4, SquareClass::NuT).unwrap().source, WitnessSource::Construction);
        let g = QuadForm::diagonal(3, &[pp("1"), pp("1"), pp("1"), pp("t")]).unwrap();
        assert_eq!(cone_for_class(&g, SquareClass::T).unwrap().source, WitnessSource::Coordinate);
    }
}
