//! Morgenstern's Ramanujan graphs for odd `q`.
//!
//! The quaternion algebra over `F_q(t)` has basis `1, i, j, ij` with
//! `i² = ν` (a non-square in `F_q`), `j² = t − 1` and `ij = −ji`. The `q + 1`
//! elements `1 + cj + dij` with `νd² − c² = 1` have norm `t`; they generate
//! `Λ(t−1)` and the Cayley graph of `Λ(t−1)/Λ(g)` with respect to them is a
//! `(q+1)`-regular Ramanujan graph. Vertices are kept as quaternions modulo
//! `g` up to scalars, which avoids writing down the splitting map to `PGL₂`.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basefield::{Fq, FqElem};
use crate::error::{guard, Error, Result};
use crate::polyring::{is_irreducible, Poly, ResidueRing};
use crate::DEFAULT_FEASIBILITY_CAP;

/// `a + b·i + c·j + d·ij`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Quaternion {
    pub a: Poly,
    pub b: Poly,
    pub c: Poly,
    pub d: Poly,
    pub nu: FqElem,
}

impl Quaternion {
    pub fn new(a: Poly, b: Poly, c: Poly, d: Poly, nu: FqElem) -> Self {
        Quaternion { a, b, c, d, nu }
    }

    pub fn from_vec(x: &[Poly], nu: FqElem) -> Self {
        Quaternion::new(x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone(), nu)
    }

    pub fn one(p: u32, nu: FqElem) -> Self {
        Quaternion::scalar(Poly::one(p), nu)
    }

    pub fn scalar(a: Poly, nu: FqElem) -> Self {
        let z = Poly::zero(a.p());
        Quaternion::new(a, z.clone(), z.clone(), z, nu)
    }

    pub fn p(&self) -> u32 {
        self.a.p()
    }

    pub fn coords(&self) -> [&Poly; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn to_vec(&self) -> Vec<Poly> {
        self.coords().into_iter().cloned().collect()
    }

    fn tau(&self) -> Poly {
        Poly::from_i64(self.p(), &[-1, 1])
    }

    pub fn mul(&self, o: &Quaternion) -> Quaternion {
        assert_eq!(self.nu, o.nu, "quaternions over different algebras");
        let tau = self.tau();
        let nu = self.nu;
        let (a1, b1, c1, d1) = (&self.a, &self.b, &self.c, &self.d);
        let (a2, b2, c2, d2) = (&o.a, &o.b, &o.c, &o.d);
        // i² = ν, j² = τ, (ij)² = −ντ, j·ij = −τi, ij·j = τi, i·ij = νj, ij·i = −νj
        let a = &(&(a1 * a2) + &(b1 * b2).scale(nu)) + &(&(&(c1 * c2) - &(d1 * d2).scale(nu)) * &tau);
        let b = &(&(a1 * b2) + &(b1 * a2)) + &(&(&(d1 * c2) - &(c1 * d2)) * &tau);
        let c = &(&(a1 * c2) + &(c1 * a2)) + &(&(b1 * d2) - &(d1 * b2)).scale(nu);
        let d = &(&(a1 * d2) + &(d1 * a2)) + &(&(b1 * c2) - &(c1 * b2));
        Quaternion::new(a, b, c, d, nu)
    }

    pub fn conj(&self) -> Quaternion {
        Quaternion::new(self.a.clone(), -&self.b, -&self.c, -&self.d, self.nu)
    }

    /// `N(ξ) = a² − νb² + (νd² − c²)(t − 1)`.
    pub fn norm(&self) -> Poly {
        let nu = self.nu;
        let head = &(&self.a * &self.a) - &(&self.b * &self.b).scale(nu);
        let tail = &(&self.d * &self.d).scale(nu) - &(&self.c * &self.c);
        &head + &(&tail * &self.tau())
    }

    pub fn reduce(&self, m: &Poly) -> Quaternion {
        Quaternion::new(self.a.rem(m), self.b.rem(m), self.c.rem(m), self.d.rem(m), self.nu)
    }
}

fn check_nu(q: u32, nu: FqElem) -> Result<Fq> {
    let fq = Fq::new(q)?;
    if q == 2 {
        return Err(Error::InvalidInput("the construction needs odd q".into()));
    }
    if nu == 0 || nu >= q || fq.chi(nu) != -1 {
        return Err(Error::InvalidInput(format!("nu = {nu} is not a non-square mod {q}")));
    }
    Ok(fq)
}

/// The `q + 1` elements `1 + cj + dij` with `νd² − c² = 1`, in
/// lexicographic order of `(c, d)`.
pub fn basic_generators(q: u32, nu: FqElem) -> Result<Vec<Quaternion>> {
    let fq = check_nu(q, nu)?;
    let mut out = Vec::new();
    for c in 0..q {
        for d in 0..q {
            if fq.sub(fq.mul(nu, fq.mul(d, d)), fq.mul(c, c)) == 1 {
                let z = Poly::zero(q);
                out.push(Quaternion::new(Poly::one(q), z.clone(), Poly::constant(q, c), Poly::constant(q, d), nu));
            }
        }
    }
    Ok(out)
}

/// Product of the generators indexed by `word`, left to right.
pub fn word_product(gens: &[Quaternion], word: &[usize]) -> Quaternion {
    let start = Quaternion::one(gens[0].p(), gens[0].nu);
    word.iter().fold(start, |acc, &w| acc.mul(&gens[w]))
}

/// Membership in `Λ(t−1)`: `a − 1 ≡ b ≡ 0 mod (t − 1)`, the norm is a power of
/// `t`, and `t` does not divide every coordinate.
pub fn lambda_membership(x: &Quaternion) -> bool {
    let p = x.p();
    let tau = x.tau();
    let t = Poly::t(p);
    let cong = (&x.a - &Poly::one(p)).rem(&tau).is_zero() && x.b.rem(&tau).is_zero();
    let n = x.norm();
    let power_of_t = !n.is_zero() && n.is_monic() && n.coeffs().iter().rev().skip(1).all(|&c| c == 0);
    let primitive = x.coords().iter().any(|c| !c.rem(&t).is_zero());
    cong && power_of_t && primitive
}

/// A regular multigraph stored as a flat adjacency array with `degree`
/// slots per vertex.
#[derive(Clone, Debug)]
pub struct Graph {
    degree: usize,
    adjacency: Vec<u32>,
}

impl Graph {
    pub fn from_adjacency(degree: usize, adjacency: Vec<u32>) -> Result<Self> {
        if degree == 0 || adjacency.len() % degree != 0 {
            return Err(Error::InvalidInput("adjacency length is not a multiple of the degree".into()));
        }
        let n = (adjacency.len() / degree) as u32;
        if adjacency.iter().any(|&v| v >= n) {
            return Err(Error::InvalidInput("neighbour index out of range".into()));
        }
        Ok(Graph { degree, adjacency })
    }

    /// The complete graph `K_n`.
    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(|v| v as u32)).collect();
        Graph { degree: n - 1, adjacency }
    }

    /// The cycle `C_n`.
    pub fn cycle(n: usize) -> Self {
        let adjacency = (0..n).flat_map(|u| [((u + n - 1) % n) as u32, ((u + 1) % n) as u32]).collect();
        Graph { degree: 2, adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len() / self.degree
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v * self.degree..(v + 1) * self.degree]
    }

    /// Every edge `u → v` is matched by as many edges `v → u`.
    pub fn is_symmetric(&self) -> bool {
        let mut count: HashMap<(u32, u32), i64> = HashMap::new();
        for u in 0..self.vertex_count() {
            for &v in self.neighbors(u) {
                *count.entry((u as u32, v)).or_default() += 1;
                *count.entry((v, u as u32)).or_default() -= 1;
            }
        }
        count.values().all(|&c| c == 0)
    }

    /// Number of vertices at each distance from `src`.
    pub fn bfs_profile(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        let mut profile = vec![1];
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                let v = v as usize;
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    let h = dist[v] as usize;
                    if profile.len() <= h {
                        profile.push(0);
                    }
                    profile[h] += 1;
                    queue.push_back(v);
                }
            }
        }
        profile
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() == 0 || self.bfs_profile(0).iter().sum::<usize>() == self.vertex_count()
    }

    pub fn eccentricity(&self, src: usize) -> usize {
        self.bfs_profile(src).len() - 1
    }

    /// A proper 2-colouring if one exists.
    pub fn bipartition(&self) -> Option<Vec<bool>> {
        let n = self.vertex_count();
        let mut colour: Vec<Option<bool>> = vec![None; n];
        for s in 0..n {
            if colour[s].is_some() {
                continue;
            }
            colour[s] = Some(false);
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                let cu = colour[u].unwrap();
                for &v in self.neighbors(u) {
                    match colour[v as usize] {
                        None => {
                            colour[v as usize] = Some(!cu);
                            queue.push_back(v as usize);
                        }
                        Some(cv) if cv == cu => return None,
                        _ => {}
                    }
                }
            }
        }
        Some(colour.into_iter().map(|c| c.unwrap()).collect())
    }

    /// Each undirected edge once as `(u, v)` with `u ≤ v`; loops appear once
    /// per pair of slots.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.adjacency.len() / 2);
        let mut loops = 0usize;
        for u in 0..self.vertex_count() {
            for &v in self.neighbors(u) {
                if (u as u32) < v {
                    out.push((u as u32, v));
                } else if u as u32 == v {
                    loops += 1;
                    if loops % 2 == 0 {
                        out.push((v, v));
                    }
                }
            }
        }
        out
    }

    pub fn write_edges<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (u, o) in out.iter_mut().enumerate() {
            *o = self.neighbors(u).iter().map(|&v| x[v as usize]).sum();
        }
    }
}

/// Remove the components along the trivial eigenvectors: the constants and,
/// for a bipartite graph, the ±1 vector of the bipartition.
fn deflate(x: &mut [f64], sign: Option<&[f64]>) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= mean);
    if let Some(s) = sign {
        let dot = x.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() / n;
        x.iter_mut().zip(s).for_each(|(v, b)| *v -= dot * b);
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Power-iteration estimate of the largest `|λ|` of the adjacency operator
/// away from the trivial eigenvalues `±k`. The estimate approaches the true
/// value from below.
pub fn spectral_gap_estimate(graph: &Graph, iterations: usize, seed: u64) -> Result<f64> {
    if iterations == 0 {
        return Err(Error::InvalidInput("at least one iteration is needed".into()));
    }
    let n = graph.vertex_count();
    if n < 3 {
        return Err(Error::Degenerate("graph too small for a nontrivial eigenvalue".into()));
    }
    let sign: Option<Vec<f64>> = graph.bipartition().map(|c| c.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n];
    deflate(&mut x, sign.as_deref());
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let nx = norm2(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        graph.apply(&x, &mut y);
        deflate(&mut y, sign.as_deref());
        estimate = norm2(&y);
        std::mem::swap(&mut x, &mut y);
    }
    Ok(estimate)
}

/// Eccentricity of the identity vertex, which is the diameter because a
/// Cayley graph is vertex-transitive.
pub fn diameter_bfs(graph: &Graph) -> Result<usize> {
    if !graph.is_connected() {
        return Err(Error::InvalidInput("graph is not connected".into()));
    }
    Ok(graph.eccentricity(0))
}

/// The Cayley graph of `Λ(t−1)/Λ(g)`. Vertex `0` is the identity and
/// `labels[v]` holds the normalized residues `(a, b, c, d) mod g`.
#[derive(Clone, Debug)]
pub struct CayleyGraph {
    pub q: u32,
    pub nu: FqElem,
    pub g: Poly,
    pub generators: Vec<Quaternion>,
    pub labels: Vec<[Poly; 4]>,
    pub graph: Graph,
}

/// Scale so that the first nonzero coordinate is `1`.
fn normalize(x: &Quaternion, ring: &ResidueRing) -> Result<[Poly; 4]> {
    let r = [ring.reduce(&x.a), ring.reduce(&x.b), ring.reduce(&x.c), ring.reduce(&x.d)];
    let lead = r.iter().find(|c| !c.is_zero()).ok_or_else(|| Error::Degenerate("quaternion vanishes mod g".into()))?;
    let inv = ring.inv(lead).ok_or_else(|| Error::NotCoprime("leading residue is not a unit".into()))?;
    Ok([ring.mul(&r[0], &inv), ring.mul(&r[1], &inv), ring.mul(&r[2], &inv), ring.mul(&r[3], &inv)])
}

pub fn build_cayley(g: &Poly, q: u32, nu: FqElem) -> Result<CayleyGraph> {
    check_nu(q, nu)?;
    if g.p() != q {
        return Err(Error::InvalidInput(format!("g is over F_{}, expected F_{q}", g.p())));
    }
    let g = g.monic();
    if !is_irreducible(&g) {
        return Err(Error::InvalidInput(format!("g = {g} is not irreducible")));
    }
    let t = Poly::t(q);
    let t1 = Poly::from_i64(q, &[-1, 1]);
    if !g.is_coprime(&(&t * &t1)) {
        return Err(Error::NotCoprime(format!("g = {g} shares a factor with t(t - 1)")));
    }
    let m = g.deg() as u32;
    let expected = (q as u128).checked_pow(3 * m).unwrap_or(u128::MAX);
    guard(expected, DEFAULT_FEASIBILITY_CAP)?;
    let ring = ResidueRing::new(&g)?;
    let generators = basic_generators(q, nu)?;
    let k = generators.len();
    let key = |x: &[Poly; 4]| -> [usize; 4] { [0, 1, 2, 3].map(|i| x[i].to_index() as usize) };
    let identity = normalize(&Quaternion::one(q, nu), &ring)?;
    let mut index: HashMap<[usize; 4], u32> = HashMap::new();
    let mut labels = vec![identity.clone()];
    index.insert(key(&identity), 0);
    let mut adjacency: Vec<u32> = Vec::new();
    let mut next = 0usize;
    while next < labels.len() {
        let v = Quaternion::from_vec(&labels[next], nu);
        for s in &generators {
            let w = normalize(&v.mul(s), &ring)?;
            let id = match index.get(&key(&w)) {
                Some(&id) => id,
                None => {
                    let id = labels.len() as u32;
                    index.insert(key(&w), id);
                    labels.push(w);
                    id
                }
            };
            adjacency.push(id);
        }
        next += 1;
    }
    Ok(CayleyGraph { q, nu, g, generators, labels, graph: Graph::from_adjacency(k, adjacency)? })
}

/// Summary of a built graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphStats {
    pub q: u32,
    pub nu: FqElem,
    pub g: String,
    pub vertices: usize,
    pub degree: usize,
    /// `q^{3m} − q^m` for `m = deg g`, the order of `PGL₂(F_{q^m})`.
    pub pgl_order: u128,
    pub symmetric: bool,
    pub connected: bool,
    pub bipartite: bool,
    pub diameter: usize,
    pub profile: Vec<usize>,
    pub gap_estimate: f64,
    /// `2√(k−1)`.
    pub ramanujan_bound: f64,
    /// `diameter / log_{k−1} |V|`.
    pub bound_ratio: f64,
}

pub fn graph_stats(cg: &CayleyGraph, iterations: usize, seed: u64) -> Result<GraphStats> {
    let gr = &cg.graph;
    let n = gr.vertex_count();
    let m = cg.g.deg() as u32;
    let q = cg.q as u128;
    let diameter = diameter_bfs(gr)?;
    let base = (gr.degree() - 1) as f64;
    Ok(GraphStats {
        q: cg.q,
        nu: cg.nu,
        g: cg.g.to_string(),
        vertices: n,
        degree: gr.degree(),
        pgl_order: q.pow(3 * m) - q.pow(m),
        symmetric: gr.is_symmetric(),
        connected: gr.is_connected(),
        bipartite: gr.bipartition().is_some(),
        diameter,
        profile: gr.bfs_profile(0),
        gap_estimate: spectral_gap_estimate(gr, iterations, seed)?,
        ramanujan_bound: 2.0 * base.sqrt(),
        bound_ratio: diameter as f64 / (n as f64).ln() * base.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(s: &str) -> Poly {
        Poly::parse(s, 3).unwrap()
    }

    #[test]
    fn defining_relations() {
        let z = pp("0");
        let o = pp("1");
        let i = Quaternion::new(z.clone(), o.clone(), z.clone(), z.clone(), 2);
        let j = Quaternion::new(z.clone(), z.clone(), o.clone(), z.clone(), 2);
        let ij = Quaternion::new(z.clone(), z.clone(), z.clone(), o.clone(), 2);
        assert_eq!(i.mul(&i), Quaternion::scalar(pp("2"), 2));
        assert_eq!(j.mul(&j), Quaternion::scalar(pp("t+2"), 2));
        assert_eq!(i.mul(&j), ij);
        assert_eq!(j.mul(&i), ij.mul(&Quaternion::scalar(pp("2"), 2)));
    }
}
