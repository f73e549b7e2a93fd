use fq_circle::circle::{make_weight_with, n_direct};
use fq_circle::expsums::Instance;
use fq_circle::morgenstern::*;
use fq_circle::quadform::Cone;
use fq_circle::{Poly, QuadForm, TruncLaurent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NU: u32 = 2;

fn pp(s: &str) -> Poly {
    Poly::parse(s, 3).unwrap()
}

fn random_quat(rng: &mut ChaCha8Rng, deg: usize) -> Quaternion {
    let mut c = || Poly::new(3, (0..=deg).map(|_| rng.gen_range(0..3)).collect());
    Quaternion::new(c(), c(), c(), c(), NU)
}

/// Oracle product: expand over basis words in `i`, `j` and rewrite with
/// `ii = ν`, `jj = t − 1`, `ji = −ij` until every word is `1, i, j` or `ij`.
fn word_product_oracle(x: &Quaternion, y: &Quaternion) -> Quaternion {
    let basis: [&[char]; 4] = [&[], &['i'], &['j'], &['i', 'j']];
    let tau = pp("t+2");
    let mut out = vec![pp("0"); 4];
    for (u, cu) in basis.iter().zip(x.coords()) {
        for (v, cv) in basis.iter().zip(y.coords()) {
            let mut word: Vec<char> = u.iter().chain(v.iter()).copied().collect();
            let mut coef = cu * cv;
            loop {
                let pos = word.windows(2).position(|w| w == ['i', 'i'] || w == ['j', 'j'] || w == ['j', 'i']);
                let Some(k) = pos else { break };
                match (word[k], word[k + 1]) {
                    ('i', 'i') => {
                        coef = coef.scale(NU);
                        word.drain(k..k + 2);
                    }
                    ('j', 'j') => {
                        coef = &coef * &tau;
                        word.drain(k..k + 2);
                    }
                    _ => {
                        coef = -&coef;
                        word.swap(k, k + 1);
                    }
                }
            }
            let slot = basis.iter().position(|b| *b == word.as_slice()).unwrap();
            out[slot] = &out[slot] + &coef;
        }
    }
    Quaternion::from_vec(&out, NU)
}

#[test]
fn multiplication_matches_word_rewriting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = random_quat(&mut rng, 2);
        let y = random_quat(&mut rng, 2);
        assert_eq!(x.mul(&y), word_product_oracle(&x, &y));
    }
}

#[test]
fn unit_and_relations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_quat(&mut rng, 2);
    assert_eq!(x.mul(&Quaternion::one(3, NU)), x);
    let z = pp("0");
    let o = pp("1");
    let i = Quaternion::new(z.clone(), o.clone(), z.clone(), z.clone(), NU);
    let j = Quaternion::new(z.clone(), z.clone(), o.clone(), z.clone(), NU);
    let ij = Quaternion::new(z.clone(), z.clone(), z.clone(), o.clone(), NU);
    assert_eq!(i.mul(&j), ij);
    assert_eq!(j.mul(&i), Quaternion::new(z.clone(), z.clone(), z, pp("2"), NU));
}

#[test]
fn norm_is_multiplicative_and_matches_the_form() {
    let form = QuadForm::morgenstern(3, NU).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = random_quat(&mut rng, 2);
        let y = random_quat(&mut rng, 2);
        assert_eq!(x.mul(&y).norm(), &x.norm() * &y.norm());
        assert_eq!(x.mul(&x.conj()), Quaternion::scalar(x.norm(), NU));
        assert_eq!(form.eval_poly(&x.to_vec()), x.norm());
    }
    let x = Quaternion::from_vec(&[pp("1"), pp("0"), pp("1"), pp("1")], NU);
    assert_eq!(x.norm(), pp("t"));
}

#[test]
fn basic_generators_for_small_q() {
    let gens = basic_generators(3, NU).unwrap();
    let cd: Vec<(u32, u32)> = gens.iter().map(|g| (g.c.coeff(0), g.d.coeff(0))).collect();
    assert_eq!(cd, vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
    for g in &gens {
        assert_eq!(g.norm(), pp("t"));
        assert!(lambda_membership(g));
        assert!(gens.contains(&g.conj()));
    }
    for (q, nu) in [(5, 2), (7, 3)] {
        assert_eq!(basic_generators(q, nu).unwrap().len(), q as usize + 1);
    }
    assert!(basic_generators(3, 1).is_err());
}

#[test]
fn lambda_membership_cases() {
    let gens = basic_generators(3, NU).unwrap();
    assert!(lambda_membership(&gens[0].mul(&gens[1])));
    // a generator times its conjugate is t·1
    assert!(!lambda_membership(&gens[0].mul(&gens[3])));
    assert!(lambda_membership(&word_product(&gens, &[0, 1, 1, 0, 0])));
    assert!(!lambda_membership(&Quaternion::scalar(pp("t"), NU)));
    assert!(lambda_membership(&Quaternion::one(3, NU)));
    let off = Quaternion::new(pp("1"), pp("1"), pp("0"), pp("0"), NU);
    assert!(!lambda_membership(&off));
}

#[test]
fn graph_for_t_squared_plus_one() {
    let cg = build_cayley(&pp("t^2+1"), 3, NU).unwrap();
    let s = graph_stats(&cg, 500, 1).unwrap();
    assert!([720, 360].contains(&s.vertices));
    assert_eq!(s.vertices, 360);
    assert_eq!(s.degree, 4);
    assert!(s.symmetric && s.connected);
    assert_eq!(s.diameter, 8);
    assert!(s.diameter as f64 <= 2.0 * (s.vertices as f64).log(3.0) + 4.0);
    assert!(s.gap_estimate <= 2.0 * 3f64.sqrt() + 0.05, "{}", s.gap_estimate);
    assert_eq!(s.profile, vec![1, 4, 12, 32, 84, 150, 72, 4, 1]);
    // the sphere sizes grow like the free group until the graph wraps round
    assert_eq!(&s.profile[..3], &[1, 4, 12]);
    for v in [0, 17, 359] {
        assert_eq!(cg.graph.eccentricity(v), 8);
    }
}

#[test]
fn graph_for_a_cubic_modulus() {
    let start = std::time::Instant::now();
    let cg = build_cayley(&pp("t^3+2*t+1"), 3, NU).unwrap();
    let s = graph_stats(&cg, 300, 1).unwrap();
    assert!(start.elapsed().as_secs() < 600);
    assert!([19656, 9828].contains(&s.vertices));
    assert_eq!(s.degree, 4);
    assert!(s.symmetric && s.connected);
    assert_eq!(s.diameter, 12);
    assert!(s.diameter as f64 <= 2.0 * (s.vertices as f64).log(3.0) + 4.0);
    assert!(s.diameter as f64 <= 2.5 * (s.vertices as f64).log(3.0) + 8.0);
    assert!(s.gap_estimate <= 2.0 * 3f64.sqrt() + 0.05, "{}", s.gap_estimate);
}

#[test]
fn bad_moduli_are_rejected() {
    assert!(build_cayley(&pp("t^2+t"), 3, NU).is_err());
    assert!(build_cayley(&pp("t+2"), 3, NU).is_err());
    assert!(build_cayley(&pp("t^2+2*t+1"), 3, NU).is_err());
    assert!(build_cayley(&pp("t^2+1"), 3, 1).is_err());
}

#[test]
fn fixtures() {
    assert_eq!(diameter_bfs(&Graph::complete(5)).unwrap(), 1);
    let c = Graph::cycle(10);
    let est = spectral_gap_estimate(&c, 500, 1).unwrap();
    assert!((est - 2.0 * (2.0 * std::f64::consts::PI / 10.0).cos()).abs() < 1e-3);
    assert_eq!(diameter_bfs(&c).unwrap(), 5);
    assert!(spectral_gap_estimate(&c, 0, 1).is_err());
}

#[test]
fn edge_export_lists_each_edge_once() {
    let cg = build_cayley(&pp("t^2+1"), 3, NU).unwrap();
    let mut buf = Vec::new();
    cg.graph.write_edges(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 360 * 4 / 2);
    let (u, v): (u32, u32) = {
        let mut it = lines[0].split(' ').map(|x| x.parse().unwrap());
        (it.next().unwrap(), it.next().unwrap())
    };
    assert!(u <= v && cg.graph.neighbors(u as usize).contains(&v));
}

#[test]
fn weight_from_a_generator_product() {
    let gens = basic_generators(3, NU).unwrap();
    let x = word_product(&gens, &[0, 1, 0, 2, 2, 0, 1, 1]);
    assert_eq!(x.norm(), pp("t^8"));
    let form = QuadForm::morgenstern(3, NU).unwrap();
    let inst = Instance::new(form.clone(), pp("t^8"), pp("1"), vec![pp("0"); 4]).unwrap();
    let cone = Cone::anisotropic(&form, 2).unwrap();
    let x0: Vec<TruncLaurent> = x.to_vec().iter().map(TruncLaurent::from_poly).collect();
    let w = make_weight_with(&inst, &cone, 6, Some(x0)).unwrap();
    assert!(n_direct(&inst, &w).unwrap() >= 1);
}
