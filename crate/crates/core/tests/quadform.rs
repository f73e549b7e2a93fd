use fq_circle::laurent::TruncLaurent;
use fq_circle::polyring::Poly;
use fq_circle::quadform::*;
use fq_circle::QuadForm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pp(s: &str) -> Poly {
    Poly::parse(s, 3).unwrap()
}

fn rand_poly(rng: &mut ChaCha8Rng, p: u32, deg: usize) -> Poly {
    let c: Vec<i64> = (0..=deg).map(|_| rng.gen_range(0..p as i64)).collect();
    Poly::from_i64(p, &c)
}

fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<TruncLaurent> {
    (0..d)
        .map(|_| {
            let top = rng.gen_range(-2..=3);
            rand_laurent(rng, 3, top, 6)
        })
        .collect()
}

fn rand_laurent(rng: &mut ChaCha8Rng, p: u32, top: i64, digits: i64) -> TruncLaurent {
    let terms: Vec<(u32, i64)> = (0..digits).map(|i| (rng.gen_range(0..p), top - i)).collect();
    TruncLaurent::from_terms(p, &terms, None).unwrap()
}

fn laurent_det(m: &LaurentMatrix) -> TruncLaurent {
    let d = m.len();
    let p = m[0][0].p();
    if d == 1 {
        return m[0][0].clone();
    }
    let mut acc = TruncLaurent::zero(p);
    for j in 0..d {
        let minor: LaurentMatrix =
            (1..d).map(|i| (0..d).filter(|&k| k != j).map(|k| m[i][k].clone()).collect()).collect();
        let term = m[0][j].mul(&laurent_det(&minor));
        acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

fn unit_det_mod(u: &PolyMatrix, m: &Poly) -> bool {
    det(u).rem(m).is_coprime(m)
}

#[test]
fn diagonalize_mod_by_remultiplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let moduli = [pp("t+1"), pp("t^2+1"), pp("t^2+2*t+2")];
    let mut done = 0;
    while done < 100 {
        let m = &moduli[done % moduli.len()];
        let d = 4;
        let mut a = vec![vec![Poly::zero(3); d]; d];
        for i in 0..d {
            for j in i..d {
                let v = rand_poly(&mut rng, 3, 2);
                a[i][j] = v.clone();
                a[j][i] = v;
            }
        }
        if !det(&a).rem(m).is_coprime(m) {
            continue;
        }
        let (u, alpha) = diagonalize_matrix_mod(&a, m).unwrap();
        let b = congruence_mod(&a, &u, m);
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    assert_eq!(b[i][i], alpha[i].rem(m));
                } else {
                    assert!(b[i][j].is_zero(), "A = {a:?}, m = {m}");
                }
            }
        }
        assert!(unit_det_mod(&u, m));
        done += 1;
    }
    // the hyperbolic plane has no unit diagonal entry
    let f = QuadForm::new(3, vec![vec![pp("0"), pp("1")], vec![pp("1"), pp("0")]]).unwrap();
    let m = pp("t^2+1");
    let (u, alpha) = f.diagonalize_mod(&m).unwrap();
    let b = congruence_mod(f.gram(), &u, &m);
    assert!(b[0][1].is_zero() && b[1][0].is_zero());
    assert!(alpha.iter().all(|x| x.is_coprime(&m)));
    // an already diagonal form keeps the identity
    let f = QuadForm::sum_of_squares(3, 4).unwrap();
    let (u, _) = f.diagonalize_mod(&pp("t")).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(u[i][j], if i == j { pp("1") } else { pp("0") });
        }
    }
}

#[test]
fn diagonalize_oinf_by_remultiplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let prec = -16;
    let mut cases: Vec<LaurentMatrix> = Vec::new();
    let tl = |s: &str| TruncLaurent::parse(s, 3).unwrap();
    cases.push(vec![vec![tl("1"), tl("1")], vec![tl("1"), tl("2")]]);
    cases.push(vec![vec![tl("t^-2"), tl("t^-3")], vec![tl("t^-3"), tl("t^-2+t^-4")]]);
    for _ in 0..60 {
        let d = rng.gen_range(1..=4);
        let mut a = vec![vec![TruncLaurent::zero(3); d]; d];
        for i in 0..d {
            for j in i..d {
                let top = rng.gen_range(-2..=2);
                let v = rand_laurent(&mut rng, 3, top, 4);
                a[i][j] = v.clone();
                a[j][i] = v;
            }
        }
        cases.push(a);
    }
    for a in cases {
        let (g, eta) = match diagonalize_oinf(&a, prec) {
            Ok(x) => x,
            Err(fq_circle::Error::Degenerate(_)) | Err(fq_circle::Error::Precision(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let b = congruence_laurent(&a, &g);
        let scale = a.iter().flatten().filter_map(|x| x.top()).max().unwrap();
        for i in 0..a.len() {
            for j in 0..a.len() {
                let target = if i == j { eta[i].clone() } else { TruncLaurent::zero(3) };
                let diff = b[i][j].sub(&target);
                assert!(diff.deg_upper() < scale + prec + 4, "entry ({i},{j}) off by {diff}");
            }
            assert!(g.iter().flatten().all(|x| x.deg_upper() <= 0));
        }
        assert_eq!(laurent_det(&g).deg().unwrap(), 0);
    }
}

#[test]
fn dual_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let forms = [
        QuadForm::morgenstern(3, 2).unwrap(),
        QuadForm::sum_of_squares(3, 4).unwrap(),
        QuadForm::new(3, vec![vec![pp("t"), pp("1"), pp("0")], vec![pp("1"), pp("2"), pp("t")], vec![pp("0"), pp("t"), pp("t^2+1")]])
            .unwrap(),
    ];
    for f in &forms {
        let dual = f.dual();
        for _ in 0..50 {
            let x: Vec<Poly> = (0..f.dim()).map(|_| rand_poly(&mut rng, 3, 3)).collect();
            // F*(Ax) det(A) = (Ax)ᵀ adj(A) (Ax) = det(A) F(x)
            let ax = f.apply_poly(&x);
            assert_eq!(dual.numerator_poly(&ax), &dual.det * &f.eval_poly(&x));
            let xl: Vec<TruncLaurent> = ax.iter().map(TruncLaurent::from_poly).collect();
            let v = dual.eval_laurent(&xl, -10).unwrap();
            assert!(v.sub(&TruncLaurent::from_poly(&f.eval_poly(&x))).deg_upper() < -10);
        }
    }
    // a diagonal form inverts entrywise
    let f = QuadForm::diagonal(3, &[pp("t"), pp("1"), pp("t^2")]).unwrap();
    let dual = f.dual();
    let e = |i: usize| -> Vec<TruncLaurent> {
        (0..3).map(|j| TruncLaurent::from_poly(&if i == j { pp("1") } else { pp("0") })).collect()
    };
    assert_eq!(dual.eval_laurent(&e(0), -8).unwrap().deg().unwrap(), -1);
    assert_eq!(dual.eval_laurent(&e(2), -8).unwrap().deg().unwrap(), -2);
}

fn sample_in_cone(rng: &mut ChaCha8Rng, f: &QuadForm, cone: &Cone) -> Vec<TruncLaurent> {
    loop {
        let x = rand_vec(rng, f.dim());
        if x.iter().all(|e| e.is_zero()) {
            continue;
        }
        if cone.contains(f, &x).unwrap() {
            return x;
        }
    }
}

fn vmax(x: &[TruncLaurent]) -> i64 {
    x.iter().map(|e| e.deg_upper()).max().unwrap()
}

#[test]
fn cone_axioms_by_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let forms = [QuadForm::sum_of_squares(3, 4).unwrap(), QuadForm::morgenstern(3, 2).unwrap(), QuadForm::sum_of_squares(3, 5).unwrap()];
    for f in &forms {
        let cone = Cone::anisotropic(f, DEFAULT_SLACK).unwrap();
        let max_a = f.gram().iter().flatten().map(|e| e.deg()).max().unwrap();
        for _ in 0..100 {
            let x = sample_in_cone(&mut rng, f, &cone);
            // scale invariance
            for s in [TruncLaurent::monomial(3, 1, 5), TruncLaurent::monomial(3, 2, -3), TruncLaurent::parse("t+1", 3).unwrap()] {
                let sx: Vec<TruncLaurent> = x.iter().map(|e| e.mul(&s)).collect();
                assert!(cone.contains(f, &sx).unwrap());
            }
            // perturbation closure
            let dx = vmax(&x);
            let y: Vec<TruncLaurent> = (0..f.dim()).map(|_| rand_laurent(&mut rng, 3, dx - cone.omega, 5)).collect();
            let xy: Vec<TruncLaurent> = x.iter().zip(&y).map(|(a, b)| a.add(b)).collect();
            assert!(cone.contains(f, &xy).unwrap(), "x = {x:?}, y = {y:?}");
            // q^{ω′}|F(x)| ≥ |x|²
            let fx = f.eval_laurent(&x);
            assert!(cone.omega_prime + fx.deg().unwrap() >= 2 * dx);
            // the dual cone A·Ω for F*: F*(Ax) = F(x) and |Ax| ≤ |A||x|
            let ax: Vec<TruncLaurent> = (0..f.dim())
                .map(|i| (0..f.dim()).fold(TruncLaurent::zero(3), |acc, j| acc.add(&TruncLaurent::from_poly(f.entry(i, j)).mul(&x[j]))))
                .collect();
            let fstar = f.dual().eval_laurent(&ax, fx.deg().unwrap() - 8).unwrap();
            assert_eq!(fstar.deg().unwrap(), fx.deg().unwrap());
            assert!(cone.omega_prime + 2 * max_a + fstar.deg().unwrap() >= 2 * vmax(&ax));
        }
        // |x ± y| ≥ max(|x|, |y|)/q^ω for x ∈ Ω, y ∉ Ω
        // outside points come from perturbing an isotropic vector when the form has one
        let iso: Option<Vec<i64>> = if f.dim() >= 4 && f.entry(3, 3).deg() == 0 { Some(vec![1, 1, 1, 0]) } else { None };
        let Some(v) = iso else { continue };
        for _ in 0..100 {
            let x = sample_in_cone(&mut rng, f, &cone);
            let k = rng.gen_range(-1..=3);
            let y: Vec<TruncLaurent> = (0..f.dim())
                .map(|i| {
                    let base = TruncLaurent::monomial(3, v.get(i).copied().unwrap_or(0).rem_euclid(3) as u32, k);
                    base.add(&rand_laurent(&mut rng, 3, k - 3, 4))
                })
                .collect();
            assert!(!cone.contains(f, &y).unwrap());
            for sign in [false, true] {
                let z: Vec<TruncLaurent> = x.iter().zip(&y).map(|(a, b)| if sign { a.sub(b) } else { a.add(b) }).collect();
                assert!(vmax(&z) >= vmax(&x).max(vmax(&y)) - cone.omega);
            }
        }
    }
}

#[test]
fn cone_membership_examples() {
    let f = QuadForm::sum_of_squares(3, 4).unwrap();
    let cone = Cone::anisotropic(&f, DEFAULT_SLACK).unwrap();
    assert!(cone.contains_poly(&f, &[pp("t^3"), pp("0"), pp("0"), pp("0")]).unwrap());
    let split = QuadForm::diagonal(3, &[pp("1"), pp("1"), pp("2"), pp("2")]).unwrap();
    let cone = Cone::anisotropic(&split, 8).unwrap();
    assert!(!cone.contains_poly(&split, &[pp("1"), pp("0"), pp("1"), pp("0")]).unwrap());
}

#[test]
fn class_witnesses() {
    let f = QuadForm::sum_of_squares(3, 4).unwrap();
    for class in SquareClass::ALL {
        let w = cone_for_class(&f, class).unwrap();
        assert_eq!(SquareClass::of(&f.eval_laurent(&w.witness)).unwrap(), class);
        assert!(w.cone.contains(&f, &w.witness).unwrap());
        assert_ne!(w.source, WitnessSource::Search, "{class:?}");
    }
    let w = cone_for_class(&QuadForm::sum_of_squares(3, 5).unwrap(), SquareClass::One).unwrap();
    assert_eq!(w.source, WitnessSource::Coordinate);
    let m = QuadForm::morgenstern(3, 2).unwrap();
    for class in SquareClass::ALL {
        let w = cone_for_class(&m, class).unwrap();
        assert_eq!(SquareClass::of(&m.eval_laurent(&w.witness)).unwrap(), class);
    }
    // both t-coefficients of the norm form have non-square leading coefficient
    assert_eq!(cone_for_class(&m, SquareClass::NuT).unwrap().source, WitnessSource::Coordinate);
}

#[test]
fn sampled_covering_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let f = QuadForm::sum_of_squares(3, 4).unwrap();
    let cones: Vec<Cone> = SquareClass::ALL.iter().map(|&c| cone_for_class(&f, c).unwrap().cone).collect();
    let mut failures = Vec::new();
    for n in 0..1000 {
        let x: Vec<TruncLaurent> = (0..4).map(|_| rand_laurent(&mut rng, 3, 2, 6)).collect();
        if x.iter().all(|e| e.is_zero()) {
            continue;
        }
        let mut hit = false;
        for c in &cones {
            if c.contains(&f, &x).unwrap_or(false) {
                hit = true;
                break;
            }
        }
        if !hit {
            failures.push(n);
        }
    }
    println!("covering: {} of 1000 samples outside all four cones", failures.len());
    assert!(failures.len() < 1000);
}
