use fq_circle::circle::*;
use fq_circle::expsums::Instance;
use fq_circle::polyring::enumerate;
use fq_circle::quadform::Cone;
use fq_circle::{Poly, QuadForm, ScaledCyclotomic, TruncLaurent, ZetaSum};

fn pp(s: &str) -> Poly {
    Poly::parse(s, 3).unwrap()
}

fn lp(x: &Poly) -> TruncLaurent {
    TruncLaurent::from_poly(x)
}

fn unit(d: usize, i: usize, x: &str) -> Vec<Poly> {
    let mut v = vec![pp("0"); d];
    v[i] = pp(x);
    v
}

struct Pinned {
    inst: Instance,
    w: Weight,
    x0: Vec<Poly>,
}

/// Sums of squares with `x0 = lead·e_i`, anisotropic cone of slack 2, `α0 = 4`.
fn pinned(d: usize, g: &str, f: &str, lead: &str, i: usize, q: i64) -> Pinned {
    let form = QuadForm::sum_of_squares(3, d).unwrap();
    let lambda = if g == "1" { vec![pp("0"); d] } else { unit(d, i, "1") };
    let inst = Instance::new(form.clone(), pp(f), pp(g), lambda).unwrap();
    let cone = Cone::anisotropic(&form, 2).unwrap();
    let x0 = unit(d, i, lead);
    let w = make_weight_with(&inst, &cone, 4, Some(x0.iter().map(lp).collect())).unwrap().with_q(q).unwrap();
    Pinned { inst, w, x0 }
}

fn four_squares_g1(q: i64) -> Pinned {
    pinned(4, "1", "t^6", "t^3", 0, q)
}

fn four_squares_gt(q: i64) -> Pinned {
    pinned(4, "t", "t^8+2*t^4+1", "t^4+1", 0, q)
}

fn five_squares_gt(q: i64) -> Pinned {
    pinned(5, "t", "t^8+2*t^4+1", "t^4+1", 0, q)
}

/// Oracle for `N(w, λ)`: every `x = x0 + δ` with `deg δ_i < ρ`, tested
/// for the congruence and the equation.
fn brute_count(p: &Pinned) -> u64 {
    let d = p.inst.dim();
    let rho = p.w.rho.max(0) as usize;
    let per = 3u64.pow(rho as u32);
    let mut n = 0;
    for idx in 0..per.pow(d as u32) {
        let mut idx = idx;
        let x: Vec<Poly> = p
            .x0
            .iter()
            .map(|a| {
                let delta = Poly::from_index(3, idx % per, rho);
                idx /= per;
                a + &delta
            })
            .collect();
        let congruent = x.iter().zip(&p.inst.lambda).all(|(a, l)| (a - l).rem(&p.inst.g).is_zero());
        if congruent && p.inst.form.eval_poly(&x) == p.inst.f {
            n += 1;
        }
    }
    n
}

/// Oracle for `I_{g,r}(c)`: a Riemann sum for
/// `q^Q/|r| ∫_{|t−t0|<q^R} [|G(t)| < q^Q|r|] ψ(⟨c,t⟩/(gr)) dt` over the grid of
/// spacing `q^floor`.
fn brute_integral(p: &Pinned, r: &Poly, c: &[Poly], floor: i64) -> ScaledCyclotomic {
    let inst = &p.inst;
    let w = &p.w;
    let d = inst.dim();
    let big_r = w.big_r;
    let high = &w.t0;
    let cells: Vec<TruncLaurent> = TruncLaurent::grid(3, big_r - 1, floor).collect();
    let gl = lp(&inst.g);
    let gr = lp(&(&inst.g * r));
    let y = w.big_q + r.deg() + 2 * inst.g.deg();
    let mut z = ZetaSum::new(3);
    let mut idx = vec![0usize; d];
    loop {
        let t: Vec<TruncLaurent> = (0..d).map(|i| high[i].add(&cells[idx[i]])).collect();
        let x: Vec<TruncLaurent> = t.iter().zip(&inst.lambda).map(|(a, l)| gl.mul(a).add(&lp(l))).collect();
        let num = inst.form.eval_laurent(&x).sub(&lp(&inst.f));
        if num.is_zero() || num.deg().unwrap() < y {
            let dot = c.iter().zip(&t).fold(TruncLaurent::zero(3), |acc, (a, b)| acc.add(&lp(a).mul(b)));
            z.add(dot.div(&gr, -1).unwrap().psi_exponent().unwrap(), 1);
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < cells.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    let e = w.big_q - r.deg() + floor * d as i64;
    z.value().scale(-2 * e as i32)
}

#[test]
fn weight_rejects_small_alpha0() {
    let inst = Instance::new(QuadForm::sum_of_squares(3, 5).unwrap(), pp("t^6"), pp("1"), vec![pp("0"); 5]).unwrap();
    let cone = Cone::anisotropic(&inst.form, 2).unwrap();
    let w = make_weight(&inst, &cone, 4).unwrap();
    assert_eq!(w.x0[0], lp(&pp("t^3")));
    assert!(w.samples_checked > 0);
    assert!(make_weight(&inst, &cone, 3).is_err());
}

#[test]
fn supplied_witness_off_the_variety_is_rejected() {
    let inst = Instance::new(QuadForm::sum_of_squares(3, 4).unwrap(), pp("t^6"), pp("1"), vec![pp("0"); 4]).unwrap();
    let cone = Cone::anisotropic(&inst.form, 2).unwrap();
    let bad = unit(4, 0, "t^3+1").iter().map(lp).collect();
    assert!(make_weight_with(&inst, &cone, 4, Some(bad)).is_err());
}

#[test]
fn direct_count_matches_brute_force() {
    for (p, expected) in [(four_squares_g1(3), 9), (four_squares_gt(3), 9), (five_squares_gt(2), 33)] {
        assert_eq!(brute_count(&p), expected);
        assert_eq!(n_direct(&p.inst, &p.w).unwrap(), expected as u128);
    }
}

#[test]
fn count_is_permutation_invariant() {
    let a = four_squares_gt(3);
    let b = pinned(4, "t", "t^8+2*t^4+1", "t^4+1", 2, 3);
    assert_eq!(n_direct(&a.inst, &a.w).unwrap(), n_direct(&b.inst, &b.w).unwrap());
    assert_eq!(brute_count(&b), 9);
}

#[test]
fn integral_matches_riemann_sum() {
    let p = four_squares_gt(3);
    let d = 4;
    let rs = ["1", "t", "t+2", "t^2+1"];
    for r in rs.iter().map(|s| pp(s)) {
        let sigma = direct_scale(&p.inst, &p.w, r.deg());
        let bound = c_bound(&p.inst, &p.w, r.deg());
        let mut cs = vec![vec![pp("0"); d], unit(d, 0, "1"), unit(d, 1, "2"), vec![pp("1"), pp("1"), pp("0"), pp("2")]];
        if bound >= 2 {
            cs.push(vec![pp("t"), pp("0"), pp("t+1"), pp("0")]);
        }
        for c in &cs {
            let oracle = brute_integral(&p, &r, c, sigma - 1);
            for route in [Route::Direct, Route::Dual] {
                assert_eq!(i_eval_with(&p.inst, &p.w, &r, c, route, Region::Full).unwrap(), oracle, "r = {r}, c = {c:?}, {route:?}");
            }
        }
    }
    // a finer grid gives the same value
    let r = pp("t");
    let sigma = direct_scale(&p.inst, &p.w, 1);
    let c = unit(d, 0, "1");
    assert_eq!(brute_integral(&p, &r, &c, sigma - 2), brute_integral(&p, &r, &c, sigma - 1));
}

#[test]
fn circle_identity_on_pinned_instances() {
    for (p, expected) in [(four_squares_g1(3), 9), (four_squares_gt(3), 9), (five_squares_gt(2), 33)] {
        let check = circle_check(&p.inst, &p.w, Route::Auto).unwrap();
        assert!(check.equal, "{check:?}");
        assert_eq!(check.n_direct, expected);
    }
}

#[test]
fn circle_identity_holds_for_every_q() {
    for q in 1..=3 {
        let p = four_squares_g1(q);
        assert!(circle_check(&p.inst, &p.w, Route::Auto).unwrap().equal, "Q = {q}");
    }
}

#[test]
fn both_routes_assemble_the_same_count() {
    let p = five_squares_gt(2);
    let a = circle_check(&p.inst, &p.w, Route::Direct).unwrap();
    let b = circle_check(&p.inst, &p.w, Route::Dual).unwrap();
    assert!(a.equal && b.equal);
    assert_eq!(a.n_circle, b.n_circle);
}

#[test]
fn empty_count_assembles_to_zero() {
    let form = QuadForm::sum_of_squares(3, 4).unwrap();
    let inst = Instance::new(form.clone(), pp("t^8+1"), pp("t"), unit(4, 0, "1")).unwrap();
    let cone = Cone::anisotropic(&form, 2).unwrap();
    let w = make_weight(&inst, &cone, 4).unwrap().with_q(3).unwrap();
    assert_eq!(n_direct(&inst, &w).unwrap(), 0);
    assert!(n_circle(&inst, &w).unwrap().is_zero());
}

#[test]
fn mutating_one_sum_breaks_the_identity() {
    let p = five_squares_gt(2);
    let mut terms = circle_terms(&p.inst, &p.w, Route::Auto).unwrap();
    let good = assemble(&p.inst, &p.w, &terms);
    assert_eq!(good, ScaledCyclotomic::from_int(3, 33));
    let one = ScaledCyclotomic::from_int(3, 1);
    let s = &terms[0].s;
    terms[0].s = s.checked_add(&one).or_else(|| s.checked_add(&one.scale(1))).unwrap();
    assert_ne!(assemble(&p.inst, &p.w, &terms), good);
}

#[test]
fn ordinary_vectors_vanish() {
    for p in [four_squares_g1(5), four_squares_gt(5), five_squares_gt(5)] {
        let p = Pinned { w: p.w.with_q(p.w.q_formula).unwrap(), ..p };
        let rep = ordinary_check(&p.inst, &p.w, 1, 16, 7).unwrap();
        assert!(rep.pass, "{:?}", rep.failures);
        assert!(rep.ordinary_vectors > 0);
    }
}

#[test]
fn small_frequencies_factor_through_the_centre() {
    for p in [four_squares_g1(5), four_squares_gt(5), five_squares_gt(5)] {
        let rep = factorization_check(&p.inst, &p.w, p.w.big_q, 20_000, 32, 11).unwrap();
        assert!(rep.pass, "{:?}", rep.failures);
        assert!(rep.cases > 0);
    }
}

#[test]
fn both_region_descriptions_agree() {
    let p = four_squares_gt(3);
    let mut cases = Vec::new();
    for r in enumerate(3, 2, true) {
        cases.push((r.clone(), vec![pp("0"); 4]));
        cases.push((r.clone(), unit(4, 0, "1")));
        cases.push((r, vec![pp("2"), pp("0"), pp("0"), pp("1")]));
    }
    for route in [Route::Direct, Route::Dual] {
        let rep = region_check(&p.inst, &p.w, &cases, route).unwrap();
        assert!(rep.pass, "{:?}", rep.failures);
    }
}

#[test]
fn zero_frequency_is_positive_and_bounded() {
    let p = four_squares_gt(5);
    let rows = zero_frequency_report(&p.inst, &p.w).unwrap();
    assert_eq!(rows.len() as i64, p.w.big_q + 1);
    for row in &rows {
        assert!(row.ratio > 0.0);
        // volume of the region is at most the volume q^{Rd} of the ball
        let cap = 3f64.powi((p.w.big_q - row.deg_r + p.w.big_r * 4 - p.w.big_q * 4) as i32);
        assert!(row.ratio <= cap * (1.0 + 1e-12), "{row:?}");
    }
}

/// `g = t`, `λ = e_1`, `x0 = (t^m + 1)e_1` in the dominant-coordinate cone
/// with `α0 = 2`: small enough `Q` that exceptional `c` with constant
/// coordinates lie above the threshold for `r = 1`.
fn exceptional_instance(m: usize) -> (Instance, Weight, Cone) {
    let x1 = &Poly::monomial(3, 1, m) + &Poly::one(3);
    let form = QuadForm::sum_of_squares(3, 4).unwrap();
    let inst = Instance::new(form, &x1 * &x1, pp("t"), unit(4, 0, "1")).unwrap();
    let cone = Cone::dominant_coordinate(0);
    let mut x0 = vec![TruncLaurent::zero(3); 4];
    x0[0] = lp(&x1);
    let w = make_weight_with(&inst, &cone, 2, Some(x0)).unwrap();
    (inst, w, cone)
}

fn constant_cases(w: &Weight) -> Vec<(Poly, Vec<Poly>)> {
    let mut cases = Vec::new();
    for n in 0..=w.big_q as usize {
        for idx in 1..81u64 {
            let c = (0..4).map(|i| Poly::constant(3, ((idx / 3u64.pow(i)) % 3) as u32)).collect();
            cases.push((Poly::monomial(3, 1, n), c));
        }
    }
    cases
}

#[test]
fn exceptional_vectors_outside_the_dual_cone_vanish() {
    let mut constants = Vec::new();
    for m in [6, 7] {
        let (inst, w, cone) = exceptional_instance(m);
        assert_eq!(w.big_q, w.q_formula);
        let eta = default_eta_exp(&w);
        let rep = exceptional_report(&inst, &w, &cone, &constant_cases(&w), eta).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.smallest_working_eta_exp.unwrap() <= eta);
        // the test discriminates: vectors inside the dual cone above the
        // threshold do not vanish
        assert!(rep.rows.iter().any(|x| x.in_dual_cone && x.margin >= eta && !x.vanishes));
        assert!(rep.rows.iter().any(|x| !x.in_dual_cone && x.margin >= eta));
        constants.push(rep.fitted_constant.unwrap());
    }
    // pinned fitted constants; the second instance must not exceed the first
    assert!((constants[0] - 1.0).abs() < 1e-9, "{constants:?}");
    assert!(constants[1] <= constants[0] * (1.0 + 1e-9), "{constants:?}");
}

#[test]
fn solver_returns_the_congruence_point() {
    let form = QuadForm::sum_of_squares(3, 5).unwrap();
    let lambda = unit(5, 0, "1");
    let inst = Instance::new(form, pp("1"), pp("t"), lambda.clone()).unwrap();
    assert_eq!(solve(&inst, &Cone::dominant_coordinate(0), 0).unwrap(), SolveOutcome::Found(lambda));
}

#[test]
fn solver_finds_verified_solutions() {
    let p = five_squares_gt(2);
    match solve(&p.inst, &Cone::dominant_coordinate(0), 4).unwrap() {
        SolveOutcome::Found(x) => {
            assert_eq!(p.inst.form.eval_poly(&x), p.inst.f);
            assert!((&x[0] - &pp("1")).rem(&pp("t")).is_zero());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn optimality_witness_for_t_squared() {
    let w = optimality_witness(3, 5, &pp("t^2")).unwrap();
    assert!(w.absent && w.companion_verified, "{w:?}");
    assert_eq!(pp(&w.absent_f).deg(), 5);
    assert_eq!(pp(&w.companion_f).deg(), 6);
    assert!(w.absent_examined > 0);
    assert!(optimality_witness(3, 5, &pp("t")).is_err());
}

#[test]
fn threshold_scan_without_trials_is_empty() {
    let form = QuadForm::sum_of_squares(3, 5).unwrap();
    assert!(threshold_scan(&form, &Cone::dominant_coordinate(0), &[], 6, 4, 1).unwrap().is_empty());
}

#[test]
fn threshold_scan_respects_the_lower_bound() {
    let form = QuadForm::sum_of_squares(3, 5).unwrap();
    let cone = Cone::dominant_coordinate(0);
    for n in 1..=2usize {
        let trials = default_trials(&form, n, 5);
        let rows = threshold_scan(&form, &cone, &trials, 4 * n as i64 + 1, 3, 5).unwrap();
        let first = rows[0].min_deg_any.unwrap();
        assert!(first >= 4 * n as i64 - 2, "{rows:?}");
    }
}
