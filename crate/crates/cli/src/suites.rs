//! The check loops behind each subcommand. The acceptance test drives the
//! same functions, so a criterion and its subcommand cannot drift apart.

use std::collections::BTreeMap;

use fq_circle::circle::{
    assemble, c_bound, circle_terms, cone_window, default_eta_exp, default_trials, exceptional_report, factorization_check, n_direct,
    optimality_witness, ordinary_check, region_check, solve, threshold_scan, zero_frequency_report, ExceptionalReport,
    FactorizationReport, OptimalityWitness, OrdinaryReport, RegionReport, Route, SolveOutcome, ThresholdRow, Weight, ZeroRow,
};
use fq_circle::densities::{partial_identity_check, ratio_f64, sigma_local, singular_series, tail_report, DensityReport, TailReport};
use fq_circle::expsums::{average_scan, s_factored, s_full_with, s_quadratic_closed, s_quadratic_direct, weil_scan, AverageScan, Instance, ScanRow, SumPath};
use fq_circle::laurent::TruncLaurent;
use fq_circle::morgenstern::{build_cayley, graph_stats, GraphStats};
use fq_circle::polyring::{enumerate, irreducibles_of_degree, monic_divisors, monic_of_degree};
use fq_circle::quadform::{det, diagonalize_oinf, Cone, LaurentMatrix, PolyMatrix};
use fq_circle::tintegral::{
    b_inf_closed, b_inf_direct, bessel_case, dissection_partition_check, gaussian_closed, gaussian_direct, morse_normal_form, stationary_phase,
    stationary_phase_direct, BesselCase, BesselKind, DeltaExpansion, TruncSeries,
};
use fq_circle::{Fq, Poly, QuadForm, ResidueRing, ScaledCyclotomic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::emit::Exact;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// At most this many failing cases are quoted in a report.
const QUOTED: usize = 5;

fn quote(list: &mut Vec<String>, s: String) {
    if list.len() < QUOTED {
        list.push(s);
    }
}

/// Independent stream for one part of a suite, derived from the run seed.
fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn pp(s: &str, p: u32) -> Poly {
    Poly::parse(s, p).expect("literal")
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaCheck {
    pub q: u32,
    #[serde(rename = "Q")]
    pub big_q: i64,
    pub deg_n: usize,
    pub checked: u64,
    pub failures: u64,
    pub failing: Vec<String>,
    pub pass: bool,
}

/// The delta expansion against the indicator of `n = 0` for every `n` of
/// degree at most `deg_n`.
pub fn delta_check(p: u32, big_q: i64, deg_n: usize) -> Result<DeltaCheck> {
    let ex = DeltaExpansion::new(p, big_q)?;
    let (mut checked, mut failures, mut failing) = (0, 0, Vec::new());
    for n in enumerate(p, deg_n, false) {
        let v = ex.eval(&n)?;
        let expect = if n.is_zero() { ScaledCyclotomic::one(p) } else { ScaledCyclotomic::zero(p) };
        checked += 1;
        if v != expect {
            failures += 1;
            quote(&mut failing, format!("n = {n}: {v}"));
        }
    }
    Ok(DeltaCheck { q: p, big_q, deg_n, checked, failures, failing, pass: failures == 0 })
}

#[derive(Clone, Debug, Serialize)]
pub struct DissectReport {
    pub q: u32,
    #[serde(rename = "Q")]
    pub big_q: i64,
    pub points: u64,
    pub balls: usize,
    pub failures: usize,
    pub failing: Vec<String>,
    pub measure_numerator: String,
    pub measure_denominator: String,
    pub pass: bool,
}

pub fn dissect(p: u32, big_q: i64) -> Result<DissectReport> {
    let rep = dissection_partition_check(p, big_q)?;
    let failing = rep.failures.iter().take(QUOTED).map(|(a, hits)| format!("{a}: {hits} balls")).collect();
    Ok(DissectReport {
        q: p,
        big_q,
        points: rep.points,
        balls: rep.balls,
        failures: rep.failures.len(),
        failing,
        measure_numerator: rep.measure_numerator.to_string(),
        measure_denominator: rep.measure_denominator.to_string(),
        pass: rep.failures.is_empty() && rep.measure_numerator == rep.measure_denominator,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OscSuite {
    Gaussian,
    Bessel,
    Stationary,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct OscRow {
    pub family: String,
    pub cases: usize,
    pub failures: usize,
    pub failing: Vec<String>,
}

impl OscRow {
    fn new(family: &str) -> Self {
        OscRow { family: family.into(), cases: 0, failures: 0, failing: Vec::new() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            quote(&mut self.failing, what());
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OscReport {
    pub q: u32,
    pub seed: u64,
    pub rows: Vec<OscRow>,
    /// Distinct `(case, kind)` rows of the Bessel table that were reached.
    pub bessel_case_rows: Option<usize>,
    pub pass: bool,
}

fn rand_laurent(rng: &mut ChaCha8Rng, p: u32, top: i64, floor: i64) -> Result<TruncLaurent> {
    let terms: Vec<(u32, i64)> = (floor..=top).map(|k| (rng.gen_range(0..p), k)).collect();
    Ok(TruncLaurent::from_terms(p, &terms, None)?)
}

/// `a t^d (1 + α̃)` with random `α̃ ∈ 𝕋` down to `t^{-depth}`.
fn rand_with_lead(rng: &mut ChaCha8Rng, p: u32, a: u32, d: i64, depth: i64) -> Result<TruncLaurent> {
    let tail = rand_laurent(rng, p, -1, -depth)?;
    Ok(TruncLaurent::one(p).add(&tail).mul(&TruncLaurent::monomial(p, a, d)))
}

fn random_unit_hessian(rng: &mut ChaCha8Rng, p: u32, d: usize) -> Result<LaurentMatrix> {
    loop {
        let mut h = vec![vec![TruncLaurent::zero(p); d]; d];
        for i in 0..d {
            for j in i..d {
                let v = rand_laurent(rng, p, 0, -1)?;
                h[i][j] = v.clone();
                h[j][i] = v;
            }
        }
        if let Ok((_, lam)) = diagonalize_oinf(&h, -10) {
            if lam.iter().all(|l| l.deg().ok() == Some(0)) {
                return Ok(h);
            }
        }
    }
}

/// A phase with a nondegenerate critical point at 0 and random terms of
/// total degree 3 up to `degree`.
fn random_phase(rng: &mut ChaCha8Rng, p: u32, d: usize, degree: usize) -> Result<TruncSeries> {
    let h = random_unit_hessian(rng, p, d)?;
    let mut terms = Vec::new();
    let c0 = if rng.gen_bool(0.5) { rand_laurent(rng, p, -1, -4)? } else { TruncLaurent::zero(p) };
    terms.push((vec![0; d], c0));
    for i in 0..d {
        for j in i..d {
            let mut e = vec![0; d];
            e[i] += 1;
            e[j] += 1;
            terms.push((e, if i == j { h[i][i].clone() } else { h[i][j].scale(2) }));
        }
    }
    for _ in 0..4 {
        let deg = rng.gen_range(3..=degree);
        let mut e = vec![0u32; d];
        for _ in 0..deg {
            e[rng.gen_range(0..d)] += 1;
        }
        terms.push((e, rand_laurent(rng, p, 0, -2)?));
    }
    Ok(TruncSeries::from_terms(p, d, 6, -10, &terms)?)
}

fn gaussian_rows(p: u32, seed: u64) -> Result<Vec<OscRow>> {
    let mut one = OscRow::new("gauss_factor");
    let mut rng = stream(seed, 1);
    for ord in -4..=5i64 {
        for lead in 1..p {
            let f = rand_with_lead(&mut rng, p, lead, ord, 3)?;
            let a = vec![vec![f.clone()]];
            let direct = gaussian_direct(&a)?;
            let ok = direct == f.gauss_factor()? && direct == gaussian_closed(&a, -12)?;
            one.record(ok, || format!("f = {f}"));
        }
    }
    let mut diag = OscRow::new("gaussian_diagonal");
    let mut rng = stream(seed, 2);
    for d in 1..=3usize {
        for _ in 0..6 {
            let mut a: LaurentMatrix = vec![vec![TruncLaurent::zero(p); d]; d];
            for (i, row) in a.iter_mut().enumerate() {
                let ord = rng.gen_range(-2..=if d == 3 { 2 } else { 3 });
                let lead = rng.gen_range(1..p);
                row[i] = rand_with_lead(&mut rng, p, lead, ord, 2)?;
            }
            let closed = gaussian_closed(&a, -12)?;
            let mut product = ScaledCyclotomic::one(p);
            for (i, row) in a.iter().enumerate() {
                product = &product * &row[i].gauss_factor()?;
            }
            let ok = closed == product && closed == gaussian_direct(&a)?;
            diag.record(ok, || format!("A = {a:?}"));
        }
    }
    Ok(vec![one, diag])
}

fn bessel_rows(p: u32, seed: u64) -> Result<(Vec<OscRow>, usize)> {
    let fq = Fq::new(p)?;
    let mut rng = stream(seed, 3);
    let mut both = OscRow::new("bessel_closed_vs_direct");
    let mut table = OscRow::new("bessel_table_rows");
    let mut seen = BTreeMap::new();
    for l in -3..=2i64 {
        for k in -2..=2i64 {
            for ap in 1..p {
                for _ in 0..20 {
                    let alpha = rand_with_lead(&mut rng, p, ap, 2 * l + k, 6)?;
                    let case = bessel_case(l, &alpha)?;
                    for kind in [BesselKind::Plain, BesselKind::Twisted] {
                        let closed = b_inf_closed(l, &alpha, kind)?;
                        let direct = b_inf_direct(l, &alpha, kind)?;
                        both.record(closed == direct, || format!("l = {l}, alpha = {alpha}, {kind:?}"));
                        seen.insert((format!("{case:?}"), format!("{kind:?}")), ());
                    }
                    let plain = b_inf_closed(l, &alpha, BesselKind::Plain)?;
                    let ql = ScaledCyclotomic::one(p).scale(-2 * l as i32);
                    let expected = match case {
                        BesselCase::Flat => Some(ql.mul_int(p as i128 - 1)),
                        BesselCase::Boundary => Some(ql.mul_int(-1)),
                        BesselCase::Vanishing | BesselCase::NonResidue => Some(ScaledCyclotomic::zero(p)),
                        BesselCase::Kloosterman => Some(&ql * &fq.kloosterman_fq(ap)?),
                        BesselCase::Stationary => None,
                    };
                    if let Some(e) = expected {
                        table.record(plain == e, || format!("{case:?} at l = {l}, k = {k}"));
                    }
                }
            }
        }
    }
    Ok((vec![both, table], seen.len()))
}

fn stationary_rows(p: u32, seed: u64) -> Result<Vec<OscRow>> {
    let mut rng = stream(seed, 4);
    let mut row = OscRow::new("stationary_phase");
    let mut morse = OscRow::new("morse_normal_form");
    for trial in 0..100 {
        let d = 1 + trial % 2;
        let phi = random_phase(&mut rng, p, d, 4)?;
        let df = rng.gen_range(-1..=if d == 1 { 4 } else { 3 });
        let lead = rng.gen_range(1..p);
        let f = rand_with_lead(&mut rng, p, lead, df, 2)?;
        let closed = stationary_phase(&phi, &f)?;
        let direct = stationary_phase_direct(&phi, &f)?;
        row.record(closed == direct, || format!("trial {trial}, f = {f}"));
        let m = morse_normal_form(&phi)?;
        morse.record(m.residual(&phi).is_zero(), || format!("trial {trial}"));
    }
    Ok(vec![row, morse])
}

pub fn osc_check(suite: OscSuite, p: u32, seed: u64) -> Result<OscReport> {
    let mut rows = Vec::new();
    let mut case_rows = None;
    if matches!(suite, OscSuite::Gaussian | OscSuite::All) {
        rows.extend(gaussian_rows(p, seed)?);
    }
    if matches!(suite, OscSuite::Bessel | OscSuite::All) {
        let (r, n) = bessel_rows(p, seed)?;
        rows.extend(r);
        case_rows = Some(n);
    }
    if matches!(suite, OscSuite::Stationary | OscSuite::All) {
        rows.extend(stationary_rows(p, seed)?);
    }
    let pass = rows.iter().all(|r| r.failures == 0 && r.cases > 0) && case_rows.map_or(true, |n| n == 12);
    Ok(OscReport { q: p, seed, rows, bessel_case_rows: case_rows, pass })
}

/// The two fixed instances of the path checks: four squares and the
/// quaternion norm form, each with `g = t`, `λ = e_1`.
pub fn default_expsum_instances() -> Result<Vec<Instance>> {
    let p = 3;
    let lambda = vec![pp("1", p), pp("0", p), pp("0", p), pp("0", p)];
    Ok(vec![
        Instance::new(QuadForm::sum_of_squares(p, 4)?, pp("t^2+1", p), pp("t", p), lambda.clone())?,
        Instance::new(QuadForm::morgenstern(p, 2)?, pp("t+1", p), pp("t", p), lambda)?,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExpsumSuite {
    Paths,
    Multiplicative,
    Closed,
    Average,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathRow {
    pub instance: usize,
    pub r: String,
    pub c: String,
    pub re: f64,
    pub im: f64,
    pub exact: String,
    pub reduced_equal: bool,
    pub factored_equal: bool,
    pub coordinatewise_equal: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Tally {
    pub exhaustive_cases: usize,
    pub sampled_cases: usize,
    pub failures: usize,
    pub failing: Vec<String>,
}

impl Tally {
    fn record(&mut self, exhaustive: bool, ok: bool, what: impl FnOnce() -> String) {
        if exhaustive {
            self.exhaustive_cases += 1;
        } else {
            self.sampled_cases += 1;
        }
        if !ok {
            self.failures += 1;
            quote(&mut self.failing, what());
        }
    }

    fn pass(&self) -> bool {
        self.failures == 0 && self.exhaustive_cases + self.sampled_cases > 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpsumReport {
    pub q: u32,
    pub max_deg_r: usize,
    pub paths: Vec<PathRow>,
    pub multiplicative: Option<Tally>,
    pub closed_form: Option<Tally>,
    pub average: Option<AverageScan>,
    pub pass: bool,
}

pub const PATH_HEADERS: &[&str] = &["instance", "r", "c", "re", "im", "exact", "reduced_equal", "factored_equal", "coordinatewise_equal"];

fn rand_vec(rng: &mut ChaCha8Rng, p: u32, d: usize, deg: usize) -> Vec<Poly> {
    (0..d).map(|_| Poly::from_index(p, rng.gen_range(0..(p as u64).pow(deg as u32 + 1)), deg + 1)).collect()
}

/// Zero, a vector in the admissible class of `λ`, and a random vector.
fn path_vectors(inst: &Instance, rng: &mut ChaCha8Rng) -> Vec<Vec<Poly>> {
    let p = inst.p();
    let d = inst.dim();
    let al = inst.form.apply_poly(&inst.lambda);
    let alpha = pp("t+2", p);
    vec![
        vec![Poly::zero(p); d],
        al.iter().map(|x| &(x * &alpha) + &(&inst.g * &Poly::t(p))).collect(),
        rand_vec(rng, p, d, 2),
    ]
}

fn path_rows(insts: &[Instance], max_deg_r: usize, seed: u64) -> Result<Vec<PathRow>> {
    let mut rng = stream(seed, 5);
    let mut rows = Vec::new();
    for (i, inst) in insts.iter().enumerate() {
        for c in path_vectors(inst, &mut rng) {
            for r in enumerate(inst.p(), max_deg_r, true) {
                let triple = s_full_with(inst, &r, &c, SumPath::Triple)?;
                let reduced = s_full_with(inst, &r, &c, SumPath::Reduced)?;
                let split = s_factored(inst, &r, &c)?;
                let coord = if inst.form.is_diagonal() { Some(s_full_with(inst, &r, &c, SumPath::Coordinatewise)? == triple) } else { None };
                let e = Exact::from(&triple);
                rows.push(PathRow {
                    instance: i,
                    r: r.to_string(),
                    c: c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
                    re: e.re,
                    im: e.im,
                    exact: e.exact,
                    reduced_equal: reduced == triple,
                    factored_equal: split.value() == triple && &split.r1 * &split.r2 == r,
                    coordinatewise_equal: coord,
                });
            }
        }
    }
    Ok(rows)
}

fn random_gram(rng: &mut ChaCha8Rng, p: u32, d: usize) -> PolyMatrix {
    let mut a = vec![vec![Poly::zero(p); d]; d];
    for i in 0..d {
        for j in i..d {
            let v = Poly::from_index(p, rng.gen_range(0..(p as u64).pow(2)), 2);
            a[i][j] = v.clone();
            a[j][i] = v;
        }
    }
    a
}

/// `S_r = S_u(·v̄) S_v(·ū)` for every coprime splitting `r = uv` with
/// `deg r ≤ max_deg`, on random forms.
pub fn multiplicativity(p: u32, max_deg: usize, seed: u64) -> Result<Tally> {
    let mut rng = stream(seed, 6);
    let mut tally = Tally::default();
    for n in 1..=max_deg {
        for r in monic_of_degree(p, n) {
            let splits: Vec<(Poly, Poly)> = monic_divisors(&r)
                .into_iter()
                .filter_map(|u| {
                    let v = r.exact_div(&u)?;
                    (u.is_coprime(&v) && !u.is_one() && !v.is_one()).then_some((u, v))
                })
                .collect();
            if splits.is_empty() {
                continue;
            }
            for _ in 0..2 {
                let d = rng.gen_range(2..=if n == 3 { 3 } else { 4 });
                let gram = random_gram(&mut rng, p, d);
                if !det(&gram).is_coprime(&r) {
                    continue;
                }
                let c = rand_vec(&mut rng, p, d, n);
                let cp = rand_vec(&mut rng, p, d, n);
                let e = rand_vec(&mut rng, p, 1, n).remove(0);
                let whole = s_quadratic_direct(&gram, &c, &cp, &e, &r)?;
                for (u, v) in &splits {
                    let vb = v.inv_mod(u).expect("coprime splitting");
                    let ub = u.inv_mod(v).expect("coprime splitting");
                    let cu: Vec<Poly> = c.iter().map(|x| x * &vb).collect();
                    let cv: Vec<Poly> = c.iter().map(|x| x * &ub).collect();
                    let prod = &s_quadratic_direct(&gram, &cu, &cp, &e, u)? * &s_quadratic_direct(&gram, &cv, &cp, &e, v)?;
                    tally.record(true, whole == prod, || format!("r = ({u})({v}), G = {gram:?}"));
                }
            }
        }
    }
    Ok(tally)
}

/// Closed form of the quadratic sum against its definition. Exhaustive over
/// `(c, c′, e) mod r` in dimension 1 and for `deg r ≤ 1`; sampled otherwise.
pub fn closed_form(p: u32, max_deg: usize, seed: u64) -> Result<Tally> {
    let mut rng = stream(seed, 7);
    let mut tally = Tally::default();
    let grams: Vec<PolyMatrix> = vec![
        vec![vec![pp("1", p)]],
        vec![vec![pp("2", p)]],
        vec![vec![pp("t", p)]],
        vec![vec![pp("1", p), pp("0", p)], vec![pp("0", p), pp("1", p)]],
        vec![vec![pp("1", p), pp("1", p)], vec![pp("1", p), pp("2", p)]],
        vec![vec![pp("t", p), pp("1", p)], vec![pp("1", p), pp("2", p)]],
    ];
    for gram in &grams {
        let d = gram.len();
        for r in enumerate(p, max_deg, true) {
            if !det(gram).is_coprime(&r) {
                continue;
            }
            let n = r.deg().max(0) as usize;
            let vals: Vec<Poly> = ResidueRing::new(&r)?.elements().collect();
            if d == 1 || n <= 1 {
                let vecs: Vec<Vec<Poly>> = if d == 1 {
                    vals.iter().map(|x| vec![x.clone()]).collect()
                } else {
                    vals.iter().flat_map(|x| vals.iter().map(move |y| vec![x.clone(), y.clone()])).collect()
                };
                for c in &vecs {
                    for cp in &vecs {
                        for e in &vals {
                            let ok = s_quadratic_direct(gram, c, cp, e, &r)? == s_quadratic_closed(gram, c, cp, e, &r)?;
                            tally.record(true, ok, || format!("G = {gram:?}, r = {r}, c = {c:?}, c' = {cp:?}, e = {e}"));
                        }
                    }
                }
            } else {
                for _ in 0..60 {
                    let c = rand_vec(&mut rng, p, d, n - 1);
                    let cp = rand_vec(&mut rng, p, d, n - 1);
                    let e = rand_vec(&mut rng, p, 1, n - 1).remove(0);
                    let ok = s_quadratic_direct(gram, &c, &cp, &e, &r)? == s_quadratic_closed(gram, &c, &cp, &e, &r)?;
                    tally.record(false, ok, || format!("G = {gram:?}, r = {r}, c = {c:?}"));
                }
            }
        }
    }
    for d in [3usize, 4] {
        for r in enumerate(p, max_deg, true) {
            for _ in 0..6 {
                let gram = random_gram(&mut rng, p, d);
                if !det(&gram).is_coprime(&r) {
                    continue;
                }
                let n = (r.deg().max(1) - 1) as usize;
                let c = rand_vec(&mut rng, p, d, n);
                let cp = rand_vec(&mut rng, p, d, n);
                let e = rand_vec(&mut rng, p, 1, n).remove(0);
                let ok = s_quadratic_direct(&gram, &c, &cp, &e, &r)? == s_quadratic_closed(&gram, &c, &cp, &e, &r)?;
                tally.record(false, ok, || format!("G = {gram:?}, r = {r}"));
            }
        }
    }
    Ok(tally)
}

pub fn expsum(suite: ExpsumSuite, insts: &[Instance], max_deg_r: usize, x_deg: usize, seed: u64) -> Result<ExpsumReport> {
    let p = insts.first().map_or(3, |i| i.p());
    let all = suite == ExpsumSuite::All;
    let paths = if all || suite == ExpsumSuite::Paths { path_rows(insts, max_deg_r, seed)? } else { Vec::new() };
    let multiplicative = if all || suite == ExpsumSuite::Multiplicative { Some(multiplicativity(p, max_deg_r + 1, seed)?) } else { None };
    let closed = if all || suite == ExpsumSuite::Closed { Some(closed_form(p, max_deg_r, seed)?) } else { None };
    let average = match (all || suite == ExpsumSuite::Average, insts.first()) {
        (true, Some(inst)) => Some(average_scan(inst, &vec![Poly::zero(p); inst.dim()], x_deg)?),
        _ => None,
    };
    let pass = paths.iter().all(|r| r.reduced_equal && r.factored_equal && r.coordinatewise_equal != Some(false))
        && multiplicative.as_ref().map_or(true, Tally::pass)
        && closed.as_ref().map_or(true, Tally::pass)
        && average.as_ref().map_or(true, |a| a.rows.iter().all(|r| r.l.is_finite()));
    Ok(ExpsumReport { q: p, max_deg_r, paths, multiplicative, closed_form: closed, average, pass })
}

pub const WEIL_HEADERS: &[&str] = &["q", "d", "deg_g", "deg_r", "c_tag", "value_re", "value_im", "bound", "pass"];

#[derive(Clone, Debug, Serialize)]
pub struct WeilReport {
    pub q: u32,
    pub deg: usize,
    pub rows_checked: usize,
    pub failures: usize,
    pub pass: bool,
}

pub fn weil(p: u32, deg: usize) -> Result<(WeilReport, Vec<ScanRow>)> {
    let rows = weil_scan(p, deg)?;
    let failures = rows.iter().filter(|r| !r.pass).count();
    Ok((WeilReport { q: p, deg, rows_checked: rows.len(), failures, pass: failures == 0 }, rows))
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialReport {
    pub n: usize,
    pub modulus: String,
    pub lhs: Exact,
    pub rhs: Exact,
    pub equal: bool,
}

pub fn partial(inst: &Instance, n: usize) -> Result<PartialReport> {
    let res = partial_identity_check(inst, n)?;
    Ok(PartialReport { n, modulus: res.modulus.to_string(), lhs: Exact::from(&res.lhs), rhs: Exact::from(&res.rhs), equal: res.equal })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub prime: String,
    pub stable_at: Option<u32>,
    pub first_levels_equal: bool,
    pub sigma: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub max_deg: usize,
    pub rows: Vec<StabilityRow>,
    pub pass: bool,
}

pub const STABILITY_HEADERS: &[&str] = &["prime", "stable_at", "first_levels_equal", "sigma"];

/// Every monic irreducible `ϖ ∤ 2fΔg` of degree at most `max_deg` should
/// have `σ_ϖ` settled at the first level.
pub fn stability(inst: &Instance, max_deg: usize) -> Result<StabilityReport> {
    let bad = &(&inst.f * &inst.delta()) * &inst.g;
    let mut rows = Vec::new();
    for deg in 1..=max_deg {
        for w in irreducibles_of_degree(inst.p(), deg) {
            if w.divides(&bad) {
                continue;
            }
            let prof = sigma_local(inst, &w, 2)?;
            let eq = prof.levels.len() >= 2 && prof.levels[0].normalized == prof.levels[1].normalized;
            rows.push(StabilityRow { prime: w.to_string(), stable_at: prof.k_stable, first_levels_equal: eq, sigma: prof.sigma.map(|s| s.to_string()) });
        }
    }
    let pass = !rows.is_empty() && rows.iter().all(|r| r.first_levels_equal && r.stable_at == Some(1));
    Ok(StabilityReport { max_deg, rows, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    pub deg_bound: usize,
    pub product: String,
    pub product_approx: f64,
    pub positive: bool,
    pub obstructions: Vec<String>,
    pub unstable: Vec<String>,
    pub factors: Vec<DensityReport>,
}

pub fn series(inst: &Instance, deg_bound: usize) -> Result<SeriesReport> {
    let s = singular_series(inst, deg_bound)?;
    Ok(SeriesReport {
        deg_bound,
        product: s.product.to_string(),
        product_approx: ratio_f64(&s.product),
        positive: s.positive(),
        obstructions: s.obstructions.iter().map(|x| x.to_string()).collect(),
        unstable: s.unstable.iter().map(|x| x.to_string()).collect(),
        factors: s.factors.iter().map(|f| f.report()).collect(),
    })
}

pub fn sigma(inst: &Instance, prime: &Poly, k_max: u32) -> Result<DensityReport> {
    Ok(sigma_local(inst, prime, k_max)?.report())
}

pub fn tail(inst: &Instance, t_deg: usize) -> Result<TailReport> {
    Ok(tail_report(inst, t_deg)?)
}

pub const TAIL_HEADERS: &[&str] = &["t", "increment", "cumulative", "terms"];

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    #[serde(rename = "Q")]
    pub big_q: i64,
    #[serde(rename = "R")]
    pub big_r: i64,
    pub rho: i64,
    pub route: Route,
    pub n_direct: u128,
    pub n_circle: Exact,
    pub terms: usize,
    pub equal: bool,
}

/// `N(w, λ)` by enumeration and by the assembled delta-method expansion.
pub fn circle_identity(inst: &Instance, w: &Weight, route: Route) -> Result<IdentityReport> {
    let direct = n_direct(inst, w)?;
    let terms = circle_terms(inst, w, route)?;
    let value = assemble(inst, w, &terms);
    Ok(IdentityReport {
        big_q: w.big_q,
        big_r: w.big_r,
        rho: w.rho,
        route,
        n_direct: direct,
        n_circle: Exact::from(&value),
        terms: terms.len(),
        equal: value == ScaledCyclotomic::from_int(inst.p(), direct as i128),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CountReport {
    #[serde(rename = "Q")]
    pub big_q: i64,
    #[serde(rename = "R")]
    pub big_r: i64,
    pub rho: i64,
    pub n_direct: u128,
}

pub fn count(inst: &Instance, w: &Weight) -> Result<CountReport> {
    Ok(CountReport { big_q: w.big_q, big_r: w.big_r, rho: w.rho, n_direct: n_direct(inst, w)? })
}

pub fn ordinary(inst: &Instance, w: &Weight, samples: usize, seed: u64) -> Result<OrdinaryReport> {
    Ok(ordinary_check(inst, w, 1, samples, seed)?)
}

pub fn factorization(inst: &Instance, w: &Weight, cap: u128, samples: usize, seed: u64) -> Result<FactorizationReport> {
    Ok(factorization_check(inst, w, w.big_q, cap, samples, seed)?)
}

/// Constant frequency vectors over `r = t^n`, `n ≤ Q`.
pub fn constant_cases(inst: &Instance, w: &Weight) -> Vec<(Poly, Vec<Poly>)> {
    let p = inst.p();
    let d = inst.dim() as u32;
    let mut cases = Vec::new();
    for n in 0..=w.big_q.max(0) as usize {
        for idx in 1..(p as u64).pow(d) {
            let c = (0..d).map(|i| Poly::constant(p, ((idx / (p as u64).pow(i)) % p as u64) as u32)).collect();
            cases.push((Poly::monomial(p, 1, n), c));
        }
    }
    cases
}

#[derive(Clone, Debug, Serialize)]
pub struct ExceptionalSummary {
    #[serde(rename = "Q")]
    pub big_q: i64,
    pub c_bound_r1: i64,
    /// Some vector inside the dual cone above the threshold is nonzero, so
    /// the vanishing outside it is not vacuous.
    pub discriminates: bool,
    pub report: ExceptionalReport,
    pub pass: bool,
}

pub fn exceptional(inst: &Instance, w: &Weight, cone: &Cone, eta: Option<i64>) -> Result<ExceptionalSummary> {
    let eta = eta.unwrap_or_else(|| default_eta_exp(w));
    let rep = exceptional_report(inst, w, cone, &constant_cases(inst, w), eta)?;
    let discriminates = rep.rows.iter().any(|x| x.in_dual_cone && x.margin >= eta && !x.vanishes)
        && rep.rows.iter().any(|x| !x.in_dual_cone && x.margin >= eta);
    Ok(ExceptionalSummary {
        big_q: w.big_q,
        c_bound_r1: c_bound(inst, w, 0),
        discriminates,
        pass: rep.violations == 0,
        report: rep,
    })
}

pub fn region(inst: &Instance, w: &Weight) -> Result<Vec<(Route, RegionReport)>> {
    let p = inst.p();
    let d = inst.dim();
    let mut cases = Vec::new();
    for r in enumerate(p, 2, true) {
        cases.push((r.clone(), vec![Poly::zero(p); d]));
        let mut e1 = vec![Poly::zero(p); d];
        e1[0] = Poly::one(p);
        cases.push((r.clone(), e1));
        let mut mixed = vec![Poly::zero(p); d];
        mixed[0] = Poly::constant(p, 2);
        mixed[d - 1] = Poly::one(p);
        cases.push((r, mixed));
    }
    [Route::Direct, Route::Dual].into_iter().map(|route| Ok((route, region_check(inst, w, &cases, route)?))).collect()
}

pub fn zero_rows(inst: &Instance, w: &Weight) -> Result<Vec<ZeroRow>> {
    Ok(zero_frequency_report(inst, w)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub deg_bound: i64,
    pub found: bool,
    pub solution: Option<Vec<String>>,
    pub verified: Option<bool>,
    pub examined: Option<u128>,
}

pub fn solve_instance(inst: &Instance, cone: &Cone, deg_bound: Option<i64>) -> Result<SolveReport> {
    let bound = match deg_bound {
        Some(b) => b,
        None => cone_window(&inst.form, cone, inst.f.deg())?,
    };
    Ok(match solve(inst, cone, bound)? {
        SolveOutcome::Found(x) => {
            let verified = inst.form.eval_poly(&x) == inst.f
                && x.iter().zip(&inst.lambda).all(|(a, l)| (a - l).rem(&inst.g).is_zero())
                && cone.contains_poly(&inst.form, &x)?;
            SolveReport { deg_bound: bound, found: true, solution: Some(x.iter().map(|e| e.to_string()).collect()), verified: Some(verified), examined: None }
        }
        SolveOutcome::Absent { deg_bound, examined } => SolveReport { deg_bound, found: false, solution: None, verified: None, examined: Some(examined) },
    })
}

pub const THRESHOLD_HEADERS: &[&str] = &["trial", "deg_g", "g", "residue", "min_deg_any", "min_deg_all", "ratio_any", "ratio_all", "sampled"];

/// Smallest solvable degree per residue class for `d` squares, in the
/// dominant-coordinate cone. `trials` limits how many default trials run.
pub fn threshold(p: u32, d: usize, deg_g: usize, max_deg_f: i64, samples: usize, trials: usize, seed: u64) -> Result<Vec<ThresholdRow>> {
    let form = QuadForm::sum_of_squares(p, d)?;
    let cone = Cone::dominant_coordinate(0);
    let mut t = default_trials(&form, deg_g, seed);
    t.truncate(trials);
    Ok(threshold_scan(&form, &cone, &t, max_deg_f, samples, seed)?)
}

pub fn optimality(p: u32, d: usize, g: &Poly) -> Result<OptimalityWitness> {
    Ok(optimality_witness(p, d, g)?)
}

pub struct MorgensternRun {
    pub stats: GraphStats,
    pub edges: Option<Vec<u8>>,
}

pub fn morgenstern(q: u32, nu: u32, g: &Poly, iterations: usize, seed: u64, edges: bool) -> Result<MorgensternRun> {
    let cg = build_cayley(g, q, nu)?;
    let stats = graph_stats(&cg, iterations, seed)?;
    let edges = if edges {
        let mut buf = Vec::new();
        cg.graph.write_edges(&mut buf)?;
        Some(buf)
    } else {
        None
    };
    Ok(MorgensternRun { stats, edges })
}

/// Structural checks on the stats: regular of degree `q + 1`, symmetric,
/// connected, and the gap estimate below `2√q` with a small margin.
pub fn graph_ok(s: &GraphStats) -> bool {
    s.symmetric && s.connected && s.degree == s.q as usize + 1 && s.gap_estimate <= 2.0 * (s.q as f64).sqrt() + 0.05
}
