//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
//! when any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 6`.

use std::fmt::Debug;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use faer::Mat;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use snomial::certify::{feasibility_probe, verify_identity, ProbeOutcome};
use snomial::cli::{parse_grid, run_bench};
use snomial::conic::{in_soc, smat, soc_of_psd2, solve, svec, SolveStatus, SolverOptions};
use snomial::pmsv::{
    bench_generate, make_instance, oracle_projected_gradient, oracle_support_enum, putinar_bound, quadratic, upper_bound,
    upper_bound_q, BenchParams,
};
use snomial::poly::{ball_constraint, polya_multiplier};
use snomial::relax::{
    build_polya, build_putinar, extract_certificate, Certificate, GramWitness, Layout, MultiplierCert, RelaxationSpec,
    solve_bound, Strategy as BlockStrategy,
};
use snomial::report::{parse_jsonl, render_table, to_jsonl};
use snomial::{Monomial, Polynomial};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn poly1(terms: &[(u32, f64)]) -> Polynomial {
    Polynomial::from_terms(1, terms.iter().map(|&(e, c)| (Monomial::new(vec![e]), c))).unwrap()
}

/// `(x^2 - 3/2)^2`
fn worked_f() -> Polynomial {
    poly1(&[(4, 1.0), (2, -3.0), (0, 2.25)])
}

fn m1(e: u32) -> Monomial {
    Monomial::new(vec![e])
}

fn diag(d: &[f64]) -> Mat<f64> {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            max_shrink_iters: 32,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn prop<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

// ---------------------------------------------------------------------------
// 1. Worked identity

fn worked_certificate() -> Certificate {
    let one = Polynomial::constant(1, 1.0);
    Certificate {
        n: 1,
        k: 2,
        lambda: 0.0,
        objective: worked_f().scale(-1.0),
        multipliers: vec![
            MultiplierCert {
                constraint: ball_constraint(1, 1.0, 2),
                sigma: poly1(&[(4, 1.0), (2, 3.75), (0, 2.25)]),
                blocks: vec![
                    GramWitness {
                        class: None,
                        subset: vec![],
                        monomials: vec![m1(0), m1(2)],
                        gram: vec![vec![2.25, 0.0], vec![0.0, 1.0]],
                    },
                    GramWitness {
                        class: None,
                        subset: vec![],
                        monomials: vec![m1(1)],
                        gram: vec![vec![3.75]],
                    },
                ],
            },
            MultiplierCert {
                constraint: one,
                sigma: poly1(&[(8, 1.0)]),
                blocks: vec![GramWitness {
                    class: None,
                    subset: vec![],
                    monomials: vec![m1(4)],
                    gram: vec![vec![1.0]],
                }],
            },
        ],
        residual: 0.0,
        psd_margin: 0.0,
    }
}

fn criterion_1() -> Outcome {
    let cert = worked_certificate();
    // Independent route: expand both sides.
    let lhs = polya_multiplier(1, 2).mul(&worked_f()).map_err(e2s)?;
    let rhs = cert.multipliers[0]
        .sigma
        .mul(&cert.multipliers[0].constraint)
        .and_then(|p| p.add(&cert.multipliers[1].sigma))
        .map_err(e2s)?;
    let expansion = lhs.max_abs_diff(&rhs).map_err(e2s)?;
    ensure(expansion == 0.0, || format!("direct expansion differs by {expansion:e}"))?;

    let start = Instant::now();
    let rep = verify_identity(&cert.objective, &cert.constraints(), cert.k, &cert);
    let dt = start.elapsed().as_secs_f64();
    ensure(rep.accepted && rep.residual == 0.0, || format!("verify_identity: accepted={} residual={:e}", rep.accepted, rep.residual))?;
    ensure(rep.psd_margin == 1.0, || format!("psd margin {}", rep.psd_margin))?;
    ensure(dt < 1e-3, || format!("verification took {dt:.6}s"))?;

    let fixture = Certificate::from_json(include_str!("../fixtures/worked_1d.cert.json")).map_err(e2s)?;
    let frep = verify_identity(&fixture.objective, &fixture.constraints(), fixture.k, &fixture);
    ensure(frep.accepted && frep.residual == 0.0, || format!("fixture residual {:e}", frep.residual))?;
    Ok(format!("residual 0 exactly, verification {:.1} us", dt * 1e6))
}

// ---------------------------------------------------------------------------
// 2. Counterexample

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let f = worked_f();
    let g = vec![ball_constraint(1, 1.0, 2)];
    let p0 = feasibility_probe(&f, &g, 0, &RelaxationSpec::new(0, 1)).map_err(e2s)?;
    ensure(p0.is_infeasible(), || format!("k=0 probe: {p0:?}"))?;
    let p2 = feasibility_probe(&f, &g, 2, &RelaxationSpec::new(2, 1)).map_err(e2s)?;
    let ProbeOutcome::Feasible { certificate, report } = p2 else {
        return Err(format!("k=2 probe: {p2:?}"));
    };
    ensure(report.accepted && report.residual <= 1e-8, || format!("k=2 residual {:e}", report.residual))?;
    // Independent re-verification of the returned certificate.
    let again = verify_identity(&certificate.objective, &certificate.constraints(), 2, &certificate);
    ensure(again.residual <= 1e-8, || format!("re-verification residual {:e}", again.residual))?;
    // With s = 1 the order-2 representation is unique.
    let want = [poly1(&[(4, 1.0), (2, 3.75), (0, 2.25)]), poly1(&[(8, 1.0)])];
    for (m, w) in certificate.multipliers.iter().zip(&want) {
        let d = m.sigma.max_abs_diff(w).map_err(e2s)?;
        ensure(d <= 1e-6, || format!("sigma {} differs from {} by {d:e}", m.sigma, w))?;
    }
    let dt = start.elapsed().as_secs_f64();
    ensure(dt < 1.0, || format!("took {dt:.3}s"))?;
    Ok(format!("k=0 infeasible, k=2 residual {:.1e}, {dt:.3}s", report.residual))
}

// ---------------------------------------------------------------------------
// 3. Program structure

fn putinar_constraints(n: usize) -> Vec<Polynomial> {
    let mut g: Vec<Polynomial> = (0..n).map(|i| Polynomial::monomial(Monomial::var(n, i, 1), 1.0)).collect();
    g.push(ball_constraint(n, 1.0, 2));
    g
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for r in 4..=7usize {
        let n = r * r;
        let m = bench_generate(BenchParams { r, seed: 0 }).m;
        let inst = make_instance(m.as_ref()).map_err(e2s)?;
        let start = Instant::now();
        let (p, _) = build_polya(&inst.objective, &inst.constraints, &RelaxationSpec::full(0)).map_err(e2s)?;
        let dt = start.elapsed().as_secs_f64();
        let s = p.stats();
        let naff = (n + 2) * (n + 1) / 2;
        ensure(s.nmat == 1 && s.msize == n + 1 && s.naff == naff, || {
            format!("n={n}: polya stats {s:?}, want nmat 1 msize {} naff {naff}", n + 1)
        })?;
        ensure(dt < 60.0, || format!("n={n}: build took {dt:.1}s"))?;
        let f = quadratic(inst.q.as_ref());
        let (pp, _) = build_putinar(&f, &putinar_constraints(n), 1).map_err(e2s)?;
        ensure(pp.stats().msize == n + 1, || format!("n={n}: putinar k=1 msize {}", pp.stats().msize))?;
        notes.push(format!("n={n} naff={naff} build {dt:.2}s"));
        if n == 16 {
            let (p2, _) = build_putinar(&f, &putinar_constraints(n), 2).map_err(e2s)?;
            ensure(p2.stats().msize == 153, || format!("putinar k=2 msize {}", p2.stats().msize))?;
        }
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------------------
// 4, 5. Random corpus

const GRID_STRATEGIES: [&str; 3] = ["diagonal", "all-pairs", "full"];

fn grid_spec(k: u32, j: usize) -> RelaxationSpec {
    match j {
        0 => RelaxationSpec::new(k, 1),
        1 => RelaxationSpec::new(k, 2),
        _ => RelaxationSpec::full(k),
    }
}

struct Cell {
    rho: f64,
    status: SolveStatus,
    certified: bool,
    residual: f64,
    fnorm: f64,
    certificate: Option<Certificate>,
}

struct Instance {
    seed: u64,
    n: usize,
    q: Mat<f64>,
    support: f64,
    gradient: f64,
    /// `cells[k][strategy]`
    cells: Vec<Vec<Cell>>,
}

struct Corpus {
    instances: Vec<Instance>,
    seconds: f64,
}

fn build_corpus() -> Result<Corpus, String> {
    let start = Instant::now();
    let mut instances = Vec::new();
    for seed in 0..100u64 {
        let r = 1 + (seed % 3) as usize;
        let m = bench_generate(BenchParams { r, seed }).m;
        let inst = make_instance(m.as_ref()).map_err(e2s)?;
        let q = inst.q.clone();
        let support = oracle_support_enum(q.as_ref()).map_err(e2s)?;
        let gradient = oracle_projected_gradient(q.as_ref(), 50, seed);
        let mut cells = Vec::new();
        for k in 0..2u32 {
            let mut row = Vec::new();
            for j in 0..3 {
                let b = upper_bound(m.as_ref(), &grid_spec(k, j)).map_err(e2s)?;
                let (residual, fnorm) = match (&b.verification, &b.certificate) {
                    (Some(v), Some(c)) => (v.residual, c.objective.max_abs_coeff()),
                    _ => (f64::NAN, f64::NAN),
                };
                row.push(Cell {
                    rho: b.rho,
                    status: b.status,
                    certified: b.certified(),
                    residual,
                    fnorm,
                    certificate: b.certificate,
                });
            }
            cells.push(row);
        }
        instances.push(Instance {
            seed,
            n: r * r,
            q,
            support,
            gradient,
            cells,
        });
    }
    Ok(Corpus {
        instances,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn corpus() -> Result<&'static Corpus, String> {
    static CORPUS: OnceLock<Result<Corpus, String>> = OnceLock::new();
    CORPUS.get_or_init(build_corpus).as_ref().map_err(Clone::clone)
}

/// Closed form for `k = 0`, diagonal: feasible iff every off-diagonal entry of
/// `Q` is nonpositive, and then `rho = max(0, max_i Q_ii)`.
fn diagonal_k0_value(q: &Mat<f64>) -> f64 {
    let n = q.nrows();
    let off_ok = (0..n).all(|i| (0..n).all(|j| i == j || q[(i, j)] <= 0.0));
    if !off_ok {
        return f64::INFINITY;
    }
    (0..n).map(|i| q[(i, i)]).fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let c = corpus()?;
    let mut infeasible = 0;
    for inst in &c.instances {
        let ctx = || format!("seed {} (n={})", inst.seed, inst.n);
        ensure(inst.gradient <= inst.support + 1e-6, || {
            format!("{}: gradient oracle {} above support oracle {}", ctx(), inst.gradient, inst.support)
        })?;
        for (k, row) in inst.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let name = || format!("{} k={k} {}", ctx(), GRID_STRATEGIES[j]);
                match cell.status {
                    SolveStatus::Infeasible => infeasible += 1,
                    s if s.has_solution() => ensure(cell.certified, || format!("{}: certificate rejected", name()))?,
                    s => return Err(format!("{}: solver status {s}", name())),
                }
                ensure(inst.support <= cell.rho + 1e-6, || format!("{}: support oracle {} above rho {}", name(), inst.support, cell.rho))?;
            }
        }
        let want = diagonal_k0_value(&inst.q);
        let got = inst.cells[0][0].rho;
        let agree = if want.is_infinite() {
            inst.cells[0][0].status == SolveStatus::Infeasible
        } else {
            (got - want).abs() <= 1e-6
        };
        ensure(agree, || format!("{}: k=0 diagonal rho {got}, closed form {want}", ctx()))?;
    }
    ensure(c.seconds < 300.0, || format!("corpus took {:.1}s", c.seconds))?;
    Ok(format!(
        "{} instances x 6 specs, {infeasible} infeasible cells (rho = +inf), {:.1}s",
        c.instances.len(),
        c.seconds
    ))
}

fn criterion_5() -> Outcome {
    let c = corpus()?;
    let mut checks = 0;
    for inst in &c.instances {
        for k in 0..2 {
            for j in 0..2 {
                let (wide, narrow) = (inst.cells[k][j + 1].rho, inst.cells[k][j].rho);
                ensure(wide <= narrow + 1e-6, || {
                    format!(
                        "seed {} k={k}: {} rho {wide} above {} rho {narrow}",
                        inst.seed,
                        GRID_STRATEGIES[j + 1],
                        GRID_STRATEGIES[j]
                    )
                })?;
                checks += 1;
            }
        }
        for j in 0..3 {
            let (r1, r0) = (inst.cells[1][j].rho, inst.cells[0][j].rho);
            ensure(r1 <= r0 + 1e-6, || format!("seed {} {}: rho k=1 {r1} above k=0 {r0}", inst.seed, GRID_STRATEGIES[j]))?;
            checks += 1;
        }
    }
    Ok(format!("{checks} comparisons"))
}

// ---------------------------------------------------------------------------
// 6. Exactness witnesses

fn criterion_6() -> Outcome {
    let spec = RelaxationSpec::new(0, 1);
    let b = upper_bound(diag(&[1.0, 2.0, 3.0]).as_ref(), &spec).map_err(e2s)?;
    ensure(b.certified() && (b.bound - 3.0).abs() <= 1e-6, || format!("diag(1,2,3): {} certified={}", b.bound, b.certified()))?;
    let q = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { -1.0 });
    let b2 = upper_bound_q(q.as_ref(), &spec).map_err(e2s)?;
    let root2 = 2f64.sqrt();
    ensure(b2.certified() && (b2.bound - root2).abs() <= 1e-6, || format!("[[2,-1],[-1,2]]: {} certified={}", b2.bound, b2.certified()))?;
    let exact = oracle_support_enum(q.as_ref()).map_err(e2s)?.sqrt();
    ensure((exact - root2).abs() <= 1e-12, || format!("support oracle gives {exact}"))?;
    Ok(format!("{:.9} and {:.9}", b.bound, b2.bound))
}

// ---------------------------------------------------------------------------
// 7. Convergence probe

fn criterion_7() -> Outcome {
    let f = worked_f();
    let g = vec![ball_constraint(1, 1.0, 2)];
    let mut rhos = Vec::new();
    for k in 0..=2u32 {
        let (p, layout) = build_polya(&f, &g, &RelaxationSpec::new(k, 1)).map_err(e2s)?;
        let r = solve_bound(&p, &SolverOptions::default());
        ensure(r.status == SolveStatus::Optimal, || format!("k={k}: status {}", r.status))?;
        let cert = extract_certificate(&layout, &r).map_err(e2s)?;
        let v = verify_identity(&f, &g, k, &cert);
        ensure(v.accepted, || format!("k={k}: certificate residual {:e}", v.residual))?;
        let tol = if k == 0 { 1e-6 } else { 1e-4 };
        ensure((cert.lambda - 2.25).abs() <= tol, || format!("k={k}: rho {}", cert.lambda))?;
        rhos.push(cert.lambda);
    }
    ensure(rhos.windows(2).all(|w| w[1] <= w[0] + 1e-6), || format!("not nonincreasing: {rhos:?}"))?;
    Ok(format!("rho_k = {rhos:.9?}"))
}

// ---------------------------------------------------------------------------
// 8. Pólya against Putinar on benchmark matrices

fn criterion_8() -> Outcome {
    let opts = SolverOptions::default();
    let mut worst_margin = f64::INFINITY;
    for seed in 1..=10u64 {
        let m = bench_generate(BenchParams { r: 4, seed }).m;
        let p0 = upper_bound(m.as_ref(), &RelaxationSpec::full(0)).map_err(e2s)?;
        let p1 = putinar_bound(m.as_ref(), 1, &opts).map_err(e2s)?;
        let p2 = putinar_bound(m.as_ref(), 2, &opts).map_err(e2s)?;
        println!(
            "    seed {seed:>2}: polya k=0 {:.6} ({:.3}s)  putinar k=1 {:.6} ({:.3}s)  putinar k=2 {:.6} ({:.3}s)",
            p0.bound,
            p0.total_time(),
            p1.bound,
            p1.total_time(),
            p2.bound,
            p2.total_time()
        );
        ensure(p0.certified(), || format!("seed {seed}: polya certificate rejected"))?;
        ensure(p1.status.has_solution(), || format!("seed {seed}: putinar k=1 status {}", p1.status))?;
        ensure(p0.bound <= p1.bound + 1e-6, || format!("seed {seed}: polya {} above putinar k=1 {}", p0.bound, p1.bound))?;
        ensure(p0.total_time() < p2.total_time(), || {
            format!("seed {seed}: polya took {:.3}s, putinar k=2 {:.3}s", p0.total_time(), p2.total_time())
        })?;
        worst_margin = worst_margin.min(p1.bound - p0.bound);
    }
    Ok(format!("10 seeds, smallest putinar k=1 minus polya gap {worst_margin:.3e}"))
}

// ---------------------------------------------------------------------------
// 9. Property suites

fn poly_strategy(n: usize) -> impl Strategy<Value = Polynomial> {
    vec((vec(0u32..=4, n), -5i32..=5), 0..7).prop_map(move |terms| {
        Polynomial::from_terms(
            n,
            terms
                .into_iter()
                .filter(|(e, _)| e.iter().sum::<u32>() <= 4)
                .map(|(e, c)| (Monomial::new(e), f64::from(c))),
        )
        .unwrap()
    })
}

fn suite_polynomials() -> Outcome {
    let triples = (1usize..=4).prop_flat_map(|n| (poly_strategy(n), poly_strategy(n), poly_strategy(n)));
    prop(128, triples, |(p, q, r)| {
        let pq = p.mul(&q).unwrap();
        prop_assert_eq!(&pq, &q.mul(&p).unwrap());
        prop_assert_eq!(pq.mul(&r).unwrap(), p.mul(&q.mul(&r).unwrap()).unwrap());
        prop_assert_eq!(p.mul(&q.add(&r).unwrap()).unwrap(), pq.add(&p.mul(&r).unwrap()).unwrap());
        prop_assert_eq!(pq.check_substitute(), p.check_substitute().mul(&q.check_substitute()).unwrap());
        prop_assert!(p.check_substitute().is_even());
        Ok(())
    })?;
    prop(32, (1usize..5, 0u32..4), |(n, k)| {
        prop_assert_eq!(polya_multiplier(n, k + 1), polya_multiplier(n, k).mul(&polya_multiplier(n, 1)).unwrap());
        Ok(())
    })?;
    Ok("ring laws, substitution, multiplier steps".into())
}

fn sym(d: usize, v: &[f64]) -> Mat<f64> {
    Mat::from_fn(d, d, |i, j| 0.5 * (v[i * d + j] + v[j * d + i]))
}

fn sym_pair() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|d| (Just(d), vec(-10.0f64..10.0, d * d), vec(-10.0f64..10.0, d * d)))
}

fn suite_svec() -> Outcome {
    prop(256, sym_pair(), |(d, va, vb)| {
        let a = sym(d, &va);
        let b = sym(d, &vb);
        let sa = svec(a.as_ref()).map_err(|e| fail(e.to_string()))?;
        let sb = svec(b.as_ref()).map_err(|e| fail(e.to_string()))?;
        let back = smat(&sa, d);
        for i in 0..d {
            for j in 0..d {
                prop_assert!((back[(i, j)] - a[(i, j)]).abs() <= 1e-12 * (1.0 + a[(i, j)].abs()));
            }
        }
        let again = svec(back.as_ref()).map_err(|e| fail(e.to_string()))?;
        for (u, v) in again.iter().zip(&sa) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()), "svec(smat(v)) {} vs {}", u, v);
        }
        let dot: f64 = sa.iter().zip(&sb).map(|(x, y)| x * y).sum();
        let mut tr = 0.0;
        let mut scale = 0.0;
        for i in 0..d {
            for j in 0..d {
                tr += a[(i, j)] * b[(j, i)];
                scale += (a[(i, j)] * b[(j, i)]).abs();
            }
        }
        prop_assert!((dot - tr).abs() <= 1e-12 * (1.0 + scale), "dot {} trace {}", dot, tr);
        Ok(())
    })?;
    prop(10_000, (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), |(a, b, c)| {
        let min_eig = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let inside = in_soc(&soc_of_psd2(a, b, c), 0.0);
        if min_eig > 1e-10 {
            prop_assert!(inside);
        } else if min_eig < -1e-10 {
            prop_assert!(!inside);
        }
        Ok(())
    })?;
    Ok("svec round trip, inner products, 10^4 SOC triples".into())
}

/// PMSV relaxations used by the program-level suites.
fn sample_programs() -> Vec<(String, snomial::conic::ConicProgram, Layout)> {
    let mut out = Vec::new();
    for seed in 0..4u64 {
        let r = 2 + (seed % 2) as usize;
        let m = bench_generate(BenchParams { r, seed }).m;
        let inst = make_instance(m.as_ref()).unwrap();
        let fro = inst.q.norm_l2().max(1.0);
        let qs = Mat::from_fn(inst.q.nrows(), inst.q.ncols(), |i, j| inst.q[(i, j)] / fro);
        let f = snomial::pmsv::checked_quadratic(qs.as_ref());
        for (name, spec) in [("full k=0", RelaxationSpec::full(0)), ("all-pairs k=1", RelaxationSpec::new(1, 2))] {
            let (p, l) = build_polya(&f, &inst.constraints, &spec).unwrap();
            out.push((format!("seed {seed} {name}"), p, l));
        }
        let (p, l) = build_putinar(&quadratic(qs.as_ref()), &putinar_constraints(inst.q.nrows()), 1).unwrap();
        out.push((format!("seed {seed} putinar k=1"), p, l));
    }
    out
}

fn suite_conic() -> Outcome {
    let opts = SolverOptions::default();
    let mut solved = 0;
    for (name, p, _) in sample_programs() {
        let r = solve(&p, &opts);
        if r.status != SolveStatus::Optimal {
            return Err(format!("{name}: status {}", r.status));
        }
        solved += 1;
        let bmax = p.rhs().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let cmax = p.cost().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let prim = p.primal_residual(&r.primal) / (1.0 + bmax);
        let mut aty = vec![0.0; p.num_vars()];
        p.constraints().mul_t_vec(&r.dual, &mut aty);
        let dual = aty
            .iter()
            .zip(&r.dual_slack)
            .zip(p.cost())
            .fold(0.0, |m: f64, ((a, z), c)| m.max((a + z - c).abs()))
            / (1.0 + cmax);
        let cx: f64 = p.cost().iter().zip(&r.primal).map(|(c, x)| c * x).sum();
        let by: f64 = p.rhs().iter().zip(&r.dual).map(|(b, y)| b * y).sum();
        let gap = (cx - by).abs() / (1.0 + cx.abs());
        ensure(prim <= opts.feas_tol && (prim - r.primal_residual).abs() <= 1e-12, || {
            format!("{name}: primal residual {prim:e}, reported {:e}", r.primal_residual)
        })?;
        ensure(dual <= opts.feas_tol && (dual - r.dual_residual).abs() <= 1e-12, || {
            format!("{name}: dual residual {dual:e}, reported {:e}", r.dual_residual)
        })?;
        ensure(gap <= opts.gap_tol && (gap - r.gap).abs() <= 1e-12, || format!("{name}: gap {gap:e}, reported {:e}", r.gap))?;
        ensure((cx - r.objective).abs() <= 1e-12 * (1.0 + cx.abs()), || format!("{name}: objective {cx} reported {}", r.objective))?;
        let xv = p.cone_violation(&r.primal);
        let zv = p.cone_violation(&r.dual_slack);
        ensure(xv <= 1e-12 && zv <= 1e-12, || format!("{name}: cone violations x {xv:e}, z {zv:e}"))?;
    }
    Ok(format!("{solved} optimal programs re-checked"))
}

fn suite_rows() -> Outcome {
    let programs = sample_programs();
    let mut checked = 0;
    for (name, p, layout) in &programs {
        let widths = p.num_vars();
        prop(8, vec(-1.0f64..1.0, widths), |x| {
            let mut ax = vec![0.0; p.num_rows()];
            p.constraints().mul_vec(&x, &mut ax);
            let res: Vec<f64> = ax.iter().zip(p.rhs()).map(|(a, b)| a - b).collect();
            let n = layout.n;
            let lam = Polynomial::constant(n, layout.lambda(&x));
            let mut diff = polya_multiplier(n, layout.k).mul(&lam.sub(&layout.objective).unwrap()).unwrap();
            for (s, g) in layout.sigmas(&x).iter().zip(&layout.constraints) {
                diff = diff.sub(&s.mul(g).unwrap()).unwrap();
            }
            let scale = 1e-10 * (1.0 + diff.max_abs_coeff());
            let rows: std::collections::HashMap<&Monomial, usize> = layout.rows.iter().enumerate().map(|(i, m)| (m, i)).collect();
            for (m, c) in diff.terms() {
                if !rows.contains_key(m) {
                    prop_assert!(c.abs() <= scale, "{}: monomial {:?} outside the rows has coefficient {}", name, m, c);
                }
            }
            let plus = layout.rows.iter().zip(&res).all(|(m, r)| (diff.coeff(m) - r).abs() <= scale);
            let minus = layout.rows.iter().zip(&res).all(|(m, r)| (diff.coeff(m) + r).abs() <= scale);
            prop_assert!(plus || minus, "{}: rows do not reproduce the identity", name);
            Ok(())
        })?;
        checked += 1;
    }
    Ok(format!("{checked} layouts, random points"))
}

fn shuffled(cert: &Certificate) -> Certificate {
    let mut c = cert.clone();
    for (i, m) in c.multipliers.iter_mut().enumerate() {
        m.blocks.reverse();
        let len = m.blocks.len();
        if len > 1 {
            m.blocks.rotate_left(i % len + 1);
        }
    }
    c
}

fn suite_certify() -> Outcome {
    let c = corpus()?;
    let mut shuffles = 0;
    for inst in &c.instances {
        for (k, row) in inst.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let Some(cert) = &cell.certificate else { continue };
                let bound = 1e-8 * (1.0 + cell.fnorm);
                ensure(cell.residual <= bound, || {
                    format!("seed {} k={k} {}: residual {:e} above {bound:e}", inst.seed, GRID_STRATEGIES[j], cell.residual)
                })?;
                let a = verify_identity(&cert.objective, &cert.constraints(), cert.k, cert);
                let s = shuffled(cert);
                let b = verify_identity(&s.objective, &s.constraints(), s.k, &s);
                ensure(a == b, || format!("seed {} k={k} {}: report depends on block order", inst.seed, GRID_STRATEGIES[j]))?;
                shuffles += 1;
            }
        }
    }

    let g = vec![ball_constraint(1, 1.0, 2)];
    let family: Vec<Polynomial> = [1.25, 1.5, 2.0, 3.0]
        .iter()
        .map(|&a| poly1(&[(4, 1.0), (2, -2.0 * a), (0, a * a)]))
        .chain([poly1(&[(4, 1.0), (2, 1.0), (0, 1.0)]), poly1(&[(6, 1.0), (2, -1.0), (0, 1.0)])])
        .collect();
    let mut implications = 0;
    for f in &family {
        let mut feasible = [[false; 2]; 5];
        for k in 0..=4u32 {
            for (j, spec) in [RelaxationSpec::new(k, 1), RelaxationSpec::full(k)].iter().enumerate() {
                feasible[k as usize][j] = feasibility_probe(f, &g, k, spec).map_err(e2s)?.is_feasible();
            }
        }
        for k in 0..4 {
            for j in 0..2 {
                if feasible[k][j] {
                    ensure(feasible[k + 1][j], || format!("{f}: feasible at k={k} but not k={}", k + 1))?;
                    implications += 1;
                }
            }
        }
        for (k, row) in feasible.iter().enumerate() {
            if row[0] {
                ensure(row[1], || format!("{f}: diagonal feasible at k={k} but full is not"))?;
                implications += 1;
            }
        }
    }
    Ok(format!("{shuffles} shuffled certificates, {implications} probe implications"))
}

fn matrix_strategy(max_n: usize) -> impl Strategy<Value = Mat<f64>> {
    (1usize..=max_n).prop_flat_map(|n| vec(-1.0f64..1.0, n * n).prop_map(move |v| Mat::from_fn(n, n, |i, j| v[i * n + j])))
}

fn suite_pmsv() -> Outcome {
    let specs = [RelaxationSpec::full(0), RelaxationSpec::new(0, 1), RelaxationSpec::full(1), RelaxationSpec::new(1, 1)];
    prop(16, (matrix_strategy(4), 0.1f64..5.0, any::<bool>()), |(m, c, neg)| {
        let c = if neg { -c } else { c };
        let cm = Mat::from_fn(m.nrows(), m.ncols(), |i, j| c * m[(i, j)]);
        for spec in &specs {
            let a = upper_bound(m.as_ref(), spec).map_err(|e| fail(e.to_string()))?;
            let b = upper_bound(cm.as_ref(), spec).map_err(|e| fail(e.to_string()))?;
            if a.bound.is_infinite() || b.bound.is_infinite() {
                prop_assert_eq!(a.status, b.status);
                prop_assert_eq!(a.status, SolveStatus::Infeasible);
            } else {
                let want = c.abs() * a.bound;
                prop_assert!((b.bound - want).abs() <= 1e-6 * want.max(1.0), "{} vs {}", b.bound, want);
            }
        }
        Ok(())
    })?;
    let perm_case = matrix_strategy(5).prop_flat_map(|m| {
        let n = m.nrows();
        (Just(m), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    });
    prop(16, perm_case, |(m, perm)| {
        let inst = make_instance(m.as_ref()).unwrap();
        let n = perm.len();
        let pq = Mat::from_fn(n, n, |i, j| inst.q[(perm[i], perm[j])]);
        let a = upper_bound_q(inst.q.as_ref(), &RelaxationSpec::full(0)).unwrap();
        let b = upper_bound_q(pq.as_ref(), &RelaxationSpec::full(0)).unwrap();
        prop_assert!((a.bound - b.bound).abs() <= 1e-6, "{} vs {}", a.bound, b.bound);
        Ok(())
    })?;
    prop(16, vec(-3.0f64..3.0, 1..=5), |d| {
        let b = upper_bound(diag(&d).as_ref(), &RelaxationSpec::new(0, 1)).unwrap();
        let want = d.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        prop_assert!((b.bound - want).abs() <= 1e-6, "{} vs {}", b.bound, want);
        Ok(())
    })?;
    let sym_q = (1usize..=8).prop_flat_map(|n| vec(-1.0f64..1.0, n * n).prop_map(move |v| sym(n, &v)));
    prop(100, sym_q, |q| {
        let se = oracle_support_enum(q.as_ref()).unwrap();
        let pg = oracle_projected_gradient(q.as_ref(), 50, 0);
        prop_assert!((se - pg).abs() <= 1e-6, "support {} gradient {}", se, pg);
        Ok(())
    })?;
    let spec_choice = prop_oneof![
        Just(RelaxationSpec::full(0)),
        Just(RelaxationSpec::new(0, 2)),
        Just(RelaxationSpec::new(0, 3).with_strategy(BlockStrategy::Windows)),
        Just(RelaxationSpec::new(1, 1)),
    ];
    let sym_q = (1usize..=6).prop_flat_map(|n| vec(-1.0f64..1.0, n * n).prop_map(move |v| sym(n, &v)));
    prop(24, (sym_q, spec_choice), |(q, spec)| {
        let se = oracle_support_enum(q.as_ref()).unwrap();
        let pg = oracle_projected_gradient(q.as_ref(), 20, 1);
        let b = upper_bound_q(q.as_ref(), &spec).unwrap();
        prop_assert!(pg <= se + 1e-6);
        prop_assert!(b.status == SolveStatus::Infeasible || b.certified(), "status {}", b.status);
        prop_assert!(se <= b.rho + 1e-6, "support {} rho {}", se, b.rho);
        Ok(())
    })?;
    Ok("scaling, permutation, diagonal exactness, oracle agreement, sandwich".into())
}

fn suite_report() -> Outcome {
    let grid = parse_grid("polya:k0:full,polya:k1:s2,putinar:k1").map_err(e2s)?;
    let run = || run_bench(&[2, 3], 11, &grid, &SolverOptions::default(), None, 2, 0).map_err(e2s);
    let a = run()?;
    let b = run()?;
    let strip = |recs: &[snomial::report::BenchRecord]| -> Vec<String> {
        recs.iter()
            .map(|r| {
                let mut r = r.clone();
                r.time_s = 0.0;
                r.to_json_line().unwrap()
            })
            .collect()
    };
    ensure(strip(&a) == strip(&b), || "records differ between identical runs".into())?;
    let text = to_jsonl(&a).map_err(e2s)?;
    let back = parse_jsonl(&text).map_err(e2s)?;
    ensure(render_table(&back) == render_table(&a), || "table changed after a JSON-lines round trip".into())?;
    Ok(format!("{} records reproducible and round-tripped", a.len()))
}

fn criterion_9() -> Outcome {
    let suites: [(&str, fn() -> Outcome); 7] = [
        ("polynomial algebra", suite_polynomials),
        ("svec and SOC maps", suite_svec),
        ("solver residual re-check", suite_conic),
        ("row round trip", suite_rows),
        ("certificate checks", suite_certify),
        ("pmsv properties", suite_pmsv),
        ("report records", suite_report),
    ];
    let mut failed = Vec::new();
    for (name, suite) in suites {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(suite)).unwrap_or_else(|p| Err(panic_text(p)));
        let dt = start.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("    ok   {name} ({dt:.2}s): {d}"),
            Err(e) => {
                println!("    FAIL {name} ({dt:.2}s): {e}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        Ok(format!("{} suites", suites.len()))
    } else {
        Err(format!("failing suites: {}", failed.join(", ")))
    }
}

// ---------------------------------------------------------------------------

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .map_or("panicked".into(), |s| format!("panicked: {s}"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "worked identity verifies exactly", criterion_1),
        (2, "counterexample probe", criterion_2),
        (3, "program structure", criterion_3),
        (4, "soundness sandwich", criterion_4),
        (5, "width and order monotonicity", criterion_5),
        (6, "exactness witnesses", criterion_6),
        (7, "one-dimensional convergence", criterion_7),
        (8, "polya k=0 against putinar", criterion_8),
        (9, "property suites", criterion_9),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut passed = 0;
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| Err(panic_text(p)));
        let dt = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => {
                passed += 1;
                println!("criterion {id} PASS  {name} [{dt:.2}s]: {detail}");
            }
            Err(e) => {
                failed += 1;
                println!("criterion {id} FAIL  {name} [{dt:.2}s]: {e}");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
