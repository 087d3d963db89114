//! Acceptance criteria 1–11. Each test prints one PASS/FAIL line with the
//! measured quantity, the pinned tolerance and the runtime budget.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::time::{Duration, Instant};

use hypflow_core::airy::{ai_real, airy_ai, j, wronskian, wronskian_exact};
use hypflow_core::branching::{GammaChoice, GrowthEnvelope};
use hypflow_core::classifier::{classify, discriminant_jet_crosscheck, ClassifyOptions, Regime};
use hypflow_core::linalg::{self, c, complexify, CMat, RMat, RVec, C64};
use hypflow_core::pde_sim::*;
use hypflow_core::registry::{self, ExampleParams};
use hypflow_core::semiclassical::*;
use hypflow_core::symbolic_flow::*;
use hypflow_core::system_model::{charpoly_jet, CotangentPoint, JetSteps, LinearizedSymbol, ReferenceSolution, SymbolFamily};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

fn report(id: u32, name: &str, ok: bool, elapsed: Duration, budget: Duration, detail: String) -> bool {
    let in_time = elapsed <= budget;
    let pass = ok && in_time;
    let line = format!(
        "criterion {id:>2} {name}: {} — {detail}; runtime {:.2?} (budget {:.0?}{})\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed,
        budget,
        if in_time { "" } else { ", exceeded" }
    );
    // straight to the stderr handle: the harness only captures print!/eprint!,
    // and the summary lines should show for passing criteria too
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

// ---------------------------------------------------------------- 1

const WRONSKIAN_TOL: f64 = 1e-8;

#[test]
fn criterion_01_wronskian() {
    let t0 = Instant::now();
    let exact = wronskian_exact();
    // independent value of the constant
    let oracle = C64::new(-(3f64).sqrt(), 1.0) / (4.0 * PI);
    let mut worst = rel(exact, oracle);
    for &tau in &[-10.0, -5.0, 0.0, 5.0, 10.0] {
        worst = worst.max(rel(wronskian(tau).unwrap(), oracle));
    }
    let ok = worst <= WRONSKIAN_TOL;
    assert!(report(1, "Wronskian", ok, t0.elapsed(), Duration::from_secs(1),
        format!("max relative error {worst:.2e} (tol {WRONSKIAN_TOL:e})")));
}

// ---------------------------------------------------------------- 2

const AIRY_C_MAX: f64 = 0.2;

#[test]
fn criterion_02_airy_asymptotics() {
    let t0 = Instant::now();
    let pref = 2.0 * PI.sqrt();
    let ts: Vec<f64> = (0..=40).map(|k| 10.0 + 0.5 * k as f64).collect();
    let mut c_decay: f64 = 0.0;
    let mut c_growth: f64 = 0.0;
    let rot = C64::from_polar(1.0, PI / 6.0);
    for &t in &ts {
        let zeta = (2.0 / 3.0) * t.powf(1.5);
        let a = ai_real(t).unwrap().ai;
        let e1 = (a * pref * zeta.exp() * t.powf(0.25) - 1.0).norm();
        c_decay = c_decay.max(e1 * t.powf(1.5));
        let b = airy_ai(j() * t).unwrap().ai;
        let e2 = (b * rot * pref * (-zeta).exp() * t.powf(0.25) - 1.0).norm();
        c_growth = c_growth.max(e2 * t.powf(1.5));
    }
    let ok = c_decay <= AIRY_C_MAX && c_growth <= AIRY_C_MAX;
    assert!(report(2, "Airy asymptotics", ok, t0.elapsed(), Duration::from_secs(1),
        format!("fitted C = {c_decay:.4} (decaying), {c_growth:.4} (growing) on t ∈ [10, 30] (max {AIRY_C_MAX})")));
}

// ---------------------------------------------------------------- 3

const AIRY_FLOW_TOL: f64 = 1e-6;

#[test]
fn criterion_03_airy_flow_equivalence() {
    let t0 = Instant::now();
    let eps = 1e-4;
    let cfg = FlowConfig::new(eps, 0.5, 1.0).unwrap();
    let a = model_half(eps, 1.0, 0.0);
    let ts: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
    let r = integrate_symbolic_flow(&a, &cfg, 0.0, 4.0, &ts).unwrap();
    let mut worst: f64 = 0.0;
    for (t, s) in r.times.iter().zip(&r.s) {
        let z = airy_model_flow(eps, 1.0, 0.0, 0.0, *t).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                worst = worst.max((s[(i, k)] - z[(i, k)]).norm() / z[(i, k)].norm().max(1e-300));
            }
        }
    }
    let ok = worst <= AIRY_FLOW_TOL && r.times.len() == ts.len();
    assert!(report(3, "Airy-flow equivalence", ok, t0.elapsed(), Duration::from_secs(5),
        format!("max entry-wise relative error {worst:.2e} over {} samples (tol {AIRY_FLOW_TOL:e})", ts.len())));
}

// ---------------------------------------------------------------- 4

const HALF_RATIO: (f64, f64) = (0.97, 1.03);
const ONE_REL: f64 = 0.02;
const ZERO_REL: f64 = 0.05;

#[test]
fn criterion_04_growth_exponents() {
    let t0 = Instant::now();
    // (a) ℓ = 1/2 at T(ε)
    let eps = 1e-6;
    let cfg = FlowConfig::new(eps, 0.5, 3.0).unwrap();
    let tm = cfg.t_max();
    let r = integrate_symbolic_flow(&model_half(eps, 1.0, 0.0), &cfg, 0.0, tm, &[]).unwrap();
    let ratio_a = weighted_norm(r.last(), eps, cfg.zeta).ln() / ((2.0 / 3.0) * tm.powf(1.5));
    let ok_a = ratio_a >= HALF_RATIO.0 && ratio_a <= HALF_RATIO.1;

    // (b) ℓ = 1: rate ½ Im ∂_tλ₊ of t[[0,1],[−1,0]] is ½
    let cfg1 = FlowConfig::new(eps, 1.0, 3.0).unwrap();
    let t1 = cfg1.t_max();
    let ts1: Vec<f64> = (0..=20).map(|k| 0.5 * t1 + 0.5 * t1 * k as f64 / 20.0).collect();
    let r1 = integrate_symbolic_flow(&model_one(eps), &cfg1, 0.0, t1, &ts1).unwrap();
    let n1: Vec<f64> = r1.s.iter().map(linalg::op_norm).collect();
    let g1 = fit_exponent(&r1.times, &n1, 2.0);
    let gamma1 = 0.5 * 1.0;
    let ok_b = (g1 / gamma1 - 1.0).abs() <= ONE_REL;

    // (c) ℓ = 0 constant block, Im λ₀ = √a
    let a0 = 2.0;
    let cfg0 = FlowConfig::new(eps, 0.0, 3.0).unwrap();
    let t0e = 10.0;
    let ts0: Vec<f64> = (0..=20).map(|k| 2.0 + 8.0 * k as f64 / 20.0).collect();
    let r0 = integrate_symbolic_flow(&model_zero(a0), &cfg0, 0.0, t0e, &ts0).unwrap();
    let n0: Vec<f64> = r0.s.iter().map(linalg::op_norm).collect();
    let g0 = fit_exponent(&r0.times, &n0, 1.0);
    let ok_c = (g0 / a0.sqrt() - 1.0).abs() <= ZERO_REL;

    assert!(report(4, "growth exponents", ok_a && ok_b && ok_c, t0.elapsed(), Duration::from_secs(30),
        format!(
            "(a) ratio {ratio_a:.4} at T = {tm:.3} (range {:?}); (b) {g1:.4} vs {gamma1} (±{:.0}%); (c) {g0:.4} vs {:.4} (±{:.0}%)",
            HALF_RATIO, ONE_REL * 100.0, a0.sqrt(), ZERO_REL * 100.0
        )));
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_classification_table() {
    let t0 = Instant::now();
    let f2_zero = ExampleParams { f2: Some(0.0), ..Default::default() };
    let alpha_zero = ExampleParams { alpha: Some(0.0), ..Default::default() };
    let d = ExampleParams::default();
    let table: Vec<(&str, &str, &ExampleParams, Regime)> = vec![
        ("burgers1d", "elliptic", &d, Regime::Elliptic),
        ("burgers1d", "transition", &d, Regime::SemisimpleTransition),
        ("burgers1d", "transition", &f2_zero, Regime::HyperbolicPersistent),
        ("burgers1d", "ill-posed-all", &d, Regime::SemisimpleTransition),
        ("burgers2d", "elliptic", &d, Regime::Elliptic),
        ("burgers2d", "transition", &d, Regime::SemisimpleTransition),
        ("burgers2d", "null-direction", &d, Regime::HyperbolicPersistent),
        ("vdw", "elliptic", &d, Regime::Elliptic),
        ("vdw", "transition", &d, Regime::NonSemisimpleTransition),
        ("vdw", "persistent", &d, Regime::HyperbolicPersistent),
        ("vdw", "model", &d, Regime::NonSemisimpleTransition),
        ("kgz", "witness", &d, Regime::NonSemisimpleTransition),
        ("kgz", "smooth", &alpha_zero, Regime::HyperbolicPersistent),
    ];
    let mut mismatches = vec![];
    for (name, state, p, want) in &table {
        let inst = registry::build(name, Some(state), p).unwrap();
        let got = classify(inst.family.as_ref(), &inst.region, &ClassifyOptions::default()).unwrap().regime;
        if got != *want {
            mismatches.push(format!("{name}:{state} → {} (want {})", got.label(), want.label()));
        }
    }
    let ok = mismatches.is_empty();
    assert!(report(5, "classification table", ok, t0.elapsed(), Duration::from_secs(5),
        format!("{}/{} verdicts reproduced{}", table.len() - mismatches.len(), table.len(),
            if ok { String::new() } else { format!(": {}", mismatches.join("; ")) })));
}

// ---------------------------------------------------------------- 6

const KGZ_JET_TOL: f64 = 1e-6;

#[test]
fn criterion_06_kgz_jet_identity() {
    let t0 = Instant::now();
    let (alpha, cc) = (1.0, 0.5);
    // ∂_x u(0, 0) = 1, v(0, 0) = −c/(2α) places the coalescence at x = 0, λ = 0
    let sys = registry::kgz(alpha, cc).unwrap();
    let phi = ReferenceSolution::new(
        move |x| RVec::from_vec(vec![x[0].sin(), -cc / (2.0 * alpha) + 0.25 * (1.0 - x[0].cos()), 0.0, 0.0]),
        registry::periodic(),
    );
    let fam = LinearizedSymbol::new(sys, phi);
    let omega = CotangentPoint::new(vec![0.0], vec![1.0], c(0.0)).unwrap();
    let jet = charpoly_jet(&fam, &omega, 0.0, JetSteps::default()).unwrap();
    let computed = (jet.p_t * jet.p_ll).re;
    let dxu = 1.0;
    let closed = 2.0 * alpha * cc * dxu * (1.0 + cc * cc + alpha * alpha);
    let err = (computed - closed).abs() / closed.abs();
    let ok = err <= KGZ_JET_TOL;
    let detail = format!(
        "computed ∂_tP·∂²_λP = {computed:.6} (∂_tP = {:.6}, ∂²_λP = {:.6}), closed form {closed:.6}, relative error {err:.2e} (tol {KGZ_JET_TOL:e}); ratio {:.4}",
        jet.p_t.re, jet.p_ll.re, computed / closed
    );
    if !ok {
        println!("  diagnostic: computed/closed = {:.6}; see the decisions ledger for the factor-2 analysis", computed / closed);
    }
    assert!(report(6, "KGZ jet identity", ok, t0.elapsed(), Duration::from_secs(1), detail));
}

// ---------------------------------------------------------------- 7

const DISCRIMINANT_TOL: f64 = 1e-6;

#[test]
fn criterion_07_discriminant_identities() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut lines = vec![];
    for (name, state) in [("burgers1d", "transition"), ("burgers1d", "elliptic"), ("vdw", "transition"), ("vdw", "model")] {
        let inst = registry::build(name, Some(state), &ExampleParams::default()).unwrap();
        let cl = classify(inst.family.as_ref(), &inst.region, &ClassifyOptions::default()).unwrap();
        let omega = cl.witness.clone().unwrap_or_else(|| CotangentPoint::new(vec![0.0], vec![1.0], c(0.0)).unwrap());
        let rep = discriminant_jet_crosscheck(inst.family.as_ref(), &omega, 1e-4).unwrap();
        worst = worst.max(rep.residual1).max(rep.residual2);
        lines.push(format!("{name}:{state} {:.1e}/{:.1e}", rep.residual1, rep.residual2));
    }
    let ok = worst <= DISCRIMINANT_TOL;
    assert!(report(7, "discriminant identities", ok, t0.elapsed(), Duration::from_secs(1),
        format!("max residual {worst:.2e} (tol {DISCRIMINANT_TOL:e}) [{}]", lines.join(", "))));
}

// ---------------------------------------------------------------- 8

const HADAMARD_FACTOR_MIN: f64 = 10.0;
const CONTROL_SLOPE_MAX: f64 = 0.1;
const DT_HALVING_TOL: f64 = 0.02;

#[test]
fn criterion_08_hadamard_experiment() {
    let t0 = Instant::now();
    let burgers = registry::burgers1d_const(1.0, 0.0, 1.0);
    let control = registry::symmetric_control(1.0);
    let phi = ReferenceSolution::closed_form(|t, _| RVec::from_row_slice(&[0.0, t]), registry::periodic());
    let params = HadamardParams::new(3.0, 1.0, 1.25, 0.5, 9.0, 0.5, 0.5).unwrap();
    let setup = ExperimentSetup {
        x0: 0.0,
        xi0: 1.0,
        ebar: vec![1.0, 0.0],
        h: 0.5,
        gamma_minus: 0.5,
        length: 4.0,
        cutoff: Cutoff::Plateau,
    };
    let ladder = [1e-2, 1e-3, 1e-4];
    let full = ExperimentOptions::default();
    let half = ExperimentOptions { dt_scale: 0.5, ..Default::default() };
    let b = run_instability_experiment(&burgers, &phi, &setup, &params, &ladder, &full).unwrap();
    let ctl = run_instability_experiment(&control, &phi, &setup, &params, &ladder, &full).unwrap();
    let b2 = run_instability_experiment(&burgers, &phi, &setup, &params, &ladder, &half).unwrap();
    let c2 = run_instability_experiment(&control, &phi, &setup, &params, &ladder, &half).unwrap();
    let mut halving: f64 = 0.0;
    for (a, q) in b.rows.iter().zip(&b2.rows).chain(ctl.rows.iter().zip(&c2.rows)) {
        let tc = a.last_valid_time.min(q.last_valid_time);
        halving = halving.max((a.ratio_until(tc) / q.ratio_until(tc) - 1.0).abs());
    }
    for row in b.rows.iter().chain(&ctl.rows) {
        println!(
            "  ε = {:.0e}: ratio {:.3e}, growth {:.2}/{:.2}, n = {}, breakdown {:?}",
            row.eps, row.ratio, row.growth_measured, row.growth_predicted, row.n, row.breakdown_reason
        );
    }
    let ok = b.growth_factor >= HADAMARD_FACTOR_MIN
        && ctl.ratio_slope.abs() <= CONTROL_SLOPE_MAX
        && halving <= DT_HALVING_TOL;
    assert!(report(8, "Hadamard experiment", ok, t0.elapsed(), Duration::from_secs(600),
        format!(
            "Burgers factor {:.3e} (min {HADAMARD_FACTOR_MIN}), verdict {:?}; control slope {:.4} (max |·| {CONTROL_SLOPE_MAX}); dt-halving change {:.2e} (max {DT_HALVING_TOL})",
            b.growth_factor, b.verdict, ctl.ratio_slope, halving
        )));
}

// ---------------------------------------------------------------- 9

const FREE_ORDER_MIN: f64 = 0.5;
const CONSTANT_COEFF_TOL: f64 = 1e-8;

#[test]
fn criterion_09_free_solution() {
    let t0 = Instant::now();
    let sys = registry::elliptic_wave(0.3);
    let phi = ReferenceSolution::new(|_| RVec::zeros(2), registry::periodic());
    let mut setup = FreeCompareSetup::periodic(1.0, vec![1.0, 0.0]);
    setup.center = FRAC_PI_2;
    let ladder = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let errs: Vec<f64> = ladder
        .iter()
        .map(|&eps| free_solution_compare(&sys, &phi, eps, &setup, 2.0, false).unwrap().error)
        .collect();
    let order = fit_order(&ladder, &errs);
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);

    // constant coefficients: exact agreement
    let konst = registry::elliptic_wave(0.0);
    let cst = free_solution_compare(&konst, &phi, 1e-2, &setup, 2.0, false).unwrap();
    let flat = registry::symmetric_control(0.0);
    let cst2 = free_solution_compare(&flat, &phi, 1e-2, &setup, 2.0, false).unwrap();
    let cerr = cst.error.max(cst2.error);

    let ok = order >= FREE_ORDER_MIN && decreasing && cerr <= CONSTANT_COEFF_TOL;
    assert!(report(9, "free-solution validation", ok, t0.elapsed(), Duration::from_secs(120),
        format!(
            "errors {:?}, fitted order {order:.3} (min {FREE_ORDER_MIN}); constant-coefficient error {cerr:.2e} (tol {CONSTANT_COEFF_TOL:e})",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        )));
}

// ---------------------------------------------------------------- 10

const IDENTITY_TOL: f64 = 1e-12;
const COMPOSITION_ORDER_MIN: f64 = 0.9;
const SOBOLEV_SLOPE_REL: f64 = 0.02;

fn packet(eps: f64, h: f64, length: f64) -> GridFunction {
    let spec = WavePacketSpec {
        k: 0.0,
        xi0: 1.0,
        center: 0.0,
        cutoff: Cutoff::Plateau,
        radius: 1.0,
        ebar: vec![c(1.0)],
        eps,
        h,
        q_inverse: None,
    };
    let n = ((8.0 * eps.powf(-h) * length / (2.0 * PI)).ceil() as usize).next_power_of_two();
    build_wavepacket(&spec, -length / 2.0, length, n).unwrap()
}

#[test]
fn criterion_10_semiclassical_calculus() {
    let t0 = Instant::now();
    let h = 0.5;
    // op_ε(1) = identity
    let u = packet(1e-4, h, 8.0);
    let one = SymbolSampler::multiplier(|_| c(1.0));
    let id = op_eps_apply(&one, &u, 1e-4, h).unwrap();
    let id_err = id.sub(&u).unwrap().l2_norm() / u.l2_norm();
    let one_x = SymbolSampler::scalar(|_, _| c(1.0));
    let id_x = op_eps_apply(&one_x, &u, 1e-4, h).unwrap();
    let id_err = id_err.max(id_x.sub(&u).unwrap().l2_norm() / u.l2_norm());

    // slow-x composition residual O(ε)
    let ladder = [1e-2, 1e-3, 1e-4, 1e-5];
    let res: Vec<f64> = ladder
        .iter()
        .map(|&eps: &f64| {
            let s = eps.powf(1.0 - h);
            let a1 = SymbolSampler::multiplier(|xi| c(xi / (1.0 + xi * xi).sqrt()));
            let a2 = SymbolSampler::scalar(move |y, _| c(1.0 + 0.3 * (s * y + 0.7).sin())).slow();
            composition_residual(&a1, &a2, eps, h, &packet(eps, h, 16.0)).unwrap()
        })
        .collect();
    let comp_order = fit_order(&ladder, &res);

    // H^m wave-packet norm slope
    let m = 2.0;
    let sl_ladder = [1e-3, 1e-4, 1e-5, 1e-6];
    let norms: Vec<f64> = sl_ladder
        .iter()
        .map(|&eps: &f64| sobolev_norm_physical(&packet(eps, h, 4.0), m, eps.powf(1.0 - h)))
        .collect();
    let slope = fit_order(&sl_ladder, &norms);
    let expected = -m + (1.0 - h) * 1.0 / 2.0;
    let slope_err = (slope / expected - 1.0).abs();

    let ok = id_err <= IDENTITY_TOL && comp_order >= COMPOSITION_ORDER_MIN && slope_err <= SOBOLEV_SLOPE_REL;
    assert!(report(10, "semiclassical calculus", ok, t0.elapsed(), Duration::from_secs(60),
        format!(
            "op_ε(1) error {id_err:.2e} (tol {IDENTITY_TOL:e}); composition order {comp_order:.3} (min {COMPOSITION_ORDER_MIN}); H^{m} slope {slope:.4} vs {expected:.4} (±{:.0}%)",
            SOBOLEV_SLOPE_REL * 100.0
        )));
}

// ---------------------------------------------------------------- 11

const CASES: u32 = 128;
const FLOW_TOL: f64 = 1e-8;
const LIOUVILLE_TOL: f64 = 1e-8;
const ENVELOPE_TOL: f64 = 1e-12;
const SPECTRUM_TOL: f64 = 1e-8;

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases: CASES, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn suite<S: Strategy>(name: &str, strat: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> (String, bool) {
    match runner().run(&strat, test) {
        Ok(()) => (format!("{name} ok"), true),
        Err(e) => (format!("{name} failed ({e})"), false),
    }
}

fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn sorted_spectrum(a: &RMat) -> Vec<C64> {
    let mut ev = linalg::eigenvalues_real(a).unwrap();
    ev.sort_by(|p, q| (p.re, p.im).partial_cmp(&(q.re, q.im)).unwrap());
    ev
}

#[test]
fn criterion_11_invariant_suites() {
    let t0 = Instant::now();
    let mut lines = vec![];
    let mut all = true;

    let (l, ok) = suite("flow composition", (0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0, 0.5f64..2.0), |(a, b, d, f0)| {
        let mut v = [a, b, d];
        v.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut cfg = FlowConfig::new(1e-2, 0.5, 1.0).unwrap();
        cfg.check_flow = false;
        let m = model_half(1e-2, f0, 0.5);
        let s02 = integrate_symbolic_flow(&m, &cfg, v[0], v[2], &[]).unwrap();
        let s01 = integrate_symbolic_flow(&m, &cfg, v[0], v[1], &[]).unwrap();
        let s12 = integrate_symbolic_flow(&m, &cfg, v[1], v[2], &[]).unwrap();
        let r = frob(&(s02.last() - s12.last() * s01.last())) / frob(s02.last());
        prop_assert!(r <= FLOW_TOL, "composition residual {r:e}");
        Ok(())
    });
    all &= ok;
    lines.push(l);

    let (l, ok) = suite(
        "Liouville",
        (proptest::collection::vec(-1.0f64..1.0, 18), 0.5f64..2.0),
        |(e, t_end)| {
            // A⋆(t) = A + tB with prefactor 1; det S = exp(−i(trA·t + trB·t²/2))
            let a = RMat::from_row_slice(3, 3, &e[..9]);
            let b = RMat::from_row_slice(3, 3, &e[9..]);
            let (ac, bc) = (complexify(&a), complexify(&b));
            let gen = move |t: f64| Ok(&ac + &bc * c(t));
            let mut cfg = FlowConfig::new(0.5, 0.0, 1.0).unwrap();
            cfg.check_flow = false;
            let r = integrate_symbolic_flow(&gen, &cfg, 0.0, t_end, &[]).unwrap();
            let det = linalg::det_lu(r.last());
            let expect = (-linalg::I * (a.trace() * t_end + 0.5 * b.trace() * t_end * t_end)).exp();
            let err = rel(det, expect);
            prop_assert!(err <= LIOUVILLE_TOL, "det residual {err:e}");
            prop_assert!(r.liouville_residual <= LIOUVILLE_TOL);
            Ok(())
        },
    );
    all &= ok;
    lines.push(l);

    let (l, ok) = suite(
        "envelope multiplicativity",
        (0.0f64..2.0, 0.0f64..1.0, 0usize..3, 0.0f64..2.0, 0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0),
        |(gm, dg, il, ts, a, b, d)| {
            let ell = [0.0, 0.5, 1.0][il];
            let env = GrowthEnvelope::new(gm, gm + dg, ell, ts).unwrap();
            let mut v = [a, b, d];
            v.sort_by(|p, q| p.partial_cmp(q).unwrap());
            for ch in [GammaChoice::Minus, GammaChoice::Plus] {
                let lhs = env.exponent(ch, v[0], v[1]) + env.exponent(ch, v[1], v[2]);
                let rhs = env.exponent(ch, v[0], v[2]);
                prop_assert!((lhs - rhs).abs() <= ENVELOPE_TOL * (1.0 + rhs.abs()));
                let prod = env.eval(ch, v[0], v[1]) * env.eval(ch, v[1], v[2]);
                prop_assert!((prod / env.eval(ch, v[0], v[2]) - 1.0).abs() <= ENVELOPE_TOL * (1.0 + rhs.abs()));
            }
            Ok(())
        },
    );
    all &= ok;
    lines.push(l);

    let families: Vec<std::sync::Arc<dyn SymbolFamily>> = [
        ("burgers1d", "elliptic"),
        ("burgers1d", "transition"),
        ("vdw", "transition"),
        ("vdw", "elliptic"),
        ("kgz", "witness"),
        ("burgers2d", "transition"),
    ]
    .iter()
    .map(|(n, s)| registry::build(n, Some(s), &ExampleParams::default()).unwrap().family)
    .collect();

    let fams = families.clone();
    let (l, ok) = suite(
        "conjugate-pair spectra",
        (0..fams.len(), 0.0f64..0.5, -PI..PI, -3.0f64..3.0, -3.0f64..3.0),
        move |(k, t, x, x1, x2)| {
            let f = &fams[k];
            let xi: Vec<f64> = if f.space_dim() == 1 { vec![x1] } else { vec![x1, x2] };
            prop_assume!(xi.iter().any(|v| v.abs() > 1e-3));
            let xs = vec![x; f.space_dim()];
            let a = f.symbol(t, &xs, &xi).unwrap();
            let ev = linalg::eigenvalues_real(&a).unwrap();
            let scale = 1.0 + ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for z in &ev {
                let d = ev.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d <= SPECTRUM_TOL * scale, "conjugate of {z} missing ({d:e})");
            }
            Ok(())
        },
    );
    all &= ok;
    lines.push(l);

    let (l, ok) = suite(
        "ξ-homogeneity",
        (0..families.len(), 0.0f64..0.5, -PI..PI, -3.0f64..3.0, -3.0f64..3.0, 0.1f64..10.0),
        move |(k, t, x, x1, x2, s)| {
            let f = &families[k];
            let xi: Vec<f64> = if f.space_dim() == 1 { vec![x1] } else { vec![x1, x2] };
            prop_assume!(xi.iter().any(|v| v.abs() > 1e-3));
            let xs = vec![x; f.space_dim()];
            let a = f.symbol(t, &xs, &xi).unwrap();
            let sxi: Vec<f64> = xi.iter().map(|v| v * s).collect();
            let b = f.symbol(t, &xs, &sxi).unwrap();
            let scale = 1.0 + a.abs().max();
            prop_assert!((&b - &a * s).abs().max() <= SPECTRUM_TOL * s * scale);
            let ea = sorted_spectrum(&(&a * s));
            let eb = sorted_spectrum(&b);
            for (p, q) in ea.iter().zip(&eb) {
                prop_assert!((p - q).norm() <= 1e-6 * s * scale, "λ(sξ) = {q} vs sλ(ξ) = {p}");
            }
            Ok(())
        },
    );
    all &= ok;
    lines.push(l);

    assert!(report(11, "invariant suites", all, t0.elapsed(), Duration::from_secs(60),
        format!("{CASES} cases each: {}", lines.join("; "))));
}
