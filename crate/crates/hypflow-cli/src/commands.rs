//! Subcommand implementations.

use std::f64::consts::PI;

use hypflow_core::airy;
use hypflow_core::branching::{compute_branch, estimate_c0, growth_rate, BranchData, BranchOptions, RateInputs};
use hypflow_core::classifier::{classify, Classification, ClassifyOptions, Regime, Tolerances};
use hypflow_core::linalg::{c, C64};
use hypflow_core::pde_sim::{
    run_instability_experiment, witness_direction, ExperimentOptions, ExperimentSetup, HadamardParams,
    HADAMARD_CSV_HEADER,
};
use hypflow_core::registry::{self, ExampleInstance};
use hypflow_core::semiclassical::{
    build_wavepacket, composition_residual, eps_sobolev_norm, fit_order, op_eps_apply, sobolev_norm_physical, Cutoff,
    GridFunction, SymbolSampler, WavePacketSpec,
};
use hypflow_core::symbolic_flow::{
    flow_csv_rows, flow_setup, integrate_symbolic_flow, verify_lower_bound, verify_upper_bound, FlowConfig,
    FLOW_CSV_HEADER,
};
use hypflow_core::HypError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, Sink};
use crate::CliError;

fn instance(cfg: &RunConfig) -> Result<ExampleInstance, CliError> {
    registry::build(&cfg.example, Some(&cfg.state), &cfg.params).map_err(CliError::from)
}

fn classify_instance(cfg: &RunConfig, inst: &ExampleInstance) -> Result<Classification, CliError> {
    let defaults = ClassifyOptions::default();
    let opts = ClassifyOptions {
        tol: Tolerances { eq: cfg.tol, strict: defaults.tol.strict.max(cfg.tol) },
        ..defaults
    };
    Ok(classify(inst.family.as_ref(), &inst.region, &opts)?)
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    example: &'a str,
    state: &'a str,
    expected: Regime,
    matches_expected: bool,
    classification: &'a Classification,
}

pub fn classify_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let sink = Sink::new(cfg)?;
    let inst = instance(cfg)?;
    let cl = classify_instance(cfg, &inst)?;
    let report = ClassifyReport {
        example: &cfg.example,
        state: &cfg.state,
        expected: inst.expected,
        matches_expected: cl.regime == inst.expected,
        classification: &cl,
    };
    let line = format!("regime: {}", cl.regime.label());
    if sink.dir().is_some() {
        sink.emit("classify.json", &sink.json_text(&report)?, false)?;
        println!("{line}");
    } else {
        sink.emit("classify.json", &sink.json_text(&report)?, true)?;
        eprintln!("{line}");
    }
    Ok(())
}

#[derive(Serialize)]
struct BranchReport {
    regime: Regime,
    ell: Option<f64>,
    h: Option<f64>,
    zeta: Option<f64>,
    witness_x: Option<Vec<f64>>,
    witness_xi: Option<Vec<f64>>,
    lambda: Option<C64>,
    branch: Option<BranchData>,
    /// Lipschitz constant of max Im λ near an elliptic witness.
    c0: Option<f64>,
    gamma_minus: Option<f64>,
    gamma_plus: Option<f64>,
}

fn rates(cfg: &RunConfig, inst: &ExampleInstance, cl: &Classification) -> Result<(Option<BranchData>, Option<f64>, (f64, f64)), CliError> {
    let w = cl.witness.as_ref().ok_or_else(|| CliError::Numerical("classification has no witness".into()))?;
    match cl.regime {
        Regime::Elliptic => {
            let c0 = estimate_c0(inst.family.as_ref(), &w.x, &w.xi, cfg.hadamard.delta, 16)?;
            let g = growth_rate(cl, &RateInputs { f0: None, c0, offset: 0.0 })?;
            Ok((None, Some(c0), g))
        }
        Regime::NonSemisimpleTransition | Regime::SemisimpleTransition => {
            let b = compute_branch(inst.family.as_ref(), &w.x, &w.xi, Some(w.lambda.re), &BranchOptions::default())?;
            let g = growth_rate(cl, &RateInputs { f0: Some(b.f0), ..Default::default() })?;
            Ok((Some(b), None, g))
        }
        _ => Err(CliError::Config(format!("no growth rate for a {} verdict", cl.regime.label()))),
    }
}

pub fn branch_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let sink = Sink::new(cfg)?;
    let inst = instance(cfg)?;
    let cl = classify_instance(cfg, &inst)?;
    let mut report = BranchReport {
        regime: cl.regime,
        ell: cl.ell,
        h: cl.h,
        zeta: cl.zeta,
        witness_x: cl.witness.as_ref().map(|w| w.x.clone()),
        witness_xi: cl.witness.as_ref().map(|w| w.xi.clone()),
        lambda: cl.witness.as_ref().map(|w| w.lambda),
        branch: None,
        c0: None,
        gamma_minus: None,
        gamma_plus: None,
    };
    if cl.ell.is_some() {
        let (b, c0, (gm, gp)) = rates(cfg, &inst, &cl)?;
        report.branch = b;
        report.c0 = c0;
        report.gamma_minus = Some(gm);
        report.gamma_plus = Some(gp);
    }
    sink.emit("branch.json", &sink.json_text(&report)?, true)?;
    if sink.dir().is_some() {
        println!("regime: {}", cl.regime.label());
    }
    Ok(())
}

pub const FLOW_SUMMARY_HEADER: &str =
    "eps,T,steps,gamma_minus,gamma_plus,max_upper_ratio,late_log_slope,upper_ok,min_lower_ratio,lower_ok,liouville_residual,failure";

pub fn flow_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let sink = Sink::new(cfg)?;
    let inst = instance(cfg)?;
    let cl = classify_instance(cfg, &inst)?;
    if cl.ell.is_none() {
        return Err(CliError::Config(format!("no symbolic flow for a {} verdict", cl.regime.label())));
    }
    let w = cl.witness.clone().expect("transition verdicts carry a witness");
    let gamma = (cfg.flow.gamma_minus, cfg.flow.gamma_plus);
    let runs: Vec<Result<(Vec<String>, String), CliError>> = cfg
        .eps_ladder
        .par_iter()
        .map(|&eps| {
            let fs = flow_setup(inst.family.clone(), &cl, eps, gamma)?;
            let fc = FlowConfig::new(eps, fs.ell, cfg.flow.t_star)?;
            let tm = fc.t_max();
            let k = cfg.flow.samples;
            let ts: Vec<f64> = (0..=k).map(|i| tm * i as f64 / k as f64).collect();
            let a = |t: f64| fs.sampler.eval(t);
            let res = integrate_symbolic_flow(&a, &fc, 0.0, tm, &ts)?;
            let up = verify_upper_bound(&res, &fs.envelope, eps, fs.zeta);
            let lo = verify_lower_bound(&[(res.last().clone(), fs.ebar.clone())], &fs.envelope, 0.0, tm, eps, fs.zeta);
            let rows = flow_csv_rows(&res, &fs.envelope, eps, w.x[0], w.xi[0], fs.zeta);
            let summary = format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                num(eps),
                num(tm),
                res.steps,
                num(fs.envelope.gamma_minus),
                num(fs.envelope.gamma_plus),
                num(up.max_ratio),
                num(up.late_log_slope),
                up.bounded,
                num(lo.min_ratio),
                lo.bounded_below,
                num(res.liouville_residual),
                !(up.bounded && lo.bounded_below),
            );
            Ok((rows, summary))
        })
        .collect();
    let mut rows = vec![];
    let mut summary = vec![];
    for r in runs {
        let (rr, s) = r?;
        rows.extend(rr);
        summary.push(s);
    }
    sink.emit("flow.csv", &sink.csv_text(FLOW_CSV_HEADER, &rows), false)?;
    sink.emit("flow_summary.csv", &sink.csv_text(FLOW_SUMMARY_HEADER, &summary), true)?;
    Ok(())
}

#[derive(Serialize)]
struct AirySummary {
    wronskian_exact: C64,
    max_wronskian_rel_error: f64,
    fitted_c_decaying: f64,
    fitted_c_growing: f64,
    bounds: airy::AiryBoundsReport,
}

pub fn airy_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let sink = Sink::new(cfg)?;
    let exact = airy::wronskian_exact();
    let mut wrows = vec![];
    let mut werr: f64 = 0.0;
    for k in -10..=10 {
        let tau = k as f64;
        let w = airy::wronskian(tau)?;
        let e = (w - exact).norm() / exact.norm();
        werr = werr.max(e);
        wrows.push(format!("{},{},{},{}", num(tau), num(w.re), num(w.im), num(e)));
    }
    let pref = 2.0 * PI.sqrt();
    let rot = C64::from_polar(1.0, PI / 6.0);
    let mut arows = vec![];
    let (mut cd, mut cg): (f64, f64) = (0.0, 0.0);
    for k in 0..=40 {
        let t = 10.0 + 0.5 * k as f64;
        let z = (2.0 / 3.0) * t.powf(1.5);
        let a = airy::ai_real(t)?.ai;
        let b = airy::airy_ai(airy::j() * t)?.ai;
        let ed = (a * pref * z.exp() * t.powf(0.25) - 1.0).norm() * t.powf(1.5);
        let eg = (b * rot * pref * (-z).exp() * t.powf(0.25) - 1.0).norm() * t.powf(1.5);
        cd = cd.max(ed);
        cg = cg.max(eg);
        arows.push(format!("{},{},{}", num(t), num(ed), num(eg)));
    }
    let grid: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    let summary = AirySummary {
        wronskian_exact: exact,
        max_wronskian_rel_error: werr,
        fitted_c_decaying: cd,
        fitted_c_growing: cg,
        bounds: airy::verify_airy_bounds(&grid)?,
    };
    sink.emit("airy_wronskian.csv", &sink.csv_text("tau,w_re,w_im,rel_error", &wrows), true)?;
    sink.emit("airy_asymptotics.csv", &sink.csv_text("t,scaled_error_decaying,scaled_error_growing", &arows), false)?;
    sink.emit("airy_summary.json", &sink.json_text(&summary)?, false)?;
    Ok(())
}

fn packet(eps: f64, h: f64, length: f64) -> Result<GridFunction, CliError> {
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
    let n = ((8.0 * eps.powf(-h) * length / (2.0 * PI)).ceil() as usize).next_power_of_two().max(64);
    Ok(build_wavepacket(&spec, -length / 2.0, length, n)?)
}

#[derive(Serialize)]
struct QuantizeSummary {
    composition_order: f64,
    sobolev_slope: f64,
    sobolev_slope_expected: f64,
    max_identity_residual: f64,
    max_multiplier_residual: f64,
}

pub const QUANTIZE_CSV_HEADER: &str =
    "eps,n,identity_residual,multiplier_composition_residual,slow_composition_residual,hm_norm_physical,hm_norm_semiclassical";

pub fn quantize_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let sink = Sink::new(cfg)?;
    let q = cfg.quantize.clone();
    let h = q.h;
    let rows: Vec<Result<(Vec<f64>, usize, Vec<u8>), CliError>> = cfg
        .eps_ladder
        .par_iter()
        .map(|&eps| {
            let u = packet(eps, h, q.length)?;
            let one = SymbolSampler::multiplier(|_| c(1.0));
            let id = op_eps_apply(&one, &u, eps, h)?.sub(&u)?.l2_norm() / u.l2_norm();
            let m1 = SymbolSampler::multiplier(|xi| c(xi / (1.0 + xi * xi).sqrt()));
            let m2 = SymbolSampler::multiplier(|xi| c((1.0 + xi * xi).sqrt()));
            let mult = composition_residual(&m1, &m2, eps, h, &u)?;
            let s = eps.powf(1.0 - h);
            let slow = SymbolSampler::scalar(move |y, _| c(1.0 + 0.3 * (s * y + 0.7).sin())).slow();
            let comp = composition_residual(&m1, &slow, eps, h, &u)?;
            let hm = sobolev_norm_physical(&u, q.m, s);
            let hs = eps_sobolev_norm(&u, q.m, eps, h);
            let mut bin = vec![];
            u.write_binary(&mut bin)?;
            Ok((vec![eps, id, mult, comp, hm, hs], u.n, bin))
        })
        .collect();
    let mut text = vec![];
    let (mut eps, mut comps, mut norms) = (vec![], vec![], vec![]);
    let (mut idmax, mut mmax): (f64, f64) = (0.0, 0.0);
    for (i, r) in rows.into_iter().enumerate() {
        let (v, n, bin) = r?;
        text.push(format!("{},{n},{},{},{},{},{}", num(v[0]), num(v[1]), num(v[2]), num(v[3]), num(v[4]), num(v[5])));
        eps.push(v[0]);
        idmax = idmax.max(v[1]);
        mmax = mmax.max(v[2]);
        comps.push(v[3]);
        norms.push(v[4]);
        sink.emit_bytes(&format!("packet_{i}.hypg"), &bin)?;
    }
    let fit = |ys: &[f64]| if eps.len() >= 2 { fit_order(&eps, ys) } else { f64::NAN };
    let summary = QuantizeSummary {
        composition_order: fit(&comps),
        sobolev_slope: fit(&norms),
        sobolev_slope_expected: -q.m + (1.0 - h) / 2.0,
        max_identity_residual: idmax,
        max_multiplier_residual: mmax,
    };
    sink.emit("quantize.csv", &sink.csv_text(QUANTIZE_CSV_HEADER, &text), true)?;
    sink.emit("quantize_summary.json", &sink.json_text(&summary)?, false)?;
    Ok(())
}

#[derive(Serialize)]
struct RunMetadata {
    eps: f64,
    n: usize,
    dt: f64,
    steps: usize,
    filter_strength: f64,
    breakdown: bool,
    breakdown_time: Option<f64>,
    last_valid_time: f64,
    seed: u64,
}

/// Whether any rung broke down, so the caller can exit with the breakdown code.
pub fn simulate_cmd(cfg: &RunConfig) -> Result<bool, CliError> {
    let sink = Sink::new(cfg)?;
    let inst = instance(cfg)?;
    let (sys, phi) = match (&inst.system, &inst.reference) {
        (Some(s), Some(p)) => (s.clone(), p.clone()),
        _ => return Err(CliError::Config(format!("example '{}' has no evolution equations", cfg.example))),
    };
    if sys.space_dim != 1 {
        return Err(CliError::Config("the instability experiment is one-dimensional".into()));
    }
    let cl = classify_instance(cfg, &inst)?;
    // controls (no transition) need h and γ⁻ from the configuration
    let h = match (cl.h, cfg.simulate.h) {
        (_, Some(h)) => h,
        (Some(h), None) => h,
        (None, None) => {
            return Err(CliError::Config(format!(
                "no instability experiment for a {} verdict without an explicit h",
                cl.regime.label()
            )))
        }
    };
    let gamma_minus = match cfg.hadamard.gamma_minus {
        Some(g) => g,
        None if cl.ell.is_some() => rates(cfg, &inst, &cl)?.2 .0,
        None => return Err(CliError::Config(format!("a {} verdict needs an explicit γ⁻", cl.regime.label()))),
    };
    let hp = &cfg.hadamard;
    // parameter gates before any evolution
    let params = HadamardParams::new(hp.k, hp.alpha, hp.m, hp.delta, hp.t_star, h, gamma_minus)?;
    let (x0, xi_sign, ebar) = match &cl.witness {
        Some(w) if cl.ell.is_some() => (w.x[0], w.xi[0].signum(), witness_direction(inst.family.as_ref(), w)?),
        _ => {
            let mut e = vec![0.0; inst.family.dim()];
            e[0] = 1.0;
            (0.0, 1.0, e)
        }
    };
    let mut setup = ExperimentSetup {
        x0: cfg.simulate.x0.unwrap_or(x0),
        xi0: cfg.simulate.xi0 * xi_sign,
        ebar,
        h,
        gamma_minus,
        length: 4.0,
        cutoff: Cutoff::Plateau,
    };
    setup.length = cfg.simulate.length;
    let opts = ExperimentOptions {
        dt_scale: cfg.simulate.dt_scale,
        filter: cfg.simulate.filter,
        linf_cap: cfg.simulate.linf_cap,
        tail_cap: cfg.simulate.tail_cap,
        samples: cfg.simulate.samples,
    };
    let report = run_instability_experiment(&sys, &phi, &setup, &params, &cfg.eps_ladder, &opts)?;
    let meta: Vec<RunMetadata> = report
        .rows
        .iter()
        .map(|r| RunMetadata {
            eps: r.eps,
            n: r.n,
            dt: r.dt,
            steps: r.steps,
            filter_strength: r.filter_strength,
            breakdown: r.breakdown,
            breakdown_time: r.breakdown.then_some(r.last_valid_time),
            last_valid_time: r.last_valid_time,
            seed: cfg.seed,
        })
        .collect();
    sink.emit("hadamard.csv", &sink.csv_text(HADAMARD_CSV_HEADER, &report.csv_rows()), true)?;
    sink.emit("hadamard.json", &sink.json_text(&report)?, false)?;
    sink.emit("metadata.json", &sink.json_text(&meta)?, false)?;
    eprintln!(
        "verdict: {:?}, ratio slope {:.4}, growth factor {:.4e}",
        report.verdict, report.ratio_slope, report.growth_factor
    );
    Ok(report.rows.iter().any(|r| r.breakdown))
}

pub fn list_examples() -> Result<(), CliError> {
    let mut text = String::new();
    for e in registry::registry() {
        text.push_str(&format!("{} — {} [parameters: {}]\n", e.name, e.citation, e.parameters));
        for s in &e.states {
            text.push_str(&format!("  {:<16} {:<24} {}\n", s.name, s.expected.label(), s.description));
        }
    }
    write_stdout(&text)
}

/// Stdout writer that treats a closed pipe (`| head`) as success.
pub fn write_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

impl From<HypError> for CliError {
    fn from(e: HypError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}
