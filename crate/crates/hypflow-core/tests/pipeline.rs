//! Registry → classifier → branching → flow, and the packet file format.

use hypflow_core::branching::{compute_branch, growth_rate, BranchOptions, RateInputs};
use hypflow_core::classifier::{classify, ClassifyOptions, Regime};
use hypflow_core::linalg::c;
use hypflow_core::registry::{self, ExampleParams};
use hypflow_core::semiclassical::{build_wavepacket, Cutoff, GridFunction, WavePacketSpec};
use hypflow_core::symbolic_flow::{flow_setup, integrate_symbolic_flow, verify_upper_bound, FlowConfig};

#[test]
fn every_registry_state_meets_its_expected_verdict() {
    let opts = ClassifyOptions::default();
    for entry in registry::registry() {
        for st in &entry.states {
            let inst = registry::build(entry.name, Some(st.name), &ExampleParams::default()).unwrap();
            let cl = classify(inst.family.as_ref(), &inst.region, &opts).unwrap();
            assert_eq!(cl.regime, st.expected, "{}/{}: {}", entry.name, st.name, cl.note);
        }
    }
}

#[test]
fn unknown_examples_are_configuration_errors() {
    let e = registry::build("nope", None, &ExampleParams::default()).unwrap_err();
    assert!(e.is_config());
    let e = registry::build("vdw", Some("nope"), &ExampleParams::default()).unwrap_err();
    assert!(e.is_config());
}

#[test]
fn vdw_model_branch_and_flow() {
    let inst = registry::build("vdw", Some("model"), &ExampleParams::default()).unwrap();
    let cl = classify(inst.family.as_ref(), &inst.region, &ClassifyOptions::default()).unwrap();
    assert_eq!(cl.regime, Regime::NonSemisimpleTransition);
    let w = cl.witness.clone().unwrap();
    let b = compute_branch(inst.family.as_ref(), &w.x, &w.xi, Some(w.lambda.re), &BranchOptions::default()).unwrap();
    assert!(b.p_residual < 1e-10 && b.pl_residual < 1e-10);
    let (gm, gp) = growth_rate(&cl, &RateInputs { f0: Some(b.f0), ..Default::default() }).unwrap();
    assert!(gm > 0.0 && gm <= gp);

    let eps = 1e-3;
    let fs = flow_setup(inst.family.clone(), &cl, eps, (None, None)).unwrap();
    let fc = FlowConfig::new(eps, fs.ell, 3.0).unwrap();
    let ts: Vec<f64> = (0..=20).map(|i| fc.t_max() * i as f64 / 20.0).collect();
    let res = integrate_symbolic_flow(&|t| fs.sampler.eval(t), &fc, 0.0, fc.t_max(), &ts).unwrap();
    assert!(res.liouville_residual < 1e-8);
    let up = verify_upper_bound(&res, &fs.envelope, eps, fs.zeta);
    assert!(up.bounded, "{up:?}");
}

#[test]
fn packet_survives_the_binary_format() {
    let spec = WavePacketSpec {
        k: 2.0,
        xi0: 1.0,
        center: 0.0,
        cutoff: Cutoff::Plateau,
        radius: 2.0,
        ebar: vec![c(0.6), c(0.8)],
        eps: 1e-2,
        h: 0.5,
        q_inverse: None,
    };
    let u = build_wavepacket(&spec, -4.0, 8.0, 256).unwrap();
    let mut bytes = vec![];
    u.write_binary(&mut bytes).unwrap();
    let v = GridFunction::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(v.n, u.n);
    assert_eq!(u.sub(&v).unwrap().l2_norm(), 0.0);
    assert!(GridFunction::read_binary(&bytes[..bytes.len() / 2]).is_err());
}
