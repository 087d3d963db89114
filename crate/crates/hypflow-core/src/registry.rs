//! The example systems: 1D/2D Burgers, Van der Waals gas dynamics, the
//! Klein-Gordon-Zakharov-type system, the degenerate crossing symbol and the
//! canonical 2×2 blocks — with reference states and expected verdicts.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{Regime, SearchRegion};
use crate::error::{HypError, Result};
use crate::linalg::{RMat, RVec};
use crate::system_model::{
    ClosureSymbol, Domain, LinearizedSymbol, ReferenceSolution, SymbolFamily, SystemSpec,
};

pub type ScalarOfState = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SourceOfState = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;

fn mat2(a: f64, b: f64, c: f64, d: f64) -> RMat {
    RMat::from_row_slice(2, 2, &[a, b, c, d])
}

fn vec2(a: f64, b: f64) -> RVec {
    RVec::from_vec(vec![a, b])
}

pub fn periodic() -> Domain {
    Domain::Periodic { lo: -PI, hi: PI }
}

/// ∂_t u + [[u₁, −b(u)²u₂],[u₂, u₁]] ∂_x u = F(u).
pub fn burgers1d(b: ScalarOfState, f: SourceOfState) -> SystemSpec {
    let bb = b.clone();
    SystemSpec::new(
        "burgers1d",
        1,
        2,
        move |_, _, _, u| {
            let b = bb(u);
            mat2(u[0], -b * b * u[1], u[1], u[0])
        },
        move |_, _, u| {
            let s = f(u);
            vec2(s[0], s[1])
        },
    )
}

/// Constant b and F, with closed-form u-derivatives.
pub fn burgers1d_const(b: f64, f1: f64, f2: f64) -> SystemSpec {
    burgers1d(Arc::new(move |_| b), Arc::new(move |_| [f1, f2]))
        .with_flux_du(move |_, _, _, _, w| mat2(w[0], -b * b * w[1], w[1], w[0]))
        .with_source_du(|_, _, _, _| RVec::zeros(2))
}

/// Conservative fluxes (f₁, f₂) of the Burgers system when b = b(u₂).
pub fn burgers_conservative_flux(b_of_u2: impl Fn(f64) -> f64, u: &[f64]) -> [f64; 2] {
    // ∫₀^{u₂} y b(y)² dy by 16-point Gauss–Legendre
    let (nodes, weights) = crate::linalg::gauss_legendre_01(16);
    let integral: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(s, w)| {
            let y = s * u[1];
            let by = b_of_u2(y);
            w * y * by * by * u[1]
        })
        .sum();
    [0.5 * u[0] * u[0] - integral, u[0] * u[1]]
}

/// Symbol-only 2D Burgers system.
pub fn burgers2d(b: ScalarOfState, f: SourceOfState) -> SystemSpec {
    SystemSpec::new(
        "burgers2d",
        2,
        2,
        move |j, _, _, u| {
            let bu = b(u);
            let diag = if j == 0 { u[0] } else { 0.0 };
            mat2(diag, -bu * bu * u[1], u[1], diag)
        },
        move |_, _, u| {
            let s = f(u);
            vec2(s[0], s[1])
        },
    )
    .symbol_only()
}

pub type Pressure = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// ∂_t u₁ + ∂_x u₂ = 0, ∂_t u₂ + ∂_x p(u₁) = 0, given p′.
pub fn van_der_waals(dp: Pressure) -> SystemSpec {
    SystemSpec::new(
        "vdw",
        1,
        2,
        move |_, _, _, u| mat2(0.0, 1.0, dp(u[0]), 0.0),
        |_, _, _| RVec::zeros(2),
    )
}

/// Model pressure p(u) = u³/3 − u, so p′(u) = u² − 1.
pub fn vdw_model() -> SystemSpec {
    van_der_waals(Arc::new(|u| u * u - 1.0))
        .with_flux_du(|_, _, _, u, w| mat2(0.0, 0.0, 2.0 * u[0] * w[0], 0.0))
        .with_source_du(|_, _, _, _| RVec::zeros(2))
}

/// State (u, v, n, m); principal symbol [[0,1,α,0],[1,0,0,0],[α,0,0,c],[−2u,−2v,c,0]].
pub fn kgz(alpha: f64, c: f64) -> Result<SystemSpec> {
    if (c.abs() - 1.0).abs() < 1e-12 {
        return Err(HypError::InvalidInput("KGZ requires c ∉ {−1, 1}".into()));
    }
    Ok(SystemSpec::new(
        "kgz",
        1,
        4,
        move |_, _, _, u| {
            RMat::from_row_slice(
                4,
                4,
                &[
                    0.0, 1.0, alpha, 0.0, //
                    1.0, 0.0, 0.0, 0.0, //
                    alpha, 0.0, 0.0, c, //
                    -2.0 * u[0], -2.0 * u[1], c, 0.0,
                ],
            )
        },
        |_, _, u| RVec::from_vec(vec![(u[2] + 1.0) * u[1], -(u[2] + 1.0) * u[0], 0.0, 0.0]),
    )
    .with_flux_du(|_, _, _, _, w| {
        let mut m = RMat::zeros(4, 4);
        m[(3, 0)] = -2.0 * w[0];
        m[(3, 1)] = -2.0 * w[1];
        m
    })
    .with_source_du(|_, _, u, w| {
        RVec::from_vec(vec![
            w[2] * u[1] + (u[2] + 1.0) * w[1],
            -w[2] * u[0] - (u[2] + 1.0) * w[0],
            0.0,
            0.0,
        ])
    }))
}

/// Closed-form characteristic polynomial (λ² − c²)(λ² − 1) − α²λ² + 2αc(v + uλ).
pub fn kgz_charpoly(alpha: f64, c: f64, u: f64, v: f64, lambda: crate::C64) -> crate::C64 {
    let l2 = lambda * lambda;
    (l2 - c * c) * (l2 - 1.0) - l2 * alpha * alpha + (lambda * u + v) * (2.0 * alpha * c)
}

/// Change of variables making the α = 0 system semilinear and symmetric.
pub fn kgz_semilinear_conjugation(state: &[f64], alpha: f64, c: f64) -> Result<[f64; 4]> {
    if alpha != 0.0 {
        return Err(HypError::InvalidInput("the conjugation requires α = 0".into()));
    }
    let [u, v, n, m] = [state[0], state[1], state[2], state[3]];
    let (tu, tv) = (u + v, u - v);
    Ok([
        tu,
        tv,
        n + m - tu * tu / (1.0 - c) - tv * tv / (1.0 + c),
        n - m - tu * tu / (1.0 + c) - tv * tv / (1.0 - c),
    ])
}

pub fn kgz_semilinear_inverse(state: &[f64], c: f64) -> [f64; 4] {
    let [tu, tv, tn, tm] = [state[0], state[1], state[2], state[3]];
    let s = tn + tu * tu / (1.0 - c) + tv * tv / (1.0 + c);
    let d = tm + tu * tu / (1.0 + c) + tv * tv / (1.0 - c);
    [0.5 * (tu + tv), 0.5 * (tu - tv), 0.5 * (s + d), 0.5 * (s - d)]
}

/// The conjugated system: symmetric constant principal part, quadratic source.
pub fn kgz_conjugated_system(c: f64) -> SystemSpec {
    SystemSpec::new(
        "kgz-conjugated",
        1,
        4,
        move |_, _, _, _| {
            RMat::from_row_slice(
                4,
                4,
                &[
                    0.0, 1.0, 0.0, 0.0, //
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, c, //
                    0.0, 0.0, c, 0.0,
                ],
            )
        },
        move |_, _, w| {
            let orig = kgz_semilinear_inverse(w, c);
            let n1 = orig[2] + 1.0;
            let uv = w[0] * w[1];
            RVec::from_vec(vec![
                -n1 * w[1],
                n1 * w[0],
                -2.0 * n1 * uv / (1.0 - c),
                -2.0 * n1 * uv / (1.0 + c),
            ])
        },
    )
}

/// ξ [[0, 1],[x²t − t² + t³a(x), 0]].
pub fn degenerate_symbol_ex_not(a: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ClosureSymbol {
    ClosureSymbol::new("ex-not", 2, 1, move |t, x, xi| {
        let q = x[0] * x[0] * t - t * t + t * t * t * a(x[0]);
        mat2(0.0, xi[0], xi[0] * q, 0.0)
    })
}

/// ξ [[0, 1],[±t, 0]].
pub fn model_blocks(sign: f64, exponent: f64) -> Result<ClosureSymbol> {
    if exponent != 1.0 {
        return Err(HypError::InvalidInput("model blocks are provided for exponent 1".into()));
    }
    let s = sign.signum();
    Ok(ClosureSymbol::new(
        if s < 0.0 { "block-minus" } else { "block-plus" },
        2,
        1,
        move |t, _, xi| mat2(0.0, xi[0], s * t * xi[0], 0.0),
    ))
}

/// ∂_t u + [[0,1],[1,0]] ∂_x u = F, the symmetric control.
pub fn symmetric_control(f2: f64) -> SystemSpec {
    SystemSpec::new(
        "symmetric",
        1,
        2,
        |_, _, _, _| mat2(0.0, 1.0, 1.0, 0.0),
        move |_, _, _| vec2(0.0, f2),
    )
    .with_flux_du(|_, _, _, _, _| RMat::zeros(2, 2))
    .with_source_du(|_, _, _, _| RVec::zeros(2))
}

/// Linear elliptic test system A(x) = [[0,1],[−a(x),0]], a = 1 + k cos x.
pub fn elliptic_wave(k: f64) -> SystemSpec {
    SystemSpec::new(
        "elliptic-wave",
        1,
        2,
        move |_, _, x, _| mat2(0.0, 1.0, -(1.0 + k * x[0].cos()), 0.0),
        |_, _, _| RVec::zeros(2),
    )
    .with_flux_du(|_, _, _, _, _| RMat::zeros(2, 2))
    .with_source_du(|_, _, _, _| RVec::zeros(2))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleParams {
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "F2")]
    pub f2: Option<f64>,
    pub a: Option<f64>,
    pub sign: Option<f64>,
    /// Offset added to v at the KGZ witness.
    pub miss: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateInfo {
    pub name: &'static str,
    pub expected: Regime,
    pub description: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleRegistryEntry {
    pub name: &'static str,
    pub citation: &'static str,
    pub parameters: &'static str,
    pub states: Vec<StateInfo>,
}

/// An instantiated example: system, reference state, search grid, expected verdict.
#[derive(Clone)]
pub struct ExampleInstance {
    pub name: String,
    pub state: String,
    pub system: Option<SystemSpec>,
    pub reference: Option<ReferenceSolution>,
    pub family: Arc<dyn SymbolFamily>,
    pub region: SearchRegion,
    pub expected: Regime,
}

impl std::fmt::Debug for ExampleInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExampleInstance")
            .field("name", &self.name)
            .field("state", &self.state)
            .field("expected", &self.expected)
            .finish()
    }
}

pub fn registry() -> Vec<ExampleRegistryEntry> {
    use Regime::*;
    vec![
        ExampleRegistryEntry {
            name: "burgers1d",
            citation: "one-dimensional Burgers systems, principal symbol [[u₁, −b²u₂],[u₂, u₁]]",
            parameters: "F2 (constant second source component, default 1)",
            states: vec![
                StateInfo { name: "elliptic", expected: Elliptic, description: "φ = (0.5, 0.3 cos x), b ≡ 1" },
                StateInfo { name: "transition", expected: SemisimpleTransition, description: "φ = (0.5 + 0.2 cos x, 0), b ≡ 1, F = (0, F2); F2 = 0 is persistent" },
                StateInfo { name: "ill-posed-all", expected: SemisimpleTransition, description: "b(u₂) = 1 + u₂², F = (0, u₁²), φ = (0.5 + 0.2 cos x, 0)" },
                StateInfo { name: "uniform", expected: SemisimpleTransition, description: "φ = (0, F2·t) in closed form, b ≡ 1: the whole line coalesces at t = 0" },
            ],
        },
        ExampleRegistryEntry {
            name: "burgers2d",
            citation: "two-dimensional Burgers systems (symbol only)",
            parameters: "F2 (default 1)",
            states: vec![
                StateInfo { name: "elliptic", expected: Elliptic, description: "φ = (0.5, 0.3), ξ = (1, 0)" },
                StateInfo { name: "transition", expected: SemisimpleTransition, description: "φ = (0.5 + 0.2 cos x₁, 0), ξ = (1, 0)" },
                StateInfo { name: "null-direction", expected: HyperbolicPersistent, description: "φ = (0.5, 0.3), ξ = (1, −1): ξ₁ + ξ₂ = 0" },
            ],
        },
        ExampleRegistryEntry {
            name: "vdw",
            citation: "Van der Waals gas dynamics, p(u) = u³/3 − u",
            parameters: "none",
            states: vec![
                StateInfo { name: "elliptic", expected: Elliptic, description: "φ = (0.3 cos x, 0): p′ < 0" },
                StateInfo { name: "transition", expected: NonSemisimpleTransition, description: "φ = (1 + 0.5(1 − cos x), 0.5 sin x): p′ = 0, p″∂_xφ₂ > 0 at 0" },
                StateInfo { name: "persistent", expected: HyperbolicPersistent, description: "φ = (1 + 0.5(1 − cos x), −0.5 sin x): opposite sign" },
                StateInfo { name: "model", expected: NonSemisimpleTransition, description: "closed form φ₁ = (1 + 0.5x² − t)^{1/2}, so p′ = 0.5x² − t" },
            ],
        },
        ExampleRegistryEntry {
            name: "kgz",
            citation: "Klein-Gordon-Zakharov-type system with symbol coupling α",
            parameters: "alpha (default 1), c (default 0.5, |c| ≠ 1), miss (v offset at the witness)",
            states: vec![
                StateInfo { name: "witness", expected: NonSemisimpleTransition, description: "u = 0.5 sgn(αc) sin x, v = −c/(2α) + 0.25(1 − cos x), n = m = 0" },
                StateInfo { name: "smooth", expected: HyperbolicPersistent, description: "α = 0 expected; u = 0.1 sin x, v = 0.1 cos x, n = m = 0" },
            ],
        },
        ExampleRegistryEntry {
            name: "ex-not",
            citation: "degenerate crossing ξ[[0,1],[x²t − t² + t³a, 0]]",
            parameters: "a (constant, default 1)",
            states: vec![StateInfo { name: "origin", expected: Indeterminate, description: "(t, x) = (0, 0)" }],
        },
        ExampleRegistryEntry {
            name: "model-block",
            citation: "canonical blocks ξ[[0,1],[±t,0]]",
            parameters: "sign (default −1)",
            states: vec![
                StateInfo { name: "minus", expected: NonSemisimpleTransition, description: "sign −1" },
                StateInfo { name: "plus", expected: HyperbolicPersistent, description: "sign +1" },
            ],
        },
        ExampleRegistryEntry {
            name: "symmetric",
            citation: "symmetric hyperbolic control [[0,1],[1,0]]",
            parameters: "F2 (default 1)",
            states: vec![StateInfo { name: "uniform", expected: HyperbolicPersistent, description: "φ = (0, F2·t)" }],
        },
        ExampleRegistryEntry {
            name: "elliptic-wave",
            citation: "linear elliptic test [[0,1],[−(1 + 0.3 cos x),0]]",
            parameters: "none",
            states: vec![StateInfo { name: "zero", expected: Elliptic, description: "φ ≡ 0" }],
        },
    ]
}

pub fn default_state(name: &str) -> Option<&'static str> {
    Some(match name {
        "burgers1d" | "burgers2d" => "transition",
        "vdw" => "transition",
        "kgz" => "witness",
        "ex-not" => "origin",
        "model-block" => "minus",
        "symmetric" => "uniform",
        "elliptic-wave" => "zero",
        _ => return None,
    })
}

fn line_region() -> SearchRegion {
    SearchRegion::line(-PI, PI, 41)
}

fn instance(
    name: &str,
    state: &str,
    sys: SystemSpec,
    phi: ReferenceSolution,
    region: SearchRegion,
    expected: Regime,
) -> ExampleInstance {
    let fam: Arc<dyn SymbolFamily> = Arc::new(LinearizedSymbol::new(sys.clone(), phi.clone()));
    ExampleInstance {
        name: name.into(),
        state: state.into(),
        system: Some(sys),
        reference: Some(phi),
        family: fam,
        region,
        expected,
    }
}

/// Instantiate a registry example in a given reference state.
pub fn build(name: &str, state: Option<&str>, p: &ExampleParams) -> Result<ExampleInstance> {
    let state = match state {
        Some(s) => s,
        None => default_state(name)
            .ok_or_else(|| HypError::InvalidInput(format!("unknown example '{name}'")))?,
    };
    let unknown = || HypError::InvalidInput(format!("unknown state '{state}' for example '{name}'"));
    match name {
        "burgers1d" => {
            let f2 = p.f2.unwrap_or(1.0);
            match state {
                "elliptic" => Ok(instance(
                    name,
                    state,
                    burgers1d_const(1.0, 0.0, f2),
                    ReferenceSolution::new(|x| vec2(0.5, 0.3 * x[0].cos()), periodic()),
                    line_region(),
                    Regime::Elliptic,
                )),
                "transition" => Ok(instance(
                    name,
                    state,
                    burgers1d_const(1.0, 0.0, f2),
                    ReferenceSolution::new(|x| vec2(0.5 + 0.2 * x[0].cos(), 0.0), periodic()),
                    line_region(),
                    if f2 != 0.0 { Regime::SemisimpleTransition } else { Regime::HyperbolicPersistent },
                )),
                "ill-posed-all" => Ok(instance(
                    name,
                    state,
                    burgers1d(Arc::new(|u| 1.0 + u[1] * u[1]), Arc::new(|u| [0.0, u[0] * u[0]])),
                    ReferenceSolution::new(|x| vec2(0.5 + 0.2 * x[0].cos(), 0.0), periodic()),
                    line_region(),
                    Regime::SemisimpleTransition,
                )),
                "uniform" => Ok(instance(
                    name,
                    state,
                    burgers1d_const(1.0, 0.0, f2),
                    ReferenceSolution::closed_form(move |t, _| vec2(0.0, f2 * t), periodic()),
                    line_region(),
                    if f2 != 0.0 { Regime::SemisimpleTransition } else { Regime::HyperbolicPersistent },
                )),
                _ => Err(unknown()),
            }
        }
        "burgers2d" => {
            let f2 = p.f2.unwrap_or(1.0);
            let sys = burgers2d(Arc::new(|_| 1.0), Arc::new(move |_| [0.0, f2]));
            let pts: Vec<Vec<f64>> = (0..21)
                .map(|i| vec![-PI + 2.0 * PI * i as f64 / 20.0, 0.0])
                .collect();
            let dom = Domain::Periodic { lo: -PI, hi: PI };
            match state {
                "elliptic" => Ok(instance(
                    name,
                    state,
                    sys,
                    ReferenceSolution::new(|_| vec2(0.5, 0.3), dom),
                    SearchRegion::points(pts, vec![vec![1.0, 0.0]]),
                    Regime::Elliptic,
                )),
                "transition" => Ok(instance(
                    name,
                    state,
                    sys,
                    ReferenceSolution::new(|x| vec2(0.5 + 0.2 * x[0].cos(), 0.0), dom),
                    SearchRegion::points(pts, vec![vec![1.0, 0.0]]),
                    if f2 != 0.0 { Regime::SemisimpleTransition } else { Regime::HyperbolicPersistent },
                )),
                "null-direction" => Ok(instance(
                    name,
                    state,
                    sys,
                    ReferenceSolution::new(|_| vec2(0.5, 0.3), dom),
                    SearchRegion::points(pts, vec![vec![1.0, -1.0]]),
                    Regime::HyperbolicPersistent,
                )),
                _ => Err(unknown()),
            }
        }
        "vdw" => {
            let sys = vdw_model();
            match state {
                "elliptic" => Ok(instance(
                    name,
                    state,
                    sys,
                    ReferenceSolution::new(|x| vec2(0.3 * x[0].cos(), 0.0), periodic()),
                    line_region(),
                    Regime::Elliptic,
                )),
                "transition" | "persistent" => {
                    let sigma = if state == "transition" { 0.5 } else { -0.5 };
                    Ok(instance(
                        name,
                        state,
                        sys,
                        ReferenceSolution::new(
                            move |x| vec2(1.0 + 0.5 * (1.0 - x[0].cos()), sigma * x[0].sin()),
                            periodic(),
                        ),
                        line_region(),
                        if sigma > 0.0 { Regime::NonSemisimpleTransition } else { Regime::HyperbolicPersistent },
                    ))
                }
                "model" => Ok(instance(
                    name,
                    state,
                    sys,
                    ReferenceSolution::closed_form(
                        |t, x| vec2((1.0 + 0.5 * x[0] * x[0] - t).sqrt(), 0.0),
                        Domain::Box { lo: vec![-1.0], hi: vec![1.0] },
                    ),
                    SearchRegion::line(-1.0, 1.0, 21),
                    Regime::NonSemisimpleTransition,
                )),
                _ => Err(unknown()),
            }
        }
        "kgz" => {
            let alpha = p.alpha.unwrap_or(1.0);
            let c = p.c.unwrap_or(0.5);
            let sys = kgz(alpha, c)?;
            match state {
                "witness" => {
                    if alpha == 0.0 || c == 0.0 {
                        return Err(HypError::InvalidInput(
                            "the KGZ witness state needs α ≠ 0 and c ≠ 0".into(),
                        ));
                    }
                    let s = (alpha * c).signum();
                    let miss = p.miss.unwrap_or(0.0);
                    let v0 = -c / (2.0 * alpha) + miss;
                    Ok(instance(
                        name,
                        state,
                        sys,
                        ReferenceSolution::new(
                            move |x| {
                                RVec::from_vec(vec![
                                    0.5 * s * x[0].sin(),
                                    v0 + 0.25 * (1.0 - x[0].cos()),
                                    0.0,
                                    0.0,
                                ])
                            },
                            periodic(),
                        ),
                        line_region(),
                        if miss == 0.0 { Regime::NonSemisimpleTransition } else { Regime::HyperbolicPersistent },
                    ))
                }
                "smooth" => Ok(instance(
                    name,
                    state,
                    sys,
                    ReferenceSolution::new(
                        |x| RVec::from_vec(vec![0.1 * x[0].sin(), 0.1 * x[0].cos(), 0.0, 0.0]),
                        periodic(),
                    ),
                    line_region(),
                    if alpha == 0.0 { Regime::HyperbolicPersistent } else { Regime::Indeterminate },
                )),
                _ => Err(unknown()),
            }
        }
        "ex-not" => {
            if state != "origin" {
                return Err(unknown());
            }
            let a = p.a.unwrap_or(1.0);
            Ok(ExampleInstance {
                name: name.into(),
                state: state.into(),
                system: None,
                reference: None,
                family: Arc::new(degenerate_symbol_ex_not(move |_| a)),
                region: SearchRegion::points(vec![vec![0.0]], vec![vec![1.0]]),
                expected: Regime::Indeterminate,
            })
        }
        "model-block" => {
            let sign = match state {
                "minus" => -1.0,
                "plus" => 1.0,
                _ => return Err(unknown()),
            };
            let sign = p.sign.unwrap_or(sign);
            Ok(ExampleInstance {
                name: name.into(),
                state: state.into(),
                system: None,
                reference: None,
                family: Arc::new(model_blocks(sign, 1.0)?),
                region: SearchRegion::line(-1.0, 1.0, 5),
                expected: if sign < 0.0 { Regime::NonSemisimpleTransition } else { Regime::HyperbolicPersistent },
            })
        }
        "symmetric" => {
            if state != "uniform" {
                return Err(unknown());
            }
            let f2 = p.f2.unwrap_or(1.0);
            Ok(instance(
                name,
                state,
                symmetric_control(f2),
                ReferenceSolution::closed_form(move |t, _| vec2(0.0, f2 * t), periodic()),
                line_region(),
                Regime::HyperbolicPersistent,
            ))
        }
        "elliptic-wave" => {
            if state != "zero" {
                return Err(unknown());
            }
            Ok(instance(
                name,
                state,
                elliptic_wave(0.3),
                ReferenceSolution::closed_form(|_, _| RVec::zeros(2), periodic()),
                line_region(),
                Regime::Elliptic,
            ))
        }
        _ => Err(HypError::InvalidInput(format!("unknown example '{name}'"))),
    }
}
