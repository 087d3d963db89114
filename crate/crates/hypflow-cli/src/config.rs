//! Run configuration: TOML or JSON file, command-line overrides, defaults,
//! and validation before anything is computed.

use std::path::{Path, PathBuf};

use hypflow_core::registry::{self, ExampleParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HadamardSection {
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub alpha: Option<f64>,
    pub m: Option<f64>,
    pub delta: Option<f64>,
    pub t_star: Option<f64>,
    pub gamma_minus: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    /// T⋆ in T(ε)^{ℓ+1} = T⋆|log ε|.
    pub t_star: Option<f64>,
    pub gamma_minus: Option<f64>,
    pub gamma_plus: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Frame exponent for examples without a transition (controls).
    pub h: Option<f64>,
    pub x0: Option<f64>,
    pub length: Option<f64>,
    pub xi0: Option<f64>,
    pub dt_scale: Option<f64>,
    pub filter: Option<f64>,
    pub tail_cap: Option<f64>,
    pub linf_cap: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeSection {
    pub h: Option<f64>,
    pub m: Option<f64>,
    pub length: Option<f64>,
}

/// As read from a file; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub command: Option<String>,
    pub example: Option<String>,
    pub state: Option<String>,
    pub params: ExampleParams,
    pub eps_ladder: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub hadamard: HadamardSection,
    pub flow: FlowSection,
    pub simulate: SimulateSection,
    pub quantize: QuantizeSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hadamard {
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    pub m: f64,
    pub delta: f64,
    pub t_star: f64,
    /// None: use the classified growth rate.
    pub gamma_minus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flow {
    pub t_star: f64,
    pub gamma_minus: Option<f64>,
    pub gamma_plus: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub h: Option<f64>,
    pub x0: Option<f64>,
    pub length: f64,
    pub xi0: f64,
    pub dt_scale: f64,
    pub filter: Option<f64>,
    pub tail_cap: f64,
    pub linf_cap: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantize {
    pub h: f64,
    pub m: f64,
    pub length: f64,
}

/// Fully resolved configuration; its JSON form is the canonical serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub example: String,
    pub state: String,
    pub params: ExampleParams,
    pub eps_ladder: Vec<f64>,
    pub tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub hadamard: Hadamard,
    pub flow: Flow,
    pub simulate: Simulate,
    pub quantize: Quantize,
}

pub const COMMANDS: [&str; 7] = ["classify", "branch", "flow", "airy", "quantize-check", "simulate", "list-examples"];

fn default_example(command: &str) -> &'static str {
    match command {
        "simulate" => "burgers1d",
        "flow" => "model-block",
        _ => "burgers1d",
    }
}

fn default_state(command: &str, example: &str) -> Option<&'static str> {
    match (command, example) {
        ("simulate", "burgers1d") => Some("uniform"),
        _ => registry::default_state(example),
    }
}

fn default_ladder(command: &str) -> Vec<f64> {
    match command {
        "quantize-check" => vec![1e-2, 1e-3, 1e-4, 1e-5],
        "flow" => vec![1e-2, 1e-4, 1e-6],
        _ => vec![1e-2, 1e-3, 1e-4],
    }
}

pub fn read_file(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().map(|e| e == "json").unwrap_or(false) || text.trim_start().starts_with('{');
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

macro_rules! over {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = Some(v);
        }
    };
}

impl RawConfig {
    /// Fields set in `other` win.
    pub fn overlay(mut self, other: RawConfig) -> RawConfig {
        over!(self.command, other.command);
        over!(self.example, other.example);
        over!(self.state, other.state);
        over!(self.params.alpha, other.params.alpha);
        over!(self.params.c, other.params.c);
        over!(self.params.f2, other.params.f2);
        over!(self.params.a, other.params.a);
        over!(self.params.sign, other.params.sign);
        over!(self.params.miss, other.params.miss);
        over!(self.eps_ladder, other.eps_ladder);
        over!(self.tol, other.tol);
        over!(self.seed, other.seed);
        over!(self.out, other.out);
        let (h, o) = (&mut self.hadamard, other.hadamard);
        over!(h.k, o.k);
        over!(h.alpha, o.alpha);
        over!(h.m, o.m);
        over!(h.delta, o.delta);
        over!(h.t_star, o.t_star);
        over!(h.gamma_minus, o.gamma_minus);
        let (f, o) = (&mut self.flow, other.flow);
        over!(f.t_star, o.t_star);
        over!(f.gamma_minus, o.gamma_minus);
        over!(f.gamma_plus, o.gamma_plus);
        over!(f.samples, o.samples);
        let (s, o) = (&mut self.simulate, other.simulate);
        over!(s.h, o.h);
        over!(s.x0, o.x0);
        over!(s.length, o.length);
        over!(s.xi0, o.xi0);
        over!(s.dt_scale, o.dt_scale);
        over!(s.filter, o.filter);
        over!(s.tail_cap, o.tail_cap);
        over!(s.linf_cap, o.linf_cap);
        over!(s.samples, o.samples);
        let (q, o) = (&mut self.quantize, other.quantize);
        over!(q.h, o.h);
        over!(q.m, o.m);
        over!(q.length, o.length);
        self
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let command = self.command.ok_or_else(|| CliError::Config("no command given".into()))?;
        if !COMMANDS.contains(&command.as_str()) {
            return Err(CliError::Config(format!("unknown command '{command}'")));
        }
        let example = self.example.unwrap_or_else(|| default_example(&command).into());
        let state = match self.state {
            Some(s) => s,
            None => default_state(&command, &example)
                .ok_or_else(|| CliError::Config(format!("unknown example '{example}'")))?
                .into(),
        };
        let h = self.hadamard;
        let f = self.flow;
        let s = self.simulate;
        let q = self.quantize;
        let cfg = RunConfig {
            eps_ladder: self.eps_ladder.unwrap_or_else(|| default_ladder(&command)),
            command,
            example,
            state,
            params: self.params,
            tol: self.tol.unwrap_or(1e-8),
            seed: self.seed.unwrap_or(0),
            out: self.out,
            hadamard: Hadamard {
                k: h.k.unwrap_or(3.0),
                alpha: h.alpha.unwrap_or(1.0),
                m: h.m.unwrap_or(1.25),
                delta: h.delta.unwrap_or(0.5),
                t_star: h.t_star.unwrap_or(9.0),
                gamma_minus: h.gamma_minus,
            },
            flow: Flow {
                t_star: f.t_star.unwrap_or(3.0),
                gamma_minus: f.gamma_minus,
                gamma_plus: f.gamma_plus,
                samples: f.samples.unwrap_or(40),
            },
            simulate: Simulate {
                h: s.h,
                x0: s.x0,
                length: s.length.unwrap_or(4.0),
                xi0: s.xi0.unwrap_or(1.0),
                dt_scale: s.dt_scale.unwrap_or(1.0),
                filter: s.filter,
                tail_cap: s.tail_cap.unwrap_or(1e-3),
                linf_cap: s.linf_cap.unwrap_or(1e3),
                samples: s.samples.unwrap_or(400),
            },
            quantize: Quantize {
                h: q.h.unwrap_or(0.5),
                m: q.m.unwrap_or(2.0),
                length: q.length.unwrap_or(16.0),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.eps_ladder.is_empty() {
            return bad("empty ε ladder".into());
        }
        if let Some(e) = self.eps_ladder.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return bad(format!("ε = {e} must lie in (0, 1)"));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance {} must be positive", self.tol));
        }
        if self.command == "simulate" && self.eps_ladder.len() < 2 {
            return bad("simulate needs at least two ε rungs".into());
        }
        for h in [Some(self.quantize.h), self.simulate.h].into_iter().flatten() {
            if !(h > 0.0 && h <= 1.0) {
                return bad(format!("h = {h} must lie in (0, 1]"));
            }
        }
        for (name, v) in [
            ("simulate.length", self.simulate.length),
            ("simulate.dt_scale", self.simulate.dt_scale),
            ("simulate.tail_cap", self.simulate.tail_cap),
            ("simulate.linf_cap", self.simulate.linf_cap),
            ("quantize.length", self.quantize.length),
            ("flow.t_star", self.flow.t_star),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.flow.samples < 2 || self.simulate.samples < 2 {
            return bad("at least two samples are needed".into());
        }
        if self.command != "list-examples" && self.command != "airy" {
            registry::build(&self.example, Some(&self.state), &self.params)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical one-line JSON; re-parsing it yields an identical config.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    #[cfg(test)]
    pub fn from_canonical(s: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
