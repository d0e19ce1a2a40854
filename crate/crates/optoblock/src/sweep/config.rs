//! Flat key-value sweep configuration: parsing, overrides, and the
//! shipped presets.
//!
//! The format is one `key = value` pair per line with dotted keys, `#`
//! comments, and blank lines. All rates are in units of gamma_c (gamma_c
//! itself is fixed at 1); detunings are in units of the coupling G; delay
//! ranges are in units of 2 pi / gamma_c. Values may be plain numbers or
//! `sqrt(x)` / `-sqrt(x)` so resonant detunings stay exact.

use crate::error::{Error, Result};
use crate::model::{DerivationParams, SystemParams};
use crate::observables::TransportObservable;

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Probe-pump detuning, in units of G.
    Delta,
    /// Mean thermal phonon number.
    ThermalPhonons,
    /// Correlation delay, in units of 2 pi / gamma_c.
    Tau,
}

/// How the mechanical detuning tracks the optical one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMRule {
    /// `Delta_m = Delta / 2` (the resonance constraint every distributed
    /// sweep uses).
    HalfDelta,
    /// Fixed value in units of gamma_c.
    Fixed(f64),
    /// From the bare-model map `Delta_m = omega_m' - delta/2`; needs
    /// derivation parameters.
    Derived,
}

/// Where the effective coupling comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSource {
    /// `G` given directly, units of gamma_c.
    Direct(f64),
    /// Bare-model parameters mapped through the pump displacement.
    Derivation(DerivationParams),
}

/// A column the sweep engine can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputColumn {
    Scalar(TransportObservable),
    /// Delayed correlation on the 1 -> 2 path (tau sweeps only).
    G2Tau21,
    /// Delayed correlation on the 2 -> 1 path (tau sweeps only).
    G2Tau12,
}

impl OutputColumn {
    pub fn column(&self) -> &'static str {
        match self {
            OutputColumn::Scalar(o) => o.column(),
            OutputColumn::G2Tau21 => "g2_21_tau",
            OutputColumn::G2Tau12 => "g2_12_tau",
        }
    }

    fn parse(token: &str) -> Result<Self> {
        Ok(match token {
            "T21" => OutputColumn::Scalar(TransportObservable::T21),
            "T12" => OutputColumn::Scalar(TransportObservable::T12),
            "isolation" => OutputColumn::Scalar(TransportObservable::IsolationDb),
            "g2_21" => OutputColumn::Scalar(TransportObservable::G2Of21),
            "g2_12" => OutputColumn::Scalar(TransportObservable::G2Of12),
            "n_L" => OutputColumn::Scalar(TransportObservable::NL),
            "n_R" => OutputColumn::Scalar(TransportObservable::NR),
            "g2_21_tau" => OutputColumn::G2Tau21,
            "g2_12_tau" => OutputColumn::G2Tau12,
            other => {
                return Err(Error::Config(format!(
                    "unrecognized output '{other}' (known: T21, T12, isolation, g2_21, \
                     g2_12, n_L, n_R, g2_21_tau, g2_12_tau)"
                )))
            }
        })
    }
}

/// Base operating point shared by every sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSpec {
    pub coupling: CouplingSource,
    /// Fixed detuning in units of G (required for n_th sweeps; defaults to
    /// sqrt(2) for tau sweeps).
    pub delta_over_g: Option<f64>,
    pub probe_amplitude: f64,
    pub mech_damping: f64,
    pub thermal_phonons: f64,
    pub cutoff_photon: usize,
    pub cutoff_phonon: usize,
}

/// A fully parsed sweep configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: BaseSpec,
    pub variable: SweepVariable,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub delta_m_rule: DeltaMRule,
    pub outputs: Vec<OutputColumn>,
    /// Relative tolerance handed to the delay propagator.
    pub evolve_rtol: Option<f64>,
    /// Largest pair sector used by resonance prediction.
    pub max_pair: usize,
}

impl SweepConfig {
    /// Effective coupling G in units of gamma_c.
    pub fn coupling(&self) -> Result<f64> {
        match &self.base.coupling {
            CouplingSource::Direct(g) => Ok(*g),
            CouplingSource::Derivation(dp) => {
                let quad = crate::model::quadratic_coupling(dp.linear_coupling, dp.tunneling)?;
                let alpha = crate::model::pump_displacement(
                    dp.pump_amplitude,
                    dp.optical_damping,
                    dp.pump_detuning,
                )?;
                Ok(crate::model::effective_coupling(quad, alpha))
            }
        }
    }

    /// Materialize the operating point for one sweep value.
    pub fn params_at(&self, sweep_value: f64) -> Result<SystemParams> {
        let g = self.coupling()?;
        let (delta, thermal) = match self.variable {
            SweepVariable::Delta => (sweep_value * g, self.base.thermal_phonons),
            SweepVariable::ThermalPhonons => {
                let d = self.base.delta_over_g.ok_or_else(|| {
                    Error::Config("n_th sweeps need base.Delta (units of G)".into())
                })?;
                (d * g, sweep_value)
            }
            SweepVariable::Tau => {
                let d = self.base.delta_over_g.unwrap_or(std::f64::consts::SQRT_2);
                (d * g, self.base.thermal_phonons)
            }
        };
        let mech_detuning = match (&self.delta_m_rule, &self.base.coupling) {
            (DeltaMRule::HalfDelta, _) => delta / 2.0,
            (DeltaMRule::Fixed(x), _) => *x,
            (DeltaMRule::Derived, CouplingSource::Derivation(dp)) => {
                let quad = crate::model::quadratic_coupling(dp.linear_coupling, dp.tunneling)?;
                let alpha = crate::model::pump_displacement(
                    dp.pump_amplitude,
                    dp.optical_damping,
                    dp.pump_detuning,
                )?;
                let mech_eff = crate::model::effective_mech_freq(dp.mech_freq, quad, alpha);
                let probe_offset = dp.pump_detuning - delta;
                mech_eff - probe_offset / 2.0
            }
            (DeltaMRule::Derived, CouplingSource::Direct(_)) => {
                return Err(Error::Config(
                    "constraint.delta_m = derived needs derivation.* parameters".into(),
                ))
            }
        };
        let params = SystemParams {
            detuning: delta,
            mech_detuning,
            coupling: g,
            probe_amplitude: self.base.probe_amplitude,
            optical_damping: 1.0,
            mech_damping: self.base.mech_damping,
            thermal_phonons: thermal,
            cutoff_photon: self.base.cutoff_photon,
            cutoff_phonon: self.base.cutoff_phonon,
        };
        params.validate()?;
        Ok(params)
    }

    /// The evenly spaced sweep grid.
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.min + step * i as f64).collect()
    }
}

/// A number or `sqrt(x)` / `-sqrt(x)`.
pub fn parse_value(s: &str) -> Result<f64> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, t),
    };
    let v = if let Some(inner) = body.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let x: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse sqrt argument '{inner}'")))?;
        if x < 0.0 {
            return Err(Error::Config(format!("sqrt of negative value {x}")));
        }
        x.sqrt()
    } else {
        body.parse::<f64>().map_err(|_| Error::Config(format!("cannot parse number '{t}'")))?
    };
    Ok(if neg { -v } else { v })
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Config(format!("cannot parse count '{s}'")))
}

/// Split config text into ordered `(key, value)` pairs. Duplicate keys are
/// rejected; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", lineno + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("duplicate key '{key}'")));
        }
        out.push((key, value));
    }
    Ok(out)
}

/// Apply `key=value` overrides: replace an existing key or append a new
/// one.
pub fn apply_overrides(
    mut kvs: Vec<(String, String)>,
    overrides: &[(String, String)],
) -> Vec<(String, String)> {
    for (k, v) in overrides {
        if let Some(slot) = kvs.iter_mut().find(|(key, _)| key == k) {
            slot.1 = v.clone();
        } else {
            kvs.push((k.clone(), v.clone()));
        }
    }
    kvs
}

/// Canonical one-line-per-key form (sorted) used for the provenance hash.
pub fn canonical_config_string(kvs: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = kvs.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut s = String::new();
    for (k, v) in sorted {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}

const BASE_KEYS: &[&str] = &[
    "base.Delta",
    "base.G",
    "base.epsilon",
    "base.gamma_m",
    "base.n_th",
    "base.cutoff_photon",
    "base.cutoff_phonon",
];
const DERIVATION_KEYS: &[&str] = &[
    "derivation.omega0",
    "derivation.J",
    "derivation.g0",
    "derivation.omega_m",
    "derivation.Omega",
    "derivation.Delta_a",
    "derivation.q_probe_range",
];
const OTHER_KEYS: &[&str] = &[
    "constraint.delta_m",
    "sweep.variable",
    "sweep.min",
    "sweep.max",
    "sweep.points",
    "outputs",
    "solver.rtol",
    "predict.max_pair",
];

/// Parse and validate a full sweep configuration from key-value pairs.
pub fn config_from_key_values(kvs: &[(String, String)]) -> Result<SweepConfig> {
    let get = |key: &str| kvs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    for (k, _) in kvs {
        if !BASE_KEYS.contains(&k.as_str())
            && !DERIVATION_KEYS.contains(&k.as_str())
            && !OTHER_KEYS.contains(&k.as_str())
        {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
    }

    let has_derivation = kvs.iter().any(|(k, _)| k.starts_with("derivation."));
    let coupling = if has_derivation {
        if get("base.G").is_some() {
            return Err(Error::Config(
                "give either base.G or derivation.*, not both".into(),
            ));
        }
        let req = |key: &str| {
            get(key).ok_or_else(|| Error::Config(format!("derivation base needs '{key}'")))
        };
        CouplingSource::Derivation(DerivationParams {
            optical_freq: parse_value(req("derivation.omega0")?)?,
            tunneling: parse_value(req("derivation.J")?)?,
            linear_coupling: parse_value(req("derivation.g0")?)?,
            mech_freq: parse_value(req("derivation.omega_m")?)?,
            pump_amplitude: parse_value(req("derivation.Omega")?)?,
            pump_detuning: parse_value(req("derivation.Delta_a")?)?,
            optical_damping: 1.0,
            q_probe_range: get("derivation.q_probe_range").map(parse_value).transpose()?.unwrap_or(1.0),
        })
    } else {
        let g = parse_value(
            get("base.G").ok_or_else(|| Error::Config("missing base.G (units of gamma_c)".into()))?,
        )?;
        if g < 0.0 {
            return Err(Error::Config(format!("base.G = {g} must be >= 0")));
        }
        CouplingSource::Direct(g)
    };

    let variable = match get("sweep.variable") {
        Some("Delta") => SweepVariable::Delta,
        Some("n_th") => SweepVariable::ThermalPhonons,
        Some("tau") => SweepVariable::Tau,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown sweep.variable '{other}' (known: Delta, n_th, tau)"
            )))
        }
        None => return Err(Error::Config("missing sweep.variable".into())),
    };

    let min = parse_value(get("sweep.min").ok_or_else(|| Error::Config("missing sweep.min".into()))?)?;
    let max = parse_value(get("sweep.max").ok_or_else(|| Error::Config("missing sweep.max".into()))?)?;
    let points =
        parse_usize(get("sweep.points").ok_or_else(|| Error::Config("missing sweep.points".into()))?)?;
    if points < 2 {
        return Err(Error::Config(format!("sweep.points = {points} must be >= 2")));
    }
    if !(min < max) {
        return Err(Error::Config(format!("sweep range [{min}, {max}] must have min < max")));
    }
    if matches!(variable, SweepVariable::Tau | SweepVariable::ThermalPhonons) && min < 0.0 {
        return Err(Error::Config(format!("sweep.min = {min} must be >= 0 for this variable")));
    }

    let delta_m_rule = match get("constraint.delta_m") {
        None | Some("Delta/2") => DeltaMRule::HalfDelta,
        Some("derived") => DeltaMRule::Derived,
        Some(num) => DeltaMRule::Fixed(parse_value(num)?),
    };

    let outputs_raw =
        get("outputs").ok_or_else(|| Error::Config("missing outputs list".into()))?;
    let outputs: Vec<OutputColumn> = outputs_raw
        .split(',')
        .map(|t| OutputColumn::parse(t.trim()))
        .collect::<Result<_>>()?;
    if outputs.is_empty() {
        return Err(Error::Config("outputs list is empty".into()));
    }
    let has_tau_output = outputs.iter().any(|o| !matches!(o, OutputColumn::Scalar(_)));
    match variable {
        SweepVariable::Tau => {
            if outputs.iter().any(|o| matches!(o, OutputColumn::Scalar(_))) {
                return Err(Error::Config(
                    "tau sweeps emit only delayed correlations (g2_21_tau, g2_12_tau)".into(),
                ));
            }
        }
        _ => {
            if has_tau_output {
                return Err(Error::Config(
                    "delayed correlations require sweep.variable = tau".into(),
                ));
            }
        }
    }

    let base = BaseSpec {
        coupling,
        delta_over_g: get("base.Delta").map(parse_value).transpose()?,
        probe_amplitude: get("base.epsilon")
            .map(parse_value)
            .transpose()?
            .ok_or_else(|| Error::Config("missing base.epsilon".into()))?,
        mech_damping: get("base.gamma_m")
            .map(parse_value)
            .transpose()?
            .ok_or_else(|| Error::Config("missing base.gamma_m".into()))?,
        thermal_phonons: get("base.n_th").map(parse_value).transpose()?.unwrap_or(0.0),
        cutoff_photon: get("base.cutoff_photon").map(parse_usize).transpose()?.unwrap_or(5),
        cutoff_phonon: get("base.cutoff_phonon").map(parse_usize).transpose()?.unwrap_or(12),
    };

    let config = SweepConfig {
        base,
        variable,
        min,
        max,
        points,
        delta_m_rule,
        outputs,
        evolve_rtol: get("solver.rtol").map(parse_value).transpose()?,
        max_pair: get("predict.max_pair").map(parse_usize).transpose()?.unwrap_or(4),
    };
    if config.max_pair < 2 {
        return Err(Error::Config(format!(
            "predict.max_pair = {} must be >= 2",
            config.max_pair
        )));
    }
    // Materialize one operating point now so bad physics parameters fail at
    // parse time, not mid-sweep.
    config.params_at(config.min.max(0.0))?;
    Ok(config)
}

/// Parse a configuration from its textual form.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    config_from_key_values(&parse_key_values(text)?)
}

/// Named presets shipped with the crate, reproducing the studied
/// transmission, isolation, correlation and thermal-robustness curves.
pub fn preset(name: &str) -> Option<&'static str> {
    Some(match name {
        "transmission" => include_str!("../../presets/transmission.conf"),
        "isolation" => include_str!("../../presets/isolation.conf"),
        "correlation" => include_str!("../../presets/correlation.conf"),
        "correlation-delay" => include_str!("../../presets/correlation-delay.conf"),
        "thermal-transmission" => include_str!("../../presets/thermal-transmission.conf"),
        "thermal-correlation" => include_str!("../../presets/thermal-correlation.conf"),
        "thermal-isolation" => include_str!("../../presets/thermal-isolation.conf"),
        "thermal-correlation-trend" => {
            include_str!("../../presets/thermal-correlation-trend.conf")
        }
        _ => return None,
    })
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "transmission",
        "isolation",
        "correlation",
        "correlation-delay",
        "thermal-transmission",
        "thermal-correlation",
        "thermal-isolation",
        "thermal-correlation-trend",
    ]
}
