//! Plain-text `key = value` files for domains and spike ensembles.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated; lists of
//! boxes separate boxes with `;`. Unknown and duplicate keys are rejected by name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{CollocationSettings, DomainDescriptor};
use crate::error::{Result, SpikeError};
use crate::geometry::Box4;
use crate::reduced_energy::{BetaSchedule, SpikeBox};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyValues {
    /// Label used in messages, usually the file name.
    pub source: String,
    pub entries: BTreeMap<String, String>,
}

fn config_err(msg: String) -> SpikeError {
    SpikeError::Config(msg)
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("{source}:{}: expected key = value", n + 1)))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(config_err(format!("{source}:{}: empty key", n + 1)));
            }
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(config_err(format!("{source}: duplicate key '{k}'")));
            }
        }
        Ok(Self { source: source.into(), entries })
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(config_err(format!("{}: unknown key '{k}'", self.source))),
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| config_err(format!("{}: missing key '{key}'", self.source)))
    }

    fn number(&self, key: &str, v: &str) -> Result<f64> {
        v.trim()
            .parse()
            .map_err(|_| config_err(format!("{}: key '{key}' expects a number, got '{v}'", self.source)))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| self.number(key, v))
    }

    pub fn f64_required(&self, key: &str) -> Result<f64> {
        let v = self.required(key)?;
        self.number(key, v)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| config_err(format!("{}: key '{key}' expects a count, got '{v}'", self.source)))
        })
    }

    pub fn list(&self, key: &str, v: &str) -> Result<Vec<f64>> {
        parse_list(v).map_err(|_| config_err(format!("{}: key '{key}' expects comma-separated numbers, got '{v}'", self.source)))
    }

    pub fn list_required(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.required(key)?;
        self.list(key, v)
    }

    pub fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|v| self.list(key, v)).transpose()
    }

    fn fixed<const N: usize>(&self, key: &str, v: &str) -> Result<[f64; N]> {
        let l = self.list(key, v)?;
        l.try_into().map_err(|_| config_err(format!("{}: key '{key}' expects {N} numbers", self.source)))
    }
}

/// Comma-separated reals.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|x| x.trim().parse::<f64>()).collect()
}

const DOMAIN_KEYS: &[&str] = &[
    "kind",
    "center",
    "radius",
    "offset",
    "handle",
    "outer",
    "hole_offset",
    "hole_radius",
    "charge_offset",
    "resolution",
    "grading_first",
    "grading_ratio",
    "svd_cutoff",
    "residual_threshold",
];

/// Domain file. `kind` is `ball` (closed form), `collocation` (a ball solved by
/// collocation), `dumbbell` or `perforated`.
pub fn parse_domain(text: &str, source: &str) -> Result<DomainDescriptor> {
    let kv = KeyValues::parse(text, source)?;
    kv.reject_unknown(DOMAIN_KEYS)?;
    let kind = kv.required("kind")?;
    let only = |keys: &[&str]| -> Result<()> {
        let geometry = ["center", "radius", "offset", "handle", "outer", "hole_offset", "hole_radius"];
        match geometry.iter().find(|k| kv.get(k).is_some() && !keys.contains(k)) {
            Some(k) => Err(config_err(format!("{source}: key '{k}' does not apply to kind '{kind}'"))),
            None => Ok(()),
        }
    };
    let center = || -> Result<[f64; 4]> { kv.get("center").map_or(Ok([0.0; 4]), |v| kv.fixed::<4>("center", v)) };
    let d = match kind {
        "ball" => {
            only(&["center", "radius"])?;
            DomainDescriptor::ball(center()?, kv.f64_or("radius", 1.0)?)?
        }
        "collocation" => {
            only(&["center", "radius"])?;
            DomainDescriptor::collocation_ball(center()?, kv.f64_or("radius", 1.0)?)?
        }
        "dumbbell" => {
            only(&["radius", "offset", "handle"])?;
            DomainDescriptor::dumbbell(kv.f64_required("radius")?, kv.f64_required("offset")?, kv.f64_required("handle")?)?
        }
        "perforated" => {
            only(&["outer", "hole_offset", "hole_radius"])?;
            DomainDescriptor::perforated(kv.f64_required("outer")?, kv.f64_required("hole_offset")?, kv.f64_required("hole_radius")?)?
        }
        k => return Err(config_err(format!("{source}: unknown domain kind '{k}'"))),
    };
    let def = CollocationSettings::default();
    let settings = CollocationSettings {
        charge_offset: kv.f64_or("charge_offset", def.charge_offset)?,
        resolution: kv.usize_or("resolution", def.resolution)?,
        grading_first: kv.f64_or("grading_first", def.grading_first)?,
        grading_ratio: kv.f64_or("grading_ratio", def.grading_ratio)?,
        svd_cutoff: kv.f64_or("svd_cutoff", def.svd_cutoff)?,
        residual_threshold: kv.f64_or("residual_threshold", def.residual_threshold)?,
    };
    Ok(d.with_settings(settings))
}

/// Coupling given either as a number or as a λ-dependent schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpec {
    Value(f64),
    Schedule(BetaSchedule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub beta: BetaSpec,
    pub eta: f64,
    pub boxes: Vec<SpikeBox>,
}

pub const DEFAULT_D_RANGE: (f64, f64) = (1.0, 200.0);

const ENSEMBLE_KEYS: &[&str] = &["m", "lambdas", "mus", "beta", "beta_schedule", "eta", "boxes", "d_ranges"];

/// Ensemble file. `boxes` holds one 8-number box (lo1,hi1,…,lo4,hi4) per spike,
/// separated by `;`. The optional `d_ranges` holds one `lo,hi` pair per spike.
pub fn parse_ensemble(text: &str, source: &str) -> Result<EnsembleConfig> {
    let kv = KeyValues::parse(text, source)?;
    kv.reject_unknown(ENSEMBLE_KEYS)?;
    let m_raw = kv.required("m")?;
    let m: usize = m_raw
        .parse()
        .ok()
        .filter(|m| *m > 0)
        .ok_or_else(|| config_err(format!("{source}: key 'm' expects a positive count, got '{m_raw}'")))?;
    let lambdas = kv.list_required("lambdas")?;
    let mus = kv.list_required("mus")?;
    let beta = match (kv.get("beta"), kv.get("beta_schedule")) {
        (Some(_), Some(_)) => return Err(config_err(format!("{source}: give either 'beta' or 'beta_schedule', not both"))),
        (Some(_), None) => BetaSpec::Value(kv.f64_required("beta")?),
        (None, Some(s)) => BetaSpec::Schedule(BetaSchedule::parse(s).map_err(|e| config_err(format!("{source}: {e}")))?),
        (None, None) => return Err(config_err(format!("{source}: missing key 'beta' (or 'beta_schedule')"))),
    };
    let eta = kv.f64_required("eta")?;
    let boxes_raw = kv.required("boxes")?;
    let xi_boxes: Vec<Box4> = boxes_raw
        .split(';')
        .map(|b| {
            kv.list("boxes", b)
                .ok()
                .and_then(|v| Box4::from_interleaved(&v))
                .ok_or_else(|| config_err(format!("{source}: each entry of 'boxes' needs 8 numbers, got '{}'", b.trim())))
        })
        .collect::<Result<_>>()?;
    let d_ranges: Vec<(f64, f64)> = match kv.get("d_ranges") {
        None => vec![DEFAULT_D_RANGE; m],
        Some(raw) => raw
            .split(';')
            .map(|r| match kv.list("d_ranges", r)?.as_slice() {
                [lo, hi] => Ok((*lo, *hi)),
                _ => Err(config_err(format!("{source}: each entry of 'd_ranges' needs 2 numbers"))),
            })
            .collect::<Result<_>>()?,
    };
    for (key, n) in [("lambdas", lambdas.len()), ("mus", mus.len()), ("boxes", xi_boxes.len()), ("d_ranges", d_ranges.len())] {
        if n != m {
            return Err(config_err(format!("{source}: key '{key}' has {n} entries, expected m = {m}")));
        }
    }
    if !(eta > 0.0) {
        return Err(config_err(format!("{source}: key 'eta' must be positive")));
    }
    let boxes = xi_boxes
        .into_iter()
        .zip(d_ranges)
        .map(|(xi, (d_lo, d_hi))| SpikeBox { d_lo, d_hi, xi })
        .collect();
    Ok(EnsembleConfig { m, lambdas, mus, beta, eta, boxes })
}
