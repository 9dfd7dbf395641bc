//! The preset distribution catalog exposed by the CLI.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use sidelink_core::dist::presets as core_presets;
use sidelink_core::dist::JointDistribution;

/// One settable parameter of a preset.
#[derive(Clone, Serialize, Deserialize, PartialEq, Debug)]
pub struct ParamInfo {
    pub name: String,
    pub default: f64,
    pub description: String,
}

/// Catalog entry for one named distribution family.
#[derive(Clone, Serialize, Deserialize, PartialEq, Debug)]
pub struct PresetInfo {
    pub name: String,
    pub summary: String,
    pub params: Vec<ParamInfo>,
}

fn param(name: &str, default: f64, description: &str) -> ParamInfo {
    ParamInfo {
        name: name.into(),
        default,
        description: description.into(),
    }
}

/// All presets the CLI can instantiate, with parameter schemas and defaults.
pub fn list_presets() -> Vec<PresetInfo> {
    vec![
        PresetInfo {
            name: "delta-noise".into(),
            summary: "Y uniform on {0..n}; X = Y with probability 1 - delta, \
                      otherwise uniform over the other symbols"
                .into(),
            params: vec![
                param("n", 256.0, "support is {0..n} on both sides"),
                param("delta", 0.25, "disagreement probability, in (0, 1/2)"),
            ],
        },
        PresetInfo {
            name: "harmonic-permutation".into(),
            summary: "X over {1..n}, Y a uniform-rank permutation, \
                      p(i, sigma) = 1/(sigma(i) H_n n!)"
                .into(),
            params: vec![param("n", 5.0, "domain size, at most 7 (factorial support)")],
        },
        PresetInfo {
            name: "fano-tight".into(),
            summary: "trivial Y; X is an empty symbol with mass 1 - eps and \
                      2^n strings with mass eps/2^n each"
                .into(),
            params: vec![
                param("n", 10.0, "string length; support size 2^n + 1"),
                param("preset_eps", 0.125, "mass spread over the strings"),
            ],
        },
        PresetInfo {
            name: "identity".into(),
            summary: "X = Y, uniform over n symbols".into(),
            params: vec![param("n", 16.0, "domain size")],
        },
        PresetInfo {
            name: "independent-uniform".into(),
            summary: "independent uniform X over nx and Y over ny symbols".into(),
            params: vec![
                param("nx", 8.0, "x domain size"),
                param("ny", 8.0, "y domain size"),
            ],
        },
    ]
}

fn take(params: &BTreeMap<String, f64>, info: &PresetInfo, name: &str) -> f64 {
    params.get(name).copied().unwrap_or_else(|| {
        info.params
            .iter()
            .find(|p| p.name == name)
            .expect("parameter declared in catalog")
            .default
    })
}

fn as_u32(value: f64, name: &str) -> Result<u32> {
    if value.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&value) {
        bail!("parameter {name} must be a nonnegative integer, got {value}");
    }
    Ok(value as u32)
}

/// Instantiates a preset; missing parameters fall back to catalog defaults,
/// unknown parameter names are rejected.
pub fn instantiate(name: &str, params: &BTreeMap<String, f64>) -> Result<JointDistribution> {
    let catalog = list_presets();
    let info = catalog
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| anyhow::anyhow!("unknown preset {name:?}; see `sidelink presets`"))?;
    for key in params.keys() {
        if !info.params.iter().any(|p| &p.name == key) {
            bail!("preset {name} has no parameter {key:?}");
        }
    }
    let joint = match name {
        "delta-noise" => core_presets::delta_noise(
            as_u32(take(params, info, "n"), "n")?,
            take(params, info, "delta"),
        )?,
        "harmonic-permutation" => {
            core_presets::harmonic_permutation(as_u32(take(params, info, "n"), "n")?)?
        }
        "fano-tight" => core_presets::fano_tight(
            as_u32(take(params, info, "n"), "n")?,
            take(params, info, "preset_eps"),
        )?,
        "identity" => core_presets::identity_coupling(as_u32(take(params, info, "n"), "n")?)?,
        "independent-uniform" => core_presets::independent_uniform(
            as_u32(take(params, info, "nx"), "nx")?,
            as_u32(take(params, info, "ny"), "ny")?,
        )?,
        _ => unreachable!("catalog and dispatch agree"),
    };
    Ok(joint)
}
