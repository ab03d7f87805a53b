//! Plain-text network checkpoints.
//!
//! ```text
//! version = 1
//! layer_sizes = 50 50
//! symmetry = even
//! input_scale = 1.0000000000000000e0
//! lambda_weight = ...
//! lambda_bias = ...
//! layer0.weight = <row-major values>
//! layer0.bias = ...
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;

use super::{EigenNet, NetConfig, SymmetryMode};
use crate::error::{Error, Result};

const VERSION: u32 = 1;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_checkpoint(net: &EigenNet) -> String {
    let mut s = String::new();
    let cfg = net.config();
    let join = |xs: &[f64]| xs.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(" ");
    writeln!(s, "version = {VERSION}").unwrap();
    let sizes: Vec<String> = cfg.hidden.iter().map(|w| w.to_string()).collect();
    writeln!(s, "layer_sizes = {}", sizes.join(" ")).unwrap();
    writeln!(s, "symmetry = {}", net.symmetry.as_str()).unwrap();
    writeln!(s, "input_scale = {}", fmt_f64(cfg.input_scale)).unwrap();
    writeln!(s, "lambda_start = {}", fmt_f64(cfg.lambda_start)).unwrap();
    let p = net.params();
    let lay = net.layout();
    writeln!(s, "lambda_weight = {}", fmt_f64(p[lay.lambda_weight])).unwrap();
    writeln!(s, "lambda_bias = {}", fmt_f64(p[lay.lambda_bias])).unwrap();
    for (i, d) in lay.layers.iter().enumerate() {
        writeln!(s, "layer{i}.weight = {}", join(&p[d.weight..d.weight + d.weight_len()])).unwrap();
        writeln!(s, "layer{i}.bias = {}", join(&p[d.bias..d.bias + d.rows])).unwrap();
    }
    s
}

pub fn read_checkpoint(text: &str) -> Result<EigenNet> {
    let mut fields: Vec<(usize, &str, &str)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint { line: no + 1, msg: "expected `key = value`".into() })?;
        fields.push((no + 1, k.trim(), v.trim()));
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        fields
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(l, _, v)| (*l, *v))
            .ok_or_else(|| Error::Checkpoint { line: 0, msg: format!("missing field `{key}`") })
    };
    let floats = |key: &str| -> Result<Vec<f64>> {
        let (line, v) = get(key)?;
        v.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Checkpoint { line, msg: format!("{key}: {e}") })
            })
            .collect()
    };

    let (line, version) = get("version")?;
    if version != VERSION.to_string() {
        return Err(Error::Checkpoint { line, msg: format!("unsupported version {version}") });
    }
    let (line, sizes) = get("layer_sizes")?;
    let hidden = sizes
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Checkpoint { line, msg: format!("layer_sizes: {e}") })?;
    let (line, sym) = get("symmetry")?;
    let symmetry = SymmetryMode::parse(sym)
        .ok_or_else(|| Error::Checkpoint { line, msg: format!("unknown symmetry `{sym}`") })?;
    let one = |key: &str| -> Result<f64> {
        let v = floats(key)?;
        let (line, _) = get(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::Checkpoint { line, msg: format!("{key}: expected one value") }),
        }
    };
    let config = NetConfig {
        hidden,
        lambda_start: one("lambda_start")?,
        input_scale: one("input_scale")?,
    };
    let mut net = EigenNet::zeros(config, symmetry)
        .map_err(|e| Error::Checkpoint { line: 0, msg: e.to_string() })?;
    let layout = net.layout().clone();
    let params = net.params_mut();
    params[layout.lambda_weight] = one("lambda_weight")?;
    params[layout.lambda_bias] = one("lambda_bias")?;
    for (i, d) in layout.layers.iter().enumerate() {
        for (suffix, off, len) in [("weight", d.weight, d.weight_len()), ("bias", d.bias, d.rows)] {
            let key = format!("layer{i}.{suffix}");
            let vals = floats(&key)?;
            if vals.len() != len {
                let (line, _) = get(&key)?;
                return Err(Error::Checkpoint {
                    line,
                    msg: format!("{key}: expected {len} values, got {}", vals.len()),
                });
            }
            params[off..off + len].copy_from_slice(&vals);
        }
    }
    Ok(net)
}
