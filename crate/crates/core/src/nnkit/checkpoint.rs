//! Versioned text container for model parameters.
//!
//! ```text
//! hyperneg-checkpoint 1
//! meta <key> <value...>
//! mlp <name> <layers>
//! layer <in> <out> <activation>
//! <out*in weights, row-major>
//! <out biases>
//! vec <name> <len>
//! <values>
//! ```
//!
//! Floats are written in shortest round-trip exponent form, so a save/load
//! cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, Dense, Layer, Mlp};
use crate::error::{Error, Result};

const MAGIC: &str = "hyperneg-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub mlps: BTreeMap<String, Mlp>,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

fn write_floats(out: &mut String, vals: &[f64]) {
    let mut first = true;
    for v in vals {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn parse_floats(line: Option<&str>, expected: usize, what: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| bad(format!("truncated before {what}")))?;
    let vals = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad float {t:?} in {what}"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expected {
        return Err(bad(format!("{what}: expected {expected} values, got {}", vals.len())));
    }
    Ok(vals)
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, mlp) in &self.mlps {
            let _ = writeln!(out, "mlp {name} {}", mlp.layers().len());
            for l in mlp.layers() {
                let _ = writeln!(out, "layer {} {} {}", l.in_dim(), l.out_dim(), l.activation.name());
                write_floats(&mut out, l.weight.as_slice());
                write_floats(&mut out, &l.bias);
            }
        }
        for (name, v) in &self.vectors {
            let _ = writeln!(out, "vec {name} {}", v.len());
            write_floats(&mut out, v);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        let mut h = header.split_ascii_whitespace();
        if h.next() != Some(MAGIC) {
            return Err(bad("missing checkpoint header"));
        }
        let version: u32 = h.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version"))?;
        if version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let mut ck = Checkpoint::default();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.splitn(3, ' ');
            match toks.next() {
                Some("meta") => {
                    let k = toks.next().ok_or_else(|| bad("meta without key"))?;
                    ck.meta.insert(k.to_string(), toks.next().unwrap_or("").to_string());
                }
                Some("mlp") => {
                    let name = toks.next().ok_or_else(|| bad("mlp without name"))?.to_string();
                    let n: usize = toks
                        .next()
                        .and_then(|t| t.trim().parse().ok())
                        .ok_or_else(|| bad("mlp without layer count"))?;
                    let mut layers = Vec::with_capacity(n);
                    for li in 0..n {
                        let spec = lines.next().ok_or_else(|| bad("truncated mlp"))?;
                        let parts: Vec<&str> = spec.split_ascii_whitespace().collect();
                        if parts.len() != 4 || parts[0] != "layer" {
                            return Err(bad(format!("bad layer header {spec:?}")));
                        }
                        let din: usize = parts[1].parse().map_err(|_| bad("bad layer width"))?;
                        let dout: usize = parts[2].parse().map_err(|_| bad("bad layer width"))?;
                        let activation = Activation::parse(parts[3])
                            .ok_or_else(|| bad(format!("unknown activation {}", parts[3])))?;
                        let w = parse_floats(lines.next(), din * dout, &format!("{name} layer {li} weights"))?;
                        let b = parse_floats(lines.next(), dout, &format!("{name} layer {li} bias"))?;
                        layers.push(Layer { weight: Dense::from_vec(dout, din, w)?, bias: b, activation });
                    }
                    ck.mlps.insert(name, Mlp::from_layers(layers)?);
                }
                Some("vec") => {
                    let name = toks.next().ok_or_else(|| bad("vec without name"))?.to_string();
                    let n: usize = toks
                        .next()
                        .and_then(|t| t.trim().parse().ok())
                        .ok_or_else(|| bad("vec without length"))?;
                    let v = if n == 0 {
                        lines.next();
                        Vec::new()
                    } else {
                        parse_floats(lines.next(), n, &name)?
                    };
                    ck.vectors.insert(name, v);
                }
                _ => return Err(bad(format!("unexpected line {line:?}"))),
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn mlp(&self, name: &str) -> Result<&Mlp> {
        self.mlps.get(name).ok_or_else(|| bad(format!("missing mlp {name}")))
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        self.vectors.get(name).map(Vec::as_slice).ok_or_else(|| bad(format!("missing vector {name}")))
    }

    pub fn meta_value(&self, key: &str) -> Result<&str> {
        self.meta.get(key).map(String::as_str).ok_or_else(|| bad(format!("missing meta {key}")))
    }
}
