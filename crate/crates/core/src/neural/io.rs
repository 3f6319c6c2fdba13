//! Text model files.
//!
//! ```text
//! gridpinn-mlp 1
//! dims 28 64 64 28
//! layer 0
//! <dims[0] lines of dims[1] weights, row-major>
//! <one line of dims[1] biases>
//! layer 1
//! ...
//! ```
//! Values are written in shortest round-trip decimal form.

use super::MlpModel;
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

const MAGIC: &str = "gridpinn-mlp";
const VERSION: u32 = 1;

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

impl MlpModel {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\ndims {}\n", join(self.layer_dims.iter().map(|&d| d as f64)));
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            out.push_str(&format!("layer {k}\n"));
            for row in w.rows() {
                out.push_str(&join(row.iter().copied()));
                out.push('\n');
            }
            out.push_str(&join(b.iter().copied()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("model file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}")));
        let header = next("header")?;
        if header.trim() != format!("{MAGIC} {VERSION}") {
            return Err(bad(format!("unsupported header `{header}`")));
        }
        let dims_line = next("dims")?;
        let dims: Vec<usize> = dims_line
            .strip_prefix("dims")
            .ok_or_else(|| bad("expected dims".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad dimension `{t}`"))))
            .collect::<Result<_>>()?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(bad(format!("invalid dims {dims:?}")));
        }
        let parse_row = |line: &str, len: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            if v.len() != len {
                return Err(bad(format!("expected {len} values, found {}", v.len())));
            }
            Ok(v)
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (k, w) in dims.windows(2).enumerate() {
            let tag = next("layer tag")?;
            if tag.trim() != format!("layer {k}") {
                return Err(bad(format!("expected `layer {k}`, found `{tag}`")));
            }
            let mut flat = Vec::with_capacity(w[0] * w[1]);
            for _ in 0..w[0] {
                flat.extend(parse_row(next("weights")?, w[1])?);
            }
            weights.push(Array2::from_shape_vec((w[0], w[1]), flat).expect("shape checked"));
            biases.push(Array1::from(parse_row(next("biases")?, w[1])?));
        }
        Ok(Self {
            layer_dims: dims,
            weights,
            biases,
        })
    }
}
