//! Dataset CSV files and their metadata sidecars.
//!
//! Columns: `t, P_1..P_N, Q_1..Q_N, vm_1..vm_N, va_1..va_N`, p.u. and rad.
//! Floats are written in shortest round-trip form, so a write/read cycle is
//! lossless.

use super::{Dataset, NormMeta, Sample, ScenarioSpec};
use crate::error::{Error, Result};
use crate::powerflow::{Injections, StateVector};
use std::io::{Read, Write};

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_dataset_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let n = ds.n_buses();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    for prefix in ["P", "Q", "vm", "va"] {
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for s in &ds.samples {
        let mut row = vec![s.timestamp_index.to_string()];
        for col in [&s.inputs.p, &s.inputs.q, &s.targets.vm, &s.targets.va] {
            row.extend(col.iter().map(|v| v.to_string()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(reader: R, case_ref: &str) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(reader);
    let width = r.headers().map_err(csv_err)?.len();
    if width < 5 || (width - 1) % 4 != 0 || r.headers().map_err(csv_err)?.get(0) != Some("t") {
        return Err(Error::Format("dataset header must be t followed by 4N columns".into()));
    }
    let n = (width - 1) / 4;
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |e: &dyn std::fmt::Display| Error::Format(format!("row {}: {e}", line + 2));
        let t: usize = rec[0].parse().map_err(|e| bad(&e))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&e))?;
        samples.push(Sample {
            inputs: Injections {
                p: vals[..n].to_vec(),
                q: vals[n..2 * n].to_vec(),
            },
            targets: StateVector {
                vm: vals[2 * n..3 * n].to_vec(),
                va: vals[3 * n..].to_vec(),
            },
            timestamp_index: t,
        });
    }
    Ok(Dataset {
        case_ref: case_ref.to_string(),
        samples,
    })
}

/// Sidecar text: normalisation metadata as `key=value` lines, then the
/// scenario spec as a single-line JSON value under `spec`.
pub fn write_sidecar(meta: &NormMeta, spec: Option<&ScenarioSpec>) -> String {
    let mut out = meta.to_kv();
    if let Some(spec) = spec {
        out.push_str("spec=");
        out.push_str(&serde_json::to_string(spec).expect("spec serialises"));
        out.push('\n');
    }
    out
}

pub fn read_sidecar(text: &str) -> Result<(NormMeta, Option<ScenarioSpec>)> {
    let meta = NormMeta::from_kv(text)?;
    let spec = text
        .lines()
        .find_map(|l| l.strip_prefix("spec="))
        .map(|json| serde_json::from_str(json).map_err(|e| Error::Format(format!("spec: {e}"))))
        .transpose()?;
    Ok((meta, spec))
}
