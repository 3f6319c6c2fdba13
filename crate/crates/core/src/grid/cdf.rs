//! IEEE Common Data Format importer.
//!
//! Only the title, bus and branch cards are read. The bus name occupies
//! columns 6-17; the remaining fields of each card are whitespace separated,
//! which tolerates the column drift found in many distributed CDF files.

use super::{Branch, Bus, BusKind, GridCase};
use crate::error::{Error, Result};

fn num(tok: Option<&&str>, line: usize, what: &str) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot read {what} from `{tok}`"),
    })
}

pub fn parse_cdf(text: &str) -> Result<GridCase> {
    let mut lines = text.lines().enumerate();
    let (_, title) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let base_mva = title
        .get(20..title.len().min(40))
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or(Error::Parse {
            line: 1,
            message: "cannot read MVA base from title card".into(),
        })?;
    let name = title.get(45..).map(str::trim).unwrap_or("").to_string();

    let mut buses = Vec::new();
    let mut branches = Vec::new();
    while let Some((_, line)) = lines.next() {
        if line.starts_with("BUS DATA FOLLOWS") {
            for (idx, line) in lines.by_ref() {
                if line.trim_start().starts_with("-999") {
                    break;
                }
                buses.push(parse_bus_card(line, idx + 1)?);
            }
        } else if line.starts_with("BRANCH DATA FOLLOWS") {
            for (idx, line) in lines.by_ref() {
                if line.trim_start().starts_with("-999") {
                    break;
                }
                branches.push(parse_branch_card(line, idx + 1)?);
            }
        } else if line.starts_with("END OF DATA") {
            break;
        }
    }
    buses.sort_by_key(|b: &Bus| b.id);
    let case = GridCase {
        name: if name.is_empty() { "cdf case".into() } else { name },
        base_mva,
        buses,
        branches,
    };
    case.validate()?;
    Ok(case)
}

fn parse_bus_card(line: &str, line_no: usize) -> Result<Bus> {
    let id = line
        .get(0..4)
        .map(str::trim)
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or(Error::Parse {
            line: line_no,
            message: "bad bus number".into(),
        })?;
    let tail: Vec<&str> = line
        .get(17..)
        .unwrap_or("")
        .split_whitespace()
        .collect();
    // area zone type V angle Pd Qd Pg Qg baseKV Vdesired Qmax Qmin G B [remote]
    if tail.len() < 15 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("bus card has {} fields after the name, need 15", tail.len()),
        });
    }
    let kind = match num(tail.get(2), line_no, "bus type")? as i64 {
        0 | 1 => BusKind::PQ,
        2 => BusKind::PV,
        3 => BusKind::Slack,
        other => {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unknown CDF bus type {other}"),
            })
        }
    };
    let v_final = num(tail.get(3), line_no, "final voltage")?;
    let v_desired = num(tail.get(10), line_no, "desired voltage")?;
    let voltage_setpoint = match kind {
        BusKind::PQ => 1.0,
        _ if v_desired > 0.0 => v_desired,
        _ => v_final,
    };
    Ok(Bus {
        id,
        kind,
        load_p: num(tail.get(5), line_no, "load MW")?,
        load_q: num(tail.get(6), line_no, "load MVAr")?,
        gen_p: num(tail.get(7), line_no, "generation MW")?,
        voltage_setpoint,
        shunt_g: num(tail.get(13), line_no, "shunt G")?,
        shunt_b: num(tail.get(14), line_no, "shunt B")?,
    })
}

fn parse_branch_card(line: &str, line_no: usize) -> Result<Branch> {
    let t: Vec<&str> = line.split_whitespace().collect();
    // from to area zone circuit type R X B rate1 rate2 rate3 ctrl side ratio angle
    if t.len() < 16 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("branch card has {} fields, need 16", t.len()),
        });
    }
    let angle = num(t.get(15), line_no, "phase shift")?;
    if angle != 0.0 {
        return Err(Error::Parse {
            line: line_no,
            message: "phase-shifting transformers are not supported".into(),
        });
    }
    let ratio = num(t.get(14), line_no, "turns ratio")?;
    Ok(Branch {
        from_bus: num(t.first(), line_no, "from bus")? as usize,
        to_bus: num(t.get(1), line_no, "to bus")? as usize,
        r: num(t.get(6), line_no, "resistance")?,
        x: num(t.get(7), line_no, "reactance")?,
        b_charging: num(t.get(8), line_no, "charging")?,
        tap: if ratio == 0.0 { 1.0 } else { ratio },
    })
}
