//! Native plain-text case format.
//!
//! ```text
//! # comment
//! NAME ieee14
//! BASE_MVA 100
//! BUS
//! # id kind load_mw load_mvar gen_mw vset_pu shunt_g_pu shunt_b_pu
//! 1 SLACK 0 0 232.4 1.06 0 0
//! END
//! BRANCH
//! # from to r_pu x_pu b_pu [tap]
//! 1 2 0.01938 0.05917 0.0528 1
//! END
//! ```
//!
//! `kind` is one of `SLACK`, `PV`, `PQ`. A missing or zero tap means 1.0.

use super::{Branch, Bus, BusKind, GridCase};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Bus,
    Branch,
}

fn field<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot read {what} from `{tok}`"),
    })
}

/// Parses and validates a case in the native format.
pub fn parse_case(text: &str) -> Result<GridCase> {
    let mut name = String::from("unnamed");
    let mut base_mva = None;
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    let mut section = Section::Header;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let keyword = toks[0].to_ascii_uppercase();
        match (section, keyword.as_str()) {
            (_, "END") if section != Section::Header => section = Section::Header,
            (Section::Header, "NAME") => name = toks[1..].join(" "),
            (Section::Header, "BASE_MVA") => {
                let tok = toks.get(1).ok_or(Error::Parse {
                    line: line_no,
                    message: "BASE_MVA needs a value".into(),
                })?;
                base_mva = Some(field::<f64>(tok, line_no, "base MVA")?);
            }
            (Section::Header, "BUS") => section = Section::Bus,
            (Section::Header, "BRANCH") => section = Section::Branch,
            (Section::Header, _) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unexpected `{}` outside a section", toks[0]),
                })
            }
            (Section::Bus, _) => buses.push(parse_bus(&toks, line_no)?),
            (Section::Branch, _) => branches.push(parse_branch(&toks, line_no)?),
        }
    }
    if section != Section::Header {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "section not closed with END".into(),
        });
    }
    let base_mva = base_mva.ok_or(Error::Parse {
        line: 0,
        message: "missing BASE_MVA".into(),
    })?;
    buses.sort_by_key(|b: &Bus| b.id);
    let case = GridCase {
        name,
        base_mva,
        buses,
        branches,
    };
    case.validate()?;
    Ok(case)
}

fn parse_bus(toks: &[&str], line: usize) -> Result<Bus> {
    if toks.len() != 8 {
        return Err(Error::Parse {
            line,
            message: format!("bus record needs 8 columns, found {}", toks.len()),
        });
    }
    let kind = BusKind::from_keyword(toks[1]).ok_or_else(|| Error::Parse {
        line,
        message: format!("unknown bus kind `{}`", toks[1]),
    })?;
    Ok(Bus {
        id: field(toks[0], line, "bus id")?,
        kind,
        load_p: field(toks[2], line, "load MW")?,
        load_q: field(toks[3], line, "load MVAr")?,
        gen_p: field(toks[4], line, "generation MW")?,
        voltage_setpoint: field(toks[5], line, "voltage setpoint")?,
        shunt_g: field(toks[6], line, "shunt conductance")?,
        shunt_b: field(toks[7], line, "shunt susceptance")?,
    })
}

fn parse_branch(toks: &[&str], line: usize) -> Result<Branch> {
    if toks.len() != 5 && toks.len() != 6 {
        return Err(Error::Parse {
            line,
            message: format!("branch record needs 5 or 6 columns, found {}", toks.len()),
        });
    }
    let tap = match toks.get(5) {
        Some(t) => field::<f64>(t, line, "tap")?,
        None => 1.0,
    };
    Ok(Branch {
        from_bus: field(toks[0], line, "from bus")?,
        to_bus: field(toks[1], line, "to bus")?,
        r: field(toks[2], line, "resistance")?,
        x: field(toks[3], line, "reactance")?,
        b_charging: field(toks[4], line, "charging")?,
        tap: if tap == 0.0 { 1.0 } else { tap },
    })
}

/// Serialises a case in the native format. Values are written with the
/// shortest representation that parses back to the same `f64`.
pub fn write_case(case: &GridCase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", case.name);
    let _ = writeln!(out, "BASE_MVA {}", case.base_mva);
    out.push_str("\nBUS\n# id kind load_mw load_mvar gen_mw vset_pu shunt_g_pu shunt_b_pu\n");
    for b in &case.buses {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            b.id,
            b.kind.keyword(),
            b.load_p,
            b.load_q,
            b.gen_p,
            b.voltage_setpoint,
            b.shunt_g,
            b.shunt_b
        );
    }
    out.push_str("END\n\nBRANCH\n# from to r_pu x_pu b_pu tap\n");
    for br in &case.branches {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            br.from_bus, br.to_bus, br.r, br.x, br.b_charging, br.tap
        );
    }
    out.push_str("END\n");
    out
}
