use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bus, BusId, Line, Meter, MeterKind, MeterSet, PowerNetwork};
use crate::scalar::Scalar;

/// Case file format accepted by [`parse_case`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    NativeJson,
    MatpowerSubset,
}

#[derive(Debug, Serialize, Deserialize)]
struct BusRec {
    id: BusId,
    #[serde(default, skip_serializing_if = "is_false")]
    reference: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRec {
    from: BusId,
    to: BusId,
    x: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeterRec {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line: Option<[BusId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus: Option<BusId>,
    #[serde(default = "unit_cost")]
    cost: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    secured: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
    #[serde(default)]
    buses: Vec<BusRec>,
    #[serde(default)]
    lines: Vec<LineRec>,
    #[serde(default)]
    meters: Vec<MeterRec>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn unit_cost() -> f64 {
    1.0
}

/// Parses a case from bytes in the declared format, returning the validated
/// network and meter set. PMU meters are rejected.
pub fn parse_case<T: Scalar>(
    source: &[u8],
    format: CaseFormat,
) -> Result<(PowerNetwork<T>, MeterSet<T>)> {
    match format {
        CaseFormat::NativeJson => parse_native(source),
        CaseFormat::MatpowerSubset => {
            let net = parse_matpower(source)?;
            let meters = MeterSet::new(&net, vec![])?;
            Ok((net, meters))
        }
    }
}

/// Parses a native-format document that carries only meters (a sidecar
/// meter config for MATPOWER cases) against an existing network.
pub fn parse_meter_sidecar<T: Scalar>(
    source: &[u8],
    network: &PowerNetwork<T>,
) -> Result<MeterSet<T>> {
    let doc: CaseDoc = serde_json::from_slice(source).map_err(json_err)?;
    build_meters(network, doc.meters)
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn parse_native<T: Scalar>(source: &[u8]) -> Result<(PowerNetwork<T>, MeterSet<T>)> {
    let doc: CaseDoc = serde_json::from_slice(source).map_err(json_err)?;
    let buses = doc
        .buses
        .iter()
        .map(|b| Bus {
            id: b.id,
            is_reference: b.reference,
        })
        .collect();
    let lines = merge_parallel(
        doc.lines
            .iter()
            .map(|l| (l.from, l.to, l.x))
            .collect::<Vec<_>>(),
    )?;
    let net = PowerNetwork::new(buses, lines)?;
    let meters = build_meters(&net, doc.meters)?;
    Ok((net, meters))
}

/// Parallel lines between the same bus pair are merged into one equivalent
/// line: 1/x_eq = sum of 1/x_i.
fn merge_parallel<T: Scalar>(raw: Vec<(BusId, BusId, f64)>) -> Result<Vec<Line<T>>> {
    let mut acc: BTreeMap<(BusId, BusId), f64> = BTreeMap::new();
    for (a, b, x) in raw {
        let key = if a <= b { (a, b) } else { (b, a) };
        if x <= 0.0 {
            return Err(Error::BadReactance(key.0, key.1));
        }
        *acc.entry(key).or_insert(0.0) += 1.0 / x;
    }
    Ok(acc
        .into_iter()
        .map(|((from, to), inv)| Line {
            from,
            to,
            reactance: T::from_f64_lossy(1.0 / inv),
        })
        .collect())
}

fn build_meters<T: Scalar>(net: &PowerNetwork<T>, recs: Vec<MeterRec>) -> Result<MeterSet<T>> {
    let mut meters = Vec::with_capacity(recs.len());
    for r in recs {
        let kind = match r.kind.as_str() {
            "flow" => {
                let [from, to] = r.line.ok_or_else(|| {
                    Error::InvalidCase(format!("flow meter {:?} missing \"line\"", r.id))
                })?;
                MeterKind::Flow { from, to }
            }
            "injection" => {
                let bus = r.bus.ok_or_else(|| {
                    Error::InvalidCase(format!("injection meter {:?} missing \"bus\"", r.id))
                })?;
                MeterKind::Injection { bus }
            }
            "pmu" | "PMU" => return Err(Error::PmuMeter(r.id)),
            other => {
                return Err(Error::InvalidCase(format!(
                    "meter {:?} has unknown kind {:?}",
                    r.id, other
                )))
            }
        };
        meters.push(Meter {
            id: r.id,
            kind,
            cost: T::from_f64_lossy(r.cost),
            secured: r.secured,
        });
    }
    MeterSet::new(net, meters)
}

/// Serializes a network and meter set back to the native JSON format.
/// `parse_case(serialize_native(..)) ` reproduces the same values.
pub fn serialize_native<T: Scalar>(net: &PowerNetwork<T>, meters: &MeterSet<T>) -> String {
    let doc = CaseDoc {
        name: None,
        notes: None,
        buses: net
            .buses()
            .iter()
            .map(|b| BusRec {
                id: b.id,
                reference: b.is_reference,
            })
            .collect(),
        lines: net
            .lines()
            .iter()
            .map(|l| LineRec {
                from: l.from,
                to: l.to,
                x: l.reactance.to_f64_lossy(),
            })
            .collect(),
        meters: meters
            .meters()
            .iter()
            .map(|m| match &m.kind {
                MeterKind::Flow { from, to } => MeterRec {
                    id: m.id.clone(),
                    kind: "flow".into(),
                    line: Some([*from, *to]),
                    bus: None,
                    cost: m.cost.to_f64_lossy(),
                    secured: m.secured,
                },
                MeterKind::Injection { bus } => MeterRec {
                    id: m.id.clone(),
                    kind: "injection".into(),
                    line: None,
                    bus: Some(*bus),
                    cost: m.cost.to_f64_lossy(),
                    secured: m.secured,
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("native case serialization")
}

/// Reads the MATPOWER subset: `mpc.bus` columns 1 (id) and 2 (type, 3 marks
/// the reference bus), and `mpc.branch` columns 1, 2, 4 (from, to, x).
fn parse_matpower<T: Scalar>(source: &[u8]) -> Result<PowerNetwork<T>> {
    let text = std::str::from_utf8(source).map_err(|_| Error::Syntax {
        line: 0,
        column: 0,
        message: "case file is not valid UTF-8".into(),
    })?;
    let bus_rows = matpower_table(text, "bus")?;
    let branch_rows = matpower_table(text, "branch")?;

    let mut buses = Vec::new();
    for (line_no, row) in bus_rows {
        if row.len() < 2 {
            return Err(Error::Syntax {
                line: line_no,
                column: 1,
                message: "bus row needs at least 2 columns (id, type)".into(),
            });
        }
        buses.push(Bus {
            id: row[0] as BusId,
            is_reference: row[1] as i64 == 3,
        });
    }
    let mut raw_lines = Vec::new();
    for (line_no, row) in branch_rows {
        if row.len() < 4 {
            return Err(Error::Syntax {
                line: line_no,
                column: 1,
                message: "branch row needs at least 4 columns (from, to, r, x)".into(),
            });
        }
        raw_lines.push((row[0] as BusId, row[1] as BusId, row[3]));
    }
    PowerNetwork::new(buses, merge_parallel(raw_lines)?)
}

/// Extracts the numeric rows of `mpc.<name> = [ ... ];`, tracking the source
/// line of each row for diagnostics.
fn matpower_table(text: &str, name: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let needle = format!("mpc.{name}");
    let mut rows = Vec::new();
    let mut inside = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if !inside {
            if let Some(rest) = line.strip_prefix(&needle) {
                let rest = rest.trim_start();
                if let Some(rest) = rest.strip_prefix('=') {
                    let rest = rest.trim_start();
                    if let Some(body) = rest.strip_prefix('[') {
                        inside = true;
                        if !parse_matrix_line(body, line_no, &mut rows, &mut inside)? {
                            return Ok(rows);
                        }
                    }
                }
            }
        } else if !parse_matrix_line(line, line_no, &mut rows, &mut inside)? {
            return Ok(rows);
        }
    }
    if inside {
        return Err(Error::Syntax {
            line: text.lines().count(),
            column: 1,
            message: format!("unterminated mpc.{name} table"),
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidCase(format!("missing mpc.{name} table")));
    }
    Ok(rows)
}

/// Returns false once the closing `]` was consumed.
fn parse_matrix_line(
    line: &str,
    line_no: usize,
    rows: &mut Vec<(usize, Vec<f64>)>,
    inside: &mut bool,
) -> Result<bool> {
    let (body, done) = match line.find(']') {
        Some(p) => (&line[..p], true),
        None => (line, false),
    };
    for stmt in body.split(';') {
        let stmt = stmt.trim();
        if stmt.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, tok) in stmt.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Syntax {
                line: line_no,
                column: col + 1,
                message: format!("invalid number {tok:?}"),
            })?;
            row.push(v);
        }
        rows.push((line_no, row));
    }
    if done {
        *inside = false;
        return Ok(false);
    }
    Ok(true)
}
