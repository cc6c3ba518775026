//! Reader for the subset of the MATPOWER case format used here: `baseMVA`
//! plus the `bus`, `gen`, `branch` and `gencost` matrices.

use super::{Branch, Bus, Generator, Network, SplitRule};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct Table {
    /// (1-based source line, row values)
    rows: Vec<(usize, Vec<f64>)>,
}

/// Parses MATPOWER `.m` text into a [`Network`].
///
/// Susceptances are `1/x`, the cost is the linear term of the cost polynomial
/// and every in-service branch is switchable. A zero `rateA` (unlimited) gets
/// a sentinel of ten times the total system load.
pub fn parse_matpower_case(text: &str) -> Result<Network> {
    let mut name = String::from("case");
    let mut base_mva = 100.0;
    let mut bus = None;
    let mut gen = None;
    let mut branch = None;
    let mut gencost = None;

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((lineno, raw)) = lines.next() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((key, value)) = rest.split_once('=') else {
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "baseMVA" => {
                base_mva = value.trim_end_matches(';').trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid baseMVA '{value}'"),
                })?;
            }
            "bus" | "gen" | "branch" | "gencost" => {
                if !value.starts_with('[') {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected '[' after mpc.{key}"),
                    });
                }
                let table = read_table(lineno, &value[1..], &mut lines)?;
                match key {
                    "bus" => bus = Some(table),
                    "gen" => gen = Some(table),
                    "branch" => branch = Some(table),
                    _ => gencost = Some(table),
                }
            }
            _ => {}
        }
    }

    let missing = |t: &str| Error::Parse {
        line: 0,
        message: format!("missing mpc.{t} table"),
    };
    let bus = bus.ok_or_else(|| missing("bus"))?;
    let gen = gen.ok_or_else(|| missing("gen"))?;
    let branch = branch.ok_or_else(|| missing("branch"))?;
    let gencost = gencost.ok_or_else(|| missing("gencost"))?;

    let mut buses = Vec::with_capacity(bus.rows.len());
    let mut slack_count = 0;
    for (lineno, row) in &bus.rows {
        require_cols(*lineno, row, 3, "bus")?;
        let is_slack = row[1] == 3.0;
        slack_count += usize::from(is_slack);
        buses.push(Bus {
            id: to_id(*lineno, row[0])?,
            base_kv: row.get(9).copied().unwrap_or(0.0),
            is_slack,
            load_mw: row[2],
        });
    }
    if slack_count > 1 {
        return Err(Error::Validation(vec!["multiple slack buses".to_string()]));
    }
    if slack_count == 0 {
        return Err(Error::Validation(vec!["no slack bus".to_string()]));
    }
    let total_load: f64 = buses.iter().map(|b| b.load_mw).sum();
    let sentinel = 10.0 * total_load.max(1.0);

    if gencost.rows.len() < gen.rows.len() {
        return Err(Error::Parse {
            line: gencost.rows.last().map_or(0, |r| r.0),
            message: format!(
                "gencost has {} rows but gen has {}",
                gencost.rows.len(),
                gen.rows.len()
            ),
        });
    }
    let mut generators = Vec::new();
    for (k, ((lineno, row), (cost_line, cost))) in gen.rows.iter().zip(&gencost.rows).enumerate() {
        require_cols(*lineno, row, 9, "gen")?;
        let in_service = row.get(7).is_none_or(|s| *s > 0.0);
        if !in_service {
            continue;
        }
        generators.push(Generator {
            id: k as u32 + 1,
            bus: to_id(*lineno, row[0])?,
            p_min: row.get(9).copied().unwrap_or(0.0),
            p_max: row[8],
            cost_per_mwh: linear_cost(*cost_line, cost)?,
        });
    }

    let mut branches = Vec::new();
    for (k, (lineno, row)) in branch.rows.iter().enumerate() {
        require_cols(*lineno, row, 6, "branch")?;
        let in_service = row.get(10).is_none_or(|s| *s > 0.0);
        if !in_service {
            continue;
        }
        let id = k as u32 + 1;
        let x = row[3];
        if x == 0.0 {
            return Err(Error::Parse {
                line: *lineno,
                message: format!(
                    "branch {id} ({}-{}) has zero reactance",
                    row[0], row[1]
                ),
            });
        }
        let rate = row[5];
        branches.push(Branch {
            id,
            from_bus: to_id(*lineno, row[0])?,
            to_bus: to_id(*lineno, row[1])?,
            susceptance: 1.0 / x,
            limit_mw: if rate > 0.0 { rate } else { sentinel },
            switchable: true,
        });
    }

    let mut net = Network {
        name,
        base_mva,
        buses,
        branches,
        generators,
        substations: Vec::new(),
    };
    net.annotate_substations(SplitRule::default());
    Ok(net)
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn read_table<'a>(
    start: usize,
    first: &str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Table> {
    let mut table = Table::default();
    if push_rows(&mut table, start, first)? {
        return Ok(table);
    }
    for (lineno, raw) in lines {
        if push_rows(&mut table, lineno, strip_comment(raw))? {
            return Ok(table);
        }
    }
    Err(Error::Parse {
        line: start,
        message: "unterminated matrix (missing '];')".to_string(),
    })
}

/// Appends the rows found in `text`; returns true once the closing bracket is seen.
fn push_rows(table: &mut Table, lineno: usize, text: &str) -> Result<bool> {
    let (body, closed) = match text.find(']') {
        Some(i) => (&text[..i], true),
        None => (text, false),
    };
    for chunk in body.split(';') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let values = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid number '{t}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        table.rows.push((lineno, values));
    }
    Ok(closed)
}

fn require_cols(line: usize, row: &[f64], n: usize, table: &str) -> Result<()> {
    if row.len() < n {
        return Err(Error::Parse {
            line,
            message: format!("{table} row has {} columns, need at least {n}", row.len()),
        });
    }
    Ok(())
}

fn to_id(line: usize, v: f64) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Parse {
            line,
            message: format!("invalid element id {v}"),
        })
    }
}

fn linear_cost(line: usize, row: &[f64]) -> Result<f64> {
    require_cols(line, row, 4, "gencost")?;
    let n = row[3] as usize;
    let coeffs = &row[4..];
    if coeffs.len() < n {
        return Err(Error::Parse {
            line,
            message: format!("gencost declares {n} coefficients, found {}", coeffs.len()),
        });
    }
    match row[0] as i64 {
        // polynomial, highest order first
        2 => Ok(if n >= 2 { coeffs[n - 2] } else { 0.0 }),
        // piecewise linear (x1, y1, ..., xn, yn): average slope
        1 => {
            if coeffs.len() < 2 * n || n < 2 {
                return Err(Error::Parse {
                    line,
                    message: "piecewise-linear cost needs at least two points".to_string(),
                });
            }
            let (x0, y0) = (coeffs[0], coeffs[1]);
            let (x1, y1) = (coeffs[2 * n - 2], coeffs[2 * n - 1]);
            Ok(if x1 > x0 { (y1 - y0) / (x1 - x0) } else { 0.0 })
        }
        m => Err(Error::Parse {
            line,
            message: format!("unknown cost model {m}"),
        }),
    }
}
