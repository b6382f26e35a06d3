//! Result tables: failed tests and per-relation false fractions per
//! composite, and the per-relation failures metric per group.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::algebra::TriValue;
use crate::error::{Error, Result};
use crate::relation::Catalog;

use super::evaluate::pair_fraction;
use super::CompositeRun;

/// Fractions rounded to four places, printed with at least one decimal.
pub fn format_fraction(x: f64) -> String {
    let r = (x * 10_000.0).round() / 10_000.0;
    format!("{r:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub composite: String,
    pub groups: usize,
    pub failed_tests: f64,
    /// Atom id to the fraction of groups on which it was FALSE.
    pub atom_false: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table3Row {
    pub configuration: String,
    pub class: String,
    /// Atom id to its failures metric on this group.
    pub metric: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Atom ids in column order.
    pub atoms: Vec<String>,
    pub table2: Vec<Table2Row>,
    pub table3: Vec<Table3Row>,
    pub summary: Value,
}

impl Report {
    pub fn new(runs: &[CompositeRun], catalog: &Catalog) -> Report {
        let mut used: Vec<String> = Vec::new();
        for a in catalog.iter() {
            if runs.iter().any(|r| r.expr.atoms().contains(a.id.as_str())) {
                used.push(a.id.clone());
            }
        }

        let mut table2 = Vec::new();
        let mut table3 = Vec::new();
        let mut summary_runs = Vec::new();
        for run in runs {
            let n = run.verdicts.len();
            let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
            let failed = run
                .verdicts
                .iter()
                .filter(|v| v.composite_value == TriValue::False)
                .count();
            let atoms = run.expr.atoms();
            let atom_false = used
                .iter()
                .filter(|id| atoms.contains(id.as_str()))
                .map(|id| {
                    let c = run
                        .verdicts
                        .iter()
                        .filter(|v| {
                            v.atom_values.get(id) == Some(&TriValue::False) && !v.branch_not_taken.contains(id.as_str())
                        })
                        .count();
                    (id.clone(), frac(c))
                })
                .collect();
            table2.push(Table2Row {
                composite: run.expr.to_string(),
                groups: n,
                failed_tests: frac(failed),
                atom_false,
            });

            for v in &run.verdicts {
                let metric = v
                    .pair_failures
                    .iter()
                    .filter_map(|(id, pairs)| pair_fraction(pairs).ok().map(|m| (id.clone(), m)))
                    .collect();
                table3.push(Table3Row {
                    configuration: v.group_id.clone(),
                    class: v.class.clone(),
                    metric,
                });
            }

            let groups: Vec<Value> = run
                .verdicts
                .iter()
                .map(|v| {
                    json!({
                        "group": v.group_id,
                        "class": v.class,
                        "value": v.composite_value.label(),
                        "atoms": v.atom_values.iter()
                            .map(|(k, x)| (k.clone(), Value::from(x.label())))
                            .collect::<serde_json::Map<_, _>>(),
                        "suspects": v.suspects.vertex_ids.iter().collect::<Vec<_>>(),
                        "branch_not_taken": v.branch_not_taken,
                    })
                })
                .collect();
            summary_runs.push(json!({
                "composite": run.expr.to_string(),
                "pretty": run.expr.pretty(),
                "domain": run.domain.tags(),
                "groups": groups,
                "inapplicable_groups": run.inapplicable,
                "failed_tests": format_fraction(frac(failed)),
                "any_false": run.any_false(),
            }));
        }
        Report {
            atoms: used,
            table2,
            table3,
            summary: json!({ "runs": summary_runs }),
        }
    }

    fn table2_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["composite".to_string(), "groups".into(), "failed_tests".into()];
        header.extend(self.atoms.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.table2 {
            let mut rec = vec![r.composite.clone(), r.groups.to_string(), format_fraction(r.failed_tests)];
            rec.extend(
                self.atoms
                    .iter()
                    .map(|a| r.atom_false.get(a).map(|x| format_fraction(*x)).unwrap_or_default()),
            );
            w.write_record(&rec).map_err(csv_err)?;
        }
        finish(w)
    }

    fn table3_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["configuration".to_string(), "class".into()];
        header.extend(self.atoms.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.table3 {
            let mut rec = vec![r.configuration.clone(), r.class.clone()];
            rec.extend(
                self.atoms
                    .iter()
                    .map(|a| r.metric.get(a).map(|x| format_fraction(*x)).unwrap_or_default()),
            );
            w.write_record(&rec).map_err(csv_err)?;
        }
        finish(w)
    }

    /// Write `table2.csv`, `table3.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("table2.csv", self.table2_csv()?),
            ("table3.csv", self.table3_csv()?),
            (
                "summary.json",
                serde_json::to_string_pretty(&self.summary).expect("json") + "\n",
            ),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Plain-text rendering of both tables plus suspects of failed groups.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut rows = vec![{
            let mut h = vec!["Composite".to_string(), "Failed tests".into()];
            h.extend(self.atoms.iter().cloned());
            h
        }];
        for r in &self.table2 {
            let mut row = vec![r.composite.clone(), format_fraction(r.failed_tests)];
            row.extend(
                self.atoms
                    .iter()
                    .map(|a| r.atom_false.get(a).map(|x| format_fraction(*x)).unwrap_or("-".into())),
            );
            rows.push(row);
        }
        out.push_str(&align(&rows));

        if self.table3.iter().any(|r| !r.metric.is_empty()) {
            out.push('\n');
            let mut rows = vec![{
                let mut h = vec!["Configuration".to_string()];
                h.extend(self.atoms.iter().cloned());
                h
            }];
            for r in &self.table3 {
                let mut row = vec![r.configuration.clone()];
                row.extend(
                    self.atoms
                        .iter()
                        .map(|a| r.metric.get(a).map(|x| format_fraction(*x)).unwrap_or("-".into())),
                );
                rows.push(row);
            }
            out.push_str(&align(&rows));
        }

        if let Some(runs) = self.summary["runs"].as_array() {
            for run in runs {
                for g in run["groups"].as_array().into_iter().flatten() {
                    if g["value"] == "false" {
                        let suspects: Vec<&str> = g["suspects"]
                            .as_array()
                            .into_iter()
                            .flatten()
                            .filter_map(Value::as_str)
                            .collect();
                        let _ = writeln!(
                            out,
                            "FALSE on {}: suspects {{{}}}",
                            g["group"].as_str().unwrap_or("?"),
                            suspects.join(", ")
                        );
                    }
                }
            }
        }
        out
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{s:<w$}", w = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn csv_err(e: csv::Error) -> Error {
    Error::usage(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
