use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use crate::error::{Error, Result};
use crate::estimation::MarginalEstimate;

pub const SCHEMA_LINE: &str = "#schema=1";

/// One (algorithm, l, k, repetition) measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub algorithm: Algorithm,
    pub l: usize,
    pub k: usize,
    pub repetition: usize,
    pub mean_utility: f64,
    pub stderr: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<Row>,
}

/// Mean over repetitions of one cell, with the standard error of that mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub l: usize,
    pub k: usize,
    pub repetitions: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl ExperimentTable {
    /// Writes the schema line, a header, then one record per row.
    pub fn emit_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SCHEMA_LINE}")?;
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.emit_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn parse_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        if first.trim_end() != SCHEMA_LINE {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected {SCHEMA_LINE:?}, found {:?}", first.trim_end()),
            });
        }
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<Row>, _>>()?;
        Ok(ExperimentTable { rows })
    }

    /// Per-cell averages over repetitions, in first-appearance order.
    pub fn summarize(&self) -> Vec<CellSummary> {
        let mut order = Vec::new();
        let mut groups: BTreeMap<(Algorithm, usize, usize), Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            let key = (row.algorithm, row.l, row.k);
            groups
                .entry(key)
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(row.mean_utility);
        }
        order
            .into_iter()
            .map(|key| {
                let values = &groups[&key];
                let est = MarginalEstimate::from_samples(values);
                CellSummary {
                    algorithm: key.0,
                    l: key.1,
                    k: key.2,
                    repetitions: values.len(),
                    mean: est.mean,
                    stderr: est.stderr,
                }
            })
            .collect()
    }

    /// Plot-ready series, one per algorithm. The x axis is `l` when the
    /// table holds a single budget and `k` otherwise.
    pub fn plot_data(&self) -> PlotData {
        let summary = self.summarize();
        let mut ks: Vec<usize> = summary.iter().map(|s| s.k).collect();
        ks.sort_unstable();
        ks.dedup();
        let by_l = ks.len() <= 1;
        let mut series: Vec<Series> = Vec::new();
        for s in summary {
            let x = if by_l { s.l } else { s.k };
            let name = s.algorithm.name().to_string();
            let idx = match series.iter().position(|t| t.algorithm == name) {
                Some(i) => i,
                None => {
                    series.push(Series { algorithm: name, x: Vec::new(), mean: Vec::new(), stderr: Vec::new() });
                    series.len() - 1
                }
            };
            let t = &mut series[idx];
            t.x.push(x);
            t.mean.push(s.mean);
            t.stderr.push(s.stderr);
        }
        PlotData { x_axis: if by_l { "l" } else { "k" }.to_string(), series }
    }

    pub fn emit_plot_data<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.plot_data())?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub x_axis: String,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub algorithm: String,
    pub x: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}
