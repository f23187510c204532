//! Result rows and the files a run writes.

use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

/// One aggregate value for one grid cell. Coordinates that do not apply to
/// the experiment are left empty in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ResultRow {
    pub experiment: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub p_x0: Option<f64>,
    pub sigma: Option<f64>,
    pub dt: Option<f64>,
    pub k: Option<usize>,
    pub method: Option<String>,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
    pub se: Option<f64>,
}

impl ResultRow {
    pub fn new(experiment: &str, metric: &str, value: f64, trials: usize) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            metric: metric.to_string(),
            value,
            trials,
            ..Default::default()
        }
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }
    pub fn p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }
    pub fn p_x0(mut self, p: f64) -> Self {
        self.p_x0 = Some(p);
        self
    }
    pub fn sigma(mut self, s: f64) -> Self {
        self.sigma = Some(s);
        self
    }
    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }
    pub fn method(mut self, m: impl ToString) -> Self {
        self.method = Some(m.to_string());
        self
    }
    pub fn se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }
}

/// A named CSV table beyond the long-format summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config: RunConfig,
    pub rows: Vec<ResultRow>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    /// Rows with the given metric, in emission order.
    pub fn metric<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn summary_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `summary.csv`, every table, and `run.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        for t in &self.tables {
            std::fs::write(dir.join(&t.name), &t.csv)?;
        }
        let meta = serde_json::json!({
            "config": self.config,
            "notes": self.notes,
            "files": std::iter::once("summary.csv".to_string())
                .chain(self.tables.iter().map(|t| t.name.clone()))
                .collect::<Vec<_>>(),
        });
        std::fs::write(
            dir.join("run.json"),
            serde_json::to_string_pretty(&meta).expect("json"),
        )?;
        Ok(())
    }
}
