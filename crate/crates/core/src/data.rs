//! Datasets: mixture columns `x1..xa`, process columns `z1..zr`, a response.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terms::DesignTable;

/// Loaf volumes for 10 flour blends under 9 coded noise settings.
pub const BREAD_CSV: &str = include_str!("../data/bread.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub mixture_names: Vec<String>,
    pub process_names: Vec<String>,
}

/// Which CSV columns play which role. Empty lists mean "infer from names":
/// `x<k>` columns are mixture components and `z<k>` columns process variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub response: String,
    pub mixture: Vec<String>,
    pub process: Vec<String>,
    pub id: Option<String>,
    pub sum_tolerance: f64,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            response: "y".into(),
            mixture: Vec::new(),
            process: Vec::new(),
            id: None,
            sum_tolerance: 1e-6,
        }
    }
}

fn is_indexed(name: &str, prefix: char) -> bool {
    let mut c = name.chars();
    c.next() == Some(prefix) && {
        let rest = c.as_str();
        !rest.is_empty() && rest.chars().all(|ch| ch.is_ascii_digit())
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn components(&self) -> usize {
        self.mixture_names.len()
    }

    pub fn process_count(&self) -> usize {
        self.process_names.len()
    }

    /// Builds a dataset from a design and responses, validating the rows.
    pub fn from_design(design: &DesignTable, y: Vec<f64>) -> Result<Dataset> {
        if design.len() != y.len() {
            return Err(Error::Dimension(format!("{} design rows but {} responses", design.len(), y.len())));
        }
        let a = design.mixture.first().map(Vec::len).unwrap_or(0);
        let r = design.process.first().map(Vec::len).unwrap_or(0);
        let ds = Dataset {
            ids: (1..=y.len()).map(|i| i.to_string()).collect(),
            x: design.mixture.clone(),
            z: design.process.clone(),
            y,
            mixture_names: (1..=a).map(|i| format!("x{i}")).collect(),
            process_names: (1..=r).map(|i| format!("z{i}")).collect(),
        };
        ds.validate(1e-6)?;
        Ok(ds)
    }

    /// Number of distinct values taken by process variable `j`.
    pub fn process_levels(&self, j: usize) -> usize {
        let mut v: Vec<f64> = self.z.iter().map(|row| row[j]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v.len()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let a = self.components();
        let r = self.process_count();
        for (i, row) in self.x.iter().enumerate() {
            if row.len() != a || self.z[i].len() != r {
                return Err(Error::data_at(i + 1, "row has the wrong number of columns"));
            }
            if row.iter().any(|v| !(*v >= -tol && *v <= 1.0 + tol)) {
                return Err(Error::data_at(i + 1, format!("mixture proportions {row:?} outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::data_at(i + 1, format!("mixture proportions sum to {s}, not 1")));
            }
        }
        Ok(())
    }

    /// Reads CSV text with a header row.
    pub fn from_csv_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::data(format!("cannot read header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::data("empty file"));
        }
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::data(format!("missing column `{name}`")))
        };
        let mut mixture = schema.mixture.clone();
        if mixture.is_empty() {
            mixture = headers.iter().filter(|h| is_indexed(h, 'x')).cloned().collect();
        }
        let mut process = schema.process.clone();
        if process.is_empty() {
            process = headers.iter().filter(|h| is_indexed(h, 'z')).cloned().collect();
        }
        if mixture.len() < 2 {
            return Err(Error::data("need at least two mixture columns"));
        }
        let yi = find(&schema.response)?;
        let xi = mixture.iter().map(|m| find(m)).collect::<Result<Vec<_>>>()?;
        let zi = process.iter().map(|m| find(m)).collect::<Result<Vec<_>>>()?;
        let id_col = match &schema.id {
            Some(c) => Some(find(c)?),
            None => headers.iter().position(|h| h == "run" || h == "id"),
        };

        let mut ds = Dataset {
            ids: Vec::new(),
            x: Vec::new(),
            z: Vec::new(),
            y: Vec::new(),
            mixture_names: mixture,
            process_names: process,
        };
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 1;
            let rec = rec.map_err(|e| Error::data_at(row, e.to_string()))?;
            let get = |c: usize| -> Result<f64> {
                let s = rec.get(c).unwrap_or("");
                if s.is_empty() {
                    return Err(Error::data_at(row, format!("missing value in column `{}`", headers[c])));
                }
                s.parse::<f64>()
                    .map_err(|_| Error::data_at(row, format!("malformed number `{s}` in column `{}`", headers[c])))
            };
            ds.y.push(get(yi)?);
            ds.x.push(xi.iter().map(|c| get(*c)).collect::<Result<_>>()?);
            ds.z.push(zi.iter().map(|c| get(*c)).collect::<Result<_>>()?);
            ds.ids.push(match id_col {
                Some(c) => rec.get(c).unwrap_or("").to_string(),
                None => row.to_string(),
            });
        }
        if ds.is_empty() {
            return Err(Error::data("no data rows"));
        }
        ds.validate(schema.sum_tolerance)?;
        Ok(ds)
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        Dataset::from_csv_reader(f, schema)
    }

    /// CSV text with columns `run`, mixture, process, `y`. Numbers use the
    /// shortest representation that round-trips exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("run");
        for n in self.mixture_names.iter().chain(&self.process_names) {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",y\n");
        for i in 0..self.len() {
            out.push_str(&self.ids[i]);
            for v in self.x[i].iter().chain(&self.z[i]) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", self.y[i]));
        }
        out
    }
}

/// The bundled bread-making data set (90 rows, 3 components, 2 noise variables).
pub fn bread() -> Dataset {
    Dataset::from_csv_reader(BREAD_CSV.as_bytes(), &Schema::default()).expect("bundled data is valid")
}
