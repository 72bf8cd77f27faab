//! Per-node result tables read from CSV.
//!
//! Dialect: comma separated, one header row, lines starting with `#` are
//! comments. One column holds the node id (`id`, `node` or `node_id`, any
//! case); every other column becomes a named component. When `dx`, `dy` and
//! `dz` are all present a derived `len` component is added. Values are used
//! as written, with no unit conversion.

use std::collections::HashMap;

use super::SimFieldError;

const ID_COLUMNS: &[&str] = &["id", "node", "node_id", "nodeid"];

#[derive(Debug, Clone, PartialEq)]
pub struct NodalResults {
    columns: Vec<String>,
    /// Row-major, rows in mesh node order.
    values: Vec<f64>,
    len_components: Option<[usize; 3]>,
}

impl NodalResults {
    /// Component names; `len` is listed last when derived.
    pub fn variables(&self) -> Vec<String> {
        let mut v = self.columns.clone();
        if self.len_components.is_some() {
            v.push("len".to_string());
        }
        v
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row(&self, node: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[node * w..(node + 1) * w]
    }

    /// Fills `out` with the components followed by the derived `len`.
    pub fn complete(&self, components: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(components);
        if let Some([x, y, z]) = self.len_components {
            out.push((components[x].powi(2) + components[y].powi(2) + components[z].powi(2)).sqrt());
        }
    }

    /// All components (including `len`) at mesh node `node`.
    pub fn node_values(&self, node: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.complete(self.row(node), &mut out);
        out
    }
}

/// Reads results for the nodes `node_ids` (mesh order). Every mesh node must
/// have exactly one row and every row must name a mesh node.
pub fn parse_results_csv(bytes: &[u8], node_ids: &[u64]) -> Result<NodalResults, SimFieldError> {
    let bad = |m: String| SimFieldError::Csv(m);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(bad("missing header row".into()));
    }
    let id_col = headers
        .iter()
        .position(|h| ID_COLUMNS.contains(&h.to_ascii_lowercase().as_str()))
        .ok_or_else(|| bad(format!("no node id column (expected one of {})", ID_COLUMNS.join(", "))))?;
    let columns: Vec<String> = headers.iter().enumerate().filter(|&(i, _)| i != id_col).map(|(_, h)| h.to_string()).collect();
    if let Some(dup) = columns.iter().enumerate().find(|(i, c)| columns[..*i].contains(c)) {
        return Err(bad(format!("duplicate column '{}'", dup.1)));
    }
    if columns.iter().any(|c| c == "len") && ["dx", "dy", "dz"].iter().all(|k| columns.iter().any(|c| c == k)) {
        return Err(bad("column 'len' clashes with the derived magnitude of dx, dy, dz".into()));
    }

    let index: HashMap<u64, usize> = node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let w = columns.len();
    let mut values = vec![f64::NAN; node_ids.len() * w];
    let mut seen = vec![false; node_ids.len()];
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(bad(format!("line {line}: {} fields, header has {}", rec.len(), headers.len())));
        }
        let id: u64 = rec[id_col].parse().map_err(|_| bad(format!("line {line}: bad node id '{}'", &rec[id_col])))?;
        let &row = index.get(&id).ok_or_else(|| bad(format!("line {line}: node {id} is not in the mesh")))?;
        if seen[row] {
            return Err(bad(format!("line {line}: duplicate row for node {id}")));
        }
        seen[row] = true;
        for (k, field) in rec.iter().enumerate().filter(|&(i, _)| i != id_col).map(|(_, f)| f).enumerate() {
            let v: f64 = field.parse().map_err(|_| bad(format!("line {line}: bad value '{field}'")))?;
            if !v.is_finite() {
                return Err(bad(format!("line {line}: non-finite value '{field}'")));
            }
            values[row * w + k] = v;
        }
    }
    let missing: Vec<u64> = node_ids.iter().zip(&seen).filter(|(_, s)| !**s).map(|(id, _)| *id).collect();
    if !missing.is_empty() {
        return Err(SimFieldError::MissingNodes {
            count: missing.len(),
            first: missing.into_iter().take(10).collect(),
        });
    }
    let pos = |k: &str| columns.iter().position(|c| c == k);
    let len_components = match (pos("dx"), pos("dy"), pos("dz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        _ => None,
    };
    Ok(NodalResults { columns, values, len_components })
}
