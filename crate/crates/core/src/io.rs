//! Model and parameter files (TOML), matrix and frequency tables (CSV),
//! sparse triplet dumps.
//!
//! Model file:
//!
//! ```toml
//! format_version = 1
//! absorbing = false
//! self = 0.1                      # or a table: self = [{ state = [0, 0], prob = 0.1 }, ...]
//!
//! [shape]
//! q = 2
//! dims = [2, 2]
//! l1 = 2
//! l2 = 2
//!
//! [[edges]]
//! from = [0, 0]
//! to = [1, 0]
//! prob = 0.05
//! ```
//!
//! Parameter file: the same `format_version` and `[shape]`, then one
//! `[[alpha]]` entry `{ state, value }` per grid state and one `[[gamma]]`
//! entry `{ direction, offset, step, value }` per edge class (directions
//! numbered from 1).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::IntMatrix;
use crate::error::{GbdpError, Result};
use crate::lattice::{Grid, GridShape, State};
use crate::model::{SelfTransition, TransitionModel};
use crate::param::{edge_classes, EdgeClass, Parametrization};
use crate::simulate::KStepCounts;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub q: usize,
    pub dims: Vec<usize>,
    pub l1: usize,
    pub l2: usize,
}

impl ShapeSpec {
    pub fn from_shape(s: &GridShape) -> Self {
        ShapeSpec {
            q: s.q(),
            dims: s.dims().to_vec(),
            l1: s.l1(),
            l2: s.l2(),
        }
    }

    pub fn to_shape(&self) -> Result<GridShape> {
        if self.q != self.dims.len() {
            return Err(GbdpError::Parse(format!(
                "shape.q = {} but shape.dims has {} entries",
                self.q,
                self.dims.len()
            )));
        }
        GridShape::new(self.dims.clone(), self.l1, self.l2)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfEntry {
    pub state: State,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SelfSpec {
    Scalar(f64),
    Table(Vec<SelfEntry>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: State,
    pub to: State,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(default)]
    pub absorbing: bool,
    #[serde(rename = "self", default, skip_serializing_if = "Option::is_none")]
    pub self_transition: Option<SelfSpec>,
    pub shape: ShapeSpec,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaEntry {
    pub state: State,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaEntry {
    /// 1-based.
    pub direction: usize,
    pub offset: usize,
    pub step: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub format_version: u32,
    pub shape: ShapeSpec,
    pub alpha: Vec<AlphaEntry>,
    pub gamma: Vec<GammaEntry>,
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(GbdpError::Parse(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GbdpError::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| GbdpError::Parse(format!("{}: {e}", path.display())))
}

pub fn parse_model(text: &str) -> Result<TransitionModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| GbdpError::Parse(e.to_string()))?;
    check_version(file.format_version)?;
    let shape = file.shape.to_shape()?;
    let mut model = TransitionModel::new(shape);
    let mut seen = BTreeSet::new();
    for e in &file.edges {
        if !seen.insert((e.from.clone(), e.to.clone())) {
            return Err(GbdpError::Parse(format!("duplicate edge {} -> {}", e.from, e.to)));
        }
        model.insert(&e.from, &e.to, e.prob);
    }
    let self_transition = match file.self_transition {
        None => SelfTransition::None,
        Some(SelfSpec::Scalar(a)) => SelfTransition::Scalar(a),
        Some(SelfSpec::Table(entries)) => {
            let grid = model.grid();
            let mut d = vec![0.0; grid.len()];
            let mut given = vec![false; grid.len()];
            for e in entries {
                let u = grid
                    .index_of(&e.state)
                    .ok_or_else(|| GbdpError::Parse(format!("self entry for {} outside the grid", e.state)))?;
                if given[u] {
                    return Err(GbdpError::Parse(format!("duplicate self entry for {}", e.state)));
                }
                given[u] = true;
                d[u] = e.prob;
            }
            SelfTransition::PerState(d)
        }
    };
    model.set_self(self_transition);
    model.set_absorbing(file.absorbing);
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<TransitionModel> {
    parse_model(&read(path)?)
}

pub fn model_to_toml(model: &TransitionModel) -> String {
    let grid = model.grid();
    let mut edges: Vec<EdgeEntry> = model
        .entries()
        .map(|((u, v), prob)| EdgeEntry {
            from: grid.state(u).clone(),
            to: grid.state(v).clone(),
            prob,
        })
        .collect();
    edges.extend(model.stray_entries().iter().map(|(from, to, prob)| EdgeEntry {
        from: from.clone(),
        to: to.clone(),
        prob: *prob,
    }));
    let self_transition = match model.self_transition() {
        SelfTransition::None => None,
        SelfTransition::Scalar(a) => Some(SelfSpec::Scalar(*a)),
        SelfTransition::PerState(d) => Some(SelfSpec::Table(
            d.iter()
                .enumerate()
                .map(|(u, &prob)| SelfEntry {
                    state: grid.state(u).clone(),
                    prob,
                })
                .collect(),
        )),
    };
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        absorbing: model.absorbing(),
        self_transition,
        shape: ShapeSpec::from_shape(model.shape()),
        edges,
    };
    toml::to_string(&file).expect("model serializes")
}

pub fn save_model(model: &TransitionModel, path: &Path) -> Result<()> {
    write(path, &model_to_toml(model))
}

pub fn parse_params(text: &str) -> Result<Parametrization> {
    let file: ParamsFile = toml::from_str(text).map_err(|e| GbdpError::Parse(e.to_string()))?;
    check_version(file.format_version)?;
    let shape = file.shape.to_shape()?;
    let grid = Grid::new(shape.clone());
    let mut alpha = vec![f64::NAN; grid.len()];
    for a in &file.alpha {
        let u = grid
            .index_of(&a.state)
            .ok_or_else(|| GbdpError::Parse(format!("alpha entry for {} outside the grid", a.state)))?;
        if !alpha[u].is_nan() {
            return Err(GbdpError::Parse(format!("duplicate alpha entry for {}", a.state)));
        }
        alpha[u] = a.value;
    }
    if let Some(u) = alpha.iter().position(|a| a.is_nan()) {
        return Err(GbdpError::Parse(format!("missing alpha entry for {}", grid.state(u))));
    }
    let mut gamma = BTreeMap::new();
    for g in &file.gamma {
        if g.direction == 0 || g.direction > shape.q() {
            return Err(GbdpError::Parse(format!("gamma direction {} outside 1..={}", g.direction, shape.q())));
        }
        let class = EdgeClass {
            axis: g.direction - 1,
            offset: g.offset,
            step: g.step,
        };
        if gamma.insert(class, g.value).is_some() {
            return Err(GbdpError::Parse(format!("duplicate entry for {class}")));
        }
    }
    let expected: BTreeSet<EdgeClass> = edge_classes(&shape)?.into_iter().collect();
    if let Some(extra) = gamma.keys().find(|c| !expected.contains(c)) {
        return Err(GbdpError::Parse(format!("{extra} is not an edge class of {shape}")));
    }
    if let Some(missing) = expected.iter().find(|c| !gamma.contains_key(c)) {
        return Err(GbdpError::Parse(format!("missing entry for {missing}")));
    }
    Parametrization::new(shape, alpha, gamma)
}

pub fn load_params(path: &Path) -> Result<Parametrization> {
    parse_params(&read(path)?)
}

pub fn params_to_toml(p: &Parametrization) -> String {
    let grid = Grid::new(p.shape().clone());
    let file = ParamsFile {
        format_version: FORMAT_VERSION,
        shape: ShapeSpec::from_shape(p.shape()),
        alpha: p
            .alpha()
            .iter()
            .enumerate()
            .map(|(u, &value)| AlphaEntry {
                state: grid.state(u).clone(),
                value,
            })
            .collect(),
        gamma: p
            .gamma()
            .iter()
            .map(|(c, &value)| GammaEntry {
                direction: c.axis + 1,
                offset: c.offset,
                step: c.step,
                value,
            })
            .collect(),
    };
    toml::to_string(&file).expect("parameters serialize")
}

pub fn save_params(p: &Parametrization, path: &Path) -> Result<()> {
    write(path, &params_to_toml(p))
}

/// `(0,1)`, `0,1` or `0 1`.
pub fn parse_state(text: &str) -> Result<State> {
    let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
    let coords = inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| GbdpError::Parse(format!("bad state coordinate '{s}' in '{text}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if coords.is_empty() {
        return Err(GbdpError::Parse(format!("empty state '{text}'")));
    }
    Ok(State::new(coords))
}

fn csv_err(e: impl std::fmt::Display) -> GbdpError {
    GbdpError::Parse(format!("csv: {e}"))
}

/// Header of state labels, one labelled row per state, `{:.16e}` entries.
pub fn matrix_csv(grid: &Grid, m: &DMatrix<f64>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let labels: Vec<String> = grid.states().iter().map(|s| s.to_string()).collect();
    let mut header = vec!["state".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (r, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend((0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])));
        w.write_record(&rec).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

/// Read a table written by [`matrix_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    let n = header.len().saturating_sub(1);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        labels.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            values.push(field.parse::<f64>().map_err(csv_err)?);
        }
    }
    if values.len() != labels.len() * n {
        return Err(GbdpError::Parse("ragged matrix table".into()));
    }
    Ok((labels.clone(), DMatrix::from_row_slice(labels.len(), n, &values)))
}

/// `state,count,frequency` per grid state, then a `sink` row when the model absorbs.
pub fn frequency_csv(grid: &Grid, counts: &KStepCounts, with_sink: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state", "count", "frequency"]).map_err(csv_err)?;
    let freq = counts.frequencies();
    for (u, s) in grid.states().iter().enumerate() {
        w.write_record([s.to_string(), counts.counts[u].to_string(), format!("{:.16e}", freq[u])])
            .map_err(csv_err)?;
    }
    if with_sink {
        w.write_record([
            "sink".to_string(),
            counts.absorbed.to_string(),
            format!("{:.16e}", counts.absorbed_frequency()),
        ])
        .map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

/// `<dir>/<name>.triplets` (`row col value`, 0-based) plus
/// `<name>.rows.txt` / `<name>.cols.txt` legends, one label per line.
pub fn dump_triplets(m: &IntMatrix, dir: &Path, name: &str) -> Result<()> {
    let io = |e: std::io::Error| GbdpError::Parse(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut f = fs::File::create(dir.join(format!("{name}.triplets"))).map_err(io)?;
    writeln!(f, "# {} {}", m.rows(), m.cols()).map_err(io)?;
    for (r, c, v) in m.triplets() {
        writeln!(f, "{r} {c} {v}").map_err(io)?;
    }
    write(&dir.join(format!("{name}.rows.txt")), &(m.row_labels().join("\n") + "\n"))?;
    write(&dir.join(format!("{name}.cols.txt")), &(m.col_labels().join("\n") + "\n"))?;
    Ok(())
}
