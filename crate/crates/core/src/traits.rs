//! Long-format trait table and the node × trait matrix built from it.
//!
//! CSV header: `node_id,trait,kind,state,value,lower,upper`. Continuous rows
//! leave `state` empty; discrete rows give one state probability per row and
//! leave the bounds empty. States missing for a node count as probability 0.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodeId, PhyloTree};

pub const CSV_HEADER: [&str; 7] = ["node_id", "trait", "kind", "state", "value", "lower", "upper"];

/// Tolerance on the sum of a node's state probabilities.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraitKind {
    Continuous,
    Discrete,
}

impl fmt::Display for TraitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraitKind::Continuous => "continuous",
            TraitKind::Discrete => "discrete",
        })
    }
}

/// Whether leaf/internal position dictates known vs uncertain values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraitRow {
    pub node_id: String,
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub kind: TraitKind,
    pub state: Option<String>,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl TraitRow {
    pub fn continuous(node: &str, trait_name: &str, value: f64, bounds: Option<(f64, f64)>) -> Self {
        Self {
            node_id: node.into(),
            trait_name: trait_name.into(),
            kind: TraitKind::Continuous,
            state: None,
            value,
            lower: bounds.map(|b| b.0),
            upper: bounds.map(|b| b.1),
        }
    }

    pub fn discrete(node: &str, trait_name: &str, state: &str, probability: f64) -> Self {
        Self {
            node_id: node.into(),
            trait_name: trait_name.into(),
            kind: TraitKind::Discrete,
            state: Some(state.into()),
            value: probability,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraitError {
    #[error("traits.csv line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("traits.csv header must be `{}`, found `{found}`", CSV_HEADER.join(","))]
    Header { found: String },
    #[error("trait row refers to unknown node '{node}'")]
    UnknownNode { node: String },
    #[error("node '{node}' has no value for trait '{trait_name}'")]
    MissingTrait { node: String, trait_name: String },
    #[error("state probabilities of '{trait_name}' at node '{node}' sum to {sum}")]
    ProbabilitySum { node: String, trait_name: String, sum: f64 },
    #[error("trait '{trait_name}' at node '{node}': {message}")]
    Strictness { node: String, trait_name: String, message: String },
    #[error("trait '{trait_name}' at node '{node}': {message}")]
    InvalidRow { node: String, trait_name: String, message: String },
    #[error("trait '{trait_name}' is declared both continuous and discrete")]
    KindConflict { trait_name: String },
    #[error("duplicate row for trait '{trait_name}' at node '{node}'")]
    DuplicateRow { node: String, trait_name: String, state: Option<String> },
    #[error("unknown trait '{0}'")]
    UnknownTrait(String),
}

/// Parses `traits.csv` content.
pub fn read_trait_csv(text: &str) -> Result<Vec<TraitRow>, TraitError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| TraitError::Csv { line: 1, message: e.to_string() })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(TraitError::Header { found: header.iter().collect::<Vec<_>>().join(",") });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TraitError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| TraitError::Csv { line, message };
        let field = |i: usize| rec.get(i).unwrap_or("");
        let number = |i: usize, name: &str| -> Result<Option<f64>, TraitError> {
            let s = field(i);
            if s.is_empty() {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(bad(format!("{name} '{s}' is not a finite number"))),
            }
        };
        let kind = match field(2) {
            "continuous" => TraitKind::Continuous,
            "discrete" => TraitKind::Discrete,
            other => return Err(bad(format!("kind must be 'continuous' or 'discrete', found '{other}'"))),
        };
        if field(0).is_empty() || field(1).is_empty() {
            return Err(bad("node_id and trait must be non-empty".into()));
        }
        rows.push(TraitRow {
            node_id: field(0).to_string(),
            trait_name: field(1).to_string(),
            kind,
            state: Some(field(3)).filter(|s| !s.is_empty()).map(str::to_string),
            value: number(4, "value")?.ok_or_else(|| bad("value is empty".into()))?,
            lower: number(5, "lower")?,
            upper: number(6, "upper")?,
        });
    }
    Ok(rows)
}

/// Renders rows as `traits.csv` content with shortest round-trip floats.
pub fn write_trait_csv(rows: &[TraitRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.node_id.as_str(),
            r.trait_name.as_str(),
            &r.kind.to_string(),
            r.state.as_deref().unwrap_or(""),
            &r.value.to_string(),
            &opt(r.lower),
            &opt(r.upper),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraitDef {
    pub name: String,
    pub kind: TraitKind,
    /// Declared state order (first appearance in the table); empty for continuous traits.
    pub states: Vec<String>,
}

/// A point estimate with its interval. Known values have `lower == value == upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn known(value: f64) -> Self {
        Self { value, lower: value, upper: value }
    }

    pub fn with_bounds(value: f64, lower: f64, upper: f64) -> Self {
        Self { value, lower, upper }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.value && self.upper == self.value
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraitColumn {
    /// One estimate per node, indexed by [`NodeId`].
    Continuous(Vec<Estimate>),
    /// One probability vector (declared state order) per node.
    Discrete(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraitMatrix {
    defs: Vec<TraitDef>,
    columns: Vec<TraitColumn>,
}

impl TraitMatrix {
    pub(crate) fn from_parts(defs: Vec<TraitDef>, columns: Vec<TraitColumn>) -> Self {
        debug_assert_eq!(defs.len(), columns.len());
        Self { defs, columns }
    }

    pub fn defs(&self) -> &[TraitDef] {
        &self.defs
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, TraitError> {
        self.index_of(name).ok_or_else(|| TraitError::UnknownTrait(name.to_string()))
    }

    pub fn def(&self, idx: usize) -> &TraitDef {
        &self.defs[idx]
    }

    pub fn column(&self, idx: usize) -> &TraitColumn {
        &self.columns[idx]
    }

    pub fn continuous(&self, idx: usize) -> Option<&[Estimate]> {
        match &self.columns[idx] {
            TraitColumn::Continuous(c) => Some(c),
            TraitColumn::Discrete(_) => None,
        }
    }

    pub(crate) fn continuous_mut(&mut self, idx: usize) -> Option<&mut Vec<Estimate>> {
        match &mut self.columns[idx] {
            TraitColumn::Continuous(c) => Some(c),
            TraitColumn::Discrete(_) => None,
        }
    }

    pub(crate) fn discrete_mut(&mut self, idx: usize) -> Option<&mut Vec<Vec<f64>>> {
        match &mut self.columns[idx] {
            TraitColumn::Discrete(c) => Some(c),
            TraitColumn::Continuous(_) => None,
        }
    }

    pub fn discrete(&self, idx: usize) -> Option<&[Vec<f64>]> {
        match &self.columns[idx] {
            TraitColumn::Discrete(c) => Some(c),
            TraitColumn::Continuous(_) => None,
        }
    }

    /// Indices of continuous traits in declaration order.
    pub fn continuous_indices(&self) -> Vec<usize> {
        (0..self.defs.len()).filter(|&i| self.defs[i].kind == TraitKind::Continuous).collect()
    }

    /// Most probable state of a node (first one on ties).
    pub fn modal_state(&self, idx: usize, node: NodeId) -> Option<usize> {
        let probs = &self.discrete(idx)?[node.0];
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Some(best)
    }

    /// Rows that reload into this matrix. Known discrete leaves emit their
    /// single state; every other discrete node lists all states.
    pub fn to_rows(&self, tree: &PhyloTree) -> Vec<TraitRow> {
        let mut rows = Vec::with_capacity(tree.len() * self.defs.len());
        for v in tree.ids() {
            let node = tree.label(v);
            for (def, col) in self.defs.iter().zip(&self.columns) {
                match col {
                    TraitColumn::Continuous(c) => {
                        let e = c[v.0];
                        let bounds = (!(tree.is_leaf(v) && e.is_point())).then_some((e.lower, e.upper));
                        rows.push(TraitRow::continuous(node, &def.name, e.value, bounds));
                    }
                    TraitColumn::Discrete(c) => {
                        let probs = &c[v.0];
                        let one_hot = probs.iter().position(|&p| p == 1.0);
                        match one_hot {
                            Some(s) if tree.is_leaf(v) && probs.iter().filter(|&&p| p != 0.0).count() == 1 => {
                                rows.push(TraitRow::discrete(node, &def.name, &def.states[s], 1.0));
                            }
                            _ => {
                                for (s, &p) in def.states.iter().zip(probs) {
                                    rows.push(TraitRow::discrete(node, &def.name, s, p));
                                }
                            }
                        }
                    }
                }
            }
        }
        rows
    }
}

/// Builds the trait matrix, failing on the first problem found.
pub fn load_traits(rows: &[TraitRow], tree: &PhyloTree, strictness: Strictness) -> Result<TraitMatrix, TraitError> {
    let (matrix, issues) = check_traits(rows, tree, strictness);
    match issues.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(matrix),
    }
}

/// Builds the trait matrix and reports every problem found. The matrix is
/// only meaningful when the issue list is empty.
pub fn check_traits(rows: &[TraitRow], tree: &PhyloTree, strictness: Strictness) -> (TraitMatrix, Vec<TraitError>) {
    let mut issues = Vec::new();
    let mut defs: Vec<TraitDef> = Vec::new();
    let mut def_index: HashMap<&str, usize> = HashMap::new();
    let mut unknown_nodes: HashSet<&str> = HashSet::new();
    let mut conflicted: HashSet<&str> = HashSet::new();

    // Declare traits and states in first-appearance order.
    for r in rows {
        match def_index.get(r.trait_name.as_str()) {
            Some(&i) if defs[i].kind != r.kind => {
                if conflicted.insert(&r.trait_name) {
                    issues.push(TraitError::KindConflict { trait_name: r.trait_name.clone() });
                }
            }
            Some(&i) => {
                if let Some(s) = &r.state {
                    if r.kind == TraitKind::Discrete && !defs[i].states.contains(s) {
                        defs[i].states.push(s.clone());
                    }
                }
            }
            None => {
                def_index.insert(&r.trait_name, defs.len());
                defs.push(TraitDef {
                    name: r.trait_name.clone(),
                    kind: r.kind,
                    states: r.state.iter().filter(|_| r.kind == TraitKind::Discrete).cloned().collect(),
                });
            }
        }
    }

    let n = tree.len();
    let mut continuous: Vec<Vec<Option<Estimate>>> = Vec::with_capacity(defs.len());
    let mut discrete: Vec<Vec<Option<Vec<f64>>>> = Vec::with_capacity(defs.len());
    for d in &defs {
        match d.kind {
            TraitKind::Continuous => {
                continuous.push(vec![None; n]);
                discrete.push(Vec::new());
            }
            TraitKind::Discrete => {
                continuous.push(Vec::new());
                discrete.push(vec![None; n]);
            }
        }
    }

    for r in rows {
        let Some(node) = tree.id_of(&r.node_id) else {
            if unknown_nodes.insert(&r.node_id) {
                issues.push(TraitError::UnknownNode { node: r.node_id.clone() });
            }
            continue;
        };
        let t = def_index[r.trait_name.as_str()];
        if defs[t].kind != r.kind {
            continue;
        }
        let invalid = |message: &str| TraitError::InvalidRow {
            node: r.node_id.clone(),
            trait_name: r.trait_name.clone(),
            message: message.to_string(),
        };
        if !r.value.is_finite() {
            issues.push(invalid("value is not finite"));
            continue;
        }
        let leaf = tree.is_leaf(node);
        match r.kind {
            TraitKind::Continuous => {
                if r.state.is_some() {
                    issues.push(invalid("continuous rows must leave `state` empty"));
                    continue;
                }
                let est = match (r.lower, r.upper) {
                    (Some(lo), Some(hi)) => {
                        if !(lo <= r.value && r.value <= hi) {
                            issues.push(invalid(&format!("bounds [{lo}, {hi}] do not contain estimate {}", r.value)));
                            continue;
                        }
                        if leaf && strictness == Strictness::Strict {
                            issues.push(TraitError::Strictness {
                                node: r.node_id.clone(),
                                trait_name: r.trait_name.clone(),
                                message: "leaf values are measured and must not carry bounds".into(),
                            });
                            continue;
                        }
                        Estimate::with_bounds(r.value, lo, hi)
                    }
                    (None, None) => {
                        if !leaf && strictness == Strictness::Strict {
                            issues.push(TraitError::Strictness {
                                node: r.node_id.clone(),
                                trait_name: r.trait_name.clone(),
                                message: "internal estimates require lower and upper bounds".into(),
                            });
                            continue;
                        }
                        Estimate::known(r.value)
                    }
                    _ => {
                        issues.push(invalid("lower and upper must be given together"));
                        continue;
                    }
                };
                let cell = &mut continuous[t][node.0];
                if cell.is_some() {
                    issues.push(TraitError::DuplicateRow {
                        node: r.node_id.clone(),
                        trait_name: r.trait_name.clone(),
                        state: None,
                    });
                } else {
                    *cell = Some(est);
                }
            }
            TraitKind::Discrete => {
                let Some(state) = &r.state else {
                    issues.push(invalid("discrete rows require a state"));
                    continue;
                };
                if r.lower.is_some() || r.upper.is_some() {
                    issues.push(invalid("discrete rows must leave bounds empty"));
                    continue;
                }
                if !(0.0..=1.0).contains(&r.value) {
                    issues.push(invalid(&format!("probability {} outside [0, 1]", r.value)));
                    continue;
                }
                let s = defs[t].states.iter().position(|x| x == state).expect("declared above");
                let nstates = defs[t].states.len();
                let cell = discrete[t][node.0].get_or_insert_with(|| vec![f64::NAN; nstates]);
                if cell[s].is_nan() {
                    cell[s] = r.value;
                } else {
                    issues.push(TraitError::DuplicateRow {
                        node: r.node_id.clone(),
                        trait_name: r.trait_name.clone(),
                        state: Some(state.clone()),
                    });
                }
            }
        }
    }

    // A rejected row already explains why its cell is empty.
    let rejected: HashSet<(String, String)> = issues
        .iter()
        .filter_map(|e| match e {
            TraitError::InvalidRow { node, trait_name, .. } | TraitError::Strictness { node, trait_name, .. } => {
                Some((node.clone(), trait_name.clone()))
            }
            _ => None,
        })
        .collect();
    let mut columns = Vec::with_capacity(defs.len());
    for (t, d) in defs.iter().enumerate() {
        if conflicted.contains(d.name.as_str()) {
            columns.push(match d.kind {
                TraitKind::Continuous => TraitColumn::Continuous(vec![Estimate::known(0.0); n]),
                TraitKind::Discrete => TraitColumn::Discrete(vec![vec![0.0; d.states.len()]; n]),
            });
            continue;
        }
        let missing = |v: NodeId| {
            let key = (tree.label(v).to_string(), d.name.clone());
            (!rejected.contains(&key)).then_some(TraitError::MissingTrait { node: key.0, trait_name: key.1 })
        };
        match d.kind {
            TraitKind::Continuous => {
                let mut col = Vec::with_capacity(n);
                for v in tree.ids() {
                    col.push(continuous[t][v.0].unwrap_or_else(|| {
                        issues.extend(missing(v));
                        Estimate::known(0.0)
                    }));
                }
                columns.push(TraitColumn::Continuous(col));
            }
            TraitKind::Discrete => {
                let mut col = Vec::with_capacity(n);
                for v in tree.ids() {
                    let Some(mut probs) = discrete[t][v.0].take() else {
                        issues.extend(missing(v));
                        col.push(vec![0.0; d.states.len()]);
                        continue;
                    };
                    probs.resize(d.states.len(), f64::NAN);
                    for p in probs.iter_mut().filter(|p| p.is_nan()) {
                        *p = 0.0;
                    }
                    let sum: f64 = probs.iter().sum();
                    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                        issues.push(TraitError::ProbabilitySum {
                            node: tree.label(v).to_string(),
                            trait_name: d.name.clone(),
                            sum,
                        });
                    } else if tree.is_leaf(v)
                        && strictness == Strictness::Strict
                        && !probs.iter().any(|&p| p >= 1.0 - PROBABILITY_SUM_TOLERANCE)
                    {
                        issues.push(TraitError::Strictness {
                            node: tree.label(v).to_string(),
                            trait_name: d.name.clone(),
                            message: "leaf states are observed and must have one state with probability 1".into(),
                        });
                    }
                    col.push(probs);
                }
                columns.push(TraitColumn::Discrete(col));
            }
        }
    }
    (TraitMatrix { defs, columns }, issues)
}
