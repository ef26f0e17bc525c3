//! Model input formats.
//!
//! Two formats are accepted: a plain-text edge list (vertex count on the
//! first line, then `i j [w]` per line, unit weight when omitted) and a
//! JSON object `{n, edges: [[i, j, w]], x: [...], j: [[i, j, J]]}` where
//! `x` defaults to all ones and `j` turns the input into an imitative
//! model. Blank lines and `#` comments are allowed in the text format.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, ImitativeModel, MdModel};

/// A parsed model: pure, or imitative when couplings were given.
#[derive(Clone, Debug)]
pub enum ModelInput {
    Pure(MdModel),
    Imitative(ImitativeModel),
}

impl ModelInput {
    pub fn base(&self) -> &MdModel {
        match self {
            ModelInput::Pure(m) => m,
            ModelInput::Imitative(im) => im.base(),
        }
    }
}

/// Parses the plain-text edge list format. Monomer activities default to 1.
pub fn model_from_edge_list(text: &str) -> Result<MdModel> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::Parse("empty edge list".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("vertex count: {e}")))?;
    let mut edges = Vec::new();
    let mut w = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::Parse(format!("expected `i j [w]`, got `{line}`")));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("vertex `{}`: {e}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| Error::Parse(format!("vertex `{}`: {e}", fields[1])))?;
        let weight: f64 = match fields.get(2) {
            Some(f) => f
                .parse()
                .map_err(|e| Error::Parse(format!("weight `{f}`: {e}")))?,
            None => 1.0,
        };
        edges.push((i, j));
        w.push(weight);
    }
    let graph = Graph::new(n, edges)?;
    let x = vec![1.0; n];
    MdModel::new(graph, w, x)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonModel {
    n: usize,
    #[serde(default)]
    edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default)]
    j: Option<Vec<(usize, usize, f64)>>,
}

/// Parses the JSON model format.
pub fn model_from_json(text: &str) -> Result<ModelInput> {
    let raw: JsonModel =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))?;
    let mut edges = Vec::with_capacity(raw.edges.len());
    let mut w = Vec::with_capacity(raw.edges.len());
    for &(i, j, weight) in &raw.edges {
        edges.push((i, j));
        w.push(weight);
    }
    let graph = Graph::new(raw.n, edges)?;
    let x = raw.x.unwrap_or_else(|| vec![1.0; raw.n]);
    let model = MdModel::new(graph, w, x)?;
    match raw.j {
        None => Ok(ModelInput::Pure(model)),
        Some(couplings) => {
            let mut j = vec![0.0; model.graph().edges().len()];
            let mut seen = vec![false; j.len()];
            for &(a, b, val) in &couplings {
                let e = (a.min(b), a.max(b));
                let idx = model
                    .graph()
                    .edges()
                    .iter()
                    .position(|&p| p == e)
                    .ok_or_else(|| {
                        Error::Parse(format!("coupling on missing edge ({a}, {b})"))
                    })?;
                if seen[idx] {
                    return Err(Error::Parse(format!("duplicate coupling ({a}, {b})")));
                }
                seen[idx] = true;
                j[idx] = val;
            }
            Ok(ModelInput::Imitative(ImitativeModel::new(model, j)?))
        }
    }
}

/// Auto-detects the format: JSON when the first non-space byte is `{`.
pub fn model_from_str(text: &str) -> Result<ModelInput> {
    if text.trim_start().starts_with('{') {
        model_from_json(text)
    } else {
        model_from_edge_list(text).map(ModelInput::Pure)
    }
}
