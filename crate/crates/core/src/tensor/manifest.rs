use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "sketchprune-manifest-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
    Bn,
    Pool,
    Add,
    Concat,
}

impl LayerKind {
    /// Kinds that own a weight matrix.
    pub fn is_weighted(self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Fc)
    }
}

/// One node of the model graph.
///
/// A `pool` whose `out_channels` exceeds `in_channels` zero-pads the extra
/// channels (parameter-free residual shortcut).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub out_channels: usize,
    pub in_channels: usize,
    #[serde(default = "one")]
    pub kernel_h: usize,
    #[serde(default = "one")]
    pub kernel_w: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_group: Option<String>,
    #[serde(default)]
    pub prunable: bool,
    /// Conv/fc layers carrying a bias vector.
    #[serde(default, skip_serializing_if = "is_false")]
    pub bias: bool,
    /// Pools that collapse the whole spatial extent.
    #[serde(default, skip_serializing_if = "is_false")]
    pub global: bool,
}

fn one() -> usize {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl LayerSpec {
    pub fn conv(name: &str, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: LayerKind::Conv,
            out_channels,
            in_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride: 1,
            padding: kernel / 2,
            prune_group: None,
            prunable: true,
            bias: false,
            global: false,
        }
    }

    pub fn passthrough(name: &str, kind: LayerKind, channels: usize) -> Self {
        Self {
            name: name.to_string(),
            kind,
            out_channels: channels,
            in_channels: channels,
            kernel_h: 1,
            kernel_w: 1,
            stride: 1,
            padding: 0,
            prune_group: None,
            prunable: false,
            bias: false,
            global: false,
        }
    }

    pub fn fc(name: &str, in_features: usize, out_features: usize) -> Self {
        Self { kind: LayerKind::Fc, prunable: false, bias: true, padding: 0, ..Self::conv(name, in_features, out_features, 1) }
    }

    /// Row count `c_in·h·w` of the layer's filter matrix.
    pub fn filter_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Shape of the weight tensor, if the layer has one.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match self.kind {
            LayerKind::Conv => Some(vec![self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]),
            LayerKind::Fc => Some(vec![self.out_channels, self.in_channels]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub input_spatial: [usize; 2],
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

impl ModelManifest {
    pub fn new(name: &str, input_spatial: [usize; 2], num_classes: usize) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.to_string(),
            name: name.to_string(),
            input_spatial,
            num_classes,
            layers: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_index(&self) -> HashMap<&str, usize> {
        self.layers.iter().enumerate().map(|(i, l)| (l.name.as_str(), i)).collect()
    }

    /// Producer indices of every layer, in edge order.
    pub fn producers(&self) -> Vec<Vec<usize>> {
        let index = self.layer_index();
        let mut out = vec![Vec::new(); self.layers.len()];
        for (a, b) in &self.edges {
            if let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) {
                out[ib].push(ia);
            }
        }
        out
    }

    pub fn consumers(&self) -> Vec<Vec<usize>> {
        let index = self.layer_index();
        let mut out = vec![Vec::new(); self.layers.len()];
        for (a, b) in &self.edges {
            if let (Some(&ia), Some(&ib)) = (index.get(a.as_str()), index.get(b.as_str())) {
                out[ia].push(ib);
            }
        }
        out
    }

    /// Kahn's algorithm; among ready layers the earliest in manifest order
    /// goes first, so the result is deterministic.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let producers = self.producers();
        let consumers = self.consumers();
        let mut indegree: Vec<usize> = producers.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            indegree.iter().enumerate().filter(|(_, &d)| d == 0).map(|(i, _)| Reverse(i)).collect();
        let mut order = Vec::with_capacity(self.layers.len());
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &c in &consumers[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() != self.layers.len() {
            return Err(Error::InvalidManifest("edges contain a cycle".into()));
        }
        Ok(order)
    }

    /// Members of every prune group, in manifest order.
    pub fn prune_groups(&self) -> BTreeMap<String, Vec<usize>> {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, l) in self.layers.iter().enumerate() {
            if let Some(g) = &l.prune_group {
                groups.entry(g.clone()).or_default().push(i);
            }
        }
        groups
    }

    /// Channel count flowing into layer `i` according to its producers, or
    /// `None` for graph inputs.
    pub fn incoming_width(&self, i: usize, producers: &[Vec<usize>], widths: &[usize]) -> Result<Option<usize>> {
        let layer = &self.layers[i];
        let ps = &producers[i];
        if ps.is_empty() {
            return Ok(None);
        }
        if layer.kind == LayerKind::Concat {
            return Ok(Some(ps.iter().map(|&p| widths[p]).sum()));
        }
        let first = widths[ps[0]];
        if let Some(&p) = ps.iter().find(|&&p| widths[p] != first) {
            return Err(Error::InvalidManifest(format!(
                "layer `{}` receives {} channels from `{}` but {} from `{}`",
                layer.name, first, self.layers[ps[0]].name, widths[p], self.layers[p].name
            )));
        }
        Ok(Some(first))
    }

    /// Checks schema, per-layer invariants and the DAG channel invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidManifest(msg));
        if self.schema != MANIFEST_SCHEMA {
            return bad(format!("unsupported schema `{}`, expected `{MANIFEST_SCHEMA}`", self.schema));
        }
        if self.num_classes == 0 || self.input_spatial.contains(&0) {
            return bad("num_classes and input_spatial must be positive".into());
        }
        let mut seen = HashSet::new();
        for l in &self.layers {
            if !seen.insert(l.name.as_str()) {
                return bad(format!("duplicate layer name `{}`", l.name));
            }
            if l.out_channels == 0 || l.in_channels == 0 {
                return bad(format!("layer `{}` has a zero channel count", l.name));
            }
            match l.kind {
                LayerKind::Conv => {
                    if l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0 {
                        return bad(format!("conv `{}` needs positive kernel and stride", l.name));
                    }
                }
                LayerKind::Pool => {
                    if !l.global && (l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0) {
                        return bad(format!("pool `{}` needs positive kernel and stride", l.name));
                    }
                    if l.out_channels < l.in_channels {
                        return bad(format!("pool `{}` cannot drop channels", l.name));
                    }
                }
                LayerKind::Bn | LayerKind::Add | LayerKind::Concat => {
                    if l.out_channels != l.in_channels {
                        return bad(format!("`{}` must preserve its channel count", l.name));
                    }
                }
                LayerKind::Fc => {}
            }
            if l.prunable && l.kind != LayerKind::Conv {
                return bad(format!("only conv layers may be prunable (`{}`)", l.name));
            }
            if let Some(g) = &l.prune_group {
                if g.is_empty() {
                    return bad(format!("layer `{}` names an empty prune group", l.name));
                }
                if l.kind != LayerKind::Conv {
                    return bad(format!("prune group member `{}` is not a conv", l.name));
                }
            }
        }
        for (a, b) in &self.edges {
            if !seen.contains(a.as_str()) {
                return Err(Error::UnknownLayer(a.clone()));
            }
            if !seen.contains(b.as_str()) {
                return Err(Error::UnknownLayer(b.clone()));
            }
            if a == b {
                return bad(format!("self-loop on `{a}`"));
            }
        }
        self.topological_order()?;

        let producers = self.producers();
        let widths: Vec<usize> = self.layers.iter().map(|l| l.out_channels).collect();
        for (i, l) in self.layers.iter().enumerate() {
            let single_input = !matches!(l.kind, LayerKind::Add | LayerKind::Concat);
            if single_input && producers[i].len() > 1 {
                return bad(format!("`{}` has {} producers but takes a single input", l.name, producers[i].len()));
            }
            if let Some(w) = self.incoming_width(i, &producers, &widths)? {
                if w != l.in_channels {
                    return bad(format!("`{}` declares {} input channels but receives {}", l.name, l.in_channels, w));
                }
            }
        }
        for (g, members) in self.prune_groups() {
            let w = self.layers[members[0]].out_channels;
            if members.iter().any(|&m| self.layers[m].out_channels != w) {
                return bad(format!("prune group `{g}` mixes output widths"));
            }
        }
        Ok(())
    }
}
