//! Attributed complete directed graphs built from snapshots, and input scaling.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::Snapshot;
use crate::error::{Error, Result};

/// Which quantities attribute nodes and edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Desired-link gain on nodes, interfering distances on edges.
    #[serde(rename = "hD")]
    HD,
    /// Distances on nodes and edges.
    #[serde(rename = "dD")]
    DD,
    /// Full channel gain matrix.
    #[serde(rename = "hH")]
    HH,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::HD, Variant::DD, Variant::HH];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::HD => "hD",
            Variant::DD => "dD",
            Variant::HH => "hH",
        }
    }

    /// Whether inference needs interfering-link gains.
    pub fn needs_full_csi(self) -> bool {
        matches!(self, Variant::HH)
    }

    fn node_kind(self) -> FeatureKind {
        match self {
            Variant::HD | Variant::HH => FeatureKind::Gain,
            Variant::DD => FeatureKind::Distance,
        }
    }

    fn edge_kind(self) -> FeatureKind {
        match self {
            Variant::HD | Variant::DD => FeatureKind::Distance,
            Variant::HH => FeatureKind::Gain,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hD" | "hd" => Ok(Variant::HD),
            "dD" | "dd" => Ok(Variant::DD),
            "hH" | "hh" => Ok(Variant::HH),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FeatureKind {
    Gain,
    Distance,
}

/// Read access to the link state of one deployment.
///
/// `cross_gain` returns `None` when the source does not carry
/// interfering-link channel knowledge.
pub trait LinkState {
    fn n(&self) -> usize;
    fn desired_gain(&self, n: usize) -> f64;
    fn cross_gain(&self, from: usize, to: usize) -> Option<f64>;
    fn distance(&self, from: usize, to: usize) -> f64;
}

impl LinkState for Snapshot {
    fn n(&self) -> usize {
        Snapshot::n(self)
    }
    fn desired_gain(&self, n: usize) -> f64 {
        self.channel[[n, n]]
    }
    fn cross_gain(&self, from: usize, to: usize) -> Option<f64> {
        Some(self.channel[[from, to]])
    }
    fn distance(&self, from: usize, to: usize) -> f64 {
        self.distance[[from, to]]
    }
}

/// What a central manager knows without interfering-link CSI: positions and desired gains.
#[derive(Clone, Debug)]
pub struct DesiredLinkView {
    desired: Vec<f64>,
    distance: Array2<f64>,
}

impl DesiredLinkView {
    pub fn new(snapshot: &Snapshot) -> Self {
        Self {
            desired: snapshot.desired_gains(),
            distance: snapshot.distance.clone(),
        }
    }
}

impl LinkState for DesiredLinkView {
    fn n(&self) -> usize {
        self.desired.len()
    }
    fn desired_gain(&self, n: usize) -> f64 {
        self.desired[n]
    }
    fn cross_gain(&self, _from: usize, _to: usize) -> Option<f64> {
        None
    }
    fn distance(&self, from: usize, to: usize) -> f64 {
        self.distance[[from, to]]
    }
}

/// Counts interfering-gain reads on a wrapped source.
pub struct AuditedLinks<'a, S: LinkState + ?Sized> {
    inner: &'a S,
    cross_reads: Cell<usize>,
}

impl<'a, S: LinkState + ?Sized> AuditedLinks<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        Self {
            inner,
            cross_reads: Cell::new(0),
        }
    }

    pub fn cross_reads(&self) -> usize {
        self.cross_reads.get()
    }
}

impl<S: LinkState + ?Sized> LinkState for AuditedLinks<'_, S> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn desired_gain(&self, n: usize) -> f64 {
        self.inner.desired_gain(n)
    }
    fn cross_gain(&self, from: usize, to: usize) -> Option<f64> {
        self.cross_reads.set(self.cross_reads.get() + 1);
        self.inner.cross_gain(from, to)
    }
    fn distance(&self, from: usize, to: usize) -> f64 {
        self.inner.distance(from, to)
    }
}

/// Node and edge attributes of the complete directed interference graph.
///
/// `edge[[m, n]]` attributes the message from subnetwork `m` into `n`. The
/// diagonal is a NaN sentinel and is never read.
#[derive(Clone, Debug)]
pub struct FeatureGraph {
    pub variant: Variant,
    pub node: Vec<f64>,
    pub edge: Array2<f64>,
    normalized: bool,
}

impl FeatureGraph {
    pub fn n(&self) -> usize {
        self.node.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Relabel nodes: new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> FeatureGraph {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length");
        FeatureGraph {
            variant: self.variant,
            node: perm.iter().map(|&p| self.node[p]).collect(),
            edge: Array2::from_shape_fn((n, n), |(i, j)| self.edge[[perm[i], perm[j]]]),
            normalized: self.normalized,
        }
    }

    fn debug_check_sentinel(&self) {
        debug_assert!(
            (0..self.n()).all(|k| self.edge[[k, k]].is_nan()),
            "edge diagonal sentinel was overwritten"
        );
    }
}

impl PartialEq for FeatureGraph {
    fn eq(&self, other: &Self) -> bool {
        let n = self.n();
        self.variant == other.variant
            && self.normalized == other.normalized
            && self.node == other.node
            && other.edge.dim() == (n, n)
            && (0..n).all(|m| (0..n).all(|k| m == k || self.edge[[m, k]] == other.edge[[m, k]]))
    }
}

/// Raw features of `variant` from any link-state source.
///
/// hD and dD only touch desired gains and distances; hH fails on sources
/// without interfering-link gains.
pub fn build_graph_from<S: LinkState + ?Sized>(source: &S, variant: Variant) -> Result<FeatureGraph> {
    let n = source.n();
    let node = (0..n)
        .map(|k| match variant.node_kind() {
            FeatureKind::Gain => source.desired_gain(k),
            FeatureKind::Distance => source.distance(k, k),
        })
        .collect();
    let mut edge = Array2::from_elem((n, n), f64::NAN);
    for m in 0..n {
        for k in 0..n {
            if m == k {
                continue;
            }
            edge[[m, k]] = match variant.edge_kind() {
                FeatureKind::Distance => source.distance(m, k),
                FeatureKind::Gain => source
                    .cross_gain(m, k)
                    .ok_or_else(|| Error::Missing(format!("interfering-link gains for variant {variant}")))?,
            };
        }
    }
    Ok(FeatureGraph {
        variant,
        node,
        edge,
        normalized: false,
    })
}

pub fn build_graph(snapshot: &Snapshot, variant: Variant) -> FeatureGraph {
    build_graph_from(snapshot, variant).expect("snapshots carry full CSI")
}

/// Affine standardisation `(x - shift) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub shift: f64,
    pub scale: f64,
}

impl Standardizer {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in values {
            count += 1;
            let delta = x - mean;
            mean += delta / count as f64;
            m2 += delta * (x - mean);
        }
        let std = if count > 0 { (m2 / count as f64).sqrt() } else { 0.0 };
        Self {
            shift: mean,
            scale: if std > 1e-12 && std.is_finite() { std } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

/// Input scaling fitted on the training graphs and stored with a model.
///
/// Gains are taken to dB, distances divided by the hall side, then both are
/// standardised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub variant: Variant,
    pub area_side: f64,
    pub node: Standardizer,
    pub edge: Standardizer,
}

impl Normalizer {
    pub fn fit(graphs: &[FeatureGraph], area_side: f64) -> Result<Self> {
        let first = graphs.first().ok_or(Error::EmptyInput("normalizer fit set"))?;
        let variant = first.variant;
        for g in graphs {
            if g.normalized {
                return Err(Error::AlreadyNormalized);
            }
            if g.variant != variant {
                return Err(Error::VariantMismatch {
                    model: variant.to_string(),
                    input: g.variant.to_string(),
                });
            }
        }
        let nk = variant.node_kind();
        let ek = variant.edge_kind();
        let node = Standardizer::fit(
            graphs
                .iter()
                .flat_map(|g| g.node.iter().map(move |&x| pre_transform(nk, x, area_side))),
        );
        let edge = Standardizer::fit(graphs.iter().flat_map(|g| {
            let n = g.n();
            (0..n).flat_map(move |m| {
                (0..n)
                    .filter(move |&k| k != m)
                    .map(move |k| pre_transform(ek, g.edge[[m, k]], area_side))
            })
        }));
        Ok(Self {
            variant,
            area_side,
            node,
            edge,
        })
    }

    pub fn apply(&self, graph: &FeatureGraph) -> Result<FeatureGraph> {
        if graph.normalized {
            return Err(Error::AlreadyNormalized);
        }
        if graph.variant != self.variant {
            return Err(Error::VariantMismatch {
                model: self.variant.to_string(),
                input: graph.variant.to_string(),
            });
        }
        let (nk, ek) = (self.variant.node_kind(), self.variant.edge_kind());
        let node = graph
            .node
            .iter()
            .map(|&x| self.node.apply(pre_transform(nk, x, self.area_side)))
            .collect();
        let n = graph.n();
        let edge = Array2::from_shape_fn((n, n), |(m, k)| {
            if m == k {
                f64::NAN
            } else {
                self.edge.apply(pre_transform(ek, graph.edge[[m, k]], self.area_side))
            }
        });
        let out = FeatureGraph {
            variant: graph.variant,
            node,
            edge,
            normalized: true,
        };
        out.debug_check_sentinel();
        Ok(out)
    }
}

fn pre_transform(kind: FeatureKind, x: f64, area_side: f64) -> f64 {
    match kind {
        FeatureKind::Gain => 10.0 * x.log10(),
        FeatureKind::Distance => x / area_side,
    }
}
