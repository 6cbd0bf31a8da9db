//! Elements, labeled clusterings and weights.
//!
//! Element identity is the triple `(kind, epoch, external_id)`. Current and
//! historical items never collide, and historical items from different epochs
//! stay distinct even when their external ids agree. Ids without history are
//! represented as [`ElementKind::SyntheticId`] elements keyed by the cluster id.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Per-category cap on reported validation violations.
pub const MAX_VIOLATIONS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    CurrentItem,
    HistoricalItem,
    SyntheticId,
}

impl ElementKind {
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::CurrentItem => "CurrentItem",
            ElementKind::HistoricalItem => "HistoricalItem",
            ElementKind::SyntheticId => "SyntheticId",
        }
    }
}

/// One member of the expanded evaluation universe.
///
/// The text encoding (`cur:<item>`, `hist:<epoch>:<item>`, `id:<cluster>`) is
/// used by every element-level file format.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementRef {
    kind: ElementKind,
    epoch: Arc<str>,
    external_id: Arc<str>,
}

impl ElementRef {
    pub fn current(item: impl AsRef<str>) -> Self {
        Self {
            kind: ElementKind::CurrentItem,
            epoch: Arc::from(""),
            external_id: Arc::from(item.as_ref()),
        }
    }

    pub fn historical(epoch: impl AsRef<str>, item: impl AsRef<str>) -> Self {
        Self {
            kind: ElementKind::HistoricalItem,
            epoch: Arc::from(epoch.as_ref()),
            external_id: Arc::from(item.as_ref()),
        }
    }

    pub fn synthetic(id: &ClusterId) -> Self {
        Self {
            kind: ElementKind::SyntheticId,
            epoch: Arc::from(""),
            external_id: id.0.clone(),
        }
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn epoch(&self) -> &str {
        &self.epoch
    }

    pub fn external_id(&self) -> &str {
        &self.external_id
    }

    pub fn is_synthetic(&self) -> bool {
        self.kind == ElementKind::SyntheticId
    }

    /// For a synthetic element, the cluster id it stands for.
    pub fn as_cluster_id(&self) -> Option<ClusterId> {
        self.is_synthetic().then(|| ClusterId(self.external_id.clone()))
    }

    pub(crate) fn expect_kind(&self, expected: ElementKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::WrongElementKind {
                element: self.clone(),
                expected: expected.name(),
                found: self.kind.name(),
            })
        }
    }
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ElementKind::CurrentItem => write!(f, "cur:{}", self.external_id),
            ElementKind::HistoricalItem => write!(f, "hist:{}:{}", self.epoch, self.external_id),
            ElementKind::SyntheticId => write!(f, "id:{}", self.external_id),
        }
    }
}

impl fmt::Debug for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseElementError(pub String);

impl fmt::Display for ParseElementError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "`{}` is not an element (expected cur:<item>, hist:<epoch>:<item> or id:<cluster>)",
            self.0
        )
    }
}

impl std::error::Error for ParseElementError {}

impl FromStr for ElementRef {
    type Err = ParseElementError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || ParseElementError(s.to_string());
        if let Some(item) = s.strip_prefix("cur:") {
            if item.is_empty() {
                return Err(bad());
            }
            Ok(ElementRef::current(item))
        } else if let Some(rest) = s.strip_prefix("hist:") {
            let (epoch, item) = rest.split_once(':').ok_or_else(bad)?;
            if item.is_empty() {
                return Err(bad());
            }
            Ok(ElementRef::historical(epoch, item))
        } else if let Some(id) = s.strip_prefix("id:") {
            if id.is_empty() {
                return Err(bad());
            }
            Ok(ElementRef::synthetic(&ClusterId::new(id)))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for ElementRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque cluster id. Compared byte-for-byte; no case or whitespace folding.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterId(Arc<str>);

impl ClusterId {
    pub fn new(id: impl AsRef<str>) -> Self {
        ClusterId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for ClusterId {
    fn from(s: &str) -> Self {
        ClusterId::new(s)
    }
}

impl From<String> for ClusterId {
    fn from(s: String) -> Self {
        ClusterId(Arc::from(s))
    }
}

impl Serialize for ClusterId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ClusterId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer).map(ClusterId::from)
    }
}

#[derive(Clone, Debug)]
pub struct Cluster {
    pub id: ClusterId,
    pub members: Vec<ElementRef>,
}

impl Cluster {
    pub fn new(id: impl Into<ClusterId>, members: Vec<ElementRef>) -> Self {
        Self {
            id: id.into(),
            members,
        }
    }
}

/// Clusters keyed by id, tagged with an epoch label.
///
/// Construction does not validate; call [`LabeledClustering::validate`] or
/// [`LabeledClustering::ensure_valid`]. Operations that need a partition
/// check validity themselves.
#[derive(Clone, Debug)]
pub struct LabeledClustering {
    epoch: String,
    clusters: Vec<Cluster>,
    lookup: HashMap<ClusterId, usize>,
}

impl LabeledClustering {
    pub fn new(epoch: impl Into<String>, clusters: Vec<Cluster>) -> Self {
        let mut lookup = HashMap::with_capacity(clusters.len());
        for (pos, c) in clusters.iter().enumerate() {
            lookup.entry(c.id.clone()).or_insert(pos);
        }
        Self {
            epoch: epoch.into(),
            clusters,
            lookup,
        }
    }

    pub fn empty(epoch: impl Into<String>) -> Self {
        Self::new(epoch, Vec::new())
    }

    /// Groups `(element, cluster id)` assignments; clusters come out sorted by
    /// id, members in input order.
    pub fn from_assignments<I>(epoch: impl Into<String>, assignments: I) -> Self
    where
        I: IntoIterator<Item = (ElementRef, ClusterId)>,
    {
        let mut grouped: BTreeMap<ClusterId, Vec<ElementRef>> = BTreeMap::new();
        for (e, id) in assignments {
            grouped.entry(id).or_default().push(e);
        }
        Self::new(
            epoch,
            grouped
                .into_iter()
                .map(|(id, members)| Cluster { id, members })
                .collect(),
        )
    }

    pub fn epoch(&self) -> &str {
        &self.epoch
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: &ClusterId) -> Option<&Cluster> {
        self.lookup.get(id).map(|&pos| &self.clusters[pos])
    }

    /// `Cluster_X(id)`: the members, or an empty slice when `id` is unused.
    pub fn members(&self, id: &ClusterId) -> &[ElementRef] {
        self.cluster(id).map(|c| c.members.as_slice()).unwrap_or(&[])
    }

    pub fn ids(&self) -> impl Iterator<Item = &ClusterId> + '_ {
        self.clusters.iter().map(|c| &c.id)
    }

    pub fn id_set(&self) -> BTreeSet<ClusterId> {
        self.ids().cloned().collect()
    }

    pub fn elements(&self) -> impl Iterator<Item = &ElementRef> + '_ {
        self.clusters.iter().flat_map(|c| c.members.iter())
    }

    pub fn element_set(&self) -> HashSet<ElementRef> {
        self.elements().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    pub fn with_epoch(mut self, epoch: impl Into<String>) -> Self {
        self.epoch = epoch.into();
        self
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen_ids: HashSet<&ClusterId> = HashSet::with_capacity(self.clusters.len());
        let mut owner: HashMap<&ElementRef, &ClusterId> = HashMap::new();
        for c in &self.clusters {
            if !seen_ids.insert(&c.id) {
                report.push_duplicate_id(c.id.clone());
            }
            if c.members.is_empty() {
                report.push_empty(c.id.clone());
            }
            for e in &c.members {
                if let Some(first) = owner.insert(e, &c.id) {
                    report.push_duplicate_element(e.clone(), first.clone(), c.id.clone());
                }
            }
        }
        report
    }

    pub fn ensure_valid(&self, name: &str) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidClustering {
                name: name.to_string(),
                report,
            })
        }
    }

    pub(crate) fn ensure_kind(&self, expected: ElementKind) -> Result<()> {
        self.elements().try_for_each(|e| e.expect_kind(expected))
    }

    /// Keeps the members accepted by `keep`; clusters left empty are dropped
    /// together with their ids.
    pub fn restrict(&self, mut keep: impl FnMut(&ElementRef) -> bool) -> LabeledClustering {
        let clusters = self
            .clusters
            .iter()
            .filter_map(|c| {
                let members: Vec<_> = c.members.iter().filter(|e| keep(e)).cloned().collect();
                (!members.is_empty()).then(|| Cluster {
                    id: c.id.clone(),
                    members,
                })
            })
            .collect();
        LabeledClustering::new(self.epoch.clone(), clusters)
    }

    /// The partition with ids forgotten, in canonical order.
    pub fn partition(&self) -> Vec<Vec<ElementRef>> {
        let mut blocks: Vec<Vec<ElementRef>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut m = c.members.clone();
                m.sort();
                m
            })
            .collect();
        blocks.sort();
        blocks
    }

    /// The id → member-set mapping in canonical order.
    pub fn canonical(&self) -> BTreeMap<ClusterId, BTreeSet<ElementRef>> {
        self.clusters
            .iter()
            .map(|c| (c.id.clone(), c.members.iter().cloned().collect()))
            .collect()
    }
}

/// Equality is semantic: same epoch label and same id → member-set mapping.
impl PartialEq for LabeledClustering {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch && self.canonical() == other.canonical()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub empty_clusters: Vec<ClusterId>,
    pub duplicate_cluster_ids: Vec<ClusterId>,
    /// (element, first cluster, repeated cluster)
    pub duplicate_elements: Vec<(ElementRef, ClusterId, ClusterId)>,
    /// Violations beyond the per-category cap, counted but not listed.
    pub truncated: usize,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.empty_clusters.is_empty()
            && self.duplicate_cluster_ids.is_empty()
            && self.duplicate_elements.is_empty()
            && self.truncated == 0
    }

    pub fn violation_count(&self) -> usize {
        self.empty_clusters.len()
            + self.duplicate_cluster_ids.len()
            + self.duplicate_elements.len()
            + self.truncated
    }

    fn push_empty(&mut self, id: ClusterId) {
        if self.empty_clusters.len() < MAX_VIOLATIONS {
            self.empty_clusters.push(id);
        } else {
            self.truncated += 1;
        }
    }

    fn push_duplicate_id(&mut self, id: ClusterId) {
        if self.duplicate_cluster_ids.len() < MAX_VIOLATIONS {
            self.duplicate_cluster_ids.push(id);
        } else {
            self.truncated += 1;
        }
    }

    fn push_duplicate_element(&mut self, e: ElementRef, first: ClusterId, again: ClusterId) {
        if self.duplicate_elements.len() < MAX_VIOLATIONS {
            self.duplicate_elements.push((e, first, again));
        } else {
            self.truncated += 1;
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("no violations");
        }
        let mut parts = Vec::new();
        if let Some(id) = self.empty_clusters.first() {
            parts.push(format!(
                "{} empty cluster(s), first {id}",
                self.empty_clusters.len()
            ));
        }
        if let Some(id) = self.duplicate_cluster_ids.first() {
            parts.push(format!(
                "{} duplicate cluster id(s), first {id}",
                self.duplicate_cluster_ids.len()
            ));
        }
        if let Some((e, a, b)) = self.duplicate_elements.first() {
            parts.push(format!(
                "{} element(s) in more than one cluster, first {e} in {a} and {b}",
                self.duplicate_elements.len()
            ));
        }
        if self.truncated > 0 {
            parts.push(format!("{} more not listed", self.truncated));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Positive finite importance weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightMap {
    weights: HashMap<ElementRef, f64>,
}

impl WeightMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            weights: HashMap::with_capacity(n),
        }
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ElementRef, f64)>,
    {
        let mut w = WeightMap::new();
        for (e, v) in pairs {
            w.insert(e, v)?;
        }
        Ok(w)
    }

    /// Sets the weight of `e`, replacing any previous value.
    pub fn insert(&mut self, e: ElementRef, weight: f64) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight { element: e, weight });
        }
        self.weights.insert(e, weight);
        Ok(())
    }

    pub fn get(&self, e: &ElementRef) -> Option<f64> {
        self.weights.get(e).copied()
    }

    pub fn require(&self, e: &ElementRef) -> Result<f64> {
        self.get(e).ok_or_else(|| Error::MissingWeight(e.clone()))
    }

    pub fn contains(&self, e: &ElementRef) -> bool {
        self.weights.contains_key(e)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementRef, f64)> + '_ {
        self.weights.iter().map(|(e, &w)| (e, w))
    }

    /// Entries sorted by element, for deterministic output.
    pub fn sorted(&self) -> Vec<(ElementRef, f64)> {
        let mut v: Vec<_> = self.iter().map(|(e, w)| (e.clone(), w)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Sum of member weights; fails on the first unweighted member.
    pub fn total<'a, I>(&self, elements: I) -> Result<f64>
    where
        I: IntoIterator<Item = &'a ElementRef>,
    {
        let mut s = CompensatedSum::new();
        for e in elements {
            s.add(self.require(e)?);
        }
        Ok(s.value())
    }

    /// Element-wise max of two maps over the union of their keys.
    pub fn merge_max(&self, other: &WeightMap) -> WeightMap {
        let mut out = self.clone();
        for (e, w) in other.iter() {
            let slot = out.weights.entry(e.clone()).or_insert(w);
            if w > *slot {
                *slot = w;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Result<WeightMap> {
        let mut out = WeightMap::with_capacity(self.len());
        for (e, w) in self.iter() {
            out.insert(e.clone(), w * factor)?;
        }
        Ok(out)
    }

    pub fn restrict(&self, mut keep: impl FnMut(&ElementRef) -> bool) -> WeightMap {
        WeightMap {
            weights: self
                .weights
                .iter()
                .filter(|(e, _)| keep(e))
                .map(|(e, &w)| (e.clone(), w))
                .collect(),
        }
    }
}

/// A labeled clustering together with the weights of its elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub clustering: LabeledClustering,
    pub weights: WeightMap,
}

impl Snapshot {
    pub fn new(clustering: LabeledClustering, weights: WeightMap) -> Self {
        Self {
            clustering,
            weights,
        }
    }

    pub fn empty(epoch: impl Into<String>) -> Self {
        Self::new(LabeledClustering::empty(epoch), WeightMap::new())
    }
}
