//! Rewriting id assignments into a membership comparison.
//!
//! For every id used by the history, the baseline or the experiment, the Base
//! clustering gets one cluster holding the id's historical members (or a
//! synthetic element for the id when it has no history) plus the current items
//! the baseline labeled with that id. Exp is built the same way from the
//! experiment's labels. Current and historical items never coincide, so the
//! historical part of a cluster is disjoint from its current part.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Cluster, ClusterId, ElementKind, ElementRef, LabeledClustering, Snapshot, WeightMap,
};
use crate::numeric::compensated_sum;

/// Weight given to each synthetic id element unless configured otherwise.
pub const DEFAULT_K: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    /// Both schemes label one clustering; only ids may differ.
    #[default]
    Separate,
    /// Memberships and ids may both differ.
    Simultaneous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformConfig {
    pub k: f64,
    pub hist_scale_factor: f64,
    pub mode: AssignmentMode,
    pub align_items: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            hist_scale_factor: 1.0,
            mode: AssignmentMode::Separate,
            align_items: false,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be positive, got {}", self.k)));
        }
        if !(self.hist_scale_factor.is_finite() && self.hist_scale_factor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hist_scale_factor must be positive, got {}",
                self.hist_scale_factor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoricalEpoch {
    pub clustering: LabeledClustering,
    pub weights: WeightMap,
    pub epoch_weight: f64,
}

impl HistoricalEpoch {
    pub fn new(clustering: LabeledClustering, weights: WeightMap, epoch_weight: f64) -> Self {
        Self {
            clustering,
            weights,
            epoch_weight,
        }
    }

    pub fn label(&self) -> &str {
        self.clustering.epoch()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IdCensus {
    pub ids_base: BTreeSet<ClusterId>,
    pub ids_exp: BTreeSet<ClusterId>,
    pub ids_hist: BTreeSet<ClusterId>,
    pub all_ids: BTreeSet<ClusterId>,
    pub non_hist_ids: BTreeSet<ClusterId>,
}

impl IdCensus {
    pub fn new(
        ids_base: BTreeSet<ClusterId>,
        ids_exp: BTreeSet<ClusterId>,
        ids_hist: BTreeSet<ClusterId>,
    ) -> Self {
        let all_ids: BTreeSet<ClusterId> = ids_base
            .iter()
            .chain(&ids_exp)
            .chain(&ids_hist)
            .cloned()
            .collect();
        let non_hist_ids = all_ids.difference(&ids_hist).cloned().collect();
        Self {
            ids_base,
            ids_exp,
            ids_hist,
            all_ids,
            non_hist_ids,
        }
    }

    /// True for synthetic elements standing for an id without history.
    pub fn is_fresh_id_element(&self, e: &ElementRef) -> bool {
        e.as_cluster_id()
            .is_some_and(|id| self.non_hist_ids.contains(&id))
    }
}

/// Inputs to the membership comparison over the expanded element universe.
#[derive(Clone, Debug)]
pub struct EvalInputs {
    pub base: LabeledClustering,
    pub exp: LabeledClustering,
    pub weights: WeightMap,
    pub ideal: Option<LabeledClustering>,
    pub census: IdCensus,
    pub k: f64,
}

impl EvalInputs {
    /// Assembles inputs from already materialized clusterings, e.g. files
    /// written by the `transform` command. The census is recovered from the
    /// cluster ids and element kinds.
    pub fn from_materialized(
        base: LabeledClustering,
        exp: LabeledClustering,
        weights: WeightMap,
        k: f64,
    ) -> Result<Self> {
        base.ensure_valid("Base")?;
        exp.ensure_valid("Exp")?;
        let base_elems = base.element_set();
        let exp_elems = exp.element_set();
        if base_elems != exp_elems {
            return Err(Error::UniverseMismatch(describe_difference(
                &base_elems,
                &exp_elems,
                "Base",
                "Exp",
            )));
        }
        for e in &base_elems {
            weights.require(e)?;
        }
        let ids_with_current = |c: &LabeledClustering| -> BTreeSet<ClusterId> {
            c.clusters()
                .iter()
                .filter(|cl| cl.members.iter().any(|e| e.kind() == ElementKind::CurrentItem))
                .map(|cl| cl.id.clone())
                .collect()
        };
        let ids_hist = base
            .clusters()
            .iter()
            .filter(|cl| {
                cl.members
                    .iter()
                    .any(|e| e.kind() == ElementKind::HistoricalItem)
            })
            .map(|cl| cl.id.clone())
            .collect();
        let census = IdCensus::new(ids_with_current(&base), ids_with_current(&exp), ids_hist);
        Ok(Self {
            base,
            exp,
            weights,
            ideal: None,
            census,
            k,
        })
    }

    /// Attaches an ideal clustering. Synthetic id elements it does not
    /// mention become singleton classes; any other gap is an error.
    pub fn with_ideal(mut self, ideal: LabeledClustering) -> Result<Self> {
        self.ideal = Some(complete_ideal(&self.base, ideal)?);
        Ok(self)
    }

    pub fn universe_elements(&self) -> impl Iterator<Item = &ElementRef> + '_ {
        self.base.elements()
    }

    pub fn element_count(&self) -> usize {
        self.base.element_count()
    }

    /// Swaps the roles of baseline and experiment.
    pub fn swapped(&self) -> Self {
        Self {
            base: self.exp.clone(),
            exp: self.base.clone(),
            weights: self.weights.clone(),
            ideal: self.ideal.clone(),
            census: IdCensus::new(
                self.census.ids_exp.clone(),
                self.census.ids_base.clone(),
                self.census.ids_hist.clone(),
            ),
            k: self.k,
        }
    }
}

fn describe_difference(
    a: &HashSet<ElementRef>,
    b: &HashSet<ElementRef>,
    a_name: &str,
    b_name: &str,
) -> String {
    let only_a = a.difference(b).min();
    let only_b = b.difference(a).min();
    match (only_a, only_b) {
        (Some(e), _) => format!("{e} appears in {a_name} but not in {b_name}"),
        (None, Some(e)) => format!("{e} appears in {b_name} but not in {a_name}"),
        (None, None) => "no difference".to_string(),
    }
}

fn complete_ideal(universe: &LabeledClustering, ideal: LabeledClustering) -> Result<LabeledClustering> {
    ideal.ensure_valid("Ideal")?;
    let elements = universe.element_set();
    let mut covered: HashSet<&ElementRef> = HashSet::with_capacity(elements.len());
    for e in ideal.elements() {
        if !elements.contains(e) {
            return Err(Error::UnknownElement(e.clone()));
        }
        covered.insert(e);
    }
    let mut missing: Vec<&ElementRef> = elements.iter().filter(|e| !covered.contains(e)).collect();
    if missing.is_empty() {
        return Ok(ideal);
    }
    missing.sort();
    if let Some(e) = missing.iter().find(|e| !e.is_synthetic()) {
        return Err(Error::MissingIdealClass((*e).clone()));
    }
    let taken: HashSet<ClusterId> = ideal.ids().cloned().collect();
    let mut clusters = ideal.clusters().to_vec();
    for e in missing {
        let mut class = ClusterId::new(format!("fresh:{}", e.external_id()));
        while taken.contains(&class) {
            class = ClusterId::new(format!("{class}'"));
        }
        clusters.push(Cluster {
            id: class,
            members: vec![e.clone()],
        });
    }
    Ok(LabeledClustering::new(ideal.epoch().to_string(), clusters))
}

/// `HistMembersOrId(id)`: the historical cluster of `id`, or the synthetic
/// element for `id` when the history does not use it.
pub fn hist_members_or_id(id: &ClusterId, hist: &LabeledClustering) -> Vec<ElementRef> {
    match hist.cluster(id) {
        Some(c) if !c.members.is_empty() => c.members.clone(),
        _ => vec![ElementRef::synthetic(id)],
    }
}

/// Builds Base, Exp and Weight.
///
/// `item_weights` must weigh every current item; historical weights are taken
/// from `hist` and multiplied by `cfg.hist_scale_factor`; synthetic id
/// elements weigh `cfg.k`.
pub fn build_eval_inputs(
    hist: &Snapshot,
    base_labels: &LabeledClustering,
    exp_labels: &LabeledClustering,
    item_weights: &WeightMap,
    cfg: &TransformConfig,
) -> Result<EvalInputs> {
    cfg.validate()?;
    hist.clustering.ensure_valid("hist")?;
    base_labels.ensure_valid("base")?;
    exp_labels.ensure_valid("exp")?;
    hist.clustering.ensure_kind(ElementKind::HistoricalItem)?;
    base_labels.ensure_kind(ElementKind::CurrentItem)?;
    exp_labels.ensure_kind(ElementKind::CurrentItem)?;

    let aligned;
    let (base_labels, exp_labels) = if cfg.align_items {
        let shared: HashSet<ElementRef> = base_labels
            .element_set()
            .intersection(&exp_labels.element_set())
            .cloned()
            .collect();
        if shared.is_empty() {
            return Err(Error::EmptyIntersection);
        }
        aligned = (
            base_labels.restrict(|e| shared.contains(e)),
            exp_labels.restrict(|e| shared.contains(e)),
        );
        (&aligned.0, &aligned.1)
    } else {
        (base_labels, exp_labels)
    };

    let base_items = base_labels.element_set();
    let exp_items = exp_labels.element_set();
    if base_items != exp_items {
        return Err(Error::ItemUniverseMismatch(describe_difference(
            &base_items,
            &exp_items,
            "base",
            "exp",
        )));
    }
    if cfg.mode == AssignmentMode::Separate && base_labels.partition() != exp_labels.partition() {
        return Err(Error::MembershipMismatch(
            "the two labelings group the current items differently; use simultaneous mode"
                .to_string(),
        ));
    }

    let census = IdCensus::new(
        base_labels.id_set(),
        exp_labels.id_set(),
        hist.clustering.id_set(),
    );

    let mut base_clusters = Vec::with_capacity(census.all_ids.len());
    let mut exp_clusters = Vec::with_capacity(census.all_ids.len());
    for id in &census.all_ids {
        let anchor = hist_members_or_id(id, &hist.clustering);
        let mut b = anchor.clone();
        b.extend_from_slice(base_labels.members(id));
        let mut x = anchor;
        x.extend_from_slice(exp_labels.members(id));
        base_clusters.push(Cluster::new(id.clone(), b));
        exp_clusters.push(Cluster::new(id.clone(), x));
    }

    let mut weights = WeightMap::with_capacity(base_items.len() + hist.weights.len());
    for e in &base_items {
        weights.insert(e.clone(), item_weights.require(e)?)?;
    }
    for e in hist.clustering.elements() {
        weights.insert(e.clone(), hist.weights.require(e)? * cfg.hist_scale_factor)?;
    }
    for id in &census.non_hist_ids {
        weights.insert(ElementRef::synthetic(id), cfg.k)?;
    }

    Ok(EvalInputs {
        base: LabeledClustering::new("Base", base_clusters),
        exp: LabeledClustering::new("Exp", exp_clusters),
        weights,
        ideal: None,
        census,
        k: cfg.k,
    })
}

/// Restricts both current clusterings to their shared items. Emptied clusters
/// disappear with their ids; a surviving item weighs the max of its two
/// weights.
pub fn align_current_items(
    base: &Snapshot,
    exp: &Snapshot,
) -> Result<(LabeledClustering, LabeledClustering, WeightMap)> {
    let shared: HashSet<ElementRef> = base
        .clustering
        .element_set()
        .intersection(&exp.clustering.element_set())
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut weights = WeightMap::with_capacity(shared.len());
    for e in &shared {
        let w = base.weights.require(e)?.max(exp.weights.require(e)?);
        weights.insert(e.clone(), w)?;
    }
    Ok((
        base.clustering.restrict(|e| shared.contains(e)),
        exp.clustering.restrict(|e| shared.contains(e)),
        weights,
    ))
}

/// Folds several historical epochs into one history. Items keep their epoch
/// tag, clusters with the same id are unioned, and each item's weight is
/// multiplied by its epoch's normalized share of the total epoch weight.
pub fn merge_historical_epochs(epochs: &[HistoricalEpoch]) -> Result<Snapshot> {
    if epochs.is_empty() {
        return Err(Error::NoEpochs);
    }
    let mut labels = HashSet::with_capacity(epochs.len());
    for ep in epochs {
        if !labels.insert(ep.label()) {
            return Err(Error::DuplicateEpochLabel(ep.label().to_string()));
        }
        if !(ep.epoch_weight.is_finite() && ep.epoch_weight > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epoch `{}` has non-positive epoch weight {}",
                ep.label(),
                ep.epoch_weight
            )));
        }
        ep.clustering.ensure_valid(ep.label())?;
        for e in ep.clustering.elements() {
            e.expect_kind(ElementKind::HistoricalItem)?;
            if e.epoch() != ep.label() {
                return Err(Error::EpochMismatch {
                    element: e.clone(),
                    epoch: ep.label().to_string(),
                });
            }
        }
    }
    let total = compensated_sum(epochs.iter().map(|ep| ep.epoch_weight));

    let mut weights = WeightMap::new();
    for ep in epochs {
        let scale = ep.epoch_weight / total;
        for e in ep.clustering.elements() {
            weights.insert(e.clone(), scale * ep.weights.require(e)?)?;
        }
    }

    if let [single] = epochs {
        return Ok(Snapshot::new(single.clustering.clone(), weights));
    }

    let assignments = epochs.iter().flat_map(|ep| {
        ep.clustering
            .clusters()
            .iter()
            .flat_map(|c| c.members.iter().map(move |e| (e.clone(), c.id.clone())))
    });
    let label = epochs.iter().map(|ep| ep.label()).collect::<Vec<_>>().join("+");
    Ok(Snapshot::new(
        LabeledClustering::from_assignments(label, assignments),
        weights,
    ))
}

/// Replaces each id's historical members by a single synthetic element of
/// weight `max(weight(Cluster_hist(id)), k)`.
///
/// Pointwise impact metrics do not change under this rewrite, so it is a
/// cheaper route for impact-only runs. The ideal is dropped because quality
/// metrics do change.
pub fn collapse_historical_clusters(inputs: &EvalInputs) -> Result<EvalInputs> {
    let mut weights = WeightMap::with_capacity(inputs.weights.len());
    let collapse = |c: &LabeledClustering, weights: &mut WeightMap| -> Result<LabeledClustering> {
        let mut clusters = Vec::with_capacity(c.len());
        for cl in c.clusters() {
            let (hist, rest): (Vec<&ElementRef>, Vec<&ElementRef>) = cl
                .members
                .iter()
                .partition(|e| e.kind() == ElementKind::HistoricalItem);
            let mut members: Vec<ElementRef> = Vec::with_capacity(rest.len() + 1);
            if !hist.is_empty() {
                let w = inputs.weights.total(hist.iter().copied())?.max(inputs.k);
                let synthetic = ElementRef::synthetic(&cl.id);
                weights.insert(synthetic.clone(), w)?;
                members.push(synthetic);
            }
            for e in rest {
                weights.insert(e.clone(), inputs.weights.require(e)?)?;
                members.push(e.clone());
            }
            clusters.push(Cluster::new(cl.id.clone(), members));
        }
        Ok(LabeledClustering::new(c.epoch().to_string(), clusters))
    };
    let base = collapse(&inputs.base, &mut weights)?;
    let exp = collapse(&inputs.exp, &mut weights)?;
    Ok(EvalInputs {
        base,
        exp,
        weights,
        ideal: None,
        census: inputs.census.clone(),
        k: inputs.k,
    })
}

/// Full preparation from per-side snapshots, as driven by the run config.
///
/// With `align_items` the current item sets are intersected and weights are
/// maxed; otherwise the item sets must agree and per-item weights are still
/// combined with max.
pub fn prepare_inputs(
    hist: &Snapshot,
    base: &Snapshot,
    exp: &Snapshot,
    cfg: &TransformConfig,
) -> Result<EvalInputs> {
    let (base_labels, exp_labels, weights) = if cfg.align_items {
        align_current_items(base, exp)?
    } else {
        (
            base.clustering.clone(),
            exp.clustering.clone(),
            base.weights.merge_max(&exp.weights),
        )
    };
    let cfg = TransformConfig {
        align_items: false,
        ..*cfg
    };
    build_eval_inputs(hist, &base_labels, &exp_labels, &weights, &cfg)
}
