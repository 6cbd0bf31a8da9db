//! Dense membership indexes.
//!
//! A [`Universe`] interns the elements of one evaluation into `u32` slots in
//! sorted element order. Every [`MembershipIndex`] built on the same universe
//! shares that numbering, so the metric kernels work on plain integer arrays.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Cluster, ClusterId, ElementRef, LabeledClustering, WeightMap};
use crate::numeric::CompensatedSum;

#[derive(Debug)]
pub struct Universe {
    elements: Vec<ElementRef>,
    slots: HashMap<ElementRef, u32>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl Universe {
    /// Interns `elements` (duplicates collapse) with weights from `w`.
    pub fn new<I>(elements: I, w: &WeightMap) -> Result<Self>
    where
        I: IntoIterator<Item = ElementRef>,
    {
        let mut elements: Vec<ElementRef> = elements.into_iter().collect();
        elements.sort_unstable();
        elements.dedup();
        assert!(
            elements.len() < u32::MAX as usize,
            "universe exceeds u32 slot range"
        );
        let weights = elements
            .iter()
            .map(|e| w.require(e))
            .collect::<Result<Vec<f64>>>()?;
        let slots = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();
        let total_weight = weights.iter().copied().collect::<CompensatedSum>().value();
        Ok(Self {
            elements,
            slots,
            weights,
            total_weight,
        })
    }

    pub fn from_clustering(c: &LabeledClustering, w: &WeightMap) -> Result<Self> {
        Self::new(c.elements().cloned(), w)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn slot(&self, e: &ElementRef) -> Option<u32> {
        self.slots.get(e).copied()
    }

    pub fn element(&self, slot: u32) -> &ElementRef {
        &self.elements[slot as usize]
    }

    pub fn elements(&self) -> &[ElementRef] {
        &self.elements
    }

    pub fn weight(&self, slot: u32) -> f64 {
        self.weights[slot as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn to_weight_map(&self) -> WeightMap {
        let mut w = WeightMap::with_capacity(self.len());
        for (e, &v) in self.elements.iter().zip(&self.weights) {
            w.insert(e.clone(), v).expect("universe weights are validated");
        }
        w
    }
}

/// element → cluster and cluster → members over a shared [`Universe`], with
/// cached cluster weights and sizes.
#[derive(Debug, Clone)]
pub struct MembershipIndex {
    universe: Arc<Universe>,
    owner: Vec<u32>,
    ids: Vec<ClusterId>,
    members: Vec<Vec<u32>>,
    cluster_weights: Vec<f64>,
    id_slots: HashMap<ClusterId, u32>,
}

impl MembershipIndex {
    /// Index over the clustering's own elements.
    pub fn build(c: &LabeledClustering, w: &WeightMap) -> Result<Self> {
        c.ensure_valid("clustering")?;
        let universe = Arc::new(Universe::from_clustering(c, w)?);
        Self::build_in(universe, c)
    }

    /// Index over an existing universe; `c` must cover it exactly.
    pub fn build_in(universe: Arc<Universe>, c: &LabeledClustering) -> Result<Self> {
        const UNSET: u32 = u32::MAX;
        let mut owner = vec![UNSET; universe.len()];
        let mut ids = Vec::with_capacity(c.len());
        let mut members = Vec::with_capacity(c.len());
        let mut cluster_weights = Vec::with_capacity(c.len());
        let mut id_slots = HashMap::with_capacity(c.len());
        // Canonical cluster and member order makes every derived sum
        // independent of how the clustering happened to be listed.
        let mut order: Vec<&Cluster> = c.clusters().iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        for (ci, cluster) in order.into_iter().enumerate() {
            let ci = ci as u32;
            if cluster.members.is_empty() {
                c.ensure_valid("clustering")?;
            }
            let mut slots = Vec::with_capacity(cluster.members.len());
            for e in &cluster.members {
                let slot = universe.slot(e).ok_or_else(|| {
                    Error::UniverseMismatch(format!("element {e} is outside the universe"))
                })?;
                if owner[slot as usize] != UNSET {
                    c.ensure_valid("clustering")?;
                }
                owner[slot as usize] = ci;
                slots.push(slot);
            }
            slots.sort_unstable();
            let weight: CompensatedSum = slots.iter().map(|&s| universe.weight(s)).collect();
            if id_slots.insert(cluster.id.clone(), ci).is_some() {
                c.ensure_valid("clustering")?;
            }
            ids.push(cluster.id.clone());
            members.push(slots);
            cluster_weights.push(weight.value());
        }
        if let Some(missing) = owner.iter().position(|&o| o == UNSET) {
            return Err(Error::UniverseMismatch(format!(
                "element {} is not covered by the clustering",
                universe.element(missing as u32)
            )));
        }
        Ok(Self {
            universe,
            owner,
            ids,
            members,
            cluster_weights,
            id_slots,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn cluster_count(&self) -> usize {
        self.ids.len()
    }

    /// Cluster slot of an element slot.
    pub fn owner_slot(&self, element: u32) -> u32 {
        self.owner[element as usize]
    }

    pub fn owners(&self) -> &[u32] {
        &self.owner
    }

    pub fn owner(&self, e: &ElementRef) -> Option<&ClusterId> {
        let slot = self.universe.slot(e)?;
        Some(&self.ids[self.owner[slot as usize] as usize])
    }

    pub fn cluster_id(&self, cluster: u32) -> &ClusterId {
        &self.ids[cluster as usize]
    }

    pub fn cluster_slot(&self, id: &ClusterId) -> Option<u32> {
        self.id_slots.get(id).copied()
    }

    pub fn member_slots(&self, cluster: u32) -> &[u32] {
        &self.members[cluster as usize]
    }

    pub fn members(&self, id: &ClusterId) -> Option<impl Iterator<Item = &ElementRef> + '_> {
        let c = self.cluster_slot(id)?;
        Some(
            self.members[c as usize]
                .iter()
                .map(|&s| self.universe.element(s)),
        )
    }

    pub fn cluster_weight_slot(&self, cluster: u32) -> f64 {
        self.cluster_weights[cluster as usize]
    }

    pub fn cluster_weight(&self, id: &ClusterId) -> Option<f64> {
        self.cluster_slot(id).map(|c| self.cluster_weights[c as usize])
    }

    pub fn cluster_size(&self, cluster: u32) -> usize {
        self.members[cluster as usize].len()
    }

    pub fn shares_universe(&self, other: &MembershipIndex) -> bool {
        Arc::ptr_eq(&self.universe, &other.universe)
            || self.universe.elements() == other.universe.elements()
    }

    /// Rebuilds the labeled clustering from the owner map alone.
    pub fn reconstruct(&self, epoch: &str) -> LabeledClustering {
        let mut grouped: Vec<Vec<ElementRef>> = vec![Vec::new(); self.ids.len()];
        for (slot, &c) in self.owner.iter().enumerate() {
            grouped[c as usize].push(self.universe.element(slot as u32).clone());
        }
        LabeledClustering::new(
            epoch,
            self.ids
                .iter()
                .cloned()
                .zip(grouped)
                .map(|(id, members)| Cluster { id, members })
                .collect(),
        )
    }
}
