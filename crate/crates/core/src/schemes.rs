//! Reference id assignment schemes.
//!
//! Input clusterings here are membership-only: their cluster ids are opaque
//! *keys* with no meaning across snapshots. A scheme replaces every key with
//! an id, either freshly minted or adopted from a historical clustering.
//!
//! Both schemes break ties lexicographically so results are reproducible.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{Cluster, ClusterId, ElementRef, LabeledClustering, WeightMap};

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentResult {
    /// The input memberships, relabeled with assigned ids.
    pub labels: LabeledClustering,
    pub fresh_ids_minted: BTreeSet<ClusterId>,
    /// Cluster key → adopted historical id.
    pub adopted: BTreeMap<ClusterId, ClusterId>,
    /// Cluster key → assigned id, for every cluster.
    pub assigned: BTreeMap<ClusterId, ClusterId>,
}

impl AssignmentResult {
    fn from_assignment(
        c: &LabeledClustering,
        assigned: BTreeMap<ClusterId, ClusterId>,
        fresh_ids_minted: BTreeSet<ClusterId>,
        adopted: BTreeMap<ClusterId, ClusterId>,
    ) -> Self {
        let clusters = c
            .clusters()
            .iter()
            .map(|cl| Cluster {
                id: assigned[&cl.id].clone(),
                members: cl.members.clone(),
            })
            .collect();
        Self {
            labels: LabeledClustering::new(c.epoch().to_string(), clusters),
            fresh_ids_minted,
            adopted,
            assigned,
        }
    }
}

/// Mints `<prefix><counter>` ids, skipping reserved ones.
struct Minter<'a> {
    prefix: &'a str,
    next: u64,
    reserved: &'a BTreeSet<ClusterId>,
}

impl Minter<'_> {
    fn mint(&mut self) -> ClusterId {
        loop {
            let id = ClusterId::new(format!("{}{}", self.prefix, self.next));
            self.next += 1;
            if !self.reserved.contains(&id) {
                return id;
            }
        }
    }
}

/// Cluster keys ordered by their smallest member external id, then key.
fn cluster_order(c: &LabeledClustering) -> Vec<&Cluster> {
    let mut order: Vec<(&str, &Cluster)> = c
        .clusters()
        .iter()
        .map(|cl| {
            let smallest = cl
                .members
                .iter()
                .map(ElementRef::external_id)
                .min()
                .unwrap_or("");
            (smallest, cl)
        })
        .collect();
    order.sort_by(|a, b| a.0.cmp(b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    order.into_iter().map(|(_, cl)| cl).collect()
}

/// Gives every cluster a brand-new id, never one in `reserved`.
pub fn assign_fresh_ids(
    c: &LabeledClustering,
    prefix: &str,
    start: u64,
    reserved: &BTreeSet<ClusterId>,
) -> Result<AssignmentResult> {
    c.ensure_valid("clustering")?;
    let mut minter = Minter {
        prefix,
        next: start,
        reserved,
    };
    let mut assigned = BTreeMap::new();
    let mut fresh = BTreeSet::new();
    for cl in cluster_order(c) {
        let id = minter.mint();
        fresh.insert(id.clone());
        assigned.insert(cl.id.clone(), id);
    }
    Ok(AssignmentResult::from_assignment(
        c,
        assigned,
        fresh,
        BTreeMap::new(),
    ))
}

/// Majority vote over historical ids.
///
/// A current item votes for the historical cluster of every historical item
/// with the same external id, with that item's historical weight. Each
/// historical id goes to the cluster voting for it most heavily (ties: the
/// smallest key); a cluster keeps the heaviest of the ids it won (ties: the
/// smallest id). Clusters without an id get fresh `<prefix><n>` ids counting
/// from 1 and skipping historical ids.
pub fn assign_by_majority_vote(
    c: &LabeledClustering,
    hist: &LabeledClustering,
    hist_weights: &WeightMap,
    prefix: &str,
) -> Result<AssignmentResult> {
    c.ensure_valid("clustering")?;
    hist.ensure_valid("hist")?;

    let mut hist_by_item: HashMap<&str, Vec<(&ClusterId, f64)>> = HashMap::new();
    for cl in hist.clusters() {
        for e in &cl.members {
            hist_by_item
                .entry(e.external_id())
                .or_default()
                .push((&cl.id, hist_weights.require(e)?));
        }
    }

    // votes[key][hist id]
    let mut votes: BTreeMap<&ClusterId, BTreeMap<&ClusterId, f64>> = BTreeMap::new();
    for cl in c.clusters() {
        let tally = votes.entry(&cl.id).or_default();
        for e in &cl.members {
            for &(hid, w) in hist_by_item.get(e.external_id()).into_iter().flatten() {
                *tally.entry(hid).or_insert(0.0) += w;
            }
        }
    }

    // Each historical id goes to its heaviest voter; iteration over keys in
    // ascending order with a strict comparison keeps the smallest key on ties.
    let mut winner: BTreeMap<&ClusterId, (&ClusterId, f64)> = BTreeMap::new();
    for (&key, tally) in &votes {
        for (&hid, &w) in tally {
            match winner.get(hid) {
                Some(&(_, best)) if best >= w => {}
                _ => {
                    winner.insert(hid, (key, w));
                }
            }
        }
    }
    let mut won: BTreeMap<&ClusterId, (&ClusterId, f64)> = BTreeMap::new();
    for (&hid, &(key, w)) in &winner {
        match won.get(key) {
            Some(&(_, best)) if best >= w => {}
            _ => {
                won.insert(key, (hid, w));
            }
        }
    }

    let reserved = hist.id_set();
    let mut minter = Minter {
        prefix,
        next: 1,
        reserved: &reserved,
    };
    let mut assigned = BTreeMap::new();
    let mut adopted = BTreeMap::new();
    let mut fresh = BTreeSet::new();
    for cl in cluster_order(c) {
        let id = match won.get(&cl.id) {
            Some(&(hid, _)) => {
                adopted.insert(cl.id.clone(), hid.clone());
                hid.clone()
            }
            None => {
                let id = minter.mint();
                fresh.insert(id.clone());
                id
            }
        };
        assigned.insert(cl.id.clone(), id);
    }
    Ok(AssignmentResult::from_assignment(c, assigned, fresh, adopted))
}

/// Renames assigned ids through `permutation`, which must be a bijection on
/// the assigned id set. Memberships are unchanged.
pub fn permute_ids(
    a: &AssignmentResult,
    permutation: &BTreeMap<ClusterId, ClusterId>,
) -> Result<AssignmentResult> {
    let ids: BTreeSet<&ClusterId> = a.assigned.values().collect();
    let domain: BTreeSet<&ClusterId> = permutation.keys().collect();
    let image: BTreeSet<&ClusterId> = permutation.values().collect();
    if domain != ids {
        let missing = ids.difference(&domain).next();
        let extra = domain.difference(&ids).next();
        return Err(Error::NotABijection(match (missing, extra) {
            (Some(id), _) => format!("id {id} is not mapped"),
            (None, Some(id)) => format!("id {id} is not assigned"),
            _ => unreachable!("sets differ"),
        }));
    }
    if image != ids || image.len() != permutation.len() {
        return Err(Error::NotABijection(
            "the permutation is not one-to-one onto the assigned ids".to_string(),
        ));
    }
    let hist_ids: BTreeSet<&ClusterId> = a.adopted.values().collect();
    let mut assigned = BTreeMap::new();
    let mut adopted = BTreeMap::new();
    for (key, id) in &a.assigned {
        let new = permutation[id].clone();
        if hist_ids.contains(&new) {
            adopted.insert(key.clone(), new.clone());
        }
        assigned.insert(key.clone(), new);
    }
    // Keys of the original memberships are recovered from `assigned`.
    let by_id: HashMap<&ClusterId, &ClusterId> =
        a.assigned.iter().map(|(k, v)| (v, k)).collect();
    let keyed = LabeledClustering::new(
        a.labels.epoch().to_string(),
        a.labels
            .clusters()
            .iter()
            .map(|cl| Cluster {
                id: by_id[&cl.id].clone(),
                members: cl.members.clone(),
            })
            .collect(),
    );
    Ok(AssignmentResult::from_assignment(
        &keyed,
        assigned,
        a.fresh_ids_minted.clone(),
        adopted,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cur(n: &str) -> ElementRef {
        ElementRef::current(n)
    }
    fn hist(n: &str) -> ElementRef {
        ElementRef::historical("H", n)
    }

    fn fig1_memberships() -> LabeledClustering {
        LabeledClustering::new(
            "",
            vec![
                Cluster::new("k_b", vec![cur("1"), cur("2")]),
                Cluster::new("k_a", vec![cur("3")]),
            ],
        )
    }

    fn fig1_hist() -> (LabeledClustering, WeightMap) {
        let h = LabeledClustering::new(
            "H",
            vec![
                Cluster::new("id_1", vec![hist("1"), hist("2")]),
                Cluster::new("id_2", vec![hist("3")]),
            ],
        );
        let w = WeightMap::from_pairs(["1", "2", "3"].map(|n| (hist(n), 1.0))).unwrap();
        (h, w)
    }

    fn id(s: &str) -> ClusterId {
        ClusterId::new(s)
    }

    #[test]
    fn fresh_ids_follow_smallest_member_order() {
        let r = assign_fresh_ids(&fig1_memberships(), "id_", 3, &BTreeSet::new()).unwrap();
        assert_eq!(r.assigned[&id("k_b")], id("id_3"));
        assert_eq!(r.assigned[&id("k_a")], id("id_4"));
        assert!(r.adopted.is_empty());
        let again = assign_fresh_ids(&fig1_memberships(), "id_", 3, &BTreeSet::new()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn fresh_ids_skip_reserved() {
        let reserved: BTreeSet<ClusterId> = [id("id_3")].into();
        let r = assign_fresh_ids(&fig1_memberships(), "id_", 3, &reserved).unwrap();
        assert_eq!(r.assigned[&id("k_b")], id("id_4"));
        assert_eq!(r.assigned[&id("k_a")], id("id_5"));
    }

    #[test]
    fn empty_prefix_single_cluster() {
        let c = LabeledClustering::new("", vec![Cluster::new("k", vec![cur("x")])]);
        let r = assign_fresh_ids(&c, "", 1, &BTreeSet::new()).unwrap();
        assert_eq!(r.labels.ids().collect::<Vec<_>>(), vec![&id("1")]);
    }

    #[test]
    fn majority_vote_reproduces_unanimous_history() {
        let (h, w) = fig1_hist();
        let r = assign_by_majority_vote(&fig1_memberships(), &h, &w, "id_").unwrap();
        assert_eq!(r.assigned[&id("k_b")], id("id_1"));
        assert_eq!(r.assigned[&id("k_a")], id("id_2"));
        assert!(r.fresh_ids_minted.is_empty());
    }

    #[test]
    fn unknown_members_get_fresh_ids() {
        let (h, w) = fig1_hist();
        let c = LabeledClustering::new(
            "",
            vec![
                Cluster::new("k1", vec![cur("1"), cur("2")]),
                Cluster::new("k2", vec![cur("new")]),
            ],
        );
        let r = assign_by_majority_vote(&c, &h, &w, "id_").unwrap();
        // id_1 and id_2 are historical, so the first fresh id is id_3.
        assert_eq!(r.assigned[&id("k2")], id("id_3"));
        assert!(r.fresh_ids_minted.contains(&id("id_3")));
    }

    #[test]
    fn split_history_tie_goes_to_smallest_key() {
        let h = LabeledClustering::new("H", vec![Cluster::new("id_1", vec![hist("1"), hist("2")])]);
        let w = WeightMap::from_pairs([(hist("1"), 1.0), (hist("2"), 1.0)]).unwrap();
        let c = LabeledClustering::new(
            "",
            vec![
                Cluster::new("kb", vec![cur("1")]),
                Cluster::new("ka", vec![cur("2")]),
            ],
        );
        let r = assign_by_majority_vote(&c, &h, &w, "id_").unwrap();
        assert_eq!(r.assigned[&id("ka")], id("id_1"));
        assert_eq!(r.assigned[&id("kb")], id("id_2"));
        assert_eq!(r.adopted.len(), 1);
    }

    #[test]
    fn votes_use_historical_weights() {
        let h = LabeledClustering::new("H", vec![Cluster::new("id_1", vec![hist("1"), hist("2")])]);
        let w = WeightMap::from_pairs([(hist("1"), 1.0), (hist("2"), 5.0)]).unwrap();
        let c = LabeledClustering::new(
            "",
            vec![
                Cluster::new("ka", vec![cur("1")]),
                Cluster::new("kb", vec![cur("2")]),
            ],
        );
        let r = assign_by_majority_vote(&c, &h, &w, "id_").unwrap();
        assert_eq!(r.assigned[&id("kb")], id("id_1"));
    }

    #[test]
    fn permutation_swaps_and_validates() {
        let (h, w) = fig1_hist();
        let base = assign_by_majority_vote(&fig1_memberships(), &h, &w, "id_").unwrap();
        let swap: BTreeMap<_, _> = [(id("id_1"), id("id_2")), (id("id_2"), id("id_1"))].into();
        let swapped = permute_ids(&base, &swap).unwrap();
        assert_eq!(swapped.assigned[&id("k_b")], id("id_2"));
        assert_eq!(swapped.labels.members(&id("id_1")), &[cur("3")]);
        assert_eq!(swapped.adopted.len(), 2);

        let identity: BTreeMap<_, _> = [(id("id_1"), id("id_1")), (id("id_2"), id("id_2"))].into();
        assert_eq!(permute_ids(&base, &identity).unwrap(), base);

        let partial: BTreeMap<_, _> = [(id("id_1"), id("id_2"))].into();
        assert!(matches!(permute_ids(&base, &partial), Err(Error::NotABijection(_))));
        let collapse: BTreeMap<_, _> = [(id("id_1"), id("id_1")), (id("id_2"), id("id_1"))].into();
        assert!(matches!(permute_ids(&base, &collapse), Err(Error::NotABijection(_))));
    }
}
