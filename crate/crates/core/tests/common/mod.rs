//! Shared generators and an independent brute-force metric oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use ideval::transform::{build_eval_inputs, AssignmentMode, EvalInputs, TransformConfig};
use ideval::{ClusterId, ElementRef, LabeledClustering, Snapshot, WeightMap};
use rand::seq::SliceRandom;
use rand::Rng;

/// Randomly partitions `elements` into at most `max_blocks` non-empty blocks.
pub fn random_partition<R: Rng>(
    rng: &mut R,
    elements: &[ElementRef],
    max_blocks: usize,
) -> Vec<Vec<ElementRef>> {
    let k = rng.random_range(1..=max_blocks.max(1).min(elements.len().max(1)));
    let mut blocks: Vec<Vec<ElementRef>> = vec![Vec::new(); k];
    for e in elements {
        blocks[rng.random_range(0..k)].push(e.clone());
    }
    blocks.retain(|b| !b.is_empty());
    blocks
}

fn labeled(epoch: &str, blocks: Vec<Vec<ElementRef>>, ids: &[ClusterId]) -> LabeledClustering {
    LabeledClustering::from_assignments(
        epoch,
        blocks
            .into_iter()
            .zip(ids)
            .flat_map(|(b, id)| b.into_iter().map(move |e| (e, id.clone()))),
    )
}

fn random_weight<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..3) {
        0 => 1.0,
        1 => [0.5, 2.0, 3.0, 10.0][rng.random_range(0..4)],
        _ => rng.random_range(0.1..5.0),
    }
}

/// Raw scheme outputs plus the transform config they are evaluated with.
pub struct RawCase {
    pub hist: Snapshot,
    pub base: LabeledClustering,
    pub exp: LabeledClustering,
    pub weights: WeightMap,
    pub cfg: TransformConfig,
}

impl RawCase {
    pub fn build(&self) -> EvalInputs {
        build_eval_inputs(&self.hist, &self.base, &self.exp, &self.weights, &self.cfg)
            .expect("generated inputs are valid")
    }
}

/// A random history and two labelings of a random current clustering.
/// `max_hist` and `max_cur` bound the item counts; ids come from a pool a
/// little larger than the historical id set, so some ids are fresh.
pub fn random_raw<R: Rng>(rng: &mut R, max_hist: usize, max_cur: usize) -> RawCase {
    let n_hist = rng.random_range(0..=max_hist);
    let n_cur = rng.random_range(1..=max_cur.max(1));
    let pool: Vec<ClusterId> = (1..=6).map(|i| ClusterId::new(format!("id_{i}"))).collect();

    let hist_items: Vec<ElementRef> = (0..n_hist)
        .map(|i| ElementRef::historical("H", format!("h{i}")))
        .collect();
    let mut hist_w = WeightMap::new();
    for e in &hist_items {
        hist_w.insert(e.clone(), random_weight(rng)).unwrap();
    }
    let hist = if hist_items.is_empty() {
        LabeledClustering::empty("H")
    } else {
        let blocks = random_partition(rng, &hist_items, 3);
        let mut ids = pool.clone();
        ids.shuffle(rng);
        labeled("H", blocks, &ids)
    };

    let cur_items: Vec<ElementRef> = (0..n_cur)
        .map(|i| ElementRef::current(format!("i{i}")))
        .collect();
    let mut weights = WeightMap::new();
    for e in &cur_items {
        weights.insert(e.clone(), random_weight(rng)).unwrap();
    }
    let base_blocks = random_partition(rng, &cur_items, 3);
    let mut ids = pool.clone();
    ids.shuffle(rng);
    let base = labeled("", base_blocks.clone(), &ids);

    let mode = if rng.random_bool(0.5) {
        AssignmentMode::Separate
    } else {
        AssignmentMode::Simultaneous
    };
    let exp_blocks = match mode {
        AssignmentMode::Separate => base_blocks,
        AssignmentMode::Simultaneous => random_partition(rng, &cur_items, 3),
    };
    ids.shuffle(rng);
    let exp = labeled("", exp_blocks, &ids);

    let cfg = TransformConfig {
        k: [0.001, 0.001, 0.01, 0.2][rng.random_range(0..4)],
        hist_scale_factor: [1.0, 1.0, 0.5, 2.0][rng.random_range(0..4)],
        mode,
        align_items: false,
    };
    RawCase {
        hist: Snapshot::new(hist, hist_w),
        base,
        exp,
        weights,
        cfg,
    }
}

/// Arbitrary Base/Exp partitions of `n` current items, bypassing the id
/// reduction entirely.
pub fn random_materialized<R: Rng>(rng: &mut R, n: usize) -> EvalInputs {
    let items: Vec<ElementRef> = (0..n)
        .map(|i| ElementRef::current(format!("e{i}")))
        .collect();
    let mut weights = WeightMap::new();
    for e in &items {
        weights.insert(e.clone(), random_weight(rng)).unwrap();
    }
    let ids: Vec<ClusterId> = (0..n).map(|i| ClusterId::new(format!("c{i}"))).collect();
    let base = labeled("Base", random_partition(rng, &items, n), &ids);
    let exp = if rng.random_bool(0.15) {
        base.clone().with_epoch("Exp")
    } else {
        labeled("Exp", random_partition(rng, &items, n), &ids)
    };
    EvalInputs::from_materialized(base, exp, weights, 0.001).unwrap()
}

/// Attaches a random ideal over the inputs' universe.
pub fn with_random_ideal<R: Rng>(rng: &mut R, inputs: EvalInputs) -> EvalInputs {
    let mut elements: Vec<ElementRef> = inputs.universe_elements().cloned().collect();
    elements.sort();
    let n = elements.len();
    let ids: Vec<ClusterId> = (0..n).map(|i| ClusterId::new(format!("class{i}"))).collect();
    let ideal = labeled("ideal", random_partition(rng, &elements, n), &ids);
    inputs.with_ideal(ideal).unwrap()
}

/// Either a reduced raw case or a plain materialized pair, with at most
/// `max_elements` elements, always with an ideal.
pub fn random_universe<R: Rng>(rng: &mut R, max_elements: usize) -> EvalInputs {
    loop {
        let inputs = if rng.random_bool(0.5) {
            let raw = random_raw(rng, max_elements / 3, max_elements / 2);
            raw.build()
        } else {
            let n = rng.random_range(1..=max_elements);
            random_materialized(rng, n)
        };
        if inputs.element_count() <= max_elements {
            return with_random_ideal(rng, inputs);
        }
    }
}

/// Relabels a clustering's ids so that it can serve as an ideal.
pub fn as_ideal(c: &LabeledClustering) -> LabeledClustering {
    LabeledClustering::from_assignments(
        "ideal",
        c.clusters().iter().flat_map(|cl| {
            let class = ClusterId::new(format!("class:{}", cl.id));
            cl.members.iter().map(move |e| (e.clone(), class.clone()))
        }),
    )
}

/// Brute-force metrics straight from the set definitions, using nothing from
/// the library but its data types.
#[derive(Clone, Debug)]
pub struct NaiveMetrics {
    pub values: BTreeMap<&'static str, f64>,
    pub pointwise: BTreeMap<ElementRef, BTreeMap<&'static str, f64>>,
}

fn cluster_of(c: &LabeledClustering, e: &ElementRef) -> HashSet<ElementRef> {
    for cl in c.clusters() {
        if cl.members.contains(e) {
            return cl.members.iter().cloned().collect();
        }
    }
    panic!("{e} not clustered");
}

pub fn naive_metrics(inputs: &EvalInputs) -> NaiveMetrics {
    let weight = |e: &ElementRef| inputs.weights.get(e).unwrap();
    // Summing in sorted order makes equal sets weigh exactly the same.
    let w = |s: &HashSet<ElementRef>| {
        let mut v: Vec<&ElementRef> = s.iter().collect();
        v.sort();
        v.into_iter().map(weight).sum::<f64>()
    };
    let ideal = inputs.ideal.as_ref();
    let mut elements: Vec<ElementRef> = inputs.base.elements().cloned().collect();
    elements.sort();

    let mut pointwise = BTreeMap::new();
    let mut sums: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut total = 0.0;
    for e in &elements {
        let b = cluster_of(&inputs.base, e);
        let x = cluster_of(&inputs.exp, e);
        let b_minus_x: HashSet<ElementRef> = b.difference(&x).cloned().collect();
        let x_minus_b: HashSet<ElementRef> = x.difference(&b).cloned().collect();
        let inter: HashSet<ElementRef> = b.intersection(&x).cloned().collect();
        let union: HashSet<ElementRef> = b.union(&x).cloned().collect();
        let mut m = BTreeMap::new();
        m.insert("split", w(&b_minus_x) / w(&b));
        m.insert("merge", w(&x_minus_b) / w(&x));
        m.insert("jd", 1.0 - w(&inter) / w(&union));
        if let Some(ideal) = ideal {
            let i = cluster_of(ideal, e);
            let jd = |p: &HashSet<ElementRef>, q: &HashSet<ElementRef>| {
                let inter: HashSet<ElementRef> = p.intersection(q).cloned().collect();
                let union: HashSet<ElementRef> = p.union(q).cloned().collect();
                1.0 - w(&inter) / w(&union)
            };
            let in_i = |s: &HashSet<ElementRef>, keep: bool| -> HashSet<ElementRef> {
                s.iter().filter(|y| i.contains(*y) == keep).cloned().collect()
            };
            m.insert("good_split", w(&in_i(&b_minus_x, false)) / w(&b));
            m.insert("bad_split", w(&in_i(&b_minus_x, true)) / w(&b));
            m.insert("good_merge", w(&in_i(&x_minus_b, true)) / w(&x));
            m.insert("bad_merge", w(&in_i(&x_minus_b, false)) / w(&x));
            let bi = w(&in_i(&b, true));
            let xi = w(&in_i(&x, true));
            m.insert("dp", xi / w(&x) - bi / w(&b));
            m.insert("dr", xi / w(&i) - bi / w(&i));
            m.insert("d_bi", jd(&b, &i));
            m.insert("d_xi", jd(&x, &i));
        }
        let we = weight(e);
        total += we;
        for (k, v) in &m {
            *sums.entry(k).or_insert(0.0) += we * v;
        }
        pointwise.insert(e.clone(), m);
    }
    let mut values: BTreeMap<&'static str, f64> =
        sums.into_iter().map(|(k, v)| (k, v / total)).collect();
    if ideal.is_some() {
        let d_be = values["jd"];
        let iq = if d_be == 0.0 {
            0.0
        } else {
            (values["d_bi"] - values["d_xi"]) / d_be
        };
        values.insert("iq", iq);
    }
    NaiveMetrics { values, pointwise }
}
