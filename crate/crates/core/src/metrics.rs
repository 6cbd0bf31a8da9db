//! Pointwise impact and quality metrics.
//!
//! For an element `e` let `B`, `E` and `I` be its clusters in Base, Exp and
//! Ideal, and let `w(S)` be the summed weight of a set. Then
//!
//! ```text
//! split          = w(B∖E) / w(B)
//! merge          = w(E∖B) / w(E)
//! jaccard        = 1 − w(B∩E) / w(B∪E)
//! good_split     = w((B∖E)∖I) / w(B)      bad_split  = w((B∖E)∩I) / w(B)
//! good_merge     = w((E∖B)∩I) / w(E)      bad_merge  = w((E∖B)∖I) / w(E)
//! precision_C    = w(C∩I) / w(C)          recall_C   = w(C∩I) / w(I)
//! ```
//!
//! Aggregates are weight-weighted means over every element of the universe.
//! IQ compares the expected Jaccard distances to the ideal:
//! `(d(Base, Ideal) − d(Exp, Ideal)) / d(Base, Exp)`, defined as 0 when Base
//! and Exp coincide.
//!
//! Elements sharing the same `(B, E, I)` triple have identical pointwise
//! values, so aggregation runs over the non-empty cells of that three-way
//! contingency table rather than over individual elements.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{MembershipIndex, Universe};
use crate::model::ElementRef;
use crate::numeric::CompensatedSum;
use crate::transform::EvalInputs;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointwiseImpact {
    pub jaccard_distance: f64,
    pub split_rate: f64,
    pub merge_rate: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointwiseQuality {
    pub good_split_rate: f64,
    pub bad_split_rate: f64,
    pub good_merge_rate: f64,
    pub bad_merge_rate: f64,
    pub precision_base: f64,
    pub precision_exp: f64,
    pub recall_base: f64,
    pub recall_exp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRecord {
    pub element: ElementRef,
    pub weight: f64,
    #[serde(flatten)]
    pub impact: PointwiseImpact,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub quality: Option<PointwiseQuality>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactMetrics {
    pub jaccard_distance: f64,
    pub split_rate: f64,
    pub merge_rate: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub good_split_rate: f64,
    pub bad_split_rate: f64,
    pub good_merge_rate: f64,
    pub bad_merge_rate: f64,
    pub delta_precision: f64,
    pub delta_recall: f64,
    pub iq: f64,
}

/// Expected Jaccard distances between the three clusterings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub base_ideal: f64,
    pub exp_ideal: f64,
    pub base_exp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub impact: ImpactMetrics,
    pub quality: Option<QualityMetrics>,
    pub distances: Option<Distances>,
    pub total_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_element: Option<Vec<PointwiseRecord>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    pub per_element: bool,
}

/// Weight and member count of one set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Part {
    w: f64,
    n: usize,
}

/// Weights of `B`, `E`, `I` and their intersections for one element.
#[derive(Clone, Copy, Debug, Default)]
struct Overlap {
    b: Part,
    e: Part,
    be: Part,
    i: Part,
    bi: Part,
    ei: Part,
    bei: Part,
}

/// `w(outer ∖ inner)` for `inner ⊆ outer`, exactly zero when nothing is left.
fn remainder(outer: Part, inner: Part) -> f64 {
    if outer.n == inner.n {
        0.0
    } else {
        (outer.w - inner.w).max(0.0)
    }
}

fn jaccard(a: Part, c: Part, ac: Part) -> f64 {
    if a.n == ac.n && c.n == ac.n {
        return 0.0;
    }
    let union = a.w + c.w - ac.w;
    (1.0 - ac.w / union).clamp(0.0, 1.0)
}

fn ratio(part: Part, whole: Part) -> f64 {
    if part.n == whole.n {
        1.0
    } else {
        part.w / whole.w
    }
}

impl Overlap {
    fn impact(&self) -> PointwiseImpact {
        PointwiseImpact {
            jaccard_distance: jaccard(self.b, self.e, self.be),
            split_rate: remainder(self.b, self.be) / self.b.w,
            merge_rate: remainder(self.e, self.be) / self.e.w,
        }
    }

    fn quality(&self) -> PointwiseQuality {
        let b_minus_e = Part {
            w: remainder(self.b, self.be),
            n: self.b.n - self.be.n,
        };
        let e_minus_b = Part {
            w: remainder(self.e, self.be),
            n: self.e.n - self.be.n,
        };
        // (B∖E)∩I = (B∩I)∖(B∩E∩I), and symmetrically for E∖B.
        let b_minus_e_in_i = Part {
            w: remainder(self.bi, self.bei),
            n: self.bi.n - self.bei.n,
        };
        let e_minus_b_in_i = Part {
            w: remainder(self.ei, self.bei),
            n: self.ei.n - self.bei.n,
        };
        PointwiseQuality {
            good_split_rate: remainder(b_minus_e, b_minus_e_in_i) / self.b.w,
            bad_split_rate: b_minus_e_in_i.w / self.b.w,
            good_merge_rate: e_minus_b_in_i.w / self.e.w,
            bad_merge_rate: remainder(e_minus_b, e_minus_b_in_i) / self.e.w,
            precision_base: ratio(self.bi, self.b),
            precision_exp: ratio(self.ei, self.e),
            recall_base: ratio(self.bi, self.i),
            recall_exp: ratio(self.ei, self.i),
        }
    }

    fn base_ideal_distance(&self) -> f64 {
        jaccard(self.b, self.i, self.bi)
    }

    fn exp_ideal_distance(&self) -> f64 {
        jaccard(self.e, self.i, self.ei)
    }
}

fn cluster_part(idx: &MembershipIndex, cluster: u32) -> Part {
    Part {
        w: idx.cluster_weight_slot(cluster),
        n: idx.cluster_size(cluster),
    }
}

fn slot_of(idx: &MembershipIndex, e: &ElementRef) -> Result<u32> {
    idx.universe()
        .slot(e)
        .ok_or_else(|| Error::UnknownElement(e.clone()))
}

fn ensure_same_universe(a: &MembershipIndex, b: &MembershipIndex) -> Result<()> {
    if a.shares_universe(b) {
        Ok(())
    } else {
        Err(Error::UniverseMismatch(format!(
            "indexes cover {} and {} elements",
            a.universe().len(),
            b.universe().len()
        )))
    }
}

/// Overlap for one element by scanning its clusters' member lists.
fn direct_overlap(
    base: &MembershipIndex,
    exp: &MembershipIndex,
    ideal: Option<&MembershipIndex>,
    slot: u32,
) -> Overlap {
    let u = base.universe();
    let b = base.owner_slot(slot);
    let x = exp.owner_slot(slot);
    let i = ideal.map(|idx| idx.owner_slot(slot));
    let in_ideal = |m: u32| match (ideal, i) {
        (Some(idx), Some(i)) => idx.owner_slot(m) == i,
        _ => false,
    };
    let mut o = Overlap {
        b: cluster_part(base, b),
        e: cluster_part(exp, x),
        ..Default::default()
    };
    if let (Some(idx), Some(i)) = (ideal, i) {
        o.i = cluster_part(idx, i);
    }
    let mut be = CompensatedSum::new();
    let mut bi = CompensatedSum::new();
    let mut bei = CompensatedSum::new();
    for &m in base.member_slots(b) {
        let w = u.weight(m);
        let shared = exp.owner_slot(m) == x;
        let ideal_too = in_ideal(m);
        if shared {
            be.add(w);
            o.be.n += 1;
        }
        if ideal_too {
            bi.add(w);
            o.bi.n += 1;
        }
        if shared && ideal_too {
            bei.add(w);
            o.bei.n += 1;
        }
    }
    let mut ei = CompensatedSum::new();
    for &m in exp.member_slots(x) {
        if in_ideal(m) {
            ei.add(u.weight(m));
            o.ei.n += 1;
        }
    }
    o.be.w = be.value();
    o.bi.w = bi.value();
    o.bei.w = bei.value();
    o.ei.w = ei.value();
    o
}

/// Split, merge and Jaccard distance of one element.
pub fn pointwise_impact(
    base: &MembershipIndex,
    exp: &MembershipIndex,
    e: &ElementRef,
) -> Result<PointwiseImpact> {
    ensure_same_universe(base, exp)?;
    let slot = slot_of(base, e)?;
    Ok(direct_overlap(base, exp, None, slot).impact())
}

/// Full pointwise record of one element against an ideal.
pub fn pointwise_quality(
    base: &MembershipIndex,
    exp: &MembershipIndex,
    ideal: &MembershipIndex,
    e: &ElementRef,
) -> Result<PointwiseRecord> {
    ensure_same_universe(base, exp)?;
    ensure_same_universe(base, ideal).map_err(|_| Error::MissingIdealClass(e.clone()))?;
    let slot = slot_of(base, e)?;
    let o = direct_overlap(base, exp, Some(ideal), slot);
    Ok(PointwiseRecord {
        element: e.clone(),
        weight: base.universe().weight(slot),
        impact: o.impact(),
        quality: Some(o.quality()),
    })
}

/// IQ from the three expected distances; 0 when Base and Exp coincide.
pub fn compute_iq(d_base_ideal: f64, d_exp_ideal: f64, d_base_exp: f64) -> f64 {
    if d_base_exp == 0.0 {
        return 0.0;
    }
    let iq = (d_base_ideal - d_exp_ideal) / d_base_exp;
    // The triangle inequality bounds the exact value by 1 in magnitude; only
    // rounding residue can push past it.
    if iq.abs() > 1.0 && iq.abs() - 1.0 < 1e-9 {
        iq.signum()
    } else {
        iq
    }
}

/// Base, Exp and (optionally) Ideal indexed over one universe.
pub struct IndexedInputs {
    pub base: MembershipIndex,
    pub exp: MembershipIndex,
    pub ideal: Option<MembershipIndex>,
}

impl IndexedInputs {
    pub fn build(inputs: &EvalInputs) -> Result<Self> {
        inputs.base.ensure_valid("Base")?;
        inputs.exp.ensure_valid("Exp")?;
        let universe = Arc::new(Universe::from_clustering(&inputs.base, &inputs.weights)?);
        let base = MembershipIndex::build_in(universe.clone(), &inputs.base)?;
        let exp = MembershipIndex::build_in(universe.clone(), &inputs.exp)?;
        let ideal = match &inputs.ideal {
            Some(ideal) => Some(build_ideal_index(universe, ideal)?),
            None => None,
        };
        Ok(Self { base, exp, ideal })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        self.base.universe()
    }
}

fn build_ideal_index(
    universe: Arc<Universe>,
    ideal: &crate::model::LabeledClustering,
) -> Result<MembershipIndex> {
    ideal.ensure_valid("Ideal")?;
    match MembershipIndex::build_in(universe.clone(), ideal) {
        Ok(idx) => Ok(idx),
        Err(Error::UniverseMismatch(_)) => {
            let covered = ideal.element_set();
            if let Some(e) = ideal.elements().find(|e| universe.slot(e).is_none()) {
                return Err(Error::UnknownElement(e.clone()));
            }
            let missing = universe
                .elements()
                .iter()
                .find(|e| !covered.contains(*e))
                .expect("a coverage gap exists");
            Err(Error::MissingIdealClass(missing.clone()))
        }
        Err(e) => Err(e),
    }
}

/// One non-empty cell of the (B, E, I) contingency table.
struct Cell {
    b: u32,
    x: u32,
    i: u32,
    all: Part,
    counted: f64,
    slots: std::ops::Range<usize>,
}

/// Accumulated outcome of a contingency pass.
struct Aggregate {
    total_weight: f64,
    impact: ImpactMetrics,
    quality: Option<(QualityMetrics, Distances)>,
    per_element: Option<Vec<PointwiseRecord>>,
}

/// Aggregates over the contingency table of three indexes.
///
/// `mask`, when given, restricts which elements are averaged; cluster and
/// intersection weights still use every element.
fn aggregate(
    base: &MembershipIndex,
    exp: &MembershipIndex,
    ideal: Option<&MembershipIndex>,
    mask: Option<&[bool]>,
    per_element: bool,
) -> Result<Aggregate> {
    ensure_same_universe(base, exp)?;
    if let Some(ideal) = ideal {
        ensure_same_universe(base, ideal)?;
    }
    let universe = base.universe();
    let n = universe.len();
    let ideal_owner = |s: u32| ideal.map_or(0, |idx| idx.owner_slot(s));

    let mut keyed: Vec<(u32, u32, u32, u32)> = (0..n as u32)
        .into_par_iter()
        .map(|s| (base.owner_slot(s), exp.owner_slot(s), ideal_owner(s), s))
        .collect();
    keyed.par_sort_unstable();

    let counted = |s: u32| mask.is_none_or(|m| m[s as usize]);
    let mut cells: Vec<Cell> = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let (b, x, i, _) = keyed[start];
        let mut end = start;
        let mut all = CompensatedSum::new();
        let mut masked = CompensatedSum::new();
        while end < keyed.len() && keyed[end].0 == b && keyed[end].1 == x && keyed[end].2 == i {
            let s = keyed[end].3;
            let w = universe.weight(s);
            all.add(w);
            if counted(s) {
                masked.add(w);
            }
            end += 1;
        }
        cells.push(Cell {
            b,
            x,
            i,
            all: Part {
                w: all.value(),
                n: end - start,
            },
            counted: masked.value(),
            slots: start..end,
        });
        start = end;
    }

    // Pair marginals in cell order.
    let mut be: HashMap<(u32, u32), (CompensatedSum, usize)> = HashMap::new();
    let mut bi: HashMap<(u32, u32), (CompensatedSum, usize)> = HashMap::new();
    let mut ei: HashMap<(u32, u32), (CompensatedSum, usize)> = HashMap::new();
    for c in &cells {
        let bump = |m: &mut HashMap<(u32, u32), (CompensatedSum, usize)>, k| {
            let slot = m.entry(k).or_default();
            slot.0.add(c.all.w);
            slot.1 += c.all.n;
        };
        bump(&mut be, (c.b, c.x));
        if ideal.is_some() {
            bump(&mut bi, (c.b, c.i));
            bump(&mut ei, (c.x, c.i));
        }
    }
    let part = |m: &HashMap<(u32, u32), (CompensatedSum, usize)>, k| {
        m.get(&k).map_or(Part::default(), |(s, n)| Part {
            w: s.value(),
            n: *n,
        })
    };

    let overlaps: Vec<Overlap> = cells
        .iter()
        .map(|c| {
            let mut o = Overlap {
                b: cluster_part(base, c.b),
                e: cluster_part(exp, c.x),
                be: part(&be, (c.b, c.x)),
                ..Default::default()
            };
            if let Some(idx) = ideal {
                o.i = cluster_part(idx, c.i);
                o.bi = part(&bi, (c.b, c.i));
                o.ei = part(&ei, (c.x, c.i));
                o.bei = c.all;
            }
            o
        })
        .collect();

    let mut total = CompensatedSum::new();
    let mut jd = CompensatedSum::new();
    let mut split = CompensatedSum::new();
    let mut merge = CompensatedSum::new();
    let mut q = [CompensatedSum::new(); 6];
    let mut d_bi = CompensatedSum::new();
    let mut d_ei = CompensatedSum::new();
    for (c, o) in cells.iter().zip(&overlaps) {
        let w = c.counted;
        if w == 0.0 {
            continue;
        }
        total.add(w);
        let imp = o.impact();
        jd.add(w * imp.jaccard_distance);
        split.add(w * imp.split_rate);
        merge.add(w * imp.merge_rate);
        if ideal.is_some() {
            let pq = o.quality();
            q[0].add(w * pq.good_split_rate);
            q[1].add(w * pq.bad_split_rate);
            q[2].add(w * pq.good_merge_rate);
            q[3].add(w * pq.bad_merge_rate);
            q[4].add(w * (pq.precision_exp - pq.precision_base));
            q[5].add(w * (pq.recall_exp - pq.recall_base));
            d_bi.add(w * o.base_ideal_distance());
            d_ei.add(w * o.exp_ideal_distance());
        }
    }
    let total_weight = total.value();
    let mean = |s: &CompensatedSum| {
        if total_weight > 0.0 {
            s.value() / total_weight
        } else {
            0.0
        }
    };
    let impact = ImpactMetrics {
        jaccard_distance: mean(&jd),
        split_rate: mean(&split),
        merge_rate: mean(&merge),
    };
    let quality = ideal.map(|_| {
        let distances = Distances {
            base_ideal: mean(&d_bi),
            exp_ideal: mean(&d_ei),
            base_exp: impact.jaccard_distance,
        };
        let quality = QualityMetrics {
            good_split_rate: mean(&q[0]),
            bad_split_rate: mean(&q[1]),
            good_merge_rate: mean(&q[2]),
            bad_merge_rate: mean(&q[3]),
            delta_precision: mean(&q[4]),
            delta_recall: mean(&q[5]),
            iq: compute_iq(distances.base_ideal, distances.exp_ideal, distances.base_exp),
        };
        (quality, distances)
    });

    let per_element = per_element.then(|| {
        let mut records: Vec<PointwiseRecord> = cells
            .par_iter()
            .zip(overlaps.par_iter())
            .flat_map_iter(|(c, o)| {
                let impact = o.impact();
                let quality = ideal.map(|_| o.quality());
                keyed[c.slots.clone()]
                    .iter()
                    .map(|k| k.3)
                    .filter(|&s| counted(s))
                    .map(move |s| PointwiseRecord {
                        element: universe.element(s).clone(),
                        weight: universe.weight(s),
                        impact,
                        quality,
                    })
            })
            .collect();
        records.par_sort_by(|a, b| {
            let ka = a.weight * a.impact.jaccard_distance;
            let kb = b.weight * b.impact.jaccard_distance;
            kb.total_cmp(&ka).then_with(|| a.element.cmp(&b.element))
        });
        records
    });

    Ok(Aggregate {
        total_weight,
        impact,
        quality,
        per_element,
    })
}

/// Metrics over indexed inputs, optionally restricted to masked elements.
pub fn evaluate_indexed(
    indexed: &IndexedInputs,
    mask: Option<&[bool]>,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    let agg = aggregate(
        &indexed.base,
        &indexed.exp,
        indexed.ideal.as_ref(),
        mask,
        opts.per_element,
    )?;
    let (quality, distances) = match agg.quality {
        Some((q, d)) => (Some(q), Some(d)),
        None => (None, None),
    };
    Ok(MetricsReport {
        impact: agg.impact,
        quality,
        distances,
        total_weight: agg.total_weight,
        per_element: agg.per_element,
    })
}

/// Impact metrics, plus quality metrics when the inputs carry an ideal.
pub fn evaluate(inputs: &EvalInputs, opts: &EvalOptions) -> Result<MetricsReport> {
    evaluate_indexed(&IndexedInputs::build(inputs)?, None, opts)
}

pub fn aggregate_impact(inputs: &EvalInputs) -> Result<ImpactMetrics> {
    let indexed = IndexedInputs::build(&EvalInputs {
        ideal: None,
        ..inputs.clone()
    })?;
    Ok(aggregate(&indexed.base, &indexed.exp, None, None, false)?.impact)
}

pub fn aggregate_quality(inputs: &EvalInputs) -> Result<(QualityMetrics, Distances)> {
    let indexed = IndexedInputs::build(inputs)?;
    let ideal = indexed.ideal.as_ref().ok_or_else(|| {
        let e = indexed.universe().elements().first().cloned();
        match e {
            Some(e) => Error::MissingIdealClass(e),
            None => Error::InvalidConfig("empty universe".into()),
        }
    })?;
    let agg = aggregate(&indexed.base, &indexed.exp, Some(ideal), None, false)?;
    Ok(agg.quality.expect("ideal given"))
}

/// Weighted mean over elements of the pointwise Jaccard distance between two
/// clusterings of the same universe.
pub fn expected_jaccard_distance(a: &MembershipIndex, b: &MembershipIndex) -> Result<f64> {
    Ok(aggregate(a, b, None, None, false)?.impact.jaccard_distance)
}
