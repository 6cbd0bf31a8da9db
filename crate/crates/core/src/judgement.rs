//! Human-judgement workflow: pair sampling, automatic verdicts for fresh ids,
//! verdict ingestion, consistency checking and a naive quality estimator.
//!
//! Sampling picks an anchor element with probability proportional to
//! `weight × jaccard distance`, then a partner weight-proportionally from the
//! symmetric difference of the anchor's Base and Exp clusters. Pairs touching
//! a synthetic element of an id without history are judged automatically as
//! distinct: nothing ties a brand-new id to any other element.
//!
//! The estimator is deliberately simple. Equivalent verdicts are closed
//! transitively into classes, every other element is its own class, and the
//! quality metrics are averaged over the elements that appear in at least one
//! judged pair. Its output is always labeled as an estimate.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::records;
use crate::metrics::{evaluate_indexed, EvalOptions, IndexedInputs, MetricsReport};
use crate::model::{ClusterId, ElementRef, LabeledClustering};
use crate::numeric::CompensatedSum;
use crate::transform::{EvalInputs, IdCensus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    Distinct,
    Unjudged,
    Discarded,
}

impl Verdict {
    /// Token used in pair files.
    pub fn token(self) -> &'static str {
        match self {
            Verdict::Equivalent => "equiv",
            Verdict::Distinct => "distinct",
            Verdict::Unjudged => "unjudged",
            Verdict::Discarded => "unsure",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token.trim() {
            "equiv" => Some(Verdict::Equivalent),
            "distinct" => Some(Verdict::Distinct),
            "unsure" => Some(Verdict::Discarded),
            "unjudged" | "" => Some(Verdict::Unjudged),
            _ => None,
        }
    }

    /// Equivalent or Distinct.
    pub fn is_judged(self) -> bool {
        matches!(self, Verdict::Equivalent | Verdict::Distinct)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    Human,
    AutoFreshId,
}

impl VerdictSource {
    pub fn token(self) -> &'static str {
        match self {
            VerdictSource::Human => "human",
            VerdictSource::AutoFreshId => "auto",
        }
    }
}

/// An unordered element pair with its verdict. `left < right` always holds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JudgementPair {
    left: ElementRef,
    right: ElementRef,
    pub verdict: Verdict,
    pub source: VerdictSource,
}

impl JudgementPair {
    /// An unjudged pair; `None` when both sides are the same element.
    pub fn new(a: ElementRef, b: ElementRef) -> Option<Self> {
        Self::with_verdict(a, b, Verdict::Unjudged)
    }

    pub fn with_verdict(a: ElementRef, b: ElementRef, verdict: Verdict) -> Option<Self> {
        let (left, right) = match a.cmp(&b) {
            std::cmp::Ordering::Less => (a, b),
            std::cmp::Ordering::Greater => (b, a),
            std::cmp::Ordering::Equal => return None,
        };
        Some(Self {
            left,
            right,
            verdict,
            source: VerdictSource::Human,
        })
    }

    pub fn left(&self) -> &ElementRef {
        &self.left
    }

    pub fn right(&self) -> &ElementRef {
        &self.right
    }

    pub fn key(&self) -> (ElementRef, ElementRef) {
        (self.left.clone(), self.right.clone())
    }
}

/// Resolves pairs that touch an id without history: such a pair is always
/// distinct. Any other pair is returned unchanged.
pub fn auto_judge(mut pair: JudgementPair, census: &IdCensus) -> JudgementPair {
    if census.is_fresh_id_element(&pair.left) || census.is_fresh_id_element(&pair.right) {
        pair.verdict = Verdict::Distinct;
        pair.source = VerdictSource::AutoFreshId;
    }
    pair
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgementSet {
    /// Sorted by `(left, right)`, no duplicates.
    pub pairs: Vec<JudgementPair>,
    pub seed: u64,
    /// Fraction of universe weight carried by elements of judged pairs.
    pub coverage_weight: f64,
}

impl JudgementSet {
    /// Builds a set from arbitrary pairs: later duplicates win, fresh-id pairs
    /// are auto-judged, and coverage is computed against `inputs`.
    pub fn from_pairs(
        inputs: &EvalInputs,
        pairs: impl IntoIterator<Item = JudgementPair>,
        seed: u64,
    ) -> Result<Self> {
        let known = inputs.weights.clone();
        let mut map = BTreeMap::new();
        for p in pairs {
            for e in [&p.left, &p.right] {
                if !known.contains(e) {
                    return Err(Error::UnknownElement(e.clone()));
                }
            }
            let p = auto_judge(p, &inputs.census);
            map.insert(p.key(), p);
        }
        let mut set = Self {
            pairs: map.into_values().collect(),
            seed,
            coverage_weight: 0.0,
        };
        set.coverage_weight = set.coverage(inputs)?;
        Ok(set)
    }

    pub fn judged(&self) -> impl Iterator<Item = &JudgementPair> + '_ {
        self.pairs.iter().filter(|p| p.verdict.is_judged())
    }

    /// Elements incident to at least one judged pair.
    pub fn judged_elements(&self) -> HashSet<&ElementRef> {
        self.judged().flat_map(|p| [&p.left, &p.right]).collect()
    }

    fn coverage(&self, inputs: &EvalInputs) -> Result<f64> {
        let touched = self.judged_elements();
        let covered = inputs.weights.total(touched)?;
        let total = inputs.weights.total(inputs.universe_elements())?;
        Ok(if total > 0.0 {
            (covered / total).clamp(0.0, 1.0)
        } else {
            0.0
        })
    }

    fn find(&self, left: &ElementRef, right: &ElementRef) -> Option<usize> {
        self.pairs
            .binary_search_by(|p| (&p.left, &p.right).cmp(&(left, right)))
            .ok()
    }

    /// Pair file: `left <TAB> right <TAB> verdict <TAB> source`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# seed={}", self.seed).expect("string write");
        out.push_str("# left\tright\tverdict\tsource\n");
        out.push_str("# verdicts: equiv | distinct | unsure | unjudged\n");
        for p in &self.pairs {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                p.left,
                p.right,
                p.verdict.token(),
                p.source.token()
            )
            .expect("string write");
        }
        out
    }
}

/// Parses a verdict file into pairs. The source column is optional and only
/// informative: automatic verdicts are re-derived from the inputs.
pub fn parse_verdicts(text: &str, source: &str) -> Result<Vec<JudgementPair>> {
    let parse_err = |line, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (line, fields) in records(text) {
        if !(3..=4).contains(&fields.len()) {
            return Err(parse_err(
                line,
                format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let element = |f: &str| {
            f.parse::<ElementRef>()
                .map_err(|e| parse_err(line, e.to_string()))
        };
        let (a, b) = (element(fields[0])?, element(fields[1])?);
        let verdict = Verdict::from_token(fields[2])
            .ok_or_else(|| parse_err(line, format!("unknown verdict `{}`", fields[2])))?;
        if let Some(src) = fields.get(3) {
            if !matches!(src.trim(), "human" | "auto" | "") {
                return Err(parse_err(line, format!("unknown verdict source `{src}`")));
            }
        }
        let pair = JudgementPair::with_verdict(a, b, verdict)
            .ok_or_else(|| parse_err(line, "a pair needs two distinct elements".to_string()))?;
        out.push(pair);
    }
    Ok(out)
}

/// Merges verdicts onto a previously sampled set. Every pair in `verdicts`
/// must have been sampled; later lines override earlier ones; automatic
/// verdicts stay distinct.
pub fn ingest_verdicts(
    inputs: &EvalInputs,
    sampled: &JudgementSet,
    verdicts: impl IntoIterator<Item = JudgementPair>,
) -> Result<JudgementSet> {
    let mut set = sampled.clone();
    for v in verdicts {
        let idx = set
            .find(&v.left, &v.right)
            .ok_or_else(|| Error::UnknownPair(v.left.clone(), v.right.clone()))?;
        let slot = &mut set.pairs[idx];
        slot.verdict = v.verdict;
        slot.source = VerdictSource::Human;
        *slot = auto_judge(slot.clone(), &inputs.census);
    }
    set.coverage_weight = set.coverage(inputs)?;
    Ok(set)
}

/// Draws up to `n` distinct pairs. Fewer are returned only when the
/// reachable pairs run out.
pub fn sample_pairs(inputs: &EvalInputs, n: usize, seed: u64) -> Result<JudgementSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("pair count must be at least 1".into()));
    }
    let indexed = IndexedInputs::build(&EvalInputs {
        ideal: None,
        ..inputs.clone()
    })?;
    let universe = indexed.universe().clone();
    let report = evaluate_indexed(&indexed, None, &EvalOptions { per_element: true })?;
    let mut jd = vec![0.0; universe.len()];
    for r in report.per_element.expect("requested") {
        let slot = universe.slot(&r.element).expect("record from universe");
        jd[slot as usize] = r.impact.jaccard_distance;
    }
    let anchors: Vec<u32> = (0..universe.len() as u32)
        .filter(|&s| jd[s as usize] > 0.0)
        .collect();
    if anchors.is_empty() {
        return Err(Error::NothingToSample);
    }
    let anchor_dist = WeightedIndex::new(
        anchors
            .iter()
            .map(|&s| universe.weight(s) * jd[s as usize]),
    )
    .map_err(|_| Error::NothingToSample)?;

    // Symmetric difference of the anchor's Base and Exp clusters.
    let partners = |s: u32| -> Vec<u32> {
        let b = indexed.base.owner_slot(s);
        let x = indexed.exp.owner_slot(s);
        let only_b = indexed
            .base
            .member_slots(b)
            .iter()
            .filter(|&&m| indexed.exp.owner_slot(m) != x);
        let only_e = indexed
            .exp
            .member_slots(x)
            .iter()
            .filter(|&&m| indexed.base.owner_slot(m) != b);
        let mut v: Vec<u32> = only_b.chain(only_e).copied().collect();
        v.sort_unstable();
        v
    };
    let mut partner_cache: HashMap<u32, (Vec<u32>, WeightedIndex<f64>)> = HashMap::new();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = BTreeMap::new();
    let max_attempts = n.saturating_mul(50).saturating_add(1000);
    for _ in 0..max_attempts {
        if chosen.len() == n {
            break;
        }
        let anchor = anchors[anchor_dist.sample(&mut rng)];
        let (cands, dist) = partner_cache.entry(anchor).or_insert_with(|| {
            let cands = partners(anchor);
            let dist = WeightedIndex::new(cands.iter().map(|&m| universe.weight(m)))
                .expect("positive jd implies a non-empty symmetric difference");
            (cands, dist)
        });
        let partner = cands[dist.sample(&mut rng)];
        let pair = JudgementPair::new(
            universe.element(anchor).clone(),
            universe.element(partner).clone(),
        )
        .expect("partner differs from anchor");
        chosen
            .entry(pair.key())
            .or_insert_with(|| auto_judge(pair, &inputs.census));
    }
    let mut set = JudgementSet {
        pairs: chosen.into_values().collect(),
        seed,
        coverage_weight: 0.0,
    };
    set.coverage_weight = set.coverage(inputs)?;
    Ok(set)
}

/// One Distinct verdict contradicted by a chain of Equivalent verdicts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub distinct: (ElementRef, ElementRef),
    /// Equivalence chain from `distinct.0` to `distinct.1`.
    pub path: Vec<ElementRef>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InconsistencyReport {
    pub conflicts: Vec<Conflict>,
}

impl InconsistencyReport {
    pub fn is_empty(&self) -> bool {
        self.conflicts.is_empty()
    }
}

impl fmt::Display for InconsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} conflict(s)", self.conflicts.len())?;
        for c in &self.conflicts {
            let chain: Vec<String> = c.path.iter().map(ToString::to_string).collect();
            write!(
                f,
                "; {} ≢ {} but {}",
                c.distinct.0,
                c.distinct.1,
                chain.join(" ≡ ")
            )?;
        }
        Ok(())
    }
}

/// Union-find over element keys.
struct Components<'a> {
    index: HashMap<&'a ElementRef, usize>,
    parent: Vec<usize>,
}

impl<'a> Components<'a> {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            parent: Vec::new(),
        }
    }

    fn id(&mut self, e: &'a ElementRef) -> usize {
        let next = self.parent.len();
        let id = *self.index.entry(e).or_insert(next);
        if id == next {
            self.parent.push(id);
        }
        id
    }

    fn root(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: &'a ElementRef, b: &'a ElementRef) {
        let (a, b) = (self.id(a), self.id(b));
        let (ra, rb) = (self.root(a), self.root(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn same(&mut self, a: &'a ElementRef, b: &'a ElementRef) -> bool {
        let (a, b) = (self.id(a), self.id(b));
        self.root(a) == self.root(b)
    }
}

/// Lists every Distinct verdict whose sides are linked by Equivalent verdicts,
/// with the shortest such chain.
pub fn check_consistency(js: &JudgementSet) -> InconsistencyReport {
    let mut uf = Components::new();
    let mut adjacency: HashMap<&ElementRef, Vec<&ElementRef>> = HashMap::new();
    for p in js.pairs.iter().filter(|p| p.verdict == Verdict::Equivalent) {
        uf.union(&p.left, &p.right);
        adjacency.entry(&p.left).or_default().push(&p.right);
        adjacency.entry(&p.right).or_default().push(&p.left);
    }
    for list in adjacency.values_mut() {
        list.sort();
    }
    let mut conflicts = Vec::new();
    for p in js.pairs.iter().filter(|p| p.verdict == Verdict::Distinct) {
        if uf.same(&p.left, &p.right) {
            conflicts.push(Conflict {
                distinct: (p.left.clone(), p.right.clone()),
                path: shortest_path(&adjacency, &p.left, &p.right),
            });
        }
    }
    InconsistencyReport { conflicts }
}

fn shortest_path<'a>(
    adjacency: &HashMap<&'a ElementRef, Vec<&'a ElementRef>>,
    from: &'a ElementRef,
    to: &'a ElementRef,
) -> Vec<ElementRef> {
    let mut prev: HashMap<&ElementRef, &ElementRef> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = HashSet::from([from]);
    while let Some(cur) = queue.pop_front() {
        if cur == to {
            break;
        }
        for &next in adjacency.get(cur).map(Vec::as_slice).unwrap_or_default() {
            if seen.insert(next) {
                prev.insert(next, cur);
                queue.push_back(next);
            }
        }
    }
    let mut path = vec![to.clone()];
    let mut cur = to;
    while let Some(&p) = prev.get(cur) {
        path.push(p.clone());
        cur = p;
    }
    path.reverse();
    path
}

/// Quality metrics estimated from judged pairs only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Always `"estimate"`.
    pub label: String,
    pub coverage_weight: f64,
    pub judged_pairs: usize,
    pub discarded_pairs: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// The partial ideal implied by Equivalent verdicts: each connected
/// component is one class, named after its smallest element.
pub fn partial_ideal(inputs: &EvalInputs, js: &JudgementSet) -> LabeledClustering {
    let mut uf = Components::new();
    for p in js.pairs.iter().filter(|p| p.verdict == Verdict::Equivalent) {
        uf.union(&p.left, &p.right);
    }
    let mut elements: Vec<&ElementRef> = inputs.universe_elements().collect();
    elements.sort();
    let mut names: HashMap<usize, ClusterId> = HashMap::new();
    let mut assignments = Vec::with_capacity(elements.len());
    for e in elements {
        let class = if uf.index.contains_key(e) {
            let id = uf.id(e);
            let root = uf.root(id);
            names
                .entry(root)
                .or_insert_with(|| ClusterId::new(format!("class:{e}")))
                .clone()
        } else {
            ClusterId::new(format!("class:{e}"))
        };
        assignments.push((e.clone(), class));
    }
    LabeledClustering::from_assignments("ideal-estimate", assignments)
}

/// Naive estimator: quality against [`partial_ideal`], averaged over the
/// elements incident to judged pairs.
pub fn estimate_quality_from_judgements(
    inputs: &EvalInputs,
    js: &JudgementSet,
) -> Result<EstimateReport> {
    let report = check_consistency(js);
    if !report.is_empty() {
        return Err(Error::InconsistentJudgements(report));
    }
    let judged = js.judged_elements();
    if judged.is_empty() {
        return Err(Error::InsufficientCoverage);
    }
    let ideal = partial_ideal(inputs, js);
    let with_ideal = EvalInputs {
        ideal: Some(ideal),
        ..inputs.clone()
    };
    let indexed = IndexedInputs::build(&with_ideal)?;
    let universe = indexed.universe();
    let mut mask = vec![false; universe.len()];
    for e in &judged {
        let slot = universe
            .slot(e)
            .ok_or_else(|| Error::UnknownElement((*e).clone()))?;
        mask[slot as usize] = true;
    }
    let metrics = evaluate_indexed(&indexed, Some(&mask), &EvalOptions::default())?;
    let covered: f64 = judged
        .iter()
        .map(|e| universe.weight(universe.slot(e).expect("checked")))
        .collect::<CompensatedSum>()
        .value();
    let coverage_weight = if universe.total_weight() > 0.0 {
        (covered / universe.total_weight()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(EstimateReport {
        label: "estimate".to_string(),
        coverage_weight,
        judged_pairs: js.judged().count(),
        discarded_pairs: js
            .pairs
            .iter()
            .filter(|p| p.verdict == Verdict::Discarded)
            .count(),
        seed: js.seed,
        metrics,
    })
}
