//! Tab-separated file formats.
//!
//! - Clustering files: `item <TAB> cluster_id [<TAB> weight]`. The weight
//!   defaults to 1.0. The epoch label comes from the caller, not the file.
//! - Element files: `element <TAB> value`, where `element` uses the
//!   `cur:`/`hist:<epoch>:`/`id:` encoding and `value` is a cluster id, an ideal
//!   class id or a weight depending on the file.
//!
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ClusterId, ElementRef, LabeledClustering, Snapshot, WeightMap};

/// Whether a clustering file holds current or historical items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItemSide {
    Current,
    Historical { epoch: String },
}

impl ItemSide {
    fn element(&self, item: &str) -> ElementRef {
        match self {
            ItemSide::Current => ElementRef::current(item),
            ItemSide::Historical { epoch } => ElementRef::historical(epoch, item),
        }
    }

    fn epoch(&self) -> &str {
        match self {
            ItemSide::Current => "",
            ItemSide::Historical { epoch } => epoch,
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-comment lines as `(line number, fields)`.
pub(crate) fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(|(n, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((n + 1, line.split('\t').collect()))
        }
    })
}

fn parse_error(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_weight(source: &str, line: usize, field: &str) -> Result<f64> {
    let w: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(source, line, format!("`{field}` is not a number")))?;
    if !(w.is_finite() && w > 0.0) {
        return Err(parse_error(
            source,
            line,
            format!("weight {field} must be positive and finite"),
        ));
    }
    Ok(w)
}

fn non_empty<'a>(source: &str, line: usize, field: &'a str, what: &str) -> Result<&'a str> {
    if field.is_empty() {
        Err(parse_error(source, line, format!("empty {what}")))
    } else {
        Ok(field)
    }
}

/// Parses a clustering file. Repeated items are kept so that validation can
/// report them; the last weight wins.
pub fn parse_clustering_tsv(text: &str, source: &str, side: &ItemSide) -> Result<Snapshot> {
    let mut assignments = Vec::new();
    let mut weights = WeightMap::new();
    for (line, fields) in records(text) {
        let (item, cluster, weight) = match fields.as_slice() {
            [item, cluster] => (*item, *cluster, 1.0),
            [item, cluster, w] => (*item, *cluster, parse_weight(source, line, w)?),
            _ => {
                return Err(parse_error(
                    source,
                    line,
                    format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                ))
            }
        };
        let item = non_empty(source, line, item, "item id")?;
        let cluster = non_empty(source, line, cluster, "cluster id")?;
        let e = side.element(item);
        weights.insert(e.clone(), weight)?;
        assignments.push((e, ClusterId::new(cluster)));
    }
    let clustering = LabeledClustering::from_assignments(side.epoch(), assignments);
    Ok(Snapshot::new(clustering, weights))
}

pub fn read_clustering_tsv(path: &Path, side: &ItemSide) -> Result<Snapshot> {
    parse_clustering_tsv(&read_to_string(path)?, &path.display().to_string(), side)
}

/// Writes `item <TAB> cluster_id <TAB> weight`, sorted by cluster then item.
pub fn format_clustering_tsv(snapshot: &Snapshot) -> Result<String> {
    let mut out = String::from("# item\tcluster_id\tweight\n");
    let canonical = snapshot.clustering.canonical();
    for (id, members) in canonical {
        for e in members {
            let w = snapshot.weights.require(&e)?;
            writeln!(out, "{}\t{}\t{}", e.external_id(), id, w).expect("string write");
        }
    }
    Ok(out)
}

/// Parses `element <TAB> value` lines.
pub fn parse_element_pairs(text: &str, source: &str) -> Result<Vec<(usize, ElementRef, String)>> {
    records(text)
        .map(|(line, fields)| match fields.as_slice() {
            [element, value] => {
                let e = element
                    .parse::<ElementRef>()
                    .map_err(|err| parse_error(source, line, err.to_string()))?;
                let value = non_empty(source, line, value, "value")?;
                Ok((line, e, value.to_string()))
            }
            _ => Err(parse_error(
                source,
                line,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            )),
        })
        .collect()
}

/// Parses an element clustering (`element <TAB> cluster_id`), as used by ideal
/// files and materialized Base/Exp files.
pub fn parse_element_clustering(text: &str, source: &str, epoch: &str) -> Result<LabeledClustering> {
    let pairs = parse_element_pairs(text, source)?;
    Ok(LabeledClustering::from_assignments(
        epoch,
        pairs.into_iter().map(|(_, e, c)| (e, ClusterId::from(c))),
    ))
}

pub fn parse_element_weights(text: &str, source: &str) -> Result<WeightMap> {
    let mut w = WeightMap::new();
    for (line, e, value) in parse_element_pairs(text, source)? {
        let v = parse_weight(source, line, &value)?;
        w.insert(e, v)?;
    }
    Ok(w)
}

/// `element <TAB> cluster_id`, sorted by cluster then element.
pub fn format_element_clustering(c: &LabeledClustering) -> String {
    let mut out = String::from("# element\tcluster_id\n");
    for (id, members) in c.canonical() {
        for e in members {
            writeln!(out, "{e}\t{id}").expect("string write");
        }
    }
    out
}

/// `element <TAB> weight`, sorted by element. Weights are written in their
/// shortest round-trip decimal form.
pub fn format_element_weights(w: &WeightMap) -> String {
    let mut out = String::from("# element\tweight\n");
    for (e, v) in w.sorted() {
        writeln!(out, "{e}\t{v}").expect("string write");
    }
    out
}
