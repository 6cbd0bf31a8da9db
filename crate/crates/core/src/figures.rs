//! The ten worked examples, embedded so that `ideval figures` needs no files.
//!
//! Each fixture is the checked-in directory `fixtures/figNN/` compiled into
//! the binary: a run config, historical/base/exp clusterings, a fully
//! materialized ideal clustering and the expected metric table.

use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalOptions, MetricsReport};
use crate::numeric::{format_percent, percent_hundredths};
use crate::report::metric_values;
use crate::transform::EvalInputs;

pub struct FigureFixture {
    pub id: u8,
    pub caption: &'static str,
    config: &'static str,
    files: [(&'static str, &'static str); 4],
    expected: &'static str,
}

macro_rules! fixture {
    ($id:expr, $dir:literal) => {
        FigureFixture {
            id: $id,
            caption: include_str!(concat!("../fixtures/", $dir, "/caption.txt")),
            config: include_str!(concat!("../fixtures/", $dir, "/config.json")),
            files: [
                ("hist.tsv", include_str!(concat!("../fixtures/", $dir, "/hist.tsv"))),
                ("base.tsv", include_str!(concat!("../fixtures/", $dir, "/base.tsv"))),
                ("exp.tsv", include_str!(concat!("../fixtures/", $dir, "/exp.tsv"))),
                ("ideal.tsv", include_str!(concat!("../fixtures/", $dir, "/ideal.tsv"))),
            ],
            expected: include_str!(concat!("../fixtures/", $dir, "/expected.tsv")),
        }
    };
}

static FIXTURES: [FigureFixture; 10] = [
    fixture!(1, "fig01"),
    fixture!(2, "fig02"),
    fixture!(3, "fig03"),
    fixture!(4, "fig04"),
    fixture!(5, "fig05"),
    fixture!(6, "fig06"),
    fixture!(7, "fig07"),
    fixture!(8, "fig08"),
    fixture!(9, "fig09"),
    fixture!(10, "fig10"),
];

pub fn fixtures() -> &'static [FigureFixture] {
    &FIXTURES
}

pub fn fixture(id: u8) -> Option<&'static FigureFixture> {
    FIXTURES.iter().find(|f| f.id == id)
}

impl FigureFixture {
    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_json_str(self.config, Path::new(""))
    }

    /// Contents of an embedded file by name (`hist.tsv`, `base.tsv`, ...).
    pub fn file(&self, name: &str) -> Option<&'static str> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn inputs(&self) -> Result<EvalInputs> {
        self.config()?.load_inputs_with(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            self.file(name).map(str::to_string).ok_or_else(|| {
                Error::InvalidConfig(format!("figure {} has no file {}", self.id, p.display()))
            })
        })
    }

    /// Expected `(metric, percent)` rows.
    pub fn expected(&self) -> Result<Vec<(String, f64)>> {
        crate::io::records(self.expected)
            .map(|(line, fields)| match fields.as_slice() {
                [name, value] => value
                    .parse::<f64>()
                    .map(|v| (name.to_string(), v))
                    .map_err(|_| Error::Parse {
                        path: format!("figure {} expected.tsv", self.id),
                        line,
                        message: format!("`{value}` is not a number"),
                    }),
                _ => Err(Error::Parse {
                    path: format!("figure {} expected.tsv", self.id),
                    line,
                    message: "expected 2 fields".into(),
                }),
            })
            .collect()
    }

    pub fn evaluate(&self) -> Result<MetricsReport> {
        evaluate(&self.inputs()?, &EvalOptions::default())
    }

    /// Recomputes the fixture and compares every expected cell.
    pub fn check(&self) -> Result<FigureCheck> {
        let report = self.evaluate()?;
        let computed = metric_values(&report);
        let cells = self
            .expected()?
            .into_iter()
            .map(|(metric, expected_percent)| {
                let value = computed
                    .iter()
                    .find(|(n, _)| *n == metric)
                    .map(|(_, v)| *v);
                let (rendered, matches) = match value {
                    Some(v) => (
                        format_percent(v),
                        percent_hundredths(v) == (expected_percent * 100.0).round() as i64,
                    ),
                    None => ("missing".to_string(), false),
                };
                CellCheck {
                    metric,
                    expected_percent,
                    computed: value,
                    rendered,
                    matches,
                }
            })
            .collect();
        Ok(FigureCheck {
            id: self.id,
            caption: self.caption.trim().to_string(),
            cells,
            report,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellCheck {
    pub metric: String,
    pub expected_percent: f64,
    /// Computed fraction.
    pub computed: Option<f64>,
    pub rendered: String,
    pub matches: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FigureCheck {
    pub id: u8,
    pub caption: String,
    pub cells: Vec<CellCheck>,
    pub report: MetricsReport,
}

impl FigureCheck {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.matches)
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &CellCheck> + '_ {
        self.cells.iter().filter(|c| !c.matches)
    }
}
