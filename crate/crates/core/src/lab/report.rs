use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{ks_critical_value, ks_two_sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The check could not be decided, e.g. the sampler did not mix.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Relation {
    pub fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Le => value <= threshold,
            Relation::Lt => value < threshold,
            Relation::Ge => value >= threshold,
            Relation::Gt => value > threshold,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Measured value; `None` encodes a non-finite value (see `note`).
    pub value: Option<f64>,
    pub relation: Relation,
    pub threshold: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Check {
        let status = if relation.holds(value, threshold) { Status::Pass } else { Status::Fail };
        Check {
            name: name.into(),
            value: value.is_finite().then_some(value),
            relation,
            threshold,
            status,
            note: (!value.is_finite()).then(|| format!("value is {value}")),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }

    /// Downgrade a decided check to inconclusive.
    pub fn inconclusive(mut self, reason: impl Into<String>) -> Check {
        self.status = Status::Inconclusive;
        self.note = Some(reason.into());
        self
    }
}

/// Rows of a CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataTable {
    /// Lines written before the header, without the leading `# `.
    pub preamble: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl DataTable {
    pub fn new(header: &[&str]) -> DataTable {
        DataTable {
            preamble: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for line in &self.preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }
}

/// Number formatting used in every data file.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Outcome of a pipeline: the summary (serialized to `summary.json`) plus
/// the data tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub status: Status,
    pub checks: Vec<Check>,
    pub statistics: BTreeMap<String, serde_json::Value>,
    /// Set when the target law is only conjectured.
    #[serde(default)]
    pub conjectural: bool,
    #[serde(skip)]
    pub data: DataTable,
    /// Additional `(file name, table)` pairs.
    #[serde(skip)]
    pub extra: Vec<(String, DataTable)>,
}

impl Report {
    pub fn new(kind: &str) -> Report {
        Report {
            kind: kind.into(),
            status: Status::Pass,
            checks: Vec::new(),
            statistics: BTreeMap::new(),
            conjectural: false,
            data: DataTable::default(),
            extra: Vec::new(),
        }
    }

    pub fn stat(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.statistics.insert(key.into(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
        self.status = overall(&self.checks);
    }

    pub fn check_by_name(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn overall(checks: &[Check]) -> Status {
    if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else if checks.iter().any(|c| c.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    }
}

/// Two-sample KS statistic with asymptotic critical values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    /// `(α, c(α) sqrt((n + m)/(n m)))`.
    pub critical_values: Vec<(f64, f64)>,
}

pub const KS_LEVELS: [f64; 4] = [0.1, 0.05, 0.01, 0.001];

pub fn ks_report(a: &[f64], b: &[f64]) -> Result<KsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("KS test needs two nonempty samples"));
    }
    let r = ks_two_sample(a, b);
    Ok(KsReport {
        statistic: r.statistic,
        p_value: r.p_value,
        critical_values: KS_LEVELS
            .iter()
            .map(|&alpha| (alpha, ks_critical_value(alpha, a.len(), b.len())))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ks_edge_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_report(&a, &a).unwrap().statistic, 0.0);
        assert_eq!(ks_report(&a, &[10.0, 11.0]).unwrap().statistic, 1.0);
        assert!(ks_report(&a, &[]).is_err());
    }

    #[test]
    fn gaussian_null_rejection_rate() {
        let mut rejections = 0;
        for rep in 0..100u64 {
            let mut rng = stream_rng(99, rep);
            let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = ks_report(&x, &y).unwrap();
            let crit = r.critical_values.iter().find(|(a, _)| *a == 0.01).unwrap().1;
            rejections += usize::from(r.statistic >= crit);
        }
        assert!(rejections <= 2, "{rejections}");
    }

    #[test]
    fn status_aggregation() {
        let mut r = Report::new("t");
        r.check(Check::new("a", 1.0, Relation::Le, 2.0));
        assert_eq!(r.status, Status::Pass);
        r.check(Check::new("b", 1.0, Relation::Le, 2.0).inconclusive("no mixing"));
        assert_eq!(r.status, Status::Inconclusive);
        r.check(Check::new("c", 3.0, Relation::Lt, 2.0));
        assert_eq!(r.status, Status::Fail);
        let json = serde_json::to_string(&r).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back.checks, r.checks);
        let inf = Check::new("d", f64::NEG_INFINITY, Relation::Lt, -0.05);
        assert_eq!((inf.status, inf.value), (Status::Pass, None));
    }
}
