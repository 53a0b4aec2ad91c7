//! Co-occurrence heatmaps for hypothesis generation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MiningError;
use crate::chronicle::{Chronicle, Event, Stream};

/// How events of one axis are sorted into categories.
///
/// Text forms: `food` (one category per resolved catalog item, falling back
/// to the normalized dish name), a stream name such as `sleep` (one
/// category), or `stream:attr:c1,c2,...` (value bins split at the given cut
/// points).
#[derive(Clone, Debug, PartialEq)]
pub enum CategorySpec {
    Dishes,
    Stream(Stream),
    Binned { stream: Stream, attr: String, cuts: Vec<f64> },
}

impl fmt::Display for CategorySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategorySpec::Dishes => f.write_str("food"),
            CategorySpec::Stream(s) => write!(f, "{s}"),
            CategorySpec::Binned { stream, attr, cuts } => {
                let cuts: Vec<String> = cuts.iter().map(|c| fmt_num(*c)).collect();
                write!(f, "{stream}:{attr}:{}", cuts.join(","))
            }
        }
    }
}

impl FromStr for CategorySpec {
    type Err = MiningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MiningError::BadCategorySpec(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() >= 3 {
            let cut_text = parts[parts.len() - 1];
            let cuts: Option<Vec<f64>> = cut_text.split(',').map(|c| c.trim().parse::<f64>().ok()).collect();
            if let Some(cuts) = cuts {
                let stream: Stream = parts[..parts.len() - 2].join(":").parse().map_err(|_| bad())?;
                let attr = parts[parts.len() - 2].to_string();
                if attr.is_empty() || cuts.is_empty() || cuts.windows(2).any(|w| w[0] >= w[1]) || cuts.iter().any(|c| !c.is_finite()) {
                    return Err(bad());
                }
                return Ok(CategorySpec::Binned { stream, attr, cuts });
            }
        }
        match s.parse::<Stream>() {
            Ok(Stream::Food) => Ok(CategorySpec::Dishes),
            Ok(stream) => Ok(CategorySpec::Stream(stream)),
            Err(_) => Err(bad()),
        }
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl CategorySpec {
    /// Fixed labels, or `None` when labels come from the data.
    fn fixed_labels(&self) -> Option<Vec<String>> {
        match self {
            CategorySpec::Dishes => None,
            CategorySpec::Stream(s) => Some(vec![s.to_string()]),
            CategorySpec::Binned { attr, cuts, .. } => {
                let mut labels = vec![format!("{attr}<{}", fmt_num(cuts[0]))];
                for w in cuts.windows(2) {
                    labels.push(format!("{attr}[{},{})", fmt_num(w[0]), fmt_num(w[1])));
                }
                labels.push(format!("{attr}>={}", fmt_num(*cuts.last().expect("non-empty cuts"))));
                Some(labels)
            }
        }
    }

    pub fn labels(&self, chronicle: &Chronicle) -> Vec<String> {
        match self.fixed_labels() {
            Some(l) => l,
            None => chronicle
                .events()
                .iter()
                .filter_map(|e| e.as_food().map(|f| f.category()))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }

    /// Category label of one event, if it belongs to this axis.
    pub fn categorize(&self, event: &Event) -> Option<String> {
        match self {
            CategorySpec::Dishes => event.as_food().map(|f| f.category()),
            CategorySpec::Stream(s) => (event.stream() == *s).then(|| s.to_string()),
            CategorySpec::Binned { stream, attr, cuts } => {
                if event.stream() != *stream {
                    return None;
                }
                let v = event.attr(attr)?;
                let bin = cuts.iter().filter(|c| v >= **c).count();
                self.fixed_labels().map(|l| l[bin].clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub row_spec: String,
    pub col_spec: String,
    pub window_minutes: f64,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// Counts pairs (a, b) with a in row category i, b in column category j and
/// `a.start < b.start <= a.start + window`.
pub fn cooccurrence_matrix(
    rows: &CategorySpec,
    cols: &CategorySpec,
    window_ms: i64,
    chronicle: &Chronicle,
) -> Result<Heatmap, MiningError> {
    if window_ms <= 0 {
        return Err(MiningError::InvalidWindow);
    }
    let row_labels = rows.labels(chronicle);
    let col_labels = cols.labels(chronicle);
    let row_index: BTreeMap<&str, usize> = row_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let col_index: BTreeMap<&str, usize> = col_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let events = chronicle.events();
    let row_of: Vec<Option<usize>> = events
        .iter()
        .map(|e| rows.categorize(e).and_then(|l| row_index.get(l.as_str()).copied()))
        .collect();
    let col_of: Vec<Option<usize>> = events
        .iter()
        .map(|e| cols.categorize(e).and_then(|l| col_index.get(l.as_str()).copied()))
        .collect();

    let mut counts = vec![vec![0u64; col_labels.len()]; row_labels.len()];
    for (a, ra) in row_of.iter().enumerate() {
        let Some(i) = ra else { continue };
        let t = events[a].start().millis();
        let first = events.partition_point(|e| e.start().millis() <= t);
        for (b, e) in events.iter().enumerate().skip(first) {
            if e.start().millis() > t + window_ms {
                break;
            }
            if let Some(j) = col_of[b] {
                counts[*i][j] += 1;
            }
        }
    }
    Ok(Heatmap {
        row_spec: rows.to_string(),
        col_spec: cols.to_string(),
        window_minutes: window_ms as f64 / crate::time::MINUTE_MS as f64,
        rows: row_labels,
        cols: col_labels,
        counts,
    })
}

impl Heatmap {
    /// Rows are row categories, columns are column categories.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["category".to_string()];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, row) in self.rows.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 labels")
    }

    pub fn get(&self, row: &str, col: &str) -> Option<u64> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.cols.iter().position(|c| c == col)?;
        Some(self.counts[i][j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub row: String,
    pub col: String,
    pub count: u64,
}

/// Cells with at least `min_support` pairs, most frequent first; ties go to
/// the smaller (row, col) label pair.
pub fn generate_candidates(heatmap: &Heatmap, min_support: u64) -> Vec<Candidate> {
    let min_support = min_support.max(1);
    let mut out = Vec::new();
    for (i, row) in heatmap.counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            if count >= min_support {
                out.push(Candidate {
                    row: heatmap.rows[i].clone(),
                    col: heatmap.cols[j].clone(),
                    count,
                });
            }
        }
    }
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.row.cmp(&b.row)).then_with(|| a.col.cmp(&b.col)));
    out
}
