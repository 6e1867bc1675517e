//! Expert score tables: delimited rows `image_id, rater_id, trial_id, e1..e5`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{InterchangeError, Parsed};

const KEY_COLUMNS: [&str; 3] = ["image_id", "rater_id", "trial_id"];
const COUNT_COLUMNS: [&str; 5] = ["e1", "e2", "e3", "e4", "e5"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScoreKey {
    pub image_id: String,
    pub rater_id: String,
    pub trial_id: String,
}

impl ScoreKey {
    pub fn new(
        image_id: impl Into<String>,
        rater_id: impl Into<String>,
        trial_id: impl Into<String>,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            rater_id: rater_id.into(),
            trial_id: trial_id.into(),
        }
    }
}

/// Error counts for E.1 through E.5, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct ErrorCounts(pub [u32; 5]);

impl ErrorCounts {
    pub fn get(&self, error: crate::ErrorType) -> u32 {
        self.0[error.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RaterScoreTable {
    rows: BTreeMap<ScoreKey, ErrorCounts>,
}

impl RaterScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous entry if the key was already present.
    pub fn insert(&mut self, key: ScoreKey, counts: ErrorCounts) -> Option<ErrorCounts> {
        self.rows.insert(key, counts)
    }

    pub fn get(&self, key: &ScoreKey) -> Option<&ErrorCounts> {
        self.rows.get(key)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ScoreKey, &ErrorCounts)> {
        self.rows.iter()
    }

    /// Distinct `(rater_id, trial_id)` pairs present.
    pub fn sessions(&self) -> Vec<(String, String)> {
        let mut s: Vec<_> = self
            .rows
            .keys()
            .map(|k| (k.rater_id.clone(), k.trial_id.clone()))
            .collect();
        s.sort();
        s.dedup();
        s
    }

    /// Per-image counts of one rating session.
    pub fn session(&self, rater_id: &str, trial_id: &str) -> BTreeMap<String, ErrorCounts> {
        self.rows
            .iter()
            .filter(|(k, _)| k.rater_id == rater_id && k.trial_id == trial_id)
            .map(|(k, v)| (k.image_id.clone(), *v))
            .collect()
    }

    /// Per-image counts of every session of a trial (first rater wins when
    /// several raters share a trial id).
    pub fn trial(&self, trial_id: &str) -> BTreeMap<String, ErrorCounts> {
        let mut out = BTreeMap::new();
        for (k, v) in self.rows.iter().filter(|(k, _)| k.trial_id == trial_id) {
            out.entry(k.image_id.clone()).or_insert(*v);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = KEY_COLUMNS
            .iter()
            .chain(COUNT_COLUMNS.iter())
            .copied()
            .collect();
        w.write_record(&header).expect("in-memory write");
        for (k, v) in &self.rows {
            let mut rec = vec![k.image_id.clone(), k.rater_id.clone(), k.trial_id.clone()];
            rec.extend(v.0.iter().map(u32::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

impl FromIterator<(ScoreKey, ErrorCounts)> for RaterScoreTable {
    fn from_iter<I: IntoIterator<Item = (ScoreKey, ErrorCounts)>>(iter: I) -> Self {
        Self {
            rows: iter.into_iter().collect(),
        }
    }
}

/// Parses a comma-separated score file with a header row.
pub fn parse_scores(bytes: &[u8]) -> Result<Parsed<RaterScoreTable>, InterchangeError> {
    let err = |m: String| InterchangeError::Scores(m);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);

    let mut key_idx = [0usize; 3];
    for (slot, name) in key_idx.iter_mut().zip(KEY_COLUMNS) {
        *slot = column(name).ok_or_else(|| err(format!("missing column `{name}`")))?;
    }
    let mut count_idx = [0usize; 5];
    for (slot, name) in count_idx.iter_mut().zip(COUNT_COLUMNS) {
        *slot = column(name).ok_or_else(|| err(format!("missing error column `{name}`")))?;
    }
    let mut warnings: Vec<String> = headers
        .iter()
        .filter(|h| !KEY_COLUMNS.contains(h) && !COUNT_COLUMNS.contains(h))
        .map(|h| format!("ignoring unknown column `{h}`"))
        .collect();
    warnings.dedup();

    let mut table = RaterScoreTable::new();
    for (line, rec) in reader.records().enumerate() {
        let row = line + 2;
        let rec = rec.map_err(|e| err(format!("row {row}: {e}")))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let key = ScoreKey::new(field(key_idx[0]), field(key_idx[1]), field(key_idx[2]));
        if key.image_id.is_empty() {
            return Err(err(format!("row {row}: empty image_id")));
        }
        let mut counts = [0u32; 5];
        for (k, &i) in count_idx.iter().enumerate() {
            let raw = field(i);
            let v: i64 = raw.parse().map_err(|_| {
                err(format!(
                    "row {row}: `{}` = `{raw}` is not an integer",
                    COUNT_COLUMNS[k]
                ))
            })?;
            if v < 0 {
                return Err(err(format!(
                    "row {row}: negative count {v} for `{}`",
                    COUNT_COLUMNS[k]
                )));
            }
            counts[k] =
                u32::try_from(v).map_err(|_| err(format!("row {row}: count {v} too large")))?;
        }
        if table.insert(key.clone(), ErrorCounts(counts)).is_some() {
            return Err(err(format!(
                "row {row}: duplicate key ({}, {}, {})",
                key.image_id, key.rater_id, key.trial_id
            )));
        }
    }
    Ok(Parsed {
        value: table,
        warnings,
    })
}
