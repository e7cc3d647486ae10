//! Impression records and dataset validation.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Level of the protected characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for GroupId {
    fn from(v: u32) -> Self {
        GroupId(v)
    }
}

/// One logged impression: an item shown for a query at a 1-based position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImpressionRecord<T> {
    pub query_id: u64,
    pub item_id: u64,
    pub group: GroupId,
    pub score: T,
    pub position: u32,
    pub label: u32,
}

/// What a dataset is validated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    /// Largest admissible label; 1 for binary responses.
    pub max_label: u32,
    /// Groups that must each have at least one record. `None` accepts
    /// whatever groups appear.
    pub groups: Option<Vec<GroupId>>,
}

impl Schema {
    pub fn binary() -> Self {
        Schema {
            max_label: 1,
            groups: None,
        }
    }

    pub fn with_groups(max_label: u32, groups: Vec<GroupId>) -> Self {
        Schema {
            max_label,
            groups: Some(groups),
        }
    }
}

/// Records regrouped by query and ordered by position, with stratum counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDataset<T> {
    records: Vec<ImpressionRecord<T>>,
    queries: Vec<Range<usize>>,
    groups: Vec<GroupId>,
    group_counts: BTreeMap<GroupId, usize>,
    label_counts: BTreeMap<u32, usize>,
    max_position: u32,
    schema: Schema,
}

/// Checks the record invariants and groups the rows by query.
///
/// Within a query the positions must be exactly `1..=J`. Groups listed in
/// the schema keep their declared order (the first one is the reference
/// group for equalized-odds constraints); otherwise groups are sorted.
pub fn validate_dataset<T: Scalar>(
    records: Vec<ImpressionRecord<T>>,
    schema: &Schema,
) -> Result<ValidatedDataset<T>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut records = records;
    for r in &records {
        if r.position == 0 {
            return Err(Error::InvalidPosition {
                query_id: r.query_id,
                item_id: r.item_id,
            });
        }
        if r.label > schema.max_label {
            return Err(Error::LabelOutOfRange {
                label: r.label,
                max: schema.max_label,
            });
        }
        if !r.score.is_finite() {
            return Err(Error::NonFiniteInput(r.score.as_f64()));
        }
    }
    records.sort_by_key(|r| (r.query_id, r.position));

    let mut queries = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let qid = records[start].query_id;
        let mut end = start;
        while end < records.len() && records[end].query_id == qid {
            let expected = (end - start + 1) as u32;
            let pos = records[end].position;
            if pos != expected {
                return Err(if pos + 1 == expected {
                    Error::DuplicatePosition {
                        query_id: qid,
                        position: pos,
                    }
                } else {
                    Error::NonContiguousPositions {
                        query_id: qid,
                        missing: expected,
                    }
                });
            }
            end += 1;
        }
        queries.push(start..end);
        start = end;
    }

    let mut group_counts = BTreeMap::new();
    let mut label_counts = BTreeMap::new();
    let mut max_position = 0;
    for r in &records {
        *group_counts.entry(r.group).or_insert(0usize) += 1;
        *label_counts.entry(r.label).or_insert(0usize) += 1;
        max_position = max_position.max(r.position);
    }

    let groups = match &schema.groups {
        Some(declared) => {
            for g in declared {
                if !group_counts.contains_key(g) {
                    return Err(Error::MissingGroup(*g));
                }
            }
            let mut groups = declared.clone();
            // undeclared groups that still show up go after the declared ones
            for g in group_counts.keys() {
                if !groups.contains(g) {
                    groups.push(*g);
                }
            }
            groups
        }
        None => group_counts.keys().copied().collect(),
    };

    Ok(ValidatedDataset {
        records,
        queries,
        groups,
        group_counts,
        label_counts,
        max_position,
        schema: schema.clone(),
    })
}

impl<T: Scalar> ValidatedDataset<T> {
    pub fn records(&self) -> &[ImpressionRecord<T>] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ImpressionRecord<T>> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Queries in ascending id order, each as a position-ordered slice.
    pub fn queries(&self) -> impl Iterator<Item = &[ImpressionRecord<T>]> + '_ {
        self.queries.iter().map(move |r| &self.records[r.clone()])
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.groups
    }

    pub fn group_counts(&self) -> &BTreeMap<GroupId, usize> {
        &self.group_counts
    }

    pub fn label_counts(&self) -> &BTreeMap<u32, usize> {
        &self.label_counts
    }

    /// Largest position seen (J).
    pub fn max_position(&self) -> u32 {
        self.max_position
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Applies `f` to every score, keeping the grouping intact.
    pub fn map_scores<F>(&self, mut f: F) -> Result<ValidatedDataset<T>>
    where
        F: FnMut(&ImpressionRecord<T>) -> Result<T>,
    {
        let mut out = self.clone();
        for r in out.records.iter_mut() {
            r.score = f(r)?;
        }
        Ok(out)
    }
}
