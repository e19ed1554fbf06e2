//! Data model: microdata tables, QI-grouping and SA histograms.
//!
//! SA values are re-encoded at ingestion to dense ids `1..=m` in order of
//! first appearance; the original labels stay in the schema for output. QI
//! values are stored as indices into the per-attribute domain.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Dense sensitive-attribute id, `1..=m`.
pub type SaValue = u32;
/// Stable row id: the position of the row in the input table.
pub type RowId = usize;

/// A categorical attribute with an ordered domain of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub domain: Vec<String>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, domain: Vec<String>) -> Self {
        Attribute {
            name: name.into(),
            domain,
        }
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.domain
            .iter()
            .position(|v| v == label)
            .map(|i| i as u32)
    }

    pub fn label(&self, index: u32) -> &str {
        &self.domain[index as usize]
    }
}

/// Table schema: `d` QI attributes plus one sensitive attribute whose domain
/// lists the original SA labels in dense-id order (`id = position + 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub qi_attrs: Vec<Attribute>,
    pub sa_attr: Attribute,
}

impl Schema {
    pub fn d(&self) -> usize {
        self.qi_attrs.len()
    }

    pub fn m(&self) -> usize {
        self.sa_attr.domain.len()
    }

    pub fn sa_label(&self, v: SaValue) -> &str {
        &self.sa_attr.domain[(v - 1) as usize]
    }

    fn validate(&self) -> Result<()> {
        if self.qi_attrs.is_empty() {
            return Err(Error::Config(
                "schema needs at least one QI attribute".into(),
            ));
        }
        if self.sa_attr.domain.is_empty() {
            return Err(Error::Config("SA domain is empty".into()));
        }
        let mut names: Vec<&str> = self
            .qi_attrs
            .iter()
            .map(|a| a.name.as_str())
            .chain(std::iter::once(self.sa_attr.name.as_str()))
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("attribute names must be unique".into()));
        }
        for attr in &self.qi_attrs {
            if attr.domain.is_empty() {
                return Err(Error::Config(format!(
                    "attribute {} has an empty domain",
                    attr.name
                )));
            }
        }
        Ok(())
    }
}

/// One tuple: QI values as domain indices plus a dense SA id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub qi: Vec<u32>,
    pub sa: SaValue,
}

/// The raw microdata table. Row ids are positions in `rows`.
#[derive(Debug, Clone)]
pub struct MicrodataTable {
    pub schema: Schema,
    pub rows: Vec<Row>,
}

impl MicrodataTable {
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Self> {
        schema.validate()?;
        let d = schema.d();
        let m = schema.m() as u32;
        for (id, row) in rows.iter().enumerate() {
            if row.qi.len() != d {
                return Err(Error::Config(format!(
                    "row {id} has {} QI values, expected {d}",
                    row.qi.len()
                )));
            }
            for (i, &v) in row.qi.iter().enumerate() {
                if v as usize >= schema.qi_attrs[i].domain.len() {
                    return Err(Error::Config(format!(
                        "row {id}: QI index {v} out of domain for attribute {}",
                        schema.qi_attrs[i].name
                    )));
                }
            }
            if row.sa == 0 || row.sa > m {
                return Err(Error::Config(format!(
                    "row {id}: SA id {} outside [1, {m}]",
                    row.sa
                )));
            }
        }
        Ok(MicrodataTable { schema, rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.schema.d()
    }

    pub fn m(&self) -> usize {
        self.schema.m()
    }

    pub fn global_histogram(&self) -> SaHistogram {
        let mut h = SaHistogram::new();
        for row in &self.rows {
            h.increment(row.sa);
        }
        h
    }

    /// Check global l-eligibility, naming the over-frequent SA label on failure.
    pub fn check_l_eligible(&self, l: u32) -> Result<()> {
        let hist = self.global_histogram();
        if hist.is_l_eligible(l) {
            return Ok(());
        }
        let v = hist.pillars()?[0];
        Err(Error::Ineligible {
            value: self.schema.sa_label(v).to_string(),
            count: hist.count(v),
            total: hist.total(),
            l,
        })
    }
}

/// Incremental builder that infers domains and dense SA ids from labels.
#[derive(Debug)]
pub struct TableBuilder {
    qi_names: Vec<String>,
    sa_name: String,
    declared: HashMap<String, Vec<String>>,
    qi_domains: Vec<Vec<String>>,
    qi_index: Vec<HashMap<String, u32>>,
    sa_domain: Vec<String>,
    sa_index: HashMap<String, SaValue>,
    rows: Vec<Row>,
}

impl TableBuilder {
    pub fn new<S: AsRef<str>>(qi_names: &[S], sa_name: &str) -> Self {
        let qi_names: Vec<String> = qi_names.iter().map(|s| s.as_ref().to_string()).collect();
        let d = qi_names.len();
        TableBuilder {
            qi_names,
            sa_name: sa_name.to_string(),
            declared: HashMap::new(),
            qi_domains: vec![Vec::new(); d],
            qi_index: vec![HashMap::new(); d],
            sa_domain: Vec::new(),
            sa_index: HashMap::new(),
            rows: Vec::new(),
        }
    }

    /// Fix an attribute domain up front instead of inferring it from the data.
    pub fn declare_qi_domain<S: AsRef<str>>(&mut self, name: &str, values: &[S]) -> Result<()> {
        let i = self
            .qi_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("declared domain for unknown column {name}")))?;
        self.qi_domains[i] = values.iter().map(|v| v.as_ref().to_string()).collect();
        self.qi_index[i] = self.qi_domains[i]
            .iter()
            .enumerate()
            .map(|(k, v)| (v.clone(), k as u32))
            .collect();
        self.declared
            .insert(name.to_string(), self.qi_domains[i].clone());
        Ok(())
    }

    pub fn push_row<S: AsRef<str>>(&mut self, qi: &[S], sa: &str) -> Result<()> {
        if qi.len() != self.qi_names.len() {
            return Err(Error::Config(format!(
                "row {} has {} QI values, expected {}",
                self.rows.len(),
                qi.len(),
                self.qi_names.len()
            )));
        }
        let mut indices = Vec::with_capacity(qi.len());
        for (i, val) in qi.iter().enumerate() {
            let val = val.as_ref();
            if val == "*" {
                return Err(Error::Config(format!(
                    "column {}: the literal value \"*\" is reserved for suppressed cells",
                    self.qi_names[i]
                )));
            }
            let idx = match self.qi_index[i].get(val) {
                Some(&idx) => idx,
                None => {
                    if self.declared.contains_key(&self.qi_names[i]) {
                        return Err(Error::Config(format!(
                            "column {}: value {val:?} not in its declared domain",
                            self.qi_names[i]
                        )));
                    }
                    let idx = self.qi_domains[i].len() as u32;
                    self.qi_domains[i].push(val.to_string());
                    self.qi_index[i].insert(val.to_string(), idx);
                    idx
                }
            };
            indices.push(idx);
        }
        let sa_id = match self.sa_index.get(sa) {
            Some(&id) => id,
            None => {
                let id = self.sa_domain.len() as SaValue + 1;
                self.sa_domain.push(sa.to_string());
                self.sa_index.insert(sa.to_string(), id);
                id
            }
        };
        self.rows.push(Row {
            qi: indices,
            sa: sa_id,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<MicrodataTable> {
        let qi_attrs = self
            .qi_names
            .into_iter()
            .zip(self.qi_domains)
            .map(|(name, domain)| Attribute { name, domain })
            .collect();
        let schema = Schema {
            qi_attrs,
            sa_attr: Attribute::new(self.sa_name, self.sa_domain),
        };
        MicrodataTable::new(schema, self.rows)
    }
}

/// Multiset of SA values: `h(·, v)` per value plus the running total.
/// Only nonzero counts are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SaHistogram {
    counts: BTreeMap<SaValue, u64>,
    total: u64,
}

impl SaHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I: IntoIterator<Item = (SaValue, u64)>>(counts: I) -> Self {
        let mut h = SaHistogram::new();
        for (v, c) in counts {
            if c > 0 {
                *h.counts.entry(v).or_insert(0) += c;
                h.total += c;
            }
        }
        h
    }

    /// Build from a dense count vector, index `i` holding the count of SA value `i + 1`.
    pub fn from_dense(counts: &[u64]) -> Self {
        Self::from_counts(
            counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as SaValue + 1, c)),
        )
    }

    pub fn to_dense(&self, m: usize) -> Vec<u64> {
        let mut dense = vec![0; m];
        for (&v, &c) in &self.counts {
            dense[(v - 1) as usize] = c;
        }
        dense
    }

    pub fn increment(&mut self, v: SaValue) {
        *self.counts.entry(v).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn decrement(&mut self, v: SaValue) -> Result<()> {
        match self.counts.get_mut(&v) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(&v);
            }
            None => {
                return Err(Error::ValueAbsent {
                    group: usize::MAX,
                    value: v,
                })
            }
        }
        self.total -= 1;
        Ok(())
    }

    pub fn count(&self, v: SaValue) -> u64 {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Pillar height `h`: the largest count, 0 for an empty histogram.
    pub fn pillar_height(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// The SA values at pillar height, ascending. Errors on an empty histogram.
    pub fn pillars(&self) -> Result<Vec<SaValue>> {
        if self.is_empty() {
            return Err(Error::NoPillar);
        }
        let h = self.pillar_height();
        Ok(self
            .counts
            .iter()
            .filter(|&(_, &c)| c == h)
            .map(|(&v, _)| v)
            .collect())
    }

    /// A multiset is l-eligible when at most `total / l` tuples share one SA
    /// value, i.e. `total >= l * pillar_height`. Empty multisets qualify.
    pub fn is_l_eligible(&self, l: u32) -> bool {
        self.total >= l as u64 * self.pillar_height()
    }

    /// Distance to eligibility: `l * h - total`. Non-positive iff eligible.
    pub fn gap(&self, l: u32) -> i64 {
        l as i64 * self.pillar_height() as i64 - self.total as i64
    }

    pub fn merge(&mut self, other: &SaHistogram) {
        for (&v, &c) in &other.counts {
            *self.counts.entry(v).or_insert(0) += c;
            self.total += c;
        }
    }

    pub fn union(a: &SaHistogram, b: &SaHistogram) -> SaHistogram {
        let mut out = a.clone();
        out.merge(b);
        out
    }

    /// Nonzero `(value, count)` pairs in ascending value order.
    pub fn iter(&self) -> impl Iterator<Item = (SaValue, u64)> + '_ {
        self.counts.iter().map(|(&v, &c)| (v, c))
    }
}

/// One maximal class of rows sharing a full QI vector.
#[derive(Debug, Clone)]
pub struct QiGroup {
    pub key: Vec<u32>,
    pub row_ids: Vec<RowId>,
    pub histogram: SaHistogram,
}

/// Partition of a table into identical-QI classes, in first-appearance order.
#[derive(Debug, Clone)]
pub struct GroupedTable {
    pub groups: Vec<QiGroup>,
}

impl GroupedTable {
    pub fn s(&self) -> usize {
        self.groups.len()
    }
}

/// Partition rows into maximal classes with identical QI vectors.
pub fn group_by_qi(table: &MicrodataTable) -> GroupedTable {
    let mut index: HashMap<&[u32], usize> = HashMap::new();
    let mut groups: Vec<QiGroup> = Vec::new();
    for (id, row) in table.rows.iter().enumerate() {
        let gi = *index.entry(row.qi.as_slice()).or_insert_with(|| {
            groups.push(QiGroup {
                key: row.qi.clone(),
                row_ids: Vec::new(),
                histogram: SaHistogram::new(),
            });
            groups.len() - 1
        });
        groups[gi].row_ids.push(id);
        groups[gi].histogram.increment(row.sa);
    }
    GroupedTable { groups }
}
