//! Suppression per partition and the information-loss measures: star count,
//! suppressed-tuple count, and KL-divergence between the empirical
//! distribution of the microdata and the one induced by the suppressed table.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{MicrodataTable, RowId, SaValue, Schema};

/// A published QI cell: either the retained value (as a domain index) or a star.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Value(u32),
    Star,
}

impl Cell {
    pub fn is_star(&self) -> bool {
        matches!(self, Cell::Star)
    }
}

#[derive(Debug, Clone)]
pub struct SuppressedRow {
    pub cells: Vec<Cell>,
    pub sa: SaValue,
    pub group: usize,
}

/// The materialized generalization: within a group every QI attribute is
/// either one identical value for all rows or a star for all rows; SA values
/// are untouched. Rows stay aligned with the source table by id.
#[derive(Debug, Clone)]
pub struct SuppressedTable {
    pub schema: Schema,
    pub rows: Vec<SuppressedRow>,
    pub group_count: usize,
}

/// Materialize a partition: per group and attribute, keep the value iff it is
/// unanimous, else star it. The partition must cover the table exactly.
pub fn materialize(table: &MicrodataTable, partition: &[Vec<RowId>]) -> Result<SuppressedTable> {
    let n = table.n();
    let d = table.d();
    let mut owner = vec![usize::MAX; n];
    for (gi, part) in partition.iter().enumerate() {
        for &id in part {
            if id >= n {
                return Err(Error::InvalidPartition(format!("row id {id} out of range")));
            }
            if owner[id] != usize::MAX {
                return Err(Error::InvalidPartition(format!(
                    "row {id} appears in two groups"
                )));
            }
            owner[id] = gi;
        }
    }
    if let Some(missing) = owner.iter().position(|&g| g == usize::MAX) {
        return Err(Error::InvalidPartition(format!(
            "row {missing} not covered"
        )));
    }

    let mut templates: Vec<Vec<Cell>> = Vec::with_capacity(partition.len());
    for part in partition {
        let mut cells = Vec::with_capacity(d);
        for attr in 0..d {
            let first = table.rows[part[0]].qi[attr];
            let unanimous = part.iter().all(|&id| table.rows[id].qi[attr] == first);
            cells.push(if unanimous {
                Cell::Value(first)
            } else {
                Cell::Star
            });
        }
        templates.push(cells);
    }

    let rows = (0..n)
        .map(|id| SuppressedRow {
            cells: templates[owner[id]].clone(),
            sa: table.rows[id].sa,
            group: owner[id],
        })
        .collect();
    Ok(SuppressedTable {
        schema: table.schema.clone(),
        rows,
        group_count: partition.len(),
    })
}

/// Number of starred cells.
pub fn count_stars(st: &SuppressedTable) -> u64 {
    st.rows
        .iter()
        .map(|r| r.cells.iter().filter(|c| c.is_star()).count() as u64)
        .sum()
}

/// Number of rows carrying at least one star.
pub fn count_suppressed(st: &SuppressedTable) -> u64 {
    st.rows
        .iter()
        .filter(|r| r.cells.iter().any(|c| c.is_star()))
        .count() as u64
}

/// Compensated accumulator for long float sums.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn check_derived(table: &MicrodataTable, st: &SuppressedTable) -> Result<()> {
    if table.schema != st.schema {
        return Err(Error::Config(
            "suppressed table has a different schema".into(),
        ));
    }
    if table.n() != st.rows.len() {
        return Err(Error::Config(
            "row counts differ between table and suppressed table".into(),
        ));
    }
    for (id, (orig, sup)) in table.rows.iter().zip(&st.rows).enumerate() {
        if orig.sa != sup.sa {
            return Err(Error::Config(format!(
                "row {id}: SA value changed in suppressed table"
            )));
        }
        for (attr, cell) in sup.cells.iter().enumerate() {
            if let Cell::Value(v) = cell {
                if *v != orig.qi[attr] {
                    return Err(Error::Config(format!(
                        "row {id}: retained QI value differs from the microdata on attribute {attr}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// KL-divergence between the empirical point distribution of the microdata
/// and the distribution induced by the suppressed table, where a starred cell
/// spreads uniformly over the attribute domain and SA cells must match
/// exactly. The sum runs over observed points only; terms with `f(p) = 0`
/// vanish analytically.
pub fn kl_divergence(table: &MicrodataTable, st: &SuppressedTable) -> Result<f64> {
    check_derived(table, st)?;
    let n = table.n();
    if n == 0 {
        return Ok(0.0);
    }
    let d = table.d();

    // Aggregate suppressed rows by (star mask, kept values): all rows in a
    // bucket assign identical QI weight to a point, so only per-SA counts are
    // needed within it. Kept sorted so float accumulation is reproducible.
    type BucketKey = (u64, Vec<u32>);
    type Bucket = (u64, Vec<u32>, f64, BTreeMap<SaValue, u64>);
    let mut grouped: BTreeMap<BucketKey, BTreeMap<SaValue, u64>> = BTreeMap::new();
    for row in &st.rows {
        let mut mask = 0u64;
        let mut kept = Vec::new();
        for (attr, cell) in row.cells.iter().enumerate() {
            match cell {
                Cell::Star => mask |= 1 << attr,
                Cell::Value(v) => kept.push(*v),
            }
        }
        *grouped
            .entry((mask, kept))
            .or_default()
            .entry(row.sa)
            .or_insert(0) += 1;
    }
    let buckets: Vec<Bucket> = grouped
        .into_iter()
        .map(|((mask, kept), sa_counts)| {
            let mut w = 1.0;
            for attr in 0..d {
                if mask & (1 << attr) != 0 {
                    w /= table.schema.qi_attrs[attr].domain.len() as f64;
                }
            }
            (mask, kept, w, sa_counts)
        })
        .collect();

    // Observed points, sorted for a deterministic summation order.
    let mut observed: BTreeMap<(Vec<u32>, SaValue), u64> = BTreeMap::new();
    for row in &table.rows {
        *observed.entry((row.qi.clone(), row.sa)).or_insert(0) += 1;
    }

    let n_f = n as f64;
    let mut kl = KahanSum::default();
    for ((qi, sa), count) in observed {
        let mut mass = KahanSum::default();
        for (mask, kept, weight, sa_counts) in &buckets {
            let c = match sa_counts.get(&sa) {
                Some(&c) => c,
                None => continue,
            };
            let mut kept_iter = kept.iter();
            let matches = (0..d).all(|attr| {
                if mask & (1 << attr) != 0 {
                    true
                } else {
                    *kept_iter.next().unwrap() == qi[attr]
                }
            });
            if matches {
                mass.add(weight * c as f64);
            }
        }
        let f = count as f64 / n_f;
        let f_star = mass.value() / n_f;
        if f_star <= 0.0 {
            return Err(Error::Invariant(
                "induced distribution vanishes on an observed point".into(),
            ));
        }
        kl.add(f * (f / f_star).ln());
    }
    Ok(kl.value().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identical_rows_yield_zero_stars() {
        let mut b = crate::model::TableBuilder::new(&["a", "b"], "sa");
        for i in 0..4 {
            b.push_row(&["x", "y"], &format!("s{i}")).unwrap();
        }
        let table = b.finish().unwrap();
        let st = materialize(&table, &[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(count_stars(&st), 0);
        assert_eq!(count_suppressed(&st), 0);
    }

    #[test]
    fn medical_three_group_partition_has_eight_stars() {
        let table = fixtures::medical();
        let partition = vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9]];
        let st = materialize(&table, &partition).unwrap();
        assert_eq!(count_stars(&st), 8);
        assert_eq!(count_suppressed(&st), 4);
    }

    #[test]
    fn medical_four_group_partition_matches_known_layout() {
        let table = fixtures::medical();
        let partition = vec![vec![0, 1], vec![2, 3], vec![4, 5, 6, 7], vec![8, 9]];
        let st = materialize(&table, &partition).unwrap();
        // Only the ages of rows 2 and 3 differ inside their group.
        assert_eq!(count_stars(&st), 2);
        for (id, row) in st.rows.iter().enumerate() {
            for (attr, cell) in row.cells.iter().enumerate() {
                let expect_star = (id == 2 || id == 3) && attr == 0;
                assert_eq!(cell.is_star(), expect_star, "row {id} attr {attr}");
            }
        }
    }

    #[test]
    fn fully_starred_group_hits_the_upper_bound() {
        let mut b = crate::model::TableBuilder::new(&["a", "b"], "sa");
        b.push_row(&["x", "y"], "s1").unwrap();
        b.push_row(&["u", "v"], "s2").unwrap();
        b.push_row(&["p", "q"], "s3").unwrap();
        let table = b.finish().unwrap();
        let st = materialize(&table, &[vec![0, 1, 2]]).unwrap();
        assert_eq!(count_stars(&st), 6);
        assert_eq!(count_suppressed(&st), 3);
    }

    #[test]
    fn bad_partitions_are_rejected() {
        let table = fixtures::medical();
        assert!(matches!(
            materialize(&table, &[vec![0, 1]]),
            Err(Error::InvalidPartition(_))
        ));
        let mut full: Vec<Vec<RowId>> = vec![(0..10).collect()];
        full.push(vec![3]);
        assert!(matches!(
            materialize(&table, &full),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            materialize(&table, &[(0..11).collect()]),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn kl_zero_without_stars() {
        let table = fixtures::medical();
        let grouped = crate::model::group_by_qi(&table);
        let partition: Vec<Vec<RowId>> = grouped.groups.iter().map(|g| g.row_ids.clone()).collect();
        let st = materialize(&table, &partition).unwrap();
        assert_eq!(count_stars(&st), 0);
        assert_eq!(kl_divergence(&table, &st).unwrap(), 0.0);
    }

    #[test]
    fn kl_two_row_hand_example() {
        let mut b = crate::model::TableBuilder::new(&["a"], "sa");
        b.push_row(&["x"], "s1").unwrap();
        b.push_row(&["y"], "s2").unwrap();
        let table = b.finish().unwrap();
        let st = materialize(&table, &[vec![0, 1]]).unwrap();
        assert_eq!(count_stars(&st), 2);
        let kl = kl_divergence(&table, &st).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-12, "kl = {kl}");
    }

    #[test]
    fn kl_rejects_schema_mismatch() {
        let table = fixtures::medical();
        let other = fixtures::phase2_demo();
        let st = materialize(&other, &[(0..other.n()).collect()]).unwrap();
        assert!(kl_divergence(&table, &st).is_err());
    }

    #[test]
    fn count_relation_holds() {
        let table = fixtures::medical();
        let partitions: Vec<Vec<Vec<RowId>>> = vec![
            vec![(0..10).collect()],
            vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9]],
            vec![vec![0, 9], vec![1, 8], vec![2, 7], vec![3, 6], vec![4, 5]],
        ];
        let d = table.d() as u64;
        for p in partitions {
            let st = materialize(&table, &p).unwrap();
            let stars = count_stars(&st);
            let suppressed = count_suppressed(&st);
            assert!(suppressed <= stars);
            assert!(stars <= d * suppressed);
        }
    }
}
