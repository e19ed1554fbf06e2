//! Space-filling-curve suppression baseline and the hybrid that refines the
//! residue set of a three-phase run with it.

use crate::error::{Error, Result};
use crate::metrics::{materialize, SuppressedTable};
use crate::model::{MicrodataTable, RowId, SaHistogram, Schema};
use crate::tp::{run_tp, RunReport};

/// Per-schema embedding of categorical rows onto a Hilbert curve: values map
/// to their domain index, all attributes share the grid order
/// `b = ceil(log2(max domain size))`.
#[derive(Debug, Clone)]
pub struct CurveEmbedding {
    bits: u32,
    d: usize,
}

impl CurveEmbedding {
    pub fn new(schema: &Schema) -> Result<Self> {
        let max_dom = schema
            .qi_attrs
            .iter()
            .map(|a| a.domain.len())
            .max()
            .unwrap_or(1);
        let bits = if max_dom <= 1 {
            0
        } else {
            usize::BITS - (max_dom - 1).leading_zeros()
        };
        let d = schema.d();
        if bits as usize * d > 128 {
            return Err(Error::Config(format!(
                "curve index needs {} bits, more than the supported 128",
                bits as usize * d
            )));
        }
        Ok(CurveEmbedding { bits, d })
    }

    /// Position of an embedded point along the Hilbert curve.
    pub fn index(&self, qi: &[u32]) -> u128 {
        debug_assert_eq!(qi.len(), self.d);
        let mut coords = qi.to_vec();
        axes_to_transpose(&mut coords, self.bits);
        transpose_to_index(&coords, self.bits)
    }
}

/// Convert axis coordinates into the transposed Hilbert form in place
/// (Skilling's bit-twiddling formulation; works for any dimension).
fn axes_to_transpose(x: &mut [u32], bits: u32) {
    let n = x.len();
    if bits == 0 || n == 0 {
        return;
    }
    let m = 1u32 << (bits - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..n {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    for i in 1..n {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[n - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in x.iter_mut() {
        *v ^= t;
    }
}

fn transpose_to_index(x: &[u32], bits: u32) -> u128 {
    let mut idx = 0u128;
    for k in (0..bits).rev() {
        for &coord in x {
            idx = (idx << 1) | ((coord >> k) & 1) as u128;
        }
    }
    idx
}

/// Order the given rows along the curve. Ties (identical QI vectors) break by
/// SA value and then row id, which keeps the resulting partitions invariant
/// under permutations of interchangeable rows.
pub fn curve_order(table: &MicrodataTable, rows: &[RowId]) -> Result<Vec<RowId>> {
    let embedding = CurveEmbedding::new(&table.schema)?;
    let mut keyed: Vec<(u128, u32, RowId)> = rows
        .iter()
        .map(|&id| (embedding.index(&table.rows[id].qi), table.rows[id].sa, id))
        .collect();
    keyed.sort_unstable();
    Ok(keyed.into_iter().map(|(_, _, id)| id).collect())
}

/// Greedy scan over an ordered row list: close a group as soon as it becomes
/// l-eligible; merge a non-eligible tail backward into the previously closed
/// groups until the merged block is eligible. The ordered multiset itself
/// must be l-eligible, which guarantees termination (at worst one group).
pub(crate) fn eligible_scan(
    table: &MicrodataTable,
    order: &[RowId],
    l: u32,
) -> Result<Vec<Vec<RowId>>> {
    let mut groups: Vec<Vec<RowId>> = Vec::new();
    let mut hists: Vec<SaHistogram> = Vec::new();
    let mut cur_rows: Vec<RowId> = Vec::new();
    let mut cur_hist = SaHistogram::new();
    for &id in order {
        cur_rows.push(id);
        cur_hist.increment(table.rows[id].sa);
        if cur_hist.is_l_eligible(l) {
            groups.push(std::mem::take(&mut cur_rows));
            hists.push(std::mem::replace(&mut cur_hist, SaHistogram::new()));
        }
    }
    while !cur_rows.is_empty() && !cur_hist.is_l_eligible(l) {
        match (groups.pop(), hists.pop()) {
            (Some(mut prev_rows), Some(prev_hist)) => {
                prev_rows.extend(cur_rows);
                cur_rows = prev_rows;
                cur_hist.merge(&prev_hist);
            }
            _ => {
                return Err(Error::Invariant(
                    "scan tail cannot be repaired: ordered rows are not l-eligible".into(),
                ));
            }
        }
    }
    if !cur_rows.is_empty() {
        groups.push(cur_rows);
    }
    Ok(groups)
}

/// Partition a table into l-eligible groups by scanning rows in curve order.
pub fn hilbert_partition(table: &MicrodataTable, l: u32) -> Result<Vec<Vec<RowId>>> {
    table.check_l_eligible(l)?;
    let all: Vec<RowId> = (0..table.n()).collect();
    let order = curve_order(table, &all)?;
    eligible_scan(table, &order, l)
}

/// Result of the hybrid run: the three-phase partition with its residue
/// refined into curve-ordered l-eligible subgroups.
#[derive(Debug, Clone)]
pub struct TpPlusOutcome {
    pub suppressed: SuppressedTable,
    pub partition: Vec<Vec<RowId>>,
    pub report: RunReport,
    /// Number of subgroups the residue was split into (0 for an empty residue).
    pub residue_group_count: usize,
}

/// Run the three-phase engine, then split its residue along the curve.
/// Splitting a group never destroys a unanimous attribute value, so the
/// hybrid's star count is at most the plain run's.
pub fn tp_plus(table: &MicrodataTable, l: u32) -> Result<TpPlusOutcome> {
    let out = run_tp(table, l)?;
    let mut partition: Vec<Vec<RowId>> = out
        .groups
        .groups
        .iter()
        .map(|g| g.row_ids.clone())
        .collect();
    let residue_group_count = if out.residue_rows.is_empty() {
        0
    } else {
        let order = curve_order(table, &out.residue_rows)?;
        let subgroups = eligible_scan(table, &order, l)?;
        let count = subgroups.len();
        partition.extend(subgroups);
        count
    };
    let suppressed = materialize(table, &partition)?;
    Ok(TpPlusOutcome {
        suppressed,
        partition,
        report: out.report,
        residue_group_count,
    })
}
