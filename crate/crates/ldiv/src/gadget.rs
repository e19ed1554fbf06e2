//! Structured hard-instance generator: builds microdata tables from
//! 3-dimensional matching point sets such that a 3-diverse generalization
//! with exactly `3n(d-1)` stars exists iff the point set has a perfect
//! matching. Useful as a source of adversarial fixtures.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::eligible_scan;
use crate::error::{Error, Result};
use crate::metrics::{count_stars, materialize};
use crate::model::{MicrodataTable, RowId, TableBuilder};

/// A 3-dimensional matching instance: `d >= n` distinct points over three
/// disjoint `n`-value dimensions, plus the number `m` of distinct SA values
/// the generated table should realize (`3 <= m <= 3n`).
#[derive(Debug, Clone)]
pub struct ReductionInstance {
    pub n: usize,
    /// Points as per-dimension local coordinates in `0..n`.
    pub points: Vec<[usize; 3]>,
    pub m: usize,
}

impl ReductionInstance {
    pub fn new(n: usize, points: Vec<[usize; 3]>, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("dimension size n must be positive".into()));
        }
        if points.len() < n {
            return Err(Error::Config(format!(
                "need at least n = {n} points, got {}",
                points.len()
            )));
        }
        if !(3..=3 * n).contains(&m) {
            return Err(Error::Config(format!(
                "m = {m} outside the feasible range [3, {}]",
                3 * n
            )));
        }
        let mut seen = HashSet::new();
        for p in &points {
            if p.iter().any(|&c| c >= n) {
                return Err(Error::Config(format!(
                    "point {p:?} has a coordinate outside 0..{n}"
                )));
            }
            if !seen.insert(*p) {
                return Err(Error::Config(format!("duplicate point {p:?}")));
            }
        }
        Ok(ReductionInstance { n, points, m })
    }

    pub fn d(&self) -> usize {
        self.points.len()
    }

    /// Six points over three 4-value dimensions with the known perfect
    /// matching `{0, 2, 4, 5}`; generates a 12-row table with `m = 8`.
    pub fn demo() -> Self {
        ReductionInstance::new(
            4,
            vec![
                [0, 0, 0],
                [0, 1, 1],
                [1, 2, 1],
                [2, 3, 0],
                [2, 1, 2],
                [3, 3, 3],
            ],
            8,
        )
        .unwrap()
    }

    pub fn demo_matching() -> Vec<usize> {
        vec![0, 2, 4, 5]
    }

    /// Random instance: a hidden perfect matching (one random permutation per
    /// dimension) padded with `d - n` extra distinct points.
    pub fn random(n: usize, d: usize, m: usize, seed: u64) -> Result<(Self, Vec<usize>)> {
        if d < n {
            return Err(Error::Config(format!("d = {d} must be at least n = {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims: Vec<Vec<usize>> = Vec::new();
        for _ in 0..3 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            dims.push(perm);
        }
        let mut points: Vec<[usize; 3]> = (0..n)
            .map(|i| [dims[0][i], dims[1][i], dims[2][i]])
            .collect();
        let mut seen: HashSet<[usize; 3]> = points.iter().copied().collect();
        while points.len() < d {
            let p = [
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..n),
            ];
            if seen.insert(p) {
                points.push(p);
            }
        }
        let matching = (0..n).collect();
        Ok((ReductionInstance::new(n, points, m)?, matching))
    }
}

/// SA value of the 1-based row `j`, chosen so that the table realizes exactly
/// `m` distinct values and rows from different dimensions never share one.
fn sa_for_row(j: usize, m: usize, n: usize) -> usize {
    if j <= m - 2 {
        j
    } else if m - 1 > 2 * n {
        if j < 3 * n {
            m - 1
        } else {
            m
        }
    } else if m - 1 > n {
        if j <= 2 * n {
            m - 1
        } else {
            m
        }
    } else if j <= n {
        m - 2
    } else if j <= 2 * n {
        m - 1
    } else {
        m
    }
}

/// Build the gadget table: `3n` rows (one per domain value), one QI column
/// per point. Row `j` carries 0 on a column whose point has `v_j` as a
/// coordinate, and its own SA value everywhere else.
pub fn build_reduction(inst: &ReductionInstance) -> Result<MicrodataTable> {
    let n = inst.n;
    let d = inst.d();
    let names: Vec<String> = (1..=d).map(|i| format!("A{i}")).collect();
    let mut b = TableBuilder::new(&names, "B");
    for j in 1..=3 * n {
        let dim = (j - 1) / n;
        let local = (j - 1) % n;
        let u = sa_for_row(j, inst.m, n);
        let qi: Vec<String> = inst
            .points
            .iter()
            .map(|p| {
                if p[dim] == local {
                    "0".to_string()
                } else {
                    u.to_string()
                }
            })
            .collect();
        b.push_row(&qi, &u.to_string())?;
    }
    b.finish()
}

/// Turn a perfect matching into the corresponding 3-diverse partition:
/// one group per matched point, holding the three rows zeroed on its column.
pub fn matching_to_partition(
    inst: &ReductionInstance,
    matching: &[usize],
    table: &MicrodataTable,
) -> Result<Vec<Vec<RowId>>> {
    let n = inst.n;
    if matching.len() != n {
        return Err(Error::InvalidMatching(format!(
            "matching must contain exactly n = {n} points, got {}",
            matching.len()
        )));
    }
    for &i in matching {
        if i >= inst.d() {
            return Err(Error::InvalidMatching(format!(
                "point index {i} out of range"
            )));
        }
    }
    for dim in 0..3 {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for &i in matching {
            let c = inst.points[i][dim];
            if let Some(other) = owner[c] {
                return Err(Error::InvalidMatching(format!(
                    "points {other} and {i} share coordinate {c} on dimension {dim}"
                )));
            }
            owner[c] = Some(i);
        }
    }
    let mut sorted: Vec<usize> = matching.to_vec();
    sorted.sort_unstable();
    let partition: Vec<Vec<RowId>> = sorted
        .iter()
        .map(|&i| (0..3).map(|dim| dim * n + inst.points[i][dim]).collect())
        .collect();
    debug_assert_eq!(partition.iter().map(Vec::len).sum::<usize>(), table.n());
    Ok(partition)
}

/// Sample random valid 3-diverse partitions of a gadget table and report
/// whether every materialization stays at or above the `3n(d-1)` star bound.
pub fn verify_lower_bound(table: &MicrodataTable, samples: usize, seed: u64) -> Result<bool> {
    let d = table.d();
    if !table.n().is_multiple_of(3) {
        return Err(Error::Config("gadget tables have 3n rows".into()));
    }
    let n = table.n() / 3;
    let bound = (3 * n * (d - 1)) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<RowId> = (0..table.n()).collect();
    for _ in 0..samples {
        order.shuffle(&mut rng);
        let partition = eligible_scan(table, &order, 3)?;
        let st = materialize(table, &partition)?;
        if count_stars(&st) < bound {
            return Ok(false);
        }
    }
    Ok(true)
}
