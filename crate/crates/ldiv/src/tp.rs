//! Three-phase tuple minimization.
//!
//! The engine moves tuples from QI-groups into a residue set `R` until every
//! group and `R` are l-eligible, preferring the cheapest fixes first:
//!
//! * phase one trims every group to eligibility by shaving its pillars
//!   (optimal if `R` ends up eligible too);
//! * phase two grows `R` without raising its pillar height, feeding it the
//!   least frequent SA values that alive groups can still spare;
//! * phase three raises `|R|` and `h(R)` together, covering the pillars of
//!   `R` with a greedy group selection each round.
//!
//! State is kept in inverted count arrays: per group an array whose j-th
//! bucket holds the SA values with exactly j tuples, plus a pillar pointer
//! that only ever moves down (amortized O(1) per tuple move).
//!
//! Tie-breaking is deterministic everywhere a choice is arbitrary: smallest
//! SA id first, then smallest group index.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{
    group_by_qi, GroupedTable, MicrodataTable, QiGroup, RowId, SaHistogram, SaValue,
};

/// Identifier of the tie-break policy implemented by this module; recorded in
/// reports so that emitted partitions can be reproduced.
pub const TIE_BREAK_POLICY: &str = "smallest-sa-id,then-smallest-group-index";

#[derive(Debug, Clone)]
struct GroupState {
    hist: HashMap<SaValue, u64>,
    /// `buckets[j]` holds the SA values with exactly `j` tuples in the group.
    buckets: Vec<Vec<SaValue>>,
    /// Position of each value inside its bucket, for O(1) removal.
    slot: HashMap<SaValue, usize>,
    /// Highest nonempty bucket index; 0 when the group is empty.
    pillar: usize,
    size: u64,
    rows: HashMap<SaValue, Vec<RowId>>,
}

impl GroupState {
    fn build(hist: &SaHistogram, rows_by_value: HashMap<SaValue, Vec<RowId>>) -> Self {
        let size = hist.total();
        let mut buckets = vec![Vec::new(); size as usize + 1];
        let mut slot = HashMap::new();
        let mut map = HashMap::new();
        let mut pillar = 0usize;
        for (v, c) in hist.iter() {
            let j = c as usize;
            slot.insert(v, buckets[j].len());
            buckets[j].push(v);
            map.insert(v, c);
            pillar = pillar.max(j);
        }
        GroupState {
            hist: map,
            buckets,
            slot,
            pillar,
            size,
            rows: rows_by_value,
        }
    }

    fn count(&self, v: SaValue) -> u64 {
        self.hist.get(&v).copied().unwrap_or(0)
    }

    fn is_empty(&self) -> bool {
        self.size == 0
    }

    fn is_eligible(&self, l: u32) -> bool {
        self.size >= l as u64 * self.pillar as u64
    }

    fn is_fat(&self, l: u32) -> bool {
        self.size > l as u64 * self.pillar as u64
    }

    /// All pillar values, ascending.
    fn pillars_sorted(&self) -> Vec<SaValue> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut p = self.buckets[self.pillar].clone();
        p.sort_unstable();
        p
    }

    fn min_pillar(&self) -> Option<SaValue> {
        if self.is_empty() {
            None
        } else {
            self.buckets[self.pillar].iter().copied().min()
        }
    }

    fn is_conflicting(&self, residue: &ResidueState) -> bool {
        !self.is_empty()
            && self.buckets[self.pillar]
                .iter()
                .any(|&v| residue.is_pillar(v))
    }

    /// Dead groups are thin and conflicting; empty groups never count as dead
    /// (they have nothing to give and no pillar to conflict on).
    fn is_dead(&self, l: u32, residue: &ResidueState) -> bool {
        !self.is_empty() && !self.is_fat(l) && self.is_conflicting(residue)
    }

    /// Remove one tuple with the given SA value, returning its row id.
    fn remove_one(&mut self, group_idx: usize, v: SaValue) -> Result<RowId> {
        let j = match self.hist.get(&v) {
            Some(&c) if c > 0 => c as usize,
            _ => {
                return Err(Error::ValueAbsent {
                    group: group_idx,
                    value: v,
                })
            }
        };
        let pos = self.slot[&v];
        self.buckets[j].swap_remove(pos);
        if let Some(&moved) = self.buckets[j].get(pos) {
            self.slot.insert(moved, pos);
        }
        if j > 1 {
            self.slot.insert(v, self.buckets[j - 1].len());
            self.buckets[j - 1].push(v);
            self.hist.insert(v, j as u64 - 1);
        } else {
            self.slot.remove(&v);
            self.hist.remove(&v);
        }
        self.size -= 1;
        while self.pillar > 0 && self.buckets[self.pillar].is_empty() {
            self.pillar -= 1;
        }
        let id = self.rows.get_mut(&v).and_then(|r| r.pop()).ok_or_else(|| {
            Error::Invariant(format!("row bookkeeping out of sync for SA value {v}"))
        })?;
        Ok(id)
    }

    fn histogram(&self) -> SaHistogram {
        SaHistogram::from_counts(self.hist.iter().map(|(&v, &c)| (v, c)))
    }
}

#[derive(Debug, Clone)]
struct ResidueState {
    /// Dense counts indexed by SA value; slot 0 unused.
    hist: Vec<u64>,
    buckets: Vec<Vec<SaValue>>,
    slot: Vec<usize>,
    pillar: usize,
    size: u64,
    /// Row ids in removal order.
    log: Vec<RowId>,
}

impl ResidueState {
    fn new(m: usize) -> Self {
        ResidueState {
            hist: vec![0; m + 1],
            buckets: vec![Vec::new()],
            slot: vec![0; m + 1],
            pillar: 0,
            size: 0,
            log: Vec::new(),
        }
    }

    fn count(&self, v: SaValue) -> u64 {
        self.hist[v as usize]
    }

    fn is_pillar(&self, v: SaValue) -> bool {
        self.pillar > 0 && self.hist[v as usize] == self.pillar as u64
    }

    fn is_eligible(&self, l: u32) -> bool {
        self.size >= l as u64 * self.pillar as u64
    }

    fn pillars_sorted(&self) -> Vec<SaValue> {
        if self.pillar == 0 {
            return Vec::new();
        }
        let mut p = self.buckets[self.pillar].clone();
        p.sort_unstable();
        p
    }

    fn add_one(&mut self, v: SaValue, row: RowId) {
        let j = self.hist[v as usize] as usize;
        if j > 0 {
            let pos = self.slot[v as usize];
            self.buckets[j].swap_remove(pos);
            if let Some(&moved) = self.buckets[j].get(pos) {
                self.slot[moved as usize] = pos;
            }
        }
        if self.buckets.len() <= j + 1 {
            self.buckets.resize(j + 2, Vec::new());
        }
        self.slot[v as usize] = self.buckets[j + 1].len();
        self.buckets[j + 1].push(v);
        self.hist[v as usize] = j as u64 + 1;
        self.pillar = self.pillar.max(j + 1);
        self.size += 1;
        self.log.push(row);
    }

    fn histogram(&self) -> SaHistogram {
        SaHistogram::from_counts(
            self.hist
                .iter()
                .enumerate()
                .skip(1)
                .map(|(v, &c)| (v as SaValue, c)),
        )
    }
}

/// Phase-two candidate list: an inverted array over `h(R, v)` holding the
/// alive SA values, each with the set of groups that can still supply it.
/// Entries of groups that die are skipped and dropped lazily at pick time.
struct Candidates {
    buckets: Vec<BTreeSet<SaValue>>,
    holders: HashMap<SaValue, BTreeSet<usize>>,
    min_bucket: usize,
}

impl Candidates {
    fn contains(&self, v: SaValue) -> bool {
        self.holders.contains_key(&v)
    }

    fn reposition(&mut self, v: SaValue, old: usize) {
        if !self.contains(v) {
            return;
        }
        self.buckets[old].remove(&v);
        self.buckets[old + 1].insert(v);
    }

    fn drop_holder(&mut self, v: SaValue, group: usize, bucket: usize) {
        if let Some(set) = self.holders.get_mut(&v) {
            set.remove(&group);
            if set.is_empty() {
                self.holders.remove(&v);
                self.buckets[bucket].remove(&v);
            }
        }
    }
}

/// Counters that witness the per-phase complexity and approximation bounds.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    /// Phase in which the run terminated (1, 2 or 3).
    pub terminal_phase: u8,
    /// Termination in phase one yields a provably optimal solution.
    pub optimal: bool,
    pub residue_size: u64,
    pub residue_pillar_height: u64,
    pub removed_per_phase: [u64; 3],
    /// Number of phase-three rounds (0 when phase three was not entered).
    pub rounds: u32,
    pub h_after_phase_one: u64,
    pub h_after_phase_two: Option<u64>,
    /// Pillar-height increase of `R` per phase-three round.
    pub round_h_increases: Vec<u64>,
    pub total_moves: u64,
}

/// Mutable algorithm state: group histograms, the residue multiset and the
/// inverted index structures. One run owns its state exclusively.
pub struct PartitionState {
    l: u32,
    groups: Vec<GroupState>,
    keys: Vec<Vec<u32>>,
    residue: ResidueState,
    phase_idx: usize,
    moves: u64,
    per_phase: [u64; 3],
    rounds: u32,
    round_h_increases: Vec<u64>,
    h_after_phase_one: u64,
    h_after_phase_two: Option<u64>,
}

impl PartitionState {
    /// Build a state from a grouped table, wiring row ids to their SA values.
    /// Row ids within a value class are kept in input order; removals pop
    /// from the back.
    pub fn from_grouped(table: &MicrodataTable, grouped: &GroupedTable, l: u32) -> Self {
        let mut groups = Vec::with_capacity(grouped.s());
        let mut keys = Vec::with_capacity(grouped.s());
        for g in &grouped.groups {
            let mut rows_by_value: HashMap<SaValue, Vec<RowId>> = HashMap::new();
            for &id in &g.row_ids {
                rows_by_value.entry(table.rows[id].sa).or_default().push(id);
            }
            groups.push(GroupState::build(&g.histogram, rows_by_value));
            keys.push(g.key.clone());
        }
        PartitionState {
            l,
            groups,
            keys,
            residue: ResidueState::new(table.m()),
            phase_idx: 0,
            moves: 0,
            per_phase: [0; 3],
            rounds: 0,
            round_h_increases: Vec::new(),
            h_after_phase_one: 0,
            h_after_phase_two: None,
        }
    }

    /// Build a state directly from histograms (synthetic row ids), useful for
    /// driving the phases on hand-crafted or randomized configurations.
    pub fn from_histograms(group_hists: &[SaHistogram], residue: &SaHistogram, l: u32) -> Self {
        let m = group_hists
            .iter()
            .chain(std::iter::once(residue))
            .flat_map(|h| h.iter().map(|(v, _)| v))
            .max()
            .unwrap_or(1) as usize;
        let mut next_id: RowId = 0;
        let mut groups = Vec::new();
        let mut keys = Vec::new();
        for (gi, h) in group_hists.iter().enumerate() {
            let mut rows_by_value: HashMap<SaValue, Vec<RowId>> = HashMap::new();
            for (v, c) in h.iter() {
                let ids: Vec<RowId> = (0..c)
                    .map(|_| {
                        let id = next_id;
                        next_id += 1;
                        id
                    })
                    .collect();
                rows_by_value.insert(v, ids);
            }
            groups.push(GroupState::build(h, rows_by_value));
            keys.push(vec![gi as u32]);
        }
        let mut res = ResidueState::new(m);
        for (v, c) in residue.iter() {
            for _ in 0..c {
                let id = next_id;
                next_id += 1;
                res.add_one(v, id);
            }
        }
        PartitionState {
            l,
            groups,
            keys,
            residue: res,
            phase_idx: 0,
            moves: 0,
            per_phase: [0; 3],
            rounds: 0,
            round_h_increases: Vec::new(),
            h_after_phase_one: 0,
            h_after_phase_two: None,
        }
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group_histogram(&self, i: usize) -> SaHistogram {
        self.groups[i].histogram()
    }

    pub fn residue_histogram(&self) -> SaHistogram {
        self.residue.histogram()
    }

    pub fn residue_size(&self) -> u64 {
        self.residue.size
    }

    pub fn residue_pillar_height(&self) -> u64 {
        self.residue.pillar as u64
    }

    pub fn is_residue_eligible(&self) -> bool {
        self.residue.is_eligible(self.l)
    }

    pub fn total_moves(&self) -> u64 {
        self.moves
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn round_h_increases(&self) -> &[u64] {
        &self.round_h_increases
    }

    fn total_rows(&self) -> u64 {
        self.groups.iter().map(|g| g.size).sum::<u64>() + self.residue.size
    }

    fn global_histogram(&self) -> SaHistogram {
        let mut dense = self.residue.hist.clone();
        for g in &self.groups {
            for (&v, &c) in &g.hist {
                dense[v as usize] += c;
            }
        }
        SaHistogram::from_counts(
            dense
                .iter()
                .enumerate()
                .skip(1)
                .map(|(v, &c)| (v as SaValue, c)),
        )
    }

    /// Move one tuple with SA value `v` from group `group` to the residue.
    pub fn move_tuple(&mut self, group: usize, v: SaValue) -> Result<()> {
        let id = self.groups[group].remove_one(group, v)?;
        self.residue.add_one(v, id);
        self.moves += 1;
        self.per_phase[self.phase_idx] += 1;
        Ok(())
    }

    /// Shave every group down to l-eligibility by repeatedly removing one
    /// tuple from its pillar. Returns whether the residue is already eligible.
    pub fn phase_one(&mut self) -> Result<bool> {
        let global = self.global_histogram();
        if !global.is_l_eligible(self.l) {
            let v = global.pillars()?[0];
            return Err(Error::Ineligible {
                value: v.to_string(),
                count: global.count(v),
                total: global.total(),
                l: self.l,
            });
        }
        self.phase_idx = 0;
        for i in 0..self.groups.len() {
            while !self.groups[i].is_eligible(self.l) {
                let v = self.groups[i]
                    .min_pillar()
                    .ok_or_else(|| Error::Invariant("ineligible group without a pillar".into()))?;
                self.move_tuple(i, v)?;
            }
        }
        self.h_after_phase_one = self.residue.pillar as u64;
        Ok(self.residue.is_eligible(self.l))
    }

    /// Feed the residue the least frequent alive SA values until it becomes
    /// eligible (true) or no alive SA value remains (false). The pillar
    /// height of the residue never changes during this phase.
    pub fn phase_two(&mut self) -> bool {
        self.phase_idx = 1;
        let result = self.phase_two_inner();
        self.h_after_phase_two = Some(self.residue.pillar as u64);
        result
    }

    fn phase_two_inner(&mut self) -> bool {
        let l = self.l;
        if self.residue.is_eligible(l) {
            return true;
        }
        // Candidate list over h(R, v); index range is fixed because h(R)
        // stays constant throughout the phase.
        let mut cands = Candidates {
            buckets: vec![BTreeSet::new(); self.residue.pillar + 1],
            holders: HashMap::new(),
            min_bucket: 0,
        };
        for (i, g) in self.groups.iter().enumerate() {
            if g.is_empty() || g.is_dead(l, &self.residue) {
                continue;
            }
            for &v in g.hist.keys() {
                cands.holders.entry(v).or_default().insert(i);
            }
        }
        let held: Vec<SaValue> = cands.holders.keys().copied().collect();
        for v in held {
            let j = self.residue.count(v) as usize;
            cands.buckets[j].insert(v);
        }

        loop {
            // Pick the smallest alive (h(R,v), v, group) candidate, pruning
            // stale entries as they surface.
            let picked = 'pick: loop {
                while cands.min_bucket < cands.buckets.len()
                    && cands.buckets[cands.min_bucket].is_empty()
                {
                    cands.min_bucket += 1;
                }
                if cands.min_bucket >= cands.buckets.len() {
                    break 'pick None;
                }
                let v = *cands.buckets[cands.min_bucket].iter().next().unwrap();
                loop {
                    let holder = cands.holders.get(&v).and_then(|s| s.iter().next().copied());
                    match holder {
                        None => {
                            cands.buckets[cands.min_bucket].remove(&v);
                            cands.holders.remove(&v);
                            break;
                        }
                        Some(i) => {
                            if self.groups[i].count(v) == 0
                                || self.groups[i].is_dead(l, &self.residue)
                            {
                                cands.drop_holder(v, i, cands.min_bucket);
                                continue;
                            }
                            break 'pick Some((i, v));
                        }
                    }
                }
            };
            let (i, v) = match picked {
                Some(p) => p,
                None => return false,
            };

            let before_pillar = self.residue.pillar;
            if self.groups[i].is_fat(l) {
                self.phase_two_move(i, v, &mut cands);
            } else {
                // Thin and alive, hence non-conflicting: shed one tuple from
                // every pillar so the group stays eligible.
                debug_assert!(!self.groups[i].is_conflicting(&self.residue));
                for p in self.groups[i].pillars_sorted() {
                    self.phase_two_move(i, p, &mut cands);
                }
            }
            debug_assert_eq!(self.residue.pillar, before_pillar);
            if self.residue.is_eligible(l) {
                return true;
            }
        }
    }

    fn phase_two_move(&mut self, i: usize, v: SaValue, cands: &mut Candidates) {
        let old = self.residue.count(v) as usize;
        self.move_tuple(i, v)
            .expect("candidate value present in group");
        if self.groups[i].count(v) == 0 {
            cands.drop_holder(v, i, old);
        }
        cands.reposition(v, old);
    }

    /// Close the gap between `|R|` and `l * h(R)` in rounds: greedily cover
    /// the pillars of `R` with groups that can absorb the height increase,
    /// then re-kill every group that came back alive.
    pub fn phase_three(&mut self) -> Result<()> {
        self.phase_idx = 2;
        let l = self.l as u64;
        let n = self.total_rows();
        loop {
            if self.residue.is_eligible(self.l) {
                return Ok(());
            }
            self.rounds += 1;
            if self.rounds as u64 > n {
                return Err(Error::Invariant(format!(
                    "phase three exceeded the safety cap of {n} rounds"
                )));
            }
            let h_start = self.residue.pillar;

            // Step one: greedy cover of the residue pillars. Picking a group
            // covers the pillars it does not conflict on.
            let pillar_set: BTreeSet<SaValue> = self.residue.pillars_sorted().into_iter().collect();
            let mut remaining = pillar_set.clone();
            let conflicts: Vec<(usize, BTreeSet<SaValue>)> = self
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| !g.is_empty())
                .map(|(i, g)| {
                    let c: BTreeSet<SaValue> = g
                        .pillars_sorted()
                        .into_iter()
                        .filter(|v| pillar_set.contains(v))
                        .collect();
                    (i, c)
                })
                .collect();
            let mut picked: Vec<usize> = Vec::new();
            let mut picked_flags = vec![false; self.groups.len()];
            while !remaining.is_empty() {
                let best = conflicts
                    .iter()
                    .filter(|(i, _)| !picked_flags[*i])
                    .map(|(i, c)| (c.intersection(&remaining).count(), *i))
                    .min();
                let (overlap, i) = best.ok_or_else(|| {
                    Error::Invariant("greedy cover ran out of groups with pillars uncovered".into())
                })?;
                if overlap == remaining.len() {
                    return Err(Error::Invariant(
                        "greedy cover unable to empty the residue pillar set".into(),
                    ));
                }
                picked_flags[i] = true;
                picked.push(i);
                let c = &conflicts.iter().find(|(j, _)| *j == i).unwrap().1;
                remaining = remaining.intersection(c).copied().collect();
            }
            for &i in &picked {
                for p in self.groups[i].pillars_sorted() {
                    self.move_tuple(i, p)?;
                }
            }

            // Step two: re-kill groups in ascending index order. Fat groups
            // shed values that are not residue pillars; thin non-conflicting
            // groups shed one tuple from each pillar.
            'groups: for i in 0..self.groups.len() {
                loop {
                    if self.residue.is_eligible(self.l) {
                        break 'groups;
                    }
                    let g = &self.groups[i];
                    if g.is_empty() || g.is_dead(self.l, &self.residue) {
                        break;
                    }
                    if g.is_fat(self.l) {
                        let mut values: Vec<SaValue> = g.hist.keys().copied().collect();
                        values.sort_unstable();
                        let v = values
                            .into_iter()
                            .find(|&v| !self.residue.is_pillar(v))
                            .ok_or_else(|| {
                                Error::Invariant(
                                    "fat group has no SA value outside the residue pillars".into(),
                                )
                            })?;
                        self.move_tuple(i, v)?;
                    } else {
                        // Thin and non-conflicting.
                        for p in self.groups[i].pillars_sorted() {
                            self.move_tuple(i, p)?;
                            if self.residue.is_eligible(self.l) {
                                break 'groups;
                            }
                        }
                    }
                }
            }

            let increase = self.residue.pillar as u64 - h_start as u64;
            self.round_h_increases.push(increase);
            debug_assert!(increase <= l.saturating_sub(2));
        }
    }

    fn into_outcome(self, terminal_phase: u8) -> TpOutcome {
        let mut groups = Vec::new();
        for (i, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let mut row_ids: Vec<RowId> = g.rows.values().flatten().copied().collect();
            row_ids.sort_unstable();
            groups.push(QiGroup {
                key: self.keys[i].clone(),
                row_ids,
                histogram: g.histogram(),
            });
        }
        let mut residue_rows = self.residue.log.clone();
        residue_rows.sort_unstable();
        let report = RunReport {
            terminal_phase,
            optimal: terminal_phase == 1,
            residue_size: self.residue.size,
            residue_pillar_height: self.residue.pillar as u64,
            removed_per_phase: self.per_phase,
            rounds: self.rounds,
            h_after_phase_one: self.h_after_phase_one,
            h_after_phase_two: self.h_after_phase_two,
            round_h_increases: self.round_h_increases,
            total_moves: self.moves,
        };
        TpOutcome {
            groups: GroupedTable { groups },
            residue_rows,
            report,
        }
    }
}

/// Result of a full run: the retained groups, the suppressed row ids and the
/// instrumented report.
#[derive(Debug, Clone)]
pub struct TpOutcome {
    pub groups: GroupedTable,
    pub residue_rows: Vec<RowId>,
    pub report: RunReport,
}

impl TpOutcome {
    /// The output partition: every retained group plus the residue as one block.
    pub fn partition(&self) -> Vec<Vec<RowId>> {
        let mut parts: Vec<Vec<RowId>> = self
            .groups
            .groups
            .iter()
            .map(|g| g.row_ids.clone())
            .collect();
        if !self.residue_rows.is_empty() {
            parts.push(self.residue_rows.clone());
        }
        parts
    }
}

/// Run the three phases on a table. Requires `l >= 2` and a globally
/// l-eligible input; the error names the over-frequent SA value otherwise.
pub fn run_tp(table: &MicrodataTable, l: u32) -> Result<TpOutcome> {
    if l < 2 {
        return Err(Error::Config(format!("l must be at least 2, got {l}")));
    }
    table.check_l_eligible(l)?;
    let grouped = group_by_qi(table);
    let mut state = PartitionState::from_grouped(table, &grouped, l);
    if state.phase_one()? {
        return Ok(state.into_outcome(1));
    }
    if state.phase_two() {
        return Ok(state.into_outcome(2));
    }
    state.phase_three()?;
    Ok(state.into_outcome(3))
}
