//! Shared helpers for the integration suites: seeded instance generators.

use ldiv::model::{MicrodataTable, TableBuilder};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// One attempt at a random table; `None` when it misses global l-eligibility.
fn try_random_table(
    rng: &mut StdRng,
    l: u32,
    max_n: usize,
    max_m: usize,
) -> Option<MicrodataTable> {
    let m = rng.gen_range(l as usize..=max_m.max(l as usize));
    let n = rng.gen_range(l as usize..=max_n);
    let d = rng.gen_range(1..=3);
    let dom = rng.gen_range(2..=3);
    let names: Vec<String> = (0..d).map(|i| format!("q{i}")).collect();
    let mut b = TableBuilder::new(&names, "sa");
    for _ in 0..n {
        let qi: Vec<String> = (0..d)
            .map(|_| format!("v{}", rng.gen_range(0..dom)))
            .collect();
        b.push_row(&qi, &format!("s{}", rng.gen_range(0..m)))
            .unwrap();
    }
    let table = b.finish().unwrap();
    table.check_l_eligible(l).ok().map(|_| table)
}

/// Seeded stream of globally l-eligible random tables.
pub fn eligible_instances(
    seed: u64,
    count: usize,
    l: u32,
    max_n: usize,
    max_m: usize,
) -> Vec<MicrodataTable> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(table) = try_random_table(&mut rng, l, max_n, max_m) {
            out.push(table);
        }
    }
    out
}

/// Instances engineered to exhaust phase two: thin groups that conflict with
/// a concentrated residue, fed by single-value classes that phase one drains.
/// Returns `(table, l)` pairs; every run is expected to reach phase three.
pub fn phase_three_instances(seed: u64, count: usize) -> Vec<(MicrodataTable, u32)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    'outer: while out.len() < count {
        let l = rng.gen_range(3..=4u32);
        let m = rng.gen_range(l as usize + 1..=l as usize + 3);
        let h_r = rng.gen_range(2..=3u64);
        let pillar_count = rng.gen_range(1..l as usize);

        // Residue histogram: `pillar_count` values at height h_r plus some
        // low filler, total strictly below l * h_r.
        let mut residue = vec![0u64; m];
        let mut order: Vec<usize> = (0..m).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for &v in order.iter().take(pillar_count) {
            residue[v] = h_r;
        }
        let mut budget = l as u64 * h_r - (pillar_count as u64 * h_r) - 1;
        for &v in order.iter().skip(pillar_count) {
            if budget == 0 {
                break;
            }
            let add = rng.gen_range(0..=budget.min(h_r - 1));
            residue[v] = add;
            budget -= add;
        }

        // Thin groups whose pillar is one of the residue pillars.
        let group_count = rng.gen_range(1..=3);
        let mut groups: Vec<Vec<u64>> = Vec::new();
        for _ in 0..group_count {
            let pillar = order[rng.gen_range(0..pillar_count)];
            let h_q = rng.gen_range(1..=2u64);
            let mut counts = vec![0u64; m];
            counts[pillar] = h_q;
            let mut need = (l as u64 - 1) * h_q;
            let mut others: Vec<usize> = (0..m).filter(|&v| v != pillar).collect();
            for i in (1..others.len()).rev() {
                others.swap(i, rng.gen_range(0..=i));
            }
            for &v in &others {
                if need == 0 {
                    break;
                }
                let add = rng.gen_range(1..=need.min(h_q));
                counts[v] = add;
                need -= add;
            }
            if need > 0 {
                continue 'outer;
            }
            groups.push(counts);
        }

        // Global eligibility keeps the phase-three cover solvable.
        let mut global = residue.clone();
        for g in &groups {
            for (t, &c) in global.iter_mut().zip(g) {
                *t += c;
            }
        }
        let total: u64 = global.iter().sum();
        if global.iter().any(|&c| c * l as u64 > total) {
            continue 'outer;
        }

        let mut b = TableBuilder::new(&["key"], "sa");
        for (gi, counts) in groups.iter().enumerate() {
            for (v, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    b.push_row(&[format!("g{gi}")], &format!("s{}", v + 1))
                        .unwrap();
                }
            }
        }
        for (v, &c) in residue.iter().enumerate() {
            for _ in 0..c {
                b.push_row(&[format!("f{v}")], &format!("s{}", v + 1))
                    .unwrap();
            }
        }
        out.push((b.finish().unwrap(), l));
    }
    out
}

/// Balanced two-class tables (always 2-eligible).
pub fn m2_instances(seed: u64, count: usize, max_pairs: usize) -> Vec<MicrodataTable> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let d = rng.gen_range(1..=3);
            let pairs = rng.gen_range(1..=max_pairs);
            let names: Vec<String> = (0..d).map(|i| format!("q{i}")).collect();
            let mut b = TableBuilder::new(&names, "sa");
            for k in 0..2 * pairs {
                let qi: Vec<String> = (0..d)
                    .map(|_| format!("v{}", rng.gen_range(0..3)))
                    .collect();
                b.push_row(&qi, if k % 2 == 0 { "s1" } else { "s2" })
                    .unwrap();
            }
            b.finish().unwrap()
        })
        .collect()
}
