//! Canonical small instances used throughout the test suite and docs.

use crate::model::{MicrodataTable, TableBuilder};

/// Ten-row hospital table with three QI attributes (Age, Gender, Education)
/// and Disease as the sensitive attribute. Its identical-QI classes are
/// rows {0,1}, {2}, {3}, {4..7}, {8,9}; with `l = 2` the engine terminates
/// in phase one with residue rows {0,1,2,3}.
pub fn medical() -> MicrodataTable {
    let rows: [(&str, &str, &str, &str); 10] = [
        ("41", "M", "graduate", "HIV"),
        ("41", "M", "graduate", "HIV"),
        ("25", "M", "bachelor", "pneumonia"),
        ("32", "M", "bachelor", "bronchitis"),
        ("55", "F", "highschool", "flu"),
        ("55", "F", "highschool", "flu"),
        ("55", "F", "highschool", "fever"),
        ("55", "F", "highschool", "fever"),
        ("62", "M", "highschool", "gastritis"),
        ("62", "M", "highschool", "dyspepsia"),
    ];
    let mut b = TableBuilder::new(&["Age", "Gender", "Education"], "Disease");
    for (age, gender, edu, disease) in rows {
        b.push_row(&[age, gender, edu], disease).unwrap();
    }
    b.finish().unwrap()
}

fn from_group_vectors(vectors: &[&[u64]]) -> MicrodataTable {
    let mut b = TableBuilder::new(&["key"], "sa");
    for (gi, counts) in vectors.iter().enumerate() {
        let key = format!("g{gi}");
        for (v, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                b.push_row(&[key.as_str()], &format!("s{}", v + 1)).unwrap();
            }
        }
    }
    b.finish().unwrap()
}

/// Three groups over five SA values that terminate in phase two for `l = 3`:
/// (3,1,1,2,3), (0,2,2,4,4) and (4,4,0,0,0). Phase one drains the third
/// group; phase two then ends with residue (4,4,2,1,1).
pub fn phase2_demo() -> MicrodataTable {
    from_group_vectors(&[&[3, 1, 1, 2, 3], &[0, 2, 2, 4, 4], &[4, 4, 0, 0, 0]])
}

/// Five groups over five SA values that force phase three for `l = 4`: two
/// thin conflicting groups (3,1,2,3,3) and (1,3,2,3,3) plus three one-value
/// feeders that phase one drains into the residue (4,4,4,0,0).
pub fn phase3_demo() -> MicrodataTable {
    from_group_vectors(&[
        &[3, 1, 2, 3, 3],
        &[1, 3, 2, 3, 3],
        &[4, 0, 0, 0, 0],
        &[0, 4, 0, 0, 0],
        &[0, 0, 4, 0, 0],
    ])
}
