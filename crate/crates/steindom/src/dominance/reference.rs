//! Published reference mark grids and the matching preset parameter grids.
//! Rows are p = 3..10; marks are `*` (individually checked non-negative),
//! `o` (covered by a dimension-uniformity shortcut), `-` (negative).

use super::{CMode, FamilyParams};

/// Log family, C = 1, columns b = 1/2, 1, 3/2, 2, 5/2, 3, 7/2.
pub const TABLE1_C_FIXED: [&str; 8] = [
    "*------", "o**----", "ooo*---", "oooo*--", "ooooo*-", "oooooo-", "oooooo-", "oooooo-",
];

/// Log family, C = 1/(p-2), same columns.
pub const TABLE1_C_INV: [&str; 8] = [
    "*------", "o*-----", "oo**---", "oooo---", "oooo*--", "ooooo*-", "oooooo-", "oooooo-",
];

/// Power family, C = 1. Five blocks b = 1, 3, 5, 7, 9, each with
/// γ = 1/4, 1/2, 1, 2, 3, 4, 5 (35 columns).
pub const TABLE2: [&str; 8] = [
    "*********-----*------*------*------",
    "ooooooooo*****o**----o*-----o*-----",
    "ooooooooooooooooo****oo*----oo*----",
    "oooooooooooooooooooooooo**--ooo----",
    "oooooooooooooooooooooooooo**ooo*---",
    "oooooooooooooooooooooooooooooooo***",
    "ooooooooooooooooooooooooooooooooooo",
    "ooooooooooooooooooooooooooooooooooo",
];

/// Power family, C = 1/(p-2), same columns as TABLE2.
pub const TABLE3: [&str; 8] = [
    "*********-----*------*------*------",
    "ooo****oo*----o*-----o*-----o*-----",
    "oooo***oooo**-oo*----oo-----oo-----",
    "ooooo**ooooo**oo*----oo*----oo*----",
    "oooooo*oooooo*ooo**--ooo----ooo----",
    "ooooooooooooooooooo**ooo*---ooo----",
    "ooooooooooooooooooooooooo*--ooo*---",
    "oooooooooooooooooooooooooo**oooo---",
];

pub const P_RANGE: [usize; 8] = [3, 4, 5, 6, 7, 8, 9, 10];

fn phi1_columns() -> Vec<FamilyParams> {
    (1..=7).map(|k| FamilyParams::Phi1 { b: k as f64 / 2.0 }).collect()
}

fn phi2_columns() -> Vec<FamilyParams> {
    let gammas = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
    let mut cols = Vec::with_capacity(35);
    for b in [1.0, 3.0, 5.0, 7.0, 9.0] {
        for g in gammas {
            cols.push(FamilyParams::Phi2 { b, gamma: g });
        }
    }
    cols
}

/// Columns, p range, C mode and reference mark grid of a published table.
pub type Preset = (Vec<FamilyParams>, Vec<usize>, CMode, &'static [&'static str; 8]);

pub fn preset(name: &str) -> Option<Preset> {
    match name {
        "table1-fixed" => Some((phi1_columns(), P_RANGE.to_vec(), CMode::Fixed(1.0), &TABLE1_C_FIXED)),
        "table1-inverse" => Some((phi1_columns(), P_RANGE.to_vec(), CMode::InverseDim, &TABLE1_C_INV)),
        "table2" => Some((phi2_columns(), P_RANGE.to_vec(), CMode::Fixed(1.0), &TABLE2)),
        "table3" => Some((phi2_columns(), P_RANGE.to_vec(), CMode::InverseDim, &TABLE3)),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 4] = ["table1-fixed", "table1-inverse", "table2", "table3"];
