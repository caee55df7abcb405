//! Spin opinion vectors and the two-member consensus used in role energies.

use crate::error::{Error, Result};

/// Median entry for components where the two voters disagree.
pub const TIE: i8 = 0;

/// Componentwise majority of two opinions; disagreements become [`TIE`].
pub fn median_opinion(sj: &[i8], sk: &[i8]) -> Result<Vec<i8>> {
    if sj.len() != sk.len() {
        return Err(Error::Dimension { expected: sj.len(), got: sk.len() });
    }
    Ok(sj.iter().zip(sk).map(|(&a, &b)| if a == b { a } else { TIE }).collect())
}

/// Disagreements count 1, ties count 0.5.
pub fn hamming_to_median(si: &[i8], med: &[i8]) -> Result<f64> {
    if si.len() != med.len() {
        return Err(Error::Dimension { expected: med.len(), got: si.len() });
    }
    Ok(si
        .iter()
        .zip(med)
        .map(|(&s, &m)| match m {
            TIE => 0.5,
            m if m == s => 0.0,
            _ => 1.0,
        })
        .sum())
}

pub fn dot(a: &[i8], b: &[i8]) -> i32 {
    a.iter().zip(b).map(|(&x, &y)| x as i32 * y as i32).sum()
}
