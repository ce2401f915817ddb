//! Harmonic-spinor dimension tables per genus and spin structure.
//!
//! Counts are exact integers. Binomials are computed in `u128` with checked
//! arithmetic and genera above [`MAX_GENUS`] are refused.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_GENUS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceClass {
    Torus,
    Hyperelliptic,
    NonHyperellipticG3,
    #[serde(rename = "non_hyperelliptic_g4_typeI")]
    NonHyperellipticG4TypeI,
    #[serde(rename = "non_hyperelliptic_g4_typeII")]
    NonHyperellipticG4TypeII,
}

impl SurfaceClass {
    pub const ALL: [SurfaceClass; 5] = [
        SurfaceClass::Torus,
        SurfaceClass::Hyperelliptic,
        SurfaceClass::NonHyperellipticG3,
        SurfaceClass::NonHyperellipticG4TypeI,
        SurfaceClass::NonHyperellipticG4TypeII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceClass::Torus => "torus",
            SurfaceClass::Hyperelliptic => "hyperelliptic",
            SurfaceClass::NonHyperellipticG3 => "non_hyperelliptic_g3",
            SurfaceClass::NonHyperellipticG4TypeI => "non_hyperelliptic_g4_typeI",
            SurfaceClass::NonHyperellipticG4TypeII => "non_hyperelliptic_g4_typeII",
        }
    }
}

impl fmt::Display for SurfaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        let class = match key.as_str() {
            "torus" => SurfaceClass::Torus,
            "hyperelliptic" => SurfaceClass::Hyperelliptic,
            "non_hyperelliptic_g3" | "non_hyperelliptic" => SurfaceClass::NonHyperellipticG3,
            "non_hyperelliptic_g4_typei" | "non_hyperelliptic_g4_type_i" | "typei" | "type_i" => SurfaceClass::NonHyperellipticG4TypeI,
            "non_hyperelliptic_g4_typeii" | "non_hyperelliptic_g4_type_ii" | "typeii" | "type_ii" => SurfaceClass::NonHyperellipticG4TypeII,
            _ => return Err(Error::InvalidArgument(format!("unknown surface class '{s}'"))),
        };
        Ok(class)
    }
}

/// One row of a census: `count` spin structures sharing `h0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub descriptor: String,
    /// Divisor weight for hyperelliptic rows.
    pub weight: Option<i64>,
    pub count: u128,
    pub h0: u64,
}

impl CensusRow {
    /// Even structures are exactly those with even `h0`.
    pub fn is_even(&self) -> bool {
        self.h0 % 2 == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CensusEntry {
    pub genus: u32,
    pub surface_class: SurfaceClass,
    pub rows: Vec<CensusRow>,
    /// Set when two printed rows describe the same structures and were merged.
    pub overlap: Option<String>,
}

impl CensusEntry {
    pub fn total(&self) -> u128 {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// `(even, odd)` totals by the parity of `h0`.
    pub fn parity_totals(&self) -> (u128, u128) {
        self.rows.iter().fold((0, 0), |(e, o), r| if r.is_even() { (e + r.count, o) } else { (e, o + r.count) })
    }

    /// Check the row sum against `2^{2g}` and the parity totals against
    /// [`structure_counts`].
    pub fn verify(&self) -> Result<()> {
        let (even, odd) = structure_counts(self.genus)?;
        let total = self.total();
        if total != even + odd {
            return Err(Error::InvalidArgument(format!(
                "genus {} {}: rows sum to {total}, expected {}",
                self.genus,
                self.surface_class,
                even + odd
            )));
        }
        if self.parity_totals() != (even, odd) {
            return Err(Error::InvalidArgument(format!(
                "genus {} {}: parity totals {:?}, expected {:?}",
                self.genus,
                self.surface_class,
                self.parity_totals(),
                (even, odd)
            )));
        }
        Ok(())
    }
}

fn check_genus(genus: u32, min: u32) -> Result<()> {
    if genus < min {
        return Err(Error::InvalidArgument(format!("genus must be >= {min}, got {genus}")));
    }
    if genus > MAX_GENUS {
        return Err(Error::InvalidArgument(format!("genus {genus} exceeds the supported maximum {MAX_GENUS}")));
    }
    Ok(())
}

/// `C(n, k)` with overflow checks.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc
            .checked_mul(n as u128 - i)
            .ok_or_else(|| Error::InvalidArgument(format!("C({n},{k}) overflows")))?
            / (i + 1);
    }
    Ok(acc)
}

/// `(even, odd)` numbers of spin structures on a genus-`g` surface.
pub fn structure_counts(genus: u32) -> Result<(u128, u128)> {
    check_genus(genus, 1)?;
    let half = 1u128 << (genus - 1);
    let full = 1u128 << genus;
    Ok((half * (full + 1), half * (full - 1)))
}

fn weight_row(weight: i64, count: u128, h0: u64) -> CensusRow {
    CensusRow {
        descriptor: format!("weight {weight}"),
        weight: Some(weight),
        count,
        h0,
    }
}

/// Rows for a hyperelliptic surface of genus `g >= 2`, by divisor weight.
///
/// For even `g` the printed list has a row of weight `g - 1` with `2g + 2`
/// structures and also includes `w = g - 1` in the general weight range. Both
/// describe the same `C(2g+2, 1) = 2g + 2` structures with the same `h0`, so
/// they appear once and [`CensusEntry::overlap`] records the merge.
pub fn hyperelliptic_census(genus: u32) -> Result<CensusEntry> {
    check_genus(genus, 2)?;
    let g = genus as i64;
    let gu = genus as u64;
    let mut rows = Vec::new();
    let mut overlap = None;
    if genus % 2 == 1 {
        rows.push(weight_row(g - 1, 1, (gu + 1) / 2));
        for w in (1..=g - 2).step_by(2) {
            rows.push(weight_row(w, binomial(2 * gu + 2, (g - w) as u64)?, (w as u64 + 1) / 2));
        }
    } else {
        let top = weight_row(g - 1, 2 * gu as u128 + 2, (gu + 1) / 2);
        for w in (1..=g - 1).step_by(2) {
            let row = weight_row(w, binomial(2 * gu + 2, (g - w) as u64)?, (w as u64 + 1) / 2);
            if w == g - 1 {
                if row != top {
                    return Err(Error::InvalidArgument(format!(
                        "weight {w} rows disagree: {} vs {}",
                        row.count, top.count
                    )));
                }
                overlap = Some(format!(
                    "weight {w} is listed both as the top row (2g+2 = {}) and in the range w = 1, 3, .., g-1 \
                     (C(2g+2, 1) = {}); counted once",
                    top.count, row.count
                ));
            } else {
                rows.push(row);
            }
        }
        rows.insert(0, top);
    }
    rows.push(weight_row(-1, binomial(2 * gu + 1, gu)?, 0));
    Ok(CensusEntry {
        genus,
        surface_class: SurfaceClass::Hyperelliptic,
        rows,
        overlap,
    })
}

fn parity_row(descriptor: &str, count: u128, h0: u64) -> CensusRow {
    CensusRow {
        descriptor: descriptor.to_string(),
        weight: None,
        count,
        h0,
    }
}

/// Tabulated census for a supported `(genus, class)` pair.
pub fn known_case(genus: u32, class: SurfaceClass) -> Result<CensusEntry> {
    let unsupported = || {
        Err(Error::InvalidArgument(format!(
            "no census for genus {genus} with surface class {class}"
        )))
    };
    let rows = match (genus, class) {
        (1, SurfaceClass::Torus) => vec![parity_row("even", 3, 0), parity_row("odd (trivial)", 1, 1)],
        (g, SurfaceClass::Hyperelliptic) if g >= 2 => return hyperelliptic_census(g),
        (3, SurfaceClass::NonHyperellipticG3) => vec![parity_row("odd", 28, 1), parity_row("even", 36, 0)],
        (4, SurfaceClass::NonHyperellipticG4TypeI) => vec![
            parity_row("odd", 120, 1),
            parity_row("even, h0=2", 1, 2),
            parity_row("even, h0=0", 135, 0),
        ],
        (4, SurfaceClass::NonHyperellipticG4TypeII) => {
            vec![parity_row("odd", 120, 1), parity_row("even", 136, 0)]
        }
        _ => return unsupported(),
    };
    Ok(CensusEntry {
        genus,
        surface_class: class,
        rows,
        overlap: None,
    })
}

/// Aligned text table.
pub fn format_text(entry: &CensusEntry) -> String {
    let (even, odd) = entry.parity_totals();
    let mut out = format!("genus {} {}\n", entry.genus, entry.surface_class);
    out += &format!("{:<14} {:>12} {:>4} {:>6}\n", "structures", "count", "h0", "parity");
    for r in &entry.rows {
        let parity = if r.is_even() { "even" } else { "odd" };
        out += &format!("{:<14} {:>12} {:>4} {:>6}\n", r.descriptor, r.count, r.h0, parity);
    }
    out += &format!("{:<14} {:>12}   (even {even}, odd {odd})\n", "total", entry.total());
    if let Some(note) = &entry.overlap {
        out += &format!("note: {note}\n");
    }
    out
}

/// CSV with header `genus,class,descriptor,weight,count,h0,parity`; an overlap
/// note is emitted as a trailing `#` comment line.
pub fn format_csv(entry: &CensusEntry) -> String {
    let mut out = String::from("genus,class,descriptor,weight,count,h0,parity\n");
    for r in &entry.rows {
        out += &format!(
            "{},{},{},{},{},{},{}\n",
            entry.genus,
            entry.surface_class,
            r.descriptor.replace(',', ";"),
            r.weight.map(|w| w.to_string()).unwrap_or_default(),
            r.count,
            r.h0,
            if r.is_even() { "even" } else { "odd" }
        );
    }
    if let Some(note) = &entry.overlap {
        out += &format!("# {}\n", note.replace('\n', " "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_counts_small_genus() {
        assert_eq!(structure_counts(1).unwrap(), (3, 1));
        assert_eq!(structure_counts(2).unwrap(), (10, 6));
        assert_eq!(structure_counts(3).unwrap(), (36, 28));
        assert!(structure_counts(0).is_err());
        assert!(structure_counts(17).is_err());
        let (e, o) = structure_counts(16).unwrap();
        assert_eq!(e + o, 1u128 << 32);
    }

    #[test]
    fn binomial_matches_pascal() {
        let mut row = vec![1u128];
        for n in 1..=40u64 {
            let mut next = vec![1u128; n as usize + 1];
            for k in 1..n as usize {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for k in 0..=n {
                assert_eq!(binomial(n, k).unwrap(), row[k as usize]);
            }
        }
    }

    #[test]
    fn genus_three_hyperelliptic() {
        let e = hyperelliptic_census(3).unwrap();
        let got: Vec<_> = e.rows.iter().map(|r| (r.weight.unwrap(), r.count, r.h0)).collect();
        assert_eq!(got, vec![(2, 1, 2), (1, 28, 1), (-1, 35, 0)]);
        assert_eq!(e.total(), 64);
        assert!(e.overlap.is_none());
    }

    #[test]
    fn even_genus_overlap_is_merged_and_flagged() {
        let e = hyperelliptic_census(2).unwrap();
        assert_eq!(e.total(), 16);
        assert!(e.overlap.is_some());
        let e = hyperelliptic_census(4).unwrap();
        let got: Vec<_> = e.rows.iter().map(|r| (r.weight.unwrap(), r.count, r.h0)).collect();
        assert_eq!(got, vec![(3, 10, 2), (1, 120, 1), (-1, 126, 0)]);
    }

    #[test]
    fn every_supported_entry_verifies() {
        for g in 2..=MAX_GENUS {
            hyperelliptic_census(g).unwrap().verify().unwrap();
        }
        assert_eq!(hyperelliptic_census(5).unwrap().total(), 1024);
        for (g, c) in [
            (1, SurfaceClass::Torus),
            (3, SurfaceClass::NonHyperellipticG3),
            (4, SurfaceClass::NonHyperellipticG4TypeI),
            (4, SurfaceClass::NonHyperellipticG4TypeII),
        ] {
            known_case(g, c).unwrap().verify().unwrap();
        }
        assert!(known_case(5, SurfaceClass::NonHyperellipticG3).is_err());
        assert!(hyperelliptic_census(1).is_err());
    }

    #[test]
    fn class_names_round_trip() {
        for c in SurfaceClass::ALL {
            assert_eq!(c.name().parse::<SurfaceClass>().unwrap(), c);
        }
    }

    #[test]
    fn text_and_csv_tables() {
        let e = known_case(4, SurfaceClass::NonHyperellipticG4TypeI).unwrap();
        let t = format_text(&e);
        assert!(t.contains("total") && t.contains("256"));
        let csv = format_csv(&hyperelliptic_census(2).unwrap());
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
        assert!(csv.lines().last().unwrap().starts_with('#'));
    }
}
