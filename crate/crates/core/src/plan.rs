//! Named measurement settings for the witness, CGLMP and tomography runs.
//! Setting names are the join key between simulated count files and the
//! analysis code.

use crate::bases::{cglmp_basis_in, pair_basis, Axis, MeasurementBasis, ModeSpace, Side};
use crate::error::{Error, Result};

/// One signal/idler basis choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub name: String,
    pub signal: MeasurementBasis,
    pub idler: MeasurementBasis,
}

pub fn witness_setting_name(space: ModeSpace, j: usize, k: usize, axis: Axis) -> String {
    format!("W-{space}-{j:02}-{k:02}-{}", axis.letter())
}

pub fn cglmp_setting_name(d: usize, s: usize, i: usize) -> String {
    format!("B-d{d:02}-s{s}-i{i}")
}

pub fn tomo_setting_name(space: ModeSpace, j: usize, k: usize, signal: Axis, idler: Axis) -> String {
    format!("T-{space}-{j:02}-{k:02}-{}{}", signal.letter(), idler.letter())
}

/// Mode pairs `j < k` of `0..d`, in lexicographic order.
pub fn mode_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect()
}

pub fn witness_settings(space: ModeSpace, d: usize) -> Result<Vec<Setting>> {
    let mut out = Vec::with_capacity(3 * d * d.saturating_sub(1) / 2);
    for (j, k) in mode_pairs(d) {
        for axis in Axis::ALL {
            out.push(Setting {
                name: witness_setting_name(space, j, k, axis),
                signal: pair_basis(space, Side::Signal, j, k, axis, d)?,
                idler: pair_basis(space, Side::Idler, j, k, axis, d)?,
            });
        }
    }
    Ok(out)
}

/// The four CGLMP settings for dimension `d`, acting on modes `0..d` of `dim_total`.
pub fn cglmp_settings(d: usize, dim_total: usize) -> Result<Vec<Setting>> {
    if d > dim_total {
        return Err(Error::InvalidArgument(format!("CGLMP dimension {d} exceeds D = {dim_total}")));
    }
    let mut out = Vec::with_capacity(4);
    for s in 0..2 {
        for i in 0..2 {
            out.push(Setting {
                name: cglmp_setting_name(d, s, i),
                signal: cglmp_basis_in(Side::Signal, s, d, dim_total)?,
                idler: cglmp_basis_in(Side::Idler, i, d, dim_total)?,
            });
        }
    }
    Ok(out)
}

/// Tomography axis order: z, x, y, giving settings zz, zx, zy, xz, …, yy.
pub const TOMO_AXES: [Axis; 3] = [Axis::Z, Axis::X, Axis::Y];

pub fn tomo_settings(space: ModeSpace, j: usize, k: usize, d: usize) -> Result<Vec<Setting>> {
    let mut out = Vec::with_capacity(9);
    for a in TOMO_AXES {
        for b in TOMO_AXES {
            out.push(Setting {
                name: tomo_setting_name(space, j, k, a, b),
                signal: pair_basis(space, Side::Signal, j, k, a, d)?,
                idler: pair_basis(space, Side::Idler, j, k, b, d)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(witness_setting_name(ModeSpace::X, 3, 7, Axis::X), "W-X-03-07-x");
        assert_eq!(cglmp_setting_name(6, 0, 1), "B-d06-s0-i1");
        assert_eq!(tomo_setting_name(ModeSpace::K, 0, 6, Axis::Z, Axis::X), "T-K-00-06-zx");
    }

    #[test]
    fn counts() {
        assert_eq!(mode_pairs(10).len(), 45);
        assert_eq!(witness_settings(ModeSpace::K, 10).unwrap().len(), 135);
        assert_eq!(cglmp_settings(7, 10).unwrap().len(), 4);
        assert!(cglmp_settings(7, 6).is_err());
        let t = tomo_settings(ModeSpace::X, 0, 6, 10).unwrap();
        let names: Vec<_> = t.iter().map(|s| &s.name[10..]).collect();
        assert_eq!(names, ["zz", "zx", "zy", "xz", "xx", "xy", "yz", "yx", "yy"]);
    }
}
