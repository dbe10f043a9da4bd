//! Dyadic intervals of the unit interval, averages over (dilated) intervals,
//! and the bookkeeping of sparse families.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicPrefix, SampledFunction};

/// Default maximum dyadic depth.
pub const DEFAULT_MAX_DEPTH: u32 = 20;

/// Sparsity parameter: every witness must exceed this fraction of its cube.
pub const SPARSITY: f64 = 0.5;

/// A closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// `Q^n_k = [k 2^-n, (k+1) 2^-n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub const ROOT: DyadicInterval = DyadicInterval { level: 0, index: 0 };

    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > 63 || index >= (1u64 << level) {
            return Err(Error::InvalidInput(format!(
                "index {index} out of range for dyadic level {level}"
            )));
        }
        Ok(Self { level, index })
    }

    pub fn measure(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Side length; equals the measure in one dimension.
    pub fn side(&self) -> f64 {
        self.measure()
    }

    pub fn lo(&self) -> f64 {
        self.index as f64 * self.measure()
    }

    pub fn hi(&self) -> f64 {
        (self.index + 1) as f64 * self.measure()
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo(), self.hi())
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Self {
            level: self.level - 1,
            index: self.index / 2,
        })
    }

    /// The two halves of `self`; fails beyond `max_depth`.
    pub fn children(&self, max_depth: u32) -> Result<(Self, Self)> {
        if self.level >= max_depth {
            return Err(Error::DepthExceeded {
                level: self.level + 1,
                max_depth,
            });
        }
        let level = self.level + 1;
        Ok((
            Self {
                level,
                index: 2 * self.index,
            },
            Self {
                level,
                index: 2 * self.index + 1,
            },
        ))
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    /// Grid cells `[first, first + count)` covered at grid level `grid_level`.
    pub fn cells(&self, grid_level: u32) -> Result<(usize, usize)> {
        if self.level > grid_level {
            return Err(Error::InvalidGrid(format!(
                "interval at level {} is finer than the grid (level {grid_level})",
                self.level
            )));
        }
        let shift = grid_level - self.level;
        Ok(((self.index << shift) as usize, 1usize << shift))
    }

    /// The dyadic interval at `level` containing the grid cell `cell`.
    pub fn containing_cell(cell: usize, grid_level: u32, level: u32) -> Self {
        Self {
            level,
            index: (cell >> (grid_level - level)) as u64,
        }
    }

    /// All `2^level` intervals of one level.
    pub fn level_iter(level: u32) -> impl Iterator<Item = Self> {
        (0..(1u64 << level)).map(move |index| Self { level, index })
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q[{},{}]", self.level, self.index)
    }
}

/// How a dilated interval is closed up against the unit domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clip {
    /// Raw interval, possibly leaving `[0, 1]`.
    None,
    /// Intersect with `[0, 1]`.
    Unit,
    /// Periodic domain: an interval of length `>= 1` becomes the whole torus
    /// `[0, 1]`; shorter intervals are kept and read modulo 1.
    Torus,
}

/// The `lambda`-dilate of `p` about its center.
pub fn dilate(p: &DyadicInterval, lambda: f64, clip: Clip) -> Result<Interval> {
    if !(lambda >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "dilation factor must be >= 1, got {lambda}"
        )));
    }
    let c = p.interval().center();
    let half = 0.5 * lambda * p.measure();
    let raw = Interval::new(c - half, c + half);
    Ok(match clip {
        Clip::None => raw,
        Clip::Unit => Interval::new(raw.lo.max(0.0), raw.hi.min(1.0)),
        Clip::Torus if raw.len() >= 1.0 => Interval::new(0.0, 1.0),
        Clip::Torus => raw,
    })
}

/// Cell mask of the grid cells whose midpoints lie in `interval` read
/// modulo 1 (an interval of length `>= 1` selects every cell).
pub fn periodic_mask(n: usize, interval: &Interval) -> Vec<bool> {
    if interval.len() >= 1.0 {
        return vec![true; n];
    }
    let h = 1.0 / n as f64;
    (0..n)
        .map(|j| {
            let x = (j as f64 + 0.5) * h;
            let shifted = x - interval.lo;
            shifted.rem_euclid(1.0) <= interval.len()
        })
        .collect()
}

/// `(⨍_I |f|^p)^{1/p}` with the midpoint rule (exact partial cells, periodic
/// extension of `f`). `p = inf` gives the max over cells meeting `I`.
pub fn p_average(f: &SampledFunction, interval: &Interval, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(format!(
            "average exponent must be >= 1, got {p}"
        )));
    }
    if interval.is_empty() {
        return Err(Error::EmptyIntersection {
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    if p.is_infinite() {
        let mask = periodic_mask(f.len(), interval);
        let m = f
            .samples()
            .iter()
            .zip(&mask)
            .filter(|(_, &keep)| keep)
            .fold(0.0_f64, |m, (v, _)| m.max(v.abs()));
        return Ok(m);
    }
    let powered: Vec<f64> = f.samples().iter().map(|v| v.abs().powf(p)).collect();
    let pre = PeriodicPrefix::new(&powered);
    let avg = pre.integral(interval.lo, interval.hi) / interval.len();
    Ok(avg.max(0.0).powf(1.0 / p))
}

/// Witness set `F_P` of a sparse family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// Union of dyadic intervals contained in the member.
    Intervals(Vec<DyadicInterval>),
    /// One flag per grid cell of the member, at the family's grid level.
    Mask(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMember {
    pub interval: DyadicInterval,
    pub witness: Option<Witness>,
}

/// A collection of dyadic intervals with witness sets `F_P ⊂ P`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseFamily {
    /// Grid level of cell masks (`log2 N`).
    pub grid_level: u32,
    pub members: Vec<SparseMember>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparsityReport {
    pub ok: bool,
    pub disjoint: bool,
    /// `min |F_P|/|P|`; 1 for an empty family.
    pub worst_ratio: f64,
}

impl SparseFamily {
    pub fn new(grid_level: u32) -> Self {
        Self {
            grid_level,
            members: Vec::new(),
        }
    }

    pub fn push(&mut self, interval: DyadicInterval, witness: Witness) {
        self.members.push(SparseMember {
            interval,
            witness: Some(witness),
        });
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn intervals(&self) -> impl Iterator<Item = &DyadicInterval> {
        self.members.iter().map(|m| &m.interval)
    }

    /// Sorts members in canonical `(level, index)` order.
    pub fn sort(&mut self) {
        self.members.sort_by_key(|m| m.interval);
    }

    /// Serialized form: `[{level, index, witness_mask}]` with masks as
    /// `0`/`1` strings over the member's grid cells.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let resolution = self.resolution_level();
        let mut entries = Vec::with_capacity(self.members.len());
        for (i, m) in self.members.iter().enumerate() {
            let mask = self.member_mask(i, resolution)?;
            let text: String = mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
            entries.push(serde_json::json!({
                "level": m.interval.level,
                "index": m.interval.index,
                "witness_mask": text,
            }));
        }
        Ok(serde_json::json!({
            "grid_level": resolution,
            "members": entries,
        }))
    }

    /// Parses the form written by [`SparseFamily::to_json`].
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("sparse family JSON: {m}"));
        let grid_level = value["grid_level"]
            .as_u64()
            .ok_or_else(|| bad("missing grid_level"))? as u32;
        let mut family = SparseFamily::new(grid_level);
        for entry in value["members"]
            .as_array()
            .ok_or_else(|| bad("missing members"))?
        {
            let level = entry["level"]
                .as_u64()
                .ok_or_else(|| bad("missing level"))? as u32;
            let index = entry["index"]
                .as_u64()
                .ok_or_else(|| bad("missing index"))?;
            let interval = DyadicInterval::new(level, index)?;
            let witness = match entry["witness_mask"].as_str() {
                Some(text) => Some(Witness::Mask(
                    text.chars()
                        .map(|c| match c {
                            '1' => Ok(true),
                            '0' => Ok(false),
                            _ => Err(bad("witness_mask must be a 0/1 string")),
                        })
                        .collect::<Result<Vec<_>>>()?,
                )),
                None => None,
            };
            family.members.push(SparseMember { interval, witness });
        }
        Ok(family)
    }

    /// Finest level needed to represent every member and witness as cells.
    fn resolution_level(&self) -> u32 {
        let mut r = self.grid_level;
        for m in &self.members {
            r = r.max(m.interval.level);
            if let Some(Witness::Intervals(parts)) = &m.witness {
                r = r.max(parts.iter().map(|p| p.level).max().unwrap_or(0));
            }
        }
        r
    }

    /// Witness of member `i` as a cell mask over the member at `resolution`.
    fn member_mask(&self, i: usize, resolution: u32) -> Result<Vec<bool>> {
        let m = &self.members[i];
        let (first, count) = m.interval.cells(resolution)?;
        match &m.witness {
            None => Err(Error::MissingWitness(i)),
            Some(Witness::Mask(mask)) => {
                let (_, own) = m.interval.cells(self.grid_level)?;
                if mask.len() != own {
                    return Err(Error::InvalidInput(format!(
                        "witness mask of member {i} has {} cells, expected {own}",
                        mask.len()
                    )));
                }
                let rep = count / own;
                Ok(mask
                    .iter()
                    .flat_map(|&b| std::iter::repeat_n(b, rep))
                    .collect())
            }
            Some(Witness::Intervals(parts)) => {
                let mut mask = vec![false; count];
                for part in parts {
                    if !m.interval.contains(part) {
                        return Err(Error::InvalidInput(format!(
                            "witness piece {part} of member {i} leaves {}",
                            m.interval
                        )));
                    }
                    let (s, c) = part.cells(resolution)?;
                    for cell in &mut mask[s - first..s - first + c] {
                        *cell = true;
                    }
                }
                Ok(mask)
            }
        }
    }

    /// Checks pairwise disjointness of witnesses and `|F_P| > |P|/2`.
    pub fn verify_sparsity(&self) -> Result<SparsityReport> {
        let resolution = self.resolution_level();
        if resolution > 30 {
            return Err(Error::InvalidInput(format!(
                "witness resolution level {resolution} too fine to verify"
            )));
        }
        let mut owner = vec![false; 1usize << resolution];
        let mut disjoint = true;
        let mut worst = 1.0_f64;
        for i in 0..self.members.len() {
            let mask = self.member_mask(i, resolution)?;
            let (first, count) = self.members[i].interval.cells(resolution)?;
            let mut hits = 0usize;
            for (j, &b) in mask.iter().enumerate() {
                if b {
                    hits += 1;
                    let slot = &mut owner[first + j];
                    if *slot {
                        disjoint = false;
                    }
                    *slot = true;
                }
            }
            worst = worst.min(hits as f64 / count as f64);
        }
        Ok(SparsityReport {
            ok: disjoint && worst > SPARSITY,
            disjoint,
            worst_ratio: worst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dy(level: u32, index: u64) -> DyadicInterval {
        DyadicInterval::new(level, index).unwrap()
    }

    #[test]
    fn children_of_root_and_inner() {
        let (a, b) = DyadicInterval::ROOT.children(DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(a.interval(), Interval::new(0.0, 0.5));
        assert_eq!(b.interval(), Interval::new(0.5, 1.0));
        let (c, d) = dy(3, 5).children(DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!((c, d), (dy(4, 10), dy(4, 11)));
        assert!(matches!(
            dy(4, 0).children(4),
            Err(Error::DepthExceeded {
                level: 5,
                max_depth: 4
            })
        ));
    }

    #[test]
    fn dilation() {
        let p = dy(2, 1);
        assert_eq!(
            dilate(&p, 1.0, Clip::None).unwrap(),
            Interval::new(0.25, 0.5)
        );
        let five = dilate(&p, 5.0, Clip::None).unwrap();
        assert_relative_eq!(five.lo, -0.25);
        assert_relative_eq!(five.hi, 1.0);
        assert_eq!(
            dilate(&DyadicInterval::ROOT, 5.0, Clip::Unit).unwrap(),
            Interval::new(0.0, 1.0)
        );
        assert_eq!(
            dilate(&DyadicInterval::ROOT, 5.0, Clip::Torus).unwrap(),
            Interval::new(0.0, 1.0)
        );
        assert!(dilate(&p, 0.5, Clip::None).is_err());
    }

    #[test]
    fn averages() {
        let three = SampledFunction::constant(64, 3.0).unwrap();
        assert_relative_eq!(
            p_average(&three, &Interval::new(0.0, 0.5), 2.0).unwrap(),
            3.0,
            epsilon = 1e-14
        );
        let id = SampledFunction::from_fn(1024, |x| x).unwrap();
        assert_relative_eq!(
            p_average(&id, &Interval::new(0.0, 1.0), 1.0).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(p_average(&id, &Interval::new(0.3, 0.3), 1.0).is_err());
    }

    #[test]
    fn singular_average_matches_closed_form() {
        // x^a averaged over [0, b] equals b^a/(a+1)
        let a = -0.4;
        let b = 1.0 / 16.0;
        let f = SampledFunction::from_fn(1 << 16, |x| x.powf(a)).unwrap();
        let grid = p_average(&f, &Interval::new(0.0, b), 1.0).unwrap();
        let exact = b.powf(a) / (a + 1.0);
        assert!(
            (grid / exact - 1.0).abs() < 0.02,
            "grid {grid} exact {exact}"
        );
    }

    #[test]
    fn sparsity_single_root() {
        let mut fam = SparseFamily::new(4);
        fam.push(
            DyadicInterval::ROOT,
            Witness::Intervals(vec![DyadicInterval::ROOT]),
        );
        let r = fam.verify_sparsity().unwrap();
        assert!(r.ok);
        assert_eq!(r.worst_ratio, 1.0);
    }

    #[test]
    fn sparsity_ratio_is_the_smallest_witness_fraction() {
        // F_[0,1] = [1/2,1] is exactly half of [0,1]: not strictly more
        let mut fam = SparseFamily::new(3);
        fam.push(DyadicInterval::ROOT, Witness::Intervals(vec![dy(1, 1)]));
        fam.push(dy(1, 0), Witness::Intervals(vec![dy(2, 0), dy(3, 2)]));
        let r = fam.verify_sparsity().unwrap();
        assert!(r.disjoint);
        assert_relative_eq!(r.worst_ratio, 0.5);
        assert!(!r.ok);

        // F_[0,1] = [3/8,1] has measure 5/8
        let mut fam = SparseFamily::new(3);
        fam.push(
            DyadicInterval::ROOT,
            Witness::Intervals(vec![dy(3, 3), dy(2, 2), dy(2, 3)]),
        );
        fam.push(dy(1, 0), Witness::Intervals(vec![dy(2, 0), dy(3, 2)]));
        let r = fam.verify_sparsity().unwrap();
        assert!(r.ok);
        assert_relative_eq!(r.worst_ratio, 0.625);
    }

    #[test]
    fn overlapping_witnesses_fail() {
        let mut fam = SparseFamily::new(2);
        fam.push(
            DyadicInterval::ROOT,
            Witness::Intervals(vec![dy(1, 0), dy(2, 2)]),
        );
        fam.push(dy(1, 0), Witness::Intervals(vec![dy(1, 0)]));
        let r = fam.verify_sparsity().unwrap();
        assert!(!r.disjoint);
        assert!(!r.ok);
    }

    #[test]
    fn missing_witness_is_an_error() {
        let fam = SparseFamily {
            grid_level: 2,
            members: vec![SparseMember {
                interval: DyadicInterval::ROOT,
                witness: None,
            }],
        };
        assert_eq!(fam.verify_sparsity().unwrap_err(), Error::MissingWitness(0));
    }

    #[test]
    fn json_round_trip_keeps_masks() {
        let mut fam = SparseFamily::new(2);
        fam.push(
            DyadicInterval::ROOT,
            Witness::Mask(vec![true, true, true, false]),
        );
        fam.push(dy(2, 3), Witness::Mask(vec![true]));
        let json = fam.to_json().unwrap();
        assert_eq!(json["members"][0]["witness_mask"], "1110");
        let back = SparseFamily::from_json(&json).unwrap();
        assert_eq!(back, fam);
    }

    proptest! {
        #[test]
        fn levels_tile_the_unit_interval(level in 0u32..14) {
            let total: f64 = DyadicInterval::level_iter(level).map(|q| q.measure()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn nested_or_disjoint(l1 in 0u32..12, i1 in 0u64..4096, l2 in 0u32..12, i2 in 0u64..4096) {
            let a = dy(l1, i1 % (1 << l1));
            let b = dy(l2, i2 % (1 << l2));
            let overlap = a.lo().max(b.lo()) < a.hi().min(b.hi());
            prop_assert_eq!(overlap, a.contains(&b) || b.contains(&a));
            if l1 == l2 && a.index != b.index {
                prop_assert!(a.is_disjoint(&b));
            }
        }

        #[test]
        fn parent_of_child(level in 0u32..19, index in 0u64..(1 << 19)) {
            let p = dy(level, index % (1 << level));
            let (c0, c1) = p.children(DEFAULT_MAX_DEPTH).unwrap();
            prop_assert_eq!(c0.parent(), Some(p));
            prop_assert_eq!(c1.parent(), Some(p));
        }

        #[test]
        fn p_average_is_monotone_in_p(seed in 0u64..1000, lo in 0.0f64..0.9, len in 0.01f64..0.5, p1 in 1.0f64..6.0, dp in 0.0f64..4.0) {
            let f = SampledFunction::from_fn(256, |x| ((seed as f64 + 1.0) * x * 7.3).sin() + 0.3 * (x * 19.0).cos()).unwrap();
            let i = Interval::new(lo, lo + len);
            let a = p_average(&f, &i, p1).unwrap();
            let b = p_average(&f, &i, p1 + dp).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12) + 1e-14);
        }
    }
}
