use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SampledFunction;
use crate::heatlp::{grand_maximal_s_star, hl_maximal, SquareEngine, SquareFunctionKind, TimeGrid};
use crate::lattice::{
    dilate, p_average, periodic_mask, Clip, DyadicInterval, SparseFamily, Witness,
    DEFAULT_MAX_DEPTH,
};

/// Relative width at which the threshold bisection stops.
pub const ETA_PRECISION: f64 = 1e-3;

/// How the localized Hardy-Littlewood part of the stopping rule is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MStarVariant {
    /// `sup_{P ∋ x} inf_{y ∈ P} M_{p0} f(y)`; at grid resolution this is
    /// `M_{p0} f(x)`.
    Inf,
    /// `sup_{P ∋ x, P ⊆ Q} (⨍_P |f|^{p0})^{1/p0}`.
    Sup,
}

#[derive(Debug, Clone, Serialize)]
pub struct SparseBuildConfig {
    pub p0: f64,
    pub q0: f64,
    pub kind: SquareFunctionKind,
    /// Fixed threshold; `None` recalibrates at every node.
    pub eta: Option<f64>,
    pub max_depth: u32,
    /// Dilation of the averaging intervals in the form.
    pub dilation: f64,
    pub time_grid: TimeGrid,
    pub m_star: MStarVariant,
    /// Adds the per-cube in/out/cross/large split of the left side.
    pub diagnostics: bool,
}

impl SparseBuildConfig {
    pub fn new(p0: f64, q0: f64) -> Self {
        Self {
            p0,
            q0,
            kind: SquareFunctionKind::Vertical,
            eta: None,
            max_depth: 10,
            dilation: 5.0,
            time_grid: TimeGrid::default(),
            m_star: MStarVariant::Inf,
            diagnostics: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 >= 1.0 && self.p0 < 2.0) || !(self.q0 > 2.0) {
            return Err(Error::InvalidExponent(format!(
                "need 1 <= p0 < 2 < q0, got p0 = {}, q0 = {}",
                self.p0, self.q0
            )));
        }
        if self.max_depth > DEFAULT_MAX_DEPTH {
            return Err(Error::InvalidInput(format!(
                "max_depth {} exceeds the lattice depth {DEFAULT_MAX_DEPTH}",
                self.max_depth
            )));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "eta must be positive, got {eta}"
                )));
            }
        }
        if self.dilation != 1.0 && self.dilation != 5.0 {
            return Err(Error::InvalidInput(format!(
                "dilation must be 1 or 5, got {}",
                self.dilation
            )));
        }
        self.kind.validate()
    }
}

/// `max(M*, S*) / A` on the cells of `Q`, where `A = (⨍_{5Q} |f|^{p0})^{1/p0}`.
#[derive(Debug, Clone)]
pub struct StoppingField {
    pub cube: DyadicInterval,
    pub reference: f64,
    /// `None` when `A = 0`.
    pub ratios: Option<Vec<f64>>,
}

impl StoppingField {
    /// Number of cells of `Q` with ratio `> eta`.
    pub fn count_above(&self, eta: f64) -> usize {
        self.ratios
            .as_ref()
            .map_or(0, |r| r.iter().filter(|&&v| v > eta).count())
    }

    /// Cell mask of `E(Q; eta)` over the cells of `Q`.
    pub fn local_mask(&self, eta: f64, cells: usize) -> Vec<bool> {
        match &self.ratios {
            Some(r) => r.iter().map(|&v| v > eta).collect(),
            None => vec![false; cells],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaCalibration {
    pub eta: f64,
    /// `(eta, |E(eta)| / |Q|)` in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

/// The stopping-time machinery for one grid size and configuration.
#[derive(Debug, Clone)]
pub struct Stopping {
    cfg: SparseBuildConfig,
    engine: SquareEngine,
}

impl Stopping {
    pub fn new(n: usize, cfg: SparseBuildConfig) -> Result<Self> {
        cfg.validate()?;
        let engine = SquareEngine::new(n, cfg.kind, cfg.time_grid.clone())?;
        Ok(Self { cfg, engine })
    }

    pub fn config(&self) -> &SparseBuildConfig {
        &self.cfg
    }

    pub fn engine(&self) -> &SquareEngine {
        &self.engine
    }

    pub fn field(&self, f: &SampledFunction, cube: &DyadicInterval) -> Result<StoppingField> {
        let grid_level = f.level();
        let (first, len) = cube.cells(grid_level)?;
        let reference = p_average(f, &dilate(cube, 5.0, Clip::Torus)?, self.cfg.p0)?;
        if reference == 0.0 {
            return Ok(StoppingField {
                cube: *cube,
                reference,
                ratios: None,
            });
        }
        let m_star = match self.cfg.m_star {
            MStarVariant::Inf => {
                hl_maximal(f, self.cfg.p0)?.into_samples()[first..first + len].to_vec()
            }
            MStarVariant::Sup => local_dyadic_maximal(f, cube, self.cfg.p0)?,
        };
        let s_star = grand_maximal_s_star(&self.engine, f, cube, self.cfg.q0)?;
        let ratios = m_star
            .iter()
            .zip(&s_star.samples()[first..first + len])
            .map(|(&m, &s)| m.max(s) / reference)
            .collect();
        Ok(StoppingField {
            cube: *cube,
            reference,
            ratios: Some(ratios),
        })
    }

    /// Grid mask (whole torus) of `E(Q; eta)`.
    pub fn exceptional_set(
        &self,
        f: &SampledFunction,
        cube: &DyadicInterval,
        eta: f64,
    ) -> Result<Vec<bool>> {
        if !(eta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "eta must be positive, got {eta}"
            )));
        }
        let field = self.field(f, cube)?;
        let (first, len) = cube.cells(f.level())?;
        let mut mask = vec![false; f.len()];
        mask[first..first + len].copy_from_slice(&field.local_mask(eta, len));
        Ok(mask)
    }

    pub fn eta_calibrate(
        &self,
        f: &SampledFunction,
        cube: &DyadicInterval,
    ) -> Result<EtaCalibration> {
        let field = self.field(f, cube)?;
        calibrate(&field)
    }

    pub fn build(&self, f: &SampledFunction, root: &DyadicInterval) -> Result<SparseBuild> {
        let mut nodes = self.node(f, f, root, None, 0)?;
        nodes.sort_by_key(|n| n.cube);
        let mut family = SparseFamily::new(f.level());
        let mut truncated = false;
        let mut infos = Vec::with_capacity(nodes.len());
        for n in nodes {
            truncated |= n.truncated;
            family.push(n.cube, Witness::Mask(n.witness));
            infos.push(n.info);
        }
        Ok(SparseBuild {
            family,
            nodes: infos,
            truncated,
        })
    }

    fn node(
        &self,
        f: &SampledFunction,
        local: &SampledFunction,
        cube: &DyadicInterval,
        parent: Option<DyadicInterval>,
        depth: u32,
    ) -> Result<Vec<NodeOut>> {
        let grid_level = f.level();
        let (_, len) = cube.cells(grid_level)?;
        let field = self.field(local, cube)?;
        let eta = match (self.cfg.eta, &field.ratios) {
            (_, None) => None,
            (Some(eta), _) => Some(eta),
            (None, Some(_)) => Some(calibrate(&field)?.eta),
        };
        let local_mask = match eta {
            Some(eta) => field.local_mask(eta, len),
            None => vec![false; len],
        };
        let cover = maximal_cover_local(&local_mask, cube, grid_level)?;
        let exceptional = local_mask.iter().filter(|&&b| b).count() as f64 / len as f64;
        let stop = depth >= self.cfg.max_depth;
        let mut out = vec![NodeOut {
            cube: *cube,
            witness: local_mask.iter().map(|&b| !b).collect(),
            truncated: stop && !cover.is_empty(),
            info: NodeInfo {
                cube: *cube,
                parent,
                depth,
                eta,
                exceptional_fraction: exceptional,
                reference: field.reference,
            },
        }];
        if stop {
            return Ok(out);
        }
        let children: Vec<Vec<NodeOut>> = cover
            .par_iter()
            .map(|p| {
                let mask = periodic_mask(f.len(), &dilate(p, 5.0, Clip::Torus)?);
                let restricted = f.masked(&mask)?;
                self.node(f, &restricted, p, Some(*cube), depth + 1)
            })
            .collect::<Result<_>>()?;
        out.extend(children.into_iter().flatten());
        Ok(out)
    }
}

struct NodeOut {
    cube: DyadicInterval,
    witness: Vec<bool>,
    truncated: bool,
    info: NodeInfo,
}

/// Per-member record of the construction.
#[derive(Debug, Clone, Serialize)]
pub struct NodeInfo {
    pub cube: DyadicInterval,
    /// The member whose exceptional set produced this one.
    pub parent: Option<DyadicInterval>,
    pub depth: u32,
    /// Threshold used at this node (`None` when `f` vanishes on `5Q`).
    pub eta: Option<f64>,
    pub exceptional_fraction: f64,
    pub reference: f64,
}

#[derive(Debug, Clone)]
pub struct SparseBuild {
    pub family: SparseFamily,
    /// Same order as `family.members`.
    pub nodes: Vec<NodeInfo>,
    /// Set when the depth cap stopped a non-empty exceptional set.
    pub truncated: bool,
}

/// Local `p`-dyadic maximal function of `f` inside `cube`, on its cells.
fn local_dyadic_maximal(f: &SampledFunction, cube: &DyadicInterval, p: f64) -> Result<Vec<f64>> {
    let grid_level = f.level();
    let (first, len) = cube.cells(grid_level)?;
    let powered: Vec<f64> = f.samples()[first..first + len]
        .iter()
        .map(|v| {
            if p.is_infinite() {
                v.abs()
            } else {
                v.abs().powf(p)
            }
        })
        .collect();
    let mut best = vec![0.0_f64; len];
    let mut width = len;
    while width >= 1 {
        for start in (0..len).step_by(width) {
            let chunk = &powered[start..start + width];
            let value = if p.is_infinite() {
                chunk.iter().cloned().fold(0.0, f64::max)
            } else {
                (chunk.iter().sum::<f64>() / width as f64).powf(1.0 / p)
            };
            for b in &mut best[start..start + width] {
                *b = b.max(value);
            }
        }
        width /= 2;
    }
    Ok(best)
}

/// Geometric bisection for the smallest `eta` (to relative precision
/// [`ETA_PRECISION`]) with `|E(Q; eta)| < |Q|/2`.
pub fn calibrate(field: &StoppingField) -> Result<EtaCalibration> {
    let ratios = match &field.ratios {
        Some(r) => r,
        None => {
            return Err(Error::InvalidInput(format!(
                "f vanishes on the dilate of {}; no threshold to calibrate",
                field.cube
            )))
        }
    };
    let len = ratios.len();
    let mut trace = Vec::new();
    let mut ok = |eta: f64| {
        let c = field.count_above(eta);
        trace.push((eta, c as f64 / len as f64));
        2 * c < len
    };
    let top = ratios.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(EtaCalibration { eta: 1.0, trace });
    }
    let mut hi = top;
    ok(hi);
    let mut lo = 0.5 * hi;
    while ok(lo) {
        hi = lo;
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            break;
        }
    }
    while hi / lo > 1.0 + ETA_PRECISION {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    check_monotone(&trace)?;
    Ok(EtaCalibration { eta: hi, trace })
}

fn check_monotone(trace: &[(f64, f64)]) -> Result<()> {
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].1 > w[0].1 {
            return Err(Error::Invariant(format!(
                "|E(eta)| increased from {} at eta = {} to {} at eta = {}",
                w[0].1, w[0].0, w[1].1, w[1].0
            )));
        }
    }
    Ok(())
}

/// Maximal dyadic subintervals of `cube` whose cells all lie in the mask.
/// `mask` covers the whole grid.
pub fn maximal_cover(mask: &[bool], cube: &DyadicInterval) -> Result<Vec<DyadicInterval>> {
    let n = mask.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "mask length {n} is not a power of two"
        )));
    }
    let grid_level = n.trailing_zeros();
    let (first, len) = cube.cells(grid_level)?;
    if mask[..first].iter().chain(&mask[first + len..]).any(|&b| b) {
        return Err(Error::InvalidInput(format!(
            "exceptional set leaves {cube}"
        )));
    }
    maximal_cover_local(&mask[first..first + len], cube, grid_level)
}

fn maximal_cover_local(
    local: &[bool],
    cube: &DyadicInterval,
    grid_level: u32,
) -> Result<Vec<DyadicInterval>> {
    let mut out = Vec::new();
    cover_rec(local, cube, 0, grid_level, &mut out)?;
    Ok(out)
}

fn cover_rec(
    local: &[bool],
    p: &DyadicInterval,
    offset: usize,
    grid_level: u32,
    out: &mut Vec<DyadicInterval>,
) -> Result<()> {
    let width = 1usize << (grid_level - p.level);
    let cells = &local[offset..offset + width];
    if cells.iter().all(|&b| b) {
        out.push(*p);
    } else if cells.iter().any(|&b| b) {
        let (a, b) = p.children(grid_level)?;
        cover_rec(local, &a, offset, grid_level, out)?;
        cover_rec(local, &b, offset + width / 2, grid_level, out)?;
    }
    Ok(())
}

/// `E(Q; eta)` as a grid mask.
pub fn exceptional_set(
    f: &SampledFunction,
    cube: &DyadicInterval,
    eta: f64,
    cfg: &SparseBuildConfig,
) -> Result<Vec<bool>> {
    Stopping::new(f.len(), cfg.clone())?.exceptional_set(f, cube, eta)
}

pub fn eta_calibrate(
    f: &SampledFunction,
    cube: &DyadicInterval,
    cfg: &SparseBuildConfig,
) -> Result<EtaCalibration> {
    Stopping::new(f.len(), cfg.clone())?.eta_calibrate(f, cube)
}

pub fn build_sparse(
    f: &SampledFunction,
    root: &DyadicInterval,
    cfg: &SparseBuildConfig,
) -> Result<SparseBuild> {
    Stopping::new(f.len(), cfg.clone())?.build(f, root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::band_limited;
    use approx::assert_relative_eq;

    fn dy(level: u32, index: u64) -> DyadicInterval {
        DyadicInterval::new(level, index).unwrap()
    }

    fn cfg() -> SparseBuildConfig {
        let mut c = SparseBuildConfig::new(1.0, 4.0);
        c.time_grid = TimeGrid::new(1e-7, 10.0, 120).unwrap();
        c
    }

    #[test]
    fn constant_function_thresholds() {
        let one = SampledFunction::constant(256, 1.0).unwrap();
        let root = DyadicInterval::ROOT;
        assert!(exceptional_set(&one, &root, 2.0, &cfg())
            .unwrap()
            .iter()
            .all(|&b| !b));
        assert!(exceptional_set(&one, &root, 0.5, &cfg())
            .unwrap()
            .iter()
            .all(|&b| b));
        let eta = eta_calibrate(&one, &root, &cfg()).unwrap().eta;
        assert_relative_eq!(eta, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn calibrated_set_is_small() {
        let f = band_limited(8, 256, 12).unwrap();
        let c = cfg();
        for cube in [DyadicInterval::ROOT, dy(2, 1)] {
            let cal = eta_calibrate(&f, &cube, &c).unwrap();
            let e = exceptional_set(&f, &cube, cal.eta, &c).unwrap();
            let (_, len) = cube.cells(8).unwrap();
            assert!(2 * e.iter().filter(|&&b| b).count() < len);
            // below the calibrated value the set is at least half
            let below =
                exceptional_set(&f, &cube, cal.eta / (1.0 + 2.0 * ETA_PRECISION), &c).unwrap();
            assert!(2 * below.iter().filter(|&&b| b).count() >= len);
        }
    }

    #[test]
    fn calibration_is_scale_invariant() {
        let f = SampledFunction::indicator(256, 0.0, 0.125).unwrap();
        let a = eta_calibrate(&f, &DyadicInterval::ROOT, &cfg())
            .unwrap()
            .eta;
        let b = eta_calibrate(&f.scale(3.0), &DyadicInterval::ROOT, &cfg())
            .unwrap()
            .eta;
        assert_relative_eq!(a, b, max_relative = 2.0 * ETA_PRECISION);
    }

    #[test]
    fn cover_examples() {
        let root = DyadicInterval::ROOT;
        assert_eq!(maximal_cover(&[true; 8], &root).unwrap(), vec![root]);
        assert!(maximal_cover(&[false; 8], &root).unwrap().is_empty());
        let mask = [true, true, true, false, false, false, false, false];
        assert_eq!(
            maximal_cover(&mask, &root).unwrap(),
            vec![dy(2, 0), dy(3, 2)]
        );
        assert!(maximal_cover(&mask, &dy(1, 1)).is_err());
    }

    #[test]
    fn local_maximal_sup_variant() {
        let f = SampledFunction::new(vec![4.0, 0.0, 0.0, 0.0]).unwrap();
        let m = local_dyadic_maximal(&f, &DyadicInterval::ROOT, 1.0).unwrap();
        assert_eq!(m, vec![4.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn fixed_eta_on_constant_gives_root_only() {
        let one = SampledFunction::constant(256, 1.0).unwrap();
        let mut c = cfg();
        c.eta = Some(2.0);
        let b = build_sparse(&one, &DyadicInterval::ROOT, &c).unwrap();
        assert_eq!(b.family.len(), 1);
        assert!(!b.truncated);
        assert!(b.family.verify_sparsity().unwrap().ok);
    }

    #[test]
    fn spike_family_nests_toward_origin() {
        let n = 256;
        let f = SampledFunction::indicator(n, 0.0, 1.0 / 64.0).unwrap();
        let b = build_sparse(&f, &DyadicInterval::ROOT, &cfg()).unwrap();
        let report = b.family.verify_sparsity().unwrap();
        assert!(report.ok, "{report:?}");
        assert!(b.family.len() > 1);
        let deepest = b.nodes.iter().max_by_key(|n| n.depth).unwrap();
        let mut chain = vec![deepest.cube];
        let mut cur = deepest.parent;
        while let Some(p) = cur {
            assert!(p.contains(chain.last().unwrap()));
            chain.push(p);
            cur = b.nodes.iter().find(|n| n.cube == p).unwrap().parent;
        }
        assert_eq!(*chain.last().unwrap(), DyadicInterval::ROOT);
        // the deepest cube sits within one parent-width of the spike
        assert!(deepest.cube.lo() < 0.25 || deepest.cube.hi() > 0.75);
    }

    #[test]
    fn depth_cap_sets_truncation() {
        let f = band_limited(1, 256, 20).unwrap();
        let mut c = cfg();
        c.max_depth = 1;
        let b = build_sparse(&f, &DyadicInterval::ROOT, &c).unwrap();
        assert!(b.nodes.iter().all(|n| n.depth <= 1));
        assert!(b.truncated);
        assert!(b.family.verify_sparsity().unwrap().ok);
    }

    #[test]
    fn zero_function_gives_root() {
        let z = SampledFunction::zeros(256).unwrap();
        let b = build_sparse(&z, &DyadicInterval::ROOT, &cfg()).unwrap();
        assert_eq!(b.family.len(), 1);
        assert!(b.nodes[0].eta.is_none());
    }
}
