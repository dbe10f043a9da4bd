use serde::{Serialize, Serializer};

use super::build::{NodeInfo, SparseBuildConfig, Stopping};
use crate::error::{Error, Result};
use crate::exponents::{conj, star};
use crate::grid::SampledFunction;
use crate::lattice::{dilate, p_average, Clip, DyadicInterval, SparseFamily, SparsityReport};

#[derive(Debug, Clone, Serialize)]
pub struct CubeTerm {
    pub cube: DyadicInterval,
    /// `(⨍_{λP} |f|^{p0})^{2/p0}`.
    pub f_factor: f64,
    /// `(⨍_{λP} |g|^{q0*})^{1/q0*}`.
    pub g_factor: f64,
    pub term: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SparseFormValue {
    pub value: f64,
    pub terms: Vec<CubeTerm>,
}

fn sorted_cubes(family: &SparseFamily) -> Vec<DyadicInterval> {
    let mut cubes: Vec<DyadicInterval> = family.intervals().copied().collect();
    cubes.sort();
    cubes
}

/// `Σ_P (⨍_{λP} |f|^{p0})^{2/p0} (⨍_{λP} |g|^{q0*})^{1/q0*} |P|`, summed in
/// `(level, index)` order; `λP` is read periodically.
pub fn sparse_form(
    family: &SparseFamily,
    f: &SampledFunction,
    g: &SampledFunction,
    p0: f64,
    q0: f64,
    lambda: f64,
) -> Result<SparseFormValue> {
    if !(q0 > 2.0) {
        return Err(Error::InvalidExponent(format!(
            "sparse form needs q0 > 2, got {q0}"
        )));
    }
    f.check_same_grid(g)?;
    let q0s = star(q0)?;
    let mut value = 0.0;
    let mut terms = Vec::with_capacity(family.len());
    for cube in sorted_cubes(family) {
        let region = dilate(&cube, lambda, Clip::Torus)?;
        let f_factor = p_average(f, &region, p0)?.powi(2);
        let g_factor = p_average(g, &region, q0s)?;
        let term = f_factor * g_factor * cube.measure();
        value += term;
        terms.push(CubeTerm {
            cube,
            f_factor,
            g_factor,
            term,
        });
    }
    Ok(SparseFormValue { value, terms })
}

/// `Σ_P (⨍_{λP} |f|^{p0})^{1/p0} (⨍_{λP} |g|^{q0'})^{1/q0'} |P|`.
pub fn linear_sparse_form(
    family: &SparseFamily,
    f: &SampledFunction,
    g: &SampledFunction,
    p0: f64,
    q0: f64,
    lambda: f64,
) -> Result<f64> {
    f.check_same_grid(g)?;
    let q0c = conj(q0)?;
    let mut value = 0.0;
    for cube in sorted_cubes(family) {
        let region = dilate(&cube, lambda, Clip::Torus)?;
        value += p_average(f, &region, p0)? * p_average(g, &region, q0c)? * cube.measure();
    }
    Ok(value)
}

/// Split of `∫_P (Sf)^2 g` for a top-level cover cube `P`.
#[derive(Debug, Clone, Serialize)]
pub struct CubeDecomposition {
    pub cube: DyadicInterval,
    pub total: f64,
    /// Scales `t >= ℓ(P)^2`.
    pub large: f64,
    /// Scales `t < ℓ(P)^2`, input `f 1_{5P}`.
    pub inside: f64,
    /// Scales `t < ℓ(P)^2`, input `f 1_{(5P)^c}`.
    pub outside: f64,
    /// Twice the mixed term of the two inputs.
    pub cross: f64,
}

fn serialize_family<S: Serializer>(
    family: &SparseFamily,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    family
        .to_json()
        .map_err(serde::ser::Error::custom)?
        .serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SparseFormReport {
    #[serde(serialize_with = "serialize_family")]
    pub family: SparseFamily,
    pub sparsity: SparsityReport,
    pub truncated: bool,
    pub nodes: Vec<NodeInfo>,
    pub form_value: f64,
    /// `∫_{Q0} (Sf)^2 g`.
    pub lhs: f64,
    pub ratio: f64,
    pub terms: Vec<CubeTerm>,
    /// Share of `lhs` from scales below the grid cell, `t < h^2`.
    pub subgrid_fraction: f64,
    /// Largest `Σ_{P ∈ cover(Q)} (⨍_P g^{q0*})^{1/q0*}|P| / (|Q| (⨍_{5Q} g^{q0*})^{1/q0*})`.
    pub kolmogorov_constant: f64,
    pub linear_form: f64,
    pub decomposition: Option<Vec<CubeDecomposition>>,
}

fn masked_integral(values: &[f64], g: &SampledFunction, first: usize, len: usize) -> f64 {
    let h = g.cell_width();
    values[first..first + len]
        .iter()
        .zip(&g.samples()[first..first + len])
        .map(|(v, w)| v * w)
        .sum::<f64>()
        * h
}

/// Builds the family for `f` on `root` and compares `∫_{root} (Sf)^2 g` with
/// the sparse form.
pub fn domination_check(
    f: &SampledFunction,
    g: &SampledFunction,
    root: &DyadicInterval,
    cfg: &SparseBuildConfig,
) -> Result<SparseFormReport> {
    f.check_same_grid(g)?;
    if g.samples().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("g must be nonnegative".into()));
    }
    let stopping = Stopping::new(f.len(), cfg.clone())?;
    let build = stopping.build(f, root)?;
    let sparsity = build.family.verify_sparsity()?;
    let engine = stopping.engine();
    let h = f.cell_width();
    let squared = engine.squared_windows(f, &[(0.0, f64::INFINITY), (0.0, h * h)]);
    let (first, len) = root.cells(f.level())?;
    let lhs = masked_integral(&squared[0], g, first, len);
    let subgrid = masked_integral(&squared[1], g, first, len);
    let form = sparse_form(&build.family, f, g, cfg.p0, cfg.q0, cfg.dilation)?;
    let ratio = if form.value > 0.0 {
        lhs / form.value
    } else if lhs > 0.0 {
        return Err(Error::Invariant(format!(
            "sparse form vanishes while the left side is {lhs}"
        )));
    } else {
        0.0
    };
    let kolmogorov_constant = kolmogorov(&build.nodes, g, cfg.q0)?;
    let linear_form = linear_sparse_form(&build.family, f, g, cfg.p0, cfg.q0, cfg.dilation)?;
    let decomposition = if cfg.diagnostics {
        let top: Vec<DyadicInterval> = build
            .nodes
            .iter()
            .filter(|n| n.parent == Some(*root))
            .map(|n| n.cube)
            .collect();
        Some(decompose(&stopping, f, g, &top)?)
    } else {
        None
    };
    Ok(SparseFormReport {
        family: build.family,
        sparsity,
        truncated: build.truncated,
        nodes: build.nodes,
        form_value: form.value,
        lhs,
        ratio,
        terms: form.terms,
        subgrid_fraction: if lhs > 0.0 { subgrid / lhs } else { 0.0 },
        kolmogorov_constant,
        linear_form,
        decomposition,
    })
}

fn kolmogorov(nodes: &[NodeInfo], g: &SampledFunction, q0: f64) -> Result<f64> {
    let q0s = star(q0)?;
    let mut worst = 0.0_f64;
    for parent in nodes {
        let mut sum = 0.0;
        for child in nodes.iter().filter(|n| n.parent == Some(parent.cube)) {
            sum += p_average(g, &child.cube.interval(), q0s)? * child.cube.measure();
        }
        if sum == 0.0 {
            continue;
        }
        let denom =
            parent.cube.measure() * p_average(g, &dilate(&parent.cube, 5.0, Clip::Torus)?, q0s)?;
        if denom > 0.0 {
            worst = worst.max(sum / denom);
        }
    }
    Ok(worst)
}

fn decompose(
    stopping: &Stopping,
    f: &SampledFunction,
    g: &SampledFunction,
    cubes: &[DyadicInterval],
) -> Result<Vec<CubeDecomposition>> {
    let engine = stopping.engine();
    let grid_level = f.level();
    let mut out = Vec::with_capacity(cubes.len());
    for cube in cubes {
        let (first, len) = cube.cells(grid_level)?;
        let scale = cube.measure() * cube.measure();
        let mask = crate::lattice::periodic_mask(f.len(), &dilate(cube, 5.0, Clip::Torus)?);
        let inner = f.masked(&mask)?;
        let outer = f.zip_with(&inner, |a, b| a - b)?;
        let full = engine.squared_windows(f, &[(0.0, f64::INFINITY), (scale, f64::INFINITY)]);
        let small = [(0.0, scale)];
        let sq_in = engine.squared_windows(&inner, &small).remove(0);
        let sq_out = engine.squared_windows(&outer, &small).remove(0);
        let mixed = engine.cross_windows(&inner, &outer, &small).remove(0);
        out.push(CubeDecomposition {
            cube: *cube,
            total: masked_integral(&full[0], g, first, len),
            large: masked_integral(&full[1], g, first, len),
            inside: masked_integral(&sq_in, g, first, len),
            outside: masked_integral(&sq_out, g, first, len),
            cross: 2.0 * masked_integral(&mixed, g, first, len),
        });
    }
    Ok(out)
}
