//! Grid scans of Ricci and bi-Ricci curvature over a chart.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::{cube_to_sphere, householder_complement, Halton};

/// Sampling resolution for a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSpec {
    /// Cell-centered nodes per coordinate axis.
    pub points_per_axis: usize,
    /// Directions (or direction pairs) evaluated at every node.
    pub directions: usize,
    pub seed: u64,
    pub bins: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec { points_per_axis: 6, directions: 64, seed: 0, bins: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = bins.max(1);
        let mut counts = vec![0; bins];
        let width = hi - lo;
        for v in values {
            let k = if width > 0.0 { (((v - lo) / width) * bins as f64) as usize } else { 0 };
            counts[k.min(bins - 1)] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    /// Coordinate components of the minimizing direction(s).
    pub argmin_directions: Vec<Vec<f64>>,
    pub samples: usize,
    pub histogram: Histogram,
}

/// Cell-centered tensor grid over the chart domain.
pub fn grid_points(chart: &Chart, per_axis: usize) -> Vec<Vec<f64>> {
    let axes = &chart.domain().axes;
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(axes.len() as u32);
    (0..total)
        .map(|mut k| {
            axes.iter()
                .map(|a| {
                    let i = k % per_axis;
                    k /= per_axis;
                    a.lo + (i as f64 + 0.5) * a.width() / per_axis as f64
                })
                .collect()
        })
        .collect()
}

fn coordinate_frame(g: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = g.nrows();
    let axes: Vec<DVector<f64>> = (0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    linalg::gram_schmidt(g, &axes, 1e-12)
}

fn combine(frame: &[DVector<f64>], coeffs: &[f64]) -> DVector<f64> {
    frame.iter().zip(coeffs).fold(DVector::zeros(frame[0].len()), |acc, (e, c)| acc + e * *c)
}

/// Unit directions in `g`: the orthonormalized coordinate axes first, then
/// quasi-random directions. Prefixes are nested in `count`.
pub fn unit_directions(g: &DMatrix<f64>, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let frame = coordinate_frame(g);
    let n = frame.len();
    let mut out: Vec<DVector<f64>> = frame.iter().take(count).cloned().collect();
    let mut seq = Halton::seeded(n, seed);
    while out.len() < count {
        out.push(combine(&frame, &cube_to_sphere(&seq.next_point())));
    }
    out
}

/// Orthonormal pairs in `g`: ordered pairs of frame axes first, then a
/// quasi-random first vector with a second vector drawn from the unit
/// sphere of its orthogonal complement. Prefixes are nested in `count`.
pub fn direction_pairs(g: &DMatrix<f64>, count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let frame = coordinate_frame(g);
    let n = frame.len();
    let mut out = Vec::with_capacity(count);
    'axes: for i in 0..n {
        for j in 0..n {
            if out.len() == count {
                break 'axes;
            }
            if i != j {
                out.push((frame[i].clone(), frame[j].clone()));
            }
        }
    }
    if n < 2 {
        return out;
    }
    let mut seq = Halton::seeded(2 * n - 1, seed);
    while out.len() < count {
        let u = seq.next_point();
        let v = cube_to_sphere(&u[..n]);
        let c = cube_to_sphere(&u[n..]);
        let rest = householder_complement(&v);
        let w: Vec<f64> = (0..n).map(|k| rest.iter().zip(&c).map(|(r, ck)| r[k] * ck).sum()).collect();
        out.push((combine(&frame, &v), combine(&frame, &w)));
    }
    out
}

struct PointMin {
    min: f64,
    directions: Vec<Vec<f64>>,
    values: Vec<f64>,
}

fn assemble(points: &[Vec<f64>], results: Vec<Result<PointMin>>, bins: usize) -> Result<ScanReport> {
    let mut values = Vec::new();
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    for (k, r) in results.into_iter().enumerate() {
        let p = r?;
        values.extend_from_slice(&p.values);
        if best.as_ref().is_none_or(|(m, _, _)| p.min < *m) {
            best = Some((p.min, k, p.directions));
        }
    }
    let (min, k, argmin_directions) = best.ok_or(Error::InsufficientSamples { got: 0, need: 1 })?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScanReport {
        min,
        max,
        argmin: points[k].clone(),
        argmin_directions,
        samples: values.len(),
        histogram: Histogram::build(&values, bins),
    })
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Minimum of `B_σRc(v, w)` over the given points and `pairs` orthonormal
/// pairs at each point.
pub fn biricci_scan_points(chart: &Chart, sigma: f64, points: &[Vec<f64>], pairs: usize, seed: u64, bins: usize) -> Result<ScanReport> {
    if chart.dim() < 2 {
        return Err(Error::UnsupportedDimension { dim: chart.dim(), reason: "bi-Ricci curvature needs two directions".into() });
    }
    let results: Vec<Result<PointMin>> = points
        .par_iter()
        .map(|x| {
            let bundle = chart.curvature(x)?;
            let mut out = PointMin { min: f64::INFINITY, directions: Vec::new(), values: Vec::with_capacity(pairs) };
            for (v, w) in direction_pairs(&bundle.metric, pairs, seed) {
                let b = bundle.bi_ricci(&v, &w, sigma)?;
                out.values.push(b);
                if b < out.min {
                    out.min = b;
                    out.directions = vec![to_vec(&v), to_vec(&w)];
                }
            }
            Ok(out)
        })
        .collect();
    assemble(points, results, bins)
}

pub fn biricci_scan(chart: &Chart, sigma: f64, spec: &ScanSpec) -> Result<ScanReport> {
    let points = grid_points(chart, spec.points_per_axis);
    biricci_scan_points(chart, sigma, &points, spec.directions, spec.seed, spec.bins)
}

/// Minimum of `Ric(v, v)` over unit directions at the grid nodes.
pub fn ricci_scan(chart: &Chart, spec: &ScanSpec) -> Result<ScanReport> {
    let points = grid_points(chart, spec.points_per_axis);
    let results: Vec<Result<PointMin>> = points
        .par_iter()
        .map(|x| {
            let bundle = chart.curvature(x)?;
            let mut out = PointMin { min: f64::INFINITY, directions: Vec::new(), values: Vec::new() };
            for v in unit_directions(&bundle.metric, spec.directions, spec.seed) {
                let r = bundle.ricci_value(&v);
                out.values.push(r);
                if r < out.min {
                    out.min = r;
                    out.directions = vec![to_vec(&v)];
                }
            }
            Ok(out)
        })
        .collect();
    assemble(&points, results, spec.bins)
}

#[cfg(test)]
mod tests;
