//! Diameter estimation on a sampled chart.
//!
//! Points are drawn from a shifted Halton sequence thinned by the volume
//! density, joined to their nearest neighbours by coordinate segments whose
//! lengths are integrated in the metric, and the farthest graph pairs are
//! then relaxed to discrete geodesics. Graph distances overestimate true
//! distances; relaxation removes most of that excess.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::Chart;
use crate::conformal::{conformal_metric, ConformalData};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::Halton;

#[derive(Clone, Copy, Debug)]
pub enum DiameterMode<'a> {
    Base,
    Conformal(&'a ConformalData),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiameterOptions {
    pub neighbors: usize,
    pub seed: u64,
    /// Number of farthest graph pairs that are relaxed.
    pub candidates: usize,
    /// Segments of the relaxed paths.
    pub segments: usize,
    /// Adds the corners of the non-periodic axes where the metric is
    /// nondegenerate.
    pub include_corners: bool,
}

impl Default for DiameterOptions {
    fn default() -> Self {
        DiameterOptions { neighbors: 12, seed: 0, candidates: 8, segments: 32, include_corners: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterEstimate {
    /// Largest relaxed distance among the candidate pairs.
    pub diameter: f64,
    /// Largest graph shortest-path distance.
    pub graph_diameter: f64,
    pub samples: usize,
    pub neighbors: usize,
    pub endpoints: [Vec<f64>; 2],
    /// Relaxed path between the endpoints, unwrapped coordinates.
    pub path: Vec<Vec<f64>>,
}

/// Diameter estimate with default options.
pub fn estimate_diameter(chart: &Chart, sample_count: usize, mode: DiameterMode<'_>) -> Result<DiameterEstimate> {
    estimate_diameter_with(chart, sample_count, mode, &DiameterOptions::default())
}

pub fn estimate_diameter_with(
    chart: &Chart,
    sample_count: usize,
    mode: DiameterMode<'_>,
    opts: &DiameterOptions,
) -> Result<DiameterEstimate> {
    if sample_count < 10 {
        return Err(Error::InsufficientSamples { got: sample_count, need: 10 });
    }
    let owned;
    let chart = match mode {
        DiameterMode::Base => chart,
        DiameterMode::Conformal(cd) => {
            owned = conformal_metric(chart, cd)?;
            &owned
        }
    };
    let space = Space { chart };
    let mut points = space.sample(sample_count, opts.seed)?;
    if opts.include_corners {
        points.extend(space.corners());
    }
    let graph = space.knn_graph(&points, opts.neighbors.min(points.len() - 1));

    let farthest: Vec<(f64, usize, usize)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let (dist, _) = dijkstra(&graph, i);
            let (j, d) = dist
                .iter()
                .enumerate()
                .filter(|(_, d)| d.is_finite())
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, d)| (j, *d))
                .unwrap_or((i, 0.0));
            (d, i, j)
        })
        .collect();
    if farthest.iter().any(|&(d, _, _)| d == 0.0) {
        return Err(Error::InvalidParameter("sample graph is disconnected".into()));
    }
    let mut pairs = farthest.clone();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<(f64, usize, usize)> = Vec::new();
    for (d, i, j) in pairs {
        let key = (i.min(j), i.max(j));
        if !chosen.iter().any(|&(_, a, b)| (a.min(b), a.max(b)) == key) {
            chosen.push((d, i, j));
        }
        if chosen.len() == opts.candidates.max(1) {
            break;
        }
    }
    let graph_diameter = chosen[0].0;

    let refined: Vec<(f64, Vec<Vec<f64>>, usize, usize)> = chosen
        .par_iter()
        .map(|&(d, i, j)| {
            let (_, prev) = dijkstra(&graph, i);
            let mut route = vec![j];
            while *route.last().unwrap() != i {
                route.push(prev[*route.last().unwrap()]);
            }
            route.reverse();
            let poly = space.unwrap_route(&points, &route);
            let path = space.relax(poly, opts.segments);
            let length = space.polyline_length(&path);
            (length.min(d), path, i, j)
        })
        .collect();
    let best = refined
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one candidate pair");
    Ok(DiameterEstimate {
        diameter: best.0,
        graph_diameter,
        samples: points.len(),
        neighbors: opts.neighbors,
        endpoints: [points[best.2].clone(), points[best.3].clone()],
        path: best.1,
    })
}

struct Space<'a> {
    chart: &'a Chart,
}

impl Space<'_> {
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let mut y = x.to_vec();
        self.chart.domain().wrap(&mut y);
        self.chart.metric_at(&y)
    }

    fn volume_density(&self, x: &[f64]) -> f64 {
        let g = self.metric(x);
        match linalg::cholesky_pivot_failure(&g) {
            None => g.determinant().max(0.0).sqrt(),
            Some(_) => 0.0,
        }
    }

    /// Volume-uniform quasi-random points.
    fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let axes = &self.chart.domain().axes;
        let n = axes.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..=n).map(|_| rng.gen::<f64>()).collect();
        let to_point = |u: &[f64]| -> Vec<f64> {
            axes.iter().zip(u).map(|(a, t)| a.lo + t * a.width()).collect()
        };
        let mut seq = Halton::new(n + 1, shift.clone());
        let mut peak = 0.0f64;
        for _ in 0..4096 {
            let u = seq.next_point();
            peak = peak.max(self.volume_density(&to_point(&u[..n])));
        }
        if !(peak > 0.0) {
            return Err(Error::InvalidParameter("metric is degenerate on the whole domain".into()));
        }
        let peak = 1.05 * peak;
        let mut seq = Halton::new(n + 1, shift);
        let mut points = Vec::with_capacity(count);
        let mut tries = 0usize;
        while points.len() < count {
            tries += 1;
            if tries > 1000 * count {
                return Err(Error::InsufficientSamples { got: points.len(), need: count });
            }
            let u = seq.next_point();
            let x = to_point(&u[..n]);
            if u[n] * peak <= self.volume_density(&x) {
                points.push(x);
            }
        }
        Ok(points)
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let axes = &self.chart.domain().axes;
        let free: Vec<usize> = (0..axes.len()).filter(|&a| !axes[a].periodic).collect();
        if free.len() > 6 {
            return Vec::new();
        }
        (0..1usize << free.len())
            .map(|mask| {
                let mut x: Vec<f64> = axes.iter().map(|a| a.lo).collect();
                for (bit, &a) in free.iter().enumerate() {
                    x[a] = if mask >> bit & 1 == 1 { axes[a].hi } else { axes[a].lo };
                }
                x
            })
            .filter(|x| linalg::cholesky_pivot_failure(&self.metric(x)).is_none())
            .collect()
    }

    /// Metric length of the coordinate segment `a → a + d`.
    fn segment_length(&self, a: &[f64], d: &DVector<f64>) -> f64 {
        let speeds: Vec<f64> = (0..=4)
            .map(|k| {
                let t = k as f64 / 4.0;
                let x: Vec<f64> = a.iter().zip(d.iter()).map(|(p, q)| p + t * q).collect();
                (d.transpose() * self.metric(&x) * d)[(0, 0)].max(0.0).sqrt()
            })
            .collect();
        super::lemma1::simpson(&speeds, 0.25)
    }

    fn knn_graph(&self, points: &[Vec<f64>], k: usize) -> Vec<Vec<(usize, f64)>> {
        let domain = self.chart.domain();
        let metrics: Vec<DMatrix<f64>> = points.par_iter().map(|x| self.metric(x)).collect();
        let near: Vec<Vec<usize>> = (0..points.len())
            .into_par_iter()
            .map(|i| {
                let mut d: Vec<(f64, usize)> = (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| {
                        let v = DVector::from_vec(domain.displacement(&points[i], &points[j]));
                        let g = (&metrics[i] + &metrics[j]) * 0.5;
                        ((v.transpose() * g * &v)[(0, 0)], j)
                    })
                    .collect();
                let k = k.min(d.len());
                d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d[..k].iter().map(|&(_, j)| j).collect()
            })
            .collect();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (i, list) in near.iter().enumerate() {
            for &j in list {
                edges.push((i.min(j), i.max(j)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let weights: Vec<f64> = edges
            .par_iter()
            .map(|&(i, j)| {
                let d = DVector::from_vec(domain.displacement(&points[i], &points[j]));
                self.segment_length(&points[i], &d)
            })
            .collect();
        let mut graph = vec![Vec::new(); points.len()];
        for (&(i, j), &w) in edges.iter().zip(&weights) {
            graph[i].push((j, w));
            graph[j].push((i, w));
        }
        graph
    }

    fn unwrap_route(&self, points: &[Vec<f64>], route: &[usize]) -> Vec<Vec<f64>> {
        let domain = self.chart.domain();
        let mut out = vec![points[route[0]].clone()];
        for w in route.windows(2) {
            let d = domain.displacement(&points[w[0]], &points[w[1]]);
            let last = out.last().unwrap();
            let next: Vec<f64> = last.iter().zip(&d).map(|(a, b)| a + b).collect();
            out.push(next);
        }
        out
    }

    fn polyline_length(&self, poly: &[Vec<f64>]) -> f64 {
        poly.windows(2)
            .map(|w| {
                let d = DVector::from_iterator(w[0].len(), w[1].iter().zip(&w[0]).map(|(b, a)| b - a));
                self.segment_length(&w[0], &d)
            })
            .sum()
    }

    /// Resamples a polyline to `segments` pieces of equal metric length.
    fn resample(&self, poly: &[Vec<f64>], segments: usize) -> Vec<Vec<f64>> {
        let mut cumulative = vec![0.0];
        for w in poly.windows(2) {
            let d = DVector::from_iterator(w[0].len(), w[1].iter().zip(&w[0]).map(|(b, a)| b - a));
            cumulative.push(cumulative.last().unwrap() + self.segment_length(&w[0], &d));
        }
        let total = *cumulative.last().unwrap();
        let mut out = Vec::with_capacity(segments + 1);
        let mut k = 0;
        for i in 0..=segments {
            let target = total * i as f64 / segments as f64;
            while k + 2 < cumulative.len() && cumulative[k + 1] < target {
                k += 1;
            }
            let span = cumulative[k + 1] - cumulative[k];
            let t = if span > 0.0 { ((target - cumulative[k]) / span).clamp(0.0, 1.0) } else { 0.0 };
            out.push(poly[k].iter().zip(&poly[k + 1]).map(|(a, b)| a + t * (b - a)).collect());
        }
        out
    }

    /// Discrete energy `q(a, b) = Δᵀ g(mid) Δ` of one segment.
    fn energy(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = DVector::from_iterator(a.len(), b.iter().zip(a).map(|(q, p)| q - p));
        let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
        (d.transpose() * self.metric(&mid) * &d)[(0, 0)]
    }

    /// Relaxes a path to a discrete geodesic by nonlinear Gauss–Seidel on the
    /// path energy, refining 8 → 16 → … → `segments`.
    fn relax(&self, poly: Vec<Vec<f64>>, segments: usize) -> Vec<Vec<f64>> {
        let mut level = 8.min(segments.max(2));
        let mut path = self.resample(&poly, level);
        loop {
            self.relax_level(&mut path);
            if level >= segments {
                return path;
            }
            let mut finer = Vec::with_capacity(2 * path.len());
            for w in path.windows(2) {
                finer.push(w[0].clone());
                finer.push(w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect());
            }
            finer.push(path.last().unwrap().clone());
            path = finer;
            level *= 2;
        }
    }

    fn relax_level(&self, path: &mut [Vec<f64>]) {
        let n = path[0].len();
        let m = path.len() - 1;
        let sweeps = 400 * m;
        for _ in 0..sweeps {
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for i in 1..m {
                let (a, b) = (path[i - 1].clone(), path[i + 1].clone());
                let local = |x: &[f64]| self.energy(&a, x) + self.energy(x, &b);
                let x = path[i].clone();
                let seg = a.iter().zip(&b).map(|(p, q)| (q - p).abs()).fold(0.0, f64::max);
                scale = scale.max(seg);
                let hx = 1e-5 * seg + 1e-12;
                let mut grad = DVector::zeros(n);
                for k in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += hx;
                    xm[k] -= hx;
                    grad[k] = (local(&xp) - local(&xm)) / (2.0 * hx);
                }
                let mid1: Vec<f64> = a.iter().zip(&x).map(|(p, q)| 0.5 * (p + q)).collect();
                let mid2: Vec<f64> = x.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
                let mut hess = (self.metric(&mid1) + self.metric(&mid2)) * 2.0;
                let reg = 1e-9 * hess.trace().abs().max(1e-300);
                for k in 0..n {
                    hess[(k, k)] += reg;
                }
                let Some(step) = hess.lu().solve(&grad) else { continue };
                let base = local(&x);
                let mut alpha = 1.0;
                let mut accepted = None;
                for _ in 0..12 {
                    let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(p, d)| p - alpha * d).collect();
                    if local(&trial) <= base {
                        accepted = Some(trial);
                        break;
                    }
                    alpha *= 0.5;
                }
                if let Some(trial) = accepted {
                    let moved = trial.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                    worst = worst.max(moved);
                    path[i] = trial;
                }
            }
            if worst <= 1e-9 * scale.max(1e-300) {
                break;
            }
        }
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

fn dijkstra(graph: &[Vec<(usize, f64)>], source: usize) -> (Vec<f64>, Vec<usize>) {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut prev = vec![usize::MAX; graph.len()];
    dist[source] = 0.0;
    prev[source] = source;
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &graph[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Entry(nd, v));
            }
        }
    }
    (dist, prev)
}
