//! Grid-sampled metrics and their binary file format.
//!
//! Layout (all little-endian): 8-byte magic `BLABGRD1`, `u64` dimension
//! `n`, `n × u64` resolution, `n × (f64 lo, f64 hi)` domain, `n × u64`
//! periodic flags, then one row-major `n × n` block of `f64` per grid node,
//! nodes in row-major order (last axis fastest).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Axis, Chart, Domain, MetricField, MetricKind};
use crate::error::{Error, Result};
use crate::spline::{GridAxis, TensorSpline};

const MAGIC: &[u8; 8] = b"BLABGRD1";

#[derive(Clone, Debug, PartialEq)]
pub struct GridHeader {
    pub dims: usize,
    pub resolution: Vec<usize>,
    pub domain: Vec<(f64, f64)>,
    pub periodic: Vec<bool>,
}

impl GridHeader {
    fn axes(&self) -> Vec<GridAxis> {
        (0..self.dims)
            .map(|a| GridAxis {
                lo: self.domain[a].0,
                hi: self.domain[a].1,
                nodes: self.resolution[a],
                periodic: self.periodic[a],
            })
            .collect()
    }
}

/// Metric interpolated from samples by tensor cubic splines.
#[derive(Clone, Debug)]
pub struct GridMetric {
    header: GridHeader,
    spline: TensorSpline,
}

impl GridMetric {
    pub fn from_samples(header: GridHeader, samples: &[f64]) -> Result<Self> {
        let n = header.dims;
        if header.resolution.len() != n || header.domain.len() != n || header.periodic.len() != n {
            return Err(Error::Manifest("grid header arrays must match dims".into()));
        }
        let spline = TensorSpline::new(header.axes(), n * n, samples)?;
        Ok(GridMetric { header, spline })
    }

    /// Samples a metric on a grid.
    pub fn sample(metric: &dyn MetricField, header: GridHeader) -> Result<Self> {
        let samples = sample_values(metric, &header);
        Self::from_samples(header, &samples)
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn into_chart(self) -> Result<Chart> {
        let axes = (0..self.header.dims)
            .map(|a| Axis {
                lo: self.header.domain[a].0,
                hi: self.header.domain[a].1,
                periodic: self.header.periodic[a],
            })
            .collect();
        let kind = MetricKind::GridSampled { resolution: self.header.resolution.clone(), order: 3 };
        Ok(Chart::new(Domain::new(axes), Arc::new(self))?.with_kind(kind))
    }

    pub fn write_file(metric: &dyn MetricField, header: &GridHeader, path: &Path) -> Result<()> {
        let samples = sample_values(metric, header);
        let mut out = Vec::with_capacity(8 * (samples.len() + 4 * header.dims + 1) + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.dims as u64).to_le_bytes());
        for r in &header.resolution {
            out.extend_from_slice(&(*r as u64).to_le_bytes());
        }
        for (lo, hi) in &header.domain {
            out.extend_from_slice(&lo.to_le_bytes());
            out.extend_from_slice(&hi.to_le_bytes());
        }
        for p in &header.periodic {
            out.extend_from_slice(&(*p as u64).to_le_bytes());
        }
        for v in samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Manifest(format!("{}: not a metric grid file", path.display())));
        }
        let dims = cur.u64()? as usize;
        if dims == 0 || dims > 8 {
            return Err(Error::Manifest(format!("unsupported grid dimension {dims}")));
        }
        let resolution = (0..dims).map(|_| cur.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let domain = (0..dims).map(|_| Ok((cur.f64()?, cur.f64()?))).collect::<Result<Vec<_>>>()?;
        let periodic = (0..dims).map(|_| cur.u64().map(|v| v != 0)).collect::<Result<Vec<_>>>()?;
        let count = resolution.iter().product::<usize>() * dims * dims;
        let samples = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Manifest("trailing bytes in grid file".into()));
        }
        Self::from_samples(GridHeader { dims, resolution, domain, periodic }, &samples)
    }
}

fn sample_values(metric: &dyn MetricField, header: &GridHeader) -> Vec<f64> {
    let axes = header.axes();
    let n = header.dims;
    let total: usize = header.resolution.iter().product();
    let mut out = Vec::with_capacity(total * n * n);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let x: Vec<f64> = (0..n).map(|a| axes[a].node(idx[a])).collect();
        let g = metric.metric(&x);
        for i in 0..n {
            for j in 0..n {
                out.push(g[(i, j)]);
            }
        }
        for a in (0..n).rev() {
            idx[a] += 1;
            if idx[a] < header.resolution[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Manifest("truncated grid file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl MetricField for GridMetric {
    fn dim(&self) -> usize {
        self.header.dims
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.header.dims;
        let v = self.spline.eval(x);
        let g = DMatrix::from_row_slice(n, n, &v);
        (&g + g.transpose()) * 0.5
    }
    fn name(&self) -> String {
        format!("grid{}{:?}", self.header.dims, self.header.resolution)
    }
}
