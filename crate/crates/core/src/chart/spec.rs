use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{Chart, GridMetric, Warp};
use crate::error::{Error, Result};

/// Serializable description of a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChartSpec {
    Flat {
        dim: usize,
        #[serde(default = "unit")]
        half_width: f64,
    },
    Sphere {
        dim: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    Hyperbolic { dim: usize, half_width: f64, y_lo: f64, y_hi: f64 },
    SphereTimesCircles { sphere_dim: usize, radius: f64, circle_radii: Vec<f64> },
    Sphere3Toroidal,
    Rotational { dim: usize, warp: Warp, r_max: f64 },
    /// Metric samples read from a grid file.
    Grid { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

impl ChartSpec {
    pub fn build(&self) -> Result<Chart> {
        let positive_dim = |dim: usize, min: usize| {
            if dim < min {
                Err(Error::UnsupportedDimension { dim, reason: format!("this chart needs dimension >= {min}") })
            } else {
                Ok(())
            }
        };
        Ok(match self {
            ChartSpec::Flat { dim, half_width } => {
                positive_dim(*dim, 1)?;
                Chart::flat(*dim, *half_width)
            }
            ChartSpec::Sphere { dim, radius } => {
                positive_dim(*dim, 2)?;
                Chart::sphere(*dim, *radius)
            }
            ChartSpec::Hyperbolic { dim, half_width, y_lo, y_hi } => {
                positive_dim(*dim, 2)?;
                if !(*y_lo > 0.0 && y_hi > y_lo) {
                    return Err(Error::InvalidParameter(format!("need 0 < y_lo < y_hi, got {y_lo}, {y_hi}")));
                }
                Chart::hyperbolic(*dim, *half_width, *y_lo, *y_hi)
            }
            ChartSpec::SphereTimesCircles { sphere_dim, radius, circle_radii } => {
                positive_dim(*sphere_dim, 2)?;
                Chart::sphere_times_circles(*sphere_dim, *radius, circle_radii.clone())
            }
            ChartSpec::Sphere3Toroidal => Chart::sphere3_toroidal(),
            ChartSpec::Rotational { dim, warp, r_max } => {
                positive_dim(*dim, 2)?;
                Chart::rotational(*dim, warp.clone(), *r_max)
            }
            ChartSpec::Grid { path } => GridMetric::read_file(path)?.into_chart()?,
        })
    }
}
