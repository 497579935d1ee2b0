use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::atlas::BlownUpManifold;
use crate::actions::LinearOrthogonalAction;
use crate::error::{Error, Result};
use crate::par;
use crate::strata::{self, Sample, Stratification};

#[derive(Debug, Clone)]
pub struct DesingularizeOptions {
    pub radius: f64,
    pub grid: usize,
    pub max_stages: usize,
    /// Tube radius for every stage; `None` uses [`default_tube_radius`].
    pub rho: Option<f64>,
    pub regularity_samples: usize,
    pub seed: u64,
}

impl Default for DesingularizeOptions {
    fn default() -> Self {
        DesingularizeOptions { radius: 1.0, grid: 16, max_stages: 8, rho: None, regularity_samples: 10_000, seed: 0 }
    }
}

pub fn default_tube_radius(radius: f64) -> f64 {
    0.5_f64.min(radius / 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub samples: usize,
    pub histogram: BTreeMap<usize, usize>,
}

impl RegularityReport {
    pub fn orbit_dim(&self) -> Option<usize> {
        if self.regular {
            self.histogram.keys().next().copied()
        } else {
            None
        }
    }
}

/// Orbit dimensions over the given chart samples.
pub fn is_regular(m: &BlownUpManifold, samples: &[Sample]) -> Result<RegularityReport> {
    let dims = par::try_map(samples, |s| m.orbit_dimension(s.chart, &s.point))?;
    let mut histogram = BTreeMap::new();
    for d in dims {
        *histogram.entry(d).or_insert(0) += 1;
    }
    Ok(RegularityReport { regular: histogram.len() <= 1, samples: samples.len(), histogram })
}

#[derive(Debug, Clone)]
pub struct DesingularizationResult {
    /// Atlas after each stage, the last one being final.
    pub stages: Vec<BlownUpManifold>,
    pub base: BlownUpManifold,
    /// Stratification before the first stage and after every stage.
    pub snapshots: Vec<Stratification>,
    pub final_check: RegularityReport,
}

impl DesingularizationResult {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn manifold(&self) -> &BlownUpManifold {
        self.stages.last().unwrap_or(&self.base)
    }

    pub fn orbit_dim(&self) -> Option<usize> {
        self.final_check.orbit_dim()
    }
}

/// Blows up the most singular stratum until the lifted action is regular.
pub fn desingularize(action: &LinearOrthogonalAction, opts: &DesingularizeOptions) -> Result<DesingularizationResult> {
    let base = BlownUpManifold::base(action, opts.radius);
    let mut current = base.clone();
    let mut stages = Vec::new();
    let mut snapshots = vec![strata::stratify_manifold(&current, opts.grid)?];
    let rho = opts.rho.unwrap_or_else(|| default_tube_radius(opts.radius));
    while !snapshots.last().unwrap().is_regular() {
        if stages.len() >= opts.max_stages {
            return Err(Error::StageLimitExceeded(opts.max_stages));
        }
        let centers = strata::most_singular_stratum(&current, snapshots.last().unwrap())?;
        current = current.blow_up(centers, rho)?;
        let snap = strata::stratify_manifold(&current, opts.grid)?;
        let prev = snapshots.last().unwrap();
        if snap.max_codim >= prev.max_codim {
            return Err(Error::CenterNotRecognized(format!(
                "stage {} did not lower the maximal codimension ({} -> {})",
                stages.len() + 1,
                prev.max_codim,
                snap.max_codim
            )));
        }
        snapshots.push(snap);
        stages.push(current.clone());
    }
    let samples = strata::random_samples(&current, opts.regularity_samples, opts.seed);
    let final_check = is_regular(&current, &samples)?;
    Ok(DesingularizationResult { stages, base, snapshots, final_check })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalLeafReport {
    pub pass: bool,
    pub samples: usize,
    /// Largest `|pi(g p) - g pi(p)|` plus distance of `pi(g p)` from the center.
    pub max_projection_defect: f64,
    /// Smallest `dim(orbit upstairs) - dim(orbit downstairs)`.
    pub min_dim_gap: i64,
    pub failures: Vec<String>,
}

/// On sampled points of the first exceptional divisor: the orbit upstairs is
/// strictly bigger than the base leaf, and the blow-down carries it into that leaf.
pub fn exceptional_leaf_check(m: &BlownUpManifold, count: usize, seed: u64, tol: f64) -> Result<ExceptionalLeafReport> {
    let Some(stage) = m.stages.first() else {
        return Ok(ExceptionalLeafReport { pass: true, samples: 0, max_projection_defect: 0.0, min_dim_gap: 0, failures: vec![] });
    };
    let center = &stage.centers[0];
    let level1 = {
        let mut one = m.clone();
        one.stages.truncate(1);
        for c in one.charts.iter_mut() {
            if c.blown.as_ref().is_some_and(|b| b.stage > 1) {
                c.blown = None;
            }
        }
        one.charts.retain(|c| c.stage <= 1);
        one
    };
    let samples: Vec<Sample> = strata::random_samples(&level1, count, seed)
        .into_iter()
        .map(|mut s| {
            let k = level1.chart(s.chart).center_dim;
            s.point[k] = 0.0;
            s
        })
        .collect();
    let group = &m.action.group;
    let step = (group.haar_nodes.len() / 16).max(1);
    let elements: Vec<&DMatrix<f64>> =
        group.finite_elements.iter().chain(group.haar_nodes.iter().step_by(step).map(|h| &h.matrix)).collect();

    let rows = par::try_map(&samples, |s| -> Result<(f64, i64, Option<String>)> {
        let up = level1.orbit_dimension(s.chart, &s.point)? as i64;
        let x = level1.blow_down(s.chart, &s.point);
        let down = crate::actions::orbit_dimension(&m.action, &x)? as i64;
        let mut worst = 0.0_f64;
        for g in &elements {
            let (c2, p2) = level1.act(g, s.chart, &s.point)?;
            let y = level1.blow_down(c2, &p2);
            let gx = *g * DVector::from_column_slice(&x);
            let off = (DVector::from_column_slice(&y) - &gx).amax();
            let normal = (center.normal.transpose() * DVector::from_column_slice(&y)).amax();
            worst = worst.max(off).max(normal);
        }
        let fail = (up <= down || worst > tol).then(|| {
            format!("chart {} point {:?}: dims {up} vs {down}, defect {worst:e}", level1.chart(s.chart).name, s.point)
        });
        Ok((worst, up - down, fail))
    })?;
    let max_projection_defect = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let min_dim_gap = rows.iter().map(|r| r.1).min().unwrap_or(0);
    let failures: Vec<String> = rows.into_iter().filter_map(|r| r.2).take(32).collect();
    Ok(ExceptionalLeafReport { pass: failures.is_empty(), samples: samples.len(), max_projection_defect, min_dim_gap, failures })
}
