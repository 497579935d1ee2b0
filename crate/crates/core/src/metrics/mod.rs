//! Metric fields on atlases and the checks run against them.

mod blowup_metric;
mod nerve;
mod pullback;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::actions::{HaarNode, LinearOrthogonalAction};
use crate::blowup::BlownUpManifold;
use crate::error::{Error, Result};
use crate::linalg;
use crate::par;

pub use blowup_metric::{
    base_blowup_metric, blow_down_samples, exceptional_fiber_length, exceptional_submersion_samples, BlowupMetric, limit_consistency, LimitCheck, SplittingFrame,
};
pub use nerve::{nerve_metric_check, NerveReport};
pub use pullback::{pullback_fibered_metric, FiberedMap, FiberedParam, FiberedProduct};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Euclidean,
    Constant,
    Custom,
    Pullback,
    Averaged,
    BlowupBlock,
    Nerve,
}

/// A symmetric positive-definite matrix per chart point.
pub trait MetricField: Send + Sync {
    fn eval(&self, chart: usize, x: &[f64]) -> Result<DMatrix<f64>>;
    fn provenance(&self) -> Provenance;
}

pub type Field = Arc<dyn MetricField>;

pub struct Euclidean(pub usize);

impl MetricField for Euclidean {
    fn eval(&self, _chart: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = if x.is_empty() { self.0 } else { x.len() };
        Ok(DMatrix::identity(n, n))
    }
    fn provenance(&self) -> Provenance {
        Provenance::Euclidean
    }
}

pub struct Constant(pub DMatrix<f64>);

impl MetricField for Constant {
    fn eval(&self, _chart: usize, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }
    fn provenance(&self) -> Provenance {
        Provenance::Constant
    }
}

type PointFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A field given by a closure of the point (chart ignored).
pub struct FnField(pub Box<PointFn>);

impl FnField {
    pub fn new(f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        FnField(Box::new(f))
    }
}

impl MetricField for FnField {
    fn eval(&self, _chart: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok((self.0)(x))
    }
    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }
}

/// Evaluates and symmetrizes, refusing anything that is not SPD.
pub fn eval_metric(field: &dyn MetricField, chart: usize, x: &[f64]) -> Result<DMatrix<f64>> {
    let g = linalg::symmetrize(&field.eval(chart, x)?);
    linalg::check_spd(&g)?;
    Ok(g)
}

/// Haar average of a field over the lifted action on `space`, through the
/// dual metric: `G_av* = sum_q w_q J_q^{-1} G(g_q x)^{-1} J_q^{-T}`.
pub struct Averaged {
    pub space: Arc<BlownUpManifold>,
    pub inner: Field,
    pub nodes: Vec<HaarNode>,
}

impl Averaged {
    pub fn dual(&self, chart: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = x.len();
        let mut acc = DMatrix::zeros(d, d);
        for node in &self.nodes {
            let (c2, x2, jac) = self.space.act_jac(&node.matrix, chart, x, self.space.level(), None)?;
            let ginv = linalg::spd_inverse(&linalg::symmetrize(&self.inner.eval(c2, &x2)?))?;
            let jinv = jac.clone().try_inverse().ok_or_else(|| Error::FrameDegenerate("singular action differential".into()))?;
            acc += (&jinv * ginv * jinv.transpose()) * node.weight;
        }
        Ok(linalg::symmetrize(&acc))
    }
}

impl MetricField for Averaged {
    fn eval(&self, chart: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        linalg::spd_inverse(&self.dual(chart, x)?)
    }
    fn provenance(&self) -> Provenance {
        Provenance::Averaged
    }
}

/// Averages a base field with the group's Haar nodes (or the given ones).
pub fn average_metric(action: &LinearOrthogonalAction, field: Field, quadrature: Option<Vec<HaarNode>>) -> Averaged {
    let space = Arc::new(BlownUpManifold::base(action, 1.0));
    average_on(space, field, quadrature)
}

/// Averages a field living on a (blown-up) atlas with the lifted action.
pub fn average_on(space: Arc<BlownUpManifold>, field: Field, quadrature: Option<Vec<HaarNode>>) -> Averaged {
    let nodes = quadrature.unwrap_or_else(|| space.action.group.haar_nodes.clone());
    Averaged { space, inner: field, nodes }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub label: String,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub kind: String,
    pub samples: usize,
    pub max_defect: f64,
    pub pass: bool,
    pub failures: Vec<Failure>,
}

impl CheckReport {
    pub fn from_defects(kind: &str, defects: Vec<(String, f64)>, tol: f64) -> Self {
        let samples = defects.len();
        let max_defect = defects.iter().map(|d| d.1).fold(0.0, f64::max);
        let failures: Vec<Failure> =
            defects.into_iter().filter(|d| !(d.1 <= tol)).map(|(label, defect)| Failure { label, defect }).collect();
        CheckReport { kind: kind.into(), samples, max_defect, pass: failures.is_empty(), failures }
    }
}

/// One point of a submersion check: metric upstairs, differential, metric downstairs.
#[derive(Debug, Clone)]
pub struct SubmersionSample {
    pub label: String,
    pub src: DMatrix<f64>,
    pub df: DMatrix<f64>,
    pub tgt: DMatrix<f64>,
}

/// Defect of `df` as a Riemannian submersion at one point: build a
/// `src`-orthonormal basis of the horizontal space `src^{-1} df^T` and compare
/// the `tgt` Gram matrix of its image with the identity. A differential that
/// is not onto counts as defect at least 1.
pub fn submersion_defect(src: &DMatrix<f64>, df: &DMatrix<f64>, tgt: &DMatrix<f64>) -> Result<f64> {
    let e = df.nrows();
    if e == 0 {
        return Ok(0.0);
    }
    let ginv = linalg::spd_inverse(&linalg::symmetrize(src))?;
    let w = &ginv * df.transpose();
    let h = linalg::gram_schmidt_in(src, &w, 1e-10);
    let img = df * &h;
    let gram = img.transpose() * tgt * &img;
    let r = h.ncols();
    let mut defect = linalg::max_abs(&(gram - DMatrix::identity(r, r)));
    if r < e {
        defect = defect.max(1.0);
    }
    Ok(defect)
}

pub fn check_riemannian_submersion(samples: &[SubmersionSample], tol: f64) -> Result<CheckReport> {
    let defects = par::try_map(samples, |s| Ok::<_, Error>((s.label.clone(), submersion_defect(&s.src, &s.df, &s.tgt)?)))?;
    Ok(CheckReport::from_defects("submersion", defects, tol))
}

/// Outside the tube the pulled-back base field and the blow-up field must be
/// bit-identical. Points within `rho` of the center are excluded.
pub fn check_isometry_outside(
    m: &BlownUpManifold,
    upstairs: &dyn MetricField,
    base: &dyn MetricField,
    rho: f64,
    samples: &[crate::strata::Sample],
) -> Result<(CheckReport, usize)> {
    let center = &m.stages[0].centers[0];
    let rows = par::try_map(samples, |s| -> Result<Option<(String, f64)>> {
        let x = m.blow_down(s.chart, &s.point);
        let r = (center.normal.transpose() * nalgebra::DVector::from_column_slice(&x)).norm();
        if r <= rho {
            return Ok(None);
        }
        let j = m.blow_down_jacobian(s.chart, &s.point);
        let pulled = j.transpose() * base.eval(0, &x)? * &j;
        let up = upstairs.eval(s.chart, &s.point)?;
        Ok(Some((format!("{}:{:?}", m.chart(s.chart).name, s.point), linalg::max_abs(&(pulled - up)))))
    })?;
    let excluded = rows.iter().filter(|r| r.is_none()).count();
    Ok((CheckReport::from_defects("isometry", rows.into_iter().flatten().collect(), 0.0), excluded))
}

/// Largest `|G(x + h e_i) - G(x)| / h` over samples and coordinate directions.
pub fn continuity_constant(field: &dyn MetricField, samples: &[crate::strata::Sample], h: f64) -> Result<f64> {
    let vals = par::try_map(samples, |s| -> Result<f64> {
        let g0 = field.eval(s.chart, &s.point)?;
        let mut worst = 0.0_f64;
        for i in 0..s.point.len() {
            let mut p = s.point.clone();
            p[i] += h;
            worst = worst.max(linalg::max_abs(&(field.eval(s.chart, &p)? - &g0)) / h);
        }
        Ok(worst)
    })?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `max |J^T G(g x) J - G(x)|` over samples and group elements.
pub fn invariance_defect(m: &BlownUpManifold, field: &dyn MetricField, samples: &[crate::strata::Sample]) -> Result<f64> {
    let elements: Vec<&DMatrix<f64>> = m.action.group.sample_elements().collect();
    let vals = par::try_map(samples, |s| -> Result<f64> {
        let g0 = field.eval(s.chart, &s.point)?;
        let mut worst = 0.0_f64;
        for g in &elements {
            let (c2, x2, j) = m.act_jac(g, s.chart, &s.point, m.level(), None)?;
            let moved = j.transpose() * field.eval(c2, &x2)? * &j;
            worst = worst.max(linalg::max_abs(&(moved - &g0)));
        }
        Ok(worst)
    })?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}
