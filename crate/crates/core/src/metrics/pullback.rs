use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_riemannian_submersion, CheckReport, Field, MetricField, Provenance, SubmersionSample};
use crate::error::{Error, Result};

/// Coordinates `q` of the fibered product to `(m, m', d(m, m')/dq)`; the
/// Jacobian stacks the `m` rows above the `m'` rows.
pub type FiberedParam = Arc<dyn Fn(&[f64]) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) + Send + Sync>;

/// `m -> (f(m), df(m))`.
pub type FiberedMap = Arc<dyn Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>) + Send + Sync>;

/// `p*eta + p'*eta' - (f p)*eta_N` on `M x_N M'`.
pub struct FiberedProduct {
    pub eta: Field,
    pub eta_prime: Field,
    pub eta_n: Field,
    pub f: FiberedMap,
    pub param: FiberedParam,
}

/// Builds the fibered-product metric after checking on `precondition` points
/// of `M` that `f` is a Riemannian submersion.
pub fn pullback_fibered_metric(
    eta: Field,
    eta_prime: Field,
    eta_n: Field,
    f: FiberedMap,
    param: FiberedParam,
    precondition: &[Vec<f64>],
    tol: f64,
) -> Result<FiberedProduct> {
    let samples = precondition
        .iter()
        .map(|m| {
            let (y, df) = f(m);
            Ok(SubmersionSample { label: format!("{m:?}"), src: eta.eval(0, m)?, df, tgt: eta_n.eval(0, &y)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = check_riemannian_submersion(&samples, tol)?;
    if !report.pass {
        return Err(Error::SubmersionPreconditionFailed(report.max_defect));
    }
    Ok(FiberedProduct { eta, eta_prime, eta_n, f, param })
}

impl FiberedProduct {
    fn split(&self, jac: &DMatrix<f64>, m_dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        (jac.rows(0, m_dim).into_owned(), jac.rows(m_dim, jac.nrows() - m_dim).into_owned())
    }

    /// Samples of the second projection `p'` at the given product points.
    pub fn p_prime_samples(&self, points: &[Vec<f64>]) -> Result<Vec<SubmersionSample>> {
        crate::par::try_map(points, |q| {
            let (_, mp, jac) = (self.param)(q);
            let (_, pp) = self.split(&jac, jac.nrows() - mp.len());
            Ok(SubmersionSample { label: format!("{q:?}"), src: self.eval(0, q)?, df: pp, tgt: self.eta_prime.eval(0, &mp)? })
        })
    }

    pub fn check_p_prime(&self, points: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
        check_riemannian_submersion(&self.p_prime_samples(points)?, tol)
    }
}

impl MetricField for FiberedProduct {
    fn eval(&self, _chart: usize, q: &[f64]) -> Result<DMatrix<f64>> {
        let (m, mp, jac) = (self.param)(q);
        let (pm, pp) = self.split(&jac, m.len());
        let (y, df) = (self.f)(&m);
        let dfp = &df * &pm;
        let first = pm.transpose() * self.eta.eval(0, &m)? * &pm - dfp.transpose() * self.eta_n.eval(0, &y)? * &dfp;
        Ok(first + pp.transpose() * self.eta_prime.eval(0, &mp)? * &pp)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Pullback
    }
}
