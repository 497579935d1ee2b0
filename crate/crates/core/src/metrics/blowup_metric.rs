use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Field, MetricField, Provenance, SubmersionSample};
use crate::blowup::{BlowupCenter, BlownUpManifold};
use crate::error::{Error, Result};
use crate::linalg;
use crate::strata::Sample;

/// Quintic smoothstep, 0 at 0 and 1 at 1 with two vanishing derivatives.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Frame adapted to the center at a base point `v` near it.
#[derive(Debug, Clone)]
pub struct SplittingFrame {
    /// Orbit directions not swept by the isotropy of the foot point.
    pub h: DMatrix<f64>,
    /// Complement of `h` in `b`.
    pub h_prime: DMatrix<f64>,
    /// Complement of the normal space, `h` plus `h_prime`.
    pub b: DMatrix<f64>,
    /// Unit radial direction.
    pub k: DVector<f64>,
    /// Normal directions orthogonal to the radial one.
    pub k_perp: DMatrix<f64>,
    /// Squared normal length of `v`.
    pub v_norm2: f64,
}

/// The block metric near a blown-up center, glued to the base field outside the tube.
pub struct BlowupMetric {
    pub space: Arc<BlownUpManifold>,
    pub base: Field,
    pub center: BlowupCenter,
    pub rho: f64,
}

/// Builds the metric on a once blown-up atlas from an invariant base field.
pub fn base_blowup_metric(space: Arc<BlownUpManifold>, base: Field) -> Result<BlowupMetric> {
    let Some(stage) = space.stages.first() else {
        return Err(Error::Unsupported("nothing has been blown up".into()));
    };
    if space.stages.len() > 1 || stage.centers.len() != 1 {
        return Err(Error::Unsupported("block metric is built for a single center blown up once".into()));
    }
    let center = stage.centers[0].clone();
    let rho = stage.rho;
    Ok(BlowupMetric { space, base, center, rho })
}

impl BlowupMetric {
    fn foot(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.center.basis * (self.center.basis.transpose() * x)
    }

    pub fn normal_distance(&self, x: &[f64]) -> f64 {
        (self.center.normal.transpose() * DVector::from_column_slice(x)).norm()
    }

    pub fn splitting_frame(&self, x: &[f64]) -> Result<SplittingFrame> {
        let n = x.len();
        let xv = DVector::from_column_slice(x);
        let foot = self.foot(&xv);
        let eta0 = linalg::symmetrize(&self.base.eval(0, foot.as_slice())?);
        let normal = &self.center.normal;
        let v = normal * (normal.transpose() * &xv);
        let v_norm2 = (v.transpose() * &eta0 * &v)[0];
        if !(v_norm2 > 0.0) {
            return Err(Error::FrameDegenerate(format!("point {x:?} lies on the center")));
        }

        let action = &self.space.action;
        let orbit = action.generator_matrix(x);
        let stab = action.infinitesimal(foot.as_slice()).stabilizer_subalgebra()?;
        let iso = &orbit * &stab;
        let within = linalg::gram_schmidt_in(&eta0, &orbit, 1e-10);
        let h = linalg::complement_in(&eta0, &iso, &within);
        let b = linalg::complement_in(&eta0, normal, &DMatrix::identity(n, n));
        let h_prime = linalg::complement_in(&eta0, &h, &b);

        let k = &v / v_norm2.sqrt();
        let k_perp = linalg::complement_in(&eta0, &DMatrix::from_column_slice(n, 1, k.as_slice()), normal);
        Ok(SplittingFrame { h, h_prime, b, k, k_perp, v_norm2 })
    }

    /// `Phi^{-T} M Phi^{-1}` with `Phi = [B | k | K_perp]`.
    pub fn block(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        let fr = self.splitting_frame(x)?;
        let xv = DVector::from_column_slice(x);
        let foot = self.foot(&xv);
        let eta0 = linalg::symmetrize(&self.base.eval(0, foot.as_slice())?);
        let phi = linalg::hstack(&[&fr.b, &DMatrix::from_column_slice(n, 1, fr.k.as_slice()), &fr.k_perp], n);
        if phi.ncols() != n {
            return Err(Error::FrameDegenerate(format!("splitting frame has {} of {n} columns", phi.ncols())));
        }
        let fc = &self.center.basis;
        let db = fc.transpose() * &fr.b;
        let eta_s = fc.transpose() * &eta0 * fc;
        let nb = fr.b.ncols();
        let nk = fr.k_perp.ncols();
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (nb, nb)).copy_from(&(db.transpose() * eta_s * &db));
        m[(nb, nb)] = (fr.k.transpose() * &eta0 * &fr.k)[0];
        m.view_mut((nb + 1, nb + 1), (nk, nk)).copy_from(&((fr.k_perp.transpose() * &eta0 * &fr.k_perp) / fr.v_norm2));
        let inv = phi.try_inverse().ok_or_else(|| Error::FrameDegenerate("singular splitting frame".into()))?;
        Ok(linalg::symmetrize(&(inv.transpose() * m * &inv)))
    }

    /// The glued field on the base: the base field outside the tube, the block
    /// metric inside half of it, a smooth blend in between.
    pub fn eval_base(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.normal_distance(x);
        if r >= self.rho {
            return self.base.eval(0, x);
        }
        let chi = smoothstep((self.rho - r) / (self.rho / 2.0));
        let block = self.block(x)?;
        if chi == 1.0 {
            return Ok(block);
        }
        Ok(block * chi + self.base.eval(0, x)? * (1.0 - chi))
    }

    /// Closed form of the metric on the exceptional divisor, `tau = 0`.
    pub fn exceptional_limit(&self, chart: usize, p: &[f64]) -> Result<DMatrix<f64>> {
        let ch = self.space.chart(chart);
        let k = ch.center_dim;
        let d = ch.dim();
        let fc = ch.frame.columns(0, k).into_owned();
        let fnm = ch.frame.columns(k, d - k).into_owned();
        let s = DVector::from_column_slice(&p[..k]);
        let foot = &fc * s;
        let eta0 = linalg::symmetrize(&self.base.eval(0, foot.as_slice())?);
        let w = DVector::from_vec(ch.normal_vector(p));
        let nw = &fnm * w;
        let tt = (nw.transpose() * &eta0 * &nw)[0];
        let perp = |z: DVector<f64>| {
            let c = (z.transpose() * &eta0 * &nw)[0] / tt;
            z - &nw * c
        };
        let mut g = DMatrix::zeros(d, d);
        g.view_mut((0, 0), (k, k)).copy_from(&(fc.transpose() * &eta0 * &fc));
        g[(k, k)] = tt;
        let us: Vec<DVector<f64>> = (0..d - k - 1).map(|l| perp(fnm.column(ch.u_normal(l)).into_owned())).collect();
        for (a, ua) in us.iter().enumerate() {
            for (b, ub) in us.iter().enumerate() {
                g[(k + 1 + a, k + 1 + b)] = (ua.transpose() * &eta0 * ub)[0] / tt;
            }
        }
        Ok(g)
    }
}

impl MetricField for BlowupMetric {
    fn eval(&self, chart: usize, p: &[f64]) -> Result<DMatrix<f64>> {
        let ch = self.space.chart(chart);
        match ch.stage {
            0 => self.eval_base(p),
            1 if p[ch.center_dim] == 0.0 => self.exceptional_limit(chart, p),
            1 => {
                let x = self.space.blow_down(chart, p);
                let j = self.space.blow_down_jacobian(chart, p);
                Ok(j.transpose() * self.eval_base(&x)? * &j)
            }
            s => Err(Error::Unsupported(format!("block metric on stage {s} charts"))),
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::BlowupBlock
    }
}

/// Length of the exceptional fiber over the center point `s` for a codimension-2
/// center, summing the arc lengths of the `u`-segments of the projective charts.
pub fn exceptional_fiber_length(metric: &BlowupMetric, s: &[f64]) -> Result<f64> {
    if metric.center.codim() != 2 {
        return Err(Error::Unsupported(format!("fiber length for codimension {}", metric.center.codim())));
    }
    let nodes = linalg::gauss_legendre(32);
    let mut total = 0.0;
    for &c in &metric.space.stages[0].charts {
        let k = metric.space.chart(c).center_dim;
        let mut p = s.to_vec();
        p.extend([0.0, 0.0]);
        for &(u, w) in &nodes {
            p[k + 1] = u;
            total += w * metric.eval(c, &p)?[(k + 1, k + 1)].sqrt();
        }
    }
    Ok(total)
}

/// Samples of the restricted blow-down `E -> center`: tangent metric of the
/// divisor, projection onto the `s` coordinates, center metric.
pub fn exceptional_submersion_samples(metric: &BlowupMetric, samples: &[Sample]) -> Result<Vec<SubmersionSample>> {
    crate::par::try_map(samples, |smp| {
        let ch = metric.space.chart(smp.chart);
        let k = ch.center_dim;
        let d = ch.dim();
        let mut p = smp.point.clone();
        p[k] = 0.0;
        let g = metric.exceptional_limit(smp.chart, &p)?;
        let keep: Vec<usize> = (0..d).filter(|&i| i != k).collect();
        let src = g.select_rows(&keep).select_columns(&keep);
        let df = DMatrix::from_fn(k, d - 1, |r, c| if r == c { 1.0 } else { 0.0 });
        let fc = ch.frame.columns(0, k).into_owned();
        let foot = &fc * DVector::from_column_slice(&p[..k]);
        let tgt = fc.transpose() * metric.base.eval(0, foot.as_slice())? * &fc;
        Ok(SubmersionSample { label: format!("{}:{:?}", ch.name, p), src, df, tgt })
    })
}

/// Samples of the full blow-down: upstairs chart metric, its Jacobian, the base field.
pub fn blow_down_samples(metric: &BlowupMetric, samples: &[Sample]) -> Result<Vec<SubmersionSample>> {
    crate::par::try_map(samples, |smp| {
        let x = metric.space.blow_down(smp.chart, &smp.point);
        Ok(SubmersionSample {
            label: format!("{}:{:?}", metric.space.chart(smp.chart).name, smp.point),
            src: metric.eval(smp.chart, &smp.point)?,
            df: metric.space.blow_down_jacobian(smp.chart, &smp.point),
            tgt: metric.base.eval(0, &x)?,
        })
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCheck {
    pub tau: f64,
    pub tol: f64,
    pub max_diff: f64,
    pub pass: bool,
}

/// Compares the closed-form divisor metric with the chart metric at small
/// `tau` on the tangent block of the divisor.
pub fn limit_consistency(metric: &BlowupMetric, samples: &[Sample]) -> Result<Vec<LimitCheck>> {
    let mut out = Vec::new();
    for (tau, tol) in [(1e-3, 1e-5), (1e-4, 1e-7)] {
        let diffs = crate::par::try_map(samples, |smp| -> Result<f64> {
            let ch = metric.space.chart(smp.chart);
            let k = ch.center_dim;
            let keep: Vec<usize> = (0..ch.dim()).filter(|&i| i != k).collect();
            let mut p = smp.point.clone();
            p[k] = 0.0;
            let lim = metric.exceptional_limit(smp.chart, &p)?;
            p[k] = tau;
            let num = metric.eval(smp.chart, &p)?;
            let diff = (lim - num).select_rows(&keep).select_columns(&keep);
            Ok(linalg::max_abs(&diff))
        })?;
        let max_diff = diffs.into_iter().fold(0.0, f64::max);
        out.push(LimitCheck { tau, tol, max_diff, pass: max_diff <= tol });
    }
    Ok(out)
}
