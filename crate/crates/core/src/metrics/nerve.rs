use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{average_on, check_riemannian_submersion, Averaged, CheckReport, Field, SubmersionSample};
use crate::actions::GroupShape;
use crate::blowup::BlownUpManifold;
use crate::error::{Error, Result};
use crate::linalg;
use crate::strata::Sample;

#[derive(Debug, Clone, Serialize)]
pub struct NerveReport {
    pub group: String,
    pub k: usize,
    pub samples: usize,
    pub max_defect: f64,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
}

/// The quotient metrics on `G^(k)`, `k <= 2`, obtained from `G^{k+1} x M`
/// (flat group factors, averaged field on `M`) by the diagonal action.
struct Nerve {
    space: Arc<BlownUpManifold>,
    avg: Averaged,
    circle: bool,
}

impl Nerve {
    fn element(&self, theta: f64) -> DMatrix<f64> {
        self.space.action.group.exp_algebra(&[theta])
    }

    fn v(&self, c: usize, x: &[f64]) -> DMatrix<f64> {
        if self.circle {
            self.space.generator_values(c, x)
        } else {
            DMatrix::zeros(x.len(), 0)
        }
    }

    /// Dual metric of `G^(k)` at a point with space component `(c, x)`.
    /// Group coordinates come first; the metric does not depend on them.
    fn dual(&self, k: usize, c: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.avg.dual(c, x)?;
        if !self.circle {
            return Ok(a);
        }
        let v = self.v(c, x);
        let n = x.len();
        let mut out = DMatrix::zeros(k + n, k + n);
        for i in 0..k {
            out[(i, i)] = 2.0;
            if i + 1 < k {
                out[(i, i + 1)] = -1.0;
                out[(i + 1, i)] = -1.0;
            }
        }
        out.view_mut((k, k), (n, n)).copy_from(&(&v * v.transpose() + a));
        if k > 0 {
            for r in 0..n {
                out[(k - 1, k + r)] = -v[(r, 0)];
                out[(k + r, k - 1)] = -v[(r, 0)];
            }
        }
        Ok(out)
    }

    fn metric(&self, k: usize, c: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        linalg::spd_inverse(&self.dual(k, c, x)?)
    }

    fn group_dims(&self, k: usize) -> usize {
        if self.circle {
            k
        } else {
            0
        }
    }

    /// Differential of a face map in block form: `rows x cols` of group
    /// coordinates followed by the space block.
    fn face(&self, k: usize, group: &[(usize, usize)], space: DMatrix<f64>, velocity: Option<(usize, DMatrix<f64>)>) -> DMatrix<f64> {
        let (gk, gk1) = (self.group_dims(k - 1), self.group_dims(k));
        let n = space.nrows();
        let mut df = DMatrix::zeros(gk + n, gk1 + n);
        if self.circle {
            for &(r, c) in group {
                df[(r, c)] = 1.0;
            }
            if let Some((col, v)) = velocity {
                df.view_mut((gk, col), (n, 1)).copy_from(&v);
            }
        }
        df.view_mut((gk, gk1), (n, n)).copy_from(&space);
        df
    }
}

/// Face maps of the nerve up to level `k` are Riemannian submersions; level 0
/// checks invariance of the space metric.
pub fn nerve_metric_check(space: Arc<BlownUpManifold>, field: Field, k: usize, samples: &[Sample], seed: u64, tol: f64) -> Result<NerveReport> {
    let shape = space.action.group.shape();
    let circle = match shape {
        GroupShape::Finite => false,
        GroupShape::Circle => true,
        GroupShape::Other => return Err(Error::UnsupportedGroup("nerve checks cover finite groups and the circle".into())),
    };
    if k > 2 {
        return Err(Error::Unsupported(format!("nerve level {k}")));
    }
    let nerve = Nerve { avg: average_on(space.clone(), field, None), space: space.clone(), circle };
    let finite = &space.action.group.finite_elements;
    let level = space.level();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64, usize, usize)> = (0..samples.len())
        .map(|_| {
            let two_pi = std::f64::consts::TAU;
            (rng.gen_range(0.0..two_pi), rng.gen_range(0.0..two_pi), rng.gen_range(0..finite.len()), rng.gen_range(0..finite.len()))
        })
        .collect();
    let elem = |i: usize, first: bool| -> DMatrix<f64> {
        let (ta, tb, fa, fb) = params[i];
        match (circle, first) {
            (true, true) => nerve.element(ta),
            (true, false) => nerve.element(tb),
            (false, true) => finite[fa].clone(),
            (false, false) => finite[fb].clone(),
        }
    };

    let mut checks = Vec::new();
    let idx: Vec<usize> = (0..samples.len()).collect();

    let inv = crate::par::try_map(&idx, |&i| -> Result<(String, f64)> {
        let s = &samples[i];
        let g = elem(i, true);
        let (c2, x2, j) = space.act_jac(&g, s.chart, &s.point, level, None)?;
        let moved = j.transpose() * nerve.metric(0, c2, &x2)? * &j;
        Ok((format!("{:?}", s.point), linalg::max_abs(&(moved - nerve.metric(0, s.chart, &s.point)?))))
    })?;
    checks.push(CheckReport::from_defects("k0:invariance", inv, tol));

    if k >= 1 {
        let mut src_samples = Vec::new();
        let mut tgt_samples = Vec::new();
        for i in 0..samples.len() {
            let s = &samples[i];
            let n = s.point.len();
            let g = elem(i, true);
            let (c2, x2, j) = space.act_jac(&g, s.chart, &s.point, level, None)?;
            let h1 = nerve.metric(1, s.chart, &s.point)?;
            let label = format!("{:?}", s.point);
            src_samples.push(SubmersionSample {
                label: label.clone(),
                src: h1.clone(),
                df: nerve.face(1, &[], DMatrix::identity(n, n), None),
                tgt: nerve.metric(0, s.chart, &s.point)?,
            });
            tgt_samples.push(SubmersionSample {
                label,
                src: h1,
                df: nerve.face(1, &[], j, Some((0, nerve.v(c2, &x2)))),
                tgt: nerve.metric(0, c2, &x2)?,
            });
        }
        let mut a = check_riemannian_submersion(&src_samples, tol)?;
        a.kind = "k1:source".into();
        let mut b = check_riemannian_submersion(&tgt_samples, tol)?;
        b.kind = "k1:target".into();
        checks.extend([a, b]);
    }

    if k >= 2 {
        let mut faces: [Vec<SubmersionSample>; 3] = Default::default();
        for i in 0..samples.len() {
            let s = &samples[i];
            let n = s.point.len();
            let gb = elem(i, false);
            let (c2, x2, jb) = space.act_jac(&gb, s.chart, &s.point, level, None)?;
            let h2 = nerve.metric(2, s.chart, &s.point)?;
            let h1 = nerve.metric(1, s.chart, &s.point)?;
            let label = format!("{:?}", s.point);
            let id = DMatrix::identity(n, n);
            faces[0].push(SubmersionSample {
                label: label.clone(),
                src: h2.clone(),
                df: nerve.face(2, &[(0, 0)], jb, Some((1, nerve.v(c2, &x2)))),
                tgt: nerve.metric(1, c2, &x2)?,
            });
            faces[1].push(SubmersionSample {
                label: label.clone(),
                src: h2.clone(),
                df: nerve.face(2, &[(0, 0), (0, 1)], id.clone(), None),
                tgt: h1.clone(),
            });
            faces[2].push(SubmersionSample { label, src: h2, df: nerve.face(2, &[(0, 1)], id, None), tgt: h1 });
        }
        for (i, f) in faces.iter().enumerate() {
            let mut r = check_riemannian_submersion(f, tol)?;
            r.kind = format!("k2:d{i}");
            checks.push(r);
        }
    }

    let max_defect = checks.iter().map(|c| c.max_defect).fold(0.0, f64::max);
    let pass = checks.iter().all(|c| c.pass);
    let group = if circle { "circle" } else { "finite" }.to_string();
    Ok(NerveReport { group, k, samples: samples.len(), max_defect, pass, checks })
}
