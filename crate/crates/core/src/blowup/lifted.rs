//! Finite group elements acting on blow-up charts.
//!
//! On a first-stage chart the action has a closed form: the frame splits `g`
//! into blocks `A` (center) and `B` (normal), and `(s, tau, u)` goes to
//! `(A s, tau c, w'/c)` in the chart normalizing the largest entry of
//! `w' = B w(u)`, where `c` is that entry. Deeper stages blow down one level,
//! act there, and lift back; on the exceptional divisor the direction is
//! transported by the parent-level differential.

use nalgebra::{DMatrix, DVector};

use super::atlas::{argmax_abs, BlownUpManifold};
use crate::error::{Error, Result};

/// Step for the symmetric difference used at exceptional points of deep stages.
const EXCEPTIONAL_STEP: f64 = 1e-5;

struct StageOne {
    chart: usize,
    point: Vec<f64>,
    jacobian: DMatrix<f64>,
}

impl BlownUpManifold {
    fn stage_one(&self, g: &DMatrix<f64>, c: usize, p: &[f64]) -> StageOne {
        let ch = &self.charts[c];
        let k = ch.center_dim;
        let m = ch.normal_dim();
        let d = ch.dim();
        let gp = ch.frame.transpose() * g * &ch.frame;
        let a = gp.view((0, 0), (k, k));
        let b = gp.view((k, k), (m, m));
        let w = DVector::from_vec(ch.normal_vector(p));
        let wp = b * &w;
        let j = argmax_abs(wp.as_slice());
        let cj = wp[j];
        let tau = p[k];

        let s = DVector::from_column_slice(&p[..k]);
        let mut point: Vec<f64> = (a * s).as_slice().to_vec();
        point.push(tau * cj);
        for l in 0..m {
            if l != j {
                point.push(wp[l] / cj);
            }
        }

        let mut jac = DMatrix::zeros(d, d);
        jac.view_mut((0, 0), (k, k)).copy_from(&a);
        jac[(k, k)] = cj;
        for col in 0..m - 1 {
            let idx = ch.u_normal(col);
            jac[(k, k + 1 + col)] = tau * b[(j, idx)];
            let mut row = k + 1;
            for l in 0..m {
                if l == j {
                    continue;
                }
                jac[(row, k + 1 + col)] = (b[(l, idx)] * cj - wp[l] * b[(j, idx)]) / (cj * cj);
                row += 1;
            }
        }
        let parent = ch.parent.expect("stage-one chart has a parent");
        let chart = self.charts[parent].blown.as_ref().expect("parent blown up").children[j];
        StageOne { chart, point, jacobian: jac }
    }

    /// `g` applied to a chart point of a leaf chart of the level-`level` atlas.
    pub fn act_at_level(&self, g: &DMatrix<f64>, c: usize, p: &[f64], level: usize) -> Result<(usize, Vec<f64>)> {
        let ch = &self.charts[c];
        match ch.stage {
            0 => {
                let x = (g * DVector::from_column_slice(p)).as_slice().to_vec();
                self.promote(0, x, level)
            }
            1 => {
                let r = self.stage_one(g, c, p);
                self.promote(r.chart, r.point, level)
            }
            s => {
                let pc = ch.parent.expect("deep chart has a parent");
                let y = self.local_to_parent(c, p);
                let (pc2, y2) = self.act_at_level(g, pc, &y, s - 1)?;
                if p[ch.center_dim] != 0.0 {
                    return self.promote(pc2, y2, level);
                }
                let (child, q) = self.transport_direction(g, c, p, pc, &y, pc2, &y2)?;
                self.promote(child, q, level)
            }
        }
    }

    /// Lifts an exceptional point through the parent-level differential.
    #[allow(clippy::too_many_arguments)]
    fn transport_direction(
        &self,
        g: &DMatrix<f64>,
        c: usize,
        p: &[f64],
        pc: usize,
        y: &[f64],
        pc2: usize,
        y2: &[f64],
    ) -> Result<(usize, Vec<f64>)> {
        let ch = &self.charts[c];
        let (out_chart, _, jac) = self.act_jac(g, pc, y, ch.stage - 1, None)?;
        debug_assert_eq!(out_chart, pc2);
        let blown = self.charts[pc2].blown.as_ref().filter(|b| b.stage == ch.stage).ok_or_else(|| {
            Error::ChartExit(format!("image of exceptional point of {} left the center", ch.name))
        })?;
        let center = &self.stages[blown.stage - 1].centers[blown.center];
        let src = &self.stages[ch.stage - 1].centers[self.charts[pc].blown.as_ref().unwrap().center];
        let w = DVector::from_vec(ch.normal_vector(p));
        let dir = center.normal.transpose() * &jac * &src.normal * w;
        let j = argmax_abs(dir.as_slice());
        let child = blown.children[j];
        let a = center.basis.transpose() * DVector::from_column_slice(y2);
        let mut q: Vec<f64> = a.as_slice().to_vec();
        q.push(0.0);
        for l in 0..dir.len() {
            if l != j {
                q.push(dir[l] / dir[j]);
            }
        }
        Ok((child, q))
    }

    /// Lifted action on the current atlas.
    pub fn act(&self, g: &DMatrix<f64>, c: usize, p: &[f64]) -> Result<(usize, Vec<f64>)> {
        self.act_at_level(g, c, p, self.level())
    }

    /// Image chart, image point and Jacobian of the lifted action at `(c, p)`.
    /// When `target` is given the image is expressed in that chart if it lies
    /// on the promotion path.
    pub fn act_jac(
        &self,
        g: &DMatrix<f64>,
        c: usize,
        p: &[f64],
        level: usize,
        target: Option<usize>,
    ) -> Result<(usize, Vec<f64>, DMatrix<f64>)> {
        let ch = &self.charts[c];
        match ch.stage {
            0 => {
                let x = (g * DVector::from_column_slice(p)).as_slice().to_vec();
                self.promote_jacobian(0, x, g.clone(), level, target)
            }
            1 => {
                let r = self.stage_one(g, c, p);
                self.promote_jacobian(r.chart, r.point, r.jacobian, level, target)
            }
            s => {
                let k = ch.center_dim;
                if p[k] == 0.0 {
                    let (c0, q0) = self.act_at_level(g, c, p, level)?;
                    let mut sum = DMatrix::zeros(ch.dim(), ch.dim());
                    for sign in [1.0, -1.0] {
                        let mut q = p.to_vec();
                        q[k] = sign * EXCEPTIONAL_STEP;
                        let (c1, _, j1) = self.act_jac(g, c, &q, level, Some(c0))?;
                        if c1 != c0 {
                            return Err(Error::ChartExit(format!("chart switch near exceptional point of {}", ch.name)));
                        }
                        sum += j1;
                    }
                    return Ok((c0, q0, sum * 0.5));
                }
                let pc = ch.parent.expect("deep chart has a parent");
                let y = self.local_to_parent(c, p);
                let target_parent = target.and_then(|t| self.ancestor_at_stage(t, s - 1));
                let (pc2, y2, jp) = self.act_jac(g, pc, &y, s - 1, target_parent)?;
                let jac = jp * self.local_jacobian(c, p);
                self.promote_jacobian(pc2, y2, jac, level, target)
            }
        }
    }

    fn ancestor_at_stage(&self, c: usize, stage: usize) -> Option<usize> {
        let mut cur = c;
        loop {
            if self.charts[cur].stage == stage {
                return Some(cur);
            }
            cur = self.charts[cur].parent?;
        }
    }

    fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(x) = cur {
            if x == a {
                return true;
            }
            cur = self.charts[x].parent;
        }
        false
    }

    fn promote_jacobian(
        &self,
        c: usize,
        y: Vec<f64>,
        mut jac: DMatrix<f64>,
        level: usize,
        target: Option<usize>,
    ) -> Result<(usize, Vec<f64>, DMatrix<f64>)> {
        let (mut chart, mut p) = (c, y);
        while let Some(b) = &self.charts[chart].blown {
            if b.stage > level {
                break;
            }
            let preferred = target.and_then(|t| b.children.iter().copied().find(|&ch| self.is_ancestor(ch, t)));
            let child = match preferred {
                Some(ch) => ch,
                None => self.choose_child(chart, &p).ok_or_else(|| {
                    Error::ChartExit(format!("point {p:?} of chart {} lies on a blow-up center", self.charts[chart].name))
                })?,
            };
            jac = self.lift_jacobian(child, &p) * jac;
            p = self.lift_into(child, &p);
            chart = child;
        }
        Ok((chart, p, jac))
    }

    /// Jacobian of the lifted action between chart coordinate systems.
    pub fn differential_of_action(&self, g: &DMatrix<f64>, c: usize, p: &[f64]) -> Result<(usize, DMatrix<f64>)> {
        let (chart, _, jac) = self.act_jac(g, c, p, self.level(), None)?;
        Ok((chart, jac))
    }
}
