use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::actions::{Infinitesimal, LinearOrthogonalAction};
use crate::error::{Error, Result};
use crate::poly::Poly;

/// Relative size of the division remainder tolerated when lifting generators.
const SATURATION_TOL: f64 = 1e-9;

/// A linear subspace of one chart, blown up as part of a stage.
#[derive(Debug, Clone)]
pub struct BlowupCenter {
    /// Chart whose coordinates the subspace is written in (0 = base).
    pub chart: usize,
    /// Orthonormal basis of the center, columns in chart coordinates.
    pub basis: DMatrix<f64>,
    /// Orthonormal basis of its orthogonal complement.
    pub normal: DMatrix<f64>,
    pub tolerance: f64,
}

impl BlowupCenter {
    pub fn new(chart: usize, basis: DMatrix<f64>) -> Self {
        let normal = crate::linalg::orthogonal_complement(&basis);
        BlowupCenter { chart, basis, normal, tolerance: 1e-9 }
    }

    /// Coordinate subspace `{y_i = 0 for i in zeros}` of a `dim`-dimensional chart.
    pub fn coordinate(chart: usize, dim: usize, zeros: &[usize]) -> Self {
        let keep: Vec<usize> = (0..dim).filter(|i| !zeros.contains(i)).collect();
        let pick = |idx: &[usize]| DMatrix::from_fn(dim, idx.len(), |r, c| if r == idx[c] { 1.0 } else { 0.0 });
        BlowupCenter { chart, basis: pick(&keep), normal: pick(zeros), tolerance: 1e-9 }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn codim(&self) -> usize {
        self.normal.ncols()
    }

    /// `[basis | normal]`, so chart coordinates are `frame * (a, b)`.
    pub fn frame(&self) -> DMatrix<f64> {
        crate::linalg::hstack(&[&self.basis, &self.normal], self.basis.nrows())
    }
}

#[derive(Debug, Clone)]
pub struct Blown {
    pub stage: usize,
    pub center: usize,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub id: usize,
    pub name: String,
    pub stage: usize,
    pub parent: Option<usize>,
    pub coord_names: Vec<String>,
    pub half_widths: Vec<f64>,
    /// Parent coordinates are `frame * (s, tau * w(u))`.
    pub frame: DMatrix<f64>,
    pub center_dim: usize,
    /// Which normal coordinate is normalized to 1.
    pub normal_index: usize,
    /// Lifted generator fields, one polynomial per coordinate.
    pub fields: Vec<Vec<Poly>>,
    field_jac: Vec<Vec<Vec<Poly>>>,
    pub blown: Option<Blown>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    /// Index of the exceptional coordinate tau.
    pub fn tau_index(&self) -> Option<usize> {
        (self.stage > 0).then_some(self.center_dim)
    }

    pub fn normal_dim(&self) -> usize {
        self.dim() - self.center_dim
    }

    /// `w(u)`: the normalized normal direction.
    pub fn normal_vector(&self, p: &[f64]) -> Vec<f64> {
        let k = self.center_dim;
        let m = self.normal_dim();
        let mut w = Vec::with_capacity(m);
        let mut u = p[k + 1..].iter();
        for l in 0..m {
            w.push(if l == self.normal_index { 1.0 } else { *u.next().unwrap() });
        }
        w
    }

    /// Normal index carried by the l-th u coordinate.
    pub fn u_normal(&self, l: usize) -> usize {
        if l < self.normal_index {
            l
        } else {
            l + 1
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub centers: Vec<BlowupCenter>,
    pub rho: f64,
    pub charts: Vec<usize>,
}

impl Stage {
    /// The outer chart (complement of the center) plus the projective charts.
    pub fn chart_count(&self) -> usize {
        1 + self.charts.len()
    }
}

#[derive(Debug, Clone)]
pub struct BlownUpManifold {
    pub action: LinearOrthogonalAction,
    pub radius: f64,
    pub charts: Vec<Chart>,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub point: Vec<f64>,
}

fn base_names(n: usize) -> Vec<String> {
    if n <= 3 {
        ["x", "y", "z"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

fn column_name(names: &[String], col: &DMatrix<f64>, c: usize, fallback: String) -> String {
    let nz: Vec<usize> = (0..col.nrows()).filter(|&r| col[(r, c)].abs() > 1e-12).collect();
    if nz.len() == 1 && (col[(nz[0], c)].abs() - 1.0).abs() < 1e-12 {
        names[nz[0]].clone()
    } else {
        fallback
    }
}

fn column_half_width(widths: &[f64], col: &DMatrix<f64>, c: usize) -> f64 {
    (0..col.nrows()).filter(|&r| col[(r, c)].abs() > 1e-12).map(|r| widths[r]).fold(0.0, f64::max)
}

impl BlownUpManifold {
    /// The unblown base `R^n`, sampled over the ball of the given radius.
    pub fn base(action: &LinearOrthogonalAction, radius: f64) -> Self {
        let n = action.dim();
        let fields = action
            .group
            .lie_algebra
            .iter()
            .map(|x| (0..n).map(|r| Poly::linear(x.row(r).transpose().as_slice())).collect())
            .collect();
        let mut chart = Chart {
            id: 0,
            name: "base".into(),
            stage: 0,
            parent: None,
            coord_names: base_names(n),
            half_widths: vec![radius; n],
            frame: DMatrix::identity(n, n),
            center_dim: n,
            normal_index: 0,
            fields,
            field_jac: Vec::new(),
            blown: None,
        };
        chart.field_jac = jacobian_polys(&chart.fields, n);
        BlownUpManifold { action: action.clone(), radius, charts: vec![chart], stages: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.action.dim()
    }

    pub fn level(&self) -> usize {
        self.stages.len()
    }

    pub fn chart(&self, id: usize) -> &Chart {
        &self.charts[id]
    }

    pub fn chart_count(&self) -> usize {
        self.stages.iter().map(|s| s.chart_count()).sum()
    }

    /// Charts that carry samples: the base before any blow-up, afterwards the
    /// charts that have not been blown up again. Together they cover the region.
    pub fn leaf_charts(&self) -> Vec<usize> {
        if self.stages.is_empty() {
            return vec![0];
        }
        self.charts.iter().filter(|c| c.stage > 0 && c.blown.is_none()).map(|c| c.id).collect()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.leaf_charts().contains(&id)
    }

    /// One step of the blow-down: chart coordinates to parent coordinates.
    pub fn local_to_parent(&self, c: usize, p: &[f64]) -> Vec<f64> {
        let ch = &self.charts[c];
        let k = ch.center_dim;
        let w = ch.normal_vector(p);
        let tau = p[k];
        let mut z = DVector::zeros(ch.frame.ncols());
        for q in 0..k {
            z[q] = p[q];
        }
        for (l, wl) in w.iter().enumerate() {
            z[k + l] = tau * wl;
        }
        (&ch.frame * z).as_slice().to_vec()
    }

    /// Jacobian of `local_to_parent`.
    pub fn local_jacobian(&self, c: usize, p: &[f64]) -> DMatrix<f64> {
        let ch = &self.charts[c];
        let k = ch.center_dim;
        let d = ch.dim();
        let m = ch.normal_dim();
        let w = ch.normal_vector(p);
        let tau = p[k];
        let mut dz = DMatrix::zeros(d, d);
        for q in 0..k {
            dz[(q, q)] = 1.0;
        }
        for l in 0..m {
            dz[(k + l, k)] = w[l];
        }
        for l in 0..m - 1 {
            dz[(k + ch.u_normal(l), k + 1 + l)] = tau;
        }
        &ch.frame * dz
    }

    /// Composed blow-down into the base.
    pub fn blow_down(&self, c: usize, p: &[f64]) -> Vec<f64> {
        let mut chart = c;
        let mut y = p.to_vec();
        while let Some(parent) = self.charts[chart].parent {
            y = self.local_to_parent(chart, &y);
            chart = parent;
        }
        y
    }

    /// Jacobian of the composed blow-down.
    pub fn blow_down_jacobian(&self, c: usize, p: &[f64]) -> DMatrix<f64> {
        let mut chart = c;
        let mut y = p.to_vec();
        let mut j = DMatrix::identity(p.len(), p.len());
        while let Some(parent) = self.charts[chart].parent {
            j = self.local_jacobian(chart, &y) * j;
            y = self.local_to_parent(chart, &y);
            chart = parent;
        }
        j
    }

    /// Normal coordinates of a parent point relative to the center blown up in that chart.
    pub fn normal_coords(&self, parent: usize, y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let b = self.charts[parent].blown.as_ref()?;
        let center = &self.stages[b.stage - 1].centers[b.center];
        let yv = DVector::from_column_slice(y);
        let a = center.basis.transpose() * &yv;
        let n = center.normal.transpose() * &yv;
        Some((a.as_slice().to_vec(), n.as_slice().to_vec()))
    }

    /// Coordinates in `child` of a point of its parent chart off the center.
    pub fn lift_into(&self, child: usize, y: &[f64]) -> Vec<f64> {
        let ch = &self.charts[child];
        let parent = ch.parent.expect("projective chart");
        let (a, b) = self.normal_coords(parent, y).expect("parent was blown up");
        let j = ch.normal_index;
        let t = b[j];
        let mut out = a;
        out.push(t);
        for (l, bl) in b.iter().enumerate() {
            if l != j {
                out.push(bl / t);
            }
        }
        out
    }

    pub fn lift_jacobian(&self, child: usize, y: &[f64]) -> DMatrix<f64> {
        let ch = &self.charts[child];
        let parent = ch.parent.expect("projective chart");
        let (_, b) = self.normal_coords(parent, y).expect("parent was blown up");
        let k = ch.center_dim;
        let d = ch.dim();
        let j = ch.normal_index;
        let t = b[j];
        let mut dz = DMatrix::zeros(d, d);
        for q in 0..k {
            dz[(q, q)] = 1.0;
        }
        dz[(k, k + j)] = 1.0;
        for l in 0..ch.normal_dim() - 1 {
            let bl = ch.u_normal(l);
            dz[(k + 1 + l, k + bl)] = 1.0 / t;
            dz[(k + 1 + l, k + j)] = -b[bl] / (t * t);
        }
        dz * ch.frame.transpose()
    }

    /// Child whose normalized coordinate is largest in magnitude (first on ties).
    pub fn choose_child(&self, parent: usize, y: &[f64]) -> Option<usize> {
        let b = self.charts[parent].blown.as_ref()?;
        let (_, nb) = self.normal_coords(parent, y)?;
        let j = argmax_abs(&nb);
        if nb[j].abs() == 0.0 {
            return None;
        }
        Some(b.children[j])
    }

    /// Pushes a point into the deepest charts blown up at stages `<= level`.
    pub fn promote(&self, c: usize, y: Vec<f64>, level: usize) -> Result<(usize, Vec<f64>)> {
        let (mut chart, mut p) = (c, y);
        while let Some(b) = &self.charts[chart].blown {
            if b.stage > level {
                break;
            }
            let child = self.choose_child(chart, &p).ok_or_else(|| {
                Error::ChartExit(format!("point {p:?} of chart {} lies on a blow-up center", self.charts[chart].name))
            })?;
            p = self.lift_into(child, &p);
            chart = child;
        }
        Ok((chart, p))
    }

    /// Inverse of the blow-down off the exceptional loci.
    pub fn lift_point(&self, x: &[f64]) -> Result<ChartPoint> {
        let (chart, point) = self.promote(0, x.to_vec(), self.level())?;
        Ok(ChartPoint { chart, point })
    }

    pub fn generator_values(&self, c: usize, p: &[f64]) -> DMatrix<f64> {
        let ch = &self.charts[c];
        DMatrix::from_fn(ch.dim(), ch.fields.len(), |r, i| ch.fields[i][r].eval(p))
    }

    pub fn infinitesimal(&self, c: usize, p: &[f64]) -> Infinitesimal {
        let ch = &self.charts[c];
        let d = ch.dim();
        let jacobians = ch
            .field_jac
            .iter()
            .map(|jac| DMatrix::from_fn(d, d, |r, col| jac[r][col].eval(p)))
            .collect();
        Infinitesimal { point: p.to_vec(), values: self.generator_values(c, p), jacobians }
    }

    pub fn orbit_dimension(&self, c: usize, p: &[f64]) -> Result<usize> {
        crate::linalg::rank_at(&self.generator_values(c, p), p)
    }

    /// Is `p` exceptional for some stage (tau = 0 in its chart or an ancestor)?
    pub fn is_exceptional(&self, c: usize, p: &[f64]) -> bool {
        let mut chart = c;
        let mut y = p.to_vec();
        while let Some(parent) = self.charts[chart].parent {
            if y[self.charts[chart].center_dim] == 0.0 {
                return true;
            }
            y = self.local_to_parent(chart, &y);
            chart = parent;
        }
        false
    }

    /// Adds one stage: every center is blown up in its chart.
    pub fn blow_up(&self, centers: Vec<BlowupCenter>, rho: f64) -> Result<BlownUpManifold> {
        if !(rho > 0.0) || rho >= self.radius {
            return Err(Error::TubeTooLarge { rho, limit: self.radius });
        }
        let stage = self.stages.len() + 1;
        let mut out = self.clone();
        let mut stage_charts = Vec::new();
        for (ci, center) in centers.iter().enumerate() {
            let pc = center.chart;
            if !self.is_leaf(pc) {
                return Err(Error::CenterNotRecognized(format!("chart {pc} is not a leaf chart")));
            }
            let defect = crate::linalg::max_abs(&(center.frame().transpose() * center.frame() - DMatrix::identity(self.charts[pc].dim(), self.charts[pc].dim())));
            if defect > 1e-12 {
                return Err(Error::CenterNotRecognized(format!("center basis not orthonormal ({defect:e})")));
            }
            if stage == 1 {
                self.check_linear_saturation(center)?;
            }
            let mut children = Vec::new();
            for j in 0..center.codim() {
                let chart = self.build_child(pc, center, j, stage, out.charts.len())?;
                children.push(chart.id);
                stage_charts.push(chart.id);
                out.charts.push(chart);
            }
            out.charts[pc].blown = Some(Blown { stage, center: ci, children });
        }
        out.stages.push(Stage { centers: centers.clone(), rho, charts: stage_charts });
        if stage > 1 {
            out.check_finite_saturation(stage)?;
        }
        Ok(out)
    }

    /// Group elements must preserve the center and hence its normal space.
    fn check_linear_saturation(&self, center: &BlowupCenter) -> Result<()> {
        let f = center.frame();
        let k = center.dim();
        let n = f.nrows();
        let mut worst = 0.0_f64;
        for g in self.action.group.sample_elements() {
            let gp = f.transpose() * g * &f;
            worst = worst.max(crate::linalg::max_abs(&gp.view((k, 0), (n - k, k)).into_owned()));
            worst = worst.max(crate::linalg::max_abs(&gp.view((0, k), (k, n - k)).into_owned()));
        }
        if worst > center.tolerance {
            return Err(Error::CenterNotSaturated { defect: worst });
        }
        Ok(())
    }

    /// Sampled points of each new center must be carried onto a center.
    fn check_finite_saturation(&self, stage: usize) -> Result<()> {
        let centers = &self.stages[stage - 1].centers;
        let elements: Vec<&DMatrix<f64>> = {
            let g = &self.action.group;
            let step = (g.haar_nodes.len() / 8).max(1);
            g.finite_elements.iter().chain(g.haar_nodes.iter().step_by(step).map(|h| &h.matrix)).collect()
        };
        let mut worst = 0.0_f64;
        for center in centers {
            let pc = center.chart;
            let hw = &self.charts[pc].half_widths;
            for probe in [0.0, 0.31, -0.57] {
                let a: Vec<f64> = (0..center.dim()).map(|q| probe * (1.0 + 0.1 * q as f64)).collect();
                let y = &center.basis * DVector::from_column_slice(&a);
                if y.iter().zip(hw).any(|(v, h)| v.abs() > *h) {
                    continue;
                }
                for g in &elements {
                    let (c2, y2) = self.act_at_level(g, pc, y.as_slice(), stage - 1)?;
                    let defect = match centers.iter().find(|c| c.chart == c2) {
                        Some(c) => (c.normal.transpose() * DVector::from_column_slice(&y2)).amax(),
                        None => f64::INFINITY,
                    };
                    worst = worst.max(defect);
                }
            }
        }
        if worst > 1e-9 {
            return Err(Error::CenterNotSaturated { defect: worst });
        }
        Ok(())
    }

    fn build_child(&self, pc: usize, center: &BlowupCenter, j: usize, stage: usize, id: usize) -> Result<Chart> {
        let parent = &self.charts[pc];
        let d = parent.dim();
        let k = center.dim();
        let m = center.codim();
        let frame = center.frame();

        let normal_name = column_name(&parent.coord_names, &center.normal, j, format!("n{}", j + 1));
        let name = if stage == 1 { format!("{normal_name}-normal") } else { format!("{}/{normal_name}-normal", parent.name) };
        let (tau_name, u_prefix) = match stage {
            1 => ("tau".to_string(), "u".to_string()),
            2 => ("t".to_string(), "v".to_string()),
            s => (format!("t{s}"), format!("v{s}_")),
        };
        let mut coord_names: Vec<String> =
            (0..k).map(|q| column_name(&parent.coord_names, &center.basis, q, format!("s{}", q + 1))).collect();
        coord_names.push(tau_name);
        coord_names.extend((1..m).map(|l| format!("{u_prefix}{l}")));

        let mut half_widths: Vec<f64> = (0..k).map(|q| column_half_width(&parent.half_widths, &center.basis, q)).collect();
        half_widths.push(column_half_width(&parent.half_widths, &center.normal, j));
        half_widths.extend(std::iter::repeat(1.0).take(m - 1));

        // z = (s, tau * w(u)) as polynomials in the child coordinates
        let var = |i: usize| Poly::var(d, i);
        let mut z: Vec<Poly> = (0..k).map(var).collect();
        let tau = var(k);
        let mut uvars = (k + 1..d).map(var);
        for l in 0..m {
            z.push(if l == j { tau.clone() } else { tau.mul(&uvars.next().unwrap()) });
        }
        let local: Vec<Poly> = (0..d)
            .map(|r| {
                let mut acc = Poly::zero(d);
                for (c, zc) in z.iter().enumerate() {
                    let f = frame[(r, c)];
                    if f != 0.0 {
                        acc = acc.add(&zc.scale(f));
                    }
                }
                acc
            })
            .collect();

        let mut fields = Vec::with_capacity(parent.fields.len());
        for pf in &parent.fields {
            let composed: Vec<Poly> = pf.iter().map(|p| p.compose(&local)).collect();
            // frame^T V
            let vz: Vec<Poly> = (0..d)
                .map(|c| {
                    let mut acc = Poly::zero(d);
                    for (r, comp) in composed.iter().enumerate() {
                        let f = frame[(r, c)];
                        if f != 0.0 {
                            acc = acc.add(&comp.scale(f));
                        }
                    }
                    acc
                })
                .collect();
            let mut lifted: Vec<Poly> = vz[..k].to_vec();
            let vt = vz[k + j].clone();
            lifted.push(vt.clone());
            let mut ui = k + 1;
            for l in 0..m {
                if l == j {
                    continue;
                }
                let numerator = vz[k + l].sub(&Poly::var(d, ui).mul(&vt));
                let (q, rem) = numerator.div_var(k);
                if rem > SATURATION_TOL * numerator.max_coeff().max(1.0) {
                    return Err(Error::CenterNotSaturated { defect: rem });
                }
                lifted.push(q);
                ui += 1;
            }
            fields.push(lifted);
        }
        let field_jac = jacobian_polys(&fields, d);
        Ok(Chart {
            id,
            name,
            stage,
            parent: Some(pc),
            coord_names,
            half_widths,
            frame,
            center_dim: k,
            normal_index: j,
            fields,
            field_jac,
            blown: None,
        })
    }
}

fn jacobian_polys(fields: &[Vec<Poly>], d: usize) -> Vec<Vec<Vec<Poly>>> {
    fields.iter().map(|f| f.iter().map(|p| (0..d).map(|c| p.deriv(c)).collect()).collect()).collect()
}

pub fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}
