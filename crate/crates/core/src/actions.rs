//! Compact groups acting orthogonally on R^n: validation, Haar quadrature and
//! the pointwise orbit/stabilizer linear algebra.
//!
//! A group is presented by coset representatives of its identity component
//! (`finite_elements`), a basis of the Lie algebra as skew matrices, and a
//! weighted node set approximating Haar measure. Orbit dimensions only see the
//! algebra; finite elements take part in orbits and averages.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::linalg;

pub const ORTHO_TOL: f64 = 1e-10;
pub const SKEW_TOL: f64 = 1e-10;
pub const WEIGHT_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// JSON description

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpec {
    pub ambient_dim: usize,
    pub group: GroupSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_elements: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub lie_algebra: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haar: Option<HaarSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HaarKind {
    Circle,
    Torus2,
    So3,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaarSpec {
    pub kind: HaarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NodesSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodesSpec {
    Count(usize),
    Explicit(Vec<ExplicitNode>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplicitNode {
    pub matrix: Vec<Vec<f64>>,
    pub weight: f64,
}

impl ActionSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Validated model

#[derive(Debug, Clone)]
pub struct HaarNode {
    pub matrix: DMatrix<f64>,
    pub weight: f64,
    /// Quadrature parameters (angles for continuous kinds), informational.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CompactGroupModel {
    pub dim: usize,
    pub finite_elements: Vec<DMatrix<f64>>,
    pub lie_algebra: Vec<DMatrix<f64>>,
    pub haar_nodes: Vec<HaarNode>,
    pub haar_kind: HaarKind,
}

/// Which closed forms the group admits for nerve-level checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupShape {
    Finite,
    Circle,
    Other,
}

fn to_matrix(rows: &[Vec<f64>], what: &str, idx: usize) -> std::result::Result<DMatrix<f64>, Violation> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Violation::Shape { detail: format!("{what} {idx} is not square") });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn ortho_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    linalg::max_abs(&(q.transpose() * q - DMatrix::identity(n, n)))
}

fn default_count(kind: HaarKind) -> usize {
    match kind {
        HaarKind::Circle => 64,
        HaarKind::Torus2 => 16,
        HaarKind::So3 => 8,
        HaarKind::Explicit => 0,
    }
}

/// Builds continuous quadrature nodes for the identity component.
fn continuous_nodes(kind: HaarKind, count: usize, algebra: &[DMatrix<f64>], n: usize) -> Vec<HaarNode> {
    let two_pi = 2.0 * PI;
    match kind {
        HaarKind::Circle => (0..count)
            .map(|q| {
                let th = two_pi * q as f64 / count as f64;
                HaarNode { matrix: linalg::expm(&(&algebra[0] * th)), weight: 1.0 / count as f64, params: vec![th] }
            })
            .collect(),
        HaarKind::Torus2 => {
            let mut out = Vec::with_capacity(count * count);
            for a in 0..count {
                for b in 0..count {
                    let t1 = two_pi * a as f64 / count as f64;
                    let t2 = two_pi * b as f64 / count as f64;
                    let m = linalg::expm(&(&algebra[0] * t1 + &algebra[1] * t2));
                    out.push(HaarNode { matrix: m, weight: 1.0 / (count * count) as f64, params: vec![t1, t2] });
                }
            }
            out
        }
        HaarKind::So3 => {
            // ZYZ Euler angles; Gauss-Legendre in cos(beta)
            let gl = linalg::gauss_legendre(count);
            let mut out = Vec::with_capacity(count * count * count);
            for a in 0..count {
                let alpha = two_pi * a as f64 / count as f64;
                let ra = linalg::expm(&(&algebra[2] * alpha));
                for &(x, w) in &gl {
                    let beta = x.acos();
                    let rb = linalg::expm(&(&algebra[1] * beta));
                    for c in 0..count {
                        let gamma = two_pi * c as f64 / count as f64;
                        let rc = linalg::expm(&(&algebra[2] * gamma));
                        out.push(HaarNode {
                            matrix: &ra * &rb * rc,
                            weight: w / 2.0 / (count * count) as f64,
                            params: vec![alpha, beta, gamma],
                        });
                    }
                }
            }
            out
        }
        HaarKind::Explicit => Vec::new(),
    }
    .into_iter()
    .filter(|_| n > 0)
    .collect()
}

/// Validates a raw group description, collecting every violated invariant.
pub fn validate_group(spec: &ActionSpec) -> Result<CompactGroupModel> {
    let n = spec.ambient_dim;
    let mut violations = Vec::new();
    let g = &spec.group;

    let mut finite = Vec::new();
    match &g.finite_elements {
        None => finite.push(DMatrix::identity(n, n)),
        Some(list) => {
            for (i, rows) in list.iter().enumerate() {
                match to_matrix(rows, "finite element", i) {
                    Ok(m) if m.nrows() != n => violations.push(Violation::Shape {
                        detail: format!("finite element {i} is {}x{}, expected {n}x{n}", m.nrows(), m.nrows()),
                    }),
                    Ok(m) => {
                        let d = ortho_defect(&m);
                        if d > ORTHO_TOL {
                            violations.push(Violation::NonOrthogonal { index: i, defect: d });
                        }
                        finite.push(m);
                    }
                    Err(v) => violations.push(v),
                }
            }
            let id = DMatrix::identity(n, n);
            if !finite.iter().any(|m| linalg::max_abs(&(m - &id)) <= ORTHO_TOL) {
                violations.push(Violation::MissingIdentity);
            }
        }
    }

    let mut algebra = Vec::new();
    for (i, rows) in g.lie_algebra.iter().enumerate() {
        match to_matrix(rows, "algebra element", i) {
            Ok(m) if m.nrows() != n => violations.push(Violation::Shape {
                detail: format!("algebra element {i} is {}x{}, expected {n}x{n}", m.nrows(), m.nrows()),
            }),
            Ok(m) => {
                let d = linalg::max_abs(&(&m + m.transpose()));
                if d > SKEW_TOL {
                    violations.push(Violation::NonSkew { index: i, defect: d });
                }
                algebra.push(m);
            }
            Err(v) => violations.push(v),
        }
    }

    let kind = match &g.haar {
        Some(h) => h.kind,
        None if algebra.is_empty() => HaarKind::Explicit,
        None => match algebra.len() {
            1 => HaarKind::Circle,
            2 => HaarKind::Torus2,
            3 => HaarKind::So3,
            d => {
                violations.push(Violation::BadWeights { detail: format!("no default quadrature for a {d}-dim algebra") });
                HaarKind::Explicit
            }
        },
    };
    let needed = match kind {
        HaarKind::Circle => 1,
        HaarKind::Torus2 => 2,
        HaarKind::So3 => 3,
        HaarKind::Explicit => 0,
    };
    if algebra.len() < needed {
        violations.push(Violation::BadWeights {
            detail: format!("{kind:?} quadrature needs {needed} algebra elements, found {}", algebra.len()),
        });
    }

    if !violations.is_empty() {
        return Err(Error::InvalidGroup(violations));
    }

    let nodes_spec = g.haar.as_ref().and_then(|h| h.nodes.clone());
    let haar_nodes: Vec<HaarNode> = match (kind, nodes_spec) {
        (HaarKind::Explicit, Some(NodesSpec::Explicit(list))) => {
            let mut out = Vec::new();
            for (i, node) in list.iter().enumerate() {
                match to_matrix(&node.matrix, "haar node", i) {
                    Ok(m) if m.nrows() == n && ortho_defect(&m) <= ORTHO_TOL => {
                        out.push(HaarNode { matrix: m, weight: node.weight, params: vec![i as f64] })
                    }
                    Ok(_) => violations.push(Violation::Shape { detail: format!("haar node {i} is not an orthogonal {n}x{n} matrix") }),
                    Err(v) => violations.push(v),
                }
            }
            out
        }
        (HaarKind::Explicit, _) => {
            // uniform over the finite elements
            let w = 1.0 / finite.len() as f64;
            finite.iter().enumerate().map(|(i, f)| HaarNode { matrix: f.clone(), weight: w, params: vec![i as f64] }).collect()
        }
        (k, spec) => {
            let count = match spec {
                Some(NodesSpec::Count(c)) => c,
                None => default_count(k),
                Some(NodesSpec::Explicit(_)) => {
                    violations.push(Violation::BadWeights { detail: "explicit node list requires kind \"explicit\"".into() });
                    0
                }
            };
            if count == 0 && violations.is_empty() {
                violations.push(Violation::BadWeights { detail: "node count must be positive".into() });
            }
            let base = continuous_nodes(k, count, &algebra, n);
            let fw = 1.0 / finite.len() as f64;
            let mut out = Vec::with_capacity(base.len() * finite.len());
            for f in &finite {
                for b in &base {
                    out.push(HaarNode { matrix: f * &b.matrix, weight: b.weight * fw, params: b.params.clone() });
                }
            }
            out
        }
    };

    if haar_nodes.iter().any(|h| !(h.weight > 0.0)) {
        violations.push(Violation::BadWeights { detail: "haar weights must be positive".into() });
    }
    let total: f64 = haar_nodes.iter().map(|h| h.weight).sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        violations.push(Violation::BadWeights { detail: format!("haar weights sum to {total}, expected 1") });
    }
    if !violations.is_empty() {
        return Err(Error::InvalidGroup(violations));
    }

    Ok(CompactGroupModel { dim: n, finite_elements: finite, lie_algebra: algebra, haar_nodes, haar_kind: kind })
}

impl CompactGroupModel {
    pub fn shape(&self) -> GroupShape {
        let n = self.dim;
        let only_identity = self.finite_elements.len() == 1
            && linalg::max_abs(&(&self.finite_elements[0] - DMatrix::identity(n, n))) <= ORTHO_TOL;
        match self.lie_algebra.len() {
            0 => GroupShape::Finite,
            1 if only_identity => GroupShape::Circle,
            _ => GroupShape::Other,
        }
    }

    /// `exp(sum_i c_i X_i)`.
    pub fn exp_algebra(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.dim, self.dim);
        for (c, xi) in coeffs.iter().zip(&self.lie_algebra) {
            x += xi * *c;
        }
        linalg::expm(&x)
    }

    /// Every group matrix the checks iterate over: finite elements then Haar nodes.
    pub fn sample_elements(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.finite_elements.iter().chain(self.haar_nodes.iter().map(|h| &h.matrix))
    }
}

// ---------------------------------------------------------------------------
// The action

#[derive(Debug, Clone)]
pub struct LinearOrthogonalAction {
    pub group: CompactGroupModel,
    pub ambient_dim: usize,
}

impl LinearOrthogonalAction {
    pub fn new(group: CompactGroupModel) -> Result<Self> {
        let n = group.dim;
        for m in group.sample_elements().chain(group.lie_algebra.iter()) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
            }
        }
        let action = LinearOrthogonalAction { ambient_dim: n, group };
        // norm preservation on a few fixed probe points
        for k in 0..4 {
            let x = DVector::from_fn(n, |i, _| ((i + 1) as f64 * (k as f64 + 0.37)).sin());
            for g in action.group.sample_elements() {
                let gx = g * &x;
                if (gx.norm() - x.norm()).abs() > 1e-10 * x.norm().max(1.0) {
                    return Err(Error::InvalidGroup(vec![Violation::Shape { detail: "action does not preserve the norm".into() }]));
                }
            }
        }
        Ok(action)
    }

    pub fn from_spec(spec: &ActionSpec) -> Result<Self> {
        Self::new(validate_group(spec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&ActionSpec::from_json(text)?)
    }

    pub fn dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn algebra_dim(&self) -> usize {
        self.group.lie_algebra.len()
    }

    /// Generator images `X_i x` as columns.
    pub fn generator_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let xv = DVector::from_column_slice(x);
        let cols: Vec<DVector<f64>> = self.group.lie_algebra.iter().map(|a| a * &xv).collect();
        linalg::hstack_vectors(&cols, self.ambient_dim)
    }

    pub fn infinitesimal(&self, x: &[f64]) -> Infinitesimal {
        Infinitesimal {
            point: x.to_vec(),
            values: self.generator_matrix(x),
            jacobians: self.group.lie_algebra.clone(),
        }
    }
}

/// `g . x` for an orthogonal matrix `g`.
pub fn act(g: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if g.ncols() != x.len() {
        return Err(Error::DimensionMismatch { expected: g.ncols(), got: x.len() });
    }
    Ok((g * DVector::from_column_slice(x)).as_slice().to_vec())
}

/// Infinitesimal action at one point: generator values and their Jacobians.
/// Works the same in base coordinates and in blow-up chart coordinates.
#[derive(Debug, Clone)]
pub struct Infinitesimal {
    pub point: Vec<f64>,
    /// `n x d`, column `i` is the i-th generator at the point.
    pub values: DMatrix<f64>,
    /// Jacobian of each generator vector field at the point.
    pub jacobians: Vec<DMatrix<f64>>,
}

impl Infinitesimal {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn orbit_tangent_basis(&self) -> Result<DMatrix<f64>> {
        linalg::range_basis(&self.values, &self.point)
    }

    pub fn orbit_dimension(&self) -> Result<usize> {
        linalg::rank_at(&self.values, &self.point)
    }

    /// Orthonormal basis, in algebra coordinates, of `{xi | xi . x = 0}`.
    pub fn stabilizer_subalgebra(&self) -> Result<DMatrix<f64>> {
        let d = self.values.ncols();
        if d == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        linalg::null_space(&self.values, &self.point)
    }

    /// `dim(L_x) + dim((N_x L_x)^{G_x°})`, computed as the dimension of
    /// `{v | (I - QQ^T) DV_xi v = 0 for all xi in the stabilizer}` where Q spans
    /// the orbit tangent. The orbit tangent always lies in that space.
    pub fn stratum_dimension(&self) -> Result<usize> {
        let n = self.dim();
        let q = self.orbit_tangent_basis()?;
        let stab = self.stabilizer_subalgebra()?;
        if stab.ncols() == 0 {
            return Ok(n);
        }
        let proj = DMatrix::identity(n, n) - &q * q.transpose();
        let blocks: Vec<DMatrix<f64>> = stab
            .column_iter()
            .map(|c| {
                let mut m = DMatrix::zeros(n, n);
                for (k, j) in self.jacobians.iter().enumerate() {
                    m += j * c[k];
                }
                &proj * m
            })
            .collect();
        let stacked = linalg::vstack(&blocks, n);
        Ok(linalg::null_space(&stacked, &self.point)?.ncols())
    }
}

pub fn orbit_tangent_basis(action: &LinearOrthogonalAction, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let b = action.infinitesimal(x).orbit_tangent_basis()?;
    Ok(b.column_iter().map(|c| c.as_slice().to_vec()).collect())
}

pub fn orbit_dimension(action: &LinearOrthogonalAction, x: &[f64]) -> Result<usize> {
    action.infinitesimal(x).orbit_dimension()
}

pub fn stabilizer_subalgebra(action: &LinearOrthogonalAction, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let b = action.infinitesimal(x).stabilizer_subalgebra()?;
    Ok(b.column_iter().map(|c| c.as_slice().to_vec()).collect())
}

pub fn stratum_dimension(action: &LinearOrthogonalAction, x: &[f64]) -> Result<usize> {
    action.infinitesimal(x).stratum_dimension()
}

/// Orthonormal basis (columns) of the common kernel of the algebra elements,
/// or of a subalgebra given in algebra coordinates. Canonical: coordinate
/// subspaces come back as standard basis vectors.
pub fn fixed_subspace(action: &LinearOrthogonalAction, restricted: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let n = action.ambient_dim;
    let algebra = &action.group.lie_algebra;
    let elements: Vec<DMatrix<f64>> = match restricted {
        None => algebra.clone(),
        Some(sub) => sub
            .column_iter()
            .map(|c| {
                let mut m = DMatrix::zeros(n, n);
                for (k, a) in algebra.iter().enumerate() {
                    m += a * c[k];
                }
                m
            })
            .collect(),
    };
    if elements.is_empty() {
        return Ok(DMatrix::identity(n, n));
    }
    let stacked = linalg::vstack(&elements, n);
    let ns = linalg::null_space(&stacked, &[])?;
    let p = &ns * ns.transpose();
    Ok(linalg::canonical_basis(&p, ns.ncols()))
}

/// Differential of `x -> g x` on the base: the matrix itself.
pub fn differential_on_base(g: &DMatrix<f64>) -> DMatrix<f64> {
    g.clone()
}

// ---------------------------------------------------------------------------
// Reference models used by the CLI examples and the tests.

pub mod models {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    pub fn circle_plane() -> ActionSpec {
        ActionSpec {
            ambient_dim: 2,
            group: GroupSpec {
                finite_elements: None,
                lie_algebra: vec![mat(&[&[0.0, -1.0], &[1.0, 0.0]])],
                haar: Some(HaarSpec { kind: HaarKind::Circle, nodes: Some(NodesSpec::Count(64)) }),
            },
        }
    }

    /// S^1 rotating R^3 about the z-axis.
    pub fn circle_about_z() -> ActionSpec {
        ActionSpec {
            ambient_dim: 3,
            group: GroupSpec {
                finite_elements: None,
                lie_algebra: vec![mat(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]])],
                haar: Some(HaarSpec { kind: HaarKind::Circle, nodes: Some(NodesSpec::Count(64)) }),
            },
        }
    }

    pub fn so3() -> ActionSpec {
        ActionSpec {
            ambient_dim: 3,
            group: GroupSpec {
                finite_elements: None,
                lie_algebra: vec![
                    mat(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, -1.0], &[0.0, 1.0, 0.0]]),
                    mat(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]]),
                    mat(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
                ],
                haar: Some(HaarSpec { kind: HaarKind::So3, nodes: Some(NodesSpec::Count(8)) }),
            },
        }
    }

    /// T^2 acting on R^4 = C^2 by independent rotations of the two planes.
    pub fn torus_r4() -> ActionSpec {
        let z = 0.0;
        ActionSpec {
            ambient_dim: 4,
            group: GroupSpec {
                finite_elements: None,
                lie_algebra: vec![
                    mat(&[&[z, -1.0, z, z], &[1.0, z, z, z], &[z, z, z, z], &[z, z, z, z]]),
                    mat(&[&[z, z, z, z], &[z, z, z, z], &[z, z, z, -1.0], &[z, z, 1.0, z]]),
                ],
                haar: Some(HaarSpec { kind: HaarKind::Torus2, nodes: Some(NodesSpec::Count(16)) }),
            },
        }
    }

    /// Z_2 acting on R by reflection.
    pub fn reflection_line() -> ActionSpec {
        ActionSpec {
            ambient_dim: 1,
            group: GroupSpec {
                finite_elements: Some(vec![vec![vec![1.0]], vec![vec![-1.0]]]),
                lie_algebra: vec![],
                haar: None,
            },
        }
    }

    /// S^1 on R^4 with weights (1, 2).
    pub fn weighted_circle_r4() -> ActionSpec {
        let z = 0.0;
        ActionSpec {
            ambient_dim: 4,
            group: GroupSpec {
                finite_elements: None,
                lie_algebra: vec![mat(&[&[z, -1.0, z, z], &[1.0, z, z, z], &[z, z, z, -2.0], &[z, z, 2.0, z]])],
                haar: Some(HaarSpec { kind: HaarKind::Circle, nodes: Some(NodesSpec::Count(64)) }),
            },
        }
    }

    pub fn build(spec: &ActionSpec) -> LinearOrthogonalAction {
        LinearOrthogonalAction::from_spec(spec).expect("reference model is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::models::*;
    use super::*;

    #[test]
    fn trivial_group_is_valid() {
        let spec = ActionSpec {
            ambient_dim: 2,
            group: GroupSpec {
                finite_elements: Some(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]),
                lie_algebra: vec![],
                haar: Some(HaarSpec {
                    kind: HaarKind::Explicit,
                    nodes: Some(NodesSpec::Explicit(vec![ExplicitNode { matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]], weight: 1.0 }])),
                }),
            },
        };
        let g = validate_group(&spec).unwrap();
        assert_eq!(g.haar_nodes.len(), 1);
        assert_eq!(g.shape(), GroupShape::Finite);
    }

    #[test]
    fn circle_with_64_nodes_is_valid() {
        let g = validate_group(&circle_plane()).unwrap();
        assert_eq!(g.haar_nodes.len(), 64);
        let total: f64 = g.haar_nodes.iter().map(|h| h.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(g.shape(), GroupShape::Circle);
    }

    #[test]
    fn symmetric_generator_is_rejected_as_non_skew() {
        let mut spec = circle_plane();
        spec.group.lie_algebra = vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]];
        match validate_group(&spec) {
            Err(Error::InvalidGroup(v)) => {
                assert!(v.iter().any(|x| matches!(x, Violation::NonSkew { index: 0, .. })))
            }
            other => panic!("expected NonSkew, got {other:?}"),
        }
    }

    #[test]
    fn missing_identity_and_non_orthogonal_are_named() {
        let mut spec = reflection_line();
        spec.group.finite_elements = Some(vec![vec![vec![-1.0]], vec![vec![2.0]]]);
        let Err(Error::InvalidGroup(v)) = validate_group(&spec) else { panic!() };
        assert!(v.contains(&Violation::MissingIdentity));
        assert!(v.iter().any(|x| matches!(x, Violation::NonOrthogonal { index: 1, .. })));
    }

    #[test]
    fn act_examples() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let y = act(&rot, &[1.0, 0.0]).unwrap();
        assert!((y[0]).abs() < 1e-15 && (y[1] - 1.0).abs() < 1e-15);
        let id = DMatrix::identity(3, 3);
        assert_eq!(act(&id, &[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let refl = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(act(&refl, &[1.0, 2.0]).unwrap(), vec![-1.0, 2.0]);
        assert!(matches!(act(&refl, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn orbit_data_for_circle_and_so3() {
        let s1 = build(&circle_plane());
        let t = orbit_tangent_basis(&s1, &[1.0, 0.0]).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t[0][0].abs() < 1e-14 && (t[0][1].abs() - 1.0).abs() < 1e-14);
        assert!(orbit_tangent_basis(&s1, &[0.0, 0.0]).unwrap().is_empty());
        assert_eq!(orbit_dimension(&s1, &[1.0, 0.0]).unwrap(), 1);
        assert_eq!(orbit_dimension(&s1, &[0.0, 0.0]).unwrap(), 0);

        let so3 = build(&so3());
        let t = orbit_tangent_basis(&so3, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.len(), 2);
        for v in &t {
            assert!(v[2].abs() < 1e-12);
        }
        assert_eq!(orbit_dimension(&so3, &[0.0, 0.0, 1.0]).unwrap(), 2);
    }

    #[test]
    fn stabilizers() {
        let s1 = build(&circle_about_z());
        assert_eq!(stabilizer_subalgebra(&s1, &[0.0, 0.0, 0.7]).unwrap().len(), 1);
        assert!(stabilizer_subalgebra(&s1, &[1.0, 0.0, 0.0]).unwrap().is_empty());
        let so3 = build(&so3());
        let st = stabilizer_subalgebra(&so3, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(st.len(), 1);
        // proportional to L_z, the third algebra coordinate
        assert!((st[0][2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_subspaces() {
        let fz = fixed_subspace(&build(&circle_about_z()), None).unwrap();
        assert_eq!(fz.ncols(), 1);
        assert_eq!(fz.column(0).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(fixed_subspace(&build(&so3()), None).unwrap().ncols(), 0);
        assert_eq!(fixed_subspace(&build(&weighted_circle_r4()), None).unwrap().ncols(), 0);
    }

    #[test]
    fn stratum_dimension_examples() {
        let s1 = build(&circle_about_z());
        assert_eq!(stratum_dimension(&s1, &[0.0, 0.0, 1.0]).unwrap(), 1);
        assert_eq!(stratum_dimension(&s1, &[1.0, 0.0, 0.0]).unwrap(), 3);
        assert_eq!(stratum_dimension(&build(&so3()), &[0.0, 0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn so3_quadrature_integrates_low_degree_exactly() {
        // average of (g e_z)_z^2 over SO(3) is 1/3
        let g = validate_group(&so3()).unwrap();
        let avg: f64 = g.haar_nodes.iter().map(|h| h.weight * h.matrix[(2, 2)].powi(2)).sum();
        assert!((avg - 1.0 / 3.0).abs() < 1e-12);
    }
}

