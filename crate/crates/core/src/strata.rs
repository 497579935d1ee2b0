//! Dimension stratification by pointwise rank scans over a grid.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actions::{fixed_subspace, LinearOrthogonalAction};
use crate::blowup::{BlowupCenter, BlownUpManifold, ChartPoint};
use crate::error::{Error, Result};
use crate::par;

/// Coordinates at most this far from zero count as zero when fitting centers.
pub const ZERO_TOL: f64 = 1e-7;
/// Required sample fraction of the open dense stratum.
pub const DENSITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct Sample {
    pub chart: usize,
    pub point: Vec<f64>,
    /// Integer grid index; empty for random samples.
    pub index: Vec<i32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub radius: f64,
    pub resolution: usize,
    pub points_per_axis: usize,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stratum {
    pub leaf_codim: usize,
    pub component_id: usize,
    pub estimated_dim: usize,
    #[serde(skip)]
    pub witness_points: Vec<ChartPoint>,
    pub witness_count: usize,
    pub is_most_singular: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stratification {
    pub strata: Vec<Stratum>,
    pub grid_spec: GridSpec,
    pub min_codim: usize,
    pub max_codim: usize,
    pub dense_fraction: f64,
    pub ambient_dim: usize,
    #[serde(skip)]
    pub samples: Vec<Sample>,
    #[serde(skip)]
    pub codims: Vec<usize>,
    #[serde(skip)]
    pub components: Vec<usize>,
}

impl Stratification {
    pub fn is_regular(&self) -> bool {
        self.min_codim == self.max_codim
    }

    pub fn codim_classes(&self) -> BTreeSet<usize> {
        self.codims.iter().copied().collect()
    }
}

fn axis_values(half_width: f64, resolution: usize) -> Vec<f64> {
    let half = (resolution / 2).max(1) as i32;
    let h = half_width / half as f64;
    (-half..=half).map(|k| k as f64 * h).collect()
}

fn cartesian(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in counts {
        let mut next = Vec::with_capacity(out.len() * c);
        for prefix in &out {
            for i in 0..c {
                let mut v = prefix.clone();
                v.push(i);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Grid samples over the atlas. Each axis gets `2 * (resolution / 2) + 1`
/// points so that zero is always a grid value. Base samples are restricted to
/// the ball; chart samples fill their coordinate boxes.
pub fn grid_samples(m: &BlownUpManifold, resolution: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    for c in m.leaf_charts() {
        let chart = m.chart(c);
        let axes: Vec<Vec<f64>> = chart.half_widths.iter().map(|&w| axis_values(w, resolution)).collect();
        let half = (resolution / 2).max(1) as i32;
        for idx in cartesian(&axes.iter().map(|a| a.len()).collect::<Vec<_>>()) {
            let point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            if chart.stage == 0 && point.iter().map(|v| v * v).sum::<f64>().sqrt() > m.radius * (1.0 + 1e-12) {
                continue;
            }
            out.push(Sample { chart: c, point, index: idx.iter().map(|&i| i as i32 - half).collect() });
        }
    }
    out
}

/// Uniform random samples: in the ball for the base, in the chart boxes
/// (round-robin over leaf charts) otherwise.
pub fn random_samples(m: &BlownUpManifold, count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = m.leaf_charts();
    (0..count)
        .map(|i| {
            let c = leaves[i % leaves.len()];
            let chart = m.chart(c);
            let point = loop {
                let p: Vec<f64> = chart.half_widths.iter().map(|&w| rng.gen_range(-w..=w)).collect();
                if chart.stage > 0 || p.iter().map(|v| v * v).sum::<f64>().sqrt() <= m.radius {
                    break p;
                }
            };
            Sample { chart: c, point, index: Vec::new() }
        })
        .collect()
}

/// Integer offsets with squared length at most 4: the neighbourhood of radius
/// twice the grid spacing.
fn offsets(d: usize) -> Vec<Vec<i32>> {
    cartesian(&vec![5; d])
        .into_iter()
        .map(|v| v.into_iter().map(|i| i as i32 - 2).collect::<Vec<i32>>())
        .filter(|v| {
            let n2: i32 = v.iter().map(|x| x * x).sum();
            n2 > 0 && n2 <= 4
        })
        .collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Adjacent sample pairs `(i, j)`, `i < j`, within the same chart.
fn neighbour_pairs(samples: &[Sample]) -> Vec<(usize, usize)> {
    let lookup: HashMap<(usize, &[i32]), usize> =
        samples.iter().enumerate().map(|(i, s)| ((s.chart, s.index.as_slice()), i)).collect();
    let mut offs_by_dim: HashMap<usize, Vec<Vec<i32>>> = HashMap::new();
    let mut pairs = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let offs = offs_by_dim.entry(s.index.len()).or_insert_with(|| offsets(s.index.len()));
        for o in offs.iter() {
            let key: Vec<i32> = s.index.iter().zip(o).map(|(a, b)| a + b).collect();
            if let Some(&j) = lookup.get(&(s.chart, key.as_slice())) {
                if j > i {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs
}

/// Stratifies the base ball of radius `radius`.
pub fn stratify(action: &LinearOrthogonalAction, radius: f64, resolution: usize) -> Result<Stratification> {
    if !(radius > 0.0) {
        return Err(Error::Parse(format!("region radius must be positive, got {radius}")));
    }
    stratify_manifold(&BlownUpManifold::base(action, radius), resolution)
}

/// Stratifies the current atlas of a (possibly blown-up) manifold. Components
/// of blown-up stages are computed chart by chart.
pub fn stratify_manifold(m: &BlownUpManifold, resolution: usize) -> Result<Stratification> {
    let samples = grid_samples(m, resolution);
    let dims = par::try_map(&samples, |s| m.orbit_dimension(s.chart, &s.point))?;
    let codims: Vec<usize> = samples.iter().zip(&dims).map(|(s, d)| m.chart(s.chart).dim() - d).collect();

    let mut uf = UnionFind((0..samples.len()).collect());
    for (i, j) in neighbour_pairs(&samples) {
        if codims[i] == codims[j] {
            uf.union(i, j);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..samples.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let witness_key = |i: usize| (samples[i].chart, samples[i].index.clone());
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    for c in comps.iter_mut() {
        c.sort_by_key(|&i| witness_key(i));
    }
    comps.sort_by_key(|c| (codims[c[0]], witness_key(c[0])));

    let min_codim = codims.iter().copied().min().unwrap_or(0);
    let max_codim = codims.iter().copied().max().unwrap_or(0);
    let est = par::try_map(&comps, |c| {
        let s = &samples[c[0]];
        m.infinitesimal(s.chart, &s.point).stratum_dimension()
    })?;

    let mut components = vec![0; samples.len()];
    let strata: Vec<Stratum> = comps
        .iter()
        .zip(est)
        .enumerate()
        .map(|(id, (c, estimated_dim))| {
            for &i in c {
                components[i] = id;
            }
            Stratum {
                leaf_codim: codims[c[0]],
                component_id: id,
                estimated_dim,
                witness_points: c.iter().map(|&i| ChartPoint { chart: samples[i].chart, point: samples[i].point.clone() }).collect(),
                witness_count: c.len(),
                is_most_singular: codims[c[0]] == max_codim && max_codim > min_codim,
            }
        })
        .collect();
    let dense = strata.iter().filter(|s| s.leaf_codim == min_codim).map(|s| s.witness_count).max().unwrap_or(0);
    let points_per_axis = 2 * (resolution / 2).max(1) + 1;
    Ok(Stratification {
        grid_spec: GridSpec { radius: m.radius, resolution, points_per_axis, sample_count: samples.len() },
        dense_fraction: if samples.is_empty() { 0.0 } else { dense as f64 / samples.len() as f64 },
        ambient_dim: m.dim(),
        strata,
        min_codim,
        max_codim,
        samples,
        codims,
        components,
    })
}

pub fn stratum_dimension(action: &LinearOrthogonalAction, x: &[f64]) -> Result<usize> {
    crate::actions::stratum_dimension(action, x)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierViolation {
    pub component: usize,
    pub neighbour: usize,
    pub codims: (usize, usize),
    pub dims: (usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierReport {
    pub pass: bool,
    pub adjacent_pairs: usize,
    pub violations: Vec<FrontierViolation>,
}

/// For every pair of adjacent components the one of larger codimension must
/// have strictly smaller dimension (it lies in the closure of the other).
pub fn check_frontier(strat: &Stratification) -> FrontierReport {
    let mut adjacent = BTreeSet::new();
    for (i, j) in neighbour_pairs(&strat.samples) {
        let (a, b) = (strat.components[i], strat.components[j]);
        if a != b {
            adjacent.insert((a.min(b), a.max(b)));
        }
    }
    let mut violations = Vec::new();
    for &(a, b) in &adjacent {
        let (sa, sb) = (&strat.strata[a], &strat.strata[b]);
        let (lo, hi) = if sa.leaf_codim <= sb.leaf_codim { (sa, sb) } else { (sb, sa) };
        if lo.leaf_codim == hi.leaf_codim || hi.estimated_dim >= lo.estimated_dim {
            violations.push(FrontierViolation {
                component: lo.component_id,
                neighbour: hi.component_id,
                codims: (lo.leaf_codim, hi.leaf_codim),
                dims: (lo.estimated_dim, hi.estimated_dim),
            });
        }
    }
    FrontierReport { pass: violations.is_empty(), adjacent_pairs: adjacent.len(), violations }
}

#[derive(Debug, Clone, Serialize)]
pub struct CodimOneReport {
    pub pass: bool,
    pub offending: Vec<usize>,
}

/// Every non-open stratum has dimension below `n - 1`.
pub fn check_no_codim_one(strat: &Stratification) -> CodimOneReport {
    let n = strat.ambient_dim;
    let offending: Vec<usize> = strat
        .strata
        .iter()
        .filter(|s| s.leaf_codim > strat.min_codim && s.estimated_dim + 1 >= n)
        .map(|s| s.component_id)
        .collect();
    CodimOneReport { pass: offending.is_empty(), offending }
}

/// Center of the next blow-up. On the base this is the fixed subspace of the
/// identity component; on a blown-up atlas the maximal-codimension samples of
/// each chart must fill a single coordinate subspace.
pub fn most_singular_stratum(m: &BlownUpManifold, strat: &Stratification) -> Result<Vec<BlowupCenter>> {
    if strat.is_regular() {
        return Err(Error::CenterNotRecognized("the action is already regular".into()));
    }
    if m.stages.is_empty() {
        let basis = fixed_subspace(&m.action, None)?;
        return Ok(vec![BlowupCenter::new(0, basis)]);
    }
    let zeros = |p: &[f64]| -> BTreeSet<usize> { (0..p.len()).filter(|&i| p[i].abs() <= ZERO_TOL).collect() };
    let mut by_chart: BTreeMap<usize, Vec<BTreeSet<usize>>> = BTreeMap::new();
    for (s, &cd) in strat.samples.iter().zip(&strat.codims) {
        if cd == strat.max_codim {
            by_chart.entry(s.chart).or_default().push(zeros(&s.point));
        }
    }
    let mut centers = Vec::new();
    for (chart, patterns) in by_chart {
        let minimal: BTreeSet<&BTreeSet<usize>> =
            patterns.iter().filter(|p| !patterns.iter().any(|q| q != *p && q.is_subset(p))).collect();
        let name = &m.chart(chart).name;
        if minimal.len() != 1 {
            return Err(Error::CenterNotRecognized(format!(
                "chart {name}: maximal-codimension samples do not fit one coordinate subspace ({} candidates)",
                minimal.len()
            )));
        }
        let z: Vec<usize> = minimal.into_iter().next().unwrap().iter().copied().collect();
        let bad = strat
            .samples
            .iter()
            .zip(&strat.codims)
            .filter(|(s, _)| s.chart == chart && z.iter().all(|&i| s.point[i].abs() <= ZERO_TOL))
            .filter(|(_, &cd)| cd != strat.max_codim)
            .count();
        if bad > 0 || z.len() < 2 {
            return Err(Error::CenterNotRecognized(format!(
                "chart {name}: coordinate subspace {z:?} is not uniformly of maximal codimension ({bad} misfits)"
            )));
        }
        centers.push(BlowupCenter::coordinate(chart, m.chart(chart).dim(), &z));
    }
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::models::*;

    #[test]
    fn circle_about_z_has_axis_and_open_stratum() {
        let a = build(&circle_about_z());
        let s = stratify(&a, 1.0, 10).unwrap();
        assert_eq!(s.codim_classes().into_iter().collect::<Vec<_>>(), vec![2, 3]);
        let axis: Vec<&Stratum> = s.strata.iter().filter(|c| c.leaf_codim == 3).collect();
        assert_eq!(axis.len(), 1);
        assert_eq!(axis[0].estimated_dim, 1);
        assert!(axis[0].witness_points.iter().all(|w| w.point[0] == 0.0 && w.point[1] == 0.0));
        let open: Vec<&Stratum> = s.strata.iter().filter(|c| c.leaf_codim == 2).collect();
        assert_eq!(open.len(), 1);
        assert_eq!(open[0].estimated_dim, 3);
        assert!(s.dense_fraction > DENSITY_THRESHOLD);
        assert!(check_frontier(&s).pass);
        assert!(check_no_codim_one(&s).pass);
    }

    #[test]
    fn reflection_is_a_single_stratum() {
        let s = stratify(&build(&reflection_line()), 1.0, 16).unwrap();
        assert_eq!(s.strata.len(), 1);
        assert_eq!(s.strata[0].leaf_codim, 1);
        assert_eq!(s.strata[0].estimated_dim, 1);
        assert!(check_frontier(&s).pass && check_no_codim_one(&s).pass);
    }

    #[test]
    fn weighted_circle_isolates_the_origin() {
        let s = stratify(&build(&weighted_circle_r4()), 1.0, 6).unwrap();
        let top: Vec<&Stratum> = s.strata.iter().filter(|c| c.leaf_codim == 4).collect();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].witness_count, 1);
        assert!(top[0].witness_points[0].point.iter().all(|&v| v == 0.0));
        assert_eq!(s.codim_classes().into_iter().collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn torus_chain_of_strata() {
        let s = stratify(&build(&torus_r4()), 1.0, 6).unwrap();
        assert_eq!(s.codim_classes().into_iter().collect::<Vec<_>>(), vec![2, 3, 4]);
        // the two coordinate planes come within two grid spacings of each
        // other next to the origin, so the clustering may join them
        let planes: Vec<&Stratum> = s.strata.iter().filter(|c| c.leaf_codim == 3).collect();
        assert!(!planes.is_empty());
        assert!(planes.iter().all(|p| p.estimated_dim == 2));
        let f = check_frontier(&s);
        assert!(f.pass, "{:?}", f.violations);
    }

    #[test]
    fn grid_always_contains_zero() {
        let m = BlownUpManifold::base(&build(&circle_plane()), 1.0);
        for r in [2, 3, 16, 21] {
            assert!(grid_samples(&m, r).iter().any(|s| s.point.iter().all(|&v| v == 0.0)));
        }
    }
}
