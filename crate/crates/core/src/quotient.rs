//! Sampled orbit spaces with the chain metric, and Gromov-Hausdorff bounds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{GroupShape, LinearOrthogonalAction};
use crate::blowup::{desingularize, BlownUpManifold, DesingularizeOptions};
use crate::error::{Error, Result};
use crate::metrics::{base_blowup_metric, Field, MetricField};
use crate::par;

pub const SEGMENT_TOL: f64 = 1e-4;
pub const DEFAULT_NEIGHBORS: usize = 8;
const MAX_DEPTH: usize = 14;
const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OrbitLabel {
    pub stage: usize,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    pub labels: Vec<OrbitLabel>,
    pub distances: Vec<Vec<f64>>,
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<OrbitLabel>, distances: Vec<Vec<f64>>) -> Self {
        FiniteMetricSpace { labels, distances }
    }

    /// Unlabelled space from a distance matrix.
    pub fn from_distances(distances: Vec<Vec<f64>>) -> Self {
        let labels = (0..distances.len()).map(|i| OrbitLabel { stage: 0, point: vec![i as f64] }).collect();
        FiniteMetricSpace { labels, distances }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j]
    }

    pub fn diameter(&self) -> f64 {
        self.distances.iter().flatten().cloned().fold(0.0, f64::max)
    }

    pub fn eccentricities(&self) -> Vec<f64> {
        self.distances.iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).collect()
    }
}

/// Field length of the straight segment `a -> b`: midpoint rule, bisected
/// until the two halves agree with the whole to `SEGMENT_TOL`.
pub fn segment_length(field: &dyn MetricField, a: &[f64], b: &[f64]) -> Result<f64> {
    fn mid_len(field: &dyn MetricField, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let d = b - a;
        let m = (a + b) * 0.5;
        let g = field.eval(0, m.as_slice())?;
        Ok((d.transpose() * g * &d)[0].max(0.0).sqrt())
    }
    fn rec(field: &dyn MetricField, a: &DVector<f64>, b: &DVector<f64>, whole: f64, depth: usize) -> Result<f64> {
        let m = (a + b) * 0.5;
        let left = mid_len(field, a, &m)?;
        let right = mid_len(field, &m, b)?;
        if depth >= MAX_DEPTH || (left + right - whole).abs() <= SEGMENT_TOL {
            return Ok(left + right);
        }
        Ok(rec(field, a, &m, left, depth + 1)? + rec(field, &m, b, right, depth + 1)?)
    }
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    if (&b - &a).norm() == 0.0 {
        return Ok(0.0);
    }
    let whole = mid_len(field, &a, &b)?;
    rec(field, &a, &b, whole, 0)
}

fn length_or_inf(field: &dyn MetricField, a: &[f64], b: &[f64]) -> f64 {
    segment_length(field, a, b).unwrap_or(f64::INFINITY)
}

fn group_elements(action: &LinearOrthogonalAction) -> Vec<(DMatrix<f64>, Option<f64>)> {
    let g = &action.group;
    let circle = g.shape() == GroupShape::Circle;
    let mut out: Vec<(DMatrix<f64>, Option<f64>)> = g.finite_elements.iter().map(|m| (m.clone(), None)).collect();
    out.extend(g.haar_nodes.iter().map(|h| (h.matrix.clone(), if circle { h.params.first().copied() } else { None })));
    out
}

/// Distance estimate from `x` to the orbit of `y` for a field on the base.
pub fn point_orbit_distance(action: &LinearOrthogonalAction, field: &dyn MetricField, x: &[f64], y: &[f64]) -> Result<f64> {
    let elems = group_elements(action);
    Ok(orbit_distance_with(action, field, x, y, &elems))
}

fn orbit_distance_with(
    action: &LinearOrthogonalAction,
    field: &dyn MetricField,
    x: &[f64],
    y: &[f64],
    elems: &[(DMatrix<f64>, Option<f64>)],
) -> f64 {
    let yv = DVector::from_column_slice(y);
    let image = |g: &DMatrix<f64>| (g * &yv).as_slice().to_vec();
    let mut rough: Vec<(f64, usize)> = elems
        .iter()
        .enumerate()
        .map(|(i, (g, _))| {
            let gy = image(g);
            let d = DVector::from_column_slice(&gy) - DVector::from_column_slice(x);
            let m: Vec<f64> = x.iter().zip(&gy).map(|(a, b)| 0.5 * (a + b)).collect();
            let len = field.eval(0, &m).map(|g| (d.transpose() * g * &d)[0].max(0.0).sqrt()).unwrap_or(f64::INFINITY);
            (len, i)
        })
        .collect();
    rough.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = f64::INFINITY;
    let mut best_param = None;
    for &(_, i) in rough.iter().take(2) {
        let len = length_or_inf(field, x, &image(&elems[i].0));
        if len < best {
            best = len;
            best_param = elems[i].1;
        }
    }
    if let Some(theta) = best_param {
        let step = std::f64::consts::TAU / action.group.haar_nodes.len().max(1) as f64;
        let f = |t: f64| length_or_inf(field, x, &image(&action.group.exp_algebra(&[t])));
        let (mut lo, mut hi) = (theta - step, theta + step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        let (mut fc, mut fd) = (f(c), f(d));
        while hi - lo > 1e-7 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = f(d);
            }
        }
        best = best.min(fc).min(fd);
    }
    best
}

/// `min_g |x - g y|`, the Euclidean orbit distance used to pick neighbours.
fn proxy_distance(x: &DVector<f64>, y: &DVector<f64>, elems: &[DMatrix<f64>]) -> f64 {
    elems.iter().map(|g| (x - g * y).norm()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct SamplingOptions {
    pub radius: f64,
    pub samples: usize,
    pub neighbors: usize,
    pub seed: u64,
    /// Points placed first, in this order.
    pub anchors: Vec<Vec<f64>>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { radius: 1.0, samples: 200, neighbors: DEFAULT_NEIGHBORS, seed: 0, anchors: Vec::new() }
    }
}

/// Orbit representatives spread out by farthest-point sampling in the
/// Euclidean orbit distance, from a random pool in the ball.
pub fn orbit_representatives(action: &LinearOrthogonalAction, opts: &SamplingOptions) -> Vec<Vec<f64>> {
    let n = action.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pool_size = 20 * opts.samples.max(1);
    let mut pool: Vec<DVector<f64>> = Vec::with_capacity(pool_size);
    while pool.len() < pool_size {
        let p = DVector::from_fn(n, |_, _| rng.gen_range(-opts.radius..=opts.radius));
        if p.norm() <= opts.radius {
            pool.push(p);
        }
    }
    let elems = proxy_elements(action);
    let mut chosen: Vec<DVector<f64>> = opts.anchors.iter().map(|a| DVector::from_column_slice(a)).collect();
    if chosen.is_empty() {
        chosen.push(pool[0].clone());
    }
    let mut nearest = vec![f64::INFINITY; pool.len()];
    let mut seen = 0;
    while chosen.len() < opts.samples.max(opts.anchors.len()) {
        for c in &chosen[seen..] {
            let d = par::map(&pool, |p| proxy_distance(p, c, &elems));
            for (a, b) in nearest.iter_mut().zip(d) {
                *a = a.min(b);
            }
        }
        seen = chosen.len();
        let (idx, _) = nearest.iter().enumerate().fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        chosen.push(pool[idx].clone());
    }
    chosen.into_iter().map(|v| v.as_slice().to_vec()).collect()
}

fn proxy_elements(action: &LinearOrthogonalAction) -> Vec<DMatrix<f64>> {
    let g = &action.group;
    let step = (g.haar_nodes.len() / 32).max(1);
    g.finite_elements.iter().cloned().chain(g.haar_nodes.iter().step_by(step).map(|h| h.matrix.clone())).collect()
}

/// Chain metric on the orbits through `points`: field orbit distances on a
/// symmetric k-nearest-neighbour graph, closed under shortest paths.
pub fn orbit_space_on(
    action: &LinearOrthogonalAction,
    field: &dyn MetricField,
    points: &[Vec<f64>],
    neighbors: usize,
    stage: usize,
) -> Result<FiniteMetricSpace> {
    let n = points.len();
    let pts: Vec<DVector<f64>> = points.iter().map(|p| DVector::from_column_slice(p)).collect();
    let proxy_elems = proxy_elements(action);
    let elems = group_elements(action);
    let candidates = 2 * neighbors;
    let cand: Vec<Vec<usize>> = par::map_range(n, |i| {
        let mut d: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (proxy_distance(&pts[i], &pts[j], &proxy_elems), j)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(candidates).map(|x| x.1).collect()
    });
    let weighted: Vec<Vec<(f64, usize)>> = par::map_range(n, |i| {
        let mut d: Vec<(f64, usize)> =
            cand[i].iter().map(|&j| (orbit_distance_with(action, field, points[i].as_slice(), points[j].as_slice(), &elems), j)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(neighbors);
        d
    });
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in weighted.iter().enumerate() {
        for &(w, j) in row {
            if w.is_finite() {
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
    }
    for row in adj.iter_mut() {
        row.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        row.dedup_by(|a, b| a.0 == b.0 && {
            b.1 = b.1.min(a.1);
            true
        });
    }
    let distances = par::map_range(n, |s| dijkstra(&adj, s));
    let unreachable = distances[0].iter().filter(|d| !d.is_finite()).count();
    if unreachable > 0 {
        return Err(Error::GraphDisconnected { components: count_components(&adj) });
    }
    let distances: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { distances[i][j].min(distances[j][i]) }).collect()).collect();
    let labels = points.iter().map(|p| OrbitLabel { stage, point: p.clone() }).collect();
    Ok(FiniteMetricSpace { labels, distances })
}

fn dijkstra(adj: &[Vec<(usize, f64)>], s: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, s)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let du = f64::from_bits(bits);
        if du > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = du + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    dist
}

fn count_components(adj: &[Vec<(usize, f64)>]) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut count = 0;
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// Samples the orbit space of the base with the given field.
pub fn sample_orbit_space(action: &LinearOrthogonalAction, field: &dyn MetricField, opts: &SamplingOptions) -> Result<FiniteMetricSpace> {
    let points = orbit_representatives(action, opts);
    orbit_space_on(action, field, &points, opts.neighbors, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GhMode {
    Exact,
    Bounds,
}

#[derive(Debug, Clone, Serialize)]
pub struct GhInterval {
    pub lower: f64,
    pub upper: f64,
    pub mode: GhMode,
}

/// Distortion of the correspondence given by pairs `(a, b)`.
pub fn distortion(a: &FiniteMetricSpace, b: &FiniteMetricSpace, pairs: &[(usize, usize)]) -> f64 {
    let rows = par::map(pairs, |&(i, j)| pairs.iter().map(|&(k, l)| (a.d(i, k) - b.d(j, l)).abs()).fold(0.0, f64::max));
    rows.into_iter().fold(0.0, f64::max)
}

fn is_correspondence(na: usize, nb: usize, pairs: &[(usize, usize)]) -> bool {
    let mut ca = vec![false; na];
    let mut cb = vec![false; nb];
    for &(i, j) in pairs {
        if i >= na || j >= nb {
            return false;
        }
        ca[i] = true;
        cb[j] = true;
    }
    ca.into_iter().all(|x| x) && cb.into_iter().all(|x| x)
}

pub fn lower_bound(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> f64 {
    let (ea, eb) = (a.eccentricities(), b.eccentricities());
    let dir = |x: &[f64], y: &[f64]| {
        x.iter().map(|p| y.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    let hausdorff = dir(&ea, &eb).max(dir(&eb, &ea));
    0.5 * (a.diameter() - b.diameter()).abs().max(hausdorff)
}

/// Greedy correspondence by eccentricity, improved by single-pair moves.
fn greedy_upper(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> (f64, Vec<(usize, usize)>) {
    let (ea, eb) = (a.eccentricities(), b.eccentricities());
    let mut pairs_so_far: Vec<(usize, usize)> = Vec::new();
    let mut pick = |i: Option<usize>, j: Option<usize>| -> usize {
        let options: Vec<(usize, usize)> = match (i, j) {
            (Some(i), _) => (0..b.len()).map(|j| (i, j)).collect(),
            (_, Some(j)) => (0..a.len()).map(|i| (i, j)).collect(),
            _ => unreachable!(),
        };
        let scored = par::map(&options, |&(i, j)| {
            let own = pairs_so_far.iter().map(|&(k, l)| (a.d(i, k) - b.d(j, l)).abs()).fold(0.0, f64::max);
            (own, (ea[i] - eb[j]).abs())
        });
        let mut best = 0;
        for (k, sc) in scored.iter().enumerate() {
            if sc.0 < scored[best].0 || (sc.0 == scored[best].0 && sc.1 < scored[best].1) {
                best = k;
            }
        }
        pairs_so_far.push(options[best]);
        if i.is_some() {
            options[best].1
        } else {
            options[best].0
        }
    };
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&x, &y| ea[y].total_cmp(&ea[x]).then(x.cmp(&y)));
    let mut f = vec![0; a.len()];
    for i in order {
        f[i] = pick(Some(i), None);
    }
    let mut g = vec![0; b.len()];
    for j in 0..b.len() {
        g[j] = pick(None, Some(j));
    }
    let pairs = |f: &[usize], g: &[usize]| -> Vec<(usize, usize)> {
        f.iter().enumerate().map(|(i, &j)| (i, j)).chain(g.iter().enumerate().map(|(j, &i)| (i, j))).collect()
    };
    let mut best = distortion(a, b, &pairs(&f, &g));
    for _ in 0..4 {
        let mut improved = false;
        for i in 0..f.len() {
            let others: Vec<(usize, usize)> = pairs(&f, &g).into_iter().enumerate().filter(|&(k, _)| k != i).map(|(_, p)| p).collect();
            let base = distortion(a, b, &others);
            if base >= best {
                continue;
            }
            let (mut bj, mut bc) = (f[i], best);
            for j in 0..b.len() {
                let own = others.iter().map(|&(k, l)| (a.d(i, k) - b.d(j, l)).abs()).fold(0.0, f64::max);
                let c = own.max(base);
                if c < bc {
                    bc = c;
                    bj = j;
                }
            }
            if bc < best {
                f[i] = bj;
                best = bc;
                improved = true;
            }
        }
        for j in 0..g.len() {
            let skip = f.len() + j;
            let others: Vec<(usize, usize)> = pairs(&f, &g).into_iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, p)| p).collect();
            let base = distortion(a, b, &others);
            if base >= best {
                continue;
            }
            let (mut bi, mut bc) = (g[j], best);
            for i in 0..a.len() {
                let own = others.iter().map(|&(k, l)| (a.d(i, k) - b.d(j, l)).abs()).fold(0.0, f64::max);
                let c = own.max(base);
                if c < bc {
                    bc = c;
                    bi = i;
                }
            }
            if bc < best {
                g[j] = bi;
                best = bc;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (best, pairs(&f, &g))
}

/// Exact distortion minimum over correspondences `graph(f) + graph(g)^T`
/// by branch and bound.
fn exact_distortion(a: &FiniteMetricSpace, b: &FiniteMetricSpace, start: f64) -> f64 {
    struct Search<'a> {
        a: &'a FiniteMetricSpace,
        b: &'a FiniteMetricSpace,
        best: f64,
        pairs: Vec<(usize, usize)>,
    }
    impl Search<'_> {
        fn go(&mut self, step: usize, current: f64) {
            if current >= self.best {
                return;
            }
            let (na, nb) = (self.a.len(), self.b.len());
            if step == na + nb {
                self.best = current;
                return;
            }
            let options: Vec<(usize, usize)> =
                if step < na { (0..nb).map(|j| (step, j)).collect() } else { (0..na).map(|i| (i, step - na)).collect() };
            let mut scored: Vec<(f64, (usize, usize))> = options
                .into_iter()
                .map(|(i, j)| {
                    let own = self.pairs.iter().map(|&(k, l)| (self.a.d(i, k) - self.b.d(j, l)).abs()).fold(0.0, f64::max);
                    (own.max(current), (i, j))
                })
                .collect();
            scored.sort_by(|x, y| x.0.total_cmp(&y.0));
            for (c, p) in scored {
                self.pairs.push(p);
                self.go(step + 1, c);
                self.pairs.pop();
            }
        }
    }
    let mut s = Search { a, b, best: start + 1e-15, pairs: Vec::new() };
    s.go(0, 0.0);
    s.best.min(start)
}

pub fn gh_distance(a: &FiniteMetricSpace, b: &FiniteMetricSpace, mode: GhMode, pairing: Option<&[(usize, usize)]>) -> Result<GhInterval> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parse("metric spaces must be non-empty".into()));
    }
    let lower = lower_bound(a, b);
    let (mut upper, _) = greedy_upper(a, b);
    if let Some(p) = pairing {
        if !is_correspondence(a.len(), b.len(), p) {
            return Err(Error::Parse("pairing is not a correspondence".into()));
        }
        upper = upper.min(distortion(a, b, p));
    }
    upper *= 0.5;
    match mode {
        GhMode::Bounds => Ok(GhInterval { lower: lower.min(upper), upper, mode }),
        GhMode::Exact if upper <= lower => Ok(GhInterval { lower: upper, upper, mode }),
        GhMode::Exact => {
            let big = a.len().max(b.len());
            if big > EXACT_LIMIT {
                return Err(Error::TooLargeForExact(big));
            }
            let v = 0.5 * exact_distortion(a, b, 2.0 * upper);
            Ok(GhInterval { lower: v, upper: v, mode })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub eps: f64,
    pub rho: f64,
    pub stages: usize,
    pub gh_lower: f64,
    pub gh_upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub sampling: SamplingOptions,
    pub grid: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { sampling: SamplingOptions::default(), grid: 8 }
    }
}

/// For each `eps`, rebuilds the blow-up metric with tube radius
/// `eps / (4 stages)` and bounds the distance between the two quotients,
/// using the blow-down pairing of shared orbit representatives.
pub fn compare_quotients(action: &LinearOrthogonalAction, base: Field, eps: &[f64], opts: &CompareOptions) -> Result<CompareReport> {
    let probe = desingularize(
        action,
        &DesingularizeOptions { radius: opts.sampling.radius, grid: opts.grid, regularity_samples: 500, ..Default::default() },
    )?;
    let stages = probe.stage_count();
    if stages > 1 {
        return Err(Error::Unsupported(format!("quotient comparison after {stages} stages")));
    }
    let points = orbit_representatives(action, &opts.sampling);
    let original = orbit_space_on(action, base.as_ref(), &points, opts.sampling.neighbors, 0)?;
    let pairing: Vec<(usize, usize)> = (0..points.len()).map(|i| (i, i)).collect();
    let mut rows = Vec::new();
    for &e in eps {
        let rho = e / (4.0 * stages.max(1) as f64);
        let resolved = if stages == 0 {
            original.clone()
        } else {
            let centers = crate::strata::most_singular_stratum(&probe.base, &probe.snapshots[0])?;
            let m = Arc::new(BlownUpManifold::base(action, opts.sampling.radius).blow_up(centers, rho)?);
            let metric = base_blowup_metric(m, base.clone())?;
            orbit_space_on(action, &metric, &points, opts.sampling.neighbors, 1)?
        };
        let gh = gh_distance(&original, &resolved, GhMode::Bounds, Some(&pairing))?;
        rows.push(CompareRow { eps: e, rho, stages, gh_lower: gh.lower, gh_upper: gh.upper, pass: gh.upper < e });
    }
    let mut order: Vec<&CompareRow> = rows.iter().collect();
    order.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let monotone = order.windows(2).all(|w| w[1].gh_upper <= w[0].gh_upper);
    let pass = monotone && rows.iter().all(|r| r.pass);
    Ok(CompareReport { rows, monotone, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::models::*;
    use crate::metrics::Euclidean;

    fn two_point() -> (FiniteMetricSpace, FiniteMetricSpace) {
        (FiniteMetricSpace::from_distances(vec![vec![0.0]]), FiniteMetricSpace::from_distances(vec![vec![0.0, 1.0], vec![1.0, 0.0]]))
    }

    #[test]
    fn reflection_orbit_distance() {
        let a = build(&reflection_line());
        let d = point_orbit_distance(&a, &Euclidean(1), &[0.5], &[-1.5]).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let d = point_orbit_distance(&a, &Euclidean(1), &[-1.0], &[1.0]).unwrap();
        assert!((d - 0.0).abs() < 1e-12);
        let d = point_orbit_distance(&a, &Euclidean(1), &[1.0], &[3.0]).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_orbit_distance() {
        let a = build(&circle_plane());
        let d = point_orbit_distance(&a, &Euclidean(2), &[0.1, 0.0], &[0.0, -0.9]).unwrap();
        assert!((d - 0.8).abs() < 1e-6, "{d}");
        let d = point_orbit_distance(&a, &Euclidean(2), &[1.0, 0.0], &[-0.12, 0.16]).unwrap();
        assert!((d - 0.8).abs() < 1e-3, "{d}");
    }

    #[test]
    fn two_point_calibration() {
        let (a, b) = two_point();
        let exact = gh_distance(&a, &b, GhMode::Exact, None).unwrap();
        assert!((exact.lower - 0.5).abs() < 1e-15 && (exact.upper - 0.5).abs() < 1e-15);
        let bounds = gh_distance(&a, &b, GhMode::Bounds, None).unwrap();
        assert!(bounds.lower <= 0.5 && bounds.upper >= 0.5);
    }

    #[test]
    fn calibration_gaps_one_and_two() {
        let a = FiniteMetricSpace::from_distances(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let b = FiniteMetricSpace::from_distances(vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
        let ex = gh_distance(&a, &b, GhMode::Exact, None).unwrap();
        assert_eq!((ex.lower, ex.upper), (0.5, 0.5));
        let same = gh_distance(&a, &a, GhMode::Bounds, None).unwrap();
        assert_eq!((same.lower, same.upper), (0.0, 0.0));
    }

    #[test]
    fn exact_is_bracketed_by_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mk = |rng: &mut ChaCha8Rng, n: usize| {
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
            let d = |p: &[f64; 2], q: &[f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            FiniteMetricSpace::from_distances(pts.iter().map(|p| pts.iter().map(|q| d(p, q)).collect()).collect())
        };
        for _ in 0..10 {
            let (a, b) = (mk(&mut rng, 5), mk(&mut rng, 4));
            let ex = gh_distance(&a, &b, GhMode::Exact, None).unwrap();
            let bd = gh_distance(&a, &b, GhMode::Bounds, None).unwrap();
            assert!(bd.lower <= ex.lower + 1e-12 && ex.upper <= bd.upper + 1e-12);
        }
        let line = |n: usize, step: f64| {
            FiniteMetricSpace::from_distances((0..n).map(|i| (0..n).map(|j| step * (i as f64 - j as f64).abs()).collect()).collect())
        };
        let (a9, b9) = (mk(&mut rng, 9), mk(&mut rng, 9));
        let bd = gh_distance(&a9, &b9, GhMode::Bounds, None).unwrap();
        assert!(bd.lower < bd.upper);
        assert!(matches!(gh_distance(&a9, &b9, GhMode::Exact, None), Err(Error::TooLargeForExact(9))));
        // a zero-distortion correspondence settles the exact value at any size
        let same = gh_distance(&line(30, 0.1), &line(30, 0.1), GhMode::Exact, None).unwrap();
        assert_eq!((same.lower, same.upper), (0.0, 0.0));
    }

    #[test]
    fn disk_radial_distance() {
        let a = build(&circle_plane());
        let opts = SamplingOptions { samples: 200, anchors: vec![vec![0.2, 0.0], vec![0.7, 0.0]], ..Default::default() };
        let x = sample_orbit_space(&a, &Euclidean(2), &opts).unwrap();
        assert!((x.d(0, 1) - 0.5).abs() < 0.02, "{}", x.d(0, 1));
        let n = x.len();
        for i in 0..n {
            assert_eq!(x.d(i, i), 0.0);
            for j in 0..n {
                assert_eq!(x.d(i, j), x.d(j, i));
                for k in 0..n {
                    assert!(x.d(i, k) <= x.d(i, j) + x.d(j, k) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn disconnected_graph_is_reported() {
        let a = build(&reflection_line());
        let pts = vec![vec![0.0], vec![0.01], vec![0.9], vec![0.91]];
        let r = orbit_space_on(&a, &Euclidean(1), &pts, 1, 0);
        assert!(matches!(r, Err(Error::GraphDisconnected { components: 2 })));
    }

    #[test]
    fn disk_quotients_converge() {
        let a = build(&circle_plane());
        let opts = CompareOptions { sampling: SamplingOptions { samples: 120, ..Default::default() }, grid: 8 };
        let r = compare_quotients(&a, Arc::new(Euclidean(2)), &[0.2, 0.1, 0.05], &opts).unwrap();
        eprintln!("{:?}", r.rows);
        assert!(r.pass, "{:?}", r.rows);
    }

    #[test]
    fn regular_action_has_identical_quotients() {
        let a = build(&reflection_line());
        let opts = CompareOptions { sampling: SamplingOptions { samples: 40, ..Default::default() }, grid: 8 };
        let r = compare_quotients(&a, Arc::new(Euclidean(1)), &[0.1], &opts).unwrap();
        assert!(r.pass && r.rows[0].gh_upper < 0.01);
    }

    #[test]
    fn quotient_distance_is_below_orbit_distance() {
        let a = build(&circle_plane());
        let x = sample_orbit_space(&a, &Euclidean(2), &SamplingOptions { samples: 60, ..Default::default() }).unwrap();
        let mut worst_gap = 0.0_f64;
        for i in 0..x.len() {
            for j in 0..x.len() {
                let direct = point_orbit_distance(&a, &Euclidean(2), &x.labels[i].point, &x.labels[j].point).unwrap();
                assert!(x.d(i, j) <= direct + 1e-9);
                worst_gap = worst_gap.max(direct - x.d(i, j));
            }
        }
        // on a flat disk the chain infimum is the radial gap, so the graph only rounds
        assert!(worst_gap < 0.05, "{worst_gap}");
    }

    #[test]
    fn gh_bounds_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mk = |rng: &mut ChaCha8Rng, n: usize| {
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            FiniteMetricSpace::from_distances(p.iter().map(|a| p.iter().map(|b| (a - b).abs()).collect()).collect())
        };
        for _ in 0..5 {
            let (a, b) = (mk(&mut rng, 12), mk(&mut rng, 10));
            let ab = gh_distance(&a, &b, GhMode::Bounds, None).unwrap();
            let ba = gh_distance(&b, &a, GhMode::Bounds, None).unwrap();
            assert_eq!(ab.lower, ba.lower);
            assert!(ab.lower <= ab.upper && ba.lower <= ba.upper);
        }
    }
}
