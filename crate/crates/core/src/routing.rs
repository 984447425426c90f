//! Metric spaces and batch routing.
//!
//! A batch is routed as an open path that starts at the traveler's current
//! location: build a minimum spanning tree with Prim's algorithm, walk it in
//! depth-first preorder from the start (shortcutting repeated vertices), then
//! polish the path with 2-opt. The preorder walk is at most twice the tree
//! weight and 2-opt never lengthens a path, so every planned route satisfies
//! `length ≤ 2 × MST({start} ∪ batch)`.

use crate::domain::BoxDomain;
use crate::error::{input, Result};

/// Passes of 2-opt used by [`plan_route`].
pub const DEFAULT_TWO_OPT_PASSES: usize = 100;

const IMPROVEMENT_EPS: f64 = 1e-12;

/// A metric `c` on the design space.
///
/// Points are coordinate slices. For the two discrete kinds a point is a
/// single coordinate holding a vertex label `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    /// Euclidean distance inside a box.
    EuclideanBox(BoxDomain),
    /// Distance 1 between any two distinct vertices.
    DiscreteUniform { size: usize },
    /// Shortest-path distances of a connected weighted graph.
    WeightedGraph(GraphMetric),
}

/// All-pairs shortest-path distances of a connected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetric {
    dist: Vec<Vec<f64>>,
}

impl GraphMetric {
    /// Floyd–Warshall over an undirected edge list.
    pub fn from_edges(size: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if size == 0 {
            return input("graph metric needs at least one vertex");
        }
        let mut dist = vec![vec![f64::INFINITY; size]; size];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b, w) in edges {
            if a >= size || b >= size {
                return input(format!("edge ({a}, {b}) references a missing vertex"));
            }
            if !(w > 0.0 && w.is_finite()) {
                return input(format!("edge ({a}, {b}) has non-positive weight {w}"));
            }
            if w < dist[a][b] {
                dist[a][b] = w;
                dist[b][a] = w;
            }
        }
        for k in 0..size {
            for i in 0..size {
                for j in 0..size {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        if dist.iter().flatten().any(|d| d.is_infinite()) {
            return input("graph is not connected");
        }
        Ok(Self { dist })
    }

    pub fn size(&self) -> usize {
        self.dist.len()
    }
}

impl MetricSpec {
    pub fn euclidean(domain: BoxDomain) -> Self {
        MetricSpec::EuclideanBox(domain)
    }

    pub fn discrete(size: usize) -> Result<Self> {
        if size == 0 {
            return input("discrete metric needs at least one point");
        }
        Ok(MetricSpec::DiscreteUniform { size })
    }

    pub fn graph(size: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Ok(MetricSpec::WeightedGraph(GraphMetric::from_edges(
            size, edges,
        )?))
    }

    /// Declared dimension for boxes, 0 for finite spaces.
    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::EuclideanBox(b) => b.dim(),
            _ => 0,
        }
    }

    /// Largest distance between two points of the space.
    pub fn diameter(&self) -> f64 {
        match self {
            MetricSpec::EuclideanBox(b) => b.diagonal(),
            MetricSpec::DiscreteUniform { size } => {
                if *size > 1 {
                    1.0
                } else {
                    0.0
                }
            }
            MetricSpec::WeightedGraph(g) => g.dist.iter().flatten().copied().fold(0.0, f64::max),
        }
    }

    fn vertex(x: &[f64], size: usize) -> Result<usize> {
        match x {
            [v] if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < size => Ok(*v as usize),
            _ => input(format!("{x:?} is not a vertex label in 0..{size}")),
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        match self {
            MetricSpec::EuclideanBox(b) => b.check(x),
            MetricSpec::DiscreteUniform { size } => Self::vertex(x, *size).map(|_| ()),
            MetricSpec::WeightedGraph(g) => Self::vertex(x, g.size()).map(|_| ()),
        }
    }

    /// Distance for points already known to lie in the space.
    pub(crate) fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            MetricSpec::EuclideanBox(_) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            MetricSpec::DiscreteUniform { .. } => {
                if a[0] == b[0] {
                    0.0
                } else {
                    1.0
                }
            }
            MetricSpec::WeightedGraph(g) => g.dist[a[0] as usize][b[0] as usize],
        }
    }
}

/// `c(a, b)`.
pub fn distance(metric: &MetricSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    metric.check(a)?;
    metric.check(b)?;
    Ok(metric.dist(a, b))
}

fn check_all(metric: &MetricSpec, points: &[Vec<f64>]) -> Result<()> {
    points.iter().try_for_each(|p| metric.check(p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    /// `(parent, child, weight)` in the order Prim attached each vertex.
    pub edges: Vec<(usize, usize, f64)>,
    pub total_weight: f64,
}

/// Dense `O(n²)` Prim's algorithm grown from vertex 0.
pub fn prim_mst(points: &[Vec<f64>], metric: &MetricSpec) -> Result<SpanningTree> {
    if points.is_empty() {
        return input("spanning tree needs at least one point");
    }
    check_all(metric, points)?;
    Ok(prim_unchecked(points, metric))
}

fn prim_unchecked(points: &[Vec<f64>], metric: &MetricSpec) -> SpanningTree {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut total = 0.0;
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = metric.dist(&points[current], &points[v]);
            if w < best[v] {
                best[v] = w;
                parent[v] = current;
            }
            if best[v] < next_w || next == usize::MAX {
                next_w = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next, next_w));
        total += next_w;
        current = next;
    }
    SpanningTree {
        edges,
        total_weight: total,
    }
}

/// One visit on a route. Repeated designs collapse into a single stop.
#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub point: Vec<f64>,
    /// Number of evaluations made at this stop.
    pub multiplicity: usize,
    /// Positions in the routed input that map to this stop.
    pub members: Vec<usize>,
}

/// An open path from `start` through every stop, in visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub start: Vec<f64>,
    pub stops: Vec<Stop>,
    pub length: f64,
}

impl Route {
    /// Sum of consecutive distances, recomputed from the stops.
    pub fn measured_length(&self, metric: &MetricSpec) -> f64 {
        let mut prev = &self.start;
        let mut total = 0.0;
        for s in &self.stops {
            total += metric.dist(prev, &s.point);
            prev = &s.point;
        }
        total
    }

    /// Total number of evaluations along the route.
    pub fn evaluations(&self) -> usize {
        self.stops.iter().map(|s| s.multiplicity).sum()
    }
}

/// Preorder walk of `tree` rooted at `anchor`, as an open path.
pub fn tour_from_mst(
    tree: &SpanningTree,
    points: &[Vec<f64>],
    metric: &MetricSpec,
    anchor: usize,
) -> Result<Route> {
    let n = points.len();
    if anchor >= n {
        return input(format!("anchor {anchor} out of range for {n} points"));
    }
    if tree.edges.len() + 1 != n {
        return input("tree does not span the given points");
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(a, b, w) in &tree.edges {
        if a >= n || b >= n {
            return input("tree edge references a missing point");
        }
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    // Children in order of increasing edge weight, then index.
    for list in &mut adj {
        list.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![anchor];
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        order.push(v);
        for &(u, _) in adj[v].iter().rev() {
            if !seen[u] {
                stack.push(u);
            }
        }
    }
    if order.len() != n {
        return input("tree is not connected");
    }
    let stops = order[1..]
        .iter()
        .map(|&i| Stop {
            point: points[i].clone(),
            multiplicity: 1,
            members: vec![i],
        })
        .collect();
    let mut route = Route {
        start: points[anchor].clone(),
        stops,
        length: 0.0,
    };
    route.length = route.measured_length(metric);
    Ok(route)
}

/// First-improvement 2-opt on an open path with a fixed start.
pub fn two_opt(route: Route, metric: &MetricSpec, max_passes: usize) -> Route {
    let Route {
        start, mut stops, ..
    } = route;
    let n = stops.len();
    let d = |a: &[f64], b: &[f64]| metric.dist(a, b);
    for _ in 0..max_passes {
        let mut improved = false;
        // Path positions 0..=n where position 0 is the fixed start.
        for i in 0..n.saturating_sub(1) {
            for k in i + 2..=n {
                let a: &[f64] = if i == 0 { &start } else { &stops[i - 1].point };
                let b = &stops[i].point;
                let c = &stops[k - 1].point;
                let mut before = d(a, b);
                let mut after = d(a, c);
                if k < n {
                    let e = &stops[k].point;
                    before += d(c, e);
                    after += d(b, e);
                }
                if after < before - IMPROVEMENT_EPS {
                    stops[i..k].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut out = Route {
        start,
        stops,
        length: 0.0,
    };
    out.length = out.measured_length(metric);
    out
}

/// Plan an open route from `current` through every design in the batch.
pub fn plan_route(
    current: &[f64],
    batch_points: &[Vec<f64>],
    metric: &MetricSpec,
) -> Result<Route> {
    plan_route_with(current, batch_points, metric, DEFAULT_TWO_OPT_PASSES)
}

pub fn plan_route_with(
    current: &[f64],
    batch_points: &[Vec<f64>],
    metric: &MetricSpec,
    two_opt_passes: usize,
) -> Result<Route> {
    if batch_points.is_empty() {
        return input("cannot route an empty batch");
    }
    metric.check(current)?;
    check_all(metric, batch_points)?;

    // Collapse exact duplicates, keeping first-occurrence order.
    let mut unique: Vec<Vec<f64>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    for (pos, p) in batch_points.iter().enumerate() {
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        let slot = *index.entry(key).or_insert_with(|| {
            unique.push(p.clone());
            members.push(Vec::new());
            unique.len() - 1
        });
        members[slot].push(pos);
    }

    let mut vertices = Vec::with_capacity(unique.len() + 1);
    vertices.push(current.to_vec());
    vertices.extend(unique.iter().cloned());
    let tree = prim_unchecked(&vertices, metric);
    let tour = tour_from_mst(&tree, &vertices, metric, 0)?;
    let mut route = two_opt(tour, metric, two_opt_passes);
    for stop in &mut route.stops {
        let slot = stop.members[0] - 1;
        stop.members = members[slot].clone();
        stop.multiplicity = stop.members.len();
    }
    Ok(route)
}

/// Visit the batch in the given order, without planning.
pub fn natural_route(
    current: &[f64],
    batch_points: &[Vec<f64>],
    metric: &MetricSpec,
) -> Result<Route> {
    if batch_points.is_empty() {
        return input("cannot route an empty batch");
    }
    metric.check(current)?;
    check_all(metric, batch_points)?;
    let stops = batch_points
        .iter()
        .enumerate()
        .map(|(i, p)| Stop {
            point: p.clone(),
            multiplicity: 1,
            members: vec![i],
        })
        .collect();
    let mut route = Route {
        start: current.to_vec(),
        stops,
        length: 0.0,
    };
    route.length = route.measured_length(metric);
    Ok(route)
}

/// Greedy ε-cover restricted to the given points: each still-uncovered point
/// becomes a center covering its open ball `{x : c(x, z) < ε}`.
pub fn greedy_cover(points: &[Vec<f64>], metric: &MetricSpec, epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon > 0.0) {
        return input(format!("epsilon must be positive, got {epsilon}"));
    }
    check_all(metric, points)?;
    let mut covered = vec![false; points.len()];
    let mut centers = Vec::new();
    for i in 0..points.len() {
        if covered[i] {
            continue;
        }
        centers.push(i);
        for (j, flag) in covered.iter_mut().enumerate() {
            if !*flag && metric.dist(&points[i], &points[j]) < epsilon {
                *flag = true;
            }
        }
    }
    Ok(centers)
}

/// Size of the greedy ε-cover, an upper bound on the covering number.
pub fn covering_number(points: &[Vec<f64>], metric: &MetricSpec, epsilon: f64) -> Result<usize> {
    greedy_cover(points, metric, epsilon).map(|c| c.len())
}
