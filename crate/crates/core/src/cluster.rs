//! Connected components of open-edge graphs.

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Point, VertexSet};
use crate::sampler::BoxConfig;
use std::collections::VecDeque;

/// Disjoint-set forest with path halving and union by rank.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n as u32).collect(), rank: vec![0; n], size: vec![1; n] }
    }

    #[inline]
    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let gp = self.parent[self.parent[x] as usize];
            self.parent[x] = gp;
            x = gp as usize;
        }
        x
    }

    /// Merges the classes of `a` and `b`; returns the new root.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        if self.rank[ra] == self.rank[rb] {
            self.rank[ra] += 1;
        }
        ra
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

/// Fully resolved components of a configuration.
#[derive(Clone, Debug)]
pub struct ClusterForest {
    root: Vec<u32>,
    size: Vec<u32>,
    /// Lexicographically smallest vertex of each root's component.
    min_vertex: Vec<u32>,
}

impl ClusterForest {
    pub fn from_union_find(mut uf: UnionFind) -> ClusterForest {
        let n = uf.len();
        let mut root = vec![0u32; n];
        let mut size = vec![0u32; n];
        let mut min_vertex = vec![u32::MAX; n];
        for v in 0..n {
            let r = uf.find(v);
            root[v] = r as u32;
            size[r] += 1;
            min_vertex[r] = min_vertex[r].min(v as u32);
        }
        ClusterForest { root, size, min_vertex }
    }

    #[inline]
    pub fn root(&self, v: usize) -> usize {
        self.root[v] as usize
    }

    #[inline]
    pub fn same(&self, a: usize, b: usize) -> bool {
        self.root[a] == self.root[b]
    }

    pub fn component_size(&self, v: usize) -> usize {
        self.size[self.root(v)] as usize
    }

    pub fn num_vertices(&self) -> usize {
        self.root.len()
    }

    pub fn num_components(&self) -> usize {
        (0..self.root.len()).filter(|&v| self.root(v) == v).count()
    }

    /// Sizes of all components; they sum to the vertex count.
    pub fn component_sizes(&self) -> Vec<usize> {
        (0..self.root.len()).filter(|&v| self.root(v) == v).map(|v| self.size[v] as usize).collect()
    }

    /// `(size, representative)` of the largest component, ties going to the
    /// component whose smallest vertex is lexicographically smallest.
    pub fn largest(&self) -> (usize, usize) {
        let mut best = (0usize, usize::MAX);
        for v in 0..self.root.len() {
            if self.root(v) == v {
                let cand = (self.size[v] as usize, self.min_vertex[v] as usize);
                if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                    best = cand;
                }
            }
        }
        best
    }

    /// Members of the component containing `v`.
    pub fn members(&self, v: usize) -> Vec<usize> {
        let r = self.root[v];
        (0..self.root.len()).filter(|&u| self.root[u] == r).collect()
    }
}

/// Union-find partition of the box by open paths.
pub fn components(cfg: &BoxConfig) -> ClusterForest {
    let mut uf = UnionFind::new(cfg.num_vertices());
    for &(a, b) in cfg.edges() {
        uf.union(a as usize, b as usize);
    }
    ClusterForest::from_union_find(uf)
}

/// `K_x(A)`: vertices reachable from `x` by open paths inside `A`.
pub fn restricted_cluster(cfg: &BoxConfig, x: usize, region: &VertexSet) -> Result<Vec<usize>> {
    restricted_cluster_from(cfg, &[x], region)
}

/// `K_S(A)` for a source set `S ⊆ A`.
pub fn restricted_cluster_from(cfg: &BoxConfig, sources: &[usize], region: &VertexSet) -> Result<Vec<usize>> {
    if sources.is_empty() {
        return Err(Error::EmptySources);
    }
    if sources.iter().any(|&s| !region.contains(s)) {
        return Err(Error::SourceOutsideSet);
    }
    let mut seen = vec![false; cfg.num_vertices()];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        out.push(v);
        for &w in cfg.neighbors(v) {
            let w = w as usize;
            if !seen[w] && region.contains(w) {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Largest component of the subgraph induced by `region`, as
/// `(size, lexicographically smallest vertex of that component)`.
pub fn largest_cluster(cfg: &BoxConfig, region: &VertexSet) -> Result<(usize, usize)> {
    if region.is_empty() {
        return Err(Error::EmptySet);
    }
    let forest = induced_components(cfg, region);
    let mut best = (0usize, usize::MAX);
    let mut size = vec![0u32; cfg.num_vertices()];
    let mut min_v = vec![u32::MAX; cfg.num_vertices()];
    for &v in region.members() {
        let r = forest.root(v as usize);
        size[r] += 1;
        min_v[r] = min_v[r].min(v);
    }
    for &v in region.members() {
        let r = v as usize;
        if forest.root(r) == r {
            let cand = (size[r] as usize, min_v[r] as usize);
            if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                best = cand;
            }
        }
    }
    Ok(best)
}

/// Components of the subgraph induced by `region`; vertices outside the region
/// stay singletons.
pub fn induced_components(cfg: &BoxConfig, region: &VertexSet) -> ClusterForest {
    let mut uf = UnionFind::new(cfg.num_vertices());
    for &(a, b) in cfg.edges() {
        if region.contains(a as usize) && region.contains(b as usize) {
            uf.union(a as usize, b as usize);
        }
    }
    ClusterForest::from_union_find(uf)
}

/// Centers `x` with `B_m(x) ⊆ region` whose ball is internally connected by
/// open edges lying inside the ball.
pub fn find_mpads(cfg: &BoxConfig, region: &VertexSet, m: i64) -> Vec<Point> {
    let forest = components(cfg);
    find_mpads_with(cfg, &forest, region, m)
}

pub(crate) fn find_mpads_with(cfg: &BoxConfig, forest: &ClusterForest, region: &VertexSet, m: i64) -> Vec<Point> {
    let g = cfg.geometry();
    let mut out = Vec::new();
    for &c in region.members() {
        let center = g.point(c as usize);
        if is_pad(cfg, forest, region, center, m) {
            out.push(center);
        }
    }
    out
}

/// Whether `B_m(center)` lies in `region` and is an open m-pad.
pub(crate) fn is_pad(cfg: &BoxConfig, forest: &ClusterForest, region: &VertexSet, center: Point, m: i64) -> bool {
    let g = cfg.geometry();
    let Ok(ball) = LatticeBox::ball(g.dim(), center, m) else { return false };
    if !g.contains_box(&ball) {
        return false;
    }
    let mut idx = Vec::with_capacity(ball.volume());
    let mut root = None;
    for p in ball.points() {
        let i = g.index_of(&p).expect("inside");
        if !region.contains(i) {
            return false;
        }
        let r = forest.root(i);
        if *root.get_or_insert(r) != r {
            return false;
        }
        idx.push(i);
    }
    ball_connected(cfg, &ball, &idx)
}

/// BFS inside `ball` using only edges with both endpoints in it.
pub(crate) fn ball_connected(cfg: &BoxConfig, ball: &LatticeBox, idx: &[usize]) -> bool {
    if idx.len() <= 1 {
        return true;
    }
    let g = cfg.geometry();
    let mut seen = vec![false; idx.len()];
    let local = |v: usize| ball.index_of(&g.point(v));
    let mut stack = vec![idx[0]];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in cfg.neighbors(v) {
            if let Some(l) = local(w as usize) {
                if !seen[l] {
                    seen[l] = true;
                    count += 1;
                    stack.push(w as usize);
                }
            }
        }
    }
    count == idx.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingField;
    use crate::kernel::Kernel;
    use crate::sampler::sample_box;

    fn p(x: i64, y: i64) -> Point {
        Point::new(&[x, y])
    }

    #[test]
    fn fixtures() {
        let g = LatticeBox::centered(2, 3).unwrap();
        let f = components(&BoxConfig::empty(g));
        assert_eq!(f.num_components(), 49);
        assert_eq!(f.largest().0, 1);
        let f = components(&BoxConfig::all_nearest_neighbor(g));
        assert_eq!(f.num_components(), 1);
        let c = BoxConfig::from_edges(g, &[(p(0, 0), p(1, 0)), (p(1, 0), p(2, 0))]).unwrap();
        let f = components(&c);
        assert_eq!(f.component_size(c.index(&p(2, 0)).unwrap()), 3);
        assert_eq!(f.num_components(), 47);
        assert_eq!(f.component_sizes().iter().sum::<usize>(), 49);
    }

    #[test]
    fn largest_with_ties_and_sizes() {
        let g = LatticeBox::centered(2, 3).unwrap();
        let c = BoxConfig::from_edges(
            g,
            &[(p(0, 0), p(1, 0)), (p(1, 0), p(2, 0)), (p(-3, -3), p(-3, -2)), (p(-3, -2), p(-3, -1)),
              (p(-3, -1), p(-3, 0)), (p(-3, 0), p(-3, 1))],
        )
        .unwrap();
        let all = VertexSet::full(g.volume());
        assert_eq!(largest_cluster(&c, &all).unwrap().0, 5);
        let empty = BoxConfig::empty(g);
        let (s, rep) = largest_cluster(&empty, &all).unwrap();
        assert_eq!((s, rep), (1, 0));
        assert_eq!(largest_cluster(&c, &VertexSet::empty(g.volume())), Err(Error::EmptySet));
        let nn = BoxConfig::all_nearest_neighbor(g);
        assert_eq!(largest_cluster(&nn, &all).unwrap().0, 49);
    }

    #[test]
    fn restriction_semantics() {
        let g = LatticeBox::centered(2, 2).unwrap();
        let c = BoxConfig::from_edges(g, &[(p(0, 0), p(1, 0)), (p(1, 0), p(2, 0))]).unwrap();
        let x = c.index(&p(0, 0)).unwrap();
        let y = c.index(&p(1, 0)).unwrap();
        let z = c.index(&p(2, 0)).unwrap();
        let only_x = VertexSet::from_indices(g.volume(), [x]);
        assert_eq!(restricted_cluster(&c, x, &only_x).unwrap(), vec![x]);
        let no_y = VertexSet::from_indices(g.volume(), [x, z]);
        assert_eq!(restricted_cluster(&c, x, &no_y).unwrap(), vec![x]);
        let full = VertexSet::full(g.volume());
        assert_eq!(restricted_cluster(&c, x, &full).unwrap(), vec![x, y, z]);
        assert_eq!(restricted_cluster(&c, y, &no_y), Err(Error::SourceOutsideSet));
    }

    #[test]
    fn mpad_fixtures() {
        let g = LatticeBox::centered(2, 4).unwrap();
        let region = VertexSet::full(g.volume());
        assert_eq!(find_mpads(&BoxConfig::empty(g), &region, 0).len(), 81);
        assert!(find_mpads(&BoxConfig::empty(g), &region, 1).is_empty());
        assert_eq!(find_mpads(&BoxConfig::all_nearest_neighbor(g), &region, 2).len(), 25);
    }

    #[test]
    fn pad_needs_internal_path() {
        // the 3x3 ball around the origin is connected only through an outside detour
        let g = LatticeBox::centered(2, 3).unwrap();
        let inner = LatticeBox::centered(2, 1).unwrap();
        let mut edges = Vec::new();
        for q in inner.points() {
            for axis in 0..2 {
                let r = q + Point::unit(axis);
                if inner.contains(&r) && !(q == p(0, 1) && r == p(1, 1)) && !(q == p(1, 0) && r == p(1, 1)) {
                    edges.push((q, r));
                }
            }
        }
        edges.extend([(p(1, 1), p(2, 1)), (p(2, 1), p(2, 0)), (p(2, 0), p(1, 0))]);
        let c = BoxConfig::from_edges(g, &edges).unwrap();
        let region = VertexSet::full(g.volume());
        assert!(!find_mpads(&c, &region, 1).contains(&p(0, 0)));
    }

    #[test]
    fn components_match_exhaustive_search_on_small_boxes() {
        let k = Kernel::power_law(1, 1.0, 2.5).unwrap();
        let g = LatticeBox::centered(1, 4).unwrap();
        for seed in 0..50 {
            let c = sample_box(&k, 0.4, &g, CouplingField::new(seed, 0), 1e-3).unwrap();
            let f = components(&c);
            let n = c.num_vertices();
            // transitive closure of the adjacency matrix
            let mut reach = vec![vec![false; n]; n];
            for i in 0..n {
                reach[i][i] = true;
                for &j in c.neighbors(i) {
                    reach[i][j as usize] = true;
                }
            }
            for k2 in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if reach[i][k2] && reach[k2][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(f.same(i, j), reach[i][j]);
                }
            }
        }
    }
}
