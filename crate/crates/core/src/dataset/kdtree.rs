use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

/// Squared Euclidean distance, summed in coordinate order.
///
/// Every distance comparison in the crate goes through this function so the
/// tree and the linear-scan paths agree bit for bit.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

/// A query result: point index and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    fn key(&self) -> (f64, usize) {
        (self.dist_sq, self.index)
    }

    fn before(&self, other: &Neighbor) -> bool {
        let (a, b) = (self.key(), other.key());
        a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact k-d tree over a fixed point list.
///
/// Splits on the median of the widest coordinate. Results are ordered by
/// `(squared distance, index)`, so ties resolve to the smaller index exactly
/// as a sorted linear scan would.
#[derive(Debug, Clone)]
pub struct KdTree {
    d: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds a tree over `points.len() / d` row-major points.
    pub fn build(points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || !points.len().is_multiple_of(d) {
            return Err(Error::invalid("point buffer does not match the dimension"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        let n = points.len() / d;
        let mut tree = KdTree {
            d,
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build_node(0, n);
        }
        Ok(tree)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(1);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("rows have different lengths"));
        }
        Self::build(rows.iter().flatten().copied().collect(), d)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    fn coord(&self, i: usize, k: usize) -> f64 {
        self.points[i * self.d + k]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut dim = 0;
        let mut widest = -1.0;
        for k in 0..self.d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let c = self.coord(i, k);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if hi - lo > widest {
                widest = hi - lo;
                dim = k;
            }
        }
        if widest <= 0.0 {
            // All points coincide; splitting cannot separate them.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut slice = self.order[start..end].to_vec();
        slice.sort_by(|&a, &b| {
            self.coord(a, dim)
                .total_cmp(&self.coord(b, dim))
                .then(a.cmp(&b))
        });
        self.order[start..end].copy_from_slice(&slice);
        let mid = start + (end - start) / 2;
        let value = self.coord(self.order[mid], dim);

        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `q` (fewer if the tree is smaller).
    pub fn knn(&self, q: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(q.len(), self.d, "query dimension mismatch");
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k == 0 || self.is_empty() {
            return best;
        }
        self.knn_node(0, q, k, &mut best);
        best
    }

    pub fn nearest(&self, q: &[f64]) -> Option<Neighbor> {
        self.knn(q, 1).into_iter().next()
    }

    fn knn_node(&self, node: usize, q: &[f64], k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist_sq: sq_dist(q, self.point(i)),
                    };
                    if best.len() == k && !cand.before(&best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|b| b.before(&cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_node(near, q, k, best);
                // Points on the far side are at least |diff| away; equality
                // still has to be visited for index tie-breaks.
                if best.len() < k || diff * diff <= best[k - 1].dist_sq {
                    self.knn_node(far, q, k, best);
                }
            }
        }
    }

    /// All points with squared distance at most `r2`, ordered by
    /// `(squared distance, index)`.
    pub fn within(&self, q: &[f64], r2: f64) -> Vec<Neighbor> {
        assert_eq!(q.len(), self.d, "query dimension mismatch");
        let mut out = Vec::new();
        if !self.is_empty() {
            self.within_node(0, q, r2, &mut out);
        }
        out.sort_by(|a, b| a.dist_sq.total_cmp(&b.dist_sq).then(a.index.cmp(&b.index)));
        out
    }

    fn within_node(&self, node: usize, q: &[f64], r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist_sq = sq_dist(q, self.point(i));
                    if dist_sq <= r2 {
                        out.push(Neighbor { index: i, dist_sq });
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.within_node(near, q, r2, out);
                if diff * diff <= r2 {
                    self.within_node(far, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scan(points: &[Vec<f64>], q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .map(|(index, p)| Neighbor {
                index,
                dist_sq: sq_dist(q, p),
            })
            .collect();
        all.sort_by(|a, b| a.dist_sq.total_cmp(&b.dist_sq).then(a.index.cmp(&b.index)));
        all.truncate(k);
        all
    }

    #[test]
    fn matches_scan_on_random_and_gridded_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..30 {
            let d = 1 + trial % 4;
            let n = 1 + rng.random_range(0..200);
            // Integer grids force many distance ties.
            let gridded = trial % 2 == 0;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            if gridded {
                                rng.random_range(0..4) as f64
                            } else {
                                rng.random_range(-1.0..1.0)
                            }
                        })
                        .collect()
                })
                .collect();
            let tree = KdTree::from_rows(&rows).unwrap();
            for _ in 0..20 {
                let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..4.0)).collect();
                for k in [1, 3, 10] {
                    assert_eq!(tree.knn(&q, k), scan(&rows, &q, k));
                }
                let r2 = rng.random_range(0.0..2.0);
                let expect: Vec<Neighbor> = scan(&rows, &q, n)
                    .into_iter()
                    .filter(|nb| nb.dist_sq <= r2)
                    .collect();
                assert_eq!(tree.within(&q, r2), expect);
            }
        }
    }

    #[test]
    fn coincident_points() {
        let rows = vec![vec![1.0, 1.0]; 20];
        let tree = KdTree::from_rows(&rows).unwrap();
        let nn = tree.knn(&[1.0, 1.0], 3);
        assert_eq!(
            nn.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::build(Vec::new(), 2).unwrap();
        assert!(tree.knn(&[0.0, 0.0], 2).is_empty());
        assert!(tree.nearest(&[0.0, 0.0]).is_none());
    }
}
