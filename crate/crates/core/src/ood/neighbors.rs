/// Pair count below which queries scan the reference set directly.
pub const BRUTE_FORCE_PAIRS: usize = 10_000_000;

const LEAF_SIZE: usize = 16;

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

enum Node {
    Leaf { from: usize, to: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Exact k-d tree over borrowed points; splits at the median of the widest axis.
pub struct KdTree<'a> {
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = Self::build(points, &mut order, 0);
        KdTree { points, order, root }
    }

    fn build(points: &[Vec<f64>], idx: &mut [usize], base: usize) -> Node {
        if idx.len() <= LEAF_SIZE {
            return Node::Leaf { from: base, to: base + idx.len() };
        }
        let dims = points[idx[0]].len();
        let axis = (0..dims)
            .map(|a| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(points[i][a]), hi.max(points[i][a]))
                });
                (a, hi - lo)
            })
            .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
            .0;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[idx[mid]][axis];
        let (l, r) = idx.split_at_mut(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build(points, l, base)),
            right: Box::new(Self::build(points, r, base + mid)),
        }
    }

    /// The `k` smallest squared distances from `x`, ascending.
    pub fn nearest_squared(&self, x: &[f64], k: usize) -> Vec<f64> {
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(&self.root, x, k, &mut best);
        }
        best
    }

    fn search(&self, node: &Node, x: &[f64], k: usize, best: &mut Vec<f64>) {
        match node {
            Node::Leaf { from, to } => {
                for &i in &self.order[*from..*to] {
                    let d = squared_euclidean(x, &self.points[i]);
                    if best.len() < k || d < best[best.len() - 1] {
                        let at = best.partition_point(|v| *v <= d);
                        best.insert(at, d);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let gap = x[*axis] - value;
                let (near, far) = if gap < 0.0 { (left, right) } else { (right, left) };
                self.search(near, x, k, best);
                if best.len() < k || gap * gap <= best[best.len() - 1] {
                    self.search(far, x, k, best);
                }
            }
        }
    }
}

/// Exact Euclidean nearest-neighbour distances to a fixed reference set.
pub enum NearestNeighbors<'a> {
    Brute(&'a [Vec<f64>]),
    Tree(KdTree<'a>),
}

impl<'a> NearestNeighbors<'a> {
    /// Picks a k-d tree when `queries · |reference|` exceeds [`BRUTE_FORCE_PAIRS`].
    pub fn new(reference: &'a [Vec<f64>], queries: usize) -> Self {
        if queries.saturating_mul(reference.len()) <= BRUTE_FORCE_PAIRS {
            return NearestNeighbors::Brute(reference);
        }
        Self::tree(reference)
    }

    pub fn tree(reference: &'a [Vec<f64>]) -> Self {
        NearestNeighbors::Tree(KdTree::new(reference))
    }

    /// Distance from `x` to its nearest reference point.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.nearest(x, 1).first().copied().unwrap_or(f64::INFINITY)
    }

    /// The `k` smallest distances from `x`, ascending.
    pub fn nearest(&self, x: &[f64], k: usize) -> Vec<f64> {
        let squared = match self {
            NearestNeighbors::Brute(refs) => {
                let mut d: Vec<f64> = refs.iter().map(|r| squared_euclidean(x, r)).collect();
                let k = k.min(d.len());
                if k == 0 {
                    return Vec::new();
                }
                d.select_nth_unstable_by(k - 1, f64::total_cmp);
                d.truncate(k);
                d.sort_by(f64::total_cmp);
                d
            }
            NearestNeighbors::Tree(tree) => tree.nearest_squared(x, k),
        };
        squared.into_iter().map(f64::sqrt).collect()
    }
}
