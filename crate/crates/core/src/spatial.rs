//! Static 3D KD-tree over point indices.

use crate::model::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// KD-tree answering nearest-within-radius and fixed-radius queries.
///
/// Distance ties resolve to the lower point index, matching a linear scan.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    root: Option<Node>,
}

fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = if points.is_empty() {
            None
        } else {
            let n = order.len();
            Some(Self::build(points, &mut order, 0, n))
        };
        Self {
            points: points.to_vec(),
            order,
            root,
        }
    }

    fn build(points: &[Vec3], order: &mut [usize], start: usize, end: usize) -> Node {
        if end - start <= LEAF_SIZE {
            return Node::Leaf { start, end };
        }
        let slice = &mut order[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in slice.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] == 0.0 {
            return Node::Leaf { start, end };
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[slice[mid]][axis];
        let mid = start + mid;
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build(points, order, start, mid)),
            right: Box::new(Self::build(points, order, mid, end)),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point with distance `<= radius`, ties to the lower index.
    pub fn nearest_within(&self, query: &Vec3, radius: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let limit = radius * radius;
        if let Some(root) = &self.root {
            self.nearest_rec(root, query, limit, &mut best);
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn nearest_rec(&self, node: &Node, q: &Vec3, limit: f64, best: &mut Option<(usize, f64)>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d2 = dist2(&self.points[i], q);
                    if d2 > limit {
                        continue;
                    }
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d2));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, limit, best);
                let bound = best.map_or(limit, |(_, bd)| bd.min(limit));
                // equal distances must still be visited for the index tie-break
                if diff * diff <= bound {
                    self.nearest_rec(far, q, limit, best);
                }
            }
        }
    }

    /// All indices within `radius` (inclusive), ascending.
    pub fn within_radius(&self, query: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            self.radius_rec(root, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: &Node, q: &Vec3, limit: f64, out: &mut Vec<usize>) {
        match node {
            Node::Leaf { start, end } => out.extend(
                self.order[*start..*end]
                    .iter()
                    .copied()
                    .filter(|&i| dist2(&self.points[i], q) <= limit),
            ),
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                if diff <= 0.0 || diff * diff <= limit {
                    self.radius_rec(left, q, limit, out);
                }
                if diff >= 0.0 || diff * diff <= limit {
                    self.radius_rec(right, q, limit, out);
                }
            }
        }
    }
}
