use crate::pointcloud::Point3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree for exact nearest-neighbour queries.
///
/// Points are reordered in place; each node splits its slice at the median
/// of the axis with the widest extent.
pub struct KdTree {
    points: Vec<Point3>,
    nodes: Vec<Node>,
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.points[start..end];
        let axis = widest_axis(slice);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |a, b| a.axis(axis).total_cmp(&b.axis(axis)));
        let value = slice[mid].axis(axis);
        self.nodes.push(Node::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// Squared distance from `query` to its nearest point, or `None` for an
    /// empty tree.
    pub fn nearest_distance_squared(&self, query: &Point3) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Point3, best: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d = q.distance_squared(p);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q.axis(axis) - value;
                // Left holds coordinates <= value, right holds >= value.
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn widest_axis(points: &[Point3]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p.axis(a));
            hi[a] = hi[a].max(p.axis(a));
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_exact_nearest_on_lattice() {
        let pts: Vec<Point3> = (0..1000)
            .map(|i| Point3::new((i % 10) as f64, ((i / 10) % 10) as f64, (i / 100) as f64))
            .collect();
        let tree = KdTree::build(&pts);
        assert_eq!(
            tree.nearest_distance_squared(&Point3::new(3.0, 4.0, 5.0)),
            Some(0.0)
        );
        assert_eq!(
            tree.nearest_distance_squared(&Point3::new(3.5, 4.0, 5.0)),
            Some(0.25)
        );
        assert_eq!(
            tree.nearest_distance_squared(&Point3::new(-2.0, 0.0, 0.0)),
            Some(4.0)
        );
    }

    #[test]
    fn empty_tree() {
        assert_eq!(
            KdTree::build(&[]).nearest_distance_squared(&Point3::default()),
            None
        );
    }
}
