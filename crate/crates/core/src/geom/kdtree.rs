use super::Point3;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;
const BRUTE_FORCE_BELOW: usize = 64;

#[derive(Clone, Debug)]
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

/// Exact k-nearest-neighbour index over a fixed point set.
///
/// Ties are broken by original point index so answers are deterministic.
#[derive(Clone, Debug)]
pub struct NNIndex {
    points: Vec<Point3>,
    ids: Vec<usize>,
    slot: Vec<usize>,
    nodes: Vec<Node>,
}

impl NNIndex {
    pub fn build(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if points.len() < BRUTE_FORCE_BELOW {
            nodes.push(Node::Leaf {
                start: 0,
                end: points.len(),
            });
        } else {
            build_node(points, &mut ids, 0, points.len(), &mut nodes);
        }
        let ordered = ids.iter().map(|&i| points[i]).collect();
        let mut slot = vec![0; ids.len()];
        for (pos, &i) in ids.iter().enumerate() {
            slot[i] = pos;
        }
        Ok(NNIndex {
            points: ordered,
            ids,
            slot,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point by original index.
    pub fn point(&self, id: usize) -> Point3 {
        self.points[self.slot[id]]
    }

    /// Nearest point: `(original index, distance)`.
    pub fn nearest(&self, p: &Point3) -> (usize, f64) {
        self.knn(p, 1)[0]
    }

    /// The `k` nearest points sorted by distance, then index.
    pub fn knn(&self, p: &Point3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.search(0, p, k, &mut best);
        best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    /// All points within `radius` of `p`, sorted by distance then index.
    pub fn within(&self, p: &Point3, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.collect_within(0, p, radius * radius, &mut out);
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn search(&self, node: usize, p: &Point3, k: usize, best: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for j in start..end {
                    let d2 = (self.points[j] - p).norm_squared();
                    offer(best, k, (d2, self.ids[j]));
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = p[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, p, k, best);
                let bound = best.last().map(|b| b.0).unwrap_or(f64::INFINITY);
                if best.len() < k || diff * diff <= bound {
                    self.search(far, p, k, best);
                }
            }
        }
    }

    fn collect_within(&self, node: usize, p: &Point3, r2: f64, out: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for j in start..end {
                    let d2 = (self.points[j] - p).norm_squared();
                    if d2 <= r2 {
                        out.push((d2, self.ids[j]));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = p[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.collect_within(left, p, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.collect_within(right, p, r2, out);
                }
            }
        }
    }
}

fn offer(best: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    let worse = |a: &(f64, usize), b: &(f64, usize)| a.0 > b.0 || (a.0 == b.0 && a.1 > b.1);
    if best.len() == k && !worse(best.last().unwrap(), &cand) {
        return;
    }
    let pos = best.partition_point(|b| !worse(b, &cand));
    best.insert(pos, cand);
    if best.len() > k {
        best.pop();
    }
}

fn build_node(points: &[Point3], ids: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return me;
    }
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &i in &ids[start..end] {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = start + (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let value = points[ids[mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    // left holds [start, mid), whose coordinates are <= value
    let left = build_node(points, ids, start, mid, nodes);
    let right = build_node(points, ids, mid, end, nodes);
    nodes[me] = Node::Split { axis, value, left, right };
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point3], p: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, q)| ((q - p).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    #[test]
    fn single_point() {
        let idx = NNIndex::build(&[Point3::origin()]).unwrap();
        let (i, d) = idx.nearest(&Point3::new(5.0, 5.0, 5.0));
        assert_eq!(i, 0);
        assert!((d - 75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cube_corners() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        let idx = NNIndex::build(&pts).unwrap();
        let (i, _) = idx.nearest(&Point3::new(0.1, 0.1, 0.1));
        assert_eq!(pts[i], Point3::origin());
    }

    #[test]
    fn empty_is_error() {
        assert!(NNIndex::build(&[]).is_err());
    }

    #[test]
    fn thousand_random_points_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point3> = (0..1000).map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let idx = NNIndex::build(&pts).unwrap();
        for _ in 0..200 {
            let q = Point3::new(rng.gen_range(-0.5..1.5), rng.gen(), rng.gen());
            assert_eq!(idx.knn(&q, 5), brute(&pts, &q, 5));
        }
        let q = Point3::new(0.5, 0.5, 0.5);
        let within = idx.within(&q, 0.2);
        let expected: Vec<_> = brute(&pts, &q, 1000).into_iter().filter(|x| x.1 <= 0.2).collect();
        assert_eq!(within, expected);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn knn_equals_brute_force(seed in any::<u64>(), n in 1usize..2000, k in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // quantized coordinates exercise ties
            let pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(
                    rng.gen_range(0..20) as f64 * 0.05,
                    rng.gen_range(0..20) as f64 * 0.05,
                    rng.gen::<f64>(),
                ))
                .collect();
            let idx = NNIndex::build(&pts).unwrap();
            for _ in 0..10 {
                let q = Point3::new(rng.gen(), rng.gen(), rng.gen());
                prop_assert_eq!(idx.knn(&q, k), brute(&pts, &q, k));
            }
        }
    }
}
