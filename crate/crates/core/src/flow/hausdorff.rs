//! Hausdorff distance between unions of polylines.
//!
//! Vertices alone can miss the worst point of a segment, so each segment is
//! bisected until an upper bound on its distance to the other set is within
//! a relative `1e-3` of the running maximum. The bound uses that the
//! distance to a fixed segment is convex along a segment, so it peaks at an
//! endpoint.

use nalgebra::DVector;

const REL_TOL: f64 = 5e-4;

struct Segments {
    dim: usize,
    points: Vec<f64>,
    /// Index pairs into `points` (in units of `dim`).
    segs: Vec<(usize, usize)>,
}

impl Segments {
    fn new(lines: &[Vec<DVector<f64>>]) -> Self {
        let dim = lines.iter().flatten().next().map_or(0, |p| p.len());
        let mut points = Vec::new();
        let mut segs = Vec::new();
        let mut count = 0;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            for p in line {
                assert_eq!(p.len(), dim, "polylines must share a dimension");
                points.extend(p.iter());
            }
            if line.len() == 1 {
                segs.push((count, count));
            }
            for k in 1..line.len() {
                segs.push((count + k - 1, count + k));
            }
            count += line.len();
        }
        Self { dim, points, segs }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn dist(&self, x: &[f64], s: usize) -> f64 {
        let (a, b) = self.segs[s];
        let (p, q) = (self.point(a), self.point(b));
        let mut dot = 0.0;
        let mut len2 = 0.0;
        for k in 0..self.dim {
            let e = q[k] - p[k];
            dot += (x[k] - p[k]) * e;
            len2 += e * e;
        }
        let t = if len2 > 0.0 { (dot / len2).clamp(0.0, 1.0) } else { 0.0 };
        let mut acc = 0.0;
        for k in 0..self.dim {
            let r = x[k] - p[k] - t * (q[k] - p[k]);
            acc += r * r;
        }
        acc.sqrt()
    }

    /// Visits segment indices starting from `hint`, wrapping around.
    fn order(&self, hint: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.segs.len();
        (0..n).map(move |k| (hint + k) % n)
    }

    /// Distance from `x` to the set, or any value below `floor` once the
    /// true distance is known to be below it.
    fn dist_to_set(&self, x: &[f64], floor: f64, hint: &mut usize) -> f64 {
        let mut best = f64::INFINITY;
        for s in self.order(*hint) {
            let v = self.dist(x, s);
            if v < best {
                best = v;
                *hint = s;
                if best <= floor {
                    break;
                }
            }
        }
        best
    }

    /// `min_T max(dist(p, T), dist(q, T))`, an upper bound on the distance
    /// from any point of `[p, q]` to the set.
    fn segment_bound(&self, p: &[f64], q: &[f64], floor: f64, hint: &mut usize) -> f64 {
        let mut best = f64::INFINITY;
        for s in self.order(*hint) {
            let v = self.dist(p, s).max(self.dist(q, s));
            if v < best {
                best = v;
                *hint = s;
                if best <= floor {
                    break;
                }
            }
        }
        best
    }
}

fn directed(a: &Segments, b: &Segments) -> f64 {
    let mut best = 0.0f64;
    let mut hint = 0;
    for i in 0..a.points.len() / a.dim.max(1) {
        best = best.max(b.dist_to_set(a.point(i), best, &mut hint));
    }
    let extent = a.points.iter().chain(&b.points).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let min_len = 1e-12 * extent;
    let mut stack: Vec<(Vec<f64>, Vec<f64>)> =
        a.segs.iter().filter(|(i, j)| i != j).map(|&(i, j)| (a.point(i).to_vec(), a.point(j).to_vec())).collect();
    while let Some((p, q)) = stack.pop() {
        let floor = best * (1.0 + REL_TOL);
        if b.segment_bound(&p, &q, floor, &mut hint) <= floor {
            continue;
        }
        let len = p.iter().zip(&q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if len < min_len {
            continue;
        }
        let m: Vec<f64> = p.iter().zip(&q).map(|(x, y)| 0.5 * (x + y)).collect();
        best = best.max(b.dist_to_set(&m, best, &mut hint));
        stack.push((m.clone(), q));
        stack.push((p, m));
    }
    best
}

/// Symmetric Hausdorff distance between two unions of polylines (a
/// single-point polyline is a point). Both sets must be nonempty.
pub fn hausdorff_distance(a: &[Vec<DVector<f64>>], b: &[Vec<DVector<f64>>]) -> f64 {
    let (sa, sb) = (Segments::new(a), Segments::new(b));
    assert!(!sa.segs.is_empty() && !sb.segs.is_empty(), "Hausdorff distance needs nonempty sets");
    directed(&sa, &sb).max(directed(&sb, &sa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(xs: &[(f64, f64)]) -> Vec<DVector<f64>> {
        xs.iter().map(|&(x, y)| DVector::from_vec(vec![x, y])).collect()
    }

    #[test]
    fn identical_is_zero() {
        let a = vec![pts(&[(0.0, 0.0), (1.0, 2.0), (3.0, -1.0)])];
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    #[test]
    fn parallel_segments() {
        let a = vec![pts(&[(0.0, 0.0), (1.0, 0.0)])];
        let b = vec![pts(&[(0.0, 0.25), (1.0, 0.25)])];
        assert!((hausdorff_distance(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn interior_maximum_found() {
        // the worst point of `a` sits mid-segment, far from every vertex of `b`
        let a = vec![pts(&[(0.0, 0.0), (2.0, 0.0)])];
        let b = vec![pts(&[(0.0, 0.0)]), pts(&[(2.0, 0.0)])];
        let h = hausdorff_distance(&a, &b);
        assert!((1.0 - 1e-3..=1.0).contains(&h), "{h}");
    }

    #[test]
    fn points_versus_corner() {
        let a = vec![pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])];
        let b = vec![pts(&[(0.0, 0.0), (1.0, 1.0)])];
        // the corner (1,0) is 1/√2 from the diagonal
        let h = hausdorff_distance(&a, &b);
        assert!((h - 0.5f64.sqrt()).abs() < 1e-12);
    }

    fn brute(a: &[Vec<DVector<f64>>], b: &[Vec<DVector<f64>>], res: usize) -> f64 {
        let sample = |lines: &[Vec<DVector<f64>>]| -> Vec<DVector<f64>> {
            let mut out = Vec::new();
            for l in lines {
                out.push(l[0].clone());
                for w in l.windows(2) {
                    for k in 1..=res {
                        let t = k as f64 / res as f64;
                        out.push(&w[0] * (1.0 - t) + &w[1] * t);
                    }
                }
            }
            out
        };
        let (pa, pb) = (sample(a), sample(b));
        let d = |x: &DVector<f64>, set: &[DVector<f64>]| set.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
        let ab = pa.iter().map(|x| d(x, &pb)).fold(0.0, f64::max);
        let ba = pb.iter().map(|x| d(x, &pa)).fold(0.0, f64::max);
        ab.max(ba)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn agrees_with_dense_sampling(
            a in prop::collection::vec((-3f64..3.0, -3f64..3.0), 1..5),
            b in prop::collection::vec((-3f64..3.0, -3f64..3.0), 1..5),
        ) {
            let (a, b) = (vec![pts(&a)], vec![pts(&b)]);
            let h = hausdorff_distance(&a, &b);
            let dense = brute(&a, &b, 400);
            // dense sampling is itself within (segment length / 400) of the truth
            prop_assert!((h - dense).abs() <= 1e-3 * h + 0.03, "h {} dense {}", h, dense);
            prop_assert!((h - hausdorff_distance(&b, &a)).abs() <= 1e-3 * h + 1e-12);
        }
    }
}
