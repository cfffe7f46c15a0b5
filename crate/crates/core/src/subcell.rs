//! Exact integrals of `exp(a . u)` over a square cell and over convex
//! sub-polygons of it. Used by the sub-cell quadrature, where each distance
//! field is linear inside a cell and market boundaries cut cells into convex
//! pieces.

pub type Point = [f64; 2];

/// `sinh(t) / t`, accurate near zero.
#[inline]
pub fn sinhc(t: f64) -> f64 {
    let t2 = t * t;
    if t2 < 1e-4 {
        1.0 + t2 / 6.0 * (1.0 + t2 / 20.0 * (1.0 + t2 / 42.0))
    } else {
        t.sinh() / t
    }
}

/// `int_{[-h/2, h/2]^2} exp(a . u) du`.
#[inline]
pub fn square_exp_integral(h: f64, a: Point) -> f64 {
    h * h * sinhc(0.5 * a[0] * h) * sinhc(0.5 * a[1] * h)
}

/// `(e^b - e^a) / (b - a)`.
#[inline]
fn exp_dd1(a: f64, b: f64) -> f64 {
    let d = b - a;
    if d == 0.0 {
        a.exp()
    } else {
        a.exp() * d.exp_m1() / d
    }
}

/// Second divided difference of `exp` at three nodes.
pub fn exp_dd2(x: f64, y: f64, z: f64) -> f64 {
    let mut v = [x, y, z];
    v.sort_by(f64::total_cmp);
    let [lo, mid, hi] = v;
    if hi - lo <= 1.0 {
        // e^lo * sum_k h_k(0, a, b) / (k + 2)!, with h_k the complete
        // homogeneous polynomial; a, b in [0, 1]
        let (a, b) = (mid - lo, hi - lo);
        let mut hk = 1.0; // h_k(a, b)
        let mut bk = 1.0; // b^k
        let mut fact = 2.0; // (k + 2)!
        let mut sum = 0.5;
        for k in 1..40 {
            bk *= b;
            hk = a * hk + bk;
            fact *= (k + 2) as f64;
            let term = hk / fact;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        lo.exp() * sum
    } else {
        (exp_dd1(mid, hi) - exp_dd1(lo, mid)) / (hi - lo)
    }
}

/// `int_T exp(a . u) du` over a triangle.
#[inline]
pub fn triangle_exp_integral(p0: Point, p1: Point, p2: Point, a: Point) -> f64 {
    let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
    if area == 0.0 {
        return 0.0;
    }
    let f = |p: Point| a[0] * p[0] + a[1] * p[1];
    2.0 * area * exp_dd2(f(p0), f(p1), f(p2))
}

/// `int_P exp(a . u) du` over a convex polygon (fan triangulation).
pub fn polygon_exp_integral(poly: &[Point], a: Point) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    (1..poly.len() - 1)
        .map(|k| triangle_exp_integral(poly[0], poly[k], poly[k + 1], a))
        .sum()
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s.abs()
}

/// The cell square `[-h/2, h/2]^2`, counter-clockwise.
pub fn cell_square(h: f64) -> Vec<Point> {
    let r = 0.5 * h;
    vec![[-r, -r], [r, -r], [r, r], [-r, r]]
}

/// Keeps the part of a convex polygon where `n . u <= c`.
pub fn clip_half_plane(poly: &[Point], n: Point, c: f64) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    if m == 0 {
        return out;
    }
    let side = |p: Point| n[0] * p[0] + n[1] * p[1] - c;
    for k in 0..m {
        let p = poly[k];
        let q = poly[(k + 1) % m];
        let sp = side(p);
        let sq = side(q);
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tensor Gauss-Legendre (8 points) on a fine sub-grid of the triangle's
    /// bounding box, masked by the triangle: a slow independent reference.
    fn brute_triangle(p: [Point; 3], a: Point) -> f64 {
        let inside = |u: Point| {
            let s = |p0: Point, p1: Point| (p1[0] - p0[0]) * (u[1] - p0[1]) - (p1[1] - p0[1]) * (u[0] - p0[0]);
            let (d0, d1, d2) = (s(p[0], p[1]), s(p[1], p[2]), s(p[2], p[0]));
            (d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0 && d2 <= 0.0)
        };
        let xs = [p[0][0], p[1][0], p[2][0]];
        let ys = [p[0][1], p[1][1], p[2][1]];
        let (x0, x1) = (xs.iter().cloned().fold(f64::MAX, f64::min), xs.iter().cloned().fold(f64::MIN, f64::max));
        let (y0, y1) = (ys.iter().cloned().fold(f64::MAX, f64::min), ys.iter().cloned().fold(f64::MIN, f64::max));
        let m = 1500;
        let (dx, dy) = ((x1 - x0) / m as f64, (y1 - y0) / m as f64);
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let u = [x0 + (i as f64 + 0.5) * dx, y0 + (j as f64 + 0.5) * dy];
                if inside(u) {
                    s += (a[0] * u[0] + a[1] * u[1]).exp();
                }
            }
        }
        s * dx * dy
    }

    #[test]
    fn sinhc_matches_definition() {
        for &t in &[1e-3, 0.02, 0.5, 3.0, -2.0] {
            let want = if t == 0.0 { 1.0 } else { f64::sinh(t) / t };
            assert!((sinhc(t) - want).abs() < 1e-14 * want);
        }
        assert_eq!(sinhc(0.0), 1.0);
    }

    #[test]
    fn square_integral_matches_triangles() {
        let h = 0.3;
        let a = [1.7, -4.2];
        let sq = cell_square(h);
        let tri = polygon_exp_integral(&sq, a);
        let closed = square_exp_integral(h, a);
        assert!((tri - closed).abs() < 1e-14 * closed);
    }

    #[test]
    fn divided_difference_branches_agree() {
        // spread just below and above the series threshold
        for &(x, y, z) in &[(0.0, 0.3, 0.999), (0.0, 0.3, 1.001), (-2.0, -1.2, -1.0), (5.0, 5.0, 5.0)] {
            let dd = exp_dd2(x, y, z);
            // symmetric formula, fine when nodes are well separated or equal
            let naive = if x == y && y == z {
                x.exp() / 2.0
            } else {
                x.exp() / ((x - y) * (x - z)) + y.exp() / ((y - x) * (y - z)) + z.exp() / ((z - x) * (z - y))
            };
            assert!((dd - naive).abs() < 1e-9 * naive, "{x} {y} {z}: {dd} vs {naive}");
        }
        // permutation invariance
        assert!((exp_dd2(0.1, 0.7, 2.5) - exp_dd2(2.5, 0.1, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn triangle_integral_matches_brute_force() {
        let tri = [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]];
        for &a in &[[0.0, 0.0], [1.0, -2.0], [-3.0, 0.5], [1e-9, 1e-9]] {
            let exact = triangle_exp_integral(tri[0], tri[1], tri[2], a);
            let brute = brute_triangle(tri, a);
            assert!((exact - brute).abs() < 2e-3 * exact, "{a:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn clipping_partitions_the_square() {
        let sq = cell_square(2.0);
        let n = [0.3, -1.0];
        let keep = clip_half_plane(&sq, n, 0.2);
        let rest = clip_half_plane(&sq, [-n[0], -n[1]], -0.2);
        assert!((polygon_area(&keep) + polygon_area(&rest) - 4.0).abs() < 1e-14);
        assert!(clip_half_plane(&sq, [1.0, 0.0], -5.0).is_empty());
        assert_eq!(clip_half_plane(&sq, [1.0, 0.0], 5.0).len(), 4);
    }
}
