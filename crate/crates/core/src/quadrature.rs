//! Gauss rules on segments, squares and triangles.

use crate::Point;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n starting from the Chebyshev guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Number of Gauss points per direction integrating degree `degree` exactly.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rule2d {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Rule2d {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Tensor Gauss rule on the unit square.
pub fn square_rule(n: usize) -> Rule2d {
    let (x, w) = gauss_legendre(n);
    let mut r = Rule2d::default();
    for j in 0..n {
        for i in 0..n {
            r.points.push([x[i], x[j]]);
            r.weights.push(w[i] * w[j]);
        }
    }
    r
}

/// Collapsed (Duffy) Gauss rule on the triangle `a, b, c`.
pub fn triangle_rule(a: Point, b: Point, c: Point, n: usize) -> Rule2d {
    let (x, w) = gauss_legendre(n);
    let det = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let mut r = Rule2d::default();
    for j in 0..n {
        for i in 0..n {
            let s = x[i];
            let t = x[j] * (1.0 - s);
            let jac = 1.0 - s;
            r.points.push([
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
            ]);
            r.weights.push(w[i] * w[j] * jac * det);
        }
    }
    r
}

/// Gauss rule on the segment `a -> b`; weights carry the segment length.
pub fn segment_rule(a: Point, b: Point, n: usize) -> Rule2d {
    let (x, w) = gauss_legendre(n);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    Rule2d {
        points: x.iter().map(|&s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]).collect(),
        weights: w.iter().map(|&wi| wi * len).collect(),
    }
}
