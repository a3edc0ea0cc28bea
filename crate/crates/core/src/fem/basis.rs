use crate::Point;

/// Tensor-product Lagrange basis of degree `p` on the unit square with
/// equispaced nodes; local node `a + (p + 1) b` sits at `(a / p, b / p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LagrangeBasis {
    order: usize,
}

impl LagrangeBasis {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Lagrange order must be at least 1");
        LagrangeBasis { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_nodes(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    pub fn node(&self, k: usize) -> Point {
        let p = self.order;
        [(k % (p + 1)) as f64 / p as f64, (k / (p + 1)) as f64 / p as f64]
    }

    fn one_d(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.order;
        let nodes: Vec<f64> = (0..=p).map(|k| k as f64 / p as f64).collect();
        let mut vals = vec![0.0; p + 1];
        let mut ders = vec![0.0; p + 1];
        for i in 0..=p {
            let mut v = 1.0;
            for j in 0..=p {
                if j != i {
                    v *= (t - nodes[j]) / (nodes[i] - nodes[j]);
                }
            }
            vals[i] = v;
            let mut d = 0.0;
            for m in 0..=p {
                if m == i {
                    continue;
                }
                let mut term = 1.0 / (nodes[i] - nodes[m]);
                for j in 0..=p {
                    if j != i && j != m {
                        term *= (t - nodes[j]) / (nodes[i] - nodes[j]);
                    }
                }
                d += term;
            }
            ders[i] = d;
        }
        (vals, ders)
    }

    pub fn values(&self, xi: Point) -> Vec<f64> {
        let (vx, _) = self.one_d(xi[0]);
        let (vy, _) = self.one_d(xi[1]);
        let p1 = self.order + 1;
        let mut out = Vec::with_capacity(p1 * p1);
        for b in 0..p1 {
            for a in 0..p1 {
                out.push(vx[a] * vy[b]);
            }
        }
        out
    }

    /// Gradients with respect to the local coordinates.
    pub fn gradients(&self, xi: Point) -> Vec<Point> {
        let (vx, dx) = self.one_d(xi[0]);
        let (vy, dy) = self.one_d(xi[1]);
        let p1 = self.order + 1;
        let mut out = Vec::with_capacity(p1 * p1);
        for b in 0..p1 {
            for a in 0..p1 {
                out.push([dx[a] * vy[b], vx[a] * dy[b]]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_property() {
        for p in 1..=3 {
            let b = LagrangeBasis::new(p);
            for k in 0..b.n_nodes() {
                let v = b.values(b.node(k));
                for (m, vm) in v.iter().enumerate() {
                    let e = if m == k { 1.0 } else { 0.0 };
                    assert!((vm - e).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_gradient_sum() {
        let b = LagrangeBasis::new(2);
        for xi in [[0.3, 0.7], [1.4, -0.2], [0.5, 0.5]] {
            let s: f64 = b.values(xi).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            let g = b.gradients(xi);
            let gx: f64 = g.iter().map(|v| v[0]).sum();
            let gy: f64 = g.iter().map(|v| v[1]).sum();
            assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let b = LagrangeBasis::new(2);
        let xi = [0.37, 0.61];
        let eps = 1e-6;
        let g = b.gradients(xi);
        let vp = b.values([xi[0] + eps, xi[1]]);
        let vm = b.values([xi[0] - eps, xi[1]]);
        for k in 0..b.n_nodes() {
            assert!(((vp[k] - vm[k]) / (2.0 * eps) - g[k][0]).abs() < 1e-8);
        }
    }
}
