//! Quadrature on the unit interval and on triangles.

/// Gauss-Legendre rule on `[0, 1]` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    /// `n`-point Gauss-Legendre rule, exact for polynomials of degree `2n - 1`.
    pub fn gauss(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n starting from the Chebyshev-like guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        LineRule { points, weights }
    }

    /// Smallest Gauss rule exact for degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        Self::gauss(degree / 2 + 1)
    }

    pub fn degree(&self) -> usize {
        2 * self.points.len() - 1
    }

    /// Integral of `f` over the segment `[a, b]`.
    pub fn integrate_segment(
        &self,
        a: crate::Point,
        b: crate::Point,
        f: impl Fn(crate::Point) -> f64,
    ) -> f64 {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let sum: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]))
            .sum();
        len * sum
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Rule on a triangle in barycentric coordinates; weights sum to one so that
/// `∫_K f ≈ |K| Σ w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Edge-midpoint rule, exact for quadratics.
    pub fn edge_midpoints() -> Self {
        QuadratureRule {
            points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Collapsed tensor Gauss rule exact for degree `degree`.
    pub fn collapsed_gauss(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let line = LineRule::gauss(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&xi, &wx) in line.points.iter().zip(&line.weights) {
            for (&eta, &wy) in line.points.iter().zip(&line.weights) {
                let x = xi;
                let y = eta * (1.0 - xi);
                points.push([1.0 - x - y, x, y]);
                weights.push(2.0 * wx * wy * (1.0 - xi));
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    /// Rule used for all bilinear forms (degree 2).
    pub fn forms() -> Self {
        Self::edge_midpoints()
    }

    /// Rule used for forcing and error integrals (degree 7).
    pub fn accurate() -> Self {
        Self::collapsed_gauss(7)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
