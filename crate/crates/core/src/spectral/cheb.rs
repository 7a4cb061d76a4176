//! Chebyshev–Gauss–Lobatto collocation on the vertical interval [-b, 0].
//!
//! Node 0 sits at x3 = 0 (the surface) and node `n - 1` at x3 = -b (the
//! bottom), so both boundary traces are exact node values.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Chebyshev {
    n: usize,
    depth: f64,
    nodes: Vec<f64>,
    /// First derivative matrix d/dx3, row-major n x n.
    d1: Vec<f64>,
    /// Second derivative matrix, row-major n x n.
    d2: Vec<f64>,
    /// Clenshaw–Curtis weights on [-b, 0].
    weights: Vec<f64>,
}

impl Chebyshev {
    /// Builds the collocation data for `n >= 2` nodes on `[-depth, 0]`.
    pub fn new(n: usize, depth: f64) -> Self {
        assert!(n >= 2, "need at least two collocation nodes");
        let big_n = n - 1;
        let xi: Vec<f64> = (0..n).map(|j| (PI * j as f64 / big_n as f64).cos()).collect();
        let nodes = xi.iter().map(|&x| 0.5 * depth * (x - 1.0)).collect();

        // Differentiation on the reference interval [-1, 1], using the
        // trigonometric form of x_i - x_j to avoid cancellation.
        let c = |i: usize| {
            let m = if i == 0 || i == big_n { 2.0 } else { 1.0 };
            if i % 2 == 0 {
                m
            } else {
                -m
            }
        };
        let mut d_ref = vec![0.0; n * n];
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let diff = 2.0
                    * (PI * (i + j) as f64 / (2.0 * big_n as f64)).sin()
                    * (PI * (j as f64 - i as f64) / (2.0 * big_n as f64)).sin();
                let v = c(i) / c(j) / diff;
                d_ref[i * n + j] = v;
                row_sum += v;
            }
            d_ref[i * n + i] = -row_sum;
        }
        let scale = 2.0 / depth;
        let d1: Vec<f64> = d_ref.iter().map(|v| v * scale).collect();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = d1[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    d2[i * n + j] += a * d1[k * n + j];
                }
            }
        }

        let weights = clenshaw_curtis(big_n)
            .into_iter()
            .map(|w| 0.5 * depth * w)
            .collect();

        Self {
            n,
            depth,
            nodes,
            d1,
            d2,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Node positions in x3, descending from 0 to -b.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major derivative matrix of the given order (1 or 2).
    pub fn matrix(&self, order: usize) -> &[f64] {
        match order {
            1 => &self.d1,
            2 => &self.d2,
            _ => panic!("only first and second derivative matrices are stored"),
        }
    }

    pub fn d1(&self, i: usize, j: usize) -> f64 {
        self.d1[i * self.n + j]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    /// Applies the derivative of the given order to nodal values.
    pub fn apply(&self, order: usize, values: &[f64]) -> Vec<f64> {
        let m = self.matrix(order);
        (0..self.n)
            .map(|i| {
                m[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(values)
                    .map(|(a, v)| a * v)
                    .sum()
            })
            .collect()
    }

    /// Clenshaw–Curtis quadrature of nodal values over [-b, 0].
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Clenshaw–Curtis weights on [-1, 1] for nodes cos(pi j / n), j = 0..=n.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        w[0] = 2.0;
        return w;
    }
    let nf = n as f64;
    let mut v = vec![1.0; n.saturating_sub(1)];
    let theta = |j: usize| PI * j as f64 / nf;
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(idx + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (idx, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta(idx + 1)).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(idx + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (idx, vi) in v.iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nf;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_surface_and_bottom() {
        let c = Chebyshev::new(12, 1.7);
        assert_eq!(c.nodes()[0], 0.0);
        assert!((c.nodes()[11] + 1.7).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_polynomials_is_exact() {
        let c = Chebyshev::new(9, 2.0);
        let f: Vec<f64> = c.nodes().iter().map(|&x| x * x * x - 2.0 * x).collect();
        let df = c.apply(1, &f);
        let d2f = c.apply(2, &f);
        for (i, &x) in c.nodes().iter().enumerate() {
            assert!((df[i] - (3.0 * x * x - 2.0)).abs() < 1e-12);
            assert!((d2f[i] - 6.0 * x).abs() < 1e-11);
        }
    }

    #[test]
    fn quadrature_is_exact_for_polynomials_up_to_degree_n_minus_1() {
        for n in [3usize, 8, 9, 16] {
            let b = 1.3;
            let c = Chebyshev::new(n, b);
            for deg in 0..n {
                let f: Vec<f64> = c.nodes().iter().map(|&x| (x + b).powi(deg as i32)).collect();
                let exact = b.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                let got = c.integrate(&f);
                assert!(
                    (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                    "n={n} deg={deg} got={got} exact={exact}"
                );
            }
        }
    }
}
