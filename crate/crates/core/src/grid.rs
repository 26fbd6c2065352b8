use crate::error::{Error, Result};

/// Uniform partition of `[a, b]` including both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("grid needs at least 3 nodes, got {n}")));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::Argument(format!(
                "grid interval [{a}, {b}] is empty or not finite"
            )));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        // Pin the last node so that it is exactly b.
        nodes[n - 1] = b;
        Ok(Self { a, b, h, nodes })
    }

    /// Uniform grid on the unit interval.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Position mapped to the unit interval.
    pub fn unit_coordinate(&self, i: usize) -> f64 {
        if i + 1 == self.nodes.len() {
            1.0
        } else {
            (self.nodes[i] - self.a) / (self.b - self.a)
        }
    }

    /// Trapezoid weights: `h` in the interior, `h/2` at the two ends.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![self.h; n];
        w[0] = 0.5 * self.h;
        w[n - 1] = 0.5 * self.h;
        w
    }

    /// Centers of the `n - 1` cells.
    pub fn cell_centers(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|c| 0.5 * (c[0] + c[1])).collect()
    }

    pub fn refine(&self) -> Self {
        Self::new(self.a, self.b, 2 * (self.len() - 1) + 1).expect("refining a valid grid")
    }

    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.a) / self.h).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }
}
