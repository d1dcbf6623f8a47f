//! Gauss-Legendre rules on `[0, 1]` and tensor quadrature on mesh elements.

use crate::error::{Error, Result};
use crate::splines::TensorSpace;

/// Gauss-Legendre rule with nodes and weights mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(m: usize) -> Result<Self> {
        if !(1..=10).contains(&m) {
            return Err(Error::QuadratureOrder(m));
        }
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        // roots of P_m on [-1, 1] come in symmetric pairs; solve for the upper half
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map to [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[m - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[m - 1 - i] = 0.5 * w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.5;
        }
        Ok(GaussRule { nodes, weights })
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

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights affinely mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let len = b - a;
        (
            self.nodes.iter().map(|&t| a + len * t).collect(),
            self.weights.iter().map(|&w| w * len).collect(),
        )
    }
}

pub fn gauss_rule(m: usize) -> Result<GaussRule> {
    GaussRule::new(m)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor quadrature grid on one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementQuadrature {
    pub element: Vec<usize>,
    /// Reference-domain points, one `n`-vector each, first direction fastest.
    pub points: Vec<Vec<f64>>,
    /// Weights scaled by the element measure `h^n`.
    pub weights: Vec<f64>,
}

pub fn element_quadrature(space: &TensorSpace, element: &[usize], rule: &GaussRule) -> Result<ElementQuadrature> {
    let nel = space.nel();
    if element.len() != space.dim() || element.iter().any(|&e| e >= nel) {
        return Err(Error::InvalidElement { index: element.to_vec(), nel });
    }
    let bp = space.knots().breakpoints();
    let per_dir: Vec<(Vec<f64>, Vec<f64>)> = element.iter().map(|&e| rule.mapped(bp[e], bp[e + 1])).collect();
    let m = rule.len();
    let total = m.pow(element.len() as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for q in 0..total {
        let mut rem = q;
        let mut pt = Vec::with_capacity(element.len());
        let mut w = 1.0;
        for (nodes, ws) in &per_dir {
            pt.push(nodes[rem % m]);
            w *= ws[rem % m];
            rem /= m;
        }
        points.push(pt);
        weights.push(w);
    }
    Ok(ElementQuadrature { element: element.to_vec(), points, weights })
}
