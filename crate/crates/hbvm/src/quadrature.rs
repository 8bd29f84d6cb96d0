//! Gauss-Legendre and Lobatto quadrature on [0, 1], plus interpolatory
//! weights for arbitrary node sets.
//!
//! Nodes are computed by Newton iteration on the recurrence-evaluated
//! Legendre polynomial (Chebyshev-based initial guesses, bracketed fallback
//! for the Lobatto interior nodes), so no eigenvalue solver is involved.
//! Symmetric rules are assembled from one half and mirrored, which makes
//! τᵢ + τ_{k+1−i} = 1 hold exactly in floating point.

use crate::error::{Error, Result};

/// Which construction produced a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFamily {
    Gauss,
    Lobatto,
    Custom,
}

impl NodeFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeFamily::Gauss => "gauss",
            NodeFamily::Lobatto => "lobatto",
            NodeFamily::Custom => "custom",
        }
    }
}

/// An interpolatory quadrature rule on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Sorted distinct abscissae in [0, 1].
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub family: NodeFamily,
    /// Highest polynomial degree integrated exactly.
    pub exactness_degree: usize,
}

impl QuadratureRule {
    /// Apply the rule to `f` on [0, 1].
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Apply the rule rescaled to [a, b].
    pub fn integrate_on(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| len * w * f(a + len * t))
            .sum()
    }

    /// B(2s) holds iff the rule is exact for degree 2s − 1.
    pub fn satisfies_b(&self, two_s: usize) -> bool {
        self.exactness_degree + 1 >= two_s
    }
}

// Legendre P_k and P_k' on [-1, 1] by the three-term recurrence.
fn legendre_pd(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for n in 1..k {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        let d2 = ((2.0 * nf + 1.0) * (p1 + x * d1) - nf * d0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

// Roots of P_k in (0, 1] on the reference interval [-1, 1], descending.
// Newton from the Chebyshev estimate converges in a handful of iterations.
fn positive_legendre_roots(k: usize) -> Result<Vec<f64>> {
    let mut roots = Vec::with_capacity(k / 2);
    for i in 0..k / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_pd(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        let (p, dp) = legendre_pd(k, x);
        if !converged || p.abs() > 1e-13 * dp.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "Gauss node polishing failed for k = {k}, node {i} (residual {p:.3e})"
            )));
        }
        roots.push(x);
    }
    Ok(roots)
}

/// Gauss-Legendre rule with k nodes; exact for degree 2k − 1.
pub fn gauss_rule(k: usize) -> Result<QuadratureRule> {
    if k == 0 {
        return Err(Error::InvalidArgument("Gauss rule needs k >= 1".into()));
    }
    let half = positive_legendre_roots(k)?;
    let mut nodes = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    // Lower half ascending (mirror of descending positive roots).
    for &x in &half {
        let (_, dp) = legendre_pd(k, x);
        nodes.push(0.5 - 0.5 * x);
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    if k % 2 == 1 {
        let (_, dp) = legendre_pd(k, 0.0);
        nodes.push(0.5);
        weights.push(1.0 / (dp * dp));
    }
    for i in (0..half.len()).rev() {
        nodes.push(0.5 + 0.5 * half[i]);
        weights.push(weights[i]);
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        family: NodeFamily::Gauss,
        exactness_degree: 2 * k - 1,
    })
}

// Safeguarded Newton for a root of P'_{m} inside (a, b), where the sign of
// P'_m changes across the bracket.
fn lobatto_interior_root(m: usize, a: f64, b: f64) -> Result<f64> {
    let dsign = |x: f64| legendre_pd(m, x).1.signum();
    let (mut lo, mut hi) = (a, b);
    if dsign(lo) == dsign(hi) {
        return Err(Error::Internal(format!(
            "Lobatto bracket [{lo}, {hi}] does not straddle a root of P'_{m}"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (p, dp) = legendre_pd(m, x);
        // P''_m from the Legendre differential equation.
        let ddp = (2.0 * x * dp - (m as f64) * (m as f64 + 1.0) * p) / (1.0 - x * x);
        let step = dp / ddp;
        let mut next = x - step;
        if !(lo..=hi).contains(&next) {
            next = 0.5 * (lo + hi);
        }
        if dsign(next) == dsign(lo) {
            lo = next;
        } else {
            hi = next;
        }
        if (next - x).abs() <= 1e-16 || hi - lo <= 4.0 * f64::EPSILON {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Lobatto rule with n ≥ 2 nodes including both endpoints; exact for
/// degree 2n − 3.
pub fn lobatto_rule(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidArgument("Lobatto rule needs n >= 2".into()));
    }
    let m = n - 1;
    // Interior nodes are the roots of P'_{n-1}; each lies between two
    // consecutive roots of P_{n-1}.
    let mut interior_pos = Vec::new();
    if n > 2 {
        let pos = positive_legendre_roots(m)?; // descending in (0, 1]
        let mut asc: Vec<f64> = pos.iter().rev().copied().collect();
        if !m.is_multiple_of(2) {
            asc.insert(0, 0.0);
        }
        for w in asc.windows(2) {
            interior_pos.push(lobatto_interior_root(m, w[0], w[1])?);
        }
        if m.is_multiple_of(2) && !asc.is_empty() {
            // One root of the (odd) derivative sits at the origin's mirror
            // bracket (-x₁, x₁); by symmetry it is exactly 0.
            interior_pos.insert(0, 0.0);
        }
    }
    let w_of = |x: f64| {
        let (p, _) = legendre_pd(m, x);
        1.0 / ((n * m) as f64 * p * p)
    };
    let mut nodes = vec![0.0];
    let mut weights = vec![1.0 / ((n * m) as f64)];
    let has_center = interior_pos.first().is_some_and(|&x| x == 0.0);
    let strictly_pos: Vec<f64> = interior_pos.iter().copied().filter(|&x| x > 0.0).collect();
    for &x in strictly_pos.iter().rev() {
        nodes.push(0.5 - 0.5 * x);
        weights.push(w_of(x));
    }
    if has_center {
        nodes.push(0.5);
        weights.push(w_of(0.0));
    }
    for &x in &strictly_pos {
        nodes.push(0.5 + 0.5 * x);
        weights.push(w_of(x));
    }
    nodes.push(1.0);
    weights.push(1.0 / ((n * m) as f64));
    Ok(QuadratureRule {
        nodes,
        weights,
        family: NodeFamily::Lobatto,
        exactness_degree: 2 * n - 3,
    })
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("empty node set".into()));
    }
    for &t in nodes {
        if !t.is_finite() || !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("node {t} outside [0, 1]")));
        }
    }
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i] == nodes[j] {
                return Err(Error::InvalidArgument(format!(
                    "duplicate node {}",
                    nodes[i]
                )));
            }
        }
    }
    Ok(())
}

// Lagrange cardinal polynomial ℓ_i on the given nodes, evaluated at t.
pub(crate) fn lagrange(nodes: &[f64], i: usize, t: f64) -> f64 {
    let mut v = 1.0;
    for (j, &tj) in nodes.iter().enumerate() {
        if j != i {
            v *= (t - tj) / (nodes[i] - tj);
        }
    }
    v
}

/// Weights ωᵢ = ∫₀¹ ℓᵢ(t) dt of the interpolatory rule on the given nodes.
pub fn interpolatory_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    check_nodes(nodes)?;
    let k = nodes.len();
    // ℓ_i has degree k−1; a Gauss rule with ⌈k/2⌉ points is exact for it.
    let aux = gauss_rule(k / 2 + 1)?;
    Ok((0..k)
        .map(|i| aux.integrate(|t| lagrange(nodes, i, t)))
        .collect())
}

/// Largest degree d (up to `cap`) with |Σ ωᵢ τᵢ^d − 1/(d+1)| ≤ 1e−12 for all
/// degrees ≤ d.
pub fn measured_exactness(nodes: &[f64], weights: &[f64], cap: usize) -> usize {
    let mut degree = 0usize;
    for d in 0..=cap {
        let approx: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(&t, &w)| w * t.powi(d as i32))
            .sum();
        if (approx - 1.0 / (d as f64 + 1.0)).abs() > 1e-12 {
            break;
        }
        degree = d;
    }
    degree
}

/// Interpolatory rule on arbitrary distinct nodes, with measured exactness.
pub fn custom_rule(nodes: &[f64]) -> Result<QuadratureRule> {
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weights = interpolatory_weights(&sorted)?;
    let exactness = measured_exactness(&sorted, &weights, 2 * sorted.len() + 1);
    Ok(QuadratureRule {
        nodes: sorted,
        weights,
        family: NodeFamily::Custom,
        exactness_degree: exactness,
    })
}
