//! Shifted Legendre polynomial basis on [0, 1], normalized so that
//! ∫₀¹ Pᵢ(t) Pⱼ(t) dt = δᵢⱼ with deg Pⱼ = j − 1.
//!
//! The basis satisfies the three-term recurrence
//!
//! ```text
//! P₁(t) = 1,  P₂(t) = √3 (2t − 1),
//! P_{j+2}(t) = (2t−1) (2j+1)/(j+1) √((2j+3)/(2j+1)) P_{j+1}(t)
//!              − j/(j+1) √((2j+3)/(2j−1)) P_j(t),
//! ```
//!
//! and its antiderivatives close under the same family:
//! ∫₀ᶜ Pⱼ = ξⱼ P_{j+1}(c) − ξ_{j−1} P_{j−1}(c) for j ≥ 2, with
//! ∫₀ᶜ P₁ = ½ P₁(c) + ξ₁ P₂(c) and ξⱼ = 1 / (2 √((2j+1)(2j−1))).
//! This lets every basis integral be evaluated in closed form, without
//! numerical quadrature.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Values of the orthonormal basis P₁..P_s at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    /// Number of basis polynomials evaluated.
    pub degree_count: usize,
    /// `values[j-1]` holds Pⱼ(t).
    pub values: Vec<f64>,
}

/// The tridiagonal matrices that encode the action of integration on the
/// basis: `xs` is s×s, `xs_hat` is (s+1)×s (`xs` plus a ξ_s row), and
/// `xs_tilde` is (s+1)×(s+1) (`xs_hat` plus a zero column).
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatrices {
    pub xs: DMatrix<f64>,
    pub xs_hat: DMatrix<f64>,
    pub xs_tilde: DMatrix<f64>,
    /// ξⱼ for j = 1..s.
    pub xi: Vec<f64>,
}

/// ξⱼ = 1 / (2 √((2j+1)(2j−1))).
pub fn xi(j: usize) -> f64 {
    let j = j as f64;
    1.0 / (2.0 * ((2.0 * j + 1.0) * (2.0 * j - 1.0)).sqrt())
}

fn check_degree(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidArgument(
            "basis degree count s must be at least 1".into(),
        ));
    }
    Ok(())
}

// Forward three-term recurrence; stable on [0, 1] for the sizes used here.
fn recurrence(s: usize, t: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(s);
    v.push(1.0);
    if s >= 2 {
        v.push(3f64.sqrt() * (2.0 * t - 1.0));
    }
    for j in 1..s.saturating_sub(1) {
        let jf = j as f64;
        let a = (2.0 * t - 1.0) * (2.0 * jf + 1.0) / (jf + 1.0)
            * ((2.0 * jf + 3.0) / (2.0 * jf + 1.0)).sqrt();
        let b = jf / (jf + 1.0) * ((2.0 * jf + 3.0) / (2.0 * jf - 1.0)).sqrt();
        let next = a * v[j] - b * v[j - 1];
        v.push(next);
    }
    v
}

/// Evaluate P₁(t)..P_s(t).
pub fn eval_basis(s: usize, t: f64) -> Result<BasisEval> {
    check_degree(s)?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "basis evaluation point must be finite, got {t}"
        )));
    }
    Ok(BasisEval {
        degree_count: s,
        values: recurrence(s, t),
    })
}

/// Antiderivatives ∫₀ᶜ Pⱼ(x) dx for j = 1..s, in closed form.
pub fn integrate_basis(s: usize, c: f64) -> Result<Vec<f64>> {
    check_degree(s)?;
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidArgument(format!(
            "integration endpoint must lie in [0, 1], got {c}"
        )));
    }
    let p = recurrence(s + 1, c);
    let mut out = Vec::with_capacity(s);
    out.push(0.5 * p[0] + xi(1) * p[1]);
    for j in 2..=s {
        out.push(xi(j) * p[j] - xi(j - 1) * p[j - 2]);
    }
    Ok(out)
}

/// The n×s matrix Pⱼ(τᵢ) for a list of abscissae.
pub fn basis_matrix(s: usize, nodes: &[f64]) -> Result<DMatrix<f64>> {
    check_degree(s)?;
    let mut m = DMatrix::zeros(nodes.len(), s);
    for (i, &t) in nodes.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite abscissa {t}")));
        }
        let row = recurrence(s, t);
        for j in 0..s {
            m[(i, j)] = row[j];
        }
    }
    Ok(m)
}

/// The n×s matrix ∫₀^{τᵢ} Pⱼ for a list of abscissae.
pub fn integral_matrix(s: usize, nodes: &[f64]) -> Result<DMatrix<f64>> {
    check_degree(s)?;
    let mut m = DMatrix::zeros(nodes.len(), s);
    for (i, &t) in nodes.iter().enumerate() {
        let row = integrate_basis(s, t)?;
        for j in 0..s {
            m[(i, j)] = row[j];
        }
    }
    Ok(m)
}

/// Build X_s, X̂_s, X̃_s and the ξ coefficients.
pub fn structural_matrices(s: usize) -> Result<StructuralMatrices> {
    check_degree(s)?;
    let mut xs = DMatrix::zeros(s, s);
    xs[(0, 0)] = 0.5;
    for j in 1..s {
        xs[(j, j - 1)] = xi(j);
        xs[(j - 1, j)] = -xi(j);
    }
    let mut xs_hat = DMatrix::zeros(s + 1, s);
    xs_hat.view_mut((0, 0), (s, s)).copy_from(&xs);
    xs_hat[(s, s - 1)] = xi(s);
    let mut xs_tilde = DMatrix::zeros(s + 1, s + 1);
    xs_tilde.view_mut((0, 0), (s + 1, s)).copy_from(&xs_hat);
    Ok(StructuralMatrices {
        xs,
        xs_hat,
        xs_tilde,
        xi: (1..=s).map(xi).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Independent oracle: evaluate the classical (non-normalized) shifted
    // Legendre polynomials by their own recurrence and rescale.
    fn oracle_basis(s: usize, t: f64) -> Vec<f64> {
        let x = 2.0 * t - 1.0;
        let mut p = vec![1.0, x];
        for n in 1..s {
            let nf = n as f64;
            p.push(((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0));
        }
        (1..=s)
            .map(|j| ((2 * j - 1) as f64).sqrt() * p[j - 1])
            .collect()
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        rec(f, a, b, simpson(f, a, b), tol, 40)
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn eval_matches_stated_values() {
        let e = eval_basis(2, 0.7).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(e.values[1], 3f64.sqrt() * 0.4, epsilon = 1e-15);

        let e = eval_basis(1, 0.3).unwrap();
        assert_eq!(e.values, vec![1.0]);

        // Endpoint values are √(2j−1); checked against the direct-recurrence oracle.
        let e = eval_basis(3, 1.0).unwrap();
        let oracle = oracle_basis(3, 1.0);
        for j in 0..3 {
            assert_abs_diff_eq!(e.values[j], ((2 * j + 1) as f64).sqrt(), epsilon = 1e-14);
            assert_abs_diff_eq!(e.values[j], oracle[j], epsilon = 1e-14);
        }
    }

    #[test]
    fn eval_matches_oracle_on_grid() {
        for s in 1..=12 {
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                let got = eval_basis(s, t).unwrap().values;
                let want = oracle_basis(s, t);
                for j in 0..s {
                    assert_abs_diff_eq!(got[j], want[j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn endpoint_bound_holds() {
        for s in 1..=8 {
            for i in 0..=50 {
                let t = i as f64 / 50.0;
                let v = eval_basis(s, t).unwrap().values;
                for (j, &x) in v.iter().enumerate() {
                    let bound = ((2 * (j + 1) - 1) as f64).sqrt();
                    assert!(x.abs() <= bound + 1e-12, "s={s} t={t} j={j} |P|={x}");
                }
            }
        }
    }

    #[test]
    fn integrate_matches_stated_values() {
        assert_eq!(integrate_basis(1, 0.5).unwrap(), vec![0.5]);

        let v = integrate_basis(2, 1.0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);

        let v = integrate_basis(2, 0.5).unwrap();
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -(3f64.sqrt()) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn integrate_matches_quadrature_oracle() {
        for s in 1..=8 {
            for &c in &[0.0, 0.1, 0.37, 0.5, 0.93, 1.0] {
                let got = integrate_basis(s, c).unwrap();
                for j in 1..=s {
                    let num = adaptive_simpson(&|t| oracle_basis(j, t)[j - 1], 0.0, c, 1e-13);
                    assert_abs_diff_eq!(got[j - 1], num, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn derivative_of_integral_recovers_basis() {
        let h = 1e-6;
        for s in 1..=6 {
            for &c in &[0.2, 0.5, 0.8] {
                let upper = integrate_basis(s, c + h).unwrap();
                let lower = integrate_basis(s, c - h).unwrap();
                let vals = eval_basis(s, c).unwrap().values;
                for j in 0..s {
                    let d = (upper[j] - lower[j]) / (2.0 * h);
                    let scale = vals[j].abs().max(1.0);
                    assert!(
                        (d - vals[j]).abs() / scale <= 1e-6,
                        "s={s} c={c} j={j}: {d} vs {}",
                        vals[j]
                    );
                }
            }
        }
    }

    #[test]
    fn orthonormality_under_gauss_quadrature() {
        // Gauss rule with s points integrates P_i P_j (degree ≤ 2s−2) exactly.
        for s in 1..=8 {
            let rule = crate::quadrature::gauss_rule(s).unwrap();
            let mut gram = DMatrix::<f64>::zeros(s, s);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let v = eval_basis(s, t).unwrap().values;
                for i in 0..s {
                    for j in 0..s {
                        gram[(i, j)] += w * v[i] * v[j];
                    }
                }
            }
            for i in 0..s {
                for j in 0..s {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[(i, j)], want, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn structural_matrices_stated_values() {
        let m = structural_matrices(1).unwrap();
        assert_eq!(m.xs, DMatrix::from_row_slice(1, 1, &[0.5]));

        let m = structural_matrices(2).unwrap();
        assert_abs_diff_eq!(m.xi[0], 1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-16);

        // Eigenvalues 1/4 ± i/(4√3), solved by hand from λ² − λ/2 + 1/12.
        let ev = m.xs.complex_eigenvalues();
        let mut ev: Vec<_> = ev.iter().copied().collect();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert_abs_diff_eq!(ev[0].re, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].im, 0.1443375672974065, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[0].norm(), 1.0 / 12f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn blocks_are_nested() {
        for s in 1..=6 {
            let m = structural_matrices(s).unwrap();
            assert_eq!(m.xs, m.xs_hat.view((0, 0), (s, s)).into_owned());
            assert_eq!(m.xs_hat, m.xs_tilde.view((0, 0), (s + 1, s)).into_owned());
            assert!(m.xs_tilde.column(s).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn integral_matrix_equals_basis_times_xs_hat() {
        // ∫ relation on an arbitrary node set (k ≥ s+1 distinct points).
        let nodes = [0.04, 0.21, 0.33, 0.47, 0.55, 0.68, 0.79, 0.97];
        for s in 1..=5 {
            let i_mat = integral_matrix(s, &nodes).unwrap();
            let p_next = basis_matrix(s + 1, &nodes).unwrap();
            let hat = structural_matrices(s).unwrap().xs_hat;
            let diff = &i_mat - p_next * hat;
            assert!(diff.amax() <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(eval_basis(0, 0.5).is_err());
        assert!(eval_basis(3, f64::NAN).is_err());
        assert!(eval_basis(3, f64::INFINITY).is_err());
        assert!(integrate_basis(0, 0.5).is_err());
        assert!(integrate_basis(2, -0.1).is_err());
        assert!(integrate_basis(2, 1.1).is_err());
        assert!(integrate_basis(2, f64::NAN).is_err());
    }
}
