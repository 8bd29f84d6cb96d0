//! HBVM(k, s) Butcher tableaux A = I_s P_sᵀ Ω, the underlying collocation
//! tableaux, and the spectral / simplifying-assumption diagnostics.
//!
//! The tableau is assembled from the closed-form basis integrals, the basis
//! values at the abscissae and the quadrature weights; its rank is s and its
//! nonzero eigenvalues coincide with those of X_s, i.e. with the spectrum of
//! the Gauss-Legendre method of order 2s, for every admissible node set.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre;
use crate::quadrature::{self, QuadratureRule};

/// Abscissa family used to build a tableau. `Custom` nodes must induce an
/// interpolatory rule that is exact for degree 2s − 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Gauss,
    Lobatto,
    Custom(Vec<f64>),
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Gauss => "gauss",
            Family::Lobatto => "lobatto",
            Family::Custom(_) => "custom",
        }
    }
}

/// An HBVM(k, s) tableau together with its factors.
///
/// `a = i_mat · p_matᵀ · diag(ω)`, where `i_mat[(i, j)] = ∫₀^{τᵢ} Pⱼ` and
/// `p_mat[(i, j)] = Pⱼ(τᵢ)`. Gauss tableaux carry k abscissae, Lobatto
/// tableaux k + 1 (k counts steps, not nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct HbvmTableau {
    pub k: usize,
    pub s: usize,
    pub rule: QuadratureRule,
    pub a: DMatrix<f64>,
    pub i_mat: DMatrix<f64>,
    pub p_mat: DMatrix<f64>,
}

impl HbvmTableau {
    /// Number of abscissae (k for Gauss, k + 1 for Lobatto).
    pub fn n_stages(&self) -> usize {
        self.rule.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    /// JSON export with 17 significant digits per value.
    pub fn to_json(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let rows = (0..self.a.nrows())
            .map(|i| {
                let row: Vec<f64> = self.a.row(i).iter().copied().collect();
                format!("[{}]", list(&row))
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"k\":{},\"s\":{},\"family\":\"{}\",\"nodes\":[{}],\"weights\":[{}],\"A\":[{}]}}",
            self.k,
            self.s,
            self.rule.family.as_str(),
            list(&self.rule.nodes),
            list(&self.rule.weights),
            rows
        )
    }
}

/// A collocation tableau on arbitrary distinct nodes:
/// entries αᵢⱼ = ∫₀^{τᵢ} ℓⱼ(t) dt with interpolatory weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationTableau {
    pub nodes: Vec<f64>,
    pub a: DMatrix<f64>,
    pub weights: Vec<f64>,
}

/// Result of the W-transformation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WTransformReport {
    /// Max-entry norm of P⁻¹AP minus the (X̃_s ⊕ 0) block structure.
    pub residual: f64,
    /// 2-norm condition number of the basis-evaluation matrix P.
    pub p_condition: f64,
    /// Set when cond(P) > 1e12 and the residual is unreliable.
    pub conditioning_warning: bool,
}

/// Max-entry residuals of the simplifying assumptions C(s), B(2s), D(s−1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifyingResiduals {
    pub c_s: f64,
    pub b_2s: f64,
    pub d_sm1: f64,
}

fn rule_for(k: usize, s: usize, family: &Family) -> Result<QuadratureRule> {
    match family {
        Family::Gauss => quadrature::gauss_rule(k),
        Family::Lobatto => quadrature::lobatto_rule(k + 1),
        Family::Custom(nodes) => {
            if nodes.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "custom family needs exactly k = {k} abscissae, got {}",
                    nodes.len()
                )));
            }
            let rule = quadrature::custom_rule(nodes)?;
            if !rule.satisfies_b(2 * s) {
                return Err(Error::PreconditionViolation(format!(
                    "custom nodes give exactness degree {}, but B({}) needs {}",
                    rule.exactness_degree,
                    2 * s,
                    2 * s - 1
                )));
            }
            Ok(rule)
        }
    }
}

/// Build the HBVM(k, s) tableau for the requested abscissa family.
pub fn build_hbvm(k: usize, s: usize, family: Family) -> Result<HbvmTableau> {
    if s == 0 || k < s {
        return Err(Error::InvalidArgument(format!(
            "need k >= s >= 1, got k = {k}, s = {s}"
        )));
    }
    let rule = rule_for(k, s, &family)?;
    let i_mat = legendre::integral_matrix(s, &rule.nodes)?;
    let p_mat = legendre::basis_matrix(s, &rule.nodes)?;
    let omega = DMatrix::from_diagonal(&DVector::from_column_slice(&rule.weights));
    let a = &i_mat * p_mat.transpose() * omega;
    Ok(HbvmTableau {
        k,
        s,
        rule,
        a,
        i_mat,
        p_mat,
    })
}

/// Build the k-stage collocation tableau on the given distinct nodes.
pub fn build_collocation(nodes: &[f64]) -> Result<CollocationTableau> {
    let weights = quadrature::interpolatory_weights(nodes)?;
    let n = nodes.len();
    // ℓ_j has degree n−1, so a Gauss rule with ⌈n/2⌉ points reproduces each
    // ∫₀^{τᵢ} ℓⱼ exactly.
    let aux = quadrature::gauss_rule(n / 2 + 1)?;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = aux.integrate_on(0.0, nodes[i], |t| quadrature::lagrange(nodes, j, t));
        }
    }
    Ok(CollocationTableau {
        nodes: nodes.to_vec(),
        a,
        weights,
    })
}

/// Sort complex numbers lexicographically by (re, im); the ordering the
/// spectral diagnostics use throughout.
pub fn sort_spectrum(ev: &mut [Complex<f64>]) {
    ev.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

/// The eigenvalues of A with modulus above 1e−8 times the spectral radius,
/// sorted by (re, im).
pub fn nonzero_spectrum(t: &HbvmTableau) -> Result<Vec<Complex<f64>>> {
    let ev = t.a.clone().complex_eigenvalues();
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !radius.is_finite() {
        return Err(Error::Internal("eigenvalue computation failed".into()));
    }
    let mut kept: Vec<Complex<f64>> = ev
        .iter()
        .copied()
        .filter(|z| z.norm() > 1e-8 * radius)
        .collect();
    sort_spectrum(&mut kept);
    Ok(kept)
}

/// Check A P = P (X̃_s ⊕ 0) with P the full n×n basis-evaluation matrix,
/// i.e. the W-transformation form of the tableau.
pub fn w_transformation_check(t: &HbvmTableau) -> Result<WTransformReport> {
    let n = t.n_stages();
    let p = legendre::basis_matrix(n, t.nodes())?;
    let svd = p.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let p_condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };

    let transformed = p
        .clone()
        .lu()
        .solve(&(&t.a * &p))
        .ok_or_else(|| Error::Internal("basis-evaluation matrix is singular".into()))?;

    let tilde = legendre::structural_matrices(t.s)?.xs_tilde;
    let m = (t.s + 1).min(n);
    let mut target = DMatrix::zeros(n, n);
    target
        .view_mut((0, 0), (m, m))
        .copy_from(&tilde.view((0, 0), (m, m)));
    let residual = (transformed - target).amax();
    Ok(WTransformReport {
        residual,
        p_condition,
        conditioning_warning: p_condition > 1e12,
    })
}

/// Residuals of C(s), B(2s) and the D(s−1) matrix identity
/// P_s I_sᵀ Ω V Q = e ēᵀ − D V.
pub fn simplifying_assumption_residuals(t: &HbvmTableau) -> SimplifyingResiduals {
    let nodes = t.nodes();
    let weights = t.weights();
    let n = t.n_stages();
    let s = t.s;

    // C(s): j · A τ^{j−1} = τ^j for j = 1..s.
    let mut c_s = 0.0f64;
    for j in 1..=s {
        let pow: DVector<f64> =
            DVector::from_iterator(n, nodes.iter().map(|&t| t.powi(j as i32 - 1)));
        let lhs = &t.a * pow * (j as f64);
        for i in 0..n {
            c_s = c_s.max((lhs[i] - nodes[i].powi(j as i32)).abs());
        }
    }

    // B(2s): weight exactness through degree 2s − 1.
    let mut b_2s = 0.0f64;
    for d in 0..2 * s {
        let q: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(&t, &w)| w * t.powi(d as i32))
            .sum();
        b_2s = b_2s.max((q - 1.0 / (d as f64 + 1.0)).abs());
    }

    // D(s−1) in the product form; empty for s = 1.
    let d_sm1 = if s == 1 {
        0.0
    } else {
        let v = DMatrix::from_fn(n, s - 1, |i, j| nodes[i].powi(j as i32));
        let q = DMatrix::from_diagonal(&DVector::from_iterator(s - 1, (1..s).map(|j| j as f64)));
        let omega = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
        let lhs = &t.p_mat * t.i_mat.transpose() * omega * &v * q;
        let ones = DMatrix::from_element(n, s - 1, 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(nodes));
        let rhs = ones - d * v;
        (lhs - rhs).amax()
    };

    SimplifyingResiduals { c_s, b_2s, d_sm1 }
}

/// Numerical rank of A at the given relative tolerance on singular values.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values
        .iter()
        .filter(|&&sv| sv > rel_tol * smax)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gauss_tableau(k: usize, s: usize) -> HbvmTableau {
        build_hbvm(k, s, Family::Gauss).unwrap()
    }

    #[test]
    fn one_stage_is_implicit_midpoint() {
        let t = gauss_tableau(1, 1);
        assert_abs_diff_eq!(t.a[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.weights()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn two_two_is_classical_gauss4() {
        let t = gauss_tableau(2, 2);
        let r3 = 3f64.sqrt();
        let want = [[0.25, 0.25 - r3 / 6.0], [0.25 + r3 / 6.0, 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(t.a[(i, j)], want[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn factorization_and_row_sums() {
        for (k, s, fam) in [
            (4usize, 2usize, Family::Gauss),
            (6, 2, Family::Gauss),
            (5, 3, Family::Lobatto),
            (8, 3, Family::Gauss),
        ] {
            let t = build_hbvm(k, s, fam).unwrap();
            let omega = DMatrix::from_diagonal(&DVector::from_column_slice(t.weights()));
            let diff = &t.a - &t.i_mat * t.p_mat.transpose() * omega;
            assert!(diff.amax() <= 1e-14);
            let rows = &t.a * DVector::from_element(t.n_stages(), 1.0);
            for (i, &tau) in t.nodes().iter().enumerate() {
                assert_abs_diff_eq!(rows[i], tau, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rank_and_zero_eigenvalues_of_wide_tableau() {
        let t = gauss_tableau(6, 2);
        assert_eq!(numerical_rank(&t.a, 1e-10), 2);
        let ev = t.a.clone().complex_eigenvalues();
        let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let zeros = ev.iter().filter(|z| z.norm() <= 1e-8 * radius).count();
        assert_eq!(zeros, 4);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn lobatto_two_two_is_lobatto_iiia4() {
        let t = build_hbvm(2, 2, Family::Lobatto).unwrap();
        assert_eq!(t.n_stages(), 3);
        let want = [
            [0.0, 0.0, 0.0],
            [5.0 / 24.0, 1.0 / 3.0, -1.0 / 24.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(t.a[(i, j)], want[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn collocation_single_node() {
        let c = build_collocation(&[0.5]).unwrap();
        assert_abs_diff_eq!(c.a[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn collocation_on_gauss2_is_gauss4() {
        let g = quadrature::gauss_rule(2).unwrap();
        let c = build_collocation(&g.nodes).unwrap();
        let t = gauss_tableau(2, 2);
        assert!((c.a - t.a).amax() <= 1e-13);
    }

    #[test]
    fn collocation_times_basis_equals_integrals() {
        for &(k, s) in &[(3usize, 2usize), (6, 2), (8, 3), (5, 5)] {
            let t = gauss_tableau(k, s);
            let c = build_collocation(t.nodes()).unwrap();
            let diff = &c.a * &t.p_mat - &t.i_mat;
            assert!(diff.amax() <= 1e-12, "k={k} s={s}: {}", diff.amax());
        }
    }

    #[test]
    fn collocation_row_sums_are_nodes() {
        let nodes = [0.1, 0.35, 0.62, 0.9];
        let c = build_collocation(&nodes).unwrap();
        let rows = &c.a * DVector::from_element(4, 1.0);
        for i in 0..4 {
            assert_abs_diff_eq!(rows[i], nodes[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn spectrum_examples() {
        let ev = nonzero_spectrum(&gauss_tableau(3, 1)).unwrap();
        assert_eq!(ev.len(), 1);
        assert_abs_diff_eq!(ev[0].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[0].im, 0.0, epsilon = 1e-12);

        let ev = nonzero_spectrum(&gauss_tableau(6, 2)).unwrap();
        assert_eq!(ev.len(), 2);
        assert_abs_diff_eq!(ev[0].re, 0.25, epsilon = 1e-11);
        assert_abs_diff_eq!(ev[0].im, -0.1443375672974065, epsilon = 1e-10);
        assert_abs_diff_eq!(ev[1].im, 0.1443375672974065, epsilon = 1e-10);

        // Lobatto HBVM(7,3) carries 8 abscissae; nonzero spectrum is eig X₃.
        let t = build_hbvm(7, 3, Family::Lobatto).unwrap();
        assert_eq!(t.n_stages(), 8);
        let got = nonzero_spectrum(&t).unwrap();
        let xs = legendre::structural_matrices(3).unwrap().xs;
        let mut want: Vec<_> = xs.complex_eigenvalues().iter().copied().collect();
        sort_spectrum(&mut want);
        assert_eq!(got.len(), 3);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() <= 1e-10);
        }
    }

    #[test]
    fn w_transformation_residuals() {
        let r = w_transformation_check(&gauss_tableau(2, 2)).unwrap();
        assert!(r.residual <= 1e-12, "residual {}", r.residual);
        assert!(!r.conditioning_warning);

        let r = w_transformation_check(&gauss_tableau(6, 2)).unwrap();
        assert!(r.residual <= 1e-9);

        let r = w_transformation_check(&gauss_tableau(8, 3)).unwrap();
        assert!(r.residual <= 1e-9);
    }

    #[test]
    fn simplifying_assumptions_hold_for_gauss() {
        let r = simplifying_assumption_residuals(&gauss_tableau(4, 2));
        assert!(r.c_s <= 1e-12 && r.b_2s <= 1e-12 && r.d_sm1 <= 1e-12);

        let r = simplifying_assumption_residuals(&gauss_tableau(2, 2));
        assert!(r.c_s <= 1e-13 && r.b_2s <= 1e-13 && r.d_sm1 <= 1e-13);
    }

    #[test]
    fn custom_nodes_checked_against_b2s() {
        // Two equidistant nodes: trapezoid, exactness 1 < 3, so s = 2 is rejected.
        let err = build_hbvm(2, 2, Family::Custom(vec![0.0, 1.0])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exactness degree 1"), "{msg}");

        // Three equidistant nodes: Simpson, exactness 3, accepted for s = 2.
        let t = build_hbvm(3, 2, Family::Custom(vec![0.0, 0.5, 1.0])).unwrap();
        let r = simplifying_assumption_residuals(&t);
        assert!(r.b_2s <= 1e-13);
    }

    #[test]
    fn rejects_k_smaller_than_s() {
        assert!(build_hbvm(2, 3, Family::Gauss).is_err());
        assert!(build_hbvm(0, 0, Family::Gauss).is_err());
        assert!(build_hbvm(5, 2, Family::Custom(vec![0.0, 0.5, 1.0])).is_err());
    }

    #[test]
    fn filter_form_matches() {
        for &(k, s) in &[(2usize, 2usize), (4, 2), (6, 2), (8, 3)] {
            let t = gauss_tableau(k, s);
            let c = build_collocation(t.nodes()).unwrap();
            let omega = DMatrix::from_diagonal(&DVector::from_column_slice(t.weights()));
            let filtered = &c.a * &t.p_mat * t.p_mat.transpose() * omega;
            assert!((&t.a - filtered).amax() <= 1e-12, "k={k} s={s}");
        }
    }

    #[test]
    fn projection_identity_under_b2s() {
        for &(k, s) in &[(3usize, 2usize), (6, 2), (9, 4)] {
            let t = gauss_tableau(k, s);
            let p_next = legendre::basis_matrix(s + 1, t.nodes()).unwrap();
            let omega = DMatrix::from_diagonal(&DVector::from_column_slice(t.weights()));
            let prod = t.p_mat.transpose() * omega * p_next;
            for i in 0..s {
                for j in 0..s + 1 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prod[(i, j)], want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn invariant_subspace_relation() {
        for &(k, s) in &[(4usize, 2usize), (7, 3), (10, 4)] {
            let t = gauss_tableau(k, s);
            let p_next = legendre::basis_matrix(s + 1, t.nodes()).unwrap();
            let tilde = legendre::structural_matrices(s).unwrap().xs_tilde;
            let diff = &t.a * &p_next - p_next * tilde;
            assert!(diff.amax() <= 1e-11, "k={k} s={s}");
        }
    }

    #[test]
    fn json_export_shape() {
        let t = gauss_tableau(2, 2);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["k"], 2);
        assert_eq!(v["s"], 2);
        assert_eq!(v["family"], "gauss");
        assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
        assert_eq!(v["A"].as_array().unwrap().len(), 2);
        let a00 = v["A"][0][0].as_f64().unwrap();
        assert_abs_diff_eq!(a00, 0.25, epsilon = 1e-15);
        // 17 significant digits in the raw text.
        assert!(t.to_json().contains("2.5000000000000000e-1"));
    }
}
