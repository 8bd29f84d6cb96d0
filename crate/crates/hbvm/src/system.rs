//! First-order systems and the canonical Hamiltonian wrapper ẏ = J∇H(y).
//!
//! The canonical structure matrix J = [[0, I_m], [−I_m, 0]] is applied
//! structurally — the vector field swaps and negates gradient halves — and is
//! never materialized.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A first-order ODE ẏ = f(y) with an (optionally approximated) Jacobian.
///
/// The solvers only need this interface; `HamiltonianSystem` is the main
/// implementor, but test-equation style systems can implement it directly.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// Evaluate f(y) into `out`.
    fn eval_into(&self, y: &[f64], out: &mut [f64]);

    /// Jacobian ∂f/∂y. Defaults to central finite differences with
    /// per-component step 1e−6 (1 + |yⱼ|).
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for j in 0..d {
            let step = 1e-6 * (1.0 + y[j].abs());
            yp[j] = y[j] + step;
            self.eval_into(&yp, &mut fp);
            yp[j] = y[j] - step;
            self.eval_into(&yp, &mut fm);
            yp[j] = y[j];
            for i in 0..d {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        jac
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessianFn = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A canonical Hamiltonian system on R^{2m}: energy, gradient, optional
/// analytic Hessian, and any number of named extra first integrals.
pub struct HamiltonianSystem {
    dim: usize,
    hamiltonian: ScalarFn,
    gradient: GradientFn,
    hessian: Option<HessianFn>,
    extra_invariants: Vec<(String, ScalarFn)>,
}

impl HamiltonianSystem {
    pub fn new(
        dim: usize,
        hamiltonian: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "phase-space dimension must be even and positive, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            hamiltonian: Box::new(hamiltonian),
            gradient: Box::new(gradient),
            hessian: None,
            extra_invariants: Vec::new(),
        })
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }

    pub fn with_invariant(
        mut self,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.extra_invariants.push((name.into(), Box::new(f)));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// m, with 2m the phase-space dimension.
    pub fn half_dim(&self) -> usize {
        self.dim / 2
    }

    pub fn energy(&self, y: &[f64]) -> f64 {
        (self.hamiltonian)(y)
    }

    pub fn gradient_into(&self, y: &[f64], out: &mut [f64]) {
        (self.gradient)(y, out)
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn hessian(&self, y: &[f64]) -> Option<DMatrix<f64>> {
        self.hessian.as_ref().map(|h| h(y))
    }

    /// Names of the recordable invariants: "H" plus any extras.
    pub fn invariant_names(&self) -> Vec<&str> {
        let mut names = vec!["H"];
        names.extend(self.extra_invariants.iter().map(|(n, _)| n.as_str()));
        names
    }

    /// Evaluate an invariant by name ("H" is the Hamiltonian itself).
    pub fn eval_invariant(&self, name: &str, y: &[f64]) -> Option<f64> {
        if name == "H" {
            return Some(self.energy(y));
        }
        self.extra_invariants
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f(y))
    }
}

impl OdeSystem for HamiltonianSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    // f = J ∇H: the q̇ half is ∇_p H, the ṗ half is −∇_q H.
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let m = self.dim / 2;
        let mut grad = vec![0.0; self.dim];
        (self.gradient)(y, &mut grad);
        out[..m].copy_from_slice(&grad[m..]);
        for i in 0..m {
            out[m + i] = -grad[i];
        }
    }

    // ∂f/∂y = J ∇²H when a Hessian is available; finite differences of f
    // otherwise.
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        match &self.hessian {
            Some(h) => {
                let hess = h(y);
                let m = self.dim / 2;
                let mut jac = DMatrix::zeros(self.dim, self.dim);
                jac.view_mut((0, 0), (m, self.dim))
                    .copy_from(&hess.view((m, 0), (m, self.dim)));
                let mut lower = jac.view_mut((m, 0), (m, self.dim));
                lower.copy_from(&hess.view((0, 0), (m, self.dim)));
                lower.neg_mut();
                jac
            }
            None => {
                // Fall back to the trait default.
                struct Fd<'a>(&'a HamiltonianSystem);
                impl OdeSystem for Fd<'_> {
                    fn dim(&self) -> usize {
                        self.0.dim
                    }
                    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
                        self.0.eval_into(y, out)
                    }
                }
                Fd(self).jacobian(y)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn oscillator() -> HamiltonianSystem {
        HamiltonianSystem::new(
            2,
            |y| 0.5 * (y[0] * y[0] + y[1] * y[1]),
            |y, g| {
                g[0] = y[0];
                g[1] = y[1];
            },
        )
        .unwrap()
    }

    #[test]
    fn vector_field_applies_canonical_structure() {
        let sys = oscillator();
        let mut f = vec![0.0; 2];
        sys.eval_into(&[3.0, 4.0], &mut f);
        // q̇ = p, ṗ = −q.
        assert_eq!(f, vec![4.0, -3.0]);
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let sys = oscillator();
        let jac = sys.jacobian(&[0.3, -0.7]);
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((jac - want).amax() <= 1e-9);

        let with_hess = oscillator().with_hessian(|_| DMatrix::identity(2, 2));
        let jac = with_hess.jacobian(&[0.3, -0.7]);
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((jac - want).amax() == 0.0);
    }

    #[test]
    fn invariants_by_name() {
        let sys = oscillator().with_invariant("parity", |y| y[0] - y[1]);
        assert_eq!(sys.invariant_names(), vec!["H", "parity"]);
        assert_abs_diff_eq!(sys.eval_invariant("H", &[1.0, 0.0]).unwrap(), 0.5);
        assert_abs_diff_eq!(sys.eval_invariant("parity", &[1.0, 0.0]).unwrap(), 1.0);
        assert!(sys.eval_invariant("missing", &[1.0, 0.0]).is_none());
    }

    #[test]
    fn rejects_odd_dimension() {
        assert!(HamiltonianSystem::new(3, |_| 0.0, |_, _| {}).is_err());
        assert!(HamiltonianSystem::new(0, |_| 0.0, |_, _| {}).is_err());
    }
}
