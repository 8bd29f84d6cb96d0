//! Reduction of the k-stage HBVM system to block size s and the blended
//! iteration that solves it with a single 2m×2m factorization per step.
//!
//! Splitting the abscissae into s fundamental and k − s silent ones turns the
//! stage equations into a system in the fundamental stages only, with
//! coefficient matrix C = B₁ + B₂A₁ whose spectrum equals that of X_s for
//! every admissible choice of the fundamental set. The blended iteration
//! mixes the two equivalent Newton formulations with weights θ = I_s ⊗ Φ⁻¹,
//! Φ = I − hγJ₀, and is L-convergent when γ is the smallest eigenvalue
//! modulus of C.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::OdeSystem;
use crate::tableau::HbvmTableau;

/// Fundamental/silent splitting of a tableau with the derived matrices:
/// A₁ = I_s2 I_s1⁻¹, û = u − A₁e, B₁ = I_s1 P_s1ᵀ Ω₁, B₂ = I_s1 P_s2ᵀ Ω₂ and
/// C = B₁ + B₂A₁.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub fundamental_idx: Vec<usize>,
    pub silent_idx: Vec<usize>,
    pub a1: DMatrix<f64>,
    pub u_hat: DVector<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// False when the abscissa count minus s is odd, in which case the
    /// closest-node rule cannot produce a symmetric fundamental set.
    pub symmetry_guaranteed: bool,
}

/// How to pick fundamental abscissae in parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Nodes closest to the equidistributed references j/(s+1).
    RuleOfThumb,
    /// The first s abscissae; ill-conditioned for large k, kept for study.
    FirstS,
}

/// Pick the fundamental abscissae as the distinct nodes nearest to the
/// reference points τ̂ⱼ = j/(s+1), ties resolved toward the smaller node and
/// conflicts toward the next unused node in order of increasing j.
pub fn select_fundamental(t: &HbvmTableau) -> Result<Partition> {
    let nodes = t.nodes();
    let n = nodes.len();
    let s = t.s;
    let mut used = vec![false; n];
    let mut fundamental = Vec::with_capacity(s);
    for j in 1..=s {
        let target = j as f64 / (s as f64 + 1.0);
        let mut best: Option<usize> = None;
        for (i, &node) in nodes.iter().enumerate() {
            if used[i] {
                continue;
            }
            // Nodes ascend, so strict `<` keeps the smaller node on a tie.
            let better = match best {
                None => true,
                Some(b) => (node - target).abs() < (nodes[b] - target).abs(),
            };
            if better {
                best = Some(i);
            }
        }
        let pick = best
            .ok_or_else(|| Error::Internal("fewer free abscissae than fundamental slots".into()))?;
        used[pick] = true;
        fundamental.push(pick);
    }
    fundamental.sort_unstable();
    partition_from_indices(t, &fundamental)
}

/// Build the partition for an explicit choice of fundamental abscissae.
pub fn partition_from_indices(t: &HbvmTableau, fundamental: &[usize]) -> Result<Partition> {
    let n = t.n_stages();
    let s = t.s;
    if fundamental.len() != s {
        return Err(Error::InvalidArgument(format!(
            "need exactly {s} fundamental indices, got {}",
            fundamental.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in fundamental {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument(format!(
                "fundamental index {i} out of range or repeated"
            )));
        }
        seen[i] = true;
    }
    let mut fundamental = fundamental.to_vec();
    fundamental.sort_unstable();
    let silent: Vec<usize> = (0..n).filter(|i| !seen[*i]).collect();
    let r = silent.len();

    let pick_rows =
        |m: &DMatrix<f64>, idx: &[usize]| DMatrix::from_fn(idx.len(), s, |i, j| m[(idx[i], j)]);
    let i_s1 = pick_rows(&t.i_mat, &fundamental);
    let i_s2 = pick_rows(&t.i_mat, &silent);
    let p_s1 = pick_rows(&t.p_mat, &fundamental);
    let p_s2 = pick_rows(&t.p_mat, &silent);
    let w1 = DMatrix::from_diagonal(&DVector::from_iterator(
        s,
        fundamental.iter().map(|&i| t.weights()[i]),
    ));
    let w2 = DMatrix::from_diagonal(&DVector::from_iterator(
        r,
        silent.iter().map(|&i| t.weights()[i]),
    ));

    let i_s1_inv = i_s1.clone().try_inverse().ok_or_else(|| {
        Error::Internal("fundamental basis-integral block I_s1 is singular".into())
    })?;
    let a1 = &i_s2 * &i_s1_inv;
    let u_hat = DVector::from_element(r, 1.0) - &a1 * DVector::from_element(s, 1.0);
    let b1 = &i_s1 * p_s1.transpose() * w1;
    let b2 = &i_s1 * p_s2.transpose() * w2;
    let c = &b1 + &b2 * &a1;

    Ok(Partition {
        fundamental_idx: fundamental,
        silent_idx: silent,
        a1,
        u_hat,
        b1,
        b2,
        c,
        symmetry_guaranteed: (n - s).is_multiple_of(2),
    })
}

/// Optimal blended parameter and the resulting maximum amplification factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalGamma {
    /// γ = min |μ| over the spectrum of C.
    pub gamma: f64,
    /// ρ* = 1 − cos(Arg μ_min).
    pub rho_star: f64,
}

/// γ = |μ_min(C)| with ρ* = 1 − cos(Arg μ_min).
pub fn optimal_gamma(c: &DMatrix<f64>) -> Result<OptimalGamma> {
    if c.nrows() == 0 || c.nrows() != c.ncols() {
        return Err(Error::InvalidArgument(
            "C must be square and nonempty".into(),
        ));
    }
    let ev = c.clone().complex_eigenvalues();
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mu_min = ev
        .iter()
        .copied()
        .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap();
    if !radius.is_finite() || mu_min.norm() <= 1e-14 * radius.max(1.0) {
        return Err(Error::InvalidArgument(
            "C is singular; no blended parameter exists".into(),
        ));
    }
    Ok(OptimalGamma {
        gamma: mu_min.norm(),
        rho_star: 1.0 - mu_min.arg().abs().cos(),
    })
}

/// Maximum over q = iy, y in `grid`, of the spectral radius of the blended
/// iteration matrix Z(q) = q (1 − γq)⁻² C⁻¹ (C − γI)².
pub fn amplification_scan(c: &DMatrix<f64>, gamma: f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() || grid.iter().any(|&y| y <= 0.0 || !y.is_finite()) {
        return Err(Error::InvalidArgument(
            "scan grid must be nonempty with positive finite entries".into(),
        ));
    }
    if gamma <= 0.0 || gamma.is_nan() {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let s = c.nrows();
    let shifted = c - DMatrix::<f64>::identity(s, s) * gamma;
    let w = c
        .clone()
        .lu()
        .solve(&(&shifted * &shifted))
        .ok_or_else(|| Error::InvalidArgument("C is singular".into()))?;
    // Z(q) is a complex scalar times the real matrix W, so its spectral
    // radius is |q (1 − γq)⁻²| · ρ(W).
    let rho_w = w
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(grid
        .iter()
        .map(|&y| {
            let q = Complex::new(0.0, y);
            let one = Complex::new(1.0, 0.0);
            (q / ((one - gamma * q) * (one - gamma * q))).norm() * rho_w
        })
        .fold(0.0, f64::max))
}

/// Parameters for the blended stage solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendedConfig {
    /// Blended parameter γ > 0.
    pub gamma: f64,
    /// Tolerance on the max-norm of the stage update and of the residual.
    pub newton_tol: f64,
    pub max_outer: usize,
    /// Inner sweeps per outer iteration; 1 gives the nonlinear variant.
    pub max_inner: usize,
}

impl BlendedConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            newton_tol: 1e-13,
            max_outer: 50,
            max_inner: 1,
        }
    }

    /// Configuration with the optimal γ for the partition's C matrix.
    pub fn optimal_for(part: &Partition) -> Result<Self> {
        Ok(Self::new(optimal_gamma(&part.c)?.gamma))
    }
}

/// Converged (or abandoned) stage data for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    /// Fundamental stage states, in fundamental-index order.
    pub fundamental: Vec<DVector<f64>>,
    /// All stage states in abscissa order.
    pub stages: Vec<DVector<f64>>,
    /// f evaluated at every stage, in abscissa order.
    pub derivatives: Vec<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the reduced residual at the returned stages.
    pub residual: f64,
}

// Shared view of the reduced (block size s) nonlinear system; also used by
// the simplified-Newton path in the integrator.
pub(crate) struct ReducedSystem<'a> {
    pub system: &'a dyn OdeSystem,
    pub part: &'a Partition,
    pub y0: DVector<f64>,
    pub h: f64,
}

impl ReducedSystem<'_> {
    pub fn eval_f(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(y.len());
        self.system.eval_into(y.as_slice(), out.as_mut_slice());
        out
    }

    /// Silent stages û ⊗ y₀ + A₁ ⊗ I y₁.
    pub fn silent_stages(&self, y1: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let part = self.part;
        (0..part.silent_idx.len())
            .map(|i| {
                let mut v = &self.y0 * part.u_hat[i];
                for (j, y) in y1.iter().enumerate() {
                    v.axpy(part.a1[(i, j)], y, 1.0);
                }
                v
            })
            .collect()
    }

    /// Residual blocks Fᵢ = y₁ᵢ − y₀ − h (B₁ f(y₁) + B₂ f(y₂))ᵢ together with
    /// the stage derivatives.
    #[allow(clippy::type_complexity)]
    pub fn residual(
        &self,
        y1: &[DVector<f64>],
        y2: &[DVector<f64>],
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let part = self.part;
        let f1: Vec<_> = y1.iter().map(|y| self.eval_f(y)).collect();
        let f2: Vec<_> = y2.iter().map(|y| self.eval_f(y)).collect();
        let res = (0..y1.len())
            .map(|i| {
                let mut v = &y1[i] - &self.y0;
                for (j, f) in f1.iter().enumerate() {
                    v.axpy(-self.h * part.b1[(i, j)], f, 1.0);
                }
                for (l, f) in f2.iter().enumerate() {
                    v.axpy(-self.h * part.b2[(i, l)], f, 1.0);
                }
                v
            })
            .collect();
        (res, f1, f2)
    }

    /// Stage states and derivatives in abscissa order.
    #[allow(clippy::type_complexity)]
    pub fn assemble(
        &self,
        y1: &[DVector<f64>],
        y2: &[DVector<f64>],
        f1: &[DVector<f64>],
        f2: &[DVector<f64>],
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let part = self.part;
        let n = part.fundamental_idx.len() + part.silent_idx.len();
        let d = self.y0.len();
        let mut stages = vec![DVector::zeros(d); n];
        let mut derivs = vec![DVector::zeros(d); n];
        for (pos, &idx) in part.fundamental_idx.iter().enumerate() {
            stages[idx] = y1[pos].clone();
            derivs[idx] = f1[pos].clone();
        }
        for (pos, &idx) in part.silent_idx.iter().enumerate() {
            stages[idx] = y2[pos].clone();
            derivs[idx] = f2[pos].clone();
        }
        (stages, derivs)
    }
}

fn block_amax(blocks: &[DVector<f64>]) -> f64 {
    blocks.iter().map(|b| b.amax()).fold(0.0, f64::max)
}

// The configured tolerance, floored at what f64 can attain when stage values
// reach the given magnitude (residuals are differences of O(scale) terms).
pub(crate) fn stop_threshold(tol: f64, scale: f64) -> f64 {
    tol.max(100.0 * f64::EPSILON * scale)
}

/// Solve the reduced stage system with the blended iteration.
///
/// One factorization of Φ = I − hγJ₀ per call; each outer iteration applies
/// θ = I_s ⊗ Φ⁻¹ to the blend of the two Newton right-hand sides. With
/// `max_inner == 1` this is the nonlinear variant (ψ refreshed every sweep);
/// larger values run the stationary inner iteration on a frozen ψ.
pub fn solve_stages(
    system: &dyn OdeSystem,
    t: &HbvmTableau,
    part: &Partition,
    cfg: &BlendedConfig,
    y0: &[f64],
    h: f64,
) -> Result<StageSolution> {
    let d = system.dim();
    if y0.len() != d {
        return Err(Error::InvalidArgument(format!(
            "state length {} does not match system dimension {d}",
            y0.len()
        )));
    }
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(
            "step size must be finite and nonzero".into(),
        ));
    }
    if cfg.gamma <= 0.0 || cfg.gamma.is_nan() {
        return Err(Error::InvalidArgument(
            "blended gamma must be positive".into(),
        ));
    }
    if part.c.nrows() != t.s {
        return Err(Error::InvalidArgument(
            "partition does not match the tableau degree".into(),
        ));
    }

    let s = t.s;
    let y0 = DVector::from_column_slice(y0);
    let j0 = system.jacobian(y0.as_slice());
    let phi = DMatrix::identity(d, d) - &j0 * (h * cfg.gamma);
    let phi_lu = phi.lu();
    if !phi_lu.is_invertible() {
        return Err(Error::StepFailure {
            t: f64::NAN,
            residual: f64::INFINITY,
            reason: "blended weight matrix Phi is singular".into(),
        });
    }
    let c_lu = part.c.clone().lu();
    if !c_lu.is_invertible() {
        return Err(Error::Internal(
            "reduced coefficient matrix C is singular".into(),
        ));
    }

    let reduced = ReducedSystem {
        system,
        part,
        y0: y0.clone(),
        h,
    };
    let apply_theta = |blocks: &[DVector<f64>]| -> Vec<DVector<f64>> {
        blocks
            .iter()
            .map(|b| phi_lu.solve(b).expect("Phi factorization checked above"))
            .collect()
    };
    // (C⁻¹ ⊗ I) across stage blocks: stack blocks as the rows of an s×d
    // matrix and solve on the left.
    let apply_c_inv = |blocks: &[DVector<f64>]| -> Vec<DVector<f64>> {
        let m = DMatrix::from_fn(s, d, |i, j| blocks[i][j]);
        let solved = c_lu.solve(&m).expect("C factorization checked above");
        (0..s).map(|i| solved.row(i).transpose()).collect()
    };

    let mut y1 = vec![y0.clone(); s];
    let mut iterations = 0usize;
    let mut converged = false;
    let diverged_at = 1e12 * (1.0 + y0.amax());

    for _ in 0..cfg.max_outer {
        let y2 = reduced.silent_stages(&y1);
        let (f_res, _, _) = reduced.residual(&y1, &y2);
        let res_norm = block_amax(&f_res);
        if !res_norm.is_finite() || res_norm > diverged_at {
            break;
        }
        let threshold = stop_threshold(cfg.newton_tol, 1.0 + block_amax(&y1).max(block_amax(&y2)));
        if res_norm <= threshold {
            converged = true;
            break;
        }

        let psi1: Vec<DVector<f64>> = f_res.iter().map(|r| -r).collect();
        let psi2: Vec<DVector<f64>> = apply_c_inv(&psi1)
            .into_iter()
            .map(|b| b * cfg.gamma)
            .collect();
        // ψ = θψ₁ + (I − θ)ψ₂ = ψ₂ + Φ⁻¹(ψ₁ − ψ₂).
        let psi: Vec<DVector<f64>> = psi1
            .iter()
            .zip(&psi2)
            .map(|(a, b)| b + phi_lu.solve(&(a - b)).expect("Phi invertible"))
            .collect();

        let delta: Vec<DVector<f64>> = if cfg.max_inner <= 1 {
            apply_theta(&psi)
        } else {
            let mut delta = vec![DVector::zeros(d); s];
            for _ in 0..cfg.max_inner {
                // M δ = θ(δ − h C ⊗ J₀ δ) + γ(I − θ)(C⁻¹ ⊗ I δ − h J₀ δ).
                let jd: Vec<DVector<f64>> = delta.iter().map(|b| &j0 * b).collect();
                let t1: Vec<DVector<f64>> = (0..s)
                    .map(|i| {
                        let mut v = delta[i].clone();
                        for (j, jdj) in jd.iter().enumerate() {
                            v.axpy(-h * part.c[(i, j)], jdj, 1.0);
                        }
                        v
                    })
                    .collect();
                let cinv_delta = apply_c_inv(&delta);
                let t2: Vec<DVector<f64>> = (0..s)
                    .map(|i| (&cinv_delta[i] - &jd[i] * h) * cfg.gamma)
                    .collect();
                let m_delta: Vec<DVector<f64>> = (0..s)
                    .map(|i| {
                        let theta_t1 = phi_lu.solve(&t1[i]).expect("Phi invertible");
                        let theta_t2 = phi_lu.solve(&t2[i]).expect("Phi invertible");
                        theta_t1 + &t2[i] - theta_t2
                    })
                    .collect();
                let correction: Vec<DVector<f64>> = (0..s)
                    .map(|i| {
                        phi_lu
                            .solve(&(&m_delta[i] - &psi[i]))
                            .expect("Phi invertible")
                    })
                    .collect();
                for i in 0..s {
                    delta[i] -= &correction[i];
                }
            }
            delta
        };

        let update_norm = block_amax(&delta);
        for (y, dlt) in y1.iter_mut().zip(&delta) {
            *y += dlt;
        }
        iterations += 1;
        if update_norm <= threshold {
            converged = true;
            break;
        }
        if !update_norm.is_finite() || update_norm > diverged_at {
            break;
        }
    }

    let y2 = reduced.silent_stages(&y1);
    let (f_res, f1, f2) = reduced.residual(&y1, &y2);
    let residual = block_amax(&f_res);
    let (stages, derivatives) = reduced.assemble(&y1, &y2, &f1, &f2);
    Ok(StageSolution {
        fundamental: y1,
        stages,
        derivatives,
        iterations,
        converged,
        residual,
    })
}
