//! Fixed-step time integration with HBVM tableaux: stage solvers, dense
//! output through the degree-s collocation polynomial, and trajectory
//! recording with invariant tracking.

use nalgebra::{DMatrix, DVector};

use crate::blended::{self, BlendedConfig, Partition, ReducedSystem, StageSolution};
use crate::error::{Error, Result};
use crate::legendre;
use crate::system::{HamiltonianSystem, OdeSystem};
use crate::tableau::HbvmTableau;

/// Nonlinear solver for the stage equations of one step.
pub enum StageSolver {
    /// Plain fixed-point sweeps on the full k-stage system; the reference
    /// oracle, convergent only for nonstiff h.
    FixedPoint { tol: f64, max_sweeps: usize },
    /// Simplified Newton on the reduced block-s system, with the Jacobian
    /// frozen at y₀ and one factorization per step.
    SimplifiedNewton {
        partition: Partition,
        tol: f64,
        max_iters: usize,
    },
    /// The blended iteration (one 2m×2m factorization per step).
    Blended {
        partition: Partition,
        config: BlendedConfig,
    },
}

impl StageSolver {
    /// Fixed-point solver with the default tolerance 1e−13 and 200 sweeps.
    pub fn fixed_point() -> Self {
        StageSolver::FixedPoint {
            tol: 1e-13,
            max_sweeps: 200,
        }
    }

    /// Simplified Newton with the rule-of-thumb fundamental abscissae.
    pub fn simplified_newton(t: &HbvmTableau) -> Result<Self> {
        Ok(StageSolver::SimplifiedNewton {
            partition: blended::select_fundamental(t)?,
            tol: 1e-13,
            max_iters: 50,
        })
    }

    /// Blended solver with the rule-of-thumb partition and optimal γ.
    pub fn blended(t: &HbvmTableau) -> Result<Self> {
        let partition = blended::select_fundamental(t)?;
        let config = BlendedConfig::optimal_for(&partition)?;
        Ok(StageSolver::Blended { partition, config })
    }

    /// The convergence tolerance the solver is configured with.
    pub fn tolerance(&self) -> f64 {
        match self {
            StageSolver::FixedPoint { tol, .. } => *tol,
            StageSolver::SimplifiedNewton { tol, .. } => *tol,
            StageSolver::Blended { config, .. } => config.newton_tol,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StageSolver::FixedPoint { .. } => "fixed_point",
            StageSolver::SimplifiedNewton { .. } => "simplified_newton",
            StageSolver::Blended { .. } => "blended",
        }
    }
}

/// Per-step solver statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// The collocation polynomial σ of one step:
/// σ(t₀ + τh) = y₀ + h Σⱼ γⱼ ∫₀^τ Pⱼ.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOutput {
    pub t0: f64,
    pub h: f64,
    y0: DVector<f64>,
    gamma: Vec<DVector<f64>>,
}

impl DenseOutput {
    /// Evaluate σ(t₀ + τh) for τ ∈ [0, 1]; extrapolation is rejected.
    pub fn eval(&self, tau: f64) -> Result<DVector<f64>> {
        if tau == 0.0 {
            return Ok(self.y0.clone());
        }
        let ints = legendre::integrate_basis(self.gamma.len(), tau)?;
        let mut y = self.y0.clone();
        for (g, w) in self.gamma.iter().zip(ints) {
            y.axpy(self.h * w, g, 1.0);
        }
        Ok(y)
    }

    /// The vector coefficients γⱼ of the expansion of σ̇ in the basis.
    pub fn gamma_coefficients(&self) -> &[DVector<f64>] {
        &self.gamma
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub y1: DVector<f64>,
    pub dense: DenseOutput,
    pub stats: StepStats,
}

fn solve_fixed_point(
    system: &dyn OdeSystem,
    t: &HbvmTableau,
    tol: f64,
    max_sweeps: usize,
    y0: &DVector<f64>,
    h: f64,
) -> StageSolution {
    let n = t.n_stages();
    let d = y0.len();
    let mut stages = vec![y0.clone(); n];
    let mut derivs = vec![DVector::zeros(d); n];
    let mut iterations = 0;
    let mut converged = false;
    let diverged_at = 1e12 * (1.0 + y0.amax());
    for _ in 0..max_sweeps {
        for (f, y) in derivs.iter_mut().zip(&stages) {
            system.eval_into(y.as_slice(), f.as_mut_slice());
        }
        let mut update = 0.0f64;
        let mut next = Vec::with_capacity(n);
        for (i, stage) in stages.iter().enumerate() {
            let mut y = y0.clone();
            for (l, f) in derivs.iter().enumerate() {
                y.axpy(h * t.a[(i, l)], f, 1.0);
            }
            update = update.max((&y - stage).amax());
            next.push(y);
        }
        stages = next;
        iterations += 1;
        let scale = 1.0 + stages.iter().map(|s| s.amax()).fold(0.0, f64::max);
        if update <= blended::stop_threshold(tol, scale) {
            converged = true;
            break;
        }
        if !update.is_finite() || update > diverged_at {
            break;
        }
    }
    for (f, y) in derivs.iter_mut().zip(&stages) {
        system.eval_into(y.as_slice(), f.as_mut_slice());
    }
    let mut residual = 0.0f64;
    for (i, stage) in stages.iter().enumerate() {
        let mut y = y0.clone();
        for (l, f) in derivs.iter().enumerate() {
            y.axpy(h * t.a[(i, l)], f, 1.0);
        }
        residual = residual.max((y - stage).amax());
    }
    StageSolution {
        fundamental: stages.clone(),
        stages,
        derivatives: derivs,
        iterations,
        converged,
        residual,
    }
}

fn solve_newton(
    system: &dyn OdeSystem,
    t: &HbvmTableau,
    part: &Partition,
    tol: f64,
    max_iters: usize,
    y0: &DVector<f64>,
    h: f64,
) -> Result<StageSolution> {
    let s = t.s;
    let d = y0.len();
    let j0 = system.jacobian(y0.as_slice());
    // I − h C ⊗ J₀, factored once per step.
    let mut m = DMatrix::zeros(s * d, s * d);
    for bi in 0..s {
        for bj in 0..s {
            let scale = -h * part.c[(bi, bj)];
            for r in 0..d {
                for c in 0..d {
                    m[(bi * d + r, bj * d + c)] = scale * j0[(r, c)];
                }
            }
        }
    }
    for i in 0..s * d {
        m[(i, i)] += 1.0;
    }
    let lu = m.lu();
    if !lu.is_invertible() {
        return Err(Error::StepFailure {
            t: f64::NAN,
            residual: f64::INFINITY,
            reason: "simplified-Newton matrix is singular".into(),
        });
    }

    let reduced = ReducedSystem {
        system,
        part,
        y0: y0.clone(),
        h,
    };
    let mut y1 = vec![y0.clone(); s];
    let mut iterations = 0;
    let mut converged = false;
    let diverged_at = 1e12 * (1.0 + y0.amax());
    for _ in 0..max_iters {
        let y2 = reduced.silent_stages(&y1);
        let (f_res, _, _) = reduced.residual(&y1, &y2);
        let res_norm = f_res.iter().map(|b| b.amax()).fold(0.0, f64::max);
        if !res_norm.is_finite() || res_norm > diverged_at {
            break;
        }
        let scale = 1.0 + y1.iter().chain(&y2).map(|b| b.amax()).fold(0.0, f64::max);
        let threshold = blended::stop_threshold(tol, scale);
        if res_norm <= threshold {
            converged = true;
            break;
        }
        let mut rhs = DVector::zeros(s * d);
        for (i, b) in f_res.iter().enumerate() {
            for r in 0..d {
                rhs[i * d + r] = -b[r];
            }
        }
        let delta = lu.solve(&rhs).expect("factorization checked above");
        let mut update = 0.0f64;
        for i in 0..s {
            for r in 0..d {
                y1[i][r] += delta[i * d + r];
                update = update.max(delta[i * d + r].abs());
            }
        }
        iterations += 1;
        if update <= threshold {
            converged = true;
            break;
        }
    }
    let y2 = reduced.silent_stages(&y1);
    let (f_res, f1, f2) = reduced.residual(&y1, &y2);
    let residual = f_res.iter().map(|b| b.amax()).fold(0.0, f64::max);
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

/// Advance one step of size h (h may be negative; quadrature and tableau are
/// h-independent). Stages solve the k-stage system to the solver tolerance;
/// the update is y₁ = y₀ + h Σ ωᵢ f(Yᵢ), i.e. σ(t₀ + h).
pub fn step(
    system: &dyn OdeSystem,
    t: &HbvmTableau,
    solver: &StageSolver,
    y0: &[f64],
    t0: f64,
    h: f64,
) -> Result<StepResult> {
    if y0.len() != system.dim() {
        return Err(Error::InvalidArgument(format!(
            "state length {} does not match system dimension {}",
            y0.len(),
            system.dim()
        )));
    }
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(
            "step size must be finite and nonzero".into(),
        ));
    }
    let y0v = DVector::from_column_slice(y0);
    let sol = match solver {
        StageSolver::FixedPoint { tol, max_sweeps } => {
            solve_fixed_point(system, t, *tol, *max_sweeps, &y0v, h)
        }
        StageSolver::SimplifiedNewton {
            partition,
            tol,
            max_iters,
        } => solve_newton(system, t, partition, *tol, *max_iters, &y0v, h)?,
        StageSolver::Blended { partition, config } => {
            blended::solve_stages(system, t, partition, config, y0, h).map_err(|e| match e {
                Error::StepFailure {
                    residual, reason, ..
                } => Error::StepFailure {
                    t: t0,
                    residual,
                    reason,
                },
                other => other,
            })?
        }
    };
    if !sol.converged {
        return Err(Error::StepFailure {
            t: t0,
            residual: sol.residual,
            reason: format!(
                "{} solver did not converge within its iteration budget",
                solver.name()
            ),
        });
    }

    let mut y1 = y0v.clone();
    for (l, f) in sol.derivatives.iter().enumerate() {
        y1.axpy(h * t.weights()[l], f, 1.0);
    }
    // γⱼ = Σ_l ω_l Pⱼ(τ_l) f_l, the quadrature form of the orthogonal
    // projection of σ̇ onto the basis.
    let gamma: Vec<DVector<f64>> = (0..t.s)
        .map(|j| {
            let mut g = DVector::zeros(y0.len());
            for (l, f) in sol.derivatives.iter().enumerate() {
                g.axpy(t.weights()[l] * t.p_mat[(l, j)], f, 1.0);
            }
            g
        })
        .collect();

    Ok(StepResult {
        y1,
        dense: DenseOutput {
            t0,
            h,
            y0: y0v,
            gamma,
        },
        stats: StepStats {
            iterations: sol.iterations,
            converged: sol.converged,
            residual: sol.residual,
        },
    })
}

/// Where and why an integration stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailureInfo {
    /// Index of the failed step (0-based).
    pub step: usize,
    pub t: f64,
    pub residual: f64,
    pub reason: String,
}

/// A fixed-step trajectory with recorded invariants and solver statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// One series per requested invariant, aligned with `states`.
    pub invariant_series: Vec<(String, Vec<f64>)>,
    pub iterations_per_step: Vec<usize>,
    /// Set when a step failed; the trajectory holds the partial result.
    pub failure: Option<StepFailureInfo>,
}

impl Trajectory {
    pub fn invariant(&self, name: &str) -> Option<&[f64]> {
        self.invariant_series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// CSV export: header `t,y_1..y_2m,<invariants>`, one row per state,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 1..=dim {
            out.push_str(&format!(",y_{i}"));
        }
        for (name, _) in &self.invariant_series {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (j, (t, y)) in self.times.iter().zip(&self.states).enumerate() {
            out.push_str(&format!("{t:.16e}"));
            for v in y.iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
            for (_, series) in &self.invariant_series {
                out.push_str(&format!(",{:.16e}", series[j]));
            }
            out.push('\n');
        }
        out
    }
}

/// Integrate n_steps of size h, recording the named invariants ("H" plus any
/// extras the system defines) at every state. A step failure stops the run
/// and is recorded on the returned partial trajectory.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    system: &HamiltonianSystem,
    t: &HbvmTableau,
    solver: &StageSolver,
    y0: &[f64],
    t0: f64,
    h: f64,
    n_steps: usize,
    record_invariants: &[&str],
) -> Result<Trajectory> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(
            "trajectory step size must be positive and finite".into(),
        ));
    }
    for name in record_invariants {
        if system.eval_invariant(name, y0).is_none() {
            return Err(Error::InvalidArgument(format!(
                "unknown invariant '{name}'"
            )));
        }
    }
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![DVector::from_column_slice(y0)],
        invariant_series: record_invariants
            .iter()
            .map(|name| {
                (
                    name.to_string(),
                    vec![system.eval_invariant(name, y0).unwrap()],
                )
            })
            .collect(),
        iterations_per_step: Vec::with_capacity(n_steps),
        failure: None,
    };
    let mut y = traj.states[0].clone();
    for j in 0..n_steps {
        let t_j = t0 + j as f64 * h;
        match step(system, t, solver, y.as_slice(), t_j, h) {
            Ok(res) => {
                y = res.y1;
                traj.times.push(t0 + (j + 1) as f64 * h);
                traj.states.push(y.clone());
                traj.iterations_per_step.push(res.stats.iterations);
                for (name, series) in traj.invariant_series.iter_mut() {
                    series.push(system.eval_invariant(name, y.as_slice()).unwrap());
                }
            }
            Err(Error::StepFailure {
                t: tf,
                residual,
                reason,
            }) => {
                traj.failure = Some(StepFailureInfo {
                    step: j,
                    t: tf,
                    residual,
                    reason,
                });
                break;
            }
            Err(other) => return Err(other),
        }
    }
    Ok(traj)
}
