//! Benchmark Hamiltonian systems: a sextic one-degree-of-freedom potential,
//! the Fermi-Pasta-Ulam chain, a charged particle in a Biot-Savart field,
//! the Sitnikov three-body configuration, and a harmonic-oscillator smoke
//! test. Each ships its initial data, analytic gradient and, where cheap,
//! an analytic Hessian.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::system::HamiltonianSystem;

/// A named system with initial data and method-selection metadata.
pub struct ProblemSpec {
    pub name: &'static str,
    pub system: HamiltonianSystem,
    pub y0: Vec<f64>,
    pub default_h: f64,
    /// Degree ν when the Hamiltonian is polynomial.
    pub polynomial_degree: Option<u32>,
    pub parameters: Vec<(&'static str, f64)>,
}

impl ProblemSpec {
    /// Energy with a domain check: non-finite values (log singularities,
    /// collisions) surface as errors instead of NaN.
    pub fn energy(&self, y: &[f64]) -> Result<f64> {
        let v = self.system.energy(y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DomainError(format!(
                "Hamiltonian of '{}' is not finite at the given state",
                self.name
            )))
        }
    }

    /// Smallest Gauss k for which HBVM(k, s) conserves the (polynomial)
    /// Hamiltonian exactly: k ≥ νs/2.
    pub fn minimal_exact_gauss_k(&self, s: usize) -> Option<usize> {
        self.polynomial_degree
            .map(|nu| (nu as usize * s).div_ceil(2).max(s))
    }
}

/// One-degree-of-freedom system with the sextic polynomial Hamiltonian
/// H(q, p) = p³/3 − p/2 + q⁶/30 + q⁴/4 − q³/3 + 1/6, started at (q, p) = (0, 1)
/// so that H(y₀) = 0. Degree ν = 6.
pub fn faou_problem() -> ProblemSpec {
    let system = HamiltonianSystem::new(
        2,
        |y| {
            let (q, p) = (y[0], y[1]);
            p.powi(3) / 3.0 - p / 2.0 + q.powi(6) / 30.0 + q.powi(4) / 4.0 - q.powi(3) / 3.0
                + 1.0 / 6.0
        },
        |y, g| {
            let (q, p) = (y[0], y[1]);
            g[0] = q.powi(5) / 5.0 + q.powi(3) - q * q;
            g[1] = p * p - 0.5;
        },
    )
    .expect("even dimension")
    .with_hessian(|y| {
        let (q, p) = (y[0], y[1]);
        DMatrix::from_row_slice(
            2,
            2,
            &[q.powi(4) + 3.0 * q * q - 2.0 * q, 0.0, 0.0, 2.0 * p],
        )
    });
    ProblemSpec {
        name: "faou",
        system,
        y0: vec![0.0, 1.0],
        default_h: 0.16,
        polynomial_degree: Some(6),
        parameters: vec![],
    }
}

const FPU_PAIRS: usize = 3;
const FPU_OMEGA: f64 = 50.0;

// Displacements padded with the clamped ends q_0 = q_7 = 0.
fn fpu_padded(q: &[f64]) -> [f64; 2 * FPU_PAIRS + 2] {
    let mut qa = [0.0; 2 * FPU_PAIRS + 2];
    qa[1..=2 * FPU_PAIRS].copy_from_slice(q);
    qa
}

/// Fermi-Pasta-Ulam chain with three stiff pairs (ω = 50): quartic soft
/// springs between alternating mass points, quadratic stiff springs inside
/// each pair. Degree ν = 4, dimension 12, started from pᵢ = 0,
/// qᵢ = (i − 1)/10.
pub fn fpu_problem() -> ProblemSpec {
    let m = FPU_PAIRS;
    let dim = 4 * m;
    let system = HamiltonianSystem::new(
        dim,
        move |y| {
            let (q, p) = y.split_at(2 * m);
            let qa = fpu_padded(q);
            let kinetic: f64 = p.iter().map(|&v| v * v).sum::<f64>() / 2.0;
            let mut stiff = 0.0;
            for i in 1..=m {
                let d = qa[2 * i] - qa[2 * i - 1];
                stiff += d * d;
            }
            let mut soft = 0.0;
            for i in 0..=m {
                let e = qa[2 * i + 1] - qa[2 * i];
                soft += e.powi(4);
            }
            kinetic + FPU_OMEGA * FPU_OMEGA / 4.0 * stiff + soft
        },
        move |y, g| {
            let (q, p) = y.split_at(2 * m);
            let mut gq = [0.0; 2 * FPU_PAIRS + 2];
            let qa = fpu_padded(q);
            for i in 1..=m {
                let d = qa[2 * i] - qa[2 * i - 1];
                gq[2 * i] += FPU_OMEGA * FPU_OMEGA / 2.0 * d;
                gq[2 * i - 1] -= FPU_OMEGA * FPU_OMEGA / 2.0 * d;
            }
            for i in 0..=m {
                let e = qa[2 * i + 1] - qa[2 * i];
                gq[2 * i + 1] += 4.0 * e.powi(3);
                gq[2 * i] -= 4.0 * e.powi(3);
            }
            g[..2 * m].copy_from_slice(&gq[1..=2 * m]);
            for (gi, &pi) in g[2 * m..].iter_mut().zip(p) {
                *gi = pi;
            }
        },
    )
    .expect("even dimension")
    .with_hessian(move |y| {
        let q = &y[..2 * m];
        let qa = fpu_padded(q);
        let mut h = DMatrix::zeros(4 * m, 4 * m);
        // Padded-index pair contribution c·[[1, −1], [−1, 1]] restricted to
        // the interior unknowns.
        let mut add_pair = |a: usize, b: usize, c: f64| {
            let idx = |j: usize| (1..=2 * m).contains(&j).then(|| j - 1);
            if let Some(ia) = idx(a) {
                h[(ia, ia)] += c;
            }
            if let Some(ib) = idx(b) {
                h[(ib, ib)] += c;
            }
            if let (Some(ia), Some(ib)) = (idx(a), idx(b)) {
                h[(ia, ib)] -= c;
                h[(ib, ia)] -= c;
            }
        };
        for i in 1..=m {
            add_pair(2 * i - 1, 2 * i, FPU_OMEGA * FPU_OMEGA / 2.0);
        }
        for i in 0..=m {
            let e = qa[2 * i + 1] - qa[2 * i];
            add_pair(2 * i, 2 * i + 1, 12.0 * e * e);
        }
        for i in 2 * m..4 * m {
            h[(i, i)] = 1.0;
        }
        h
    });
    let q0: Vec<f64> = (1..=2 * m).map(|i| (i as f64 - 1.0) / 10.0).collect();
    let mut y0 = q0;
    y0.extend(std::iter::repeat_n(0.0, 2 * m));
    ProblemSpec {
        name: "fpu",
        system,
        y0,
        default_h: 0.05,
        polynomial_degree: Some(4),
        parameters: vec![("omega", FPU_OMEGA), ("pairs", m as f64)],
    }
}

const BIOT_ALPHA: f64 = -1.0; // e · B₀ with e = −1, B₀ = 1
const BIOT_MASS: f64 = 1.0;

/// Charged particle in a magnetic field with Biot-Savart potential:
/// H = [(ẋ − αx/ϱ²)² + (ẏ − αy/ϱ²)² + (ż + α log ϱ)²] / (2m̂), ϱ² = x² + y².
/// The (ẋ, ẏ, ż) entries are the canonical momenta exactly as written; no
/// Legendre transform is applied. Non-polynomial.
pub fn biot_problem() -> ProblemSpec {
    let system = HamiltonianSystem::new(
        6,
        |y| {
            let (x, yy, _z) = (y[0], y[1], y[2]);
            let rho2 = x * x + yy * yy;
            let u = y[3] - BIOT_ALPHA * x / rho2;
            let v = y[4] - BIOT_ALPHA * yy / rho2;
            let w = y[5] + BIOT_ALPHA * 0.5 * rho2.ln();
            (u * u + v * v + w * w) / (2.0 * BIOT_MASS)
        },
        |y, g| {
            let (x, yy) = (y[0], y[1]);
            let rho2 = x * x + yy * yy;
            let rho4 = rho2 * rho2;
            let u = y[3] - BIOT_ALPHA * x / rho2;
            let v = y[4] - BIOT_ALPHA * yy / rho2;
            let w = y[5] + BIOT_ALPHA * 0.5 * rho2.ln();
            let du_dx = -BIOT_ALPHA * (yy * yy - x * x) / rho4;
            let dv_dx = 2.0 * BIOT_ALPHA * x * yy / rho4;
            let dw_dx = BIOT_ALPHA * x / rho2;
            let du_dy = 2.0 * BIOT_ALPHA * x * yy / rho4;
            let dv_dy = -BIOT_ALPHA * (x * x - yy * yy) / rho4;
            let dw_dy = BIOT_ALPHA * yy / rho2;
            g[0] = (u * du_dx + v * dv_dx + w * dw_dx) / BIOT_MASS;
            g[1] = (u * du_dy + v * dv_dy + w * dw_dy) / BIOT_MASS;
            g[2] = 0.0;
            g[3] = u / BIOT_MASS;
            g[4] = v / BIOT_MASS;
            g[5] = w / BIOT_MASS;
        },
    )
    .expect("even dimension");
    ProblemSpec {
        name: "biot",
        system,
        y0: vec![0.5, 10.0, 0.0, -0.1, -0.3, 0.0],
        default_h: 0.1,
        polynomial_degree: None,
        parameters: vec![
            ("m", BIOT_MASS),
            ("e", -1.0),
            ("B0", 1.0),
            ("alpha", BIOT_ALPHA),
        ],
    }
}

const SITNIKOV_MASSES: [f64; 3] = [1.0, 1.0, 1e-5];
const SITNIKOV_G: f64 = 1.0;

/// Sitnikov configuration of the gravitational three-body problem: two unit
/// primaries on elliptic orbits and a planetoid of mass 1e−5 on the z-axis.
/// Dimension 18, momenta stored after positions; tracks the norm of the
/// total angular momentum as an extra invariant.
pub fn sitnikov_problem() -> ProblemSpec {
    let system = HamiltonianSystem::new(
        18,
        |y| {
            let (q, p) = y.split_at(9);
            let mut h = 0.0;
            for i in 0..3 {
                let pi = &p[3 * i..3 * i + 3];
                h += 0.5 * (pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2]) / SITNIKOV_MASSES[i];
            }
            for i in 0..3 {
                for j in 0..i {
                    let dx = q[3 * i] - q[3 * j];
                    let dy = q[3 * i + 1] - q[3 * j + 1];
                    let dz = q[3 * i + 2] - q[3 * j + 2];
                    let r = (dx * dx + dy * dy + dz * dz).sqrt();
                    h -= SITNIKOV_G * SITNIKOV_MASSES[i] * SITNIKOV_MASSES[j] / r;
                }
            }
            h
        },
        |y, g| {
            let (q, p) = y.split_at(9);
            g.fill(0.0);
            for i in 0..3 {
                for j in 0..i {
                    let dx = q[3 * i] - q[3 * j];
                    let dy = q[3 * i + 1] - q[3 * j + 1];
                    let dz = q[3 * i + 2] - q[3 * j + 2];
                    let r2 = dx * dx + dy * dy + dz * dz;
                    let scale =
                        SITNIKOV_G * SITNIKOV_MASSES[i] * SITNIKOV_MASSES[j] / (r2 * r2.sqrt());
                    g[3 * i] += scale * dx;
                    g[3 * i + 1] += scale * dy;
                    g[3 * i + 2] += scale * dz;
                    g[3 * j] -= scale * dx;
                    g[3 * j + 1] -= scale * dy;
                    g[3 * j + 2] -= scale * dz;
                }
            }
            for i in 0..3 {
                for c in 0..3 {
                    g[9 + 3 * i + c] = p[3 * i + c] / SITNIKOV_MASSES[i];
                }
            }
        },
    )
    .expect("even dimension")
    .with_invariant("angular_momentum", |y| {
        let (q, p) = y.split_at(9);
        let mut l = [0.0; 3];
        for i in 0..3 {
            let (qi, pi) = (&q[3 * i..3 * i + 3], &p[3 * i..3 * i + 3]);
            l[0] += qi[1] * pi[2] - qi[2] * pi[1];
            l[1] += qi[2] * pi[0] - qi[0] * pi[2];
            l[2] += qi[0] * pi[1] - qi[1] * pi[0];
        }
        (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt()
    });
    let sq10 = 10f64.sqrt();
    let q0 = [-2.5, 0.0, 0.0, 2.5, 0.0, 0.0, 0.0, 0.0, 1e-9];
    let p0 = [0.0, -sq10 / 20.0, 0.0, 0.0, sq10 / 20.0, 0.0, 0.0, 0.0, 0.5];
    let mut y0 = q0.to_vec();
    y0.extend_from_slice(&p0);
    ProblemSpec {
        name: "sitnikov",
        system,
        y0,
        default_h: 0.5,
        polynomial_degree: None,
        parameters: vec![
            ("N", 3.0),
            ("G", SITNIKOV_G),
            ("m1", 1.0),
            ("m2", 1.0),
            ("m3", 1e-5),
            ("e", 0.75),
            ("d", 5.0),
            ("h", 0.5),
            ("t_max", 1500.0),
        ],
    }
}

/// m-dimensional harmonic oscillator H = (‖p‖² + ‖q‖²)/2 with y₀ = e₁;
/// the canonical smoke test with a closed-form solution.
pub fn harmonic_oscillator(m: usize) -> ProblemSpec {
    assert!(m >= 1, "harmonic oscillator needs m >= 1");
    let dim = 2 * m;
    let system = HamiltonianSystem::new(
        dim,
        |y| y.iter().map(|&v| v * v).sum::<f64>() / 2.0,
        |y, g| g.copy_from_slice(y),
    )
    .expect("even dimension")
    .with_hessian(move |_| DMatrix::identity(2 * m, 2 * m));
    let mut y0 = vec![0.0; dim];
    y0[0] = 1.0;
    ProblemSpec {
        name: "harmonic",
        system,
        y0,
        default_h: 0.1,
        polynomial_degree: Some(2),
        parameters: vec![("m", m as f64)],
    }
}

/// Exact harmonic-oscillator state at time t from y₀ = e₁:
/// q₁ = cos t, p₁ = −sin t, all other components zero.
pub fn harmonic_exact_state(m: usize, t: f64) -> Vec<f64> {
    let mut y = vec![0.0; 2 * m];
    y[0] = t.cos();
    y[m] = -t.sin();
    y
}

/// Look up a benchmark problem by CLI name.
pub fn by_name(name: &str) -> Option<ProblemSpec> {
    match name {
        "faou" => Some(faou_problem()),
        "fpu" => Some(fpu_problem()),
        "biot" => Some(biot_problem()),
        "sitnikov" => Some(sitnikov_problem()),
        "harmonic" => Some(harmonic_oscillator(1)),
        _ => None,
    }
}
