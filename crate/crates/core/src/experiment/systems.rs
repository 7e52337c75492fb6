use super::GroundTruth;
use crate::polyalg::{MatrixPolynomial, Polynomial};

/// Names accepted by [`builtin`].
pub const BUILTIN_SYSTEMS: [&str; 5] = ["vanderpol", "integrator", "linear1d", "scalar-cubic", "actuated2d"];

fn col(entries: Vec<Polynomial>, n: usize) -> MatrixPolynomial {
    MatrixPolynomial::column(entries, n).expect("consistent variable count")
}

/// Controlled Van der Pol oscillator: `x1' = x2`, `x2' = -x1 + (1 - x1^2) x2 + u`.
pub fn vanderpol() -> GroundTruth {
    let x1 = Polynomial::var(2, 0);
    let x2 = Polynomial::var(2, 1);
    let f2 = &(&(-&x1) + &x2) - &(&(&x1 * &x1) * &x2);
    let f = col(vec![x2, f2], 2);
    let g = col(vec![Polynomial::zero(2), Polynomial::one(2)], 2);
    GroundTruth::new(f, g).expect("origin is an equilibrium")
}

/// `x' = u`.
pub fn integrator() -> GroundTruth {
    GroundTruth::new(col(vec![Polynomial::zero(1)], 1), col(vec![Polynomial::one(1)], 1)).expect("valid")
}

/// `x' = x + u`.
pub fn linear1d() -> GroundTruth {
    GroundTruth::new(col(vec![Polynomial::var(1, 0)], 1), col(vec![Polynomial::one(1)], 1)).expect("valid")
}

/// `x' = x^3 + u`.
pub fn scalar_cubic() -> GroundTruth {
    let x = Polynomial::var(1, 0);
    let f = col(vec![&(&x * &x) * &x], 1);
    GroundTruth::new(f, col(vec![Polynomial::one(1)], 1)).expect("valid")
}

/// Fully actuated two-state system with an unstable origin and cubic damping, so
/// open-loop trajectories stay bounded: `x1' = x1 - x1^3 + x2 + u1`, `x2' = x1^2 - x2^3 + u2`.
pub fn actuated2d() -> GroundTruth {
    let x1 = Polynomial::var(2, 0);
    let x2 = Polynomial::var(2, 1);
    let f1 = &(&(&x1 - &(&(&x1 * &x1) * &x1)) + &x2);
    let f2 = &(&x1 * &x1) - &(&(&x2 * &x2) * &x2);
    GroundTruth::new(col(vec![f1.clone(), f2], 2), MatrixPolynomial::identity(2, 2)).expect("valid")
}

pub fn builtin(name: &str) -> Option<GroundTruth> {
    Some(match name {
        "vanderpol" => vanderpol(),
        "integrator" => integrator(),
        "linear1d" => linear1d(),
        "scalar-cubic" => scalar_cubic(),
        "actuated2d" => actuated2d(),
        _ => return None,
    })
}
