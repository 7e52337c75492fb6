//! Fixed-step RK4 integration and a Halton low-discrepancy point set.

use nalgebra::DVector;

/// One classical Runge-Kutta step of `x' = rhs(t, x)`.
pub fn rk4_step<F>(rhs: &F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = rhs(t, x);
    let k2 = rhs(t + h / 2.0, &(x + &k1 * (h / 2.0)));
    let k3 = rhs(t + h / 2.0, &(x + &k2 * (h / 2.0)));
    let k4 = rhs(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Point `index` (starting at 1) of the Halton sequence in `[-half, half]^dim`.
pub fn halton_point(index: u64, dim: usize, half: f64) -> Vec<f64> {
    assert!(
        dim <= PRIMES.len(),
        "Halton sequence supports up to {} dimensions",
        PRIMES.len()
    );
    (0..dim)
        .map(|d| (2.0 * radical_inverse(index, PRIMES[d]) - 1.0) * half)
        .collect()
}

/// `count` initial conditions on the boundary of the square `[-half, half]^2`,
/// equally spaced in angle starting at the corner `(half, half)`. For other
/// dimensions the points are spread over the faces of the cube.
pub fn boundary_ring(dim: usize, half: f64, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            if dim == 1 {
                return vec![if k % 2 == 0 { half } else { -half }];
            }
            let theta = std::f64::consts::FRAC_PI_4 + 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let mut dir = vec![0.0; dim];
            dir[0] = theta.cos();
            dir[1] = theta.sin();
            for (d, v) in dir.iter_mut().enumerate().skip(2) {
                *v = (theta * (d as f64)).sin() * 0.5;
            }
            let scale = half / dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            dir.iter().map(|v| v * scale).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential() {
        let rhs = |_t: f64, x: &DVector<f64>| -x;
        let mut x = DVector::from_element(1, 1.0);
        for k in 0..100 {
            x = rk4_step(&rhs, k as f64 * 0.01, &x, 0.01);
        }
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn halton_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        let p = halton_point(1, 2, 3.0);
        assert_eq!(p, vec![0.0, -1.0]);
    }

    #[test]
    fn ring_lies_on_boundary() {
        let pts = boundary_ring(2, 3.0, 10);
        assert_eq!(pts.len(), 10);
        assert!((pts[0][0] - 3.0).abs() < 1e-12 && (pts[0][1] - 3.0).abs() < 1e-12);
        for p in &pts {
            let m = p[0].abs().max(p[1].abs());
            assert!((m - 3.0).abs() < 1e-12);
        }
    }
}
