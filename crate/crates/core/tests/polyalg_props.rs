use polystab::basis::{build_power_vector, factorize, BasisSpec};
use polystab::polyalg::{MatrixPolynomial, Monomial, Polynomial};
use proptest::prelude::*;

const NVARS: usize = 3;

/// Small integer coefficients keep ring identities exact in floating point.
fn poly(nvars: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, nvars), -4i32..=4), 0..6).prop_map(move |terms| {
        let mut p = Polynomial::zero(nvars);
        for (exps, c) in terms {
            let total: u32 = exps.iter().sum();
            if total <= max_deg {
                p.add_scaled(&Polynomial::monomial(Monomial::from_exponents(&exps), c as f64), 1.0);
            }
        }
        p
    })
}

fn point(nvars: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, nvars)
}

fn column(nvars: usize, rows: usize, max_deg: u32) -> impl Strategy<Value = MatrixPolynomial> {
    prop::collection::vec(poly(nvars, max_deg), rows)
        .prop_map(move |entries| MatrixPolynomial::column(entries, nvars).unwrap())
}

/// Number of exponent vectors in `n` variables with total degree in `[dmin, dmax]`,
/// by walking every vector in the box `[0, dmax]^n`.
fn brute_count(n: usize, dmin: u32, dmax: u32) -> usize {
    let base = dmax as usize + 1;
    (0..base.pow(n as u32))
        .filter(|&code| {
            let mut c = code;
            let mut total = 0;
            for _ in 0..n {
                total += (c % base) as u32;
                c /= base;
            }
            (dmin..=dmax).contains(&total)
        })
        .count()
}

proptest! {
    #[test]
    fn multiplication_distributes(a in poly(NVARS, 3), b in poly(NVARS, 3), c in poly(NVARS, 3)) {
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
    }

    #[test]
    fn multiplication_associates(a in poly(NVARS, 2), b in poly(NVARS, 2), c in poly(NVARS, 2)) {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
    }

    #[test]
    fn addition_commutes_and_cancels(a in poly(NVARS, 3), b in poly(NVARS, 3)) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&(&a + &b) - &b, a);
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(a in poly(NVARS, 3), b in poly(NVARS, 3), x in point(NVARS)) {
        let lhs = (&a * &b).eval(&x);
        let rhs = a.eval(&x) * b.eval(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
        let sum = (&a + &b).eval(&x);
        prop_assert!((sum - a.eval(&x) - b.eval(&x)).abs() <= 1e-10 * (1.0 + sum.abs()));
    }

    #[test]
    fn jacobian_is_linear(
        u in column(NVARS, 3, 3),
        v in column(NVARS, 3, 3),
        alpha in -3i32..=3,
        beta in -3i32..=3,
    ) {
        let (alpha, beta) = (alpha as f64, beta as f64);
        let combo = u.scale(alpha).add(&v.scale(beta)).unwrap();
        let lhs = combo.jacobian().unwrap();
        let rhs = u.jacobian().unwrap().scale(alpha).add(&v.jacobian().unwrap().scale(beta)).unwrap();
        prop_assert_eq!(lhs.max_coeff_diff(&rhs).unwrap(), 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences(u in column(NVARS, 2, 4), x in point(NVARS)) {
        let jac = u.jacobian().unwrap().eval(&x);
        let h = 1e-5;
        for j in 0..NVARS {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (u.eval(&xp) - u.eval(&xm)) / (2.0 * h);
            for i in 0..2 {
                let scale = 1.0 + jac[(i, j)].abs() + u.eval(&x)[(i, 0)].abs();
                prop_assert!((fd[(i, 0)] - jac[(i, j)]).abs() <= 1e-6 * scale,
                    "d{}/dx{}: fd {} vs {}", i, j, fd[(i, 0)], jac[(i, j)]);
            }
        }
    }

    #[test]
    fn factor_matrix_reproduces_power_vector(
        n in 1usize..=3,
        zmin in 1u32..=2,
        extra in 0u32..=2,
        zhat_max in 1u32..=2,
        x in point(3),
    ) {
        let zmax = zmin + extra;
        let spec = BasisSpec::new(n, 1, zmin, zmax, zhat_max, None).unwrap();
        for i in 0..spec.h.rows() {
            let nonzero = (0..spec.h.cols()).filter(|&j| !spec.h.get(i, j).is_zero()).count();
            prop_assert_eq!(nonzero, 1, "row {} of H", i);
            let entry = (0..spec.h.cols()).map(|j| spec.h.get(i, j)).find(|p| !p.is_zero()).unwrap();
            prop_assert_eq!(entry.num_terms(), 1);
        }
        let x = &x[..n];
        let z = spec.z.eval(x);
        let hz = spec.h.eval(x) * spec.zhat.eval(x);
        for i in 0..z.nrows() {
            prop_assert!((z[(i, 0)] - hz[(i, 0)]).abs() <= 1e-10 * (1.0 + z[(i, 0)].abs()));
        }
    }
}

#[test]
fn power_vector_lengths_match_enumeration() {
    for n in 1..=4 {
        for dmax in 1..=5 {
            for dmin in 1..=dmax {
                let z = build_power_vector(n, dmin, dmax).unwrap();
                assert_eq!(z.rows(), brute_count(n, dmin, dmax), "n = {n}, degrees {dmin}..={dmax}");
                assert_eq!(z.cols(), 1);
            }
        }
    }
}

#[test]
fn power_vector_is_graded_and_duplicate_free() {
    let z = build_power_vector(3, 1, 4).unwrap();
    let degs: Vec<u32> = (0..z.rows()).map(|i| z.get(i, 0).degree()).collect();
    assert!(degs.windows(2).all(|w| w[0] <= w[1]));
    for i in 0..z.rows() {
        for j in 0..i {
            assert_ne!(z.get(i, 0), z.get(j, 0));
        }
    }
}

#[test]
fn bad_degree_ranges_are_rejected() {
    assert!(build_power_vector(2, 0, 2).is_err());
    assert!(build_power_vector(2, 3, 2).is_err());
}

#[test]
fn factorization_fails_without_a_divisor() {
    let z = build_power_vector(2, 1, 2).unwrap();
    let x1 = Polynomial::var(2, 0);
    let zhat = MatrixPolynomial::column(vec![x1], 2).unwrap();
    assert!(factorize(&z, &zhat).is_err());
}
