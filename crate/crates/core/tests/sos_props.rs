use polystab::linalg::lambda_min;
use polystab::polyalg::{MatrixPolynomial, Monomial, Polynomial};
use polystab::sdpsolve::{check_solution, solve, SolveOptions};
use polystab::soscompile::{compile_sos_matrix, AffineMatrix, SdpInstance, VarAlloc};
use polystab::verify::gram_reconstruct;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sos_instance(m: &MatrixPolynomial) -> (SdpInstance, polystab::soscompile::GramBlock) {
    let mut alloc = VarAlloc::default();
    let g = compile_sos_matrix("m", &AffineMatrix::from_poly(m), &mut alloc).unwrap();
    let inst = SdpInstance {
        nvars: alloc.count(),
        blocks: vec![g.block.clone()],
        eqs: g.eqs.clone(),
        layout: alloc.layout().to_vec(),
        gram: vec![g.info("m", 0)],
        ..Default::default()
    };
    (inst, g)
}

/// `k x r` matrix with entries of degree at most `deg` in `n` variables.
fn tall_factor(n: usize, r: usize, deg: u32) -> impl Strategy<Value = MatrixPolynomial> {
    let monos = Monomial::all_up_to(n, 0, deg);
    let nm = monos.len();
    (r + 1..=r + 2).prop_flat_map(move |k| {
        let monos = monos.clone();
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, nm), k * r).prop_map(move |coeffs| {
            let entries = coeffs
                .iter()
                .map(|cs| {
                    Polynomial::from_terms(n, monos.iter().cloned().zip(cs.iter().map(|c| (c * 8.0).round() / 8.0)))
                        .unwrap()
                })
                .collect();
            MatrixPolynomial::from_entries(k, r, n, entries).unwrap()
        })
    })
}

fn gram_case() -> impl Strategy<Value = MatrixPolynomial> {
    (1usize..=2, 1usize..=3, 1u32..=2).prop_flat_map(|(n, r, d)| tall_factor(n, r, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `L^T L` is SOS by construction; the solve must succeed and every piece of the
    /// returned certificate must check out independently of the solver.
    #[test]
    fn gram_reduction_is_sound(l in gram_case(), seed in any::<u64>()) {
        let m = l.transpose().mul(&l).unwrap();
        let (inst, g) = sos_instance(&m);
        let half = m.degree().div_ceil(2);
        for slot in &g.slots {
            prop_assert!(slot.iter().all(|a| a.degree() <= half));
        }
        let opts = SolveOptions::default();
        let rep = solve(&inst, &opts);
        prop_assert!(rep.status.is_success(), "{:?}: {}", rep.status, rep.message);
        let v = rep.v.unwrap();
        let chk = check_solution(&inst, &v, 10.0 * opts.tol_feas);
        prop_assert!(chk.passes(), "min eig {} residual {}", chk.min_eig(), chk.max_eq_residual());

        let rebuilt = gram_reconstruct(&inst, &inst.gram[0], &v, m.nvars());
        let diff = rebuilt.max_coeff_diff(&m).unwrap();
        prop_assert!(diff <= 1e-6, "reconstruction differs by {}", diff);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x: Vec<f64> = (0..m.nvars()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lm = lambda_min(&rebuilt.eval(&x));
            prop_assert!(lm >= -1e-7, "lambda_min {} at {:?}", lm, x);
        }
    }

    #[test]
    fn solves_are_deterministic(l in gram_case()) {
        let m = l.transpose().mul(&l).unwrap();
        let (inst, _) = sos_instance(&m);
        let a = solve(&inst, &SolveOptions::default());
        let b = solve(&inst, &SolveOptions::default());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert_eq!(a.v, b.v);
    }
}

#[test]
fn perturbation_is_localised_by_check_solution() {
    let x = Polynomial::var(1, 0);
    let one = Polynomial::one(1);
    let m =
        MatrixPolynomial::from_entries(2, 2, 1, vec![one.clone(), x.clone(), x.clone(), &(&x * &x) + &one]).unwrap();
    let (inst, _) = sos_instance(&m);
    let rep = solve(&inst, &SolveOptions::default());
    let mut v = rep.v.unwrap();
    assert!(check_solution(&inst, &v, 1e-7).passes());
    v[0] += 1e-3;
    let chk = check_solution(&inst, &v, 1e-7);
    assert!(!chk.passes());
    let rows = chk.violated_rows();
    assert!(!rows.is_empty());
    for &r in &rows {
        assert!(
            inst.eqs[r].terms.iter().any(|&(k, _)| k == 0),
            "row {r} does not involve the perturbed variable"
        );
    }
}

#[test]
fn zero_vector_violates_the_psd_floor_block() {
    use polystab::soscompile::PsdBlock;
    let inst = SdpInstance {
        nvars: 1,
        blocks: vec![
            PsdBlock {
                name: "free".into(),
                size: 1,
                constant: vec![(0, 0, 1.0)],
                linear: Vec::new(),
            },
            PsdBlock {
                name: "P_floor".into(),
                size: 1,
                constant: vec![(0, 0, -1e-3)],
                linear: vec![(0, 0, 0, 1.0)],
            },
        ],
        ..Default::default()
    };
    let chk = check_solution(&inst, &[0.0], 1e-9);
    assert_eq!(chk.violated_blocks(), vec!["P_floor"]);
}
