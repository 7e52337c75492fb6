use polystab::polyalg::{MatrixPolynomial, Polynomial};
use polystab::sdpsolve::{check_solution, solve, SolveOptions, SolveStatus};
use polystab::soscompile::{compile_sos_matrix, AffineMatrix, EqRow, PsdBlock, SdpInstance, VarAlloc};

fn sos_instance(m: &MatrixPolynomial) -> SdpInstance {
    let mut alloc = VarAlloc::default();
    let g = compile_sos_matrix("m", &AffineMatrix::from_poly(m), &mut alloc).unwrap();
    SdpInstance {
        nvars: alloc.count(),
        blocks: vec![g.block],
        eqs: g.eqs,
        layout: alloc.layout().to_vec(),
        ..Default::default()
    }
}

#[test]
fn trace_minimisation_with_pinned_corner() {
    let inst = SdpInstance {
        nvars: 3,
        blocks: vec![PsdBlock {
            name: "q".into(),
            size: 2,
            constant: Vec::new(),
            linear: vec![(0, 0, 0, 1.0), (1, 0, 1, 1.0), (2, 1, 1, 1.0)],
        }],
        eqs: vec![EqRow {
            terms: vec![(0, 1.0)],
            rhs: 1.0,
        }],
        objective: vec![(0, 1.0), (2, 1.0)],
        ..Default::default()
    };
    let rep = solve(&inst, &SolveOptions::default());
    assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
    let v = rep.v.unwrap();
    assert!(
        (v[0] - 1.0).abs() < 1e-7 && v[1].abs() < 1e-4 && v[2].abs() < 1e-7,
        "{v:?}"
    );
}

#[test]
fn negative_constant_is_not_sos() {
    let m = MatrixPolynomial::from_entries(1, 1, 1, vec![Polynomial::constant(1, -1.0)]).unwrap();
    let rep = solve(&sos_instance(&m), &SolveOptions::default());
    assert_eq!(rep.status, SolveStatus::Infeasible);
}

#[test]
fn hand_gram_matrix_is_feasible() {
    let x = Polynomial::var(1, 0);
    let one = Polynomial::one(1);
    let m = MatrixPolynomial::from_entries(1 + 1, 2, 1, vec![one.clone(), x.clone(), x.clone(), &(&x * &x) + &one])
        .unwrap();
    let inst = sos_instance(&m);
    let rep = solve(&inst, &SolveOptions::default());
    assert_eq!(rep.status, SolveStatus::Feasible, "{rep:?}");
    assert!(check_solution(&inst, rep.v.as_ref().unwrap(), 1e-7).passes());
}

#[test]
fn motzkin_is_not_sos() {
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    let x2 = &x * &x;
    let y2 = &y * &y;
    let mut mz = &(&(&x2 * &x2) * &y2) + &(&(&x2 * &y2) * &y2);
    mz.add_scaled(&(&x2 * &y2), -3.0);
    mz.add_scaled(&Polynomial::one(2), 1.0);
    let m = MatrixPolynomial::from_entries(1, 1, 2, vec![mz]).unwrap();
    let rep = solve(&sos_instance(&m), &SolveOptions::default());
    assert_eq!(rep.status, SolveStatus::Infeasible, "{rep:?}");
}
