use nalgebra::DMatrix;
use polystab::basis::BasisSpec;
use polystab::experiment::{
    self, reconstruct_ab, simulate_experiment, DataSet, ExperimentConfig, InputSignal, NoiseModel,
};
use polystab::linalg;
use polystab::par::Execution;
use polystab::pipeline::synthesize;
use polystab::sdpsolve::SolveOptions;
use polystab::soscompile::{build, AffineMatrix, AffinePoly, Method, SynthesisOptions, SynthesisProblem};
use polystab::verify::lyapunov_audit;

fn noiseless(system: &str, zmax: u32, x0: Vec<f64>, tau: f64, samples: usize) -> (BasisSpec, DataSet) {
    let gt = experiment::builtin(system).unwrap();
    let spec = BasisSpec::new(gt.n(), gt.m(), 1, zmax, 1, None).unwrap();
    let cfg = ExperimentConfig {
        x0,
        input: InputSignal::Sine,
        t0: 0.0,
        tau,
        samples,
        noise: NoiseModel::None,
    };
    let ds = simulate_experiment(&gt, &spec, &cfg).unwrap();
    (spec, ds)
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials of degree at most `d` in `n` variables.
fn monomials(n: usize, d: u32) -> usize {
    binom(n + d as usize, d as usize)
}

fn count(method: Method, spec: &BasisSpec, ds: &DataSet, o: &SynthesisOptions) -> usize {
    build(&SynthesisProblem {
        method,
        spec,
        data: ds,
        options: o.clone(),
    })
    .unwrap()
    .decision_count()
}

#[test]
fn cor1_count_is_independent_of_samples_and_thm2_is_linear() {
    let o = SynthesisOptions::default();
    let mut cor1 = Vec::new();
    let mut thm2 = Vec::new();
    for t in [6, 9, 12] {
        let (spec, ds) = noiseless("vanderpol", 3, vec![-0.1, 0.1], 0.5, t);
        let (n, m, p) = (spec.n, spec.m, spec.p());
        let eps = monomials(n, o.deg_eps1) + monomials(n, o.deg_eps2);
        let per_entry = monomials(n, o.deg_yk);
        assert_eq!(
            count(Method::Cor1, &spec, &ds, &o),
            p * (p + 1) / 2 + m * p * per_entry + eps
        );
        assert_eq!(
            count(Method::Thm2, &spec, &ds, &o),
            p * (p + 1) / 2 + t * p * per_entry + eps
        );
        cor1.push(count(Method::Cor1, &spec, &ds, &o));
        thm2.push(count(Method::Thm2, &spec, &ds, &o));
    }
    assert!(cor1.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(thm2[1] - thm2[0], thm2[2] - thm2[1]);
    assert!(thm2[1] > thm2[0]);
}

#[test]
fn remark1_is_thm1_without_the_decoupled_input_rows() {
    let (spec, mut ds) = noiseless("scalar-cubic", 3, vec![0.5], 0.1, 8);
    ds.rb = Some(DMatrix::zeros(spec.n, spec.n));
    let o = SynthesisOptions {
        deg_eps2: 0,
        ..Default::default()
    };
    let mk = |method| {
        build(&SynthesisProblem {
            method,
            spec: &spec,
            data: &ds,
            options: o.clone(),
        })
        .unwrap()
    };
    let thm1 = mk(Method::Thm1);
    let remark1 = mk(Method::Remark1);
    let (p, q, t) = (spec.p(), spec.q(), ds.samples());
    let big = thm1.main_block();
    let small = remark1.main_block();
    assert_eq!(big.rows(), p + q + t);
    assert_eq!(small.rows(), p + t);
    assert_eq!(thm1.decision_count(), remark1.decision_count());

    // Rows p..p+q of the thm1 block couple to nothing and carry eps2 on the diagonal.
    let keep: Vec<usize> = (0..p).chain(p + q..p + q + t).collect();
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            let d = big.get(i, j).max_diff(small.get(a, b));
            assert!(d <= 1e-12, "entry ({i}, {j}) differs by {d}");
        }
    }
    let eps2_i = AffineMatrix::scalar_identity(&thm1.eps2, q);
    for i in p..p + q {
        for j in 0..big.cols() {
            let expected = if (p..p + q).contains(&j) {
                eps2_i.get(i - p, j - p).clone()
            } else {
                AffinePoly::zero(spec.n)
            };
            let d = big.get(i, j).max_diff(&expected);
            assert!(d <= 1e-12, "entry ({i}, {j}) differs by {d}");
        }
    }
}

#[test]
fn least_squares_estimate_recovers_the_true_matrices() {
    for (system, x0) in [
        ("integrator", vec![0.5]),
        ("scalar-cubic", vec![0.5]),
        ("actuated2d", vec![0.5, -0.5]),
    ] {
        let (spec, ds) = noiseless(system, 3, x0, 0.1, 12);
        let gt = experiment::builtin(system).unwrap();
        let (a, b) = reconstruct_ab(&gt, &spec).unwrap();
        let mut ba = DMatrix::zeros(spec.n, spec.q() + spec.big_n());
        ba.view_mut((0, 0), b.shape()).copy_from(&b);
        ba.view_mut((0, spec.q()), a.shape()).copy_from(&a);
        let s_star = &ds.x1 * linalg::pinv(&ds.wbar0, linalg::PINV_RTOL);
        let err = (&s_star - &ba).abs().max();
        assert!(err <= 1e-8, "{system}: |S* - [B A]| = {err:e}");
    }
}

#[test]
fn equality_residual_is_small_for_every_feasible_solve() {
    let (spec, mut ds) = noiseless("scalar-cubic", 3, vec![0.5], 0.1, 8);
    // Any bound at least |B| = 1 also admits B = 0, which cannot stabilise x^3.
    ds.rb = Some(DMatrix::from_element(1, 1, 0.1));
    for method in [Method::Thm1, Method::Remark1, Method::Thm2, Method::Lsq] {
        let out = synthesize(
            method,
            &spec,
            &ds,
            &SynthesisOptions::default(),
            &SolveOptions::default(),
        )
        .unwrap();
        let cert = out
            .certificate
            .unwrap_or_else(|| panic!("{method}: {} {:?}", out.report.status, out.extract_error));
        let r = cert.checks.equality_residual.unwrap();
        assert!(r <= 1e-6, "{method}: residual {r:e}");
        let direct = out.program.equalities[0].1.eval_vars(out.report.v.as_ref().unwrap());
        let max = direct.entries().iter().map(|e| e.max_abs_coeff()).fold(0.0, f64::max);
        assert_eq!(max, r);
    }
}

#[test]
fn thm2_and_cor1_pass_the_same_audit_on_noiseless_data() {
    let cases = [
        ("linear1d", 1, vec![0.3], 0.1, 12),
        ("scalar-cubic", 3, vec![0.5], 0.1, 12),
        ("actuated2d", 3, vec![0.5, -0.5], 0.2, 30),
    ];
    for (system, zmax, x0, tau, samples) in cases {
        let (spec, ds) = noiseless(system, zmax, x0, tau, samples);
        let gt = experiment::builtin(system).unwrap();
        for method in [Method::Thm2, Method::Cor1] {
            let out = synthesize(
                method,
                &spec,
                &ds,
                &SynthesisOptions::default(),
                &SolveOptions::default(),
            )
            .unwrap();
            let cert = out
                .certificate
                .unwrap_or_else(|| panic!("{system} {method}: {}", out.report.status));
            let audit = lyapunov_audit(&cert, &gt, 3.0, 2000, Execution::Sequential).unwrap();
            assert!(audit.passed(), "{system} {method}: {audit:?}");
        }
    }
}

#[test]
fn synthesis_is_deterministic() {
    let (spec, ds) = noiseless("scalar-cubic", 3, vec![0.5], 0.1, 8);
    for method in [Method::Thm2, Method::Cor1] {
        let run = || {
            let out = synthesize(
                method,
                &spec,
                &ds,
                &SynthesisOptions::default(),
                &SolveOptions::default(),
            )
            .unwrap();
            (out.instance, out.certificate.unwrap().to_json().unwrap())
        };
        let (ia, ca) = run();
        let (ib, cb) = run();
        assert_eq!(ia, ib);
        assert_eq!(ca, cb);
    }
}
