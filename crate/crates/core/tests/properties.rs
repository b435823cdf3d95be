use bcanneal::evolve::gibbs_state;
use bcanneal::io::{parse_problem, write_problem};
use bcanneal::lindblad::{davies_generator, liouvillian_apply, pauli_rates, BathSpec};
use bcanneal::model::{apply_crosstalk, decode_majority, gauge_transform, hamiltonian_at, qac_encode, IsingProblem, QacCode};
use bcanneal::ops::{c, hermitian_eigenvalues, hermiticity_defect, max_abs, min_eigenvalue, sigma_z_couplings, trace, Op, C64};
use bcanneal::spectral::{eigensystem, DEFAULT_GROUPING_TOL};
use proptest::prelude::*;

fn problem_strategy(max_n: usize) -> impl Strategy<Value = IsingProblem> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            prop::collection::vec(-2.0..2.0f64, n),
            prop::collection::vec(prop::option::of(-1.0..1.0f64), pairs),
            0.25..1.0f64,
        )
            .prop_map(move |(h, js, gamma)| {
                let keys = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
                let couplers: Vec<_> = keys.zip(js).filter_map(|(k, v)| v.map(|v| (k, v))).collect();
                IsingProblem::new(h, couplers, gamma).unwrap()
            })
    })
}

fn density_strategy(d: usize) -> impl Strategy<Value = Op> {
    prop::collection::vec(-1.0..1.0f64, 2 * d * d).prop_map(move |v| {
        let m = Op::from_fn(d, d, |i, j| C64::new(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
        let rho = &m * m.adjoint() + Op::identity(d, d) * c(1e-3);
        let tr = trace(&rho);
        rho / tr
    })
}

fn bath() -> BathSpec {
    BathSpec::from_millikelvin(5e-4, 13.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn problem_text_round_trip(p in problem_strategy(6)) {
        let mut buf = Vec::new();
        write_problem(&p, &mut buf).unwrap();
        let q = parse_problem(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn crosstalk_commutes_with_gauge(p in problem_strategy(5), chi in 0.0..0.1f64, mask in 0u32..32) {
        let g: Vec<i8> = (0..p.n()).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        let a = apply_crosstalk(&gauge_transform(&p, &g).unwrap(), chi).unwrap();
        let b = gauge_transform(&apply_crosstalk(&p, chi).unwrap(), &g).unwrap();
        for (x, y) in a.h().iter().zip(b.h()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for i in 0..p.n() {
            for j in i + 1..p.n() {
                prop_assert!((a.coupler(i, j) - b.coupler(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauge_preserves_spectrum(p in problem_strategy(4), mask in 0u32..16, a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let g: Vec<i8> = (0..p.n()).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        let e1 = hermitian_eigenvalues(hamiltonian_at(&p, a, b).unwrap().as_op());
        let e2 = hermitian_eigenvalues(hamiltonian_at(&gauge_transform(&p, &g).unwrap(), a, b).unwrap().as_op());
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn majority_decoding_corrects_minority_flips(
        logical in prop::collection::vec(0u8..2, 1..6),
        flips in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 6),
        penalty in prop::collection::vec(0u8..2, 6),
    ) {
        let code = QacCode::new(3, 0.2).unwrap();
        let mut physical = Vec::new();
        for (i, &b) in logical.iter().enumerate() {
            let flipped = flips[i].iter().filter(|&&f| f).count();
            for &f in &flips[i] {
                physical.push(b ^ u8::from(f && flipped < 2));
            }
            physical.push(penalty[i]);
        }
        prop_assert_eq!(decode_majority(&physical, &code).unwrap(), logical);
    }

    #[test]
    fn encoded_ground_state_decodes_to_logical_ground_state(p in problem_strategy(2)) {
        let code = QacCode::new(3, 0.5).unwrap();
        let enc = qac_encode(&p, &code).unwrap();
        let gs = p.ground_states(1e-9);
        for x in enc.ground_states(1e-9) {
            let bits = enc.bits_of(x);
            let dec = decode_majority(&bits, &code).unwrap();
            let idx = dec.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
            prop_assert!(gs.contains(&idx));
        }
    }

    #[test]
    fn liouvillian_is_linear_and_trace_preserving(
        p in problem_strategy(2),
        a in 0.1..20.0f64,
        b in 0.1..20.0f64,
        r1 in density_strategy(4),
        r2 in density_strategy(4),
        w in 0.0..1.0f64,
    ) {
        prop_assume!(p.n() == 2);
        let h = hamiltonian_at(&p, a, b).unwrap();
        let gen = davies_generator(&h, &sigma_z_couplings(2), &bath()).unwrap();
        let mix = &r1 * c(w) + &r2 * c(1.0 - w);
        let l1 = liouvillian_apply(&gen, &h, &r1).unwrap();
        let l2 = liouvillian_apply(&gen, &h, &r2).unwrap();
        let lm = liouvillian_apply(&gen, &h, &mix).unwrap();
        let scale = max_abs(&l1).max(max_abs(&l2)).max(1.0);
        prop_assert!(max_abs(&(lm - (l1.clone() * c(w) + l2 * c(1.0 - w)))) < 1e-12 * scale);
        prop_assert!(trace(&l1).norm() < 1e-12 * scale);
        prop_assert!(hermiticity_defect(&l1) < 1e-12 * scale);
    }

    #[test]
    fn pauli_generator_conserves_probability(p in problem_strategy(3), a in 0.1..20.0f64, b in 0.1..20.0f64) {
        let h = hamiltonian_at(&p, a, b).unwrap();
        let eig = eigensystem(&h, DEFAULT_GROUPING_TOL).unwrap();
        let r = pauli_rates(&eig, &sigma_z_couplings(p.n()), &bath());
        let q = r.generator();
        for n in 0..r.dim() {
            let col: f64 = q.column(n).sum();
            prop_assert!(col.abs() < 1e-12 * q.amax().max(1.0));
            for m in 0..r.dim() {
                if m != n {
                    prop_assert!(q[(m, n)] >= 0.0);
                }
            }
        }
        prop_assert!(r.detailed_balance_defect() < 1e-9);
    }

    #[test]
    fn gibbs_state_is_a_density_matrix(p in problem_strategy(3), a in 0.0..20.0f64, b in 0.0..20.0f64, beta in 0.01..5.0f64) {
        let h = hamiltonian_at(&p, a, b).unwrap();
        let g = gibbs_state(&h, beta).unwrap();
        prop_assert!((trace(&g.matrix) - c(1.0)).norm() < 1e-12);
        prop_assert!(min_eigenvalue(&g.matrix) > -1e-12);
        let hm = h.as_op();
        prop_assert!(max_abs(&(hm * &g.matrix - &g.matrix * hm)) < 1e-10 * (1.0 + max_abs(hm)));
    }
}
