use proptest::prelude::*;

use skt::continuation::EventKind;
use skt::discretization::{jacobian, residual, ActiveParam, Grid, StateVector};
use skt::linear_analysis::{discrete_eigenvalue, eigenvalue, mode_polynomial, self_diffusion_polynomial, EigenFamily};
use skt::model::{classify_regime, preset, CaseTag, ModelParams, Params, Scalar};
use skt::output::{read_branch_csv, write_branch_csv, BranchRow};

fn params() -> impl Strategy<Value = ModelParams> {
    (
        (0.5..8.0f64, 0.5..8.0f64),
        (0.5..5.0f64, 0.5..5.0f64, 0.1..5.0f64, 0.1..5.0f64),
        (0.001..0.2f64, 0.001..0.2f64),
        (0.0..0.5f64, 0.0..0.5f64, 0.0..50.0f64, 0.0..50.0f64),
    )
        .prop_map(|((r1, r2), (a1, a2, b1, b2), (d1, d2), (d11, d22, d12, d21))| Params {
            r1,
            r2,
            a1,
            a2,
            b1,
            b2,
            d1,
            d2,
            d11,
            d22,
            d12,
            d21,
        })
}

fn state(nodes: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((0.05..3.0f64, 0.05..3.0f64), nodes).prop_map(move |uv| {
        let grid = Grid::new(nodes).unwrap();
        let mut it = uv.into_iter();
        StateVector::from_fn(grid, ActiveParam::D, 0.0, |_| it.next().unwrap())
    })
}

fn with_value(mut s: StateVector, p: &ModelParams) -> StateVector {
    s.value = p.d1;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobian_matches_central_differences(p in params(), s in state(9), dir in prop::collection::vec(-1.0..1.0f64, 18)) {
        let s = with_value(s, &p);
        let jv = jacobian(&p, &s).mul_vec(&dir);
        let eps = 1e-6;
        let shifted = |sign: f64| {
            let mut t = s.clone();
            t.values.iter_mut().zip(&dir).for_each(|(x, d)| *x += sign * eps * d);
            residual(&p, &t)
        };
        let (fp, fm) = (shifted(1.0), shifted(-1.0));
        let scale = jv.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..jv.len() {
            let fd = (fp[i] - fm[i]) / (2.0 * eps);
            prop_assert!((fd - jv[i]).abs() <= 1e-6 * scale, "row {i}: {fd} vs {}", jv[i]);
        }
    }

    #[test]
    fn residual_and_norms_commute_with_reflection(p in params(), s in state(11)) {
        let s = with_value(s, &p);
        let r = s.reflected();
        let fr = residual(&p, &r);
        let f = residual(&p, &s);
        let n = s.nodes();
        for i in 0..n {
            let j = n - 1 - i;
            prop_assert!((fr[2 * i] - f[2 * j]).abs() <= 1e-9 * (1.0 + f[2 * j].abs()));
            prop_assert!((fr[2 * i + 1] - f[2 * j + 1]).abs() <= 1e-9 * (1.0 + f[2 * j + 1].abs()));
        }
        let (a, b) = (s.l2_norms(), r.l2_norms());
        prop_assert!((a.0 - b.0).abs() <= 1e-14 * a.0 && (a.1 - b.1).abs() <= 1e-14 * a.1);
    }

    #[test]
    fn reported_bifurcation_values_are_roots(p in params(), k in 1usize..8) {
        prop_assume!(skt::model::coexistence_data(&p).is_ok());
        for r in [
            mode_polynomial(&p, k, EigenFamily::Continuous).unwrap(),
            self_diffusion_polynomial(&p, k, EigenFamily::Continuous).unwrap(),
        ] {
            let scale = r.a.abs() + r.b.abs() + r.c.abs();
            for root in r.roots() {
                let x = root.abs().max(1.0);
                prop_assert!(r.eval(root).abs() <= 1e-9 * scale * x * x);
            }
            if let Some(d) = r.d_bif {
                prop_assert!(r.bifurcates && d > 0.0);
                // Past the largest root P_k is positive again.
                prop_assert!(r.eval(2.0 * d + 1.0) > 0.0);
            }
        }
    }

    #[test]
    fn exact_and_float_classification_agree(p in params()) {
        let float = classify_regime(&p);
        let exact = classify_regime(&p.to_exact());
        if float.case != CaseTag::Boundary && exact.case != CaseTag::Boundary {
            prop_assert_eq!(float.regime, exact.regime);
            prop_assert_eq!(float.case, exact.case);
        }
        if let (Some(a), Some(b)) = (&float.alpha, &exact.alpha) {
            prop_assert!((a - b.to_f64()).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn discrete_eigenvalues_approach_continuous_ones(k in 1usize..6) {
        let err = |n: usize| eigenvalue(k, EigenFamily::Continuous).unwrap() - discrete_eigenvalue(k, 1.0 / (n - 1) as f64);
        let (coarse, fine) = (err(101), err(201));
        prop_assert!(coarse > 0.0 && fine > 0.0);
        let order = (coarse / fine).log2();
        prop_assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn decimal_config_values_are_exact(mantissa in -10_000_000i64..10_000_000, scale in 0u32..8) {
        let text = format!("{}", mantissa as f64 / 10f64.powi(scale as i32));
        let r = skt::config::parse_rational(&text).unwrap();
        prop_assert_eq!(r.to_f64(), text.parse::<f64>().unwrap());
    }

    #[test]
    fn branch_csv_round_trips(rows in prop::collection::vec(
        (any::<f64>(), 0.0..10.0f64, 0.0..10.0f64, 0usize..400, prop::option::of(0usize..3)), 0..40)
    ) {
        let rows: Vec<BranchRow> = rows
            .into_iter()
            .filter(|r| r.0.is_finite())
            .map(|(param, nu, nv, si, flag)| BranchRow {
                param,
                norm_u: nu,
                norm_v: nv,
                u0: nu * 0.5,
                v0: nv * 0.5,
                stability_index: si,
                min_u: nu / 3.0,
                min_v: nv / 7.0,
                event_flag: flag.map(|i| [EventKind::BranchPoint, EventKind::Fold, EventKind::Hopf][i]),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        write_branch_csv(&rows, &path).unwrap();
        prop_assert_eq!(read_branch_csv(&path).unwrap(), rows);
    }

    #[test]
    fn profile_csv_round_trips(s in state(13)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let back = StateVector::read_csv(&path, ActiveParam::D, 0.0).unwrap();
        prop_assert_eq!(back.values, s.values);
    }
}

#[test]
fn presets_are_admissible() {
    for i in 1..=4 {
        let p = preset(i).unwrap().to_f64();
        assert!(p.validate(false).is_ok());
        assert!(skt::model::coexistence_state(&p).admissible().is_some());
    }
}
