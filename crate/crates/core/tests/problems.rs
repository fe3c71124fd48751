use std::io::Write;

use ssd::problems::LinearProblemSpec;
use ssd::{
    dimer_hessian_apply, registry_get, ForceField, PositionVector, ProblemKind, ProblemRegistry,
};

fn pv(c: &[f64]) -> PositionVector {
    PositionVector::from_column_slice(c)
}

#[test]
fn stingray_force_is_minus_energy_gradient_on_grid() {
    let p = registry_get("stingray").unwrap();
    let h = 1e-5;
    for i in 0..5 {
        for j in 0..5 {
            let x = pv(&[-2.0 + i as f64, -2.0 + j as f64]);
            let f = p.force(&x);
            let mut fd = PositionVector::zeros(2);
            for d in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[d] += h;
                xm[d] -= h;
                fd[d] = -(p.energy(&xp).unwrap() - p.energy(&xm).unwrap()) / (2.0 * h);
            }
            let scale = f.norm().max(1.0);
            assert!((f - &fd).norm() <= 1e-6 * scale, "x = {x:?}");
        }
    }
}

#[test]
fn builtin_oracles_agree_with_dimer() {
    let ls = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    for name in ["stingray", "nongradient3", "cubic1d"] {
        let p = registry_get(name).unwrap();
        let n = p.dimension();
        let x = PositionVector::from_fn(n, |i, _| 0.3 - 0.45 * i as f64);
        let v = PositionVector::from_fn(n, |i, _| 1.0 + i as f64).normalize();
        let errs: Vec<f64> = ls
            .iter()
            .map(|&l| {
                (dimer_hessian_apply(&p, &x, &v, l).unwrap() - p.exact_hvp(&x, &v).unwrap()).norm()
            })
            .collect();
        if errs.iter().all(|e| *e <= 1e-11) {
            // Exact agreement: the force is a polynomial of degree <= 2.
            continue;
        }
        let slope = ssd::harness::loglog_slope(&ls, &errs);
        assert!(
            (1.9..=2.1).contains(&slope),
            "{name}: slope {slope}, errors {errs:?}"
        );
    }
}

#[test]
fn gradient_problems_have_symmetric_hessians() {
    let p = registry_get("stingray").unwrap();
    let x = pv(&[0.7, -1.3]);
    let (v, w) = (pv(&[0.2, 0.9]), pv(&[-1.1, 0.4]));
    let a = v.dot(&p.exact_hvp(&x, &w).unwrap());
    let b = w.dot(&p.exact_hvp(&x, &v).unwrap());
    assert!((a - b).abs() <= 1e-12);
}

#[test]
fn nongradient3_jacobian_is_asymmetric() {
    let p = registry_get("nongradient3").unwrap();
    assert_eq!(p.kind(), ProblemKind::NonGradient);
    let x = pv(&[0.1, 0.2, 0.3]);
    let (v, w) = (pv(&[1.0, 0.0, 0.0]), pv(&[0.0, 1.0, 0.0]));
    let a = v.dot(&p.exact_hvp(&x, &w).unwrap());
    let b = w.dot(&p.exact_hvp(&x, &v).unwrap());
    assert!((a - b).abs() > 0.5, "expected asymmetry, got {a} vs {b}");
}

#[test]
fn builtin_initial_conditions() {
    let s = registry_get("stingray").unwrap();
    let ic = s.default_initial_condition(1).unwrap();
    assert_eq!(ic.x0.as_slice(), &[1.0, 1.0]);
    assert_eq!(ic.frame0.vectors()[0].as_slice(), &[0.0, 1.0]);
    let ng = registry_get("nongradient3").unwrap();
    let ic = ng.default_initial_condition(2).unwrap();
    assert_eq!(ic.x0.as_slice(), &[-1.0, 1.0, 0.0]);
    let r = 0.5f64.sqrt();
    assert!((&ic.frame0.vectors()[0] - pv(&[-r, r, 0.0])).norm() < 1e-15);
    assert!((&ic.frame0.vectors()[1] - pv(&[r, r, 0.0])).norm() < 1e-15);
}

#[test]
fn unknown_problem_lists_alternatives() {
    let err = registry_get("nope").unwrap_err().to_string();
    assert!(
        err.contains("stingray") && err.contains("nongradient3"),
        "{err}"
    );
}

#[test]
fn linear_problem_loads_from_json() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"{{"name":"skew","matrix":[[1,2],[-2,1]],"offset":[0.5,0]}}"#
    )
    .unwrap();
    let p = LinearProblemSpec::load(file.path()).unwrap();
    assert_eq!(p.name(), "skew");
    assert_eq!(p.kind(), ProblemKind::NonGradient);
    assert_eq!(p.force(&pv(&[1.0, 1.0])).as_slice(), &[3.5, -1.0]);

    let mut reg = ProblemRegistry::with_builtins();
    reg.register(p);
    assert!(reg.names().contains(&"skew".to_string()));
    assert!(reg.get("skew").is_ok());
}

#[test]
fn registry_is_shareable_across_threads() {
    let p = registry_get("nongradient3").unwrap();
    let x = pv(&[0.3, -0.2, 0.9]);
    let expected = p.force(&x);
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| assert_eq!(p.force(&x), expected));
        }
    });
}
