//! Acceptance suite. Each test covers one criterion and prints one
//! `[PASS]`/`[FAIL]` line per checked item; run with `-- --nocapture` to see
//! them all.

mod common;

use std::time::{Duration, Instant};

use common::{probe_vector, raw_directions, rel_err, report};
use ssd::algebra::{gram_schmidt, RawFrame, DEGENERACY_TOL};
use ssd::harness::{dyadic_ladder, DEFAULT_REF_TAU};
use ssd::{
    dimer_hessian_apply, householder_apply, registry_get, ConvergenceReport, Execution, Harness,
    OrthonormalFrame, PositionVector, ProbeQuantity, ProblemKind, ReferenceCache, SaddleConfig,
    Scheme,
};

const EULER_CR: (f64, f64) = (0.90, 1.15);
const RICHARDSON_CR: (f64, f64) = (1.85, 2.15);
const TABLE_TOL: f64 = 0.10;
const RICHARDSON_TABLE_TOL: f64 = 0.15;
const LEMMA_SLOPE_MIN: f64 = 1.8;

fn ladder(problem: &str, k: usize, scheme: Scheme) -> Result<ConvergenceReport, ssd::SsdError> {
    let p = registry_get(problem)?;
    let ic = p.default_initial_condition(k)?;
    let cfg = SaddleConfig::new(k, 1.0 / 32.0, p.kind());
    Harness::new(ReferenceCache::disabled(), Execution::default()).convergence_ladder(
        &p,
        &ic,
        &cfg,
        &dyadic_ladder(5, 8),
        DEFAULT_REF_TAU,
        scheme,
    )
}

fn print_table(r: &ConvergenceReport) {
    for line in r.to_markdown().lines() {
        println!("    {line}");
    }
}

/// Checks every rate of `r` against `window`; returns (all pass, detail).
fn rates_ok(r: &ConvergenceReport, window: (f64, f64)) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for row in r.rows.iter().skip(1) {
        for rate in [row.cr_x, row.cr_v] {
            let inside = rate.is_some_and(|c| c >= window.0 && c <= window.1);
            ok &= inside;
            parts.push(rate.map_or("blank".into(), |c| format!("{c:.3}")));
        }
    }
    (
        ok,
        format!(
            "CR (x,v per row) = [{}] in [{}, {}]",
            parts.join(", "),
            window.0,
            window.1
        ),
    )
}

fn within(id: &str, label: &str, got: f64, want: f64, tol: f64) -> bool {
    let e = rel_err(got, want);
    report(
        id,
        label,
        e <= tol,
        format!(
            "{got:.4e} vs {want:.2e} (rel err {:.1}% <= {:.0}%)",
            100.0 * e,
            100.0 * tol
        ),
    )
}

/// Runs one table; a divergent ladder is a failed criterion with its error shown.
fn table_checks(
    id: &str,
    problem: &str,
    k: usize,
    scheme: Scheme,
    ex_target: f64,
    ev_target: Option<f64>,
) -> bool {
    let window = match scheme {
        Scheme::Euler => EULER_CR,
        Scheme::Richardson => RICHARDSON_CR,
    };
    let tol = match scheme {
        Scheme::Euler => TABLE_TOL,
        Scheme::Richardson => RICHARDSON_TABLE_TOL,
    };
    let label = format!("{problem} k={k} {scheme}");
    match ladder(problem, k, scheme) {
        Ok(r) => {
            print_table(&r);
            let mut ok = within(
                id,
                &format!("{label} max_ex @2^-5"),
                r.rows[0].max_ex,
                ex_target,
                tol,
            );
            if let Some(ev) = ev_target {
                ok &= within(
                    id,
                    &format!("{label} max_ev @2^-5"),
                    r.rows[0].max_ev,
                    ev,
                    tol,
                );
            }
            let (pass, detail) = rates_ok(&r, window);
            ok & report(id, &format!("{label} rates"), pass, detail)
        }
        Err(e) => report(id, &label, false, format!("ladder failed: {e}")),
    }
}

#[test]
fn c1_table1_stingray_index1_euler() {
    let start = Instant::now();
    let ok = table_checks("C1", "stingray", 1, Scheme::Euler, 2.60e-2, None);
    let elapsed = start.elapsed();
    let fast = report(
        "C1",
        "runtime incl. 2^-13 reference",
        elapsed < Duration::from_secs(10),
        format!("{elapsed:.2?} < 10s"),
    );
    assert!(ok && fast);
}

#[test]
fn c2_table2_stingray_index2_euler() {
    let ok = table_checks("C2", "stingray", 2, Scheme::Euler, 1.50e-2, Some(3.90e-2));
    assert!(ok, "criterion 2 failed; see printed lines");
}

#[test]
fn c3_tables3_4_nongradient_euler() {
    let a = table_checks("C3", "nongradient3", 1, Scheme::Euler, 4.95e-2, None);
    let b = table_checks("C3", "nongradient3", 2, Scheme::Euler, 3.00e-2, None);
    assert!(a && b, "criterion 3 failed; see printed lines");
}

#[test]
fn c4_tables5_8_richardson() {
    let results = [
        table_checks("C4", "stingray", 1, Scheme::Richardson, 1.45e-3, None),
        table_checks("C4", "stingray", 2, Scheme::Richardson, 3.39e-4, None),
        table_checks("C4", "nongradient3", 1, Scheme::Richardson, 9.54e-4, None),
        table_checks("C4", "nongradient3", 2, Scheme::Richardson, 1.43e-4, None),
    ];
    assert!(
        results.iter().all(|r| *r),
        "criterion 4 failed; see printed lines"
    );
}

#[test]
fn c5_lemma_scaling_probes() {
    let start = Instant::now();
    let harness = Harness::new(ReferenceCache::disabled(), Execution::default());
    let taus = dyadic_ladder(5, 9);
    let mut ok = true;
    for problem in ["stingray", "nongradient3"] {
        let p = registry_get(problem).unwrap();
        let ic = p.default_initial_condition(2).unwrap();
        let cfg = SaddleConfig::new(2, taus[0], p.kind());
        for q in [
            ProbeQuantity::Cross,
            ProbeQuantity::NormDefect,
            ProbeQuantity::GsCorrection,
        ] {
            let label = format!("{problem} k=2 {q}");
            ok &= match harness.scaling_probe(&p, &ic, &cfg, &taus, q) {
                Ok(r) => report(
                    "C5",
                    &label,
                    r.slope >= LEMMA_SLOPE_MIN,
                    format!(
                        "slope {:.3} >= {LEMMA_SLOPE_MIN} (maxima {})",
                        r.slope,
                        r.maxima
                            .iter()
                            .map(|m| format!("{m:.3e}"))
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                ),
                Err(e) => report("C5", &label, false, format!("probe failed: {e}")),
            };
        }
    }
    let elapsed = start.elapsed();
    ok &= report(
        "C5",
        "runtime",
        elapsed < Duration::from_secs(30),
        format!("{elapsed:.2?} < 30s"),
    );
    assert!(ok, "criterion 5 failed; see printed lines");
}

#[test]
fn c6_dimer_oracle() {
    let mut ok = true;
    let cubic = registry_get("cubic1d").unwrap();
    let one = PositionVector::from_element(1, 1.0);
    for l in [0.1, 0.01] {
        let h = dimer_hessian_apply(&cubic, &one, &one, l).unwrap();
        let exact = cubic.exact_hvp(&one, &one).unwrap();
        let err = h[0] - exact[0];
        ok &= report(
            "C6",
            &format!("cubic1d error = l^2 at l = {l}"),
            (err - l * l).abs() <= 1e-12,
            format!(
                "error {err:.15e}, |error - l^2| = {:.2e} <= 1e-12",
                (err - l * l).abs()
            ),
        );
    }

    let ls = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let stingray = registry_get("stingray").unwrap();
    let points = [[0.3, -0.7], [-1.2, 0.5], [1.7, 1.1], [0.05, 2.3]];
    let dir = PositionVector::from_column_slice(&[0.6, -0.8]);
    let mut worst = 0.0_f64;
    for p in points {
        let x = PositionVector::from_column_slice(&p);
        let errs: Vec<f64> = ls
            .iter()
            .map(|&l| {
                let h = dimer_hessian_apply(&stingray, &x, &dir, l).unwrap();
                (h - stingray.exact_hvp(&x, &dir).unwrap()).norm()
            })
            .collect();
        worst = errs.iter().copied().fold(worst, f64::max);
        let positive = errs.iter().all(|e| *e > 0.0);
        let slope = if positive {
            ssd::harness::loglog_slope(&ls, &errs)
        } else {
            f64::NAN
        };
        ok &= report(
            "C6",
            &format!("stingray dimer log-log slope at x = {p:?}"),
            (1.9..=2.1).contains(&slope),
            format!(
                "slope {slope:.3} in [1.9, 2.1] (errors {})",
                errs.iter()
                    .map(|e| format!("{e:.1e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
    }
    report(
        "C6",
        "stingray dimer exact agreement (informational)",
        worst <= 1e-12,
        format!("max error {worst:.2e} over l in [1e-3, 1e-1]; the force is quadratic"),
    );

    // A genuinely non-polynomial field shows the O(l^2) slope.
    let ng = registry_get("nongradient3").unwrap();
    let x = PositionVector::from_column_slice(&[-0.4, 1.3, 0.2]);
    let v = PositionVector::from_column_slice(&[0.48, 0.6, 0.64]);
    let errs: Vec<f64> = ls
        .iter()
        .map(|&l| {
            (dimer_hessian_apply(&ng, &x, &v, l).unwrap() - ng.exact_hvp(&x, &v).unwrap()).norm()
        })
        .collect();
    let slope = ssd::harness::loglog_slope(&ls, &errs);
    ok &= report(
        "C6",
        "nongradient3 dimer vs exact Jacobian log-log slope",
        (1.9..=2.1).contains(&slope),
        format!("slope {slope:.4} in [1.9, 2.1]"),
    );
    assert!(ok);
}

#[test]
fn c7_householder_and_gram_schmidt_properties() {
    let start = Instant::now();
    let eps = f64::EPSILON;
    let (mut norm_worst, mut invol_worst, mut idem_worst, mut span_worst, mut ortho_worst) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut failures = 0usize;
    for idx in 0..1000 {
        let raw = raw_directions(idx);
        let n = raw[0].len();
        let (frame, _) =
            gram_schmidt(&RawFrame::new(raw.clone()).unwrap(), DEGENERACY_TOL).unwrap();

        let ortho = frame.orthonormality_defect();
        ortho_worst = ortho_worst.max(ortho);

        let f = probe_vector(idx, n);
        let hf = householder_apply(&frame, &f).unwrap();
        let norm_err = (hf.norm() - f.norm()).abs() / (eps * n as f64 * f.norm());
        norm_worst = norm_worst.max(norm_err);
        let invol =
            (householder_apply(&frame, &hf).unwrap() - &f).norm() / (eps * n as f64 * f.norm());
        invol_worst = invol_worst.max(invol);

        let again = RawFrame::new(frame.vectors().to_vec()).unwrap();
        let (_, corr) = gram_schmidt(&again, DEGENERACY_TOL).unwrap();
        let idem = corr.iter().copied().fold(0.0, f64::max);
        idem_worst = idem_worst.max(idem);

        let mut span = 0.0_f64;
        for r in &raw {
            let proj = frame
                .vectors()
                .iter()
                .fold(PositionVector::zeros(n), |acc, v| acc + v * v.dot(r));
            span = span.max((proj - r).norm() / r.norm());
        }
        span_worst = span_worst.max(span);

        if norm_err > 8.0 || invol > 16.0 || idem > 1e-12 || span > 1e-10 || ortho > 1e-10 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let mut ok = true;
    ok &= report(
        "C7",
        "householder norm preservation",
        norm_worst <= 8.0,
        format!("worst {norm_worst:.2} eps*N*|f| <= 8"),
    );
    ok &= report(
        "C7",
        "householder involution",
        invol_worst <= 16.0,
        format!("worst {invol_worst:.2} eps*N*|f| <= 16"),
    );
    ok &= report(
        "C7",
        "gram-schmidt idempotence",
        idem_worst <= 1e-12,
        format!("worst correction {idem_worst:.2e} <= 1e-12"),
    );
    ok &= report(
        "C7",
        "gram-schmidt span preservation",
        span_worst <= 1e-10,
        format!("worst relative residual {span_worst:.2e} <= 1e-10"),
    );
    ok &= report(
        "C7",
        "post-GS orthonormality",
        ortho_worst <= 1e-10,
        format!("worst defect {ortho_worst:.2e} <= 1e-10"),
    );
    ok &= report(
        "C7",
        "frames",
        failures == 0,
        format!("{failures} of 1000 frames violate a property"),
    );
    ok &= report(
        "C7",
        "runtime",
        elapsed < Duration::from_secs(5),
        format!("{elapsed:.2?} < 5s"),
    );
    assert!(ok);
}

#[test]
fn c8_converge_is_deterministic() {
    let p = registry_get("nongradient3").unwrap();
    let ic = p.default_initial_condition(2).unwrap();
    let cfg = SaddleConfig::new(2, 1.0 / 32.0, ProblemKind::NonGradient);
    let taus = dyadic_ladder(5, 8);
    let run = |exec| {
        Harness::new(ReferenceCache::disabled(), exec)
            .convergence_ladder(&p, &ic, &cfg, &taus, DEFAULT_REF_TAU, Scheme::Euler)
            .unwrap()
            .to_csv()
    };
    let a = run(Execution::default());
    let b = run(Execution::default());
    let c = run(Execution::Sequential);
    let ok = report(
        "C8",
        "repeated converge CSV byte-identical",
        a == b,
        format!("{} bytes", a.len()),
    ) & report(
        "C8",
        "parallel and sequential CSV byte-identical",
        a == c,
        "",
    );
    let frame_again = OrthonormalFrame::standard(3, 2).unwrap();
    assert_eq!(frame_again, OrthonormalFrame::standard(3, 2).unwrap());
    assert!(ok);
}
