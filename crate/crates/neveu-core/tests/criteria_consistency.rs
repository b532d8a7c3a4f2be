//! Cross-module consistency: wherever the classifier predicts a behavior is
//! absent, the corresponding Lyapunov certificate must come through, and the
//! Monte Carlo estimates must clear the analytic floors.

use neveu_core::*;

const GRID_POINTS: usize = 256;

/// Locate, by bisection on the sign of Lg, the level above which the
/// generator of u^{-rho} is nonpositive (the staying-infinite regime with
/// beta <= theta + 1 guarantees one exists).
fn sign_change_level(f: &TestFunction, params: &ModelParams) -> f64 {
    let total_at = |u: f64| -> f64 {
        eval_generator(f, u, params, 1e-6 * (1.0 + f.eval(u).abs()))
            .map(|ev| ev.total)
            .unwrap_or(f64::INFINITY)
    };
    let mut hi = 2.0;
    while total_at(hi) > 0.0 {
        hi *= 2.0;
        assert!(hi < 1e9, "no sign change found below 1e9");
    }
    let mut lo = hi / 2.0;
    if total_at(lo) <= 0.0 {
        lo = 1.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if total_at(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn inv_pow_generator_nonpositive_beyond_bisected_level() {
    // beta <= theta + 1: the big-jump term dominates for large u and Lg <= 0
    // past some level c, located numerically.
    let params = ModelParams::new(1.5, 1.0, 1.0).unwrap();
    let f = TestFunction::inv_pow(1.0);
    let c = sign_change_level(&f, &params);
    assert!(c > 1.0 && c < 1e6, "implausible level {c}");
    let grid = gridding::log_spaced(c * 1.0001, c * 1e4, 32);
    let evs = eval_generator_grid(&f, &grid, &params, |u| 1e-6 * (1.0 + f.eval(u).abs()))
        .unwrap();
    for ev in evs {
        assert!(
            ev.total <= 2.0 * ev.err_estimate,
            "Lg({}) = {} > 0 beyond the sign-change level {c}",
            ev.u,
            ev.total
        );
    }
}

#[test]
fn no_extinction_cells_certify_loglog_zero() {
    for (beta, theta) in [(1.0, 1.0), (2.0, 0.5), (3.0, 3.0)] {
        let params = ModelParams::new(beta, theta, 1.0).unwrap();
        assert!(!classify(&params).extinct);
        for n in [1u64, 2, 4] {
            let f = TestFunction::loglog_zero(n);
            let cert = certify(&f, (0.0, n as f64), Direction::LLeDg, &params, GRID_POINTS)
                .unwrap_or_else(|e| panic!("({beta},{theta}) n={n}: {e}"));
            assert!(cert.d > 0.0);
            assert!(cert.margin >= 0.0);
        }
    }
}

#[test]
fn no_explosion_cells_certify_loglog_inf() {
    for (beta, theta) in [(1.0, 1.0), (0.5, 1.0), (3.0, 1.5)] {
        let params = ModelParams::new(beta, theta, 1.0).unwrap();
        assert!(!classify(&params).explodes);
        for n in [1u64, 2] {
            let f = TestFunction::loglog_inf(n);
            let cert = certify(
                &f,
                (1.0 / n as f64, f64::INFINITY),
                Direction::LLeDg,
                &params,
                GRID_POINTS,
            )
            .unwrap_or_else(|e| panic!("({beta},{theta}) n={n}: {e}"));
            assert!(cert.d > 0.0);
            assert!(cert.grid_spec.truncated_hi);
        }
    }
}

#[test]
fn staying_infinite_cells_certify_inv_pow() {
    // comes_down = false with beta <= max(theta + 1, 2): either the beta <=
    // theta + 1 branch (Lg <= 0 past a located level) or the beta <= 2
    // branch (Lg <= rho (rho + 1) g above 1).
    for (beta, theta) in [(1.5, 1.0), (1.0, 0.0), (2.0, 2.5), (2.0, 0.5)] {
        let params = ModelParams::new(beta, theta, 1.0).unwrap();
        let cl = classify(&params);
        assert!(!cl.comes_down);
        let rho = 1.0;
        let f = TestFunction::inv_pow(rho);
        let (lo, branch) = if beta <= theta + 1.0 {
            (sign_change_level(&f, &params), "sign-change")
        } else {
            assert!(beta <= 2.0);
            (1.0, "bounded-ratio")
        };
        let cert = certify(&f, (lo, lo * 1e4), Direction::LLeDg, &params, GRID_POINTS)
            .unwrap_or_else(|e| panic!("({beta},{theta}) {branch} from {lo}: {e}"));
        assert!(cert.d > 0.0, "({beta},{theta})");
        if branch == "bounded-ratio" {
            // The certified constant must respect rho (rho + 1), padded.
            assert!(
                cert.d <= rho * (rho + 1.0) * 1.02,
                "({beta},{theta}): d = {} above rho(rho+1)",
                cert.d
            );
        }
        assert!(
            cert.flags.iter().any(|s| s.contains("trend")) || !cert.grid_spec.truncated_hi,
            "staying-infinite certificate should record its checked range"
        );
    }
}

#[test]
fn neveu_estimates_clear_analytic_floors() {
    // Down-crossing estimate sits far above the exponential bound, and the
    // up-crossing estimate far above the capped-exponential one.
    let params = ModelParams::neveu();
    let scheme = SimScheme::defaults(params.r());
    let (a, b, x0) = (0.5, 2.0, 1.0);

    let lambda0 = canonical_lambda0(a, b, &params);
    let f_down = TestFunction::exp_neg(lambda0);
    let cert = certify(&f_down, (a, b), Direction::LGeDg, &params, 64).unwrap();
    let down_bound = passage_lower_bound_down(&f_down, a, b, x0, &cert).unwrap();
    let down =
        estimate_passage(&params, &scheme, x0, a, b, PassageDirection::Down, 2000, 21).unwrap();
    assert!(
        down.ci_lo > down_bound,
        "down ci_lo {} not above bound {down_bound}",
        down.ci_lo
    );

    let f_up = TestFunction::exp_capped(b);
    let up_bound = (f_up.eval(x0) - f_up.eval(a)) / f_up.limit_at_inf().unwrap();
    let up = estimate_passage(&params, &scheme, x0, a, b, PassageDirection::Up, 2000, 22).unwrap();
    assert!(up.ci_lo > up_bound, "up ci_lo {} not above bound {up_bound}", up.ci_lo);
}
