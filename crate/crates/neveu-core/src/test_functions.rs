//! The catalog of Lyapunov test functions used by the boundary-behavior
//! criteria, each carrying closed-form first and second derivatives, a
//! validity domain, and a constructed C^2 patch wherever the closed form
//! only covers part of the half-line.
//!
//! Patches are quintic Hermite blends matching value, first and second
//! derivative at the seam. For the log-log functions the blend is applied to
//! ln g rather than g, which keeps the extension strictly positive without
//! any case analysis; for the capped exponential the blend is built in
//! derivative space from a nonnegative quartic, which makes the extension
//! monotone by construction.

use crate::error::CoreError;
use crate::gridding::log_spaced;

type Func = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default exponent for the increment-growth condition; any value in (0, 1)
/// works for the catalog, and the choice is recorded per certificate.
pub const DEFAULT_REGULARITY_DELTA: f64 = 0.5;

/// A C^2 function with closed-form derivatives and domain metadata.
pub struct TestFunction {
    tag: String,
    eval: Func,
    d1: Func,
    d2: Func,
    core_domain: (f64, f64),
    patch_domain: Option<(f64, f64)>,
    full_domain: (f64, f64),
    regularity_delta: f64,
    limit_at_inf: Option<f64>,
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("tag", &self.tag)
            .field("core_domain", &self.core_domain)
            .field("patch_domain", &self.patch_domain)
            .finish()
    }
}

/// Quintic polynomial in the blend coordinate t, stored by coefficients.
#[derive(Debug, Clone, Copy)]
struct Poly5 {
    a: [f64; 6],
}

impl Poly5 {
    /// Hermite data (value, slope, curvature) at t = 0 and t = 1, already
    /// expressed in t-units.
    fn hermite(v0: f64, m0: f64, c0: f64, v1: f64, m1: f64, c1: f64) -> Self {
        let a0 = v0;
        let a1 = m0;
        let a2 = 0.5 * c0;
        let a = v1 - a0 - a1 - a2;
        let b = m1 - m0 - c0;
        let c = c1 - c0;
        let a3 = 10.0 * a - 4.0 * b + 0.5 * c;
        let a4 = -15.0 * a + 7.0 * b - c;
        let a5 = 6.0 * a - 3.0 * b + 0.5 * c;
        Self { a: [a0, a1, a2, a3, a4, a5] }
    }

    fn eval(&self, t: f64) -> f64 {
        let a = &self.a;
        a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5]))))
    }

    fn d1(&self, t: f64) -> f64 {
        let a = &self.a;
        a[1] + t * (2.0 * a[2] + t * (3.0 * a[3] + t * (4.0 * a[4] + t * 5.0 * a[5])))
    }

    fn d2(&self, t: f64) -> f64 {
        let a = &self.a;
        2.0 * a[2] + t * (6.0 * a[3] + t * (12.0 * a[4] + t * 20.0 * a[5]))
    }
}

/// A quintic Hermite blend of ln g over [s0, s1]; evaluating through exp
/// keeps the patched function strictly positive.
#[derive(Debug, Clone, Copy)]
struct LogBlend {
    s0: f64,
    len: f64,
    poly: Poly5,
}

impl LogBlend {
    fn t(&self, u: f64) -> f64 {
        (u - self.s0) / self.len
    }

    fn eval(&self, u: f64) -> f64 {
        self.poly.eval(self.t(u)).exp()
    }

    fn d1(&self, u: f64) -> f64 {
        let t = self.t(u);
        self.poly.eval(t).exp() * self.poly.d1(t) / self.len
    }

    fn d2(&self, u: f64) -> f64 {
        let t = self.t(u);
        let q1 = self.poly.d1(t) / self.len;
        let q2 = self.poly.d2(t) / (self.len * self.len);
        self.poly.eval(t).exp() * (q2 + q1 * q1)
    }
}

impl TestFunction {
    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    pub fn d1(&self, u: f64) -> f64 {
        (self.d1)(u)
    }

    pub fn d2(&self, u: f64) -> f64 {
        (self.d2)(u)
    }

    /// Interval on which the closed form holds.
    pub fn core_domain(&self) -> (f64, f64) {
        self.core_domain
    }

    /// Interval covered by the constructed C^2 extension, if any.
    pub fn patch_domain(&self) -> Option<(f64, f64)> {
        self.patch_domain
    }

    /// Full interval on which evaluation is defined (core, patch, and any
    /// constant continuation together).
    pub fn full_domain(&self) -> (f64, f64) {
        self.full_domain
    }

    pub fn regularity_delta(&self) -> f64 {
        self.regularity_delta
    }

    /// Finite limit of g at +infinity, when one exists.
    pub fn limit_at_inf(&self) -> Option<f64> {
        self.limit_at_inf
    }

    /// State-space locations where the definition switches branch; the
    /// generator seeds quadrature panels at u + z = breakpoint.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// g(u) = e^{-lambda u}.
    pub fn exp_neg(lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda.is_finite());
        Self {
            tag: format!("exp_neg:lambda={lambda}"),
            eval: Box::new(move |u| (-lambda * u).exp()),
            d1: Box::new(move |u| -lambda * (-lambda * u).exp()),
            d2: Box::new(move |u| lambda * lambda * (-lambda * u).exp()),
            core_domain: (0.0, f64::INFINITY),
            patch_domain: None,
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: Some(0.0),
            breakpoints: vec![],
        }
    }

    /// g(u) = e^u for u <= b+1, constant for u >= b+2, blended monotonically
    /// in between. Globally bounded and non-decreasing.
    pub fn exp_capped(b: f64) -> Self {
        assert!(b > 0.0 && b.is_finite());
        let s0 = b + 1.0;
        let s1 = b + 2.0;
        let e0 = s0.exp();
        // g' on the blend is e0 * (t-1)^2 (t^2 + 3t + 1) >= 0, a quartic
        // matching e^u's value/slope at t = 0 and vanishing to second order
        // at t = 1. Antiderivative in t:
        let p = |t: f64| t + t * t / 2.0 - 4.0 * t * t * t / 3.0 + t.powi(4) / 4.0 + t.powi(5) / 5.0;
        let dp = |t: f64| (t - 1.0) * (t - 1.0) * (t * t + 3.0 * t + 1.0);
        let ddp = |t: f64| 1.0 - 8.0 * t + 3.0 * t * t + 4.0 * t * t * t;
        let plateau = e0 * (1.0 + p(1.0));
        Self {
            tag: format!("exp_capped:b={b}"),
            eval: Box::new(move |u| {
                if u <= s0 {
                    u.exp()
                } else if u >= s1 {
                    plateau
                } else {
                    e0 * (1.0 + p(u - s0))
                }
            }),
            d1: Box::new(move |u| {
                if u <= s0 {
                    u.exp()
                } else if u >= s1 {
                    0.0
                } else {
                    e0 * dp(u - s0)
                }
            }),
            d2: Box::new(move |u| {
                if u <= s0 {
                    u.exp()
                } else if u >= s1 {
                    0.0
                } else {
                    e0 * ddp(u - s0)
                }
            }),
            core_domain: (0.0, s0),
            patch_domain: Some((s0, s1)),
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: Some(plateau),
            breakpoints: vec![s0, s1],
        }
    }

    /// g(u) = c^rho - u^rho on [0, inf); g(0) = c^rho, g(c) = 0.
    pub fn power_gap(c: f64, rho: f64) -> Self {
        assert!(c > 0.0 && c.is_finite());
        assert!(rho > 0.0 && rho < 1.0);
        let crho = c.powf(rho);
        Self {
            tag: format!("power_gap:c={c},rho={rho}"),
            eval: Box::new(move |u| if u == 0.0 { crho } else { crho - u.powf(rho) }),
            d1: Box::new(move |u| -rho * u.powf(rho - 1.0)),
            d2: Box::new(move |u| rho * (1.0 - rho) * u.powf(rho - 2.0)),
            core_domain: (0.0, f64::INFINITY),
            patch_domain: None,
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: None,
            breakpoints: vec![],
        }
    }

    /// g(u) = 1 - u^{-rho}; increasing to 1, negative below u = 1.
    pub fn one_minus_inv_pow(rho: f64) -> Self {
        assert!(rho > 0.0 && rho.is_finite());
        Self {
            tag: format!("one_minus_inv_pow:rho={rho}"),
            eval: Box::new(move |u| 1.0 - u.powf(-rho)),
            d1: Box::new(move |u| rho * u.powf(-rho - 1.0)),
            d2: Box::new(move |u| -rho * (rho + 1.0) * u.powf(-rho - 2.0)),
            core_domain: (0.0, f64::INFINITY),
            patch_domain: None,
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: Some(1.0),
            breakpoints: vec![],
        }
    }

    /// g(u) = u^{-rho}; decreasing to 0.
    pub fn inv_pow(rho: f64) -> Self {
        assert!(rho > 0.0 && rho.is_finite());
        Self {
            tag: format!("inv_pow:rho={rho}"),
            eval: Box::new(move |u| u.powf(-rho)),
            d1: Box::new(move |u| -rho * u.powf(-rho - 1.0)),
            d2: Box::new(move |u| rho * (rho + 1.0) * u.powf(-rho - 2.0)),
            core_domain: (0.0, f64::INFINITY),
            patch_domain: None,
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: Some(0.0),
            breakpoints: vec![],
        }
    }

    /// g(u) = ln ln (6n / u) for 0 < u <= 2n, blown up at 0, constant after a
    /// blend on (2n, 2n+1). Strictly positive everywhere.
    pub fn loglog_zero(n: u64) -> Self {
        assert!(n >= 1);
        let nf = n as f64;
        let s0 = 2.0 * nf;
        let s1 = s0 + 1.0;
        let core_g = move |u: f64| (6.0 * nf / u).ln().ln();
        let core_d1 = move |u: f64| -1.0 / (u * (6.0 * nf / u).ln());
        let core_d2 = move |u: f64| {
            let l = (6.0 * nf / u).ln();
            1.0 / (u * u * l) - 1.0 / (u * u * l * l)
        };
        let blend = {
            let g0 = core_g(s0);
            let r1 = core_d1(s0) / g0;
            let r2 = core_d2(s0) / g0 - r1 * r1;
            // Half-slope continuation fixes the free plateau level.
            let q0 = g0.ln();
            let q1 = q0 + 0.5 * r1;
            LogBlend { s0, len: 1.0, poly: Poly5::hermite(q0, r1, r2, q1, 0.0, 0.0) }
        };
        let plateau = blend.eval(s1);
        Self {
            tag: format!("loglog_zero:n={n}"),
            eval: Box::new(move |u| {
                if u <= s0 {
                    core_g(u)
                } else if u >= s1 {
                    plateau
                } else {
                    blend.eval(u)
                }
            }),
            d1: Box::new(move |u| {
                if u <= s0 {
                    core_d1(u)
                } else if u >= s1 {
                    0.0
                } else {
                    blend.d1(u)
                }
            }),
            d2: Box::new(move |u| {
                if u <= s0 {
                    core_d2(u)
                } else if u >= s1 {
                    0.0
                } else {
                    blend.d2(u)
                }
            }),
            core_domain: (0.0, s0),
            patch_domain: Some((s0, s1)),
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: Some(plateau),
            breakpoints: vec![s0, s1],
        }
    }

    /// g(u) = ln ln (6n u) for u >= 1/n, constant below a blend on
    /// (1/(2n), 1/n). Strictly positive everywhere, unbounded above.
    pub fn loglog_inf(n: u64) -> Self {
        assert!(n >= 1);
        let nf = n as f64;
        let s1 = 1.0 / nf;
        let s0 = 0.5 / nf;
        let core_g = move |u: f64| (6.0 * nf * u).ln().ln();
        let core_d1 = move |u: f64| 1.0 / (u * (6.0 * nf * u).ln());
        let core_d2 = move |u: f64| {
            let l = (6.0 * nf * u).ln();
            -1.0 / (u * u * l) - 1.0 / (u * u * l * l)
        };
        let blend = {
            let len = s1 - s0;
            let g1 = core_g(s1);
            let r1 = len * core_d1(s1) / g1;
            let r2 = len * len * (core_d2(s1) / g1 - (core_d1(s1) / g1).powi(2));
            let q1 = g1.ln();
            let q0 = q1 - 0.5 * r1;
            LogBlend { s0, len, poly: Poly5::hermite(q0, 0.0, 0.0, q1, r1, r2) }
        };
        let floor = blend.eval(s0);
        Self {
            tag: format!("loglog_inf:n={n}"),
            eval: Box::new(move |u| {
                if u >= s1 {
                    core_g(u)
                } else if u <= s0 {
                    floor
                } else {
                    blend.eval(u)
                }
            }),
            d1: Box::new(move |u| {
                if u >= s1 {
                    core_d1(u)
                } else if u <= s0 {
                    0.0
                } else {
                    blend.d1(u)
                }
            }),
            d2: Box::new(move |u| {
                if u >= s1 {
                    core_d2(u)
                } else if u <= s0 {
                    0.0
                } else {
                    blend.d2(u)
                }
            }),
            core_domain: (s1, f64::INFINITY),
            patch_domain: Some((s0, s1)),
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: None,
            breakpoints: vec![s0, s1],
        }
    }

    /// Constant function; useful as a degenerate sanity input.
    pub fn constant(value: f64) -> Self {
        assert!(value.is_finite());
        Self {
            tag: format!("constant:value={value}"),
            eval: Box::new(move |_| value),
            d1: Box::new(|_| 0.0),
            d2: Box::new(|_| 0.0),
            core_domain: (0.0, f64::INFINITY),
            patch_domain: None,
            full_domain: (0.0, f64::INFINITY),
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf: Some(value),
            breakpoints: vec![],
        }
    }

    /// Assemble a function from user-supplied (g, g', g'') closures.
    pub fn from_parts(
        tag: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        core_domain: (f64, f64),
        limit_at_inf: Option<f64>,
    ) -> Self {
        Self {
            tag: tag.into(),
            eval: Box::new(eval),
            d1: Box::new(d1),
            d2: Box::new(d2),
            core_domain,
            patch_domain: None,
            full_domain: core_domain,
            regularity_delta: DEFAULT_REGULARITY_DELTA,
            limit_at_inf,
            breakpoints: vec![],
        }
    }
}

/// Build a catalog entry from its string tag, e.g. "exp_neg:lambda=2" or
/// "power_gap:c=0.5,rho=0.25".
pub fn parse_tag(tag: &str) -> Result<TestFunction, CoreError> {
    let (name, rest) = tag.split_once(':').unwrap_or((tag, ""));
    let mut kv = std::collections::BTreeMap::new();
    for part in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CoreError::UnknownTag(tag.to_string()))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| CoreError::UnknownTag(tag.to_string()))?;
        kv.insert(k.trim().to_string(), value);
    }
    let get = |k: &str| -> Result<f64, CoreError> {
        kv.get(k)
            .copied()
            .ok_or_else(|| CoreError::UnknownTag(format!("{tag} (missing `{k}`)")))
    };
    match name.trim() {
        "exp_neg" => Ok(TestFunction::exp_neg(get("lambda")?)),
        "exp_capped" => Ok(TestFunction::exp_capped(get("b")?)),
        "power_gap" => Ok(TestFunction::power_gap(get("c")?, get("rho")?)),
        "one_minus_inv_pow" => Ok(TestFunction::one_minus_inv_pow(get("rho")?)),
        "inv_pow" => Ok(TestFunction::inv_pow(get("rho")?)),
        "loglog_zero" => Ok(TestFunction::loglog_zero(get("n")? as u64)),
        "loglog_inf" => Ok(TestFunction::loglog_inf(get("n")? as u64)),
        "constant" => Ok(TestFunction::constant(get("value")?)),
        _ => Err(CoreError::UnknownTag(tag.to_string())),
    }
}

/// Outcome of the numerical check of the growth/boundedness condition
///
///   sup_{u >= v, z >= 1} [ |g'(u)| + |g''(u)| + |g(u+z) - g(u)| / z^delta ] < inf
///
/// over a log-spaced grid with a refinement-stability requirement. A `false`
/// verdict is a legitimate answer and carries the offending point.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub bounded: bool,
    /// Empirical sup over the refined grid.
    pub sup: f64,
    /// Offending (u, z) when `bounded` is false.
    pub witness: Option<(f64, f64)>,
    pub grid_size: usize,
    pub delta: f64,
    pub v: f64,
}

/// Numerically probe the regularity condition for `f` at level `v` and
/// exponent `delta` on a `grid_size`^2 grid over u in [v, v*1e4],
/// z in [1, 1e6]. The sup must be finite, must not grow at either grid
/// boundary, and must be stable (< 1% change) under doubling the grid.
pub fn check_regularity(
    f: &TestFunction,
    v: f64,
    delta: f64,
    grid_size: usize,
) -> RegularityReport {
    assert!(v > 0.0 && (0.0..1.0).contains(&delta) && delta > 0.0 && grid_size >= 8);

    type SupProbe = (f64, (f64, f64), bool, Option<(f64, f64)>);
    let evaluate = |m: usize| -> SupProbe {
        let us = log_spaced(v, v * 1e4, m);
        let zs = log_spaced(1.0, 1e6, m);
        let mut sup = f64::NEG_INFINITY;
        let mut arg = (v, 1.0);
        // Per-z maxima of the increment term, for the tail-trend check.
        let mut inc_by_z = vec![f64::NEG_INFINITY; m];
        let mut deriv_by_u = vec![0.0f64; m];
        for (iu, &u) in us.iter().enumerate() {
            let dterm = f.d1(u).abs() + f.d2(u).abs();
            deriv_by_u[iu] = dterm;
            let gu = f.eval(u);
            for (iz, &z) in zs.iter().enumerate() {
                let inc = (f.eval(u + z) - gu).abs() / z.powf(delta);
                if !inc.is_finite() || !dterm.is_finite() {
                    return (f64::INFINITY, (u, z), false, Some((u, z)));
                }
                if inc > inc_by_z[iz] {
                    inc_by_z[iz] = inc;
                }
                let total = dterm + inc;
                if total > sup {
                    sup = total;
                    arg = (u, z);
                }
            }
        }
        // Growing at the z boundary means the sup over z >= 1 is infinite
        // (e.g. any g with linear growth).
        let top = inc_by_z[m - 1];
        let prev = inc_by_z[m - 1 - m / 6];
        if top > prev * (1.0 + 1e-3) && top > 1e-12 {
            return (sup, arg, false, Some((arg.0, zs[m - 1])));
        }
        // Same check at the u boundary for the derivative terms.
        let dtop = deriv_by_u[m - 1];
        let dprev = deriv_by_u[m - 1 - m / 6];
        if dtop > dprev * (1.0 + 1e-3) && dtop > 1e-12 {
            return (sup, arg, false, Some((us[m - 1], 1.0)));
        }
        (sup, arg, true, None)
    };

    let (sup1, _, ok1, w1) = evaluate(grid_size);
    if !ok1 {
        return RegularityReport {
            bounded: false,
            sup: sup1,
            witness: w1,
            grid_size,
            delta,
            v,
        };
    }
    let (sup2, arg2, ok2, w2) = evaluate(2 * grid_size);
    if !ok2 {
        return RegularityReport {
            bounded: false,
            sup: sup2,
            witness: w2,
            grid_size,
            delta,
            v,
        };
    }
    let stable = (sup2 - sup1).abs() <= 0.01 * sup1.abs().max(1e-12);
    RegularityReport {
        bounded: stable,
        sup: sup2,
        witness: if stable { None } else { Some(arg2) },
        grid_size,
        delta,
        v,
    }
}

/// Local length scale of g at u: ~1/lambda for exponentials, ~u for powers
/// and logarithms, ~u on constant stretches. Drives finite-difference steps
/// and the remainder-form switch in the generator quadrature.
pub(crate) fn local_length_scale(f: &TestFunction, u: f64) -> f64 {
    let g = f.eval(u).abs();
    let d1 = f.d1(u).abs();
    let d2 = f.d2(u).abs();
    let num = d1 + g / u;
    let den = d2 + d1 / u + g / (u * u);
    if den > 0.0 {
        (num / den).min(u)
    } else {
        u
    }
}

/// Central-finite-difference validation of the stored derivatives on a
/// 200-point log grid of the core domain, plus points straddling every patch
/// seam. Returns the max error relative to the local scale
/// max(|derivative|, |g|/u).
pub fn derivative_selfcheck(f: &TestFunction) -> f64 {
    let (lo, hi) = f.core_domain();
    let hi_s = if hi.is_finite() { hi * (1.0 - 1e-4) } else { 1e3 };
    let lo_s = if lo > 0.0 { lo * (1.0 + 1e-4) } else { hi_s * 1e-6 };
    let mut points = log_spaced(lo_s, hi_s, 200);
    for &s in f.breakpoints() {
        points.push(s * (1.0 - 1e-4));
        points.push(s * (1.0 + 1e-4));
    }

    // Step size follows the local length scale of g (1/lambda for an
    // exponential, ~u for powers and logs), never exceeding 6e-6 * u so the
    // stencil cannot cross a nearby seam.
    let fd_step = |u: f64| -> f64 { 6e-6 * local_length_scale(f, u).max(u * 1e-12) };

    let mut worst = 0.0f64;
    for &u in &points {
        if u <= 0.0 {
            continue;
        }
        let h = fd_step(u);
        let fd1 = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
        let scale1 = f.d1(u).abs().max(f.eval(u).abs() / u).max(1e-300);
        worst = worst.max((fd1 - f.d1(u)).abs() / scale1);

        let fd2 = (f.d1(u + h) - f.d1(u - h)) / (2.0 * h);
        let scale2 = f
            .d2(u)
            .abs()
            .max(f.d1(u).abs() / u)
            .max(f.eval(u).abs() / (u * u))
            .max(1e-300);
        worst = worst.max((fd2 - f.d2(u)).abs() / scale2);
    }
    worst
}
