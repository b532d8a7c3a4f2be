//! Path simulation of the branching SDE with small-jump truncation, exact
//! compensator drift, optional Gaussian replacement of the sub-threshold
//! jumps, and compound-Poisson big jumps. Records first-passage exits.
//!
//! Determinism contract: every path derives its RNG stream from
//! (master seed, path index) via a splittable generator, all draws happen in
//! a fixed order, and batch aggregation is order-independent, so results are
//! bit-identical at any thread count.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::generator::{default_abs_tol, eval_generator};
use crate::model::{JumpBand, ModelParams};
use crate::serde_util::maybe_inf;
use crate::test_functions::{check_regularity, TestFunction};

/// Per-step Gaussian standard deviation is kept below this fraction of the
/// current state by shrinking dt.
const GAUSS_RES_FRAC: f64 = 0.25;
/// Per-step compensator drift is kept below this fraction of the state.
const DRIFT_RES_FRAC: f64 = 0.1;

/// Discretization scheme for the truncated-jump simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScheme {
    /// Small-jump truncation level, in (0, r).
    pub eps: f64,
    /// Maximum step size.
    pub dt_max: f64,
    /// Cap on expected retained jumps per step; controls adaptive dt.
    pub max_jumps_per_step: f64,
    /// Replace jumps below eps by a matching-variance Gaussian.
    pub gauss_correction: bool,
    /// Extinction proxy threshold.
    pub x_min: f64,
    /// Explosion proxy threshold.
    pub x_max: f64,
    /// Simulation horizon.
    pub t_max: f64,
    /// When set, the truncation level follows the state:
    /// eps_eff(x) = clamp(frac * x, tiny, just below r). Needed for regimes
    /// whose state scales are decades away from r.
    pub eps_state_frac: Option<f64>,
    /// Per-path step budget; exhausted paths report a timeout at the horizon
    /// and are counted separately in batch statistics.
    pub max_steps: u64,
}

impl SimScheme {
    /// Defaults for a threshold r: eps = 1e-3 r, dt_max = 1e-3, 64 expected
    /// jumps per step, Gaussian correction on, proxies at 1e-6 / 1e6,
    /// horizon 50.
    pub fn defaults(r: f64) -> Self {
        Self {
            eps: 1e-3 * r,
            dt_max: 1e-3,
            max_jumps_per_step: 64.0,
            gauss_correction: true,
            x_min: 1e-6,
            x_max: 1e6,
            t_max: 50.0,
            eps_state_frac: None,
            max_steps: 5_000_000,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<(), CoreError> {
        let r = params.r();
        if !(self.eps > 0.0 && self.eps < r) {
            return Err(CoreError::InvalidParams(format!(
                "eps must lie in (0, r) = (0, {r}), got {}",
                self.eps
            )));
        }
        if !(self.dt_max > 0.0 && self.t_max > 0.0) {
            return Err(CoreError::InvalidParams("dt_max and t_max must be positive".into()));
        }
        if !(0.0 < self.x_min && self.x_min < self.x_max) {
            return Err(CoreError::InvalidParams(format!(
                "need 0 < x_min < x_max, got ({}, {})",
                self.x_min, self.x_max
            )));
        }
        if !(self.max_jumps_per_step >= 1.0) {
            return Err(CoreError::InvalidParams("max_jumps_per_step must be >= 1".into()));
        }
        if let Some(frac) = self.eps_state_frac {
            if !(frac > 0.0 && frac.is_finite()) {
                return Err(CoreError::InvalidParams(format!(
                    "eps_state_frac must be positive, got {frac}"
                )));
            }
        }
        Ok(())
    }

    fn eps_eff(&self, x: f64, r: f64) -> f64 {
        match self.eps_state_frac {
            Some(frac) => (frac * x).clamp(r * 1e-15, r * (1.0 - 1e-12)),
            None => self.eps,
        }
    }
}

/// Why a path ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ExitReason {
    /// State reached the lower target a > 0.
    #[serde(rename = "hit_lower")]
    HitLower { a: f64 },
    /// State reached the upper target b < inf.
    #[serde(rename = "hit_upper")]
    HitUpper {
        #[serde(with = "maybe_inf")]
        b: f64,
    },
    /// State fell to the extinction proxy x_min (or clamped below zero).
    #[serde(rename = "extinct_proxy")]
    ExtinctProxy,
    /// State climbed to the explosion proxy x_max.
    #[serde(rename = "exploded_proxy")]
    ExplodedProxy,
    /// Horizon t_max elapsed first.
    #[serde(rename = "timeout")]
    Timeout,
}

/// One simulated trajectory's exit record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub exit_reason: ExitReason,
    pub exit_time: f64,
    pub final_state: f64,
    pub steps: u64,
    /// Per-path RNG stream identifier.
    pub seed: u64,
    /// The Gaussian correction overshot below zero at some step.
    pub clamped_negative: bool,
    /// The step budget ran out before any exit; reported as a timeout.
    pub budget_exhausted: bool,
}

/// Decomposition of one Euler-style step, for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDetail {
    pub next: f64,
    pub n_small: u64,
    pub small_sum: f64,
    pub drift: f64,
    pub gauss: f64,
    pub n_big: u64,
    pub big_sum: f64,
}

/// RNG stream for path `stream` under `master` seed.
pub fn path_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// ln(r / eps), stable when eps is close to r.
fn ln_ratio(r: f64, eps: f64) -> f64 {
    -((eps - r) / r).ln_1p()
}

/// One step of size dt from state x, with rates frozen at the left endpoint.
/// Draw order: retained-jump count, retained sizes, Gaussian, big-jump
/// count, big sizes. Deterministic given the RNG state.
pub fn step_detailed(
    x: f64,
    dt: f64,
    params: &ModelParams,
    scheme: &SimScheme,
    rng: &mut ChaCha8Rng,
) -> StepDetail {
    debug_assert!(x > 0.0 && dt >= 0.0);
    let r = params.r();
    let eps = scheme.eps_eff(x, r);
    let x_beta = x.powf(params.beta());
    let x_theta = x.powf(params.theta());

    let small_band = JumpBand::new(eps, r).expect("eps < r by validation");
    let big_band = JumpBand::new(r, f64::INFINITY).expect("valid big band");

    let lambda_small = x_beta * small_band.total_rate() * dt;
    let mut n_small = 0u64;
    let mut small_sum = 0.0;
    if lambda_small > 0.0 {
        let pois = Poisson::new(lambda_small).expect("positive rate");
        n_small = pois.sample(rng) as u64;
        for _ in 0..n_small {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            small_sum += small_band.sample(u);
        }
    }

    // Exact compensator of the retained band.
    let drift = -x_beta * ln_ratio(r, eps) * dt;

    let mut gauss = 0.0;
    if scheme.gauss_correction {
        // Variance of the discarded band: x^beta int_0^eps z^2 z^-2 dz dt.
        let var = x_beta * eps * dt;
        if var > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            gauss = z * var.sqrt();
        }
    }

    let lambda_big = x_theta / r * dt;
    let mut n_big = 0u64;
    let mut big_sum = 0.0;
    if lambda_big > 0.0 {
        let pois = Poisson::new(lambda_big).expect("positive rate");
        n_big = pois.sample(rng) as u64;
        for _ in 0..n_big {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            big_sum += big_band.sample(u);
        }
    }

    StepDetail {
        next: x + small_sum + drift + gauss + big_sum,
        n_small,
        small_sum,
        drift,
        gauss,
        n_big,
        big_sum,
    }
}

/// Plain next-state step.
pub fn step(
    x: f64,
    dt: f64,
    params: &ModelParams,
    scheme: &SimScheme,
    rng: &mut ChaCha8Rng,
) -> f64 {
    step_detailed(x, dt, params, scheme, rng).next
}

/// Adaptive step size at state x: bounded by dt_max, by the expected-jumps
/// cap, and by per-step resolution of the Gaussian and drift terms.
fn adaptive_dt(x: f64, params: &ModelParams, scheme: &SimScheme) -> f64 {
    let r = params.r();
    let eps = scheme.eps_eff(x, r);
    let x_beta = x.powf(params.beta());
    let x_theta = x.powf(params.theta());
    let lambda_small = x_beta * (r - eps) / (eps * r);
    let lambda_big = x_theta / r;
    let mut dt = scheme
        .dt_max
        .min(scheme.max_jumps_per_step / (lambda_small + lambda_big).max(f64::MIN_POSITIVE));
    if scheme.gauss_correction {
        let var_rate = x_beta * eps;
        if var_rate > 0.0 {
            dt = dt.min(GAUSS_RES_FRAC * GAUSS_RES_FRAC * x * x / var_rate);
        }
    }
    let drift_rate = x_beta * ln_ratio(r, eps);
    if drift_rate > 0.0 {
        dt = dt.min(DRIFT_RES_FRAC * x / drift_rate);
    }
    dt
}

fn check_thresholds(x0: f64, a: f64, b: f64, scheme: &SimScheme) -> Result<(), CoreError> {
    // A start at or past a target exits immediately rather than erroring.
    let lower_ok = if a == 0.0 { true } else { scheme.x_min <= a };
    let upper_ok = b > a && (b.is_infinite() || b <= scheme.x_max);
    if !lower_ok || !upper_ok || !(x0 > 0.0) {
        return Err(CoreError::Sim(format!(
            "invalid thresholds: need x_min <= a < b <= x_max and x0 > 0, got a={a}, x0={x0}, \
             b={b}, x_min={}, x_max={}",
            scheme.x_min, scheme.x_max
        )));
    }
    Ok(())
}

fn classify_state(x: f64, a: f64, b: f64, scheme: &SimScheme) -> Option<ExitReason> {
    if x <= 0.0 {
        // Negative states (Gaussian overshoot) are absorbed at zero.
        return Some(ExitReason::ExtinctProxy);
    }
    if a > 0.0 && x <= a {
        return Some(ExitReason::HitLower { a });
    }
    if x <= scheme.x_min {
        return Some(ExitReason::ExtinctProxy);
    }
    if b.is_finite() && x >= b {
        return Some(ExitReason::HitUpper { b });
    }
    if x >= scheme.x_max {
        return Some(ExitReason::ExplodedProxy);
    }
    None
}

/// Simulate one path from x0 until it crosses a (a > 0), crosses b (finite),
/// hits a boundary proxy, or times out at t_max. `a = 0` disables the lower
/// target (extinction proxy only); `b = inf` disables the upper target.
/// Deterministic given (master_seed, stream).
pub fn run_path(
    x0: f64,
    a: f64,
    b: f64,
    params: &ModelParams,
    scheme: &SimScheme,
    master_seed: u64,
    stream: u64,
) -> Result<PathResult, CoreError> {
    run_path_impl(x0, a, b, params, scheme, master_seed, stream, None)
}

/// As [`run_path`], also recording (t, X_t) after every step into `trace`.
#[allow(clippy::too_many_arguments)]
pub fn run_path_traced(
    x0: f64,
    a: f64,
    b: f64,
    params: &ModelParams,
    scheme: &SimScheme,
    master_seed: u64,
    stream: u64,
    trace: &mut Vec<(f64, f64)>,
) -> Result<PathResult, CoreError> {
    run_path_impl(x0, a, b, params, scheme, master_seed, stream, Some(trace))
}

#[allow(clippy::too_many_arguments)]
fn run_path_impl(
    x0: f64,
    a: f64,
    b: f64,
    params: &ModelParams,
    scheme: &SimScheme,
    master_seed: u64,
    stream: u64,
    mut trace: Option<&mut Vec<(f64, f64)>>,
) -> Result<PathResult, CoreError> {
    scheme.validate(params)?;
    check_thresholds(x0, a, b, scheme)?;

    let mut rng = path_rng(master_seed, stream);
    let mut x = x0;
    let mut t = 0.0f64;
    let mut steps = 0u64;
    let mut clamped_negative = false;

    if let Some(tr) = trace.as_deref_mut() {
        tr.push((0.0, x0));
    }

    // Initial state may already sit past a target.
    if let Some(reason) = classify_state(x, a, b, scheme) {
        return Ok(PathResult {
            exit_reason: reason,
            exit_time: 0.0,
            final_state: x,
            steps: 0,
            seed: stream,
            clamped_negative: x < 0.0,
            budget_exhausted: false,
        });
    }

    loop {
        if t >= scheme.t_max {
            return Ok(PathResult {
                exit_reason: ExitReason::Timeout,
                exit_time: scheme.t_max,
                final_state: x,
                steps,
                seed: stream,
                clamped_negative,
                budget_exhausted: false,
            });
        }
        if steps >= scheme.max_steps {
            return Ok(PathResult {
                exit_reason: ExitReason::Timeout,
                exit_time: scheme.t_max,
                final_state: x,
                steps,
                seed: stream,
                clamped_negative,
                budget_exhausted: true,
            });
        }
        let dt = adaptive_dt(x, params, scheme).min(scheme.t_max - t);
        let next = step(x, dt, params, scheme, &mut rng);
        if next < 0.0 {
            clamped_negative = true;
        }
        t += dt;
        steps += 1;
        x = next;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push((t, x));
        }
        if let Some(reason) = classify_state(x, a, b, scheme) {
            return Ok(PathResult {
                exit_reason: reason,
                exit_time: t,
                final_state: x,
                steps,
                seed: stream,
                clamped_negative,
                budget_exhausted: false,
            });
        }
    }
}

/// Monte Carlo estimate of the stopped Dynkin residual
///   E[ g(X_{t ^ gamma}) - g(x0) - int_0^{t ^ gamma} Lg(X_s) ds ]
/// with gamma the exit time of (a, b), Lg held piecewise-constant in time at
/// step resolution. Returns the mean with a 95% normal CI.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualEstimate {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_paths: usize,
}

/// Piecewise-linear cache of u -> Lg(u) on a log grid; evaluating the
/// generator fresh at every step would repeat identical quadratures, and the
/// interpolation error (~1e-8 relative at 4096 nodes) is far below the Monte
/// Carlo resolution.
struct LgInterpolant {
    ln_lo: f64,
    ln_step: f64,
    values: Vec<f64>,
}

impl LgInterpolant {
    fn build(
        f: &TestFunction,
        lo: f64,
        hi: f64,
        params: &ModelParams,
        nodes: usize,
    ) -> Result<Self, CoreError> {
        use rayon::prelude::*;
        let ln_lo = lo.ln();
        let ln_step = (hi.ln() - ln_lo) / (nodes - 1) as f64;
        let results: Vec<Result<f64, CoreError>> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let u = (ln_lo + i as f64 * ln_step).exp();
                let tol = default_abs_tol(f, u);
                let ev = match eval_generator(f, u, params, tol) {
                    Ok(ev) => ev,
                    Err(CoreError::Tolerance { achieved, .. }) => {
                        eval_generator(f, u, params, achieved * 2.0)?
                    }
                    Err(e) => return Err(e),
                };
                Ok(ev.total)
            })
            .collect();
        let mut values = Vec::with_capacity(nodes);
        for r in results {
            values.push(r?);
        }
        Ok(Self { ln_lo, ln_step, values })
    }

    fn eval(&self, u: f64) -> f64 {
        let pos = (u.ln() - self.ln_lo) / self.ln_step;
        if pos <= 0.0 {
            return self.values[0];
        }
        let max = (self.values.len() - 1) as f64;
        if pos >= max {
            return *self.values.last().unwrap();
        }
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

#[allow(clippy::too_many_arguments)]
pub fn martingale_residual(
    f: &TestFunction,
    x0: f64,
    a: f64,
    b: f64,
    t: f64,
    params: &ModelParams,
    scheme: &SimScheme,
    n_paths: usize,
    master_seed: u64,
) -> Result<ResidualEstimate, CoreError> {
    use rayon::prelude::*;
    assert!(n_paths >= 2 && t >= 0.0);
    scheme.validate(params)?;
    check_thresholds(x0, a, b, scheme)?;
    if !(a > 0.0 && b.is_finite()) {
        return Err(CoreError::Sim("residual experiment needs finite 0 < a < b".into()));
    }

    let reg = check_regularity(f, 0.5 * a, f.regularity_delta(), 32);
    if !reg.bounded {
        let (u, z) = reg.witness.unwrap_or((a, 1.0));
        return Err(CoreError::Regularity { tag: f.tag().to_string(), u, z });
    }

    let lg = LgInterpolant::build(f, a * 0.999, b * 1.001, params, 4096)?;

    let residuals: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(master_seed, i as u64);
            let mut x = x0;
            let mut clock = 0.0f64;
            let mut integral = 0.0f64;
            let mut steps = 0u64;
            while clock < t && x > a && x < b && steps < scheme.max_steps {
                let dt = adaptive_dt(x, params, scheme).min(t - clock);
                integral += lg.eval(x) * dt;
                x = step(x, dt, params, scheme, &mut rng);
                clock += dt;
                steps += 1;
            }
            let x_eval = x.max(scheme.x_min * 1e-6);
            f.eval(x_eval) - f.eval(x0) - integral
        })
        .collect();

    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let half = 1.959_963_984_540_054 * (var / n).sqrt();
    Ok(ResidualEstimate {
        mean,
        ci_lo: mean - half,
        ci_hi: mean + half,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn neveu_scheme() -> (ModelParams, SimScheme) {
        let p = ModelParams::neveu();
        let s = SimScheme::defaults(p.r());
        (p, s)
    }

    #[test]
    fn zero_dt_is_identity() {
        let (p, s) = neveu_scheme();
        let mut rng = path_rng(1, 0);
        let d = step_detailed(1.0, 0.0, &p, &s, &mut rng);
        assert_eq!(d.next, 1.0);
        assert_eq!(d.n_small, 0);
        assert_eq!(d.n_big, 0);
        assert_eq!(d.gauss, 0.0);
    }

    #[test]
    fn pure_drift_when_no_jumps_drawn() {
        // With tiny dt the Poisson draws are 0 with overwhelming probability;
        // scan a few streams for one such step and check the closed form.
        let (p, mut s) = neveu_scheme();
        s.gauss_correction = false;
        let x = 1.0;
        let dt = 1e-9;
        for stream in 0..50 {
            let mut rng = path_rng(7, stream);
            let d = step_detailed(x, dt, &p, &s, &mut rng);
            if d.n_small == 0 && d.n_big == 0 {
                let want = x - x.powf(p.beta()) * (p.r() / s.eps).ln() * dt;
                assert_relative_eq!(d.next, want, max_relative = 1e-12);
                return;
            }
        }
        panic!("no jump-free step found in 50 streams");
    }

    #[test]
    fn step_components_sum_exactly() {
        let (p, s) = neveu_scheme();
        let mut rng = path_rng(3, 5);
        for _ in 0..200 {
            let d = step_detailed(0.8, 1e-3, &p, &s, &mut rng);
            assert_eq!(d.next, 0.8 + d.small_sum + d.drift + d.gauss + d.big_sum);
        }
    }

    #[test]
    fn compensated_increment_has_zero_mean_without_big_jumps() {
        // E[(next - x) | no big jump] = 0: the retained jumps are exactly
        // compensated and the Gaussian is centered. 1e6 single steps, mean
        // within 4 standard errors.
        let (p, s) = neveu_scheme();
        let dt = 1e-3;
        for (case, x) in [(0u64, 0.5f64), (1, 1.0), (2, 2.0)] {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut kept = 0usize;
            let n = 1_000_000;
            let mut rng = path_rng(11 + case, 0);
            for _ in 0..n {
                let d = step_detailed(x, dt, &p, &s, &mut rng);
                if d.n_big == 0 {
                    let inc = d.next - x;
                    sum += inc;
                    sumsq += inc * inc;
                    kept += 1;
                }
            }
            let mean = sum / kept as f64;
            let var = sumsq / kept as f64 - mean * mean;
            let se = (var / kept as f64).sqrt();
            assert!(
                mean.abs() < 4.0 * se,
                "x={x}: conditional mean {mean:.3e} exceeds 4 se {:.3e}",
                4.0 * se
            );
        }
    }

    #[test]
    fn immediate_exit_when_starting_at_target() {
        let (p, s) = neveu_scheme();
        let res = run_path(0.5, 0.5, 2.0, &p, &s, 1, 0).unwrap();
        assert_eq!(res.exit_reason, ExitReason::HitLower { a: 0.5 });
        assert_eq!(res.exit_time, 0.0);
        assert_eq!(res.steps, 0);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let (p, s) = neveu_scheme();
        assert!(run_path(1.0, 1e-9, 2.0, &p, &s, 1, 0).is_err());
        assert!(run_path(1.0, 0.5, 1e9, &p, &s, 1, 0).is_err());
        assert!(run_path(1.0, 2.0, 1.5, &p, &s, 1, 0).is_err());
        assert!(run_path(-1.0, 0.5, 2.0, &p, &s, 1, 0).is_err());
        // Starts at or past a target exit immediately instead of erroring.
        let res = run_path(1.0, 2.0, 4.0, &p, &s, 1, 0).unwrap();
        assert_eq!(res.exit_reason, ExitReason::HitLower { a: 2.0 });
        let res = run_path(1.0, 0.5, 0.8, &p, &s, 1, 0).unwrap();
        assert_eq!(res.exit_reason, ExitReason::HitUpper { b: 0.8 });
    }

    #[test]
    fn exit_reasons_respect_thresholds() {
        let (p, s) = neveu_scheme();
        for stream in 0..64 {
            let res = run_path(1.0, 0.5, 2.0, &p, &s, 42, stream).unwrap();
            match res.exit_reason {
                ExitReason::HitLower { a } => assert!(res.final_state <= a),
                ExitReason::HitUpper { b } => assert!(res.final_state >= b),
                ExitReason::ExtinctProxy => assert!(res.final_state <= s.x_min),
                ExitReason::ExplodedProxy => assert!(res.final_state >= s.x_max),
                ExitReason::Timeout => assert_eq!(res.exit_time, s.t_max),
            }
            assert!(res.exit_time <= s.t_max);
            assert_eq!(res.seed, stream);
        }
    }

    #[test]
    fn identical_seed_is_bit_identical_across_threads() {
        let (p, s) = neveu_scheme();
        let run_all = |threads: usize| -> Vec<PathResult> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                use rayon::prelude::*;
                (0..96u64)
                    .into_par_iter()
                    .map(|i| run_path(1.0, 0.5, 2.0, &p, &s, 2024, i).unwrap())
                    .collect()
            })
        };
        let one = run_all(1);
        let four = run_all(4);
        assert_eq!(one, four);
        let again = run_all(2);
        assert_eq!(one, again);
    }

    #[test]
    fn traced_path_matches_untraced() {
        let (p, s) = neveu_scheme();
        let plain = run_path(1.0, 0.5, 2.0, &p, &s, 5, 3).unwrap();
        let mut trace = Vec::new();
        let traced = run_path_traced(1.0, 0.5, 2.0, &p, &s, 5, 3, &mut trace).unwrap();
        assert_eq!(plain, traced);
        assert_eq!(trace.len() as u64, traced.steps + 1);
        assert_eq!(trace[0], (0.0, 1.0));
        assert_eq!(trace.last().unwrap().1, traced.final_state);
    }

    #[test]
    fn residual_zero_horizon_and_constant_function() {
        let (p, s) = neveu_scheme();
        let f = TestFunction::exp_neg(1.0);
        let res = martingale_residual(&f, 1.0, 0.25, 4.0, 0.0, &p, &s, 16, 9).unwrap();
        assert_eq!(res.mean, 0.0);
        assert_eq!(res.ci_lo, 0.0);

        let c = TestFunction::constant(1.0);
        let res = martingale_residual(&c, 1.0, 0.25, 4.0, 0.3, &p, &s, 16, 9).unwrap();
        assert_eq!(res.mean, 0.0);
        assert_eq!(res.ci_hi, 0.0);
    }

    #[test]
    fn residual_rejects_irregular_function() {
        let (p, s) = neveu_scheme();
        let ident = TestFunction::from_parts(
            "identity",
            |u| u,
            |_| 1.0,
            |_| 0.0,
            (0.0, f64::INFINITY),
            None,
        );
        match martingale_residual(&ident, 1.0, 0.25, 4.0, 0.5, &p, &s, 16, 3) {
            Err(CoreError::Regularity { z, .. }) => assert!(z > 1.0),
            other => panic!("expected regularity failure, got {other:?}"),
        }
    }

    #[test]
    fn residual_ci_contains_zero_for_dynkin_case() {
        let (p, s) = neveu_scheme();
        let f = TestFunction::exp_neg(1.0);
        let res = martingale_residual(&f, 1.0, 0.25, 4.0, 0.5, &p, &s, 2000, 31).unwrap();
        assert!(
            res.ci_lo <= 0.0 && 0.0 <= res.ci_hi,
            "95% CI [{}, {}] misses 0",
            res.ci_lo,
            res.ci_hi
        );
    }

    #[test]
    fn adaptive_dt_respects_caps() {
        let p = ModelParams::new(3.0, 0.0, 1.0).unwrap();
        let mut s = SimScheme::defaults(1.0);
        s.eps_state_frac = Some(1e-3);
        // At x = 1e5 the jump cap and the Gaussian resolution cap both bind
        // far below dt_max.
        let dt = adaptive_dt(1e5, &p, &s);
        assert!(dt < s.dt_max);
        let eps = s.eps_eff(1e5, 1.0);
        let var = 1e5f64.powf(3.0) * eps * dt;
        assert!(var.sqrt() <= GAUSS_RES_FRAC * 1e5 * 1.0001);
    }
}
