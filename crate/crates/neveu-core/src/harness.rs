//! Experiment orchestration: Monte Carlo passage estimators with Wilson
//! confidence intervals, the (beta, theta) phase-diagram sweep, analytic
//! bound-vs-estimate comparison reports, and the built-in verification
//! scenarios exposed by the CLI.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    canonical_lambda0, certify, classify, explosion_threshold_u0, passage_lower_bound_down,
    power_gap_threshold, BoundCertificate, BoundaryClassification, Direction,
};
use crate::error::CoreError;
use crate::model::ModelParams;
use crate::serde_util::maybe_inf;
use crate::sim::{run_path, ExitReason, PathResult, SimScheme};
use crate::test_functions::TestFunction;

const Z_95: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `successes` out of `n` trials. Behaves
/// correctly at frequencies near 0 and 1, which is where extinction and
/// explosion estimates live.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    assert!(n > 0 && successes <= n);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z_95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    (((center - half).max(0.0)), ((center + half).min(1.0)))
}

/// Exit-reason tallies for a batch of paths, plus scheme-health counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCounts {
    pub hit_lower: u64,
    pub hit_upper: u64,
    pub extinct: u64,
    pub exploded: u64,
    pub timeout: u64,
    /// Steps where the Gaussian correction overshot below zero; a large
    /// count means eps is too coarse for the state scale.
    pub negative_clamps: u64,
    pub budget_exhausted: u64,
}

impl BatchCounts {
    pub fn total(&self) -> u64 {
        self.hit_lower + self.hit_upper + self.extinct + self.exploded + self.timeout
    }

    fn absorb(&mut self, r: &PathResult) {
        match r.exit_reason {
            ExitReason::HitLower { .. } => self.hit_lower += 1,
            ExitReason::HitUpper { .. } => self.hit_upper += 1,
            ExitReason::ExtinctProxy => self.extinct += 1,
            ExitReason::ExplodedProxy => self.exploded += 1,
            ExitReason::Timeout => self.timeout += 1,
        }
        if r.clamped_negative {
            self.negative_clamps += 1;
        }
        if r.budget_exhausted {
            self.budget_exhausted += 1;
        }
    }
}

/// Which crossing counts as success in a passage estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassageDirection {
    /// Lower target crossed first (includes falling to the extinction proxy).
    Down,
    /// Upper target crossed first (includes the explosion proxy).
    Up,
}

impl std::str::FromStr for PassageDirection {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "down" => Ok(Self::Down),
            "up" => Ok(Self::Up),
            other => Err(CoreError::InvalidParams(format!(
                "direction must be `down` or `up`, got `{other}`"
            ))),
        }
    }
}

/// Empirical passage probability with a 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageEstimate {
    pub p_hat: f64,
    pub n: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Digest of (params, scheme, x0, a, b, direction, n, seed).
    pub config_hash: String,
    pub counts: BatchCounts,
}

impl PassageEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable digest of a full experiment configuration; bit-exact in every
/// float (hashes the IEEE-754 payloads).
#[allow(clippy::too_many_arguments)]
pub fn config_hash(
    params: &ModelParams,
    scheme: &SimScheme,
    x0: f64,
    a: f64,
    b: f64,
    direction: PassageDirection,
    n_paths: u64,
    seed: u64,
) -> String {
    let mut s = String::with_capacity(256);
    for v in [
        params.beta(),
        params.theta(),
        params.r(),
        scheme.eps,
        scheme.dt_max,
        scheme.max_jumps_per_step,
        scheme.x_min,
        scheme.x_max,
        scheme.t_max,
        scheme.eps_state_frac.unwrap_or(-1.0),
        x0,
        a,
        b,
    ] {
        s.push_str(&format!("{:016x}|", v.to_bits()));
    }
    s.push_str(&format!(
        "{}|{}|{n_paths}|{seed}|{}",
        scheme.gauss_correction,
        scheme.max_steps,
        match direction {
            PassageDirection::Down => "down",
            PassageDirection::Up => "up",
        }
    ));
    format!("{:016x}", fnv1a(s.as_bytes()))
}

/// Run `n_paths` independent paths (streams 0..n under `master_seed`) and
/// tally exits. Aggregation is count-based, so the result is identical at
/// any thread count.
pub fn run_batch(
    params: &ModelParams,
    scheme: &SimScheme,
    x0: f64,
    a: f64,
    b: f64,
    n_paths: u64,
    master_seed: u64,
) -> Result<(Vec<PathResult>, BatchCounts), CoreError> {
    let results: Vec<Result<PathResult, CoreError>> = (0..n_paths)
        .into_par_iter()
        .map(|i| run_path(x0, a, b, params, scheme, master_seed, i))
        .collect();
    let mut paths = Vec::with_capacity(n_paths as usize);
    let mut counts = BatchCounts::default();
    for r in results {
        let pr = r?;
        counts.absorb(&pr);
        paths.push(pr);
    }
    Ok((paths, counts))
}

/// Monte Carlo estimate of a passage probability.
#[allow(clippy::too_many_arguments)]
pub fn estimate_passage(
    params: &ModelParams,
    scheme: &SimScheme,
    x0: f64,
    a: f64,
    b: f64,
    direction: PassageDirection,
    n_paths: u64,
    master_seed: u64,
) -> Result<PassageEstimate, CoreError> {
    if n_paths < 100 {
        return Err(CoreError::InvalidParams(format!(
            "need at least 100 paths, got {n_paths}"
        )));
    }
    let (_, counts) = run_batch(params, scheme, x0, a, b, n_paths, master_seed)?;
    let successes = match direction {
        PassageDirection::Down => counts.hit_lower + counts.extinct,
        PassageDirection::Up => counts.hit_upper + counts.exploded,
    };
    let (ci_lo, ci_hi) = wilson_interval(successes, n_paths);
    Ok(PassageEstimate {
        p_hat: successes as f64 / n_paths as f64,
        n: n_paths,
        ci_lo,
        ci_hi,
        config_hash: config_hash(params, scheme, x0, a, b, direction, n_paths, master_seed),
        counts,
    })
}

/// An analytic lower bound matched to an estimate configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBound {
    pub label: String,
    pub value: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub bound: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// ci_lo - bound; negative slack within one CI width still passes.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub all_pass: bool,
}

/// Compare Monte Carlo estimates against analytic lower bounds. A row passes
/// when slack = ci_lo - bound exceeds minus one CI width (equivalently,
/// ci_hi > bound); a hard contradiction ci_hi < bound always fails.
pub fn compare_bounds(
    inputs: &[(PassageEstimate, AnalyticBound)],
) -> Result<ComparisonReport, CoreError> {
    let mut rows = Vec::with_capacity(inputs.len());
    for (i, (est, bound)) in inputs.iter().enumerate() {
        if est.config_hash != bound.config_hash {
            return Err(CoreError::HashMismatch {
                row: i,
                estimate: est.config_hash.clone(),
                bound: bound.config_hash.clone(),
            });
        }
        let slack = est.ci_lo - bound.value;
        let pass = slack > -(est.ci_width());
        rows.push(ComparisonRow {
            label: bound.label.clone(),
            bound: bound.value,
            p_hat: est.p_hat,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            slack,
            pass,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(ComparisonReport { rows, all_pass })
}

/// Heuristic thresholds for the coming-down-from-infinity proxy. The real
/// definition is a double limit; two starting decades with agreeing, large
/// estimates is the desk-scale stand-in, and these knobs are config-exposed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdiHeuristics {
    /// Lower target for the comedown statistic.
    pub a: f64,
    /// Time horizon for the comedown statistic.
    pub t: f64,
    /// The two starting points.
    pub x_mid: f64,
    pub x_high: f64,
    /// Both estimates at or above this level indicate coming down.
    pub high_threshold: f64,
    /// The high-start estimate below this level indicates staying infinite.
    pub low_threshold: f64,
    /// Frequencies below this level are treated as null for predicted-false
    /// extinction/explosion axes.
    pub null_freq: f64,
}

impl Default for CdiHeuristics {
    fn default() -> Self {
        Self {
            a: 10.0,
            t: 1.0,
            x_mid: 1e3,
            x_high: 1e5,
            high_threshold: 0.9,
            low_threshold: 0.05,
            null_freq: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// One sweep cell: prediction, observed frequencies, comedown statistics,
/// and the verdict under the documented decision rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta: f64,
    pub theta: f64,
    pub predicted: BoundaryClassification,
    pub observed_extinct_freq: f64,
    pub observed_explode_freq: f64,
    pub extinct_ci: (f64, f64),
    pub explode_ci: (f64, f64),
    /// P(hit a before t) from the mid and high starts.
    pub comedown_mid: PassageEstimate,
    pub comedown_high: PassageEstimate,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Supported,
    Contradicted,
    Unclear,
}

/// Free-run + two-start comedown experiments for every (beta, theta) cell.
/// Per-cell failures are recorded in the cell and the sweep continues.
pub fn sweep_phase_diagram(
    grid: &[(f64, f64)],
    base_scheme: &SimScheme,
    n_paths: u64,
    master_seed: u64,
    heur: &CdiHeuristics,
) -> Vec<SweepCell> {
    grid.iter()
        .enumerate()
        .map(|(idx, &(beta, theta))| {
            sweep_cell(beta, theta, base_scheme, n_paths, master_seed, idx as u64, heur)
        })
        .collect()
}

/// The default 49-cell sweep grid: beta, theta in {0, 0.5, ..., 3}.
pub fn default_sweep_grid() -> Vec<(f64, f64)> {
    let levels = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let mut grid = Vec::with_capacity(49);
    for &beta in &levels {
        for &theta in &levels {
            grid.push((beta, theta));
        }
    }
    grid
}

/// Scheme defaults for sweep cells: state-adaptive truncation (cells span
/// state scales from the extinction proxy to 1e5) and a short horizon so
/// that asymptotic drift to 0 or infinity does not masquerade as a
/// finite-time boundary hit.
pub fn sweep_scheme(r: f64) -> SimScheme {
    let mut s = SimScheme::defaults(r);
    s.eps_state_frac = Some(1e-3);
    s.t_max = 1.5;
    s.max_steps = 300_000;
    s
}

fn sweep_cell(
    beta: f64,
    theta: f64,
    base_scheme: &SimScheme,
    n_paths: u64,
    master_seed: u64,
    cell_idx: u64,
    heur: &CdiHeuristics,
) -> SweepCell {
    let seed_of = |exp: u64| master_seed.wrapping_add(cell_idx * 1009 + exp);
    let mut notes = Vec::new();

    let empty_estimate = |hash: &str| PassageEstimate {
        p_hat: 0.0,
        n: 0,
        ci_lo: 0.0,
        ci_hi: 1.0,
        config_hash: hash.to_string(),
        counts: BatchCounts::default(),
    };

    let fail_cell = |predicted, msg: String| SweepCell {
        beta,
        theta,
        predicted,
        observed_extinct_freq: f64::NAN,
        observed_explode_freq: f64::NAN,
        extinct_ci: (0.0, 1.0),
        explode_ci: (0.0, 1.0),
        comedown_mid: empty_estimate("n/a"),
        comedown_high: empty_estimate("n/a"),
        verdict: Verdict::Inconclusive,
        notes: vec![],
        error: Some(msg),
    };

    let params = match ModelParams::new(beta, theta, 1.0) {
        Ok(p) => p,
        Err(e) => {
            return fail_cell(
                BoundaryClassification { extinct: false, explodes: false, comes_down: false },
                e.to_string(),
            )
        }
    };
    let predicted = classify(&params);

    // Free run from x0 = 1: extinction and explosion frequencies come from
    // the same batch.
    let free = run_batch(&params, base_scheme, 1.0, 0.0, f64::INFINITY, n_paths, seed_of(0));
    let (_, counts) = match free {
        Ok(x) => x,
        Err(e) => return fail_cell(predicted, e.to_string()),
    };
    let extinct_ci = wilson_interval(counts.extinct, n_paths);
    let explode_ci = wilson_interval(counts.exploded, n_paths);
    let extinct_freq = counts.extinct as f64 / n_paths as f64;
    let explode_freq = counts.exploded as f64 / n_paths as f64;
    if counts.budget_exhausted > 0 {
        notes.push(format!("{} free-run paths exhausted the step budget", counts.budget_exhausted));
    }

    // Comedown statistic from two starting decades. The explosion proxy sits
    // three decades above the high start so upward excursions can return
    // instead of being absorbed.
    let mut cd_scheme = *base_scheme;
    cd_scheme.t_max = heur.t;
    cd_scheme.x_max = cd_scheme.x_max.max(heur.x_high * 1e3);
    let comedown = |x0: f64, exp: u64| {
        estimate_passage(
            &params,
            &cd_scheme,
            x0,
            heur.a,
            f64::INFINITY,
            PassageDirection::Down,
            n_paths,
            seed_of(exp),
        )
    };
    let comedown_mid = match comedown(heur.x_mid, 1) {
        Ok(e) => e,
        Err(e) => return fail_cell(predicted, e.to_string()),
    };
    let comedown_high = match comedown(heur.x_high, 2) {
        Ok(e) => e,
        Err(e) => return fail_cell(predicted, e.to_string()),
    };

    // Axis decisions. Proxy crossings are evidence for a behavior, never
    // decisive against a prediction: asymptotic drift can cross any finite
    // proxy, so predicted-false axes only contradict on comedown evidence.
    let positive_axis = |predicted_true: bool, ci: (f64, f64)| -> Axis {
        if predicted_true {
            if ci.0 > 0.0 {
                Axis::Supported
            } else {
                Axis::Unclear
            }
        } else if ci.1 < heur.null_freq {
            Axis::Supported
        } else {
            Axis::Unclear
        }
    };
    let extinct_axis = positive_axis(predicted.extinct, extinct_ci);
    let explode_axis = positive_axis(predicted.explodes, explode_ci);
    if !predicted.extinct && extinct_ci.1 >= heur.null_freq {
        notes.push(format!(
            "extinct-proxy frequency {extinct_freq:.3} with extinction predicted impossible; \
             proxy crossings can reflect extinguishing drift, left inconclusive"
        ));
    }
    if !predicted.explodes && explode_ci.1 >= heur.null_freq {
        notes.push(format!(
            "exploded-proxy frequency {explode_freq:.3} with explosion predicted impossible; \
             proxy crossings can reflect drift to infinity, left inconclusive"
        ));
    }

    let agree = (comedown_mid.p_hat - comedown_high.p_hat).abs()
        <= comedown_mid.ci_width() + comedown_high.ci_width();
    let both_high = comedown_mid.p_hat >= heur.high_threshold
        && comedown_high.p_hat >= heur.high_threshold;
    let high_low = comedown_high.p_hat <= heur.low_threshold;
    let cdi_axis = if predicted.comes_down {
        if both_high && agree {
            Axis::Supported
        } else if high_low {
            Axis::Contradicted
        } else {
            Axis::Unclear
        }
    } else if high_low {
        Axis::Supported
    } else if both_high && agree {
        Axis::Contradicted
    } else {
        Axis::Unclear
    };

    let axes = [extinct_axis, explode_axis, cdi_axis];
    let verdict = if axes.contains(&Axis::Contradicted) {
        Verdict::Inconsistent
    } else if axes.contains(&Axis::Unclear) {
        Verdict::Inconclusive
    } else {
        Verdict::Consistent
    };

    SweepCell {
        beta,
        theta,
        predicted,
        observed_extinct_freq: extinct_freq,
        observed_explode_freq: explode_freq,
        extinct_ci,
        explode_ci,
        comedown_mid,
        comedown_high,
        verdict,
        notes,
        error: None,
    }
}

/// The four built-in bound-verification scenarios. The string tokens are the
/// CLI contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundCase {
    /// Downward crossing vs the exponential test-function bound.
    #[serde(rename = "eq4.44")]
    DownExp,
    /// Upward crossing vs the capped-exponential bound.
    #[serde(rename = "eq4.43")]
    UpCapped,
    /// Extinction-regime floor from the power-gap function.
    #[serde(rename = "eq4.45")]
    ExtinctionPower,
    /// Explosion-regime floor from the 1 - u^{-rho} function.
    #[serde(rename = "eq4.46")]
    ExplosionPower,
}

impl std::str::FromStr for BoundCase {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "eq4.44" => Ok(Self::DownExp),
            "eq4.43" => Ok(Self::UpCapped),
            "eq4.45" => Ok(Self::ExtinctionPower),
            "eq4.46" => Ok(Self::ExplosionPower),
            other => Err(CoreError::InvalidParams(format!(
                "unknown case `{other}` (expected eq4.43|eq4.44|eq4.45|eq4.46)"
            ))),
        }
    }
}

impl BoundCase {
    pub fn token(&self) -> &'static str {
        match self {
            Self::DownExp => "eq4.44",
            Self::UpCapped => "eq4.43",
            Self::ExtinctionPower => "eq4.45",
            Self::ExplosionPower => "eq4.46",
        }
    }
}

/// Fully resolved configuration of a verification scenario.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    pub case: BoundCase,
    pub params: ModelParams,
    pub scheme: SimScheme,
    pub x0: f64,
    pub a: f64,
    #[serde(with = "maybe_inf")]
    pub b: f64,
    pub direction: PassageDirection,
    pub bound_label: String,
    pub bound_value: f64,
}

/// Report from one verification scenario: the certificate behind the bound,
/// the Monte Carlo estimate, and the comparison verdict.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub certificate: BoundCertificate,
    pub estimate: PassageEstimate,
    pub comparison: ComparisonReport,
}

/// Resolve a scenario's model, scheme, thresholds, certificate and analytic
/// bound value. Overrides apply to (beta, theta, r, x0) where meaningful.
pub fn resolve_case(
    case: BoundCase,
    overrides: &CaseOverrides,
) -> Result<(VerifyConfig, BoundCertificate), CoreError> {
    match case {
        BoundCase::DownExp => {
            let params = ModelParams::new(
                overrides.beta.unwrap_or(1.0),
                overrides.theta.unwrap_or(1.0),
                overrides.r.unwrap_or(1.0),
            )?;
            let a = overrides.a.unwrap_or(0.5);
            let b = overrides.b.unwrap_or(2.0);
            let x0 = overrides.x0.unwrap_or(1.0);
            let lambda0 = canonical_lambda0(a, b, &params);
            let f = TestFunction::exp_neg(lambda0);
            let cert = certify(&f, (a, b), Direction::LGeDg, &params, 128)?;
            let bound = passage_lower_bound_down(&f, a, b, x0, &cert)?;
            let cert = cert.with_implied_bound("down_crossing", bound, a, b, x0);
            let scheme = SimScheme::defaults(params.r());
            Ok((
                VerifyConfig {
                    case,
                    params,
                    scheme,
                    x0,
                    a,
                    b,
                    direction: PassageDirection::Down,
                    bound_label: format!("exp_neg(lambda0={lambda0:.6}) down-crossing bound"),
                    bound_value: bound,
                },
                cert,
            ))
        }
        BoundCase::UpCapped => {
            let params = ModelParams::new(
                overrides.beta.unwrap_or(1.0),
                overrides.theta.unwrap_or(1.0),
                overrides.r.unwrap_or(1.0),
            )?;
            let a = overrides.a.unwrap_or(0.5);
            let b = overrides.b.unwrap_or(2.0);
            let x0 = overrides.x0.unwrap_or(1.0);
            let f = TestFunction::exp_capped(b);
            let cert = certify(&f, (a, b), Direction::LGeDg, &params, 128)?;
            // Classical form of the bound: divide by the global sup of the
            // capped exponential rather than the sharper sup over [a, b).
            let sup = f.limit_at_inf().expect("capped function is bounded");
            let bound = ((f.eval(x0) - f.eval(a)) / sup).max(0.0);
            let cert = cert.with_implied_bound("up_crossing", bound, a, b, x0);
            let scheme = SimScheme::defaults(params.r());
            Ok((
                VerifyConfig {
                    case,
                    params,
                    scheme,
                    x0,
                    a,
                    b,
                    direction: PassageDirection::Up,
                    bound_label: format!("exp_capped(b={b}) up-crossing bound"),
                    bound_value: bound,
                },
                cert,
            ))
        }
        BoundCase::ExtinctionPower => {
            let params = ModelParams::new(
                overrides.beta.unwrap_or(0.5),
                overrides.theta.unwrap_or(0.0),
                overrides.r.unwrap_or(1.0),
            )?;
            let rho = overrides.rho.unwrap_or(0.25);
            let c = power_gap_threshold(params.beta(), rho)?;
            let x0 = overrides.x0.unwrap_or(c / 16.0);
            let f = TestFunction::power_gap(c, rho);
            let cert = certify(&f, (0.0, c), Direction::LGeDg, &params, 128)?;
            let bound = passage_lower_bound_down(&f, 0.0, c, x0, &cert)?;
            let cert = cert.with_implied_bound("extinction", bound, 0.0, c, x0);
            // State scale is c, decades below r: adapt the truncation and
            // tighten the extinction proxy.
            let mut scheme = SimScheme::defaults(params.r());
            scheme.eps_state_frac = Some(1e-3);
            scheme.x_min = c * 1e-6;
            scheme.t_max = 5.0;
            scheme.max_steps = 2_000_000;
            Ok((
                VerifyConfig {
                    case,
                    params,
                    scheme,
                    x0,
                    a: 0.0,
                    b: c,
                    direction: PassageDirection::Down,
                    bound_label: format!("power_gap(c={c:.6e},rho={rho}) extinction floor"),
                    bound_value: bound,
                },
                cert,
            ))
        }
        BoundCase::ExplosionPower => {
            let params = ModelParams::new(
                overrides.beta.unwrap_or(0.0),
                overrides.theta.unwrap_or(2.0),
                overrides.r.unwrap_or(1.0),
            )?;
            let rho = params.theta() - 1.0;
            let u0 = explosion_threshold_u0(&params)?;
            let x0 = overrides.x0.unwrap_or(4.0 * u0);
            let f = TestFunction::one_minus_inv_pow(rho);
            let cert = certify(&f, (u0, f64::INFINITY), Direction::LGeDg, &params, 128)?;
            let bound = (u0.powf(-rho) - x0.powf(-rho)).max(0.0);
            let cert = cert.with_implied_bound("explosion", bound, u0, f64::INFINITY, x0);
            let scheme = SimScheme::defaults(params.r());
            Ok((
                VerifyConfig {
                    case,
                    params,
                    scheme,
                    x0,
                    a: 0.0,
                    b: f64::INFINITY,
                    direction: PassageDirection::Up,
                    bound_label: format!("one_minus_inv_pow(rho={rho}) explosion floor (u0={u0})"),
                    bound_value: bound,
                },
                cert,
            ))
        }
    }
}

/// Optional overrides for the built-in scenarios.
#[derive(Debug, Clone, Copy, Default)]
pub struct CaseOverrides {
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub r: Option<f64>,
    pub x0: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rho: Option<f64>,
}

/// Run one verification scenario end to end.
pub fn verify_case(
    case: BoundCase,
    overrides: &CaseOverrides,
    n_paths: u64,
    master_seed: u64,
) -> Result<VerifyReport, CoreError> {
    let (config, certificate) = resolve_case(case, overrides)?;
    let estimate = estimate_passage(
        &config.params,
        &config.scheme,
        config.x0,
        config.a,
        config.b,
        config.direction,
        n_paths,
        master_seed,
    )?;
    let bound = AnalyticBound {
        label: config.bound_label.clone(),
        value: config.bound_value,
        config_hash: estimate.config_hash.clone(),
    };
    let comparison = compare_bounds(&[(estimate.clone(), bound)])?;
    Ok(VerifyReport { config, certificate, estimate, comparison })
}
