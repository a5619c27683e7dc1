//! Runs a config: builds the ensembles its claims need, evaluates the
//! claims and writes the result files.

use std::path::{Path, PathBuf};

use isoflow_core::flow::{default_dt, AdaptiveSettings, DistanceSettings, DistanceSimulator};
use isoflow_core::moments::{
    arratia_agreement, conditional_identity_residual, cross_moment_x2x, estimate_distance_moment,
    estimate_log_deficit_rate, estimate_lyapunov, fit_growth_exponent, mixed_moment, position_phi_moment,
    verify_recursion, ArratiaComparison, GROWTH_BURN_IN,
};
use isoflow_core::{double_factorial, CorrelationModel, DistanceEnsemble, FlowEnsemble, MomentEstimate};

use crate::claims::{growth_target, ClaimId, Source, Tolerance};
use crate::config::{ConfigIssue, ConfigSource, ExperimentConfig, Key};
use crate::error::{HarnessError, Result};
use crate::model::ModelSetup;
use crate::output::{self, ClaimRecord, ConstantsFile, Report, SeriesPoint, Target, SCHEMA_VERSION};
use crate::runner::{self, Progress};

/// Largest step accepted, as a multiple of `1/L′`.
pub const MAX_DT_LPRIME: f64 = 1e-2;
/// Points of the record grid used for the Itô identity checks.
pub const RECURSION_GRID: usize = 50;
/// Grid of the rescaled paths on `[0, 1]`.
pub const SCALED_GRID: usize = 50;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub progress: bool,
}

/// A validated config bound to its correlation model.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub setup: ModelSetup,
    pub dt: f64,
    /// Particles in increasing order.
    pub sorted: Vec<f64>,
    /// `order[i]` is the listed index of sorted particle `i`.
    pub order: Vec<usize>,
    progress: bool,
}

#[derive(Debug, Clone)]
pub struct ClaimOutcome {
    pub record: ClaimRecord,
    pub series: Vec<SeriesPoint>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: Report,
    pub series: Vec<(ClaimId, Vec<SeriesPoint>)>,
}

/// Sorted union with near-equal times merged.
pub fn merge_times(mut times: Vec<f64>) -> Vec<f64> {
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    times
}

impl Experiment {
    /// Applies the overrides in `opts` and checks the rules that depend on
    /// the correlation model.  `source` locates errors in the config text;
    /// `base` resolves relative table paths.
    pub fn prepare(
        mut config: ExperimentConfig,
        source: Option<&ConfigSource>,
        base: Option<&Path>,
        opts: &RunOptions,
    ) -> Result<Self> {
        if let Some(seed) = opts.seed {
            config.ensemble.base_seed = seed;
        }
        if let Some(dir) = &opts.output {
            config.output.directory = dir.clone();
        }
        let fail = |issue: ConfigIssue| match source {
            Some(s) => s.error(issue),
            None => HarnessError::Invalid(issue.message),
        };
        config.validate().map_err(fail)?;
        let setup = ModelSetup::from_config(&config.kernel, base)?;
        let lprime = setup.lprime();
        let limit = MAX_DT_LPRIME / lprime;
        let dt = match config.dynamics.dt {
            Some(dt) if dt > limit => {
                return Err(fail(ConfigIssue {
                    at: vec![Key::Name("dynamics"), Key::Name("dt")],
                    message: format!("dt {dt} exceeds 1e-2/L' = {limit:.3e} for this kernel"),
                }))
            }
            Some(dt) => dt,
            None => default_dt(lprime),
        };
        let rate_claims = config
            .claims
            .iter()
            .position(|c| matches!(c, ClaimId::Lyapunov | ClaimId::LogDeficitRate));
        if let Some(i) = rate_claims {
            if config.dynamics.t_max < 20.0 / lprime {
                return Err(fail(ConfigIssue {
                    at: vec![Key::Name("claims"), Key::Index(i)],
                    message: format!(
                        "claim {} needs t_max >= 20/L' = {:.3}",
                        config.claims[i],
                        20.0 / lprime
                    ),
                }));
            }
        }
        let mut order: Vec<usize> = (0..config.particles.len()).collect();
        order.sort_by(|&a, &b| config.particles[a].total_cmp(&config.particles[b]));
        let sorted = order.iter().map(|&i| config.particles[i]).collect();
        Ok(Self {
            config,
            setup,
            dt,
            sorted,
            order,
            progress: opts.progress,
        })
    }

    fn t_max(&self) -> f64 {
        self.config.dynamics.t_max
    }

    fn seed(&self) -> u64 {
        self.config.ensemble.base_seed
    }

    fn m(&self) -> usize {
        self.config.ensemble.replications
    }

    fn antithetic(&self) -> bool {
        self.config.ensemble.antithetic
    }

    /// Sorted index of listed particle `i`.
    fn sorted_index(&self, i: usize) -> usize {
        self.order.iter().position(|&o| o == i).expect("listed index in range")
    }

    /// `(u, v)` = larger and smaller of the first two listed particles.
    pub fn pair(&self) -> (f64, f64) {
        let (a, b) = (self.config.particles[0], self.config.particles[1]);
        (a.max(b), a.min(b))
    }

    fn progress(&self, label: &str, total: usize) -> Progress {
        Progress::new(label, total, self.progress)
    }

    fn settings(&self) -> AdaptiveSettings {
        AdaptiveSettings::with_dt(self.dt)
    }

    /// Times at which distance claims are evaluated, plus the record grid.
    pub fn distance_times(&self) -> Vec<f64> {
        let t = self.t_max();
        let mut times = self.config.dynamics.record_grid();
        times.extend([t / 100.0, t / 10.0, t / 4.0, t / 2.0, t]);
        merge_times(times)
    }

    pub fn flow_times(&self) -> Vec<f64> {
        let t = self.t_max();
        let mut times = vec![t / 4.0, t / 2.0, t];
        if let Some(r) = &self.config.dynamics.record_times {
            times.extend(r.iter().copied());
        }
        merge_times(times)
    }

    fn distance_ensemble(&self, times: &[f64], phi_power: Option<i32>, label: &str) -> Result<DistanceEnsemble> {
        let (u, v) = self.pair();
        let sim = DistanceSimulator::new(&self.setup.profile, self.dt, DistanceSettings::default())?;
        runner::distance_ensemble(
            &sim,
            u - v,
            times,
            self.m(),
            self.seed(),
            self.antithetic(),
            phi_power,
            &self.progress(label, self.m()),
        )
    }

    fn flow_ensemble(&self, times: &[f64], replications: usize, label: &str) -> Result<FlowEnsemble> {
        runner::flow_ensemble(
            &self.setup.profile,
            self.settings(),
            &self.sorted,
            times,
            replications,
            self.seed(),
            self.antithetic(),
            &self.progress(label, replications),
        )
    }

    /// Raw trajectories of all particles on `0` and the record grid.
    pub fn trajectories(&self, replications: usize) -> Result<FlowEnsemble> {
        let mut times = vec![0.0];
        times.extend(self.config.dynamics.record_grid());
        self.flow_ensemble(&merge_times(times), replications, "trajectories")
    }

    /// Two-particle view `[v, u]` of a sorted ensemble.
    fn pair_view(&self, ens: &FlowEnsemble) -> FlowEnsemble {
        let (a, b) = (self.sorted_index(0), self.sorted_index(1));
        let (iv, iu) = (a.min(b), a.max(b));
        let n = ens.particles();
        let positions = ens.positions.chunks(n).flat_map(|row| [row[iv], row[iu]]).collect();
        FlowEnsemble {
            initial_points: vec![ens.initial_points[iv], ens.initial_points[iu]],
            times: ens.times.clone(),
            positions,
            replications: ens.replications,
            antithetic: ens.antithetic,
        }
    }

    pub fn evaluate(&self) -> Result<Evaluation> {
        let claims = &self.config.claims;
        let needs = |f: fn(Source) -> bool| claims.iter().any(|c| f(c.source()));

        let distance = if needs(|s| s == Source::Distance) {
            Some(self.distance_ensemble(&self.distance_times(), None, "distance")?)
        } else {
            None
        };
        let flow = if needs(|s| s == Source::Flow) {
            Some(self.flow_ensemble(&self.flow_times(), self.m(), "flow")?)
        } else {
            None
        };
        let pair = flow.as_ref().map(|f| self.pair_view(f));

        let mut records = Vec::with_capacity(claims.len());
        let mut series = Vec::new();
        for &claim in claims {
            let outcome = match claim.source() {
                Source::Distance => self.distance_claim(claim, distance.as_ref().expect("distance ensemble"))?,
                Source::RecursionEnsemble(m) => self.recursion_claim(claim, m)?,
                Source::Flow => self.flow_claim(
                    claim,
                    flow.as_ref().expect("flow ensemble"),
                    pair.as_ref().expect("pair view"),
                )?,
                Source::Scaled => self.shrinkage_claim(claim)?,
                Source::Arratia => self.arratia_claim(claim)?.0,
            };
            records.push(outcome.record);
            if !outcome.series.is_empty() {
                series.push((claim, outcome.series));
            }
        }
        Ok(Evaluation {
            report: Report {
                schema_version: SCHEMA_VERSION.into(),
                base_seed: self.seed(),
                replications: self.m(),
                antithetic: self.antithetic(),
                dt: self.dt,
                t_max: self.t_max(),
                particles: self.config.particles.clone(),
                constants: self.setup.constants,
                claims: records,
            },
            series,
        })
    }

    fn distance_claim(&self, claim: ClaimId, ens: &DistanceEnsemble) -> Result<ClaimOutcome> {
        let t = self.t_max();
        let (u, v) = self.pair();
        let d = u - v;
        let lp = self.setup.lprime();
        let c = &self.setup.constants;
        let positive: Vec<f64> = ens.times.iter().copied().filter(|&s| s > 0.0).collect();
        let out = match claim {
            ClaimId::Lyapunov | ClaimId::LogDeficitRate => {
                let (target, f): (f64, &dyn Fn(f64) -> Result<MomentEstimate>) = if claim == ClaimId::Lyapunov {
                    (-lp / 2.0, &|s| Ok(estimate_lyapunov(ens, s)?))
                } else {
                    (-lp, &|s| Ok(estimate_log_deficit_rate(ens, &self.setup.profile, s)?))
                };
                let e = f(t)?;
                let Tolerance::Relative(rel) = claim.tolerance() else { unreachable!() };
                let pass = e.within_relative(target, rel);
                let series = positive
                    .iter()
                    .map(|&s| f(s).map(|e| point(&e, Target::Value(target))))
                    .collect::<Result<_>>()?;
                ClaimOutcome {
                    record: record(
                        claim,
                        Some(t),
                        &e,
                        Target::Value(target),
                        pass,
                        format!("relative error {:.4}", e.value / target - 1.0),
                    ),
                    series,
                }
            }
            ClaimId::Martingale => {
                let mut detail = Vec::new();
                let mut pass = true;
                for s in [t / 100.0, t / 10.0, t] {
                    let e = estimate_distance_moment(ens, 1, s)?;
                    pass &= e.within_errors(d, 3.0);
                    detail.push(format!("t={s}: z={:.2}", z_score(&e, d)));
                }
                let e = estimate_distance_moment(ens, 1, t)?;
                let series = ens
                    .times
                    .iter()
                    .map(|&s| estimate_distance_moment(ens, 1, s).map(|e| point(&e, Target::Value(d))))
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(claim, Some(t), &e, Target::Value(d), pass, detail.join(", ")),
                    series,
                }
            }
            ClaimId::OddMoment(n) => {
                let m = 2 * n as i32 + 1;
                let target = 2f64.powi(n as i32) * double_factorial(2 * n + 1) * d;
                let norm = |s: f64| s.powi(n as i32);
                let e = estimate_distance_moment(ens, m, t)?.scaled(norm(t));
                let Tolerance::Relative(rel) = claim.tolerance() else { unreachable!() };
                let series = positive
                    .iter()
                    .map(|&s| estimate_distance_moment(ens, m, s).map(|e| point(&e.scaled(norm(s)), Target::Value(target))))
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(
                        claim,
                        Some(t),
                        &e,
                        Target::Value(target),
                        e.within_relative(target, rel),
                        format!("relative error {:.4}", e.value / target - 1.0),
                    ),
                    series,
                }
            }
            ClaimId::EvenBracket(n) => {
                let m = 2 * n as i32 + 2;
                let base = 2f64.powi(n as i32) * double_factorial(2 * n + 2) * d.abs();
                let (lo, hi) = (c.c_star * base, c.c_upper_star * base);
                let norm = |s: f64| s.powf((2 * n + 1) as f64 / 2.0);
                let Tolerance::Bracket(k) = claim.tolerance() else { unreachable!() };
                let mut pass = true;
                let mut detail = Vec::new();
                for s in [t / 4.0, t / 2.0, t] {
                    let e = estimate_distance_moment(ens, m, s)?.scaled(norm(s));
                    let inside = e.value >= lo - k * e.std_error && e.value <= hi + k * e.std_error;
                    pass &= inside;
                    detail.push(format!("t={s}: {:.4}", e.value));
                }
                let e = estimate_distance_moment(ens, m, t)?.scaled(norm(t));
                let series = positive
                    .iter()
                    .map(|&s| {
                        estimate_distance_moment(ens, m, s).map(|e| point(&e.scaled(norm(s)), Target::Interval([lo, hi])))
                    })
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(claim, Some(t), &e, Target::Interval([lo, hi]), pass, detail.join(", ")),
                    series,
                }
            }
            ClaimId::Growth(m) => {
                let target = growth_target(m);
                let estimates: Vec<MomentEstimate> = positive
                    .iter()
                    .map(|&s| estimate_distance_moment(ens, m as i32, s))
                    .collect::<std::result::Result<_, _>>()?;
                let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
                let series = estimates.iter().map(|e| point(e, Target::Value(f64::NAN))).collect();
                let Tolerance::Absolute(tol) = claim.tolerance() else { unreachable!() };
                let rec = match fit_growth_exponent(&positive, &values, GROWTH_BURN_IN) {
                    Ok(fit) => {
                        let k = fit.times.len() as f64;
                        let se = fit.exponent.abs() * ((1.0 / fit.r_squared - 1.0).max(0.0) / (k - 2.0)).sqrt();
                        let mut detail = format!("r^2 = {:.5} over {} times", fit.r_squared, fit.times.len());
                        if fit.sign_warning {
                            detail.push_str(", non-positive estimates fitted by magnitude");
                        }
                        raw_record(
                            claim,
                            None,
                            fit.exponent,
                            se,
                            Target::Value(target),
                            (fit.exponent - target).abs() <= tol,
                            detail,
                        )
                    }
                    Err(e) => raw_record(claim, None, f64::NAN, f64::NAN, Target::Value(target), false, e.to_string()),
                };
                ClaimOutcome { record: rec, series }
            }
            _ => unreachable!("{claim} is not a distance claim"),
        };
        Ok(out)
    }

    fn recursion_claim(&self, claim: ClaimId, m: u32) -> Result<ClaimOutcome> {
        let t = self.t_max();
        let grid: Vec<f64> = (1..=RECURSION_GRID)
            .map(|k| t * k as f64 / RECURSION_GRID as f64)
            .collect();
        let ens = self.distance_ensemble(&grid, Some(m as i32), &format!("recursion m={m}"))?;
        let checks: Vec<f64> = (1..=5).map(|k| t * k as f64 / 5.0).collect();
        let r = verify_recursion(&ens, m as i32, &checks)?;
        let last = r.rows.last().expect("five rows");
        let detail = r
            .rows
            .iter()
            .map(|row| format!("t={}: z={:.2}", row.time, row.combined_z))
            .collect::<Vec<_>>()
            .join(", ");
        let series = r
            .rows
            .iter()
            .map(|row| SeriesPoint {
                t: row.time,
                estimate: row.observed.value,
                stderr: row.observed.std_error,
                target: Target::Value(row.reconstruction.value),
            })
            .collect();
        Ok(ClaimOutcome {
            record: raw_record(
                claim,
                Some(t),
                last.observed.value,
                last.observed.std_error,
                Target::Value(last.reconstruction.value),
                r.pass,
                detail,
            ),
            series,
        })
    }

    fn flow_claim(&self, claim: ClaimId, ens: &FlowEnsemble, pair: &FlowEnsemble) -> Result<ClaimOutcome> {
        let t = self.t_max();
        let (u, v) = self.pair();
        let checkpoints = [t / 4.0, t / 2.0, t];
        let out = match claim {
            ClaimId::MixedEven(n) | ClaimId::MixedCenteredEven(n) => {
                let centered = matches!(claim, ClaimId::MixedCenteredEven(_));
                let idx: Vec<usize> = (0..2 * n as usize).map(|i| self.sorted_index(i)).collect();
                let target = double_factorial(2 * n - 1);
                let at = |s: f64| mixed_moment(ens, &idx, s, centered).map(|e| e.scaled(s.powi(n as i32)));
                let e = at(t)?;
                let Tolerance::Relative(rel) = claim.tolerance() else { unreachable!() };
                let series = ens
                    .times
                    .iter()
                    .filter(|&&s| s > 0.0)
                    .map(|&s| at(s).map(|e| point(&e, Target::Value(target))))
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(
                        claim,
                        Some(t),
                        &e,
                        Target::Value(target),
                        e.within_relative(target, rel),
                        format!("relative error {:.4}", e.value / target - 1.0),
                    ),
                    series,
                }
            }
            ClaimId::MixedOdd(n) | ClaimId::MixedCenteredOdd(n) => {
                let centered = matches!(claim, ClaimId::MixedCenteredOdd(_));
                let idx: Vec<usize> = (0..2 * n as usize - 1).map(|i| self.sorted_index(i)).collect();
                let at = |s: f64| {
                    mixed_moment(ens, &idx, s, centered).map(|e| e.scaled(s.powf(n as f64 - 0.5)))
                };
                let first = at(checkpoints[0])?;
                let e = at(t)?;
                let pass = e.value.abs() <= first.value.abs() || e.within_errors(0.0, 3.0);
                let series = ens
                    .times
                    .iter()
                    .filter(|&&s| s > 0.0)
                    .map(|&s| at(s).map(|e| point(&e, Target::Value(0.0))))
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(
                        claim,
                        Some(t),
                        &e,
                        Target::Value(0.0),
                        pass,
                        format!("|value| {:.4} at t={} vs {:.4} at t={t}", first.value.abs(), checkpoints[0], e.value.abs()),
                    ),
                    series,
                }
            }
            ClaimId::ConditionalIdentity => {
                let profile = &self.setup.profile;
                let d0 = u - v;
                let one = |_: f64| 1.0;
                let phi = |x: f64| profile.phi(x);
                let indicator = |x: f64| if x > d0 { 1.0 } else { 0.0 };
                let gs: [(&str, &dyn Fn(f64) -> f64); 3] = [("1", &one), ("Phi", &phi), ("1(xi > u-v)", &indicator)];
                let mut worst: Option<MomentEstimate> = None;
                let mut pass = true;
                let mut detail = Vec::new();
                for s in checkpoints {
                    for (label, g) in gs {
                        let r = conditional_identity_residual(pair, s, g, label)?;
                        pass &= r.within_errors(0.0, 3.0);
                        detail.push(format!("t={s} g={label}: z={:.2}", z_score(&r, 0.0)));
                        if worst.as_ref().is_none_or(|w| z_score(&r, 0.0).abs() > z_score(w, 0.0).abs()) {
                            worst = Some(r);
                        }
                    }
                }
                let w = worst.expect("nine residuals");
                ClaimOutcome {
                    record: record(claim, Some(w.time), &w, Target::Value(0.0), pass, detail.join(", ")),
                    series: Vec::new(),
                }
            }
            ClaimId::PositionPhi => {
                let target = 0.5 * (u + v);
                let profile = &self.setup.profile;
                let e = position_phi_moment(pair, profile, t)?;
                let series = pair
                    .times
                    .iter()
                    .map(|&s| position_phi_moment(pair, profile, s).map(|e| point(&e, Target::Value(target))))
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(
                        claim,
                        Some(t),
                        &e,
                        Target::Value(target),
                        e.within_errors(target, 3.0),
                        format!("z = {:.2}", z_score(&e, target)),
                    ),
                    series,
                }
            }
            ClaimId::CrossMoment => {
                let target = u + 2.0 * v;
                let e = cross_moment_x2x(pair, t)?;
                let Tolerance::Relative(rel) = claim.tolerance() else { unreachable!() };
                let pass = if target.abs() > 1e-12 {
                    e.within_relative(target, rel)
                } else {
                    e.within_errors(0.0, 3.0)
                };
                let series = pair
                    .times
                    .iter()
                    .filter(|&&s| s > 0.0)
                    .map(|&s| cross_moment_x2x(pair, s).map(|e| point(&e, Target::Value(target))))
                    .collect::<std::result::Result<_, _>>()?;
                ClaimOutcome {
                    record: record(
                        claim,
                        Some(t),
                        &e,
                        Target::Value(target),
                        pass,
                        format!("z = {:.2}", z_score(&e, target)),
                    ),
                    series,
                }
            }
            _ => unreachable!("{claim} is not a flow claim"),
        };
        Ok(out)
    }

    fn shrinkage_claim(&self, claim: ClaimId) -> Result<ClaimOutcome> {
        let t = self.t_max();
        let (u, v) = self.pair();
        let mut estimates = Vec::new();
        for horizon in [t / 100.0, t / 10.0, t] {
            let squares = runner::scaled_max_squares(
                &self.setup.profile,
                self.settings(),
                [v, u],
                horizon,
                SCALED_GRID,
                self.m(),
                self.seed(),
                self.antithetic(),
                &self.progress(&format!("rescaled paths T={horizon}"), self.m()),
            )?;
            estimates.push(MomentEstimate::from_samples(
                squares,
                self.antithetic(),
                horizon,
                "E max |xbar_T(u) - xbar_T(v)|^2".into(),
            ));
        }
        let pass = estimates.windows(2).all(|w| w[1].value < w[0].value);
        let detail = estimates
            .iter()
            .map(|e| format!("T={}: {:.4}", e.time, e.value))
            .collect::<Vec<_>>()
            .join(", ");
        let last = estimates.last().expect("three horizons");
        Ok(ClaimOutcome {
            record: record(claim, Some(t), last, Target::Value(0.0), pass, detail),
            series: estimates.iter().map(|e| point(e, Target::Value(0.0))).collect(),
        })
    }

    /// Compares the smooth flow at each configured ε with the coalescing
    /// reference.
    pub fn arratia_claim(&self, claim: ClaimId) -> Result<(ClaimOutcome, Vec<(f64, ArratiaComparison)>)> {
        let a = self.config.arratia_or_default();
        let (u, v) = self.pair();
        let points = [v, u];
        let times = [a.time];
        let reference = runner::arratia_ensemble(
            &points,
            &times,
            a.reference_dt,
            self.m(),
            self.seed(),
            &self.progress("coalescing reference", self.m()),
        )?;
        let mut rows = Vec::new();
        for &eps in &a.epsilons {
            let setup = ModelSetup::bump(eps, isoflow_core::constants::GAMMA_LIMIT)?;
            let smooth = runner::flow_ensemble(
                &setup.profile,
                AdaptiveSettings::with_dt(default_dt(setup.lprime())),
                &points,
                &times,
                self.m(),
                self.seed(),
                self.antithetic(),
                &self.progress(&format!("smooth flow eps={eps}"), self.m()),
            )?;
            rows.push((eps, arratia_agreement(&smooth, &reference, a.time, a.threshold)?));
        }
        let oracle = rows[0].1.oracle;
        let Tolerance::ArratiaTrend(rel) = claim.tolerance() else { unreachable!() };
        let monotone = rows
            .windows(2)
            .all(|w| w[1].1.smooth_close.ci95.1 >= w[0].1.smooth_close.ci95.0);
        let last = &rows.last().expect("at least one epsilon").1;
        let close = (last.smooth_close.value / oracle - 1.0).abs() <= rel;
        let ks_ok = rows.iter().all(|(_, r)| r.marginal_ks.p_value > 1e-3);
        let detail = format!(
            "monotone {monotone}, final relative error {:.4}, reference {:.4} ± {:.4}, min KS p {:.3}",
            last.smooth_close.value / oracle - 1.0,
            last.coalesced.value,
            last.coalesced.std_error,
            rows.iter().map(|(_, r)| r.marginal_ks.p_value).fold(1.0, f64::min)
        );
        let series = rows
            .iter()
            .map(|(eps, r)| SeriesPoint {
                t: *eps,
                estimate: r.smooth_close.value,
                stderr: r.smooth_close.std_error,
                target: Target::Value(oracle),
            })
            .collect();
        let outcome = ClaimOutcome {
            record: record(
                claim,
                Some(a.time),
                &last.smooth_close,
                Target::Value(oracle),
                monotone && close && ks_ok,
                detail,
            ),
            series,
        };
        Ok((outcome, rows))
    }

    /// Evaluates every claim and writes the result directory.
    pub fn run(&self) -> Result<Report> {
        let dir = &self.config.output.directory;
        output::create_dir(dir)?;
        self.write_model_files(dir)?;
        let config_path = dir.join("config.toml");
        std::fs::write(&config_path, self.config.to_toml()?).map_err(|e| HarnessError::io(&config_path, e))?;
        let k = self.config.output.trajectories.min(self.m());
        if k > 0 {
            let ens = self.trajectories(k)?;
            output::write_trajectories(&dir.join("trajectories.csv"), self.config.output.gzip, &ens, &self.order)?;
        }
        let eval = self.evaluate()?;
        if !eval.series.is_empty() {
            let series_dir = dir.join("series");
            output::create_dir(&series_dir)?;
            for (claim, points) in &eval.series {
                output::write_series(&series_dir.join(format!("{claim}.csv")), points)?;
            }
        }
        output::write_json(&dir.join(output::REPORT_FILE), &eval.report)?;
        Ok(eval.report)
    }

    /// Writes raw trajectories of every replication with the model files.
    pub fn simulate(&self) -> Result<PathBuf> {
        let dir = &self.config.output.directory;
        output::create_dir(dir)?;
        self.write_model_files(dir)?;
        let ens = self.trajectories(self.m())?;
        output::write_trajectories(&dir.join("trajectories.csv"), self.config.output.gzip, &ens, &self.order)
    }

    /// Runs the smooth-to-coalescing comparison and writes `arratia.csv`.
    pub fn arratia_compare(&self) -> Result<ClaimRecord> {
        if self.config.particles.len() < 2 {
            return Err(HarnessError::Invalid("arratia-compare needs two particles".into()));
        }
        let dir = &self.config.output.directory;
        output::create_dir(dir)?;
        let (outcome, rows) = self.arratia_claim(ClaimId::Arratia)?;
        let mut w = output::CsvWriter::create(
            &dir.join("arratia.csv"),
            false,
            "epsilon,smooth_close,smooth_stderr,coalesced,coalesced_stderr,oracle,ks_statistic,ks_p_value",
        )?;
        for (eps, r) in &rows {
            w.line(format_args!(
                "{eps},{},{},{},{},{},{},{}",
                r.smooth_close.value,
                r.smooth_close.std_error,
                r.coalesced.value,
                r.coalesced.std_error,
                r.oracle,
                r.marginal_ks.statistic,
                r.marginal_ks.p_value
            ))?;
        }
        w.finish()?;
        Ok(outcome.record)
    }

    pub fn write_model_files(&self, dir: &Path) -> Result<()> {
        output::write_json(
            &dir.join(output::CONSTANTS_FILE),
            &ConstantsFile::new(&self.setup.profile, self.setup.constants),
        )?;
        output::write_profile(dir, &self.setup.profile)?;
        Ok(())
    }
}

fn z_score(e: &MomentEstimate, target: f64) -> f64 {
    (e.value - target) / e.std_error
}

fn point(e: &MomentEstimate, target: Target) -> SeriesPoint {
    SeriesPoint {
        t: e.time,
        estimate: e.value,
        stderr: e.std_error,
        target,
    }
}

fn record(claim: ClaimId, time: Option<f64>, e: &MomentEstimate, target: Target, pass: bool, detail: String) -> ClaimRecord {
    raw_record(claim, time, e.value, e.std_error, target, pass, detail)
}

fn raw_record(
    claim: ClaimId,
    time: Option<f64>,
    estimate: f64,
    std_error: f64,
    target: Target,
    pass: bool,
    detail: String,
) -> ClaimRecord {
    ClaimRecord {
        claim_id: claim.to_string(),
        anchor: claim.anchor(),
        estimator: claim.estimator().into(),
        time,
        estimate,
        std_error,
        target,
        tolerance: claim.tolerance().to_string(),
        pass: pass && estimate.is_finite(),
        detail,
    }
}

/// Loads `path`, runs it and writes the result directory.
pub fn run_config_file(path: &Path, opts: &RunOptions) -> Result<Report> {
    let (config, source) = ExperimentConfig::load(path)?;
    let experiment = Experiment::prepare(config, Some(&source), path.parent(), opts)?;
    let pool = runner::pool(opts.workers)?;
    pool.install(|| experiment.run())
}
