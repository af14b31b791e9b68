//! Outer alternating loops, bound traces, multi-start, and rate-region
//! boundary tracing.
//!
//! Both algorithms alternate an exact inner solve (auxiliaries and
//! multipliers for the current covariances) with a master maximization,
//! stopping once the weighted sum-rate increment drops below a tolerance.
//! Algorithm 1 fixes the auxiliaries in the master and ascends the true
//! objective monotonically; Algorithm 2 maximizes the penalized
//! linearization jointly, whose master-value trace may oscillate.

use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::bounds::lower_bound_rate;
use crate::error::{Error, Result};
use crate::master::{solve_master_alg1, solve_master_alg2, SolverSettings};
use crate::model::{
    derive_seed, user_rates, weighted_sum_rate, ChannelSet, NetworkConfig, TransmitStrategy,
};
use crate::primal::solve_primal;

/// The two alternating schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Master over the covariances with auxiliaries fixed; monotone lower
    /// bound and guaranteed local convergence.
    Alg1,
    /// Joint master on the penalized linearization; empirically convergent.
    Alg2,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Alg1 => write!(f, "alg1"),
            Algorithm::Alg2 => write!(f, "alg2"),
        }
    }
}

/// One outer iteration of a run.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    /// Outer iteration index, starting at 1.
    pub outer_iter: usize,
    /// Weighted sum rate at the new covariances, bits.
    pub lower_bound_bits: f64,
    /// Master objective value at its maximizer, bits.
    pub master_value_bits: f64,
    /// Wall-clock time of this outer iteration.
    pub wallclock_ms: f64,
    /// Gradient steps spent inside the master solve.
    pub inner_iters: usize,
    /// Master value minus the weighted bound sum at the new point; tracked
    /// for the first scheme where it must be nonnegative.
    pub eq_slack: Option<f64>,
}

/// Per-iteration bound and timing records of one run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct IterateTrace {
    pub rows: Vec<TraceRow>,
}

/// Result of one full alternating run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub strategy: TransmitStrategy,
    /// Weighted sum rate at the final covariances, bits.
    pub final_rate: f64,
    pub trace: IterateTrace,
    pub converged: bool,
    /// Outer iterations performed.
    pub iterations: usize,
    /// Configuration echo for provenance.
    pub config: NetworkConfig,
    /// Seed of the randomized starting point, when one was used.
    pub start_seed: Option<u64>,
}

fn run_inner(
    algorithm: Algorithm,
    config: &NetworkConfig,
    channels: &ChannelSet,
    x0: &TransmitStrategy,
    epsilon: f64,
    max_outer: usize,
    settings: &SolverSettings,
) -> Result<RunResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if max_outer == 0 {
        return Err(Error::InvalidInput("max_outer must be at least 1".into()));
    }
    config.validate()?;

    let mut x = x0.clone();
    let mut prev_rate = weighted_sum_rate(config, channels, &x)?;
    let mut trace = IterateTrace::default();
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=max_outer {
        let started = Instant::now();
        let primal_sol = solve_primal(config, channels, &x)?;
        let master = match algorithm {
            Algorithm::Alg1 => solve_master_alg1(
                config,
                channels,
                &primal_sol.aux,
                &primal_sol.duals,
                &x,
                settings,
            )?,
            Algorithm::Alg2 => solve_master_alg2(
                config,
                channels,
                &primal_sol.aux,
                &primal_sol.duals,
                &x,
                &primal_sol.aux,
                settings,
            )?,
        };
        x = master.strategy;
        let rate = weighted_sum_rate(config, channels, &x)?;

        let eq_slack = match algorithm {
            Algorithm::Alg1 => {
                let mut bound_sum = 0.0;
                for user in config.users() {
                    let w = config.weight(user);
                    if w != 0.0 {
                        bound_sum +=
                            w * lower_bound_rate(config, channels, &x, &primal_sol.aux, user)?;
                    }
                }
                Some(master.value - bound_sum)
            }
            Algorithm::Alg2 => None,
        };

        trace.rows.push(TraceRow {
            outer_iter: t,
            lower_bound_bits: rate,
            master_value_bits: master.value,
            wallclock_ms: started.elapsed().as_secs_f64() * 1e3,
            inner_iters: master.inner_iters,
            eq_slack,
        });
        iterations = t;

        if rate - prev_rate < epsilon {
            converged = true;
            break;
        }
        prev_rate = rate;
    }

    let final_rate = trace
        .rows
        .last()
        .map(|r| r.lower_bound_bits)
        .expect("the loop runs at least once");
    Ok(RunResult {
        algorithm,
        strategy: x,
        final_rate,
        trace,
        converged,
        iterations,
        config: config.clone(),
        start_seed: None,
    })
}

/// Alternates the inner solve with the covariance-only master until the
/// weighted sum-rate increment falls below `epsilon`.
pub fn run_algorithm1(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x0: &TransmitStrategy,
    epsilon: f64,
    max_outer: usize,
    settings: &SolverSettings,
) -> Result<RunResult> {
    run_inner(Algorithm::Alg1, config, channels, x0, epsilon, max_outer, settings)
}

/// Alternates the inner solve with the joint penalized-linearization
/// master, anchored at each fresh inner solution.
pub fn run_algorithm2(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x0: &TransmitStrategy,
    epsilon: f64,
    max_outer: usize,
    settings: &SolverSettings,
) -> Result<RunResult> {
    run_inner(Algorithm::Alg2, config, channels, x0, epsilon, max_outer, settings)
}

fn run_algorithm(
    algorithm: Algorithm,
    config: &NetworkConfig,
    channels: &ChannelSet,
    x0: &TransmitStrategy,
    epsilon: f64,
    max_outer: usize,
    settings: &SolverSettings,
) -> Result<RunResult> {
    run_inner(algorithm, config, channels, x0, epsilon, max_outer, settings)
}

/// Result of a multi-start sweep: all runs plus the index of the best.
#[derive(Clone, Debug)]
pub struct MultiStartResult {
    pub runs: Vec<RunResult>,
    pub best: usize,
}

impl MultiStartResult {
    pub fn best_run(&self) -> &RunResult {
        &self.runs[self.best]
    }
}

/// Runs from the uniform-power start plus `n_starts - 1` random feasible
/// starts with seeds derived from `seed`, in parallel, and keeps the best
/// final weighted sum rate. Ties resolve to the lowest start index.
pub fn multi_start(
    algorithm: Algorithm,
    config: &NetworkConfig,
    channels: &ChannelSet,
    n_starts: usize,
    seed: u64,
    epsilon: f64,
    max_outer: usize,
    settings: &SolverSettings,
) -> Result<MultiStartResult> {
    if n_starts == 0 {
        return Err(Error::InvalidInput("n_starts must be at least 1".into()));
    }
    let runs: Vec<RunResult> = (0..n_starts)
        .into_par_iter()
        .map(|idx| {
            let (x0, start_seed) = if idx == 0 {
                (TransmitStrategy::uniform_power(config), None)
            } else {
                let s = derive_seed(seed, idx as u64);
                (crate::baselines::sample_random_strategy(config, s)?, Some(s))
            };
            let mut run =
                run_algorithm(algorithm, config, channels, &x0, epsilon, max_outer, settings)?;
            run.start_seed = start_seed;
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.final_rate > runs[best].final_rate {
            best = i;
        }
    }
    Ok(MultiStartResult { runs, best })
}

/// One traced point of the rate-region boundary.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    /// Per-user weights in deterministic user order.
    pub weights: Vec<f64>,
    /// Unweighted per-user rates at the final covariances.
    pub rates: Vec<f64>,
    pub result: RunResult,
}

/// Options shared by the runs of a boundary trace.
#[derive(Clone, Debug)]
pub struct BoundaryOptions {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub max_outer: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub settings: SolverSettings,
}

/// Solves one weighted problem per weight vector (flattened in user order)
/// and reports the resulting rate tuples; runs execute in parallel with
/// index-ordered collection.
pub fn trace_boundary(
    config: &NetworkConfig,
    channels: &ChannelSet,
    weight_list: &[Vec<f64>],
    opts: &BoundaryOptions,
) -> Result<Vec<BoundaryPoint>> {
    let total_users = config.total_users();
    for (i, w) in weight_list.iter().enumerate() {
        if w.len() != total_users {
            return Err(Error::InvalidInput(format!(
                "weight vector {i} has {} entries for {total_users} users",
                w.len()
            )));
        }
    }
    weight_list
        .par_iter()
        .enumerate()
        .map(|(idx, weights)| {
            let mut weighted_config = config.clone();
            let mut it = weights.iter();
            for cell in 0..config.num_cells() {
                for user in 0..config.num_users(cell) {
                    weighted_config.weights[cell][user] = *it.next().expect("length checked");
                }
            }
            weighted_config.validate()?;
            let sweep = multi_start(
                opts.algorithm,
                &weighted_config,
                channels,
                opts.n_starts,
                derive_seed(opts.seed, idx as u64),
                opts.epsilon,
                opts.max_outer,
                &opts.settings,
            )?;
            let best = sweep.best_run().clone();
            let rates = user_rates(&weighted_config, channels, &best.strategy)?;
            Ok(BoundaryPoint {
                weights: weights.clone(),
                rates,
                result: best,
            })
        })
        .collect()
}

/// Evenly spaced two-user weight schedule `(t, 1 - t)` over `[0, 1]`.
pub fn two_user_weight_schedule(points: usize) -> Vec<Vec<f64>> {
    assert!(points >= 2);
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            vec![t, 1.0 - t]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::water_filling;
    use crate::hermitian::{project_cell, CMat, HermitianMatrix};
    use crate::model::{generate_channels, is_feasible, ChannelSet, UserIndex};
    use num_complex::Complex64;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn infinite_epsilon_stops_after_one_iteration() {
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 1).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let run =
            run_algorithm1(&config, &channels, &x0, f64::INFINITY, 50, &settings()).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations, 1);
        assert_eq!(run.trace.rows.len(), 1);
    }

    #[test]
    fn single_link_runs_reach_water_filling() {
        let config = NetworkConfig::uniform(1, 1, 3, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 5).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let h = channels.get(0, UserIndex::new(0, 0));
        let (_, capacity) = water_filling(h, 1.0, 0.1).unwrap();
        for algorithm in [Algorithm::Alg1, Algorithm::Alg2] {
            let run = run_inner(
                algorithm, &config, &channels, &x0, 1e-7, 200, &settings(),
            )
            .unwrap();
            assert!(run.converged, "{algorithm} did not converge");
            assert!(
                (run.final_rate - capacity).abs() <= 1e-4,
                "{algorithm}: {} vs capacity {capacity}",
                run.final_rate
            );
        }
    }

    #[test]
    fn lower_bound_trace_is_monotone_for_alg1() {
        let config = NetworkConfig::uniform(3, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 9).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let run = run_algorithm1(&config, &channels, &x0, 1e-5, 300, &settings()).unwrap();
        assert!(run.converged);
        let bounds: Vec<f64> = run.trace.rows.iter().map(|r| r.lower_bound_bits).collect();
        for w in bounds.windows(2) {
            assert!(w[1] >= w[0] - 1e-7, "lower bound decreased: {w:?}");
        }
    }

    #[test]
    fn master_value_dominates_bound_sum_each_iteration() {
        let config = NetworkConfig::uniform(3, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 12).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let run = run_algorithm1(&config, &channels, &x0, 1e-5, 300, &settings()).unwrap();
        for row in &run.trace.rows {
            let slack = row.eq_slack.expect("alg1 records the slack");
            assert!(slack >= -1e-8, "iteration {}: slack {slack}", row.outer_iter);
        }
    }

    #[test]
    fn converged_point_is_stationary_for_the_rate_objective() {
        // Finite-difference gradient of the weighted sum rate at the final
        // point, projected; its norm certifies local optimality.
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 31).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let run = run_algorithm1(&config, &channels, &x0, 1e-7, 400, &settings()).unwrap();
        assert!(run.converged);

        let x_star = &run.strategy;
        let h = 1e-6;
        let mut grad_blocks = Vec::new();
        for u in config.users() {
            let n = config.tx_antennas[u.cell];
            let mut g = CMat::zeros(n, n);
            let mut basis = Vec::new();
            for i in 0..n {
                let mut e = CMat::zeros(n, n);
                e[(i, i)] = Complex64::new(1.0, 0.0);
                basis.push(e);
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut re = CMat::zeros(n, n);
                    re[(i, j)] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                    re[(j, i)] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                    basis.push(re);
                    let mut im = CMat::zeros(n, n);
                    im[(i, j)] = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
                    im[(j, i)] = Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
                    basis.push(im);
                }
            }
            for e in &basis {
                let eval = |t: f64| {
                    let mut xp = x_star.clone();
                    xp.set(
                        u,
                        HermitianMatrix::symmetrize(x_star.get(u).as_matrix() + e * Complex64::new(t, 0.0)),
                    );
                    weighted_sum_rate(&config, &channels, &xp).unwrap()
                };
                let d = (eval(h) - eval(-h)) / (2.0 * h);
                g += e * Complex64::new(d, 0.0);
            }
            grad_blocks.push(HermitianMatrix::symmetrize(g));
        }

        // Projected gradient via a unit probe step.
        let mut pg_sq = 0.0;
        let mut offset = 0;
        for cell in 0..config.num_cells() {
            let count = config.num_users(cell);
            let stepped: Vec<HermitianMatrix> = (0..count)
                .map(|i| {
                    x_star
                        .get(UserIndex::new(cell, i))
                        .add(&grad_blocks[offset + i])
                })
                .collect();
            let projected = project_cell(&stepped, config.power[cell]).unwrap();
            for (i, p) in projected.iter().enumerate() {
                pg_sq += p.sub(x_star.get(UserIndex::new(cell, i))).frob_norm().powi(2);
            }
            offset += count;
        }
        let pg_norm = pg_sq.sqrt();
        assert!(pg_norm <= 1e-4, "projected rate gradient {pg_norm}");
    }

    #[test]
    fn algorithms_agree_on_small_network() {
        let config = NetworkConfig::uniform(3, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 41).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let a = run_algorithm1(&config, &channels, &x0, 1e-5, 300, &settings()).unwrap();
        let b = run_algorithm2(&config, &channels, &x0, 1e-5, 300, &settings()).unwrap();
        assert!(a.converged && b.converged);
        assert!(
            (a.final_rate - b.final_rate).abs() <= 1e-2,
            "{} vs {}",
            a.final_rate,
            b.final_rate
        );
    }

    #[test]
    fn multi_start_single_equals_uniform_run() {
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 51).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        let single = run_algorithm1(&config, &channels, &x0, 1e-5, 200, &settings()).unwrap();
        let sweep = multi_start(
            Algorithm::Alg1, &config, &channels, 1, 7, 1e-5, 200, &settings(),
        )
        .unwrap();
        assert_eq!(sweep.runs.len(), 1);
        assert_eq!(sweep.best_run().final_rate, single.final_rate);
        assert_eq!(sweep.best_run().iterations, single.iterations);
    }

    #[test]
    fn more_starts_never_hurt() {
        let config = NetworkConfig::uniform(2, 1, 1, 1, 1.0, 0.1);
        let channels = generate_channels(&config, 61).unwrap();
        for seed in [1, 2, 3] {
            let one = multi_start(
                Algorithm::Alg1, &config, &channels, 1, seed, 1e-5, 200, &settings(),
            )
            .unwrap();
            let five = multi_start(
                Algorithm::Alg1, &config, &channels, 5, seed, 1e-5, 200, &settings(),
            )
            .unwrap();
            assert!(five.best_run().final_rate >= one.best_run().final_rate - 1e-12);
        }
    }

    #[test]
    fn selector_weights_shut_down_the_unweighted_user() {
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 71).unwrap();
        let opts = BoundaryOptions {
            algorithm: Algorithm::Alg1,
            epsilon: 1e-6,
            max_outer: 300,
            n_starts: 3,
            seed: 5,
            settings: settings(),
        };
        let points = trace_boundary(&config, &channels, &[vec![1.0, 0.0]], &opts).unwrap();
        let point = &points[0];
        let x2_power = point.result.strategy.get(UserIndex::new(1, 0)).trace();
        assert!(x2_power <= 1e-3, "unweighted user keeps power {x2_power}");

        // With the interferer silent, the weighted optimum is the
        // single-link capacity of user 1.
        let h = channels.get(0, UserIndex::new(0, 0));
        let (_, capacity) = water_filling(h, 1.0, 0.1).unwrap();
        assert!(
            (point.rates[0] - capacity).abs() <= 1e-3,
            "rate {} vs capacity {capacity}",
            point.rates[0]
        );
    }

    #[test]
    fn mirrored_network_gives_mirrored_boundary() {
        // Swapping the two cells maps weight (t, 1-t) runs onto (1-t, t)
        // runs exactly, so the traced boundary is symmetric.
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 0.1);
        let base = generate_channels(&config, 81).unwrap();
        let direct = base.get(0, UserIndex::new(0, 0)).clone();
        let cross = base.get(1, UserIndex::new(0, 0)).clone();
        // Symmetric layout: both users share the same direct and cross
        // channel matrices.
        let links = (0..2)
            .map(|rx| {
                vec![(0..2)
                    .map(|tx| if tx == rx { direct.clone() } else { cross.clone() })
                    .collect()]
            })
            .collect();
        let channels = ChannelSet::from_links(&config, links).unwrap();
        let opts = BoundaryOptions {
            algorithm: Algorithm::Alg2,
            epsilon: 1e-6,
            max_outer: 300,
            n_starts: 1,
            seed: 3,
            settings: settings(),
        };
        let schedule = vec![vec![0.3, 0.7], vec![0.7, 0.3]];
        let points = trace_boundary(&config, &channels, &schedule, &opts).unwrap();
        let (a, b) = (&points[0].rates, &points[1].rates);
        assert!(
            (a[0] - b[1]).abs() <= 1e-3 && (a[1] - b[0]).abs() <= 1e-3,
            "boundary not symmetric: {a:?} vs {b:?}"
        );
    }

    #[test]
    fn runs_keep_strategies_feasible() {
        let config = NetworkConfig::uniform(2, 2, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 91).unwrap();
        let x0 = TransmitStrategy::uniform_power(&config);
        for algorithm in [Algorithm::Alg1, Algorithm::Alg2] {
            let run = run_inner(
                algorithm, &config, &channels, &x0, 1e-4, 100, &settings(),
            )
            .unwrap();
            assert!(is_feasible(&config, &run.strategy).unwrap().is_feasible());
        }
    }
}
