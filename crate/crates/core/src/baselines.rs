//! Independent reference methods: random covariance sampling, exhaustive
//! power grids on tiny instances, and single-link water-filling.
//!
//! None of these share code with the solver path; they exist to benchmark
//! it and to serve as oracles in the test suites.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermitian::{CMat, HermitianMatrix};
use crate::model::{
    derive_seed, user_rates, weighted_sum_rate, ChannelSet, NetworkConfig, TransmitStrategy,
};

/// Draws a random feasible strategy: one Gram matrix of a square complex
/// Gaussian per user, with each cell's set rescaled so the traces sum to a
/// uniformly drawn fraction of the budget.
pub fn sample_random_strategy(config: &NetworkConfig, seed: u64) -> Result<TransmitStrategy> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.5_f64.sqrt();
    let mut covs = Vec::with_capacity(config.num_cells());
    for cell in 0..config.num_cells() {
        let n = config.tx_antennas[cell];
        let users = config.num_users(cell);
        let mut cell_covs: Vec<HermitianMatrix> = (0..users)
            .map(|_| {
                let g = CMat::from_fn(n, n, |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * scale, im * scale)
                });
                HermitianMatrix::symmetrize(&g * g.adjoint())
            })
            .collect();
        let total: f64 = cell_covs.iter().map(|x| x.trace()).sum();
        // Power fraction in (0, 1]; the budget binds with equality at it.
        let fraction = 1.0 - rng.random::<f64>();
        if total > 0.0 {
            let factor = fraction * config.power[cell] / total;
            for x in &mut cell_covs {
                *x = x.scaled(factor);
            }
        }
        covs.push(cell_covs);
    }
    TransmitStrategy::from_covariances(config, covs)
}

/// Per-user rate tuples of `n_samples` random feasible strategies, in
/// deterministic user order. Samples are independent given the seed and
/// evaluated in parallel with index-ordered collection.
pub fn sample_rate_cloud(
    config: &NetworkConfig,
    channels: &ChannelSet,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..n_samples)
        .into_par_iter()
        .map(|idx| {
            let strategy = sample_random_strategy(config, derive_seed(seed, idx as u64))?;
            user_rates(config, channels, &strategy)
        })
        .collect()
}

/// Exhaustive weighted-sum-rate search over per-user power grids for
/// single-antenna networks with at most three users in total.
///
/// Each user's power ranges over `grid_points` levels in `[0, P_k]`;
/// combinations violating a cell budget are skipped. Returns the best
/// per-user powers (indexed like the configuration) and the best value.
pub fn grid_search_siso(
    config: &NetworkConfig,
    channels: &ChannelSet,
    grid_points: usize,
) -> Result<(Vec<Vec<f64>>, f64)> {
    config.validate()?;
    if grid_points < 2 {
        return Err(Error::InvalidInput("grid_points must be at least 2".into()));
    }
    let all_siso = config.tx_antennas.iter().all(|&n| n == 1)
        && config.rx_antennas.iter().flatten().all(|&m| m == 1);
    if !all_siso {
        return Err(Error::InvalidInput(
            "grid search supports single-antenna networks only".into(),
        ));
    }
    let total = config.total_users();
    if total > 3 {
        return Err(Error::InvalidInput(format!(
            "grid search supports at most 3 users, got {total}"
        )));
    }

    let users: Vec<_> = config.users().collect();
    let levels: Vec<Vec<f64>> = users
        .iter()
        .map(|u| {
            let p = config.power[u.cell];
            (0..grid_points)
                .map(|i| p * i as f64 / (grid_points - 1) as f64)
                .collect()
        })
        .collect();

    let mut best_value = f64::NEG_INFINITY;
    let mut best_powers = vec![0.0; total];
    let mut indices = vec![0usize; total];
    loop {
        let powers: Vec<f64> = indices.iter().zip(&levels).map(|(&i, l)| l[i]).collect();
        let mut cell_sums = vec![0.0; config.num_cells()];
        for (u, &p) in users.iter().zip(&powers) {
            cell_sums[u.cell] += p;
        }
        let feasible = cell_sums
            .iter()
            .zip(&config.power)
            .all(|(&s, &p)| s <= p * (1.0 + 1e-12));
        if feasible {
            let strategy = strategy_from_powers(config, &users, &powers)?;
            let value = weighted_sum_rate(config, channels, &strategy)?;
            if value > best_value {
                best_value = value;
                best_powers = powers;
            }
        }
        // Odometer increment over the grid indices.
        let mut dim = 0;
        loop {
            if dim == total {
                let mut out = vec![Vec::new(); config.num_cells()];
                for (u, &p) in users.iter().zip(&best_powers) {
                    out[u.cell].push(p);
                }
                return Ok((out, best_value));
            }
            indices[dim] += 1;
            if indices[dim] < grid_points {
                break;
            }
            indices[dim] = 0;
            dim += 1;
        }
    }
}

fn strategy_from_powers(
    config: &NetworkConfig,
    users: &[crate::model::UserIndex],
    powers: &[f64],
) -> Result<TransmitStrategy> {
    let mut covs: Vec<Vec<HermitianMatrix>> = (0..config.num_cells())
        .map(|cell| vec![HermitianMatrix::zeros(1); config.num_users(cell)])
        .collect();
    for (u, &p) in users.iter().zip(powers) {
        covs[u.cell][u.user] = HermitianMatrix::from_diagonal(&[p]);
    }
    TransmitStrategy::from_covariances(config, covs)
}

/// Classical water-filling over a single link.
///
/// Eigendecomposes `H^H H / noise`, fills power over the modes by the exact
/// breakpoint scan, and returns the optimal covariance along with the
/// capacity in bits.
pub fn water_filling(h: &CMat, power: f64, noise_var: f64) -> Result<(HermitianMatrix, f64)> {
    if !(power > 0.0) || !(noise_var > 0.0) {
        return Err(Error::InvalidInput(
            "water filling requires positive power and noise".into(),
        ));
    }
    let gram = HermitianMatrix::symmetrize(h.adjoint() * h);
    let eig = gram.eig();
    let n = eig.values.len();
    // Effective gains, clipping eigen-noise below zero.
    let gains: Vec<f64> = eig.values.iter().map(|&g| (g / noise_var).max(0.0)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));

    let mut powers = vec![0.0; n];
    let mut active = 0usize;
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    for (rank, &mode) in order.iter().enumerate() {
        let g = gains[mode];
        if g <= 0.0 {
            break;
        }
        let trial_inv_sum = inv_sum + 1.0 / g;
        let trial_level = (power + trial_inv_sum) / (rank + 1) as f64;
        if trial_level <= 1.0 / g {
            break;
        }
        inv_sum = trial_inv_sum;
        level = trial_level;
        active = rank + 1;
    }
    let mut capacity = 0.0;
    for &mode in order.iter().take(active) {
        let p = level - 1.0 / gains[mode];
        powers[mode] = p;
        capacity += (1.0 + gains[mode] * p).log2();
    }
    let cov = HermitianMatrix::symmetrize(eig.reconstruct_with(&powers));
    Ok((cov, capacity))
}
