//! Closed-form solution of the inner maximization over the auxiliary
//! variables for a fixed transmit strategy.
//!
//! For each user the optimal auxiliary variable is the inverse of its
//! interference-plus-noise covariance; the optimal value equals the true
//! weighted sum rate, so every solve yields a valid lower bound on the
//! optimum. The multipliers follow from stationarity of the Lagrangian in
//! `Y` and make strong duality hold with zero complementary slack.

use crate::bounds::{lower_bound_rate, AuxiliaryVars, DualVars};
use crate::error::{Error, Result};
use crate::hermitian::{hermitian_part, inv_pd, scale, HermitianMatrix};
use crate::model::{interference_covariance, is_feasible, ChannelSet, NetworkConfig, TransmitStrategy};
use crate::NATS_TO_BITS;

/// Result of one inner solve: optimal auxiliaries, multipliers, and the
/// optimal value `v(X)` in bits.
#[derive(Clone, Debug)]
pub struct PrimalSolution {
    pub aux: AuxiliaryVars,
    pub duals: DualVars,
    /// Optimal inner value; equals the weighted sum rate at `X`.
    pub value: f64,
}

/// Solves the inner problem for a fixed feasible strategy.
///
/// The auxiliaries are the symmetrized inverses of the interference
/// covariances. The multipliers are derived from the stationarity identity
/// `w * s * Y^{-1} = herm(G Z)` rather than hard-coded in simplified form;
/// debug builds verify the resulting Y-gradient numerically.
pub fn solve_primal(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
) -> Result<PrimalSolution> {
    let report = is_feasible(config, x)?;
    if !report.is_feasible() {
        let detail: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Infeasible(detail.join("; ")));
    }

    let mut aux_mats = Vec::with_capacity(config.num_cells());
    let mut dual_mats = Vec::with_capacity(config.num_cells());
    for cell in 0..config.num_cells() {
        let mut aux_row = Vec::with_capacity(config.num_users(cell));
        let mut dual_row = Vec::with_capacity(config.num_users(cell));
        for user in 0..config.num_users(cell) {
            let target = crate::model::UserIndex::new(cell, user);
            let z = interference_covariance(config, channels, x, target)?;
            let y = inv_pd(&z)?;
            // Stationarity gives G = w * s * Y^{-1} Z^{-1}, evaluated from
            // the computed factors instead of its algebraic simplification.
            let y_inv = inv_pd(&y)?;
            let w = config.weight(target);
            let gamma = HermitianMatrix::symmetrize(scale(
                &hermitian_part(&(y_inv.as_matrix() * y.as_matrix())),
                w * NATS_TO_BITS,
            ));
            aux_row.push(y);
            dual_row.push(gamma);
        }
        aux_mats.push(aux_row);
        dual_mats.push(dual_row);
    }
    let aux = AuxiliaryVars::new(aux_mats);
    let duals = DualVars::new(dual_mats);

    let mut value = 0.0;
    for user in config.users() {
        let w = config.weight(user);
        if w != 0.0 {
            value += w * lower_bound_rate(config, channels, x, &aux, user)?;
        }
    }

    #[cfg(debug_assertions)]
    {
        use crate::bounds::{grad, GradKind};
        let pack = grad(GradKind::Lagrangian, config, channels, x, &aux, &aux, &duals)?;
        let norm: f64 = config
            .users()
            .map(|u| pack.dy[u.cell][u.user].frob_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        debug_assert!(
            norm <= 1e-8,
            "stationarity violated at the inner optimum: |grad_Y L| = {norm:.3e}"
        );
    }

    Ok(PrimalSolution { aux, duals, value })
}

/// Standing self-check: the inner optimum must reproduce the weighted sum
/// rate computed directly from the rate formula.
pub fn primal_value_matches_rates(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
) -> Result<bool> {
    let sol = solve_primal(config, channels, x)?;
    let direct = crate::model::weighted_sum_rate(config, channels, x)?;
    Ok((sol.value - direct).abs() <= 1e-8 * (1.0 + direct.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{grad, lagrangian, GradKind};
    use crate::hermitian::{frob_sq, CMat};
    use crate::model::{
        achievable_rate, generate_channels, weighted_sum_rate, TransmitStrategy, UserIndex,
    };
    use num_complex::Complex64;

    #[test]
    fn aux_is_identity_without_interference_at_unit_noise() {
        let config = NetworkConfig::uniform(1, 1, 2, 2, 1.0, 1.0);
        let channels = generate_channels(&config, 1).unwrap();
        let x = TransmitStrategy::uniform_power(&config);
        let sol = solve_primal(&config, &channels, &x).unwrap();
        let y = sol.aux.get(UserIndex::new(0, 0));
        assert!(frob_sq(&(y.as_matrix() - CMat::identity(2, 2))) < 1e-28);
    }

    #[test]
    fn scalar_aux_is_reciprocal_interference() {
        // Noise 0.1 plus cross-link power 1.9 * 1.0 = Z = 2, so Y = 0.5.
        let config = {
            let mut c = NetworkConfig::uniform(2, 1, 1, 1, 1.9, 0.1);
            c.power[0] = 1.0;
            c
        };
        let links = (0..2)
            .map(|_| {
                vec![(0..2)
                    .map(|_| CMat::from_element(1, 1, Complex64::new(1.0, 0.0)))
                    .collect()]
            })
            .collect();
        let channels = crate::model::ChannelSet::from_links(&config, links).unwrap();
        let x = TransmitStrategy::uniform_power(&config);
        let sol = solve_primal(&config, &channels, &x).unwrap();
        let y = sol.aux.get(UserIndex::new(0, 0));
        assert!((y.as_matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
        let r = weighted_sum_rate(&config, &channels, &x).unwrap();
        assert!((sol.value - r).abs() <= 1e-9);
    }

    #[test]
    fn kkt_residual_and_strong_duality() {
        let config = NetworkConfig::uniform(3, 2, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 5).unwrap();
        let x = crate::baselines::sample_random_strategy(&config, 55).unwrap();
        let sol = solve_primal(&config, &channels, &x).unwrap();

        let pack = grad(
            GradKind::Lagrangian,
            &config,
            &channels,
            &x,
            &sol.aux,
            &sol.aux,
            &sol.duals,
        )
        .unwrap();
        let norm: f64 = config
            .users()
            .map(|u| pack.dy[u.cell][u.user].frob_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(norm <= 1e-8, "KKT residual {norm}");

        let l = lagrangian(&config, &channels, &x, &sol.aux, &sol.duals).unwrap();
        assert!((l - sol.value).abs() <= 1e-9, "L {l} vs v {}", sol.value);

        for u in config.users() {
            assert!(sol.duals.get(u).is_psd(1e-9), "dual not PSD");
            let z = interference_covariance(&config, &channels, &x, u).unwrap();
            let m = z.dim();
            let slack = CMat::identity(m, m) - z.as_matrix() * sol.aux.get(u).as_matrix();
            let cs = crate::hermitian::real_inner(sol.duals.get(u).as_matrix(), &slack);
            assert!(cs.abs() <= 1e-10, "complementary slackness {cs}");
        }
    }

    #[test]
    fn value_matches_rates_across_seeds() {
        for seed in [3, 14, 159] {
            let config = NetworkConfig::uniform(2, 2, 2, 2, 1.0, 0.1);
            let channels = generate_channels(&config, seed).unwrap();
            let x = crate::baselines::sample_random_strategy(&config, seed ^ 0xaa).unwrap();
            assert!(primal_value_matches_rates(&config, &channels, &x).unwrap());
        }
    }

    #[test]
    fn zero_strategy_has_zero_value() {
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 8).unwrap();
        let x = TransmitStrategy::zeros(&config);
        let sol = solve_primal(&config, &channels, &x).unwrap();
        assert!(sol.value.abs() <= 1e-12);
        assert!(weighted_sum_rate(&config, &channels, &x).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn equivalence_survives_near_singular_noise() {
        let config = NetworkConfig::uniform(2, 1, 2, 2, 1.0, 1e-6);
        let channels = generate_channels(&config, 21).unwrap();
        let x = crate::baselines::sample_random_strategy(&config, 22).unwrap();
        let sol = solve_primal(&config, &channels, &x).unwrap();
        let direct = weighted_sum_rate(&config, &channels, &x).unwrap();
        assert!(
            (sol.value - direct).abs() <= 1e-6 * (1.0 + direct.abs()),
            "value {} vs direct {direct}",
            sol.value
        );
    }

    #[test]
    fn infeasible_strategy_is_rejected() {
        let config = NetworkConfig::uniform(1, 1, 1, 1, 1.0, 0.1);
        let channels = generate_channels(&config, 2).unwrap();
        let covs = vec![vec![HermitianMatrix::from_diagonal(&[2.0])]];
        let x = TransmitStrategy::from_covariances(&config, covs).unwrap();
        assert!(matches!(
            solve_primal(&config, &channels, &x),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn per_user_rates_recovered_at_optimum() {
        let config = NetworkConfig::uniform(2, 2, 2, 2, 1.0, 0.1);
        let channels = generate_channels(&config, 31).unwrap();
        let x = TransmitStrategy::uniform_power(&config);
        let sol = solve_primal(&config, &channels, &x).unwrap();
        for u in config.users() {
            let lb = lower_bound_rate(&config, &channels, &x, &sol.aux, u).unwrap();
            let r = achievable_rate(&config, &channels, &x, u).unwrap();
            assert!((lb - r).abs() <= 1e-9);
        }
    }
}
