//! Master problems: concave maximization over the transmit covariances
//! (auxiliaries fixed) and jointly over covariances and auxiliaries, both
//! by projected gradient ascent with backtracking line search.
//!
//! The feasible set is a product of simple convex sets with exact
//! projections: per-cell trace-budgeted PSD cones for the covariances and
//! an eigenvalue floor for the auxiliaries. Accuracy is governed by the
//! projected-gradient norm tolerance.

use crate::bounds::{grad, lagrangian, lin_lb, AuxiliaryVars, DualVars, GradKind, DELTA_Y};
use crate::error::{Error, Result};
use crate::hermitian::{project_cell, real_inner, HermitianMatrix};
use crate::model::{ChannelSet, NetworkConfig, TransmitStrategy};

/// Tunables for one projected-ascent solve.
#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// Cap on gradient steps.
    pub max_inner_iters: usize,
    /// Termination threshold on the projected-gradient norm.
    pub grad_norm_tol: f64,
    /// Step shrink factor per line-search halving.
    pub backtrack: f64,
    /// Sufficient-increase constant in the acceptance test.
    pub sufficient_increase: f64,
    /// First trial step of the first iteration; later iterations warm-start
    /// from the previously accepted step.
    pub initial_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_inner_iters: 500,
            grad_norm_tol: 1e-7,
            backtrack: 0.5,
            sufficient_increase: 1e-4,
            initial_step: 1.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_inner_iters == 0
            || !(self.grad_norm_tol > 0.0)
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
            || !(self.sufficient_increase > 0.0)
            || !(self.initial_step > 0.0)
        {
            return Err(Error::InvalidInput(
                "solver settings must be positive with backtrack in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one master solve.
#[derive(Clone, Debug)]
pub struct MasterResult {
    pub strategy: TransmitStrategy,
    /// Maximizing auxiliaries for the joint master; absent otherwise.
    pub aux: Option<AuxiliaryVars>,
    /// Objective value at the returned point, in bits.
    pub value: f64,
    pub inner_iters: usize,
    pub projected_grad_norm: f64,
    /// Set when the line search stalled before the gradient tolerance.
    pub line_search_failed: bool,
}

const MAX_HALVINGS: usize = 60;

pub(crate) struct AscentOutcome {
    pub vars: Vec<HermitianMatrix>,
    pub value: f64,
    pub iters: usize,
    pub pg_norm: f64,
    pub line_search_failed: bool,
}

fn add_scaled(a: &[HermitianMatrix], b: &[HermitianMatrix], t: f64) -> Vec<HermitianMatrix> {
    a.iter().zip(b).map(|(x, g)| x.add(&g.scaled(t))).collect()
}

fn distance(a: &[HermitianMatrix], b: &[HermitianMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.sub(y).frob_norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

fn inner_product(a: &[HermitianMatrix], b: &[HermitianMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| real_inner(x.as_matrix(), y.as_matrix()))
        .sum()
}

/// Projected gradient ascent with Armijo backtracking on a concave
/// objective over a convex set given by an exact projection.
pub(crate) fn projected_ascent(
    start: Vec<HermitianMatrix>,
    mut objective: impl FnMut(&[HermitianMatrix]) -> Result<f64>,
    mut gradient: impl FnMut(&[HermitianMatrix]) -> Result<Vec<HermitianMatrix>>,
    project: impl Fn(&[HermitianMatrix]) -> Result<Vec<HermitianMatrix>>,
    settings: &SolverSettings,
) -> Result<AscentOutcome> {
    settings.validate()?;
    let mut vars = project(&start)?;
    let mut value = objective(&vars)?;
    if !value.is_finite() {
        return Err(Error::NumericalFailure(
            "master objective is not finite at the start".into(),
        ));
    }
    let mut step = settings.initial_step;
    let mut pg_norm = f64::INFINITY;
    let mut line_search_failed = false;
    let mut iters = 0;

    while iters < settings.max_inner_iters {
        let g = gradient(&vars)?;
        let probe = project(&add_scaled(&vars, &g, 1.0))?;
        pg_norm = distance(&probe, &vars);
        if pg_norm <= settings.grad_norm_tol {
            break;
        }
        iters += 1;

        // Warm-started trial step, allowed to grow back after shrinking.
        let mut alpha = step * 2.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = project(&add_scaled(&vars, &g, alpha))?;
            let ascent = inner_product(&g, &candidate_direction(&candidate, &vars));
            let cand_value = objective(&candidate)?;
            if cand_value.is_finite()
                && cand_value >= value + settings.sufficient_increase * ascent
                && ascent > 0.0
            {
                vars = candidate;
                value = cand_value;
                step = alpha;
                accepted = true;
                break;
            }
            alpha *= settings.backtrack;
        }
        if !accepted {
            line_search_failed = true;
            break;
        }
    }

    Ok(AscentOutcome {
        vars,
        value,
        iters,
        pg_norm,
        line_search_failed,
    })
}

fn candidate_direction(candidate: &[HermitianMatrix], vars: &[HermitianMatrix]) -> Vec<HermitianMatrix> {
    candidate.iter().zip(vars).map(|(c, v)| c.sub(v)).collect()
}

fn strategy_to_blocks(config: &NetworkConfig, x: &TransmitStrategy) -> Vec<HermitianMatrix> {
    config.users().map(|u| x.get(u).clone()).collect()
}

fn blocks_to_strategy(config: &NetworkConfig, blocks: &[HermitianMatrix]) -> TransmitStrategy {
    let mut out = TransmitStrategy::zeros(config);
    for (u, b) in config.users().zip(blocks) {
        out.set(u, b.clone());
    }
    out
}

fn aux_to_blocks(config: &NetworkConfig, aux: &AuxiliaryVars) -> Vec<HermitianMatrix> {
    config.users().map(|u| aux.get(u).clone()).collect()
}

fn blocks_to_aux(config: &NetworkConfig, blocks: &[HermitianMatrix]) -> AuxiliaryVars {
    let mut iter = blocks.iter();
    AuxiliaryVars::from_fn(config, |_| Ok(iter.next().expect("block count").clone()))
        .expect("shapes are consistent by construction")
}

/// Projects the covariance blocks cell by cell onto the feasible set.
fn project_strategy_blocks(
    config: &NetworkConfig,
    blocks: &[HermitianMatrix],
) -> Result<Vec<HermitianMatrix>> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut offset = 0;
    for cell in 0..config.num_cells() {
        let count = config.num_users(cell);
        let projected = project_cell(&blocks[offset..offset + count], config.power[cell])?;
        out.extend(projected);
        offset += count;
    }
    Ok(out)
}

/// Clips the eigenvalues of each auxiliary block to at least [`DELTA_Y`].
fn project_aux_blocks(blocks: &[HermitianMatrix]) -> Vec<HermitianMatrix> {
    blocks
        .iter()
        .map(|y| {
            let e = y.eig();
            if e.values[0] >= DELTA_Y {
                return y.clone();
            }
            let clipped: Vec<f64> = e.values.iter().map(|&v| v.max(DELTA_Y)).collect();
            HermitianMatrix::symmetrize(e.reconstruct_with(&clipped))
        })
        .collect()
}

/// Maximizes the Lagrangian over the transmit covariances with the
/// auxiliaries and multipliers fixed at the latest inner solution.
pub fn solve_master_alg1(
    config: &NetworkConfig,
    channels: &ChannelSet,
    aux_fixed: &AuxiliaryVars,
    duals_fixed: &DualVars,
    x_init: &TransmitStrategy,
    settings: &SolverSettings,
) -> Result<MasterResult> {
    aux_fixed.check_shapes(config, "auxiliary variables")?;
    duals_fixed.check_shapes(config, "multipliers")?;
    let outcome = projected_ascent(
        strategy_to_blocks(config, x_init),
        |blocks| {
            let x = blocks_to_strategy(config, blocks);
            lagrangian(config, channels, &x, aux_fixed, duals_fixed)
        },
        |blocks| {
            let x = blocks_to_strategy(config, blocks);
            let pack = grad(
                GradKind::Lagrangian,
                config,
                channels,
                &x,
                aux_fixed,
                aux_fixed,
                duals_fixed,
            )?;
            Ok(pack.dx.into_iter().flatten().collect())
        },
        |blocks| project_strategy_blocks(config, blocks),
        settings,
    )?;
    Ok(MasterResult {
        strategy: blocks_to_strategy(config, &outcome.vars),
        aux: None,
        value: outcome.value,
        inner_iters: outcome.iters,
        projected_grad_norm: outcome.pg_norm,
        line_search_failed: outcome.line_search_failed,
    })
}

/// Maximizes the penalized linearization jointly over the covariances and
/// the auxiliaries, anchored at the latest inner solution.
pub fn solve_master_alg2(
    config: &NetworkConfig,
    channels: &ChannelSet,
    anchor: &AuxiliaryVars,
    duals_fixed: &DualVars,
    x_init: &TransmitStrategy,
    aux_init: &AuxiliaryVars,
    settings: &SolverSettings,
) -> Result<MasterResult> {
    anchor.check_shapes(config, "anchor auxiliaries")?;
    duals_fixed.check_shapes(config, "multipliers")?;
    let n_users = config.total_users();
    let mut start = strategy_to_blocks(config, x_init);
    start.extend(aux_to_blocks(config, aux_init));

    let outcome = projected_ascent(
        start,
        |blocks| {
            let x = blocks_to_strategy(config, &blocks[..n_users]);
            let y = blocks_to_aux(config, &blocks[n_users..]);
            lin_lb(config, channels, &x, &y, anchor, duals_fixed)
        },
        |blocks| {
            let x = blocks_to_strategy(config, &blocks[..n_users]);
            let y = blocks_to_aux(config, &blocks[n_users..]);
            let pack = grad(GradKind::LinLb, config, channels, &x, &y, anchor, duals_fixed)?;
            let mut flat: Vec<HermitianMatrix> = pack.dx.into_iter().flatten().collect();
            flat.extend(pack.dy.into_iter().flatten());
            Ok(flat)
        },
        |blocks| {
            let mut out = project_strategy_blocks(config, &blocks[..n_users])?;
            out.extend(project_aux_blocks(&blocks[n_users..]));
            Ok(out)
        },
        settings,
    )?;

    Ok(MasterResult {
        strategy: blocks_to_strategy(config, &outcome.vars[..n_users]),
        aux: Some(blocks_to_aux(config, &outcome.vars[n_users..])),
        value: outcome.value,
        inner_iters: outcome.iters,
        projected_grad_norm: outcome.pg_norm,
        line_search_failed: outcome.line_search_failed,
    })
}
