//! Concave rate lower bound, Lagrangian, linearization, and its penalized
//! lower bound, together with analytic gradients in the transmit
//! covariances and the auxiliary receive variables.
//!
//! The achievable rate of a user is bounded below by
//! `log2 det(Z + H X H^H) + log2 det(Y)` for any auxiliary `Y > 0` with
//! `Y <= Z^{-1}`, with equality when `Y` and `Z^{-1}` share eigenvalues.
//! The bound is jointly concave in `(X, Y)`, which is what the master
//! solvers exploit.
//!
//! Log-base convention: all public values are in bits. Internally the
//! calculus runs in natural log and the multipliers absorb the `1/ln 2`
//! scale, so the stationarity identity reads `w * s * Y^{-1} = herm(G Z)`
//! with `s = 1/ln 2` and `w` the user's rate weight.

use crate::error::{Error, Result};
use crate::hermitian::{
    frob_sq, hermitian_part, inv_pd, logdet, real_inner, scale, CMat, HermitianMatrix,
};
use crate::model::{
    interference_covariance, received_covariance, ChannelSet, NetworkConfig, TransmitStrategy,
    UserIndex,
};
use crate::NATS_TO_BITS;

/// Eigenvalue floor realizing the strict constraint `Y > 0`.
pub const DELTA_Y: f64 = 1e-9;

/// Per-user Hermitian matrices indexed `[cell][user]`, each `m_ki x m_ki`.
///
/// Shared container for both the auxiliary variables and the multipliers.
#[derive(Clone, Debug)]
pub struct PerUserMatrices {
    mats: Vec<Vec<HermitianMatrix>>,
}

impl PerUserMatrices {
    pub fn new(mats: Vec<Vec<HermitianMatrix>>) -> Self {
        Self { mats }
    }

    /// Builds one matrix per user in deterministic user order.
    pub fn from_fn(
        config: &NetworkConfig,
        mut f: impl FnMut(UserIndex) -> Result<HermitianMatrix>,
    ) -> Result<Self> {
        let mut mats = Vec::with_capacity(config.num_cells());
        for cell in 0..config.num_cells() {
            let mut row = Vec::with_capacity(config.num_users(cell));
            for user in 0..config.num_users(cell) {
                row.push(f(UserIndex::new(cell, user))?);
            }
            mats.push(row);
        }
        Ok(Self { mats })
    }

    pub fn get(&self, user: UserIndex) -> &HermitianMatrix {
        &self.mats[user.cell][user.user]
    }

    pub fn set(&mut self, user: UserIndex, m: HermitianMatrix) {
        self.mats[user.cell][user.user] = m;
    }

    /// Checks per-user shapes `m_ki x m_ki` against the configuration.
    pub fn check_shapes(&self, config: &NetworkConfig, what: &str) -> Result<()> {
        if self.mats.len() != config.num_cells() {
            return Err(Error::ShapeMismatch {
                what: what.into(),
                expected: format!("{} cells", config.num_cells()),
                found: format!("{} cells", self.mats.len()),
            });
        }
        for user in config.users() {
            let row = &self.mats[user.cell];
            if row.len() != config.num_users(user.cell) {
                return Err(Error::ShapeMismatch {
                    what: format!("{what} cell {}", user.cell),
                    expected: format!("{} users", config.num_users(user.cell)),
                    found: format!("{} users", row.len()),
                });
            }
            let m = config.rx_antennas[user.cell][user.user];
            if self.get(user).dim() != m {
                return Err(Error::ShapeMismatch {
                    what: format!("{what} of user ({}, {})", user.cell, user.user),
                    expected: format!("{m}x{m}"),
                    found: format!("{0}x{0}", self.get(user).dim()),
                });
            }
        }
        Ok(())
    }
}

/// Auxiliary receive-side variables `Y_ki`, positive definite per user.
pub type AuxiliaryVars = PerUserMatrices;

/// Multipliers `G_ki` for the bilinear constraints, Hermitian PSD per user.
pub type DualVars = PerUserMatrices;

/// Analytic gradients with respect to each transmit covariance and each
/// auxiliary variable, Hermitian-symmetrized.
#[derive(Clone, Debug)]
pub struct GradientPack {
    /// Indexed `[cell][user]`, shape `n_k x n_k`.
    pub dx: Vec<Vec<HermitianMatrix>>,
    /// Indexed `[cell][user]`, shape `m_ki x m_ki`.
    pub dy: Vec<Vec<HermitianMatrix>>,
}

/// Which objective [`grad`] differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradKind {
    /// The Lagrangian at the given `(X, Y, G)`.
    Lagrangian,
    /// The penalized linearization at `(X, Y)` about the anchor.
    LinLb,
}

/// Lower-bound rate of one user in bits:
/// `log2 det(Z + H X H^H) + log2 det(Y)`.
///
/// Equals the achievable rate when `Y = Z^{-1}`.
pub fn lower_bound_rate(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    aux: &AuxiliaryVars,
    target: UserIndex,
) -> Result<f64> {
    let s = received_covariance(config, channels, x, target)?;
    let ld_s = logdet(&s)?;
    let ld_y = logdet(aux.get(target)).map_err(|_| Error::NotPositiveDefinite {
        context: format!(
            "auxiliary variable of user ({}, {})",
            target.cell, target.user
        ),
    })?;
    Ok((ld_s + ld_y) * NATS_TO_BITS)
}

/// Lagrangian of the inner problem:
/// `sum_ki w_ki R_lb_ki(X, Y_ki) + Re tr(G_ki (I - Z_ki Y_ki))`, in bits.
pub fn lagrangian(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    aux: &AuxiliaryVars,
    duals: &DualVars,
) -> Result<f64> {
    let mut total = 0.0;
    for user in config.users() {
        let w = config.weight(user);
        if w != 0.0 {
            total += w * lower_bound_rate(config, channels, x, aux, user)?;
        }
        let z = interference_covariance(config, channels, x, user)?;
        let m = z.dim();
        let slack = CMat::identity(m, m) - z.as_matrix() * aux.get(user).as_matrix();
        total += real_inner(duals.get(user).as_matrix(), &slack);
    }
    Ok(total)
}

/// The exact Y-gradient of the Lagrangian at `(x, y_point)`:
/// `w * s * Y^{-1} - herm(G Z)` for each user.
fn lagrangian_y_gradient(
    config: &NetworkConfig,
    z: &HermitianMatrix,
    y: &HermitianMatrix,
    gamma: &HermitianMatrix,
    user: UserIndex,
) -> Result<HermitianMatrix> {
    let w = config.weight(user);
    let y_inv = inv_pd(y).map_err(|_| Error::NotPositiveDefinite {
        context: format!("auxiliary variable of user ({}, {})", user.cell, user.user),
    })?;
    let gz = hermitian_part(&(gamma.as_matrix() * z.as_matrix()));
    Ok(HermitianMatrix::symmetrize(
        scale(y_inv.as_matrix(), w * NATS_TO_BITS) - gz,
    ))
}

/// First-order expansion of the Lagrangian in `Y` about `anchor`:
/// `L(X, anchor, G) + sum_ki Re tr(grad_ki (Y_ki - anchor_ki))`, where
/// `grad_ki` is the exact Y-gradient at the anchor. Tangent at
/// `Y = anchor` and an overestimate elsewhere by concavity in `Y`.
pub fn lin(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    aux: &AuxiliaryVars,
    anchor: &AuxiliaryVars,
    duals: &DualVars,
) -> Result<f64> {
    let mut total = lagrangian(config, channels, x, anchor, duals)?;
    for user in config.users() {
        let z = interference_covariance(config, channels, x, user)?;
        let g = lagrangian_y_gradient(config, &z, anchor.get(user), duals.get(user), user)?;
        let step = aux.get(user).as_matrix() - anchor.get(user).as_matrix();
        total += real_inner(g.as_matrix(), &step);
    }
    Ok(total)
}

/// Jointly concave lower bound on [`lin`]:
/// `L(X, anchor, G) - sum_ki 0.5 ||grad_ki(X) - (Y_ki - anchor_ki)||_F^2`,
/// with the residual Hermitian-symmetrized through the exact gradient.
pub fn lin_lb(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    aux: &AuxiliaryVars,
    anchor: &AuxiliaryVars,
    duals: &DualVars,
) -> Result<f64> {
    let mut total = lagrangian(config, channels, x, anchor, duals)?;
    for user in config.users() {
        let z = interference_covariance(config, channels, x, user)?;
        let g = lagrangian_y_gradient(config, &z, anchor.get(user), duals.get(user), user)?;
        let residual = g.as_matrix() - (aux.get(user).as_matrix() - anchor.get(user).as_matrix());
        total -= 0.5 * frob_sq(&residual);
    }
    Ok(total)
}

/// Analytic gradients of the selected objective with respect to every
/// `X_jl` and `Y_ki`.
///
/// For [`GradKind::Lagrangian`] the expansion point `anchor` is unused and
/// the gradient is taken at `(x, aux, duals)`. For [`GradKind::LinLb`] the
/// objective is the penalized linearization about `anchor`; its `Y`
/// gradient is exactly the (Hermitian) penalty residual.
pub fn grad(
    kind: GradKind,
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    aux: &AuxiliaryVars,
    anchor: &AuxiliaryVars,
    duals: &DualVars,
) -> Result<GradientPack> {
    let s = NATS_TO_BITS;
    let mut dx: Vec<Vec<CMat>> = (0..config.num_cells())
        .map(|cell| {
            let n = config.tx_antennas[cell];
            vec![CMat::zeros(n, n); config.num_users(cell)]
        })
        .collect();
    let mut dy: Vec<Vec<HermitianMatrix>> = Vec::with_capacity(config.num_cells());

    for cell in 0..config.num_cells() {
        let mut dy_row = Vec::with_capacity(config.num_users(cell));
        for user_idx in 0..config.num_users(cell) {
            let user = UserIndex::new(cell, user_idx);
            let w = config.weight(user);
            let z = interference_covariance(config, channels, x, user)?;
            let gamma = duals.get(user);

            // Y-gradient and, for the penalized form, the residual.
            let (y_grad, interference_weight) = match kind {
                GradKind::Lagrangian => {
                    let g = lagrangian_y_gradient(config, &z, aux.get(user), gamma, user)?;
                    // d/dX of -Re tr(G Z(X) Y): weight matrix Y G.
                    let t = aux.get(user).as_matrix() * gamma.as_matrix();
                    (g, scale(&t, -1.0))
                }
                GradKind::LinLb => {
                    let g =
                        lagrangian_y_gradient(config, &z, anchor.get(user), gamma, user)?;
                    let residual = HermitianMatrix::symmetrize(
                        g.as_matrix()
                            - (aux.get(user).as_matrix() - anchor.get(user).as_matrix()),
                    );
                    // d/dX combines the anchored Lagrangian part
                    // (-anchor G) and the penalty part (+residual G).
                    let t = (residual.as_matrix() - anchor.get(user).as_matrix())
                        * gamma.as_matrix();
                    (residual, t)
                }
            };
            dy_row.push(y_grad);

            // Own-signal term of the log-det: present for every transmit
            // covariance through the link into this user.
            let s_ki = received_covariance(config, channels, x, user)?;
            let s_inv = if w != 0.0 { Some(inv_pd(&s_ki)?) } else { None };

            for tx in 0..config.num_cells() {
                let h = channels.get(tx, user);
                let logdet_term = s_inv
                    .as_ref()
                    .map(|si| scale(&(h.adjoint() * si.as_matrix() * h), w * s));
                let interf_term = hermitian_part(&(h.adjoint() * &interference_weight * h));
                for l in 0..config.num_users(tx) {
                    if let Some(t) = &logdet_term {
                        dx[tx][l] += t;
                    }
                    // The interference covariance of `user` excludes the
                    // user's own covariance, so skip the diagonal pair.
                    if (tx, l) != (cell, user_idx) {
                        dx[tx][l] += &interf_term;
                    }
                }
            }
        }
        dy.push(dy_row);
    }

    let dx = dx
        .into_iter()
        .map(|row| row.into_iter().map(HermitianMatrix::symmetrize).collect())
        .collect();
    Ok(GradientPack { dx, dy })
}
