//! Multicell downlink model: network layout, channels, transmit strategies,
//! and achievable rates.
//!
//! A network has `K` cells; the base station of cell `k` serves the users of
//! that cell while interfering with everyone else. The channel from base
//! station `j` to user `i` of cell `k` is a complex `m_ki x n_j` matrix. A
//! transmit strategy assigns each user a Hermitian PSD covariance, subject
//! to a per-cell sum power budget.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{logdet, CMat, HermitianMatrix};
use crate::NATS_TO_BITS;

/// Hermitian deviation tolerance for transmit covariances.
pub const STRATEGY_HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalue tolerance for the PSD check on transmit covariances.
pub const STRATEGY_PSD_TOL: f64 = 1e-9;
/// Relative slack on the per-cell power budget.
pub const STRATEGY_POWER_TOL: f64 = 1e-9;

/// Static description of the network: antenna counts, budgets, noise, and
/// per-user rate weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Users served by each cell; the length is the number of cells.
    pub users_per_cell: Vec<usize>,
    /// Transmit antennas at each base station.
    pub tx_antennas: Vec<usize>,
    /// Receive antennas per user, indexed `[cell][user]`.
    pub rx_antennas: Vec<Vec<usize>>,
    /// Per-cell transmit power budgets, linear units.
    pub power: Vec<f64>,
    /// Noise variance, linear units.
    pub noise_var: f64,
    /// Nonnegative rate weights per user, indexed `[cell][user]`.
    pub weights: Vec<Vec<f64>>,
}

impl NetworkConfig {
    /// Uniform network: `cells` cells, identical user counts, antenna
    /// counts, budgets, and unit weights.
    pub fn uniform(
        cells: usize,
        users_per_cell: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        power: f64,
        noise_var: f64,
    ) -> Self {
        Self {
            users_per_cell: vec![users_per_cell; cells],
            tx_antennas: vec![tx_antennas; cells],
            rx_antennas: vec![vec![rx_antennas; users_per_cell]; cells],
            power: vec![power; cells],
            noise_var,
            weights: vec![vec![1.0; users_per_cell]; cells],
        }
    }

    pub fn num_cells(&self) -> usize {
        self.users_per_cell.len()
    }

    pub fn num_users(&self, cell: usize) -> usize {
        self.users_per_cell[cell]
    }

    pub fn total_users(&self) -> usize {
        self.users_per_cell.iter().sum()
    }

    pub fn weight(&self, user: UserIndex) -> f64 {
        self.weights[user.cell][user.user]
    }

    /// All users in deterministic (cell, user) order.
    pub fn users(&self) -> impl Iterator<Item = UserIndex> + '_ {
        self.users_per_cell
            .iter()
            .enumerate()
            .flat_map(|(k, &count)| (0..count).map(move |i| UserIndex { cell: k, user: i }))
    }

    /// Checks structural consistency and the model invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.num_cells();
        if k == 0 {
            return Err(Error::InvalidInput("at least one cell is required".into()));
        }
        for (name, len) in [
            ("tx_antennas", self.tx_antennas.len()),
            ("rx_antennas", self.rx_antennas.len()),
            ("power", self.power.len()),
            ("weights", self.weights.len()),
        ] {
            if len != k {
                return Err(Error::InvalidInput(format!(
                    "{name} has {len} entries for {k} cells"
                )));
            }
        }
        for cell in 0..k {
            let users = self.users_per_cell[cell];
            if self.rx_antennas[cell].len() != users {
                return Err(Error::InvalidInput(format!(
                    "rx_antennas[{cell}] has {} entries for {users} users",
                    self.rx_antennas[cell].len()
                )));
            }
            if self.weights[cell].len() != users {
                return Err(Error::InvalidInput(format!(
                    "weights[{cell}] has {} entries for {users} users",
                    self.weights[cell].len()
                )));
            }
            if self.tx_antennas[cell] == 0 {
                return Err(Error::InvalidInput(format!(
                    "tx_antennas[{cell}] must be at least 1"
                )));
            }
            if !(self.power[cell] > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "power[{cell}] must be positive, got {}",
                    self.power[cell]
                )));
            }
            for (i, &m) in self.rx_antennas[cell].iter().enumerate() {
                if m == 0 {
                    return Err(Error::InvalidInput(format!(
                        "rx_antennas[{cell}][{i}] must be at least 1"
                    )));
                }
            }
            for (i, &w) in self.weights[cell].iter().enumerate() {
                if !(w >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "weights[{cell}][{i}] must be nonnegative, got {w}"
                    )));
                }
            }
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise_var must be positive, got {}",
                self.noise_var
            )));
        }
        if self.total_users() == 0 {
            return Err(Error::InvalidInput("network has no users".into()));
        }
        if !self.weights.iter().flatten().any(|&w| w > 0.0) {
            return Err(Error::InvalidInput(
                "at least one rate weight must be positive".into(),
            ));
        }
        Ok(())
    }

    fn check_user(&self, user: UserIndex) -> Result<()> {
        if user.cell >= self.num_cells() || user.user >= self.num_users(user.cell) {
            return Err(Error::IndexOutOfRange(format!(
                "user ({}, {}) outside the configured network",
                user.cell, user.user
            )));
        }
        Ok(())
    }
}

/// Identifies one user: `cell` is the serving cell, `user` the index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserIndex {
    pub cell: usize,
    pub user: usize,
}

impl UserIndex {
    pub fn new(cell: usize, user: usize) -> Self {
        Self { cell, user }
    }
}

/// All cross-link channel matrices: `get(j, (k, i))` is the channel from
/// base station `j` to user `i` of cell `k`, of shape `m_ki x n_j`.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    /// Indexed `[rx cell][rx user][tx cell]`.
    links: Vec<Vec<Vec<CMat>>>,
}

impl ChannelSet {
    /// Builds from explicit matrices indexed `[rx cell][rx user][tx cell]`,
    /// validating shapes and finiteness against the configuration.
    pub fn from_links(config: &NetworkConfig, links: Vec<Vec<Vec<CMat>>>) -> Result<Self> {
        let k = config.num_cells();
        if links.len() != k {
            return Err(Error::ShapeMismatch {
                what: "ChannelSet cells".into(),
                expected: format!("{k}"),
                found: format!("{}", links.len()),
            });
        }
        for (cell, per_user) in links.iter().enumerate() {
            if per_user.len() != config.num_users(cell) {
                return Err(Error::ShapeMismatch {
                    what: format!("ChannelSet users of cell {cell}"),
                    expected: format!("{}", config.num_users(cell)),
                    found: format!("{}", per_user.len()),
                });
            }
            for (user, per_tx) in per_user.iter().enumerate() {
                if per_tx.len() != k {
                    return Err(Error::ShapeMismatch {
                        what: format!("ChannelSet links into user ({cell}, {user})"),
                        expected: format!("{k}"),
                        found: format!("{}", per_tx.len()),
                    });
                }
                for (tx, h) in per_tx.iter().enumerate() {
                    let want = (config.rx_antennas[cell][user], config.tx_antennas[tx]);
                    if h.shape() != want {
                        return Err(Error::ShapeMismatch {
                            what: format!("channel ({tx} -> {cell},{user})"),
                            expected: format!("{}x{}", want.0, want.1),
                            found: format!("{}x{}", h.nrows(), h.ncols()),
                        });
                    }
                    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                        return Err(Error::NumericalFailure(format!(
                            "channel ({tx} -> {cell},{user}) has non-finite entries"
                        )));
                    }
                }
            }
        }
        Ok(Self { links })
    }

    pub fn get(&self, tx_cell: usize, rx: UserIndex) -> &CMat {
        &self.links[rx.cell][rx.user][tx_cell]
    }
}

/// Draws all channel matrices with i.i.d. circularly-symmetric complex
/// Gaussian entries of zero mean and unit variance; deterministic in `seed`.
pub fn generate_channels(config: &NetworkConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.5_f64.sqrt();
    let mut links = Vec::with_capacity(config.num_cells());
    for cell in 0..config.num_cells() {
        let mut per_user = Vec::with_capacity(config.num_users(cell));
        for user in 0..config.num_users(cell) {
            let m = config.rx_antennas[cell][user];
            let mut per_tx = Vec::with_capacity(config.num_cells());
            for tx in 0..config.num_cells() {
                let n = config.tx_antennas[tx];
                let mut h = CMat::zeros(m, n);
                for r in 0..m {
                    for c in 0..n {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        h[(r, c)] = Complex64::new(re * scale, im * scale);
                    }
                }
                per_tx.push(h);
            }
            per_user.push(per_tx);
        }
        links.push(per_user);
    }
    Ok(ChannelSet { links })
}

/// Per-user transmit covariances, indexed `[cell][user]`, each `n_k x n_k`.
#[derive(Clone, Debug)]
pub struct TransmitStrategy {
    covs: Vec<Vec<HermitianMatrix>>,
}

impl TransmitStrategy {
    /// Wraps explicit covariances, validating only shapes; feasibility is a
    /// separate check via [`is_feasible`].
    pub fn from_covariances(
        config: &NetworkConfig,
        covs: Vec<Vec<HermitianMatrix>>,
    ) -> Result<Self> {
        if covs.len() != config.num_cells() {
            return Err(Error::ShapeMismatch {
                what: "TransmitStrategy cells".into(),
                expected: format!("{}", config.num_cells()),
                found: format!("{}", covs.len()),
            });
        }
        for (cell, per_user) in covs.iter().enumerate() {
            if per_user.len() != config.num_users(cell) {
                return Err(Error::ShapeMismatch {
                    what: format!("TransmitStrategy users of cell {cell}"),
                    expected: format!("{}", config.num_users(cell)),
                    found: format!("{}", per_user.len()),
                });
            }
            for (user, x) in per_user.iter().enumerate() {
                if x.dim() != config.tx_antennas[cell] {
                    return Err(Error::ShapeMismatch {
                        what: format!("covariance of user ({cell}, {user})"),
                        expected: format!("{0}x{0}", config.tx_antennas[cell]),
                        found: format!("{0}x{0}", x.dim()),
                    });
                }
            }
        }
        Ok(Self { covs })
    }

    /// Uniform power allocation: `X_ki = P_k / (|U_k| n_k) I`, which meets
    /// each budget with equality.
    pub fn uniform_power(config: &NetworkConfig) -> Self {
        let covs = (0..config.num_cells())
            .map(|cell| {
                let users = config.num_users(cell);
                let n = config.tx_antennas[cell];
                let level = if users == 0 {
                    0.0
                } else {
                    config.power[cell] / (users as f64 * n as f64)
                };
                (0..users)
                    .map(|_| HermitianMatrix::identity(n).scaled(level))
                    .collect()
            })
            .collect();
        Self { covs }
    }

    /// All-zero covariances.
    pub fn zeros(config: &NetworkConfig) -> Self {
        let covs = (0..config.num_cells())
            .map(|cell| {
                (0..config.num_users(cell))
                    .map(|_| HermitianMatrix::zeros(config.tx_antennas[cell]))
                    .collect()
            })
            .collect();
        Self { covs }
    }

    pub fn get(&self, user: UserIndex) -> &HermitianMatrix {
        &self.covs[user.cell][user.user]
    }

    pub fn set(&mut self, user: UserIndex, cov: HermitianMatrix) {
        self.covs[user.cell][user.user] = cov;
    }

    pub fn cell(&self, cell: usize) -> &[HermitianMatrix] {
        &self.covs[cell]
    }

    pub fn set_cell(&mut self, cell: usize, covs: Vec<HermitianMatrix>) {
        assert_eq!(covs.len(), self.covs[cell].len());
        self.covs[cell] = covs;
    }
}

/// One violated transmit-strategy constraint, with its magnitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FeasibilityViolation {
    /// Deviation from Hermitian symmetry beyond [`STRATEGY_HERMITIAN_TOL`].
    Hermitian { user: (usize, usize), deviation: f64 },
    /// Most negative eigenvalue beyond [`STRATEGY_PSD_TOL`].
    NegativeEigenvalue { user: (usize, usize), eigenvalue: f64 },
    /// Per-cell trace sum exceeding the budget; `excess` is the overshoot.
    PowerBudget { cell: usize, excess: f64 },
}

impl std::fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Hermitian { user, deviation } => write!(
                f,
                "covariance of user {user:?} deviates from Hermitian by {deviation:.3e}"
            ),
            Self::NegativeEigenvalue { user, eigenvalue } => write!(
                f,
                "covariance of user {user:?} has eigenvalue {eigenvalue:.3e}"
            ),
            Self::PowerBudget { cell, excess } => {
                write!(f, "cell {cell} exceeds its power budget by {excess:.3e}")
            }
        }
    }
}

/// Outcome of the feasibility check: feasible iff no violations.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<FeasibilityViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks Hermitian symmetry, positive semidefiniteness, and the per-cell
/// power budgets, reporting each violated constraint and by how much.
pub fn is_feasible(config: &NetworkConfig, x: &TransmitStrategy) -> Result<FeasibilityReport> {
    if x.covs.len() != config.num_cells() {
        return Err(Error::ShapeMismatch {
            what: "TransmitStrategy cells".into(),
            expected: format!("{}", config.num_cells()),
            found: format!("{}", x.covs.len()),
        });
    }
    let mut violations = Vec::new();
    for cell in 0..config.num_cells() {
        let mut trace_sum = 0.0;
        for user in 0..config.num_users(cell) {
            let cov = x.get(UserIndex::new(cell, user));
            if cov.dim() != config.tx_antennas[cell] {
                return Err(Error::ShapeMismatch {
                    what: format!("covariance of user ({cell}, {user})"),
                    expected: format!("{0}x{0}", config.tx_antennas[cell]),
                    found: format!("{0}x{0}", cov.dim()),
                });
            }
            // HermitianMatrix stores the symmetrized value, so re-measuring
            // deviation there is vacuous; the stored matrix is checked for
            // the tighter strategy tolerance anyway to catch foreign inputs.
            let deviation = crate::hermitian::hermitian_deviation(cov.as_matrix());
            if deviation > STRATEGY_HERMITIAN_TOL {
                violations.push(FeasibilityViolation::Hermitian {
                    user: (cell, user),
                    deviation,
                });
            }
            let min_eig = cov.min_eigenvalue();
            if min_eig < -STRATEGY_PSD_TOL {
                violations.push(FeasibilityViolation::NegativeEigenvalue {
                    user: (cell, user),
                    eigenvalue: min_eig,
                });
            }
            trace_sum += cov.trace();
        }
        let budget = config.power[cell] * (1.0 + STRATEGY_POWER_TOL);
        if trace_sum > budget {
            violations.push(FeasibilityViolation::PowerBudget {
                cell,
                excess: trace_sum - config.power[cell],
            });
        }
    }
    Ok(FeasibilityReport { violations })
}

/// Interference-plus-noise covariance at a user: noise plus intracell
/// interference from co-cell users plus intercell interference from every
/// other base station. Always Hermitian positive definite for PSD inputs.
pub fn interference_covariance(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    target: UserIndex,
) -> Result<HermitianMatrix> {
    config.check_user(target)?;
    let m = config.rx_antennas[target.cell][target.user];
    let mut z = CMat::identity(m, m) * Complex64::new(config.noise_var, 0.0);
    let own_channel = channels.get(target.cell, target);
    for other in 0..config.num_users(target.cell) {
        if other == target.user {
            continue;
        }
        let cov = x.get(UserIndex::new(target.cell, other));
        z += own_channel * cov.as_matrix() * own_channel.adjoint();
    }
    for tx in 0..config.num_cells() {
        if tx == target.cell {
            continue;
        }
        let h = channels.get(tx, target);
        for other in 0..config.num_users(tx) {
            let cov = x.get(UserIndex::new(tx, other));
            z += h * cov.as_matrix() * h.adjoint();
        }
    }
    Ok(HermitianMatrix::symmetrize(z))
}

/// Total received covariance at a user: interference plus noise plus the
/// user's own signal through its serving channel.
pub(crate) fn received_covariance(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    target: UserIndex,
) -> Result<HermitianMatrix> {
    let z = interference_covariance(config, channels, x, target)?;
    let h = channels.get(target.cell, target);
    let own = h * x.get(target).as_matrix() * h.adjoint();
    Ok(HermitianMatrix::symmetrize(z.as_matrix() + own))
}

/// Achievable rate of one user in bits per channel use, computed as
/// `log2 det(Z + H X H^H) - log2 det(Z)`.
pub fn achievable_rate(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
    target: UserIndex,
) -> Result<f64> {
    let z = interference_covariance(config, channels, x, target)?;
    let s = received_covariance(config, channels, x, target)?;
    let ld_s = logdet(&s).map_err(|_| {
        Error::NumericalFailure(format!(
            "received covariance of user ({}, {}) is numerically singular",
            target.cell, target.user
        ))
    })?;
    let ld_z = logdet(&z).map_err(|_| {
        Error::NumericalFailure(format!(
            "interference covariance of user ({}, {}) is numerically singular",
            target.cell, target.user
        ))
    })?;
    Ok((ld_s - ld_z) * NATS_TO_BITS)
}

/// Per-user achievable rates in deterministic user order.
pub fn user_rates(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
) -> Result<Vec<f64>> {
    config
        .users()
        .map(|u| achievable_rate(config, channels, x, u))
        .collect()
}

/// Weighted sum rate over all users.
pub fn weighted_sum_rate(
    config: &NetworkConfig,
    channels: &ChannelSet,
    x: &TransmitStrategy,
) -> Result<f64> {
    let mut total = 0.0;
    for user in config.users() {
        let w = config.weight(user);
        if w == 0.0 {
            continue;
        }
        total += w * achievable_rate(config, channels, x, user)?;
    }
    Ok(total)
}

/// Deterministic sub-seed derivation (splitmix64 over `base ^ index`).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
