//! Output SINR of the linear uplink receivers at SINR-level abstraction.
//!
//! For every receiver here the output SINR of user `k` on carrier `l` is
//! linear in that user's own power: `gamma = h_eff * p`, where the effective
//! gain `h_eff` depends only on the other users' powers. Everything in the game
//! layer is written against [`effective_gain`].
//!
//! * Matched filter: `h / (sigma^2 + (1/N) sum_{j != k} p_j h_j)`, the
//!   random-spreading large-system expression.
//! * Decorrelator: `h / (sigma^2 [(S^T S)^-1]_kk)`, with the receiver bank
//!   built from all K signatures so interference is fully nulled.
//! * MMSE: `h s_k^T A^-1 s_k` with `A = sigma^2 I + sum_{j != k} p_j h_j s_j s_j^T`
//!   over the users active on the carrier.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ChannelRealization, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceiverKind {
    #[serde(rename = "mf", alias = "matched-filter")]
    MatchedFilter,
    #[serde(rename = "de", alias = "decorrelator")]
    Decorrelator,
    #[serde(rename = "mmse")]
    Mmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] = [
        ReceiverKind::MatchedFilter,
        ReceiverKind::Decorrelator,
        ReceiverKind::Mmse,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ReceiverKind::MatchedFilter => "mf",
            ReceiverKind::Decorrelator => "de",
            ReceiverKind::Mmse => "mmse",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf" | "matched-filter" => Ok(ReceiverKind::MatchedFilter),
            "de" | "decorrelator" => Ok(ReceiverKind::Decorrelator),
            "mmse" => Ok(ReceiverKind::Mmse),
            other => Err(Error::InvalidConfig(format!(
                "unknown receiver `{other}` (expected mf, de or mmse)"
            ))),
        }
    }
}

/// K x D matrix of non-negative transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    powers: DMatrix<f64>,
}

impl PowerProfile {
    pub fn zeros(num_users: usize, num_carriers: usize) -> Self {
        Self {
            powers: DMatrix::zeros(num_users, num_carriers),
        }
    }

    pub fn from_matrix(powers: DMatrix<f64>) -> Result<Self> {
        if let Some(p) = powers.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "transmit powers must be non-negative, got {p}"
            )));
        }
        Ok(Self { powers })
    }

    pub fn num_users(&self) -> usize {
        self.powers.nrows()
    }

    pub fn num_carriers(&self) -> usize {
        self.powers.ncols()
    }

    pub fn get(&self, user: usize, carrier: usize) -> f64 {
        self.powers[(user, carrier)]
    }

    pub fn set(&mut self, user: usize, carrier: usize, power: f64) {
        debug_assert!(power >= 0.0);
        self.powers[(user, carrier)] = power;
    }

    /// Put all of `user`'s power on `carrier`.
    pub fn set_single(&mut self, user: usize, carrier: usize, power: f64) {
        self.powers.row_mut(user).fill(0.0);
        self.powers[(user, carrier)] = power;
    }

    pub fn total_power(&self, user: usize) -> f64 {
        self.powers.row(user).sum()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.powers
    }

    /// Carriers on which `user` transmits.
    pub fn active_carriers(&self, user: usize) -> Vec<usize> {
        (0..self.num_carriers())
            .filter(|&l| self.powers[(user, l)] > 0.0)
            .collect()
    }

    /// Largest entrywise `|a - b| / max(|a|, |b|)`, 0 where both are 0.
    pub fn max_relative_change(&self, other: &PowerProfile) -> f64 {
        self.powers
            .iter()
            .zip(other.powers.iter())
            .map(|(&a, &b)| {
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.powers.iter().all(|p| p.is_finite())
    }

    pub fn within_limit(&self, max_power: f64) -> bool {
        self.powers.iter().all(|&p| (0.0..=max_power).contains(&p))
    }
}

/// Power needed to reach a target SINR, or the limit when it cannot be reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RequiredPower {
    Reachable(f64),
    Capped(f64),
}

impl RequiredPower {
    pub fn power(self) -> f64 {
        match self {
            RequiredPower::Reachable(p) | RequiredPower::Capped(p) => p,
        }
    }

    pub fn is_capped(self) -> bool {
        matches!(self, RequiredPower::Capped(_))
    }
}

fn check_indices(
    profile: &PowerProfile,
    channel: &ChannelRealization,
    user: usize,
    carrier: usize,
) -> Result<()> {
    if profile.num_users() != channel.num_users() || profile.num_carriers() != channel.num_carriers() {
        return Err(Error::Index(format!(
            "profile is {}x{} but channel is {}x{}",
            profile.num_users(),
            profile.num_carriers(),
            channel.num_users(),
            channel.num_carriers()
        )));
    }
    if user >= channel.num_users() || carrier >= channel.num_carriers() {
        return Err(Error::Index(format!(
            "user {user}, carrier {carrier} outside {}x{}",
            channel.num_users(),
            channel.num_carriers()
        )));
    }
    Ok(())
}

/// `h_eff` such that the output SINR of `user` on `carrier` is `h_eff * p`.
pub fn effective_gain(
    kind: ReceiverKind,
    profile: &PowerProfile,
    channel: &ChannelRealization,
    user: usize,
    carrier: usize,
    config: &SystemConfig,
) -> Result<f64> {
    check_indices(profile, channel, user, carrier)?;
    let h = channel.gain(user, carrier);
    let noise = config.noise_power;
    match kind {
        ReceiverKind::MatchedFilter => {
            let interference: f64 = (0..channel.num_users())
                .filter(|&j| j != user)
                .map(|j| profile.get(j, carrier) * channel.gain(j, carrier))
                .sum();
            Ok(h / (noise + interference / config.processing_gain as f64))
        }
        ReceiverKind::Decorrelator => {
            let diag = channel.decorrelator_diagonal()?;
            Ok(h / (noise * diag[user]))
        }
        ReceiverKind::Mmse => Ok(h * mmse_quadratic_form(profile, channel, user, carrier, noise)),
    }
}

/// `s_k^T A^-1 s_k`, evaluated in the K-dimensional signature space through
/// the matrix inversion lemma:
/// `s^T A^-1 s = (G_kk - g^T (diag(1/x) + G_JJ)^-1 g) / sigma^2`,
/// with `x_j = p_j h_j / sigma^2` over the active interferers `J` and `g = G_Jk`.
fn mmse_quadratic_form(
    profile: &PowerProfile,
    channel: &ChannelRealization,
    user: usize,
    carrier: usize,
    noise: f64,
) -> f64 {
    let gram = channel.gram();
    let active: Vec<usize> = (0..channel.num_users())
        .filter(|&j| j != user && profile.get(j, carrier) > 0.0)
        .collect();
    if active.is_empty() {
        return gram[(user, user)] / noise;
    }
    let m = active.len();
    let mut core = DMatrix::zeros(m, m);
    let mut cross = DVector::zeros(m);
    for (a, &j) in active.iter().enumerate() {
        let snr = profile.get(j, carrier) * channel.gain(j, carrier) / noise;
        for (b, &i) in active.iter().enumerate() {
            core[(a, b)] = gram[(j, i)];
        }
        core[(a, a)] += 1.0 / snr;
        cross[a] = gram[(j, user)];
    }
    match linalg::spd_solve(core, &cross) {
        Some(y) => ((gram[(user, user)] - cross.dot(&y)) / noise).max(0.0),
        None => mmse_quadratic_form_direct(profile, channel, user, carrier, noise, &active),
    }
}

/// N x N route, used only when the reduced system is numerically indefinite.
fn mmse_quadratic_form_direct(
    profile: &PowerProfile,
    channel: &ChannelRealization,
    user: usize,
    carrier: usize,
    noise: f64,
    active: &[usize],
) -> f64 {
    let sigs = channel.signatures();
    let n = sigs.nrows();
    let mut a = DMatrix::identity(n, n) * noise;
    for &j in active {
        let s = sigs.column(j);
        a += s * s.transpose() * (profile.get(j, carrier) * channel.gain(j, carrier));
    }
    let s = channel.signature(user);
    let y = linalg::spd_solve(a, &s).expect("sigma^2 I + PSD is positive definite");
    s.dot(&y)
}

pub fn compute_sinr(
    kind: ReceiverKind,
    profile: &PowerProfile,
    channel: &ChannelRealization,
    user: usize,
    carrier: usize,
    config: &SystemConfig,
) -> Result<f64> {
    let own = profile.get(user, carrier);
    if own == 0.0 {
        check_indices(profile, channel, user, carrier)?;
        return Ok(0.0);
    }
    Ok(effective_gain(kind, profile, channel, user, carrier, config)? * own)
}

/// Own power that puts `user` at `target` SINR on `carrier`, others held fixed.
pub fn required_power(
    kind: ReceiverKind,
    profile: &PowerProfile,
    channel: &ChannelRealization,
    user: usize,
    carrier: usize,
    target: f64,
    config: &SystemConfig,
) -> Result<RequiredPower> {
    let gain = effective_gain(kind, profile, channel, user, carrier, config)?;
    Ok(required_from_gain(gain, target, config.power_cap()))
}

pub(crate) fn required_from_gain(gain: f64, target: f64, cap: f64) -> RequiredPower {
    let p = target / gain;
    if p > cap || !p.is_finite() && cap.is_finite() {
        RequiredPower::Capped(cap)
    } else {
        RequiredPower::Reachable(p)
    }
}
