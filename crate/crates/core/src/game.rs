//! The multi-carrier power control game: utilities, single-user best
//! responses and the sequential best-response iteration.
//!
//! A user's utility is its total goodput divided by its total transmit power
//! across carriers (bits per joule). Against fixed opponents the maximizer
//! puts all power on the single carrier with the largest effective gain, at
//! the power that yields `gamma*` there (or the power limit when `gamma*` is
//! out of reach).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::equilibrium;
use crate::error::{Error, Result};
use crate::model::{ChannelRealization, EfficiencyModel, SystemConfig};
use crate::receivers::{effective_gain, required_from_gain, PowerProfile, ReceiverKind};

/// Sweep cap and tolerance for per-carrier SINR balancing.
const BALANCE_MAX_SWEEPS: usize = 20_000;
const BALANCE_TOLERANCE: f64 = 1e-13;

/// One carrier per user, with per-carrier occupancy counts. Carriers are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CarrierAssignment {
    carrier_of: Vec<usize>,
    occupancy: Vec<usize>,
}

impl CarrierAssignment {
    pub fn new(carrier_of: Vec<usize>, num_carriers: usize) -> Result<Self> {
        let mut occupancy = vec![0; num_carriers];
        for (k, &l) in carrier_of.iter().enumerate() {
            if l >= num_carriers {
                return Err(Error::Index(format!(
                    "user {k} assigned to carrier {l} of {num_carriers}"
                )));
            }
            occupancy[l] += 1;
        }
        Ok(Self {
            carrier_of,
            occupancy,
        })
    }

    pub fn carrier_of(&self, user: usize) -> usize {
        self.carrier_of[user]
    }

    pub fn carriers(&self) -> &[usize] {
        &self.carrier_of
    }

    /// `n(l)`.
    pub fn occupancy(&self, carrier: usize) -> usize {
        self.occupancy[carrier]
    }

    pub fn occupancies(&self) -> &[usize] {
        &self.occupancy
    }

    pub fn num_users(&self) -> usize {
        self.carrier_of.len()
    }

    pub fn num_carriers(&self) -> usize {
        self.occupancy.len()
    }

    pub fn users_on(&self, carrier: usize) -> Vec<usize> {
        (0..self.num_users())
            .filter(|&k| self.carrier_of[k] == carrier)
            .collect()
    }

    /// All `D^K` assignments in lexicographic order (user 0 most significant).
    pub fn all(num_users: usize, num_carriers: usize) -> impl Iterator<Item = CarrierAssignment> {
        let total = (num_carriers as u128).pow(num_users as u32);
        (0..total).map(move |mut code| {
            let mut carriers = vec![0; num_users];
            for slot in carriers.iter_mut().rev() {
                *slot = (code % num_carriers as u128) as usize;
                code /= num_carriers as u128;
            }
            CarrierAssignment::new(carriers, num_carriers).expect("digits are in range")
        })
    }
}

impl fmt::Display for CarrierAssignment {
    /// 1-based carriers, e.g. `(1,2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, l) in self.carrier_of.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", l + 1)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BmpStatus {
    Converged,
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmpOutcome {
    pub status: BmpStatus,
    pub final_profile: PowerProfile,
    /// Carrier choices after the last round, meaningful as an equilibrium only when converged.
    pub assignment: CarrierAssignment,
    pub iterations_used: usize,
    pub capped_users: Vec<usize>,
}

impl BmpOutcome {
    pub fn converged(&self) -> bool {
        self.status == BmpStatus::Converged
    }
}

/// Starting point and update order for [`Game::bmp_run`].
#[derive(Debug, Clone, Default)]
pub struct BmpOptions {
    /// Defaults to all-zero powers.
    pub initial: Option<PowerProfile>,
    /// Permutation of users; defaults to ascending index.
    pub order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub carrier: usize,
    pub power: f64,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub profile: PowerProfile,
    pub total_utility: f64,
}

/// A validated configuration together with its efficiency model.
#[derive(Debug, Clone)]
pub struct Game {
    config: SystemConfig,
    efficiency: EfficiencyModel,
}

impl Game {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let efficiency = EfficiencyModel::new(config.packet_total_bits)?;
        Ok(Self { config, efficiency })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn efficiency(&self) -> &EfficiencyModel {
        &self.efficiency
    }

    pub fn gamma_star(&self) -> f64 {
        self.efficiency.gamma_star()
    }

    pub fn receiver(&self) -> ReceiverKind {
        self.config.receiver
    }

    fn check_shape(&self, channel: &ChannelRealization) -> Result<()> {
        if channel.num_users() != self.config.num_users || channel.num_carriers() != self.config.num_carriers
        {
            return Err(Error::Index(format!(
                "channel is {}x{} but the game has K = {}, D = {}",
                channel.num_users(),
                channel.num_carriers(),
                self.config.num_users,
                self.config.num_carriers
            )));
        }
        Ok(())
    }

    pub fn effective_gain(
        &self,
        profile: &PowerProfile,
        channel: &ChannelRealization,
        user: usize,
        carrier: usize,
    ) -> Result<f64> {
        effective_gain(
            self.config.receiver,
            profile,
            channel,
            user,
            carrier,
            &self.config,
        )
    }

    pub fn sinr(
        &self,
        profile: &PowerProfile,
        channel: &ChannelRealization,
        user: usize,
        carrier: usize,
    ) -> Result<f64> {
        let own = profile.get(user, carrier);
        if own == 0.0 {
            return Ok(0.0);
        }
        Ok(self.effective_gain(profile, channel, user, carrier)? * own)
    }

    /// Total goodput over total power for `user`; 0 when the user is silent.
    pub fn multicarrier_utility(
        &self,
        user: usize,
        profile: &PowerProfile,
        channel: &ChannelRealization,
    ) -> Result<f64> {
        let total_power = profile.total_power(user);
        if total_power == 0.0 || !total_power.is_finite() {
            return Ok(0.0);
        }
        let mut goodput = 0.0;
        for l in profile.active_carriers(user) {
            goodput += self.efficiency.value(self.sinr(profile, channel, user, l)?);
        }
        Ok(self.config.goodput_scale() * goodput / total_power)
    }

    /// The alternative utility `sum_l T_l / p_l`, maximized carrier by carrier.
    pub fn per_carrier_utility(
        &self,
        user: usize,
        profile: &PowerProfile,
        channel: &ChannelRealization,
    ) -> Result<f64> {
        let mut total = 0.0;
        for l in profile.active_carriers(user) {
            let p = profile.get(user, l);
            if p.is_finite() {
                total += self.efficiency.value(self.sinr(profile, channel, user, l)?) / p;
            }
        }
        Ok(self.config.goodput_scale() * total)
    }

    pub fn total_utility(&self, profile: &PowerProfile, channel: &ChannelRealization) -> Result<f64> {
        (0..self.config.num_users)
            .map(|k| self.multicarrier_utility(k, profile, channel))
            .sum()
    }

    /// Utility-maximizing single-carrier strategy of `user` against the other rows of `profile`.
    ///
    /// The chosen carrier has the largest effective gain, i.e. the smallest
    /// power to reach `gamma*`; ties go to the lowest index.
    pub fn best_response(
        &self,
        user: usize,
        profile: &PowerProfile,
        channel: &ChannelRealization,
    ) -> Result<BestResponse> {
        let mut best: Option<(usize, f64)> = None;
        for l in 0..channel.num_carriers() {
            let gain = self.effective_gain(profile, channel, user, l)?;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((l, gain));
            }
        }
        let (carrier, gain) = best.ok_or_else(|| Error::Index("no carriers".into()))?;
        let required = required_from_gain(gain, self.gamma_star(), self.config.power_cap());
        Ok(BestResponse {
            carrier,
            power: required.power(),
            capped: required.is_capped(),
        })
    }

    /// Powers `gamma* sigma^2 / h` on the given carriers, the noise-limited start.
    pub fn single_user_profile(
        &self,
        assignment: &CarrierAssignment,
        channel: &ChannelRealization,
    ) -> PowerProfile {
        let mut profile = PowerProfile::zeros(channel.num_users(), channel.num_carriers());
        for k in 0..assignment.num_users() {
            let l = assignment.carrier_of(k);
            let p = self.gamma_star() * self.config.noise_power / channel.gain(k, l);
            profile.set(k, l, p.min(self.config.power_cap()));
        }
        profile
    }

    /// Sequential best-response iteration.
    ///
    /// Each round lets every user, in order, move to its best response. The run
    /// converges once a round changes no carrier and moves no power by more than
    /// `power_tolerance` (relative). Runs that diverge to infinite power stop early.
    pub fn bmp_run(&self, channel: &ChannelRealization, options: &BmpOptions) -> Result<BmpOutcome> {
        self.check_shape(channel)?;
        let (k_users, d) = (self.config.num_users, self.config.num_carriers);
        let mut profile = match &options.initial {
            Some(p) if p.num_users() == k_users && p.num_carriers() == d => p.clone(),
            Some(_) => return Err(Error::Index("initial profile has the wrong shape".into())),
            None => PowerProfile::zeros(k_users, d),
        };
        let order: Vec<usize> = match &options.order {
            Some(o) => {
                let mut sorted = o.clone();
                sorted.sort_unstable();
                if sorted != (0..k_users).collect::<Vec<_>>() {
                    return Err(Error::Index(
                        "update order is not a permutation of the users".into(),
                    ));
                }
                o.clone()
            }
            None => (0..k_users).collect(),
        };

        let mut current: Vec<Option<usize>> = (0..k_users)
            .map(|k| match profile.active_carriers(k).as_slice() {
                [l] => Some(*l),
                _ => None,
            })
            .collect();
        let mut capped = vec![false; k_users];
        let mut status = BmpStatus::NoConvergence;
        let mut rounds = 0;

        while rounds < self.config.bmp_max_iter {
            rounds += 1;
            let before = profile.clone();
            let mut moved = false;
            for &k in &order {
                let response = self.best_response(k, &profile, channel)?;
                if current[k] != Some(response.carrier) {
                    moved = true;
                    current[k] = Some(response.carrier);
                }
                capped[k] = response.capped;
                profile.set_single(k, response.carrier, response.power);
            }
            if !profile.is_finite() {
                break;
            }
            if !moved && profile.max_relative_change(&before) < self.config.power_tolerance {
                status = BmpStatus::Converged;
                break;
            }
        }

        let carriers = current.into_iter().map(|c| c.unwrap_or(0)).collect();
        Ok(BmpOutcome {
            status,
            final_profile: profile,
            assignment: CarrierAssignment::new(carriers, d)?,
            iterations_used: rounds,
            capped_users: (0..k_users).filter(|&k| capped[k]).collect(),
        })
    }

    /// Powers at which every listed user reaches `gamma*` on its carrier,
    /// found by the standard interference-function iteration from zero.
    ///
    /// `groups[l]` lists the users active on carrier `l`.
    pub(crate) fn balance_powers(
        &self,
        channel: &ChannelRealization,
        groups: &[Vec<usize>],
    ) -> Result<PowerProfile> {
        let cap = self.config.power_cap();
        let mut profile = PowerProfile::zeros(channel.num_users(), channel.num_carriers());
        for (l, users) in groups.iter().enumerate() {
            let mut converged = false;
            for _ in 0..BALANCE_MAX_SWEEPS {
                let mut change: f64 = 0.0;
                for &k in users {
                    let gain = self.effective_gain(&profile, channel, k, l)?;
                    let p = required_from_gain(gain, self.gamma_star(), cap).power();
                    if !p.is_finite() || p > 1e300 {
                        return Err(Error::BalancingInfeasible);
                    }
                    let old = profile.get(k, l);
                    change = change.max((p - old).abs() / p.max(old));
                    profile.set(k, l, p);
                }
                if change < BALANCE_TOLERANCE {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::BalancingInfeasible);
            }
        }
        Ok(profile)
    }

    /// Every user transmits on every carrier at `gamma*`, each carrier balanced
    /// on its own; returns the profile and the summed multi-carrier utility.
    pub fn independent_max_benchmark(&self, channel: &ChannelRealization) -> Result<Benchmark> {
        self.check_shape(channel)?;
        let (k_users, d) = (self.config.num_users, self.config.num_carriers);
        let closed_form = self.config.receiver == ReceiverKind::MatchedFilter;
        let profile = match closed_form.then(|| self.mf_all_on_all(channel)).flatten() {
            Some(p) => p,
            None => {
                let everyone: Vec<usize> = (0..k_users).collect();
                self.balance_powers(channel, &vec![everyone; d])?
            }
        };
        let total_utility = self.total_utility(&profile, channel)?;
        Ok(Benchmark {
            profile,
            total_utility,
        })
    }

    /// Received power `sigma^2 gamma* Theta_K` per user per carrier, if feasible and within the limit.
    fn mf_all_on_all(&self, channel: &ChannelRealization) -> Option<PowerProfile> {
        let theta = equilibrium::theta(
            self.config.num_users,
            self.gamma_star(),
            self.config.processing_gain,
        )
        .ok()?;
        let q = self.config.noise_power * self.gamma_star() * theta;
        let mut profile = PowerProfile::zeros(channel.num_users(), channel.num_carriers());
        for k in 0..channel.num_users() {
            for l in 0..channel.num_carriers() {
                let p = q / channel.gain(k, l);
                if p > self.config.power_cap() {
                    return None;
                }
                profile.set(k, l, p);
            }
        }
        Some(profile)
    }
}
