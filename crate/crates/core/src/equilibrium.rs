//! Equilibrium structure of the game.
//!
//! At a Nash equilibrium every user transmits on one carrier, so the candidate
//! set is the `D^K` carrier assignments. With a matched filter and `n` users
//! sharing a carrier at `gamma*`, each user's received power is
//! `sigma^2 gamma* Theta_n` where
//!
//! ```text
//! Theta_n = 1 / (1 - (n - 1) gamma* / N)
//! ```
//!
//! and user `k` stays on carrier `l` rather than moving to `i` iff
//! `h_kl / h_ki > Theta_n(l) Theta_0 / Theta_n(i)`, `n(i)` counting the users
//! already on `i`. For the multiuser detectors no closed form exists; the
//! check falls back to verifying the best-response fixed point directly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CarrierAssignment, Game};
use crate::model::ChannelRealization;
use crate::receivers::{PowerProfile, ReceiverKind};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// `1 / (1 - (n-1) gamma* / N)`; errors when the denominator is not positive.
pub fn theta(n: usize, gamma_star: f64, processing_gain: usize) -> Result<f64> {
    let denom = 1.0 - (n as f64 - 1.0) * gamma_star / processing_gain as f64;
    if denom <= 0.0 {
        return Err(Error::InfeasibleOccupancy {
            users: n,
            gamma_star,
            processing_gain,
        });
    }
    Ok(1.0 / denom)
}

/// `Theta_0 ..= Theta_n` for every occupancy the processing gain supports.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    gamma_star: f64,
    processing_gain: usize,
    values: Vec<f64>,
}

impl ThetaTable {
    pub fn new(max_users: usize, gamma_star: f64, processing_gain: usize) -> Self {
        let values = (0..=max_users)
            .map_while(|n| theta(n, gamma_star, processing_gain).ok())
            .collect();
        Self {
            gamma_star,
            processing_gain,
            values,
        }
    }

    pub fn get(&self, n: usize) -> Result<f64> {
        self.values.get(n).copied().ok_or(Error::InfeasibleOccupancy {
            users: n,
            gamma_star: self.gamma_star,
            processing_gain: self.processing_gain,
        })
    }

    /// Largest occupancy with a defined `Theta`.
    pub fn max_occupancy(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of testing one assignment.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Equilibrium,
    NotEquilibrium,
    /// The assignment cannot put every user at `gamma*`.
    Infeasible(Error),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Equilibrium)
    }
}

fn check_shape(game: &Game, assignment: &CarrierAssignment, channel: &ChannelRealization) -> Result<()> {
    let cfg = game.config();
    if assignment.num_users() != cfg.num_users
        || assignment.num_carriers() != cfg.num_carriers
        || channel.num_users() != cfg.num_users
        || channel.num_carriers() != cfg.num_carriers
    {
        return Err(Error::Index(format!(
            "assignment {}x{} / channel {}x{} do not match K = {}, D = {}",
            assignment.num_users(),
            assignment.num_carriers(),
            channel.num_users(),
            channel.num_carriers(),
            cfg.num_users,
            cfg.num_carriers
        )));
    }
    Ok(())
}

/// Whether `assignment` is a Nash equilibrium on `channel`.
///
/// Matched filter: the closed-form pairwise gain-ratio test. Other receivers:
/// [`check_fixed_point`].
pub fn check_equilibrium(
    game: &Game,
    assignment: &CarrierAssignment,
    channel: &ChannelRealization,
) -> Result<Verdict> {
    check_shape(game, assignment, channel)?;
    if game.receiver() != ReceiverKind::MatchedFilter {
        return check_fixed_point(game, assignment, channel);
    }
    let cfg = game.config();
    let table = ThetaTable::new(cfg.num_users, game.gamma_star(), cfg.processing_gain);
    let theta_of = |n: usize| table.get(n);
    for l in 0..cfg.num_carriers {
        if let Err(e) = theta_of(assignment.occupancy(l)) {
            return Ok(Verdict::Infeasible(e));
        }
    }
    if cfg.max_power.is_some() {
        if let Err(e) = equilibrium_powers(game, assignment, channel) {
            return Ok(Verdict::Infeasible(e));
        }
    }
    let theta_0 = theta_of(0)?;
    for k in 0..cfg.num_users {
        let l = assignment.carrier_of(k);
        let own = theta_of(assignment.occupancy(l))?;
        for i in (0..cfg.num_carriers).filter(|&i| i != l) {
            let threshold = own * theta_0 / theta_of(assignment.occupancy(i))?;
            if !(channel.gain(k, l) / channel.gain(k, i) > threshold) {
                return Ok(Verdict::NotEquilibrium);
            }
        }
    }
    Ok(Verdict::Equilibrium)
}

/// Receiver-agnostic test: balance every carrier at `gamma*`, then require each
/// user's own carrier to offer a strictly larger effective gain than any other.
pub fn check_fixed_point(
    game: &Game,
    assignment: &CarrierAssignment,
    channel: &ChannelRealization,
) -> Result<Verdict> {
    check_shape(game, assignment, channel)?;
    let profile = match equilibrium_powers(game, assignment, channel) {
        Ok(p) => p,
        Err(e @ Error::Index(_)) => return Err(e),
        Err(e) => return Ok(Verdict::Infeasible(e)),
    };
    let cfg = game.config();
    for k in 0..cfg.num_users {
        let l = assignment.carrier_of(k);
        let own = match game.effective_gain(&profile, channel, k, l) {
            Ok(g) => g,
            Err(e) => return Ok(Verdict::Infeasible(e)),
        };
        for i in (0..cfg.num_carriers).filter(|&i| i != l) {
            if !(own > game.effective_gain(&profile, channel, k, i)?) {
                return Ok(Verdict::NotEquilibrium);
            }
        }
    }
    Ok(Verdict::Equilibrium)
}

/// Powers putting every user at `gamma*` on its assigned carrier.
///
/// Matched filter: `gamma* sigma^2 Theta_n(l) / h_kl`. Other receivers: per-carrier
/// SINR balancing. Fails when an occupancy is infeasible or a power exceeds the limit.
pub fn equilibrium_powers(
    game: &Game,
    assignment: &CarrierAssignment,
    channel: &ChannelRealization,
) -> Result<PowerProfile> {
    check_shape(game, assignment, channel)?;
    let cfg = game.config();
    let cap = cfg.power_cap();
    let profile = if game.receiver() == ReceiverKind::MatchedFilter {
        let mut profile = PowerProfile::zeros(cfg.num_users, cfg.num_carriers);
        for k in 0..cfg.num_users {
            let l = assignment.carrier_of(k);
            let theta_n = theta(assignment.occupancy(l), game.gamma_star(), cfg.processing_gain)?;
            profile.set(
                k,
                l,
                game.gamma_star() * cfg.noise_power * theta_n / channel.gain(k, l),
            );
        }
        profile
    } else {
        let groups: Vec<Vec<usize>> = (0..cfg.num_carriers).map(|l| assignment.users_on(l)).collect();
        game.balance_powers(channel, &groups)?
    };
    for k in 0..cfg.num_users {
        let p = profile.get(k, assignment.carrier_of(k));
        let at_target = game
            .sinr(&profile, channel, k, assignment.carrier_of(k))
            .map(|g| (g / game.gamma_star() - 1.0).abs() < 1e-6)
            .unwrap_or(false);
        if p > cap || (p == cap && !at_target) {
            return Err(Error::PowerLimit { user: k, power: p });
        }
    }
    Ok(profile)
}

/// Every equilibrium assignment, found by scanning all `D^K` candidates.
pub fn enumerate_equilibria(
    game: &Game,
    channel: &ChannelRealization,
    cap: u128,
) -> Result<Vec<CarrierAssignment>> {
    let cfg = game.config();
    let candidates = (cfg.num_carriers as u128)
        .checked_pow(cfg.num_users as u32)
        .unwrap_or(u128::MAX);
    if candidates > cap {
        return Err(Error::EnumerationCap { candidates, cap });
    }
    let mut found = Vec::new();
    for assignment in CarrierAssignment::all(cfg.num_users, cfg.num_carriers) {
        if check_equilibrium(game, &assignment, channel)?.holds() {
            found.push(assignment);
        }
    }
    Ok(found)
}

/// The four candidate equilibria of the two-user two-carrier game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region2x2 {
    /// Both users on carrier 1.
    BothFirst,
    /// Both users on carrier 2.
    BothSecond,
    /// User 1 on carrier 1, user 2 on carrier 2.
    FirstSecond,
    /// User 1 on carrier 2, user 2 on carrier 1.
    SecondFirst,
}

impl Region2x2 {
    pub fn label(self) -> &'static str {
        match self {
            Region2x2::BothFirst => "(12,.)",
            Region2x2::BothSecond => "(.,12)",
            Region2x2::FirstSecond => "(1,2)",
            Region2x2::SecondFirst => "(2,1)",
        }
    }

    /// Carriers (0-based) of users 1 and 2.
    pub fn carriers(self) -> [usize; 2] {
        match self {
            Region2x2::BothFirst => [0, 0],
            Region2x2::BothSecond => [1, 1],
            Region2x2::FirstSecond => [0, 1],
            Region2x2::SecondFirst => [1, 0],
        }
    }
}

impl fmt::Display for Region2x2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Equilibria present for gain ratios `h11/h12` and `h21/h22` (strict inequalities).
pub fn classify_2x2(ratio1: f64, ratio2: f64, gamma_star: f64, processing_gain: usize) -> Vec<Region2x2> {
    let theta_0 = theta(0, gamma_star, processing_gain).expect("Theta_0 is always defined");
    let mut regions = Vec::new();
    if let Ok(theta_2) = theta(2, gamma_star, processing_gain) {
        if ratio1 > theta_2 && ratio2 > theta_2 {
            regions.push(Region2x2::BothFirst);
        }
        if ratio1 < 1.0 / theta_2 && ratio2 < 1.0 / theta_2 {
            regions.push(Region2x2::BothSecond);
        }
    }
    if ratio1 > theta_0 && ratio2 < 1.0 / theta_0 {
        regions.push(Region2x2::FirstSecond);
    }
    if ratio1 < 1.0 / theta_0 && ratio2 > theta_0 {
        regions.push(Region2x2::SecondFirst);
    }
    regions
}

/// Probabilities of 0, 1 or 2 users on carrier 1 at equilibrium, and of no
/// equilibrium, for two users on two i.i.d. exponential carriers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPmf2x2 {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_no_eq: f64,
}

impl AnalyticPmf2x2 {
    pub fn get(&self, m: usize) -> f64 {
        match m {
            0 => self.p0,
            1 => self.p1,
            2 => self.p2,
            _ => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.p0 + self.p1 + self.p2 + self.p_no_eq
    }
}

pub fn analytic_pmf_2x2(gamma_star: f64, processing_gain: usize) -> AnalyticPmf2x2 {
    let theta_0 = theta(0, gamma_star, processing_gain).expect("Theta_0 is always defined");
    let split = 2.0 / (1.0 + theta_0).powi(2) - ((1.0 - theta_0) / (1.0 + theta_0)).powi(2);
    let crowded = (theta_0 / (1.0 + theta_0)).powi(2);
    if (processing_gain as f64) > gamma_star {
        let theta_2 = theta(2, gamma_star, processing_gain).expect("N > gamma* keeps Theta_2 finite");
        let same = (1.0 / (1.0 + theta_2)).powi(2);
        AnalyticPmf2x2 {
            p0: same,
            p1: split,
            p2: same,
            p_no_eq: 2.0 * (crowded - same),
        }
    } else {
        AnalyticPmf2x2 {
            p0: 0.0,
            p1: split,
            p2: 0.0,
            p_no_eq: 2.0 * crowded,
        }
    }
}

/// `C(K, m) / 2^K`, the large-processing-gain law of the carrier-1 occupancy.
pub fn binomial_limit_pmf(num_users: usize, m: usize) -> f64 {
    if m > num_users {
        return 0.0;
    }
    let m = m.min(num_users - m);
    let mut coeff = 1.0f64;
    for i in 0..m {
        coeff = coeff * (num_users - i) as f64 / (i + 1) as f64;
    }
    coeff * 0.5f64.powi(num_users as i32)
}

/// `b = d^nu sigma^2 gamma* / (c P_max)`: with `b` small, the probability that a
/// user cannot reach `gamma*` alone on a carrier is `1 - e^-b ~ b`.
pub fn power_limited_parameter(
    distance: f64,
    path_loss_exponent: f64,
    path_loss_c: f64,
    noise_power: f64,
    gamma_star: f64,
    max_power: f64,
) -> f64 {
    distance.powf(path_loss_exponent) * noise_power * gamma_star / (path_loss_c * max_power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemConfig;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn game(k: usize, d: usize, n: usize, receiver: ReceiverKind) -> Game {
        Game::new(SystemConfig {
            num_users: k,
            num_carriers: d,
            processing_gain: n,
            receiver,
            ..SystemConfig::default()
        })
        .unwrap()
    }

    fn ortho(rows: usize, cols: usize, gains: &[f64]) -> ChannelRealization {
        ChannelRealization::with_orthogonal_signatures(DMatrix::from_row_slice(rows, cols, gains)).unwrap()
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(1, 6.4, 16).unwrap(), 1.0);
        assert_eq!(theta(1, 123.0, 3).unwrap(), 1.0);
        assert!((theta(0, 6.4, 16).unwrap() - 0.714_285_714_285_714_3).abs() < 1e-15);
        assert!((theta(2, 6.4, 16).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        // (n - 1) gamma* = N is the pole
        assert!(matches!(
            theta(2, 16.0, 16),
            Err(Error::InfeasibleOccupancy { users: 2, .. })
        ));
        assert!(theta(3, 16.0, 16).is_err());
    }

    #[test]
    fn theta_table_truncates_at_pole() {
        let t = ThetaTable::new(10, 6.4, 16);
        // (n-1) 0.4 < 1  =>  n <= 3
        assert_eq!(t.max_occupancy(), 3);
        assert!(t.get(4).is_err());
        assert_eq!(t.get(1).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn theta_ordering_and_identity(gs in 0.1f64..20.0, n in 1usize..2048, k in 1usize..40) {
            let table = ThetaTable::new(k, gs, n);
            let values = table.values();
            prop_assert!(values[0] > 0.0);
            prop_assert!(values.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(values[1], 1.0);
            for (m, &t) in values.iter().enumerate() {
                let lhs = 1.0 + (m as f64 - 1.0) * gs / n as f64 * t;
                prop_assert!((lhs - t).abs() <= 1e-12 * t);
            }
            if (n as f64) > (k as f64 - 1.0) * gs {
                prop_assert_eq!(table.max_occupancy(), k);
            }
        }

        #[test]
        fn analytic_pmf_sums_to_one(gs in 0.1f64..20.0, n in 1usize..4096) {
            let pmf = analytic_pmf_2x2(gs, n);
            prop_assert!((pmf.total() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(pmf.p0, pmf.p2);
            for p in [pmf.p0, pmf.p1, pmf.p2, pmf.p_no_eq] {
                prop_assert!((-1e-15..=1.0).contains(&p));
            }
        }

        #[test]
        fn classify_agrees_with_enumeration(r1 in -3.0f64..3.0, r2 in -3.0f64..3.0, n in 4usize..128) {
            let g = game(2, 2, n, ReceiverKind::MatchedFilter);
            let (r1, r2) = (r1.exp(), r2.exp());
            let ch = ortho(2, 2, &[r1, 1.0, 1.0, 1.0 / r2]);
            let enumerated: Vec<[usize; 2]> = enumerate_equilibria(&g, &ch, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .iter()
                .map(|a| [a.carrier_of(0), a.carrier_of(1)])
                .collect();
            let mut classified: Vec<[usize; 2]> = classify_2x2(r1, r2, g.gamma_star(), n)
                .into_iter()
                .map(Region2x2::carriers)
                .collect();
            classified.sort();
            prop_assert_eq!(enumerated, classified);
        }

        #[test]
        fn closed_form_matches_fixed_point(seed in any::<u64>(), n in 8usize..256) {
            use rand::SeedableRng;
            let g = game(3, 3, n, ReceiverKind::MatchedFilter);
            let ch = crate::model::sample_channel(g.config(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            for a in CarrierAssignment::all(3, 3) {
                let closed = check_equilibrium(&g, &a, &ch).unwrap();
                let generic = check_fixed_point(&g, &a, &ch).unwrap();
                prop_assert_eq!(closed.holds(), generic.holds(), "{}", a);
            }
        }
    }

    #[test]
    fn classify_examples() {
        let (gs, n) = (6.4, 16);
        assert_eq!(classify_2x2(2.0, 2.0, gs, n), vec![Region2x2::BothFirst]);
        assert_eq!(
            classify_2x2(1.0, 1.0, gs, n),
            vec![Region2x2::FirstSecond, Region2x2::SecondFirst]
        );
        // equal ratios c with c^2 inside [1/Theta_2^2, Theta_0^2]
        for c in [0.6, 0.65, 0.7, 1.0 / 0.7, 1.5, 1.66] {
            assert!(classify_2x2(c, c, gs, n).is_empty(), "c = {c}");
        }
    }

    #[test]
    fn two_by_two_bullets_through_the_general_check() {
        let g = game(2, 2, 16, ReceiverKind::MatchedFilter);
        let t2 = theta(2, g.gamma_star(), 16).unwrap();
        let both_first = CarrierAssignment::new(vec![0, 0], 2).unwrap();
        let ch = ortho(2, 2, &[t2 * 1.01, 1.0, t2 * 1.01, 1.0]);
        assert!(check_equilibrium(&g, &both_first, &ch).unwrap().holds());
        let ch = ortho(2, 2, &[t2 * 0.99, 1.0, t2 * 1.01, 1.0]);
        assert!(!check_equilibrium(&g, &both_first, &ch).unwrap().holds());
    }

    #[test]
    fn infeasible_occupancy_is_reported() {
        let g = game(3, 2, 8, ReceiverKind::MatchedFilter);
        let ch = ortho(3, 2, &[1.0; 6]);
        let crowded = CarrierAssignment::new(vec![0, 0, 0], 2).unwrap();
        assert!(matches!(
            check_equilibrium(&g, &crowded, &ch).unwrap(),
            Verdict::Infeasible(Error::InfeasibleOccupancy { users: 3, .. })
        ));
        assert!(equilibrium_powers(&g, &crowded, &ch).is_err());
    }

    #[test]
    fn decorrelator_best_carriers_are_equilibrium() {
        let g = game(3, 2, 4, ReceiverKind::Decorrelator);
        let s = 0.5;
        // three non-orthogonal but independent signatures of length 4
        let sigs = DMatrix::from_column_slice(4, 3, &[s, s, s, s, s, -s, s, -s, s, s, -s, -s]);
        let gains = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 0.5, 1.5, 3.0, 0.1]);
        let ch = ChannelRealization::new(gains, sigs).unwrap();
        let best = CarrierAssignment::new(vec![0, 1, 0], 2).unwrap();
        assert!(check_equilibrium(&g, &best, &ch).unwrap().holds());
        let found = enumerate_equilibria(&g, &ch, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(found, vec![best]);
    }

    #[test]
    fn equilibrium_powers_examples() {
        let g = game(2, 2, 16, ReceiverKind::MatchedFilter);
        let gs = g.gamma_star();
        let ch = ortho(2, 2, &[1e-9, 2e-9, 1e-9, 5e-10]);
        let alone = CarrierAssignment::new(vec![1, 0], 2).unwrap();
        let p = equilibrium_powers(&g, &alone, &ch).unwrap();
        assert!((p.get(0, 1) - gs * 5e-16 / 2e-9).abs() < 1e-21);
        assert_eq!(p.get(0, 0), 0.0);

        let shared = CarrierAssignment::new(vec![0, 0], 2).unwrap();
        let p = equilibrium_powers(&g, &shared, &ch).unwrap();
        let t2 = 1.0 / (1.0 - gs / 16.0);
        assert!((p.get(0, 0) / (gs * 5e-16 * t2 / 1e-9) - 1.0).abs() < 1e-12);
        // with the rounded gamma* = 6.4 the same formula gives 5.333e-6 W
        assert!((6.4f64 * 5e-16 * (5.0 / 3.0) / 1e-9 - 5.333e-6).abs() < 1e-9);
        for k in 0..2 {
            let sinr = g.sinr(&p, &ch, k, 0).unwrap();
            assert!((sinr / gs - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn equilibrium_powers_other_receivers_hit_target() {
        use rand::SeedableRng;
        for kind in [ReceiverKind::Decorrelator, ReceiverKind::Mmse] {
            let g = game(3, 2, 32, kind);
            let ch = crate::model::sample_channel(g.config(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(5));
            let a = CarrierAssignment::new(vec![0, 0, 1], 2).unwrap();
            let p = equilibrium_powers(&g, &a, &ch).unwrap();
            for k in 0..3 {
                let sinr = g.sinr(&p, &ch, k, a.carrier_of(k)).unwrap();
                assert!((sinr / g.gamma_star() - 1.0).abs() < 1e-9, "{kind}");
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let g = game(8, 8, 64, ReceiverKind::MatchedFilter);
        let ch = ortho(8, 8, &[1.0; 64]);
        assert!(matches!(
            enumerate_equilibria(&g, &ch, DEFAULT_ENUMERATION_CAP),
            Err(Error::EnumerationCap {
                candidates: 16_777_216,
                ..
            })
        ));
    }

    #[test]
    fn enumeration_regions() {
        let g = game(2, 2, 16, ReceiverKind::MatchedFilter);
        let ch = ortho(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let found: Vec<String> = enumerate_equilibria(&g, &ch, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(found, ["(1,2)", "(2,1)"]);

        let t0 = theta(0, g.gamma_star(), 16).unwrap();
        let c = t0 * 0.95;
        let ch = ortho(2, 2, &[c, 1.0, 1.0, 1.0 / c]);
        assert!(enumerate_equilibria(&g, &ch, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .is_empty());

        let big = game(2, 2, 1 << 20, ReceiverKind::MatchedFilter);
        let ch = ortho(2, 2, &[1.3, 0.4, 0.9, 0.2]);
        assert_eq!(
            enumerate_equilibria(&big, &ch, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn analytic_examples() {
        let pmf = analytic_pmf_2x2(6.4, 16);
        assert!((pmf.p_no_eq - 0.0660).abs() < 5e-4, "{}", pmf.p_no_eq);
        assert!((1.0 - pmf.p_no_eq - 0.93).abs() < 0.01);
        let small = analytic_pmf_2x2(6.4, 4);
        assert_eq!((small.p0, small.p2), (0.0, 0.0));
        assert!((small.total() - 1.0).abs() < 1e-12);
        let huge = analytic_pmf_2x2(6.4, 1 << 30);
        assert!((huge.p0 - 0.25).abs() < 1e-6 && (huge.p1 - 0.5).abs() < 1e-6);
    }

    /// Quadrature oracle: ratios of two unit exponentials have CDF x / (1 + x),
    /// so `r = u / (1 - u)` with `u` uniform. Integrate the region indicators on a grid.
    #[test]
    fn analytic_pmf_matches_quadrature() {
        for (gs, n) in [(6.474_6, 16usize), (6.474_6, 8), (6.474_6, 64), (6.474_6, 4)] {
            let t0 = 1.0 / (1.0 + gs / n as f64);
            let t2 = 1.0 / (1.0 - gs / n as f64);
            let grid = 1500;
            let (mut two, mut one, mut none) = (0u64, 0u64, 0u64);
            for i in 0..grid {
                let u = (i as f64 + 0.5) / grid as f64;
                let r1 = u / (1.0 - u);
                for j in 0..grid {
                    let v = (j as f64 + 0.5) / grid as f64;
                    let r2 = v / (1.0 - v);
                    let shared_ok = (n as f64) > gs;
                    let both1 = shared_ok && r1 > t2 && r2 > t2;
                    let both2 = shared_ok && r1 < 1.0 / t2 && r2 < 1.0 / t2;
                    let split = (r1 > t0 && r2 < 1.0 / t0) || (r1 < 1.0 / t0 && r2 > t0);
                    if both1 {
                        two += 1;
                    }
                    if split {
                        one += 1;
                    }
                    if !(both1 || both2 || split) {
                        none += 1;
                    }
                }
            }
            let cells = (grid * grid) as f64;
            let pmf = analytic_pmf_2x2(gs, n);
            assert!((two as f64 / cells - pmf.p2).abs() < 2e-3, "N={n}");
            assert!((one as f64 / cells - pmf.p1).abs() < 2e-3, "N={n}");
            assert!((none as f64 / cells - pmf.p_no_eq).abs() < 2e-3, "N={n}");
        }
    }

    #[test]
    fn binomial_limit() {
        assert_eq!(binomial_limit_pmf(2, 0), 0.25);
        assert_eq!(binomial_limit_pmf(2, 1), 0.5);
        assert_eq!(binomial_limit_pmf(2, 2), 0.25);
        assert_eq!(binomial_limit_pmf(2, 3), 0.0);
        for k in [1usize, 5, 10, 30] {
            let total: f64 = (0..=k).map(|m| binomial_limit_pmf(k, m)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            for m in 0..=k {
                assert_eq!(binomial_limit_pmf(k, m), binomial_limit_pmf(k, k - m));
            }
        }
    }

    #[test]
    fn power_limited_parameter_example() {
        let b = power_limited_parameter(100.0, 4.0, 0.1, 1e-16, 6.4, 1.0);
        assert!((b - 6.4e-7).abs() < 1e-20);
    }
}
