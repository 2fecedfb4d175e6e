//! Seeded Monte Carlo experiments over random channels.
//!
//! Every trial owns a ChaCha8 stream keyed by `(seed, sweep index)` with the
//! trial index as stream id, so a report depends only on the experiment and never on
//! the thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BmpOptions, Game};
use crate::model::{sample_channel, SystemConfig};

pub const DEFAULT_TRIALS: u64 = 20_000;

/// How the system grows with the carrier count in a utility-vs-D sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CarrierScaling {
    /// Fixed bandwidth: `N = total_processing_gain / D`, users fixed.
    FixedBandwidth { total_processing_gain: usize },
    /// `K = users_per_carrier * D` at fixed `N`, with `10 D` BMP rounds.
    FixedLoad { users_per_carrier: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentKind {
    /// Sweep `N`: carrier-1 occupancy frequencies and no-equilibrium rate.
    ProbVsN,
    /// Sweep `N`: the full pseudo-PMF of the carrier-1 occupancy.
    PmfX1,
    /// Sweep `N`: standard deviation of the carrier-1 occupancy.
    StdDevX1,
    /// Sweep `D`: mean total utility after the last BMP round.
    UtilityVsD { scaling: CarrierScaling },
    /// Sweep `K`: joint game against independent per-carrier maximisation.
    JointVsIndependent,
}

impl ExperimentKind {
    /// Name of the swept parameter.
    pub fn sweep_name(&self) -> &'static str {
        match self {
            ExperimentKind::ProbVsN | ExperimentKind::PmfX1 | ExperimentKind::StdDevX1 => "N",
            ExperimentKind::UtilityVsD { .. } => "D",
            ExperimentKind::JointVsIndependent => "K",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub sweep: Vec<usize>,
    pub trials: u64,
    pub base: SystemConfig,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::InvalidConfig("sweep: must list at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials: must be at least 1".into()));
        }
        for &value in &self.sweep {
            self.point_config(value)?.validate()?;
        }
        Ok(())
    }

    /// The system simulated at one sweep value.
    pub fn point_config(&self, value: usize) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        match self.kind {
            ExperimentKind::ProbVsN | ExperimentKind::PmfX1 | ExperimentKind::StdDevX1 => {
                cfg.processing_gain = value;
            }
            ExperimentKind::JointVsIndependent => cfg.num_users = value,
            ExperimentKind::UtilityVsD { scaling } => {
                if value == 0 {
                    return Err(Error::InvalidConfig(
                        "sweep: carrier counts must be positive".into(),
                    ));
                }
                cfg.num_carriers = value;
                match scaling {
                    CarrierScaling::FixedBandwidth {
                        total_processing_gain,
                    } => {
                        if total_processing_gain % value != 0 {
                            return Err(Error::InvalidConfig(format!(
                                "sweep: {value} carriers do not divide total_processing_gain {total_processing_gain}"
                            )));
                        }
                        cfg.processing_gain = total_processing_gain / value;
                    }
                    CarrierScaling::FixedLoad { users_per_carrier } => {
                        cfg.num_users = users_per_carrier * value;
                        cfg.bmp_max_iter = 10 * value;
                    }
                }
            }
        }
        Ok(cfg)
    }
}

/// What one trial ended in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrialOutcome {
    /// BMP converged with every user at `gamma*`.
    Equilibrium { on_first: usize },
    /// BMP did not settle within its round budget.
    NoEquilibrium,
    /// BMP settled but some user sits at the power limit below `gamma*`.
    Capped,
    /// The receiver could not be formed for this channel.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub outcome: TrialOutcome,
    /// Total utility of the final BMP profile.
    pub utility: Option<f64>,
    /// Total utility of the independent per-carrier benchmark.
    pub benchmark: Option<f64>,
}

/// Per-trial generator: key from `(seed, sweep index)`, stream from the trial index.
pub fn trial_rng(seed: u64, sweep_index: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sweep_index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Run one trial of `game` with the given generator.
pub fn run_trial(game: &Game, rng: &mut ChaCha8Rng, with_benchmark: bool) -> TrialRecord {
    let channel = sample_channel(game.config(), rng);
    let benchmark = if with_benchmark {
        game.independent_max_benchmark(&channel)
            .ok()
            .map(|b| b.total_utility)
            .filter(|u| u.is_finite())
    } else {
        None
    };
    match game.bmp_run(&channel, &BmpOptions::default()) {
        Err(_) => TrialRecord {
            outcome: TrialOutcome::Infeasible,
            utility: None,
            benchmark,
        },
        Ok(out) => {
            let outcome = if !out.converged() {
                TrialOutcome::NoEquilibrium
            } else if !out.capped_users.is_empty() {
                TrialOutcome::Capped
            } else {
                TrialOutcome::Equilibrium {
                    on_first: out.assignment.occupancy(0),
                }
            };
            let utility = game
                .total_utility(&out.final_profile, &channel)
                .ok()
                .filter(|u| u.is_finite());
            TrialRecord {
                outcome,
                utility,
                benchmark,
            }
        }
    }
}

/// Outcome counts of the carrier-1 occupancy with 95% binomial half-widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmfEstimate {
    /// `counts[m]`: trials ending with `m` users on carrier 1.
    pub counts: Vec<u64>,
    /// Trials without an equilibrium, including `capped` and `infeasible`.
    pub no_equilibrium: u64,
    pub capped: u64,
    pub infeasible: u64,
    pub trials: u64,
}

impl PmfEstimate {
    pub fn new(num_users: usize) -> Self {
        Self {
            counts: vec![0; num_users + 1],
            no_equilibrium: 0,
            capped: 0,
            infeasible: 0,
            trials: 0,
        }
    }

    pub fn record(&mut self, outcome: TrialOutcome) {
        self.trials += 1;
        match outcome {
            TrialOutcome::Equilibrium { on_first } => self.counts[on_first] += 1,
            TrialOutcome::NoEquilibrium => self.no_equilibrium += 1,
            TrialOutcome::Capped => {
                self.no_equilibrium += 1;
                self.capped += 1;
            }
            TrialOutcome::Infeasible => {
                self.no_equilibrium += 1;
                self.infeasible += 1;
            }
        }
    }

    pub fn from_outcomes(num_users: usize, outcomes: impl IntoIterator<Item = TrialOutcome>) -> Self {
        let mut pmf = Self::new(num_users);
        for o in outcomes {
            pmf.record(o);
        }
        pmf
    }

    pub fn converged(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequency(&self, m: usize) -> f64 {
        self.counts.get(m).map_or(0.0, |&c| ratio(c, self.trials))
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|m| self.frequency(m)).collect()
    }

    pub fn no_equilibrium_frequency(&self) -> f64 {
        ratio(self.no_equilibrium, self.trials)
    }

    pub fn half_width(&self, m: usize) -> f64 {
        binomial_half_width(self.frequency(m), self.trials)
    }

    pub fn half_widths(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|m| self.half_width(m)).collect()
    }

    pub fn no_equilibrium_half_width(&self) -> f64 {
        binomial_half_width(self.no_equilibrium_frequency(), self.trials)
    }

    /// Standard deviation of the occupancy over converged trials.
    pub fn std_dev(&self) -> Option<f64> {
        let weights: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        pmf_std_dev(&weights)
    }
}

fn ratio(count: u64, trials: u64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        count as f64 / trials as f64
    }
}

/// `1.96 sqrt(f (1 - f) / n)`.
pub fn binomial_half_width(frequency: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    1.96 * (frequency * (1.0 - frequency) / trials as f64).sqrt()
}

/// Standard deviation of `m` under weights `w[m]`, normalised by their sum.
/// `None` when every weight is zero.
pub fn pmf_std_dev(weights: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mean = weights.iter().enumerate().map(|(m, w)| m as f64 * w).sum::<f64>() / total;
    let var = weights
        .iter()
        .enumerate()
        .map(|(m, w)| (m as f64 - mean).powi(2) * w)
        .sum::<f64>()
        / total;
    Some(var.sqrt())
}

/// Mean and standard error of the finite samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityStats {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl UtilityStats {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut n, mut sum, mut sum_sq) = (0u64, 0.0, 0.0);
        for x in samples {
            n += 1;
            sum += x;
            sum_sq += x * x;
        }
        if n == 0 {
            return None;
        }
        let mean = sum / n as f64;
        let var = if n > 1 {
            ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Value of the swept parameter.
    pub value: usize,
    pub config: SystemConfig,
    pub gamma_star: f64,
    pub pmf: PmfEstimate,
    pub utility: Option<UtilityStats>,
    pub benchmark: Option<UtilityStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub points: Vec<SweepPoint>,
}

/// Every trial of every sweep point, in order. `threads = None` uses all cores.
pub fn run_records(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<Vec<TrialRecord>>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("threads: {e}")))?;
    let with_benchmark = spec.kind == ExperimentKind::JointVsIndependent;
    spec.sweep
        .iter()
        .enumerate()
        .map(|(idx, &value)| {
            let game = Game::new(spec.point_config(value)?)?;
            Ok(pool.install(|| {
                (0..spec.trials)
                    .into_par_iter()
                    .map(|t| run_trial(&game, &mut trial_rng(spec.seed, idx as u64, t), with_benchmark))
                    .collect()
            }))
        })
        .collect()
}

pub fn run_trials(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Report> {
    let records = run_records(spec, threads)?;
    let points = spec
        .sweep
        .iter()
        .zip(records)
        .map(|(&value, trials)| {
            let config = spec.point_config(value)?;
            let gamma_star = Game::new(config.clone())?.gamma_star();
            Ok(SweepPoint {
                value,
                pmf: PmfEstimate::from_outcomes(config.num_users, trials.iter().map(|r| r.outcome)),
                utility: UtilityStats::from_samples(trials.iter().filter_map(|r| r.utility)),
                benchmark: UtilityStats::from_samples(trials.iter().filter_map(|r| r.benchmark)),
                config,
                gamma_star,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report {
        spec: spec.clone(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub value: usize,
    pub converged: u64,
    /// `None` when no trial converged.
    pub std_dev: Option<f64>,
    /// Mean joint-game utility over the mean benchmark utility.
    pub utility_ratio: Option<f64>,
}

pub fn summarize(report: &Report) -> Vec<SummaryPoint> {
    report
        .points
        .iter()
        .map(|p| SummaryPoint {
            value: p.value,
            converged: p.pmf.converged(),
            std_dev: p.pmf.std_dev(),
            utility_ratio: match (p.utility, p.benchmark) {
                (Some(u), Some(b)) if b.mean > 0.0 => Some(u.mean / b.mean),
                _ => None,
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::binomial_limit_pmf;
    use proptest::prelude::*;
    use rand::RngCore;

    fn spec(kind: ExperimentKind, sweep: Vec<usize>, trials: u64) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            sweep,
            trials,
            base: SystemConfig::default(),
            seed: 7,
        }
    }

    #[test]
    fn std_dev_examples() {
        assert_eq!(pmf_std_dev(&[0.0, 5.0, 0.0]), Some(0.0));
        assert_eq!(pmf_std_dev(&[0.0, 0.0]), None);
        let binom: Vec<f64> = (0..=10).map(|m| binomial_limit_pmf(10, m)).collect();
        assert!((pmf_std_dev(&binom).unwrap() - 10f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_estimate_accounting() {
        let outcomes = [
            TrialOutcome::Equilibrium { on_first: 0 },
            TrialOutcome::Equilibrium { on_first: 1 },
            TrialOutcome::Equilibrium { on_first: 1 },
            TrialOutcome::NoEquilibrium,
            TrialOutcome::Capped,
            TrialOutcome::Infeasible,
        ];
        let pmf = PmfEstimate::from_outcomes(2, outcomes);
        assert_eq!(pmf.counts, vec![1, 2, 0]);
        assert_eq!(
            (pmf.no_equilibrium, pmf.capped, pmf.infeasible, pmf.trials),
            (3, 1, 1, 6)
        );
        assert_eq!(pmf.converged(), 3);
        assert!((pmf.half_width(1) - 1.96 * (1.0f64 / 3.0 * 2.0 / 3.0 / 6.0).sqrt()).abs() < 1e-15);
        assert_eq!(PmfEstimate::new(3).std_dev(), None);
    }

    proptest! {
        #[test]
        fn pmf_counts_are_conserved(codes in proptest::collection::vec(0usize..8, 0..200)) {
            let k = 4;
            let outcomes = codes.iter().map(|&c| match c {
                0..=4 => TrialOutcome::Equilibrium { on_first: c },
                5 => TrialOutcome::NoEquilibrium,
                6 => TrialOutcome::Capped,
                _ => TrialOutcome::Infeasible,
            });
            let pmf = PmfEstimate::from_outcomes(k, outcomes);
            prop_assert_eq!(pmf.converged() + pmf.no_equilibrium, pmf.trials);
            prop_assert_eq!(pmf.trials, codes.len() as u64);
            let total: f64 = pmf.frequencies().iter().sum::<f64>() + pmf.no_equilibrium_frequency();
            if pmf.trials > 0 {
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
            for m in 0..=k {
                let f = pmf.frequency(m);
                prop_assert!((pmf.half_width(m) - 1.96 * (f * (1.0 - f) / pmf.trials.max(1) as f64).sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn trial_streams_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for sweep in 0..4 {
            for trial in 0..256 {
                assert!(seen.insert(trial_rng(11, sweep, trial).next_u64()));
            }
        }
        assert_eq!(trial_rng(11, 2, 5).next_u64(), trial_rng(11, 2, 5).next_u64());
    }

    #[test]
    fn point_configs() {
        let s = spec(
            ExperimentKind::UtilityVsD {
                scaling: CarrierScaling::FixedBandwidth {
                    total_processing_gain: 256,
                },
            },
            vec![1, 2, 4, 8],
            1,
        );
        let c = s.point_config(4).unwrap();
        assert_eq!((c.num_carriers, c.processing_gain, c.bmp_max_iter), (4, 64, 20));
        assert!(s.point_config(3).is_err());

        let s = spec(
            ExperimentKind::UtilityVsD {
                scaling: CarrierScaling::FixedLoad { users_per_carrier: 2 },
            },
            vec![4],
            1,
        );
        let c = s.point_config(4).unwrap();
        assert_eq!((c.num_users, c.num_carriers, c.bmp_max_iter), (8, 4, 40));

        assert!(spec(ExperimentKind::ProbVsN, vec![], 1).validate().is_err());
        assert!(spec(ExperimentKind::ProbVsN, vec![16], 0).validate().is_err());
    }

    #[test]
    fn report_is_independent_of_thread_count() {
        let s = spec(ExperimentKind::JointVsIndependent, vec![2, 3], 300);
        let one = run_trials(&s, Some(1)).unwrap();
        let four = run_trials(&s, Some(4)).unwrap();
        assert_eq!(one, four);
        for p in &one.points {
            assert_eq!(p.pmf.trials, 300);
            assert!(p.benchmark.is_some());
        }
    }

    #[test]
    fn summary_marks_undefined_points() {
        // two users never fit on one carrier at N = 2, and a single carrier forces it
        let mut s = spec(ExperimentKind::StdDevX1, vec![2, 64], 50);
        s.base.num_carriers = 1;
        let report = run_trials(&s, Some(2)).unwrap();
        let summary = summarize(&report);
        assert_eq!(summary[0].converged, 0);
        assert_eq!(summary[0].std_dev, None);
        assert_eq!(summary[1].converged, 50);
        assert_eq!(summary[1].std_dev, Some(0.0));
    }
}
