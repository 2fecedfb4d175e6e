//! System configuration, the efficiency function and channel generation.
//!
//! The efficiency function is the packet success rate approximation
//! `f(g) = (1 - e^-g)^M`. Its energy-efficient operating point `gamma*` is the
//! positive root of `f(g) = g f'(g)`, which for this `f` reduces to
//! `e^g = 1 + M g`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::receivers::ReceiverKind;

/// Bracket and tolerance for the `gamma*` bisection.
/// Two users sharing a carrier at `N = 8` contract by only ~0.65 per round, so
/// 20 rounds reach ~2e-4 relative change; 1e-3 lets them register as settled.
pub const DEFAULT_POWER_TOLERANCE: f64 = 1e-3;

pub const GAMMA_STAR_BRACKET: (f64, f64) = (1e-6, 500.0);
pub const GAMMA_STAR_TOLERANCE: f64 = 1e-9;

/// Reciprocal condition below which a signature bank counts as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// How channel gains scale the unit-mean fading power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelMode {
    /// `h = a^2` with `a^2 ~ Exp(1)`.
    IidExponential,
    /// `h = c / d^exponent * a^2`, one distance per user.
    PathLoss {
        c: f64,
        exponent: f64,
        distances: Vec<f64>,
    },
}

/// All game parameters. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_carriers: usize,
    pub processing_gain: usize,
    /// Watts.
    pub noise_power: f64,
    /// Per-carrier power limit in watts; `None` means unbounded.
    pub max_power: Option<f64>,
    pub packet_info_bits: u32,
    /// Also the exponent of the efficiency function.
    pub packet_total_bits: u32,
    /// Bits per second.
    pub rate: f64,
    pub channel_mode: ChannelMode,
    pub receiver: ReceiverKind,
    pub bmp_max_iter: usize,
    /// Largest relative power change still counted as settled.
    pub power_tolerance: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_users: 2,
            num_carriers: 2,
            processing_gain: 16,
            noise_power: 5e-16,
            max_power: None,
            packet_info_bits: 100,
            packet_total_bits: 100,
            rate: 1e5,
            channel_mode: ChannelMode::IidExponential,
            receiver: ReceiverKind::MatchedFilter,
            bmp_max_iter: 20,
            power_tolerance: DEFAULT_POWER_TOLERANCE,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_users == 0 {
            return bad("num_users must be positive".into());
        }
        if self.num_carriers == 0 {
            return bad("num_carriers must be positive".into());
        }
        if self.processing_gain == 0 {
            return bad("processing_gain must be positive".into());
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad(format!("noise_power must be positive, got {}", self.noise_power));
        }
        if let Some(p) = self.max_power {
            if !(p > 0.0) {
                return bad(format!("max_power must be positive, got {p}"));
            }
        }
        if self.packet_info_bits == 0 || self.packet_total_bits == 0 {
            return bad("packet_info_bits and packet_total_bits must be positive".into());
        }
        if self.packet_info_bits > self.packet_total_bits {
            return bad(format!(
                "packet_info_bits ({}) exceeds packet_total_bits ({})",
                self.packet_info_bits, self.packet_total_bits
            ));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if self.bmp_max_iter == 0 {
            return bad("bmp_max_iter must be positive".into());
        }
        if !(self.power_tolerance > 0.0) {
            return bad(format!(
                "power_tolerance must be positive, got {}",
                self.power_tolerance
            ));
        }
        if let ChannelMode::PathLoss {
            c,
            exponent,
            distances,
        } = &self.channel_mode
        {
            if !(*c > 0.0) || !exponent.is_finite() {
                return bad("channel_mode.c must be positive and exponent finite".into());
            }
            if distances.len() != self.num_users {
                return bad(format!(
                    "channel_mode.distances has {} entries, expected num_users = {}",
                    distances.len(),
                    self.num_users
                ));
            }
            if let Some(d) = distances.iter().find(|d| !(**d > 0.0)) {
                return bad(format!("channel_mode.distances must be positive, got {d}"));
            }
        }
        Ok(())
    }

    /// Power limit as a number, `+inf` when unbounded.
    pub fn power_cap(&self) -> f64 {
        self.max_power.unwrap_or(f64::INFINITY)
    }

    /// Throughput per unit efficiency, `(L/M) R`.
    pub fn goodput_scale(&self) -> f64 {
        f64::from(self.packet_info_bits) / f64::from(self.packet_total_bits) * self.rate
    }
}

/// `f(g) = (1 - e^-g)^M` with its cached energy-efficient SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyModel {
    exponent: u32,
    gamma_star: f64,
}

impl EfficiencyModel {
    pub fn new(exponent: u32) -> Result<Self> {
        let gamma_star = solve_gamma_star(exponent)?;
        Ok(Self { exponent, gamma_star })
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    pub fn value(&self, gamma: f64) -> f64 {
        efficiency(self.exponent, gamma)
    }

    pub fn derivative(&self, gamma: f64) -> f64 {
        efficiency_derivative(self.exponent, gamma)
    }
}

/// `(1 - e^-g)^M`.
pub fn efficiency(exponent: u32, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let success = -(-gamma).exp_m1();
    success.powi(exponent as i32)
}

/// `M e^-g (1 - e^-g)^(M-1)`.
pub fn efficiency_derivative(exponent: u32, gamma: f64) -> f64 {
    if gamma < 0.0 || exponent == 0 {
        return 0.0;
    }
    let success = -(-gamma).exp_m1();
    f64::from(exponent) * (-gamma).exp() * success.powi(exponent as i32 - 1)
}

/// Positive root of `f(g) = g f'(g)` for `f(g) = (1 - e^-g)^M`.
pub fn solve_gamma_star(exponent: u32) -> Result<f64> {
    if exponent < 2 {
        return Err(Error::NoPositiveRoot { exponent });
    }
    let m = f64::from(exponent);
    // e^g - 1 - M g: negative just above 0, positive for large g
    let residual = |g: f64| g.exp_m1() - m * g;
    let (lo, hi) = GAMMA_STAR_BRACKET;
    Ok(bisect(residual, lo, hi, GAMMA_STAR_TOLERANCE))
}

/// Bisection on a bracket where `f(lo)` and `f(hi)` have opposite signs.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    debug_assert!(f_lo * f(hi) <= 0.0, "bisection bracket does not straddle a root");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-user per-carrier gains plus one unit-norm spreading sequence per user.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    gains: DMatrix<f64>,
    signatures: DMatrix<f64>,
    gram: DMatrix<f64>,
    decorrelator: OnceLock<std::result::Result<Vec<f64>, f64>>,
}

impl PartialEq for ChannelRealization {
    fn eq(&self, other: &Self) -> bool {
        self.gains == other.gains && self.signatures == other.signatures
    }
}

impl ChannelRealization {
    /// `gains` is K x D; `signatures` is N x K with unit-norm columns.
    pub fn new(gains: DMatrix<f64>, signatures: DMatrix<f64>) -> Result<Self> {
        if gains.ncols() == 0 || gains.nrows() == 0 {
            return Err(Error::InvalidConfig("empty gain matrix".into()));
        }
        if signatures.ncols() != gains.nrows() {
            return Err(Error::InvalidConfig(format!(
                "{} signatures for {} users",
                signatures.ncols(),
                gains.nrows()
            )));
        }
        if let Some(h) = gains.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "channel gains must be positive, got {h}"
            )));
        }
        for (k, s) in signatures.column_iter().enumerate() {
            if (s.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "signature {k} has norm {}",
                    s.norm()
                )));
            }
        }
        let gram = signatures.transpose() * &signatures;
        Ok(Self {
            gains,
            signatures,
            gram,
            decorrelator: OnceLock::new(),
        })
    }

    /// Gains with mutually orthogonal signatures (unit vectors of length `max(K, 1)`).
    pub fn with_orthogonal_signatures(gains: DMatrix<f64>) -> Result<Self> {
        let k = gains.nrows();
        Self::new(gains, DMatrix::identity(k, k))
    }

    pub fn num_users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_carriers(&self) -> usize {
        self.gains.ncols()
    }

    pub fn gain(&self, user: usize, carrier: usize) -> f64 {
        self.gains[(user, carrier)]
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    pub fn signatures(&self) -> &DMatrix<f64> {
        &self.signatures
    }

    pub fn signature(&self, user: usize) -> DVector<f64> {
        self.signatures.column(user).into_owned()
    }

    /// `S^T S`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Diagonal of `(S^T S)^-1`, or the offending reciprocal condition number.
    pub(crate) fn decorrelator_diagonal(&self) -> Result<&[f64]> {
        let cached = self.decorrelator.get_or_init(|| {
            let rcond = linalg::spd_rcond(&self.gram);
            if !(rcond > RCOND_THRESHOLD) {
                return Err(rcond);
            }
            linalg::spd_inverse(&self.gram)
                .map(|inv| inv.diagonal().iter().copied().collect())
                .ok_or(rcond)
        });
        match cached {
            Ok(diag) => Ok(diag),
            Err(rcond) => Err(Error::DecorrelatorInfeasible { rcond: *rcond }),
        }
    }
}

/// Draw a channel: unit-mean exponential fading (scaled by path loss when
/// configured) and one random binary signature per user shared across carriers.
///
/// When `N >= K` the signature bank is redrawn until it is linearly independent.
pub fn sample_channel<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let (k, d, n) = (config.num_users, config.num_carriers, config.processing_gain);
    let mut gains = DMatrix::zeros(k, d);
    for user in 0..k {
        let scale = match &config.channel_mode {
            ChannelMode::IidExponential => 1.0,
            ChannelMode::PathLoss {
                c,
                exponent,
                distances,
            } => c / distances[user].powf(*exponent),
        };
        for carrier in 0..d {
            let fading: f64 = Exp1.sample(rng);
            // Exp1 can return exactly 0 with negligible probability
            gains[(user, carrier)] = scale * fading.max(f64::MIN_POSITIVE);
        }
    }

    let chip = 1.0 / (n as f64).sqrt();
    let signatures = loop {
        let s = DMatrix::from_fn(n, k, |_, _| if rng.random::<bool>() { chip } else { -chip });
        if n < k || linalg::spd_rcond(&(s.transpose() * &s)) > RCOND_THRESHOLD {
            break s;
        }
    };
    ChannelRealization::new(gains, signatures).expect("sampled channel is valid by construction")
}

/// Path-loss gain `c / d^nu * a^2`.
pub fn path_loss_gain(c: f64, exponent: f64, distance: f64, fading_power: f64) -> f64 {
    c / distance.powf(exponent) * fading_power
}
