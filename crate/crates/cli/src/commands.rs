use mcpc::equilibrium::{classify_2x2, DEFAULT_ENUMERATION_CAP};
use mcpc::montecarlo::{
    run_trials, summarize, trial_rng, CarrierScaling, ExperimentKind, ExperimentSpec, Report,
};
use mcpc::{
    analytic_pmf_2x2, binomial_limit_pmf, enumerate_equilibria, equilibrium_powers, sample_channel,
    solve_gamma_star, BmpOptions, BmpStatus, Game, ReceiverKind, SystemConfig,
};

use crate::report::{Cell, RunManifest, Table};
use crate::{config, CliError, Command, Common};

pub type Output = (Common, RunManifest, Table);

fn resolve(
    common: &Common,
    preset: SystemConfig,
    overrides: impl FnOnce(&mut SystemConfig),
) -> Result<SystemConfig, CliError> {
    let mut cfg = config::load(preset, common.config.as_deref())?;
    if let Some(r) = common.receiver {
        cfg.receiver = r;
    }
    if let Some(m) = common.m {
        cfg.packet_total_bits = m;
        cfg.packet_info_bits = cfg.packet_info_bits.min(m);
    }
    overrides(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn run(command: Command, threads: Option<usize>) -> Result<Output, CliError> {
    match command {
        Command::GammaStar { common } => gamma_star(common),
        Command::Equilibria { common, k, d, n } => equilibria(common, k, d, n),
        Command::Bmp { common, k, d, n } => bmp(common, k, d, n),
        Command::Regions {
            common,
            n,
            ratio_min,
            ratio_max,
            points,
        } => regions(common, n, ratio_min, ratio_max, points),
        Command::AnalyticPmf { common, n } => analytic_pmf(common, n),
        Command::McProbVsN { common, trials, n } => {
            let cfg = resolve(&common, SystemConfig::default(), |_| {})?;
            if cfg.num_users != 2 || cfg.num_carriers != 2 {
                return Err(CliError::Usage(
                    "mc-prob-vs-n needs num_users = 2 and num_carriers = 2; use mc-pmf for other sizes"
                        .into(),
                ));
            }
            let spec = experiment(ExperimentKind::ProbVsN, n, trials.trials, cfg, common.seed);
            let report = run_trials(&spec, threads)?;
            Ok(finish(common, "mc-prob-vs-n", spec, prob_vs_n_table(&report)))
        }
        Command::McPmf {
            common,
            trials,
            k,
            d,
            n,
        } => {
            let cfg = resolve(&common, ten_users(), |c| {
                set(&mut c.num_users, k);
                set(&mut c.num_carriers, d);
            })?;
            let spec = experiment(ExperimentKind::PmfX1, n, trials.trials, cfg, common.seed);
            let report = run_trials(&spec, threads)?;
            Ok(finish(common, "mc-pmf", spec, pmf_table(&report)))
        }
        Command::McStddev {
            common,
            trials,
            k,
            d,
            n,
        } => {
            let cfg = resolve(&common, ten_users(), |c| {
                set(&mut c.num_users, k);
                set(&mut c.num_carriers, d);
            })?;
            let spec = experiment(ExperimentKind::StdDevX1, n, trials.trials, cfg, common.seed);
            let report = run_trials(&spec, threads)?;
            Ok(finish(common, "mc-stddev", spec, stddev_table(&report)))
        }
        Command::McUtilityVsD {
            common,
            trials,
            k,
            d,
            n,
            load,
        } => {
            let preset = SystemConfig {
                num_users: 30,
                ..SystemConfig::default()
            };
            let (scaling, cfg) = match load {
                Some(users_per_carrier) => {
                    let cfg = resolve(
                        &common,
                        SystemConfig {
                            processing_gain: 64,
                            ..preset
                        },
                        |c| set(&mut c.processing_gain, n),
                    )?;
                    (CarrierScaling::FixedLoad { users_per_carrier }, cfg)
                }
                None => {
                    let cfg = resolve(&common, preset, |c| set(&mut c.num_users, k))?;
                    let total_processing_gain = n.unwrap_or(256);
                    (
                        CarrierScaling::FixedBandwidth {
                            total_processing_gain,
                        },
                        cfg,
                    )
                }
            };
            let spec = experiment(
                ExperimentKind::UtilityVsD { scaling },
                d,
                trials.trials,
                cfg,
                common.seed,
            );
            let report = run_trials(&spec, threads)?;
            Ok(finish(common, "mc-utility-vs-d", spec, utility_table(&report)))
        }
        Command::McCompare {
            common,
            trials,
            k,
            d,
            n,
        } => {
            let preset = SystemConfig {
                processing_gain: 128,
                ..SystemConfig::default()
            };
            let cfg = resolve(&common, preset, |c| {
                set(&mut c.num_carriers, d);
                set(&mut c.processing_gain, n);
            })?;
            let spec = experiment(
                ExperimentKind::JointVsIndependent,
                k,
                trials.trials,
                cfg,
                common.seed,
            );
            let report = run_trials(&spec, threads)?;
            Ok(finish(common, "mc-compare", spec, compare_table(&report)))
        }
    }
}

fn ten_users() -> SystemConfig {
    SystemConfig {
        num_users: 10,
        ..SystemConfig::default()
    }
}

fn experiment(
    kind: ExperimentKind,
    sweep: Vec<usize>,
    trials: u64,
    base: SystemConfig,
    seed: u64,
) -> ExperimentSpec {
    ExperimentSpec {
        kind,
        sweep,
        trials,
        base,
        seed,
    }
}

fn finish(common: Common, command: &'static str, spec: ExperimentSpec, table: Table) -> Output {
    let mut manifest = RunManifest::new(command, spec.base.clone(), spec.seed);
    manifest.experiment = Some(spec);
    (common, manifest, table)
}

fn gamma_star(common: Common) -> Result<Output, CliError> {
    let cfg = resolve(&common, SystemConfig::default(), |_| {})?;
    let gs = solve_gamma_star(cfg.packet_total_bits)?;
    let mut table = Table::new(&["M", "gamma_star", "gamma_star_db"]);
    table.push(vec![
        u64::from(cfg.packet_total_bits).into(),
        gs.into(),
        db(gs).into(),
    ]);
    let manifest = RunManifest::new("gamma-star", cfg, common.seed);
    Ok((common, manifest, table))
}

fn single_game(
    common: &Common,
    k: Option<usize>,
    d: Option<usize>,
    n: Option<usize>,
) -> Result<(SystemConfig, Game, mcpc::ChannelRealization), CliError> {
    let cfg = resolve(common, SystemConfig::default(), |c| {
        set(&mut c.num_users, k);
        set(&mut c.num_carriers, d);
        set(&mut c.processing_gain, n);
    })?;
    let game = Game::new(cfg.clone())?;
    let channel = sample_channel(&cfg, &mut trial_rng(common.seed, 0, 0));
    Ok((cfg, game, channel))
}

fn equilibria(
    common: Common,
    k: Option<usize>,
    d: Option<usize>,
    n: Option<usize>,
) -> Result<Output, CliError> {
    let (cfg, game, channel) = single_game(&common, k, d, n)?;
    let mut table = Table::new(&[
        "equilibrium",
        "assignment",
        "user",
        "carrier",
        "gain",
        "power",
        "sinr",
        "utility",
    ]);
    for (e, assignment) in enumerate_equilibria(&game, &channel, DEFAULT_ENUMERATION_CAP)?
        .iter()
        .enumerate()
    {
        let profile = equilibrium_powers(&game, assignment, &channel)?;
        for user in 0..cfg.num_users {
            let carrier = assignment.carrier_of(user);
            table.push(vec![
                (e + 1).into(),
                assignment.to_string().into(),
                (user + 1).into(),
                (carrier + 1).into(),
                channel.gain(user, carrier).into(),
                profile.get(user, carrier).into(),
                game.sinr(&profile, &channel, user, carrier)?.into(),
                game.multicarrier_utility(user, &profile, &channel)?.into(),
            ]);
        }
    }
    let manifest = RunManifest::new("equilibria", cfg, common.seed);
    Ok((common, manifest, table))
}

fn bmp(common: Common, k: Option<usize>, d: Option<usize>, n: Option<usize>) -> Result<Output, CliError> {
    let (cfg, game, channel) = single_game(&common, k, d, n)?;
    let outcome = game.bmp_run(&channel, &BmpOptions::default())?;
    let status = match outcome.status {
        BmpStatus::Converged => "converged",
        BmpStatus::NoConvergence => "no-convergence",
    };
    let mut table = Table::new(&[
        "user",
        "carrier",
        "power",
        "sinr",
        "utility",
        "capped",
        "status",
        "iterations",
    ]);
    for user in 0..cfg.num_users {
        let carrier = outcome.assignment.carrier_of(user);
        let power = outcome.final_profile.get(user, carrier);
        table.push(vec![
            (user + 1).into(),
            (carrier + 1).into(),
            power.into(),
            game.sinr(&outcome.final_profile, &channel, user, carrier)?.into(),
            game.multicarrier_utility(user, &outcome.final_profile, &channel)?
                .into(),
            u64::from(outcome.capped_users.contains(&user)).into(),
            status.into(),
            outcome.iterations_used.into(),
        ]);
    }
    let manifest = RunManifest::new("bmp", cfg, common.seed);
    Ok((common, manifest, table))
}

fn regions(common: Common, n: Option<usize>, lo: f64, hi: f64, points: usize) -> Result<Output, CliError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || points < 2 {
        return Err(CliError::Usage(
            "regions needs 0 < --ratio-min < --ratio-max and --points >= 2".into(),
        ));
    }
    let cfg = resolve(&common, SystemConfig::default(), |c| {
        set(&mut c.processing_gain, n)
    })?;
    let gs = solve_gamma_star(cfg.packet_total_bits)?;
    let grid: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    let mut table = Table::new(&["ratio1", "ratio2", "equilibria"]);
    for &r1 in &grid {
        for &r2 in &grid {
            let found = classify_2x2(r1, r2, gs, cfg.processing_gain);
            let labels = if found.is_empty() {
                "none".to_owned()
            } else {
                found.iter().map(|r| r.label()).collect::<Vec<_>>().join(" ")
            };
            table.push(vec![r1.into(), r2.into(), labels.into()]);
        }
    }
    let manifest = RunManifest::new("regions", cfg, common.seed);
    Ok((common, manifest, table))
}

fn analytic_pmf(common: Common, n: Vec<usize>) -> Result<Output, CliError> {
    let cfg = resolve(&common, SystemConfig::default(), |_| {})?;
    if n.contains(&0) {
        return Err(CliError::Usage("--N values must be positive".into()));
    }
    let gs = solve_gamma_star(cfg.packet_total_bits)?;
    let mut table = Table::new(&["N", "gamma_star", "p0", "p1", "p2", "p_no_eq"]);
    for value in n {
        let pmf = analytic_pmf_2x2(gs, value);
        table.push(vec![
            value.into(),
            gs.into(),
            pmf.p0.into(),
            pmf.p1.into(),
            pmf.p2.into(),
            pmf.p_no_eq.into(),
        ]);
    }
    let manifest = RunManifest::new("analytic-pmf", cfg, common.seed);
    Ok((common, manifest, table))
}

fn prob_vs_n_table(report: &Report) -> Table {
    let mut table = Table::new(&[
        "N",
        "p0",
        "p1",
        "p2",
        "p_no_eq",
        "ci_halfwidth",
        "analytic_p0",
        "analytic_p1",
        "analytic_p2",
        "analytic_p_no_eq",
    ]);
    for p in &report.points {
        let pmf = &p.pmf;
        let ci = pmf
            .half_widths()
            .into_iter()
            .fold(pmf.no_equilibrium_half_width(), f64::max);
        let analytic = (p.config.receiver == ReceiverKind::MatchedFilter)
            .then(|| analytic_pmf_2x2(p.gamma_star, p.value));
        table.push(vec![
            p.value.into(),
            pmf.frequency(0).into(),
            pmf.frequency(1).into(),
            pmf.frequency(2).into(),
            pmf.no_equilibrium_frequency().into(),
            ci.into(),
            analytic.map(|a| a.p0).into(),
            analytic.map(|a| a.p1).into(),
            analytic.map(|a| a.p2).into(),
            analytic.map(|a| a.p_no_eq).into(),
        ]);
    }
    table
}

fn pmf_table(report: &Report) -> Table {
    let mut table = Table::new(&[
        "N",
        "outcome",
        "count",
        "frequency",
        "ci_halfwidth",
        "binomial_limit",
    ]);
    for p in &report.points {
        let two_carriers = p.config.num_carriers == 2;
        for (m, &count) in p.pmf.counts.iter().enumerate() {
            table.push(vec![
                p.value.into(),
                m.to_string().into(),
                count.into(),
                p.pmf.frequency(m).into(),
                p.pmf.half_width(m).into(),
                two_carriers
                    .then(|| binomial_limit_pmf(p.config.num_users, m))
                    .into(),
            ]);
        }
        table.push(vec![
            p.value.into(),
            "none".into(),
            p.pmf.no_equilibrium.into(),
            p.pmf.no_equilibrium_frequency().into(),
            p.pmf.no_equilibrium_half_width().into(),
            Cell::Empty,
        ]);
    }
    table
}

fn stddev_table(report: &Report) -> Table {
    let mut table = Table::new(&["N", "trials", "converged", "std_dev"]);
    for s in summarize(report) {
        let sd: Cell = s.std_dev.map_or_else(|| "undefined".into(), Cell::from);
        table.push(vec![
            s.value.into(),
            report.spec.trials.into(),
            s.converged.into(),
            sd,
        ]);
    }
    table
}

fn utility_table(report: &Report) -> Table {
    let mut table = Table::new(&["D", "K", "N", "max_iter", "mean_utility", "std_error", "p_no_eq"]);
    for p in &report.points {
        table.push(vec![
            p.value.into(),
            p.config.num_users.into(),
            p.config.processing_gain.into(),
            p.config.bmp_max_iter.into(),
            p.utility.map(|u| u.mean).into(),
            p.utility.map(|u| u.std_error).into(),
            p.pmf.no_equilibrium_frequency().into(),
        ]);
    }
    table
}

fn compare_table(report: &Report) -> Table {
    let mut table = Table::new(&[
        "K",
        "joint_mean",
        "joint_std_error",
        "independent_mean",
        "independent_std_error",
        "ratio",
        "independent_samples",
    ]);
    for (p, s) in report.points.iter().zip(summarize(report)) {
        table.push(vec![
            p.value.into(),
            p.utility.map(|u| u.mean).into(),
            p.utility.map(|u| u.std_error).into(),
            p.benchmark.map(|u| u.mean).into(),
            p.benchmark.map(|u| u.std_error).into(),
            s.utility_ratio.into(),
            p.benchmark.map_or(0, |u| u.samples).into(),
        ]);
    }
    table
}
