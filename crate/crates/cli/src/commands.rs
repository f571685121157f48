use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bellcert::general::{game_params, local_score_bounds};
use bellcert::io::{
    game_to_json, parse_pvalues, read_behavior, read_trials_for, write_trials,
};
use bellcert::lp::select_winlose_inequality;
use bellcert::simulate::sampling_distribution;
use bellcert::{
    adversary, azuma_pvalue, beta_win, bentkus_pvalue, bentkus_pvalue_total, classical_bound,
    fisher_combine, game_params_auto, games, gaussian_approx_pvalue, is_local, mc_tail_estimate,
    mcdiarmid_pvalue, relabel_event_ready, run_lhvm, score_experiment, select_inequality,
    sweep_grid, threshold_n, winlose_pvalue, AzumaVariant, BiasBound, BoundParams,
    DeterministicStrategy, Error, GameKind, GameSpec, Grid, InputPolicy, Locality, Method,
    PValueReport, Result, SimConfig, SweepContext, WinLoseBound,
};
use serde_json::Value;

use crate::output::Report;
use crate::{
    AnalyzeArgs, AzumaArg, CombineArgs, Command, DesignCommand, InputsArg, MethodArg, Outcome,
    SimulateArgs, SweepArgs, EXIT_OK, EXIT_PRECONDITION,
};

pub(crate) fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Analyze(a) => analyze(a),
        Command::Design(d) => design(d),
        Command::Combine(c) => combine(c),
        Command::Simulate(s) => simulate(s),
        Command::Sweep(s) => sweep(s),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// A game file, or a built-in game when no such file exists.
pub(crate) fn load_game(arg: &str) -> Result<GameSpec> {
    if Path::new(arg).exists() {
        return bellcert::io::read_game(arg);
    }
    match arg {
        "chsh" => Ok(games::chsh()),
        "chsh-two-states" => Ok(games::chsh_two_states()),
        "mermin" => Ok(games::mermin()),
        other => match other.strip_prefix("cglmp").and_then(|d| d.parse::<usize>().ok()) {
            Some(d) => games::cglmp(d),
            None => Err(invalid(format!("no game file or built-in game named {other:?}"))),
        },
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn azuma_variant(arg: AzumaArg) -> AzumaVariant {
    match arg {
        AzumaArg::Symmetric => AzumaVariant::Symmetric,
        AzumaArg::Printed => AzumaVariant::Printed,
    }
}

fn resolve_methods(args: &[MethodArg], kind: GameKind) -> Vec<Method> {
    let mut out = Vec::new();
    for arg in args {
        let add: Vec<Method> = match arg {
            MethodArg::Auto => match kind {
                GameKind::WinLose => vec![Method::Binomial],
                GameKind::General => vec![Method::Bentkus],
            },
            MethodArg::All => match kind {
                GameKind::WinLose => vec![
                    Method::Binomial,
                    Method::Bentkus,
                    Method::Mcdiarmid,
                    Method::Azuma,
                    Method::GaussianNonrigorous,
                ],
                GameKind::General => vec![Method::Bentkus, Method::Mcdiarmid, Method::Azuma],
            },
            MethodArg::Binomial => vec![Method::Binomial],
            MethodArg::Bentkus => vec![Method::Bentkus],
            MethodArg::Mcdiarmid => vec![Method::Mcdiarmid],
            MethodArg::Azuma => vec![Method::Azuma],
            MethodArg::Gaussian => vec![Method::GaussianNonrigorous],
        };
        for m in add {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

fn strategy_text(s: &DeterministicStrategy) -> String {
    s.responses
        .iter()
        .map(|site| site.iter().map(usize::to_string).collect::<Vec<_>>().join(""))
        .collect::<Vec<_>>()
        .join("|")
}

fn tuple_text(t: &[usize]) -> String {
    t.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn bias_facts(report: &mut Report, bias: BiasBound) {
    report.fact("tau_a", bias.tau_a).fact("tau_b", bias.tau_b);
}

fn gaussian_refused(n: u64, c: u64, bound: &WinLoseBound) -> PValueReport {
    PValueReport {
        method: Method::GaussianNonrigorous,
        n,
        statistic: c as f64,
        params: BoundParams::WinLose(bound.clone()),
        p_value: 1.0,
        raw_value: 1.0,
        certifying: false,
        precondition_failed: true,
    }
}

fn analyze(a: AnalyzeArgs) -> Result<Outcome> {
    let spec = load_game(&a.game)?;
    let bias = a.bias.bound()?;
    let methods = resolve_methods(&a.method, spec.kind());
    let variant = azuma_variant(a.azuma);
    let mut report = Report::new("analyze");
    report.fact("game", if spec.kind() == GameKind::WinLose { "win_lose" } else { "general" });
    bias_facts(&mut report, bias);

    let reports = match spec.kind() {
        GameKind::WinLose => {
            let (spec, n, c, attempts) = match &a.trials {
                Some(path) => {
                    let data = read_trials_for(path, &spec)?;
                    let (merged, data) = relabel_event_ready(&spec, &data, &BTreeMap::new(), bias)?;
                    let summary = score_experiment(&merged, &data)?;
                    let wins = summary.wins.expect("win/lose games count wins");
                    (merged, data.trials() as u64, wins, Some(data.attempts() as u64))
                }
                None => {
                    let n = a.n.ok_or_else(|| invalid("give --trials or --n with --wins"))?;
                    let c = a.wins.ok_or_else(|| invalid("win/lose games take --wins, not --total"))?;
                    if c > n {
                        return Err(Error::Domain(format!("{c} wins out of {n} trials")));
                    }
                    (spec, n, c, None)
                }
            };
            let ctx = match a.beta_win {
                Some(b) => SweepContext::winlose(WinLoseBound::user_supplied(b, bias)?, spec.score_range(), 0.0)?,
                None => SweepContext::new(&spec, bias)?,
            };
            let bound = ctx.winlose_bound().expect("win/lose context").clone();
            let params = ctx.params().clone();
            if let Some(m) = attempts {
                report.fact("attempts", m);
            }
            report
                .fact("n", n)
                .fact("wins", c)
                .fact("beta_win", bound.beta_win)
                .fact("beta_provenance", to_json(&bound.provenance).as_str().unwrap_or_default());
            let indicators: Vec<f64> = (0..n).map(|i| f64::from(i < c)).collect();
            methods
                .iter()
                .map(|&m| match m {
                    Method::Binomial => winlose_pvalue(n, c, &bound),
                    Method::Bentkus => bentkus_pvalue(&params, &indicators),
                    Method::Mcdiarmid => mcdiarmid_pvalue(&params, c as f64, n),
                    Method::Azuma => azuma_pvalue(&params, c as f64, n, variant),
                    Method::GaussianNonrigorous => match gaussian_approx_pvalue(n, c, &bound) {
                        Err(Error::Precondition(_)) => Ok(gaussian_refused(n, c, &bound)),
                        other => other,
                    },
                })
                .collect::<Result<Vec<_>>>()?
        }
        GameKind::General => {
            if let Some(m) = methods.iter().find(|m| matches!(m, Method::Binomial | Method::GaussianNonrigorous)) {
                return Err(Error::Precondition(format!("{m} needs a win/lose game")));
            }
            if a.beta_win.is_some() {
                return Err(invalid("--beta-win applies to win/lose games; use --beta-max"));
            }
            let params = match a.beta_max {
                Some(bmax) => {
                    let bmin = match a.beta_min {
                        Some(b) => b,
                        None => local_score_bounds(&spec, bias)?.1.min(bmax),
                    };
                    game_params(&spec, bias, bmax, bmin)?
                }
                None => game_params_auto(&spec, bias)?,
            };
            let (n, total, scores) = match &a.trials {
                Some(path) => {
                    let data = read_trials_for(path, &spec)?;
                    report.fact("attempts", data.attempts() as u64);
                    let summary = score_experiment(&spec, &data)?;
                    (data.trials() as u64, summary.total, Some(summary.per_trial))
                }
                None => {
                    let n = a.n.ok_or_else(|| invalid("give --trials or --n with --total"))?;
                    let total = a.total.ok_or_else(|| invalid("general games take --total, not --wins"))?;
                    (n, total, None)
                }
            };
            report
                .fact("n", n)
                .fact("total_score", total)
                .fact("s_min", params.s_min)
                .fact("s_max", params.s_max)
                .fact("beta_max", params.beta_max)
                .fact("gamma_hat", params.gamma_hat);
            methods
                .iter()
                .map(|&m| match m {
                    Method::Bentkus => match &scores {
                        Some(s) => bentkus_pvalue(&params, s),
                        None => bentkus_pvalue_total(&params, total, n),
                    },
                    Method::Mcdiarmid => mcdiarmid_pvalue(&params, total, n),
                    Method::Azuma => azuma_pvalue(&params, total, n, variant),
                    Method::Binomial | Method::GaussianNonrigorous => unreachable!("rejected above"),
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    report.columns(&["method", "statistic", "p_value", "raw_value", "certifying", "precondition_failed"]);
    for r in &reports {
        report.row(vec![
            r.method.name().into(),
            r.statistic.into(),
            r.p_value.into(),
            r.raw_value.into(),
            r.certifying.into(),
            r.precondition_failed.into(),
        ]);
    }
    report.extra("reports", to_json(&reports));
    let failed = reports.iter().any(|r| r.precondition_failed);
    let mut outcome = Outcome::ok(report.render(a.format));
    if failed {
        outcome.code = EXIT_PRECONDITION;
        outcome.stderr = "warning: a method's precondition failed; it reports p = 1\n".into();
    }
    Ok(outcome)
}

fn design(d: DesignCommand) -> Result<Outcome> {
    match d {
        DesignCommand::Beta { game, bias, format } => {
            let spec = load_game(&game)?;
            let bias = bias.bound()?;
            let bound = beta_win(&spec, bias)?;
            let mut report = Report::new("design beta");
            report
                .fact("beta_win", bound.beta_win)
                .fact("provenance", to_json(&bound.provenance).as_str().unwrap_or_default());
            bias_facts(&mut report, bias);
            if let Some(s) = &bound.strategy {
                report.fact("strategy", strategy_text(s));
            }
            if let Some(q) = &bound.worst_case_inputs {
                let text = q
                    .iter()
                    .map(|m| m.iter().map(|p| crate::output::fmt_num(*p)).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join(" | ");
                report.fact("worst_case_inputs", text);
            }
            report.extra("bound", to_json(&bound));
            Ok(Outcome::ok(report.render(format)))
        }
        DesignCommand::Select { behavior, winlose, game_out, format } => {
            let behavior = read_behavior(behavior)?;
            let ineq = if winlose { select_winlose_inequality(&behavior)? } else { select_inequality(&behavior)? };
            let dims = behavior.dims();
            let mut report = Report::new("design select");
            report
                .fact("bound", ineq.bound)
                .fact("value", ineq.value(&behavior))
                .fact("violation", ineq.violation);
            report.columns(&["x", "a", "coefficient"]);
            let n_out = dims.num_output_tuples();
            for (cell, &s) in ineq.coefficients.iter().enumerate() {
                report.row(vec![
                    tuple_text(&dims.input_tuple(cell / n_out)).into(),
                    tuple_text(&dims.output_tuple(cell % n_out)).into(),
                    s.into(),
                ]);
            }
            if let Some(path) = game_out {
                let k = dims.num_input_tuples();
                let spec = ineq.to_game(vec![1.0 / k as f64; k])?;
                fs::write(path, game_to_json(&spec)?)?;
            }
            Ok(Outcome::ok(report.render(format)))
        }
        DesignCommand::ClassicalBound { game, bias, format } => {
            let spec = load_game(&game)?;
            let bias = bias.bound()?;
            let mut report = Report::new("design classical-bound");
            if bias.is_zero() {
                let b = classical_bound(&spec)?;
                report
                    .fact("beta_max", b.beta_max)
                    .fact("beta_min", b.beta_min)
                    .fact("argmax", strategy_text(&b.argmax))
                    .fact("argmin", strategy_text(&b.argmin));
            } else {
                let (hi, lo) = local_score_bounds(&spec, bias)?;
                report.fact("beta_max", hi).fact("beta_min", lo);
            }
            bias_facts(&mut report, bias);
            Ok(Outcome::ok(report.render(format)))
        }
        DesignCommand::Locality { behavior, format } => {
            let behavior = read_behavior(behavior)?;
            let verdict = is_local(&behavior)?;
            let mut report = Report::new("design locality");
            match &verdict {
                Locality::Local { weights } => {
                    report.fact("verdict", "local").columns(&["strategy", "weight"]);
                    for (s, w) in weights {
                        report.row(vec![strategy_text(s).into(), (*w).into()]);
                    }
                }
                Locality::NonLocal { certificate } => {
                    report
                        .fact("verdict", "non_local")
                        .fact("certificate_bound", certificate.bound)
                        .fact("violation", certificate.violation);
                }
            }
            report.extra("locality", to_json(&verdict));
            Ok(Outcome::ok(report.render(format)))
        }
    }
}

fn combine(c: CombineArgs) -> Result<Outcome> {
    let mut values = c.pvalues.clone();
    if let Some(path) = &c.file {
        values.extend(parse_pvalues(&fs::read_to_string(path)?)?);
    }
    let result = fisher_combine(&values)?;
    let mut report = Report::new("combine");
    report
        .fact("count", values.len() as u64)
        .fact("statistic", result.statistic)
        .fact("dof", result.dof)
        .fact("p_value", result.p_value);
    Ok(Outcome::ok(report.render(c.format)))
}

fn simulate(s: SimulateArgs) -> Result<Outcome> {
    let spec = load_game(&s.game)?;
    let bias = s.bias.bound()?;
    let policy = match s.inputs {
        InputsArg::WorstCase => InputPolicy::WorstCase,
        InputsArg::Nominal => InputPolicy::Nominal,
    };
    let bound = beta_win(&spec, bias)?;
    let q = sampling_distribution(&spec, bias, policy)?;
    let expected = (s.trials as f64 * bound.beta_win).ceil() as u64;
    let target = s.wins.first().copied().unwrap_or(expected);
    let mut model = adversary(&s.strategy, &spec, &q, s.trials, target)?;
    let config = SimConfig::new(s.seed, s.replicas.unwrap_or(1), s.trials).with_bias(bias, policy);

    let mut report = Report::new("simulate");
    report
        .fact("strategy", s.strategy.as_str())
        .fact("memory", model.has_memory())
        .fact("seed", s.seed)
        .fact("trials", s.trials)
        .fact("beta_win", bound.beta_win);
    bias_facts(&mut report, bias);

    if let Some(replicas) = s.replicas {
        let thresholds = if s.wins.is_empty() { vec![expected] } else { s.wins.clone() };
        let estimates = mc_tail_estimate(model.as_mut(), &spec, &config, &thresholds)?;
        report.fact("replicas", replicas).columns(&["wins", "estimate", "stderr", "bound"]);
        for e in &estimates {
            let b = if e.c > s.trials { 0.0 } else { winlose_pvalue(s.trials, e.c, &bound)?.p_value };
            report.row(vec![e.c.into(), e.estimate.into(), e.stderr.into(), b.into()]);
        }
        return Ok(Outcome::ok(report.render(s.format)));
    }

    let data = run_lhvm(model.as_mut(), &spec, &config)?;
    let wins = score_experiment(&spec, &data)?.wins.unwrap_or(0);
    let mut csv = Vec::new();
    write_trials(&data, spec.dims().sites(), &mut csv)?;
    let csv = String::from_utf8(csv).expect("CSV output is UTF-8");
    report
        .fact("attempts", data.attempts() as u64)
        .fact("wins", wins)
        .fact("p_value", winlose_pvalue(s.trials, wins, &bound)?.p_value);
    Ok(match &s.out {
        Some(path) => {
            fs::write(path, csv)?;
            Outcome::ok(report.render(s.format))
        }
        None => Outcome { stdout: csv, stderr: report.render(crate::Format::Text), code: EXIT_OK },
    })
}

fn sweep(s: SweepArgs) -> Result<Outcome> {
    let spec = load_game(&s.game)?;
    let bias = s.bias.bound()?;
    let grid: Grid = s.grid.parse()?;
    let mut ctx = SweepContext::new(&spec, bias)?;
    ctx.azuma = azuma_variant(s.azuma);
    let methods: Vec<Method> = if s.method.contains(&MethodArg::All) {
        ctx.methods()
    } else {
        resolve_methods(&s.method, spec.kind())
    };
    let mut report = Report::new("sweep");
    report.fact("game", if spec.kind() == GameKind::WinLose { "win_lose" } else { "general" });
    bias_facts(&mut report, bias);
    if let Some(b) = ctx.winlose_bound() {
        report.fact("beta_win", b.beta_win);
    } else {
        let p = ctx.params();
        report.fact("beta_max", p.beta_max).fact("s_min", p.s_min).fact("s_max", p.s_max);
    }
    let axis = grid.axis.name();
    match s.target {
        Some(target) => {
            report.fact("target", target).columns(&[axis, "method", "n", "p_value"]);
            for &value in &grid.values {
                for &m in &methods {
                    let t = threshold_n(&ctx, m, grid.axis, value, target)?;
                    report.row(vec![value.into(), m.name().into(), t.n.into(), t.p_value.into()]);
                }
            }
        }
        None => {
            report.columns(&["n", axis, "method", "p_value", "raw_value", "precondition_failed"]);
            for r in sweep_grid(&ctx, &methods, &grid)? {
                report.row(vec![
                    r.n.into(),
                    r.value.into(),
                    r.method.name().into(),
                    r.p_value.into(),
                    r.raw_value.into(),
                    r.precondition_failed.into(),
                ]);
            }
        }
    }
    Ok(Outcome::ok(report.render(s.format)))
}
