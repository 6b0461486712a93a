//! Subcommand handlers and exit-code mapping.

use std::fs;
use std::path::Path;
use std::time::Instant;

use chainstat::bounds::{threshold_sweep, BoundsConfig};
use chainstat::counting::{error_pmf, error_pmf_for, nonheralded_error, ErrorDistribution};
use chainstat::innsbruck::{normalized_key_rate, simplified_key_rate, FinalDistillation, RepeaterConfig};
use chainstat::pgf::{analyze, PoleSet};
use chainstat::{build_process, pmf_series, CountedMatrix, Error, ProcessGraph};
use serde_json::json;

use crate::output::{emit, real, Table};
use crate::{
    Cli, Command, ErrorsArgs, InnsbruckArgs, InnsbruckMode, Method, MomentsArgs, PmfArgs, Strategy, ThresholdArgs,
};

/// Malformed input that never reached the library.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(e) => match e {
            Error::InvalidGraph(_)
            | Error::NonStochasticGraph { .. }
            | Error::SelfLoopOnTerminal { .. }
            | Error::InvalidProbability(_)
            | Error::InvalidSplit(_)
            | Error::InvalidPartition(_)
            | Error::UnknownEdge { .. }
            | Error::UnknownCounter(_)
            | Error::NoCounter
            | Error::BadBlockForm
            | Error::LambdaOutOfRange(_)
            | Error::InvalidConfig(_) => 2,
            Error::MultiplePoleDetected(_) | Error::ResidualImaginary(_) | Error::GridTooLarge { .. } => 3,
            Error::InsufficientSamples { .. } | Error::Truncation(_) => 4,
            _ => 1,
        },
        None => 1,
    }
}

/// Run a parsed command line on a pool sized by `--threads`.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(input("--threads must be positive"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Pmf(a) => pmf(a),
        Command::Moments(a) => moments(a),
        Command::Errors(a) => errors(a),
        Command::Innsbruck(a) => innsbruck(a),
        Command::Thresholds(a) => thresholds(a),
    })
}

fn load_process(path: &Path) -> anyhow::Result<CountedMatrix> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("reading {}: {e}", path.display())))?;
    let graph = ProcessGraph::from_json(&text)?;
    Ok(build_process(&graph)?)
}

fn params<T: serde::Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

/// Pole set when the residue path is usable; `None` selects powers.
fn poles_for(m: &CountedMatrix, method: Method) -> anyhow::Result<Option<PoleSet>> {
    match method {
        Method::Power => Ok(None),
        Method::Residue => Ok(Some(analyze(m)?)),
        Method::Auto => match analyze(m) {
            Ok(ps) => Ok(Some(ps)),
            Err(Error::NonTerminating(msg)) => Err(Error::NonTerminating(msg).into()),
            Err(_) => Ok(None),
        },
    }
}

fn pmf(a: &PmfArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let m = load_process(&a.config)?;
    let poles = poles_for(&m, a.method)?;
    let powers = pmf_series(&m, a.t_max);
    let mut table = Table::new(&["t", "p_t", "cdf"]);
    let mut cdf = 0.0;
    for t in 1..=a.t_max {
        let (p, c) = match &poles {
            Some(ps) if a.method == Method::Residue || t > ps.t0() => (ps.pmf(t)?, ps.cdf(t)?),
            _ => {
                cdf += powers[t];
                (powers[t], cdf)
            }
        };
        table.row(&[t.to_string(), real(p), real(c)]);
    }
    emit(a.out.as_deref(), &table.into_string(), "pmf", params(a), None, start.elapsed())
}

/// Steps summed before the power-series moments give up.
const MOMENT_STEPS: usize = 1 << 22;

fn moments(a: &MomentsArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let m = load_process(&a.config)?;
    let (mean, variance, cdf_99) = match poles_for(&m, a.method)? {
        Some(ps) => {
            let mut t = 0;
            while ps.cdf(t)? < 0.99 {
                t += 1;
                if t > MOMENT_STEPS {
                    return Err(Error::Truncation(MOMENT_STEPS).into());
                }
            }
            (ps.mean()?, ps.variance()?, t)
        }
        None => power_moments(&m)?,
    };
    let text = serde_json::to_string_pretty(&json!({
        "mean": mean,
        "variance": variance,
        "cdf_99": cdf_99,
    }))? + "\n";
    emit(a.out.as_deref(), &text, "moments", params(a), None, start.elapsed())
}

/// Moments by summing the power series until the tail is negligible.
fn power_moments(m: &CountedMatrix) -> anyhow::Result<(f64, f64, usize)> {
    let ev = m.evaluate_at_ones();
    let dim = ev.dim();
    let zero = num_complex::Complex64::new(0.0, 0.0);
    let mut x = vec![zero; dim];
    let mut next = vec![zero; dim];
    x[0] = num_complex::Complex64::new(1.0, 0.0);
    let (mut cdf, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let mut cdf_99 = None;
    for t in 1..=MOMENT_STEPS {
        ev.apply(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        let mut p = 0.0;
        for (i, v) in x.iter_mut().enumerate() {
            if ev.is_terminal(i) {
                p += v.re;
                *v = zero;
            }
        }
        let tf = t as f64;
        cdf += p;
        m1 += tf * p;
        m2 += tf * tf * p;
        if cdf_99.is_none() && cdf >= 0.99 {
            cdf_99 = Some(t);
        }
        if 1.0 - cdf < 1e-15 {
            return Ok((m1, m2 - m1 * m1, cdf_99.unwrap_or(t)));
        }
    }
    Err(Error::Truncation(MOMENT_STEPS).into())
}

fn errors(a: &ErrorsArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    if let Some(eps) = a.eps {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidProbability(eps).into());
        }
    }
    let m = load_process(&a.config)?;
    let dist: ErrorDistribution = match &a.counter {
        Some(c) => error_pmf_for(&m, a.t, c)?,
        None => error_pmf(&m, a.t)?,
    };
    let mut table = Table::new(&["k", "p"]);
    for (k, &p) in dist.probs.iter().enumerate() {
        table.row(&[k.to_string(), real(p)]);
    }
    emit(a.out.as_deref(), &table.into_string(), "errors", params(a), None, start.elapsed())?;
    if let Some(eps) = a.eps {
        let value = match &a.counter {
            None => nonheralded_error(&m, a.t, eps)?,
            Some(_) => dist
                .probs
                .iter()
                .enumerate()
                .map(|(k, p)| p * -(k as f64 * (-eps).ln_1p()).exp_m1())
                .sum(),
        };
        let text = serde_json::to_string(&json!({
            "t": a.t,
            "counter": dist.counters[0],
            "eps": eps,
            "nonheralded_error": value,
        }))?;
        if a.out.is_some() {
            println!("{text}");
        } else {
            eprintln!("{text}");
        }
    }
    Ok(())
}

/// `"4"`, a list `"2,4"` or an inclusive range `"2..8"`.
pub fn parse_q0(s: &str) -> anyhow::Result<Vec<usize>> {
    let num = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|_| input(format!("bad q0 value `{x}`")))
    };
    let values: Vec<usize> = match s.split_once("..") {
        Some((lo, hi)) => {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            (num(lo)?..=num(hi)?).collect()
        }
        None => s.split(',').map(num).collect::<anyhow::Result<_>>()?,
    };
    if values.is_empty() {
        return Err(input(format!("empty q0 range `{s}`")));
    }
    Ok(values)
}

/// `"start:stop:count"` with both ends included.
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || input(format!("bad grid `{s}`, expected start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn repeater_config(a: &InnsbruckArgs, q0: usize) -> RepeaterConfig {
    RepeaterConfig {
        q0,
        p: a.p,
        lambda: a.lambda_grid.first().copied().unwrap_or(0.8),
        lambda_grid: a.lambda_grid.clone(),
        f_init: a.f_init,
        eps_w: a.eps_w,
        eps_l: a.eps_l,
        samples: a.samples,
        seed: a.seed,
        strategy: match a.strategy {
            Strategy::Optional => FinalDistillation::Optional,
            Strategy::Mandatory => FinalDistillation::Mandatory,
        },
        ..RepeaterConfig::default()
    }
}

fn innsbruck(a: &InnsbruckArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    if a.lambda_grid.is_empty() {
        return Err(input("--lambda-grid is empty"));
    }
    let q0s = parse_q0(&a.q0)?;
    let sweep = a.mode == Some(InnsbruckMode::Sweep);
    let mut table = if sweep {
        Table::new(&["q0", "K", "K_simplified"])
    } else {
        Table::new(&["q0", "lambda", "K", "K_simplified", "stderr", "t_truncation"])
    };
    for q0 in q0s {
        let cfg = repeater_config(a, q0);
        cfg.validate()?;
        let simple = simplified_key_rate(&cfg)?;
        let full = if a.simplified {
            None
        } else {
            let r = normalized_key_rate(&cfg)?;
            r.check()?;
            Some(r)
        };
        let k = full.map_or(f64::NAN, |r| r.rate);
        if sweep {
            table.row(&[q0.to_string(), real(k), real(simple.rate)]);
        } else {
            let best = full.unwrap_or(simple);
            table.row(&[
                q0.to_string(),
                real(best.lambda),
                real(k),
                real(simple.rate),
                real(full.map_or(f64::NAN, |r| r.stderr)),
                best.t_truncation.to_string(),
            ]);
        }
    }
    emit(a.out.as_deref(), &table.into_string(), "innsbruck", params(a), Some(a.seed), start.elapsed())
}

fn thresholds(a: &ThresholdArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let grid = parse_grid(&a.p_grid)?;
    let modes: &[bool] = if a.both {
        &[true, false]
    } else if a.no_statistical {
        &[false]
    } else {
        &[true]
    };
    let mut table = Table::new(&["p", "tau_seconds", "mode"]);
    for &statistical in modes {
        let cfg = BoundsConfig {
            n_sections: a.sections,
            f_init: a.f_init,
            eps_l: a.eps_l,
            length_km: a.length_km,
            statistical,
            ..BoundsConfig::default()
        };
        cfg.validate()?;
        for pt in threshold_sweep(&cfg, &grid)? {
            let mode = if pt.statistical { "statistical" } else { "non-statistical" };
            table.row(&[real(pt.p), real(pt.tau_seconds), mode.into()]);
        }
    }
    emit(a.out.as_deref(), &table.into_string(), "thresholds", params(a), None, start.elapsed())
}
