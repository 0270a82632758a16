//! Command-line front end. `run` returns what would be printed and the exit
//! code so the commands can be tested without spawning a process.
//!
//! Exit codes: 0 success, 1 verification failure or infeasible request,
//! 2 usage or regime error.

use std::fs;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::capacity::{
    self, capacity_report, fb_gain_outer, lambda_grid, net_gain, outer_raw, pair_subchannels,
    weak_interaction_bound, weak_for_target,
};
use crate::channel::{parse_rational, ChannelConfig, Rational};
use crate::schemes::{
    compile, compile_four_message, four_message_corners, MessageSet, SchemeKind, SchemeSpec,
};
use crate::sim::{run_block, verify_with_seed, VerificationReport, DEFAULT_LIMIT, SAMPLE_SEED};

/// Result of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutcome {
    fn ok(stdout: String) -> Self {
        CommandOutcome { code: 0, stdout, stderr: String::new() }
    }

    fn usage(msg: impl Into<String>) -> Self {
        CommandOutcome { code: 2, stdout: String::new(), stderr: msg.into() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "twoway", about = "Two-way deterministic interference channels with feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ChannelArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long)]
    mb: Option<usize>,
    /// Feedback fraction as p/q, integer or decimal.
    #[arg(long)]
    lambda: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Nofb,
    Type1,
    Type2,
    Type3,
    Fourmsg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sum-capacity bounds and regime labels as JSON.
    Capacity(ChannelArgs),
    /// Compile a scheme and verify decoding over many message sets.
    Simulate {
        scheme: SchemeArg,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Enumerate every message set when there are at most 2^20 of them
        /// (the default unless --seed is given).
        #[arg(long)]
        exhaustive: bool,
        /// Sample message sets with this seed instead of enumerating.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the transcript of one block as JSON lines to this file.
        #[arg(long)]
        dump: Option<String>,
        /// Write the compiled plan as JSON to this file.
        #[arg(long)]
        spec_out: Option<String>,
    },
    /// Feedback gain against independent-message gain over a lambda grid, as CSV.
    Netgain {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 11)]
        lambda_steps: usize,
    },
    /// Regime labels over an integer grid starting at 1, as CSV.
    RegimeMap {
        #[arg(long)]
        max_n: usize,
        #[arg(long)]
        max_m: usize,
        #[arg(long)]
        max_nb: Option<usize>,
        #[arg(long)]
        max_mb: Option<usize>,
        /// Feedback fraction used for the matched flag.
        #[arg(long, default_value = "1/2")]
        lambda: String,
    },
    /// Pair forward and backward sub-channels for the largest total net gain.
    Pair {
        #[arg(long)]
        forwards: String,
        #[arg(long)]
        backwards: String,
        #[arg(long)]
        lambda: String,
    },
    /// Sum-rate bounds when both directions also carry the other's messages.
    Weak {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        nb: Option<usize>,
        #[arg(long)]
        mb: Option<usize>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        lambda_t: Option<String>,
        /// Required backward sum rate; the best fractions are searched.
        #[arg(long, conflicts_with_all = ["lambda", "lambda_t"])]
        rt_target: Option<String>,
    },
}

/// Decimal rendering with at least one fractional digit; non-terminating
/// expansions are cut after 12 digits.
pub fn decimal(r: &Rational) -> String {
    let (mut num, den) = (*r.numer(), *r.denom());
    let neg = num < 0;
    num = num.abs();
    let whole = num / den;
    let mut rem = num % den;
    let mut frac = String::new();
    while rem != 0 && frac.len() < 12 {
        rem *= 10;
        frac.push(char::from(b'0' + (rem / den) as u8));
        rem %= den;
    }
    if frac.is_empty() {
        frac.push('0');
    }
    format!("{}{whole}.{frac}", if neg && (whole != 0 || frac.bytes().any(|c| c != b'0')) { "-" } else { "" })
}

/// `{"exact": "p/q", "decimal": "..."}`.
pub fn rational_json(r: &Rational) -> Value {
    json!({"exact": r.to_string(), "decimal": decimal(r)})
}

fn lambda_arg(s: &Option<String>, default: Rational) -> Result<Rational, CommandOutcome> {
    match s {
        None => Ok(default),
        Some(s) => parse_rational(s).map_err(|e| CommandOutcome::usage(e.to_string())),
    }
}

fn config(c: &ChannelArgs, default: (usize, usize, usize, usize, Rational)) -> Result<ChannelConfig, CommandOutcome> {
    let lambda = lambda_arg(&c.lambda, default.4)?;
    ChannelConfig::new(
        c.n.unwrap_or(default.0),
        c.m.unwrap_or(default.1),
        c.nb.unwrap_or(default.2),
        c.mb.unwrap_or(default.3),
        lambda,
    )
    .map_err(|e| CommandOutcome::usage(e.to_string()))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_capacity(c: &ChannelArgs) -> CommandOutcome {
    let cfg = match config(c, (2, 1, 1, 1, Rational::new(1, 2))) {
        Ok(c) => c,
        Err(e) => return e,
    };
    let rep = capacity_report(&cfg);
    let v = json!({
        "n": cfg.n, "m": cfg.m, "nb": cfg.nb, "mb": cfg.mb,
        "lambda": rational_json(&cfg.lambda),
        "c_no": rational_json(&rep.c_no),
        "c_pf": rational_json(&rep.c_pf),
        "inner": rational_json(&rep.inner),
        "outer": rational_json(&rep.outer),
        "outer_raw": rational_json(&outer_raw(&cfg)),
        "matched": rep.matched,
        "regime": {
            "forward": format!("{:?}", rep.regime.forward),
            "backward": format!("{:?}", rep.regime.backward),
        },
        "netgain": rep.regime.netgain.as_str(),
        "fb_gain": rational_json(&capacity::fb_gain(&cfg)),
        "fb_gain_outer": rational_json(&fb_gain_outer(&cfg)),
        "indep_gain": rational_json(&capacity::indep_gain(&cfg)),
    });
    CommandOutcome::ok(pretty(&v))
}

fn scheme_defaults(s: SchemeArg) -> (SchemeKind, (usize, usize, usize, usize, Rational)) {
    let half = Rational::new(1, 2);
    match s {
        SchemeArg::Nofb => (SchemeKind::NonFeedback, (2, 1, 1, 1, Rational::from_integer(0))),
        SchemeArg::Type1 => (SchemeKind::TypeI, (1, 3, 1, 1, half)),
        SchemeArg::Type2 => (SchemeKind::TypeII, (2, 1, 1, 1, half)),
        SchemeArg::Type3 => (SchemeKind::TypeIII, (3, 1, 3, 1, half)),
        SchemeArg::Fourmsg => (SchemeKind::FourMessage, (2, 1, 0, 1, Rational::from_integer(1))),
    }
}

fn verify(spec: &SchemeSpec, exhaustive: bool, seed: u64) -> Result<VerificationReport, String> {
    let limit = if exhaustive { DEFAULT_LIMIT } else { 1 };
    verify_with_seed(spec, &spec.cfg, limit, seed).map_err(|e| e.to_string())
}

fn cmd_simulate(
    scheme: SchemeArg,
    c: &ChannelArgs,
    exhaustive: bool,
    seed: Option<u64>,
    dump: &Option<String>,
    spec_out: &Option<String>,
) -> CommandOutcome {
    let (kind, defaults) = scheme_defaults(scheme);
    let cfg = match config(c, defaults) {
        Ok(c) => c,
        Err(e) => return e,
    };
    let spec = match kind {
        SchemeKind::FourMessage => compile_four_message(&cfg),
        _ => compile(kind, &cfg),
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => return CommandOutcome::usage(e.to_string()),
    };
    let exhaustive = exhaustive || seed.is_none();
    let seed = seed.unwrap_or(SAMPLE_SEED);
    let report = match verify(&spec, exhaustive, seed) {
        Ok(r) => r,
        Err(e) => return CommandOutcome { code: 1, stdout: String::new(), stderr: e },
    };
    let mut out = report.to_json(&spec);
    let mut passed = report.passed();
    if kind == SchemeKind::FourMessage {
        match four_message_corners(cfg.nb, cfg.mb) {
            Ok((fwd, bwd)) => {
                let mut corners = Vec::new();
                for (label, s, reversed) in [("forward", &fwd, false), ("backward", &bwd, true)] {
                    match verify(s, exhaustive, seed) {
                        Ok(r) => {
                            passed &= r.passed();
                            let (rs, rts) = if reversed {
                                (r.rate.backward_sum, r.rate.forward_sum)
                            } else {
                                (r.rate.forward_sum, r.rate.backward_sum)
                            };
                            corners.push(json!({
                                "corner": label,
                                "scheme": s.kind.name(),
                                "run_on_reversed_channel": reversed,
                                "r_sum": rational_json(&rs),
                                "rt_sum": rational_json(&rts),
                                "status": if r.passed() { "PASS" } else { "FAIL" },
                            }));
                        }
                        Err(e) => return CommandOutcome { code: 1, stdout: String::new(), stderr: e },
                    }
                }
                out["corners"] = Value::from(corners);
            }
            Err(e) => return CommandOutcome::usage(e.to_string()),
        }
    }
    if let Some(path) = spec_out {
        if let Err(e) = fs::write(path, pretty(&spec.to_json())) {
            return CommandOutcome::usage(format!("{path}: {e}"));
        }
    }
    if let Some(path) = dump {
        let msgs = report.counterexample.as_ref().map(|c| c.messages.clone()).unwrap_or_else(|| MessageSet::zeros(&spec));
        let lines = match run_block(&spec, &cfg, &msgs) {
            Ok((t, _)) => t.to_json_lines(),
            Err(e) => return CommandOutcome { code: 1, stdout: String::new(), stderr: e.to_string() },
        };
        if let Err(e) = fs::write(path, lines) {
            return CommandOutcome::usage(format!("{path}: {e}"));
        }
    }
    CommandOutcome {
        code: if passed { 0 } else { 1 },
        stdout: pretty(&out),
        stderr: if passed { String::new() } else { "verification failed\n".to_string() },
    }
}

fn cmd_netgain(c: &ChannelArgs, steps: usize) -> CommandOutcome {
    if steps < 2 {
        return CommandOutcome::usage("--lambda-steps must be at least 2");
    }
    let cfg = match config(c, (2, 1, 1, 1, Rational::from_integer(0))) {
        Ok(c) => c,
        Err(e) => return e,
    };
    let curve = net_gain(&cfg, &lambda_grid(steps));
    let mut out = String::from("lambda,fb_gain,indep_gain\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", decimal(&p.lambda), decimal(&p.fb_gain), decimal(&p.indep_gain)));
    }
    CommandOutcome::ok(out)
}

/// CSV rows for the regime map.
pub fn regime_map_csv(max_n: usize, max_m: usize, max_nb: usize, max_mb: usize, lambda: Rational) -> String {
    let mut out = String::from("n,m,nb,mb,alpha,alpha_t,netgain,matched\n");
    for n in 1..=max_n {
        for m in 1..=max_m {
            for nb in 1..=max_nb {
                for mb in 1..=max_mb {
                    let cfg = ChannelConfig { n, m, nb, mb, lambda };
                    let label = capacity::classify_regime(&cfg);
                    out.push_str(&format!(
                        "{n},{m},{nb},{mb},{},{},{},{}\n",
                        decimal(&Rational::new(m as i64, n as i64)),
                        decimal(&Rational::new(mb as i64, nb as i64)),
                        label.netgain.as_str(),
                        capacity::is_matched(&cfg),
                    ));
                }
            }
        }
    }
    out
}

fn read_pairs(path: &str) -> Result<Vec<(usize, usize)>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<usize> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| format!("{path}:{}: not a level count: {s}", i + 1)))
            .collect::<Result<_, _>>()?;
        if nums.len() != 2 {
            return Err(format!("{path}:{}: expected two level counts", i + 1));
        }
        out.push((nums[0], nums[1]));
    }
    Ok(out)
}

fn cmd_pair(forwards: &str, backwards: &str, lambda: &str) -> CommandOutcome {
    let lambda = match parse_rational(lambda) {
        Ok(l) if l >= Rational::from_integer(0) && l <= Rational::from_integer(1) => l,
        Ok(l) => return CommandOutcome::usage(format!("lambda {l} outside [0,1]")),
        Err(e) => return CommandOutcome::usage(e.to_string()),
    };
    let (f, b) = match (read_pairs(forwards), read_pairs(backwards)) {
        (Ok(f), Ok(b)) => (f, b),
        (Err(e), _) | (_, Err(e)) => return CommandOutcome::usage(e),
    };
    let p = match pair_subchannels(&f, &b, lambda) {
        Ok(p) => p,
        Err(e) => return CommandOutcome::usage(e.to_string()),
    };
    let pairs: Vec<Value> = p
        .pairs
        .iter()
        .zip(&p.gains)
        .map(|(&(i, j), g)| {
            json!({"forward": i, "backward": j, "fwd": [f[i].0, f[i].1], "bwd": [b[j].0, b[j].1], "net_gain": rational_json(g)})
        })
        .collect();
    CommandOutcome::ok(pretty(&json!({"lambda": rational_json(&lambda), "pairs": pairs, "total_net_gain": rational_json(&p.total)})))
}

#[allow(clippy::too_many_arguments)]
fn cmd_weak(
    n: Option<usize>,
    m: Option<usize>,
    nb: Option<usize>,
    mb: Option<usize>,
    lambda: &Option<String>,
    lambda_t: &Option<String>,
    rt_target: &Option<String>,
) -> CommandOutcome {
    let fwd = (n.unwrap_or(2), m.unwrap_or(1));
    let bwd = (nb.unwrap_or(1), mb.unwrap_or(1));
    let unit = |r: Rational| r >= Rational::from_integer(0) && r <= Rational::from_integer(1);
    if let Some(t) = rt_target {
        let target = match parse_rational(t) {
            Ok(t) => t,
            Err(e) => return CommandOutcome::usage(e.to_string()),
        };
        return match weak_for_target(fwd, bwd, target) {
            Some(o) => CommandOutcome::ok(pretty(&json!({
                "fwd": [fwd.0, fwd.1], "bwd": [bwd.0, bwd.1],
                "rt_target": rational_json(&target),
                "lambda": rational_json(&o.lambda),
                "lambda_t": rational_json(&o.lambda_t),
                "r_sum_bound": rational_json(&o.r_sum),
                "rt_sum_bound": rational_json(&o.rt_sum),
            }))),
            None => CommandOutcome {
                code: 1,
                stdout: String::new(),
                stderr: format!("no feedback fractions give a backward sum-rate bound of at least {target}\n"),
            },
        };
    }
    let (l, lt) = match (lambda_arg(lambda, Rational::from_integer(0)), lambda_arg(lambda_t, Rational::from_integer(0))) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    if !unit(l) || !unit(lt) {
        return CommandOutcome::usage("fractions must lie in [0,1]");
    }
    let (r, rt) = weak_interaction_bound(fwd, bwd, l, lt);
    CommandOutcome::ok(pretty(&json!({
        "fwd": [fwd.0, fwd.1], "bwd": [bwd.0, bwd.1],
        "lambda": rational_json(&l),
        "lambda_t": rational_json(&lt),
        "r_sum_bound": rational_json(&r),
        "rt_sum_bound": rational_json(&rt),
    })))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    CommandOutcome::ok(text)
                }
                _ => CommandOutcome::usage(text),
            };
        }
    };
    match &cli.command {
        Command::Capacity(c) => cmd_capacity(c),
        Command::Simulate { scheme, channel, exhaustive, seed, dump, spec_out } => {
            cmd_simulate(*scheme, channel, *exhaustive, *seed, dump, spec_out)
        }
        Command::Netgain { channel, lambda_steps } => cmd_netgain(channel, *lambda_steps),
        Command::RegimeMap { max_n, max_m, max_nb, max_mb, lambda } => {
            if *max_n < 1 || *max_m < 1 {
                return CommandOutcome::usage("grid bounds must be at least 1");
            }
            let lambda = match parse_rational(lambda) {
                Ok(l) => l,
                Err(e) => return CommandOutcome::usage(e.to_string()),
            };
            CommandOutcome::ok(regime_map_csv(*max_n, *max_m, max_nb.unwrap_or(*max_n), max_mb.unwrap_or(*max_m), lambda))
        }
        Command::Pair { forwards, backwards, lambda } => cmd_pair(forwards, backwards, lambda),
        Command::Weak { n, m, nb, mb, lambda, lambda_t, rt_target } => {
            cmd_weak(*n, *m, *nb, *mb, lambda, lambda_t, rt_target)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_keep_a_fractional_digit() {
        assert_eq!(decimal(&Rational::from_integer(1)), "1.0");
        assert_eq!(decimal(&Rational::new(1, 2)), "0.5");
        assert_eq!(decimal(&Rational::new(1, 3)), "0.333333333333");
        assert_eq!(decimal(&Rational::new(-3, 2)), "-1.5");
    }
}
