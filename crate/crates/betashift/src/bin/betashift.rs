//! Command-line frontend: base inspection, expansion, block-frequency
//! analysis, martingale construction and evaluation, base conversion, and
//! certified transfer of betting capital to the unit interval.
//!
//! All reports are deterministic given the flags (and seed): JSON objects
//! are emitted with sorted keys and embed the resolved configuration and
//! the library version.

use betashift::algebraic::{is_pisot, Int, MinimalPolynomial, Rat};
use betashift::automaton::{presentation, synchronizing_word};
use betashift::beta::{make_base, BaseRef};
use betashift::martingale::{
    checkpoint_schedule, construct_case1, detect_deviant_block, DeviantBlock, DfaMartingale,
    Martingale, SavingsTransform, Trajectory,
};
use betashift::measures::{freq_profile, parry_markov, MarkovMeasure, ParryMeasure, WordMeasure};
use betashift::transfer::InducedMeasure;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num::{One, Signed, Zero};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "betashift",
    version,
    about = "Exact arithmetic for β-expansions in Pisot bases: shift automata, Parry measures, betting strategies, certified transfer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Args, Clone)]
struct IoOpts {
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (csv only for trajectories, dot only for automata)
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Clone)]
struct DigitSource {
    /// Rational "p/q" in [0, 1) whose expansion supplies the digits
    #[arg(long)]
    number: Option<String>,
    /// Single-line ASCII digit file, optional "# base: <poly>" header
    #[arg(long)]
    digits_file: Option<PathBuf>,
    /// Sample the digits from the Parry chain with this seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a base: expansion of β, Pisot verdict, automaton, presentation
    Base {
        /// Minimal polynomial, "x^2-x-1" or constant-first "-1,-1,1"
        #[arg(long)]
        poly: String,
        #[command(flatten)]
        io: IoOpts,
    },
    /// Greedy expansion of a rational in the base
    Expand {
        #[arg(long)]
        poly: String,
        /// Rational "p/q" in [0, 1)
        #[arg(long)]
        number: String,
        /// Number of digits to emit
        #[arg(long, default_value_t = 64)]
        prec: u32,
        #[command(flatten)]
        io: IoOpts,
    },
    /// Block-frequency deviation report against the Parry measure, with an
    /// auto-constructed betting strategy when a deviant block is found
    Analyze {
        #[arg(long)]
        poly: String,
        #[command(flatten)]
        source: DigitSource,
        /// Maximum block length to scan
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Deviation threshold: flag ratios above (1+δ)·expected
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        /// Digit count when expanding --number or sampling --seed
        #[arg(long, default_value_t = 30_000)]
        prec: u32,
        /// Cap the trajectory at this many digits
        #[arg(long)]
        checkpoints: Option<usize>,
        #[command(flatten)]
        io: IoOpts,
    },
    /// Construct the single-block betting strategy for the given digits and
    /// report its factor table and capital trajectory
    Martingale {
        #[arg(long)]
        poly: String,
        #[command(flatten)]
        source: DigitSource,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 30_000)]
        prec: u32,
        #[arg(long)]
        checkpoints: Option<usize>,
        #[command(flatten)]
        io: IoOpts,
    },
    /// Approximate a dyadic/rational by an admissible word with certified
    /// error at most 2^{-prec}
    Convert {
        #[arg(long)]
        poly: String,
        /// Binary word ("101" = 5/8) or rational "p/q" in [0, 1]
        #[arg(long)]
        number: String,
        #[arg(long, default_value_t = 16)]
        prec: u32,
        #[command(flatten)]
        io: IoOpts,
    },
    /// Certified evaluation of the measure induced by a betting strategy
    Transfer {
        #[command(subcommand)]
        what: TransferCmd,
    },
}

#[derive(Args, Clone)]
struct StrategyOpts {
    #[arg(long)]
    poly: String,
    #[command(flatten)]
    source: DigitSource,
    /// Block length for deviant-block detection
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Deviation threshold for deviant-block detection
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
}

#[derive(Subcommand)]
enum TransferCmd {
    /// Cumulative distribution of the induced measure at a rational point
    Cdf {
        /// Evaluation point "p/q" in [0, 1]
        #[arg(long)]
        at: String,
        /// Certified radius is 2^{-prec}
        #[arg(long, default_value_t = 16)]
        prec: u32,
        #[command(flatten)]
        strategy: StrategyOpts,
        #[command(flatten)]
        io: IoOpts,
    },
    /// Induced martingale value on a binary word
    Mart {
        /// Binary word τ, e.g. "0110"
        #[arg(long)]
        tau: String,
        #[arg(long, default_value_t = 16)]
        prec: u32,
        #[command(flatten)]
        strategy: StrategyOpts,
        #[command(flatten)]
        io: IoOpts,
    },
}

// ---------------------------------------------------------------------------
// error plumbing: exit 2 for bad input, 3 for internal invariant violations
// ---------------------------------------------------------------------------

enum Failure {
    Input(String),
    Internal(String),
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure::Input(e.to_string())
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Failure::Internal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Base { poly, io } => cmd_base(&poly, &io),
        Command::Expand { poly, number, prec, io } => cmd_expand(&poly, &number, prec, &io),
        Command::Analyze { poly, source, k, delta, prec, checkpoints, io } => {
            cmd_analyze(&poly, &source, k, delta, prec, checkpoints, &io, false)
        }
        Command::Martingale { poly, source, k, delta, prec, checkpoints, io } => {
            cmd_analyze(&poly, &source, k, delta, prec, checkpoints, &io, true)
        }
        Command::Convert { poly, number, prec, io } => cmd_convert(&poly, &number, prec, &io),
        Command::Transfer { what } => match what {
            TransferCmd::Cdf { at, prec, strategy, io } => {
                cmd_transfer(&strategy, TransferTask::Cdf(at), prec, &io)
            }
            TransferCmd::Mart { tau, prec, strategy, io } => {
                cmd_transfer(&strategy, TransferTask::Mart(tau), prec, &io)
            }
        },
    }
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn parse_base(poly: &str) -> Result<BaseRef, Failure> {
    let p = MinimalPolynomial::parse(poly).map_err(Failure::input)?;
    make_base(p).map_err(Failure::input)
}

fn parse_rat(s: &str) -> Result<Rat, Failure> {
    let parse_int =
        |t: &str| t.trim().parse::<Int>().map_err(|e| Failure::Input(format!("bad number: {e}")));
    match s.split_once('/') {
        Some((num, den)) => {
            let d = parse_int(den)?;
            if d.is_zero() {
                return Err(Failure::Input("zero denominator".into()));
            }
            Ok(Rat::new(parse_int(num)?, d))
        }
        None => Ok(Rat::from_integer(parse_int(s)?)),
    }
}

fn parse_bits(s: &str) -> Result<Vec<u8>, Failure> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            _ => Err(Failure::Input(format!("binary word may only contain 0/1, got '{c}'"))),
        })
        .collect()
}

fn digits_to_string(digits: &[u8]) -> String {
    digits.iter().map(|&d| char::from(b'0' + d)).collect()
}

/// Decimal rendering of a rational, `digits` places, round-half-away.
fn rat_decimal(r: &Rat, digits: u32) -> String {
    let scale = Int::from(10).pow(digits);
    let scaled = (r * Rat::from_integer(scale.clone())).round();
    let v = scaled.to_integer();
    let sign = if v.is_negative() { "-" } else { "" };
    let v = v.abs();
    let int_part = &v / &scale;
    let frac_part = &v % &scale;
    format!("{sign}{int_part}.{frac_part:0>width$}", width = digits as usize)
}

fn field_value_json(x: &betashift::algebraic::FieldElement) -> Value {
    let coords: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
    json!({
        "decimal": x.to_decimal_string(12),
        "coords": coords,
    })
}

fn rat_value_json(r: &Rat) -> Value {
    json!({
        "decimal": rat_decimal(r, 12),
        "exact": r.to_string(),
    })
}

fn emit(report: &str, io: &IoOpts) -> Result<(), Failure> {
    match &io.out {
        Some(path) => std::fs::write(path, report).map_err(Failure::input),
        None => {
            use std::io::Write;
            // a closed pipe (e.g. | head) is not an error worth reporting
            let _ = writeln!(std::io::stdout(), "{report}");
            Ok(())
        }
    }
}

fn emit_json(mut report: Value, config: Value, io: &IoOpts) -> Result<(), Failure> {
    let obj = report.as_object_mut().expect("reports are objects");
    obj.insert("config".into(), config);
    obj.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    let text = serde_json::to_string_pretty(&report).map_err(Failure::internal)?;
    emit(&text, io)
}

/// Resolve the digit stream: an explicit file, the expansion of a rational,
/// or a seeded sample from the Parry chain.
fn resolve_digits(
    base: &BaseRef,
    source: &DigitSource,
    k: usize,
    count: usize,
) -> Result<(Vec<u8>, Value), Failure> {
    let given =
        source.number.is_some() as u8 + source.digits_file.is_some() as u8 + source.seed.is_some() as u8;
    if given != 1 {
        return Err(Failure::Input(
            "exactly one of --number, --digits-file, --seed must be given".into(),
        ));
    }
    if let Some(path) = &source.digits_file {
        let text = std::fs::read_to_string(path).map_err(Failure::input)?;
        let mut digits = Vec::new();
        for line in text.lines() {
            if line.trim_start().starts_with('#') || line.trim().is_empty() {
                continue;
            }
            for c in line.trim().chars() {
                let d = c.to_digit(10).ok_or_else(|| {
                    Failure::Input(format!("digit file may only contain 0-9, got '{c}'"))
                })?;
                digits.push(d as u8);
            }
        }
        if !base.dfa().accepts(&digits) {
            return Err(Failure::Input("digit stream is not admissible for this base".into()));
        }
        return Ok((digits, json!({ "digits_file": path.display().to_string() })));
    }
    if let Some(num) = &source.number {
        let r = parse_rat(num)?;
        let x = base.field().from_rat(r);
        let exp = base.expand(&x, count).map_err(Failure::input)?;
        return Ok((exp.digits, json!({ "number": num })));
    }
    let seed = source.seed.expect("one source is set");
    let chain = parry_chain(base, k)?;
    let digits = chain.sample(count, seed).map_err(Failure::internal)?;
    Ok((digits, json!({ "seed": seed })))
}

/// Parry measure as a k-step Markov chain, preferring the smallest context
/// length that pins the presentation node.
fn parry_chain(base: &BaseRef, k: usize) -> Result<MarkovMeasure, Failure> {
    let cap = base.s_preperiod().len() + base.s_period().len() + 1;
    let mut last = String::new();
    for kk in k.max(1)..=cap.max(k) {
        match parry_markov(base, kk) {
            Ok(m) => return Ok(m),
            Err(e) => last = e.to_string(),
        }
    }
    Err(Failure::Internal(format!("no Markov context length works for this base: {last}")))
}

/// Deviant block + Case-I strategy for it, with δ set to half the valid
/// margin (1−p*)/p*.
fn build_case1(
    base: &BaseRef,
    witness: &DeviantBlock,
) -> Result<(DfaMartingale, Rat), Failure> {
    let chain = parry_chain(base, witness.sigma.len())?;
    let mut sigma = witness.sigma.clone();
    // pad short contexts on the left with digits seen before them is not
    // possible generically; extend the block by its own prefix instead
    while sigma.len() < chain.order() {
        sigma.insert(0, 0);
    }
    let p_star = chain.conditional(&sigma, witness.digit).to_f64();
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Failure::Input("detected block admits no valid bet".into()));
    }
    let margin = (1.0 - p_star) / p_star;
    let delta = Rat::from_float(margin / 2.0)
        .ok_or_else(|| Failure::Internal("delta not representable".into()))?;
    let mart =
        construct_case1(&chain, &sigma, witness.digit, delta.clone()).map_err(Failure::input)?;
    Ok((mart, delta))
}

fn trajectory_json(t: &Trajectory) -> Value {
    Value::Array(
        t.points
            .iter()
            .map(|p| json!({ "N": p.n, "capital_log2": p.capital_log2, "rate": p.rate }))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_base(poly: &str, io: &IoOpts) -> Result<(), Failure> {
    let p = MinimalPolynomial::parse(poly).map_err(Failure::input)?;
    let config = json!({ "command": "base", "poly": poly });
    if !is_pisot(&p).map_err(Failure::internal)? {
        return emit_json(json!({ "pisot": false }), config, io);
    }
    let base = make_base(p).map_err(Failure::internal)?;
    if io.format == Format::Dot {
        return emit(&base.dfa().to_dot(), io);
    }
    let graph = presentation(&base);
    let sync = synchronizing_word(&graph).ok();
    let m = base.s_preperiod().len();
    let n = base.s_period().len();
    // minimal forbidden words: a strict prefix of 𝔰 followed by a digit
    // above the next expansion digit
    let mut forbidden = Vec::new();
    for i in 0..m + n {
        for a in base.s_digit(i) + 1..base.alphabet_size() {
            let mut w: Vec<u8> = (0..i).map(|j| base.s_digit(j)).collect();
            w.push(a);
            forbidden.push(digits_to_string(&w));
        }
    }
    let report = json!({
        "pisot": true,
        "beta": field_value_json(base.beta()),
        "alphabet_size": base.alphabet_size(),
        "s_beta": {
            "pre": digits_to_string(base.s_preperiod()),
            "period": digits_to_string(base.s_period()),
        },
        "raw_finite_expansion": base.raw_finite_expansion().map(digits_to_string),
        "forbidden": forbidden,
        "automaton": base.dfa().to_json(),
        "presentation": graph.to_json(),
        "synchronizing_word": sync.map(|s| json!({
            "word": digits_to_string(&s.word),
            "node": s.node,
        })),
    });
    emit_json(report, config, io)
}

fn cmd_expand(poly: &str, number: &str, prec: u32, io: &IoOpts) -> Result<(), Failure> {
    let base = parse_base(poly)?;
    let r = parse_rat(number)?;
    let x = base.field().from_rat(r.clone());
    let exp = base.expand(&x, prec as usize).map_err(Failure::input)?;
    let report = json!({
        "digits": digits_to_string(&exp.digits),
        "cycle": exp.cycle.map(|c| json!({ "preperiod": c.preperiod, "period": c.period })),
        "value": rat_value_json(&r),
    });
    let config = json!({ "command": "expand", "poly": poly, "number": number, "prec": prec });
    emit_json(report, config, io)
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    poly: &str,
    source: &DigitSource,
    k: usize,
    delta: f64,
    prec: u32,
    checkpoints: Option<usize>,
    io: &IoOpts,
    descriptor: bool,
) -> Result<(), Failure> {
    let base = parse_base(poly)?;
    let (digits, source_json) = resolve_digits(&base, source, k, prec as usize)?;
    let parry = ParryMeasure::new(base.clone());
    let profile = freq_profile(&digits, k, &parry);
    let witness = detect_deviant_block(&digits, &parry, k, delta);
    let mut trajectory: Option<Trajectory> = None;
    let mut strategy_json = Value::Null;
    if let Some(w) = &witness {
        let (mart, used_delta) = build_case1(&base, w)?;
        let max_n = checkpoints.unwrap_or(digits.len()).min(digits.len());
        let t = mart.run(&digits[..max_n], &checkpoint_schedule(max_n)).map_err(Failure::internal)?;
        if descriptor {
            let dfa = mart.dfa();
            let betting: Vec<Vec<String>> = (0..dfa.num_states())
                .map(|q| {
                    (0..dfa.alphabet_size())
                        .map(|a| mart.betting_factor(q, a).to_decimal_string(12))
                        .collect()
                })
                .collect();
            strategy_json = json!({
                "construction": "case1",
                "sigma": digits_to_string(&w.sigma),
                "digit": w.digit,
                "delta": rat_value_json(&used_delta),
                "automaton": dfa.to_json(),
                "betting": betting,
            });
        }
        trajectory = Some(t);
    }
    if io.format == Format::Csv {
        let t = trajectory
            .as_ref()
            .ok_or_else(|| Failure::Input("no deviant block found; no trajectory to export".into()))?;
        return emit(&t.to_csv(), io);
    }
    let config = json!({
        "command": if descriptor { "martingale" } else { "analyze" },
        "poly": poly, "k": k, "delta": delta, "prec": prec,
        "checkpoints": checkpoints, "source": source_json,
    });
    let report = json!({
        "N": digits.len(),
        "profile": profile.to_json(poly),
        "deviant": witness.is_some(),
        "witness": witness.map(|w| json!({
            "sigma": digits_to_string(&w.sigma),
            "digit": w.digit,
            "ratio": w.ratio,
            "expected": w.expected,
        })),
        "strategy": strategy_json,
        "trajectory": trajectory.as_ref().map(trajectory_json),
    });
    emit_json(report, config, io)
}

fn cmd_convert(poly: &str, number: &str, prec: u32, io: &IoOpts) -> Result<(), Failure> {
    let base = parse_base(poly)?;
    let (target, input_kind) = if number.contains('/') {
        (parse_rat(number)?, "rational")
    } else {
        let bits = parse_bits(number)?;
        let mut r = Rat::zero();
        let mut w = Rat::new(Int::one(), Int::from(2));
        for &b in &bits {
            if b == 1 {
                r += &w;
            }
            w /= Int::from(2);
        }
        (r, "binary")
    };
    let word = base.approximate_value(&target, prec).map_err(Failure::input)?;
    let value = base.value(&word).map_err(Failure::internal)?;
    let achieved = value.sub(&base.field().from_rat(target.clone()));
    let bound = Rat::new(Int::one(), Int::one() << prec);
    let within = achieved
        .mul(&achieved)
        .cmp_exact(&base.field().from_rat(&bound * &bound))
        .is_le();
    if !within {
        return Err(Failure::Internal("conversion exceeded its certified error bound".into()));
    }
    let report = json!({
        "word": digits_to_string(&word),
        "length": word.len(),
        "target": rat_value_json(&target),
        "value": field_value_json(&value),
        "error_bound": rat_value_json(&bound),
        "certified": true,
    });
    let config = json!({
        "command": "convert", "poly": poly, "number": number,
        "input_kind": input_kind, "prec": prec,
    });
    emit_json(report, config, io)
}

enum TransferTask {
    Cdf(String),
    Mart(String),
}

fn cmd_transfer(
    strategy: &StrategyOpts,
    task: TransferTask,
    prec: u32,
    io: &IoOpts,
) -> Result<(), Failure> {
    let base = parse_base(&strategy.poly)?;
    let field = base.field().clone();
    let has_source = strategy.source.number.is_some()
        || strategy.source.digits_file.is_some()
        || strategy.source.seed.is_some();
    // with a digit source: bet on its deviant block, savings-transformed;
    // without: the constant strategy, i.e. the Parry measure itself
    let (mart, step_bound, strategy_label): (Box<dyn Martingale>, _, _) = if has_source {
        let (digits, _) = resolve_digits(&base, &strategy.source, strategy.k, 30_000)?;
        let parry = ParryMeasure::new(base.clone());
        let witness = detect_deviant_block(&digits, &parry, strategy.k, strategy.delta)
            .ok_or_else(|| Failure::Input("no deviant block found in the digit stream".into()))?;
        let (case1, _) = build_case1(&base, &witness)?;
        let mut f_max = field.one();
        for f in case1.betting_factor_set() {
            if f.cmp_exact(&f_max).is_gt() {
                f_max = f;
            }
        }
        // active capital stays below 2·M(ε): per-step increase ≤ 2·M(ε)·(f_max−1)
        let bound = f_max.sub(&field.one()).mul(&case1.initial()).scale_i64(2);
        (Box::new(SavingsTransform::new(case1)), bound, "case1+savings")
    } else {
        let constant = DfaMartingale::constant(field.clone(), base.dfa().clone());
        (Box::new(constant), field.zero(), "constant")
    };
    let induced = InducedMeasure::new(mart.as_ref(), base.clone(), true, Some(step_bound));
    let (certified, task_json) = match task {
        TransferTask::Cdf(at) => {
            let p = parse_rat(&at)?;
            if p.is_negative() || p > Rat::one() {
                return Err(Failure::Input("evaluation point must lie in [0, 1]".into()));
            }
            let c = induced.cdf_dyadic(&p, prec).map_err(Failure::input)?;
            (c, json!({ "task": "cdf", "at": at }))
        }
        TransferTask::Mart(tau) => {
            let bits = parse_bits(&tau)?;
            let c = induced.binary_martingale(&bits, prec).map_err(Failure::input)?;
            (c, json!({ "task": "mart", "tau": tau }))
        }
    };
    let config = json!({
        "command": "transfer", "poly": strategy.poly, "k": strategy.k,
        "delta": strategy.delta, "prec": prec, "strategy": strategy_label,
        "task": task_json,
    });
    let report = json!({
        "value": rat_value_json(&certified.value),
        "radius": rat_value_json(&certified.radius),
    });
    emit_json(report, config, io)
}
