//! `coreprice` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use coreprice::projection::{project_onto_core_with, ProjectionOptions};
use coreprice::mrc::mrc_quadratic_price_with;
use coreprice::{
    all_passed, compute_mid, generate_lower_bound_scenario, solve_wdp, sweep_generic_curve, sweep_star_curve,
    validate_instance, validate_star, vickrey_prices, AuctionInstance, Coalition, CoreConstraint, Error,
    GenericSweep, KKTCertificate, Money, PaymentRule, StarInstance, TieBreakPolicy,
};

#[derive(Parser)]
#[command(name = "coreprice", version, about = "Core-selecting payment rules for combinatorial auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Efficient winners and welfare of an instance.
    Solve(SolveArgs),
    /// Winner prices under a payment rule.
    Price(PriceArgs),
    /// One winner's price as its bid moves over a range.
    Sweep(SweepArgs),
    /// Buyer zero's price in a star network as a function of θ.
    StarSweep(StarSweepArgs),
    /// Check the two-scenario lower bound on the slope of any core-selecting rule.
    Lowerbound(LowerboundArgs),
    /// Run the invariant checks on an instance or star.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Instance or star JSON.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the main result (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Tie policy: `lex` or `prefer:<id>,<id>,...`.
    #[arg(long, default_value = "lex")]
    tie: String,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_rule)]
    rule: PaymentRule,
    /// Include the generated core constraints in the output.
    #[arg(long)]
    dump_core: bool,
    /// KKT tolerance for the projection certificate.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_rule)]
    rule: PaymentRule,
    /// Buyer whose bid moves.
    #[arg(long)]
    buyer: String,
    #[arg(long, value_parser = parse_money)]
    from: Money,
    #[arg(long, value_parser = parse_money)]
    to: Money,
    /// Grid step (default: a 200th of the range).
    #[arg(long, value_parser = parse_money)]
    step: Option<Money>,
    /// Worker threads for grid evaluation (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct StarSweepArgs {
    /// Star JSON.
    #[arg(long)]
    input: PathBuf,
    /// Curve CSV destination (stdout when absent; the report then goes to stderr).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_rule)]
    rule: PaymentRule,
    #[arg(long, value_parser = parse_money)]
    theta_max: Money,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long)]
    w: usize,
    #[arg(long, value_parser = parse_money)]
    delta: Money,
    #[arg(long, value_parser = parse_rule)]
    rule: PaymentRule,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// θ range for star inputs (default: covers every breakpoint).
    #[arg(long, value_parser = parse_money)]
    theta_max: Option<Money>,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

fn parse_rule(s: &str) -> Result<PaymentRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_money(s: &str) -> Result<Money, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    extra: Value,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind: "parse",
            message: message.into(),
            extra: Value::Null,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (code, kind, extra) = match &e {
            Error::InvalidInput(_) => (1, "invalid-input", Value::Null),
            Error::Precondition(_) => (2, "precondition", Value::Null),
            Error::ResourceLimit { limit, .. } => (2, "resource-limit", json!({ "limit": limit })),
            Error::BoundaryPoint { theta, .. } => (2, "boundary-point", json!({ "theta": theta })),
            Error::RangeInvalid { crossing_bid } => (2, "range-invalid", json!({ "crossing_bid": crossing_bid })),
            Error::Construction(_) => (2, "construction", Value::Null),
            Error::NumericalFailure { best, residual, .. } => (
                3,
                "numerical-failure",
                json!({ "best": best, "residual": sci(*residual) }),
            ),
        };
        Failure {
            code,
            kind,
            message,
            extra,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// Fixed-point decimal with at most nine fractional digits.
fn dec(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn sci(x: f64) -> String {
    // drop the sign of negative zero
    format!("{:.3e}", x + 0.0)
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Outcome<AuctionInstance> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn load_star(path: &Path) -> Outcome<StarInstance> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn parse_tie(instance: &AuctionInstance, s: &str) -> Outcome<TieBreakPolicy> {
    if s == "lex" {
        return Ok(TieBreakPolicy::Lexicographic);
    }
    let Some(ids) = s.strip_prefix("prefer:") else {
        return Err(Failure::parse(format!("tie policy must be `lex` or `prefer:<ids>`, got {s:?}")));
    };
    let ids: Vec<&str> = ids.split(',').filter(|x| !x.is_empty()).collect();
    Ok(TieBreakPolicy::PreferCoalition(instance.coalition_from_ids(&ids)?))
}

fn emit(path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::parse(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::parse(e.to_string()))
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn set_jobs(jobs: Option<usize>) -> Outcome<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::parse("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::parse(e.to_string()))?;
    }
    Ok(())
}

fn certificate_json(c: &KKTCertificate, tol: f64) -> Value {
    json!({
        "stationarity": sci(c.stationarity_residual),
        "primal": sci(c.primal_residual),
        "complementary_slackness": sci(c.comp_slack_residual),
        "dual": sci(c.dual_residual),
        "holds": c.holds(tol),
    })
}

fn constraints_json(instance: &AuctionInstance, winners: &Coalition, rows: &[CoreConstraint]) -> Value {
    let ids = winners.ids(instance);
    rows.iter()
        .map(|r| {
            let lhs: Vec<&str> = ids.iter().zip(&r.indicator).filter(|(_, on)| **on).map(|(id, _)| *id).collect();
            json!({ "coalition": r.coalition, "paying_winners": lhs, "rhs": r.rhs })
        })
        .collect()
}

fn prices_json(instance: &AuctionInstance, winners: &Coalition, prices: &[f64]) -> Value {
    winners
        .ids(instance)
        .iter()
        .zip(prices)
        .map(|(id, p)| json!({ "buyer": id, "price": dec(*p) }))
        .collect()
}

fn solve(a: &SolveArgs) -> Outcome<()> {
    let inst = load_instance(&a.common.input)?;
    let tie = parse_tie(&inst, &a.common.tie)?;
    let sol = solve_wdp(&inst, &tie)?;
    let out = json!({ "winners": sol.winners.ids(&inst), "welfare": sol.welfare });
    emit(a.common.output.as_deref(), &pretty(&out))
}

fn price(a: &PriceArgs) -> Outcome<()> {
    let inst = load_instance(&a.common.input)?;
    let tie = parse_tie(&inst, &a.common.tie)?;
    let w = solve_wdp(&inst, &tie)?.winners;
    let v = vickrey_prices(&inst, &w)?;
    let vf: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();
    let opts = ProjectionOptions {
        kkt_tol: a.tolerance,
        ..ProjectionOptions::default()
    };
    let mut out = json!({
        "rule": a.rule,
        "winners": w.ids(&inst),
        "vickrey": v,
    });
    let (prices, extra) = match a.rule {
        PaymentRule::Vickrey => (vf.clone(), json!({})),
        PaymentRule::QuadCore => {
            let r = project_onto_core_with(&inst, &w, &vf, &opts)?;
            let mut extra = json!({
                "certificate": certificate_json(&r.certificate, a.tolerance),
                "separation_rounds": r.separation_rounds,
                "multipliers_nonunique": r.multipliers_nonunique,
            });
            if a.dump_core {
                extra["core_constraints"] = constraints_json(&inst, &w, &r.polytope.constraints);
            }
            (r.prices, extra)
        }
        PaymentRule::MrcQuad => {
            let r = mrc_quadratic_price_with(&inst, &w, &vf, &opts)?;
            let mut extra = json!({
                "min_revenue": dec(r.min_revenue),
                "revenue_gap": sci(r.revenue_certificate.gap()),
                "certificate": certificate_json(&r.certificate, a.tolerance),
                "separation_rounds": r.separation_rounds,
            });
            if a.dump_core {
                extra["core_constraints"] = constraints_json(&inst, &w, &r.revenue_certificate.generated_constraints);
            }
            (r.prices, extra)
        }
    };
    out["prices"] = prices_json(&inst, &w, &prices);
    out["revenue"] = json!(dec(prices.iter().sum()));
    if let (Value::Object(o), Value::Object(e)) = (&mut out, extra) {
        o.extend(e);
    }
    emit(a.common.output.as_deref(), &pretty(&out))
}

/// Writes the curve CSV and the report; the report goes to stdout unless
/// the CSV already took it.
fn emit_curve(output: Option<&Path>, csv: &str, report: &Value) -> Outcome<()> {
    match output {
        Some(p) => {
            emit(Some(p), csv)?;
            emit(None, &pretty(report))
        }
        None => {
            emit(None, csv)?;
            eprint!("{}", pretty(report));
            Ok(())
        }
    }
}

fn sweep(a: &SweepArgs) -> Outcome<()> {
    set_jobs(a.jobs)?;
    let inst = load_instance(&a.common.input)?;
    let tie = parse_tie(&inst, &a.common.tie)?;
    let curve = sweep_generic_curve(
        &inst,
        &GenericSweep {
            buyer: a.buyer.clone(),
            from: a.from,
            to: a.to,
            step: a.step,
            rule: a.rule,
            tie,
        },
    )?;
    let report = serde_json::to_value(compute_mid(&curve)).expect("serializable report");
    emit_curve(a.common.output.as_deref(), &curve.to_csv(), &report)
}

fn star_sweep(a: &StarSweepArgs) -> Outcome<()> {
    set_jobs(a.jobs)?;
    let star = load_star(&a.input)?;
    if a.theta_max <= Money::ZERO {
        return Err(Failure::parse("--theta-max must be positive"));
    }
    let curve = sweep_star_curve(&star, a.theta_max.to_f64(), a.rule)?;
    let report = serde_json::to_value(compute_mid(&curve)).expect("serializable report");
    emit_curve(a.output.as_deref(), &curve.to_csv(), &report)
}

fn lowerbound(a: &LowerboundArgs) -> Outcome<()> {
    let sc = generate_lower_bound_scenario(a.w, a.delta)?;
    let r = coreprice::verify_lower_bound(&sc, a.rule)?;
    let mut out = serde_json::to_value(&r).expect("serializable report");
    out["holds"] = json!(r.holds(a.tolerance));
    out["scenario_two"] = serde_json::to_value(&sc.scenario_two).expect("serializable instance");
    emit(a.output.as_deref(), &pretty(&out))
}

/// Default θ range for star validation: past every Vickrey breakpoint and
/// the minimum-revenue threshold.
fn star_theta_max(star: &StarInstance) -> f64 {
    let mut t = 1.0f64;
    for j in 0..star.n_bundles() {
        t = t.max((star.max_delta(j) - star.eta(j)).to_f64() * 1.5);
    }
    if let Some(v2) = star.second_threshold() {
        t = t.max((v2 - star.v0()).to_f64() * 1.5);
    }
    t
}

fn validate(a: &ValidateArgs) -> Outcome<bool> {
    let text = read(&a.common.input)?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", a.common.input.display())))?;
    let (kind, checks) = if raw.get("bundles").is_some() {
        let star: StarInstance = serde_json::from_value(raw).map_err(|e| Failure::parse(e.to_string()))?;
        let tmax = a.theta_max.map_or_else(|| star_theta_max(&star), |m| m.to_f64());
        ("star", validate_star(&star, tmax, a.tolerance)?)
    } else {
        let inst: AuctionInstance = serde_json::from_value(raw).map_err(|e| Failure::parse(e.to_string()))?;
        let tie = parse_tie(&inst, &a.common.tie)?;
        ("instance", validate_instance(&inst, &tie, a.tolerance)?)
    };
    let passed = all_passed(&checks);
    let out = json!({ "kind": kind, "passed": passed, "checks": checks });
    emit(a.common.output.as_deref(), &pretty(&out))?;
    Ok(passed)
}

fn check_tolerance(tol: f64) -> Outcome<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Failure::parse("--tolerance must be positive"))
    }
}

fn run(cli: &Cli) -> Outcome<bool> {
    match &cli.command {
        Command::Price(PriceArgs { tolerance, .. })
        | Command::Lowerbound(LowerboundArgs { tolerance, .. })
        | Command::Validate(ValidateArgs { tolerance, .. }) => check_tolerance(*tolerance)?,
        _ => {}
    }
    match &cli.command {
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Price(a) => price(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::StarSweep(a) => star_sweep(a).map(|_| true),
        Command::Lowerbound(a) => lowerbound(a).map(|_| true),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::parse(e.to_string().trim_end().to_string());
            eprintln!("{}", json!({ "error": { "kind": f.kind, "message": f.message } }));
            return ExitCode::from(f.code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(f) => {
            let mut err = json!({ "kind": f.kind, "message": f.message });
            if let Value::Object(extra) = f.extra {
                err.as_object_mut().unwrap().extend(extra);
            }
            eprintln!("{}", json!({ "error": err }));
            ExitCode::from(f.code)
        }
    }
}
