//! Command-line front end: construct codes, run conversions, sweep the
//! savings table and run the verification suite.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base_convertible::{AccessOptimalPair, MergeParams, PairDoc, SearchOptions};
use crate::bounds::{self, Rational};
use crate::cluster::{self, NodeStore};
use crate::error::{Error, Result};
use crate::flow::{self, Layout};
use crate::galois::Elem;
use crate::linear_code::{CodeDoc, Codeword, VectorCode};
use crate::piggyback::{BandwidthOptimalCode, MultiTargetCode, PiggybackCode, PiggybackTerm, Regime};
use crate::trace::{ConversionTrace, TraceSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
const EXIT_OTHER: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "convcode", version, about = "Bandwidth-efficient convertible erasure codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a code and write its JSON description.
    Construct(ConstructArgs),
    /// Merge randomly filled stripes and report the bandwidth used.
    Convert(ConvertArgs),
    /// Write the savings table over a grid of normalized parity counts.
    Sweep(SweepArgs),
    /// Run the verification suite, or check a code description.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CodeArgs {
    #[arg(long)]
    pub ki: Option<usize>,
    #[arg(long)]
    pub ri: Option<usize>,
    /// Final parity count.
    #[arg(long)]
    pub rf: Option<usize>,
    /// Comma-separated final parity counts for a multi-target code.
    #[arg(long, value_delimiter = ',')]
    pub rf_set: Option<Vec<usize>>,
    #[arg(long)]
    pub sigma: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Smallest field width tried (4, 8 or 16).
    #[arg(long, default_value_t = 8)]
    pub field_width: u8,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Code description from `construct`, used instead of building a code.
    #[arg(long = "code")]
    pub spec: Option<PathBuf>,
    /// Payload bytes per subsymbol position; a multiple of the subsymbol size.
    #[arg(long)]
    pub payload_bytes: Option<usize>,
    /// Directory for the chunk store, trace and transfer log.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Grid spacing is 1/denominator.
    #[arg(long, default_value_t = 50)]
    pub denominator: usize,
    /// Also convert real codes with this kI at every integral grid point.
    #[arg(long)]
    pub cross_check_ki: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub field_width: u8,
    /// Check this code description instead of running the suite.
    #[arg(long = "code")]
    pub spec: Option<PathBuf>,
    /// Compare equal per-node downloads against the optimum.
    #[arg(long)]
    pub uniform: bool,
    #[arg(long, default_value_t = 4)]
    pub ki: usize,
    #[arg(long, default_value_t = 1)]
    pub ri: usize,
    #[arg(long, default_value_t = 2)]
    pub rf: usize,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParams(_)
        | Error::Regime(_)
        | Error::UnsupportedTarget(_)
        | Error::UnsupportedWidth(_)
        | Error::InvalidModulus { .. } => EXIT_INVALID,
        Error::Internal(_) | Error::Malformed(_) | Error::InvalidStripe(_) => EXIT_VERIFY,
        _ => EXIT_OTHER,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Construct(args) => cmd_construct(&args, out),
        Command::Convert(args) => cmd_convert(&args, out),
        Command::Sweep(args) => cmd_sweep(&args, out),
        Command::Verify(args) => cmd_verify(&args, out),
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn search_options(width: u8) -> Result<SearchOptions> {
    if ![4, 8, 16].contains(&width) {
        return Err(Error::UnsupportedWidth(width));
    }
    Ok(SearchOptions {
        start_width: width,
        ..Default::default()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKind {
    BandwidthOptimal,
    MultiTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdsSummary {
    pub code: String,
    pub subsets_checked: usize,
    pub mds: bool,
}

/// JSON description of a constructed code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub kind: CodeKind,
    pub k_initial: usize,
    pub r_initial: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_final: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported_r: Option<Vec<usize>>,
    pub sigma: usize,
    pub seed: u64,
    pub field_width: u8,
    pub alpha: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    pub initial: CodeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_code: Option<CodeDoc>,
    pub piggybacks: Vec<PiggybackTerm>,
    pub mds: Vec<MdsSummary>,
    pub base: PairDoc,
}

/// A code rebuilt from its description.
#[derive(Debug, Clone)]
pub enum LoadedCode {
    Single(BandwidthOptimalCode),
    Multi(MultiTargetCode),
}

impl LoadedCode {
    pub fn code(&self) -> &PiggybackCode {
        match self {
            LoadedCode::Single(c) => c.code(),
            LoadedCode::Multi(c) => c.code(),
        }
    }

    /// Final code for a target, after checking the target is supported.
    pub fn final_code(&self, chosen_r: usize, chosen_sigma: usize) -> Result<VectorCode> {
        match self {
            LoadedCode::Single(c) => {
                let p = c.params();
                if chosen_r != p.r_final || chosen_sigma != p.sigma {
                    return Err(Error::UnsupportedTarget(format!(
                        "code converts to rF = {} over {} stripes only",
                        p.r_final, p.sigma
                    )));
                }
                Ok(c.final_code().clone())
            }
            LoadedCode::Multi(c) => c.final_code(chosen_r, chosen_sigma),
        }
    }

    pub fn convert(&self, stripes: &[Codeword], chosen_r: usize, chosen_sigma: usize) -> Result<(Codeword, ConversionTrace)> {
        match self {
            LoadedCode::Single(c) => {
                self.final_code(chosen_r, chosen_sigma)?;
                c.convert(stripes)
            }
            LoadedCode::Multi(c) => c.convert_multi(stripes, chosen_r, chosen_sigma),
        }
    }
}

impl CodeSpec {
    pub fn from_single(code: &BandwidthOptimalCode, seed: u64) -> CodeSpec {
        let p = code.params();
        let (initial, fin) = code.mds_reports();
        CodeSpec {
            kind: CodeKind::BandwidthOptimal,
            k_initial: p.k_initial,
            r_initial: p.r_initial,
            r_final: Some(p.r_final),
            supported_r: None,
            sigma: p.sigma,
            seed,
            field_width: code.initial().field().width(),
            alpha: code.alpha(),
            regime: Some(code.regime()),
            initial: code.initial().to_doc(),
            final_code: Some(code.final_code().to_doc()),
            piggybacks: code.piggybacks().to_vec(),
            mds: vec![
                MdsSummary {
                    code: "initial".into(),
                    subsets_checked: initial.subsets_checked,
                    mds: initial.is_mds(),
                },
                MdsSummary {
                    code: "final".into(),
                    subsets_checked: fin.subsets_checked,
                    mds: fin.is_mds(),
                },
            ],
            base: code.base().to_doc(),
        }
    }

    pub fn from_multi(code: &MultiTargetCode, seed: u64) -> Result<CodeSpec> {
        let inner = code.code();
        let report = code.initial().mds_report();
        let mut mds = vec![MdsSummary {
            code: "initial".into(),
            subsets_checked: report.subsets_checked,
            mds: report.is_mds(),
        }];
        for &r in code.supported_r() {
            let fin = code.final_code(r, code.sigma_max())?.mds_report();
            mds.push(MdsSummary {
                code: format!("final r={r}"),
                subsets_checked: fin.subsets_checked,
                mds: fin.is_mds(),
            });
        }
        Ok(CodeSpec {
            kind: CodeKind::MultiTarget,
            k_initial: inner.k_initial(),
            r_initial: inner.r_initial(),
            r_final: None,
            supported_r: Some(code.supported_r().to_vec()),
            sigma: code.sigma_max(),
            seed,
            field_width: code.initial().field().width(),
            alpha: code.alpha(),
            regime: None,
            initial: code.initial().to_doc(),
            final_code: None,
            piggybacks: inner.piggybacks().to_vec(),
            mds,
            base: inner.base().to_doc(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<CodeSpec> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the code from the base pair and checks that the embedded
    /// generators match it.
    pub fn rebuild(&self) -> Result<LoadedCode> {
        let base = AccessOptimalPair::from_doc(&self.base)?;
        let loaded = match self.kind {
            CodeKind::BandwidthOptimal => {
                let r_final = self
                    .r_final
                    .ok_or_else(|| Error::Malformed("missing r_final".into()))?;
                let params = MergeParams::new(self.k_initial, self.r_initial, r_final, self.sigma)?;
                LoadedCode::Single(BandwidthOptimalCode::from_base(params, base)?)
            }
            CodeKind::MultiTarget => {
                let supported = self
                    .supported_r
                    .as_ref()
                    .ok_or_else(|| Error::Malformed("missing supported_r".into()))?;
                LoadedCode::Multi(MultiTargetCode::from_base(self.r_initial, supported, base)?)
            }
        };
        if loaded.code().initial().to_doc() != self.initial {
            return Err(Error::Malformed("initial generator does not match the base pair".into()));
        }
        if let (LoadedCode::Single(c), Some(doc)) = (&loaded, &self.final_code) {
            if &c.final_code().to_doc() != doc {
                return Err(Error::Malformed("final generator does not match the base pair".into()));
            }
        }
        Ok(loaded)
    }
}

fn require(value: Option<usize>, flag: &str) -> Result<usize> {
    value.ok_or_else(|| Error::InvalidParams(format!("--{flag} is required")))
}

/// Builds the code described by the flags. With `--rf-set`, a multi-target
/// code; otherwise a single-target one.
fn build_code(args: &CodeArgs, err: &mut dyn Write) -> Result<(LoadedCode, CodeSpec)> {
    let options = search_options(args.field_width)?;
    let ki = require(args.ki, "ki")?;
    let ri = require(args.ri, "ri")?;
    let sigma = require(args.sigma, "sigma")?;
    match (&args.rf_set, args.rf) {
        (Some(set), _) => {
            let code = MultiTargetCode::construct(ki, ri, sigma, set, args.seed, options)?;
            let spec = CodeSpec::from_multi(&code, args.seed)?;
            Ok((LoadedCode::Multi(code), spec))
        }
        (None, Some(rf)) => {
            let params = MergeParams::new(ki, ri, rf, sigma)?;
            let regime = Regime::classify(ki, ri, rf);
            match regime {
                Regime::Reencode => writeln!(
                    err,
                    "note: rF = {rf} >= kI = {ki}, using the default conversion (read all data, re-encode)"
                )?,
                Regime::ParityOnly => writeln!(
                    err,
                    "note: rF = {rf} <= rI = {ri}, conversion reads parities only"
                )?,
                Regime::Piggyback => {}
            }
            let code = BandwidthOptimalCode::construct(params, args.seed, options)?;
            let spec = CodeSpec::from_single(&code, args.seed);
            Ok((LoadedCode::Single(code), spec))
        }
        (None, None) => Err(Error::InvalidParams("one of --rf or --rf-set is required".into())),
    }
}

fn cmd_construct(args: &ConstructArgs, out: &mut dyn Write) -> Result<i32> {
    let (_, spec) = build_code(&args.code, &mut std::io::stderr())?;
    emit(out, args.out.as_deref(), &spec.to_json()?)?;
    Ok(EXIT_OK)
}

fn random_messages(code: &VectorCode, stripes: usize, units: usize, seed: u64) -> Vec<Vec<Elem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = code.field().order();
    let len = code.k() * code.alpha() * units;
    (0..stripes)
        .map(|_| (0..len).map(|_| rng.gen_range(0..order) as Elem).collect())
        .collect()
}

/// Unit `p` of every stripe concatenated, for each unit in turn.
fn merged_message(messages: &[Vec<Elem>], units: usize) -> Vec<Elem> {
    let block = messages[0].len() / units;
    (0..units)
        .flat_map(|p| messages.iter().flat_map(move |m| m[p * block..(p + 1) * block].iter().copied()))
        .collect()
}

fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write) -> Result<i32> {
    let (loaded, spec) = match &args.spec {
        Some(path) => {
            let spec = CodeSpec::from_json(&fs::read_to_string(path)?)?;
            (spec.rebuild()?, spec)
        }
        None => build_code(&args.code, &mut std::io::stderr())?,
    };
    let chosen_r = match args.code.rf.or(spec.r_final) {
        Some(r) => r,
        None => return Err(Error::InvalidParams("--rf is required for a multi-target code".into())),
    };
    let chosen_sigma = args.code.sigma.unwrap_or(spec.sigma);
    let initial = loaded.code().initial().clone();
    let final_code = loaded.final_code(chosen_r, chosen_sigma)?;
    let subsymbol_bytes = if initial.field().width() > 8 { 2 } else { 1 };
    let payload = args.payload_bytes.unwrap_or(subsymbol_bytes);
    if payload == 0 || !payload.is_multiple_of(subsymbol_bytes) {
        return Err(Error::InvalidParams(format!(
            "payload bytes must be a positive multiple of {subsymbol_bytes}"
        )));
    }
    let units = payload / subsymbol_bytes;
    let messages = random_messages(&initial, chosen_sigma, units, args.code.seed);
    let expected = merged_message(&messages, units);

    let (trace, recovered) = match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let store_root = dir.join("store");
            if store_root.exists() {
                fs::remove_dir_all(&store_root)?;
            }
            let store = NodeStore::create(&store_root, initial.field().width(), initial.alpha(), units)?;
            let manifest = cluster::write_stripes(&store, &initial, &messages)?;
            let (log, fin) = cluster::run_conversion(&store, &manifest, loaded.code(), chosen_r, chosen_sigma)?;
            log.write_csv(fs::File::create(dir.join("transfers.csv"))?)?;
            let trace = loaded.code().plan(chosen_r, chosen_sigma)?.trace();
            let recovered = cluster::failure_drill(&store, &fin, &final_code, &[])?;
            (trace, recovered.into_iter().next().unwrap_or_default())
        }
        None => {
            let block = initial.k() * initial.alpha();
            let mut recovered = Vec::with_capacity(expected.len());
            let mut trace = None;
            for p in 0..units {
                let stripes: Vec<Codeword> = messages
                    .iter()
                    .map(|m| initial.encode(&m[p * block..(p + 1) * block]))
                    .collect::<Result<_>>()?;
                let (word, t) = loaded.convert(&stripes, chosen_r, chosen_sigma)?;
                let picks: Vec<usize> = (0..final_code.k()).collect();
                recovered.extend(final_code.decode_from(&picks, &word.symbols[..final_code.k()])?);
                trace = Some(t);
            }
            (trace.expect("at least one unit"), recovered)
        }
    };
    if recovered != expected {
        return Err(Error::Internal("converted stripe does not decode to the original data".into()));
    }
    let summary = trace.summary(spec.k_initial, spec.r_initial, chosen_r, chosen_sigma);
    let json = summary_json(&summary)?;
    if let Some(dir) = &args.out {
        trace.write_csv(fs::File::create(dir.join("trace.csv"))?)?;
        fs::write(dir.join("summary.json"), &json)?;
    }
    out.write_all(json.as_bytes())?;
    Ok(EXIT_OK)
}

fn summary_json(summary: &TraceSummary) -> Result<String> {
    Ok(serde_json::to_string(summary)? + "\n")
}

/// The default grid: `i/denominator` for `i = 1..=points`.
pub fn grid(points: usize, denominator: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / denominator as f64).collect()
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    if args.points == 0 || args.denominator == 0 {
        return Err(Error::InvalidParams("grid needs positive points and denominator".into()));
    }
    let axis = grid(args.points, args.denominator);
    let points = bounds::sweep_savings(&axis, &axis);
    let mut csv = Vec::new();
    bounds::write_savings_csv(&points, &mut csv)?;
    emit(out, args.out.as_deref(), &String::from_utf8_lossy(&csv))?;
    if let Some(ki) = args.cross_check_ki {
        let failures = cross_check_sweep(ki, args, &mut std::io::stderr())?;
        if failures > 0 {
            return Ok(EXIT_VERIFY);
        }
    }
    Ok(EXIT_OK)
}

/// Converts a real code at every grid point where `r̃·kI` is a whole number
/// and compares the measured read savings with the closed form.
fn cross_check_sweep(ki: usize, args: &SweepArgs, err: &mut dyn Write) -> Result<usize> {
    if ki < 2 {
        return Err(Error::InvalidParams("cross-check needs kI >= 2".into()));
    }
    let (points, den) = (args.points, args.denominator);
    let integral: Vec<usize> = (1..=points)
        .filter(|&i| (i * ki).is_multiple_of(den))
        .map(|i| i * ki / den)
        .collect();
    let mut failures = 0;
    for (&ri, &rf) in integral.iter().cartesian_product(&integral) {
        let params = MergeParams::new(ki, ri, rf, 2)?;
        let code = BandwidthOptimalCode::construct(params, args.seed, SearchOptions::default())?;
        let trace = code.plan()?.trace();
        let alpha = code.alpha() as i64;
        let read = Rational::from_integer(trace.total_read() as i64);
        let measured = Rational::from_integer(1) - read / Rational::from_integer(2 * ki as i64 * alpha);
        let k = ki as i64;
        let expected = bounds::savings_ratio_exact(Rational::new(ri as i64, k), Rational::new(rf as i64, k));
        let ok = measured == expected;
        failures += usize::from(!ok);
        writeln!(
            err,
            "{} cross-check kI={ki} rI={ri} rF={rf}: measured {measured}, formula {expected}",
            if ok { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(failures)
}

/// Collects PASS/FAIL lines.
#[derive(Debug, Default)]
struct Report {
    lines: Vec<String>,
    failures: usize,
}

impl Report {
    fn check(&mut self, ok: bool, what: String) {
        self.failures += usize::from(!ok);
        self.lines.push(format!("{} {what}", if ok { "PASS" } else { "FAIL" }));
    }

    fn outcome(&mut self, what: String, result: Result<bool>) {
        match result {
            Ok(ok) => self.check(ok, what),
            Err(e) => self.check(false, format!("{what}: {e}")),
        }
    }

    fn finish(mut self) -> (String, i32) {
        let total = self.lines.len();
        self.lines.push(format!("{total} checks, {} failed", self.failures));
        let code = if self.failures == 0 { EXIT_OK } else { EXIT_VERIFY };
        (self.lines.join("\n") + "\n", code)
    }
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let mut report = Report::default();
    if let Some(path) = &args.spec {
        verify_spec(&fs::read_to_string(path)?, &mut report);
    } else if args.uniform {
        verify_uniform(args.ki, args.ri, args.rf, &mut report)?;
    } else {
        verify_suite(args.seed, search_options(args.field_width)?, &mut report);
    }
    let (text, code) = report.finish();
    emit(out, args.out.as_deref(), &text)?;
    Ok(code)
}

fn verify_spec(text: &str, report: &mut Report) {
    let spec = match CodeSpec::from_json(text) {
        Ok(spec) => spec,
        Err(e) => return report.check(false, format!("parse code description: {e}")),
    };
    let mut docs = vec![("initial", &spec.initial)];
    if let Some(doc) = &spec.final_code {
        docs.push(("final", doc));
    }
    for (name, doc) in docs {
        report.outcome(
            format!("mds {name} code"),
            VectorCode::from_doc(doc).map(|c| {
                let r = c.mds_report();
                r.is_mds()
            }),
        );
    }
    report.outcome("rebuild from base pair".into(), spec.rebuild().map(|_| true));
}

/// Equal downloads from every node of a stable stripe against the optimum,
/// both from the closed forms and from the flow oracle.
fn verify_uniform(ki: usize, ri: usize, rf: usize, report: &mut Report) -> Result<()> {
    let params = MergeParams::new(ki, ri, rf, 2)?;
    let uniform = bounds::uniform_download_bound(ki, ri, rf, 1).per_stripe;
    let optimal = bounds::optimal_stripe_read(ki, ri, rf, 1);
    report.check(
        uniform > optimal,
        format!("uniform per-stripe read {uniform}·α exceeds optimal {optimal}·α at kI={ki} rI={ri} rF={rf}"),
    );

    // Smallest α making both per-node reads whole numbers.
    let per_node = bounds::uniform_download_bound(ki, ri, rf, 1).per_node;
    let alpha = num_lcm(*per_node.denom(), *optimal.denom() * ki as i64) as usize;
    let layout = Layout::stable(&params);
    let n = params.n_initial();
    let mut min_uniform = None;
    for b in 0..=alpha {
        if flow::verify_feasibility(&layout, alpha, &vec![vec![b; n]; 2])? {
            min_uniform = Some(b);
            break;
        }
    }
    let want = per_node * Rational::from_integer(alpha as i64);
    report.check(
        min_uniform.map(|b| Rational::from_integer(b as i64)) == Some(want),
        format!("flow oracle: smallest equal download at α={alpha} is {min_uniform:?}, closed form {want}"),
    );
    let lp = bounds::solve_merge_lp(ki, &[ki], &[ri], &[rf.min(ki)], alpha, 0)?;
    let stripe = &lp.stripes[0];
    let retired = stripe.retired / Rational::from_integer(ri as i64);
    let unchanged = stripe.unchanged / Rational::from_integer(ki as i64);
    let whole = retired.is_integer() && unchanged.is_integer();
    let mut optimal_ok = false;
    if whole {
        let row: Vec<usize> = (0..n)
            .map(|i| if i < ki { unchanged } else { retired }.to_integer() as usize)
            .collect();
        optimal_ok = flow::verify_feasibility(&layout, alpha, &[row.clone(), row])?;
    }
    report.check(
        optimal_ok,
        format!(
            "flow oracle: unequal downloads ({unchanged} per unchanged, {retired} per retired node) reading {} per stripe are feasible at α={alpha}",
            stripe.total()
        ),
    );
    Ok(())
}

fn num_lcm(a: i64, b: i64) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// MDS, round-trip, bound, flow and program checks on small parameters.
fn verify_suite(seed: u64, options: SearchOptions, report: &mut Report) {
    for ki in 2..=4 {
        for ri in 1..=2 {
            for rf in 1..ki.min(4) {
                let label = format!("kI={ki} rI={ri} rF={rf} sigma=2");
                match suite_point(ki, ri, rf, seed, options) {
                    Ok(checks) => {
                        for (what, ok) in checks {
                            report.check(ok, format!("{what} {label}"));
                        }
                    }
                    Err(e) => report.check(false, format!("{label}: {e}")),
                }
            }
        }
    }
    for (ki, ri, rf, alpha) in [(2, 1, 2, 2), (3, 1, 2, 2), (3, 2, 1, 1), (2, 2, 3, 1)] {
        let what = format!("program vs exhaustive search kI={ki} rI={ri} rF={rf} alpha={alpha}");
        let result = (|| {
            let params = MergeParams::new(ki, ri, rf, 2)?;
            let found = flow::min_bandwidth_search(&Layout::stable(&params), alpha, 1_000_000)?;
            let lp = bounds::solve_merge_lp(ki, &[ki; 2], &[ri; 2], &[rf.min(ki); 2], alpha, rf)?;
            Ok(lp.gamma == Rational::from_integer(found.gamma as i64)
                && lp.gamma == bounds::merge_bandwidth_lower_bound(ki, ri, rf, 2, alpha))
        })();
        report.outcome(what, result);
    }
}

fn suite_point(ki: usize, ri: usize, rf: usize, seed: u64, options: SearchOptions) -> Result<Vec<(&'static str, bool)>> {
    let params = MergeParams::new(ki, ri, rf, 2)?;
    let code = BandwidthOptimalCode::construct(params, seed, options)?;
    let mut checks = Vec::new();
    let (a, b) = code.mds_reports();
    checks.push(("mds", a.is_mds() && b.is_mds()));

    let fin = code.final_code();
    let messages = random_messages(code.initial(), 2, 10, seed);
    let block = ki * code.alpha();
    let mut round_trip = true;
    let mut trace = None;
    for p in 0..10 {
        let stripes: Vec<Codeword> = messages
            .iter()
            .map(|m| code.initial().encode(&m[p * block..(p + 1) * block]))
            .collect::<Result<_>>()?;
        let (word, t) = code.convert(&stripes)?;
        let expected: Vec<Elem> = messages.iter().flat_map(|m| m[p * block..(p + 1) * block].to_vec()).collect();
        for picks in (0..fin.n()).combinations(fin.k()) {
            let chunks: Vec<Vec<Elem>> = picks.iter().map(|&i| word.symbols[i].clone()).collect();
            round_trip &= fin.decode_from(&picks, &chunks)? == expected;
        }
        trace = Some(t);
    }
    checks.push(("round-trip", round_trip));
    let trace = trace.expect("ten conversions");
    let bound = bounds::merge_bandwidth_lower_bound(ki, ri, rf, 2, code.alpha());
    checks.push(("bound", Rational::from_integer(trace.gamma() as i64) == bound));
    if ki <= 3 {
        let layout = Layout::stable(&params);
        let downloads = flow::downloads_from_trace(&trace, &layout);
        checks.push(("flow", flow::verify_feasibility(&layout, code.alpha(), &downloads)?));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (Result<i32>, String) {
        let cli = Cli::try_parse_from(std::iter::once("convcode").chain(args.iter().copied())).unwrap();
        let mut out = Vec::new();
        let code = run(cli, &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn example_convert_summary() {
        let (code, out) = run_args(&["convert", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "2"]);
        assert_eq!(code.unwrap(), EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["gamma"], 16);
        assert_eq!(v["bound"], 16);
        assert_eq!(v["optimal"], true);
        assert_eq!(v["savings_vs_default"], 0.2);
    }

    #[test]
    fn spec_round_trip_and_tamper() {
        let (code, out) = run_args(&["construct", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "2"]);
        assert_eq!(code.unwrap(), EXIT_OK);
        let spec = CodeSpec::from_json(&out).unwrap();
        assert_eq!(spec.alpha, 2);
        assert_eq!(spec.regime, Some(Regime::Piggyback));
        spec.rebuild().unwrap();

        let mut report = Report::default();
        verify_spec(&out, &mut report);
        assert_eq!(report.failures, 0, "{:?}", report.lines);

        let mut tampered = spec.clone();
        let row = &mut tampered.initial.gen_hex[0];
        row.replace_range(0..2, "00");
        let mut report = Report::default();
        verify_spec(&tampered.to_json().unwrap(), &mut report);
        assert!(report.lines[0].starts_with("FAIL mds initial"), "{:?}", report.lines);
        assert!(report.failures >= 2);
    }

    #[test]
    fn sweep_rows() {
        let (code, out) = run_args(&["sweep"]);
        assert_eq!(code.unwrap(), EXIT_OK);
        assert_eq!(out.lines().count(), 10_001);
        assert!(out.lines().any(|l| l == "1,0.5,0.5,1"));
    }

    #[test]
    fn uniform_report() {
        let mut report = Report::default();
        verify_uniform(4, 1, 2, &mut report).unwrap();
        assert_eq!(report.failures, 0, "{:?}", report.lines);
        assert!(report.lines[0].contains("10/3·α exceeds optimal 3·α"));
    }

    #[test]
    fn invalid_params_map_to_exit_two() {
        let (code, _) = run_args(&["construct", "--ki", "4", "--ri", "1", "--sigma", "2"]);
        assert_eq!(exit_code(&code.unwrap_err()), EXIT_INVALID);
        let (code, _) = run_args(&["construct", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "1"]);
        assert_eq!(exit_code(&code.unwrap_err()), EXIT_INVALID);
    }
}
