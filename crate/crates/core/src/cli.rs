//! Command-line front end: argument parsing, the six subcommands and their
//! text and machine (JSON) reports.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coframe::ExportedForm;
use crate::congruence::{self, CheckOptions, CongruenceVerdict};
use crate::error::{Error, Result};
use crate::frame::{FrameReport, FreedomReport, MovingFrame};
use crate::group::StructureReport;
use crate::problem::{self, Pipeline, Problem, Stage};
use crate::selftest::{self, SelftestReport};

/// Exit status for malformed input (files, expressions or arguments).
pub const EXIT_MALFORMED: i32 = 64;
/// Exit status for unreadable input files.
pub const EXIT_NO_INPUT: i32 = 66;
/// Exit status for every other failure.
pub const EXIT_SOFTWARE: i32 = 70;

#[derive(Parser, Debug)]
#[command(name = "jetframe", version, about = "Moving-frame invariants and congruence checks for immersions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Also write the machine report to this file.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for every random choice (sampling points, multi-start).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance: congruence decision for `check`, invariance for
    /// `selftest` and frame verification.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Sampling box `LO,HI` for jet coordinates.
    #[arg(long = "box", global = true, value_name = "LO,HI")]
    pub sample_box: Option<SampleBox>,
    /// Prolongation order, overriding the problem file.
    #[arg(long, global = true)]
    pub order: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the prolonged action.
    Prolong { problem: PathBuf },
    /// Solve (or check) the moving frame.
    Frame { problem: PathBuf },
    /// Print the invariant coframe and its structure equations.
    Coframe { problem: PathBuf },
    /// Print the complete system of invariants.
    Invariants { problem: PathBuf },
    /// Decide whether two immersions are congruent.
    Check {
        problem: PathBuf,
        first: PathBuf,
        second: PathBuf,
        /// Base point, comma separated (default: the origin).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
    /// Run the randomized consistency suites.
    Selftest { problem: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for SampleBox {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
        let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if !(lo < hi) {
            return Err("LO must be below HI".into());
        }
        Ok(SampleBox { lo, hi })
    }
}

/// Settings shared by the subcommands.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub sample_box: Option<SampleBox>,
    pub order: Option<usize>,
}

impl RunOptions {
    fn apply(&self, problem: &Problem) -> Problem {
        let mut p = match self.order {
            Some(k) => problem.with_order(k),
            None => problem.clone(),
        };
        if let Some(s) = self.seed {
            p = p.with_seed(s);
        }
        if let Some(b) = self.sample_box {
            p.sampler.lo = b.lo;
            p.sampler.hi = b.hi;
        }
        if let Some(t) = self.tol {
            p.tolerances.invariance = t;
            p.tolerances.congruence = t;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformEntry {
    pub coord: String,
    pub transform: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameEntry {
    /// `params` or `matrix`.
    pub kind: String,
    /// True when the normalization solver produced the frame.
    pub solved: bool,
    pub entries: Vec<(String, String)>,
    pub verification: FrameReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureEntry {
    pub constant: bool,
    pub equations: Vec<String>,
    /// Nonzero `C^i_jk` (1-based, `j < k`).
    pub coefficients: Vec<(usize, usize, usize, f64)>,
    pub max_deviation: f64,
    pub nonconstant: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantOut {
    pub label: String,
    pub direction: String,
    pub order: usize,
    pub expr: String,
    /// Set for invariants that are constant on every immersion.
    pub constant: Option<String>,
}

/// Everything a subcommand produced. The machine format is this struct as
/// JSON; it carries no timings so equal inputs give equal bytes.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub problem: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prolonged: Option<Vec<TransformEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freedom: Option<FreedomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coframe: Option<Vec<ExportedForm>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<Vec<InvariantOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<CongruenceVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestReport>,
    /// Wall-clock per stage; shown in text output only.
    #[serde(skip)]
    pub timings: Vec<(String, std::time::Duration)>,
}

impl RunReport {
    fn new(command: &str, problem: &Problem) -> Self {
        RunReport {
            command: command.into(),
            problem: problem.name.clone(),
            seed: problem.sampler.seed,
            ..Default::default()
        }
    }

    pub fn to_machine(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Process exit status implied by the report.
    pub fn exit_code(&self) -> i32 {
        if let Some(v) = &self.verdict {
            return v.decision.exit_code();
        }
        if let Some(s) = &self.selftest {
            return if s.passed() { 0 } else { 1 };
        }
        0
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(ts) = &self.prolonged {
            for t in ts {
                let _ = writeln!(s, "g·{} = {}", t.coord, t.transform);
            }
        }
        if let Some(f) = &self.freedom {
            let _ = writeln!(s, "local freedom: {f}");
        }
        if let Some(f) = &self.frame {
            let how = if f.solved { "solved" } else { "given" };
            let _ = writeln!(s, "moving frame ({how}):");
            for (k, v) in &f.entries {
                let _ = writeln!(s, "  {k} = {v}");
            }
            let v = &f.verification;
            if v.passed() {
                let _ = writeln!(s, "frame verified (tol {:e})", v.tol);
            } else {
                let _ = writeln!(s, "frame FAILED verification: {}", v.failures.join("; "));
            }
        }
        if let Some(cf) = &self.coframe {
            let _ = writeln!(s, "invariant coframe ({} forms):", cf.len());
            for (i, f) in cf.iter().enumerate() {
                let _ = writeln!(s, "  ω{} = {} = {}", i + 1, f.label, f.printed);
            }
        }
        if let Some(st) = &self.structure {
            if st.constant {
                let _ = writeln!(s, "structure equations (max deviation {:.1e}):", st.max_deviation);
                for e in &st.equations {
                    let _ = writeln!(s, "  {e}");
                }
            } else if let Some(n) = &st.nonconstant {
                let _ = writeln!(s, "structure: {n}");
            }
        }
        if let Some(inv) = &self.invariants {
            let nonconst: Vec<&InvariantOut> = inv.iter().filter(|e| e.constant.is_none()).collect();
            let _ = writeln!(s, "{} nonconstant invariants:", nonconst.len());
            for e in nonconst {
                let _ = writeln!(s, "  [order {}] {} (d{}): {}", e.order, e.label, e.direction, e.expr);
            }
        }
        if let Some(v) = &self.verdict {
            s.push_str(&v.to_string());
        }
        if let Some(r) = &self.selftest {
            for t in &r.suites {
                let status = if t.passed { "pass" } else { "FAIL" };
                let _ = write!(s, "{status} {:<28} worst {:.2e} tol {:.0e} n={}", t.name, t.worst, t.tol, t.checked);
                if let Some(d) = &t.detail {
                    let _ = write!(s, "  {d}");
                }
                s.push('\n');
            }
            let _ = writeln!(s, "selftest {} (seed {})", if r.passed() { "passed" } else { "FAILED" }, r.seed);
        }
        s
    }
}

fn frame_entry(p: &Pipeline) -> Option<FrameEntry> {
    let frame = p.frame.as_ref()?;
    let (kind, entries) = match frame {
        MovingFrame::Params(ps) => ("params", ps.iter().map(|(k, e)| (k.clone(), e.to_string())).collect()),
        MovingFrame::Matrix(m) => (
            "matrix",
            m.iter()
                .enumerate()
                .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (format!("rho[{i}][{j}]"), e.to_string())))
                .collect(),
        ),
    };
    Some(FrameEntry {
        kind: kind.into(),
        solved: p.frame_solved,
        entries,
        verification: p.frame_report.clone()?,
    })
}

fn structure_entry(st: &StructureReport) -> StructureEntry {
    match st {
        StructureReport::Constant(c) => {
            let mut coefficients = Vec::new();
            for i in 0..c.n {
                for j in 0..c.n {
                    for k in j + 1..c.n {
                        if c.get(i, j, k).abs() > 1e-12 {
                            coefficients.push((i + 1, j + 1, k + 1, c.get(i, j, k)));
                        }
                    }
                }
            }
            StructureEntry {
                constant: true,
                equations: c.equations("ω"),
                coefficients,
                max_deviation: c.max_deviation,
                nonconstant: None,
            }
        }
        StructureReport::NonConstant(r) => StructureEntry {
            constant: false,
            equations: Vec::new(),
            coefficients: Vec::new(),
            max_deviation: r.spread,
            nonconstant: Some(r.to_string()),
        },
    }
}

pub fn cmd_prolong(problem: &Problem, opts: &RunOptions) -> Result<RunReport> {
    let problem = opts.apply(problem);
    let p = Pipeline::run_lenient(&problem, Stage::Prolong)?;
    let mut r = RunReport::new("prolong", &problem);
    r.prolonged = Some(
        p.prolonged
            .transforms()
            .into_iter()
            .map(|(coord, t)| TransformEntry {
                coord,
                transform: t.to_string(),
            })
            .collect(),
    );
    r.freedom = Some(p.freedom.clone());
    r.timings = p.timings;
    Ok(r)
}

pub fn cmd_frame(problem: &Problem, opts: &RunOptions) -> Result<RunReport> {
    let problem = opts.apply(problem);
    let p = Pipeline::run_lenient(&problem, Stage::Frame)?;
    let mut r = RunReport::new("frame", &problem);
    r.freedom = Some(p.freedom.clone());
    r.frame = frame_entry(&p);
    r.timings = p.timings;
    Ok(r)
}

pub fn cmd_coframe(problem: &Problem, opts: &RunOptions) -> Result<RunReport> {
    let problem = opts.apply(problem);
    let p = Pipeline::run(&problem, Stage::Coframe)?;
    let mut r = RunReport::new("coframe", &problem);
    r.frame = frame_entry(&p);
    r.coframe = p.coframe.as_ref().map(|c| c.export());
    r.structure = p.structure.as_ref().map(structure_entry);
    r.timings = p.timings;
    Ok(r)
}

pub fn cmd_invariants(problem: &Problem, opts: &RunOptions) -> Result<RunReport> {
    let problem = opts.apply(problem);
    let p = Pipeline::run(&problem, Stage::Invariants)?;
    let mut r = RunReport::new("invariants", &problem);
    r.freedom = Some(p.freedom.clone());
    r.structure = p.structure.as_ref().map(structure_entry);
    r.invariants = p.invariants.as_ref().map(|inv| {
        inv.entries
            .iter()
            .map(|e| InvariantOut {
                label: e.label.clone(),
                direction: e.direction.clone(),
                order: e.order,
                expr: e.expr.to_string(),
                constant: e.constant.as_ref().map(|c| c.to_string()),
            })
            .collect()
    });
    r.timings = p.timings;
    Ok(r)
}

pub fn cmd_check(
    problem: &Problem,
    first: &congruence::ImmersionSpec,
    second: &congruence::ImmersionSpec,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<RunReport> {
    let problem = opts.apply(problem);
    let p = Pipeline::run(&problem, Stage::Invariants)?;
    let ctx = p.congruence_context().expect("invariants stage ran");
    let check = CheckOptions {
        tol: problem.tolerances.congruence,
        half_width: problem.tolerances.half_width,
        seed: problem.sampler.seed,
        ..CheckOptions::default()
    };
    let x0: Vec<f64> = if x0.is_empty() {
        vec![0.0; problem.space.base().len()]
    } else {
        x0.to_vec()
    };
    let verdict = congruence::decide_congruence(&ctx, first, second, &x0, &check)?;
    let mut r = RunReport::new("check", &problem);
    r.structure = p.structure.as_ref().map(structure_entry);
    r.verdict = Some(verdict);
    r.timings = p.timings;
    Ok(r)
}

pub fn cmd_selftest(problem: &Problem, opts: &RunOptions) -> Result<RunReport> {
    let problem = opts.apply(problem);
    let report = selftest::run(&problem, problem.sampler.seed)?;
    let mut r = RunReport::new("selftest", &problem);
    r.selftest = Some(report);
    Ok(r)
}

/// Exit status for an error: malformed input 64, unreadable input 66,
/// anything else 70.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier(_) | Error::Validation { .. } => EXIT_MALFORMED,
        Error::Io(_) => EXIT_NO_INPUT,
        _ => EXIT_SOFTWARE,
    }
}

/// Runs a parsed command line, returning the report.
pub fn execute(cli: &Cli) -> Result<RunReport> {
    let opts = RunOptions {
        seed: cli.seed,
        tol: cli.tol,
        sample_box: cli.sample_box,
        order: cli.order,
    };
    match &cli.command {
        Command::Prolong { problem } => cmd_prolong(&Problem::from_path(problem)?, &opts),
        Command::Frame { problem } => cmd_frame(&Problem::from_path(problem)?, &opts),
        Command::Coframe { problem } => cmd_coframe(&Problem::from_path(problem)?, &opts),
        Command::Invariants { problem } => cmd_invariants(&Problem::from_path(problem)?, &opts),
        Command::Check {
            problem,
            first,
            second,
            at,
        } => {
            let pr = Problem::from_path(problem)?;
            let space = opts.apply(&pr).space;
            let a = problem::immersion_from_path(first, &space)?;
            let b = problem::immersion_from_path(second, &space)?;
            cmd_check(&pr, &a, &b, at, &opts)
        }
        Command::Selftest { problem } => cmd_selftest(&Problem::from_path(problem)?, &opts),
    }
}

/// Full command-line entry point; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_MALFORMED } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Text => {
                    print!("{}", report.to_text());
                    for (stage, t) in &report.timings {
                        eprintln!("time {stage}: {t:.2?}");
                    }
                }
                Format::Machine => print!("{}", report.to_machine()),
            }
            if let Some(path) = &cli.output {
                if let Err(e) = std::fs::write(path, report.to_machine()) {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_SOFTWARE;
                }
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}
