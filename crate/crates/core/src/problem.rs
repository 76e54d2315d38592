//! Problem and immersion files, and the pipeline that runs a problem from
//! prolongation to the invariant system.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::coframe::{self, CoframeField, MatrixMaurerCartan, Provenance};
use crate::congruence::{self, Axis, ImmersionSpec, InvariantSystem, SampledImmersion};
use crate::error::{Error, Result};
use crate::expr::{self, Expr, Sampler, VarKind, VarTable};
use crate::frame::{self, CrossSection, FrameReport, FreedomReport, Invariantization, MovingFrame};
use crate::group::{ActionSpec, MaurerCartanBasis, MatrixRep, StructureReport};
use crate::jet::{JetSpace, ProlongedAction};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    base: Vec<String>,
    fiber: Vec<String>,
    order: usize,
    #[serde(default)]
    complex: bool,
    group: RawGroup,
    cross_section: toml::Table,
    #[serde(default)]
    frame_override: Option<RawFrame>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    sampling: RawSampling,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    params: Vec<String>,
    identity: Vec<toml::Value>,
    action: toml::Table,
    #[serde(default)]
    matrix: Option<Vec<Vec<toml::Value>>>,
    #[serde(default)]
    mc_entries: Option<Vec<[usize; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    #[serde(rename = "let", default)]
    lets: toml::Table,
    #[serde(default)]
    params: Option<toml::Table>,
    #[serde(default)]
    matrix: Option<Vec<Vec<toml::Value>>>,
}

/// Numeric tolerances used across the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Randomized symbolic equality.
    pub probable: f64,
    /// Invariance, equivariance and constant-structure checks.
    pub invariance: f64,
    /// Congruence decision.
    pub congruence: f64,
    /// Half-width of the congruence comparison grid.
    pub half_width: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            probable: 1e-9,
            invariance: 1e-8,
            congruence: 1e-6,
            half_width: 0.1,
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSampling {
    lo: f64,
    hi: f64,
    seed: u64,
    ranges: BTreeMap<String, [f64; 2]>,
}

impl Default for RawSampling {
    fn default() -> Self {
        let s = Sampler::default();
        RawSampling {
            lo: s.lo,
            hi: s.hi,
            seed: s.seed,
            ranges: BTreeMap::new(),
        }
    }
}

/// A validated problem file.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub name: String,
    pub description: String,
    pub space: JetSpace,
    pub action: ActionSpec,
    pub cross_section: CrossSection,
    pub frame_override: Option<MovingFrame>,
    pub tolerances: Tolerances,
    pub sampler: Sampler,
    /// Complex-analytic problem: real sampling is supplemented by complex
    /// evaluation in the self-test.
    pub complex: bool,
}

fn wrap(path: &str, e: Error) -> Error {
    match e {
        Error::Validation { .. } => e,
        other => Error::validation(path, other.to_string()),
    }
}

fn value_text(path: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:e}")),
        _ => Err(Error::validation(path, "expected an expression string or a number")),
    }
}

fn expr_at(path: &str, v: &toml::Value, vars: &VarTable) -> Result<Expr> {
    let text = value_text(path, v)?;
    expr::parse(&text, vars).map_err(|e| wrap(path, e))
}

fn rational_at(path: &str, v: &toml::Value) -> Result<BigRational> {
    let text = value_text(path, v)?;
    expr::parse_any(&text)
        .map_err(|e| wrap(path, e))?
        .as_rational()
        .ok_or_else(|| Error::validation(path, format!("`{text}` is not a rational constant")))
}

fn matrix_at(path: &str, rows: &[Vec<toml::Value>], vars: &VarTable, lets: &BTreeMap<String, Expr>) -> Result<Vec<Vec<Expr>>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    let p = format!("{path}[{i}][{j}]");
                    let e = expr_at(&p, v, vars)?;
                    e.substitute(lets).map_err(|e| wrap(&p, e))
                })
                .collect()
        })
        .collect()
}

impl Problem {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut p = Self::from_toml(&text)?;
        if p.name.is_empty() {
            p.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(p)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawProblem = toml::from_str(text).map_err(|e| Error::validation("problem", e.message().to_string()))?;
        let space = JetSpace::from_names(raw.base.clone(), raw.fiber.clone(), raw.order)?;
        let g = &raw.group;

        let mut group_vars = VarTable::new();
        for f in &raw.fiber {
            group_vars.add(f.clone(), VarKind::Fiber).map_err(|e| wrap("fiber", e))?;
        }
        for p in &g.params {
            group_vars.add(p.clone(), VarKind::GroupParam).map_err(|e| wrap("group.params", e))?;
        }
        let identity = g
            .identity
            .iter()
            .enumerate()
            .map(|(i, v)| rational_at(&format!("group.identity[{i}]"), v))
            .collect::<Result<Vec<_>>>()?;
        for k in g.action.keys() {
            if !raw.fiber.contains(k) {
                return Err(Error::validation(format!("group.action.{k}"), "not a fiber coordinate"));
            }
        }
        let transforms = raw
            .fiber
            .iter()
            .map(|f| {
                let path = format!("group.action.{f}");
                let v = g.action.get(f).ok_or_else(|| Error::validation(&path, "missing transform"))?;
                expr_at(&path, v, &group_vars)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut action = ActionSpec::new(g.params.clone(), identity, raw.fiber.clone(), transforms)?;
        let mut param_vars = VarTable::new();
        for p in &g.params {
            param_vars.add(p.clone(), VarKind::GroupParam)?;
        }
        if let Some(rows) = &g.matrix {
            let m = matrix_at("group.matrix", rows, &param_vars, &BTreeMap::new())?;
            action = action.with_matrix(MatrixRep::new(m)?)?;
        }
        if let Some(sel) = &g.mc_entries {
            action = action.with_mc_entries(sel.iter().map(|[i, j]| (*i, *j)).collect())?;
        }

        let mut entries = Vec::new();
        for (c, v) in &raw.cross_section {
            entries.push((c.clone(), rational_at(&format!("cross_section.{c}"), v)?));
        }
        let coords = space.coords();
        entries.sort_by_key(|(c, _)| coords.iter().position(|x| x == c).unwrap_or(usize::MAX));
        let cross_section = CrossSection::new(entries)?;
        cross_section.validate(&space, action.dim())?;

        let frame_override = match &raw.frame_override {
            None => None,
            Some(f) => Some(parse_frame(f, &space, &action)?),
        };

        let mut sampler = Sampler {
            lo: raw.sampling.lo,
            hi: raw.sampling.hi,
            ranges: BTreeMap::new(),
            seed: raw.sampling.seed,
        };
        for (k, [lo, hi]) in &raw.sampling.ranges {
            if !(lo <= hi) {
                return Err(Error::validation(format!("sampling.ranges.{k}"), "empty range"));
            }
            sampler.ranges.insert(k.clone(), (*lo, *hi));
        }
        if !(raw.sampling.lo < raw.sampling.hi) {
            return Err(Error::validation("sampling", "lo must be below hi"));
        }

        Ok(Problem {
            name: raw.name.unwrap_or_default(),
            description: raw.description.unwrap_or_default(),
            space,
            action,
            cross_section,
            frame_override,
            tolerances: raw.tolerances,
            sampler,
            complex: raw.complex,
        })
    }

    pub fn with_order(&self, order: usize) -> Problem {
        Problem {
            space: self.space.with_order(order),
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Problem {
        Problem {
            sampler: self.sampler.clone().with_seed(seed),
            ..self.clone()
        }
    }

    pub fn prolong(&self) -> Result<ProlongedAction> {
        self.space.prolong_action(&self.action)
    }
}

fn parse_frame(f: &RawFrame, space: &JetSpace, action: &ActionSpec) -> Result<MovingFrame> {
    let mut vars = space.var_table(&[])?;
    let mut lets: BTreeMap<String, Expr> = BTreeMap::new();
    for (name, v) in &f.lets {
        let path = format!("frame_override.let.{name}");
        let e = expr_at(&path, v, &vars)?.substitute(&lets).map_err(|e| wrap(&path, e))?;
        vars.add(name.clone(), VarKind::Auxiliary).map_err(|e| wrap(&path, e))?;
        lets.insert(name.clone(), e);
    }
    match (&f.params, &f.matrix) {
        (Some(ps), None) => {
            let mut out = Vec::new();
            for p in action.params() {
                let path = format!("frame_override.params.{p}");
                let v = ps.get(p).ok_or_else(|| Error::validation(&path, "missing parameter"))?;
                out.push((p.clone(), expr_at(&path, v, &vars)?.substitute(&lets).map_err(|e| wrap(&path, e))?));
            }
            if let Some(k) = ps.keys().find(|k| !action.params().contains(k)) {
                return Err(Error::validation(format!("frame_override.params.{k}"), "not a group parameter"));
            }
            Ok(MovingFrame::Params(out))
        }
        (None, Some(rows)) => {
            let m = matrix_at("frame_override.matrix", rows, &vars, &lets)?;
            if m.is_empty() || m.iter().any(|r| r.len() != m.len()) {
                return Err(Error::validation("frame_override.matrix", "matrix must be square"));
            }
            Ok(MovingFrame::Matrix(m))
        }
        _ => Err(Error::validation("frame_override", "give exactly one of `params` or `matrix`")),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImmersion {
    #[serde(default)]
    components: Option<toml::Table>,
    #[serde(default)]
    sampled: Option<RawSampled>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampled {
    axes: Vec<Axis>,
    values: BTreeMap<String, Vec<f64>>,
}

/// Reads an immersion file: either `[components]` with one expression per
/// fiber coordinate, or `[sampled]` grid data.
pub fn immersion_from_toml(text: &str, space: &JetSpace) -> Result<ImmersionSpec> {
    let raw: RawImmersion = toml::from_str(text).map_err(|e| Error::validation("immersion", e.message().to_string()))?;
    match (raw.components, raw.sampled) {
        (Some(c), None) => {
            let mut vars = VarTable::new();
            for b in space.base() {
                vars.add(b.clone(), VarKind::Base)?;
            }
            let mut out = BTreeMap::new();
            for f in space.fiber() {
                let path = format!("components.{f}");
                let v = c.get(f).ok_or_else(|| Error::validation(&path, "missing component"))?;
                out.insert(f.clone(), expr_at(&path, v, &vars)?);
            }
            if let Some(k) = c.keys().find(|k| !space.fiber().contains(k)) {
                return Err(Error::validation(format!("components.{k}"), "not a fiber coordinate"));
            }
            Ok(ImmersionSpec::Symbolic(out))
        }
        (None, Some(s)) => Ok(ImmersionSpec::Sampled(SampledImmersion {
            axes: s.axes,
            values: s.values,
        })),
        _ => Err(Error::validation("immersion", "give exactly one of [components] or [sampled]")),
    }
}

pub fn immersion_from_path(path: impl AsRef<Path>, space: &JetSpace) -> Result<ImmersionSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    immersion_from_toml(&text, space)
}

/// Pipeline stages, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Prolong,
    Frame,
    Coframe,
    Invariants,
}

/// Intermediate and final artifacts of a problem run.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub problem: Problem,
    pub prolonged: ProlongedAction,
    pub freedom: FreedomReport,
    pub frame: Option<MovingFrame>,
    /// True when the frame came from the normalization solver.
    pub frame_solved: bool,
    pub frame_report: Option<FrameReport>,
    pub invariantization: Option<Invariantization>,
    pub maurer_cartan: Option<MaurerCartanBasis>,
    pub matrix_mc: Option<MatrixMaurerCartan>,
    pub coframe: Option<CoframeField>,
    pub structure: Option<StructureReport>,
    pub invariants: Option<InvariantSystem>,
    /// Wall-clock time per stage (not part of machine output).
    pub timings: Vec<(String, Duration)>,
}

impl Pipeline {
    /// Runs through `until`. A frame that fails verification is an error.
    pub fn run(problem: &Problem, until: Stage) -> Result<Pipeline> {
        let mut p = Self::run_lenient(problem, Stage::Frame)?;
        if let Some(r) = &p.frame_report {
            if !r.passed() {
                return Err(Error::validation("frame_override", format!("frame rho fails verification: {}", r.failures.join("; "))));
            }
        }
        p.advance(until)?;
        Ok(p)
    }

    /// Runs through `until` without rejecting an unverified frame.
    pub fn run_lenient(problem: &Problem, until: Stage) -> Result<Pipeline> {
        let t = Instant::now();
        let prolonged = problem.prolong()?;
        let freedom = frame::check_local_freedom(&prolonged, &problem.sampler)?;
        let mut p = Pipeline {
            problem: problem.clone(),
            prolonged,
            freedom,
            frame: None,
            frame_solved: false,
            frame_report: None,
            invariantization: None,
            maurer_cartan: None,
            matrix_mc: None,
            coframe: None,
            structure: None,
            invariants: None,
            timings: vec![("prolong".into(), t.elapsed())],
        };
        if until >= Stage::Frame {
            let t = Instant::now();
            let pr = &p.problem;
            let (frame, solved) = match &pr.frame_override {
                Some(f) => (f.clone(), false),
                None => (frame::solve_normalization(&p.prolonged, &pr.cross_section, &pr.sampler)?, true),
            };
            let report = frame::verify_frame(&frame, &p.prolonged, &pr.cross_section, &pr.sampler, pr.tolerances.invariance)?;
            p.frame = Some(frame);
            p.frame_solved = solved;
            p.frame_report = Some(report);
            p.timings.push(("frame".into(), t.elapsed()));
        }
        p.advance(until)?;
        Ok(p)
    }

    /// Runs the remaining stages through `until`.
    pub fn advance(&mut self, until: Stage) -> Result<()> {
        if until >= Stage::Coframe && self.coframe.is_none() {
            let t = Instant::now();
            let pr = &self.problem;
            let frame = self
                .frame
                .as_ref()
                .ok_or_else(|| Error::validation("pipeline", "the frame stage has not run"))?;
            let inv = frame::invariantize(&self.prolonged, frame)?;
            let mc_forms: Vec<(Provenance, coframe::OneForm)> = match frame {
                MovingFrame::Params(_) => {
                    let basis = pr.action.maurer_cartan()?;
                    let pulled = coframe::pull_maurer_cartan(&basis, frame)?;
                    self.maurer_cartan = Some(basis);
                    pulled
                        .into_iter()
                        .enumerate()
                        .map(|(j, w)| (Provenance::MaurerCartan(j + 1), w))
                        .collect()
                }
                MovingFrame::Matrix(_) => {
                    let mm = coframe::pull_matrix_mc(frame, &pr.space, pr.action.dim(), &pr.sampler)?;
                    let forms = mm
                        .entries
                        .iter()
                        .zip(&mm.forms)
                        .map(|((i, j), w)| (Provenance::MatrixEntry(i + 1, j + 1), w.clone()))
                        .collect();
                    self.matrix_mc = Some(mm);
                    forms
                }
            };
            let cf = coframe::build_coframe(&inv, &pr.cross_section, mc_forms, &pr.space, &pr.sampler)?;
            let st = cf.structure(&pr.sampler)?;
            self.invariantization = Some(inv);
            self.coframe = Some(cf);
            self.structure = Some(st);
            self.timings.push(("coframe".into(), t.elapsed()));
        }
        if until >= Stage::Invariants && self.invariants.is_none() {
            let t = Instant::now();
            self.invariants = Some(congruence::extract_invariants(self.coframe.as_ref().unwrap())?);
            self.timings.push(("invariants".into(), t.elapsed()));
        }
        Ok(())
    }

    pub fn constant_structure(&self) -> bool {
        self.structure.as_ref().map_or(false, StructureReport::is_constant)
    }

    pub fn congruence_context(&self) -> Option<congruence::CongruenceContext<'_>> {
        Some(congruence::CongruenceContext {
            prolonged: &self.prolonged,
            invariants: self.invariants.as_ref()?,
            constant_structure: self.constant_structure(),
        })
    }
}
