//! One-forms on jet space, pulled-back Maurer-Cartan forms and the
//! constant-structure invariant coframe.

mod forms;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

pub use forms::{CompiledForm, CompiledTwoForm, OneForm, TwoForm};

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, RatFunc, Sampler};
use crate::frame::{CrossSection, Invariantization, MovingFrame};
use crate::group::{self, MaurerCartanBasis};
use crate::jet::JetSpace;
use crate::numeric;

/// `d(Σ f_c dc)` as a two-form.
pub fn exterior_derivative(w: &OneForm) -> TwoForm {
    w.exterior_derivative()
}

/// Pullback of `w` along `map` (coordinate of the target to expression on
/// the source).
pub fn pullback_form(w: &OneForm, map: &BTreeMap<String, Expr>) -> Result<OneForm> {
    w.pullback(map)
}

/// `ρ*μ^j` for a parameter-form frame.
pub fn pull_maurer_cartan(basis: &MaurerCartanBasis, frame: &MovingFrame) -> Result<Vec<OneForm>> {
    let MovingFrame::Params(ps) = frame else {
        return Err(Error::validation("frame", "pull_maurer_cartan needs a parameter-form frame"));
    };
    let map: BTreeMap<String, RatFunc> = ps.iter().map(|(p, e)| Ok((p.clone(), e.canon()?))).collect::<Result<_>>()?;
    basis.forms.iter().map(|w| w.pullback_canon(&map)).collect()
}

/// `(dρ) ρ^{-1}` for a matrix-form frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixMaurerCartan {
    pub full: Vec<Vec<OneForm>>,
    pub antisymmetric: bool,
    /// Independent entries, `(row, col)` 0-based.
    pub entries: Vec<(usize, usize)>,
    pub forms: Vec<OneForm>,
}

/// Entries of `(dρ) ρ^{-1}`; the inverse is the transpose when `ρ` is
/// orthogonal at the sampled points, otherwise the adjugate. Returns the
/// strict upper triangle when the result is antisymmetric, else `r`
/// entries chosen greedily in row-major order.
pub fn pull_matrix_mc(frame: &MovingFrame, space: &JetSpace, r: usize, sampler: &Sampler) -> Result<MatrixMaurerCartan> {
    let MovingFrame::Matrix(rows) = frame else {
        return Err(Error::validation("frame", "pull_matrix_mc needs a matrix-form frame"));
    };
    let m = rows.len();
    let coords = space.coords();
    let compiled: Vec<Vec<Compiled>> = rows
        .iter()
        .map(|row| row.iter().map(|e| Compiled::new(e, &coords)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let guards: Vec<&Expr> = rows.iter().flatten().collect();
    let pts = sampler.valid_points(&coords, &guards, 10)?;
    let mut orthogonal = true;
    for z in &pts {
        let a = DMatrix::from_fn(m, m, |i, j| compiled[i][j].eval(z).unwrap_or(f64::NAN));
        if numeric::condition_ratio(&a) < 1e-10 || a.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularFrame);
        }
        let eye = DMatrix::<f64>::identity(m, m);
        if (&a * a.transpose() - eye).amax() > 1e-10 {
            orthogonal = false;
        }
    }
    let g: Vec<Vec<RatFunc>> = rows
        .iter()
        .map(|row| row.iter().map(Expr::canon).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let inv = if orthogonal {
        (0..m).map(|i| (0..m).map(|j| g[j][i].clone()).collect()).collect()
    } else {
        group::inverse(&g)?
    };
    let dg: Vec<Vec<OneForm>> = g
        .iter()
        .map(|row| row.iter().map(OneForm::differential_canon).collect())
        .collect();
    let mut full = vec![vec![OneForm::zero(); m]; m];
    for a in 0..m {
        for b in 0..m {
            let mut s = OneForm::zero();
            for c in 0..m {
                if inv[c][b].is_zero() {
                    continue;
                }
                s = s.add(&dg[a][c].scale_canon(&inv[c][b]));
            }
            full[a][b] = s;
        }
    }
    // numeric antisymmetry and rank checks
    let z0 = &pts[0];
    let row_of = |w: &OneForm| -> Result<Vec<f64>> { w.compile(&coords, &coords)?.eval(z0) };
    let mut antisymmetric = true;
    'outer: for z in pts.iter().take(3) {
        for a in 0..m {
            for b in a..m {
                let x = full[a][b].compile(&coords, &coords)?.eval(z)?;
                let y = full[b][a].compile(&coords, &coords)?.eval(z)?;
                if x.iter().zip(&y).any(|(p, q)| (p + q).abs() > 1e-9 * (1.0 + p.abs())) {
                    antisymmetric = false;
                    break 'outer;
                }
            }
        }
    }
    let candidates: Vec<(usize, usize)> = if antisymmetric {
        (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect()
    } else {
        (0..m).flat_map(|a| (0..m).map(move |b| (a, b))).collect()
    };
    let mut entries = Vec::new();
    let mut rows_num: Vec<Vec<f64>> = Vec::new();
    for (a, b) in candidates {
        if !antisymmetric && entries.len() == r {
            break;
        }
        let row = row_of(&full[a][b])?;
        let mut trial = rows_num.clone();
        trial.push(row.clone());
        let mat = DMatrix::from_fn(trial.len(), coords.len(), |i, j| trial[i][j]);
        if antisymmetric || numeric::rank(&mat, 1e-9) == trial.len() {
            rows_num.push(row);
            entries.push((a, b));
        }
    }
    let forms = entries.iter().map(|(a, b)| full[*a][*b].clone()).collect();
    Ok(MatrixMaurerCartan {
        full,
        antisymmetric,
        entries,
        forms,
    })
}

/// Where a coframe form comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "of", rename_all = "kebab-case")]
pub enum Provenance {
    /// `dι*c` for a coordinate `c`.
    Invariantized(String),
    /// `ρ*μ^j`, 1-based.
    MaurerCartan(usize),
    /// Entry `(i, j)` of `ρ*((dR) R^{-1})`, 1-based.
    MatrixEntry(usize, usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Invariantized(c) => write!(f, "dι*{c}"),
            Provenance::MaurerCartan(j) => write!(f, "ρ*μ{j}"),
            Provenance::MatrixEntry(i, j) => write!(f, "ρ*Ω{i}{j}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoframeForm {
    pub provenance: Provenance,
    pub form: OneForm,
}

/// Ordered invariant coframe on `J^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoframeField {
    pub space: JetSpace,
    pub forms: Vec<CoframeForm>,
}

impl CoframeField {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn one_forms(&self) -> Vec<OneForm> {
        self.forms.iter().map(|f| f.form.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.forms.iter().map(|f| f.provenance.to_string()).collect()
    }

    /// Machine-readable export.
    pub fn export(&self) -> Vec<ExportedForm> {
        let coords = self.space.coords();
        self.forms
            .iter()
            .map(|f| ExportedForm {
                provenance: f.provenance.clone(),
                label: f.provenance.to_string(),
                coefficients: f
                    .form
                    .terms()
                    .into_iter()
                    .map(|(c, e)| (c, e.to_string()))
                    .collect(),
                printed: f.form.display_in(&coords),
            })
            .collect()
    }

    pub fn structure(&self, sampler: &Sampler) -> Result<group::StructureReport> {
        group::structure_constants_of(&self.one_forms(), &self.space.coords(), sampler)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExportedForm {
    pub provenance: Provenance,
    pub label: String,
    pub coefficients: BTreeMap<String, String>,
    pub printed: String,
}

/// Differentials of the invariantized coordinates followed by the pulled
/// Maurer-Cartan forms. Normalized coordinates are dropped since their
/// invariantizations are constant.
pub fn build_coframe(
    inv: &Invariantization,
    cs: &CrossSection,
    mc_forms: Vec<(Provenance, OneForm)>,
    space: &JetSpace,
    sampler: &Sampler,
) -> Result<CoframeField> {
    if inv.space() != space {
        return Err(Error::validation("coframe", "invariantization lives on a different jet space"));
    }
    let mut forms = Vec::new();
    for c in space.coords() {
        let f = inv.get_canon(&c).unwrap();
        if let Some(v) = cs.value(&c) {
            match f.as_constant() {
                Some(k) if &k == v => continue,
                _ => {
                    return Err(Error::InconsistentCrossSection(format!(
                        "ι*{c} = {} is not the constant {v}",
                        Expr::from_canon(f)
                    )))
                }
            }
        }
        let d = OneForm::differential_canon(f);
        if d.is_zero() {
            return Err(Error::Dependence(format!("dι*{c} vanishes identically")));
        }
        forms.push(CoframeForm {
            provenance: Provenance::Invariantized(c.clone()),
            form: d,
        });
    }
    for (p, w) in mc_forms {
        forms.push(CoframeForm { provenance: p, form: w });
    }
    let field = CoframeField {
        space: space.clone(),
        forms,
    };
    check_independence(&field, sampler)?;
    Ok(field)
}

fn check_independence(field: &CoframeField, sampler: &Sampler) -> Result<()> {
    let coords = field.space.coords();
    let n = coords.len();
    if field.len() != n {
        return Err(Error::Dependence(format!(
            "{} forms on a {n}-dimensional jet space",
            field.len()
        )));
    }
    let compiled = field
        .forms
        .iter()
        .map(|f| f.form.compile(&coords, &coords))
        .collect::<Result<Vec<_>>>()?;
    let guards: Vec<Expr> = field
        .forms
        .iter()
        .flat_map(|f| f.form.terms().into_iter().map(|(_, e)| e))
        .collect();
    let refs: Vec<&Expr> = guards.iter().collect();
    for z in sampler.valid_points(&coords, &refs, 10)? {
        let mut w = DMatrix::zeros(n, n);
        for (i, c) in compiled.iter().enumerate() {
            for (j, v) in c.eval(&z)?.into_iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        let rank = numeric::rank(&w, 1e-8);
        if rank < n {
            return Err(Error::Dependence(format!("rank {rank} < {n} at a sampled point")));
        }
    }
    Ok(())
}
