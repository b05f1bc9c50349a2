//! The commutation bracket `[a_f, a_g†] = (f, g)` as a light-cone quadrature:
//!
//! ```text
//! (f, g) = −ℏ Σᵢ wᵢ (kᵢ^α conj f̃_{αμ}(kᵢ)) η^{μν} (kᵢ^β g̃_{βν}(kᵢ)),   kᵢ = (ωᵢ, k⃗ᵢ)
//! ```
//!
//! Only positive-frequency samples enter. With signature `(+,−,−,−)` the
//! contracted vector `k^α F_{αμ}` is orthogonal to the null `k` and hence
//! non-timelike, so the leading minus sign makes `(f, f) ≥ 0`.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::contract_kfkg;
use crate::testfn::OnShellTestFunction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    pub hbar: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64) -> Result<Self> {
        let c = PhysicalConstants { hbar };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hbar > 0.0 && self.hbar.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("hbar must be positive, got {}", self.hbar)))
        }
    }
}

/// Index-ordered pairwise (tree) reduction; the result does not depend on
/// how the terms were produced.
pub fn pairwise_sum(terms: &[Complex64]) -> Complex64 {
    const LEAF: usize = 8;
    if terms.len() <= LEAF {
        return terms.iter().fold(Complex64::new(0.0, 0.0), |acc, t| acc + t);
    }
    let (left, right) = terms.split_at(terms.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

/// Per-node integrands `wᵢ · contract(kᵢ, conj f(i), g(i))`, before the `−ℏ` factor.
pub fn bracket_terms(f: &OnShellTestFunction, g: &OnShellTestFunction) -> Result<Vec<Complex64>> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(f.grid()
        .nodes()
        .iter()
        .zip(f.plus().iter().zip(g.plus()))
        .map(|(node, (a, b))| contract_kfkg(&node.momentum(), &a.conj(), b) * node.weight)
        .collect())
}

/// `(f, g)`: conjugate-linear in `f`, linear in `g`.
pub fn inner_product(
    f: &OnShellTestFunction,
    g: &OnShellTestFunction,
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    let terms = bracket_terms(f, g)?;
    Ok(pairwise_sum(&terms) * (-constants.hbar))
}

/// Upper bound on `|(f, g)|` from `|k^α F_{αμ}| ≤ |k| ‖F‖`:
/// `ℏ Σᵢ wᵢ 2ωᵢ² ‖fᵢ‖ ‖gᵢ‖` with Frobenius norms. Used as the reference
/// scale for relative tolerances.
pub fn bracket_scale(
    f: &OnShellTestFunction,
    g: &OnShellTestFunction,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    let frob = |t: &crate::tensor::AntisymTensor2| {
        (2.0 * t.components().iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    };
    Ok(constants.hbar
        * f.grid()
            .nodes()
            .iter()
            .zip(f.plus().iter().zip(g.plus()))
            .map(|(n, (a, b))| n.weight * 2.0 * n.omega * n.omega * frob(a) * frob(b))
            .sum::<f64>())
}

/// Interned test-function label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelId(pub usize);

pub const DEFAULT_WORD_CAP: usize = 12;
const MAX_WORD_CAP: usize = 24;

/// Registry of labeled test functions together with the Hermitian table
/// of all pairwise brackets.
///
/// Registration (setup phase) takes `&mut self` and fills the new row and
/// column; evaluation only ever reads.
#[derive(Clone, Debug)]
pub struct GramContext {
    constants: PhysicalConstants,
    names: Vec<String>,
    functions: Vec<OnShellTestFunction>,
    index: HashMap<String, LabelId>,
    /// `table[i][j] = (f_i, f_j)`, lower triangle stored as conjugates.
    table: Vec<Vec<Complex64>>,
    pub(crate) derived: HashMap<(LabelId, crate::ladder::Derivation), LabelId>,
    word_cap: usize,
}

impl GramContext {
    pub fn new(constants: PhysicalConstants) -> Self {
        GramContext {
            constants,
            names: Vec::new(),
            functions: Vec::new(),
            index: HashMap::new(),
            table: Vec::new(),
            derived: HashMap::new(),
            word_cap: DEFAULT_WORD_CAP,
        }
    }

    /// Registers every `(name, f)` pair in order.
    pub fn from_functions<'a, I>(constants: PhysicalConstants, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, OnShellTestFunction)>,
    {
        let mut ctx = GramContext::new(constants);
        for (name, f) in labels {
            ctx.register(name, f)?;
        }
        Ok(ctx)
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn word_cap(&self) -> usize {
        self.word_cap
    }

    pub fn set_word_cap(&mut self, cap: usize) -> Result<()> {
        if cap == 0 || cap > MAX_WORD_CAP {
            return Err(Error::InvalidArgument(format!(
                "word cap must lie in 1..={MAX_WORD_CAP}, got {cap}"
            )));
        }
        self.word_cap = cap;
        Ok(())
    }

    pub fn register(&mut self, name: &str, f: OnShellTestFunction) -> Result<LabelId> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("label `{name}` already registered")));
        }
        if let Some(first) = self.functions.first() {
            if !first.same_grid(&f) {
                return Err(Error::GridMismatch);
            }
        }
        let id = LabelId(self.functions.len());
        let mut row = Vec::with_capacity(id.0 + 1);
        for (j, other) in self.functions.iter().enumerate() {
            let value = inner_product(&f, other, &self.constants)?;
            self.table[j].push(value.conj());
            row.push(value);
        }
        row.push(inner_product(&f, &f, &self.constants)?);
        self.table.push(row);
        self.functions.push(f);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Result<LabelId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id.0]
    }

    pub fn function(&self, id: LabelId) -> &OnShellTestFunction {
        &self.functions[id.0]
    }

    pub fn labels(&self) -> impl Iterator<Item = LabelId> {
        (0..self.functions.len()).map(LabelId)
    }

    /// Cached `(f, g)`.
    pub fn bracket(&self, f: LabelId, g: LabelId) -> Complex64 {
        self.table[f.0][g.0]
    }

    /// `sqrt(|(f, f)|)`.
    pub fn norm(&self, f: LabelId) -> f64 {
        self.bracket(f, f).norm().sqrt()
    }

    /// Gram matrix over `ids`, which may repeat or be permuted.
    pub fn gram_matrix(&self, ids: &[LabelId]) -> DMatrix<Complex64> {
        DMatrix::from_fn(ids.len(), ids.len(), |i, j| self.bracket(ids[i], ids[j]))
    }

    /// Gram matrix over every registered label.
    pub fn full_matrix(&self) -> DMatrix<Complex64> {
        let ids: Vec<_> = self.labels().collect();
        self.gram_matrix(&ids)
    }
}

/// Eigenvalue diagnostics of a Hermitian Gram matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub tolerance: f64,
    /// Indices into `eigenvalues` below `−tolerance · λ_max`.
    pub flagged: Vec<usize>,
}

impl PositivityReport {
    pub fn is_positive_semidefinite(&self) -> bool {
        self.flagged.is_empty()
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }
}

pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

pub fn positivity_report(matrix: &DMatrix<Complex64>) -> PositivityReport {
    positivity_report_with(matrix, POSITIVITY_TOLERANCE)
}

pub fn positivity_report_with(matrix: &DMatrix<Complex64>, tolerance: f64) -> PositivityReport {
    if matrix.is_empty() {
        return PositivityReport {
            eigenvalues: Vec::new(),
            lambda_max: 0.0,
            tolerance,
            flagged: Vec::new(),
        };
    }
    let mut eigenvalues: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let floor = -tolerance * lambda_max;
    let flagged = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < floor)
        .map(|(i, _)| i)
        .collect();
    PositivityReport {
        eigenvalues,
        lambda_max,
        tolerance,
        flagged,
    }
}

/// Row-major CSV of a complex matrix: header `label,<l>_re,<l>_im,...`,
/// one row per label, 17 significant digits.
pub fn write_gram_csv<W: Write>(
    mut out: W,
    names: &[&str],
    matrix: &DMatrix<Complex64>,
) -> std::io::Result<()> {
    write!(out, "label")?;
    for n in names {
        write!(out, ",{n}_re,{n}_im")?;
    }
    writeln!(out)?;
    for (i, n) in names.iter().enumerate() {
        write!(out, "{n}")?;
        for j in 0..names.len() {
            let z = matrix[(i, j)];
            write!(out, ",{:.16e},{:.16e}", z.re, z.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
