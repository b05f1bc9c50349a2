//! Creation/annihilation algebra over test-function labels.
//!
//! The vacuum functional is evaluated by Wick recursion on the leftmost
//! operator of a word:
//!
//! ```text
//! ω(∅) = 1
//! ω(a†_g · W) = 0
//! ω(a_f · W) = Σ_{a†_g ∈ W} (f, g) · ω(W without a†_g)
//! ```
//!
//! Field symbols expand into two-term sums of ladder operators:
//!
//! ```text
//! φ_f = a_{f*}    + a†_f
//! χ_f = a_{(f•)*} + a†_{f•}     (b_f := a_{f•})
//! ξ_f = a_{f□}    + a†_{f□}     (c_f := a_{f□})
//! ```

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::{GramContext, LabelId};
use crate::tensor::AntisymTensor2;
use crate::testfn::OnShellTestFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Create,
    Annihilate,
}

impl OpKind {
    pub fn adjoint(self) -> OpKind {
        match self {
            OpKind::Create => OpKind::Annihilate,
            OpKind::Annihilate => OpKind::Create,
        }
    }
}

impl FromStr for OpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "create" => Ok(OpKind::Create),
            "annihilate" => Ok(OpKind::Annihilate),
            other => Err(Error::InvalidArgument(format!("unknown operator kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LadderOp {
    pub kind: OpKind,
    pub label: LabelId,
}

impl LadderOp {
    pub fn create(label: LabelId) -> Self {
        LadderOp {
            kind: OpKind::Create,
            label,
        }
    }

    pub fn annihilate(label: LabelId) -> Self {
        LadderOp {
            kind: OpKind::Annihilate,
            label,
        }
    }

    pub fn adjoint(self) -> Self {
        LadderOp {
            kind: self.kind.adjoint(),
            label: self.label,
        }
    }
}

/// Product of ladder operators; index 0 is leftmost and acts last on kets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OperatorWord {
    ops: Vec<LadderOp>,
}

impl OperatorWord {
    pub fn new(ops: Vec<LadderOp>) -> Self {
        OperatorWord { ops }
    }

    pub fn empty() -> Self {
        OperatorWord::default()
    }

    pub fn ops(&self) -> &[LadderOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: LadderOp) {
        self.ops.push(op);
    }

    /// Reversed with every operator replaced by its adjoint.
    pub fn adjoint(&self) -> Self {
        OperatorWord {
            ops: self.ops.iter().rev().map(|op| op.adjoint()).collect(),
        }
    }

    /// Parses `"create f"` / `"annihilate g"` entries against `ctx`.
    pub fn parse<S: AsRef<str>>(entries: &[S], ctx: &GramContext) -> Result<Self> {
        let mut ops = Vec::with_capacity(entries.len());
        for entry in entries {
            let mut parts = entry.as_ref().split_whitespace();
            let (Some(kind), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::InvalidArgument(format!(
                    "word entry `{}` must read `create <label>` or `annihilate <label>`",
                    entry.as_ref()
                )));
            };
            ops.push(LadderOp {
                kind: kind.parse()?,
                label: ctx.lookup(label)?,
            });
        }
        Ok(OperatorWord { ops })
    }

    pub fn display<'a>(&'a self, ctx: &'a GramContext) -> impl fmt::Display + 'a {
        WordDisplay { word: self, ctx }
    }
}

struct WordDisplay<'a> {
    word: &'a OperatorWord,
    ctx: &'a GramContext,
}

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, op) in self.word.ops.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let dagger = if op.kind == OpKind::Create { "†" } else { "" };
            write!(f, "a{dagger}({})", self.ctx.name(op.label))?;
        }
        Ok(())
    }
}

impl FromIterator<LadderOp> for OperatorWord {
    fn from_iter<I: IntoIterator<Item = LadderOp>>(iter: I) -> Self {
        OperatorWord {
            ops: iter.into_iter().collect(),
        }
    }
}

fn check_len(len: usize, ctx: &GramContext) -> Result<()> {
    if len > ctx.word_cap() {
        Err(Error::WordTooLong {
            len,
            cap: ctx.word_cap(),
        })
    } else {
        Ok(())
    }
}

/// `ω₀(W) = ⟨0|W|0⟩`.
pub fn vacuum_expectation(word: &OperatorWord, ctx: &GramContext) -> Result<Complex64> {
    check_len(word.len(), ctx)?;
    Ok(wick(word.ops(), ctx))
}

fn wick(ops: &[LadderOp], ctx: &GramContext) -> Complex64 {
    let n = ops.len();
    let creates = ops.iter().filter(|op| op.kind == OpKind::Create).count();
    if n % 2 == 1 || 2 * creates != n {
        return Complex64::new(0.0, 0.0);
    }
    // memo over the set of operators still present
    let mut memo: Vec<Option<Complex64>> = vec![None; 1 << n];
    wick_rec(ops, ctx, (1u32 << n) - 1, &mut memo)
}

fn wick_rec(ops: &[LadderOp], ctx: &GramContext, remaining: u32, memo: &mut [Option<Complex64>]) -> Complex64 {
    if remaining == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if let Some(v) = memo[remaining as usize] {
        return v;
    }
    let first = remaining.trailing_zeros() as usize;
    let lead = ops[first];
    let mut acc = Complex64::new(0.0, 0.0);
    if lead.kind == OpKind::Annihilate {
        let rest = remaining & !(1 << first);
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if ops[j].kind == OpKind::Create {
                let bracket = ctx.bracket(lead.label, ops[j].label);
                acc += bracket * wick_rec(ops, ctx, rest & !(1 << j), memo);
            }
        }
    }
    memo[remaining as usize] = Some(acc);
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Phi,
    Chi,
    Xi,
}

impl FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(FieldKind::Phi),
            "chi" => Ok(FieldKind::Chi),
            "xi" => Ok(FieldKind::Xi),
            other => Err(Error::InvalidArgument(format!("unknown field kind `{other}`"))),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Phi => "phi",
            FieldKind::Chi => "chi",
            FieldKind::Xi => "xi",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldSymbol {
    pub kind: FieldKind,
    pub label: LabelId,
}

impl FieldSymbol {
    pub fn new(kind: FieldKind, label: LabelId) -> Self {
        FieldSymbol { kind, label }
    }
}

/// Derived test functions registered alongside a base label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Derivation {
    Star,
    Bullet,
    /// `(f•)*`, equal to `(f*)•`.
    BulletStar,
    Box,
}

impl Derivation {
    fn suffix(self) -> &'static str {
        match self {
            Derivation::Star => "*",
            Derivation::Bullet => "•",
            Derivation::BulletStar => "•*",
            Derivation::Box => "□",
        }
    }

    fn apply(self, f: &OnShellTestFunction) -> OnShellTestFunction {
        match self {
            Derivation::Star => f.star_conjugate(),
            Derivation::Bullet => f.bullet_map(),
            Derivation::BulletStar => f.bullet_map().star_conjugate(),
            Derivation::Box => f.box_map(),
        }
    }
}

impl GramContext {
    /// Registers (once) the derived function of `base`, named `<base><suffix>`.
    pub fn derive(&mut self, base: LabelId, derivation: Derivation) -> Result<LabelId> {
        if let Some(&id) = self.derived.get(&(base, derivation)) {
            return Ok(id);
        }
        let name = format!("{}{}", self.name(base), derivation.suffix());
        let f = derivation.apply(self.function(base));
        let id = self.register(&name, f)?;
        self.derived.insert((base, derivation), id);
        Ok(id)
    }

    pub fn derived(&self, base: LabelId, derivation: Derivation) -> Result<LabelId> {
        self.derived.get(&(base, derivation)).copied().ok_or_else(|| {
            Error::UnregisteredDerived(format!("{}{}", self.name(base), derivation.suffix()))
        })
    }

    /// Registers every derived label needed to expand `sym`.
    pub fn prepare_field(&mut self, sym: FieldSymbol) -> Result<()> {
        match sym.kind {
            FieldKind::Phi => {
                self.derive(sym.label, Derivation::Star)?;
            }
            FieldKind::Chi => {
                self.derive(sym.label, Derivation::Bullet)?;
                self.derive(sym.label, Derivation::BulletStar)?;
            }
            FieldKind::Xi => {
                self.derive(sym.label, Derivation::Box)?;
            }
        }
        Ok(())
    }

    pub fn prepare_fields(&mut self, symbols: &[FieldSymbol]) -> Result<()> {
        symbols.iter().try_for_each(|&s| self.prepare_field(s))
    }
}

/// `b_f = a_{f•}`: registers `f•` and returns its label.
pub fn relabel_b(ctx: &mut GramContext, f: LabelId) -> Result<LabelId> {
    ctx.derive(f, Derivation::Bullet)
}

/// `c_f = a_{f□}`: registers `f□` and returns its label.
pub fn relabel_c(ctx: &mut GramContext, f: LabelId) -> Result<LabelId> {
    ctx.derive(f, Derivation::Box)
}

/// Two-term expansion `[annihilation part, creation part]`.
pub fn expand_field(sym: FieldSymbol, ctx: &GramContext) -> Result<[LadderOp; 2]> {
    let (ann, cre) = match sym.kind {
        FieldKind::Phi => (ctx.derived(sym.label, Derivation::Star)?, sym.label),
        FieldKind::Chi => (
            ctx.derived(sym.label, Derivation::BulletStar)?,
            ctx.derived(sym.label, Derivation::Bullet)?,
        ),
        FieldKind::Xi => {
            let boxed = ctx.derived(sym.label, Derivation::Box)?;
            (boxed, boxed)
        }
    };
    Ok([LadderOp::annihilate(ann), LadderOp::create(cre)])
}

/// `ω(prefix · X₁⋯Xₙ · suffix)` with every field expanded, summing the `2ⁿ` words.
pub fn sandwiched_field_vev(
    prefix: &OperatorWord,
    symbols: &[FieldSymbol],
    suffix: &OperatorWord,
    ctx: &GramContext,
) -> Result<Complex64> {
    let len = prefix.len() + symbols.len() + suffix.len();
    check_len(len, ctx)?;
    let expansions = symbols
        .iter()
        .map(|&s| expand_field(s, ctx))
        .collect::<Result<Vec<_>>>()?;
    if len % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut ops = Vec::with_capacity(len);
    for choice in 0u32..(1 << symbols.len()) {
        ops.clear();
        ops.extend_from_slice(prefix.ops());
        for (i, pair) in expansions.iter().enumerate() {
            ops.push(pair[((choice >> i) & 1) as usize]);
        }
        ops.extend_from_slice(suffix.ops());
        total += wick(&ops, ctx);
    }
    Ok(total)
}

/// `ω(X₁⋯Xₙ)`.
pub fn field_vev(symbols: &[FieldSymbol], ctx: &GramContext) -> Result<Complex64> {
    sandwiched_field_vev(&OperatorWord::empty(), symbols, &OperatorWord::empty(), ctx)
}

/// `ω(L · [X_f, X_g] · R)`.
pub fn commutator_vev(
    kind: FieldKind,
    f: LabelId,
    g: LabelId,
    left: &OperatorWord,
    right: &OperatorWord,
    ctx: &GramContext,
) -> Result<Complex64> {
    let xf = FieldSymbol::new(kind, f);
    let xg = FieldSymbol::new(kind, g);
    let fg = sandwiched_field_vev(left, &[xf, xg], right, ctx)?;
    let gf = sandwiched_field_vev(left, &[xg, xf], right, ctx)?;
    Ok(fg - gf)
}

fn field_norm(sym: FieldSymbol, ctx: &GramContext) -> Result<f64> {
    let [a, c] = expand_field(sym, ctx)?;
    Ok(ctx.norm(a.label).max(ctx.norm(c.label)))
}

/// Reference magnitude for `commutator_vev`: the product of the norms of
/// every operator involved, with each field counted through its larger
/// expansion label.
pub fn commutator_scale(
    kind: FieldKind,
    f: LabelId,
    g: LabelId,
    left: &OperatorWord,
    right: &OperatorWord,
    ctx: &GramContext,
) -> Result<f64> {
    let probes: f64 = left
        .ops()
        .iter()
        .chain(right.ops())
        .map(|op| ctx.norm(op.label))
        .product();
    Ok(probes * field_norm(FieldSymbol::new(kind, f), ctx)? * field_norm(FieldSymbol::new(kind, g), ctx)?)
}

/// Product of label norms over a word.
pub fn word_scale(word: &OperatorWord, ctx: &GramContext) -> f64 {
    word.ops().iter().map(|op| ctx.norm(op.label)).product()
}

/// A word over abstract slots `0..m`, instantiated against concrete labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordTemplate(pub Vec<(OpKind, usize)>);

impl WordTemplate {
    pub fn instantiate(&self, labels: &[LabelId]) -> Result<OperatorWord> {
        self.0
            .iter()
            .map(|&(kind, slot)| {
                labels
                    .get(slot)
                    .map(|&label| LadderOp { kind, label })
                    .ok_or_else(|| Error::InvalidArgument(format!("word slot {slot} out of range")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceEntry {
    pub a_value: Complex64,
    pub b_value: Complex64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub entries: Vec<EquivalenceEntry>,
    pub max_abs_difference: f64,
    /// `max |a − b| / scale` over words with nonzero scale.
    pub max_relative_difference: f64,
}

/// Evaluates every word once with `a_{hᵢ}` and once with `b_{fᵢ} = a_{fᵢ•}`
/// where `fᵢ` is the canonical bullet preimage of the plus-sheet data `hᵢ`.
pub fn equivalence_check(
    ctx: &mut GramContext,
    targets: &[(&str, Vec<AntisymTensor2>)],
    words: &[WordTemplate],
) -> Result<EquivalenceReport> {
    let grid = match ctx.labels().next() {
        Some(id) => ctx.function(id).grid().clone(),
        None => {
            return Err(Error::InvalidArgument(
                "equivalence check needs a context with at least one registered function to fix the grid".into(),
            ))
        }
    };
    let mut a_labels = Vec::with_capacity(targets.len());
    let mut b_labels = Vec::with_capacity(targets.len());
    for (name, h) in targets {
        let zero = vec![AntisymTensor2::ZERO; grid.len()];
        let target = OnShellTestFunction::from_sheets(&grid, h.clone(), zero)?;
        a_labels.push(ctx.register(name, target)?);
        let pre = OnShellTestFunction::bullet_preimage(&grid, h)?;
        let pre_id = ctx.register(&format!("pre({name})"), pre)?;
        b_labels.push(relabel_b(ctx, pre_id)?);
    }
    let mut entries = Vec::with_capacity(words.len());
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for template in words {
        let a_word = template.instantiate(&a_labels)?;
        let b_word = template.instantiate(&b_labels)?;
        let a_value = vacuum_expectation(&a_word, ctx)?;
        let b_value = vacuum_expectation(&b_word, ctx)?;
        let scale = word_scale(&a_word, ctx);
        let diff = (a_value - b_value).norm();
        max_abs = max_abs.max(diff);
        if scale > 0.0 {
            max_rel = max_rel.max(diff / scale);
        }
        entries.push(EquivalenceEntry {
            a_value,
            b_value,
            scale,
        });
    }
    Ok(EquivalenceReport {
        entries,
        max_abs_difference: max_abs,
        max_relative_difference: max_rel,
    })
}
