//! Named verification suites. Each returns its check records; randomness is
//! drawn from a ChaCha8 stream keyed by (seed, suite) so a suite's inputs do
//! not depend on which other suites run.

use std::f64::consts::PI;
use std::sync::Arc;

use emfield_core::grid::{AngularRule, AngularScheme, GridSpec, LightconeGrid, OctahedralRotation};
use emfield_core::ladder::{
    commutator_scale, commutator_vev, equivalence_check, field_vev, relabel_c, vacuum_expectation, FieldKind,
    FieldSymbol, LadderOp, OpKind, OperatorWord, WordTemplate,
};
use emfield_core::pairing::{bracket_scale, inner_product, positivity_report_with, GramContext, LabelId, PhysicalConstants};
use emfield_core::presets;
use emfield_core::sampler::{covariance_matrix, draw_samples, moment_report, CovarianceMatrix, MomentCheck, BAND_SIGMAS};
use emfield_core::tensor::{
    boost, contract_kfkg, duality_project, hodge_dual, is_lorentz, AntisymTensor2, FourVector, Sign,
    LORENTZ_TOLERANCE,
};
use emfield_core::testfn::{AnalyticTestFunction, OnShellTestFunction};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{RunConfig, DEFAULT_SAMPLES, SUITES};
use crate::error::CliError;
use crate::report::{Check, CheckBuilder};

pub struct SuiteEnv<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub grid: Arc<LightconeGrid>,
}

/// Checks plus optional tabulated results for the report's `results` block.
pub struct SuiteOutput {
    pub checks: Vec<Check>,
    pub results: Value,
}

impl From<Vec<Check>> for SuiteOutput {
    fn from(checks: Vec<Check>) -> Self {
        SuiteOutput {
            checks,
            results: Value::Null,
        }
    }
}

impl SuiteEnv<'_> {
    fn rng(&self, suite: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let stream = SUITES.iter().position(|s| *s == suite).unwrap_or(SUITES.len());
        rng.set_stream(stream as u64);
        rng
    }

    fn constants(&self) -> PhysicalConstants {
        self.config.constants
    }

    fn tol(&self) -> &crate::config::Tolerances {
        &self.config.tolerances
    }

    fn packets(&self, rng: &mut ChaCha8Rng, n: usize, real: bool) -> Vec<OnShellTestFunction> {
        (0..n)
            .map(|_| presets::random_packet(rng, real).sample_on_grid(&self.grid))
            .collect()
    }

    fn context(&self, functions: Vec<OnShellTestFunction>) -> Result<(GramContext, Vec<LabelId>), CliError> {
        let mut ctx = GramContext::new(self.constants());
        if let Some(cap) = self.config.word_cap {
            ctx.set_word_cap(cap)?;
        }
        let ids = functions
            .into_iter()
            .enumerate()
            .map(|(i, f)| ctx.register(&format!("r{i}"), f))
            .collect::<Result<_, _>>()?;
        Ok((ctx, ids))
    }

    /// Declared pair for contrast and convergence, else the built-in default.
    fn named_pair(&self) -> Result<(AnalyticTestFunction, AnalyticTestFunction), CliError> {
        match &self.config.convergence.pair {
            Some([a, b]) => Ok((self.config.analytic(a)?, self.config.analytic(b)?)),
            None => Ok(presets::default_pair()),
        }
    }
}

pub fn run(name: &str, env: &SuiteEnv) -> Result<SuiteOutput, CliError> {
    match name {
        "tensor" => tensor(env).map(Into::into),
        "grid" => grid(env).map(Into::into),
        "maps" => maps(env).map(Into::into),
        "pairing" => pairing(env).map(Into::into),
        "commutators" => commutators(env).map(Into::into),
        "equivalence" => equivalence(env).map(Into::into),
        "appendix" => appendix(env).map(Into::into),
        "covariance" => covariance(env).map(Into::into),
        "sampler" => sampler(env).map(Into::into),
        "lorentz" => lorentz(env),
        "convergence" => convergence(env),
        other => Err(CliError::Config(format!("unknown suite `{other}`"))),
    }
}

fn fmax(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn tensor(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("tensor");
    let tol = env.tol().algebraic;
    let mut rng = env.rng("tensor");
    let fs: Vec<AntisymTensor2> = (0..100).map(|_| presets::random_tensor(&mut rng)).collect();
    let rel = |e: f64, f: &AntisymTensor2| e / f.max_abs();
    let n = json!({ "tensors": fs.len() });

    let involution = fmax(fs.iter().map(|f| rel((hodge_dual(&hodge_dual(f)) + *f).max_abs(), f)));
    let mut idem = 0.0f64;
    let mut complete = 0.0f64;
    let mut orth = 0.0f64;
    let mut eigen = 0.0f64;
    let mut antisym = true;
    for f in &fs {
        let (p, m) = (duality_project(f, Sign::Plus), duality_project(f, Sign::Minus));
        idem = idem
            .max(rel(duality_project(&p, Sign::Plus).max_abs_diff(&p), f))
            .max(rel(duality_project(&m, Sign::Minus).max_abs_diff(&m), f));
        complete = complete.max(rel((p + m).max_abs_diff(f), f));
        orth = orth
            .max(rel(duality_project(&p, Sign::Minus).max_abs(), f))
            .max(rel(duality_project(&m, Sign::Plus).max_abs(), f));
        // P₊F satisfies ★X = −iX, P₋F satisfies ★X = +iX
        let i = Complex64::new(0.0, 1.0);
        eigen = eigen
            .max(rel(hodge_dual(&p).max_abs_diff(&p.scale(-i)), f))
            .max(rel(hodge_dual(&m).max_abs_diff(&m.scale(i)), f));
        antisym &= hodge_dual(f).is_antisymmetric() && p.is_antisymmetric() && m.is_antisymmetric();
    }

    let mut symmetric = 0.0f64;
    let mut linear = 0.0f64;
    for pair in fs.chunks(3) {
        let [f, g, h] = pair else { continue };
        let dir: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let k = FourVector::on_shell(dir);
        let fg = contract_kfkg(&k, f, g);
        let scale = 2.0 * k.time().powi(2) * f.max_abs() * g.max_abs() * 16.0;
        symmetric = symmetric.max((fg - contract_kfkg(&k, g, f)).norm() / scale);
        let alpha = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let combo = *g + h.scale(alpha);
        let expected = fg + contract_kfkg(&k, f, h) * alpha;
        linear = linear.max((contract_kfkg(&k, f, &combo) - expected).norm() / (scale * (1.0 + alpha.norm()) * 2.0));
    }

    let lorentz_ok = (0..3).all(|axis| is_lorentz(&boost(axis, 0.7), LORENTZ_TOLERANCE))
        && OctahedralRotation::all().iter().all(|r| is_lorentz(&r.to_lorentz(), 0.0));

    Ok(vec![
        b.at_most("hodge_involution", involution, tol, 1.0, n.clone()),
        b.at_most("projector_idempotence", idem, tol, 1.0, n.clone()),
        b.at_most("projector_completeness", complete, tol, 1.0, n.clone()),
        b.at_most("projector_orthogonality", orth, tol, 1.0, n.clone()),
        b.at_most("projector_eigenvectors", eigen, tol, 1.0, n.clone()),
        b.boolean("antisymmetry_preserved", antisym, n),
        b.at_most("contraction_symmetric", symmetric, tol, 1.0, json!({"pairs": 33})),
        b.at_most("contraction_linear", linear, tol, 1.0, json!({"pairs": 33})),
        b.boolean("lorentz_matrices", lorentz_ok, json!({"boosts": 3, "rotations": 24})),
    ])
}

fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        1.0
    } else {
        n as f64 * double_factorial(n - 2)
    }
}

/// `∫ xᵃ yᵇ zᶜ dΩ` over the unit sphere.
fn sphere_monomial(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let (a, b, c) = (a as i64, b as i64, c as i64);
    4.0 * PI * double_factorial(a - 1) * double_factorial(b - 1) * double_factorial(c - 1)
        / double_factorial(a + b + c + 1)
}

fn radial_antiderivative(r: f64) -> f64 {
    PI.sqrt() / 4.0 * libm::erf(r) - r / 2.0 * (-r * r).exp()
}

fn grid(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("grid");
    let tol = env.tol().algebraic;
    let mut checks = Vec::new();
    for scheme in [AngularScheme::Octahedron6, AngularScheme::Lebedev26, AngularScheme::Cube98] {
        let rule = AngularRule::from_scheme(scheme);
        let degree = scheme.exact_degree();
        let mut worst = 0.0f64;
        for a in 0..=degree {
            for bb in 0..=degree - a {
                for c in 0..=degree - a - bb {
                    let q = rule.integrate(|d| d[0].powi(a as i32) * d[1].powi(bb as i32) * d[2].powi(c as i32));
                    worst = worst.max((q - sphere_monomial(a, bb, c)).abs());
                }
            }
        }
        let positive = rule.weights().iter().all(|&w| w > 0.0);
        checks.push(b.at_most(
            &format!("angular_exactness_{scheme}"),
            worst,
            tol,
            4.0 * PI,
            json!({"directions": rule.len(), "degree": degree, "weights_positive": positive}),
        ));
    }

    let g = &env.grid;
    let parity = g.nodes().iter().enumerate().all(|(i, n)| {
        let p = g.node(n.partner);
        g.node_negation(n.partner) == i
            && p.weight == n.weight
            && p.omega == n.omega
            && p.kvec.iter().zip(&n.kvec).all(|(x, y)| *x == -*y)
    });
    let positive = g.nodes().iter().all(|n| n.weight > 0.0);
    checks.push(b.boolean("weights_positive", positive, json!({"nodes": g.len()})));
    checks.push(b.boolean("parity_pairing_exact", parity, json!({"nodes": g.len()})));

    let mut closed = true;
    for r in OctahedralRotation::all() {
        match g.rotation_permutation(&r) {
            Ok(perm) => {
                let mut seen = vec![false; g.len()];
                for &j in perm {
                    closed &= !std::mem::replace(&mut seen[j], true);
                }
            }
            Err(_) => closed = false,
        }
    }
    checks.push(b.boolean("rotation_closure", closed, json!({"rotations": 24})));

    // Σ w·2ω·e^{−ω²} against (4π/(2π)³)∫ r² e^{−r²} dr over the window
    let spec = env.config.grid;
    let exact = 4.0 * PI / (2.0 * PI).powi(3)
        * (radial_antiderivative(spec.k_max) - radial_antiderivative(spec.k_min));
    let levels = [4usize, 8, 16];
    let errors = levels
        .iter()
        .map(|&n| {
            let grid = LightconeGrid::build(&GridSpec {
                radial_nodes: n,
                ..spec
            })?;
            let sum = grid.integrate(|node| 2.0 * node.omega * (-node.omega * node.omega).exp());
            Ok((sum - exact).abs())
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    checks.push(b.boolean(
        "radial_convergence_monotone",
        monotone,
        json!({"levels": levels, "errors": errors, "exact": exact}),
    ));
    Ok(checks)
}

fn maps(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("maps");
    let tol = env.tol().maps;
    let mut rng = env.rng("maps");
    let fs = env.packets(&mut rng, 20, false);
    let reals = env.packets(&mut rng, 5, true);
    let n = json!({"functions": fs.len(), "real_functions": reals.len()});

    let mut completeness = 0.0f64;
    let mut orthogonality = 0.0f64;
    for f in &fs {
        let s = f.max_abs();
        let split = f.four_part_split();
        completeness = completeness.max(split.sum().max_abs_diff(f) / s);
        for (key, part) in split.iter() {
            for (key2, sub) in part.four_part_split().iter() {
                let leak = if key2 == key { sub.max_abs_diff(part) } else { sub.max_abs() };
                orthogonality = orthogonality.max(leak / s);
            }
        }
    }

    let mut linear = 0.0f64;
    let mut commute = 0.0f64;
    let mut idempotent = 0.0f64;
    let mut even = 0.0f64;
    for pair in fs.chunks(2) {
        let (f, h) = (&pair[0], &pair[1]);
        let alpha = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let beta = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let lhs = f.scale(alpha).add(&h.scale(beta))?.bullet_map();
        let rhs = f.bullet_map().scale(alpha).add(&h.bullet_map().scale(beta))?;
        linear = linear.max(lhs.relative_diff(&rhs));
        for g in [f, h] {
            let bg = g.bullet_map();
            commute = commute.max(bg.star_conjugate().relative_diff(&g.star_conjugate().bullet_map()));
            idempotent = idempotent.max(bg.bullet_map().relative_diff(&bg));
            even = even.max(bg.evenness_defect() / bg.max_abs());
        }
    }

    let mut reality = 0.0f64;
    let mut pointwise_real = 0.0f64;
    for f in &reals {
        let bf = f.bullet_map();
        reality = reality.max(bf.reality_defect());
        let s = bf.max_abs();
        pointwise_real = pointwise_real.max(fmax(bf.plus().iter().map(|t| t.max_abs_diff(&t.conj()) / s)));
    }

    Ok(vec![
        b.at_most("split_completeness", completeness, tol, 1.0, n.clone()),
        b.at_most("split_orthogonality", orthogonality, tol, 1.0, n.clone()),
        b.at_most("bullet_linearity", linear, tol, 1.0, n.clone()),
        b.at_most("bullet_star_commute", commute, tol, 1.0, n.clone()),
        b.at_most("bullet_idempotence", idempotent, tol, 1.0, n.clone()),
        b.at_most("bullet_evenness", even, tol, 1.0, n.clone()),
        b.at_most("bullet_preserves_reality", reality, tol, 1.0, n.clone()),
        b.at_most("bullet_real_plus_sheet", pointwise_real, tol, 1.0, n),
    ])
}

fn pairing(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("pairing");
    let tol = env.tol().pairing;
    let c = env.constants();
    let mut rng = env.rng("pairing");
    let fs = env.packets(&mut rng, 8, false);
    let mut checks = Vec::new();

    let mut herm = 0.0f64;
    for f in &fs {
        for g in &fs {
            let d = (inner_product(f, g, &c)? - inner_product(g, f, &c)?.conj()).norm();
            herm = herm.max(d / bracket_scale(f, g, &c)?);
        }
    }
    checks.push(b.at_most("hermiticity", herm, tol, 1.0, json!({"functions": fs.len()})));

    let mut worst = f64::INFINITY;
    let mut flagged = 0;
    for _ in 0..20 {
        let (ctx, ids) = env.context(env.packets(&mut rng, 6, false))?;
        let report = positivity_report_with(&ctx.gram_matrix(&ids), env.tol().positivity);
        worst = worst.min(report.min_eigenvalue().unwrap_or(0.0) / report.lambda_max);
        flagged += report.flagged.len();
    }
    checks.push(b.at_least(
        "gram_positivity",
        worst,
        -env.tol().positivity,
        1.0,
        json!({"trials": 20, "size": 6, "min_eigenvalue_over_max": worst, "flagged": flagged}),
    ));

    let gauge = AnalyticTestFunction::pure_gauge(
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.5],
        FourVector::new(0.4, 0.2, -0.1, 0.3),
        0.9,
    )?
    .sample_on_grid(&env.grid);
    let gauge_scale = bracket_scale(&gauge, &gauge, &c)?;
    checks.push(b.at_most(
        "pure_gauge_null",
        inner_product(&gauge, &gauge, &c)?.norm(),
        tol,
        gauge_scale,
        Value::Null,
    ));

    // a single node of weight 1 at k = (1, 0, 0, 1) carrying F₀₁ = 1 has (f, f) = ℏ
    let rule = AngularRule::from_half(&[([0.0, 0.0, 1.0], 2.0 * (2.0 * PI).powi(3))])?;
    let single = Arc::new(LightconeGrid::from_parts(&[(1.0, 1.0)], &rule)?);
    let mut plus = vec![AntisymTensor2::ZERO; single.len()];
    plus[0] = AntisymTensor2::from_real_components([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let f = OnShellTestFunction::from_sheets(&single, plus, vec![AntisymTensor2::ZERO; single.len()])?;
    let hand = inner_product(&f, &f, &c)?;
    checks.push(b.at_most(
        "single_node_value",
        (hand - Complex64::new(c.hbar, 0.0)).norm(),
        0.0,
        1.0,
        json!({"value": [hand.re, hand.im], "expected": c.hbar}),
    ));

    let doubled = PhysicalConstants::new(2.0 * c.hbar)?;
    let scaling = fmax(fs.windows(2).map(|w| {
        let a = inner_product(&w[0], &w[1], &c).unwrap_or_default();
        let d = inner_product(&w[0], &w[1], &doubled).unwrap_or_default();
        (d - a * 2.0).norm() / a.norm()
    }));
    checks.push(b.at_most("hbar_scaling", scaling, tol, 1.0, Value::Null));

    let mut rot = 0.0f64;
    for r in OctahedralRotation::all() {
        let rotated: Vec<_> = fs[..3].iter().map(|f| f.rotated(&r)).collect::<Result<_, _>>()?;
        for i in 0..3 {
            for j in 0..3 {
                let d = (inner_product(&rotated[i], &rotated[j], &c)? - inner_product(&fs[i], &fs[j], &c)?).norm();
                rot = rot.max(d / bracket_scale(&fs[i], &fs[j], &c)?);
            }
        }
    }
    checks.push(b.at_most("rotation_invariance", rot, env.tol().rotation, 1.0, json!({"rotations": 24})));

    let (f, h) = (fs[0].bullet_map(), fs[1].bullet_map());
    let g = &env.grid;
    let mut even = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..g.len() {
        let j = g.node_negation(i);
        let a = contract_kfkg(&g.node(i).momentum(), &f.plus()[i], &h.plus()[i]);
        let m = contract_kfkg(&g.node(j).negative_frequency_momentum(), &f.minus()[j], &h.minus()[j]);
        even = even.max((a - m).norm());
        scale = scale.max(a.norm());
    }
    checks.push(b.at_most("bullet_integrand_even", even, tol, scale, Value::Null));
    Ok(checks)
}

fn probe_words(rng: &mut ChaCha8Rng, probes: &[LabelId]) -> Vec<(OperatorWord, OperatorWord)> {
    let mut out = vec![(OperatorWord::empty(), OperatorWord::empty())];
    for len in 1..=3 {
        for _ in 0..3 {
            let ops: Vec<LadderOp> = (0..len)
                .map(|_| LadderOp {
                    kind: if rng.random_bool(0.5) { OpKind::Create } else { OpKind::Annihilate },
                    label: probes[rng.random_range(0..probes.len())],
                })
                .collect();
            for cut in 0..=len {
                out.push((OperatorWord::new(ops[..cut].to_vec()), OperatorWord::new(ops[cut..].to_vec())));
            }
        }
    }
    out
}

/// Worst `|⟨L [X_f, X_g] R⟩| / scale` over 5 random complex pairs with probe sandwiches.
fn sandwiched_commutators(env: &SuiteEnv, rng: &mut ChaCha8Rng, kind: FieldKind) -> Result<(f64, usize), CliError> {
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for _ in 0..5 {
        let (mut ctx, ids) = env.context(env.packets(rng, 4, false))?;
        let (f, g) = (ids[0], ids[1]);
        ctx.prepare_fields(&[FieldSymbol::new(kind, f), FieldSymbol::new(kind, g)])?;
        for (left, right) in probe_words(rng, &ids[2..]) {
            let v = commutator_vev(kind, f, g, &left, &right, &ctx)?;
            let s = commutator_scale(kind, f, g, &left, &right, &ctx)?;
            worst = worst.max(v.norm() / s);
            evaluated += 1;
        }
    }
    Ok((worst, evaluated))
}

fn next_permutation(v: &mut [usize]) {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        v.reverse();
        return;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot has a larger successor");
    v.swap(i - 1, j);
    v[i..].reverse();
}

fn commutators(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("commutators");
    let tol = env.tol().commutator;
    let c = env.constants();
    let mut rng = env.rng("commutators");
    let mut checks = Vec::new();

    let (worst, evaluated) = sandwiched_commutators(env, &mut rng, FieldKind::Chi)?;
    checks.push(b.at_most(
        "chi_commutator",
        worst,
        tol,
        1.0,
        json!({"pairs": 5, "sandwiches": evaluated, "max_probe_length": 3}),
    ));

    let fs = env.packets(&mut rng, 2, false);
    let fg = inner_product(&fs[0].bullet_map().star_conjugate(), &fs[1].bullet_map(), &c)?;
    let gf = inner_product(&fs[1].bullet_map().star_conjugate(), &fs[0].bullet_map(), &c)?;
    checks.push(b.at_most("chi_bracket_symmetry", (fg - gf).norm(), tol, fg.norm(), Value::Null));

    let (mut ctx, ids) = env.context(env.packets(&mut rng, 4, false))?;
    let symbols: Vec<FieldSymbol> = ids.iter().map(|&id| FieldSymbol::new(FieldKind::Chi, id)).collect();
    ctx.prepare_fields(&symbols)?;
    let base = field_vev(&symbols, &ctx)?;
    let mut order = [0usize, 1, 2, 3];
    let mut perm = 0.0f64;
    for _ in 0..24 {
        let permuted: Vec<FieldSymbol> = order.iter().map(|&i| symbols[i]).collect();
        perm = perm.max((field_vev(&permuted, &ctx)? - base).norm());
        next_permutation(&mut order);
    }
    checks.push(b.at_most("four_point_permutations", perm, tol, base.norm(), json!({"permutations": 24})));

    let (f, g) = env.named_pair()?;
    let mut pctx = GramContext::new(c);
    let fi = pctx.register("f", f.sample_on_grid(&env.grid))?;
    let gi = pctx.register("g", g.sample_on_grid(&env.grid))?;
    pctx.prepare_fields(&[FieldSymbol::new(FieldKind::Phi, fi), FieldSymbol::new(FieldKind::Phi, gi)])?;
    let e = OperatorWord::empty();
    let v = commutator_vev(FieldKind::Phi, fi, gi, &e, &e, &pctx)?;
    let s = commutator_scale(FieldKind::Phi, fi, gi, &e, &e, &pctx)?;
    checks.push(b.at_least(
        "phi_contrast",
        v.norm(),
        env.tol().contrast,
        s,
        json!({"value": [v.re, v.im]}),
    ));
    Ok(checks)
}

/// Sum over annihilator→creator matchings with each creator to the right.
fn enumerate_matchings(ops: &[LadderOp], used: &mut [bool], ctx: &GramContext) -> (Complex64, f64) {
    let Some(i) = (0..ops.len()).find(|&i| !used[i]) else {
        return (Complex64::new(1.0, 0.0), 1.0);
    };
    if ops[i].kind == OpKind::Create {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    used[i] = true;
    let mut total = (Complex64::new(0.0, 0.0), 0.0);
    for j in i + 1..ops.len() {
        if !used[j] && ops[j].kind == OpKind::Create {
            used[j] = true;
            let br = ctx.bracket(ops[i].label, ops[j].label);
            let (v, a) = enumerate_matchings(ops, used, ctx);
            total.0 += br * v;
            total.1 += br.norm() * a;
            used[j] = false;
        }
    }
    used[i] = false;
    total
}

fn equivalence(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("equivalence");
    let mut rng = env.rng("equivalence");
    let (mut ctx, ids) = env.context(env.packets(&mut rng, 3, false))?;

    let alphabet: Vec<LadderOp> = ids
        .iter()
        .flat_map(|&id| [LadderOp::create(id), LadderOp::annihilate(id)])
        .collect();
    let mut wick = 0.0f64;
    let mut words = 0usize;
    for len in 0..=6u32 {
        for mut code in 0..alphabet.len().pow(len) {
            let ops: Vec<LadderOp> = (0..len)
                .map(|_| {
                    let op = alphabet[code % alphabet.len()];
                    code /= alphabet.len();
                    op
                })
                .collect();
            let engine = vacuum_expectation(&OperatorWord::new(ops.clone()), &ctx)?;
            let (oracle, abs) = enumerate_matchings(&ops, &mut vec![false; ops.len()], &ctx);
            let d = (engine - oracle).norm();
            wick = wick.max(if abs > 0.0 { d / abs } else { d });
            words += 1;
        }
    }

    let targets: Vec<(String, Vec<AntisymTensor2>)> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (format!("h{i}"), ctx.function(id).plus().to_vec()))
        .collect();
    let targets: Vec<(&str, Vec<AntisymTensor2>)> = targets.iter().map(|(n, h)| (n.as_str(), h.clone())).collect();
    let templates: Vec<WordTemplate> = (0..20)
        .map(|_| {
            let half = rng.random_range(0..=3);
            let mut kinds: Vec<OpKind> = std::iter::repeat_n(OpKind::Create, half)
                .chain(std::iter::repeat_n(OpKind::Annihilate, half))
                .collect();
            kinds.shuffle(&mut rng);
            WordTemplate(kinds.into_iter().map(|k| (k, rng.random_range(0..3))).collect())
        })
        .collect();
    let report = equivalence_check(&mut ctx, &targets, &templates)?;

    Ok(vec![
        b.at_most(
            "wick_engine_vs_enumeration",
            wick,
            env.tol().equivalence,
            1.0,
            json!({"words": words, "max_length": 6, "labels": 3}),
        ),
        b.at_most(
            "a_vs_b_expectations",
            report.max_relative_difference,
            env.tol().equivalence,
            1.0,
            json!({"words": templates.len(), "max_abs_difference": report.max_abs_difference}),
        ),
    ])
}

fn appendix(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("appendix");
    let tol = env.tol().maps;
    let c = env.constants();
    let mut rng = env.rng("appendix");
    let mut checks = Vec::new();

    let (worst, evaluated) = sandwiched_commutators(env, &mut rng, FieldKind::Xi)?;
    checks.push(b.at_most(
        "xi_commutator",
        worst,
        env.tol().commutator,
        1.0,
        json!({"pairs": 5, "sandwiches": evaluated, "max_probe_length": 3}),
    ));

    let fs = env.packets(&mut rng, 10, false);
    let reals = env.packets(&mut rng, 5, true);
    let i = Complex64::new(0.0, 1.0);
    let mut additive = 0.0f64;
    let mut nonlinear = f64::INFINITY;
    let mut idempotent = 0.0f64;
    let mut plus_content = 0.0f64;
    for pair in fs.chunks(2) {
        let (f, h) = (&pair[0], &pair[1]);
        additive = additive.max(f.add(h)?.box_map().relative_diff(&f.box_map().add(&h.box_map())?));
        nonlinear = nonlinear.min(f.scale(i).box_map().relative_diff(&f.box_map().scale(i)));
        for g in [f, h] {
            let x = g.box_map();
            idempotent = idempotent.max(x.box_map().relative_diff(&x));
            let s = g.max_abs();
            plus_content = plus_content.max(fmax(
                x.plus()
                    .iter()
                    .zip(g.plus())
                    .map(|(a, o)| duality_project(a, Sign::Plus).max_abs_diff(&duality_project(o, Sign::Plus)) / s),
            ));
        }
    }
    let reality = fmax(reals.iter().map(|f| f.box_map().reality_defect()));
    let n = json!({"functions": fs.len()});
    checks.push(b.at_most("box_additivity", additive, tol, 1.0, n.clone()));
    checks.push(b.at_least(
        "box_not_complex_linear",
        nonlinear,
        0.1,
        1.0,
        json!({"lambda": "i", "functions": fs.len()}),
    ));
    checks.push(b.at_most("box_idempotence", idempotent, tol, 1.0, n.clone()));
    checks.push(b.at_most("box_keeps_plus_content", plus_content, tol, 1.0, n));
    checks.push(b.at_most("box_preserves_reality", reality, tol, 1.0, json!({"functions": reals.len()})));

    let (mut ctx, ids) = env.context(fs[..2].to_vec())?;
    let (cf, cg) = (relabel_c(&mut ctx, ids[0])?, relabel_c(&mut ctx, ids[1])?);
    let engine = vacuum_expectation(&OperatorWord::new(vec![LadderOp::annihilate(cf), LadderOp::create(cg)]), &ctx)?;
    let direct = inner_product(&fs[0].box_map(), &fs[1].box_map(), &c)?;
    checks.push(b.at_most(
        "c_two_point",
        (engine - direct).norm(),
        tol,
        bracket_scale(&fs[0].box_map(), &fs[1].box_map(), &c)?,
        Value::Null,
    ));
    Ok(checks)
}

pub fn covariance_checks(b: &CheckBuilder, cov: &CovarianceMatrix, env: &SuiteEnv) -> Vec<Check> {
    let n = cov.dim();
    let eig = nalgebra::SymmetricEigen::new(cov.matrix.clone()).eigenvalues;
    let (min, max) = if n > 0 { (eig.min(), eig.max()) } else { (0.0, 0.0) };
    vec![
        b.at_most(
            "two_path_agreement",
            cov.two_path_difference,
            env.tol().commutator,
            cov.scale,
            json!({"labels": cov.names}),
        ),
        b.at_most("imaginary_parts", cov.max_imaginary, env.tol().commutator, cov.scale, Value::Null),
        b.at_most("symmetry", cov.asymmetry(), env.tol().commutator, cov.scale, Value::Null),
        b.at_least(
            "positive_semidefinite",
            min,
            -env.tol().positivity,
            max.max(0.0),
            json!({"min_eigenvalue": min, "max_eigenvalue": max}),
        ),
    ]
}

fn covariance(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("covariance");
    let mut ctx = env.config.context(&env.grid)?;
    let labels = env.config.sample_labels(&mut ctx, env.seed)?;
    let cov = covariance_matrix(&mut ctx, &labels)?;
    let mut checks = covariance_checks(&b, &cov, env);

    let mut rng = env.rng("covariance");
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let (mut ctx, ids) = env.context(env.packets(&mut rng, 3, true))?;
        let cov = covariance_matrix(&mut ctx, &ids)?;
        let eig = nalgebra::SymmetricEigen::new(cov.matrix.clone()).eigenvalues;
        worst = worst.min(eig.min() / eig.max());
    }
    checks.push(b.at_least(
        "random_sets_positive_semidefinite",
        worst,
        -env.tol().positivity,
        1.0,
        json!({"trials": 20, "min_eigenvalue_over_max": worst}),
    ));
    Ok(checks)
}

fn sampler(env: &SuiteEnv) -> Result<Vec<Check>, CliError> {
    let b = CheckBuilder::new("sampler");
    let mut ctx = env.config.context(&env.grid)?;
    let labels = env.config.sample_labels(&mut ctx, env.seed)?;
    let cov = covariance_matrix(&mut ctx, &labels)?;
    let rows = env.config.samples.unwrap_or(DEFAULT_SAMPLES);
    let batch = draw_samples(&cov, rows, env.seed)?;
    let report = moment_report(&batch, &cov, Some((&ctx, &labels)))?;
    let sigmas = env.tol().band_sigmas;
    let moment_check = |name: &str, checks: &[MomentCheck]| {
        // report bands are BAND_SIGMAS wide; rescale to the configured width
        let worst = fmax(
            checks
                .iter()
                .map(|m| if m.band > 0.0 { (m.empirical - m.target).abs() / (m.band / BAND_SIGMAS) } else { 0.0 }),
        );
        let outside = checks
            .iter()
            .filter(|m| (m.empirical - m.target).abs() > m.band / BAND_SIGMAS * sigmas)
            .count();
        b.at_most(
            name,
            worst,
            sigmas,
            1.0,
            json!({"moments": checks.len(), "outside_band": outside, "unit": "standard errors"}),
        )
    };
    let mut checks = vec![
        moment_check("second_moments", &report.second),
        moment_check("fourth_moments", &report.fourth),
        moment_check("odd_moments", &[report.first.clone(), report.third.clone()].concat()),
        b.at_most(
            "engine_four_point_vs_isserlis",
            report.engine_isserlis_difference.unwrap_or(f64::INFINITY),
            env.tol().commutator,
            1.0,
            Value::Null,
        ),
    ];
    let rerun = draw_samples(&cov, rows, env.seed)?;
    let (mut a, mut c) = (Vec::new(), Vec::new());
    batch.write_csv(&mut a)?;
    rerun.write_csv(&mut c)?;
    checks.push(b.boolean("fixed_seed_reproducible", a == c, json!({"rows": rows, "seed": env.seed})));
    Ok(checks)
}

/// Function pairs for Lorentz checks: all pairs of declared functions, or the
/// built-in narrow pair.
fn lorentz_pairs(env: &SuiteEnv) -> Result<Vec<(String, AnalyticTestFunction, String, AnalyticTestFunction)>, CliError> {
    let declared = &env.config.functions;
    if declared.len() < 2 {
        let (f, g) = presets::narrow_pair();
        return Ok(vec![("narrow_f".into(), f, "narrow_g".into(), g)]);
    }
    let mut out = Vec::new();
    for (i, a) in declared.iter().enumerate() {
        for bb in &declared[i + 1..] {
            out.push((a.name().to_string(), a.build()?, bb.name().to_string(), bb.build()?));
        }
    }
    Ok(out)
}

pub fn lorentz(env: &SuiteEnv) -> Result<SuiteOutput, CliError> {
    let b = CheckBuilder::new("lorentz");
    let c = env.constants();
    let pairs = lorentz_pairs(env)?;
    let mut checks = Vec::new();

    let mut rot = 0.0f64;
    let mut analytic_vs_discrete = 0.0f64;
    for (_, f, _, g) in &pairs {
        let (fs, gs) = (f.sample_on_grid(&env.grid), g.sample_on_grid(&env.grid));
        let base = inner_product(&fs, &gs, &c)?;
        let scale = bracket_scale(&fs, &gs, &c)?;
        for r in OctahedralRotation::all() {
            let (fr, gr) = (fs.rotated(&r)?, gs.rotated(&r)?);
            rot = rot.max((inner_product(&fr, &gr, &c)? - base).norm() / scale);
            let exact = f.lorentz_transform(&r.to_lorentz())?.sample_on_grid(&env.grid);
            analytic_vs_discrete = analytic_vs_discrete.max(exact.max_abs_diff(&fr) / fs.max_abs());
        }
    }
    checks.push(b.at_most("rotations", rot, env.tol().rotation, 1.0, json!({"rotations": 24, "pairs": pairs.len()})));
    checks.push(b.at_most(
        "rotation_analytic_vs_permuted",
        analytic_vs_discrete,
        env.tol().maps,
        1.0,
        Value::Null,
    ));

    let boost_grid = Arc::new(LightconeGrid::build(&env.config.lorentz.grid)?);
    let axis = env.config.lorentz.axis;
    let mut table = Vec::new();
    let mut identity_exact = true;
    let mut worst = 0.0f64;
    for (fname, f, gname, g) in &pairs {
        let base = inner_product(&f.sample_on_grid(&boost_grid), &g.sample_on_grid(&boost_grid), &c)?;
        let id = boost(axis, 0.0);
        let same = inner_product(
            &f.lorentz_transform(&id)?.sample_on_grid(&boost_grid),
            &g.lorentz_transform(&id)?.sample_on_grid(&boost_grid),
            &c,
        )?;
        identity_exact &= same == base;
        for &eta in &env.config.lorentz.rapidities {
            let l = boost(axis, eta);
            let v = inner_product(
                &f.lorentz_transform(&l)?.sample_on_grid(&boost_grid),
                &g.lorentz_transform(&l)?.sample_on_grid(&boost_grid),
                &c,
            )?;
            let rel = (v - base).norm() / base.norm();
            worst = worst.max(rel);
            table.push(json!({
                "f": fname, "g": gname, "rapidity": eta, "axis": axis,
                "unboosted": [base.re, base.im], "boosted": [v.re, v.im], "relative_deviation": rel,
            }));
        }
    }
    checks.push(b.boolean("identity_boost_exact", identity_exact, Value::Null));
    checks.push(b.at_most(
        "boosts",
        worst,
        env.tol().boost,
        1.0,
        json!({"grid": env.config.lorentz.grid, "rapidities": env.config.lorentz.rapidities}),
    ));
    Ok(SuiteOutput {
        checks,
        results: json!({ "boosts": table }),
    })
}

pub fn convergence(env: &SuiteEnv) -> Result<SuiteOutput, CliError> {
    let b = CheckBuilder::new("convergence");
    let c = env.constants();
    let cfg = &env.config.convergence;
    let (f, g) = env.named_pair()?;
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    for &angular in &cfg.angular {
        let values = cfg
            .radial_levels
            .iter()
            .map(|&n| {
                let grid = Arc::new(LightconeGrid::build(&GridSpec {
                    radial_nodes: n,
                    angular,
                    ..env.config.grid
                })?);
                Ok(inner_product(&f.sample_on_grid(&grid), &g.sample_on_grid(&grid), &c)?)
            })
            .collect::<Result<Vec<Complex64>, CliError>>()?;
        let reference = values.last().map(|v| v.norm()).unwrap_or(0.0);
        let deltas: Vec<f64> = values
            .windows(2)
            .map(|w| {
                let d = (w[1] - w[0]).norm();
                if reference > 0.0 {
                    d / reference
                } else {
                    d
                }
            })
            .collect();
        let monotone = deltas.windows(2).all(|w| w[1] <= w[0]);
        let last = deltas.last().copied().unwrap_or(0.0);
        let details = json!({"angular": angular, "levels": cfg.radial_levels, "relative_deltas": deltas});
        checks.push(b.boolean(&format!("monotone_{angular}"), monotone, details.clone()));
        checks.push(b.at_most(&format!("final_delta_{angular}"), last, env.tol().convergence, 1.0, details));
        tables.push(json!({
            "angular": angular,
            "levels": cfg.radial_levels,
            "values": values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
            "relative_deltas": deltas,
        }));
    }
    Ok(SuiteOutput {
        checks,
        results: json!({ "convergence": tables }),
    })
}
