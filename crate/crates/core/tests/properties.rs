use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use emfield_core::grid::{AngularScheme, GridSpec, LightconeGrid};
use emfield_core::ladder::{field_vev, vacuum_expectation, FieldKind, FieldSymbol, LadderOp, OpKind, OperatorWord};
use emfield_core::pairing::{inner_product, GramContext, LabelId, PhysicalConstants};
use emfield_core::presets::random_packet;
use emfield_core::sampler::{covariance_matrix, draw_samples, moment_report};
use emfield_core::tensor::contract_kfkg;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(radial: usize) -> Arc<LightconeGrid> {
    Arc::new(LightconeGrid::build(&GridSpec::new(radial, AngularScheme::Lebedev26)).unwrap())
}

fn context(seed: u64, n: usize, real: bool) -> (GramContext, Vec<LabelId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = grid(8);
    let mut ctx = GramContext::new(PhysicalConstants::default());
    let ids = (0..n)
        .map(|i| ctx.register(&format!("f{i}"), random_packet(&mut rng, real).sample_on_grid(&g)).unwrap())
        .collect();
    (ctx, ids)
}

fn shared() -> &'static (GramContext, Vec<LabelId>) {
    static CTX: OnceLock<(GramContext, Vec<LabelId>)> = OnceLock::new();
    CTX.get_or_init(|| context(1, 4, false))
}

/// `∫ r² e^{−r²} dr = (√π/4) erf(r) − (r/2) e^{−r²}`.
fn radial_antiderivative(r: f64) -> f64 {
    PI.sqrt() / 4.0 * libm::erf(r) - r / 2.0 * (-r * r).exp()
}

#[test]
fn quadrature_converges_for_gaussian_integrand() {
    let spec = GridSpec::default();
    let exact = 4.0 * PI / (2.0 * PI).powi(3)
        * (radial_antiderivative(spec.k_max) - radial_antiderivative(spec.k_min));
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let g = grid(n);
            let sum = g.integrate(|node| 2.0 * node.omega * (-node.omega * node.omega).exp());
            (sum - exact).abs() / exact
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-8, "{errors:?}");
}

#[test]
fn quadratic_forms_are_nonnegative() {
    let (ctx, ids) = context(2, 6, false);
    let gram = ctx.gram_matrix(&ids);
    let max_norm = ids.iter().map(|&i| ctx.bracket(i, i).re).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let c: Vec<Complex64> = (0..ids.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..c.len() {
            for j in 0..c.len() {
                q += c[i].conj() * c[j] * gram[(i, j)];
            }
        }
        let weight: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        assert!(q.re >= -1e-12 * weight * max_norm);
    }
}

#[test]
fn bullet_integrand_is_even() {
    let (ctx, ids) = shared();
    let f = ctx.function(ids[0]).bullet_map();
    let h = ctx.function(ids[1]).bullet_map();
    let g = f.grid();
    for i in 0..g.len() {
        // −k for node i lives on the negative sheet at the parity partner
        let j = g.node_negation(i);
        let k = g.node(i).momentum();
        let minus_k = g.node(j).negative_frequency_momentum();
        assert_eq!(minus_k, -k);
        let a = contract_kfkg(&k, &f.plus()[i], &h.plus()[i]);
        let b = contract_kfkg(&minus_k, &f.minus()[j], &h.minus()[j]);
        assert!((a - b).norm() <= 1e-13 * a.norm().max(b.norm()), "node {i}: {a} vs {b}");
    }
}

#[test]
fn chi_commutator_symmetry_directly_and_through_the_engine() {
    let (ctx, ids) = context(4, 2, false);
    let k = PhysicalConstants::default();
    let (f, g) = (ctx.function(ids[0]), ctx.function(ids[1]));
    let fg = inner_product(&f.bullet_map().star_conjugate(), &g.bullet_map(), &k).unwrap();
    let gf = inner_product(&g.bullet_map().star_conjugate(), &f.bullet_map(), &k).unwrap();
    assert!((fg - gf).norm() <= 1e-13 * fg.norm());

    let mut ctx = ctx;
    let (xf, xg) = (FieldSymbol::new(FieldKind::Chi, ids[0]), FieldSymbol::new(FieldKind::Chi, ids[1]));
    ctx.prepare_fields(&[xf, xg]).unwrap();
    let a = field_vev(&[xf, xg], &ctx).unwrap();
    let b = field_vev(&[xg, xf], &ctx).unwrap();
    assert!((a - fg).norm() <= 1e-13 * fg.norm());
    assert!((a - b).norm() <= 1e-13 * fg.norm());
}

#[test]
fn empirical_error_shrinks_like_inverse_sqrt_n() {
    let (mut ctx, ids) = context(5, 2, true);
    let cov = covariance_matrix(&mut ctx, &ids).unwrap();
    let levels = [1_000usize, 10_000, 100_000];
    let mut rms = Vec::new();
    let mut bands = Vec::new();
    for &n in &levels {
        let mut sq = 0.0;
        let mut count = 0.0;
        let mut band = 0.0f64;
        for seed in 0..8 {
            let batch = draw_samples(&cov, n, seed).unwrap();
            let report = moment_report(&batch, &cov, None).unwrap();
            for m in &report.second {
                sq += (m.empirical - m.target).powi(2) / cov.scale.powi(2);
                count += 1.0;
                band = band.max(m.band);
            }
        }
        rms.push((sq / count).sqrt());
        bands.push(band);
    }
    for w in bands.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 10f64.sqrt()).abs() < 1e-9, "{bands:?}");
    }
    assert!(rms[0] > rms[1] && rms[1] > rms[2], "{rms:?}");
    // a decade in N should cost roughly √10 in error
    for w in rms.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..7.0).contains(&ratio), "{rms:?}");
    }
}

fn op_strategy() -> impl Strategy<Value = (bool, usize)> {
    (any::<bool>(), 0usize..4)
}

fn to_word(spec: &[(bool, usize)], ids: &[LabelId]) -> OperatorWord {
    spec.iter()
        .map(|&(create, l)| if create { LadderOp::create(ids[l]) } else { LadderOp::annihilate(ids[l]) })
        .collect()
}

fn brute_force(ops: &[LadderOp], ctx: &GramContext, used: &mut Vec<bool>) -> (Complex64, f64) {
    let Some(i) = (0..ops.len()).find(|&i| !used[i]) else {
        return (Complex64::new(1.0, 0.0), 1.0);
    };
    if ops[i].kind == OpKind::Create {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    used[i] = true;
    let mut total = (Complex64::new(0.0, 0.0), 0.0);
    for j in (i + 1..ops.len()).rev() {
        if !used[j] && ops[j].kind == OpKind::Create {
            used[j] = true;
            let b = ctx.bracket(ops[i].label, ops[j].label);
            let (v, a) = brute_force(ops, ctx, used);
            total.0 += b * v;
            total.1 += b.norm() * a;
            used[j] = false;
        }
    }
    used[i] = false;
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn engine_matches_matching_enumeration(spec in prop::collection::vec(op_strategy(), 0..=10)) {
        let (ctx, ids) = shared();
        let word = to_word(&spec, ids);
        let engine = vacuum_expectation(&word, ctx).unwrap();
        let (oracle, abs) = brute_force(word.ops(), ctx, &mut vec![false; word.len()]);
        prop_assert!((engine - oracle).norm() <= 1e-13 * abs.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn unbalanced_words_vanish(spec in prop::collection::vec(op_strategy(), 0..=9)) {
        let (ctx, ids) = shared();
        let creates = spec.iter().filter(|(c, _)| *c).count();
        prop_assume!(2 * creates != spec.len());
        let word = to_word(&spec, ids);
        prop_assert_eq!(vacuum_expectation(&word, ctx).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn state_is_hermitian(spec in prop::collection::vec(op_strategy(), 0..=8)) {
        let (ctx, ids) = shared();
        let word = to_word(&spec, ids);
        let w = vacuum_expectation(&word, ctx).unwrap();
        let wa = vacuum_expectation(&word.adjoint(), ctx).unwrap();
        let (_, abs) = brute_force(word.ops(), ctx, &mut vec![false; word.len()]);
        prop_assert!((wa - w.conj()).norm() <= 1e-13 * abs.max(f64::MIN_POSITIVE));
    }
}
