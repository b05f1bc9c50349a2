//! Classical Gaussian sampling of the commuting χ field over real test functions.
//!
//! Every χ_f commutes with every other, and the vacuum moments of a family of
//! commuting fields obey the Wick rule, so the joint moments coincide with
//! those of a zero-mean Gaussian vector with covariance `C_ij = ⟨χ_{f_i} χ_{f_j}⟩`.
//! Samples are drawn as `x = L z` with `L Lᵀ = C` from a symmetric eigen
//! factorization and `z` standard normal.
//!
//! RNG: ChaCha8 seeded with `seed_from_u64(seed)`, with stream id = row index,
//! so each row is independent of thread scheduling.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{field_vev, FieldKind, FieldSymbol};
use crate::pairing::{inner_product, GramContext, LabelId};

/// Star-deviation bound for a label to count as real.
pub const REALITY_TOLERANCE: f64 = 1e-12;
/// Negative eigenvalues down to `-PSD_FLOOR · λ_max` are clipped to zero.
pub const PSD_FLOOR: f64 = 1e-10;
/// Statistical band width in standard errors.
pub const BAND_SIGMAS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    pub names: Vec<String>,
    /// Real part of the pairing-path matrix.
    pub matrix: DMatrix<f64>,
    /// Largest `|Im C_ij|` before the real part was taken.
    pub max_imaginary: f64,
    /// Largest `|C_pairing − C_engine|` over all entries.
    pub two_path_difference: f64,
    /// Largest `|C_ij|`; reference magnitude for the two bounds above.
    pub scale: f64,
}

impl CovarianceMatrix {
    /// Wraps an explicit matrix; used for sampling without a pairing context.
    pub fn from_matrix(names: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "covariance is {}x{} but {} names were given",
                matrix.nrows(),
                matrix.ncols(),
                names.len()
            )));
        }
        let scale = matrix.amax();
        Ok(CovarianceMatrix {
            names,
            matrix,
            max_imaginary: 0.0,
            two_path_difference: 0.0,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |C_ij − C_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Symmetric square root `L` with `L Lᵀ = C`.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let lambda_max = eig.eigenvalues.max().max(0.0);
        let floor = -PSD_FLOOR * lambda_max;
        let mut v = eig.eigenvectors;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < floor {
                return Err(Error::NotPositiveSemidefinite {
                    eigenvalue: lambda,
                    floor,
                });
            }
            let s = lambda.max(0.0).sqrt();
            v.column_mut(j).scale_mut(s);
        }
        Ok(v)
    }
}

/// `C_ij = (f_i•*, f_j•)`, cross-checked against `⟨χ_{f_i} χ_{f_j}⟩` from the ladder engine.
pub fn covariance_matrix(ctx: &mut GramContext, labels: &[LabelId]) -> Result<CovarianceMatrix> {
    for &id in labels {
        let deviation = ctx.function(id).reality_defect();
        if deviation > REALITY_TOLERANCE {
            return Err(Error::NotReal {
                label: ctx.name(id).to_string(),
                deviation,
            });
        }
    }
    let symbols: Vec<FieldSymbol> = labels.iter().map(|&id| FieldSymbol::new(FieldKind::Chi, id)).collect();
    ctx.prepare_fields(&symbols)?;

    let n = labels.len();
    let bullets: Vec<_> = labels.iter().map(|&id| ctx.function(id).bullet_map()).collect();
    let bullet_stars: Vec<_> = bullets.iter().map(|b| b.star_conjugate()).collect();
    let mut matrix = DMatrix::zeros(n, n);
    let mut max_imaginary = 0.0f64;
    let mut two_path = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let direct = inner_product(&bullet_stars[i], &bullets[j], ctx.constants())?;
            let engine = field_vev(&[symbols[i], symbols[j]], ctx)?;
            matrix[(i, j)] = direct.re;
            max_imaginary = max_imaginary.max(direct.im.abs());
            two_path = two_path.max((direct - engine).norm());
        }
    }
    let scale = matrix.amax();
    Ok(CovarianceMatrix {
        names: labels.iter().map(|&id| ctx.name(id).to_string()).collect(),
        matrix,
        max_imaginary,
        two_path_difference: two_path,
        scale,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub names: Vec<String>,
    /// Row-major `rows × names.len()`.
    pub values: Vec<f64>,
    pub rows: usize,
    pub seed: u64,
    pub rng: &'static str,
}

impl SampleBatch {
    pub fn columns(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.columns();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero width
        let n = self.columns().max(1);
        self.values.chunks_exact(n).take(self.rows)
    }

    /// CSV with the label names as header and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        for r in 0..self.rows {
            let row = self.row(r);
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), seed_from_u64(seed), stream = row index";

/// `rows` i.i.d. draws from `N(0, C)`.
pub fn draw_samples(cov: &CovarianceMatrix, rows: usize, seed: u64) -> Result<SampleBatch> {
    if rows == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let l = cov.factor()?;
    let n = cov.dim();
    let mut values = vec![0.0; rows * n];
    if n > 0 {
        values.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for (i, x) in row.iter_mut().enumerate() {
                *x = (0..n).map(|j| l[(i, j)] * z[j]).sum();
            }
        });
    }
    Ok(SampleBatch {
        names: cov.names.clone(),
        values,
        rows,
        seed,
        rng: RNG_NAME,
    })
}

/// `E[x_{i₁} ⋯ x_{i_m}]` for a zero-mean Gaussian with covariance `c`:
/// the sum over perfect matchings of the index list.
pub fn isserlis(indices: &[usize], c: &DMatrix<f64>) -> f64 {
    match indices {
        [] => 1.0,
        [_] => 0.0,
        [first, rest @ ..] => {
            if indices.len() % 2 == 1 {
                return 0.0;
            }
            let mut total = 0.0;
            let mut remaining: Vec<usize> = rest.to_vec();
            for k in 0..rest.len() {
                let partner = remaining.remove(k);
                total += c[(*first, partner)] * isserlis(&remaining, c);
                remaining.insert(k, partner);
            }
            total
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub indices: Vec<usize>,
    pub empirical: f64,
    pub target: f64,
    /// `BAND_SIGMAS` standard errors of the empirical mean.
    pub band: f64,
    pub within_band: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub samples: usize,
    pub first: Vec<MomentCheck>,
    pub second: Vec<MomentCheck>,
    pub third: Vec<MomentCheck>,
    pub fourth: Vec<MomentCheck>,
    /// Largest `|⟨χχχχ⟩_engine − Isserlis|` relative to the largest fourth-moment target;
    /// `None` when no context was supplied.
    pub engine_isserlis_difference: Option<f64>,
    pub flagged: usize,
}

impl MomentReport {
    pub fn all_within_band(&self) -> bool {
        self.flagged == 0
    }

    pub fn checks(&self) -> impl Iterator<Item = &MomentCheck> {
        self.first.iter().chain(&self.second).chain(&self.third).chain(&self.fourth)
    }
}

fn multisets(n: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, order: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == order {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, order, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, order, 0, &mut Vec::new(), &mut out);
    out
}

const BLOCK_ROWS: usize = 4096;

/// Per-moment sums accumulated blockwise and reduced in block order, so the
/// result does not depend on the thread count.
fn empirical_means(batch: &SampleBatch, sets: &[Vec<usize>]) -> Vec<f64> {
    let n = batch.columns();
    if batch.rows == 0 || n == 0 {
        return vec![0.0; sets.len()];
    }
    let partials: Vec<Vec<f64>> = batch
        .values
        .par_chunks(BLOCK_ROWS * n)
        .map(|block| {
            let mut acc = vec![0.0; sets.len()];
            for row in block.chunks_exact(n) {
                for (a, set) in acc.iter_mut().zip(sets) {
                    *a += set.iter().map(|&i| row[i]).product::<f64>();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; sets.len()];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total.iter().map(|t| t / batch.rows as f64).collect()
}

/// Compares empirical moments up to order four against Isserlis targets built
/// from `cov`. With a context, also compares the ladder engine's
/// `⟨χ_iχ_jχ_kχ_l⟩` against the same targets; `labels` must then list the
/// base labels in column order.
pub fn moment_report(
    batch: &SampleBatch,
    cov: &CovarianceMatrix,
    engine: Option<(&GramContext, &[LabelId])>,
) -> Result<MomentReport> {
    let n = cov.dim();
    if batch.columns() != n {
        return Err(Error::InvalidArgument(format!(
            "batch has {} columns but covariance is {n}x{n}",
            batch.columns()
        )));
    }
    let c = &cov.matrix;
    let samples = batch.rows;
    let mut flagged = 0;
    let mut build = |order: usize| -> Vec<MomentCheck> {
        let sets = multisets(n, order);
        let means = empirical_means(batch, &sets);
        sets.into_iter()
            .zip(means)
            .map(|(indices, empirical)| {
                let target = isserlis(&indices, c);
                let doubled: Vec<usize> = indices.iter().chain(&indices).copied().collect();
                let variance = (isserlis(&doubled, c) - target * target).max(0.0);
                let band = BAND_SIGMAS * (variance / samples as f64).sqrt();
                let within_band = (empirical - target).abs() <= band;
                if !within_band {
                    flagged += 1;
                }
                MomentCheck {
                    indices,
                    empirical,
                    target,
                    band,
                    within_band,
                }
            })
            .collect()
    };
    let first = build(1);
    let second = build(2);
    let third = build(3);
    let fourth = build(4);

    let engine_isserlis_difference = match engine {
        None => None,
        Some((ctx, labels)) => {
            if labels.len() != n {
                return Err(Error::InvalidArgument("label count does not match covariance".into()));
            }
            let scale = fourth.iter().map(|m| m.target.abs()).fold(0.0, f64::max);
            let mut worst = 0.0f64;
            for m in &fourth {
                let symbols: Vec<FieldSymbol> =
                    m.indices.iter().map(|&i| FieldSymbol::new(FieldKind::Chi, labels[i])).collect();
                let v = field_vev(&symbols, ctx)?;
                worst = worst.max((v.re - m.target).abs().max(v.im.abs()));
            }
            Some(if scale > 0.0 { worst / scale } else { worst })
        }
    };
    Ok(MomentReport {
        samples,
        first,
        second,
        third,
        fourth,
        engine_isserlis_difference,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, LightconeGrid};
    use crate::pairing::PhysicalConstants;
    use crate::tensor::{AntisymTensor2, FourVector};
    use crate::testfn::AnalyticTestFunction;
    use num_complex::Complex64;
    use std::sync::Arc;

    fn real_context(n: usize, seed: u64) -> (GramContext, Vec<LabelId>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Arc::new(LightconeGrid::build(&GridSpec::default()).unwrap());
        let mut ctx = GramContext::new(PhysicalConstants::default());
        let ids = (0..n)
            .map(|i| {
                let amp = AntisymTensor2::from_components(std::array::from_fn(|_| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }));
                let dir: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
                let f = AnalyticTestFunction::gaussian_packet(amp, FourVector::on_shell(dir), 0.8, true)
                    .unwrap()
                    .sample_on_grid(&grid);
                ctx.register(&format!("f{i}"), f).unwrap()
            })
            .collect();
        (ctx, ids)
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn isserlis_examples() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(isserlis(&[], &c), 1.0);
        assert_eq!(isserlis(&[0, 1, 1], &c), 0.0);
        assert_eq!(isserlis(&[0, 1], &c), 0.5);
        assert_eq!(isserlis(&[0, 0, 0, 0], &c), 3.0 * 4.0);
        // C00 C11 + 2 C01²
        assert_eq!(isserlis(&[0, 0, 1, 1], &c), 2.0 + 2.0 * 0.25);
        // six indices of one variable: 15 σ⁶
        assert_eq!(isserlis(&[1; 6], &c), 15.0);
    }

    #[test]
    fn covariance_two_paths_and_realness() {
        let (mut ctx, ids) = real_context(4, 50);
        let cov = covariance_matrix(&mut ctx, &ids).unwrap();
        assert!(cov.two_path_difference <= 1e-13 * cov.scale);
        assert!(cov.max_imaginary <= 1e-13 * cov.scale);
        assert!(cov.asymmetry() <= 1e-13 * cov.scale);
        for i in 0..4 {
            assert!(cov.matrix[(i, i)] > 0.0);
        }
        assert!(cov.factor().is_ok());
    }

    #[test]
    fn non_real_label_rejected() {
        let (mut ctx, _) = real_context(1, 51);
        let grid = ctx.function(LabelId(0)).grid().clone();
        let amp = AntisymTensor2::from_components(std::array::from_fn(|i| Complex64::new(0.0, 1.0 + i as f64)));
        let f = AnalyticTestFunction::gaussian_packet(amp, FourVector::on_shell([0.0, 0.0, 1.0]), 0.8, false)
            .unwrap()
            .sample_on_grid(&grid);
        let id = ctx.register("complex", f).unwrap();
        assert!(matches!(covariance_matrix(&mut ctx, &[id]), Err(Error::NotReal { .. })));
    }

    #[test]
    fn psd_over_random_real_sets() {
        for trial in 0..20 {
            let (mut ctx, ids) = real_context(3, 100 + trial);
            let cov = covariance_matrix(&mut ctx, &ids).unwrap();
            let eig = SymmetricEigen::new(cov.matrix.clone()).eigenvalues;
            assert!(eig.min() >= -PSD_FLOOR * eig.max(), "trial {trial}: {eig}");
        }
    }

    #[test]
    fn zero_covariance_gives_zero_samples() {
        let cov = CovarianceMatrix::from_matrix(names(3), DMatrix::zeros(3, 3)).unwrap();
        let batch = draw_samples(&cov, 100, 1).unwrap();
        assert!(batch.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_mean() {
        let rows = 100_000;
        let cov = CovarianceMatrix::from_matrix(names(3), DMatrix::identity(3, 3)).unwrap();
        let batch = draw_samples(&cov, rows, 2).unwrap();
        let means = empirical_means(&batch, &multisets(3, 1));
        for m in means {
            assert!(m.abs() <= 4.0 / (rows as f64).sqrt());
        }
    }

    #[test]
    fn psd_violation_is_an_error() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let cov = CovarianceMatrix::from_matrix(names(2), c).unwrap();
        assert!(matches!(draw_samples(&cov, 10, 0), Err(Error::NotPositiveSemidefinite { .. })));
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        let cov = CovarianceMatrix::from_matrix(names(2), tiny).unwrap();
        assert!(draw_samples(&cov, 10, 0).is_ok());
        let cov = CovarianceMatrix::from_matrix(names(2), DMatrix::identity(2, 2)).unwrap();
        assert!(draw_samples(&cov, 0, 0).is_err());
    }

    #[test]
    fn factor_reproduces_covariance() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 0.5]);
        let cov = CovarianceMatrix::from_matrix(names(3), c.clone()).unwrap();
        let l = cov.factor().unwrap();
        assert!((&l * l.transpose() - c).amax() <= 1e-14);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.7]);
        let cov = CovarianceMatrix::from_matrix(names(2), c).unwrap();
        let a = draw_samples(&cov, 1000, 9).unwrap();
        let b = draw_samples(&cov, 1000, 9).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| draw_samples(&cov, 1000, 9).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, single);
        assert_ne!(a.values, draw_samples(&cov, 1000, 10).unwrap().values);
    }

    #[test]
    fn moments_from_pairing_covariance() {
        let (mut ctx, ids) = real_context(3, 52);
        let cov = covariance_matrix(&mut ctx, &ids).unwrap();
        let batch = draw_samples(&cov, 200_000, 7).unwrap();
        let report = moment_report(&batch, &cov, Some((&ctx, &ids))).unwrap();
        assert!(report.engine_isserlis_difference.unwrap() <= 1e-13);
        assert_eq!(report.second.len(), 6);
        assert_eq!(report.fourth.len(), 15);
        // 4σ bands over 34 checks: a stray flag has probability ≈ 2e-3
        assert!(report.flagged <= 1, "{report:#?}");
    }

    #[test]
    fn csv_layout() {
        let cov = CovarianceMatrix::from_matrix(names(2), DMatrix::identity(2, 2)).unwrap();
        let batch = draw_samples(&cov, 3, 4).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,x1");
        assert_eq!(lines.len(), 4);
        let parsed: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(parsed, batch.values[0]);
    }
}
