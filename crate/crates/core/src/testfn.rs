//! Test functions in momentum space.
//!
//! [`AnalyticTestFunction`] is a closed-form evaluator `k ↦ f̃_{μν}(k)`
//! defined for any four-momentum. [`OnShellTestFunction`] holds its samples
//! on both frequency sheets of a [`LightconeGrid`]: `plus[i] = f̃(+ωᵢ, k⃗ᵢ)`
//! and `minus[i] = f̃(−ωᵢ, k⃗ᵢ)`. Evaluations at `−k` are closed through the
//! grid's parity partner, never by off-shell lookup.
//!
//! With `P_± = ½(1 ± i★)` and `n(i)` the parity partner:
//!
//! ```text
//! star:    plus'(i)  = conj(minus(n(i)))          minus'(i) = conj(plus(n(i)))
//! bullet:  plus•(i)  = P₊ plus(i) + P₋ minus(n(i))
//!          minus•(i) = P₊ plus(n(i)) + P₋ minus(i)
//! box:     plus□(i)  = P₊ plus(i) + P₋ conj(plus(i))
//!          minus□(i) = P₊ conj(minus(i)) + P₋ minus(i)
//! ```

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LightconeGrid, OctahedralRotation};
use crate::tensor::{check_lorentz, duality_project, hodge_dual, AntisymTensor2, FourVector, Sign};

/// Parameters of a Gaussian packet `A · exp(−Σ_μ (k^μ − c^μ)² / 2σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub amplitude: AntisymTensor2,
    pub center: FourVector,
    pub width: f64,
    /// Replace `f̃(k)` by `½[f̃(k) + conj(f̃(−k))]`.
    pub real_symmetrized: bool,
}

impl GaussianPacket {
    fn envelope(&self, k: &FourVector) -> f64 {
        gaussian_envelope(k, &self.center, self.width)
    }

    fn evaluate(&self, k: &FourVector) -> AntisymTensor2 {
        let direct = self.amplitude.scale_real(self.envelope(k));
        if !self.real_symmetrized {
            return direct;
        }
        let mirrored = self.amplitude.conj().scale_real(self.envelope(&-*k));
        (direct + mirrored).scale_real(0.5)
    }
}

fn gaussian_envelope(k: &FourVector, center: &FourVector, width: f64) -> f64 {
    (-k.euclidean_distance_sq(center) / (2.0 * width * width)).exp()
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidWidth(width))
    }
}

#[derive(Debug)]
enum Analytic {
    Packet(GaussianPacket),
    /// `e(k) (k_μ w_ν − k_ν w_μ)` with a scalar Gaussian envelope `e`.
    PureGauge {
        w: [f64; 4],
        center: FourVector,
        width: f64,
    },
    Sum(AnalyticTestFunction, AnalyticTestFunction),
    Scaled(Complex64, AnalyticTestFunction),
    Transformed {
        inner: AnalyticTestFunction,
        inverse: Matrix4<f64>,
    },
}

/// Closed-form momentum-space test function. Cheap to clone.
#[derive(Clone)]
pub struct AnalyticTestFunction {
    node: Arc<Analytic>,
}

impl fmt::Debug for AnalyticTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.node.fmt(f)
    }
}

impl AnalyticTestFunction {
    fn wrap(node: Analytic) -> Self {
        AnalyticTestFunction { node: Arc::new(node) }
    }

    pub fn gaussian_packet(
        amplitude: AntisymTensor2,
        center: FourVector,
        width: f64,
        real_symmetrized: bool,
    ) -> Result<Self> {
        check_width(width)?;
        if !center.is_finite() {
            return Err(Error::InvalidArgument("packet center must be finite".into()));
        }
        Ok(Self::wrap(Analytic::Packet(GaussianPacket {
            amplitude,
            center,
            width,
            real_symmetrized,
        })))
    }

    /// Same as [`gaussian_packet`](Self::gaussian_packet) from a dense 4×4
    /// amplitude, rejected unless exactly antisymmetric.
    pub fn gaussian_packet_from_matrix(
        amplitude: &[[Complex64; 4]; 4],
        center: FourVector,
        width: f64,
        real_symmetrized: bool,
    ) -> Result<Self> {
        let a = AntisymTensor2::try_from_matrix(amplitude)?;
        Self::gaussian_packet(a, center, width, real_symmetrized)
    }

    /// Pure-gauge family `e(k)(k_μ w_ν − k_ν w_μ)`; `w` has lower indices.
    pub fn pure_gauge(w: [f64; 4], center: FourVector, width: f64) -> Result<Self> {
        check_width(width)?;
        Ok(Self::wrap(Analytic::PureGauge { w, center, width }))
    }

    pub fn zero() -> Self {
        Self::wrap(Analytic::Scaled(
            Complex64::new(0.0, 0.0),
            Self::wrap(Analytic::Packet(GaussianPacket {
                amplitude: AntisymTensor2::ZERO,
                center: FourVector::ZERO,
                width: 1.0,
                real_symmetrized: false,
            })),
        ))
    }

    pub fn family(&self) -> &'static str {
        match &*self.node {
            Analytic::Packet(_) => "gaussian",
            Analytic::PureGauge { .. } => "pure_gauge",
            Analytic::Sum(..) => "sum",
            Analytic::Scaled(..) => "scaled",
            Analytic::Transformed { .. } => "lorentz_transformed",
        }
    }

    pub fn packet(&self) -> Option<&GaussianPacket> {
        match &*self.node {
            Analytic::Packet(p) => Some(p),
            _ => None,
        }
    }

    pub fn evaluate(&self, k: &FourVector) -> AntisymTensor2 {
        match &*self.node {
            Analytic::Packet(p) => p.evaluate(k),
            Analytic::PureGauge { w, center, width } => {
                AntisymTensor2::wedge(&k.lowered(), w).scale_real(gaussian_envelope(k, center, *width))
            }
            Analytic::Sum(a, b) => a.evaluate(k) + b.evaluate(k),
            Analytic::Scaled(lambda, a) => a.evaluate(k).scale(*lambda),
            // (Λf)~_{μν}(k) = (Λ⁻¹)^α_μ (Λ⁻¹)^β_ν f̃_{αβ}(Λ⁻¹k): lower indices
            // transform with the inverse, the argument is pulled back by Λ⁻¹.
            Analytic::Transformed { inner, inverse } => inner
                .evaluate(&k.transformed(inverse))
                .transform_covariant(inverse),
        }
    }

    pub fn add(&self, other: &AnalyticTestFunction) -> Self {
        Self::wrap(Analytic::Sum(self.clone(), other.clone()))
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        Self::wrap(Analytic::Scaled(lambda, self.clone()))
    }

    /// Active Lorentz transformation by `L` (must satisfy `LᵀηL = η`).
    pub fn lorentz_transform(&self, l: &Matrix4<f64>) -> Result<Self> {
        check_lorentz(l)?;
        let inverse = l.try_inverse().ok_or(Error::NotLorentz)?;
        Ok(Self::wrap(Analytic::Transformed {
            inner: self.clone(),
            inverse,
        }))
    }

    pub fn sample_on_grid(&self, grid: &Arc<LightconeGrid>) -> OnShellTestFunction {
        OnShellTestFunction::sample(self, grid)
    }
}

/// Samples of `f̃` on both frequency sheets of a grid.
#[derive(Clone, Debug)]
pub struct OnShellTestFunction {
    grid: Arc<LightconeGrid>,
    plus: Vec<AntisymTensor2>,
    minus: Vec<AntisymTensor2>,
}

impl PartialEq for OnShellTestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.plus == other.plus && self.minus == other.minus
    }
}

fn p_plus(f: &AntisymTensor2) -> AntisymTensor2 {
    duality_project(f, Sign::Plus)
}

fn p_minus(f: &AntisymTensor2) -> AntisymTensor2 {
    duality_project(f, Sign::Minus)
}

impl OnShellTestFunction {
    pub fn zero(grid: &Arc<LightconeGrid>) -> Self {
        OnShellTestFunction {
            grid: Arc::clone(grid),
            plus: vec![AntisymTensor2::ZERO; grid.len()],
            minus: vec![AntisymTensor2::ZERO; grid.len()],
        }
    }

    pub fn from_sheets(
        grid: &Arc<LightconeGrid>,
        plus: Vec<AntisymTensor2>,
        minus: Vec<AntisymTensor2>,
    ) -> Result<Self> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "sheet lengths ({}, {}) do not match the grid size {}",
                plus.len(),
                minus.len(),
                grid.len()
            )));
        }
        Ok(OnShellTestFunction {
            grid: Arc::clone(grid),
            plus,
            minus,
        })
    }

    pub fn sample(f: &AnalyticTestFunction, grid: &Arc<LightconeGrid>) -> Self {
        let plus = grid.nodes().iter().map(|n| f.evaluate(&n.momentum())).collect();
        let minus = grid
            .nodes()
            .iter()
            .map(|n| f.evaluate(&n.negative_frequency_momentum()))
            .collect();
        OnShellTestFunction {
            grid: Arc::clone(grid),
            plus,
            minus,
        }
    }

    /// Canonical even extension of plus-sheet data: `plus = H`,
    /// `minus(i) = H(n(i))`. Its bullet image has plus sheet `H`.
    pub fn bullet_preimage(grid: &Arc<LightconeGrid>, h: &[AntisymTensor2]) -> Result<Self> {
        if h.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "plus-sheet data has {} entries, grid has {}",
                h.len(),
                grid.len()
            )));
        }
        let minus = (0..grid.len()).map(|i| h[grid.node_negation(i)]).collect();
        Ok(OnShellTestFunction {
            grid: Arc::clone(grid),
            plus: h.to_vec(),
            minus,
        })
    }

    pub fn grid(&self) -> &Arc<LightconeGrid> {
        &self.grid
    }

    pub fn plus(&self) -> &[AntisymTensor2] {
        &self.plus
    }

    pub fn minus(&self) -> &[AntisymTensor2] {
        &self.minus
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn map_sheets(&self, mut op: impl FnMut(&AntisymTensor2) -> AntisymTensor2) -> Self {
        OnShellTestFunction {
            grid: Arc::clone(&self.grid),
            plus: self.plus.iter().map(&mut op).collect(),
            minus: self.minus.iter().map(&mut op).collect(),
        }
    }

    fn neg(&self, i: usize) -> usize {
        self.grid.node_negation(i)
    }

    /// `(f*)~(k) = conj(f̃(−k))`: swaps sheets through the parity partner.
    pub fn star_conjugate(&self) -> Self {
        let n = self.grid.len();
        OnShellTestFunction {
            grid: Arc::clone(&self.grid),
            plus: (0..n).map(|i| self.minus[self.neg(i)].conj()).collect(),
            minus: (0..n).map(|i| self.plus[self.neg(i)].conj()).collect(),
        }
    }

    pub fn four_part_split(&self) -> FourPartSplit {
        let zero = vec![AntisymTensor2::ZERO; self.grid.len()];
        let component = |freq: Sign, dual: Sign| {
            let sheet = match freq {
                Sign::Plus => &self.plus,
                Sign::Minus => &self.minus,
            };
            let projected: Vec<_> = sheet.iter().map(|t| duality_project(t, dual)).collect();
            let (plus, minus) = match freq {
                Sign::Plus => (projected, zero.clone()),
                Sign::Minus => (zero.clone(), projected),
            };
            OnShellTestFunction {
                grid: Arc::clone(&self.grid),
                plus,
                minus,
            }
        };
        FourPartSplit {
            parts: [
                [component(Sign::Plus, Sign::Plus), component(Sign::Plus, Sign::Minus)],
                [component(Sign::Minus, Sign::Plus), component(Sign::Minus, Sign::Minus)],
            ],
        }
    }

    /// `f ↦ f•`: keeps `P₊` on positive frequency and `P₋` on negative
    /// frequency, and fills the other helicity from the reflected point `−k`.
    pub fn bullet_map(&self) -> Self {
        let n = self.grid.len();
        OnShellTestFunction {
            grid: Arc::clone(&self.grid),
            plus: (0..n)
                .map(|i| p_plus(&self.plus[i]) + p_minus(&self.minus[self.neg(i)]))
                .collect(),
            minus: (0..n)
                .map(|i| p_plus(&self.plus[self.neg(i)]) + p_minus(&self.minus[i]))
                .collect(),
        }
    }

    /// `f ↦ f□`: like the bullet map but fills the second helicity from the
    /// complex conjugate at the same point. Additive, not complex-linear.
    pub fn box_map(&self) -> Self {
        OnShellTestFunction {
            grid: Arc::clone(&self.grid),
            plus: self.plus.iter().map(|t| p_plus(t) + p_minus(&t.conj())).collect(),
            minus: self.minus.iter().map(|t| p_plus(&t.conj()) + p_minus(t)).collect(),
        }
    }

    pub fn apply_hodge(&self) -> Self {
        self.map_sheets(hodge_dual)
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        self.map_sheets(|t| t.scale(lambda))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(OnShellTestFunction {
            grid: Arc::clone(&self.grid),
            plus: self.plus.iter().zip(&other.plus).map(|(a, b)| *a + *b).collect(),
            minus: self.minus.iter().zip(&other.minus).map(|(a, b)| *a + *b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Discrete rotation through the grid's stored node permutation:
    /// `(Rf)(R k⃗ᵢ) = R⊗R · f(k⃗ᵢ)` on both sheets.
    pub fn rotated(&self, rotation: &OctahedralRotation) -> Result<Self> {
        let perm = self.grid.rotation_permutation(rotation)?;
        // covariant components pick up Λ⁻¹ = diag(1, Rᵀ)
        let inverse = rotation.inverse().to_lorentz();
        let mut plus = vec![AntisymTensor2::ZERO; self.grid.len()];
        let mut minus = vec![AntisymTensor2::ZERO; self.grid.len()];
        for (i, &j) in perm.iter().enumerate() {
            plus[j] = self.plus[i].transform_covariant(&inverse);
            minus[j] = self.minus[i].transform_covariant(&inverse);
        }
        Ok(OnShellTestFunction {
            grid: Arc::clone(&self.grid),
            plus,
            minus,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .map(AntisymTensor2::max_abs)
            .fold(0.0, f64::max)
    }

    /// `max` componentwise distance over both sheets; `∞` on grid mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if !self.same_grid(other) {
            return f64::INFINITY;
        }
        self.plus
            .iter()
            .zip(&other.plus)
            .chain(self.minus.iter().zip(&other.minus))
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// `max_abs_diff / max_abs(self)`, falling back to the absolute value for zero `self`.
    pub fn relative_diff(&self, other: &Self) -> f64 {
        let scale = self.max_abs().max(other.max_abs());
        let d = self.max_abs_diff(other);
        if scale > 0.0 {
            d / scale
        } else {
            d
        }
    }

    /// `max |minus(i) − plus(n(i))|`; zero for functions even in `k`.
    pub fn evenness_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.minus[i].max_abs_diff(&self.plus[self.neg(i)]))
            .fold(0.0, f64::max)
    }

    /// Relative distance to the star fixed point; zero for real functions.
    pub fn reality_defect(&self) -> f64 {
        self.relative_diff(&self.star_conjugate())
    }
}

/// The four components of `f` indexed by (frequency sign, duality sign).
#[derive(Clone, Debug)]
pub struct FourPartSplit {
    parts: [[OnShellTestFunction; 2]; 2],
}

fn slot(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

impl FourPartSplit {
    pub fn get(&self, frequency: Sign, duality: Sign) -> &OnShellTestFunction {
        &self.parts[slot(frequency)][slot(duality)]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((Sign, Sign), &OnShellTestFunction)> {
        Sign::BOTH.into_iter().flat_map(move |fr| {
            Sign::BOTH
                .into_iter()
                .map(move |du| ((fr, du), self.get(fr, du)))
        })
    }

    pub fn sum(&self) -> OnShellTestFunction {
        let mut it = self.iter().map(|(_, f)| f);
        let first = it.next().unwrap().clone();
        it.fold(first, |acc, f| acc.add(f).expect("split components share a grid"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::tensor::{boost, is_lorentz};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Arc<LightconeGrid> {
        Arc::new(LightconeGrid::build(&GridSpec::default()).unwrap())
    }

    fn random_tensor(rng: &mut impl Rng) -> AntisymTensor2 {
        AntisymTensor2::from_components(std::array::from_fn(|_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
    }

    fn random_on_shell(grid: &Arc<LightconeGrid>, rng: &mut impl Rng) -> OnShellTestFunction {
        let plus = (0..grid.len()).map(|_| random_tensor(rng)).collect();
        let minus = (0..grid.len()).map(|_| random_tensor(rng)).collect();
        OnShellTestFunction::from_sheets(grid, plus, minus).unwrap()
    }

    fn packet(rng: &mut impl Rng, real: bool) -> AnalyticTestFunction {
        let center = FourVector::on_shell([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        AnalyticTestFunction::gaussian_packet(random_tensor(rng), center, rng.random_range(0.4..1.0), real).unwrap()
    }

    #[test]
    fn packet_peak_and_decay() {
        let a = AntisymTensor2::from_real_components([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = FourVector::new(1.0, 0.0, 0.0, 1.0);
        let f = AnalyticTestFunction::gaussian_packet(a, c, 0.5, false).unwrap();
        assert_eq!(f.evaluate(&c), a);
        let far = FourVector::new(1.0 + 38.0 * 0.5, 0.0, 0.0, 1.0);
        assert!(f.evaluate(&far).max_abs() < 1e-300);
        assert_eq!(AnalyticTestFunction::gaussian_packet(a, c, 0.0, false).unwrap_err(), Error::InvalidWidth(0.0));
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        m[1][2] = Complex64::new(1.0, 0.0);
        assert!(AnalyticTestFunction::gaussian_packet_from_matrix(&m, c, 0.5, false).is_err());
    }

    #[test]
    fn real_symmetrized_reality_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = packet(&mut rng, true);
        for _ in 0..100 {
            let k = FourVector(std::array::from_fn(|_| rng.random_range(-2.0..2.0)));
            assert_eq!(f.evaluate(&-k), f.evaluate(&k).conj());
        }
        let g = grid();
        let sampled = f.sample_on_grid(&g);
        assert_eq!(sampled.star_conjugate(), sampled);
    }

    #[test]
    fn sampling_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = grid();
        let (f, h) = (packet(&mut rng, false), packet(&mut rng, false));
        let (alpha, beta) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let combined = f.scale(alpha).add(&h.scale(beta)).sample_on_grid(&g);
        let separate = f.sample_on_grid(&g).scale(alpha).add(&h.sample_on_grid(&g).scale(beta)).unwrap();
        assert!(combined.max_abs_diff(&separate) <= 1e-15);
        let zero = AnalyticTestFunction::gaussian_packet(AntisymTensor2::ZERO, FourVector::ZERO, 1.0, false).unwrap();
        assert_eq!(zero.sample_on_grid(&g), OnShellTestFunction::zero(&g));
    }

    #[test]
    fn on_shell_packet_concentrates_near_its_direction() {
        let g = grid();
        let a = AntisymTensor2::from_real_components([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = AnalyticTestFunction::gaussian_packet(a, FourVector::new(1.0, 0.0, 0.0, 1.0), 0.2, false)
            .unwrap()
            .sample_on_grid(&g);
        let (imax, _) = f
            .plus()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.max_abs().total_cmp(&b.1.max_abs()))
            .unwrap();
        let k = g.node(imax).kvec;
        let expected = (-(k[0] * k[0] + k[1] * k[1] + (k[2] - 1.0).powi(2) + (g.node(imax).omega - 1.0).powi(2)) / 0.08).exp();
        assert!(k[0] == 0.0 && k[1] == 0.0 && k[2] > 0.0);
        assert!((k[2] - 1.0).abs() < 0.5);
        assert!((f.plus()[imax].max_abs() - expected).abs() <= 1e-15);
        // the far side of the sphere carries nothing
        let opposite = g.node_negation(imax);
        assert!(f.plus()[opposite].max_abs() < 1e-10);
    }

    #[test]
    fn star_is_an_involution_that_swaps_sheets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid();
        let f = random_on_shell(&g, &mut rng);
        assert!(f.star_conjugate().star_conjugate().max_abs_diff(&f) <= 1e-15);
        let plus_only = OnShellTestFunction::from_sheets(&g, f.plus().to_vec(), vec![AntisymTensor2::ZERO; g.len()]).unwrap();
        let s = plus_only.star_conjugate();
        assert!(s.plus().iter().all(|t| *t == AntisymTensor2::ZERO));
        assert!(s.minus().iter().any(|t| t.max_abs() > 0.0));
    }

    #[test]
    fn split_completeness_idempotence_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = grid();
        let f = random_on_shell(&g, &mut rng);
        let split = f.four_part_split();
        let scale = f.max_abs();
        assert!(split.sum().max_abs_diff(&f) <= 1e-13 * scale);
        for ((fr, du), part) in split.iter() {
            let again = part.four_part_split();
            for ((fr2, du2), sub) in again.iter() {
                if (fr2, du2) == (fr, du) {
                    assert!(sub.max_abs_diff(part) <= 1e-13 * scale);
                } else {
                    assert!(sub.max_abs() <= 1e-13 * scale, "({fr}{du}) leaks into ({fr2}{du2})");
                }
            }
        }
    }

    #[test]
    fn bullet_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = grid();
        let f = random_on_shell(&g, &mut rng);
        let scale = f.max_abs();
        let b = f.bullet_map();
        assert!(b.bullet_map().max_abs_diff(&b) <= 1e-13 * scale);
        assert_eq!(b.evenness_defect(), 0.0);
        // only the (+,+) and (−,−) parts survive; (+,+) keeps its plus sheet
        let split = f.four_part_split();
        for (fr, du) in [(Sign::Plus, Sign::Minus), (Sign::Minus, Sign::Plus)] {
            assert!(split.get(fr, du).bullet_map().max_abs() <= 1e-13 * scale);
        }
        let pp = split.get(Sign::Plus, Sign::Plus);
        let kept = pp.add(split.get(Sign::Minus, Sign::Minus)).unwrap().bullet_map();
        assert!(kept.max_abs_diff(&b) <= 1e-13 * scale);
        for (x, y) in pp.bullet_map().plus().iter().zip(pp.plus()) {
            assert!(x.max_abs_diff(y) <= 1e-13 * scale);
        }
        // f•* = f*•
        assert!(b.star_conjugate().max_abs_diff(&f.star_conjugate().bullet_map()) <= 1e-13 * scale);
        // complex linearity
        let h = random_on_shell(&g, &mut rng);
        let (alpha, beta) = (Complex64::new(0.2, 0.9), Complex64::new(-1.1, 0.3));
        let lhs = f.scale(alpha).add(&h.scale(beta)).unwrap().bullet_map();
        let rhs = b.scale(alpha).add(&h.bullet_map().scale(beta)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) <= 1e-13 * lhs.max_abs());
    }

    #[test]
    fn bullet_preserves_reality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = grid();
        let f = packet(&mut rng, true).sample_on_grid(&g);
        assert_eq!(f.reality_defect(), 0.0);
        let b = f.bullet_map();
        assert!(b.reality_defect() <= 1e-13);
        for t in b.plus() {
            assert!(t.max_abs_diff(&t.conj()) <= 1e-13 * f.max_abs());
        }
    }

    #[test]
    fn box_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = grid();
        let f = random_on_shell(&g, &mut rng);
        let scale = f.max_abs();
        let bx = f.box_map();
        assert!(bx.box_map().max_abs_diff(&bx) <= 1e-13 * scale);
        for (a, b) in bx.plus().iter().zip(f.plus()) {
            assert!(p_plus(a).max_abs_diff(&p_plus(b)) <= 1e-13 * scale);
        }
        let i = Complex64::new(0.0, 1.0);
        let lhs = f.scale(i).box_map();
        let rhs = bx.scale(i);
        assert!(lhs.max_abs_diff(&rhs) > 0.1 * rhs.max_abs());
        // additive
        let h = random_on_shell(&g, &mut rng);
        let sum = f.add(&h).unwrap().box_map();
        assert!(sum.max_abs_diff(&bx.add(&h.box_map()).unwrap()) <= 1e-13 * sum.max_abs());
    }

    #[test]
    fn preimage_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = grid();
        let h: Vec<_> = random_on_shell(&g, &mut rng).plus().to_vec();
        let pre = OnShellTestFunction::bullet_preimage(&g, &h).unwrap();
        assert_eq!(pre.evenness_defect(), 0.0);
        let image = pre.bullet_map();
        for (a, b) in image.plus().iter().zip(&h) {
            assert!(a.max_abs_diff(b) <= 1e-13 * b.max_abs().max(1.0));
        }
        let zero = OnShellTestFunction::bullet_preimage(&g, &vec![AntisymTensor2::ZERO; g.len()]).unwrap();
        assert_eq!(zero, OnShellTestFunction::zero(&g));
        assert!(OnShellTestFunction::bullet_preimage(&g, &h[1..]).is_err());
    }

    #[test]
    fn combinators() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = grid();
        let f = random_on_shell(&g, &mut rng);
        let h = random_on_shell(&g, &mut rng);
        assert_eq!(f.add(&OnShellTestFunction::zero(&g)).unwrap(), f);
        assert_eq!(f.scale(Complex64::new(1.0, 0.0)), f);
        let lambda = Complex64::new(0.5, -2.0);
        let lhs = f.add(&h).unwrap().scale(lambda);
        let rhs = f.scale(lambda).add(&h.scale(lambda)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) <= 1e-14 * lhs.max_abs());
        assert!(f.apply_hodge().apply_hodge().max_abs_diff(&f.scale(Complex64::new(-1.0, 0.0))) <= 1e-13 * f.max_abs());
        assert_eq!(OnShellTestFunction::zero(&g).apply_hodge(), OnShellTestFunction::zero(&g));
        let other = Arc::new(LightconeGrid::build(&GridSpec::new(3, crate::grid::AngularScheme::Octahedron6)).unwrap());
        assert_eq!(f.add(&OnShellTestFunction::zero(&other)).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn lorentz_transform_group_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = packet(&mut rng, false);
        let id = f.lorentz_transform(&Matrix4::identity()).unwrap();
        let l1 = boost(2, 0.3);
        let l2 = OctahedralRotation::quarter_turn(0).to_lorentz() * boost(0, -0.2);
        assert!(is_lorentz(&l2, 1e-12));
        let twice = f.lorentz_transform(&l1).unwrap().lorentz_transform(&l2).unwrap();
        let once = f.lorentz_transform(&(l2 * l1)).unwrap();
        for _ in 0..50 {
            let k = FourVector(std::array::from_fn(|_| rng.random_range(-2.0..2.0)));
            assert_eq!(id.evaluate(&k), f.evaluate(&k));
            let (a, b) = (twice.evaluate(&k), once.evaluate(&k));
            assert!(a.max_abs_diff(&b) <= 1e-12 * a.max_abs().max(1e-300));
        }
        let mut bad = Matrix4::identity();
        bad[(1, 1)] = 2.0;
        assert_eq!(f.lorentz_transform(&bad).unwrap_err(), Error::NotLorentz);
    }

    #[test]
    fn boost_moves_the_peak() {
        let a = AntisymTensor2::from_real_components([1.0, 0.0, 0.5, 0.0, -0.3, 0.2]);
        let c = FourVector::new(1.0, 0.0, 0.0, 1.0);
        let f = AnalyticTestFunction::gaussian_packet(a, c, 0.5, false).unwrap();
        let l = boost(2, 0.3);
        let boosted = f.lorentz_transform(&l).unwrap();
        let new_center = c.transformed(&l);
        assert!((new_center.time() - 0.3f64.exp()).abs() < 1e-15);
        let expected = a.transform_covariant(&l.try_inverse().unwrap());
        assert!(boosted.evaluate(&new_center).max_abs_diff(&expected) <= 1e-14);
        // scanning along the boosted null ray: the profile peaks at the new center
        let probe = |s: f64| boosted.evaluate(&FourVector::new(s, 0.0, 0.0, s)).max_abs();
        let peak = probe(new_center.time());
        assert!(peak > probe(new_center.time() - 0.05) && peak > probe(new_center.time() + 0.05));
    }

    #[test]
    fn analytic_and_discrete_rotations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = grid();
        let f = packet(&mut rng, false);
        for rot in OctahedralRotation::all() {
            let analytic = f.lorentz_transform(&rot.to_lorentz()).unwrap().sample_on_grid(&g);
            let discrete = f.sample_on_grid(&g).rotated(&rot).unwrap();
            assert!(analytic.max_abs_diff(&discrete) <= 1e-15 * discrete.max_abs());
        }
    }
}
