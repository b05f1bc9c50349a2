//! Minkowski tensor algebra: four-vectors, complex antisymmetric rank-2
//! tensors with lower indices, the Levi-Civita symbol, the Hodge dual and
//! the duality (helicity) projectors `½(1 ± i★)`.
//!
//! All sign and normalization conventions live in [`conventions`].

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed conventions used throughout the crate.
///
/// * metric signature `(+,−,−,−)`, index 0 is time;
/// * `ε_{0123} = +1` with all indices down;
/// * Hodge dual `(★F)_{μν} = ½ ε_{μν}{}^{αβ} F_{αβ}`, so that `★★ = −1`
///   on antisymmetric tensors and `½(1 ± i★)` are genuine projectors.
pub mod conventions {
    /// Diagonal of `η_{μν}` (equal to `η^{μν}`).
    pub const METRIC_DIAGONAL: [f64; 4] = [1.0, -1.0, -1.0, -1.0];
    /// Value of the fully covariant Levi-Civita symbol at `(0,1,2,3)`.
    pub const EPSILON_0123: i8 = 1;
    /// Prefactor of the Hodge dual.
    pub const HODGE_NORMALIZATION: f64 = 0.5;
}

use conventions::{EPSILON_0123, HODGE_NORMALIZATION, METRIC_DIAGONAL};

/// Independent index pairs `μ < ν` in storage order `01, 02, 03, 12, 13, 23`.
pub const INDEX_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Contravariant four-vector `k^μ`, index 0 = time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    /// Null vector `(|k⃗|, k⃗)` on the forward light cone.
    pub fn on_shell(kvec: [f64; 3]) -> Self {
        let omega = (kvec[0] * kvec[0] + kvec[1] * kvec[1] + kvec[2] * kvec[2]).sqrt();
        FourVector([omega, kvec[0], kvec[1], kvec[2]])
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Covariant components `k_μ = η_{μν} k^ν`.
    pub fn lowered(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for mu in 0..4 {
            out[mu] = METRIC_DIAGONAL[mu] * self.0[mu];
        }
        out
    }

    pub fn to_vector4(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }

    /// `L·k` for a 4×4 matrix acting on contravariant components.
    pub fn transformed(&self, l: &Matrix4<f64>) -> Self {
        let v = l * self.to_vector4();
        FourVector([v[0], v[1], v[2], v[3]])
    }

    pub fn euclidean_distance_sq(&self, other: &FourVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector(self.0.map(|c| -c))
    }
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `u⁰v⁰ − u¹v¹ − u²v² − u³v³`.
pub fn minkowski_dot(u: &FourVector, v: &FourVector) -> f64 {
    (0..4).map(|mu| METRIC_DIAGONAL[mu] * u.0[mu] * v.0[mu]).sum()
}

/// Totally antisymmetric symbol with all indices down, `ε_{0123} = +1`.
/// Zero whenever an index repeats. Indices must lie in `0..4`.
pub fn levi_civita(mu: usize, nu: usize, alpha: usize, beta: usize) -> i8 {
    let idx = [mu, nu, alpha, beta];
    debug_assert!(idx.iter().all(|&i| i < 4));
    let mut inversions = 0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] == idx[j] {
                return 0;
            }
            if idx[i] > idx[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        EPSILON_0123
    } else {
        -EPSILON_0123
    }
}

/// Sign selector shared by duality projectors and frequency sheets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Complex antisymmetric tensor `F_{μν}` with both indices down.
///
/// Stored densely. Every constructor writes the upper triangle and mirrors
/// it with a sign flip, so `F_{νμ} = −F_{μν}` holds bit-exactly.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntisymTensor2 {
    entries: [[Complex64; 4]; 4],
}

impl fmt::Debug for AntisymTensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.components();
        f.debug_struct("AntisymTensor2")
            .field("01", &c[0])
            .field("02", &c[1])
            .field("03", &c[2])
            .field("12", &c[3])
            .field("13", &c[4])
            .field("23", &c[5])
            .finish()
    }
}

impl Default for AntisymTensor2 {
    fn default() -> Self {
        Self::ZERO
    }
}

impl AntisymTensor2 {
    pub const ZERO: AntisymTensor2 = AntisymTensor2 {
        entries: [[Complex64::new(0.0, 0.0); 4]; 4],
    };

    fn from_upper(mut upper: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = [[Complex64::new(0.0, 0.0); 4]; 4];
        for &(mu, nu) in &INDEX_PAIRS {
            let v = upper(mu, nu);
            entries[mu][nu] = v;
            entries[nu][mu] = -v;
        }
        AntisymTensor2 { entries }
    }

    /// Builds from the six independent components in the order of [`INDEX_PAIRS`].
    pub fn from_components(c: [Complex64; 6]) -> Self {
        let mut it = c.into_iter();
        Self::from_upper(|_, _| it.next().unwrap())
    }

    /// Real-valued convenience builder, same ordering as [`from_components`](Self::from_components).
    pub fn from_real_components(c: [f64; 6]) -> Self {
        Self::from_components(c.map(|x| Complex64::new(x, 0.0)))
    }

    /// `½(M − Mᵀ)`.
    pub fn antisymmetrize(m: &[[Complex64; 4]; 4]) -> Self {
        Self::from_upper(|mu, nu| 0.5 * (m[mu][nu] - m[nu][mu]))
    }

    /// Accepts `m` only if it is exactly antisymmetric.
    #[allow(clippy::needless_range_loop)]
    pub fn try_from_matrix(m: &[[Complex64; 4]; 4]) -> Result<Self> {
        for mu in 0..4 {
            for nu in 0..4 {
                if m[mu][nu] != -m[nu][mu] {
                    return Err(Error::NotAntisymmetric { mu, nu });
                }
            }
        }
        Ok(Self::from_upper(|mu, nu| m[mu][nu]))
    }

    /// `k_μ w_ν − k_ν w_μ` from two covariant vectors.
    pub fn wedge(k: &[f64; 4], w: &[f64; 4]) -> Self {
        Self::from_upper(|mu, nu| Complex64::new(k[mu] * w[nu] - k[nu] * w[mu], 0.0))
    }

    pub fn get(&self, mu: usize, nu: usize) -> Complex64 {
        self.entries[mu][nu]
    }

    pub fn entries(&self) -> &[[Complex64; 4]; 4] {
        &self.entries
    }

    pub fn components(&self) -> [Complex64; 6] {
        INDEX_PAIRS.map(|(mu, nu)| self.entries[mu][nu])
    }

    pub fn conj(&self) -> Self {
        Self::from_upper(|mu, nu| self.entries[mu][nu].conj())
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        Self::from_upper(|mu, nu| lambda * self.entries[mu][nu])
    }

    pub fn scale_real(&self, lambda: f64) -> Self {
        Self::from_upper(|mu, nu| self.entries[mu][nu] * lambda)
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest componentwise distance `max |Fᵢ − Gᵢ|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..4).all(|mu| (0..4).all(|nu| self.entries[mu][nu] == -self.entries[nu][mu]))
    }

    /// Covariant transformation `F'_{μν} = M^α{}_μ M^β{}_ν F_{αβ}`, i.e.
    /// `F' = Mᵀ F M` in matrix form.
    ///
    /// For a Lorentz map `k ↦ Λk`, lower-index tensors pick up `M = Λ⁻¹`.
    pub fn transform_covariant(&self, m: &Matrix4<f64>) -> Self {
        Self::from_upper(|mu, nu| {
            let mut acc = Complex64::new(0.0, 0.0);
            for alpha in 0..4 {
                for beta in 0..4 {
                    let c = m[(alpha, mu)] * m[(beta, nu)];
                    if c != 0.0 {
                        acc += self.entries[alpha][beta] * c;
                    }
                }
            }
            acc
        })
    }
}

impl Add for AntisymTensor2 {
    type Output = AntisymTensor2;
    fn add(self, rhs: Self) -> Self {
        Self::from_upper(|mu, nu| self.entries[mu][nu] + rhs.entries[mu][nu])
    }
}

impl Sub for AntisymTensor2 {
    type Output = AntisymTensor2;
    fn sub(self, rhs: Self) -> Self {
        Self::from_upper(|mu, nu| self.entries[mu][nu] - rhs.entries[mu][nu])
    }
}

impl Neg for AntisymTensor2 {
    type Output = AntisymTensor2;
    fn neg(self) -> Self {
        Self::from_upper(|mu, nu| -self.entries[mu][nu])
    }
}

impl Mul<AntisymTensor2> for Complex64 {
    type Output = AntisymTensor2;
    fn mul(self, rhs: AntisymTensor2) -> AntisymTensor2 {
        rhs.scale(self)
    }
}

impl Index<(usize, usize)> for AntisymTensor2 {
    type Output = Complex64;
    fn index(&self, (mu, nu): (usize, usize)) -> &Complex64 {
        &self.entries[mu][nu]
    }
}

/// `(★F)_{μν} = ½ ε_{μν}{}^{αβ} F_{αβ}` with indices raised by the metric.
#[allow(clippy::needless_range_loop)]
pub fn hodge_dual(f: &AntisymTensor2) -> AntisymTensor2 {
    AntisymTensor2::from_upper(|mu, nu| {
        let mut acc = Complex64::new(0.0, 0.0);
        for alpha in 0..4 {
            for beta in 0..4 {
                let eps = levi_civita(mu, nu, alpha, beta);
                if eps != 0 {
                    let raise = METRIC_DIAGONAL[alpha] * METRIC_DIAGONAL[beta];
                    acc += f.entries[alpha][beta] * (f64::from(eps) * raise);
                }
            }
        }
        acc * HODGE_NORMALIZATION
    })
}

/// `P_± F = ½(F ± i★F)`.
pub fn duality_project(f: &AntisymTensor2, sign: Sign) -> AntisymTensor2 {
    let star = hodge_dual(f);
    let i_sign = Complex64::new(0.0, sign.value());
    AntisymTensor2::from_upper(|mu, nu| 0.5 * (f.entries[mu][nu] + i_sign * star.entries[mu][nu]))
}

/// `(k^α F_{αμ}) η^{μν} (k^β G_{βν})`; bilinear, no conjugation.
pub fn contract_kfkg(k: &FourVector, f: &AntisymTensor2, g: &AntisymTensor2) -> Complex64 {
    let v = k_dot_tensor(k, f);
    let w = k_dot_tensor(k, g);
    let mut acc = Complex64::new(0.0, 0.0);
    for mu in 0..4 {
        acc += v[mu] * w[mu] * METRIC_DIAGONAL[mu];
    }
    acc
}

/// Covariant vector `v_μ = k^α F_{αμ}`.
pub fn k_dot_tensor(k: &FourVector, f: &AntisymTensor2) -> [Complex64; 4] {
    let mut v = [Complex64::new(0.0, 0.0); 4];
    for (mu, slot) in v.iter_mut().enumerate() {
        for alpha in 0..4 {
            *slot += f.entries[alpha][mu] * k.0[alpha];
        }
    }
    v
}

/// Metric `η` as a matrix.
pub fn metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::from(METRIC_DIAGONAL))
}

/// Checks `Lᵀ η L = η` entrywise to `tol`.
pub fn is_lorentz(l: &Matrix4<f64>, tol: f64) -> bool {
    let eta = metric();
    let defect = l.transpose() * eta * l - eta;
    defect.iter().all(|d| d.abs() <= tol)
}

/// Same as [`is_lorentz`] but returns an error on failure.
pub fn check_lorentz(l: &Matrix4<f64>) -> Result<()> {
    if !l.iter().all(|x| x.is_finite()) || !is_lorentz(l, LORENTZ_TOLERANCE) {
        return Err(Error::NotLorentz);
    }
    Ok(())
}

pub const LORENTZ_TOLERANCE: f64 = 1e-12;

/// Pure boost with the given rapidity along spatial axis `axis ∈ {0,1,2}`
/// (x, y, z).
pub fn boost(axis: usize, rapidity: f64) -> Matrix4<f64> {
    assert!(axis < 3, "spatial axis must be 0, 1 or 2");
    let mut l = Matrix4::identity();
    let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
    let s = axis + 1;
    l[(0, 0)] = ch;
    l[(s, s)] = ch;
    l[(0, s)] = sh;
    l[(s, 0)] = sh;
    l
}

/// Embeds a spatial rotation matrix as `diag(1, R)`.
pub fn spatial_rotation(r: &[[f64; 3]; 3]) -> Matrix4<f64> {
    let mut l = Matrix4::identity();
    for i in 0..3 {
        for j in 0..3 {
            l[(i + 1, j + 1)] = r[i][j];
        }
    }
    l
}
