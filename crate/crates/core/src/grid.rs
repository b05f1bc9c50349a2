//! Discretized forward light cone.
//!
//! The invariant measure `d⁴k/(2π)⁴ · 2πδ(k²)θ(k⁰)` reduces to
//! `d³k / ((2π)³ 2|k⃗|)`. A grid is a product rule: Gauss–Legendre radii on
//! `(k_min, k_max)` times a parity- and octahedrally-closed set of directions.
//! Node weights absorb the whole measure:
//!
//! ```text
//! w = ρ_a σ_b r_a² / ((2π)³ · 2 r_a)
//! ```
//!
//! Parity partners and rotation permutations are built from integer lattice
//! directions, so `kvec[partner(i)] == −kvec[i]` holds bit-exactly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{spatial_rotation, FourVector};

/// Built-in angular direction sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AngularScheme {
    /// The six coordinate axes, exact through degree 3.
    Octahedron6,
    /// Faces, edges and corners of the cube (Lebedev), exact through degree 7.
    Lebedev26,
    /// Surface points of the 5×5×5 cube lattice, exact through degree 11.
    Cube98,
}

impl AngularScheme {
    pub const ALL: [AngularScheme; 3] = [
        AngularScheme::Octahedron6,
        AngularScheme::Lebedev26,
        AngularScheme::Cube98,
    ];

    pub fn direction_count(self) -> usize {
        match self {
            AngularScheme::Octahedron6 => 6,
            AngularScheme::Lebedev26 => 26,
            AngularScheme::Cube98 => 98,
        }
    }

    /// Highest polynomial degree integrated exactly over the sphere.
    pub fn exact_degree(self) -> u32 {
        match self {
            AngularScheme::Octahedron6 => 3,
            AngularScheme::Lebedev26 => 7,
            AngularScheme::Cube98 => 11,
        }
    }

    /// Orbit generators with the per-point weight as a fraction of 4π.
    fn orbits(self) -> &'static [([i32; 3], f64)] {
        match self {
            AngularScheme::Octahedron6 => &[([1, 0, 0], 1.0 / 6.0)],
            AngularScheme::Lebedev26 => &[
                ([1, 0, 0], 1.0 / 21.0),
                ([1, 1, 0], 4.0 / 105.0),
                ([1, 1, 1], 9.0 / 280.0),
            ],
            // Weights solve the exact-moment equations for the octahedral
            // invariants 1, s4, s6, s4², s4·s6 (s4 = x⁴+y⁴+z⁴, s6 = x²y²z²)
            // with the last two orbits tied; all positive.
            AngularScheme::Cube98 => &[
                ([2, 0, 0], 10324.0 / 557865.0),
                ([2, 1, 0], 111875.0 / 8033256.0),
                ([2, 1, 1], 822.0 / 61985.0),
                ([2, 2, 0], 39884.0 / 5020785.0),
                ([2, 2, 1], 2187.0 / 495880.0),
                ([2, 2, 2], 2187.0 / 495880.0),
            ],
        }
    }
}

impl fmt::Display for AngularScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngularScheme::Octahedron6 => "octahedron6",
            AngularScheme::Lebedev26 => "lebedev26",
            AngularScheme::Cube98 => "cube98",
        })
    }
}

impl FromStr for AngularScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "6" | "octahedron6" => Ok(AngularScheme::Octahedron6),
            "26" | "lebedev26" => Ok(AngularScheme::Lebedev26),
            "98" | "cube98" => Ok(AngularScheme::Cube98),
            other => Err(Error::UnknownAngularScheme(other.to_string())),
        }
    }
}

impl TryFrom<String> for AngularScheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AngularScheme> for String {
    fn from(s: AngularScheme) -> String {
        s.to_string()
    }
}

/// Unit directions with weights summing to 4π and an exact parity pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularRule {
    directions: Vec<[f64; 3]>,
    weights: Vec<f64>,
    partner: Vec<usize>,
}

impl AngularRule {
    pub fn from_scheme(scheme: AngularScheme) -> Self {
        let mut points: Vec<([i32; 3], f64)> = Vec::new();
        for &(generator, weight) in scheme.orbits() {
            let mut orbit: Vec<[i32; 3]> = signed_permutations(generator);
            orbit.sort_unstable();
            orbit.dedup();
            points.extend(orbit.into_iter().map(|p| (p, weight)));
        }
        let index: HashMap<[i32; 3], usize> =
            points.iter().enumerate().map(|(i, (p, _))| (*p, i)).collect();
        let partner = points
            .iter()
            .map(|(p, _)| index[&[-p[0], -p[1], -p[2]]])
            .collect();
        let directions = points
            .iter()
            .map(|(p, _)| {
                let n2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                let norm = f64::from(n2).sqrt();
                [f64::from(p[0]) / norm, f64::from(p[1]) / norm, f64::from(p[2]) / norm]
            })
            .collect();
        let weights = points.iter().map(|(_, w)| 4.0 * PI * w).collect();
        debug_assert_eq!(points.len(), scheme.direction_count());
        AngularRule {
            directions,
            weights,
            partner,
        }
    }

    /// Builds a parity-closed rule from one representative per antipodal
    /// pair; each direction and its negation receive the given weight.
    pub fn from_half(pairs: &[([f64; 3], f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidAngularRule("no directions".into()));
        }
        let mut directions = Vec::with_capacity(2 * pairs.len());
        let mut weights = Vec::with_capacity(2 * pairs.len());
        let mut partner = Vec::with_capacity(2 * pairs.len());
        for (i, &(d, w)) in pairs.iter().enumerate() {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::InvalidAngularRule(format!("direction {i} is zero or not finite")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidAngularRule(format!("weight {i} is not positive")));
            }
            let unit = d.map(|c| c / norm);
            directions.push(unit);
            directions.push(unit.map(|c| -c));
            weights.extend([w, w]);
            partner.extend([2 * i + 1, 2 * i]);
        }
        Ok(AngularRule {
            directions,
            weights,
            partner,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn partner(&self, b: usize) -> usize {
        self.partner[b]
    }

    /// `Σ_b σ_b X(n̂_b)`.
    pub fn integrate(&self, mut integrand: impl FnMut([f64; 3]) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * integrand(*d))
            .sum()
    }

    fn rotation_permutation(&self, rotation: &OctahedralRotation) -> Option<Vec<usize>> {
        let index: HashMap<[u64; 3], usize> = self
            .directions
            .iter()
            .enumerate()
            .map(|(i, d)| (bit_key(d), i))
            .collect();
        let mut perm = Vec::with_capacity(self.len());
        for (b, d) in self.directions.iter().enumerate() {
            let target = *index.get(&bit_key(&rotation.apply(d)))?;
            if self.weights[target] != self.weights[b] {
                return None;
            }
            perm.push(target);
        }
        Some(perm)
    }
}

fn signed_permutations(p: [i32; 3]) -> Vec<[i32; 3]> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for perm in PERMS {
        for signs in 0..8u8 {
            let s = |bit: u8| if signs & (1 << bit) == 0 { 1 } else { -1 };
            out.push([s(0) * p[perm[0]], s(1) * p[perm[1]], s(2) * p[perm[2]]]);
        }
    }
    out
}

/// Exact lookup key; `+0.0` and `−0.0` collapse.
fn bit_key(d: &[f64; 3]) -> [u64; 3] {
    d.map(|c| (c + 0.0).to_bits())
}

/// One of the 24 proper rotations of the cube, as a signed permutation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OctahedralRotation {
    matrix: [[i8; 3]; 3],
}

impl OctahedralRotation {
    pub const IDENTITY: OctahedralRotation = OctahedralRotation {
        matrix: [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    };

    /// All 24 rotations in a fixed order; index 0 is the identity.
    pub fn all() -> Vec<OctahedralRotation> {
        const PERMS: [([usize; 3], i8); 6] = [
            ([0, 1, 2], 1),
            ([1, 2, 0], 1),
            ([2, 0, 1], 1),
            ([0, 2, 1], -1),
            ([1, 0, 2], -1),
            ([2, 1, 0], -1),
        ];
        let mut out = Vec::with_capacity(24);
        for (perm, parity) in PERMS {
            for signs in 0..8u8 {
                let s: [i8; 3] = [0, 1, 2].map(|bit| if signs & (1 << bit) == 0 { 1 } else { -1 });
                if parity * s[0] * s[1] * s[2] != 1 {
                    continue;
                }
                let mut matrix = [[0i8; 3]; 3];
                for row in 0..3 {
                    matrix[row][perm[row]] = s[row];
                }
                out.push(OctahedralRotation { matrix });
            }
        }
        out
    }

    /// Rotation by +90° about a coordinate axis (0 = x, 1 = y, 2 = z).
    pub fn quarter_turn(axis: usize) -> Self {
        let matrix = match axis {
            0 => [[1, 0, 0], [0, 0, -1], [0, 1, 0]],
            1 => [[0, 0, 1], [0, 1, 0], [-1, 0, 0]],
            2 => [[0, -1, 0], [1, 0, 0], [0, 0, 1]],
            _ => panic!("axis must be 0, 1 or 2"),
        };
        OctahedralRotation { matrix }
    }

    pub fn matrix(&self) -> [[i8; 3]; 3] {
        self.matrix
    }

    /// Position in [`OctahedralRotation::all`].
    pub fn index(&self) -> usize {
        OctahedralRotation::all()
            .iter()
            .position(|r| r == self)
            .expect("signed permutation with det +1")
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &OctahedralRotation) -> OctahedralRotation {
        let matrix = std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| self.matrix[i][k] * other.matrix[k][j]).sum())
        });
        OctahedralRotation { matrix }
    }

    pub fn inverse(&self) -> OctahedralRotation {
        let matrix = std::array::from_fn(|i| std::array::from_fn(|j| self.matrix[j][i]));
        OctahedralRotation { matrix }
    }

    /// Exact action: every row picks one component and possibly flips its sign.
    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                match m {
                    1 => out[i] = v[j],
                    -1 => out[i] = -v[j],
                    _ => {}
                }
            }
        }
        out
    }

    pub fn as_f64(&self) -> [[f64; 3]; 3] {
        self.matrix.map(|row| row.map(f64::from))
    }

    /// `diag(1, R)` as a Lorentz matrix.
    pub fn to_lorentz(&self) -> Matrix4<f64> {
        spatial_rotation(&self.as_f64())
    }
}

/// Grid parameters as they appear in run configurations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub radial_nodes: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub angular: AngularScheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radial_nodes: 8,
            k_min: 0.05,
            k_max: 6.0,
            angular: AngularScheme::Lebedev26,
        }
    }
}

impl GridSpec {
    pub fn new(radial_nodes: usize, angular: AngularScheme) -> Self {
        GridSpec {
            radial_nodes,
            angular,
            ..GridSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes == 0 {
            return Err(Error::EmptyRadial);
        }
        if !(self.k_min > 0.0 && self.k_max > self.k_min && self.k_max.is_finite()) {
            return Err(Error::InvalidWindow {
                k_min: self.k_min,
                k_max: self.k_max,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridNode {
    pub kvec: [f64; 3],
    /// On-shell energy `|k⃗|`.
    pub omega: f64,
    pub weight: f64,
    pub partner: usize,
}

impl GridNode {
    /// `(+ω, k⃗)`.
    pub fn momentum(&self) -> FourVector {
        FourVector([self.omega, self.kvec[0], self.kvec[1], self.kvec[2]])
    }

    /// `(−ω, k⃗)`, the negative-frequency sheet point above the same `k⃗`.
    pub fn negative_frequency_momentum(&self) -> FourVector {
        FourVector([-self.omega, self.kvec[0], self.kvec[1], self.kvec[2]])
    }
}

/// Weighted node set on the positive light-cone sheet.
#[derive(Clone, Debug, PartialEq)]
pub struct LightconeGrid {
    spec: Option<GridSpec>,
    nodes: Vec<GridNode>,
    /// Indexed like [`OctahedralRotation::all`]; `None` when not closed.
    rotations: Vec<Option<Vec<usize>>>,
}

impl LightconeGrid {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = NonZeroUsize::new(spec.radial_nodes).ok_or(Error::EmptyRadial)?;
        let rule = GaussLegendre::new(n);
        let half = 0.5 * (spec.k_max - spec.k_min);
        let mid = 0.5 * (spec.k_max + spec.k_min);
        let mut radial: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (mid + half * x, half * w))
            .collect();
        radial.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut grid = Self::from_parts(&radial, &AngularRule::from_scheme(spec.angular))?;
        grid.spec = Some(*spec);
        Ok(grid)
    }

    /// Product grid from explicit radial `(r, ρ)` pairs and an angular rule.
    pub fn from_parts(radial: &[(f64, f64)], angular: &AngularRule) -> Result<Self> {
        if radial.is_empty() {
            return Err(Error::EmptyRadial);
        }
        if angular.is_empty() {
            return Err(Error::InvalidAngularRule("no directions".into()));
        }
        for &(r, rho) in radial {
            if !(r > 0.0 && r.is_finite() && rho > 0.0 && rho.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "radial node ({r}, {rho}) must have positive finite radius and weight"
                )));
            }
        }
        let nd = angular.len();
        let norm = 2.0 * (2.0 * PI).powi(3);
        let mut nodes = Vec::with_capacity(radial.len() * nd);
        for (a, &(r, rho)) in radial.iter().enumerate() {
            for b in 0..nd {
                let n = angular.directions[b];
                nodes.push(GridNode {
                    kvec: [r * n[0], r * n[1], r * n[2]],
                    omega: r,
                    weight: rho * angular.weights[b] * r * r / (norm * r),
                    partner: a * nd + angular.partner[b],
                });
            }
        }
        let rotations = OctahedralRotation::all()
            .iter()
            .map(|rot| {
                angular.rotation_permutation(rot).map(|dir_perm| {
                    (0..radial.len())
                        .flat_map(|a| dir_perm.iter().map(move |&b| a * nd + b))
                        .collect()
                })
            })
            .collect();
        Ok(LightconeGrid {
            spec: None,
            nodes,
            rotations,
        })
    }

    pub fn spec(&self) -> Option<&GridSpec> {
        self.spec.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &GridNode {
        &self.nodes[i]
    }

    /// Index of the node at `−k⃗ᵢ`.
    pub fn node_negation(&self, i: usize) -> usize {
        self.nodes[i].partner
    }

    /// Node permutation `π` with `kvec[π(i)] = R·kvec[i]`.
    pub fn rotation_permutation(&self, rotation: &OctahedralRotation) -> Result<&[usize]> {
        let idx = rotation.index();
        self.rotations[idx]
            .as_deref()
            .ok_or(Error::RotationNotClosed(idx))
    }

    /// Sum of `w_i X(k_i)` over the positive sheet, i.e. the discretized
    /// invariant measure `∫ d³k / ((2π)³ 2|k⃗|) X`.
    pub fn integrate(&self, mut integrand: impl FnMut(&GridNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * integrand(n)).sum()
    }

    /// Writes `index,kx,ky,kz,weight,partner` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,kx,ky,kz,weight,partner")?;
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                n.kvec[0], n.kvec[1], n.kvec[2], n.weight, n.partner
            )?;
        }
        Ok(())
    }
}
