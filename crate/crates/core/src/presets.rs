//! Fixed packet choices shared by the verification drivers.
//!
//! Packets are centered close to the apex of the cone. Centers near `|k| = 1`
//! put most of the angular structure at harmonic degrees well above what a
//! 26- or 98-direction rule integrates exactly, which dominates every other
//! error source once the width drops to 0.5.

use num_complex::Complex64;
use rand::Rng;

use crate::tensor::{AntisymTensor2, FourVector};
use crate::testfn::AnalyticTestFunction;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn amplitude_f() -> AntisymTensor2 {
    AntisymTensor2::from_components([
        c(0.30, 0.95),
        c(-0.85, 0.40),
        c(0.55, -0.20),
        c(0.10, 0.70),
        c(-0.45, -0.65),
        c(0.80, 0.15),
    ])
}

fn amplitude_g() -> AntisymTensor2 {
    AntisymTensor2::from_components([
        c(-0.60, 0.25),
        c(0.35, 0.90),
        c(0.75, -0.50),
        c(-0.20, -0.85),
        c(0.65, 0.05),
        c(-0.40, 0.55),
    ])
}

/// Generic complex pair used for the φ contrast and the radial convergence study.
pub fn default_pair() -> (AnalyticTestFunction, AnalyticTestFunction) {
    pair(1.0, 0.5)
}

/// Narrow pair (`σ = 0.5`) for the boost invariance check.
pub fn narrow_pair() -> (AnalyticTestFunction, AnalyticTestFunction) {
    pair(0.5, 0.2)
}

fn pair(width: f64, reach: f64) -> (AnalyticTestFunction, AnalyticTestFunction) {
    let f = AnalyticTestFunction::gaussian_packet(amplitude_f(), FourVector::on_shell([0.0, 0.0, reach]), width, false);
    let g = AnalyticTestFunction::gaussian_packet(
        amplitude_g(),
        FourVector::on_shell([0.6 * reach, 0.4 * reach, 0.5 * reach]),
        width,
        false,
    );
    (f.expect("fixed width is valid"), g.expect("fixed width is valid"))
}

/// Uniform complex entries in the unit square.
pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R) -> AntisymTensor2 {
    AntisymTensor2::from_components(std::array::from_fn(|_| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }))
}

/// Packet with random amplitude, a center on the shell within `|k| ≤ 0.5`,
/// and width in `[0.8, 1.2)`.
pub fn random_packet<R: Rng + ?Sized>(rng: &mut R, real: bool) -> AnalyticTestFunction {
    let amplitude = random_tensor(rng);
    let center: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.3..0.3));
    let width = rng.random_range(0.8..1.2);
    AnalyticTestFunction::gaussian_packet(amplitude, FourVector::on_shell(center), width, real)
        .expect("width drawn from a positive range")
}
