//! Triangle quadrature.
//!
//! One fixed rule is used for every area integral in the crate: a 12-point rule
//! exact for polynomials of total degree 6 on the reference triangle
//! {(xi, eta): xi >= 0, eta >= 0, xi + eta <= 1}. Degree 6 keeps the curved
//! isoparametric forms (basis degree 2 x basis degree 2 x geometry factors)
//! integrated accurately without per-term rule switching.

use super::basis;
use crate::vec2::Vec2;
use std::sync::LazyLock;

/// One quadrature point in reference coordinates with its weight.
///
/// Weights include the reference-triangle area: they sum to 1/2, so
/// `sum_q w_q f(xi_q)` approximates the integral of `f` over the triangle.
#[derive(Debug, Clone, Copy)]
pub struct QPoint {
    pub xi: f64,
    pub eta: f64,
    pub w: f64,
}

/// 12-point degree-6 rule (three symmetric orbits).
pub const TRI_QUADRATURE: [QPoint; 12] = {
    // Orbit generators in barycentric coordinates (a, b, b) and (a, b, c),
    // weights normalized to sum to 1 before the 1/2 area factor.
    const A1: f64 = 0.873_821_971_016_996;
    const B1: f64 = 0.063_089_014_491_502;
    const W1: f64 = 0.050_844_906_370_207 * 0.5;
    const A2: f64 = 0.501_426_509_658_179;
    const B2: f64 = 0.249_286_745_170_910;
    const W2: f64 = 0.116_786_275_726_379 * 0.5;
    const A3: f64 = 0.636_502_499_121_399;
    const B3: f64 = 0.310_352_451_033_785;
    const C3: f64 = 0.053_145_049_844_816;
    const W3: f64 = 0.082_851_075_618_374 * 0.5;
    // barycentric (l0, l1, l2) -> (xi, eta) = (l1, l2)
    [
        QPoint { xi: B1, eta: B1, w: W1 },
        QPoint { xi: A1, eta: B1, w: W1 },
        QPoint { xi: B1, eta: A1, w: W1 },
        QPoint { xi: B2, eta: B2, w: W2 },
        QPoint { xi: A2, eta: B2, w: W2 },
        QPoint { xi: B2, eta: A2, w: W2 },
        QPoint { xi: B3, eta: C3, w: W3 },
        QPoint { xi: C3, eta: B3, w: W3 },
        QPoint { xi: A3, eta: B3, w: W3 },
        QPoint { xi: B3, eta: A3, w: W3 },
        QPoint { xi: A3, eta: C3, w: W3 },
        QPoint { xi: C3, eta: A3, w: W3 },
    ]
};

pub const N_QP: usize = TRI_QUADRATURE.len();

/// P2 basis values tabulated at the quadrature points.
pub static P2_AT_QP: LazyLock<[[f64; 6]; N_QP]> = LazyLock::new(|| {
    std::array::from_fn(|q| basis::p2_values(TRI_QUADRATURE[q].xi, TRI_QUADRATURE[q].eta))
});

/// P2 reference-gradient values tabulated at the quadrature points.
pub static P2_GRAD_AT_QP: LazyLock<[[Vec2; 6]; N_QP]> = LazyLock::new(|| {
    std::array::from_fn(|q| basis::p2_gradients(TRI_QUADRATURE[q].xi, TRI_QUADRATURE[q].eta))
});

/// P1 basis values tabulated at the quadrature points.
pub static P1_AT_QP: LazyLock<[[f64; 3]; N_QP]> = LazyLock::new(|| {
    std::array::from_fn(|q| basis::p1_values(TRI_QUADRATURE[q].xi, TRI_QUADRATURE[q].eta))
});

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of xi^a * eta^b over the reference triangle: a! b! / (a+b+2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn weights_sum_to_half() {
        let s: f64 = TRI_QUADRATURE.iter().map(|q| q.w).sum();
        assert!((s - 0.5).abs() < 1e-14, "sum = {s}");
    }

    #[test]
    fn exact_for_degree_six_monomials() {
        for a in 0..=6u32 {
            for b in 0..=(6 - a) {
                let num: f64 = TRI_QUADRATURE
                    .iter()
                    .map(|q| q.w * q.xi.powi(a as i32) * q.eta.powi(b as i32))
                    .sum();
                let exact = monomial_exact(a, b);
                assert!(
                    (num - exact).abs() < 1e-14 * (1.0 + exact.abs()),
                    "xi^{a} eta^{b}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn points_inside_triangle() {
        for q in TRI_QUADRATURE {
            assert!(q.xi > 0.0 && q.eta > 0.0 && q.xi + q.eta < 1.0);
            assert!(q.w > 0.0);
        }
    }
}
