//! Quadrature over the sphere: Fejér rule in the polar angle, midpoint
//! rule in the azimuth.
//!
//! The polar nodes are the midpoints `theta_i = (i + 1/2) pi / n`. With
//! the first Fejér rule's weights this integrates `f(theta) sin(theta)`
//! exactly (to rounding) whenever `f` is a polynomial of degree < n in
//! `cos(theta)`, which covers every Husimi function of a spin-S state
//! once `n >= 2S + 1`. Plain `sin(theta) * dtheta` midpoint weights at
//! the same nodes would leave an O(1e-6) normalization error at the
//! resolutions used here.

/// Polar nodes (ascending in `(0, pi)`) and weights such that
/// `sum_i w_i f(theta_i)` approximates `int_0^pi f(theta) sin(theta) dtheta`.
pub fn fejer1(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature rule needs at least one node");
    let nodes: Vec<f64> = (0..n)
        .map(|i| (i as f64 + 0.5) * std::f64::consts::PI / n as f64)
        .collect();
    let weights = nodes
        .iter()
        .map(|&theta| {
            let mut s = 0.0;
            for k in 1..=(n / 2) {
                let kf = k as f64;
                s += (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
            (2.0 / n as f64) * (1.0 - 2.0 * s)
        })
        .collect();
    (nodes, weights)
}

/// Azimuthal midpoint nodes `phi_j = (j + 1/2) 2 pi / n` and their common
/// weight `2 pi / n`; exact for trigonometric polynomials of degree < n.
pub fn midpoint_phi(n: usize) -> (Vec<f64>, f64) {
    assert!(n > 0, "quadrature rule needs at least one node");
    let nodes = (0..n)
        .map(|j| (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64)
        .collect();
    (nodes, 2.0 * std::f64::consts::PI / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_rule_matches_known_weights() {
        let (nodes, weights) = fejer1(2);
        assert_relative_eq!(nodes[0], std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(weights[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(weights[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_to_two() {
        for &n in &[1, 3, 16, 101, 256] {
            let (_, w) = fejer1(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_below_node_count() {
        let n = 24;
        let (nodes, w) = fejer1(n);
        for deg in 0..n as i32 {
            let num: f64 = nodes
                .iter()
                .zip(&w)
                .map(|(&t, &wi)| wi * t.cos().powi(deg))
                .sum();
            // int_{-1}^{1} x^deg dx
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((num - exact).abs() < 1e-14, "degree {deg}: {num} vs {exact}");
        }
    }

    #[test]
    fn sphere_area_from_product_rule() {
        let (_, wt) = fejer1(64);
        let (phis, wp) = midpoint_phi(128);
        let area: f64 = wt.iter().map(|wi| wi * wp * phis.len() as f64).sum();
        assert_relative_eq!(area, 4.0 * std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn azimuthal_rule_kills_low_harmonics() {
        let (phis, w) = midpoint_phi(32);
        for k in 1..32 {
            let s: f64 = phis.iter().map(|&p| w * (k as f64 * p).cos()).sum();
            assert!(s.abs() < 1e-13, "harmonic {k}: {s:.2e}");
        }
    }
}
