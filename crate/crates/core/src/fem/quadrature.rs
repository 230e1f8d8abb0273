//! Gauss rules exact for polynomials of degree 5.

use super::Point;

/// Points (as fractions of the interval) and weights (summing to 1).
pub(crate) fn line_rule() -> [(f64, f64); 3] {
    let r = (0.6_f64).sqrt() / 2.0;
    [(0.5 - r, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + r, 5.0 / 18.0)]
}

/// Barycentric points and weights (summing to 1) of the 7-point triangle rule.
pub(crate) fn triangle_rule() -> [([f64; 3], f64); 7] {
    let s = 15.0_f64.sqrt();
    let a = (6.0 - s) / 21.0;
    let b = (6.0 + s) / 21.0;
    let wa = (155.0 - s) / 1200.0;
    let wb = (155.0 + s) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}

pub(crate) fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

pub(crate) fn barycentric_point(v: [Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_rule_integrates_quintics() {
        let exact = 1.0 / 6.0;
        let q: f64 = line_rule().iter().map(|(t, w)| w * t.powi(5)).sum();
        assert!((q - exact).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_integrates_quintics() {
        // ∫ x^a y^b over the unit reference triangle = a! b! / (a + b + 2)!.
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for (a, b, exact) in [(5, 0, 1.0 / 42.0), (2, 3, 2.0 * 6.0 / 5040.0), (0, 0, 0.5)] {
            let q: f64 = triangle_rule()
                .iter()
                .map(|(l, w)| {
                    let p = barycentric_point(v, *l);
                    0.5 * w * p[0].powi(a) * p[1].powi(b)
                })
                .sum();
            assert!((q - exact).abs() < 1e-15, "{a} {b}: {q} vs {exact}");
        }
    }
}
