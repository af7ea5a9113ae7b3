//! Forward-difference gradient and its negative adjoint.

use crate::image::{RealImage, VectorField};

/// Forward differences with Neumann boundary: the difference is 0 at the last
/// index of each axis. `first` differences along rows, `second` along columns.
pub fn grad_forward(u: &RealImage) -> VectorField {
    let (h, w) = (u.height(), u.width());
    let mut d1 = RealImage::zeros(h, w);
    let mut d2 = RealImage::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            if r + 1 < h {
                d1.set(r, c, u.get(r + 1, c) - u.get(r, c));
            }
            if c + 1 < w {
                d2.set(r, c, u.get(r, c + 1) - u.get(r, c));
            }
        }
    }
    VectorField { first: d1, second: d2 }
}

/// Backward divergence, the exact negative adjoint of [`grad_forward`]:
/// `<grad u, q> = <u, -div q>` for all `u`, `q`.
pub fn div_backward(q: &VectorField) -> RealImage {
    let (h, w) = (q.height(), q.width());
    let mut out = RealImage::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            // Adjoint of the Neumann forward difference along rows: the last
            // row of q.first never contributes.
            let mut v = 0.0;
            if r + 1 < h {
                v -= q.first.get(r, c);
            }
            if r > 0 {
                v += q.first.get(r - 1, c);
            }
            if c + 1 < w {
                v -= q.second.get(r, c);
            }
            if c > 0 {
                v += q.second.get(r, c - 1);
            }
            out.set(r, c, -v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_has_zero_gradient() {
        let g = grad_forward(&RealImage::constant(5, 7, 3.2));
        assert_eq!(g.first.max_abs(), 0.0);
        assert_eq!(g.second.max_abs(), 0.0);
    }

    #[test]
    fn ramp_along_rows() {
        let img = RealImage::from_fn(4, 3, |r, _| r as f64);
        let g = grad_forward(&img);
        for r in 0..4 {
            for c in 0..3 {
                let expect = if r == 3 { 0.0 } else { 1.0 };
                assert_eq!(g.first.get(r, c), expect);
                assert_eq!(g.second.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..5 {
            let u = RealImage::from_fn(9, 13, |_, _| rng.gen_range(-1.0..1.0));
            let q = VectorField {
                first: RealImage::from_fn(9, 13, |_, _| rng.gen_range(-1.0..1.0)),
                second: RealImage::from_fn(9, 13, |_, _| rng.gen_range(-1.0..1.0)),
            };
            let gu = grad_forward(&u);
            let lhs: f64 = gu
                .first
                .data()
                .iter()
                .zip(q.first.data())
                .chain(gu.second.data().iter().zip(q.second.data()))
                .map(|(a, b)| a * b)
                .sum();
            let neg_div = div_backward(&q).scale(-1.0);
            let rhs: f64 = u.data().iter().zip(neg_div.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12, "adjoint mismatch {lhs} vs {rhs}");
        }
    }

    #[test]
    fn div_of_zero_field_and_constant_grad() {
        let z = VectorField::zeros(4, 4);
        assert_eq!(div_backward(&z).max_abs(), 0.0);
        let d = div_backward(&grad_forward(&RealImage::constant(6, 6, 1.0)));
        assert_eq!(d.max_abs(), 0.0);
    }
}
