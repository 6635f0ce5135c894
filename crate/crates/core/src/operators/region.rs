//! Parameter regions where `S_{a,b,c}` and `T_{a,b,c}` are bounded on `L^p_α`.

use serde::Serialize;

use crate::scalar::Scalar;

/// Admissible Schur-test exponents `γ` for `h(x) = q^{-γ|x|}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SchurWindow<T> {
    /// The open interval `(lo, hi)`.
    Interval { lo: T, hi: T },
    /// `p = 1`, where no Schur exponent is used; `bounded` is the two-case condition.
    EndpointL1 { bounded: bool },
    Empty,
}

impl<T: Scalar> SchurWindow<T> {
    pub fn is_empty(&self) -> bool {
        match self {
            SchurWindow::Interval { .. } => false,
            SchurWindow::EndpointL1 { bounded } => !bounded,
            SchurWindow::Empty => true,
        }
    }

    /// Midpoint of the interval, if there is one.
    pub fn midpoint(&self) -> Option<T> {
        match *self {
            SchurWindow::Interval { lo, hi } => Some((lo + hi) / T::lit(2.0)),
            _ => None,
        }
    }
}

/// `(-(b-1)/p', a/p') ∩ (-(a+α-1)/p, (b-α)/p)`, and `Empty` when `c > a+b`.
pub fn schur_window<T: Scalar>(a: T, b: T, c: T, p: T, alpha: T) -> SchurWindow<T> {
    let one = T::one();
    if p == one {
        return SchurWindow::EndpointL1 { bounded: bounded_l1(a, b, c, alpha) };
    }
    if c > a + b {
        return SchurWindow::Empty;
    }
    let p_dual = p / (p - one);
    let lo = (-(b - one) / p_dual).max(-(a + alpha - one) / p);
    let hi = (a / p_dual).min((b - alpha) / p);
    if lo < hi {
        SchurWindow::Interval { lo, hi }
    } else {
        SchurWindow::Empty
    }
}

fn bounded_l1<T: Scalar>(a: T, b: T, c: T, alpha: T) -> bool {
    let one = T::one();
    if c == a + b {
        -a < alpha - one && alpha - one < b - one
    } else {
        c < a + b && -a < alpha - one && alpha - one <= b - one
    }
}

/// Whether `S_{a,b,c}` (equivalently `T_{a,b,c}`) is bounded on `L^p_α`.
pub fn predicted_bounded<T: Scalar>(a: T, b: T, c: T, p: T, alpha: T) -> bool {
    let one = T::one();
    if p == one {
        bounded_l1(a, b, c, alpha)
    } else {
        c <= a + b && -p * a < alpha - one && alpha - one < p * (b - one)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_window() {
        for (beta, alpha, p) in [(2.0, 2.0, 2.0), (2.0, 3.0, 3.0), (1.5, 1.2, 1.5)] {
            let ok = p * (beta - 1.0) > alpha - 1.0;
            let w = schur_window(0.0, beta, beta, p, alpha);
            assert_eq!(!w.is_empty(), ok, "beta={beta} alpha={alpha} p={p}");
            assert_eq!(predicted_bounded(0.0, beta, beta, p, alpha), ok);
        }
    }

    #[test]
    fn window_is_nonempty_iff_region_holds() {
        let grid = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
        for &a in &grid {
            for &b in &grid {
                for c in [1.5, 2.0, 3.0] {
                    for p in [1.5, 2.0, 4.0] {
                        for alpha in [1.5, 2.0, 3.0] {
                            let w = schur_window(a, b, c, p, alpha);
                            assert_eq!(!w.is_empty(), predicted_bounded(a, b, c, p, alpha));
                            if let Some(g) = w.midpoint() {
                                let pd = p / (p - 1.0);
                                assert!(-(b - 1.0) / pd < g && g < a / pd);
                                assert!(-(a + alpha - 1.0) / p < g && g < (b - alpha) / p);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn endpoint_cases() {
        assert!(schur_window(0.0, 2.0, 2.0, 1.0, 1.5).midpoint().is_none());
        assert!(!schur_window(0.0, 2.0, 2.0, 1.0, 1.5).is_empty());
        // c = a+b with α = b fails, c < a+b with α = b holds.
        assert!(!predicted_bounded(0.0, 2.0, 2.0, 1.0, 2.0));
        assert!(predicted_bounded(0.5, 2.0, 2.0, 1.0, 2.0));
        // -pa = α - 1: the interval endpoints meet.
        assert_eq!(schur_window(-0.5, 3.0, 2.0, 2.0, 2.0), SchurWindow::Empty);
        assert_eq!(schur_window(1.0, 1.0, 2.5, 2.0, 2.0), SchurWindow::Empty);
    }
}
