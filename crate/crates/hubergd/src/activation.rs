//! Scalar activation kernels.
//!
//! The Huberized ReLU with bandwidth `h` is the piecewise function
//!
//! ```text
//! phi(z) = 0           for z < 0
//!        = z^2 / (2h)  for z in [0, h]
//!        = z - h/2     for z > h
//! ```
//!
//! It is continuously differentiable; its derivative `phi'` has the weak
//! derivative `gamma(z) = 1/h` on `[0, h]` and `0` elsewhere (the classical
//! second derivative does not exist at `0` and `h`). The standard ReLU is
//! provided for comparison runs and carries no second-order structure here.
//!
//! All kernels are evaluated in plain double precision with no fast-math
//! reassociation, so test expectations are bit-stable.

use thiserror::Error;

/// Which activation the network uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    /// Huberized ReLU with quadratic band of width `h > 0`.
    Huberized { h: f64 },
    /// Standard ReLU, `max(z, 0)`; derivative at exactly 0 is taken as 0.
    StandardRelu,
}

#[derive(Debug, Error, PartialEq)]
pub enum ActivationError {
    #[error("non-finite activation input: {0}")]
    NonFiniteInput(f64),
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
}

impl ActivationKind {
    /// Huberized ReLU; fails unless `h > 0`.
    pub fn huberized(h: f64) -> Result<Self, ActivationError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(ActivationError::InvalidBandwidth(h));
        }
        Ok(ActivationKind::Huberized { h })
    }

    /// Bandwidth of the quadratic smoothing band, if any.
    pub fn bandwidth(&self) -> Option<f64> {
        match *self {
            ActivationKind::Huberized { h } => Some(h),
            ActivationKind::StandardRelu => None,
        }
    }
}

/// Activation value.
pub fn phi(z: f64, kind: ActivationKind) -> Result<f64, ActivationError> {
    if !z.is_finite() {
        return Err(ActivationError::NonFiniteInput(z));
    }
    Ok(phi_unchecked(z, kind))
}

/// Activation derivative. For the standard ReLU the subgradient at 0 is
/// resolved to 0, which keeps the update well-defined on zero preactivations.
pub fn phi_prime(z: f64, kind: ActivationKind) -> Result<f64, ActivationError> {
    if !z.is_finite() {
        return Err(ActivationError::NonFiniteInput(z));
    }
    Ok(phi_prime_unchecked(z, kind))
}

/// Weak derivative of `phi'` for the Huberized ReLU: `1/h` on `[0, h]`, else 0.
pub fn gamma(z: f64, h: f64) -> Result<f64, ActivationError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(ActivationError::InvalidBandwidth(h));
    }
    if !z.is_finite() {
        return Err(ActivationError::NonFiniteInput(z));
    }
    Ok(gamma_unchecked(z, h))
}

/// `phi` without the finiteness check, for hot loops that validated inputs.
#[inline]
pub(crate) fn phi_unchecked(z: f64, kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::Huberized { h } => {
            if z < 0.0 {
                0.0
            } else if z <= h {
                z * z / (2.0 * h)
            } else {
                z - h / 2.0
            }
        }
        ActivationKind::StandardRelu => z.max(0.0),
    }
}

#[inline]
pub(crate) fn phi_prime_unchecked(z: f64, kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::Huberized { h } => {
            if z < 0.0 {
                0.0
            } else if z <= h {
                z / h
            } else {
                1.0
            }
        }
        ActivationKind::StandardRelu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

#[inline]
pub(crate) fn gamma_unchecked(z: f64, h: f64) -> f64 {
    if (0.0..=h).contains(&z) {
        1.0 / h
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hub(h: f64) -> ActivationKind {
        ActivationKind::huberized(h).unwrap()
    }

    #[test]
    fn phi_piecewise_values() {
        let k = hub(0.5);
        assert_eq!(phi(-1.0, k).unwrap(), 0.0);
        assert_eq!(phi(0.25, k).unwrap(), 0.0625);
        assert_eq!(phi(1.0, k).unwrap(), 0.75);
        // relu branch
        assert_eq!(phi(-2.0, ActivationKind::StandardRelu).unwrap(), 0.0);
        assert_eq!(phi(3.0, ActivationKind::StandardRelu).unwrap(), 3.0);
    }

    #[test]
    fn phi_prime_piecewise_values() {
        let k = hub(0.5);
        assert_eq!(phi_prime(0.0, k).unwrap(), 0.0);
        assert_eq!(phi_prime(0.25, k).unwrap(), 0.5);
        assert_eq!(phi_prime(2.0, k).unwrap(), 1.0);
        assert_eq!(phi_prime(0.0, ActivationKind::StandardRelu).unwrap(), 0.0);
        assert_eq!(phi_prime(0.1, ActivationKind::StandardRelu).unwrap(), 1.0);
        assert_eq!(phi_prime(-0.1, ActivationKind::StandardRelu).unwrap(), 0.0);
    }

    #[test]
    fn gamma_band() {
        assert_eq!(gamma(0.25, 0.5).unwrap(), 2.0);
        assert_eq!(gamma(-0.1, 0.5).unwrap(), 0.0);
        assert_eq!(gamma(0.6, 0.5).unwrap(), 0.0);
        // closed band endpoints
        assert_eq!(gamma(0.0, 0.5).unwrap(), 2.0);
        assert_eq!(gamma(0.5, 0.5).unwrap(), 2.0);
    }

    #[test]
    fn invalid_inputs_error() {
        let k = hub(0.5);
        assert!(matches!(
            phi(f64::NAN, k),
            Err(ActivationError::NonFiniteInput(_))
        ));
        assert!(matches!(
            phi_prime(f64::INFINITY, k),
            Err(ActivationError::NonFiniteInput(_))
        ));
        assert!(matches!(
            gamma(0.1, 0.0),
            Err(ActivationError::InvalidBandwidth(_))
        ));
        assert!(matches!(
            gamma(0.1, -1.0),
            Err(ActivationError::InvalidBandwidth(_))
        ));
        assert!(ActivationKind::huberized(0.0).is_err());
    }

    #[test]
    fn phi_prime_matches_finite_differences_away_from_kinks() {
        let h = 0.37;
        let k = hub(h);
        let eps = 1e-7;
        let mut z = -2.0;
        while z <= 3.0 {
            let near_kink = (z - 0.0).abs() < 1e-3 || (z - h).abs() < 1e-3;
            if !near_kink {
                let fd = (phi(z + eps, k).unwrap() - phi(z - eps, k).unwrap()) / (2.0 * eps);
                let an = phi_prime(z, k).unwrap();
                let denom = an.abs().max(1e-12);
                assert!(
                    (fd - an).abs() / denom <= 1e-8 || (fd - an).abs() <= 1e-10,
                    "z={z} fd={fd} analytic={an}"
                );
            }
            z += 0.0113;
        }
    }

    proptest! {
        /// phi(z) <= phi'(z)z <= phi(z) + h/2, the inequality the gradient
        /// alignment bound leans on.
        #[test]
        fn prop_phi_phiprime_sandwich(z in -10.0f64..10.0, h in 1e-3f64..2.0) {
            let k = hub(h);
            let f = phi(z, k).unwrap();
            let fz = phi_prime(z, k).unwrap() * z;
            prop_assert!(f <= fz + 1e-15);
            prop_assert!(fz <= f + h / 2.0 + 1e-15);
        }

        /// phi is 1-Lipschitz.
        #[test]
        fn prop_phi_lipschitz(a in -10.0f64..10.0, b in -10.0f64..10.0, h in 1e-3f64..2.0) {
            let k = hub(h);
            let d = (phi(a, k).unwrap() - phi(b, k).unwrap()).abs();
            prop_assert!(d <= (a - b).abs() + 1e-15);
        }

        /// phi is nonnegative and monotone nondecreasing.
        #[test]
        fn prop_phi_monotone_nonnegative(a in -10.0f64..10.0, b in -10.0f64..10.0, h in 1e-3f64..2.0) {
            let k = hub(h);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let flo = phi(lo, k).unwrap();
            let fhi = phi(hi, k).unwrap();
            prop_assert!(flo >= 0.0);
            prop_assert!(flo <= fhi);
        }
    }

    #[test]
    fn sandwich_on_dense_grid() {
        let h = 0.5;
        let k = hub(h);
        for i in 0..=4000 {
            let z = -2.0 + (i as f64) * 0.001;
            let f = phi(z, k).unwrap();
            let fz = phi_prime(z, k).unwrap() * z;
            assert!(f <= fz + 1e-15, "z={z}");
            assert!(fz <= f + h / 2.0 + 1e-15, "z={z}");
        }
    }
}
