//! Low-dimensional similarity kernel `q = 1 / (1 + a d^(2b))`, the attractive
//! and repulsive edge costs built from it, and their closed-form gradients.
//!
//! Powers of the distance are evaluated from the squared distance as
//! `exp(b ln d^2)`, with `d^2 = 0` short-circuited.

/// Lower clamp for `1 - q` inside logarithms.
pub const ONE_MINUS_Q_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub a: f64,
    pub b: f64,
    /// Stabilizer added to `d^2` in the repulsive gradient.
    pub eps: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            a: 1.929,
            b: 0.7915,
            eps: 0.001,
        }
    }
}

impl KernelParams {
    /// `a * (d^2)^b`.
    #[inline]
    fn scaled_power(&self, dist_sq: f64) -> f64 {
        if dist_sq <= 0.0 {
            0.0
        } else {
            self.a * (self.b * dist_sq.ln()).exp()
        }
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub fn q_from_sq(&self, dist_sq: f64) -> f64 {
        1.0 / (1.0 + self.scaled_power(dist_sq))
    }

    /// Scalar `c` with `grad_attractive = c * (y_i - y_j)`.
    #[inline]
    pub fn attractive_coeff(&self, dist_sq: f64) -> f64 {
        if dist_sq <= 0.0 {
            return 0.0;
        }
        let apow = self.scaled_power(dist_sq);
        // 2ab d^(2(b-1)) = 2b * (a d^(2b)) / d^2
        2.0 * self.b * apow / dist_sq / (1.0 + apow)
    }

    /// Scalar `c` with `grad_repulsive = c * (y_i - y_j)`, using `eps`.
    #[inline]
    pub fn repulsive_coeff(&self, dist_sq: f64) -> f64 {
        self.repulsive_coeff_with(dist_sq, self.eps)
    }

    #[inline]
    pub fn repulsive_coeff_with(&self, dist_sq: f64, eps: f64) -> f64 {
        if dist_sq <= 0.0 {
            return 0.0;
        }
        -2.0 * self.b / ((eps + dist_sq) * (1.0 + self.scaled_power(dist_sq)))
    }
}

#[inline]
fn diff(yi: &[f64], yj: &[f64]) -> (Vec<f64>, f64) {
    let delta: Vec<f64> = yi.iter().zip(yj).map(|(a, b)| a - b).collect();
    let sq = delta.iter().map(|v| v * v).sum();
    (delta, sq)
}

/// Embedding-space similarity of two points, in `(0, 1]`.
pub fn q(yi: &[f64], yj: &[f64], kp: &KernelParams) -> f64 {
    kp.q_from_sq(crate::data::squared_distance(yi, yj))
}

/// `-ln q`.
pub fn cost_attractive(yi: &[f64], yj: &[f64], kp: &KernelParams) -> f64 {
    // -ln q = ln(1 + a d^(2b)); ln_1p keeps precision for small distances.
    kp.scaled_power(crate::data::squared_distance(yi, yj))
        .ln_1p()
}

/// `-ln(1 - q)` with `1 - q` clamped below at [`ONE_MINUS_Q_FLOOR`].
pub fn cost_repulsive(yi: &[f64], yj: &[f64], kp: &KernelParams) -> f64 {
    let q = q(yi, yj, kp);
    -(1.0 - q).max(ONE_MINUS_Q_FLOOR).ln()
}

/// Gradient of [`cost_attractive`] with respect to `yi`. The gradient with
/// respect to `yj` is its negation.
pub fn grad_attractive(yi: &[f64], yj: &[f64], kp: &KernelParams) -> Vec<f64> {
    let (delta, sq) = diff(yi, yj);
    let c = kp.attractive_coeff(sq);
    delta.into_iter().map(|v| c * v).collect()
}

/// Stabilized gradient of [`cost_repulsive`] with respect to `yi`. The
/// gradient with respect to `yj` is its negation.
pub fn grad_repulsive(yi: &[f64], yj: &[f64], kp: &KernelParams) -> Vec<f64> {
    let (delta, sq) = diff(yi, yj);
    let c = kp.repulsive_coeff(sq);
    delta.into_iter().map(|v| c * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAUCHY: KernelParams = KernelParams {
        a: 1.0,
        b: 1.0,
        eps: 0.001,
    };

    #[test]
    fn q_values() {
        assert_eq!(q(&[1.0, 2.0], &[1.0, 2.0], &CAUCHY), 1.0);
        assert!((q(&[0.0, 0.0], &[1.0, 0.0], &CAUCHY) - 0.5).abs() < 1e-15);
        let kp = KernelParams::default();
        assert!((q(&[0.0], &[1.0], &kp) - 1.0 / 2.929).abs() < 1e-12);
        assert!((1.0f64 / 2.929 - 0.34141).abs() < 1e-5);
    }

    #[test]
    fn costs_at_unit_distance() {
        let (a, b) = ([0.0, 0.0], [1.0, 0.0]);
        assert!((cost_attractive(&a, &b, &CAUCHY) - 2f64.ln()).abs() < 1e-15);
        assert!((cost_repulsive(&a, &b, &CAUCHY) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(cost_attractive(&a, &a, &CAUCHY), 0.0);
    }

    #[test]
    fn costs_asymptotics() {
        let kp = KernelParams::default();
        let far = [1e6, 0.0];
        let ca = cost_attractive(&[0.0, 0.0], &far, &kp);
        let expected = kp.a.ln() + 2.0 * kp.b * 1e6f64.ln();
        assert!((ca - expected).abs() < 1e-6);
        assert!(cost_repulsive(&[0.0, 0.0], &far, &kp) < 1e-9);
    }

    #[test]
    fn repulsive_cost_is_clamped_at_coincidence() {
        let c = cost_repulsive(&[0.0], &[0.0], &CAUCHY);
        assert!((c + ONE_MINUS_Q_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn gradient_examples() {
        let ga = grad_attractive(&[1.0, 0.0], &[0.0, 0.0], &CAUCHY);
        assert!((ga[0] - 1.0).abs() < 1e-15 && ga[1] == 0.0);
        let gr = grad_repulsive(&[1.0, 0.0], &[0.0, 0.0], &CAUCHY);
        assert!((gr[0] + 2.0 / (1.001 * 2.0)).abs() < 1e-15);
        assert!((gr[0] + 0.999).abs() < 1e-3);
    }

    #[test]
    fn zero_gradient_at_coincidence() {
        for kp in [CAUCHY, KernelParams::default()] {
            assert_eq!(
                grad_attractive(&[2.0, 3.0], &[2.0, 3.0], &kp),
                vec![0.0, 0.0]
            );
            assert_eq!(
                grad_repulsive(&[2.0, 3.0], &[2.0, 3.0], &kp),
                vec![0.0, 0.0]
            );
        }
    }
}
