use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::Digest;

use super::{hash_hex, Problem};

/// Least squares `f_i(x) = ½‖a_i x − b_i‖²` with scalar `a_i = i/n`.
///
/// Nodes are stored 0-based: storage index `k` is node `i = k + 1`, so the
/// Hessian of storage node `k` is `((k+1)/n)² I`. `L = 1` and `μ = 1/n²`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    n: usize,
    d: usize,
    b: Vec<DVector<f64>>,
    sigma2: f64,
    varsigma2: f64,
}

/// Draws `b_i ~ N(0, (ς²/i²) I_d)` for `i = 1..n` from `seed`.
pub fn make_quadratic(n: usize, d: usize, varsigma2: f64, sigma2: f64, seed: u64) -> QuadraticProblem {
    assert!(n >= 1 && d >= 1, "quadratic problem needs n >= 1 and d >= 1");
    assert!(varsigma2 >= 0.0 && sigma2 >= 0.0, "variances must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = (1..=n)
        .map(|i| {
            let std = varsigma2.sqrt() / i as f64;
            DVector::from_fn(d, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            })
        })
        .collect();
    QuadraticProblem { n, d, b, sigma2, varsigma2 }
}

impl QuadraticProblem {
    /// Builds the problem from explicit offsets, `b[k]` belonging to node `k + 1`.
    pub fn from_offsets(b: Vec<DVector<f64>>, sigma2: f64) -> Self {
        assert!(!b.is_empty(), "need at least one node");
        let d = b[0].len();
        assert!(b.iter().all(|v| v.len() == d), "offsets must share a dimension");
        QuadraticProblem { n: b.len(), d, b, sigma2, varsigma2: f64::NAN }
    }

    /// `a_k = (k+1)/n` for storage index `k`.
    pub fn scale(&self, k: usize) -> f64 {
        (k + 1) as f64 / self.n as f64
    }

    pub fn offsets(&self) -> &[DVector<f64>] {
        &self.b
    }

    /// Heterogeneity parameter the offsets were drawn with (`NaN` when built
    /// from explicit offsets).
    pub fn varsigma2(&self) -> f64 {
        self.varsigma2
    }

    /// `x* = (Σ a_i b_i) / (Σ a_i²)`.
    pub fn minimizer(&self) -> DVector<f64> {
        let mut num = DVector::zeros(self.d);
        let mut den = 0.0;
        for (k, b) in self.b.iter().enumerate() {
            let a = self.scale(k);
            num.axpy(a, b, 1.0);
            den += a * a;
        }
        num / den
    }

    /// A copy with a different gradient-noise level.
    pub fn with_noise(&self, sigma2: f64) -> Self {
        QuadraticProblem { sigma2, ..self.clone() }
    }
}

impl Problem for QuadraticProblem {
    fn nodes(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn strong_convexity(&self) -> f64 {
        let a = self.scale(0);
        a * a
    }

    fn noise_variance(&self) -> f64 {
        self.sigma2
    }

    fn value_i(&self, i: usize, x: &[f64]) -> f64 {
        let a = self.scale(i);
        0.5 * x.iter().zip(self.b[i].iter()).map(|(x, b)| (a * x - b).powi(2)).sum::<f64>()
    }

    fn grad_i_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let a = self.scale(i);
        for ((o, x), b) in out.iter_mut().zip(x).zip(self.b[i].iter()) {
            *o = a * (a * x - b);
        }
    }

    fn fingerprint(&self) -> String {
        hash_hex(|h| {
            h.update(b"quadratic");
            h.update((self.n as u64).to_le_bytes());
            h.update((self.d as u64).to_le_bytes());
            h.update(self.sigma2.to_le_bytes());
            for b in &self.b {
                for v in b.iter() {
                    h.update(v.to_le_bytes());
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{finite_difference_error, heterogeneity};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn two_node_closed_form() {
        let p = QuadraticProblem::from_offsets(vec![DVector::from_element(1, 1.0); 2], 0.0);
        assert_abs_diff_eq!(p.minimizer()[0], 1.2, epsilon = 1e-15);
    }

    #[test]
    fn zero_heterogeneity_has_zero_minimizer() {
        let p = make_quadratic(6, 4, 0.0, 1.0, 3);
        assert!(p.minimizer().iter().all(|&v| v == 0.0));
        let zero = [0.0; 4];
        for i in 0..6 {
            assert!(p.grad_i(i, &zero).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constants_for_ten_nodes() {
        let p = make_quadratic(10, 2, 1.0, 0.0, 0);
        assert_eq!(p.smoothness(), 1.0);
        assert_abs_diff_eq!(p.strong_convexity(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(p.condition_number(), 100.0, epsilon = 1e-10);
    }

    #[test]
    fn minimizer_zeroes_the_average_gradient() {
        for seed in 0..5 {
            let p = make_quadratic(10, 7, 25.0, 0.0, seed);
            let xs = p.minimizer();
            assert!(p.grad(xs.as_slice()).norm() <= 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = make_quadratic(5, 4, 10.0, 0.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(finite_difference_error(&p, &x, 1e-5) <= 1e-5);
        }
    }

    #[test]
    fn heterogeneity_grows_with_varsigma() {
        let h: Vec<f64> = [0.0, 1.0, 10.0, 100.0]
            .iter()
            .map(|&v| {
                let p = make_quadratic(10, 5, v, 0.0, 42);
                heterogeneity(&p, p.minimizer().as_slice())
            })
            .collect();
        assert!(h.windows(2).all(|w| w[0] < w[1]), "{h:?}");
    }

    #[test]
    fn fingerprint_tracks_data_and_noise() {
        let a = make_quadratic(4, 3, 1.0, 1.0, 1);
        assert_eq!(a.fingerprint(), make_quadratic(4, 3, 1.0, 1.0, 1).fingerprint());
        assert_ne!(a.fingerprint(), make_quadratic(4, 3, 1.0, 1.0, 2).fingerprint());
        assert_ne!(a.fingerprint(), a.with_noise(0.0).fingerprint());
    }
}
