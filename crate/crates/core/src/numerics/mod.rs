//! Dense linear algebra, activations and the deterministic RNG.

mod activation;
mod matrix;
mod rng;

use std::fmt;
use std::str::FromStr;

pub use activation::{
    relu, scaled_tanh, scaled_tanh_grad_from_output, scaled_tanh_scalar, sigmoid, sigmoid_scalar,
    softmax, softmax_in_place, SCALED_TANH_AMPLITUDE, SCALED_TANH_GAIN,
};
pub use matrix::{matvec, DenseMatrix, DenseVector};
pub(crate) use matrix::axpy;
pub use rng::Rng;

use crate::error::{Error, Result};

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitScheme {
    Zeros,
    /// Uniform on `[-a, a]`.
    Uniform(f64),
    /// Uniform on `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
    #[default]
    Xavier,
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
}

impl FromStr for InitScheme {
    type Err = Error;

    /// Accepts `zeros`, `xavier`, `uniform:<a>` and `normal:<std>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let parse_arg = |a: Option<&str>| -> Result<f64> {
            a.and_then(|a| a.parse::<f64>().ok())
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| Error::UnknownScheme(s.to_owned()))
        };
        match (name, arg) {
            ("zeros", None) => Ok(InitScheme::Zeros),
            ("xavier", None) => Ok(InitScheme::Xavier),
            ("uniform", a) => Ok(InitScheme::Uniform(parse_arg(a)?)),
            ("normal", a) => Ok(InitScheme::Normal(parse_arg(a)?)),
            _ => Err(Error::UnknownScheme(s.to_owned())),
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitScheme::Zeros => write!(f, "zeros"),
            InitScheme::Xavier => write!(f, "xavier"),
            InitScheme::Uniform(a) => write!(f, "uniform:{a}"),
            InitScheme::Normal(s) => write!(f, "normal:{s}"),
        }
    }
}

pub fn init_matrix(rows: usize, cols: usize, scheme: InitScheme, rng: &mut Rng) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidConfig(format!(
            "matrix dims must be positive, got {rows}x{cols}"
        )));
    }
    let mut m = DenseMatrix::zeros(rows, cols);
    fill(m.as_mut_slice(), rows + cols, scheme, rng);
    Ok(m)
}

/// Fill a buffer according to `scheme`; `fan_sum` is `fan_in + fan_out`.
pub(crate) fn fill(buf: &mut [f64], fan_sum: usize, scheme: InitScheme, rng: &mut Rng) {
    match scheme {
        InitScheme::Zeros => buf.fill(0.0),
        InitScheme::Uniform(a) => buf.iter_mut().for_each(|x| *x = rng.uniform(-a, a)),
        InitScheme::Xavier => {
            let a = (6.0 / fan_sum as f64).sqrt();
            buf.iter_mut().for_each(|x| *x = rng.uniform(-a, a));
        }
        InitScheme::Normal(s) => buf.iter_mut().for_each(|x| *x = s * rng.normal()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::Rng;
    use proptest::prelude::*;

    #[test]
    fn zeros_scheme() {
        let m = init_matrix(3, 4, InitScheme::Zeros, &mut Rng::new(1)).unwrap();
        assert!(m.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = init_matrix(5, 7, InitScheme::Xavier, &mut Rng::new(99)).unwrap();
        let b = init_matrix(5, 7, InitScheme::Xavier, &mut Rng::new(99)).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(a.as_slice().iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn uniform_mean_within_three_sigma() {
        // Var of U(-a, a) is a²/3, so the sample mean has σ = a / sqrt(3n).
        let a = 0.7;
        let n = 1_000_000;
        let m = init_matrix(1000, 1000, InitScheme::Uniform(a), &mut Rng::new(2024)).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / n as f64;
        let sigma = a / (3.0 * n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
        assert!(m.as_slice().iter().all(|x| x.abs() <= a));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("zeros".parse::<InitScheme>().unwrap(), InitScheme::Zeros);
        assert_eq!("xavier".parse::<InitScheme>().unwrap(), InitScheme::Xavier);
        assert_eq!(
            "uniform:0.08".parse::<InitScheme>().unwrap(),
            InitScheme::Uniform(0.08)
        );
        assert!(matches!(
            "glorot".parse::<InitScheme>(),
            Err(Error::UnknownScheme(_))
        ));
        assert!("uniform".parse::<InitScheme>().is_err());
        assert!(init_matrix(0, 3, InitScheme::Zeros, &mut Rng::new(0)).is_err());
    }

    proptest! {
        #[test]
        fn matvec_is_linear(
            seed in any::<u64>(),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let mut rng = Rng::new(seed);
            let m = init_matrix(4, 6, InitScheme::Uniform(3.0), &mut rng).unwrap();
            let u: DenseVector = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let v: DenseVector = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let lhs = matvec(&m, &u.linear_combination(a, &v, b).unwrap()).unwrap();
            let rhs = matvec(&m, &u).unwrap()
                .linear_combination(a, &matvec(&m, &v).unwrap(), b)
                .unwrap();
            for (x, y) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
