use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::tensor::{sigmoid, Scalar, Tensor};

/// Elementwise feature map applied to queries and keys before the dot
/// product.
///
/// `Relu`, `Exponential` and `Sigmoid` are non-negative; `Identity` leaves
/// projections untouched and is only meant for ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Relu,
    /// Inputs are expected in `[-20, 20]`; outside that range the weights of
    /// a row can overflow or underflow.
    Exponential,
    Sigmoid,
    Identity,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::Relu,
        KernelKind::Exponential,
        KernelKind::Sigmoid,
        KernelKind::Identity,
    ];

    pub fn is_non_negative(self) -> bool {
        !matches!(self, KernelKind::Identity)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Relu => "relu",
            KernelKind::Exponential => "exp",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::Identity => "identity",
        }
    }

    #[inline]
    pub fn apply_scalar<T: Scalar>(self, x: T) -> T {
        match self {
            KernelKind::Relu => x.max(T::zero()),
            KernelKind::Exponential => x.exp(),
            KernelKind::Sigmoid => sigmoid(x),
            KernelKind::Identity => x,
        }
    }

    /// dψ/dx. The ReLU derivative at exactly 0 is taken to be 0.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            KernelKind::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            KernelKind::Exponential => x.exp(),
            KernelKind::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
            KernelKind::Identity => T::one(),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "relu" => Ok(KernelKind::Relu),
            "exp" | "exponential" => Ok(KernelKind::Exponential),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            "identity" => Ok(KernelKind::Identity),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Applies `kernel` elementwise.
pub fn apply_kernel<T: Scalar>(x: &Tensor<T>, kernel: KernelKind) -> Tensor<T> {
    x.map(|v| kernel.apply_scalar(v))
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let x = Tensor::from_rows(&[[-1.0, 0.0, 2.0]]);
        assert_eq!(apply_kernel(&x, KernelKind::Relu).as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(KernelKind::Sigmoid.apply_scalar(0.0), 0.5);
        let e = apply_kernel(&Tensor::from_rows(&[[0.0_f64, 1.0]]), KernelKind::Exponential);
        assert_eq!(e[(0, 0)], 1.0);
        assert!((e[(0, 1)] - 2.71828).abs() < 1e-5);
        assert_eq!(apply_kernel(&x, KernelKind::Identity), x);
    }

    #[test]
    fn feature_kernels_are_non_negative() {
        for k in KernelKind::ALL.into_iter().filter(|k| k.is_non_negative()) {
            for i in -200..=200 {
                let v = i as f64 * 0.1;
                assert!(k.apply_scalar(v) >= 0.0, "{k} at {v}");
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for k in KernelKind::ALL {
            for x in [-2.5_f64, -0.3, 0.4, 1.7] {
                let fd = (k.apply_scalar(x + h) - k.apply_scalar(x - h)) / (2.0 * h);
                assert!((fd - k.derivative(x)).abs() < 1e-8, "{k} at {x}");
            }
        }
        assert_eq!(KernelKind::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn parse_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.name().parse::<KernelKind>().unwrap(), k);
        }
        assert!("tanh".parse::<KernelKind>().is_err());
    }
}
