use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Activation, Layer, MlpNet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BottomActivation {
    Sigmoid,
    Ramp,
}

/// Weight caps for the theoretical classes.
///
/// `kappa` bounds the l1 norm of the head weights. `inner` is the l1 bound on
/// the rows feeding the inner layers (`kappa2` for T4, `B` for the deep
/// class). ReLU bottom rows of T2 and T4 are additionally held to unit l2
/// norm.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintCaps {
    pub kappa: f64,
    pub inner: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DiscriminatorPreset {
    /// `sigmoid(sum_j w_j sigmoid(u_j'x))`.
    T1 { width: usize },
    /// `sigmoid(sum_j w_j relu(u_j'x))`.
    T2 { width: usize },
    /// T1 with a bias on every hidden unit.
    T3 { width: usize },
    /// ReLU bottom (no bias), a sigmoid layer of `sigmoid_width`, sigmoid head.
    T4 { relu_width: usize, sigmoid_width: usize },
    /// Bottom layer with bias, `depth - 1` bias-free ReLU layers, sigmoid head.
    Deep {
        depth: usize,
        width: usize,
        bottom: BottomActivation,
    },
    /// `p -> 2p -> floor(p/2) -> 1`: leaky ReLU, sigmoid, sigmoid head.
    Practical,
}

impl DiscriminatorPreset {
    pub fn build(&self, p: usize, caps: Option<ConstraintCaps>) -> Result<MlpNet> {
        if p == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidConfig(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        let kappa = caps.map(|c| c.kappa);
        let inner = caps.map(|c| c.inner);
        let unit = caps.map(|_| 1.0);
        let mut layers: Vec<Layer> = match *self {
            Self::T1 { width } | Self::T3 { width } => {
                positive("width", width)?;
                let bias = matches!(self, Self::T3 { .. });
                vec![
                    Layer::new(p, width, bias, Activation::Sigmoid),
                    Layer::new(width, 1, false, Activation::Sigmoid),
                ]
            }
            Self::T2 { width } => {
                positive("width", width)?;
                let mut bottom = Layer::new(p, width, false, Activation::Relu);
                bottom.row_l2_cap = unit;
                vec![bottom, Layer::new(width, 1, false, Activation::Sigmoid)]
            }
            Self::T4 {
                relu_width,
                sigmoid_width,
            } => {
                if relu_width < 2 {
                    return Err(Error::InvalidConfig("T4 needs at least two ReLU units".into()));
                }
                positive("sigmoid_width", sigmoid_width)?;
                let mut bottom = Layer::new(p, relu_width, false, Activation::Relu);
                bottom.row_l2_cap = unit;
                let mut mid = Layer::new(relu_width, sigmoid_width, false, Activation::Sigmoid);
                mid.row_l1_cap = inner;
                vec![bottom, mid, Layer::new(sigmoid_width, 1, false, Activation::Sigmoid)]
            }
            Self::Deep { depth, width, bottom } => {
                positive("depth", depth)?;
                positive("width", width)?;
                let act = match bottom {
                    BottomActivation::Sigmoid => Activation::Sigmoid,
                    BottomActivation::Ramp => Activation::Ramp,
                };
                let mut layers = vec![Layer::new(p, width, true, act)];
                for _ in 1..depth {
                    let mut l = Layer::new(width, width, false, Activation::Relu);
                    l.row_l1_cap = inner;
                    layers.push(l);
                }
                layers.push(Layer::new(width, 1, false, Activation::Sigmoid));
                layers
            }
            Self::Practical => {
                let mid = (p / 2).max(1);
                vec![
                    Layer::new(p, 2 * p, true, Activation::LeakyRelu),
                    Layer::new(2 * p, mid, true, Activation::Sigmoid),
                    Layer::new(mid, 1, true, Activation::Sigmoid),
                ]
            }
        };
        if let Some(head) = layers.last_mut() {
            if !matches!(self, Self::Practical) {
                head.row_l1_cap = kappa;
            }
        }
        MlpNet::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(net: &MlpNet) -> Vec<(usize, usize, bool, Activation)> {
        net.layers()
            .iter()
            .map(|l| (l.inputs(), l.outputs(), l.bias.is_some(), l.activation))
            .collect()
    }

    #[test]
    fn practical_widths() {
        use Activation::*;
        let net = DiscriminatorPreset::Practical.build(10, None).unwrap();
        assert_eq!(
            shape(&net),
            vec![(10, 20, true, LeakyRelu), (20, 5, true, Sigmoid), (5, 1, true, Sigmoid)]
        );
        let net = DiscriminatorPreset::Practical.build(1, None).unwrap();
        assert_eq!(net.layers()[1].outputs(), 1);
    }

    #[test]
    fn theory_classes() {
        use Activation::*;
        let caps = Some(ConstraintCaps { kappa: 0.3, inner: 2.0 });
        let t4 = DiscriminatorPreset::T4 { relu_width: 3, sigmoid_width: 2 }.build(4, caps).unwrap();
        assert_eq!(shape(&t4), vec![(4, 3, false, Relu), (3, 2, false, Sigmoid), (2, 1, false, Sigmoid)]);
        assert_eq!(t4.layers()[0].row_l2_cap, Some(1.0));
        assert_eq!(t4.layers()[1].row_l1_cap, Some(2.0));
        assert_eq!(t4.layers()[2].row_l1_cap, Some(0.3));
        let deep = DiscriminatorPreset::Deep { depth: 3, width: 4, bottom: BottomActivation::Ramp }
            .build(2, caps)
            .unwrap();
        assert_eq!(
            shape(&deep),
            vec![(2, 4, true, Ramp), (4, 4, false, Relu), (4, 4, false, Relu), (4, 1, false, Sigmoid)]
        );
        assert!(DiscriminatorPreset::T4 { relu_width: 1, sigmoid_width: 2 }.build(4, None).is_err());
        let t1 = DiscriminatorPreset::T1 { width: 3 }.build(2, None).unwrap();
        assert!(t1.layers().iter().all(|l| l.row_l1_cap.is_none() && l.bias.is_none()));
    }
}
