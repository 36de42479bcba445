use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::params::{kaiming_uniform, ParamStore};
use crate::tensor::Tensor;

/// `y = x W + b` with `W: [in, out]` and `b: [out]` stored under
/// `{prefix}.weight` / `{prefix}.bias`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub prefix: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn register(
        store: &mut ParamStore,
        prefix: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layer = Self {
            prefix: prefix.into(),
            in_dim,
            out_dim,
        };
        store.insert(
            layer.weight_path(),
            kaiming_uniform(&[in_dim, out_dim], in_dim, rng),
        )?;
        store.insert(layer.bias_path(), Tensor::zeros(&[out_dim]))?;
        Ok(layer)
    }

    pub fn weight_path(&self) -> String {
        format!("{}.weight", self.prefix)
    }

    pub fn bias_path(&self) -> String {
        format!("{}.bias", self.prefix)
    }

    pub fn forward(&self, graph: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = graph.param(store, &self.weight_path())?;
        let b = graph.param(store, &self.bias_path())?;
        let h = graph.matmul(x, w)?;
        graph.add_bias(h, b)
    }
}

/// Feed-forward stack with ReLU between layers. The last layer emits raw
/// logits unless `activate_output` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ffnn {
    pub layers: Vec<Linear>,
    pub activate_output: bool,
}

impl Ffnn {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        widths: &[usize],
        activate_output: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = in_dim;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Linear::register(store, format!("{prefix}.{i}"), fan_in, w, rng)?);
            fan_in = w;
        }
        Ok(Self {
            layers,
            activate_output,
        })
    }

    pub fn out_dim(&self, in_dim: usize) -> usize {
        self.layers.last().map_or(in_dim, |l| l.out_dim)
    }

    pub fn forward(&self, graph: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(graph, store, h)?;
            if i + 1 < n || self.activate_output {
                h = graph.relu(h);
            }
        }
        Ok(h)
    }

    pub fn param_paths(&self) -> Vec<String> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight_path(), l.bias_path()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn widths_chain() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Ffnn::register(&mut store, "head", 20, &[1024, 512, 3], false, &mut rng).unwrap();
        let shapes: Vec<Vec<usize>> = net
            .param_paths()
            .iter()
            .map(|p| store.value(p).unwrap().shape().to_vec())
            .collect();
        assert_eq!(
            shapes,
            vec![vec![20, 1024], vec![1024], vec![1024, 512], vec![512], vec![512, 3], vec![3]]
        );

        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[5, 20]));
        let y = net.forward(&mut g, &store, x).unwrap();
        assert_eq!(g.value(y).shape(), &[5, 3]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let build = |seed| {
            let mut store = ParamStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Linear::register(&mut store, "l", 24, 4, &mut rng).unwrap();
            store
        };
        assert_eq!(build(3), build(3));
        assert_ne!(build(3), build(4));
        let s = build(3);
        let bound = (6.0f64 / 24.0).sqrt();
        assert!(s.value("l.weight").unwrap().data().iter().all(|w| w.abs() <= bound));
        assert!(s.value("l.bias").unwrap().data().iter().all(|&b| b == 0.0));
    }
}
