use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::net::{check_input, check_output, AtomMap, AtomNet, Dense};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Residual ReLU network without batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdNetConfig {
    pub dim_x: usize,
    pub dim_y: usize,
    pub n_atom: usize,
    pub n_neuron: usize,
    pub n_hidden: usize,
}

impl StdNetConfig {
    pub fn for_k(dim_x: usize, dim_y: usize, k: usize) -> Self {
        Self {
            dim_x,
            dim_y,
            n_atom: k,
            n_neuron: 2 * k,
            n_hidden: 5,
        }
    }

    pub fn n_out(&self) -> usize {
        self.n_atom * self.dim_y
    }
}

/// `h0 = relu(W x + b)`, `h <- h + relu(W h + b)`, `out = W h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct StdNet {
    cfg: StdNetConfig,
    layers: Vec<Dense>,
}

pub struct StdNetCache {
    xs: Array2<f64>,
    pre: Vec<Array2<f64>>,
    states: Vec<Array2<f64>>,
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

fn relu_mask(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl StdNet {
    pub fn new(cfg: StdNetConfig, rng: &mut Rng) -> Result<Self> {
        if cfg.dim_x == 0 || cfg.dim_y == 0 || cfg.n_atom == 0 || cfg.n_neuron == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        let n = cfg.n_neuron;
        let mut layers = vec![Dense::fan_in_uniform(n, cfg.dim_x, rng)];
        for _ in 0..cfg.n_hidden {
            layers.push(Dense::fan_in_uniform(n, n, rng));
        }
        layers.push(Dense::fan_in_uniform(cfg.n_out(), n, rng));
        Ok(Self { cfg, layers })
    }

    pub fn from_parts(cfg: StdNetConfig, layers: Vec<Dense>) -> Result<Self> {
        let n = cfg.n_neuron;
        let ok = layers.len() == cfg.n_hidden + 2
            && layers[0].w.dim() == (n, cfg.dim_x)
            && layers[1..=cfg.n_hidden].iter().all(|l| l.w.dim() == (n, n))
            && layers[cfg.n_hidden + 1].w.dim() == (cfg.n_out(), n)
            && layers.iter().all(|l| l.b.len() == l.w.nrows());
        if !ok {
            return Err(Error::invalid("layer shapes do not match the network configuration"));
        }
        Ok(Self { cfg, layers })
    }

    pub fn config(&self) -> &StdNetConfig {
        &self.cfg
    }
}

impl AtomMap for StdNet {
    fn dim_x(&self) -> usize {
        self.cfg.dim_x
    }

    fn dim_y(&self) -> usize {
        self.cfg.dim_y
    }

    fn n_atom(&self) -> usize {
        self.cfg.n_atom
    }

    fn atoms_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(xs)?.0)
    }
}

impl AtomNet for StdNet {
    type Cache = StdNetCache;

    fn forward(&self, xs: ArrayView2<f64>) -> Result<(Array2<f64>, StdNetCache)> {
        check_input(xs, self.cfg.dim_x)?;
        let nh = self.cfg.n_hidden;
        let z0 = self.layers[0].apply(xs);
        let mut h = z0.mapv(relu);
        let mut pre = vec![z0];
        let mut states = Vec::with_capacity(nh + 1);
        for layer in &self.layers[1..=nh] {
            let z = layer.apply(h.view());
            let next = &h + &z.mapv(relu);
            states.push(h);
            pre.push(z);
            h = next;
        }
        let out = self.layers[nh + 1].apply(h.view());
        states.push(h);
        check_output(&out, "stdnet forward")?;
        Ok((
            out,
            StdNetCache {
                xs: xs.to_owned(),
                pre,
                states,
            },
        ))
    }

    fn backward(&self, cache: &StdNetCache, grad_out: ArrayView2<f64>) -> Result<Vec<Dense>> {
        let nh = self.cfg.n_hidden;
        if grad_out.dim() != (cache.xs.nrows(), self.cfg.n_out()) {
            return Err(Error::invalid("output gradient shape does not match the forward batch"));
        }
        let mut grads = Vec::with_capacity(nh + 2);
        grads.push(Dense {
            w: grad_out.t().dot(&cache.states[nh]),
            b: grad_out.sum_axis(Axis(0)),
        });
        let mut dh = grad_out.dot(&self.layers[nh + 1].w);
        for l in (0..nh).rev() {
            let mut dz = dh.clone();
            Zip::from(&mut dz).and(&cache.pre[l + 1]).for_each(|g, &z| *g *= relu_mask(z));
            grads.push(Dense {
                w: dz.t().dot(&cache.states[l]),
                b: dz.sum_axis(Axis(0)),
            });
            dh = dh + dz.dot(&self.layers[l + 1].w);
        }
        let mut dz = dh;
        Zip::from(&mut dz).and(&cache.pre[0]).for_each(|g, &z| *g *= relu_mask(z));
        grads.push(Dense {
            w: dz.t().dot(&cache.xs),
            b: dz.sum_axis(Axis(0)),
        });
        grads.reverse();
        Ok(grads)
    }

    fn layers(&self) -> &[Dense] {
        &self.layers
    }

    fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    fn update_normalizers(&mut self) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;
    use rand::Rng as _;

    fn cfg() -> StdNetConfig {
        StdNetConfig {
            dim_x: 1,
            dim_y: 2,
            n_atom: 4,
            n_neuron: 6,
            n_hidden: 3,
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let a = StdNet::new(cfg(), &mut stream(0, 0)).unwrap();
        let b = StdNet::new(cfg(), &mut stream(0, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.atoms(&[0.5]).unwrap().dim(), (4, 2));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = StdNet::new(cfg(), &mut stream(1, 0)).unwrap();
        let mut rng = stream(1, 1);
        for l in net.layers_mut() {
            l.b.mapv_inplace(|_| rng.random_range(-0.3..0.3));
        }
        let xs = array![[0.2], [0.8], [0.45]];
        let probe = Array2::from_shape_fn((3, 8), |_| rng.random_range(-1.0..1.0));
        let (_, cache) = net.forward(xs.view()).unwrap();
        let grads = net.backward(&cache, probe.view()).unwrap();
        let objective = |n: &StdNet| (n.atoms_batch(xs.view()).unwrap() * &probe).sum();
        let step = 1e-6;
        let mut worst: f64 = 0.0;
        for li in 0..net.layers().len() {
            for i in 0..net.layers()[li].b.len() {
                let orig = net.layers()[li].b[i];
                net.layers_mut()[li].b[i] = orig + step;
                let up = objective(&net);
                net.layers_mut()[li].b[i] = orig - step;
                let down = objective(&net);
                net.layers_mut()[li].b[i] = orig;
                let fd = (up - down) / (2.0 * step);
                let an = grads[li].b[i];
                worst = worst.max((fd - an).abs() / (fd.abs() + an.abs()).max(1e-4));
            }
            for idx in 0..net.layers()[li].w.len() {
                let nc = net.layers()[li].w.ncols();
                let (r, c) = (idx / nc, idx % nc);
                let orig = net.layers()[li].w[[r, c]];
                net.layers_mut()[li].w[[r, c]] = orig + step;
                let up = objective(&net);
                net.layers_mut()[li].w[[r, c]] = orig - step;
                let down = objective(&net);
                net.layers_mut()[li].w[[r, c]] = orig;
                let fd = (up - down) / (2.0 * step);
                let an = grads[li].w[[r, c]];
                worst = worst.max((fd - an).abs() / (fd.abs() + an.abs()).max(1e-4));
            }
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }
}
