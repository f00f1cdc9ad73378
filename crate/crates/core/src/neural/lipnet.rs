use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::net::{check_input, check_output, AtomMap, AtomNet, Dense};
use super::power::{power_iter_update, PowerIterState, RowNormState, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Power iterations run at initialization with zero momentum.
pub const WARMUP_POWER_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipNetConfig {
    pub dim_x: usize,
    pub dim_y: usize,
    pub n_atom: usize,
    pub n_neuron: usize,
    pub n_hidden: usize,
    /// Output scale `L`.
    pub l_scale: f64,
    pub tau: f64,
}

impl LipNetConfig {
    /// Defaults tied to the neighbor count: `n_atom = k`, width `2k`,
    /// five hidden layers, `L = 0.1`, `tau = DEFAULT_TAU`.
    pub fn for_k(dim_x: usize, dim_y: usize, k: usize) -> Self {
        Self {
            dim_x,
            dim_y,
            n_atom: k,
            n_neuron: 2 * k,
            n_hidden: 5,
            l_scale: 0.1,
            tau: DEFAULT_TAU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_x == 0 || self.dim_y == 0 || self.n_atom == 0 || self.n_neuron == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        if !(self.l_scale > 0.0 && self.l_scale.is_finite()) {
            return Err(Error::invalid(format!("L = {} must be positive", self.l_scale)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid(format!("tau = {} must lie in [0, 1]", self.tau)));
        }
        Ok(())
    }

    pub fn n_out(&self) -> usize {
        self.n_atom * self.dim_y
    }
}

/// Input layer, convex potential hidden layers and row-normalized output.
///
/// * input: `N^{-1} diag(min(1, 1/r)) ELU(W x + b)`
/// * hidden: `x - h W^T ELU(W x + b)` with `h` from power iteration
/// * output: `L d_Y^{-1} diag(min(1, 1/r)) (W x + b)`
///
/// `r` are momentum-tracked row ℓ1 norms.
#[derive(Debug, Clone, PartialEq)]
pub struct LipNet {
    cfg: LipNetConfig,
    layers: Vec<Dense>,
    input_norms: RowNormState,
    power: Vec<PowerIterState>,
    output_norms: RowNormState,
}

pub struct LipNetCache {
    xs: Array2<f64>,
    z_in: Array2<f64>,
    hidden_in: Vec<Array2<f64>>,
    hidden_z: Vec<Array2<f64>>,
    last: Array2<f64>,
}

pub(crate) fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

pub(crate) fn elu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

impl LipNet {
    pub fn new(cfg: LipNetConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_neuron;
        let mut layers = vec![Dense::fan_in_uniform(n, cfg.dim_x, rng)];
        for _ in 0..cfg.n_hidden {
            layers.push(Dense::fan_in_uniform(n, n, rng));
        }
        layers.push(Dense::output_init(cfg.n_out(), n, rng));
        let mut power = Vec::with_capacity(cfg.n_hidden);
        for layer in &layers[1..=cfg.n_hidden] {
            let u0 = Array1::from_shape_fn(n, |_| StandardNormal.sample(rng));
            power.push(PowerIterState::warm_start(layer.w.view(), u0, WARMUP_POWER_ITERS, cfg.tau)?);
        }
        Ok(Self {
            input_norms: RowNormState::exact(layers[0].w.view(), cfg.tau),
            output_norms: RowNormState::exact(layers[cfg.n_hidden + 1].w.view(), cfg.tau),
            cfg,
            layers,
            power,
        })
    }

    /// Assemble a network from explicit parts.
    pub fn from_parts(
        cfg: LipNetConfig,
        layers: Vec<Dense>,
        input_norms: RowNormState,
        power: Vec<PowerIterState>,
        output_norms: RowNormState,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_neuron;
        let shapes_ok = layers.len() == cfg.n_hidden + 2
            && power.len() == cfg.n_hidden
            && layers[0].w.dim() == (n, cfg.dim_x)
            && layers[1..=cfg.n_hidden].iter().all(|l| l.w.dim() == (n, n))
            && layers[cfg.n_hidden + 1].w.dim() == (cfg.n_out(), n)
            && layers.iter().all(|l| l.b.len() == l.w.nrows())
            && power.iter().all(|p| p.u.len() == n)
            && input_norms.values.len() == n
            && output_norms.values.len() == cfg.n_out();
        if !shapes_ok {
            return Err(Error::invalid("layer shapes do not match the network configuration"));
        }
        let positive = input_norms.values.iter().chain(output_norms.values.iter()).all(|v| *v > 0.0)
            && power.iter().all(|p| p.h > 0.0);
        if !positive {
            return Err(Error::invalid("normalizer states must be strictly positive"));
        }
        Ok(Self {
            cfg,
            layers,
            input_norms,
            power,
            output_norms,
        })
    }

    pub fn config(&self) -> &LipNetConfig {
        &self.cfg
    }

    pub fn input_norms(&self) -> &RowNormState {
        &self.input_norms
    }

    pub fn output_norms(&self) -> &RowNormState {
        &self.output_norms
    }

    pub fn power_states(&self) -> &[PowerIterState] {
        &self.power
    }

    pub fn power_states_mut(&mut self) -> &mut [PowerIterState] {
        &mut self.power
    }

    /// Change the output scale without touching any other state.
    pub fn set_l_scale(&mut self, l: f64) -> Result<()> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("L = {l} must be positive")));
        }
        self.cfg.l_scale = l;
        Ok(())
    }

    fn input_scale(&self) -> Array1<f64> {
        self.input_norms.scale() / self.cfg.n_neuron as f64
    }

    fn output_scale(&self) -> Array1<f64> {
        self.output_norms.scale() * (self.cfg.l_scale / self.cfg.dim_y as f64)
    }

    /// One convex potential layer applied to the rows of `x`.
    pub fn hidden_layer(layer: &Dense, h: f64, x: ArrayView2<f64>) -> Array2<f64> {
        let act = layer.apply(x).mapv(elu);
        &x - &(act.dot(&layer.w) * h)
    }
}

impl AtomMap for LipNet {
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

impl AtomNet for LipNet {
    type Cache = LipNetCache;

    fn forward(&self, xs: ArrayView2<f64>) -> Result<(Array2<f64>, LipNetCache)> {
        check_input(xs, self.cfg.dim_x)?;
        let nh = self.cfg.n_hidden;
        let z_in = self.layers[0].apply(xs);
        let mut h = z_in.mapv(elu) * &self.input_scale();
        let mut hidden_in = Vec::with_capacity(nh);
        let mut hidden_z = Vec::with_capacity(nh);
        for (layer, p) in self.layers[1..=nh].iter().zip(&self.power) {
            let z = layer.apply(h.view());
            let next = &h - &(z.mapv(elu).dot(&layer.w) * p.h);
            hidden_in.push(h);
            hidden_z.push(z);
            h = next;
        }
        let out = self.layers[nh + 1].apply(h.view()) * &self.output_scale();
        check_output(&out, "lipnet forward")?;
        Ok((
            out,
            LipNetCache {
                xs: xs.to_owned(),
                z_in,
                hidden_in,
                hidden_z,
                last: h,
            },
        ))
    }

    fn backward(&self, cache: &LipNetCache, grad_out: ArrayView2<f64>) -> Result<Vec<Dense>> {
        let nh = self.cfg.n_hidden;
        if grad_out.dim() != (cache.xs.nrows(), self.cfg.n_out()) {
            return Err(Error::invalid(format!(
                "output gradient has shape {:?}, expected ({}, {})",
                grad_out.dim(),
                cache.xs.nrows(),
                self.cfg.n_out()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(nh + 2);

        let dz = &grad_out * &self.output_scale();
        let out_layer = &self.layers[nh + 1];
        grads.push(Dense {
            w: dz.t().dot(&cache.last),
            b: dz.sum_axis(Axis(0)),
        });
        let mut dh = dz.dot(&out_layer.w);

        for l in (0..nh).rev() {
            let layer = &self.layers[l + 1];
            let hcoef = self.power[l].h;
            let z = &cache.hidden_z[l];
            let act = z.mapv(elu);
            // h' = h - c act(z) W,  z = h W^T + b
            let mut gw = act.t().dot(&dh) * (-hcoef);
            let mut dz = dh.dot(&layer.w.t()) * (-hcoef);
            Zip::from(&mut dz).and(z).for_each(|g, &zv| *g *= elu_grad(zv));
            gw += &dz.t().dot(&cache.hidden_in[l]);
            grads.push(Dense {
                w: gw,
                b: dz.sum_axis(Axis(0)),
            });
            dh = dh + dz.dot(&layer.w);
        }

        let mut dz = dh * &self.input_scale();
        Zip::from(&mut dz).and(&cache.z_in).for_each(|g, &zv| *g *= elu_grad(zv));
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
        let nh = self.cfg.n_hidden;
        self.input_norms.update(self.layers[0].w.view())?;
        for (layer, p) in self.layers[1..=nh].iter().zip(self.power.iter_mut()) {
            power_iter_update(layer.w.view(), p)?;
        }
        self.output_norms.update(self.layers[nh + 1].w.view())
    }
}
