use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::lipnet::{LipNet, LipNetConfig};
use super::net::AtomNet;
use super::power::DEFAULT_TAU;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nns::{exact_knn, knn_among, part_queries, rbsp_partition, Norm, RbspParams};
use crate::ot::{atom_gradient, l1_cost_matrix, sinkhorn_plan, sparsify_plan, SinkhornConfig};
use crate::rng::Rng;

/// Piecewise-constant value over 1-based epochs.
///
/// `initial` holds up to the first change; a change `(e, v)` applies to
/// every epoch strictly after `e`. Changes must be strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    pub initial: T,
    #[serde(default)]
    pub changes: Vec<(usize, T)>,
}

impl<T: Copy> Schedule<T> {
    pub fn constant(v: T) -> Self {
        Self {
            initial: v,
            changes: Vec::new(),
        }
    }

    pub fn at(&self, epoch: usize) -> T {
        self.changes
            .iter()
            .rev()
            .find(|(after, _)| epoch > *after)
            .map_or(self.initial, |(_, v)| *v)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.changes.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(format!("{what} schedule breakpoints must increase")));
        }
        Ok(())
    }

    /// Breakpoints mapped to `round(e * num / den)`; of breakpoints that
    /// collide, the later one wins.
    fn rescaled(&self, num: usize, den: usize) -> Self {
        let mut changes: Vec<(usize, T)> = Vec::with_capacity(self.changes.len());
        for &(e, v) in &self.changes {
            let e = ((e * num) as f64 / den as f64).round() as usize;
            match changes.last_mut() {
                Some(last) if last.0 == e => last.1 = v,
                _ => changes.push((e, v)),
            }
        }
        Self {
            initial: self.initial,
            changes,
        }
    }
}

/// Where the training loop gets its query points and neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchBackend {
    /// Fresh partition every epoch, `queries_per_part` queries per part,
    /// neighbors searched inside the generating part.
    Rbsp(RbspParams),
    /// `n_batch` uniform queries answered by exact search.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub n_batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub epsilon: Schedule<f64>,
    pub sinkhorn_iters: Schedule<usize>,
    /// Sparsified plans are used for epochs strictly after this one.
    pub sparsify_after: usize,
    pub gamma: f64,
    pub search: SearchBackend,
    pub seed: u64,
    pub n_neuron: usize,
    pub n_hidden: usize,
    pub l_scale: f64,
    pub tau: f64,
}

/// Epoch count the reference schedule breakpoints are stated for.
pub const REFERENCE_EPOCHS: usize = 5000;

impl TrainConfig {
    /// Reference configuration for neighbor count `k`: 5000 epochs, Adam at
    /// 1e-3, epsilon 1 / 0.1 / 0.05 switching after epochs 100 and 500,
    /// 5 then 10 Sinkhorn iterations, sparsity with gamma 0.5 after 500,
    /// RBSP with 2^5 parts and 8 queries per part.
    pub fn reference(k: usize, n_batch: usize) -> Self {
        Self {
            k,
            n_batch,
            lr: 1e-3,
            epochs: REFERENCE_EPOCHS,
            epsilon: Schedule {
                initial: 1.0,
                changes: vec![(100, 0.1), (500, 0.05)],
            },
            sinkhorn_iters: Schedule {
                initial: 5,
                changes: vec![(500, 10)],
            },
            sparsify_after: 500,
            gamma: 0.5,
            search: SearchBackend::Rbsp(RbspParams::for_k(k)),
            seed: 0,
            n_neuron: 2 * k,
            n_hidden: 5,
            l_scale: 0.1,
            tau: DEFAULT_TAU,
        }
    }

    /// Same schedules with every breakpoint scaled by `epochs / self.epochs`.
    pub fn scaled_to(&self, epochs: usize) -> Self {
        let (num, den) = (epochs, self.epochs.max(1));
        Self {
            epochs,
            epsilon: self.epsilon.rescaled(num, den),
            sinkhorn_iters: self.sinkhorn_iters.rescaled(num, den),
            sparsify_after: ((self.sparsify_after * num) as f64 / den as f64).round() as usize,
            ..self.clone()
        }
    }

    pub fn net_config(&self, dim_x: usize, dim_y: usize) -> LipNetConfig {
        LipNetConfig {
            dim_x,
            dim_y,
            n_atom: self.k,
            n_neuron: self.n_neuron,
            n_hidden: self.n_hidden,
            l_scale: self.l_scale,
            tau: self.tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_batch == 0 || self.epochs == 0 {
            return Err(Error::invalid("k, batch size and epochs must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma = {} must lie in [0, 1]", self.gamma)));
        }
        self.epsilon.validate("epsilon")?;
        self.sinkhorn_iters.validate("Sinkhorn iteration")?;
        if let SearchBackend::Rbsp(p) = &self.search {
            p.validate()?;
            if p.min_part < self.k {
                return Err(Error::invalid(format!(
                    "RBSP parts of {} members cannot serve k = {}",
                    p.min_part, self.k
                )));
            }
        }
        Ok(())
    }

    pub fn sinkhorn_at(&self, epoch: usize) -> SinkhornConfig {
        SinkhornConfig {
            epsilon: self.epsilon.at(epoch),
            n_iter: self.sinkhorn_iters.at(epoch),
            normalize: true,
        }
    }
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NumericFailure { component, detail, step } => Error::NumericFailure {
            component: format!("training/{component}"),
            step: epoch,
            detail: format!("{detail} (inner step {step})"),
        },
        other => other,
    }
}

/// Query points and neighbor index sets for one epoch.
pub fn epoch_batch(data: &Dataset, cfg: &TrainConfig, rng: &mut Rng) -> Result<(Array2<f64>, Vec<Vec<usize>>)> {
    let dim = data.dim_x();
    let (queries, neighbors) = match &cfg.search {
        SearchBackend::Rbsp(params) => {
            let parts = rbsp_partition(data, params, rng)?;
            let qs = part_queries(&parts, params.queries_per_part, rng);
            let mut nb = Vec::with_capacity(qs.len());
            for (i, q) in qs.iter().enumerate() {
                let part = &parts[i / params.queries_per_part];
                nb.push(knn_among(data, &part.members, q, cfg.k, Norm::Sup, rng)?);
            }
            (qs, nb)
        }
        SearchBackend::Exact => {
            let mut qs = Vec::with_capacity(cfg.n_batch);
            let mut nb = Vec::with_capacity(cfg.n_batch);
            for _ in 0..cfg.n_batch {
                let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                nb.push(exact_knn(data, &q, cfg.k, rng)?);
                qs.push(q);
            }
            (qs, nb)
        }
    };
    let flat: Vec<f64> = queries.into_iter().flatten().collect();
    let n = flat.len() / dim;
    Ok((Array2::from_shape_vec((n, dim), flat).expect("query rows have the feature dimension"), neighbors))
}

/// Batch loss and output gradient for atoms `out` against neighbor targets.
pub fn batch_objective(
    data: &Dataset,
    neighbors: &[Vec<usize>],
    out: ArrayView2<f64>,
    n_atom: usize,
    sinkhorn: &SinkhornConfig,
    sparsify: Option<f64>,
) -> Result<(f64, Array2<f64>)> {
    let dy = data.dim_y();
    let mut grad = Array2::zeros(out.raw_dim());
    let mut total = 0.0;
    for (b, idx) in neighbors.iter().enumerate() {
        let targets = data.ys().select(ndarray::Axis(0), idx);
        let atoms = out
            .row(b)
            .to_owned()
            .into_shape_with_order((n_atom, dy))
            .map_err(|e| Error::invalid(e.to_string()))?;
        let cost = l1_cost_matrix(targets.view(), atoms.view())?;
        let sol = sinkhorn_plan(&cost, sinkhorn)?;
        total += sol.cost;
        let plan = match sparsify {
            Some(gamma) => sparsify_plan(&sol.plan, gamma)?,
            None => sol.plan,
        };
        let g = atom_gradient(&plan, targets.view(), atoms.view())?;
        grad.row_mut(b).assign(&ndarray::Array1::from_iter(g.iter().copied()));
    }
    Ok((total / neighbors.len() as f64, grad))
}

/// Run the epochs in `epochs` (1-based, half open) on an existing network
/// and optimizer. Returns the mean batch loss per epoch.
pub fn fit<N: AtomNet>(
    net: &mut N,
    adam: &mut AdamState,
    data: &Dataset,
    cfg: &TrainConfig,
    epochs: Range<usize>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if net.dim_x() != data.dim_x() || net.dim_y() != data.dim_y() || net.n_atom() != cfg.k {
        return Err(Error::invalid("network shape does not match data and k"));
    }
    let mut trace = Vec::with_capacity(epochs.len());
    for epoch in epochs {
        let mut step = || -> Result<f64> {
            let (xs, neighbors) = epoch_batch(data, cfg, rng)?;
            let (out, cache) = net.forward(xs.view())?;
            let sparsify = (epoch > cfg.sparsify_after).then_some(cfg.gamma);
            let (loss, g) = batch_objective(data, &neighbors, out.view(), cfg.k, &cfg.sinkhorn_at(epoch), sparsify)?;
            let grads = net.backward(&cache, g.view())?;
            adam_step(net.layers_mut(), &grads, adam, cfg.lr)?;
            if !net.layers().iter().all(|l| l.is_finite()) {
                return Err(Error::numeric("adam", 0, "non-finite parameters"));
            }
            net.update_normalizers()?;
            Ok(loss)
        };
        let loss = step().map_err(|e| at_epoch(e, epoch))?;
        if !loss.is_finite() {
            return Err(Error::numeric("training/loss", epoch, "non-finite batch loss"));
        }
        trace.push(loss);
    }
    Ok(trace)
}

/// Fresh LipNet trained for `cfg.epochs` epochs.
pub fn train(data: &Dataset, cfg: &TrainConfig, rng: &mut Rng) -> Result<(LipNet, Vec<f64>)> {
    cfg.validate()?;
    let mut net = LipNet::new(cfg.net_config(data.dim_x(), data.dim_y()), rng)?;
    let mut adam = AdamState::new(net.layers());
    let trace = fit(&mut net, &mut adam, data, cfg, 1..cfg.epochs + 1, rng)?;
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::synthetic::{sample_dataset, KernelSpec};

    #[test]
    fn reference_schedule_values() {
        let c = TrainConfig::reference(100, 100);
        assert_eq!(c.epsilon.at(1), 1.0);
        assert_eq!(c.epsilon.at(100), 1.0);
        assert_eq!(c.epsilon.at(101), 0.1);
        assert_eq!(c.epsilon.at(500), 0.1);
        assert_eq!(c.epsilon.at(501), 0.05);
        assert_eq!(c.sinkhorn_iters.at(500), 5);
        assert_eq!(c.sinkhorn_iters.at(501), 10);
        assert_eq!(c.sparsify_after, 500);
        assert_eq!(c.gamma, 0.5);
        assert_eq!(c.n_neuron, 200);
    }

    #[test]
    fn scaled_schedule() {
        let c = TrainConfig::reference(100, 100).scaled_to(1500);
        assert_eq!(c.epsilon.changes, vec![(30, 0.1), (150, 0.05)]);
        assert_eq!(c.sinkhorn_iters.changes, vec![(150, 10)]);
        assert_eq!(c.sparsify_after, 150);
    }

    #[test]
    fn rejects_parts_smaller_than_k() {
        let mut c = TrainConfig::reference(100, 100);
        c.search = SearchBackend::Rbsp(RbspParams::default());
        assert!(c.validate().is_err());
    }

    fn smoke_cfg() -> TrainConfig {
        let mut c = TrainConfig::reference(32, 16);
        c.epochs = 3;
        c.n_neuron = 16;
        c.n_hidden = 2;
        c
    }

    #[test]
    fn one_epoch_smoke() {
        let data = sample_dataset(&KernelSpec::Model1, 1000, 0).unwrap();
        let mut c = smoke_cfg();
        c.epochs = 1;
        let (net, trace) = train(&data, &c, &mut stream(1, 0)).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(trace[0].is_finite());
        assert!(net.layers().iter().all(|l| l.is_finite()));
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let data = sample_dataset(&KernelSpec::Model1, 1000, 0).unwrap();
        let mut c = smoke_cfg();
        c.search = SearchBackend::Exact;
        let a = train(&data, &c, &mut stream(2, 0)).unwrap();
        let b = train(&data, &c, &mut stream(2, 0)).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn resumed_run_matches_single_run() {
        let data = sample_dataset(&KernelSpec::Model1, 1000, 3).unwrap();
        let c = smoke_cfg();
        let (_, full) = train(&data, &c, &mut stream(3, 0)).unwrap();
        let mut rng = stream(3, 0);
        let mut net = LipNet::new(c.net_config(1, 1), &mut rng).unwrap();
        let mut adam = AdamState::new(net.layers());
        let mut trace = fit(&mut net, &mut adam, &data, &c, 1..2, &mut rng).unwrap();
        trace.extend(fit(&mut net, &mut adam, &data, &c, 2..4, &mut rng).unwrap());
        assert_eq!(trace, full);
    }
}
