use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::ArrayView2;
use rand::Rng as _;
use serde::Serialize;

use condist::data::{load_dataset, save_dataset, Dataset, DiscreteMeasure, EvalMeasure};
use condist::harness::{
    anns_benchmark, error_vs_x, estimate_at, fit_loglog_slope, mean_error_curve, projected_error_histogram,
    sup_w_bound, uniform_features, variance_check, w1_to_truth, write_csv, write_manifest, AnnSummaryRow, AtomRow,
    Cdf1d, CsvRow, DerivativeRow, EstimateRow, LossRow, PointEstimator, ProfileRow, Resolved, RunManifest, SampleRow,
    SchemeFamily,
};
use condist::neural::{
    avg_abs_derivative, empirical_lipschitz, fit, load_checkpoint, save_checkpoint, AdamState, AtomMap, Checkpoint,
    LipNet, Network, SearchBackend, StdNet, StdNetConfig, TrainConfig,
};
use condist::nns::RbspParams;
use condist::rng::{stream, RngPosition};
use condist::synthetic::sample_dataset;

use crate::config::{Arch, CliConfig, Search};

const ESTIMATE_TASK: u64 = 0xE571;
const PROJECT_TASK: u64 = 0x960;
const ANN_TASK: u64 = 0xA22;
const TRAIN_TASK: u64 = 0x7A1;
const LIPSCHITZ_TASK: u64 = 0x11B;

/// Output directory plus the files written so far.
struct Run<'a> {
    cfg: &'a CliConfig,
    command: &'static str,
    dir: PathBuf,
    outputs: Vec<String>,
    seeds: Vec<u64>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a CliConfig, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir)
            .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
        Ok(Self {
            cfg,
            command,
            dir: cfg.output_dir.clone(),
            outputs: Vec::new(),
            seeds: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn csv<R: CsvRow>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, rows).with_context(|| format!("writing {}", p.display()))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let p = self.path(name);
        let text = serde_json::to_string_pretty(value)? + "\n";
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    fn finish(self) -> Result<()> {
        let mut m = RunManifest::new(self.command, self.cfg, self.seeds)?;
        m.outputs = self.outputs;
        let p = self.dir.join(format!("{}.manifest.json", self.command));
        write_manifest(&p, &m).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {}", p.display());
        Ok(())
    }
}

fn dataset(cfg: &CliConfig) -> Result<Dataset> {
    let kernel = cfg.kernel.spec();
    let data = match &cfg.data.path {
        Some(p) => load_dataset(p).with_context(|| format!("loading dataset {}", p.display()))?,
        None => sample_dataset(&kernel, cfg.data.m, cfg.data.seed)?,
    };
    if data.dim_x() != kernel.dim_x() || data.dim_y() != kernel.dim_y() {
        bail!(
            "dataset dimensions ({}, {}) do not match kernel {} ({}, {})",
            data.dim_x(),
            data.dim_y(),
            kernel.name(),
            kernel.dim_x(),
            kernel.dim_y()
        );
    }
    Ok(data)
}

fn unit_grid(n: usize) -> Result<Vec<f64>> {
    Ok(EvalMeasure::grid(1, n)?.points().column(0).to_vec())
}

fn load_network(path: &Path) -> Result<Network> {
    Ok(load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?.net)
}

pub fn gen(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "gen")?;
    let data = sample_dataset(&cfg.kernel.spec(), cfg.data.m, cfg.data.seed)?;
    run.seeds.push(cfg.data.seed);
    let p = run.path("dataset.bin");
    save_dataset(&data, &p)?;
    if data.dim_x() == 1 && data.dim_y() == 1 {
        let rows: Vec<SampleRow> = (0..data.len())
            .map(|m| SampleRow {
                x: data.x(m)[0],
                y: data.y(m)[0],
            })
            .collect();
        run.csv("samples.csv", &rows)?;
    }
    run.finish()
}

#[derive(Serialize)]
struct EstimateJson {
    x: Vec<f64>,
    scheme: &'static str,
    param: f64,
    /// Set when no sample fell in the box and the Lebesgue measure is used.
    lebesgue_fallback: bool,
    atoms: Vec<Vec<f64>>,
}

pub fn estimate(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "estimate")?;
    let data = dataset(cfg)?;
    let e = &cfg.estimate;
    if e.x.len() != data.dim_x() {
        bail!("query has {} coordinates, the data has d_X = {}", e.x.len(), data.dim_x());
    }
    let scheme = e.scheme.resolve(data.len(), data.dim_x(), data.dim_y())?;
    run.seeds.extend([cfg.data.seed, e.seed]);
    let measure = estimate_at(&data, &e.x, &scheme, &mut stream(e.seed, ESTIMATE_TASK))?;
    let atoms: Vec<Vec<f64>> = match &measure {
        DiscreteMeasure::Atoms(p) => p.rows().into_iter().map(|r| r.to_vec()).collect(),
        DiscreteMeasure::LebesgueBox { .. } => Vec::new(),
    };
    let rows: Vec<EstimateRow> = atoms
        .iter()
        .enumerate()
        .flat_map(|(atom, a)| a.iter().enumerate().map(move |(coord, &value)| EstimateRow { atom, coord, value }))
        .collect();
    run.csv("estimate.csv", &rows)?;
    run.json(
        "estimate.json",
        &EstimateJson {
            x: e.x.clone(),
            scheme: e.scheme.name(),
            param: scheme.param(),
            lebesgue_fallback: atoms.is_empty(),
            atoms,
        },
    )?;
    run.finish()
}

pub fn rates(cfg: &CliConfig) -> Result<()> {
    let exp = cfg.rates_experiment();
    exp.validate()?;
    let mut run = Run::new(cfg, "rates")?;
    run.seeds = exp.seeds.clone();
    let kernel = exp.kernel.spec();
    let eval = exp.eval.measure(kernel.dim_x())?;
    let rows = mean_error_curve(&kernel, &exp.scheme, &exp.ms, &eval, &exp.seeds)?;
    run.csv("rates.csv", &rows)?;
    let distinct = {
        let mut ms = exp.ms.clone();
        ms.sort_unstable();
        ms.dedup();
        ms.len()
    };
    if distinct >= 3 {
        let fit = fit_loglog_slope(&rows)?;
        println!("{} slope {:.4} r2 {:.4}", exp.scheme.name(), fit.slope, fit.r2);
        run.json("fit.json", &fit)?;
    }
    run.finish()
}

pub fn variance(cfg: &CliConfig) -> Result<()> {
    let exp = cfg.variance_experiment();
    exp.validate()?;
    let mut run = Run::new(cfg, "variance")?;
    run.seeds = exp.seeds.clone();
    let kernel = exp.kernel.spec();
    let eval = exp.eval.measure(kernel.dim_x())?;
    let row = variance_check(&kernel, &exp.scheme, exp.ms[0], &exp.seeds, &eval, exp.density)?;
    println!("{} variance {:.3e} bound {:.3e}", row.scheme, row.variance, row.bound);
    run.csv("variance.csv", &[row])?;
    run.finish()
}

pub fn error_vs_x_cmd(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "error-vs-x")?;
    let p = &cfg.profile;
    let kernel = cfg.kernel.spec();
    let data = dataset(cfg)?;
    run.seeds.extend([cfg.data.seed, p.seed]);
    let net = match &p.checkpoint {
        Some(path) if p.estimators.iter().any(|e| e == "net") => Some(load_network(path)?),
        _ => None,
    };
    let mut ests: Vec<(&str, PointEstimator)> = Vec::new();
    for name in &p.estimators {
        let est = match name.as_str() {
            "truth" => PointEstimator::Truth,
            "knn" => PointEstimator::Knn { data: &data, k: p.k },
            "rbox" => {
                let family = SchemeFamily::RBox { r: p.r, scale: 1.0 };
                match family.resolve(data.len(), data.dim_x(), data.dim_y())? {
                    Resolved::RBox(scheme) => PointEstimator::RBox { data: &data, scheme },
                    Resolved::Knn(_) => unreachable!("r-box family resolves to an r-box scheme"),
                }
            }
            "net" => match &net {
                Some(n) => PointEstimator::Net(n),
                None => bail!("estimator `net` needs profile.checkpoint"),
            },
            other => bail!("unknown estimator `{other}` (expected truth, knn, rbox or net)"),
        };
        ests.push((name.as_str(), est));
    }
    let rows = error_vs_x(&kernel, &ests, &unit_grid(p.grid_points)?, p.seed)?;
    run.csv("error_vs_x.csv", &rows)?;
    run.finish()
}

pub fn project_hist(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "project-hist")?;
    let p = &cfg.project;
    let kernel = cfg.kernel.spec();
    let data = sample_dataset(&kernel, p.m, p.data_seed)?;
    run.seeds.extend([p.data_seed, p.seed]);
    let ests = [("knn", PointEstimator::Knn { data: &data, k: p.k })];
    let out = projected_error_histogram(&kernel, &ests, p.n_queries, p.histogram, &mut stream(p.seed, PROJECT_TASK))?;
    run.csv("projected_errors.csv", &out.errors)?;
    run.csv("histogram.csv", &out.histogram)?;
    run.finish()
}

pub fn ann_bench(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "ann-bench")?;
    let a = &cfg.ann;
    run.seeds.push(a.seed);
    let data = uniform_features(a.m, a.dim, a.seed)?;
    let params = RbspParams {
        depth: a.depth,
        ..RbspParams::for_k(a.k)
    };
    let bench = anns_benchmark(&data, &params, a.k, a.runs, &mut stream(a.seed, ANN_TASK))?;
    let summary = AnnSummaryRow::new(&data, &params, a.k, a.seed, &bench)?;
    println!("delta mean {:.3e} p95 {:.3e}", summary.delta_mean, summary.delta_p95);
    run.csv("delta.csv", &bench.runs)?;
    run.csv("ann_bench.csv", &[summary])?;
    run.finish()
}

fn train_config(cfg: &CliConfig) -> TrainConfig {
    let t = &cfg.train;
    let base = TrainConfig::reference(t.k, t.n_batch);
    let mut tc = if t.scale_schedule {
        base.scaled_to(t.epochs)
    } else {
        TrainConfig { epochs: t.epochs, ..base }
    };
    tc.lr = t.lr;
    tc.l_scale = t.l_scale;
    tc.tau = t.tau;
    tc.n_neuron = t.n_neuron.unwrap_or(2 * t.k);
    tc.n_hidden = t.n_hidden;
    tc.seed = t.seed;
    tc.search = match t.search {
        Search::Rbsp => SearchBackend::Rbsp(RbspParams::for_k(t.k)),
        Search::Exact => SearchBackend::Exact,
    };
    tc
}

pub fn train(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "train")?;
    let t = &cfg.train;
    let data = dataset(cfg)?;
    let tc = train_config(cfg);
    tc.validate()?;
    run.seeds.extend([cfg.data.seed, t.seed]);
    let (mut net, mut adam, start, mut rng) = match &t.resume {
        Some(path) => {
            let ck = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            (ck.net, ck.adam, ck.epochs_done as usize, ck.rng.restore())
        }
        None => {
            let mut rng = stream(t.seed, TRAIN_TASK);
            let net = match t.arch {
                Arch::Lipnet => Network::Lip(LipNet::new(tc.net_config(data.dim_x(), data.dim_y()), &mut rng)?),
                Arch::Stdnet => {
                    let sc = StdNetConfig {
                        dim_x: data.dim_x(),
                        dim_y: data.dim_y(),
                        n_atom: tc.k,
                        n_neuron: tc.n_neuron,
                        n_hidden: tc.n_hidden,
                    };
                    Network::Std(StdNet::new(sc, &mut rng)?)
                }
            };
            let adam = AdamState::new(net.layers());
            (net, adam, 0, rng)
        }
    };
    if start > tc.epochs {
        bail!("checkpoint already has {start} epochs, more than the requested {}", tc.epochs);
    }
    let epochs = start + 1..tc.epochs + 1;
    let trace = match &mut net {
        Network::Lip(n) => fit(n, &mut adam, &data, &tc, epochs, &mut rng)?,
        Network::Std(n) => fit(n, &mut adam, &data, &tc, epochs, &mut rng)?,
    };
    let rows: Vec<LossRow> = trace
        .iter()
        .enumerate()
        .map(|(i, &loss)| LossRow { epoch: start + i + 1, loss })
        .collect();
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        println!("epochs {}..={} loss {first:.4} -> {last:.4}", start + 1, tc.epochs);
    }
    run.csv("loss.csv", &rows)?;
    let ck = Checkpoint {
        net,
        epochs_done: tc.epochs as u64,
        adam,
        rng: RngPosition::capture(&rng),
    };
    let p = run.path("model.ckpt");
    save_checkpoint(&ck, &p)?;
    run.finish()
}

#[derive(Serialize)]
struct EvalSummary {
    epochs_done: u64,
    mean_w: f64,
    max_w: f64,
    empirical_lipschitz: f64,
    /// Worst-case bound from the mean error; absent when the kernel has no
    /// known Lipschitz constant.
    sup_w_bound: Option<f64>,
}

pub fn eval(cfg: &CliConfig) -> Result<()> {
    let mut run = Run::new(cfg, "eval")?;
    let e = &cfg.eval;
    let kernel = cfg.kernel.spec();
    if kernel.dim_x() != 1 || kernel.dim_y() != 1 {
        bail!("eval needs a kernel with one-dimensional features and targets");
    }
    let ck = load_checkpoint(&e.checkpoint).with_context(|| format!("loading checkpoint {}", e.checkpoint.display()))?;
    let net = &ck.net;
    if net.dim_x() != 1 || net.dim_y() != 1 {
        bail!("checkpoint does not map one-dimensional features to one-dimensional targets");
    }
    run.seeds.push(e.seed);
    let grid = unit_grid(e.grid_points)?;
    let table = net.atoms_batch(ArrayView2::from_shape((grid.len(), 1), &grid)?)?;
    let mut errors = Vec::with_capacity(grid.len());
    let mut atoms = Vec::with_capacity(table.len());
    for (&x, row) in grid.iter().zip(table.rows()) {
        let measure = DiscreteMeasure::atoms(row.to_owned().into_shape_with_order((row.len(), 1))?)?;
        errors.push(w1_to_truth(&kernel, x, &Cdf1d::from_measure(&measure)?)?);
        atoms.extend(row.iter().enumerate().map(|(atom, &value)| AtomRow { x, atom, coord: 0, value }));
    }
    let deriv: Vec<DerivativeRow> = grid
        .iter()
        .zip(avg_abs_derivative(net, &grid)?)
        .map(|(&x, d)| DerivativeRow { x, avg_abs_derivative: d })
        .collect();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = grid.windows(2).map(|w| (vec![w[0]], vec![w[1]])).collect();
    let mut rng = stream(e.seed, LIPSCHITZ_TASK);
    pairs.extend((0..e.lipschitz_pairs).map(|_| (vec![rng.random::<f64>()], vec![rng.random::<f64>()])));
    let l_net = empirical_lipschitz(net, &pairs)?;
    let mean_w = errors.iter().sum::<f64>() / errors.len() as f64;
    let max_w = errors.iter().copied().fold(0.0, f64::max);
    let bound = kernel.lipschitz_constant().map(|l| sup_w_bound(mean_w, l, l_net, 1)).transpose()?;
    let profile: Vec<_> = grid
        .iter()
        .zip(&errors)
        .map(|(&x, &w)| ProfileRow {
            x,
            estimator: "net".into(),
            w,
        })
        .collect();
    println!("mean W {mean_w:.4e} max W {max_w:.4e} lipschitz {l_net:.4}");
    run.csv("error_vs_x.csv", &profile)?;
    run.csv("atoms.csv", &atoms)?;
    run.csv("derivative.csv", &deriv)?;
    run.json(
        "eval.json",
        &EvalSummary {
            epochs_done: ck.epochs_done,
            mean_w,
            max_w,
            empirical_lipschitz: l_net,
            sup_w_bound: bound,
        },
    )?;
    run.finish()
}

pub fn show_config(cfg: &CliConfig) -> Result<()> {
    print!("{}", toml::to_string_pretty(cfg)?);
    Ok(())
}
