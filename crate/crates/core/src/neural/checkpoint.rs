//! Versioned binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "CDSTCKPT" | version u32 | kind u8 (0 LipNet, 1 StdNet)
//! d_X u32 | d_Y u32 | n_atom u32 | n_neuron u32 | n_hidden u32
//! [LipNet] L f64 | tau f64
//! epochs_done u64
//! layers: W row-major then b, input -> hidden -> output
//! [LipNet] input row norms | per hidden layer: h f64, u | output row norms
//! Adam: t u64 | first moments | second moments (layer blocks as above)
//! RNG: key [u8; 32] | stream u64 | word position u128
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::adam::AdamState;
use super::lipnet::{LipNet, LipNetConfig};
use super::net::{AtomMap, AtomNet, Dense};
use super::power::{PowerIterState, RowNormState};
use super::stdnet::{StdNet, StdNetConfig};
use crate::binio::{expect_eof, read_array, read_block, read_exact, read_f64, read_u32, read_u64, read_vec, write_f64s};
use crate::error::{Error, Result};
use crate::rng::RngPosition;

const MAGIC: &[u8; 8] = b"CDSTCKPT";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// A trained network of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Lip(LipNet),
    Std(StdNet),
}

impl Network {
    pub fn layers(&self) -> &[Dense] {
        match self {
            Network::Lip(n) => n.layers(),
            Network::Std(n) => n.layers(),
        }
    }
}

impl AtomMap for Network {
    fn dim_x(&self) -> usize {
        match self {
            Network::Lip(n) => n.dim_x(),
            Network::Std(n) => n.dim_x(),
        }
    }

    fn dim_y(&self) -> usize {
        match self {
            Network::Lip(n) => n.dim_y(),
            Network::Std(n) => n.dim_y(),
        }
    }

    fn n_atom(&self) -> usize {
        match self {
            Network::Lip(n) => n.n_atom(),
            Network::Std(n) => n.n_atom(),
        }
    }

    fn atoms_batch(&self, xs: ndarray::ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Network::Lip(n) => n.atoms_batch(xs),
            Network::Std(n) => n.atoms_batch(xs),
        }
    }
}

/// Everything needed to resume or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: Network,
    pub epochs_done: u64,
    pub adam: AdamState,
    pub rng: RngPosition,
}

fn write_layers(w: &mut impl Write, layers: &[Dense]) -> Result<()> {
    for l in layers {
        write_f64s(w, l.w.iter())?;
        write_f64s(w, l.b.iter())?;
    }
    Ok(())
}

fn read_layers(r: &mut impl Read, shapes: &[(usize, usize)], what: &str) -> Result<Vec<Dense>> {
    shapes
        .iter()
        .map(|&(o, i)| {
            Ok(Dense {
                w: read_block(r, o, i, what)?,
                b: read_vec(r, o, what)?,
            })
        })
        .collect()
}

fn shapes(dim_x: usize, n_neuron: usize, n_hidden: usize, n_out: usize) -> Vec<(usize, usize)> {
    let mut s = vec![(n_neuron, dim_x)];
    s.extend(std::iter::repeat_n((n_neuron, n_neuron), n_hidden));
    s.push((n_out, n_neuron));
    s
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_FORMAT_VERSION.to_le_bytes())?;
    let (kind, dims) = match &ck.net {
        Network::Lip(n) => {
            let c = n.config();
            (0u8, [c.dim_x, c.dim_y, c.n_atom, c.n_neuron, c.n_hidden])
        }
        Network::Std(n) => {
            let c = n.config();
            (1u8, [c.dim_x, c.dim_y, c.n_atom, c.n_neuron, c.n_hidden])
        }
    };
    w.write_all(&[kind])?;
    for d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    if let Network::Lip(n) = &ck.net {
        w.write_all(&n.config().l_scale.to_le_bytes())?;
        w.write_all(&n.config().tau.to_le_bytes())?;
    }
    w.write_all(&ck.epochs_done.to_le_bytes())?;
    write_layers(&mut w, ck.net.layers())?;
    if let Network::Lip(n) = &ck.net {
        write_f64s(&mut w, n.input_norms().values.iter())?;
        for p in n.power_states() {
            w.write_all(&p.h.to_le_bytes())?;
            write_f64s(&mut w, p.u.iter())?;
        }
        write_f64s(&mut w, n.output_norms().values.iter())?;
    }
    w.write_all(&ck.adam.t.to_le_bytes())?;
    write_layers(&mut w, &ck.adam.m)?;
    write_layers(&mut w, &ck.adam.v)?;
    w.write_all(&ck.rng.seed)?;
    w.write_all(&ck.rng.stream.to_le_bytes())?;
    w.write_all(&ck.rng.word_pos.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic: not a checkpoint file"));
    }
    let version = read_u32(&mut r, "version")?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::format(format!(
            "version mismatch: expected {CHECKPOINT_FORMAT_VERSION}, found {version}"
        )));
    }
    let [kind] = read_array::<1>(&mut r, "network kind")?;
    let mut dims = [0usize; 5];
    for d in dims.iter_mut() {
        *d = read_u32(&mut r, "dimensions")? as usize;
    }
    let [dim_x, dim_y, n_atom, n_neuron, n_hidden] = dims;
    if dim_x == 0 || dim_y == 0 || n_atom == 0 || n_neuron == 0 {
        return Err(Error::format(format!("bad network shape {dims:?}")));
    }
    let n_out = n_atom * dim_y;
    let shapes = shapes(dim_x, n_neuron, n_hidden, n_out);
    let bad = |e: Error| Error::format(format!("invalid contents: {e}"));
    let (net, epochs_done) = match kind {
        0 => {
            let l_scale = read_f64(&mut r, "L")?;
            let tau = read_f64(&mut r, "tau")?;
            let epochs = read_u64(&mut r, "epoch count")?;
            let layers = read_layers(&mut r, &shapes, "parameters")?;
            let input_norms = RowNormState {
                values: read_vec(&mut r, n_neuron, "input row norms")?,
                tau,
            };
            let mut power = Vec::with_capacity(n_hidden);
            for _ in 0..n_hidden {
                let h = read_f64(&mut r, "power iteration state")?;
                let u = read_vec(&mut r, n_neuron, "power iteration state")?;
                power.push(PowerIterState { h, u, tau });
            }
            let output_norms = RowNormState {
                values: read_vec(&mut r, n_out, "output row norms")?,
                tau,
            };
            let cfg = LipNetConfig {
                dim_x,
                dim_y,
                n_atom,
                n_neuron,
                n_hidden,
                l_scale,
                tau,
            };
            let net = LipNet::from_parts(cfg, layers, input_norms, power, output_norms).map_err(bad)?;
            (Network::Lip(net), epochs)
        }
        1 => {
            let epochs = read_u64(&mut r, "epoch count")?;
            let layers = read_layers(&mut r, &shapes, "parameters")?;
            let cfg = StdNetConfig {
                dim_x,
                dim_y,
                n_atom,
                n_neuron,
                n_hidden,
            };
            (Network::Std(StdNet::from_parts(cfg, layers).map_err(bad)?), epochs)
        }
        other => return Err(Error::format(format!("unknown network kind {other}"))),
    };
    let mut adam = AdamState::new(net.layers());
    adam.t = read_u64(&mut r, "optimizer step")?;
    adam.m = read_layers(&mut r, &shapes, "optimizer moments")?;
    adam.v = read_layers(&mut r, &shapes, "optimizer moments")?;
    let seed = read_array::<32>(&mut r, "rng key")?;
    let stream = read_u64(&mut r, "rng stream")?;
    let word_pos = u128::from_le_bytes(read_array(&mut r, "rng position")?);
    expect_eof(&mut r, "rng position")?;
    Ok(Checkpoint {
        net,
        epochs_done,
        adam,
        rng: RngPosition { seed, stream, word_pos },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng as _;

    fn lip() -> Checkpoint {
        let cfg = LipNetConfig {
            dim_x: 1,
            dim_y: 2,
            n_atom: 3,
            n_neuron: 4,
            n_hidden: 2,
            l_scale: 0.1,
            tau: 1e-3,
        };
        let mut rng = stream(0, 0);
        let net = LipNet::new(cfg, &mut rng).unwrap();
        let mut adam = AdamState::new(net.layers());
        adam.t = 7;
        adam.m[1].w[[0, 0]] = 0.25;
        let _: u64 = rng.random();
        Checkpoint {
            net: Network::Lip(net),
            epochs_done: 7,
            adam,
            rng: RngPosition::capture(&rng),
        }
    }

    #[test]
    fn lipnet_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let ck = lip();
        save_checkpoint(&ck, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }

    #[test]
    fn stdnet_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ckpt");
        let cfg = StdNetConfig::for_k(2, 1, 3);
        let net = StdNet::new(cfg, &mut stream(1, 0)).unwrap();
        let ck = Checkpoint {
            adam: AdamState::new(net.layers()),
            net: Network::Std(net),
            epochs_done: 0,
            rng: RngPosition::capture(&stream(1, 1)),
        };
        save_checkpoint(&ck, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }

    #[test]
    fn rejects_truncation_version_and_trailing_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        save_checkpoint(&lip(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path).unwrap_err().to_string().contains("truncated"));

        let mut v2 = bytes.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        std::fs::write(&path, &v2).unwrap();
        assert!(load_checkpoint(&path).unwrap_err().to_string().contains("expected 1, found 2"));

        let mut extra = bytes.clone();
        extra.push(0);
        std::fs::write(&path, &extra).unwrap();
        assert!(load_checkpoint(&path).unwrap_err().to_string().contains("trailing"));

        std::fs::write(&path, b"CDSTDATA").unwrap();
        assert!(load_checkpoint(&path).unwrap_err().to_string().contains("magic"));
    }
}
