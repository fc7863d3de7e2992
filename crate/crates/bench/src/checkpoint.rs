//! JSON checkpoints. Floats are written in shortest round-trip form, so a
//! reloaded trainer continues bit-identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use scoregan_core::gan::Trainer;
use scoregan_core::nets::MlpNet;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::BenchError;

fn save<T: Serialize>(value: &T, path: &Path) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, value)?;
    out.flush()?;
    Ok(())
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, BenchError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Config, networks, generator, epoch counter, RNG states and tail sums.
pub fn save_trainer(trainer: &Trainer, path: &Path) -> Result<(), BenchError> {
    save(trainer, path)
}

pub fn load_trainer(path: &Path) -> Result<Trainer, BenchError> {
    load(path)
}

/// Layer shapes, activations, caps, and row-major weights and biases.
pub fn save_net(net: &MlpNet, path: &Path) -> Result<(), BenchError> {
    save(net, path)
}

/// Reloads a network, re-validating the layer chain.
pub fn load_net(path: &Path) -> Result<MlpNet, BenchError> {
    let net: MlpNet = load(path)?;
    Ok(MlpNet::new(net.layers().to_vec())?)
}
