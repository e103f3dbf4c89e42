use std::path::Path;
use std::sync::Arc;

use crate::container::{Decoder, Encoder, RecordType};
use crate::error::{FormatError, Result};
use crate::mesh::{BoundaryFunction, Grid};

use super::{Provenance, SpectralDataset, TraceScheme};

pub(crate) fn encode_grid(enc: &mut Encoder, grid: &Grid) {
    enc.u32(grid.dim() as u32);
    for l in grid.extent() {
        enc.f64(*l);
    }
    for m in grid.res() {
        enc.u32(*m as u32);
    }
}

pub(crate) fn decode_grid(dec: &mut Decoder) -> std::result::Result<Arc<Grid>, FormatError> {
    let dim = dec.u32()? as usize;
    if !(1..=crate::mesh::MAX_DIM).contains(&dim) {
        return Err(FormatError::GridMetadata(format!("dimension {dim}")));
    }
    let extent = (0..dim).map(|_| dec.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    let res = (0..dim)
        .map(|_| dec.u32().map(|m| m as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Grid::new(dim, &extent, &res)
        .map(Arc::new)
        .map_err(|e| FormatError::GridMetadata(e.to_string()))
}

pub fn encode_dataset(ds: &SpectralDataset) -> Vec<u8> {
    let mut enc = Encoder::new(RecordType::Dataset);
    encode_grid(&mut enc, ds.grid());
    enc.u32(ds.len() as u32);
    enc.u8(ds.scheme().tag());
    enc.u8(ds.provenance.tag());
    for (l, t) in ds.eigenvalues().iter().zip(ds.traces()) {
        enc.f64(*l);
        for v in t.values() {
            enc.c64(*v);
        }
    }
    enc.finish()
}

/// Decodes a dataset; the result is tagged as loaded.
pub fn decode_dataset(bytes: &[u8]) -> Result<SpectralDataset> {
    let mut dec = Decoder::open(bytes, RecordType::Dataset)?;
    let grid = decode_grid(&mut dec)?;
    let k = dec.u32()? as usize;
    if k == 0 || k > grid.len() {
        return Err(FormatError::GridMetadata(format!(
            "pair count {k} outside 1..={}",
            grid.len()
        ))
        .into());
    }
    let scheme_tag = dec.u8()?;
    let scheme = TraceScheme::from_tag(scheme_tag).ok_or(FormatError::UnknownTag {
        what: "trace scheme",
        tag: scheme_tag,
    })?;
    let prov_tag = dec.u8()?;
    Provenance::from_tag(prov_tag).ok_or(FormatError::UnknownTag {
        what: "provenance",
        tag: prov_tag,
    })?;
    let faces = grid.num_faces();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut traces = Vec::with_capacity(k);
    for _ in 0..k {
        eigenvalues.push(dec.f64()?);
        let values = (0..faces).map(|_| dec.c64()).collect::<std::result::Result<Vec<_>, _>>()?;
        traces.push(BoundaryFunction::new(grid.clone(), values)?);
    }
    dec.finish()?;
    SpectralDataset::new(grid, eigenvalues, traces, scheme, Provenance::Loaded)
}

pub fn save_dataset(ds: &SpectralDataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<SpectralDataset> {
    decode_dataset(&std::fs::read(path)?)
}
