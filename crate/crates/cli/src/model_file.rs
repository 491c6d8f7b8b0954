//! `SKN1` network weights.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "SKN1" | version u32
//! input h,w,c u32 | labels u32 | blocks u32 | (c1, c2) u32 per block | leaky slope f32
//! sections u32 | (kind u8, offset u64, length u64) per section
//! per section: kind u8 | rank u32 | dims u32.. | bias len u32 | weights f32.. | bias f32..
//! CRC-64/XZ u64 of everything above
//! ```

use std::path::Path;

use skullnet::nn::{ConvLayer, DenseLayer};
use skullnet::{Architecture, ModelParams32, Tensor};

use crate::binio::{read_file, u32_of, write_file, Reader, Writer};
use crate::error::CliResult;

pub const MODEL_MAGIC: &[u8; 4] = b"SKN1";
pub const MODEL_VERSION: u32 = 1;

const KIND_CONV: u8 = 1;
const KIND_DENSE: u8 = 2;

pub fn encode_model(model: &ModelParams32) -> CliResult<Vec<u8>> {
    let arch = &model.arch;
    let mut w = Writer::new(MODEL_MAGIC, MODEL_VERSION);
    for &d in &arch.input {
        w.u32(u32_of(d, "input dimension")?);
    }
    w.u32(u32_of(arch.n_labels, "label count")?);
    w.u32(u32_of(arch.blocks.len(), "block count")?);
    for b in &arch.blocks {
        w.u32(u32_of(b[0], "channel count")?);
        w.u32(u32_of(b[1], "channel count")?);
    }
    w.f32(model.leaky_slope);

    let mut layers: Vec<(u8, &Tensor<f32>, &[f32])> = model
        .convs
        .iter()
        .map(|c| (KIND_CONV, &c.kernels, c.bias.as_slice()))
        .collect();
    layers.push((KIND_DENSE, &model.head.weights, model.head.bias.as_slice()));

    w.u32(u32_of(layers.len(), "section count")?);
    let table = w.len();
    for (kind, _, _) in &layers {
        w.u8(*kind);
        w.u64(0);
        w.u64(0);
    }
    for (i, (kind, weights, bias)) in layers.iter().enumerate() {
        let start = w.len();
        w.u8(*kind);
        w.u32(u32_of(weights.shape().len(), "rank")?);
        for &d in weights.shape() {
            w.u32(u32_of(d, "dimension")?);
        }
        w.u32(u32_of(bias.len(), "bias length")?);
        w.f32s(weights.data());
        w.f32s(bias);
        let entry = table + i * 17;
        w.patch_u64(entry + 1, start as u64);
        w.patch_u64(entry + 9, (w.len() - start) as u64);
    }
    Ok(w.finish())
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> CliResult<ModelParams32> {
    let mut r = Reader::open(path, bytes, MODEL_MAGIC, MODEL_VERSION)?;
    let input = [r.usize()?, r.usize()?, r.usize()?];
    let n_labels = r.usize()?;
    let n_blocks = r.usize()?;
    let blocks = (0..n_blocks)
        .map(|_| Ok([r.usize()?, r.usize()?]))
        .collect::<CliResult<Vec<_>>>()?;
    let leaky_slope = r.f32()?;
    let arch = Architecture {
        input,
        blocks,
        n_labels,
    };
    arch.validate().map_err(|e| r.fail(e.to_string()))?;

    let n_sections = r.usize()?;
    if n_sections != arch.conv_channels().len() + 1 {
        return Err(r.fail(format!("{n_sections} sections do not match the architecture")));
    }
    let table = (0..n_sections)
        .map(|_| Ok((r.u8()?, r.u64()?, r.u64()?)))
        .collect::<CliResult<Vec<_>>>()?;

    let mut convs = Vec::new();
    let mut head = None;
    for (i, &(kind, offset, length)) in table.iter().enumerate() {
        if r.pos() as u64 != offset {
            return Err(r.fail(format!("section {i} is not at its recorded offset")));
        }
        if r.u8()? != kind {
            return Err(r.fail(format!("section {i} kind disagrees with the table")));
        }
        let rank = r.usize()?;
        if rank > 8 {
            return Err(r.fail(format!("section {i} has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.usize()).collect::<CliResult<Vec<_>>>()?;
        let bias_len = r.usize()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| r.fail("shape overflows"))?;
        let weights = r.f32s(count)?;
        let bias = r.f32s(bias_len)?;
        if r.pos() as u64 - offset != length {
            return Err(r.fail(format!("section {i} length disagrees with the table")));
        }
        let weights = Tensor::from_vec(&shape, weights).map_err(|e| r.fail(e.to_string()))?;
        let last = i + 1 == n_sections;
        match (kind, last) {
            (KIND_CONV, false) => {
                convs.push(ConvLayer::from_parts(weights, bias).map_err(|e| r.fail(e.to_string()))?)
            }
            (KIND_DENSE, true) => {
                head = Some(DenseLayer::from_parts(weights, bias).map_err(|e| r.fail(e.to_string()))?)
            }
            _ => return Err(r.fail(format!("unexpected section kind {kind} at position {i}"))),
        }
    }
    r.expect_end()?;
    let head = head.ok_or_else(|| r.fail("missing dense head"))?;
    ModelParams32::from_parts(arch, convs, head, leaky_slope).map_err(|e| r.fail(e.to_string()))
}

pub fn save_model(path: &Path, model: &ModelParams32) -> CliResult<()> {
    write_file(path, &encode_model(model)?)
}

pub fn load_model(path: &Path) -> CliResult<ModelParams32> {
    decode_model(path, &read_file(path)?)
}
