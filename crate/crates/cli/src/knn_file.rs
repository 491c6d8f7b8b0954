//! `SKK1` fitted ML-KNN models.
//!
//! ```text
//! "SKK1" | version u32
//! k u32 | smoothing f64 | normalize u8 | dim u32 | rows u32 | labels u32
//! features f32 (rows × dim) | labels u8 (rows × labels)
//! prior1 f64 | prior0 f64 (per label)
//! posterior1 f64 | posterior0 f64 (per label, k + 1 each)
//! CRC-64/XZ u64
//! ```

use std::path::Path;

use skullnet::data::LabelMatrix;
use skullnet::{MlknnConfig, MlknnModel32};

use crate::binio::{read_file, u32_of, write_file, Reader, Writer};
use crate::error::CliResult;

pub const KNN_MAGIC: &[u8; 4] = b"SKK1";
pub const KNN_VERSION: u32 = 1;

pub fn encode_knn(model: &MlknnModel32) -> CliResult<Vec<u8>> {
    let mut w = Writer::new(KNN_MAGIC, KNN_VERSION);
    w.u32(u32_of(model.config.k, "k")?);
    w.f64(model.config.smoothing);
    w.u8(model.config.normalize as u8);
    w.u32(u32_of(model.dim, "feature dimension")?);
    w.u32(u32_of(model.n_train(), "training rows")?);
    w.u32(u32_of(model.n_labels(), "label count")?);
    w.f32s(&model.features);
    w.bytes(model.labels.as_flat());
    w.f64s(&model.prior1);
    w.f64s(&model.prior0);
    for table in model.posterior1.iter().chain(&model.posterior0) {
        w.f64s(table);
    }
    Ok(w.finish())
}

pub fn decode_knn(path: &Path, bytes: &[u8]) -> CliResult<MlknnModel32> {
    let mut r = Reader::open(path, bytes, KNN_MAGIC, KNN_VERSION)?;
    let k = r.usize()?;
    let smoothing = r.f64()?;
    let normalize = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(r.fail(format!("normalize flag {v}"))),
    };
    let dim = r.usize()?;
    let m = r.usize()?;
    let n_labels = r.usize()?;
    let count = m.checked_mul(dim).ok_or_else(|| r.fail("feature block overflows"))?;
    let features = r.f32s(count)?;
    let flat = r
        .bytes(m.checked_mul(n_labels).ok_or_else(|| r.fail("label block overflows"))?)?
        .to_vec();
    let labels = if m == 0 {
        LabelMatrix::empty(n_labels)
    } else {
        LabelMatrix::from_flat(n_labels, flat).map_err(|e| r.fail(e.to_string()))?
    };
    let prior1 = r.f64s(n_labels)?;
    let prior0 = r.f64s(n_labels)?;
    let width = k.checked_add(1).ok_or_else(|| r.fail("k overflows"))?;
    let mut tables = (0..2 * n_labels)
        .map(|_| r.f64s(width))
        .collect::<CliResult<Vec<_>>>()?;
    r.expect_end()?;
    let posterior0 = tables.split_off(n_labels);
    let model = MlknnModel32 {
        config: MlknnConfig {
            k,
            smoothing,
            normalize,
        },
        dim,
        features,
        labels,
        prior1,
        prior0,
        posterior1: tables,
        posterior0,
    };
    model.validate().map_err(|e| r.fail(e.to_string()))?;
    Ok(model)
}

pub fn save_knn(path: &Path, model: &MlknnModel32) -> CliResult<()> {
    write_file(path, &encode_knn(model)?)
}

pub fn load_knn(path: &Path) -> CliResult<MlknnModel32> {
    decode_knn(path, &read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use skullnet::{fit_mlknn, Rng};

    fn fitted(normalize: bool) -> MlknnModel32 {
        let mut rng = Rng::new(4);
        let features: Vec<f32> = (0..40 * 5).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
        let labels = LabelMatrix::from_flat(3, (0..120).map(|_| rng.bernoulli(0.4) as u8).collect()).unwrap();
        let config = MlknnConfig { k: 3, smoothing: 1.0, normalize };
        fit_mlknn(&features, 5, &labels, config).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for normalize in [false, true] {
            let m = fitted(normalize);
            let bytes = encode_knn(&m).unwrap();
            let back = decode_knn(Path::new("k"), &bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_knn(&back).unwrap(), bytes);
            assert_eq!(back.config.k, 3);
        }
    }

    #[test]
    fn corruption_and_bad_tables_are_rejected() {
        let m = fitted(false);
        let bytes = encode_knn(&m).unwrap();
        let mut b = bytes.clone();
        b[20] ^= 1;
        assert!(decode_knn(Path::new("k"), &b).is_err());

        // a well-formed file whose tables break the model invariants
        let mut bad = m.clone();
        bad.prior1[0] = 0.9;
        let bytes = encode_knn(&bad).unwrap();
        assert!(decode_knn(Path::new("k"), &bytes).is_err());
    }
}
