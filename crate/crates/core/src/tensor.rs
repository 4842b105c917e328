//! Dense row-major f64 tensors and the JSON tensor manifest used for model
//! weights.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TENSOR_FORMAT: &str = "seqnav-tensors/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::contract(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    /// Gaussian entries with the given standard deviation.
    pub fn random(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| normal.sample(rng)).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn expect_shape(&self, name: &str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::contract(format!("{name}: expected shape {shape:?}, got {:?}", self.shape)));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of a 3-d element `(c, y, x)`.
    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.shape[1] + y) * self.shape[2] + x]
    }
}

/// `y = W x + b` for `W` of shape `[out, in]`.
pub fn matvec(w: &Tensor, b: Option<&Tensor>, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (w.shape[0], w.shape[1]);
    debug_assert_eq!(cols, x.len());
    (0..rows)
        .map(|r| {
            let row = &w.data[r * cols..(r + 1) * cols];
            let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            dot + b.map_or(0.0, |b| b.data[r])
        })
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    format: String,
    tensors: Vec<ManifestEntry>,
}

/// Named tensors, serialized as a JSON manifest of name, shape and
/// row-major values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorManifest {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::contract(format!("missing tensor `{name}`")))
    }

    /// Removes and returns a tensor, checking its shape.
    pub fn take(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let t = self.tensors.remove(name).ok_or_else(|| Error::contract(format!("missing tensor `{name}`")))?;
        t.expect_shape(name, shape)?;
        Ok(t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ManifestDoc {
            format: TENSOR_FORMAT.into(),
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| ManifestEntry { name: k.clone(), shape: t.shape.clone(), values: t.data.clone() })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ManifestDoc = serde_json::from_str(text)?;
        if doc.format != TENSOR_FORMAT {
            return Err(Error::Format { found: doc.format, expected: TENSOR_FORMAT.into() });
        }
        let mut m = TensorManifest::new();
        for e in doc.tensors {
            let t = Tensor::new(e.shape, e.values).map_err(|err| Error::contract(format!("{}: {err}", e.name)))?;
            m.insert(e.name, t);
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut m = TensorManifest::new();
        m.insert("a", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 0.1]).unwrap());
        m.insert("b", Tensor::zeros(&[3]));
        let back = TensorManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_shape_is_rejected() {
        let text = r#"{"format":"seqnav-tensors/1","tensors":[{"name":"w","shape":[2,2],"values":[1,2,3]}]}"#;
        assert!(TensorManifest::from_json(text).is_err());
        let mut m = TensorManifest::new();
        m.insert("w", Tensor::zeros(&[2]));
        assert!(m.take("w", &[3]).is_err());
    }

    #[test]
    fn softmax_is_a_simplex() {
        let p = softmax(&[1000.0, 0.0, -3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.999);
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn matvec_with_bias() {
        let w = Tensor::new(vec![2, 3], vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0]).unwrap();
        let b = Tensor::new(vec![2], vec![0.5, 0.0]).unwrap();
        assert_eq!(matvec(&w, Some(&b), &[1.0, 2.0, 3.0]), vec![7.5, -1.0]);
    }
}
