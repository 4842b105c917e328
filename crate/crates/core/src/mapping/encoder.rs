use rand_chacha::ChaCha8Rng;
use rand::Rng;

use super::{EgoCrop, CROP_SIZE};
use crate::error::{Error, Result};
use crate::tensor::{seeded_rng, sigmoid, Tensor, TensorManifest};
use crate::world::SEMANTIC_CLASSES;

const KERNEL: usize = 7;
const PAD: i64 = 3;
pub const STEM_CHANNELS: usize = 8;
pub const ENCODER_BLOCKS: usize = 4;
const INPUT_CHANNELS: usize = SEMANTIC_CLASSES + 1;

/// 128x4x4 map embedding.
pub type MapEmbedding = Tensor;

/// Convolution, batch norm (inference), ReLU, 2x2 average pool and
/// spatial attention.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights {
    /// `[out, in, 7, 7]`.
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    pub bn_gamma: Tensor,
    pub bn_beta: Tensor,
    pub bn_mean: Tensor,
    pub bn_var: Tensor,
    pub bn_eps: f64,
    /// `[1, 2, 7, 7]` over (channel mean, channel max).
    pub att_w: Tensor,
    pub att_b: f64,
}

impl BlockWeights {
    /// Zero convolutions with identity batch norm.
    pub fn zeros(cin: usize, cout: usize) -> Self {
        BlockWeights {
            conv_w: Tensor::zeros(&[cout, cin, KERNEL, KERNEL]),
            conv_b: Tensor::zeros(&[cout]),
            bn_gamma: Tensor::filled(&[cout], 1.0),
            bn_beta: Tensor::zeros(&[cout]),
            bn_mean: Tensor::zeros(&[cout]),
            bn_var: Tensor::filled(&[cout], 1.0),
            bn_eps: 1e-5,
            att_w: Tensor::zeros(&[1, 2, KERNEL, KERNEL]),
            att_b: 0.0,
        }
    }

    fn seeded(cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut b = BlockWeights::zeros(cin, cout);
        b.conv_w = Tensor::random(&[cout, cin, KERNEL, KERNEL], (2.0 / (cin * KERNEL * KERNEL) as f64).sqrt(), rng);
        b.conv_b = Tensor::random(&[cout], 0.01, rng);
        b.bn_gamma.data_mut().iter_mut().for_each(|g| *g = 1.0 + rng.random_range(-0.1..0.1));
        b.bn_beta = Tensor::random(&[cout], 0.05, rng);
        b.bn_mean = Tensor::random(&[cout], 0.05, rng);
        b.bn_var.data_mut().iter_mut().for_each(|v| *v = 1.0 + rng.random_range(0.0..0.2));
        b.att_w = Tensor::random(&[1, 2, KERNEL, KERNEL], (1.0 / (2 * KERNEL * KERNEL) as f64).sqrt(), rng);
        b
    }

    fn in_channels(&self) -> usize {
        self.conv_w.shape()[1]
    }

    fn out_channels(&self) -> usize {
        self.conv_w.shape()[0]
    }

    fn validate(&self, name: &str) -> Result<()> {
        let s = self.conv_w.shape();
        if s.len() != 4 || s[2] != KERNEL || s[3] != KERNEL {
            return Err(Error::contract(format!("{name}.conv.weight must be [out, in, 7, 7], got {s:?}")));
        }
        let c = s[0];
        for (t, n) in [(&self.conv_b, "conv.bias"), (&self.bn_gamma, "bn.gamma"), (&self.bn_beta, "bn.beta"), (&self.bn_mean, "bn.mean"), (&self.bn_var, "bn.var")] {
            t.expect_shape(&format!("{name}.{n}"), &[c])?;
        }
        self.att_w.expect_shape(&format!("{name}.att.weight"), &[1, 2, KERNEL, KERNEL])?;
        if self.bn_var.data().iter().any(|v| !(v + self.bn_eps > 0.0)) {
            return Err(Error::contract(format!("{name}: batch-norm variance plus eps must be positive")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapEncoderWeights {
    /// 1x1 projection `[8, 14]`.
    pub stem_w: Tensor,
    pub stem_b: Tensor,
    pub blocks: Vec<BlockWeights>,
}

impl MapEncoderWeights {
    pub fn zeros() -> Self {
        MapEncoderWeights {
            stem_w: Tensor::zeros(&[STEM_CHANNELS, INPUT_CHANNELS]),
            stem_b: Tensor::zeros(&[STEM_CHANNELS]),
            blocks: (0..ENCODER_BLOCKS).map(|b| BlockWeights::zeros(STEM_CHANNELS << b, STEM_CHANNELS << (b + 1))).collect(),
        }
    }

    pub fn seeded(seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        MapEncoderWeights {
            stem_w: Tensor::random(&[STEM_CHANNELS, INPUT_CHANNELS], (1.0 / INPUT_CHANNELS as f64).sqrt(), &mut rng),
            stem_b: Tensor::random(&[STEM_CHANNELS], 0.01, &mut rng),
            blocks: (0..ENCODER_BLOCKS)
                .map(|b| BlockWeights::seeded(STEM_CHANNELS << b, STEM_CHANNELS << (b + 1), &mut rng))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stem_w.expect_shape("stem.weight", &[STEM_CHANNELS, INPUT_CHANNELS])?;
        self.stem_b.expect_shape("stem.bias", &[STEM_CHANNELS])?;
        if self.blocks.len() != ENCODER_BLOCKS {
            return Err(Error::contract(format!("expected {ENCODER_BLOCKS} blocks, got {}", self.blocks.len())));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let name = format!("block{i}");
            b.validate(&name)?;
            let want = (STEM_CHANNELS << i, STEM_CHANNELS << (i + 1));
            if (b.in_channels(), b.out_channels()) != want {
                return Err(Error::contract(format!("{name} must map {} -> {} channels", want.0, want.1)));
            }
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> TensorManifest {
        let mut m = TensorManifest::new();
        m.insert("stem.weight", self.stem_w.clone());
        m.insert("stem.bias", self.stem_b.clone());
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("block{i}");
            m.insert(format!("{p}.conv.weight"), b.conv_w.clone());
            m.insert(format!("{p}.conv.bias"), b.conv_b.clone());
            m.insert(format!("{p}.bn.gamma"), b.bn_gamma.clone());
            m.insert(format!("{p}.bn.beta"), b.bn_beta.clone());
            m.insert(format!("{p}.bn.mean"), b.bn_mean.clone());
            m.insert(format!("{p}.bn.var"), b.bn_var.clone());
            m.insert(format!("{p}.bn.eps"), Tensor::filled(&[1], b.bn_eps));
            m.insert(format!("{p}.att.weight"), b.att_w.clone());
            m.insert(format!("{p}.att.bias"), Tensor::filled(&[1], b.att_b));
        }
        m
    }

    pub fn from_manifest(mut m: TensorManifest) -> Result<Self> {
        let stem_w = m.take("stem.weight", &[STEM_CHANNELS, INPUT_CHANNELS])?;
        let stem_b = m.take("stem.bias", &[STEM_CHANNELS])?;
        let mut blocks = Vec::new();
        for i in 0..ENCODER_BLOCKS {
            let p = format!("block{i}");
            let (cin, cout) = (STEM_CHANNELS << i, STEM_CHANNELS << (i + 1));
            blocks.push(BlockWeights {
                conv_w: m.take(&format!("{p}.conv.weight"), &[cout, cin, KERNEL, KERNEL])?,
                conv_b: m.take(&format!("{p}.conv.bias"), &[cout])?,
                bn_gamma: m.take(&format!("{p}.bn.gamma"), &[cout])?,
                bn_beta: m.take(&format!("{p}.bn.beta"), &[cout])?,
                bn_mean: m.take(&format!("{p}.bn.mean"), &[cout])?,
                bn_var: m.take(&format!("{p}.bn.var"), &[cout])?,
                bn_eps: m.take(&format!("{p}.bn.eps"), &[1])?.data()[0],
                att_w: m.take(&format!("{p}.att.weight"), &[1, 2, KERNEL, KERNEL])?,
                att_b: m.take(&format!("{p}.att.bias"), &[1])?.data()[0],
            });
        }
        let w = MapEncoderWeights { stem_w, stem_b, blocks };
        w.validate()?;
        Ok(w)
    }
}

/// Same-padded 7x7 cross-correlation of a `[cin, h, w]` input.
fn conv7(x: &Tensor, w: &Tensor, bias: &[f64]) -> Tensor {
    let (cin, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let cout = w.shape()[0];
    let mut out = Tensor::zeros(&[cout, h, wd]);
    let (xd, wdat) = (x.data(), w.data());
    let od = out.data_mut();
    for oc in 0..cout {
        let plane = &mut od[oc * h * wd..(oc + 1) * h * wd];
        plane.iter_mut().for_each(|v| *v = bias[oc]);
        for ic in 0..cin {
            let src = &xd[ic * h * wd..(ic + 1) * h * wd];
            for ky in 0..KERNEL {
                let dy = ky as i64 - PAD;
                for kx in 0..KERNEL {
                    let dx = kx as i64 - PAD;
                    let k = wdat[((oc * cin + ic) * KERNEL + ky) * KERNEL + kx];
                    if k == 0.0 {
                        continue;
                    }
                    let y0 = (-dy).max(0) as usize;
                    let y1 = (h as i64 - dy).min(h as i64).max(0) as usize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (wd as i64 - dx).min(wd as i64).max(0) as usize;
                    for y in y0..y1 {
                        let sy = (y as i64 + dy) as usize;
                        let (orow, srow) = (&mut plane[y * wd..(y + 1) * wd], &src[sy * wd..(sy + 1) * wd]);
                        for xx in x0..x1 {
                            orow[xx] += k * srow[(xx as i64 + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// One encoder block on a `[c, h, w]` input with even `h`, `w`.
pub fn cbraa_block(x: &Tensor, b: &BlockWeights) -> Result<Tensor> {
    b.validate("block")?;
    let s = x.shape();
    if s.len() != 3 || s[0] != b.in_channels() || s[1] % 2 != 0 || s[2] % 2 != 0 {
        return Err(Error::contract(format!("block input {s:?} does not fit weights with {} input channels", b.in_channels())));
    }
    let (h, w) = (s[1], s[2]);
    let c = b.out_channels();
    let mut y = conv7(x, &b.conv_w, b.conv_b.data());
    for ch in 0..c {
        let scale = b.bn_gamma.data()[ch] / (b.bn_var.data()[ch] + b.bn_eps).sqrt();
        let (mu, beta) = (b.bn_mean.data()[ch], b.bn_beta.data()[ch]);
        for v in &mut y.data_mut()[ch * h * w..(ch + 1) * h * w] {
            *v = (scale * (*v - mu) + beta).max(0.0);
        }
    }
    let (ph, pw) = (h / 2, w / 2);
    let mut pooled = Tensor::zeros(&[c, ph, pw]);
    for ch in 0..c {
        for i in 0..ph {
            for j in 0..pw {
                let sum = y.at3(ch, 2 * i, 2 * j) + y.at3(ch, 2 * i, 2 * j + 1) + y.at3(ch, 2 * i + 1, 2 * j) + y.at3(ch, 2 * i + 1, 2 * j + 1);
                pooled.data_mut()[(ch * ph + i) * pw + j] = sum / 4.0;
            }
        }
    }
    let mut desc = Tensor::zeros(&[2, ph, pw]);
    for p in 0..ph * pw {
        let vals = (0..c).map(|ch| pooled.data()[ch * ph * pw + p]);
        let (sum, max) = vals.fold((0.0, f64::NEG_INFINITY), |(s, m), v| (s + v, m.max(v)));
        desc.data_mut()[p] = sum / c as f64;
        desc.data_mut()[ph * pw + p] = max;
    }
    let att = conv7(&desc, &b.att_w, &[b.att_b]);
    for ch in 0..c {
        for p in 0..ph * pw {
            pooled.data_mut()[ch * ph * pw + p] *= sigmoid(att.data()[p]);
        }
    }
    Ok(pooled)
}

/// Stem projection of the 14-channel crop followed by four blocks:
/// 8x64x64 -> 16x32x32 -> 32x16x16 -> 64x8x8 -> 128x4x4.
pub fn encode_map(crop: &EgoCrop, w: &MapEncoderWeights) -> Result<MapEmbedding> {
    w.validate()?;
    crop.occ.expect_shape("crop.occ", &[1, CROP_SIZE, CROP_SIZE])?;
    crop.sem.expect_shape("crop.sem", &[SEMANTIC_CLASSES, CROP_SIZE, CROP_SIZE])?;
    let plane = CROP_SIZE * CROP_SIZE;
    let input: Vec<&[f64]> = std::iter::once(crop.occ.data())
        .chain((0..SEMANTIC_CLASSES).map(|k| &crop.sem.data()[k * plane..(k + 1) * plane]))
        .collect();
    let mut x = Tensor::zeros(&[STEM_CHANNELS, CROP_SIZE, CROP_SIZE]);
    for oc in 0..STEM_CHANNELS {
        let out = &mut x.data_mut()[oc * plane..(oc + 1) * plane];
        out.iter_mut().for_each(|v| *v = w.stem_b.data()[oc]);
        for (ic, src) in input.iter().enumerate() {
            let k = w.stem_w.data()[oc * INPUT_CHANNELS + ic];
            if k != 0.0 {
                out.iter_mut().zip(src.iter()).for_each(|(o, s)| *o += k * s);
            }
        }
    }
    for b in &w.blocks {
        x = cbraa_block(&x, b)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::mapping::TourMap;
    use crate::world::{generate_scene, observe, SceneSpec};

    /// Output of the block below, evaluated independently with
    /// `scipy.signal.correlate2d(mode="same")` in double precision.
    const BLOCK_FIXTURE: [f64; 8] = [
        0.20594278610558156,
        0.2249767221558203,
        0.21550578417853553,
        0.38255195949779125,
        0.0,
        7.742094927207754,
        0.0,
        28.767320432089655,
    ];

    pub(crate) fn fixture_block() -> (Tensor, BlockWeights) {
        let x = Tensor::new(vec![1, 4, 4], (1..=16).map(f64::from).collect()).unwrap();
        let mut b = BlockWeights::zeros(1, 2);
        let k = b.conv_w.data_mut();
        k[..49].iter_mut().for_each(|v| *v = 1.0);
        k[49 + 3 * 7 + 3] = 1.0;
        k[49 + 3 * 7 + 4] = -1.0;
        b.conv_b = Tensor::new(vec![2], vec![0.0, 0.5]).unwrap();
        b.bn_gamma = Tensor::new(vec![2], vec![0.5, 2.0]).unwrap();
        b.bn_beta = Tensor::new(vec![2], vec![-10.0, 1.0]).unwrap();
        b.bn_mean = Tensor::new(vec![2], vec![100.0, 0.0]).unwrap();
        b.bn_var = Tensor::new(vec![2], vec![3.0, 0.25]).unwrap();
        let a = b.att_w.data_mut();
        a[3 * 7 + 3] = 1.0;
        a[49 + 3 * 7 + 3] = -0.5;
        a[49 + 2 * 7 + 3] = 0.25;
        b.att_b = 0.1;
        (x, b)
    }

    #[test]
    fn single_block_matches_fixture() {
        let (x, b) = fixture_block();
        let y = cbraa_block(&x, &b).unwrap();
        assert_eq!(y.shape(), &[2, 2, 2]);
        for (got, want) in y.data().iter().zip(BLOCK_FIXTURE) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn identity_batch_norm() {
        let x = Tensor::new(vec![1, 2, 2], vec![0.3, 1.7, 2.2, 0.9]).unwrap();
        let mut b = BlockWeights::zeros(1, 1);
        b.conv_w.data_mut()[3 * 7 + 3] = 1.0;
        b.bn_eps = 0.0;
        let y = cbraa_block(&x, &b).unwrap();
        // conv is identity, bn identity, pool averages, attention gate is 0.5
        assert!((y.data()[0] - (0.3 + 1.7 + 2.2 + 0.9) / 4.0 * 0.5).abs() < 1e-6);
    }

    fn sample_crop() -> EgoCrop {
        let scene = generate_scene(1, &SceneSpec::default()).unwrap();
        let p = scene.landmarks()[0].position;
        let pose = Pose::new(p.x, p.y, 90.0);
        let mut m = TourMap::default();
        m.integrate_observation(&observe(&scene, pose));
        m.crop_ego(pose)
    }

    #[test]
    fn output_shape_and_finiteness() {
        let z = encode_map(&sample_crop(), &MapEncoderWeights::seeded(3)).unwrap();
        assert_eq!(z.shape(), &[128, 4, 4]);
        assert!(z.is_finite());
        assert!(z.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_weights_annihilate() {
        let z = encode_map(&sample_crop(), &MapEncoderWeights::zeros()).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manifest_round_trip_preserves_output() {
        let w = MapEncoderWeights::seeded(8);
        let back = MapEncoderWeights::from_manifest(TensorManifest::from_json(&w.to_manifest().to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn wrong_shapes_are_contract_errors() {
        let mut crop = sample_crop();
        crop.sem = Tensor::zeros(&[12, 64, 64]);
        assert!(matches!(encode_map(&crop, &MapEncoderWeights::zeros()), Err(Error::Contract(_))));
        let mut w = MapEncoderWeights::zeros();
        w.blocks.pop();
        assert!(encode_map(&sample_crop(), &w).is_err());
    }
}
