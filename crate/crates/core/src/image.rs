//! MNIST/Fashion-MNIST ingestion, label binarization, reference-model
//! training, and Bernoulli relabeling so the conditional mean is known
//! exactly.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::datagen::{Dataset, ScenarioKind};
use crate::error::{Error, Result};
use crate::nn::stack::{Layer, StackNet};
use crate::nn::{Activation, OptimizerKind, OptimizerState};
use crate::seed::{derive_rng, StreamRole};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    Mnist,
    FashionMnist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    /// count * 28 * 28 row-major pixels.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub source_tag: SourceTag,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }
}

/// Parsed payload of an IDX image file.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u8>,
}

fn format_err(path: &Path, detail: String) -> Error {
    Error::IdxFormat {
        path: path.display().to_string(),
        detail,
    }
}

fn read_be_u32(bytes: &[u8], off: usize, path: &Path) -> Result<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, format!("truncated header at offset {off}")))
}

/// Parse an IDX image file: big-endian magic 0x00000803, three big-endian
/// dimension words, then row-major u8 pixels.
pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let magic = read_be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(format_err(
            path,
            format!("expected magic {IDX_IMAGE_MAGIC:#010x}, got {magic:#010x}"),
        ));
    }
    let count = read_be_u32(&bytes, 4, path)? as usize;
    let rows = read_be_u32(&bytes, 8, path)? as usize;
    let cols = read_be_u32(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("payload length {} != expected {}", bytes.len(), expected),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        data: bytes[16..].to_vec(),
    })
}

/// Parse an IDX label file: big-endian magic 0x00000801, one dimension word,
/// then u8 labels.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let magic = read_be_u32(&bytes, 0, path)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(format_err(
            path,
            format!("expected magic {IDX_LABEL_MAGIC:#010x}, got {magic:#010x}"),
        ));
    }
    let count = read_be_u32(&bytes, 4, path)? as usize;
    if bytes.len() != 8 + count {
        return Err(format_err(
            path,
            format!("payload length {} != expected {}", bytes.len(), 8 + count),
        ));
    }
    Ok(bytes[8..].to_vec())
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + images.data.len());
    bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.count as u32).to_be_bytes());
    bytes.extend_from_slice(&(images.rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(images.cols as u32).to_be_bytes());
    bytes.extend_from_slice(&images.data);
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Load an image/label file pair, checking the counts agree.
pub fn load_image_set(images_path: &Path, labels_path: &Path, tag: SourceTag) -> Result<ImageSet> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(format_err(
            images_path,
            format!(
                "image count {} does not match label count {}",
                images.count,
                labels.len()
            ),
        ));
    }
    if images.rows != IMAGE_SIDE || images.cols != IMAGE_SIDE {
        return Err(format_err(
            images_path,
            format!("expected 28x28 images, got {}x{}", images.rows, images.cols),
        ));
    }
    Ok(ImageSet {
        images: images.data,
        labels,
        source_tag: tag,
    })
}

/// Binary task definition: MNIST marks digit 1 as positive; Fashion-MNIST
/// marks upper-body clothing labels {0,2,3,4,6} as class 0.
pub fn binarize_labels(set: &ImageSet) -> Vec<f64> {
    set.labels
        .iter()
        .map(|&l| match set.source_tag {
            SourceTag::Mnist => {
                if l == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            SourceTag::FashionMnist => {
                if matches!(l, 0 | 2 | 3 | 4 | 6) {
                    0.0
                } else {
                    1.0
                }
            }
        })
        .collect()
}

/// Pixel normalization to [-1, 1].
pub fn normalize_pixel(p: u8) -> f64 {
    p as f64 / 255.0 * 2.0 - 1.0
}

/// The fixed reference architecture: five conv layers, two max-pools, three
/// fully connected layers (512/128/1) with dropout, sigmoid output.
pub fn reference_stack(dropout: f64) -> StackNet {
    let relu = Layer::Act(Activation::ReLU);
    let layers = vec![
        Layer::Conv { in_c: 1, out_c: 32, k: 5, in_h: 28, in_w: 28 },
        relu.clone(),
        Layer::Conv { in_c: 32, out_c: 64, k: 3, in_h: 24, in_w: 24 },
        relu.clone(),
        Layer::MaxPool { c: 64, k: 2, s: 2, in_h: 22, in_w: 22 },
        Layer::Conv { in_c: 64, out_c: 96, k: 3, in_h: 11, in_w: 11 },
        relu.clone(),
        Layer::Conv { in_c: 96, out_c: 64, k: 3, in_h: 9, in_w: 9 },
        relu.clone(),
        Layer::Conv { in_c: 64, out_c: 32, k: 3, in_h: 7, in_w: 7 },
        relu.clone(),
        Layer::MaxPool { c: 32, k: 2, s: 1, in_h: 5, in_w: 5 },
        Layer::Dense { fan_in: 32 * 4 * 4, fan_out: 512 },
        relu.clone(),
        Layer::Dropout { rate: dropout },
        Layer::Dense { fan_in: 512, fan_out: 128 },
        relu,
        Layer::Dropout { rate: dropout },
        Layer::Dense { fan_in: 128, fan_out: 1 },
        Layer::Act(Activation::Sigmoid),
    ];
    StackNet::new(layers, IMAGE_PIXELS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ReferenceTrainConfig {
    fn default() -> Self {
        ReferenceTrainConfig {
            epochs: 5,
            batch_size: 64,
            learning_rate: 5e-4,
            dropout: 0.5,
            seed: 0,
        }
    }
}

/// A frozen reference model; evaluation is deterministic (dropout disabled).
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    net: StackNet,
    pub epochs: usize,
    pub seed: u64,
    pub train_accuracy: f64,
}

impl ReferenceModel {
    /// F(X) in (0, 1) for a raw 28x28 image.
    pub fn evaluate(&self, image: &[u8]) -> f64 {
        let input: Vec<f64> = image.iter().map(|&p| normalize_pixel(p)).collect();
        self.net.forward(&input).expect("frozen model input size")
    }

    pub fn net(&self) -> &StackNet {
        &self.net
    }
}

/// Train the reference architecture on the binarized task with Adam and
/// cross-entropy, then freeze it.
pub fn train_reference_model(
    set: &ImageSet,
    binary_labels: &[f64],
    config: &ReferenceTrainConfig,
) -> Result<ReferenceModel> {
    if set.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            available: 0,
        });
    }
    assert_eq!(binary_labels.len(), set.len());
    let mut net = reference_stack(config.dropout);
    let mut init_rng = derive_rng(config.seed, 0, 0, StreamRole::Init);
    net.init_params(&mut init_rng);
    let mut shuffle_rng = derive_rng(config.seed, 0, 0, StreamRole::Shuffle);
    let mut dropout_rng = derive_rng(config.seed, 0, 0, StreamRole::Dropout);
    let mut opt = OptimizerState::new(OptimizerKind::Adam, config.learning_rate, net.param_count());

    let n = set.len();
    let batch = config.batch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.param_count()];
    let mut input = vec![0.0; IMAGE_PIXELS];
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                for (dst, &p) in input.iter_mut().zip(set.image(i)) {
                    *dst = normalize_pixel(p);
                }
                let trace = net.forward_trace(&input, Some(&mut dropout_rng))?;
                let f = StackNet::output_of(&trace).clamp(1e-12, 1.0 - 1e-12);
                let y = binary_labels[i];
                batch_loss -= scale * (y * f.ln() + (1.0 - y) * (1.0 - f).ln());
                // Cross-entropy through the sigmoid head: dL/df * sigma'.
                let dl = (f - y) / (f * (1.0 - f));
                net.backward(&trace, &[dl], scale, &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("reference training loss at epoch {epoch}"),
                });
            }
            opt.step(net.params_mut(), &grad)?;
        }
    }

    // Probe accuracy on the training images at threshold 0.5.
    let mut correct = 0usize;
    for i in 0..n {
        for (dst, &p) in input.iter_mut().zip(set.image(i)) {
            *dst = normalize_pixel(p);
        }
        let f = net.forward(&input)?;
        let pred = if f >= 0.5 { 1.0 } else { 0.0 };
        if pred == binary_labels[i] {
            correct += 1;
        }
    }
    Ok(ReferenceModel {
        net,
        epochs: config.epochs,
        seed: config.seed,
        train_accuracy: correct as f64 / n as f64,
    })
}

/// Relabel images with Bernoulli draws from the frozen model:
/// P(Y = 1 | X) = F(X), true_mean = F(X), inputs normalized to [-1, 1].
pub fn relabel(set: &ImageSet, model: &ReferenceModel, seed: u64) -> Dataset {
    use rayon::prelude::*;
    let probs: Vec<f64> = (0..set.len())
        .into_par_iter()
        .map(|i| model.evaluate(set.image(i)))
        .collect();
    let mut rng = derive_rng(seed, 0, 0, StreamRole::Relabel);
    let mut inputs = Vec::with_capacity(set.len() * IMAGE_PIXELS);
    let mut targets = Vec::with_capacity(set.len());
    for (i, &p) in probs.iter().enumerate() {
        inputs.extend(set.image(i).iter().map(|&px| normalize_pixel(px)));
        targets.push(if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
    }
    Dataset::from_parts(inputs, IMAGE_PIXELS, targets, probs, ScenarioKind::Image)
}
