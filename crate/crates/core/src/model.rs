//! A network bundled with the input normalisation it was trained with.

use std::path::Path;

use crate::checkpoint::{self, Record};
use crate::data::zero_center_normalize;
use crate::error::{Error, Result};
use crate::network::{argmax, Network};
use crate::tensor::Tensor;

/// Default number of images per inference batch.
pub const EVAL_BATCH: usize = 250;

#[derive(Debug, Clone)]
pub struct Model {
    pub net: Network,
    /// Per-channel mean subtracted from raw `[0, 1]` images.
    pub mean: Tensor,
}

impl Model {
    pub fn new(net: Network, mean: Tensor) -> Result<Self> {
        let channels = net.input_shape().first().copied().unwrap_or(1);
        if mean.len() != channels && mean.len() != 1 {
            return Err(Error::Shape(format!(
                "mean of {} channels for a {channels}-channel network",
                mean.len()
            )));
        }
        Ok(Self { net, mean })
    }

    /// Normalises raw images for the network.
    pub fn prepare(&self, images: &Tensor) -> Result<Tensor> {
        zero_center_normalize(images, &self.mean)
    }

    fn chunks(images: &Tensor, batch: usize) -> impl Iterator<Item = Tensor> + '_ {
        let n = images.batch();
        let batch = batch.max(1);
        (0..n.div_ceil(batch)).map(move |b| {
            let idx: Vec<usize> = (b * batch..((b + 1) * batch).min(n)).collect();
            images.select(&idx)
        })
    }

    /// Logits for raw images, `N×classes`.
    pub fn logits(&self, images: &Tensor) -> Result<Tensor> {
        self.map_batches(images, |x| self.net.infer(x))
    }

    pub fn predict(&self, images: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(images)?;
        Ok((0..logits.batch()).map(|i| argmax(logits.item(i))).collect())
    }

    /// Output of layer `index` for raw images.
    pub fn output_at(&self, images: &Tensor, index: usize) -> Result<Tensor> {
        self.map_batches(images, |x| self.net.output_at(x, index))
    }

    /// Applies `f` to normalised batches and concatenates the outputs.
    pub fn map_batches(&self, images: &Tensor, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<Tensor> {
        let mut data = Vec::new();
        let mut tail = None;
        for chunk in Self::chunks(images, EVAL_BATCH) {
            let out = f(&self.prepare(&chunk)?)?;
            tail.get_or_insert_with(|| out.shape()[1..].to_vec());
            data.extend(out.into_data());
        }
        let mut shape = vec![images.batch()];
        shape.extend(tail.unwrap_or_default());
        Tensor::new(shape, data)
    }

    /// Activation-layer outputs for raw images, batch by batch.
    pub fn for_each_activation_batch(
        &self,
        images: &Tensor,
        mut f: impl FnMut(usize, &[Tensor]) -> Result<()>,
    ) -> Result<()> {
        let mut offset = 0;
        for chunk in Self::chunks(images, EVAL_BATCH) {
            let acts = self.net.activations(&self.prepare(&chunk)?)?;
            f(offset, &acts)?;
            offset += chunk.batch();
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut records = checkpoint::network_records(&self.net);
        records.push(Record {
            name: "input_mean".into(),
            shape: vec![self.mean.len()],
            data: self.mean.data().to_vec(),
        });
        std::fs::write(path, checkpoint::encode(&records)).map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint; a missing mean record means no normalisation.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut records = checkpoint::decode(&bytes, path)?;
        let mean = match records.iter().position(|r| r.name == "input_mean") {
            Some(i) => Tensor::from_vec(records.remove(i).data),
            None => Tensor::from_vec(vec![0.0]),
        };
        let net = checkpoint::network_from_records(&records, path)?;
        Self::new(net, mean)
    }
}
