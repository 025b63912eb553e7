//! Shared-encoder network with a classification head and a reconstruction
//! decoder.
//!
//! ```text
//! x ─ conv/pool ×4 ─ FC1 ─ FC2 ─┬─ FC3 ─ softmax          (classifier)
//!                               └─ FC4 ─ FC5 ─ (conv, up) ×4 ─ conv   (decoder)
//! ```
//!
//! Parameters are stored by name (`encoder/conv1/weight`, `decoder/fc5/bias`,
//! ...) so the two task paths share the encoder entries of one
//! [`ParamStore`].

mod checkpoint;
mod config;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use config::ArchitectureConfig;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Which sub-network a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Encoder,
    Classifier,
    Decoder,
}

impl Group {
    pub fn of(name: &str) -> Option<Group> {
        match name.split('/').next()? {
            "encoder" => Some(Group::Encoder),
            "classifier" => Some(Group::Classifier),
            "decoder" => Some(Group::Decoder),
            _ => None,
        }
    }
}

/// Samples per eval-mode forward chunk.
const EVAL_CHUNK: usize = 32;

#[derive(Clone, Debug)]
pub struct SsdlModel<T: Real> {
    config: ArchitectureConfig,
    params: ParamStore<T>,
}

/// Parameter shapes of a configuration, by name.
pub fn parameter_shapes(cfg: &ArchitectureConfig) -> Vec<(String, Vec<usize>)> {
    let k = cfg.kernel_size;
    let mut out = Vec::new();
    let mut layer = |name: String, shape: Vec<usize>, bias: usize| {
        out.push((format!("{name}/weight"), shape));
        out.push((format!("{name}/bias"), vec![bias]));
    };
    let mut cin = 1;
    for (i, &c) in cfg.conv_channels.iter().enumerate() {
        layer(format!("encoder/conv{}", i + 1), vec![c, cin, k, k], c);
        cin = c;
    }
    let (f1, f2) = (cfg.fc_sizes[0], cfg.fc_sizes[1]);
    let flat = cfg.flatten_size();
    layer("encoder/fc1".into(), vec![f1, flat], f1);
    layer("encoder/fc2".into(), vec![f2, f1], f2);
    layer("classifier/fc3".into(), vec![cfg.num_classes, f2], cfg.num_classes);
    layer("decoder/fc4".into(), vec![f1, f2], f1);
    layer("decoder/fc5".into(), vec![flat, f1], flat);
    let mut cin = *cfg.conv_channels.last().expect("validated");
    for (i, &c) in cfg.decoder_channels.iter().enumerate() {
        layer(format!("decoder/conv{}", i + 1), vec![c, cin, k, k], c);
        cin = c;
    }
    layer("decoder/out".into(), vec![1, cin, k, k], 1);
    out.sort();
    out
}

impl<T: Real> SsdlModel<T> {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`) drawn in parameter-name
    /// order from `seed`; zero biases.
    pub fn build(config: ArchitectureConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in parameter_shapes(&config) {
            let n: usize = shape.iter().product();
            let data = if name.ends_with("/weight") {
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound);
                (0..n).map(|_| T::cast_from(dist.sample(&mut rng))).collect()
            } else {
                vec![T::zero(); n]
            };
            params.insert(name, Tensor::new(shape, data)?)?;
        }
        Ok(SsdlModel { config, params })
    }

    /// Wraps an existing parameter set after checking names and shapes.
    pub fn from_params(config: ArchitectureConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let expected = parameter_shapes(&config);
        if expected.len() != params.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "expected {} parameters, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape) in &expected {
            let p = params
                .get(name)
                .ok_or_else(|| Error::ArchitectureMismatch(format!("missing parameter {name}")))?;
            if p.value().shape() != shape.as_slice() {
                return Err(Error::ArchitectureMismatch(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    p.value().shape()
                )));
            }
        }
        Ok(SsdlModel { config, params })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.numel()
    }

    /// Converts the element type of every parameter.
    pub fn cast<U: Real>(&self) -> SsdlModel<U> {
        let mut params = ParamStore::new();
        for p in self.params.iter() {
            params
                .insert(p.name(), p.value().cast::<U>())
                .expect("unique names");
        }
        SsdlModel {
            config: self.config.clone(),
            params,
        }
    }

    fn p(&self, tape: &mut Tape<T>, name: &str) -> Result<Var> {
        tape.param(&self.params, name)
    }

    fn conv(&self, tape: &mut Tape<T>, x: Var, layer: &str) -> Result<Var> {
        let w = self.p(tape, &format!("{layer}/weight"))?;
        let b = self.p(tape, &format!("{layer}/bias"))?;
        tape.conv2d(x, w, b)
    }

    fn dense(&self, tape: &mut Tape<T>, x: Var, layer: &str) -> Result<Var> {
        let w = self.p(tape, &format!("{layer}/weight"))?;
        let b = self.p(tape, &format!("{layer}/bias"))?;
        tape.dense(x, w, b)
    }

    /// `[B,1,S,S]` images to `[B,bottleneck]` codes.
    pub fn encode<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        x: Var,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        let s = self.config.input_side;
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 4 || shape[1] != 1 || shape[2] != s || shape[3] != s {
            return Err(Error::shape(format!(
                "encoder expects [B,1,{s},{s}], got {shape:?}"
            )));
        }
        let batch = shape[0];
        let train = mode == Mode::Train;
        let mut h = x;
        for i in 1..=self.config.conv_channels.len() {
            h = self.conv(tape, h, &format!("encoder/conv{i}"))?;
            h = tape.relu(h);
            h = tape.maxpool2d(h)?;
        }
        h = tape.reshape(h, &[batch, self.config.flatten_size()])?;
        for layer in ["encoder/fc1", "encoder/fc2"] {
            h = self.dense(tape, h, layer)?;
            h = tape.relu(h);
            h = tape.dropout(h, self.config.dropout_p, train, rng)?;
        }
        Ok(h)
    }

    /// Class logits `[B,2]` from codes.
    pub fn logits(&self, tape: &mut Tape<T>, h: Var) -> Result<Var> {
        self.check_code(tape, h)?;
        self.dense(tape, h, "classifier/fc3")
    }

    /// Class probabilities `[B,2]` from codes.
    pub fn classify(&self, tape: &mut Tape<T>, h: Var) -> Result<Var> {
        let z = self.logits(tape, h)?;
        tape.softmax(z)
    }

    /// Reconstructed `[B,1,S,S]` images from codes.
    pub fn decode(&self, tape: &mut Tape<T>, h: Var) -> Result<Var> {
        self.check_code(tape, h)?;
        let batch = tape.value(h).shape()[0];
        let mut y = self.dense(tape, h, "decoder/fc4")?;
        y = tape.relu(y);
        y = self.dense(tape, y, "decoder/fc5")?;
        y = tape.relu(y);
        let c = *self.config.conv_channels.last().expect("validated");
        let s = self.config.bottom_side();
        y = tape.reshape(y, &[batch, c, s, s])?;
        for i in 1..=self.config.decoder_channels.len() {
            y = self.conv(tape, y, &format!("decoder/conv{i}"))?;
            y = tape.relu(y);
            y = tape.upsample2d(y, 2)?;
        }
        self.conv(tape, y, "decoder/out")
    }

    fn check_code(&self, tape: &Tape<T>, h: Var) -> Result<()> {
        let shape = tape.value(h).shape();
        if shape.len() != 2 || shape[1] != self.config.bottleneck() {
            return Err(Error::shape(format!(
                "expected codes [B,{}], got {shape:?}",
                self.config.bottleneck()
            )));
        }
        Ok(())
    }

    /// Stacks flat `S*S` images into a `[B,1,S,S]` tensor.
    pub fn batch_tensor(&self, images: &[&[T]]) -> Result<Tensor<T>> {
        let s = self.config.input_side;
        let mut data = Vec::with_capacity(images.len() * s * s);
        for img in images {
            if img.len() != s * s {
                return Err(Error::shape(format!(
                    "image has {} pixels, expected {}",
                    img.len(),
                    s * s
                )));
            }
            data.extend_from_slice(img);
        }
        Tensor::new(vec![images.len(), 1, s, s], data)
    }

    fn eval_chunks<F>(&self, images: &[&[T]], mut f: F) -> Result<()>
    where
        F: FnMut(&mut Tape<T>, Var) -> Result<()>,
    {
        // eval mode never draws from the rng
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for chunk in images.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let x = tape.constant(self.batch_tensor(chunk)?);
            let h = self.encode(&mut tape, x, Mode::Eval, &mut rng)?;
            f(&mut tape, h)?;
        }
        Ok(())
    }

    /// Eval-mode bottleneck codes, one row per image.
    pub fn encode_eval(&self, images: &[&[T]]) -> Result<Vec<Vec<T>>> {
        let mut out = Vec::with_capacity(images.len());
        let d = self.config.bottleneck();
        self.eval_chunks(images, |tape, h| {
            out.extend(tape.value(h).data().chunks(d).map(<[T]>::to_vec));
            Ok(())
        })?;
        Ok(out)
    }

    /// Eval-mode class probabilities `[p_benign, p_malignant]` per image.
    pub fn predict_proba(&self, images: &[&[T]]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(images.len());
        self.eval_chunks(images, |tape, h| {
            let p = self.classify(tape, h)?;
            out.extend(
                tape.value(p)
                    .data()
                    .chunks(2)
                    .map(|r| [r[0].as_f64(), r[1].as_f64()]),
            );
            Ok(())
        })?;
        Ok(out)
    }

    /// Eval-mode reconstructions, flat `S*S` per image.
    pub fn reconstruct(&self, images: &[&[T]]) -> Result<Vec<Vec<T>>> {
        let mut out = Vec::with_capacity(images.len());
        let n = self.config.input_side * self.config.input_side;
        self.eval_chunks(images, |tape, h| {
            let y = self.decode(tape, h)?;
            out.extend(tape.value(y).data().chunks(n).map(<[T]>::to_vec));
            Ok(())
        })?;
        Ok(out)
    }
}
