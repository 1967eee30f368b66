//! Analysis transform, synthesis transform and entropy model sharing one
//! flat parameter vector laid out as `[analysis | synthesis | entropy]`.

use std::io::{Read, Write};
use std::ops::Range;

use ndarray::{Array2, ArrayView2};

use super::entropy::{EntropyModelShape, FactorizedEntropyModel};
use super::mlp::{MlpShape, LEAKY_SLOPE};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Purpose};
use crate::sources::{ambient_dim, SourceKind};

pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_ENTROPY_HIDDEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelShape {
    pub source: SourceKind,
    /// Ambient dimension `d_s` (2 for the circle).
    pub input_dim: usize,
    /// Latent dimension `d_c`.
    pub latent_dim: usize,
    pub hidden: usize,
    pub entropy_hidden: usize,
}

impl ModelShape {
    pub fn new(source: SourceKind, ramp_dim: usize, latent_dim: usize) -> Result<Self> {
        if latent_dim == 0 {
            return Err(invalid("latent dimension must be at least 1"));
        }
        if source == SourceKind::Ramp && ramp_dim == 0 {
            return Err(invalid("ramp dimension must be at least 1"));
        }
        Ok(Self {
            source,
            input_dim: ambient_dim(source, ramp_dim),
            latent_dim,
            hidden: DEFAULT_HIDDEN,
            entropy_hidden: DEFAULT_ENTROPY_HIDDEN,
        })
    }

    pub fn analysis(&self) -> MlpShape {
        MlpShape::new(self.input_dim, self.hidden, self.latent_dim)
    }

    pub fn synthesis(&self) -> MlpShape {
        MlpShape::new(self.latent_dim, self.hidden, self.input_dim)
    }

    pub fn entropy(&self) -> EntropyModelShape {
        EntropyModelShape::new(self.latent_dim, self.entropy_hidden)
    }

    pub fn analysis_range(&self) -> Range<usize> {
        0..self.analysis().param_count()
    }

    pub fn synthesis_range(&self) -> Range<usize> {
        let a = self.analysis().param_count();
        a..a + self.synthesis().param_count()
    }

    pub fn entropy_range(&self) -> Range<usize> {
        let s = self.synthesis_range().end;
        s..s + self.entropy().param_count()
    }

    pub fn param_count(&self) -> usize {
        self.entropy_range().end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressorModel {
    pub shape: ModelShape,
    pub params: Vec<f64>,
}

impl CompressorModel {
    /// Glorot-uniform transforms and the default entropy-model initialization.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = stream(seed, Purpose::Init, 0);
        let mut params = vec![0.0; shape.param_count()];
        shape.analysis().init(&mut rng, &mut params[shape.analysis_range()]);
        shape.synthesis().init(&mut rng, &mut params[shape.synthesis_range()]);
        shape.entropy().init(&mut rng, &mut params[shape.entropy_range()]);
        Self { shape, params }
    }

    /// All transform weights zero; the synthesis output bias is `bias`
    /// (e.g. the source mean).
    pub fn constant(shape: ModelShape, bias: &[f64]) -> Result<Self> {
        if bias.len() != shape.input_dim {
            return Err(Error::Shape {
                expected: shape.input_dim,
                got: bias.len(),
            });
        }
        let mut m = Self::init(shape, 0);
        m.params[shape.analysis_range()].fill(0.0);
        m.params[shape.synthesis_range()].fill(0.0);
        let end = shape.synthesis_range().end;
        m.params[end - shape.input_dim..end].copy_from_slice(bias);
        Ok(m)
    }

    pub fn from_params(shape: ModelShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(Error::Shape {
                expected: shape.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { shape, params })
    }

    pub fn analysis_params(&self) -> &[f64] {
        &self.params[self.shape.analysis_range()]
    }

    pub fn synthesis_params(&self) -> &[f64] {
        &self.params[self.shape.synthesis_range()]
    }

    pub fn entropy_model(&self) -> FactorizedEntropyModel<'_> {
        FactorizedEntropyModel {
            shape: self.shape.entropy(),
            params: &self.params[self.shape.entropy_range()],
        }
    }

    /// Continuous latents `g_a(x)` for a batch of ambient rows.
    pub fn analyze(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.shape.analysis().predict(self.analysis_params(), x)
    }

    /// Integer symbols `round(g_a(x))`.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.analyze(x)?.mapv(f64::round))
    }

    /// Reconstructions `g_s(symbols)`.
    pub fn decode(&self, symbols: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.shape.synthesis().predict(self.synthesis_params(), symbols)
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
        let source: u32 = match self.shape.source {
            SourceKind::Circle => 0,
            SourceKind::Ramp => 1,
        };
        for v in [
            source,
            self.shape.input_dim as u32,
            self.shape.latent_dim as u32,
            self.shape.hidden as u32,
            self.shape.entropy_hidden as u32,
        ] {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.write_all(&LEAKY_SLOPE.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.params.len() as u64).to_le_bytes()).map_err(io)?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "checkpoint",
            detail,
        };
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::io("<checkpoint>", e))?;
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = buf.get(pos..pos + n).ok_or_else(|| bad("truncated".into()))?;
            pos += n;
            Ok(s)
        };
        if take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut dims = [0u32; 5];
        for d in dims.iter_mut() {
            *d = u32_at(take(4)?);
        }
        let slope = f64::from_le_bytes(take(8)?.try_into().unwrap());
        if slope != LEAKY_SLOPE {
            return Err(bad(format!("activation slope {slope} not supported")));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let source = match dims[0] {
            0 => SourceKind::Circle,
            1 => SourceKind::Ramp,
            s => return Err(bad(format!("unknown source tag {s}"))),
        };
        let shape = ModelShape {
            source,
            input_dim: dims[1] as usize,
            latent_dim: dims[2] as usize,
            hidden: dims[3] as usize,
            entropy_hidden: dims[4] as usize,
        };
        if n != shape.param_count() {
            return Err(bad(format!("{n} parameters for a shape needing {}", shape.param_count())));
        }
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            params.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        if pos != buf.len() {
            return Err(bad("trailing bytes".into()));
        }
        Self::from_params(shape, params)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"MFEDCKPT";
const CHECKPOINT_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous() {
        let s = ModelShape::new(SourceKind::Ramp, 64, 2).unwrap();
        assert_eq!(s.analysis_range().end, s.synthesis_range().start);
        assert_eq!(s.synthesis_range().end, s.entropy_range().start);
        assert_eq!(
            s.param_count(),
            s.analysis().param_count() + s.synthesis().param_count() + 2 * 113
        );
        assert_eq!(s.analysis().output, s.synthesis().input);
        assert_eq!(s.entropy().dims, 2);
    }

    #[test]
    fn checkpoint_round_trip() {
        let s = ModelShape::new(SourceKind::Circle, 0, 1).unwrap();
        let m = CompressorModel::init(s, 5);
        let mut bytes = Vec::new();
        m.write_checkpoint(&mut bytes).unwrap();
        let back = CompressorModel::read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(m, back);
        assert!(CompressorModel::read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(CompressorModel::read_checkpoint(bad.as_slice()).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let s = ModelShape::new(SourceKind::Circle, 0, 2).unwrap();
        assert_eq!(CompressorModel::init(s, 3), CompressorModel::init(s, 3));
        assert_ne!(CompressorModel::init(s, 3), CompressorModel::init(s, 4));
    }
}
