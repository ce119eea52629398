//! Trained models and their binary container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "RFDLMODL" u32 version
//! u8 method
//! f64 alpha beta gamma | u64 K r | f64 mu0 mu_max eta eps tau floor | u64 max_iter seed
//! u8 normalize | u8 has_pca [mean matrix (n×1), basis matrix]
//! P matrix | D matrix | u8 has_c [C matrix] | u8 has_classes [u64 classes]
//! ```
//!
//! A matrix is `u32 rows, u32 cols` followed by row-major f64 entries.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{Normalization, PcaBasis};
use crate::linalg::{shape, Matrix};
use crate::solver::HyperParams;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"RFDLMODL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Jrfdl,
    Djrfdl,
    CfBaseline,
}

impl Method {
    fn code(self) -> u8 {
        match self {
            Method::Jrfdl => 0,
            Method::Djrfdl => 1,
            Method::CfBaseline => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Method::Jrfdl),
            1 => Some(Method::Djrfdl),
            2 => Some(Method::CfBaseline),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Jrfdl => "jrfdl",
            Method::Djrfdl => "djrfdl",
            Method::CfBaseline => "cf_baseline",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jrfdl" => Ok(Method::Jrfdl),
            "djrfdl" => Ok(Method::Djrfdl),
            "cf_baseline" => Ok(Method::CfBaseline),
            other => Err(Error::InvalidParameter(format!(
                "unknown method {other:?} (expected jrfdl, djrfdl or cf_baseline)"
            ))),
        }
    }
}

/// What was done to raw features before training: normalization, then PCA.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preprocessing {
    pub normalize: Normalization,
    pub pca: Option<PcaBasis>,
}

impl Preprocessing {
    /// Feature count expected on raw input, if it is pinned by PCA.
    pub fn input_dim(&self) -> Option<usize> {
        self.pca.as_ref().map(|p| p.input_dim())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let x = self.normalize.apply(x);
        match &self.pca {
            Some(pca) => pca.apply(&x),
            None => Ok(x),
        }
    }
}

/// Learned projection and dictionary, with an optional linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub method: Method,
    /// K×n
    pub p: Matrix,
    /// r×K
    pub d: Matrix,
    /// K×c
    pub c: Option<Matrix>,
    pub classes: Option<usize>,
    pub preprocessing: Preprocessing,
    pub params: HyperParams,
}

impl Model {
    pub fn feature_dim(&self) -> usize {
        self.p.ncols()
    }

    pub fn dict_size(&self) -> usize {
        self.p.nrows()
    }

    /// Preprocesses raw samples (columns) into the model's feature space.
    pub fn prepare(&self, raw: &Matrix) -> Result<Matrix> {
        let x = self.preprocessing.apply(raw)?;
        if x.nrows() != self.feature_dim() {
            return Err(Error::dims("model features vs input", self.feature_dim(), x.nrows()));
        }
        Ok(x)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.p.nrows();
        if self.d.ncols() != k {
            return Err(Error::dims("model: D columns vs P rows", k, shape(&self.d)));
        }
        if let Some(c) = &self.c {
            if c.nrows() != k {
                return Err(Error::dims("model: C rows vs P rows", k, shape(c)));
            }
            if let Some(classes) = self.classes {
                if c.ncols() != classes {
                    return Err(Error::dims("model: C columns vs classes", classes, shape(c)));
                }
            }
        }
        if let Some(pca) = &self.preprocessing.pca {
            if pca.output_dim() != self.p.ncols() {
                return Err(Error::dims("model: PCA output vs P columns", self.p.ncols(), pca.output_dim()));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u8(self.method.code());
        let p = &self.params;
        for v in [p.alpha, p.beta, p.gamma] {
            w.f64(v);
        }
        w.u64(p.dict_size as u64);
        w.u64(p.factor_rank as u64);
        for v in [p.mu0, p.mu_max, p.eta, p.eps, p.tau, p.floor] {
            w.f64(v);
        }
        w.u64(p.max_iter as u64);
        w.u64(p.seed);
        w.u8(match self.preprocessing.normalize {
            Normalization::None => 0,
            Normalization::UnitL2 => 1,
        });
        match &self.preprocessing.pca {
            Some(pca) => {
                w.u8(1);
                w.matrix(&Matrix::from_column_slice(pca.mean.len(), 1, pca.mean.as_slice()))?;
                w.matrix(&pca.basis)?;
            }
            None => w.u8(0),
        }
        w.matrix(&self.p)?;
        w.matrix(&self.d)?;
        match &self.c {
            Some(c) => {
                w.u8(1);
                w.matrix(c)?;
            }
            None => w.u8(0),
        }
        match self.classes {
            Some(c) => {
                w.u8(1);
                w.u64(c as u64);
            }
            None => w.u8(0),
        }
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(r.err("not a model file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(&format!("unsupported model version {version}")));
        }
        let code = r.u8()?;
        let method = Method::from_code(code).ok_or_else(|| r.err(&format!("unknown method code {code}")))?;
        let (alpha, beta, gamma) = (r.f64()?, r.f64()?, r.f64()?);
        let (dict_size, factor_rank) = (r.usize()?, r.usize()?);
        let (mu0, mu_max, eta, eps, tau, floor) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let (max_iter, seed) = (r.usize()?, r.u64()?);
        let params = HyperParams {
            alpha,
            beta,
            gamma,
            dict_size,
            factor_rank,
            mu0,
            mu_max,
            eta,
            eps,
            tau,
            floor,
            max_iter,
            seed,
        };
        let normalize = match r.u8()? {
            0 => Normalization::None,
            1 => Normalization::UnitL2,
            other => return Err(r.err(&format!("unknown normalization code {other}"))),
        };
        let pca = if r.flag()? {
            let mean = r.matrix()?;
            if mean.ncols() != 1 {
                return Err(r.err("PCA mean must be a column"));
            }
            let basis = r.matrix()?;
            if basis.nrows() != mean.nrows() {
                return Err(r.err("PCA basis rows differ from mean length"));
            }
            Some(PcaBasis { mean: DVector::from_column_slice(mean.as_slice()), basis })
        } else {
            None
        };
        let p = r.matrix()?;
        let d = r.matrix()?;
        let c = if r.flag()? { Some(r.matrix()?) } else { None };
        let classes = if r.flag()? { Some(r.usize()?) } else { None };
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes"));
        }
        let model = Model { method, p, d, c, classes, preprocessing: Preprocessing { normalize, pca }, params };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::data::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format { path: path.to_path_buf(), message },
            other => other,
        })
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn matrix(&mut self, m: &Matrix) -> Result<()> {
        let dim = |d: usize| {
            u32::try_from(d).map_err(|_| Error::InvalidParameter(format!("matrix dimension {d} exceeds u32")))
        };
        self.u32(dim(m.nrows())?);
        self.u32(dim(m.ncols())?);
        for row in m.row_iter() {
            for &v in row.iter() {
                self.f64(v);
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Format { path: "<model>".into(), message: format!("{message} (at byte {})", self.pos) }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.err("unexpected end of data")),
        }
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(self.err(&format!("bad flag byte {other}"))),
        }
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.err("count overflows usize"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let len =
            rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| self.err("matrix shape overflows"))?;
        let raw = self.take(len)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Matrix::from_row_slice(rows, cols, &data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> Model {
        Model {
            method: Method::Djrfdl,
            p: Matrix::from_fn(3, 2, |i, j| i as f64 - 0.5 * j as f64),
            d: Matrix::from_fn(2, 3, |i, j| 0.25 + (i + j) as f64),
            c: Some(Matrix::from_fn(3, 2, |i, j| (i * j) as f64 + 1e-300)),
            classes: Some(2),
            preprocessing: Preprocessing {
                normalize: Normalization::UnitL2,
                pca: Some(PcaBasis {
                    mean: DVector::from_vec(vec![1.0, 2.0, 3.0]),
                    basis: Matrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 }),
                }),
            },
            params: HyperParams::djrfdl(3, 2).with_seed(u64::MAX),
        }
    }

    #[test]
    fn round_trip_exact() {
        let m = sample_model();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"RFDLMODL");
        assert_eq!(Model::from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn truncation_and_garbage_rejected() {
        let bytes = sample_model().to_bytes().unwrap();
        for cut in [0, 7, 12, bytes.len() - 1] {
            assert!(Model::from_bytes(&bytes[..cut]).is_err());
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Model::from_bytes(&extra).is_err());
    }

    #[test]
    fn inconsistent_shapes_rejected() {
        let mut m = sample_model();
        m.c = Some(Matrix::zeros(2, 2));
        assert!(m.to_bytes().is_err());
    }

    #[test]
    fn method_names() {
        for m in [Method::Jrfdl, Method::Djrfdl, Method::CfBaseline] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("pca".parse::<Method>().is_err());
    }
}
