use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndnum::ImageTensor;

/// Dense row-major `f64` array with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                format!("{expected} values for shape {shape:?}"),
                data.len(),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Interprets a rank-3 tensor as `C×H×W` (rank 2 as a single channel).
    pub fn into_image(self) -> Result<ImageTensor> {
        match self.shape[..] {
            [c, h, w] => ImageTensor::new(c, h, w, self.data),
            [h, w] => ImageTensor::new(1, h, w, self.data),
            _ => Err(Error::shape(
                "rank 2 or 3 image tensor",
                format!("shape {:?}", self.shape),
            )),
        }
    }
}

impl From<&ImageTensor> for Tensor {
    fn from(img: &ImageTensor) -> Self {
        let (c, h, w) = img.shape();
        Tensor {
            shape: vec![c, h, w],
            data: img.data().to_vec(),
        }
    }
}
