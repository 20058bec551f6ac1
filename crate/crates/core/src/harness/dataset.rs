//! Labeled image corpora: a directory with `labels.csv` plus PPM or SBT1 images.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::container::read_tensor;
use crate::error::{Error, Result};
use crate::ndnum::ImageTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub image: ImageTensor,
    pub label: usize,
}

/// Images sharing one shape, with labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    items: Vec<LabeledImage>,
    num_classes: usize,
}

impl LabeledDataset {
    /// `num_classes` defaults to `max label + 1`.
    pub fn new(items: Vec<LabeledImage>, num_classes: Option<usize>) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Dataset("dataset is empty".into()))?;
        let shape = first.image.shape();
        let max_label = items.iter().map(|it| it.label).max().unwrap_or(0);
        let num_classes = num_classes.unwrap_or(max_label + 1);
        if num_classes < 2 {
            return Err(Error::Dataset(format!("need at least 2 classes, got {num_classes}")));
        }
        for it in &items {
            if it.label >= num_classes {
                return Err(Error::Dataset(format!(
                    "{}: label {} is not below the class count {num_classes}",
                    it.id, it.label
                )));
            }
            if it.image.shape() != shape {
                return Err(Error::Dataset(format!(
                    "{}: shape {:?} differs from {:?}",
                    it.id,
                    it.image.shape(),
                    shape
                )));
            }
        }
        Ok(Self { items, num_classes })
    }

    /// Reads `<dir>/labels.csv` (`<filename>,<class-index>` rows) and the images it names.
    ///
    /// Blank lines and lines starting with `#` are ignored, as is a first row
    /// whose label column is not an integer.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let csv_path = dir.join("labels.csv");
        let text = std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut items = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, label) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::Dataset(format!("labels.csv:{}: expected '<file>,<class>'", lineno + 1)))?;
            let label = match label.trim().parse::<usize>() {
                Ok(l) => l,
                Err(_) if items.is_empty() && lineno == 0 => continue,
                Err(_) => {
                    return Err(Error::Dataset(format!(
                        "labels.csv:{}: bad class index '{}'",
                        lineno + 1,
                        label.trim()
                    )))
                }
            };
            let name = name.trim();
            let image = load_image(&dir.join(name))?;
            items.push(LabeledImage {
                id: name.to_owned(),
                image,
                label,
            });
        }
        Self::new(items, None)
    }

    pub fn items(&self) -> &[LabeledImage] {
        &self.items
    }

    pub fn get(&self, i: usize) -> &LabeledImage {
        &self.items[i]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `[C, H, W]` shared by every image.
    pub fn image_shape(&self) -> [usize; 3] {
        let (c, h, w) = self.items[0].image.shape();
        [c, h, w]
    }

    /// Number of items per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for it in &self.items {
            counts[it.label] += 1;
        }
        counts
    }

    /// Uniform-noise images, `per_class` for each class, ids `img_<index>.ppm`.
    pub fn synthetic(seed: u64, classes: usize, per_class: usize, shape: [usize; 3]) -> Result<Self> {
        let [c, h, w] = shape;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::with_capacity(classes * per_class);
        for label in 0..classes {
            for _ in 0..per_class {
                let data = (0..c * h * w).map(|_| rng.gen::<f64>()).collect();
                items.push(LabeledImage {
                    id: format!("img_{:04}.ppm", items.len()),
                    image: ImageTensor::new(c, h, w, data)?,
                    label,
                });
            }
        }
        Self::new(items, Some(classes))
    }
}

/// Loads a `.ppm` (binary P6) or `.sbt` (rank-3 SBT1) image.
pub fn load_image(path: &Path) -> Result<ImageTensor> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("ppm") => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_ppm(&bytes).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
        }
        Some("sbt") => read_tensor(path)?.into_image(),
        _ => Err(Error::Dataset(format!(
            "{}: unsupported image extension (expected .ppm or .sbt)",
            path.display()
        ))),
    }
}

/// Binary P6 PPM to a `3×H×W` tensor with samples divided by maxval.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageTensor> {
    let mut pos = 0;
    let mut token = || -> Result<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("PPM", None, "truncated header"));
        }
        Ok(&bytes[start..pos])
    };
    if token()? != b"P6" {
        return Err(Error::format("PPM", None, "not a binary P6 file"));
    }
    let mut number = |what: &str| -> Result<usize> {
        std::str::from_utf8(token()?)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PPM", None, format!("bad {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            "PPM",
            None,
            format!("maxval {maxval} is not an 8-bit depth"),
        ));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    let raster = bytes
        .get(pos..pos + 3 * n)
        .ok_or_else(|| Error::format("PPM", None, "raster shorter than width×height×3"))?;
    let scale = maxval as f64;
    let mut data = vec![0.0; 3 * n];
    for (p, rgb) in raster.chunks_exact(3).enumerate() {
        for (c, &v) in rgb.iter().enumerate() {
            data[c * n + p] = f64::from(v) / scale;
        }
    }
    ImageTensor::new(3, height, width, data)
}

/// Encodes a 3-channel image as P6 with maxval 255, clamping to `[0, 1]`.
pub fn encode_ppm(image: &ImageTensor) -> Result<Vec<u8>> {
    let (c, h, w) = image.shape();
    if c != 3 {
        return Err(Error::shape("3 channels", c));
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let n = h * w;
    let data = image.data();
    for p in 0..n {
        for ch in 0..3 {
            out.push((data[ch * n + p].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip_is_exact_on_8bit_values() {
        let img = ImageTensor::from_fn(3, 2, 3, |c, i, j| ((c * 31 + i * 7 + j * 50) % 256) as f64 / 255.0).unwrap();
        let bytes = encode_ppm(&img).unwrap();
        assert_eq!(decode_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn ppm_header_comments_and_errors() {
        let mut bytes = b"P6 # comment\n1 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 51]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0, 0.2]);
        assert!(decode_ppm(b"P3\n1 1\n255\n").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\x00\x00").is_err());
        assert!(decode_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").is_err());
    }

    #[test]
    fn load_dir_reads_labels_and_images() {
        let dir = tempfile::tempdir().unwrap();
        let ds = LabeledDataset::synthetic(3, 2, 2, [3, 4, 4]).unwrap();
        let mut csv = String::from("file,class\n");
        for it in ds.items() {
            std::fs::write(dir.path().join(&it.id), encode_ppm(&it.image).unwrap()).unwrap();
            csv.push_str(&format!("{},{}\n", it.id, it.label));
        }
        std::fs::write(dir.path().join("labels.csv"), csv).unwrap();
        let loaded = LabeledDataset::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 4);
        assert_eq!(loaded.num_classes(), 2);
        assert_eq!(loaded.class_counts(), vec![2, 2]);
        for (a, b) in loaded.items().iter().zip(ds.items()) {
            assert!(a.image.max_abs_diff(&b.image).unwrap() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn rejects_single_class_and_mixed_shapes() {
        let img = |h| ImageTensor::zeros(1, h, 4);
        let item = |id: &str, h, label| LabeledImage {
            id: id.into(),
            image: img(h),
            label,
        };
        assert!(LabeledDataset::new(vec![item("a", 4, 0), item("b", 4, 0)], None).is_err());
        assert!(LabeledDataset::new(vec![item("a", 4, 0), item("b", 5, 1)], None).is_err());
        assert!(LabeledDataset::new(vec![item("a", 4, 0), item("b", 4, 3)], Some(2)).is_err());
        assert!(LabeledDataset::new(vec![], None).is_err());
    }
}
