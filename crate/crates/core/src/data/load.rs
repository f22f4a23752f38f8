use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::resize::{bilinear_resize, binarize};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// An image in `[0, 1]^(3 x H x W)` with its binary `1 x H x W` mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Tensor,
    pub mask: Tensor,
}

impl Sample {
    pub fn size(&self) -> (usize, usize) {
        (self.image.shape()[1], self.image.shape()[2])
    }
}

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path.clone());
        }
    }
    Ok(out)
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

fn load_pair(stem: &str, image_path: &Path, mask_path: &Path) -> Result<Sample> {
    let rgb = decode(image_path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let (w, h) = (w as usize, h as usize);
    let mut image = vec![0.0; 3 * h * w];
    for (x, y, px) in rgb.enumerate_pixels() {
        for c in 0..3 {
            image[(c * h + y as usize) * w + x as usize] = f64::from(px[c]) / 255.0;
        }
    }
    let luma = decode(mask_path)?.to_luma8();
    if luma.dimensions() != (w as u32, h as u32) {
        return Err(Error::Ingestion(format!(
            "{stem}: image is {w}x{h} but mask is {}x{}",
            luma.width(),
            luma.height()
        )));
    }
    let mask = Tensor::new(vec![1, h, w], luma.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect())?;
    Ok(Sample { id: stem.to_string(), image: Tensor::new(vec![3, h, w], image)?, mask: binarize(&mask, 0.5) })
}

/// Loads every image in `images_dir` with the same-stem mask from
/// `masks_dir`, in lexicographic stem order.
pub fn load_dataset(images_dir: &Path, masks_dir: &Path) -> Result<Vec<Sample>> {
    let images = images_by_stem(images_dir)?;
    let masks = images_by_stem(masks_dir)?;
    let missing: Vec<&str> = images.keys().filter(|s| !masks.contains_key(*s)).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(Error::Ingestion(format!("no mask for image stem(s): {}", missing.join(", "))));
    }
    images.par_iter().map(|(stem, path)| load_pair(stem, path, &masks[stem])).collect()
}

/// Bilinear-resizes image and mask to `size x size`; the mask is
/// re-binarized at 0.5.
pub fn resize_sample(sample: &Sample, size: usize) -> Result<Sample> {
    Ok(Sample {
        id: sample.id.clone(),
        image: bilinear_resize(&sample.image, size, size)?,
        mask: binarize(&bilinear_resize(&sample.mask, size, size)?, 0.5),
    })
}
