//! Seeded image augmentation and propagation of MDS labels to the variants.
//!
//! Transforms run in a fixed order, each gated by its own probability:
//! flip → affine → crop → blur → contrast/brightness → Gaussian noise →
//! salt-and-pepper. Geometry uses bilinear resampling with reflect padding, and
//! every output has the input's dimensions. Intermediate values stay in `f64`
//! and are rounded to 8 bits once at the end.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Embedding, StimulusId};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{Seed, SimRng};

/// 8-bit RGB, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        let want = 3 * width as usize * height as usize;
        if pixels.len() != want {
            return Err(Error::Image(format!(
                "pixel buffer has {} bytes, expected {want}",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(3 * width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Inclusive `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn symmetric(max: f64, rng: &mut SimRng) -> f64 {
        if max > 0.0 {
            rng.random_range(-max..=max)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffineSpec {
    pub max_rotation_deg: f64,
    pub max_shear_deg: f64,
    /// Fraction of width/height.
    pub max_translate: f64,
    pub scale: Range,
}

impl Default for AffineSpec {
    fn default() -> Self {
        AffineSpec {
            max_rotation_deg: 15.0,
            max_shear_deg: 8.0,
            max_translate: 0.05,
            scale: Range::new(0.9, 1.1),
        }
    }
}

/// Probability that each transform (other than the flip) is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApplyProbabilities {
    pub affine: f64,
    pub crop: f64,
    pub blur: f64,
    pub color: f64,
    pub gauss_noise: f64,
    pub salt_pepper: f64,
}

impl Default for ApplyProbabilities {
    fn default() -> Self {
        ApplyProbabilities {
            affine: 0.5,
            crop: 0.5,
            blur: 0.5,
            color: 0.5,
            gauss_noise: 0.5,
            salt_pepper: 0.5,
        }
    }
}

impl ApplyProbabilities {
    pub const NONE: ApplyProbabilities = ApplyProbabilities {
        affine: 0.0,
        crop: 0.0,
        blur: 0.0,
        color: 0.0,
        gauss_noise: 0.0,
        salt_pepper: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    pub flip_prob: f64,
    /// Side length of the crop window as a fraction of the image side.
    pub crop_fraction: Range,
    /// Gaussian blur sigma in pixels.
    pub blur_sigma: Range,
    /// Multiplicative contrast factor around the image mean.
    pub contrast: Range,
    /// Additive brightness shift as a fraction of full scale (255).
    pub brightness: Range,
    /// Additive noise stddev in intensity units.
    pub gauss_noise_sigma: f64,
    pub affine: AffineSpec,
    /// Fraction of pixels set to black or white.
    pub salt_pepper_fraction: f64,
    pub probabilities: ApplyProbabilities,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            flip_prob: 0.5,
            crop_fraction: Range::new(0.85, 1.0),
            blur_sigma: Range::new(0.0, 1.5),
            contrast: Range::new(0.8, 1.2),
            brightness: Range::new(-0.1, 0.1),
            gauss_noise_sigma: 0.02 * 255.0,
            affine: AffineSpec::default(),
            salt_pepper_fraction: 0.01,
            probabilities: ApplyProbabilities::default(),
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {p}")))
    }
}

fn check_range(name: &str, r: Range) -> Result<()> {
    if r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} range [{}, {}] is not well-ordered",
            r.lo, r.hi
        )))
    }
}

impl AugmentSpec {
    /// Every probability zero: the pipeline returns its input unchanged.
    pub fn identity() -> Self {
        AugmentSpec {
            flip_prob: 0.0,
            probabilities: ApplyProbabilities::NONE,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("flip_prob", self.flip_prob)?;
        let p = &self.probabilities;
        for (name, v) in [
            ("affine probability", p.affine),
            ("crop probability", p.crop),
            ("blur probability", p.blur),
            ("color probability", p.color),
            ("noise probability", p.gauss_noise),
            ("salt-pepper probability", p.salt_pepper),
            ("salt_pepper_fraction", self.salt_pepper_fraction),
        ] {
            check_prob(name, v)?;
        }
        check_range("crop_fraction", self.crop_fraction)?;
        if self.crop_fraction.lo <= 0.0 || self.crop_fraction.hi > 1.0 {
            return Err(Error::InvalidConfig(
                "crop_fraction must lie in (0, 1]".into(),
            ));
        }
        check_range("blur_sigma", self.blur_sigma)?;
        if self.blur_sigma.lo < 0.0 {
            return Err(Error::InvalidConfig("blur_sigma must be >= 0".into()));
        }
        check_range("contrast", self.contrast)?;
        check_range("brightness", self.brightness)?;
        check_range("affine scale", self.affine.scale)?;
        if self.affine.scale.lo <= 0.0 {
            return Err(Error::InvalidConfig("affine scale must be > 0".into()));
        }
        if self.gauss_noise_sigma.is_nan() || self.gauss_noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("gauss_noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Planar float working copy: `[c][y][x]`.
struct Planes {
    w: usize,
    h: usize,
    data: [Vec<f64>; 3],
}

impl Planes {
    fn from_image(img: &RasterImage) -> Self {
        let (w, h) = (img.width as usize, img.height as usize);
        let mut data = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
        for (i, px) in img.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c][i] = f64::from(px[c]);
            }
        }
        Planes { w, h, data }
    }

    fn into_image(self) -> RasterImage {
        let mut pixels = Vec::with_capacity(3 * self.w * self.h);
        for i in 0..self.w * self.h {
            for c in 0..3 {
                pixels.push(self.data[c][i].round().clamp(0.0, 255.0) as u8);
            }
        }
        RasterImage {
            width: self.w as u32,
            height: self.h as u32,
            pixels,
        }
    }

    /// Bilinear sample at continuous pixel-centre coordinates with reflect padding.
    fn sample(&self, c: usize, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let at = |xi: isize, yi: isize| {
            let xr = reflect(xi, self.w);
            let yr = reflect(yi, self.h);
            self.data[c][yr * self.w + xr]
        };
        let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
        let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn remap(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Planes {
        let mut out = Planes {
            w: self.w,
            h: self.h,
            data: [
                vec![0.0; self.w * self.h],
                vec![0.0; self.w * self.h],
                vec![0.0; self.w * self.h],
            ],
        };
        for y in 0..self.h {
            for x in 0..self.w {
                let (sx, sy) = f(x as f64, y as f64);
                for c in 0..3 {
                    out.data[c][y * self.w + x] = self.sample(c, sx, sy);
                }
            }
        }
        out
    }
}

/// Half-sample symmetric reflection: `… 1 0 | 0 1 2 … n−1 | n−1 n−2 …`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn flip(p: &mut Planes) {
    for plane in &mut p.data {
        for row in plane.chunks_exact_mut(p.w) {
            row.reverse();
        }
    }
}

fn affine(p: &Planes, spec: &AffineSpec, rng: &mut SimRng) -> Planes {
    let theta = Range::symmetric(spec.max_rotation_deg, rng).to_radians();
    let shear = Range::symmetric(spec.max_shear_deg, rng).to_radians();
    let tx = Range::symmetric(spec.max_translate, rng) * p.w as f64;
    let ty = Range::symmetric(spec.max_translate, rng) * p.h as f64;
    let scale = spec.scale.sample(rng);

    // Forward map about the centre: q = s · R(θ) · Sh(shear) · (p − c) + c + t.
    let (sin, cos) = theta.sin_cos();
    let k = shear.tan();
    let m = [
        [scale * cos, scale * (cos * k - sin)],
        [scale * sin, scale * (sin * k + cos)],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    let cx = (p.w as f64 - 1.0) / 2.0;
    let cy = (p.h as f64 - 1.0) / 2.0;
    p.remap(|x, y| {
        let dx = x - cx - tx;
        let dy = y - cy - ty;
        (
            inv[0][0] * dx + inv[0][1] * dy + cx,
            inv[1][0] * dx + inv[1][1] * dy + cy,
        )
    })
}

fn crop(p: &Planes, fraction: f64, rng: &mut SimRng) -> Result<Planes> {
    let cw = (fraction * p.w as f64).round();
    let ch = (fraction * p.h as f64).round();
    if cw < 1.0 || ch < 1.0 {
        return Err(Error::EmptyCrop(fraction));
    }
    let x0 = rng.random_range(0.0..=(p.w as f64 - cw));
    let y0 = rng.random_range(0.0..=(p.h as f64 - ch));
    let sx = cw / p.w as f64;
    let sy = ch / p.h as f64;
    Ok(p.remap(|x, y| {
        (
            x0 + (x + 0.5) * sx - 0.5,
            y0 + (y + 0.5) * sy - 0.5,
        )
    }))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur(p: &mut Planes, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (p.w, p.h);
    for plane in &mut p.data {
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * plane[y * w + reflect(x as isize + i as isize - r, w)])
                    .sum();
            }
        }
        for y in 0..h {
            for x in 0..w {
                plane[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * tmp[reflect(y as isize + i as isize - r, h) * w + x])
                    .sum();
            }
        }
    }
}

fn color(p: &mut Planes, contrast: f64, brightness: f64) {
    let n = (3 * p.w * p.h) as f64;
    let mean = p.data.iter().flatten().sum::<f64>() / n;
    let shift = brightness * 255.0;
    for v in p.data.iter_mut().flatten() {
        *v = ((*v - mean) * contrast + mean + shift).clamp(0.0, 255.0);
    }
}

fn gauss_noise(p: &mut Planes, sigma: f64, rng: &mut SimRng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and > 0");
    for i in 0..p.w * p.h {
        for c in 0..3 {
            p.data[c][i] = (p.data[c][i] + normal.sample(rng)).clamp(0.0, 255.0);
        }
    }
}

/// Hits whole pixels: all three channels become 0 or all become 255.
fn salt_pepper(p: &mut Planes, fraction: f64, rng: &mut SimRng) {
    for i in 0..p.w * p.h {
        if rng.random::<f64>() < fraction {
            let v = if rng.random::<bool>() { 255.0 } else { 0.0 };
            for c in 0..3 {
                p.data[c][i] = v;
            }
        }
    }
}

fn gate(p: f64, rng: &mut SimRng) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

pub fn augment_image(img: &RasterImage, spec: &AugmentSpec, seed: Seed) -> Result<RasterImage> {
    spec.validate()?;
    let mut rng = seed.rng();
    let probs = &spec.probabilities;
    let mut planes = Planes::from_image(img);

    if gate(spec.flip_prob, &mut rng) {
        flip(&mut planes);
    }
    if gate(probs.affine, &mut rng) {
        planes = affine(&planes, &spec.affine, &mut rng);
    }
    if gate(probs.crop, &mut rng) {
        let f = spec.crop_fraction.sample(&mut rng);
        planes = crop(&planes, f, &mut rng)?;
    }
    if gate(probs.blur, &mut rng) {
        let s = spec.blur_sigma.sample(&mut rng);
        blur(&mut planes, s);
    }
    if gate(probs.color, &mut rng) {
        let c = spec.contrast.sample(&mut rng);
        let b = spec.brightness.sample(&mut rng);
        color(&mut planes, c, b);
    }
    if gate(probs.gauss_noise, &mut rng) {
        gauss_noise(&mut planes, spec.gauss_noise_sigma, &mut rng);
    }
    if gate(probs.salt_pepper, &mut rng) {
        salt_pepper(&mut planes, spec.salt_pepper_fraction, &mut rng);
    }
    Ok(planes.into_image())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedItem {
    pub item_id: String,
    pub group_id: StimulusId,
    pub image: RasterImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub items: Vec<AugmentedItem>,
    pub factor: usize,
}

pub fn variant_id(stimulus: &StimulusId, k: usize) -> String {
    format!("{stimulus}#{k}")
}

/// `factor` variants of every original, each seeded by `seed.derive(item_id)`.
/// Items are ordered by stimulus id, then variant index.
pub fn augment_dataset(
    originals: &BTreeMap<StimulusId, RasterImage>,
    factor: usize,
    spec: &AugmentSpec,
    seed: Seed,
) -> Result<AugmentedDataset> {
    if factor == 0 {
        return Err(Error::InvalidConfig("factor must be >= 1".into()));
    }
    spec.validate()?;
    let jobs: Vec<(&StimulusId, &RasterImage, usize)> = originals
        .iter()
        .flat_map(|(id, img)| (0..factor).map(move |k| (id, img, k)))
        .collect();
    let items = par::map(jobs, |(id, img, k)| {
        let item_id = variant_id(id, k);
        augment_image(img, spec, seed.derive(&item_id)).map(|image| AugmentedItem {
            item_id,
            group_id: id.clone(),
            image,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedDataset { items, factor })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedLabels {
    /// `(item_id, target)` in dataset order.
    pub items: Vec<(String, Vec<f64>)>,
    /// One point per group: the join map used by `LabeledDataset`.
    pub groups: BTreeMap<StimulusId, Vec<f64>>,
}

/// Gives every variant the MDS point of the original it was made from.
pub fn propagate_labels(
    dataset: &AugmentedDataset,
    embedding: &Embedding,
) -> Result<PropagatedLabels> {
    let mut groups = BTreeMap::new();
    let mut items = Vec::with_capacity(dataset.items.len());
    for item in &dataset.items {
        let point = match groups.get(&item.group_id) {
            Some(p) => Vec::clone(p),
            None => {
                let p = embedding
                    .point_of(item.group_id.as_str())
                    .ok_or_else(|| Error::UnknownGroup(item.group_id.to_string()))?;
                groups.insert(item.group_id.clone(), p.clone());
                p
            }
        };
        items.push((item.item_id.clone(), point));
    }
    Ok(PropagatedLabels { items, groups })
}

#[cfg(feature = "png")]
pub mod png {
    //! PNG input/output and on-disk dataset layout.

    use std::path::{Path, PathBuf};

    use super::*;
    use crate::io::{write_manifest, ManifestEntry};

    pub fn load_png(path: impl AsRef<Path>) -> Result<RasterImage> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        RasterImage::new(w, h, img.into_raw())
    }

    pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        image::save_buffer(
            path,
            img.pixels(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    /// Every `*.png` in `dir`, keyed by file stem.
    pub fn load_image_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<StimulusId, RasterImage>> {
        let dir = dir.as_ref();
        let mut out = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let is_png = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if !is_png {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Image(format!("bad file name {}", path.display())))?;
            out.insert(StimulusId::new(stem)?, load_png(&path)?);
        }
        if out.is_empty() {
            return Err(Error::MissingInput(format!("no PNG files in {}", dir.display())));
        }
        Ok(out)
    }

    /// Writes `<out>/<group>/<group>_<k>.png` per item plus `<out>/manifest.csv`
    /// with paths relative to `out`.
    pub fn write_dataset(dataset: &AugmentedDataset, out: impl AsRef<Path>) -> Result<PathBuf> {
        let out = out.as_ref();
        let mut entries = Vec::with_capacity(dataset.items.len());
        for item in &dataset.items {
            let rel = PathBuf::from(item.group_id.as_str())
                .join(format!("{}.png", item.item_id.replace('#', "_")));
            save_png(&item.image, out.join(&rel))?;
            entries.push(ManifestEntry {
                item_id: item.item_id.clone(),
                group_id: item.group_id.clone(),
                file_path: rel.to_string_lossy().into_owned(),
            });
        }
        let manifest = out.join("manifest.csv");
        write_manifest(&entries, &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::numbered_ids;
    use nalgebra::DMatrix;

    fn gradient(w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            [(x * 17 % 256) as u8, (y * 29 % 256) as u8, ((x + y) * 7 % 256) as u8]
        })
        .unwrap()
    }

    #[test]
    fn identity_spec_is_identity() {
        let img = gradient(13, 9);
        let out = augment_image(&img, &AugmentSpec::identity(), Seed(4)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn flip_is_an_involution() {
        let img = gradient(10, 7);
        let spec = AugmentSpec {
            flip_prob: 1.0,
            ..AugmentSpec::identity()
        };
        let once = augment_image(&img, &spec, Seed(1)).unwrap();
        assert_eq!(once.pixel(0, 3), img.pixel(9, 3));
        assert_ne!(once, img);
        assert_eq!(augment_image(&once, &spec, Seed(2)).unwrap(), img);
    }

    #[test]
    fn full_salt_pepper_saturates() {
        let spec = AugmentSpec {
            salt_pepper_fraction: 1.0,
            probabilities: ApplyProbabilities {
                salt_pepper: 1.0,
                ..ApplyProbabilities::NONE
            },
            ..AugmentSpec::identity()
        };
        let out = augment_image(&gradient(16, 16), &spec, Seed(3)).unwrap();
        for px in out.pixels().chunks_exact(3) {
            assert!(px == [0, 0, 0] || px == [255, 255, 255]);
        }
    }

    #[test]
    fn every_transform_preserves_dimensions() {
        let spec = AugmentSpec {
            flip_prob: 1.0,
            probabilities: ApplyProbabilities {
                affine: 1.0,
                crop: 1.0,
                blur: 1.0,
                color: 1.0,
                gauss_noise: 1.0,
                salt_pepper: 1.0,
            },
            ..Default::default()
        };
        for (w, h) in [(1, 1), (2, 5), (31, 17)] {
            let out = augment_image(&gradient(w, h), &spec, Seed(w as u64)).unwrap();
            assert_eq!((out.width(), out.height()), (w, h));
        }
    }

    #[test]
    fn zero_size_crop_is_an_error() {
        let spec = AugmentSpec {
            crop_fraction: Range::new(0.1, 0.1),
            probabilities: ApplyProbabilities {
                crop: 1.0,
                ..ApplyProbabilities::NONE
            },
            ..AugmentSpec::identity()
        };
        let err = augment_image(&gradient(3, 3), &spec, Seed(0)).unwrap_err();
        assert!(matches!(err, Error::EmptyCrop(_)));
    }

    #[test]
    fn full_crop_and_zero_blur_are_exact() {
        let spec = AugmentSpec {
            crop_fraction: Range::new(1.0, 1.0),
            blur_sigma: Range::new(0.0, 0.0),
            probabilities: ApplyProbabilities {
                crop: 1.0,
                blur: 1.0,
                ..ApplyProbabilities::NONE
            },
            ..AugmentSpec::identity()
        };
        let img = gradient(8, 6);
        assert_eq!(augment_image(&img, &spec, Seed(0)).unwrap(), img);
    }

    #[test]
    fn blur_preserves_flat_images() {
        let flat = RasterImage::from_fn(9, 9, |_, _| [100, 150, 200]).unwrap();
        let spec = AugmentSpec {
            blur_sigma: Range::new(1.5, 1.5),
            probabilities: ApplyProbabilities {
                blur: 1.0,
                ..ApplyProbabilities::NONE
            },
            ..AugmentSpec::identity()
        };
        assert_eq!(augment_image(&flat, &spec, Seed(0)).unwrap(), flat);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let spec = AugmentSpec {
            flip_prob: 1.5,
            ..Default::default()
        };
        assert!(augment_image(&gradient(2, 2), &spec, Seed(0)).is_err());
        let spec = AugmentSpec {
            contrast: Range::new(1.2, 0.8),
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn reflect_indexing() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-1, 1), 0);
    }

    fn originals(n: usize) -> BTreeMap<StimulusId, RasterImage> {
        numbered_ids("s", n)
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, gradient(6 + i as u32, 5)))
            .collect()
    }

    #[test]
    fn dataset_counts_and_ids() {
        let ds = augment_dataset(&originals(2), 5, &AugmentSpec::default(), Seed(8)).unwrap();
        assert_eq!(ds.items.len(), 10);
        for g in ["s0", "s1"] {
            let ids: Vec<&str> = ds
                .items
                .iter()
                .filter(|i| i.group_id.as_str() == g)
                .map(|i| i.item_id.as_str())
                .collect();
            assert_eq!(ids, (0..5).map(|k| format!("{g}#{k}")).collect::<Vec<_>>());
        }
    }

    #[test]
    fn factor_one_identity_reproduces_originals() {
        let orig = originals(3);
        let ds = augment_dataset(&orig, 1, &AugmentSpec::identity(), Seed(0)).unwrap();
        for item in &ds.items {
            assert_eq!(&item.image, &orig[&item.group_id]);
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let orig = originals(3);
        let a = augment_dataset(&orig, 4, &AugmentSpec::default(), Seed(11)).unwrap();
        let b = augment_dataset(&orig, 4, &AugmentSpec::default(), Seed(11)).unwrap();
        assert_eq!(a, b);
        let c = augment_dataset(&orig, 4, &AugmentSpec::default(), Seed(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_follow_groups() {
        let orig = originals(2);
        let ds = augment_dataset(&orig, 3, &AugmentSpec::default(), Seed(1)).unwrap();
        let emb = Embedding::new(
            numbered_ids("s", 2),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            0.0,
        )
        .unwrap();
        let labels = propagate_labels(&ds, &emb).unwrap();
        assert_eq!(labels.items.len(), 6);
        for ((id, t), item) in labels.items.iter().zip(&ds.items) {
            assert_eq!(id, &item.item_id);
            let want = if item.group_id.as_str() == "s0" { [0.0, 1.0] } else { [1.0, 0.0] };
            assert_eq!(t.as_slice(), want);
        }

        let partial = Embedding::new(
            numbered_ids("s", 1),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            0.0,
        )
        .unwrap();
        let err = propagate_labels(&ds, &partial).unwrap_err();
        assert!(matches!(err, Error::UnknownGroup(g) if g == "s1"));
    }
}
