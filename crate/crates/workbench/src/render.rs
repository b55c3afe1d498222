//! PNG renderings of masks, probability fields and benchmark panels.

use std::path::Path;

use firescope_core::{BurntMask, Field};
use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::{Error, Result};

/// Pixels per grid cell in written images.
pub const SCALE: u32 = 4;
const GAP: u32 = 4;
const GAP_COLOR: Rgb<u8> = Rgb([96, 96, 96]);

pub const BURNT: Rgb<u8> = Rgb([255, 255, 255]);
pub const UNBURNT: Rgb<u8> = Rgb([0, 0, 0]);
/// Predicted burnt, actually unburnt.
pub const FALSE_POSITIVE: Rgb<u8> = Rgb([230, 40, 40]);
/// Predicted unburnt, actually burnt.
pub const FALSE_NEGATIVE: Rgb<u8> = Rgb([40, 90, 230]);

fn tile(img: &mut RgbImage, slot: u32, h: usize, w: usize, color: impl Fn(usize, usize) -> Rgb<u8>) {
    let x0 = slot * (w as u32 * SCALE + GAP);
    for r in 0..h {
        for c in 0..w {
            let px = color(r, c);
            for dy in 0..SCALE {
                for dx in 0..SCALE {
                    img.put_pixel(x0 + c as u32 * SCALE + dx, r as u32 * SCALE + dy, px);
                }
            }
        }
    }
}

fn binary(mask: &BurntMask) -> impl Fn(usize, usize) -> Rgb<u8> + '_ {
    move |r, c| if mask.get(r, c) { BURNT } else { UNBURNT }
}

/// Error overlay: agreement in white/black, false positives red, false
/// negatives blue.
pub fn error_color(pred: bool, truth: bool) -> Rgb<u8> {
    match (pred, truth) {
        (true, true) => BURNT,
        (false, false) => UNBURNT,
        (true, false) => FALSE_POSITIVE,
        (false, true) => FALSE_NEGATIVE,
    }
}

/// Four side-by-side panels: day-2 mask, true final mask, predicted mask
/// and the error overlay.
pub fn panel(day2: &BurntMask, truth: &BurntMask, pred: &BurntMask) -> Result<RgbImage> {
    let (h, w) = truth.spec().dims();
    if day2.spec().dims() != (h, w) || pred.spec().dims() != (h, w) {
        return Err(Error::Config("panel masks must share one grid".into()));
    }
    let (tw, th) = (w as u32 * SCALE, h as u32 * SCALE);
    let mut img = RgbImage::from_pixel(4 * tw + 3 * GAP, th, GAP_COLOR);
    tile(&mut img, 0, h, w, binary(day2));
    tile(&mut img, 1, h, w, binary(truth));
    tile(&mut img, 2, h, w, binary(pred));
    tile(&mut img, 3, h, w, |r, c| error_color(pred.get(r, c), truth.get(r, c)));
    Ok(img)
}

/// Probability field in gray (0 black, 1 white) next to the binary mask.
pub fn prediction_image(probability: &Field<f32>, mask: &BurntMask) -> RgbImage {
    let (h, w) = probability.dims();
    let (tw, th) = (w as u32 * SCALE, h as u32 * SCALE);
    let mut img = RgbImage::from_pixel(2 * tw + GAP, th, GAP_COLOR);
    tile(&mut img, 0, h, w, |r, c| {
        let v = (probability.get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    tile(&mut img, 1, h, w, binary(mask));
    img
}

/// Single mask, 8-bit grayscale.
pub fn mask_image(mask: &BurntMask) -> GrayImage {
    let (h, w) = mask.spec().dims();
    GrayImage::from_fn(w as u32 * SCALE, h as u32 * SCALE, |x, y| {
        Luma([if mask.get((y / SCALE) as usize, (x / SCALE) as usize) {
            255
        } else {
            0
        }])
    })
}

pub fn save_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_gray(path: &Path, img: &GrayImage) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
