//! Image-quality measures for 2D face presentation-attack detection.
//!
//! Each measure compares an input frame `I` against a low-pass reference
//! `R` (a Gaussian blur of `I`). Recaptured presentations have already lost
//! high-frequency content, so they differ from their own blurred copy far
//! less than a bona fide capture does.
//!
//! The 18 measures, in the fixed order of [`IqmVector`], with `N` the pixel
//! count, `D = I - R`, and all image operators using mirror reflection at
//! the borders:
//!
//! 1.  `MSE        = mean(D^2)`
//! 2.  `PSNR       = min(100, 10 log10(255^2 / MSE))`, `100` when `MSE = 0`
//! 3.  `SNR        = clamp(10 log10(mean(I^2) / MSE), -100, 100)`, `100`
//!     when `MSE = 0`
//! 4.  `MAXDIFF    = max |D|`
//! 5.  `AVGDIFF    = mean(D)` (signed)
//! 6.  `NAE        = sum|D| / sum|I|`
//! 7.  `RAMD       = mean of the 10 largest |D|`
//! 8.  `STRUCT_CONTENT = sum(I^2) / sum(R^2)`
//! 9.  `NXCORR     = sum(I R) / sum(I^2)`
//! 10. `LMSE       = sum((L(I) - L(R))^2) / sum(L(I)^2)` with `L` the
//!     4-neighbor Laplacian
//! 11. `NORM_MSE   = sum(D^2) / sum(I^2)`
//! 12. `SSIM_GLOBAL` over a single whole-image window with the standard
//!     constants `C1 = (0.01 * 255)^2`, `C2 = (0.03 * 255)^2`
//! 13. `MEAN_ANGLE = mean (2/pi) angle(gI, gR)` between Sobel gradient
//!     vectors, `angle = atan2(|cross|, dot)` (0 where either gradient is ~0)
//! 14. `MEAN_ANGLE_MAG = mean [1 - (1 - (2/pi) angle)(1 - min(|gI - gR| / Dmax, 1))]`
//!     with `Dmax = 2 * 1020 * sqrt(2)`, the largest possible Sobel
//!     gradient difference
//! 15. `TOTAL_EDGE_DIFF = mean |edge(I) - edge(R)|` with `edge(X) = |g X| > 2 mean(|g I|)`
//!     (both maps thresholded from the input image's mean gradient)
//! 16. `TOTAL_CORNER_DIFF = |corners(I) - corners(R)| / max(corners(I), corners(R), 1)`
//!     with Harris corners (`k = 0.04`, 3x3 box-smoothed tensor, threshold
//!     `0.01 * max(R_harris(I))`)
//! 17. `SPECTRAL_MAG_ERR = mean (|F(I)| - |F(R)|)^2` over the 2-D DFT
//!     normalized by `sqrt(N)`
//! 18. `GRAD_MAG_ERR = mean (|gI| - |gR|)^2` over Sobel magnitudes
//!
//! Every measure is finite for any input pair of equal dimensions, and
//! `compute_iqms(img, img)` yields the fixed identity vector
//! (MSE 0, PSNR 100, SNR 100, NXCORR 1, SSIM 1, ...).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::PadError;
use crate::face::FrameImage;

/// How many of the largest absolute differences RAMD averages.
const RAMD_R: usize = 10;

/// Largest possible difference between two Sobel gradient vectors of an
/// 8-bit image: each component is bounded by 4 * 255.
const ANGLE_MAG_DMAX: f64 = 2.0 * 1020.0 * std::f64::consts::SQRT_2;

const SSIM_C1: f64 = 6.5025; // (0.01 * 255)^2
const SSIM_C2: f64 = 58.5225; // (0.03 * 255)^2

/// The 18 measures in fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqmVector {
    pub mse: f64,
    pub psnr: f64,
    pub snr: f64,
    pub maxdiff: f64,
    pub avgdiff: f64,
    pub nae: f64,
    pub ramd: f64,
    pub struct_content: f64,
    pub nxcorr: f64,
    pub lmse: f64,
    pub norm_mse: f64,
    pub ssim_global: f64,
    pub mean_angle: f64,
    pub mean_angle_mag: f64,
    pub total_edge_diff: f64,
    pub total_corner_diff: f64,
    pub spectral_mag_err: f64,
    pub grad_mag_err: f64,
}

pub const IQM_DIM: usize = 18;

pub const IQM_NAMES: [&str; IQM_DIM] = [
    "mse",
    "psnr",
    "snr",
    "maxdiff",
    "avgdiff",
    "nae",
    "ramd",
    "struct_content",
    "nxcorr",
    "lmse",
    "norm_mse",
    "ssim_global",
    "mean_angle",
    "mean_angle_mag",
    "total_edge_diff",
    "total_corner_diff",
    "spectral_mag_err",
    "grad_mag_err",
];

impl IqmVector {
    pub fn to_array(&self) -> [f64; IQM_DIM] {
        [
            self.mse,
            self.psnr,
            self.snr,
            self.maxdiff,
            self.avgdiff,
            self.nae,
            self.ramd,
            self.struct_content,
            self.nxcorr,
            self.lmse,
            self.norm_mse,
            self.ssim_global,
            self.mean_angle,
            self.mean_angle_mag,
            self.total_edge_diff,
            self.total_corner_diff,
            self.spectral_mag_err,
            self.grad_mag_err,
        ]
    }
}

/// Plain grayscale plane without the FrameImage size invariant; lets the
/// operators run on arbitrary dimensions.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub w: usize,
    pub h: usize,
    pub px: Vec<f64>,
}

impl Plane {
    pub(crate) fn from_image(img: &FrameImage) -> Plane {
        Plane {
            w: img.width(),
            h: img.height(),
            px: img.pixels().to_vec(),
        }
    }

    fn at(&self, x: isize, y: isize) -> f64 {
        let x = reflect(x, self.w);
        let y = reflect(y, self.h);
        self.px[y * self.w + x]
    }
}

/// Mirror reflection about the border pixel: `-1 -> 1`, `n -> n - 2`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
        if n == 1 {
            return 0;
        }
    }
}

/// Truncated normalized Gaussian, radius `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

pub(crate) fn gaussian_blur_plane(src: &Plane, sigma: f64) -> Plane {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let mut horizontal = Plane {
        w: src.w,
        h: src.h,
        px: vec![0.0; src.w * src.h],
    };
    for y in 0..src.h {
        for x in 0..src.w {
            let mut acc = 0.0;
            for (j, kw) in kernel.iter().enumerate() {
                acc += kw * src.at(x as isize + j as isize - radius, y as isize);
            }
            horizontal.px[y * src.w + x] = acc;
        }
    }
    let mut out = Plane {
        w: src.w,
        h: src.h,
        px: vec![0.0; src.w * src.h],
    };
    for y in 0..src.h {
        for x in 0..src.w {
            let mut acc = 0.0;
            for (j, kw) in kernel.iter().enumerate() {
                acc += kw * horizontal.at(x as isize, y as isize + j as isize - radius);
            }
            out.px[y * src.w + x] = acc;
        }
    }
    out
}

/// Gaussian-blurred copy of the frame; the low-pass reference every IQM is
/// computed against.
pub fn lowpass_reference(img: &FrameImage, sigma: f64) -> FrameImage {
    let blurred = gaussian_blur_plane(&Plane::from_image(img), sigma);
    FrameImage::new(img.width(), img.height(), blurred.px)
        .expect("blur preserves dimensions and range")
}

/// Sobel gradient fields (gx, gy).
fn sobel(src: &Plane) -> (Plane, Plane) {
    let mut gx = Plane {
        w: src.w,
        h: src.h,
        px: vec![0.0; src.w * src.h],
    };
    let mut gy = Plane {
        w: src.w,
        h: src.h,
        px: vec![0.0; src.w * src.h],
    };
    for y in 0..src.h as isize {
        for x in 0..src.w as isize {
            let p = |dx: isize, dy: isize| src.at(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx.px[y as usize * src.w + x as usize] = sx;
            gy.px[y as usize * src.w + x as usize] = sy;
        }
    }
    (gx, gy)
}

/// 4-neighbor Laplacian.
fn laplacian(src: &Plane) -> Plane {
    let mut out = Plane {
        w: src.w,
        h: src.h,
        px: vec![0.0; src.w * src.h],
    };
    for y in 0..src.h as isize {
        for x in 0..src.w as isize {
            out.px[y as usize * src.w + x as usize] =
                src.at(x + 1, y) + src.at(x - 1, y) + src.at(x, y + 1) + src.at(x, y - 1)
                    - 4.0 * src.at(x, y);
        }
    }
    out
}

/// Harris corner response, `det(M) - 0.04 trace(M)^2` over a 3x3
/// box-smoothed structure tensor.
fn harris_response(src: &Plane) -> Plane {
    let (gx, gy) = sobel(src);
    let n = src.w * src.h;
    let (mut ixx, mut iyy, mut ixy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        ixx[i] = gx.px[i] * gx.px[i];
        iyy[i] = gy.px[i] * gy.px[i];
        ixy[i] = gx.px[i] * gy.px[i];
    }
    let box3 = |v: Vec<f64>| -> Plane {
        let p = Plane {
            w: src.w,
            h: src.h,
            px: v,
        };
        let mut out = Plane {
            w: src.w,
            h: src.h,
            px: vec![0.0; n],
        };
        for y in 0..src.h as isize {
            for x in 0..src.w as isize {
                let mut acc = 0.0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        acc += p.at(x + dx, y + dy);
                    }
                }
                out.px[y as usize * src.w + x as usize] = acc / 9.0;
            }
        }
        out
    };
    let (sxx, syy, sxy) = (box3(ixx), box3(iyy), box3(ixy));
    let mut r = Plane {
        w: src.w,
        h: src.h,
        px: vec![0.0; n],
    };
    for i in 0..n {
        let det = sxx.px[i] * syy.px[i] - sxy.px[i] * sxy.px[i];
        let tr = sxx.px[i] + syy.px[i];
        r.px[i] = det - 0.04 * tr * tr;
    }
    r
}

/// 2-D DFT magnitudes normalized by `sqrt(w * h)`.
fn dft2_magnitudes(src: &Plane) -> Vec<f64> {
    let (w, h) = (src.w, src.h);
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut grid: Vec<Complex<f64>> = src.px.iter().map(|&p| Complex::new(p, 0.0)).collect();
    for y in 0..h {
        row_fft.process(&mut grid[y * w..(y + 1) * w]);
    }
    let mut out = vec![Complex::new(0.0, 0.0); w * h];
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            out[y * w + x] = col[y];
        }
    }
    let norm = ((w * h) as f64).sqrt();
    out.iter().map(|c| c.norm() / norm).collect()
}

fn grad_magnitudes(gx: &Plane, gy: &Plane) -> Vec<f64> {
    gx.px
        .iter()
        .zip(&gy.px)
        .map(|(x, y)| (x * x + y * y).sqrt())
        .collect()
}

fn compute_iqms_planes(img: &Plane, reference: &Plane) -> IqmVector {
    let n = (img.w * img.h) as f64;
    let diffs: Vec<f64> = img
        .px
        .iter()
        .zip(&reference.px)
        .map(|(a, b)| a - b)
        .collect();

    let sum_sq_diff: f64 = diffs.iter().map(|d| d * d).sum();
    let sum_abs_diff: f64 = diffs.iter().map(|d| d.abs()).sum();
    let sum_i_sq: f64 = img.px.iter().map(|p| p * p).sum();
    let sum_r_sq: f64 = reference.px.iter().map(|p| p * p).sum();
    let sum_ir: f64 = img.px.iter().zip(&reference.px).map(|(a, b)| a * b).sum();
    let sum_abs_i: f64 = img.px.iter().map(|p| p.abs()).sum();

    let mse = sum_sq_diff / n;
    let psnr = if mse <= 0.0 {
        100.0
    } else {
        (10.0 * (255.0f64 * 255.0 / mse).log10()).min(100.0)
    };
    let snr = if mse <= 0.0 {
        100.0
    } else if sum_i_sq <= 0.0 {
        -100.0
    } else {
        (10.0 * ((sum_i_sq / n) / mse).log10()).clamp(-100.0, 100.0)
    };
    let maxdiff = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let avgdiff = diffs.iter().sum::<f64>() / n;
    let nae = sum_abs_diff / sum_abs_i.max(1e-12);

    let ramd = {
        let mut abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        let r = RAMD_R.min(abs.len());
        abs[..r].iter().sum::<f64>() / r as f64
    };

    let struct_content = sum_i_sq / sum_r_sq.max(1e-12);
    let nxcorr = sum_ir / sum_i_sq.max(1e-12);
    let norm_mse = sum_sq_diff / sum_i_sq.max(1e-12);

    let lmse = {
        let li = laplacian(img);
        let lr = laplacian(reference);
        let num: f64 = li
            .px
            .iter()
            .zip(&lr.px)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = li.px.iter().map(|v| v * v).sum();
        num / den.max(1e-12)
    };

    let ssim_global = {
        let mu_i = img.px.iter().sum::<f64>() / n;
        let mu_r = reference.px.iter().sum::<f64>() / n;
        let var_i = img.px.iter().map(|p| (p - mu_i) * (p - mu_i)).sum::<f64>() / n;
        let var_r = reference
            .px
            .iter()
            .map(|p| (p - mu_r) * (p - mu_r))
            .sum::<f64>()
            / n;
        let cov = img
            .px
            .iter()
            .zip(&reference.px)
            .map(|(a, b)| (a - mu_i) * (b - mu_r))
            .sum::<f64>()
            / n;
        ((2.0 * mu_i * mu_r + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mu_i * mu_i + mu_r * mu_r + SSIM_C1) * (var_i + var_r + SSIM_C2))
    };

    let (gxi, gyi) = sobel(img);
    let (gxr, gyr) = sobel(reference);
    let mag_i = grad_magnitudes(&gxi, &gyi);
    let mag_r = grad_magnitudes(&gxr, &gyr);

    let (mean_angle, mean_angle_mag) = {
        let mut angle_sum = 0.0;
        let mut am_sum = 0.0;
        for i in 0..img.px.len() {
            let dot = gxi.px[i] * gxr.px[i] + gyi.px[i] * gyr.px[i];
            let cross = gxi.px[i] * gyr.px[i] - gyi.px[i] * gxr.px[i];
            let prod = mag_i[i] * mag_r[i];
            // atan2 form is exact at zero angle, unlike acos of a rounded
            // cosine.
            let angle = if prod < 1e-12 {
                0.0
            } else {
                cross.abs().atan2(dot)
            };
            let alpha = angle * 2.0 / std::f64::consts::PI;
            let dx = gxi.px[i] - gxr.px[i];
            let dy = gyi.px[i] - gyr.px[i];
            let mag_term = ((dx * dx + dy * dy).sqrt() / ANGLE_MAG_DMAX).min(1.0);
            angle_sum += alpha;
            am_sum += 1.0 - (1.0 - alpha) * (1.0 - mag_term);
        }
        (angle_sum / n, am_sum / n)
    };

    let total_edge_diff = {
        let tau = 2.0 * mag_i.iter().sum::<f64>() / n;
        let mut differing = 0usize;
        for i in 0..mag_i.len() {
            let ei = mag_i[i] > tau;
            let er = mag_r[i] > tau;
            if ei != er {
                differing += 1;
            }
        }
        differing as f64 / n
    };

    let total_corner_diff = {
        let hi = harris_response(img);
        let hr = harris_response(reference);
        let max_hi = hi.px.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max_hi <= 0.0 {
            0.0
        } else {
            let tau = 0.01 * max_hi;
            let ci = hi.px.iter().filter(|&&v| v > tau).count();
            let cr = hr.px.iter().filter(|&&v| v > tau).count();
            (ci as f64 - cr as f64).abs() / ci.max(cr).max(1) as f64
        }
    };

    let spectral_mag_err = {
        let fi = dft2_magnitudes(img);
        let fr = dft2_magnitudes(reference);
        fi.iter()
            .zip(&fr)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n
    };

    let grad_mag_err = mag_i
        .iter()
        .zip(&mag_r)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;

    IqmVector {
        mse,
        psnr,
        snr,
        maxdiff,
        avgdiff,
        nae,
        ramd,
        struct_content,
        nxcorr,
        lmse,
        norm_mse,
        ssim_global,
        mean_angle,
        mean_angle_mag,
        total_edge_diff,
        total_corner_diff,
        spectral_mag_err,
        grad_mag_err,
    }
}

/// All 18 measures between a frame and its reference.
pub fn compute_iqms(img: &FrameImage, reference: &FrameImage) -> Result<IqmVector, PadError> {
    if img.width() != reference.width() || img.height() != reference.height() {
        return Err(PadError::DimensionMismatch {
            a_w: img.width(),
            a_h: img.height(),
            b_w: reference.width(),
            b_h: reference.height(),
        });
    }
    Ok(compute_iqms_planes(
        &Plane::from_image(img),
        &Plane::from_image(reference),
    ))
}
