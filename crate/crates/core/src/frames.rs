//! Grayscale frame sequences, binary PGM files and background subtraction.
//!
//! A sequence of `h × w` frames is stored as a `(h·w) × frames` matrix,
//! one frame per column, pixels in row-major order.

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, orthonormal_range, select_rows, DEFAULT_RANK_TOL};
use crate::pipelines::{decompose_informative, InformativeConfig};
use crate::sampling::uniform_indices;
use crate::solvers::{l1_fit, L1Config};
use crate::IndexSet;
use nalgebra::DMatrix;
use rand::Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Equal-shape grayscale frames with pixel values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: DMatrix<f64>,
    height: usize,
    width: usize,
}

impl FrameSequence {
    /// Wraps a `(height·width) × count` matrix after checking shape and range.
    pub fn new(frames: DMatrix<f64>, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::precondition("frames must have positive height and width"));
        }
        if frames.nrows() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels per column, expected {height}×{width}",
                frames.nrows()
            )));
        }
        if let Some(v) = frames.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::precondition(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(FrameSequence { frames, height, width })
    }

    /// Builds a sequence from 8-bit images of equal size.
    pub fn from_images(images: &[Vec<u8>], height: usize, width: usize) -> Result<Self> {
        let pixels = height * width;
        if let Some(k) = images.iter().position(|im| im.len() != pixels) {
            return Err(Error::ShapeMismatch(format!(
                "frame {k} has {} pixels, expected {height}×{width}",
                images[k].len()
            )));
        }
        let frames = DMatrix::from_fn(pixels, images.len(), |i, k| images[k][i] as f64);
        FrameSequence::new(frames, height, width)
    }

    /// Reads every `.pgm` file of a directory in file-name order.
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::precondition(format!(
                "no .pgm files in {}",
                dir.as_ref().display()
            )));
        }
        let mut images = Vec::with_capacity(paths.len());
        let mut shape = None;
        for p in &paths {
            let img = read_pgm(BufReader::new(File::open(p)?))?;
            match shape {
                None => shape = Some((img.height, img.width)),
                Some(s) if s != (img.height, img.width) => {
                    return Err(Error::ShapeMismatch(format!(
                        "{} is {}×{}, expected {}×{}",
                        p.display(),
                        img.height,
                        img.width,
                        s.0,
                        s.1
                    )))
                }
                Some(_) => {}
            }
            images.push(img.pixels);
        }
        let (h, w) = shape.expect("at least one frame");
        FrameSequence::from_images(&images, h, w)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.frames.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.ncols() == 0
    }
}

/// One 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    /// Row-major pixels.
    pub pixels: Vec<u8>,
}

fn header_token<R: Read>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return if tok.is_empty() {
                Err(Error::Parse("truncated PGM header".into()))
            } else {
                Ok(tok)
            };
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            // comment runs to end of line
            while r.read(&mut byte)? == 1 && byte[0] != b'\n' {}
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            return Ok(tok);
        }
        tok.push(c as char);
    }
}

fn header_number<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let tok = header_token(r)?;
    tok.parse()
        .map_err(|_| Error::Parse(format!("bad PGM {what} '{tok}'")))
}

/// Reads a binary (P5) PGM with `maxval ≤ 255`. Values are rescaled to
/// `[0, 255]` when `maxval < 255`.
pub fn read_pgm<R: Read>(mut r: R) -> Result<GrayImage> {
    if header_token(&mut r)? != "P5" {
        return Err(Error::Parse("not a binary PGM (P5)".into()));
    }
    let width = header_number(&mut r, "width")?;
    let height = header_number(&mut r, "height")?;
    let maxval = header_number(&mut r, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse("PGM with zero size".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
    }
    let mut pixels = vec![0u8; width * height];
    r.read_exact(&mut pixels)?;
    if maxval < 255 {
        for p in pixels.iter_mut() {
            *p = ((*p as usize).min(maxval) * 255 / maxval) as u8;
        }
    }
    Ok(GrayImage { height, width, pixels })
}

pub fn write_pgm<W: Write>(mut w: W, img: &GrayImage) -> Result<()> {
    if img.pixels.len() != img.height * img.width {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels for {}×{}",
            img.pixels.len(),
            img.height,
            img.width
        )));
    }
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.pixels)?;
    w.flush()?;
    Ok(())
}

/// Rounds and clamps one column of pixel values to an 8-bit image.
pub fn column_image(values: &DMatrix<f64>, col: usize, height: usize, width: usize) -> GrayImage {
    let pixels = values
        .column(col)
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage { height, width, pixels }
}

/// Writes every column as `{prefix}_{k:04}.pgm` in `dir`.
pub fn write_frames(
    dir: impl AsRef<Path>,
    prefix: &str,
    values: &DMatrix<f64>,
    height: usize,
    width: usize,
) -> Result<()> {
    if values.nrows() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels per column, expected {height}×{width}",
            values.nrows()
        )));
    }
    std::fs::create_dir_all(dir.as_ref())?;
    for k in 0..values.ncols() {
        let path = dir.as_ref().join(format!("{prefix}_{k:04}.pgm"));
        write_pgm(BufWriter::new(File::create(path)?), &column_image(values, k, height, width))?;
    }
    Ok(())
}

/// Static textured background under slowly varying illumination with a
/// bright square moving across it.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub frames: FrameSequence,
    /// Background-only frames under other illumination levels.
    pub background: FrameSequence,
    /// Background of every frame without the square.
    pub clean: DMatrix<f64>,
    /// 1 on pixels covered by the square, 0 elsewhere.
    pub mask: DMatrix<f64>,
}

/// Generates a scene of `count` frames with a `square × square` object of
/// intensity 255 and `n_background` background-only frames.
pub fn synthetic_scene<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    count: usize,
    n_background: usize,
    square: usize,
    rng: &mut R,
) -> Result<SyntheticScene> {
    if square == 0 || square >= height || square >= width {
        return Err(Error::precondition(format!(
            "square {square} must fit inside {height}×{width}"
        )));
    }
    if count == 0 || n_background == 0 {
        return Err(Error::precondition("need at least one frame and one background frame"));
    }
    let pixels = height * width;
    let texture: Vec<f64> = (0..pixels).map(|_| rng.random_range(0.0..20.0)).collect();
    let base = |i: usize| 60.0 + 80.0 * (i % width) as f64 / width as f64 + texture[i];
    let shade = |i: usize| 10.0 * (i / width) as f64 / height as f64;
    let lit = |gain: f64| DMatrix::from_fn(pixels, 1, |i, _| base(i) + gain * shade(i));

    let mut clean = DMatrix::zeros(pixels, count);
    let mut mask = DMatrix::zeros(pixels, count);
    let span_x = width - square;
    let span_y = height - square;
    for k in 0..count {
        clean.set_column(k, &lit(rng.random_range(-1.0..1.0)).column(0));
        // bounce horizontally, drift vertically
        let step = 2 * k % (2 * span_x.max(1));
        let x0 = if step <= span_x { step } else { 2 * span_x - step };
        let y0 = (span_y / 2 + k / 3) % (span_y + 1);
        for y in y0..y0 + square {
            for x in x0..x0 + square {
                mask[(y * width + x, k)] = 1.0;
            }
        }
    }
    let frames = clean.zip_map(&mask, |b, m| if m > 0.0 { 255.0 } else { b });
    let mut bg = DMatrix::zeros(pixels, n_background);
    for k in 0..n_background {
        bg.set_column(k, &lit(rng.random_range(-1.0..1.0)).column(0));
    }
    Ok(SyntheticScene {
        frames: FrameSequence::new(frames, height, width)?,
        background: FrameSequence::new(bg, height, width)?,
        clean,
        mask,
    })
}

/// Settings for background subtraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgsubConfig {
    /// Relative singular value cutoff for the background column space.
    pub rank_tol: f64,
    pub l1: L1Config,
    /// Used when no background frames are given.
    pub fallback: InformativeConfig,
}

impl BgsubConfig {
    /// `r_hat` bounds the background rank in the fallback decomposition.
    pub fn new(r_hat: usize) -> Self {
        BgsubConfig {
            rank_tol: DEFAULT_RANK_TOL,
            l1: L1Config::default(),
            fallback: InformativeConfig::new(r_hat),
        }
    }
}

/// Low-rank (background) and sparse (foreground) frames.
#[derive(Debug, Clone)]
pub struct BgsubResult {
    pub lowrank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    /// Pixels used for the per-frame fits.
    pub row_idx: IndexSet,
    pub basis_dim: usize,
    pub height: usize,
    pub width: usize,
}

impl BgsubResult {
    /// Writes `lowrank_*.pgm` and `sparse_*.pgm` (absolute values) into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_frames(dir.as_ref(), "lowrank", &self.lowrank, self.height, self.width)?;
        write_frames(dir.as_ref(), "sparse", &self.sparse.abs(), self.height, self.width)
    }
}

/// Splits frames into background and moving foreground.
///
/// With background frames the column space is their range and every frame
/// is fit by ℓ1 regression on `m2` uniformly sampled pixels. Without them
/// the frame matrix goes through the informative pipeline, and `m2` is
/// ignored.
pub fn run_bgsub<R: Rng + ?Sized>(
    frames: &FrameSequence,
    background: Option<&FrameSequence>,
    m2: usize,
    cfg: &BgsubConfig,
    rng: &mut R,
) -> Result<BgsubResult> {
    let d = frames.matrix();
    let (height, width) = (frames.height(), frames.width());
    let Some(bg) = background else {
        let res = decompose_informative(d, &cfg.fallback, rng)?;
        return Ok(BgsubResult {
            basis_dim: res.basis.dim(),
            lowrank: res.l_hat,
            sparse: res.s_hat,
            row_idx: res.row_idx,
            height,
            width,
        });
    };
    if (bg.height(), bg.width()) != (height, width) {
        return Err(Error::ShapeMismatch(format!(
            "background frames are {}×{}, frames are {height}×{width}",
            bg.height(),
            bg.width()
        )));
    }
    let basis = orthonormal_range(bg.matrix(), cfg.rank_tol)?;
    let rows = uniform_indices(d.nrows(), m2, rng)?;
    let u_s = select_rows(basis.matrix(), &rows)?;
    if numerical_rank(&u_s, cfg.l1.rank_tol) < basis.dim() {
        return Err(Error::RowSketchLostRank);
    }
    let q = l1_fit(&u_s, &select_rows(d, &rows)?, &cfg.l1)?;
    let lowrank = basis.matrix() * q;
    let sparse = d - &lowrank;
    Ok(BgsubResult {
        lowrank,
        sparse,
        row_idx: rows,
        basis_dim: basis.dim(),
        height,
        width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene(seed: u64) -> SyntheticScene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        synthetic_scene(48, 64, 30, 4, 10, &mut rng).unwrap()
    }

    #[test]
    fn pgm_round_trip_with_comment() {
        let img = GrayImage {
            height: 2,
            width: 3,
            pixels: vec![0, 10, 20, 200, 255, 7],
        };
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert_eq!(read_pgm(&buf[..]).unwrap(), img);

        let mut commented = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(&img.pixels);
        assert_eq!(read_pgm(&commented[..]).unwrap(), img);
    }

    #[test]
    fn pgm_rejects_other_formats() {
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(read_pgm(&b"P5\n1 1\n65535\n\0\0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\0"[..]).is_err());
    }

    #[test]
    fn small_maxval_is_rescaled() {
        let img = read_pgm(&b"P5 2 1 15 \x00\x0f"[..]).unwrap();
        assert_eq!(img.pixels, vec![0, 255]);
    }

    #[test]
    fn frame_invariants() {
        assert!(FrameSequence::new(DMatrix::from_element(6, 2, 300.0), 2, 3).is_err());
        assert!(FrameSequence::new(DMatrix::zeros(5, 2), 2, 3).is_err());
        assert!(FrameSequence::from_images(&[vec![0; 6], vec![0; 5]], 2, 3).is_err());
        let f = FrameSequence::from_images(&[vec![1, 2, 3, 4, 5, 6]], 2, 3).unwrap();
        assert_eq!(f.matrix()[(4, 0)], 5.0);
    }

    #[test]
    fn directory_round_trip() {
        let s = scene(1);
        let dir = tempfile::tempdir().unwrap();
        write_frames(dir.path(), "f", s.frames.matrix(), 48, 64).unwrap();
        let back = FrameSequence::read_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 30);
        let diff = (back.matrix() - s.frames.matrix()).amax();
        assert!(diff <= 0.5);
    }

    #[test]
    fn mismatched_background_rejected() {
        let s = scene(2);
        let bg = FrameSequence::new(DMatrix::from_element(48 * 32, 2, 10.0), 48, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = run_bgsub(&s.frames, Some(&bg), 500, &BgsubConfig::new(2), &mut rng).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn background_frame_has_no_foreground() {
        let s = scene(3);
        let frames = FrameSequence::new(s.background.matrix().columns(0, 2).into_owned(), 48, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let res = run_bgsub(&frames, Some(&s.background), 500, &BgsubConfig::new(2), &mut rng).unwrap();
        assert!(res.sparse.amax() <= 1.0);
    }

    fn energy_split(res: &BgsubResult, s: &SyntheticScene) -> (f64, f64) {
        let truth = s.frames.matrix() - &s.clean;
        let total = truth.norm_squared();
        let fg = res.sparse.component_mul(&s.mask).norm_squared();
        let leak = (&res.lowrank - &s.clean).component_mul(&s.mask).norm_squared();
        (fg / total, leak / total)
    }

    #[test]
    fn moving_square_goes_to_sparse_part() {
        let s = scene(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let res = run_bgsub(&s.frames, Some(&s.background), 500, &BgsubConfig::new(2), &mut rng).unwrap();
        assert_eq!(res.basis_dim, 2);
        let (fg, leak) = energy_split(&res, &s);
        assert!(fg >= 0.9, "foreground share {fg}");
        assert!(leak <= 0.1, "leak {leak}");
    }

    #[test]
    fn sketched_and_full_fits_find_the_same_object() {
        let s = scene(6);
        let cfg = BgsubConfig::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sketch = run_bgsub(&s.frames, Some(&s.background), 500, &cfg, &mut rng).unwrap();
        let full = run_bgsub(&s.frames, Some(&s.background), 48 * 64, &cfg, &mut rng).unwrap();
        let support = |m: &DMatrix<f64>| m.map(|v| if v.abs() > 0.5 { 1.0 } else { 0.0 });
        assert_eq!(support(&sketch.sparse), support(&full.sparse));
        assert_eq!(support(&sketch.sparse), s.mask);
    }

    #[test]
    fn without_background_uses_the_informative_pipeline() {
        let good = (0..10)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = synthetic_scene(48, 64, 90, 1, 10, &mut rng).unwrap();
                let res = run_bgsub(&s.frames, None, 0, &BgsubConfig::new(2), &mut rng).unwrap();
                let (fg, leak) = energy_split(&res, &s);
                fg >= 0.9 && leak <= 0.1
            })
            .count();
        assert!(good >= 8, "{good}/10 scenes separated");
    }
}
