use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};

use super::FeatureError;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, FeatureError> {
        if data.len() != width as usize * height as usize {
            return Err(FeatureError::BufferSize { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    /// Reads a binary PGM (P5) file.
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let bytes = std::fs::read(path)?;
        Self::decode_pgm(&bytes)
    }

    pub fn decode_pgm(bytes: &[u8]) -> Result<Self, FeatureError> {
        let reader = ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Pnm);
        let img = reader.decode().map_err(|e| FeatureError::Decode(e.to_string()))?;
        let gray = img.as_luma8().ok_or(FeatureError::UnsupportedFormat)?;
        Self::new(gray.width(), gray.height(), gray.as_raw().clone())
    }

    pub fn encode_pgm(&self) -> Result<Vec<u8>, FeatureError> {
        let mut out = Vec::new();
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&self.data, self.width, self.height, ExtendedColorType::L8)
            .map_err(|e| FeatureError::Decode(e.to_string()))?;
        Ok(out)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        std::fs::write(path, self.encode_pgm()?)?;
        Ok(())
    }
}

/// Binary per-pixel mask, same layout as [`Image`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Out-of-range coordinates read as `false`.
    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|b| *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = Image::from_fn(7, 5, |x, y| (x * 31 + y * 7) as u8);
        let bytes = img.encode_pgm().unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(Image::decode_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn decodes_handwritten_header() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3, 4, 5]);
        let img = Image::decode_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.get(2, 1), 5);
    }

    #[test]
    fn rejects_bad_buffer() {
        assert!(Image::new(3, 3, vec![0; 8]).is_err());
        assert!(Image::decode_pgm(b"P5\n3 3\n255\n\x00").is_err());
    }
}
