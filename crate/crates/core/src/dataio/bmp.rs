//! Uncompressed 8-bit grayscale BMP reading and writing.
//!
//! Only palette-indexed 8 bpp images with `BI_RGB` compression and a gray
//! palette (`r == g == b` for every entry) are accepted.

use crate::dataio::interchange::Reader;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Top-down, row-major.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

fn row_stride(width: usize) -> usize {
    (width + 3) & !3
}

pub fn decode_gray_bmp(bytes: &[u8]) -> Result<GrayImage> {
    let mut r = Reader::new(bytes, "bmp");
    if r.take(2)? != b"BM" {
        return Err(r.fail(0, "not a BMP file (missing 'BM' signature)"));
    }
    let _file_size = r.u32()?;
    let _reserved = r.u32()?;
    let data_offset = r.u32()? as usize;
    let dib_size = r.u32()? as usize;
    if dib_size < 40 {
        return Err(r.fail(14, format!("unsupported DIB header size {dib_size}")));
    }
    let width = r.u32()? as i32;
    let height = r.u32()? as i32;
    let planes = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    let bpp = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    let compression = r.u32()?;
    if width <= 0 || height == 0 {
        return Err(r.fail(18, format!("invalid dimensions {width}x{height}")));
    }
    if planes != 1 {
        return Err(r.fail(26, format!("expected 1 plane, found {planes}")));
    }
    if bpp != 8 {
        return Err(r.fail(28, format!("expected 8-bit grayscale, found {bpp} bits per pixel")));
    }
    if compression != 0 {
        return Err(r.fail(30, format!("compressed BMP (method {compression}) is not supported")));
    }
    let _image_size = r.u32()?;
    let _xppm = r.u32()?;
    let _yppm = r.u32()?;
    let colors_used = match r.u32()? {
        0 => 256,
        n if n <= 256 => n as usize,
        n => return Err(r.fail(46, format!("palette of {n} entries"))),
    };
    let palette_at = 14 + dib_size;
    let palette_len = colors_used * 4;
    if bytes.len() < palette_at + palette_len {
        return Err(r.fail(palette_at, "truncated palette"));
    }
    let mut palette = Vec::with_capacity(colors_used);
    for (k, entry) in bytes[palette_at..palette_at + palette_len].chunks_exact(4).enumerate() {
        let (b, g, red) = (entry[0], entry[1], entry[2]);
        if b != g || g != red {
            return Err(r.fail(palette_at + 4 * k, "palette is not grayscale"));
        }
        palette.push(red);
    }

    let width = width as usize;
    let bottom_up = height > 0;
    let height = height.unsigned_abs() as usize;
    let stride = row_stride(width);
    let needed = stride * height;
    if data_offset < palette_at + palette_len || bytes.len() < data_offset + needed {
        return Err(r.fail(data_offset, format!("pixel data truncated (need {needed} bytes)")));
    }
    let data = &bytes[data_offset..data_offset + needed];
    let mut img = GrayImage::new(width, height);
    for (row_idx, row) in data.chunks_exact(stride).enumerate() {
        let y = if bottom_up { height - 1 - row_idx } else { row_idx };
        for (x, &idx) in row[..width].iter().enumerate() {
            let Some(&v) = palette.get(idx as usize) else {
                return Err(r.fail(
                    data_offset + row_idx * stride + x,
                    format!("palette index {idx} out of range"),
                ));
            };
            img.set(x, y, v);
        }
    }
    Ok(img)
}

/// Bottom-up 8 bpp BMP with an identity gray palette.
pub fn encode_gray_bmp(img: &GrayImage) -> Vec<u8> {
    let stride = row_stride(img.width);
    let data_offset = 14 + 40 + 256 * 4;
    let size = data_offset + stride * img.height;
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(size as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(data_offset as u32).to_le_bytes());
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&(img.width as i32).to_le_bytes());
    out.extend_from_slice(&(img.height as i32).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&8u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&((stride * img.height) as u32).to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&256u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in 0..=255u8 {
        out.extend_from_slice(&[v, v, v, 0]);
    }
    for y in (0..img.height).rev() {
        out.extend_from_slice(&img.pixels[y * img.width..(y + 1) * img.width]);
        out.resize(out.len() + stride - img.width, 0);
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_odd_width() {
        let mut img = GrayImage::new(5, 3);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = (i * 17) as u8;
        }
        let back = decode_gray_bmp(&encode_gray_bmp(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn rejects_non_gray_and_wrong_depth() {
        let img = GrayImage::new(4, 4);
        let mut bytes = encode_gray_bmp(&img);
        // first palette entry: make it red
        bytes[54 + 2] = 200;
        assert!(matches!(decode_gray_bmp(&bytes), Err(crate::Error::Format(_))));

        let mut bytes = encode_gray_bmp(&img);
        bytes[28] = 24;
        let err = decode_gray_bmp(&bytes).unwrap_err();
        assert!(err.to_string().contains("8-bit"), "{err}");

        let bytes = encode_gray_bmp(&img);
        assert!(decode_gray_bmp(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_gray_bmp(b"PK\x03\x04").is_err());
    }

    #[test]
    fn top_down_rows() {
        let mut img = GrayImage::new(4, 2);
        img.set(0, 0, 9);
        let mut bytes = encode_gray_bmp(&img);
        // flip to top-down storage: negate height and swap the two rows
        bytes[22..26].copy_from_slice(&(-2i32).to_le_bytes());
        let off = 14 + 40 + 1024;
        let (r0, r1) = (bytes[off..off + 4].to_vec(), bytes[off + 4..off + 8].to_vec());
        bytes[off..off + 4].copy_from_slice(&r1);
        bytes[off + 4..off + 8].copy_from_slice(&r0);
        assert_eq!(decode_gray_bmp(&bytes).unwrap(), img);
    }
}
