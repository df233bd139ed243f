//! 8-bit indexed-palette PNG I/O. Palette index = class code; metadata rides
//! in `tEXt` chunks.

use std::io::Cursor;

use super::semantic::{CLASS_COUNT, PALETTE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedRaster {
    pub width: u32,
    pub height: u32,
    /// Row-major class codes, row 0 at the top.
    pub codes: Vec<u8>,
    pub text: Vec<(String, String)>,
}

impl IndexedRaster {
    pub fn text_value(&self, key: &str) -> Option<&str> {
        self.text
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Decoded rasters are capped so hostile headers cannot force huge
/// allocations.
pub const MAX_RASTER_BYTES: usize = 256 * 1024 * 1024;

pub fn encode_indexed_png(raster: &IndexedRaster) -> Result<Vec<u8>> {
    if raster.codes.len() != raster.width as usize * raster.height as usize {
        return Err(Error::Png("pixel buffer does not match dimensions".into()));
    }
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, raster.width, raster.height);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(PALETTE.iter().flatten().copied().collect::<Vec<u8>>());
        for (k, v) in &raster.text {
            enc.add_text_chunk(k.clone(), v.clone())
                .map_err(|e| Error::Png(e.to_string()))?;
        }
        let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(&raster.codes)
            .map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(buf)
}

pub fn decode_indexed_png(bytes: &[u8]) -> Result<IndexedRaster> {
    let mut dec = png::Decoder::new_with_limits(
        Cursor::new(bytes),
        png::Limits {
            bytes: MAX_RASTER_BYTES,
        },
    );
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Png(format!(
            "expected 8-bit indexed image, found {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (width, height) = (info.width, info.height);
    let text: Vec<(String, String)> = info
        .uncompressed_latin1_text
        .iter()
        .map(|t| (t.keyword.clone(), t.text.clone()))
        .collect();
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    if size > MAX_RASTER_BYTES {
        return Err(Error::Png("image too large".into()));
    }
    let mut data = vec![0u8; size];
    let out = reader
        .next_frame(&mut data)
        .map_err(|e| Error::Png(e.to_string()))?;
    let stride = out.line_size;
    let mut codes = Vec::with_capacity(width as usize * height as usize);
    for row in 0..height as usize {
        codes.extend_from_slice(&data[row * stride..row * stride + width as usize]);
    }
    if let Some(bad) = codes.iter().find(|c| **c as usize >= CLASS_COUNT) {
        return Err(Error::Validation(format!("pixel code {bad} is not a class")));
    }
    Ok(IndexedRaster {
        width,
        height,
        codes,
        text,
    })
}
