use super::raster::{decode_indexed_png, encode_indexed_png, IndexedRaster};
use super::semantic::{SemanticClass, CLASS_COUNT};
use crate::error::{Error, Result};

const TIMESTAMP_KEY: &str = "lanecarto:timestamp";

/// Per-pixel segmentation output for one camera image.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticFrame {
    pub timestamp: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major class codes, row 0 at the top of the image.
    pub codes: Vec<u8>,
}

impl SemanticFrame {
    pub fn new(timestamp: f64, width: u32, height: u32, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != width as usize * height as usize {
            return Err(Error::Validation("frame buffer does not match dimensions".into()));
        }
        if let Some(bad) = codes.iter().find(|c| **c as usize >= CLASS_COUNT) {
            return Err(Error::Validation(format!("pixel code {bad} is not a class")));
        }
        Ok(SemanticFrame {
            timestamp,
            width,
            height,
            codes,
        })
    }

    pub fn uniform(timestamp: f64, width: u32, height: u32, class: SemanticClass) -> Self {
        SemanticFrame {
            timestamp,
            width,
            height,
            codes: vec![class.code(); width as usize * height as usize],
        }
    }

    pub fn class_at(&self, col: u32, row: u32) -> SemanticClass {
        SemanticClass::ALL[self.codes[row as usize * self.width as usize + col as usize] as usize]
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_indexed_png(&IndexedRaster {
            width: self.width,
            height: self.height,
            codes: self.codes.clone(),
            text: vec![(TIMESTAMP_KEY.into(), format!("{}", self.timestamp))],
        })
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let raster = decode_indexed_png(bytes)?;
        let timestamp = raster
            .text_value(TIMESTAMP_KEY)
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|t| t.is_finite())
            .ok_or_else(|| Error::Validation("frame lacks a timestamp".into()))?;
        SemanticFrame::new(timestamp, raster.width, raster.height, raster.codes)
    }
}
