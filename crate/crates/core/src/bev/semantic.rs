use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASS_COUNT: usize = 11;

/// Segmentation label taxonomy. The discriminant is the palette index used
/// in raster files and must stay stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SemanticClass {
    Unknown = 0,
    DaCenter = 1,
    DaLeft = 2,
    DaLeftLeft = 3,
    DaRight = 4,
    DaRightRight = 5,
    LmDashed = 6,
    LmSolid = 7,
    Crosswalk = 8,
    Curb = 9,
    StopLine = 10,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; CLASS_COUNT] = [
        SemanticClass::Unknown,
        SemanticClass::DaCenter,
        SemanticClass::DaLeft,
        SemanticClass::DaLeftLeft,
        SemanticClass::DaRight,
        SemanticClass::DaRightRight,
        SemanticClass::LmDashed,
        SemanticClass::LmSolid,
        SemanticClass::Crosswalk,
        SemanticClass::Curb,
        SemanticClass::StopLine,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Validation(format!("class code {code} out of range")))
    }

    /// Any of the five drivable-area classes.
    pub fn is_drivable_area(self) -> bool {
        (1..=5).contains(&self.code())
    }

    /// Cells a particle may not overlap.
    pub fn is_hard_boundary(self) -> bool {
        matches!(self, SemanticClass::LmSolid | SemanticClass::Curb)
    }

    /// Cells a particle may drive over.
    pub fn is_traversable(self) -> bool {
        self.is_drivable_area()
            || matches!(
                self,
                SemanticClass::LmDashed | SemanticClass::Crosswalk | SemanticClass::StopLine
            )
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Unknown => "unknown",
            SemanticClass::DaCenter => "da_center",
            SemanticClass::DaLeft => "da_left",
            SemanticClass::DaLeftLeft => "da_left_left",
            SemanticClass::DaRight => "da_right",
            SemanticClass::DaRightRight => "da_right_right",
            SemanticClass::LmDashed => "lm_dashed",
            SemanticClass::LmSolid => "lm_solid",
            SemanticClass::Crosswalk => "crosswalk",
            SemanticClass::Curb => "curb",
            SemanticClass::StopLine => "stop_line",
        }
    }
}

/// RGB palette written into indexed rasters, indexed by class code.
pub const PALETTE: [[u8; 3]; CLASS_COUNT] = [
    [0, 0, 0],
    [128, 64, 128],
    [70, 130, 180],
    [0, 80, 160],
    [220, 120, 60],
    [160, 80, 0],
    [250, 250, 120],
    [255, 255, 255],
    [200, 200, 0],
    [120, 120, 120],
    [255, 0, 0],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_stable() {
        for (i, c) in SemanticClass::ALL.iter().enumerate() {
            assert_eq!(c.code() as usize, i);
            assert_eq!(SemanticClass::from_code(i as u8).unwrap(), *c);
        }
        assert!(SemanticClass::from_code(11).is_err());
    }
}
