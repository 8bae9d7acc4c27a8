//! Grid codebook of steerable beams with a Gaussian-quadratic mainlobe.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::wrap_deg;

/// Attenuation in dB at one full beamwidth off boresight; 3 dB at half width.
const MAINLOBE_DB_PER_BW2: f64 = 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodebookError {
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
    #[error("{0} grid contains duplicate or non-finite angle {1}")]
    BadGridAngle(&'static str, f64),
    #[error("beam pattern invalid: {0}")]
    Pattern(String),
    #[error("beam {0} is not in the codebook")]
    UnknownBeam(usize),
}

/// Parameters shared by every beam of one array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamPattern {
    pub peak_gain_dbi: f64,
    pub bw_az_deg: f64,
    pub bw_zen_deg: f64,
    pub sidelobe_floor_db: f64,
}

impl Default for BeamPattern {
    fn default() -> Self {
        Self {
            peak_gain_dbi: 17.0,
            bw_az_deg: 18.0,
            bw_zen_deg: 60.0,
            sidelobe_floor_db: 20.0,
        }
    }
}

impl BeamPattern {
    pub fn validate(&self) -> Result<(), CodebookError> {
        if !(self.bw_az_deg > 0.0 && self.bw_zen_deg > 0.0) {
            return Err(CodebookError::Pattern("beamwidths must be positive".into()));
        }
        if !(self.sidelobe_floor_db > 0.0) {
            return Err(CodebookError::Pattern("sidelobe floor must be positive".into()));
        }
        if !self.peak_gain_dbi.is_finite() {
            return Err(CodebookError::Pattern("peak gain must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub id: usize,
    pub azimuth_deg: f64,
    /// Pointing elevation; negative is downtilt.
    pub zenith_deg: f64,
    pub pattern: BeamPattern,
}

impl Beam {
    pub fn new(id: usize, azimuth_deg: f64, zenith_deg: f64, pattern: BeamPattern) -> Self {
        Self {
            id,
            azimuth_deg,
            zenith_deg,
            pattern,
        }
    }

    /// A beam steered exactly at the given direction.
    pub fn aimed(azimuth_deg: f64, elevation_deg: f64, pattern: BeamPattern) -> Self {
        Self::new(0, azimuth_deg, elevation_deg, pattern)
    }

    /// Normalized squared offset `(Δaz/bw_az)² + (Δzen/bw_zen)²`.
    pub fn normalized_offset(&self, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        let daz = wrap_deg(azimuth_deg - self.azimuth_deg) / self.pattern.bw_az_deg;
        let dzen = (elevation_deg - self.zenith_deg) / self.pattern.bw_zen_deg;
        daz * daz + dzen * dzen
    }

    pub fn gain_dbi(&self, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        beam_gain(self, azimuth_deg, elevation_deg)
    }
}

pub fn beam_gain(beam: &Beam, azimuth_deg: f64, elevation_deg: f64) -> f64 {
    let loss =
        (MAINLOBE_DB_PER_BW2 * beam.normalized_offset(azimuth_deg, elevation_deg)).min(beam.pattern.sidelobe_floor_db);
    beam.pattern.peak_gain_dbi - loss
}

/// Beams laid out azimuth-major: `id = az_index * zen_grid.len() + zen_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    beams: Vec<Beam>,
    az_grid: Vec<f64>,
    zen_grid: Vec<f64>,
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), CodebookError> {
    if grid.is_empty() {
        return Err(CodebookError::EmptyGrid(name));
    }
    for (i, &a) in grid.iter().enumerate() {
        if !a.is_finite() || grid[..i].contains(&a) {
            return Err(CodebookError::BadGridAngle(name, a));
        }
    }
    Ok(())
}

impl Codebook {
    pub fn grid(az_grid: Vec<f64>, zen_grid: Vec<f64>, pattern: BeamPattern) -> Result<Self, CodebookError> {
        check_grid("azimuth", &az_grid)?;
        check_grid("zenith", &zen_grid)?;
        pattern.validate()?;
        let beams = az_grid
            .iter()
            .flat_map(|&az| zen_grid.iter().map(move |&zen| (az, zen)))
            .enumerate()
            .map(|(id, (az, zen))| Beam::new(id, az, zen, pattern))
            .collect();
        Ok(Self {
            beams,
            az_grid,
            zen_grid,
        })
    }

    /// 5 azimuths × 5 zeniths covering a 120° sector.
    pub fn default_codebook() -> Self {
        Self::grid(
            vec![-48.0, -24.0, 0.0, 24.0, 48.0],
            vec![20.0, 0.0, -15.0, -30.0, -45.0],
            BeamPattern::default(),
        )
        .expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn beam(&self, id: usize) -> Option<&Beam> {
        self.beams.get(id)
    }

    pub fn az_grid(&self) -> &[f64] {
        &self.az_grid
    }

    pub fn zen_grid(&self) -> &[f64] {
        &self.zen_grid
    }

    pub fn pattern(&self) -> BeamPattern {
        self.beams[0].pattern
    }

    pub fn az_index(&self, id: usize) -> Option<usize> {
        (id < self.len()).then(|| id / self.zen_grid.len())
    }

    pub fn zen_index(&self, id: usize) -> Option<usize> {
        (id < self.len()).then(|| id % self.zen_grid.len())
    }

    pub fn beam_at(&self, az_index: usize, zen_index: usize) -> Option<&Beam> {
        if az_index >= self.az_grid.len() || zen_index >= self.zen_grid.len() {
            return None;
        }
        self.beam(az_index * self.zen_grid.len() + zen_index)
    }

    /// Beam with the smallest normalized offset; ties go to the lowest id.
    pub fn nearest_beam(&self, azimuth_deg: f64, elevation_deg: f64) -> &Beam {
        let mut best = &self.beams[0];
        let mut best_off = best.normalized_offset(azimuth_deg, elevation_deg);
        for b in &self.beams[1..] {
            let off = b.normalized_offset(azimuth_deg, elevation_deg);
            if off < best_off {
                best = b;
                best_off = off;
            }
        }
        best
    }

    /// Beams sharing `beam_id`'s azimuth, ordered by |Δzenith| with the beam
    /// itself first. Equal offsets prefer the more negative (ground-facing)
    /// zenith.
    pub fn zenith_neighbors(&self, beam_id: usize, k: usize) -> Result<Vec<&Beam>, CodebookError> {
        let center = self.beam(beam_id).ok_or(CodebookError::UnknownBeam(beam_id))?;
        let az_idx = beam_id / self.zen_grid.len();
        let mut column: Vec<&Beam> = (0..self.zen_grid.len())
            .filter_map(|z| self.beam_at(az_idx, z))
            .collect();
        column.sort_by(|a, b| {
            let da = (a.zenith_deg - center.zenith_deg).abs();
            let db = (b.zenith_deg - center.zenith_deg).abs();
            da.total_cmp(&db).then(a.zenith_deg.total_cmp(&b.zenith_deg))
        });
        column.truncate(k);
        Ok(column)
    }
}
