//! Received signal strength for the direct and ground-reflected rays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{Beam, BeamPattern};
use crate::geometry::{
    arrival_angles, departure_angles, direct_path, ground_reflected_path, occlusion, Angles, BlockerSlab, LinkGeometry,
    Occlusion, PathKind, RayPath,
};

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error("carrier frequency must be positive, got {0} Hz")]
    Carrier(f64),
    #[error("radio config invalid: {0}")]
    Radio(String),
    #[error("calibration target {target_db} dB is unreachable: median geometric excess alone is {excess_db:.3} dB")]
    Unreachable { target_db: f64, excess_db: f64 },
    #[error("calibration needs a positive target and a non-empty geometry grid")]
    CalibrationInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub carrier_hz: f64,
    pub noise_floor_dbm: f64,
    /// Attenuation applied to a path occluded by a pedestrian's body.
    pub blockage_loss_db: f64,
    /// Extra loss on the ground ray when it passes through a blocker's leg gap.
    pub residual_ground_block_loss_db: f64,
    /// SNR needed to decode a data packet.
    pub data_snr_db: f64,
    /// SNR needed to decode a control/sync message.
    pub ctrl_snr_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 20.0,
            carrier_hz: 60e9,
            noise_floor_dbm: -70.0,
            blockage_loss_db: 45.0,
            residual_ground_block_loss_db: 0.0,
            data_snr_db: 10.0,
            ctrl_snr_db: 3.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_hz > 0.0) {
            return Err(ChannelError::Carrier(self.carrier_hz));
        }
        if !(self.blockage_loss_db > 0.0) {
            return Err(ChannelError::Radio("blockage_loss_db must be positive".into()));
        }
        if !(self.residual_ground_block_loss_db >= 0.0) {
            return Err(ChannelError::Radio("residual_ground_block_loss_db must be >= 0".into()));
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_floor_dbm", self.noise_floor_dbm),
            ("data_snr_db", self.data_snr_db),
            ("ctrl_snr_db", self.ctrl_snr_db),
        ] {
            if !v.is_finite() {
                return Err(ChannelError::Radio(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_MPS / self.carrier_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Concrete,
    Gravel,
    CeramicTile,
    Custom,
}

impl SurfaceKind {
    /// Measured median extra loss of the ground ray over LoS, where known.
    pub fn measured_additional_loss_db(self) -> Option<f64> {
        match self {
            SurfaceKind::Concrete => Some(4.5),
            SurfaceKind::Gravel => Some(4.8),
            SurfaceKind::CeramicTile | SurfaceKind::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub reflection_loss_db: f64,
}

impl Surface {
    pub fn new(kind: SurfaceKind, reflection_loss_db: f64) -> Result<Self, ChannelError> {
        if !(reflection_loss_db >= 0.0) {
            return Err(ChannelError::Radio(format!(
                "reflection loss must be >= 0, got {reflection_loss_db}"
            )));
        }
        Ok(Self {
            kind,
            reflection_loss_db,
        })
    }
}

/// Per-tick view of one (tx beam, rx beam) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservation {
    pub time_ms: u64,
    pub tx_beam_id: usize,
    pub rx_beam_id: usize,
    pub rss_dbm: f64,
    pub los_rss_dbm: f64,
    pub ground_rss_dbm: f64,
    pub los_blocked: bool,
    pub ground_blocked: bool,
}

pub fn fspl_db(distance_m: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::Distance(distance_m));
    }
    if !(carrier_hz > 0.0) {
        return Err(ChannelError::Carrier(carrier_hz));
    }
    let lambda = SPEED_OF_LIGHT_MPS / carrier_hz;
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance_m / lambda).log10())
}

/// Non-coherent sum of two powers in dBm.
pub fn power_sum_dbm(a_dbm: f64, b_dbm: f64) -> f64 {
    let hi = a_dbm.max(b_dbm);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let lo = a_dbm.min(b_dbm);
    hi + 10.0 * (1.0 + 10f64.powf((lo - hi) / 10.0)).log10()
}

/// Precomputed geometry for one ray; beam gains and blockage are applied per query.
#[derive(Debug, Clone)]
struct RayTerms {
    path: RayPath,
    departure: Angles,
    arrival: Angles,
    /// tx power − free-space loss − surface loss.
    base_dbm: f64,
}

impl RayTerms {
    fn new(radio: &RadioConfig, geom: &LinkGeometry, path: RayPath, surface: &Surface) -> Result<Self, ChannelError> {
        let mut base_dbm = radio.tx_power_dbm - fspl_db(path.length_m, radio.carrier_hz)?;
        if path.kind == PathKind::GroundReflected {
            base_dbm -= surface.reflection_loss_db;
        }
        Ok(Self {
            departure: departure_angles(geom, &path),
            arrival: arrival_angles(geom, &path),
            path,
            base_dbm,
        })
    }

    fn occlusion(&self, blockers: &[BlockerSlab]) -> Occlusion {
        blockers
            .iter()
            .map(|b| occlusion(&self.path, b))
            .max()
            .unwrap_or(Occlusion::Clear)
    }

    fn rss(&self, radio: &RadioConfig, tx: &Beam, rx: &Beam, occ: Occlusion) -> f64 {
        let mut rss = self.base_dbm
            + tx.gain_dbi(self.departure.azimuth_deg, self.departure.elevation_deg)
            + rx.gain_dbi(self.arrival.azimuth_deg, self.arrival.elevation_deg);
        match occ {
            Occlusion::Blocked => rss -= radio.blockage_loss_db,
            Occlusion::BelowBody if self.path.kind == PathKind::GroundReflected => {
                rss -= radio.residual_ground_block_loss_db
            }
            _ => {}
        }
        rss
    }
}

/// A fixed link with its transmit beam; evaluates receive beams under any
/// set of blockers.
#[derive(Debug, Clone)]
pub struct LinkChannel {
    radio: RadioConfig,
    tx_beam: Beam,
    direct: RayTerms,
    ground: RayTerms,
}

impl LinkChannel {
    pub fn new(
        radio: &RadioConfig,
        geom: &LinkGeometry,
        surface: &Surface,
        tx_beam: &Beam,
    ) -> Result<Self, ChannelError> {
        Ok(Self {
            radio: *radio,
            tx_beam: *tx_beam,
            direct: RayTerms::new(radio, geom, direct_path(geom), surface)?,
            ground: RayTerms::new(radio, geom, ground_reflected_path(geom), surface)?,
        })
    }

    pub fn direct_path(&self) -> &RayPath {
        &self.direct.path
    }

    pub fn ground_path(&self) -> &RayPath {
        &self.ground.path
    }

    pub fn los_occluded(&self, blockers: &[BlockerSlab]) -> bool {
        self.direct.occlusion(blockers) == Occlusion::Blocked
    }

    pub fn observe(&self, rx_beam: &Beam, blockers: &[BlockerSlab]) -> ChannelObservation {
        let los_occ = self.direct.occlusion(blockers);
        let ground_occ = self.ground.occlusion(blockers);
        let los = self.direct.rss(&self.radio, &self.tx_beam, rx_beam, los_occ);
        let ground = self.ground.rss(&self.radio, &self.tx_beam, rx_beam, ground_occ);
        ChannelObservation {
            time_ms: 0,
            tx_beam_id: self.tx_beam.id,
            rx_beam_id: rx_beam.id,
            rss_dbm: power_sum_dbm(los, ground),
            los_rss_dbm: los,
            ground_rss_dbm: ground,
            los_blocked: los_occ == Occlusion::Blocked,
            ground_blocked: ground_occ == Occlusion::Blocked,
        }
    }
}

pub fn path_rss(
    radio: &RadioConfig,
    geom: &LinkGeometry,
    path: &RayPath,
    surface: &Surface,
    tx_beam: &Beam,
    rx_beam: &Beam,
    blockers: &[BlockerSlab],
) -> Result<f64, ChannelError> {
    let terms = RayTerms::new(radio, geom, path.clone(), surface)?;
    let occ = terms.occlusion(blockers);
    Ok(terms.rss(radio, tx_beam, rx_beam, occ))
}

pub fn two_ray_rss(
    radio: &RadioConfig,
    geom: &LinkGeometry,
    surface: &Surface,
    tx_beam: &Beam,
    rx_beam: &Beam,
    blockers: &[BlockerSlab],
) -> Result<ChannelObservation, ChannelError> {
    Ok(LinkChannel::new(radio, geom, surface, tx_beam)?.observe(rx_beam, blockers))
}

/// LoS RSS minus ground RSS with each path served by boresight-aligned beams
/// at both ends.
pub fn aligned_additional_loss_db(
    radio: &RadioConfig,
    geom: &LinkGeometry,
    surface: &Surface,
) -> Result<f64, ChannelError> {
    let pattern = BeamPattern::default();
    let aligned = |path: &RayPath| -> Result<f64, ChannelError> {
        let dep = departure_angles(geom, path);
        let arr = arrival_angles(geom, path);
        let tx = Beam::aimed(dep.azimuth_deg, dep.elevation_deg, pattern);
        let rx = Beam::aimed(arr.azimuth_deg, arr.elevation_deg, pattern);
        path_rss(radio, geom, path, surface, &tx, &rx, &[])
    };
    Ok(aligned(&direct_path(geom))? - aligned(&ground_reflected_path(geom))?)
}

/// Transmitter 2.5 m and receiver 1 m above ground, 5 to 25 m apart.
pub fn default_calibration_grid() -> Vec<LinkGeometry> {
    [5.0, 10.0, 15.0, 20.0, 25.0]
        .iter()
        .map(|&d| LinkGeometry::planar(2.5, 1.0, d).expect("valid grid geometry"))
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub surface: Surface,
    pub target_db: f64,
    /// Median additional loss over the grid with the solved surface.
    pub median_additional_loss_db: f64,
    pub per_geometry_db: Vec<f64>,
}

fn median_additional_loss(
    radio: &RadioConfig,
    grid: &[LinkGeometry],
    surface: &Surface,
) -> Result<(f64, Vec<f64>), ChannelError> {
    let per: Vec<f64> = grid
        .iter()
        .map(|g| aligned_additional_loss_db(radio, g, surface))
        .collect::<Result<_, _>>()?;
    let mut sorted = per.clone();
    let m = median(&mut sorted).ok_or(ChannelError::CalibrationInput)?;
    Ok((m, per))
}

/// Solve for the surface reflection loss that puts the grid-median
/// additional loss at `target_db`. Bisection over the loss in dB.
pub fn calibrate_surface(
    kind: SurfaceKind,
    radio: &RadioConfig,
    grid: &[LinkGeometry],
    target_db: f64,
) -> Result<CalibrationReport, ChannelError> {
    if grid.is_empty() || !(target_db > 0.0) || !target_db.is_finite() {
        return Err(ChannelError::CalibrationInput);
    }
    let eval = |loss: f64| {
        median_additional_loss(
            radio,
            grid,
            &Surface {
                kind,
                reflection_loss_db: loss,
            },
        )
    };
    let (excess, _) = eval(0.0)?;
    if excess > target_db {
        return Err(ChannelError::Unreachable {
            target_db,
            excess_db: excess,
        });
    }
    let (mut lo, mut hi) = (0.0_f64, target_db);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)?.0 < target_db {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let surface = Surface {
        kind,
        reflection_loss_db: 0.5 * (lo + hi),
    };
    let (median_additional_loss_db, per_geometry_db) = eval(surface.reflection_loss_db)?;
    Ok(CalibrationReport {
        surface,
        target_db,
        median_additional_loss_db,
        per_geometry_db,
    })
}
