//! Seeded random processes: single-atom loading, residence-time loss,
//! and imperfect fluorescence detection.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayTag, RegionMask, SiteId, TrapArrayParams};

/// Random stream for one trial.
///
/// Streams are ChaCha8 keyed by `master_seed` and selected by `stream_id`,
/// so the draw sequence is fixed across platforms and independent of how
/// trials are scheduled.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// One Bernoulli draw. `p` must lie in [0, 1].
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoadingMode {
    #[default]
    Uniform,
    Plateau,
}

/// Per-site loading probability under collisional blockade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingModel {
    pub mode: LoadingMode,
    pub p_fill: f64,
    pub plateau_radius_pitches: f64,
    pub p_outside: f64,
}

impl Default for LoadingModel {
    fn default() -> Self {
        Self {
            mode: LoadingMode::Uniform,
            p_fill: 0.5,
            plateau_radius_pitches: 22.0,
            p_outside: 0.0,
        }
    }
}

impl LoadingModel {
    pub fn uniform(p_fill: f64) -> Self {
        Self {
            p_fill,
            ..Self::default()
        }
    }

    pub fn plateau(p_fill: f64, radius_pitches: f64) -> Self {
        Self {
            mode: LoadingMode::Plateau,
            p_fill,
            plateau_radius_pitches: radius_pitches,
            p_outside: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_fill", self.p_fill)?;
        check_probability("p_outside", self.p_outside)?;
        if !(self.plateau_radius_pitches >= 0.0) {
            return Err(Error::invalid("plateau_radius_pitches", "must be non-negative"));
        }
        Ok(())
    }

    /// Loading probabilities scaled by `factor`, used for the reduction seen
    /// when both arrays load at once.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            p_fill: self.p_fill * factor,
            p_outside: self.p_outside * factor,
            ..self.clone()
        }
    }

    pub fn site_probability(&self, grid: &TrapArrayParams, id: SiteId) -> f64 {
        match self.mode {
            LoadingMode::Uniform => self.p_fill,
            LoadingMode::Plateau => {
                let r2 = self.plateau_radius_pitches * self.plateau_radius_pitches;
                if grid.radius_sq_pitches(id) <= r2 {
                    self.p_fill
                } else {
                    self.p_outside
                }
            }
        }
    }
}

/// What happens to an atom when a transport move fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransportFailMode {
    #[default]
    Lost,
    Returned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub p_transport_intra: f64,
    pub p_insertion: f64,
    pub residence_time_s: f64,
    pub detection_fidelity: f64,
    /// Overrides `1 − detection_fidelity` for empty sites read as occupied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_positive_rate: Option<f64>,
    /// Overrides `1 − detection_fidelity` for occupied sites read as empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_negative_rate: Option<f64>,
    pub crosstalk_factor: f64,
    pub transport_fail_mode: TransportFailMode,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            p_transport_intra: 0.89,
            p_insertion: 0.78,
            residence_time_s: 10.0,
            detection_fidelity: 0.998,
            false_positive_rate: None,
            false_negative_rate: None,
            crosstalk_factor: 0.957,
            transport_fail_mode: TransportFailMode::Lost,
        }
    }
}

impl NoiseParams {
    /// Lossless transport, infinite lifetime, perfect detection.
    pub fn perfect() -> Self {
        Self {
            p_transport_intra: 1.0,
            p_insertion: 1.0,
            residence_time_s: f64::INFINITY,
            detection_fidelity: 1.0,
            crosstalk_factor: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_transport_intra", self.p_transport_intra)?;
        check_probability("p_insertion", self.p_insertion)?;
        check_probability("detection_fidelity", self.detection_fidelity)?;
        if let Some(p) = self.false_positive_rate {
            check_probability("false_positive_rate", p)?;
        }
        if let Some(p) = self.false_negative_rate {
            check_probability("false_negative_rate", p)?;
        }
        if !(self.residence_time_s > 0.0) {
            return Err(Error::invalid("residence_time_s", "must be positive"));
        }
        if !(self.crosstalk_factor > 0.0 && self.crosstalk_factor <= 1.0) {
            return Err(Error::invalid("crosstalk_factor", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn false_positive(&self) -> f64 {
        self.false_positive_rate
            .unwrap_or(1.0 - self.detection_fidelity)
    }

    pub fn false_negative(&self) -> f64 {
        self.false_negative_rate
            .unwrap_or(1.0 - self.detection_fidelity)
    }
}

pub(crate) fn check_probability(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("probability {p} outside [0, 1]")))
    }
}

/// Occupation of every site of one array. A site holds at most one atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyState {
    array: ArrayTag,
    occupied: Vec<bool>,
}

impl OccupancyState {
    pub fn empty(array: ArrayTag, len: usize) -> Self {
        Self {
            array,
            occupied: vec![false; len],
        }
    }

    pub fn from_sites(
        array: ArrayTag,
        len: usize,
        sites: impl IntoIterator<Item = SiteId>,
    ) -> Result<Self> {
        let mut s = Self::empty(array, len);
        for id in sites {
            if id.0 >= len {
                return Err(Error::SiteOutOfRange { index: id.0, len });
            }
            s.occupied[id.0] = true;
        }
        Ok(s)
    }

    pub fn array(&self) -> ArrayTag {
        self.array
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn is_occupied(&self, id: SiteId) -> bool {
        self.occupied[id.0]
    }

    pub fn set(&mut self, id: SiteId, value: bool) {
        self.occupied[id.0] = value;
    }

    pub fn clear(&mut self) {
        self.occupied.iter_mut().for_each(|o| *o = false);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.occupied
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| o.then_some(SiteId(i)))
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn count_in(&self, mask: &RegionMask) -> usize {
        mask.sites().iter().filter(|&&s| self.occupied[s.0]).count()
    }

    pub fn fill_fraction(&self, mask: &RegionMask) -> f64 {
        if mask.is_empty() {
            return 0.0;
        }
        self.count_in(mask) as f64 / mask.len() as f64
    }

    pub fn is_subset_of(&self, other: &OccupancyState) -> bool {
        self.occupied
            .iter()
            .zip(&other.occupied)
            .all(|(&a, &b)| !a || b)
    }
}

/// Independent Bernoulli loading of every site in `mask`; sites outside stay empty.
pub fn initial_load(
    grid: &TrapArrayParams,
    array: ArrayTag,
    model: &LoadingModel,
    mask: &RegionMask,
    rng: &mut RngStream,
) -> OccupancyState {
    let mut state = OccupancyState::empty(array, grid.len());
    for &id in mask.sites() {
        if rng.bernoulli(model.site_probability(grid, id)) {
            state.occupied[id.0] = true;
        }
    }
    state
}

/// exp(−duration/τ).
pub fn survival_probability(duration_s: f64, residence_time_s: f64) -> Result<f64> {
    if !(residence_time_s > 0.0) {
        return Err(Error::invalid("residence_time_s", "must be positive"));
    }
    if !(duration_s >= 0.0) {
        return Err(Error::invalid("duration_s", "must be non-negative"));
    }
    Ok((-duration_s / residence_time_s).exp())
}

/// Each trapped atom survives `duration_s` independently.
pub fn apply_loss(
    state: &OccupancyState,
    duration_s: f64,
    noise: &NoiseParams,
    rng: &mut RngStream,
) -> Result<OccupancyState> {
    let p = survival_probability(duration_s, noise.residence_time_s)?;
    let mut out = state.clone();
    if p >= 1.0 {
        return Ok(out);
    }
    for o in out.occupied.iter_mut().filter(|o| **o) {
        *o = rng.bernoulli(p);
    }
    Ok(out)
}

/// Fluorescence readout: every site is read once and misread with the
/// configured false-positive / false-negative rate.
pub fn detect(state: &OccupancyState, noise: &NoiseParams, rng: &mut RngStream) -> OccupancyState {
    let fp = noise.false_positive();
    let fneg = noise.false_negative();
    let occupied = state
        .occupied
        .iter()
        .map(|&o| if o { !rng.bernoulli(fneg) } else { rng.bernoulli(fp) })
        .collect();
    OccupancyState {
        array: state.array,
        occupied,
    }
}
