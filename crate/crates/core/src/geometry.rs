//! Interleaved dual-array lattice: site indexing, trap-depth envelope,
//! region masks and the main/secondary reservoir adjacency.
//!
//! Sites are indexed row-major from the top-left corner of each array.
//! Positions are in µm, measured from main site (0, 0). The secondary array
//! sits at a fixed offset (default half a pitch along both axes), so each
//! interior main site has four secondary neighbours at distance pitch/√2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major site index within one array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub usize);

impl SiteId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for SiteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArrayTag {
    #[serde(rename = "main")]
    Main,
    #[serde(rename = "sec")]
    Secondary,
}

/// One quadratic-grid tweezer array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapArrayParams {
    pub pitch_um: f64,
    /// 1/e² intensity radius of a single tweezer. Informational only.
    pub waist_um: f64,
    /// 1/e² radius of the Gaussian illumination envelope, in pitches.
    pub envelope_radius_pitches: f64,
    /// Depth of the central trap in units of k_B × mK.
    pub depth_center_mk: f64,
    pub wavelength_nm: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for TrapArrayParams {
    fn default() -> Self {
        Self {
            pitch_um: 5.2,
            waist_um: 1.0,
            envelope_radius_pitches: 32.0,
            depth_center_mk: 0.5,
            wavelength_nm: 799.5,
            rows: 48,
            cols: 48,
        }
    }
}

impl TrapArrayParams {
    pub fn square(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pitch_um > 0.0 && self.pitch_um.is_finite()) {
            return Err(Error::invalid("pitch_um", "must be positive and finite"));
        }
        if !(self.envelope_radius_pitches > 0.0) {
            return Err(Error::invalid("envelope_radius_pitches", "must be positive"));
        }
        if !(self.depth_center_mk > 0.0) {
            return Err(Error::invalid("depth_center_mk", "must be positive"));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("rows/cols", "grid must have at least one site"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn site(&self, row: usize, col: usize) -> Result<SiteId> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::SiteOutOfRange {
                index: row * self.cols + col,
                len: self.len(),
            });
        }
        Ok(SiteId(row * self.cols + col))
    }

    pub fn check(&self, id: SiteId) -> Result<()> {
        if id.0 >= self.len() {
            return Err(Error::SiteOutOfRange {
                index: id.0,
                len: self.len(),
            });
        }
        Ok(())
    }

    pub fn row_col(&self, id: SiteId) -> (usize, usize) {
        (id.0 / self.cols, id.0 % self.cols)
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteId> {
        (0..self.len()).map(SiteId)
    }

    /// Geometric centroid of the grid in (row, col) pitch units.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.rows as f64 - 1.0) / 2.0,
            (self.cols as f64 - 1.0) / 2.0,
        )
    }

    /// Squared distance from the grid centroid, in pitches².
    pub fn radius_sq_pitches(&self, id: SiteId) -> f64 {
        let (r, c) = self.row_col(id);
        let (cr, cc) = self.center();
        let dr = r as f64 - cr;
        let dc = c as f64 - cc;
        dr * dr + dc * dc
    }

    /// Trap depth relative to the central trap, exp(−2 r²/w²).
    pub fn depth_ratio(&self, id: SiteId) -> Result<f64> {
        self.check(id)?;
        Ok(envelope_ratio(
            self.radius_sq_pitches(id),
            self.envelope_radius_pitches,
        ))
    }

    /// All sites whose relative depth is at least `min_ratio`.
    pub fn sufficient_sites(&self, min_ratio: f64) -> Result<RegionMask> {
        if !(min_ratio > 0.0 && min_ratio <= 1.0) {
            return Err(Error::invalid("min_ratio", "must lie in (0, 1]"));
        }
        let w = self.envelope_radius_pitches;
        RegionMask::from_predicate(self, |id| {
            envelope_ratio(self.radius_sq_pitches(id), w) >= min_ratio
        })
    }
}

/// Gaussian envelope exp(−2 r²/w²) with r² and w in pitches.
pub fn envelope_ratio(radius_sq: f64, envelope_radius: f64) -> f64 {
    (-2.0 * radius_sq / (envelope_radius * envelope_radius)).exp()
}

/// Position of a site in µm: (col × pitch, row × pitch) + offset.
pub fn site_position(grid: &TrapArrayParams, id: SiteId, offset: [f64; 2]) -> Result<[f64; 2]> {
    grid.check(id)?;
    let (r, c) = grid.row_col(id);
    Ok([
        c as f64 * grid.pitch_um + offset[0],
        r as f64 * grid.pitch_um + offset[1],
    ])
}

/// Main array plus a secondary array displaced by `offset`.
///
/// The reservoir adjacency (secondary sites within pitch/√2 of a main site)
/// is computed once at construction.
#[derive(Debug, Clone)]
pub struct InterleavedLayout {
    main: TrapArrayParams,
    secondary: TrapArrayParams,
    offset: [f64; 2],
    main_to_sec: Vec<Vec<SiteId>>,
    sec_to_main: Vec<Vec<SiteId>>,
}

impl InterleavedLayout {
    pub fn new(main: TrapArrayParams, secondary: TrapArrayParams, offset: [f64; 2]) -> Result<Self> {
        main.validate()?;
        secondary.validate()?;
        if !(offset[0].is_finite() && offset[1].is_finite()) {
            return Err(Error::invalid("offset_um", "must be finite"));
        }

        let reach = main.pitch_um / std::f64::consts::SQRT_2;
        let reach_sq = reach * reach * (1.0 + 1e-9);
        let sp = secondary.pitch_um;
        let mut main_to_sec = vec![Vec::new(); main.len()];
        let mut sec_to_main = vec![Vec::new(); secondary.len()];

        for m in main.sites() {
            let [x, y] = site_position(&main, m, [0.0, 0.0])?;
            let col_lo = ((x - offset[0] - reach) / sp).floor().max(0.0) as usize;
            let col_hi = ((x - offset[0] + reach) / sp).ceil();
            let row_lo = ((y - offset[1] - reach) / sp).floor().max(0.0) as usize;
            let row_hi = ((y - offset[1] + reach) / sp).ceil();
            if col_hi < 0.0 || row_hi < 0.0 {
                continue;
            }
            let col_hi = (col_hi as usize).min(secondary.cols - 1);
            let row_hi = (row_hi as usize).min(secondary.rows - 1);
            for r in row_lo..=row_hi {
                for c in col_lo..=col_hi {
                    let s = SiteId(r * secondary.cols + c);
                    let [sx, sy] = site_position(&secondary, s, offset)?;
                    let d2 = (sx - x).powi(2) + (sy - y).powi(2);
                    if d2 <= reach_sq {
                        main_to_sec[m.0].push(s);
                        sec_to_main[s.0].push(m);
                    }
                }
            }
        }
        // Row-major scans above already yield ascending order on both sides.
        Ok(Self {
            main,
            secondary,
            offset,
            main_to_sec,
            sec_to_main,
        })
    }

    /// Two identical arrays with the secondary offset by half a pitch diagonally.
    pub fn symmetric(grid: TrapArrayParams) -> Result<Self> {
        let half = grid.pitch_um / 2.0;
        Self::new(grid.clone(), grid, [half, half])
    }

    pub fn main(&self) -> &TrapArrayParams {
        &self.main
    }

    pub fn secondary(&self) -> &TrapArrayParams {
        &self.secondary
    }

    pub fn grid(&self, tag: ArrayTag) -> &TrapArrayParams {
        match tag {
            ArrayTag::Main => &self.main,
            ArrayTag::Secondary => &self.secondary,
        }
    }

    pub fn offset(&self) -> [f64; 2] {
        self.offset
    }

    pub fn position(&self, tag: ArrayTag, id: SiteId) -> Result<[f64; 2]> {
        match tag {
            ArrayTag::Main => site_position(&self.main, id, [0.0, 0.0]),
            ArrayTag::Secondary => site_position(&self.secondary, id, self.offset),
        }
    }

    pub fn distance_um(&self, a: (ArrayTag, SiteId), b: (ArrayTag, SiteId)) -> Result<f64> {
        let [ax, ay] = self.position(a.0, a.1)?;
        let [bx, by] = self.position(b.0, b.1)?;
        Ok((ax - bx).hypot(ay - by))
    }

    /// Secondary sites adjacent to a main site, ascending by index.
    pub fn reservoir_neighbors(&self, main_site: SiteId) -> Result<&[SiteId]> {
        self.main.check(main_site)?;
        Ok(&self.main_to_sec[main_site.0])
    }

    /// Main sites adjacent to a secondary site, ascending by index.
    pub fn main_neighbors(&self, sec_site: SiteId) -> Result<&[SiteId]> {
        self.secondary.check(sec_site)?;
        Ok(&self.sec_to_main[sec_site.0])
    }
}

/// Serializable description of a region, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaskSpec {
    Square { k: usize },
    Clusters { m: usize, k: usize, gap: usize },
    Disk { radius_pitches: f64 },
    Sites { ids: Vec<usize> },
}

impl MaskSpec {
    pub fn build(&self, grid: &TrapArrayParams) -> Result<RegionMask> {
        match *self {
            MaskSpec::Square { k } => RegionMask::square(grid, k),
            MaskSpec::Clusters { m, k, gap } => RegionMask::clusters(grid, m, k, gap),
            MaskSpec::Disk { radius_pitches } => RegionMask::disk(grid, radius_pitches),
            MaskSpec::Sites { ref ids } => {
                RegionMask::from_sites(grid, ids.iter().copied().map(SiteId))
            }
        }
    }
}

/// A set of sites on one array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    rows: usize,
    cols: usize,
    member: Vec<bool>,
    sites: Vec<SiteId>,
}

impl RegionMask {
    fn from_predicate(grid: &TrapArrayParams, mut keep: impl FnMut(SiteId) -> bool) -> Result<Self> {
        let member: Vec<bool> = grid.sites().map(&mut keep).collect();
        Ok(Self::from_members(grid, member))
    }

    fn from_members(grid: &TrapArrayParams, member: Vec<bool>) -> Self {
        let sites = member
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(SiteId(i)))
            .collect();
        Self {
            rows: grid.rows,
            cols: grid.cols,
            member,
            sites,
        }
    }

    pub fn all(grid: &TrapArrayParams) -> Self {
        Self::from_members(grid, vec![true; grid.len()])
    }

    pub fn empty(grid: &TrapArrayParams) -> Self {
        Self::from_members(grid, vec![false; grid.len()])
    }

    /// Centered k×k square. The top-left corner sits at
    /// ((rows − k)/2, (cols − k)/2) with integer division.
    pub fn square(grid: &TrapArrayParams, k: usize) -> Result<Self> {
        Self::clusters(grid, 1, k, 0)
    }

    /// An m×m arrangement of k×k clusters separated by `gap` empty sites,
    /// centered with the same rule as [`RegionMask::square`].
    pub fn clusters(grid: &TrapArrayParams, m: usize, k: usize, gap: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::MaskOutOfBounds(format!(
                "cluster pattern {m}×({k}×{k}) is empty"
            )));
        }
        let extent = m * k + (m - 1) * gap;
        if extent > grid.rows || extent > grid.cols {
            return Err(Error::MaskOutOfBounds(format!(
                "pattern extent {extent} exceeds {}×{} grid",
                grid.rows, grid.cols
            )));
        }
        let top = (grid.rows - extent) / 2;
        let left = (grid.cols - extent) / 2;
        let period = k + gap;
        let mut member = vec![false; grid.len()];
        for r in 0..extent {
            for c in 0..extent {
                if r % period < k && c % period < k {
                    member[(top + r) * grid.cols + left + c] = true;
                }
            }
        }
        Ok(Self::from_members(grid, member))
    }

    /// Sites within `radius` pitches of the grid centroid, clipped to the grid.
    pub fn disk(grid: &TrapArrayParams, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::MaskOutOfBounds(format!(
                "disk radius {radius} must be finite and non-negative"
            )));
        }
        let r2 = radius * radius;
        Self::from_predicate(grid, |id| grid.radius_sq_pitches(id) <= r2)
    }

    pub fn from_sites(grid: &TrapArrayParams, ids: impl IntoIterator<Item = SiteId>) -> Result<Self> {
        let mut member = vec![false; grid.len()];
        for id in ids {
            grid.check(id)?;
            member[id.0] = true;
        }
        Ok(Self::from_members(grid, member))
    }

    pub fn contains(&self, id: SiteId) -> bool {
        self.member.get(id.0).copied().unwrap_or(false)
    }

    /// Member sites in ascending index order.
    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn fits(&self, grid: &TrapArrayParams) -> bool {
        self.rows == grid.rows && self.cols == grid.cols
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }
}
