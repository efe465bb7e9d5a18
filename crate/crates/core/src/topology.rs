//! Scenario generation: hexagonal area quantization, random station drops,
//! nearest-station association, and the per-subset spectral efficiency table
//! that the ratemodel and the solver consume.
//!
//! Tiling convention: flat-top hexagons, columns at `x = (sqrt(3)/2) * d * q`,
//! rows at `y = d * (r + (q mod 2) / 2)` where `d` is the center spacing.
//! Cells whose center falls in the half-open rectangle `[0, w) x [0, h)` are
//! kept; vertices are the deduplicated corners of kept cells that lie inside
//! the closed rectangle.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subset::{BtsSubset, MAX_BTS};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("grid dimensions must be positive, got {width}x{height} m with spacing {spacing} m")]
    InvalidDimensions {
        width: f64,
        height: f64,
        spacing: f64,
    },
    #[error("center spacing {spacing} m exceeds the smaller area side {side} m")]
    SpacingTooLarge { spacing: f64, side: f64 },
    #[error("cannot drop {requested} stations on {available} vertices")]
    TooManyBts { requested: usize, available: usize },
    #[error("{k} stations requested but at most {MAX_BTS} are supported")]
    TooManyStations { k: usize },
    #[error("station {bts} serves no cell; re-drop with a different seed")]
    OrphanBts { bts: usize },
    #[error("invalid radio parameters: {0}")]
    InvalidRadioParams(String),
    #[error("association missing; call associate() before building the table")]
    AssociationMissing,
    #[error("malformed efficiency table: {0}")]
    MalformedTable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x_m: f64,
    pub y_m: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x_m - other.x_m).powi(2) + (self.y_m - other.y_m).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HexCell {
    pub id: usize,
    pub center: Point,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HexVertex {
    pub id: usize,
    pub position: Point,
}

/// Hexagonal quantization of a rectangular area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HexGrid {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub center_spacing_m: f64,
    pub cells: Vec<HexCell>,
    pub vertices: Vec<HexVertex>,
}

impl HexGrid {
    /// Tile `width x height` meters with flat-top hexagons whose adjacent
    /// centers are exactly `spacing` apart.
    pub fn generate(
        area_width_m: f64,
        area_height_m: f64,
        center_spacing_m: f64,
    ) -> Result<HexGrid, TopologyError> {
        if !(area_width_m > 0.0 && area_height_m > 0.0 && center_spacing_m > 0.0)
            || !area_width_m.is_finite()
            || !area_height_m.is_finite()
            || !center_spacing_m.is_finite()
        {
            return Err(TopologyError::InvalidDimensions {
                width: area_width_m,
                height: area_height_m,
                spacing: center_spacing_m,
            });
        }
        let side = area_width_m.min(area_height_m);
        if center_spacing_m > side {
            return Err(TopologyError::SpacingTooLarge {
                spacing: center_spacing_m,
                side,
            });
        }

        let spacing = center_spacing_m;
        // Circumradius of one hexagon; adjacent centers sit at distance
        // sqrt(3) * circumradius = spacing.
        let circumradius = spacing / 3.0f64.sqrt();
        let col_step = 1.5 * circumradius; // = sqrt(3)/2 * spacing
        let tol = 1e-6 * spacing;

        let mut cells = Vec::new();
        // Cell corners land on the lattice (xi * circumradius/2, yi * spacing/4)
        // with integer (xi, yi); dedup on the integer pair.
        let mut corner_keys: BTreeMap<(i64, i64), ()> = BTreeMap::new();

        let mut q: i64 = 0;
        loop {
            let x = col_step * q as f64;
            if x > area_width_m - tol {
                break;
            }
            let y_offset = if q % 2 == 1 { 0.5 } else { 0.0 };
            let mut r: i64 = 0;
            loop {
                let y = spacing * (r as f64 + y_offset);
                if y > area_height_m - tol {
                    break;
                }
                cells.push(HexCell {
                    id: cells.len(),
                    center: Point { x_m: x, y_m: y },
                });
                // Corner offsets of a flat-top hexagon in lattice units.
                let xi0 = 3 * q;
                let yi0 = 4 * r + 2 * (q % 2);
                for (dx, dy) in [(2, 0), (1, 2), (-1, 2), (-2, 0), (-1, -2), (1, -2)] {
                    corner_keys.insert((xi0 + dx, yi0 + dy), ());
                }
                r += 1;
            }
            q += 1;
        }

        let half_r = 0.5 * circumradius;
        let quarter_v = 0.25 * spacing;
        let mut vertices = Vec::new();
        for &(xi, yi) in corner_keys.keys() {
            let p = Point {
                x_m: xi as f64 * half_r,
                y_m: yi as f64 * quarter_v,
            };
            if p.x_m >= -tol
                && p.x_m <= area_width_m + tol
                && p.y_m >= -tol
                && p.y_m <= area_height_m + tol
            {
                vertices.push(HexVertex {
                    id: vertices.len(),
                    position: p,
                });
            }
        }

        Ok(HexGrid {
            area_width_m,
            area_height_m,
            center_spacing_m,
            cells,
            vertices,
        })
    }
}

/// One station's share of a cell's traffic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CellAssociation {
    pub bts: usize,
    pub weight: f64,
}

/// A station drop on the grid plus the per-cell nearest-station association.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Deployment {
    pub grid: HexGrid,
    /// Station positions; index is the station id.
    pub bts_positions: Vec<Point>,
    /// Per cell (aligned with `grid.cells`): serving stations and weights
    /// summing to 1. Empty until [`Deployment::associate`] runs.
    pub association: Vec<Vec<CellAssociation>>,
}

impl Deployment {
    /// Drop `k` stations uniformly at random on distinct grid vertices.
    /// Association is left empty.
    pub fn place(grid: HexGrid, k: usize, seed: u64) -> Result<Deployment, TopologyError> {
        if k > MAX_BTS {
            return Err(TopologyError::TooManyStations { k });
        }
        if k > grid.vertices.len() {
            return Err(TopologyError::TooManyBts {
                requested: k,
                available: grid.vertices.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = rand::seq::index::sample(&mut rng, grid.vertices.len(), k);
        let bts_positions = chosen.iter().map(|v| grid.vertices[v].position).collect();
        Ok(Deployment {
            grid,
            bts_positions,
            association: Vec::new(),
        })
    }

    /// Build a deployment from explicit station positions (mainly for tests
    /// and replayed scenarios).
    pub fn with_positions(grid: HexGrid, bts_positions: Vec<Point>) -> Deployment {
        Deployment {
            grid,
            bts_positions,
            association: Vec::new(),
        }
    }

    /// Drop stations and compute the association in one go.
    pub fn generate(grid: HexGrid, k: usize, seed: u64) -> Result<Deployment, TopologyError> {
        let mut d = Deployment::place(grid, k, seed)?;
        d.associate();
        Ok(d)
    }

    pub fn num_bts(&self) -> usize {
        self.bts_positions.len()
    }

    /// Assign every cell to its nearest station(s). Exact distance ties split
    /// the cell's weight equally among the tied stations.
    pub fn associate(&mut self) {
        let k = self.num_bts();
        self.association = self
            .grid
            .cells
            .iter()
            .map(|cell| {
                let dists: Vec<f64> = (0..k)
                    .map(|i| cell.center.distance(&self.bts_positions[i]))
                    .collect();
                let dmin = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let tie_tol = 1e-9 * dmin.max(1.0);
                let tied: Vec<usize> = (0..k).filter(|&i| dists[i] <= dmin + tie_tol).collect();
                let w = 1.0 / tied.len() as f64;
                tied.into_iter()
                    .map(|bts| CellAssociation { bts, weight: w })
                    .collect()
            })
            .collect();
    }
}

/// Base of the logarithm in the rate formula. All entries of a table share
/// one base; switching it rescales every rate uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    fn log1p(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln_1p(),
            LogBase::Base2 => x.ln_1p() / std::f64::consts::LN_2,
        }
    }
}

/// Physical-layer parameters shared by all stations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadioParams {
    /// Transmit power spectral density, W/Hz.
    pub tx_psd_w_per_hz: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd_w_per_hz: f64,
    /// Exponent alpha in the attenuation law `d^-alpha`.
    pub pathloss_exponent: f64,
    pub log_base: LogBase,
    /// Distances are clamped below by this to keep the attenuation finite.
    pub min_distance_m: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_psd_w_per_hz: 1.0,
            noise_psd_w_per_hz: 0.125e-6,
            pathloss_exponent: 3.0,
            log_base: LogBase::Natural,
            min_distance_m: 1.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), TopologyError> {
        let bad = |what: &str| Err(TopologyError::InvalidRadioParams(what.to_string()));
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.tx_psd_w_per_hz) {
            return bad("tx PSD must be positive and finite");
        }
        if !ok(self.noise_psd_w_per_hz) {
            return bad("noise PSD must be positive and finite");
        }
        if !ok(self.pathloss_exponent) {
            return bad("pathloss exponent must be positive and finite");
        }
        if !ok(self.min_distance_m) {
            return bad("minimum distance must be positive and finite");
        }
        Ok(())
    }
}

/// Spectral efficiency `s[i][C]` of station `i` on a band where exactly the
/// stations in `C` are active, in rate per unit bandwidth. `s[i][C] = 0`
/// whenever `i` is not in `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEfficiencyTable {
    k: usize,
    /// `s[i][mask]`, mask running over all `2^k` subsets.
    s: Vec<Vec<f64>>,
}

impl SpectralEfficiencyTable {
    /// Wrap raw rows, checking the zero pattern and singleton positivity.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, TopologyError> {
        let k = rows.len();
        if k == 0 || k > MAX_BTS {
            return Err(TopologyError::MalformedTable(format!(
                "need between 1 and {MAX_BTS} rows, got {k}"
            )));
        }
        let width = 1usize << k;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(TopologyError::MalformedTable(format!(
                    "row {i} has {} entries, expected {width}",
                    row.len()
                )));
            }
            for (mask, &v) in row.iter().enumerate() {
                let member = mask & (1 << i) != 0;
                if !member && v != 0.0 {
                    return Err(TopologyError::MalformedTable(format!(
                        "s[{i}][{mask}] = {v} but station {i} is not in the subset"
                    )));
                }
                if member && !(v >= 0.0 && v.is_finite()) {
                    return Err(TopologyError::MalformedTable(format!(
                        "s[{i}][{mask}] = {v} is not a finite nonnegative rate"
                    )));
                }
            }
            let singleton = row[1 << i];
            // Entries are already finite and nonnegative here.
            if singleton == 0.0 {
                return Err(TopologyError::MalformedTable(format!(
                    "s[{i}][{{{i}}}] = {singleton}; a station alone on a band must have positive rate"
                )));
            }
        }
        Ok(SpectralEfficiencyTable { k, s: rows })
    }

    pub fn num_bts(&self) -> usize {
        self.k
    }

    pub fn num_subsets(&self) -> usize {
        1 << self.k
    }

    #[inline]
    pub fn get(&self, i: usize, c: BtsSubset) -> f64 {
        self.s[i][c.mask() as usize]
    }

    /// Rate vector `[s_0(B), .., s_{k-1}(B)]` for one sharing combination.
    pub fn rate_column(&self, b: BtsSubset) -> Vec<f64> {
        (0..self.k).map(|i| self.get(i, b)).collect()
    }
}

/// Compute the efficiency table for a deployment with every station using the
/// same transmit PSD from `radio`.
pub fn build_efficiency_table(
    deployment: &Deployment,
    radio: &RadioParams,
) -> Result<SpectralEfficiencyTable, TopologyError> {
    let psd = vec![radio.tx_psd_w_per_hz; deployment.num_bts()];
    build_efficiency_table_with_psd(deployment, radio, &psd)
}

/// Compute the efficiency table with an explicit per-station transmit PSD
/// (W/Hz). Station `j`'s interference contribution uses `tx_psd[j]`.
///
/// For each cell served by station `i` and each subset `C` containing `i`,
/// the cell-level efficiency is `log(1 + p_i g_i / (sum_{j in C, j != i}
/// p_j g_j + n))` with `g_j = max(d_j, d_min)^-alpha`; the table entry is the
/// association-weighted mean over the cells station `i` serves.
pub fn build_efficiency_table_with_psd(
    deployment: &Deployment,
    radio: &RadioParams,
    tx_psd: &[f64],
) -> Result<SpectralEfficiencyTable, TopologyError> {
    radio.validate()?;
    let k = deployment.num_bts();
    if k == 0 || k > MAX_BTS {
        return Err(TopologyError::TooManyStations { k });
    }
    if tx_psd.len() != k {
        return Err(TopologyError::InvalidRadioParams(format!(
            "got {} PSD entries for {k} stations",
            tx_psd.len()
        )));
    }
    if tx_psd.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(TopologyError::InvalidRadioParams(
            "per-station PSD must be positive and finite".into(),
        ));
    }
    if deployment.association.len() != deployment.grid.cells.len() {
        return Err(TopologyError::AssociationMissing);
    }

    // Received PSD p_j * g_j at each cell center from each station.
    let alpha = radio.pathloss_exponent;
    let received: Vec<Vec<f64>> = deployment
        .grid
        .cells
        .iter()
        .map(|cell| {
            (0..k)
                .map(|j| {
                    let d = cell
                        .center
                        .distance(&deployment.bts_positions[j])
                        .max(radio.min_distance_m);
                    tx_psd[j] * d.powf(-alpha)
                })
                .collect()
        })
        .collect();

    // Cells served by each station, with association weights.
    let mut served: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for (cell_idx, assoc) in deployment.association.iter().enumerate() {
        for a in assoc {
            if a.weight > 0.0 {
                served[a.bts].push((cell_idx, a.weight));
            }
        }
    }
    if let Some(i) = (0..k).find(|&i| served[i].is_empty()) {
        return Err(TopologyError::OrphanBts { bts: i });
    }

    let noise = radio.noise_psd_w_per_hz;
    let num_masks = 1usize << k;
    let mut rows = vec![vec![0.0; num_masks]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        let total_weight: f64 = served[i].iter().map(|&(_, w)| w).sum();
        for (mask, entry) in row.iter_mut().enumerate().skip(1) {
            if mask & (1 << i) == 0 {
                continue;
            }
            let mut acc = 0.0;
            for &(cell_idx, w) in &served[i] {
                let rx = &received[cell_idx];
                let mut interference = 0.0;
                let mut rest = mask & !(1 << i);
                while rest != 0 {
                    let j = rest.trailing_zeros() as usize;
                    interference += rx[j];
                    rest &= rest - 1;
                }
                let sinr = rx[i] / (interference + noise);
                acc += w * radio.log_base.log1p(sinr);
            }
            *entry = acc / total_weight;
        }
    }

    SpectralEfficiencyTable::from_rows(rows)
}

/// A fully generated scenario, serializable so experiments replay without
/// re-running the RNG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub deployment: Deployment,
    pub radio: RadioParams,
    pub table: SpectralEfficiencyTable,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String, TopologyError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Scenario, TopologyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TopologyError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Scenario, TopologyError> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }
}
