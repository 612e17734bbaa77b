//! Width-sweep profile tables and tail-free candidate extraction.
//!
//! A profile table holds, per layer width, the latency, utilization, and
//! throughput of a layer. Tables are either produced analytically from the
//! wave model or ingested from measurements. Candidate widths are the
//! settings that maximize utilization times throughput, i.e. the right
//! edges of the latency staircase where no tail is left idle.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Error;
use crate::gpu::{self, GpuSpec, LayerSpec};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Largest width a generated sweep may cover.
pub const MAX_SWEEP_WIDTH: u32 = 4096;

/// Relative tolerance under which two efficiency scores count as equal.
/// Rows that are algebraically identical (e.g. two full-wave widths) can
/// differ by a few ulps once computed in floating point; anything within
/// this band is the same configuration quality.
pub const SCORE_REL_TOL: f64 = 1e-12;

/// Relative tolerance for `throughput * latency == flops` on stored rows.
pub const ROW_RECONCILE_TOL: f64 = 1e-9;

/// Where a table's numbers came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ProfileSource {
    Analytical,
    Empirical,
}

/// One measured or modeled width setting.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ProfileRow {
    pub width: u32,
    pub latency_s: f64,
    pub flops: f64,
    /// Fraction of SM capacity occupied, in (0, 1].
    pub utilization: f64,
    /// FLOP/s at this width.
    pub throughput: f64,
}

/// A layer's width sweep, widths strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub layer_id: String,
    /// Geometry the sweep was generated from. Absent for ingested tables,
    /// whose files carry no kernel shape.
    pub base_layer: Option<LayerSpec>,
    pub rows: Vec<ProfileRow>,
    pub source: ProfileSource,
    /// True when utilization was backfilled from normalized throughput
    /// rather than provided.
    pub utilization_estimated: bool,
}

impl ProfileTable {
    /// Validates row invariants and builds the table.
    pub fn new(
        layer_id: String,
        base_layer: Option<LayerSpec>,
        rows: Vec<ProfileRow>,
        source: ProfileSource,
        utilization_estimated: bool,
    ) -> Result<Self, Error> {
        if rows.is_empty() {
            return Err(Error::InvalidProfile(String::from("table has no rows")));
        }
        let mut prev_width = 0u32;
        for row in &rows {
            if row.width == 0 {
                return Err(Error::InvalidProfile(String::from("width 0 is not a layer setting")));
            }
            if row.width <= prev_width && prev_width != 0 {
                return Err(Error::InvalidProfile(alloc::format!(
                    "widths must be strictly increasing ({} follows {})",
                    row.width, prev_width
                )));
            }
            prev_width = row.width;
            if !row.latency_s.is_finite() || row.latency_s <= 0.0 {
                return Err(Error::InvalidProfile(alloc::format!(
                    "latency at width {} must be positive",
                    row.width
                )));
            }
            if row.utilization.is_nan() || row.utilization <= 0.0 || row.utilization > 1.0 {
                return Err(Error::InvalidProfile(alloc::format!(
                    "utilization at width {} must lie in (0, 1]",
                    row.width
                )));
            }
            let recon = row.throughput * row.latency_s;
            if !approx_eq(recon, row.flops, ROW_RECONCILE_TOL) {
                return Err(Error::InvalidProfile(alloc::format!(
                    "throughput x latency disagrees with flops at width {}",
                    row.width
                )));
            }
        }
        Ok(ProfileTable {
            layer_id,
            base_layer,
            rows,
            source,
            utilization_estimated,
        })
    }

    /// Sweeps the wave model over `widths`, substituting each width for the
    /// layer's filter count.
    pub fn analytical(layer: &LayerSpec, gpu: &GpuSpec, widths: &[u32]) -> Result<Self, Error> {
        layer.validate()?;
        gpu.validate()?;
        if widths.is_empty() {
            return Err(Error::InvalidWidths(String::from("width list is empty")));
        }
        let mut prev = 0u32;
        for &w in widths {
            if w == 0 {
                return Err(Error::InvalidWidths(String::from("width 0 is not a layer setting")));
            }
            if w <= prev && prev != 0 {
                return Err(Error::InvalidWidths(alloc::format!(
                    "widths must be strictly increasing ({w} follows {prev})"
                )));
            }
            if w > MAX_SWEEP_WIDTH {
                return Err(Error::InvalidWidths(alloc::format!(
                    "width {w} exceeds the sweep cap of {MAX_SWEEP_WIDTH}"
                )));
            }
            prev = w;
        }
        let rows = widths
            .iter()
            .map(|&w| {
                let at = layer.with_filters(w);
                ProfileRow {
                    width: w,
                    latency_s: gpu::predict_latency(&at, gpu),
                    flops: gpu::layer_flops(&at),
                    utilization: gpu::predict_utilization(&at, gpu),
                    throughput: gpu::predict_throughput(&at, gpu),
                }
            })
            .collect();
        Ok(ProfileTable {
            layer_id: layer.layer_id.clone(),
            base_layer: Some(layer.clone()),
            rows,
            source: ProfileSource::Analytical,
            utilization_estimated: false,
        })
    }

    pub fn row(&self, width: u32) -> Option<&ProfileRow> {
        self.rows
            .binary_search_by_key(&width, |r| r.width)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Latency lookup; widths off the grid are an error, never interpolated.
    pub fn latency(&self, width: u32) -> Result<f64, Error> {
        self.row(width)
            .map(|r| r.latency_s)
            .ok_or_else(|| Error::WidthNotProfiled {
                layer_id: self.layer_id.clone(),
                width,
            })
    }

    pub fn widths(&self) -> impl Iterator<Item = u32> + '_ {
        self.rows.iter().map(|r| r.width)
    }
}

/// The tail-free width settings of one layer, ascending, with their
/// utilization x throughput scores.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CandidateSet {
    pub layer_id: String,
    pub candidates: Vec<u32>,
    pub scores: Vec<f64>,
    /// Requested maximum count.
    pub m: usize,
}

impl CandidateSet {
    /// Nearest candidate strictly below `from`, i.e. the scale-down target.
    pub fn scale_down(&self, from: u32) -> Option<u32> {
        self.candidates.iter().copied().filter(|&c| c < from).max()
    }

    /// Nearest candidate strictly above `from`, i.e. the scale-up target.
    pub fn scale_up(&self, from: u32) -> Option<u32> {
        self.candidates.iter().copied().filter(|&c| c > from).min()
    }
}

fn abs64(x: f64) -> f64 {
    if x.is_sign_negative() {
        -x
    } else {
        x
    }
}

fn max64(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

fn approx_eq(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || abs64(a - b) <= rel_tol * max64(abs64(a), abs64(b))
}

/// Score comparison with the tie band applied.
fn score_cmp(a: f64, b: f64) -> Ordering {
    if approx_eq(a, b, SCORE_REL_TOL) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Extracts up to `m` optimal width candidates: the local maxima of the
/// utilization x throughput score, plus a grid boundary when it ties the
/// global best (a sweep that ends exactly on a full wave, or a monotone
/// score curve whose best setting is the last width).
///
/// When more than `m` qualify, the `m` best scores are kept; ties go to the
/// larger width, which buys capacity at no modeled latency cost.
pub fn identify_candidates(table: &ProfileTable, m: usize) -> Result<CandidateSet, Error> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: String::from("at least one candidate must be requested"),
        });
    }
    let scores: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.utilization * r.throughput)
        .collect();
    let n = scores.len();

    let mut picked: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| {
            score_cmp(scores[i], scores[i - 1]) != Ordering::Less
                && score_cmp(scores[i], scores[i + 1]) != Ordering::Less
        })
        .collect();

    let global = scores.iter().copied().fold(f64::NEG_INFINITY, max64);
    for boundary in [0, n - 1] {
        if score_cmp(scores[boundary], global) == Ordering::Equal && !picked.contains(&boundary) {
            picked.push(boundary);
        }
    }
    picked.sort_unstable();

    if picked.len() > m {
        // Rank by score, grouping values inside the tie band, then prefer
        // larger widths within a group.
        let mut order = picked.clone();
        order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut ranked: Vec<(usize, usize)> = Vec::with_capacity(order.len());
        let mut group = 0usize;
        let mut repr = scores[order[0]];
        for &idx in &order {
            if score_cmp(scores[idx], repr) != Ordering::Equal {
                group += 1;
                repr = scores[idx];
            }
            ranked.push((group, idx));
        }
        ranked.sort_unstable_by(|a, b| {
            a.0.cmp(&b.0)
                .then(table.rows[b.1].width.cmp(&table.rows[a.1].width))
        });
        picked = ranked.into_iter().take(m).map(|(_, idx)| idx).collect();
        picked.sort_unstable();
    }

    Ok(CandidateSet {
        layer_id: table.layer_id.clone(),
        candidates: picked.iter().map(|&i| table.rows[i].width).collect(),
        scores: picked.iter().map(|&i| scores[i]).collect(),
        m,
    })
}
