//! Width-configuration optimization against per-layer profile tables.
//!
//! Latency mode greedily scales the highest-gain layers down onto
//! tail-free candidate widths while scaling the cheapest layers up to keep
//! the total parameter change inside a tolerance band. Accuracy mode fills
//! each layer's current wave to its right staircase edge, buying capacity
//! at exactly zero latency cost.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::gpu::{FilterStyle, LayerSpec};
use crate::profile::{identify_candidates, CandidateSet, ProfileTable};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Units used for parameter-gain accounting.
///
/// `WidthDelta` is the raw filter-count change. `ParamCount` weighs the
/// change by per-filter parameters, which keeps sums comparable across
/// layers of different kernel shapes and is therefore the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum GainMetric {
    #[cfg_attr(feature = "serde", serde(rename = "width"))]
    WidthDelta,
    #[cfg_attr(feature = "serde", serde(rename = "params"))]
    #[default]
    ParamCount,
}

/// One layer of a model together with its active width.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ModelLayer {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub spec: LayerSpec,
    /// Currently active filter count, in `[1, spec.filters]`.
    pub width: u32,
}

/// A model as an ordered list of layers with their current widths.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ModelConfig {
    pub name: String,
    pub layers: Vec<ModelLayer>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.layers.is_empty() {
            return Err(Error::InvalidModel(String::from("model has no layers")));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.spec.validate()?;
            if layer.width == 0 || layer.width > layer.spec.filters {
                return Err(Error::InvalidModel(alloc::format!(
                    "layer `{}` width {} is outside [1, {}]",
                    layer.spec.layer_id, layer.width, layer.spec.filters
                )));
            }
            for other in &self.layers[..i] {
                if other.spec.layer_id == layer.spec.layer_id {
                    return Err(Error::InvalidModel(alloc::format!(
                        "duplicate layer id `{}`",
                        layer.spec.layer_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Latency saved by moving a layer between two profiled widths.
/// Positive when the move sheds at least one wave.
pub fn latency_gain(table: &ProfileTable, r_old: u32, r_new: u32) -> Result<f64, Error> {
    Ok(table.latency(r_old)? - table.latency(r_new)?)
}

/// Capacity change of moving a layer between two widths; negative when
/// scaling down.
pub fn parameter_gain(layer: &LayerSpec, r_old: u32, r_new: u32, metric: GainMetric) -> f64 {
    let delta = r_new as f64 - r_old as f64;
    match metric {
        GainMetric::WidthDelta => delta,
        GainMetric::ParamCount => {
            let depth = match layer.filter_style {
                FilterStyle::Dense => layer.in_depth as f64,
                FilterStyle::Depthwise => 1.0,
            };
            delta * layer.kernel_h as f64 * layer.kernel_w as f64 * depth
        }
    }
}

/// Per-layer gain estimates for the first scale-down step of each layer,
/// recomputable from the tables at any time. Layers with no candidate
/// below their current width estimate as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GainLedger {
    pub latency_gain: Vec<f64>,
    pub parameter_gain: Vec<f64>,
    pub metric: GainMetric,
}

/// Builds the initial gain ledger used to order greedy picks.
pub fn estimate_gains(
    model: &ModelConfig,
    tables: &[ProfileTable],
    m: usize,
    metric: GainMetric,
) -> Result<GainLedger, Error> {
    model.validate()?;
    let resolved = resolve_tables(model, tables)?;
    let mut lg = Vec::with_capacity(model.layers.len());
    let mut pg = Vec::with_capacity(model.layers.len());
    for (layer, table) in model.layers.iter().zip(&resolved) {
        let cands = identify_candidates(table, m)?;
        match cands.scale_down(layer.width) {
            Some(down) => {
                lg.push(latency_gain(table, layer.width, down)?);
                pg.push(parameter_gain(&layer.spec, layer.width, down, metric));
            }
            None => {
                lg.push(0.0);
                pg.push(0.0);
            }
        }
    }
    Ok(GainLedger {
        latency_gain: lg,
        parameter_gain: pg,
        metric,
    })
}

/// Direction a layer moved in a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PlanAction {
    Down,
    Up,
    Keep,
}

/// Objective a plan was produced under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizeMode {
    Latency,
    Accuracy,
}

/// One layer's entry in an optimization plan.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LayerPlan {
    pub layer_id: String,
    pub r_old: u32,
    pub r_new: u32,
    pub lg_seconds: f64,
    pub pg: f64,
    pub action: PlanAction,
}

/// The result of an optimization run. Retraining and accuracy evaluation
/// of the reconfigured model are delegated to an external pipeline.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OptimizationPlan {
    pub model: String,
    pub mode: OptimizeMode,
    pub metric: GainMetric,
    pub layers: Vec<LayerPlan>,
    pub total_lg_seconds: f64,
    pub total_pg: f64,
    pub l_old_seconds: f64,
    pub l_new_seconds: f64,
    /// Parameter-gain tolerance in effect for the returned configuration,
    /// after any doublings. Unused (zero) in accuracy mode.
    pub tau_final: f64,
    pub delta_target: f64,
    pub feasible: bool,
    pub notes: Vec<String>,
}

/// Parameters of the latency-oriented greedy.
#[derive(Clone, Copy, Debug)]
pub struct LatencyOptimizeParams {
    /// Candidate count per layer.
    pub m: usize,
    /// Parameter-gain tolerance band, in the active metric's units.
    pub tau: f64,
    /// Targeted latency ratio: the plan must reach `L_new <= delta * L_old`.
    pub delta: f64,
    pub metric: GainMetric,
    /// How many times tau may be doubled before giving up.
    pub max_retries: u32,
}

pub const DEFAULT_M: usize = 5;
pub const DEFAULT_DELTA: f64 = 0.85;
pub const DEFAULT_MAX_RETRIES: u32 = 8;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Free,
    Down,
    Up,
}

struct LayerCtx<'a> {
    layer: &'a ModelLayer,
    table: &'a ProfileTable,
    cands: CandidateSet,
}

impl LayerCtx<'_> {
    fn latency(&self, width: u32) -> f64 {
        self.table
            .latency(width)
            .expect("candidate widths come from the table grid")
    }

    /// The next one-step scale-down and its latency gain, if any.
    fn next_down(&self, width: u32) -> Option<(u32, f64)> {
        let down = self.cands.scale_down(width)?;
        Some((down, self.latency(width) - self.latency(down)))
    }

    /// The next one-step scale-up target, bounded by the declared maximum.
    fn next_up(&self, width: u32) -> Option<u32> {
        self.cands.scale_up(width).filter(|&up| up <= self.layer.spec.filters)
    }
}

#[derive(Clone)]
struct RoundState {
    width: Vec<u32>,
    mode: Vec<Mode>,
    decided: Vec<bool>,
}

fn total_pg(ctxs: &[LayerCtx<'_>], state: &RoundState, metric: GainMetric) -> f64 {
    ctxs.iter()
        .zip(&state.width)
        .map(|(ctx, &w)| parameter_gain(&ctx.layer.spec, ctx.layer.width, w, metric))
        .sum()
}

fn in_band(pg: f64, tau: f64) -> bool {
    -tau < pg && pg < tau
}

/// Restores the parameter-gain band by scaling up donors in min-gain
/// order. Donors whose jump would overshoot the band are passed over.
/// Returns false when the band cannot be restored, in which case the
/// caller rolls the whole transaction back.
#[allow(clippy::needless_range_loop)]
fn rebalance(
    ctxs: &[LayerCtx<'_>],
    state: &mut RoundState,
    active: usize,
    tau: f64,
    metric: GainMetric,
) -> bool {
    let n = ctxs.len();
    let mut passed_over = vec![false; n];
    loop {
        let pg = total_pg(ctxs, state, metric);
        if in_band(pg, tau) {
            return true;
        }
        if pg >= tau {
            // Scale-downs only push the total negative; a positive breach
            // cannot be repaired by more ups.
            return false;
        }
        // Cheapest donor first: the layer whose next scale-down would gain
        // the least latency is the one we sacrifice for capacity.
        let mut pick: Option<(f64, usize, u32)> = None;
        for i in 0..n {
            if i == active || passed_over[i] || state.decided[i] || state.mode[i] == Mode::Down {
                continue;
            }
            let Some(up) = ctxs[i].next_up(state.width[i]) else {
                continue;
            };
            let key = ctxs[i]
                .next_down(state.width[i])
                .map(|(_, lg)| lg)
                .unwrap_or(0.0);
            let better = match pick {
                None => true,
                Some((best, _, _)) => key < best,
            };
            if better {
                pick = Some((key, i, up));
            }
        }
        let Some((_, k, up)) = pick else {
            return false;
        };
        let before = state.width[k];
        state.width[k] = up;
        if total_pg(ctxs, state, metric) >= tau {
            state.width[k] = before;
            passed_over[k] = true;
        } else {
            state.mode[k] = Mode::Up;
        }
    }
}

/// One greedy pass at a fixed tau. Scale-downs are taken one candidate
/// step at a time, highest latency gain first, and each step is a
/// transaction: if the band cannot be rebalanced afterwards the step and
/// its compensating ups are rolled back and that layer is settled.
#[allow(clippy::needless_range_loop)]
fn run_round(ctxs: &[LayerCtx<'_>], tau: f64, metric: GainMetric) -> Vec<u32> {
    let n = ctxs.len();
    let mut state = RoundState {
        width: ctxs.iter().map(|c| c.layer.width).collect(),
        mode: vec![Mode::Free; n],
        decided: vec![false; n],
    };
    loop {
        let mut pick: Option<(f64, usize, u32)> = None;
        for i in 0..n {
            if state.decided[i] || state.mode[i] == Mode::Up {
                continue;
            }
            let Some((down, lg)) = ctxs[i].next_down(state.width[i]) else {
                continue;
            };
            if lg <= 0.0 {
                // A flat step only costs capacity.
                continue;
            }
            let better = match pick {
                None => true,
                Some((best, _, _)) => lg > best,
            };
            if better {
                pick = Some((lg, i, down));
            }
        }
        let Some((_, j, down)) = pick else {
            break;
        };
        let snapshot = state.clone();
        state.width[j] = down;
        state.mode[j] = Mode::Down;
        if !rebalance(ctxs, &mut state, j, tau, metric) {
            state = snapshot;
            state.decided[j] = true;
        }
    }
    state.width
}

fn resolve_tables<'a>(
    model: &ModelConfig,
    tables: &'a [ProfileTable],
) -> Result<Vec<&'a ProfileTable>, Error> {
    model
        .layers
        .iter()
        .map(|layer| {
            let table = tables
                .iter()
                .find(|t| t.layer_id == layer.spec.layer_id)
                .ok_or_else(|| Error::MissingTable {
                    layer_id: layer.spec.layer_id.clone(),
                })?;
            table.latency(layer.width)?;
            Ok(table)
        })
        .collect()
}

fn build_ctxs<'a>(
    model: &'a ModelConfig,
    resolved: &[&'a ProfileTable],
    m: usize,
) -> Result<Vec<LayerCtx<'a>>, Error> {
    model
        .layers
        .iter()
        .zip(resolved)
        .map(|(layer, table)| {
            Ok(LayerCtx {
                layer,
                table,
                cands: identify_candidates(table, m)?,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn build_plan(
    model: &ModelConfig,
    resolved: &[&ProfileTable],
    widths: &[u32],
    mode: OptimizeMode,
    metric: GainMetric,
    tau_final: f64,
    delta_target: f64,
    notes: Vec<String>,
) -> Result<OptimizationPlan, Error> {
    let mut layers = Vec::with_capacity(model.layers.len());
    let mut total_lg = 0.0;
    let mut total_pg_value = 0.0;
    let mut l_old = 0.0;
    let mut l_new = 0.0;
    for ((layer, table), &r_new) in model.layers.iter().zip(resolved).zip(widths) {
        let r_old = layer.width;
        let lg = latency_gain(table, r_old, r_new)?;
        let pg = parameter_gain(&layer.spec, r_old, r_new, metric);
        total_lg += lg;
        total_pg_value += pg;
        l_old += table.latency(r_old)?;
        l_new += table.latency(r_new)?;
        let action = match r_new.cmp(&r_old) {
            core::cmp::Ordering::Less => PlanAction::Down,
            core::cmp::Ordering::Greater => PlanAction::Up,
            core::cmp::Ordering::Equal => PlanAction::Keep,
        };
        layers.push(LayerPlan {
            layer_id: layer.spec.layer_id.clone(),
            r_old,
            r_new,
            lg_seconds: lg,
            pg,
            action,
        });
    }
    let feasible = match mode {
        OptimizeMode::Latency => {
            l_new <= delta_target * l_old && in_band(total_pg_value, tau_final)
        }
        OptimizeMode::Accuracy => total_lg >= 0.0,
    };
    Ok(OptimizationPlan {
        model: model.name.clone(),
        mode,
        metric,
        layers,
        total_lg_seconds: total_lg,
        total_pg: total_pg_value,
        l_old_seconds: l_old,
        l_new_seconds: l_new,
        tau_final,
        delta_target,
        feasible,
        notes,
    })
}

fn validate_latency_params(params: &LatencyOptimizeParams) -> Result<(), Error> {
    if params.m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            message: String::from("at least one candidate must be requested"),
        });
    }
    if params.tau.is_nan() || params.tau <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tau",
            message: String::from("the tolerance band must be positive"),
        });
    }
    if params.delta.is_nan() || params.delta <= 0.0 || params.delta > 1.0 {
        return Err(Error::InvalidParameter {
            name: "delta",
            message: String::from("the latency target ratio must lie in (0, 1]"),
        });
    }
    Ok(())
}

/// Latency-oriented optimization: maximize the summed latency gain while
/// keeping the summed parameter gain inside `(-tau, tau)`.
///
/// When the resulting configuration misses `L_new <= delta * L_old`, tau
/// is doubled and the pass repeats, up to `max_retries` times. If no pass
/// reaches the target, the lowest-latency plan found is returned with
/// `feasible` set to false.
pub fn optimize_latency(
    model: &ModelConfig,
    tables: &[ProfileTable],
    params: &LatencyOptimizeParams,
) -> Result<OptimizationPlan, Error> {
    model.validate()?;
    validate_latency_params(params)?;
    let resolved = resolve_tables(model, tables)?;
    let ctxs = build_ctxs(model, &resolved, params.m)?;

    let mut tau_now = params.tau;
    let mut best: Option<OptimizationPlan> = None;
    for round in 0..=params.max_retries {
        let widths = run_round(&ctxs, tau_now, params.metric);
        let mut notes = Vec::new();
        if round > 0 {
            notes.push(alloc::format!(
                "tau doubled {round} time(s) to {tau_now} to chase the latency target"
            ));
        }
        let plan = build_plan(
            model,
            &resolved,
            &widths,
            OptimizeMode::Latency,
            params.metric,
            tau_now,
            params.delta,
            notes,
        )?;
        if plan.feasible {
            return Ok(plan);
        }
        let replace = match &best {
            None => true,
            Some(b) => plan.l_new_seconds < b.l_new_seconds,
        };
        if replace {
            best = Some(plan);
        }
        tau_now *= 2.0;
    }
    let mut plan = best.expect("at least one round ran");
    plan.feasible = false;
    plan.notes.push(alloc::format!(
        "latency target delta={} unreachable within {} tau doublings; best configuration kept",
        params.delta, params.max_retries
    ));
    Ok(plan)
}

/// Accuracy-oriented optimization: fill each layer's current wave.
///
/// Every layer moves to the largest profiled width whose latency equals
/// its current one (the right edge of its steady interval), capped by the
/// declared filter maximum. Per-layer latency gain is exactly zero, so
/// capacity is maximized at zero latency overhead.
pub fn optimize_accuracy(
    model: &ModelConfig,
    tables: &[ProfileTable],
    metric: GainMetric,
) -> Result<OptimizationPlan, Error> {
    model.validate()?;
    let resolved = resolve_tables(model, tables)?;
    let widths: Vec<u32> = model
        .layers
        .iter()
        .zip(&resolved)
        .map(|(layer, table)| {
            let here = table.latency(layer.width)?;
            let filled = table
                .rows
                .iter()
                .filter(|r| {
                    r.width >= layer.width
                        && r.width <= layer.spec.filters
                        && r.latency_s == here
                })
                .map(|r| r.width)
                .max()
                .unwrap_or(layer.width);
            Ok(filled)
        })
        .collect::<Result<_, Error>>()?;
    build_plan(
        model,
        &resolved,
        &widths,
        OptimizeMode::Accuracy,
        metric,
        0.0,
        1.0,
        vec![String::from("per-layer wave filling; zero latency overhead by construction")],
    )
}

/// Parameters of the exhaustive reference search.
#[derive(Clone, Copy, Debug)]
pub struct BruteForceParams {
    pub m: usize,
    pub tau: f64,
    pub delta: f64,
    pub metric: GainMetric,
    /// Upper bound on enumerated assignments.
    pub cap: u128,
}

pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 1_000_000;

/// Exhaustively evaluates every assignment of each layer to its old width
/// or one of its candidates, and returns the assignment with maximal
/// summed latency gain subject to the parameter-gain band. Ties prefer
/// larger parameter gain, then the lexicographically smallest width
/// vector.
pub fn brute_force_plan(
    model: &ModelConfig,
    tables: &[ProfileTable],
    params: &BruteForceParams,
) -> Result<OptimizationPlan, Error> {
    model.validate()?;
    validate_latency_params(&LatencyOptimizeParams {
        m: params.m,
        tau: params.tau,
        delta: params.delta,
        metric: params.metric,
        max_retries: 0,
    })?;
    let resolved = resolve_tables(model, tables)?;
    let ctxs = build_ctxs(model, &resolved, params.m)?;

    let choices: Vec<Vec<u32>> = ctxs
        .iter()
        .map(|ctx| {
            let mut c: Vec<u32> = ctx
                .cands
                .candidates
                .iter()
                .copied()
                .filter(|&w| w <= ctx.layer.spec.filters)
                .chain(core::iter::once(ctx.layer.width))
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();

    let size: u128 = choices.iter().map(|c| c.len() as u128).product();
    if size > params.cap {
        return Err(Error::SearchSpaceExceeded {
            size,
            cap: params.cap,
        });
    }

    let n = choices.len();
    let mut cursor = vec![0usize; n];
    let mut best: Option<(f64, f64, Vec<u32>)> = None;
    loop {
        let widths: Vec<u32> = cursor.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
        let pg: f64 = ctxs
            .iter()
            .zip(&widths)
            .map(|(ctx, &w)| parameter_gain(&ctx.layer.spec, ctx.layer.width, w, params.metric))
            .sum();
        if in_band(pg, params.tau) {
            let lg: f64 = ctxs
                .iter()
                .zip(&widths)
                .map(|(ctx, &w)| ctx.latency(ctx.layer.width) - ctx.latency(w))
                .sum();
            let take = match &best {
                None => true,
                Some((best_lg, best_pg, _)) => {
                    lg > *best_lg || (lg == *best_lg && pg > *best_pg)
                }
            };
            if take {
                best = Some((lg, pg, widths));
            }
        }
        // Odometer step, least-significant index last, so the enumeration
        // order is lexicographic and the first of any full tie wins.
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < choices[pos].len() {
                break;
            }
            cursor[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }

    let (_, _, widths) = best.expect("the all-old assignment is always in band");
    build_plan(
        model,
        &resolved,
        &widths,
        OptimizeMode::Latency,
        params.metric,
        params.tau,
        params.delta,
        vec![String::from("exhaustive reference search")],
    )
}
