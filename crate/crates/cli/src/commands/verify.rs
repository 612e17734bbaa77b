//! `wavefit verify`: recompute a plan's claims from a profile and report
//! PASS or FAIL per check. A plan is only as good as the profile it was
//! built from, so verifying against another GPU's profile is the quickest
//! way to see that width configurations do not transfer.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use wavefit_core::{OptimizationPlan, OptimizeMode, PlanAction, ProfileTable};

use crate::manifest::RunManifest;
use crate::{iofs, model_file, profile_csv, CliError, Result};

/// Relative slack for recomputed quantities. Untampered plans match to
/// the bit; this band only absorbs decimal round-tripping of hand-edited
/// files.
const CHECK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Plan JSON produced by `optimize`.
    #[arg(long)]
    pub plan: PathBuf,
    /// Profile CSV to check the plan against.
    #[arg(long)]
    pub profile: PathBuf,
    /// Latency target override; defaults to the plan's delta_target.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output report path.
    #[arg(long)]
    pub out: PathBuf,
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= CHECK_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn coverage<'a>(
    plan: &OptimizationPlan,
    tables: &'a [ProfileTable],
) -> Result<Vec<&'a ProfileTable>> {
    plan.layers
        .iter()
        .map(|layer| {
            let table = tables
                .iter()
                .find(|t| t.layer_id == layer.layer_id)
                .ok_or_else(|| {
                    CliError::Input(format!("profile has no rows for layer `{}`", layer.layer_id))
                })?;
            for width in [layer.r_old, layer.r_new] {
                if table.row(width).is_none() {
                    return Err(CliError::Input(format!(
                        "profile does not cover width {width} of layer `{}`",
                        layer.layer_id
                    )));
                }
            }
            Ok(table)
        })
        .collect()
}

fn run_checks(plan: &OptimizationPlan, tables: &[&ProfileTable], delta: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| {
        checks.push(Check { name, passed, detail })
    };

    let mut lg_sum = 0.0;
    let mut pg_sum = 0.0;
    let mut l_old = 0.0;
    let mut l_new = 0.0;
    for (layer, table) in plan.layers.iter().zip(tables) {
        let before = table.latency(layer.r_old).expect("coverage checked");
        let after = table.latency(layer.r_new).expect("coverage checked");
        let lg = before - after;
        lg_sum += lg;
        pg_sum += layer.pg;
        l_old += before;
        l_new += after;
        push(
            format!("lg[{}]", layer.layer_id),
            close(lg, layer.lg_seconds),
            format!("claimed {}, profile gives {}", layer.lg_seconds, lg),
        );
        let action = match layer.r_new.cmp(&layer.r_old) {
            std::cmp::Ordering::Less => PlanAction::Down,
            std::cmp::Ordering::Greater => PlanAction::Up,
            std::cmp::Ordering::Equal => PlanAction::Keep,
        };
        push(
            format!("action[{}]", layer.layer_id),
            action == layer.action,
            format!("claimed {:?} for {} -> {}", layer.action, layer.r_old, layer.r_new),
        );
        if plan.mode == OptimizeMode::Accuracy {
            push(
                format!("zero_overhead[{}]", layer.layer_id),
                after == before,
                format!("latency {} -> {}", before, after),
            );
        }
    }

    push(
        String::from("total_lg"),
        close(lg_sum, plan.total_lg_seconds),
        format!("claimed {}, profile gives {}", plan.total_lg_seconds, lg_sum),
    );
    push(
        String::from("total_pg"),
        close(pg_sum, plan.total_pg),
        format!("claimed {}, per-layer sum gives {}", plan.total_pg, pg_sum),
    );
    push(
        String::from("l_old"),
        close(l_old, plan.l_old_seconds),
        format!("claimed {}, profile gives {}", plan.l_old_seconds, l_old),
    );
    push(
        String::from("l_new"),
        close(l_new, plan.l_new_seconds),
        format!("claimed {}, profile gives {}", plan.l_new_seconds, l_new),
    );

    if plan.feasible {
        if plan.mode == OptimizeMode::Latency {
            push(
                String::from("pg_band"),
                -plan.tau_final < pg_sum && pg_sum < plan.tau_final,
                format!("sum {} against (-{}, {})", pg_sum, plan.tau_final, plan.tau_final),
            );
        }
        push(
            String::from("latency_target"),
            l_new <= delta * l_old,
            format!("L_new {} against {} * L_old = {}", l_new, delta, delta * l_old),
        );
    }
    checks
}

pub fn run(args: &VerifyArgs) -> Result<()> {
    let plan = model_file::load_plan(&args.plan)?;
    let tables = profile_csv::load_profile_csv(&args.profile)?;
    let resolved = coverage(&plan, &tables)?;
    let delta = args.delta.unwrap_or(plan.delta_target);
    let checks = run_checks(&plan, &resolved, delta);

    let passed = checks.iter().filter(|c| c.passed).count();
    let mut report = String::new();
    for check in &checks {
        writeln!(
            report,
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        )
        .expect("writing to memory");
    }
    writeln!(
        report,
        "RESULT: {} ({passed}/{} checks passed)",
        if passed == checks.len() { "PASS" } else { "FAIL" },
        checks.len()
    )
    .expect("writing to memory");
    print!("{report}");

    iofs::atomic_write(&args.out, report.as_bytes())?;
    RunManifest::new("verify")
        .input(&args.plan)
        .input(&args.profile)
        .param("delta", delta)
        .write_for(&args.out)?;

    if passed == checks.len() {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!(
            "{} of {} checks failed; report written to `{}`",
            checks.len() - passed,
            checks.len(),
            args.out.display()
        )))
    }
}
