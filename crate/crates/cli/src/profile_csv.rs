//! Profile CSV ingestion and serialization.
//!
//! The canonical schema is `layer_id,width,latency_s,flops,utilization`
//! with a required header, `.` decimals, and no thousands separators. The
//! `utilization` column is optional; when absent it is backfilled as
//! throughput normalized by the table's best throughput and flagged as
//! estimated. A file may carry several layers, each as one contiguous,
//! width-sorted group.
//!
//! The reader also accepts the `staircase` command's output columns
//! (`width,blocks,waves,latency_s,utilization,throughput_flops`), deriving
//! FLOPs from throughput and latency, so sweeps feed straight back into
//! candidate extraction.

use std::collections::BTreeSet;
use std::path::Path;

use wavefit_core::{ProfileRow, ProfileSource, ProfileTable};

use crate::{iofs, CliError, Result};

/// Relative tolerance for a provided throughput column against
/// `flops / latency`.
pub const THROUGHPUT_RECONCILE_TOL: f64 = 1e-6;

const KNOWN_COLUMNS: [&str; 8] = [
    "layer_id",
    "width",
    "latency_s",
    "flops",
    "utilization",
    "throughput_flops",
    "blocks",
    "waves",
];

struct Columns {
    layer_id: Option<usize>,
    width: usize,
    latency_s: usize,
    flops: Option<usize>,
    utilization: Option<usize>,
    throughput: Option<usize>,
}

fn input_err(msg: String) -> CliError {
    CliError::Input(msg)
}

fn parse_header(record: &csv::StringRecord) -> Result<Columns> {
    let mut seen = BTreeSet::new();
    let find = |name: &str| record.iter().position(|h| h.trim() == name);
    for header in record.iter() {
        let header = header.trim();
        if !KNOWN_COLUMNS.contains(&header) {
            return Err(input_err(format!("line 1: unknown column `{header}`")));
        }
        if !seen.insert(header.to_string()) {
            return Err(input_err(format!("line 1: duplicate column `{header}`")));
        }
    }
    let width = find("width")
        .ok_or_else(|| input_err(String::from("line 1: missing required column `width`")))?;
    let latency_s = find("latency_s")
        .ok_or_else(|| input_err(String::from("line 1: missing required column `latency_s`")))?;
    let flops = find("flops");
    let throughput = find("throughput_flops");
    if flops.is_none() && throughput.is_none() {
        return Err(input_err(String::from(
            "line 1: need a `flops` or `throughput_flops` column",
        )));
    }
    Ok(Columns {
        layer_id: find("layer_id"),
        width,
        latency_s,
        flops,
        utilization: find("utilization"),
        throughput,
    })
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<&'a str> {
    record
        .get(idx)
        .ok_or_else(|| input_err(format!("line {line}: missing `{name}` field")))
}

fn parse_f64(record: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<f64> {
    let raw = field(record, idx, line, name)?.trim();
    raw.parse::<f64>()
        .map_err(|_| input_err(format!("line {line}: `{raw}` is not a number in column `{name}`")))
}

fn parse_u32(record: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<u32> {
    let raw = field(record, idx, line, name)?.trim();
    raw.parse::<u32>().map_err(|_| {
        input_err(format!(
            "line {line}: `{raw}` is not a positive integer in column `{name}`"
        ))
    })
}

struct RawRow {
    line: u64,
    layer_id: String,
    width: u32,
    latency_s: f64,
    flops: Option<f64>,
    utilization: Option<f64>,
    throughput: Option<f64>,
}

/// Parses profile CSV text into per-layer tables. `fallback_layer_id`
/// names the single table of a file without a `layer_id` column.
pub fn parse_profile_csv(text: &str, fallback_layer_id: &str) -> Result<Vec<ProfileTable>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| input_err(format!("line 1: {e}")))?
        .clone();
    let cols = parse_header(&header)?;

    let mut raw_rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            input_err(format!("line {line}: malformed row: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let layer_id = match cols.layer_id {
            Some(idx) => {
                let id = field(&record, idx, line, "layer_id")?;
                if id.is_empty() {
                    return Err(input_err(format!("line {line}: empty `layer_id`")));
                }
                id.to_string()
            }
            None => fallback_layer_id.to_string(),
        };
        let latency_s = parse_f64(&record, cols.latency_s, line, "latency_s")?;
        if !latency_s.is_finite() || latency_s <= 0.0 {
            return Err(input_err(format!(
                "line {line}: latency must be positive, got {latency_s}"
            )));
        }
        let utilization = match cols.utilization {
            Some(idx) => {
                let u = parse_f64(&record, idx, line, "utilization")?;
                if !(u > 0.0 && u <= 1.0) {
                    return Err(input_err(format!(
                        "line {line}: utilization must lie in (0, 1], got {u}"
                    )));
                }
                Some(u)
            }
            None => None,
        };
        raw_rows.push(RawRow {
            line,
            layer_id,
            width: parse_u32(&record, cols.width, line, "width")?,
            latency_s,
            flops: cols.flops.map(|idx| parse_f64(&record, idx, line, "flops")).transpose()?,
            utilization,
            throughput: cols
                .throughput
                .map(|idx| parse_f64(&record, idx, line, "throughput_flops"))
                .transpose()?,
        });
    }
    if raw_rows.is_empty() {
        return Err(input_err(String::from("profile has a header but no rows")));
    }

    // Contiguous groups per layer id; a reappearing id means the file
    // violates the grouped layout.
    let mut groups: Vec<(String, Vec<RawRow>)> = Vec::new();
    let mut finished: BTreeSet<String> = BTreeSet::new();
    for row in raw_rows {
        match groups.last_mut() {
            Some((id, rows)) if *id == row.layer_id => rows.push(row),
            _ => {
                if finished.contains(&row.layer_id) {
                    return Err(input_err(format!(
                        "line {}: layer `{}` appears in more than one group; rows per layer must be contiguous",
                        row.line, row.layer_id
                    )));
                }
                if let Some((id, _)) = groups.last() {
                    finished.insert(id.clone());
                }
                groups.push((row.layer_id.clone(), vec![row]));
            }
        }
    }

    groups
        .into_iter()
        .map(|(layer_id, rows)| build_table(layer_id, rows))
        .collect()
}

fn build_table(layer_id: String, rows: Vec<RawRow>) -> Result<ProfileTable> {
    let mut prev: Option<u32> = None;
    for row in &rows {
        if let Some(p) = prev {
            if row.width <= p {
                return Err(input_err(format!(
                    "line {}: widths of layer `{layer_id}` must be strictly increasing ({} follows {p})",
                    row.line, row.width
                )));
            }
        }
        prev = Some(row.width);
    }

    // Resolve flops and throughput. When both are provided they must
    // reconcile through `throughput = flops / latency`; the recomputed
    // value is then stored.
    let mut resolved: Vec<ProfileRow> = Vec::with_capacity(rows.len());
    for row in &rows {
        let (flops, throughput) = match (row.flops, row.throughput) {
            (Some(flops), Some(t)) => {
                let recomputed = flops / row.latency_s;
                let scale = recomputed.abs().max(t.abs());
                if (recomputed - t).abs() > THROUGHPUT_RECONCILE_TOL * scale {
                    return Err(input_err(format!(
                        "line {}: throughput {t} disagrees with flops/latency = {recomputed}",
                        row.line
                    )));
                }
                (flops, recomputed)
            }
            (Some(flops), None) => (flops, flops / row.latency_s),
            (None, Some(t)) => (t * row.latency_s, t),
            (None, None) => unreachable!("header guarantees one of the two"),
        };
        if !flops.is_finite() || flops <= 0.0 {
            return Err(input_err(format!(
                "line {}: flops must be positive, got {flops}",
                row.line
            )));
        }
        resolved.push(ProfileRow {
            width: row.width,
            latency_s: row.latency_s,
            flops,
            utilization: row.utilization.unwrap_or(f64::NAN),
            throughput,
        });
    }

    // Backfill a missing utilization column from normalized throughput.
    let estimated = rows.iter().any(|r| r.utilization.is_none());
    if estimated {
        let peak = resolved
            .iter()
            .map(|r| r.throughput)
            .fold(f64::NEG_INFINITY, f64::max);
        for r in &mut resolved {
            r.utilization = r.throughput / peak;
        }
    }

    ProfileTable::new(layer_id, None, resolved, ProfileSource::Empirical, estimated)
        .map_err(|e| input_err(e.to_string()))
}

/// Loads a profile CSV file. A file without a `layer_id` column becomes a
/// single table named after the file stem.
pub fn load_profile_csv(path: &Path) -> Result<Vec<ProfileTable>> {
    let text = iofs::read_input(path, "profile CSV")?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| String::from("layer"));
    parse_profile_csv(&text, &fallback)
        .map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
}

/// Serializes tables to the canonical schema. Numeric fields print as the
/// shortest decimal that parses back to the identical value, so a
/// generate/serialize/load round trip is exact.
pub fn profile_to_csv(tables: &[ProfileTable]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["layer_id", "width", "latency_s", "flops", "utilization"])
        .expect("writing to memory");
    for table in tables {
        for row in &table.rows {
            writer
                .write_record([
                    table.layer_id.as_str(),
                    &row.width.to_string(),
                    &row.latency_s.to_string(),
                    &row.flops.to_string(),
                    &row.utilization.to_string(),
                ])
                .expect("writing to memory");
        }
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use wavefit_core::{GpuSpec, LayerSpec};

    #[test]
    fn well_formed_rows_parse() {
        let text = "layer_id,width,latency_s,flops,utilization\n\
                    conv1,80,0.001,1000000.0,1.0\n\
                    conv1,160,0.002,2000000.0,1.0\n\
                    conv2,80,0.001,500000.0,0.5\n";
        let tables = parse_profile_csv(text, "x").unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].rows.len(), 2);
        assert_eq!(tables[0].rows[1].throughput, 2_000_000.0 / 0.002);
        assert!(!tables[0].utilization_estimated);
    }

    #[test]
    fn zero_latency_is_a_value_error() {
        let text = "layer_id,width,latency_s,flops,utilization\nconv1,80,0.0,1.0,1.0\n";
        let err = parse_profile_csv(text, "x").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("latency"), "{err}");
    }

    #[test]
    fn disagreeing_throughput_is_rejected() {
        // flops/latency = 1e9, throughput claims 10% more.
        let text = "layer_id,width,latency_s,flops,throughput_flops,utilization\n\
                    conv1,80,0.001,1000000.0,1100000000.0,1.0\n";
        let err = parse_profile_csv(text, "x").unwrap_err();
        assert!(err.to_string().contains("disagrees"), "{err}");
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let text = "layer_id,width,latency_s,flops,utilization\n\
                    conv1,80,0.001,1000000.0,1.0\n\
                    conv1,eighty,0.002,2000000.0,1.0\n";
        let err = parse_profile_csv(text, "x").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn non_increasing_widths_are_a_schema_error() {
        let text = "layer_id,width,latency_s,flops,utilization\n\
                    conv1,160,0.001,1.0,1.0\n\
                    conv1,80,0.001,1.0,1.0\n";
        let err = parse_profile_csv(text, "x").unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
    }

    #[test]
    fn regrouped_layer_ids_are_rejected() {
        let text = "layer_id,width,latency_s,flops,utilization\n\
                    a,80,0.001,1.0,1.0\n\
                    b,80,0.001,1.0,1.0\n\
                    a,160,0.002,1.0,1.0\n";
        let err = parse_profile_csv(text, "x").unwrap_err();
        assert!(err.to_string().contains("contiguous"), "{err}");
    }

    #[test]
    fn missing_utilization_is_backfilled_from_throughput() {
        let text = "layer_id,width,latency_s,flops\n\
                    conv1,40,0.002,1000000.0\n\
                    conv1,80,0.001,1000000.0\n";
        let tables = parse_profile_csv(text, "x").unwrap();
        let t = &tables[0];
        assert!(t.utilization_estimated);
        assert_eq!(t.rows[1].utilization, 1.0);
        assert_eq!(t.rows[0].utilization, 0.5);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let layer = LayerSpec::dense_square("conv", 512, 3, 512, 64);
        let widths: Vec<u32> = (1..=512).step_by(7).collect();
        let table = ProfileTable::analytical(&layer, &GpuSpec::titan_v(), &widths).unwrap();
        let text = profile_to_csv(std::slice::from_ref(&table));
        let back = parse_profile_csv(&text, "x").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].rows.len(), table.rows.len());
        for (a, b) in table.rows.iter().zip(&back[0].rows) {
            assert_eq!(a.width, b.width);
            assert_eq!(a.latency_s.to_bits(), b.latency_s.to_bits());
            assert_eq!(a.flops.to_bits(), b.flops.to_bits());
            assert_eq!(a.utilization.to_bits(), b.utilization.to_bits());
            assert_eq!(a.throughput.to_bits(), b.throughput.to_bits());
        }
    }

    #[test]
    fn unknown_columns_are_rejected() {
        let text = "layer_id,width,latency_s,flops,wattage\nconv1,80,0.001,1.0,5\n";
        let err = parse_profile_csv(text, "x").unwrap_err();
        assert!(err.to_string().contains("wattage"), "{err}");
    }
}
