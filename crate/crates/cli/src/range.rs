//! Width-range grammar: `START..END[:STEP]`, where each value is an
//! absolute filter count (`64..512` or `64..512:8`) or a percentage of the
//! layer's maximum (`10%..100%:10%`). Percent widths round down and are
//! floored at one filter.

use crate::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scale {
    Absolute,
    Percent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WidthRange {
    start: u32,
    end: u32,
    step: u32,
    scale: Scale,
}

fn parse_value(raw: &str) -> std::result::Result<(u32, Scale), String> {
    let (digits, scale) = match raw.strip_suffix('%') {
        Some(d) => (d, Scale::Percent),
        None => (raw, Scale::Absolute),
    };
    let value: u32 = digits
        .trim()
        .parse()
        .map_err(|_| format!("`{raw}` is not a width or percentage"))?;
    Ok((value, scale))
}

impl WidthRange {
    pub fn parse(spec: &str) -> std::result::Result<Self, String> {
        let (range, step_raw) = match spec.split_once(':') {
            Some((r, s)) => (r, Some(s)),
            None => (spec, None),
        };
        let (start_raw, end_raw) = range
            .split_once("..")
            .ok_or_else(|| format!("`{spec}` is not a range (expected START..END[:STEP])"))?;
        let (start, s1) = parse_value(start_raw)?;
        let (end, s2) = parse_value(end_raw)?;
        let (step, s3) = match step_raw {
            Some(raw) => {
                let (v, s) = parse_value(raw)?;
                (v, s)
            }
            None => (1, s1),
        };
        if s1 != s2 || s1 != s3 {
            return Err(format!("`{spec}` mixes absolute widths and percentages"));
        }
        if start == 0 || end == 0 {
            return Err(format!("`{spec}` includes width 0"));
        }
        if step == 0 {
            return Err(format!("`{spec}` has step 0"));
        }
        if start > end {
            return Err(format!("`{spec}` runs backwards (start exceeds end)"));
        }
        Ok(WidthRange {
            start,
            end,
            step,
            scale: s1,
        })
    }

    /// Expands to concrete widths against a layer's maximum filter count.
    pub fn resolve(&self, max_filters: u32) -> Result<Vec<u32>> {
        let mut widths: Vec<u32> = Vec::new();
        let mut at = self.start;
        loop {
            let width = match self.scale {
                Scale::Absolute => at,
                Scale::Percent => {
                    ((max_filters as u64 * at as u64) / 100).max(1) as u32
                }
            };
            if widths.last() != Some(&width) {
                widths.push(width);
            }
            match at.checked_add(self.step) {
                Some(next) if next <= self.end => at = next,
                _ => break,
            }
        }
        if widths.is_empty() {
            return Err(CliError::Input(String::from("width range is empty")));
        }
        Ok(widths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absolute_ranges_expand() {
        let r = WidthRange::parse("64..70").unwrap();
        assert_eq!(r.resolve(512).unwrap(), [64, 65, 66, 67, 68, 69, 70]);
        let r = WidthRange::parse("64..512:64").unwrap();
        assert_eq!(r.resolve(512).unwrap(), [64, 128, 192, 256, 320, 384, 448, 512]);
        let r = WidthRange::parse("80..80").unwrap();
        assert_eq!(r.resolve(512).unwrap(), [80]);
    }

    #[test]
    fn percent_ranges_scale_with_the_maximum() {
        let r = WidthRange::parse("10%..100%:10%").unwrap();
        assert_eq!(
            r.resolve(512).unwrap(),
            [51, 102, 153, 204, 256, 307, 358, 409, 460, 512]
        );
        // Tiny layers collapse to a floor of one filter without duplicates.
        let r = WidthRange::parse("10%..30%:10%").unwrap();
        assert_eq!(r.resolve(4).unwrap(), [1]);
    }

    #[test]
    fn bad_ranges_are_rejected() {
        assert!(WidthRange::parse("512..64").is_err());
        assert!(WidthRange::parse("64").is_err());
        assert!(WidthRange::parse("10%..100").is_err());
        assert!(WidthRange::parse("1..10:0").is_err());
        assert!(WidthRange::parse("0..10").is_err());
        assert!(WidthRange::parse("a..b").is_err());
    }
}
