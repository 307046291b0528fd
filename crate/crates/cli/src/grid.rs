//! Parsing of `--t0-grid` and `--dp-grid` values.

use anyhow::{bail, Context, Result};

/// `a:b:step` with `b` exclusive, or a comma list.
fn range_or_list<T: Copy>(text: &str, parse: impl Fn(&str) -> Result<T>, step_range: impl Fn(T, T, T) -> Result<Vec<T>>) -> Result<Vec<T>> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').collect();
    let out = if parts.len() == 3 && !text.contains(',') && !parts[0].is_empty() && !looks_like_clock(text) {
        step_range(parse(parts[0])?, parse(parts[1])?, parse(parts[2])?)?
    } else {
        text.split(',').map(|s| parse(s.trim())).collect::<Result<Vec<T>>>()?
    };
    if out.is_empty() {
        bail!("empty grid '{text}'");
    }
    Ok(out)
}

fn looks_like_clock(text: &str) -> bool {
    text.split(',').all(|p| {
        let p = p.trim();
        p.len() == 5 && p.as_bytes()[2] == b':'
    })
}

/// Start slots as `0:96:4`, `1,70`, or clock times `00:15,17:30`.
pub fn parse_t0_grid(text: &str, slots_per_hour: usize, main_slots: usize) -> Result<Vec<usize>> {
    let per_slot_min = 60 / slots_per_hour;
    let parse = |s: &str| -> Result<usize> {
        if let Some((h, m)) = s.split_once(':') {
            let h: usize = h.parse().with_context(|| format!("bad hour in '{s}'"))?;
            let m: usize = m.parse().with_context(|| format!("bad minute in '{s}'"))?;
            if m % per_slot_min != 0 {
                bail!("'{s}' is not on a slot boundary");
            }
            Ok(h * slots_per_hour + m / per_slot_min)
        } else {
            s.parse().with_context(|| format!("bad slot '{s}'"))
        }
    };
    let v = range_or_list(text, parse, |a, b, step| {
        if step == 0 {
            bail!("zero step");
        }
        Ok((a..b).step_by(step).collect())
    })?;
    if let Some(bad) = v.iter().find(|&&s| s >= main_slots) {
        bail!("start slot {bad} is outside the main day (0..{main_slots})");
    }
    Ok(v)
}

/// Deviations in kW as `-200:201:25` or `-100,100`.
pub fn parse_dp_grid(text: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> { s.parse::<f64>().with_context(|| format!("bad deviation '{s}'")) };
    range_or_list(text, parse, |a, b, step| {
        if !(step > 0.0) {
            bail!("step must be positive");
        }
        let n = ((b - a) / step).ceil().max(0.0) as usize;
        Ok((0..n).map(|i| a + step * i as f64).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_ranges_and_clock_lists() {
        assert_eq!(parse_t0_grid("0:96:24", 4, 96).unwrap(), vec![0, 24, 48, 72]);
        assert_eq!(parse_t0_grid("00:15,17:30", 4, 96).unwrap(), vec![1, 70]);
        assert_eq!(parse_t0_grid("1, 70", 4, 96).unwrap(), vec![1, 70]);
        assert!(parse_t0_grid("96", 4, 96).is_err());
        assert!(parse_t0_grid("00:10", 4, 96).is_err());
    }

    #[test]
    fn deviation_ranges_and_lists() {
        assert_eq!(parse_dp_grid("-50:51:50").unwrap(), vec![-50.0, 0.0, 50.0]);
        assert_eq!(parse_dp_grid("0").unwrap(), vec![0.0]);
        assert_eq!(parse_dp_grid("-100,100").unwrap(), vec![-100.0, 100.0]);
        assert!(parse_dp_grid("x").is_err());
    }
}
