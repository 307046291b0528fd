//! Static SVG charts built only from the emitted CSV files.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const W: f64 = 960.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = ["#4e79a7", "#bab0ac", "#59a14f", "#f28e2b", "#76b7b2", "#e15759"];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.iter().map(str::to_owned).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::table("plot input", format!("missing column {name}")))
    }

    fn nums(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.col(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| Error::table("plot input", format!("{name}: '{}' is not a number", r[c])))
            })
            .collect()
    }
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
            W / 2.0,
            escape(title)
        );
        Self { out }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>"
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\"/>"
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>",
            p.join(" ")
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\">{}</text>",
            escape(s)
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            self.rect(W - RIGHT + 15.0, y - 9.0, 12.0, 12.0, color);
            self.text(W - RIGHT + 32.0, y + 1.0, "start", label);
        }
    }

    fn y_axis(&mut self, lo: f64, hi: f64, label: &str) {
        let plot_h = H - TOP - BOTTOM;
        self.line(LEFT, TOP, LEFT, H - BOTTOM, "black");
        for k in 0..=4 {
            let v = lo + (hi - lo) * k as f64 / 4.0;
            let y = H - BOTTOM - plot_h * k as f64 / 4.0;
            self.line(LEFT - 4.0, y, LEFT, y, "black");
            self.text(LEFT - 6.0, y + 4.0, "end", &format!("{v:.0}"));
        }
        let _ = writeln!(
            self.out,
            "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">{}</text>",
            H / 2.0,
            H / 2.0,
            escape(label)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn clock(slot: usize) -> String {
    format!("{:02}:{:02}", (slot / 4) % 24, (slot % 4) * 15)
}

fn x_slot_axis(svg: &mut Svg, slots: &[usize], bar_w: f64) {
    svg.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "black");
    for (i, &s) in slots.iter().enumerate() {
        if s % 8 == 0 {
            let x = LEFT + bar_w * (i as f64 + 0.5);
            svg.line(x, H - BOTTOM, x, H - BOTTOM + 4.0, "black");
            svg.text(x, H - BOTTOM + 16.0, "middle", &clock(s));
        }
    }
}

/// Stacked grid-draw decomposition per slot with the price overlaid.
pub fn schedule_svg(schedule_csv: &str, title: &str) -> Result<String> {
    let t = Table::parse(schedule_csv)?;
    let slots: Vec<usize> = t.nums("slot")?.into_iter().map(|s| s as usize).collect();
    let parts = [
        ("p_grid_it_kw", "IT"),
        ("p_grid_od_kw", "overhead"),
        ("p_ups_ch_kw", "UPS charge"),
        ("p_chil_crac_kw", "chiller to CRAC"),
        ("p_chil_tes_kw", "chiller to TES"),
    ];
    let series: Vec<Vec<f64>> = parts.iter().map(|(c, _)| t.nums(c)).collect::<Result<_>>()?;
    let price = t.nums("price_gbp_per_mwh")?;
    let n = slots.len().max(1);
    let totals: Vec<f64> = (0..slots.len()).map(|i| series.iter().map(|s| s[i]).sum()).collect();
    let top = nice_max(totals.iter().copied().fold(0.0, f64::max));
    let p_top = nice_max(price.iter().copied().fold(0.0, f64::max));
    let plot_h = H - TOP - BOTTOM;
    let bar_w = (W - LEFT - RIGHT) / n as f64;

    let mut svg = Svg::new(title);
    for i in 0..slots.len() {
        let mut y = H - BOTTOM;
        for (k, s) in series.iter().enumerate() {
            let h = s[i].max(0.0) / top * plot_h;
            y -= h;
            svg.rect(LEFT + bar_w * i as f64, y, bar_w * 0.9, h, PALETTE[k]);
        }
    }
    let pts: Vec<(f64, f64)> = price
        .iter()
        .enumerate()
        .map(|(i, p)| (LEFT + bar_w * (i as f64 + 0.5), H - BOTTOM - p / p_top * plot_h))
        .collect();
    svg.polyline(&pts, "black");
    svg.y_axis(0.0, top, "grid draw (kW)");
    svg.text(W - RIGHT + 4.0, TOP - 8.0, "start", &format!("price line: 0-{p_top:.0} GBP/MWh"));
    x_slot_axis(&mut svg, &slots, bar_w);
    let mut legend: Vec<(&str, &str)> = parts.iter().enumerate().map(|(k, (_, l))| (*l, PALETTE[k])).collect();
    legend.push(("price", "black"));
    svg.legend(&legend);
    Ok(svg.finish())
}

/// Two-bar comparison of base and optimised cost.
pub fn cost_svg(base_gbp: f64, optimised_gbp: f64) -> String {
    let top = nice_max(base_gbp.max(optimised_gbp));
    let plot_h = H - TOP - BOTTOM;
    let mut svg = Svg::new("Daily electricity cost");
    for (i, (label, v)) in [("base", base_gbp), ("optimised", optimised_gbp)].iter().enumerate() {
        let x = LEFT + 80.0 + 240.0 * i as f64;
        let h = v / top * plot_h;
        svg.rect(x, H - BOTTOM - h, 140.0, h, PALETTE[i * 2]);
        svg.text(x + 70.0, H - BOTTOM - h - 6.0, "middle", &format!("{v:.2} GBP"));
        svg.text(x + 70.0, H - BOTTOM + 16.0, "middle", label);
    }
    svg.y_axis(0.0, top, "GBP");
    svg.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "black");
    svg.finish()
}

/// Start slot × deviation grid shaded by sustainable duration.
pub fn heatmap_svg(heatmap_csv: &str) -> Result<String> {
    let t = Table::parse(heatmap_csv)?;
    let t0: Vec<usize> = t.nums("t0_slot")?.into_iter().map(|s| s as usize).collect();
    let dp = t.nums("delta_p_kw")?;
    let tau = t.nums("tau_hours")?;
    let mut t0s = t0.clone();
    t0s.sort_unstable();
    t0s.dedup();
    let mut dps = dp.clone();
    dps.sort_by(f64::total_cmp);
    dps.dedup();
    let tau_max = tau.iter().copied().fold(0.0, f64::max).max(0.25);
    let cw = (W - LEFT - RIGHT) / t0s.len().max(1) as f64;
    let ch = (H - TOP - BOTTOM) / dps.len().max(1) as f64;

    let mut svg = Svg::new("Sustainable duration by start time and deviation");
    for i in 0..t0.len() {
        let cx = t0s.binary_search(&t0[i]).unwrap_or(0);
        let cy = dps.iter().position(|d| *d == dp[i]).unwrap_or(0);
        let y = H - BOTTOM - ch * (cy as f64 + 1.0);
        svg.rect(LEFT + cw * cx as f64, y, cw, ch, &shade(tau[i] / tau_max));
    }
    for (k, d) in dps.iter().enumerate() {
        svg.text(LEFT - 6.0, H - BOTTOM - ch * (k as f64 + 0.5) + 4.0, "end", &format!("{d:.0}"));
    }
    let step = (t0s.len() / 12).max(1);
    for (k, s) in t0s.iter().enumerate().step_by(step) {
        svg.text(LEFT + cw * (k as f64 + 0.5), H - BOTTOM + 16.0, "middle", &clock(*s));
    }
    let _ = writeln!(
        svg.out,
        "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">deviation (kW)</text>",
        H / 2.0,
        H / 2.0
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = TOP + 10.0 + 18.0 * k as f64;
        svg.rect(W - RIGHT + 15.0, y - 9.0, 12.0, 12.0, &shade(f));
        svg.text(W - RIGHT + 32.0, y + 1.0, "start", &format!("{:.2} h", f * tau_max));
    }
    Ok(svg.finish())
}

/// Signed stacked bars of per-asset deviation with the total overlaid.
pub fn breakdown_svg(breakdown_csv: &str, title: &str) -> Result<String> {
    let t = Table::parse(breakdown_csv)?;
    let slots: Vec<usize> = t.nums("slot")?.into_iter().map(|s| s as usize).collect();
    let parts = [
        ("d_it_kw", "IT"),
        ("d_ups_kw", "UPS"),
        ("d_crac_kw", "chiller to CRAC"),
        ("d_tes_kw", "chiller to TES"),
    ];
    let series: Vec<Vec<f64>> = parts.iter().map(|(c, _)| t.nums(c)).collect::<Result<_>>()?;
    let total = t.nums("d_total_kw")?;
    let n = slots.len().max(1);
    let mut ext: f64 = 1.0;
    for i in 0..slots.len() {
        let pos: f64 = series.iter().map(|s| s[i].max(0.0)).sum();
        let neg: f64 = series.iter().map(|s| (-s[i]).max(0.0)).sum();
        ext = ext.max(pos).max(neg);
    }
    let ext = nice_max(ext);
    let plot_h = H - TOP - BOTTOM;
    let zero = TOP + plot_h / 2.0;
    let scale = plot_h / 2.0 / ext;
    let bar_w = (W - LEFT - RIGHT) / n as f64;

    let mut svg = Svg::new(title);
    for i in 0..slots.len() {
        let (mut up, mut down) = (zero, zero);
        for (k, s) in series.iter().enumerate() {
            let h = s[i].abs() * scale;
            if s[i] >= 0.0 {
                up -= h;
                svg.rect(LEFT + bar_w * i as f64, up, bar_w * 0.9, h, PALETTE[k]);
            } else {
                svg.rect(LEFT + bar_w * i as f64, down, bar_w * 0.9, h, PALETTE[k]);
                down += h;
            }
        }
    }
    let pts: Vec<(f64, f64)> = total
        .iter()
        .enumerate()
        .map(|(i, d)| (LEFT + bar_w * (i as f64 + 0.5), zero - d * scale))
        .collect();
    svg.polyline(&pts, "black");
    svg.line(LEFT, zero, W - RIGHT, zero, "#666");
    svg.y_axis(-ext, ext, "deviation from baseline (kW)");
    svg.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "black");
    for (i, &s) in slots.iter().enumerate() {
        if i % 4 == 0 {
            svg.text(LEFT + bar_w * (i as f64 + 0.5), H - BOTTOM + 16.0, "middle", &clock(s));
        }
    }
    let mut legend: Vec<(&str, &str)> = parts.iter().enumerate().map(|(k, (_, l))| (*l, PALETTE[k])).collect();
    legend.push(("total", "black"));
    svg.legend(&legend);
    Ok(svg.finish())
}

fn nice_max(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(x.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= x {
            return m * mag;
        }
    }
    10.0 * mag
}

/// White to dark blue.
fn shade(f: f64) -> String {
    let f = f.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(247.0, 8.0), c(251.0, 48.0), c(255.0, 107.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_is_a_pure_function_of_its_input() {
        let csv = "t0_slot,delta_p_kw,tau_hours,status\n0,-100,1.5,resolved\n0,100,0.25,resolved\n4,-100,0,zero\n4,100,3,horizon-capped\n";
        let a = heatmap_svg(csv).unwrap();
        assert_eq!(a, heatmap_svg(csv).unwrap());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    }

    #[test]
    fn missing_column_is_reported() {
        assert!(breakdown_svg("slot,d_it_kw\n1,2\n", "x").is_err());
    }

    #[test]
    fn axis_maxima_are_round() {
        assert_eq!(nice_max(873.0), 1000.0);
        assert_eq!(nice_max(140.0), 200.0);
        assert_eq!(nice_max(0.0), 1.0);
    }
}
