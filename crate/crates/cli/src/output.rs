use std::io::{self, Write};

use aoii::sim::RNG_ID;

use crate::eval::Evaluation;
use crate::params::Scenario;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CSV_COLUMNS: [&str; 12] = [
    "scenario",
    "varied_param",
    "value",
    "status",
    "analytic_aoii",
    "sim_aoii",
    "sim_ci95",
    "detC_or_Pi",
    "aoi_mm11",
    "aoi_mm11_preempt",
    "aoi_mm11_abandon",
    "aos_mm11",
];

/// Formats `x` with 12 significant digits, trailing zeros dropped.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent");
        format!("{}e{e}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Shortest round-trip text, or an empty field.
fn field(x: Option<f64>) -> String {
    x.filter(|v| !v.is_nan())
        .map(|v| v.to_string())
        .unwrap_or_default()
}

/// The `# meta:` comment line that heads every CSV.
pub fn meta_line(pairs: &[(&str, String)]) -> String {
    let mut s = format!("# meta: version={VERSION}");
    for (k, v) in pairs {
        s.push_str(&format!(",{k}={v}"));
    }
    s
}

pub fn default_meta(seed: u64) -> Vec<(&'static str, String)> {
    vec![("seed", seed.to_string()), ("rng", RNG_ID.to_string())]
}

pub struct Row<'a> {
    pub scenario: Scenario,
    pub varied: Option<(&'a str, f64)>,
    pub eval: &'a Evaluation,
}

impl Row<'_> {
    fn fields(&self) -> Vec<String> {
        let ev = self.eval;
        let (name, value) = match self.varied {
            Some((n, v)) => (n.to_string(), field(Some(v))),
            None => (String::new(), String::new()),
        };
        let sim_ok = ev.sim.as_ref().filter(|s| !s.diverged);
        let b = ev.baselines;
        vec![
            self.scenario.to_string(),
            name,
            value,
            ev.status.to_string(),
            field(ev.analytic),
            field(sim_ok.map(|s| s.time_average)),
            field(sim_ok.map(|s| s.ci_half_width95)),
            field(ev.determinant),
            field(b.map(|b| b.aoi)),
            field(b.map(|b| b.aoi_preempt)),
            field(b.map(|b| b.aoi_abandon)),
            field(b.map(|b| b.aos)),
        ]
    }
}

/// Writes the meta line, the header and one line per row.
pub fn write_csv<W: Write>(out: W, meta: &str, rows: &[Row<'_>]) -> io::Result<()> {
    let mut out = out;
    writeln!(out, "{meta}")?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.1), "0.1");
        assert_eq!(sig12(5.0 / 3.0), "1.66666666667");
        assert_eq!(sig12(825.0), "825");
        assert_eq!(sig12(-3.0), "-3");
        assert_eq!(sig12(1.0 / 3.0 * 1e-7), "3.33333333333e-8");
        assert_eq!(sig12(2.5e13), "2.5e13");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn empty_fields_for_missing_values() {
        assert_eq!(field(None), "");
        assert_eq!(field(Some(f64::NAN)), "");
        assert_eq!(field(Some(0.1)), "0.1");
    }
}
