//! CSV ingestion and emission. Files carry conventional units (K, μs) named
//! in the header; everything returned is SI.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use relaxkit::fitting::{EchoPoint, HyperfineLine};
use relaxkit::physconst::units::{s_to_us, us_to_s};
use relaxkit::{EchoTrace, RelaxationDataset, RelaxationPoint, TimeQuantity};

use crate::error::{CliError, CliResult};
use crate::report::fmt_num;

/// σ assigned to points that come without one, relative to the value.
pub const DEFAULT_RELATIVE_SIGMA: f64 = 0.05;

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

struct Columns {
    index: HashMap<String, usize>,
    source: String,
}

impl Columns {
    fn new<R: Read>(rdr: &mut csv::Reader<R>, source: &str) -> CliResult<Self> {
        let headers = rdr
            .headers()
            .map_err(|e| CliError::input(format!("{source}: {e}")))?;
        if headers.iter().all(|h| h.is_empty()) {
            return Err(CliError::input(format!("{source}: file is empty")));
        }
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        Ok(Self {
            index,
            source: source.to_string(),
        })
    }

    fn require(&self, name: &str) -> CliResult<usize> {
        self.index.get(name).copied().ok_or_else(|| {
            CliError::input(format!(
                "{}: missing column '{name}' in header",
                self.source
            ))
        })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    row: usize,
    line: u64,
    source: &'a str,
}

impl Row<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> CliError {
        CliError::input(format!(
            "{}: row {} (line {}): {msg}",
            self.source, self.row, self.line
        ))
    }

    fn cell(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("")
    }

    fn number(&self, idx: usize, name: &str) -> CliResult<f64> {
        let raw = self.cell(idx);
        if raw.is_empty() {
            return Err(self.err(format!("column '{name}' is empty")));
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(format!("column '{name}': '{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("column '{name}': value is not finite")));
        }
        Ok(v)
    }

    fn optional_number(&self, idx: Option<usize>, name: &str) -> CliResult<Option<f64>> {
        match idx {
            Some(i) if !self.cell(i).is_empty() => self.number(i, name).map(Some),
            _ => Ok(None),
        }
    }
}

fn records<R: Read>(
    rdr: &mut csv::Reader<R>,
    source: &str,
    mut each: impl FnMut(&Row) -> CliResult<()>,
) -> CliResult<usize> {
    let mut count = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("{source}: row {}: {e}", i + 1)))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        count += 1;
        each(&Row {
            record: &rec,
            row: count,
            line,
            source,
        })?;
    }
    if count == 0 {
        return Err(CliError::input(format!("{source}: no data rows")));
    }
    Ok(count)
}

/// Reads `temperature_K,time_us[,sigma_us][,line]`. Missing σ becomes 5% of
/// the value and is reported in the returned warnings.
pub fn read_relaxation_csv<R: Read>(
    r: R,
    source: &str,
    quantity: TimeQuantity,
    label: &str,
) -> CliResult<(RelaxationDataset, Vec<String>)> {
    let mut rdr = reader(r);
    let cols = Columns::new(&mut rdr, source)?;
    let t_col = cols.require("temperature_K")?;
    let time_col = cols.require("time_us")?;
    let sigma_col = cols.optional("sigma_us");
    let line_col = cols.optional("line");
    let mut points = Vec::new();
    let mut defaulted = 0;
    records(&mut rdr, source, |row| {
        let t = row.number(t_col, "temperature_K")?;
        if t <= 0.0 {
            return Err(row.err("temperature_K must be > 0"));
        }
        let time = row.number(time_col, "time_us")?;
        if time <= 0.0 {
            return Err(row.err(format!("time_us must be > 0, got {time}")));
        }
        let sigma = match row.optional_number(sigma_col, "sigma_us")? {
            Some(s) if s <= 0.0 => return Err(row.err(format!("sigma_us must be > 0, got {s}"))),
            Some(s) => s,
            None => {
                defaulted += 1;
                DEFAULT_RELATIVE_SIGMA * time
            }
        };
        let line = match line_col.map(|i| row.cell(i)).filter(|c| !c.is_empty()) {
            Some(tag) => Some(tag.parse::<HyperfineLine>().map_err(|e| row.err(e))?),
            None => None,
        };
        points.push(RelaxationPoint {
            temperature: t,
            time: us_to_s(time),
            sigma: us_to_s(sigma),
            line,
        });
        Ok(())
    })?;
    let mut warnings = Vec::new();
    if defaulted > 0 {
        warnings.push(format!(
            "{source}: {defaulted} point(s) without sigma_us; using 5% of the value"
        ));
    }
    Ok((RelaxationDataset::new(quantity, label, points)?, warnings))
}

pub fn load_relaxation_csv(
    path: &Path,
    quantity: TimeQuantity,
    label: &str,
) -> CliResult<(RelaxationDataset, Vec<String>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    read_relaxation_csv(file, &path.display().to_string(), quantity, label)
}

/// Reads `tau_us,amplitude[,sigma]`. Amplitudes may be negative. Missing σ
/// becomes 5% of the largest |amplitude|.
pub fn read_echo_csv<R: Read>(r: R, source: &str) -> CliResult<(EchoTrace, Vec<String>)> {
    let mut rdr = reader(r);
    let cols = Columns::new(&mut rdr, source)?;
    let tau_col = cols.require("tau_us")?;
    let amp_col = cols.require("amplitude")?;
    let sigma_col = cols.optional("sigma");
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    records(&mut rdr, source, |row| {
        let tau = row.number(tau_col, "tau_us")?;
        if tau < 0.0 {
            return Err(row.err(format!("tau_us must be >= 0, got {tau}")));
        }
        if let Some(first) = seen.insert(tau.to_bits(), row.row) {
            return Err(row.err(format!(
                "duplicate tau_us {tau} (first seen in row {first})"
            )));
        }
        let amp = row.number(amp_col, "amplitude")?;
        let sigma = row.optional_number(sigma_col, "sigma")?;
        if let Some(s) = sigma {
            if s <= 0.0 {
                return Err(row.err(format!("sigma must be > 0, got {s}")));
            }
        }
        rows.push((tau, amp, sigma));
        Ok(())
    })?;
    let scale = rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    let defaulted = rows.iter().filter(|r| r.2.is_none()).count();
    let fallback = DEFAULT_RELATIVE_SIGMA * scale;
    if defaulted > 0 && !(fallback > 0.0) {
        return Err(CliError::input(format!(
            "{source}: sigma missing and all amplitudes are zero"
        )));
    }
    let points = rows
        .into_iter()
        .map(|(tau, amplitude, sigma)| EchoPoint {
            tau: us_to_s(tau),
            amplitude,
            sigma: sigma.unwrap_or(fallback),
        })
        .collect();
    let mut warnings = Vec::new();
    if defaulted > 0 {
        warnings.push(format!(
            "{source}: {defaulted} point(s) without sigma; using 5% of the largest amplitude"
        ));
    }
    Ok((EchoTrace::new(points)?, warnings))
}

pub fn load_echo_csv(path: &Path) -> CliResult<(EchoTrace, Vec<String>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    read_echo_csv(file, &path.display().to_string())
}

pub fn write_relaxation_csv<W: Write>(
    mut w: W,
    ds: &RelaxationDataset,
    comment: &str,
) -> CliResult<()> {
    writeln!(w, "# {comment}")?;
    writeln!(w, "temperature_K,time_us,sigma_us")?;
    for p in ds.points() {
        writeln!(
            w,
            "{},{},{}",
            fmt_num(p.temperature),
            fmt_num(s_to_us(p.time)),
            fmt_num(s_to_us(p.sigma))
        )?;
    }
    Ok(())
}

pub fn write_echo_csv<W: Write>(mut w: W, trace: &EchoTrace, comment: &str) -> CliResult<()> {
    writeln!(w, "# {comment}")?;
    writeln!(w, "tau_us,amplitude,sigma")?;
    for p in trace.points() {
        writeln!(
            w,
            "{},{},{}",
            fmt_num(s_to_us(p.tau)),
            fmt_num(p.amplitude),
            fmt_num(p.sigma)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relax(text: &str) -> CliResult<(RelaxationDataset, Vec<String>)> {
        read_relaxation_csv(text.as_bytes(), "test.csv", TimeQuantity::T2, "x")
    }

    fn message(e: CliError) -> String {
        e.to_string()
    }

    #[test]
    fn converts_units() {
        let (ds, w) = relax("temperature_K,time_us,sigma_us\n300,12.5,0.4\n").unwrap();
        let p = ds.points()[0];
        assert_eq!(p.temperature, 300.0);
        assert!((p.time - 1.25e-5).abs() < 1e-20);
        assert!((p.sigma - 4e-7).abs() < 1e-21);
        assert!(w.is_empty());
    }

    #[test]
    fn sorts_and_keeps_duplicates_and_comments() {
        let text =
            "# comment\ntemperature_K,time_us,sigma_us\n300,1,0.1\n# mid\n200,2,0.1\n300,1.5,0.1\n";
        let (ds, _) = relax(text).unwrap();
        let t: Vec<f64> = ds.points().iter().map(|p| p.temperature).collect();
        assert_eq!(t, vec![200.0, 300.0, 300.0]);
    }

    #[test]
    fn row_addressed_errors() {
        let e =
            message(relax("temperature_K,time_us,sigma_us\n300,1,0.1\n310,-1,0.1\n").unwrap_err());
        assert!(e.contains("row 2") && e.contains("time_us"), "{e}");
        let e = message(relax("temperature_K,time_us,sigma_us\n300,abc,0.1\n").unwrap_err());
        assert!(e.contains("row 1") && e.contains("'abc'"), "{e}");
        let e = message(relax("temperature_K,sigma_us\n300,0.1\n").unwrap_err());
        assert!(e.contains("missing column 'time_us'"), "{e}");
        let e = message(relax("").unwrap_err());
        assert!(e.contains("empty"), "{e}");
        let e = message(relax("temperature_K,time_us,sigma_us\n").unwrap_err());
        assert!(e.contains("no data rows"), "{e}");
    }

    #[test]
    fn missing_sigma_defaults_with_warning() {
        let (ds, w) = relax("temperature_K,time_us\n300,10\n").unwrap();
        assert!((ds.points()[0].sigma - 5e-7).abs() < 1e-20);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn hyperfine_line_column() {
        let (ds, _) = relax("temperature_K,time_us,sigma_us,line\n20,230,5,MI_0\n").unwrap();
        assert_eq!(ds.points()[0].line, Some(HyperfineLine::Central));
        assert!(relax("temperature_K,time_us,sigma_us,line\n20,230,5,MI_7\n").is_err());
    }

    #[test]
    fn echo_csv() {
        let (tr, _) = read_echo_csv(
            "tau_us,amplitude,sigma\n0,1,0.01\n2,0.5,0.01\n1,-0.2,0.01\n".as_bytes(),
            "e",
        )
        .unwrap();
        assert_eq!(tr.len(), 3);
        assert_eq!(tr.points()[1].amplitude, -0.2);
        let e = read_echo_csv(
            "tau_us,amplitude,sigma\n0,1,0.01\n0,0.9,0.01\n".as_bytes(),
            "e",
        )
        .unwrap_err();
        assert!(e.to_string().contains("row 2") && e.to_string().contains("duplicate"));
    }

    #[test]
    fn round_trip_through_writer() {
        let (ds, _) = relax("temperature_K,time_us,sigma_us\n300,12.5,0.4\n250,30,1\n").unwrap();
        let mut buf = Vec::new();
        write_relaxation_csv(&mut buf, &ds, "round trip").unwrap();
        let (back, _) = relax(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(ds.points(), back.points());
    }
}
